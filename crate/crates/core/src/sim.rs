//! Monte Carlo simulation of incremental LMS around a ring of fading links.
//!
//! At node `k` and iteration `i` the estimate received from node `k-1` is
//! `h_k(i) w_{k-1,i} + q_{k,i}`; the node then applies one LMS correction
//! with its own regressor and measurement. Within a node visit random draws
//! are consumed in the order regressor, measurement noise, channel gain,
//! link noise. Constant channels and zero link-noise covariances draw
//! nothing, so an ideal ring consumes exactly the stream of classic ILMS.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::{symmetric_eigen, DataKind, NetworkProfile};

/// Runs are simulated in parallel in blocks of this size and folded into the
/// ensemble sums in run order, so results do not depend on the thread count.
const RUN_BLOCK: usize = 16;

/// Scalar type of simulated data.
pub trait Sample: ComplexField<RealField = f64> + Copy {
    const KIND: DataKind;

    /// Zero-mean Gaussian draw with `E|x|^2 = 1`.
    fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Sample for f64 {
    const KIND: DataKind = DataKind::Real;

    fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Sample for Complex64 {
    const KIND: DataKind = DataKind::Complex;

    fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimConfig {
    pub iterations: usize,
    pub runs: usize,
    /// Number of final iterations averaged for steady-state estimates.
    pub tail: usize,
    pub master_seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.runs == 0 {
            return Err(Error::Domain("iterations and runs must be >= 1".into()));
        }
        if self.tail == 0 || self.tail > self.iterations {
            return Err(Error::Domain(format!(
                "tail window must satisfy 1 <= tail <= iterations ({}), got {}",
                self.iterations, self.tail
            )));
        }
        Ok(())
    }
}

/// Random stream of run `run` under `master_seed`.
pub fn run_stream(master_seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run as u64);
    rng
}

/// One fading ILMS update:
/// `w = h w_prev + q + mu u^* (d - u (h w_prev + q))`.
pub fn fading_ilms_step<T: Sample>(
    w_prev: &DVector<T>,
    h: f64,
    q: &DVector<T>,
    u: &DVector<T>,
    d: T,
    mu: f64,
) -> DVector<T> {
    let received = w_prev * T::from_real(h) + q;
    let err = d - u.dot(&received);
    received + u.conjugate() * (err * T::from_real(mu))
}

/// Per-node data of a profile converted to the simulation scalar type.
#[derive(Clone, Debug)]
pub struct SimNetwork<T: Sample> {
    profile: NetworkProfile,
    w_o: DVector<T>,
    regressor_sqrt: Vec<DMatrix<T>>,
    covariance: Vec<DMatrix<T>>,
    /// `None` when the link-noise covariance is zero.
    link_noise_sqrt: Vec<Option<DMatrix<T>>>,
}

/// What happens at one node during one visit.
#[derive(Clone, Debug)]
pub struct NodeVisit<T: Sample> {
    /// Estimate `w_{k,i}` produced by the node.
    pub estimate: DVector<T>,
    /// `||w~_{k-1,i}||^2` of the incoming (pre-channel) estimate.
    pub msd: f64,
    /// `||w~_{k-1,i}||^2` weighted by this node's regressor covariance.
    pub emse: f64,
    /// `|d_k(i) - u_{k,i} w_{k-1,i}|^2`.
    pub mse: f64,
}

fn sqrt_psd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (values, vectors) = symmetric_eigen(a)?;
    let roots = values.map(|x| x.max(0.0).sqrt());
    Ok(&vectors * DMatrix::from_diagonal(&roots) * vectors.transpose())
}

fn to_field<T: Sample>(m: &DMatrix<f64>) -> DMatrix<T> {
    m.map(T::from_real)
}

impl<T: Sample> SimNetwork<T> {
    pub fn new(profile: &NetworkProfile) -> Result<Self> {
        let profile = profile.clone().validated()?;
        let mut regressor_sqrt = Vec::with_capacity(profile.len());
        let mut covariance = Vec::with_capacity(profile.len());
        let mut link_noise_sqrt = Vec::with_capacity(profile.len());
        for node in &profile.nodes {
            let chol = node
                .covariance
                .clone()
                .cholesky()
                .ok_or_else(|| Error::Validation("regressor covariance is not positive definite".into()))?;
            regressor_sqrt.push(to_field(&chol.l()));
            covariance.push(to_field(&node.covariance));
            let q = node.link_noise_cov();
            link_noise_sqrt.push(if q.iter().all(|&x| x == 0.0) { None } else { Some(to_field(&sqrt_psd(&q)?)) });
        }
        Ok(SimNetwork { w_o: profile.w_o.map(T::from_real), profile, regressor_sqrt, covariance, link_noise_sqrt })
    }

    pub fn profile(&self) -> &NetworkProfile {
        &self.profile
    }

    pub fn w_o(&self) -> &DVector<T> {
        &self.w_o
    }

    fn gaussian_vector<R: Rng + ?Sized>(m: usize, rng: &mut R) -> DVector<T> {
        DVector::from_fn(m, |_, _| T::gaussian(rng))
    }

    /// Draws `(u, d)` at node `k` (0-based): `u ~ N(0, R_k)`, `d = u w_o + v`.
    pub fn generate_data<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> (DVector<T>, T) {
        let m = self.w_o.len();
        let u = &self.regressor_sqrt[k] * Self::gaussian_vector(m, rng);
        let v = T::gaussian(rng) * T::from_real(self.profile.nodes[k].noise_var.sqrt());
        let d = u.dot(&self.w_o) + v;
        (u, d)
    }

    /// Visits node `k` with the estimate `w_prev` arriving from node `k-1`.
    pub fn visit<R: Rng + ?Sized>(&self, k: usize, w_prev: &DVector<T>, rng: &mut R) -> NodeVisit<T> {
        let node = &self.profile.nodes[k];
        let (u, d) = self.generate_data(k, rng);
        let h = node.channel.sample_gain(rng);
        let m = self.w_o.len();
        let q = match &self.link_noise_sqrt[k] {
            Some(s) => s * Self::gaussian_vector(m, rng),
            None => DVector::zeros(m),
        };

        let err_vec = &self.w_o - w_prev;
        let msd = err_vec.norm_squared();
        let emse = err_vec.dotc(&(&self.covariance[k] * &err_vec)).real();
        let e = d - u.dot(w_prev);
        let mse = e.modulus_squared();

        NodeVisit { estimate: fading_ilms_step(w_prev, h, &q, &u, d, node.step_size), msd, emse, mse }
    }

    /// One pass around the ring starting from `w_{N,i-1}`.
    pub fn run_cycle<R: Rng + ?Sized>(&self, w_state: &DVector<T>, rng: &mut R) -> Vec<NodeVisit<T>> {
        let mut out: Vec<NodeVisit<T>> = Vec::with_capacity(self.profile.len());
        for k in 0..self.profile.len() {
            let visit = self.visit(k, out.last().map_or(w_state, |v| &v.estimate), rng);
            out.push(visit);
        }
        out
    }
}

/// Tail averages of a single run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunTail {
    pub msd: Vec<f64>,
    pub emse: Vec<f64>,
    pub mse: Vec<f64>,
    /// Tail mean of `w~_{k,i} = w_o - w_{k,i}` (real part).
    pub weight_error: Vec<DVector<f64>>,
}

/// Ensemble learning curves, indexed `[node][iteration]`, natural units.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub msd_curve: Vec<Vec<f64>>,
    pub emse_curve: Vec<Vec<f64>>,
    pub mse_curve: Vec<Vec<f64>>,
    /// Ensemble mean of the tail-averaged weight error of each node.
    pub mean_weight_error: Vec<DVector<f64>>,
    /// Standard error of `mean_weight_error` across runs.
    pub mean_weight_error_se: Vec<DVector<f64>>,
    pub run_tails: Vec<RunTail>,
    pub config: SimConfig,
}

/// Steady-state estimate for one node.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct NodeMetrics {
    pub msd: f64,
    pub emse: f64,
    pub mse: f64,
}

impl EnsembleResult {
    pub fn nodes(&self) -> usize {
        self.msd_curve.len()
    }

    pub fn iterations(&self) -> usize {
        self.msd_curve.first().map_or(0, Vec::len)
    }

    /// Mean and standard error across runs of a per-run tail statistic.
    pub fn tail_mean_se(&self, node: usize, stat: impl Fn(&RunTail, usize) -> f64) -> (f64, f64) {
        mean_and_se(self.run_tails.iter().map(|t| stat(t, node)))
    }
}

pub(crate) fn mean_and_se(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let xs: Vec<f64> = xs.collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

struct RunOutput {
    msd: Vec<Vec<f64>>,
    emse: Vec<Vec<f64>>,
    mse: Vec<Vec<f64>>,
    tail: RunTail,
}

fn simulate_run<T: Sample>(net: &SimNetwork<T>, sim: &SimConfig, run: usize) -> RunOutput {
    let n = net.profile.len();
    let m = net.w_o.len();
    let t_len = sim.iterations;
    let tail_start = t_len - sim.tail;
    let mut rng = run_stream(sim.master_seed, run);

    let mut msd = vec![vec![0.0; t_len]; n];
    let mut emse = vec![vec![0.0; t_len]; n];
    let mut mse = vec![vec![0.0; t_len]; n];
    let mut we_sum = vec![DVector::<f64>::zeros(m); n];

    let mut w = DVector::<T>::zeros(m);
    for i in 0..t_len {
        for k in 0..n {
            let visit = net.visit(k, &w, &mut rng);
            msd[k][i] = visit.msd;
            emse[k][i] = visit.emse;
            mse[k][i] = visit.mse;
            w = visit.estimate;
            if i >= tail_start {
                for (acc, (wo, wk)) in we_sum[k].iter_mut().zip(net.w_o.iter().zip(w.iter())) {
                    *acc += (*wo - *wk).real();
                }
            }
        }
    }

    let w_len = sim.tail as f64;
    let tail_mean = |c: &Vec<Vec<f64>>| c.iter().map(|row| row[tail_start..].iter().sum::<f64>() / w_len).collect();
    let tail = RunTail {
        msd: tail_mean(&msd),
        emse: tail_mean(&emse),
        mse: tail_mean(&mse),
        weight_error: we_sum.into_iter().map(|s| s / w_len).collect(),
    };
    RunOutput { msd, emse, mse, tail }
}

fn ensemble<T: Sample>(profile: &NetworkProfile, sim: &SimConfig) -> Result<EnsembleResult> {
    sim.validate()?;
    let net = SimNetwork::<T>::new(profile)?;
    let n = profile.len();
    let m = profile.dim();
    let t_len = sim.iterations;

    let mut msd = vec![vec![0.0; t_len]; n];
    let mut emse = vec![vec![0.0; t_len]; n];
    let mut mse = vec![vec![0.0; t_len]; n];
    let mut run_tails = Vec::with_capacity(sim.runs);

    let runs: Vec<usize> = (0..sim.runs).collect();
    for block in runs.chunks(RUN_BLOCK) {
        let outputs: Vec<RunOutput> = block.par_iter().map(|&r| simulate_run(&net, sim, r)).collect();
        for out in outputs {
            for (acc, add) in [(&mut msd, &out.msd), (&mut emse, &out.emse), (&mut mse, &out.mse)] {
                for (a_row, b_row) in acc.iter_mut().zip(add) {
                    for (a, b) in a_row.iter_mut().zip(b_row) {
                        *a += b;
                    }
                }
            }
            run_tails.push(out.tail);
        }
    }

    let scale = 1.0 / sim.runs as f64;
    for curve in [&mut msd, &mut emse, &mut mse] {
        curve.iter_mut().flatten().for_each(|x| *x *= scale);
    }

    let mut mean_weight_error = Vec::with_capacity(n);
    let mut mean_weight_error_se = Vec::with_capacity(n);
    for k in 0..n {
        let mut mean = DVector::zeros(m);
        let mut se = DVector::zeros(m);
        for j in 0..m {
            let (mu, s) = mean_and_se(run_tails.iter().map(|t: &RunTail| t.weight_error[k][j]));
            mean[j] = mu;
            se[j] = s;
        }
        mean_weight_error.push(mean);
        mean_weight_error_se.push(se);
    }

    Ok(EnsembleResult {
        msd_curve: msd,
        emse_curve: emse,
        mse_curve: mse,
        mean_weight_error,
        mean_weight_error_se,
        run_tails,
        config: *sim,
    })
}

/// Runs `sim.runs` independent realisations of `sim.iterations` ring cycles.
///
/// Run `r` draws from [`run_stream`]`(master_seed, r)`. Divergence is not an
/// error; the curves simply grow.
pub fn run_ensemble(profile: &NetworkProfile, sim: &SimConfig) -> Result<EnsembleResult> {
    match profile.data {
        DataKind::Real => ensemble::<f64>(profile, sim),
        DataKind::Complex => ensemble::<Complex64>(profile, sim),
    }
}

/// Per-node means of the last `tail` iterations of each ensemble curve.
pub fn steady_state_from_curves(res: &EnsembleResult, tail: usize) -> Result<Vec<NodeMetrics>> {
    let t_len = res.iterations();
    if tail == 0 || tail > t_len {
        return Err(Error::Domain(format!("tail window {tail} outside 1..={t_len}")));
    }
    let mean = |row: &[f64]| row[t_len - tail..].iter().sum::<f64>() / tail as f64;
    Ok((0..res.nodes())
        .map(|k| NodeMetrics {
            msd: mean(&res.msd_curve[k]),
            emse: mean(&res.emse_curve[k]),
            mse: mean(&res.mse_curve[k]),
        })
        .collect())
}
