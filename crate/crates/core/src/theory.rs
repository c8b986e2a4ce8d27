//! Closed-form mean and mean-square behaviour of fading ILMS.
//!
//! All per-node quantities are expressed in the eigenbasis `U_k` of the
//! node's regressor covariance, where the mean-square map of a diagonal
//! weighting is the symmetric matrix
//!
//! ```text
//! F_k = I - 2 mu_k Λ_k + mu_k^2 (γ Λ_k^2 + λ_k λ_k^T)
//! ```
//!
//! and one hop of the ring maps a weighting vector `σ` at node `k` to
//! `s_k F_k σ` at node `k-1`, plus the driving term `g_k σ`. Chaining these
//! maps around the ring treats every node's weighting vector in the same
//! coordinates, which is exact when all covariances share an eigenbasis
//! (see [`NetworkProfile::covariances_commute`]).
//!
//! Node indices in this module are 0-based; the link into node `k` comes
//! from node `k-1 (mod N)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::spectral_radius;
use crate::network::{eigendecompose, EigenFactorization, NetworkProfile};
use crate::sim::NodeMetrics;

/// Tolerance used for the two-route check of the steady-state mean matrices.
pub const DEFAULT_C_TOL: f64 = 1e-12;

/// Margin below one required of `ρ(Π_{k,1})` before inverting `I - Π_{k,1}`.
const MS_MARGIN: f64 = 1e-9;

const MAX_MEAN_CYCLES: usize = 1_000_000;

/// How the channel second moments enter the partial ring products `Π_{k,l}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PiConvention {
    /// Each factor `F_n` carries its own `s_n`.
    #[default]
    PerStep,
    /// The product of all `N` second moments multiplies every partial product.
    GlobalPrefactor,
}

impl PiConvention {
    pub fn other(self) -> Self {
        match self {
            PiConvention::PerStep => PiConvention::GlobalPrefactor,
            PiConvention::GlobalPrefactor => PiConvention::PerStep,
        }
    }
}

/// Mean-square propagation matrix `I - mu X + mu^2 Y` with `X = 2Λ` and
/// `Y = γΛ² + λλ^T`.
pub fn fbar(mu: f64, lambda: &DVector<f64>, gamma: f64) -> DMatrix<f64> {
    let m = lambda.len();
    let mut f = &(lambda * lambda.transpose()) * (mu * mu);
    for j in 0..m {
        f[(j, j)] += 1.0 - 2.0 * mu * lambda[j] + mu * mu * gamma * lambda[j] * lambda[j];
    }
    f
}

/// `J_k = I - mu_k R_k`.
pub fn mean_transition(mu: f64, covariance: &DMatrix<f64>) -> DMatrix<f64> {
    let m = covariance.nrows();
    DMatrix::identity(m, m) - covariance * mu
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeanStability {
    pub rho: f64,
    pub stable: bool,
    /// Cycle map of the mean recursion, `m_N J_N ... m_1 J_1`.
    pub cycle: DMatrix<f64>,
}

pub fn mean_stability(profile: &NetworkProfile) -> MeanStability {
    let m = profile.dim();
    let mut cycle = DMatrix::identity(m, m);
    for node in &profile.nodes {
        let step = mean_transition(node.step_size, &node.covariance) * node.channel.moments().mean;
        cycle = step * cycle;
    }
    let rho = spectral_radius(&cycle);
    MeanStability { rho, stable: rho < 1.0, cycle }
}

/// Steady-state matrices `C_{k,∞}` with `E[w~_{k,∞}] = C_{k,∞} w_o`, one per
/// node output.
///
/// Evaluated in closed form and by iterating the recursion
/// `C_k = m_k J_k C_{k-1} + (1 - m_k) J_k` from `C = I`; the two must agree
/// within `10 * tol` relative to `max(1, ‖C‖)` (Frobenius norm).
pub fn steady_state_c(profile: &NetworkProfile, tol: f64) -> Result<Vec<DMatrix<f64>>> {
    let ms = mean_stability(profile);
    if !ms.stable {
        return Err(Error::MeanUnstable { rho: ms.rho });
    }
    let n = profile.len();
    let m = profile.dim();
    let identity = DMatrix::<f64>::identity(m, m);
    let steps: Vec<(f64, DMatrix<f64>)> = profile
        .nodes
        .iter()
        .map(|node| (node.channel.moments().mean, mean_transition(node.step_size, &node.covariance)))
        .collect();

    // closed form: C_N = (I - M)^{-1} sum_n [m_N J_N ... m_{n+1} J_{n+1}] (1 - m_n) J_n
    let mut offset = DMatrix::zeros(m, m);
    let mut suffix = identity.clone();
    for (mean, j) in steps.iter().rev() {
        offset += &suffix * j * (1.0 - mean);
        suffix = &suffix * j * *mean;
    }
    let last =
        (&identity - &ms.cycle).lu().solve(&offset).ok_or_else(|| Error::Consistency("I - M is singular".into()))?;
    let closed = propagate_mean(&steps, &last);

    // iteration from C_{0,1} = I
    let stop = tol * (1.0 - ms.rho).max(f64::EPSILON) * offset.norm().max(1.0);
    let mut c = identity;
    let mut iterated = None;
    for _ in 0..MAX_MEAN_CYCLES {
        let outputs = propagate_mean(&steps, &c);
        let next = outputs[n - 1].clone();
        let diff = (&next - &c).norm();
        c = next;
        if diff < stop {
            iterated = Some(propagate_mean(&steps, &c));
            break;
        }
    }
    let iterated = iterated
        .ok_or_else(|| Error::Consistency(format!("mean recursion did not converge in {MAX_MEAN_CYCLES} cycles")))?;

    for (k, (a, b)) in closed.iter().zip(&iterated).enumerate() {
        let gap = (a - b).norm();
        if gap > 10.0 * tol * a.norm().max(1.0) {
            return Err(Error::Consistency(format!(
                "steady-state mean matrix of node {} differs between routes by {gap:e}",
                k + 1
            )));
        }
    }
    Ok(closed)
}

fn propagate_mean(steps: &[(f64, DMatrix<f64>)], start: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(steps.len());
    let mut c = start.clone();
    for (mean, j) in steps {
        c = j * &c * *mean + j * (1.0 - mean);
        out.push(c.clone());
    }
    out
}

/// Steady-state mean weight error `C_{k,∞} w_o` of every node output.
pub fn theoretical_bias(profile: &NetworkProfile) -> Result<Vec<DVector<f64>>> {
    Ok(steady_state_c(profile, DEFAULT_C_TOL)?.iter().map(|c| c * &profile.w_o).collect())
}

/// Per-node quantities in the node's own eigenbasis.
#[derive(Clone, Debug)]
pub struct NodeTheory {
    pub eigen: EigenFactorization,
    pub step_size: f64,
    pub noise_var: f64,
    /// Channel mean `m_k`.
    pub mean_gain: f64,
    /// Channel second moment `s_k`.
    pub second_gain: f64,
    pub fbar: DMatrix<f64>,
    /// `diag(U_k^T Q_k U_k)`.
    pub link_noise_diag: DVector<f64>,
    /// `U_k^T w_o`.
    pub w_o_bar: DVector<f64>,
}

impl NodeTheory {
    fn new(profile: &NetworkProfile, k: usize) -> Result<Self> {
        let node = &profile.nodes[k];
        let eigen = eigendecompose(&node.covariance)?;
        let u = &eigen.basis;
        let q_bar = u.transpose() * node.link_noise_cov() * u;
        let moments = node.channel.moments();
        Ok(NodeTheory {
            fbar: fbar(node.step_size, &eigen.eigenvalues, profile.gamma),
            link_noise_diag: q_bar.diagonal(),
            w_o_bar: u.transpose() * &profile.w_o,
            step_size: node.step_size,
            noise_var: node.noise_var,
            mean_gain: moments.mean,
            second_gain: moments.second,
            eigen,
        })
    }

    pub fn lambda(&self) -> &DVector<f64> {
        &self.eigen.eigenvalues
    }

    /// Driving term `g_k` (as a column) given the mean matrix `C_{k-1}` of
    /// the incoming estimate in original coordinates:
    ///
    /// ```text
    /// g_k = mu^2 σ_v^2 λ + F q̄ + (1 - 2m + s) F d + 2 (m - s) F C̄^T d
    /// ```
    ///
    /// with `d = diag(w̄_o w̄_o^T)` and `C̄ = U^T C_{k-1} U`.
    pub fn driving_term(&self, c_prev: &DMatrix<f64>) -> DVector<f64> {
        let u = &self.eigen.basis;
        let c_bar = u.transpose() * c_prev * u;
        let d = self.w_o_bar.map(|x| x * x);
        let (m, s) = (self.mean_gain, self.second_gain);
        let mut forced = &self.link_noise_diag + &d * (1.0 - 2.0 * m + s);
        forced += c_bar.transpose() * &d * (2.0 * (m - s));
        self.lambda() * (self.step_size * self.step_size * self.noise_var) + &self.fbar * forced
    }
}

/// Every deterministic quantity needed for the steady-state formulas.
#[derive(Clone, Debug)]
pub struct TheoryContext {
    pub nodes: Vec<NodeTheory>,
    pub gamma: f64,
    pub convention: PiConvention,
    pub mean: MeanStability,
    /// `C_{k,∞}` of each node output, original coordinates.
    pub c_inf: Vec<DMatrix<f64>>,
    /// Steady-state driving terms `g_k` (columns).
    pub g: Vec<DVector<f64>>,
}

impl TheoryContext {
    /// Requires a valid, mean-stable profile.
    pub fn new(profile: &NetworkProfile, convention: PiConvention) -> Result<Self> {
        let profile = profile.clone().validated()?;
        let nodes = (0..profile.len()).map(|k| NodeTheory::new(&profile, k)).collect::<Result<Vec<_>>>()?;
        let mean = mean_stability(&profile);
        let c_inf = steady_state_c(&profile, DEFAULT_C_TOL)?;
        let n = profile.len();
        let g = (0..n).map(|k| nodes[k].driving_term(&c_inf[(k + n - 1) % n])).collect();
        Ok(TheoryContext { nodes, gamma: profile.gamma, convention, mean, c_inf, g })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn dim(&self) -> usize {
        self.nodes[0].lambda().len()
    }

    /// `Π_{k,l}`, `1 <= l <= N`: the ordered product of `F` over the wrapped
    /// node sequence `k+l-1, ..., N-1, 0, ..., k-1`.
    pub fn pi(&self, k: usize, l: usize) -> DMatrix<f64> {
        let n = self.len();
        assert!((1..=n).contains(&l), "segment offset {l} outside 1..={n}");
        let m = self.dim();
        let mut prod = DMatrix::identity(m, m);
        for step in (l - 1)..n {
            let node = &self.nodes[(k + step) % n];
            prod *= &node.fbar;
            if self.convention == PiConvention::PerStep {
                prod *= node.second_gain;
            }
        }
        if self.convention == PiConvention::GlobalPrefactor {
            prod *= self.nodes.iter().map(|x| x.second_gain).product::<f64>();
        }
        prod
    }

    /// `a_k = g_k Π_{k,2} + g_{k+1} Π_{k,3} + ... + g_{k-2} Π_{k,N} + g_{k-1}`, as a column.
    pub fn a(&self, k: usize) -> DVector<f64> {
        let n = self.len();
        let mut acc = self.g[(k + n - 1) % n].clone();
        for j in 0..n - 1 {
            acc += self.pi(k, j + 2).transpose() * &self.g[(k + j) % n];
        }
        acc
    }

    /// Steady-state MSD, EMSE and MSE seen at every node.
    pub fn metrics(&self) -> Result<Vec<NodeMetrics>> {
        let m = self.dim();
        let identity = DMatrix::<f64>::identity(m, m);
        (0..self.len())
            .map(|k| {
                let cycle = self.pi(k, 1);
                let rho = spectral_radius(&cycle);
                if rho >= 1.0 - MS_MARGIN {
                    return Err(Error::MeanSquareUnstable { node: k + 1, rho });
                }
                let lu = (&identity - &cycle).lu();
                let a = self.a(k);
                let solve =
                    |rhs: &DVector<f64>| lu.solve(rhs).ok_or_else(|| Error::Consistency("I - Π is singular".into()));
                let msd = a.dot(&solve(&DVector::from_element(m, 1.0))?);
                let emse = a.dot(&solve(self.nodes[k].lambda())?);
                let mse = emse + self.nodes[k].noise_var;
                Ok(NodeMetrics { msd, emse, mse })
            })
            .collect()
    }
}

pub fn theoretical_metrics(profile: &NetworkProfile, convention: PiConvention) -> Result<Vec<NodeMetrics>> {
    TheoryContext::new(profile, convention)?.metrics()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MsStability {
    /// `s_k ρ(F_k)` per node.
    pub per_node: Vec<f64>,
    /// `ρ(Π_{k,1})` per node, the condition actually required by the formulas.
    pub cycle_rho: Vec<f64>,
    /// Every `s_k ρ(F_k) < 1`.
    pub stable: bool,
}

pub fn ms_stability(profile: &NetworkProfile) -> Result<MsStability> {
    let profile = profile.clone().validated()?;
    let mut nodes = Vec::with_capacity(profile.len());
    for k in 0..profile.len() {
        nodes.push(NodeTheory::new(&profile, k)?);
    }
    let per_node: Vec<f64> = nodes
        .iter()
        .map(|x| {
            let eig = x.fbar.symmetric_eigenvalues();
            x.second_gain * eig.iter().fold(0.0_f64, |r, v| r.max(v.abs()))
        })
        .collect();
    let n = nodes.len();
    let m = profile.dim();
    let cycle_rho = (0..n)
        .map(|k| {
            let mut prod = DMatrix::identity(m, m);
            for step in 0..n {
                let node = &nodes[(k + step) % n];
                prod = prod * &node.fbar * node.second_gain;
            }
            spectral_radius(&prod)
        })
        .collect();
    let stable = per_node.iter().all(|&x| x < 1.0);
    Ok(MsStability { per_node, cycle_rho, stable })
}

/// Predicted learning curves, indexed `[node][iteration]`, aligned with the
/// simulated curves (the value at node `k` concerns the incoming estimate).
#[derive(Clone, Debug, PartialEq)]
pub struct TransientCurves {
    pub msd: Vec<Vec<f64>>,
    pub emse: Vec<Vec<f64>>,
    pub mse: Vec<Vec<f64>>,
}

/// Iterates the time-varying diagonal variance recursion from a zero
/// initial estimate (`w~ = w_o`, `C = I`).
pub fn transient_recursion(profile: &NetworkProfile, iterations: usize) -> Result<TransientCurves> {
    let profile = profile.clone().validated()?;
    let n = profile.len();
    let nodes = (0..n).map(|k| NodeTheory::new(&profile, k)).collect::<Result<Vec<_>>>()?;
    let steps: Vec<DMatrix<f64>> = profile.nodes.iter().map(|x| mean_transition(x.step_size, &x.covariance)).collect();

    let mut curves = TransientCurves {
        msd: vec![Vec::with_capacity(iterations); n],
        emse: vec![Vec::with_capacity(iterations); n],
        mse: vec![Vec::with_capacity(iterations); n],
    };
    let mut p = nodes[0].w_o_bar.map(|x| x * x);
    let m = profile.dim();
    let mut c = DMatrix::<f64>::identity(m, m);
    for _ in 0..iterations {
        for (k, node) in nodes.iter().enumerate() {
            let emse = node.lambda().dot(&p);
            curves.msd[k].push(p.sum());
            curves.emse[k].push(emse);
            curves.mse[k].push(emse + node.noise_var);

            let g = node.driving_term(&c);
            p = &node.fbar * &p * node.second_gain + g;
            c = &steps[k] * &c * node.mean_gain + &steps[k] * (1.0 - node.mean_gain);
        }
    }
    Ok(curves)
}
