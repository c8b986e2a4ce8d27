//! Theory-versus-simulation comparison and independent oracles.

use std::ops::Range;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{DataKind, NetworkProfile};
use crate::sim::{mean_and_se, run_stream, EnsembleResult, NodeMetrics, Sample, SimNetwork};
use crate::theory::{mean_stability, ms_stability, PiConvention, TransientCurves};

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn metrics_db(m: &NodeMetrics) -> NodeMetrics {
    NodeMetrics { msd: to_db(m.msd), emse: to_db(m.emse), mse: to_db(m.mse) }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeReport {
    /// 1-based node index.
    pub node: usize,
    pub theory: Option<NodeMetrics>,
    pub theory_db: Option<NodeMetrics>,
    pub sim: Option<NodeMetrics>,
    pub sim_db: Option<NodeMetrics>,
    /// `|theory_db - sim_db|` per metric.
    pub delta_db: Option<NodeMetrics>,
    /// Steady-state mean weight error of the node output.
    pub bias_theory: Option<Vec<f64>>,
    pub bias_sim: Option<Vec<f64>>,
    pub bias_norm_theory: Option<f64>,
    pub bias_norm_sim: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilitySummary {
    /// Spectral radius of the mean cycle map.
    pub mean_rho: f64,
    pub mean_stable: bool,
    /// `max_k s_k ρ(F_k)`.
    pub max_node_ms_factor: f64,
    pub ms_stable: bool,
    /// `ρ(Π_{k,1})` per node.
    pub cycle_rho: Vec<f64>,
    /// The diagonalised formulas are exact only when this holds.
    pub covariances_commute: bool,
}

impl StabilitySummary {
    pub fn of(profile: &NetworkProfile) -> Result<Self> {
        let mean = mean_stability(profile);
        let ms = ms_stability(profile)?;
        Ok(StabilitySummary {
            mean_rho: mean.rho,
            mean_stable: mean.stable,
            max_node_ms_factor: ms.per_node.iter().copied().fold(0.0, f64::max),
            ms_stable: ms.stable,
            cycle_rho: ms.cycle_rho,
            covariances_commute: profile.covariances_commute(),
        })
    }
}

/// Theory under the alternative `Π` convention, compared with the same simulation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConventionComparison {
    pub primary: PiConvention,
    pub primary_max_delta_db: f64,
    pub alternate: PiConvention,
    pub alternate_theory: Vec<NodeMetrics>,
    pub alternate_max_delta_db: f64,
    pub alternate_pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
    pub mode: String,
    pub pi_convention: PiConvention,
    pub gamma: f64,
    pub data: String,
    pub iterations: usize,
    pub runs: usize,
    pub tail: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub nodes: Vec<NodeReport>,
    pub tolerance_db: f64,
    pub max_delta_db: Option<f64>,
    /// `None` unless both theory and simulation are present.
    pub pass: Option<bool>,
    pub stability: Option<StabilitySummary>,
    pub convention: Option<ConventionComparison>,
    pub provenance: Option<Provenance>,
}

fn delta(a: &NodeMetrics, b: &NodeMetrics) -> NodeMetrics {
    let a = metrics_db(a);
    let b = metrics_db(b);
    NodeMetrics { msd: (a.msd - b.msd).abs(), emse: (a.emse - b.emse).abs(), mse: (a.mse - b.mse).abs() }
}

/// Largest dB gap over all nodes and metrics; NaN gaps count as infinite.
pub fn max_delta_db(theory: &[NodeMetrics], sim: &[NodeMetrics]) -> f64 {
    theory
        .iter()
        .zip(sim)
        .flat_map(|(t, s)| {
            let d = delta(t, s);
            [d.msd, d.emse, d.mse]
        })
        .map(|x| if x.is_nan() { f64::INFINITY } else { x })
        .fold(0.0, f64::max)
}

impl MetricsReport {
    /// Report with whichever of theory and simulation is available.
    pub fn new(
        n: usize,
        theory: Option<&[NodeMetrics]>,
        sim: Option<&[NodeMetrics]>,
        tolerance_db: f64,
    ) -> Result<Self> {
        for (what, v) in [("theory", theory), ("simulation", sim)] {
            if let Some(v) = v {
                if v.len() != n {
                    return Err(Error::Dimension(format!("{what} has {} nodes, expected {n}", v.len())));
                }
            }
        }
        let nodes = (0..n)
            .map(|k| {
                let t = theory.map(|v| v[k]);
                let s = sim.map(|v| v[k]);
                NodeReport {
                    node: k + 1,
                    theory: t,
                    theory_db: t.as_ref().map(metrics_db),
                    sim: s,
                    sim_db: s.as_ref().map(metrics_db),
                    delta_db: t.zip(s).map(|(t, s)| delta(&t, &s)),
                    bias_theory: None,
                    bias_sim: None,
                    bias_norm_theory: None,
                    bias_norm_sim: None,
                }
            })
            .collect();
        let max = theory.zip(sim).map(|(t, s)| max_delta_db(t, s));
        Ok(MetricsReport {
            nodes,
            tolerance_db,
            max_delta_db: max,
            pass: max.map(|m| m <= tolerance_db),
            stability: None,
            convention: None,
            provenance: None,
        })
    }

    pub fn set_bias(&mut self, theory: Option<&[DVector<f64>]>, sim: Option<&[DVector<f64>]>) {
        for (k, row) in self.nodes.iter_mut().enumerate() {
            if let Some(b) = theory.and_then(|t| t.get(k)) {
                row.bias_theory = Some(b.iter().copied().collect());
                row.bias_norm_theory = Some(b.norm());
            }
            if let Some(b) = sim.and_then(|s| s.get(k)) {
                row.bias_sim = Some(b.iter().copied().collect());
                row.bias_norm_sim = Some(b.norm());
            }
        }
    }
}

/// Per-node `|theory_dB - sim_dB|` for MSD, EMSE and MSE; passes iff every
/// gap is within `tol_db`.
pub fn compare(theory: &[NodeMetrics], sim: &[NodeMetrics], tol_db: f64) -> Result<MetricsReport> {
    MetricsReport::new(theory.len(), Some(theory), Some(sim), tol_db)
}

/// Long-run time-average estimate for one node with batch-means standard errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleEstimate {
    pub metrics: NodeMetrics,
    pub standard_error: NodeMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalarOracle {
    pub nodes: Vec<OracleEstimate>,
    pub burn_in: usize,
    pub horizon: usize,
}

const ORACLE_BATCHES: usize = 100;

/// Burn-in of ten time constants of the slower of the mean and the
/// mean-square recursions (in ring cycles), at least 100 cycles.
pub fn oracle_burn_in(profile: &NetworkProfile) -> Result<usize> {
    let mean = mean_stability(profile).rho;
    let ms = ms_stability(profile)?.cycle_rho.iter().copied().fold(0.0, f64::max);
    let tau = |rho: f64| if rho <= 0.0 { 0.0 } else { -1.0 / rho.ln() };
    let slowest = tau(mean).max(tau(ms));
    Ok(((10.0 * slowest).ceil() as usize).max(100))
}

/// Steady-state metrics of a scalar ring (`M = 1`, `N <= 2`) from a single
/// long run of `horizon` cycles after burn-in.
pub fn scalar_oracle(profile: &NetworkProfile, horizon: usize, seed: u64) -> Result<ScalarOracle> {
    if profile.dim() != 1 || profile.len() > 2 || profile.is_empty() {
        return Err(Error::Dimension(format!(
            "scalar oracle needs M = 1 and 1 <= N <= 2, got M = {}, N = {}",
            profile.dim(),
            profile.len()
        )));
    }
    if horizon < ORACLE_BATCHES {
        return Err(Error::Domain(format!("horizon must be >= {ORACLE_BATCHES}")));
    }
    let mean = mean_stability(profile);
    let ms = ms_stability(profile)?;
    if !mean.stable {
        return Err(Error::MeanUnstable { rho: mean.rho });
    }
    if let Some((k, &rho)) = ms.cycle_rho.iter().enumerate().find(|(_, &r)| r >= 1.0) {
        return Err(Error::MeanSquareUnstable { node: k + 1, rho });
    }
    let burn_in = oracle_burn_in(profile)?;
    let nodes = match profile.data {
        DataKind::Real => oracle_run::<f64>(profile, burn_in, horizon, seed)?,
        DataKind::Complex => oracle_run::<Complex64>(profile, burn_in, horizon, seed)?,
    };
    Ok(ScalarOracle { nodes, burn_in, horizon })
}

fn oracle_run<T: Sample>(
    profile: &NetworkProfile,
    burn_in: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<OracleEstimate>> {
    let net = SimNetwork::<T>::new(profile)?;
    let n = profile.len();
    let mut rng = run_stream(seed, 0);
    let mut w = DVector::<T>::zeros(1);
    let batch = horizon / ORACLE_BATCHES;
    let used = batch * ORACLE_BATCHES;

    // [node][metric][batch]
    let mut sums = vec![[vec![0.0; ORACLE_BATCHES], vec![0.0; ORACLE_BATCHES], vec![0.0; ORACLE_BATCHES]]; n];
    let diverged = |x: f64| !x.is_finite() || x > 1e30;
    for i in 0..burn_in + used {
        for k in 0..n {
            let v = net.visit(k, &w, &mut rng);
            if diverged(v.msd) || diverged(v.estimate.iter().map(|x| x.modulus()).fold(0.0, f64::max)) {
                return Err(Error::Diverged { node: k + 1 });
            }
            if i >= burn_in {
                let b = (i - burn_in) / batch;
                sums[k][0][b] += v.msd;
                sums[k][1][b] += v.emse;
                sums[k][2][b] += v.mse;
            }
            w = v.estimate;
        }
    }
    let b = batch as f64;
    Ok(sums
        .into_iter()
        .map(|[msd, emse, mse]| {
            let est = |xs: Vec<f64>| mean_and_se(xs.into_iter().map(|x| x / b));
            let (msd, msd_se) = est(msd);
            let (emse, emse_se) = est(emse);
            let (mse, mse_se) = est(mse);
            OracleEstimate {
                metrics: NodeMetrics { msd, emse, mse },
                standard_error: NodeMetrics { msd: msd_se, emse: emse_se, mse: mse_se },
            }
        })
        .collect())
}

/// Largest `|10 log10(sim / theory)|` of the MSD curves per node over the
/// iteration window. Two exact zeros count as agreement.
pub fn transient_match(sim: &EnsembleResult, theory: &TransientCurves, window: Range<usize>) -> Result<Vec<f64>> {
    if sim.iterations() != theory.msd.first().map_or(0, Vec::len) || sim.nodes() != theory.msd.len() {
        return Err(Error::Dimension("simulated and predicted curves differ in shape".into()));
    }
    if window.end > sim.iterations() {
        return Err(Error::Domain(format!("window end {} beyond {} iterations", window.end, sim.iterations())));
    }
    Ok(sim
        .msd_curve
        .iter()
        .zip(&theory.msd)
        .map(|(s, t)| {
            window
                .clone()
                .map(|i| {
                    if s[i] == 0.0 && t[i] == 0.0 {
                        0.0
                    } else {
                        let d = (to_db(s[i]) - to_db(t[i])).abs();
                        if d.is_nan() {
                            f64::INFINITY
                        } else {
                            d
                        }
                    }
                })
                .fold(0.0, f64::max)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nm(msd: f64, emse: f64, mse: f64) -> NodeMetrics {
        NodeMetrics { msd, emse, mse }
    }

    #[test]
    fn identical_inputs_pass_with_zero_gap() {
        let t = vec![nm(1e-3, 2e-4, 1e-2), nm(3e-3, 1e-3, 2e-2)];
        let r = compare(&t, &t, 1.0).unwrap();
        assert_eq!(r.pass, Some(true));
        assert_eq!(r.max_delta_db, Some(0.0));
        assert!(r.nodes.iter().all(|n| n.delta_db == Some(nm(0.0, 0.0, 0.0))));
    }

    #[test]
    fn doubling_is_three_db() {
        let t = vec![nm(1e-3, 2e-4, 1e-2)];
        let s = vec![nm(2e-3, 4e-4, 2e-2)];
        let r = compare(&t, &s, 1.0).unwrap();
        let d = r.nodes[0].delta_db.unwrap();
        for x in [d.msd, d.emse, d.mse] {
            assert!((x - 3.0103).abs() < 1e-4);
        }
        assert_eq!(r.pass, Some(false));
        assert!(compare(&t, &s, 3.02).unwrap().pass.unwrap());
    }

    #[test]
    fn node_count_mismatch_is_an_error() {
        let t = vec![nm(1.0, 1.0, 1.0)];
        let s = vec![nm(1.0, 1.0, 1.0); 2];
        assert!(matches!(compare(&t, &s, 1.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn theory_only_report_has_no_verdict() {
        let t = vec![nm(1.0, 1.0, 1.0)];
        let r = MetricsReport::new(1, Some(&t), None, 1.0).unwrap();
        assert_eq!(r.pass, None);
        assert!(r.nodes[0].delta_db.is_none());
        assert!((r.nodes[0].theory_db.unwrap().msd).abs() < 1e-15);
    }

    #[test]
    fn nan_gap_fails() {
        let t = vec![nm(1.0, 1.0, 1.0)];
        let s = vec![nm(f64::NAN, 1.0, 1.0)];
        assert_eq!(compare(&t, &s, 1.0).unwrap().pass, Some(false));
    }
}
