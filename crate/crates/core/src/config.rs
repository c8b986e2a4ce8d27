//! JSON experiment configuration.
//!
//! Per-node quantities accept a scalar (same for every node), an explicit
//! list of length `nodes`, or `{"uniform": [lo, hi]}` drawn from the seeded
//! profile stream. Unknown keys are rejected. A fully explicit form of any
//! configuration is produced by [`resolved_config`]; parsing it back gives
//! the same profile.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{ChannelKind, ChannelModel};
use crate::error::{Error, Result};
use crate::network::{build_covariance, random_orthogonal, DataKind, NetworkProfile, NodeParams};
use crate::sim::SimConfig;
use crate::theory::PiConvention;

pub const DEFAULT_ITERATIONS: usize = 2000;
pub const DEFAULT_RUNS: usize = 100;
pub const DEFAULT_TAIL: usize = 200;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_TOLERANCE_DB: f64 = 1.0;

// substreams of the profile seed
const STREAM_BASIS: u64 = 0;
const STREAM_TRACE: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_LINK_NOISE: u64 = 3;
const STREAM_STEP: u64 = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformRange {
    pub uniform: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerNode {
    Same(f64),
    List(Vec<f64>),
    Uniform(UniformRange),
}

impl PerNode {
    fn resolve(&self, n: usize, what: &str, rng: &mut ChaCha8Rng) -> std::result::Result<Vec<f64>, String> {
        match self {
            PerNode::Same(x) => Ok(vec![*x; n]),
            PerNode::List(v) if v.len() == n => Ok(v.clone()),
            PerNode::List(v) => Err(format!("{what}: expected {n} values, got {}", v.len())),
            PerNode::Uniform(UniformRange { uniform: [lo, hi] }) => {
                if !lo.is_finite() || !hi.is_finite() || lo > hi {
                    return Err(format!("{what}: uniform range needs finite lo <= hi"));
                }
                Ok((0..n).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// One random orthogonal eigenbasis shared by every node.
    #[default]
    Shared,
    /// Diagonal covariances.
    Identity,
    /// An independent random eigenbasis per node.
    PerNode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegressorSpec {
    Generated(GeneratedRegressors),
    Explicit(ExplicitRegressors),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratedRegressors {
    /// Eigenvalue spread `λ_max / λ_min`.
    pub spread: f64,
    /// Trace of each node's covariance.
    pub trace: PerNode,
    #[serde(default)]
    pub basis: Basis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitRegressors {
    pub covariances: Vec<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    Ideal,
    Deterministic {
        gain: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_c2: Option<f64>,
    },
    /// Give exactly one of `mean` and `sigma`.
    Rayleigh {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_c2: Option<f64>,
    },
    Rician {
        nu: f64,
        sigma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_c2: Option<f64>,
    },
}

impl ChannelSpec {
    fn sigma_c2(&self) -> Option<f64> {
        match self {
            ChannelSpec::Ideal => None,
            ChannelSpec::Deterministic { sigma_c2, .. }
            | ChannelSpec::Rayleigh { sigma_c2, .. }
            | ChannelSpec::Rician { sigma_c2, .. } => *sigma_c2,
        }
    }

    fn build(&self, link_noise: Option<f64>) -> Result<ChannelModel> {
        let model = match self {
            ChannelSpec::Ideal => ChannelModel::ideal(),
            ChannelSpec::Deterministic { gain, .. } => ChannelModel::deterministic(*gain)?,
            ChannelSpec::Rayleigh { mean: Some(m), sigma: None, .. } => ChannelModel::rayleigh_from_mean(*m)?,
            ChannelSpec::Rayleigh { mean: None, sigma: Some(s), .. } => ChannelModel::rayleigh(*s)?,
            ChannelSpec::Rayleigh { .. } => {
                return Err(Error::Domain("rayleigh channel needs exactly one of `mean` and `sigma`".into()))
            }
            ChannelSpec::Rician { nu, sigma, .. } => ChannelModel::rician(*nu, *sigma)?,
        };
        match link_noise.or(self.sigma_c2()) {
            Some(v) => model.with_noise(v),
            None => Ok(model),
        }
    }

    fn of(model: &ChannelModel) -> Self {
        let noise = Some(model.noise_var());
        match model.kind() {
            ChannelKind::Ideal => ChannelSpec::Ideal,
            ChannelKind::Deterministic { gain } => ChannelSpec::Deterministic { gain, sigma_c2: noise },
            ChannelKind::Rayleigh { scale } => {
                ChannelSpec::Rayleigh { mean: None, sigma: Some(scale), sigma_c2: noise }
            }
            ChannelKind::Rician { los, scale } => ChannelSpec::Rician { nu: los, sigma: scale, sigma_c2: noise },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Channels {
    All(ChannelSpec),
    PerNode(Vec<ChannelSpec>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSpec {
    #[default]
    Real,
    Complex,
}

impl From<DataSpec> for DataKind {
    fn from(d: DataSpec) -> Self {
        match d {
            DataSpec::Real => DataKind::Real,
            DataSpec::Complex => DataKind::Complex,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Theory,
    Sim,
    #[default]
    Both,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Theory => "theory",
            Mode::Sim => "sim",
            Mode::Both => "both",
        }
    }
}

/// Spelling of [`PiConvention`] in config files and on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PiConventionSpec {
    PerStep,
    #[serde(rename = "paper", alias = "global_prefactor", alias = "paper_prefactor")]
    GlobalPrefactor,
}

impl From<PiConventionSpec> for PiConvention {
    fn from(p: PiConventionSpec) -> Self {
        match p {
            PiConventionSpec::PerStep => PiConvention::PerStep,
            PiConventionSpec::GlobalPrefactor => PiConvention::GlobalPrefactor,
        }
    }
}

impl From<PiConvention> for PiConventionSpec {
    fn from(p: PiConvention) -> Self {
        match p {
            PiConvention::PerStep => PiConventionSpec::PerStep,
            PiConvention::GlobalPrefactor => PiConventionSpec::GlobalPrefactor,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub nodes: usize,
    pub dim: usize,
    pub w_o: Vec<f64>,
    #[serde(default)]
    pub data: DataSpec,
    /// Defaults to 2 for real data and 1 for complex data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub profile_seed: u64,
    pub step_size: PerNode,
    pub regressors: RegressorSpec,
    pub noise_var: PerNode,
    pub channels: Channels,
    /// Link-noise variance `σ_c^2`; overrides per-channel `sigma_c2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_noise_var: Option<PerNode>,
    /// Optional full link-noise covariance per node (`null` keeps `σ_c^2 I`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_noise_cov: Option<Vec<Option<Vec<Vec<f64>>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_convention: Option<PiConventionSpec>,
}

/// Command-line overrides; `None` keeps the file value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub runs: Option<usize>,
    pub tail: Option<usize>,
    pub tolerance_db: Option<f64>,
    pub pi_convention: Option<PiConvention>,
    pub gamma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub mode: Mode,
    pub config_path: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub tolerance_db: f64,
    pub pi_convention: PiConvention,
}

/// A resolved experiment: profile, simulation protocol and run settings.
#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub profile: NetworkProfile,
    pub sim: SimConfig,
    pub run: RunSpec,
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config { path: path.to_string(), message: message.into() }
}

fn matrix(rows: &[Vec<f64>], what: &str) -> std::result::Result<DMatrix<f64>, String> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(format!("{what}: matrix must be square"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl ConfigFile {
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_err(origin, e.to_string()))
    }

    /// Builds and validates the network profile.
    pub fn profile(&self, gamma_override: Option<f64>, origin: &str) -> Result<NetworkProfile> {
        let n = self.nodes;
        let m = self.dim;
        let err = |msg: String| config_err(origin, msg);
        if n == 0 || m == 0 {
            return Err(err("`nodes` and `dim` must be >= 1".into()));
        }
        let seed = self.profile_seed;
        let steps = self.step_size.resolve(n, "step_size", &mut stream(seed, STREAM_STEP)).map_err(err)?;
        let noise = self.noise_var.resolve(n, "noise_var", &mut stream(seed, STREAM_NOISE)).map_err(err)?;

        let covariances: Vec<DMatrix<f64>> = match &self.regressors {
            RegressorSpec::Explicit(e) => {
                if e.covariances.len() != n {
                    return Err(err(format!("covariances: expected {n} matrices, got {}", e.covariances.len())));
                }
                e.covariances
                    .iter()
                    .map(|c| matrix(c, "covariances"))
                    .collect::<std::result::Result<_, _>>()
                    .map_err(err)?
            }
            RegressorSpec::Generated(g) => {
                let traces = g.trace.resolve(n, "trace", &mut stream(seed, STREAM_TRACE)).map_err(err)?;
                let mut basis_rng = stream(seed, STREAM_BASIS);
                let shared = match g.basis {
                    Basis::Shared => Some(random_orthogonal(m, &mut basis_rng)),
                    _ => None,
                };
                let mut out = Vec::with_capacity(n);
                for &trace in &traces {
                    let own = match g.basis {
                        Basis::PerNode => Some(random_orthogonal(m, &mut basis_rng)),
                        _ => None,
                    };
                    let v = shared.as_ref().or(own.as_ref());
                    out.push(build_covariance(m, trace, g.spread, v).map_err(|e| err(format!("regressors: {e}")))?);
                }
                out
            }
        };

        let specs: Vec<ChannelSpec> = match &self.channels {
            Channels::All(c) => vec![c.clone(); n],
            Channels::PerNode(v) if v.len() == n => v.clone(),
            Channels::PerNode(v) => return Err(err(format!("channels: expected {n} entries, got {}", v.len()))),
        };
        let link_noise: Vec<Option<f64>> = match &self.channel_noise_var {
            None => vec![None; n],
            Some(spec) => {
                if specs.iter().any(|c| c.sigma_c2().is_some()) {
                    return Err(err(
                        "give link noise either as `channel_noise_var` or per channel `sigma_c2`, not both".into(),
                    ));
                }
                spec.resolve(n, "channel_noise_var", &mut stream(seed, STREAM_LINK_NOISE))
                    .map_err(err)?
                    .into_iter()
                    .map(Some)
                    .collect()
            }
        };
        let overrides: Vec<Option<DMatrix<f64>>> = match &self.channel_noise_cov {
            None => vec![None; n],
            Some(v) if v.len() == n => v
                .iter()
                .map(|q| q.as_ref().map(|q| matrix(q, "channel_noise_cov")).transpose())
                .collect::<std::result::Result<_, _>>()
                .map_err(err)?,
            Some(v) => return Err(err(format!("channel_noise_cov: expected {n} entries, got {}", v.len()))),
        };

        let mut nodes = Vec::with_capacity(n);
        for k in 0..n {
            let channel = specs[k].build(link_noise[k]).map_err(|e| err(format!("node {}: channel: {e}", k + 1)))?;
            nodes.push(NodeParams {
                step_size: steps[k],
                covariance: covariances[k].clone(),
                noise_var: noise[k],
                channel,
                channel_noise_cov: overrides[k].clone(),
            });
        }
        let data: DataKind = self.data.into();
        NetworkProfile {
            w_o: DVector::from_vec(self.w_o.clone()),
            nodes,
            data,
            gamma: gamma_override.or(self.gamma).unwrap_or(data.default_gamma()),
        }
        .validated()
    }

    pub fn experiment(&self, overrides: &Overrides, origin: &str) -> Result<Experiment> {
        if self.w_o.len() != self.dim {
            return Err(config_err(origin, format!("w_o has length {} but dim is {}", self.w_o.len(), self.dim)));
        }
        let profile = self.profile(overrides.gamma, origin)?;
        let spec = self.sim.clone().unwrap_or_default();
        let sim = SimConfig {
            iterations: overrides.iterations.or(spec.iterations).unwrap_or(DEFAULT_ITERATIONS),
            runs: overrides.runs.or(spec.runs).unwrap_or(DEFAULT_RUNS),
            tail: overrides.tail.or(spec.tail).unwrap_or(DEFAULT_TAIL),
            master_seed: overrides.seed.or(spec.seed).unwrap_or(DEFAULT_SEED),
        };
        sim.validate().map_err(|e| config_err(origin, e.to_string()))?;
        let tolerance_db = overrides.tolerance_db.or(self.tolerance_db).unwrap_or(DEFAULT_TOLERANCE_DB);
        if tolerance_db.is_nan() || tolerance_db < 0.0 {
            return Err(config_err(origin, "tolerance_db must be >= 0"));
        }
        let run = RunSpec {
            mode: overrides.mode.or(self.mode).unwrap_or_default(),
            config_path: None,
            output_dir: None,
            tolerance_db,
            pi_convention: overrides.pi_convention.or(self.pi_convention.map(Into::into)).unwrap_or_default(),
        };
        Ok(Experiment { profile, sim, run })
    }
}

/// Reads, resolves and validates a configuration file.
pub fn parse_config(path: &Path, overrides: &Overrides) -> Result<Experiment> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut exp = ConfigFile::from_json(&text, &origin)?.experiment(overrides, &origin)?;
    exp.run.config_path = Some(path.to_path_buf());
    Ok(exp)
}

/// Fully explicit configuration reproducing `exp` exactly.
pub fn resolved_config(exp: &Experiment) -> ConfigFile {
    let mut file = resolved_profile(&exp.profile);
    file.sim = Some(SimSpec {
        iterations: Some(exp.sim.iterations),
        runs: Some(exp.sim.runs),
        tail: Some(exp.sim.tail),
        seed: Some(exp.sim.master_seed),
    });
    file.mode = Some(exp.run.mode);
    file.tolerance_db = Some(exp.run.tolerance_db);
    file.pi_convention = Some(exp.run.pi_convention.into());
    file
}

fn resolved_profile(p: &NetworkProfile) -> ConfigFile {
    let any_override = p.nodes.iter().any(|x| x.channel_noise_cov.is_some());
    ConfigFile {
        nodes: p.len(),
        dim: p.dim(),
        w_o: p.w_o.iter().copied().collect(),
        data: match p.data {
            DataKind::Real => DataSpec::Real,
            DataKind::Complex => DataSpec::Complex,
        },
        gamma: Some(p.gamma),
        profile_seed: 0,
        step_size: PerNode::List(p.nodes.iter().map(|x| x.step_size).collect()),
        regressors: RegressorSpec::Explicit(ExplicitRegressors {
            covariances: p.nodes.iter().map(|x| rows(&x.covariance)).collect(),
        }),
        noise_var: PerNode::List(p.nodes.iter().map(|x| x.noise_var).collect()),
        channels: Channels::PerNode(p.nodes.iter().map(|x| ChannelSpec::of(&x.channel)).collect()),
        channel_noise_var: None,
        channel_noise_cov: any_override
            .then(|| p.nodes.iter().map(|x| x.channel_noise_cov.as_ref().map(rows)).collect()),
        sim: None,
        mode: None,
        tolerance_db: None,
        pi_convention: None,
    }
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Content hash of a profile (its explicit form).
pub fn profile_fingerprint(p: &NetworkProfile) -> String {
    sha256_hex(&serde_json::to_string(&resolved_profile(p)).expect("config serialises"))
}

/// Content hash of a whole resolved experiment.
pub fn config_hash(exp: &Experiment) -> String {
    sha256_hex(&serde_json::to_string(&resolved_config(exp)).expect("config serialises"))
}
