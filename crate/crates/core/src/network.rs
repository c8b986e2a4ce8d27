//! Static description of the ring: the unknown vector, per-node data
//! statistics, step sizes and link channels.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::ChannelModel;
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;

/// Scalar field of the regressors, measurement noise and link noise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DataKind {
    Real,
    /// Circular complex Gaussian data.
    Complex,
}

impl DataKind {
    /// Fourth-moment factor of Gaussian regressors of this kind.
    pub fn default_gamma(self) -> f64 {
        match self {
            DataKind::Real => 2.0,
            DataKind::Complex => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeParams {
    pub step_size: f64,
    /// Regressor covariance `R_u,k` (real symmetric positive definite).
    pub covariance: DMatrix<f64>,
    /// Measurement noise variance.
    pub noise_var: f64,
    /// Link from the previous node into this one.
    pub channel: ChannelModel,
    /// Full link-noise covariance, overriding `channel.noise_var() * I`.
    pub channel_noise_cov: Option<DMatrix<f64>>,
}

impl NodeParams {
    pub fn link_noise_cov(&self) -> DMatrix<f64> {
        match &self.channel_noise_cov {
            Some(q) => q.clone(),
            None => {
                let m = self.covariance.nrows();
                DMatrix::identity(m, m) * self.channel.noise_var()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkProfile {
    pub w_o: DVector<f64>,
    pub nodes: Vec<NodeParams>,
    pub data: DataKind,
    /// Regressor kurtosis factor: 1 for circular complex data, 2 for real data.
    pub gamma: f64,
}

impl NetworkProfile {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.w_o.len()
    }

    pub fn validated(self) -> Result<Self> {
        let v = validate_profile(&self);
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidProfile(v))
        }
    }

    /// Whether all regressor covariances commute, i.e. share one eigenbasis.
    /// The diagonalised steady-state formulas are exact only in this case.
    pub fn covariances_commute(&self) -> bool {
        for (i, a) in self.nodes.iter().enumerate() {
            for b in &self.nodes[i + 1..] {
                let ab = &a.covariance * &b.covariance;
                let ba = &b.covariance * &a.covariance;
                let scale = ab.amax().max(1.0);
                if (ab - ba).amax() > 1e-9 * scale {
                    return false;
                }
            }
        }
        true
    }
}

/// A single broken invariant of a [`NetworkProfile`].
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    /// 1-based node index, when the violation is local to a node.
    pub node: Option<usize>,
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Some(k) => write!(f, "node {k}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

/// `U Λ U^T` factorisation of a regressor covariance, eigenvalues ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenFactorization {
    pub basis: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
}

impl EigenFactorization {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.basis * DMatrix::from_diagonal(&self.eigenvalues) * self.basis.transpose()
    }
}

/// Eigendecomposition of a symmetric positive-definite matrix.
///
/// Columns are ordered by ascending eigenvalue and signed so that their
/// largest-magnitude entry is positive, which makes the result reproducible.
pub fn eigendecompose(r: &DMatrix<f64>) -> Result<EigenFactorization> {
    let (values, vectors) = symmetric_eigen(r)?;
    if let Some(&min) = values.iter().next() {
        if min.is_nan() || min <= 0.0 {
            return Err(Error::Validation(format!("matrix is not positive definite (min eigenvalue {min:e})")));
        }
    }
    Ok(EigenFactorization { basis: vectors, eigenvalues: values })
}

/// Sorted symmetric eigendecomposition without a definiteness requirement.
pub(crate) fn symmetric_eigen(r: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if !r.is_square() {
        return Err(Error::Dimension(format!("expected square matrix, got {}x{}", r.nrows(), r.ncols())));
    }
    if !is_symmetric(r) {
        return Err(Error::Validation("matrix is not symmetric".into()));
    }
    let n = r.nrows();
    let eig = nalgebra::SymmetricEigen::new(r.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let values = DVector::from_iterator(n, order.iter().map(|&j| eig.eigenvalues[j]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let pivot = col.iter().copied().fold(0.0_f64, |p, x| if x.abs() > p.abs() { x } else { p });
        if pivot < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    Ok((values, vectors))
}

pub(crate) fn is_symmetric(r: &DMatrix<f64>) -> bool {
    r.is_square() && (r - r.transpose()).amax() <= SYMMETRY_TOL * r.amax().max(1.0)
}

/// Geometrically spaced eigenvalues with `max/min = spread` summing to `trace`.
pub fn geometric_spectrum(dim: usize, trace: f64, spread: f64) -> Result<DVector<f64>> {
    if dim == 0 {
        return Err(Error::Domain("dimension must be >= 1".into()));
    }
    if !(spread >= 1.0 && spread.is_finite()) {
        return Err(Error::Domain(format!("eigenvalue spread must be >= 1, got {spread}")));
    }
    if !(trace > 0.0 && trace.is_finite()) {
        return Err(Error::Domain(format!("trace must be > 0, got {trace}")));
    }
    if dim == 1 {
        return Ok(DVector::from_element(1, trace));
    }
    let ratio = spread.powf(1.0 / (dim - 1) as f64);
    let powers: Vec<f64> = (0..dim).map(|j| ratio.powi(j as i32)).collect();
    let base = trace / powers.iter().sum::<f64>();
    Ok(DVector::from_iterator(dim, powers.into_iter().map(|p| base * p)))
}

/// Haar-distributed random orthogonal matrix (QR of a Gaussian matrix with
/// the sign of R's diagonal folded into Q).
pub fn random_orthogonal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Builds `V diag(λ) V^T` with a geometric spectrum.
///
/// `basis` is the eigenbasis `V`; pass `None` for the identity (diagonal
/// covariance).
pub fn build_covariance(dim: usize, trace: f64, spread: f64, basis: Option<&DMatrix<f64>>) -> Result<DMatrix<f64>> {
    let lambda = geometric_spectrum(dim, trace, spread)?;
    let diag = DMatrix::from_diagonal(&lambda);
    let r = match basis {
        None => diag,
        Some(v) => {
            if v.nrows() != dim || v.ncols() != dim {
                return Err(Error::Dimension(format!("basis must be {dim}x{dim}")));
            }
            let r = v * diag * v.transpose();
            // exact symmetry
            (&r + r.transpose()) * 0.5
        }
    };
    Ok(r)
}

/// Checks every profile invariant and returns all violations found.
pub fn validate_profile(p: &NetworkProfile) -> Vec<Violation> {
    let mut out = Vec::new();
    let global = |field, message: String| Violation { node: None, field, message };
    // the model dimension is the size of the first regressor covariance
    let m = p.nodes.first().map_or(p.dim(), |n| n.covariance.nrows());
    if p.nodes.is_empty() {
        out.push(global("nodes", "network needs at least one node".into()));
    }
    if m == 0 {
        out.push(global("w_o", "model dimension must be >= 1".into()));
    } else if p.w_o.len() != m {
        out.push(global("w_o", format!("length {} does not match model dimension {m}", p.w_o.len())));
    }
    if p.w_o.iter().any(|x| !x.is_finite()) {
        out.push(global("w_o", "entries must be finite".into()));
    }
    if p.gamma != 1.0 && p.gamma != 2.0 {
        out.push(global("gamma", format!("must be 1 or 2, got {}", p.gamma)));
    }

    for (idx, node) in p.nodes.iter().enumerate() {
        let k = idx + 1;
        let mut push = |field, message: String| out.push(Violation { node: Some(k), field, message });

        if !(node.step_size >= 0.0 && node.step_size.is_finite()) {
            push("step_size", format!("must be >= 0, got {}", node.step_size));
        }
        if !(node.noise_var >= 0.0 && node.noise_var.is_finite()) {
            push("noise_var", format!("must be >= 0, got {}", node.noise_var));
        }

        let r = &node.covariance;
        if r.nrows() != m || r.ncols() != m {
            push("covariance", format!("expected {m}x{m}, got {}x{}", r.nrows(), r.ncols()));
        } else if r.iter().any(|x| !x.is_finite()) {
            push("covariance", "entries must be finite".into());
        } else if !is_symmetric(r) {
            push("covariance", "not symmetric".into());
        } else if let Ok((values, _)) = symmetric_eigen(r) {
            if values[0].is_nan() || values[0] <= 0.0 {
                push("covariance", format!("not positive definite (min eigenvalue {:e})", values[0]));
            }
        }

        if let Some(q) = &node.channel_noise_cov {
            if q.nrows() != m || q.ncols() != m {
                push("channel_noise_cov", format!("expected {m}x{m}, got {}x{}", q.nrows(), q.ncols()));
            } else if q.iter().any(|x| !x.is_finite()) {
                push("channel_noise_cov", "entries must be finite".into());
            } else if !is_symmetric(q) {
                push("channel_noise_cov", "not symmetric".into());
            } else if let Ok((values, _)) = symmetric_eigen(q) {
                if values[0] < -SYMMETRY_TOL * q.amax().max(1.0) {
                    push("channel_noise_cov", format!("not positive semidefinite (min eigenvalue {:e})", values[0]));
                }
            }
        }
    }
    out
}
