//! Fading gain distributions for the links between consecutive ring nodes.
//!
//! Every model produces non-negative real gains (phase-coherent reception)
//! and knows its first and second moments in closed form. Each link also
//! carries an additive zero-mean Gaussian noise whose per-entry variance is
//! `noise_var`, so the default link noise covariance is `noise_var * I`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChannelKind {
    /// Perfect link, gain exactly one.
    Ideal,
    /// Constant gain `c >= 0`.
    Deterministic { gain: f64 },
    /// Rayleigh envelope with scale `sigma > 0`.
    Rayleigh { scale: f64 },
    /// Rician envelope with line-of-sight amplitude `nu >= 0` and scatter scale `sigma > 0`.
    Rician { los: f64, scale: f64 },
}

/// First and second moments of a channel gain, `E[h]` and `E[h^2]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub second: f64,
}

impl Moments {
    pub fn variance(&self) -> f64 {
        self.second - self.mean * self.mean
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelModel {
    kind: ChannelKind,
    noise_var: f64,
}

impl ChannelModel {
    pub fn new(kind: ChannelKind, noise_var: f64) -> Result<Self> {
        check_kind(&kind)?;
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::Domain(format!("channel noise variance must be finite and >= 0, got {noise_var}")));
        }
        if kind == ChannelKind::Ideal && noise_var != 0.0 {
            return Err(Error::Domain(
                "an ideal channel cannot carry link noise; use a deterministic gain of 1".into(),
            ));
        }
        Ok(ChannelModel { kind, noise_var })
    }

    pub fn ideal() -> Self {
        ChannelModel { kind: ChannelKind::Ideal, noise_var: 0.0 }
    }

    pub fn deterministic(gain: f64) -> Result<Self> {
        Self::new(ChannelKind::Deterministic { gain }, 0.0)
    }

    pub fn rayleigh(scale: f64) -> Result<Self> {
        Self::new(ChannelKind::Rayleigh { scale }, 0.0)
    }

    pub fn rician(los: f64, scale: f64) -> Result<Self> {
        Self::new(ChannelKind::Rician { los, scale }, 0.0)
    }

    /// Rayleigh channel whose mean gain equals `mean`, i.e. `sigma = mean / sqrt(pi/2)`.
    pub fn rayleigh_from_mean(mean: f64) -> Result<Self> {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::Domain(format!("rayleigh mean must be > 0, got {mean}")));
        }
        Self::rayleigh(mean / FRAC_PI_2.sqrt())
    }

    pub fn with_noise(self, noise_var: f64) -> Result<Self> {
        Self::new(self.kind, noise_var)
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    /// Per-entry variance of the additive link noise.
    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn moments(&self) -> Moments {
        match self.kind {
            ChannelKind::Ideal => Moments { mean: 1.0, second: 1.0 },
            ChannelKind::Deterministic { gain } => Moments { mean: gain, second: gain * gain },
            ChannelKind::Rayleigh { scale } => Moments { mean: scale * FRAC_PI_2.sqrt(), second: 2.0 * scale * scale },
            ChannelKind::Rician { los, scale } => {
                // mean = sigma sqrt(pi/2) L_{1/2}(-nu^2 / 2 sigma^2), written with
                // exponentially scaled Bessel functions at t = nu^2 / 4 sigma^2.
                let t = los * los / (4.0 * scale * scale);
                let laguerre = (1.0 + 2.0 * t) * bessel_i0e(t) + 2.0 * t * bessel_i1e(t);
                Moments { mean: scale * FRAC_PI_2.sqrt() * laguerre, second: 2.0 * scale * scale + los * los }
            }
        }
    }

    /// Draws one gain. Ideal and deterministic channels consume no randomness.
    pub fn sample_gain<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            ChannelKind::Ideal => 1.0,
            ChannelKind::Deterministic { gain } => gain,
            ChannelKind::Rayleigh { scale } => {
                let u: f64 = rng.random();
                scale * (-2.0 * (1.0 - u).ln()).sqrt()
            }
            ChannelKind::Rician { los, scale } => {
                let x: f64 = rng.sample(StandardNormal);
                let y: f64 = rng.sample(StandardNormal);
                (los + scale * x).hypot(scale * y)
            }
        }
    }

    pub fn is_ideal(&self) -> bool {
        self.kind == ChannelKind::Ideal
    }
}

fn check_kind(kind: &ChannelKind) -> Result<()> {
    let bad = |what: &str, v: f64| Err(Error::Domain(format!("{what} out of domain: {v}")));
    match *kind {
        ChannelKind::Ideal => Ok(()),
        ChannelKind::Deterministic { gain } if !(gain >= 0.0 && gain.is_finite()) => bad("deterministic gain", gain),
        ChannelKind::Rayleigh { scale } if !(scale > 0.0 && scale.is_finite()) => bad("rayleigh scale", scale),
        ChannelKind::Rician { los, .. } if !(los >= 0.0 && los.is_finite()) => {
            bad("rician line-of-sight amplitude", los)
        }
        ChannelKind::Rician { scale, .. } if !(scale > 0.0 && scale.is_finite()) => bad("rician scale", scale),
        _ => Ok(()),
    }
}

/// `exp(-x) I0(x)` for `x >= 0`.
pub(crate) fn bessel_i0e(x: f64) -> f64 {
    scaled_bessel(0, x)
}

/// `exp(-x) I1(x)` for `x >= 0`.
pub(crate) fn bessel_i1e(x: f64) -> f64 {
    scaled_bessel(1, x)
}

fn scaled_bessel(order: u32, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 25.0 {
        // power series, all terms positive
        let half = 0.5 * x;
        let mut term = if order == 0 { 1.0 } else { half };
        let mut sum = term;
        let q = half * half;
        let mut k = 1.0;
        while term > sum * 1e-17 {
            term *= q / (k * (k + f64::from(order)));
            sum += term;
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // Hankel asymptotic expansion; truncation error is far below f64 epsilon here
        let mu = 4.0 * f64::from(order * order);
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..30 {
            let jf = f64::from(j);
            let odd = 2.0 * jf - 1.0;
            term *= -(mu - odd * odd) / (jf * 8.0 * x);
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ideal_and_deterministic_moments() {
        assert_eq!(ChannelModel::ideal().moments(), Moments { mean: 1.0, second: 1.0 });
        let d = ChannelModel::deterministic(0.5).unwrap().moments();
        assert_eq!((d.mean, d.second), (0.5, 0.25));
    }

    #[test]
    fn rayleigh_moments_closed_form() {
        let m = ChannelModel::rayleigh(std::f64::consts::PI.sqrt().recip()).unwrap().moments();
        assert!((m.mean - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((m.second - std::f64::consts::FRAC_2_PI).abs() < 1e-15);
    }

    #[test]
    fn rayleigh_from_mean_inverts() {
        let ch = ChannelModel::rayleigh_from_mean(std::f64::consts::FRAC_1_SQRT_2).unwrap();
        let ChannelKind::Rayleigh { scale } = ch.kind() else { panic!() };
        assert!((scale - 0.56419).abs() < 1e-5);
        assert!((ch.moments().second - 2.0 / PI).abs() < 1e-14);
        assert!((ch.moments().mean - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);

        let unit = ChannelModel::rayleigh_from_mean(FRAC_PI_2.sqrt()).unwrap();
        assert_eq!(unit.kind(), ChannelKind::Rayleigh { scale: 1.0 });

        let ChannelKind::Rayleigh { scale } = ChannelModel::rayleigh_from_mean(1.2533).unwrap().kind() else {
            panic!()
        };
        assert!((scale - 1.0).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ChannelModel::rayleigh_from_mean(0.0).is_err());
        assert!(ChannelModel::rayleigh_from_mean(-1.0).is_err());
        assert!(ChannelModel::rayleigh(-0.1).is_err());
        assert!(ChannelModel::deterministic(-0.1).is_err());
        assert!(ChannelModel::rician(-1.0, 1.0).is_err());
        assert!(ChannelModel::rician(1.0, 0.0).is_err());
        assert!(ChannelModel::ideal().with_noise(1e-3).is_err());
        assert!(ChannelModel::deterministic(1.0).unwrap().with_noise(-1.0).is_err());
    }

    #[test]
    fn constant_channels_ignore_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(ChannelModel::ideal().sample_gain(&mut rng), 1.0);
        assert_eq!(ChannelModel::deterministic(0.7).unwrap().sample_gain(&mut rng), 0.7);
    }

    #[test]
    fn rician_reduces_to_rayleigh_without_los() {
        let a = ChannelModel::rician(0.0, 0.8).unwrap().moments();
        let b = ChannelModel::rayleigh(0.8).unwrap().moments();
        assert!((a.mean - b.mean).abs() < 1e-15);
        assert!((a.second - b.second).abs() < 1e-15);
    }

    #[test]
    fn rician_strong_los_mean_approaches_amplitude() {
        // mean ~ nu + sigma^2 / (2 nu) for nu >> sigma
        let m = ChannelModel::rician(10.0, 0.5).unwrap().moments();
        assert!((m.mean - (10.0 + 0.25 / 20.0)).abs() < 1e-4);
    }

    #[test]
    fn scaled_bessel_matches_reference_values() {
        // I0(1) = 1.2660658777520082, I1(1) = 0.5651591039924851
        assert!((bessel_i0e(1.0) * 1f64.exp() - 1.2660658777520082).abs() < 1e-14);
        assert!((bessel_i1e(1.0) * 1f64.exp() - 0.5651591039924851).abs() < 1e-14);
        // series and asymptotic branches agree across the switch point
        let (x, h) = (25.0, 1e-9);
        let (i0, i1) = (scaled_bessel(0, x), scaled_bessel(1, x));
        // d/dx I0e = I1e - I0e, d/dx I1e = I0e - (1 + 1/x) I1e
        let slopes = [i1 - i0, i0 - (1.0 + 1.0 / x) * i1];
        for (order, (value, slope)) in [(0, (i0, slopes[0])), (1, (i1, slopes[1]))] {
            let below = scaled_bessel(order, x - h);
            assert!((below - (value - h * slope)).abs() < 1e-14 * value, "order {order}");
        }
        assert_eq!(bessel_i0e(0.0), 1.0);
        assert_eq!(bessel_i1e(0.0), 0.0);
    }

    #[test]
    fn sampling_is_reproducible() {
        let ch = ChannelModel::rician(0.3, 0.6).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(11);
        let mut b = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            assert_eq!(ch.sample_gain(&mut a).to_bits(), ch.sample_gain(&mut b).to_bits());
        }
    }
}
