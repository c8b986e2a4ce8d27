//! Shared fixtures for the benchmarks.

use fading_ilms::network::{build_covariance, random_orthogonal, NodeParams};
use fading_ilms::{ChannelModel, DataKind, NetworkProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n`-node ring of dimension `m` with Rayleigh links and a shared eigenbasis.
pub fn rayleigh_ring(n: usize, m: usize, seed: u64) -> NetworkProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = random_orthogonal(m, &mut rng);
    let nodes = (0..n)
        .map(|_| NodeParams {
            step_size: 0.02,
            covariance: build_covariance(m, rng.random_range(3.0..5.0), 5.0, Some(&basis)).unwrap(),
            noise_var: rng.random_range(1e-3..1e-2),
            channel: ChannelModel::rayleigh_from_mean(std::f64::consts::FRAC_1_SQRT_2)
                .unwrap()
                .with_noise(rng.random_range(1e-4..1e-3))
                .unwrap(),
            channel_noise_cov: None,
        })
        .collect();
    NetworkProfile {
        w_o: nalgebra::DVector::from_element(m, 0.5),
        nodes,
        data: DataKind::Real,
        gamma: DataKind::Real.default_gamma(),
    }
}
