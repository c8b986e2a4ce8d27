use fading_ilms::ChannelModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::FRAC_1_SQRT_2;

const DRAWS: usize = 1_000_000;

fn check(name: &str, ch: ChannelModel, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
    for _ in 0..DRAWS {
        let h = ch.sample_gain(&mut rng);
        assert!(h >= 0.0, "{name}: negative gain {h}");
        let h2 = h * h;
        s1 += h;
        s2 += h2;
        s4 += h2 * h2;
    }
    let n = DRAWS as f64;
    let (m1, m2, m4) = (s1 / n, s2 / n, s4 / n);
    let se_mean = ((m2 - m1 * m1) / n).sqrt();
    let se_second = ((m4 - m2 * m2) / n).sqrt();
    let want = ch.moments();
    assert!((m1 - want.mean).abs() < 4.0 * se_mean, "{name}: mean {m1} vs {}", want.mean);
    assert!((m2 - want.second).abs() < 4.0 * se_second, "{name}: second {m2} vs {}", want.second);
}

#[test]
fn rayleigh_sample_moments() {
    check("rayleigh(mean=sqrt(2)/2)", ChannelModel::rayleigh_from_mean(FRAC_1_SQRT_2).unwrap(), 1);
    check("rayleigh(sigma=1.3)", ChannelModel::rayleigh(1.3).unwrap(), 2);
}

#[test]
fn rician_sample_moments() {
    check("rician(0.8, 0.3)", ChannelModel::rician(0.8, 0.3).unwrap(), 3);
    check("rician(0.1, 1.0)", ChannelModel::rician(0.1, 1.0).unwrap(), 4);
    check("rician(4.0, 0.5)", ChannelModel::rician(4.0, 0.5).unwrap(), 5);
}

#[test]
fn rayleigh_mean_parameterisation() {
    let ch = ChannelModel::rayleigh_from_mean(FRAC_1_SQRT_2).unwrap();
    let m = ch.moments();
    // sigma = m sqrt(2/pi), s = 2 sigma^2 = 4 m^2 / pi
    assert!((m.mean - FRAC_1_SQRT_2).abs() < 1e-15);
    assert!((m.second - 2.0 / std::f64::consts::PI).abs() < 1e-15);
}
