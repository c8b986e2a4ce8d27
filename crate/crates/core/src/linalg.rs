use nalgebra::DMatrix;

/// Largest eigenvalue modulus of a general real square matrix.
pub(crate) fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 1 {
        return a[(0, 0)].abs();
    }
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_of_rotation_and_triangular() {
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        assert!((spectral_radius(&rot) - 2.0).abs() < 1e-12);
        let tri = DMatrix::from_row_slice(2, 2, &[0.5, 10.0, 0.0, -0.9]);
        assert!((spectral_radius(&tri) - 0.9).abs() < 1e-12);
    }
}
