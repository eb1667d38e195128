use nalgebra::{SMatrix, SVector};

use super::EstimationError;

/// Default central-difference step for component `z`.
pub fn fd_step(z: f64) -> f64 {
    1e-6_f64.max(1e-6 * z.abs())
}

/// Central-difference Jacobian of `f` at `z` with the default steps.
pub fn jacobian_fd<const N: usize, const M: usize, F>(
    f: F,
    z: &SVector<f64, N>,
) -> Result<SMatrix<f64, M, N>, EstimationError>
where
    F: FnMut(&SVector<f64, N>) -> Result<SVector<f64, M>, EstimationError>,
{
    jacobian_fd_step(f, z, &z.map(fd_step))
}

/// Central-difference Jacobian with explicit per-component steps `h`.
pub fn jacobian_fd_step<const N: usize, const M: usize, F>(
    mut f: F,
    z: &SVector<f64, N>,
    h: &SVector<f64, N>,
) -> Result<SMatrix<f64, M, N>, EstimationError>
where
    F: FnMut(&SVector<f64, N>) -> Result<SVector<f64, M>, EstimationError>,
{
    let mut jac = SMatrix::<f64, M, N>::zeros();
    let mut zp = *z;
    let mut zm = *z;
    for j in 0..N {
        if !(h[j] > 0.0 && h[j].is_finite()) {
            return Err(EstimationError::Jacobian(format!(
                "bad step {} for column {j}",
                h[j]
            )));
        }
        zp[j] = z[j] + h[j];
        zm[j] = z[j] - h[j];
        let fp = f(&zp)?;
        let fm = f(&zm)?;
        // Use the realized step so representation error in z +- h cancels.
        let span = zp[j] - zm[j];
        jac.set_column(j, &((fp - fm) / span));
        zp[j] = z[j];
        zm[j] = z[j];
    }
    if jac.iter().all(|v| v.is_finite()) {
        Ok(jac)
    } else {
        Err(EstimationError::Jacobian("non-finite entry".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2x3, Matrix3, Vector3};
    use proptest::prelude::*;

    #[test]
    fn identity_map() {
        let z = Vector3::new(12.0, -0.3, 0.05);
        let j = jacobian_fd(|z: &Vector3<f64>| Ok(*z), &z).unwrap();
        assert!((j - Matrix3::identity()).abs().max() < 1e-9);
    }

    #[test]
    fn non_square_and_failure() {
        let a = Matrix2x3::new(1.0, 2.0, 3.0, -4.0, 0.5, 0.0);
        let j = jacobian_fd(|z: &Vector3<f64>| Ok(a * z), &Vector3::new(1.0, 2.0, 3.0)).unwrap();
        assert!((j - a).abs().max() < 1e-8);
        let bad = jacobian_fd(
            |z: &Vector3<f64>| Ok(Vector3::repeat(1.0 / (z[0] - z[0]))),
            &Vector3::zeros(),
        );
        assert!(matches!(bad, Err(EstimationError::Jacobian(_))));
    }

    proptest! {
        #[test]
        fn linear_maps_are_recovered(
            a in prop::array::uniform9(-3.0..3.0f64),
            z in prop::array::uniform3(-2.0..2.0f64),
        ) {
            let a = Matrix3::from_row_slice(&a);
            let z = Vector3::from(z);
            let j = jacobian_fd(|z: &Vector3<f64>| Ok(a * z), &z).unwrap();
            prop_assert!((j - a).abs().max() < 1e-8, "{}", (j - a).abs().max());
        }
    }
}
