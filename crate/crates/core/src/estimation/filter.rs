use nalgebra::{DMatrix, SMatrix, SVector};

use super::{jacobian_fd, EstimationError};

/// Discrete nonlinear system `z' = f(z)`, `y = g(z)` at a fixed input.
///
/// Jacobians default to central differences; systems with known
/// derivatives may override them.
pub trait FilterModel<const N: usize, const M: usize> {
    fn transition(&self, z: &SVector<f64, N>) -> Result<SVector<f64, N>, EstimationError>;

    fn observe(&self, z: &SVector<f64, N>) -> Result<SVector<f64, M>, EstimationError>;

    fn transition_jacobian(
        &self,
        z: &SVector<f64, N>,
    ) -> Result<SMatrix<f64, N, N>, EstimationError> {
        jacobian_fd(|z| self.transition(z), z)
    }

    fn observation_jacobian(
        &self,
        z: &SVector<f64, N>,
    ) -> Result<SMatrix<f64, M, N>, EstimationError> {
        jacobian_fd(|z| self.observe(z), z)
    }
}

/// Mean and covariance of a Gaussian estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian<const N: usize> {
    pub mean: SVector<f64, N>,
    pub cov: SMatrix<f64, N, N>,
}

impl<const N: usize> Gaussian<N> {
    pub fn new(mean: SVector<f64, N>, cov: SMatrix<f64, N, N>) -> Self {
        Self { mean, cov }
    }

    /// Largest `|P_ij - P_ji|`.
    pub fn asymmetry(&self) -> f64 {
        (self.cov - self.cov.transpose()).abs().max()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = symmetrize(self.cov);
        DMatrix::from_column_slice(N, N, sym.as_slice())
            .symmetric_eigenvalues()
            .min()
    }

    fn is_finite(&self) -> bool {
        self.mean
            .iter()
            .chain(self.cov.iter())
            .all(|v| v.is_finite())
    }
}

fn symmetrize<const N: usize>(p: SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    0.5 * (p + p.transpose())
}

/// Time update `z <- f(z)`, `P <- F P F^T + Q` with `F` taken at the prior mean.
pub fn predict<const N: usize, const M: usize, S: FilterModel<N, M>>(
    prior: &Gaussian<N>,
    system: &S,
    q: &SMatrix<f64, N, N>,
) -> Result<Gaussian<N>, EstimationError> {
    let f = system.transition_jacobian(&prior.mean)?;
    let out = Gaussian {
        mean: system.transition(&prior.mean)?,
        cov: symmetrize(f * prior.cov * f.transpose() + q),
    };
    if out.is_finite() {
        Ok(out)
    } else {
        Err(EstimationError::NonFinite("prediction".into()))
    }
}

/// Result of a measurement update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction<const N: usize, const M: usize> {
    pub posterior: Gaussian<N>,
    pub innovation: SVector<f64, M>,
    /// Normalized innovation squared `nu^T S^-1 nu`.
    pub nis: f64,
}

/// Measurement update in Joseph form, with `G` taken at the predicted mean.
pub fn update<const N: usize, const M: usize, S: FilterModel<N, M>>(
    predicted: &Gaussian<N>,
    system: &S,
    y: &SVector<f64, M>,
    r: &SMatrix<f64, M, M>,
) -> Result<Correction<N, M>, EstimationError> {
    let g = system.observation_jacobian(&predicted.mean)?;
    let nu = y - system.observe(&predicted.mean)?;
    let p = predicted.cov;
    let s = symmetrize(g * p * g.transpose() + r);
    let Some(chol) = s.cholesky() else {
        let sv = DMatrix::from_column_slice(M, M, s.as_slice()).singular_values();
        return Err(EstimationError::SingularInnovation {
            condition: sv.max() / sv.min(),
        });
    };
    let s_inv = chol.inverse();
    let k = p * g.transpose() * s_inv;
    let a = SMatrix::<f64, N, N>::identity() - k * g;
    let posterior = Gaussian {
        mean: predicted.mean + k * nu,
        cov: symmetrize(a * p * a.transpose() + k * r * k.transpose()),
    };
    let nis = (nu.transpose() * s_inv * nu)[0];
    if posterior.is_finite() && nis.is_finite() {
        Ok(Correction {
            posterior,
            innovation: nu,
            nis,
        })
    } else {
        Err(EstimationError::NonFinite("update".into()))
    }
}
