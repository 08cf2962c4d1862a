use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Variance of each vacuum quadrature (`[x, p] = i/2`).
pub const VACUUM_VARIANCE: f64 = 0.25;

/// Relative size below which a conditioned variance is treated as zero.
const ZERO_VARIANCE_REL: f64 = 1e-24;

/// Quadrature means and covariance of an n-mode Gaussian state.
///
/// Ordering is `x_1..x_n, p_1..p_n`. The covariance is held as a factor
/// `cov = F F^T`, which keeps strongly squeezed combinations exact: the
/// variance of a linear form is `|F^T f|^2` rather than a difference of
/// nearly equal large entries.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    n_modes: usize,
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl GaussianState {
    pub fn vacuum(n_modes: usize) -> Self {
        Self {
            n_modes,
            mean: DVector::zeros(2 * n_modes),
            factor: DMatrix::identity(2 * n_modes, 2 * n_modes) * VACUUM_VARIANCE.sqrt(),
        }
    }

    pub fn from_moments(mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if !dim.is_multiple_of(2) || cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: cov.nrows() });
        }
        let sym = (cov + cov.transpose()) * 0.5;
        let factor = match sym.clone().cholesky() {
            Some(c) => c.l(),
            None => {
                let eig = sym.symmetric_eigen();
                if eig.eigenvalues.iter().any(|&l| l < -1e-10) {
                    return Err(Error::Invalid("covariance is not positive semidefinite".into()));
                }
                let sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
                &eig.eigenvectors * sqrt
            }
        };
        Ok(Self { n_modes: dim / 2, mean, factor })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.factor * self.factor.transpose()
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.n_modes {
            Ok(())
        } else {
            Err(Error::BadMode(mode))
        }
    }

    fn check_form(&self, f: &LinearForm) -> Result<()> {
        if f.coefficients.len() != 2 * self.n_modes {
            return Err(Error::DimensionMismatch { expected: 2 * self.n_modes, got: f.coefficients.len() });
        }
        Ok(())
    }

    /// `f^T cov f`.
    pub fn variance(&self, f: &LinearForm) -> Result<f64> {
        self.check_form(f)?;
        Ok((self.factor.transpose() * &f.coefficients).norm_squared())
    }

    pub fn expectation(&self, f: &LinearForm) -> Result<f64> {
        self.check_form(f)?;
        Ok(f.coefficients.dot(&self.mean) + f.constant)
    }

    /// Symmetrized covariance of two forms.
    pub fn covariance_of(&self, f: &LinearForm, g: &LinearForm) -> Result<f64> {
        self.check_form(f)?;
        self.check_form(g)?;
        let ft = self.factor.transpose();
        Ok((&ft * &f.coefficients).dot(&(&ft * &g.coefficients)))
    }

    /// Apply a linear map `R -> M R` to the quadratures.
    pub fn transformed(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.ncols() != 2 * self.n_modes || !m.nrows().is_multiple_of(2) {
            return Err(Error::DimensionMismatch { expected: 2 * self.n_modes, got: m.ncols() });
        }
        Ok(Self { n_modes: m.nrows() / 2, mean: m * &self.mean, factor: m * &self.factor })
    }

    pub fn displaced(&self, shift: &DVector<f64>) -> Result<Self> {
        if shift.len() != self.mean.len() {
            return Err(Error::DimensionMismatch { expected: self.mean.len(), got: shift.len() });
        }
        Ok(Self { mean: &self.mean + shift, ..self.clone() })
    }

    /// Product state, `self` modes first.
    pub fn tensor(&self, other: &Self) -> Self {
        let (n, m) = (self.n_modes, other.n_modes);
        let total = n + m;
        let (ka, kb) = (self.factor.ncols(), other.factor.ncols());
        let mut mean = DVector::zeros(2 * total);
        let mut factor = DMatrix::zeros(2 * total, ka + kb);
        let place = |i: usize, own: usize, offset: usize| if i < own { i + offset } else { i - own + total + offset };
        for i in 0..2 * n {
            let row = place(i, n, 0);
            mean[row] = self.mean[i];
            for c in 0..ka {
                factor[(row, c)] = self.factor[(i, c)];
            }
        }
        for i in 0..2 * m {
            let row = place(i, m, n);
            mean[row] = other.mean[i];
            for c in 0..kb {
                factor[(row, ka + c)] = other.factor[(i, c)];
            }
        }
        Self { n_modes: total, mean, factor }
    }

    /// Marginal state of a subset of modes, in the given order.
    pub fn reduced(&self, modes: &[usize]) -> Result<Self> {
        let n = self.n_modes;
        let mut m = DMatrix::zeros(2 * modes.len(), 2 * n);
        for (i, &mode) in modes.iter().enumerate() {
            self.check_mode(mode)?;
            m[(i, mode)] = 1.0;
            m[(modes.len() + i, n + mode)] = 1.0;
        }
        self.transformed(&m)
    }

    /// Sample the Gaussian marginal of `f`, then condition on the outcome.
    ///
    /// Forms with (numerically) zero variance return their deterministic value
    /// and leave the state unchanged.
    pub fn condition_on_quadrature(&self, f: &LinearForm, seed: u64) -> Result<(f64, Self)> {
        let mean = self.expectation(f)?;
        let var = self.variance(f)?;
        if self.is_sharp(f, var) {
            return Ok((mean, self.clone()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z: f64 = StandardNormal.sample(&mut rng);
        let outcome = mean + var.sqrt() * z;
        Ok((outcome, self.condition_on_value(f, outcome)?))
    }

    /// Schur-complement update for an ideal measurement of `f` with result `value`.
    ///
    /// The measured form becomes sharp; quadratures uncorrelated with it keep
    /// their moments.
    pub fn condition_on_value(&self, f: &LinearForm, value: f64) -> Result<Self> {
        let mean_f = self.expectation(f)?;
        let g = self.factor.transpose() * &f.coefficients;
        let var = g.norm_squared();
        if self.is_sharp(f, var) {
            return Ok(self.clone());
        }
        let fg = &self.factor * &g;
        let mean = &self.mean + &fg * ((value - mean_f) / var);
        let unit = &g / var.sqrt();
        let factor = &self.factor - (&self.factor * &unit) * unit.transpose();
        Ok(Self { n_modes: self.n_modes, mean, factor })
    }

    fn is_sharp(&self, f: &LinearForm, var: f64) -> bool {
        let scale = f.coefficients.norm_squared() * self.factor.norm_squared();
        var <= ZERO_VARIANCE_REL * scale.max(1.0)
    }

    /// Symplectic eigenvalues in ascending order (one per mode).
    pub fn symplectic_eigenvalues(&self) -> Vec<f64> {
        let omega = symplectic_form(self.n_modes);
        let eig = (omega * self.covariance()).complex_eigenvalues();
        let mut nus: Vec<f64> = eig.iter().map(|z| z.im.abs()).collect();
        nus.sort_by(f64::total_cmp);
        nus.into_iter().step_by(2).collect()
    }

    /// Smallest eigenvalue of `cov + (i/4) Omega`; non-negative for physical states.
    pub fn uncertainty_margin(&self) -> f64 {
        let dim = 2 * self.n_modes;
        let cov = self.covariance();
        let omega = symplectic_form(self.n_modes);
        let h = DMatrix::from_fn(dim, dim, |i, j| Complex64::new(cov[(i, j)], 0.25 * omega[(i, j)]));
        h.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn check_pure(&self, tol: f64) -> Result<()> {
        for nu in self.symplectic_eigenvalues() {
            if (nu - VACUUM_VARIANCE).abs() > tol {
                return Err(Error::MixedState(nu));
            }
        }
        Ok(())
    }

    /// Overlap fidelity with `other`, exact when `self` is pure.
    ///
    /// Works from the stacked factors `[F_self, F_other]` so strongly squeezed
    /// pairs keep the dynamic range of their standard deviations.
    pub fn fidelity_with_pure(&self, other: &Self) -> Result<f64> {
        if self.n_modes != other.n_modes {
            return Err(Error::DimensionMismatch { expected: 2 * self.n_modes, got: 2 * other.n_modes });
        }
        let dim = 2 * self.n_modes;
        let (a, b) = (&self.factor, &other.factor);
        let mut stacked = DMatrix::zeros(dim, a.ncols() + b.ncols());
        stacked.columns_mut(0, a.ncols()).copy_from(a);
        stacked.columns_mut(a.ncols(), b.ncols()).copy_from(b);
        let svd = stacked.svd(true, false);
        let u = svd.u.as_ref().expect("requested");
        let delta = &self.mean - &other.mean;
        let mut log_f = 0.0;
        for (i, s) in svd.singular_values.iter().enumerate() {
            if !(*s > 0.0) {
                return Err(Error::Invalid("singular covariance sum".into()));
            }
            let proj = u.column(i).dot(&delta);
            log_f -= proj * proj / (s * s) + 0.5 * (2.0 * s * s).ln();
        }
        Ok(log_f.exp())
    }
}

/// Commutator matrix for `[R_i, R_j] = (i/2) Omega_ij`.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for i in 0..n_modes {
        omega[(i, n_modes + i)] = 1.0;
        omega[(n_modes + i, i)] = -1.0;
    }
    omega
}

/// Real linear combination of quadratures plus a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearForm {
    pub coefficients: DVector<f64>,
    pub constant: f64,
}

impl LinearForm {
    pub fn zero(n_modes: usize) -> Self {
        Self { coefficients: DVector::zeros(2 * n_modes), constant: 0.0 }
    }

    pub fn x(n_modes: usize, mode: usize) -> Self {
        let mut f = Self::zero(n_modes);
        f.coefficients[mode] = 1.0;
        f
    }

    pub fn p(n_modes: usize, mode: usize) -> Self {
        let mut f = Self::zero(n_modes);
        f.coefficients[n_modes + mode] = 1.0;
        f
    }

    pub fn n_modes(&self) -> usize {
        self.coefficients.len() / 2
    }

    pub fn x_coefficients(&self) -> &[f64] {
        &self.coefficients.as_slice()[..self.n_modes()]
    }

    pub fn p_coefficients(&self) -> &[f64] {
        &self.coefficients.as_slice()[self.n_modes()..]
    }

    pub fn plus_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    /// Largest coefficient difference, including the constant.
    pub fn distance(&self, other: &Self) -> f64 {
        if self.coefficients.len() != other.coefficients.len() {
            return f64::INFINITY;
        }
        (&self.coefficients - &other.coefficients).amax().max((self.constant - other.constant).abs())
    }
}

impl Add for LinearForm {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self { coefficients: self.coefficients + rhs.coefficients, constant: self.constant + rhs.constant }
    }
}

impl Sub for LinearForm {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self { coefficients: self.coefficients - rhs.coefficients, constant: self.constant - rhs.constant }
    }
}

impl Neg for LinearForm {
    type Output = Self;
    fn neg(self) -> Self {
        Self { coefficients: -self.coefficients, constant: -self.constant }
    }
}

impl Mul<f64> for LinearForm {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self { coefficients: self.coefficients * k, constant: self.constant * k }
    }
}

impl Mul<LinearForm> for f64 {
    type Output = LinearForm;
    fn mul(self, f: LinearForm) -> LinearForm {
        f * self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_moments() {
        let v = GaussianState::vacuum(2);
        assert_eq!(v.covariance(), DMatrix::identity(4, 4) * 0.25);
        assert!((v.variance(&LinearForm::x(2, 0)).unwrap() - 0.25).abs() < 1e-15);
        let rel = (LinearForm::x(2, 0) - LinearForm::x(2, 1)) * std::f64::consts::FRAC_1_SQRT_2;
        assert!((v.variance(&rel).unwrap() - 0.25).abs() < 1e-15);
        assert!(v.uncertainty_margin().abs() < 1e-12);
        for nu in v.symplectic_eigenvalues() {
            assert!((nu - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn variance_rejects_wrong_dimension() {
        let v = GaussianState::vacuum(2);
        assert_eq!(v.variance(&LinearForm::x(3, 0)), Err(Error::DimensionMismatch { expected: 4, got: 6 }));
    }

    #[test]
    fn conditioning_vacuum_on_x() {
        let v = GaussianState::vacuum(1);
        let f = LinearForm::x(1, 0);
        let (a, post) = v.condition_on_quadrature(&f, 7).unwrap();
        let (b, _) = v.condition_on_quadrature(&f, 7).unwrap();
        assert_eq!(a, b);
        assert!(post.variance(&f).unwrap() < 1e-30);
        assert!((post.variance(&LinearForm::p(1, 0)).unwrap() - 0.25).abs() < 1e-15);
        assert!((post.expectation(&f).unwrap() - a).abs() < 1e-12);
        let (again, same) = post.condition_on_quadrature(&f, 99).unwrap();
        assert!((again - a).abs() < 1e-9);
        assert_eq!(same, post);
    }

    #[test]
    fn from_moments_roundtrip() {
        let cov = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3]);
        let s = GaussianState::from_moments(DVector::from_vec(vec![1.0, -1.0]), &cov).unwrap();
        assert!((s.covariance() - cov).amax() < 1e-15);
    }

    #[test]
    fn mixed_state_detected() {
        let cov = DMatrix::identity(2, 2) * 0.5;
        let s = GaussianState::from_moments(DVector::zeros(2), &cov).unwrap();
        assert!(matches!(s.check_pure(1e-9), Err(Error::MixedState(_))));
        assert!(GaussianState::vacuum(3).check_pure(1e-12).is_ok());
    }

    #[test]
    fn fidelity_of_noisy_vacuum() {
        let v = GaussianState::vacuum(1);
        let noisy = GaussianState::from_moments(DVector::zeros(2), &(DMatrix::identity(2, 2) * 0.35)).unwrap();
        assert!((v.fidelity_with_pure(&v).unwrap() - 1.0).abs() < 1e-14);
        // added noise n per quadrature gives 1 / (1 + 2 n)
        assert!((v.fidelity_with_pure(&noisy).unwrap() - 1.0 / 1.2).abs() < 1e-14);
        // coherent states: |<a|b>|^2 = exp(-|a-b|^2), displacement of x by d means |a-b| = d
        let d = 0.3;
        let shifted = v.displaced(&DVector::from_vec(vec![d, 0.0])).unwrap();
        assert!((v.fidelity_with_pure(&shifted).unwrap() - (-d * d * 2.0).exp()).abs() < 1e-14);
    }

    #[test]
    fn tensor_orders_quadratures() {
        let a = GaussianState::vacuum(1).displaced(&DVector::from_vec(vec![1.0, 2.0])).unwrap();
        let b = GaussianState::vacuum(2).displaced(&DVector::from_vec(vec![3.0, 4.0, 5.0, 6.0])).unwrap();
        let ab = a.tensor(&b);
        assert_eq!(ab.mean().as_slice(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let back = ab.reduced(&[1, 2]).unwrap();
        assert_eq!(back.mean(), b.mean());
    }
}
