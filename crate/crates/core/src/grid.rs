//! One-dimensional periodic position lattice shared by every wavefunction.
//!
//! Positions are `x_j = (j - n/2) * spacing`. The conjugate lattice uses the
//! kernel `e^{2ipx}`, so momenta are `p_k = (k - n/2) * pi / (n * spacing)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LATTICE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n_points: usize,
    spacing: f64,
    origin_index: usize,
}

impl Grid {
    pub fn new(n_points: usize, extent: f64) -> Result<Self> {
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::BadPointCount(n_points));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::BadExtent(extent));
        }
        Ok(Self {
            n_points,
            spacing: extent / n_points as f64,
            origin_index: n_points / 2,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin_index(&self) -> usize {
        self.origin_index
    }

    pub fn extent(&self) -> f64 {
        self.n_points as f64 * self.spacing
    }

    pub fn momentum_spacing(&self) -> f64 {
        PI / self.extent()
    }

    /// Period of the momentum lattice, `n * momentum_spacing = pi / spacing`.
    pub fn momentum_extent(&self) -> f64 {
        PI / self.spacing
    }

    pub fn position(&self, j: usize) -> f64 {
        (j as f64 - self.origin_index as f64) * self.spacing
    }

    pub fn momentum(&self, k: usize) -> f64 {
        (k as f64 - self.origin_index as f64) * self.momentum_spacing()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.position(j)).collect()
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.momentum(k)).collect()
    }

    /// Signed number of lattice sites in a displacement, with the rounding residual.
    pub fn site_shift(&self, displacement: f64) -> (i64, f64) {
        let sites = (displacement / self.spacing).round();
        (sites as i64, displacement - sites * self.spacing)
    }

    /// Exact site count of an on-lattice displacement.
    pub fn lattice_shift(&self, displacement: f64, what: &'static str) -> Result<i64> {
        let (sites, residual) = self.site_shift(displacement);
        if residual.abs() > LATTICE_TOL * self.spacing.max(1.0) {
            return Err(Error::OffLattice { what, value: displacement, spacing: self.spacing });
        }
        Ok(sites)
    }

    /// Index of an on-lattice position value.
    pub fn position_index(&self, x: f64, what: &'static str) -> Result<usize> {
        let sites = self.lattice_shift(x, what)?;
        Ok(self.wrap(self.origin_index as i64 + sites))
    }

    /// Signed momentum-lattice step count of `p`.
    pub fn momentum_steps(&self, p: f64, what: &'static str) -> Result<i64> {
        let dp = self.momentum_spacing();
        let steps = (p / dp).round();
        if (p - steps * dp).abs() > LATTICE_TOL * dp.max(1.0) {
            return Err(Error::OffLattice { what, value: p, spacing: dp });
        }
        Ok(steps as i64)
    }

    /// Index of an on-lattice momentum value (taken modulo the lattice period).
    pub fn momentum_index(&self, p: f64, what: &'static str) -> Result<usize> {
        let steps = self.momentum_steps(p, what)?;
        Ok(self.wrap(self.origin_index as i64 + steps))
    }

    pub fn wrap(&self, index: i64) -> usize {
        index.rem_euclid(self.n_points as i64) as usize
    }

    /// Fold a value into the central zone `[-period/2, period/2)`.
    pub fn fold(value: f64, period: f64) -> f64 {
        value - period * ((value + 0.5 * period) / period).floor()
    }
}

/// Unitary transform between the position and momentum lattices.
///
/// Forward: `out_k = n^{-1/2} sum_j e^{-2 i p_k x_j} in_j`. With `n/2` even the
/// lattice phases reduce to an FFT with alternating signs on both sides.
#[derive(Clone)]
pub struct LatticeFft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl LatticeFft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn modulate(buf: &mut [Complex64], scale: f64) {
        for (j, v) in buf.iter_mut().enumerate() {
            *v *= if j % 2 == 0 { scale } else { -scale };
        }
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        Self::modulate(buf, 1.0);
        self.forward.process(buf);
        Self::modulate(buf, 1.0 / (self.n as f64).sqrt());
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        Self::modulate(buf, 1.0);
        self.inverse.process(buf);
        Self::modulate(buf, 1.0 / (self.n as f64).sqrt());
    }
}

impl std::fmt::Debug for LatticeFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LatticeFft").field("n", &self.n).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_grid_examples() {
        let g = Grid::new(256, 16.0).unwrap();
        assert_eq!(g.spacing(), 0.0625);
        assert_eq!(g.origin_index(), 128);
        let g = Grid::new(8, 8.0).unwrap();
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.origin_index(), 4);
        assert_eq!(Grid::new(100, 16.0), Err(Error::BadPointCount(100)));
        assert_eq!(Grid::new(4, 16.0), Err(Error::BadPointCount(4)));
        assert!(matches!(Grid::new(16, -1.0), Err(Error::BadExtent(_))));
        assert!(matches!(Grid::new(16, 0.0), Err(Error::BadExtent(_))));
    }

    #[test]
    fn momentum_lattice_spacing() {
        let g = Grid::new(64, 12.8).unwrap();
        assert!((g.momentum_spacing() - PI / 12.8).abs() < 1e-15);
        assert_eq!(g.momentum(32), 0.0);
        assert_eq!(g.position(32), 0.0);
    }

    #[test]
    fn lattice_checks() {
        let g = Grid::new(16, 8.0).unwrap();
        assert_eq!(g.lattice_shift(1.5, "Q").unwrap(), 3);
        assert!(g.lattice_shift(0.7, "Q").is_err());
        assert_eq!(g.position_index(-4.0, "x").unwrap(), 0);
        let dp = g.momentum_spacing();
        assert_eq!(g.momentum_index(3.0 * dp, "P").unwrap(), 11);
        assert!(g.momentum_index(0.5 * dp, "P").is_err());
        assert_eq!(g.site_shift(0.6), (1, 0.09999999999999998));
    }

    #[test]
    fn fold_into_zone() {
        assert_eq!(Grid::fold(0.3, 2.0), 0.3);
        assert!((Grid::fold(1.3, 2.0) + 0.7).abs() < 1e-15);
        assert_eq!(Grid::fold(-1.0, 2.0), -1.0);
        assert_eq!(Grid::fold(1.0, 2.0), -1.0);
    }

    #[test]
    fn lattice_fft_matches_direct_sum() {
        let g = Grid::new(16, 5.0).unwrap();
        let f = LatticeFft::new(16);
        let input: Vec<Complex64> =
            (0..16).map(|j| Complex64::new((j as f64 * 0.37).sin(), (j as f64 * 0.11).cos())).collect();
        let mut buf = input.clone();
        f.forward(&mut buf);
        for k in 0..16 {
            let direct: Complex64 = (0..16)
                .map(|j| input[j] * Complex64::from_polar(1.0, -2.0 * g.momentum(k) * g.position(j)))
                .sum::<Complex64>()
                / 4.0;
            assert!((direct - buf[k]).norm() < 1e-12);
        }
        f.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&input) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
