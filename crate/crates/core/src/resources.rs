//! Input states and entangled resources on the lattice, plus the bridge from
//! Gaussian moments to sampled wavefunctions.

use nalgebra::{DMatrix, DVector};
use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gaussian::network::{epr_state, ghz_state};
use crate::gaussian::GaussianState;
use crate::grid::Grid;
use crate::wavefunction::{particles, Particle, WaveFunction};

/// Extent must cover this many position standard deviations.
pub const EXTENT_IN_STD_DEVS: f64 = 8.0;
/// Largest mode count the bridge will sample.
pub const MAX_BRIDGE_MODES: usize = 3;
const PURITY_TOL: f64 = 1e-9;
/// Low-momentum components mixed into a random smooth profile.
const SMOOTH_COMPONENTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum AmplitudeProfile {
    /// `A(x) ~ exp(-(x - center)^2 / (4 width^2))`; `width` is the position standard deviation.
    GaussianPacket { center: f64, width: f64 },
    /// Gaussian envelope of width `extent / 16` modulated by a few random low momenta.
    RandomSmooth { seed: u64 },
}

/// Two-particle input `sum_x A(x) |x>|x - q>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub profile: AmplitudeProfile,
    pub q: f64,
}

impl InputSpec {
    pub fn gaussian(center: f64, width: f64, q: f64) -> Self {
        Self { profile: AmplitudeProfile::GaussianPacket { center, width }, q }
    }

    /// Offset in lattice sites, `round(q / spacing)`.
    pub fn offset_sites(&self, grid: &Grid) -> i64 {
        grid.site_shift(self.q).0
    }

    /// The offset actually realized on the lattice.
    pub fn lattice_q(&self, grid: &Grid) -> f64 {
        self.offset_sites(grid) as f64 * grid.spacing()
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let half = grid.extent() / 2.0;
        if !(self.q.abs() < half) {
            return Err(Error::OffsetOutsideGrid { q: self.q, half });
        }
        let width = match self.profile {
            AmplitudeProfile::GaussianPacket { width, .. } => width,
            AmplitudeProfile::RandomSmooth { .. } => smooth_width(grid),
        };
        let min = 2.0 * grid.spacing();
        if !(width >= min) {
            return Err(Error::ProfileTooNarrow { width, min });
        }
        check_extent(grid, width)
    }

    /// Single-particle profile `A(x)` on the lattice (unnormalized).
    pub fn profile_amplitudes(&self, grid: &Grid) -> Vec<Complex64> {
        let xs = grid.positions();
        match self.profile {
            AmplitudeProfile::GaussianPacket { center, width } => xs
                .iter()
                .map(|x| Complex64::new((-(x - center).powi(2) / (4.0 * width * width)).exp(), 0.0))
                .collect(),
            AmplitudeProfile::RandomSmooth { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let w = smooth_width(grid);
                let comps: Vec<(f64, Complex64)> = (0..SMOOTH_COMPONENTS)
                    .map(|_| {
                        let steps = rng.random_range(-4i64..=4);
                        let c = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                        (steps as f64 * grid.momentum_spacing() * 4.0, c)
                    })
                    .collect();
                xs.iter()
                    .map(|&x| {
                        let env = (-x * x / (4.0 * w * w)).exp();
                        let wave: Complex64 = comps.iter().map(|(p, c)| c * Complex64::from_polar(1.0, 2.0 * p * x)).sum();
                        wave * env
                    })
                    .collect()
            }
        }
    }
}

fn smooth_width(grid: &Grid) -> f64 {
    grid.extent() / (2.0 * EXTENT_IN_STD_DEVS)
}

fn check_extent(grid: &Grid, std_dev: f64) -> Result<()> {
    let needed = EXTENT_IN_STD_DEVS * std_dev;
    if grid.extent() < needed {
        return Err(Error::GridTooSmall { extent: grid.extent(), needed });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ResourceQuality {
    /// Kronecker-correlated lattice states.
    Ideal,
    /// Gaussian states from squeezing `r`.
    Finite { r: f64 },
}

impl ResourceQuality {
    pub fn is_ideal(&self) -> bool {
        matches!(self, Self::Ideal)
    }
}

impl std::fmt::Display for ResourceQuality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Ideal => write!(f, "ideal"),
            Self::Finite { r } => write!(f, "finite(r={r})"),
        }
    }
}

/// Input entangled pair on particles 1, 2 with `x1 - x2 = round(q/spacing) * spacing`.
pub fn make_input_state(spec: &InputSpec, grid: &Grid) -> Result<WaveFunction> {
    spec.validate(grid)?;
    let n = grid.n_points();
    let m = spec.offset_sites(grid);
    let profile = spec.profile_amplitudes(grid);
    let mut amps = ArrayD::zeros(IxDyn(&[n, n]));
    for (j, a) in profile.into_iter().enumerate() {
        amps[[j, grid.wrap(j as i64 - m)]] = a;
    }
    WaveFunction::from_amplitudes(*grid, &particles(&[1, 2]), amps)
}

/// Uniform amplitude on `x_1 = x_2 = ... `, one slot per label.
pub fn uniform_diagonal(grid: &Grid, labels: &[Particle]) -> Result<WaveFunction> {
    let n = grid.n_points();
    let mut amps = ArrayD::zeros(IxDyn(&vec![n; labels.len()]));
    for j in 0..n {
        amps[IxDyn(&vec![j; labels.len()])] = Complex64::new(1.0, 0.0);
    }
    WaveFunction::from_amplitudes(*grid, labels, amps)
}

/// EPR resource on particles 2, 3.
pub fn make_epr_wavefunction(quality: ResourceQuality, grid: &Grid) -> Result<WaveFunction> {
    let labels = particles(&[2, 3]);
    match quality {
        ResourceQuality::Ideal => uniform_diagonal(grid, &labels),
        ResourceQuality::Finite { r } => covariance_to_wavefunction(&epr_state(r), grid)?.with_labels(&labels),
    }
}

/// GHZ resource on particles 3, 4, 5.
pub fn make_ghz_wavefunction(quality: ResourceQuality, grid: &Grid) -> Result<WaveFunction> {
    let labels = particles(&[3, 4, 5]);
    match quality {
        ResourceQuality::Ideal => uniform_diagonal(grid, &labels),
        ResourceQuality::Finite { r } => covariance_to_wavefunction(&ghz_state(r), grid)?.with_labels(&labels),
    }
}

/// Sample a pure Gaussian state as `exp(-(x - m)^T Z (x - m) + 2i m_p . x)`
/// with `Re Z = Sxx^{-1} / 4` and `Im Z = -Sxx^{-1} Sxp`. Particles are labelled `1..=n`.
pub fn covariance_to_wavefunction(s: &GaussianState, grid: &Grid) -> Result<WaveFunction> {
    covariance_to_wavefunction_with(s, grid, Execution::default())
}

pub fn covariance_to_wavefunction_with(s: &GaussianState, grid: &Grid, exec: Execution) -> Result<WaveFunction> {
    let n = s.n_modes();
    if n > MAX_BRIDGE_MODES {
        return Err(Error::TooManyModes(n, MAX_BRIDGE_MODES));
    }
    if n == 0 {
        return Err(Error::BadArity(0));
    }
    let cov = s.covariance();
    let sxx = cov.view((0, 0), (n, n)).into_owned();
    let sxp = cov.view((0, n), (n, n)).into_owned();
    let max_std = (0..n).map(|i| sxx[(i, i)].sqrt()).fold(0.0, f64::max);
    check_extent(grid, max_std)?;
    s.check_pure(PURITY_TOL)?;
    let inv = sxx.clone().try_inverse().ok_or_else(|| Error::Invalid("singular position covariance".into()))?;
    let re = (&inv + inv.transpose()) * 0.125;
    let im_raw = -(&inv * &sxp);
    let im = (&im_raw + im_raw.transpose()) * 0.5;
    let mean_x: DVector<f64> = s.mean().rows(0, n).into_owned();
    let mean_p: DVector<f64> = s.mean().rows(n, n).into_owned();
    let z = DMatrix::from_fn(n, n, |i, j| Complex64::new(re[(i, j)], im[(i, j)]));

    let xs = grid.positions();
    let np = grid.n_points();
    let per_row = np.pow((n - 1) as u32);
    let rows = exec.map(np, |first| {
        let mut out = Vec::with_capacity(per_row);
        let mut d = vec![0.0; n];
        let mut idx = vec![0usize; n];
        for rest in 0..per_row {
            idx[0] = first;
            let mut r = rest;
            for slot in (1..n).rev() {
                idx[slot] = r % np;
                r /= np;
            }
            let mut phase = 0.0;
            for k in 0..n {
                d[k] = xs[idx[k]] - mean_x[k];
                phase += 2.0 * mean_p[k] * xs[idx[k]];
            }
            let mut quad = Complex64::new(0.0, 0.0);
            for a in 0..n {
                for b in 0..n {
                    quad += z[(a, b)] * d[a] * d[b];
                }
            }
            out.push((-quad).exp() * Complex64::from_polar(1.0, phase));
        }
        out
    });
    let data: Vec<Complex64> = rows.into_iter().flatten().collect();
    let amps = ArrayD::from_shape_vec(IxDyn(&vec![np; n]), data).map_err(|_| Error::Mismatch)?;
    let labels: Vec<u8> = (1..=n as u8).collect();
    WaveFunction::from_amplitudes(*grid, &particles(&labels), amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::network::{squeeze, SqueezeParam};
    use crate::gaussian::LinearForm;
    use crate::metrics::{covariance_matrix, fidelity, quadrature_variance};

    fn x(n: usize, m: usize) -> LinearForm {
        LinearForm::x(n, m)
    }
    fn p(n: usize, m: usize) -> LinearForm {
        LinearForm::p(n, m)
    }

    #[test]
    fn input_state_sits_on_offset_diagonal() {
        let g = Grid::new(64, 16.0).unwrap();
        let w = make_input_state(&InputSpec::gaussian(0.0, 1.0, 0.0), &g).unwrap();
        assert!((w.norm_sqr() - 1.0).abs() < 1e-12);
        assert_eq!(quadrature_variance(&w, &(x(2, 0) - x(2, 1))).unwrap(), 0.0);
        let q = 2.0 * g.spacing();
        let w = make_input_state(&InputSpec::gaussian(0.0, 1.0, q), &g).unwrap();
        for ((j1, j2), a) in w.amplitudes().indexed_iter().map(|(i, a)| ((i[0], i[1]), a)) {
            if a.norm() > 0.0 {
                assert_eq!(g.wrap(j1 as i64 - j2 as i64), 2);
            }
        }
    }

    #[test]
    fn input_marginal_is_profile() {
        let g = Grid::new(64, 16.0).unwrap();
        let spec = InputSpec::gaussian(0.5, 1.0, 0.75);
        let w = make_input_state(&spec, &g).unwrap();
        let marg = w.marginal(Particle(1)).unwrap();
        let prof = spec.profile_amplitudes(&g);
        let total: f64 = prof.iter().map(|a| a.norm_sqr()).sum();
        for (m, a) in marg.iter().zip(&prof) {
            assert!((m - a.norm_sqr() / total).abs() < 1e-14);
        }
    }

    #[test]
    fn input_validation() {
        let g = Grid::new(64, 16.0).unwrap();
        assert!(matches!(make_input_state(&InputSpec::gaussian(0.0, 1.0, 8.0), &g), Err(Error::OffsetOutsideGrid { .. })));
        assert!(matches!(make_input_state(&InputSpec::gaussian(0.0, 0.3, 0.0), &g), Err(Error::ProfileTooNarrow { .. })));
        assert!(matches!(make_input_state(&InputSpec::gaussian(0.0, 2.5, 0.0), &g), Err(Error::GridTooSmall { .. })));
        let smooth = InputSpec { profile: AmplitudeProfile::RandomSmooth { seed: 4 }, q: 0.0 };
        let a = make_input_state(&smooth, &g).unwrap();
        assert_eq!(a, make_input_state(&smooth, &g).unwrap());
    }

    #[test]
    fn ideal_epr_is_orthogonal_to_shifted_diagonal() {
        let g = Grid::new(32, 8.0).unwrap();
        let epr = make_epr_wavefunction(ResourceQuality::Ideal, &g).unwrap();
        let shifted = make_input_state(&InputSpec { profile: AmplitudeProfile::GaussianPacket { center: 0.0, width: 0.9 }, q: g.spacing() }, &g)
            .unwrap()
            .with_labels(&particles(&[2, 3]))
            .unwrap();
        assert_eq!(epr.inner_product(&shifted).unwrap().norm(), 0.0);
    }

    #[test]
    fn ideal_ghz_is_body_diagonal() {
        let g = Grid::new(16, 8.0).unwrap();
        let ghz = make_ghz_wavefunction(ResourceQuality::Ideal, &g).unwrap();
        for (i, a) in ghz.amplitudes().indexed_iter() {
            if !(i[0] == i[1] && i[1] == i[2]) {
                assert_eq!(*a, Complex64::new(0.0, 0.0));
            }
        }
        assert_eq!(ghz.labels(), &particles(&[3, 4, 5])[..]);
    }

    #[test]
    fn finite_epr_matches_phase_space() {
        let g = Grid::new(256, 20.0).unwrap();
        let w = make_epr_wavefunction(ResourceQuality::Finite { r: 1.0 }, &g).unwrap();
        let e2 = (-2f64).exp();
        assert!((quadrature_variance(&w, &(x(2, 0) - x(2, 1))).unwrap() - e2 / 2.0).abs() < 1e-6);
        assert!((quadrature_variance(&w, &(p(2, 0) + p(2, 1))).unwrap() - e2 / 2.0).abs() < 1e-6);
        let cov = covariance_matrix(&w).unwrap();
        assert!((cov - epr_state(1.0).covariance()).amax() < 1e-6);
    }

    #[test]
    fn zero_squeezing_gives_vacua() {
        let g = Grid::new(32, 12.0).unwrap();
        let epr = make_epr_wavefunction(ResourceQuality::Finite { r: 0.0 }, &g).unwrap();
        let vac = covariance_to_wavefunction(&GaussianState::vacuum(1), &g).unwrap();
        let prod = vac.clone().with_labels(&[Particle(2)]).unwrap().tensor(&vac.clone().with_labels(&[Particle(3)]).unwrap()).unwrap();
        assert!((fidelity(&epr, &prod).unwrap().value - 1.0).abs() < 1e-12);
        let ghz = make_ghz_wavefunction(ResourceQuality::Finite { r: 0.0 }, &g).unwrap();
        let cov = covariance_matrix(&ghz).unwrap();
        assert!((cov - DMatrix::identity(6, 6) * 0.25).amax() < 1e-6);
    }

    #[test]
    fn finite_ghz_matches_phase_space() {
        let g = Grid::new(128, 20.0).unwrap();
        let r = 1.5;
        let w = make_ghz_wavefunction(ResourceQuality::Finite { r }, &g).unwrap();
        let e2 = (-2.0 * r).exp();
        let psum = p(3, 0) + p(3, 1) + p(3, 2);
        assert!((quadrature_variance(&w, &psum).unwrap() - 0.75 * e2).abs() < 1e-6);
        assert!((quadrature_variance(&w, &(x(3, 0) - x(3, 1))).unwrap() - e2 / 2.0).abs() < 1e-6);
        assert!((quadrature_variance(&w, &(x(3, 0) - x(3, 2))).unwrap() - e2 / 2.0).abs() < 1e-6);
    }

    #[test]
    fn bridge_examples() {
        let g = Grid::new(128, 16.0).unwrap();
        let vac = covariance_to_wavefunction(&GaussianState::vacuum(1), &g).unwrap();
        assert!((quadrature_variance(&vac, &x(1, 0)).unwrap() - 0.25).abs() < 1e-8);
        let sq = squeeze(&GaussianState::vacuum(1), SqueezeParam { r: 1.0, mode: 0 }).unwrap();
        let w = covariance_to_wavefunction(&sq, &g).unwrap();
        assert!((quadrature_variance(&w, &p(1, 0)).unwrap() - (-2f64).exp() / 4.0).abs() < 1e-6);
        let g = Grid::new(256, 20.0).unwrap();
        let a = covariance_to_wavefunction(&epr_state(1.0), &g).unwrap().with_labels(&particles(&[2, 3])).unwrap();
        let b = make_epr_wavefunction(ResourceQuality::Finite { r: 1.0 }, &g).unwrap();
        assert!((fidelity(&a, &b).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bridge_reproduces_displaced_correlated_state() {
        let g = Grid::new(128, 16.0).unwrap();
        let s = crate::gaussian::network::beamsplit(
            &squeeze(&GaussianState::vacuum(2), SqueezeParam { r: 0.6, mode: 0 }).unwrap(),
            crate::gaussian::BeamsplitterSpec { theta: 0.4, modes: (0, 1) },
        )
        .unwrap()
        .displaced(&DVector::from_vec(vec![0.3, -0.2, 0.5, 0.1]))
        .unwrap();
        let w = covariance_to_wavefunction(&s, &g).unwrap();
        assert!((covariance_matrix(&w).unwrap() - s.covariance()).amax() < 1e-6);
        for k in 0..4 {
            let f = if k < 2 { x(2, k) } else { p(2, k - 2) };
            assert!((crate::metrics::expectation(&w, &f).unwrap() - s.mean()[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn bridge_rejects_mixed_and_large() {
        let g = Grid::new(16, 8.0).unwrap();
        let cov = DMatrix::identity(2, 2) * 0.5;
        let mixed = GaussianState::from_moments(DVector::zeros(2), &cov).unwrap();
        assert!(matches!(covariance_to_wavefunction(&mixed, &g), Err(Error::MixedState(_))));
        assert_eq!(covariance_to_wavefunction(&GaussianState::vacuum(4), &g).unwrap_err(), Error::TooManyModes(4, 3));
        let wide = squeeze(&GaussianState::vacuum(1), SqueezeParam { r: 2.0, mode: 0 }).unwrap();
        assert!(matches!(covariance_to_wavefunction(&wide, &g), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn finite_epr_approaches_ideal() {
        let g = Grid::new(256, 160.0).unwrap();
        let ideal = make_epr_wavefunction(ResourceQuality::Ideal, &g).unwrap();
        let fids: Vec<f64> = [0.5, 1.0, 2.0, 4.0]
            .iter()
            .map(|&r| fidelity(&ideal, &make_epr_wavefunction(ResourceQuality::Finite { r }, &g).unwrap()).unwrap().value)
            .collect();
        assert!(fids.windows(2).all(|w| w[1] > w[0]), "{fids:?}");
    }

    #[test]
    fn execution_paths_agree() {
        let g = Grid::new(32, 12.0).unwrap();
        let s = ghz_state(0.5);
        let a = covariance_to_wavefunction_with(&s, &g, Execution::Parallel).unwrap();
        let b = covariance_to_wavefunction_with(&s, &g, Execution::Sequential).unwrap();
        assert_eq!(a, b);
    }
}
