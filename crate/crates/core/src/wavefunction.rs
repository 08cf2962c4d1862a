//! Dense k-particle wavefunctions on the periodic lattice.
//!
//! Amplitudes are sampled wavefunction values, so the norm is
//! `sum |a|^2 * spacing^arity`. Slots transformed to momentum keep the same
//! weight: their amplitudes are the unitary lattice transform of the position
//! amplitudes.

use std::fmt;

use ndarray::{ArrayD, Axis, Dimension, IxDyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, LatticeFft};

pub const NORM_TOL: f64 = 1e-12;
pub const MAX_ARITY: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Particle(pub u8);

impl fmt::Display for Particle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Representation {
    Position,
    Momentum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid,
    labels: Vec<Particle>,
    reps: Vec<Representation>,
    amps: ArrayD<Complex64>,
}

impl WaveFunction {
    /// Sample `f` at every lattice point (position representation) and normalize.
    pub fn from_fn<F>(grid: Grid, labels: &[Particle], f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let arity = check_arity(labels.len())?;
        let xs = grid.positions();
        let mut coords = vec![0.0; arity];
        let amps = ArrayD::from_shape_fn(IxDyn(&vec![grid.n_points(); arity]), |idx| {
            for (c, &j) in coords.iter_mut().zip(idx.slice()) {
                *c = xs[j];
            }
            f(&coords)
        });
        Self::from_amplitudes(grid, labels, amps)
    }

    /// Normalize an explicit amplitude tensor given in the position representation.
    pub fn from_amplitudes(grid: Grid, labels: &[Particle], amps: ArrayD<Complex64>) -> Result<Self> {
        let arity = check_arity(labels.len())?;
        Self::from_raw(grid, labels.to_vec(), vec![Representation::Position; arity], amps)?.normalized()
    }

    pub(crate) fn from_raw(
        grid: Grid,
        labels: Vec<Particle>,
        reps: Vec<Representation>,
        amps: ArrayD<Complex64>,
    ) -> Result<Self> {
        let arity = check_arity(labels.len())?;
        if reps.len() != arity || amps.ndim() != arity || amps.shape().iter().any(|&d| d != grid.n_points()) {
            return Err(Error::Mismatch);
        }
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != arity {
            return Err(Error::Invalid(format!("duplicate particle labels in {labels:?}")));
        }
        Ok(Self { grid, labels, reps, amps })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn arity(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[Particle] {
        &self.labels
    }

    pub fn representation(&self, slot: usize) -> Representation {
        self.reps[slot]
    }

    pub fn representations(&self) -> &[Representation] {
        &self.reps
    }

    pub fn amplitudes(&self) -> &ArrayD<Complex64> {
        &self.amps
    }

    pub fn into_amplitudes(self) -> ArrayD<Complex64> {
        self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut ArrayD<Complex64> {
        &mut self.amps
    }

    pub fn slot_of(&self, particle: Particle) -> Result<usize> {
        self.labels.iter().position(|&l| l == particle).ok_or(Error::UnknownParticle(particle.0))
    }

    /// Lattice volume element for the whole tensor.
    pub fn weight(&self) -> f64 {
        self.grid.spacing().powi(self.arity() as i32)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.weight()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm_sqr();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::ZeroNorm);
        }
        let s = 1.0 / n.sqrt();
        self.amps.mapv_inplace(|a| a * s);
        Ok(self)
    }

    pub fn scaled(mut self, factor: Complex64) -> Self {
        self.amps.mapv_inplace(|a| a * factor);
        self
    }

    pub fn with_labels(mut self, labels: &[Particle]) -> Result<Self> {
        if labels.len() != self.arity() {
            return Err(Error::Mismatch);
        }
        self.labels = labels.to_vec();
        Ok(self)
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.arity() != other.arity() {
            return Err(Error::Mismatch);
        }
        if let Some(slot) = (0..self.arity()).find(|&s| self.reps[s] != other.reps[s]) {
            return Err(Error::RepresentationMismatch(slot));
        }
        Ok(())
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner_product(&self, other: &Self) -> Result<Complex64> {
        self.same_shape(other)?;
        let sum: Complex64 = self.amps.iter().zip(other.amps.iter()).map(|(a, b)| a.conj() * b).sum();
        Ok(sum * self.weight())
    }

    pub fn to_momentum(&self, particle: Particle) -> Result<Self> {
        self.transform(particle, Representation::Momentum)
    }

    pub fn to_position(&self, particle: Particle) -> Result<Self> {
        self.transform(particle, Representation::Position)
    }

    /// Every slot in the momentum representation.
    pub fn to_momentum_all(&self) -> Result<Self> {
        self.labels.iter().try_fold(self.clone(), |w, &l| w.transform(l, Representation::Momentum))
    }

    fn transform(&self, particle: Particle, target: Representation) -> Result<Self> {
        let slot = self.slot_of(particle)?;
        let mut out = self.clone();
        if out.reps[slot] == target {
            return Ok(out);
        }
        let fft = LatticeFft::new(self.grid.n_points());
        out.for_each_lane(slot, |lane| match target {
            Representation::Momentum => fft.forward(lane),
            Representation::Position => fft.inverse(lane),
        });
        out.reps[slot] = target;
        Ok(out)
    }

    /// Run `f` on every one-dimensional lane along `slot`.
    pub(crate) fn for_each_lane<F>(&mut self, slot: usize, mut f: F)
    where
        F: FnMut(&mut [Complex64]),
    {
        let mut buf = Vec::with_capacity(self.grid.n_points());
        for mut lane in self.amps.lanes_mut(Axis(slot)) {
            buf.clear();
            buf.extend(lane.iter().copied());
            f(&mut buf);
            for (dst, src) in lane.iter_mut().zip(&buf) {
                *dst = *src;
            }
        }
    }

    /// Tensor product, `self` slots first.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Mismatch);
        }
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let mut reps = self.reps.clone();
        reps.extend_from_slice(&other.reps);
        check_arity(labels.len())?;
        let a: Vec<Complex64> = self.amps.iter().copied().collect();
        let b: Vec<Complex64> = other.amps.iter().copied().collect();
        let mut data = Vec::with_capacity(a.len() * b.len());
        for x in &a {
            data.extend(b.iter().map(|y| x * y));
        }
        let shape = vec![self.grid.n_points(); labels.len()];
        let amps = ArrayD::from_shape_vec(IxDyn(&shape), data).map_err(|_| Error::Mismatch)?;
        Self::from_raw(self.grid, labels, reps, amps)
    }

    /// Marginal probability mass of one slot, in that slot's representation.
    pub fn marginal(&self, particle: Particle) -> Result<Vec<f64>> {
        let slot = self.slot_of(particle)?;
        let w = self.weight();
        Ok(self
            .amps
            .axis_iter(Axis(slot))
            .map(|sub| sub.iter().map(|a| a.norm_sqr()).sum::<f64>() * w)
            .collect())
    }
}

pub(crate) fn check_arity(arity: usize) -> Result<usize> {
    if (1..=MAX_ARITY).contains(&arity) {
        Ok(arity)
    } else {
        Err(Error::BadArity(arity))
    }
}

pub fn particles(ids: &[u8]) -> Vec<Particle> {
    ids.iter().map(|&i| Particle(i)).collect()
}

/// Lattice momentum eigenstate `e^{2ipx}` of one particle.
pub fn momentum_eigenstate(grid: Grid, particle: Particle, p: f64) -> Result<WaveFunction> {
    grid.momentum_index(p, "p")?;
    WaveFunction::from_fn(grid, &[particle], |x| Complex64::from_polar(1.0, 2.0 * p * x[0]))
}

/// Kronecker delta at an on-lattice position.
pub fn position_eigenstate(grid: Grid, particle: Particle, x: f64) -> Result<WaveFunction> {
    let j = grid.position_index(x, "x")?;
    let mut amps = ArrayD::zeros(IxDyn(&[grid.n_points()]));
    amps[[j]] = Complex64::new(1.0, 0.0);
    WaveFunction::from_amplitudes(grid, &[particle], amps)
}

/// Normalized single-particle Gaussian packet; `width` is the position standard deviation.
pub fn gaussian_packet(grid: Grid, particle: Particle, center: f64, width: f64, momentum: f64) -> Result<WaveFunction> {
    WaveFunction::from_fn(grid, &[particle], |x| {
        let d = x[0] - center;
        Complex64::from_polar((-d * d / (4.0 * width * width)).exp(), 2.0 * momentum * x[0])
    })
}
