//! Joint measurements of sender particles in a basis family, with exact
//! lattice Born weights and the conditional state left with the receivers.
//!
//! Product states `input (x) resource` never form the joint tensor. The
//! outcome distribution depends on the resource only through its reduced
//! kernel `K(x, x') = sum_rest R(x, rest) R*(x', rest)` on the measured slot,
//! and the weight of every momentum label at a fixed offset is one lattice
//! transform of a circular correlation of `K`.

use std::sync::Arc;

use ndarray::{Array2, ArrayD, Axis, IxDyn};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::bases::{analyze, collective_momentum, Analysis, BasisFamily, LabelIndex};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::{Grid, LatticeFft};
use crate::wavefunction::{Particle, Representation, WaveFunction, MAX_ARITY};

/// Largest grid for which a dense five-particle tensor is measured.
pub const MAX_DENSE_POINTS: usize = 32;

/// Joint pre-measurement state.
#[derive(Debug, Clone, PartialEq)]
pub enum JointState {
    /// `input (x) resource`; the resource's first slot joins the measurement.
    Product { input: WaveFunction, resource: WaveFunction },
    /// General entangled tensor.
    Dense(WaveFunction),
}

impl JointState {
    pub fn grid(&self) -> &Grid {
        match self {
            Self::Product { input, .. } => input.grid(),
            Self::Dense(w) => w.grid(),
        }
    }

    pub fn labels(&self) -> Vec<Particle> {
        match self {
            Self::Product { input, resource } => input.labels().iter().chain(resource.labels()).copied().collect(),
            Self::Dense(w) => w.labels().to_vec(),
        }
    }

    /// Materialize the joint tensor.
    pub fn to_dense(&self) -> Result<WaveFunction> {
        match self {
            Self::Product { input, resource } => {
                let n = input.grid().n_points();
                if input.arity() + resource.arity() == MAX_ARITY && n > MAX_DENSE_POINTS {
                    return Err(Error::DenseTooLarge(n));
                }
                input.tensor(resource)
            }
            Self::Dense(w) => Ok(w.clone()),
        }
    }
}

/// Physical outcome values. Which fields are present depends on the family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeValues {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p: Option<f64>,
    #[serde(rename = "P")]
    pub momentum: f64,
    #[serde(rename = "Q")]
    pub offset: f64,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none", default)]
    pub second_offset: Option<f64>,
}

impl OutcomeValues {
    pub fn of(label: &LabelIndex, grid: &Grid) -> Self {
        match label.family {
            BasisFamily::Bell => {
                let b = label.bell(grid);
                Self { p: None, momentum: b.momentum, offset: b.offset, second_offset: None }
            }
            BasisFamily::Pi123 => {
                let t = label.triple(grid);
                Self { p: Some(t.p), momentum: t.momentum, offset: t.offset, second_offset: None }
            }
            BasisFamily::Triple => {
                let c = label.collective(grid);
                Self { p: None, momentum: c.momentum, offset: c.offset, second_offset: Some(c.second_offset) }
            }
        }
    }

    /// `(p, P, Q)` with `p = 0` when the family has no single-particle momentum.
    pub fn message(&self) -> [f64; 3] {
        [self.p.unwrap_or(0.0), self.momentum, self.offset]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementOutcome {
    pub label: LabelIndex,
    pub values: OutcomeValues,
    /// Probability mass of the lattice cell.
    pub density: f64,
    pub seed: u64,
}

/// Reduced kernel of a resource on its first slot, with the resource rows kept
/// for building conditional states.
#[derive(Debug, Clone)]
pub struct ResourceKernel {
    grid: Grid,
    rest: Vec<Particle>,
    /// `rows[j, r] = R(x_j, rest_r)`.
    rows: Array2<Complex64>,
    /// `K = rows rows^H * spacing^(arity - 1)`.
    kernel: Array2<Complex64>,
}

impl ResourceKernel {
    pub fn new(resource: &WaveFunction) -> Result<Self> {
        if resource.arity() < 2 {
            return Err(Error::BadArity(resource.arity()));
        }
        if resource.representations().iter().any(|r| *r != Representation::Position) {
            return Err(Error::RepresentationMismatch(0));
        }
        let grid = *resource.grid();
        let n = grid.n_points();
        let m = resource.amplitudes().len() / n;
        let flat: Vec<Complex64> = resource.amplitudes().iter().copied().collect();
        let rows = Array2::from_shape_vec((n, m), flat).map_err(|_| Error::Mismatch)?;
        let weight = grid.spacing().powi(resource.arity() as i32 - 1);
        let kernel = rows.dot(&rows.t().mapv(|z| z.conj())).mapv(|z| z * weight);
        Ok(Self { grid, rest: resource.labels()[1..].to_vec(), rows, kernel })
    }

    pub fn kernel(&self) -> &Array2<Complex64> {
        &self.kernel
    }

    /// Particle entering the measurement.
    pub fn rest(&self) -> &[Particle] {
        &self.rest
    }

    /// `s(D) = sum_{j - j' = D} v_j K_{jj'} v*_{j'}` (circular).
    fn correlation(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = v.len();
        let mut s = vec![Complex64::new(0.0, 0.0); n];
        for (j, vj) in v.iter().enumerate() {
            if vj.norm_sqr() == 0.0 {
                continue;
            }
            let row = self.kernel.row(j);
            for (jp, vjp) in v.iter().enumerate() {
                if vjp.norm_sqr() != 0.0 {
                    s[(j + n - jp) % n] += vj * row[jp] * vjp.conj();
                }
            }
        }
        s
    }

    /// `sum_j |v_j|^2 K_jj`: weight of an offset summed over momenta.
    fn diagonal_weight(&self, v: &[Complex64]) -> f64 {
        v.iter().enumerate().map(|(j, vj)| vj.norm_sqr() * self.kernel[[j, j]].re).sum()
    }

    /// Unnormalized receiver state `scale * sum_j e^{-2i P (x_j + shift)} v_j / sqrt(n) R(x_j, .)`.
    fn receiver_state(&self, v: &[Complex64], momentum: f64, shift: f64, scale: f64) -> Result<WaveFunction> {
        let n = self.grid.n_points();
        let norm = scale / (n as f64).sqrt();
        let w: Vec<Complex64> = v
            .iter()
            .enumerate()
            .map(|(j, vj)| vj * Complex64::from_polar(norm, -2.0 * momentum * (self.grid.position(j) + shift)))
            .collect();
        let mut out = ndarray::Array1::<Complex64>::zeros(self.rows.ncols());
        for (j, wj) in w.iter().enumerate() {
            if wj.norm_sqr() != 0.0 {
                out.scaled_add(*wj, &self.rows.row(j));
            }
        }
        let shape = vec![n; self.rest.len()];
        let amps = ArrayD::from_shape_vec(IxDyn(&shape), out.to_vec()).map_err(|_| Error::Mismatch)?;
        WaveFunction::from_raw(self.grid, self.rest.clone(), vec![Representation::Position; self.rest.len()], amps)
    }
}

/// Weights of every momentum label for one offset: `pref * sum_D s(D) e^{-2 pi i (k - n/2) D / n}`.
fn momentum_weights(s: &[Complex64], prefactor: f64) -> Vec<f64> {
    let n = s.len();
    let mut buf = s.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    (0..n).map(|k| (buf[(k + n / 2) % n].re * prefactor).max(0.0)).collect()
}

/// How a seed is turned into the uniforms that drive outcome sampling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// Independent ChaCha8 stream per seed.
    Independent,
    /// Seed `s` takes point `s` of a three-dimensional Kronecker sequence, so
    /// consecutive seeds cover the outcome space evenly.
    #[default]
    Stratified,
}

/// `frac(1 / phi^k)` for the plastic-like root `phi^4 = phi + 1`, as 64-bit fixed point.
const KRONECKER_STEPS: [u64; 3] = kronecker_steps();

const fn kronecker_steps() -> [u64; 3] {
    // phi = 1.2207440846057596, root of x^4 = x + 1
    let inv = 0.819_172_513_396_164_4f64;
    let a = [inv, inv * inv, inv * inv * inv];
    let mut out = [0u64; 3];
    let mut i = 0;
    while i < 3 {
        out[i] = (a[i] * 18_446_744_073_709_551_616.0) as u64;
        i += 1;
    }
    out
}

enum Uniforms {
    Stream(ChaCha8Rng),
    Lattice { seed: u64, next: usize },
}

impl Uniforms {
    fn new(sampling: Sampling, seed: u64) -> Self {
        match sampling {
            Sampling::Independent => Self::Stream(ChaCha8Rng::seed_from_u64(seed)),
            Sampling::Stratified => Self::Lattice { seed, next: 0 },
        }
    }

    fn next(&mut self) -> f64 {
        match self {
            Self::Stream(rng) => rng.random::<f64>(),
            Self::Lattice { seed, next } => {
                let step = KRONECKER_STEPS[*next % KRONECKER_STEPS.len()];
                *next += 1;
                let fixed = seed.wrapping_mul(step).wrapping_add(1 << 63);
                (fixed >> 11) as f64 / (1u64 << 53) as f64
            }
        }
    }
}

/// Inverse-CDF draw from unnormalized weights.
fn sample_index(weights: &[f64], uniforms: &mut Uniforms) -> Result<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::Invalid(format!("outcome weights must be non-negative with positive sum, got total {total}")));
    }
    let target = uniforms.next() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return Ok(i);
        }
    }
    Ok(weights.iter().rposition(|w| *w > 0.0).expect("positive total"))
}

/// Measurement of `input (x) resource` without forming the joint tensor.
#[derive(Debug, Clone)]
pub struct ProductMeasurement {
    family: BasisFamily,
    grid: Grid,
    kernel: Arc<ResourceKernel>,
    /// Bell: one row, the input. Pi123: `[k_p, x2]` momentum-projected rows. Triple: the input matrix.
    table: Array2<Complex64>,
    /// Pi123 only: probability of each first-particle momentum.
    first_weights: Vec<f64>,
}

impl ProductMeasurement {
    pub fn new(family: BasisFamily, input: &WaveFunction, kernel: Arc<ResourceKernel>) -> Result<Self> {
        let grid = *input.grid();
        if grid != kernel.grid {
            return Err(Error::Mismatch);
        }
        if input.arity() + 1 != family.arity() {
            return Err(Error::Invalid(format!(
                "{} basis needs a {}-particle input, got {}",
                family.name(),
                family.arity() - 1,
                input.arity()
            )));
        }
        if input.representations().iter().any(|r| *r != Representation::Position) {
            return Err(Error::RepresentationMismatch(0));
        }
        let n = grid.n_points();
        let d = grid.spacing();
        let flat: Vec<Complex64> = input.amplitudes().iter().copied().collect();
        let (table, first_weights) = match family {
            BasisFamily::Bell => (Array2::from_shape_vec((1, n), flat).map_err(|_| Error::Mismatch)?, Vec::new()),
            BasisFamily::Triple => (Array2::from_shape_vec((n, n), flat).map_err(|_| Error::Mismatch)?, Vec::new()),
            BasisFamily::Pi123 => {
                let a = Array2::from_shape_vec((n, n), flat).map_err(|_| Error::Mismatch)?;
                let fft = LatticeFft::new(n);
                let mut t = Array2::zeros((n, n));
                let mut lane = vec![Complex64::new(0.0, 0.0); n];
                for x2 in 0..n {
                    for (x1, v) in lane.iter_mut().enumerate() {
                        *v = a[[x1, x2]];
                    }
                    fft.forward(&mut lane);
                    for (k, v) in lane.iter().enumerate() {
                        t[[k, x2]] = v * d.sqrt();
                    }
                }
                let w = t.axis_iter(Axis(0)).map(|row| row.iter().map(|z| z.norm_sqr()).sum::<f64>() * d).collect();
                (t, w)
            }
        };
        Ok(Self { family, grid, kernel, table, first_weights })
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    fn scale(&self) -> f64 {
        let d = self.grid.spacing();
        match self.family {
            BasisFamily::Triple => d * d.sqrt(),
            _ => d,
        }
    }

    fn offset(&self, index: usize) -> i64 {
        index as i64 - self.grid.origin_index() as i64
    }

    /// `v_j` for the offset indices of a label (everything but the momentum index).
    fn pair_vector(&self, first: usize, offsets: &[usize]) -> Vec<Complex64> {
        let n = self.grid.n_points();
        let g = &self.grid;
        match self.family {
            BasisFamily::Bell => {
                let m = self.offset(offsets[0]);
                (0..n).map(|j| self.table[[0, g.wrap(j as i64 + m)]]).collect()
            }
            BasisFamily::Pi123 => {
                let m = self.offset(offsets[0]);
                (0..n).map(|j| self.table[[first, g.wrap(j as i64 + m)]]).collect()
            }
            BasisFamily::Triple => {
                let (mq, mr) = (self.offset(offsets[0]), self.offset(offsets[1]));
                (0..n).map(|j| self.table[[g.wrap(j as i64 + mr), g.wrap(j as i64 + mr - mq)]]).collect()
            }
        }
    }

    /// Momentum of the label component the receivers are kicked by, and the shift in its phase.
    fn phase_parameters(&self, k: usize, offsets: &[usize]) -> (f64, f64) {
        match self.family {
            BasisFamily::Triple => (self.grid.momentum(k), self.grid.position(offsets[1])),
            _ => (self.grid.momentum(k), self.grid.position(offsets[0])),
        }
    }

    fn split(&self, label: &LabelIndex) -> (usize, usize, Vec<usize>) {
        // (first-particle momentum index, pair momentum index, offset indices)
        let i = &label.indices;
        match self.family {
            BasisFamily::Bell => (0, i[0], vec![i[1]]),
            BasisFamily::Pi123 => (i[0], i[1], vec![i[2]]),
            BasisFamily::Triple => (0, i[0], vec![i[1], i[2]]),
        }
    }

    fn join(&self, first: usize, k: usize, offsets: &[usize]) -> LabelIndex {
        let indices = match self.family {
            BasisFamily::Bell => vec![k, offsets[0]],
            BasisFamily::Pi123 => vec![first, k, offsets[0]],
            BasisFamily::Triple => vec![k, offsets[0], offsets[1]],
        };
        LabelIndex { family: self.family, indices }
    }

    /// Unnormalized receiver state for a label; its squared norm is the label's probability.
    pub fn project(&self, label: &LabelIndex) -> Result<WaveFunction> {
        self.check_label(label)?;
        let (first, k, offsets) = self.split(label);
        let v = self.pair_vector(first, &offsets);
        let (momentum, shift) = self.phase_parameters(k, &offsets);
        self.kernel.receiver_state(&v, momentum, shift, self.scale())
    }

    fn check_label(&self, label: &LabelIndex) -> Result<()> {
        let n = self.grid.n_points();
        if label.family != self.family || label.indices.len() != self.family.arity() || label.indices.iter().any(|&i| i >= n) {
            return Err(Error::Invalid(format!("label {label:?} does not belong to this measurement")));
        }
        Ok(())
    }

    fn offset_sets(&self) -> Vec<Vec<usize>> {
        let n = self.grid.n_points();
        match self.family {
            BasisFamily::Triple => (0..n * n).map(|i| vec![i / n, i % n]).collect(),
            _ => (0..n).map(|i| vec![i]).collect(),
        }
    }

    /// Sample an outcome and return it with the normalized receiver state.
    pub fn sample(&self, seed: u64) -> Result<(MeasurementOutcome, WaveFunction)> {
        self.sample_with(seed, Sampling::default())
    }

    pub fn sample_with(&self, seed: u64, sampling: Sampling) -> Result<(MeasurementOutcome, WaveFunction)> {
        let mut rng = Uniforms::new(sampling, seed);
        let n = self.grid.n_points();
        let first = if self.family == BasisFamily::Pi123 { sample_index(&self.first_weights, &mut rng)? } else { 0 };
        let sets = self.offset_sets();
        let scale2 = self.scale().powi(2);
        let offset_weights: Vec<f64> =
            sets.iter().map(|o| scale2 * self.kernel.diagonal_weight(&self.pair_vector(first, o))).collect();
        let chosen = &sets[sample_index(&offset_weights, &mut rng)?];
        let v = self.pair_vector(first, chosen);
        let weights = momentum_weights(&self.kernel.correlation(&v), scale2 / n as f64);
        let k = sample_index(&weights, &mut rng)?;
        let label = self.join(first, k, chosen);
        let (momentum, shift) = self.phase_parameters(k, chosen);
        let state = self.kernel.receiver_state(&v, momentum, shift, self.scale())?;
        let density = state.norm_sqr();
        let outcome = MeasurementOutcome { values: OutcomeValues::of(&label, &self.grid), label, density, seed };
        Ok((outcome, state.normalized()?))
    }

    /// Probability of every label, indexed like [`LabelIndex`].
    pub fn label_probabilities(&self, exec: Execution) -> Result<ArrayD<f64>> {
        let n = self.grid.n_points();
        let scale2 = self.scale().powi(2);
        let firsts = if self.family == BasisFamily::Pi123 { n } else { 1 };
        let sets = self.offset_sets();
        let rows = exec.map(firsts * sets.len(), |i| {
            let (first, o) = (i / sets.len(), &sets[i % sets.len()]);
            let v = self.pair_vector(first, o);
            momentum_weights(&self.kernel.correlation(&v), scale2 / n as f64)
        });
        let mut out = ArrayD::zeros(IxDyn(&vec![n; self.family.arity()]));
        for (i, row) in rows.iter().enumerate() {
            let (first, o) = (i / sets.len(), &sets[i % sets.len()]);
            for (k, w) in row.iter().enumerate() {
                out[IxDyn(&self.join(first, k, o).indices)] = *w;
            }
        }
        Ok(out)
    }
}

/// Measurement of a general tensor through its basis coefficients.
#[derive(Debug, Clone)]
pub struct DenseMeasurement {
    grid: Grid,
    analysis: Analysis,
    probabilities: Vec<f64>,
}

impl DenseMeasurement {
    pub fn new(family: BasisFamily, state: &WaveFunction, measured: &[Particle], exec: Execution) -> Result<Self> {
        let grid = *state.grid();
        if state.arity() == MAX_ARITY && grid.n_points() > MAX_DENSE_POINTS {
            return Err(Error::DenseTooLarge(grid.n_points()));
        }
        if state.arity() <= family.arity() {
            return Err(Error::Invalid("dense measurement must leave at least one particle".into()));
        }
        let analysis = analyze(family, state, measured, exec)?;
        let rest_weight = grid.spacing().powi(analysis.rest.len() as i32);
        let labels = analysis.label_count();
        let per_label = analysis.coefficients.len() / labels;
        let flat = analysis.coefficients.as_standard_layout();
        let flat = flat.as_slice().expect("standard layout");
        let probabilities =
            flat.chunks(per_label).map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>() * rest_weight).collect();
        Ok(Self { grid, analysis, probabilities })
    }

    fn label_of(&self, flat: usize) -> LabelIndex {
        let n = self.grid.n_points();
        let k = self.analysis.family.arity();
        let mut rest = flat;
        let mut indices = vec![0; k];
        for slot in (0..k).rev() {
            indices[slot] = rest % n;
            rest /= n;
        }
        LabelIndex { family: self.analysis.family, indices }
    }

    pub fn project(&self, label: &LabelIndex) -> Result<WaveFunction> {
        self.analysis.conditional(&self.grid, &label.indices)
    }

    pub fn sample(&self, seed: u64) -> Result<(MeasurementOutcome, WaveFunction)> {
        self.sample_with(seed, Sampling::default())
    }

    pub fn sample_with(&self, seed: u64, sampling: Sampling) -> Result<(MeasurementOutcome, WaveFunction)> {
        let mut rng = Uniforms::new(sampling, seed);
        let flat = sample_index(&self.probabilities, &mut rng)?;
        let label = self.label_of(flat);
        let state = self.project(&label)?;
        let outcome = MeasurementOutcome {
            values: OutcomeValues::of(&label, &self.grid),
            label,
            density: self.probabilities[flat],
            seed,
        };
        Ok((outcome, state.normalized()?))
    }

    pub fn label_probabilities(&self) -> Result<ArrayD<f64>> {
        let n = self.grid.n_points();
        ArrayD::from_shape_vec(IxDyn(&vec![n; self.analysis.family.arity()]), self.probabilities.clone())
            .map_err(|_| Error::Mismatch)
    }
}

/// A prepared joint measurement: reusable across seeds.
#[derive(Debug, Clone)]
pub enum Measurement {
    Product(ProductMeasurement),
    Dense(DenseMeasurement),
}

impl Measurement {
    /// Check `particles` against the state and prepare the chosen engine.
    pub fn prepare(state: &JointState, family: BasisFamily, particles: &[Particle], exec: Execution) -> Result<Self> {
        match state {
            JointState::Product { input, resource } => {
                let expected: Vec<Particle> = input.labels().iter().copied().chain(resource.labels().first().copied()).collect();
                if particles != expected.as_slice() {
                    return Err(Error::Invalid(format!(
                        "{} measurement on a product state must act on {expected:?}, got {particles:?}",
                        family.name()
                    )));
                }
                let kernel = Arc::new(ResourceKernel::new(resource)?);
                Ok(Self::Product(ProductMeasurement::new(family, input, kernel)?))
            }
            JointState::Dense(w) => Ok(Self::Dense(DenseMeasurement::new(family, w, particles, exec)?)),
        }
    }

    pub fn sample(&self, seed: u64) -> Result<(MeasurementOutcome, WaveFunction)> {
        self.sample_with(seed, Sampling::default())
    }

    pub fn sample_with(&self, seed: u64, sampling: Sampling) -> Result<(MeasurementOutcome, WaveFunction)> {
        match self {
            Self::Product(m) => m.sample_with(seed, sampling),
            Self::Dense(m) => m.sample_with(seed, sampling),
        }
    }

    pub fn project(&self, label: &LabelIndex) -> Result<WaveFunction> {
        match self {
            Self::Product(m) => m.project(label),
            Self::Dense(m) => m.project(label),
        }
    }

    pub fn label_probabilities(&self, exec: Execution) -> Result<ArrayD<f64>> {
        match self {
            Self::Product(m) => m.label_probabilities(exec),
            Self::Dense(m) => m.label_probabilities(),
        }
    }
}

/// Measure `particles` of `state` in `family`; returns the outcome and the
/// normalized state of the remaining particles.
pub fn joint_measure(
    state: &JointState,
    family: BasisFamily,
    particles: &[Particle],
    seed: u64,
) -> Result<(MeasurementOutcome, WaveFunction)> {
    Measurement::prepare(state, family, particles, Execution::default())?.sample(seed)
}

/// Norms of the receiver map induced by one outcome, on a set of test inputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InducedMapRow {
    pub label: LabelIndex,
    pub values: OutcomeValues,
    /// `||M psi||` for each test input, with `M` scaled by the square root of the label count.
    pub norms: Vec<f64>,
    pub isometry_defect: f64,
    /// `max |<M a|M b> - <a|b>|` over test pairs.
    pub gram_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyDefects {
    pub family: BasisFamily,
    pub rows: Vec<InducedMapRow>,
    pub max_isometry_defect: f64,
    pub max_gram_defect: f64,
}

/// Side-by-side isometry defects of the collective and momentum-times-Bell bases.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureReport {
    pub triple: FamilyDefects,
    pub pi123: FamilyDefects,
}

/// Isometry and Gram defects of the receiver maps induced by `labels`.
pub fn induced_map_defects(
    family: BasisFamily,
    kernel: &Arc<ResourceKernel>,
    tests: &[WaveFunction],
    labels: &[LabelIndex],
    exec: Execution,
) -> Result<FamilyDefects> {
    let measurements: Vec<ProductMeasurement> =
        tests.iter().map(|t| ProductMeasurement::new(family, t, kernel.clone())).collect::<Result<_>>()?;
    let grid = kernel.grid;
    let scale = (grid.n_points() as f64).powf(family.arity() as f64 / 2.0);
    let rows = exec.map(labels.len(), |i| -> Result<InducedMapRow> {
        let label = &labels[i];
        let images: Vec<WaveFunction> =
            measurements.iter().map(|m| m.project(label).map(|w| w.scaled(Complex64::new(scale, 0.0)))).collect::<Result<_>>()?;
        let norms: Vec<f64> = images.iter().map(|w| w.norm_sqr().sqrt()).collect();
        let isometry_defect = norms.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        let mut gram_defect: f64 = 0.0;
        for a in 0..tests.len() {
            for b in a + 1..tests.len() {
                let before = tests[a].inner_product(&tests[b])?;
                let after = images[a].inner_product(&images[b])?;
                gram_defect = gram_defect.max((after - before).norm());
            }
        }
        Ok(InducedMapRow { label: label.clone(), values: OutcomeValues::of(label, &grid), norms, isometry_defect, gram_defect })
    });
    let rows: Vec<InducedMapRow> = rows.into_iter().collect::<Result<_>>()?;
    let max_isometry_defect = rows.iter().map(|r| r.isometry_defect).fold(0.0, f64::max);
    let max_gram_defect = rows.iter().map(|r| r.gram_defect).fold(0.0, f64::max);
    Ok(FamilyDefects { family, rows, max_isometry_defect, max_gram_defect })
}

/// Compare the induced receiver maps of both three-particle bases on `tests`.
///
/// Outcomes are sampled from `input (x) resource` with `samples` seeds, and
/// every family also probes the label with offset `q + 2 * spacing`, which
/// the ideal input never produces.
pub fn demonstrate_triple_basis_failure(
    input: &WaveFunction,
    resource: &WaveFunction,
    q: f64,
    tests: &[WaveFunction],
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<FailureReport> {
    let grid = *input.grid();
    let kernel = Arc::new(ResourceKernel::new(resource)?);
    let off = grid.position_index(q + 2.0 * grid.spacing(), "Q")?;
    let run = |family: BasisFamily| -> Result<FamilyDefects> {
        let m = ProductMeasurement::new(family, input, kernel.clone())?;
        let mut labels: Vec<LabelIndex> = (0..samples as u64).map(|s| m.sample(seed + s).map(|(o, _)| o.label)).collect::<Result<_>>()?;
        let probe = match family {
            BasisFamily::Triple => LabelIndex { family, indices: vec![grid.origin_index(), off, grid.origin_index()] },
            _ => LabelIndex { family, indices: vec![grid.origin_index(), grid.origin_index(), off] },
        };
        labels.push(probe);
        labels.dedup();
        induced_map_defects(family, &kernel, tests, &labels, exec)
    };
    Ok(FailureReport { triple: run(BasisFamily::Triple)?, pi123: run(BasisFamily::Pi123)? })
}

/// Physical `P` for the momentum index of a label in `family`.
pub fn label_momentum(family: BasisFamily, grid: &Grid, k: usize) -> f64 {
    match family {
        BasisFamily::Triple => collective_momentum(grid, k),
        _ => grid.momentum(k),
    }
}
