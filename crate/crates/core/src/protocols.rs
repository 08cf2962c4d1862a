//! End-to-end teleportation on the lattice: resource preparation, joint
//! measurement, classical message, receiver corrections and fidelity.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bases::BasisFamily;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gaussian::heisenberg::entangled_correlations;
use crate::gaussian::network::{epr_pair, squeeze, SqueezeParam};
use crate::gaussian::{GaussianState, LinearForm, ReceiverAssignment};
use crate::grid::Grid;
use crate::measurement::{MeasurementOutcome, ProductMeasurement, ResourceKernel, Sampling};
use crate::metrics::{fidelity, quadrature_mean, quadrature_variance};
use crate::operator::{apply_operator, GridOperator};
use crate::resources::{make_epr_wavefunction, make_ghz_wavefunction, make_input_state, AmplitudeProfile, InputSpec, ResourceQuality};
use crate::wavefunction::{particles, Particle, WaveFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CorrectionKind {
    /// `e^{2iPx} |x><x - Q|`.
    #[serde(rename = "u-b")]
    BellKick {
        #[serde(rename = "P")]
        momentum: f64,
        #[serde(rename = "Q")]
        offset: f64,
    },
    /// `e^{2ip(x + q)} |x><x - Q|`.
    #[serde(rename = "u-c")]
    MomentumKick {
        p: f64,
        #[serde(rename = "P")]
        momentum: f64,
        #[serde(rename = "Q")]
        offset: f64,
        q: f64,
    },
    /// Translation by `dx` followed by a momentum kick `dp`.
    Displacement { dx: f64, dp: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionOp {
    pub target: Particle,
    #[serde(flatten)]
    pub kind: CorrectionKind,
    pub adjoint: bool,
}

impl CorrectionOp {
    pub fn bell_kick(target: Particle, momentum: f64, offset: f64) -> Self {
        Self { target, kind: CorrectionKind::BellKick { momentum, offset }, adjoint: false }
    }

    pub fn momentum_kick(target: Particle, p: f64, momentum: f64, offset: f64, q: f64) -> Self {
        Self { target, kind: CorrectionKind::MomentumKick { p, momentum, offset, q }, adjoint: false }
    }

    pub fn displacement(target: Particle, dx: f64, dp: f64) -> Self {
        Self { target, kind: CorrectionKind::Displacement { dx, dp }, adjoint: false }
    }

    pub fn inverse(&self) -> Self {
        Self { adjoint: !self.adjoint, ..*self }
    }

    /// Lattice operator and global phase.
    fn parts(&self, grid: &Grid) -> Result<(GridOperator, Complex64)> {
        let t = self.target;
        let (shift, kick, phase) = match self.kind {
            CorrectionKind::BellKick { momentum, offset } => {
                grid.momentum_steps(momentum, "P")?;
                grid.lattice_shift(offset, "Q")?;
                (offset, momentum, Complex64::new(1.0, 0.0))
            }
            CorrectionKind::MomentumKick { p, offset, q, .. } => {
                grid.momentum_steps(p, "p")?;
                grid.lattice_shift(offset, "Q")?;
                (offset, p, Complex64::from_polar(1.0, 2.0 * p * q))
            }
            CorrectionKind::Displacement { dx, dp } => {
                grid.lattice_shift(dx, "dx")?;
                grid.momentum_steps(dp, "dp")?;
                (dx, dp, Complex64::new(1.0, 0.0))
            }
        };
        let op = GridOperator::Composed(vec![GridOperator::shift(t, shift), GridOperator::phase(t, kick)]);
        Ok(if self.adjoint { (op.adjoint(), phase.conj()) } else { (op, phase) })
    }

    pub fn apply(&self, w: &WaveFunction) -> Result<WaveFunction> {
        let (op, phase) = self.parts(w.grid())?;
        Ok(apply_operator(w, &op)?.state.scaled(phase))
    }
}

/// `e^{2iPx} psi(x - Q)` on `particle`, or its inverse.
pub fn apply_u_b(w: &WaveFunction, momentum: f64, offset: f64, particle: Particle, adjoint: bool) -> Result<WaveFunction> {
    CorrectionOp { adjoint, ..CorrectionOp::bell_kick(particle, momentum, offset) }.apply(w)
}

/// `e^{2ip(x + q)} psi(x - Q)` on `particle`, or its inverse. `momentum` is carried
/// in the record but does not enter the kernel.
pub fn apply_u_c(
    w: &WaveFunction,
    p: f64,
    momentum: f64,
    offset: f64,
    q: f64,
    particle: Particle,
    adjoint: bool,
) -> Result<WaveFunction> {
    CorrectionOp { adjoint, ..CorrectionOp::momentum_kick(particle, p, momentum, offset, q) }.apply(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Single,
    Entangled,
}

/// Lattice second moments of the corrected receiver pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputVariances {
    /// `Var(x4 - x5)`.
    pub relative_position: f64,
    /// `Var(p4 + p5)`.
    pub total_momentum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeleportRecord {
    pub protocol: Protocol,
    pub resource_quality: ResourceQuality,
    pub grid: Grid,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub input: Option<InputSpec>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub assignment: Option<ReceiverAssignment>,
    pub outcome: MeasurementOutcome,
    /// `(p, P, Q)`; `p = 0` for the single-particle protocol.
    pub classical_message: [f64; 3],
    pub corrections: Vec<CorrectionOp>,
    pub fidelity: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub variances: Option<OutputVariances>,
    pub sampling: Sampling,
    pub seed: u64,
}

fn apply_all(w: WaveFunction, ops: &[CorrectionOp]) -> Result<WaveFunction> {
    ops.iter().try_fold(w, |w, op| op.apply(&w))
}

/// Single-particle teleportation through an EPR pair on particles 2, 3,
/// prepared once and run for any number of seeds.
#[derive(Debug, Clone)]
pub struct SingleTeleporter {
    input: WaveFunction,
    target: WaveFunction,
    quality: ResourceQuality,
    measurement: ProductMeasurement,
    spec: Option<InputSpec>,
    sampling: Sampling,
}

impl SingleTeleporter {
    pub fn new(input: &WaveFunction, quality: ResourceQuality) -> Result<Self> {
        if input.arity() != 1 {
            return Err(Error::BadArity(input.arity()));
        }
        let grid = *input.grid();
        let input = input.clone().with_labels(&[Particle(1)])?.normalized()?;
        let resource = make_epr_wavefunction(quality, &grid)?;
        let kernel = Arc::new(ResourceKernel::new(&resource)?);
        let measurement = ProductMeasurement::new(BasisFamily::Bell, &input, kernel)?;
        let target = input.clone().with_labels(&[Particle(3)])?;
        Ok(Self { input, target, quality, measurement, spec: None, sampling: Sampling::default() })
    }

    /// Record `spec` as the description of the input in every record.
    pub fn with_spec(mut self, spec: InputSpec) -> Self {
        self.spec = Some(spec);
        self
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn input(&self) -> &WaveFunction {
        &self.input
    }

    pub fn run_with_state(&self, seed: u64) -> Result<(TeleportRecord, WaveFunction)> {
        let (outcome, conditional) = self.measurement.sample_with(seed, self.sampling)?;
        let v = outcome.values;
        let corrections = vec![CorrectionOp::bell_kick(Particle(3), v.momentum, v.offset)];
        let output = apply_all(conditional, &corrections)?;
        let record = TeleportRecord {
            protocol: Protocol::Single,
            resource_quality: self.quality,
            grid: *self.input.grid(),
            input: self.spec,
            assignment: None,
            classical_message: v.message(),
            outcome,
            corrections,
            fidelity: fidelity(&output, &self.target)?.value,
            variances: None,
            sampling: self.sampling,
            seed,
        };
        Ok((record, output))
    }

    pub fn run(&self, seed: u64) -> Result<TeleportRecord> {
        Ok(self.run_with_state(seed)?.0)
    }

    /// Records in seed order.
    pub fn run_batch(&self, seeds: &[u64], exec: Execution) -> Result<Vec<TeleportRecord>> {
        exec.map(seeds.len(), |i| self.run(seeds[i])).into_iter().collect()
    }
}

pub fn teleport_single(input: &WaveFunction, quality: ResourceQuality, grid: &Grid, seed: u64) -> Result<TeleportRecord> {
    if input.grid() != grid {
        return Err(Error::Mismatch);
    }
    SingleTeleporter::new(input, quality)?.run(seed)
}

/// Entanglement teleportation of the pair on particles 1, 2 to receivers 4, 5
/// through a GHZ resource on particles 3, 4, 5.
#[derive(Debug, Clone)]
pub struct EntangledTeleporter {
    spec: InputSpec,
    q: f64,
    quality: ResourceQuality,
    assignment: ReceiverAssignment,
    input: WaveFunction,
    target: WaveFunction,
    measurement: ProductMeasurement,
    sampling: Sampling,
}

impl EntangledTeleporter {
    pub fn new(spec: &InputSpec, quality: ResourceQuality, grid: &Grid, assignment: ReceiverAssignment) -> Result<Self> {
        let input = make_input_state(spec, grid)?;
        let resource = make_ghz_wavefunction(quality, grid)?;
        Self::from_parts(spec, quality, assignment, input, &resource)
    }

    /// Use an already prepared resource on particles 3, 4, 5.
    pub fn with_resource(
        spec: &InputSpec,
        quality: ResourceQuality,
        assignment: ReceiverAssignment,
        resource: &WaveFunction,
    ) -> Result<Self> {
        let input = make_input_state(spec, resource.grid())?;
        Self::from_parts(spec, quality, assignment, input, resource)
    }

    fn from_parts(
        spec: &InputSpec,
        quality: ResourceQuality,
        assignment: ReceiverAssignment,
        input: WaveFunction,
        resource: &WaveFunction,
    ) -> Result<Self> {
        if resource.labels() != particles(&[3, 4, 5]).as_slice() {
            return Err(Error::Invalid(format!("resource must carry particles 3, 4, 5, got {:?}", resource.labels())));
        }
        let kernel = Arc::new(ResourceKernel::new(resource)?);
        let measurement = ProductMeasurement::new(BasisFamily::Pi123, &input, kernel)?;
        let (first, second) = assignment.receivers();
        let mut target = input.clone().with_labels(&[Particle(first), Particle(second)])?;
        if first != 4 {
            target = apply_operator(&target, &GridOperator::Permutation { a: Particle(4), b: Particle(5) })?
                .state
                .with_labels(&particles(&[4, 5]))?;
        }
        let q = spec.lattice_q(input.grid());
        Ok(Self { spec: *spec, q, quality, assignment, input, target, measurement, sampling: Sampling::default() })
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn input(&self) -> &WaveFunction {
        &self.input
    }

    /// The input relabelled onto the receivers it should reach.
    pub fn target(&self) -> &WaveFunction {
        &self.target
    }

    pub fn grid(&self) -> &Grid {
        self.input.grid()
    }

    /// Corrections for an outcome: Bell kick and offset restore on one receiver,
    /// momentum kick on the other.
    pub fn corrections(&self, outcome: &MeasurementOutcome) -> Vec<CorrectionOp> {
        let v = outcome.values;
        let p = v.p.unwrap_or(0.0);
        let (bell, mom) = self.assignment.receivers();
        vec![
            CorrectionOp::bell_kick(Particle(bell), v.momentum, v.offset),
            CorrectionOp::displacement(Particle(bell), self.q, 0.0),
            CorrectionOp::momentum_kick(Particle(mom), p, v.momentum, v.offset, self.q),
        ]
    }

    /// Measurement outcome and uncorrected receiver state.
    pub fn measure(&self, seed: u64) -> Result<(MeasurementOutcome, WaveFunction)> {
        self.measurement.sample_with(seed, self.sampling)
    }

    pub fn run_with_state(&self, seed: u64) -> Result<(TeleportRecord, WaveFunction)> {
        let (outcome, conditional) = self.measure(seed)?;
        let corrections = self.corrections(&outcome);
        let output = apply_all(conditional, &corrections)?;
        let variances = OutputVariances {
            relative_position: quadrature_variance(&output, &(x5(0) - x5(1)))?,
            total_momentum: quadrature_variance(&output, &(p5(0) + p5(1)))?,
        };
        let record = TeleportRecord {
            protocol: Protocol::Entangled,
            resource_quality: self.quality,
            grid: *self.grid(),
            input: Some(self.spec),
            assignment: Some(self.assignment),
            classical_message: outcome.values.message(),
            outcome,
            corrections,
            fidelity: fidelity(&output, &self.target)?.value,
            variances: Some(variances),
            sampling: self.sampling,
            seed,
        };
        Ok((record, output))
    }

    pub fn run(&self, seed: u64) -> Result<TeleportRecord> {
        Ok(self.run_with_state(seed)?.0)
    }

    pub fn run_batch(&self, seeds: &[u64], exec: Execution) -> Result<Vec<TeleportRecord>> {
        exec.map(seeds.len(), |i| self.run(seeds[i])).into_iter().collect()
    }
}

fn x5(slot: usize) -> LinearForm {
    LinearForm::x(2, slot)
}

fn p5(slot: usize) -> LinearForm {
    LinearForm::p(2, slot)
}

pub fn teleport_entangled(spec: &InputSpec, quality: ResourceQuality, grid: &Grid, seed: u64) -> Result<TeleportRecord> {
    EntangledTeleporter::new(spec, quality, grid, ReceiverAssignment::Standard)?.run(seed)
}

/// Output versus input second moments for one entangled run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub relative_position_variance: f64,
    pub relative_position_mean: f64,
    pub output_total_momentum_mean: f64,
    pub output_total_momentum_variance: f64,
    pub input_total_momentum_mean: f64,
    pub input_total_momentum_variance: f64,
    /// Phase-space prediction of `Var(x4 - x5)`; zero for ideal resources.
    pub predicted_relative_position_variance: f64,
}

/// Relative-position squeezing of the phase-space stand-in for a lattice input.
pub const SHARP_INPUT_SQUEEZING: f64 = 8.0;

/// Single-mode Gaussian packet with position standard deviation `width`.
pub fn gaussian_packet_state(width: f64) -> Result<GaussianState> {
    squeeze(&GaussianState::vacuum(1), SqueezeParam { r: (2.0 * width).ln(), mode: 0 })
}

/// Two-mode Gaussian with `Var(x1) ~ width^2` and `x1 - x2 = q` up to `e^{-2 squeezing} / 2`.
pub fn gaussian_pair(width: f64, squeezing: f64, q: f64) -> Result<GaussianState> {
    let sum_squeezing = 0.5 * (8.0 * width * width - (-2.0 * squeezing).exp()).max(f64::MIN_POSITIVE).ln();
    epr_pair(sum_squeezing, -squeezing).displaced(&DVector::from_vec(vec![q / 2.0, -q / 2.0, 0.0, 0.0]))
}

/// Re-run `record` on `teleporter` and compare output and input moments.
pub fn verify_output_correlations(teleporter: &EntangledTeleporter, record: &TeleportRecord) -> Result<CorrelationReport> {
    if record.protocol != Protocol::Entangled {
        return Err(Error::Invalid("output correlations need an entangled-protocol record".into()));
    }
    let (rerun, output) = teleporter.run_with_state(record.seed)?;
    if rerun.outcome != record.outcome {
        return Err(Error::Invalid("record does not belong to this teleporter".into()));
    }
    let rel = x5(0) - x5(1);
    let tot = p5(0) + p5(1);
    let input = teleporter.input();
    let predicted = match record.resource_quality {
        ResourceQuality::Ideal => 0.0,
        ResourceQuality::Finite { r } => {
            let width = match teleporter.spec.profile {
                AmplitudeProfile::GaussianPacket { width, .. } => width,
                AmplitudeProfile::RandomSmooth { .. } => 1.0,
            };
            let sharp = gaussian_pair(width, SHARP_INPUT_SQUEEZING, teleporter.q)?;
            entangled_correlations(&sharp, r, teleporter.q, teleporter.assignment)?.relative_position_variance
        }
    };
    Ok(CorrelationReport {
        relative_position_variance: quadrature_variance(&output, &rel)?,
        relative_position_mean: quadrature_mean(&output, &rel)?,
        output_total_momentum_mean: quadrature_mean(&output, &tot)?,
        output_total_momentum_variance: quadrature_variance(&output, &tot)?,
        input_total_momentum_mean: quadrature_mean(input, &tot)?,
        input_total_momentum_variance: quadrature_variance(input, &tot)?,
        predicted_relative_position_variance: predicted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::random_state;
    use crate::metrics::schmidt_entropy;
    use crate::wavefunction::{gaussian_packet, position_eigenstate};
    use proptest::prelude::*;

    fn small() -> Grid {
        Grid::new(32, 8.0).unwrap()
    }

    #[test]
    fn zero_arguments_are_identity() {
        let g = small();
        let w = random_state(&g, &particles(&[1, 2]), 4).unwrap();
        assert_eq!(apply_u_b(&w, 0.0, 0.0, Particle(2), false).unwrap(), w);
        assert_eq!(apply_u_c(&w, 0.0, 0.0, 0.0, 0.0, Particle(1), false).unwrap(), w);
    }

    #[test]
    fn bell_kick_moves_a_delta_forward() {
        let g = small();
        let a = g.position(10);
        let b = 3.0 * g.spacing();
        let w = position_eigenstate(g, Particle(1), a).unwrap();
        let out = apply_u_b(&w, 0.0, b, Particle(1), false).unwrap();
        let expected = position_eigenstate(g, Particle(1), a + b).unwrap();
        assert!((fidelity(&out, &expected).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn off_lattice_parameters_are_rejected() {
        let g = small();
        let w = random_state(&g, &[Particle(1)], 1).unwrap();
        assert!(matches!(apply_u_b(&w, 0.0, 0.3 * g.spacing(), Particle(1), false), Err(Error::OffLattice { .. })));
        assert!(apply_u_c(&w, 0.4 * g.momentum_spacing(), 0.0, 0.0, 0.0, Particle(1), false).is_err());
    }

    #[test]
    fn momentum_kick_phase_follows_q() {
        let g = small();
        let w = random_state(&g, &[Particle(1)], 2).unwrap();
        let p = 3.0 * g.momentum_spacing();
        let (q1, q2) = (0.7, -1.9);
        let a = apply_u_c(&w, p, 0.0, g.spacing(), q1, Particle(1), false).unwrap();
        let b = apply_u_c(&w, p, 0.0, g.spacing(), q2, Particle(1), false).unwrap();
        let phase = Complex64::from_polar(1.0, 2.0 * p * (q1 - q2));
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x - y * phase).norm() < 1e-14);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn corrections_are_unitary(seed in 0u64..1000, kp in 0usize..32, kq in 0usize..32, m in -8i64..8, q in -2.0f64..2.0) {
            let g = small();
            let w = random_state(&g, &particles(&[1, 2]), seed).unwrap();
            let (pp, qq) = (g.momentum(kp), m as f64 * g.spacing());
            for op in [
                CorrectionOp::bell_kick(Particle(1), pp, qq),
                CorrectionOp::momentum_kick(Particle(2), g.momentum(kq), pp, qq, q),
                CorrectionOp::displacement(Particle(2), qq, pp),
            ] {
                let there = op.apply(&w).unwrap();
                prop_assert!((there.norm_sqr() - 1.0).abs() < 1e-10);
                let back = op.inverse().apply(&there).unwrap();
                let defect = back.amplitudes().iter().zip(w.amplitudes()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                prop_assert!(defect < 1e-10);
            }
        }
    }

    #[test]
    fn ideal_single_recovers_any_input() {
        let g = Grid::new(64, 12.0).unwrap();
        for s in 0..4 {
            let input = random_state(&g, &[Particle(1)], s).unwrap();
            let t = SingleTeleporter::new(&input, ResourceQuality::Ideal).unwrap();
            for seed in 0..5 {
                let r = t.run(seed).unwrap();
                assert!(r.fidelity > 1.0 - 1e-9, "{}", r.fidelity);
            }
        }
    }

    #[test]
    fn finite_single_tracks_the_closed_form() {
        let g = Grid::new(128, 20.0).unwrap();
        let input = gaussian_packet(g, Particle(1), 0.0, 0.5, 0.0).unwrap();
        for (r, tol) in [(0.0, 0.02), (1.0, 0.01)] {
            let t = SingleTeleporter::new(&input, ResourceQuality::Finite { r }).unwrap();
            let recs = t.run_batch(&(0..200).collect::<Vec<_>>(), Execution::Parallel).unwrap();
            let fids: Vec<f64> = recs.iter().map(|r| r.fidelity).collect();
            let (mean, se) = crate::metrics::mean_and_std_error(&fids);
            let expected = 1.0 / (1.0 + (-2.0 * r).exp());
            eprintln!("r={r}: {mean} +- {se}");
            assert!((mean - expected).abs() < tol, "r={r}: {mean} +- {se} vs {expected}");
        }
    }

    fn spec(q: f64) -> InputSpec {
        InputSpec { profile: AmplitudeProfile::GaussianPacket { center: 0.3, width: 1.0 }, q }
    }

    #[test]
    fn ideal_entangled_recovers_the_pair() {
        let g = Grid::new(32, 16.0).unwrap();
        for q in [0.0, 2.0 * g.spacing(), -3.0 * g.spacing()] {
            for assignment in [ReceiverAssignment::Standard, ReceiverAssignment::Swapped] {
                let t = EntangledTeleporter::new(&spec(q), ResourceQuality::Ideal, &g, assignment).unwrap();
                let fids: Vec<f64> = (0..10).map(|s| t.run(s).unwrap().fidelity).collect();
                assert!(fids.iter().all(|f| *f > 1.0 - 1e-8), "{q} {assignment:?} {fids:?}");
            }
        }
    }

    #[test]
    fn one_sided_correction_fails() {
        let g = Grid::new(32, 16.0).unwrap();
        let t = EntangledTeleporter::new(&spec(g.spacing()), ResourceQuality::Ideal, &g, ReceiverAssignment::Standard).unwrap();
        let mut checked = 0;
        for seed in 0..20 {
            let (outcome, conditional) = t.measure(seed).unwrap();
            let v = outcome.values;
            if v.p.unwrap().abs() < 1e-12 || v.momentum.abs() < 1e-12 || v.offset.abs() < 1e-12 {
                continue;
            }
            let ops = t.corrections(&outcome);
            let both = apply_all(conditional.clone(), &ops).unwrap();
            let only_first = apply_all(conditional.clone(), &ops[..2]).unwrap();
            let only_second = apply_all(conditional, &ops[2..]).unwrap();
            assert!(fidelity(&both, t.target()).unwrap().value > 1.0 - 1e-8);
            assert!(fidelity(&only_first, t.target()).unwrap().value < 0.9);
            assert!(fidelity(&only_second, t.target()).unwrap().value < 0.9);
            checked += 1;
        }
        assert!(checked > 5);
    }

    #[test]
    fn outcome_independence_and_reproducibility() {
        let g = Grid::new(32, 16.0).unwrap();
        let t = EntangledTeleporter::new(&spec(0.0), ResourceQuality::Ideal, &g, ReceiverAssignment::Standard).unwrap();
        let recs = t.run_batch(&(0..50).collect::<Vec<_>>(), Execution::Parallel).unwrap();
        let (lo, hi) = recs.iter().fold((f64::MAX, f64::MIN), |(a, b), r| (a.min(r.fidelity), b.max(r.fidelity)));
        assert!(hi - lo < 1e-8);
        let again = t.run_batch(&(0..50).collect::<Vec<_>>(), Execution::Sequential).unwrap();
        assert_eq!(recs, again);
        for r in &recs {
            assert_eq!(r.fidelity.to_bits(), t.run(r.seed).unwrap().fidelity.to_bits());
        }
    }

    #[test]
    fn ideal_output_correlations() {
        let g = Grid::new(32, 16.0).unwrap();
        let q = 2.0 * g.spacing();
        for (assignment, sign) in [(ReceiverAssignment::Standard, 1.0), (ReceiverAssignment::Swapped, -1.0)] {
            let t = EntangledTeleporter::new(&spec(q), ResourceQuality::Ideal, &g, assignment).unwrap();
            let rec = t.run(3).unwrap();
            let rep = verify_output_correlations(&t, &rec).unwrap();
            assert_eq!(rep.relative_position_variance, 0.0);
            assert!((rep.relative_position_mean - sign * q).abs() < 1e-12);
            assert!((rep.output_total_momentum_variance - rep.input_total_momentum_variance).abs() < 1e-8);
            assert!((rep.output_total_momentum_mean - rep.input_total_momentum_mean).abs() < 1e-8);
            let ent_in = schmidt_entropy(t.input(), &[Particle(1)]).unwrap();
            let (_, out) = t.run_with_state(3).unwrap();
            assert!((schmidt_entropy(&out, &[Particle(4)]).unwrap() - ent_in).abs() < 1e-8);
        }
    }

    #[test]
    fn single_record_rejected_by_correlation_check() {
        let g = Grid::new(32, 16.0).unwrap();
        let t = EntangledTeleporter::new(&spec(0.0), ResourceQuality::Ideal, &g, ReceiverAssignment::Standard).unwrap();
        let input = gaussian_packet(g, Particle(1), 0.0, 1.0, 0.0).unwrap();
        let single = teleport_single(&input, ResourceQuality::Ideal, &g, 0).unwrap();
        assert!(verify_output_correlations(&t, &single).is_err());
    }

    #[test]
    fn phase_space_inputs_have_the_requested_moments() {
        let pair = gaussian_pair(1.5, 6.0, 0.4).unwrap();
        let rel = LinearForm::x(2, 0) - LinearForm::x(2, 1);
        assert!((pair.variance(&LinearForm::x(2, 0)).unwrap() - 2.25).abs() < 1e-9);
        assert!((pair.variance(&rel).unwrap() - (-12f64).exp() / 2.0).abs() < 1e-15);
        assert!((pair.expectation(&rel).unwrap() - 0.4).abs() < 1e-15);
        let single = gaussian_packet_state(0.5).unwrap();
        assert!((single.variance(&LinearForm::x(1, 0)).unwrap() - 0.25).abs() < 1e-15);
        assert!((crate::gaussian::heisenberg::single_fidelity(&single, 1.0).unwrap() - 1.0 / (1.0 + (-2f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn record_round_trips_through_json() {
        let g = Grid::new(32, 16.0).unwrap();
        let rec = teleport_entangled(&spec(g.spacing()), ResourceQuality::Ideal, &g, 11).unwrap();
        let text = serde_json::to_string(&rec).unwrap();
        assert!(text.contains("\"P\""));
        let back: TeleportRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rec);
    }
}
