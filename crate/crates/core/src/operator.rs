//! Lattice translations, momentum kicks and particle permutations.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wavefunction::{Particle, Representation, WaveFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GridOperator {
    /// `sum_x |x + Q><x|`: amplitude at site j moves to site `j + round(Q/spacing)`, periodically.
    PositionShift { target: Particle, displacement: f64 },
    /// Multiply by `e^{2iPx}` in the target coordinate.
    MomentumPhase { target: Particle, momentum: f64 },
    /// Exchange two particles' coordinates.
    Permutation { a: Particle, b: Particle },
    /// Applied left to right.
    Composed(Vec<GridOperator>),
}

impl GridOperator {
    pub fn shift(target: Particle, displacement: f64) -> Self {
        Self::PositionShift { target, displacement }
    }

    pub fn phase(target: Particle, momentum: f64) -> Self {
        Self::MomentumPhase { target, momentum }
    }

    pub fn adjoint(&self) -> Self {
        match self {
            Self::PositionShift { target, displacement } => Self::shift(*target, -displacement),
            Self::MomentumPhase { target, momentum } => Self::phase(*target, -momentum),
            Self::Permutation { .. } => self.clone(),
            Self::Composed(ops) => Self::Composed(ops.iter().rev().map(Self::adjoint).collect()),
        }
    }
}

/// Result of applying an operator, with the accumulated shift rounding residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub state: WaveFunction,
    pub rounding_residual: f64,
}

pub fn apply_operator(w: &WaveFunction, op: &GridOperator) -> Result<Applied> {
    let mut state = w.clone();
    let mut residual = 0.0;
    apply_in_place(&mut state, op, &mut residual)?;
    Ok(Applied { state, rounding_residual: residual })
}

fn apply_in_place(w: &mut WaveFunction, op: &GridOperator, residual: &mut f64) -> Result<()> {
    match op {
        GridOperator::PositionShift { target, displacement } => {
            let slot = position_slot(w, *target)?;
            let (sites, res) = w.grid().site_shift(*displacement);
            *residual += res;
            shift_slot(w, slot, sites);
        }
        GridOperator::MomentumPhase { target, momentum } => {
            let slot = position_slot(w, *target)?;
            let grid = *w.grid();
            let phases: Vec<Complex64> =
                grid.positions().iter().map(|x| Complex64::from_polar(1.0, 2.0 * momentum * x)).collect();
            w.for_each_lane(slot, |lane| {
                for (a, ph) in lane.iter_mut().zip(&phases) {
                    *a *= ph;
                }
            });
        }
        GridOperator::Permutation { a, b } => {
            let sa = w.slot_of(*a)?;
            let sb = w.slot_of(*b)?;
            if w.representation(sa) != w.representation(sb) {
                return Err(Error::RepresentationMismatch(sb));
            }
            w.amplitudes_mut().swap_axes(sa, sb);
            let owned = w.amplitudes().as_standard_layout().into_owned();
            *w.amplitudes_mut() = owned;
        }
        GridOperator::Composed(ops) => {
            for op in ops {
                apply_in_place(w, op, residual)?;
            }
        }
    }
    Ok(())
}

fn position_slot(w: &WaveFunction, target: Particle) -> Result<usize> {
    let slot = w.slot_of(target)?;
    if w.representation(slot) != Representation::Position {
        return Err(Error::RepresentationMismatch(slot));
    }
    Ok(slot)
}

/// Periodic roll by `sites` along `slot`.
pub(crate) fn shift_slot(w: &mut WaveFunction, slot: usize, sites: i64) {
    let n = w.grid().n_points() as i64;
    let s = sites.rem_euclid(n) as usize;
    if s == 0 {
        return;
    }
    w.for_each_lane(slot, |lane| lane.rotate_right(s));
}
