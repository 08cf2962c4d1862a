//! Operator identities and feed-forward outputs, both as linear forms over the
//! joint quadratures of sender, resource and receiver modes.
//!
//! Particle `k` occupies mode `k - 1` throughout.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::network::{epr_state, ghz_state};
use super::state::{GaussianState, LinearForm};
use crate::error::{Error, Result};

/// Coefficient tolerance for symbolic identity checks.
pub const IDENTITY_TOL: f64 = 1e-12;

/// Which receiver gets the relative-position/total-momentum correction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReceiverAssignment {
    /// Bell-label correction on particle 4, momentum-label correction on particle 5.
    #[default]
    Standard,
    Swapped,
}

impl ReceiverAssignment {
    /// Particles receiving (Bell-label correction, momentum-label correction).
    pub fn receivers(self) -> (u8, u8) {
        match self {
            Self::Standard => (4, 5),
            Self::Swapped => (5, 4),
        }
    }
}

fn x(n: usize, particle: usize) -> LinearForm {
    LinearForm::x(n, particle - 1)
}

fn p(n: usize, particle: usize) -> LinearForm {
    LinearForm::p(n, particle - 1)
}

/// `(x_a - x_b) / sqrt 2` for particles `a`, `b`.
pub fn relative_position(n_modes: usize, a: usize, b: usize) -> LinearForm {
    (x(n_modes, a) - x(n_modes, b)) * (1.0 / SQRT_2)
}

/// `(p_a + p_b) / sqrt 2` for particles `a`, `b`.
pub fn total_momentum(n_modes: usize, a: usize, b: usize) -> LinearForm {
    (p(n_modes, a) + p(n_modes, b)) * (1.0 / SQRT_2)
}

/// True iff `lhs` and the sum of `rhs_terms` have the same coefficients.
pub fn verify_identity(lhs: &LinearForm, rhs_terms: &[LinearForm]) -> bool {
    let Some(first) = rhs_terms.first() else {
        return lhs.distance(&LinearForm::zero(lhs.n_modes())) <= IDENTITY_TOL;
    };
    if rhs_terms.iter().any(|t| t.n_modes() != lhs.n_modes()) {
        return false;
    }
    let sum = rhs_terms[1..].iter().cloned().fold(first.clone(), |acc, t| acc + t);
    lhs.distance(&sum) <= IDENTITY_TOL
}

/// One row of the identity report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    /// Whether the identity holds with its stated left-hand side.
    pub holds: bool,
    /// Single quadrature the right-hand side actually equals, when it differs from the stated one.
    pub actually_equals: Option<String>,
}

/// Check every operator identity behind the two protocols.
///
/// The per-receiver momentum lines are stated with their left-hand sides
/// exchanged; the report flags them and also checks the exchanged forms and
/// their sum.
pub fn identity_report() -> Vec<IdentityCheck> {
    let mut out = Vec::new();
    let mut push = |name: &str, lhs: LinearForm, rhs: Vec<LinearForm>, candidates: &[(&str, LinearForm)]| {
        let holds = verify_identity(&lhs, &rhs);
        let actually_equals = if holds {
            None
        } else {
            candidates.iter().find(|(_, c)| verify_identity(c, &rhs)).map(|(label, _)| label.to_string())
        };
        out.push(IdentityCheck { name: name.to_string(), holds, actually_equals });
    };

    let n = 3;
    let xq = relative_position(n, 1, 2);
    let pp = total_momentum(n, 1, 2);
    push(
        "single x3",
        x(n, 3),
        vec![x(n, 1), -(x(n, 2) - x(n, 3)), -SQRT_2 * xq],
        &[],
    );
    push(
        "single p3",
        p(n, 3),
        vec![p(n, 1), p(n, 2) + p(n, 3), -SQRT_2 * pp],
        &[],
    );

    let n = 5;
    let yq = relative_position(n, 2, 3);
    let pi = total_momentum(n, 2, 3);
    let candidates = [("p4", p(n, 4)), ("p5", p(n, 5))];
    let ghz_psum = p(n, 3) + p(n, 4) + p(n, 5);
    push("entangled x4", x(n, 4), vec![x(n, 2), x(n, 4) - x(n, 3), -SQRT_2 * yq.clone()], &[]);
    push(
        "entangled x5",
        x(n, 5),
        vec![x(n, 1), x(n, 2) - x(n, 1), x(n, 5) - x(n, 3), -SQRT_2 * yq],
        &[],
    );
    let rhs_first = vec![p(n, 2), ghz_psum.clone(), p(n, 1) - p(n, 5), -(p(n, 1) + SQRT_2 * pi.clone())];
    let rhs_second = vec![p(n, 1), ghz_psum, p(n, 2) - p(n, 4), -(p(n, 1) + SQRT_2 * pi)];
    push("entangled p5 as stated", p(n, 5), rhs_first.clone(), &candidates);
    push("entangled p4 as stated", p(n, 4), rhs_second.clone(), &candidates);
    push("entangled p4 exchanged", p(n, 4), rhs_first.clone(), &candidates);
    push("entangled p5 exchanged", p(n, 5), rhs_second.clone(), &candidates);
    let both: Vec<LinearForm> = rhs_first.into_iter().chain(rhs_second).collect();
    push("entangled p4 + p5", p(n, 4) + p(n, 5), both, &[]);
    out
}

/// Apply output forms to a joint state: returns the state of the quadratures
/// `(xs[0].., ps[0]..)`, constants included in the means.
pub fn outputs_of(joint: &GaussianState, xs: &[LinearForm], ps: &[LinearForm]) -> Result<GaussianState> {
    if xs.len() != ps.len() {
        return Err(Error::Invalid("output forms need one x and one p per mode".into()));
    }
    let dim = 2 * joint.n_modes();
    let rows: Vec<&LinearForm> = xs.iter().chain(ps).collect();
    if let Some(bad) = rows.iter().find(|f| f.coefficients.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: bad.coefficients.len() });
    }
    let m = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i].coefficients[j]);
    let shift = DVector::from_iterator(rows.len(), rows.iter().map(|f| f.constant));
    joint.transformed(&m)?.displaced(&shift)
}

/// Corrected receiver quadratures `(x3c, p3c)` of single-particle teleportation
/// on the joint state of particles 1, 2, 3.
pub fn single_corrected_forms() -> (LinearForm, LinearForm) {
    let n = 3;
    let xq = relative_position(n, 1, 2);
    let pp = total_momentum(n, 1, 2);
    (x(n, 3) + SQRT_2 * xq, p(n, 3) + SQRT_2 * pp)
}

/// Output of single-particle teleportation with ideal Bell measurement and feed-forward.
pub fn single_output(input: &GaussianState, resource: &GaussianState) -> Result<GaussianState> {
    check_modes(input, 1)?;
    check_modes(resource, 2)?;
    let joint = input.tensor(resource);
    let (xc, pc) = single_corrected_forms();
    outputs_of(&joint, &[xc], &[pc])
}

/// Fidelity of single-particle teleportation of `input` through an EPR pair of squeezing `r`.
pub fn single_fidelity(input: &GaussianState, r: f64) -> Result<f64> {
    single_output(input, &epr_state(r))?.fidelity_with_pure(input)
}

/// Corrected quadratures `[(x4c, p4c), (x5c, p5c)]` of entanglement teleportation
/// on the joint state of particles 1..5. Relative offset `q` is known to the receivers.
pub fn entangled_corrected_forms(q: f64, assignment: ReceiverAssignment) -> [(LinearForm, LinearForm); 2] {
    let n = 5;
    let yq = relative_position(n, 2, 3);
    let pi = total_momentum(n, 2, 3);
    let (bell, mom) = assignment.receivers();
    let (bell, mom) = (bell as usize, mom as usize);
    let bell_x = (x(n, bell) + SQRT_2 * yq.clone()).plus_constant(q);
    let bell_p = p(n, bell) + SQRT_2 * pi;
    let mom_x = x(n, mom) + SQRT_2 * yq;
    let mom_p = p(n, mom) + p(n, 1);
    if bell == 4 {
        [(bell_x, bell_p), (mom_x, mom_p)]
    } else {
        [(mom_x, mom_p), (bell_x, bell_p)]
    }
}

/// State of the corrected particles 4 and 5.
pub fn entangled_output(
    input: &GaussianState,
    resource: &GaussianState,
    q: f64,
    assignment: ReceiverAssignment,
) -> Result<GaussianState> {
    check_modes(input, 2)?;
    check_modes(resource, 3)?;
    let joint = input.tensor(resource);
    let [(x4, p4), (x5, p5)] = entangled_corrected_forms(q, assignment);
    outputs_of(&joint, &[x4, x5], &[p4, p5])
}

/// Second-moment summary of the entangled protocol output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutputCorrelations {
    /// `Var(x4 - x5)` of the corrected output.
    pub relative_position_variance: f64,
    /// Mean of `x4 - x5`.
    pub relative_position_mean: f64,
    /// `Var((p4 + p5) - (p1 + p2))`: noise added to the total momentum.
    pub total_momentum_excess: f64,
}

/// Output correlations for an input with sharp `x1 - x2 = q` and a GHZ resource of squeezing `r`.
pub fn entangled_correlations(input: &GaussianState, r: f64, q: f64, assignment: ReceiverAssignment) -> Result<OutputCorrelations> {
    check_modes(input, 2)?;
    let joint = input.tensor(&ghz_state(r));
    let n = 5;
    let [(x4, p4), (x5, p5)] = entangled_corrected_forms(q, assignment);
    let rel = x4 - x5;
    let excess = p4 + p5 - p(n, 1) - p(n, 2);
    Ok(OutputCorrelations {
        relative_position_variance: joint.variance(&rel)?,
        relative_position_mean: joint.expectation(&rel)?,
        total_momentum_excess: joint.variance(&excess)?,
    })
}

fn check_modes(s: &GaussianState, n: usize) -> Result<()> {
    if s.n_modes() != n {
        return Err(Error::DimensionMismatch { expected: 2 * n, got: 2 * s.n_modes() });
    }
    Ok(())
}
