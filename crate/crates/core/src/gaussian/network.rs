//! Squeezers, beamsplitters and the resource-preparation networks built from them.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::state::GaussianState;
use crate::error::{Error, Result};

/// Single-mode squeezer `a = a0 cosh r + a0^dag sinh r`.
///
/// `x -> e^{r} x`, `p -> e^{-r} p`: positive `r` squeezes momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeParam {
    pub r: f64,
    pub mode: usize,
}

/// Lossless beamsplitter with matrix `[[cos t, sin t], [sin t, -cos t]]`
/// acting on the ordered mode pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamsplitterSpec {
    pub theta: f64,
    pub modes: (usize, usize),
}

impl BeamsplitterSpec {
    pub fn balanced(a: usize, b: usize) -> Self {
        Self { theta: FRAC_PI_4, modes: (a, b) }
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        // sin t as cos(pi/2 - t) keeps the balanced splitter exactly symmetric
        let (c, s) = (self.theta.cos(), (FRAC_PI_2 - self.theta).cos());
        [[c, s], [s, -c]]
    }
}

/// First splitter of the three-mode network. Its cosine is `1/sqrt(3)`, so the
/// first output carries `b_a / sqrt(3) + sqrt(2/3) b_b`.
pub fn ghz_first_splitter_angle() -> f64 {
    (1.0f64 / 3.0).sqrt().acos()
}

pub fn squeeze(s: &GaussianState, param: SqueezeParam) -> Result<GaussianState> {
    s.check_mode(param.mode)?;
    let n = s.n_modes();
    let mut m = DMatrix::identity(2 * n, 2 * n);
    m[(param.mode, param.mode)] = param.r.exp();
    m[(n + param.mode, n + param.mode)] = (-param.r).exp();
    s.transformed(&m)
}

pub fn beamsplit(s: &GaussianState, bs: BeamsplitterSpec) -> Result<GaussianState> {
    let (a, b) = bs.modes;
    s.check_mode(a)?;
    s.check_mode(b)?;
    if a == b {
        return Err(Error::SameModes(a, b));
    }
    s.transformed(&beamsplitter_matrix(s.n_modes(), bs))
}

/// Phase-space matrix of a beamsplitter: the same 2x2 block on x and on p.
pub fn beamsplitter_matrix(n_modes: usize, bs: BeamsplitterSpec) -> DMatrix<f64> {
    let (a, b) = bs.modes;
    let t = bs.matrix();
    let mut m = DMatrix::identity(2 * n_modes, 2 * n_modes);
    for off in [0, n_modes] {
        m[(off + a, off + a)] = t[0][0];
        m[(off + a, off + b)] = t[0][1];
        m[(off + b, off + a)] = t[1][0];
        m[(off + b, off + b)] = t[1][1];
    }
    m
}

/// Two splitters: `cos t = 1/sqrt(3)` on `(a, b)`, then a balanced splitter on `(b, c)`.
pub fn ghz_network(s: &GaussianState, modes: (usize, usize, usize)) -> Result<GaussianState> {
    let (a, b, c) = modes;
    if a == b || b == c || a == c {
        return Err(Error::Invalid(format!("network modes must be distinct, got {modes:?}")));
    }
    let first = beamsplit(s, BeamsplitterSpec { theta: ghz_first_splitter_angle(), modes: (a, b) })?;
    beamsplit(&first, BeamsplitterSpec::balanced(b, c))
}

/// Mix two squeezed vacua on a balanced splitter.
///
/// `r_first > 0` (momentum-squeezed) together with `r_second < 0`
/// (position-squeezed) gives squeezed `x_first - x_second` and `p_first + p_second`.
pub fn epr_pair(r_first: f64, r_second: f64) -> GaussianState {
    let v = GaussianState::vacuum(2);
    let v = squeeze(&v, SqueezeParam { r: r_first, mode: 0 }).expect("mode 0 exists");
    let v = squeeze(&v, SqueezeParam { r: r_second, mode: 1 }).expect("mode 1 exists");
    beamsplit(&v, BeamsplitterSpec::balanced(0, 1)).expect("distinct modes")
}

/// EPR pair with squeezing magnitude `r` on both inputs.
pub fn epr_state(r: f64) -> GaussianState {
    epr_pair(r, -r)
}

/// Three-mode GHZ resource: momentum-squeezed first input, position-squeezed
/// second and third inputs, all with magnitude `r`.
pub fn ghz_state(r: f64) -> GaussianState {
    let mut v = GaussianState::vacuum(3);
    for (mode, sign) in [(0, 1.0), (1, -1.0), (2, -1.0)] {
        v = squeeze(&v, SqueezeParam { r: sign * r, mode }).expect("mode exists");
    }
    ghz_network(&v, (0, 1, 2)).expect("distinct modes")
}
