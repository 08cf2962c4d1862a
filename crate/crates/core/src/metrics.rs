//! Fidelities, quadrature statistics and entanglement diagnostics on the lattice.
//!
//! Linear forms act on wavefunction slots: mode `i` of a form is slot `i`.

use nalgebra::DMatrix;
use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::LinearForm;
use crate::grid::{Grid, LatticeFft};
use crate::wavefunction::{Particle, Representation, WaveFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FidelityMethod {
    Overlap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityResult {
    pub value: f64,
    /// Argument of `<a|b>`.
    pub phase: f64,
    pub method: FidelityMethod,
}

/// Squared overlap of two pure states with the global phase quotiented out.
pub fn fidelity(a: &WaveFunction, b: &WaveFunction) -> Result<FidelityResult> {
    let ov = a.inner_product(b)?;
    let norms = a.norm_sqr() * b.norm_sqr();
    if norms <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(FidelityResult { value: (ov.norm_sqr() / norms).min(1.0), phase: ov.arg(), method: FidelityMethod::Overlap })
}

fn check_form(w: &WaveFunction, f: &LinearForm) -> Result<()> {
    if f.n_modes() != w.arity() || f.coefficients.len() != 2 * w.arity() {
        return Err(Error::DimensionMismatch { expected: 2 * w.arity(), got: f.coefficients.len() });
    }
    Ok(())
}

fn all_position(w: &WaveFunction) -> Result<WaveFunction> {
    w.labels().iter().try_fold(w.clone(), |acc, &l| acc.to_position(l))
}

/// Multiply every lane along `slot` elementwise by `values`.
fn scale_along(w: &mut WaveFunction, slot: usize, values: &[f64]) {
    w.for_each_lane(slot, |lane| {
        for (a, v) in lane.iter_mut().zip(values) {
            *a *= v;
        }
    });
}

/// `f |psi>` with momenta applied spectrally. Result is in the position representation.
pub fn apply_form(w: &WaveFunction, f: &LinearForm) -> Result<WaveFunction> {
    check_form(w, f)?;
    let base = all_position(w)?;
    let grid = *base.grid();
    let xs = grid.positions();
    let ps = grid.momenta();
    let fft = LatticeFft::new(grid.n_points());
    let mut acc: ArrayD<Complex64> = base.amplitudes().mapv(|a| a * f.constant);
    for slot in 0..w.arity() {
        let a = f.x_coefficients()[slot];
        if a != 0.0 {
            let mut t = base.clone();
            scale_along(&mut t, slot, &xs);
            acc.scaled_add(Complex64::new(a, 0.0), t.amplitudes());
        }
        let b = f.p_coefficients()[slot];
        if b != 0.0 {
            let mut t = base.clone();
            t.for_each_lane(slot, |lane| {
                fft.forward(lane);
                for (v, p) in lane.iter_mut().zip(&ps) {
                    *v *= p;
                }
                fft.inverse(lane);
            });
            acc.scaled_add(Complex64::new(b, 0.0), t.amplitudes());
        }
    }
    WaveFunction::from_raw(grid, base.labels().to_vec(), base.representations().to_vec(), acc)
}

/// `<f>` on a normalized state.
pub fn expectation(w: &WaveFunction, f: &LinearForm) -> Result<f64> {
    let base = all_position(w)?;
    Ok(base.inner_product(&apply_form(&base, f)?)?.re)
}

/// Symmetrized covariance `<(fg + gf)/2> - <f><g>`.
pub fn covariance_of(w: &WaveFunction, f: &LinearForm, g: &LinearForm) -> Result<f64> {
    let base = all_position(w)?;
    let fw = apply_form(&base, f)?;
    let gw = apply_form(&base, g)?;
    let ef = base.inner_product(&fw)?.re;
    let eg = base.inner_product(&gw)?.re;
    Ok(fw.inner_product(&gw)?.re - ef * eg)
}

/// Covariance matrix of all quadratures, ordered `x_1..x_n, p_1..p_n` by slot.
pub fn covariance_matrix(w: &WaveFunction) -> Result<DMatrix<f64>> {
    let n = w.arity();
    let base = all_position(w)?;
    let forms: Vec<LinearForm> = (0..n).map(|i| LinearForm::x(n, i)).chain((0..n).map(|i| LinearForm::p(n, i))).collect();
    let applied: Vec<WaveFunction> = forms.iter().map(|f| apply_form(&base, f)).collect::<Result<_>>()?;
    let means: Vec<f64> = applied.iter().map(|a| base.inner_product(a).map(|z| z.re)).collect::<Result<_>>()?;
    let mut cov = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..2 * n {
        for j in i..2 * n {
            let c = applied[i].inner_product(&applied[j])?.re - means[i] * means[j];
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }
    Ok(cov)
}

/// Period of a form whose nonzero coefficients share one magnitude and one
/// quadrature type; such forms are single-valued lattice observables.
fn lattice_period(grid: &Grid, f: &LinearForm) -> Option<(Representation, f64)> {
    let nonzero = |c: &[f64]| c.iter().copied().filter(|v| *v != 0.0).collect::<Vec<_>>();
    let xs = nonzero(f.x_coefficients());
    let ps = nonzero(f.p_coefficients());
    let (rep, coeffs, period) = match (xs.is_empty(), ps.is_empty()) {
        (false, true) => (Representation::Position, xs, grid.extent()),
        (true, false) => (Representation::Momentum, ps, grid.momentum_extent()),
        _ => return None,
    };
    let mag = coeffs[0].abs();
    if coeffs.iter().all(|c| (c.abs() - mag).abs() <= 1e-15 * mag) {
        Some((rep, mag * period))
    } else {
        None
    }
}

/// Mean and variance of a lattice observable from its folded distribution.
fn folded_moments(w: &WaveFunction, f: &LinearForm, rep: Representation, period: f64) -> Result<(f64, f64)> {
    let grid = *w.grid();
    let (coeffs, lattice) = match rep {
        Representation::Position => (f.x_coefficients().to_vec(), grid.positions()),
        Representation::Momentum => (f.p_coefficients().to_vec(), grid.momenta()),
    };
    let mut state = w.clone();
    for (slot, &label) in w.labels().iter().enumerate() {
        if coeffs[slot] != 0.0 {
            state = match rep {
                Representation::Position => state.to_position(label)?,
                Representation::Momentum => state.to_momentum(label)?,
            };
        }
    }
    let amps = state.amplitudes().as_standard_layout();
    let data = amps.as_slice().expect("standard layout");
    let n = grid.n_points();
    let arity = w.arity();
    let value_at = |flat: usize| {
        let mut rest = flat;
        let mut value = f.constant;
        for slot in (0..arity).rev() {
            let j = rest % n;
            rest /= n;
            if coeffs[slot] != 0.0 {
                value += coeffs[slot] * lattice[j];
            }
        }
        Grid::fold(value, period)
    };
    // two passes keep sharp distributions with large means exact
    let (mut s0, mut s1) = (0.0, 0.0);
    for (flat, a) in data.iter().enumerate() {
        let prob = a.norm_sqr();
        if prob != 0.0 {
            s0 += prob;
            s1 += prob * value_at(flat);
        }
    }
    let mean = s1 / s0;
    let mut s2 = 0.0;
    for (flat, a) in data.iter().enumerate() {
        let prob = a.norm_sqr();
        if prob != 0.0 {
            s2 += prob * (value_at(flat) - mean).powi(2);
        }
    }
    Ok((mean, s2 / s0))
}

/// Variance of a linear form. Single-type forms with equal coefficient
/// magnitudes are folded into their lattice period; others use the spectral
/// operator expectation.
pub fn quadrature_variance(w: &WaveFunction, f: &LinearForm) -> Result<f64> {
    check_form(w, f)?;
    if let Some((rep, period)) = lattice_period(w.grid(), f) {
        return Ok(folded_moments(w, f, rep, period)?.1);
    }
    let base = all_position(w)?;
    let fw = apply_form(&base, f)?;
    let mean = base.inner_product(&fw)?.re;
    Ok((fw.norm_sqr() - mean * mean).max(0.0))
}

/// Mean of a linear form, folded like [`quadrature_variance`].
pub fn quadrature_mean(w: &WaveFunction, f: &LinearForm) -> Result<f64> {
    check_form(w, f)?;
    if let Some((rep, period)) = lattice_period(w.grid(), f) {
        return Ok(folded_moments(w, f, rep, period)?.0);
    }
    expectation(w, f)
}

/// Schmidt coefficients (squared, descending) across the cut `part | rest`.
pub fn schmidt_spectrum(w: &WaveFunction, part: &[Particle]) -> Result<Vec<f64>> {
    let arity = w.arity();
    let mut cut_slots = Vec::new();
    for &p in part {
        let s = w.slot_of(p)?;
        if !cut_slots.contains(&s) {
            cut_slots.push(s);
        }
    }
    if cut_slots.is_empty() || cut_slots.len() == arity {
        return Ok(vec![1.0]);
    }
    let order: Vec<usize> = cut_slots.iter().copied().chain((0..arity).filter(|s| !cut_slots.contains(s))).collect();
    let n = w.grid().n_points();
    let rows = n.pow(cut_slots.len() as u32);
    let cols = n.pow((arity - cut_slots.len()) as u32);
    let permuted = w.amplitudes().view().permuted_axes(IxDyn(&order));
    let flat: Vec<Complex64> = permuted.iter().copied().collect();
    let m = DMatrix::from_row_slice(rows, cols, &flat);
    let mut lambdas: Vec<f64> = m.svd(false, false).singular_values.iter().map(|v| v * v).collect();
    let total: f64 = lambdas.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    lambdas.iter_mut().for_each(|l| *l /= total);
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok(lambdas)
}

/// Entanglement entropy (natural log) across the cut `part | rest`.
pub fn schmidt_entropy(w: &WaveFunction, part: &[Particle]) -> Result<f64> {
    Ok(schmidt_spectrum(w, part)?.iter().filter(|&&l| l > 0.0).map(|l| -l * l.ln()).sum())
}

/// Mean and standard error of a sample.
pub fn mean_and_std_error(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub parameter: String,
    pub values: Vec<f64>,
    pub means: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_samples: usize,
}

impl SweepSummary {
    /// One sample set per parameter value.
    pub fn from_samples(parameter: &str, values: &[f64], samples: &[Vec<f64>]) -> Result<Self> {
        if values.len() != samples.len() {
            return Err(Error::Invalid("sweep values and sample sets differ in length".into()));
        }
        let (means, std_errors) = samples.iter().map(|s| mean_and_std_error(s)).unzip();
        Ok(Self {
            parameter: parameter.to_string(),
            values: values.to_vec(),
            means,
            std_errors,
            n_samples: samples.iter().map(Vec::len).max().unwrap_or(0),
        })
    }

    pub fn strictly_increasing(&self) -> bool {
        self.means.windows(2).all(|w| w[1] > w[0])
    }
}
