//! Measurement bases on the lattice: two-particle Bell states, the collective
//! three-particle basis and the momentum-times-Bell basis.
//!
//! Outcome lattices: offsets on the position lattice, momenta on the momentum
//! lattice. Each family has exactly `n^k` labels for `k` measured particles,
//! so it is a complete orthonormal basis of the lattice space.

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::{Grid, LatticeFft};
use crate::wavefunction::{particles, Particle, Representation, WaveFunction};

/// Total momentum `P` and relative position `Q` of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellLabel {
    pub momentum: f64,
    pub offset: f64,
}

/// Outcome of the momentum-times-Bell measurement: momentum `p` of the first
/// particle, total momentum `P` and relative position `Q` of the other two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleLabel {
    pub p: f64,
    #[serde(rename = "P")]
    pub momentum: f64,
    #[serde(rename = "Q")]
    pub offset: f64,
}

/// Label of the collective basis `sum_x e^{3iPx} |x>|x - Q>|x - R>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectiveLabel {
    #[serde(rename = "P")]
    pub momentum: f64,
    #[serde(rename = "Q")]
    pub offset: f64,
    #[serde(rename = "R")]
    pub second_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisFamily {
    Bell,
    /// Collective three-particle basis.
    Triple,
    /// Momentum eigenstate times Bell pair.
    Pi123,
}

impl BasisFamily {
    pub const ALL: [BasisFamily; 3] = [Self::Bell, Self::Triple, Self::Pi123];

    pub fn arity(self) -> usize {
        match self {
            Self::Bell => 2,
            Self::Triple | Self::Pi123 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Bell => "bell",
            Self::Triple => "triple",
            Self::Pi123 => "pi123",
        }
    }
}

/// A label of any family, held as lattice indices.
///
/// Bell: `[k, iq]`; triple: `[k, iq, ir]`; pi123: `[kp, k, iq]`. Momentum
/// indices address `grid.momentum`, offset indices address `grid.position`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelIndex {
    pub family: BasisFamily,
    pub indices: Vec<usize>,
}

impl LabelIndex {
    pub fn bell(&self, grid: &Grid) -> BellLabel {
        BellLabel { momentum: grid.momentum(self.indices[0]), offset: grid.position(self.indices[1]) }
    }

    pub fn triple(&self, grid: &Grid) -> TripleLabel {
        TripleLabel {
            p: grid.momentum(self.indices[0]),
            momentum: grid.momentum(self.indices[1]),
            offset: grid.position(self.indices[2]),
        }
    }

    pub fn collective(&self, grid: &Grid) -> CollectiveLabel {
        CollectiveLabel {
            momentum: collective_momentum(grid, self.indices[0]),
            offset: grid.position(self.indices[1]),
            second_offset: grid.position(self.indices[2]),
        }
    }

    pub fn state(&self, grid: &Grid) -> Result<WaveFunction> {
        match self.family {
            BasisFamily::Bell => bell_state(&self.bell(grid), grid),
            BasisFamily::Triple => triple_basis_state(&self.collective(grid), grid),
            BasisFamily::Pi123 => pi123_state(&self.triple(grid), grid),
        }
    }
}

/// Physical `P` of the collective basis at momentum index `k`: `e^{3iPx} = e^{2i p_k x}`.
pub fn collective_momentum(grid: &Grid, k: usize) -> f64 {
    2.0 * grid.momentum(k) / 3.0
}

fn offset_sites(grid: &Grid, q: f64, what: &'static str) -> Result<i64> {
    grid.lattice_shift(q, what)
}

/// Bell state `e^{2iPx_1} delta(x_2 = x_1 - Q)` on particles 1, 2.
pub fn bell_state(label: &BellLabel, grid: &Grid) -> Result<WaveFunction> {
    grid.momentum_index(label.momentum, "P")?;
    let m = offset_sites(grid, label.offset, "Q")?;
    let n = grid.n_points();
    let mut amps = ArrayD::zeros(IxDyn(&[n, n]));
    for j in 0..n {
        amps[[j, grid.wrap(j as i64 - m)]] = Complex64::from_polar(1.0, 2.0 * label.momentum * grid.position(j));
    }
    WaveFunction::from_amplitudes(*grid, &particles(&[1, 2]), amps)
}

/// Collective state `e^{3iPx_1} delta(x_2 = x_1 - Q) delta(x_3 = x_1 - R)` on particles 1, 2, 3.
pub fn triple_basis_state(label: &CollectiveLabel, grid: &Grid) -> Result<WaveFunction> {
    grid.momentum_index(1.5 * label.momentum, "P")?;
    let mq = offset_sites(grid, label.offset, "Q")?;
    let mr = offset_sites(grid, label.second_offset, "R")?;
    let n = grid.n_points();
    let mut amps = ArrayD::zeros(IxDyn(&[n, n, n]));
    for j in 0..n {
        let x = grid.position(j);
        amps[[j, grid.wrap(j as i64 - mq), grid.wrap(j as i64 - mr)]] = Complex64::from_polar(1.0, 3.0 * label.momentum * x);
    }
    WaveFunction::from_amplitudes(*grid, &particles(&[1, 2, 3]), amps)
}

/// `|p>_1 (x) |Psi(P, Q)>_23`.
pub fn pi123_state(label: &TripleLabel, grid: &Grid) -> Result<WaveFunction> {
    let first = crate::wavefunction::momentum_eigenstate(*grid, Particle(1), label.p)?;
    let pair = bell_state(&BellLabel { momentum: label.momentum, offset: label.offset }, grid)?
        .with_labels(&particles(&[2, 3]))?;
    first.tensor(&pair)
}

/// Coefficients of a state in a basis family over some of its particles.
///
/// `coefficients` has the label axes first (see [`LabelIndex`]) followed by
/// the unmeasured slots in their original order. Measured slots carry their
/// lattice weight, so `sum |c|^2 * spacing^rest_arity = 1` for unit states.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub family: BasisFamily,
    pub measured: Vec<Particle>,
    pub rest: Vec<Particle>,
    pub coefficients: ArrayD<Complex64>,
}

impl Analysis {
    pub fn label_count(&self) -> usize {
        self.coefficients.shape()[..self.family.arity()].iter().product()
    }

    /// Unnormalized state of the unmeasured particles for one label.
    pub fn conditional(&self, grid: &Grid, label: &[usize]) -> Result<WaveFunction> {
        if self.rest.is_empty() {
            return Err(Error::Invalid("no unmeasured particles".into()));
        }
        let mut view = self.coefficients.view();
        for &i in label {
            view = view.index_axis_move(ndarray::Axis(0), i);
        }
        WaveFunction::from_raw(*grid, self.rest.clone(), vec![Representation::Position; self.rest.len()], view.to_owned())
    }
}

/// Basis coefficients over `measured` (in the family's particle order).
pub fn analyze(family: BasisFamily, w: &WaveFunction, measured: &[Particle], exec: Execution) -> Result<Analysis> {
    if measured.len() != family.arity() {
        return Err(Error::Invalid(format!("{} basis measures {} particles, got {}", family.name(), family.arity(), measured.len())));
    }
    let grid = *w.grid();
    let n = grid.n_points();
    let d = grid.spacing();
    let mut slots = Vec::new();
    for &p in measured {
        let s = w.slot_of(p)?;
        if w.representation(s) != Representation::Position {
            return Err(Error::RepresentationMismatch(s));
        }
        if slots.contains(&s) {
            return Err(Error::Invalid(format!("particle {p} measured twice")));
        }
        slots.push(s);
    }
    let rest_slots: Vec<usize> = (0..w.arity()).filter(|s| !slots.contains(s)).collect();
    let order: Vec<usize> = slots.iter().chain(&rest_slots).copied().collect();
    let permuted = w.amplitudes().view().permuted_axes(IxDyn(&order));
    let data: Vec<Complex64> = permuted.iter().copied().collect();
    let r: usize = n.pow(rest_slots.len() as u32);
    let k = family.arity();
    let at = |idx: &[usize], rr: usize| -> Complex64 {
        let mut flat = 0;
        for &i in idx {
            flat = flat * n + i;
        }
        data[flat * r + rr]
    };
    let fft = LatticeFft::new(n);

    // blocks indexed by the offset (Bell) or offset pair (others), each holding [k][rest]
    let out: Vec<Complex64> = match family {
        BasisFamily::Bell => {
            let blocks = exec.map(n, |iq| {
                let m = iq as i64 - grid.origin_index() as i64;
                let mut block = vec![Complex64::new(0.0, 0.0); n * r];
                let mut lane = vec![Complex64::new(0.0, 0.0); n];
                for rr in 0..r {
                    for (j, v) in lane.iter_mut().enumerate() {
                        *v = at(&[j, grid.wrap(j as i64 - m)], rr);
                    }
                    fft.forward(&mut lane);
                    for (kk, v) in lane.iter().enumerate() {
                        block[kk * r + rr] = v * d;
                    }
                }
                block
            });
            interleave(&blocks, n, r, n)
        }
        BasisFamily::Triple => {
            let scale = d.powf(1.5);
            let blocks = exec.map(n * n, |pair| {
                let (iq, ir) = (pair / n, pair % n);
                let mq = iq as i64 - grid.origin_index() as i64;
                let mr = ir as i64 - grid.origin_index() as i64;
                let mut block = vec![Complex64::new(0.0, 0.0); n * r];
                let mut lane = vec![Complex64::new(0.0, 0.0); n];
                for rr in 0..r {
                    for (j, v) in lane.iter_mut().enumerate() {
                        *v = at(&[j, grid.wrap(j as i64 - mq), grid.wrap(j as i64 - mr)], rr);
                    }
                    fft.forward(&mut lane);
                    for (kk, v) in lane.iter().enumerate() {
                        block[kk * r + rr] = v * scale;
                    }
                }
                block
            });
            interleave(&blocks, n, r, n * n)
        }
        BasisFamily::Pi123 => {
            // momentum of the first particle, then Bell analysis on the pair
            let scale = d * d.sqrt();
            let blocks = exec.map(n, |iq| {
                let m = iq as i64 - grid.origin_index() as i64;
                // block layout [kp][k][rest]
                let mut block = vec![Complex64::new(0.0, 0.0); n * n * r];
                let mut inner = vec![Complex64::new(0.0, 0.0); n * n];
                let mut lane = vec![Complex64::new(0.0, 0.0); n];
                for rr in 0..r {
                    // inner[j1][kk]: Bell transform over the pair for each first-particle site
                    for j1 in 0..n {
                        for (j, v) in lane.iter_mut().enumerate() {
                            *v = at(&[j1, j, grid.wrap(j as i64 - m)], rr);
                        }
                        fft.forward(&mut lane);
                        inner[j1 * n..(j1 + 1) * n].copy_from_slice(&lane);
                    }
                    for kk in 0..n {
                        for (j1, v) in lane.iter_mut().enumerate() {
                            *v = inner[j1 * n + kk];
                        }
                        fft.forward(&mut lane);
                        for (kp, v) in lane.iter().enumerate() {
                            block[(kp * n + kk) * r + rr] = v * scale;
                        }
                    }
                }
                block
            });
            interleave(&blocks, n * n, r, n)
        }
    };
    let mut shape = vec![n; k];
    shape.extend(std::iter::repeat_n(n, rest_slots.len()));
    let coefficients = ArrayD::from_shape_vec(IxDyn(&shape), out).map_err(|_| Error::Mismatch)?;
    Ok(Analysis {
        family,
        measured: measured.to_vec(),
        rest: rest_slots.iter().map(|&s| w.labels()[s]).collect(),
        coefficients,
    })
}

/// Reorder per-offset blocks of layout `[lead][rest]` into `[lead][offset][rest]`.
fn interleave(blocks: &[Vec<Complex64>], lead: usize, r: usize, offsets: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); lead * offsets * r];
    for (o, block) in blocks.iter().enumerate() {
        for l in 0..lead {
            let dst = (l * offsets + o) * r;
            out[dst..dst + r].copy_from_slice(&block[l * r..(l + 1) * r]);
        }
    }
    out
}

/// Rebuild a fully measured state from its coefficients (inverse of [`analyze`]).
pub fn synthesize(family: BasisFamily, grid: &Grid, coefficients: &ArrayD<Complex64>, labels: &[Particle]) -> Result<WaveFunction> {
    let n = grid.n_points();
    let k = family.arity();
    if coefficients.shape() != vec![n; k].as_slice() || labels.len() != k {
        return Err(Error::Mismatch);
    }
    let d = grid.spacing();
    let fft = LatticeFft::new(n);
    let c = coefficients.as_standard_layout();
    let c = c.as_slice().expect("standard layout");
    let mut amps = ArrayD::zeros(IxDyn(&vec![n; k]));
    let mut lane = vec![Complex64::new(0.0, 0.0); n];
    let origin = grid.origin_index() as i64;
    match family {
        BasisFamily::Bell => {
            for iq in 0..n {
                let m = iq as i64 - origin;
                for (kk, v) in lane.iter_mut().enumerate() {
                    *v = c[kk * n + iq] / d;
                }
                fft.inverse(&mut lane);
                for (j, v) in lane.iter().enumerate() {
                    amps[[j, grid.wrap(j as i64 - m)]] = *v;
                }
            }
        }
        BasisFamily::Triple => {
            let scale = d.powf(1.5);
            for iq in 0..n {
                for ir in 0..n {
                    let (mq, mr) = (iq as i64 - origin, ir as i64 - origin);
                    for (kk, v) in lane.iter_mut().enumerate() {
                        *v = c[(kk * n + iq) * n + ir] / scale;
                    }
                    fft.inverse(&mut lane);
                    for (j, v) in lane.iter().enumerate() {
                        amps[[j, grid.wrap(j as i64 - mq), grid.wrap(j as i64 - mr)]] = *v;
                    }
                }
            }
        }
        BasisFamily::Pi123 => {
            let scale = d * d.sqrt();
            let mut inner = vec![Complex64::new(0.0, 0.0); n * n];
            for iq in 0..n {
                let m = iq as i64 - origin;
                for kk in 0..n {
                    for (kp, v) in lane.iter_mut().enumerate() {
                        *v = c[(kp * n + kk) * n + iq] / scale;
                    }
                    fft.inverse(&mut lane);
                    for (j1, v) in lane.iter().enumerate() {
                        inner[j1 * n + kk] = *v;
                    }
                }
                for j1 in 0..n {
                    lane.copy_from_slice(&inner[j1 * n..(j1 + 1) * n]);
                    fft.inverse(&mut lane);
                    for (j, v) in lane.iter().enumerate() {
                        amps[[j1, j, grid.wrap(j as i64 - m)]] = *v;
                    }
                }
            }
        }
    }
    WaveFunction::from_raw(*grid, labels.to_vec(), vec![Representation::Position; k], amps)
}

/// Gram and completeness deviations of one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisCheck {
    pub family: BasisFamily,
    /// `max |<a|b> - delta_ab|` over the sampled labels.
    pub gram_deviation: f64,
    /// `max |psi - sum_l |l><l|psi>|` for a random state.
    pub completeness_deviation: f64,
    /// `|sum_l |<l|psi>|^2 - 1|`.
    pub probability_deviation: f64,
    pub labels_checked: usize,
}

impl BasisCheck {
    pub fn max_deviation(&self) -> f64 {
        self.gram_deviation.max(self.completeness_deviation).max(self.probability_deviation)
    }
}

/// Distinct random labels, always including a few adjacent pairs.
pub fn sample_labels(family: BasisFamily, grid: &Grid, count: usize, seed: u64) -> Vec<LabelIndex> {
    let n = grid.n_points();
    let k = family.arity();
    let total = n.pow(k as u32);
    let count = count.min(total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flats: Vec<usize> = sample(&mut rng, total, count).into_vec();
    // neighbours in the last index probe adjacent offsets
    if count >= 2 {
        let base = flats[0];
        let neighbour = base - base % n + (base % n + 1) % n;
        if !flats.contains(&neighbour) {
            flats[1] = neighbour;
        }
    }
    flats
        .into_iter()
        .map(|mut f| {
            let mut indices = vec![0; k];
            for slot in (0..k).rev() {
                indices[slot] = f % n;
                f /= n;
            }
            LabelIndex { family, indices }
        })
        .collect()
}

/// Random normalized position-space state of `labels`.
pub fn random_state(grid: &Grid, labels: &[Particle], seed: u64) -> Result<WaveFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = vec![grid.n_points(); labels.len()];
    let amps = ArrayD::from_shape_fn(IxDyn(&shape), |_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    WaveFunction::from_amplitudes(*grid, labels, amps)
}

/// Label states are lattice-sparse, so overlaps run over their supports.
pub fn gram_deviation(grid: &Grid, labels: &[LabelIndex]) -> Result<f64> {
    let mut weight = 1.0;
    let supports: Vec<Vec<(usize, Complex64)>> = labels
        .iter()
        .map(|l| {
            let w = l.state(grid)?;
            weight = w.weight();
            Ok(w.amplitudes().iter().enumerate().filter(|(_, a)| a.norm_sqr() > 0.0).map(|(i, a)| (i, *a)).collect())
        })
        .collect::<Result<_>>()?;
    let overlap = |a: &[(usize, Complex64)], b: &[(usize, Complex64)]| -> Complex64 {
        let (mut i, mut j) = (0, 0);
        let mut sum = Complex64::new(0.0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += a[i].1.conj() * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum * weight
    };
    let mut worst: f64 = 0.0;
    for (i, a) in supports.iter().enumerate() {
        for (j, b) in supports.iter().enumerate().skip(i) {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((overlap(a, b) - target).norm());
        }
    }
    Ok(worst)
}

/// Gram deviation on `gram_labels` sampled labels plus the completeness round trip.
pub fn check_family(family: BasisFamily, grid: &Grid, gram_labels: usize, seed: u64, exec: Execution) -> Result<BasisCheck> {
    let labels = sample_labels(family, grid, gram_labels, seed);
    let gram = gram_deviation(grid, &labels)?;
    let ids: Vec<u8> = (1..=family.arity() as u8).collect();
    let parts = particles(&ids);
    let psi = random_state(grid, &parts, seed ^ 0x5eed)?;
    let analysis = analyze(family, &psi, &parts, exec)?;
    let total: f64 = analysis.coefficients.iter().map(|c| c.norm_sqr()).sum();
    let rebuilt = synthesize(family, grid, &analysis.coefficients, &parts)?;
    // compare in units of the typical amplitude so the tolerance is scale free
    let typical = (1.0 / psi.weight() / psi.amplitudes().len() as f64).sqrt();
    let completeness = psi
        .amplitudes()
        .iter()
        .zip(rebuilt.amplitudes())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
        / typical;
    Ok(BasisCheck {
        family,
        gram_deviation: gram,
        completeness_deviation: completeness,
        probability_deviation: (total - 1.0).abs(),
        labels_checked: labels.len(),
    })
}
