//! Exact pure states of a few photons, each photon occupying one
//! (polarization, time-bin) mode.
//!
//! A state of `n` photons is stored densely: `6^n` complex amplitudes, photon
//! slot 0 being the most significant digit of the base-6 index. Four photons
//! (1296 amplitudes) is the largest state the repeater ever builds.

use std::fmt;

use nalgebra::{Matrix2, SMatrix};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of time bins tracked per photon.
pub const BINS: usize = 3;
/// Modes per photon: two polarizations times [`BINS`].
pub const MODES: usize = 2 * BINS;
/// Amplitudes below this magnitude are treated as absent.
pub const PRUNE_EPS: f64 = 1e-15;
/// Tolerance for normalization and unitarity checks.
pub const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub const ALL: [Polarization; 2] = [Polarization::H, Polarization::V];

    pub fn flip(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }
}

/// Arrival slot of a photon.
///
/// Before the decoder, 0 is the early (short path) bin and 1 the late one.
/// After it, 0 is "too early", 1 "intermediate" and 2 "too late".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct TimeBin(u8);

impl TimeBin {
    pub const ZERO: TimeBin = TimeBin(0);
    pub const ONE: TimeBin = TimeBin(1);
    pub const TWO: TimeBin = TimeBin(2);
    pub const ALL: [TimeBin; BINS] = [TimeBin::ZERO, TimeBin::ONE, TimeBin::TWO];

    pub fn new(index: usize) -> Result<Self> {
        if index < BINS {
            Ok(TimeBin(index as u8))
        } else {
            Err(Error::InvalidTimeBin(index))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// The next bin, wrapping from the last back to the first.
    pub fn shifted(self) -> Self {
        TimeBin(((self.0 as usize + 1) % BINS) as u8)
    }
}

impl TryFrom<usize> for TimeBin {
    type Error = Error;

    fn try_from(value: usize) -> Result<Self> {
        TimeBin::new(value)
    }
}

impl From<TimeBin> for usize {
    fn from(bin: TimeBin) -> usize {
        bin.index()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeLabel {
    pub pol: Polarization,
    pub bin: TimeBin,
}

impl ModeLabel {
    pub const fn new(pol: Polarization, bin: TimeBin) -> Self {
        ModeLabel { pol, bin }
    }

    /// Position of this mode in the per-photon basis (`bin * 2 + pol`).
    pub fn index(self) -> usize {
        self.bin.index() * 2 + self.pol.index()
    }

    pub fn from_index(index: usize) -> Self {
        debug_assert!(index < MODES);
        let pol = if index.is_multiple_of(2) {
            Polarization::H
        } else {
            Polarization::V
        };
        ModeLabel {
            pol,
            bin: TimeBin((index / 2) as u8),
        }
    }

    pub fn all() -> impl Iterator<Item = ModeLabel> {
        (0..MODES).map(ModeLabel::from_index)
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}{}", self.pol, self.bin.index())
    }
}

/// Shorthand for building labels in tests and examples.
pub fn mode(pol: Polarization, bin: usize) -> ModeLabel {
    ModeLabel::new(pol, TimeBin::new(bin).expect("time bin index"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellState {
    pub const ALL: [BellState; 4] = [
        BellState::PhiPlus,
        BellState::PhiMinus,
        BellState::PsiPlus,
        BellState::PsiMinus,
    ];

    /// Coefficient of `|a⟩|b⟩` in this Bell state.
    pub fn coefficient(self, a: Polarization, b: Polarization) -> f64 {
        use Polarization::{H, V};
        let r = std::f64::consts::FRAC_1_SQRT_2;
        match (self, a, b) {
            (BellState::PhiPlus, H, H) | (BellState::PhiPlus, V, V) => r,
            (BellState::PhiMinus, H, H) => r,
            (BellState::PhiMinus, V, V) => -r,
            (BellState::PsiPlus, H, V) | (BellState::PsiPlus, V, H) => r,
            (BellState::PsiMinus, H, V) => r,
            (BellState::PsiMinus, V, H) => -r,
            _ => 0.0,
        }
    }
}

impl fmt::Display for BellState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BellState::PhiPlus => "phi+",
            BellState::PhiMinus => "phi-",
            BellState::PsiPlus => "psi+",
            BellState::PsiMinus => "psi-",
        };
        f.write_str(s)
    }
}

/// Linear map on one photon's six-dimensional mode space.
///
/// Columns are indexed by input mode, rows by output mode, both via
/// [`ModeLabel::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModeOperator {
    matrix: SMatrix<Complex64, MODES, MODES>,
    unitary: bool,
}

impl ModeOperator {
    pub fn new(matrix: SMatrix<Complex64, MODES, MODES>) -> Self {
        let unitary = is_unitary(&matrix);
        ModeOperator { matrix, unitary }
    }

    pub fn identity() -> Self {
        ModeOperator {
            matrix: SMatrix::identity(),
            unitary: true,
        }
    }

    /// Operator sending input mode `m` to output mode `image(m)`.
    pub fn from_mode_map(image: impl Fn(ModeLabel) -> ModeLabel) -> Self {
        let mut matrix = SMatrix::<Complex64, MODES, MODES>::zeros();
        for input in ModeLabel::all() {
            matrix[(image(input).index(), input.index())] = Complex64::new(1.0, 0.0);
        }
        ModeOperator::new(matrix)
    }

    /// Block-diagonal operator acting on polarization with one 2×2 block per bin.
    pub fn per_bin(blocks: [Matrix2<Complex64>; BINS]) -> Self {
        let mut matrix = SMatrix::<Complex64, MODES, MODES>::zeros();
        for (bin, block) in blocks.iter().enumerate() {
            matrix
                .fixed_view_mut::<2, 2>(2 * bin, 2 * bin)
                .copy_from(block);
        }
        ModeOperator::new(matrix)
    }

    /// The same polarization block in every bin.
    pub fn polarization(block: Matrix2<Complex64>) -> Self {
        ModeOperator::per_bin([block; BINS])
    }

    /// `next ∘ self`: apply `self` first.
    pub fn then(&self, next: &ModeOperator) -> ModeOperator {
        ModeOperator::new(next.matrix * self.matrix)
    }

    pub fn matrix(&self) -> &SMatrix<Complex64, MODES, MODES> {
        &self.matrix
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn entry(&self, output: ModeLabel, input: ModeLabel) -> Complex64 {
        self.matrix[(output.index(), input.index())]
    }
}

fn is_unitary(m: &SMatrix<Complex64, MODES, MODES>) -> bool {
    let product = m.adjoint() * m;
    let identity = SMatrix::<Complex64, MODES, MODES>::identity();
    (product - identity).iter().all(|z| z.norm() <= NORM_TOL)
}

/// Result of a post-selection or projective measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Renormalized surviving state; `None` when the outcome has probability
    /// zero or when no photons remain.
    pub state: Option<PureState>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n_photons: usize,
    amplitudes: Vec<Complex64>,
}

impl PureState {
    /// The all-zero vector on `n_photons` photons. Not normalized.
    pub fn zeros(n_photons: usize) -> Result<Self> {
        if n_photons == 0 {
            return Err(Error::NoPhotons);
        }
        Ok(PureState {
            n_photons,
            amplitudes: vec![Complex64::new(0.0, 0.0); MODES.pow(n_photons as u32)],
        })
    }

    /// Product state with one photon per label.
    pub fn basis(labels: &[ModeLabel]) -> Result<Self> {
        let mut state = PureState::zeros(labels.len())?;
        let idx = state.flat_index(labels)?;
        state.amplitudes[idx] = Complex64::new(1.0, 0.0);
        Ok(state)
    }

    /// Build a state from a sparse amplitude list. Repeated keys accumulate.
    /// The result is not normalized.
    pub fn from_terms<'a, I>(n_photons: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [ModeLabel], Complex64)>,
    {
        let mut state = PureState::zeros(n_photons)?;
        for (labels, amp) in terms {
            let idx = state.flat_index(labels)?;
            state.amplitudes[idx] += amp;
        }
        Ok(state)
    }

    /// `(|H,bin⟩|H,bin⟩ + |V,bin⟩|V,bin⟩)/√2`.
    pub fn bell_phi_plus(bin: TimeBin) -> Self {
        PureState::bell(BellState::PhiPlus, bin)
    }

    pub fn bell(which: BellState, bin: TimeBin) -> Self {
        let mut state = PureState::zeros(2).expect("two photons");
        for a in Polarization::ALL {
            for b in Polarization::ALL {
                let c = which.coefficient(a, b);
                if c != 0.0 {
                    let idx = ModeLabel::new(a, bin).index() * MODES + ModeLabel::new(b, bin).index();
                    state.amplitudes[idx] = Complex64::new(c, 0.0);
                }
            }
        }
        state
    }

    pub fn n_photons(&self) -> usize {
        self.n_photons
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, labels: &[ModeLabel]) -> Result<Complex64> {
        Ok(self.amplitudes[self.flat_index(labels)?])
    }

    /// Non-negligible amplitudes keyed by their per-photon mode assignment.
    pub fn terms(&self) -> impl Iterator<Item = (Vec<ModeLabel>, Complex64)> + '_ {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() >= PRUNE_EPS)
            .map(move |(idx, &a)| (self.labels_of(idx), a))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let norm = self.norm();
        if norm < PRUNE_EPS {
            return Err(Error::ZeroNorm);
        }
        let inv = 1.0 / norm;
        for a in &mut self.amplitudes {
            *a *= inv;
            if a.norm() < PRUNE_EPS {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        Ok(self)
    }

    /// Multiply every amplitude by `e^{iα}`.
    pub fn with_global_phase(mut self, alpha: f64) -> Self {
        let phase = Complex64::from_polar(1.0, alpha);
        for a in &mut self.amplitudes {
            *a *= phase;
        }
        self
    }

    /// Apply `op` to the modes of one photon.
    pub fn apply_single(&self, photon: usize, op: &ModeOperator) -> Result<PureState> {
        self.check_slot(photon)?;
        let stride = self.stride(photon);
        let block = MODES * stride;
        let m = op.matrix();
        let mut out = vec![Complex64::new(0.0, 0.0); self.amplitudes.len()];
        for base in (0..self.amplitudes.len()).step_by(block) {
            for inner in 0..stride {
                let offset = base + inner;
                let mut column = [Complex64::new(0.0, 0.0); MODES];
                for (k, c) in column.iter_mut().enumerate() {
                    *c = self.amplitudes[offset + k * stride];
                }
                if column.iter().all(|c| *c == Complex64::new(0.0, 0.0)) {
                    continue;
                }
                for row in 0..MODES {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (k, c) in column.iter().enumerate() {
                        acc += m[(row, k)] * c;
                    }
                    out[offset + row * stride] = acc;
                }
            }
        }
        Ok(PureState {
            n_photons: self.n_photons,
            amplitudes: out,
        })
    }

    /// Apply `op` to every photon.
    pub fn apply_all(&self, op: &ModeOperator) -> PureState {
        (0..self.n_photons).fold(self.clone(), |s, k| {
            s.apply_single(k, op).expect("slot in range")
        })
    }

    /// Joint state with `other`'s photons appended after ours.
    pub fn tensor(&self, other: &PureState) -> PureState {
        let mut amplitudes = Vec::with_capacity(self.amplitudes.len() * other.amplitudes.len());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        PureState {
            n_photons: self.n_photons + other.n_photons,
            amplitudes,
        }
    }

    /// Keep only assignments where every photon satisfies `keep(slot, mode)`.
    pub fn post_select<F>(&self, keep: F) -> Selection
    where
        F: Fn(usize, ModeLabel) -> bool,
    {
        let mut kept = PureState {
            n_photons: self.n_photons,
            amplitudes: vec![Complex64::new(0.0, 0.0); self.amplitudes.len()],
        };
        let mut probability = 0.0;
        for (idx, a) in self.amplitudes.iter().enumerate() {
            if a.norm() < PRUNE_EPS {
                continue;
            }
            let accepted = self
                .labels_of(idx)
                .iter()
                .enumerate()
                .all(|(slot, &label)| keep(slot, label));
            if accepted {
                kept.amplitudes[idx] = *a;
                probability += a.norm_sqr();
            }
        }
        if probability < PRUNE_EPS * PRUNE_EPS {
            return Selection {
                state: None,
                probability: 0.0,
            };
        }
        Selection {
            state: kept.normalized().ok(),
            probability,
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        if self.n_photons != other.n_photons {
            return Err(Error::PhotonCountMismatch {
                left: self.n_photons,
                right: other.n_photons,
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨a|b⟩|²`.
    pub fn fidelity(&self, other: &PureState) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Project photons `i` and `j` onto `which` (both photons in `bin`).
    ///
    /// The measured photons are removed; the remaining photons keep their
    /// relative order.
    pub fn project_bell(
        &self,
        i: usize,
        j: usize,
        which: BellState,
        bin: TimeBin,
    ) -> Result<Selection> {
        self.check_slot(i)?;
        self.check_slot(j)?;
        if i == j {
            return Err(Error::DuplicateSlot(i));
        }
        let rest: Vec<usize> = (0..self.n_photons).filter(|&k| k != i && k != j).collect();
        let rest_len = MODES.pow(rest.len() as u32);
        let mut remainder = vec![Complex64::new(0.0, 0.0); rest_len];
        for (idx, a) in self.amplitudes.iter().enumerate() {
            if a.norm() < PRUNE_EPS {
                continue;
            }
            let labels = self.labels_of(idx);
            let (li, lj) = (labels[i], labels[j]);
            if li.bin != bin || lj.bin != bin {
                continue;
            }
            let c = which.coefficient(li.pol, lj.pol);
            if c == 0.0 {
                continue;
            }
            let ridx = rest
                .iter()
                .fold(0, |acc, &k| acc * MODES + labels[k].index());
            remainder[ridx] += a * c;
        }
        let probability: f64 = remainder.iter().map(|a| a.norm_sqr()).sum();
        if rest.is_empty() || probability < PRUNE_EPS * PRUNE_EPS {
            return Ok(Selection {
                state: None,
                probability,
            });
        }
        let state = PureState {
            n_photons: rest.len(),
            amplitudes: remainder,
        };
        Ok(Selection {
            state: state.normalized().ok(),
            probability,
        })
    }

    fn check_slot(&self, slot: usize) -> Result<()> {
        if slot < self.n_photons {
            Ok(())
        } else {
            Err(Error::SlotOutOfRange {
                slot,
                n_photons: self.n_photons,
            })
        }
    }

    fn stride(&self, photon: usize) -> usize {
        MODES.pow((self.n_photons - 1 - photon) as u32)
    }

    fn flat_index(&self, labels: &[ModeLabel]) -> Result<usize> {
        if labels.len() != self.n_photons {
            return Err(Error::LabelCount {
                got: labels.len(),
                n_photons: self.n_photons,
            });
        }
        Ok(labels.iter().fold(0, |acc, l| acc * MODES + l.index()))
    }

    fn labels_of(&self, mut idx: usize) -> Vec<ModeLabel> {
        let mut labels = vec![ModeLabel::from_index(0); self.n_photons];
        for slot in (0..self.n_photons).rev() {
            labels[slot] = ModeLabel::from_index(idx % MODES);
            idx /= MODES;
        }
        labels
    }
}

impl fmt::Display for PureState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (labels, a) in self.terms() {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "({:.4}{:+.4}i)|", a.re, a.im)?;
            for (k, l) in labels.iter().enumerate() {
                if k > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{l}")?;
            }
            f.write_str("⟩")?;
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}
