//! Exact sparse Fock-space simulation.
//!
//! States are finite superpositions of occupation-number basis vectors
//! `|T_1, ..., T_M>` stored in a `BTreeMap`, so iteration and serialization
//! are in canonical order. Linear-optical evolution rewrites every creation
//! operator as `a†_i -> Σ_j U_ji a†_j` and re-expands the product; detection
//! is destructive and removes the measured mode.
//!
//! Amplitudes with magnitude below [`PRUNE_THRESHOLD`] are dropped after every
//! operation.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};

/// Amplitudes smaller than this (in magnitude) are treated as zero.
pub const PRUNE_THRESHOLD: f64 = 1e-12;

/// Tolerance used when checking `U†U = 1`.
pub const UNITARITY_TOLERANCE: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Photon counts per mode.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OccupationVector(Vec<u8>);

impl OccupationVector {
    pub fn new(counts: Vec<u8>) -> Self {
        Self(counts)
    }

    pub fn vacuum(num_modes: usize) -> Self {
        Self(vec![0; num_modes])
    }

    pub fn counts(&self) -> &[u8] {
        &self.0
    }

    pub fn num_modes(&self) -> usize {
        self.0.len()
    }

    pub fn photons(&self) -> u32 {
        self.0.iter().map(|&c| c as u32).sum()
    }

    /// `Π_j T_j!`
    fn factorial_product(&self) -> f64 {
        self.0.iter().map(|&c| factorial(c)).product()
    }
}

impl fmt::Display for OccupationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (k, c) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ">")
    }
}

fn factorial(k: u8) -> f64 {
    (1..=k as u32).map(f64::from).product()
}

/// Pure state of `num_modes` bosonic modes, possibly subnormalized after a
/// projection (its squared norm is then the outcome probability).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockState {
    num_modes: usize,
    amplitudes: BTreeMap<OccupationVector, Complex64>,
}

impl FockState {
    /// The zero vector (probability-zero outcome).
    pub fn zero(num_modes: usize) -> Self {
        Self {
            num_modes,
            amplitudes: BTreeMap::new(),
        }
    }

    pub fn vacuum(num_modes: usize) -> Self {
        Self::basis(vec![0; num_modes])
    }

    pub fn basis(counts: Vec<u8>) -> Self {
        let num_modes = counts.len();
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert(OccupationVector(counts), ONE);
        Self {
            num_modes,
            amplitudes,
        }
    }

    /// Builds a state from `(occupation, amplitude)` terms. Repeated
    /// occupations are summed.
    pub fn from_terms<I>(num_modes: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u8>, Complex64)>,
    {
        let mut state = Self::zero(num_modes);
        for (counts, amp) in terms {
            if counts.len() != num_modes {
                return Err(Error::DimensionMismatch {
                    expected: num_modes,
                    got: counts.len(),
                });
            }
            state.accumulate(OccupationVector(counts), amp);
        }
        state.prune();
        Ok(state)
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&OccupationVector, &Complex64)> {
        self.amplitudes.iter()
    }

    pub fn amplitude(&self, counts: &[u8]) -> Complex64 {
        self.amplitudes
            .get(&OccupationVector(counts.to_vec()))
            .copied()
            .unwrap_or(ZERO)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    /// Distinct total photon numbers present in the superposition.
    pub fn photon_numbers(&self) -> Vec<u32> {
        let mut n: Vec<u32> = self.amplitudes.keys().map(|k| k.photons()).collect();
        n.sort_unstable();
        n.dedup();
        n
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm_sqr().sqrt();
        if norm < PRUNE_THRESHOLD {
            return Err(Error::ZeroNorm);
        }
        Ok(self.scaled(Complex64::new(1.0 / norm, 0.0)))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        for a in out.amplitudes.values_mut() {
            *a *= factor;
        }
        out.prune();
        out
    }

    /// `self + other` (no renormalization).
    pub fn add(&self, other: &FockState) -> Result<Self> {
        self.check_modes(other.num_modes)?;
        let mut out = self.clone();
        for (k, a) in &other.amplitudes {
            out.accumulate(k.clone(), *a);
        }
        out.prune();
        Ok(out)
    }

    /// `<self|other>`
    pub fn inner(&self, other: &FockState) -> Result<Complex64> {
        self.check_modes(other.num_modes)?;
        Ok(self
            .amplitudes
            .iter()
            .filter_map(|(k, a)| other.amplitudes.get(k).map(|b| a.conj() * b))
            .sum())
    }

    /// `self ⊗ other`, with `other`'s modes appended after `self`'s.
    pub fn tensor(&self, other: &FockState) -> Self {
        let mut out = Self::zero(self.num_modes + other.num_modes);
        for (ka, a) in &self.amplitudes {
            for (kb, b) in &other.amplitudes {
                let mut counts = ka.0.clone();
                counts.extend_from_slice(&kb.0);
                out.accumulate(OccupationVector(counts), a * b);
            }
        }
        out.prune();
        out
    }

    /// Reorders modes: mode `k` of the result is mode `order[k]` of `self`.
    pub fn permute_modes(&self, order: &[usize]) -> Result<Self> {
        check_mode_list(order, self.num_modes)?;
        if order.len() != self.num_modes {
            return Err(Error::DimensionMismatch {
                expected: self.num_modes,
                got: order.len(),
            });
        }
        let amplitudes = self
            .amplitudes
            .iter()
            .map(|(k, a)| (OccupationVector(order.iter().map(|&m| k.0[m]).collect()), *a))
            .collect();
        Ok(Self {
            num_modes: self.num_modes,
            amplitudes,
        })
    }

    /// Appends `extra` vacuum modes after the existing ones.
    pub fn with_vacuum_modes(&self, extra: usize) -> Self {
        self.tensor(&FockState::vacuum(extra))
    }

    /// Applies `Σ_j c_j a_j` (a linear combination of annihilation operators).
    pub fn annihilate(&self, coefficients: &[(usize, Complex64)]) -> Result<Self> {
        for &(m, _) in coefficients {
            if m >= self.num_modes {
                return Err(Error::InvalidModes(format!(
                    "mode {m} out of range for {} modes",
                    self.num_modes
                )));
            }
        }
        let mut out = Self::zero(self.num_modes);
        for (k, a) in &self.amplitudes {
            for &(m, c) in coefficients {
                let n = k.0[m];
                if n == 0 {
                    continue;
                }
                let mut counts = k.0.clone();
                counts[m] -= 1;
                out.accumulate(OccupationVector(counts), a * c * (n as f64).sqrt());
            }
        }
        out.prune();
        Ok(out)
    }

    fn check_modes(&self, other: usize) -> Result<()> {
        if self.num_modes == other {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.num_modes,
                got: other,
            })
        }
    }

    fn accumulate(&mut self, key: OccupationVector, amp: Complex64) {
        *self.amplitudes.entry(key).or_insert(ZERO) += amp;
    }

    fn prune(&mut self) {
        self.amplitudes.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
    }
}

fn check_mode_list(modes: &[usize], num_modes: usize) -> Result<()> {
    let mut seen = vec![false; num_modes];
    for &m in modes {
        if m >= num_modes {
            return Err(Error::InvalidModes(format!(
                "mode {m} out of range for {num_modes} modes"
            )));
        }
        if std::mem::replace(&mut seen[m], true) {
            return Err(Error::InvalidModes(format!("mode {m} listed twice")));
        }
    }
    Ok(())
}

/// Interferometer matrix acting on creation operators as
/// `a†_i -> Σ_j U_ji a†_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeUnitary {
    dim: usize,
    /// Row-major, `entries[j * dim + i] = U_ji`.
    entries: Vec<Complex64>,
}

impl ModeUnitary {
    /// Validates `U†U = 1` within [`UNITARITY_TOLERANCE`].
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        let u = Self { dim, entries };
        let dev = u.unitarity_deviation();
        if dev > UNITARITY_TOLERANCE {
            return Err(Error::NotUnitary(dev));
        }
        Ok(u)
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![ZERO; dim * dim];
        for k in 0..dim {
            entries[k * dim + k] = ONE;
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `U_ji` (output row `j`, input column `i`).
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    /// Matrix product `self · other`: `other` acts first.
    pub fn then_after(&self, other: &ModeUnitary) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let d = self.dim;
        let mut entries = vec![ZERO; d * d];
        for r in 0..d {
            for c in 0..d {
                entries[r * d + c] = (0..d).map(|k| self.get(r, k) * other.get(k, c)).sum();
            }
        }
        Ok(Self { dim: d, entries })
    }

    /// Largest elementwise deviation of `U†U` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in 0..d {
                let v: Complex64 = (0..d).map(|k| self.get(k, r).conj() * self.get(k, c)).sum();
                let target = if r == c { ONE } else { ZERO };
                worst = worst.max((v - target).norm());
            }
        }
        worst
    }

    fn column_support(&self, col: usize) -> Vec<(usize, Complex64)> {
        (0..self.dim)
            .map(|r| (r, self.get(r, col)))
            .filter(|(_, v)| v.norm() > 0.0)
            .collect()
    }
}

/// `[[√t, √(1−t)], [√(1−t), −√t]]`
pub fn beamsplitter(t: f64) -> Result<ModeUnitary> {
    check_unit("transmittance", t)?;
    let a = Complex64::new(t.sqrt(), 0.0);
    let b = Complex64::new((1.0 - t).sqrt(), 0.0);
    ModeUnitary::new(2, vec![a, b, b, -a])
}

/// `diag(e^{iφ}, 1)`
pub fn phase_shifter(phi: f64) -> ModeUnitary {
    ModeUnitary {
        dim: 2,
        entries: vec![Complex64::from_polar(1.0, phi), ZERO, ZERO, ONE],
    }
}

/// Lifts `u` to `total_modes`, acting on `modes` (in order) and as the
/// identity elsewhere.
pub fn embed(u: &ModeUnitary, modes: &[usize], total_modes: usize) -> Result<ModeUnitary> {
    if modes.len() != u.dim {
        return Err(Error::DimensionMismatch {
            expected: u.dim,
            got: modes.len(),
        });
    }
    check_mode_list(modes, total_modes)?;
    let mut out = ModeUnitary::identity(total_modes);
    for (a, &ma) in modes.iter().enumerate() {
        for (b, &mb) in modes.iter().enumerate() {
            out.entries[ma * total_modes + mb] = u.get(a, b);
        }
    }
    Ok(out)
}

/// Linear-optical evolution `Û|ψ>`.
pub fn evolve(state: &FockState, u: &ModeUnitary) -> Result<FockState> {
    if u.dim != state.num_modes {
        return Err(Error::DimensionMismatch {
            expected: state.num_modes,
            got: u.dim,
        });
    }
    let columns: Vec<_> = (0..u.dim).map(|c| u.column_support(c)).collect();
    let mut out = FockState::zero(state.num_modes);
    for (occ, amp) in &state.amplitudes {
        // Polynomial in output creation operators, keyed by exponent vector.
        let mut poly: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
        poly.insert(vec![0; u.dim], amp / occ.factorial_product().sqrt());
        for (mode, &count) in occ.0.iter().enumerate() {
            for _ in 0..count {
                let mut next = BTreeMap::new();
                for (mono, c) in &poly {
                    for &(row, v) in &columns[mode] {
                        let mut m = mono.clone();
                        m[row] += 1;
                        *next.entry(m).or_insert(ZERO) += c * v;
                    }
                }
                poly = next;
            }
        }
        for (mono, c) in poly {
            let key = OccupationVector(mono);
            let scale = key.factorial_product().sqrt();
            out.accumulate(key, c * scale);
        }
    }
    out.prune();
    Ok(out)
}

/// Destructive detection of `k` photons in `mode`: `<k|_mode`. The result has
/// one fewer mode and its squared norm is the outcome probability.
pub fn project_count(state: &FockState, mode: usize, k: u8) -> Result<FockState> {
    if mode >= state.num_modes {
        return Err(Error::InvalidModes(format!(
            "mode {mode} out of range for {} modes",
            state.num_modes
        )));
    }
    let mut out = FockState::zero(state.num_modes - 1);
    for (occ, amp) in &state.amplitudes {
        if occ.0[mode] == k {
            let mut counts = occ.0.clone();
            counts.remove(mode);
            out.accumulate(OccupationVector(counts), *amp);
        }
    }
    out.prune();
    Ok(out)
}

/// Heralded outcome of a fusion unit on a mode pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionOutcome {
    /// No photon detected.
    Vac,
    /// One photon, first detector: `(a_i + a_j)`.
    One10,
    /// One photon, second detector: `(a_i − a_j)`.
    One01,
}

impl FusionOutcome {
    pub const HERALDS: [FusionOutcome; 2] = [FusionOutcome::One10, FusionOutcome::One01];
}

/// Applies the fusion-unit measurement operator on modes `i, j`:
///
/// - `Vac`: `sqrt(t^N_ij)`
/// - `One10` / `One01`: `sqrt(t^N_ij (1−t)/2) (a_i ± a_j)`, with `N_ij`
///   counted after the annihilation.
///
/// The fused modes are kept; only the tapped photon is consumed.
pub fn fusion_measure(
    state: &FockState,
    i: usize,
    j: usize,
    t: f64,
    outcome: FusionOutcome,
) -> Result<FockState> {
    check_unit("transmittance", t)?;
    if i == j {
        return Err(Error::InvalidModes(format!("fusion pair ({i}, {j})")));
    }
    check_mode_list(&[i, j], state.num_modes)?;
    let heralded = match outcome {
        FusionOutcome::Vac => state.clone(),
        FusionOutcome::One10 | FusionOutcome::One01 => {
            let sign = if outcome == FusionOutcome::One10 { 1.0 } else { -1.0 };
            state
                .annihilate(&[(i, ONE), (j, Complex64::new(sign, 0.0))])?
                .scaled(Complex64::new(((1.0 - t) / 2.0).sqrt(), 0.0))
        }
    };
    let mut out = FockState::zero(state.num_modes);
    for (occ, amp) in &heralded.amplitudes {
        let n = occ.0[i] as i32 + occ.0[j] as i32;
        out.accumulate(occ.clone(), amp * t.powi(n).sqrt());
    }
    out.prune();
    Ok(out)
}

/// Default junk component for a size-`n` primate: a uniform superposition of
/// all `n + 1` photons sitting in one inner mode, over every inner mode.
pub fn default_junk(n: usize) -> Result<FockState> {
    if n < 2 {
        return Err(Error::MalformedState(
            "primates of size 1 carry no junk component".into(),
        ));
    }
    let inner = 2 * n - 2;
    let amp = Complex64::new(1.0 / (inner as f64).sqrt(), 0.0);
    FockState::from_terms(
        inner,
        (0..inner).map(|m| {
            let mut c = vec![0u8; inner];
            c[m] = (n + 1) as u8;
            (c, amp)
        }),
    )
}

/// Useful component `|s^(n)>` over `2n` modes:
/// `√s |2>|01>^{n−1}|0> + √(1−s) |0>|10>^{n−1}|2>`.
pub fn useful_component(n: usize, s: f64) -> Result<FockState> {
    if n == 0 {
        return Err(Error::OutOfRange {
            name: "primate size",
            value: 0.0,
            range: "n >= 1",
        });
    }
    check_unit("s", s)?;
    let (left, right) = useful_basis(n);
    FockState::from_terms(
        2 * n,
        [
            (left, Complex64::new(s.sqrt(), 0.0)),
            (right, Complex64::new((1.0 - s).sqrt(), 0.0)),
        ],
    )
}

/// The two basis vectors spanning `|s^(n)>`: photon pair on the left outer
/// mode and photon pair on the right outer mode.
pub fn useful_basis(n: usize) -> (Vec<u8>, Vec<u8>) {
    let modes = 2 * n;
    let mut left = vec![0u8; modes];
    let mut right = vec![0u8; modes];
    left[0] = 2;
    right[modes - 1] = 2;
    for q in 0..n - 1 {
        left[1 + 2 * q + 1] = 1;
        right[1 + 2 * q] = 1;
    }
    (left, right)
}

/// Pure primate `√λ |s^(n)> + √(1−λ) |0>|ζ>|0>` over `2n` modes.
///
/// `junk` must be a normalized `(n+1)`-photon state over `2n − 2` modes; for
/// `n = 1` it must be absent and `λ = 1`.
pub fn build_primate(n: usize, lambda: f64, s: f64, junk: Option<&FockState>) -> Result<FockState> {
    check_unit("lambda", lambda)?;
    let useful = useful_component(n, s)?;
    if n == 1 {
        if junk.is_some_and(|j| !j.is_empty()) || lambda != 1.0 {
            return Err(Error::MalformedState(
                "a size-1 primate has no junk modes; lambda must be 1".into(),
            ));
        }
        return Ok(useful);
    }
    let junk = junk.ok_or_else(|| Error::MalformedState("missing junk component".into()))?;
    if junk.num_modes() != 2 * n - 2 {
        return Err(Error::MalformedState(format!(
            "junk spans {} modes, expected {}",
            junk.num_modes(),
            2 * n - 2
        )));
    }
    if junk.photon_numbers() != vec![(n + 1) as u32] {
        return Err(Error::MalformedState(format!(
            "junk photon numbers {:?}, expected {}",
            junk.photon_numbers(),
            n + 1
        )));
    }
    if (junk.norm_sqr() - 1.0).abs() > 1e-12 {
        return Err(Error::MalformedState("junk is not normalized".into()));
    }
    let padded = FockState::vacuum(1).tensor(junk).tensor(&FockState::vacuum(1));
    useful
        .scaled(Complex64::new(lambda.sqrt(), 0.0))
        .add(&padded.scaled(Complex64::new((1.0 - lambda).sqrt(), 0.0)))
}

/// `√s |10>^N + √(1−s) |01>^N` over `2N` modes.
pub fn build_ghz(qubits: usize, s: f64) -> Result<FockState> {
    if qubits == 0 {
        return Err(Error::OutOfRange {
            name: "qubits",
            value: 0.0,
            range: "N >= 1",
        });
    }
    check_unit("s", s)?;
    let zeros: Vec<u8> = (0..2 * qubits).map(|m| u8::from(m % 2 == 0)).collect();
    let ones: Vec<u8> = (0..2 * qubits).map(|m| u8::from(m % 2 == 1)).collect();
    FockState::from_terms(
        2 * qubits,
        [
            (zeros, Complex64::new(s.sqrt(), 0.0)),
            (ones, Complex64::new((1.0 - s).sqrt(), 0.0)),
        ],
    )
}

/// `|<a|b>|² / (‖a‖² ‖b‖²)`
pub fn fidelity(a: &FockState, b: &FockState) -> Result<f64> {
    let na = a.norm_sqr();
    let nb = b.norm_sqr();
    if na < PRUNE_THRESHOLD * PRUNE_THRESHOLD || nb < PRUNE_THRESHOLD * PRUNE_THRESHOLD {
        return Err(Error::ZeroNorm);
    }
    Ok((a.inner(b)?.norm_sqr() / (na * nb)).min(1.0))
}

/// `|1,1>` through a balanced beamsplitter: the deterministic `s = 1/2`
/// elementary primate (up to the sign on `|0,2>`).
pub fn hong_ou_mandel() -> FockState {
    evolve(
        &FockState::basis(vec![1, 1]),
        &beamsplitter(0.5).expect("0.5 is a valid transmittance"),
    )
    .expect("two-mode state")
}

/// Amplitude `1/√2`, handy in tests.
pub const INV_SQRT2: f64 = FRAC_1_SQRT_2;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn beamsplitter_limits() {
        let id = beamsplitter(1.0).unwrap();
        assert_eq!(id.get(0, 0), c(1.0));
        assert_eq!(id.get(1, 1), c(-1.0));
        assert_eq!(id.get(0, 1), c(0.0));
        let swap = beamsplitter(0.0).unwrap();
        assert_eq!(swap.get(0, 1), c(1.0));
        assert_eq!(swap.get(1, 0), c(1.0));
        assert_eq!(swap.get(0, 0).norm(), 0.0);
        let half = beamsplitter(0.5).unwrap();
        for r in 0..2 {
            for col in 0..2 {
                assert_abs_diff_eq!(half.get(r, col).norm(), INV_SQRT2, epsilon = 1e-15);
            }
        }
        assert!(half.get(1, 1).re < 0.0);
        assert!(beamsplitter(1.2).is_err());
        assert!(beamsplitter(-0.1).is_err());
    }

    #[test]
    fn phase_shifter_values() {
        let p = phase_shifter(0.0);
        assert_eq!(p, ModeUnitary::identity(2));
        let flip = phase_shifter(std::f64::consts::PI);
        assert_abs_diff_eq!(flip.get(0, 0).re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(flip.get(0, 0).im, 0.0, epsilon = 1e-15);
        let quarter = phase_shifter(std::f64::consts::FRAC_PI_2);
        assert_abs_diff_eq!(quarter.get(0, 0).im, 1.0, epsilon = 1e-15);
        assert_eq!(quarter.get(1, 1), c(1.0));
    }

    #[test]
    fn embed_cases() {
        let id = embed(&ModeUnitary::identity(2), &[0, 1], 4).unwrap();
        assert_eq!(id, ModeUnitary::identity(4));

        let u = embed(&beamsplitter(0.5).unwrap(), &[0, 3], 4).unwrap();
        let out = evolve(&FockState::basis(vec![1, 0, 0, 0]), &u).unwrap();
        assert_eq!(out.len(), 2);
        assert_abs_diff_eq!(out.amplitude(&[1, 0, 0, 0]).re, INV_SQRT2, epsilon = 1e-15);
        assert_abs_diff_eq!(out.amplitude(&[0, 0, 0, 1]).re, INV_SQRT2, epsilon = 1e-15);

        let swap = embed(&beamsplitter(0.0).unwrap(), &[1, 2], 3).unwrap();
        let out = evolve(&FockState::basis(vec![0, 1, 0]), &swap).unwrap();
        assert_abs_diff_eq!(out.amplitude(&[0, 0, 1]).re, 1.0, epsilon = 1e-15);

        assert!(embed(&beamsplitter(0.5).unwrap(), &[1, 1], 3).is_err());
        assert!(embed(&beamsplitter(0.5).unwrap(), &[0, 3], 3).is_err());
        assert!(embed(&beamsplitter(0.5).unwrap(), &[0], 3).is_err());
    }

    #[test]
    fn hong_ou_mandel_bunching() {
        let out = hong_ou_mandel();
        assert_eq!(out.amplitude(&[1, 1]).norm(), 0.0);
        assert_abs_diff_eq!(out.amplitude(&[2, 0]).norm(), INV_SQRT2, epsilon = 1e-14);
        assert_abs_diff_eq!(out.amplitude(&[0, 2]).norm(), INV_SQRT2, epsilon = 1e-14);
        assert_abs_diff_eq!(out.norm_sqr(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn vacuum_is_invariant() {
        let u = embed(&beamsplitter(0.3).unwrap(), &[0, 2], 3).unwrap();
        let out = evolve(&FockState::vacuum(3), &u).unwrap();
        assert_eq!(out, FockState::vacuum(3));
    }

    #[test]
    fn two_photons_on_a_beamsplitter() {
        // (√t a†₁ + √(1−t) a†₂)² / √2 acting on vacuum.
        let t: f64 = 0.7;
        let out = evolve(&FockState::basis(vec![2, 0]), &beamsplitter(t).unwrap()).unwrap();
        assert_abs_diff_eq!(out.amplitude(&[2, 0]).re, t, epsilon = 1e-14);
        assert_abs_diff_eq!(
            out.amplitude(&[1, 1]).re,
            (2.0 * t * (1.0 - t)).sqrt(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(out.amplitude(&[0, 2]).re, 1.0 - t, epsilon = 1e-14);
    }

    #[test]
    fn evolve_rejects_dimension_mismatch() {
        assert!(evolve(&FockState::vacuum(3), &ModeUnitary::identity(2)).is_err());
    }

    #[test]
    fn projection_cases() {
        let noon = FockState::from_terms(2, [(vec![2, 0], c(INV_SQRT2)), (vec![0, 2], c(INV_SQRT2))])
            .unwrap();
        let out = project_count(&noon, 1, 0).unwrap();
        assert_eq!(out.num_modes(), 1);
        assert_abs_diff_eq!(out.norm_sqr(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(out.amplitude(&[2]).re, INV_SQRT2, epsilon = 1e-15);

        let vac = project_count(&FockState::vacuum(3), 1, 0).unwrap();
        assert_eq!(vac, FockState::vacuum(2));

        let gone = project_count(&FockState::basis(vec![1]), 0, 2).unwrap();
        assert!(gone.is_empty());
        assert_eq!(gone.norm_sqr(), 0.0);
    }

    #[test]
    fn fusion_measure_single_photon() {
        let vac = fusion_measure(&FockState::vacuum(2), 0, 1, 0.4, FusionOutcome::Vac).unwrap();
        assert_abs_diff_eq!(vac.norm_sqr(), 1.0, epsilon = 1e-15);

        // Tapped with probability 1 − t, then one of two detectors.
        let t = 0.5;
        let one = fusion_measure(&FockState::basis(vec![1, 0]), 0, 1, t, FusionOutcome::One10).unwrap();
        assert_abs_diff_eq!(one.norm_sqr(), (1.0 - t) / 2.0, epsilon = 1e-15);
        assert_eq!(one.num_modes(), 2);

        let stay = fusion_measure(&FockState::basis(vec![1, 0]), 0, 1, t, FusionOutcome::Vac).unwrap();
        assert_abs_diff_eq!(stay.norm_sqr(), t, epsilon = 1e-15);

        assert!(fusion_measure(&FockState::vacuum(2), 1, 1, t, FusionOutcome::Vac).is_err());
    }

    #[test]
    fn primate_construction() {
        let s = 0.3;
        let p1 = build_primate(1, 1.0, s, None).unwrap();
        assert_abs_diff_eq!(p1.amplitude(&[2, 0]).re, s.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(p1.amplitude(&[0, 2]).re, (1.0 - s).sqrt(), epsilon = 1e-15);

        let balanced = build_primate(1, 1.0, 0.5, None).unwrap();
        assert_abs_diff_eq!(fidelity(&balanced, &hong_ou_mandel()).unwrap(), 0.0, epsilon = 1e-15);
        let hom_abs = FockState::from_terms(2, [(vec![2, 0], c(INV_SQRT2)), (vec![0, 2], c(INV_SQRT2))])
            .unwrap();
        assert_abs_diff_eq!(fidelity(&balanced, &hom_abs).unwrap(), 1.0, epsilon = 1e-15);

        let junk = default_junk(2).unwrap();
        let p2 = build_primate(2, 0.5, 0.3, Some(&junk)).unwrap();
        assert_abs_diff_eq!(p2.norm_sqr(), 1.0, epsilon = 1e-14);
        let useful = useful_component(2, 0.3).unwrap();
        assert_abs_diff_eq!(useful.inner(&p2).unwrap().norm_sqr(), 0.5, epsilon = 1e-14);
        assert_eq!(p2.photon_numbers(), vec![3]);

        assert!(build_primate(1, 0.5, 0.3, None).is_err());
        assert!(build_primate(2, 0.5, 0.3, None).is_err());
        let wrong = FockState::basis(vec![1, 1]);
        assert!(build_primate(2, 0.5, 0.3, Some(&wrong)).is_err());
    }

    #[test]
    fn ghz_construction() {
        let g1 = build_ghz(1, 1.0).unwrap();
        assert_eq!(g1, FockState::basis(vec![1, 0]));
        let bell = build_ghz(2, 0.5).unwrap();
        assert_eq!(bell.len(), 2);
        assert_abs_diff_eq!(bell.amplitude(&[1, 0, 1, 0]).re, INV_SQRT2, epsilon = 1e-15);
        assert_abs_diff_eq!(bell.amplitude(&[0, 1, 0, 1]).re, INV_SQRT2, epsilon = 1e-15);
        for n in 1..=5 {
            for &s in &[0.0, 0.13, 0.5, 0.77, 1.0] {
                assert_abs_diff_eq!(build_ghz(n, s).unwrap().norm_sqr(), 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn fidelity_cases() {
        let a = build_ghz(2, 0.3).unwrap();
        assert_abs_diff_eq!(fidelity(&a, &a).unwrap(), 1.0, epsilon = 1e-15);
        let orth = fidelity(&FockState::basis(vec![1, 0]), &FockState::basis(vec![0, 1])).unwrap();
        assert_eq!(orth, 0.0);
        assert!(fidelity(&FockState::zero(4), &a).is_err());
    }

    #[test]
    fn permute_and_tensor() {
        let a = FockState::basis(vec![1, 0]);
        let b = FockState::basis(vec![0, 2]);
        let ab = a.tensor(&b);
        assert_eq!(ab, FockState::basis(vec![1, 0, 0, 2]));
        let p = ab.permute_modes(&[3, 2, 1, 0]).unwrap();
        assert_eq!(p, FockState::basis(vec![2, 0, 0, 1]));
        assert!(ab.permute_modes(&[0, 0, 1, 2]).is_err());
    }

    #[test]
    fn useful_basis_layout() {
        assert_eq!(useful_basis(1), (vec![2, 0], vec![0, 2]));
        assert_eq!(useful_basis(3), (vec![2, 0, 1, 0, 1, 0], vec![0, 1, 0, 1, 0, 2]));
    }
}
