//! Oracle batteries: closed forms checked against exact Fock-space
//! simulation (and, for the elementary cost, against sampled attempts).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bleeding::{
    continuum_weights, discrete_weights, schedule_uniform, BleedPairing, BleedSchedule,
};
use crate::error::{Error, Result};
use crate::fock::{
    beamsplitter, build_ghz, build_primate, default_junk, embed, evolve, fidelity, fusion_measure,
    project_count, useful_component, FockState, FusionOutcome, ModeUnitary,
};
use crate::primate::{
    elementary_cost, elementary_recycle_prob, elementary_success_prob, fuse, merged_entanglement,
    s_chain_solve, PairingChoice, PrimateParams, Side,
};

/// Outcome of one battery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub trials: usize,
    pub max_error: f64,
    pub tol: f64,
    pub passed: bool,
    /// Up to [`MAX_REPORTED_FAILURES`] descriptions of failing trials.
    pub failures: Vec<String>,
}

pub const MAX_REPORTED_FAILURES: usize = 5;

struct Tally {
    name: String,
    tol: f64,
    trials: usize,
    max_error: f64,
    failed: bool,
    failures: Vec<String>,
}

impl Tally {
    fn new(name: &str, tol: f64) -> Self {
        Self {
            name: name.to_string(),
            tol,
            trials: 0,
            max_error: 0.0,
            failed: false,
            failures: Vec::new(),
        }
    }

    fn record(&mut self, error: f64, describe: impl FnOnce() -> String) {
        if error.is_nan() || error > self.tol {
            self.failed = true;
            if self.failures.len() < MAX_REPORTED_FAILURES {
                self.failures.push(format!("{} (error {error:.3e})", describe()));
            }
        }
        if error.is_nan() {
            self.max_error = f64::NAN;
        } else if !self.max_error.is_nan() {
            self.max_error = self.max_error.max(error);
        }
    }

    fn fail(&mut self, describe: String) {
        self.failed = true;
        if self.failures.len() < MAX_REPORTED_FAILURES {
            self.failures.push(describe);
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name,
            trials: self.trials,
            max_error: self.max_error,
            tol: self.tol,
            passed: !self.failed,
            failures: self.failures,
        }
    }
}

/// Settings shared by all batteries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// Largest primate size used as a fusion operand; pipelines are built
    /// up to `max_n + 1` qubits.
    pub max_n: u32,
    pub trials: usize,
    /// Tolerance of the exact oracle comparisons.
    pub tol: f64,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            max_n: 2,
            trials: 200,
            tol: 1e-9,
            seed: 42,
        }
    }
}

/// Largest `max_n` the batteries accept.
pub const MAX_ORACLE_N: u32 = 3;

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::OutOfRange {
                name: "trials",
                value: 0.0,
                range: ">= 1",
            });
        }
        if !(1..=MAX_ORACLE_N).contains(&self.max_n) {
            return Err(Error::OutOfRange {
                name: "max_n",
                value: self.max_n as f64,
                range: "1 <= max_n <= 3",
            });
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::OutOfRange {
                name: "tol",
                value: self.tol,
                range: "> 0",
            });
        }
        Ok(())
    }
}

fn rng_for(seed: u64, battery: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(battery);
    rng
}

/// Mode index of an operand's outer mode within `a ⊗ b`.
fn outer_mode(side: Side, offset: usize, n: u32) -> usize {
    match side {
        Side::Left => offset,
        Side::Right => offset + 2 * n as usize - 1,
    }
}

/// Mode order of the merged primate within `a ⊗ b` after fusing with
/// `pairing`: the unfused outer modes end up outside and the fused pair in
/// the middle.
pub fn merged_order(pairing: PairingChoice, na: u32, nb: u32) -> Vec<usize> {
    let ma = 2 * na as usize;
    let mb = 2 * nb as usize;
    let a: Vec<usize> = (0..ma).collect();
    let b: Vec<usize> = (ma..ma + mb).collect();
    let rev = |v: &[usize]| v.iter().rev().copied().collect::<Vec<_>>();
    match pairing {
        PairingChoice::P23 => [a, b].concat(),
        PairingChoice::P14 => [b, a].concat(),
        PairingChoice::P13 => [rev(&b), a].concat(),
        PairingChoice::P24 => [a, rev(&b)].concat(),
    }
}

/// `π^(n)(λ, s)` with the default junk component.
pub fn primate_state(p: &PrimateParams) -> Result<FockState> {
    let n = p.n as usize;
    if n == 1 {
        build_primate(1, 1.0, p.s, None)
    } else {
        build_primate(n, p.lambda, p.s, Some(&default_junk(n)?))
    }
}

/// Applies the `π` phase that maps the `One01` herald onto `One10`.
pub fn correct(state: &FockState, j: usize, outcome: FusionOutcome) -> Result<FockState> {
    match outcome {
        FusionOutcome::One01 => evolve(
            state,
            &single_mode_phase(j, state.num_modes(), std::f64::consts::PI)?,
        ),
        _ => Ok(state.clone()),
    }
}

fn single_mode_phase(mode: usize, total: usize, phi: f64) -> Result<ModeUnitary> {
    let mut entries = vec![Complex64::new(0.0, 0.0); total * total];
    for k in 0..total {
        entries[k * total + k] = if k == mode {
            Complex64::from_polar(1.0, phi)
        } else {
            Complex64::new(1.0, 0.0)
        };
    }
    ModeUnitary::new(total, entries)
}

/// Exact simulation of one fusion unit on two primates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionOracle {
    pub p_success: f64,
    /// Useful weight of the heralded, corrected `One10` state.
    pub lambda: f64,
    pub s: f64,
    /// `1 − F` between the corrected `One01` and the `One10` states, or the
    /// larger of their `λ`, `s` differences.
    pub herald_mismatch: f64,
    /// Weight of the non-useful remainder on the merged outer modes (0 for a
    /// well-formed primate).
    pub junk_outer_weight: f64,
}

/// Heralded, corrected output of a fusion of `a ⊗ b`, in merged layout, one
/// state per herald.
pub fn fuse_states(
    state: &FockState,
    na: u32,
    nb: u32,
    pairing: PairingChoice,
    t: f64,
) -> Result<Vec<FockState>> {
    let (sa, sb) = pairing.fused_sides();
    let i = outer_mode(sa, 0, na);
    let j = outer_mode(sb, 2 * na as usize, nb);
    let order = merged_order(pairing, na, nb);
    FusionOutcome::HERALDS
        .iter()
        .map(|&o| {
            let heralded = fusion_measure(state, i, j, t, o)?;
            correct(&heralded, j, o)?.permute_modes(&order)
        })
        .collect()
}

/// Useful weight and entanglement of a (subnormalized) state of `2n` modes,
/// read against `|s^(n)>`.
fn read_primate(state: &FockState, n: usize) -> Result<(f64, f64, f64)> {
    let norm = state.norm_sqr();
    if norm <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    let (left, right) = crate::fock::useful_basis(n);
    let wl = state.amplitude(&left).norm_sqr();
    let wr = state.amplitude(&right).norm_sqr();
    let s = wl / (wl + wr);
    let lambda = useful_component(n, s)?.inner(state)?.norm_sqr() / norm;
    let outer: f64 = state
        .iter()
        .filter(|(k, _)| k.counts() != left.as_slice() && k.counts() != right.as_slice())
        .filter(|(k, _)| k.counts()[0] != 0 || k.counts()[2 * n - 1] != 0)
        .map(|(_, a)| a.norm_sqr())
        .sum::<f64>()
        / norm;
    Ok((lambda, s, outer))
}

pub fn fusion_oracle(a: &PrimateParams, b: &PrimateParams, pairing: PairingChoice, t: f64) -> Result<FusionOracle> {
    let state = primate_state(a)?.tensor(&primate_state(b)?);
    let outs = fuse_states(&state, a.n, b.n, pairing, t)?;
    let n = (a.n + b.n) as usize;
    let p_success = outs.iter().map(FockState::norm_sqr).sum();
    let (l0, s0, j0) = read_primate(&outs[0], n)?;
    let (l1, s1, j1) = read_primate(&outs[1], n)?;
    let herald_mismatch = (1.0 - fidelity(&outs[0], &outs[1])?)
        .abs()
        .max((l0 - l1).abs())
        .max((s0 - s1).abs());
    Ok(FusionOracle {
        p_success,
        lambda: l0,
        s: s0,
        herald_mismatch,
        junk_outer_weight: j0.max(j1),
    })
}

fn random_primate(rng: &mut ChaCha8Rng, n: u32) -> PrimateParams {
    let lambda = if n == 1 { 1.0 } else { rng.gen_range(0.0..=1.0) };
    let s = rng.gen_range(0.0..=1.0);
    PrimateParams::new(n, lambda, s, 2.0).expect("sampled in range")
}

/// Analytic fusion against the exact simulation, plus herald correction and
/// junk structure.
pub fn check_fuse_oracle(config: &VerifyConfig) -> CheckResult {
    let mut tally = Tally::new("fuse-vs-fock", config.tol);
    let mut rng = rng_for(config.seed, 1);
    for _ in 0..config.trials {
        tally.trials += 1;
        let na = rng.gen_range(1..=config.max_n);
        let a = random_primate(&mut rng, na);
        let nb = rng.gen_range(1..=config.max_n);
        let b = random_primate(&mut rng, nb);
        let pairing = PairingChoice::ALL[rng.gen_range(0..4)];
        let t = rng.gen_range(0.01..0.99);
        let describe = || format!("a={a:?} b={b:?} {pairing:?} t={t}");
        let (analytic, oracle) = match (fuse(&a, &b, pairing, t), fusion_oracle(&a, &b, pairing, t)) {
            (Ok(x), Ok(y)) => (x, y),
            (Err(Error::ZeroProbability), _) | (_, Err(Error::ZeroNorm)) => {
                // Both must agree that nothing is heralded.
                let p = crate::primate::fusion_weights(&a, &b, pairing, t).0;
                tally.record(p, describe);
                continue;
            }
            (x, y) => {
                tally.fail(format!("{}: analytic {:?} oracle {:?}", describe(), x.err(), y.err()));
                continue;
            }
        };
        let mut err = (analytic.p_success - oracle.p_success).abs();
        err = err.max(oracle.herald_mismatch.abs()).max(oracle.junk_outer_weight);
        // λ′ and s′ are meaningful only when the useful part survives.
        if analytic.merged.lambda > config.tol {
            err = err
                .max((analytic.merged.lambda - oracle.lambda).abs())
                .max((analytic.merged.s - oracle.s).abs());
        }
        tally.record(err, describe);
    }
    tally.finish()
}

/// The `One01` herald, after a `π` phase on the second fused mode, equals the
/// `One10` herald.
pub fn check_correction(config: &VerifyConfig) -> CheckResult {
    let mut tally = Tally::new("herald-correction", config.tol);
    let mut rng = rng_for(config.seed, 2);
    for _ in 0..config.trials {
        tally.trials += 1;
        let na = rng.gen_range(1..=config.max_n);
        let a = random_primate(&mut rng, na);
        let nb = rng.gen_range(1..=config.max_n);
        let b = random_primate(&mut rng, nb);
        let pairing = PairingChoice::ALL[rng.gen_range(0..4)];
        let t = rng.gen_range(0.01..0.99);
        match fusion_oracle(&a, &b, pairing, t) {
            Ok(o) => tally.record(o.herald_mismatch.abs(), || format!("a={a:?} b={b:?} {pairing:?}")),
            Err(Error::ZeroNorm) => {}
            Err(e) => tally.fail(e.to_string()),
        }
    }
    tally.finish()
}

/// Fusion-unit measurement operators against the physical circuit: two taps
/// of transmittance `t` into ancilla modes, a balanced beamsplitter on the
/// ancillas and two photon-number detectors.
pub fn check_fusion_circuit(config: &VerifyConfig) -> CheckResult {
    let mut tally = Tally::new("fusion-unit-vs-circuit", config.tol);
    let mut rng = rng_for(config.seed, 3);
    for _ in 0..config.trials {
        tally.trials += 1;
        let modes = rng.gen_range(2..=3usize);
        let state = random_state(&mut rng, modes, 3);
        let i = rng.gen_range(0..modes);
        let j = (i + rng.gen_range(1..modes)) % modes;
        let t = rng.gen_range(0.0..=1.0);
        let result = (|| -> Result<f64> {
            let wide = state.with_vacuum_modes(2);
            let (anc_a, anc_b) = (modes, modes + 1);
            let total = modes + 2;
            let mut u = embed(&beamsplitter(t)?, &[i, anc_a], total)?;
            u = embed(&beamsplitter(t)?, &[j, anc_b], total)?.then_after(&u)?;
            u = embed(&beamsplitter(0.5)?, &[anc_a, anc_b], total)?.then_after(&u)?;
            let out = evolve(&wide, &u)?;
            let mut err: f64 = 0.0;
            let mut detected = 0.0;
            for (outcome, (ka, kb)) in [
                (FusionOutcome::Vac, (0, 0)),
                (FusionOutcome::One10, (1, 0)),
                (FusionOutcome::One01, (0, 1)),
            ] {
                let circuit = project_count(&project_count(&out, anc_b, kb)?, anc_a, ka)?;
                let direct = fusion_measure(&state, i, j, t, outcome)?;
                err = err.max(max_amplitude_difference(&circuit, &direct));
                detected += circuit.norm_sqr();
            }
            // Whatever the operators miss is multi-photon detection.
            let multi: f64 = out
                .iter()
                .filter(|(k, _)| k.counts()[anc_a] + k.counts()[anc_b] >= 2)
                .map(|(_, a)| a.norm_sqr())
                .sum();
            Ok(err.max((detected + multi - state.norm_sqr()).abs()))
        })();
        match result {
            Ok(e) => tally.record(e, || format!("modes={modes} i={i} j={j} t={t}")),
            Err(e) => tally.fail(e.to_string()),
        }
    }
    tally.finish()
}

/// The three fusion-unit operators are complete on states with at most one
/// photon in the fused pair.
pub fn check_measurement_completeness(config: &VerifyConfig) -> CheckResult {
    let mut tally = Tally::new("fusion-unit-completeness", config.tol);
    let mut rng = rng_for(config.seed, 4);
    for _ in 0..config.trials {
        tally.trials += 1;
        let modes = rng.gen_range(2..=4usize);
        let mut state = random_state(&mut rng, modes, 3);
        let t = rng.gen_range(0.0..=1.0);
        // Keep only components with at most one photon on modes 0 and 1.
        state = FockState::from_terms(
            modes,
            state
                .iter()
                .filter(|(k, _)| k.counts()[0] + k.counts()[1] <= 1)
                .map(|(k, a)| (k.counts().to_vec(), *a)),
        )
        .expect("same mode count");
        if state.is_empty() {
            continue;
        }
        let total: f64 = [FusionOutcome::Vac, FusionOutcome::One10, FusionOutcome::One01]
            .iter()
            .map(|&o| fusion_measure(&state, 0, 1, t, o).map(|s| s.norm_sqr()).unwrap_or(f64::NAN))
            .sum();
        tally.record((total - state.norm_sqr()).abs(), || format!("modes={modes} t={t}"));
    }
    tally.finish()
}

fn random_state(rng: &mut ChaCha8Rng, modes: usize, max_photons: u8) -> FockState {
    let terms: Vec<(Vec<u8>, Complex64)> = (0..rng.gen_range(1..=6))
        .map(|_| {
            let mut counts = vec![0u8; modes];
            for _ in 0..rng.gen_range(0..=max_photons) {
                counts[rng.gen_range(0..modes)] += 1;
            }
            (counts, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        })
        .collect();
    FockState::from_terms(modes, terms)
        .and_then(|s| s.normalized())
        .unwrap_or_else(|_| FockState::vacuum(modes))
}

fn max_amplitude_difference(a: &FockState, b: &FockState) -> f64 {
    let diff = a.add(&b.scaled(Complex64::new(-1.0, 0.0)));
    match diff {
        Ok(d) => d.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max),
        Err(_) => f64::INFINITY,
    }
}

/// Exact simulation of a bleeding unit, summed over stopping steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BleedOracle {
    pub p_success: f64,
    pub lambda: f64,
    pub s: f64,
    /// Failure of the success probability to split into useful and other
    /// contributions (0 when they are orthogonal, as the closed forms assume).
    pub interference: f64,
}

fn bleed_units(pairing: BleedPairing, na: u32, nb: u32) -> [(usize, usize); 2] {
    let off = 2 * na as usize;
    pairing.pairs().map(|p| {
        let (sa, sb) = p.fused_sides();
        (outer_mode(sa, 0, na), outer_mode(sb, off, nb))
    })
}

/// Success probability of `state` under the bleeding schedule.
fn bleed_success(state: &FockState, units: &[(usize, usize); 2], schedule: &BleedSchedule) -> Result<f64> {
    let mut cont = state.clone();
    let mut p = 0.0;
    for &t in schedule.transmittances() {
        for (u, &(i, j)) in units.iter().enumerate() {
            let (oi, oj) = units[1 - u];
            let quiet = fusion_measure(&cont, oi, oj, t, FusionOutcome::Vac)?;
            for o in FusionOutcome::HERALDS {
                p += fusion_measure(&quiet, i, j, t, o)?.norm_sqr();
            }
        }
        let (i0, j0) = units[0];
        let (i1, j1) = units[1];
        cont = fusion_measure(
            &fusion_measure(&cont, i0, j0, t, FusionOutcome::Vac)?,
            i1,
            j1,
            t,
            FusionOutcome::Vac,
        )?;
    }
    Ok(p)
}

pub fn bleed_oracle(a: &PrimateParams, b: &PrimateParams, pairing: BleedPairing, schedule: &BleedSchedule) -> Result<BleedOracle> {
    let full = primate_state(a)?.tensor(&primate_state(b)?);
    let units = bleed_units(pairing, a.n, b.n);
    let (la, ra) = crate::fock::useful_basis(a.n as usize);
    let (lb, rb) = crate::fock::useful_basis(b.n as usize);
    let amp = |x: f64| Complex64::new(x.sqrt(), 0.0);
    let w = a.lambda * b.lambda;
    // Useful ⊗ useful components that merge into a useful component.
    let (first, second) = match pairing {
        BleedPairing::Pairs14And23 => (
            ([la.clone(), lb.clone()].concat(), w * a.s * b.s),
            ([ra.clone(), rb.clone()].concat(), w * (1.0 - a.s) * (1.0 - b.s)),
        ),
        BleedPairing::Pairs13And24 => (
            ([la.clone(), rb.clone()].concat(), w * a.s * (1.0 - b.s)),
            ([ra.clone(), lb.clone()].concat(), w * (1.0 - a.s) * b.s),
        ),
    };
    let modes = full.num_modes();
    let g1 = FockState::from_terms(modes, [(first.0, amp(first.1))])?;
    let g2 = FockState::from_terms(modes, [(second.0, amp(second.1))])?;
    let good = g1.add(&g2)?;
    let rest = full.add(&good.scaled(Complex64::new(-1.0, 0.0)))?;

    let p = bleed_success(&full, &units, schedule)?;
    let p1 = bleed_success(&g1, &units, schedule)?;
    let p2 = bleed_success(&g2, &units, schedule)?;
    let p_good = bleed_success(&good, &units, schedule)?;
    let p_rest = bleed_success(&rest, &units, schedule)?;
    if p <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(BleedOracle {
        p_success: p,
        lambda: p_good / p,
        s: if p_good > 0.0 { p1 / (p1 + p2) } else { 0.5 },
        interference: (p - p_good - p_rest).abs().max((p_good - p1 - p2).abs()),
    })
}

/// Finite-schedule bleeding sums against the exact simulation.
pub fn check_bleed_oracle(config: &VerifyConfig) -> CheckResult {
    let mut tally = Tally::new("bleed-vs-fock", config.tol);
    let mut rng = rng_for(config.seed, 5);
    for _ in 0..config.trials {
        tally.trials += 1;
        let na = rng.gen_range(1..=config.max_n.min(2));
        let a = random_primate(&mut rng, na);
        let nb = rng.gen_range(1..=config.max_n.min(2));
        let b = random_primate(&mut rng, nb);
        let pairing = BleedPairing::ALL[rng.gen_range(0..2)];
        let steps = rng.gen_range(1..=3);
        let schedule = BleedSchedule::new((0..steps).map(|_| rng.gen_range(0.05..=1.0)).collect())
            .expect("sampled in range");
        let describe = || format!("a={a:?} b={b:?} {pairing:?} t={:?}", schedule.transmittances());
        let (s, k) = merged_entanglement(a.s, b.s, pairing.as_fusion());
        let (p, lambda) = discrete_weights(a.lambda, b.lambda, k, &schedule);
        match bleed_oracle(&a, &b, pairing, &schedule) {
            Ok(o) => {
                let mut err = (o.p_success - p).abs().max(o.interference);
                if lambda > config.tol {
                    err = err.max((o.lambda - lambda).abs()).max((o.s - s).abs());
                }
                tally.record(err, describe);
            }
            Err(Error::ZeroNorm) => tally.record(p, describe),
            Err(e) => tally.fail(format!("{}: {e}", describe())),
        }
    }
    tally.finish()
}

/// Relative disagreement between constant-schedule discrete bleeding with
/// `steps` steps and the continuum closed forms.
pub fn check_bleed_continuum(trials: usize, steps: usize, tol: f64, seed: u64) -> CheckResult {
    let mut tally = Tally::new("bleed-discrete-vs-continuum", tol);
    let mut rng = rng_for(seed, 6);
    for _ in 0..trials {
        tally.trials += 1;
        let la = rng.gen_range(0.01..=1.0);
        let lb = rng.gen_range(0.01..=1.0);
        let sa = rng.gen_range(0.0..=1.0);
        let sb = rng.gen_range(0.0..=1.0);
        let pairing = BleedPairing::ALL[rng.gen_range(0..2)];
        let k = merged_entanglement(sa, sb, pairing.as_fusion()).1;
        for c10 in 0..10 {
            let c = c10 as f64 / 10.0;
            let schedule = schedule_uniform(c, steps).expect("valid retention");
            let (pd, ld) = discrete_weights(la, lb, k, &schedule);
            let (pc, lc) = continuum_weights(la, lb, k, c);
            let rel = |x: f64, y: f64| if y == 0.0 { x.abs() } else { ((x - y) / y).abs() };
            tally.record(rel(pd, pc).max(rel(ld, lc)), || {
                format!("λ=({la},{lb}) K={k} c={c}")
            });
        }
    }
    tally.finish()
}

/// Heralded, corrected output of the whole fusion pipeline for a chain
/// `1, 2, ..., n` (each step adds one elementary primate), compared with
/// `|GHZ_n(s)>`.
pub fn pipeline_fidelity(
    n: u32,
    target_s: f64,
    pairings: &[PairingChoice],
    ts: &[f64],
    final_t: f64,
    heralds: &[FusionOutcome],
) -> Result<f64> {
    let steps = n as usize - 1;
    if pairings.len() != steps || ts.len() != steps || heralds.len() != steps + 1 {
        return Err(Error::DimensionMismatch {
            expected: steps,
            got: pairings.len(),
        });
    }
    // Free leaves at random-looking fixed values, the last one solved.
    let mut known: Vec<Option<f64>> = (0..=steps).map(|k| Some(0.3 + 0.4 * (k as f64 * 0.618).fract())).collect();
    known[steps] = None;
    let leaf_s = s_chain_solve(target_s, pairings, &known)?;

    let mut state = primate_state(&PrimateParams::elementary(leaf_s[0])?)?;
    let mut size = 1u32;
    for (k, (&pairing, &t)) in pairings.iter().zip(ts).enumerate() {
        let leaf = primate_state(&PrimateParams::elementary(leaf_s[k + 1])?)?;
        let joined = state.tensor(&leaf);
        let (sa, sb) = pairing.fused_sides();
        let i = outer_mode(sa, 0, size);
        let j = outer_mode(sb, 2 * size as usize, 1);
        let heralded = fusion_measure(&joined, i, j, t, heralds[k])?;
        state = correct(&heralded, j, heralds[k])?
            .permute_modes(&merged_order(pairing, size, 1))?
            .normalized()?;
        size += 1;
    }
    let last = 2 * n as usize - 1;
    let heralded = fusion_measure(&state, 0, last, final_t, heralds[steps])?;
    let out = correct(&heralded, last, heralds[steps])?;
    fidelity(&out, &build_ghz(n as usize, target_s)?)
}

/// End-to-end pipelines for `N = 2 ..= max_n + 1` at random targets.
pub fn check_pipelines(config: &VerifyConfig) -> CheckResult {
    let mut tally = Tally::new("pipeline-fidelity", config.tol);
    let mut rng = rng_for(config.seed, 7);
    for n in 2..=config.max_n + 1 {
        for _ in 0..config.trials {
            tally.trials += 1;
            let s = rng.gen_range(0.02..0.98);
            let steps = n as usize - 1;
            let pairings: Vec<PairingChoice> = (0..steps).map(|_| PairingChoice::ALL[rng.gen_range(0..4)]).collect();
            let ts: Vec<f64> = (0..steps).map(|_| rng.gen_range(0.05..0.95)).collect();
            let final_t = rng.gen_range(0.05..0.95);
            let heralds: Vec<FusionOutcome> = (0..=steps)
                .map(|_| FusionOutcome::HERALDS[rng.gen_range(0..2)])
                .collect();
            match pipeline_fidelity(n, s, &pairings, &ts, final_t, &heralds) {
                Ok(f) => tally.record((1.0 - f).abs(), || format!("N={n} s={s} {pairings:?}")),
                Err(e) => tally.fail(format!("N={n} s={s} {pairings:?}: {e}")),
            }
        }
    }
    tally.finish()
}

/// Average photons per elementary primate from sampled attempts: every
/// attempt injects two photons, succeeds with probability `1/(2s)`, and a
/// failed attempt hands one photon to the next attempt with the recycling
/// probability.
pub fn sample_elementary_cost(s: f64, trials: usize, rng: &mut ChaCha8Rng) -> f64 {
    let q = elementary_success_prob(s);
    let r = elementary_recycle_prob(s);
    let mut photons = 0u64;
    for _ in 0..trials {
        let mut carried = false;
        loop {
            photons += if carried { 1 } else { 2 };
            let u: f64 = rng.gen();
            if u < q {
                break;
            }
            carried = u < q + r;
        }
    }
    photons as f64 / trials as f64
}

/// Sampled elementary cost against the closed form (relative tolerance).
pub fn check_elementary_monte_carlo(trials: usize, tol: f64, seed: u64) -> CheckResult {
    let mut tally = Tally::new("elementary-cost-monte-carlo", tol);
    let mut rng = rng_for(seed, 8);
    for s in [0.5, 0.6, 0.75, 0.9, 1.0, 0.25] {
        tally.trials += 1;
        let sampled = sample_elementary_cost(s, trials, &mut rng);
        let exact = elementary_cost(s);
        tally.record(((sampled - exact) / exact).abs(), || format!("s={s}: sampled {sampled}, exact {exact}"));
    }
    tally.finish()
}

/// Every battery with the settings used by `primate verify`.
pub fn run_all(config: &VerifyConfig) -> Result<Vec<CheckResult>> {
    config.validate()?;
    Ok(vec![
        check_fusion_circuit(config),
        check_measurement_completeness(config),
        check_fuse_oracle(config),
        check_correction(config),
        check_bleed_oracle(config),
        check_bleed_continuum(config.trials.min(100), 10_000, 1e-3, config.seed),
        check_pipelines(config),
        check_elementary_monte_carlo(200_000, 0.01, config.seed),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small() -> VerifyConfig {
        VerifyConfig {
            trials: 20,
            ..VerifyConfig::default()
        }
    }

    #[test]
    fn balanced_fusion_example() {
        let hom = PrimateParams::elementary(0.5).unwrap();
        let o = fusion_oracle(&hom, &hom, PairingChoice::P14, 0.5).unwrap();
        assert_abs_diff_eq!(o.p_success, 0.3125, epsilon = 1e-12);
        assert_abs_diff_eq!(o.lambda, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(o.s, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn merged_orders() {
        assert_eq!(merged_order(PairingChoice::P23, 1, 1), vec![0, 1, 2, 3]);
        assert_eq!(merged_order(PairingChoice::P14, 1, 1), vec![2, 3, 0, 1]);
        assert_eq!(merged_order(PairingChoice::P13, 1, 1), vec![3, 2, 0, 1]);
        assert_eq!(merged_order(PairingChoice::P24, 1, 1), vec![0, 1, 3, 2]);
    }

    #[test]
    fn batteries_pass_at_default_tolerance() {
        for r in run_all(&small()).unwrap() {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(run_all(&VerifyConfig { trials: 0, ..small() }).is_err());
        assert!(run_all(&VerifyConfig { max_n: 4, ..small() }).is_err());
        assert!(run_all(&VerifyConfig { tol: 0.0, ..small() }).is_err());
    }

    #[test]
    fn bleeding_single_step_exhaustive_pair() {
        let hom = PrimateParams::elementary(0.5).unwrap();
        let schedule = BleedSchedule::new(vec![0.8]).unwrap();
        let o = bleed_oracle(&hom, &hom, BleedPairing::Pairs14And23, &schedule).unwrap();
        let t: f64 = 0.8;
        assert_abs_diff_eq!(o.p_success, 4.0 * t.powi(3) * (1.0 - t), epsilon = 1e-12);
        assert_abs_diff_eq!(o.lambda, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn monte_carlo_elementary_cost() {
        let mut rng = rng_for(7, 0);
        let sampled = sample_elementary_cost(0.75, 200_000, &mut rng);
        assert!((sampled / elementary_cost(0.75) - 1.0).abs() < 0.01);
        assert_eq!(sample_elementary_cost(0.5, 1000, &mut rng), 2.0);
    }
}
