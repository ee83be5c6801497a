use std::cell::{Cell, RefCell};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nelder_mead::{minimize, LocalMinimum};
use super::plan::{evaluate_plan, leaf_coefficients, leaf_count, solve_leaf, GenerationPlan, Method};
use super::report::{CostReport, OptimizerMetadata, SweepPoint};
use crate::chains::{enumerate_star_chains, minimal_length, AdditionChain, DEFAULT_SLACK};
use crate::error::{Error, Result};
use crate::primate::PairingChoice;

/// Transmittances stay inside `[T_MARGIN, 1 − T_MARGIN]` during the search.
pub const T_MARGIN: f64 = 1e-6;

const S_MARGIN: f64 = 1e-12;
const SIMPLEX_STEP: f64 = 0.5;
const LOG_COST_TOLERANCE: f64 = 1e-13;
/// Relative cost difference below which plans count as equally good.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeConfig {
    /// Local searches per candidate (chain, pairings, orientation).
    pub restarts: usize,
    pub seed: u64,
    /// Nelder-Mead iteration cap per local search.
    pub max_iters: u64,
    /// Pin every elementary primate to `s = 1/2`, except the one solved to
    /// hit a target other than 1/2.
    pub fixed_primates: bool,
    /// Chains up to `minimal_length + chain_slack` terms are searched.
    pub chain_slack: usize,
    /// Bleeding only: hold the first unit, the last unit and the final
    /// single-pair bleed at `c = 0`.
    pub pin_boundary_c: bool,
    /// Enumerate every pairing per step instead of one representative per
    /// mirror-equivalence class.
    pub all_pairings: bool,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            restarts: 32,
            seed: 42,
            max_iters: 4000,
            fixed_primates: false,
            chain_slack: DEFAULT_SLACK,
            pin_boundary_c: true,
            all_pairings: false,
        }
    }
}

#[derive(Clone, Debug)]
struct Candidate {
    chain: AdditionChain,
    pairings: Vec<PairingChoice>,
    reversed: bool,
}

/// Search candidates for `(n, target, method)`, in a fixed order.
///
/// Reversing a primate's modes maps `s` to `1 − s` and swaps the pairing
/// labels 14 ↔ 13 and 23 ↔ 24 on that operand, so unless `all_pairings` is
/// set only `P14` and `P13` are tried, and only `P14` when the second operand
/// is a fresh elementary primate (whose `s` is free anyway). Both readings of
/// the output modes are tried.
fn candidates(n: u32, target: f64, method: Method, config: &OptimizeConfig) -> Result<Vec<Candidate>> {
    let max_len = minimal_length(n)? + config.chain_slack;
    let chains = enumerate_star_chains(n, Some(max_len))?;
    let orientations: &[bool] = if target == 0.5 { &[false] } else { &[false, true] };
    let mut out = Vec::new();
    for chain in chains {
        let options: Vec<Vec<PairingChoice>> = chain
            .parents()
            .iter()
            .map(|&(_, q)| {
                if config.all_pairings {
                    match method {
                        Method::Fusion => PairingChoice::ALL.to_vec(),
                        Method::Bleeding => vec![PairingChoice::P14, PairingChoice::P13],
                    }
                } else if q == 0 {
                    vec![PairingChoice::P14]
                } else {
                    vec![PairingChoice::P14, PairingChoice::P13]
                }
            })
            .collect();
        for pairings in cartesian(&options) {
            for &reversed in orientations {
                out.push(Candidate {
                    chain: chain.clone(),
                    pairings: pairings.clone(),
                    reversed,
                });
            }
        }
    }
    Ok(out)
}

fn cartesian(options: &[Vec<PairingChoice>]) -> Vec<Vec<PairingChoice>> {
    options.iter().fold(vec![Vec::new()], |acc, opts| {
        acc.iter()
            .flat_map(|prefix| {
                opts.iter().map(move |&o| {
                    let mut v = prefix.clone();
                    v.push(o);
                    v
                })
            })
            .collect()
    })
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Slot {
    Transmittance,
    Retention,
    Entanglement,
}

impl Slot {
    fn decode(self, u: f64) -> f64 {
        match self {
            Slot::Transmittance => T_MARGIN + (1.0 - 2.0 * T_MARGIN) * logistic(u),
            Slot::Retention => logistic(u),
            Slot::Entanglement => logistic(u).clamp(S_MARGIN, 1.0 - S_MARGIN),
        }
    }

    fn default_start(self) -> f64 {
        match self {
            Slot::Transmittance | Slot::Entanglement => 0.0,
            Slot::Retention => -2.5,
        }
    }

    fn random_start(self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Slot::Transmittance | Slot::Entanglement => rng.gen_range(-3.0..3.0),
            Slot::Retention => rng.gen_range(-6.0..1.0),
        }
    }
}

/// Where each coordinate of the search vector lands in the plan.
#[derive(Clone, Copy, Debug)]
enum Target {
    Step(usize),
    Final,
    Leaf(usize),
}

/// Continuous parameterization of one candidate.
struct Layout {
    template: GenerationPlan,
    coords: Vec<(Target, Slot)>,
    coefficients: Vec<f64>,
    solved_leaf: Option<usize>,
    /// Target `s` of the composition before output reversal.
    inner_target: f64,
}

impl Layout {
    fn new(cand: &Candidate, target: f64, method: Method, config: &OptimizeConfig, free_leaves: bool) -> Result<Self> {
        let steps = cand.chain.steps();
        let leaves = leaf_count(&cand.chain);
        let coefficients = leaf_coefficients(&cand.chain, &cand.pairings);
        let inner_target = if cand.reversed { 1.0 - target } else { target };
        // Prefer a leaf entering the output once, and the latest such leaf.
        let solved_leaf = (0..leaves)
            .rev()
            .filter(|&l| coefficients[l] != 0.0)
            .min_by(|&a, &b| coefficients[a].abs().total_cmp(&coefficients[b].abs()));
        if solved_leaf.is_none() && inner_target != 0.5 {
            return Err(Error::Infeasible("output s is fixed at 1/2 by the pairings".into()));
        }

        let mut coords = Vec::new();
        let (step_slot, default_param) = match method {
            Method::Fusion => (Slot::Transmittance, 0.5),
            Method::Bleeding => (Slot::Retention, 0.0),
        };
        for k in 0..steps {
            let pinned = method == Method::Bleeding && config.pin_boundary_c && (k == 0 || k + 1 == steps);
            if !pinned {
                coords.push((Target::Step(k), step_slot));
            }
        }
        if !(method == Method::Bleeding && config.pin_boundary_c) {
            coords.push((Target::Final, step_slot));
        }
        if free_leaves {
            for l in 0..leaves {
                if Some(l) != solved_leaf {
                    coords.push((Target::Leaf(l), Slot::Entanglement));
                }
            }
        }
        let template = GenerationPlan {
            method,
            chain: cand.chain.clone(),
            pairings: cand.pairings.clone(),
            step_params: vec![default_param; steps],
            final_param: default_param,
            leaf_s: vec![0.5; leaves],
            target_s: target,
            reversed_output: cand.reversed,
            outcome: None,
        };
        Ok(Self {
            template,
            coords,
            coefficients,
            solved_leaf,
            inner_target,
        })
    }

    fn dim(&self) -> usize {
        self.coords.len()
    }

    fn apply(&self, u: &[f64], plan: &mut GenerationPlan) -> Result<()> {
        for (&(target, slot), &x) in self.coords.iter().zip(u) {
            let v = slot.decode(x);
            match target {
                Target::Step(k) => plan.step_params[k] = v,
                Target::Final => plan.final_param = v,
                Target::Leaf(l) => plan.leaf_s[l] = v,
            }
        }
        if let Some(l) = self.solved_leaf {
            solve_leaf(&self.coefficients, &mut plan.leaf_s, l, self.inner_target)?;
        }
        Ok(())
    }

    fn plan_at(&self, u: &[f64]) -> Result<GenerationPlan> {
        let mut plan = self.template.clone();
        self.apply(u, &mut plan)?;
        plan.evaluated()
    }

    fn default_start(&self) -> Vec<f64> {
        self.coords.iter().map(|(_, s)| s.default_start()).collect()
    }

    fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.coords.iter().map(|(_, s)| s.random_start(rng)).collect()
    }
}

/// Best point of one candidate plus search bookkeeping.
struct CandidateOutcome {
    best: Option<(f64, Vec<f64>)>,
    evaluations: u64,
    iterations: u64,
    converged: bool,
}

/// Multi-start Nelder-Mead on `ln ν`. The best point ever evaluated is kept,
/// so the result is never worse than any evaluated plan.
fn multistart(layout: &Layout, config: &OptimizeConfig, stream: u64, first: Option<Vec<f64>>) -> CandidateOutcome {
    let scratch = RefCell::new(layout.template.clone());
    let evaluations = Cell::new(0u64);
    let best: RefCell<Option<(f64, Vec<f64>)>> = RefCell::new(None);
    let objective = |u: &[f64]| -> f64 {
        evaluations.set(evaluations.get() + 1);
        let mut plan = scratch.borrow_mut();
        let nu = layout
            .apply(u, &mut plan)
            .and_then(|()| evaluate_plan(&plan))
            .map(|o| o.nu);
        match nu {
            Ok(nu) => {
                let mut b = best.borrow_mut();
                if b.as_ref().is_none_or(|(v, _)| nu < *v) {
                    *b = Some((nu, u.to_vec()));
                }
                nu.ln()
            }
            Err(_) => f64::MAX,
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let mut iterations = 0;
    let mut best_local: Option<LocalMinimum> = None;
    let restarts = config.restarts.max(1);
    let dim = layout.dim();
    for r in 0..restarts {
        let x0 = match (r, &first) {
            (0, Some(x)) => x.clone(),
            (0, None) => layout.default_start(),
            _ => layout.random_start(&mut rng),
        };
        let m = local_search(&objective, &x0, config.max_iters);
        iterations += m.iterations;
        if best_local.as_ref().is_none_or(|b| m.f < b.f) {
            best_local = Some(m);
        }
        if dim == 0 {
            break;
        }
    }
    CandidateOutcome {
        best: best.into_inner(),
        evaluations: evaluations.get(),
        iterations,
        converged: best_local.is_some_and(|m| m.converged),
    }
}

/// Nelder-Mead followed by one restart from its result, which recovers
/// from premature simplex collapse.
fn local_search<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], max_iters: u64) -> LocalMinimum {
    let first = minimize(f, x0, SIMPLEX_STEP, max_iters, LOG_COST_TOLERANCE);
    let second = minimize(f, &first.x, SIMPLEX_STEP, max_iters, LOG_COST_TOLERANCE);
    let iterations = first.iterations + second.iterations;
    let mut m = if second.f <= first.f { second } else { first };
    m.iterations = iterations;
    m
}

struct Found {
    plan: GenerationPlan,
    nu: f64,
    evaluations: u64,
    iterations: u64,
    converged: bool,
}

fn search_candidate(cand: &Candidate, index: usize, n: u32, target: f64, method: Method, config: &OptimizeConfig) -> Option<Found> {
    let stream = 2 * index as u64;
    let fixed = Layout::new(cand, target, method, config, false).ok()?;
    let fixed_run = multistart(&fixed, config, stream, None);
    let (layout, run) = if config.fixed_primates {
        (fixed, fixed_run)
    } else {
        // Start the free-primate search from the pinned optimum so it can
        // only improve on it.
        let free = Layout::new(cand, target, method, config, true).ok()?;
        let warm = fixed_run.best.as_ref().map(|(_, u)| {
            let mut x = u.clone();
            x.resize(free.dim(), 0.0);
            x
        });
        let mut run = multistart(&free, config, stream + 1, warm);
        run.evaluations += fixed_run.evaluations;
        run.iterations += fixed_run.iterations;
        (free, run)
    };
    let (_, u) = run.best?;
    let plan = layout.plan_at(&u).ok()?;
    debug_assert_eq!(plan.target_n(), n);
    let nu = plan.outcome.as_ref()?.nu;
    Some(Found {
        plan,
        nu,
        evaluations: run.evaluations,
        iterations: run.iterations,
        converged: run.converged,
    })
}

/// `true` if `a` should replace `b` as the reported optimum.
fn better(a: &Found, b: &Found) -> bool {
    if a.nu < b.nu * (1.0 - TIE_TOLERANCE) {
        return true;
    }
    if a.nu > b.nu * (1.0 + TIE_TOLERANCE) {
        return false;
    }
    let key = |f: &Found| (f.plan.chain.len(), serde_json::to_string(&f.plan).unwrap_or_default());
    key(a) < key(b)
}

/// Cheapest plan for `|GHZ_N(s)>` over every enumerated candidate.
pub fn optimize_plan(n: u32, target_s: f64, method: Method, config: &OptimizeConfig) -> Result<CostReport> {
    if n < 2 {
        return Err(Error::OutOfRange {
            name: "N",
            value: n as f64,
            range: "N >= 2",
        });
    }
    if !(target_s > 0.0 && target_s < 1.0) {
        return Err(Error::OutOfRange {
            name: "target s",
            value: target_s,
            range: "(0, 1); s = 0 and s = 1 are degenerate targets",
        });
    }
    let cands = candidates(n, target_s, method, config)?;
    let found: Vec<Option<Found>> = cands
        .par_iter()
        .enumerate()
        .map(|(i, c)| search_candidate(c, i, n, target_s, method, config))
        .collect();

    let evaluations = found.iter().flatten().map(|f| f.evaluations).sum();
    let iterations = found.iter().flatten().map(|f| f.iterations).sum();
    let min_nu_seen = found.iter().flatten().map(|f| f.nu).fold(f64::INFINITY, f64::min);
    let mut best: Option<Found> = None;
    for f in found.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| better(&f, b)) {
            best = Some(f);
        }
    }
    let best = best.ok_or_else(|| Error::Infeasible(format!("no feasible plan for N = {n}, s = {target_s}")))?;
    let outcome = best.plan.outcome.expect("evaluated");
    Ok(CostReport::new(
        n,
        target_s,
        method,
        best.plan,
        outcome,
        OptimizerMetadata {
            restarts: config.restarts,
            seed: config.seed,
            max_iters: config.max_iters,
            fixed_primates: config.fixed_primates,
            chain_slack: config.chain_slack,
            pin_boundary_c: config.pin_boundary_c,
            all_pairings: config.all_pairings,
            candidates: cands.len(),
            evaluations,
            iterations,
            converged: best.converged,
            min_nu_seen,
        },
    ))
}

/// One report per `(N, s)` grid point; failures are kept per point.
pub fn sweep(qubits: &[u32], s_grid: &[f64], method: Method, config: &OptimizeConfig) -> Result<Vec<SweepPoint>> {
    if qubits.is_empty() || s_grid.is_empty() {
        return Err(Error::InvalidPlan("sweep grids must be non-empty".into()));
    }
    Ok(qubits
        .iter()
        .flat_map(|&n| s_grid.iter().map(move |&s| (n, s)))
        .map(|(n, s)| SweepPoint {
            qubits: n,
            target_s: s,
            method,
            result: optimize_plan(n, s, method, config).map_err(|e| e.to_string()),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quick() -> OptimizeConfig {
        OptimizeConfig {
            restarts: 4,
            ..OptimizeConfig::default()
        }
    }

    #[test]
    fn two_qubit_fusion() {
        let r = optimize_plan(2, 0.5, Method::Fusion, &quick()).unwrap();
        assert_abs_diff_eq!(r.nu, 32.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.single_pass_prob, 0.125, epsilon = 1e-8);
    }

    #[test]
    fn two_qubit_bleeding() {
        let r = optimize_plan(2, 0.5, Method::Bleeding, &quick()).unwrap();
        assert_abs_diff_eq!(r.nu, 8.0, epsilon = 1e-9);
    }

    #[test]
    fn rejects_degenerate_targets() {
        assert!(optimize_plan(3, 0.0, Method::Fusion, &quick()).is_err());
        assert!(optimize_plan(3, 1.0, Method::Fusion, &quick()).is_err());
        assert!(optimize_plan(1, 0.5, Method::Fusion, &quick()).is_err());
    }

    #[test]
    fn deterministic_reports() {
        let a = optimize_plan(4, 0.3, Method::Fusion, &quick()).unwrap();
        let b = optimize_plan(4, 0.3, Method::Fusion, &quick()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn reduced_pairings_match_full_enumeration() {
        for (n, s) in [(3, 0.5), (4, 0.3), (5, 0.5), (5, 0.8)] {
            for method in [Method::Fusion, Method::Bleeding] {
                let reduced = optimize_plan(n, s, method, &quick()).unwrap();
                let full = optimize_plan(n, s, method, &OptimizeConfig { all_pairings: true, ..quick() }).unwrap();
                assert!(
                    (reduced.nu - full.nu).abs() <= 1e-6 * full.nu,
                    "N={n} s={s} {method}: reduced {} full {}",
                    reduced.nu,
                    full.nu
                );
            }
        }
    }

    #[test]
    fn cartesian_product_order() {
        use PairingChoice::*;
        let c = cartesian(&[vec![P14], vec![P14, P13]]);
        assert_eq!(c, vec![vec![P14, P14], vec![P14, P13]]);
    }
}
