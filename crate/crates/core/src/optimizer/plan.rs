use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bleeding::{bleed_final, bleed_fuse_continuum, BleedPairing};
use crate::chains::AdditionChain;
use crate::error::{Error, Result};
use crate::primate::{
    elementary_success_prob, final_fusion, fuse, log_ratio, FusionResult, PairingChoice, PrimateParams,
};

/// Tolerance on the composed `s` of a plan.
pub const TARGET_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fusion,
    Bleeding,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Fusion => "fusion",
            Method::Bleeding => "bleeding",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fusion" => Ok(Method::Fusion),
            "bleeding" => Ok(Method::Bleeding),
            other => Err(Error::InvalidPlan(format!("unknown method {other:?}"))),
        }
    }
}

/// A complete recipe for one `|GHZ_N(s)>`.
///
/// Step `k` builds chain term `k + 1` from term `k` (operand `a`) and term
/// `j` (operand `b`). Whenever an operand is term 0 a fresh elementary primate
/// is used; `leaf_s` lists their `s` values in order of use. For bleeding,
/// `P14`/`P23` stand for the 14&23 unit and `P13`/`P24` for the 13&24 unit, and
/// the step and final parameters are retentions `c` instead of transmittances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationPlan {
    pub method: Method,
    pub chain: AdditionChain,
    pub pairings: Vec<PairingChoice>,
    pub step_params: Vec<f64>,
    pub final_param: f64,
    pub leaf_s: Vec<f64>,
    pub target_s: f64,
    /// The output modes are read in reverse, turning `s` into `1 − s`.
    #[serde(default)]
    pub reversed_output: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<PlanOutcome>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome {
    pub final_primate: PrimateParams,
    pub nu: f64,
    pub single_pass_prob: f64,
}

impl GenerationPlan {
    /// Evaluates the plan and stores the outcome.
    pub fn evaluated(mut self) -> Result<Self> {
        self.outcome = Some(evaluate_plan(&self)?);
        Ok(self)
    }

    pub fn target_n(&self) -> u32 {
        self.chain.target()
    }
}

/// Number of elementary primates consumed directly by chain steps.
pub fn leaf_count(chain: &AdditionChain) -> usize {
    chain
        .parents()
        .iter()
        .map(|&(p, q)| usize::from(p == 0) + usize::from(q == 0))
        .sum()
}

/// Coefficients `c_l` with `ln((1−s)/s) = Σ_l c_l ln((1−s_l)/s_l)` for the
/// final primate, one per leaf.
pub fn leaf_coefficients(chain: &AdditionChain, pairings: &[PairingChoice]) -> Vec<f64> {
    let leaves = leaf_count(chain);
    let mut terms: Vec<Vec<f64>> = vec![Vec::new(); chain.len()];
    let mut next = 0;
    let operand = |idx: usize, terms: &Vec<Vec<f64>>, next: &mut usize| {
        if idx == 0 {
            let mut v = vec![0.0; leaves];
            v[*next] = 1.0;
            *next += 1;
            v
        } else {
            terms[idx].clone()
        }
    };
    for (step, &(p, q)) in chain.parents().iter().enumerate() {
        let a = operand(p, &terms, &mut next);
        let b = operand(q, &terms, &mut next);
        let sign = if pairings[step].is_product() { 1.0 } else { -1.0 };
        terms[step + 1] = a.iter().zip(&b).map(|(x, y)| x + sign * y).collect();
    }
    terms.pop().unwrap_or_default()
}

/// Fills in `leaf_s[solve]` so the composed `s` equals `target` (before any
/// output reversal). Returns an error when the leaf does not influence the
/// result or the required value is not interior.
pub fn solve_leaf(coefficients: &[f64], leaf_s: &mut [f64], solve: usize, target: f64) -> Result<()> {
    let c = coefficients[solve];
    if c == 0.0 {
        return Err(Error::Infeasible(format!("leaf {solve} does not influence the output")));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Infeasible(format!("target s = {target} is degenerate")));
    }
    let mut rest = log_ratio(target);
    for (l, (&cl, &s)) in coefficients.iter().zip(leaf_s.iter()).enumerate() {
        if l != solve && cl != 0.0 {
            rest -= cl * log_ratio(s);
        }
    }
    let s = 1.0 / (1.0 + (rest / c).exp());
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Infeasible(format!(
            "leaf {solve} would need s outside (0, 1)"
        )));
    }
    leaf_s[solve] = s;
    Ok(())
}

fn check_structure(plan: &GenerationPlan) -> Result<()> {
    plan.chain.validate()?;
    let steps = plan.chain.steps();
    if steps == 0 {
        return Err(Error::InvalidPlan("a plan needs at least one fusion step".into()));
    }
    if plan.pairings.len() != steps || plan.step_params.len() != steps {
        return Err(Error::InvalidPlan(format!(
            "chain has {steps} steps but plan lists {} pairings and {} parameters",
            plan.pairings.len(),
            plan.step_params.len()
        )));
    }
    let leaves = leaf_count(&plan.chain);
    if plan.leaf_s.len() != leaves {
        return Err(Error::InvalidPlan(format!(
            "chain uses {leaves} elementary primates but plan lists {}",
            plan.leaf_s.len()
        )));
    }
    if !(0.0..=1.0).contains(&plan.target_s) {
        return Err(Error::OutOfRange {
            name: "target s",
            value: plan.target_s,
            range: "[0, 1]",
        });
    }
    Ok(())
}

fn combine(method: Method, a: &PrimateParams, b: &PrimateParams, pairing: PairingChoice, param: f64) -> Result<FusionResult> {
    match method {
        Method::Fusion => fuse(a, b, pairing, param),
        Method::Bleeding => {
            let unit = if pairing.is_product() {
                BleedPairing::Pairs14And23
            } else {
                BleedPairing::Pairs13And24
            };
            bleed_fuse_continuum(a, b, unit, param)
        }
    }
}

/// Photon cost `ν` and single-pass probability of a plan.
///
/// `ν` follows the bottom-up recursion `ν′ = (ν_a + ν_b)/p` with elementary
/// leaves, divided by the final-step success probability. The single-pass
/// probability multiplies every elementary, intermediate and final success
/// probability over the fully expanded fusion tree.
pub fn evaluate_plan(plan: &GenerationPlan) -> Result<PlanOutcome> {
    check_structure(plan)?;
    let mult = plan.chain.multiplicities();
    let mut terms: Vec<Option<PrimateParams>> = vec![None; plan.chain.len()];
    let mut leaves = plan.leaf_s.iter();
    let mut log_pass = 0.0;
    for (step, &(p, q)) in plan.chain.parents().iter().enumerate() {
        let uses = mult[step + 1] as f64;
        let mut operand = |idx: usize| -> Result<PrimateParams> {
            if idx == 0 {
                let s = *leaves.next().expect("leaf count checked");
                log_pass += uses * elementary_success_prob(s).ln();
                PrimateParams::elementary(s)
            } else {
                Ok(terms[idx].expect("parents precede children"))
            }
        };
        let a = operand(p)?;
        let b = operand(q)?;
        let r = combine(plan.method, &a, &b, plan.pairings[step], plan.step_params[step])?;
        log_pass += uses * r.p_success.ln();
        terms[step + 1] = Some(r.merged);
    }
    let last = terms.pop().flatten().expect("at least one step");
    let p_final = match plan.method {
        Method::Fusion => final_fusion(&last, plan.final_param)?.0,
        Method::Bleeding => bleed_final(&last, plan.final_param)?,
    };
    if p_final <= 0.0 {
        return Err(Error::ZeroProbability);
    }
    let s_out = if plan.reversed_output { 1.0 - last.s } else { last.s };
    if (s_out - plan.target_s).abs() > TARGET_TOLERANCE {
        return Err(Error::InvalidPlan(format!(
            "plan composes s = {s_out}, target is {}",
            plan.target_s
        )));
    }
    let nu = last.nu / p_final;
    if !nu.is_finite() {
        return Err(Error::ZeroProbability);
    }
    Ok(PlanOutcome {
        final_primate: last,
        nu,
        single_pass_prob: (log_pass + p_final.ln()).exp().min(1.0),
    })
}

/// Exhaustive bleeding of balanced elementary primates along `1, 2, ..., N`
/// with every retention at 0.
pub fn exhaustive_bleeding_plan(n: u32) -> Result<GenerationPlan> {
    if n < 2 {
        return Err(Error::OutOfRange {
            name: "N",
            value: n as f64,
            range: "N >= 2",
        });
    }
    let chain = AdditionChain::linear(n)?;
    let steps = chain.steps();
    let leaves = leaf_count(&chain);
    GenerationPlan {
        method: Method::Bleeding,
        chain,
        pairings: vec![PairingChoice::P14; steps],
        step_params: vec![0.0; steps],
        final_param: 0.0,
        leaf_s: vec![0.5; leaves],
        target_s: 0.5,
        reversed_output: false,
        outcome: None,
    }
    .evaluated()
}

/// Reference single-pass probabilities: the fusion maximum `1/2^(2N−1)` and
/// the exhaustive-bleeding value `1/2^(N−1)`.
pub fn single_pass_reference(n: u32, method: Method) -> f64 {
    let exponent = match method {
        Method::Fusion => 2 * n as i32 - 1,
        Method::Bleeding => n as i32 - 1,
    };
    0.5f64.powi(exponent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fusion_plan(terms: Vec<u32>, t: f64) -> GenerationPlan {
        let chain = AdditionChain::from_terms(terms).unwrap();
        let steps = chain.steps();
        let leaves = leaf_count(&chain);
        GenerationPlan {
            method: Method::Fusion,
            chain,
            pairings: vec![PairingChoice::P14; steps],
            step_params: vec![t; steps],
            final_param: t,
            leaf_s: vec![0.5; leaves],
            target_s: 0.5,
            reversed_output: false,
            outcome: None,
        }
    }

    #[test]
    fn fusion_two_qubits() {
        let out = evaluate_plan(&fusion_plan(vec![1, 2], 0.5)).unwrap();
        assert_abs_diff_eq!(out.nu, 32.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.single_pass_prob, 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(single_pass_reference(2, Method::Fusion), 0.125, epsilon = 0.0);
    }

    #[test]
    fn bleeding_two_qubits() {
        let plan = exhaustive_bleeding_plan(2).unwrap();
        let out = plan.outcome.unwrap();
        assert_abs_diff_eq!(out.nu, 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.single_pass_prob, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn exhaustive_bleeding_baseline() {
        for n in 2..=12u32 {
            let out = exhaustive_bleeding_plan(n).unwrap().outcome.unwrap();
            let expected = n as f64 * 2f64.powi(n as i32);
            assert_abs_diff_eq!(out.nu, expected, epsilon = 1e-9 * expected);
            assert_abs_diff_eq!(out.single_pass_prob, single_pass_reference(n, Method::Bleeding), epsilon = 1e-15);
        }
        assert_abs_diff_eq!(single_pass_reference(4, Method::Bleeding), 0.125, epsilon = 0.0);
    }

    #[test]
    fn doubling_chain_beats_the_baseline_at_eight() {
        let chain = AdditionChain::from_terms(vec![1, 2, 4, 8]).unwrap();
        let plan = GenerationPlan {
            method: Method::Bleeding,
            pairings: vec![PairingChoice::P14; 3],
            step_params: vec![0.0; 3],
            final_param: 0.0,
            leaf_s: vec![0.5; leaf_count(&chain)],
            chain,
            target_s: 0.5,
            reversed_output: false,
            outcome: None,
        };
        assert_abs_diff_eq!(evaluate_plan(&plan).unwrap().nu, 1536.0, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_target_is_evaluated() {
        let mut plan = fusion_plan(vec![1, 2, 3], 0.5);
        plan.leaf_s = vec![1.0; 3];
        plan.target_s = 1.0;
        let out = evaluate_plan(&plan).unwrap();
        assert!(out.nu > 3.0);
    }

    #[test]
    fn structural_errors() {
        let mut plan = fusion_plan(vec![1, 2, 3], 0.5);
        plan.leaf_s.pop();
        assert!(evaluate_plan(&plan).is_err());
        let mut plan = fusion_plan(vec![1, 2, 3], 0.5);
        plan.step_params[0] = 1.0;
        assert!(matches!(evaluate_plan(&plan), Err(Error::OutOfRange { .. })));
        let mut plan = fusion_plan(vec![1, 2, 3], 0.5);
        plan.target_s = 0.4;
        assert!(matches!(evaluate_plan(&plan), Err(Error::InvalidPlan(_))));
        plan.reversed_output = true;
        plan.target_s = 0.5;
        assert!(evaluate_plan(&plan).is_ok());
    }

    #[test]
    fn leaf_coefficients_and_solving() {
        use PairingChoice::*;
        let chain = AdditionChain::from_terms(vec![1, 2, 4]).unwrap();
        assert_eq!(leaf_coefficients(&chain, &[P14, P14]), vec![2.0, 2.0]);
        assert_eq!(leaf_coefficients(&chain, &[P14, P13]), vec![0.0, 0.0]);
        let chain = AdditionChain::from_terms(vec![1, 2, 3, 5]).unwrap();
        let coeff = leaf_coefficients(&chain, &[P14, P13, P23]);
        assert_eq!(coeff, vec![2.0, 2.0, -1.0]);

        let mut s = vec![0.3, 0.6, 0.5];
        solve_leaf(&coeff, &mut s, 2, 0.42).unwrap();
        let plan = GenerationPlan {
            method: Method::Fusion,
            chain,
            pairings: vec![P14, P13, P23],
            step_params: vec![0.4, 0.5, 0.6],
            final_param: 0.5,
            leaf_s: s,
            target_s: 0.42,
            reversed_output: false,
            outcome: None,
        };
        assert!(evaluate_plan(&plan).is_ok());
        assert!(solve_leaf(&[0.0, 1.0], &mut [0.5, 0.5], 0, 0.3).is_err());
    }
}
