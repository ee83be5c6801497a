//! Closed-form primate generation and pairwise fusion.
//!
//! Pairing labels follow the outer-mode numbering of two operands `a` and
//! `b`: modes 1, 2 are the left and right outer modes of `a`, modes 3, 4 those
//! of `b`. `P14` fuses `a`'s left mode with `b`'s right mode, and so on.

use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, check_unit, Error, Result};

/// Below this distance from 0 or 1 the elementary cost uses its limit value.
const ELEMENTARY_EDGE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimateParams {
    pub n: u32,
    pub lambda: f64,
    pub s: f64,
    pub nu: f64,
}

impl PrimateParams {
    pub fn new(n: u32, lambda: f64, s: f64, nu: f64) -> Result<Self> {
        let p = Self { n, lambda, s, nu };
        p.validate()?;
        Ok(p)
    }

    /// `π^(1)(1, s)` with its elementary generation cost.
    pub fn elementary(s: f64) -> Result<Self> {
        check_unit("s", s)?;
        Ok(Self {
            n: 1,
            lambda: 1.0,
            s,
            nu: elementary_cost(s),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::OutOfRange {
                name: "n",
                value: 0.0,
                range: "n >= 1",
            });
        }
        check_unit("lambda", self.lambda)?;
        check_unit("s", self.s)?;
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(Error::OutOfRange {
                name: "nu",
                value: self.nu,
                range: "finite and > 0",
            });
        }
        Ok(())
    }

    /// Same primate with its modes listed in reverse order.
    pub fn mirrored(&self) -> Self {
        Self {
            s: 1.0 - self.s,
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PairingChoice {
    P14,
    P23,
    P13,
    P24,
}

impl PairingChoice {
    pub const ALL: [PairingChoice; 4] = [Self::P14, Self::P23, Self::P13, Self::P24];

    /// `true` for 14/23, whose `s′` rule is multiplicative in `(1−s)/s`.
    pub fn is_product(self) -> bool {
        matches!(self, Self::P14 | Self::P23)
    }

    /// Whether the fused mode of each operand is its left outer mode.
    pub fn fused_sides(self) -> (Side, Side) {
        match self {
            Self::P14 => (Side::Left, Side::Right),
            Self::P23 => (Side::Right, Side::Left),
            Self::P13 => (Side::Left, Side::Left),
            Self::P24 => (Side::Right, Side::Right),
        }
    }

    /// Probabilities that the fused mode of `a` and of `b` carries the pair.
    fn occupations(self, sa: f64, sb: f64) -> (f64, f64) {
        let side = |side: Side, s: f64| match side {
            Side::Left => s,
            Side::Right => 1.0 - s,
        };
        let (x, y) = self.fused_sides();
        (side(x, sa), side(y, sb))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionResult {
    pub merged: PrimateParams,
    pub p_success: f64,
}

/// Average photon cost `ν^(1)(s)` of one elementary primate, recycled photon
/// credited.
pub fn elementary_cost(s: f64) -> f64 {
    let s = s.max(1.0 - s);
    if s > 1.0 - ELEMENTARY_EDGE {
        return 4.0;
    }
    4.0 * s - 2.0 * (1.0 - s).sqrt() * (s.sqrt() - (1.0 - s).sqrt())
}

/// Per-attempt success probability `1/(2 max(s, 1−s))`.
pub fn elementary_success_prob(s: f64) -> f64 {
    1.0 / (2.0 * s.max(1.0 - s))
}

/// Per-attempt probability that a failed attempt leaves one photon that can be
/// recycled into the next attempt.
pub fn elementary_recycle_prob(s: f64) -> f64 {
    let s = s.max(1.0 - s);
    let r = ((1.0 - s) / s).sqrt();
    r * (1.0 - r)
}

/// Entanglement update and its normalization `K` (the probability that the
/// two useful components combine into a useful component).
pub fn merged_entanglement(sa: f64, sb: f64, pairing: PairingChoice) -> (f64, f64) {
    let (num, k) = if pairing.is_product() {
        (sa * sb, sa * sb + (1.0 - sa) * (1.0 - sb))
    } else {
        (sa * (1.0 - sb), sa * (1.0 - sb) + (1.0 - sa) * sb)
    };
    // K = 0 only when the useful parts annihilate entirely; λ′ is then 0 and
    // s′ carries no information.
    let s = if k > 0.0 { (num / k).clamp(0.0, 1.0) } else { 0.5 };
    (s, k)
}

/// Success probability (both single-photon heralds pooled) and `λ′` of one
/// fusion unit, without cost bookkeeping.
pub fn fusion_weights(a: &PrimateParams, b: &PrimateParams, pairing: PairingChoice, t: f64) -> (f64, f64, f64) {
    let (x1, x2) = pairing.occupations(a.s, b.s);
    let g = 2.0 * t * (1.0 - t);
    let p = g * (x1 * a.lambda + x2 * b.lambda - 2.0 * x1 * x2 * (1.0 - t * t) * a.lambda * b.lambda);
    let (s, k) = merged_entanglement(a.s, b.s, pairing);
    let lambda = if p > 0.0 {
        (g * a.lambda * b.lambda * k / p).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p.clamp(0.0, 1.0), lambda, s)
}

/// Fuses two primates through one fusion unit of transmittance `t`.
pub fn fuse(a: &PrimateParams, b: &PrimateParams, pairing: PairingChoice, t: f64) -> Result<FusionResult> {
    check_open_unit("transmittance", t)?;
    a.validate()?;
    b.validate()?;
    let (p, lambda, s) = fusion_weights(a, b, pairing, t);
    if p <= 0.0 {
        return Err(Error::ZeroProbability);
    }
    Ok(FusionResult {
        merged: PrimateParams {
            n: a.n + b.n,
            lambda,
            s,
            nu: (a.nu + b.nu) / p,
        },
        p_success: p,
    })
}

/// Final fusion turning a size-`N` primate into `|GHZ_N(s)>`: returns the
/// success probability `2t(1−t)λ` and the resulting `s`.
pub fn final_fusion(p: &PrimateParams, t: f64) -> Result<(f64, f64)> {
    check_open_unit("transmittance", t)?;
    p.validate()?;
    Ok((2.0 * t * (1.0 - t) * p.lambda, p.s))
}

/// Completes a left-fold `s` assignment.
///
/// Operand 0 is combined with operand 1 under `pairings[0]`, the result with
/// operand 2 under `pairings[1]`, and so on. `known_s` has one entry per
/// operand (`pairings.len() + 1`) and exactly one `None`, which is solved for
/// so the fold lands on `target_s`.
pub fn s_chain_solve(target_s: f64, pairings: &[PairingChoice], known_s: &[Option<f64>]) -> Result<Vec<f64>> {
    if known_s.len() != pairings.len() + 1 {
        return Err(Error::DimensionMismatch {
            expected: pairings.len() + 1,
            got: known_s.len(),
        });
    }
    let unknown: Vec<usize> = (0..known_s.len()).filter(|&k| known_s[k].is_none()).collect();
    if unknown.len() != 1 {
        return Err(Error::Unsolvable(format!(
            "expected exactly one unknown s, found {}",
            unknown.len()
        )));
    }
    check_unit("target s", target_s)?;
    if target_s <= 0.0 || target_s >= 1.0 {
        return Err(Error::Unsolvable(format!(
            "target s = {target_s} cannot be reached from interior operands"
        )));
    }
    let signs = fold_signs(pairings);
    // log((1−s′)/s′) = Σ_k sign_k log((1−s_k)/s_k)
    let mut rest = log_ratio(target_s);
    for (k, s) in known_s.iter().enumerate() {
        if let Some(s) = *s {
            check_unit("s", s)?;
            if s <= 0.0 || s >= 1.0 {
                return Err(Error::Unsolvable(format!("operand {k} has degenerate s = {s}")));
            }
            rest -= signs[k] * log_ratio(s);
        }
    }
    let u = unknown[0];
    let solved = 1.0 / (1.0 + (signs[u] * rest).exp());
    if !(solved > 0.0 && solved < 1.0) {
        return Err(Error::Unsolvable(format!(
            "required s for operand {u} is not interior"
        )));
    }
    Ok(known_s.iter().map(|s| s.unwrap_or(solved)).collect())
}

/// Sign of each operand's log-ratio in a left fold.
fn fold_signs(pairings: &[PairingChoice]) -> Vec<f64> {
    std::iter::once(1.0)
        .chain(pairings.iter().map(|p| if p.is_product() { 1.0 } else { -1.0 }))
        .collect()
}

/// `ln((1−s)/s)`
pub fn log_ratio(s: f64) -> f64 {
    (1.0 - s).ln() - s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn hom() -> PrimateParams {
        PrimateParams::elementary(0.5).unwrap()
    }

    #[test]
    fn elementary_values() {
        assert_eq!(elementary_cost(0.5), 2.0);
        assert_eq!(elementary_cost(1.0), 4.0);
        assert_eq!(elementary_cost(0.0), 4.0);
        assert_abs_diff_eq!(elementary_cost(1.0 - 1e-12), 4.0, epsilon = 1e-12);
        assert_eq!(elementary_success_prob(0.5), 1.0);
        assert_eq!(elementary_success_prob(1.0), 0.5);
        assert_abs_diff_eq!(elementary_success_prob(0.25), 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(elementary_recycle_prob(0.5), 0.0);
        assert_eq!(elementary_recycle_prob(1.0), 0.0);
    }

    #[test]
    fn elementary_cost_matches_attempt_accounting() {
        // Each attempt spends two fresh photons less one recycled photon.
        for k in 0..=50 {
            let s = 0.5 + 0.01 * k as f64;
            let q = elementary_success_prob(s);
            let r = elementary_recycle_prob(s);
            assert_abs_diff_eq!(elementary_cost(s), (2.0 - r) / q, epsilon = 1e-12);
        }
    }

    #[test]
    fn fuse_two_balanced_elementary() {
        let r = fuse(&hom(), &hom(), PairingChoice::P14, 0.5).unwrap();
        assert_abs_diff_eq!(r.p_success, 0.3125, epsilon = 1e-15);
        assert_abs_diff_eq!(r.merged.lambda, 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(r.merged.s, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.merged.nu, 12.8, epsilon = 1e-12);
        assert_eq!(r.merged.n, 2);
    }

    #[test]
    fn fuse_rejects_boundary_transmittance() {
        assert!(fuse(&hom(), &hom(), PairingChoice::P14, 0.0).is_err());
        assert!(fuse(&hom(), &hom(), PairingChoice::P14, 1.0).is_err());
        let tiny = fuse(&hom(), &hom(), PairingChoice::P14, 1e-9).unwrap();
        assert!(tiny.p_success < 1e-8);
    }

    #[test]
    fn final_fusion_values() {
        let mut p = hom();
        assert_eq!(final_fusion(&p, 0.5).unwrap(), (0.5, 0.5));
        p.lambda = 0.8;
        assert_abs_diff_eq!(final_fusion(&p, 0.5).unwrap().0, 0.4, epsilon = 1e-15);
        for lambda in [0.1, 0.5, 1.0] {
            p.lambda = lambda;
            let best = (1..1000)
                .map(|k| k as f64 / 1000.0)
                .max_by(|x, y| {
                    final_fusion(&p, *x).unwrap().0.total_cmp(&final_fusion(&p, *y).unwrap().0)
                })
                .unwrap();
            assert_abs_diff_eq!(best, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn s_chain_solve_cases() {
        use PairingChoice::*;
        let s = s_chain_solve(0.5, &[P14], &[Some(0.5), None]).unwrap();
        assert_abs_diff_eq!(s[1], 0.5, epsilon = 1e-15);
        let s = s_chain_solve(0.5, &[P14], &[Some(0.8), None]).unwrap();
        assert_abs_diff_eq!(s[1], 0.2, epsilon = 1e-12);
        let s = s_chain_solve(0.3, &[P13, P23, P24], &[Some(0.6), Some(0.4), None, Some(0.7)]).unwrap();
        let mut acc = s[0];
        for (k, p) in [P13, P23, P24].into_iter().enumerate() {
            acc = merged_entanglement(acc, s[k + 1], p).0;
        }
        assert_abs_diff_eq!(acc, 0.3, epsilon = 1e-12);

        assert!(s_chain_solve(1.0, &[P14], &[Some(0.5), None]).is_err());
        assert!(s_chain_solve(0.0, &[P14], &[Some(0.5), None]).is_err());
        assert!(s_chain_solve(0.5, &[P14], &[None, None]).is_err());
        assert!(s_chain_solve(0.5, &[P14], &[Some(0.5), Some(0.5)]).is_err());
        assert!(s_chain_solve(0.5, &[P14], &[Some(0.5)]).is_err());
    }

    #[test]
    fn ratio_rule_with_equal_operands() {
        for s in [0.1, 0.37, 0.5, 0.9] {
            assert_abs_diff_eq!(merged_entanglement(s, s, PairingChoice::P13).0, 0.5, epsilon = 1e-15);
        }
    }

    fn primate() -> impl Strategy<Value = PrimateParams> {
        (1u32..6, 0.0..=1.0f64, 0.0..=1.0f64, 2.0..100.0f64).prop_map(|(n, lambda, s, nu)| PrimateParams {
            n,
            lambda: if n == 1 { 1.0 } else { lambda },
            s,
            nu,
        })
    }

    fn pairing() -> impl Strategy<Value = PairingChoice> {
        prop::sample::select(PairingChoice::ALL.to_vec())
    }

    proptest! {
        #[test]
        fn elementary_cost_is_symmetric(s in 0.0..=1.0f64) {
            prop_assert!((elementary_cost(s) - elementary_cost(1.0 - s)).abs() < 1e-12);
            prop_assert!(elementary_cost(s) >= 2.0 - 1e-12);
            prop_assert!(elementary_cost(s) <= 4.0 + 1e-12);
        }

        #[test]
        fn fusion_weights_are_bounded(a in primate(), b in primate(), pr in pairing(), t in 0.0..=1.0f64) {
            let (p, lambda, s) = fusion_weights(&a, &b, pr, t);
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!((0.0..=1.0).contains(&lambda));
            prop_assert!((0.0..=1.0).contains(&s));
            // Unclamped value is also in range.
            let (x1, x2) = pr.occupations(a.s, b.s);
            let raw = 2.0 * t * (1.0 - t) * (x1 * a.lambda + x2 * b.lambda
                - 2.0 * x1 * x2 * (1.0 - t * t) * a.lambda * b.lambda);
            prop_assert!(raw >= -1e-15 && raw <= 0.5 + 1e-15);
        }

        #[test]
        fn pairing_cases_share_entanglement_rule(sa in 0.0..=1.0f64, sb in 0.0..=1.0f64) {
            use PairingChoice::*;
            prop_assert_eq!(merged_entanglement(sa, sb, P14), merged_entanglement(sa, sb, P23));
            prop_assert_eq!(merged_entanglement(sa, sb, P13), merged_entanglement(sa, sb, P24));
        }

        #[test]
        fn mirroring_swaps_pairings(a in primate(), b in primate(), t in 0.01..0.99f64) {
            use PairingChoice::*;
            // Reversing b's modes turns 14 into 13 and 23 into 24.
            let (p1, l1, s1) = fusion_weights(&a, &b, P14, t);
            let (p2, l2, s2) = fusion_weights(&a, &b.mirrored(), P13, t);
            prop_assert!((p1 - p2).abs() < 1e-12 && (l1 - l2).abs() < 1e-12 && (s1 - s2).abs() < 1e-12);
            let (p1, l1, s1) = fusion_weights(&a, &b, P23, t);
            let (p2, l2, s2) = fusion_weights(&a, &b.mirrored(), P24, t);
            prop_assert!((p1 - p2).abs() < 1e-12 && (l1 - l2).abs() < 1e-12 && (s1 - s2).abs() < 1e-12);
        }

        #[test]
        fn cost_decreases_with_success_probability(a in primate(), b in primate(), pr in pairing(),
                                                    t1 in 0.01..0.99f64, t2 in 0.01..0.99f64) {
            if let (Ok(r1), Ok(r2)) = (fuse(&a, &b, pr, t1), fuse(&a, &b, pr, t2)) {
                if r1.p_success < r2.p_success * (1.0 - 1e-12) {
                    prop_assert!(r1.merged.nu > r2.merged.nu);
                }
            }
        }

        #[test]
        fn fuse_cost_recursion(a in primate(), b in primate(), pr in pairing(), t in 0.01..0.99f64) {
            if let Ok(r) = fuse(&a, &b, pr, t) {
                prop_assert!((r.merged.nu * r.p_success - (a.nu + b.nu)).abs() < 1e-9 * r.merged.nu.max(1.0));
                prop_assert_eq!(r.merged.n, a.n + b.n);
            }
        }

        #[test]
        fn s_chain_solve_round_trips(target in 0.01..0.99f64,
                                     known in prop::collection::vec(0.05..0.95f64, 1..5),
                                     prs in prop::collection::vec(pairing(), 5),
                                     slot in 0usize..5) {
            let pairings = &prs[..known.len()];
            let slot = slot % (known.len() + 1);
            let mut ks: Vec<Option<f64>> = known.iter().copied().map(Some).collect();
            ks.insert(slot, None);
            if let Ok(s) = s_chain_solve(target, pairings, &ks) {
                let mut acc = s[0];
                for (k, p) in pairings.iter().enumerate() {
                    acc = merged_entanglement(acc, s[k + 1], *p).0;
                }
                prop_assert!((acc - target).abs() < 1e-9);
            }
        }
    }
}
