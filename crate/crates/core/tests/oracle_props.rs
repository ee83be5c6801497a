//! Closed forms against the Fock-space oracle over random inputs, and
//! end-to-end pipelines beyond the sizes covered by `verify`.

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use primate::bleeding::{discrete_weights, BleedPairing, BleedSchedule};
use primate::fock::FusionOutcome;
use primate::primate::{fuse, merged_entanglement, PairingChoice, PrimateParams};
use primate::verify::{bleed_oracle, fusion_oracle, pipeline_fidelity};

fn primate(n: u32, lambda: f64, s: f64) -> PrimateParams {
    PrimateParams::new(n, if n == 1 { 1.0 } else { lambda }, s, 2.0).unwrap()
}

fn pairing() -> impl Strategy<Value = PairingChoice> {
    prop::sample::select(PairingChoice::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fuse_matches_oracle(
        na in 1u32..=3, nb in 1u32..=2,
        la in 0.05f64..=1.0, lb in 0.05f64..=1.0,
        sa in 0.01f64..0.99, sb in 0.01f64..0.99,
        t in 0.01f64..0.99, pairing in pairing(),
    ) {
        let (a, b) = (primate(na, la, sa), primate(nb, lb, sb));
        let analytic = fuse(&a, &b, pairing, t).unwrap();
        let oracle = fusion_oracle(&a, &b, pairing, t).unwrap();
        prop_assert!((analytic.p_success - oracle.p_success).abs() < 1e-10);
        prop_assert!((analytic.merged.lambda - oracle.lambda).abs() < 1e-10);
        prop_assert!((analytic.merged.s - oracle.s).abs() < 1e-10);
        prop_assert!(oracle.herald_mismatch < 1e-10);
        prop_assert!(oracle.junk_outer_weight < 1e-10);
    }

    #[test]
    fn bleeding_matches_oracle(
        la in 0.05f64..=1.0, lb in 0.05f64..=1.0,
        sa in 0.01f64..0.99, sb in 0.01f64..0.99,
        ts in prop::collection::vec(0.05f64..=1.0, 1..=4),
        cross in any::<bool>(),
    ) {
        let pairing = if cross { BleedPairing::Pairs13And24 } else { BleedPairing::Pairs14And23 };
        let (a, b) = (primate(2, la, sa), primate(1, lb, sb));
        let schedule = BleedSchedule::new(ts).unwrap();
        let (s, k) = merged_entanglement(a.s, b.s, pairing.as_fusion());
        let (p, lambda) = discrete_weights(a.lambda, b.lambda, k, &schedule);
        let oracle = bleed_oracle(&a, &b, pairing, &schedule).unwrap();
        prop_assert!((oracle.p_success - p).abs() < 1e-10);
        prop_assert!((oracle.lambda - lambda).abs() < 1e-10);
        prop_assert!((oracle.s - s).abs() < 1e-10);
        prop_assert!(oracle.interference < 1e-10);
    }
}

#[test]
fn four_qubit_pipelines_reach_ghz() {
    let heralds = [FusionOutcome::One01, FusionOutcome::One10, FusionOutcome::One01, FusionOutcome::One01];
    for pairings in [
        [PairingChoice::P14, PairingChoice::P23, PairingChoice::P13],
        [PairingChoice::P24, PairingChoice::P24, PairingChoice::P14],
    ] {
        for s in [0.05, 0.5, 0.77] {
            let f = pipeline_fidelity(4, s, &pairings, &[0.3, 0.5, 0.8], 0.4, &heralds).unwrap();
            assert_abs_diff_eq!(f, 1.0, epsilon = 1e-10);
        }
    }
}

#[test]
fn pipeline_rejects_mismatched_lengths() {
    let heralds = [FusionOutcome::One10; 2];
    assert!(pipeline_fidelity(3, 0.5, &[PairingChoice::P14], &[0.5], 0.5, &heralds).is_err());
}
