//! Bleeding units: repeated weak fusion attempts on two mode pairs at once,
//! stopped at the first single-photon detection.
//!
//! A unit is described either by its retention `c = Π t_x²` (continuum limit
//! of many weak steps) or by an explicit [`BleedSchedule`]. Outcomes with more
//! than one detected photon count as failure.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::primate::{merged_entanglement, FusionResult, PairingChoice, PrimateParams};

/// Step count used when a retention has to be realized by a finite schedule.
pub const DEFAULT_STEPS: usize = 10_000;

/// Primate parameters read as the diagonal weights of a mixed state.
pub type MixedPrimateParams = PrimateParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BleedPairing {
    #[serde(rename = "14&23")]
    Pairs14And23,
    #[serde(rename = "13&24")]
    Pairs13And24,
}

impl BleedPairing {
    pub const ALL: [BleedPairing; 2] = [Self::Pairs14And23, Self::Pairs13And24];

    /// The single-fusion pairings bled together by this unit.
    pub fn pairs(self) -> [PairingChoice; 2] {
        match self {
            Self::Pairs14And23 => [PairingChoice::P14, PairingChoice::P23],
            Self::Pairs13And24 => [PairingChoice::P13, PairingChoice::P24],
        }
    }

    /// Single-fusion pairing with the same entanglement rule.
    pub fn as_fusion(self) -> PairingChoice {
        self.pairs()[0]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleedSchedule {
    transmittances: Vec<f64>,
    retention: f64,
}

impl BleedSchedule {
    pub fn new(transmittances: Vec<f64>) -> Result<Self> {
        if transmittances.is_empty() {
            return Err(Error::OutOfRange {
                name: "steps",
                value: 0.0,
                range: "N_b >= 1",
            });
        }
        for &t in &transmittances {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::OutOfRange {
                    name: "transmittance",
                    value: t,
                    range: "(0, 1]",
                });
            }
        }
        let retention = transmittances.iter().map(|t| t * t).product();
        Ok(Self {
            transmittances,
            retention,
        })
    }

    pub fn steps(&self) -> usize {
        self.transmittances.len()
    }

    pub fn transmittances(&self) -> &[f64] {
        &self.transmittances
    }

    /// `c = Π t_x²`
    pub fn retention(&self) -> f64 {
        self.retention
    }

    /// `(t_x, Π_{x'<x} t_{x'}²)` for every step.
    fn steps_with_prior_retention(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.transmittances.iter().scan(1.0, |prior, &t| {
            let before = *prior;
            *prior *= t * t;
            Some((t, before))
        })
    }
}

/// Constant transmittance `c^(1/(2N_b))`. For `c = 0` the finite stand-in
/// `(1/N_b)^(1/(2N_b))` is used, whose retention `1/N_b` vanishes as `N_b`
/// grows.
pub fn schedule_uniform(c: f64, steps: usize) -> Result<BleedSchedule> {
    check_unit("retention", c)?;
    if steps == 0 {
        return Err(Error::OutOfRange {
            name: "steps",
            value: 0.0,
            range: "N_b >= 1",
        });
    }
    let base = if c > 0.0 { c } else { 1.0 / steps as f64 };
    let t = base.powf(1.0 / (2.0 * steps as f64));
    BleedSchedule::new(vec![t; steps])
}

/// `t_x = √((N_b+1−x)/(N_b+2−x))`, with retention `1/(N_b+1)`.
pub fn schedule_harmonic(steps: usize) -> Result<BleedSchedule> {
    if steps == 0 {
        return Err(Error::OutOfRange {
            name: "steps",
            value: 0.0,
            range: "N_b >= 1",
        });
    }
    let nb = steps as f64;
    BleedSchedule::new(
        (1..=steps)
            .map(|x| ((nb + 1.0 - x as f64) / (nb + 2.0 - x as f64)).sqrt())
            .collect(),
    )
}

/// Useful weight after the unit has reported vacuum with cumulative
/// retention `retention_so_far`.
pub fn lambda_progress(lambda0: f64, retention_so_far: f64) -> f64 {
    let denom = 1.0 - (1.0 - retention_so_far) * lambda0;
    if denom <= 0.0 {
        // λ = 1 and nothing retained: the useful part is the only part left.
        return 1.0;
    }
    (lambda0 * retention_so_far / denom).clamp(0.0, 1.0)
}

/// Continuum success probability and `λ′` (no cost bookkeeping).
pub fn continuum_weights(la: f64, lb: f64, k: f64, c: f64) -> (f64, f64) {
    let d = la + lb - (1.0 - c) * la * lb;
    let p = ((1.0 - c) * d).clamp(0.0, 1.0);
    let lambda = if d > 0.0 {
        (k * la * lb * (1.0 + c) / d).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p, lambda)
}

/// Exact finite-schedule success probability and `λ′`.
pub fn discrete_weights(la: f64, lb: f64, k: f64, schedule: &BleedSchedule) -> (f64, f64) {
    let mut p = 0.0;
    let mut useful = 0.0;
    for (t, prior) in schedule.steps_with_prior_retention() {
        let upto = prior * t * t;
        p += 2.0 * t * (1.0 - t) * (la + lb - 2.0 * (1.0 - upto) * la * lb) * prior;
        useful += t.powi(3) * (1.0 - t) * prior * prior;
    }
    let lambda = if p > 0.0 {
        (4.0 * la * lb * k * useful / p).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p.clamp(0.0, 1.0), lambda)
}

fn merge(
    a: &MixedPrimateParams,
    b: &MixedPrimateParams,
    pairing: BleedPairing,
    weights: impl FnOnce(f64, f64, f64) -> (f64, f64),
) -> Result<FusionResult> {
    a.validate()?;
    b.validate()?;
    let (s, k) = merged_entanglement(a.s, b.s, pairing.as_fusion());
    let (p, lambda) = weights(a.lambda, b.lambda, k);
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

/// Bleeding unit in the continuum limit with retention `c`.
pub fn bleed_fuse_continuum(
    a: &MixedPrimateParams,
    b: &MixedPrimateParams,
    pairing: BleedPairing,
    c: f64,
) -> Result<FusionResult> {
    check_unit("retention", c)?;
    merge(a, b, pairing, |la, lb, k| continuum_weights(la, lb, k, c))
}

/// Bleeding unit driven by an explicit schedule.
pub fn bleed_fuse_discrete(
    a: &MixedPrimateParams,
    b: &MixedPrimateParams,
    pairing: BleedPairing,
    schedule: &BleedSchedule,
) -> Result<FusionResult> {
    merge(a, b, pairing, |la, lb, k| discrete_weights(la, lb, k, schedule))
}

/// Success probability of bleeding the two outer modes of one primate into
/// `|GHZ_N(s)>` under an explicit schedule.
pub fn bleed_final_discrete(p: &MixedPrimateParams, schedule: &BleedSchedule) -> Result<f64> {
    p.validate()?;
    let sum: f64 = schedule
        .steps_with_prior_retention()
        .map(|(t, prior)| 2.0 * t * (1.0 - t) * prior)
        .sum();
    Ok((p.lambda * sum).clamp(0.0, 1.0))
}

/// Final single-pair bleed with retention `c`. Exactly `λ` at `c = 0`;
/// otherwise evaluated on a [`DEFAULT_STEPS`]-step uniform schedule.
pub fn bleed_final(p: &MixedPrimateParams, c: f64) -> Result<f64> {
    check_unit("retention", c)?;
    p.validate()?;
    if c == 0.0 {
        return Ok(p.lambda);
    }
    if c == 1.0 {
        return Ok(0.0);
    }
    bleed_final_discrete(p, &schedule_uniform(c, DEFAULT_STEPS)?)
}
