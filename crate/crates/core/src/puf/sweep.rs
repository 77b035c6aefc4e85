use serde::{Deserialize, Serialize};

use super::{Challenge, INVERTERS};
use crate::scalar::Scalar;

const LCG_MUL: u32 = 1_664_525;
const LCG_INC: u32 = 1_013_904_223;
const SEED_BASE: u32 = 0x9E37_79B9;
const SEED_MUL: u32 = 0x0100_0193;

/// Bias window the probe sweeps for one inverter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SweepRegion<T: Scalar> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> SweepRegion<T> {
    pub fn bias(&self) -> T {
        (self.lo + self.hi) / T::lit(2.0)
    }

    pub fn amplitude(&self) -> T {
        (self.hi - self.lo) / T::lit(2.0)
    }
}

/// Numerical Recipes LCG over `u32`, seeded from the challenge byte.
#[derive(Debug, Clone)]
pub struct ChallengeLcg {
    state: u32,
}

impl ChallengeLcg {
    pub fn new(challenge: Challenge) -> Self {
        Self {
            state: SEED_BASE ^ u32::from(challenge.0).wrapping_mul(SEED_MUL),
        }
    }

    pub fn next_u32(&mut self) -> u32 {
        self.state = self.state.wrapping_mul(LCG_MUL).wrapping_add(LCG_INC);
        self.state
    }

    /// Next output scaled to `[0, 1)`.
    pub fn next_unit(&mut self) -> f64 {
        f64::from(self.next_u32()) / 4_294_967_296.0
    }
}

/// The eighteen per-inverter sweep regions selected by `challenge`.
///
/// Depends only on the challenge byte and the supply voltage; arithmetic is
/// carried out in `f64` so every scalar type sees the same regions.
pub fn sweep_regions<T: Scalar>(challenge: Challenge, v_dd: T) -> [SweepRegion<T>; INVERTERS] {
    let vdd = v_dd.as_f64();
    let mut lcg = ChallengeLcg::new(challenge);
    std::array::from_fn(|_| {
        let u1 = lcg.next_unit();
        let u2 = lcg.next_unit();
        let center = (0.25 + 0.5 * u1) * vdd;
        let half = (0.05 + 0.10 * u2) * vdd;
        SweepRegion {
            lo: T::lit((center - half).max(0.02 * vdd)),
            hi: T::lit((center + half).min(0.98 * vdd)),
        }
    })
}
