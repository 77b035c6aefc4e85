//! Harmonic distortion of a tabulated transfer curve under a cosine probe.
//!
//! The probe `v_in(θ) = V0 + A cos θ` spans the sweep region. Because the
//! output `v_out(θ)` is even in `θ`, only cosine coefficients are non-zero:
//!
//! ```text
//! c_k = (2/N) Σ_j v_out(θ_j) cos(k θ_j),   θ_j = 2πj/N
//! THD = sqrt(c_2² + c_3² + c_4² + c_5²) / |c_1|
//! ```

use std::sync::OnceLock;

use super::{InverterCurve, PufError, SweepRegion};
use crate::scalar::Scalar;

/// Probe points per period.
pub const PROBE_POINTS: usize = 256;
/// Highest harmonic kept.
pub const MAX_HARMONIC: usize = 5;

const MIN_FUNDAMENTAL: f64 = 1e-12;

fn cos_table() -> &'static [f64; PROBE_POINTS] {
    static TABLE: OnceLock<[f64; PROBE_POINTS]> = OnceLock::new();
    TABLE.get_or_init(|| {
        std::array::from_fn(|m| (2.0 * std::f64::consts::PI * m as f64 / PROBE_POINTS as f64).cos())
    })
}

/// Cosine coefficients `c_1..=c_5` of the probed output.
pub fn harmonics<T: Scalar>(
    curve: &InverterCurve<T>,
    region: &SweepRegion<T>,
) -> [T; MAX_HARMONIC] {
    let table = cos_table();
    let bias = region.bias();
    let amp = region.amplitude();
    let mut acc = [T::zero(); MAX_HARMONIC];
    for (j, &cos_j) in table.iter().enumerate() {
        let v_out = curve.interpolate(bias + amp * T::lit(cos_j));
        for (k, c) in acc.iter_mut().enumerate() {
            let idx = ((k + 1) * j) % PROBE_POINTS;
            *c = *c + v_out * T::lit(table[idx]);
        }
    }
    let scale = T::lit(2.0 / PROBE_POINTS as f64);
    acc.map(|c| c * scale)
}

/// Total harmonic distortion relative to the fundamental.
pub fn thd<T: Scalar>(curve: &InverterCurve<T>, region: &SweepRegion<T>) -> Result<T, PufError> {
    let c = harmonics(curve, region);
    let fundamental = c[0].abs();
    if fundamental < T::lit(MIN_FUNDAMENTAL) {
        return Err(PufError::DegenerateRegion {
            lo: region.lo.as_f64(),
            hi: region.hi.as_f64(),
        });
    }
    let distortion = c[1..].iter().fold(T::zero(), |s, &x| s + x * x).sqrt();
    Ok(distortion / fundamental)
}
