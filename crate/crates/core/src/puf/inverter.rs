use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{PufError, INVERTERS};
use crate::scalar::Scalar;

/// Number of tabulated points per transfer curve.
pub const CURVE_SAMPLES: usize = 1024;

/// Logistic inverter model: `v_out = v_dd / (1 + exp(g (v_in - v_m)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct InverterParams<T: Scalar> {
    pub v_dd: T,
    /// Switching midpoint in volts.
    pub v_m: T,
    /// Transition gain in 1/volts.
    pub g: T,
}

impl<T: Scalar> InverterParams<T> {
    pub fn validate(&self) -> Result<(), PufError> {
        if !(self.v_m > T::zero() && self.v_m < self.v_dd) {
            return Err(PufError::InvalidInverter("v_m must lie in (0, v_dd)"));
        }
        if !(self.g > T::zero()) {
            return Err(PufError::InvalidInverter("gain must be positive"));
        }
        Ok(())
    }
}

/// Quasistatic voltage transfer curve evaluated analytically.
pub fn vtc<T: Scalar>(params: &InverterParams<T>, v_in: T) -> T {
    params.v_dd / (T::one() + (params.g * (v_in - params.v_m)).exp())
}

/// Transfer curve tabulated uniformly over `[0, v_dd]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct InverterCurve<T: Scalar> {
    pub v_dd: T,
    pub samples: Vec<T>,
}

impl<T: Scalar> InverterCurve<T> {
    pub fn tabulate(params: &InverterParams<T>) -> Self {
        let last = T::lit((CURVE_SAMPLES - 1) as f64);
        let samples = (0..CURVE_SAMPLES)
            .map(|j| vtc(params, params.v_dd * T::lit(j as f64) / last))
            .collect();
        Self {
            v_dd: params.v_dd,
            samples,
        }
    }

    /// Wraps measured samples; they must be non-increasing.
    pub fn from_samples(v_dd: T, samples: Vec<T>) -> Result<Self, PufError> {
        if samples.len() < 2 {
            return Err(PufError::InvalidCurve("need at least two samples"));
        }
        if samples.windows(2).any(|w| !(w[1] <= w[0])) {
            return Err(PufError::InvalidCurve("samples must be non-increasing"));
        }
        Ok(Self { v_dd, samples })
    }

    /// Linear interpolation at `v_in`, clamped to the tabulated span.
    pub fn interpolate(&self, v_in: T) -> T {
        let n = self.samples.len();
        let pos =
            (v_in / self.v_dd * T::lit((n - 1) as f64)).clamp_to(T::zero(), T::lit((n - 1) as f64));
        let i = pos.floor().to_usize().unwrap_or(0).min(n - 2);
        let frac = pos - T::lit(i as f64);
        let a = self.samples[i];
        let b = self.samples[i + 1];
        a + (b - a) * frac
    }

    /// Input voltage where the curve crosses `v_dd / 2`, by interpolation.
    pub fn midpoint(&self) -> Option<T> {
        let half = self.v_dd / T::lit(2.0);
        let n = self.samples.len();
        let step = self.v_dd / T::lit((n - 1) as f64);
        self.samples.windows(2).enumerate().find_map(|(i, w)| {
            if w[0] >= half && w[1] < half {
                let frac = (w[0] - half) / (w[0] - w[1]);
                Some((T::lit(i as f64) + frac) * step)
            } else {
                None
            }
        })
    }
}

/// One PUF instance: eighteen inverters with their tabulated curves.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceModel<T: Scalar> {
    pub device_id: u64,
    pub v_dd: T,
    pub inverters: Vec<InverterParams<T>>,
    pub curves: Vec<InverterCurve<T>>,
}

impl<T: Scalar> DeviceModel<T> {
    pub fn from_inverters(
        device_id: u64,
        v_dd: T,
        inverters: Vec<InverterParams<T>>,
    ) -> Result<Self, PufError> {
        if inverters.len() != INVERTERS {
            return Err(PufError::InvalidDocument(format!(
                "expected {INVERTERS} inverters, found {}",
                inverters.len()
            )));
        }
        for inv in &inverters {
            inv.validate()?;
        }
        let curves = inverters.iter().map(InverterCurve::tabulate).collect();
        Ok(Self {
            device_id,
            v_dd,
            inverters,
            curves,
        })
    }
}

/// Draws a synthetic device with unit supply.
pub fn synthesize_device<T: Scalar>(device_seed: u64) -> DeviceModel<T> {
    synthesize_device_with(device_seed, T::one())
}

/// Draws eighteen inverters with `v_m ~ N(0.5 v_dd, 0.02 v_dd)` and
/// `g ~ N(25 / v_dd, 3 / v_dd)`, clamped well inside the valid ranges.
pub fn synthesize_device_with<T: Scalar>(device_seed: u64, v_dd: T) -> DeviceModel<T> {
    let vdd = v_dd.as_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(device_seed);
    let midpoint = Normal::new(0.5 * vdd, 0.02 * vdd).expect("finite sigma");
    let gain = Normal::new(25.0 / vdd, 3.0 / vdd).expect("finite sigma");
    let inverters: Vec<InverterParams<T>> = (0..INVERTERS)
        .map(|_| {
            let v_m = midpoint.sample(&mut rng).clamp(0.1 * vdd, 0.9 * vdd);
            let g = gain.sample(&mut rng).clamp(5.0 / vdd, 45.0 / vdd);
            InverterParams {
                v_dd,
                v_m: T::lit(v_m),
                g: T::lit(g),
            }
        })
        .collect();
    DeviceModel::from_inverters(device_seed, v_dd, inverters).expect("clamped draws are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> InverterParams<f64> {
        InverterParams {
            v_dd: 1.0,
            v_m: 0.5,
            g: 25.0,
        }
    }

    #[test]
    fn vtc_reference_points() {
        let p = reference();
        assert_eq!(vtc(&p, 0.5), 0.5);
        assert!((vtc(&p, 0.0) - 1.0 / (1.0 + (-12.5f64).exp())).abs() < 1e-15);
        assert!((vtc(&p, 0.0) - 0.999996).abs() < 1e-6);
        assert!((vtc(&p, 1.0) - 3.7e-6).abs() < 1e-7);
    }

    #[test]
    fn tabulated_curve_shape() {
        let c = InverterCurve::tabulate(&reference());
        assert_eq!(c.samples.len(), CURVE_SAMPLES);
        assert!(c.samples.windows(2).all(|w| w[1] <= w[0]));
        assert!((c.samples[0] - 1.0).abs() < 1e-4);
        assert!(c.samples[CURVE_SAMPLES - 1] < 1e-4);
        assert!((c.midpoint().unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn interpolation_hits_grid_points() {
        let c = InverterCurve::tabulate(&reference());
        let x = 300.0 / 1023.0;
        assert!((c.interpolate(x) - c.samples[300]).abs() < 1e-12);
        assert_eq!(c.interpolate(-1.0), c.samples[0]);
        assert_eq!(c.interpolate(2.0), c.samples[CURVE_SAMPLES - 1]);
    }

    #[test]
    fn synthesis_is_deterministic_with_eighteen_curves() {
        let a = synthesize_device::<f64>(9);
        let b = synthesize_device::<f64>(9);
        assert_eq!(a, b);
        assert_eq!(a.curves.len(), 18);
        let c = synthesize_device::<f64>(10);
        assert_ne!(a.inverters, c.inverters);
    }

    #[test]
    fn from_samples_rejects_rising_curve() {
        assert!(InverterCurve::from_samples(1.0, vec![0.0, 0.5, 1.0]).is_err());
        assert!(InverterCurve::from_samples(1.0, vec![1.0, 0.5, 0.0]).is_ok());
    }
}
