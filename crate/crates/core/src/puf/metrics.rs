use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{thd_matrix, Challenge, DeviceModel, LutTable, PufError, Response, INVERTERS};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrpOptions {
    /// Sigma of additive noise on each THD measurement, for reliability.
    pub measurement_noise: f64,
    /// Repeated evaluations per (device, challenge) for reliability.
    pub trials: usize,
    pub seed: u64,
}

impl Default for CrpOptions {
    fn default() -> Self {
        Self {
            measurement_noise: 0.0,
            trials: 4,
            seed: 0xC4B_5EED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrpMetrics {
    pub devices: usize,
    /// Mean pairwise fractional Hamming distance over all challenges.
    pub uniqueness: f64,
    /// Mean bit agreement between noisy re-evaluations and the reference.
    pub reliability: f64,
    /// Mean fractional response change under a single challenge-bit flip.
    pub avalanche: f64,
    /// Fraction of response bits equal to one.
    pub bit_bias: f64,
}

/// Mean fractional Hamming distance between two response vectors.
pub fn mean_fractional_distance(a: &[Response], b: &[Response]) -> f64 {
    let total: u32 = a.iter().zip(b).map(|(x, y)| x.hamming(*y)).sum();
    f64::from(total) / (a.len() * INVERTERS) as f64
}

/// Uniqueness, reliability and avalanche statistics over `devices`.
pub fn crp_metrics<T: Scalar>(
    devices: &[DeviceModel<T>],
    lut: &LutTable<T>,
    opts: &CrpOptions,
) -> Result<CrpMetrics, PufError> {
    if devices.len() < 2 {
        return Err(PufError::TooFewDevices(devices.len()));
    }
    let thds: Vec<Vec<[T; INVERTERS]>> =
        devices.iter().map(thd_matrix).collect::<Result<_, _>>()?;
    let responses: Vec<Vec<Response>> = thds
        .iter()
        .map(|m| {
            m.iter()
                .zip(&lut.means)
                .map(|(row, means)| {
                    Response::from_bits_iter(row.iter().zip(means).map(|(t, u)| t > u))
                })
                .collect()
        })
        .collect();

    let mut pair_sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..responses.len() {
        for j in i + 1..responses.len() {
            pair_sum += mean_fractional_distance(&responses[i], &responses[j]);
            pairs += 1;
        }
    }

    let mut flips = 0u64;
    let mut flip_trials = 0u64;
    for r in &responses {
        for c in Challenge::all() {
            for bit in 0..8 {
                flips += u64::from(r[c.index()].hamming(r[c.flip_bit(bit).index()]));
                flip_trials += INVERTERS as u64;
            }
        }
    }

    let ones: u64 = responses
        .iter()
        .flatten()
        .map(|r| u64::from(r.ones()))
        .sum();
    let bits_total = (responses.len() * responses[0].len() * INVERTERS) as u64;

    Ok(CrpMetrics {
        devices: devices.len(),
        uniqueness: pair_sum / pairs as f64,
        reliability: reliability(&thds, &responses, lut, opts),
        avalanche: flips as f64 / flip_trials as f64,
        bit_bias: ones as f64 / bits_total as f64,
    })
}

fn reliability<T: Scalar>(
    thds: &[Vec<[T; INVERTERS]>],
    reference: &[Vec<Response>],
    lut: &LutTable<T>,
    opts: &CrpOptions,
) -> f64 {
    let noise = (opts.measurement_noise > 0.0)
        .then(|| Normal::new(0.0, opts.measurement_noise).expect("finite sigma"));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let trials = opts.trials.max(1);
    let mut agree = 0u64;
    let mut total = 0u64;
    for (dev_thd, dev_ref) in thds.iter().zip(reference) {
        for ((row, means), &expected) in dev_thd.iter().zip(&lut.means).zip(dev_ref) {
            for _ in 0..trials {
                let noisy = Response::from_bits_iter(row.iter().zip(means).map(|(t, m)| {
                    let n = noise.as_ref().map_or(0.0, |d| d.sample(&mut rng));
                    t.as_f64() + n > m.as_f64()
                }));
                agree += u64::from(INVERTERS as u32 - noisy.hamming(expected));
                total += INVERTERS as u64;
            }
        }
    }
    agree as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::puf::{provision_lut, synthesize_device};

    #[test]
    fn requires_two_devices() {
        let lut = provision_lut::<f64>(&[1, 2]).unwrap();
        let one = vec![synthesize_device::<f64>(1)];
        assert_eq!(
            crp_metrics(&one, &lut, &CrpOptions::default()),
            Err(PufError::TooFewDevices(1))
        );
    }

    #[test]
    fn self_distance_is_zero() {
        let lut = provision_lut::<f64>(&[1, 2, 3]).unwrap();
        let table = crate::puf::ResponseTable::build(&synthesize_device::<f64>(2), &lut).unwrap();
        let v: Vec<Response> = Challenge::all().map(|c| table.get(c)).collect();
        assert_eq!(mean_fractional_distance(&v, &v), 0.0);
    }

    #[test]
    fn noise_reduces_reliability() {
        let seeds: Vec<u64> = (10..20).collect();
        let lut = provision_lut::<f64>(&seeds).unwrap();
        let devs: Vec<_> = seeds[..3]
            .iter()
            .map(|&s| synthesize_device::<f64>(s))
            .collect();
        let clean = crp_metrics(&devs, &lut, &CrpOptions::default()).unwrap();
        assert_eq!(clean.reliability, 1.0);
        let noisy = crp_metrics(
            &devs,
            &lut,
            &CrpOptions {
                measurement_noise: 0.01,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(noisy.reliability < 1.0 && noisy.reliability > 0.5);
    }
}
