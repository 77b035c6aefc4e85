use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{sweep_regions, synthesize_device, thd, DeviceModel, PufError, CHALLENGES, INVERTERS};
use crate::scalar::{round_to_i64, Scalar};

/// 8-bit PUF challenge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Challenge(pub u8);

impl Challenge {
    pub fn all() -> impl Iterator<Item = Challenge> {
        (0..=255u8).map(Challenge)
    }

    pub fn flip_bit(self, bit: u32) -> Challenge {
        Challenge(self.0 ^ (1 << bit))
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }
}

/// 18-bit PUF response; bit `i` comes from inverter `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Response(u32);

impl Response {
    pub const MASK: u32 = (1 << INVERTERS) - 1;

    pub fn new(bits: u32) -> Result<Self, PufError> {
        if bits & !Self::MASK != 0 {
            return Err(PufError::ResponseOverflow(bits));
        }
        Ok(Self(bits))
    }

    pub fn from_bits_iter(bits: impl IntoIterator<Item = bool>) -> Self {
        let v = bits
            .into_iter()
            .take(INVERTERS)
            .enumerate()
            .fold(0u32, |acc, (i, b)| acc | (u32::from(b) << i));
        Self(v)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn bit(self, i: usize) -> bool {
        (self.0 >> i) & 1 == 1
    }

    pub fn ones(self) -> u32 {
        self.0.count_ones()
    }

    pub fn hamming(self, other: Response) -> u32 {
        (self.0 ^ other.0).count_ones()
    }

    pub fn fractional_hamming(self, other: Response) -> f64 {
        f64::from(self.hamming(other)) / INVERTERS as f64
    }

    /// Five lowercase hex digits, left-padded.
    pub fn to_hex(self) -> String {
        format!("{:05x}", self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, PufError> {
        if s.is_empty() || s.len() > 5 {
            return Err(PufError::InvalidDocument(format!("bad response hex {s:?}")));
        }
        let v = u32::from_str_radix(s, 16)
            .map_err(|_| PufError::InvalidDocument(format!("bad response hex {s:?}")))?;
        Self::new(v)
    }
}

impl fmt::Display for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Response {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Response {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Response::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Maps an integer level onto the 8-bit challenge space.
pub fn challenge_from_level<T: Scalar>(quantized_level: i64, capacity: T) -> Challenge {
    let cap = capacity.as_f64();
    let q = (quantized_level.max(0) as f64).min(cap);
    Challenge(round_to_i64(q * 255.0 / cap).clamp(0, 255) as u8)
}

/// Per-challenge, per-inverter mean THD over a provisioning population.
#[derive(Debug, Clone, PartialEq)]
pub struct LutTable<T: Scalar> {
    /// Seeds of the population, sorted ascending.
    pub population_seeds: Vec<u64>,
    pub v_dd: T,
    /// `CHALLENGES` rows of `INVERTERS` means.
    pub means: Vec<[T; INVERTERS]>,
}

impl<T: Scalar> LutTable<T> {
    pub fn mean(&self, challenge: Challenge, inverter: usize) -> T {
        self.means[challenge.index()][inverter]
    }
}

/// All THD values of one device, indexed like the LUT.
pub fn thd_matrix<T: Scalar>(device: &DeviceModel<T>) -> Result<Vec<[T; INVERTERS]>, PufError> {
    Challenge::all()
        .map(|c| {
            let regions = sweep_regions(c, device.v_dd);
            let mut row = [T::zero(); INVERTERS];
            for (i, slot) in row.iter_mut().enumerate() {
                *slot = thd(&device.curves[i], &regions[i])?;
            }
            Ok(row)
        })
        .collect()
}

/// Provisions the LUT from synthetic devices drawn from `population_seeds`.
pub fn provision_lut<T: Scalar>(population_seeds: &[u64]) -> Result<LutTable<T>, PufError> {
    if population_seeds.is_empty() {
        return Err(PufError::EmptyPopulation);
    }
    let mut seeds = population_seeds.to_vec();
    seeds.sort_unstable();
    let matrices: Vec<Vec<[T; INVERTERS]>> = seeds
        .par_iter()
        .map(|&s| thd_matrix(&synthesize_device::<T>(s)))
        .collect::<Result<_, _>>()?;
    let count = T::lit(seeds.len() as f64);
    let mut means = vec![[T::zero(); INVERTERS]; CHALLENGES];
    // Summation runs in sorted-seed order so the table does not depend on
    // the order the seeds were supplied in.
    for m in &matrices {
        for (row, dev_row) in means.iter_mut().zip(m) {
            for (acc, &x) in row.iter_mut().zip(dev_row) {
                *acc = *acc + x;
            }
        }
    }
    for row in &mut means {
        for x in row.iter_mut() {
            *x = *x / count;
        }
    }
    Ok(LutTable {
        population_seeds: seeds,
        v_dd: T::one(),
        means,
    })
}

/// Default provisioning population: `count` consecutive seeds from `base`.
pub fn default_population(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_add(i)).collect()
}

fn compare<T: Scalar>(thd_row: &[T; INVERTERS], lut_row: &[T; INVERTERS]) -> Response {
    Response::from_bits_iter(thd_row.iter().zip(lut_row).map(|(t, m)| t > m))
}

/// Evaluates the device response to `challenge`; ties resolve to 0.
pub fn respond<T: Scalar>(
    device: &DeviceModel<T>,
    lut: &LutTable<T>,
    challenge: Challenge,
) -> Result<Response, PufError> {
    let regions = sweep_regions(challenge, device.v_dd);
    let mut row = [T::zero(); INVERTERS];
    for (i, slot) in row.iter_mut().enumerate() {
        *slot = thd(&device.curves[i], &regions[i])?;
    }
    Ok(compare(&row, &lut.means[challenge.index()]))
}

/// Precomputed responses of one device to every challenge.
///
/// The pipeline is deterministic, so the kernel evaluates each challenge
/// once and looks responses up per tick.
#[derive(Debug, Clone)]
pub struct ResponseTable {
    responses: Vec<Response>,
}

impl ResponseTable {
    pub fn build<T: Scalar>(device: &DeviceModel<T>, lut: &LutTable<T>) -> Result<Self, PufError> {
        let thds = thd_matrix(device)?;
        let responses = thds
            .iter()
            .zip(&lut.means)
            .map(|(row, means)| compare(row, means))
            .collect();
        Ok(Self { responses })
    }

    pub fn get(&self, challenge: Challenge) -> Response {
        self.responses[challenge.index()]
    }
}
