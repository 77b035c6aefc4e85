//! JSON documents for devices and provisioned tables.

use serde::{Deserialize, Serialize};

use super::{
    DeviceModel, InverterCurve, InverterParams, LutTable, PufError, CHALLENGES, INVERTERS,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct InverterDocument<T: Scalar> {
    pub v_m: T,
    pub g: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DeviceDocument<T: Scalar> {
    pub device_id: u64,
    pub v_dd: T,
    pub inverters: Vec<InverterDocument<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve_samples: Option<Vec<Vec<T>>>,
}

impl<T: Scalar> DeviceDocument<T> {
    pub fn from_device(device: &DeviceModel<T>, with_samples: bool) -> Self {
        Self {
            device_id: device.device_id,
            v_dd: device.v_dd,
            inverters: device
                .inverters
                .iter()
                .map(|p| InverterDocument { v_m: p.v_m, g: p.g })
                .collect(),
            curve_samples: with_samples
                .then(|| device.curves.iter().map(|c| c.samples.clone()).collect()),
        }
    }

    /// Rebuilds the device. Supplied samples replace the tabulated model curves.
    pub fn into_device(self) -> Result<DeviceModel<T>, PufError> {
        let v_dd = self.v_dd;
        let inverters: Vec<InverterParams<T>> = self
            .inverters
            .iter()
            .map(|i| InverterParams {
                v_dd,
                v_m: i.v_m,
                g: i.g,
            })
            .collect();
        let mut device = DeviceModel::from_inverters(self.device_id, v_dd, inverters)?;
        if let Some(samples) = self.curve_samples {
            if samples.len() != INVERTERS {
                return Err(PufError::InvalidDocument(format!(
                    "expected {INVERTERS} curves, found {}",
                    samples.len()
                )));
            }
            device.curves = samples
                .into_iter()
                .map(|s| InverterCurve::from_samples(v_dd, s))
                .collect::<Result<_, _>>()?;
        }
        Ok(device)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LutDocument<T: Scalar> {
    pub population_seeds: Vec<u64>,
    pub means: Vec<Vec<T>>,
}

impl<T: Scalar> From<&LutTable<T>> for LutDocument<T> {
    fn from(lut: &LutTable<T>) -> Self {
        Self {
            population_seeds: lut.population_seeds.clone(),
            means: lut.means.iter().map(|r| r.to_vec()).collect(),
        }
    }
}

impl<T: Scalar> TryFrom<LutDocument<T>> for LutTable<T> {
    type Error = PufError;

    fn try_from(doc: LutDocument<T>) -> Result<Self, PufError> {
        if doc.means.len() != CHALLENGES {
            return Err(PufError::InvalidDocument(format!(
                "expected {CHALLENGES} LUT rows, found {}",
                doc.means.len()
            )));
        }
        let means = doc
            .means
            .into_iter()
            .map(|row| {
                if row.iter().any(|x| !(*x >= T::zero())) {
                    return Err(PufError::InvalidDocument(
                        "LUT entries must be non-negative".into(),
                    ));
                }
                <[T; INVERTERS]>::try_from(row).map_err(|r| {
                    PufError::InvalidDocument(format!("LUT row has {} entries", r.len()))
                })
            })
            .collect::<Result<_, _>>()?;
        let mut population_seeds = doc.population_seeds;
        population_seeds.sort_unstable();
        Ok(LutTable {
            population_seeds,
            v_dd: T::one(),
            means,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::puf::{provision_lut, synthesize_device};

    #[test]
    fn device_document_round_trip() {
        let dev = synthesize_device::<f64>(31);
        for samples in [false, true] {
            let json = serde_json::to_string(&DeviceDocument::from_device(&dev, samples)).unwrap();
            let back: DeviceDocument<f64> = serde_json::from_str(&json).unwrap();
            assert_eq!(back.into_device().unwrap(), dev);
        }
    }

    #[test]
    fn lut_document_round_trip_and_shape_check() {
        let lut = provision_lut::<f64>(&[3, 4]).unwrap();
        let json = serde_json::to_string(&LutDocument::from(&lut)).unwrap();
        let doc: LutDocument<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(LutTable::try_from(doc.clone()).unwrap(), lut);
        let mut short = doc;
        short.means.pop();
        assert!(LutTable::try_from(short).is_err());
    }
}
