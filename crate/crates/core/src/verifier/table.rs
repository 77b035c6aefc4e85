use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{key_in_window, VerifierConfig, VerifierError};
use crate::puf::Response;
use crate::scalar::Scalar;

/// Enrolled `(level key, response)` pairs and the enrolled temporal spread.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(
    try_from = "EnrollmentDocument<T>",
    into = "EnrollmentDocument<T>",
    bound = "T: Scalar"
)]
pub struct EnrollmentTable<T: Scalar> {
    pub pairs: BTreeMap<i64, Response>,
    pub max_temporal_diff: T,
}

impl<T: Scalar> EnrollmentTable<T> {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn validate(&self, cfg: &VerifierConfig<T>) -> Result<(), VerifierError> {
        if let Some(&k) = self.pairs.keys().find(|&&k| !key_in_window(k, cfg)) {
            return Err(VerifierError::KeyOutsideWindow(k));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrollmentPair {
    pub level: i64,
    pub response_hex: String,
}

/// Wire form: `{pairs: [{level, response_hex}], max_temporal_diff}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrollmentDocument<T> {
    pub pairs: Vec<EnrollmentPair>,
    pub max_temporal_diff: T,
}

impl<T: Scalar> From<EnrollmentTable<T>> for EnrollmentDocument<T> {
    fn from(t: EnrollmentTable<T>) -> Self {
        Self {
            pairs: t
                .pairs
                .iter()
                .map(|(&level, r)| EnrollmentPair {
                    level,
                    response_hex: r.to_hex(),
                })
                .collect(),
            max_temporal_diff: t.max_temporal_diff,
        }
    }
}

impl<T: Scalar> TryFrom<EnrollmentDocument<T>> for EnrollmentTable<T> {
    type Error = String;

    fn try_from(doc: EnrollmentDocument<T>) -> Result<Self, String> {
        if !(doc.max_temporal_diff >= T::zero()) {
            return Err("max_temporal_diff must be non-negative".into());
        }
        let mut pairs = BTreeMap::new();
        for p in doc.pairs {
            let r = Response::from_hex(&p.response_hex).map_err(|e| e.to_string())?;
            if pairs.insert(p.level, r).is_some() {
                return Err(format!("duplicate enrollment key {}", p.level));
            }
        }
        Ok(Self {
            pairs,
            max_temporal_diff: T::lit(doc.max_temporal_diff.as_f64()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let mut t = EnrollmentTable::<f64>::default();
        t.pairs.insert(100, Response::new(0x2a).unwrap());
        t.max_temporal_diff = 12.5;
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(
            json,
            r#"{"pairs":[{"level":100,"response_hex":"0002a"}],"max_temporal_diff":12.5}"#
        );
        let back: EnrollmentTable<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_duplicates_and_bad_hex() {
        let dup = r#"{"pairs":[{"level":1,"response_hex":"00001"},{"level":1,"response_hex":"00002"}],"max_temporal_diff":1.0}"#;
        assert!(serde_json::from_str::<EnrollmentTable<f64>>(dup).is_err());
        let bad = r#"{"pairs":[{"level":1,"response_hex":"fffff"}],"max_temporal_diff":1.0}"#;
        assert!(serde_json::from_str::<EnrollmentTable<f64>>(bad).is_err());
        let neg = r#"{"pairs":[],"max_temporal_diff":-1.0}"#;
        assert!(serde_json::from_str::<EnrollmentTable<f64>>(neg).is_err());
    }

    #[test]
    fn key_window_validation() {
        let cfg = VerifierConfig::<f64>::default();
        let mut t = EnrollmentTable::<f64>::default();
        t.pairs.insert(98, Response::default());
        assert!(t.validate(&cfg).is_ok());
        t.pairs.insert(85, Response::default());
        assert_eq!(t.validate(&cfg), Err(VerifierError::KeyOutsideWindow(85)));
    }
}
