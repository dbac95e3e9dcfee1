//! Problem JSON: `{"mu", "nu", "logR": {"dense"} | {"triplets", "shape"}, "meta"}`.
//!
//! Dense log-entries equal to `-inf` are written as `null`; triplets list
//! finite entries only. Floats are written in shortest round-trip form, so a
//! read-write cycle is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, LogKernel, StorageKind};
use crate::transforms::TransformContext;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum LogRJson {
    Dense { dense: Vec<Vec<Option<f64>>> },
    Triplets { triplets: Vec<(usize, usize, f64)>, shape: (usize, usize) },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProblemJson {
    mu: Vec<f64>,
    nu: Vec<f64>,
    #[serde(rename = "logR")]
    log_r: LogRJson,
    #[serde(default)]
    meta: Value,
}

/// A validated problem together with its free-form metadata.
#[derive(Debug, Clone)]
pub struct Problem {
    pub ctx: TransformContext,
    pub meta: Value,
}

impl Problem {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: ProblemJson = serde_json::from_str(s)?;
        let kernel = match raw.log_r {
            LogRJson::Dense { dense } => {
                let rows: Vec<Vec<f64>> = dense
                    .into_iter()
                    .map(|r| r.into_iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect())
                    .collect();
                LogKernel::from_log_dense(&rows)?
            }
            LogRJson::Triplets { triplets, shape } => LogKernel::from_log_triplets(shape.0, shape.1, &triplets)?,
        };
        let ctx = TransformContext::new(
            kernel,
            DiscreteMeasure::probability(raw.mu)?,
            DiscreteMeasure::probability(raw.nu)?,
        )?;
        Ok(Self { ctx, meta: raw.meta })
    }

    pub fn to_json_string(&self) -> String {
        let k = self.ctx.kernel();
        let log_r = match k.storage_kind() {
            StorageKind::Dense => LogRJson::Dense {
                dense: k
                    .to_log_dense()
                    .into_iter()
                    .map(|r| r.into_iter().map(|v| v.is_finite().then_some(v)).collect())
                    .collect(),
            },
            StorageKind::Triplets => LogRJson::Triplets { triplets: k.log_triplets(), shape: k.shape() },
        };
        let raw = ProblemJson {
            mu: self.ctx.mu().weights().to_vec(),
            nu: self.ctx.nu().weights().to_vec(),
            log_r,
            meta: self.meta.clone(),
        };
        let mut s = serde_json::to_string(&raw).expect("finite floats serialize");
        s.push('\n');
        s
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()).map_err(Error::from)
    }

    /// Numeric metadata field, if present.
    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.meta.get(key).and_then(Value::as_f64)
    }

    pub fn family(&self) -> Option<&str> {
        self.meta.get("family").and_then(Value::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_round_trip_with_zero() {
        let s = r#"{"mu":[0.5,0.5],"nu":[0.5,0.5],"logR":{"dense":[[-0.916290731874155,-2.3025850929940455],[null,-0.6931471805599453]]},"meta":{"family":"z"}}"#;
        let p = Problem::from_json_str(s).unwrap();
        assert_eq!(p.ctx.kernel().log_entry(1, 0), f64::NEG_INFINITY);
        assert_eq!(p.family(), Some("z"));
        let again = Problem::from_json_str(&p.to_json_string()).unwrap();
        assert_eq!(again.to_json_string(), p.to_json_string());
        assert_eq!(p.to_json_string().trim_end(), s);
    }

    #[test]
    fn triplet_round_trip() {
        let s = r#"{"mu":[1.0],"nu":[0.25,0.75],"logR":{"triplets":[[0,0,-1.5],[0,1,0.1]],"shape":[1,2]},"meta":{}}"#;
        let p = Problem::from_json_str(s).unwrap();
        assert_eq!(p.ctx.kernel().storage_kind(), StorageKind::Triplets);
        assert_eq!(p.to_json_string().trim_end(), s);
    }

    #[test]
    fn invalid_problems_are_rejected() {
        assert!(matches!(Problem::from_json_str("{"), Err(Error::Json(_))));
        let bad_mass = r#"{"mu":[0.5,0.6],"nu":[1.0],"logR":{"dense":[[0.0],[0.0]]}}"#;
        assert!(Problem::from_json_str(bad_mass).is_err());
        let empty_row = r#"{"mu":[0.5,0.5],"nu":[1.0],"logR":{"dense":[[0.0],[null]]}}"#;
        assert!(Problem::from_json_str(empty_row).is_err());
    }
}
