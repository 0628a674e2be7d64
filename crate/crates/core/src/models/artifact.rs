//! Versioned model persistence: family tag, learned parameters, feature
//! mask, and the scaler travel together so a saved model can score raw
//! telemetry rows byte-for-byte identically after a reload.

use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::data::Scaler;
use crate::error::{Error, Result};
use crate::models::{ModelFamily, ModelKind};

pub const ARTIFACT_VERSION: u32 = 1;

/// A trained model plus everything needed to apply it to raw feature rows:
/// the fitted scaler and the mask of features kept after selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub model: ModelKind,
    pub scaler: Scaler,
    /// Over raw features; true marks a column the model consumes.
    pub feature_mask: Vec<bool>,
    /// Raw feature names, parallel to the mask.
    pub feature_names: Vec<String>,
}

impl TrainedModel {
    pub fn new(
        model: ModelKind,
        scaler: Scaler,
        feature_mask: Vec<bool>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let artifact = TrainedModel {
            format_version: ARTIFACT_VERSION,
            model,
            scaler,
            feature_mask,
            feature_names,
        };
        artifact.validate()?;
        Ok(artifact)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != ARTIFACT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: self.format_version,
                expected: ARTIFACT_VERSION,
            });
        }
        let arity = self.feature_mask.len();
        if self.feature_names.len() != arity || self.scaler.arity() != arity {
            return Err(Error::InvalidArgument(format!(
                "artifact inconsistent: {} mask entries, {} names, scaler arity {}",
                arity,
                self.feature_names.len(),
                self.scaler.arity()
            )));
        }
        let kept = self.feature_mask.iter().filter(|&&k| k).count();
        if self.model.predictor().n_features() != kept {
            return Err(Error::InvalidArgument(format!(
                "artifact inconsistent: model expects {} features but the mask keeps {}",
                self.model.predictor().n_features(),
                kept
            )));
        }
        Ok(())
    }

    pub fn family(&self) -> ModelFamily {
        self.model.family()
    }

    pub fn raw_arity(&self) -> usize {
        self.feature_mask.len()
    }

    pub fn active_indices(&self) -> Vec<usize> {
        self.feature_mask
            .iter()
            .enumerate()
            .filter_map(|(i, &keep)| keep.then_some(i))
            .collect()
    }

    pub fn active_feature_names(&self) -> Vec<String> {
        self.active_indices().iter().map(|&i| self.feature_names[i].clone()).collect()
    }

    /// Scale a raw row and keep only the masked-in columns, yielding the
    /// vector the inner model consumes.
    pub fn project(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.feature_mask.len() {
            return Err(Error::ArityMismatch {
                expected: self.feature_mask.len(),
                actual: raw.len(),
            });
        }
        let mut scaled = raw.to_vec();
        self.scaler.transform_row(&mut scaled);
        Ok(scaled
            .iter()
            .zip(&self.feature_mask)
            .filter_map(|(&v, &keep)| keep.then_some(v))
            .collect())
    }

    pub fn predict_raw(&self, raw: &[f64]) -> Result<f64> {
        let projected = self.project(raw)?;
        self.model.predictor().predict(&projected)
    }

    pub fn predict_raw_batch(&self, m: ArrayView2<f64>) -> Result<Array1<f64>> {
        if m.ncols() != self.feature_mask.len() {
            return Err(Error::ArityMismatch {
                expected: self.feature_mask.len(),
                actual: m.ncols(),
            });
        }
        let mut out = Vec::with_capacity(m.nrows());
        for row in m.rows() {
            let projected = match row.as_slice() {
                Some(s) => self.project(s)?,
                None => self.project(&row.to_vec())?,
            };
            out.push(self.model.predictor().predict_row(&projected));
        }
        Ok(Array1::from_vec(out))
    }

    pub fn save<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn save_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut writer = BufWriter::new(File::create(path)?);
        self.save(&mut writer)?;
        writer.flush()?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<Self> {
        // Version is checked on the raw value first, so artifacts from a
        // future format fail with a version error rather than a parse error.
        let value: serde_json::Value = serde_json::from_reader(reader)?;
        let version = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::InvalidArgument("artifact lacks a format_version".into()))?;
        if version != u64::from(ARTIFACT_VERSION) {
            return Err(Error::UnsupportedVersion {
                found: version as u32,
                expected: ARTIFACT_VERSION,
            });
        }
        let artifact: TrainedModel = serde_json::from_value(value)?;
        artifact.validate()?;
        Ok(artifact)
    }

    pub fn load_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::load(BufReader::new(File::open(path)?))
    }
}
