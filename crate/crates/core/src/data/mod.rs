//! Turbofan telemetry: record/dataset types, RUL labeling, splitting,
//! scaling and a synthetic degradation generator.

mod parse;
mod scaler;
mod simulate;

pub use parse::{parse_cmapss, write_cmapss, write_csv};
pub use scaler::{apply_scaler, fit_scaler, Scaler};
pub use simulate::{simulate_degradation, SimulationConfig};

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Operational settings per record.
pub const OP_SETTING_COUNT: usize = 3;
/// Sensor channels per record.
pub const SENSOR_COUNT: usize = 21;
/// Total feature arity (settings then sensors).
pub const FEATURE_COUNT: usize = OP_SETTING_COUNT + SENSOR_COUNT;

/// One engine-unit observation for one operating cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub unit_id: u32,
    pub cycle: u32,
    pub op_settings: [f64; OP_SETTING_COUNT],
    pub sensors: [f64; SENSOR_COUNT],
    /// Remaining useful life in cycles; `None` until labeled.
    pub rul: Option<f64>,
}

impl CycleRecord {
    /// The 24 features in canonical order: settings 1-3, then sensors 1-21.
    pub fn features(&self) -> [f64; FEATURE_COUNT] {
        let mut out = [0.0; FEATURE_COUNT];
        out[..OP_SETTING_COUNT].copy_from_slice(&self.op_settings);
        out[OP_SETTING_COUNT..].copy_from_slice(&self.sensors);
        out
    }

    pub(crate) fn set_features(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), FEATURE_COUNT);
        self.op_settings.copy_from_slice(&values[..OP_SETTING_COUNT]);
        self.sensors.copy_from_slice(&values[OP_SETTING_COUNT..]);
    }
}

/// The canonical feature names: `op-setting-1..3`, `sensor-1..21`.
pub fn canonical_feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(FEATURE_COUNT);
    for i in 1..=OP_SETTING_COUNT {
        names.push(format!("op-setting-{i}"));
    }
    for i in 1..=SENSOR_COUNT {
        names.push(format!("sensor-{i}"));
    }
    names
}

/// An ordered collection of cycle records sharing the canonical schema.
///
/// Records keep their source order; rows belonging to one unit are
/// retrievable as a block through [`Dataset::unit_rows`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<CycleRecord>,
    feature_names: Vec<String>,
    provenance: String,
}

impl Dataset {
    pub fn new(records: Vec<CycleRecord>, provenance: impl Into<String>) -> Self {
        Dataset {
            records,
            feature_names: canonical_feature_names(),
            provenance: provenance.into(),
        }
    }

    pub fn records(&self) -> &[CycleRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Distinct unit ids in order of first appearance.
    pub fn unit_ids(&self) -> Vec<u32> {
        let mut seen = Vec::new();
        for r in &self.records {
            if !seen.contains(&r.unit_id) {
                seen.push(r.unit_id);
            }
        }
        seen
    }

    /// Row indices of one unit, in record order.
    pub fn unit_rows(&self, unit_id: u32) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.unit_id == unit_id)
            .map(|(i, _)| i)
            .collect()
    }

    /// All records labeled?
    pub fn is_labeled(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.rul.is_some())
    }

    /// N x 24 feature matrix in record order.
    pub fn features_matrix(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.records.len(), FEATURE_COUNT));
        for (i, r) in self.records.iter().enumerate() {
            let f = r.features();
            for (j, v) in f.iter().enumerate() {
                m[[i, j]] = *v;
            }
        }
        m
    }

    /// RUL targets in record order; errors if any record is unlabeled.
    pub fn targets(&self) -> Result<Array1<f64>> {
        self.records
            .iter()
            .map(|r| r.rul.ok_or(Error::Unlabeled))
            .collect::<Result<Vec<f64>>>()
            .map(Array1::from)
    }

    fn subset(&self, indices: &[usize], provenance_suffix: &str) -> Dataset {
        Dataset {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            provenance: format!("{}{}", self.provenance, provenance_suffix),
        }
    }
}

/// Label every record with `rul = max_cycle(unit) - cycle`, clamped to `cap`
/// when one is supplied. Existing labels are overwritten.
pub fn label_rul(ds: &Dataset, cap: Option<f64>) -> Result<Dataset> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(c) = cap {
        if !(c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rul cap must be positive, got {c}"
            )));
        }
    }
    let mut max_cycle: std::collections::BTreeMap<u32, u32> = Default::default();
    for r in &ds.records {
        let e = max_cycle.entry(r.unit_id).or_insert(0);
        *e = (*e).max(r.cycle);
    }
    let mut out = ds.clone();
    for r in &mut out.records {
        let raw = f64::from(max_cycle[&r.unit_id] - r.cycle);
        r.rul = Some(match cap {
            Some(c) => raw.min(c),
            None => raw,
        });
    }
    Ok(out)
}

/// Seeded row-level partition. `|test| = floor(test_fraction * N)`; both
/// halves keep the original record order. Pure function of
/// `(ds, test_fraction, seed)`.
pub fn split_rows(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = ds.len();
    let n_test = (test_fraction * n as f64).floor() as usize;
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let mut test_idx = indices[..n_test].to_vec();
    let mut train_idx = indices[n_test..].to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((
        ds.subset(&train_idx, "#train"),
        ds.subset(&test_idx, "#test"),
    ))
}

/// Seeded unit-level partition: whole engines go to one side or the other.
/// `floor(test_fraction * n_units)` units (at least one) form the test set.
pub fn split_units(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut units = ds.unit_ids();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    units.shuffle(&mut rng);
    let n_test_units = ((test_fraction * units.len() as f64).floor() as usize).max(1);
    let test_units: std::collections::BTreeSet<u32> =
        units[..n_test_units].iter().copied().collect();
    let (mut train_idx, mut test_idx) = (Vec::new(), Vec::new());
    for (i, r) in ds.records.iter().enumerate() {
        if test_units.contains(&r.unit_id) {
            test_idx.push(i);
        } else {
            train_idx.push(i);
        }
    }
    if train_idx.is_empty() {
        return Err(Error::InvalidArgument(
            "unit split left no training units".into(),
        ));
    }
    Ok((
        ds.subset(&train_idx, "#train-units"),
        ds.subset(&test_idx, "#test-units"),
    ))
}

/// Column subset of a feature matrix selected by a keep-mask.
pub fn select_columns(m: &Array2<f64>, mask: &[bool]) -> Array2<f64> {
    let kept: Vec<usize> = mask
        .iter()
        .enumerate()
        .filter(|(_, &k)| k)
        .map(|(i, _)| i)
        .collect();
    let mut out = Array2::zeros((m.nrows(), kept.len()));
    for (new_j, &old_j) in kept.iter().enumerate() {
        out.column_mut(new_j).assign(&m.column(old_j));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_dataset(unit_lengths: &[u32]) -> Dataset {
        let mut records = Vec::new();
        for (u, &len) in unit_lengths.iter().enumerate() {
            for t in 1..=len {
                records.push(CycleRecord {
                    unit_id: u as u32 + 1,
                    cycle: t,
                    op_settings: [0.0, 0.0, 100.0],
                    sensors: [f64::from(t); SENSOR_COUNT],
                    rul: None,
                });
            }
        }
        Dataset::new(records, "test")
    }

    #[test]
    fn label_matches_definition() {
        let ds = label_rul(&tiny_dataset(&[10]), None).unwrap();
        let r_last = &ds.records()[9];
        let r_first = &ds.records()[0];
        assert_eq!(r_last.cycle, 10);
        assert_eq!(r_last.rul, Some(0.0));
        assert_eq!(r_first.cycle, 1);
        assert_eq!(r_first.rul, Some(9.0));
    }

    #[test]
    fn label_cap_clamps() {
        let ds = label_rul(&tiny_dataset(&[10]), Some(5.0)).unwrap();
        assert_eq!(ds.records()[0].rul, Some(5.0));
        assert_eq!(ds.records()[9].rul, Some(0.0));
    }

    #[test]
    fn label_is_idempotent_and_strictly_decreasing() {
        let once = label_rul(&tiny_dataset(&[7, 12]), None).unwrap();
        let twice = label_rul(&once, None).unwrap();
        assert_eq!(once, twice);
        for unit in once.unit_ids() {
            let rows = once.unit_rows(unit);
            for pair in rows.windows(2) {
                let a = once.records()[pair[0]].rul.unwrap();
                let b = once.records()[pair[1]].rul.unwrap();
                assert!(b < a, "rul must strictly decrease within a unit");
            }
        }
    }

    #[test]
    fn label_empty_errors() {
        let ds = Dataset::new(vec![], "empty");
        assert!(matches!(label_rul(&ds, None), Err(Error::EmptyDataset)));
    }

    #[test]
    fn split_floor_arithmetic() {
        let ds = label_rul(&tiny_dataset(&[10]), None).unwrap();
        let (train, test) = split_rows(&ds, 0.2, 7).unwrap();
        assert_eq!(test.len(), 2);
        assert_eq!(train.len(), 8);
    }

    #[test]
    fn split_is_deterministic_partition() {
        let ds = label_rul(&tiny_dataset(&[30, 25, 40]), None).unwrap();
        let (tr1, te1) = split_rows(&ds, 0.2, 99).unwrap();
        let (tr2, te2) = split_rows(&ds, 0.2, 99).unwrap();
        assert_eq!(tr1.records(), tr2.records());
        assert_eq!(te1.records(), te2.records());
        assert_eq!(tr1.len() + te1.len(), ds.len());

        // Disjoint union: every original (unit, cycle) appears exactly once.
        let mut keys: Vec<(u32, u32)> = tr1
            .records()
            .iter()
            .chain(te1.records())
            .map(|r| (r.unit_id, r.cycle))
            .collect();
        keys.sort_unstable();
        let mut expected: Vec<(u32, u32)> = ds
            .records()
            .iter()
            .map(|r| (r.unit_id, r.cycle))
            .collect();
        expected.sort_unstable();
        assert_eq!(keys, expected);
    }

    #[test]
    fn split_documented_fd001_row_count() {
        // 20631 rows at fraction 0.2 under the floor rule: 4126 test rows.
        // The published 16504/4127 split of the same file rounds the other
        // way; the off-by-one is documented with the floor rule.
        let n = 20631usize;
        assert_eq!((0.2 * n as f64).floor() as usize, 4126);
        assert_eq!(16504 + 4127, n);
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let ds = tiny_dataset(&[10]);
        assert!(split_rows(&ds, 0.0, 1).is_err());
        assert!(split_rows(&ds, 1.0, 1).is_err());
        assert!(split_rows(&ds, -0.5, 1).is_err());
    }

    #[test]
    fn unit_split_keeps_units_whole() {
        let ds = label_rul(&tiny_dataset(&[10, 20, 30, 40, 50]), None).unwrap();
        let (train, test) = split_units(&ds, 0.2, 3).unwrap();
        assert_eq!(train.len() + test.len(), ds.len());
        for unit in test.unit_ids() {
            assert!(train.unit_rows(unit).is_empty());
        }
    }
}
