//! Seeded synthetic degradation data in the same schema as the parsed
//! telemetry files, for desk-scale tests and experiments when the public
//! dataset is not on disk.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{CycleRecord, Dataset, SENSOR_COUNT};
use crate::error::{Error, Result};

/// Baseline reading per sensor channel, loosely matching sea-level turbofan
/// telemetry (sensor-1 is the classic constant 518.67 fan-inlet temperature).
const SENSOR_BASE: [f64; SENSOR_COUNT] = [
    518.67, 641.82, 1589.70, 1400.60, 14.62, 21.61, 554.36, 2388.06, 9046.19, 1.30, 47.47,
    521.66, 2388.02, 8138.62, 8.4195, 0.03, 392.0, 2388.0, 100.0, 38.86, 23.3735,
];

/// Signed full-life drift per sensor channel (value added at failure).
/// Zero entries never drift even if requested.
const SENSOR_DRIFT: [f64; SENSOR_COUNT] = [
    0.0, 1.8, 12.0, 9.0, 0.0, 0.0, -3.0, 0.25, 35.0, 0.0, 0.7, -2.5, 0.25, 40.0, 0.06, 0.0,
    5.0, 0.0, 0.0, -0.45, -0.30,
];

/// Degradation time constant in cycles: drift follows
/// `base + drift * exp(-rul / TAU)`, accelerating toward failure.
const DEGRADATION_TAU: f64 = 80.0;

/// Sensor numbers (1-based) that drift by default; the rest stay constant.
pub const DEFAULT_DRIFT_SENSORS: [usize; 14] = [2, 3, 4, 7, 8, 9, 11, 12, 13, 14, 15, 17, 20, 21];

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub n_units: usize,
    pub seed: u64,
    /// Multiplier on per-sensor Gaussian noise; 0 gives noise-free drift.
    pub noise_scale: f64,
    /// 1-based sensor numbers that follow the degradation drift.
    pub drift_sensors: Vec<usize>,
    /// 1-based sensor numbers that carry pure noise around their baseline.
    pub noise_sensors: Vec<usize>,
    /// Inclusive range the per-unit lifetime is drawn from.
    pub lifetime_range: (u32, u32),
}

impl SimulationConfig {
    pub fn new(n_units: usize, seed: u64, noise_scale: f64) -> Self {
        SimulationConfig {
            n_units,
            seed,
            noise_scale,
            drift_sensors: DEFAULT_DRIFT_SENSORS.to_vec(),
            noise_sensors: Vec::new(),
            lifetime_range: (120, 360),
        }
    }

    pub fn generate(&self) -> Result<Dataset> {
        if self.n_units == 0 {
            return Err(Error::InvalidArgument("n_units must be at least 1".into()));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise_scale must be non-negative, got {}",
                self.noise_scale
            )));
        }
        if self.lifetime_range.0 < 2 || self.lifetime_range.0 > self.lifetime_range.1 {
            return Err(Error::InvalidArgument(format!(
                "invalid lifetime range {:?}",
                self.lifetime_range
            )));
        }
        for &s in self.drift_sensors.iter().chain(&self.noise_sensors) {
            if s == 0 || s > SENSOR_COUNT {
                return Err(Error::InvalidArgument(format!(
                    "sensor number {s} out of range 1..={SENSOR_COUNT}"
                )));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut records = Vec::new();
        for unit in 1..=self.n_units as u32 {
            let lifetime = rng.random_range(self.lifetime_range.0..=self.lifetime_range.1);
            for cycle in 1..=lifetime {
                let rul = f64::from(lifetime - cycle);
                let wear = (-rul / DEGRADATION_TAU).exp();
                let mut sensors = [0.0; SENSOR_COUNT];
                for (idx, slot) in sensors.iter_mut().enumerate() {
                    let number = idx + 1;
                    let base = SENSOR_BASE[idx];
                    let drift = SENSOR_DRIFT[idx];
                    let drifting = drift != 0.0 && self.drift_sensors.contains(&number);
                    let noisy = drifting || self.noise_sensors.contains(&number);
                    let mut v = base;
                    if drifting {
                        v += drift * wear;
                    }
                    if noisy {
                        let sd = if drift != 0.0 { drift.abs() / 25.0 } else { base.abs() * 1e-3 + 0.01 };
                        let eps: f64 = rng.sample(StandardNormal);
                        v += self.noise_scale * sd * eps;
                    }
                    *slot = v;
                }
                let op_noise: [f64; 2] = {
                    let a: f64 = rng.sample(StandardNormal);
                    let b: f64 = rng.sample(StandardNormal);
                    [a, b]
                };
                records.push(CycleRecord {
                    unit_id: unit,
                    cycle,
                    op_settings: [
                        -0.0007 + self.noise_scale * 0.001 * op_noise[0],
                        -0.0004 + self.noise_scale * 0.0003 * op_noise[1],
                        100.0,
                    ],
                    sensors,
                    rul: Some(rul),
                });
            }
        }
        Ok(Dataset::new(
            records,
            format!(
                "synthetic(seed={},units={},noise={})",
                self.seed, self.n_units, self.noise_scale
            ),
        ))
    }
}

/// Generate a labeled synthetic dataset with the default drift profile.
pub fn simulate_degradation(n_units: usize, seed: u64, noise_scale: f64) -> Result<Dataset> {
    SimulationConfig::new(n_units, seed, noise_scale).generate()
}
