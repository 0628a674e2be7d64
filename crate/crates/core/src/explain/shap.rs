//! Kernel SHAP and exact Shapley enumeration over an interventional
//! coalition valuation: features outside a coalition are replaced by
//! background rows and the model outputs averaged.

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::explain::{format_value, Contribution, Diagnostics, Explanation, ExplanationMethod};
use crate::linalg::weighted_least_squares;
use crate::models::Predictor;

/// Players beyond this count switch kernel SHAP to sampled coalitions, and
/// are refused outright by the exact enumerator.
pub const FULL_ENUMERATION_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct ShapConfig {
    /// Coalition budget when sampling (more than FULL_ENUMERATION_LIMIT
    /// players); ignored under full enumeration.
    pub n_coalitions: usize,
    pub seed: u64,
    /// Player count up to which every coalition is enumerated. Tests lower
    /// it to force the sampling path on small models.
    pub full_enumeration_limit: usize,
}

impl Default for ShapConfig {
    fn default() -> Self {
        ShapConfig { n_coalitions: 2048, seed: 0, full_enumeration_limit: FULL_ENUMERATION_LIMIT }
    }
}

/// Deterministic background subsample: `size` rows drawn without replacement
/// (all rows, in order, when the matrix is smaller).
pub fn subsample_background(m: ArrayView2<f64>, size: usize, seed: u64) -> Array2<f64> {
    if m.nrows() <= size {
        return m.to_owned();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, m.nrows(), size).into_vec();
    picked.sort_unstable();
    Array2::from_shape_fn((size, m.ncols()), |(i, j)| m[[picked[i], j]])
}

/// Interventional value of a coalition: features with `keep[j] = true` take
/// the instance's values, the rest cycle through the background rows, and
/// the model outputs are averaged.
pub fn coalition_value(
    model: &dyn Predictor,
    instance: &[f64],
    background: ArrayView2<f64>,
    keep: &[bool],
) -> f64 {
    let mut buf = vec![0.0; instance.len()];
    let mut sum = 0.0;
    for row in background.rows() {
        for j in 0..instance.len() {
            buf[j] = if keep[j] { instance[j] } else { row[j] };
        }
        sum += model.predict_row(&buf);
    }
    sum / background.nrows() as f64
}

fn check_inputs(
    model: &dyn Predictor,
    instance: &[f64],
    background: ArrayView2<f64>,
    names: &[String],
) -> Result<()> {
    if background.nrows() == 0 {
        return Err(Error::DegenerateBackground);
    }
    if instance.len() != model.n_features() {
        return Err(Error::ArityMismatch { expected: model.n_features(), actual: instance.len() });
    }
    if background.ncols() != instance.len() || names.len() != instance.len() {
        return Err(Error::InvalidArgument(format!(
            "instance has {} features but background has {} columns and {} names",
            instance.len(),
            background.ncols(),
            names.len()
        )));
    }
    Ok(())
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut out = 1.0;
    for i in 0..k {
        out *= (n - i) as f64 / (i + 1) as f64;
    }
    out
}

/// Shapley kernel weight for a coalition of size `s` among `m` players.
fn shapley_kernel(m: usize, s: usize) -> f64 {
    (m - 1) as f64 / (binomial(m, s) * (s * (m - s)) as f64)
}

/// All non-trivial coalitions as bitmasks (full enumeration) with their
/// Shapley kernel weights.
fn enumerate_coalitions(m: usize) -> (Vec<u32>, Vec<f64>) {
    let mut masks = Vec::with_capacity((1usize << m) - 2);
    let mut weights = Vec::with_capacity(masks.capacity());
    for mask in 1..((1u32 << m) - 1) {
        masks.push(mask);
        weights.push(shapley_kernel(m, mask.count_ones() as usize));
    }
    (masks, weights)
}

/// Seeded coalition sample: sizes follow the Shapley kernel's size profile
/// 1/(s·(M−s)), each draw paired with its complement, unit weights.
fn sample_coalitions(m: usize, n_coalitions: usize, seed: u64) -> (Vec<u32>, Vec<f64>) {
    let mut size_weights: Vec<f64> = (1..m).map(|s| 1.0 / (s * (m - s)) as f64).collect();
    let total: f64 = size_weights.iter().sum();
    for w in size_weights.iter_mut() {
        *w /= total;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = (1u32 << m) - 1;
    let mut masks = Vec::with_capacity(n_coalitions);
    while masks.len() < n_coalitions {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut size = 1;
        for (i, w) in size_weights.iter().enumerate() {
            acc += w;
            if u <= acc {
                size = i + 1;
                break;
            }
        }
        let mut mask = 0u32;
        for idx in rand::seq::index::sample(&mut rng, m, size) {
            mask |= 1 << idx;
        }
        masks.push(mask);
        if masks.len() < n_coalitions {
            masks.push(full ^ mask); // antithetic complement
        }
    }
    let weights = vec![1.0; masks.len()];
    (masks, weights)
}

fn mask_to_keep(mask: u32, m: usize) -> Vec<bool> {
    (0..m).map(|j| mask & (1 << j) != 0).collect()
}

pub fn kernel_shap(
    model: &dyn Predictor,
    instance: &[f64],
    background: ArrayView2<f64>,
    names: &[String],
    config: &ShapConfig,
) -> Result<Explanation> {
    check_inputs(model, instance, background, names)?;
    let m = instance.len();
    if m == 0 {
        return Err(Error::EmptySelection);
    }

    let predicted = model.predict_row(instance);
    let base = coalition_value(model, instance, background, &vec![false; m]);

    if m == 1 {
        // The efficiency constraint pins the single attribution outright.
        let mut explanation = Explanation {
            method: ExplanationMethod::KernelShap,
            predicted_value: predicted,
            base_value: base,
            contributions: vec![Contribution {
                feature: names[0].clone(),
                condition: format!("{} = {}", names[0], format_value(instance[0])),
                value: predicted - base,
            }],
            diagnostics: Diagnostics { surrogate_r2: None, solve_residual: Some(0.0) },
        };
        explanation.sort();
        return Ok(explanation);
    }

    let (masks, weights) = if m <= config.full_enumeration_limit {
        enumerate_coalitions(m)
    } else {
        if config.n_coalitions < m + 2 {
            return Err(Error::InvalidArgument(format!(
                "n_coalitions must be at least arity + 2 = {}, got {}",
                m + 2,
                config.n_coalitions
            )));
        }
        sample_coalitions(m, config.n_coalitions, config.seed)
    };

    // Coalition values; the drawn set is fixed, so parallel evaluation is
    // schedule-independent.
    let values: Vec<f64> = masks
        .par_iter()
        .map(|&mask| coalition_value(model, instance, background, &mask_to_keep(mask, m)))
        .collect();

    // Constrained WLS by substitution of the last attribution:
    // phi_last = delta − Σ others, leaving an unconstrained system in m−1
    // unknowns with columns (z_j − z_last) and targets v − base − z_last·delta.
    let delta = predicted - base;
    let rows = masks.len();
    let mut a = Array2::zeros((rows, m - 1));
    let mut t = Array1::zeros(rows);
    for (r, &mask) in masks.iter().enumerate() {
        let z_last = f64::from(mask >> (m - 1) & 1);
        for j in 0..m - 1 {
            a[[r, j]] = f64::from(mask >> j & 1) - z_last;
        }
        t[r] = values[r] - base - z_last * delta;
    }
    let w = Array1::from_vec(weights);
    let head = weighted_least_squares(a.view(), t.view(), w.view(), 0.0, None)?;

    let mut phi = head.to_vec();
    let last = delta - phi.iter().sum::<f64>();
    phi.push(last);

    // Weighted RMS residual of the solved system.
    let fitted = a.dot(&head);
    let mut num = 0.0;
    let mut den = 0.0;
    for r in 0..rows {
        num += w[r] * (fitted[r] - t[r]).powi(2);
        den += w[r];
    }
    let residual = (num / den).sqrt();

    let contributions = phi
        .iter()
        .enumerate()
        .map(|(j, &v)| Contribution {
            feature: names[j].clone(),
            condition: format!("{} = {}", names[j], format_value(instance[j])),
            value: v,
        })
        .collect();
    let mut explanation = Explanation {
        method: ExplanationMethod::KernelShap,
        predicted_value: predicted,
        base_value: base,
        contributions,
        diagnostics: Diagnostics { surrogate_r2: None, solve_residual: Some(residual) },
    };
    explanation.sort();
    Ok(explanation)
}

pub fn exact_shapley(
    model: &dyn Predictor,
    instance: &[f64],
    background: ArrayView2<f64>,
    names: &[String],
    feature_subset: &[usize],
) -> Result<Explanation> {
    check_inputs(model, instance, background, names)?;
    let m = feature_subset.len();
    if m == 0 {
        return Err(Error::EmptySelection);
    }
    if m > FULL_ENUMERATION_LIMIT {
        return Err(Error::SubsetTooLarge { size: m, max: FULL_ENUMERATION_LIMIT });
    }
    for &f in feature_subset {
        if f >= instance.len() {
            return Err(Error::InvalidArgument(format!(
                "feature index {f} out of range for arity {}",
                instance.len()
            )));
        }
    }

    // Cache every coalition value; players outside the subset always take
    // the instance's values.
    let values: Vec<f64> = (0u32..(1 << m))
        .into_par_iter()
        .map(|mask| {
            let mut keep = vec![true; instance.len()];
            for (bit, &f) in feature_subset.iter().enumerate() {
                keep[f] = mask & (1 << bit) != 0;
            }
            coalition_value(model, instance, background, &keep)
        })
        .collect();

    let mut factorial = [1.0f64; FULL_ENUMERATION_LIMIT + 1];
    for i in 1..=FULL_ENUMERATION_LIMIT {
        factorial[i] = factorial[i - 1] * i as f64;
    }
    let m_fact = factorial[m];

    let mut phi = vec![0.0; m];
    for (bit, p) in phi.iter_mut().enumerate() {
        let player = 1u32 << bit;
        for mask in 0u32..(1 << m) {
            if mask & player != 0 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let coeff = factorial[s] * factorial[m - s - 1] / m_fact;
            *p += coeff * (values[(mask | player) as usize] - values[mask as usize]);
        }
    }

    let predicted = model.predict_row(instance);
    let base = values[0];
    let contributions = feature_subset
        .iter()
        .zip(&phi)
        .map(|(&f, &v)| Contribution {
            feature: names[f].clone(),
            condition: format!("{} = {}", names[f], format_value(instance[f])),
            value: v,
        })
        .collect();
    let mut explanation = Explanation {
        method: ExplanationMethod::ExactShapley,
        predicted_value: predicted,
        base_value: base,
        contributions,
        diagnostics: Diagnostics::default(),
    };
    explanation.sort();
    Ok(explanation)
}
