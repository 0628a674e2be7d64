//! Tabular LIME: quartile-bin perturbations around one instance, an
//! exponential kernel over binary match vectors, and a weighted ridge
//! surrogate whose coefficients are the explanation.

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::explain::{format_value, Contribution, Diagnostics, Explanation, ExplanationMethod};
use crate::linalg::weighted_least_squares;
use crate::models::Predictor;

#[derive(Debug, Clone, PartialEq)]
pub struct LimeConfig {
    pub n_samples: usize,
    /// Number of features kept in the final surrogate; clamped to the arity.
    pub k_features: usize,
    pub seed: u64,
    /// Kernel width; defaults to 0.75·sqrt(arity) when unset.
    pub kernel_width: Option<f64>,
    pub ridge: f64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig { n_samples: 5000, k_features: 8, seed: 0, kernel_width: None, ridge: 1e-3 }
    }
}

/// Quartile discretization of one feature, built from background statistics.
struct FeatureBins {
    /// Up to three ascending distinct edges; empty for a constant feature.
    edges: Vec<f64>,
    /// Background values grouped by bin, for reconstruction draws.
    pools: Vec<Vec<f64>>,
    /// Flat copy of the column as the fallback pool.
    all: Vec<f64>,
}

impl FeatureBins {
    fn bin_of(&self, v: f64) -> usize {
        self.edges.iter().filter(|&&e| v > e).count()
    }

    fn condition(&self, name: &str, v: f64) -> String {
        if self.edges.is_empty() {
            return format!("{} = {}", name, format_value(v));
        }
        let b = self.bin_of(v);
        if b == 0 {
            format!("{} =< {}", name, format_value(self.edges[0]))
        } else if b == self.edges.len() {
            format!("{} > {}", name, format_value(self.edges[b - 1]))
        } else {
            format!(
                "{} < {} =< {}",
                format_value(self.edges[b - 1]),
                name,
                format_value(self.edges[b])
            )
        }
    }
}

/// Quantile with midpoint interpolation: the average of the two
/// order statistics straddling the fractional position.
fn quantile_midpoint(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        (sorted[lo] + sorted[hi]) / 2.0
    }
}

fn build_bins(background: ArrayView2<f64>) -> Vec<FeatureBins> {
    let mut bins = Vec::with_capacity(background.ncols());
    for col in background.columns() {
        let all: Vec<f64> = col.iter().cloned().collect();
        let mut sorted = all.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut edges: Vec<f64> = [0.25, 0.5, 0.75]
            .iter()
            .map(|&q| quantile_midpoint(&sorted, q))
            .collect();
        edges.dedup();
        if edges.len() == 1 && sorted.first() == sorted.last() {
            edges.clear(); // constant column: a single degenerate bin
        }
        let mut feature = FeatureBins { edges, pools: Vec::new(), all };
        let n_bins = feature.edges.len() + 1;
        let mut pools = vec![Vec::new(); n_bins];
        for &v in &feature.all {
            pools[feature.bin_of(v)].push(v);
        }
        feature.pools = pools;
        bins.push(feature);
    }
    bins
}

pub fn lime_explain(
    model: &dyn Predictor,
    instance: &[f64],
    background: ArrayView2<f64>,
    names: &[String],
    config: &LimeConfig,
) -> Result<Explanation> {
    let m = instance.len();
    if background.nrows() == 0 {
        return Err(Error::DegenerateBackground);
    }
    if instance.len() != model.n_features() {
        return Err(Error::ArityMismatch { expected: model.n_features(), actual: m });
    }
    if background.ncols() != m || names.len() != m {
        return Err(Error::InvalidArgument(format!(
            "instance has {m} features but background has {} columns and {} names",
            background.ncols(),
            names.len()
        )));
    }
    if config.n_samples < 100 {
        return Err(Error::InvalidArgument(format!(
            "n_samples must be at least 100, got {}",
            config.n_samples
        )));
    }
    if config.k_features == 0 {
        return Err(Error::EmptySelection);
    }
    let k = config.k_features.min(m);

    let bins = build_bins(background);
    if bins.iter().all(|b| b.edges.is_empty()) {
        return Err(Error::DegenerateBackground);
    }

    // Perturbations are drawn sequentially from one stream, fixing the
    // sample set before any model evaluation.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_samples;
    let mut z = Array2::<f64>::zeros((n, m));
    let mut x_pert = Array2::<f64>::zeros((n, m));
    let mut weights = Array1::<f64>::zeros(n);
    let sigma = config.kernel_width.unwrap_or(0.75 * (m as f64).sqrt());
    let sigma2 = sigma * sigma;
    for s in 0..n {
        let mut dropped = 0usize;
        for j in 0..m {
            let keep = rng.random::<bool>();
            if keep {
                z[[s, j]] = 1.0;
                x_pert[[s, j]] = instance[j];
            } else {
                dropped += 1;
                let b = &bins[j];
                let own = b.bin_of(instance[j]);
                // Uniform draw over background values outside the instance's
                // bin; a feature with nothing there falls back to the full
                // column.
                let pool_size: usize = b
                    .pools
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != own)
                    .map(|(_, p)| p.len())
                    .sum();
                let value = if pool_size == 0 {
                    b.all[rng.random_range(0..b.all.len())]
                } else {
                    let mut idx = rng.random_range(0..pool_size);
                    let mut chosen = f64::NAN;
                    for (i, p) in b.pools.iter().enumerate() {
                        if i == own {
                            continue;
                        }
                        if idx < p.len() {
                            chosen = p[idx];
                            break;
                        }
                        idx -= p.len();
                    }
                    chosen
                };
                x_pert[[s, j]] = value;
            }
        }
        // d² in z-space is the number of dropped features.
        weights[s] = (-(dropped as f64) / sigma2).exp();
    }

    let outputs: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|s| {
            let row = x_pert.row(s);
            model.predict_row(row.as_slice().expect("row-major layout"))
        })
        .collect();
    let y = Array1::from_vec(outputs);

    // Preliminary ridge over all features picks the k largest coefficients.
    let full_fit = ridge_fit(&z, &y, &weights, config.ridge, m)?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        full_fit[b].abs().partial_cmp(&full_fit[a].abs()).unwrap().then(a.cmp(&b))
    });
    let mut selected: Vec<usize> = order.into_iter().take(k).collect();
    selected.sort_unstable();

    // Final surrogate on the selected columns only.
    let z_sel = Array2::from_shape_fn((n, selected.len()), |(s, j)| z[[s, selected[j]]]);
    let sel_fit = ridge_fit(&z_sel, &y, &weights, config.ridge, selected.len())?;

    // Weighted R² of the final surrogate; undefined when the outputs carry
    // no weighted variance (constant model).
    let w_total = weights.sum();
    let y_bar = weights.dot(&y) / w_total;
    let mut ss_tot = 0.0;
    let mut ss_res = 0.0;
    for s in 0..n {
        let pred = sel_fit[selected.len()]
            + (0..selected.len()).map(|j| sel_fit[j] * z_sel[[s, j]]).sum::<f64>();
        ss_res += weights[s] * (y[s] - pred).powi(2);
        ss_tot += weights[s] * (y[s] - y_bar).powi(2);
    }
    let surrogate_r2 =
        if ss_tot > 1e-12 * w_total.max(1.0) { Some(1.0 - ss_res / ss_tot) } else { None };

    let contributions = selected
        .iter()
        .enumerate()
        .map(|(j, &f)| Contribution {
            feature: names[f].clone(),
            condition: bins[f].condition(&names[f], instance[f]),
            value: sel_fit[j],
        })
        .collect();
    let predicted = model.predict_row(instance);
    let base = background
        .rows()
        .into_iter()
        .map(|r| match r.as_slice() {
            Some(s) => model.predict_row(s),
            None => model.predict_row(&r.to_vec()),
        })
        .sum::<f64>()
        / background.nrows() as f64;
    let mut explanation = Explanation {
        method: ExplanationMethod::Lime,
        predicted_value: predicted,
        base_value: base,
        contributions,
        diagnostics: Diagnostics { surrogate_r2, solve_residual: None },
    };
    explanation.sort();
    Ok(explanation)
}

/// Weighted ridge with an unpenalized intercept; returns d coefficients
/// followed by the intercept.
fn ridge_fit(
    z: &Array2<f64>,
    y: &Array1<f64>,
    w: &Array1<f64>,
    ridge: f64,
    d: usize,
) -> Result<Array1<f64>> {
    let n = z.nrows();
    let mut design = Array2::ones((n, d + 1));
    design.slice_mut(ndarray::s![.., ..d]).assign(z);
    weighted_least_squares(design.view(), y.view(), w.view(), ridge, Some(d))
}
