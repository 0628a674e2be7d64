//! Model-agnostic local explanations: tabular LIME, Kernel SHAP with an
//! exact-Shapley oracle, and renderers for bar, force, and text layouts.
//!
//! All methods treat the model as an opaque predict function over some
//! feature space. Callers that explain a full pipeline pass a predictor in
//! raw units (scaling and masking folded inside), so condition strings come
//! out in original units.

pub mod lime;
pub mod render;
pub mod shap;

pub use lime::{lime_explain, LimeConfig};
pub use render::{force_layout, render_explanation, ForceArrow, RenderStyle};
pub use shap::{coalition_value, exact_shapley, kernel_shap, subsample_background, ShapConfig};

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplanationMethod {
    Lime,
    KernelShap,
    ExactShapley,
}

impl fmt::Display for ExplanationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExplanationMethod::Lime => "lime",
            ExplanationMethod::KernelShap => "kernel_shap",
            ExplanationMethod::ExactShapley => "exact_shapley",
        };
        f.write_str(s)
    }
}

/// One feature's part in an explanation: a signed weight or attribution and
/// a human-readable condition in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub feature: String,
    /// E.g. "sensor-1 =< 518.67" (LIME bins) or "sensor-14 = 8.151" (SHAP).
    pub condition: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Weighted R² of the LIME surrogate; absent when undefined (zero
    /// weighted variance in the model outputs).
    pub surrogate_r2: Option<f64>,
    /// Weighted RMS residual of the constrained SHAP least-squares solve.
    pub solve_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub method: ExplanationMethod,
    /// Model output on the explained instance, in RUL cycles.
    pub predicted_value: f64,
    /// Mean model output over the background, in RUL cycles.
    pub base_value: f64,
    /// Sorted by |value| descending; ties keep feature order.
    pub contributions: Vec<Contribution>,
    pub diagnostics: Diagnostics,
}

impl Explanation {
    /// Restores the sort invariant after construction.
    pub(crate) fn sort(&mut self) {
        self.contributions
            .sort_by(|a, b| b.value.abs().partial_cmp(&a.value.abs()).unwrap());
    }

    /// |base + Σ contributions − prediction|; bounded by 1e-6 for the SHAP
    /// methods (local accuracy), unconstrained for LIME.
    pub fn local_accuracy_gap(&self) -> f64 {
        let total: f64 = self.contributions.iter().map(|c| c.value).sum();
        (self.base_value + total - self.predicted_value).abs()
    }
}

/// Compact value formatting for conditions and labels: four decimals with
/// trailing zeros trimmed, so 518.67 stays "518.67" and 8.1510 is "8.151".
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let s = format!("{v:.4}");
    let trimmed = s.trim_end_matches('0').trim_end_matches('.');
    trimmed.to_string()
}
