//! Renderers turning an `Explanation` into a shareable document: a bar
//! chart or force plot as standalone SVG, or a plain-text listing.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::explain::{format_value, Explanation};

const POSITIVE_COLOR: &str = "#d62728";
const NEGATIVE_COLOR: &str = "#1f77b4";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderStyle {
    Bar,
    Force,
    Text,
}

impl FromStr for RenderStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "bar" => Ok(RenderStyle::Bar),
            "force" => Ok(RenderStyle::Force),
            "text" => Ok(RenderStyle::Text),
            other => Err(Error::InvalidArgument(format!(
                "unknown render style '{other}', expected bar, force, or text"
            ))),
        }
    }
}

impl fmt::Display for RenderStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RenderStyle::Bar => write!(f, "bar"),
            RenderStyle::Force => write!(f, "force"),
            RenderStyle::Text => write!(f, "text"),
        }
    }
}

/// One arrow of the force plot, in prediction units.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceArrow {
    pub feature: String,
    pub condition: String,
    pub value: f64,
    /// Running total before this contribution is applied.
    pub start: f64,
    /// Running total after; `end - start == value`.
    pub end: f64,
}

/// Chain the non-zero contributions head to tail starting from the base
/// value, positive pushes first, then negative ones. The final `end` is
/// `base_value` plus the attribution sum.
pub fn force_layout(e: &Explanation) -> Vec<ForceArrow> {
    let mut positives: Vec<_> = e.contributions.iter().filter(|c| c.value > 0.0).collect();
    let mut negatives: Vec<_> = e.contributions.iter().filter(|c| c.value < 0.0).collect();
    positives.sort_by(|a, b| b.value.partial_cmp(&a.value).unwrap());
    negatives.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());

    let mut arrows = Vec::with_capacity(positives.len() + negatives.len());
    let mut at = e.base_value;
    for c in positives.into_iter().chain(negatives) {
        let next = at + c.value;
        arrows.push(ForceArrow {
            feature: c.feature.clone(),
            condition: c.condition.clone(),
            value: c.value,
            start: at,
            end: next,
        });
        at = next;
    }
    arrows
}

pub fn render_explanation(e: &Explanation, style: RenderStyle) -> String {
    match style {
        RenderStyle::Bar => render_bar(e),
        RenderStyle::Force => render_force(e),
        RenderStyle::Text => render_text(e),
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(ch),
        }
    }
    out
}

fn signed(v: f64) -> String {
    if v < 0.0 {
        format!("-{}", format_value(-v))
    } else {
        format!("+{}", format_value(v))
    }
}

fn svg_open(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"monospace\" font-size=\"12\">\n"
    )
}

fn render_text(e: &Explanation) -> String {
    let mut out = String::new();
    out.push_str(&format!("{} explanation\n", e.method));
    out.push_str(&format!("predicted = {}\n", format_value(e.predicted_value)));
    out.push_str(&format!("base      = {}\n", format_value(e.base_value)));
    if let Some(r2) = e.diagnostics.surrogate_r2 {
        out.push_str(&format!("surrogate r2 = {}\n", format_value(r2)));
    }
    if let Some(res) = e.diagnostics.solve_residual {
        out.push_str(&format!("solve residual = {}\n", format_value(res)));
    }
    let width = e
        .contributions
        .iter()
        .map(|c| signed(c.value).len())
        .max()
        .unwrap_or(0);
    for c in &e.contributions {
        out.push_str(&format!("  {:>width$}  {}\n", signed(c.value), c.condition));
    }
    out
}

fn render_bar(e: &Explanation) -> String {
    let row_h = 26.0;
    let label_w = 320.0;
    let half_w = 190.0;
    let top = 48.0;
    let n = e.contributions.len();
    let width = label_w + 2.0 * half_w + 80.0;
    let height = top + n as f64 * row_h + 16.0;
    let axis_x = label_w + half_w;
    let max_abs = e
        .contributions
        .iter()
        .map(|c| c.value.abs())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);

    let mut svg = svg_open(width, height);
    svg.push_str(&format!(
        "  <text x=\"12\" y=\"20\">{} | predicted = {} | base = {}</text>\n",
        xml_escape(&e.method.to_string()),
        format_value(e.predicted_value),
        format_value(e.base_value),
    ));
    svg.push_str(&format!(
        "  <line x1=\"{axis_x}\" y1=\"{}\" x2=\"{axis_x}\" y2=\"{}\" stroke=\"#444\"/>\n",
        top - 10.0,
        height - 8.0,
    ));
    for (i, c) in e.contributions.iter().enumerate() {
        let y = top + i as f64 * row_h;
        let len = c.value.abs() / max_abs * half_w;
        let (x, color) = if c.value >= 0.0 {
            (axis_x, POSITIVE_COLOR)
        } else {
            (axis_x - len, NEGATIVE_COLOR)
        };
        svg.push_str(&format!(
            "  <rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{len:.2}\" height=\"{:.2}\" fill=\"{color}\"/>\n",
            row_h - 8.0,
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
            label_w - 8.0,
            y + row_h / 2.0 + 2.0,
            xml_escape(&c.condition),
        ));
        let value_x = if c.value >= 0.0 { axis_x + len + 6.0 } else { axis_x - len - 6.0 };
        let anchor = if c.value >= 0.0 { "start" } else { "end" };
        svg.push_str(&format!(
            "  <text x=\"{value_x:.2}\" y=\"{:.2}\" text-anchor=\"{anchor}\">{}</text>\n",
            y + row_h / 2.0 + 2.0,
            xml_escape(&signed(c.value)),
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn render_force(e: &Explanation) -> String {
    let arrows = force_layout(e);
    let width = 760.0;
    let pad = 50.0;
    let mid_y = 70.0;
    let height = 130.0 + 16.0 * arrows.len() as f64;

    // Scale prediction units onto the horizontal axis, covering every
    // running total plus the base.
    let mut lo = e.base_value;
    let mut hi = e.base_value;
    for a in &arrows {
        lo = lo.min(a.start.min(a.end));
        hi = hi.max(a.start.max(a.end));
    }
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let to_x = |v: f64| pad + (v - lo) / span * (width - 2.0 * pad);

    let mut svg = svg_open(width, height);
    svg.push_str(&format!(
        "  <text x=\"12\" y=\"20\">{} | base = {}</text>\n",
        xml_escape(&e.method.to_string()),
        format_value(e.base_value),
    ));
    svg.push_str(&format!(
        "  <line x1=\"{pad}\" y1=\"{mid_y}\" x2=\"{:.2}\" y2=\"{mid_y}\" stroke=\"#999\"/>\n",
        width - pad,
    ));

    let base_x = to_x(e.base_value);
    svg.push_str(&format!(
        "  <line x1=\"{base_x:.2}\" y1=\"{}\" x2=\"{base_x:.2}\" y2=\"{}\" stroke=\"#444\"/>\n",
        mid_y - 16.0,
        mid_y + 16.0,
    ));
    svg.push_str(&format!(
        "  <text x=\"{base_x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">base {}</text>\n",
        mid_y + 32.0,
        format_value(e.base_value),
    ));

    if arrows.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }

    let head = 7.0f64;
    for (i, a) in arrows.iter().enumerate() {
        let (x1, x2) = (to_x(a.start), to_x(a.end));
        let color = if a.value > 0.0 { POSITIVE_COLOR } else { NEGATIVE_COLOR };
        let dir = if x2 >= x1 { 1.0 } else { -1.0 };
        let shaft_end = x2 - dir * head.min((x2 - x1).abs());
        svg.push_str(&format!(
            "  <line x1=\"{x1:.2}\" y1=\"{mid_y}\" x2=\"{shaft_end:.2}\" y2=\"{mid_y}\" \
             stroke=\"{color}\" stroke-width=\"6\"/>\n"
        ));
        svg.push_str(&format!(
            "  <polygon points=\"{x2:.2},{mid_y} {:.2},{:.2} {:.2},{:.2}\" fill=\"{color}\"/>\n",
            shaft_end,
            mid_y - 6.0,
            shaft_end,
            mid_y + 6.0,
        ));
        // Legend row per arrow: condition and signed value in reading order.
        svg.push_str(&format!(
            "  <text x=\"{pad}\" y=\"{:.2}\" fill=\"{color}\">{}  {}</text>\n",
            mid_y + 50.0 + 16.0 * i as f64,
            xml_escape(&a.condition),
            xml_escape(&signed(a.value)),
        ));
    }

    let end = arrows.last().expect("non-empty").end;
    let end_x = to_x(end);
    svg.push_str(&format!(
        "  <text x=\"{end_x:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-weight=\"bold\">{}</text>\n",
        mid_y - 24.0,
        format_value(e.predicted_value),
    ));
    svg.push_str("</svg>\n");
    svg
}
