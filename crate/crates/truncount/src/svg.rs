//! Minimal self-contained SVG boxplot rendering. Plots are 800x500 with
//! inline styles only, and embed their box statistics as a JSON `<metadata>`
//! block so they can be checked programmatically without rasterizing.

use crate::dataset::quantile_type7;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

/// Five-number summary of one box, with whiskers at the most extreme data
/// points within 1.5 IQR of the quartiles; points beyond are outliers.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BoxStats {
    /// Box label (e.g. estimator name).
    pub label: String,
    /// Group label (e.g. outlier proportion).
    pub group: String,
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

impl BoxStats {
    /// Computes box statistics from raw values. Returns None on empty input.
    pub fn from_values(label: impl Into<String>, group: impl Into<String>, values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q1 = quantile_type7(&v, 0.25);
        let median = quantile_type7(&v, 0.5);
        let q3 = quantile_type7(&v, 0.75);
        let iqr = q3 - q1;
        let (fence_lo, fence_hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let whisker_low = v.iter().copied().find(|&x| x >= fence_lo).unwrap_or(q1);
        let whisker_high = v.iter().rev().copied().find(|&x| x <= fence_hi).unwrap_or(q3);
        let outliers = v
            .iter()
            .copied()
            .filter(|&x| x < fence_lo || x > fence_hi)
            .collect();
        Some(BoxStats {
            label: label.into(),
            group: group.into(),
            n: v.len(),
            median,
            q1,
            q3,
            whisker_low,
            whisker_high,
            outliers,
        })
    }

    fn min(&self) -> f64 {
        self.outliers
            .iter()
            .copied()
            .fold(self.whisker_low, f64::min)
    }

    fn max(&self) -> f64 {
        self.outliers
            .iter()
            .copied()
            .fold(self.whisker_high, f64::max)
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders grouped boxplots. `hline` draws a dashed reference line (e.g. the
/// true population size). Box order follows the input slice; boxes sharing a
/// `group` are placed adjacently with the group label on the axis.
pub fn render_boxplot(title: &str, y_label: &str, boxes: &[BoxStats], hline: Option<f64>) -> String {
    let mut lo = hline.unwrap_or(f64::INFINITY);
    let mut hi = hline.unwrap_or(f64::NEG_INFINITY);
    for b in boxes {
        lo = lo.min(b.min());
        hi = hi.max(b.max());
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if hi - lo < 1e-12 {
        // Degenerate data: pad so the zero-height box still renders.
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sy = |v: f64| MARGIN_TOP + plot_h * (1.0 - (v - lo) / (hi - lo));
    let k = boxes.len().max(1) as f64;
    let slot = plot_w / k;
    let box_w = (slot * 0.5).min(60.0);

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    s.push_str(&format!(
        "<metadata id=\"box-data\">{}</metadata>\n",
        esc(&serde_json::to_string(boxes).expect("box stats serialize"))
    ));
    s.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"16\">{}</text>\n",
        WIDTH / 2.0,
        esc(title)
    ));
    s.push_str(&format!(
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" \
         transform=\"rotate(-90 18 {})\">{}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        esc(y_label)
    ));

    // Axes and y ticks.
    s.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{}\" \
         stroke=\"black\"/>\n<line x1=\"{MARGIN_LEFT}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" \
         stroke=\"black\"/>\n",
        MARGIN_TOP + plot_h,
        WIDTH - MARGIN_RIGHT,
    ));
    for t in 0..=5 {
        let v = lo + (hi - lo) * t as f64 / 5.0;
        let y = sy(v);
        s.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{MARGIN_LEFT}\" y2=\"{y}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" \
             font-size=\"11\">{v:.4}</text>\n",
            MARGIN_LEFT - 5.0,
            MARGIN_LEFT - 8.0,
            y + 4.0
        ));
    }

    if let Some(h) = hline {
        let y = sy(h);
        s.push_str(&format!(
            "<line x1=\"{MARGIN_LEFT}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#555\" \
             stroke-dasharray=\"6,4\"/>\n",
            WIDTH - MARGIN_RIGHT
        ));
    }

    for (i, b) in boxes.iter().enumerate() {
        let cx = MARGIN_LEFT + slot * (i as f64 + 0.5);
        let (x0, x1) = (cx - box_w / 2.0, cx + box_w / 2.0);
        let (yq1, yq3, ymed) = (sy(b.q1), sy(b.q3), sy(b.median));
        let (ywl, ywh) = (sy(b.whisker_low), sy(b.whisker_high));
        s.push_str(&format!(
            "<line x1=\"{cx}\" y1=\"{ywl}\" x2=\"{cx}\" y2=\"{yq1}\" stroke=\"black\"/>\n\
             <line x1=\"{cx}\" y1=\"{yq3}\" x2=\"{cx}\" y2=\"{ywh}\" stroke=\"black\"/>\n\
             <line x1=\"{}\" y1=\"{ywl}\" x2=\"{}\" y2=\"{ywl}\" stroke=\"black\"/>\n\
             <line x1=\"{}\" y1=\"{ywh}\" x2=\"{}\" y2=\"{ywh}\" stroke=\"black\"/>\n\
             <rect x=\"{x0}\" y=\"{yq3}\" width=\"{box_w}\" height=\"{}\" fill=\"#cfe2f3\" \
             stroke=\"black\"/>\n\
             <line x1=\"{x0}\" y1=\"{ymed}\" x2=\"{x1}\" y2=\"{ymed}\" stroke=\"black\" \
             stroke-width=\"2\"/>\n",
            cx - box_w / 4.0,
            cx + box_w / 4.0,
            cx - box_w / 4.0,
            cx + box_w / 4.0,
            (yq1 - yq3).max(0.0),
        ));
        for &o in &b.outliers {
            s.push_str(&format!(
                "<circle cx=\"{cx}\" cy=\"{}\" r=\"2.5\" fill=\"none\" stroke=\"black\"/>\n",
                sy(o)
            ));
        }
        s.push_str(&format!(
            "<text x=\"{cx}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"11\">{}</text>\n",
            MARGIN_TOP + plot_h + 18.0,
            esc(&b.label)
        ));
        s.push_str(&format!(
            "<text x=\"{cx}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"11\">{}</text>\n",
            MARGIN_TOP + plot_h + 36.0,
            esc(&b.group)
        ));
    }
    s.push_str("</svg>\n");
    s
}

/// Extracts the embedded statistics block back out of a rendered plot.
pub fn parse_metadata(svg: &str) -> Option<Vec<BoxStatsOwned>> {
    let start = svg.find("<metadata id=\"box-data\">")? + "<metadata id=\"box-data\">".len();
    let end = svg[start..].find("</metadata>")? + start;
    let raw = svg[start..end]
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&amp;", "&");
    serde_json::from_str(&raw).ok()
}

/// Deserialized form of [`BoxStats`] for consumers of rendered SVGs.
#[derive(Debug, Clone, serde::Deserialize)]
pub struct BoxStatsOwned {
    pub label: String,
    pub group: String,
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}
