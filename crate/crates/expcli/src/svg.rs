//! Minimal self-contained SVG plots: no display stack, no dependencies.

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 560.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 30.0;
const MARGIN_T: f64 = 50.0;
const MARGIN_B: f64 = 60.0;

const PALETTE: [&str; 6] = [
    "#1f6fb2", "#d1495b", "#2e8b57", "#8c61b0", "#c8851f", "#4a6572",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Scatter,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub style: Style,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            log_x: false,
            log_y: false,
            series: Vec::new(),
        }
    }

    pub fn log_log(mut self) -> Self {
        self.log_x = true;
        self.log_y = true;
        self
    }

    pub fn line(mut self, label: &str, points: Vec<(f64, f64)>) -> Self {
        self.series.push(Series {
            label: label.to_string(),
            style: Style::Line,
            points,
        });
        self
    }

    pub fn scatter(mut self, label: &str, points: Vec<(f64, f64)>) -> Self {
        self.series.push(Series {
            label: label.to_string(),
            style: Style::Scatter,
            points,
        });
        self
    }

    fn tx(&self, x: f64) -> f64 {
        if self.log_x {
            x.log10()
        } else {
            x
        }
    }

    fn ty(&self, y: f64) -> f64 {
        if self.log_y {
            y.log10()
        } else {
            y
        }
    }

    pub fn render(&self) -> String {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                if (self.log_x && x <= 0.0) || (self.log_y && y <= 0.0) {
                    continue;
                }
                let (tx, ty) = (self.tx(x), self.ty(y));
                if tx.is_finite() && ty.is_finite() {
                    xs.push(tx);
                    ys.push(ty);
                }
            }
        }
        let (x0, x1) = padded_range(&xs);
        let (y0, y1) = padded_range(&ys);
        let px = |x: f64| MARGIN_L + (self.tx(x) - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R);
        let py = |y: f64| {
            HEIGHT - MARGIN_B - (self.ty(y) - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B)
        };

        let mut out = String::new();
        out.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
        ));
        out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        out.push_str(&format!(
            "<text x=\"{}\" y=\"28\" font-family=\"sans-serif\" font-size=\"17\" \
             text-anchor=\"middle\">{}</text>\n",
            WIDTH / 2.0,
            escape(&self.title)
        ));

        // Axes box.
        out.push_str(&format!(
            "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{}\" height=\"{}\" fill=\"none\" \
             stroke=\"#333\"/>\n",
            WIDTH - MARGIN_L - MARGIN_R,
            HEIGHT - MARGIN_T - MARGIN_B
        ));

        // Ticks and grid.
        for (frac, value) in ticks(x0, x1) {
            let x = MARGIN_L + frac * (WIDTH - MARGIN_L - MARGIN_R);
            out.push_str(&format!(
                "<line x1=\"{x}\" y1=\"{MARGIN_T}\" x2=\"{x}\" y2=\"{}\" stroke=\"#ddd\"/>\n",
                HEIGHT - MARGIN_B
            ));
            out.push_str(&format!(
                "<text x=\"{x}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
                 text-anchor=\"middle\">{}</text>\n",
                HEIGHT - MARGIN_B + 18.0,
                tick_label(value, self.log_x)
            ));
        }
        for (frac, value) in ticks(y0, y1) {
            let y = HEIGHT - MARGIN_B - frac * (HEIGHT - MARGIN_T - MARGIN_B);
            out.push_str(&format!(
                "<line x1=\"{MARGIN_L}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#ddd\"/>\n",
                WIDTH - MARGIN_R
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
                 text-anchor=\"end\">{}</text>\n",
                MARGIN_L - 6.0,
                y + 4.0,
                tick_label(value, self.log_y)
            ));
        }

        // Axis labels.
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\" \
             text-anchor=\"middle\">{}</text>\n",
            WIDTH / 2.0,
            HEIGHT - 14.0,
            escape(&self.x_label)
        ));
        out.push_str(&format!(
            "<text x=\"20\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\" \
             text-anchor=\"middle\" transform=\"rotate(-90 20 {})\">{}</text>\n",
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        ));

        for (idx, s) in self.series.iter().enumerate() {
            let color = PALETTE[idx % PALETTE.len()];
            let visible: Vec<(f64, f64)> = s
                .points
                .iter()
                .copied()
                .filter(|&(x, y)| {
                    (!self.log_x || x > 0.0)
                        && (!self.log_y || y > 0.0)
                        && self.tx(x).is_finite()
                        && self.ty(y).is_finite()
                })
                .collect();
            match s.style {
                Style::Line => {
                    let path: Vec<String> = visible
                        .iter()
                        .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                        .collect();
                    out.push_str(&format!(
                        "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" \
                         stroke-width=\"1.4\"/>\n",
                        path.join(" ")
                    ));
                }
                Style::Scatter => {
                    for &(x, y) in &visible {
                        out.push_str(&format!(
                            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.2\" fill=\"{color}\" \
                             fill-opacity=\"0.75\"/>\n",
                            px(x),
                            py(y)
                        ));
                    }
                }
            }
            // Legend entry.
            let ly = MARGIN_T + 16.0 + 18.0 * idx as f64;
            out.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n",
                MARGIN_L + 10.0,
                ly - 10.0
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
                MARGIN_L + 28.0,
                ly,
                escape(&s.label)
            ));
        }
        out.push_str("</svg>\n");
        out
    }
}

fn padded_range(values: &[f64]) -> (f64, f64) {
    let (mut lo, mut hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Five evenly spaced ticks as (fraction, transformed value).
fn ticks(lo: f64, hi: f64) -> Vec<(f64, f64)> {
    (0..=4)
        .map(|i| {
            let frac = i as f64 / 4.0;
            (frac, lo + frac * (hi - lo))
        })
        .collect()
}

fn tick_label(value: f64, log: bool) -> String {
    if log {
        format!("1e{value:.1}")
    } else if value.abs() >= 1e4 || (value != 0.0 && value.abs() < 1e-3) {
        format!("{value:.2e}")
    } else {
        format!("{value:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
