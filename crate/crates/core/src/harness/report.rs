use std::fmt::Write as _;
use std::path::Path;

use super::HarnessError;

pub const CSV_HEADER: &str = "condition,mean,std,n";

/// Accuracy summary of one condition, in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub condition: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MetricsRow {
    /// Mean and sample standard deviation of `accuracies`.
    pub fn from_accuracies(condition: impl Into<String>, accuracies: &[f64]) -> Self {
        let n = accuracies.len();
        let mean = if n == 0 {
            0.0
        } else {
            accuracies.iter().sum::<f64>() / n as f64
        };
        let std = if n < 2 {
            0.0
        } else {
            (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self {
            condition: condition.into(),
            mean,
            std,
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
    /// Wall-clock seconds; kept out of the CSV so reruns compare equal.
    pub runtime_secs: f64,
    pub samples: usize,
}

impl MetricsTable {
    pub fn to_csv(&self) -> Result<String, HarnessError> {
        if self.rows.is_empty() {
            return Err(HarnessError::EmptyTable);
        }
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            if r.condition.contains([',', '\n', '"']) {
                return Err(HarnessError::Report(format!("condition name {:?}", r.condition)));
            }
            writeln!(out, "{},{:.2},{:.2},{}", r.condition, r.mean, r.std, r.n).expect("string write");
        }
        Ok(out)
    }

    pub fn from_csv(text: &str) -> Result<Self, HarnessError> {
        let mut lines = text.lines();
        if lines.next() != Some(CSV_HEADER) {
            return Err(HarnessError::Report(format!("metrics CSV must start with `{CSV_HEADER}`")));
        }
        let bad = |line: &str| HarnessError::Report(format!("malformed metrics line `{line}`"));
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(bad(line));
            }
            rows.push(MetricsRow {
                condition: fields[0].to_string(),
                mean: fields[1].parse().map_err(|_| bad(line))?,
                std: fields[2].parse().map_err(|_| bad(line))?,
                n: fields[3].parse().map_err(|_| bad(line))?,
            });
        }
        if rows.is_empty() {
            return Err(HarnessError::EmptyTable);
        }
        Ok(Self {
            rows,
            runtime_secs: 0.0,
            samples: 0,
        })
    }

    /// Bar chart of the means with one-std error bars.
    pub fn to_svg(&self, title: &str) -> Result<String, HarnessError> {
        if self.rows.is_empty() {
            return Err(HarnessError::EmptyTable);
        }
        let (left, top, plot_h, bar_w, gap) = (60.0, 40.0, 260.0, 48.0, 28.0);
        let width = left + self.rows.len() as f64 * (bar_w + gap) + gap;
        let height = top + plot_h + 80.0;
        let y = |v: f64| top + plot_h * (1.0 - v.clamp(0.0, 100.0) / 100.0);
        let mut s = String::new();
        let w = &mut s;
        writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
        writeln!(
            w,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
        )
        .unwrap();
        writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
        writeln!(w, r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#, width / 2.0, escape(title)).unwrap();
        for tick in (0..=100).step_by(20) {
            let ty = y(tick as f64);
            writeln!(w, r##"<line x1="{left}" y1="{ty:.1}" x2="{:.1}" y2="{ty:.1}" stroke="#ddd"/>"##, width - gap / 2.0).unwrap();
            writeln!(w, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{tick}</text>"#, left - 6.0, ty + 4.0).unwrap();
        }
        writeln!(
            w,
            r#"<text x="14" y="{:.1}" transform="rotate(-90 14 {:.1})" text-anchor="middle">accuracy (%)</text>"#,
            top + plot_h / 2.0,
            top + plot_h / 2.0
        )
        .unwrap();
        for (i, r) in self.rows.iter().enumerate() {
            let x = left + gap + i as f64 * (bar_w + gap);
            let cx = x + bar_w / 2.0;
            let bar_top = y(r.mean);
            writeln!(
                w,
                r##"<rect x="{x:.1}" y="{bar_top:.1}" width="{bar_w:.1}" height="{:.1}" fill="#4a7ab5"/>"##,
                top + plot_h - bar_top
            )
            .unwrap();
            let (hi, lo) = (y(r.mean + r.std), y(r.mean - r.std));
            writeln!(w, r#"<line x1="{cx:.1}" y1="{hi:.1}" x2="{cx:.1}" y2="{lo:.1}" stroke="black"/>"#).unwrap();
            for ey in [hi, lo] {
                writeln!(w, r#"<line x1="{:.1}" y1="{ey:.1}" x2="{:.1}" y2="{ey:.1}" stroke="black"/>"#, cx - 6.0, cx + 6.0).unwrap();
            }
            writeln!(w, r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{:.2}</text>"#, hi - 4.0, r.mean).unwrap();
            let ly = top + plot_h + 14.0;
            writeln!(
                w,
                r#"<text x="{cx:.1}" y="{ly:.1}" text-anchor="end" transform="rotate(-30 {cx:.1} {ly:.1})">{}</text>"#,
                escape(&r.condition)
            )
            .unwrap();
        }
        writeln!(w, "</svg>").unwrap();
        Ok(s)
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Writes `<dir>/metrics.csv` and `<dir>/metrics.svg`.
pub fn emit_report(table: &MetricsTable, dir: impl AsRef<Path>, title: &str) -> Result<(), HarnessError> {
    let dir = dir.as_ref();
    let csv = table.to_csv()?;
    let svg = table.to_svg(title)?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("metrics.csv"), csv)?;
    std::fs::write(dir.join("metrics.svg"), svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> MetricsTable {
        MetricsTable {
            rows: vec![
                MetricsRow::from_accuracies("No_fold", &[80.0, 90.0]),
                MetricsRow::from_accuracies("Left<fold>", &[100.0]),
            ],
            runtime_secs: 1.5,
            samples: 10,
        }
    }

    #[test]
    fn csv_contract() {
        let csv = table().to_csv().unwrap();
        assert_eq!(csv, "condition,mean,std,n\nNo_fold,85.00,7.07,2\nLeft<fold>,100.00,0.00,1\n");
        let back = MetricsTable::from_csv(&csv).unwrap();
        assert_eq!(back.rows[0].mean, 85.0);
        assert_eq!(back.rows[1].n, 1);
    }

    #[test]
    fn empty_table_rejected() {
        let empty = MetricsTable {
            rows: vec![],
            runtime_secs: 0.0,
            samples: 0,
        };
        assert!(matches!(empty.to_csv(), Err(HarnessError::EmptyTable)));
        assert!(matches!(empty.to_svg("x"), Err(HarnessError::EmptyTable)));
        assert!(matches!(MetricsTable::from_csv("condition,mean,std,n\n"), Err(HarnessError::EmptyTable)));
        assert!(MetricsTable::from_csv("a,b\n").is_err());
    }

    #[test]
    fn svg_is_well_formed() {
        let svg = table().to_svg("Fold & ablation").unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let rects = doc.descendants().filter(|n| n.has_tag_name("rect")).count();
        assert_eq!(rects, 3);
        assert!(svg.contains("Left&lt;fold&gt;"));
    }
}
