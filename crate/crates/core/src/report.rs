//! Tabular rendering of metric reports as CSV and aligned text.

use crate::metrics::MetricsReport;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

fn opt_pct(x: Option<f64>) -> String {
    x.map(pct).unwrap_or_else(|| "NA".to_string())
}

/// One row per labelled report. The novel-pair column appears only when some
/// report carries it. Fractions are printed as percentages with two decimals.
pub fn report_table<L: AsRef<str>>(reports: &[(L, MetricsReport)]) -> ReportTable {
    let with_novelty = reports.iter().any(|(_, r)| r.novel_pair_rate.is_some());
    let mut header = vec!["strategy", "accuracy", "repetition", "chair_s", "chair_i", "yes_last"];
    if with_novelty {
        header.push("novel_pairs");
    }
    header.extend(["expected_yes", "disconfirm_switch", "n"]);

    let rows = reports
        .iter()
        .map(|(label, r)| {
            let mut row = vec![
                label.as_ref().to_string(),
                pct(r.accuracy),
                pct(r.repetition_game_rate),
                pct(r.chair_s),
                pct(r.chair_i),
                pct(r.yes_last_turn_rate),
            ];
            if with_novelty {
                row.push(opt_pct(r.novel_pair_rate));
            }
            row.push(pct(r.expected_yes_rate));
            row.push(opt_pct(r.disconfirm_switch_rate));
            row.push(r.n_episodes.to_string());
            row
        })
        .collect();
    ReportTable {
        header: header.into_iter().map(String::from).collect(),
        rows,
    }
}

impl ReportTable {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| {
                self.rows
                    .iter()
                    .map(|r| r[c].len())
                    .chain([self.header[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (cell, w))| {
                    if i == 0 {
                        format!("{cell:<w$}")
                    } else {
                        format!("{cell:>w$}")
                    }
                })
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = line(&self.header);
        out.push('\n');
        out.push_str(&"-".repeat(out.len() - 1));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }
}
