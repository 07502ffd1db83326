//! Plain-text result tables: one row per training scheme, energy-error
//! columns for the full (f) and sparse (s) splits, diverged entries
//! rendered as "-".

use hamreg_core::evaluation::EnergyMetrics;

/// Scheme display order used in the result tables.
pub const SCHEME_ORDER: [&str; 6] = [
    "Baseline",
    "HNN",
    "HNN + H-Reg.",
    "CHNN",
    "CHNN + H-Reg.",
    "LNN",
];

/// One result row. `None` means the run was not performed; a metrics value
/// with `diverged = true` renders as "-".
#[derive(Debug, Clone)]
pub struct TableRow {
    pub scheme: String,
    pub full: Option<EnergyMetrics>,
    pub sparse: Option<EnergyMetrics>,
}

fn cells(m: &Option<EnergyMetrics>) -> (String, String) {
    match m {
        Some(m) if !m.diverged => (
            format!("{:.4} \u{00b1} {:.4}", m.mean, m.std),
            format!("{:.4}", m.max),
        ),
        _ => ("-".into(), "-".into()),
    }
}

/// Render an aligned table. Values are percentages of the maximum potential
/// energy.
pub fn render(title: &str, rows: &[TableRow]) -> String {
    let header = ["Scheme", "dE_f", "max dE_f", "dE_s", "max dE_s"];
    let mut grid: Vec<[String; 5]> = Vec::with_capacity(rows.len());
    for row in rows {
        let (fm, fx) = cells(&row.full);
        let (sm, sx) = cells(&row.sparse);
        grid.push([row.scheme.clone(), fm, fx, sm, sx]);
    }
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &grid {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let fmt_row = |cells: &[String]| -> String {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = String::new();
    out.push_str(title);
    out.push('\n');
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    out.push_str(&fmt_row(&header));
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in &grid {
        out.push_str(&fmt_row(row));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(mean: f64, diverged: bool) -> EnergyMetrics {
        EnergyMetrics {
            mean,
            std: 0.5,
            max: 2.0 * mean,
            n_ics: 10,
            horizon_s: 100.0,
            diverged,
        }
    }

    #[test]
    fn renders_six_rows_with_divergence_dashes() {
        let rows: Vec<TableRow> = SCHEME_ORDER
            .iter()
            .enumerate()
            .map(|(i, s)| TableRow {
                scheme: s.to_string(),
                full: Some(metrics(0.1 * (i + 1) as f64, false)),
                sparse: Some(metrics(1.0, i == 0)),
            })
            .collect();
        let text = render("energy error (% of max potential)", &rows);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3 + 6);
        // Baseline sparse columns diverged.
        assert!(lines[3].starts_with("Baseline"));
        assert!(lines[3].trim_end().ends_with("-  -") || lines[3].contains(" -"));
        assert!(lines[4].starts_with("HNN"));
        assert!(lines[4].contains("0.2000 \u{00b1} 0.5000"));
    }
}
