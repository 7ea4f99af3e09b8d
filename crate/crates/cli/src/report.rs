//! Aligned text tables. The JSON artifacts carry the full-precision values.

use comfy_table::presets::ASCII_MARKDOWN;
use comfy_table::{CellAlignment, Table};
use mvbound_core::bounds::{BoundKind, BoundReport, OracleBounds};
use mvbound_core::experiment::{ExperimentReport, Optimized};

/// Column order of the uniform-weight comparison.
const BOUND_COLUMNS: [BoundKind; 6] = [
    BoundKind::Fo,
    BoundKind::C1,
    BoundKind::C2,
    BoundKind::Ctd,
    BoundKind::Tnd,
    BoundKind::Dis,
];

fn table(header: Vec<String>) -> Table {
    let mut t = Table::new();
    t.load_preset(ASCII_MARKDOWN).set_header(header);
    t
}

fn right_align(t: &mut Table, from: usize) {
    let n = t.column_count();
    for i in from..n {
        if let Some(c) = t.column_mut(i) {
            c.set_cell_alignment(CellAlignment::Right);
        }
    }
}

pub fn bounds_table(test_mv_loss: f64, report: &BoundReport) -> Table {
    let kinds: Vec<BoundKind> = BOUND_COLUMNS.into_iter().filter(|k| report.get(*k).is_some()).collect();
    let mut header = vec!["L(MV_u)".to_string()];
    header.extend(kinds.iter().map(|k| k.name().to_string()));
    let mut t = table(header);
    let mut row = vec![format!("{test_mv_loss:.4}")];
    row.extend(
        kinds
            .iter()
            .map(|&k| report.get(k).map(|e| e.display()).unwrap_or_default()),
    );
    t.add_row(row);
    right_align(&mut t, 0);
    t
}

pub fn optimize_loss_table(base: f64, results: &[Optimized]) -> Table {
    let mut header = vec!["L(MV_u)".to_string()];
    header.extend(results.iter().map(|o| format!("L(MV_rho*_{})", o.result.bound)));
    let mut t = table(header);
    let mut row = vec![format!("{base:.4}")];
    row.extend(results.iter().map(|o| format!("{:.4}", o.test_mv_loss)));
    t.add_row(row);
    right_align(&mut t, 0);
    t
}

pub fn optimize_bound_table(results: &[Optimized]) -> Table {
    let mut t = table(
        [
            "bound",
            "lambda-form at pi",
            "lambda-form at rho*",
            "kl-form at rho*",
            "KL(rho*||pi)",
            "outer iters",
        ]
        .map(String::from)
        .to_vec(),
    );
    for o in results {
        let r = &o.result;
        t.add_row(vec![
            r.bound.to_string(),
            format!("{:.4}", r.initial_lambda_bound),
            format!("{:.4}", r.lambda_bound),
            format!("{:.4}", r.kl_bound),
            format!("{:.4}", r.rho_star.kl()),
            r.iterations.to_string(),
        ]);
    }
    right_align(&mut t, 1);
    t
}

/// Optimized weights sorted in decreasing order, ten per line.
pub fn weights(o: &Optimized) -> String {
    let mut idx: Vec<usize> = (0..o.result.rho_star.len()).collect();
    let rho = &o.result.rho_star.rho;
    idx.sort_by(|&a, &b| rho[b].total_cmp(&rho[a]).then(a.cmp(&b)));
    let mut out = format!("rho* for {} (sorted, tree:weight)", o.result.bound);
    for chunk in idx.chunks(10) {
        out.push('\n');
        let line: Vec<String> = chunk.iter().map(|&h| format!("{h}:{:.4}", rho[h])).collect();
        out.push_str(&line.join(" "));
    }
    out
}

pub fn experiment_table(report: &ExperimentReport) -> Table {
    let metrics: Vec<&str> = report
        .groups
        .first()
        .map(|g| g.metrics.iter().map(|m| m.metric.as_str()).collect())
        .unwrap_or_default();
    let mut header = vec!["bagging".to_string(), "r".to_string()];
    header.extend(metrics.iter().map(|m| m.to_string()));
    let mut t = table(header);
    for g in &report.groups {
        let mut row = vec![g.bagging.to_string(), format!("{}", g.labeled_fraction)];
        row.extend(g.metrics.iter().map(|m| {
            if m.summary.count == 0 {
                "-".to_string()
            } else {
                format!("{:.4}±{:.4}", m.summary.mean, m.summary.std)
            }
        }));
        t.add_row(row);
    }
    right_align(&mut t, 2);
    t
}

pub fn population_table(mv_risk: f64, oracle: &OracleBounds, sample_mv_loss: f64, empirical: &BoundReport) -> Table {
    let mut header = vec!["".to_string(), "L(MV)".to_string()];
    header.extend(BOUND_COLUMNS.iter().map(|k| k.name().to_string()));
    let mut t = table(header);
    let cap = |v: f64| if v > 1.0 { ">1".to_string() } else { format!("{v:.4}") };
    let mut row = vec!["oracle".to_string(), format!("{mv_risk:.4}")];
    row.extend(
        [oracle.fo, oracle.c1, oracle.c2, oracle.ctd, oracle.tnd, oracle.dis]
            .into_iter()
            .map(cap),
    );
    t.add_row(row);
    let mut row = vec!["empirical".to_string(), format!("{sample_mv_loss:.4}")];
    row.extend(
        BOUND_COLUMNS
            .iter()
            .map(|&k| empirical.get(k).map(|e| e.display()).unwrap_or_default()),
    );
    t.add_row(row);
    right_align(&mut t, 1);
    t
}
