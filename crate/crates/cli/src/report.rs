//! `report` subcommand: merge results files and print per-metric
//! comparison tables with significance marks.

use std::path::PathBuf;

use clq_core::evaluation::{read_results_tsv, summarize, MethodSummary, MetricSummary};

use crate::CliError;

pub fn run_report(paths: &[PathBuf]) -> Result<String, CliError> {
    if paths.is_empty() {
        return Err(CliError::Config("no results files given".into()));
    }
    let mut records = Vec::new();
    for path in paths {
        let mut part = read_results_tsv(path).map_err(|e| {
            CliError::Config(format!("cannot read results {}: {e}", path.display()))
        })?;
        records.append(&mut part);
    }
    let summaries = summarize(&records).map_err(|e| CliError::Pipeline {
        stage: "report",
        message: e.to_string(),
    })?;
    Ok(summary_table(&summaries))
}

/// Plain-text comparison table: one block per metric, the best method
/// marked, non-best methods carrying their significance mark against it.
pub fn summary_table(summaries: &[MethodSummary]) -> String {
    let name_width = summaries
        .iter()
        .map(|s| s.method.len())
        .max()
        .unwrap_or(6)
        .max("method".len());
    let mut out = String::new();

    let block = |out: &mut String, title: &str, pick: fn(&MethodSummary) -> &MetricSummary| {
        out.push_str(&format!("{title}\n"));
        out.push_str(&format!(
            "  {:<name_width$}  {:>10}  {:<5}  {:>10}\n",
            "method", "mean", "mark", "p-vs-best"
        ));
        let mut rows: Vec<&MethodSummary> = summaries.iter().collect();
        rows.sort_by(|a, b| pick(a).mean.total_cmp(&pick(b).mean));
        for s in rows {
            let m = pick(s);
            out.push_str(&format!(
                "  {:<name_width$}  {:>10.6}  {:<5}  {:>10.6}\n",
                s.method,
                m.mean,
                m.mark.as_str(),
                m.p_vs_best
            ));
        }
    };

    block(&mut out, "AE", |s| &s.ae);
    out.push('\n');
    block(&mut out, "RAE", |s| &s.rae);
    out.push('\n');
    block(&mut out, "KLD", |s| &s.kld);

    let degenerate: usize = summaries.iter().map(|s| s.degenerate_count).sum();
    if degenerate > 0 {
        out.push_str(&format!(
            "\n{degenerate} sample estimate(s) fell back to the unadjusted value (degenerate rates)\n"
        ));
    }
    out
}
