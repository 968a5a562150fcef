use std::io::Write;
use std::time::Instant;

use qfunc_core::sim::{
    assemble_report, run_replicate, summarize_row, ExperimentPlan, ExperimentReport, ReplicateOutcome,
};
use rayon::prelude::*;

use crate::{Error, Result};

/// Where per-row progress lines go.
pub enum Progress<'a> {
    Quiet,
    Stderr,
    Writer(&'a mut dyn Write),
}

impl Progress<'_> {
    fn line(&mut self, msg: &str) {
        match self {
            Progress::Quiet => {}
            Progress::Stderr => eprintln!("{msg}"),
            Progress::Writer(w) => {
                let _ = writeln!(w, "{msg}");
            }
        }
    }
}

/// Run `plan` with replicates spread over at most `threads` workers
/// (0 = all cores). Outcomes are collected by replicate index, so the
/// report equals [`qfunc_core::sim::run_experiment`] exactly.
pub fn run_parallel(plan: &ExperimentPlan, threads: usize, mut progress: Progress<'_>) -> Result<ExperimentReport> {
    plan.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let mut rows = Vec::with_capacity(plan.n_list.len());
    for &n in &plan.n_list {
        let t = Instant::now();
        let outcomes: Vec<qfunc_core::Result<ReplicateOutcome>> =
            pool.install(|| (0..plan.replicates).into_par_iter().map(|r| run_replicate(plan, n, r)).collect());
        let row = summarize_row(plan, n, &outcomes);
        match (&row.stats, &row.error) {
            (Some(s), _) => progress.line(&format!(
                "n={n}: rmse={:.4e} coverage={:.3} ({:.1}s)",
                s.rmse,
                s.ci_coverage,
                t.elapsed().as_secs_f64()
            )),
            (None, Some(e)) => progress.line(&format!("n={n}: failed: {e}")),
            (None, None) => {}
        }
        rows.push(row);
    }
    let mut report = assemble_report(plan, rows);
    report.wall_time_s = Some(start.elapsed().as_secs_f64());
    Ok(report)
}
