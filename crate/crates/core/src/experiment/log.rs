//! Per-iteration records and their CSV form.

use std::fmt::Write as _;

use crate::trainer::IterationReport;

pub const LOG_SCHEMA: &str = "# ppoc-log v1";
pub const SUMMARY_SCHEMA: &str = "# ppoc-summary v1";

/// One row of a per-seed log.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    /// Environment steps taken so far.
    pub steps: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub episodes: usize,
    pub success_rate: f64,
    pub surrogate_loss: f64,
    pub option_loss: f64,
    pub value_loss: f64,
    pub termination_loss: f64,
    pub approx_kl: f64,
    pub switch_rate: f64,
    pub change_rate: f64,
    pub usage: Vec<f64>,
    pub ice_usage: Option<Vec<f64>>,
    pub ground_usage: Option<Vec<f64>>,
}

impl IterationRecord {
    pub fn from_report(iteration: usize, steps: usize, report: &IterationReport) -> Self {
        Self {
            iteration,
            steps,
            mean_return: report.mean_return,
            std_return: report.std_return,
            episodes: report.episodes,
            success_rate: report.success_rate,
            surrogate_loss: report.surrogate_loss,
            option_loss: report.option_loss,
            value_loss: report.value_loss,
            termination_loss: report.termination_loss,
            approx_kl: report.approx_kl,
            switch_rate: report.usage.switch_rate,
            change_rate: report.usage.change_rate,
            usage: report.usage.frequencies.clone(),
            ice_usage: report.usage.on_ice.clone(),
            ground_usage: report.usage.off_ice.clone(),
        }
    }
}

/// Every iteration of one seed's training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub env: String,
    pub seed: u64,
    pub n_options: usize,
    pub has_terrain: bool,
    pub records: Vec<IterationRecord>,
}

fn push_optional(out: &mut String, values: &Option<Vec<f64>>, n: usize) {
    for i in 0..n {
        out.push(',');
        if let Some(v) = values {
            let _ = write!(out, "{}", v[i]);
        }
    }
}

impl RunLog {
    pub fn header(&self) -> String {
        let mut h = String::from(
            "iteration,steps,return_mean,return_std,episodes,success_rate,\
             surrogate_loss,option_loss,value_loss,termination_loss,approx_kl,\
             switch_rate,change_rate",
        );
        let mut columns = |prefix: &str| {
            for i in 0..self.n_options {
                let _ = write!(h, ",{prefix}_{i}");
            }
        };
        columns("usage");
        if self.has_terrain {
            columns("ice_usage");
            columns("ground_usage");
        }
        h
    }

    /// The log as CSV: a schema comment, a header row, one row per iteration.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "{LOG_SCHEMA} env={} seed={} n_options={}\n{}\n",
            self.env,
            self.seed,
            self.n_options,
            self.header()
        );
        for r in &self.records {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.iteration,
                r.steps,
                r.mean_return,
                r.std_return,
                r.episodes,
                r.success_rate,
                r.surrogate_loss,
                r.option_loss,
                r.value_loss,
                r.termination_loss,
                r.approx_kl,
                r.switch_rate,
                r.change_rate,
            );
            for u in &r.usage {
                let _ = write!(out, ",{u}");
            }
            if self.has_terrain {
                push_optional(&mut out, &r.ice_usage, self.n_options);
                push_optional(&mut out, &r.ground_usage, self.n_options);
            }
            out.push('\n');
        }
        out
    }
}

/// Cross-seed aggregate for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub iteration: usize,
    pub steps: usize,
    pub return_mean: f64,
    /// Standard deviation of the per-seed mean returns.
    pub return_std: f64,
    pub success_rate_mean: f64,
    pub switch_rate_mean: f64,
    pub seeds: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregates logs iteration by iteration, over the seeds that reached it.
pub fn summarize(logs: &[RunLog]) -> Vec<SummaryRow> {
    let longest = logs.iter().map(|l| l.records.len()).max().unwrap_or(0);
    (0..longest)
        .map(|i| {
            let rows: Vec<&IterationRecord> =
                logs.iter().filter_map(|l| l.records.get(i)).collect();
            let pick =
                |f: fn(&IterationRecord) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<_>>();
            let (return_mean, return_std) = mean_std(&pick(|r| r.mean_return));
            SummaryRow {
                iteration: rows[0].iteration,
                steps: rows[0].steps,
                return_mean,
                return_std,
                success_rate_mean: mean_std(&pick(|r| r.success_rate)).0,
                switch_rate_mean: mean_std(&pick(|r| r.switch_rate)).0,
                seeds: rows.len(),
            }
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = format!(
        "{SUMMARY_SCHEMA}\niteration,steps,return_mean,return_std,success_rate_mean,switch_rate_mean,seeds\n"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.iteration,
            r.steps,
            r.return_mean,
            r.return_std,
            r.success_rate_mean,
            r.switch_rate_mean,
            r.seeds
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(iteration: usize, ret: f64) -> IterationRecord {
        IterationRecord {
            iteration,
            steps: iteration * 10,
            mean_return: ret,
            std_return: 0.0,
            episodes: 1,
            success_rate: 1.0,
            surrogate_loss: 0.0,
            option_loss: 0.0,
            value_loss: 0.0,
            termination_loss: 0.0,
            approx_kl: 0.0,
            switch_rate: 0.5,
            change_rate: 0.25,
            usage: vec![0.75, 0.25],
            ice_usage: None,
            ground_usage: Some(vec![0.75, 0.25]),
        }
    }

    #[test]
    fn csv_layout() {
        let log = RunLog {
            env: "icecorridor".into(),
            seed: 3,
            n_options: 2,
            has_terrain: true,
            records: vec![record(1, -1.5), record(2, 2.0)],
        };
        let csv = log.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with(LOG_SCHEMA));
        let columns = lines[1].split(',').count();
        assert_eq!(columns, 13 + 6);
        assert!(lines[1].ends_with("ground_usage_1"));
        for row in &lines[2..] {
            assert_eq!(row.split(',').count(), columns);
        }
        assert_eq!(
            lines[2],
            "1,10,-1.5,0,1,1,0,0,0,0,0,0.5,0.25,0.75,0.25,,,0.75,0.25"
        );
    }

    #[test]
    fn flat_task_has_no_terrain_columns() {
        let log = RunLog {
            env: "pointmass1d".into(),
            seed: 0,
            n_options: 2,
            has_terrain: false,
            records: vec![record(1, 0.0)],
        };
        assert!(!log.header().contains("ice"));
        assert_eq!(log.to_csv().lines().nth(2).unwrap().split(',').count(), 15);
    }

    #[test]
    fn summary_across_seeds() {
        let logs: Vec<RunLog> = [[1.0, 3.0], [3.0, 5.0]]
            .iter()
            .enumerate()
            .map(|(seed, rets)| RunLog {
                env: "pointmass1d".into(),
                seed: seed as u64,
                n_options: 2,
                has_terrain: false,
                records: rets
                    .iter()
                    .enumerate()
                    .map(|(i, &r)| record(i + 1, r))
                    .collect(),
            })
            .collect();
        let rows = summarize(&logs);
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].return_mean, rows[0].return_std), (2.0, 1.0));
        assert_eq!((rows[1].return_mean, rows[1].return_std), (4.0, 1.0));
        let csv = summary_csv(&rows);
        assert_eq!(csv.lines().nth(2).unwrap(), "1,10,2,1,1,0.5,2");
    }
}
