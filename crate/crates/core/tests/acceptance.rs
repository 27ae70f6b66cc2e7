//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ppoc::advantage::{discounted_returns, gae};
use ppoc::experiment::{
    eval_policy, eval_scripted, gradcheck, run_experiment, EvalReport, ExperimentConfig,
    TrainingRun,
};
use ppoc::rollout::StepEnd;

const SEEDS: u64 = 12;

struct Outcome {
    passed: bool,
    summary: String,
    details: Vec<String>,
}

fn outcome(passed: bool, summary: String) -> Outcome {
    Outcome {
        passed,
        summary,
        details: Vec::new(),
    }
}

fn config(env: &str, n_options: usize, eta: f64) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        env: env.to_string(),
        ..ExperimentConfig::default()
    };
    c.trainer.n_options = n_options;
    c.trainer.deliberation_cost = eta;
    c
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let report = gradcheck(20, false).expect("gradcheck runs");
    let secs = start.elapsed().as_secs_f64();
    let worst = report.max_errors.iter().cloned().fold(0.0, f64::max);
    let mut o = outcome(
        report.passed() && secs < 30.0,
        format!("gradient audit over 20 seeds, worst relative error {worst:.2e}, {secs:.1} s"),
    );
    o.details = report.to_text().lines().map(str::to_string).collect();
    o
}

fn brute_force_returns(r: &[f64], ends: &[StepEnd], bootstrap: f64, gamma: f64) -> Vec<f64> {
    (0..r.len())
        .map(|t| {
            let (mut total, mut discount, mut k) = (0.0, 1.0, t);
            loop {
                total += discount * r[k];
                discount *= gamma;
                match ends[k] {
                    StepEnd::Terminal => return total,
                    StepEnd::Truncated { bootstrap } => return total + discount * bootstrap,
                    StepEnd::Continue if k + 1 == r.len() => return total + discount * bootstrap,
                    StepEnd::Continue => k += 1,
                }
            }
        })
        .collect()
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_mc, mut td_exact) = (0.0f64, true);
    for _ in 0..100 {
        let n = rng.random_range(1..200);
        let gamma = rng.random_range(0.0..0.999);
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let ends: Vec<StepEnd> = (0..n)
            .map(|_| match rng.random_range(0..20) {
                0 => StepEnd::Terminal,
                1 => StepEnd::Truncated {
                    bootstrap: rng.random_range(-5.0..5.0),
                },
                _ => StepEnd::Continue,
            })
            .collect();
        let bootstrap = rng.random_range(-5.0..5.0);

        let (a1, _) = gae(&r, &v, &ends, bootstrap, gamma, 1.0);
        let mc = brute_force_returns(&r, &ends, bootstrap, gamma);
        for t in 0..n {
            worst_mc = worst_mc.max((a1[t] - (mc[t] - v[t])).abs());
        }
        assert_eq!(discounted_returns(&r, &ends, bootstrap, gamma).len(), n);

        let (a0, _) = gae(&r, &v, &ends, bootstrap, gamma, 0.0);
        for t in 0..n {
            let next = match ends[t] {
                StepEnd::Terminal => 0.0,
                StepEnd::Truncated { bootstrap } => bootstrap,
                StepEnd::Continue if t + 1 == n => bootstrap,
                StepEnd::Continue => v[t + 1],
            };
            td_exact &= a0[t] == r[t] + gamma * next - v[t];
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_mc <= 1e-10 && td_exact && secs < 5.0,
        format!(
            "100 random batches: max |GAE(1) - MC| = {worst_mc:.1e}, GAE(0) == TD residual exactly: {td_exact}, {secs:.2} s"
        ),
    )
}

fn criterion_3() -> Outcome {
    let probes: Vec<Vec<f64>> = (0..8)
        .map(|i| vec![-1.2 + 0.3 * i as f64, 0.1 * i as f64 - 0.4])
        .collect();
    let mut runs: Vec<TrainingRun> = [0.0, 0.1]
        .iter()
        .map(|&eta| TrainingRun::new(&config("pointmass1d", 1, eta), 0).unwrap())
        .collect();
    let mut identical = true;
    for _ in 0..3 {
        let a = runs[0].step().unwrap().clone();
        let b = runs[1].step().unwrap().clone();
        identical &= a == b;
        for p in &probes {
            identical &= runs[0].agent().actor_outputs(p).unwrap()
                == runs[1].agent().actor_outputs(p).unwrap();
            identical &= runs[0].agent().critic_outputs(p).unwrap()
                == runs[1].agent().critic_outputs(p).unwrap();
        }
    }
    outcome(
        identical,
        format!("single option, eta 0 vs 0.1 over 3 iterations: logs, losses and action distributions bit-identical: {identical}"),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let oracle = eval_scripted("pointmass1d", 100, 4).unwrap().mean_return;
    let threshold = oracle - 0.15 * oracle.abs();
    let cfg = config("pointmass1d", 1, 0.0);
    let mut passed_seeds = 0;
    let mut details = Vec::new();
    for seed in 0..SEEDS {
        let mut run = TrainingRun::new(&cfg, seed).unwrap();
        let mut last10 = f64::NEG_INFINITY;
        while run.iterations_done() < 150 {
            run.step().unwrap();
            let r = run.records();
            if r.len() >= 10 {
                last10 = r[r.len() - 10..].iter().map(|x| x.mean_return).sum::<f64>() / 10.0;
                if last10 > threshold {
                    break;
                }
            }
        }
        let ok = last10 > threshold;
        passed_seeds += usize::from(ok);
        details.push(format!(
            "seed {seed:>2}: final-10 mean return {last10:>9.3} after {:>3} iterations {}",
            run.iterations_done(),
            if ok { "ok" } else { "below threshold" }
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    let mut o = outcome(
        passed_seeds >= 10,
        format!(
            "pointmass1d, 1 option: {passed_seeds}/12 seeds beat R* - 15% = {threshold:.3} (R* = {oracle:.3}) within 150 iterations, {secs:.0} s"
        ),
    );
    o.details = details;
    o
}

/// Trains until deterministic evaluation succeeds on at least 80% of 20
/// episodes, checking every `every` iterations, or until `cap` iterations.
fn train_until_success(
    cfg: &ExperimentConfig,
    seed: u64,
    cap: usize,
    every: usize,
) -> (usize, EvalReport) {
    let mut run = TrainingRun::new(cfg, seed).unwrap();
    loop {
        run.step().unwrap();
        let done = run.iterations_done();
        if done % every == 0 || done == cap {
            let report = eval_policy(run.agent(), &cfg.env, 20, true, seed).unwrap();
            if report.success_rate >= 0.8 || done >= cap {
                return (done, report);
            }
        }
    }
}

/// One-sided sign test: P(X ≥ wins) for X ~ Binomial(wins + losses, 1/2).
fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in wins..=n {
        let mut c = 1.0;
        for j in 0..k {
            c = c * (n - j) as f64 / (j + 1) as f64;
        }
        p += c / 2f64.powi(n as i32);
    }
    p
}

fn criteria_5_and_7() -> (Outcome, Outcome) {
    let start = Instant::now();
    let options = config("icecorridor", 2, 0.05);
    let primitive = config("icecorridor", 1, 0.05);
    let (mut reached, mut wins, mut losses) = (0, 0, 0);
    let mut details = Vec::new();
    let mut specialization = Vec::new();
    let mut reports_complete = true;
    for seed in 0..SEEDS {
        let (it_o, rep_o) = train_until_success(&options, seed, 500, 5);
        let (it_p, rep_p) = train_until_success(&primitive, seed, 500, 5);
        let (so, sp) = (rep_o.success_rate, rep_p.success_rate);
        reached += usize::from(so >= 0.8);
        wins += usize::from(so > sp);
        losses += usize::from(so < sp);
        details.push(format!(
            "seed {seed:>2}: options success {so:.2} after {it_o:>3} iterations, primitive {sp:.2} after {it_p:>3}"
        ));
        if so >= 0.8 {
            let usage = rep_o.usage.as_ref();
            let on = usage.and_then(|u| u.on_ice.clone());
            let off = usage.and_then(|u| u.off_ice.clone());
            let stat = usage.and_then(|u| u.terrain_specialization());
            match (on, off, stat, usage) {
                (Some(on), Some(off), Some(stat), Some(u)) => specialization.push(format!(
                    "seed {seed:>2}: on-ice usage {:?}, off-ice usage {:?}, dominant option {} |on - off| = {stat:.3}",
                    round(&on),
                    round(&off),
                    u.dominant_option()
                )),
                _ => {
                    reports_complete = false;
                    specialization.push(format!("seed {seed:>2}: terrain-conditional usage missing"));
                }
            }
        }
    }
    let p = sign_test(wins, losses);
    let secs = start.elapsed().as_secs_f64();
    let mut c5 = outcome(
        reached >= 8 && wins >= losses,
        format!(
            "icecorridor: 2 options (eta 0.05) reach success >= 0.8 in {reached}/12 seeds within 500 iterations; \
             options vs primitive {wins} better / {losses} worse / {} tied, one-sided sign test p = {p:.3}, {secs:.0} s",
            SEEDS as usize - wins - losses
        ),
    );
    c5.details = details;
    let successful = specialization.len();
    let mut c7 = outcome(
        reports_complete && successful > 0,
        format!("terrain-conditional option usage reported for all {successful} successful seeds"),
    );
    c7.details = specialization;
    (c5, c7)
}

fn round(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1000.0).round() / 1000.0).collect()
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    const ITERATIONS: usize = 30;
    let mean_switch = |eta: f64, seed: u64| {
        let mut run = TrainingRun::new(&config("icecorridor", 2, eta), seed).unwrap();
        for _ in 0..ITERATIONS {
            run.step().unwrap();
        }
        let r = run.records();
        r[r.len() - 10..].iter().map(|x| x.switch_rate).sum::<f64>() / 10.0
    };
    let mut below = 0;
    let mut details = Vec::new();
    for seed in 0..SEEDS {
        let free = mean_switch(0.0, seed);
        let costly = mean_switch(0.1, seed);
        below += usize::from(costly < free);
        details.push(format!(
            "seed {seed:>2}: switch rate eta 0 = {free:.4}, eta 0.1 = {costly:.4}"
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    let mut o = outcome(
        below >= 9,
        format!(
            "icecorridor, 2 options, {ITERATIONS} iterations: switch rate lower with eta 0.1 than eta 0 in {below}/12 paired seeds, {secs:.0} s"
        ),
    );
    o.details = details;
    o
}

fn criterion_8() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut identical = true;
    let mut compared = 0;
    for (env, n_options) in [("icecorridor", 2), ("pointmass1d", 1)] {
        for dir in &dirs {
            let mut cfg = config(env, n_options, 0.05);
            cfg.n_seeds = 2;
            cfg.base_seed = 21;
            cfg.trainer.iterations = 3;
            cfg.trainer.horizon = 500;
            cfg.out_dir = dir.path().join(env);
            run_experiment(&cfg, |_, _| {}).unwrap();
        }
        for name in ["seed_21.csv", "seed_22.csv", "summary.csv"] {
            let read =
                |d: &tempfile::TempDir| std::fs::read(d.path().join(env).join(name)).unwrap();
            identical &= read(&dirs[0]) == read(&dirs[1]);
            compared += 1;
        }
    }
    outcome(
        identical,
        format!("two executions of the same configurations: {compared} CSV files bit-identical: {identical}"),
    )
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let report =
        |n: u32, name: &'static str, o: Outcome, results: &mut Vec<(u32, &str, Outcome)>| {
            println!(
                "criterion {n} [{}] {name}: {}",
                if o.passed { "PASS" } else { "FAIL" },
                o.summary
            );
            for d in &o.details {
                println!("    {d}");
            }
            results.push((n, name, o));
        };
    report(1, "gradient audit", criterion_1(), &mut results);
    report(2, "estimator identities", criterion_2(), &mut results);
    report(3, "PPO reduction", criterion_3(), &mut results);
    report(8, "determinism", criterion_8(), &mut results);
    report(4, "flat-task learning", criterion_4(), &mut results);
    let (c5, c7) = criteria_5_and_7();
    report(5, "compositional task", c5, &mut results);
    report(6, "deliberation-cost effect", criterion_6(), &mut results);
    report(7, "specialization report", c7, &mut results);

    results.sort_by_key(|r| r.0);
    println!(
        "\nacceptance summary ({:.0} s):",
        start.elapsed().as_secs_f64()
    );
    for (n, name, o) in &results {
        println!(
            "  criterion {n} {:<26} {}",
            name,
            if o.passed { "PASS" } else { "FAIL" }
        );
    }
    if results.iter().any(|r| !r.2.passed) {
        std::process::exit(1);
    }
}
