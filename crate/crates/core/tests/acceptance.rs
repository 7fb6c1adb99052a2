//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line each; exits nonzero if any criterion fails.
//!
//! cargo test -p mspc-guard-core --test acceptance

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use mspc_guard::bench::{calibrate_bundle, calibration_seeds, run_experiment, ExperimentConfig, Scenario};
use mspc_guard::channel::{AttackKind, AttackSpec, Channel, Direction};
use mspc_guard::io::write_run_csv_to;
use mspc_guard::mspc::monitor::{statistics, MonitorOutput, StreamMonitor};
use mspc_guard::mspc::pca::{d_statistic, q_statistic};
use mspc_guard::sim::{simulate_run, ScenarioConfig};
use mspc_guard::{calibrate, monitor_stream, Classification, DataMatrix, MonitorBundle, RetainPolicy, View};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, budget_s: f64) -> std::result::Result<(), String> {
    ensure(
        elapsed.as_secs_f64() < budget_s,
        format!("took {:.2} s, budget {budget_s} s", elapsed.as_secs_f64()),
    )
}

fn default_config(scenario: Scenario) -> ExperimentConfig {
    ExperimentConfig {
        scenario,
        ..Default::default()
    }
}

/// Receiver value expected from a channel, computed from the window alone.
fn expected_channel(values: &[f64], times: &[f64], attack: &AttackSpec) -> Vec<f64> {
    let inside = |t: f64| t >= attack.start_h && attack.end_h.is_none_or(|e| t <= e);
    let first_inside = times.iter().position(|&t| inside(t));
    let frozen = first_inside.map(|i| if i == 0 { values[0] } else { values[i - 1] });
    values
        .iter()
        .zip(times)
        .map(|(&v, &t)| match (inside(t), attack.kind) {
            (false, _) => v,
            (true, AttackKind::Integrity { value }) => value,
            (true, AttackKind::Dos) => frozen.unwrap(),
        })
        .collect()
}

fn c1_channel_exactness() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0usize;
    for case in 0..2000 {
        let n = rng.random_range(1..400);
        let dt = rng.random_range(0.001..0.1);
        let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-1e3..1e3)).collect();
        let span = n as f64 * dt;
        let start = rng.random_range(-0.2 * span..1.1 * span);
        let end = rng.random_bool(0.5).then(|| start + rng.random_range(0.0..span));
        let attack = if case % 2 == 0 {
            AttackSpec::integrity("flow_a", Direction::ToController, rng.random_range(-5.0..5.0), start.max(0.0), end)
        } else {
            AttackSpec {
                kind: AttackKind::Dos,
                end_h: end,
                ..AttackSpec::dos("u_a", Direction::ToActuator, start.max(0.0))
            }
        };
        let mut ch = Channel::with_attack(attack.clone());
        let got: Vec<f64> = values.iter().zip(&times).map(|(&v, &t)| ch.transmit(v, t)).collect();
        let want = expected_channel(&values, &times, &attack);
        for (k, (g, w)) in got.iter().zip(&want).enumerate() {
            ensure(g.to_bits() == w.to_bits(), format!("case {case} step {k}: {g} vs {w}"))?;
        }
        let mut clean = Channel::clean();
        for (&v, &t) in values.iter().zip(&times) {
            ensure(clean.transmit(v, t).to_bits() == v.to_bits(), format!("clean channel altered {v}"))?;
        }
        checked += n;
    }
    within(started.elapsed(), 1.0)?;
    Ok(format!("{checked} transmissions exact"))
}

fn c2_pca_properties() -> Check {
    let started = Instant::now();
    let mut worst_orth = 0.0f64;
    let mut worst_recon = 0.0f64;
    let mut worst_var = 0.0f64;
    for seed in 0..20 {
        let m = 3 + (seed as usize % 6);
        let rows = correlated_rows(400, m, seed);
        let x = DataMatrix::from_rows(&rows, names(m)).unwrap();
        let model = calibrate(&x, RetainPolicy::Fixed(m)).map_err(|e| e.to_string())?;
        let p = model.loadings();
        let a = p.ncols();
        for i in 0..a {
            for j in 0..a {
                let g = p.column(i).dot(&p.column(j)) - if i == j { 1.0 } else { 0.0 };
                worst_orth = worst_orth.max(g.abs());
            }
        }
        let mut scores = vec![Vec::new(); a];
        for r in &rows {
            let pr = model.project(r).map_err(|e| e.to_string())?;
            let back = model.reconstruct_scaled(&pr.scaled);
            for (z, zh) in pr.scaled.iter().zip(&back) {
                worst_recon = worst_recon.max((z - zh).abs());
            }
            for (k, s) in pr.scores.iter().enumerate() {
                scores[k].push(vec![*s]);
            }
        }
        for (k, col) in scores.iter().enumerate() {
            let (_, sd) = mean_std(col);
            let lam = model.score_variances()[k];
            worst_var = worst_var.max((sd[0] * sd[0] - lam).abs() / lam.max(1.0));
        }
    }
    ensure(worst_orth <= 1e-8, format!("orthonormality error {worst_orth:e}"))?;
    ensure(worst_recon <= 1e-8, format!("full-rank reconstruction error {worst_recon:e}"))?;
    ensure(worst_var <= 1e-6, format!("score variance mismatch {worst_var:e}"))?;

    let toy = toy_matrix();
    let model = calibrate(&DataMatrix::from_rows(&toy, names(3)).unwrap(), RetainPolicy::Fixed(3))
        .map_err(|e| e.to_string())?;
    let (values, vecs) = jacobi_eigen(&covariance(&autoscale(&toy)));
    let mut worst_toy = 0.0f64;
    for k in 0..3 {
        worst_toy = worst_toy.max((model.score_variances()[k] - values[k]).abs());
        let col = model.loadings().column(k);
        let oracle: Vec<f64> = (0..3).map(|i| vecs[i][k]).collect();
        let sign = dot(col.as_slice(), &oracle).signum();
        for i in 0..3 {
            worst_toy = worst_toy.max((col[i] - sign * oracle[i]).abs());
        }
    }
    ensure(worst_toy <= 1e-6, format!("toy matrix deviates from reference by {worst_toy:e}"))?;
    within(started.elapsed(), 1.0)?;
    Ok(format!(
        "orth {worst_orth:.1e}, recon {worst_recon:.1e}, variance {worst_var:.1e}, toy {worst_toy:.1e}"
    ))
}

fn c3_statistics() -> Check {
    let mut worst_d = 0.0f64;
    let mut worst_q = 0.0f64;
    for seed in 0..10 {
        let m = 4 + seed as usize % 3;
        let rows = correlated_rows(300, m, 100 + seed);
        let z = autoscale(&rows);
        let (_, vecs) = jacobi_eigen(&covariance(&z));
        for a in 1..=m {
            let model = calibrate(&DataMatrix::from_rows(&rows, names(m)).unwrap(), RetainPolicy::Fixed(a))
                .map_err(|e| e.to_string())?;
            let scores: Vec<Vec<f64>> = z
                .iter()
                .map(|r| (0..a).map(|k| (0..m).map(|i| vecs[i][k] * r[i]).sum()).collect())
                .collect();
            let oracle = mahalanobis_sq(&scores);
            for (r, want) in rows.iter().zip(&oracle) {
                let p = model.project(r).map_err(|e| e.to_string())?;
                let d = d_statistic(&model, &p.scores);
                worst_d = worst_d.max((d - want).abs() / want.max(1.0));
                if a == m {
                    worst_q = worst_q.max(q_statistic(&p.residual));
                }
            }
        }
    }
    ensure(worst_d <= 1e-8, format!("D vs Mahalanobis {worst_d:e}"))?;
    ensure(worst_q <= 1e-16, format!("full-rank Q {worst_q:e}"))?;
    Ok(format!("D error {worst_d:.1e}, full-rank Q {worst_q:.1e}"))
}

fn c4_false_alarm_rate(bundle: &MonitorBundle, cfg: &ExperimentConfig) -> Check {
    let started = Instant::now();
    let cal = calibration_seeds(cfg.calibration_seed, cfg.calibration_runs);
    let seeds: Vec<u64> = (900_001..).filter(|s| !cal.contains(s)).take(4).collect();
    let (mut n, mut d_over, mut q_over) = (0usize, 0usize, 0usize);
    for seed in seeds {
        let run = simulate_run(&ScenarioConfig::attack_free("held_out", cfg.duration_h, 0.0, seed), &cfg.params)
            .map_err(|e| e.to_string())?;
        let pts = statistics(&bundle.model, &run.times, &run.process_view).map_err(|e| e.to_string())?;
        n += pts.len();
        d_over += pts.iter().filter(|p| p.d > bundle.limits.d_99).count();
        q_over += pts.iter().filter(|p| p.q > bundle.limits.q_99).count();
    }
    ensure(n >= 20_000, format!("only {n} held-out samples"))?;
    let (d_rate, q_rate) = (d_over as f64 / n as f64, q_over as f64 / n as f64);
    let ok = |r: f64| (0.005..=0.015).contains(&r);
    ensure(ok(d_rate) && ok(q_rate), format!("D {:.3}%, Q {:.3}% over {n} samples", 100.0 * d_rate, 100.0 * q_rate))?;
    within(started.elapsed(), 30.0)?;
    Ok(format!("D {:.3}%, Q {:.3}% over {n} samples", 100.0 * d_rate, 100.0 * q_rate))
}

struct ScenarioStats {
    classified: [usize; 2],
    localized: usize,
    controller_top_flow_a: usize,
    median_arl: Option<f64>,
}

fn scenario_stats(bundle: &MonitorBundle, scenario: Scenario) -> std::result::Result<ScenarioStats, String> {
    let cfg = default_config(scenario);
    let (report, _) = run_experiment(bundle, &cfg).map_err(|e| e.to_string())?;
    let count = |c: Classification| report.seeds.iter().filter(|s| s.classification == Some(c)).count();
    Ok(ScenarioStats {
        classified: [count(Classification::Disturbance), count(Classification::Attack)],
        localized: report.seeds.iter().filter(|s| s.localization_correct == Some(true)).count(),
        controller_top_flow_a: report
            .seeds
            .iter()
            .filter(|s| s.controller_top.as_deref() == Some("flow_a"))
            .count(),
        median_arl: report.aggregate.arl_median_s,
    })
}

fn c5_diagnosis(d1: &ScenarioStats, a1: &ScenarioStats, a2: &ScenarioStats, elapsed: Duration) -> Check {
    ensure(d1.controller_top_flow_a >= 9, format!("D1 controller top flow_a {}/10", d1.controller_top_flow_a))?;
    ensure(a1.controller_top_flow_a >= 9, format!("A1 controller top flow_a {}/10", a1.controller_top_flow_a))?;
    ensure(d1.classified[0] >= 9, format!("D1 disturbance {}/10", d1.classified[0]))?;
    for (name, s) in [("A1", a1), ("A2", a2)] {
        ensure(s.classified[1] >= 9, format!("{name} attack {}/10", s.classified[1]))?;
        ensure(s.localized >= 9, format!("{name} localized {}/10", s.localized))?;
    }
    within(elapsed, 120.0)?;
    Ok(format!(
        "D1 disturbance {}/10, A1 attack {}/10 localized {}/10, A2 attack {}/10 localized {}/10",
        d1.classified[0], a1.classified[1], a1.localized, a2.classified[1], a2.localized
    ))
}

fn c6_detection_speed(d1: &ScenarioStats, a1: &ScenarioStats, a2: &ScenarioStats, a3: &ScenarioStats) -> Check {
    let med = |name: &str, s: &ScenarioStats| s.median_arl.ok_or(format!("{name} never detected"));
    let (d1m, a1m, a2m, a3m) = (med("D1", d1)?, med("A1", a1)?, med("A2", a2)?, med("A3", a3)?);
    ensure(a3m >= 3.0 * a1m, format!("median A3 {a3m} s vs A1 {a1m} s"))?;
    for (name, v) in [("D1", d1m), ("A1", a1m), ("A2", a2m)] {
        ensure(v <= 600.0, format!("median {name} {v} s"))?;
    }
    Ok(format!("median D1 {d1m} s, A1 {a1m} s, A2 {a2m} s, A3 {a3m} s"))
}

fn c7_reproducibility(bundle: &MonitorBundle, cfg: &ExperimentConfig) -> Check {
    let again = calibrate_bundle(cfg).map_err(|e| e.to_string())?;
    let (a, b) = (bundle.to_json().map_err(|e| e.to_string())?, again.to_json().map_err(|e| e.to_string())?);
    ensure(a == b, "model JSON differs between calibrations")?;
    let scenario = Scenario::A2.config(cfg.duration_h, cfg.onset_h, 4).map_err(|e| e.to_string())?;
    let csv = || -> std::result::Result<Vec<u8>, String> {
        let run = simulate_run(&scenario, &cfg.params).map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        write_run_csv_to(&run, &mut buf).map_err(|e| e.to_string())?;
        Ok(buf)
    };
    let (x, y) = (csv()?, csv()?);
    ensure(x == y, "run CSV differs between reruns")?;
    Ok(format!("model {} bytes, run CSV {} bytes identical", a.len(), x.len()))
}

fn c8_chunked_monitoring(bundle: &MonitorBundle, cfg: &ExperimentConfig) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut compared = 0usize;
    for (scenario, seed) in [(Scenario::A1, 2), (Scenario::D1, 3), (Scenario::A3, 5)] {
        let run = simulate_run(&scenario.config(cfg.duration_h, cfg.onset_h, seed).map_err(|e| e.to_string())?, &cfg.params)
            .map_err(|e| e.to_string())?;
        for view in View::BOTH {
            let data = match view {
                View::Controller => &run.controller_view,
                View::Process => &run.process_view,
            };
            let batch = monitor_stream(&bundle.model, &bundle.limits, view, &run.times, data).map_err(|e| e.to_string())?;
            let mut mon = StreamMonitor::new(&bundle.model, &bundle.limits, view);
            let mut chunked = MonitorOutput::default();
            let mut start = 0;
            while start < run.len() {
                let end = (start + rng.random_range(1..500)).min(run.len());
                let chunk: Vec<Vec<f64>> = (start..end).map(|i| data.row(i).to_vec()).collect();
                chunked.extend(mon.push_rows(&run.times[start..end], &chunk).map_err(|e| e.to_string())?);
                start = end;
            }
            ensure(chunked == batch, format!("{scenario} seed {seed} {} view differs", view.label()))?;
            compared += batch.points.len();
        }
    }
    Ok(format!("{compared} points identical"))
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |id: usize, name: &str, started: Instant, result: Check| {
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  criterion {id}: {name} ({secs:.2} s): {detail}"),
            Err(why) => {
                failures += 1;
                println!("FAIL  criterion {id}: {name} ({secs:.2} s): {why}");
            }
        }
    };

    let t = Instant::now();
    report(1, "channel exactness", t, c1_channel_exactness());
    let t = Instant::now();
    report(2, "PCA properties", t, c2_pca_properties());
    let t = Instant::now();
    report(3, "D and Q statistics", t, c3_statistics());

    let cfg = default_config(Scenario::D1);
    let bundle = match calibrate_bundle(&cfg) {
        Ok(b) => b,
        Err(e) => {
            for (id, name) in [(4, "held-out false alarm rate"), (5, "diagnosis"), (6, "detection speed"), (7, "reproducibility"), (8, "chunked monitoring")] {
                report(id, name, Instant::now(), Err(format!("calibration failed: {e}")));
            }
            return ExitCode::FAILURE;
        }
    };

    let t = Instant::now();
    report(4, "held-out false alarm rate", t, c4_false_alarm_rate(&bundle, &cfg));

    let t = Instant::now();
    let stats: std::result::Result<Vec<ScenarioStats>, String> =
        [Scenario::D1, Scenario::A1, Scenario::A2].into_iter().map(|s| scenario_stats(&bundle, s)).collect();
    let elapsed = t.elapsed();
    let a3 = scenario_stats(&bundle, Scenario::A3);
    match (&stats, &a3) {
        (Ok(s), Ok(a3)) => {
            report(5, "diagnosis", t, c5_diagnosis(&s[0], &s[1], &s[2], elapsed));
            report(6, "detection speed", t, c6_detection_speed(&s[0], &s[1], &s[2], a3));
        }
        (Err(e), _) | (_, Err(e)) => {
            report(5, "diagnosis", t, Err(e.clone()));
            report(6, "detection speed", t, Err(e.clone()));
        }
    }

    let t = Instant::now();
    report(7, "reproducibility", t, c7_reproducibility(&bundle, &cfg));
    let t = Instant::now();
    report(8, "chunked monitoring", t, c8_chunked_monitoring(&bundle, &cfg));

    if failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
