//! One PASS/FAIL line per acceptance criterion, driven by the shipped
//! configs. Exits nonzero if any criterion fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use iskak::report::ExperimentReport;
use iskak::{run_experiment, Experiment, ExperimentConfig};

struct Ran {
    report: ExperimentReport,
    elapsed: Duration,
}

fn run(exp: Experiment, file: &str) -> Result<Ran, String> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(file);
    let cfg = ExperimentConfig::from_file(&path, &[]).map_err(|e| format!("{file}: {e}"))?;
    let start = Instant::now();
    let report = run_experiment(exp, &cfg).map_err(|e| format!("{file}: {e}"))?;
    Ok(Ran { report, elapsed: start.elapsed() })
}

/// Named checks of one report, all required to pass.
fn checks(r: &Ran, names: &[&str]) -> (bool, Vec<String>) {
    let mut ok = true;
    let mut detail = Vec::new();
    for n in names {
        match r.report.find_check(n) {
            Some(c) => {
                ok &= c.passed;
                detail.push(format!("{n}: {}", c.detail));
            }
            None => {
                ok = false;
                detail.push(format!("{n}: missing"));
            }
        }
    }
    (ok, detail)
}

fn budget(r: &Ran, limit: Duration) -> (bool, String) {
    (r.elapsed <= limit, format!("runtime {:.2} s (budget {} s)", r.elapsed.as_secs_f64(), limit.as_secs_f64()))
}

fn line(id: u32, title: &str, ok: bool, details: &[String]) -> bool {
    println!("criterion {id} [{}] {title}", if ok { "PASS" } else { "FAIL" });
    for d in details {
        println!("    {d}");
    }
    ok
}

fn criterion(id: u32, title: &str, ran: &[&Result<Ran, String>], f: impl FnOnce(&[&Ran]) -> (bool, Vec<String>)) -> bool {
    let mut ok_runs = Vec::new();
    for r in ran {
        match r {
            Ok(r) => ok_runs.push(r),
            Err(e) => return line(id, title, false, &[format!("error: {e}")]),
        }
    }
    let (ok, details) = f(&ok_runs);
    line(id, title, ok, &details)
}

fn with_budget(r: &Ran, names: &[&str], limit: Duration) -> (bool, Vec<String>) {
    let (ok, mut d) = checks(r, names);
    let (t_ok, t) = budget(r, limit);
    d.push(t);
    (ok && t_ok, d)
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let dispersion = run(Experiment::Dispersion, "dispersion.toml");
    let convergence = run(Experiment::Convergence, "convergence.toml");
    let consistency = run(Experiment::Consistency, "consistency.toml");
    let dtn = run(Experiment::Dtn, "dtn.toml");
    let elliptic = run(Experiment::EllipticSuite, "elliptic.toml");
    let conservation = run(Experiment::Conservation, "conservation.toml");
    let simulate = run(Experiment::Simulate, "simulate.toml");

    let mut all = true;
    all &= criterion(1, "dispersion order", &[&dispersion], |r| {
        with_budget(r[0], &["dispersion slope", "reference gap"], secs(1))
    });
    all &= criterion(2, "solution error order", &[&convergence], |r| {
        with_budget(r[0], &["legs completed", "error slope", "control slope"], secs(300))
    });
    all &= criterion(3, "consistency boundedness", &[&consistency], |r| {
        with_budget(r[0], &["r1 bounded", "r2 bounded", "identity r1 = R5 - R9"], secs(60))
    });
    all &= criterion(4, "DtN expansion orders", &[&dtn], |r| {
        with_budget(r[0], &["order 0 slope", "order 1 slope", "order 2 slope"], secs(30))
    });
    all &= criterion(5, "elliptic suite", &[&elliptic], |r| {
        with_budget(r[0], &["coercivity", "closed form", "back-substitution"], secs(10))
    });
    all &= criterion(6, "conservation and order", &[&conservation, &convergence, &simulate], |r| {
        let (mut ok, mut d) =
            with_budget(r[0], &["runs completed", "mass conservation", "energy drift halving", "constraint"], secs(60));
        for other in &r[1..] {
            let (o, mut more) = checks(other, &["mass conservation"]);
            ok &= o;
            more.iter_mut().for_each(|s| *s = format!("{}: {s}", other.report.experiment.name()));
            d.append(&mut more);
        }
        (ok, d)
    });
    all &= criterion(7, "flat-state DtN exactness", &[&dtn], |r| {
        with_budget(r[0], &["flat exactness", "vertical refinement"], secs(5))
    });
    all &= criterion(8, "sign conditions", &[&convergence, &conservation, &simulate], |r| {
        let mut ok = true;
        let mut d = Vec::new();
        for run in r {
            let (o, more) = checks(run, &["min depth", "min a"]);
            ok &= o;
            d.extend(more.into_iter().map(|s| format!("{}: {s}", run.report.experiment.name())));
        }
        (ok, d)
    });

    if all {
        println!("acceptance: all criteria PASS");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAIL");
        ExitCode::FAILURE
    }
}
