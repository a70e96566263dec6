//! Dispatch of configured experiments and output files.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{SystemTime, UNIX_EPOCH};

use driftlab_core::harness::{
    describe, run_duality_check, run_energy_experiment, run_instability_experiment, run_l1_decay_experiment,
    run_max_principle_experiment, run_stability_sweep, run_uniqueness_check, verify_heat_kernel_family,
    verify_nonuniqueness_example, EXPERIMENTS,
};
use driftlab_core::ExperimentReport;

use crate::config::RunConfig;
use crate::CliError;

/// Exit code for configuration errors.
pub const EXIT_CONFIG: i32 = 3;
/// Exit code for I/O failures.
pub const EXIT_IO: i32 = 4;

/// `name  citation` lines in canonical order.
pub fn list_experiments() -> String {
    EXPERIMENTS.iter().map(|n| format!("{n:<16} {}\n", describe(n).unwrap_or(""))).collect()
}

/// Runs the experiment of a resolved configuration.
pub fn execute(cfg: &RunConfig, base_dir: &Path) -> Result<ExperimentReport, CliError> {
    cfg.validate()?;
    let p = &cfg.params;
    let tol = &cfg.tolerances;
    let need = |v: Option<f64>, key: &str| v.ok_or_else(|| CliError::Config(format!("missing parameter \"{key}\"")));
    let report = match cfg.experiment.as_str() {
        "nonuniqueness" => verify_nonuniqueness_example(
            p.dims.as_deref().unwrap_or(&[2, 3]),
            p.samples.unwrap_or(100),
            p.seed.unwrap_or(0),
            tol,
        )?,
        "heat_kernel" => verify_heat_kernel_family(
            p.n.unwrap_or(2),
            p.alphas.as_deref().unwrap_or(&[0.0, 0.2]),
            p.times.as_deref().unwrap_or(&[0.125, 0.25, 0.5]),
            tol,
        )?,
        "instability" => run_instability_experiment(
            p.n.unwrap_or(2),
            p.epsilons.as_deref().unwrap_or(&[0.5, 0.25, 0.1]),
            p.a.unwrap_or(1.5),
            tol,
        )?,
        name => {
            let s = cfg.scenario(base_dir)?;
            match name {
                "energy" => run_energy_experiment(&s, tol)?,
                "l1_decay" => run_l1_decay_experiment(&s, need(p.t1, "t1")?, need(p.t2, "t2")?, tol)?,
                "max_principle" => run_max_principle_experiment(&s, need(p.s, "s")?, tol)?,
                "stability_sweep" => {
                    let scales = p.scales.as_deref().unwrap_or(&[0.2, 0.1, 0.05, 0.025]);
                    run_stability_sweep(&s, scales, p.data_perturbation.unwrap_or(false), tol)?.report
                }
                "duality" => run_duality_check(&s, p.probes.unwrap_or(3), p.seed.unwrap_or(0), tol)?,
                "uniqueness" => run_uniqueness_check(&s, tol)?,
                other => return Err(CliError::Config(format!("unknown experiment \"{other}\""))),
            }
        }
    };
    Ok(report)
}

/// Report JSON with the resolved configuration embedded under `"config"`.
pub fn report_json(report: &ExperimentReport, cfg: &RunConfig) -> String {
    let mut v = serde_json::to_value(report).expect("report serializes");
    v.as_object_mut()
        .expect("report is an object")
        .insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
    let mut text = serde_json::to_string_pretty(&v).expect("value serializes");
    text.push('\n');
    text
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })
}

/// Writes `report.json`, `series.csv` and one CSV per table into `dir`.
pub fn write_outputs(report: &ExperimentReport, cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.to_path_buf(), source: e })?;
    write(&dir.join("report.json"), &report_json(report, cfg))?;
    let series = report.tables.get("series").or_else(|| report.tables.values().next());
    if let Some(t) = series {
        write(&dir.join("series.csv"), &t.to_csv_string())?;
    }
    for (name, table) in &report.tables {
        if name != "series" {
            write(&dir.join(format!("{name}.csv")), &table.to_csv_string())?;
        }
    }
    Ok(())
}

/// Appends one line per report to `dir/ledger.csv`, writing the header on creation.
pub fn append_ledger(dir: &Path, lines: &[String]) -> Result<(), CliError> {
    let path = dir.join("ledger.csv");
    let io = |e| CliError::Io { path: path.clone(), source: e };
    fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.to_path_buf(), source: e })?;
    let fresh = !path.exists();
    let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
    if fresh {
        writeln!(f, "experiment,verdict,checks_passed,checks_total").map_err(io)?;
    }
    for l in lines {
        writeln!(f, "{l}").map_err(io)?;
    }
    Ok(())
}

/// Appends a timestamped line to the sidecar log `dir/run.log`.
pub fn log_line(dir: &Path, message: &str) -> Result<(), CliError> {
    let path = dir.join("run.log");
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| CliError::Io { path: path.clone(), source: e })?;
    writeln!(f, "{secs} {message}").map_err(|e| CliError::Io { path, source: e })
}

/// Outcome of one job.
#[derive(Debug)]
pub struct JobOutcome {
    pub experiment: String,
    pub dir: PathBuf,
    pub exit_code: i32,
    pub summary: String,
    /// Results-ledger row; absent when the run errored.
    pub ledger: Option<String>,
}

/// Runs one resolved configuration and writes its files into `dir`.
pub fn run_job(cfg: &RunConfig, base_dir: &Path, dir: &Path) -> JobOutcome {
    let cfg = cfg.resolved();
    let result = execute(&cfg, base_dir).and_then(|rep| {
        write_outputs(&rep, &cfg, dir)?;
        log_line(dir, &format!("{} {}", rep.name, rep.verdict.as_str()))?;
        Ok(rep)
    });
    match result {
        Ok(rep) => {
            let passed = rep.checks.iter().filter(|c| c.passed).count();
            JobOutcome {
                experiment: cfg.experiment.clone(),
                dir: dir.to_path_buf(),
                exit_code: rep.verdict.exit_code(),
                summary: format!(
                    "{}: {} ({passed}/{} checks) -> {}",
                    rep.name,
                    rep.verdict.as_str(),
                    rep.checks.len(),
                    dir.display()
                ),
                ledger: Some(rep.ledger_line()),
            }
        }
        Err(e) => JobOutcome {
            experiment: cfg.experiment.clone(),
            dir: dir.to_path_buf(),
            exit_code: e.exit_code(),
            summary: format!("{}: error: {e}", cfg.experiment),
            ledger: None,
        },
    }
}

/// Runs jobs concurrently, each in `out/<index>_<experiment>`, then appends
/// the ledger in job order.
pub fn run_suite(configs: &[RunConfig], base_dir: &Path, out: &Path) -> Result<Vec<JobOutcome>, CliError> {
    let outcomes: Vec<JobOutcome> = thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .enumerate()
            .map(|(i, cfg)| {
                let dir = out.join(format!("{:02}_{}", i + 1, cfg.experiment));
                scope.spawn(move || run_job(cfg, base_dir, &dir))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("job thread panicked")).collect()
    });
    let lines: Vec<String> = outcomes.iter().filter_map(|o| o.ledger.clone()).collect();
    append_ledger(out, &lines)?;
    Ok(outcomes)
}

/// Runs one configuration into `out` and appends its ledger row there.
pub fn run_single(cfg: &RunConfig, base_dir: &Path, out: &Path) -> Result<JobOutcome, CliError> {
    let outcome = run_job(cfg, base_dir, out);
    if let Some(line) = &outcome.ledger {
        append_ledger(out, std::slice::from_ref(line))?;
    }
    Ok(outcome)
}

/// Combined exit code: configuration and I/O errors dominate, then the
/// largest verdict code.
pub fn combined_exit_code(outcomes: &[JobOutcome]) -> i32 {
    let codes: Vec<i32> = outcomes.iter().map(|o| o.exit_code).collect();
    for code in [EXIT_IO, EXIT_CONFIG] {
        if codes.contains(&code) {
            return code;
        }
    }
    codes.into_iter().max().unwrap_or(0)
}

/// Parses a suite file: a JSON array of run configurations.
pub fn load_suite(path: &Path) -> Result<Vec<RunConfig>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
    let configs: Vec<RunConfig> =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    for c in &configs {
        c.validate()?;
    }
    Ok(configs)
}

/// Built-in reference configurations of all experiments.
pub fn builtin_suite() -> Vec<RunConfig> {
    EXPERIMENTS.iter().map(|n| RunConfig::builtin(n).expect("every experiment has a builtin")).collect()
}
