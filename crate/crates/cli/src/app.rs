//! Running configs end to end: load, override, run, write.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind, OutputFormat};
use crate::emit::emit;
use crate::experiments::{default_config, error_status, run};
use crate::report::{RunReport, Status};

/// Command line overrides shared by every subcommand.
#[derive(Clone, Debug)]
pub struct Overrides {
    pub grid_scale: f64,
    pub tol_scale: f64,
    pub out_dir: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

impl Default for Overrides {
    fn default() -> Self {
        Overrides {
            grid_scale: 1.0,
            tol_scale: 1.0,
            out_dir: None,
            format: None,
        }
    }
}

/// One line of `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Outcome {
    pub name: String,
    pub experiment: Option<ExperimentKind>,
    pub status: Status,
    pub failures: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Outcome {
    pub fn line(&self) -> String {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::HypothesisFailure => "HYPOTHESIS",
            Status::NumericalFailure => "FAIL",
            Status::ConfigError => "CONFIG",
        };
        let kind = self.experiment.map(|k| k.as_str()).unwrap_or("?");
        let mut s = format!("{tag:<10} {kind:<16} {}", self.name);
        if let Some(e) = &self.error {
            // TOML errors draw a source excerpt below the message; keep one line
            let msg: Vec<&str> = e
                .lines()
                .map(str::trim)
                .filter(|l| {
                    !l.is_empty()
                        && !l
                            .trim_start_matches(|c: char| c.is_ascii_digit())
                            .trim_start()
                            .starts_with('|')
                })
                .collect();
            s.push_str(&format!(": {}", msg.join(" ")));
        } else if !self.failures.is_empty() {
            s.push_str(&format!(": {}", self.failures.join(", ")));
        }
        s
    }
}

fn load(path: Option<&Path>, kind: ExperimentKind) -> anyhow::Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => default_config(kind)
            .ok_or_else(|| crate::config::config_err(format!("`{kind}` needs --config"))),
    }
}

/// Runs one experiment and writes its files under `<out>/<name>/`.
pub fn execute(
    config: anyhow::Result<ExperimentConfig>,
    kind: Option<ExperimentKind>,
    ov: &Overrides,
) -> (Outcome, Option<RunReport>) {
    let mut name = String::new();
    let result = (|| -> anyhow::Result<(RunReport, PathBuf)> {
        let mut cfg = config?;
        name = cfg.name.clone();
        let kind = kind
            .or(cfg.experiment)
            .ok_or_else(|| crate::config::config_err("config has no `experiment` key"))?;
        cfg.apply_scales(ov.grid_scale, ov.tol_scale)?;
        let out = output_dir(&cfg, ov);
        let format = ov
            .format
            .or(cfg.output.as_ref().and_then(|o| o.format))
            .unwrap_or_default();
        let report = run(&cfg, kind)?;
        emit(&report, format, &out)?;
        Ok((report, out))
    })();
    match result {
        Ok((report, _)) => (
            Outcome {
                name: report.name.clone(),
                experiment: Some(report.experiment),
                status: report.status,
                failures: report.failures.clone(),
                error: None,
            },
            Some(report),
        ),
        Err(e) => (
            Outcome {
                name,
                experiment: kind,
                status: error_status(&e),
                failures: Vec::new(),
                error: Some(format!("{e:#}")),
            },
            None,
        ),
    }
}

fn output_dir(cfg: &ExperimentConfig, ov: &Overrides) -> PathBuf {
    let base = ov
        .out_dir
        .clone()
        .or_else(|| {
            cfg.output
                .as_ref()
                .and_then(|o| o.dir.as_ref())
                .map(PathBuf::from)
        })
        .unwrap_or_else(|| PathBuf::from("out"));
    let name = if cfg.name.is_empty() {
        "run"
    } else {
        &cfg.name
    };
    base.join(name)
}

pub fn execute_one(
    path: Option<&Path>,
    kind: ExperimentKind,
    ov: &Overrides,
) -> (Outcome, Option<RunReport>) {
    execute(load(path, kind), Some(kind), ov)
}

/// Every `*.toml` in `dir`, in file name order.
pub fn corpus(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    Ok(files)
}

/// Runs the corpus in `dir` and writes `summary.json` next to the reports.
pub fn run_all(dir: &Path, ov: &Overrides) -> anyhow::Result<Vec<Outcome>> {
    let mut outcomes = Vec::new();
    for path in corpus(dir)? {
        let (mut outcome, _) = execute(ExperimentConfig::load(&path), None, ov);
        if outcome.name.is_empty() {
            outcome.name = path
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
        }
        println!("{}", outcome.line());
        outcomes.push(outcome);
    }
    let out = ov.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)?;
    let mut body = serde_json::to_string_pretty(&outcomes)?;
    body.push('\n');
    std::fs::write(out.join("summary.json"), body)?;
    Ok(outcomes)
}

/// Worst status, as an exit code.
pub fn exit_code(outcomes: &[Outcome]) -> i32 {
    outcomes
        .iter()
        .map(|o| o.status)
        .max()
        .unwrap_or(Status::Pass)
        .exit_code()
}
