//! Experiment runners. One run writes one fresh directory; `manifest.json`
//! is written last and lists every other file with its SHA-256.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ibmsim::analysis::{exit_tail_bound, min_gap, stationarity_test, tail_condition_integral};
use ibmsim::io::{fmt_f64, sha256_hex};
use ibmsim::models::{Configuration, Window};
use ibmsim::pointfields::{config_csv, estimate_rho_k, replicate_seed, sample_ensemble, Bins, SampleEnsemble};
use ibmsim::sde::{ifc_consistency_report, simulate, LabeledPath, Scheme};
use rayon::prelude::*;
use serde_json::{json, Value as Json};

use crate::config::{Command, ConfigError, ExperimentConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_MODEL: i32 = 2;
pub const EXIT_ABORT: i32 = 3;

/// Exit code for a library error.
pub fn exit_code(e: &ibmsim::Error) -> i32 {
    match e {
        e if e.is_numerical_abort() => EXIT_ABORT,
        ibmsim::Error::Io(_) => EXIT_IO,
        _ => EXIT_MODEL,
    }
}

/// JSON error record for a library error.
pub fn error_record(e: &ibmsim::Error) -> Json {
    let dbg = format!("{e:?}");
    let kind = dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string();
    json!({"error": kind, "message": e.to_string(), "exit_code": exit_code(e)})
}

/// JSON error record for a configuration error.
pub fn config_error_record(e: &ConfigError) -> Json {
    match e {
        ConfigError::Parse { line, message } => {
            json!({"error": "ParseError", "line": line, "message": message, "exit_code": EXIT_MODEL})
        }
        ConfigError::Validation { field, message } => {
            json!({"error": "ValidationError", "field": field, "message": message, "exit_code": EXIT_MODEL})
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub exit_code: i32,
    /// Paths relative to `dir`, in write order, manifest excluded.
    pub files: Vec<String>,
    pub error: Option<Json>,
}

/// `base`, or `base-v2`, `base-v3`, ... for the first name not yet taken.
/// The directory is created.
pub fn fresh_dir(base: &Path) -> std::io::Result<PathBuf> {
    if let Some(parent) = base.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let name = base.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    for k in 1.. {
        let candidate = if k == 1 { base.to_path_buf() } else { base.with_file_name(format!("{name}-v{k}")) };
        match fs::create_dir(&candidate) {
            Ok(()) => return Ok(candidate),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e),
        }
    }
    unreachable!()
}

/// Single writer for a run directory.
struct RunDir {
    dir: PathBuf,
    files: Vec<(String, String, usize)>,
    events: Vec<Json>,
}

impl RunDir {
    fn write(&mut self, name: &str, bytes: &[u8]) -> ibmsim::Result<()> {
        assert!(!self.files.iter().any(|f| f.0 == name), "{name} written twice");
        let path = self.dir.join(name);
        if let Some(p) = path.parent() {
            fs::create_dir_all(p)?;
        }
        fs::write(&path, bytes)?;
        self.files.push((name.to_string(), sha256_hex(bytes), bytes.len()));
        Ok(())
    }

    fn write_json(&mut self, name: &str, v: &Json) -> ibmsim::Result<()> {
        let mut text = serde_json::to_string_pretty(v).map_err(|e| ibmsim::Error::Format(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Registers files some other writer put under `sub`, in name order.
    fn adopt_dir(&mut self, sub: &str) -> ibmsim::Result<()> {
        let mut names: Vec<String> = fs::read_dir(self.dir.join(sub))?
            .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
            .collect::<std::io::Result<_>>()?;
        names.sort();
        for n in names {
            let rel = format!("{sub}/{n}");
            let bytes = fs::read(self.dir.join(&rel))?;
            self.files.push((rel, sha256_hex(&bytes), bytes.len()));
        }
        Ok(())
    }

    fn event(&mut self, v: Json) {
        self.events.push(v);
    }
}

fn jsonl(records: &[Json]) -> String {
    records.iter().map(|r| format!("{r}\n")).collect()
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Default output directory for a config.
pub fn default_out(cfg: &ExperimentConfig) -> PathBuf {
    match cfg.out() {
        Some(o) => PathBuf::from(o),
        None => PathBuf::from("runs").join(format!("{}-seed{}", cfg.command, cfg.seed)),
    }
}

/// Runs an experiment into a fresh directory derived from `out` (or the
/// config's default). Only failures to create the directory are returned
/// as `Err`; everything else is reported through the outcome.
pub fn run(cfg: &ExperimentConfig, out: Option<&Path>) -> std::io::Result<RunOutcome> {
    let base = out.map(Path::to_path_buf).unwrap_or_else(|| default_out(cfg));
    let dir = fresh_dir(&base)?;
    let started = unix_now();
    let mut rd = RunDir { dir: dir.clone(), files: Vec::new(), events: Vec::new() };
    let echo = cfg.serialize();
    let mut result = rd.write("config.txt", echo.as_bytes());
    rd.event(json!({"event": "start", "command": cfg.command.name(), "seed": cfg.seed}));
    if result.is_ok() {
        result = dispatch(cfg, &mut rd);
    }
    let (exit_code, error) = match &result {
        Ok(()) => (EXIT_OK, None),
        Err(e) => (exit_code(e), Some(error_record(e))),
    };
    rd.event(json!({"event": "end", "exit_code": exit_code}));
    let events = jsonl(&rd.events);
    let mut tail = rd.write("events.jsonl", events.as_bytes());
    if let (Some(err), Ok(())) = (&error, &tail) {
        tail = rd.write("errors.jsonl", jsonl(std::slice::from_ref(err)).as_bytes());
    }
    let exit_code = if exit_code == EXIT_OK && tail.is_err() { EXIT_IO } else { exit_code };
    let files: Vec<Json> =
        rd.files.iter().map(|(f, h, n)| json!({"file": f, "sha256": h, "bytes": n})).collect();
    let manifest = json!({
        "config": echo,
        "command": cfg.command.name(),
        "seed": cfg.seed,
        "version": concat!("ibmsim ", env!("CARGO_PKG_VERSION")),
        "started": started,
        "finished": unix_now(),
        "status": if exit_code == EXIT_OK { "ok" } else { "error" },
        "exit_code": exit_code,
        "error": error,
        "files": files,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    fs::write(dir.join("manifest.json"), text)?;
    Ok(RunOutcome { dir, exit_code, files: rd.files.into_iter().map(|f| f.0).collect(), error })
}

fn precondition(e: ConfigError) -> ibmsim::Error {
    ibmsim::Error::Precondition(e.to_string())
}

fn scheme(cfg: &ExperimentConfig, m: &ibmsim::models::PotentialModel) -> ibmsim::Result<Scheme> {
    Ok(cfg.scheme().map_err(precondition)?.unwrap_or_else(|| Scheme::default_for(m.family)))
}

fn simulate_from_config(cfg: &ExperimentConfig, seed: u64) -> ibmsim::Result<(Configuration, LabeledPath)> {
    let m = cfg.model().map_err(precondition)?;
    let init = cfg.init_config(seed)?;
    let path = simulate(
        &m,
        &init,
        cfg.t_end().map_err(precondition)?,
        cfg.dt().map_err(precondition)?,
        seed,
        scheme(cfg, &m)?,
    )?;
    Ok((init, path))
}

fn dispatch(cfg: &ExperimentConfig, rd: &mut RunDir) -> ibmsim::Result<()> {
    match cfg.command {
        Command::Sample => {
            let sampler = cfg.sampler().map_err(precondition)?;
            let e = sample_ensemble(&sampler, cfg.runs(1).map_err(precondition)?, cfg.seed)?;
            e.write_dir(&rd.dir.join("ensemble"))?;
            rd.adopt_dir("ensemble")?;
            let counts: Vec<usize> = e.configs.iter().map(Configuration::len).collect();
            rd.write_json(
                "summary.json",
                &json!({"sampler": sampler.name(), "draws": e.len(), "counts": counts}),
            )?;
            rd.event(json!({"event": "sampled", "draws": e.len()}));
        }
        Command::Simulate => {
            let (init, path) = simulate_from_config(cfg, cfg.seed)?;
            write_path_files(rd, &init, &path)?;
        }
        Command::IfcCheck => {
            let (_, path) = simulate_from_config(cfg, cfg.seed)?;
            let ms = cfg.ms().map_err(precondition)?;
            let rows = ifc_consistency_report(&path, &ms)?;
            let max = rows.iter().map(|r| r.error).fold(0.0, f64::max);
            rd.write_json("ifc_report.json", &json!({"reference": path.manifest_record(), "rows": rows, "max_error": max}))?;
            rd.event(json!({"event": "ifc", "max_error": max}));
        }
        Command::Conditions => {
            let (kind, rho, params) = cfg.tail().map_err(precondition)?;
            let rep = tail_condition_integral(kind, &rho, params)?;
            rd.write_json("conditions.json", &json!({"intensity": rho, "report": rep}))?;
            rd.event(json!({"event": "conditions", "verdict": rep.verdict}));
        }
        Command::Stationarity => {
            let m = cfg.model().map_err(precondition)?;
            let sampler = cfg.sampler().map_err(precondition)?;
            let o = cfg.stationarity_options().map_err(precondition)?;
            let rep = stationarity_test(&m, &sampler, &o)?;
            rd.write_json("stationarity.json", &json!({"options": o, "report": rep}))?;
            rd.event(json!({"event": "stationarity", "runs": rep.runs, "aborted": rep.aborted}));
        }
        Command::ReportData => report_data(cfg, rd)?,
    }
    Ok(())
}

fn write_path_files(rd: &mut RunDir, init: &Configuration, path: &LabeledPath) -> ibmsim::Result<()> {
    rd.write("init.csv", config_csv(init).as_bytes())?;
    let mut traj = Vec::new();
    path.write_csv(&mut traj)?;
    rd.write("trajectory.csv", &traj)?;
    let mut inc = Vec::new();
    path.write_increments_csv(&mut inc)?;
    rd.write("increments.csv", &inc)?;
    rd.write("path.jsonl", jsonl(&[path.manifest_record()]).as_bytes())?;
    let g = min_gap(path);
    let refined = path.levels.iter().filter(|l| **l > 0).count();
    let max_level = path.levels.iter().copied().max().unwrap_or(0);
    rd.write_json(
        "summary.json",
        &json!({
            "N": path.n(),
            "steps": path.steps(),
            "refined_steps": refined,
            "max_level": max_level,
            "min_gap": g,
        }),
    )?;
    rd.event(json!({"event": "simulated", "N": path.n(), "steps": path.steps(), "refined_steps": refined}));
    Ok(())
}

fn csv(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = format!("{header}\n");
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

/// Binning used for the correlation export.
fn correlation_bins(w: &Window, n: usize) -> Option<Bins> {
    match w {
        Window::Interval { lo, hi } => Some(Bins::Line { lo: *lo, hi: *hi, n }),
        Window::Ball { center, radius } if center.iter().all(|c| *c == 0.0) => {
            Some(Bins::Radial { r_min: 0.0, r_max: *radius, n })
        }
        _ => None,
    }
}

/// The data behind the standard report figures: correlation estimates,
/// IFC errors, minimal gaps and exit-tail frequencies.
fn report_data(cfg: &ExperimentConfig, rd: &mut RunDir) -> ibmsim::Result<()> {
    let runs = cfg.runs(1).map_err(precondition)?;
    let sampler = cfg.sampler().map_err(precondition)?;
    let e: SampleEnsemble = sample_ensemble(&sampler, runs.max(ibmsim::pointfields::MIN_ENSEMBLE), cfg.seed)?;
    let w = e.window().clone();
    if let Some(bins) = correlation_bins(&w, 20) {
        let est = estimate_rho_k(&e, 1, &bins)?;
        let rows = est.grid.iter().zip(&est.values).zip(&est.stderr).map(|((x, v), s)| {
            vec![fmt_f64(x[0]), fmt_f64(*v), fmt_f64(*s)]
        });
        rd.write("correlation_rho1.csv", csv("x,value,stderr", rows).as_bytes())?;
        if let Bins::Line { lo, hi, .. } = bins {
            let est = estimate_rho_k(&e, 2, &Bins::Line { lo, hi, n: 10 })?;
            let rows = est.grid.iter().zip(&est.values).zip(&est.stderr).map(|((x, v), s)| {
                vec![fmt_f64(x[0]), fmt_f64(x[1]), fmt_f64(*v), fmt_f64(*s)]
            });
            rd.write("correlation_rho2.csv", csv("x,y,value,stderr", rows).as_bytes())?;
        }
    } else {
        rd.event(json!({"event": "skipped", "what": "correlation", "reason": "window has no standard binning"}));
    }

    let (_, reference) = simulate_from_config(cfg, cfg.seed)?;
    let ms = cfg.ms().map_err(precondition)?;
    let rows = ifc_consistency_report(&reference, &ms)?;
    rd.write(
        "ifc_errors.csv",
        csv("m,error", rows.iter().map(|r| vec![r.m.to_string(), fmt_f64(r.error)])).as_bytes(),
    )?;

    // All runs share the initial configuration drawn with the master seed.
    let m = cfg.model().map_err(precondition)?;
    let init = cfg.init_config(cfg.seed)?;
    let (t_end, dt) = (cfg.t_end().map_err(precondition)?, cfg.dt().map_err(precondition)?);
    let sch = scheme(cfg, &m)?;
    let outcomes: Vec<(u64, ibmsim::Result<LabeledPath>)> = (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            let s = replicate_seed(cfg.seed, i);
            (s, simulate(&m, &init, t_end, dt, s, sch))
        })
        .collect();
    let mut rows = Vec::with_capacity(runs);
    let mut paths = Vec::new();
    for (i, (s, r)) in outcomes.into_iter().enumerate() {
        match r {
            Ok(p) => {
                let g = min_gap(&p);
                let (a, b) = g.pair.map_or((String::new(), String::new()), |(a, b)| (a.to_string(), b.to_string()));
                rows.push(vec![i.to_string(), s.to_string(), "ok".into(), fmt_f64(g.gap), fmt_f64(g.time), a, b]);
                paths.push(p);
            }
            Err(e) if e.is_numerical_abort() => {
                rows.push(vec![i.to_string(), s.to_string(), "abort".into(), String::new(), String::new(), String::new(), String::new()]);
                rd.event(json!({"event": "abort", "run": i, "error": error_record(&e)}));
            }
            Err(e) => return Err(e),
        }
    }
    rd.write("gaps.csv", csv("run,seed,status,min_gap,time,i,j", rows).as_bytes())?;

    if !paths.is_empty() {
        let r = match cfg.exit_radius().map_err(precondition)? {
            Some(r) => r,
            None => 0.5 * init.points().map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max),
        };
        let rows = exit_tail_bound(&paths, r, t_end)?;
        let body = csv(
            "label,start,hits,runs,frequency,stderr,bound,within",
            rows.iter().map(|r| {
                vec![
                    r.label.to_string(),
                    fmt_f64(r.start),
                    r.hits.to_string(),
                    r.runs.to_string(),
                    fmt_f64(r.frequency),
                    fmt_f64(r.stderr),
                    fmt_f64(r.bound),
                    r.within.to_string(),
                ]
            }),
        );
        rd.write("exit_tail.csv", body.as_bytes())?;
    }
    rd.write_json(
        "summary.json",
        &json!({
            "sampler": sampler.name(),
            "draws": e.len(),
            "runs": runs,
            "completed": paths.len(),
            "reference": reference.manifest_record(),
        }),
    )?;
    Ok(())
}
