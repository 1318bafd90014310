//! Subcommand implementations. Each returns `Pass` or `Fail`; any `Err` is a
//! usage or configuration problem and maps to exit status 2.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use cupgame::emptiers::EmptierSpec;
use cupgame::experiments::{self, SweepSpec};
use cupgame::fillers::AnchorSwapParams;
use cupgame::invariants::{
    crossing_probability_experiment, run_checks, CrossingScript, InvariantReport,
};
use cupgame::io::{self, parse_config, read_run, write_json, write_run, ReportFile, REPORT_FILE};
use cupgame::{run_game, Error, GameConfig, Result};

use crate::spec::{
    CheckArgs, CheckOpts, Command, Experiment, ExperimentSpec, LowerBoundArgs, MonteCarloArgs,
    RunArgs, SweepArgs, SPEC_FILE,
};

pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_JSON: &str = "sweep.json";
pub const LOWERBOUND_JSON: &str = "lowerbound.json";
pub const MONTECARLO_JSON: &str = "montecarlo.json";

/// Enough phases at desk scale (p = 8, ell = 16) for the threshold to be hit
/// in a visible fraction of runs.
pub const DEFAULT_ANTI_GREEDY_PHASES: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
        }
    }

    fn and(self, ok: bool) -> Status {
        if ok {
            self
        } else {
            Status::Fail
        }
    }
}

/// Maps an outcome to the process exit status.
pub fn exit_code(result: &Result<Status>) -> u8 {
    match result {
        Ok(s) => s.code(),
        Err(_) => 2,
    }
}

pub fn execute(spec: &ExperimentSpec, out: &mut dyn Write) -> Result<Status> {
    if let Some(dir) = spec.command.out_dir() {
        if !matches!(spec.command, Command::Replay(_)) {
            fs::create_dir_all(dir)?;
            write_json(&dir.join(SPEC_FILE), spec)?;
        }
    }
    match &spec.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Check(a) => cmd_check(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Lowerbound(a) => cmd_lowerbound(a, out),
        Command::Montecarlo(a) => cmd_montecarlo(a, out),
        Command::Replay(a) => {
            let mut saved: ExperimentSpec = serde_json::from_str(&fs::read_to_string(&a.spec)?)?;
            if matches!(saved.command, Command::Replay(_)) {
                return Err(Error::Argument(
                    "a saved spec cannot itself be a replay".into(),
                ));
            }
            if let Some(dir) = &a.out {
                saved.command.set_out_dir(dir.clone());
            }
            execute(&saved, out)
        }
    }
}

/// Builds the game config from `--config` plus command-line overrides.
pub fn run_config(a: &RunArgs) -> Result<GameConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let mut cfg = parse_config(&fs::read_to_string(path)?)?;
            if let Some(n) = a.n {
                cfg.n = n;
            }
            if let Some(p) = a.p {
                cfg.p = p;
            }
            if let Some(steps) = a.steps {
                cfg.steps = steps;
            }
            if let Some(f) = &a.filler {
                cfg.visibility = f.default_visibility();
                cfg.filler = f.clone();
            }
            if let Some(e) = &a.emptier {
                cfg.emptier = e.clone();
            }
            cfg
        }
        None => {
            let need = |v: Option<usize>, flag: &str| {
                v.ok_or_else(|| Error::Argument(format!("--{flag} is required without --config")))
            };
            let filler = a
                .filler
                .clone()
                .ok_or_else(|| Error::Argument("--filler is required without --config".into()))?;
            GameConfig::new(
                need(a.n, "n")?,
                need(a.p, "p")?,
                need(a.steps, "steps")?,
                filler,
                a.emptier.clone().unwrap_or(EmptierSpec::Greedy),
            )
        }
    };
    if let Some(t) = &a.truncate {
        cfg.truncation = Some(t.clone());
    }
    if let Some(v) = a.visibility {
        cfg.visibility = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn check_trace(trace: &cupgame::Trace, opts: &CheckOpts) -> Result<ReportFile> {
    let checks = opts.selection()?.resolve(trace);
    Ok(ReportFile::new(run_checks(&checks, trace, &opts.params())?))
}

fn report_lines(reports: &[InvariantReport], out: &mut dyn Write) -> Result<()> {
    for r in reports {
        if r.passed {
            writeln!(out, "{}: pass ({} instances)", r.check, r.instances)?;
        } else {
            let witness = match &r.witness {
                Some(w) => serde_json::to_string(w)?,
                None => "no witness".into(),
            };
            writeln!(
                out,
                "{}: FAIL ({} violations) {}",
                r.check, r.violations, witness
            )?;
        }
    }
    Ok(())
}

pub fn cmd_run(a: &RunArgs, out: &mut dyn Write) -> Result<Status> {
    let cfg = run_config(a)?;
    // Reject a bad checker list before playing anything.
    a.check.selection()?;
    let seeds = a
        .seeds
        .as_ref()
        .map(|s| s.0.clone())
        .unwrap_or_else(|| vec![cfg.seed]);
    let mut status = Status::Pass;
    for &seed in &seeds {
        let cfg = cfg.clone().with_seed(seed);
        let dir = if seeds.len() == 1 {
            a.out.clone()
        } else {
            a.out.join(format!("seed-{seed}"))
        };
        let trace = run_game(&cfg)?;
        let summary = write_run(&dir, &trace, a.svg)?;
        writeln!(
            out,
            "seed {seed}: {} steps, max backlog {} ({}), final backlog {}",
            summary.steps_played,
            summary.max_backlog.exact,
            summary.max_backlog.decimal,
            summary.final_backlog.exact
        )?;
        if let Some(abort) = &trace.abort {
            writeln!(
                out,
                "seed {seed}: filler move rejected at step {}: {:?}",
                abort.t, abort.violations
            )?;
            status = Status::Fail;
        }
        if a.check.checkers.is_some() {
            let report = check_trace(&trace, &a.check)?;
            write_json(&dir.join(REPORT_FILE), &report)?;
            report_lines(&report.checks, out)?;
            status = status.and(report.passed);
        }
    }
    Ok(status)
}

fn trace_dir(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.to_path_buf()
    } else {
        path.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}

pub fn cmd_check(a: &CheckArgs, out: &mut dyn Write) -> Result<Status> {
    // Validate the checker list before touching the trace.
    a.check.selection()?;
    let trace = read_run(&a.trace)?;
    let report = check_trace(&trace, &a.check)?;
    let dir = a.out.clone().unwrap_or_else(|| trace_dir(&a.trace));
    fs::create_dir_all(&dir)?;
    write_json(&dir.join(REPORT_FILE), &report)?;
    report_lines(&report.checks, out)?;
    Ok(Status::Pass.and(report.passed))
}

pub fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<Status> {
    let spec = SweepSpec {
        ns: a.ns.clone(),
        ps: a.ps.clone(),
        seeds: a.seeds.0.clone(),
        steps: a.steps,
        fillers: a.fillers.clone(),
        emptier: a.emptier.clone(),
    };
    let result = experiments::sweep(&spec)?;
    if let Some(dir) = &a.out {
        fs::write(dir.join(SWEEP_CSV), result.to_csv()?)?;
        write_json(&dir.join(SWEEP_JSON), &result)?;
    }
    for fit in &result.fits {
        let p = fit.p.map_or("all".to_string(), |p| p.to_string());
        writeln!(
            out,
            "{} p={p}: max backlog = {:.4} ln n + {:.4} over {} runs",
            fit.filler, fit.slope, fit.intercept, fit.points
        )?;
    }
    let over = result.rows.iter().filter(|r| !r.within_bound).count();
    writeln!(
        out,
        "{} of {} runs within 4 (1 + ln n)",
        result.rows.len() - over,
        result.rows.len()
    )?;
    Ok(Status::Pass.and(result.all_within_bound))
}

pub fn cmd_lowerbound(a: &LowerBoundArgs, out: &mut dyn Write) -> Result<Status> {
    let mut results = Vec::new();
    for &seed in &a.seeds.0 {
        let r = experiments::lowerbound(a.n, a.p, &a.emptier, seed)?;
        match r.reached_at {
            Some(t) => writeln!(
                out,
                "seed {seed}: reached {} at step {t}",
                r.threshold.exact
            )?,
            None => writeln!(
                out,
                "seed {seed}: threshold {} not reached in {} steps (backlog {})",
                r.threshold.exact, r.budget, r.backlog_at_stop.exact
            )?,
        }
        results.push(r);
    }
    if let Some(dir) = &a.out {
        write_json(&dir.join(LOWERBOUND_JSON), &results)?;
    }
    Ok(Status::Pass.and(results.iter().all(|r| r.reached())))
}

pub fn anchor_swap_params(a: &MonteCarloArgs) -> AnchorSwapParams {
    let mut params = AnchorSwapParams::defaults(a.p);
    if let Some(v) = a.phases {
        params.phases = v;
    }
    if let Some(v) = a.rounds {
        params.rounds = v;
    }
    if let Some(v) = a.round_len {
        params.round_len = v;
    }
    params
}

pub fn cmd_montecarlo(a: &MonteCarloArgs, out: &mut dyn Write) -> Result<Status> {
    let seeds = &a.seeds.0;
    let (json, ok) = match a.experiment {
        Experiment::CrossingProb => {
            let r = crossing_probability_experiment(&CrossingScript::new(a.y.clone()), seeds)?;
            writeln!(
                out,
                "y = {}: {} of {} runs crossed, frequency {:.4} (tolerance {:.4})",
                r.y, r.hits, r.seeds, r.frequency, r.tolerance
            )?;
            (io::to_json(&r)?, r.within)
        }
        Experiment::AnchorSwapBacklog => {
            let r = experiments::anchor_swap_backlog(
                a.n,
                a.p,
                Some(anchor_swap_params(a)),
                &a.emptier,
                a.threshold,
                seeds,
            )?;
            writeln!(
                out,
                "anchor-swap: backlog >= {} in {} of {} runs (frequency {:.4})",
                r.threshold, r.hits, r.seeds, r.frequency
            )?;
            (io::to_json(&r)?, true)
        }
        Experiment::AntiGreedyBacklog => {
            let r = experiments::anti_greedy_backlog(
                a.n,
                a.p,
                a.ell,
                &a.c,
                a.phases.unwrap_or(DEFAULT_ANTI_GREEDY_PHASES),
                a.q,
                &a.emptier,
                seeds,
            )?;
            writeln!(
                out,
                "anti-greedy: backlog >= {:.4} in {} of {} runs (frequency {:.4})",
                r.threshold, r.hits, r.seeds, r.frequency
            )?;
            (io::to_json(&r)?, true)
        }
    };
    if let Some(dir) = &a.out {
        fs::write(dir.join(MONTECARLO_JSON), &json)?;
    }
    Ok(Status::Pass.and(ok))
}
