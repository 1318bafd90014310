//! Trace files, JSON summaries, SVG plots and the plain-text config format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{AbortReport, EmptyMove, FillMove, GameConfig, StepRecord, Trace, Visibility};
use crate::error::{Error, Result};
use crate::invariants::{empirical_m, record_setting_steps, InvariantReport};
use crate::rational::Rational;
use crate::state::{CupId, CupState};

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REPORT_FILE: &str = "report.json";
pub const SVG_FILE: &str = "backlog.svg";

/// Significant digits in decimal renderings.
pub const DECIMAL_DIGITS: usize = 15;

/// An exact value next to its decimal rendering. The exact field wins.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactValue {
    pub exact: Rational,
    pub decimal: String,
}

impl From<&Rational> for ExactValue {
    fn from(r: &Rational) -> Self {
        ExactValue {
            exact: r.clone(),
            decimal: r.to_decimal_string(DECIMAL_DIGITS),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub config: GameConfig,
    pub steps_played: usize,
    pub final_backlog: ExactValue,
    pub max_backlog: ExactValue,
    pub record_steps: Vec<usize>,
    /// Running maximum of `av_p`; a lower estimate of its supremum over all
    /// fillers.
    pub empirical_m: ExactValue,
    pub abort: Option<AbortReport>,
}

impl Summary {
    pub fn from_trace(trace: &Trace) -> Self {
        Summary {
            config: trace.config.clone(),
            steps_played: trace.len(),
            final_backlog: (&trace.final_backlog()).into(),
            max_backlog: (&trace.max_backlog()).into(),
            record_steps: record_setting_steps(trace),
            empirical_m: (&empirical_m(trace)).into(),
            abort: trace.abort.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportFile {
    pub passed: bool,
    pub checks: Vec<InvariantReport>,
}

impl ReportFile {
    pub fn new(checks: Vec<InvariantReport>) -> Self {
        ReportFile {
            passed: checks.iter().all(|r| r.passed),
            checks,
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)?)?;
    Ok(())
}

fn format_amounts<'a>(it: impl Iterator<Item = (&'a CupId, &'a Rational)>) -> String {
    it.map(|(c, a)| format!("{c}:{a}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_amounts(s: &str) -> Result<BTreeMap<CupId, Rational>> {
    let mut out = BTreeMap::new();
    for part in s.split(';').filter(|p| !p.is_empty()) {
        let (c, a) = part
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("bad amount entry {part:?}")))?;
        let c: CupId = c
            .parse()
            .map_err(|_| Error::Parse(format!("bad cup id {c:?}")))?;
        if out.insert(c, a.parse()?).is_some() {
            return Err(Error::Parse(format!("cup {c} listed twice")));
        }
    }
    Ok(out)
}

fn av_p(state: &CupState, p: usize) -> Rational {
    &state.top_total(p) / &Rational::from(p)
}

/// Writes the trace as CSV: one row per state `S_0..S_T` with exact fills,
/// backlog and `av_p`, followed by the step's moves.
pub fn write_trace_csv<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let n = trace.config.n;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|c| format!("cup_{c}")));
    header.extend(["backlog", "av_p", "fill", "empty", "removed", "policy"].map(String::from));
    w.write_record(&header)?;
    let row = |t: usize, state: &CupState, backlog: &Rational, av: &Rational| {
        let mut r = vec![t.to_string()];
        r.extend(state.fills().iter().map(Rational::to_string));
        r.push(backlog.to_string());
        r.push(av.to_string());
        r
    };
    let mut first = row(
        0,
        &trace.initial,
        trace.initial.max_fill(),
        &av_p(&trace.initial, trace.config.p),
    );
    first.extend(["", "", "", ""].map(String::from));
    w.write_record(&first)?;
    for (i, rec) in trace.records.iter().enumerate() {
        let mut r = row(
            rec.t,
            &rec.post,
            &trace.derived.backlog[i],
            &trace.derived.av_p[i],
        );
        r.push(format_amounts(rec.fill.amounts.iter()));
        r.push(
            rec.empty
                .cups
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(";"),
        );
        r.push(format_amounts(rec.removed.iter()));
        r.push(
            if rec.empty.skip_under_one {
                "skip"
            } else {
                "plain"
            }
            .to_string(),
        );
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace written by [`write_trace_csv`]. Intermediate states are
/// rebuilt as the previous state plus the deposit; the file's states are
/// taken as given, so traces that break the game rules still load.
pub fn read_trace_csv<R: Read>(config: GameConfig, input: R) -> Result<Trace> {
    let n = config.n;
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.len() != n + 7 || headers.get(0) != Some("t") {
        return Err(Error::Parse(format!(
            "trace header has {} columns, expected {} for n = {n}",
            headers.len(),
            n + 7
        )));
    }
    let mut initial = None;
    let mut records: Vec<StepRecord> = Vec::new();
    let mut stored: Vec<(Rational, Rational)> = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row?;
        let t: usize = row[0]
            .parse()
            .map_err(|_| Error::Parse(format!("bad step index {:?}", &row[0])))?;
        if t != line {
            return Err(Error::Parse(format!("row {line} has step index {t}")));
        }
        let fills = (1..=n)
            .map(|i| row[i].parse())
            .collect::<Result<Vec<Rational>>>()?;
        let state = CupState::from_fills(fills)?;
        let backlog: Rational = row[n + 1].parse()?;
        let av: Rational = row[n + 2].parse()?;
        if t == 0 {
            initial = Some(state);
            continue;
        }
        stored.push((backlog, av));
        let fill = FillMove {
            amounts: parse_amounts(&row[n + 3])?,
        };
        let cups = row[n + 4]
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::Parse(format!("bad cup id {s:?}")))
            })
            .collect::<Result<Vec<CupId>>>()?;
        let removed = parse_amounts(&row[n + 5])?;
        let skip_under_one = match &row[n + 6] {
            "skip" => true,
            "plain" => false,
            other => return Err(Error::Parse(format!("bad removal policy {other:?}"))),
        };
        let prev = records
            .last()
            .map(|r| &r.post)
            .or(initial.as_ref())
            .unwrap();
        for &c in fill.amounts.keys().chain(&cups) {
            prev.check_id(c)?;
        }
        let mut intermediate = prev.fills().to_vec();
        for (&c, a) in &fill.amounts {
            intermediate[c - 1] += a;
        }
        let intermediate = CupState::from_fills(intermediate)?;
        records.push(StepRecord {
            t,
            fill,
            intermediate,
            empty: EmptyMove {
                cups,
                skip_under_one,
            },
            post: state,
            removed,
        });
    }
    let initial = initial.ok_or_else(|| Error::Parse("trace has no initial row".into()))?;
    let trace = Trace::from_parts_unchecked(config, initial, records);
    for (i, (backlog, av)) in stored.iter().enumerate() {
        if *backlog != trace.derived.backlog[i] || *av != trace.derived.av_p[i] {
            return Err(Error::Parse(format!(
                "stored backlog or av_p at step {} disagrees with the fills",
                i + 1
            )));
        }
    }
    Ok(trace)
}

/// Polyline of the backlog with one vertex per CSV row.
pub fn backlog_svg(trace: &Trace) -> String {
    let mut series = vec![trace.initial.max_fill().clone()];
    series.extend(trace.derived.backlog.iter().cloned());
    let (w, h, pad) = (800.0, 400.0, 40.0);
    let max = series
        .iter()
        .map(Rational::to_f64)
        .fold(0.0f64, f64::max)
        .max(1.0);
    let steps = (series.len() - 1).max(1) as f64;
    let mut points = String::new();
    for (t, v) in series.iter().enumerate() {
        let x = pad + (w - 2.0 * pad) * t as f64 / steps;
        let y = h - pad - (h - 2.0 * pad) * v.to_f64() / max;
        let _ = write!(points, "{}{x:.3},{y:.3}", if t == 0 { "" } else { " " });
    }
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(
        svg,
        "<title>backlog, n={} p={} filler={} emptier={} seed={}</title>",
        trace.config.n,
        trace.config.p,
        trace.config.filler,
        trace.config.emptier,
        trace.config.seed
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{pad}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        h - pad,
        w - pad,
        h - pad
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{}" stroke="black"/>"#,
        h - pad
    );
    let _ = writeln!(
        svg,
        r#"<text x="{pad}" y="{}" font-size="12">max {}</text>"#,
        pad - 10.0,
        Rational::to_decimal_string(&trace.max_backlog(), 6)
    );
    let _ = writeln!(
        svg,
        r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{points}"/>"#
    );
    svg.push_str("</svg>\n");
    svg
}

/// Writes `trace.csv`, `summary.json` and optionally `backlog.svg`.
pub fn write_run(dir: &Path, trace: &Trace, svg: bool) -> Result<Summary> {
    fs::create_dir_all(dir)?;
    let mut buf = Vec::new();
    write_trace_csv(trace, &mut buf)?;
    fs::write(dir.join(TRACE_FILE), buf)?;
    let summary = Summary::from_trace(trace);
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    if svg {
        fs::write(dir.join(SVG_FILE), backlog_svg(trace))?;
    }
    Ok(summary)
}

/// Loads a trace from a run directory or from a `trace.csv` path; the
/// config comes from the neighbouring `summary.json`.
pub fn read_run(path: &Path) -> Result<Trace> {
    let csv_path: PathBuf = if path.is_dir() {
        path.join(TRACE_FILE)
    } else {
        path.to_path_buf()
    };
    let dir = csv_path.parent().unwrap_or(Path::new("."));
    let summary: Summary = serde_json::from_str(&fs::read_to_string(dir.join(SUMMARY_FILE))?)?;
    read_trace_csv(summary.config, fs::File::open(&csv_path)?)
}

/// `[section]` headers and `key = value` lines; `#` and `;` start comments.
pub fn parse_ini(text: &str) -> Result<BTreeMap<String, BTreeMap<String, String>>> {
    let mut out: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            section = rest
                .strip_suffix(']')
                .ok_or_else(|| {
                    Error::Config(format!("line {}: unterminated section header", i + 1))
                })?
                .trim()
                .to_string();
            out.entry(section.clone()).or_default();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        if section.is_empty() {
            return Err(Error::Config(format!(
                "line {}: key outside any section",
                i + 1
            )));
        }
        let prev = out
            .entry(section.clone())
            .or_default()
            .insert(k.trim().to_string(), v.trim().to_string());
        if prev.is_some() {
            return Err(Error::Config(format!(
                "line {}: duplicate key {}",
                i + 1,
                k.trim()
            )));
        }
    }
    Ok(out)
}

fn parse_field<T: std::str::FromStr>(section: &str, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("[{section}] {key} = {v:?} is not valid")))
}

/// Reads a game config:
///
/// ```text
/// [game]
/// n = 16
/// p = 2
/// steps = 500
/// seed = 7
/// truncation = 12      # optional
/// visibility = adaptive  # optional
///
/// [filler]
/// spec = random:1/2
///
/// [emptier]
/// spec = greedy
/// ```
pub fn parse_config(text: &str) -> Result<GameConfig> {
    let ini = parse_ini(text)?;
    for (name, keys) in &ini {
        let allowed: &[&str] = match name.as_str() {
            "game" => &["n", "p", "steps", "seed", "truncation", "visibility"],
            "filler" | "emptier" => &["spec"],
            other => return Err(Error::Config(format!("unknown section [{other}]"))),
        };
        if let Some(k) = keys.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key {k} in [{name}]")));
        }
    }
    let empty = BTreeMap::new();
    let game = ini.get("game").unwrap_or(&empty);
    let need = |section: &str, key: &str| -> Result<String> {
        ini.get(section)
            .and_then(|s| s.get(key))
            .cloned()
            .ok_or_else(|| Error::Config(format!("missing [{section}] {key}")))
    };
    let filler = need("filler", "spec")?
        .parse()
        .map_err(|e| Error::Config(format!("[filler] spec: {e}")))?;
    let emptier = need("emptier", "spec")?
        .parse()
        .map_err(|e| Error::Config(format!("[emptier] spec: {e}")))?;
    let mut cfg = GameConfig::new(
        parse_field("game", "n", &need("game", "n")?)?,
        parse_field("game", "p", &need("game", "p")?)?,
        parse_field("game", "steps", &need("game", "steps")?)?,
        filler,
        emptier,
    );
    if let Some(v) = game.get("seed") {
        cfg.seed = parse_field("game", "seed", v)?;
    }
    if let Some(v) = game.get("truncation") {
        cfg.truncation = Some(parse_field::<Rational>("game", "truncation", v)?);
    }
    if let Some(v) = game.get("visibility") {
        cfg.visibility = parse_field::<Visibility>("game", "visibility", v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn render_config(cfg: &GameConfig) -> String {
    let mut s = format!(
        "[game]\nn = {}\np = {}\nsteps = {}\nseed = {}\nvisibility = {}\n",
        cfg.n, cfg.p, cfg.steps, cfg.seed, cfg.visibility
    );
    if let Some(t) = &cfg.truncation {
        let _ = writeln!(s, "truncation = {}", t.to_compact_string());
    }
    let _ = write!(
        s,
        "\n[filler]\nspec = {}\n\n[emptier]\nspec = {}\n",
        cfg.filler, cfg.emptier
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emptiers::EmptierSpec;
    use crate::engine::run_game;
    use crate::fillers::FillerSpec;

    #[test]
    fn csv_round_trip() {
        let cfg = GameConfig::new(
            5,
            2,
            40,
            "random:1/2".parse().unwrap(),
            EmptierSpec::SmoothedGreedy,
        )
        .with_seed(3);
        let trace = run_game(&cfg).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        let back = read_trace_csv(cfg, &buf[..]).unwrap();
        assert_eq!(back, trace);
    }

    #[test]
    fn csv_rejects_tampered_backlog() {
        let cfg = GameConfig::new(2, 1, 3, FillerSpec::Uniform, EmptierSpec::Greedy);
        let trace = run_game(&cfg).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let cols: Vec<&str> = lines[2].split(',').collect();
        let mut cols: Vec<String> = cols.into_iter().map(String::from).collect();
        cols[3] = "7/1".into();
        lines[2] = cols.join(",");
        assert!(read_trace_csv(cfg, lines.join("\n").as_bytes()).is_err());
    }

    #[test]
    fn config_round_trip() {
        let text = "# demo\n[game]\nn = 16\np = 2\nsteps = 50\nseed = 9\ntruncation = 12\n\n[filler]\nspec = random:1/2\n[emptier]\nspec = greedy ; plain\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!((cfg.n, cfg.p, cfg.steps, cfg.seed), (16, 2, 50, 9));
        assert_eq!(cfg.truncation, Some(Rational::from(12i64)));
        assert_eq!(cfg.visibility, Visibility::Adaptive);
        assert_eq!(parse_config(&render_config(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn config_errors() {
        assert!(parse_config(
            "[game]\nn = 4\np = 5\nsteps = 1\n[filler]\nspec = zero\n[emptier]\nspec = greedy\n"
        )
        .is_err());
        assert!(parse_config("[game]\nn = 4\np = 1\nsteps = 1\n[filler]\nspec = zero\n").is_err());
        assert!(parse_config("[game]\nn = 4\np = 1\nsteps = 1\nbogus = 2\n[filler]\nspec = zero\n[emptier]\nspec = greedy\n").is_err());
        assert!(parse_config("n = 4\n").is_err());
    }

    #[test]
    fn svg_has_one_vertex_per_row() {
        let cfg = GameConfig::new(4, 1, 12, FillerSpec::Harmonic, EmptierSpec::Greedy);
        let trace = run_game(&cfg).unwrap();
        let svg = backlog_svg(&trace);
        let points = svg
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap();
        assert_eq!(points.split(' ').count(), trace.len() + 1);
    }
}
