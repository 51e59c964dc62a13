//! One function per subcommand.

use std::path::{Path, PathBuf};

use merw::closedform::{enumerate, moments, Budget};
use merw::engine::{self, Engine, Record};
use merw::martingale;
use merw::mcstats::{self, report, EnsembleOptions, Functional};
use merw::model::{self, FirstStep, RegimeKind, WalkConfig};
use merw::rational::{self, Rational};
use merw::verify::{self, Fault, Tier, VerifyOptions};

use crate::args::{
    EnsembleArgs, Format, LimitsArgs, MomentsArgs, OutputArgs, ReplayArgs, Resolver, SimulateArgs, TrackArgs,
    VerifyArgs, WalkArgs,
};
use crate::error::CliError;
use crate::manifest::{manifest_path, RunManifest};
use crate::output::{self, Cell, Table};

/// Parameters of the walk with the exact value of `p` (and `q`) kept for
/// rational computations and regime classification.
struct Walk {
    config: WalkConfig,
    p: Rational,
    q: Option<Rational>,
}

fn parse_unit(name: &str, text: &str) -> Result<(Rational, f64), CliError> {
    let r = rational::parse(text).map_err(|e| CliError::Usage(format!("--{name} {text:?}: {e}")))?;
    if !rational::is_unit_interval(&r) {
        return Err(CliError::Usage(format!("--{name} must lie in [0, 1], got {text}")));
    }
    let f = rational::to_f64(&r);
    Ok((r, f))
}

fn resolve_walk(r: &mut Resolver, w: &WalkArgs, need_steps: bool, need_seed: bool) -> Result<Walk, CliError> {
    let d: usize = r.required("dim", w.dim)?;
    let p_text: String = r.required("p", w.p.clone())?;
    let (p, pf) = parse_unit("p", &p_text)?;
    let q = match r.value::<String>("q", w.q.clone())? {
        Some(text) => Some(parse_unit("q", &text)?),
        None => None,
    };
    let steps: u64 = if need_steps { r.required("steps", w.steps)? } else { 1 };
    let seed: u64 = if need_seed { r.or("seed", w.seed, 0)? } else { 0 };
    let first_step = match &q {
        Some((_, qf)) => FirstStep::Biased { q: *qf },
        None => FirstStep::Uniform,
    };
    let config = WalkConfig::new(d, pf, steps, seed)?.with_first_step(first_step)?;
    Ok(Walk {
        config,
        p,
        q: q.map(|(r, _)| r),
    })
}

struct Output {
    out: Option<PathBuf>,
    format: Format,
    manifest: Option<PathBuf>,
}

fn resolve_output(r: &mut Resolver, o: &OutputArgs, default: Format) -> Result<Output, CliError> {
    let out = r.path("out", o.out.clone())?;
    let format = r.or("format", o.format, default)?;
    let manifest = r.path("manifest", o.manifest.clone())?;
    Ok(Output { out, format, manifest })
}

fn write_manifest(r: &Resolver, o: &Output, outputs: Vec<PathBuf>, out_is_dir: bool) -> Result<(), CliError> {
    if let Some(path) = manifest_path(o.manifest.as_deref(), o.out.as_deref(), out_is_dir) {
        let m = RunManifest::new(r.args(), &r.settings, outputs);
        output::emit(&output::json(&m)?, Some(&path))?;
    }
    Ok(())
}

fn finish(r: &Resolver, o: &Output, text: &str) -> Result<(), CliError> {
    output::emit(text, o.out.as_deref())?;
    write_manifest(r, o, o.out.iter().cloned().collect(), false)
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let mut r = Resolver::new("simulate", a.output.config.as_deref())?;
    let walk = resolve_walk(&mut r, &a.walk, true, true)?;
    let o = resolve_output(&mut r, &a.output, Format::Csv)?;
    let engine: Engine = r.or("engine", a.engine.clone(), "reduced".to_string())?.parse()?;
    let record_text = r.or("record", a.record.clone(), "positions".to_string())?;
    let record: Record = record_text.parse()?;
    let runs: u64 = r.or("runs", a.runs, 1)?;
    if runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let ext = o.format.to_string();
    if runs > 1 && o.out.is_none() {
        return Err(CliError::Usage("--runs > 1 needs --out <directory>".into()));
    }
    let mut outputs = Vec::new();
    for stream in 0..runs {
        let traj = engine::simulate(&walk.config, engine, stream, record)?;
        let text = trajectory_table(&traj).render(o.format)?;
        let path = match (&o.out, runs) {
            (None, _) => None,
            (Some(p), 1) => Some(p.clone()),
            (Some(dir), _) => Some(dir.join(format!("stream_{stream}.{ext}"))),
        };
        output::emit(&text, path.as_deref())?;
        outputs.extend(path);
    }
    write_manifest(&r, &o, outputs, runs > 1)
}

fn trajectory_table(t: &engine::Trajectory) -> Table {
    let mut cols = vec!["step".to_string()];
    cols.extend((1..=t.d).map(|i| format!("s{i}")));
    let mut table = Table::new(cols);
    for (row, &n) in t.steps.iter().enumerate() {
        let mut cells = vec![Cell::Int(n as i64)];
        cells.extend(t.position(row).iter().map(|&x| Cell::Int(x)));
        table.rows.push(cells);
    }
    table
}

fn rel_diff(x: f64, y: f64) -> f64 {
    let scale = x.abs().max(y.abs());
    if scale == 0.0 {
        0.0
    } else {
        (x - y).abs() / scale
    }
}

const AGREEMENT: f64 = 1e-10;

pub fn moments(a: &MomentsArgs) -> Result<(), CliError> {
    let mut r = Resolver::new("moments", a.output.config.as_deref())?;
    let walk = resolve_walk(&mut r, &a.walk, true, false)?;
    let o = resolve_output(&mut r, &a.output, Format::Csv)?;
    let want_closed = r.switch("closed", a.closed)?;
    let no_closed = r.switch("no-closed", a.no_closed)?;
    let exact_enum = r.switch("exact-enum", a.exact_enum)?;
    let budget = r.value("budget", a.budget)?;
    let stride: u64 = r.or("stride", a.stride, 1)?;
    if stride == 0 {
        return Err(CliError::Usage("--stride must be positive".into()));
    }
    let cfg = &walk.config;
    let (d, n) = (cfg.d, cfg.horizon);
    let a_exact = model::memory_to_a_exact(d, &walk.p)?;
    let critical = a_exact == rational::ratio(1, 2);
    let closed_applies = walk.q.is_none() && !critical;
    if want_closed && !closed_applies {
        return Err(CliError::Usage(
            "the closed form needs the uniform first step and a != 1/2".into(),
        ));
    }
    let closed = closed_applies && !no_closed;

    let table = moments::exact_second_moment(n, d, cfg.p, cfg.first_step)?;
    let levels = if exact_enum {
        let budget = budget.map(|max_states| Budget { max_states }).unwrap_or(Budget::default_for(d));
        Some(enumerate::enumerate_levels(n, d, &walk.p, walk.q.as_ref(), budget)?)
    } else {
        None
    };

    let mut cols: Vec<String> = moments::MomentTable::csv_header(d).split(',').map(String::from).collect();
    if closed {
        cols.push("closed_cov".into());
    }
    if levels.is_some() {
        cols.extend((1..=d).map(|i| format!("enum_e_s{i}")));
        for i in 1..=d {
            cols.extend((1..=d).map(|j| format!("enum_cov_{i}_{j}")));
        }
    }
    let mut out = Table::new(cols);
    let af = rational::to_f64(&a_exact);
    for row in &table.rows {
        let mut cells = vec![Cell::Int(row.n as i64)];
        cells.extend(row.mean.iter().chain(&row.second).map(|&x| Cell::Float(x)));
        if closed {
            let c = moments::closed_form_second_moment(row.n, d, af)?;
            for i in 0..d {
                let rec = row.second[i * d + i];
                if rel_diff(c, rec) > AGREEMENT {
                    return Err(CliError::Failed(format!(
                        "closed form {c} disagrees with the recurrence {rec} at n = {}",
                        row.n
                    )));
                }
            }
            cells.push(Cell::Float(c));
        }
        if let Some(levels) = &levels {
            let m = levels[(row.n - 1) as usize].moments(&walk.p)?;
            let values: Vec<f64> = m.mean.iter().chain(&m.second).map(rational::to_f64).collect();
            for (k, (&e, &rec)) in values.iter().zip(row.mean.iter().chain(&row.second)).enumerate() {
                if rel_diff(e, rec) > AGREEMENT {
                    return Err(CliError::Failed(format!(
                        "enumeration {e} disagrees with the recurrence {rec} at n = {} (column {})",
                        row.n,
                        k + 1
                    )));
                }
            }
            cells.extend(values.into_iter().map(Cell::Float));
        }
        if row.n == 1 || row.n % stride == 0 || row.n == n {
            out.rows.push(cells);
        }
    }
    finish(&r, &o, &out.render(o.format)?)
}

fn exact_regime(walk: &Walk) -> Result<model::Regime, CliError> {
    Ok(model::classify_regime_exact(walk.config.d, &walk.p)?)
}

pub fn limits(a: &LimitsArgs) -> Result<(), CliError> {
    let mut r = Resolver::new("limits", a.output.config.as_deref())?;
    let walk = resolve_walk(&mut r, &a.walk, false, false)?;
    let o = resolve_output(&mut r, &a.output, Format::Json)?;
    let tol: f64 = r.or("tol", a.tol, 1e-10)?;
    let regime = exact_regime(&walk)?;
    let cfg = &walk.config;
    let lc = moments::limit_constants_for(cfg.d, cfg.p, cfg.first_step, regime, tol)?;
    finish(&r, &o, &output::document(&lc, o.format)?)
}

pub fn ensemble(a: &EnsembleArgs) -> Result<(), CliError> {
    let mut r = Resolver::new("ensemble", a.output.config.as_deref())?;
    let walk = resolve_walk(&mut r, &a.walk, true, true)?;
    let o = resolve_output(&mut r, &a.output, Format::Json)?;
    let runs: u64 = r.required("runs", a.runs)?;
    let regime = exact_regime(&walk)?;
    let functional: Functional = match r.value::<String>("functional", a.functional.clone())? {
        Some(f) => f.parse()?,
        None => Functional::for_regime(regime.kind),
    };
    let engine: Engine = r.or("engine", a.engine.clone(), "reduced".to_string())?.parse()?;
    let workers: usize = r.or("workers", a.workers, 0)?;
    let stride = r.value("stride", a.stride)?;
    let allow_override = r.switch("override", a.allow_override)?;
    let threshold: f64 = r.or("threshold", a.threshold, report::Z_THRESHOLD)?;
    let target: String = r.or("target", a.target.clone(), "exact".to_string())?;
    let strict = r.switch("strict", a.strict)?;
    // The workers cap never changes the report, so it is left out of the
    // reproducing command line.
    r.settings.remove("workers");

    let options = EnsembleOptions {
        engine,
        workers,
        stride,
        allow_override,
    };
    let cfg = &walk.config;
    let stats = mcstats::run_ensemble(cfg, runs, functional, &options)?;
    let rep = match functional {
        Functional::Occupation => report::occupation_report(&stats, threshold)?,
        Functional::Superdiffusive if regime.kind == RegimeKind::Superdiffusive => {
            report::superdiffusive_limit(&stats, threshold)?
        }
        f => {
            let t = match target.as_str() {
                "exact" => report::exact_target(cfg, f)?,
                "limit" => report::limit_target(cfg, f)?,
                other => return Err(CliError::Usage(format!("--target {other:?}: expected exact or limit"))),
            };
            let mut rep = report::covariance_report(&stats, &t, threshold)?;
            if matches!(f, Functional::Diffusive | Functional::Critical) && regime.kind != RegimeKind::Superdiffusive {
                let gof = report::normality_check(&stats, t[0])?;
                rep.attach_gof(&gof);
            }
            rep
        }
    };
    finish(&r, &o, &output::document(&rep, o.format)?)?;
    if strict && !rep.pass {
        return Err(CliError::Failed("ensemble report failed".into()));
    }
    Ok(())
}

pub fn track(a: &TrackArgs) -> Result<(), CliError> {
    let mut r = Resolver::new("track", a.output.config.as_deref())?;
    let walk = resolve_walk(&mut r, &a.walk, true, true)?;
    let o = resolve_output(&mut r, &a.output, Format::Csv)?;
    let engine: Engine = r.or("engine", a.engine.clone(), "reduced".to_string())?.parse()?;
    let stream: u64 = r.or("stream", a.stream, 0)?;
    let stat: String = r.or("stat", a.stat.clone(), "martingale".to_string())?;
    let cfg = &walk.config;
    let regime = exact_regime(&walk)?;
    let traj = engine::simulate(cfg, engine, stream, Record::Positions)?;
    let table = match stat.as_str() {
        "martingale" => {
            let t = martingale::track(&traj, cfg.p, cfg.first_step)?;
            let d = t.d;
            let mut cols = vec!["n".to_string(), "a_n".into()];
            cols.extend((1..=d).map(|i| format!("m{i}")));
            cols.extend((1..=d).map(|i| format!("eps{i}")));
            cols.extend(["qv_trace".into(), "v_n".into()]);
            let mut table = Table::new(cols);
            for k in 1..=t.len() {
                let mut cells = vec![Cell::Int(k as i64), Cell::Float(t.an[k - 1])];
                cells.extend(t.m_at(k).iter().map(|&x| Cell::Float(x)));
                cells.extend(t.eps_at(k).iter().map(|&x| Cell::Float(x)));
                cells.push(Cell::Float(t.qv_trace[k - 1]));
                cells.push(Cell::Float(t.vn[k - 1]));
                table.rows.push(cells);
            }
            table
        }
        "qsl" | "lil" | "occupation" => {
            let s = match stat.as_str() {
                "qsl" => martingale::qsl_statistic(&traj, regime.kind)?,
                "lil" => martingale::lil_statistic(&traj, regime.kind)?,
                _ => martingale::occupation(&traj)?,
            };
            series_table(&s, cfg.d)
        }
        other => {
            return Err(CliError::Usage(format!(
                "--stat {other:?}: expected martingale, qsl, lil or occupation"
            )))
        }
    };
    finish(&r, &o, &table.render(o.format)?)
}

fn series_table(s: &martingale::StatSeries, d: usize) -> Table {
    let mut cols = vec!["n".to_string()];
    if s.width == 1 {
        cols.push("value".into());
    } else if s.width == d * d && s.name == "qsl" {
        for i in 1..=d {
            cols.extend((1..=d).map(|j| format!("v_{i}_{j}")));
        }
    } else {
        cols.extend((1..=s.width).map(|i| format!("v_{i}")));
    }
    let mut table = Table::new(cols);
    for (row, &n) in s.steps.iter().enumerate() {
        let mut cells = vec![Cell::Int(n as i64)];
        cells.extend(s.at(row).iter().map(|&x| Cell::Float(x)));
        table.rows.push(cells);
    }
    table
}

pub fn verify(a: &VerifyArgs) -> Result<(), CliError> {
    let mut r = Resolver::new("verify", a.output.config.as_deref())?;
    let out = r.path("out", a.output.out.clone())?;
    let format: Option<Format> = r.value("format", a.output.format)?;
    let manifest = r.path("manifest", a.output.manifest.clone())?;
    let tier: Tier = r.or("tier", a.tier.clone(), "fast".to_string())?.parse()?;
    let seed: u64 = r.or("seed", a.seed, 42)?;
    let workers: usize = r.or("workers", a.workers, 0)?;
    r.settings.remove("workers");
    let only = match r.value::<String>("only", a.only.clone())? {
        Some(list) => Some(
            list.split(',')
                .map(|s| s.trim().parse::<u8>().map_err(|e| CliError::Usage(format!("--only {list:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    let fault = a.inject_fault.as_deref().map(str::parse::<Fault>).transpose()?;
    let options = VerifyOptions {
        tier,
        seed,
        workers,
        fault,
        only,
    };
    let suite = verify::run_suite(&options)?;
    let table = suite.table();
    let json = output::json(&suite)?;
    match (format, &out) {
        (Some(Format::Json), None) => output::emit(&json, None)?,
        (_, None) => output::emit(&table, None)?,
        (_, Some(path)) => {
            output::emit(&json, Some(path))?;
            eprint!("{table}");
        }
    }
    let o = Output {
        out,
        format: format.unwrap_or(Format::Json),
        manifest,
    };
    write_manifest(&r, &o, o.out.iter().cloned().collect(), false)?;
    if suite.pass {
        Ok(())
    } else {
        let failed: Vec<String> = suite.criteria.iter().filter(|c| !c.pass).map(|c| c.id.to_string()).collect();
        Err(CliError::Failed(format!("verification failed: criteria {}", failed.join(", "))))
    }
}

fn swap_value(args: &mut [String], flag: &str, f: impl Fn(&str) -> String) -> Option<(PathBuf, PathBuf)> {
    let i = args.iter().position(|a| a == flag)?;
    let old = args.get(i + 1)?.clone();
    let new = f(&old);
    args[i + 1] = new.clone();
    Some((PathBuf::from(old), PathBuf::from(new)))
}

fn same_bytes(a: &Path, b: &Path) -> Result<bool, CliError> {
    if a.is_dir() {
        let mut names: Vec<_> = std::fs::read_dir(a)?.filter_map(|e| e.ok()).map(|e| e.file_name()).collect();
        names.sort();
        for name in names {
            if name == "manifest.json" {
                continue;
            }
            if !same_bytes(&a.join(&name), &b.join(&name))? {
                return Ok(false);
            }
        }
        return Ok(true);
    }
    Ok(std::fs::read(a)? == std::fs::read(b).unwrap_or_default())
}

pub fn replay(a: &ReplayArgs, run: impl Fn(Vec<String>) -> Result<(), CliError>) -> Result<(), CliError> {
    let m = RunManifest::read(&a.manifest)?;
    if m.subcommand == "replay" || m.args.first() != Some(&m.subcommand) {
        return Err(CliError::Usage("manifest does not describe a replayable command".into()));
    }
    if !a.check {
        return run(m.args.clone());
    }
    let mut args = m.args.clone();
    let out = swap_value(&mut args, "--out", |p| format!("{p}.replay"))
        .ok_or_else(|| CliError::Usage("--check needs a manifest of a run that wrote --out".into()))?;
    let tmp_manifest = std::env::temp_dir().join(format!("merw-replay-{}.manifest.json", std::process::id()));
    match swap_value(&mut args, "--manifest", |_| tmp_manifest.to_string_lossy().into_owned()) {
        Some(_) => {}
        None => {
            args.push("--manifest".into());
            args.push(tmp_manifest.to_string_lossy().into_owned());
        }
    }
    let result = run(args);
    let same = result.as_ref().map_or(Ok(false), |_| same_bytes(&out.0, &out.1));
    let _ = std::fs::remove_file(&tmp_manifest);
    if out.1.is_dir() {
        let _ = std::fs::remove_dir_all(&out.1);
    } else {
        let _ = std::fs::remove_file(&out.1);
    }
    result?;
    if same? {
        eprintln!("replay of {} reproduced {} byte for byte", a.manifest.display(), out.0.display());
        Ok(())
    } else {
        Err(CliError::Failed(format!("replay output differs from {}", out.0.display())))
    }
}
