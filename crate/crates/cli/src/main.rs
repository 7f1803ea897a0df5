use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use shallowcl::charspace::{analyse, residual_classifying, residual_cosymmetry, residual_divergence, random_jets, CharTuple, JetPoint, Residuals};
use shallowcl::config::{Expectation, TopoSpec};
use shallowcl::equivmaps::{expected_image, push_check, MapKind, PointMap};
use shallowcl::fixtures;
use shallowcl::hamiltonian::{casimir_residual, generating_orbit, generating_set, CasimirProfile};
use shallowcl::report::{catalog_row, render_table, to_json, CatalogRow, ClassifyReport};
use shallowcl::swesolver::{gaussian_hump, run_audit_final, smooth_periodic_state, AuditOptions, Boundary, Grid, SimState};
use shallowcl::timefun::QuasiPoly;
use shallowcl::topography::Topography;
use shallowcl::Error;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

const EXIT_MISMATCH: u8 = 1;
const EXIT_DETECTION: u8 = 2;
const EXIT_VERIFICATION: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_NO_INPUT: u8 = 66;

#[derive(Parser)]
#[command(name = "shallowcl", version, about = "Conservation laws of the 2D shallow water equations over a bottom topography")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// topography spec file, or fixture:NAME, case:ID, expr:EXPR
    #[arg(long)]
    topo: String,
    /// sampling seed (default: the spec's, else 0)
    #[arg(long)]
    seed: Option<u64>,
    /// residual tolerance overriding the built-in ones
    #[arg(long)]
    tol: Option<f64>,
    /// jets per residual check (default: the spec's, else 1000)
    #[arg(long)]
    points: Option<usize>,
    /// write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Detect the template system, solve for the characteristics and name the case
    Classify {
        #[command(flatten)]
        common: Common,
        /// include the template rows, singular values and compatibility check
        #[arg(long)]
        emit_template: bool,
    },
    /// Emit the basis of characteristics with its residuals
    Chars {
        #[command(flatten)]
        common: Common,
    },
    /// Check tuples (default: the computed basis) against the three residual tests
    Verify {
        #[command(flatten)]
        common: Common,
        /// JSON array of tuples
        #[arg(long)]
        tuples: Option<PathBuf>,
    },
    /// Simulate a flow and record the balance of every tuple's current
    Audit {
        #[command(flatten)]
        common: Common,
        /// initial state: gauss (hump in an audited box) or wave (periodic)
        #[arg(long, default_value = "gauss")]
        init: String,
        #[arg(long = "T", default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 128)]
        nx: usize,
        #[arg(long)]
        ny: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = -3.0)]
        lo: f64,
        #[arg(long, default_value_t = 3.0)]
        hi: f64,
        /// JSON array of tuples (default: the computed basis)
        #[arg(long)]
        tuples: Option<PathBuf>,
        /// save the final state as JSON
        #[arg(long)]
        save_state: Option<PathBuf>,
    },
    /// Residual of the Casimir condition on a state
    Casimir {
        /// density profile: 1, q, q2, q3
        #[arg(long = "R", default_value = "q2")]
        r: String,
        /// state JSON (default: a smooth periodic state)
        #[arg(long)]
        state: Option<PathBuf>,
        #[arg(long, default_value_t = 128)]
        nx: usize,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Close seeds under the symmetry action and the bracket
    Orbit {
        #[command(flatten)]
        common: Common,
        /// JSON array of tuples (default: the listed generating set)
        #[arg(long)]
        seeds: Option<PathBuf>,
    },
    /// Apply an admissible map (T1, T2, T3, T3Y) and classify the image
    Transform {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        map: String,
        /// slope removed by T3
        #[arg(long, default_value_t = 1.0)]
        strength: f64,
        /// exit 1 unless the image is the listed case
        #[arg(long)]
        check_case: bool,
        #[arg(long, default_value_t = 48)]
        nx: usize,
    },
    /// Table of catalog fixtures against their expected case and dimension
    Report {
        /// directory of spec files with [expect] tables (default: built-in catalog)
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        points: Option<usize>,
        /// write JSON rows here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A failure with its exit code.
struct Fail(u8, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Fail {
        let code = match e {
            Error::Io(_) => EXIT_NO_INPUT,
            Error::DetectionInstability(_) | Error::Impossible(_) | Error::Inconsistent(_) | Error::Compatibility(_) | Error::ClassificationGap(_) => EXIT_DETECTION,
            Error::Verification(_) | Error::Numeric(_) | Error::Internal(_) => EXIT_VERIFICATION,
            Error::Parameter(_) | Error::Domain(_) | Error::Config(_) | Error::Parse(_) | Error::Precondition(_) | Error::State(_) => EXIT_USAGE,
        };
        Fail(code, e.to_string())
    }
}

type Out = Result<u8, Fail>;

/// Resolved settings shared by every topography command.
struct RunConfig {
    spec: TopoSpec,
    topo: Arc<Topography>,
    seed: u64,
    points: usize,
    tol: Option<f64>,
    out: Option<PathBuf>,
}

impl RunConfig {
    fn new(c: &Common) -> Result<RunConfig, Fail> {
        if let Some(t) = c.tol {
            if !(t > 0.0) {
                return Err(Fail(EXIT_USAGE, format!("--tol must be positive, got {t}")));
            }
        }
        let spec = TopoSpec::resolve(&c.topo)?;
        let topo = spec.build()?;
        let seed = c.seed.or(spec.sampling.seed).unwrap_or(0);
        let points = c.points.or(spec.sampling.points).unwrap_or(1000);
        if points == 0 {
            return Err(Fail(EXIT_USAGE, "--points must be positive".into()));
        }
        Ok(RunConfig { spec, topo, seed, points, tol: c.tol, out: c.out.clone() })
    }

    fn within(&self, r: &Residuals) -> bool {
        match self.tol {
            Some(t) => r.classifying < t && r.cosymmetry < t && r.divergence < t,
            None => r.within(self.topo.is_approximate()),
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Fail> {
    match out {
        Some(p) => std::fs::write(p, format!("{text}\n")).map_err(|e| Fail(EXIT_NO_INPUT, format!("{}: {e}", p.display()))),
        None => write_stdout(&format!("{text}\n")),
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) ends the output quietly.
fn write_stdout(text: &str) -> Result<(), Fail> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Fail(EXIT_VERIFICATION, format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn emit_json<T: Serialize>(out: &Option<PathBuf>, v: &T) -> Result<(), Fail> {
    emit(out, &to_json(v)?)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Fail> {
    let text = std::fs::read_to_string(path).map_err(|e| Fail(EXIT_NO_INPUT, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Fail(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn read_tuples(path: &Path) -> Result<Vec<CharTuple>, Fail> {
    let raw: Vec<CharTuple> = read_json(path)?;
    let norm = |q: &QuasiPoly| QuasiPoly::from_terms(q.terms().iter().copied());
    Ok(raw.iter().map(|t| CharTuple { c1: t.c1, f1: norm(&t.f1), f2: norm(&t.f2), f3: norm(&t.f3), f4: norm(&t.f4) }).collect())
}

fn read_state(path: &Path) -> Result<SimState, Fail> {
    let s: SimState = read_json(path)?;
    let g = Grid::new(s.grid.nx, s.grid.ny, s.grid.dx, s.grid.dy, s.grid.x0, s.grid.y0, s.grid.boundary)?;
    if [s.u.len(), s.v.len(), s.h.len()].iter().any(|&n| n != g.len()) {
        return Err(Fail(EXIT_USAGE, format!("{}: fields do not match the {}×{} grid", path.display(), g.nx, g.ny)));
    }
    s.check_positive()?;
    Ok(s)
}

fn expectation_code(expect: Option<&Expectation>, label: &shallowcl::charspace::CaseLabel) -> Result<u8, Fail> {
    if let Some(e) = expect {
        let bad = e.mismatches(label)?;
        if !bad.is_empty() {
            for b in bad {
                eprintln!("expectation mismatch: {b}");
            }
            return Ok(EXIT_MISMATCH);
        }
    }
    Ok(0)
}

fn verify_tuples(cfg: &RunConfig, tuples: &[CharTuple]) -> Result<Vec<Residuals>, Fail> {
    let jets = random_jets(&cfg.topo, cfg.points, cfg.seed)?;
    let plain: Vec<JetPoint> = jets.iter().map(|e| e.jet).collect();
    let txy: Vec<(f64, f64, f64)> = plain.iter().map(|j| (j.t, j.x, j.y)).collect();
    tuples
        .iter()
        .map(|ct| {
            Ok(Residuals {
                classifying: residual_classifying(ct, &cfg.topo, &txy)?,
                cosymmetry: residual_cosymmetry(ct, &cfg.topo, &plain)?,
                divergence: residual_divergence(ct, &cfg.topo, &jets)?,
            })
        })
        .collect()
}

fn worst(rs: &[Residuals]) -> Residuals {
    rs.iter().fold(Residuals::default(), |a, r| a.max(r))
}

fn cmd_classify(common: &Common, emit_template: bool) -> Out {
    let cfg = RunConfig::new(common)?;
    let a = analyse(&cfg.topo, cfg.seed)?;
    let r = worst(&verify_tuples(&cfg, &a.basis.tuples)?);
    let ok = cfg.within(&r);
    emit_json(&cfg.out, &ClassifyReport::build(&a, r, ok, cfg.seed, emit_template))?;
    if !ok {
        eprintln!("verification failure: {r:?}");
        return Ok(EXIT_VERIFICATION);
    }
    expectation_code(cfg.spec.expect.as_ref(), &a.label)
}

fn cmd_chars(common: &Common) -> Out {
    #[derive(Serialize)]
    struct Chars {
        case: String,
        dimension: usize,
        tuples: Vec<CharTuple>,
        residuals: Residuals,
    }
    let cfg = RunConfig::new(common)?;
    let a = analyse(&cfg.topo, cfg.seed)?;
    let r = worst(&verify_tuples(&cfg, &a.basis.tuples)?);
    emit_json(&cfg.out, &Chars { case: a.label.to_string(), dimension: a.label.dimension, tuples: a.basis.tuples.clone(), residuals: r })?;
    Ok(if cfg.within(&r) { 0 } else { EXIT_VERIFICATION })
}

fn cmd_verify(common: &Common, tuples: &Option<PathBuf>) -> Out {
    #[derive(Serialize)]
    struct Row {
        tuple: String,
        residuals: Residuals,
        pass: bool,
    }
    let cfg = RunConfig::new(common)?;
    let ts = match tuples {
        Some(p) => read_tuples(p)?,
        None => analyse(&cfg.topo, cfg.seed)?.basis.tuples,
    };
    let rows: Vec<Row> = ts.iter().zip(verify_tuples(&cfg, &ts)?).map(|(t, r)| Row { tuple: t.to_string(), residuals: r, pass: cfg.within(&r) }).collect();
    let ok = rows.iter().all(|r| r.pass);
    emit_json(&cfg.out, &rows)?;
    Ok(if ok { 0 } else { EXIT_VERIFICATION })
}

#[allow(clippy::too_many_arguments)]
fn cmd_audit(common: &Common, init: &str, t_end: f64, nx: usize, ny: Option<usize>, dt: Option<f64>, lo: f64, hi: f64, tuples: &Option<PathBuf>, save: &Option<PathBuf>) -> Out {
    let cfg = RunConfig::new(common)?;
    if !(hi > lo) {
        return Err(Fail(EXIT_USAGE, format!("empty domain [{lo}, {hi}]")));
    }
    let ny = ny.unwrap_or(nx);
    let (dx, dy) = ((hi - lo) / nx as f64, (hi - lo) / ny as f64);
    let state = match init {
        "gauss" => {
            let g = Grid::new(nx, ny, dx, dy, lo, lo, Boundary::Audited)?;
            // off-centre, so parity does not zero the balance integrals
            let (c, l) = (0.5 * (lo + hi), hi - lo);
            gaussian_hump(g, 1.0, 0.1, 0.7 * l / 6.0, (c + 0.1 * l, c + 0.05 * l))?
        }
        "wave" => smooth_periodic_state(Grid::new(nx, ny, dx, dy, lo, lo, Boundary::Periodic)?, 0.1)?,
        other => return Err(Fail(EXIT_USAGE, format!("unknown initial state `{other}` (gauss, wave)"))),
    };
    let named: Vec<(String, CharTuple)> = match tuples {
        Some(p) => read_tuples(p)?.into_iter().enumerate().map(|(i, t)| (format!("g{i}"), t)).collect(),
        None => analyse(&cfg.topo, cfg.seed)?.basis.tuples.into_iter().enumerate().map(|(i, t)| (format!("g{i}"), t)).collect(),
    };
    for (n, t) in &named {
        eprintln!("{n} = {t}");
    }
    let dt = dt.unwrap_or_else(|| (0.2 * dx.min(dy)).min(0.5 * state.cfl_limit()));
    let opts = AuditOptions { t_end, dt, ..Default::default() };
    let (rep, last) = run_audit_final(&state, &cfg.topo, &named, &opts)?;
    emit(&cfg.out, rep.to_csv()?.trim_end())?;
    if let Some(p) = save {
        emit_json(&Some(p.clone()), &last)?;
    }
    Ok(0)
}

fn cmd_casimir(r: &str, state: &Option<PathBuf>, nx: usize, tol: Option<f64>, out: &Option<PathBuf>) -> Out {
    #[derive(Serialize)]
    struct Rep {
        profile: String,
        nx: usize,
        ny: usize,
        residual: f64,
        tolerance: f64,
        pass: bool,
    }
    let prof = CasimirProfile::parse(r)?;
    let s = match state {
        Some(p) => read_state(p)?,
        None => smooth_periodic_state(Grid::square(nx, 0.0, std::f64::consts::TAU, Boundary::Periodic)?, 0.1)?,
    };
    let tol = tol.unwrap_or(1e-6);
    let res = casimir_residual(prof, &s)?;
    let pass = res < tol;
    emit_json(out, &Rep { profile: r.into(), nx: s.grid.nx, ny: s.grid.ny, residual: res, tolerance: tol, pass })?;
    Ok(if pass { 0 } else { EXIT_VERIFICATION })
}

fn cmd_orbit(common: &Common, seeds: &Option<PathBuf>) -> Out {
    #[derive(Serialize)]
    struct Rep {
        case: String,
        seeds: Vec<String>,
        dimension: usize,
        target_dimension: usize,
        closed: bool,
        iterations: usize,
        skipped_generators: usize,
    }
    let cfg = RunConfig::new(common)?;
    let label = analyse(&cfg.topo, cfg.seed)?.label;
    let seeds = match seeds {
        Some(p) => read_tuples(p)?,
        None => generating_set(&label).ok_or_else(|| Fail(EXIT_USAGE, format!("no listed generating set for case {label}; pass --seeds")))?,
    };
    let r = generating_orbit(&cfg.topo, &seeds)?;
    emit_json(
        &cfg.out,
        &Rep {
            case: label.to_string(),
            seeds: seeds.iter().map(|s| s.to_string()).collect(),
            dimension: r.dimension,
            target_dimension: r.target_dimension,
            closed: r.closed,
            iterations: r.iterations,
            skipped_generators: r.skipped_generators,
        },
    )?;
    Ok(0)
}

fn cmd_transform(common: &Common, map: &str, strength: f64, check: bool, nx: usize) -> Out {
    #[derive(Serialize)]
    struct Rep {
        map: String,
        source_case: String,
        target_case: String,
        expected_case: Option<String>,
        source_dimension: usize,
        target_dimension: usize,
        residual: f64,
        baseline: f64,
        residual_ratio: f64,
    }
    let cfg = RunConfig::new(common)?;
    let kind = match MapKind::parse(map)? {
        MapKind::T3 { axis, .. } => MapKind::T3 { axis, strength },
        k => k,
    };
    let m = PointMap::admissible_map(kind, &cfg.topo)?;
    let src = analyse(&m.source, cfg.seed)?.label;
    let dst = analyse(&m.target, cfg.seed)?.label;
    let expected = expected_image(kind, src.case);
    let push = push_check(&m, nx)?;
    emit_json(
        &cfg.out,
        &Rep {
            map: format!("{kind:?}"),
            source_case: src.to_string(),
            target_case: dst.to_string(),
            expected_case: expected.map(|c| c.label().to_string()),
            source_dimension: src.dimension,
            target_dimension: dst.dimension,
            residual: push.residual,
            baseline: push.baseline,
            residual_ratio: push.ratio,
        },
    )?;
    if check {
        let delta_ok = !matches!(kind, MapKind::T3 { .. }) || dst.params.delta.is_none_or(|d| d == 0.0);
        if expected != Some(dst.case) || src.dimension != dst.dimension || !delta_ok {
            eprintln!("case check failed: {src} -> {dst}, listed image {expected:?}");
            return Ok(EXIT_MISMATCH);
        }
        if push.ratio > 5.0 {
            eprintln!("pushforward residual ratio {} exceeds 5", push.ratio);
            return Ok(EXIT_VERIFICATION);
        }
    }
    Ok(0)
}

fn cmd_report(dir: &Option<PathBuf>, seed: Option<u64>, points: Option<usize>, out: &Option<PathBuf>) -> Out {
    let seed = seed.unwrap_or(0);
    let points = points.unwrap_or(1000);
    let rows: Vec<CatalogRow> = match dir {
        None => fixtures::catalog()?
            .iter()
            .map(|f| {
                let e = Expectation { case: Some(f.expected.label().into()), dimension: Some(f.dimension), k: None };
                catalog_row(&f.name, &f.topo, &e, points, seed)
            })
            .collect(),
        Some(d) => {
            let mut files: Vec<PathBuf> = std::fs::read_dir(d)
                .map_err(|e| Fail(EXIT_NO_INPUT, format!("{}: {e}", d.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "toml"))
                .collect();
            files.sort();
            if files.is_empty() {
                return Err(Fail(EXIT_NO_INPUT, format!("no fixture specs (*.toml) in {}", d.display())));
            }
            files
                .iter()
                .map(|p| {
                    let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    let spec = TopoSpec::load(p)?;
                    let topo = spec.build()?;
                    let e = spec.expect.clone().unwrap_or_default();
                    Ok(catalog_row(&name, &topo, &e, spec.sampling.points.unwrap_or(points), spec.sampling.seed.unwrap_or(seed)))
                })
                .collect::<Result<_, Fail>>()?
        }
    };
    write_stdout(&render_table(&rows))?;
    if out.is_some() {
        emit_json(out, &rows)?;
    }
    Ok(if rows.iter().all(|r| r.pass) { 0 } else { EXIT_MISMATCH })
}

fn run(cli: Cli) -> Out {
    match &cli.command {
        Command::Classify { common, emit_template } => cmd_classify(common, *emit_template),
        Command::Chars { common } => cmd_chars(common),
        Command::Verify { common, tuples } => cmd_verify(common, tuples),
        Command::Audit { common, init, t_end, nx, ny, dt, lo, hi, tuples, save_state } => cmd_audit(common, init, *t_end, *nx, *ny, *dt, *lo, *hi, tuples, save_state),
        Command::Casimir { r, state, nx, tol, out } => cmd_casimir(r, state, *nx, *tol, out),
        Command::Orbit { common, seeds } => cmd_orbit(common, seeds),
        Command::Transform { common, map, strength, check_case, nx } => cmd_transform(common, map, *strength, *check_case, *nx),
        Command::Report { fixtures, seed, points, out } => cmd_report(fixtures, *seed, *points, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_error_maps_to_a_documented_code() {
        let s = String::new;
        let cases = [
            (Error::Io(s()), EXIT_NO_INPUT),
            (Error::Parse(s()), EXIT_USAGE),
            (Error::DetectionInstability(s()), EXIT_DETECTION),
            (Error::Verification(s()), EXIT_VERIFICATION),
        ];
        for (e, code) in cases {
            assert_eq!(Fail::from(e).0, code);
        }
    }
}
