use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use srpath_cli::config::{load_model, CheckSpec, Format, ScenarioConfig};
use srpath_cli::report::{summary_line, write_reports};
use srpath_cli::run::{all_passed, run_scenario};
use srpath_cli::suite::{run_criterion, SuiteOptions};
use srpath_core::development::{antidevelop, develop, ControlPath};
use srpath_core::diffusion::{ito_stratonovich_discrepancy, Needs, SimConfig, Simulator};
use srpath_core::error::{Error, Result};
use srpath_core::geometry::{
    is_metric_preserving, ricci_bounds, structural_residuals, validate_algebra, ConnectionData, LieAlgebraModel,
};
use srpath_core::linalg::{Mat, Vect};
use srpath_core::stats::{mean_stderr, Executor};
use srpath_core::verify::CheckReport;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "srpath", version, about = "Path-space calculus checks on sub-Riemannian Lie groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the model, its connection and curvature bounds as JSON.
    Describe(Common),
    /// Print torsion, Ricci curvature and the metric-preservation test.
    Geometry(Common),
    /// Develop a smooth control; with --variation, run the variation identity study.
    Smooth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        variation: bool,
    },
    /// Simulate the horizontal diffusion and summarize the end points.
    Simulate(Common),
    /// Run the selected checks.
    Verify(Common),
    /// Run the full acceptance battery.
    Suite(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Both,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Registry name or model file.
    #[arg(long)]
    model: Option<String>,
    /// Scenario file (TOML); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, alias = "T")]
    horizon: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Check name; repeatable.
    #[arg(long = "check")]
    checks: Vec<String>,
    /// Curvature bound for the inequality checks.
    #[arg(long = "K", allow_hyphen_values = true)]
    curvature_bound: Option<f64>,
    /// Point function of single-time checks.
    #[arg(long = "f")]
    f: Option<String>,
    /// Cylindrical function of path-space checks.
    #[arg(long = "F")]
    functional: Option<String>,
    /// Evaluation time of `derivative`, `inequality_v` and `semigroup`.
    #[arg(long = "t")]
    t: Option<f64>,
}

impl Common {
    /// Config file (or defaults) with the flags applied on top.
    fn scenario(&self) -> Result<ScenarioConfig> {
        let mut s = match &self.config {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::default(),
        };
        if let Some(m) = &self.model {
            s.model = m.clone();
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.paths {
            s.paths = v;
        }
        if let Some(v) = self.steps {
            s.steps = v;
        }
        if let Some(v) = self.horizon {
            s.horizon = v;
        }
        if let Some(v) = self.workers {
            s.workers = v;
        }
        if let Some(v) = &self.out {
            s.out = Some(v.clone());
        }
        if let Some(v) = self.format {
            s.format = match v {
                FormatArg::Json => Format::Json,
                FormatArg::Csv => Format::Csv,
                FormatArg::Both => Format::Both,
            };
        }
        if let Some(k) = self.curvature_bound {
            s.curvature_bound = Some(k);
        }
        if !self.checks.is_empty() {
            s.checks = self.checks.iter().map(|n| CheckSpec::named(n)).collect();
        }
        for c in &mut s.checks {
            if self.f.is_some() {
                c.f = self.f.clone();
            }
            if self.functional.is_some() {
                c.functional = self.functional.clone();
            }
            if self.t.is_some() {
                c.t = self.t;
            }
        }
        Ok(s)
    }
}

fn mat_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| (0..m.cols()).map(|c| m[(r, c)] + 0.0).collect()).collect()
}

fn model_and_connection(s: &ScenarioConfig) -> Result<(LieAlgebraModel, ConnectionData)> {
    let model = load_model(&s.model)?;
    let conn = s.connection(&model);
    Ok((model, conn))
}

fn describe(c: &Common) -> Result<bool> {
    let s = c.scenario()?;
    let (model, conn) = model_and_connection(&s)?;
    let n = model.dim();
    let mut brackets = Vec::new();
    let mut torsion = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in 0..n {
                if model.c(i, j, k) != 0.0 {
                    brackets.push(json!([i, j, k, model.c(i, j, k)]));
                }
                if conn.torsion(i, j, k) != 0.0 {
                    torsion.push(json!([i, j, k, conn.torsion(i, j, k)]));
                }
            }
        }
    }
    let out = json!({
        "model": {
            "name": model.name(),
            "dim": n,
            "rank": model.rank(),
            "frames": model.frame_names(),
            "brackets": brackets,
            "diagnostics": validate_algebra(&model),
        },
        "metric_preservation": is_metric_preserving(&model),
        "connection": {
            "torsion": torsion,
            "ricci": mat_rows(conn.ricci()),
            "ricci_h": mat_rows(&conn.ricci_h()),
            "structural_residuals": structural_residuals(&conn),
        },
        "spectral_bound": ricci_bounds(&conn),
    });
    println!("{}", serde_json::to_string_pretty(&out).map_err(|e| Error::Config(e.to_string()))?);
    Ok(true)
}

fn geometry(c: &Common) -> Result<bool> {
    let s = c.scenario()?;
    let (model, conn) = model_and_connection(&s)?;
    let (n, d) = (model.dim(), model.rank());
    let names = model.frame_names();
    println!("model {} (n = {n}, d = {d}), frames {}", model.name(), names.join(" "));
    let diag = validate_algebra(&model);
    println!("bracket generating = {}, step = {:?}, flag dims = {:?}", diag.bracket_generating, diag.step, diag.flag_dims);
    println!("torsion T(E_i, E_j):");
    for i in 0..n {
        for j in i + 1..n {
            let t = Vect::from_fn(n, |k| conn.torsion(i, j, k));
            if t.max_abs() > 0.0 {
                let terms: Vec<String> =
                    (0..n).filter(|&k| t[k] != 0.0).map(|k| format!("{:+} {}", t[k], names[k])).collect();
                println!("  T({}, {}) = {}", names[i], names[j], terms.join(" "));
            }
        }
    }
    println!("Ric_H:");
    let ric = conn.ricci_h();
    for r in 0..ric.rows() {
        let row: Vec<String> = (0..ric.cols()).map(|c| format!("{:>10.6}", ric[(r, c)] + 0.0)).collect();
        println!("  {}", row.join(" "));
    }
    let mp = is_metric_preserving(&model);
    println!("metric-preserving = {} (residual {:.3e})", mp.preserving, mp.residual);
    println!("structural residual = {:.3e}", structural_residuals(&conn).max());
    let b = ricci_bounds(&conn);
    println!("bounds ({}, {}), K_sym = {}, asymmetry {:.3e}", b.k_lo, b.k_hi, b.k_sym, b.asymmetry);
    Ok(true)
}

fn smooth(c: &Common, variation: bool) -> Result<bool> {
    let s = c.scenario()?;
    let (model, conn) = model_and_connection(&s)?;
    if variation {
        let study = srpath_cli::suite::variation_controls(&model)?;
        for l in &study.levels {
            println!("steps {:>4}  s {:.3e}  error {:.6e}  |h − k| {:.3e}", l.steps, l.s, l.error, l.h_minus_k);
        }
        println!("slope {:.4}", study.slope);
        return Ok(true);
    }
    let d = model.rank();
    let u = ControlPath::from_fn(s.horizon, s.steps, |t| {
        Vect::from_fn(d, |i| (1.0 + i as f64) * t + (2.0 * t + i as f64).sin() - (i as f64).sin())
    })?;
    let dev = develop(&model, &conn, &u)?;
    let back = antidevelop(&model, &conn, &dev.g, u.dt())?;
    let roundtrip = back
        .increments()
        .iter()
        .zip(u.increments())
        .map(|(a, b)| (*a - *b).max_abs())
        .fold(0.0, f64::max);
    let end = model.require_realization()?.chart_coords(dev.g.last().expect("nonempty path"));
    println!("end point chart coordinates {:?}", (0..end.len()).map(|i| end[i]).collect::<Vec<_>>());
    println!("antidevelopment roundtrip error {roundtrip:.3e}");
    Ok(true)
}

fn simulate(c: &Common) -> Result<bool> {
    let s = c.scenario()?;
    let (model, conn) = model_and_connection(&s)?;
    let config = s.sim_config();
    config.validate()?;
    let exec = Executor::new(s.workers);
    let sim = Simulator::new(&model, &conn)?;
    let real = model.require_realization()?;
    let ends: Vec<Vect> = exec.map(config.paths, |i| real.chart_coords(sim.simulate(&config, i as u64, Needs::PATH).end()));
    println!("{} paths, T = {}, N = {}, seed {}", config.paths, config.horizon, config.steps, config.seed);
    for (a, name) in model.frame_names().iter().enumerate() {
        let xs: Vec<f64> = ends.iter().map(|e| e[a]).collect();
        let (m, se) = mean_stderr(&xs);
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (m2, se2) = mean_stderr(&sq);
        println!("  {name:>4}: mean {m:+.6e} ± {se:.2e}   second moment {m2:.6e} ± {se2:.2e}");
    }
    let small = SimConfig { paths: config.paths.min(100), ..config.clone() };
    println!("Ito/Stratonovich discrepancy (first {} paths) {:.3e}", small.paths, ito_stratonovich_discrepancy(&model, &conn, &small)?);
    if let Some(dir) = &s.out {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("endpoints.csv")).map_err(|e| Error::Config(e.to_string()))?;
        w.write_record(model.frame_names()).map_err(|e| Error::Config(e.to_string()))?;
        for e in &ends {
            w.write_record((0..e.len()).map(|i| format!("{:e}", e[i]))).map_err(|e| Error::Config(e.to_string()))?;
        }
        w.flush()?;
    }
    Ok(true)
}

fn emit(reports: &[CheckReport], s: &ScenarioConfig, stem: &str) -> Result<()> {
    for r in reports {
        println!("{}", summary_line(r));
    }
    if let Some(dir) = &s.out {
        for p in write_reports(dir, stem, reports, s.format)? {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn verify(c: &Common) -> Result<bool> {
    let s = c.scenario()?;
    if s.checks.is_empty() {
        return Err(Error::Config("no checks selected; pass --check or a config with checks".into()));
    }
    let exec = Executor::new(s.workers);
    let reports = run_scenario(&s, &exec)?;
    emit(&reports, &s, "reports")?;
    Ok(all_passed(&reports))
}

fn suite(c: &Common) -> Result<bool> {
    let s = c.scenario()?;
    let opts = SuiteOptions { seed: c.seed.unwrap_or(srpath_cli::suite::SUITE_SEED), paths: c.paths };
    let exec = Executor::new(s.workers);
    let mut all = Vec::new();
    for criterion in 1..=12 {
        let reports = run_criterion(criterion, &opts, &exec)?;
        let ok = all_passed(&reports);
        println!("criterion {criterion:>2}: {}", if ok { "pass" } else { "FAIL" });
        for r in &reports {
            println!("    {}", summary_line(r));
        }
        all.extend(reports);
    }
    if let Some(dir) = &s.out {
        for p in write_reports(dir, "suite", &all, s.format)? {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(all_passed(&all))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Describe(c) => describe(c),
        Command::Geometry(c) => geometry(c),
        Command::Smooth { common, variation } => smooth(common, *variation),
        Command::Simulate(c) => simulate(c),
        Command::Verify(c) => verify(c),
        Command::Suite(c) => suite(c),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
