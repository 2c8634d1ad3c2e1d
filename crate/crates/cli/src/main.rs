use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use aniso_core::anisotropy::wulff_measure;
use aniso_core::fem::{
    estimate_discretization_error, solve_eigen, solve_torsion, triangulate, ErrorEstimate, TriMesh,
};
use aniso_core::fmt::sig12;
use aniso_core::geometry::{
    aleksandrov_fenchel_check, fit_steiner_quadratic, isoperimetric_deficit,
    AleksandrovFenchelReport, IsoperimetricDeficit, SteinerFit,
};
use aniso_core::ptrig::{pi_p_closed_form, PTrigContext};
use aniso_core::radial::{
    stability_constant, wulff_first_eigenvalue, RadialEigenResult, StabilityConstant,
};
use aniso_core::report::{
    run_suite, sharpness_study_with, to_json_rounded, ExperimentSuite, FaultInjection,
    OutputFormat, RunConfig, SharpnessKind,
};
use aniso_core::{BoundsOptions, BoundsReport, Error, Norm, NormSpec, ShapeSpec, SolverOptions};

const THREADS_ENV: &str = "ANISO_THREADS";

/// Anisotropic p-Laplacian toolkit: eigenvalues, torsion and geometric bounds
/// on convex planar domains.
#[derive(Parser)]
#[command(name = "aniso", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Problem {
    Eigen,
    Torsion,
}

#[derive(Subcommand)]
enum Command {
    /// π_p and a table of sin_p, cos_p over one period.
    Ptrig {
        #[arg(long)]
        p: f64,
        /// Number of samples on [0, 2π_p]; prints CSV `t,sin_p,cos_p`.
        #[arg(long)]
        table: Option<usize>,
    },
    /// Perimeter, inradius, deficits and the Steiner fit of a polygon.
    Geom {
        /// Shape JSON, or `@file`.
        #[arg(long)]
        shape: String,
        /// Norm JSON, or `@file`.
        #[arg(long, default_value = r#"{"kind":"euclidean"}"#)]
        norm: String,
        /// Write the inner parallel profile `t,A,P` here.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, default_value_t = 256)]
        grid: usize,
    },
    /// First eigenvalue of a Wulff shape by shooting.
    Radial {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long = "R", default_value_t = 1.0)]
        radius: f64,
        /// Norm for κ_n and C_Ω.
        #[arg(long, default_value = r#"{"kind":"euclidean"}"#)]
        norm: String,
        /// Write the profile `r,phi` here.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// FEM eigenvalue or torsion on meshes of size h and h/2.
    Solve {
        #[arg(value_enum)]
        problem: Problem,
        #[arg(long)]
        shape: String,
        #[arg(long, default_value = r#"{"kind":"euclidean"}"#)]
        norm: String,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0.1)]
        h: f64,
        /// Fixed regularization instead of the automatic ladder.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Write the fine-level solution `x,y,u` here.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Every closed-form, web and FEM bound for one case.
    Bounds {
        #[arg(long)]
        shape: String,
        #[arg(long, default_value = r#"{"kind":"euclidean"}"#)]
        norm: String,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        h: Option<f64>,
        /// Skip the FEM solves.
        #[arg(long)]
        no_solve: bool,
        #[arg(long)]
        no_torsion: bool,
    },
    /// Run an experiment suite from a JSON or TOML file.
    Suite {
        /// Suite file (`.json` or `.toml`).
        #[arg(required_unless_present = "builtin", conflicts_with = "builtin")]
        config: Option<PathBuf>,
        #[arg(long)]
        builtin: Option<String>,
        /// Overrides the suite's report path.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Fault injection for harness self-tests, `CASE:BOUND`.
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
    /// Rectangle sharpness studies under the ℓ^p gauge.
    Sharpness {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        p: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        b: Vec<f64>,
        #[arg(long, default_value_t = 0.125)]
        h: f64,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

type CliResult = std::result::Result<u8, Box<dyn std::error::Error>>;

fn read_arg(arg: &str) -> std::io::Result<String> {
    match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path),
        None => Ok(arg.to_string()),
    }
}

fn parse_shape(arg: &str) -> std::result::Result<ShapeSpec, Box<dyn std::error::Error>> {
    let text = read_arg(arg)?;
    serde_json::from_str(&text).map_err(|e| format!("shape: {e}").into())
}

fn parse_norm(arg: &str) -> std::result::Result<Norm, Box<dyn std::error::Error>> {
    let text = read_arg(arg)?;
    let spec: NormSpec = serde_json::from_str(&text).map_err(|e| format!("norm: {e}"))?;
    Ok(Norm::new(spec)?)
}

fn write_file(path: &Path, text: &str) -> std::io::Result<()> {
    std::fs::write(path, text)
}

fn threads_from_env() -> std::result::Result<Option<usize>, String> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            )),
        },
        _ => Ok(None),
    }
}

fn ptrig(p: f64, table: Option<usize>) -> CliResult {
    let ctx = PTrigContext::new(p)?;
    match table {
        Some(n) if n >= 2 => {
            let period = 2.0 * ctx.pi_p();
            let mut s = String::from("t,sin_p,cos_p\n");
            for k in 0..n {
                let t = period * k as f64 / (n - 1) as f64;
                s.push_str(&format!(
                    "{},{},{}\n",
                    sig12(t),
                    sig12(ctx.sin_p(t)),
                    sig12(ctx.cos_p(t))
                ));
            }
            print!("{s}");
        }
        Some(n) => return Err(format!("--table needs at least 2 samples, got {n}").into()),
        None => {
            #[derive(Serialize)]
            struct Out {
                p: f64,
                pi_p: f64,
                pi_p_closed_form: f64,
                amplitude: f64,
            }
            print!(
                "{}",
                to_json_rounded(&Out {
                    p,
                    pi_p: ctx.pi_p(),
                    pi_p_closed_form: pi_p_closed_form(p),
                    amplitude: ctx.amplitude(),
                })
            );
        }
    }
    Ok(0)
}

fn geom(shape: &str, norm: &str, profile: Option<&Path>, grid: usize) -> CliResult {
    #[derive(Serialize)]
    struct Out {
        shape_id: String,
        norm_id: String,
        area: f64,
        euclidean_perimeter: f64,
        perimeter_h: f64,
        kappa2: f64,
        inradius: f64,
        diameter: f64,
        isoperimetric: IsoperimetricDeficit,
        aleksandrov_fenchel: AleksandrovFenchelReport,
        steiner: SteinerFit,
    }
    let spec = parse_shape(shape)?;
    let norm = parse_norm(norm)?;
    let poly = spec.build()?;
    let deltas: Vec<f64> = (0..=8).map(|k| 0.05 * k as f64).collect();
    let out = Out {
        shape_id: spec.id(),
        norm_id: norm.id(),
        area: poly.area(),
        euclidean_perimeter: poly.euclidean_perimeter(),
        perimeter_h: poly.aniso_perimeter(&norm),
        kappa2: wulff_measure(&norm)?,
        inradius: poly.inradius(&norm),
        diameter: poly.diameter(),
        isoperimetric: isoperimetric_deficit(&poly, &norm)?,
        aleksandrov_fenchel: aleksandrov_fenchel_check(&poly, &norm)?,
        steiner: fit_steiner_quadratic(&poly, &norm, &deltas, 512)?,
    };
    if let Some(path) = profile {
        write_file(path, &poly.inner_parallel_profile(&norm, grid)?.to_csv())?;
    }
    print!("{}", to_json_rounded(&out));
    Ok(0)
}

fn radial(p: f64, n: usize, radius: f64, norm: &str, profile: Option<&Path>) -> CliResult {
    #[derive(Serialize)]
    struct Out {
        p: f64,
        n: usize,
        radius: f64,
        lambda: f64,
        kappa: f64,
        phi_norm_p: f64,
        boundary_residual: f64,
        iterations: usize,
        stability: Option<StabilityConstant>,
    }
    let norm = parse_norm(norm)?;
    let norm = if n == 2 {
        norm
    } else {
        norm.with_dimension(n)?
    };
    let res: RadialEigenResult = wulff_first_eigenvalue(p, n, radius)?;
    let kappa = wulff_measure(&norm)?;
    let stability = if n == 2 {
        Some(stability_constant(&norm, p, 2.0 * kappa * radius)?)
    } else {
        None
    };
    if let Some(path) = profile {
        write_file(path, &res.profile_csv())?;
    }
    print!(
        "{}",
        to_json_rounded(&Out {
            p,
            n,
            radius,
            lambda: res.lambda,
            kappa,
            phi_norm_p: res.phi_norm_p(kappa),
            boundary_residual: res.boundary_residual,
            iterations: res.iterations,
            stability,
        })
    );
    Ok(0)
}

fn dump_solution(path: &Path, mesh: &TriMesh, u: &[f64]) -> std::io::Result<()> {
    let mut s = String::from("x,y,u\n");
    for (x, v) in mesh.nodes.iter().zip(u) {
        s.push_str(&format!("{},{},{}\n", sig12(x.x), sig12(x.y), sig12(*v)));
    }
    write_file(path, &s)
}

/// Drops nodal vectors so the JSON stays readable.
fn strip_vectors(mut v: serde_json::Value) -> serde_json::Value {
    if let Some(o) = v.as_object_mut() {
        o.remove("u");
    }
    v
}

#[allow(clippy::too_many_arguments)]
fn solve(
    problem: Problem,
    shape: &str,
    norm: &str,
    p: f64,
    h: f64,
    eps: Option<f64>,
    tol: f64,
    dump: Option<&Path>,
) -> CliResult {
    #[derive(Serialize)]
    struct Out {
        problem: &'static str,
        shape_id: String,
        norm_id: String,
        p: f64,
        h: f64,
        estimate: ErrorEstimate,
        coarse: serde_json::Value,
        fine: serde_json::Value,
    }
    let spec = parse_shape(shape)?;
    let norm = parse_norm(norm)?;
    let poly = spec.build()?;
    let opts = SolverOptions {
        tol,
        eps,
        ..SolverOptions::default()
    };
    let coarse_mesh = triangulate(&poly, h)?;
    let fine_mesh = coarse_mesh.refine_uniform();
    let (name, estimate, coarse, fine, u) = match problem {
        Problem::Eigen => {
            let c = solve_eigen(&coarse_mesh, &norm, p, &opts)?;
            let f = solve_eigen(&fine_mesh, &norm, p, &opts)?;
            let est = estimate_discretization_error(c.lambda, f.lambda);
            let u = f.u.clone();
            (
                "eigen",
                est,
                serde_json::to_value(&c)?,
                serde_json::to_value(&f)?,
                u,
            )
        }
        Problem::Torsion => {
            let c = solve_torsion(&coarse_mesh, &norm, p, &opts)?;
            let f = solve_torsion(&fine_mesh, &norm, p, &opts)?;
            let est = estimate_discretization_error(c.tau, f.tau);
            let u = f.u.clone();
            (
                "torsion",
                est,
                serde_json::to_value(&c)?,
                serde_json::to_value(&f)?,
                u,
            )
        }
    };
    if let Some(path) = dump {
        dump_solution(path, &fine_mesh, &u)?;
    }
    print!(
        "{}",
        to_json_rounded(&Out {
            problem: name,
            shape_id: spec.id(),
            norm_id: norm.id(),
            p,
            h,
            estimate,
            coarse: strip_vectors(coarse),
            fine: strip_vectors(fine),
        })
    );
    Ok(0)
}

fn bounds(
    shape: &str,
    norm: &str,
    p: f64,
    h: Option<f64>,
    no_solve: bool,
    no_torsion: bool,
) -> CliResult {
    let spec = parse_shape(shape)?;
    let norm = parse_norm(norm)?;
    let poly = spec.build()?;
    let opts = BoundsOptions {
        solve: !no_solve,
        torsion: !no_torsion,
        h,
        ..BoundsOptions::default()
    };
    let report = BoundsReport::compute(&spec.id(), &poly, &norm, p, &opts)?;
    print!("{}", to_json_rounded(&report));
    let violations = report.violations();
    if violations.is_empty() {
        Ok(0)
    } else {
        eprintln!("violated: {}", violations.join(", "));
        Ok(1)
    }
}

fn suite(
    config: Option<&Path>,
    builtin: Option<&str>,
    output: Option<&Path>,
    format: Option<Format>,
    fault: Option<&str>,
    threads: Option<usize>,
) -> CliResult {
    let mut suite = match (config, builtin) {
        (_, Some(name)) => ExperimentSuite::builtin(name)
            .ok_or_else(|| format!("unknown builtin suite {name:?}"))?,
        (Some(path), None) => ExperimentSuite::load(path)?,
        (None, None) => return Err("a suite file or --builtin is required".into()),
    };
    if let Some(path) = output {
        suite.output.path = Some(path.to_string_lossy().into_owned());
    }
    if let Some(f) = format {
        suite.output.format = f.into();
    }
    let run = RunConfig {
        threads,
        fault: fault.map(str::parse::<FaultInjection>).transpose()?,
    };
    let outcome = run_suite(&suite, &run)?;
    print!("{}", outcome.summary_table());
    if let Some(path) = &suite.output.path {
        outcome.write(Path::new(path), suite.output.format)?;
    }
    Ok(outcome.exit_code() as u8)
}

fn sharpness(kind: &str, p: f64, b: &[f64], h: f64, format: Format) -> CliResult {
    let kind: SharpnessKind = kind.parse()?;
    let report = sharpness_study_with(kind, p, b, h, &SolverOptions::default())?;
    match format {
        Format::Csv => print!("{}", report.to_csv()),
        Format::Json => print!("{}", to_json_rounded(&report)),
    }
    Ok(report.exit_code() as u8)
}

fn run(cli: Cli) -> CliResult {
    let threads = threads_from_env()?;
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match cli.command {
        Command::Ptrig { p, table } => ptrig(p, table),
        Command::Geom {
            shape,
            norm,
            profile,
            grid,
        } => geom(&shape, &norm, profile.as_deref(), grid),
        Command::Radial {
            p,
            n,
            radius,
            norm,
            profile,
        } => radial(p, n, radius, &norm, profile.as_deref()),
        Command::Solve {
            problem,
            shape,
            norm,
            p,
            h,
            eps,
            tol,
            dump,
        } => solve(problem, &shape, &norm, p, h, eps, tol, dump.as_deref()),
        Command::Bounds {
            shape,
            norm,
            p,
            h,
            no_solve,
            no_torsion,
        } => bounds(&shape, &norm, p, h, no_solve, no_torsion),
        Command::Suite {
            config,
            builtin,
            output,
            format,
            inject_fault,
        } => suite(
            config.as_deref(),
            builtin.as_deref(),
            output.as_deref(),
            format,
            inject_fault.as_deref(),
            threads,
        ),
        Command::Sharpness {
            kind,
            p,
            b,
            h,
            format,
        } => sharpness(&kind, p, &b, h, format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let msg = match e.downcast_ref::<Error>() {
                Some(core) => core.to_string(),
                None => e.to_string(),
            };
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
