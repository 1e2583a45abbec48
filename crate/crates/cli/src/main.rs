use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use conformal_sphere::experiment::config::ExperimentConfig;
use conformal_sphere::experiment::generate::{curvature_deviation, normalize_area};
use conformal_sphere::experiment::{
    emit_table, generate_random_metric, run_suite, verify_identities, Report, Shape, TableKind, VerifyOptions,
};
use conformal_sphere::lightcone::lemma32::Exponents;
use conformal_sphere::metric::spec::MetricSpec;
use conformal_sphere::metric::{Basepoint, ConformalMetric, SphereMetric};
use conformal_sphere::sht::Sphere;
use conformal_sphere::stability::{galerkin_spectrum, stability_experiment, Ceilings, StabilityOptions};
use conformal_sphere::uniformize::{uniformize, NewtonOptions};

#[derive(Parser)]
#[command(
    name = "conformal-sphere",
    version,
    about = "Spectral uniformization and stability experiments on the 2-sphere"
)]
struct Cli {
    /// Spherical-harmonic bandlimit L (defaults to the input's own bandlimit).
    #[arg(long, global = true)]
    bandlimit: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Multiplies every tolerance.
    #[arg(long, global = true)]
    tolerance_scale: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the conformal factor of a metric and normalize it at a basepoint.
    Uniformize {
        #[arg(long)]
        metric: PathBuf,
        /// Colatitude and longitude, "theta,phi".
        #[arg(long, value_parser = parse_basepoint)]
        basepoint: Option<Basepoint>,
    },
    /// Check the identities satisfied by the normalized conformal factor.
    VerifyIdentities {
        #[arg(long)]
        metric: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Number of geodesic directions to integrate.
        #[arg(long)]
        geodesics: Option<usize>,
        /// Estimate exponents and constant, "p,q,r,k".
        #[arg(long, value_parser = parse_lemma32)]
        lemma32: Option<(Exponents, f64)>,
    },
    /// Compare two nearby metrics: conformal factors, eigenspaces and embeddings.
    Stability {
        #[arg(long)]
        g1: PathBuf,
        #[arg(long)]
        g2: PathBuf,
        #[arg(long, value_parser = parse_basepoint)]
        basepoint: Option<Basepoint>,
        #[arg(long, default_value_t = 4.0)]
        p: f64,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Ratio ceilings "log_factor,round_metric,rigid".
        #[arg(long, value_parser = parse_ceilings)]
        ceilings: Option<Ceilings>,
        /// Random orthogonal candidates compared against the fitted motion.
        #[arg(long, default_value_t = 0)]
        procrustes_trials: usize,
    },
    /// Leading Laplace-Beltrami eigenvalues of a metric.
    Spectrum {
        #[arg(long)]
        metric: PathBuf,
        #[arg(long, default_value_t = 9)]
        count: usize,
    },
    /// Generate a seeded random metric with a prescribed curvature deviation.
    Gen {
        #[arg(long)]
        epsilon: f64,
        #[arg(long, value_enum, default_value_t = ShapeArg::Conformal)]
        shape: ShapeArg,
        #[arg(long, default_value_t = 6)]
        l_max_perturbation: usize,
        /// Shift log Omega by a constant so that the area is 4π (conformal only).
        #[arg(long)]
        normalize_area: bool,
    },
    /// Run the full seeded experiment and write its report.
    Suite {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        ensemble_size: Option<usize>,
        /// Use round members only.
        #[arg(long)]
        round_only: bool,
    },
    /// Turn a suite report into a CSV table.
    Table {
        #[arg(long)]
        report: PathBuf,
        /// constants or convergence
        #[arg(long)]
        kind: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Conformal,
    Perturbed,
}

fn floats(s: &str, n: usize) -> std::result::Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got {}", v.len()));
    }
    Ok(v)
}

fn parse_basepoint(s: &str) -> std::result::Result<Basepoint, String> {
    let v = floats(s, 2)?;
    Ok(Basepoint::new(v[0], v[1]))
}

fn parse_lemma32(s: &str) -> std::result::Result<(Exponents, f64), String> {
    let v = floats(s, 4)?;
    Ok((Exponents::new(v[0], v[1], v[2]), v[3]))
}

fn parse_ceilings(s: &str) -> std::result::Result<Ceilings, String> {
    let v = floats(s, 3)?;
    Ok(Ceilings {
        log_factor: v[0],
        round_metric: v[1],
        rigid: v[2],
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_spec(path: &Path) -> Result<MetricSpec> {
    MetricSpec::from_json(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn sphere_for(bandlimit: Option<usize>, spec_bandlimit: usize) -> Result<Sphere> {
    Ok(Sphere::with_bandlimit(bandlimit.unwrap_or(spec_bandlimit))?)
}

/// Realize a conformal spec on `sphere`, truncating or padding its expansion.
fn conformal(sphere: &Sphere, spec: &MetricSpec, basepoint: Option<Basepoint>) -> Result<ConformalMetric> {
    let m = match spec.to_metric(sphere)? {
        SphereMetric::Conformal(m) => m,
        SphereMetric::Perturbed(_) => bail!("this command needs a conformal metric (type \"conformal\")"),
    };
    if m.log_omega.lmax() > sphere.bandlimit() {
        eprintln!(
            "warning: truncating log Omega from degree {} to {}",
            m.log_omega.lmax(),
            sphere.bandlimit()
        );
    }
    Ok(ConformalMetric::new(
        m.log_omega.resized(sphere.bandlimit()),
        basepoint.unwrap_or(m.basepoint),
    ))
}

fn status(report: &Report) -> ExitCode {
    for r in report.failures() {
        eprintln!("FAIL {} value={:?} tolerance={:e}", r.name, r.value, r.tolerance);
    }
    if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let scale = cli.tolerance_scale.unwrap_or(1.0);
    if !(scale > 0.0) {
        bail!("--tolerance-scale must be positive");
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Uniformize { metric, basepoint } => {
            let spec = load_spec(&metric)?;
            let sphere = sphere_for(cli.bandlimit, spec.bandlimit)?;
            let m = conformal(&sphere, &spec, basepoint)?;
            let r = uniformize(&sphere, &m, &NewtonOptions::default())?;
            emit(out, &serde_json::to_string_pretty(&r)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyIdentities {
            metric,
            report,
            geodesics,
            lemma32,
        } => {
            let spec = load_spec(&metric)?;
            let sphere = sphere_for(cli.bandlimit, spec.bandlimit)?;
            let m = conformal(&sphere, &spec, None)?;
            let opts = VerifyOptions {
                geodesics,
                lemma32,
                tolerance_scale: scale,
                seed: cli.seed.unwrap_or(0),
            };
            let r = verify_identities(&sphere, &m, &opts)?;
            emit(report.as_deref().or(out), &r.to_json()?)?;
            Ok(status(&r))
        }
        Command::Stability {
            g1,
            g2,
            basepoint,
            p,
            report,
            ceilings,
            procrustes_trials,
        } => {
            let s1 = load_spec(&g1)?;
            let s2 = load_spec(&g2)?;
            let sphere = sphere_for(cli.bandlimit, s1.bandlimit.max(s2.bandlimit))?;
            let m1 = conformal(&sphere, &s1, None)?;
            let m2 = conformal(&sphere, &s2, None)?;
            let q = basepoint.unwrap_or(m1.basepoint);
            let opts = StabilityOptions {
                p,
                ceilings,
                spot_check_trials: procrustes_trials,
                spot_check_seed: cli.seed.unwrap_or(0),
                ..StabilityOptions::default()
            };
            let r = stability_experiment(&sphere, &m1, &m2, q, &opts)?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            emit(report.as_deref().or(out), &serde_json::to_string_pretty(&r)?)?;
            let optimal = r.rigid.spot_check.is_none_or(|s| s.optimal);
            Ok(if r.pass != Some(false) && optimal {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Spectrum { metric, count } => {
            let spec = load_spec(&metric)?;
            let sphere = sphere_for(cli.bandlimit, spec.bandlimit)?;
            let g = match spec.to_metric(&sphere)? {
                SphereMetric::Conformal(_) => SphereMetric::Conformal(conformal(&sphere, &spec, None)?),
                p => p,
            };
            let e = galerkin_spectrum(&sphere, &g, count)?;
            let json = serde_json::json!({
                "eigenvalues": e.eigenvalues,
                "galerkin_residual": e.galerkin_residual,
            });
            emit(out, &serde_json::to_string_pretty(&json)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Gen {
            epsilon,
            shape,
            l_max_perturbation,
            normalize_area: normalize,
        } => {
            let sphere = Sphere::with_bandlimit(cli.bandlimit.unwrap_or(24))?;
            let shape = match shape {
                ShapeArg::Conformal => Shape::Conformal,
                ShapeArg::Perturbed => Shape::Perturbed,
            };
            let mut spec = generate_random_metric(&sphere, cli.seed.unwrap_or(0), epsilon, shape, l_max_perturbation)?;
            if normalize {
                let m = match spec.to_metric(&sphere)? {
                    SphereMetric::Conformal(m) => m,
                    SphereMetric::Perturbed(_) => bail!("--normalize-area needs --shape conformal"),
                };
                let u = normalize_area(&sphere, &m.log_omega)?;
                spec = MetricSpec::conformal(spec.bandlimit, &u, m.basepoint);
            }
            eprintln!("sup |K - 1| = {:.6e}", curvature_deviation(&sphere, &spec)?);
            emit(out, &spec.to_json()?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Suite {
            config,
            ensemble_size,
            round_only,
        } => {
            let mut cfg = match &config {
                Some(p) => ExperimentConfig::from_json(&read(p)?)?,
                None => ExperimentConfig::default(),
            };
            if let Some(l) = cli.bandlimit {
                cfg.bandlimit = l;
            }
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(n) = ensemble_size {
                cfg.ensemble_size = n;
            }
            cfg.round_only |= round_only;
            cfg.tolerance_scale *= scale;
            let target = out.map(Path::to_path_buf).or(cfg.output.clone());
            let r = run_suite(&cfg)?;
            emit(target.as_deref(), &r.to_json()?)?;
            Ok(status(&r))
        }
        Command::Table { report, kind } => {
            let kind: TableKind = kind.parse()?;
            let r = Report::from_json(&read(&report)?)?;
            let csv = emit_table(&r, kind)?;
            match out {
                Some(p) => fs::write(p, csv)?,
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
