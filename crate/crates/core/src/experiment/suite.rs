//! The seeded end-to-end experiment.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use super::generate::{generate_random_metric, normalize_area, random_shape, Shape};
use super::report::{Record, Report, PLUMBING};
use crate::error::Result;
use crate::lightcone::geodesic::{geodesic_report, GeodesicOptions};
use crate::lightcone::lemma32::{k_sweep, lemma32_estimate_check, mean_curvature_round, Exponents};
use crate::lightcone::{divergence_identity_residual, structure_equation_report};
use crate::metric::{metric_distance, rotation_matrix, Basepoint, ConformalMetric, SphereMetric};
use crate::ratio::{relative_spread, Ratio};
use crate::sht::{basis_norms, lambda, BasisKind, Coeffs, Sphere};
use crate::stability::{
    galerkin_spectrum, isometric_pair_check, stability_experiment, StabilityOptions, StabilityReport,
};
use crate::uniformize::{bound_ratio, normalize_at, uniformize, NewtonOptions, UniformizationResult};

pub const ANCHOR_DIVERGENCE: &str = "divergence-identity";
pub const ANCHOR_LIGHTCONE: &str = "lightcone-second-forms";
pub const ANCHOR_STRUCTURE: &str = "null-structure-equations";
pub const ANCHOR_SPECTRUM: &str = "round-spectrum";
pub const ANCHOR_UNIFORMIZE: &str = "uniformization-bound";
pub const ANCHOR_MANUFACTURED: &str = "manufactured-solution";
pub const ANCHOR_GEODESIC: &str = "geodesic-transport";
pub const ANCHOR_XI_ESTIMATE: &str = "xi-estimate";
pub const ANCHOR_PROJECTION: &str = "eigenspace-projection";
pub const ANCHOR_RIGID: &str = "rigid-motion";
pub const ANCHOR_BASIS: &str = "basis-scaling";

/// Every anchor the suite may emit.
pub const ANCHORS: [&str; 12] = [
    ANCHOR_DIVERGENCE,
    ANCHOR_LIGHTCONE,
    ANCHOR_STRUCTURE,
    ANCHOR_SPECTRUM,
    ANCHOR_UNIFORMIZE,
    ANCHOR_MANUFACTURED,
    ANCHOR_GEODESIC,
    ANCHOR_XI_ESTIMATE,
    ANCHOR_PROJECTION,
    ANCHOR_RIGID,
    ANCHOR_BASIS,
    PLUMBING,
];

/// Ceiling for records that only require a finite empirical constant.
pub const FINITE_CEILING: f64 = 1e6;

/// Amplitude of the analytic member in the convergence sweep. Large enough
/// that the residual stays above round-off up to moderate bandlimits.
pub const CONVERGENCE_AMPLITUDE: f64 = 0.5;

pub const ANALYTIC_AMPLITUDE: f64 = 0.05;

/// Members used for the geodesic and isometric-pair checks.
const GEODESIC_MEMBERS: usize = 4;
const ISOMETRIC_MEMBERS: usize = 2;

// independent random streams derived from the configured seed
const STREAM_METRIC: u64 = 1;
const STREAM_DIRECTION: u64 = 2;
const STREAM_ROTATION: u64 = 3;
const STREAM_PROCRUSTES: u64 = 4;

pub fn member_seed(seed: u64, stream: u64, member: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add(member as u64)
}

fn y20(lmax: usize, a: f64) -> Coeffs {
    let mut c = Coeffs::zeros(lmax);
    c.set(2, 0, a);
    c
}

fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0_f64, f64::max)
}

/// Relative spread of a set of ratios. All-exact sets have spread 0; a mix of
/// exact and inexact values is reported as non-finite.
pub fn ratio_spread(rs: &[Ratio]) -> f64 {
    let vals: Vec<f64> = rs.iter().filter_map(|r| r.value()).collect();
    if vals.is_empty() {
        0.0
    } else if vals.len() < rs.len() {
        f64::NAN
    } else {
        relative_spread(&vals)
    }
}

/// Largest ratio in a set, with exact ratios counted as 0.
pub fn ratio_max(rs: impl IntoIterator<Item = Ratio>) -> f64 {
    max_of(rs.into_iter().map(|r| r.value().unwrap_or(0.0)))
}

/// Sup norm of `div Ξ̂ + Ω²dK`.
pub fn divergence_residual(sphere: &Sphere, u: &Coeffs) -> Result<f64> {
    let r = divergence_identity_residual(sphere, u)?;
    Ok(sup_abs(&r.e1).max(sup_abs(&r.e2)))
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    sphere: Sphere,
    report: Report,
}

impl Ctx<'_> {
    fn tol(&self, name: &str, default: f64) -> f64 {
        self.cfg.tolerance(name, default)
    }

    fn le(&mut self, name: &str, anchor: &str, value: f64, default: f64) -> &mut Record {
        let r = Record::le(name, anchor, value, self.tol(name, default));
        self.report.push(r);
        self.report.records.last_mut().expect("just pushed")
    }

    fn ge(&mut self, name: &str, anchor: &str, value: f64, default: f64) -> &mut Record {
        // lower bounds scale inversely so that a larger scale is more lenient
        let tol = self.cfg.tolerances.get(name).copied().unwrap_or(default) / self.cfg.tolerance_scale;
        let r = Record::ge(name, anchor, value, tol);
        self.report.push(r);
        self.report.records.last_mut().expect("just pushed")
    }

    fn error(&mut self, name: &str, anchor: &str, default: f64, err: impl std::fmt::Display) {
        let r = Record::error(name, anchor, self.tol(name, default), err);
        self.report.push(r);
    }

    fn section<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> T) -> T {
        let t = Instant::now();
        let out = f(self);
        self.report
            .timing
            .sections
            .insert(name.into(), t.elapsed().as_secs_f64());
        out
    }
}

/// Run every check configured by `cfg`. Failures of sub-operations become
/// failed records; only an invalid configuration is an error.
pub fn run_suite(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let start = Instant::now();
    let mut ctx = Ctx {
        cfg,
        sphere: Sphere::with_bandlimit(cfg.bandlimit)?,
        report: Report::new(cfg.bandlimit, cfg.seed),
    };
    ctx.section("spectrum", round_spectrum);
    ctx.section("identities", identities);
    let members = ctx.section("uniformize", uniformize_ensemble);
    ctx.section("lightcone", |c| lightcone_ensemble(c, &members));
    ctx.section("geodesic", |c| geodesics(c, &members));
    ctx.section("xi_estimate", |c| xi_estimate(c, &members));
    ctx.section("stability", stability_pairs);
    ctx.section("basis", basis_scalings);
    ctx.section("plumbing", plumbing);
    ctx.report.timing.total_seconds = start.elapsed().as_secs_f64();
    Ok(ctx.report)
}

/// Eigenvalues of the round metric up to degree 5 against `l(l+1)`.
pub fn round_spectrum_deviation(sphere: &Sphere, max_degree: usize) -> Result<f64> {
    let count = (max_degree + 1) * (max_degree + 1);
    let e = galerkin_spectrum(
        sphere,
        &SphereMetric::Conformal(ConformalMetric::round(sphere.max_degree())),
        count,
    )?;
    let mut expected = Vec::with_capacity(count);
    for l in 0..=max_degree {
        expected.extend(std::iter::repeat_n(lambda(l), 2 * l + 1));
    }
    Ok(max_of(e.eigenvalues.iter().zip(&expected).map(|(a, b)| (a - b).abs())))
}

fn round_spectrum(c: &mut Ctx) {
    let name = "spectrum.round";
    match round_spectrum_deviation(&c.sphere, 5.min(c.cfg.bandlimit / 2)) {
        Ok(v) => {
            let bl = c.cfg.bandlimit;
            c.le(name, ANCHOR_SPECTRUM, v, 1e-10).bandlimit = Some(bl);
        }
        Err(e) => c.error(name, ANCHOR_SPECTRUM, 1e-10, e),
    }
}

fn identities(c: &mut Ctx) {
    let lmax = c.cfg.bandlimit;
    let name = "divergence_identity.analytic";
    match divergence_residual(&c.sphere, &y20(lmax, ANALYTIC_AMPLITUDE)) {
        Ok(v) => {
            c.le(name, ANCHOR_DIVERGENCE, v, 1e-8).bandlimit = Some(lmax);
        }
        Err(e) => c.error(name, ANCHOR_DIVERGENCE, 1e-8, e),
    }

    let name = "manufactured_solution.round_trip";
    match manufactured_round_trip(&c.sphere, ANALYTIC_AMPLITUDE) {
        Ok(v) => {
            c.le(name, ANCHOR_MANUFACTURED, v, 1e-8);
        }
        Err(e) => c.error(name, ANCHOR_MANUFACTURED, 1e-8, e),
    }

    let mut prev: Option<f64> = None;
    let mut first_last = (None, None);
    let name = "convergence.divergence_identity";
    for &l in &c.cfg.convergence_bandlimits {
        let r = Sphere::with_bandlimit(l).and_then(|s| divergence_residual(&s, &y20(l, CONVERGENCE_AMPLITUDE)));
        match r {
            Ok(v) => {
                // successive residuals must not increase
                let bound = prev.unwrap_or(1.0);
                let rec = Record::le(name, ANCHOR_DIVERGENCE, v, bound).with_bandlimit(l);
                c.report.push(rec);
                prev = Some(v);
                first_last.0.get_or_insert(v);
                first_last.1 = Some(v);
            }
            Err(e) => {
                let rec = Record::error(name, ANCHOR_DIVERGENCE, 1.0, e).with_bandlimit(l);
                c.report.push(rec);
            }
        }
    }
    if c.cfg.convergence_bandlimits.len() >= 2 {
        if let (Some(a), Some(b)) = first_last {
            c.ge("convergence.divergence_identity_decay", ANCHOR_DIVERGENCE, a / b, 1e3);
        }
    }
}

/// Uniformize `e^{2u}g̊` for `u = a·Y₂⁰` and compare the normalized factor with
/// `u` normalized at the same point.
pub fn manufactured_round_trip(sphere: &Sphere, a: f64) -> Result<f64> {
    let u = y20(sphere.max_degree(), a);
    let q = Basepoint::new(std::f64::consts::FRAC_PI_2, 0.0);
    let r = uniformize(sphere, &ConformalMetric::new(u.clone(), q), &NewtonOptions::default())?;
    let (expected, _) = normalize_at(sphere, &u, q)?;
    let va = sphere.synthesize(&r.log_omega)?;
    let vb = sphere.synthesize(&expected)?;
    Ok(max_of(va.iter().zip(&vb).map(|(x, y)| (x - y).abs())))
}

/// One ensemble member uniformized at every ε level.
pub struct Member {
    pub index: usize,
    /// Indexed like the configured ε levels; `None` where the solve failed.
    pub results: Vec<Option<UniformizationResult>>,
    pub metrics: Vec<ConformalMetric>,
}

fn uniformize_ensemble(c: &mut Ctx) -> Vec<Member> {
    let cfg = c.cfg;
    let mut members = Vec::with_capacity(cfg.ensemble_size);
    let mut failures = Vec::new();
    for i in 0..cfg.ensemble_size {
        let mut m = Member {
            index: i,
            results: Vec::new(),
            metrics: Vec::new(),
        };
        for &eps in &cfg.epsilon_levels {
            let eps_eff = if cfg.round_only { 0.0 } else { eps };
            let seed = member_seed(cfg.seed, STREAM_METRIC, i);
            let out = generate_random_metric(&c.sphere, seed, eps_eff, Shape::Conformal, cfg.l_max_perturbation)
                .and_then(|spec| match spec.to_metric(&c.sphere)? {
                    SphereMetric::Conformal(g) => Ok(g),
                    SphereMetric::Perturbed(_) => unreachable!("conformal spec"),
                })
                .and_then(|g| {
                    let r = uniformize(&c.sphere, &g, &NewtonOptions::default())?;
                    Ok((g, r))
                });
            match out {
                Ok((g, r)) => {
                    m.metrics.push(g);
                    m.results.push(Some(r));
                }
                Err(e) => {
                    failures.push(format!("member {i}, epsilon {eps}: {e}"));
                    m.metrics.push(ConformalMetric::round(c.sphere.max_degree()));
                    m.results.push(None);
                }
            }
        }
        members.push(m);
    }
    c.le("uniformize.failures", ANCHOR_UNIFORMIZE, failures.len() as f64, 0.5)
        .detail = (!failures.is_empty()).then(|| failures.join("; "));

    for (j, &eps) in cfg.epsilon_levels.iter().enumerate() {
        let rs: Vec<&UniformizationResult> = members.iter().filter_map(|m| m.results[j].as_ref()).collect();
        if rs.is_empty() {
            continue;
        }
        let norm = max_of(rs.iter().map(|r| {
            let (v, g) = r.normalization_residual;
            (v.exp() - 1.0).abs().max(v.exp() * g)
        }));
        c.le("uniformize.normalization", ANCHOR_UNIFORMIZE, norm, 1e-9).epsilon = Some(eps);
        let newton = max_of(rs.iter().map(|r| r.residual_linf));
        c.le("uniformize.newton_residual", ANCHOR_UNIFORMIZE, newton, 1e-9)
            .epsilon = Some(eps);
        let sups: Vec<f64> = rs.iter().filter_map(|r| r.sup_log_omega(&c.sphere).ok()).collect();
        let e = if cfg.round_only { 1.0 } else { eps };
        c.le(
            "constant.sup_log_omega_over_epsilon",
            ANCHOR_UNIFORMIZE,
            max_of(sups.iter().map(|s| s / e)),
            FINITE_CEILING,
        )
        .epsilon = Some(eps);
    }

    // scaling in ε for each member with a fixed shape
    let mut sup_spread = 0.0_f64;
    let mut bound_spread: Vec<f64> = vec![0.0; cfg.p_exponents.len()];
    let mut bound_max: Vec<Vec<f64>> = vec![vec![0.0; cfg.epsilon_levels.len()]; cfg.p_exponents.len()];
    for m in &members {
        if m.results.iter().any(|r| r.is_none()) {
            continue;
        }
        let scaled: Vec<Ratio> = m
            .results
            .iter()
            .zip(&cfg.epsilon_levels)
            .map(|(r, &eps)| {
                let r = r.as_ref().expect("checked");
                let s = r.sup_log_omega(&c.sphere).unwrap_or(f64::NAN);
                Ratio::new(s, if cfg.round_only { 0.0 } else { eps })
            })
            .collect();
        sup_spread = sup_spread.max(ratio_spread(&scaled));
        for (pi, &p) in cfg.p_exponents.iter().enumerate() {
            let ratios: Vec<Ratio> = m
                .results
                .iter()
                .zip(&m.metrics)
                .map(|(r, g)| {
                    let r = r.as_ref().expect("checked");
                    let sg = SphereMetric::Conformal(g.clone());
                    bound_ratio(&c.sphere, &sg, &r.log_omega, &r.k_in, p).unwrap_or(Ratio::Value(f64::NAN))
                })
                .collect();
            bound_spread[pi] = bound_spread[pi].max(ratio_spread(&ratios));
            for (j, r) in ratios.iter().enumerate() {
                bound_max[pi][j] = bound_max[pi][j].max(r.value().unwrap_or(0.0));
            }
        }
    }
    c.le("uniformize.sup_log_omega_spread", ANCHOR_UNIFORMIZE, sup_spread, 0.10);
    for (pi, &p) in cfg.p_exponents.iter().enumerate() {
        let name = format!("uniformize.bound_ratio_spread_p{p}");
        c.le(&name, ANCHOR_UNIFORMIZE, bound_spread[pi], 0.10);
        for (j, &eps) in cfg.epsilon_levels.iter().enumerate() {
            let name = format!("constant.bound_ratio_p{p}");
            c.le(&name, ANCHOR_UNIFORMIZE, bound_max[pi][j], FINITE_CEILING).epsilon = Some(eps);
        }
    }
    members
}

fn lightcone_ensemble(c: &mut Ctx, members: &[Member]) {
    let eps = c.cfg.epsilon_levels[0];
    let mut worst = [0.0_f64; 7];
    let mut failures = Vec::new();
    for m in members {
        let Some(r) = &m.results[0] else { continue };
        match structure_equation_report(&c.sphere, &r.log_omega) {
            Ok(s) => {
                let v = [
                    s.chibar_minus_xi,
                    s.chi_minus_g,
                    s.frame.conjugacy,
                    s.frame.null_l.max(s.frame.null_lb).max(s.frame.orthogonality),
                    s.trace,
                    s.gauss,
                    s.codazzi,
                ];
                for (w, x) in worst.iter_mut().zip(v) {
                    *w = w.max(x);
                }
            }
            Err(e) => failures.push(format!("member {}: {e}", m.index)),
        }
    }
    let rows = [
        ("lightcone.chibar_minus_xi", ANCHOR_LIGHTCONE, 1e-9),
        ("lightcone.chi_minus_g", ANCHOR_LIGHTCONE, 1e-9),
        ("lightcone.conjugacy", ANCHOR_LIGHTCONE, 1e-10),
        ("lightcone.null_frame", ANCHOR_LIGHTCONE, 1e-10),
        ("lightcone.trace", ANCHOR_STRUCTURE, 1e-9),
        ("lightcone.gauss", ANCHOR_STRUCTURE, 1e-7),
        ("lightcone.codazzi", ANCHOR_STRUCTURE, 1e-7),
    ];
    for ((name, anchor, tol), v) in rows.into_iter().zip(worst) {
        c.le(name, anchor, v, tol).epsilon = Some(eps);
    }
    c.le("lightcone.failures", ANCHOR_LIGHTCONE, failures.len() as f64, 0.5)
        .detail = (!failures.is_empty()).then(|| failures.join("; "));
}

fn geodesics(c: &mut Ctx, members: &[Member]) {
    let q = Basepoint::NORTH.position();
    let opts = GeodesicOptions::default();
    let mut worst = 0.0_f64;
    let mut failures = Vec::new();
    for m in members.iter().take(GEODESIC_MEMBERS) {
        let Some(r) = &m.results[0] else { continue };
        match geodesic_report(&c.sphere, &r.log_omega, q, c.cfg.geodesic_directions, &opts) {
            Ok(g) => worst = worst.max(g.max_err),
            Err(e) => failures.push(format!("member {}: {e}", m.index)),
        }
    }
    let eps = c.cfg.epsilon_levels[0];
    c.le("geodesic.transport", ANCHOR_GEODESIC, worst, 1e-6).epsilon = Some(eps);
    c.le("geodesic.failures", ANCHOR_GEODESIC, failures.len() as f64, 0.5)
        .detail = (!failures.is_empty()).then(|| failures.join("; "));
}

fn xi_estimate(c: &mut Ctx, members: &[Member]) {
    let levels = c.cfg.epsilon_levels.len().min(2);
    for &p in &c.cfg.p_exponents.clone() {
        let ex = Exponents::new(p, p, p);
        let mut maxima = Vec::new();
        for j in 0..levels {
            let eps = c.cfg.epsilon_levels[j];
            let us: Vec<Coeffs> = members
                .iter()
                .filter_map(|m| m.results[j].as_ref().map(|r| r.log_omega.clone()))
                .collect();
            let name = format!("constant.xi_estimate_p{p}");
            match lemma32_estimate_check(&c.sphere, &us, ex, 1.0, None) {
                Ok(rep) => {
                    let v = rep.max_l2.value().unwrap_or(0.0);
                    c.le(&name, ANCHOR_XI_ESTIMATE, v, FINITE_CEILING).epsilon = Some(eps);
                    maxima.push(rep.max_l2);
                }
                Err(e) => c.error(&name, ANCHOR_XI_ESTIMATE, FINITE_CEILING, e),
            }
        }
        if maxima.len() == 2 {
            let name = format!("xi_estimate.max_ratio_spread_p{p}");
            c.le(&name, ANCHOR_XI_ESTIMATE, ratio_spread(&maxima), 0.20);
        }

        // the ratio in k peaks where ‖K - k‖ is smallest, close to the mean of K
        if c.cfg.round_only {
            continue;
        }
        let Some(Some(r)) = members.first().map(|m| &m.results[0]) else {
            continue;
        };
        let eps = c.cfg.epsilon_levels[0];
        let name = format!("xi_estimate.k_peak_offset_p{p}");
        let peak = mean_curvature_round(&c.sphere, &r.log_omega).and_then(|mean| {
            let ks: Vec<f64> = (-20..=20).map(|i| mean + eps * i as f64 / 20.0).collect();
            let sweep = k_sweep(&c.sphere, &r.log_omega, ex, &ks)?;
            let best = sweep
                .iter()
                .max_by(|a, b| a.1.value().unwrap_or(0.0).total_cmp(&b.1.value().unwrap_or(0.0)))
                .map(|(k, _)| *k)
                .unwrap_or(f64::NAN);
            Ok((best - mean).abs() / eps)
        });
        match peak {
            Ok(v) => {
                c.le(&name, ANCHOR_XI_ESTIMATE, v, 0.5).epsilon = Some(eps);
            }
            Err(e) => c.error(&name, ANCHOR_XI_ESTIMATE, 0.5, e),
        }
    }
}

/// `g₂ = e^{2(w + t v)}g̊` with `t` chosen so that `‖g₂ - g₁‖_{g₁,2,p} ≈ δ`.
pub fn perturb_to_distance(
    sphere: &Sphere,
    g1: &ConformalMetric,
    direction: &Coeffs,
    delta: f64,
    p: f64,
) -> Result<ConformalMetric> {
    let s1 = SphereMetric::Conformal(g1.clone());
    let make = |t: f64| {
        let mut u = g1.log_omega.clone();
        u.add_scaled(direction, t);
        ConformalMetric::new(u, g1.basepoint)
    };
    let dist = |t: f64| -> Result<f64> { metric_distance(sphere, &s1, &SphereMetric::Conformal(make(t)), 2, p) };
    let mut t = 1e-2;
    for _ in 0..4 {
        let d = dist(t)?;
        if d == 0.0 {
            break;
        }
        t *= delta / d;
    }
    Ok(make(t))
}

fn stability_pairs(c: &mut Ctx) {
    let cfg = c.cfg;
    let lmax = c.sphere.max_degree();
    let q = Basepoint::NORTH;
    let p = cfg.p_exponents.first().copied().unwrap_or(4.0);
    let mut per_member: Vec<Vec<StabilityReport>> = Vec::new();
    let mut failures = Vec::new();
    let mut spot_failures = 0usize;
    let mut g1s = Vec::new();
    for i in 0..cfg.ensemble_size {
        let g1 = if cfg.round_only {
            Ok(ConformalMetric::round(lmax))
        } else {
            let seed = member_seed(cfg.seed, STREAM_METRIC, i);
            generate_random_metric(
                &c.sphere,
                seed,
                cfg.epsilon_levels[0],
                Shape::Conformal,
                cfg.l_max_perturbation,
            )
            .and_then(|spec| match spec.to_metric(&c.sphere)? {
                SphereMetric::Conformal(g) => Ok(g),
                SphereMetric::Perturbed(_) => unreachable!("conformal spec"),
            })
            .and_then(|g| Ok(ConformalMetric::new(normalize_area(&c.sphere, &g.log_omega)?, q)))
        };
        let g1 = match g1 {
            Ok(g) => g,
            Err(e) => {
                failures.push(format!("member {i}: {e}"));
                continue;
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(member_seed(cfg.seed, STREAM_DIRECTION, i));
        let direction = random_shape(&mut rng, lmax, cfg.l_max_perturbation);
        let mut reports = Vec::new();
        for &delta in &cfg.delta_levels {
            let g2 = if cfg.round_only {
                Ok(g1.clone())
            } else {
                perturb_to_distance(&c.sphere, &g1, &direction, delta, p)
            };
            let opts = StabilityOptions {
                p,
                spot_check_trials: cfg.procrustes_trials,
                spot_check_seed: member_seed(cfg.seed, STREAM_PROCRUSTES, i),
                ..StabilityOptions::default()
            };
            match g2.and_then(|g2| stability_experiment(&c.sphere, &g1, &g2, q, &opts)) {
                Ok(r) => {
                    if r.rigid.spot_check.is_some_and(|s| !s.optimal) {
                        spot_failures += 1;
                    }
                    reports.push(r);
                }
                Err(e) => failures.push(format!("member {i}, delta {delta}: {e}")),
            }
        }
        if reports.len() == cfg.delta_levels.len() {
            per_member.push(reports);
        }
        g1s.push(g1);
    }
    c.le("stability.failures", ANCHOR_RIGID, failures.len() as f64, 0.5)
        .detail = (!failures.is_empty()).then(|| failures.join("; "));

    type Pick = fn(&StabilityReport) -> Ratio;
    let picks: [(&str, &str, Pick); 6] = [
        ("projection", ANCHOR_PROJECTION, |r| r.projection.projection_ratio),
        ("orthonormality", ANCHOR_PROJECTION, |r| {
            r.projection.orthonormality_ratio
        }),
        ("rigid_l2", ANCHOR_RIGID, |r| r.rigid.l2_ratio),
        ("rigid_sobolev", ANCHOR_RIGID, |r| r.rigid.sobolev_ratio),
        ("factor_sup_log", ANCHOR_RIGID, |r| r.factors.sup_log_ratio),
        ("round_metric", ANCHOR_RIGID, |r| r.factors.round_metric_ratio),
    ];
    for (key, anchor, pick) in picks {
        for (j, &delta) in cfg.delta_levels.iter().enumerate() {
            let v = ratio_max(per_member.iter().map(|rs| pick(&rs[j])));
            c.le(&format!("constant.{key}_over_delta"), anchor, v, FINITE_CEILING)
                .delta = Some(delta);
        }
        if cfg.delta_levels.len() >= 2 {
            let spread = max_of(
                per_member
                    .iter()
                    .map(|rs| ratio_spread(&rs.iter().map(pick).collect::<Vec<_>>())),
            );
            c.le(&format!("stability.{key}_spread"), anchor, spread, 0.25);
        }
    }
    if cfg.delta_levels.len() >= 2 {
        // the two round metrics differ by a Möbius map, whose first-order
        // effect on the Gram matrix of degree-1 functions integrates to zero
        let spread = max_of(per_member.iter().map(|rs| {
            let v: Vec<Ratio> = rs
                .iter()
                .map(|r| match r.projection.orthonormality_ratio {
                    Ratio::Value(x) => Ratio::Value(x / r.delta),
                    Ratio::Exact => Ratio::Exact,
                })
                .collect();
            ratio_spread(&v)
        }));
        c.le(
            "stability.orthonormality_quadratic_spread",
            ANCHOR_PROJECTION,
            spread,
            0.25,
        );
    }
    let cond = max_of(per_member.iter().flatten().map(|r| r.projection.gram_condition));
    c.le("stability.gram_condition", ANCHOR_PROJECTION, cond, 10.0);
    if cfg.procrustes_trials > 0 {
        c.le("rigid.spot_check_failures", ANCHOR_RIGID, spot_failures as f64, 0.5)
            .detail = Some(format!("{} random candidates per pair", cfg.procrustes_trials));
    }

    let mut iso = 0.0_f64;
    let mut iso_fail = Vec::new();
    for (i, g1) in g1s.iter().enumerate().take(ISOMETRIC_MEMBERS) {
        let mut rng = ChaCha8Rng::seed_from_u64(member_seed(cfg.seed, STREAM_ROTATION, i));
        let axis = [
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
        ];
        let angle = rng.random_range(0.3..2.8);
        let rot = rotation_matrix(axis, angle);
        let qi = Basepoint::new(rng.random_range(0.4..2.7), rng.random_range(0.0..std::f64::consts::TAU));
        match isometric_pair_check(&c.sphere, g1, &rot, qi, StabilityOptions::default().eigen_count) {
            Ok(r) => iso = iso.max(r.residual_l2).max(r.log_factor_mismatch),
            Err(e) => iso_fail.push(format!("member {i}: {e}")),
        }
    }
    c.le("rigid.isometric_pair", ANCHOR_RIGID, iso, 1e-10).detail = (!iso_fail.is_empty()).then(|| iso_fail.join("; "));
    if !iso_fail.is_empty() {
        c.report.records.last_mut().expect("just pushed").pass = false;
    }
}

/// Worst two-sided deviation `max(r, 1/r)` of the basis scalings for one
/// family over `2 ≤ l ≤ lmax` and `n ∈ {0, 1, 2, -1}`.
pub fn basis_scaling_deviation(sphere: &Sphere, kind: BasisKind, lmax: usize) -> Result<f64> {
    let mut worst = 1.0_f64;
    for l in 2..=lmax {
        for n in [0, 1, 2, -1] {
            let v = basis_norms(sphere, l, n, kind)?;
            let r = v / lambda(l).powi(n + kind.scaling_offset());
            worst = worst.max(r).max(1.0 / r);
        }
    }
    Ok(worst)
}

fn basis_scalings(c: &mut Ctx) {
    let lmax = c.cfg.bandlimit.min(24);
    for kind in BasisKind::ALL {
        let (name, tol) = match kind {
            BasisKind::DY => ("basis.dY", 4.0),
            BasisKind::StarDY => ("basis.star_dY", 4.0),
            BasisKind::LDY => ("basis.L_dY", 8.0),
            BasisKind::LStarDY => ("basis.L_star_dY", 8.0),
        };
        match basis_scaling_deviation(&c.sphere, kind, lmax) {
            Ok(v) => {
                c.le(name, ANCHOR_BASIS, v, tol).bandlimit = Some(lmax);
            }
            Err(e) => c.error(name, ANCHOR_BASIS, tol, e),
        }
    }
}

fn plumbing(c: &mut Ctx) {
    let eps = c.cfg.epsilon_levels[0];
    let seed = member_seed(c.cfg.seed, STREAM_METRIC, 0);
    let lp = c.cfg.l_max_perturbation;
    for (shape, name) in [
        (Shape::Conformal, "plumbing.generator_conformal"),
        (Shape::Perturbed, "plumbing.generator_perturbed"),
    ] {
        let gen = || generate_random_metric(&c.sphere, seed, eps, shape, lp).and_then(|s| s.to_json());
        let rec = gen().and_then(|a| {
            let b = gen()?;
            let spec = crate::metric::spec::MetricSpec::from_json(&a)?;
            let d = super::generate::curvature_deviation(&c.sphere, &spec)?;
            let mismatch = if a == b { 0.0 } else { 1.0 };
            Ok(Record::le(name, PLUMBING, (d / eps - 1.0).abs() + mismatch, 0.05).with_epsilon(eps))
        });
        match rec {
            Ok(r) => c.report.push(r),
            Err(e) => c.error(name, PLUMBING, 0.05, e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spreads_handle_exact_ratios() {
        assert_eq!(ratio_spread(&[Ratio::Exact, Ratio::Exact]), 0.0);
        assert!(ratio_spread(&[Ratio::Exact, Ratio::Value(1.0)]).is_nan());
        assert!((ratio_spread(&[Ratio::Value(1.0), Ratio::Value(1.2)]) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn seeds_are_distinct() {
        let a = member_seed(7, STREAM_METRIC, 0);
        assert_ne!(a, member_seed(7, STREAM_METRIC, 1));
        assert_ne!(a, member_seed(7, STREAM_DIRECTION, 0));
        assert_ne!(a, member_seed(8, STREAM_METRIC, 0));
    }

    #[test]
    fn round_only_suite_passes() {
        let cfg = ExperimentConfig {
            bandlimit: 12,
            ensemble_size: 2,
            round_only: true,
            convergence_bandlimits: vec![12, 24],
            procrustes_trials: 100,
            geodesic_directions: 2,
            l_max_perturbation: 4,
            ..ExperimentConfig::default()
        };
        let r = run_suite(&cfg).unwrap();
        assert!(r.records.iter().all(|x| ANCHORS.contains(&x.anchor.as_str())));
        // the 2-tensor band is exceeded at l = 2, n = 2, where the exact ratio
        // is 13/108 (from spin-weighted eigenvalues)
        for x in r.failures() {
            assert!(x.name == "basis.L_dY" || x.name == "basis.L_star_dY", "{x:#?}");
            assert!((x.value.unwrap() - 108.0 / 13.0).abs() < 1e-9);
        }
    }
}
