//! Seeded random metrics with a prescribed curvature deviation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::spec::MetricSpec;
use crate::metric::{gauss_curvature_from_log_omega, gauss_curvature_general, Basepoint, SphereMetric};
use crate::sht::{Coeffs, Sphere};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Conformal,
    Perturbed,
}

/// Relative accuracy of the curvature rescaling.
pub const EPSILON_REL_TOL: f64 = 1e-3;

pub const MAX_EPSILON: f64 = 0.2;

/// Coefficients for `2 ≤ l ≤ l_max` with variance `l⁻⁴`.
pub fn random_shape(rng: &mut ChaCha8Rng, lmax: usize, l_max_perturbation: usize) -> Coeffs {
    let mut c = Coeffs::zeros(lmax);
    for l in 2..=l_max_perturbation.min(lmax) {
        let sd = 1.0 / (l * l) as f64;
        let n = Normal::new(0.0, sd).expect("positive deviation");
        for m in -(l as i64)..=(l as i64) {
            c.set(l, m, n.sample(rng));
        }
    }
    c
}

fn sup_dev(k: &[f64]) -> f64 {
    k.iter().fold(0.0_f64, |a, k| a.max((k - 1.0).abs()))
}

/// Find `t` with `f(t) = target` for an increasing `f` with `f(0) = 0`.
fn solve_scale(target: f64, mut f: impl FnMut(f64) -> Option<f64>) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, 1e-3);
    let mut grow = 0;
    loop {
        match f(hi) {
            Some(v) if v >= target => break,
            Some(_) => {
                lo = hi;
                hi *= 2.0;
            }
            None => break,
        }
        grow += 1;
        if grow > 60 {
            return Err(Error::InvalidArgument("could not bracket the target scale".into()));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        match f(mid) {
            Some(v) if (v - target).abs() <= EPSILON_REL_TOL * 0.5 * target => return Ok(mid),
            Some(v) if v < target => lo = mid,
            _ => hi = mid,
        }
    }
    Ok(0.5 * (lo + hi))
}

/// A metric with `sup |K - 1| = epsilon` (to [`EPSILON_REL_TOL`]), drawn from
/// `seed`. The shape is fixed by the seed and only its amplitude depends on
/// `epsilon`.
pub fn generate_random_metric(
    sphere: &Sphere,
    seed: u64,
    epsilon: f64,
    shape: Shape,
    l_max_perturbation: usize,
) -> Result<MetricSpec> {
    if !(0.0..=MAX_EPSILON).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be in [0, {MAX_EPSILON}], got {epsilon}"
        )));
    }
    let lmax = sphere.bandlimit();
    if l_max_perturbation < 2 || l_max_perturbation > lmax {
        return Err(Error::InvalidArgument(format!(
            "perturbation degree must be in 2..={lmax}, got {l_max_perturbation}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match shape {
        Shape::Conformal => {
            let base = random_shape(&mut rng, lmax, l_max_perturbation);
            if epsilon == 0.0 {
                return Ok(MetricSpec::conformal(lmax, &Coeffs::zeros(lmax), Basepoint::NORTH));
            }
            let scaled = |t: f64| {
                let mut c = base.clone();
                c.scale(t);
                c
            };
            let t = solve_scale(epsilon, |t| {
                gauss_curvature_from_log_omega(sphere, &scaled(t))
                    .ok()
                    .map(|k| sup_dev(&k))
            })?;
            Ok(MetricSpec::conformal(lmax, &scaled(t), Basepoint::NORTH))
        }
        Shape::Perturbed => {
            let trace = random_shape(&mut rng, lmax, l_max_perturbation);
            let grad = random_shape(&mut rng, lmax, l_max_perturbation);
            let curl = random_shape(&mut rng, lmax, l_max_perturbation);
            let build = |t: f64| {
                let s = |c: &Coeffs| {
                    let mut c = c.clone();
                    c.scale(t);
                    c
                };
                MetricSpec::perturbed(lmax, &s(&trace), &s(&grad), &s(&curl))
            };
            if epsilon == 0.0 {
                return Ok(build(0.0));
            }
            let t = solve_scale(epsilon, |t| {
                let m = build(t).to_metric(sphere).ok()?;
                let p = match m {
                    SphereMetric::Perturbed(p) => p,
                    SphereMetric::Conformal(_) => unreachable!("perturbed spec"),
                };
                gauss_curvature_general(sphere, &p).ok().map(|k| sup_dev(&k))
            })?;
            Ok(build(t))
        }
    }
}

/// `sup |K - 1|` of a realized spec.
pub fn curvature_deviation(sphere: &Sphere, spec: &MetricSpec) -> Result<f64> {
    let k = match spec.to_metric(sphere)? {
        SphereMetric::Conformal(c) => gauss_curvature_from_log_omega(sphere, &c.log_omega)?,
        SphereMetric::Perturbed(p) => gauss_curvature_general(sphere, &p)?,
    };
    Ok(sup_dev(&k))
}

/// Shift `log Ω` by a constant so that the area is `4π`.
pub fn normalize_area(sphere: &Sphere, u: &Coeffs) -> Result<Coeffs> {
    let four_pi = 4.0 * std::f64::consts::PI;
    let v = sphere.synthesize(u)?;
    let area = sphere
        .grid
        .integrate(&v.iter().map(|u| (2.0 * u).exp()).collect::<Vec<_>>());
    let mut out = u.clone();
    out.set(0, 0, u.get(0, 0) + 0.5 * (four_pi / area).ln() * four_pi.sqrt());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_epsilon_is_round() {
        let s = Sphere::with_bandlimit(8).unwrap();
        let spec = generate_random_metric(&s, 1, 0.0, Shape::Conformal, 4).unwrap();
        assert_eq!(curvature_deviation(&s, &spec).unwrap(), 0.0);
    }

    #[test]
    fn deterministic_and_on_target() {
        let s = Sphere::with_bandlimit(12).unwrap();
        for shape in [Shape::Conformal, Shape::Perturbed] {
            let a = generate_random_metric(&s, 42, 0.05, shape, 5).unwrap();
            let b = generate_random_metric(&s, 42, 0.05, shape, 5).unwrap();
            assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
            let d = curvature_deviation(&s, &a).unwrap();
            assert!((0.0475..=0.0525).contains(&d), "{shape:?} {d}");
        }
    }

    #[test]
    fn rejects_out_of_range() {
        let s = Sphere::with_bandlimit(8).unwrap();
        assert!(generate_random_metric(&s, 1, 0.3, Shape::Conformal, 4).is_err());
        assert!(generate_random_metric(&s, 1, -0.1, Shape::Conformal, 4).is_err());
        assert!(generate_random_metric(&s, 1, 0.1, Shape::Conformal, 1).is_err());
    }

    #[test]
    fn area_normalization() {
        let s = Sphere::with_bandlimit(8).unwrap();
        let mut u = Coeffs::zeros(8);
        u.set(2, 1, 0.2);
        u.set(0, 0, 0.3);
        let v = normalize_area(&s, &u).unwrap();
        let a = crate::metric::ConformalMetric::new(v, Basepoint::NORTH)
            .area(&s)
            .unwrap();
        assert!((a - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    }
}
