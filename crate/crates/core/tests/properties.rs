use conformal_sphere::metric::{gauss_curvature_from_log_omega, rotation_matrix, Basepoint};
use conformal_sphere::sht::{lambda, laplacian_round, Coeffs, Sphere};
use conformal_sphere::stability::{build_embedding, fit_rigid_motion};
use conformal_sphere::uniformize::{normalization_residual, normalize_at};
use proptest::prelude::*;

const L: usize = 10;

fn sphere() -> Sphere {
    Sphere::with_bandlimit(L).unwrap()
}

fn coeffs(lmax: usize, scale: f64) -> impl Strategy<Value = Coeffs> {
    let n = (lmax + 1) * (lmax + 1);
    prop::collection::vec(-1.0..1.0f64, n)
        .prop_map(move |v| Coeffs::from_vec(lmax, v.into_iter().map(|x| x * scale).collect()).unwrap())
}

/// Coefficients without the constant and degree-1 modes, decaying in l.
fn smooth(lmax: usize, scale: f64) -> impl Strategy<Value = Coeffs> {
    coeffs(lmax, 1.0).prop_map(move |mut c| {
        for l in 0..=lmax {
            for m in -(l as i64)..=(l as i64) {
                let v = if l < 2 {
                    0.0
                } else {
                    c.get(l, m) * scale / (l * l) as f64
                };
                c.set(l, m, v);
            }
        }
        c
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transform_round_trip(c in coeffs(L, 1.0)) {
        let s = sphere();
        let back = s.analyze(&s.synthesize(&c).unwrap(), L).unwrap();
        for (a, b) in back.as_slice().iter().zip(c.as_slice()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonics_are_laplacian_eigenfunctions(l in 0usize..=L, mf in 0.0..1.0f64) {
        let s = sphere();
        let m = ((mf * (2 * l + 1) as f64).floor() as i64 - l as i64).clamp(-(l as i64), l as i64);
        let f = s.synthesize(&Coeffs::unit(L, l, m)).unwrap();
        let d = laplacian_round(&s, &f).unwrap();
        for (a, b) in d.iter().zip(&f) {
            prop_assert!((a + lambda(l) * b).abs() < 1e-10);
        }
    }

    #[test]
    fn complex_coefficients_round_trip(c in coeffs(6, 1.0)) {
        let back = Coeffs::from_complex(6, &c.to_complex()).unwrap();
        for (a, b) in back.as_slice().iter().zip(c.as_slice()) {
            prop_assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn gauss_bonnet(u in smooth(6, 0.3)) {
        let s = sphere();
        let u = u.resized(L);
        let k = gauss_curvature_from_log_omega(&s, &u).unwrap();
        let uv = s.synthesize(&u).unwrap();
        let integrand: Vec<f64> = k.iter().zip(&uv).map(|(k, u)| k * (2.0 * u).exp()).collect();
        prop_assert!((s.grid.integrate(&integrand) - 4.0 * std::f64::consts::PI).abs() < 1e-8);
    }

    #[test]
    fn normalization_kills_one_jet(u in smooth(6, 0.2), th in 0.1..3.0f64, ph in 0.0..6.2f64) {
        let s = sphere();
        let q = Basepoint::new(th, ph);
        let (un, _) = normalize_at(&s, &u.resized(L), q).unwrap();
        let (v, g) = normalization_residual(&un, q);
        prop_assert!(v < 1e-10 && g < 1e-9, "{v} {g}");
    }

    #[test]
    fn procrustes_recovers_rotation(
        c0 in coeffs(3, 1.0), c1 in coeffs(3, 1.0), c2 in coeffs(3, 1.0),
        ax in prop::array::uniform3(-1.0..1.0f64), angle in 0.1..3.0f64,
    ) {
        prop_assume!(ax.iter().map(|x| x * x).sum::<f64>() > 1e-3);
        let s = sphere();
        let phi = build_embedding(&s, &[c0.resized(L), c1.resized(L), c2.resized(L)]).unwrap();
        let r = rotation_matrix(ax, angle);
        let moved = phi.transformed(&r);
        let fit = fit_rigid_motion(&phi, &moved, &s.grid.node_weights).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((fit.motion.matrix[i][j] - r[i][j]).abs() < 1e-9);
            }
        }
        prop_assert!(fit.residual_l2 < 1e-9);
    }
}
