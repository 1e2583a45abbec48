//! Laplace–Beltrami spectra of sphere metrics, first-eigenspace embeddings
//! into the unit sphere and rigid alignment of two such embeddings.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::norms::{sobolev_norm_ctx, sobolev_norm_multi};
use crate::metric::{metric_distance, Basepoint, ConformalMetric, MetricContext, PerturbedMetric, SphereMetric};
use crate::ratio::Ratio;
use crate::sht::gram::{to_vector, weighted_mass, weighted_stiffness};
use crate::sht::{eval_points_many, Coeffs, Sphere, Tensor};
use crate::uniformize::{normalization_residual, normalize_at, MobiusParams};

/// Smallest admissible gap around the first nonzero cluster.
pub const CLUSTER_GAP: f64 = 0.5;

/// Largest admissible condition number of the projected Gram matrix.
pub const MAX_GRAM_CONDITION: f64 = 10.0;

/// Volume density and stiffness coefficients `a^{ij} = √det g g^{ij}` of a
/// metric, in round orthonormal frame components.
#[derive(Debug, Clone)]
pub struct MetricWeights {
    pub density: Vec<f64>,
    pub a11: Vec<f64>,
    pub a12: Vec<f64>,
    pub a22: Vec<f64>,
}

impl MetricWeights {
    pub fn from_metric(sphere: &Sphere, g: &SphereMetric) -> Result<Self> {
        match g {
            SphereMetric::Conformal(c) => Ok(Self::conformal(&c.log_omega_values(sphere)?)),
            SphereMetric::Perturbed(p) => Self::perturbed(sphere, p),
        }
    }

    /// `e^{2u} g̊`; the stiffness is conformally invariant.
    pub fn conformal(log_omega: &[f64]) -> Self {
        let n = log_omega.len();
        Self {
            density: log_omega.iter().map(|u| (2.0 * u).exp()).collect(),
            a11: vec![1.0; n],
            a12: vec![0.0; n],
            a22: vec![1.0; n],
        }
    }

    pub fn perturbed(sphere: &Sphere, g: &PerturbedMetric) -> Result<Self> {
        sphere.check_len(&g.h11)?;
        g.validate()?;
        let n = g.len();
        let mut w = Self {
            density: vec![0.0; n],
            a11: vec![0.0; n],
            a12: vec![0.0; n],
            a22: vec![0.0; n],
        };
        for k in 0..n {
            let m = g.g_at(k);
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let s = det.sqrt();
            w.density[k] = s;
            w.a11[k] = s * m[1][1] / det;
            w.a12[k] = -s * m[0][1] / det;
            w.a22[k] = s * m[0][0] / det;
        }
        Ok(w)
    }
}

/// Eigenpairs of `-Δ_g` in the harmonics of degree ≤ L, ascending, with
/// eigenfields orthonormal in `L²(g)`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenfields: Vec<Coeffs>,
    /// `max |S x - μ M x|` over the returned pairs.
    pub galerkin_residual: f64,
    lmax: usize,
    mass: DMatrix<f64>,
    density: Vec<f64>,
}

impl EigenDecomposition {
    pub fn lmax(&self) -> usize {
        self.lmax
    }

    /// Volume density `dvol_g / dvol_g̊` at the nodes.
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// `∫ a b dvol_g`.
    pub fn inner(&self, a: &Coeffs, b: &Coeffs) -> f64 {
        let a = to_vector(&a.resized(self.lmax));
        let b = to_vector(&b.resized(self.lmax));
        a.dot(&(&self.mass * b))
    }

    pub fn norm(&self, a: &Coeffs) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }

    /// Indices of the first nonzero cluster, which must have dimension three
    /// and be separated from its neighbours by [`CLUSTER_GAP`].
    pub fn first_cluster(&self) -> Result<[usize; 3]> {
        let mu = &self.eigenvalues;
        if mu.len() < 5 {
            return Err(Error::ClusterNotSeparated(format!(
                "need at least 5 eigenvalues, have {}",
                mu.len()
            )));
        }
        let below = mu[1] - mu[0];
        let above = mu[4] - mu[3];
        if below < CLUSTER_GAP || above < CLUSTER_GAP {
            return Err(Error::ClusterNotSeparated(format!(
                "μ = {:.6}, {:.6}, {:.6}, {:.6}, {:.6}",
                mu[0], mu[1], mu[2], mu[3], mu[4]
            )));
        }
        Ok([1, 2, 3])
    }

    pub fn first_cluster_fields(&self) -> Result<[Coeffs; 3]> {
        let c = self.first_cluster()?;
        Ok(c.map(|i| self.eigenfields[i].clone()))
    }
}

pub fn galerkin_spectrum(sphere: &Sphere, g: &SphereMetric, count: usize) -> Result<EigenDecomposition> {
    galerkin_spectrum_weights(sphere, &MetricWeights::from_metric(sphere, g)?, count)
}

pub fn galerkin_spectrum_weights(sphere: &Sphere, w: &MetricWeights, count: usize) -> Result<EigenDecomposition> {
    let lmax = sphere.bandlimit();
    let dim = (lmax + 1) * (lmax + 1);
    if count == 0 || count > dim {
        return Err(Error::InvalidArgument(format!(
            "eigenvalue count must be in 1..={dim}, got {count}"
        )));
    }
    let mass = weighted_mass(sphere, lmax, &w.density)?;
    let stiff = weighted_stiffness(sphere, lmax, &w.a11, &w.a12, &w.a22)?;
    let chol = nalgebra::Cholesky::new(mass.clone())
        .ok_or_else(|| Error::LinearAlgebra("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(&stiff)
        .ok_or_else(|| Error::LinearAlgebra("singular Cholesky factor".into()))?;
    let mut c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::LinearAlgebra("singular Cholesky factor".into()))?;
    let ct = c.transpose();
    c += ct;
    c *= 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order.truncate(count);
    let mut ys = DMatrix::<f64>::zeros(dim, count);
    for (j, &i) in order.iter().enumerate() {
        ys.set_column(j, &eig.eigenvectors.column(i));
    }
    let xs = l
        .tr_solve_lower_triangular(&ys)
        .ok_or_else(|| Error::LinearAlgebra("singular Cholesky factor".into()))?;
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut galerkin_residual = 0.0_f64;
    let mut eigenfields = Vec::with_capacity(count);
    for (j, mu) in eigenvalues.iter().enumerate() {
        let v = xs.column(j).into_owned();
        let r = &stiff * &v - (&mass * &v) * *mu;
        galerkin_residual = galerkin_residual.max(r.amax());
        eigenfields.push(Coeffs::from_vec(lmax, v.as_slice().to_vec())?);
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenfields,
        galerkin_residual,
        lmax,
        mass,
        density: w.density.clone(),
    })
}

/// `L²(g)`-orthogonal projection of `v` onto the first cluster of `target`.
pub fn project_first_eigenspace(v: &Coeffs, target: &EigenDecomposition) -> Result<Coeffs> {
    let fields = target.first_cluster_fields()?;
    let mut out = Coeffs::zeros(target.lmax);
    for f in &fields {
        out.add_scaled(f, target.inner(v, f));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct GramSchmidt {
    pub basis: [Coeffs; 3],
    /// `∫ v̄_k v̄_l dvol_g`.
    pub gram: [[f64; 3]; 3],
    pub condition: f64,
    /// `max |gram - I|`
    pub defect: f64,
    /// `max_k ‖v̄_k - v̄'_k‖_{L²(g)}`
    pub deviation: f64,
}

/// Orthonormalize in `L²(g)` with `g` the metric of `inner`.
pub fn gram_schmidt(vbars: &[Coeffs; 3], inner: &EigenDecomposition) -> Result<GramSchmidt> {
    let mut gram = [[0.0; 3]; 3];
    for k in 0..3 {
        for l in 0..3 {
            gram[k][l] = inner.inner(&vbars[k], &vbars[l]);
        }
    }
    let gm = Matrix3::from_fn(|i, j| gram[i][j]);
    let ev = SymmetricEigen::new(gm).eigenvalues;
    let (lo, hi) = (ev.min(), ev.max());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition < MAX_GRAM_CONDITION) {
        return Err(Error::IllConditioned(condition));
    }
    let mut basis: Vec<Coeffs> = Vec::with_capacity(3);
    for v in vbars {
        let mut w = v.resized(inner.lmax);
        for b in &basis {
            let c = inner.inner(&w, b);
            w.add_scaled(b, -c);
        }
        let n = inner.norm(&w);
        w.scale(1.0 / n);
        basis.push(w);
    }
    let defect = (0..9).fold(0.0_f64, |a, i| {
        let (k, l) = (i / 3, i % 3);
        a.max((gram[k][l] - if k == l { 1.0 } else { 0.0 }).abs())
    });
    let deviation = (0..3).fold(0.0_f64, |a, k| {
        let mut d = vbars[k].resized(inner.lmax);
        d.add_scaled(&basis[k], -1.0);
        a.max(inner.norm(&d))
    });
    let basis: [Coeffs; 3] = basis.try_into().expect("three vectors");
    Ok(GramSchmidt {
        basis,
        gram,
        condition,
        defect,
        deviation,
    })
}

/// `Φ = √(4π/3) (v₁, v₂, v₃)` sampled at the nodes.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub coeffs: [Coeffs; 3],
    pub values: [Vec<f64>; 3],
}

pub fn embedding_scale() -> f64 {
    (4.0 * std::f64::consts::PI / 3.0).sqrt()
}

pub fn build_embedding(sphere: &Sphere, basis: &[Coeffs; 3]) -> Result<Embedding> {
    let s = embedding_scale();
    let coeffs = basis.clone().map(|mut c| {
        c.scale(s);
        c
    });
    let values = [
        sphere.synthesize(&coeffs[0])?,
        sphere.synthesize(&coeffs[1])?,
        sphere.synthesize(&coeffs[2])?,
    ];
    Ok(Embedding { coeffs, values })
}

impl Embedding {
    pub fn nodes(&self) -> usize {
        self.values[0].len()
    }

    pub fn point(&self, k: usize) -> [f64; 3] {
        [self.values[0][k], self.values[1][k], self.values[2][k]]
    }

    /// `sup ||Φ|² - 1|`
    pub fn unit_deviation(&self) -> f64 {
        (0..self.nodes()).fold(0.0_f64, |a, k| {
            let p = self.point(k);
            a.max((p[0] * p[0] + p[1] * p[1] + p[2] * p[2] - 1.0).abs())
        })
    }

    /// Pullback of the Euclidean metric, `Φ*δ`.
    pub fn pullback_metric(&self, sphere: &Sphere) -> Result<PerturbedMetric> {
        let mut h = [
            vec![0.0; self.nodes()],
            vec![0.0; self.nodes()],
            vec![0.0; self.nodes()],
        ];
        for c in &self.coeffs {
            let (d1, d2) = sphere.synthesize_gradient(c)?;
            for k in 0..self.nodes() {
                h[0][k] += d1[k] * d1[k];
                h[1][k] += d1[k] * d2[k];
                h[2][k] += d2[k] * d2[k];
            }
        }
        let [mut h11, h12, mut h22] = h;
        h11.iter_mut().for_each(|v| *v -= 1.0);
        h22.iter_mut().for_each(|v| *v -= 1.0);
        Ok(PerturbedMetric { h11, h12, h22 })
    }

    /// Area of `Φ*δ`.
    pub fn image_area(&self, sphere: &Sphere) -> Result<f64> {
        Ok(self.pullback_metric(sphere)?.area(sphere))
    }

    /// `Φ ∘ R`, by evaluating the expansions at rotated nodes.
    pub fn compose_rotation(&self, sphere: &Sphere, rotation: &[[f64; 3]; 3]) -> Embedding {
        let n = self.nodes();
        let mut values = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let cs = [&self.coeffs[0], &self.coeffs[1], &self.coeffs[2]];
        for (k, x) in sphere.grid.position.iter().enumerate() {
            let rx: [f64; 3] = std::array::from_fn(|i| (0..3).map(|j| rotation[i][j] * x[j]).sum());
            for (a, j) in eval_points_many(&cs, rx).iter().enumerate() {
                values[a][k] = j.value;
            }
        }
        let coeffs = self.coeffs.clone();
        Embedding { coeffs, values }
    }

    /// `O Φ`.
    pub fn transformed(&self, o: &[[f64; 3]; 3]) -> Embedding {
        let lmax = self.coeffs[0].lmax();
        let mut coeffs: [Coeffs; 3] = std::array::from_fn(|_| Coeffs::zeros(lmax));
        let n = self.nodes();
        let mut values = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for i in 0..3 {
            for j in 0..3 {
                coeffs[i].add_scaled(&self.coeffs[j], o[i][j]);
                for k in 0..n {
                    values[i][k] += o[i][j] * self.values[j][k];
                }
            }
        }
        Embedding { coeffs, values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidMotion {
    pub matrix: [[f64; 3]; 3],
    pub det: f64,
}

impl RigidMotion {
    pub fn apply(&self, x: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|i| (0..3).map(|j| self.matrix[i][j] * x[j]).sum())
    }

    /// `max |OᵀO - I|`
    pub fn orthogonality_defect(&self) -> f64 {
        let m = to_mat(&self.matrix);
        (m.transpose() * m - Matrix3::identity()).amax()
    }
}

fn to_mat(a: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| a[i][j])
}

fn from_mat(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

/// Second moments of a weighted point pair, enough to evaluate the residual
/// of any orthogonal `O`: `Σ w|y - Ox|² = a + b - 2 tr(Oᵀ C)`.
#[derive(Debug, Clone, Copy)]
pub struct ProcrustesMoments {
    pub a: f64,
    pub b: f64,
    pub c: Matrix3<f64>,
}

impl ProcrustesMoments {
    pub fn new(phi1: &Embedding, phi2: &Embedding, weights: &[f64]) -> Self {
        let mut m = Self {
            a: 0.0,
            b: 0.0,
            c: Matrix3::zeros(),
        };
        for (k, w) in weights.iter().enumerate() {
            let x = phi1.point(k);
            let y = phi2.point(k);
            m.a += w * (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]);
            m.b += w * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
            for i in 0..3 {
                for j in 0..3 {
                    m.c[(i, j)] += w * y[i] * x[j];
                }
            }
        }
        m
    }

    pub fn residual_sq(&self, o: &Matrix3<f64>) -> f64 {
        self.a + self.b - 2.0 * o.component_mul(&self.c).sum()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RigidFit {
    pub motion: RigidMotion,
    /// Weighted `L²` norm of `Φ₂ - OΦ₁`.
    pub residual_l2: f64,
    pub residual_sup: f64,
    pub singular_values: [f64; 3],
}

/// Weighted orthogonal Procrustes over `O(3)`: minimize `Σ w |Φ₂ - OΦ₁|²`.
pub fn fit_rigid_motion(phi1: &Embedding, phi2: &Embedding, weights: &[f64]) -> Result<RigidFit> {
    if phi1.nodes() != weights.len() || phi2.nodes() != weights.len() {
        return Err(Error::GridMismatch {
            expected: weights.len(),
            got: phi1.nodes().min(phi2.nodes()),
        });
    }
    let m = ProcrustesMoments::new(phi1, phi2, weights);
    let svd = m.c.svd(true, true);
    let s = svd.singular_values;
    let sv = [s[0], s[1], s[2]];
    let smax = s.max();
    if !(s.min() > 1e-10 * smax.max(1e-300)) {
        return Err(Error::DegenerateEmbedding(sv));
    }
    let o = svd.u.expect("u requested") * svd.v_t.expect("v_t requested");
    let matrix = from_mat(&o);
    let motion = RigidMotion {
        matrix,
        det: o.determinant().signum(),
    };
    let fitted = phi1.transformed(&matrix);
    let mut l2 = 0.0;
    let mut sup = 0.0_f64;
    for (k, w) in weights.iter().enumerate() {
        let y = phi2.point(k);
        let x = fitted.point(k);
        let d2: f64 = (0..3).map(|i| (y[i] - x[i]).powi(2)).sum();
        l2 += w * d2;
        sup = sup.max(d2.sqrt());
    }
    Ok(RigidFit {
        motion,
        residual_l2: l2.max(0.0).sqrt(),
        residual_sup: sup,
        singular_values: sv,
    })
}

/// Haar-random element of `O(3)`.
pub fn random_orthogonal<R: Rng>(rng: &mut R) -> Matrix3<f64> {
    let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let [w, x, y, z] = q.map(|v| v / n);
    let r = Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    );
    if rng.random::<bool>() {
        -r
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub trials: usize,
    pub fitted_residual_sq: f64,
    pub best_random_residual_sq: f64,
    /// No candidate did better than the fitted motion.
    pub optimal: bool,
}

/// Compare the fitted motion against `trials` random orthogonal matrices.
pub fn procrustes_spot_check(m: &ProcrustesMoments, fitted: &RigidMotion, trials: usize, seed: u64) -> SpotCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = m.residual_sq(&to_mat(&fitted.matrix));
    let mut best = f64::INFINITY;
    for _ in 0..trials {
        best = best.min(m.residual_sq(&random_orthogonal(&mut rng)));
    }
    // allow round-off in the closed-form residual
    let slack = 1e-12 * (m.a + m.b);
    SpotCheck {
        trials,
        fitted_residual_sq: f,
        best_random_residual_sq: best,
        optimal: f <= best + slack,
    }
}

/// Configuration of the two-metric experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityOptions {
    pub p: f64,
    /// Order of the distance `‖g₂ - g₁‖_{g₁,n,p}`.
    pub n: usize,
    pub delta0: f64,
    /// Relative tolerance on `area(g₁) = 4π`.
    pub area_tol: f64,
    pub eigen_count: usize,
    pub ceilings: Option<Ceilings>,
    /// Random orthogonal candidates compared against the fitted motion; 0 skips.
    pub spot_check_trials: usize,
    pub spot_check_seed: u64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            p: 4.0,
            n: 2,
            delta0: 0.5,
            area_tol: 1e-6,
            eigen_count: 9,
            ceilings: None,
            spot_check_trials: 0,
            spot_check_seed: 0,
        }
    }
}

/// Upper limits on the reported ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ceilings {
    pub log_factor: f64,
    pub round_metric: f64,
    pub rigid: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorStability {
    /// `sup |log(Ω₂/Ω₁)| / δ`
    pub sup_log_ratio: Ratio,
    /// `‖log(Ω₂/Ω₁)‖_{g₁,2,p} / δ`
    pub sobolev_log_ratio: Ratio,
    /// `‖Ω₂⁻²g₂ - Ω₁⁻²g₁‖_{g₁,2,p} / δ`
    pub round_metric_ratio: Ratio,
    /// `(|log Ω_a(q)|, |d log Ω_a(q)|)`
    pub normalization: [(f64, f64); 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionStability {
    /// `max_k ‖v_k - v̄_k‖ / (δ ‖v_k‖)` in `L²` of the second round metric.
    pub projection_ratio: Ratio,
    /// `max |∫v̄_k v̄_l - δ_kl| / δ`
    pub orthonormality_ratio: Ratio,
    /// `max_k ‖v̄_k - v̄'_k‖ / δ`
    pub gram_schmidt_ratio: Ratio,
    pub gram_condition: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RigidStability {
    pub motion: RigidMotion,
    pub l2_ratio: Ratio,
    pub sup_ratio: Ratio,
    /// `‖Φ₂ - OΦ₁‖_{g₁,n+1,p} / δ`
    pub sobolev_ratio: Ratio,
    pub singular_values: [f64; 3],
    pub residual_l2: f64,
    pub spot_check: Option<SpotCheck>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub delta: f64,
    pub p: f64,
    pub factors: FactorStability,
    pub projection: ProjectionStability,
    pub rigid: RigidStability,
    /// Leading eigenvalues of both round metrics.
    pub spectra: [Vec<f64>; 2],
    pub warnings: Vec<String>,
    /// Present when ceilings were configured.
    pub pass: Option<bool>,
}

/// Uniformization of a conformal metric normalized at `q`: `log Ω` at the
/// nodes, its expansion and the Möbius factor of the round metric `Ω⁻²g`.
struct Normalized {
    log_omega: Vec<f64>,
    log_q: Vec<f64>,
    residual: (f64, f64),
}

fn normalized(sphere: &Sphere, g: &ConformalMetric, q: Basepoint) -> Result<Normalized> {
    let (u, params): (Coeffs, MobiusParams) = normalize_at(sphere, &g.log_omega, q)?;
    let w = sphere.synthesize(&g.log_omega)?;
    let log_q: Vec<f64> = sphere.grid.position.iter().map(|&x| params.log_q(x).0).collect();
    Ok(Normalized {
        log_omega: w.iter().zip(&log_q).map(|(w, l)| w - l).collect(),
        residual: normalization_residual(&u, q),
        log_q,
    })
}

fn spectral_tail(sphere: &Sphere, values: &[f64], top: usize) -> Result<f64> {
    let c = sphere.analyze(values, sphere.bandlimit())?;
    let cut = sphere.bandlimit().saturating_sub(top);
    let (mut hi, mut all) = (0.0, 0.0);
    for (l, _, v) in c.iter() {
        all += v * v;
        if l > cut {
            hi += v * v;
        }
    }
    // round-off differences have no meaningful tail
    Ok(if all > 1e-20 { (hi / all).sqrt() } else { 0.0 })
}

/// Uniformize both metrics at `q`, compare the conformal factors and round
/// metrics, and align the first-eigenspace embeddings of the round metrics.
pub fn stability_experiment(
    sphere: &Sphere,
    g1: &ConformalMetric,
    g2: &ConformalMetric,
    q: Basepoint,
    opts: &StabilityOptions,
) -> Result<StabilityReport> {
    let four_pi = 4.0 * std::f64::consts::PI;
    let area = g1.area(sphere)?;
    if (area - four_pi).abs() > opts.area_tol * four_pi {
        return Err(Error::InvalidArgument(format!(
            "first metric must have area 4π, has {area}"
        )));
    }
    let sg1 = SphereMetric::Conformal(g1.clone());
    let sg2 = SphereMetric::Conformal(g2.clone());
    let delta = metric_distance(sphere, &sg1, &sg2, opts.n, opts.p)?;
    if delta >= opts.delta0 {
        return Err(Error::DistanceTooLarge {
            delta,
            delta0: opts.delta0,
        });
    }
    let mut warnings = Vec::new();
    let n1 = normalized(sphere, g1, q)?;
    let n2 = normalized(sphere, g2, q)?;
    let ctx1 = MetricContext::from_metric(sphere, &sg1)?;

    let dlog: Vec<f64> = n2.log_omega.iter().zip(&n1.log_omega).map(|(a, b)| a - b).collect();
    let sup_dlog = dlog.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let sob_dlog = sobolev_norm_ctx(sphere, &ctx1, &Tensor::scalar(dlog.clone()), 2, opts.p, true)?;
    let dq: Vec<f64> = n2
        .log_q
        .iter()
        .zip(&n1.log_q)
        .map(|(a, b)| (2.0 * a).exp() - (2.0 * b).exp())
        .collect();
    let round_diff = PerturbedMetric {
        h11: dq.clone(),
        h12: vec![0.0; dq.len()],
        h22: dq,
    };
    let round_norm = sobolev_norm_ctx(sphere, &ctx1, &round_diff.h_tensor(), 2, opts.p, true)?;
    let factors = FactorStability {
        sup_log_ratio: Ratio::new(sup_dlog, delta),
        sobolev_log_ratio: Ratio::new(sob_dlog, delta),
        round_metric_ratio: Ratio::new(round_norm, delta),
        normalization: [n1.residual, n2.residual],
    };

    let count = opts.eigen_count.max(5);
    let e1 = galerkin_spectrum_weights(sphere, &MetricWeights::conformal(&n1.log_q), count)?;
    let e2 = galerkin_spectrum_weights(sphere, &MetricWeights::conformal(&n2.log_q), count)?;
    let v = e1.first_cluster_fields()?;
    let vbar = [
        project_first_eigenspace(&v[0], &e2)?,
        project_first_eigenspace(&v[1], &e2)?,
        project_first_eigenspace(&v[2], &e2)?,
    ];
    let mut proj = 0.0_f64;
    for k in 0..3 {
        let mut d = v[k].clone();
        d.add_scaled(&vbar[k], -1.0);
        proj = proj.max(e2.norm(&d) / e2.norm(&v[k]));
    }
    let gs = gram_schmidt(&vbar, &e2)?;
    let projection = ProjectionStability {
        projection_ratio: Ratio::new(proj, delta),
        orthonormality_ratio: Ratio::new(gs.defect, delta),
        gram_schmidt_ratio: Ratio::new(gs.deviation, delta),
        gram_condition: gs.condition,
    };

    let phi1 = build_embedding(sphere, &v)?;
    let phi2 = build_embedding(sphere, &gs.basis)?;
    let weights: Vec<f64> = sphere
        .grid
        .node_weights
        .iter()
        .zip(ctx1.density())
        .map(|(a, b)| a * b)
        .collect();
    let fit = fit_rigid_motion(&phi1, &phi2, &weights)?;
    let fitted = phi1.transformed(&fit.motion.matrix);
    let diff: Vec<Tensor> = (0..3)
        .map(|a| {
            Tensor::scalar(
                phi2.values[a]
                    .iter()
                    .zip(&fitted.values[a])
                    .map(|(x, y)| x - y)
                    .collect(),
            )
        })
        .collect();
    let order = opts.n + 1;
    for (a, t) in diff.iter().enumerate() {
        let tail = spectral_tail(sphere, &t.comps()[0], order + 1)?;
        if tail > 1e-6 {
            warnings.push(format!(
                "component {a} of Φ₂ - OΦ₁ has relative spectral tail {tail:.2e}; \
                 its order-{order} derivatives are not resolved"
            ));
        }
    }
    let sob_rigid = sobolev_norm_multi(sphere, &ctx1, &diff, order, opts.p, true)?;
    let spot_check = (opts.spot_check_trials > 0).then(|| {
        let m = ProcrustesMoments::new(&phi1, &phi2, &weights);
        procrustes_spot_check(&m, &fit.motion, opts.spot_check_trials, opts.spot_check_seed)
    });
    let rigid = RigidStability {
        motion: fit.motion,
        l2_ratio: Ratio::new(fit.residual_l2, delta),
        sup_ratio: Ratio::new(fit.residual_sup, delta),
        sobolev_ratio: Ratio::new(sob_rigid, delta),
        singular_values: fit.singular_values,
        residual_l2: fit.residual_l2,
        spot_check,
    };
    let pass = opts.ceilings.map(|c| {
        let ok = |r: Ratio, lim: f64| r.value().is_none_or(|v| v <= lim);
        ok(factors.sup_log_ratio, c.log_factor)
            && ok(factors.sobolev_log_ratio, c.log_factor)
            && ok(factors.round_metric_ratio, c.round_metric)
            && ok(rigid.l2_ratio, c.rigid)
            && ok(rigid.sobolev_ratio, c.rigid)
    });
    Ok(StabilityReport {
        delta,
        p: opts.p,
        factors,
        projection,
        rigid,
        spectra: [e1.eigenvalues.clone(), e2.eigenvalues.clone()],
        warnings,
        pass,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsometricPairReport {
    /// `sup |log Ω₂ - log Ω₁ ∘ R|`
    pub log_factor_mismatch: f64,
    pub motion: RigidMotion,
    /// Weighted `L²` and sup norms of `Φ₂ - O(Φ₁ ∘ R)`.
    pub residual_l2: f64,
    pub residual_sup: f64,
}

/// For `g₂ = R*g₁` with the basepoint carried along (`q₂ = Rᵀq`), the
/// normalized factors satisfy `Ω₂ = Ω₁ ∘ R` and the embeddings satisfy
/// `Φ₂ = O(Φ₁ ∘ R)` for some `O ∈ O(3)`.
pub fn isometric_pair_check(
    sphere: &Sphere,
    g1: &ConformalMetric,
    rotation: &[[f64; 3]; 3],
    q: Basepoint,
    eigen_count: usize,
) -> Result<IsometricPairReport> {
    let g1q = ConformalMetric::new(g1.log_omega.clone(), q);
    let g2 = g1q.pullback(sphere, rotation)?;
    let q2 = g2.basepoint;
    let n1 = normalized(sphere, &g1q, q)?;
    let n2 = normalized(sphere, &g2, q2)?;
    let mut mismatch = 0.0_f64;
    let c1 = sphere.analyze(&n1.log_omega, sphere.max_degree())?;
    for (k, x) in sphere.grid.position.iter().enumerate() {
        let rx: [f64; 3] = std::array::from_fn(|i| (0..3).map(|j| rotation[i][j] * x[j]).sum());
        let v = eval_points_many(&[&c1], rx)[0].value;
        mismatch = mismatch.max((n2.log_omega[k] - v).abs());
    }
    let count = eigen_count.max(5);
    let e1 = galerkin_spectrum_weights(sphere, &MetricWeights::conformal(&n1.log_q), count)?;
    let e2 = galerkin_spectrum_weights(sphere, &MetricWeights::conformal(&n2.log_q), count)?;
    let phi1 = build_embedding(sphere, &e1.first_cluster_fields()?)?.compose_rotation(sphere, rotation);
    let phi2 = build_embedding(sphere, &e2.first_cluster_fields()?)?;
    let dens = g2.log_omega_values(sphere)?;
    let weights: Vec<f64> = sphere
        .grid
        .node_weights
        .iter()
        .zip(&dens)
        .map(|(a, u)| a * (2.0 * u).exp())
        .collect();
    let fit = fit_rigid_motion(&phi1, &phi2, &weights)?;
    Ok(IsometricPairReport {
        log_factor_mismatch: mismatch,
        motion: fit.motion,
        residual_l2: fit.residual_l2,
        residual_sup: fit.residual_sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::rotation_matrix;

    fn round_weights(n: usize) -> MetricWeights {
        MetricWeights::conformal(&vec![0.0; n])
    }

    #[test]
    fn round_spectrum() {
        let s = Sphere::with_bandlimit(16).unwrap();
        let e = galerkin_spectrum_weights(&s, &round_weights(s.len()), 36).unwrap();
        let mut i = 0;
        for l in 0..6 {
            for _ in 0..(2 * l + 1) {
                let want = (l * (l + 1)) as f64;
                assert!((e.eigenvalues[i] - want).abs() < 1e-10, "{i} {}", e.eigenvalues[i]);
                i += 1;
            }
        }
        assert!(e.galerkin_residual < 1e-8);
        for a in 0..4 {
            for b in 0..4 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((e.inner(&e.eigenfields[a], &e.eigenfields[b]) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_scaling() {
        let s = Sphere::with_bandlimit(10).unwrap();
        let c = 0.3;
        let e = galerkin_spectrum_weights(&s, &MetricWeights::conformal(&vec![c; s.len()]), 9).unwrap();
        for (mu, l) in e.eigenvalues.iter().zip([0, 1, 1, 1, 2, 2, 2, 2, 2]) {
            let want = (l * (l + 1)) as f64 * (-2.0 * c).exp();
            assert!((mu - want).abs() < 1e-10);
        }
    }

    #[test]
    fn perturbed_matches_conformal() {
        let s = Sphere::with_bandlimit(10).unwrap();
        let mut u = Coeffs::zeros(10);
        u.set(2, 1, 0.05);
        u.set(3, -2, 0.03);
        let g = ConformalMetric::new(u, Basepoint::NORTH);
        let a = galerkin_spectrum(&s, &SphereMetric::Conformal(g.clone()), 9).unwrap();
        let p = g.to_perturbed(&s).unwrap();
        let b = galerkin_spectrum(&s, &SphereMetric::Perturbed(p), 9).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!(a.first_cluster().is_ok());
    }

    #[test]
    fn cluster_and_projection() {
        let s = Sphere::with_bandlimit(8).unwrap();
        let e = galerkin_spectrum_weights(&s, &round_weights(s.len()), 9).unwrap();
        let y10 = Coeffs::unit(8, 1, 0);
        let p = project_first_eigenspace(&y10, &e).unwrap();
        let mut d = p.clone();
        d.add_scaled(&y10, -1.0);
        assert!(d.norm_sq().sqrt() < 1e-12);
        let y20 = Coeffs::unit(8, 2, 0);
        assert!(project_first_eigenspace(&y20, &e).unwrap().norm_sq() < 1e-24);
    }

    #[test]
    fn cluster_requires_gap() {
        let s = Sphere::with_bandlimit(6).unwrap();
        let e = galerkin_spectrum_weights(&s, &round_weights(s.len()), 4).unwrap();
        assert!(matches!(e.first_cluster(), Err(Error::ClusterNotSeparated(_))));
    }

    #[test]
    fn gram_schmidt_cases() {
        let s = Sphere::with_bandlimit(8).unwrap();
        let e = galerkin_spectrum_weights(&s, &round_weights(s.len()), 9).unwrap();
        let basis = [Coeffs::unit(8, 1, -1), Coeffs::unit(8, 1, 0), Coeffs::unit(8, 1, 1)];
        let gs = gram_schmidt(&basis, &e).unwrap();
        assert!(gs.defect < 1e-12 && gs.deviation < 1e-12);
        // Gram matrix I + δE
        let d = 0.01;
        let mut skew = basis.clone();
        skew[1].add_scaled(&basis[0], d);
        skew[2].add_scaled(&basis[1], -d);
        let gs = gram_schmidt(&skew, &e).unwrap();
        for k in 0..3 {
            for l in 0..3 {
                let want = if k == l { 1.0 } else { 0.0 };
                assert!((e.inner(&gs.basis[k], &gs.basis[l]) - want).abs() < 1e-12);
            }
        }
        assert!(gs.deviation < 2.0 * d && gs.deviation > 0.1 * d);
        let mut bad = basis.clone();
        bad[2] = basis[1].clone();
        bad[2].add_scaled(&basis[2], 1e-3);
        assert!(matches!(gram_schmidt(&bad, &e), Err(Error::IllConditioned(_))));
    }

    fn round_embedding(s: &Sphere) -> Embedding {
        let e = galerkin_spectrum_weights(s, &round_weights(s.len()), 9).unwrap();
        build_embedding(s, &e.first_cluster_fields().unwrap()).unwrap()
    }

    #[test]
    fn round_embedding_is_isometric() {
        let s = Sphere::with_bandlimit(12).unwrap();
        let phi = round_embedding(&s);
        assert!(phi.unit_deviation() < 1e-10);
        let h = phi.pullback_metric(&s).unwrap();
        let m = h
            .h11
            .iter()
            .chain(&h.h12)
            .chain(&h.h22)
            .fold(0.0_f64, |a, v| a.max(v.abs()));
        assert!(m < 1e-9);
        assert!((phi.image_area(&s).unwrap() - 4.0 * std::f64::consts::PI).abs() < 1e-8);
    }

    #[test]
    fn procrustes_recovers_rotation() {
        let s = Sphere::with_bandlimit(8).unwrap();
        let phi = round_embedding(&s);
        let r = rotation_matrix([0.3, -0.5, 0.8], 0.7);
        let w = s.grid.node_weights.clone();
        let same = fit_rigid_motion(&phi, &phi, &w).unwrap();
        assert!((to_mat(&same.motion.matrix) - Matrix3::identity()).amax() < 1e-12);
        let fit = fit_rigid_motion(&phi, &phi.transformed(&r), &w).unwrap();
        assert!((to_mat(&fit.motion.matrix) - to_mat(&r)).amax() < 1e-10);
        assert!(fit.residual_l2 < 1e-10 && fit.residual_sup < 1e-10);
        assert!(fit.motion.orthogonality_defect() < 1e-12);
        // reflections are allowed
        let mut refl = r;
        refl.iter_mut().for_each(|row| row[2] = -row[2]);
        let fit = fit_rigid_motion(&phi, &phi.transformed(&refl), &w).unwrap();
        assert_eq!(fit.motion.det, -1.0);
        assert!(fit.residual_l2 < 1e-10);
    }

    #[test]
    fn procrustes_equivariance() {
        let s = Sphere::with_bandlimit(8).unwrap();
        let phi = round_embedding(&s);
        let w = s.grid.node_weights.clone();
        // a non-rigid target
        let mut target = phi.clone();
        for k in 0..target.nodes() {
            let x = phi.point(k);
            target.values[0][k] += 0.05 * x[1] * x[2];
            target.values[2][k] -= 0.03 * x[0];
        }
        let o = fit_rigid_motion(&phi, &target, &w).unwrap().motion.matrix;
        let r = rotation_matrix([1.0, 2.0, -0.5], 1.1);
        let o2 = fit_rigid_motion(&phi.transformed(&r), &target, &w)
            .unwrap()
            .motion
            .matrix;
        let want = to_mat(&o) * to_mat(&r).transpose();
        assert!((to_mat(&o2) - want).amax() < 1e-10);
        let m = ProcrustesMoments::new(&phi, &target, &w);
        let fit = fit_rigid_motion(&phi, &target, &w).unwrap();
        assert!(procrustes_spot_check(&m, &fit.motion, 20_000, 7).optimal);
        let direct = fit.residual_l2 * fit.residual_l2;
        assert!((m.residual_sq(&to_mat(&o)) - direct).abs() < 1e-10);
    }

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut dets = [0, 0];
        for _ in 0..200 {
            let o = random_orthogonal(&mut rng);
            assert!((o.transpose() * o - Matrix3::identity()).amax() < 1e-12);
            dets[(o.determinant() > 0.0) as usize] += 1;
        }
        assert!(dets[0] > 50 && dets[1] > 50);
    }

    #[test]
    fn degenerate_embedding_rejected() {
        let s = Sphere::with_bandlimit(6).unwrap();
        let mut phi = round_embedding(&s);
        phi.values[2].iter_mut().for_each(|v| *v = 0.0);
        let r = fit_rigid_motion(&phi, &phi, &s.grid.node_weights);
        assert!(matches!(r, Err(Error::DegenerateEmbedding(_))));
    }

    fn area_normalized(mut u: Coeffs, s: &Sphere) -> ConformalMetric {
        let a = ConformalMetric::new(u.clone(), Basepoint::NORTH).area(s).unwrap();
        let shift = 0.5 * (4.0 * std::f64::consts::PI / a).ln();
        u.set(0, 0, u.get(0, 0) + shift * (4.0 * std::f64::consts::PI).sqrt());
        ConformalMetric::new(u, Basepoint::NORTH)
    }

    #[test]
    fn identical_pair_is_exact() {
        let s = Sphere::with_bandlimit(8).unwrap();
        let mut u = Coeffs::zeros(8);
        u.set(2, 0, 0.03);
        u.set(3, 1, -0.02);
        let g = area_normalized(u, &s);
        let q = Basepoint::new(1.0, 0.4);
        let rep = stability_experiment(&s, &g, &g, q, &Default::default()).unwrap();
        assert_eq!(rep.delta, 0.0);
        assert!(rep.factors.sup_log_ratio.is_exact());
        assert!(rep.factors.round_metric_ratio.is_exact());
        assert!(rep.projection.projection_ratio.is_exact());
        assert!(rep.rigid.l2_ratio.is_exact());
        let n = rep.factors.normalization;
        assert!(n[0].0.max(n[0].1) < 1e-9);
    }

    #[test]
    fn experiment_rejects_bad_input() {
        let s = Sphere::with_bandlimit(6).unwrap();
        let mut u = Coeffs::zeros(6);
        u.set(0, 0, 0.5);
        let g = ConformalMetric::new(u, Basepoint::NORTH);
        let r = stability_experiment(&s, &g, &g, Basepoint::NORTH, &Default::default());
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
        let g1 = ConformalMetric::round(6);
        let mut v = Coeffs::zeros(6);
        v.set(2, 0, 0.5);
        let g2 = ConformalMetric::new(v, Basepoint::NORTH);
        let r = stability_experiment(&s, &g1, &g2, Basepoint::NORTH, &Default::default());
        assert!(matches!(r, Err(Error::DistanceTooLarge { .. })));
    }

    #[test]
    fn isometric_pair_recovered() {
        let s = Sphere::with_bandlimit(12).unwrap();
        let mut u = Coeffs::zeros(12);
        u.set(2, 1, 0.04);
        u.set(3, -1, 0.02);
        u.set(1, 0, 0.03);
        let g = ConformalMetric::new(u, Basepoint::NORTH);
        let r = rotation_matrix([0.2, 1.0, 0.4], 0.9);
        let rep = isometric_pair_check(&s, &g, &r, Basepoint::new(0.8, 2.0), 9).unwrap();
        assert!(rep.log_factor_mismatch < 1e-10, "{rep:?}");
        assert!(rep.residual_l2 < 1e-10 && rep.residual_sup < 1e-10, "{rep:?}");
    }
}
