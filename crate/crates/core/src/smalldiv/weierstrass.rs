//! Quantitative Weierstrass preparation for `f(z,λ) = p_a(z) + r(z)` with
//! `p_a` monic of degree `d` and `r` small on `|z| ≤ δ`.
//!
//! The output is a monic `p_b` and an analytic `Q` with `f = (1+Q)p_b` on
//! `|z| < δ/4`. Construction runs in two contraction stages. The first uses
//! only the Taylor part `Σ_{j<B₂} c_j z^j` of `r` integrated on `|s| = 1`. The
//! second adds the tail `r̃ = r − Taylor` on a circle `|s| = α` chosen away
//! from the roots of the first-stage polynomial. Each stage checks its
//! contraction certificates before iterating.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// An analytic family `f(z, λ) = z^d + Σ a_k(λ) z^k + r(z, λ)`.
pub trait Preparable {
    fn degree(&self) -> usize;
    /// `a_0(λ), …, a_{d−1}(λ)`
    fn polynomial(&self, lambda: &[f64]) -> Vec<Complex64>;
    fn remainder(&self, z: Complex64, lambda: &[f64]) -> Complex64;

    fn value(&self, z: Complex64, lambda: &[f64]) -> Complex64 {
        poly_eval_monic(&self.polynomial(lambda), z) + self.remainder(z, lambda)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PreparationSettings {
    pub delta: f64,
    /// `B₁`; `B₂` is the smallest integer with `(6d)^{d(B₁+1)} ≤ B₂!` and `d(B₁+1) ≤ B₂`
    pub b1: usize,
    pub quadrature_nodes: usize,
    /// radial and angular resolution of the verification grid in `|z| < δ/4`
    pub verify_radial: usize,
    pub verify_angular: usize,
    pub fixed_point_tol: f64,
}

impl Default for PreparationSettings {
    fn default() -> Self {
        Self {
            delta: 1.0,
            b1: 1,
            quadrature_nodes: 256,
            verify_radial: 8,
            verify_angular: 32,
            fixed_point_tol: 1e-15,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PreparationSample {
    pub lambda: Vec<f64>,
    /// `b_0 … b_{d−1}`
    pub b: Vec<Complex64>,
    pub epsilon: f64,
    pub q_max: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PreparationResult {
    pub degree: usize,
    pub b2: usize,
    /// radius of the second contour, picked at the reference parameter
    pub alpha: f64,
    pub samples: Vec<PreparationSample>,
    pub max_residual: f64,
    pub max_q: f64,
    pub max_b: f64,
    pub max_epsilon: f64,
}

impl PreparationResult {
    /// `sup |Q| ≤ 1/10` and `|b_j| ≤ 1/(2d)`
    pub fn certified(&self) -> bool {
        self.max_q <= 0.1 && self.max_b <= 0.5 / self.degree as f64
    }
}

fn poly_eval_monic(a: &[Complex64], z: Complex64) -> Complex64 {
    a.iter().rev().fold(Complex64::new(1.0, 0.0), |acc, &c| acc * z + c)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Smallest admissible `B₂` for degree `d` and the given `B₁`.
pub fn minimal_b2(d: usize, b1: usize) -> usize {
    let need = (d * (b1 + 1)) as f64 * ((6 * d) as f64).ln();
    let mut b2 = d * (b1 + 1);
    while ln_factorial(b2) < need {
        b2 += 1;
    }
    b2
}

fn hyp(site: impl Into<String>, detail: String) -> Error {
    Error::Hypothesis {
        site: site.into(),
        detail,
    }
}

/// Trapezoid nodes `s_i = ρ e^{iθ_i}`; `∮ g ds/2πi ≈ (1/M) Σ g(s_i) s_i`.
fn circle(radius: f64, m: usize) -> Vec<Complex64> {
    (0..m)
        .map(|i| Complex64::from_polar(radius, std::f64::consts::TAU * i as f64 / m as f64))
        .collect()
}

/// Durand–Kerner iteration for the roots of a monic polynomial.
pub fn monic_roots(a: &[Complex64]) -> Vec<Complex64> {
    let d = a.len();
    if d == 0 {
        return vec![];
    }
    let bound = 1.0 + a.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..d).map(|k| seed.powu(k as u32) * bound * 0.5).collect();
    for _ in 0..500 {
        let mut delta = 0.0f64;
        for i in 0..d {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..d {
                if j != i {
                    den *= z[i] - z[j];
                }
            }
            let step = poly_eval_monic(a, z[i]) / den;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 * bound {
            break;
        }
    }
    z
}

/// Precomputed contour data for one parameter value.
struct Contours {
    d: usize,
    /// unit circle nodes with the Taylor part evaluated on them
    unit: Vec<(Complex64, Complex64)>,
    /// `|s| = α` nodes with `r̃` evaluated on them (empty in stage one)
    inner: Vec<(Complex64, Complex64)>,
}

impl Contours {
    /// `q_k(b,s) = s^{d−1−k} + Σ_{l=k+1}^{d−1} b_l s^{l−1−k}`
    fn q(&self, b: &[Complex64], k: usize, s: Complex64) -> Complex64 {
        let mut acc = Complex64::new(1.0, 0.0);
        for l in (k + 1..self.d).rev() {
            acc = acc * s + b[l];
        }
        acc
    }

    /// `R_k(b)` together with its Jacobian `∂R_k/∂b_l`.
    fn r_and_jacobian(&self, b: &[Complex64]) -> (DVector<Complex64>, DMatrix<Complex64>) {
        let d = self.d;
        let mut r = DVector::zeros(d);
        let mut jac = DMatrix::zeros(d, d);
        for nodes in [&self.unit, &self.inner] {
            if nodes.is_empty() {
                continue;
            }
            let w = 1.0 / nodes.len() as f64;
            for &(s, g) in nodes.iter() {
                let p = poly_eval_monic(b, s);
                let gs = g * s * w;
                let mut spow = vec![Complex64::new(1.0, 0.0); d + 1];
                for i in 1..=d {
                    spow[i] = spow[i - 1] * s;
                }
                for k in 0..d {
                    let q = self.q(b, k, s);
                    r[k] += gs * q / p;
                    for l in 0..d {
                        let dq = if l > k { spow[l - 1 - k] } else { Complex64::new(0.0, 0.0) };
                        jac[(k, l)] += gs * (dq * p - q * spow[l]) / (p * p);
                    }
                }
            }
        }
        (r, jac)
    }

    fn q_of_z(&self, b: &[Complex64], z: Complex64) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for nodes in [&self.unit, &self.inner] {
            if nodes.is_empty() {
                continue;
            }
            let w = 1.0 / nodes.len() as f64;
            for &(s, g) in nodes.iter() {
                total += g * s * w / (poly_eval_monic(b, s) * (s - z));
            }
        }
        total
    }
}

fn cmax(v: &DVector<Complex64>) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn op_inf(m: &DMatrix<Complex64>) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|c| c.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `x = b − a − R(b)` around `x0` with the simplified Newton map
/// `T(x) = x − DF(x0)⁻¹F(x)`, checking `|F(x0)| ≤ 2η/5` and `‖DF − I‖ ≤ 1/5`
/// at every iterate. Returns the fixed point.
fn contract(
    c: &Contours,
    a: &[Complex64],
    x0: &[Complex64],
    eta: f64,
    tol: f64,
    stage: &str,
) -> Result<Vec<Complex64>> {
    let d = c.d;
    let eval = |x: &[Complex64]| {
        let (r, jr) = c.r_and_jacobian(x);
        let f = DVector::from_fn(d, |k, _| x[k] - a[k] - r[k]);
        let df = DMatrix::<Complex64>::identity(d, d) - jr;
        (f, df)
    };
    let (f0, df0) = eval(x0);
    let f0_norm = cmax(&f0);
    if f0_norm > 0.4 * eta {
        return Err(hyp(stage, format!("|F(x0)| = {f0_norm:.3e} exceeds 2 eta/5 = {:.3e}", 0.4 * eta)));
    }
    let inv = df0
        .clone()
        .try_inverse()
        .ok_or_else(|| hyp(stage, "DF(x0) is singular".into()))?;
    let mut x = DVector::from_column_slice(x0);
    let mut f = f0;
    for _ in 0..200 {
        let (_, df) = eval(x.as_slice());
        let defect = op_inf(&(df - DMatrix::identity(d, d)));
        if defect > 0.2 {
            return Err(hyp(stage, format!("|DF - I| = {defect:.3e} exceeds 1/5")));
        }
        let step = &inv * &f;
        x -= &step;
        f = eval(x.as_slice()).0;
        if cmax(&step) <= tol {
            break;
        }
    }
    let moved = (0..d).map(|k| (x[k] - x0[k]).norm()).fold(0.0, f64::max);
    if moved > 2.5 * f0_norm * (1.0 + 1e-9) + 1e-300 {
        return Err(hyp(stage, format!("fixed point moved {moved:.3e}, more than 5|F(x0)|/2")));
    }
    Ok(x.iter().copied().collect())
}

/// Taylor coefficients `c_0 … c_{B₂−1}` of `r` at 0 from its values on `|s| = ρ`.
fn taylor_coefficients(values: &[(Complex64, Complex64)], rho: f64, count: usize) -> Vec<Complex64> {
    let m = values.len() as f64;
    (0..count)
        .map(|j| {
            let sum: Complex64 = values.iter().map(|&(s, r)| r * (s / rho).powu(j as u32).conj()).sum();
            sum / m / rho.powi(j as i32)
        })
        .collect()
}

fn taylor_eval(c: &[Complex64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &x| acc * z + x)
}

struct StageOne {
    taylor: Vec<Complex64>,
    b_tilde: Vec<Complex64>,
    epsilon: f64,
}

fn stage_one<F: Preparable + ?Sized>(
    f: &F,
    lambda: &[f64],
    set: &PreparationSettings,
    b2: usize,
) -> Result<(StageOne, Contours)> {
    let d = f.degree();
    let site = format!("lambda = {lambda:?}");
    let a = f.polynomial(lambda);
    if a.len() != d {
        return Err(Error::Dimension {
            expected: d,
            found: a.len(),
        });
    }
    let cap = 1.0 / (8.0 * d as f64);
    if let Some((j, aj)) = a.iter().enumerate().find(|(_, c)| c.norm() > cap) {
        return Err(hyp(site, format!("|a_{j}| = {:.3e} exceeds 1/(8d) = {cap:.3e}", aj.norm())));
    }
    let m = set.quadrature_nodes;
    let outer: Vec<(Complex64, Complex64)> = circle(set.delta, m)
        .into_iter()
        .map(|s| (s, f.remainder(s, lambda)))
        .collect();
    let epsilon = outer.iter().map(|(_, r)| r.norm()).fold(0.0, f64::max);
    if !epsilon.is_finite() || 200.0 * d as f64 * epsilon >= 1.0 {
        return Err(hyp(site, format!("remainder size {epsilon:.3e} violates 200 d eps < 1")));
    }
    let taylor = taylor_coefficients(&outer, set.delta, b2);
    let unit = circle(1.0, m).into_iter().map(|s| (s, taylor_eval(&taylor, s))).collect();
    let contours = Contours { d, unit, inner: vec![] };
    let b_tilde = contract(&contours, &a, &a, 0.25 / d as f64, set.fixed_point_tol, "stage one")
        .map_err(|e| relabel(e, &site))?;
    Ok((
        StageOne {
            taylor,
            b_tilde,
            epsilon,
        },
        contours,
    ))
}

fn relabel(e: Error, site: &str) -> Error {
    match e {
        Error::Hypothesis { site: stage, detail } => Error::Hypothesis {
            site: site.to_string(),
            detail: format!("{stage}: {detail}"),
        },
        other => other,
    }
}

/// Picks `α ∈ (δ/2, δ)` maximising the gap to the root moduli; the gap
/// must exceed `δ/(6d)`.
fn choose_alpha(roots: &[Complex64], delta: f64, d: usize) -> Result<f64> {
    let gap = |alpha: f64| roots.iter().map(|z| (z.norm() - alpha).abs()).fold(f64::INFINITY, f64::min);
    let steps = 512;
    let best = (1..steps)
        .map(|i| delta * (0.5 + 0.5 * i as f64 / steps as f64))
        .max_by(|x, y| gap(*x).total_cmp(&gap(*y)))
        .unwrap();
    let need = delta / (6.0 * d as f64);
    if gap(best) <= need {
        return Err(hyp("alpha", format!("no contour radius in (delta/2, delta) keeps distance {need:.3e} from the roots")));
    }
    Ok(best)
}

/// Runs the preparation at every parameter in `lambdas`. The second contour
/// radius is chosen once from the first-stage roots at `lambda_ref`.
pub fn weierstrass_prepare<F: Preparable + ?Sized>(
    f: &F,
    lambda_ref: &[f64],
    lambdas: &[Vec<f64>],
    set: &PreparationSettings,
) -> Result<PreparationResult> {
    let d = f.degree();
    if d == 0 {
        return Err(Error::InvalidInput("degree must be at least 1".into()));
    }
    if !(set.delta > 0.0 && set.delta <= 1.0) {
        return Err(hyp("delta", format!("delta = {} must lie in (0, 1]", set.delta)));
    }
    if set.quadrature_nodes < 16 {
        return Err(Error::InvalidInput("at least 16 quadrature nodes".into()));
    }
    let b2 = minimal_b2(d, set.b1);
    let (reference, _) = stage_one(f, lambda_ref, set, b2)?;
    let alpha = choose_alpha(&monic_roots(&reference.b_tilde), set.delta, d)?;
    let eta2 = 0.25 / d as f64 * (set.delta / (6.0 * d as f64)).powi(d as i32);

    let mut samples = Vec::with_capacity(lambdas.len());
    for lambda in lambdas {
        let site = format!("lambda = {lambda:?}");
        let (one, mut contours) = stage_one(f, lambda, set, b2)?;
        let a = f.polynomial(lambda);
        contours.inner = circle(alpha, set.quadrature_nodes)
            .into_iter()
            .map(|s| (s, f.remainder(s, lambda) - taylor_eval(&one.taylor, s)))
            .collect();
        let b = contract(&contours, &a, &one.b_tilde, eta2, set.fixed_point_tol, "stage two")
            .map_err(|e| relabel(e, &site))?;

        // f − (1+Q)p_b on a polar grid inside |z| < δ/4
        let mut residual = 0.0f64;
        let mut q_max = 0.0f64;
        for i in 0..set.verify_radial {
            let rad = 0.25 * set.delta * (i as f64 + 0.5) / set.verify_radial as f64;
            for z in circle(rad, set.verify_angular) {
                let q = contours.q_of_z(&b, z);
                let prepared = (Complex64::new(1.0, 0.0) + q) * poly_eval_monic(&b, z);
                residual = residual.max((f.value(z, lambda) - prepared).norm());
                q_max = q_max.max(q.norm());
            }
        }
        samples.push(PreparationSample {
            lambda: lambda.clone(),
            b,
            epsilon: one.epsilon,
            q_max,
            residual,
        });
    }
    let fold = |g: fn(&PreparationSample) -> f64| samples.iter().map(g).fold(0.0, f64::max);
    let max_residual = fold(|s| s.residual);
    let max_q = fold(|s| s.q_max);
    let max_b = fold(|s| s.b.iter().map(|c| c.norm()).fold(0.0, f64::max));
    let max_epsilon = fold(|s| s.epsilon);
    Ok(PreparationResult {
        degree: d,
        b2,
        alpha,
        samples,
        max_residual,
        max_q,
        max_b,
        max_epsilon,
    })
}

/// `f(z,λ) = z^d + λ_0 + ε·g(z)` style test family built from closures.
pub struct FnFamily<P, R>
where
    P: Fn(&[f64]) -> Vec<Complex64>,
    R: Fn(Complex64, &[f64]) -> Complex64,
{
    pub degree: usize,
    pub poly: P,
    pub rem: R,
}

impl<P, R> Preparable for FnFamily<P, R>
where
    P: Fn(&[f64]) -> Vec<Complex64>,
    R: Fn(Complex64, &[f64]) -> Complex64,
{
    fn degree(&self) -> usize {
        self.degree
    }
    fn polynomial(&self, lambda: &[f64]) -> Vec<Complex64> {
        (self.poly)(lambda)
    }
    fn remainder(&self, z: Complex64, lambda: &[f64]) -> Complex64 {
        (self.rem)(z, lambda)
    }
}

/// The demo family `f(z,λ) = z² + λ + ε cos(z)`.
pub fn demo_family(eps: f64) -> impl Preparable {
    FnFamily {
        degree: 2,
        poly: |l: &[f64]| vec![Complex64::new(l[0], 0.0), Complex64::new(0.0, 0.0)],
        rem: move |z: Complex64, _: &[f64]| z.cos() * eps,
    }
}
