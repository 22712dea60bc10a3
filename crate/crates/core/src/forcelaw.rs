//! Force laws `F(y) = Σ α_k (y+b)^k` and the Fourier-space nonlinearity
//! `W(u) = Σ_{k≥2} α_k u^{*k}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spaces::{convolve, seq_norm, FourierSequence, ModeGrid, ModeIndex, WeightSpec};

/// Default truncation order of the Taylor series.
pub const DEFAULT_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LawKind {
    /// `F(x) = e^x`
    Toda,
    /// `F(x) = x + x²`
    Quadratic,
    /// `F(x) = x + x³`
    Cubic,
    /// explicit coefficients
    Custom,
}

impl std::str::FromStr for LawKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toda" => Ok(LawKind::Toda),
            "quadratic" => Ok(LawKind::Quadratic),
            "cubic" => Ok(LawKind::Cubic),
            "custom" => Ok(LawKind::Custom),
            other => Err(Error::InvalidInput(format!("unknown force law '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceLaw {
    pub kind: LawKind,
    pub base_point: f64,
    /// `α_0..α_K`
    pub coefficients: Vec<f64>,
    pub radius: f64,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `n!/(n-j)!`
fn falling(n: usize, j: usize) -> f64 {
    ((n - j + 1)..=n).map(|i| i as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    falling(n, k) / factorial(k)
}

/// Coefficients of the polynomial `Σ c_i x^i` re-expanded about `x = -b`.
fn shift_polynomial(c: &[f64], b: f64) -> Vec<f64> {
    let mut out = vec![0.0; c.len()];
    for (i, &ci) in c.iter().enumerate() {
        // x^i = (s - b)^i with s = x + b
        for k in 0..=i {
            out[k] += ci * binomial(i, k) * (-b).powi((i - k) as i32);
        }
    }
    out
}

impl ForceLaw {
    pub fn builtin(kind: LawKind, b: f64, order: usize) -> Result<Self> {
        if order < 3 {
            return Err(Error::InvalidInput(format!("truncation order K = {order} must be >= 3")));
        }
        if !b.is_finite() {
            return Err(Error::InvalidInput("base point b must be finite".into()));
        }
        let mut coefficients = match kind {
            LawKind::Toda => {
                let e = (-b).exp();
                (0..=order).map(|k| e / factorial(k)).collect()
            }
            LawKind::Quadratic => shift_polynomial(&[0.0, 1.0, 1.0], b),
            LawKind::Cubic => shift_polynomial(&[0.0, 1.0, 0.0, 1.0], b),
            LawKind::Custom => {
                return Err(Error::InvalidInput(
                    "custom force laws need explicit coefficients".into(),
                ))
            }
        };
        coefficients.resize(order + 1, 0.0);
        Self::validated(kind, b, coefficients, 1.0)
    }

    /// Force law from explicit Taylor coefficients `α_0..α_K` about `-b`.
    /// The radius defaults to `min(1, ratio-test estimate)`.
    pub fn custom(b: f64, coefficients: Vec<f64>, radius: Option<f64>) -> Result<Self> {
        if coefficients.len() < 4 {
            return Err(Error::InvalidInput(format!(
                "custom law needs K >= 3 (got {} coefficients)",
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("coefficients must be finite".into()));
        }
        let radius = match radius {
            Some(r) => r,
            None => ratio_radius(&coefficients).min(1.0),
        };
        Self::validated(LawKind::Custom, b, coefficients, radius)
    }

    /// `F(x) = αx`, expanded about `-b` and padded to order 3.
    pub fn linear(alpha: f64, b: f64) -> Result<Self> {
        Self::custom(b, vec![-alpha * b, alpha, 0.0, 0.0], Some(1.0))
    }

    fn validated(kind: LawKind, b: f64, coefficients: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius <= 1.0) {
            return Err(Error::InvalidInput(format!("radius {radius} must lie in (0,1]")));
        }
        if !(coefficients[1] > 0.0) {
            return Err(Error::RestoringForce {
                alpha1: coefficients[1],
            });
        }
        Ok(ForceLaw {
            kind,
            base_point: b,
            coefficients,
            radius,
        })
    }

    pub fn alpha(&self, k: usize) -> f64 {
        self.coefficients.get(k).copied().unwrap_or(0.0)
    }

    pub fn alpha1(&self) -> f64 {
        self.coefficients[1]
    }

    /// Truncation order `K`.
    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// `F''(-b)`
    pub fn second_derivative(&self) -> f64 {
        2.0 * self.alpha(2)
    }

    /// `F'''(-b)`
    pub fn third_derivative(&self) -> f64 {
        6.0 * self.alpha(3)
    }

    /// `D_W = Σ_{k≥2} |α_k| (r/2)^{k-2}`, so that `‖W(u)‖ ≤ D_W‖u‖²` when
    /// `‖u‖ ≤ r/2` and the weight is submultiplicative.
    pub fn d_w(&self) -> f64 {
        let half = self.radius / 2.0;
        (2..=self.order())
            .map(|k| self.alpha(k).abs() * half.powi(k as i32 - 2))
            .sum()
    }

    fn check_argument(&self, y: f64) -> Result<f64> {
        let s = y + self.base_point;
        if !(s.abs() <= self.radius) {
            return Err(Error::ForceDomain {
                argument: s,
                radius: self.radius,
            });
        }
        Ok(s)
    }

    /// `F(y)` from the truncated series.
    pub fn eval(&self, y: f64) -> Result<f64> {
        let s = self.check_argument(y)?;
        Ok(self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * s + c))
    }

    /// Potential `Φ(y) = Σ α_k (y+b)^{k+1}/(k+1)`, with `Φ' = F`.
    pub fn potential(&self, y: f64) -> Result<f64> {
        let s = self.check_argument(y)?;
        let mut acc = 0.0;
        for (k, &c) in self.coefficients.iter().enumerate().rev() {
            acc = acc * s + c / (k + 1) as f64;
        }
        Ok(acc * s)
    }
}

fn ratio_radius(c: &[f64]) -> f64 {
    let mut est = f64::INFINITY;
    for k in 1..c.len() - 1 {
        if c[k] != 0.0 && c[k + 1] != 0.0 {
            est = (c[k] / c[k + 1]).abs();
        }
    }
    est
}

#[derive(Debug, Clone)]
pub struct NonlinearResidual {
    pub value: FourierSequence,
    pub input_norm: f64,
    /// Constant of the quadratic bound `‖W(u)‖ ≤ D_W‖u‖²`.
    pub d_w: f64,
}

fn check_domain(law: &ForceLaw, u: &FourierSequence, spec: &WeightSpec) -> Result<f64> {
    if spec.nu != u.nu() {
        return Err(Error::Dimension {
            expected: spec.nu,
            found: u.nu(),
        });
    }
    let norm = seq_norm(spec, u);
    let limit = law.radius / 2.0;
    if !(norm < limit) {
        return Err(Error::ConvergenceDomain { norm, limit });
    }
    Ok(norm)
}

/// Convolution powers `u^{*0} = δ_0, u^{*1}, …, u^{*kmax}`.
fn powers(u: &FourierSequence, kmax: usize) -> Result<Vec<FourierSequence>> {
    let mut out = vec![FourierSequence::pair(&ModeIndex::zero(u.nu()), 1.0)];
    for k in 1..=kmax {
        let next = if k == 1 {
            u.clone()
        } else {
            convolve(&out[k - 1], u)?
        };
        out.push(next);
    }
    Ok(out)
}

/// `W(u) = Σ_{k=2}^{K} α_k u^{*k}` by exact convolution.
pub fn apply_w(law: &ForceLaw, u: &FourierSequence, spec: &WeightSpec) -> Result<NonlinearResidual> {
    let input_norm = check_domain(law, u, spec)?;
    let pw = powers(u, law.order())?;
    let mut value = FourierSequence::zeros(u.nu());
    for (k, p) in pw.iter().enumerate().skip(2) {
        let a = law.alpha(k);
        if a != 0.0 {
            value = value.plus(&p.scaled(a))?;
        }
    }
    Ok(NonlinearResidual {
        value,
        input_norm,
        d_w: law.d_w(),
    })
}

/// Toeplitz symbol of `DW(u)`: `r = Σ_{p=2}^{K} p α_p u^{*(p−1)}`.
pub fn apply_dw(law: &ForceLaw, u: &FourierSequence) -> Result<FourierSequence> {
    let pw = powers(u, law.order() - 1)?;
    let mut r = FourierSequence::zeros(u.nu());
    for p in 2..=law.order() {
        let a = law.alpha(p);
        if a != 0.0 {
            r = r.plus(&pw[p - 1].scaled(p as f64 * a))?;
        }
    }
    Ok(r)
}

/// `D^jW(u)[y_1..y_j] = Σ_{k≥max(2,j)} k!/(k−j)! α_k u^{*(k−j)} * y_1 * … * y_j`.
/// Vanishes identically when `j > K`.
pub fn apply_djw(law: &ForceLaw, u: &FourierSequence, args: &[FourierSequence]) -> Result<FourierSequence> {
    let j = args.len();
    if j == 0 {
        return Err(Error::InvalidInput("derivative order must be >= 1".into()));
    }
    let nu = u.nu();
    for y in args {
        if y.nu() != nu {
            return Err(Error::Dimension {
                expected: nu,
                found: y.nu(),
            });
        }
    }
    if j > law.order() {
        return Ok(FourierSequence::zeros(nu));
    }
    let mut prod = args[0].clone();
    for y in &args[1..] {
        prod = convolve(&prod, y)?;
    }
    let pw = powers(u, law.order() - j)?;
    let mut out = FourierSequence::zeros(nu);
    for k in j.max(2)..=law.order() {
        let a = law.alpha(k);
        if a != 0.0 {
            let term = convolve(&pw[k - j], &prod)?;
            out = out.plus(&term.scaled(falling(k, j) * a))?;
        }
    }
    Ok(out)
}

/// `W(u)` and the symbol of `DW(u)` on a clipped box, sharing the powers
/// `u^{*k}`. Entries are exact up to products whose partial sums leave the
/// box.
pub fn nonlinear_on_grid(law: &ForceLaw, u: &ModeGrid) -> (ModeGrid, ModeGrid) {
    let mut w = ModeGrid::new(u.nu(), u.radius());
    let mut r = ModeGrid::new(u.nu(), u.radius());
    // prev holds u^{*(k-1)}
    let mut prev = u.clone();
    for k in 2..=law.order() {
        r.axpy(k as f64 * law.alpha(k), &prev);
        let cur = prev.convolve_clipped(u);
        w.axpy(law.alpha(k), &cur);
        prev = cur;
    }
    (w, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{WeightFamily, WeightSpec};

    fn e(nu: usize, j: usize) -> ModeIndex {
        ModeIndex::unit(nu, j)
    }

    fn pair(nu: usize, j: usize, a: f64) -> FourierSequence {
        FourierSequence::pair(&e(nu, j), a)
    }

    #[test]
    fn builtin_coefficients() {
        let toda = ForceLaw::builtin(LawKind::Toda, 0.0, 5).unwrap();
        let expect = [1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0, 1.0 / 120.0];
        for (a, b) in toda.coefficients.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let quad = ForceLaw::builtin(LawKind::Quadratic, 0.0, 3).unwrap();
        assert_eq!(quad.coefficients, vec![0.0, 1.0, 1.0, 0.0]);
        let shifted = ForceLaw::builtin(LawKind::Toda, 2f64.ln(), 3).unwrap();
        assert!((shifted.alpha1() - 0.5).abs() < 1e-15);
        assert!(ForceLaw::builtin(LawKind::Toda, 0.0, 2).is_err());
    }

    #[test]
    fn restoring_force_is_enforced() {
        // x + x² about -b has α_1 = 1 - 2b
        let err = ForceLaw::builtin(LawKind::Quadratic, 0.75, 4).unwrap_err();
        assert_eq!(err.code(), "assumption_a1");
        assert!(ForceLaw::custom(0.0, vec![0.0, -1.0, 0.0, 1.0], None).is_err());
    }

    #[test]
    fn cubic_expansion_matches_direct_evaluation() {
        let b = 0.3;
        let law = ForceLaw::builtin(LawKind::Cubic, b, 4).unwrap();
        for y in [-0.5, -0.3, -0.1, 0.2] {
            let x: f64 = y;
            let direct = x + x.powi(3);
            assert!((law.eval(y).unwrap() - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn custom_radius_from_ratio_test() {
        let law = ForceLaw::custom(0.0, vec![0.0, 1.0, 2.0, 4.0, 8.0], None).unwrap();
        assert!((law.radius - 0.5).abs() < 1e-15);
        let capped = ForceLaw::custom(0.0, vec![0.0, 1.0, 0.1, 0.01], None).unwrap();
        assert_eq!(capped.radius, 1.0);
    }

    #[test]
    fn w_examples() {
        let spec = WeightSpec::unit(2, WeightFamily::Subexponential, 1.0);
        let quad = ForceLaw::builtin(LawKind::Quadratic, 0.0, 3).unwrap();
        let zero = apply_w(&quad, &FourierSequence::zeros(2), &spec).unwrap();
        assert!(zero.value.is_zero());

        let a = 0.01;
        let u = pair(2, 0, a);
        let w = apply_w(&quad, &u, &spec).unwrap().value;
        assert!((w.get(&ModeIndex::new(&[2, 0])) - a * a).abs() < 1e-18);
        assert!((w.get(&ModeIndex::new(&[0, 0])) - 2.0 * a * a).abs() < 1e-18);

        let toda = ForceLaw::builtin(LawKind::Toda, 0.0, 4).unwrap();
        let w = apply_w(&toda, &u, &spec).unwrap().value;
        // α_2·2a² + α_4·6a⁴
        let expect = 0.5 * 2.0 * a * a + 6.0 * a.powi(4) / 24.0;
        assert!((w.get(&ModeIndex::zero(2)) - expect).abs() < 1e-18);
        assert!((w.get(&ModeIndex::zero(2)) - 1.0e-4).abs() < 1e-8);
    }

    #[test]
    fn w_rejects_large_input() {
        let spec = WeightSpec::unit(1, WeightFamily::Subexponential, 1.0);
        let law = ForceLaw::builtin(LawKind::Toda, 0.0, 8).unwrap();
        let u = pair(1, 0, 0.2);
        let err = apply_w(&law, &u, &spec).unwrap_err();
        assert_eq!(err.code(), "convergence_domain");
    }

    #[test]
    fn dw_examples() {
        let quad = ForceLaw::builtin(LawKind::Quadratic, 0.0, 3).unwrap();
        assert!(apply_dw(&quad, &FourierSequence::zeros(2)).unwrap().is_zero());
        let a = 0.01;
        let r = apply_dw(&quad, &pair(2, 0, a)).unwrap();
        assert!((r.get(&e(2, 0)) - 2.0 * a).abs() < 1e-18);
        assert_eq!(r.pruned().len(), 1);

        let toda = ForceLaw::builtin(LawKind::Toda, 0.0, 4).unwrap();
        let r = apply_dw(&toda, &pair(2, 0, a)).unwrap();
        // 2α_2 a + 4α_4·3a³ at e_1; 3α_3·2a² at 0
        let expect = a + 4.0 / 24.0 * 3.0 * a.powi(3);
        assert!((r.get(&e(2, 0)) - expect).abs() < 1e-18);
        assert!((r.get(&ModeIndex::zero(2)) - 3.0 / 6.0 * 2.0 * a * a).abs() < 1e-18);
    }

    #[test]
    fn djw_examples() {
        let quad = ForceLaw::builtin(LawKind::Quadratic, 0.0, 3).unwrap();
        let zero = FourierSequence::zeros(2);
        let y = pair(2, 1, 0.7);
        let d2 = apply_djw(&quad, &zero, &[y.clone(), y.clone()]).unwrap();
        let yy = convolve(&y, &y).unwrap().scaled(2.0);
        assert!(d2.max_abs_diff(&yy) < 1e-15);
        let d3 = apply_djw(&quad, &zero, &[y.clone(), y.clone(), y.clone()]).unwrap();
        assert!(d3.is_zero());

        let cubic = ForceLaw::builtin(LawKind::Cubic, 0.0, 3).unwrap();
        let (e1, e2) = (pair(2, 0, 1.0), pair(2, 1, 1.0));
        let d3 = apply_djw(&cubic, &zero, &[e1.clone(), e2.clone(), e1.clone()]).unwrap();
        let direct = convolve(&convolve(&e1, &e2).unwrap(), &e1).unwrap().scaled(6.0);
        assert!(d3.max_abs_diff(&direct) < 1e-14);

        let many: Vec<_> = (0..5).map(|_| y.clone()).collect();
        assert!(apply_djw(&cubic, &zero, &many).unwrap().is_zero());
    }

    #[test]
    fn grid_engine_matches_exact_path() {
        let law = ForceLaw::builtin(LawKind::Toda, 0.0, 8).unwrap();
        let spec = WeightSpec::unit(2, WeightFamily::Subexponential, 1.0);
        let mut u = pair(2, 0, 0.01);
        u.set(&e(2, 1), 0.02).unwrap();
        u.set(&ModeIndex::new(&[1, -1]), 3e-4).unwrap();
        let exact_w = apply_w(&law, &u, &spec).unwrap().value;
        let exact_r = apply_dw(&law, &u).unwrap();
        let grid = ModeGrid::from_sequence(&u, 16);
        let (w, r) = nonlinear_on_grid(&law, &grid);
        let w = w.to_sequence(6);
        let r = r.to_sequence(6);
        assert!(exact_w.filtered(|m| m.norm() <= 6).max_abs_diff(&w) < 1e-18);
        assert!(exact_r.filtered(|m| m.norm() <= 6).max_abs_diff(&r) < 1e-18);
    }

    #[test]
    fn potential_derivative_is_force() {
        let law = ForceLaw::builtin(LawKind::Toda, 0.2, 8).unwrap();
        let h = 1e-6;
        for y in [-0.5, -0.2, 0.1] {
            let fd = (law.potential(y + h).unwrap() - law.potential(y - h).unwrap()) / (2.0 * h);
            assert!((fd - law.eval(y).unwrap()).abs() < 1e-9);
        }
    }
}
