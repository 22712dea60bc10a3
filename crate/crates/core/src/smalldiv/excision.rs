//! Sublevel sets `{λ ∈ J : |g(λ)| < t}` of functions whose `k`-th derivative
//! stays above `k! δ^k`. Such sets have measure at most `(2k/δ) t^{1/k}`.

use serde::Serialize;

use crate::error::{Error, Result};

pub trait Excisable {
    fn value(&self, x: f64) -> f64;
    fn kth_derivative(&self, k: usize, x: f64) -> f64;
}

/// Real polynomial, ascending coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    /// `c·Π (x − r_i)`
    pub fn from_roots(c: f64, roots: &[f64]) -> Self {
        let mut coeffs = vec![c];
        for &r in roots {
            let mut next = vec![0.0; coeffs.len() + 1];
            for (i, &a) in coeffs.iter().enumerate() {
                next[i + 1] += a;
                next[i] -= r * a;
            }
            coeffs = next;
        }
        Self { coeffs }
    }

    pub fn derivative(&self) -> Self {
        Self {
            coeffs: self.coeffs.iter().enumerate().skip(1).map(|(i, &c)| i as f64 * c).collect(),
        }
    }
}

impl Excisable for Polynomial {
    fn value(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    fn kth_derivative(&self, k: usize, x: f64) -> f64 {
        let mut p = self.clone();
        for _ in 0..k {
            p = p.derivative();
        }
        p.value(x)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExcisionResult {
    pub measure: f64,
    pub bound: f64,
    pub components: usize,
    /// false if a sample violated `|g^{(k)}| ≥ k! δ^k`
    pub hypothesis_ok: bool,
    pub warnings: Vec<String>,
}

/// `(2k/δ) t^{1/k}`
pub fn excision_bound(k: usize, delta: f64, t: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    if !(delta > 0.0) || !(t >= 0.0) || !delta.is_finite() || !t.is_finite() {
        return Err(Error::InvalidInput(format!("need delta > 0 and t >= 0, got delta = {delta}, t = {t}")));
    }
    Ok(2.0 * k as f64 / delta * t.powf(1.0 / k as f64))
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Finds the boundary of `{|g| < t}` between `lo` (state `inside_lo`) and `hi`.
fn bisect<G: Excisable + ?Sized>(g: &G, t: f64, mut lo: f64, mut hi: f64, inside_lo: bool) -> f64 {
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if (g.value(mid).abs() < t) == inside_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Measures `{λ ∈ [a,b] : |g(λ)| < t}` from `resolution` samples, locating each
/// crossing by bisection. Components narrower than the sample spacing can be
/// missed, so the result is accurate only to that resolution.
pub fn excision_measure<G: Excisable + ?Sized>(
    g: &G,
    interval: (f64, f64),
    k: usize,
    delta: f64,
    t: f64,
    resolution: usize,
) -> Result<ExcisionResult> {
    let bound = excision_bound(k, delta, t)?;
    let (a, b) = interval;
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidInput(format!("empty interval [{a}, {b}]")));
    }
    let n = resolution.max(2);
    let h = (b - a) / (n - 1) as f64;
    let floor = factorial(k) * delta.powi(k as i32);
    let mut warnings = Vec::new();
    let mut measure = 0.0;
    let mut components = 0;
    let mut start: Option<f64> = None;
    let mut prev_inside = false;
    let mut prev_x = a;
    for i in 0..n {
        let x = if i + 1 == n { b } else { a + i as f64 * h };
        let deriv = g.kth_derivative(k, x).abs();
        if deriv < floor && warnings.len() < 8 {
            warnings.push(format!("|g^({k})({x:.6})| = {deriv:.3e} below k! delta^k = {floor:.3e}"));
        }
        let inside = g.value(x).abs() < t;
        if i == 0 {
            if inside {
                start = Some(a);
            }
        } else if inside != prev_inside {
            let edge = bisect(g, t, prev_x, x, prev_inside);
            if inside {
                start = Some(edge);
            } else {
                measure += edge - start.take().unwrap();
                components += 1;
            }
        }
        prev_inside = inside;
        prev_x = x;
    }
    if let Some(s) = start {
        measure += b - s;
        components += 1;
    }
    Ok(ExcisionResult {
        measure,
        bound,
        components,
        hypothesis_ok: warnings.is_empty(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_example() {
        assert!((excision_bound(2, 0.5, 1e-4).unwrap() - 0.08).abs() < 1e-12);
    }

    #[test]
    fn linear_sublevel() {
        // |x| < 0.1 on [-1, 1]
        let g = Polynomial::new(vec![0.0, 1.0]);
        let r = excision_measure(&g, (-1.0, 1.0), 1, 1.0, 0.1, 1001).unwrap();
        assert!((r.measure - 0.2).abs() < 1e-9);
        assert_eq!(r.components, 1);
        assert!(r.hypothesis_ok);
    }

    #[test]
    fn two_components() {
        // |x² − 1/4| < 0.01
        let g = Polynomial::from_roots(1.0, &[0.5, -0.5]);
        let r = excision_measure(&g, (-1.0, 1.0), 2, 1.0, 0.01, 4001).unwrap();
        let exact = 2.0 * ((0.26f64).sqrt() - (0.24f64).sqrt());
        assert!((r.measure - exact).abs() < 1e-8);
        assert_eq!(r.components, 2);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(excision_bound(0, 1.0, 0.1).is_err());
        assert!(excision_bound(1, -1.0, 0.1).is_err());
    }
}
