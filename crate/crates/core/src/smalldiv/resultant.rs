//! Elimination for `p(x) = 0 = q(y)`: the polynomial `r = det(z − A)` where
//! `A` is multiplication by `x − y` on `C[x,y]/(p,q)`, together with
//! cofactors giving `r(x−y) = R₁(x,y)p(x) + R₂(x,y)q(y)`.
//!
//! Polynomials are coefficient vectors in ascending order; `p` and `q` are
//! monic and passed without their leading 1.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Bivariate polynomial as a dense grid `coeffs[i][j]` of `x^i y^j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bivariate {
    pub coeffs: Vec<Vec<C>>,
}

impl Bivariate {
    fn zeros(nx: usize, ny: usize) -> Self {
        Self {
            coeffs: vec![vec![ZERO; ny.max(1)]; nx.max(1)],
        }
    }

    fn add(&mut self, i: usize, j: usize, v: C) {
        if i >= self.coeffs.len() {
            let ny = self.coeffs[0].len();
            self.coeffs.resize(i + 1, vec![ZERO; ny]);
        }
        if j >= self.coeffs[0].len() {
            for row in &mut self.coeffs {
                row.resize(j + 1, ZERO);
            }
        }
        self.coeffs[i][j] += v;
    }

    pub fn eval(&self, x: C, y: C) -> C {
        self.coeffs
            .iter()
            .rev()
            .fold(ZERO, |acc, row| acc * x + row.iter().rev().fold(ZERO, |a, &c| a * y + c))
    }

    /// Highest `i + j` with a nonzero coefficient.
    pub fn total_degree(&self) -> usize {
        let mut deg = 0;
        for (i, row) in self.coeffs.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                if *c != ZERO {
                    deg = deg.max(i + j);
                }
            }
        }
        deg
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultantTriple {
    /// monic, ascending, length `d₁d₂ + 1`
    pub r: Vec<C>,
    pub r1: Bivariate,
    pub r2: Bivariate,
    /// whether `r` came from the exact integer path
    pub exact: bool,
}

fn eval_monic(a: &[C], x: C) -> C {
    a.iter().rev().fold(ONE, |acc, &c| acc * x + c)
}

pub fn eval_poly(c: &[C], x: C) -> C {
    c.iter().rev().fold(ZERO, |acc, &v| acc * x + v)
}

/// Matrix of `x − y` on the basis `x^i y^j`, `i < d₁`, `j < d₂`, index `i·d₂ + j`.
pub fn multiplication_matrix(p: &[C], q: &[C]) -> DMatrix<C> {
    let (d1, d2) = (p.len(), q.len());
    let n = d1 * d2;
    let mut a = DMatrix::zeros(n, n);
    for i in 0..d1 {
        for j in 0..d2 {
            let col = i * d2 + j;
            if i + 1 < d1 {
                a[((i + 1) * d2 + j, col)] += ONE;
            } else {
                for (k, &pk) in p.iter().enumerate() {
                    a[(k * d2 + j, col)] -= pk;
                }
            }
            if j + 1 < d2 {
                a[(i * d2 + j + 1, col)] -= ONE;
            } else {
                for (k, &qk) in q.iter().enumerate() {
                    a[(i * d2 + k, col)] += qk;
                }
            }
        }
    }
    a
}

fn as_integers(v: &[C]) -> Option<Vec<i128>> {
    v.iter()
        .map(|c| {
            (c.im == 0.0 && c.re.fract() == 0.0 && c.re.abs() < 1e15).then_some(c.re as i128)
        })
        .collect()
}

/// Faddeev–LeVerrier in exact integer arithmetic; `None` on overflow.
fn charpoly_integer(a: &[Vec<i128>]) -> Option<Vec<i128>> {
    let n = a.len();
    let mut c = vec![0i128; n + 1];
    c[n] = 1;
    let mut m = vec![vec![0i128; n]; n];
    for k in 1..=n {
        // M_k = A M_{k−1} + c_{n−k+1} I
        let mut next = vec![vec![0i128; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0i128;
                for l in 0..n {
                    s = s.checked_add(a[i][l].checked_mul(m[l][j])?)?;
                }
                next[i][j] = s;
            }
            next[i][i] = next[i][i].checked_add(c[n - k + 1])?;
        }
        m = next;
        let mut tr = 0i128;
        for i in 0..n {
            for l in 0..n {
                tr = tr.checked_add(a[i][l].checked_mul(m[l][i])?)?;
            }
        }
        if tr % k as i128 != 0 {
            return None;
        }
        c[n - k] = -tr / k as i128;
    }
    Some(c)
}

/// Characteristic polynomial through Hessenberg reduction and the
/// La Budde recurrence.
fn charpoly_hessenberg(a: DMatrix<C>) -> Vec<C> {
    let n = a.nrows();
    let h = a.hessenberg().h();
    // p[k] = char poly of the leading k×k block
    let mut p: Vec<Vec<C>> = vec![vec![ONE]];
    for k in 1..=n {
        let hk = h[(k - 1, k - 1)];
        let mut next = vec![ZERO; k + 1];
        for (i, &c) in p[k - 1].iter().enumerate() {
            next[i + 1] += c;
            next[i] -= hk * c;
        }
        let mut prod = ONE;
        for i in (1..k).rev() {
            prod *= h[(i, i - 1)];
            let coef = h[(i - 1, k - 1)] * prod;
            for (l, &c) in p[i - 1].iter().enumerate() {
                next[l] -= coef * c;
            }
        }
        p.push(next);
    }
    p.pop().unwrap()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Quotients `g_s` and remainders `v_s` with `x^s = g_s(x)p(x) + v_s(x)`.
fn division_sequence(p: &[C], smax: usize) -> (Vec<Vec<C>>, Vec<Vec<C>>) {
    let d = p.len();
    let mut g = Vec::with_capacity(smax + 1);
    let mut v = Vec::with_capacity(smax + 1);
    let mut g_cur: Vec<C> = vec![];
    let mut v_cur = vec![ZERO; d];
    v_cur[0] = ONE;
    for _ in 0..=smax {
        g.push(g_cur.clone());
        v.push(v_cur.clone());
        let top = v_cur[d - 1];
        let mut g_next = vec![top];
        g_next.extend_from_slice(&g_cur);
        let mut v_next = vec![ZERO; d];
        v_next[0] = -p[0] * top;
        for k in 1..d {
            v_next[k] = v_cur[k - 1] - p[k] * top;
        }
        g_cur = g_next;
        v_cur = v_next;
    }
    (g, v)
}

/// Computes `r`, `R₁`, `R₂` for monic `p` (degree `d₁ = p.len()`) and `q`.
pub fn resultant_ominus(p: &[C], q: &[C]) -> Result<ResultantTriple> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::InvalidInput("polynomials must have degree at least 1".into()));
    }
    if p.iter().chain(q).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::InvalidInput("non-finite coefficient".into()));
    }
    let (d1, d2) = (p.len(), q.len());
    let a = multiplication_matrix(p, q);
    let integer = as_integers(p).zip(as_integers(q)).and_then(|_| {
        let n = a.nrows();
        let rows: Vec<Vec<i128>> = (0..n)
            .map(|i| (0..n).map(|j| a[(i, j)].re as i128).collect())
            .collect();
        charpoly_integer(&rows)
    });
    let (r, exact) = match integer {
        Some(c) => (c.into_iter().map(|x| C::new(x as f64, 0.0)).collect::<Vec<_>>(), true),
        None => (charpoly_hessenberg(a), false),
    };
    let n = d1 * d2;
    let (g, v) = division_sequence(p, n);
    let (h, _) = division_sequence(q, n);
    let mut r1 = Bivariate::zeros(1, 1);
    let mut r2 = Bivariate::zeros(1, 1);
    // r(x−y) = Σ_s c_s Σ_l C(s,l) x^l (−y)^{s−l}
    for (s, &cs) in r.iter().enumerate() {
        if cs == ZERO {
            continue;
        }
        for l in 0..=s {
            let sign = if (s - l) % 2 == 0 { 1.0 } else { -1.0 };
            let coef = cs * binomial(s, l) * sign;
            for (i, &gi) in g[l].iter().enumerate() {
                r1.add(i, s - l, coef * gi);
            }
            for (i, &vi) in v[l].iter().enumerate() {
                if vi == ZERO {
                    continue;
                }
                for (j, &hj) in h[s - l].iter().enumerate() {
                    r2.add(i, j, coef * vi * hj);
                }
            }
        }
    }
    Ok(ResultantTriple { r, r1, r2, exact })
}

/// Largest defect of `r(x−y) − R₁p − R₂q` over the sample points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityDefect {
    pub absolute: f64,
    /// each defect over the same expression with every coefficient replaced
    /// by its modulus and evaluated at `|x|, |y|`: the backward-error scale
    pub relative: f64,
}

fn eval_abs(c: &[C], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * x + v.norm())
}

fn eval_abs_bivariate(b: &Bivariate, x: f64, y: f64) -> f64 {
    b.coeffs.iter().rev().fold(0.0, |acc, row| {
        acc * x + row.iter().rev().fold(0.0, |a, c| a * y + c.norm())
    })
}

pub fn verify_resultant_identity(t: &ResultantTriple, p: &[C], q: &[C], samples: &[(C, C)]) -> IdentityDefect {
    let mut out = IdentityDefect {
        absolute: 0.0,
        relative: 0.0,
    };
    for &(x, y) in samples {
        let z = x - y;
        let defect = (eval_poly(&t.r, z) - t.r1.eval(x, y) * eval_monic(p, x) - t.r2.eval(x, y) * eval_monic(q, y)).norm();
        let (ax, ay) = (x.norm(), y.norm());
        let p_abs = eval_abs(p, ax) + ax.powi(p.len() as i32);
        let q_abs = eval_abs(q, ay) + ay.powi(q.len() as i32);
        let scale = eval_abs(&t.r, z.norm())
            + eval_abs_bivariate(&t.r1, ax, ay) * p_abs
            + eval_abs_bivariate(&t.r2, ax, ay) * q_abs;
        out.absolute = out.absolute.max(defect);
        out.relative = out.relative.max(defect / scale.max(f64::MIN_POSITIVE));
    }
    out
}
