//! The Fourier-space travelling-wave equation `(D(ω)u + W(u))_m = 0`, its
//! kernel/complement split, and reconstruction of profiles and trajectories.
//!
//! The kernel is spanned by the unit modes `S = {±e_j}`. `Q` keeps `S`,
//! `P` removes `{0} ∪ S`, and `u = φ(a) + v` with `v = Pu`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcelaw::{apply_w, ForceLaw};
use crate::spaces::{seq_norm, FourierSequence, ModeIndex, WeightSpec};
use crate::spectral::{v_of_omega, DispersionData};

pub const DEFAULT_EPS_DIV: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveParameters {
    pub a: Vec<f64>,
    pub omega: Vec<f64>,
}

impl WaveParameters {
    pub fn new(a: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        if a.len() != omega.len() {
            return Err(Error::Dimension {
                expected: a.len(),
                found: omega.len(),
            });
        }
        Ok(WaveParameters { a, omega })
    }

    pub fn nu(&self) -> usize {
        self.a.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub p_residual_norm: f64,
    pub q_residual: Vec<f64>,
    pub min_divisor: f64,
    pub worst_mode: ModeIndex,
}

/// `±e_j` for some `j`.
pub fn is_kernel_mode(m: &ModeIndex) -> bool {
    let c = m.components();
    c.iter().filter(|&&x| x != 0).count() == 1 && c.iter().all(|&x| x.abs() <= 1)
}

/// `φ(a)(±e_j) = a_j`.
pub fn phi(a: &[f64]) -> FourierSequence {
    let nu = a.len();
    let mut u = FourierSequence::zeros(nu);
    for (j, &aj) in a.iter().enumerate() {
        if aj != 0.0 {
            u.add_at(&ModeIndex::unit(nu, j), aj);
        }
    }
    u
}

pub fn project_p(u: &FourierSequence) -> FourierSequence {
    u.filtered(|m| !m.is_zero() && !is_kernel_mode(m))
}

pub fn project_q(u: &FourierSequence) -> FourierSequence {
    u.filtered(is_kernel_mode)
}

/// `|sin(⟨ω,m⟩/2)|`, or `+∞` when `⟨g,m⟩ = 0` (no divisor on that mode).
pub fn divisor_sine(d: &DispersionData, omega: &[f64], m: &ModeIndex) -> f64 {
    if d.g_dot(m) == 0 {
        f64::INFINITY
    } else {
        (crate::spectral::reduce_2pi(m.dot(omega)) / 2.0).sin().abs()
    }
}

fn resonance_guard(d: &DispersionData, omega: &[f64], m: &ModeIndex, eps_div: f64) -> Result<()> {
    let s = divisor_sine(d, omega, m);
    if s < eps_div {
        return Err(Error::Resonance {
            mode: m.clone(),
            sine: s,
            floor: eps_div,
        });
    }
    Ok(())
}

/// Worst divisor over the canonical representatives `modes`, failing on
/// the first mode below the floor.
pub fn divisor_report(
    d: &DispersionData,
    omega: &[f64],
    modes: &[ModeIndex],
    eps_div: f64,
) -> Result<(f64, ModeIndex)> {
    let mut worst = (f64::INFINITY, ModeIndex::zero(d.nu));
    for m in modes {
        resonance_guard(d, omega, m, eps_div)?;
        let v = v_of_omega(d, omega, m).abs();
        if v < worst.0 {
            worst = (v, m.clone());
        }
    }
    Ok(worst)
}

fn check_dims(d: &DispersionData, lambda: &WaveParameters, v: &FourierSequence) -> Result<()> {
    for n in [lambda.nu(), v.nu()] {
        if n != d.nu {
            return Err(Error::Dimension {
                expected: d.nu,
                found: n,
            });
        }
    }
    Ok(())
}

/// `𝒫(v, λ) = D(ω)v + P W(φ(a) + v)`.
pub fn p_functional(
    law: &ForceLaw,
    d: &DispersionData,
    v: &FourierSequence,
    lambda: &WaveParameters,
    spec: &WeightSpec,
    eps_div: f64,
) -> Result<FourierSequence> {
    check_dims(d, lambda, v)?;
    let v = project_p(v);
    for (m, _) in v.iter() {
        resonance_guard(d, &lambda.omega, m, eps_div)?;
    }
    let u = phi(&lambda.a).plus(&v)?;
    let w = apply_w(law, &u, spec)?.value;
    let mut out = project_p(&w);
    for (m, x) in v.iter() {
        out.add_at(m, v_of_omega(d, &lambda.omega, m) * x);
    }
    Ok(out)
}

/// `h_j = a_j V_j(ω_j) + W(φ(a)+v)(e_j)`.
pub fn q_functional(
    law: &ForceLaw,
    d: &DispersionData,
    v: &FourierSequence,
    lambda: &WaveParameters,
    spec: &WeightSpec,
    eps_div: f64,
) -> Result<Vec<f64>> {
    check_dims(d, lambda, v)?;
    let v = project_p(v);
    for (m, _) in v.iter() {
        resonance_guard(d, &lambda.omega, m, eps_div)?;
    }
    let u = phi(&lambda.a).plus(&v)?;
    let w = apply_w(law, &u, spec)?.value;
    Ok((0..d.nu)
        .map(|j| {
            let ej = ModeIndex::unit(d.nu, j);
            lambda.a[j] * d.v_phase(j, lambda.omega[j]) + w.get(&ej)
        })
        .collect())
}

/// `(D(ω)u + W(u))_m` for every `m ≠ 0` in the support, without any split.
pub fn full_residual(
    law: &ForceLaw,
    d: &DispersionData,
    u: &FourierSequence,
    omega: &[f64],
    spec: &WeightSpec,
) -> Result<FourierSequence> {
    let w = apply_w(law, u, spec)?.value;
    let mut out = w.filtered(|m| !m.is_zero());
    for (m, x) in u.iter() {
        if m.is_zero() || x == 0.0 {
            continue;
        }
        let v = v_of_omega(d, omega, m);
        if !v.is_finite() {
            return Err(Error::SingularEntry(m.clone()));
        }
        out.add_at(m, v * x);
    }
    Ok(out)
}

/// Weighted norm of `𝒫` and the residual report at `(v, λ)`.
pub fn residual_report(
    law: &ForceLaw,
    d: &DispersionData,
    v: &FourierSequence,
    lambda: &WaveParameters,
    spec: &WeightSpec,
    eps_div: f64,
) -> Result<ResidualReport> {
    let p = p_functional(law, d, v, lambda, spec, eps_div)?;
    let q = q_functional(law, d, v, lambda, spec, eps_div)?;
    let modes: Vec<ModeIndex> = project_p(v).iter().map(|(m, _)| m.clone()).collect();
    let (min_divisor, worst_mode) = divisor_report(d, &lambda.omega, &modes, eps_div)?;
    Ok(ResidualReport {
        p_residual_norm: seq_norm(spec, &p),
        q_residual: q,
        min_divisor,
        worst_mode,
    })
}

/// One term `c·sin(⟨m,ξ⟩)` per ±pair of the profile.
#[derive(Debug, Clone)]
struct ProfileTerm {
    m: ModeIndex,
    /// coefficient of `sin(⟨m,ξ⟩)` in `χ`
    c: f64,
}

fn profile_terms(u: &FourierSequence, omega: &[f64], eps_div: f64) -> Result<Vec<ProfileTerm>> {
    let mut terms = Vec::with_capacity(u.len());
    for (m, x) in u.iter() {
        if m.is_zero() || x == 0.0 {
            continue;
        }
        // no 2π reduction here: sin(x/2) changes sign under x ↦ x + 2π
        let s = (m.dot(omega) / 2.0).sin();
        if s.abs() < eps_div {
            return Err(Error::Resonance {
                mode: m.clone(),
                sine: s.abs(),
                floor: eps_div,
            });
        }
        terms.push(ProfileTerm { m: m.clone(), c: -x / s });
    }
    Ok(terms)
}

/// `χ(ξ) = Σ_m u(m)/(−2i sin(⟨ω,m⟩/2)) e^{i⟨m,ξ⟩}` on the given points.
///
/// The sum is formed in complex arithmetic over the full support; the
/// imaginary part cancels pairwise and is checked before being dropped.
pub fn reconstruct_profile(
    u: &FourierSequence,
    omega: &[f64],
    xi_grid: &[Vec<f64>],
    eps_div: f64,
) -> Result<Vec<f64>> {
    if omega.len() != u.nu() {
        return Err(Error::Dimension {
            expected: u.nu(),
            found: omega.len(),
        });
    }
    let terms = profile_terms(u, omega, eps_div)?;
    let full: Vec<(ModeIndex, Complex64)> = terms
        .iter()
        .flat_map(|t| {
            // u(m)/(−2i s) = (i/2)(u/s) = −(i/2)c
            let z = Complex64::new(0.0, -0.5 * t.c);
            [(t.m.clone(), z), (t.m.neg(), -z)]
        })
        .collect();
    xi_grid
        .iter()
        .map(|xi| {
            if xi.len() != u.nu() {
                return Err(Error::Dimension {
                    expected: u.nu(),
                    found: xi.len(),
                });
            }
            let mut acc = Complex64::new(0.0, 0.0);
            let mut scale = 0.0;
            for (m, z) in &full {
                acc += z * Complex64::from_polar(1.0, m.dot(xi));
                scale += z.norm();
            }
            if acc.im.abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::Inconsistent(format!(
                    "profile imaginary part {:.3e} does not cancel",
                    acc.im
                )));
            }
            Ok(acc.re)
        })
        .collect()
}

/// Travelling wave `x_n(t) = n·b + χ(ωn − gγt)` and its time derivative,
/// precomputed for repeated evaluation.
#[derive(Debug, Clone)]
pub struct WaveAnsatz {
    pub b: f64,
    pub gamma: f64,
    /// `(⟨m,ω⟩, ⟨m,g⟩, c, δ)` for `c·sin(n⟨m,ω⟩ − ⟨m,g⟩γt + δ)`
    terms: Vec<(f64, f64, f64, f64)>,
}

impl WaveAnsatz {
    pub fn new(u: &FourierSequence, d: &DispersionData, omega: &[f64], b: f64, eps_div: f64) -> Result<Self> {
        if omega.len() != d.nu || u.nu() != d.nu {
            return Err(Error::Dimension {
                expected: d.nu,
                found: omega.len(),
            });
        }
        let terms = profile_terms(u, omega, eps_div)?
            .into_iter()
            .map(|t| (t.m.dot(omega), d.g_dot(&t.m) as f64, t.c, 0.0))
            .collect();
        Ok(WaveAnsatz {
            b,
            gamma: d.gamma,
            terms,
        })
    }

    /// Shifted wave `χ(ξ + ζ)`, the phase-shift family of a solution.
    pub fn with_phase_shift(
        u: &FourierSequence,
        d: &DispersionData,
        omega: &[f64],
        b: f64,
        zeta: &[f64],
        eps_div: f64,
    ) -> Result<Self> {
        if zeta.len() != d.nu {
            return Err(Error::Dimension {
                expected: d.nu,
                found: zeta.len(),
            });
        }
        let terms = profile_terms(u, omega, eps_div)?
            .into_iter()
            .map(|t| (t.m.dot(omega), d.g_dot(&t.m) as f64, t.c, t.m.dot(zeta)))
            .collect();
        Ok(WaveAnsatz {
            b,
            gamma: d.gamma,
            terms,
        })
    }

    fn phase(&self, mw: f64, mg: f64, delta: f64, n: f64, t: f64) -> f64 {
        n * mw - mg * self.gamma * t + delta
    }

    pub fn position(&self, n: i64, t: f64) -> f64 {
        let nf = n as f64;
        nf * self.b + self.terms.iter().map(|&(mw, mg, c, dl)| c * self.phase(mw, mg, dl, nf, t).sin()).sum::<f64>()
    }

    /// `ẋ_n(t)` by term-wise differentiation.
    pub fn velocity(&self, n: i64, t: f64) -> f64 {
        let nf = n as f64;
        self.terms
            .iter()
            .map(|&(mw, mg, c, dl)| -c * mg * self.gamma * self.phase(mw, mg, dl, nf, t).cos())
            .sum()
    }

    /// `ẍ_n(t)` by term-wise differentiation.
    pub fn acceleration(&self, n: i64, t: f64) -> f64 {
        let nf = n as f64;
        self.terms
            .iter()
            .map(|&(mw, mg, c, dl)| {
                let k = mg * self.gamma;
                -c * k * k * self.phase(mw, mg, dl, nf, t).sin()
            })
            .sum()
    }

    /// Positions of sites `n0, n0+1, …, n0+len-1` at time `t`, using a
    /// rotation recurrence in `n` instead of one sine per site and term.
    pub fn positions_block(&self, n0: i64, len: usize, t: f64, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate().take(len) {
            *o = (n0 + k as i64) as f64 * self.b;
        }
        for &(mw, mg, c, dl) in &self.terms {
            let mut z = Complex64::from_polar(1.0, self.phase(mw, mg, dl, n0 as f64, t));
            let step = Complex64::from_polar(1.0, mw);
            for o in out.iter_mut().take(len) {
                *o += c * z.im;
                z *= step;
            }
        }
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }
}

/// Samples `(n, t, x_n(t))` over the grid.
pub fn sample_wave(
    u: &FourierSequence,
    d: &DispersionData,
    omega: &[f64],
    b: f64,
    n_range: std::ops::RangeInclusive<i64>,
    t_grid: &[f64],
    eps_div: f64,
) -> Result<Vec<(i64, f64, f64)>> {
    let ansatz = WaveAnsatz::new(u, d, omega, b, eps_div)?;
    let mut out = Vec::with_capacity(t_grid.len() * (n_range.clone().count()));
    for &t in t_grid {
        for n in n_range.clone() {
            out.push((n, t, ansatz.position(n, t)));
        }
    }
    Ok(out)
}

/// Linear profile of the amplitude vector `a`:
/// `χ^lin(ξ) = −Σ_j 2√α_1 a_j sin(ξ_j)/(jγ)`.
pub fn linear_profile(d: &DispersionData, a: &[f64], xi: &[f64]) -> f64 {
    let s = 2.0 * d.alpha1.sqrt();
    (0..d.nu)
        .map(|j| -s * a[j] * xi[j].sin() / (d.g_vector[j] as f64 * d.gamma))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcelaw::LawKind;
    use crate::spaces::WeightFamily;

    fn setup() -> (DispersionData, WeightSpec) {
        (
            DispersionData::new(1.0, 0.9).unwrap(),
            WeightSpec::unit(2, WeightFamily::Subexponential, 1.0),
        )
    }

    #[test]
    fn phi_examples() {
        assert!(phi(&[0.0, 0.0]).is_zero());
        let u = phi(&[1.0, 0.0]);
        assert_eq!(u.get(&ModeIndex::new(&[1, 0])), 1.0);
        assert_eq!(u.get(&ModeIndex::new(&[-1, 0])), 1.0);
        assert_eq!(u.len(), 1);
        let spec = WeightSpec::unit(2, WeightFamily::Subexponential, 1.0);
        let norm = seq_norm(&spec, &phi(&[0.3, -0.2]));
        assert!((norm - 2.0 * std::f64::consts::E * 0.5).abs() < 1e-14);
    }

    #[test]
    fn projections() {
        let a = phi(&[0.4, 0.1]);
        assert_eq!(project_q(&a), a);
        assert!(project_p(&a).is_zero());
        let u = FourierSequence::from_pairs(
            2,
            [
                (ModeIndex::new(&[1, 0]), 0.5),
                (ModeIndex::new(&[2, -1]), 0.25),
                (ModeIndex::new(&[0, 3]), -1.0),
            ],
        )
        .unwrap();
        let p = project_p(&u);
        assert_eq!(project_p(&p), p);
        assert_eq!(p.plus(&project_q(&u)).unwrap(), u);
        assert!(project_p(&project_q(&u)).is_zero());
    }

    #[test]
    fn quadratic_p_functional_at_zero() {
        let (d, spec) = setup();
        let law = ForceLaw::builtin(LawKind::Quadratic, 0.0, 3).unwrap();
        let t = 0.05;
        let lam = WaveParameters::new(vec![t, 0.0], d.omega0.clone()).unwrap();
        let p = p_functional(&law, &d, &FourierSequence::zeros(2), &lam, &spec, DEFAULT_EPS_DIV).unwrap();
        assert!((p.get(&ModeIndex::new(&[2, 0])) - t * t).abs() < 1e-16);
        assert_eq!(p.get(&ModeIndex::zero(2)), 0.0);
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn q_functional_examples() {
        let (d, spec) = setup();
        let linear = ForceLaw::linear(1.0, 0.0).unwrap();
        let zero = FourierSequence::zeros(2);
        let at0 = WaveParameters::new(vec![0.05, -0.03], d.omega0.clone()).unwrap();
        let h = q_functional(&linear, &d, &zero, &at0, &spec, DEFAULT_EPS_DIV).unwrap();
        assert!(h.iter().all(|x| x.abs() < 1e-15));
        let toda = ForceLaw::builtin(LawKind::Toda, 0.0, 8).unwrap();
        let lam = WaveParameters::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(q_functional(&toda, &d, &zero, &lam, &spec, DEFAULT_EPS_DIV).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn resonant_mode_is_named() {
        let (d, spec) = setup();
        let law = ForceLaw::builtin(LawKind::Toda, 0.0, 8).unwrap();
        let v = FourierSequence::pair(&ModeIndex::new(&[2, 0]), 1e-3);
        let lam = WaveParameters::new(vec![0.01, 0.01], vec![std::f64::consts::PI, 2.0]).unwrap();
        match p_functional(&law, &d, &v, &lam, &spec, DEFAULT_EPS_DIV).unwrap_err() {
            Error::Resonance { mode, .. } => assert_eq!(mode, ModeIndex::new(&[2, 0])),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn profile_examples() {
        let w = [1.1, 2.3];
        let grid: Vec<Vec<f64>> = (0..7).map(|i| vec![0.4 * i as f64, -0.3 * i as f64 + 0.2]).collect();
        let zero = reconstruct_profile(&FourierSequence::zeros(2), &w, &grid, DEFAULT_EPS_DIV).unwrap();
        assert!(zero.iter().all(|&x| x == 0.0));
        let one = reconstruct_profile(&phi(&[1.0, 0.0]), &w, &grid, DEFAULT_EPS_DIV).unwrap();
        for (xi, chi) in grid.iter().zip(&one) {
            assert!((chi + xi[0].sin() / (w[0] / 2.0).sin()).abs() < 1e-14);
        }
        let u = FourierSequence::from_pairs(2, [(ModeIndex::new(&[1, 0]), 0.3), (ModeIndex::new(&[1, -2]), 0.05)]).unwrap();
        let neg: Vec<Vec<f64>> = grid.iter().map(|x| x.iter().map(|v| -v).collect()).collect();
        let (p, n) = (
            reconstruct_profile(&u, &w, &grid, DEFAULT_EPS_DIV).unwrap(),
            reconstruct_profile(&u, &w, &neg, DEFAULT_EPS_DIV).unwrap(),
        );
        for (x, y) in p.iter().zip(&n) {
            assert!((x + y).abs() < 1e-14);
        }
    }

    #[test]
    fn kernel_profile_is_the_linear_profile() {
        let (d, _) = setup();
        let a = [0.02, -0.01];
        let xi = vec![vec![0.7, 1.9]];
        let chi = reconstruct_profile(&phi(&a), &d.omega0, &xi, DEFAULT_EPS_DIV).unwrap()[0];
        assert!((chi - linear_profile(&d, &a, &xi[0])).abs() < 1e-15);
    }

    #[test]
    fn wave_samples() {
        let (d, _) = setup();
        let b = 0.3;
        let quiet = sample_wave(&FourierSequence::zeros(2), &d, &d.omega0, b, -2..=2, &[0.0, 1.5], DEFAULT_EPS_DIV).unwrap();
        assert!(quiet.iter().all(|&(n, _, x)| x == n as f64 * b));

        let u = FourierSequence::from_pairs(2, [(ModeIndex::new(&[1, 0]), 0.1), (ModeIndex::new(&[1, 1]), 0.02)]).unwrap();
        let w = [0.95, 2.2];
        let wave = WaveAnsatz::new(&u, &d, &w, b, DEFAULT_EPS_DIV).unwrap();
        let period = std::f64::consts::TAU / d.gamma;
        for n in -3..4 {
            for t in [0.0, 0.37, 2.9] {
                assert!((wave.position(n, t + period) - wave.position(n, t)).abs() < 1e-12);
                // x_{n+1}(t) − (n+1)b = χ(ω(n+1) − gγt)
                let xi: Vec<f64> = (0..2)
                    .map(|j| w[j] * (n + 1) as f64 - d.g_vector[j] as f64 * d.gamma * t)
                    .collect();
                let chi = reconstruct_profile(&u, &w, &[xi], DEFAULT_EPS_DIV).unwrap()[0];
                assert!((wave.position(n + 1, t) - (n + 1) as f64 * b - chi).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_kernel_superposition_solves_the_equation() {
        let (d, spec) = setup();
        let law = ForceLaw::linear(1.0, 0.0).unwrap();
        let r = full_residual(&law, &d, &phi(&[0.05, 0.03]), &d.omega0, &spec).unwrap();
        assert!(r.iter().all(|(_, x)| x.abs() < 1e-12));
    }
}
