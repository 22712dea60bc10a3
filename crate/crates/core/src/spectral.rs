//! Linear dispersion data and the small divisors `V(ω)(m)`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forcelaw::ForceLaw;
use crate::spaces::ModeIndex;

/// Relative tolerance for the boundary case `2√α_1 ∈ γZ`.
pub const PHASE_COUNT_TOL: f64 = 1e-9;
pub const TOL_ENTRY: f64 = 1e-8;
pub const TOL_DET: f64 = 1e-10;
pub const DEFAULT_A3_CUTOFF: usize = 200;

const TWO_PI_HI: f64 = 6.283_185_307_179_586;
const TWO_PI_LO: f64 = 2.449_293_598_294_706_4e-16;

/// `dist(x, 2πZ)` with a two-term reduction of `2π`.
pub fn dist_to_2pi_lattice(x: f64) -> f64 {
    reduce_2pi(x).abs()
}

/// Representative of `x` modulo `2π` in `[-π, π]`.
pub fn reduce_2pi(x: f64) -> f64 {
    let k = (x / TWO_PI_HI).round();
    let r = (-k).mul_add(TWO_PI_HI, x);
    (-k).mul_add(TWO_PI_LO, r)
}

/// The unique `ν` with `νγ < 2√α_1 < (ν+1)γ`.
pub fn phase_count(alpha1: f64, gamma: f64) -> Result<usize> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!("gamma = {gamma} must be positive")));
    }
    if !(alpha1 > 0.0) {
        return Err(Error::RestoringForce { alpha1 });
    }
    let ratio = 2.0 * alpha1.sqrt() / gamma;
    let nearest = ratio.round();
    if nearest >= 1.0 && (ratio - nearest).abs() <= PHASE_COUNT_TOL * ratio {
        return Err(Error::PhaseCount(format!(
            "2*sqrt(F'(-b)) = {}*gamma lies on the boundary of A2",
            nearest
        )));
    }
    let nu = ratio.floor() as usize;
    if nu == 0 {
        return Err(Error::PhaseCount(format!(
            "gamma = {gamma} >= 2*sqrt(F'(-b)): no bounded phases (nu = 0)"
        )));
    }
    Ok(nu)
}

/// `ω^(0)_j = 2 arcsin(jγ/(2√α_1))`.
pub fn omega0(alpha1: f64, gamma: f64, nu: usize) -> Result<Vec<f64>> {
    (1..=nu)
        .map(|j| {
            let s = j as f64 * gamma / (2.0 * alpha1.sqrt());
            if !(s > 0.0 && s < 1.0) {
                return Err(Error::Inconsistent(format!(
                    "arcsin argument {s} for phase {j} outside (0,1)"
                )));
            }
            Ok(2.0 * s.asin())
        })
        .collect()
}

/// `V_l(θ) = α_1 − l²γ²/(4 sin²(θ/2))`, infinite at `θ ∈ 2πZ` when `l ≠ 0`.
pub fn v_branch(alpha1: f64, gamma: f64, l: i64, theta: f64) -> f64 {
    if l == 0 {
        return alpha1;
    }
    let s = (reduce_2pi(theta) / 2.0).sin();
    // θ on the lattice 2πZ up to the rounding of θ itself
    if s.abs() <= f64::EPSILON * (1.0 + theta.abs()) {
        return f64::INFINITY;
    }
    let lg = l as f64 * gamma;
    alpha1 - lg * lg / (4.0 * s * s)
}

/// `dV_l/dθ = l²γ² cos(θ/2)/(4 sin³(θ/2))`.
pub fn v_branch_derivative(gamma: f64, l: i64, theta: f64) -> f64 {
    let half = reduce_2pi(theta) / 2.0;
    let lg = l as f64 * gamma;
    lg * lg * half.cos() / (4.0 * half.sin().powi(3))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionData {
    pub nu: usize,
    pub gamma: f64,
    pub alpha1: f64,
    pub omega0: Vec<f64>,
    pub g_vector: Vec<i64>,
    #[serde(rename = "Lambda")]
    pub lambda: Vec<f64>,
}

impl DispersionData {
    pub fn new(alpha1: f64, gamma: f64) -> Result<Self> {
        let nu = phase_count(alpha1, gamma)?;
        let g: Vec<i64> = (1..=nu as i64).collect();
        Self::with_phases(alpha1, gamma, g)
    }

    pub fn from_law(law: &ForceLaw, gamma: f64) -> Result<Self> {
        Self::new(law.alpha1(), gamma)
    }

    /// Dispersion data for an explicit subset of phases `g = (j_1, …)`,
    /// used for lower-dimensional restrictions of a wave.
    pub fn with_phases(alpha1: f64, gamma: f64, g_vector: Vec<i64>) -> Result<Self> {
        let nu_max = phase_count(alpha1, gamma)?;
        if g_vector.is_empty() || g_vector.iter().any(|&j| j < 1 || j as usize > nu_max) {
            return Err(Error::InvalidInput(format!(
                "phase labels {g_vector:?} must lie in 1..={nu_max}"
            )));
        }
        let all = omega0(alpha1, gamma, nu_max)?;
        let omega0: Vec<f64> = g_vector.iter().map(|&j| all[j as usize - 1]).collect();
        let lambda = g_vector
            .iter()
            .zip(&omega0)
            .map(|(&j, &w)| v_branch_derivative(gamma, j, w))
            .collect();
        Ok(DispersionData {
            nu: g_vector.len(),
            gamma,
            alpha1,
            omega0,
            g_vector,
            lambda,
        })
    }

    pub fn g_dot(&self, m: &ModeIndex) -> i64 {
        m.dot_int(&self.g_vector)
    }

    /// Kernel divisor `V_j(ω_j)` for the phase with index `j` (zero based).
    pub fn v_phase(&self, j: usize, omega_j: f64) -> f64 {
        v_branch(self.alpha1, self.gamma, self.g_vector[j], omega_j)
    }

    pub fn v_phase_derivative(&self, j: usize, omega_j: f64) -> f64 {
        v_branch_derivative(self.gamma, self.g_vector[j], omega_j)
    }
}

/// `V(ω)(m)`; `f64::INFINITY` marks `⟨ω,m⟩ ∈ 2πZ` with `⟨g,m⟩ ≠ 0`.
pub fn v_of_omega(d: &DispersionData, omega: &[f64], m: &ModeIndex) -> f64 {
    v_branch(d.alpha1, d.gamma, d.g_dot(m).abs(), m.dot(omega))
}

/// θ-shifted divisor `V_{|⟨m,g⟩|}(θ + ⟨ω,m⟩)`.
pub fn v_of_theta(d: &DispersionData, theta: f64, omega: &[f64], m: &ModeIndex) -> f64 {
    v_branch(d.alpha1, d.gamma, d.g_dot(m).abs(), theta + m.dot(omega))
}

/// `Λ_j = (jγ)² cos(ω^(0)_j/2)/(4 sin³(ω^(0)_j/2))`.
pub fn lambda_vector(d: &DispersionData) -> Vec<f64> {
    d.lambda.clone()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaMatrix {
    pub entries: DMatrix<f64>,
    pub determinant: f64,
    pub min_abs_entry: f64,
}

/// The second-order amplitude–frequency matrix, with diagonal
/// `3Λ_j⁻¹(F''²/V(2e_j) − F''')` and off-diagonal
/// `2Λ_l⁻¹(F''²(1/V(e_j+e_l) + 1/V(e_j−e_l)) − F''')`, all `V` at `ω^(0)`.
pub fn omega_matrix(law: &ForceLaw, d: &DispersionData) -> Result<OmegaMatrix> {
    let nu = d.nu;
    let f2 = law.second_derivative();
    let f3 = law.third_derivative();
    let v_at = |m: ModeIndex| -> Result<f64> {
        let v = v_of_omega(d, &d.omega0, &m);
        if !v.is_finite() || v == 0.0 {
            return Err(Error::Inconsistent(format!("divisor V({m}) = {v} in the frequency matrix")));
        }
        Ok(v)
    };
    let mut entries = DMatrix::zeros(nu, nu);
    for j in 0..nu {
        for l in 0..nu {
            let ej = ModeIndex::unit(nu, j);
            let el = ModeIndex::unit(nu, l);
            entries[(j, l)] = if j == l {
                3.0 / d.lambda[l] * (f2 * f2 / v_at(ej.add(&ej))? - f3)
            } else {
                let s = 1.0 / v_at(ej.add(&el))? + 1.0 / v_at(ej.sub(&el))?;
                2.0 / d.lambda[l] * (f2 * f2 * s - f3)
            };
        }
    }
    let determinant = entries.determinant();
    let min_abs_entry = entries.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    Ok(OmegaMatrix {
        entries,
        determinant,
        min_abs_entry,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub a1_ok: bool,
    pub a2_ok: bool,
    pub a4_ok: bool,
    pub a3_margin: Vec<(ModeIndex, f64)>,
    pub a3_min_scaled_margin: f64,
    pub cutoff: usize,
    pub tau: f64,
}

/// Canonical representatives `0 < |m| ≤ cutoff`, one per ±pair.
pub fn canonical_shell(nu: usize, cutoff: usize) -> Vec<ModeIndex> {
    crate::spaces::box_modes(nu, cutoff as i32)
        .into_iter()
        .filter(|m| !m.is_zero() && m.is_canonical())
        .collect()
}

/// `dist(⟨ω,m⟩, 2πZ)·|m|^τ` over all `0 < |m| ≤ cutoff` with the minimum.
pub fn diophantine_scan(omega: &[f64], tau: f64, cutoff: usize) -> (Vec<(ModeIndex, f64)>, f64) {
    let modes = canonical_shell(omega.len(), cutoff);
    let score = |m: &ModeIndex| dist_to_2pi_lattice(m.dot(omega)) * (m.norm() as f64).powf(tau);
    #[cfg(feature = "parallel")]
    let margins: Vec<(ModeIndex, f64)> = {
        use rayon::prelude::*;
        modes.into_par_iter().map(|m| {
            let s = score(&m);
            (m, s)
        }).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let margins: Vec<(ModeIndex, f64)> = modes
        .into_iter()
        .map(|m| {
            let s = score(&m);
            (m, s)
        })
        .collect();
    let min = margins.iter().map(|(_, s)| *s).fold(f64::INFINITY, f64::min);
    (margins, min)
}

/// Finite checker for the four standing assumptions. `tau` defaults to `ν+1`.
pub fn check_assumptions(law: &ForceLaw, gamma: f64, tau: Option<f64>, cutoff: usize) -> AssumptionReport {
    let a1_ok = law.alpha1() > 0.0;
    let data = if a1_ok { DispersionData::new(law.alpha1(), gamma).ok() } else { None };
    let Some(d) = data else {
        return AssumptionReport {
            a1_ok,
            a2_ok: false,
            a4_ok: false,
            a3_margin: Vec::new(),
            a3_min_scaled_margin: 0.0,
            cutoff,
            tau: tau.unwrap_or(f64::NAN),
        };
    };
    let tau = tau.unwrap_or(d.nu as f64 + 1.0);
    let (a3_margin, a3_min) = diophantine_scan(&d.omega0, tau, cutoff);
    let a4_ok = match omega_matrix(law, &d) {
        Ok(o) => o.min_abs_entry >= TOL_ENTRY && o.determinant.abs() > TOL_DET,
        Err(_) => false,
    };
    AssumptionReport {
        a1_ok,
        a2_ok: true,
        a4_ok,
        a3_margin,
        a3_min_scaled_margin: a3_min,
        cutoff,
        tau,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcelaw::LawKind;

    fn toda() -> ForceLaw {
        ForceLaw::builtin(LawKind::Toda, 0.0, 8).unwrap()
    }

    #[test]
    fn phase_count_examples() {
        assert_eq!(phase_count(1.0, 0.9).unwrap(), 2);
        assert_eq!(phase_count(1.0, 1.9).unwrap(), 1);
        assert_eq!(phase_count(1.0, 1.0).unwrap_err().code(), "assumption_a2");
        assert_eq!(phase_count(1.0, 2.5).unwrap_err().code(), "assumption_a2");
    }

    #[test]
    fn omega0_examples() {
        let w = omega0(1.0, 0.9, 2).unwrap();
        assert!((w[0] - 0.933_531).abs() < 1e-6);
        assert!((w[1] - 2.239_539).abs() < 1e-6);
        assert!((omega0(1.0, 1.9, 1).unwrap()[0] - 2.0 * 0.95f64.asin()).abs() < 1e-15);
        assert!((omega0(1.0, 1.0, 1).unwrap()[0] - std::f64::consts::FRAC_PI_3).abs() < 1e-15);
        assert!(omega0(1.0, 1.9, 2).is_err());
    }

    #[test]
    fn divisor_examples() {
        let d = DispersionData::new(1.0, 0.9).unwrap();
        let w0 = d.omega0.clone();
        assert_eq!(v_of_omega(&d, &w0, &ModeIndex::new(&[2, -1])), 1.0);
        for j in 0..2 {
            assert!(v_of_omega(&d, &w0, &ModeIndex::unit(2, j)).abs() < 1e-12);
        }
        let v11 = v_of_omega(&d, &w0, &ModeIndex::new(&[1, 1]));
        assert!((v11 + 0.8230).abs() < 1e-4);
        assert_eq!(v_of_omega(&d, &[0.0, 0.0], &ModeIndex::new(&[1, 0])), f64::INFINITY);
        assert_eq!(
            v_of_omega(&d, &[std::f64::consts::PI, 0.0], &ModeIndex::new(&[2, 0])),
            f64::INFINITY
        );
    }

    #[test]
    fn theta_shift_zero_of_v1() {
        let d = DispersionData::new(1.0, 0.9).unwrap();
        let w = [1.1, 2.0];
        let theta = -w[0] + d.omega0[0];
        assert!(v_of_theta(&d, theta, &w, &ModeIndex::unit(2, 0)).abs() < 1e-12);
    }

    #[test]
    fn lambda_examples() {
        let d = DispersionData::new(1.0, 0.9).unwrap();
        let lam = lambda_vector(&d);
        assert!((lam[0] - 1.9845).abs() < 1e-4);
        assert!(lam.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn omega_matrix_examples() {
        let d = DispersionData::new(1.0, 0.9).unwrap();
        let om = omega_matrix(&toda(), &d).unwrap();
        let v2 = v_of_omega(&d, &d.omega0, &ModeIndex::new(&[2, 0]));
        assert!((v2 + 0.2539).abs() < 1e-4);
        assert!((om.entries[(0, 0)] + 7.47).abs() < 5e-3);
        for j in 0..2 {
            for l in 0..2 {
                let lhs = d.lambda[l] * om.entries[(j, l)];
                let rhs = d.lambda[j] * om.entries[(l, j)];
                assert!((lhs - rhs).abs() < 1e-10);
            }
        }
        let quartic = ForceLaw::custom(0.0, vec![0.0, 1.0, 0.0, 0.0, 1.0], None).unwrap();
        let zero = omega_matrix(&quartic, &d).unwrap();
        assert!(zero.entries.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn assumption_checker_examples() {
        let rep = check_assumptions(&toda(), 0.9, Some(2.0), 50);
        assert!(rep.a1_ok && rep.a2_ok);
        assert!(rep.a3_min_scaled_margin > 0.0);
        assert_eq!(rep.a3_margin.len(), (101 * 101 - 1) / 2);
        // toda: 1/V(e_1+e_2) + 1/V(e_1-e_2) = 1, so the off-diagonal entries vanish
        assert!(!rep.a4_ok);
        let cubic = ForceLaw::builtin(LawKind::Cubic, 0.0, 8).unwrap();
        assert!(check_assumptions(&cubic, 0.9, None, 50).a4_ok);

        let linear = ForceLaw::linear(1.0, 0.0).unwrap();
        assert!(!check_assumptions(&linear, 0.9, None, 10).a4_ok);

        let boundary = check_assumptions(&toda(), 2.0 / 3.0, None, 10);
        assert!(!boundary.a2_ok);
    }

    #[test]
    fn reduction_is_accurate_far_out() {
        let x = 1.0e6 * std::f64::consts::TAU + 0.25;
        assert!((dist_to_2pi_lattice(x) - 0.25).abs() < 1e-9);
        assert!(dist_to_2pi_lattice(-std::f64::consts::PI).abs() <= std::f64::consts::PI + 1e-15);
    }
}
