//! Truncated Newton solve of the complement equation, the frequency solve
//! `ω(a)` on the kernel, and the assembled wave solver.
//!
//! Every inner solve runs on the folded representative set: one unknown per
//! ±pair of modes with `0 < |m| ≤ N`, `m ∉ {±e_j}`.


use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcelaw::{nonlinear_on_grid, ForceLaw};
use crate::reduction::{divisor_report, is_kernel_mode, phi, ResidualReport, WaveParameters, DEFAULT_EPS_DIV};
use crate::spaces::{box_modes, FourierSequence, ModeGrid, ModeIndex, WeightFamily, WeightSpec};
use crate::spectral::{v_of_omega, DispersionData};

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationSpec {
    pub n: usize,
    /// `{m : 0 < |m| ≤ N, m ∉ S}`, closed under negation
    pub mode_set: Vec<ModeIndex>,
    /// canonical representatives of `mode_set`
    pub reduced_set: Vec<ModeIndex>,
}

impl TruncationSpec {
    pub fn new(nu: usize, n: usize) -> Result<Self> {
        if nu == 0 {
            return Err(Error::InvalidInput("truncation needs nu >= 1".into()));
        }
        if n < 1 {
            return Err(Error::InvalidInput("truncation radius N must be >= 1".into()));
        }
        let mode_set: Vec<ModeIndex> = box_modes(nu, n as i32)
            .into_iter()
            .filter(|m| !m.is_zero() && !is_kernel_mode(m))
            .collect();
        let reduced_set = mode_set.iter().filter(|m| m.is_canonical()).cloned().collect();
        Ok(TruncationSpec {
            n,
            mode_set,
            reduced_set,
        })
    }

    pub fn nu(&self) -> usize {
        self.mode_set.first().map(|m| m.nu()).unwrap_or(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tol_p: f64,
    pub tol_q: f64,
    pub max_newton: usize,
    pub max_outer: usize,
    pub eps_div: f64,
    pub weight: WeightSpec,
    pub damping: f64,
}

impl SolverConfig {
    /// Defaults with a unit-normalized subexponential weight, σ = 1.
    pub fn new(nu: usize) -> Self {
        SolverConfig {
            tol_p: 1e-12,
            tol_q: 1e-13,
            max_newton: 30,
            max_outer: 30,
            eps_div: DEFAULT_EPS_DIV,
            weight: WeightSpec::unit(nu, WeightFamily::Subexponential, 1.0),
            damping: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("tol_p", self.tol_p), ("tol_q", self.tol_q), ("eps_div", self.eps_div)] {
            if !(x > 0.0) {
                return Err(Error::InvalidInput(format!("{name} = {x} must be positive")));
            }
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidInput(format!("damping {} must lie in (0,1]", self.damping)));
        }
        if self.max_newton == 0 || self.max_outer == 0 {
            return Err(Error::InvalidInput("iteration caps must be positive".into()));
        }
        self.weight.validate()
    }
}

/// Below this residual Newton steps are taken undamped.
const UNDAMPED_BELOW: f64 = 1e-4;

/// Result of one complement solve at fixed `λ`.
#[derive(Debug, Clone)]
pub struct PSolve {
    pub v: FourierSequence,
    /// `W(φ(a)+v)(e_j)`
    pub kernel_w: Vec<f64>,
    pub trace: Vec<f64>,
    pub p_residual: f64,
    pub min_divisor: f64,
    pub worst_mode: ModeIndex,
    /// `lim W(e_j)/a_j` for phases with `a_j = 0`, `None` otherwise
    pub degenerate_slope: Vec<Option<f64>>,
}

/// Complement solver bound to one law, dispersion data and truncation.
pub struct Engine<'a> {
    law: &'a ForceLaw,
    d: &'a DispersionData,
    trunc: &'a TruncationSpec,
    config: &'a SolverConfig,
    radius: i32,
    weights: Vec<f64>,
}

struct Evaluation {
    residual: DVector<f64>,
    norm: f64,
    w: ModeGrid,
    r: ModeGrid,
}

impl<'a> Engine<'a> {
    pub fn new(
        law: &'a ForceLaw,
        d: &'a DispersionData,
        trunc: &'a TruncationSpec,
        config: &'a SolverConfig,
    ) -> Result<Self> {
        if trunc.nu() != d.nu || config.weight.nu != d.nu {
            return Err(Error::Dimension {
                expected: d.nu,
                found: trunc.nu(),
            });
        }
        config.validate()?;
        // each representative stands for m and -m in the weighted norm
        let weights = trunc.reduced_set.iter().map(|m| 2.0 * config.weight.value(m)).collect();
        Ok(Engine {
            law,
            d,
            trunc,
            config,
            radius: 2 * trunc.n as i32,
            weights,
        })
    }

    pub fn dimension(&self) -> usize {
        self.trunc.reduced_set.len()
    }

    fn sequence_of(&self, a: &[f64], x: &DVector<f64>) -> FourierSequence {
        let mut u = phi(a);
        for (i, m) in self.trunc.reduced_set.iter().enumerate() {
            if x[i] != 0.0 {
                u.add_at(m, x[i]);
            }
        }
        u
    }

    fn v_only(&self, x: &DVector<f64>) -> FourierSequence {
        let mut v = FourierSequence::zeros(self.d.nu);
        for (i, m) in self.trunc.reduced_set.iter().enumerate() {
            v.add_at(m, x[i]);
        }
        v
    }

    fn divisors(&self, omega: &[f64]) -> Vec<f64> {
        self.trunc
            .reduced_set
            .iter()
            .map(|m| v_of_omega(self.d, omega, m))
            .collect()
    }

    fn evaluate(&self, lambda: &WaveParameters, diag: &[f64], x: &DVector<f64>) -> Evaluation {
        let u = self.sequence_of(&lambda.a, x);
        let grid = ModeGrid::from_sequence(&u, self.radius);
        let (w, r) = nonlinear_on_grid(self.law, &grid);
        let residual = DVector::from_iterator(
            x.len(),
            self.trunc
                .reduced_set
                .iter()
                .enumerate()
                .map(|(i, m)| diag[i] * x[i] + w.get(m)),
        );
        let norm = residual.iter().zip(&self.weights).map(|(p, w)| w * p.abs()).sum();
        Evaluation { residual, norm, w, r }
    }

    /// Folded Jacobian `V(m)δ_{mn} + r(m−n) + r(m+n)` over representatives.
    pub fn assemble(&self, diag: &[f64], r: &ModeGrid) -> DMatrix<f64> {
        let reps = &self.trunc.reduced_set;
        let n = reps.len();
        DMatrix::from_fn(n, n, |i, j| {
            let (mi, mj) = (&reps[i], &reps[j]);
            let mut x = r.get(&mi.sub(mj)) + r.get(&mi.add(mj));
            if i == j {
                x += diag[i];
            }
            x
        })
    }

    fn factor(&self, jac: DMatrix<f64>) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
        let lu = jac.lu();
        let pivot = lu.u().diagonal().iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        if !(pivot > 0.0 && pivot.is_finite()) {
            return Err(Error::Conditioning { pivot });
        }
        Ok(lu)
    }

    /// Newton iteration for `𝒫(v, λ) = 0` from `v = 0`.
    pub fn solve_p(&self, lambda: &WaveParameters) -> Result<PSolve> {
        let nu = self.d.nu;
        if lambda.nu() != nu {
            return Err(Error::Dimension {
                expected: nu,
                found: lambda.nu(),
            });
        }
        let (min_divisor, worst_mode) =
            divisor_report(self.d, &lambda.omega, &self.trunc.reduced_set, self.config.eps_div)?;
        let diag = self.divisors(&lambda.omega);
        let dim = self.dimension();
        let mut x = DVector::zeros(dim);
        let mut trace = Vec::new();
        let mut eval = self.evaluate(lambda, &diag, &x);
        if lambda.a.iter().all(|&a| a == 0.0) {
            // the zero amplitude wave is exactly v = 0
            trace.push(eval.norm);
        } else {
            loop {
                trace.push(eval.norm);
                if eval.norm <= self.config.tol_p {
                    break;
                }
                if trace.len() > self.config.max_newton {
                    return Err(Error::NonConvergence {
                        stage: "complement Newton",
                        iterations: trace.len() - 1,
                        residual: eval.norm,
                        trace,
                    });
                }
                let lu = self.factor(self.assemble(&diag, &eval.r))?;
                let step = lu
                    .solve(&eval.residual)
                    .ok_or(Error::Conditioning { pivot: 0.0 })?;
                let factors: &[f64] = if eval.norm < UNDAMPED_BELOW {
                    &[1.0]
                } else {
                    &[1.0, 0.5, 0.25]
                };
                let mut accepted = None;
                for &f in factors {
                    let s = f * self.config.damping;
                    let trial = &x - &step * s;
                    let te = self.evaluate(lambda, &diag, &trial);
                    let last = accepted.is_none() && f == *factors.last().unwrap();
                    if te.norm < eval.norm || last {
                        accepted = Some((trial, te));
                        break;
                    }
                }
                let (nx, ne) = accepted.expect("line search always accepts its last factor");
                if !ne.norm.is_finite() {
                    return Err(Error::NonConvergence {
                        stage: "complement Newton",
                        iterations: trace.len(),
                        residual: ne.norm,
                        trace,
                    });
                }
                x = nx;
                eval = ne;
            }
        }
        let kernel_w: Vec<f64> = (0..nu).map(|j| eval.w.get(&ModeIndex::unit(nu, j))).collect();
        let degenerate_slope = self.degenerate_slopes(lambda, &diag, &eval)?;
        Ok(PSolve {
            v: self.v_only(&x),
            kernel_w,
            trace,
            p_residual: eval.norm,
            min_divisor,
            worst_mode,
            degenerate_slope,
        })
    }

    /// For `a_j = 0`: `∂_{a_j} W(φ(a)+v)(e_j) = [DW(u)(ẽ_j + w)](e_j)` with
    /// `T w = −P DW(u) ẽ_j`, the limit of `W(e_j)/a_j`.
    fn degenerate_slopes(
        &self,
        lambda: &WaveParameters,
        diag: &[f64],
        eval: &Evaluation,
    ) -> Result<Vec<Option<f64>>> {
        let nu = self.d.nu;
        let reps = &self.trunc.reduced_set;
        let mut out = vec![None; nu];
        let mut lu = None;
        for j in 0..nu {
            if lambda.a[j] != 0.0 {
                continue;
            }
            let ej = ModeIndex::unit(nu, j);
            let r = &eval.r;
            if lu.is_none() {
                lu = Some(self.factor(self.assemble(diag, r))?);
            }
            let rhs = DVector::from_iterator(
                reps.len(),
                reps.iter().map(|m| -(r.get(&m.sub(&ej)) + r.get(&m.add(&ej)))),
            );
            let w = lu
                .as_ref()
                .unwrap()
                .solve(&rhs)
                .ok_or(Error::Conditioning { pivot: 0.0 })?;
            let mut s = r.get(&ModeIndex::zero(nu)) + r.get(&ej.add(&ej));
            for (i, m) in reps.iter().enumerate() {
                s += w[i] * (r.get(&ej.sub(m)) + r.get(&ej.add(m)));
            }
            out[j] = Some(s);
        }
        Ok(out)
    }

    /// `h̃_j = V_j(ω_j) + W(e_j)/a_j`, using the degenerate limit for `a_j = 0`.
    pub fn h_tilde(&self, lambda: &WaveParameters, ps: &PSolve) -> Vec<f64> {
        (0..self.d.nu)
            .map(|j| {
                let v = self.d.v_phase(j, lambda.omega[j]);
                match ps.degenerate_slope[j] {
                    Some(s) => v + s,
                    None => v + ps.kernel_w[j] / lambda.a[j],
                }
            })
            .collect()
    }
}

/// Newton iteration for `𝒫(v, λ) = 0` at fixed `λ`, from `v = 0`.
pub fn newton_p(
    law: &ForceLaw,
    d: &DispersionData,
    lambda: &WaveParameters,
    trunc: &TruncationSpec,
    config: &SolverConfig,
) -> Result<(FourierSequence, Vec<f64>)> {
    let engine = Engine::new(law, d, trunc, config)?;
    let ps = engine.solve_p(lambda)?;
    Ok((ps.v, ps.trace))
}

/// Dense folded Jacobian of `𝒫` at `(v, λ)` over `trunc.reduced_set`.
pub fn assemble_linearized(
    law: &ForceLaw,
    d: &DispersionData,
    lambda: &WaveParameters,
    v: &FourierSequence,
    trunc: &TruncationSpec,
    config: &SolverConfig,
) -> Result<DMatrix<f64>> {
    let engine = Engine::new(law, d, trunc, config)?;
    divisor_report(d, &lambda.omega, &trunc.reduced_set, config.eps_div)?;
    let u = phi(&lambda.a).plus(&crate::reduction::project_p(v))?;
    let grid = ModeGrid::from_sequence(&u, engine.radius);
    let (_, r) = nonlinear_on_grid(law, &grid);
    Ok(engine.assemble(&engine.divisors(&lambda.omega), &r))
}

/// Outcome of the frequency solve.
#[derive(Debug, Clone)]
pub struct QSolve {
    pub omega: Vec<f64>,
    pub p: PSolve,
    pub h_tilde: Vec<f64>,
    /// `max_j |h̃_j|` per outer iteration
    pub trace: Vec<f64>,
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Newton iteration on `h̃(a, ω) = 0` with the diagonal `dV_j/dω_j` as
/// Jacobian, switched to a forward-difference Jacobian once `|h̃| < 10·tol_Q`.
///
/// `provider` returns the complement solve at a trial `ω`; `h_tilde` maps it
/// to `h̃`.
pub fn solve_q_with<P, H>(
    d: &DispersionData,
    omega_start: &[f64],
    config: &SolverConfig,
    mut provider: P,
    h_tilde: H,
) -> Result<QSolve>
where
    P: FnMut(&[f64]) -> Result<PSolve>,
    H: Fn(&[f64], &PSolve) -> Vec<f64>,
{
    let nu = d.nu;
    let mut omega = omega_start.to_vec();
    let mut trace = Vec::new();
    loop {
        let ps = provider(&omega)?;
        let h = h_tilde(&omega, &ps);
        let size = max_abs(&h);
        trace.push(size);
        if size <= config.tol_q {
            return Ok(QSolve {
                omega,
                p: ps,
                h_tilde: h,
                trace,
            });
        }
        if trace.len() > config.max_outer || !size.is_finite() {
            return Err(Error::NonConvergence {
                stage: "frequency solve",
                iterations: trace.len() - 1,
                residual: size,
                trace,
            });
        }
        let step = if size < 10.0 * config.tol_q {
            let mut jac = DMatrix::zeros(nu, nu);
            for l in 0..nu {
                let dw = 1e-7 * omega[l].abs().max(1.0);
                let mut shifted = omega.clone();
                shifted[l] += dw;
                let hp = h_tilde(&shifted, &provider(&shifted)?);
                for j in 0..nu {
                    jac[(j, l)] = (hp[j] - h[j]) / dw;
                }
            }
            jac.lu()
                .solve(&DVector::from_column_slice(&h))
                .ok_or(Error::Conditioning { pivot: 0.0 })?
                .as_slice()
                .to_vec()
        } else {
            (0..nu)
                .map(|j| h[j] / d.v_phase_derivative(j, omega[j]))
                .collect()
        };
        for j in 0..nu {
            omega[j] -= step[j];
        }
    }
}

/// Frequency solve `ω(a)` for a fully nondegenerate amplitude vector.
pub fn solve_q_for_omega(
    law: &ForceLaw,
    d: &DispersionData,
    a: &[f64],
    trunc: &TruncationSpec,
    config: &SolverConfig,
) -> Result<QSolve> {
    if a.len() != d.nu {
        return Err(Error::Dimension {
            expected: d.nu,
            found: a.len(),
        });
    }
    if let Some(j) = a.iter().position(|&x| x == 0.0) {
        return Err(Error::DegenerateAmplitude { index: j + 1 });
    }
    let engine = Engine::new(law, d, trunc, config)?;
    solve_q_engine(&engine, d, a)
}

fn solve_q_engine(engine: &Engine<'_>, d: &DispersionData, a: &[f64]) -> Result<QSolve> {
    let lam = |w: &[f64]| WaveParameters {
        a: a.to_vec(),
        omega: w.to_vec(),
    };
    solve_q_with(
        d,
        &d.omega0,
        engine.config,
        |w| engine.solve_p(&lam(w)),
        |w, ps| engine.h_tilde(&lam(w), ps),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct WaveSolution {
    pub a: Vec<f64>,
    pub omega: Vec<f64>,
    pub omega0: Vec<f64>,
    pub gamma: f64,
    pub g_vector: Vec<i64>,
    pub n_truncation: usize,
    #[serde(skip)]
    pub v: FourierSequence,
    pub report: ResidualReport,
    pub newton_trace: Vec<f64>,
    pub frequency_trace: Vec<f64>,
}

impl WaveSolution {
    /// Full Fourier sequence `u = φ(a) + v`.
    pub fn u(&self) -> FourierSequence {
        phi(&self.a).plus(&self.v).expect("matching dimensions")
    }

    pub fn parameters(&self) -> WaveParameters {
        WaveParameters {
            a: self.a.clone(),
            omega: self.omega.clone(),
        }
    }
}

/// Solves the full travelling-wave problem at amplitude `a`.
///
/// Phases with `a_j = 0` are kept: their frequency is fixed by the limit of
/// `h̃_j` as `a_j → 0`, which is what makes `ω(a)` smooth across the axes.
pub fn solve_wave(
    law: &ForceLaw,
    gamma: f64,
    a: &[f64],
    trunc: &TruncationSpec,
    config: &SolverConfig,
) -> Result<WaveSolution> {
    let d = DispersionData::from_law(law, gamma)?;
    solve_wave_with(law, &d, a, trunc, config)
}

/// As [`solve_wave`], with explicit dispersion data (e.g. a phase subset).
pub fn solve_wave_with(
    law: &ForceLaw,
    d: &DispersionData,
    a: &[f64],
    trunc: &TruncationSpec,
    config: &SolverConfig,
) -> Result<WaveSolution> {
    if a.len() != d.nu {
        return Err(Error::Dimension {
            expected: d.nu,
            found: a.len(),
        });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("amplitudes must be finite".into()));
    }
    let engine = Engine::new(law, d, trunc, config)?;
    let q = solve_q_engine(&engine, d, a)?;
    let h: Vec<f64> = (0..d.nu).map(|j| a[j] * q.h_tilde[j]).collect();
    Ok(WaveSolution {
        a: a.to_vec(),
        omega: q.omega,
        omega0: d.omega0.clone(),
        gamma: d.gamma,
        g_vector: d.g_vector.clone(),
        n_truncation: trunc.n,
        report: ResidualReport {
            p_residual_norm: q.p.p_residual,
            q_residual: h,
            min_divisor: q.p.min_divisor,
            worst_mode: q.p.worst_mode.clone(),
        },
        newton_trace: q.p.trace.clone(),
        frequency_trace: q.trace,
        v: q.p.v,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SecondOrderReport {
    /// `fd[(j, l)] ≈ ∂²ω_l/∂a_j²(0)`
    pub fd: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    /// largest `|fd − Ω|` over entries
    pub max_abs_deviation: f64,
    /// largest `|fd − Ω|/|Ω|` over entries with `Ω ≠ 0`
    pub max_rel_deviation: f64,
    /// `mixed[(j,k)] = max_l |∂²ω_l/∂a_j∂a_k(0)|`, zero on the diagonal
    pub mixed: DMatrix<f64>,
    pub max_mixed: f64,
    pub h_fd: f64,
}

fn par_map<T: Send, R: Send, F: Fn(&T) -> R + Sync + Send>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Central second differences of `ω(a)` at `a = 0` against the matrix
/// `omega` (rows indexed by the amplitude direction).
pub fn second_order_check(
    law: &ForceLaw,
    gamma: f64,
    trunc: &TruncationSpec,
    config: &SolverConfig,
    h_fd: f64,
    omega: &DMatrix<f64>,
) -> Result<SecondOrderReport> {
    let d = DispersionData::from_law(law, gamma)?;
    let nu = d.nu;
    if omega.nrows() != nu || omega.ncols() != nu {
        return Err(Error::Dimension {
            expected: nu,
            found: omega.nrows(),
        });
    }
    let mut points: Vec<Vec<f64>> = Vec::new();
    for j in 0..nu {
        for s in [1.0, -1.0] {
            let mut a = vec![0.0; nu];
            a[j] = s * h_fd;
            points.push(a);
        }
    }
    for j in 0..nu {
        for k in j + 1..nu {
            for (sj, sk) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut a = vec![0.0; nu];
                a[j] = sj * h_fd;
                a[k] = sk * h_fd;
                points.push(a);
            }
        }
    }
    let solved = par_map(points, |a| solve_wave_with(law, &d, a, trunc, config).map(|s| s.omega));
    let solved: Vec<Vec<f64>> = solved.into_iter().collect::<Result<_>>()?;
    let h2 = h_fd * h_fd;
    let w0 = &d.omega0;
    let mut fd = DMatrix::zeros(nu, nu);
    for j in 0..nu {
        let (p, m) = (&solved[2 * j], &solved[2 * j + 1]);
        for l in 0..nu {
            fd[(j, l)] = (p[l] - 2.0 * w0[l] + m[l]) / h2;
        }
    }
    let mut mixed = DMatrix::zeros(nu, nu);
    let mut idx = 2 * nu;
    for j in 0..nu {
        for k in j + 1..nu {
            let q = &solved[idx..idx + 4];
            idx += 4;
            let worst = (0..nu)
                .map(|l| ((q[0][l] - q[1][l] - q[2][l] + q[3][l]) / (4.0 * h2)).abs())
                .fold(0.0, f64::max);
            mixed[(j, k)] = worst;
            mixed[(k, j)] = worst;
        }
    }
    let mut max_abs_deviation: f64 = 0.0;
    let mut max_rel_deviation: f64 = 0.0;
    for (x, o) in fd.iter().zip(omega.iter()) {
        let dev = (x - o).abs();
        max_abs_deviation = max_abs_deviation.max(dev);
        if *o != 0.0 {
            max_rel_deviation = max_rel_deviation.max(dev / o.abs());
        }
    }
    let max_mixed = mixed.iter().cloned().fold(0.0, f64::max);
    Ok(SecondOrderReport {
        fd,
        omega: omega.clone(),
        max_abs_deviation,
        max_rel_deviation,
        mixed,
        max_mixed,
        h_fd,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub a: Vec<f64>,
    pub magnitude: f64,
    pub omega: Option<Vec<f64>>,
    pub p_residual: Option<f64>,
    pub q_residual: Option<Vec<f64>>,
    pub error: Option<String>,
}

/// Solves along each direction (normalized to Euclidean length 1) at each
/// magnitude. Failures are tagged per row.
pub fn amplitude_sweep(
    law: &ForceLaw,
    gamma: f64,
    directions: &[Vec<f64>],
    magnitudes: &[f64],
    trunc: &TruncationSpec,
    config: &SolverConfig,
) -> Result<Vec<SweepRow>> {
    let d = DispersionData::from_law(law, gamma)?;
    let mut jobs = Vec::new();
    for dir in directions {
        if dir.len() != d.nu {
            return Err(Error::Dimension {
                expected: d.nu,
                found: dir.len(),
            });
        }
        let len = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(len > 0.0) {
            return Err(Error::InvalidInput("sweep direction must be nonzero".into()));
        }
        for &mag in magnitudes {
            jobs.push((dir.iter().map(|x| mag * x / len).collect::<Vec<f64>>(), mag));
        }
    }
    Ok(par_map(jobs, |(a, mag)| match solve_wave_with(law, &d, a, trunc, config) {
        Ok(s) => SweepRow {
            a: a.clone(),
            magnitude: *mag,
            omega: Some(s.omega),
            p_residual: Some(s.report.p_residual_norm),
            q_residual: Some(s.report.q_residual),
            error: None,
        },
        Err(e) => SweepRow {
            a: a.clone(),
            magnitude: *mag,
            omega: None,
            p_residual: None,
            q_residual: None,
            error: Some(e.code().to_string()),
        },
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcelaw::LawKind;

    fn setup(kind: LawKind) -> (ForceLaw, DispersionData) {
        let law = ForceLaw::builtin(kind, 0.0, 8).unwrap();
        let d = DispersionData::from_law(&law, 0.9).unwrap();
        (law, d)
    }

    #[test]
    fn truncation_excludes_kernel_and_origin() {
        let t = TruncationSpec::new(2, 3).unwrap();
        assert_eq!(t.mode_set.len(), 49 - 5);
        assert_eq!(t.reduced_set.len(), 22);
        for m in &t.mode_set {
            assert!(t.mode_set.contains(&m.neg()));
        }
    }

    #[test]
    fn linear_law_assembles_diagonal() {
        let law = ForceLaw::linear(1.0, 0.0).unwrap();
        let d = DispersionData::from_law(&law, 0.9).unwrap();
        let t = TruncationSpec::new(2, 3).unwrap();
        let cfg = SolverConfig::new(2);
        let lam = WaveParameters::new(vec![0.01, 0.02], d.omega0.clone()).unwrap();
        let jac = assemble_linearized(&law, &d, &lam, &FourierSequence::zeros(2), &t, &cfg).unwrap();
        for i in 0..jac.nrows() {
            for j in 0..jac.ncols() {
                let expect = if i == j { v_of_omega(&d, &d.omega0, &t.reduced_set[i]) } else { 0.0 };
                assert_eq!(jac[(i, j)], expect);
            }
        }
        let (v, trace) = newton_p(&law, &d, &lam, &t, &cfg).unwrap();
        assert!(v.is_zero());
        assert_eq!(trace.len(), 1);
    }

    #[test]
    fn quadratic_off_diagonal_entries() {
        let (law, d) = setup(LawKind::Quadratic);
        let t = TruncationSpec::new(2, 3).unwrap();
        let cfg = SolverConfig::new(2);
        let tt = 0.01;
        let lam = WaveParameters::new(vec![tt, 0.0], d.omega0.clone()).unwrap();
        let jac = assemble_linearized(&law, &d, &lam, &FourierSequence::zeros(2), &t, &cfg).unwrap();
        let e1 = ModeIndex::unit(2, 0);
        for (i, mi) in t.reduced_set.iter().enumerate() {
            for (j, mj) in t.reduced_set.iter().enumerate() {
                if i == j {
                    continue;
                }
                let diff = mi.sub(mj);
                let sum = mi.add(mj);
                let hits = [diff.clone(), diff.neg(), sum.clone(), sum.neg()]
                    .iter()
                    .filter(|k| **k == e1)
                    .count();
                assert_eq!(jac[(i, j)], 2.0 * tt * hits as f64, "{mi} {mj}");
            }
        }
    }

    #[test]
    fn zero_amplitude_returns_zero_immediately() {
        let (law, d) = setup(LawKind::Toda);
        let t = TruncationSpec::new(2, 4).unwrap();
        let s = solve_wave_with(&law, &d, &[0.0, 0.0], &t, &SolverConfig::new(2)).unwrap();
        assert!(s.v.is_zero());
        assert_eq!(s.omega, d.omega0);
    }

    #[test]
    fn degenerate_amplitude_is_rejected_by_frequency_solve() {
        let (law, d) = setup(LawKind::Toda);
        let t = TruncationSpec::new(2, 4).unwrap();
        let err = solve_q_for_omega(&law, &d, &[0.01, 0.0], &t, &SolverConfig::new(2)).unwrap_err();
        assert_eq!(err, Error::DegenerateAmplitude { index: 2 });
    }

    #[test]
    fn linear_law_frequency_is_omega0() {
        let law = ForceLaw::linear(1.0, 0.0).unwrap();
        let d = DispersionData::from_law(&law, 0.9).unwrap();
        let t = TruncationSpec::new(2, 4).unwrap();
        let q = solve_q_for_omega(&law, &d, &[0.01, 0.01], &t, &SolverConfig::new(2)).unwrap();
        for j in 0..2 {
            assert!((q.omega[j] - d.omega0[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_and_trivial_sweeps() {
        let (law, _) = setup(LawKind::Toda);
        let t = TruncationSpec::new(2, 4).unwrap();
        let cfg = SolverConfig::new(2);
        let rows = amplitude_sweep(&law, 0.9, &[vec![1.0, 1.0]], &[], &t, &cfg).unwrap();
        assert!(rows.is_empty());
        let rows = amplitude_sweep(&law, 0.9, &[vec![1.0, 1.0]], &[0.0], &t, &cfg).unwrap();
        let d = DispersionData::from_law(&law, 0.9).unwrap();
        assert_eq!(rows[0].omega.as_ref().unwrap(), &d.omega0);
    }
}
