//! Direct integration of the chain `ẍ_n = F(x_{n−1}−x_n) − F(x_n−x_{n+1})`
//! on a finite window driven at both ends by a prescribed motion.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forcelaw::ForceLaw;
use crate::reduction::WaveAnsatz;
use crate::solver::WaveSolution;
use crate::spectral::DispersionData;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub n_min: i64,
    pub n_max: i64,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub time: f64,
}

impl ChainState {
    pub fn new(n_min: i64, n_max: i64, positions: Vec<f64>, velocities: Vec<f64>, time: f64) -> Result<Self> {
        let len = window_len(n_min, n_max)?;
        if positions.len() != len || velocities.len() != len {
            return Err(Error::InvalidInput(format!(
                "window of {len} sites needs {len} positions and velocities"
            )));
        }
        Ok(ChainState {
            n_min,
            n_max,
            positions,
            velocities,
            time,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

fn window_len(n_min: i64, n_max: i64) -> Result<usize> {
    if n_max < n_min {
        return Err(Error::InvalidInput(format!("empty window [{n_min}, {n_max}]")));
    }
    Ok((n_max - n_min + 1) as usize)
}

/// Motion of the sites just outside the window.
pub trait Boundary {
    fn position(&self, n: i64, t: f64) -> f64;
    fn velocity(&self, n: i64, t: f64) -> f64;
}

impl Boundary for WaveAnsatz {
    fn position(&self, n: i64, t: f64) -> f64 {
        WaveAnsatz::position(self, n, t)
    }

    fn velocity(&self, n: i64, t: f64) -> f64 {
        WaveAnsatz::velocity(self, n, t)
    }
}

/// Sites outside the window held on the lattice `x_n = n·b` at rest.
#[derive(Debug, Clone, Copy)]
pub struct RestingBoundary {
    pub b: f64,
}

impl Boundary for RestingBoundary {
    fn position(&self, n: i64, _t: f64) -> f64 {
        n as f64 * self.b
    }

    fn velocity(&self, _n: i64, _t: f64) -> f64 {
        0.0
    }
}

/// Accelerations of the window sites given the two boundary positions.
pub fn chain_rhs(law: &ForceLaw, positions: &[f64], left: f64, right: f64) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; positions.len()];
    chain_rhs_into(law, positions, left, right, &mut acc)?;
    Ok(acc)
}

fn chain_rhs_into(law: &ForceLaw, x: &[f64], left: f64, right: f64, acc: &mut [f64]) -> Result<()> {
    let len = x.len();
    // bond force between site k-1 and k, for k = 0..=len
    let mut prev = law.eval(left - x[0])?;
    for k in 0..len {
        let next_pos = if k + 1 < len { x[k + 1] } else { right };
        let next = law.eval(x[k] - next_pos)?;
        acc[k] = prev - next;
        prev = next;
    }
    Ok(())
}

/// Classical fourth-order Runge–Kutta over `[t0, t0 + duration]` with
/// `round(duration/dt)` equal steps. `observer` sees every accepted state,
/// including the initial one.
pub fn integrate<B: Boundary>(
    law: &ForceLaw,
    initial: &ChainState,
    boundary: &B,
    duration: f64,
    dt: f64,
    mut observer: impl FnMut(&ChainState) -> Result<()>,
) -> Result<ChainState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("time step {dt} must be positive")));
    }
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::InvalidInput(format!("duration {duration} must be nonnegative")));
    }
    let steps = (duration / dt).round() as usize;
    let h = if steps > 0 { duration / steps as f64 } else { 0.0 };
    let len = initial.len();
    let (lo, hi) = (initial.n_min - 1, initial.n_max + 1);
    let mut s = initial.clone();
    observer(&s)?;
    let mut k = [vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    let mut kv = [vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    let mut xs = vec![0.0; len];
    let mut vs = vec![0.0; len];
    let t0 = initial.time;
    for step in 0..steps {
        let t = t0 + step as f64 * h;
        // stage 1
        chain_rhs_into(law, &s.positions, boundary.position(lo, t), boundary.position(hi, t), &mut kv[0])?;
        k[0].copy_from_slice(&s.velocities);
        // stages 2-4
        for stage in 1..4 {
            let c = if stage == 3 { h } else { 0.5 * h };
            let ts = t + c;
            for i in 0..len {
                xs[i] = s.positions[i] + c * k[stage - 1][i];
                vs[i] = s.velocities[i] + c * kv[stage - 1][i];
            }
            chain_rhs_into(law, &xs, boundary.position(lo, ts), boundary.position(hi, ts), &mut kv[stage])?;
            k[stage].copy_from_slice(&vs);
        }
        for i in 0..len {
            s.positions[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
            s.velocities[i] += h / 6.0 * (kv[0][i] + 2.0 * kv[1][i] + 2.0 * kv[2][i] + kv[3][i]);
        }
        s.time = t0 + (step + 1) as f64 * h;
        if s.positions.iter().chain(&s.velocities).any(|x| !x.is_finite()) {
            return Err(Error::BlowUp { time: s.time });
        }
        observer(&s)?;
    }
    Ok(s)
}

/// Window energy `Σ ½ẋ² + Σ Φ(x_n − x_{n+1})`, including the two bonds
/// to the boundary sites.
pub fn window_energy<B: Boundary>(law: &ForceLaw, s: &ChainState, boundary: &B) -> Result<f64> {
    let len = s.len();
    let left = boundary.position(s.n_min - 1, s.time);
    let right = boundary.position(s.n_max + 1, s.time);
    let mut e: f64 = s.velocities.iter().map(|v| 0.5 * v * v).sum();
    e += law.potential(left - s.positions[0])?;
    for i in 0..len {
        let next = if i + 1 < len { s.positions[i + 1] } else { right };
        e += law.potential(s.positions[i] - next)?;
    }
    Ok(e)
}

/// Power fed in through the two boundary bonds.
fn boundary_flux<B: Boundary>(law: &ForceLaw, s: &ChainState, boundary: &B) -> Result<f64> {
    let (lo, hi) = (s.n_min - 1, s.n_max + 1);
    let fl = law.eval(boundary.position(lo, s.time) - s.positions[0])?;
    let fr = law.eval(s.positions[s.len() - 1] - boundary.position(hi, s.time))?;
    Ok(fl * boundary.velocity(lo, s.time) - fr * boundary.velocity(hi, s.time))
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub max_deviation: f64,
    pub energy_drift: f64,
    pub steps: usize,
    pub dt: f64,
    /// `sup_t |x_n − x_n^ansatz|` per window site
    pub site_deviation: Vec<f64>,
}

/// Integrates the chain from the wave's own initial data with the wave as
/// boundary driver, and measures the departure from the wave.
pub fn verify_travelling_wave(
    law: &ForceLaw,
    solution: &WaveSolution,
    window: (i64, i64),
    duration: f64,
    dt: f64,
    eps_div: f64,
) -> Result<VerificationReport> {
    let ansatz = wave_ansatz(law, solution, eps_div)?;
    verify_ansatz(law, &ansatz, window, duration, dt, |_| Ok(()))
}

pub fn wave_ansatz(law: &ForceLaw, solution: &WaveSolution, eps_div: f64) -> Result<WaveAnsatz> {
    let d = DispersionData::with_phases(law.alpha1(), solution.gamma, solution.g_vector.clone())?;
    WaveAnsatz::new(&solution.u(), &d, &solution.omega, law.base_point, eps_div)
}

/// Core of [`verify_travelling_wave`] for any ansatz; `sample` receives
/// `(n, t, x_integrated, x_ansatz)` blocks per step.
pub fn verify_ansatz(
    law: &ForceLaw,
    ansatz: &WaveAnsatz,
    window: (i64, i64),
    duration: f64,
    dt: f64,
    mut sample: impl FnMut(&[(i64, f64, f64, f64)]) -> Result<()>,
) -> Result<VerificationReport> {
    let (n_min, n_max) = window;
    let len = window_len(n_min, n_max)?;
    if len < 16 {
        return Err(Error::InvalidInput(format!("window of {len} sites is below 16")));
    }
    let positions: Vec<f64> = (n_min..=n_max).map(|n| ansatz.position(n, 0.0)).collect();
    let velocities: Vec<f64> = (n_min..=n_max).map(|n| ansatz.velocity(n, 0.0)).collect();
    let initial = ChainState::new(n_min, n_max, positions, velocities, 0.0)?;
    let e0 = window_energy(law, &initial, ansatz)?;
    let mut site_deviation = vec![0.0f64; len];
    let mut exact = vec![0.0; len];
    let mut flux_integral = 0.0;
    let mut last_flux: Option<(f64, f64)> = None;
    let mut steps = 0usize;
    let mut rows = Vec::new();
    let last = integrate(law, &initial, ansatz, duration, dt, |s| {
        ansatz.positions_block(n_min, len, s.time, &mut exact);
        rows.clear();
        for i in 0..len {
            let dev = (s.positions[i] - exact[i]).abs();
            site_deviation[i] = if dev.is_nan() { f64::INFINITY } else { dev.max(site_deviation[i]) };
            rows.push((n_min + i as i64, s.time, s.positions[i], exact[i]));
        }
        sample(&rows)?;
        let f = boundary_flux(law, s, ansatz)?;
        if let Some((t_prev, f_prev)) = last_flux {
            flux_integral += 0.5 * (f + f_prev) * (s.time - t_prev);
            steps += 1;
        }
        last_flux = Some((s.time, f));
        Ok(())
    })?;
    let e1 = window_energy(law, &last, ansatz)?;
    let energy_drift = (e1 - e0 - flux_integral).abs() / e0.abs().max(f64::MIN_POSITIVE);
    let max_deviation = site_deviation.iter().cloned().fold(0.0, f64::max);
    Ok(VerificationReport {
        max_deviation,
        energy_drift,
        steps,
        dt: if steps > 0 { duration / steps as f64 } else { dt },
        site_deviation,
    })
}
