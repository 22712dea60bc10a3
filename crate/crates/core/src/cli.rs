//! The `phasewave` command-line tool.
//!
//! Exit codes: 0 on success, 1 on a domain error (written to stderr as JSON
//! `{code, message, context}`), 2 on a usage error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dynamics::verify_ansatz;
use crate::error::{Error, Result};
use crate::forcelaw::{ForceLaw, LawKind, DEFAULT_ORDER};
use crate::reduction::{reconstruct_profile, WaveAnsatz, DEFAULT_EPS_DIV};
use crate::smalldiv::{
    build_cover, coupling_invert, excision_bound, excision_measure, resultant_ominus, verify_resultant_identity,
    weierstrass::{demo_family, weierstrass_prepare, PreparationSettings},
    BlockCover, Polynomial,
};
use crate::solver::{amplitude_sweep, solve_wave, SolverConfig, TruncationSpec, WaveSolution};
use crate::spaces::{FourierSequence, LatticeOperator, ModeIndex, WeightFamily, WeightSpec};
use crate::spectral::{check_assumptions, DispersionData, DEFAULT_A3_CUTOFF};

fn default_k() -> usize {
    DEFAULT_ORDER
}

/// Force-law block `{type, b, K, coefficients?, radius?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawConfig {
    #[serde(rename = "type")]
    pub kind: LawKind,
    #[serde(default)]
    pub b: f64,
    #[serde(rename = "K", default = "default_k")]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

impl LawConfig {
    pub fn build(&self) -> Result<ForceLaw> {
        match (&self.kind, &self.coefficients) {
            (LawKind::Custom, Some(c)) => ForceLaw::custom(self.b, c.clone(), self.radius),
            (LawKind::Custom, None) => Err(Error::Config("custom law needs 'coefficients'".into())),
            (_, Some(_)) => Err(Error::Config("'coefficients' only apply to the custom law".into())),
            (kind, None) => ForceLaw::builtin(*kind, self.b, self.k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub tol_p: f64,
    pub tol_q: f64,
    pub max_newton: usize,
    pub max_outer: usize,
    pub eps_div: f64,
    pub damping: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let c = SolverConfig::new(1);
        Tolerances {
            tol_p: c.tol_p,
            tol_q: c.tol_q,
            max_newton: c.max_newton,
            max_outer: c.max_outer,
            eps_div: c.eps_div,
            damping: c.damping,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightConfig {
    pub family: WeightFamily,
    pub sigma: f64,
    /// `D_N`; 1 unless given
    pub normalizer: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig {
            family: WeightFamily::Subexponential,
            sigma: 1.0,
            normalizer: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

fn default_n() -> usize {
    12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub law: LawConfig,
    pub gamma: f64,
    pub a: Vec<f64>,
    #[serde(rename = "N", default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub weight: WeightConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn solver_config(&self) -> Result<SolverConfig> {
        let nu = self.a.len().max(1);
        let t = &self.tolerances;
        let config = SolverConfig {
            tol_p: t.tol_p,
            tol_q: t.tol_q,
            max_newton: t.max_newton,
            max_outer: t.max_outer,
            eps_div: t.eps_div,
            damping: t.damping,
            weight: WeightSpec::new(nu, self.weight.family, self.weight.sigma, self.weight.normalizer)?,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Reads and validates a config file; parse errors carry line and column.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("{e} (line {}, column {})", e.line(), e.column())))
}

/// Pretty JSON whose floats carry 17 significant digits.
struct SigFormatter(serde_json::ser::PrettyFormatter<'static>);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(fn $name<W: ?Sized + std::io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> std::io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl serde_json::ser::Formatter for SigFormatter {
    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        begin_object_value(),
        end_object_value(),
    );

    fn write_f64<W: ?Sized + std::io::Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + std::io::Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFormatter(Default::default()));
    value.serialize(&mut ser).map_err(|e| Error::Io(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path).map_err(|e| Error::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

pub fn emit_result<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    write_atomic(path, &to_json(value)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEntry {
    pub m: ModeIndex,
    pub u: f64,
}

/// Result document of `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveDocument {
    pub a: Vec<f64>,
    pub omega: Vec<f64>,
    pub omega0: Vec<f64>,
    pub modes: Vec<ModeEntry>,
    pub p_residual: f64,
    pub q_residual: Vec<f64>,
    pub min_divisor: f64,
    pub newton_trace: Vec<f64>,
    pub law: LawConfig,
    pub gamma: f64,
    pub b: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub g: Vec<i64>,
    pub seed: u64,
    pub timestamp: u64,
}

impl SolveDocument {
    pub fn from_solution(s: &WaveSolution, law: &LawConfig, seed: u64) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        SolveDocument {
            a: s.a.clone(),
            omega: s.omega.clone(),
            omega0: s.omega0.clone(),
            modes: s
                .u()
                .iter()
                .map(|(m, u)| ModeEntry { m: m.clone(), u })
                .collect(),
            p_residual: s.report.p_residual_norm,
            q_residual: s.report.q_residual.clone(),
            min_divisor: s.report.min_divisor,
            newton_trace: s.newton_trace.clone(),
            law: law.clone(),
            gamma: s.gamma,
            b: law.b,
            n: s.n_truncation,
            g: s.g_vector.clone(),
            seed,
            timestamp,
        }
    }

    pub fn sequence(&self) -> Result<FourierSequence> {
        FourierSequence::from_pairs(self.omega.len(), self.modes.iter().map(|e| (e.m.clone(), e.u)))
    }

    /// The wave `x_n(t)` with profile shifted by `ζ`.
    pub fn ansatz(&self, law: &ForceLaw, zeta: Option<&[f64]>) -> Result<WaveAnsatz> {
        let d = DispersionData::with_phases(law.alpha1(), self.gamma, self.g.clone())?;
        let u = self.sequence()?;
        match zeta {
            Some(z) => WaveAnsatz::with_phase_shift(&u, &d, &self.omega, self.b, z, DEFAULT_EPS_DIV),
            None => WaveAnsatz::new(&u, &d, &self.omega, self.b, DEFAULT_EPS_DIV),
        }
    }
}

pub fn load_solution(path: &Path) -> Result<SolveDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{e} (line {}, column {})", e.line(), e.column())))
}

#[derive(Parser, Debug)]
#[command(name = "phasewave", version, about = "Multi-phase travelling waves in nonlinear lattices")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the non-degeneracy assumptions for a law and speed
    Check(CheckArgs),
    /// Solve for a travelling wave at one amplitude vector
    Solve(SolveArgs),
    /// Solve along a geometric amplitude sweep and write CSV
    Sweep(SweepArgs),
    /// Integrate the chain from a solved wave and compare with it
    Verify(VerifyArgs),
    /// Sample the wave profile or trajectories from a solved wave
    Profile(ProfileArgs),
    /// Standalone small-divisor kernels
    #[command(subcommand)]
    Tools(Tools),
}

#[derive(Args, Debug, Clone)]
pub struct LawArgs {
    /// toda, quadratic, cubic or custom
    #[arg(long)]
    pub law: Option<LawKind>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// Taylor truncation order
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// custom-law Taylor coefficients α_0,α_1,…
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub coefficients: Option<Vec<f64>>,
}

impl LawArgs {
    fn merge(&self, base: Option<&LawConfig>) -> Result<LawConfig> {
        let kind = self
            .law
            .or(base.map(|l| l.kind))
            .ok_or_else(|| Error::Config("missing --law".into()))?;
        Ok(LawConfig {
            kind,
            b: self.b.or(base.map(|l| l.b)).unwrap_or(0.0),
            k: self.k.or(base.map(|l| l.k)).unwrap_or(DEFAULT_ORDER),
            coefficients: self.coefficients.clone().or(base.and_then(|l| l.coefficients.clone())),
            radius: base.and_then(|l| l.radius),
        })
    }
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[command(flatten)]
    pub law: LawArgs,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, default_value_t = DEFAULT_A3_CUTOFF)]
    pub cutoff: usize,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub law: LawArgs,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// amplitudes a_1,…,a_ν
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub a: Option<Vec<f64>>,
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long = "tol-p")]
    pub tol_p: Option<f64>,
    #[arg(long = "tol-q")]
    pub tol_q: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SolveArgs {
    fn run_config(&self) -> Result<RunConfig> {
        let base = self.config.as_deref().map(load_config).transpose()?;
        let law = self.law.merge(base.as_ref().map(|c| &c.law))?;
        let mut cfg = match base {
            Some(c) => c,
            None => RunConfig {
                law: law.clone(),
                gamma: self.gamma.ok_or_else(|| Error::Config("missing --gamma".into()))?,
                a: self.a.clone().ok_or_else(|| Error::Config("missing --a".into()))?,
                n: default_n(),
                tolerances: Tolerances::default(),
                weight: WeightConfig::default(),
                seed: 0,
                output: OutputConfig::default(),
            },
        };
        cfg.law = law;
        if let Some(g) = self.gamma {
            cfg.gamma = g;
        }
        if let Some(a) = &self.a {
            cfg.a = a.clone();
        }
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(t) = self.tol_p {
            cfg.tolerances.tol_p = t;
        }
        if let Some(t) = self.tol_q {
            cfg.tolerances.tol_q = t;
        }
        if let Some(o) = &self.out {
            cfg.output.result = Some(o.clone());
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub law: LawArgs,
    #[arg(long)]
    pub gamma: f64,
    /// sweep direction; defaults to (1,…,1)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub dir: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1e-3)]
    pub amin: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub amax: f64,
    #[arg(long, default_value_t = 8)]
    pub count: usize,
    #[arg(long = "N", default_value_t = 12)]
    pub n: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub solution: PathBuf,
    /// number of sites, starting at n = 0
    #[arg(long, default_value_t = 64)]
    pub window: usize,
    /// duration; defaults to one period 2π/γ
    #[arg(long = "T")]
    pub t: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(clap::ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// χ on a uniform grid of the torus
    Chi,
    /// x_n(t) on a site and time grid
    Trajectory,
}

#[derive(Args, Debug)]
pub struct ProfileArgs {
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long, value_enum, default_value_t = ProfileKind::Chi)]
    pub kind: ProfileKind,
    /// grid points per torus direction
    #[arg(long, default_value_t = 32)]
    pub points: usize,
    /// phase shift ζ applied to the profile
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub zeta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 32)]
    pub sites: usize,
    #[arg(long = "T")]
    pub t: Option<f64>,
    #[arg(long, default_value_t = 64)]
    pub steps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Tools {
    /// Eliminate x − y for monic p, q (ascending coefficients including the leading 1)
    Resultant {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        p: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        q: Vec<f64>,
    },
    /// Prepare z² + λ + ε cos z on a λ grid
    Weierstrass {
        #[arg(long, required = true)]
        demo: bool,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
    },
    /// Sublevel bound (2k/δ)t^{1/k}, and the measured set for a polynomial
    Excision {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        t: f64,
        /// polynomial coefficients, ascending
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        poly: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1,1")]
        interval: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        resolution: usize,
    },
    /// Invert a diagonal-plus-Toeplitz instance by block pasting
    Couple {
        #[arg(long)]
        instance: PathBuf,
    },
}

/// `tools couple` input.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingInstance {
    pub modes: Vec<ModeIndex>,
    pub diagonal: Vec<f64>,
    /// `R(m,n) = r(m − n)`
    pub toeplitz: Vec<ModeEntry>,
    pub sigma: f64,
    pub sigma_tilde: f64,
    #[serde(default)]
    pub weight: WeightConfig,
    /// used to build a cover when none is given
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub cover: Option<BlockCover>,
}

fn configure_threads() {
    #[cfg(feature = "parallel")]
    if let Some(n) = std::env::var("PHASEWAVE_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn emit(value: &impl Serialize, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let text = to_json(value)?;
    match path {
        Some(p) => write_atomic(p, &text),
        None => out.write_all(text.as_bytes()).map_err(Error::from),
    }
}

fn emit_text(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text),
        None => out.write_all(text.as_bytes()).map_err(Error::from),
    }
}

fn e16(x: f64) -> String {
    format!("{x:.16e}")
}

fn cmd_check(args: &CheckArgs, out: &mut dyn Write) -> Result<()> {
    let law = args.law.merge(None)?.build()?;
    let report = check_assumptions(&law, args.gamma, args.tau, args.cutoff);
    emit(&report, args.out.as_deref(), out)
}

fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = args.run_config()?;
    let law = cfg.law.build()?;
    let config = cfg.solver_config()?;
    let trunc = TruncationSpec::new(cfg.a.len(), cfg.n)?;
    let solution = solve_wave(&law, cfg.gamma, &cfg.a, &trunc, &config)?;
    let doc = SolveDocument::from_solution(&solution, &cfg.law, cfg.seed);
    emit(&doc, cfg.output.result.as_deref(), out)
}

fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let law = args.law.merge(None)?.build()?;
    let d = DispersionData::from_law(&law, args.gamma)?;
    let dir = args.dir.clone().unwrap_or_else(|| vec![1.0; d.nu]);
    if !(args.amin > 0.0 && args.amax >= args.amin) || args.count == 0 {
        return Err(Error::InvalidInput("need 0 < amin <= amax and count >= 1".into()));
    }
    let mags: Vec<f64> = (0..args.count)
        .map(|i| {
            let s = if args.count == 1 { 0.0 } else { i as f64 / (args.count - 1) as f64 };
            args.amin * (args.amax / args.amin).powf(s)
        })
        .collect();
    let trunc = TruncationSpec::new(d.nu, args.n)?;
    let rows = amplitude_sweep(&law, args.gamma, &[dir], &mags, &trunc, &SolverConfig::new(d.nu))?;
    let mut csv = String::from("|a|");
    for j in 1..=d.nu {
        csv.push_str(&format!(",omega_{j}"));
    }
    csv.push_str(",p_residual\n");
    for r in &rows {
        csv.push_str(&e16(r.magnitude));
        match (&r.omega, r.p_residual) {
            (Some(w), Some(p)) => {
                for x in w {
                    csv.push(',');
                    csv.push_str(&e16(*x));
                }
                csv.push(',');
                csv.push_str(&e16(p));
            }
            _ => {
                csv.push_str(&",nan".repeat(d.nu + 1));
                let _ = writeln!(
                    err,
                    "{}",
                    json!({"warning": r.error, "magnitude": r.magnitude})
                );
            }
        }
        csv.push('\n');
    }
    emit_text(&csv, args.out.as_deref(), out)
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<()> {
    let doc = load_solution(&args.solution)?;
    let law = doc.law.build()?;
    let ansatz = doc.ansatz(&law, None)?;
    let duration = args.t.unwrap_or(std::f64::consts::TAU / doc.gamma);
    let window = (0, args.window as i64 - 1);
    let mut csv = args.csv.as_ref().map(|_| String::from("n,t,x_integrated,x_ansatz\n"));
    let report = verify_ansatz(&law, &ansatz, window, duration, args.dt, |rows| {
        if let Some(buf) = csv.as_mut() {
            for (n, t, x, y) in rows {
                buf.push_str(&format!("{n},{},{},{}\n", e16(*t), e16(*x), e16(*y)));
            }
        }
        Ok(())
    })?;
    if let (Some(path), Some(buf)) = (&args.csv, &csv) {
        write_atomic(path, buf)?;
    }
    emit(&report, args.out.as_deref(), out)
}

fn cmd_profile(args: &ProfileArgs, out: &mut dyn Write) -> Result<()> {
    let doc = load_solution(&args.solution)?;
    let nu = doc.omega.len();
    if let Some(z) = &args.zeta {
        if z.len() != nu {
            return Err(Error::Dimension {
                expected: nu,
                found: z.len(),
            });
        }
    }
    let mut csv = String::new();
    match args.kind {
        ProfileKind::Chi => {
            let k = args.points.max(1);
            let total = k.checked_pow(nu as u32).filter(|&t| t <= 1 << 22);
            let total = total.ok_or_else(|| Error::InvalidInput("profile grid too large".into()))?;
            let zeta = args.zeta.clone().unwrap_or_else(|| vec![0.0; nu]);
            let grid: Vec<Vec<f64>> = (0..total)
                .map(|mut idx| {
                    (0..nu)
                        .map(|_| {
                            let i = idx % k;
                            idx /= k;
                            std::f64::consts::TAU * i as f64 / k as f64
                        })
                        .collect()
                })
                .collect();
            let shifted: Vec<Vec<f64>> = grid
                .iter()
                .map(|xi| xi.iter().zip(&zeta).map(|(x, z)| x + z).collect())
                .collect();
            let chi = reconstruct_profile(&doc.sequence()?, &doc.omega, &shifted, DEFAULT_EPS_DIV)?;
            let head: Vec<String> = (1..=nu).map(|j| format!("xi_{j}")).collect();
            csv.push_str(&head.join(","));
            csv.push_str(",chi\n");
            for (xi, c) in grid.iter().zip(chi) {
                for x in xi {
                    csv.push_str(&e16(*x));
                    csv.push(',');
                }
                csv.push_str(&e16(c));
                csv.push('\n');
            }
        }
        ProfileKind::Trajectory => {
            let law = doc.law.build()?;
            let ansatz = doc.ansatz(&law, args.zeta.as_deref())?;
            let duration = args.t.unwrap_or(std::f64::consts::TAU / doc.gamma);
            csv.push_str("n,t,x\n");
            for s in 0..=args.steps {
                let t = duration * s as f64 / args.steps.max(1) as f64;
                for n in 0..args.sites as i64 {
                    csv.push_str(&format!("{n},{},{}\n", e16(t), e16(ansatz.position(n, t))));
                }
            }
        }
    }
    emit_text(&csv, args.out.as_deref(), out)
}

fn monic_from_cli(c: &[f64], name: &str) -> Result<Vec<Complex64>> {
    match c.split_last() {
        Some((&lead, rest)) if lead == 1.0 && !rest.is_empty() => Ok(rest.iter().map(|&x| Complex64::new(x, 0.0)).collect()),
        _ => Err(Error::InvalidInput(format!(
            "--{name} must list ascending coefficients of a monic polynomial of degree >= 1"
        ))),
    }
}

fn cmd_tools(tool: &Tools, out: &mut dyn Write) -> Result<()> {
    match tool {
        Tools::Resultant { p, q } => {
            let (p, q) = (monic_from_cli(p, "p")?, monic_from_cli(q, "q")?);
            let t = resultant_ominus(&p, &q)?;
            let samples: Vec<(Complex64, Complex64)> = (0..16)
                .map(|i| {
                    let th = i as f64 * 0.7;
                    (Complex64::from_polar(0.6, th), Complex64::from_polar(0.4, 2.3 * th + 1.0))
                })
                .collect();
            let defect = verify_resultant_identity(&t, &p, &q, &samples);
            emit(&json!({"triple": t, "identity_defect": defect}), None, out)
        }
        Tools::Weierstrass { demo: _, eps } => {
            let f = demo_family(*eps);
            let grid: Vec<Vec<f64>> = (0..9).map(|i| vec![-0.06 + 0.015 * i as f64]).collect();
            let res = weierstrass_prepare(&f, &[0.0], &grid, &PreparationSettings::default())?;
            emit(&json!({"certified": res.certified(), "result": res}), None, out)
        }
        Tools::Excision {
            k,
            delta,
            t,
            poly,
            interval,
            resolution,
        } => {
            let bound = excision_bound(*k, *delta, *t)?;
            match poly {
                None => emit(&json!({ "bound": bound }), None, out),
                Some(c) => {
                    if interval.len() != 2 {
                        return Err(Error::InvalidInput("--interval takes two numbers".into()));
                    }
                    let g = Polynomial::new(c.clone());
                    let r = excision_measure(&g, (interval[0], interval[1]), *k, *delta, *t, *resolution)?;
                    emit(&r, None, out)
                }
            }
        }
        Tools::Couple { instance } => {
            let text = std::fs::read_to_string(instance).map_err(|e| Error::Io(format!("{}: {e}", instance.display())))?;
            let inst: CouplingInstance = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{e} (line {}, column {})", e.line(), e.column())))?;
            let nu = inst.modes.first().map(|m| m.nu()).unwrap_or(1);
            let spec = WeightSpec::new(nu, inst.weight.family, inst.weight.sigma, inst.weight.normalizer)?;
            let r = FourierSequence::from_pairs(nu, inst.toeplitz.iter().map(|e| (e.m.clone(), e.u)))?;
            let t = LatticeOperator::new(inst.modes.clone(), inst.diagonal.clone(), r)?;
            let cover = match (&inst.cover, inst.threshold) {
                (Some(c), _) => c.clone(),
                (None, Some(th)) => build_cover(&t, th, inst.sigma, inst.sigma_tilde, &spec)?,
                (None, None) => return Err(Error::Config("instance needs 'cover' or 'threshold'".into())),
            };
            let res = coupling_invert(&t, &cover, inst.sigma, inst.sigma_tilde, &spec)?;
            let gt = &res.inverse * t.dense()?;
            let n = gt.nrows();
            let defect = (gt - nalgebra::DMatrix::<f64>::identity(n, n)).abs().max();
            emit(
                &json!({
                    "coupling_norm": res.coupling_norm,
                    "inverse_norm": res.inverse_norm,
                    "certificate": res.certificate,
                    "certificate_holds": res.inverse_norm <= res.certificate,
                    "max_defect": defect,
                }),
                None,
                out,
            )
        }
    }
}

fn context_of(cmd: &Command) -> &'static str {
    match cmd {
        Command::Check(_) => "check",
        Command::Solve(_) => "solve",
        Command::Sweep(_) => "sweep",
        Command::Verify(_) => "verify",
        Command::Profile(_) => "profile",
        Command::Tools(_) => "tools",
    }
}

pub fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Check(a) => cmd_check(a, out),
        Command::Solve(a) => cmd_solve(a, out),
        Command::Sweep(a) => cmd_sweep(a, out, err),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Profile(a) => cmd_profile(a, out),
        Command::Tools(t) => cmd_tools(t, out),
    }
}

/// Runs the tool on `argv` (including the program name) and returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    2
                }
            };
        }
    };
    configure_threads();
    match dispatch(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let doc = json!({
                "code": e.code(),
                "message": e.to_string(),
                "context": context_of(&cli.command),
            });
            let _ = writeln!(err, "{doc}");
            1
        }
    }
}
