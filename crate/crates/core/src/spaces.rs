//! Weighted ℓ¹ sequence spaces on the lattice Z^ν.
//!
//! Sequences are even and real (`u(-m) = u(m)`), so [`FourierSequence`] keeps
//! one canonical representative per ±pair. Weights come in two families:
//! subexponential `D_N·exp(σ|m|^c)` and exponential
//! `D_N·(1+|m|)^{ν+1}·exp(σ|m|)`, where `|m|` is the max norm.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Mutex, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Default subexponential exponent `c`.
pub const DEFAULT_C_EXPONENT: f64 = 0.01;

/// Cutoff used for the default normalizer `D_N`.
pub const NORMALIZER_CUTOFF: usize = 16;

/// A lattice site `m ∈ Z^ν`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex(SmallVec<[i32; 4]>);

impl ModeIndex {
    pub fn new(components: &[i32]) -> Self {
        ModeIndex(SmallVec::from_slice(components))
    }

    pub fn zero(nu: usize) -> Self {
        ModeIndex(SmallVec::from_elem(0, nu))
    }

    /// The unit vector `e_j` (zero based `j`).
    pub fn unit(nu: usize, j: usize) -> Self {
        let mut m = Self::zero(nu);
        m.0[j] = 1;
        m
    }

    pub fn nu(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[i32] {
        &self.0
    }

    /// Max norm `|m|`.
    pub fn norm(&self) -> i32 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn neg(&self) -> Self {
        ModeIndex(self.0.iter().map(|c| -c).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        ModeIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        ModeIndex(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(&m, &x)| m as f64 * x).sum()
    }

    pub fn dot_int(&self, g: &[i64]) -> i64 {
        self.0.iter().zip(g).map(|(&m, &g)| m as i64 * g).sum()
    }

    /// Canonical representatives have a positive first nonzero component.
    /// The origin is its own representative.
    pub fn is_canonical(&self) -> bool {
        match self.0.iter().find(|&&c| c != 0) {
            Some(&c) => c > 0,
            None => true,
        }
    }

    pub fn canonical(&self) -> Self {
        if self.is_canonical() {
            self.clone()
        } else {
            self.neg()
        }
    }

    /// Max-norm distance.
    pub fn distance(&self, other: &Self) -> i32 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for ModeIndex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModeIndex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i32>::deserialize(d)?;
        Ok(ModeIndex::new(&v))
    }
}

/// All sites with `|m| ≤ radius`, in lexicographic order.
pub fn box_modes(nu: usize, radius: i32) -> Vec<ModeIndex> {
    let side = (2 * radius + 1) as usize;
    let total = side.pow(nu as u32);
    (0..total)
        .map(|mut idx| {
            let mut c: SmallVec<[i32; 4]> = SmallVec::from_elem(0, nu);
            for k in (0..nu).rev() {
                c[k] = (idx % side) as i32 - radius;
                idx /= side;
            }
            ModeIndex(c)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightFamily {
    /// `D_N·exp(σ|m|^c)`
    Subexponential,
    /// `D_N·(1+|m|)^{ν+1}·exp(σ|m|)`
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub nu: usize,
    pub family: WeightFamily,
    pub sigma: f64,
    #[serde(default = "default_c")]
    pub c_exponent: f64,
    pub normalizer: f64,
}

fn default_c() -> f64 {
    DEFAULT_C_EXPONENT
}

impl WeightSpec {
    pub fn new(nu: usize, family: WeightFamily, sigma: f64, normalizer: f64) -> Result<Self> {
        let spec = WeightSpec {
            nu,
            family,
            sigma,
            c_exponent: DEFAULT_C_EXPONENT,
            normalizer,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Weight with `D_N = 1`. Still submultiplicative for both families.
    pub fn unit(nu: usize, family: WeightFamily, sigma: f64) -> Self {
        WeightSpec {
            nu,
            family,
            sigma,
            c_exponent: DEFAULT_C_EXPONENT,
            normalizer: 1.0,
        }
    }

    /// Weight normalized by the estimated convolution constant at cutoff 16.
    pub fn estimated(nu: usize, family: WeightFamily, sigma: f64) -> Self {
        WeightSpec {
            nu,
            family,
            sigma,
            c_exponent: DEFAULT_C_EXPONENT,
            normalizer: default_normalizer(nu),
        }
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        WeightSpec {
            sigma,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nu == 0 {
            return Err(Error::InvalidInput("weight needs nu >= 1".into()));
        }
        if !(self.sigma >= 0.25) {
            return Err(Error::InvalidInput(format!(
                "weight decay sigma = {} must be >= 1/4",
                self.sigma
            )));
        }
        if !(self.c_exponent > 0.0 && self.c_exponent < 1.0) {
            return Err(Error::InvalidInput(format!(
                "c exponent {} must lie in (0,1)",
                self.c_exponent
            )));
        }
        if !(self.normalizer >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "normalizer {} must be >= 1",
                self.normalizer
            )));
        }
        Ok(())
    }

    /// Weight as a function of the max norm only.
    pub fn of_norm(&self, norm: i32) -> f64 {
        let n = norm as f64;
        match self.family {
            WeightFamily::Subexponential => self.normalizer * (self.sigma * n.powf(self.c_exponent)).exp(),
            WeightFamily::Exponential => {
                self.normalizer * (1.0 + n).powi(self.nu as i32 + 1) * (self.sigma * n).exp()
            }
        }
    }

    pub fn value(&self, m: &ModeIndex) -> f64 {
        self.of_norm(m.norm())
    }
}

pub fn weight_value(spec: &WeightSpec, m: &ModeIndex) -> f64 {
    spec.value(m)
}

/// Even real sequence `m ↦ u(m)` with finite support.
#[derive(Clone, PartialEq)]
pub struct FourierSequence {
    nu: usize,
    entries: BTreeMap<ModeIndex, f64>,
}

impl fmt::Debug for FourierSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.entries.iter()).finish()
    }
}

impl FourierSequence {
    pub fn zeros(nu: usize) -> Self {
        FourierSequence {
            nu,
            entries: BTreeMap::new(),
        }
    }

    /// Build from `(m, value)` pairs; `m` and `-m` address the same entry
    /// and later pairs overwrite earlier ones.
    pub fn from_pairs<I: IntoIterator<Item = (ModeIndex, f64)>>(nu: usize, pairs: I) -> Result<Self> {
        let mut u = Self::zeros(nu);
        for (m, x) in pairs {
            u.set(&m, x)?;
        }
        Ok(u)
    }

    /// `δ_m + δ_{-m}` (or `δ_0` for the origin) scaled by `value`.
    pub fn pair(m: &ModeIndex, value: f64) -> Self {
        let mut u = Self::zeros(m.nu());
        u.entries.insert(m.canonical(), value);
        u
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn get(&self, m: &ModeIndex) -> f64 {
        if m.nu() != self.nu {
            return 0.0;
        }
        if m.is_canonical() {
            self.entries.get(m).copied().unwrap_or(0.0)
        } else {
            self.entries.get(&m.neg()).copied().unwrap_or(0.0)
        }
    }

    pub fn set(&mut self, m: &ModeIndex, value: f64) -> Result<()> {
        if m.nu() != self.nu {
            return Err(Error::Dimension {
                expected: self.nu,
                found: m.nu(),
            });
        }
        self.entries.insert(m.canonical(), value);
        Ok(())
    }

    pub fn add_at(&mut self, m: &ModeIndex, value: f64) {
        *self.entries.entry(m.canonical()).or_insert(0.0) += value;
    }

    pub fn remove(&mut self, m: &ModeIndex) {
        self.entries.remove(&m.canonical());
    }

    /// Canonical representatives with their values.
    pub fn iter(&self) -> impl Iterator<Item = (&ModeIndex, f64)> {
        self.entries.iter().map(|(m, &x)| (m, x))
    }

    /// Every stored site including negated partners.
    pub fn full_support(&self) -> Vec<(ModeIndex, f64)> {
        let mut out = Vec::with_capacity(2 * self.entries.len());
        for (m, &x) in &self.entries {
            out.push((m.clone(), x));
            if !m.is_zero() {
                out.push((m.neg(), x));
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.values().all(|&x| x == 0.0)
    }

    /// Largest `|m|` over the stored support.
    pub fn radius(&self) -> i32 {
        self.entries.keys().map(|m| m.norm()).max().unwrap_or(0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        FourierSequence {
            nu: self.nu,
            entries: self.entries.iter().map(|(m, &x)| (m.clone(), s * x)).collect(),
        }
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        check_nu(self.nu, other.nu)?;
        let mut out = self.clone();
        for (m, x) in other.iter() {
            out.add_at(m, x);
        }
        Ok(out)
    }

    pub fn minus(&self, other: &Self) -> Result<Self> {
        self.plus(&other.scaled(-1.0))
    }

    /// Keep entries satisfying `keep`.
    pub fn filtered<F: Fn(&ModeIndex) -> bool>(&self, keep: F) -> Self {
        FourierSequence {
            nu: self.nu,
            entries: self
                .entries
                .iter()
                .filter(|(m, _)| keep(m))
                .map(|(m, &x)| (m.clone(), x))
                .collect(),
        }
    }

    /// Drop stored exact zeros.
    pub fn pruned(&self) -> Self {
        self.filtered(|_| true).retain_nonzero()
    }

    fn retain_nonzero(mut self) -> Self {
        self.entries.retain(|_, x| *x != 0.0);
        self
    }

    /// Largest absolute difference over the union of supports.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut d: f64 = 0.0;
        for (m, x) in self.iter() {
            d = d.max((x - other.get(m)).abs());
        }
        for (m, x) in other.iter() {
            d = d.max((x - self.get(m)).abs());
        }
        d
    }
}

fn check_nu(a: usize, b: usize) -> Result<()> {
    if a != b {
        Err(Error::Dimension {
            expected: a,
            found: b,
        })
    } else {
        Ok(())
    }
}

/// `Σ_m w(m)|u(m)|` over the full (±) support.
pub fn seq_norm(spec: &WeightSpec, u: &FourierSequence) -> f64 {
    u.iter()
        .map(|(m, x)| {
            let mult = if m.is_zero() { 1.0 } else { 2.0 };
            mult * spec.value(m) * x.abs()
        })
        .sum()
}

/// Exact convolution `(u*v)(m) = Σ_n u(m-n) v(n)` over the finite supports.
pub fn convolve(u: &FourierSequence, v: &FourierSequence) -> Result<FourierSequence> {
    check_nu(u.nu, v.nu)?;
    let nu = u.nu;
    let fu = u.full_support();
    let fv = v.full_support();
    if fu.is_empty() || fv.is_empty() {
        return Ok(FourierSequence::zeros(nu));
    }
    let radius = u.radius() + v.radius();
    let side = (2 * radius + 1) as usize;
    let volume = (side as f64).powi(nu as i32);
    if volume <= (1u64 << 24) as f64 {
        let mut grid = ModeGrid::new(nu, radius);
        let a: Vec<(SmallVec<[i32; 4]>, f64)> = fu.into_iter().map(|(m, x)| (m.0, x)).collect();
        let b: Vec<(SmallVec<[i32; 4]>, f64)> = fv.into_iter().map(|(m, x)| (m.0, x)).collect();
        let mut target: SmallVec<[i32; 4]> = SmallVec::from_elem(0, nu);
        let mut touched = vec![false; grid.data.len()];
        for (ma, xa) in &a {
            for (mb, xb) in &b {
                for k in 0..nu {
                    target[k] = ma[k] + mb[k];
                }
                let idx = grid.index_unchecked(&target);
                grid.data[idx] += xa * xb;
                touched[idx] = true;
            }
        }
        let mut out = FourierSequence::zeros(nu);
        for (idx, &t) in touched.iter().enumerate() {
            if t {
                let m = grid.coords(idx);
                if m.is_canonical() {
                    out.entries.insert(m, grid.data[idx]);
                }
            }
        }
        Ok(out)
    } else {
        let mut acc: HashMap<ModeIndex, f64> = HashMap::new();
        for (ma, xa) in &fu {
            for (mb, xb) in &fv {
                let m = ma.add(mb);
                if m.is_canonical() {
                    *acc.entry(m).or_insert(0.0) += xa * xb;
                }
            }
        }
        Ok(FourierSequence {
            nu,
            entries: acc.into_iter().collect(),
        })
    }
}

/// Diagonal-plus-Toeplitz operator `T(m,n) = diag(m)δ_{mn} + r(m-n)` on a
/// finite mode set.
#[derive(Debug, Clone)]
pub struct LatticeOperator {
    pub mode_set: Vec<ModeIndex>,
    /// Aligned with `mode_set`; may contain `f64::INFINITY`.
    pub diagonal: Vec<f64>,
    pub toeplitz: FourierSequence,
}

impl LatticeOperator {
    pub fn new(mode_set: Vec<ModeIndex>, diagonal: Vec<f64>, toeplitz: FourierSequence) -> Result<Self> {
        if diagonal.len() != mode_set.len() {
            return Err(Error::InvalidInput(format!(
                "diagonal has {} entries for {} modes",
                diagonal.len(),
                mode_set.len()
            )));
        }
        for m in &mode_set {
            check_nu(toeplitz.nu(), m.nu())?;
        }
        Ok(LatticeOperator {
            mode_set,
            diagonal,
            toeplitz,
        })
    }

    pub fn dense(&self) -> Result<DMatrix<f64>> {
        let n = self.mode_set.len();
        let mut t = DMatrix::zeros(n, n);
        for (i, mi) in self.mode_set.iter().enumerate() {
            if !self.diagonal[i].is_finite() {
                return Err(Error::SingularEntry(mi.clone()));
            }
            for (j, mj) in self.mode_set.iter().enumerate() {
                t[(i, j)] = self.toeplitz.get(&mi.sub(mj));
            }
            t[(i, i)] += self.diagonal[i];
        }
        Ok(t)
    }

    /// The Toeplitz part alone as a dense matrix.
    pub fn dense_toeplitz(&self) -> DMatrix<f64> {
        let n = self.mode_set.len();
        DMatrix::from_fn(n, n, |i, j| self.toeplitz.get(&self.mode_set[i].sub(&self.mode_set[j])))
    }
}

/// `max_n Σ_m w(m-n)|T(m,n)|` for a dense matrix indexed by `modes`.
pub fn op_norm(spec: &WeightSpec, modes: &[ModeIndex], t: &DMatrix<f64>) -> Result<f64> {
    if t.nrows() != modes.len() || t.ncols() != modes.len() {
        return Err(Error::InvalidInput("matrix does not match mode set".into()));
    }
    let mut best: f64 = 0.0;
    for j in 0..modes.len() {
        let mut col = 0.0;
        for i in 0..modes.len() {
            let x = t[(i, j)];
            if x != 0.0 {
                if !x.is_finite() {
                    return Err(Error::SingularEntry(modes[i].clone()));
                }
                col += spec.of_norm(modes[i].distance(&modes[j])) * x.abs();
            }
        }
        best = best.max(col);
    }
    Ok(best)
}

pub fn op_norm_lattice(spec: &WeightSpec, t: &LatticeOperator) -> Result<f64> {
    let dense = t.dense()?;
    op_norm(spec, &t.mode_set, &dense)
}

/// Truncated lower estimate of the convolution constant `D_{ν,x}`:
/// the maximum over `|n| ≤ cutoff` and a σ grid of
/// `Σ_{|m| ≤ 2·cutoff} w(n) / (w(m) w(n-m))` with `D_N = 1`.
pub fn estimate_convolution_constant(nu: usize, family: WeightFamily, cutoff: usize) -> f64 {
    const SIGMA_GRID: [f64; 4] = [0.25, 0.5, 1.0, 2.0];
    let cutoff = cutoff as i32;
    let outer = 2 * cutoff;
    let max_norm = (outer + cutoff) as usize;
    // log-weights as functions of the max norm
    let tables: Vec<Vec<f64>> = SIGMA_GRID
        .iter()
        .map(|&s| {
            let spec = WeightSpec::unit(nu, family, s);
            (0..=max_norm).map(|k| spec.of_norm(k as i32).ln()).collect()
        })
        .collect();
    let ms = box_modes(nu, outer);
    // sup over n reduces to sorted nonnegative representatives
    let ns: Vec<ModeIndex> = box_modes(nu, cutoff)
        .into_iter()
        .filter(|n| n.0.iter().all(|&c| c >= 0) && n.0.windows(2).all(|w| w[0] <= w[1]))
        .collect();
    let eval = |n: &ModeIndex| -> f64 {
        let nn = n.norm() as usize;
        let mut sums = [0.0f64; 4];
        for m in &ms {
            let a = m.norm() as usize;
            let b = m.distance(n) as usize;
            for (s, tab) in tables.iter().enumerate() {
                sums[s] += (tab[nn] - tab[a] - tab[b]).exp();
            }
        }
        sums.iter().cloned().fold(0.0, f64::max)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        ns.par_iter().map(eval).reduce(|| 0.0, f64::max)
    }
    #[cfg(not(feature = "parallel"))]
    {
        ns.iter().map(eval).fold(0.0, f64::max)
    }
}

/// `ceil(max(D_{ν,c}, D_{ν,1}))` estimated at cutoff 16; cached per ν.
pub fn default_normalizer(nu: usize) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<usize, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&d) = cache.lock().unwrap().get(&nu) {
        return d;
    }
    let d = estimate_convolution_constant(nu, WeightFamily::Subexponential, NORMALIZER_CUTOFF)
        .max(estimate_convolution_constant(nu, WeightFamily::Exponential, NORMALIZER_CUTOFF))
        .ceil();
    cache.lock().unwrap().insert(nu, d);
    d
}

/// Dense storage of a sequence on the box `|m| ≤ radius`.
///
/// Used for clipped convolution products inside the solver, where only a
/// bounded window of modes is ever read back.
#[derive(Debug, Clone)]
pub struct ModeGrid {
    nu: usize,
    radius: i32,
    side: usize,
    data: Vec<f64>,
}

impl ModeGrid {
    pub fn new(nu: usize, radius: i32) -> Self {
        let side = (2 * radius + 1) as usize;
        ModeGrid {
            nu,
            radius,
            side,
            data: vec![0.0; side.pow(nu as u32)],
        }
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn radius(&self) -> i32 {
        self.radius
    }

    fn index_unchecked(&self, m: &[i32]) -> usize {
        let mut idx = 0usize;
        for &c in m {
            idx = idx * self.side + (c + self.radius) as usize;
        }
        idx
    }

    pub fn index(&self, m: &[i32]) -> Option<usize> {
        if m.len() != self.nu || m.iter().any(|c| c.abs() > self.radius) {
            None
        } else {
            Some(self.index_unchecked(m))
        }
    }

    fn coords(&self, mut idx: usize) -> ModeIndex {
        let mut c: SmallVec<[i32; 4]> = SmallVec::from_elem(0, self.nu);
        for k in (0..self.nu).rev() {
            c[k] = (idx % self.side) as i32 - self.radius;
            idx /= self.side;
        }
        ModeIndex(c)
    }

    pub fn get(&self, m: &ModeIndex) -> f64 {
        self.index(m.components()).map(|i| self.data[i]).unwrap_or(0.0)
    }

    pub fn from_sequence(u: &FourierSequence, radius: i32) -> Self {
        let mut g = ModeGrid::new(u.nu(), radius);
        for (m, x) in u.full_support() {
            if let Some(i) = g.index(m.components()) {
                g.data[i] = x;
            }
        }
        g
    }

    /// Canonical entries with `|m| ≤ keep`.
    pub fn to_sequence(&self, keep: i32) -> FourierSequence {
        let mut out = FourierSequence::zeros(self.nu);
        for (idx, &x) in self.data.iter().enumerate() {
            if x != 0.0 {
                let m = self.coords(idx);
                if m.is_canonical() && m.norm() <= keep {
                    out.entries.insert(m, x);
                }
            }
        }
        out
    }

    fn nonzeros(&self) -> Vec<(SmallVec<[i32; 4]>, f64)> {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(i, &x)| (self.coords(i).0, x))
            .collect()
    }

    /// `self * other` restricted to the box of `self`.
    pub fn convolve_clipped(&self, other: &ModeGrid) -> ModeGrid {
        let mut out = ModeGrid::new(self.nu, self.radius);
        let a = self.nonzeros();
        let b = other.nonzeros();
        let r = self.radius;
        let mut target: SmallVec<[i32; 4]> = SmallVec::from_elem(0, self.nu);
        for (mb, xb) in &b {
            'outer: for (ma, xa) in &a {
                for k in 0..self.nu {
                    let c = ma[k] + mb[k];
                    if c.abs() > r {
                        continue 'outer;
                    }
                    target[k] = c;
                }
                let idx = out.index_unchecked(&target);
                out.data[idx] += xa * xb;
            }
        }
        out
    }

    pub fn axpy(&mut self, alpha: f64, x: &ModeGrid) {
        for (y, x) in self.data.iter_mut().zip(&x.data) {
            *y += alpha * x;
        }
    }

    pub fn scaled(&self, s: f64) -> ModeGrid {
        let mut g = self.clone();
        g.data.iter_mut().for_each(|x| *x *= s);
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(c: &[i32]) -> ModeIndex {
        ModeIndex::new(c)
    }

    #[test]
    fn weight_examples() {
        let sub = WeightSpec::unit(2, WeightFamily::Subexponential, 1.0);
        assert_eq!(weight_value(&sub, &m(&[0, 0])), 1.0);
        let exp = WeightSpec::unit(2, WeightFamily::Exponential, 1.0);
        assert_eq!(weight_value(&exp, &m(&[0, 0])), 1.0);
        let quarter = WeightSpec::unit(2, WeightFamily::Subexponential, 0.25);
        assert!((weight_value(&quarter, &m(&[1, 0])) - 0.25f64.exp()).abs() < 1e-15);
        assert!((weight_value(&quarter, &m(&[1, 0])) - 1.2840).abs() < 1e-4);
    }

    #[test]
    fn weight_spec_validation() {
        assert!(WeightSpec::new(2, WeightFamily::Subexponential, 0.2, 1.0).is_err());
        assert!(WeightSpec::new(2, WeightFamily::Subexponential, 0.25, 0.5).is_err());
        assert!(WeightSpec::new(0, WeightFamily::Subexponential, 1.0, 1.0).is_err());
        assert!(WeightSpec::new(2, WeightFamily::Exponential, 0.25, 1.0).is_ok());
    }

    #[test]
    fn canonical_storage() {
        let mut u = FourierSequence::zeros(2);
        u.set(&m(&[-1, 2]), 3.0).unwrap();
        assert_eq!(u.get(&m(&[1, -2])), 3.0);
        assert_eq!(u.get(&m(&[-1, 2])), 3.0);
        assert_eq!(u.len(), 1);
        assert!(u.set(&m(&[1]), 1.0).is_err());
        assert!(m(&[0, 1]).is_canonical());
        assert!(!m(&[0, -1]).is_canonical());
    }

    #[test]
    fn norm_examples() {
        let spec = WeightSpec::unit(2, WeightFamily::Subexponential, 1.0);
        assert_eq!(seq_norm(&spec, &FourierSequence::zeros(2)), 0.0);
        let delta0 = FourierSequence::pair(&ModeIndex::zero(2), 1.0);
        assert_eq!(seq_norm(&spec, &delta0), 1.0);
        let e1 = FourierSequence::pair(&m(&[1, 0]), 1.0);
        let two_e = 2.0 * std::f64::consts::E;
        assert!((seq_norm(&spec, &e1) - two_e).abs() < 1e-12);
        assert!((seq_norm(&spec, &e1) - 5.4366).abs() < 1e-4);
    }

    #[test]
    fn convolution_examples() {
        let delta0 = FourierSequence::pair(&ModeIndex::zero(2), 1.0);
        let mut u = FourierSequence::zeros(2);
        u.set(&m(&[1, -1]), 0.3).unwrap();
        u.set(&m(&[0, 2]), -1.5).unwrap();
        assert_eq!(convolve(&delta0, &u).unwrap().pruned(), u);

        let e1 = FourierSequence::pair(&m(&[1, 0]), 1.0);
        let sq = convolve(&e1, &e1).unwrap();
        assert_eq!(sq.get(&m(&[2, 0])), 1.0);
        assert_eq!(sq.get(&m(&[-2, 0])), 1.0);
        assert_eq!(sq.get(&m(&[0, 0])), 2.0);
        assert_eq!(sq.len(), 2);

        let spec = WeightSpec::unit(2, WeightFamily::Subexponential, 1.0);
        let lhs = seq_norm(&spec, &sq);
        let rhs = seq_norm(&spec, &e1).powi(2);
        assert!(lhs <= rhs);
        assert!((rhs - 29.556).abs() < 1e-3);

        let bad = FourierSequence::zeros(3);
        assert!(matches!(convolve(&e1, &bad), Err(Error::Dimension { .. })));
    }

    #[test]
    fn op_norm_examples() {
        let spec = WeightSpec::unit(2, WeightFamily::Subexponential, 1.0);
        let modes = vec![m(&[0, 0]), m(&[1, 0]), m(&[0, 1])];
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(op_norm(&spec, &modes, &id).unwrap(), 1.0);
        assert_eq!(op_norm(&spec, &modes, &DMatrix::zeros(3, 3)).unwrap(), 0.0);

        let r = FourierSequence::pair(&m(&[1, 0]), 1.0);
        let op = LatticeOperator::new(vec![m(&[0, 0])], vec![0.0], r).unwrap();
        assert_eq!(op_norm_lattice(&spec, &op).unwrap(), 0.0);

        let inf = LatticeOperator::new(
            vec![m(&[1, 0])],
            vec![f64::INFINITY],
            FourierSequence::zeros(2),
        )
        .unwrap();
        assert!(matches!(op_norm_lattice(&spec, &inf), Err(Error::SingularEntry(_))));
    }

    #[test]
    fn convolution_constant_examples() {
        let c0 = estimate_convolution_constant(1, WeightFamily::Subexponential, 0);
        assert!(c0 >= 1.0);
        let mut prev = 0.0;
        for cutoff in 1..=8 {
            let c = estimate_convolution_constant(1, WeightFamily::Subexponential, cutoff);
            assert!(c.is_finite() && c >= 1.0);
            assert!(c >= prev);
            prev = c;
        }
        let one = estimate_convolution_constant(1, WeightFamily::Subexponential, 4);
        let two = estimate_convolution_constant(2, WeightFamily::Subexponential, 4);
        assert!(two >= one);
        let e1 = estimate_convolution_constant(1, WeightFamily::Exponential, 4);
        let e2 = estimate_convolution_constant(2, WeightFamily::Exponential, 4);
        assert!(e2 >= e1 && e1 >= 1.0);
    }

    #[test]
    fn clipped_convolution_matches_exact_inside_window() {
        let mut u = FourierSequence::zeros(2);
        u.set(&m(&[1, 0]), 0.5).unwrap();
        u.set(&m(&[1, 1]), -0.25).unwrap();
        u.set(&m(&[0, 2]), 0.125).unwrap();
        let exact = convolve(&u, &u).unwrap();
        let g = ModeGrid::from_sequence(&u, 4);
        let clipped = g.convolve_clipped(&g).to_sequence(4);
        assert!(exact.max_abs_diff(&clipped) < 1e-15);
    }

    #[test]
    fn box_modes_count() {
        assert_eq!(box_modes(2, 3).len(), 49);
        assert_eq!(box_modes(3, 1).len(), 27);
        assert!(box_modes(2, 2).iter().all(|m| m.norm() <= 2));
    }
}
