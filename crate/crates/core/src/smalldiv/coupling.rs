//! Inversion of `T = D + R` on a finite set `Λ` by pasting local inverses.
//!
//! Each site `n` carries a block `U(n) ∋ n` with a local inverse
//! `T_{U(n)}⁻¹`. The parametrix `P` takes column `n` from that local inverse;
//! then `TP = I + K` with `K(m,n) = Σ_{p∈U(n)} R(m,p)P(p,n)` for `m ∉ U(n)`
//! and zero otherwise. When `‖K‖ ≤ 1/2`, `G = P(I+K)⁻¹` is the inverse.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spaces::{op_norm, LatticeOperator, ModeIndex, WeightSpec};

/// Local data attached to one site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    /// indices into the site list, containing the site itself
    pub sites: Vec<usize>,
    /// bound on the local inverse norm
    pub c_n: f64,
    /// lower bound on the distance from the site to the complement of the block
    pub l_n: f64,
    /// weight gap in `[0, σ − σ̃]`
    pub mu_n: f64,
}

/// One block per site, aligned with the operator's mode set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCover {
    pub blocks: Vec<Block>,
}

#[derive(Debug, Clone)]
pub struct CouplingResult {
    pub inverse: DMatrix<f64>,
    pub parametrix: DMatrix<f64>,
    pub coupling: DMatrix<f64>,
    pub coupling_norm: f64,
    /// `‖G‖_{σ̃}`
    pub inverse_norm: f64,
    /// `(1 + w_{σ̃}(0))·max_n C_n`
    pub certificate: f64,
}

fn submatrix(t: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| t[(idx[i], idx[j])])
}

fn sub_modes(modes: &[ModeIndex], idx: &[usize]) -> Vec<ModeIndex> {
    idx.iter().map(|&i| modes[i].clone()).collect()
}

/// `dist(n, Λ∖U)` in the max norm; infinite if `U = Λ`.
fn complement_distance(modes: &[ModeIndex], site: usize, block: &[usize]) -> f64 {
    let mut inside = vec![false; modes.len()];
    for &i in block {
        inside[i] = true;
    }
    modes
        .iter()
        .enumerate()
        .filter(|(i, _)| !inside[*i])
        .map(|(_, m)| m.distance(&modes[site]) as f64)
        .fold(f64::INFINITY, f64::min)
}

fn local_inverse(t: &DMatrix<f64>, idx: &[usize]) -> Result<DMatrix<f64>> {
    let sub = submatrix(t, idx);
    sub.try_inverse().ok_or(Error::Conditioning { pivot: 0.0 })
}

fn hypothesis(site: &ModeIndex, detail: String) -> Error {
    Error::Hypothesis {
        site: site.to_string(),
        detail,
    }
}

/// Builds `G = T⁻¹` from the cover after checking every block hypothesis:
/// `‖T_{U(n)}⁻¹‖_{σ̃+μ_n} ≤ C_n`, `dist(n, Λ∖U(n)) ≥ l_n`, and
/// `C_n e^{−μ_n l_n^c} ‖R‖_σ ≤ 1/2`.
pub fn coupling_invert(
    t: &LatticeOperator,
    cover: &BlockCover,
    sigma: f64,
    sigma_tilde: f64,
    spec: &WeightSpec,
) -> Result<CouplingResult> {
    let modes = &t.mode_set;
    let n = modes.len();
    if cover.blocks.len() != n {
        return Err(Error::InvalidInput(format!(
            "cover has {} blocks for {} sites",
            cover.blocks.len(),
            n
        )));
    }
    if !(sigma_tilde > 0.0 && sigma_tilde <= sigma) {
        return Err(Error::InvalidInput(format!(
            "need 0 < sigma_tilde = {sigma_tilde} <= sigma = {sigma}"
        )));
    }
    let w_sigma = spec.with_sigma(sigma);
    let w_tilde = spec.with_sigma(sigma_tilde);
    let dense = t.dense()?;
    let r = t.dense_toeplitz();
    let r_norm = op_norm(&w_sigma, modes, &r)?;

    let mut parametrix = DMatrix::zeros(n, n);
    let mut in_block = vec![vec![false; n]; n];
    for (site, block) in cover.blocks.iter().enumerate() {
        let m = &modes[site];
        if block.sites.iter().any(|&i| i >= n) {
            return Err(hypothesis(m, "block refers to a site outside the lattice".into()));
        }
        if !block.sites.contains(&site) {
            return Err(hypothesis(m, "site is not contained in its own block".into()));
        }
        if !(block.mu_n >= 0.0 && block.mu_n <= sigma - sigma_tilde + 1e-15) {
            return Err(hypothesis(m, format!("weight gap {} outside [0, sigma - sigma_tilde]", block.mu_n)));
        }
        let dist = complement_distance(modes, site, &block.sites);
        if dist < block.l_n {
            return Err(hypothesis(m, format!("distance to complement {dist} below l_n = {}", block.l_n)));
        }
        let inv = local_inverse(&dense, &block.sites)
            .map_err(|_| hypothesis(m, "local block is singular".into()))?;
        let local_norm = op_norm(&w_tilde.with_sigma(sigma_tilde + block.mu_n), &sub_modes(modes, &block.sites), &inv)?;
        if local_norm > block.c_n {
            return Err(hypothesis(m, format!("local inverse norm {local_norm:.6e} exceeds C_n = {:.6e}", block.c_n)));
        }
        let decay = if block.l_n.is_infinite() {
            0.0
        } else {
            (-block.mu_n * block.l_n.powf(spec.c_exponent)).exp()
        };
        let coupling_bound = block.c_n * decay * r_norm;
        if coupling_bound > 0.5 {
            return Err(hypothesis(m, format!("C_n e^(-mu l^c) |R| = {coupling_bound:.6e} exceeds 1/2")));
        }
        let col = block.sites.iter().position(|&i| i == site).unwrap();
        for (row, &i) in block.sites.iter().enumerate() {
            parametrix[(i, site)] = inv[(row, col)];
            in_block[site][i] = true;
        }
    }

    // K(m,n) = Σ_{p∈U(n)} R(m,p)P(p,n) for m ∉ U(n)
    let mut coupling = DMatrix::zeros(n, n);
    for (site, block) in cover.blocks.iter().enumerate() {
        for m in 0..n {
            if in_block[site][m] {
                continue;
            }
            coupling[(m, site)] = block.sites.iter().map(|&p| r[(m, p)] * parametrix[(p, site)]).sum();
        }
    }
    let coupling_norm = op_norm(&w_tilde, modes, &coupling)?;
    if coupling_norm > 0.5 {
        return Err(Error::Coupling { norm: coupling_norm });
    }
    let ipk = DMatrix::<f64>::identity(n, n) + &coupling;
    let ipk_inv = ipk.try_inverse().ok_or(Error::Conditioning { pivot: 0.0 })?;
    let inverse = &parametrix * ipk_inv;
    let inverse_norm = op_norm(&w_tilde, modes, &inverse)?;
    let c_max = cover.blocks.iter().map(|b| b.c_n).fold(0.0, f64::max);
    let certificate = (1.0 + w_tilde.value(&ModeIndex::zero(modes[0].nu()))) * c_max;
    Ok(CouplingResult {
        inverse,
        parametrix,
        coupling,
        coupling_norm,
        inverse_norm,
        certificate,
    })
}

/// Singleton blocks for sites with `|D(n,n)| > threshold`, using
/// `C_n = w(0)/(|D(n,n)| − ‖R‖_σ)`; all remaining sites share one block
/// whose `C_n` is its measured local inverse norm. `μ_n = σ − σ̃`.
pub fn build_cover(
    t: &LatticeOperator,
    threshold: f64,
    sigma: f64,
    sigma_tilde: f64,
    spec: &WeightSpec,
) -> Result<BlockCover> {
    let modes = &t.mode_set;
    let n = modes.len();
    let mu = sigma - sigma_tilde;
    let w_sigma = spec.with_sigma(sigma);
    let r_norm = op_norm(&w_sigma, modes, &t.dense_toeplitz())?;
    let w0 = spec.value(&ModeIndex::zero(modes[0].nu()));
    let cluster: Vec<usize> = (0..n).filter(|&i| t.diagonal[i].abs() <= threshold).collect();
    let dense = t.dense()?;
    let cluster_block = if cluster.is_empty() {
        None
    } else {
        let inv = local_inverse(&dense, &cluster)?;
        let c = op_norm(&spec.with_sigma(sigma_tilde + mu), &sub_modes(modes, &cluster), &inv)?;
        Some(c * (1.0 + 1e-12))
    };
    let blocks = (0..n)
        .map(|i| {
            if t.diagonal[i].abs() > threshold {
                let gap = t.diagonal[i].abs() - r_norm;
                let c_n = if gap > 0.0 { w0 / gap } else { f64::INFINITY };
                Block {
                    sites: vec![i],
                    c_n,
                    l_n: complement_distance(modes, i, &[i]),
                    mu_n: mu,
                }
            } else {
                Block {
                    sites: cluster.clone(),
                    c_n: cluster_block.unwrap(),
                    l_n: complement_distance(modes, i, &cluster),
                    mu_n: mu,
                }
            }
        })
        .collect();
    Ok(BlockCover { blocks })
}
