//! kNN estimators for mutual information and conditional mutual information
//! under the supremum distance, plus a permutation significance test.
//!
//! MI uses the digamma form psi(k) + psi(n) - <psi(nx+1) + psi(ny+1)>; the
//! conditional variant is psi(k) - <psi(nxz+1) + psi(nyz+1) - psi(nz+1)>.
//! Neighbor counts use strict supremum-distance inequalities after seeded
//! tie-breaking jitter. Values are in nats and may be slightly negative;
//! significance is decided by the permutation test, never by the sign.

use crate::error::{Error, Result};
use crate::knn::{KdTree, PointSet};
use crate::math::{digamma, SeedMix};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Clone, Copy, Debug)]
pub struct KnnParams {
    /// Neighbor count k used by the joint-space search.
    pub k: usize,
    /// Tie-breaking noise amplitude. Columns are standardized to unit
    /// variance first, so this acts as an absolute amplitude.
    pub jitter_scale: f64,
    pub seed: u64,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 10, jitter_scale: 1e-10, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PermutationParams {
    /// Number of permutation replicates B.
    pub n_permutations: usize,
    /// Neighborhood size for the local (conditional) permutation scheme.
    pub local_neighbors: usize,
    /// Significance level used by callers to reject independence.
    pub alpha: f64,
}

impl Default for PermutationParams {
    fn default() -> Self {
        PermutationParams { n_permutations: 100, local_neighbors: 5, alpha: 0.05 }
    }
}

impl PermutationParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_permutations < 1 {
            return Err(Error::InvalidConfig("need at least one permutation replicate".into()));
        }
        if self.local_neighbors < 1 {
            return Err(Error::InvalidConfig("local_neighbors must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// KSG estimate of I(X;Y) in nats. Columns of each matrix are coordinates,
/// rows are joint samples.
pub fn knn_mi(x_cols: &[Vec<f64>], y_cols: &[Vec<f64>], params: &KnnParams) -> Result<f64> {
    check_shape(&[x_cols, y_cols], params.k)?;
    let x = prepare(x_cols, params)?;
    let y = prepare(y_cols, params)?;
    Ok(mi_core(&x, &y, params.k))
}

/// Conditional variant I(X;Y|Z) in nats.
pub fn knn_cmi(
    x_cols: &[Vec<f64>],
    y_cols: &[Vec<f64>],
    z_cols: &[Vec<f64>],
    params: &KnnParams,
) -> Result<f64> {
    if z_cols.is_empty() {
        return Err(Error::InvalidConfig("empty conditioning set: use knn_mi".into()));
    }
    check_shape(&[x_cols, y_cols, z_cols], params.k)?;
    let x = prepare(x_cols, params)?;
    let y = prepare(y_cols, params)?;
    let z = prepare(z_cols, params)?;
    Ok(cmi_core(&x, &y, &z, params.k))
}

/// Permutation test of X ⊥ Y (given Z when provided).
///
/// Returns the observed statistic and p = (1 + #{stat_b >= stat}) / (1 + B).
/// Without Z each replicate fully permutes the rows of X. With Z each row's
/// X is redrawn from its `local_neighbors` nearest rows in Z-space (self
/// included), preferring rows not yet used, which preserves the X|Z marginal.
pub fn permutation_test(
    x_cols: &[Vec<f64>],
    y_cols: &[Vec<f64>],
    z_cols: Option<&[Vec<f64>]>,
    knn: &KnnParams,
    perm: &PermutationParams,
) -> Result<(f64, f64)> {
    if perm.n_permutations < 1 {
        return Err(Error::InvalidConfig("need at least one permutation replicate".into()));
    }
    let statistic = match z_cols {
        Some(z) => knn_cmi(x_cols, y_cols, z, knn)?,
        None => knn_mi(x_cols, y_cols, knn)?,
    };
    let n = x_cols[0].len();
    // Z neighborhoods are fixed across replicates; only assignments change.
    let z_neighbors: Option<Vec<Vec<u32>>> = match z_cols {
        Some(z) => {
            let zp = prepare(z, knn)?;
            let refs: Vec<&[f64]> = zp.iter().map(|c| c.as_slice()).collect();
            let zs = PointSet::from_columns(&refs)?;
            let zt = KdTree::build(&zs);
            let kp = perm.local_neighbors.min(n);
            Some((0..n).map(|i| zt.k_nearest(zs.row(i), kp, None)).collect())
        }
        None => None,
    };
    let b_total = perm.n_permutations;
    let exceed: usize = (0..b_total)
        .into_par_iter()
        .map(|b| {
            let seed = SeedMix::new(knn.seed).word("perm-replicate").num(b as i64).finish();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let map = match &z_neighbors {
                None => {
                    let mut idx: Vec<usize> = (0..n).collect();
                    idx.shuffle(&mut rng);
                    idx
                }
                Some(nbrs) => local_permutation(nbrs, n, &mut rng),
            };
            let x_b: Vec<Vec<f64>> =
                x_cols.iter().map(|c| map.iter().map(|&j| c[j]).collect()).collect();
            let stat_b = match z_cols {
                Some(z) => knn_cmi(&x_b, y_cols, z, knn),
                None => knn_mi(&x_b, y_cols, knn),
            }
            .expect("replicate has the same shape as the observed data");
            usize::from(stat_b >= statistic)
        })
        .sum();
    let p = (1 + exceed) as f64 / (1 + b_total) as f64;
    Ok((statistic, p))
}

fn local_permutation(neighbors: &[Vec<u32>], n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut used = vec![false; n];
    let mut map = vec![0usize; n];
    let mut pool: Vec<u32> = Vec::new();
    for &i in &order {
        pool.clear();
        pool.extend_from_slice(&neighbors[i]);
        pool.shuffle(rng);
        // Prefer an unused source row; fall back to a reuse when exhausted.
        let mut chosen = pool[0] as usize;
        for &j in &pool {
            if !used[j as usize] {
                chosen = j as usize;
                break;
            }
        }
        map[i] = chosen;
        used[chosen] = true;
    }
    map
}

fn check_shape(groups: &[&[Vec<f64>]], k: usize) -> Result<usize> {
    let mut n: Option<usize> = None;
    for g in groups {
        if g.is_empty() {
            return Err(Error::InvalidData("sample matrix has no columns".into()));
        }
        for col in *g {
            match n {
                None => n = Some(col.len()),
                Some(m) if m != col.len() => {
                    return Err(Error::InvalidData(format!(
                        "column lengths differ: {m} vs {}",
                        col.len()
                    )))
                }
                _ => {}
            }
        }
    }
    let n = n.unwrap_or(0);
    if n <= k {
        return Err(Error::InsufficientSamples { have: n, need: k + 1 });
    }
    Ok(n)
}

/// Standardize each column, then add tie-breaking jitter seeded by the
/// column's standardized content. Identical content gets identical noise,
/// so estimates depend only on values, never on column position or call
/// order; in particular knn_mi(X,Y) equals knn_mi(Y,X) bit for bit.
fn prepare(cols: &[Vec<f64>], params: &KnnParams) -> Result<Vec<Vec<f64>>> {
    cols.iter()
        .map(|col| {
            for &v in col {
                if !v.is_finite() {
                    return Err(Error::InvalidData(format!("non-finite sample value {v}")));
                }
            }
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let sd = var.sqrt();
            let mut out: Vec<f64> = if sd > 0.0 {
                col.iter().map(|v| (v - mean) / sd).collect()
            } else {
                vec![0.0; col.len()]
            };
            if params.jitter_scale > 0.0 {
                let mut mix = SeedMix::new(params.seed).word("jitter");
                for &v in &out {
                    mix = mix.num(v.to_bits() as i64);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(mix.finish());
                let amp = params.jitter_scale;
                for v in &mut out {
                    *v += rng.gen_range(-amp..=amp);
                }
            }
            Ok(out)
        })
        .collect()
}

fn point_set(groups: &[&[Vec<f64>]]) -> PointSet {
    let refs: Vec<&[f64]> = groups.iter().flat_map(|g| g.iter().map(|c| c.as_slice())).collect();
    PointSet::from_columns(&refs).expect("columns validated by prepare")
}

fn mi_core(x: &[Vec<f64>], y: &[Vec<f64>], k: usize) -> f64 {
    let joint = point_set(&[x, y]);
    let xs = point_set(&[x]);
    let ys = point_set(&[y]);
    let jt = KdTree::build(&joint);
    let xt = KdTree::build(&xs);
    let yt = KdTree::build(&ys);
    let n = joint.n();
    let mut acc = 0.0;
    for i in 0..n {
        let eps = jt.kth_distance(joint.row(i), k, Some(i as u32));
        let nx = xt.count_within(xs.row(i), eps).saturating_sub(1);
        let ny = yt.count_within(ys.row(i), eps).saturating_sub(1);
        acc += digamma((nx + 1) as f64) + digamma((ny + 1) as f64);
    }
    digamma(k as f64) + digamma(n as f64) - acc / n as f64
}

fn cmi_core(x: &[Vec<f64>], y: &[Vec<f64>], z: &[Vec<f64>], k: usize) -> f64 {
    let joint = point_set(&[x, y, z]);
    let xz = point_set(&[x, z]);
    let yz = point_set(&[y, z]);
    let zs = point_set(&[z]);
    let jt = KdTree::build(&joint);
    let xzt = KdTree::build(&xz);
    let yzt = KdTree::build(&yz);
    let zt = KdTree::build(&zs);
    let n = joint.n();
    let mut acc = 0.0;
    for i in 0..n {
        let eps = jt.kth_distance(joint.row(i), k, Some(i as u32));
        let nxz = xzt.count_within(xz.row(i), eps).saturating_sub(1);
        let nyz = yzt.count_within(yz.row(i), eps).saturating_sub(1);
        let nz = zt.count_within(zs.row(i), eps).saturating_sub(1);
        acc += digamma((nxz + 1) as f64) + digamma((nyz + 1) as f64) - digamma((nz + 1) as f64);
    }
    digamma(k as f64) - acc / n as f64
}
