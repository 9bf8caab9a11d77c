//! Causal temporal mutual information (CTMI) and its conditional variant.
//!
//! CTMI between two series is the maximum, over all compatible window/gap
//! configurations, of the estimated conditional MI between the paired windows
//! given both series' immediate past values. The conditional variant freezes
//! the pair's optimal configuration and minimizes over each conditioning
//! series' (window, gap) grid.
//!
//! Both searches are canonicalized on the lexicographically ordered pair, so
//! results are exactly symmetric: flipping the query swaps the window sizes
//! and negates the gap but reproduces the value bit for bit.

use crate::error::{Error, Result};
use crate::estimator::{knn_cmi, permutation_test, KnnParams, PermutationParams};
use crate::series::{build_joint_samples, compatible_configs, Conditioner, Dataset};
use rayon::prelude::*;

/// Estimates within this distance of each other are treated as tied and
/// resolved by the parsimony keys below.
pub(crate) const TIE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
pub struct SearchBounds {
    pub lambda_max: usize,
    pub gamma_max: i64,
    /// Configurations with fewer joint samples are skipped.
    pub min_samples: usize,
}

impl Default for SearchBounds {
    fn default() -> Self {
        SearchBounds { lambda_max: 5, gamma_max: 5, min_samples: 50 }
    }
}

/// The maximizing configuration and value of the pair measure.
#[derive(Clone, Debug)]
pub struct CtmiResult {
    pub value: f64,
    pub lambda_pq: usize,
    pub lambda_qp: usize,
    /// Gap from p's window start to q's window start, in grid ticks.
    pub gamma_pq: i64,
    pub p_value: Option<f64>,
    pub n_eff: usize,
}

impl CtmiResult {
    /// The same result expressed for the reversed pair.
    pub fn flipped(&self) -> CtmiResult {
        CtmiResult {
            value: self.value,
            lambda_pq: self.lambda_qp,
            lambda_qp: self.lambda_pq,
            gamma_pq: -self.gamma_pq,
            p_value: self.p_value,
            n_eff: self.n_eff,
        }
    }
}

/// The minimizing conditioning configuration and value.
#[derive(Clone, Debug)]
pub struct CondCtmiResult {
    pub value: f64,
    /// Per-conditioner gap, in the order the conditioners were given,
    /// measured back from the start of the later of the two paired windows.
    pub cond_gaps: Vec<i64>,
    pub cond_windows: Vec<usize>,
    pub p_value: Option<f64>,
    pub n_eff: usize,
}

/// Maximizes the estimated conditional MI
/// I(X_t^(p;l); X_{t+g}^(q;m) | X^(p;1)_{t-1}, X^(q;1)_{t+g-1}) over every
/// compatible (l, m, g). Ties within `TIE_EPS` prefer the smallest window
/// sum, then the smallest |gamma|, then positive gamma, then the smaller
/// (lambda_pq, lambda_qp). When `perm` is given, a permutation test runs at
/// the maximizer and fills `p_value`.
pub fn ctmi(
    ds: &Dataset,
    p: usize,
    q: usize,
    bounds: &SearchBounds,
    knn: &KnnParams,
    perm: Option<&PermutationParams>,
) -> Result<CtmiResult> {
    let flip = ds.name(p) > ds.name(q);
    let (a, b) = if flip { (q, p) } else { (p, q) };
    let configs = compatible_configs(ds, a, b, bounds.lambda_max, bounds.gamma_max, bounds.min_samples)?;
    let evals: Vec<Option<(f64, usize)>> = configs
        .par_iter()
        .map(|&(lpq, lqp, g)| {
            let js = build_joint_samples(ds, a, b, lpq, lqp, g, &[], true, bounds.min_samples).ok()?;
            let z = js.z.as_ref().expect("past windows always present");
            let v = knn_cmi(&js.x, &js.y, z, knn).ok()?;
            Some((v, js.n_eff))
        })
        .collect();
    // Serial reduction in enumeration order keeps tie resolution
    // schedule-independent.
    let mut best: Option<(f64, usize, usize, i64, usize)> = None;
    for (&(lpq, lqp, g), ev) in configs.iter().zip(&evals) {
        let Some((v, n)) = *ev else { continue };
        let replace = match best {
            None => true,
            Some((bv, blpq, blqp, bg, _)) => {
                if v > bv + TIE_EPS {
                    true
                } else if v < bv - TIE_EPS {
                    false
                } else {
                    tie_key(lpq, lqp, g) < tie_key(blpq, blqp, bg)
                }
            }
        };
        if replace {
            best = Some((v, lpq, lqp, g, n));
        }
    }
    let Some((value, lpq, lqp, g, n_eff)) = best else {
        return Err(Error::NoCompatibleConfig {
            p: ds.name(a).to_string(),
            q: ds.name(b).to_string(),
        });
    };
    let mut result = CtmiResult { value, lambda_pq: lpq, lambda_qp: lqp, gamma_pq: g, p_value: None, n_eff };
    if let Some(pp) = perm {
        let (_, p_value) = test_pair(ds, a, b, &result, knn, pp)?;
        result.p_value = Some(p_value);
    }
    if flip {
        result = result.flipped();
    }
    Ok(result)
}

fn tie_key(lpq: usize, lqp: usize, g: i64) -> (usize, i64, u8, usize, usize) {
    (lpq + lqp, g.abs(), u8::from(g < 0), lpq, lqp)
}

/// Permutation test of the pair at a previously found configuration.
/// Returns (statistic, p_value). The configuration is interpreted relative
/// to (p, q) and re-canonicalized internally.
pub fn ctmi_test(
    ds: &Dataset,
    p: usize,
    q: usize,
    at: &CtmiResult,
    knn: &KnnParams,
    perm: &PermutationParams,
) -> Result<(f64, f64)> {
    let flip = ds.name(p) > ds.name(q);
    let (a, b) = if flip { (q, p) } else { (p, q) };
    let canonical = if flip { at.flipped() } else { at.clone() };
    test_pair(ds, a, b, &canonical, knn, perm)
}

fn test_pair(
    ds: &Dataset,
    a: usize,
    b: usize,
    at: &CtmiResult,
    knn: &KnnParams,
    perm: &PermutationParams,
) -> Result<(f64, f64)> {
    let js = build_joint_samples(ds, a, b, at.lambda_pq, at.lambda_qp, at.gamma_pq, &[], true, 0)?;
    permutation_test(&js.x, &js.y, js.z.as_deref(), knn, perm)
}

/// Minimizes the estimated conditional MI over each conditioning series'
/// (window, gap) grid while the pair's configuration stays frozen at `base`.
/// Gaps count back from the later pair window's start and obey
/// 1 <= Gamma <= `bounds.gamma_max`, so conditioning windows always begin
/// strictly before both paired windows. The joint grid is searched
/// coordinate-wise in conditioner name order, two sweeps (one when there is
/// a single conditioner), which bounds cost at the price of not guaranteeing
/// the full-grid minimum.
pub fn cond_ctmi(
    ds: &Dataset,
    p: usize,
    q: usize,
    base: &CtmiResult,
    conditioners: &[usize],
    bounds: &SearchBounds,
    knn: &KnnParams,
    perm: Option<&PermutationParams>,
) -> Result<CondCtmiResult> {
    if conditioners.is_empty() {
        return Err(Error::InvalidConfig("conditional CTMI needs at least one conditioner".into()));
    }
    if conditioners.contains(&p) || conditioners.contains(&q) {
        return Err(Error::InvalidConfig("conditioners must differ from the tested pair".into()));
    }
    let flip = ds.name(p) > ds.name(q);
    let (a, b) = if flip { (q, p) } else { (p, q) };
    let canon = if flip { base.flipped() } else { base.clone() };

    let gamma_min = 1;
    // Search order is by name so the result never depends on caller order.
    let mut order: Vec<usize> = (0..conditioners.len()).collect();
    order.sort_by(|&i, &j| ds.name(conditioners[i]).cmp(ds.name(conditioners[j])));
    if gamma_min > bounds.gamma_max {
        return Err(Error::InfeasibleConditioning {
            series: ds.name(conditioners[order[0]]).to_string(),
            min: gamma_min,
            max: bounds.gamma_max,
        });
    }

    let eval = |state: &[(usize, i64)]| -> Option<(f64, usize)> {
        let conds: Vec<Conditioner> = order
            .iter()
            .zip(state)
            .map(|(&slot, &(lam, gap))| (conditioners[slot], lam, gap))
            .collect();
        let js = build_joint_samples(
            ds,
            a,
            b,
            canon.lambda_pq,
            canon.lambda_qp,
            canon.gamma_pq,
            &conds,
            true,
            bounds.min_samples,
        )
        .ok()?;
        let v = knn_cmi(&js.x, &js.y, js.z.as_ref().expect("conditioners present"), knn).ok()?;
        Some((v, js.n_eff))
    };

    let k_count = conditioners.len();
    let mut state: Vec<(usize, i64)> = vec![(1, gamma_min); k_count];
    let mut best: Option<(f64, usize)> = None;
    let sweeps = if k_count == 1 { 1 } else { 2 };
    for _ in 0..sweeps {
        for k in 0..k_count {
            let grid: Vec<(usize, i64)> = (1..=bounds.lambda_max)
                .flat_map(|lam| (gamma_min..=bounds.gamma_max).map(move |g| (lam, g)))
                .collect();
            let evals: Vec<Option<(f64, usize)>> = grid
                .par_iter()
                .map(|&cfg| {
                    let mut s = state.clone();
                    s[k] = cfg;
                    eval(&s)
                })
                .collect();
            let mut best_k: Option<(f64, usize, (usize, i64))> = None;
            for (&cfg, ev) in grid.iter().zip(&evals) {
                let Some((v, n)) = *ev else { continue };
                if best_k.as_ref().map_or(true, |&(bv, _, _)| v < bv - TIE_EPS) {
                    best_k = Some((v, n, cfg));
                }
            }
            let Some((v, n, cfg)) = best_k else {
                return Err(Error::InfeasibleConditioning {
                    series: ds.name(conditioners[order[k]]).to_string(),
                    min: gamma_min,
                    max: bounds.gamma_max,
                });
            };
            state[k] = cfg;
            best = Some((v, n));
        }
    }
    let (value, n_eff) = best.expect("at least one coordinate evaluated");

    let mut cond_windows = vec![0usize; k_count];
    let mut cond_gaps = vec![0i64; k_count];
    for (slot_pos, &slot) in order.iter().enumerate() {
        cond_windows[slot] = state[slot_pos].0;
        cond_gaps[slot] = state[slot_pos].1;
    }
    let mut result = CondCtmiResult { value, cond_gaps, cond_windows, p_value: None, n_eff };
    if let Some(pp) = perm {
        let (_, p_value) = cond_ctmi_test(ds, p, q, base, conditioners, &result, knn, pp)?;
        result.p_value = Some(p_value);
    }
    Ok(result)
}

/// Local-permutation test of the pair given the conditioning configuration
/// found by `cond_ctmi`. Returns (statistic, p_value).
pub fn cond_ctmi_test(
    ds: &Dataset,
    p: usize,
    q: usize,
    base: &CtmiResult,
    conditioners: &[usize],
    at: &CondCtmiResult,
    knn: &KnnParams,
    perm: &PermutationParams,
) -> Result<(f64, f64)> {
    let flip = ds.name(p) > ds.name(q);
    let (a, b) = if flip { (q, p) } else { (p, q) };
    let canon = if flip { base.flipped() } else { base.clone() };
    let conds: Vec<Conditioner> = conditioners
        .iter()
        .zip(at.cond_windows.iter().zip(&at.cond_gaps))
        .map(|(&r, (&lam, &gap))| (r, lam, gap))
        .collect();
    let js = build_joint_samples(
        ds,
        a,
        b,
        canon.lambda_pq,
        canon.lambda_qp,
        canon.gamma_pq,
        &conds,
        true,
        0,
    )?;
    permutation_test(&js.x, &js.y, js.z.as_deref(), knn, perm)
}
