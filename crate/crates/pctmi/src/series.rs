//! Time-series data model, window embeddings, and joint-observation
//! alignment across equal or different sampling rates.
//!
//! Time lives on an exact rational grid. A dataset reduces all series to a
//! common integer tick grid (the coarsest refinement of every observation
//! grid), so alignment and gap arithmetic are bit-exact. Gaps (gamma) and
//! gap bounds are measured in ticks; with unit rates a tick is one time unit.

use crate::error::{Error, Result};
use num_integer::Integer;
use num_rational::Ratio;

pub type Rat = Ratio<i64>;

/// Column-major sample matrix: one Vec per coordinate, rows are samples.
pub type Matrix = Vec<Vec<f64>>;

/// A uniformly sampled univariate series.
#[derive(Clone, Debug)]
pub struct TimeSeries {
    pub name: String,
    pub values: Vec<f64>,
    /// Observations per time unit. Integer at ingestion; subsampling divides it.
    pub rate: Rat,
    /// Time of the first observation, in time units.
    pub start_time: Rat,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, values: Vec<f64>, rate: Rat) -> Result<Self> {
        Self::with_start(name, values, rate, Rat::from_integer(0))
    }

    pub fn with_start(
        name: impl Into<String>,
        values: Vec<f64>,
        rate: Rat,
        start_time: Rat,
    ) -> Result<Self> {
        let name = name.into();
        if values.is_empty() {
            return Err(Error::InvalidData(format!("series {name} has no observations")));
        }
        if rate <= Rat::from_integer(0) {
            return Err(Error::InvalidData(format!("series {name} has non-positive rate {rate}")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("series {name} contains non-finite value {v}")));
        }
        Ok(TimeSeries { name, values, rate, start_time })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Spacing between consecutive observations, in time units.
    pub fn period(&self) -> Rat {
        self.rate.recip()
    }

    /// Time of observation `i`.
    pub fn time_at(&self, i: usize) -> Rat {
        self.start_time + self.period() * Rat::from_integer(i as i64)
    }
}

/// An ordered collection of named series sharing one time axis.
#[derive(Clone, Debug)]
pub struct Dataset {
    series: Vec<TimeSeries>,
    /// Documentation-only label for the time axis.
    pub time_unit: String,
    tick: Rat,
    base: Rat,
    start_ticks: Vec<i64>,
    period_ticks: Vec<i64>,
}

impl Dataset {
    pub fn new(series: Vec<TimeSeries>) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::InvalidDataset("dataset has no series".into()));
        }
        let mut names: Vec<&str> = series.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidDataset("duplicate series names".into()));
        }
        let base = series.iter().map(|s| s.start_time).min().unwrap();
        let mut tick = Rat::from_integer(0);
        for s in &series {
            tick = rat_gcd(tick, s.period());
            tick = rat_gcd(tick, s.start_time - base);
        }
        let start_ticks = series.iter().map(|s| rat_div_exact(s.start_time - base, tick)).collect();
        let period_ticks = series.iter().map(|s| rat_div_exact(s.period(), tick)).collect();
        Ok(Dataset {
            series,
            time_unit: String::new(),
            tick,
            base,
            start_ticks,
            period_ticks,
        })
    }

    pub fn n_series(&self) -> usize {
        self.series.len()
    }

    pub fn series(&self, idx: usize) -> &TimeSeries {
        &self.series[idx]
    }

    pub fn all_series(&self) -> &[TimeSeries] {
        &self.series
    }

    pub fn names(&self) -> Vec<String> {
        self.series.iter().map(|s| s.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.series.iter().position(|s| s.name == name)
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.series[idx].name
    }

    /// Duration of one grid tick, in time units.
    pub fn tick(&self) -> Rat {
        self.tick
    }

    /// Time of tick 0.
    pub fn base_time(&self) -> Rat {
        self.base
    }

    pub fn start_tick(&self, idx: usize) -> i64 {
        self.start_ticks[idx]
    }

    pub fn period_ticks(&self, idx: usize) -> i64 {
        self.period_ticks[idx]
    }
}

fn rat_gcd(a: Rat, b: Rat) -> Rat {
    if a == Rat::from_integer(0) {
        return b;
    }
    if b == Rat::from_integer(0) {
        return a;
    }
    let den = a.denom().lcm(b.denom());
    let an = a.numer() * (den / a.denom());
    let bn = b.numer() * (den / b.denom());
    Rat::new(an.gcd(&bn), den)
}

fn rat_div_exact(a: Rat, tick: Rat) -> i64 {
    let q = a / tick;
    debug_assert!(q.is_integer(), "grid reduction must be exact");
    q.to_integer()
}

/// Overlapping windows of `lambda` consecutive observations.
#[derive(Clone, Debug)]
pub struct WindowEmbedding {
    pub source: String,
    pub window_size: usize,
    /// Row t is (v_t, ..., v_{t+lambda-1}); there are L - lambda + 1 rows.
    pub rows: Vec<Vec<f64>>,
    /// Time of each row's first observation.
    pub start_times: Vec<Rat>,
}

pub fn window_embed(series: &TimeSeries, lambda: usize) -> Result<WindowEmbedding> {
    let len = series.len();
    if lambda == 0 || lambda >= len {
        return Err(Error::InvalidWindow { lambda, len });
    }
    let count = len - lambda + 1;
    let rows = (0..count).map(|t| series.values[t..t + lambda].to_vec()).collect();
    let start_times = (0..count).map(|t| series.time_at(t)).collect();
    Ok(WindowEmbedding { source: series.name.clone(), window_size: lambda, rows, start_times })
}

/// Stride between successive joint-window start times for two integer rates,
/// expressed on the pair's common refinement grid (tick 1/(rate_p * rate_q)):
/// LCM(rate_p, rate_q) ticks, i.e. 1/GCD(rate_p, rate_q) time units, the
/// smallest spacing that lands on both observation grids.
pub fn joint_stride(rate_p: i64, rate_q: i64) -> Rat {
    assert!(rate_p >= 1 && rate_q >= 1, "rates must be positive integers");
    Rat::from_integer(rate_p.lcm(&rate_q))
}

/// Aligned window pairs (plus optional conditioning windows) forming the
/// estimator's sample matrices.
#[derive(Clone, Debug)]
pub struct JointSampleSet {
    /// Windows from series p, column-major (lambda_pq coordinates).
    pub x: Matrix,
    /// Windows from series q, column-major (lambda_qp coordinates).
    pub y: Matrix,
    /// Conditioning windows followed by the two single-observation pasts.
    pub z: Option<Matrix>,
    /// Constant start-time gap between paired windows, in ticks.
    pub gap: i64,
    pub n_eff: usize,
}

/// A conditioning request: series index, window size, and gap (ticks)
/// measured back from the start of the later of the two paired windows.
pub type Conditioner = (usize, usize, i64);

struct RowIdx {
    i: usize,
    j: usize,
    cond: Vec<usize>,
}

fn joint_row_indices(
    ds: &Dataset,
    p: usize,
    q: usize,
    lambda_pq: usize,
    lambda_qp: usize,
    gamma: i64,
    conditioners: &[Conditioner],
    include_past: bool,
) -> Result<Vec<RowIdx>> {
    let sp = &ds.series[p];
    let sq = &ds.series[q];
    for (s, lambda) in [(sp, lambda_pq), (sq, lambda_qp)] {
        if lambda == 0 || lambda >= s.len() {
            return Err(Error::InvalidWindow { lambda, len: s.len() });
        }
    }
    for &(r, lambda, _) in conditioners {
        let len = ds.series[r].len();
        if lambda == 0 || lambda >= len {
            return Err(Error::InvalidWindow { lambda, len });
        }
    }
    let (pp, pq_per) = (ds.period_ticks[p], ds.period_ticks[q]);
    let first = usize::from(include_past);
    let i_max = sp.len() - lambda_pq;
    let j_max = sq.len() - lambda_qp;
    let mut rows = Vec::new();
    'outer: for i in first..=i_max {
        let t_p = ds.start_ticks[p] + i as i64 * pp;
        let rel = t_p + gamma - ds.start_ticks[q];
        if rel.rem_euclid(pq_per) != 0 {
            continue;
        }
        let j = rel.div_euclid(pq_per);
        if j < first as i64 || j > j_max as i64 {
            continue;
        }
        let mut cond = Vec::with_capacity(conditioners.len());
        // Conditioning windows anchor on whichever pair window starts later,
        // so a positive gap always means "strictly before both windows".
        let t_anchor = t_p + gamma.max(0);
        for &(r, lambda_r, big_gamma) in conditioners {
            let rel_r = t_anchor - big_gamma - ds.start_ticks[r];
            let per_r = ds.period_ticks[r];
            if rel_r.rem_euclid(per_r) != 0 {
                continue 'outer;
            }
            let m = rel_r.div_euclid(per_r);
            if m < 0 || m > (ds.series[r].len() - lambda_r) as i64 {
                continue 'outer;
            }
            cond.push(m as usize);
        }
        rows.push(RowIdx { i, j: j as usize, cond });
    }
    Ok(rows)
}

/// Builds the aligned sample matrices for windows X^(p;lambda_pq)_t and
/// X^(q;lambda_qp)_{t+gamma}, with optional conditioning windows starting
/// Gamma_k ticks before the later pair window and, when `include_past` is set, the two
/// single-observation pasts of p and q (rows lacking a past are dropped,
/// never fabricated). Start-time gaps are constant across rows by
/// construction; rows land on the pair's minimal common stride.
pub fn build_joint_samples(
    ds: &Dataset,
    p: usize,
    q: usize,
    lambda_pq: usize,
    lambda_qp: usize,
    gamma: i64,
    conditioners: &[Conditioner],
    include_past: bool,
    min_samples: usize,
) -> Result<JointSampleSet> {
    let rows = joint_row_indices(ds, p, q, lambda_pq, lambda_qp, gamma, conditioners, include_past)?;
    let n_eff = rows.len();
    if n_eff == 0 {
        return Err(Error::Alignment {
            p: ds.series[p].name.clone(),
            q: ds.series[q].name.clone(),
            reason: format!("no joint observations with gap {gamma}"),
        });
    }
    if n_eff < min_samples {
        return Err(Error::InsufficientSamples { have: n_eff, need: min_samples });
    }
    let vp = &ds.series[p].values;
    let vq = &ds.series[q].values;
    let x: Matrix = (0..lambda_pq).map(|c| rows.iter().map(|r| vp[r.i + c]).collect()).collect();
    let y: Matrix = (0..lambda_qp).map(|c| rows.iter().map(|r| vq[r.j + c]).collect()).collect();
    let mut z: Matrix = Vec::new();
    for (ci, &(r, lambda_r, _)) in conditioners.iter().enumerate() {
        let vr = &ds.series[r].values;
        for c in 0..lambda_r {
            z.push(rows.iter().map(|row| vr[row.cond[ci] + c]).collect());
        }
    }
    if include_past {
        z.push(rows.iter().map(|r| vp[r.i - 1]).collect());
        z.push(rows.iter().map(|r| vq[r.j - 1]).collect());
    }
    Ok(JointSampleSet {
        x,
        y,
        z: if z.is_empty() { None } else { Some(z) },
        gap: gamma,
        n_eff,
    })
}

/// Enumerates all (lambda_pq, lambda_qp, gamma) triples within the bounds for
/// which a joint sample set with pasts reaches `min_samples` rows. Order is
/// lambda_pq ascending, then lambda_qp, then gamma.
pub fn compatible_configs(
    ds: &Dataset,
    p: usize,
    q: usize,
    lambda_max: usize,
    gamma_max: i64,
    min_samples: usize,
) -> Result<Vec<(usize, usize, i64)>> {
    assert!(lambda_max >= 1);
    assert!(gamma_max >= 0);
    let mut out = Vec::new();
    for lambda_pq in 1..=lambda_max {
        for lambda_qp in 1..=lambda_max {
            for gamma in -gamma_max..=gamma_max {
                match joint_row_indices(ds, p, q, lambda_pq, lambda_qp, gamma, &[], true) {
                    Ok(rows) if rows.len() >= min_samples.max(1) => {
                        out.push((lambda_pq, lambda_qp, gamma));
                    }
                    _ => {}
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::NoCompatibleConfig {
            p: ds.series[p].name.clone(),
            q: ds.series[q].name.clone(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(name: &str, values: Vec<f64>, rate: i64) -> TimeSeries {
        TimeSeries::new(name, values, Rat::from_integer(rate)).unwrap()
    }

    fn ramp(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64).collect()
    }

    #[test]
    fn window_embed_matches_definition() {
        let s = ts("a", vec![1.0, 2.0, 3.0, 4.0], 1);
        let w = window_embed(&s, 2).unwrap();
        assert_eq!(w.rows, vec![vec![1.0, 2.0], vec![2.0, 3.0], vec![3.0, 4.0]]);
        assert_eq!(w.start_times, vec![Rat::from_integer(0), Rat::from_integer(1), Rat::from_integer(2)]);

        let s5 = ts("b", ramp(5), 1);
        assert_eq!(window_embed(&s5, 3).unwrap().rows.len(), 3);
        let identity = window_embed(&s5, 1).unwrap();
        assert_eq!(identity.rows.len(), 5);
        assert!(identity.rows.iter().zip(&s5.values).all(|(r, v)| r[0] == *v));
    }

    #[test]
    fn window_embed_rejects_bad_sizes() {
        let s = ts("a", ramp(4), 1);
        assert!(matches!(window_embed(&s, 0), Err(Error::InvalidWindow { .. })));
        assert!(matches!(window_embed(&s, 4), Err(Error::InvalidWindow { .. })));
    }

    #[test]
    fn joint_stride_examples() {
        assert_eq!(joint_stride(1, 1), Rat::from_integer(1));
        assert_eq!(joint_stride(2, 3), Rat::from_integer(6));
        assert_eq!(joint_stride(4, 2), Rat::from_integer(4));
        assert_eq!(joint_stride(3, 2), joint_stride(2, 3));
    }

    #[test]
    fn equal_rate_rows_line_up() {
        // lambda=1, gamma=1 with pasts: rows (v^p_t, v^q_{t+1} | v^p_{t-1}, v^q_t).
        let l = 8;
        let ds = Dataset::new(vec![ts("p", ramp(l), 1), ts("q", ramp(l), 1)]).unwrap();
        let js = build_joint_samples(&ds, 0, 1, 1, 1, 1, &[], true, 1).unwrap();
        assert_eq!(js.n_eff, l - 2);
        assert_eq!(js.x[0], (1..=6).map(|v| v as f64).collect::<Vec<_>>());
        assert_eq!(js.y[0], (2..=7).map(|v| v as f64).collect::<Vec<_>>());
        let z = js.z.unwrap();
        assert_eq!(z[0], (0..=5).map(|v| v as f64).collect::<Vec<_>>());
        assert_eq!(z[1], (1..=6).map(|v| v as f64).collect::<Vec<_>>());
    }

    #[test]
    fn different_rates_use_minimal_common_stride() {
        // p at rate 2 (period 1 tick), q at rate 1 (period 2 ticks): joint
        // rows appear every 2 ticks, i.e. every other p observation and
        // every q observation.
        let ds = Dataset::new(vec![ts("p", ramp(40), 2), ts("q", ramp(20), 1)]).unwrap();
        assert_eq!(ds.period_ticks(0), 1);
        assert_eq!(ds.period_ticks(1), 2);
        let js = build_joint_samples(&ds, 0, 1, 3, 2, 0, &[], false, 1).unwrap();
        // p windows start at even ticks 0..=37; q windows need j <= 18.
        assert_eq!(js.n_eff, 19);
        assert_eq!(js.x[0][..3], [0.0, 2.0, 4.0]);
        assert_eq!(js.y[0][..3], [0.0, 1.0, 2.0]);
    }

    #[test]
    fn offset_grids_constrain_feasible_gaps() {
        // Same unit rate, half-unit offset: only half-integer gaps align.
        let a = ts("a", ramp(30), 1);
        let b = TimeSeries::with_start("b", ramp(30), Rat::from_integer(1), Rat::new(1, 2)).unwrap();
        let ds = Dataset::new(vec![a, b]).unwrap();
        assert_eq!(ds.tick(), Rat::new(1, 2));
        assert!(matches!(
            build_joint_samples(&ds, 0, 1, 1, 1, 0, &[], true, 1),
            Err(Error::Alignment { .. })
        ));
        let js = build_joint_samples(&ds, 0, 1, 1, 1, 1, &[], true, 1).unwrap();
        assert!(js.n_eff > 0);
    }

    #[test]
    fn compatible_configs_enumerates_full_grid() {
        let ds = Dataset::new(vec![ts("p", ramp(200), 1), ts("q", ramp(200), 1)]).unwrap();
        let cfgs = compatible_configs(&ds, 0, 1, 1, 1, 10).unwrap();
        assert_eq!(cfgs, vec![(1, 1, -1), (1, 1, 0), (1, 1, 1)]);
    }

    #[test]
    fn disjoint_spans_have_no_config() {
        let a = ts("a", ramp(10), 1);
        let b = TimeSeries::with_start("b", ramp(10), Rat::from_integer(1), Rat::from_integer(1000))
            .unwrap();
        let ds = Dataset::new(vec![a, b]).unwrap();
        assert!(matches!(
            compatible_configs(&ds, 0, 1, 2, 2, 1),
            Err(Error::NoCompatibleConfig { .. })
        ));
    }

    #[test]
    fn conditioner_windows_anchor_on_the_later_pair_window() {
        let l = 12;
        let ds = Dataset::new(vec![
            ts("p", ramp(l), 1),
            ts("q", ramp(l), 1),
            ts("r", (0..l).map(|i| (100 + i) as f64).collect(), 1),
        ])
        .unwrap();
        // Pair windows at t and t+1; a gap-1 conditioning window on r starts
        // one tick before the later window, at t.
        let js = build_joint_samples(&ds, 0, 1, 1, 1, 1, &[(2, 2, 1)], true, 1).unwrap();
        let z = js.z.unwrap();
        // Columns: r window (2 cols), then past of p, then past of q.
        assert_eq!(z.len(), 4);
        assert_eq!(z[0][0], 101.0); // r at t for first row (t=1)
        assert_eq!(z[1][0], 102.0); // r at t+1
        assert_eq!(z[2][0], 0.0); // p at t-1
        assert_eq!(z[3][0], 1.0); // q at t+gamma-1 = t
    }

    #[test]
    fn duplicate_names_rejected() {
        let r = Dataset::new(vec![ts("a", ramp(5), 1), ts("a", ramp(5), 1)]);
        assert!(matches!(r, Err(Error::InvalidDataset(_))));
    }

    #[test]
    fn brute_force_row_count_oracle() {
        // Exhaustive (i, j) enumeration over assorted rates, offsets, gaps.
        for (rate_p, rate_q, start_q_num, gamma) in [
            (1i64, 1i64, 0i64, 0i64),
            (1, 1, 0, 3),
            (2, 1, 0, 1),
            (2, 3, 0, 2),
            (3, 2, 1, -2),
            (1, 2, 1, 0),
        ] {
            let p = ts("p", ramp(36), rate_p);
            let q = TimeSeries::with_start(
                "q",
                ramp(30),
                Rat::from_integer(rate_q),
                Rat::new(start_q_num, 2),
            )
            .unwrap();
            let ds = Dataset::new(vec![p, q]).unwrap();
            let (lambda_pq, lambda_qp) = (2usize, 2usize);
            let mut expected = 0;
            for i in 1..=(36 - lambda_pq) {
                for j in 1..=(30 - lambda_qp) {
                    let tp = ds.start_tick(0) + i as i64 * ds.period_ticks(0);
                    let tq = ds.start_tick(1) + j as i64 * ds.period_ticks(1);
                    if tq - tp == gamma {
                        expected += 1;
                    }
                }
            }
            let got = match build_joint_samples(&ds, 0, 1, lambda_pq, lambda_qp, gamma, &[], true, 1)
            {
                Ok(js) => js.n_eff,
                Err(Error::Alignment { .. }) => 0,
                Err(e) => panic!("unexpected error {e}"),
            };
            assert_eq!(got, expected, "rates ({rate_p},{rate_q}) start {start_q_num}/2 gap {gamma}");
        }
    }
}
