//! PCTMI discovery: constraint-based skeleton pruning over the pair measure,
//! then orientation by entropy-reduction rules and the PC rules.
//!
//! The driver is written against the [`CiTester`] trait so the search logic
//! can be exercised with ground-truth independence answers as well as the
//! statistical tester. All decisions are made in a name-sorted node space,
//! which keeps results independent of the order series appear in the input.

use crate::ctmi::{cond_ctmi, cond_ctmi_test, ctmi, ctmi_test, CondCtmiResult, CtmiResult, SearchBounds};
use crate::error::{Error, Result};
use crate::estimator::{permutation_test, KnnParams, PermutationParams};
use crate::graph::{EdgeInfo, OrientOutcome, SepsetTable, SummaryGraph};
use crate::series::{build_joint_samples, Conditioner, Dataset};
use std::collections::{BTreeMap, BTreeSet};

/// Knobs of the discovery pipeline.
#[derive(Clone, Copy, Debug)]
pub struct DiscoveryConfig {
    /// Largest window size searched per series.
    pub lambda_max: usize,
    /// Largest gap searched, in dataset ticks.
    pub gamma_max: i64,
    /// Significance level of the permutation tests.
    pub alpha: f64,
    /// Neighbor count of the kNN estimator.
    pub k: usize,
    /// Half-width of the estimator's tie-breaking jitter.
    pub jitter_scale: f64,
    /// Replicates per permutation test.
    pub n_permutations: usize,
    /// Neighborhood size of the conditional permutation scheme.
    pub local_neighbors: usize,
    /// Smallest usable number of joint samples.
    pub min_samples: usize,
    /// Seed for jitter and permutation draws.
    pub seed: u64,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            lambda_max: 5,
            gamma_max: 5,
            alpha: 0.05,
            k: 10,
            jitter_scale: 1e-10,
            n_permutations: 100,
            local_neighbors: 5,
            min_samples: 50,
            seed: 0,
        }
    }
}

impl DiscoveryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_max == 0 {
            return Err(Error::InvalidConfig("lambda_max must be at least 1".into()));
        }
        if self.gamma_max < 1 {
            return Err(Error::InvalidConfig("gamma_max must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig("alpha must lie in (0, 1)".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.jitter_scale >= 0.0 && self.jitter_scale.is_finite()) {
            return Err(Error::InvalidConfig("jitter_scale must be finite and non-negative".into()));
        }
        if self.n_permutations == 0 {
            return Err(Error::InvalidConfig("n_permutations must be at least 1".into()));
        }
        if self.local_neighbors == 0 {
            return Err(Error::InvalidConfig("local_neighbors must be at least 1".into()));
        }
        if self.min_samples <= self.k {
            return Err(Error::InvalidConfig("min_samples must exceed k".into()));
        }
        Ok(())
    }

    pub fn knn(&self) -> KnnParams {
        KnnParams { k: self.k, jitter_scale: self.jitter_scale, seed: self.seed }
    }

    pub fn perm(&self) -> PermutationParams {
        PermutationParams {
            n_permutations: self.n_permutations,
            local_neighbors: self.local_neighbors,
            alpha: self.alpha,
        }
    }

    pub fn bounds(&self) -> SearchBounds {
        SearchBounds {
            lambda_max: self.lambda_max,
            gamma_max: self.gamma_max,
            min_samples: self.min_samples,
        }
    }
}

/// Counts significance tests and checks them against the polynomial
/// complexity bound d^2 (d-1)^(kappa-1) / (kappa-1)!.
#[derive(Clone, Copy, Debug, Default)]
pub struct TestBudgetCounter {
    /// Distinct significance tests performed (skeleton and collider probes).
    pub ci_tests_performed: usize,
    /// max(1, deepest tested skeleton level + 1, final maximum degree).
    pub kappa: usize,
    pub bound: f64,
    deepest_level: Option<usize>,
}

impl TestBudgetCounter {
    fn record_level_test(&mut self, level: usize) {
        self.ci_tests_performed += 1;
        self.deepest_level = Some(self.deepest_level.map_or(level, |d| d.max(level)));
    }

    fn record_orientation_test(&mut self) {
        self.ci_tests_performed += 1;
    }

    fn finalize(&mut self, d: usize, max_degree: usize) {
        let from_level = self.deepest_level.map_or(1, |l| l + 1);
        self.kappa = from_level.max(max_degree).max(1);
        let km1 = self.kappa - 1;
        let factorial: f64 = (1..=km1).map(|i| i as f64).product();
        self.bound = (d * d) as f64 * ((d - 1) as f64).powi(km1 as i32) / factorial;
    }
}

/// Level-0 pair statistics keyed by name-sorted node index pair (i < j); the
/// stored result is expressed relative to (i, j).
pub type PairStats = BTreeMap<(usize, usize), CtmiResult>;

/// Conditional-independence interface of the driver. Node arguments are
/// dataset indices; the driver always passes pairs in name order.
pub trait CiTester {
    /// Pair statistic: maximizing configuration and value.
    fn pair_stat(&self, ds: &Dataset, a: usize, b: usize) -> Result<CtmiResult>;
    /// Significance of the pair at its found configuration.
    /// Returns (p_value, independent).
    fn pair_decision(&self, ds: &Dataset, a: usize, b: usize, at: &CtmiResult) -> Result<(f64, bool)>;
    /// Conditional statistic with the pair frozen at `base`.
    fn cond_stat(
        &self,
        ds: &Dataset,
        a: usize,
        b: usize,
        base: &CtmiResult,
        conds: &[usize],
    ) -> Result<CondCtmiResult>;
    /// Significance of the conditional statistic at its found configuration.
    /// Returns (p_value, independent).
    fn cond_decision(
        &self,
        ds: &Dataset,
        a: usize,
        b: usize,
        base: &CtmiResult,
        conds: &[usize],
        at: &CondCtmiResult,
    ) -> Result<(f64, bool)>;
    /// Instantaneous dependence of a and b given mid plus the recorded
    /// separating set. Returns (p_value, dependent).
    fn collider_stat(
        &self,
        ds: &Dataset,
        a: usize,
        b: usize,
        mid: usize,
        sep: &[usize],
    ) -> Result<(f64, bool)>;
}

/// The statistical tester: CTMI searches plus permutation tests.
pub struct StatTester {
    cfg: DiscoveryConfig,
}

impl StatTester {
    pub fn new(cfg: &DiscoveryConfig) -> Self {
        StatTester { cfg: *cfg }
    }
}

impl CiTester for StatTester {
    fn pair_stat(&self, ds: &Dataset, a: usize, b: usize) -> Result<CtmiResult> {
        ctmi(ds, a, b, &self.cfg.bounds(), &self.cfg.knn(), None)
    }

    fn pair_decision(&self, ds: &Dataset, a: usize, b: usize, at: &CtmiResult) -> Result<(f64, bool)> {
        let (_, p) = ctmi_test(ds, a, b, at, &self.cfg.knn(), &self.cfg.perm())?;
        Ok((p, p > self.cfg.alpha))
    }

    fn cond_stat(
        &self,
        ds: &Dataset,
        a: usize,
        b: usize,
        base: &CtmiResult,
        conds: &[usize],
    ) -> Result<CondCtmiResult> {
        cond_ctmi(ds, a, b, base, conds, &self.cfg.bounds(), &self.cfg.knn(), None)
    }

    fn cond_decision(
        &self,
        ds: &Dataset,
        a: usize,
        b: usize,
        base: &CtmiResult,
        conds: &[usize],
        at: &CondCtmiResult,
    ) -> Result<(f64, bool)> {
        let (_, p) = cond_ctmi_test(ds, a, b, base, conds, at, &self.cfg.knn(), &self.cfg.perm())?;
        Ok((p, p > self.cfg.alpha))
    }

    fn collider_stat(
        &self,
        ds: &Dataset,
        a: usize,
        b: usize,
        mid: usize,
        sep: &[usize],
    ) -> Result<(f64, bool)> {
        // Instantaneous probe: single-value windows of a and b at the same
        // time point, conditioned on mid and the separating set at that time.
        let mut conds: Vec<usize> = sep.to_vec();
        conds.push(mid);
        conds.sort_by(|&x, &y| ds.name(x).cmp(ds.name(y)));
        let cond_specs: Vec<Conditioner> = conds.into_iter().map(|r| (r, 1, 0)).collect();
        let (a, b) = if ds.name(a) <= ds.name(b) { (a, b) } else { (b, a) };
        let js = build_joint_samples(ds, a, b, 1, 1, 0, &cond_specs, false, self.cfg.min_samples)?;
        let (_, p) = permutation_test(&js.x, &js.y, js.z.as_deref(), &self.cfg.knn(), &self.cfg.perm())?;
        Ok((p, p <= self.cfg.alpha))
    }
}

/// Ground-truth tester: answers every query by d-separation on a known
/// directed summary graph, with synthetic gap statistics derived from the
/// generating lag. Self loops are ignored; queries are about cross edges.
pub struct OracleTester {
    names: Vec<String>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    gamma: Vec<Vec<i64>>,
}

impl OracleTester {
    /// `truth` must be fully directed. `lag` is the delay carried by every
    /// cross edge and drives the synthetic optimal-gap matrix.
    pub fn new(truth: &SummaryGraph, lag: i64) -> Result<Self> {
        if !truth.undirected_edges().is_empty() {
            return Err(Error::InvalidConfig("oracle truth must be fully directed".into()));
        }
        if lag < 0 {
            return Err(Error::InvalidConfig("oracle lag must be non-negative".into()));
        }
        let n = truth.n_nodes();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for (src, dst) in truth.directed_edges() {
            parents[dst].push(src);
            children[src].push(dst);
        }
        // Min-lag distances over directed paths.
        let mut dist = vec![vec![i64::MAX; n]; n];
        for (v, row) in dist.iter_mut().enumerate() {
            row[v] = 0;
        }
        for (src, dst) in truth.directed_edges() {
            dist[src][dst] = dist[src][dst].min(lag);
        }
        for k in 0..n {
            for i in 0..n {
                if dist[i][k] == i64::MAX {
                    continue;
                }
                for j in 0..n {
                    if dist[k][j] == i64::MAX {
                        continue;
                    }
                    dist[i][j] = dist[i][j].min(dist[i][k] + dist[k][j]);
                }
            }
        }
        let mut gamma = vec![vec![0i64; n]; n];
        for p in 0..n {
            for q in 0..n {
                gamma[p][q] = if p == q {
                    0
                } else if dist[p][q] < i64::MAX {
                    dist[p][q]
                } else if dist[q][p] < i64::MAX {
                    -dist[q][p]
                } else {
                    // Dependence through common ancestors peaks at the lag
                    // difference of the shortest incoming paths.
                    (0..n)
                        .filter(|&a| dist[a][p] < i64::MAX && dist[a][q] < i64::MAX)
                        .map(|a| dist[a][q] - dist[a][p])
                        .min()
                        .unwrap_or(0)
                };
            }
        }
        Ok(OracleTester { names: truth.nodes().to_vec(), parents, children, gamma })
    }

    fn oindex(&self, ds: &Dataset, i: usize) -> Result<usize> {
        self.names
            .binary_search_by(|n| n.as_str().cmp(ds.name(i)))
            .map_err(|_| Error::NodeSetMismatch(format!("series {} is not a truth node", ds.name(i))))
    }

    fn d_separated(&self, x: usize, y: usize, z: &BTreeSet<usize>) -> bool {
        // Ancestors of the conditioning set open colliders.
        let mut anc = z.clone();
        let mut stack: Vec<usize> = z.iter().copied().collect();
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v] {
                if anc.insert(p) {
                    stack.push(p);
                }
            }
        }
        // Reachability over (node, arrived-against-arrow) states.
        let n = self.names.len();
        let mut seen = vec![[false; 2]; n];
        let mut stack = vec![(x, true)];
        while let Some((v, up)) = stack.pop() {
            if v == y {
                return false;
            }
            if seen[v][usize::from(up)] {
                continue;
            }
            seen[v][usize::from(up)] = true;
            if up {
                if !z.contains(&v) {
                    for &p in &self.parents[v] {
                        stack.push((p, true));
                    }
                    for &c in &self.children[v] {
                        stack.push((c, false));
                    }
                }
            } else {
                if !z.contains(&v) {
                    for &c in &self.children[v] {
                        stack.push((c, false));
                    }
                }
                if anc.contains(&v) {
                    for &p in &self.parents[v] {
                        stack.push((p, true));
                    }
                }
            }
        }
        true
    }

    fn query(&self, ds: &Dataset, a: usize, b: usize, conds: &[usize]) -> Result<bool> {
        let x = self.oindex(ds, a)?;
        let y = self.oindex(ds, b)?;
        let z: BTreeSet<usize> = conds.iter().map(|&c| self.oindex(ds, c)).collect::<Result<_>>()?;
        Ok(self.d_separated(x, y, &z))
    }
}

impl CiTester for OracleTester {
    fn pair_stat(&self, ds: &Dataset, a: usize, b: usize) -> Result<CtmiResult> {
        let x = self.oindex(ds, a)?;
        let y = self.oindex(ds, b)?;
        let independent = self.d_separated(x, y, &BTreeSet::new());
        Ok(CtmiResult {
            value: if independent { 0.0 } else { 1.0 },
            lambda_pq: 1,
            lambda_qp: 1,
            gamma_pq: self.gamma[x][y],
            p_value: None,
            n_eff: 0,
        })
    }

    fn pair_decision(&self, ds: &Dataset, a: usize, b: usize, _at: &CtmiResult) -> Result<(f64, bool)> {
        let independent = self.query(ds, a, b, &[])?;
        Ok((if independent { 1.0 } else { 0.0 }, independent))
    }

    fn cond_stat(
        &self,
        ds: &Dataset,
        a: usize,
        b: usize,
        _base: &CtmiResult,
        conds: &[usize],
    ) -> Result<CondCtmiResult> {
        let independent = self.query(ds, a, b, conds)?;
        Ok(CondCtmiResult {
            value: if independent { 0.0 } else { 1.0 },
            cond_gaps: vec![1; conds.len()],
            cond_windows: vec![1; conds.len()],
            p_value: None,
            n_eff: 0,
        })
    }

    fn cond_decision(
        &self,
        ds: &Dataset,
        a: usize,
        b: usize,
        _base: &CtmiResult,
        conds: &[usize],
        _at: &CondCtmiResult,
    ) -> Result<(f64, bool)> {
        let independent = self.query(ds, a, b, conds)?;
        Ok((if independent { 1.0 } else { 0.0 }, independent))
    }

    fn collider_stat(
        &self,
        ds: &Dataset,
        a: usize,
        b: usize,
        mid: usize,
        sep: &[usize],
    ) -> Result<(f64, bool)> {
        let mut conds = sep.to_vec();
        conds.push(mid);
        let independent = self.query(ds, a, b, &conds)?;
        Ok((if independent { 1.0 } else { 0.0 }, !independent))
    }
}

/// Full discovery output.
#[derive(Debug)]
pub struct DiscoveryOutput {
    pub graph: SummaryGraph,
    pub sepsets: SepsetTable,
    pub counter: TestBudgetCounter,
    pub warnings: Vec<String>,
}

/// Runs the full pipeline with the statistical tester.
pub fn discover(ds: &Dataset, cfg: &DiscoveryConfig) -> Result<DiscoveryOutput> {
    discover_with(ds, cfg, &StatTester::new(cfg))
}

/// Runs the full pipeline with a caller-supplied tester.
pub fn discover_with(ds: &Dataset, cfg: &DiscoveryConfig, tester: &dyn CiTester) -> Result<DiscoveryOutput> {
    cfg.validate()?;
    if ds.n_series() < 2 {
        return Err(Error::InvalidDataset("discovery needs at least two series".into()));
    }
    let mut counter = TestBudgetCounter::default();
    let mut warnings = Vec::new();
    let (mut graph, sepsets, stats) = skeleton_with(ds, tester, &mut counter, &mut warnings)?;
    for (i, j) in graph.edge_pairs() {
        if let Some(res) = stats.get(&(i, j)) {
            graph.set_edge_info(
                i,
                j,
                EdgeInfo {
                    gamma: res.gamma_pq,
                    lambda_src: res.lambda_pq,
                    lambda_dst: res.lambda_qp,
                    ctmi: res.value,
                    p_value: res.p_value,
                },
            );
        }
    }
    apply_er_rules(&mut graph, &stats);
    pc_rules_with(&mut graph, &sepsets, ds, tester, &mut counter, &mut warnings)?;
    counter.finalize(ds.n_series(), graph.max_degree());
    assert!(
        counter.ci_tests_performed as f64 <= counter.bound,
        "performed {} independence tests, above the bound {}",
        counter.ci_tests_performed,
        counter.bound
    );
    Ok(DiscoveryOutput { graph, sepsets, counter, warnings })
}

/// Skeleton discovery alone, with the statistical tester.
pub fn build_skeleton(ds: &Dataset, cfg: &DiscoveryConfig) -> Result<(SummaryGraph, SepsetTable)> {
    cfg.validate()?;
    if ds.n_series() < 2 {
        return Err(Error::InvalidDataset("discovery needs at least two series".into()));
    }
    let tester = StatTester::new(cfg);
    let mut counter = TestBudgetCounter::default();
    let mut warnings = Vec::new();
    let (graph, sepsets, _) = skeleton_with(ds, &tester, &mut counter, &mut warnings)?;
    Ok((graph, sepsets))
}

struct DTuple {
    q: usize,
    p: usize,
    r: Vec<usize>,
    y: f64,
}

fn skeleton_with(
    ds: &Dataset,
    tester: &dyn CiTester,
    counter: &mut TestBudgetCounter,
    warnings: &mut Vec<String>,
) -> Result<(SummaryGraph, SepsetTable, PairStats)> {
    let mut graph = SummaryGraph::complete(ds.names())?;
    let to_ds: Vec<usize> = graph
        .nodes()
        .iter()
        .map(|n| ds.index_of(n).expect("graph nodes come from the dataset"))
        .collect();
    let mut sepsets = SepsetTable::new();

    // Pair statistics for every pair up front (PC-stable style). Pairs that
    // admit no testable configuration are disconnected with a warning and
    // get no separating set.
    let mut stats: PairStats = BTreeMap::new();
    for i in 0..graph.n_nodes() {
        for j in i + 1..graph.n_nodes() {
            match tester.pair_stat(ds, to_ds[i], to_ds[j]) {
                Ok(res) => {
                    stats.insert((i, j), res);
                }
                Err(e) if is_untestable(&e) => {
                    graph.remove_edge(i, j);
                    warnings.push(format!(
                        "pair {} - {} is untestable ({e}); edge removed without a separating set",
                        graph.name(i),
                        graph.name(j)
                    ));
                }
                Err(e) => return Err(e),
            }
        }
    }

    // Cached conditional statistics and decisions, keyed by unordered pair
    // and sorted conditioning set. A None statistic marks an untestable
    // combination.
    let mut cond_stats: BTreeMap<((usize, usize), Vec<usize>), Option<CondCtmiResult>> = BTreeMap::new();
    let mut decisions: BTreeMap<((usize, usize), Vec<usize>), (f64, bool)> = BTreeMap::new();

    let mut level = 0usize;
    loop {
        let n_nodes = graph.n_nodes();
        if !(0..n_nodes).any(|q| graph.degree(q) > level) {
            break;
        }
        // Build the level's candidate list from the frozen adjacency.
        let mut d_list: Vec<DTuple> = Vec::new();
        for q in 0..n_nodes {
            let adj = graph.neighbors(q);
            if adj.len() < level + 1 {
                continue;
            }
            for &p in &adj {
                let pair = (p.min(q), p.max(q));
                let others: Vec<usize> = adj.iter().copied().filter(|&r| r != p).collect();
                for r_set in combinations(&others, level) {
                    if level == 0 {
                        d_list.push(DTuple { q, p, r: r_set, y: stats[&pair].value });
                        continue;
                    }
                    if !admissible(&stats, p, q, &r_set) {
                        continue;
                    }
                    let key = (pair, r_set.clone());
                    let entry = match cond_stats.get(&key) {
                        Some(cached) => cached.clone(),
                        None => {
                            let conds_ds: Vec<usize> = r_set.iter().map(|&r| to_ds[r]).collect();
                            let computed = match tester.cond_stat(
                                ds,
                                to_ds[pair.0],
                                to_ds[pair.1],
                                &stats[&pair],
                                &conds_ds,
                            ) {
                                Ok(res) => Some(res),
                                Err(e) if is_untestable(&e) => {
                                    warnings.push(format!(
                                        "pair {} - {} given {{{}}} is untestable ({e})",
                                        graph.name(pair.0),
                                        graph.name(pair.1),
                                        r_set.iter().map(|&r| graph.name(r)).collect::<Vec<_>>().join(", ")
                                    ));
                                    None
                                }
                                Err(e) => return Err(e),
                            };
                            cond_stats.insert(key, computed.clone());
                            computed
                        }
                    };
                    if let Some(res) = entry {
                        d_list.push(DTuple { q, p, r: r_set, y: res.value });
                    }
                }
            }
        }
        // Most independence-like candidates are tested first.
        d_list.sort_by(|a, b| {
            a.y.total_cmp(&b.y)
                .then(a.q.cmp(&b.q))
                .then(a.p.cmp(&b.p))
                .then(a.r.cmp(&b.r))
        });
        for t in d_list {
            if !graph.is_adjacent(t.p, t.q) || !t.r.iter().all(|&r| graph.is_adjacent(r, t.q)) {
                continue;
            }
            let pair = (t.p.min(t.q), t.p.max(t.q));
            let key = (pair, t.r.clone());
            let (p_value, independent) = match decisions.get(&key) {
                Some(&d) => d,
                None => {
                    let conds_ds: Vec<usize> = t.r.iter().map(|&r| to_ds[r]).collect();
                    let decision = if level == 0 {
                        tester.pair_decision(ds, to_ds[pair.0], to_ds[pair.1], &stats[&pair])?
                    } else {
                        let at = cond_stats[&key].clone().expect("tuples only exist for testable stats");
                        tester.cond_decision(
                            ds,
                            to_ds[pair.0],
                            to_ds[pair.1],
                            &stats[&pair],
                            &conds_ds,
                            &at,
                        )?
                    };
                    counter.record_level_test(level);
                    decisions.insert(key, decision);
                    decision
                }
            };
            if level == 0 {
                if let Some(res) = stats.get_mut(&pair) {
                    res.p_value = Some(p_value);
                }
            }
            if independent {
                graph.remove_edge(t.p, t.q);
                let sep: Vec<String> = t.r.iter().map(|&r| graph.name(r).to_string()).collect();
                sepsets.insert(graph.name(t.p), graph.name(t.q), sep);
            }
        }
        level += 1;
    }
    Ok((graph, sepsets, stats))
}

/// A conditioning set is admissible for the (p, q) decision when each of its
/// members could precede p or precede q, judged by the sign of the optimal
/// pair gaps. Unknown gaps (untestable pairs) do not veto.
fn admissible(stats: &PairStats, p: usize, q: usize, r_set: &[usize]) -> bool {
    r_set.iter().all(|&r| {
        let grp = gamma_rel(stats, r, p);
        let grq = gamma_rel(stats, r, q);
        match (grp, grq) {
            (Some(a), Some(b)) => a >= 0 || b >= 0,
            (Some(a), None) => a >= 0,
            (None, Some(b)) => b >= 0,
            (None, None) => true,
        }
    })
}

/// Optimal pair gap reoriented from `from` to `to`.
fn gamma_rel(stats: &PairStats, from: usize, to: usize) -> Option<i64> {
    let res = stats.get(&(from.min(to), from.max(to)))?;
    Some(if from < to { res.gamma_pq } else { -res.gamma_pq })
}

fn is_untestable(e: &Error) -> bool {
    matches!(
        e,
        Error::NoCompatibleConfig { .. }
            | Error::InsufficientSamples { .. }
            | Error::Alignment { .. }
            | Error::InfeasibleConditioning { .. }
            | Error::InvalidWindow { .. }
    )
}

/// Size-`n` subsets of `items` in lexicographic order.
fn combinations(items: &[usize], n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    if items.len() < n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut stack = vec![(0usize, Vec::<usize>::new())];
    while let Some((start, prefix)) = stack.pop() {
        if prefix.len() == n {
            out.push(prefix);
            continue;
        }
        // Reverse order on the stack keeps the output lexicographic.
        for i in (start..items.len()).rev() {
            let mut next = prefix.clone();
            next.push(items[i]);
            stack.push((i + 1, next));
        }
    }
    out
}

/// Entropy-reduction orientation. A strictly lagged optimal gap orients the
/// edge along the delay; for instantaneous edges a strictly smaller optimal
/// window orients away from the smaller window, provided every common
/// directed parent acts faster than that window.
pub fn apply_er_rules(graph: &mut SummaryGraph, stats: &PairStats) {
    for (i, j) in graph.undirected_edges() {
        let Some(res) = stats.get(&(i, j)) else { continue };
        if res.gamma_pq > 0 {
            graph.orient(i, j);
        } else if res.gamma_pq < 0 {
            graph.orient(j, i);
        }
    }
    loop {
        let mut changed = false;
        for (i, j) in graph.undirected_edges() {
            let Some(res) = stats.get(&(i, j)) else { continue };
            if res.gamma_pq != 0 {
                continue;
            }
            if res.lambda_pq < res.lambda_qp && window_rule_holds(graph, stats, i, j, res.lambda_pq as i64)
            {
                graph.orient(i, j);
                changed = true;
            } else if res.lambda_qp < res.lambda_pq
                && window_rule_holds(graph, stats, j, i, res.lambda_qp as i64)
            {
                graph.orient(j, i);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

fn window_rule_holds(graph: &SummaryGraph, stats: &PairStats, p: usize, q: usize, lambda_pq: i64) -> bool {
    for r in 0..graph.n_nodes() {
        if r == p || r == q || !(graph.is_directed(r, p) && graph.is_directed(r, q)) {
            continue;
        }
        let (Some(grp), Some(grq)) = (gamma_rel(stats, r, p), gamma_rel(stats, r, q)) else {
            return false;
        };
        if !(grp < lambda_pq && grq < lambda_pq) {
            return false;
        }
    }
    true
}

/// PC orientation rules with the statistical tester: collider detection,
/// then propagation to a fixpoint. Returns warnings.
pub fn apply_pc_rules(
    graph: &mut SummaryGraph,
    sepsets: &SepsetTable,
    ds: &Dataset,
    cfg: &DiscoveryConfig,
) -> Result<Vec<String>> {
    let tester = StatTester::new(cfg);
    let mut counter = TestBudgetCounter::default();
    let mut warnings = Vec::new();
    pc_rules_with(graph, sepsets, ds, &tester, &mut counter, &mut warnings)?;
    Ok(warnings)
}

fn pc_rules_with(
    graph: &mut SummaryGraph,
    sepsets: &SepsetTable,
    ds: &Dataset,
    tester: &dyn CiTester,
    counter: &mut TestBudgetCounter,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let to_ds: Vec<usize> = graph
        .nodes()
        .iter()
        .map(|n| ds.index_of(n).expect("graph nodes come from the dataset"))
        .collect();
    let n = graph.n_nodes();

    // Rule 0: an unshielded triple a - r - b whose middle is not in the
    // separating set is a collider when a and b stay dependent given the
    // middle at the same time point.
    for r in 0..n {
        let nb = graph.neighbors(r);
        for (ia, ib) in pairs(nb.len()) {
            let (a, b) = (nb[ia], nb[ib]);
            if graph.is_adjacent(a, b) {
                continue;
            }
            let Some(sep) = sepsets.get(graph.name(a), graph.name(b)) else {
                continue;
            };
            if sep.iter().any(|s| s == graph.name(r)) {
                continue;
            }
            // Nothing to orient when both edges already carry arrows.
            if !graph.is_undirected(a, r) && !graph.is_undirected(b, r) {
                continue;
            }
            let sep_ds: Vec<usize> = sep
                .iter()
                .map(|s| ds.index_of(s).expect("separating sets name dataset series"))
                .collect();
            match tester.collider_stat(ds, to_ds[a], to_ds[b], to_ds[r], &sep_ds) {
                Ok((_, dependent)) => {
                    counter.record_orientation_test();
                    if dependent {
                        try_orient(graph, a, r, "collider rule", warnings);
                        try_orient(graph, b, r, "collider rule", warnings);
                    }
                }
                Err(e) if is_untestable(&e) => {
                    warnings.push(format!(
                        "collider probe {} - {} - {} skipped ({e})",
                        graph.name(a),
                        graph.name(r),
                        graph.name(b)
                    ));
                }
                Err(e) => return Err(e),
            }
        }
    }

    // Rules 1 to 3 propagate orientations without further tests.
    loop {
        let mut changed = false;
        // Rule 1: a -> r - b unshielded with r in sepset(a, b) extends the
        // chain.
        for r in 0..n {
            for b in 0..n {
                if !graph.is_undirected(r, b) {
                    continue;
                }
                for a in 0..n {
                    if a == r
                        || a == b
                        || !graph.is_directed(a, r)
                        || graph.is_adjacent(a, b)
                        || !sepsets.contains(graph.name(a), graph.name(b), graph.name(r))
                    {
                        continue;
                    }
                    changed |= try_orient(graph, r, b, "rule 1", warnings);
                    break;
                }
            }
        }
        // Rule 2: a directed path alongside an undirected edge orients the
        // edge with the path.
        for (i, j) in graph.undirected_edges() {
            if !graph.is_undirected(i, j) {
                continue;
            }
            if graph.directed_path_exists(i, j) {
                changed |= try_orient(graph, i, j, "rule 2", warnings);
            } else if graph.directed_path_exists(j, i) {
                changed |= try_orient(graph, j, i, "rule 2", warnings);
            }
        }
        // Rule 3: a collider a -> r <- b plus an unshielded a - s - b with
        // s - r undirected orients s -> r.
        for r in 0..n {
            for s in 0..n {
                if !graph.is_undirected(s, r) {
                    continue;
                }
                let found = pairs(n).any(|(a, b)| {
                    a != r
                        && a != s
                        && b != r
                        && b != s
                        && graph.is_directed(a, r)
                        && graph.is_directed(b, r)
                        && !graph.is_adjacent(a, b)
                        && graph.is_undirected(a, s)
                        && graph.is_undirected(b, s)
                });
                if found {
                    changed |= try_orient(graph, s, r, "rule 3", warnings);
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(())
}

fn try_orient(graph: &mut SummaryGraph, from: usize, to: usize, rule: &str, warnings: &mut Vec<String>) -> bool {
    match graph.orient(from, to) {
        OrientOutcome::Oriented => true,
        OrientOutcome::Conflict => {
            warnings.push(format!(
                "{rule}: kept {1} -> {0}, skipped conflicting {0} -> {1}",
                graph.name(from),
                graph.name(to)
            ));
            false
        }
        _ => false,
    }
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}
