//! Benchmark data generators.
//!
//! Named summary structures are simulated as nonlinear autoregressive
//! systems: every node keeps a linear self term at lag 1, every cross edge
//! applies a randomly drawn coefficient and nonlinearity to the source at a
//! fixed lag. Coefficients are drawn once per dataset, uniformly from
//! [-1, -0.1] u [0.1, 1].

use crate::error::{Error, Result};
use crate::graph::SummaryGraph;
use crate::math::SeedMix;
use crate::series::{Dataset, Rat, TimeSeries};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// A summary causal structure to simulate: directed cross edges over named
/// nodes, all carrying the same lag, plus implicit self loops.
#[derive(Clone, Debug)]
pub struct StructureSpec {
    pub name: String,
    pub nodes: Vec<String>,
    /// Directed cross edges as (source, target) node indices.
    pub edges: Vec<(usize, usize)>,
    /// Lag carried by every cross edge, in time steps.
    pub gamma: i64,
}

impl StructureSpec {
    /// X1 -> X2 and X1 -> X3.
    pub fn fork(gamma: i64) -> Self {
        Self::named("fork", 3, &[(0, 1), (0, 2)], gamma)
    }

    /// X1 -> X3 <- X2.
    pub fn v_structure(gamma: i64) -> Self {
        Self::named("v_structure", 3, &[(0, 2), (1, 2)], gamma)
    }

    /// X1 -> X2 -> X3 with the direct X1 -> X3 shortcut.
    pub fn mediator(gamma: i64) -> Self {
        Self::named("mediator", 3, &[(0, 1), (0, 2), (1, 2)], gamma)
    }

    /// X1 -> {X2, X3} -> X4.
    pub fn diamond(gamma: i64) -> Self {
        Self::named("diamond", 4, &[(0, 1), (0, 2), (1, 3), (2, 3)], gamma)
    }

    fn named(name: &str, n: usize, edges: &[(usize, usize)], gamma: i64) -> Self {
        StructureSpec {
            name: name.to_string(),
            nodes: (1..=n).map(|i| format!("X{i}")).collect(),
            edges: edges.to_vec(),
            gamma,
        }
    }

    pub fn by_name(name: &str, gamma: i64) -> Result<Self> {
        match name {
            "fork" => Ok(Self::fork(gamma)),
            "v_structure" | "v-structure" => Ok(Self::v_structure(gamma)),
            "mediator" => Ok(Self::mediator(gamma)),
            "diamond" => Ok(Self::diamond(gamma)),
            other => Err(Error::InvalidConfig(format!(
                "unknown structure {other}; expected fork, v_structure, mediator or diamond"
            ))),
        }
    }

    /// A user-defined structure. The cross edges must form a DAG.
    pub fn custom<S: Into<String>>(name: S, nodes: Vec<String>, edges: Vec<(usize, usize)>, gamma: i64) -> Result<Self> {
        let spec = StructureSpec { name: name.into(), nodes, edges, gamma };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidConfig("a structure needs at least one node".into()));
        }
        if self.gamma < 0 {
            return Err(Error::InvalidConfig("the edge lag must be non-negative".into()));
        }
        let n = self.nodes.len();
        for &(s, d) in &self.edges {
            if s >= n || d >= n {
                return Err(Error::InvalidConfig(format!("edge ({s}, {d}) names a missing node")));
            }
            if s == d {
                return Err(Error::InvalidConfig("self loops are implicit; cross edges only".into()));
            }
        }
        self.topo_order()?;
        Ok(())
    }

    /// Kahn topological order of the cross-edge DAG.
    fn topo_order(&self) -> Result<Vec<usize>> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        for &(_, d) in &self.edges {
            indegree[d] += 1;
        }
        let mut ready: Vec<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop() {
            order.push(v);
            for &(s, d) in &self.edges {
                if s == v {
                    indegree[d] -= 1;
                    if indegree[d] == 0 {
                        ready.push(d);
                    }
                }
            }
        }
        if order.len() != n {
            return Err(Error::InvalidConfig("cross edges must form a DAG".into()));
        }
        Ok(order)
    }

    /// The ground-truth summary graph: the cross edges plus a self loop on
    /// every node.
    pub fn truth(&self) -> Result<SummaryGraph> {
        let edges: Vec<(&str, &str)> = self
            .edges
            .iter()
            .map(|&(s, d)| (self.nodes[s].as_str(), self.nodes[d].as_str()))
            .collect();
        SummaryGraph::from_directed_edges(self.nodes.clone(), &edges, true)
    }
}

/// Simulation knobs.
#[derive(Clone, Copy, Debug)]
pub struct GenerativeParams {
    /// Emitted length per series, after burn-in.
    pub t_len: usize,
    pub seed: u64,
    /// Coefficient magnitudes are uniform on [coeff_low, coeff_high], the
    /// sign is a fair coin.
    pub coeff_low: f64,
    pub coeff_high: f64,
    /// Innovations are noise_scale * N(0, noise_sd^2).
    pub noise_scale: f64,
    pub noise_sd: f64,
    pub burn_in: usize,
}

impl Default for GenerativeParams {
    fn default() -> Self {
        GenerativeParams {
            t_len: 1000,
            seed: 0,
            coeff_low: 0.1,
            coeff_high: 1.0,
            noise_scale: 0.1,
            noise_sd: 15.0_f64.sqrt(),
            burn_in: 100,
        }
    }
}

fn draw_coeff(rng: &mut ChaCha8Rng, low: f64, high: f64) -> f64 {
    let magnitude = rng.gen_range(low..=high);
    if rng.gen_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

fn apply_nonlinearity(which: u8, v: f64) -> f64 {
    match which {
        0 => v.abs(),
        1 => v.tanh(),
        2 => v.sin(),
        _ => v.cos(),
    }
}

/// Simulates the structure and returns the dataset (unit rate, start 0)
/// together with its ground-truth summary graph.
///
/// Per node q: X_q,t = a_qq X_q,t-1 + sum over edges p -> q of
/// a_pq f_pq(X_p,t-gamma) + noise_scale * xi, with xi ~ N(0, noise_sd^2),
/// zero initial state, and the first `burn_in` steps discarded. Same-time
/// edges (gamma 0) are resolved in topological order.
pub fn generate(spec: &StructureSpec, params: &GenerativeParams) -> Result<(Dataset, SummaryGraph)> {
    spec.validate()?;
    if params.t_len < 10 {
        return Err(Error::InvalidConfig("t_len must be at least 10".into()));
    }
    if !(params.coeff_low > 0.0 && params.coeff_high >= params.coeff_low) {
        return Err(Error::InvalidConfig("coefficient range must satisfy 0 < low <= high".into()));
    }
    if !(params.noise_scale > 0.0 && params.noise_sd > 0.0) {
        return Err(Error::InvalidConfig("noise scale and sd must be positive".into()));
    }
    let n = spec.nodes.len();
    let seed = SeedMix::new(params.seed).word("datagen").word(&spec.name).finish();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let self_coeffs: Vec<f64> = (0..n).map(|_| draw_coeff(&mut rng, params.coeff_low, params.coeff_high)).collect();
    let cross: Vec<(usize, usize, f64, u8)> = spec
        .edges
        .iter()
        .map(|&(s, d)| {
            let c = draw_coeff(&mut rng, params.coeff_low, params.coeff_high);
            let f = rng.gen_range(0..4u8);
            (s, d, c, f)
        })
        .collect();

    let order = spec.topo_order()?;
    let total = params.burn_in + params.t_len;
    let gamma = spec.gamma as usize;
    let mut values = vec![vec![0.0f64; total]; n];
    for t in 0..total {
        for &node in &order {
            let mut acc = if t >= 1 { self_coeffs[node] * values[node][t - 1] } else { 0.0 };
            for &(s, d, c, f) in &cross {
                if d == node && t >= gamma {
                    acc += c * apply_nonlinearity(f, values[s][t - gamma]);
                }
            }
            let xi: f64 = rng.sample(StandardNormal);
            values[node][t] = acc + params.noise_scale * params.noise_sd * xi;
        }
    }

    let series: Vec<TimeSeries> = spec
        .nodes
        .iter()
        .zip(&values)
        .map(|(name, v)| TimeSeries::new(name, v[params.burn_in..].to_vec(), Rat::from_integer(1)))
        .collect::<Result<_>>()?;
    Ok((Dataset::new(series)?, spec.truth()?))
}

/// Two-series system with mixed lags: Xp is autoregressive, Xq accumulates
/// Xp at lags 1 and 2. The literal system has unit roots; a damping of 0.9
/// on the autoregressive terms keeps it stable.
pub fn generate_example1(t_len: usize, seed: u64) -> Result<Dataset> {
    example1_with_damping(t_len, seed, 0.9)
}

/// Same system with an explicit damping factor; 1.0 gives the literal
/// random-walk form.
pub fn example1_with_damping(t_len: usize, seed: u64, damping: f64) -> Result<Dataset> {
    if t_len < 10 {
        return Err(Error::InvalidConfig("t_len must be at least 10".into()));
    }
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::InvalidConfig("damping must lie in (0, 1]".into()));
    }
    let burn_in = 100;
    let total = burn_in + t_len;
    let mut rng = ChaCha8Rng::seed_from_u64(SeedMix::new(seed).word("example1").finish());
    let mut p = vec![0.0f64; total];
    let mut q = vec![0.0f64; total];
    for t in 0..total {
        let ep: f64 = rng.sample(StandardNormal);
        let eq: f64 = rng.sample(StandardNormal);
        p[t] = if t >= 1 { damping * p[t - 1] } else { 0.0 } + ep;
        let drive = if t >= 2 { p[t - 2] + p[t - 1] } else { 0.0 };
        q[t] = if t >= 1 { damping * q[t - 1] } else { 0.0 } + drive + eq;
    }
    Dataset::new(vec![
        TimeSeries::new("Xp", p[burn_in..].to_vec(), Rat::from_integer(1))?,
        TimeSeries::new("Xq", q[burn_in..].to_vec(), Rat::from_integer(1))?,
    ])
}

/// Keeps every k-th observation of each series, dividing its rate by k.
/// Lengths below 10 after decimation are rejected.
pub fn subsample(ds: &Dataset, keep_every: &[usize]) -> Result<Dataset> {
    if keep_every.len() != ds.n_series() {
        return Err(Error::InvalidConfig(format!(
            "expected {} decimation factors, got {}",
            ds.n_series(),
            keep_every.len()
        )));
    }
    let mut out = Vec::with_capacity(ds.n_series());
    for (i, &k) in keep_every.iter().enumerate() {
        if k == 0 {
            return Err(Error::InvalidConfig("decimation factors must be at least 1".into()));
        }
        let s = ds.series(i);
        let values: Vec<f64> = s.values.iter().step_by(k).copied().collect();
        if values.len() < 10 {
            return Err(Error::DegenerateSeries { name: s.name.clone(), len: values.len() });
        }
        out.push(TimeSeries::with_start(
            s.name.clone(),
            values,
            s.rate / Rat::from_integer(k as i64),
            s.start_time,
        )?);
    }
    Dataset::new(out)
}
