//! Release gate: nine statistical and exactness criteria spanning the
//! estimator, the pair measure, the discovery pipeline and the benchmark
//! harness. Every criterion runs regardless of earlier failures, prints one
//! verdict line, and the suite fails at the end if any verdict is FAIL.

use pctmi::ctmi::{ctmi, SearchBounds};
use pctmi::datagen::{
    example1_with_damping, generate, generate_example1, GenerativeParams, StructureSpec,
};
use pctmi::discovery::{discover, discover_with, DiscoveryConfig, OracleTester};
use pctmi::estimator::{knn_cmi, knn_mi, permutation_test, KnnParams, PermutationParams};
use pctmi::eval::{run_benchmark, BenchmarkReport};
use pctmi::knn::{brute, KdTree, PointSet};
use pctmi::series::{Dataset, Rat, TimeSeries};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::time::Instant;

const STRUCTURES: [&str; 4] = ["fork", "v_structure", "mediator", "diamond"];

struct Gate {
    failures: Vec<usize>,
}

impl Gate {
    fn record(&mut self, idx: usize, label: &str, pass: bool, detail: String) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {idx} ({label}): {verdict}; {detail}");
        if !pass {
            self.failures.push(idx);
        }
    }
}

fn gauss_pair(n: usize, rho: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let noise = (1.0 - rho * rho).sqrt();
    let y: Vec<f64> =
        x.iter().map(|&v| rho * v + noise * rng.sample::<f64, _>(StandardNormal)).collect();
    (x, y)
}

fn iid_dataset(names: &[String], len: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Dataset::new(
        names
            .iter()
            .map(|n| {
                let vals: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
                TimeSeries::new(n.as_str(), vals, Rat::from_integer(1)).unwrap()
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn acceptance_criteria() {
    let mut gate = Gate { failures: Vec::new() };
    criterion_1(&mut gate);
    criterion_2(&mut gate);
    criterion_3(&mut gate);
    let (mut reports, v_equal_mean) = criterion_4(&mut gate);
    criterion_5(&mut gate, v_equal_mean, &mut reports);
    criterion_6(&mut gate);
    criterion_7(&mut gate, &reports);
    criterion_8(&mut gate);
    criterion_9(&mut gate);
    assert!(gate.failures.is_empty(), "criteria {:?} missed their tolerances", gate.failures);
}

/// Two coupled series, the second driven by the first at lags 1 and 2, with
/// the measure expected to settle on a single-step window against a
/// two-step window at gap one.
fn criterion_1(gate: &mut Gate) {
    let bounds = SearchBounds::default();
    let knn = KnnParams::default();
    let mut hits = 0usize;
    let mut values = Vec::new();
    let mut slowest = 0f64;
    for seed in 0..10 {
        let ds = generate_example1(10_000, seed).unwrap();
        let started = Instant::now();
        let res = ctmi(&ds, 0, 1, &bounds, &knn, None).unwrap();
        slowest = slowest.max(started.elapsed().as_secs_f64());
        if (res.lambda_pq, res.lambda_qp, res.gamma_pq) == (1, 2, 1) {
            hits += 1;
        }
        values.push(res.value);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    // The undamped random-walk variant must at least be generable.
    let literal = example1_with_damping(10_000, 0, 1.0).unwrap();
    let literal_ok =
        literal.all_series().iter().all(|s| s.values.iter().all(|v| v.is_finite()));
    let pass = hits >= 8 && (0.45..=0.65).contains(&mean) && slowest <= 120.0 && literal_ok;
    gate.record(
        1,
        "two-series example recovery",
        pass,
        format!(
            "argmax (1,2,1) in {hits}/10 seeds (need 8), mean value {mean:.3} \
             (band 0.45..0.65), slowest search {slowest:.0}s (cap 120s), \
             undamped variant generable: {literal_ok}"
        ),
    );
}

/// Estimates on Gaussians with known mutual information, averaged over 20
/// seeds each, plus conditional independence on a Gaussian chain.
fn criterion_2(gate: &mut Gate) {
    let n = 5000;
    let mut parts = Vec::new();
    let mut pass = true;
    for (rho, tol) in [(0.0f64, 0.02), (0.5, 0.02), (0.9, 0.05)] {
        let truth = -0.5 * (1.0 - rho * rho).ln();
        let mut sum = 0.0;
        for seed in 0..20 {
            let (x, y) = gauss_pair(n, rho, 1000 + seed);
            let knn = KnnParams { seed, ..KnnParams::default() };
            sum += knn_mi(&[x], &[y], &knn).unwrap();
        }
        let err = (sum / 20.0 - truth).abs();
        pass &= err <= tol;
        parts.push(format!("rho {rho}: |err| {err:.4} (tol {tol})"));
    }
    // Chain x -> z -> y with both links at correlation 0.8: I(X;Y|Z) = 0.
    let mut sum = 0.0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let z: Vec<f64> =
            x.iter().map(|&v| 0.8 * v + 0.6 * rng.sample::<f64, _>(StandardNormal)).collect();
        let y: Vec<f64> =
            z.iter().map(|&v| 0.8 * v + 0.6 * rng.sample::<f64, _>(StandardNormal)).collect();
        let knn = KnnParams { seed, ..KnnParams::default() };
        sum += knn_cmi(&[x], &[y], &[z], &knn).unwrap();
    }
    let chain = (sum / 20.0).abs();
    pass &= chain <= 0.03;
    parts.push(format!("chain |CMI| {chain:.4} (tol 0.03)"));
    gate.record(2, "Gaussian estimator oracle", pass, parts.join(", "));
}

/// The tree-based neighbor queries must agree with exhaustive search down
/// to the bit, including under heavy value ties.
fn criterion_3(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0usize;
    let mut exact = true;
    'datasets: for _ in 0..50 {
        let n = rng.gen_range(60..=500);
        let dim = rng.gen_range(1..=4);
        // Coarse rounding forces duplicated coordinates, the hard case.
        let cols: Vec<Vec<f64>> = (0..dim)
            .map(|_| {
                (0..n)
                    .map(|_| (rng.sample::<f64, _>(StandardNormal) * 4.0).round() / 4.0)
                    .collect()
            })
            .collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let pts = PointSet::from_columns(&refs).unwrap();
        let tree = KdTree::build(&pts);
        for qi in (0..n).step_by(17) {
            let q = pts.row(qi);
            let k = 1 + qi % 10;
            let d_tree = tree.kth_distance(q, k, Some(qi as u32));
            let d_brute = brute::kth_distance(&pts, q, k, Some(qi as u32));
            let counts_equal =
                tree.count_within(q, d_tree) == brute::count_within(&pts, q, d_tree);
            if d_tree.to_bits() != d_brute.to_bits() || !counts_equal {
                exact = false;
                break 'datasets;
            }
            checked += 1;
        }
    }
    gate.record(
        3,
        "spatial index vs brute force",
        exact,
        format!("{checked} query points bit-identical across 50 datasets"),
    );
}

/// Ten-seed recovery sweep per structure at T=1000 with default settings,
/// scored against the reference means.
fn criterion_4(gate: &mut Gate) -> (Vec<BenchmarkReport>, f64) {
    let centers = [("fork", 0.80), ("v_structure", 0.68), ("mediator", 0.85), ("diamond", 0.83)];
    let started = Instant::now();
    let mut reports = Vec::new();
    let mut parts = Vec::new();
    let mut pass = true;
    let mut v_mean = 0.0;
    for (name, center) in centers {
        let spec = StructureSpec::by_name(name, 1).unwrap();
        let gen = GenerativeParams { t_len: 1000, seed: 0, ..Default::default() };
        let rep = run_benchmark(&spec, &gen, &DiscoveryConfig::default(), 10, None).unwrap();
        let adj_ok = (rep.f1_mean - center).abs() <= 0.15;
        let ori_ok = (rep.f1_oriented_mean - center).abs() <= 0.20;
        pass &= adj_ok && ori_ok;
        if name == "v_structure" {
            v_mean = rep.f1_mean;
        }
        parts.push(format!(
            "{name} F1 {:.3} (center {center} +-0.15) oriented {:.3} (+-0.20)",
            rep.f1_mean, rep.f1_oriented_mean
        ));
        reports.push(rep);
    }
    let hours = started.elapsed().as_secs_f64() / 3600.0;
    pass &= hours <= 2.0;
    parts.push(format!("sweep {hours:.2}h (cap 2h)"));
    gate.record(4, "structure recovery, equal rates", pass, parts.join(", "));
    (reports, v_mean)
}

/// Same sweep with the second series observed at half rate. The v-structure
/// is held only to "no better than its equal-rate mean plus 0.15" since
/// collider detection degrades sharply with missing rows.
fn criterion_5(gate: &mut Gate, v_equal_mean: f64, reports: &mut Vec<BenchmarkReport>) {
    let centers: [(&str, Option<f64>); 4] = [
        ("fork", Some(0.83)),
        ("v_structure", None),
        ("mediator", Some(0.88)),
        ("diamond", Some(0.79)),
    ];
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, center) in centers {
        let spec = StructureSpec::by_name(name, 1).unwrap();
        let n_nodes = spec.truth().unwrap().nodes().len();
        let keep: Vec<usize> = (0..n_nodes).map(|i| if i == 1 { 2 } else { 1 }).collect();
        let gen = GenerativeParams { t_len: 1000, seed: 0, ..Default::default() };
        let rep =
            run_benchmark(&spec, &gen, &DiscoveryConfig::default(), 10, Some(&keep)).unwrap();
        match center {
            Some(c) => {
                pass &= (rep.f1_mean - c).abs() <= 0.20;
                parts.push(format!("{name} F1 {:.3} (center {c} +-0.20)", rep.f1_mean));
            }
            None => {
                pass &= rep.f1_mean <= v_equal_mean + 0.15;
                parts.push(format!(
                    "{name} F1 {:.3} (cap equal-rate {v_equal_mean:.3} + 0.15)",
                    rep.f1_mean
                ));
            }
        }
        reports.push(rep);
    }
    gate.record(5, "structure recovery, mixed rates", pass, parts.join(", "));
}

/// With a d-separation oracle standing in for the statistical test, the
/// pipeline must reproduce each structure exactly: adjacencies from the
/// skeleton stage, directions from the lag-based orientation.
fn criterion_6(gate: &mut Gate) {
    let mut parts = Vec::new();
    let mut pass = true;
    for name in STRUCTURES {
        let spec = StructureSpec::by_name(name, 1).unwrap();
        let truth = spec.truth().unwrap();
        let oracle = OracleTester::new(&truth, 1).unwrap();
        let ds = iid_dataset(truth.nodes(), 150, 77);
        let out = discover_with(&ds, &DiscoveryConfig::default(), &oracle).unwrap();
        let ok = out.graph.edge_pairs() == truth.edge_pairs()
            && out.graph.directed_edges() == truth.directed_edges()
            && out.graph.undirected_edges().is_empty();
        pass &= ok;
        parts.push(format!("{name} {}", if ok { "exact" } else { "mismatch" }));
    }
    gate.record(6, "d-separation oracle pipeline", pass, parts.join(", "));
}

/// Every benchmark run above must stay within the combinatorial cap on the
/// number of independence tests.
fn criterion_7(gate: &mut Gate, reports: &[BenchmarkReport]) {
    let mut runs = 0usize;
    let mut pass = true;
    for rep in reports {
        for s in &rep.per_seed {
            if let (Some(tests), Some(bound)) = (s.ci_tests, s.budget_bound) {
                runs += 1;
                pass &= (tests as f64) <= bound;
            }
        }
    }
    pass &= runs > 0;
    gate.record(7, "independence test budget", pass, format!("{runs} runs within bound"));
}

/// Shuffling the order in which series are handed to discovery must not
/// change the result in any way.
fn criterion_8(gate: &mut Gate) {
    let cfg = DiscoveryConfig {
        lambda_max: 3,
        gamma_max: 3,
        n_permutations: 40,
        min_samples: 40,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut parts = Vec::new();
    let mut pass = true;
    for name in STRUCTURES {
        let spec = StructureSpec::by_name(name, 1).unwrap();
        let gen = GenerativeParams { t_len: 400, seed: 11, ..Default::default() };
        let (ds, _) = generate(&spec, &gen).unwrap();
        let baseline = discover(&ds, &cfg).unwrap().graph.to_json_string();
        let mut stable = true;
        for _ in 0..10 {
            let mut series = ds.all_series().to_vec();
            for i in (1..series.len()).rev() {
                let j = rng.gen_range(0..=i);
                series.swap(i, j);
            }
            let permuted = Dataset::new(series).unwrap();
            let got = discover(&permuted, &cfg).unwrap().graph.to_json_string();
            stable &= got == baseline;
        }
        pass &= stable;
        parts.push(format!("{name} {}", if stable { "stable" } else { "order-dependent" }));
    }
    gate.record(8, "input order independence", pass, parts.join(", "));
}

/// Exact pair-reversal symmetry of the measure, rank-robustness of the
/// estimator under cubing, and null calibration of the permutation test.
fn criterion_9(gate: &mut Gate) {
    let gen = GenerativeParams { t_len: 600, seed: 5, ..Default::default() };
    let (ds, _) = generate(&StructureSpec::fork(1), &gen).unwrap();
    let bounds = SearchBounds { lambda_max: 3, gamma_max: 3, min_samples: 40 };
    let knn = KnnParams::default();
    let fwd = ctmi(&ds, 0, 1, &bounds, &knn, None).unwrap();
    let rev = ctmi(&ds, 1, 0, &bounds, &knn, None).unwrap();
    let symmetric = fwd.value.to_bits() == rev.value.to_bits()
        && fwd.gamma_pq == -rev.gamma_pq
        && fwd.lambda_pq == rev.lambda_qp
        && fwd.lambda_qp == rev.lambda_pq;

    let mut worst = 0f64;
    for seed in 0..5 {
        let (x, y) = gauss_pair(5000, 0.5, 300 + seed);
        let knn_s = KnnParams { seed, ..KnnParams::default() };
        let base = knn_mi(&[x.clone()], &[y.clone()], &knn_s).unwrap();
        let cubed: Vec<f64> = x.iter().map(|v| v.powi(3)).collect();
        let shifted = knn_mi(&[cubed], &[y], &knn_s).unwrap();
        worst = worst.max((base - shifted).abs());
    }
    let robust = worst <= 0.02;

    let perm = PermutationParams::default();
    let mut rejections = 0usize;
    for run in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(40_000 + run);
        let x: Vec<f64> = (0..1000).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = (0..1000).map(|_| rng.sample(StandardNormal)).collect();
        let knn_s = KnnParams { seed: run, ..KnnParams::default() };
        let (_, p) = permutation_test(&[x], &[y], None, &knn_s, &perm).unwrap();
        if p <= 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / 200.0;
    let calibrated = (0.02..=0.08).contains(&rate);

    gate.record(
        9,
        "measure and test properties",
        symmetric && robust && calibrated,
        format!(
            "pair-reversal bit-exact: {symmetric}, worst cubing shift {worst:.4} (tol 0.02), \
             null rejection rate {rate:.3} (band 0.02..0.08)"
        ),
    );
}
