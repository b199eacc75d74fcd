//! Naive reference implementations and random-instance helpers shared by the
//! integration suites. Everything here works straight from element fields,
//! not from the crate's cached matrices.

#![allow(dead_code)]

use std::collections::BTreeSet;

use degen::arq::{AlgorithmDescriptor, Portfolio};
use degen::generator::{
    generate_instance, generate_portfolio, BetaLaw, GeneratorConfig, LogNormalLaw, PortfolioConfig,
};
use degen::model::{
    DeploymentInstance, Element, ElementId, FunctionId, Layer, MetricConfig, StructuralSignature,
    WeightMode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn gower(a: &StructuralSignature, b: &StructuralSignature) -> f64 {
    let mut total = 0.0;
    let mut count = 0.0;
    for k in 0..a.categorical.len() {
        if a.categorical[k] != b.categorical[k] {
            total += 1.0;
        }
        count += 1.0;
    }
    for k in 0..a.numeric.len() {
        total += (a.numeric[k] - b.numeric[k]).abs();
        count += 1.0;
    }
    total / count
}

pub fn weight(e: &Element, mode: WeightMode, c: &MetricConfig) -> f64 {
    let a = e.availability;
    let r = (-c.mission_time / e.mtbf).exp();
    let a_ok = if a >= c.a_min { 1.0 } else { 0.0 };
    let r_ok = if r >= c.r_min { 1.0 } else { 0.0 };
    match mode {
        WeightMode::None => 1.0,
        WeightMode::Availability => a * a_ok,
        WeightMode::Reliability => r * r_ok,
        WeightMode::Joint => a * r * a_ok * r_ok,
    }
}

fn members<'a>(inst: &'a DeploymentInstance, f: &FunctionId) -> Vec<&'a Element> {
    inst.elements()
        .iter()
        .filter(|e| e.supports.contains(f))
        .collect()
}

/// Ordered-pair share of structurally distinct realizations.
pub fn fss_baseline(inst: &DeploymentInstance, f: &FunctionId, delta: f64) -> f64 {
    let m = members(inst, f);
    let n = m.len();
    if n <= 1 {
        return 0.0;
    }
    let mut hits = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j && gower(&m[i].signature, &m[j].signature) > delta {
                hits += 1.0;
            }
        }
    }
    hits / (n * (n - 1)) as f64
}

/// Ordered-pair weighted substitution score.
pub fn fss_weighted(inst: &DeploymentInstance, f: &FunctionId, c: &MetricConfig) -> f64 {
    let m = members(inst, f);
    let n = m.len();
    if n <= 1 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = gower(&m[i].signature, &m[j].signature);
            if d > c.delta {
                let w_pair =
                    m[i].capacity.min(m[j].capacity) / (1.0 + (m[i].load - m[j].load).abs()) * d;
                sum += w_pair * weight(m[i], c.weight_mode, c) * weight(m[j], c.weight_mode, c);
            }
        }
    }
    sum / (n * (n - 1)) as f64
}

fn kernel(p: &[f64], q: &[f64], sigma: f64) -> f64 {
    let mut sq = 0.0;
    for k in 0..p.len() {
        sq += (p[k] - q[k]) * (p[k] - q[k]);
    }
    (-sq / (2.0 * sigma * sigma)).exp()
}

fn cosine_gap(s: &[f64], t: &[f64]) -> f64 {
    let (mut dot, mut ns, mut nt) = (0.0, 0.0, 0.0);
    for k in 0..s.len() {
        dot += s[k] * t[k];
        ns += s[k] * s[k];
        nt += t[k] * t[k];
    }
    1.0 - dot / (ns.sqrt() * nt.sqrt())
}

pub fn arq_soft(algs: &[AlgorithmDescriptor], sigma: f64) -> f64 {
    let n = algs.len();
    if n <= 1 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += kernel(&algs[i].performance, &algs[j].performance, sigma)
                    * cosine_gap(&algs[i].structure, &algs[j].structure);
            }
        }
    }
    sum / (n * (n - 1)) as f64
}

pub fn arq_hard(algs: &[AlgorithmDescriptor], epsilon: f64, delta: f64, sigma: f64) -> f64 {
    let n = algs.len();
    if n <= 1 {
        return 0.0;
    }
    let mut hits = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j
                && kernel(&algs[i].performance, &algs[j].performance, sigma) >= epsilon
                && cosine_gap(&algs[i].structure, &algs[j].structure) > delta
            {
                hits += 1.0;
            }
        }
    }
    hits / (n * (n - 1)) as f64
}

/// Active flag per element position, found by sweeping layers top-down with
/// explicit row scans.
pub fn propagate(inst: &DeploymentInstance, failed: &BTreeSet<ElementId>) -> Vec<bool> {
    let els = inst.elements();
    let l1: Vec<usize> = (0..els.len())
        .filter(|&i| els[i].layer == Layer::L1)
        .collect();
    let l2: Vec<usize> = (0..els.len())
        .filter(|&i| els[i].layer == Layer::L2)
        .collect();
    let l3: Vec<usize> = (0..els.len())
        .filter(|&i| els[i].layer == Layer::L3)
        .collect();
    let mut active: Vec<bool> = els.iter().map(|e| !failed.contains(&e.id)).collect();
    let topo = inst.topology();
    for (rows, upper, lower) in [(&topo.b12.0, &l1, &l2), (&topo.b23.0, &l2, &l3)] {
        for (r, &g) in lower.iter().enumerate() {
            let row = &rows[r];
            if row.iter().all(|&b| b == 0) {
                continue;
            }
            let any_up = upper
                .iter()
                .enumerate()
                .any(|(c, &u)| row[c] == 1 && active[u]);
            active[g] = active[g] && any_up;
        }
    }
    active
}

/// (baseline, enhanced) multi-layer index.
pub fn mldi(
    inst: &DeploymentInstance,
    failed: &BTreeSet<ElementId>,
    c: &MetricConfig,
) -> (f64, f64) {
    let els = inst.elements();
    let active = propagate(inst, failed);
    let mut tau_sum = 0.0;
    let mut h_sum = 0.0;
    for layer in &Layer::ALL[..c.k] {
        let idx: Vec<usize> = (0..els.len()).filter(|&i| els[i].layer == *layer).collect();
        let mut kept: Vec<usize> = Vec::new();
        for &i in &idx {
            if !active[i] || weight(&els[i], WeightMode::Joint, c) <= 0.0 {
                continue;
            }
            if kept
                .iter()
                .all(|&j| gower(&els[i].signature, &els[j].signature) > c.delta)
            {
                kept.push(i);
            }
        }
        tau_sum += kept.len() as f64 / idx.len() as f64;

        let mut counts = vec![0.0; inst.functions().len()];
        for &i in &idx {
            if active[i] {
                for (fi, f) in inst.functions().iter().enumerate() {
                    if els[i].supports.contains(f) {
                        counts[fi] += 1.0;
                    }
                }
            }
        }
        let total: f64 = counts.iter().sum();
        let mut h = 0.0;
        if total > 0.0 {
            for cnt in &counts {
                if *cnt > 0.0 {
                    let p = cnt / total;
                    h -= p * p.ln();
                }
            }
        }
        let m = inst.functions().len();
        h_sum += if m > 1 { h / (m as f64).ln() } else { 0.0 };
    }
    (tau_sum / c.k as f64, h_sum / c.k as f64)
}

/// Generator settings with wide operational spread so admissibility
/// thresholds actually bite.
pub fn wide_generator(seed: u64, rng: &mut impl Rng) -> GeneratorConfig {
    let layer_sizes = [
        rng.random_range(1..=4),
        rng.random_range(1..=4),
        rng.random_range(1..=4),
    ];
    let n: usize = layer_sizes.iter().sum();
    GeneratorConfig {
        seed,
        layer_sizes,
        function_count: rng.random_range(2..=n.min(4)),
        availability: BetaLaw {
            alpha: 3.0,
            beta: 1.5,
        },
        mtbf: LogNormalLaw {
            mu: 300f64.ln(),
            sigma: 0.9,
        },
        dependency_density: rng.random_range(0.2..=1.0),
        extra_support: rng.random_range(0.0..=0.8),
        ..GeneratorConfig::default()
    }
}

/// Random instance with 3..=12 elements.
pub fn random_instance(seed: u64) -> DeploymentInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_instance(&wide_generator(seed, &mut rng)).expect("generator config is feasible")
}

pub fn random_portfolio(seed: u64) -> Portfolio {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
    let count = rng.random_range(2..=12);
    generate_portfolio(&PortfolioConfig {
        seed,
        count,
        families: rng.random_range(1..=count),
        ..PortfolioConfig::default()
    })
    .expect("portfolio config is valid")
}

/// `n` elements in L1, all realizing F1, with random signatures.
pub fn flat_instance(n: usize, seed: u64) -> DeploymentInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let els = (1..=n as u32)
        .map(|id| Element {
            id: ElementId(id),
            signature: StructuralSignature::new(
                vec![rng.random_range(0..3), rng.random_range(0..4)],
                vec![rng.random(), rng.random()],
            ),
            capacity: rng.random_range(0.1..=1.0),
            load: 0.0,
            availability: rng.random_range(0.4..=1.0),
            mtbf: rng.random_range(100.0..3000.0),
            layer: Layer::L1,
            supports: [FunctionId::new("F1")].into_iter().collect(),
        })
        .collect();
    DeploymentInstance::new(els, vec![FunctionId::new("F1")], Default::default()).unwrap()
}

pub fn random_failures(
    inst: &DeploymentInstance,
    rng: &mut impl Rng,
    p: f64,
) -> BTreeSet<ElementId> {
    inst.elements()
        .iter()
        .filter(|_| rng.random_bool(p))
        .map(|e| e.id)
        .collect()
}
