//! Small hand-built instances and portfolios used by the golden tests and the
//! `generate --fixture` command.

use crate::arq::{AlgorithmDescriptor, Portfolio};
use crate::generator::{function_catalog, BetaLaw, LogNormalLaw, OperationalLaws};
use crate::harness::{SweepConfig, Target};
use crate::model::{
    DependencyMatrix, DeploymentInstance, Element, ElementId, FunctionId, Layer, LayerTopology,
    MetricConfig, StructuralSignature,
};

pub const GOLDEN_SEED: u64 = 20_240_917;

/// Removal fractions and trial count of the reference experiments.
pub const REFERENCE_Q_LIST: [f64; 7] = [0.0, 0.05, 0.10, 0.20, 0.30, 0.40, 0.50];
pub const REFERENCE_TRIALS: usize = 10;

pub const FIXTURE_NAMES: [&str; 6] = [
    "redundancy",
    "collapse",
    "all-clones",
    "layered",
    "propagation",
    "arq-five",
];

struct Spec<'a> {
    id: u32,
    layer: Layer,
    categorical: &'a [u32],
    numeric: &'a [f64],
    capacity: f64,
    load: f64,
    supports: &'a [&'a str],
}

fn element(s: Spec<'_>) -> Element {
    Element {
        id: ElementId(s.id),
        signature: StructuralSignature::new(s.categorical.to_vec(), s.numeric.to_vec()),
        capacity: s.capacity,
        load: s.load,
        availability: 0.97,
        mtbf: 2000.0,
        layer: s.layer,
        supports: s.supports.iter().map(|f| FunctionId::new(*f)).collect(),
    }
}

fn flat(layer: Layer, id: u32, categorical: &[u32], numeric: &[f64], supports: &[&str]) -> Element {
    element(Spec {
        id,
        layer,
        categorical,
        numeric,
        capacity: 0.8,
        load: 0.3,
        supports,
    })
}

/// Seven L1 nodes over F1..F3: F1 runs on four near-clones (e1..e4), F3 on
/// three mutually distinct nodes (e5..e7), F2 on e2, e3 and e5.
pub fn redundancy_fixture() -> DeploymentInstance {
    let els = vec![
        flat(Layer::L1, 1, &[0, 0, 0], &[0.10], &["F1"]),
        flat(Layer::L1, 2, &[0, 0, 0], &[0.12], &["F1", "F2"]),
        flat(Layer::L1, 3, &[0, 0, 0], &[0.14], &["F1", "F2"]),
        flat(Layer::L1, 4, &[0, 0, 0], &[0.16], &["F1"]),
        flat(Layer::L1, 5, &[1, 1, 1], &[0.90], &["F2", "F3"]),
        flat(Layer::L1, 6, &[2, 2, 2], &[0.50], &["F3"]),
        flat(Layer::L1, 7, &[3, 3, 3], &[0.20], &["F3"]),
    ];
    DeploymentInstance::new(els, function_catalog(3), LayerTopology::default())
        .expect("redundancy fixture is valid")
}

/// Seven nodes that all realize F1: three mutually distinct low-capacity
/// nodes (e1..e3, capacity 0.05) and four near-clones (e4..e7). Targeted
/// removal strips the distinct nodes first, so the baseline score falls to
/// zero once all three are gone, while every weighted pair is capped by the
/// 0.05 capacity.
pub fn collapse_fixture() -> DeploymentInstance {
    let small = |id, c: &'static [u32], supports: &'static [&'static str]| {
        element(Spec {
            id,
            layer: Layer::L1,
            categorical: c,
            numeric: &[1.0],
            capacity: 0.05,
            load: 0.02,
            supports,
        })
    };
    let clone = |id, x: f64, supports: &'static [&'static str]| {
        element(Spec {
            id,
            layer: Layer::L1,
            categorical: &[0, 0, 0],
            numeric: &[x],
            capacity: 1.0,
            load: 0.35,
            supports,
        })
    };
    let els = vec![
        small(1, &[1, 1, 1], &["F1", "F2"]),
        small(2, &[2, 2, 2], &["F1", "F3"]),
        small(3, &[3, 3, 3], &["F1", "F2", "F3"]),
        clone(4, 0.00, &["F1", "F2"]),
        clone(5, 0.02, &["F1", "F3"]),
        clone(6, 0.04, &["F1", "F2"]),
        clone(7, 0.06, &["F1", "F3"]),
    ];
    DeploymentInstance::new(els, function_catalog(3), LayerTopology::default())
        .expect("collapse fixture is valid")
}

/// Operational laws used when sweeping the golden fixtures: availability
/// beta(19, 1), MTBF log-normal(ln 2000, 0.2). Trials still vary, but no node
/// falls below the admissibility thresholds in practice.
pub fn golden_operational_laws() -> OperationalLaws {
    OperationalLaws {
        availability: BetaLaw {
            alpha: 19.0,
            beta: 1.0,
        },
        mtbf: LogNormalLaw {
            mu: 2000f64.ln(),
            sigma: 0.2,
        },
    }
}

/// Reference FSS sweep over the collapse fixture.
pub fn collapse_sweep() -> SweepConfig {
    SweepConfig {
        q_list: REFERENCE_Q_LIST.to_vec(),
        trials: REFERENCE_TRIALS,
        seed: GOLDEN_SEED,
        target: Target::Fss {
            function: FunctionId::new("F1"),
        },
        laws: golden_operational_laws(),
        ..SweepConfig::default()
    }
}

/// Four identical nodes realizing F1.
pub fn all_clones_fixture() -> DeploymentInstance {
    let els = (1..=4)
        .map(|id| flat(Layer::L1, id, &[0, 0], &[0.5], &["F1"]))
        .collect();
    DeploymentInstance::new(els, vec![FunctionId::new("F1")], LayerTopology::default())
        .expect("all-clones fixture is valid")
}

/// Eighteen elements over F1..F4. L1: ten identical elements supporting F1
/// only; every L2 element depends on all of them. L2: four elements, one per
/// function, forming two lineage pairs. L3: four distinct elements with
/// overlapping multi-function support, each depending on two L2 elements.
pub fn layered_fixture() -> DeploymentInstance {
    let mut els = Vec::new();
    for id in 1..=10 {
        els.push(flat(Layer::L1, id, &[0, 0, 0], &[0.5], &["F1"]));
    }
    els.push(flat(Layer::L2, 11, &[1, 1, 0], &[0.20], &["F1"]));
    els.push(flat(Layer::L2, 12, &[1, 1, 0], &[0.24], &["F2"]));
    els.push(flat(Layer::L2, 13, &[2, 2, 1], &[0.80], &["F3"]));
    els.push(flat(Layer::L2, 14, &[2, 2, 1], &[0.76], &["F4"]));
    els.push(flat(Layer::L3, 15, &[1, 0, 0], &[0.0], &["F1", "F3", "F4"]));
    els.push(flat(Layer::L3, 16, &[2, 1, 1], &[0.3], &["F2", "F3", "F4"]));
    els.push(flat(Layer::L3, 17, &[3, 2, 2], &[0.6], &["F3", "F4"]));
    els.push(flat(
        Layer::L3,
        18,
        &[4, 3, 3],
        &[1.0],
        &["F1", "F2", "F3", "F4"],
    ));
    let topology = LayerTopology {
        b12: DependencyMatrix(vec![vec![1; 10]; 4]),
        b23: DependencyMatrix(vec![
            vec![1, 1, 0, 0],
            vec![0, 0, 1, 1],
            vec![1, 0, 1, 0],
            vec![0, 1, 0, 1],
        ]),
    };
    DeploymentInstance::new(els, function_catalog(4), topology).expect("layered fixture is valid")
}

/// Metric settings for the layered fixture: four functions, three layers.
pub fn layered_metric() -> MetricConfig {
    MetricConfig {
        m: 4,
        k: 3,
        ..MetricConfig::default()
    }
}

pub fn layered_sweep() -> SweepConfig {
    SweepConfig {
        q_list: REFERENCE_Q_LIST.to_vec(),
        trials: REFERENCE_TRIALS,
        seed: GOLDEN_SEED,
        target: Target::Mldi,
        ..SweepConfig::default()
    }
}

/// Six elements: p1, p2 in L1 (e1, e2); c1 depends on {p1, p2} and c2 on {p2}
/// (e3, e4); s1 depends on {c1} and s2 on {c1, c2} (e5, e6).
pub fn propagation_fixture() -> DeploymentInstance {
    let els = vec![
        flat(Layer::L1, 1, &[0], &[0.1], &["F1"]),
        flat(Layer::L1, 2, &[1], &[0.3], &["F1"]),
        flat(Layer::L2, 3, &[2], &[0.5], &["F1"]),
        flat(Layer::L2, 4, &[3], &[0.7], &["F1"]),
        flat(Layer::L3, 5, &[4], &[0.9], &["F1"]),
        flat(Layer::L3, 6, &[5], &[1.0], &["F1"]),
    ];
    let topology = LayerTopology {
        b12: DependencyMatrix(vec![vec![1, 1], vec![0, 1]]),
        b23: DependencyMatrix(vec![vec![1, 0], vec![1, 1]]),
    };
    DeploymentInstance::new(els, vec![FunctionId::new("F1")], topology)
        .expect("propagation fixture is valid")
}

fn algorithm(id: &str, performance: &[f64], structure: &[f64]) -> AlgorithmDescriptor {
    AlgorithmDescriptor {
        id: id.to_string(),
        performance: performance.to_vec(),
        structure: structure.to_vec(),
    }
}

/// Five algorithms: two performance-and-structure twin pairs (A1/A2, A3/A4)
/// and one intermediate design (A5). No two share a performance vector.
pub fn arq_five_fixture() -> Portfolio {
    Portfolio::new(
        "arq-five",
        vec![
            algorithm("A1", &[0.80, 0.70], &[1.0, 0.2, 0.0]),
            algorithm("A2", &[0.82, 0.70], &[1.0, 0.25, 0.0]),
            algorithm("A3", &[0.60, 0.90], &[0.2, 1.0, 0.0]),
            algorithm("A4", &[0.60, 0.92], &[0.25, 1.0, 0.0]),
            algorithm("A5", &[0.70, 0.80], &[0.7, 0.7, 0.4]),
        ],
    )
    .expect("arq fixture is valid")
}

/// Settings for the five-algorithm fixture: epsilon 1, delta 0.5, sigma 1.
pub fn arq_five_metric() -> MetricConfig {
    MetricConfig {
        epsilon: 1.0,
        delta: 0.5,
        sigma: 1.0,
        ..MetricConfig::default()
    }
}

/// A named fixture, either an instance or a portfolio.
pub enum Fixture {
    Instance(DeploymentInstance),
    Portfolio(Portfolio),
}

pub fn by_name(name: &str) -> Option<Fixture> {
    Some(match name {
        "redundancy" => Fixture::Instance(redundancy_fixture()),
        "collapse" => Fixture::Instance(collapse_fixture()),
        "all-clones" => Fixture::Instance(all_clones_fixture()),
        "layered" => Fixture::Instance(layered_fixture()),
        "propagation" => Fixture::Instance(propagation_fixture()),
        "arq-five" => Fixture::Portfolio(arq_five_fixture()),
        _ => return None,
    })
}
