mod common;

use std::collections::BTreeSet;

use degen::arq::{arq_soft, kernel_centrality, AlgorithmDescriptor};
use degen::fss::{fss_baseline, fss_weighted};
use degen::generator::{
    generate_instance, BetaLaw, GeneratorConfig, LogNormalLaw, TruncatedLogNormalLaw,
};
use degen::mldi::{mldi_report, propagate_failures};
use degen::model::{
    structural_dissimilarity, DeploymentInstance, Element, ElementId, FunctionId, Layer,
    LayerTopology, MetricConfig, StructuralSignature,
};
use proptest::prelude::*;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn signature() -> impl Strategy<Value = StructuralSignature> {
    (
        prop::collection::vec(0u32..4, 3),
        prop::collection::vec(0.0f64..=1.0, 2),
    )
        .prop_map(|(c, n)| StructuralSignature::new(c, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dissimilarity_is_a_symmetric_unit_measure(a in signature(), b in signature()) {
        let ab = structural_dissimilarity(&a, &b).unwrap();
        let ba = structural_dissimilarity(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(structural_dissimilarity(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn fss_bound_chain(seed in 0u64..5000) {
        let inst = common::random_instance(seed);
        let cfg = MetricConfig::default();
        for f in inst.functions() {
            let r = fss_weighted(&inst, f, &cfg).unwrap();
            prop_assert!(0.0 <= r.weighted && r.weighted <= r.baseline && r.baseline <= 1.0,
                "{} {} {}", f, r.weighted, r.baseline);
        }
    }

    #[test]
    fn fss_is_permutation_invariant(seed in 0u64..5000) {
        let inst = common::random_instance(seed);
        let mut order: Vec<usize> = (0..inst.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        // same elements, new ids assigned through the permutation; flat
        // topology so relabeling cannot break layer blocks
        let els: Vec<Element> = order.iter().enumerate().map(|(new, &old)| {
            let mut e = inst.elements()[old].clone();
            e.id = ElementId(new as u32 + 1);
            e.layer = Layer::L1;
            e
        }).collect();
        let relabeled = DeploymentInstance::new(els, inst.functions().to_vec(), LayerTopology::default()).unwrap();
        let cfg = MetricConfig::default();
        for f in inst.functions() {
            let a = fss_weighted(&inst, f, &cfg).unwrap();
            let b = fss_weighted(&relabeled, f, &cfg).unwrap();
            prop_assert!((a.baseline - b.baseline).abs() <= 1e-12);
            prop_assert!((a.weighted - b.weighted).abs() <= 1e-12);
        }
    }

    #[test]
    fn baseline_never_rises_with_delta(seed in 0u64..5000, d1 in 0.0f64..1.0, d2 in 0.0f64..1.0) {
        let inst = common::random_instance(seed);
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        for f in inst.functions() {
            prop_assert!(fss_baseline(&inst, f, hi).unwrap() <= fss_baseline(&inst, f, lo).unwrap());
        }
    }

    #[test]
    fn soft_arq_ignores_order_and_structural_scale(seed in 0u64..5000, scale in 0.1f64..10.0) {
        let p = common::random_portfolio(seed);
        let base = arq_soft(&p.algorithms, 0.5).unwrap();
        prop_assert!((0.0..=1.0).contains(&base));
        let mut shuffled = p.algorithms.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!((arq_soft(&shuffled, 0.5).unwrap() - base).abs() <= 1e-12);
        let scaled: Vec<AlgorithmDescriptor> = p.algorithms.iter().map(|a| AlgorithmDescriptor {
            structure: a.structure.iter().map(|s| s * scale).collect(),
            ..a.clone()
        }).collect();
        prop_assert!((arq_soft(&scaled, 0.5).unwrap() - base).abs() <= 1e-12);
    }

    #[test]
    fn propagation_is_monotone(seed in 0u64..5000, extra in 0usize..12) {
        let inst = common::random_instance(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let small = common::random_failures(&inst, &mut rng, 0.25);
        let mut large = small.clone();
        large.insert(inst.elements()[extra % inst.len()].id);
        let a = propagate_failures(&inst, &small).unwrap();
        let b = propagate_failures(&inst, &large).unwrap();
        for e in inst.elements() {
            prop_assert!(!b.is_active(e.id) || a.is_active(e.id), "{} re-activated", e.id);
        }
    }

    #[test]
    fn mldi_indices_stay_in_unit_interval(seed in 0u64..5000) {
        let inst = common::random_instance(seed);
        let cfg = MetricConfig { m: inst.functions().len(), ..MetricConfig::default() };
        let failed = common::random_failures(&inst, &mut ChaCha8Rng::seed_from_u64(seed), 0.3);
        let state = propagate_failures(&inst, &failed).unwrap();
        let r = mldi_report(&inst, &state, &cfg).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.baseline));
        prop_assert!((0.0..=1.0).contains(&r.enhanced));
        for l in &r.per_layer {
            prop_assert!(l.distinct <= l.size);
            prop_assert!((0.0..=1.0).contains(&l.entropy_norm));
        }
    }

    #[test]
    fn generated_elements_are_valid(seed in 0u64..100_000, l1 in 1usize..8, l2 in 1usize..8, l3 in 1usize..8, m in 1usize..4) {
        let cfg = GeneratorConfig {
            seed,
            layer_sizes: [l1, l2, l3],
            function_count: m,
            ..GeneratorConfig::default()
        };
        let inst = generate_instance(&cfg).unwrap();
        prop_assert_eq!(inst.len(), l1 + l2 + l3);
        for e in inst.elements() {
            prop_assert!(e.validate().is_ok());
            prop_assert!(e.capacity > cfg.capacity.lower && e.capacity <= 1.0);
        }
        if inst.len() >= 2 * m {
            for f in inst.functions() {
                prop_assert!(inst.realizations(f).unwrap().len() >= 2);
            }
        }
        let topo = inst.topology();
        prop_assert!(topo.b12.0.iter().all(|row| row.contains(&1)));
        prop_assert!(topo.b23.0.iter().all(|row| row.contains(&1)));
    }

    #[test]
    fn truncated_sampling_stays_in_bounds(seed in 0u64..10_000, lower in 0.01f64..0.3, width in 0.1f64..0.7) {
        let law = TruncatedLogNormalLaw { mu: -1.0, sigma: 0.5, lower, upper: lower + width };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let x = law.sample(&mut rng).unwrap();
            prop_assert!(x > lower && x <= lower + width);
        }
    }
}

#[test]
fn entropy_index_ignores_duplication_but_ratio_does_not() {
    // L1: two distinct elements on F1 and F2; duplicating both keeps the
    // support proportions but halves the distinct ratio
    let el = |id: u32, cat: u32, f: &str| Element {
        id: ElementId(id),
        signature: StructuralSignature::new(vec![cat], vec![]),
        capacity: 1.0,
        load: 0.0,
        availability: 0.99,
        mtbf: 5000.0,
        layer: Layer::L1,
        supports: [FunctionId::new(f)].into_iter().collect(),
    };
    let funcs = vec![FunctionId::new("F1"), FunctionId::new("F2")];
    let cfg = MetricConfig {
        m: 2,
        k: 1,
        ..MetricConfig::default()
    };
    let single = DeploymentInstance::new(
        vec![el(1, 0, "F1"), el(2, 1, "F2")],
        funcs.clone(),
        LayerTopology::default(),
    )
    .unwrap();
    let doubled = DeploymentInstance::new(
        vec![
            el(1, 0, "F1"),
            el(2, 1, "F2"),
            el(3, 0, "F1"),
            el(4, 1, "F2"),
        ],
        funcs,
        LayerTopology::default(),
    )
    .unwrap();
    let none = BTreeSet::new();
    let a = mldi_report(&single, &propagate_failures(&single, &none).unwrap(), &cfg).unwrap();
    let b = mldi_report(
        &doubled,
        &propagate_failures(&doubled, &none).unwrap(),
        &cfg,
    )
    .unwrap();
    assert_eq!(a.enhanced, b.enhanced);
    assert_eq!(a.enhanced, 1.0);
    assert_eq!(a.baseline, 1.0);
    assert_eq!(b.baseline, 0.5);
}

#[test]
fn identical_performance_gives_centrality_n_minus_one() {
    let algs: Vec<AlgorithmDescriptor> = (0..5)
        .map(|i| AlgorithmDescriptor {
            id: format!("A{}", i + 1),
            performance: vec![0.4, 0.6],
            structure: vec![1.0, i as f64],
        })
        .collect();
    assert!(kernel_centrality(&algs, 0.5)
        .unwrap()
        .iter()
        .all(|&c| c == 4.0));
}

/// Sample mean and variance land within three standard errors of the
/// analytic moments.
fn check_moments(draws: &[f64], mean: f64, var: f64, what: &str) {
    let n = draws.len() as f64;
    let m = draws.iter().sum::<f64>() / n;
    let v = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = draws.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let se_mean = (var / n).sqrt();
    let se_var = ((m4 - v * v) / n).sqrt();
    assert!(
        (m - mean).abs() <= 3.0 * se_mean,
        "{what}: mean {m} vs {mean}"
    );
    assert!(
        (v - var).abs() <= 3.0 * se_var,
        "{what}: variance {v} vs {var}"
    );
}

#[test]
fn distribution_moments_match_analytic_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for (alpha, beta) in [(9.0, 1.0), (2.0, 5.0)] {
        let law = BetaLaw { alpha, beta };
        let d = rand_distr::Beta::new(alpha, beta).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|_| d.sample(&mut rng)).collect();
        check_moments(&xs, law.mean(), law.variance(), "beta");
    }
    let law = LogNormalLaw {
        mu: 500f64.ln(),
        sigma: 0.6,
    };
    let d = rand_distr::LogNormal::new(law.mu, law.sigma).unwrap();
    let xs: Vec<f64> = (0..10_000).map(|_| d.sample(&mut rng)).collect();
    check_moments(&xs, law.mean(), law.variance(), "lognormal");

    // the generator's own draws, through the availability law
    let laws = degen::generator::OperationalLaws::default();
    let draws = laws.draw(10_000, &mut rng).unwrap();
    let a: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let t: Vec<f64> = draws.iter().map(|d| d.1).collect();
    check_moments(
        &a,
        laws.availability.mean(),
        laws.availability.variance(),
        "availability",
    );
    check_moments(&t, laws.mtbf.mean(), laws.mtbf.variance(), "mtbf");
}
