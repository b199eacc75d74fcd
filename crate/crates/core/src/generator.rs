//! Reproducible synthetic deployment instances and algorithm portfolios.
//!
//! Capacities follow a truncated log-normal law and are rescaled by the
//! largest draw; loads are a beta fraction of the element's capacity;
//! availabilities come from a high-availability beta law and MTBFs from a
//! log-normal law. Signatures are uniform over a mixed categorical/numeric
//! schema.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::arq::{AlgorithmDescriptor, Portfolio};
use crate::error::{Error, Result};
use crate::model::{
    DependencyMatrix, DeploymentInstance, Element, ElementId, FunctionId, Layer, LayerTopology,
    StructuralSignature,
};
use crate::rng::stream;

/// Rejection sampling gives up after this many draws for one value.
pub const MAX_REJECTIONS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaLaw {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaLaw {
    fn dist(&self, name: &str) -> Result<Beta<f64>> {
        Beta::new(self.alpha, self.beta)
            .map_err(|e| Error::validation(format!("{name}: invalid beta law: {e}")))
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }
}

/// Log-normal law parameterized by the mean and standard deviation of the
/// underlying normal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogNormalLaw {
    pub mu: f64,
    pub sigma: f64,
}

impl LogNormalLaw {
    fn dist(&self, name: &str) -> Result<LogNormal<f64>> {
        if !(self.sigma > 0.0) {
            return Err(Error::validation(format!("{name}: sigma must be positive")));
        }
        LogNormal::new(self.mu, self.sigma)
            .map_err(|e| Error::validation(format!("{name}: invalid log-normal law: {e}")))
    }

    pub fn mean(&self) -> f64 {
        (self.mu + self.sigma * self.sigma / 2.0).exp()
    }

    pub fn variance(&self) -> f64 {
        let s2 = self.sigma * self.sigma;
        (s2.exp() - 1.0) * (2.0 * self.mu + s2).exp()
    }
}

/// Log-normal restricted to `(lower, upper]` by rejection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncatedLogNormalLaw {
    pub mu: f64,
    pub sigma: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TruncatedLogNormalLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let dist = LogNormalLaw {
            mu: self.mu,
            sigma: self.sigma,
        }
        .dist("capacity")?;
        for _ in 0..MAX_REJECTIONS {
            let x = dist.sample(rng);
            if x > self.lower && x <= self.upper {
                return Ok(x);
            }
        }
        Err(Error::validation(format!(
            "capacity law: no draw landed in ({}, {}] after {MAX_REJECTIONS} attempts",
            self.lower, self.upper
        )))
    }
}

/// Availability and MTBF laws; also drives per-trial resampling in sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperationalLaws {
    pub availability: BetaLaw,
    pub mtbf: LogNormalLaw,
}

impl Default for OperationalLaws {
    fn default() -> Self {
        OperationalLaws {
            availability: BetaLaw {
                alpha: 9.0,
                beta: 1.0,
            },
            mtbf: LogNormalLaw {
                mu: 500f64.ln(),
                sigma: 0.6,
            },
        }
    }
}

impl OperationalLaws {
    /// `(availability, mtbf)` for `n` elements.
    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<(f64, f64)>> {
        let a = self.availability.dist("availability")?;
        let m = self.mtbf.dist("mtbf")?;
        Ok((0..n).map(|_| (a.sample(rng), m.sample(rng))).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignatureSchema {
    /// Cardinality of each categorical feature.
    pub categorical: Vec<u32>,
    pub numeric: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    /// Element counts for L1, L2, L3; the instance holds their sum.
    pub layer_sizes: [usize; 3],
    pub function_count: usize,
    pub capacity: TruncatedLogNormalLaw,
    pub load: BetaLaw,
    pub availability: BetaLaw,
    pub mtbf: LogNormalLaw,
    pub signature: SignatureSchema,
    /// Probability that a given dependency-matrix entry is 1.
    pub dependency_density: f64,
    /// Probability that an element supports each function beyond its
    /// assigned one.
    pub extra_support: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let ops = OperationalLaws::default();
        GeneratorConfig {
            seed: 7,
            layer_sizes: [3, 2, 2],
            function_count: 3,
            capacity: TruncatedLogNormalLaw {
                mu: -1.0,
                sigma: 0.5,
                lower: 0.05,
                upper: 1.0,
            },
            load: BetaLaw {
                alpha: 2.0,
                beta: 5.0,
            },
            availability: ops.availability,
            mtbf: ops.mtbf,
            signature: SignatureSchema {
                categorical: vec![3, 4, 3],
                numeric: 2,
            },
            dependency_density: 0.5,
            extra_support: 0.25,
        }
    }
}

impl GeneratorConfig {
    pub fn element_count(&self) -> usize {
        self.layer_sizes.iter().sum()
    }

    pub fn operational_laws(&self) -> OperationalLaws {
        OperationalLaws {
            availability: self.availability,
            mtbf: self.mtbf,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.layer_sizes.iter().position(|s| *s == 0) {
            return Err(Error::validation(format!(
                "generator.layer_sizes[{i}] must be >= 1"
            )));
        }
        if self.function_count == 0 {
            return Err(Error::validation("generator.function_count must be >= 1"));
        }
        if self.element_count() < self.function_count {
            return Err(Error::validation(format!(
                "generator: {} elements cannot realize {} functions",
                self.element_count(),
                self.function_count
            )));
        }
        let c = &self.capacity;
        if !(c.lower >= 0.0 && c.lower < c.upper && c.upper <= 1.0) {
            return Err(Error::validation(
                "generator.capacity truncation bounds must satisfy 0 <= lower < upper <= 1",
            ));
        }
        LogNormalLaw {
            mu: c.mu,
            sigma: c.sigma,
        }
        .dist("generator.capacity")?;
        self.load.dist("generator.load")?;
        self.availability.dist("generator.availability")?;
        self.mtbf.dist("generator.mtbf")?;
        if self.signature.categorical.is_empty() && self.signature.numeric == 0 {
            return Err(Error::validation("generator.signature has no features"));
        }
        if self.signature.categorical.contains(&0) {
            return Err(Error::validation(
                "generator.signature categorical cardinalities must be >= 1",
            ));
        }
        if !(self.dependency_density > 0.0 && self.dependency_density <= 1.0) {
            return Err(Error::validation(
                "generator.dependency_density must be in (0, 1]",
            ));
        }
        if !(0.0..=1.0).contains(&self.extra_support) {
            return Err(Error::validation(
                "generator.extra_support must be in [0, 1]",
            ));
        }
        Ok(())
    }
}

pub fn function_catalog(m: usize) -> Vec<FunctionId> {
    (1..=m).map(|i| FunctionId::new(format!("F{i}"))).collect()
}

/// Draws one instance. Identical configs give identical instances.
pub fn generate_instance(config: &GeneratorConfig) -> Result<DeploymentInstance> {
    config.validate()?;
    let n = config.element_count();
    let m = config.function_count;
    let seed = config.seed;
    let functions = function_catalog(m);

    let mut rng = stream(seed, "capacity", 0);
    let raw: Vec<f64> = (0..n)
        .map(|_| config.capacity.sample(&mut rng))
        .collect::<Result<_>>()?;
    let cmax = raw.iter().copied().fold(f64::MIN, f64::max);
    let capacity: Vec<f64> = raw.iter().map(|c| c / cmax).collect();

    let load_law = config.load.dist("load")?;
    let mut rng = stream(seed, "load", 0);
    let load: Vec<f64> = capacity
        .iter()
        .map(|c| (load_law.sample(&mut rng) * c).min(*c))
        .collect();

    let mut rng = stream(seed, "operational", 0);
    let ops = config.operational_laws().draw(n, &mut rng)?;

    let mut rng = stream(seed, "signature", 0);
    let signatures: Vec<StructuralSignature> = (0..n)
        .map(|_| {
            let cat = config
                .signature
                .categorical
                .iter()
                .map(|card| rng.random_range(0..*card))
                .collect();
            let num = (0..config.signature.numeric)
                .map(|_| rng.random::<f64>())
                .collect();
            StructuralSignature::new(cat, num)
        })
        .collect();

    let supports = assign_supports(
        n,
        &functions,
        config.extra_support,
        &mut stream(seed, "supports", 0),
    );

    let layers: Vec<Layer> = Layer::ALL
        .iter()
        .zip(config.layer_sizes)
        .flat_map(|(l, size)| std::iter::repeat_n(*l, size))
        .collect();

    let mut rng = stream(seed, "topology", 0);
    let [n1, n2, n3] = config.layer_sizes;
    let topology = LayerTopology {
        b12: dependency_rows(n2, n1, config.dependency_density, &mut rng),
        b23: dependency_rows(n3, n2, config.dependency_density, &mut rng),
    };

    let elements = (0..n)
        .map(|i| Element {
            id: ElementId(i as u32 + 1),
            signature: signatures[i].clone(),
            capacity: capacity[i],
            load: load[i],
            availability: ops[i].0,
            mtbf: ops[i].1,
            layer: layers[i],
            supports: supports[i].clone(),
        })
        .collect();
    DeploymentInstance::new(elements, functions, topology)
}

/// Every element gets one function round-robin over a shuffled order, so each
/// function has at least `floor(n / m)` realizations; extra functions are
/// added independently with probability `extra`.
fn assign_supports<R: Rng + ?Sized>(
    n: usize,
    functions: &[FunctionId],
    extra: f64,
    rng: &mut R,
) -> Vec<BTreeSet<FunctionId>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut supports = vec![BTreeSet::new(); n];
    for (slot, &e) in order.iter().enumerate() {
        supports[e].insert(functions[slot % functions.len()].clone());
    }
    for s in supports.iter_mut() {
        for f in functions {
            if !s.contains(f) && rng.random_bool(extra) {
                s.insert(f.clone());
            }
        }
    }
    supports
}

/// Bernoulli rows with at least one dependency each.
fn dependency_rows<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    p: f64,
    rng: &mut R,
) -> DependencyMatrix {
    let mut m = DependencyMatrix::zeros(rows, cols);
    for row in m.0.iter_mut() {
        for v in row.iter_mut() {
            *v = u8::from(rng.random_bool(p));
        }
        if row.iter().all(|v| *v == 0) {
            row[rng.random_range(0..cols)] = 1;
        }
    }
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PortfolioConfig {
    pub seed: u64,
    pub name: String,
    pub count: usize,
    /// Algorithms are split into this many contiguous implementation
    /// lineages.
    pub families: usize,
    pub performance_dim: usize,
    pub structure_dim: usize,
    /// Per-coordinate value of the common performance centre.
    pub performance_base: f64,
    /// Std-dev of each family centre around the common centre.
    pub center_spread: f64,
    /// Std-dev of each member around its family centre.
    pub member_spread: f64,
    /// Uniform `[0, noise)` added to each structural coordinate.
    pub structure_noise: f64,
}

impl Default for PortfolioConfig {
    fn default() -> Self {
        PortfolioConfig {
            seed: 7,
            name: "portfolio".into(),
            count: 12,
            families: 6,
            performance_dim: 3,
            structure_dim: 6,
            performance_base: 0.5,
            center_spread: 0.3,
            member_spread: 0.02,
            structure_noise: 0.05,
        }
    }
}

impl PortfolioConfig {
    pub fn family_of(&self, i: usize) -> usize {
        i * self.families / self.count
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::validation("portfolio.count must be >= 2"));
        }
        if self.families == 0 || self.families > self.count {
            return Err(Error::validation("portfolio.families must be in 1..=count"));
        }
        if self.performance_dim == 0 || self.structure_dim == 0 {
            return Err(Error::validation(
                "portfolio descriptor dimensions must be >= 1",
            ));
        }
        for (k, v) in [
            ("center_spread", self.center_spread),
            ("member_spread", self.member_spread),
            ("structure_noise", self.structure_noise),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::validation(format!(
                    "portfolio.{k} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }
}

/// Algorithms `A1..An`. Members of one family share a performance centre and
/// a dominant structural axis (family index modulo the structural
/// dimension), so same-family pairs are performance- and structure-twins.
pub fn generate_portfolio(config: &PortfolioConfig) -> Result<Portfolio> {
    config.validate()?;
    let normal = |sd: f64| Normal::new(0.0, sd).expect("finite non-negative std-dev");
    let mut rng = stream(config.seed, "portfolio-centres", 0);
    let centre_noise = normal(config.center_spread);
    let centres: Vec<Vec<f64>> = (0..config.families)
        .map(|_| {
            (0..config.performance_dim)
                .map(|_| config.performance_base + centre_noise.sample(&mut rng))
                .collect()
        })
        .collect();

    let mut rng = stream(config.seed, "portfolio-members", 0);
    let member_noise = normal(config.member_spread);
    let algorithms = (0..config.count)
        .map(|i| {
            let fam = config.family_of(i);
            let performance = centres[fam]
                .iter()
                .map(|c| c + member_noise.sample(&mut rng))
                .collect();
            let axis = fam % config.structure_dim;
            let structure = (0..config.structure_dim)
                .map(|d| {
                    let base = if d == axis { 1.0 } else { 0.0 };
                    base + rng.random::<f64>() * config.structure_noise
                })
                .collect();
            AlgorithmDescriptor {
                id: format!("A{}", i + 1),
                performance,
                structure,
            }
        })
        .collect();
    Portfolio::new(config.name.clone(), algorithms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arq::{performance_kernel, structural_separation};

    #[test]
    fn same_seed_same_instance() {
        let cfg = GeneratorConfig::default();
        let a = generate_instance(&cfg).unwrap();
        let b = generate_instance(&cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let other = generate_instance(&GeneratorConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn capacities_respect_truncation() {
        let cfg = GeneratorConfig {
            layer_sizes: [20, 20, 20],
            capacity: TruncatedLogNormalLaw {
                mu: -1.0,
                sigma: 0.8,
                lower: 0.1,
                upper: 1.0,
            },
            ..GeneratorConfig::default()
        };
        let inst = generate_instance(&cfg).unwrap();
        assert!(inst
            .elements()
            .iter()
            .all(|e| e.capacity > 0.1 && e.capacity <= 1.0));
        assert!(inst.elements().iter().any(|e| e.capacity == 1.0));
    }

    #[test]
    fn infeasible_support_assignment_is_rejected() {
        let cfg = GeneratorConfig {
            layer_sizes: [1, 1, 1],
            function_count: 4,
            ..GeneratorConfig::default()
        };
        assert!(generate_instance(&cfg).is_err());
    }

    #[test]
    fn every_function_has_two_realizations_when_n_ge_2m() {
        for seed in 0..30 {
            let cfg = GeneratorConfig {
                seed,
                layer_sizes: [3, 3, 2],
                function_count: 4,
                extra_support: 0.0,
                ..GeneratorConfig::default()
            };
            let inst = generate_instance(&cfg).unwrap();
            for f in inst.functions() {
                assert!(inst.realizations(f).unwrap().len() >= 2);
            }
        }
    }

    #[test]
    fn no_orphan_dependents() {
        let cfg = GeneratorConfig {
            layer_sizes: [4, 5, 6],
            dependency_density: 0.05,
            ..GeneratorConfig::default()
        };
        let inst = generate_instance(&cfg).unwrap();
        let t = inst.topology();
        assert!(t.b12.0.iter().all(|r| r.contains(&1)));
        assert!(t.b23.0.iter().all(|r| r.contains(&1)));
    }

    #[test]
    fn impossible_truncation_errors_out() {
        let law = TruncatedLogNormalLaw {
            mu: -40.0,
            sigma: 0.01,
            lower: 0.5,
            upper: 1.0,
        };
        assert!(law.sample(&mut stream(1, "t", 0)).is_err());
    }

    #[test]
    fn availability_beta_mean() {
        let law = BetaLaw {
            alpha: 9.0,
            beta: 1.0,
        };
        let d = law.dist("a").unwrap();
        let mut rng = stream(3, "availability-check", 0);
        let n = 10_000;
        let mean = (0..n).map(|_| d.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.9).abs() < 0.02, "{mean}");
    }

    #[test]
    fn portfolio_ids_and_family_structure() {
        let cfg = PortfolioConfig::default();
        let p = generate_portfolio(&cfg).unwrap();
        let ids: Vec<_> = p.algorithms.iter().map(|a| a.id.as_str()).collect();
        assert_eq!(ids, (1..=12).map(|i| format!("A{i}")).collect::<Vec<_>>());

        let (a1, a2) = (&p.algorithms[0], &p.algorithms[1]);
        assert_eq!(cfg.family_of(0), cfg.family_of(1));
        let k = performance_kernel(&a1.performance, &a2.performance, 0.5).unwrap();
        let s = structural_separation(&a1.structure, &a2.structure).unwrap();
        assert!(k >= 0.9, "{k}");
        assert!(s <= 0.1, "{s}");
    }

    #[test]
    fn cross_family_pairs_with_matched_centres() {
        let cfg = PortfolioConfig {
            center_spread: 0.0,
            ..PortfolioConfig::default()
        };
        let p = generate_portfolio(&cfg).unwrap();
        let (a, b) = (&p.algorithms[0], &p.algorithms[2]);
        assert_ne!(cfg.family_of(0), cfg.family_of(2));
        let k = performance_kernel(&a.performance, &b.performance, 0.5).unwrap();
        let s = structural_separation(&a.structure, &b.structure).unwrap();
        assert!(k >= 0.8, "{k}");
        assert!(s >= 0.5, "{s}");
    }
}
