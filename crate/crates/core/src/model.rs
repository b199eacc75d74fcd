//! Domain types shared by every metric: elements, signatures, the cached
//! dissimilarity matrix, the layered dependency topology, and the metric
//! configuration.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::AddAssign;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque element identifier. Ordering follows the numeric value, which is
/// the scan order used by every deterministic tie-break in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(pub u32);

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl FromStr for ElementId {
    type Err = Error;

    /// Accepts `e7` or `7`.
    fn from_str(s: &str) -> Result<Self> {
        let digits = s.trim().trim_start_matches(['e', 'E']);
        digits
            .parse::<u32>()
            .map(ElementId)
            .map_err(|_| Error::validation(format!("invalid element id `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FunctionId(pub String);

impl FunctionId {
    pub fn new(id: impl Into<String>) -> Self {
        FunctionId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Architectural layer: physical, control/virtualization, service.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Layer {
    L1,
    L2,
    L3,
}

impl Layer {
    pub const ALL: [Layer; 3] = [Layer::L1, Layer::L2, Layer::L3];

    pub fn index(self) -> usize {
        match self {
            Layer::L1 => 0,
            Layer::L2 => 1,
            Layer::L3 => 2,
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Layer::L1 => "L1",
            Layer::L2 => "L2",
            Layer::L3 => "L3",
        };
        f.write_str(s)
    }
}

/// Mixed categorical/numeric feature vector describing how an element is
/// realized (placement domain, implementation lineage, software stack...).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralSignature {
    pub categorical: Vec<u32>,
    /// Each entry pre-normalized to `[0, 1]`.
    pub numeric: Vec<f64>,
}

impl StructuralSignature {
    pub fn new(categorical: Vec<u32>, numeric: Vec<f64>) -> Self {
        StructuralSignature {
            categorical,
            numeric,
        }
    }

    pub fn arity(&self) -> (usize, usize) {
        (self.categorical.len(), self.numeric.len())
    }

    fn validate(&self) -> Result<()> {
        if self.categorical.is_empty() && self.numeric.is_empty() {
            return Err(Error::validation("structural signature has no features"));
        }
        for (i, v) in self.numeric.iter().enumerate() {
            if !(0.0..=1.0).contains(v) {
                return Err(Error::validation(format!(
                    "numeric feature {i} = {v} lies outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Gower-style mixed distance: mean over all features of a 0/1 mismatch
/// (categorical) or absolute difference (numeric).
pub fn structural_dissimilarity(a: &StructuralSignature, b: &StructuralSignature) -> Result<f64> {
    if a.categorical.len() != b.categorical.len() {
        return Err(Error::validation(format!(
            "categorical feature count mismatch: {} vs {}",
            a.categorical.len(),
            b.categorical.len()
        )));
    }
    if a.numeric.len() != b.numeric.len() {
        return Err(Error::validation(format!(
            "numeric feature count mismatch: {} vs {}",
            a.numeric.len(),
            b.numeric.len()
        )));
    }
    let total = a.categorical.len() + a.numeric.len();
    if total == 0 {
        return Err(Error::validation("signatures have zero features"));
    }
    let mismatches = a
        .categorical
        .iter()
        .zip(&b.categorical)
        .filter(|(x, y)| x != y)
        .count() as f64;
    let numeric: f64 = a
        .numeric
        .iter()
        .zip(&b.numeric)
        .map(|(x, y)| (x - y).abs())
        .sum();
    Ok((mismatches + numeric) / total as f64)
}

/// Reliability over a mission horizon under an exponential failure law.
pub fn reliability(mtbf: f64, t: f64) -> Result<f64> {
    if !(mtbf > 0.0) || !mtbf.is_finite() {
        return Err(Error::validation(format!(
            "mtbf must be positive, got {mtbf}"
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::validation(format!(
            "mission time must be >= 0, got {t}"
        )));
    }
    Ok((-t / mtbf).exp())
}

/// Work counters for the pairwise kernels. One `pair_evaluation` is one call
/// of the structural dissimilarity; one `summand_visit` is one ordered-pair
/// term of an `i != j` sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub pair_evaluations: u64,
    pub summand_visits: u64,
}

impl AddAssign for Tally {
    fn add_assign(&mut self, rhs: Tally) {
        self.pair_evaluations += rhs.pair_evaluations;
        self.summand_visits += rhs.summand_visits;
    }
}

/// One realization of one or more network functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub id: ElementId,
    pub signature: StructuralSignature,
    /// Normalized to `(0, 1]`.
    pub capacity: f64,
    /// Absolute normalized units, `0 <= load <= capacity`.
    pub load: f64,
    pub availability: f64,
    /// Hours.
    pub mtbf: f64,
    pub layer: Layer,
    pub supports: BTreeSet<FunctionId>,
}

impl Element {
    pub fn validate(&self) -> Result<()> {
        let id = self.id;
        if !(self.capacity > 0.0 && self.capacity <= 1.0) {
            return Err(Error::validation(format!(
                "{id}: capacity {} outside (0, 1]",
                self.capacity
            )));
        }
        if !(self.load >= 0.0 && self.load <= self.capacity) {
            return Err(Error::validation(format!(
                "{id}: load {} outside [0, capacity]",
                self.load
            )));
        }
        if !(0.0..=1.0).contains(&self.availability) {
            return Err(Error::validation(format!(
                "{id}: availability {} outside [0, 1]",
                self.availability
            )));
        }
        if !(self.mtbf > 0.0) || !self.mtbf.is_finite() {
            return Err(Error::validation(format!("{id}: mtbf must be positive")));
        }
        if self.supports.is_empty() {
            return Err(Error::validation(format!("{id}: supports no function")));
        }
        self.signature
            .validate()
            .map_err(|e| Error::validation(format!("{id}: {e}")))
    }

    pub fn reliability(&self, t: f64) -> f64 {
        (-t / self.mtbf).exp()
    }
}

/// Dense symmetric matrix of pairwise structural dissimilarities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DissimilarityMatrix {
    /// Fills the upper triangle with one evaluation per unordered pair and
    /// mirrors it.
    pub fn build(signatures: &[&StructuralSignature]) -> Result<(Self, Tally)> {
        let n = signatures.len();
        let mut values = vec![0.0; n * n];
        let mut tally = Tally::default();
        for i in 0..n {
            for j in (i + 1)..n {
                let d = structural_dissimilarity(signatures[i], signatures[j])?;
                tally.pair_evaluations += 1;
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        Ok((DissimilarityMatrix { n, values }, tally))
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut values = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::validation("dissimilarity matrix is not square"));
            }
            values.extend(row);
        }
        let m = DissimilarityMatrix { n, values };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.n * self.n {
            return Err(Error::validation("dissimilarity matrix has wrong length"));
        }
        for i in 0..self.n {
            if self.get(i, i) != 0.0 {
                return Err(Error::validation(format!("D[{i}][{i}] is not zero")));
            }
            for j in 0..self.n {
                let v = self.get(i, j);
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::validation(format!(
                        "D[{i}][{j}] = {v} outside [0, 1]"
                    )));
                }
                if v != self.get(j, i) {
                    return Err(Error::validation(format!(
                        "D is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values
            .chunks(self.n.max(1))
            .map(<[f64]>::to_vec)
            .collect()
    }
}

/// Binary dependency matrix, `rows[dependent][upstream]`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DependencyMatrix(pub Vec<Vec<u8>>);

impl DependencyMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DependencyMatrix(vec![vec![0; cols]; rows])
    }

    pub fn depends(&self, dependent: usize, upstream: usize) -> bool {
        self.0[dependent][upstream] == 1
    }

    pub fn row(&self, dependent: usize) -> &[u8] {
        &self.0[dependent]
    }

    fn validate(&self, rows: usize, cols: usize, name: &str) -> Result<()> {
        if self.0.len() != rows {
            return Err(Error::validation(format!(
                "{name} has {} rows, expected {rows}",
                self.0.len()
            )));
        }
        for (r, row) in self.0.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::validation(format!(
                    "{name} row {r} has {} columns, expected {cols}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| **v > 1) {
                return Err(Error::validation(format!(
                    "{name} row {r} holds non-binary entry {v}"
                )));
            }
        }
        Ok(())
    }

    fn select(&self, keep_rows: &[usize], keep_cols: &[usize]) -> Self {
        DependencyMatrix(
            keep_rows
                .iter()
                .map(|&r| keep_cols.iter().map(|&c| self.0[r][c]).collect())
                .collect(),
        )
    }
}

/// `b12` is `|L2| x |L1|`, `b23` is `|L3| x |L2|`. Row/column order is the
/// ascending-id order of the elements in each layer.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerTopology {
    pub b12: DependencyMatrix,
    pub b23: DependencyMatrix,
}

/// Which node-weight law feeds the weighted substitution score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    None,
    Availability,
    Reliability,
    #[default]
    Joint,
}

impl FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(WeightMode::None),
            "availability" => Ok(WeightMode::Availability),
            "reliability" => Ok(WeightMode::Reliability),
            "joint" => Ok(WeightMode::Joint),
            other => Err(Error::validation(format!("unknown weight mode `{other}`"))),
        }
    }
}

/// Thresholds and knobs for all three metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub delta: f64,
    pub a_min: f64,
    pub r_min: f64,
    /// Hours.
    pub mission_time: f64,
    pub weight_mode: WeightMode,
    pub epsilon: f64,
    pub sigma: f64,
    pub m: usize,
    pub k: usize,
    /// Cross-layer weighting factor. Carried through to reports; no formula
    /// consumes it.
    pub gamma: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            delta: 0.5,
            a_min: 0.5,
            r_min: 0.5,
            mission_time: 168.0,
            weight_mode: WeightMode::Joint,
            epsilon: 0.6,
            sigma: 0.5,
            m: 3,
            k: 3,
            gamma: 0.5,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| -> Result<()> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::validation(format!(
                    "metric.{name} = {v} outside [0, 1]"
                )))
            }
        };
        unit("delta", self.delta)?;
        unit("a_min", self.a_min)?;
        unit("r_min", self.r_min)?;
        unit("epsilon", self.epsilon)?;
        if !(self.mission_time > 0.0) || !self.mission_time.is_finite() {
            return Err(Error::validation(format!(
                "metric.mission_time = {} must be positive",
                self.mission_time
            )));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::validation(format!(
                "metric.sigma = {} must be positive",
                self.sigma
            )));
        }
        if self.m == 0 {
            return Err(Error::validation("metric.m must be >= 1"));
        }
        if self.k == 0 || self.k > Layer::ALL.len() {
            return Err(Error::validation(format!(
                "metric.k = {} must be in 1..=3",
                self.k
            )));
        }
        Ok(())
    }
}

/// Elements, function catalog, layer topology and the cached dissimilarity
/// matrix. Elements are held in strictly ascending id order, so an element's
/// position doubles as its row in `dissimilarity`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceDoc")]
pub struct DeploymentInstance {
    elements: Vec<Element>,
    functions: Vec<FunctionId>,
    topology: LayerTopology,
    dissimilarity: DissimilarityMatrix,
}

/// Serialized shape of an instance; the cached matrix is optional on input.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    elements: Vec<Element>,
    functions: Vec<FunctionId>,
    #[serde(default)]
    topology: LayerTopology,
    #[serde(default)]
    dissimilarity: Option<DissimilarityMatrix>,
}

impl TryFrom<InstanceDoc> for DeploymentInstance {
    type Error = Error;

    fn try_from(doc: InstanceDoc) -> Result<Self> {
        let instance = DeploymentInstance::new(doc.elements, doc.functions, doc.topology)?;
        if let Some(cached) = doc.dissimilarity {
            if cached != instance.dissimilarity {
                return Err(Error::validation(
                    "cached dissimilarity matrix does not match the element signatures",
                ));
            }
        }
        Ok(instance)
    }
}

impl DeploymentInstance {
    /// Validates the parts and builds the dissimilarity matrix.
    pub fn new(
        elements: Vec<Element>,
        functions: Vec<FunctionId>,
        topology: LayerTopology,
    ) -> Result<Self> {
        Self::new_tallied(elements, functions, topology).map(|(inst, _)| inst)
    }

    pub fn new_tallied(
        elements: Vec<Element>,
        functions: Vec<FunctionId>,
        topology: LayerTopology,
    ) -> Result<(Self, Tally)> {
        validate_parts(&elements, &functions, &topology)?;
        let sigs: Vec<&StructuralSignature> = elements.iter().map(|e| &e.signature).collect();
        let (dissimilarity, tally) = DissimilarityMatrix::build(&sigs)?;
        Ok((
            DeploymentInstance {
                elements,
                functions,
                topology,
                dissimilarity,
            },
            tally,
        ))
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn functions(&self) -> &[FunctionId] {
        &self.functions
    }

    pub fn topology(&self) -> &LayerTopology {
        &self.topology
    }

    pub fn dissimilarity(&self) -> &DissimilarityMatrix {
        &self.dissimilarity
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn index_of(&self, id: ElementId) -> Option<usize> {
        self.elements.binary_search_by_key(&id, |e| e.id).ok()
    }

    pub fn has_function(&self, f: &FunctionId) -> bool {
        self.functions.contains(f)
    }

    /// Positions of the elements realizing `f`, ascending.
    pub fn realizations(&self, f: &FunctionId) -> Result<Vec<usize>> {
        if !self.has_function(f) {
            return Err(Error::validation(format!("unknown function id `{f}`")));
        }
        Ok(self
            .elements
            .iter()
            .enumerate()
            .filter(|(_, e)| e.supports.contains(f))
            .map(|(i, _)| i)
            .collect())
    }

    /// Positions of the elements in `layer`, ascending.
    pub fn layer_members(&self, layer: Layer) -> Vec<usize> {
        self.elements
            .iter()
            .enumerate()
            .filter(|(_, e)| e.layer == layer)
            .map(|(i, _)| i)
            .collect()
    }

    /// Sub-instance holding only `keep` (any order, duplicates ignored).
    /// Dependency matrices are projected onto the survivors and the
    /// dissimilarity matrix is rebuilt.
    pub fn restrict(&self, keep: &[ElementId]) -> Result<(Self, Tally)> {
        let keep: BTreeSet<ElementId> = keep.iter().copied().collect();
        for id in &keep {
            if self.index_of(*id).is_none() {
                return Err(Error::validation(format!("unknown element id {id}")));
            }
        }
        let kept_in = |layer: Layer| -> Vec<usize> {
            // local (within-layer) positions of survivors
            self.layer_members(layer)
                .into_iter()
                .enumerate()
                .filter(|(_, g)| keep.contains(&self.elements[*g].id))
                .map(|(local, _)| local)
                .collect()
        };
        let (k1, k2, k3) = (kept_in(Layer::L1), kept_in(Layer::L2), kept_in(Layer::L3));
        let topology = LayerTopology {
            b12: self.topology.b12.select(&k2, &k1),
            b23: self.topology.b23.select(&k3, &k2),
        };
        let elements: Vec<Element> = self
            .elements
            .iter()
            .filter(|e| keep.contains(&e.id))
            .cloned()
            .collect();
        Self::new_tallied(elements, self.functions.clone(), topology)
    }

    /// Same structure with availability and MTBF replaced element-wise.
    /// Signatures are untouched, so the cached matrix carries over.
    pub fn with_operational(&self, draws: &[(f64, f64)]) -> Result<Self> {
        if draws.len() != self.elements.len() {
            return Err(Error::validation(
                "operational draw count differs from element count",
            ));
        }
        let mut out = self.clone();
        for (e, &(a, mtbf)) in out.elements.iter_mut().zip(draws) {
            e.availability = a;
            e.mtbf = mtbf;
            e.validate()?;
        }
        Ok(out)
    }
}

fn validate_parts(
    elements: &[Element],
    functions: &[FunctionId],
    topology: &LayerTopology,
) -> Result<()> {
    let catalog: BTreeSet<&FunctionId> = functions.iter().collect();
    if catalog.len() != functions.len() {
        return Err(Error::validation("function catalog holds duplicate ids"));
    }
    for w in elements.windows(2) {
        if w[0].id >= w[1].id {
            return Err(Error::validation(format!(
                "element ids must be strictly ascending ({} then {})",
                w[0].id, w[1].id
            )));
        }
    }
    let arity = elements.first().map(|e| e.signature.arity());
    for e in elements {
        e.validate()?;
        if Some(e.signature.arity()) != arity {
            let (c, n) = e.signature.arity();
            return Err(Error::validation(format!(
                "{}: signature has {c} categorical / {n} numeric features, expected {:?}",
                e.id,
                arity.unwrap_or_default()
            )));
        }
        if let Some(f) = e.supports.iter().find(|f| !catalog.contains(f)) {
            return Err(Error::validation(format!(
                "{} supports `{f}` which is not in the function catalog",
                e.id
            )));
        }
    }
    let count = |layer| elements.iter().filter(|e| e.layer == layer).count();
    let (n1, n2, n3) = (count(Layer::L1), count(Layer::L2), count(Layer::L3));
    topology.b12.validate(n2, n1, "B12")?;
    topology.b23.validate(n3, n2, "B23")?;
    Ok(())
}
