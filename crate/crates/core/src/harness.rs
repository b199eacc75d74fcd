//! Targeted-removal sweeps: score every candidate, remove the top `q`
//! fraction, re-evaluate the metric on what is left, repeat per trial, and
//! aggregate per `q`.
//!
//! Cells `(q, trial)` are independent and run in parallel; results are
//! collected and reduced in `(q, trial)` order, so a sweep is a pure function
//! of its inputs and master seed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arq::{arq_report_tallied, kernel_centrality_tallied, Portfolio};
use crate::error::{Error, Result};
use crate::fss::{fss_report_tallied, weighted_contributions};
use crate::generator::OperationalLaws;
use crate::mldi::{mldi_report_tallied, propagate_failures, LayerDiagnostics};
use crate::model::{DeploymentInstance, ElementId, FunctionId, Layer, MetricConfig, Tally};
use crate::rng::stream;

/// Which metric a sweep attacks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Target {
    Fss { function: FunctionId },
    Arq,
    Mldi,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Fss { function } => write!(f, "fss:{function}"),
            Target::Arq => f.write_str("arq"),
            Target::Mldi => f.write_str("mldi"),
        }
    }
}

impl std::str::FromStr for Target {
    type Err = Error;

    /// `fss:<function>`, `arq` or `mldi`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("fss", f)) if !f.is_empty() => Ok(Target::Fss {
                function: FunctionId::new(f),
            }),
            None if s == "arq" => Ok(Target::Arq),
            None if s == "mldi" => Ok(Target::Mldi),
            _ => Err(Error::validation(format!(
                "unknown target `{s}` (expected fss:<function>, arq, or mldi)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackMode {
    #[default]
    Targeted,
    /// Uniformly random removal; a diagnostic baseline for the targeted
    /// attack.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub q_list: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub target: Target,
    pub attack: AttackMode,
    /// When set, every trial redraws availability and MTBF for all elements
    /// from `laws` (trial-indexed stream, shared across `q`). Ignored for
    /// portfolio targets.
    pub resample: bool,
    pub laws: OperationalLaws,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            q_list: vec![0.0, 0.05, 0.10, 0.20, 0.30, 0.40, 0.50],
            trials: 10,
            seed: 7,
            target: Target::Mldi,
            attack: AttackMode::Targeted,
            resample: true,
            laws: OperationalLaws::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q_list.is_empty() {
            return Err(Error::validation("sweep.q_list is empty"));
        }
        if let Some(q) = self.q_list.iter().find(|q| !(0.0..1.0).contains(*q)) {
            return Err(Error::validation(format!(
                "sweep.q_list entry {q} outside [0, 1)"
            )));
        }
        if self.q_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation(
                "sweep.q_list must be strictly increasing",
            ));
        }
        if self.trials == 0 {
            return Err(Error::validation("sweep.trials must be >= 1"));
        }
        Ok(())
    }
}

/// What a sweep runs against.
#[derive(Clone, Copy, Debug)]
pub enum Subject<'a> {
    Instance(&'a DeploymentInstance),
    Portfolio(&'a Portfolio),
}

/// One reported score variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    FssBaseline,
    FssWeighted,
    ArqSoft,
    ArqHard,
    Mldi,
    MldiEnhanced,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::FssBaseline => "fss_baseline",
            Variant::FssWeighted => "fss_weighted",
            Variant::ArqSoft => "arq_soft",
            Variant::ArqHard => "arq_hard",
            Variant::Mldi => "mldi",
            Variant::MldiEnhanced => "mldi_enhanced",
        }
    }

    pub fn for_target(target: &Target) -> &'static [Variant] {
        match target {
            Target::Fss { .. } => &[Variant::FssBaseline, Variant::FssWeighted],
            Target::Arq => &[Variant::ArqSoft, Variant::ArqHard],
            Target::Mldi => &[Variant::Mldi, Variant::MldiEnhanced],
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Variant::FssBaseline,
            Variant::FssWeighted,
            Variant::ArqSoft,
            Variant::ArqHard,
            Variant::Mldi,
            Variant::MldiEnhanced,
        ]
        .into_iter()
        .find(|v| v.as_str() == s)
        .ok_or_else(|| Error::validation(format!("unknown metric `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub q: f64,
    pub trial: usize,
    pub removed: Vec<String>,
    pub survivors: usize,
    pub values: BTreeMap<Variant, f64>,
    /// Set when nothing survived and the values were defaulted to 0.
    pub flagged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<LayerDiagnostics>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QSummary {
    pub metric: Variant,
    pub q: f64,
    pub mean: f64,
    /// Sample standard deviation; 0 with a single trial.
    pub std: f64,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub target: String,
    pub records: Vec<TrialRecord>,
    pub summary: Vec<QSummary>,
    pub tally: Tally,
}

impl SweepResult {
    pub fn summary_for(&self, metric: Variant) -> Vec<&QSummary> {
        self.summary.iter().filter(|s| s.metric == metric).collect()
    }

    pub fn mean_at(&self, metric: Variant, q: f64) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.metric == metric && s.q == q)
            .map(|s| s.mean)
    }
}

/// Element-level importance for instance targets. Higher scores are
/// removed first.
pub trait ElementImportance: Sync {
    fn scores(
        &self,
        instance: &DeploymentInstance,
        candidates: &[usize],
        config: &MetricConfig,
        tally: &mut Tally,
    ) -> Vec<f64>;
}

/// An element's own share of the weighted substitution sum within the
/// candidate set.
#[derive(Clone, Copy, Debug, Default)]
pub struct WeightedContribution;

impl ElementImportance for WeightedContribution {
    fn scores(
        &self,
        instance: &DeploymentInstance,
        candidates: &[usize],
        config: &MetricConfig,
        tally: &mut Tally,
    ) -> Vec<f64> {
        weighted_contributions(instance, candidates, config, tally)
    }
}

/// Number of elements transitively depending on the candidate through the
/// dependency matrices, plus the number of functions it supports.
#[derive(Clone, Copy, Debug, Default)]
pub struct DependencyReach;

impl ElementImportance for DependencyReach {
    fn scores(
        &self,
        instance: &DeploymentInstance,
        candidates: &[usize],
        _config: &MetricConfig,
        _tally: &mut Tally,
    ) -> Vec<f64> {
        let reach = dependency_reach(instance);
        candidates
            .iter()
            .map(|&g| (reach[g] + instance.elements()[g].supports.len()) as f64)
            .collect()
    }
}

/// Downstream element count per element position.
pub fn dependency_reach(instance: &DeploymentInstance) -> Vec<usize> {
    let topo = instance.topology();
    let l1 = instance.layer_members(Layer::L1);
    let l2 = instance.layer_members(Layer::L2);
    let l3 = instance.layer_members(Layer::L3);

    let l3_below = |j2: usize| -> BTreeSet<usize> {
        (0..l3.len()).filter(|&k| topo.b23.depends(k, j2)).collect()
    };
    let mut reach = vec![0; instance.len()];
    for (j2, &g) in l2.iter().enumerate() {
        reach[g] = l3_below(j2).len();
    }
    for (i1, &g) in l1.iter().enumerate() {
        let children: Vec<usize> = (0..l2.len()).filter(|&j| topo.b12.depends(j, i1)).collect();
        let grand: BTreeSet<usize> = children.iter().flat_map(|&j| l3_below(j)).collect();
        reach[g] = children.len() + grand.len();
    }
    reach
}

/// Elements (or algorithms) of one subject with their importance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub id: String,
    pub score: f64,
}

/// Importance per candidate of `target`, in subject order: the function's
/// realizations for FSS, the whole portfolio for ARQ, every element for MLDI.
pub fn importance_scores(
    subject: Subject<'_>,
    target: &Target,
    config: &MetricConfig,
) -> Result<Vec<Scored>> {
    let mut tally = Tally::default();
    match (subject, target) {
        (Subject::Instance(inst), Target::Fss { function }) => {
            let members = inst.realizations(function)?;
            let s = WeightedContribution.scores(inst, &members, config, &mut tally);
            Ok(label(inst, &members, s))
        }
        (Subject::Instance(inst), Target::Mldi) => {
            let members: Vec<usize> = (0..inst.len()).collect();
            let s = DependencyReach.scores(inst, &members, config, &mut tally);
            Ok(label(inst, &members, s))
        }
        (Subject::Portfolio(p), Target::Arq) => {
            let s = kernel_centrality_tallied(&p.algorithms, config.sigma, &mut tally)?;
            Ok(p.algorithms
                .iter()
                .zip(s)
                .map(|(a, score)| Scored {
                    id: a.id.clone(),
                    score,
                })
                .collect())
        }
        _ => Err(mismatch(target)),
    }
}

fn label(inst: &DeploymentInstance, members: &[usize], scores: Vec<f64>) -> Vec<Scored> {
    members
        .iter()
        .zip(scores)
        .map(|(&g, score)| Scored {
            id: inst.elements()[g].id.to_string(),
            score,
        })
        .collect()
}

fn mismatch(target: &Target) -> Error {
    Error::validation(format!(
        "target `{target}` needs {}",
        if matches!(target, Target::Arq) {
            "a portfolio"
        } else {
            "a deployment instance"
        }
    ))
}

/// Elements removed for fraction `q` of `n`: `floor(q n + 1/2)`.
pub fn removal_count(n: usize, q: f64) -> usize {
    ((q * n as f64 + 0.5).floor() as usize).min(n)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Removal<K> {
    pub removed: Vec<K>,
    /// Ascending key order.
    pub survivors: Vec<K>,
}

/// Removes the `removal_count` highest-scoring keys; equal scores go in
/// ascending key order.
pub fn rank_and_remove<K: Ord + Clone>(scored: &[(K, f64)], q: f64) -> Removal<K> {
    let r = removal_count(scored.len(), q);
    let mut order: Vec<&(K, f64)> = scored.iter().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let removed: Vec<K> = order[..r].iter().map(|(k, _)| k.clone()).collect();
    let mut survivors: Vec<K> = order[r..].iter().map(|(k, _)| k.clone()).collect();
    survivors.sort();
    Removal { removed, survivors }
}

fn random_remove<K: Ord + Clone>(keys: &[K], q: f64, rng: &mut impl rand::Rng) -> Removal<K> {
    let r = removal_count(keys.len(), q);
    let mut shuffled = keys.to_vec();
    shuffled.shuffle(rng);
    let removed = shuffled[..r].to_vec();
    let mut survivors = shuffled[r..].to_vec();
    survivors.sort();
    Removal { removed, survivors }
}

/// Runs the sweep with the default importance strategies.
pub fn run_sweep(
    subject: Subject<'_>,
    sweep: &SweepConfig,
    metric: &MetricConfig,
) -> Result<SweepResult> {
    let importance: &dyn ElementImportance = match sweep.target {
        Target::Mldi => &DependencyReach,
        _ => &WeightedContribution,
    };
    run_sweep_with(subject, sweep, metric, importance)
}

/// Runs the sweep with a caller-supplied element importance (ignored for
/// portfolio targets, which always rank by kernel centrality).
pub fn run_sweep_with(
    subject: Subject<'_>,
    sweep: &SweepConfig,
    metric: &MetricConfig,
    importance: &dyn ElementImportance,
) -> Result<SweepResult> {
    sweep.validate()?;
    metric.validate()?;
    let label = match (subject, &sweep.target) {
        (Subject::Instance(inst), Target::Fss { function }) => {
            inst.realizations(function)?;
            function.to_string()
        }
        (Subject::Instance(_), Target::Mldi) => "instance".to_string(),
        (Subject::Portfolio(p), Target::Arq) => {
            p.validate()?;
            p.name.clone()
        }
        _ => return Err(mismatch(&sweep.target)),
    };

    // one realization per trial, shared by every q
    let realizations: Vec<Option<DeploymentInstance>> = match subject {
        Subject::Instance(inst) => (0..sweep.trials)
            .map(|t| realize(inst, sweep, t).map(Some))
            .collect::<Result<_>>()?,
        Subject::Portfolio(_) => vec![None; sweep.trials],
    };

    let cells: Vec<(usize, usize)> = (0..sweep.q_list.len())
        .flat_map(|qi| (0..sweep.trials).map(move |t| (qi, t)))
        .collect();
    let outcomes: Vec<(TrialRecord, Tally)> = cells
        .par_iter()
        .map(|&(qi, t)| {
            let q = sweep.q_list[qi];
            match subject {
                Subject::Instance(_) => {
                    let inst = realizations[t].as_ref().expect("instance realization");
                    run_instance_cell(inst, sweep, metric, importance, qi, q, t)
                }
                Subject::Portfolio(p) => run_portfolio_cell(p, sweep, metric, qi, q, t),
            }
        })
        .collect::<Result<_>>()?;

    let mut tally = Tally::default();
    let mut records = Vec::with_capacity(outcomes.len());
    for (rec, t) in outcomes {
        tally += t;
        records.push(rec);
    }
    let summary = summarize(&records, &sweep.q_list, Variant::for_target(&sweep.target));
    Ok(SweepResult {
        target: label,
        records,
        summary,
        tally,
    })
}

/// The trial's instance: operational draws replaced when resampling is on.
pub fn realize(
    inst: &DeploymentInstance,
    sweep: &SweepConfig,
    trial: usize,
) -> Result<DeploymentInstance> {
    if sweep.resample {
        let mut rng = stream(sweep.seed, "trial-operational", trial as u64);
        inst.with_operational(&sweep.laws.draw(inst.len(), &mut rng)?)
    } else {
        Ok(inst.clone())
    }
}

fn attack_rng(sweep: &SweepConfig, qi: usize, trial: usize) -> impl rand::Rng {
    stream(
        sweep.seed,
        "random-attack",
        (qi * sweep.trials + trial) as u64,
    )
}

fn run_instance_cell(
    inst: &DeploymentInstance,
    sweep: &SweepConfig,
    metric: &MetricConfig,
    importance: &dyn ElementImportance,
    qi: usize,
    q: f64,
    trial: usize,
) -> Result<(TrialRecord, Tally)> {
    let mut tally = Tally::default();
    let candidates: Vec<usize> = match &sweep.target {
        Target::Fss { function } => inst.realizations(function)?,
        _ => (0..inst.len()).collect(),
    };
    let ids: Vec<ElementId> = candidates.iter().map(|&g| inst.elements()[g].id).collect();
    let removal = match sweep.attack {
        AttackMode::Targeted => {
            let scores = importance.scores(inst, &candidates, metric, &mut tally);
            let scored: Vec<(ElementId, f64)> = ids.iter().copied().zip(scores).collect();
            rank_and_remove(&scored, q)
        }
        AttackMode::Random => random_remove(&ids, q, &mut attack_rng(sweep, qi, trial)),
    };

    let mut record = TrialRecord {
        q,
        trial,
        removed: removal.removed.iter().map(ToString::to_string).collect(),
        survivors: removal.survivors.len(),
        values: BTreeMap::new(),
        flagged: false,
        layers: None,
    };
    match &sweep.target {
        Target::Fss { function } => {
            if removal.survivors.is_empty() {
                record.flagged = true;
                record.values = zeros(&sweep.target);
            } else {
                let (sub, t) = inst.restrict(&removal.survivors)?;
                tally += t;
                let (rep, t) = fss_report_tallied(&sub, function, metric)?;
                tally += t;
                record.values.insert(Variant::FssBaseline, rep.baseline);
                record.values.insert(Variant::FssWeighted, rep.weighted);
            }
        }
        Target::Mldi => {
            let failed: BTreeSet<ElementId> = removal.removed.iter().copied().collect();
            let state = propagate_failures(inst, &failed)?;
            let (rep, t) = mldi_report_tallied(inst, &state, metric)?;
            tally += t;
            record.values.insert(Variant::Mldi, rep.baseline);
            record.values.insert(Variant::MldiEnhanced, rep.enhanced);
            record.layers = Some(rep.per_layer);
        }
        Target::Arq => unreachable!("portfolio targets take the portfolio path"),
    }
    Ok((record, tally))
}

fn run_portfolio_cell(
    p: &Portfolio,
    sweep: &SweepConfig,
    metric: &MetricConfig,
    qi: usize,
    q: f64,
    trial: usize,
) -> Result<(TrialRecord, Tally)> {
    let mut tally = Tally::default();
    let positions: Vec<usize> = (0..p.len()).collect();
    let removal = match sweep.attack {
        AttackMode::Targeted => {
            let scores = kernel_centrality_tallied(&p.algorithms, metric.sigma, &mut tally)?;
            let scored: Vec<(usize, f64)> = positions.iter().copied().zip(scores).collect();
            rank_and_remove(&scored, q)
        }
        AttackMode::Random => random_remove(&positions, q, &mut attack_rng(sweep, qi, trial)),
    };
    let mut record = TrialRecord {
        q,
        trial,
        removed: removal
            .removed
            .iter()
            .map(|&i| p.algorithms[i].id.clone())
            .collect(),
        survivors: removal.survivors.len(),
        values: BTreeMap::new(),
        flagged: false,
        layers: None,
    };
    if removal.survivors.is_empty() {
        record.flagged = true;
        record.values = zeros(&sweep.target);
    } else {
        let kept = p.select(&removal.survivors);
        let (rep, t) =
            arq_report_tallied(&kept.algorithms, metric.epsilon, metric.delta, metric.sigma)?;
        tally += t;
        record.values.insert(Variant::ArqSoft, rep.soft);
        record.values.insert(Variant::ArqHard, rep.hard);
    }
    Ok((record, tally))
}

fn zeros(target: &Target) -> BTreeMap<Variant, f64> {
    Variant::for_target(target)
        .iter()
        .map(|v| (*v, 0.0))
        .collect()
}

fn summarize(records: &[TrialRecord], q_list: &[f64], variants: &[Variant]) -> Vec<QSummary> {
    let mut out = Vec::new();
    for &metric in variants {
        for &q in q_list {
            let xs: Vec<f64> = records
                .iter()
                .filter(|r| r.q == q)
                .filter_map(|r| r.values.get(&metric).copied())
                .collect();
            let n = xs.len();
            let uniform = xs.windows(2).all(|w| w[0] == w[1]);
            let mean = if uniform && n > 0 {
                xs[0]
            } else {
                xs.iter().sum::<f64>() / n as f64
            };
            let std = if n > 1 && !uniform {
                (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            out.push(QSummary {
                metric,
                q,
                mean,
                std,
                trials: n,
            });
        }
    }
    out
}
