//! Functional Substitution Score: how many ordered pairs of a function's
//! realizations are structurally distinct, optionally weighted by
//! capacity/load compatibility and per-node admissibility.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{
    DeploymentInstance, Element, ElementId, FunctionId, MetricConfig, Tally, WeightMode,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FssReport {
    pub function_id: FunctionId,
    pub n: usize,
    pub baseline: f64,
    pub weighted: f64,
    pub weights: BTreeMap<ElementId, f64>,
    /// Elements with a strictly positive node weight.
    pub admissible_count: usize,
}

/// Node-level operational weight.
pub fn node_weight(element: &Element, mode: WeightMode, config: &MetricConfig) -> f64 {
    let a = element.availability;
    let r = || element.reliability(config.mission_time);
    let gate = |v: f64, min: f64| if v >= min { v } else { 0.0 };
    match mode {
        WeightMode::None => 1.0,
        WeightMode::Availability => gate(a, config.a_min),
        WeightMode::Reliability => gate(r(), config.r_min),
        WeightMode::Joint => {
            let r = r();
            if a >= config.a_min && r >= config.r_min {
                a * r
            } else {
                0.0
            }
        }
    }
}

/// Capacity/load compatibility of a substitution pair, scaled by their
/// dissimilarity.
pub fn pair_weight(a: &Element, b: &Element, d: f64) -> f64 {
    a.capacity.min(b.capacity) / (1.0 + (a.load - b.load).abs()) * d
}

/// Baseline score at threshold `delta`. Sets with fewer than two
/// realizations score 0.
pub fn fss_baseline(
    instance: &DeploymentInstance,
    function: &FunctionId,
    delta: f64,
) -> Result<f64> {
    let members = instance.realizations(function)?;
    let n = members.len();
    if n <= 1 {
        return Ok(0.0);
    }
    let d = instance.dissimilarity();
    let mut distinct = 0u64;
    for (a, &i) in members.iter().enumerate() {
        for &j in &members[a + 1..] {
            if d.get(i, j) > delta {
                distinct += 2;
            }
        }
    }
    Ok(distinct as f64 / (n * (n - 1)) as f64)
}

/// Weighted score together with the baseline and the node weights.
pub fn fss_weighted(
    instance: &DeploymentInstance,
    function: &FunctionId,
    config: &MetricConfig,
) -> Result<FssReport> {
    fss_report_tallied(instance, function, config).map(|(r, _)| r)
}

pub fn fss_report_tallied(
    instance: &DeploymentInstance,
    function: &FunctionId,
    config: &MetricConfig,
) -> Result<(FssReport, Tally)> {
    let members = instance.realizations(function)?;
    let elements = instance.elements();
    let d = instance.dissimilarity();
    let n = members.len();

    let w: Vec<f64> = members
        .iter()
        .map(|&i| node_weight(&elements[i], config.weight_mode, config))
        .collect();

    let mut tally = Tally::default();
    let mut distinct = 0u64;
    let mut weighted_sum = 0.0;
    for a in 0..n {
        for b in (a + 1)..n {
            let (i, j) = (members[a], members[b]);
            tally.summand_visits += 2;
            let dij = d.get(i, j);
            if dij > config.delta {
                distinct += 2;
                let term = pair_weight(&elements[i], &elements[j], dij) * w[a] * w[b];
                weighted_sum += 2.0 * term;
            }
        }
    }

    let (baseline, weighted) = if n <= 1 {
        (0.0, 0.0)
    } else {
        let norm = (n * (n - 1)) as f64;
        (distinct as f64 / norm, weighted_sum / norm)
    };

    let report = FssReport {
        function_id: function.clone(),
        n,
        baseline,
        weighted,
        weights: members
            .iter()
            .zip(&w)
            .map(|(&i, &wi)| (elements[i].id, wi))
            .collect(),
        admissible_count: w.iter().filter(|v| **v > 0.0).count(),
    };
    Ok((report, tally))
}

/// Each member's total weighted contribution,
/// `sum_{j != i} 1{D_ij > delta} W_ij w_i w_j`, aligned with `members`.
pub fn weighted_contributions(
    instance: &DeploymentInstance,
    members: &[usize],
    config: &MetricConfig,
    tally: &mut Tally,
) -> Vec<f64> {
    let elements = instance.elements();
    let d = instance.dissimilarity();
    let w: Vec<f64> = members
        .iter()
        .map(|&i| node_weight(&elements[i], config.weight_mode, config))
        .collect();
    let mut scores = vec![0.0; members.len()];
    for a in 0..members.len() {
        for b in (a + 1)..members.len() {
            let (i, j) = (members[a], members[b]);
            tally.summand_visits += 2;
            let dij = d.get(i, j);
            if dij > config.delta {
                let term = pair_weight(&elements[i], &elements[j], dij) * w[a] * w[b];
                scores[a] += term;
                scores[b] += term;
            }
        }
    }
    scores
}
