//! Algorithmic Resilience Quotient over a portfolio of algorithms described
//! by a performance vector and a structural vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Tally;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmDescriptor {
    pub id: String,
    pub performance: Vec<f64>,
    /// Non-negative, not all zero.
    pub structure: Vec<f64>,
}

/// A named set of candidate algorithms for one task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Portfolio {
    pub name: String,
    pub algorithms: Vec<AlgorithmDescriptor>,
}

impl Portfolio {
    pub fn new(name: impl Into<String>, algorithms: Vec<AlgorithmDescriptor>) -> Result<Self> {
        let p = Portfolio {
            name: name.into(),
            algorithms,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        validate_descriptors(&self.algorithms)
    }

    pub fn len(&self) -> usize {
        self.algorithms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.algorithms.is_empty()
    }

    /// Members at the given positions, in that order.
    pub fn select(&self, keep: &[usize]) -> Portfolio {
        Portfolio {
            name: self.name.clone(),
            algorithms: keep.iter().map(|&i| self.algorithms[i].clone()).collect(),
        }
    }
}

pub fn validate_descriptors(algs: &[AlgorithmDescriptor]) -> Result<()> {
    let Some(first) = algs.first() else {
        return Ok(());
    };
    let (d, k) = (first.performance.len(), first.structure.len());
    for a in algs {
        if a.performance.len() != d || a.structure.len() != k {
            return Err(Error::validation(format!(
                "{}: descriptor arity ({}, {}) differs from ({d}, {k})",
                a.id,
                a.performance.len(),
                a.structure.len()
            )));
        }
        if a.performance.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "{}: non-finite performance entry",
                a.id
            )));
        }
        if a.structure.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::validation(format!(
                "{}: structural descriptor must be finite and non-negative",
                a.id
            )));
        }
        if a.structure.iter().all(|v| *v == 0.0) {
            return Err(Error::validation(format!(
                "{}: structural descriptor is zero",
                a.id
            )));
        }
    }
    Ok(())
}

/// Gaussian similarity of two performance vectors.
pub fn performance_kernel(p: &[f64], q: &[f64], sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::validation(format!(
            "kernel width must be positive, got {sigma}"
        )));
    }
    if p.len() != q.len() {
        return Err(Error::validation(format!(
            "performance dimension mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let sq: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-sq / (2.0 * sigma * sigma)).exp())
}

/// One minus cosine similarity.
pub fn structural_separation(s: &[f64], t: &[f64]) -> Result<f64> {
    if s.len() != t.len() {
        return Err(Error::validation(format!(
            "structural dimension mismatch: {} vs {}",
            s.len(),
            t.len()
        )));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (ns, nt) = (norm(s), norm(t));
    if ns == 0.0 || nt == 0.0 {
        return Err(Error::validation(
            "cosine separation undefined for a zero vector",
        ));
    }
    let dot: f64 = s.iter().zip(t).map(|(a, b)| a * b).sum();
    // rounding can push the cosine a hair past 1
    Ok((1.0 - dot / (ns * nt)).clamp(0.0, 1.0))
}

/// Kernel and separation matrices plus both quotients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArqReport {
    pub ids: Vec<String>,
    pub hard: f64,
    pub soft: f64,
    pub kernel: Vec<Vec<f64>>,
    pub struct_dissim: Vec<Vec<f64>>,
}

struct PairMatrices {
    kernel: Vec<Vec<f64>>,
    separation: Vec<Vec<f64>>,
}

fn pair_matrices(
    algs: &[AlgorithmDescriptor],
    sigma: f64,
    tally: &mut Tally,
) -> Result<PairMatrices> {
    validate_descriptors(algs)?;
    if !(sigma > 0.0) {
        return Err(Error::validation(format!(
            "kernel width must be positive, got {sigma}"
        )));
    }
    let n = algs.len();
    let mut kernel = vec![vec![1.0; n]; n];
    let mut separation = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let k = performance_kernel(&algs[i].performance, &algs[j].performance, sigma)?;
            let s = structural_separation(&algs[i].structure, &algs[j].structure)?;
            tally.pair_evaluations += 1;
            kernel[i][j] = k;
            kernel[j][i] = k;
            separation[i][j] = s;
            separation[j][i] = s;
        }
    }
    Ok(PairMatrices { kernel, separation })
}

/// Mean over ordered pairs of kernel similarity times structural separation.
pub fn arq_soft(algs: &[AlgorithmDescriptor], sigma: f64) -> Result<f64> {
    arq_soft_tallied(algs, sigma).map(|(v, _)| v)
}

pub fn arq_soft_tallied(algs: &[AlgorithmDescriptor], sigma: f64) -> Result<(f64, Tally)> {
    let mut tally = Tally::default();
    let m = pair_matrices(algs, sigma, &mut tally)?;
    let v = soft_from(&m, &mut tally);
    Ok((v, tally))
}

/// Fraction of ordered pairs that are at least `epsilon`-similar in
/// performance and strictly more than `delta` apart in structure.
pub fn arq_hard(algs: &[AlgorithmDescriptor], epsilon: f64, delta: f64, sigma: f64) -> Result<f64> {
    let mut tally = Tally::default();
    let m = pair_matrices(algs, sigma, &mut tally)?;
    Ok(hard_from(&m, epsilon, delta, &mut tally))
}

fn soft_from(m: &PairMatrices, tally: &mut Tally) -> f64 {
    let n = m.kernel.len();
    if n <= 1 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            tally.summand_visits += 2;
            sum += 2.0 * m.kernel[i][j] * m.separation[i][j];
        }
    }
    sum / (n * (n - 1)) as f64
}

fn hard_from(m: &PairMatrices, epsilon: f64, delta: f64, tally: &mut Tally) -> f64 {
    let n = m.kernel.len();
    if n <= 1 {
        return 0.0;
    }
    let mut hits = 0u64;
    for i in 0..n {
        for j in (i + 1)..n {
            tally.summand_visits += 2;
            if m.kernel[i][j] >= epsilon && m.separation[i][j] > delta {
                hits += 2;
            }
        }
    }
    hits as f64 / (n * (n - 1)) as f64
}

pub fn arq_report(
    algs: &[AlgorithmDescriptor],
    epsilon: f64,
    delta: f64,
    sigma: f64,
) -> Result<ArqReport> {
    arq_report_tallied(algs, epsilon, delta, sigma).map(|(r, _)| r)
}

/// Soft and hard quotients from one pass over the pair matrices. The soft and
/// hard sums each visit every ordered pair, so `summand_visits` reads
/// `2 n (n - 1)`.
pub fn arq_report_tallied(
    algs: &[AlgorithmDescriptor],
    epsilon: f64,
    delta: f64,
    sigma: f64,
) -> Result<(ArqReport, Tally)> {
    let mut tally = Tally::default();
    let m = pair_matrices(algs, sigma, &mut tally)?;
    let soft = soft_from(&m, &mut tally);
    let hard = hard_from(&m, epsilon, delta, &mut tally);
    Ok((
        ArqReport {
            ids: algs.iter().map(|a| a.id.clone()).collect(),
            hard,
            soft,
            kernel: m.kernel,
            struct_dissim: m.separation,
        },
        tally,
    ))
}

/// Row sums of the kernel matrix without the diagonal, aligned with `algs`.
pub fn kernel_centrality(algs: &[AlgorithmDescriptor], sigma: f64) -> Result<Vec<f64>> {
    let mut tally = Tally::default();
    kernel_centrality_tallied(algs, sigma, &mut tally)
}

pub(crate) fn kernel_centrality_tallied(
    algs: &[AlgorithmDescriptor],
    sigma: f64,
    tally: &mut Tally,
) -> Result<Vec<f64>> {
    let m = pair_matrices(algs, sigma, tally)?;
    Ok(centrality_from_kernel(&m.kernel))
}

fn centrality_from_kernel(kernel: &[Vec<f64>]) -> Vec<f64> {
    (0..kernel.len())
        .map(|i| {
            kernel[i]
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, v)| v)
                .sum()
        })
        .collect()
}
