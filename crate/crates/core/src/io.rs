//! Files in and out: TOML run configuration, JSON instances/portfolios/reports,
//! run manifests and the CSV tables written by sweeps.
//!
//! Config precedence, lowest first: built-in defaults, the config file
//! (`--config`, else `$DEGEN_CONFIG`), `--set section.key=value` overrides,
//! then dedicated command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arq::Portfolio;
use crate::error::{Error, Result};
use crate::generator::{GeneratorConfig, PortfolioConfig};
use crate::harness::{SweepConfig, SweepResult, Variant};
use crate::model::{DeploymentInstance, MetricConfig};

pub const CONFIG_ENV: &str = "DEGEN_CONFIG";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything a run can be configured with.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; when set it replaces the sweep, generator and portfolio
    /// seeds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub metric: MetricConfig,
    pub sweep: SweepConfig,
    pub generator: GeneratorConfig,
    pub portfolio: PortfolioConfig,
}

impl RunConfig {
    /// Pushes the master seed (or the sweep seed, if none) everywhere and
    /// returns it.
    pub fn resolve_seed(&mut self) -> u64 {
        let master = self.seed.unwrap_or(self.sweep.seed);
        self.seed = Some(master);
        self.sweep.seed = master;
        self.generator.seed = master;
        self.portfolio.seed = master;
        master
    }
}

/// A parsed config plus the keys that were set explicitly.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    table: toml::Table,
}

impl LoadedConfig {
    /// Whether a dotted key such as `metric.m` came from the file or an
    /// override rather than a default.
    pub fn is_set(&self, dotted: &str) -> bool {
        let mut cur = &self.table;
        let parts: Vec<&str> = dotted.split('.').collect();
        for (i, p) in parts.iter().enumerate() {
            match cur.get(*p) {
                Some(toml::Value::Table(t)) if i + 1 < parts.len() => cur = t,
                Some(_) if i + 1 == parts.len() => return true,
                _ => return false,
            }
        }
        false
    }
}

/// Reads the config file (explicit path, else `$DEGEN_CONFIG`, else none) and
/// applies `key.path=value` overrides.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<LoadedConfig> {
    let env_path = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
    let path = path.map(Path::to_path_buf).or(env_path);
    let text = match &path {
        Some(p) => read_text(p)?,
        None => String::new(),
    };
    let origin = path.clone().unwrap_or_else(|| PathBuf::from("<defaults>"));
    parse_config(&text, &origin, overrides)
}

pub fn parse_config(text: &str, origin: &Path, overrides: &[String]) -> Result<LoadedConfig> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Parse {
        what: "config",
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    // Round-trip through text so type errors point at the offending line.
    let merged = toml::to_string(&table).map_err(|e| Error::validation(e.to_string()))?;
    let config: RunConfig = toml::from_str(&merged).map_err(|e| Error::Parse {
        what: "config",
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(LoadedConfig { config, table })
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::validation(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::validation(format!(
            "override key `{key}` is malformed"
        )));
    }
    let value = parse_override_value(raw);
    let (last, parents) = parts.split_last().expect("non-empty key");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => {
                return Err(Error::validation(format!(
                    "override key `{key}`: `{p}` is not a section"
                )))
            }
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// TOML literal if it parses as one, else a bare string.
fn parse_override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Config snapshot attached to every generated or swept output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool_version: String,
    pub timestamp: String,
    pub master_seed: u64,
    pub command: String,
    /// Input file the run read, if any, with the SHA-256 of its bytes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputRef>,
    pub config: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputRef {
    pub path: PathBuf,
    pub sha256: String,
}

impl RunManifest {
    pub fn new(command: &str, mut config: RunConfig, timestamp: Option<String>) -> Self {
        let master_seed = config.resolve_seed();
        RunManifest {
            tool_version: TOOL_VERSION.to_string(),
            timestamp: timestamp.unwrap_or_else(now_rfc3339),
            master_seed,
            command: command.to_string(),
            input: None,
            config,
        }
    }
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn input_ref(path: &Path) -> Result<InputRef> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    Ok(InputRef {
        path: path.to_path_buf(),
        sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path, what: &'static str) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        what,
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| Error::validation(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json_string(value)?)
}

pub fn load_instance(path: &Path) -> Result<DeploymentInstance> {
    read_json(path, "instance")
}

pub fn save_instance(path: &Path, instance: &DeploymentInstance) -> Result<()> {
    write_json(path, instance)
}

pub fn load_portfolio(path: &Path) -> Result<Portfolio> {
    let p: Portfolio = read_json(path, "portfolio")?;
    p.validate()?;
    Ok(p)
}

pub fn save_portfolio(path: &Path, portfolio: &Portfolio) -> Result<()> {
    write_json(path, portfolio)
}

/// `out.json` → `out.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    sibling(output, "manifest.json")
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// One row of the sweep summary table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub metric: String,
    pub target: String,
    pub q: f64,
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

pub fn sweep_rows(result: &SweepResult) -> Vec<SweepRow> {
    result
        .summary
        .iter()
        .map(|s| SweepRow {
            metric: s.metric.to_string(),
            target: result.target.clone(),
            q: s.q,
            mean: s.mean,
            std: s.std,
            trials: s.trials,
        })
        .collect()
}

fn csv_string<R: Serialize>(rows: &[R]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::validation(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::validation(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn sweep_csv(result: &SweepResult) -> Result<String> {
    csv_string(&sweep_rows(result))
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let text = read_text(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .collect::<std::result::Result<Vec<SweepRow>, _>>()
        .map_err(|e| Error::Parse {
            what: "sweep table",
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

/// Long-form heatmap cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub panel: String,
    pub row: String,
    pub col: String,
    pub value: f64,
}

pub fn matrix_cells(panel: &str, labels: &[String], values: &[Vec<f64>]) -> Vec<HeatmapCell> {
    let mut out = Vec::new();
    for (i, row) in values.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out.push(HeatmapCell {
                panel: panel.to_string(),
                row: labels[i].clone(),
                col: labels[j].clone(),
                value: *v,
            });
        }
    }
    out
}

pub fn heatmap_csv(cells: &[HeatmapCell]) -> Result<String> {
    csv_string(cells)
}

/// Trial-mean layer diagnostics of an MLDI sweep as long-form cells: panels
/// `tau` and `entropy` (rows are layers) and `coverage` (rows are functions,
/// averaged over layers); columns are the removal fractions.
pub fn mldi_heatmap(result: &SweepResult) -> Vec<HeatmapCell> {
    let mut acc: BTreeMap<(u8, String, usize), (f64, usize)> = BTreeMap::new();
    let mut q_index: Vec<f64> = Vec::new();
    for rec in &result.records {
        let Some(layers) = &rec.layers else { continue };
        let qi = match q_index.iter().position(|q| *q == rec.q) {
            Some(i) => i,
            None => {
                q_index.push(rec.q);
                q_index.len() - 1
            }
        };
        let mut add = |panel: u8, row: String, v: f64| {
            let e = acc.entry((panel, row, qi)).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        };
        for l in layers {
            add(0, l.layer.to_string(), l.tau);
            add(1, l.layer.to_string(), l.entropy_norm);
        }
        let mut per_fn: BTreeMap<String, f64> = BTreeMap::new();
        for l in layers {
            for (f, c) in &l.coverage {
                *per_fn.entry(f.to_string()).or_default() += c / layers.len() as f64;
            }
        }
        for (f, c) in per_fn {
            add(2, f, c);
        }
    }
    acc.into_iter()
        .map(|((panel, row, qi), (sum, n))| HeatmapCell {
            panel: ["tau", "entropy", "coverage"][panel as usize].to_string(),
            row,
            col: q_index[qi].to_string(),
            value: sum / n as f64,
        })
        .collect()
}

/// JSON detail file written next to a sweep table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepDetail {
    pub manifest: RunManifest,
    pub result: SweepResult,
}

/// Paths written by [`write_sweep`].
#[derive(Clone, Debug)]
pub struct SweepOutputs {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub manifest: PathBuf,
    pub heatmap: Option<PathBuf>,
}

/// Writes `<prefix>.csv`, `<prefix>.json`, `<prefix>.manifest.json` and, for
/// MLDI sweeps, `<prefix>.heatmap.csv`.
pub fn write_sweep(
    prefix: &Path,
    manifest: &RunManifest,
    result: &SweepResult,
) -> Result<SweepOutputs> {
    let with = |ext: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    let out = SweepOutputs {
        csv: with(".csv"),
        json: with(".json"),
        manifest: with(".manifest.json"),
        heatmap: result
            .summary
            .iter()
            .any(|s| s.metric == Variant::Mldi)
            .then(|| with(".heatmap.csv")),
    };
    write_text(&out.csv, &sweep_csv(result)?)?;
    write_json(
        &out.json,
        &SweepDetail {
            manifest: manifest.clone(),
            result: result.clone(),
        },
    )?;
    write_json(&out.manifest, manifest)?;
    if let Some(p) = &out.heatmap {
        write_text(p, &heatmap_csv(&mldi_heatmap(result))?)?;
    }
    Ok(out)
}

/// Concatenates sweep tables; every input must carry the same header. Field
/// text is copied verbatim. Returns the merged table and its data-row count.
pub fn merge_sweep_tables(paths: &[PathBuf]) -> Result<(String, usize)> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Option<csv::StringRecord> = None;
    let mut rows = 0;
    for p in paths {
        let text = read_text(p)?;
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let parse_err = |e: csv::Error| Error::Parse {
            what: "sweep table",
            path: p.clone(),
            message: e.to_string(),
        };
        let h = r.headers().map_err(parse_err)?.clone();
        match &header {
            None => {
                w.write_record(&h)
                    .map_err(|e| Error::validation(e.to_string()))?;
                header = Some(h);
            }
            Some(first) if *first != h => {
                return Err(Error::validation(format!(
                    "{}: header differs from the first table",
                    p.display()
                )))
            }
            Some(_) => {}
        }
        for rec in r.records() {
            let rec = rec.map_err(parse_err)?;
            w.write_record(&rec)
                .map_err(|e| Error::validation(e.to_string()))?;
            rows += 1;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::validation(e.to_string()))?;
    Ok((String::from_utf8(bytes).expect("csv output is utf-8"), rows))
}
