use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use degen::arq::{arq_report, Portfolio};
use degen::fixtures::{self, Fixture};
use degen::fss::fss_weighted;
use degen::generator::{generate_instance, generate_portfolio};
use degen::harness::{run_sweep, Subject, Target};
use degen::io::{self, LoadedConfig, RunConfig, RunManifest};
use degen::mldi::{mldi_report, propagate_failures};
use degen::model::{DeploymentInstance, ElementId, FunctionId};
use degen::{Error, Result};

/// Structural-diversity resilience metrics and targeted-removal sweeps.
#[derive(Parser, Debug)]
#[command(name = "degen", version)]
struct Cli {
    /// TOML config file; defaults to $DEGEN_CONFIG when set.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. `--set metric.delta=0.4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic instance, portfolio, or named fixture plus its manifest.
    Generate {
        #[command(subcommand)]
        what: GenerateWhat,
    },
    /// Functional substitution scores of one function.
    Fss {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        function: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hard and soft redundancy quality of a portfolio.
    Arq {
        #[arg(long)]
        portfolio: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Long-form CSV of the kernel and structural-separation matrices.
        #[arg(long)]
        heatmap: Option<PathBuf>,
    },
    /// Cross-layer diversity index, optionally after failing some elements.
    Mldi {
        #[arg(long)]
        instance: PathBuf,
        /// Comma-separated element ids to fail, e.g. `e1,e4`.
        #[arg(long, value_delimiter = ',')]
        fail: Vec<ElementId>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Targeted-removal sweep over the configured removal fractions.
    Sweep(SweepArgs),
    /// Concatenate sweep tables into one.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum GenerateWhat {
    Instance {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        timestamp: Option<String>,
    },
    Portfolio {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        timestamp: Option<String>,
    },
    /// One of: redundancy, collapse, all-clones, layered, propagation, arq-five.
    Fixture {
        name: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        timestamp: Option<String>,
    },
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// `fss:<function>`, `arq`, or `mldi`; overrides the config.
    #[arg(long)]
    target: Option<Target>,
    /// Instance file for fss/mldi targets; generated from [generator] if absent.
    #[arg(long, conflicts_with = "portfolio")]
    instance: Option<PathBuf>,
    /// Portfolio file for the arq target; generated from [portfolio] if absent.
    #[arg(long)]
    portfolio: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Replay a previous run: its config, seed and timestamp are reused.
    #[arg(long, conflicts_with_all = ["target", "trials", "seed", "timestamp"])]
    manifest: Option<PathBuf>,
    #[arg(long)]
    timestamp: Option<String>,
    /// Output prefix; writes <prefix>.csv, .json, .manifest.json.
    #[arg(long)]
    out_prefix: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("degen: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let load = || io::load_config(cli.config.as_deref(), &cli.overrides);
    match cli.command {
        Command::Generate { what } => generate(what, load()?),
        Command::Fss {
            instance,
            function,
            out,
        } => {
            let loaded = load()?;
            let inst = io::load_instance(&instance)?;
            let metric = metric_for(&loaded, &inst);
            let report = fss_weighted(&inst, &FunctionId::new(function), &metric)?;
            println!(
                "fss {}: n={} baseline={} weighted={} admissible={}/{}",
                report.function_id,
                report.n,
                report.baseline,
                report.weighted,
                report.admissible_count,
                report.n
            );
            let out = out.unwrap_or_else(|| derived(&instance, "fss.json"));
            io::write_json(
                &out,
                &serde_json::json!({ "metric": metric, "report": report }),
            )
        }
        Command::Arq {
            portfolio,
            out,
            heatmap,
        } => {
            let metric = load()?.config.metric;
            metric.validate()?;
            let p = io::load_portfolio(&portfolio)?;
            let report = arq_report(&p.algorithms, metric.epsilon, metric.delta, metric.sigma)?;
            println!(
                "arq {}: n={} hard={} soft={}",
                p.name,
                p.len(),
                report.hard,
                report.soft
            );
            if let Some(h) = heatmap {
                let mut cells = io::matrix_cells("kernel", &report.ids, &report.kernel);
                cells.extend(io::matrix_cells(
                    "separation",
                    &report.ids,
                    &report.struct_dissim,
                ));
                io::write_text(&h, &io::heatmap_csv(&cells)?)?;
            }
            let out = out.unwrap_or_else(|| derived(&portfolio, "arq.json"));
            io::write_json(
                &out,
                &serde_json::json!({ "metric": metric, "report": report }),
            )
        }
        Command::Mldi {
            instance,
            fail,
            out,
        } => {
            let loaded = load()?;
            let inst = io::load_instance(&instance)?;
            let metric = metric_for(&loaded, &inst);
            let failed: BTreeSet<ElementId> = fail.into_iter().collect();
            let state = propagate_failures(&inst, &failed)?;
            let report = mldi_report(&inst, &state, &metric)?;
            println!(
                "mldi: active={}/{} baseline={} enhanced={}",
                state.active_count(),
                inst.len(),
                report.baseline,
                report.enhanced
            );
            for l in &report.per_layer {
                println!(
                    "  {}: distinct={}/{} tau={} entropy={}",
                    l.layer, l.distinct, l.size, l.tau, l.entropy_norm
                );
            }
            let out = out.unwrap_or_else(|| derived(&instance, "mldi.json"));
            io::write_json(
                &out,
                &serde_json::json!({ "metric": metric, "failed": failed, "report": report }),
            )
        }
        Command::Sweep(args) => sweep(args, load),
        Command::Report { inputs, out } => {
            let (table, rows) = io::merge_sweep_tables(&inputs)?;
            match out {
                Some(p) => {
                    io::write_text(&p, &table)?;
                    eprintln!("wrote {} rows to {}", rows, p.display());
                }
                None => print!("{table}"),
            }
            Ok(())
        }
    }
}

/// Metric config with `m` taken from the instance's catalog unless set.
fn metric_for(loaded: &LoadedConfig, inst: &DeploymentInstance) -> degen::model::MetricConfig {
    let mut metric = loaded.config.metric.clone();
    if !loaded.is_set("metric.m") {
        metric.m = inst.functions().len();
    }
    metric
}

fn derived(input: &Path, suffix: &str) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    input.with_file_name(format!("{stem}.{suffix}"))
}

fn generate(what: GenerateWhat, loaded: LoadedConfig) -> Result<()> {
    let mut config = loaded.config;
    let (out, manifest) = match what {
        GenerateWhat::Instance {
            out,
            seed,
            timestamp,
        } => {
            if seed.is_some() {
                config.seed = seed;
            }
            let manifest = RunManifest::new("generate instance", config, timestamp);
            let inst = generate_instance(&manifest.config.generator)?;
            io::save_instance(&out, &inst)?;
            println!(
                "instance: {} elements, {} functions",
                inst.len(),
                inst.functions().len()
            );
            (out, manifest)
        }
        GenerateWhat::Portfolio {
            out,
            seed,
            timestamp,
        } => {
            if seed.is_some() {
                config.seed = seed;
            }
            let manifest = RunManifest::new("generate portfolio", config, timestamp);
            let p = generate_portfolio(&manifest.config.portfolio)?;
            io::save_portfolio(&out, &p)?;
            println!("portfolio {}: {} algorithms", p.name, p.len());
            (out, manifest)
        }
        GenerateWhat::Fixture {
            name,
            out,
            timestamp,
        } => {
            let fixture = fixtures::by_name(&name).ok_or_else(|| {
                Error::validation(format!(
                    "unknown fixture `{name}` (one of {})",
                    fixtures::FIXTURE_NAMES.join(", ")
                ))
            })?;
            match fixture {
                Fixture::Instance(inst) => io::save_instance(&out, &inst)?,
                Fixture::Portfolio(p) => io::save_portfolio(&out, &p)?,
            }
            println!("fixture {name}");
            (
                out,
                RunManifest::new(&format!("generate fixture {name}"), config, timestamp),
            )
        }
    };
    io::write_json(&io::manifest_path(&out), &manifest)
}

fn sweep(args: SweepArgs, load: impl Fn() -> Result<LoadedConfig>) -> Result<()> {
    let (mut manifest, explicit_m) = match &args.manifest {
        Some(path) => {
            let m: RunManifest = io::read_json(path, "manifest")?;
            (m, true)
        }
        None => {
            let loaded = load()?;
            let explicit_m = loaded.is_set("metric.m");
            let mut config: RunConfig = loaded.config;
            if let Some(t) = args.target.clone() {
                config.sweep.target = t;
            }
            if let Some(n) = args.trials {
                config.sweep.trials = n;
            }
            if args.seed.is_some() {
                config.seed = args.seed;
            }
            (
                RunManifest::new("sweep", config, args.timestamp.clone()),
                explicit_m,
            )
        }
    };

    let input_path = match (&args.instance, &args.portfolio) {
        (Some(p), _) | (None, Some(p)) => Some(p.clone()),
        (None, None) => manifest.input.as_ref().map(|i| i.path.clone()),
    };
    if let Some(p) = &input_path {
        let fresh = io::input_ref(p)?;
        if let (Some(_), Some(recorded)) = (&args.manifest, &manifest.input) {
            if recorded.sha256 != fresh.sha256 {
                return Err(Error::validation(format!(
                    "{} differs from the input recorded in the manifest",
                    p.display()
                )));
            }
        }
        manifest.input = Some(fresh);
    }

    let config = &mut manifest.config;
    let result = match &config.sweep.target {
        Target::Arq => {
            let p: Portfolio = match &input_path {
                Some(path) => io::load_portfolio(path)?,
                None => generate_portfolio(&config.portfolio)?,
            };
            run_sweep(Subject::Portfolio(&p), &config.sweep, &config.metric)?
        }
        _ => {
            let inst = match &input_path {
                Some(path) => io::load_instance(path)?,
                None => generate_instance(&config.generator)?,
            };
            if !explicit_m {
                config.metric.m = inst.functions().len();
            }
            run_sweep(Subject::Instance(&inst), &config.sweep, &config.metric)?
        }
    };
    let outputs = io::write_sweep(&args.out_prefix, &manifest, &result)?;
    for s in &result.summary {
        println!(
            "{} {} q={} mean={} std={} trials={}",
            s.metric, result.target, s.q, s.mean, s.std, s.trials
        );
    }
    eprintln!(
        "wrote {} and {}",
        outputs.csv.display(),
        outputs.json.display()
    );
    Ok(())
}
