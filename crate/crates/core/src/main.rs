use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use droo_core::channel::TopologyDoc;
use droo_core::harness::{self, KModeName, OracleKind, RunConfig, ScenarioKind};
use droo_core::policy::Sampling;
use droo_core::quantizer::QuantizerKind;
use droo_core::{Error, Result, Topology};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KModeArg {
    Fixed,
    Adaptive,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum QuantizerArg {
    Op,
    Knn,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OracleArg {
    Exhaustive,
    Cd,
    None,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SamplingArg {
    WithReplacement,
    WithoutReplacement,
}

/// Online binary offloading experiments.
///
/// Flags override values from `--config`. Single-run scenarios write the
/// CSV at `--out` and the resolved config next to it as JSON; sweeps
/// (quantizer-sweep, delta-sweep, hyper-sweep, rate-compare) treat `--out`
/// as a directory.
#[derive(Debug, Parser)]
#[command(name = "droo", version)]
struct Cli {
    /// baseline, alt-weights, surge, onoff, quantizer-sweep, delta-sweep,
    /// hyper-sweep or rate-compare
    #[arg(long)]
    scenario: Option<ScenarioKind>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    frames: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    k_mode: Option<KModeArg>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    delta: Option<u64>,
    #[arg(long, value_enum)]
    quantizer: Option<QuantizerArg>,
    #[arg(long, value_enum)]
    oracle: Option<OracleArg>,
    #[arg(long)]
    out: PathBuf,
    /// JSON run config; a previous run's sidecar reproduces that run.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    threads: Option<usize>,
    /// Write 0 in the wall_us column.
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    memory_size: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    train_interval: Option<u64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long, value_enum)]
    sampling: Option<SamplingArg>,
    /// Topology document to use instead of a seeded one.
    #[arg(long)]
    topology: Option<PathBuf>,
    /// Write the run's topology document here.
    #[arg(long)]
    save_topology: Option<PathBuf>,
    /// Start from this policy snapshot.
    #[arg(long)]
    load_policy: Option<PathBuf>,
    /// Write the final policy snapshot here (single-run scenarios).
    #[arg(long)]
    save_policy: Option<PathBuf>,
    /// Write every frame's action and allocation as JSON lines.
    #[arg(long)]
    dump: Option<PathBuf>,
}

impl Cli {
    fn config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.scenario {
            if s != c.scenario {
                c.schedule = None;
            }
            c.scenario = s;
        }
        if let Some(n) = self.n {
            if n != c.n {
                // Per-device data no longer applies.
                c.system = None;
                c.distances = None;
                c.schedule = None;
                c.k = None;
            }
            c.n = n;
        }
        if let Some(f) = self.frames {
            if f != c.frames {
                c.schedule = None;
            }
            c.frames = f;
        }
        if let Some(s) = self.seed {
            if s != c.seed && self.topology.is_none() {
                c.distances = None;
                c.schedule = None;
            }
            c.seed = s;
        }
        if let Some(m) = self.k_mode {
            c.k_mode = match m {
                KModeArg::Fixed => KModeName::Fixed,
                KModeArg::Adaptive => KModeName::Adaptive,
            };
        }
        if self.k.is_some() {
            c.k = self.k;
        }
        if let Some(d) = self.delta {
            c.delta = d;
        }
        if let Some(q) = self.quantizer {
            c.quantizer = match q {
                QuantizerArg::Op => QuantizerKind::OrderPreserving,
                QuantizerArg::Knn => QuantizerKind::Knn,
            };
        }
        if let Some(o) = self.oracle {
            c.oracle = Some(match o {
                OracleArg::Exhaustive => OracleKind::Exhaustive,
                OracleArg::Cd => OracleKind::Cd,
                OracleArg::None => OracleKind::None,
            });
        }
        if let Some(t) = self.threads {
            c.threads = t;
        }
        if self.no_timing {
            c.record_timing = false;
        }
        if let Some(v) = self.memory_size {
            c.train.memory_size = v;
        }
        if let Some(v) = self.batch_size {
            c.train.batch_size = v;
        }
        if let Some(v) = self.train_interval {
            c.train.train_interval = v;
        }
        if let Some(v) = self.learning_rate {
            c.train.learning_rate = v;
        }
        if let Some(s) = self.sampling {
            c.train.sampling = match s {
                SamplingArg::WithReplacement => Sampling::WithReplacement,
                SamplingArg::WithoutReplacement => Sampling::WithoutReplacement,
            };
        }
        if let Some(path) = &self.topology {
            let doc = TopologyDoc::load(path)?;
            if self.n.is_some_and(|n| n != doc.distances.len()) {
                return Err(Error::Config(format!(
                    "--n {} disagrees with the {} devices in {}",
                    c.n,
                    doc.distances.len(),
                    path.display()
                )));
            }
            if c.n != doc.distances.len() {
                c.schedule = None;
                c.k = None;
            }
            c.n = doc.distances.len();
            let mut system = c
                .system
                .take()
                .filter(|s| s.n == c.n)
                .unwrap_or_else(|| droo_core::SystemParams::reference(c.n));
            system.weights = doc.weights;
            c.system = Some(system);
            c.distances = Some(doc.distances);
        }
        if self.load_policy.is_some() {
            c.initial_policy = self.load_policy.clone();
        }
        Ok(c)
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.config()?;
    let single = !cfg.scenario.is_sweep();
    let wants_single = cli.save_policy.is_some() || cli.dump.is_some() || cli.save_topology.is_some();
    if !single && wants_single {
        return Err(Error::Config(
            "--save-policy, --save-topology and --dump apply to single-run scenarios only".into(),
        ));
    }
    if !single {
        for path in harness::run_scenario(&cfg, &cli.out)? {
            println!("{}", path.display());
        }
        return Ok(());
    }
    let cfg = cfg.resolve()?;
    let run = harness::run_droo(&cfg, None)?;
    harness::write_run(&cfg, &run.rows, &cli.out)?;
    println!("{}", cli.out.display());
    if let Some(path) = &cli.save_policy {
        run.agent.net().save(path)?;
    }
    if let Some(path) = &cli.save_topology {
        let system = cfg.system.as_ref().expect("resolved");
        let topology = Topology::from_distances(cfg.distances.clone().expect("resolved"), system)?;
        TopologyDoc::new(&topology, cfg.seed, &system.weights).save(path)?;
    }
    if let Some(path) = &cli.dump {
        let mut text = String::new();
        for f in &run.frames {
            text.push_str(&serde_json::to_string(f).map_err(|e| Error::json("frame dump", e))?);
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    let hats: Vec<f64> = run.rows.iter().filter_map(|r| r.q_hat).collect();
    if !hats.is_empty() {
        let tail = &hats[hats.len().saturating_sub(1000)..];
        eprintln!(
            "mean normalized rate over the last {} frames: {:.5}",
            tail.len(),
            tail.iter().sum::<f64>() / tail.len() as f64
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
