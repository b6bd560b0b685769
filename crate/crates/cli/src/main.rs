use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use mann_core::config::ExperimentConfig;
use mann_core::episodes::{sample_classification_episode, write_episode_dump, Split};
use mann_core::gradcheck::{check_model_gradients, GradCheckConfig};
use mann_core::harness::{self, EvalSummary};
use mann_core::metrics::INSTANCES;
use mann_core::MannError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERIC: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "mann",
    version,
    about = "Memory-augmented neural network experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write metrics and checkpoints.
    Train(Common),
    /// Evaluate a checkpoint on held-out classes.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Run a named experiment suite.
    Suite {
        /// table1, table2, persistent, curriculum, regression1d or regression_nd
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// Dump sampled episodes as CSV.
    InspectEpisode {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, value_enum, default_value = "train")]
        split: SplitArg,
    },
    /// Check model gradients against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// JSON file with configuration fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Omniglot root; switches synthetic tasks to Omniglot.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Start from the desktop-sized preset.
    #[arg(long)]
    desk_scale: bool,
    #[command(flatten)]
    fields: FieldArgs,
}

#[derive(Args, Debug, Clone, Default)]
struct FieldArgs {
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    architecture: Option<String>,
    #[arg(long)]
    controller: Option<String>,
    #[arg(long)]
    hidden_size: Option<usize>,
    #[arg(long)]
    memory_slots: Option<usize>,
    #[arg(long)]
    slot_width: Option<usize>,
    #[arg(long)]
    read_heads: Option<usize>,
    #[arg(long)]
    usage_decay: Option<f64>,
    #[arg(long)]
    num_classes: Option<usize>,
    #[arg(long)]
    episode_length: Option<usize>,
    #[arg(long)]
    label_width: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    max_learning_rate: Option<f64>,
    #[arg(long)]
    rmsprop_decay: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    persistent_memory: Option<bool>,
    #[arg(long)]
    curriculum: Option<bool>,
    #[arg(long)]
    curriculum_start_max: Option<usize>,
    #[arg(long)]
    curriculum_step: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    test_episodes: Option<usize>,
    #[arg(long)]
    test_num_classes: Option<usize>,
    #[arg(long)]
    train_classes: Option<usize>,
    #[arg(long)]
    synth_classes: Option<usize>,
    #[arg(long)]
    synth_samples: Option<usize>,
}

impl FieldArgs {
    fn overrides(&self) -> Map<String, Value> {
        let mut m = Map::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("task", self.task.as_ref().map(|v| json!(v)));
        put("architecture", self.architecture.as_ref().map(|v| json!(v)));
        put("controller", self.controller.as_ref().map(|v| json!(v)));
        put("hidden_size", self.hidden_size.map(|v| json!(v)));
        put("memory_slots", self.memory_slots.map(|v| json!(v)));
        put("slot_width", self.slot_width.map(|v| json!(v)));
        put("read_heads", self.read_heads.map(|v| json!(v)));
        put("usage_decay", self.usage_decay.map(|v| json!(v)));
        put("num_classes", self.num_classes.map(|v| json!(v)));
        put("episode_length", self.episode_length.map(|v| json!(v)));
        put("label_width", self.label_width.map(|v| json!(v)));
        put("batch_size", self.batch_size.map(|v| json!(v)));
        put("episodes", self.episodes.map(|v| json!(v)));
        put("learning_rate", self.learning_rate.map(|v| json!(v)));
        put(
            "max_learning_rate",
            self.max_learning_rate.map(|v| json!(v)),
        );
        put("rmsprop_decay", self.rmsprop_decay.map(|v| json!(v)));
        put("momentum", self.momentum.map(|v| json!(v)));
        put("epsilon", self.epsilon.map(|v| json!(v)));
        put(
            "persistent_memory",
            self.persistent_memory.map(|v| json!(v)),
        );
        put("curriculum", self.curriculum.map(|v| json!(v)));
        put(
            "curriculum_start_max",
            self.curriculum_start_max.map(|v| json!(v)),
        );
        put("curriculum_step", self.curriculum_step.map(|v| json!(v)));
        put("eval_every", self.eval_every.map(|v| json!(v)));
        put("test_episodes", self.test_episodes.map(|v| json!(v)));
        put("test_num_classes", self.test_num_classes.map(|v| json!(v)));
        put("train_classes", self.train_classes.map(|v| json!(v)));
        put("synth_classes", self.synth_classes.map(|v| json!(v)));
        put("synth_samples", self.synth_samples.map(|v| json!(v)));
        m
    }
}

/// Defaults (or desk preset) < config file < flags.
fn resolve_config(common: &Common) -> anyhow::Result<ExperimentConfig> {
    let base = match &common.config {
        Some(path) => ExperimentConfig::load(path, common.desk_scale)
            .with_context(|| format!("reading {}", path.display()))?,
        None if common.desk_scale => ExperimentConfig::desk_scale(),
        None => ExperimentConfig::default(),
    };
    let mut value = serde_json::to_value(base)?;
    let fields = value.as_object_mut().expect("config is an object");
    for (k, v) in common.fields.overrides() {
        fields.insert(k, v);
    }
    if let Some(seed) = common.seed {
        fields.insert("seed".into(), json!(seed));
    }
    let mut config: ExperimentConfig =
        serde_json::from_value(value).context("invalid configuration")?;
    if let Some(root) = &common.dataset {
        config.dataset = Some(root.clone());
        config.task = config.task.with_source(true);
    }
    Ok(config)
}

fn out_dir(common: &Common, default: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn print_summary(s: &EvalSummary) {
    let cells: Vec<String> = INSTANCES
        .iter()
        .zip(s.accuracy)
        .map(|(k, a)| match a {
            Some(v) => format!("inst{k}={:.1}%", 100.0 * v),
            None => format!("inst{k}=--"),
        })
        .collect();
    println!(
        "test episodes {}: {} loss={:.4}",
        s.episodes,
        cells.join(" "),
        s.loss
    );
    for (t, (m, g)) in s.step_nll.iter().enumerate() {
        println!("step {:>3}: model NLL {m:.4}  GP NLL {g:.4}", t + 1);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(common) => {
            let config = resolve_config(&common)?;
            config.validate()?;
            let out = out_dir(&common, "runs/train");
            let data = harness::load_dataset(&config)?;
            let outcome = harness::train(&config, data.as_ref(), Some(&out))?;
            if let Some(s) = &outcome.final_eval {
                print_summary(s);
            }
            println!("wrote {}", out.display());
        }
        Command::Evaluate { common, checkpoint } => {
            let config = resolve_config(&common)?;
            config.validate()?;
            let summary = harness::evaluate_checkpoint(&checkpoint, &config)?;
            print_summary(&summary);
            if let Some(out) = &common.out {
                std::fs::create_dir_all(out)?;
                std::fs::write(
                    out.join("evaluation.json"),
                    serde_json::to_string_pretty(&summary)?,
                )?;
            }
        }
        Command::Suite { name, common } => {
            harness::check_suite_name(&name)?;
            let config = resolve_config(&common)?;
            let out = out_dir(&common, &format!("runs/{name}"));
            let report = harness::run_experiment_suite(&name, &config, &out)?;
            print!("{}", report.table);
            println!("wrote {}", out.display());
        }
        Command::InspectEpisode {
            common,
            count,
            split,
        } => {
            let config = resolve_config(&common)?;
            if config.regression_dim().is_some() {
                bail!("inspect-episode needs a classification task");
            }
            let data = harness::load_dataset(&config)?.expect("classification dataset");
            let set = data.split(match split {
                SplitArg::Train => Split::Train,
                SplitArg::Test => Split::Test,
            });
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let episodes = (0..count)
                .map(|_| {
                    sample_classification_episode(
                        set,
                        config.num_classes,
                        config.steps_for(config.num_classes),
                        config.label_mode(),
                        &mut rng,
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            let rows = episodes.iter().enumerate();
            match &common.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    let path = dir.join("episodes.csv");
                    write_episode_dump(std::fs::File::create(&path)?, rows)?;
                    println!("wrote {}", path.display());
                }
                None => write_episode_dump(std::io::stdout().lock(), rows)?,
            }
        }
        Command::Gradcheck { seed } => {
            let report = check_model_gradients(&GradCheckConfig {
                seed,
                ..GradCheckConfig::default()
            })?;
            println!(
                "checked {} scalars: {} failures, max relative error {:.3e}, max absolute error {:.3e}",
                report.checked, report.failures, report.max_relative_error, report.max_absolute_error
            );
            if !report.passed() {
                return Err(MannError::NumericFailure {
                    episode: 0,
                    batch_seed: seed,
                    detail: format!("gradient mismatch in {}", report.worst.unwrap_or_default()),
                }
                .into());
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<MannError>() {
        Some(MannError::NumericFailure { .. }) => EXIT_NUMERIC,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
