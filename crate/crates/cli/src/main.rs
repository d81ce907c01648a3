//! Command-line surface: controller synthesis, agent training, scenario
//! evaluation, baseline comparison tables, and a gradient self-check.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mbcadrt::config::RunConfig;
use mbcadrt::eval::{
    export, metrics_csv, run_comparison, scenario_by_name, scenario_catalog, CheckpointStore,
    RunResult, Variant,
};
use mbcadrt::lmdp::{log_to_csv, train, Scenario, OBS_DIM};
use mbcadrt::mbc::{synthesize, ControllerSS};
use mbcadrt::nn::{grad_check, Network, NetworkSpec, OutputActivation, RecurrentKind};
use mbcadrt::plant::linearize_nominal;
use mbcadrt::{Matrix, Result, SeededRng};

#[derive(Parser)]
#[command(name = "mbcadrt", about = "Hybrid model-based + learned control workbench")]
struct Cli {
    /// Run configuration file (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for checkpoints, logs, tables, and trajectories.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the nominal linear controller and write it to a file.
    Synthesize,
    /// Train one agent variant and write its checkpoints and training log.
    Train {
        /// Training seed; default takes the first seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Variant to train: proposed, only-dr, or mlp.
        #[arg(long, default_value = "proposed")]
        variant: String,
        /// Episode-count override.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Run one scenario for the chosen variants and export the results.
    Evaluate {
        #[arg(long)]
        scenario: String,
        /// Repeatable; defaults to the checkpoint-free baselines.
        #[arg(long = "variant")]
        variants: Vec<String>,
        /// Restrict checkpoint seeds; defaults to the config seed list.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a metrics table across variants (and optionally export files).
    Compare {
        /// Scenario name; omitted means the full catalog.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long = "variant")]
        variants: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write metrics and trajectory files to the output directory.
        #[arg(long)]
        write: bool,
    },
    /// Finite-difference check of the network gradients.
    Gradcheck {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn controller_for(config: &RunConfig) -> Result<ControllerSS> {
    let nominal = linearize_nominal(&config.plant, config.env.dt);
    synthesize(&nominal, &config.synthesis_spec(&nominal))
}

fn parse_variants(names: &[String], default: &[Variant]) -> Result<Vec<Variant>> {
    if names.is_empty() {
        return Ok(default.to_vec());
    }
    names.iter().map(|n| n.parse()).collect()
}

fn seeds_for(config: &RunConfig, seed: Option<u64>) -> Vec<u64> {
    match seed {
        Some(s) => vec![s],
        None => config.seeds.clone(),
    }
}

fn print_metrics(results: &[RunResult]) {
    print!("{}", metrics_csv(results));
}

fn cmd_synthesize(config: &RunConfig, out: &PathBuf) -> Result<()> {
    let ctrl = controller_for(config)?;
    std::fs::create_dir_all(out)?;
    let path = out.join("controller.txt");
    ctrl.to_doc().save(&path)?;
    println!("controller ({} states) -> {}", ctrl.state_dim(), path.display());
    Ok(())
}

fn cmd_train(
    config: &RunConfig,
    out: &PathBuf,
    seed: Option<u64>,
    variant: &str,
    episodes: Option<usize>,
) -> Result<()> {
    let variant: Variant = variant.parse()?;
    if !variant.needs_checkpoint() {
        return Err(mbcadrt::Error::Config(format!(
            "variant {variant} has nothing to train"
        )));
    }
    let seed = seed.or_else(|| config.seeds.first().copied()).unwrap_or(1);
    let mut setup = config.train_setup(seed);
    setup.only_dr = variant == Variant::OnlyDr;
    setup.mlp = variant == Variant::Mlp;
    if let Some(n) = episodes {
        setup.episodes = n;
    }
    let ctrl = controller_for(config)?;
    let (nets, logs) = train(&setup, &ctrl)?;

    std::fs::create_dir_all(out)?;
    let store = CheckpointStore::new(out.clone());
    let actor_path = store.actor_path(variant, setup.scenario, seed);
    nets.actor.to_doc("actor").save(&actor_path)?;
    let critic_path = out.join(
        actor_path
            .file_name()
            .unwrap()
            .to_string_lossy()
            .replacen("actor", "critic", 1),
    );
    nets.critic.to_doc("critic").save(&critic_path)?;
    let scen = match setup.scenario {
        Scenario::S1 => "s1",
        Scenario::S2 => "s2",
    };
    let log_path = out.join(format!("train-{variant}-{scen}-seed{seed}.csv"));
    std::fs::write(&log_path, log_to_csv(&logs))?;
    let last = logs.last().map(|l| l.cumulative_reward).unwrap_or(f64::NAN);
    println!(
        "trained {variant} ({scen}, seed {seed}, {} episodes): final return {last:.4}",
        logs.len()
    );
    println!("actor -> {}", actor_path.display());
    Ok(())
}

fn cmd_evaluate(
    config: &RunConfig,
    out: &PathBuf,
    scenario: &str,
    variants: &[String],
    seed: Option<u64>,
) -> Result<()> {
    let scenario = scenario_by_name(scenario)?;
    let variants = parse_variants(variants, &[Variant::OnlyMbc, Variant::OpenLoop])?;
    let seeds = seeds_for(config, seed);
    let ctrl = controller_for(config)?;
    let store = CheckpointStore::new(out.clone());
    let results = run_comparison(&scenario, &variants, &seeds, config, &ctrl, &store)?;
    export(&results, out)?;
    print_metrics(&results);
    Ok(())
}

fn cmd_compare(
    config: &RunConfig,
    out: &PathBuf,
    scenario: &Option<String>,
    variants: &[String],
    seed: Option<u64>,
    write: bool,
) -> Result<()> {
    let scenarios = match scenario {
        Some(name) => vec![scenario_by_name(name)?],
        None => scenario_catalog(),
    };
    let variants = parse_variants(variants, &Variant::ALL)?;
    let seeds = seeds_for(config, seed);
    let ctrl = controller_for(config)?;
    let store = CheckpointStore::new(out.clone());
    let mut results = Vec::new();
    for s in &scenarios {
        results.extend(run_comparison(s, &variants, &seeds, config, &ctrl, &store)?);
    }
    print_metrics(&results);
    if write {
        export(&results, out)?;
    }
    Ok(())
}

fn cmd_gradcheck(config: &RunConfig, seed: u64) -> Result<ExitCode> {
    let mut rng = SeededRng::new(seed);
    let mut worst: f64 = 0.0;
    for recurrent in [RecurrentKind::Lstm, RecurrentKind::None] {
        let net = Network::new(
            NetworkSpec {
                input_dim: OBS_DIM,
                hidden: config.ddpg.hidden,
                output_dim: 1,
                recurrent,
                output: OutputActivation::TanhScaled(config.env.u_max),
            },
            &mut rng,
        )?;
        let xs: Vec<Matrix> = (0..4)
            .map(|_| {
                Matrix::from_vec(
                    2,
                    OBS_DIM,
                    (0..2 * OBS_DIM).map(|_| rng.gaussian()).collect(),
                )
            })
            .collect();
        let err = grad_check(&net, &xs, 1e-5)?;
        let kind = match recurrent {
            RecurrentKind::Lstm => "recurrent",
            RecurrentKind::None => "feedforward",
        };
        println!("{kind}: max relative gradient error {err:.3e}");
        worst = worst.max(err);
    }
    if worst > 1e-4 {
        eprintln!("gradient check FAILED: {worst:.3e} > 1e-4");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let run = || -> Result<ExitCode> {
        match &cli.command {
            Command::Synthesize => cmd_synthesize(&config, &cli.out).map(|_| ExitCode::SUCCESS),
            Command::Train {
                seed,
                variant,
                episodes,
            } => cmd_train(&config, &cli.out, *seed, variant, *episodes)
                .map(|_| ExitCode::SUCCESS),
            Command::Evaluate {
                scenario,
                variants,
                seed,
            } => cmd_evaluate(&config, &cli.out, scenario, variants, *seed)
                .map(|_| ExitCode::SUCCESS),
            Command::Compare {
                scenario,
                variants,
                seed,
                write,
            } => cmd_compare(&config, &cli.out, scenario, variants, *seed, *write)
                .map(|_| ExitCode::SUCCESS),
            Command::Gradcheck { seed } => cmd_gradcheck(&config, *seed),
        }
    };
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
