//! Command-line front end: `train`, `eval`, `vizmap` and `vocab`.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags or values),
//! 2 on runtime errors (I/O, parse, incompatible checkpoints).

use clap::{Parser, Subcommand};
use crosstalk_core::checkpoint::Checkpoint;
use crosstalk_core::config::ExperimentConfig;
use crosstalk_core::eval::{metrics, run_eval, vocab_histogram};
use crosstalk_core::maddpg::Trainer;
use crosstalk_core::polmap::{render_map, sweep_policy_map};
use crosstalk_core::world::{goal_block, spawn, Color, Shape, TaskConfig};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "crosstalk", version, about = "Two complementary-modality agents learning a discrete communication protocol on cooperative navigation tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a pair of agents from a JSON config file.
    Train {
        /// Experiment config (flat JSON).
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Final checkpoint path; the reward curve goes to
        /// `<out stem>.curve.csv` and periodic checkpoints to
        /// `<out stem>.ep<N>.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint with deterministic policies over N episodes.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        /// Number of test episodes.
        #[arg(long)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Metrics report path (JSON); a one-line CSV lands next to it.
        #[arg(long)]
        report: PathBuf,
    },
    /// Sweep one agent's policy over a position grid and render the map.
    Vizmap {
        #[arg(long)]
        ckpt: PathBuf,
        /// Which agent to sweep: `color` or `shape`.
        #[arg(long)]
        agent: String,
        /// Fixed received word as a bit string, e.g. `1000`.
        #[arg(long)]
        word: String,
        /// Goal property (red, green, blue, triangle, circle, square).
        /// Defaults to the goal the spawned episode would present.
        #[arg(long)]
        goal: Option<String>,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        /// Seed of the landmark configuration to sweep against.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix; writes `<out>.ppm` and `<out>.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Report per-agent word usage over N evaluation episodes.
    Vocab {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: PathBuf,
    },
}

enum AppError {
    Usage(String),
    Runtime(String),
}

fn runtime<E: std::fmt::Display>(e: E) -> AppError {
    AppError::Runtime(e.to_string())
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{e}");
            return 1;
        }
    };
    let result = match cli.command {
        Command::Train { config, seed, out } => cmd_train(&config, seed, &out),
        Command::Eval { ckpt, episodes, seed, report } => cmd_eval(&ckpt, episodes, seed, &report),
        Command::Vizmap { ckpt, agent, word, goal, grid, seed, out } => {
            cmd_vizmap(&ckpt, &agent, &word, goal.as_deref(), grid, seed, &out)
        }
        Command::Vocab { ckpt, episodes, seed, report } => {
            cmd_vocab(&ckpt, episodes, seed, &report)
        }
    };
    match result {
        Ok(()) => 0,
        Err(AppError::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(AppError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn write_file(path: &Path, data: &[u8]) -> Result<(), AppError> {
    std::fs::write(path, data).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

fn cmd_train(config_path: &Path, seed: Option<u64>, out: &Path) -> Result<(), AppError> {
    let mut config = ExperimentConfig::from_file(config_path).map_err(runtime)?;
    if let Some(s) = seed {
        config.seed = Some(s);
    }
    let task = config.task_config().map_err(runtime)?;
    let train_cfg = config.train_config().map_err(runtime)?;
    let interval = config.resolved().checkpoint_interval.unwrap_or(5000);

    let mut trainer = Trainer::new(task, train_cfg).map_err(runtime)?;
    let total = trainer.cfg.episodes;
    while trainer.episodes_done < total {
        trainer.run_episode().map_err(runtime)?;
        let done = trainer.episodes_done;
        if done % 1000 == 0 {
            let recent = &trainer.curve[done.saturating_sub(100)..];
            let mean = recent.iter().sum::<f64>() / recent.len() as f64;
            eprintln!("episode {done}/{total}, mean reward (last 100): {mean:.3}");
        }
        if interval > 0 && done % interval == 0 && done < total {
            let path = sibling(out, &format!("ep{done}.json"));
            Checkpoint::from_trainer(&trainer, &config).save(&path).map_err(runtime)?;
        }
    }

    Checkpoint::from_trainer(&trainer, &config).save(out).map_err(runtime)?;

    let mut curve = String::from("episode,reward\n");
    for (i, r) in trainer.curve.iter().enumerate() {
        let _ = writeln!(curve, "{i},{r}");
    }
    let curve_path = sibling(out, "curve.csv");
    write_file(&curve_path, curve.as_bytes())?;
    println!(
        "trained {total} episodes; checkpoint: {}; curve: {}",
        out.display(),
        curve_path.display()
    );
    Ok(())
}

fn cmd_eval(ckpt_path: &Path, episodes: usize, seed: u64, report: &Path) -> Result<(), AppError> {
    if episodes == 0 {
        return Err(AppError::Usage("--episodes must be at least 1".into()));
    }
    let ckpt = Checkpoint::load(ckpt_path).map_err(runtime)?;
    let task = ckpt.task_config().map_err(runtime)?;
    let stats = run_eval(&ckpt, &task, episodes, seed).map_err(runtime)?;
    let metrics_report = metrics(&stats, task.task).map_err(runtime)?;

    let json = serde_json::to_string_pretty(&metrics_report).map_err(runtime)?;
    write_file(report, json.as_bytes())?;

    let reward_names: Vec<&str> = [
        (task.rewards.distance, "distance"),
        (task.rewards.instant, "instant"),
        (task.rewards.time, "time"),
    ]
    .iter()
    .filter_map(|&(on, name)| on.then_some(name))
    .collect();
    let csv = format!(
        "task,k,rewards,N,M1,M2\n{:?},{},{},{},{},{}\n",
        task.task,
        task.message_bits,
        reward_names.join("+"),
        metrics_report.episodes,
        metrics_report.m1,
        metrics_report.m2
    );
    write_file(&sibling(report, "csv"), csv.as_bytes())?;

    println!(
        "N = {}: M1 = {:.4}, M2 = {:.4}",
        metrics_report.episodes, metrics_report.m1, metrics_report.m2
    );
    Ok(())
}

fn parse_word(word: &str, k: usize) -> Result<Vec<u8>, AppError> {
    let bits: Vec<u8> = word
        .chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(AppError::Usage(format!(
                "--word must be a bit string of 0s and 1s, found '{other}'"
            ))),
        })
        .collect::<Result<_, _>>()?;
    if bits.len() != k {
        return Err(AppError::Usage(format!(
            "--word has {} bits but the checkpoint uses k = {k}",
            bits.len()
        )));
    }
    Ok(bits)
}

/// Property name to a 3-way one-hot zero-padded to the goal block length.
fn parse_goal(name: &str, landmarks: usize) -> Result<Vec<f64>, AppError> {
    let color = Color::ALL.iter().position(|c| format!("{c:?}").to_lowercase() == name);
    let shape = Shape::ALL.iter().position(|s| format!("{s:?}").to_lowercase() == name);
    let index = color.or(shape).ok_or_else(|| {
        AppError::Usage(format!(
            "--goal must be one of red, green, blue, triangle, circle, square; got '{name}'"
        ))
    })?;
    let mut block = vec![0.0; landmarks];
    block[index] = 1.0;
    Ok(block)
}

fn parse_agent(agent: &str) -> Result<usize, AppError> {
    match agent {
        "color" => Ok(0),
        "shape" => Ok(1),
        other => Err(AppError::Usage(format!(
            "--agent must be 'color' or 'shape', got '{other}'"
        ))),
    }
}

fn cmd_vizmap(
    ckpt_path: &Path,
    agent: &str,
    word: &str,
    goal: Option<&str>,
    grid: usize,
    seed: u64,
    out: &Path,
) -> Result<(), AppError> {
    if grid < 2 {
        return Err(AppError::Usage("--grid must be at least 2".into()));
    }
    let ckpt = Checkpoint::load(ckpt_path).map_err(runtime)?;
    let task: TaskConfig = ckpt.task_config().map_err(runtime)?;
    let agent = parse_agent(agent)?;
    let word = parse_word(word, task.message_bits)?;

    let state = spawn(&task, seed).map_err(runtime)?;
    let goal = match goal {
        Some(name) => parse_goal(name, task.landmarks)?,
        None => goal_block(&state, agent, &task),
    };
    let actor = ckpt.actor_net(agent).map_err(runtime)?;
    let map = sweep_policy_map(&actor, &task, agent, &word, &state.landmarks, &goal, grid)
        .map_err(runtime)?;
    let (ppm, csv) = render_map(&map, out).map_err(runtime)?;
    println!("wrote {} and {}", ppm.display(), csv.display());
    Ok(())
}

#[derive(Serialize)]
struct VocabReport {
    #[serde(rename = "N")]
    episodes: usize,
    distinct_words: [usize; 2],
    word_histogram: [BTreeMap<String, u64>; 2],
}

fn cmd_vocab(ckpt_path: &Path, episodes: usize, seed: u64, report: &Path) -> Result<(), AppError> {
    if episodes == 0 {
        return Err(AppError::Usage("--episodes must be at least 1".into()));
    }
    let ckpt = Checkpoint::load(ckpt_path).map_err(runtime)?;
    let task = ckpt.task_config().map_err(runtime)?;
    let stats = run_eval(&ckpt, &task, episodes, seed).map_err(runtime)?;
    let (word_histogram, distinct_words) = vocab_histogram(&stats);
    let out = VocabReport { episodes, distinct_words, word_histogram };
    let json = serde_json::to_string_pretty(&out).map_err(runtime)?;
    write_file(report, json.as_bytes())?;
    println!(
        "distinct words: color agent {}, shape agent {}",
        out.distinct_words[0], out.distinct_words[1]
    );
    Ok(())
}
