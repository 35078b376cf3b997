use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use rel3d::config::RunConfig;
use rel3d::eval::bench_relations;
use rel3d::neural::Checkpoint;
use rel3d::pairing::{all_unordered_pairs, build_pairs, PairingConfig, PairingMode};
use rel3d::pipeline::dataset::build_dataset;
use rel3d::pipeline::{derive_seed, evaluate, generate_scene, prepare_scene, run_ablation, train, Detector, Scene, Stream};
use rel3d::relations::relation_labels_batch;
use rel3d::Error;
use serde_json::json;

#[derive(Parser)]
#[command(name = "rel3d", version, about = "Pair-wise relation reasoning for 3D object detection on synthetic rooms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone, Default)]
struct ConfigArgs {
    /// TOML run configuration; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set epochs=20`. Repeatable; applied after --config.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        for kv in &self.overrides {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write seeded synthetic scenes as JSON files.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Dump relation labels for object pairs of scene files, one JSON record per pair.
    Relations {
        /// A scene file or a directory of them.
        #[arg(long)]
        scenes: PathBuf,
        /// Sample `k` partners per object instead of every unordered pair.
        #[arg(long)]
        mode: Option<PairingMode>,
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train a detector; writes model.ckpt, train_log.jsonl and config.toml.
    Train {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Evaluate a checkpoint on its held-out split or on scene files.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scenes: Option<PathBuf>,
        /// Per-class AP table instead of JSON.
        #[arg(long)]
        csv: bool,
    },
    /// Time scalar and batched spatial relation labeling.
    Bench {
        #[arg(long, default_value_t = 2048)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: bool,
    },
    /// Train baseline, RM-, RM(random) and RM(nearest) per seed and compare mAP.
    Ablate {
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        #[arg(long)]
        csv: bool,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn key_table() -> String {
    let rows = RunConfig::key_help();
    let width = rows.iter().map(|(k, _, _)| k.len()).max().unwrap_or(0);
    let dwidth = rows.iter().map(|(_, d, _)| d.len()).max().unwrap_or(0);
    let mut s = String::from("Config keys (--config FILE / --set KEY=VALUE), with defaults:\n");
    for (k, d, m) in rows {
        s.push_str(&format!("  {k:<width$}  {d:<dwidth$}  {m}\n"));
    }
    s.push_str("\nExit codes: 0 ok, 1 usage or config, 2 data, 3 numeric failure.");
    s
}

fn scene_files(path: &Path) -> Result<Vec<PathBuf>, Error> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidInput(format!("no .json scene files in {}", path.display())));
    }
    Ok(files)
}

fn read_scenes(path: &Path) -> Result<Vec<Scene>, Error> {
    scene_files(path)?.iter().map(|p| Scene::read(p)).collect()
}

fn run(command: Command) -> Result<(), Error> {
    let mut stdout = std::io::stdout().lock();
    match command {
        Command::Gen { n, seed, out, cfg } => {
            if n == 0 {
                return Err(Error::Config("--n must be at least 1".into()));
            }
            let cfg = cfg.load()?;
            fs::create_dir_all(&out)?;
            for i in 0..n as u64 {
                let scene = generate_scene(derive_seed(seed, Stream::Scene, i), &cfg.generator())?;
                scene.write(&out.join(format!("scene_{i:06}.json")))?;
            }
            writeln!(stdout, "{}", json!({ "command": "gen", "seed": seed, "scenes": n, "out": out.display().to_string() }))?;
        }
        Command::Relations { scenes, mode, k, seed, cfg } => {
            let cfg = cfg.load()?;
            let t = cfg.thresholds();
            for (s, scene) in read_scenes(&scenes)?.iter().enumerate() {
                let n = scene.objects.len();
                let pairs = match mode {
                    None => all_unordered_pairs(n),
                    Some(_) if n == 0 => Vec::new(),
                    Some(mode) => {
                        let centers: Vec<_> = scene.objects.iter().map(|o| o.bbox.center()).collect();
                        let pc = PairingConfig { k, mode, seed: derive_seed(seed, Stream::Pairing, s as u64) };
                        build_pairs(n, &centers, &pc)?.pairs().to_vec()
                    }
                };
                for (&(i, j), l) in pairs.iter().zip(relation_labels_batch(&scene.objects, &pairs, &t)?) {
                    writeln!(stdout, 
                        "{}",
                        json!({ "scene": scene.id, "seed": seed, "i": i, "j": j, "group": l.group, "same_as": l.same_as, "support": l.support, "hang_on": l.hang_on })
                    )?;
                }
            }
        }
        Command::Train { out, cfg } => {
            let cfg = cfg.load()?;
            let outcome = train(&cfg)?;
            fs::create_dir_all(&out)?;
            outcome.checkpoint().write(&out.join("model.ckpt"))?;
            fs::write(out.join("config.toml"), cfg.to_toml())?;
            outcome.write_log(fs::File::create(out.join("train_log.jsonl"))?)?;
            let last = outcome.log.last().expect("at least one epoch");
            writeln!(stdout, "{}", json!({ "command": "train", "seed": cfg.seed, "epochs": cfg.epochs, "final": last, "out": out.display().to_string() }))?;
        }
        Command::Eval { checkpoint, scenes, csv } => {
            let detector = Detector::from_checkpoint(&Checkpoint::read(&checkpoint)?)?;
            let prepared = match scenes {
                Some(dir) => read_scenes(&dir)?
                    .into_iter()
                    .enumerate()
                    .map(|(i, s)| prepare_scene(s, &detector.config, i as u64))
                    .collect::<Result<Vec<_>, _>>()?,
                None => build_dataset(&detector.config)?.eval,
            };
            let summary = evaluate(&detector, &prepared)?;
            if csv {
                write!(stdout, "# seed={}\n{}", summary.seed, summary.ap.to_csv())?;
            } else {
                writeln!(stdout, "{}", serde_json::to_string(&summary).expect("summary serializes"))?;
            }
        }
        Command::Bench { n, k, reps, seed, csv } => {
            let c = bench_relations(n, k, reps, seed)?;
            if csv {
                writeln!(stdout, "# seed={seed}\nimplementation,pairs,reps,wall_time_s,per_pair_s")?;
                for r in [&c.scalar, &c.batched] {
                    writeln!(stdout, "{},{},{},{:.6e},{:.6e}", serde_json::to_value(r.implementation).expect("tag").as_str().unwrap_or(""), r.pairs, r.reps, r.wall_time_s, r.per_pair_s)?;
                }
            } else {
                writeln!(stdout, "{}", serde_json::to_string(&c).expect("report serializes"))?;
            }
        }
        Command::Ablate { seeds, csv, cfg } => {
            if seeds.is_empty() {
                return Err(Error::Config("--seeds needs at least one seed".into()));
            }
            let cfg = cfg.load()?;
            let table = run_ablation(&cfg, &seeds)?;
            let seed_list: Vec<String> = seeds.iter().map(u64::to_string).collect();
            if csv {
                write!(stdout, "# seeds={}\n{}", seed_list.join(" "), table.to_csv())?;
            } else {
                write!(stdout, "seeds: {}\n{}", seed_list.join(" "), table.to_text())?;
            }
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> (u8, &'static str) {
    match e {
        Error::Config(_) => (1, "usage"),
        Error::Numeric(_) => (3, "numeric"),
        _ => (2, "data"),
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cmd = Cli::command().after_help(key_table());
    let matches = match cmd.try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { ExitCode::from(1) } else { ExitCode::SUCCESS };
            }
            let msg = e.to_string();
            let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", one_line(first.trim_start_matches("error: ")));
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error[usage]: {}", one_line(&e.to_string()));
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            let (code, kind) = exit_code(&e);
            eprintln!("error[{kind}]: {}", one_line(&e.to_string()));
            ExitCode::from(code)
        }
    }
}
