use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use singlip_core::corpus::{default_fixture_dir, load_corpus, run_corpus};
use singlip_core::holder::build_holder;
use singlip_core::metric::l_regularity_probe;
use singlip_core::pieces::{check_well_separated, partition_wedge, WedgeSide};
use singlip_core::report::{analyze, build_map_report, emit_csv, to_json, AnalyzeOptions, PartitionEntry};
use singlip_core::surface::{parse_surf, SurfFile};
use singlip_core::{cone, Config, Error, Ray, Result};

/// Config picked up from the surface file's directory when `--config` is absent.
const COLOCATED_CONFIG: &str = "singlip.toml";

#[derive(Parser)]
#[command(name = "singlip", version, about = "Bilipschitz geometry of graph surface singularities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for sampled distortion estimates.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Squeeze constant of the vertical maps.
    #[arg(long, global = true)]
    c: Option<f64>,
    /// Directory for CSV sample dumps.
    #[arg(long, global = true)]
    emit_csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Full,
    Right,
    Left,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: cone check, exceptional rays, partitions and verdict.
    Analyze {
        spec: PathBuf,
        #[arg(long)]
        regularity: bool,
        #[arg(long)]
        holder: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Nash fiber over one ray.
    Fiber {
        spec: PathBuf,
        #[arg(long, default_value = "+y")]
        ray: String,
        #[command(flatten)]
        common: Common,
    },
    /// Piece decomposition of the wedge around a ray.
    Pieces {
        spec: PathBuf,
        #[arg(long, default_value = "+y")]
        ray: String,
        #[arg(long, value_enum, default_value = "full")]
        side: SideArg,
        #[command(flatten)]
        common: Common,
    },
    /// Inner versus outer distance along the declared pair family.
    Regularity {
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Builds and verifies the map bundle for a wedge.
    Map {
        spec: PathBuf,
        #[arg(long, default_value = "+y")]
        wedge: String,
        #[command(flatten)]
        common: Common,
    },
    /// Hölder complex of the surface.
    Holder {
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Runs the fixture corpus and prints a pass/fail table.
    Corpus {
        /// Fixture directory; defaults to the shipped corpus.
        dir: Option<PathBuf>,
        #[arg(long)]
        filter: Option<String>,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common, spec: Option<&Path>) -> Result<Config> {
    let colocated = spec.and_then(|p| p.parent()).map(|d| d.join(COLOCATED_CONFIG));
    let mut cfg = match (&common.config, colocated) {
        (Some(path), _) => Config::load(path)?,
        (None, Some(path)) if path.is_file() => Config::load(&path)?,
        _ => Config::default(),
    };
    if let Some(seed) = common.seed {
        cfg.map.seed = seed;
    }
    if let Some(c) = common.c {
        cfg.map.c = c;
    }
    Ok(cfg)
}

fn load_spec(path: &Path) -> Result<SurfFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_surf(&text)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Analyze { spec, regularity, holder, common } => {
            let file = load_spec(&spec)?;
            let cfg = load_config(&common, Some(&spec))?;
            let mut report = analyze(&file, &cfg, AnalyzeOptions { regularity, holder });
            if let Some(dir) = &common.emit_csv {
                emit_csv(&mut report, &file, &cfg, dir)?;
            }
            print!("{}", report.to_json());
            Ok(report.exit_code() as u8)
        }
        Command::Fiber { spec, ray, common } => {
            let file = load_spec(&spec)?;
            let cfg = load_config(&common, Some(&spec))?;
            let fib = cone::nash_fiber(&file.spec, ray.parse::<Ray>()?, &cfg)?;
            print!("{}", to_json(&fib));
            Ok(0)
        }
        Command::Pieces { spec, ray, side, common } => {
            let file = load_spec(&spec)?;
            let cfg = load_config(&common, Some(&spec))?;
            let side = match side {
                SideArg::Full => WedgeSide::Full,
                SideArg::Right => WedgeSide::Right,
                SideArg::Left => WedgeSide::Left,
            };
            let partition = partition_wedge(&file.spec, ray.parse()?, side, &cfg)?;
            let separation = check_well_separated(&partition, cfg.pieces.sep_tol);
            print!("{}", to_json(&PartitionEntry { partition, separation }));
            Ok(0)
        }
        Command::Regularity { spec, common } => {
            let file = load_spec(&spec)?;
            let cfg = load_config(&common, Some(&spec))?;
            let (a, b) = file.pair_arcs()?.ok_or_else(|| Error::InvalidArc("no pair family declared".into()))?;
            let report = l_regularity_probe(&file.spec, (&a, &b), &cfg.schedule, &cfg)?;
            if let Some(dir) = &common.emit_csv {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join(format!("{}_regularity.csv", file.spec.name)), report.csv())?;
            }
            print!("{}", to_json(&report));
            Ok(0)
        }
        Command::Map { spec, wedge, common } => {
            let file = load_spec(&spec)?;
            let cfg = load_config(&common, Some(&spec))?;
            let report = build_map_report(&file, wedge.parse()?, &cfg)?;
            print!("{}", to_json(&report));
            Ok(0)
        }
        Command::Holder { spec, common } => {
            let file = load_spec(&spec)?;
            let cfg = load_config(&common, Some(&spec))?;
            let analysis = singlip_core::pieces::analyze_plane(&file.spec, &cfg)?;
            if let Some((ray, msg)) = analysis.failures.first() {
                return Err(Error::PartitionFailure(format!("{ray}: {msg}")));
            }
            let parts: Vec<_> = analysis.partitions.into_iter().map(|(p, _)| p).collect();
            print!("{}", to_json(&build_holder(&file.spec, &parts)?));
            Ok(0)
        }
        Command::Corpus { dir, filter, json, common } => {
            let dir = dir.unwrap_or_else(default_fixture_dir);
            let cfg = load_config(&common, None)?;
            let cases = load_corpus(&dir)?;
            let report = run_corpus(&cases, &cfg, filter.as_deref());
            if json {
                print!("{}", to_json(&report));
            } else {
                print!("{}", report.table());
            }
            Ok(if report.passed() { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}: {e}", e.kind());
            ExitCode::from(1)
        }
    }
}
