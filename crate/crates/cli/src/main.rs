use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use solarsite_core::ahp::{self, AhpEvaluation};
use solarsite_core::mcda::SensitivityRow;
use solarsite_core::pipeline::{self, config::judgment_values, Judgment, LoadOptions, RunSummary, SynthSpec};
use solarsite_core::{CriterionId, Grid};

#[derive(Parser, Debug)]
#[command(
    name = "solarsite",
    version,
    about = "Multi-criteria solar site suitability on raster grids"
)]
struct Cli {
    /// Output directory (run, synth, sensitivity) or file (render).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for synthetic datasets.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Accept pairwise matrices whose consistency ratio exceeds 0.05.
    #[arg(long, global = true)]
    override_cr: bool,
    /// Print machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a scenario config and write all artifacts.
    Run { config: PathBuf },
    /// Weights and consistency of a pairwise judgment matrix.
    Ahp {
        /// Text file (size line, then rows) or JSON array of rows.
        matrix: PathBuf,
    },
    /// Generate a synthetic province with approach configs.
    Synth(SynthArgs),
    /// Leave-one-criterion-out sensitivity of a scenario.
    Sensitivity { config: PathBuf },
    /// Render a class grid as a PNG image.
    Render {
        classes: PathBuf,
        #[arg(long, default_value_t = 4)]
        n_classes: usize,
    },
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 256)]
    rows: usize,
    #[arg(long, default_value_t = 256)]
    cols: usize,
    /// Cell size in metres.
    #[arg(long, default_value_t = 1000.0)]
    cellsize: f64,
    /// Target constrained share of the area.
    #[arg(long, default_value_t = 0.6695)]
    constraint_fraction: f64,
    #[arg(long, default_value_t = 24)]
    settlements: usize,
    #[arg(long, default_value_t = 12)]
    roads: usize,
    #[arg(long, default_value_t = 4)]
    grid_lines: usize,
    #[arg(long, default_value_t = 130)]
    humidity_points: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            exit_code(&e)
        }
    }
}

/// The error chain, skipping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = e.to_string();
    for cause in e.chain().skip(1) {
        let s = cause.to_string();
        if !out.contains(&s) {
            out.push_str(": ");
            out.push_str(&s);
        }
    }
    out
}

/// 2 for invalid input, 1 for everything else.
fn exit_code(e: &anyhow::Error) -> ExitCode {
    match e.downcast_ref::<solarsite_core::Error>() {
        Some(core) if core.is_validation() => ExitCode::from(2),
        Some(_) => ExitCode::from(1),
        None if e.is::<InputError>() => ExitCode::from(2),
        None => ExitCode::from(1),
    }
}

#[derive(Debug)]
struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn dispatch(cli: &Cli) -> anyhow::Result<()> {
    let opts = LoadOptions {
        override_cr: cli.override_cr,
        sandbox: None,
    };
    match &cli.command {
        Command::Run { config } => {
            let loaded = pipeline::load_scenario(config, &opts)?;
            let out = match (&cli.out, &loaded.config.output_dir) {
                (Some(o), _) => o.clone(),
                (None, Some(o)) => config.parent().unwrap_or(Path::new(".")).join(o),
                (None, None) => PathBuf::from("out"),
            };
            let output = pipeline::run(&loaded, &out)?;
            for w in &loaded.warnings {
                eprintln!("warning: {w}");
            }
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&output.summary)?);
            } else {
                print_summary(&output.summary);
                println!("artifacts written to {}", out.display());
            }
        }
        Command::Ahp { matrix } => {
            let text = std::fs::read_to_string(matrix).with_context(|| format!("reading {}", matrix.display()))?;
            let raw = if matrix.extension().is_some_and(|e| e == "json") {
                let rows: Vec<Vec<Judgment>> =
                    serde_json::from_str(&text).map_err(|e| InputError(format!("{}: {e}", matrix.display())))?;
                judgment_values(&rows)?
            } else {
                ahp::parse_matrix_text(&text)?
            };
            let eval = ahp::evaluate(&raw)?;
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&eval)?);
            } else {
                print_ahp(&eval);
            }
            if !eval.consistent && !cli.override_cr {
                return Err(solarsite_core::Error::Inconsistent {
                    cr: eval.cr,
                    threshold: ahp::CR_THRESHOLD,
                }
                .into());
            }
        }
        Command::Synth(a) => {
            let spec = SynthSpec {
                seed: cli.seed.unwrap_or(42),
                rows: a.rows,
                cols: a.cols,
                cellsize: a.cellsize,
                constraint_fraction: a.constraint_fraction,
                settlements: a.settlements,
                roads: a.roads,
                grid_lines: a.grid_lines,
                humidity_points: a.humidity_points,
            };
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("synth"));
            let ds = pipeline::synth_dataset(&spec)?;
            let files = pipeline::write_dataset(&ds, &out)?;
            println!(
                "wrote {} files to {} (constrained share {:.4})",
                files.len(),
                out.display(),
                ds.constraint_fraction
            );
        }
        Command::Sensitivity { config } => {
            let loaded = pipeline::load_scenario(config, &opts)?;
            let output = pipeline::execute(&loaded)?;
            let n = loaded.scenario.breaks.n_classes();
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let p = dir.join("sensitivity.csv");
                std::fs::write(&p, pipeline::sensitivity_csv(&output.sensitivity, n))
                    .with_context(|| format!("writing {}", p.display()))?;
            }
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&output.sensitivity)?);
            } else {
                print_sensitivity(&output.sensitivity, n);
            }
        }
        Command::Render { classes, n_classes } => {
            if *n_classes == 0 {
                bail!(InputError("--n-classes must be at least 1".into()));
            }
            let grid = Grid::read_file(classes)?;
            let png = pipeline::render_class_map(&grid, *n_classes)?;
            let out = cli.out.clone().unwrap_or_else(|| classes.with_extension("png"));
            std::fs::write(&out, png).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn print_ahp(eval: &AhpEvaluation) {
    println!("{:>4}  {:>12}", "#", "weight");
    for (i, w) in eval.weights.iter().enumerate() {
        println!("{:>4}  {:>12.6}", i + 1, w);
    }
    println!("lambda_max {:.6}", eval.lambda_max);
    println!("CI {:.6}  RI {:.2}  CR {:.4}", eval.ci, eval.ri, eval.cr);
    println!(
        "{}",
        if eval.consistent {
            "consistent"
        } else {
            "INCONSISTENT (CR > 0.05)"
        }
    );
}

fn print_summary(s: &RunSummary) {
    let ids: Vec<String> = s.criteria.iter().map(CriterionId::to_string).collect();
    let w: Vec<String> = s.weights.iter().map(|w| format!("{w:.3}")).collect();
    println!("criteria {}", ids.join(" "));
    println!("weights  {}", w.join(" "));
    if let Some(a) = &s.ahp {
        println!("CR {:.4}", a.cr);
    }
    println!(
        "{:>5} {:>12} {:>12} {:>8} {:>8} {:>10} {:>10}",
        "class", "full_km2", "exploit_km2", "full%", "expl%", "gp_full", "gp_expl"
    );
    for c in &s.classes {
        println!(
            "{:>5} {:>12.2} {:>12.2} {:>8.2} {:>8.2} {:>10.3} {:>10.3}",
            c.class, c.full_km2, c.exploitable_km2, c.full_pct, c.exploitable_pct, c.gp_full_twh, c.gp_exploitable_twh
        );
    }
    println!(
        "scored {:.2} km2, exploitable {:.2} km2, constrained share {:.4}",
        s.scored_km2, s.exploitable_km2, s.constrained_fraction
    );
    match s.capacity_mw_per_km2 {
        Some(c) => println!("capacity density of the top class {c:.2} MW/km2"),
        None => println!("top class has no exploitable area"),
    }
}

fn print_sensitivity(rows: &[SensitivityRow], n: usize) {
    print!("{:>8}", "excluded");
    for k in 1..=n {
        print!(" {:>10}", format!("class {k}"));
    }
    println!();
    for r in rows {
        print!("{:>8}", r.excluded.as_str());
        for d in &r.delta_pct {
            match d {
                Some(d) => print!(" {d:>9.2}%"),
                None => print!(" {:>10}", "n/a"),
            }
        }
        println!();
    }
}
