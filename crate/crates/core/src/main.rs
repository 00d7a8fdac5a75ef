use clap::{Parser, Subcommand, ValueEnum};
use grnscale::cli::{
    recipes, reproduce_targets, run_recipe, CliError, ExperimentConfig, OutputFormat,
};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "grnscale",
    version,
    about = "Multi-scale analysis toolkit for a 4D activator-inhibitor gene network",
    long_about = "Simulation, reduction and bifurcation analysis for a two-gene \
activator-inhibitor network with separate time-scale (eps) and switching (sigma) \
parameters. Subcommands emit CSV (or JSON) tables into --out-dir; `reproduce` \
regenerates the bundled reference experiments (fig3, fig4, fig6, fig7, fig8) or \
any named recipe."
)]
struct Cli {
    /// JSON experiment configuration; the bundled reference configuration
    /// is used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory the result tables are written into.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Output format for every table.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Integrator tolerance override (also overrides the config file).
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Worker threads for sweep recipes (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the full system and classify the attractor.
    Simulate,
    /// Solve the unique equilibrium and report its spectrum.
    Equilibrium,
    /// Continue the equilibrium around the configured parameter circle.
    Continue,
    /// Trace the two-parameter Hopf curve from a detected Hopf point.
    HopfCurve,
    /// Evaluate the switching-limit return map and its corner derivatives.
    Pwl,
    /// Verify blow-up atlas coherence across all chart overlaps.
    ChartsCheck,
    /// Classify the (sigma, eps) parameter plane.
    Parplane,
    /// Regenerate a reference experiment (fig3, fig4, fig6, fig7, fig8) or
    /// run any named recipe; `list` prints the recipe names.
    Reproduce { target: String },
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::reference(),
    };
    if cli.tol.is_some() {
        cfg.tol = cli.tol;
    }
    cfg.validate()?;

    let format: OutputFormat = cli.format.into();
    let out_dir = cli.out_dir.clone();
    let write_all = |tables: Vec<grnscale::cli::ResultTable>| -> Result<Vec<PathBuf>, CliError> {
        let mut written = Vec::new();
        for t in &tables {
            written.push(t.write_to_dir(&out_dir, format)?);
        }
        Ok(written)
    };

    match &cli.command {
        Command::Simulate => write_all(recipes::simulate_command(&cfg)?),
        Command::Equilibrium => write_all(recipes::equilibrium_command(&cfg)?),
        Command::Continue => write_all(recipes::continue_command(&cfg)?),
        Command::HopfCurve => write_all(recipes::hopf_curve_command(&cfg)?),
        Command::Pwl => write_all(run_recipe("pwl-poincare", &cfg)?),
        Command::ChartsCheck => write_all(run_recipe("charts-coherence", &cfg)?),
        Command::Parplane => write_all(run_recipe("parplane", &cfg)?),
        Command::Reproduce { target } => {
            if target == "list" {
                for name in recipes::RECIPES {
                    println!("{name}");
                }
                return Ok(Vec::new());
            }
            let names: Vec<&str> = match reproduce_targets(target) {
                Some(names) => names,
                None if recipes::RECIPES.contains(&target.as_str()) => vec![target.as_str()],
                None => {
                    return Err(CliError::Validation {
                        path: "reproduce".into(),
                        message: format!(
                            "unknown target {target:?}; figures: fig3 fig4 fig6 fig7 fig8, \
                             or a recipe name (see `reproduce list`)"
                        ),
                    })
                }
            };
            let mut written = Vec::new();
            for name in names {
                written.extend(write_all(run_recipe(name, &cfg)?)?);
            }
            Ok(written)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build();
    let result = match pool {
        Ok(pool) => pool.install(|| run(&cli)),
        Err(e) => Err(CliError::Numeric(format!("thread pool: {e}"))),
    };
    match result {
        Ok(written) => {
            for path in written {
                println!("{}", path.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
