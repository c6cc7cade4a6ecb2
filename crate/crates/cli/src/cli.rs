use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use log::info;
use ratchet_core::ide::IdeSolver;
use ratchet_core::ratchet::{backward_recursion_with, build_rate_grid, extract_free_boundary, Recursion};
use ratchet_core::unconstrained::optimize_band_nr;

use crate::config::{load_config, Resolved};
use crate::error::CliError;
use crate::experiment::{self, difference_plot, refinement_ladder, stride_for};
use crate::formats::{self, EstimateRecord};
use crate::presets;
use crate::svg;

#[derive(Debug, Parser)]
#[command(name = "ratchet-div", version, about = "Optimal dividend ratcheting in the Cramér-Lundberg model")]
pub struct Cli {
    /// More progress output on stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Worker threads for Monte Carlo; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config entry, e.g. `--set solver.h=0.01`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Shorthand for `--set sim.seed=N`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Directory for the artifacts.
    #[arg(long)]
    pub out: PathBuf,
    /// Largest surplus written to CSV and plotted; defaults to x_max.
    #[arg(long)]
    pub x_limit: Option<f64>,
    /// Write every k-th grid node; chosen so that at most 1000 nodes are
    /// written when omitted.
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Value surface at the configured refinement level.
    Solve {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Change region and free boundary.
    Region {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Convergence table of the rate-zero slice over levels 0..n.
    Table {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// One-switch, refined and unconstrained values at rate zero.
    Compare {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo estimate of the refined strategy at one state.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        x0: f64,
        #[arg(long, default_value_t = 0.0)]
        c0: f64,
        /// Overrides `sim.paths`.
        #[arg(long)]
        paths: Option<usize>,
        /// Also write `estimate.json` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named preset into `<out>/<name>-<unix time>/`.
    Experiment {
        /// One of example1, example2, example3, example4.
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Runs one invocation; the caller maps the error to an exit code.
pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::validation("--threads", "must be at least 1"));
        }
        // Fails only when a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match cli.command {
        Command::Solve { config, output } => {
            let r = resolve(&config, &[])?;
            let rec = recursion(&r)?;
            let (stride, limit) = output_shape(&output, &r);
            write(&output.out, "surface.csv", formats::surface_csv(&rec.surface, stride, Some(limit)))
        }
        Command::Region { config, output } => {
            let r = resolve(&config, &[])?;
            let rec = recursion(&r)?;
            let (stride, limit) = output_shape(&output, &r);
            let fb = extract_free_boundary(&rec.strategy, &r.grid);
            write(&output.out, "region.csv", formats::region_csv(&rec.strategy))?;
            write(&output.out, "boundary.csv", formats::boundary_csv(&fb, stride, Some(limit)))?;
            write(&output.out, "region.svg", svg::region_plot("change region", &rec.strategy, limit))
        }
        Command::Table { config, out } => {
            let r = resolve(&config, &[])?;
            let solver = IdeSolver::new(&r.model, r.grid);
            let (_, _, table) = refinement_ladder(&solver, &r.tolerances, r.n)?;
            write(&out, "table.csv", formats::table_csv(&table))
        }
        Command::Compare { config, output } => {
            let r = resolve(&config, &[])?;
            let solver = IdeSolver::new(&r.model, r.grid);
            let one = backward_recursion_with(&solver, &build_rate_grid(0, &r.model), &r.tolerances)?;
            let rec = backward_recursion_with(&solver, &build_rate_grid(r.n, &r.model), &r.tolerances)?;
            let nr = optimize_band_nr(&solver)?;
            let (stride, limit) = output_shape(&output, &r);
            let (vr, v0) = (rec.surface.curve(0), one.surface.curve(0));
            write(&output.out, "compare.csv", formats::compare_csv(vr, v0, &nr.curve, stride, Some(limit)))?;
            write(&output.out, "curves.svg", difference_plot("comparison", vr, v0, &nr.curve, stride, limit))
        }
        Command::Simulate { config, x0, c0, paths, out } => {
            let extra: Vec<String> = paths.map(|p| format!("sim.paths={p}")).into_iter().collect();
            let r = resolve(&config, &extra)?;
            if !(x0 >= 0.0) || !(c0 >= 0.0) || c0 > r.model.ceiling() {
                return Err(CliError::validation("--x0/--c0", "need x0 >= 0 and 0 <= c0 <= dividend_ceiling"));
            }
            let rec = recursion(&r)?;
            let est = crate::simulate::estimate(&rec.strategy, &r.model, x0, c0, &r.sim);
            let text = formats::to_json(&EstimateRecord::new(x0, c0, &est, &r.sim));
            print!("{text}");
            match out {
                Some(dir) => write(&dir, "estimate.json", text),
                None => Ok(()),
            }
        }
        Command::Experiment { name, out } => {
            let preset = presets::preset(&name).ok_or_else(|| {
                CliError::validation("name", format!("unknown preset `{name}`, expected one of {:?}", presets::NAMES))
            })?;
            let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            let dir = out.join(format!("{name}-{stamp}"));
            let run = experiment::run_experiment(&preset)?;
            experiment::write_experiment(&run, &dir)?;
            info!("artifacts in {}", dir.display());
            run.check()
        }
    }
}

fn resolve(args: &ConfigArgs, extra: &[String]) -> Result<Resolved, CliError> {
    let mut overrides = args.overrides.clone();
    overrides.extend_from_slice(extra);
    if let Some(seed) = args.seed {
        overrides.push(format!("sim.seed={seed}"));
    }
    let cfg = load_config(&args.config, &overrides)?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    cfg.resolve(base)
}

fn recursion(r: &Resolved) -> Result<Recursion, CliError> {
    let solver = IdeSolver::new(&r.model, r.grid);
    Ok(backward_recursion_with(&solver, &build_rate_grid(r.n, &r.model), &r.tolerances)?)
}

fn output_shape(o: &OutputArgs, r: &Resolved) -> (usize, f64) {
    let limit = o.x_limit.unwrap_or(r.grid.x_max()).min(r.grid.x_max());
    (o.stride.unwrap_or_else(|| stride_for(&r.grid, limit, 1000)), limit)
}

fn write(dir: &Path, name: &str, text: String) -> Result<(), CliError> {
    formats::write_atomic(&dir.join(name), text.as_bytes())
}
