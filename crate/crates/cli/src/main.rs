use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use hicf_core::barrier::{barrier_rate, BarrierSolution};
use hicf_core::config::{parse_config, InitialSpec, RunConfig};
use hicf_core::runner::{execute, preset, FitEntry, RunArtifacts, PRESETS};
use hicf_core::{acceptance, Exec};

/// Inverse curvature flows of starshaped hypersurfaces in hyperbolic space.
#[derive(Parser)]
#[command(name = "hicf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the flow described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a named preset, or print its config.
    Preset {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
        name: String,
        /// Print the preset as a config file instead of running it.
        #[arg(long)]
        emit_config: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print the spherical barrier radius Θ(t) as CSV.
    Barrier {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        r0: f64,
        #[arg(long = "t-end")]
        t_end: f64,
        /// Number of sample intervals.
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Run the numerical verification suite.
    Verify,
}

#[derive(Args)]
struct Overrides {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Disable the thread pool.
    #[arg(long)]
    sequential: bool,
}

impl Overrides {
    fn apply(&self, config: &mut RunConfig) {
        if let Some(dir) = &self.out {
            config.out_dir = dir.clone();
        }
        if let Some(res) = self.resolution {
            config.flow.resolution = res;
        }
        if let Some(t) = self.t_end {
            config.flow.t_end = t;
            config.flow.snapshot_times.retain(|&s| s <= t);
        }
        if self.sequential {
            config.flow.exec = Exec::Sequential;
        }
    }
}

fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut config = parse_config(&text).with_context(|| format!("in {}", path.display()))?;
    // table paths are relative to the config file
    if let InitialSpec::Table { path: table } = &mut config.initial {
        if table.is_relative() {
            if let Some(dir) = path.parent() {
                *table = dir.join(&*table);
            }
        }
    }
    Ok(config)
}

fn report(art: &RunArtifacts) {
    let s = &art.summary;
    println!("wrote {} ({:.2} s)", art.dir.display(), s.wall_time_s);
    for (key, fit) in &s.fits {
        match fit {
            FitEntry::Fit(f) => println!("  fit {key:<10} λ = {:.6} (r² = {:.5})", f.lambda, f.r2),
            FitEntry::Unavailable { error } => println!("  fit {key:<10} unavailable: {error}"),
        }
    }
    if let Some(env) = &s.envelope {
        println!(
            "  envelope    lower {:.3e}, upper {:.3e}",
            env.max_lower_violation, env.max_upper_violation
        );
    }
    for (name, verdict) in &s.verdicts {
        println!("  {name:<24} {verdict:?}");
    }
    for entry in &s.sweep {
        let lambda = match &entry.kappa_dev {
            Some(FitEntry::Fit(f)) => format!("λ = {:.6}", f.lambda),
            _ => "no fit".into(),
        };
        match &entry.error {
            None => println!("  sweep osc {:<8} completed, {lambda}", entry.osc),
            Some(e) => println!("  sweep osc {:<8} aborted: {e}", entry.osc),
        }
    }
}

fn run_config(mut config: RunConfig, overrides: &Overrides) -> Result<()> {
    overrides.apply(&mut config);
    let art = execute(&config).with_context(|| format!("run aborted; see {}", config.out_dir.join("summary.json").display()))?;
    report(&art);
    Ok(())
}

fn barrier_csv(n: usize, p: f64, r0: f64, t_end: f64, samples: usize) -> Result<()> {
    anyhow::ensure!(n >= 2 && p > 0.0 && r0 > 0.0 && t_end >= 0.0, "need n ≥ 2, p > 0, r0 > 0, t_end ≥ 0");
    anyhow::ensure!(samples > 0, "need at least one sample interval");
    let times: Vec<f64> = (0..=samples).map(|k| t_end * k as f64 / samples as f64).collect();
    let sol = BarrierSolution::solve(r0, n, p, &times);
    let np = (n as f64).powf(p);
    let slope = barrier_rate(r0, n, p);
    println!("t,theta,lower,upper");
    for (t, th) in times.iter().zip(&sol.theta) {
        println!("{t:.16e},{th:.16e},{:.16e},{:.16e}", r0 + t * slope, r0 + t / np);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, overrides } => load(&config).and_then(|c| run_config(c, &overrides)),
        Command::Preset { name, emit_config, overrides } => {
            let config = preset(&name).map_err(anyhow::Error::from);
            match config {
                Ok(mut c) if emit_config => {
                    overrides.apply(&mut c);
                    print!("{}", c.to_toml());
                    Ok(())
                }
                Ok(c) => run_config(c, &overrides),
                Err(e) => Err(e),
            }
        }
        Command::Barrier { n, p, r0, t_end, samples } => barrier_csv(n, p, r0, t_end, samples),
        Command::Verify => {
            let outcomes = acceptance::run_all();
            for o in &outcomes {
                println!("{o}");
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
            if failed > 0 {
                return ExitCode::FAILURE;
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
