use clap::{Parser, Subcommand};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use irbench::cli::{self, presets, ExperimentConfig, IngestOptions};
use irbench::error::{Error, Result};
use irbench::estimators::AnalysisSettings;

#[derive(Parser)]
#[command(name = "irbench", version, about = "Interleaved benchmarking simulator and analysis tool")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every protocol pair of a config file or named preset.
    Run {
        config: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use exact outcome probabilities instead of sampled shots.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Systematic-bound widths over a grid of one error-model parameter.
    Sweep {
        config: String,
        #[arg(long, default_value = "theta1_deg")]
        param: String,
        /// start:stop:step, inclusive.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Analyse external reference and interleaved decay tables (depth,label,mean,stderr,n).
    Ingest {
        reference: PathBuf,
        interleaved: PathBuf,
        /// Unitarity from an XRB experiment; adds XRB bounds.
        #[arg(long)]
        unitarity: Option<f64>,
        /// haar, clifford, local_clifford or pauli; inferred from labels when omitted.
        #[arg(long)]
        group: Option<String>,
        /// binary, parity or continuous; inferred from the means when omitted.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long, default_value = "ratio")]
        method: String,
        #[arg(long, default_value = "fixed")]
        asymptote: String,
        #[arg(long, default_value_t = 1000)]
        resamples: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Bootstrap seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Weight fits by the empirical standard errors only.
        #[arg(long)]
        empirical_weights: bool,
        /// Also write the estimate to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List embedded presets, or print one.
    Presets { name: Option<String> },
}

fn set_threads(n: Option<usize>) -> Result<()> {
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::Config { path: "--threads".into(), message: "must be positive".into() });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::SimulationIntegrity(e.to_string()))?;
    }
    Ok(())
}

fn prepare(config: &str, exact: bool, threads: Option<usize>) -> Result<ExperimentConfig> {
    let mut cfg = cli::load_config(config)?;
    cfg.exact |= exact;
    set_threads(threads.or(cfg.threads))?;
    Ok(cfg)
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config, out, exact, threads } => {
            let cfg = prepare(&config, exact, threads)?;
            let dir = cli::output_dir(out.as_deref(), Some(&cfg));
            let art = cli::execute(&cfg)?;
            let files = cli::write_artifacts(&art, &dir)?;
            for r in &art.report.estimates {
                let e = &r.estimate;
                let ci = e.stat_ci.map(|(l, h)| format!("[{l:.3e}, {h:.3e}]")).unwrap_or_else(|| "none".into());
                println!(
                    "{:<15} epsilon={:.4e} stat_ci={ci} sys=[{:.3e}, {:.3e}] flags={:?}",
                    e.protocol, e.epsilon, e.sys_bounds.0, e.sys_bounds.1, e.flags
                );
            }
            println!("theoretical infidelity {:.4e}", art.report.theoretical_infidelity);
            println!("wrote {} files to {}", files.len(), dir.display());
        }
        Command::Sweep { config, param, grid, out, exact, threads } => {
            let cfg = prepare(&config, exact, threads)?;
            let grid = cli::parse_grid(&grid)?;
            let rows = cli::sweep(&cfg, &param, &grid)?;
            let dir = cli::output_dir(out.as_deref(), Some(&cfg));
            fs::create_dir_all(&dir)?;
            let path = dir.join(format!("sweep_{param}.csv"));
            cli::write_sweep_csv(&rows, &param, fs::File::create(&path)?)?;
            cli::write_sweep_csv(&rows, &param, std::io::stdout())?;
            eprintln!("wrote {}", path.display());
        }
        Command::Ingest {
            reference,
            interleaved,
            unitarity,
            group,
            kind,
            method,
            asymptote,
            resamples,
            level,
            seed,
            empirical_weights,
            out,
        } => {
            let read = |p: &PathBuf| -> Result<_> {
                let text = fs::read_to_string(p)?;
                cli::read_points(&text).map_err(|e| match e {
                    Error::InputLine { line, message } => {
                        Error::InputLine { line, message: format!("{}: {message}", p.display()) }
                    }
                    e => e,
                })
            };
            let (rp, ip) = (read(&reference)?, read(&interleaved)?);
            if !(level > 0.0 && level < 1.0) {
                return Err(Error::Config { path: "--level".into(), message: "must lie strictly between 0 and 1".into() });
            }
            let opts = IngestOptions {
                group: group.as_deref().map(cli::parse_group).transpose()?,
                kind: kind.as_deref().map(cli::parse_kind).transpose()?,
                settings: AnalysisSettings {
                    method: cli::parse_method(&method)?,
                    asymptote: cli::parse_asymptote(&asymptote)?,
                    model_weights: !empirical_weights,
                    resamples,
                    seed,
                    level,
                    unitarity,
                },
            };
            let est = cli::ingest(&rp, &ip, &opts)?;
            let text = serde_json::to_string_pretty(&est)? + "\n";
            if let Some(path) = out {
                fs::write(path, &text)?;
            }
            print!("{text}");
        }
        Command::Presets { name } => match name {
            Some(n) => match presets::get(&n) {
                Some(text) => print!("{text}"),
                None => return Err(Error::Config { path: ".".into(), message: format!("no preset named `{n}`") }),
            },
            None => presets::names().iter().for_each(|n| println!("{n}")),
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Cli::parse();
    match dispatch(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
