use std::fmt::Write as _;
use std::io::{self, Write as _};
use std::path::PathBuf;
use std::process::ExitCode;

use bai_core::bounds::{
    absolute_bounds, efficiency_gain, minimax_lower_multi, minimax_lower_two, rs_aipw_upper,
    Scaling, VarianceIntegrals,
};
use bai_core::harness::{
    emit_csv, emit_plot_data, format_float, run_experiment, run_martingale_diagnostic,
    ExperimentConfig,
};
use bai_core::rng::{from_seed, trial_seed};
use bai_core::BaiError;
use clap::{Args, Parser, Subcommand};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "bai-bench",
    version,
    about = "Fixed-budget best-arm identification experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured strategy and write regret curves as CSV.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Also write long-format plot data here.
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
    /// Print the theoretical bounds for the configured model.
    Bounds {
        #[command(flatten)]
        common: Common,
    },
    /// Print martingale diagnostics for the strategies that compute AIPW scores.
    Diag {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the number of trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the worker thread count (0 = all cores).
    #[arg(long)]
    parallel: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, BaiError> {
        let mut cfg = ExperimentConfig::from_file(&self.config)?;
        let e = &mut cfg.experiment;
        if let Some(n) = self.trials {
            e.n_trials = n;
        }
        if let Some(s) = self.seed {
            e.master_seed = s;
        }
        if let Some(p) = self.parallel {
            e.parallel = p;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

// Writing to a `String` cannot fail.
macro_rules! wl {
    ($out:expr, $($arg:tt)*) => {
        writeln!($out, $($arg)*).expect("write to string")
    };
}

/// Runs `command`, returning the text destined for stdout.
fn run(command: Command) -> Result<String, (u8, BaiError)> {
    let mut buf = String::new();
    let config_err = |e: BaiError| (EXIT_CONFIG, e);
    let classify = |e: BaiError| {
        (
            if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_RUNTIME
            },
            e,
        )
    };
    match command {
        Command::Run {
            common,
            out,
            plot_data,
        } => {
            let cfg = common.load().map_err(config_err)?;
            let result = run_experiment(&cfg).map_err(classify)?;
            emit_csv(&result.curves, &out).map_err(classify)?;
            if let Some(path) = plot_data {
                emit_plot_data(&result.curves, &path).map_err(classify)?;
            }
            eprintln!(
                "wrote {} rows for {} strategies to {}",
                result.curves.iter().map(|c| c.points.len()).sum::<usize>(),
                result.curves.len(),
                out.display()
            );
        }
        Command::Bounds { common } => {
            let cfg = common.load().map_err(config_err)?;
            let model = cfg.build_model().map_err(classify)?;
            cfg.validate_for(&model).map_err(config_err)?;
            let seed = trial_seed(cfg.experiment.master_seed, "bounds", 0);
            let mut rng = from_seed(seed);
            let vi = VarianceIntegrals::estimate(&model, cfg.experiment.n_mc, &mut rng)
                .map_err(classify)?;
            wl!(buf, "name,value,scaling,T");
            let mut reports = vec![minimax_lower_multi(&vi)];
            reports.extend(minimax_lower_two(&vi).ok());
            reports.push(rs_aipw_upper(&vi));
            for r in &reports {
                wl!(buf, "{},{},per_sqrt_t,", r.name, format_float(r.value));
            }
            for t in cfg.checkpoints() {
                for r in absolute_bounds(model.num_arms(), t).map_err(classify)? {
                    debug_assert_eq!(r.scaling, Scaling::Absolute);
                    wl!(buf, "{},{},absolute,{t}", r.name, format_float(r.value));
                }
            }
            let g = efficiency_gain(&model, cfg.experiment.n_mc, &mut rng).map_err(classify)?;
            wl!(
                buf,
                "efficiency_context_free,{},functional,",
                format_float(g.context_free)
            );
            wl!(
                buf,
                "efficiency_contextual,{},functional,",
                format_float(g.contextual)
            );
        }
        Command::Diag { common } => {
            let cfg = common.load().map_err(config_err)?;
            let reports = run_martingale_diagnostic(&cfg).map_err(classify)?;
            wl!(
                buf,
                "strategy,a,b,T,v_star,mean_sum_xi,se_sum_xi,mean_sum_xi_sq,se_sum_xi_sq"
            );
            for r in reports {
                wl!(
                    buf,
                    "{},{},{},{},{},{},{},{},{}",
                    r.strategy,
                    r.pair.0,
                    r.pair.1,
                    r.budget,
                    format_float(r.v_star),
                    format_float(r.sum.value),
                    format_float(r.sum.std_err),
                    format_float(r.sum_sq.value),
                    format_float(r.sum_sq.std_err)
                );
            }
        }
    }
    Ok(buf)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(text) => match io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() != io::ErrorKind::BrokenPipe => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_RUNTIME)
            }
            _ => ExitCode::SUCCESS,
        },
        Err((code, e)) => {
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}
