//! Command-line front end: scenario configuration, pipeline selection and
//! CSV/JSON export for the dephased-XX-chain solvers.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod bench;
mod config;
mod plots;
mod run;

use clap::{Args, Parser, Subcommand};
use config::{Overrides, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dephasing-chain",
    about = "Correlation dynamics of the XX chain with local dephasing",
    long_about = "Solves the two-point correlation dynamics of the periodic XX chain under \
local dephasing by exact finite-size evolution, transfer-matrix Green's functions in the \
Laplace domain, and closed-form asymptotics.\n\nCSV schemas:\n  evolve:   t,x,m,j\n  density:  \
t,x,value_re,value_im,method\n  offdiag:  t,x,value_re,value_im,method (one file per offset)\n  \
beta:     t,M,beta\n  resolvent-dump: s_re,s_im,q,g00_re,g00_im\nEach run also writes \
<output>_manifest.json with the resolved config, its content hash and wall time."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// flat key=value config file; command-line flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// number of spins
    #[arg(short = 'L', long = "L")]
    sites: Option<usize>,
    /// hopping strength
    #[arg(short = 'J', long = "J")]
    hopping: Option<f64>,
    /// dephasing rate
    #[arg(short = 'g', long)]
    gamma: Option<f64>,
    /// initial state: delta, domain-wall or csv:PATH
    #[arg(long)]
    initial: Option<String>,
    /// explicit comma-separated times
    #[arg(long)]
    times: Option<String>,
    #[arg(long)]
    t_start: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    t_count: Option<usize>,
    /// linear or log
    #[arg(long)]
    t_spacing: Option<String>,
    /// ed, transfer-talbot, transfer-contour or asymptotic
    #[arg(short, long)]
    method: Option<String>,
    /// momentum-grid size for continuum sweeps
    #[arg(long)]
    nq: Option<usize>,
    /// number of off-diagonals
    #[arg(long)]
    lmax: Option<usize>,
    /// output path prefix
    #[arg(short, long)]
    output: Option<String>,
    /// worker threads (or "auto")
    #[arg(long)]
    threads: Option<String>,
    /// named scenario preset: fig2, fig3, fig4
    #[arg(long)]
    preset: Option<String>,
    /// smoothing half-width for beta (windowed quadratic fit)
    #[arg(long)]
    smooth: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact finite-size evolution; writes density and current time series
    Evolve(Common),
    /// Density profiles by the selected pipeline
    Density(Common),
    /// Off-diagonal correlation profiles
    Offdiag(Common),
    /// Transferred magnetization and its running exponent
    Beta(Common),
    /// Max elementwise difference between the exact and transfer pipelines
    Compare(Common),
    /// Dump G00(s, q) over an s-grid for every chain momentum
    ResolventDump {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.1)]
        s_re_min: f64,
        #[arg(long, default_value_t = 2.0)]
        s_re_max: f64,
        #[arg(long, default_value_t = 5)]
        s_re_count: usize,
        #[arg(long, default_value_t = 0.0)]
        s_im_min: f64,
        #[arg(long, default_value_t = 0.0)]
        s_im_max: f64,
        #[arg(long, default_value_t = 1)]
        s_im_count: usize,
    },
    /// Runtime-vs-size scaling of the selected pipeline
    Bench {
        #[command(flatten)]
        common: Common,
        /// comma-separated system sizes, e.g. 1e4,1e5,1e6
        #[arg(long, default_value = "10000,100000,1000000")]
        sizes: String,
        /// evaluation time point
        #[arg(short, long, default_value_t = 500.0)]
        t: f64,
    },
    /// Emit a gnuplot script for a standard figure layout
    PlotScript {
        /// fig2, fig3a, fig3b or fig4
        #[arg(long)]
        figure: String,
        /// comma-separated data files produced by the other commands
        #[arg(long)]
        data: String,
        /// script path to write
        #[arg(long)]
        out: String,
    },
}

fn overrides_from(common: &Common) -> Result<Overrides, String> {
    let mut ov = match &common.config {
        Some(path) => Overrides::from_file(path)?,
        None => Overrides::default(),
    };
    ov.set("preset", common.preset.clone());
    ov.set("L", common.sites.map(|v| v.to_string()));
    ov.set("J", common.hopping.map(|v| v.to_string()));
    ov.set("gamma", common.gamma.map(|v| v.to_string()));
    ov.set("initial", common.initial.clone());
    ov.set("times", common.times.clone());
    ov.set("t-start", common.t_start.map(|v| v.to_string()));
    ov.set("t-end", common.t_end.map(|v| v.to_string()));
    ov.set("t-count", common.t_count.map(|v| v.to_string()));
    ov.set("t-spacing", common.t_spacing.clone());
    ov.set("method", common.method.clone());
    ov.set("nq", common.nq.map(|v| v.to_string()));
    ov.set("lmax", common.lmax.map(|v| v.to_string()));
    ov.set("output", common.output.clone());
    ov.set("threads", common.threads.clone());
    ov.set("smooth", common.smooth.map(|v| v.to_string()));
    Ok(ov)
}

fn resolve(common: &Common) -> Result<RunConfig, String> {
    let cfg = overrides_from(common)?.resolve()?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| format!("thread pool: {e}"))?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let outcome: Result<(), (u8, String)> = match &cli.command {
        Command::Evolve(c) => dispatch(c, run::cmd_evolve),
        Command::Density(c) => dispatch(c, run::cmd_density),
        Command::Offdiag(c) => dispatch(c, run::cmd_offdiag),
        Command::Beta(c) => dispatch(c, run::cmd_beta),
        Command::Compare(c) => {
            resolve(c).map_err(|e| (2u8, e)).and_then(|cfg| {
                run::cmd_compare(&cfg).map(|_| ()).map_err(|e| (3u8, e.to_string()))
            })
        }
        Command::ResolventDump { common, s_re_min, s_re_max, s_re_count, s_im_min, s_im_max, s_im_count } => {
            resolve(common).map_err(|e| (2u8, e)).and_then(|cfg| {
                run::cmd_resolvent_dump(
                    &cfg,
                    (*s_re_min, *s_re_max, *s_re_count),
                    (*s_im_min, *s_im_max, *s_im_count),
                )
                .map(|a| report(&a.files))
                .map_err(|e| (3u8, e.to_string()))
            })
        }
        Command::Bench { common, sizes, t } => {
            resolve(common).map_err(|e| (2u8, e)).and_then(|cfg| {
                let parsed: Result<Vec<usize>, _> = sizes
                    .split(',')
                    .map(|s| s.trim().parse::<f64>().map(|v| v as usize))
                    .collect();
                let sizes = parsed.map_err(|e| (2u8, format!("bad sizes: {e}")))?;
                let rep = bench::run_bench(&cfg, &sizes, *t).map_err(|e| (3u8, e.to_string()))?;
                for p in &rep.points {
                    println!(
                        "L={:>8}: {:.4} s  ({} contributing modes, ~{} B buffers)",
                        p.sites, p.seconds, p.alive_modes, p.buffer_bytes
                    );
                }
                if let Some(e) = rep.exponent {
                    println!("runtime-vs-L exponent: {e:.2}");
                }
                if let Some(kb) = rep.peak_rss_kb {
                    println!("peak RSS: {kb} kB");
                }
                Ok(())
            })
        }
        Command::PlotScript { figure, data, out } => (|| {
            let fig = plots::Figure::parse(figure).map_err(|e| (2u8, e))?;
            let files: Vec<String> = data.split(',').map(|s| s.trim().to_string()).collect();
            plots::emit_plot_script(fig, &files, out).map_err(|e| (2u8, e.to_string()))?;
            println!("wrote {out}");
            Ok(())
        })(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn dispatch(
    common: &Common,
    f: impl Fn(&RunConfig) -> Result<run::Artifacts, dephasing_chain::Error>,
) -> Result<(), (u8, String)> {
    let cfg = resolve(common).map_err(|e| (2u8, e))?;
    let artifacts = f(&cfg).map_err(|e| (3u8, e.to_string()))?;
    report(&artifacts.files);
    Ok(())
}

fn report(files: &[String]) {
    for f in files {
        println!("wrote {f}");
    }
}
