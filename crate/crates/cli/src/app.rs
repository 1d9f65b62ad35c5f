//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::commands::{
    self, BilliardArgs, CroftonArgs, CroftonMethod, GeodesicArgs, PolySource, Surface,
};
use crate::config::{OutputFormat, RunConfig, Tolerances, DEFAULT_SEED};
use crate::report::{Report, Timing};
use crate::{CliError, EXIT_CHECK_FAILED, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "hemiwidth", version, about = "Width spectra, billiards and Crofton masses on the hemisphere")]
pub struct Cli {
    /// Seed for every random stream of the run.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
    /// Write the report here instead of stdout; plots go next to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sampling and grid searches.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Tolerance override, repeatable.
    #[arg(long = "tol", global = true, value_name = "KEY=VALUE")]
    pub tol: Vec<String>,
    /// Write SVG figures.
    #[arg(long, global = true)]
    pub plot: bool,
    /// Add wall-clock time to the report (breaks byte-identical output).
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Widths ω_p for p = 1..p_max as exact π multiples.
    Spectrum {
        #[arg(long, default_value_t = 20)]
        p_max: u64,
        #[arg(long, value_enum, default_value_t = Surface::Hemisphere)]
        surface: Surface,
    },
    /// Size and order of the perturbed length spectrum for degree d.
    Counting {
        #[arg(long, default_value_t = 2)]
        d: u64,
    },
    /// Hemi-ellipsoid with principal curve lengths π, π+μ, 2π+μ.
    Calibrate {
        #[arg(long)]
        mu: f64,
    },
    /// Integrates one geodesic and reports invariant drift.
    Geodesics(GeodesicCli),
    /// Closed billiard trajectories below a length cap.
    Billiards(BilliardCli),
    /// Level-set length of a polynomial by Crofton sampling and tracing.
    Crofton(CroftonCli),
    /// Largest level-set length over the degree-d polynomial family.
    SweepoutSup {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 400)]
        refine_steps: usize,
        #[arg(long, default_value_t = 4)]
        top_k: usize,
    },
    /// Runs every verification section.
    VerifyAll {
        #[arg(long, default_value_t = 2)]
        d_max: usize,
        /// Smaller sample sizes.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Debug, Args)]
pub struct GeodesicCli {
    /// Ellipsoid coefficients a₁,a₂,a₃.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.1, 1.2])]
    pub coeffs: Vec<f64>,
    /// Use the calibrated ellipsoid for this μ instead of --coeffs.
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    pub arc: f64,
    #[arg(long, value_delimiter = ',')]
    pub start: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub direction: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct BilliardCli {
    #[arg(long, default_value_t = 0.05)]
    pub mu: f64,
    #[arg(long, default_value_t = 7.0)]
    pub cap: f64,
    #[arg(long, default_value_t = 200)]
    pub grid_starts: usize,
    #[arg(long, default_value_t = 200)]
    pub grid_angles: usize,
    #[arg(long, default_value_t = 4)]
    pub max_bounces: usize,
}

#[derive(Debug, Args)]
pub struct CroftonCli {
    /// Compact form "i,j=c;..." for the monomials x^i y^j.
    #[arg(long, group = "source", allow_hyphen_values = true)]
    pub poly: Option<String>,
    /// JSON file {"degree": d, "coefficients": [...]}.
    #[arg(long, group = "source")]
    pub poly_file: Option<PathBuf>,
    /// Random unit-coefficient polynomial of this degree.
    #[arg(long, group = "source")]
    pub random: Option<usize>,
    /// Seed for --random; defaults to --seed.
    #[arg(long)]
    pub poly_seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = CroftonMethod::All)]
    pub method: CroftonMethod,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 60)]
    pub order: usize,
    /// Tracing step.
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
}

fn triple(v: &[f64], what: &str) -> Result<[f64; 3], CliError> {
    v.try_into()
        .map_err(|_| CliError::Usage(format!("--{what} needs three comma-separated numbers")))
}

fn dispatch(cfg: &RunConfig, command: Command) -> Result<Report, CliError> {
    match command {
        Command::Spectrum { p_max, surface } => commands::spectrum(cfg, p_max, surface, true),
        Command::Counting { d } => commands::counting(cfg, d, true),
        Command::Calibrate { mu } => commands::calibrate(cfg, mu),
        Command::Geodesics(g) => {
            let args = GeodesicArgs {
                coeffs: triple(&g.coeffs, "coeffs")?,
                mu: g.mu,
                arc: g.arc,
                start: g.start.as_deref().map(|v| triple(v, "start")).transpose()?,
                direction: g.direction.as_deref().map(|v| triple(v, "direction")).transpose()?,
            };
            commands::geodesics(cfg, &args)
        }
        Command::Billiards(b) => commands::billiards(
            cfg,
            &BilliardArgs {
                mu: b.mu,
                cap: b.cap,
                grid_starts: b.grid_starts,
                grid_angles: b.grid_angles,
                max_bounces: b.max_bounces,
            },
        ),
        Command::Crofton(c) => {
            let source = match (c.poly, c.poly_file, c.random) {
                (Some(p), None, None) => PolySource::Compact(p),
                (None, Some(f), None) => PolySource::File(f),
                (None, None, Some(degree)) => PolySource::Random {
                    degree,
                    seed: c.poly_seed.unwrap_or(cfg.seed),
                },
                _ => {
                    return Err(CliError::Usage(
                        "give exactly one of --poly, --poly-file, --random".into(),
                    ))
                }
            };
            commands::crofton(
                cfg,
                &CroftonArgs {
                    source,
                    method: c.method,
                    samples: c.samples,
                    order: c.order,
                    step: c.step,
                },
            )
        }
        Command::SweepoutSup {
            d,
            samples,
            refine_steps,
            top_k,
        } => {
            let budget = hemiwidth::sweepout::SupBudget {
                samples,
                refine_steps,
                top_k,
                ..commands::sup_budget(cfg, d)
            };
            commands::sweepout_sup(cfg, d, &budget, d <= 2)
        }
        Command::VerifyAll { d_max, quick } => commands::verify_all(cfg, d_max, quick),
    }
}

fn emit(cfg: &RunConfig, text: &str) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            }
            std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(passed) => {
            if passed {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("hemiwidth: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command line; `Ok(false)` when a check failed.
pub fn execute(cli: Cli) -> Result<bool, CliError> {
    let tolerances = Tolerances::with_overrides(&cli.tol)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = RunConfig {
        seed: cli.seed,
        tolerances,
        format: cli.format,
        out: cli.out,
        plot: cli.plot,
        timing: cli.timing,
    };
    let started = Instant::now();
    let mut report = dispatch(&cfg, cli.command)?;
    if cfg.timing {
        report.timing = Some(Timing {
            wall_seconds: started.elapsed().as_secs_f64(),
        });
    }
    emit(&cfg, &report.render(cfg.format)?)?;
    Ok(report.passed())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("hemiwidth").chain(args.iter().copied()))
    }

    #[test]
    fn global_flags_after_subcommand() {
        let c = parse(&["spectrum", "--p-max", "5", "--format", "json", "--tol", "crofton.modulus=1e-9"]).unwrap();
        assert_eq!(c.format, OutputFormat::Json);
        assert_eq!(c.tol, vec!["crofton.modulus=1e-9".to_string()]);
        assert!(matches!(c.command, Command::Spectrum { p_max: 5, surface: Surface::Hemisphere }));
    }

    #[test]
    fn rejects_unknown_surface_and_conflicting_sources() {
        assert!(parse(&["spectrum", "--surface", "torus"]).is_err());
        assert!(parse(&["crofton", "--poly", "1,0=1", "--random", "2"]).is_err());
    }

    #[test]
    fn coefficient_triples() {
        let c = parse(&["geodesics", "--coeffs", "1,2,3", "--start", "0,0,1"]).unwrap();
        let Command::Geodesics(g) = c.command else { panic!() };
        assert_eq!(g.coeffs, vec![1.0, 2.0, 3.0]);
        assert!(matches!(triple(&[1.0, 2.0], "coeffs"), Err(CliError::Usage(_))));
        assert_eq!(run(["hemiwidth", "geodesics", "--coeffs", "1,2"]), EXIT_USAGE);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["hemiwidth", "--out", "/dev/null", "counting", "--d", "1"]), EXIT_OK);
        assert_eq!(run(["hemiwidth", "counting", "--tol", "bogus=1"]), EXIT_USAGE);
        assert_eq!(run(["hemiwidth", "calibrate", "--mu", "0.6"]), EXIT_USAGE);
        assert_eq!(run(["hemiwidth", "frobnicate"]), EXIT_USAGE);
    }
}
