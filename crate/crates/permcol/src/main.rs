//! Command-line front end. Every subcommand is a thin shell over one library
//! call: parse flags, run, serialize to --out or stdout. Parallelism and
//! determinism contracts live in the library; identical argv always yields
//! identical output bytes.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use serde_json::json;

use permcol::error::{Error, Result};
use permcol::experiments::{self, TrialSpec};
use permcol::graph::{sample_graph, DecoratedGraph, ModelParams};
use permcol::iso;
use permcol::moments::{self, MomentParams};
use permcol::rng::{derive_seed, seed_rng};
use permcol::solver;

/// Name of the environment variable that anchors relative --out paths.
const OUT_DIR_ENV: &str = "PERMCOL_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "permcol",
    version,
    about = "Permuted graph coloring: sampling, exact solving, moment bounds, and Monte Carlo",
    after_help = "Results go to --out (or stdout); diagnostics go to stderr.\n\
                  Relative --out paths resolve against $PERMCOL_OUT_DIR when it is set."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Cap the worker thread count (default: one per core).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum McMode {
    /// Estimate Pr[instance is colorable] by exact decision per trial.
    Colorable,
    /// Estimate E[X], E[X^2], E[Z] by exact counting per trial.
    Moments,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum IsoMode {
    /// Walk every nonempty subset (needs k^n <= 16).
    Exhaustive,
    /// Sample random subsets plus a structured family.
    Random,
}

/// Instance size: give the edge count directly or as an average degree.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct EdgeCount {
    /// Number of edges.
    #[arg(long)]
    m: Option<usize>,
    /// Average degree; the edge count becomes m = round(d n / 2), ties
    /// rounding away from zero.
    #[arg(long, allow_negative_numbers = true)]
    d: Option<f64>,
}

impl EdgeCount {
    fn resolve(&self, n: usize) -> Result<usize> {
        match (self.m, self.d) {
            (Some(m), None) => Ok(m),
            (None, Some(d)) => {
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::invalid(format!("average degree {d} must be >= 0")));
                }
                Ok(ModelParams::m_for_degree(n, d))
            }
            _ => unreachable!("clap group enforces exactly one"),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a random decorated instance and emit it as JSON.
    Gen {
        /// Number of vertices.
        #[arg(long)]
        n: usize,
        /// Number of colors.
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        edges: EdgeCount,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Decide whether a JSON instance is colorable.
    Solve {
        /// Instance file as produced by gen.
        #[arg(long = "in", value_name = "PATH")]
        input: PathBuf,
        /// Abort after this many tried assignments.
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Count proper colorings exactly (enumeration, capped at k^n states).
    Count {
        #[arg(long = "in", value_name = "PATH")]
        input: PathBuf,
        /// Refuse instances with more than 2^cap states.
        #[arg(long, default_value_t = solver::DEFAULT_LOG2_CAP, value_name = "CAP")]
        log2_cap: f64,
    },
    /// Exact weighted coloring count Z (cluster-count estimator).
    Zweight {
        #[arg(long = "in", value_name = "PATH")]
        input: PathBuf,
        #[arg(long, default_value_t = solver::DEFAULT_LOG2_CAP, value_name = "CAP")]
        log2_cap: f64,
    },
    /// Threshold bound table: first-moment, improved, and asymptotic bounds
    /// per k.
    Bounds {
        #[arg(long, default_value_t = 3)]
        k_min: u32,
        #[arg(long, default_value_t = 50)]
        k_max: u32,
        /// Bisection tolerance for the improved bound root.
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Scan the second-moment rate function over [0, 1]. JSON emits the
    /// certification report, CSV the raw zeta,phi,psi grid.
    ScanPhi {
        #[arg(long)]
        k: u32,
        /// Average degree.
        #[arg(long)]
        d: f64,
        /// Grid points over [0, 1] (at least 1000).
        #[arg(long, default_value_t = 100_000)]
        resolution: usize,
        /// Refinement tolerance around candidate maxima.
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Monte Carlo estimates over sampled instances.
    Mc {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        edges: EdgeCount,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = McMode::Colorable)]
        mode: McMode,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Locate where the colorability curve crosses a target probability by
    /// bisection on the edge count.
    Threshold {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// Trials per evaluated curve point.
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[arg(long, default_value_t = 0.5)]
        target: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Verify the product-cube inequality Z(S) >= 1 plus thickening
    /// monotonicity; emits a JSON report.
    IsoCheck {
        /// Cube arity (colors per axis).
        #[arg(long)]
        k: usize,
        /// Cube dimension (axes).
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = IsoMode::Exhaustive)]
        mode: IsoMode,
        /// Random subsets to draw (random mode only).
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Empirical checks of the distributional lemmas: available-color law at
    /// a star center, joint edge/self-loop image uniformity, and the degree
    /// marginal; emits a JSON report.
    LemmaChecks {
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Star center degree for the available-color check.
        #[arg(long, default_value_t = 4)]
        deg: usize,
        /// Vertices for the degree-model check.
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Edges for the degree-model check.
        #[arg(long, default_value_t = 15)]
        m: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successful outcomes, not usage errors.
            if e.kind() == clap::error::ErrorKind::DisplayHelp
                || e.kind() == clap::error::ErrorKind::DisplayVersion
            {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    if let Some(t) = cli.threads
        && let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global()
    {
        eprintln!("error: thread pool: {e}");
        return ExitCode::from(2);
    }
    match run(cli.cmd) {
        Ok(output) => match write_output(cli.out.as_deref(), &output) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn write_output(out: Option<&std::path::Path>, text: &str) -> Result<()> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            let resolved = match std::env::var_os(OUT_DIR_ENV) {
                Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
                _ => path.to_path_buf(),
            };
            std::fs::write(&resolved, text)
                .map_err(|e| Error::invalid(format!("writing {}: {e}", resolved.display())))
        }
    }
}

fn pretty<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::invalid(format!("serializing result: {e}")))?;
    s.push('\n');
    Ok(s)
}

// CSV floats use the shortest representation that parses back to the same
// f64, so the two formats encode identical values.
fn csv_f64(x: f64) -> String {
    format!("{x}")
}

fn run(cmd: Cmd) -> Result<String> {
    match cmd {
        Cmd::Gen { n, k, edges, seed } => {
            let m = edges.resolve(n)?;
            let params = ModelParams::new(n, m, k, seed)?;
            let g = sample_graph(&params, &mut seed_rng(seed));
            Ok(g.to_json() + "\n")
        }
        Cmd::Solve { input, budget } => {
            let g = DecoratedGraph::load(&input)?;
            pretty(&solver::decide(&g, budget)?)
        }
        Cmd::Count { input, log2_cap } => {
            let g = DecoratedGraph::load(&input)?;
            pretty(&solver::count_result_with_cap(&g, log2_cap)?)
        }
        Cmd::Zweight { input, log2_cap } => {
            let g = DecoratedGraph::load(&input)?;
            let z = solver::z_weight_with_cap(&g, log2_cap)?;
            pretty(&json!({
                "z": z.to_string(),
                "z_float": z.to_f64(),
                "colorable": z >= num_rational::BigRational::from_integer(1.into()),
            }))
        }
        Cmd::Bounds { k_min, k_max, tolerance, format } => {
            let rows = moments::bounds_table(k_min, k_max, tolerance)?;
            match format {
                Format::Json => pretty(&rows),
                Format::Csv => {
                    let mut out = String::from("k,fm_upper,improved_upper,asym_lower,asym_upper\n");
                    for r in &rows {
                        out.push_str(&format!(
                            "{},{},{},{},{}\n",
                            r.k,
                            csv_f64(r.fm_upper),
                            csv_f64(r.improved_upper),
                            csv_f64(r.asym_lower),
                            csv_f64(r.asym_upper)
                        ));
                    }
                    Ok(out)
                }
            }
        }
        Cmd::ScanPhi { k, d, resolution, tolerance, format } => {
            let p = MomentParams::new(k, d)?;
            match format {
                Format::Json => pretty(&moments::scan_second_moment(&p, resolution, tolerance)?),
                Format::Csv => {
                    if resolution < 1000 {
                        return Err(Error::invalid("scan needs a grid of at least 1000 points"));
                    }
                    let mut out = String::from("zeta,phi,psi\n");
                    for i in 0..=resolution {
                        let zeta = i as f64 / resolution as f64;
                        out.push_str(&format!(
                            "{},{},{}\n",
                            csv_f64(zeta),
                            csv_f64(moments::phi(zeta, &p)?),
                            csv_f64(moments::psi(zeta, &p)?)
                        ));
                    }
                    Ok(out)
                }
            }
        }
        Cmd::Mc { n, k, edges, trials, seed, mode, format } => {
            let m = edges.resolve(n)?;
            let params = ModelParams::new(n, m, k, seed)?;
            let spec = TrialSpec::new(params, trials, seed)?;
            match mode {
                McMode::Colorable => {
                    let r = experiments::mc_colorable(&spec)?;
                    match format {
                        Format::Json => pretty(&r),
                        Format::Csv => Ok(format!(
                            "d,m,trials,colorable,p_hat,ci_lo,ci_hi\n{},{},{},{},{},{},{}\n",
                            csv_f64(params.d()),
                            params.m,
                            r.trials,
                            r.colorable,
                            csv_f64(r.p_hat),
                            csv_f64(r.ci_lo),
                            csv_f64(r.ci_hi)
                        )),
                    }
                }
                McMode::Moments => {
                    let r = experiments::mc_moments(&spec)?;
                    match format {
                        Format::Json => pretty(&r),
                        Format::Csv => {
                            let mut out = String::from("quantity,mean,stderr,reference\n");
                            for (name, e) in [("x", r.x), ("x2", r.x2), ("z", r.z)] {
                                out.push_str(&format!(
                                    "{},{},{},{}\n",
                                    name,
                                    csv_f64(e.mean),
                                    csv_f64(e.stderr),
                                    e.reference.map(csv_f64).unwrap_or_default()
                                ));
                            }
                            Ok(out)
                        }
                    }
                }
            }
        }
        Cmd::Threshold { n, k, trials, target, seed, format } => {
            let r = experiments::threshold_bisect(n, k, trials, target, seed)?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            eprintln!(
                "d_hat = {:.4}, bracket = ({:.4}, {:.4})",
                r.d_hat, r.bracket.0, r.bracket.1
            );
            match format {
                Format::Json => pretty(&r),
                Format::Csv => {
                    let mut out = String::from("d,m,trials,colorable,p_hat,ci_lo,ci_hi\n");
                    for pt in &r.curve {
                        out.push_str(&format!(
                            "{},{},{},{},{},{},{}\n",
                            csv_f64(pt.d),
                            pt.m,
                            pt.trials,
                            pt.colorable,
                            csv_f64(pt.p_hat),
                            csv_f64(pt.ci_lo),
                            csv_f64(pt.ci_hi)
                        ));
                    }
                    Ok(out)
                }
            }
        }
        Cmd::IsoCheck { k, n, mode, trials, seed } => match mode {
            IsoMode::Exhaustive => {
                let r = iso::exhaustive_check(k, n)?;
                pretty(&json!({
                    "k": r.k,
                    "n": r.n,
                    "mode": "exhaustive",
                    "subsets": r.subsets,
                    "min_z": r.min_z.to_string(),
                    "argmin": r.argmin.member_points(),
                    "all_ge_one": r.all_ge_one,
                }))
            }
            IsoMode::Random => {
                let r = iso::random_check(k, n, trials, seed)?;
                pretty(&json!({
                    "k": r.k,
                    "n": r.n,
                    "mode": "random",
                    "subsets": r.subsets,
                    "min_z": r.min_z.to_string(),
                    "weight_failures": r.weight_failures,
                    "chain_failures": r.chain_failures,
                    "all_ok": r.all_ok,
                }))
            }
        },
        Cmd::LemmaChecks { k, deg, n, m, trials, seed } => {
            let available = experiments::check_available_colors(k, deg, trials, seed)?;
            let edge_indep = experiments::check_edge_indep(k, trials, derive_seed(seed, 1))?;
            let params = ModelParams::new(n, m, k, seed)?;
            let degree = experiments::check_degree_model(&params, trials, derive_seed(seed, 2))?;
            pretty(&json!({
                "available_colors": available,
                "edge_indep": edge_indep,
                "degree_model": degree,
            }))
        }
    }
}
