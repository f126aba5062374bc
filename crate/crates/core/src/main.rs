use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use parallel_analysis::error::{PaError, Result};
use parallel_analysis::harness::{self, SweepSpec};
use parallel_analysis::moments::{self, BoundCheck};
use parallel_analysis::simulate::{self, FactorModelSpec, SpikedModelSpec};
use parallel_analysis::{oracles, pa_select, seed, PaConfig};

#[derive(Parser)]
#[command(name = "pa", version, about = "Parallel Analysis: permutation-based selection of the number of factors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select the number of factors of a data matrix (rows are samples).
    Select {
        csv: PathBuf,
        /// First CSV line is a header.
        #[arg(long)]
        header: bool,
        /// PaConfig JSON; flags given on the command line override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        permutations: Option<usize>,
        #[arg(long)]
        percentile: Option<f64>,
        #[arg(long)]
        max_rank: Option<usize>,
        #[arg(long)]
        demean: bool,
        /// Count every exceeding rank instead of stopping at the first failure.
        #[arg(long)]
        no_stepwise: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "PA_OUTPUT_DIR", default_value = "pa-out")]
        out: PathBuf,
    },
    /// Draw one matrix from a factor-model or spiked-model spec and write it as CSV.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a Monte Carlo sweep from a built-in preset or a JSON spec.
    Sweep {
        preset: Option<String>,
        #[arg(long, conflicts_with = "preset")]
        spec: Option<PathBuf>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "PA_OUTPUT_DIR")]
        out: Option<PathBuf>,
        /// List the built-in presets and exit.
        #[arg(long)]
        list: bool,
    },
    /// Check the trace-moment bounds on random centered (u, v) pairs; one
    /// JSON record per pair and order. Exits with 1 if any check fails.
    VerifyMoments {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "2,3")]
        k: Vec<u32>,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Enumerate every permutation array (small n and p only; default 4 x 2).
        #[arg(long)]
        exhaustive: bool,
    },
    /// Print a closed-form reference value. Names: c_k N K V..., a_nk N K THETA V...,
    /// bbp_identity GAMMA, bbp_classical GAMMA, noise_edge GAMMA,
    /// shadowing_ratio N P, permuted_norm THETA N P, localization V...,
    /// localization_quoted CP, localization_moment CP.
    Oracle {
        name: String,
        #[arg(allow_negative_numbers = true)]
        args: Vec<f64>,
    },
}

/// Input of `simulate`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum SimulationSpec {
    FactorModel(FactorModelSpec),
    SpikedModel(SpikedModelSpec),
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| PaError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| PaError::Config(format!("{}: {e}", path.display())))
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string(value).expect("serializable"));
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Select {
            csv,
            header,
            config,
            permutations,
            percentile,
            max_rank,
            demean,
            no_stepwise,
            seed,
            out,
        } => {
            let mut cfg: PaConfig = match &config {
                Some(path) => read_json(path)?,
                None => PaConfig::default(),
            };
            if let Some(k) = permutations {
                cfg.num_permutations = k;
            }
            if let Some(q) = percentile {
                cfg.percentile = q;
            }
            if max_rank.is_some() {
                cfg.max_rank = max_rank;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.demean_columns |= demean;
            cfg.stepwise &= !no_stepwise;
            let x = harness::load_matrix_csv(&csv, header)?;
            let result = pa_select(&x, &cfg)?;
            let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("selection");
            let files = harness::emit_selection(&result, &out, &format!("{stem}_selection"))?;
            print_json(&serde_json::json!({
                "selected_rank": result.selected_rank,
                "n": x.nrows(),
                "p": x.ncols(),
                "max_rank": result.max_rank,
                "csv": files.csv,
            }));
        }
        Command::Simulate { spec, out, seed } => {
            let spec: SimulationSpec = read_json(&spec)?;
            let mut rng = seed::stream(seed, &[]);
            let x = match &spec {
                SimulationSpec::FactorModel(s) => simulate::simulate_factor_model(s, &mut rng)?,
                SimulationSpec::SpikedModel(s) => simulate::simulate_spiked(s, &mut rng)?,
            };
            let mut text = String::new();
            for row in x.row_iter() {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            std::fs::write(&out, text).map_err(|e| PaError::Io { path: out.clone(), source: e })?;
        }
        Command::Sweep {
            preset,
            spec,
            replicates,
            seed,
            out,
            list,
        } => {
            if list {
                for p in harness::presets() {
                    println!("{} v{}  {}", p.name, p.version, p.description);
                }
                return Ok(ExitCode::SUCCESS);
            }
            let mut sweep: SweepSpec = match (preset, spec) {
                (Some(name), None) => harness::preset(&name)?,
                (None, Some(path)) => read_json(&path)?,
                _ => return Err(PaError::invalid("give a preset name or --spec, or use --list")),
            };
            if let Some(r) = replicates {
                sweep.replicates = r;
            }
            if let Some(s) = seed {
                sweep.seed = s;
            }
            let dir = out.or_else(|| sweep.out_dir.clone()).unwrap_or_else(|| PathBuf::from("pa-out"));
            sweep.validate()?;
            let result = harness::run_sweep(&sweep)?;
            let files = harness::emit_sweep(&result, &dir)?;
            for pt in &result.points {
                print_json(&serde_json::json!({
                    "param": pt.param,
                    "mean_rank": pt.mean_rank,
                    "sd_rank": pt.sd_rank,
                    "replicates": pt.ranks.len(),
                }));
            }
            eprintln!("wrote {} ({:.1} s)", files.csv.display(), result.wall_time_secs);
        }
        Command::VerifyMoments {
            n,
            p,
            k,
            reps,
            pairs,
            seed,
            exhaustive,
        } => {
            let (n, p) = if exhaustive {
                (n.unwrap_or(4), p.unwrap_or(2))
            } else {
                (n.unwrap_or(100), p.unwrap_or(100))
            };
            if exhaustive && !moments::exhaustive_feasible(n, p) {
                return Err(PaError::invalid(format!(
                    "(n!)^p is too large to enumerate for n={n}, p={p}"
                )));
            }
            if !exhaustive && moments::exhaustive_feasible(n, p) {
                eprintln!("note: n={n}, p={p} is small enough that the bound check enumerates exactly");
            }
            let mut all_pass = true;
            for pair in 0..pairs {
                let mut rng = seed::stream(seed, &[pair as u64]);
                let (u, v) = moments::random_centered_pair(n, p, &mut rng);
                for &order in &k {
                    let check: BoundCheck = moments::check_bound(&u, &v, order, reps, &mut rng)?;
                    all_pass &= check.pass;
                    print_json(&serde_json::json!({
                        "pair": pair,
                        "k": check.estimate.k,
                        "estimate": check.estimate.estimate,
                        "std_error": check.estimate.std_error,
                        "replicates": check.estimate.replicates,
                        "bound": check.bound,
                        "exhaustive": check.estimate.exhaustive,
                        "n": n,
                        "p": p,
                        "slack": check.slack,
                        "pass": check.pass,
                    }));
                }
            }
            if !all_pass {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Oracle { name, args } => {
            let value = oracle(&name, &args)?;
            print_json(&serde_json::json!({ "oracle": name, "args": args, "value": value }));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn count(x: f64, what: &str) -> Result<usize> {
    if x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 {
        Ok(x as usize)
    } else {
        Err(PaError::invalid(format!("{what} must be a nonnegative integer, got {x}")))
    }
}

fn arity(name: &str, args: &[f64], n: usize) -> Result<()> {
    if args.len() != n {
        return Err(PaError::invalid(format!("{name} takes {n} argument(s), got {}", args.len())));
    }
    Ok(())
}

fn oracle(name: &str, args: &[f64]) -> Result<f64> {
    match name {
        "c_k" | "a_nk" => {
            let head = if name == "c_k" { 2 } else { 3 };
            if args.len() <= head {
                return Err(PaError::invalid(format!("{name} needs {head} leading arguments and a vector")));
            }
            let n = count(args[0], "n")?;
            let k = count(args[1], "k")? as u32;
            let v = args[head..].to_vec();
            if name == "c_k" {
                oracles::c_k(&v, n, k)
            } else {
                oracles::a_nk(&[args[2]], &[v], n, k)
            }
        }
        "bbp_identity" | "bbp_classical" | "noise_edge" => {
            arity(name, args, 1)?;
            match name {
                "bbp_identity" => oracles::bbp_threshold_identity_noise(args[0]),
                "bbp_classical" => oracles::bbp_threshold_classical(args[0]),
                _ => oracles::noise_edge_identity(args[0]),
            }
        }
        "shadowing_ratio" => {
            arity(name, args, 2)?;
            oracles::shadowing_ratio(count(args[0], "n")?, count(args[1], "p")?)
        }
        "permuted_norm" => {
            arity(name, args, 3)?;
            oracles::permuted_norm_heuristic(args[0], count(args[1], "n")?, count(args[2], "p")?)
        }
        "localization" => simulate::localization(args),
        "localization_quoted" | "localization_moment" => {
            arity(name, args, 1)?;
            if args[0].is_nan() || args[0] <= 0.0 {
                return Err(PaError::invalid("support size must be positive"));
            }
            Ok(if name == "localization_quoted" {
                oracles::expected_localization_quoted(args[0])
            } else {
                oracles::expected_localization_moment(args[0])
            })
        }
        _ => Err(PaError::invalid(format!("unknown oracle {name:?}"))),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
