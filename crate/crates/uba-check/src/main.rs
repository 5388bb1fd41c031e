//! Command-line front-end: measuring, fixture generation, oracle
//! cross-validation and statistical sanity sampling.
//!
//! Exit codes: 0 success, 2 ambiguous input automaton, 3 parse or I/O
//! error, 4 numeric or precondition failure, 64 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use uba_check::automata::{parse_hoa, Nba};
use uba_check::engine::{self, Method, Options};
use uba_check::families;
use uba_check::markov::{parse_dtmc, uniform_chain, Dtmc};
use uba_check::product::build_product;
use uba_check::Error;

const EXIT_AMBIGUOUS: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_NUMERIC: u8 = 4;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "uba-check",
    version,
    about = "Probabilistic model checking of Markov chains against unambiguous Büchi automata"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the probability that the chain satisfies the automaton
    Measure {
        /// Automaton in HOA format (state-based Büchi)
        hoa: PathBuf,
        /// Markov chain in the textual DTMC format
        dtmc: Option<PathBuf>,
        /// Measure under the uniform distribution on Σ^ω instead of a chain
        #[arg(long, conflicts_with = "dtmc")]
        uniform: bool,
        #[command(flatten)]
        engine: EngineArgs,
        /// Print the JSON report instead of the bare probability
        #[arg(long)]
        json: bool,
        /// Print generated cuts (anchor, word, members) to stderr
        #[arg(long)]
        emit_cut: bool,
        /// Write the product graph in DOT format to this path
        #[arg(long, value_name = "PATH")]
        product_dot: Option<PathBuf>,
    },
    /// Emit a built-in automaton family (plus its chain, for paired families)
    Gen {
        /// Family name
        family: Family,
        /// Size parameter (required for complete, nearly-complete, fig1-left)
        k: Option<u32>,
        /// Write <family>[-k].hoa (and .dtmc) into this directory instead of stdout
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Exact powerset-absorption probability (strongly connected automata)
    Oracle {
        hoa: PathBuf,
        dtmc: Option<PathBuf>,
        #[arg(long, conflicts_with = "dtmc")]
        uniform: bool,
    },
    /// Estimate the blocking-prefix frequency by sampling (sanity check only)
    Sample {
        hoa: PathBuf,
        dtmc: Option<PathBuf>,
        #[arg(long, conflicts_with = "dtmc")]
        uniform: bool,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        /// Prefix length bound per sample
        #[arg(long, default_value_t = 256)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct EngineArgs {
    /// SCC positivity / eigenvector method
    #[arg(long, value_enum, default_value_t = MethodArg::Power)]
    method: MethodArg,
    /// Convergence threshold of the power iteration
    #[arg(long, default_value_t = 1e-10)]
    epsilon: f64,
    /// Iteration budget before the rank-based tie breaker
    #[arg(long, default_value_t = 1_000_000)]
    max_iter: usize,
    /// Pivot tolerance of rank computations, relative to the row maximum
    #[arg(long, default_value_t = 1e-9)]
    rank_tol: f64,
    /// Skip the quadratic ambiguity check on the input automaton
    #[arg(long)]
    trust_unambiguous: bool,
    /// Worker threads for independent SCCs
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Power,
    Rank,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Family {
    Complete,
    NearlyComplete,
    Fig1Left,
    Fig1Right,
    Blw13,
}

impl EngineArgs {
    fn to_options(&self) -> Options {
        Options {
            method: match self.method {
                MethodArg::Power => Method::Power,
                MethodArg::Rank => Method::Rank,
            },
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            rank_tol: self.rank_tol,
            trust_unambiguous: self.trust_unambiguous,
            workers: self.workers,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("UBA_CHECK_LOG"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprint!("{e}");
            return ExitCode::from(EXIT_USAGE);
        }
        Err(e) => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if let Error::Ambiguous { witness } = &err {
                eprintln!(
                    "  two accepting runs over the same word:\n  run 1: {:?}\n  run 2: {:?}",
                    witness.run_a, witness.run_b
                );
            }
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Ambiguous { .. } => EXIT_AMBIGUOUS,
        Error::HoaSyntax { .. }
        | Error::UnsupportedAcceptance(_)
        | Error::UnsupportedHoaFeature(_)
        | Error::Dtmc { .. }
        | Error::AlphabetMismatch(_)
        | Error::Io(_) => EXIT_PARSE,
        Error::Numeric(_) | Error::Precondition(_) => EXIT_NUMERIC,
        Error::Config(_) => EXIT_USAGE,
    }
}

fn load_nba(path: &Path) -> Result<Nba, Error> {
    let text = std::fs::read_to_string(path)?;
    parse_hoa(&text)
}

fn load_chain(dtmc: &Option<PathBuf>, uniform: bool, nba: &Nba) -> Result<Dtmc, Error> {
    match (dtmc, uniform) {
        (Some(path), false) => {
            let text = std::fs::read_to_string(path)?;
            parse_dtmc(&text)
        }
        (None, true) => uniform_chain(nba.alphabet()),
        (None, false) => Err(Error::Config(
            "either a DTMC file or --uniform is required".into(),
        )),
        (Some(_), true) => unreachable!("clap conflict"),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Measure { hoa, dtmc, uniform, engine, json, emit_cut, product_dot } => {
            let nba = load_nba(&hoa)?;
            let chain = load_chain(&dtmc, uniform, &nba)?;
            let opts = engine.to_options();
            if let Some(path) = &product_dot {
                let prod = build_product(&chain, &nba)?;
                std::fs::write(path, prod.to_dot(&chain))?;
            }
            let result = if uniform {
                engine::measure_uniform(&nba, &opts)?
            } else {
                engine::measure(&chain, &nba, &opts)?
            };
            if emit_cut {
                for cut in &result.diagnostics.cuts {
                    let members: Vec<String> = cut
                        .members
                        .iter()
                        .map(|&(s, q)| format!("({s},{q})"))
                        .collect();
                    eprintln!(
                        "cut[scc {}]{}: anchor ({},{}), word {:?}, members {{{}}}",
                        cut.component,
                        if cut.via_shortcut { " (shortcut)" } else { "" },
                        cut.anchor.0,
                        cut.anchor.1,
                        cut.word,
                        members.join(", "),
                    );
                }
            }
            log::info!(
                "product nodes: {}, residual: {:.3e}, wall: {} ms",
                result.diagnostics.product_nodes,
                result.diagnostics.residual_max,
                result.diagnostics.wall_ms
            );
            if json {
                println!("{}", serde_json::to_string_pretty(&result.json_report()).unwrap());
            } else {
                println!("{:.12}", result.probability);
            }
            Ok(())
        }
        Command::Gen { family, k, out } => generate(family, k, out),
        Command::Oracle { hoa, dtmc, uniform } => {
            let nba = load_nba(&hoa)?;
            let chain = load_chain(&dtmc, uniform, &nba)?;
            let result = engine::powerset_absorption_oracle(&nba, &chain)?;
            match &result.exact {
                Some(r) => println!("{} (= {:.12})", r, result.value),
                None => println!("{:.12}", result.value),
            }
            Ok(())
        }
        Command::Sample { hoa, dtmc, uniform, samples, horizon, seed } => {
            let nba = load_nba(&hoa)?;
            let chain = load_chain(&dtmc, uniform, &nba)?;
            let est = engine::sample_blocking(&nba, &chain, samples, horizon, seed)?;
            eprintln!(
                "blocked-prefix frequency over {samples} samples (horizon {horizon}); \
                 a statistical lower bound on 1 - Pr, not an exact value"
            );
            println!("{est:.6}");
            Ok(())
        }
    }
}

fn generate(family: Family, k: Option<u32>, out: Option<PathBuf>) -> Result<(), Error> {
    let needs_k = matches!(family, Family::Complete | Family::NearlyComplete | Family::Fig1Left);
    let k = match (needs_k, k) {
        (true, Some(k)) if k >= 1 => Some(k),
        (true, _) => {
            return Err(Error::Config("this family requires a parameter k >= 1".into()))
        }
        (false, Some(_)) => {
            return Err(Error::Config("this family takes no parameter".into()))
        }
        (false, None) => None,
    };

    let (name, nba, chain): (String, Nba, Option<Dtmc>) = match family {
        Family::Complete => {
            let k = k.unwrap();
            (format!("complete-{k}"), families::complete_automaton(k), None)
        }
        Family::NearlyComplete => {
            let k = k.unwrap();
            (format!("nearly-complete-{k}"), families::nearly_complete_automaton(k), None)
        }
        Family::Fig1Left => {
            let k = k.unwrap();
            let (nba, chain) = families::fig1_left(k);
            (format!("fig1-left-{k}"), nba, Some(chain))
        }
        Family::Fig1Right => ("fig1-right".to_string(), families::fig1_right(), None),
        Family::Blw13 => {
            let (nba, chain) = families::blw13();
            ("blw13".to_string(), nba, Some(chain))
        }
    };

    let hoa_text = families::write_hoa(&nba, &name)?;
    match out {
        Some(dir) => {
            std::fs::create_dir_all(&dir)?;
            let hoa_path = dir.join(format!("{name}.hoa"));
            std::fs::write(&hoa_path, &hoa_text)?;
            eprintln!("wrote {}", hoa_path.display());
            if let Some(chain) = &chain {
                let dtmc_path = dir.join(format!("{name}.dtmc"));
                std::fs::write(&dtmc_path, chain.serialize())?;
                eprintln!("wrote {}", dtmc_path.display());
            }
        }
        None => {
            print!("{hoa_text}");
            if let Some(chain) = &chain {
                println!();
                print!("{}", chain.serialize());
            }
        }
    }
    Ok(())
}
