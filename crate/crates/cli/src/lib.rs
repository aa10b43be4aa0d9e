//! The `dnt` command line: every pipeline of `dnt-core` as a subcommand that
//! reads JSON from a path or standard input and writes JSON to standard output.
//!
//! Exit codes: `0` success or affirmative verdict, `2` well-posed negative
//! verdict (incompatible, not decomposable, not extremal, not a DNT), `1`
//! bad input, usage error or solver failure.

use std::fs;
use std::io::Read;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use dnt_core::dnt::{
    self, build_trine_dnt, rows, rows_and_columns, Dnt, RandomDntMethod,
    DEFAULT_DECOMPOSE_TOL,
};
use dnt_core::formats::{self, to_json_string, FormatError};
use dnt_core::jointmeas::{jm_check, JmInstance, DEFAULT_JM_TOL};
use dnt_core::povm::{povm_is_extremal, random_povm};
use dnt_core::stochastic::bvn_decompose;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NEGATIVE: i32 = 2;

const MATRIX_FORMAT: &str = "\
Matrix: {\"rows\": r, \"cols\": c, \"data\": [[re, im], ...]} (row-major).";

const DNT_FORMAT: &str = "\
DNT file: {\"n\": n, \"dim\": d, \"grid\": [[matrix, ...], ...]}, n rows of n matrices.
Example (n = 1, d = 1):
  {\"n\": 1, \"dim\": 1, \"grid\": [[{\"rows\": 1, \"cols\": 1, \"data\": [[1, 0]]}]]}";

const POVM_FORMAT: &str = "\
POVM file: {\"dim\": d, \"elements\": [matrix, ...]}.
Example (a fair coin, d = 1):
  {\"dim\": 1, \"elements\": [{\"rows\": 1, \"cols\": 1, \"data\": [[0.5, 0]]},
                          {\"rows\": 1, \"cols\": 1, \"data\": [[0.5, 0]]}]}";

const JM_FORMAT: &str = "\
Instance file: {\"povms\": [povm, ...]}, all with the same outcome count and dimension.
Example: {\"povms\": [<POVM file>, <POVM file>]}
Output: {\"compatible\": bool, \"eta\": real, \"mother\": {\"povm\", \"map\"} | null, \"solver_residuals\": {...}}.
The mother is indexed by outcome tuples (first measurement most significant) with
marginal post-processing; map files are {\"m\", \"n\", \"K\", \"probs\": [[[...]]]} indexed [i][j][k].";

const BVN_FORMAT: &str = "\
Input: {\"n\": n, \"data\": [[...], ...]}, a doubly stochastic matrix.
Example: {\"n\": 2, \"data\": [[0.7, 0.3], [0.3, 0.7]]}
Output: {\"terms\": [{\"weight\": w, \"perm\": [images]}]}, images one-based; the
permutation puts a one at (perm[j], j).";

#[derive(Debug, Parser)]
#[command(
    name = "dnt",
    version,
    about = "Doubly normalised tensors of PSD operators",
    long_about = "Doubly normalised tensors (DNTs) of PSD operators: synthesis from coefficient \
                  POVMs, permutation-tensor decomposition, joint measurability and related tools.\n\n\
                  Every command reads its input from PATH or, when PATH is omitted or '-', from \
                  standard input, and writes one JSON document to standard output with floats at \
                  17 significant digits. Exit codes: 0 success/affirmative, 2 negative verdict, \
                  1 error.",
    after_help = MATRIX_FORMAT
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Input {
    /// Input file; standard input when omitted or '-'.
    path: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check that a grid is a DNT (exit 2 if it is well-formed but not a DNT).
    #[command(after_help = DNT_FORMAT)]
    Validate(Input),
    /// Build the DNT sum_l pi_l (x) Q_l from a coefficient POVM with n! outcomes.
    #[command(after_help = "Coefficients are in lexicographic permutation order.\n\n".to_string() + POVM_FORMAT)]
    Synth {
        /// Coefficient POVM file; standard input when omitted or '-'.
        #[arg(long)]
        coeff: Option<String>,
    },
    /// Decompose a DNT into permutation tensors (POVM coefficients) or affinely.
    #[command(after_help = "Permutation output: {\"decomposable\", \"eta\", \"decomposition\": {\"n\", \"coefficients\": [matrix x n!]} | null, \"solver_residuals\"}.\n\
Affine output: {\"n\", \"coefficients\", \"residual\", \"psd_flags\"}.\n\n".to_string() + DNT_FORMAT)]
    Decompose {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum)]
        mode: DecomposeMode,
        /// Decomposable iff eta* >= 1 - tol (permutation mode).
        #[arg(long, default_value_t = DEFAULT_DECOMPOSE_TOL)]
        tol: f64,
    },
    /// Joint measurability of a POVM family.
    #[command(after_help = JM_FORMAT)]
    Jm {
        #[command(flatten)]
        input: Input,
        /// Compatible iff eta* >= 1 - tol.
        #[arg(long, default_value_t = DEFAULT_JM_TOL)]
        tol: f64,
    },
    /// Joint measurability of the rows of a DNT.
    #[command(name = "jm-rows", after_help = DNT_FORMAT)]
    JmRows {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = DEFAULT_JM_TOL)]
        tol: f64,
    },
    /// Joint measurability of the rows and columns of a DNT together.
    #[command(name = "jm-all", after_help = DNT_FORMAT)]
    JmAll {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = DEFAULT_JM_TOL)]
        tol: f64,
    },
    /// Birkhoff-von Neumann decomposition of a doubly stochastic matrix.
    #[command(after_help = BVN_FORMAT)]
    Bvn(Input),
    /// Product pseudo-mother of the rows of a DNT.
    #[command(name = "pseudo-mother", after_help = "Output: {\"order\": [...], \"elements\": {\"b1-..-bn\": matrix}, \"report\": {...}}, keys one-based.\n\n".to_string() + DNT_FORMAT)]
    PseudoMother {
        #[command(flatten)]
        input: Input,
        /// Product order as one-based row indices, e.g. 3,1,2; defaults to 1,..,n.
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<usize>>,
    },
    /// Print the qubit trine DNT, whose rows are not jointly measurable.
    Trine,
    /// Mother measurement A_ab / n of the trivial pair (I/n, .., I/n), as a grid.
    #[command(name = "trivial-mother", after_help = DNT_FORMAT)]
    TrivialMother(Input),
    /// Rebuild a DNT from a trivial-pair mother (a grid or a POVM with n^2 elements).
    #[command(name = "from-trivial-mother", after_help = "Input: the grid written by trivial-mother, or a POVM file with n^2 elements in row-major order.\n\n".to_string() + DNT_FORMAT)]
    FromTrivialMother(Input),
    /// Extremality of a POVM or of a DNT (exit 2 if not extremal).
    #[command(after_help = "Output: {\"extremal\", \"kernel_dimension\"} plus \"rows_columns_extremal\" for DNTs.\n\n".to_string() + POVM_FORMAT + "\n\n" + DNT_FORMAT)]
    Extremal {
        #[arg(long, conflicts_with = "dnt", required_unless_present = "dnt")]
        povm: Option<String>,
        #[arg(long)]
        dnt: Option<String>,
    },
    /// Seeded random POVM or DNT.
    Random {
        #[arg(long, value_enum)]
        kind: RandomKind,
        /// Outcomes (POVM) or grid side (DNT).
        #[arg(long)]
        n: usize,
        /// Hilbert-space dimension.
        #[arg(long)]
        d: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Method::Coefficient)]
        method: Method,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DecomposeMode {
    Permutation,
    Affine,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RandomKind {
    Povm,
    Dnt,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Coefficient,
    Sinkhorn,
}

/// Outcome of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandResult {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CommandResult {
    fn json(exit_code: i32, value: &serde_json::Value) -> Self {
        Self {
            exit_code,
            stdout: to_json_string(value),
            stderr: String::new(),
        }
    }

    fn error(message: impl std::fmt::Display) -> Self {
        Self {
            exit_code: EXIT_ERROR,
            stdout: String::new(),
            stderr: format!("error: {message}\n"),
        }
    }
}

fn verdict(ok: bool) -> i32 {
    if ok {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    }
}

fn read_input(path: Option<&str>, stdin: &mut dyn Read) -> Result<(String, String), String> {
    match path {
        None | Some("-") => {
            let mut s = String::new();
            stdin
                .read_to_string(&mut s)
                .map_err(|e| format!("<stdin>: {e}"))?;
            Ok(("<stdin>".into(), s))
        }
        Some(p) => fs::read_to_string(p)
            .map(|s| (p.to_string(), s))
            .map_err(|e| format!("{p}: {e}")),
    }
}

fn located(source: &str, e: FormatError) -> String {
    format!("{source}: {e}")
}

/// Runs one command; `argv[0]` is the program name.
pub fn run(argv: &[String], stdin: &mut dyn Read) -> CommandResult {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                CommandResult {
                    exit_code: EXIT_ERROR,
                    stdout: String::new(),
                    stderr: rendered,
                }
            } else {
                // --help and --version
                CommandResult {
                    exit_code: EXIT_OK,
                    stdout: rendered,
                    stderr: String::new(),
                }
            };
        }
    };
    match execute(cli.command, stdin) {
        Ok(r) => r,
        Err(msg) => CommandResult::error(msg),
    }
}

fn load<T>(
    path: Option<&str>,
    stdin: &mut dyn Read,
    parse: impl Fn(&str) -> Result<T, FormatError>,
) -> Result<T, String> {
    let (source, text) = read_input(path, stdin)?;
    parse(&text).map_err(|e| located(&source, e))
}

fn execute(command: Command, stdin: &mut dyn Read) -> Result<CommandResult, String> {
    let err = |e: &dyn std::fmt::Display| e.to_string();
    Ok(match command {
        Command::Validate(input) => {
            let (source, text) = read_input(input.path.as_deref(), stdin)?;
            let (n, grid) = formats::parse_dnt_grid(&text).map_err(|e| located(&source, e))?;
            match Dnt::from_flat(n, grid) {
                Ok(d) => CommandResult::json(
                    EXIT_OK,
                    &json!({ "valid": true, "n": d.n(), "dim": d.dim() }),
                ),
                Err(e) => {
                    let mut r = CommandResult::json(
                        EXIT_NEGATIVE,
                        &json!({ "valid": false, "reason": e.to_string() }),
                    );
                    r.stderr = format!("{source}: {e}\n");
                    r
                }
            }
        }
        Command::Synth { coeff } => {
            let q = load(coeff.as_deref(), stdin, formats::parse_povm)?;
            let d = dnt::synthesize(&q).map_err(|e| err(&e))?;
            CommandResult::json(EXIT_OK, &formats::dnt_value(&d))
        }
        Command::Decompose { input, mode, tol } => {
            let d = load(input.path.as_deref(), stdin, formats::parse_dnt)?;
            match mode {
                DecomposeMode::Permutation => {
                    let v = dnt::decide_permutation_decomposable(&d, tol).map_err(|e| err(&e))?;
                    CommandResult::json(verdict(v.decomposable), &formats::decomposition_verdict_value(&v))
                }
                DecomposeMode::Affine => {
                    let a = dnt::affine_decompose(&d).map_err(|e| err(&e))?;
                    CommandResult::json(verdict(a.success()), &formats::affine_decomposition_value(&a))
                }
            }
        }
        Command::Jm { input, tol } => {
            let inst = load(input.path.as_deref(), stdin, formats::parse_jm_instance)?;
            jm_result(&inst, tol)?
        }
        Command::JmRows { input, tol } => {
            let d = load(input.path.as_deref(), stdin, formats::parse_dnt)?;
            jm_result(&JmInstance::new(rows(&d)).map_err(|e| err(&e))?, tol)?
        }
        Command::JmAll { input, tol } => {
            let d = load(input.path.as_deref(), stdin, formats::parse_dnt)?;
            jm_result(&JmInstance::new(rows_and_columns(&d)).map_err(|e| err(&e))?, tol)?
        }
        Command::Bvn(input) => {
            let m = load(input.path.as_deref(), stdin, formats::parse_doubly_stochastic)?;
            let b = bvn_decompose(&m).map_err(|e| err(&e))?;
            CommandResult::json(EXIT_OK, &formats::bvn_value(&b))
        }
        Command::PseudoMother { input, order } => {
            let d = load(input.path.as_deref(), stdin, formats::parse_dnt)?;
            let order = order
                .map(|o| {
                    o.iter()
                        .map(|&i| i.checked_sub(1).ok_or("--order indices are one-based".to_string()))
                        .collect::<Result<Vec<_>, _>>()
                })
                .transpose()?;
            let pm = dnt::pseudo_mother(&rows(&d), order.as_deref()).map_err(|e| err(&e))?;
            CommandResult::json(EXIT_OK, &formats::pseudo_mother_value(&pm))
        }
        Command::Trine => CommandResult::json(EXIT_OK, &formats::dnt_value(&build_trine_dnt())),
        Command::TrivialMother(input) => {
            let d = load(input.path.as_deref(), stdin, formats::parse_dnt)?;
            let m = dnt::mother_of_trivial_pair(&d).map_err(|e| err(&e))?;
            CommandResult::json(EXIT_OK, &formats::trivial_mother_value(&m))
        }
        Command::FromTrivialMother(input) => {
            let m = load(input.path.as_deref(), stdin, formats::parse_trivial_mother)?;
            let d = dnt::dnt_from_trivial_mother(&m).map_err(|e| err(&e))?;
            CommandResult::json(EXIT_OK, &formats::dnt_value(&d))
        }
        Command::Extremal { povm, dnt: dnt_path } => match (povm, dnt_path) {
            (Some(p), _) => {
                let p = load(Some(&p), stdin, formats::parse_povm)?;
                let r = povm_is_extremal(&p).map_err(|e| err(&e))?;
                CommandResult::json(verdict(r.extremal), &formats::povm_extremality_value(&r))
            }
            (None, Some(p)) => {
                let d = load(Some(&p), stdin, formats::parse_dnt)?;
                let r = dnt::dnt_is_extremal(&d).map_err(|e| err(&e))?;
                CommandResult::json(verdict(r.extremal), &formats::dnt_extremality_value(&r))
            }
            (None, None) => return Err("one of --povm or --dnt is required".into()),
        },
        Command::Random {
            kind,
            n,
            d,
            seed,
            method,
        } => match kind {
            RandomKind::Povm => {
                let p = random_povm(n, d, seed).map_err(|e| err(&e))?;
                CommandResult::json(EXIT_OK, &formats::povm_value(&p))
            }
            RandomKind::Dnt => {
                let method = match method {
                    Method::Coefficient => RandomDntMethod::Coefficient,
                    Method::Sinkhorn => RandomDntMethod::Sinkhorn,
                };
                let g = dnt::random_dnt(n, d, seed, method).map_err(|e| err(&e))?;
                CommandResult::json(EXIT_OK, &formats::dnt_value(&g))
            }
        },
    })
}

fn jm_result(inst: &JmInstance, tol: f64) -> Result<CommandResult, String> {
    let v = jm_check(inst, tol).map_err(|e| e.to_string())?;
    Ok(CommandResult::json(verdict(v.compatible), &formats::jm_verdict_value(&v)))
}

