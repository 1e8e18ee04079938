//! Command-line front end. Builds and caches recurrence tables, runs the
//! experiments and writes JSON or CSV reports.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bvfun::{self, BVFunction};
use crate::error::{Error, Result};
use crate::fourier::{coefficients, kernel};
use crate::mrs::{cache_from_json, cache_to_json, mrs_a};
use crate::orthopoly::{gauss_rule, recurrence_table, DiscretizationConfig, RecurrenceTable};
use crate::verify::{
    convergence_experiment_with, lemma_suite, ExperimentOptions, LemmaConfig, Mode, RangePolicy,
    RhsForm, TheoremConstants,
};
use crate::weights::{self, WeightSpec};

pub const DEFAULT_CACHE_DIR: &str = ".orthoserie-cache";
pub const CACHE_ENV: &str = "ORTHOSERIE_CACHE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormArg {
    Split,
    KSum,
}

#[derive(Debug, Parser)]
#[command(
    name = "orthoserie",
    version,
    about = "Orthonormal polynomial expansions for exponential weights"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Cache directory for tables and MRS numbers.
    #[arg(long, global = true, env = CACHE_ENV)]
    cache_dir: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for the random polynomials of the restricted-range check.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ConstantArgs {
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long = "C")]
    big_c: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the MRS number a_t.
    Mrs {
        #[arg(long)]
        weight: String,
        #[arg(long)]
        t: f64,
    },
    /// Build (or load) the recurrence table up to degree N.
    Recur {
        #[arg(long)]
        weight: String,
        #[arg(long = "N")]
        big_n: usize,
    },
    /// Gauss nodes and Christoffel numbers of p_n.
    Nodes {
        #[arg(long)]
        weight: String,
        #[arg(long)]
        n: usize,
    },
    /// Expansion coefficients c_0..c_{N-1} of f.
    Expand {
        #[arg(long)]
        weight: String,
        #[arg(long)]
        f: String,
        #[arg(long = "N")]
        big_n: usize,
    },
    /// Evaluate the kernel K_n(x, t).
    Kernel {
        #[arg(long)]
        weight: String,
        #[arg(long)]
        n: usize,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
    },
    /// Partial sums against f(x) and the pointwise bound.
    Converge {
        #[arg(long)]
        weight: String,
        #[arg(long)]
        f: String,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, value_enum, default_value = "split")]
        form: FormArg,
        #[command(flatten)]
        constants: ConstantArgs,
    },
    /// Scale-free checks of the asymptotic relations.
    VerifyLemmas {
        #[arg(long)]
        weight: String,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, default_value_t = 20.0)]
        bracket: f64,
    },
}

/// Fully parsed settings shared by the subcommands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub weight: WeightSpec,
    pub f: Option<BVFunction>,
    pub n_list: Vec<usize>,
    pub x_list: Vec<f64>,
    pub constants: Option<TheoremConstants>,
    pub format: Option<Format>,
    pub cache_dir: PathBuf,
}

enum Failure {
    Usage(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_)
            | Error::InvalidWeight(_)
            | Error::InvalidBv(_)
            | Error::Domain(_)
            | Error::DegreeOutOfRange { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

/// Descriptor errors carry a one-line grammar reminder.
fn descriptor_error(e: Error, grammar: &str) -> Failure {
    let msg = e.to_string();
    if msg.contains(grammar) {
        Failure::Usage(msg)
    } else {
        Failure::Usage(format!("{msg}; {grammar}"))
    }
}

/// Run with explicit arguments (including the program name); returns the
/// process exit code: 0 success, 1 numeric failure, 2 usage error.
pub fn run_cli<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if code == 0 { stdout } else { stderr };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    match execute(&cli) {
        Ok(text) => {
            let written = match &cli.out {
                Some(path) => fs::write(path, text.as_bytes()),
                None => stdout.write_all(text.as_bytes()),
            };
            match written {
                Ok(()) => 0,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    1
                }
            }
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
        Err(Failure::Numeric(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
    }
}

fn cache_root(cli: &Cli) -> PathBuf {
    cli.cache_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR))
}

fn weight_dir(root: &Path, spec: &WeightSpec) -> PathBuf {
    root.join(spec.descriptor())
}

fn load_mrs(root: &Path, spec: &WeightSpec) {
    if let Ok(text) = fs::read_to_string(weight_dir(root, spec).join("mrs.json")) {
        // a damaged cache file is simply ignored and rebuilt
        let _ = cache_from_json(spec, &text);
    }
}

fn save_mrs(root: &Path, spec: &WeightSpec) -> Result<()> {
    let dir = weight_dir(root, spec);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("mrs.json"), cache_to_json(spec)?)?;
    Ok(())
}

/// Load `<cache>/<weight>/<N>.json` when its discretization matches,
/// otherwise build and store it.
pub fn cached_table(root: &Path, spec: &WeightSpec, n: usize) -> Result<RecurrenceTable> {
    let disc = DiscretizationConfig::default();
    let path = weight_dir(root, spec).join(format!("{n}.json"));
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(table) = RecurrenceTable::from_json(&text) {
            if table.n == n && table.weight == spec.descriptor() && table.disc.config == disc {
                return Ok(table);
            }
        }
    }
    let table = recurrence_table(spec, n, &disc)?;
    fs::create_dir_all(weight_dir(root, spec))?;
    fs::write(&path, table.to_json()?)?;
    Ok(table)
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn e16(v: f64) -> String {
    format!("{v:.16e}")
}

impl RunConfig {
    fn from_cli(cli: &Cli) -> std::result::Result<Self, Failure> {
        let (weight, f, n_list, x_list, constants) = match &cli.command {
            Command::Mrs { weight, .. } | Command::Recur { weight, .. } => {
                (weight, None, vec![], vec![], None)
            }
            Command::Nodes { weight, n } => (weight, None, vec![*n], vec![], None),
            Command::Expand { weight, f, big_n } => (weight, Some(f), vec![*big_n], vec![], None),
            Command::Kernel { weight, n, x, .. } => (weight, None, vec![*n], vec![*x], None),
            Command::Converge {
                weight,
                f,
                x,
                n,
                constants,
                ..
            } => (weight, Some(f), n.clone(), x.clone(), Some(constants)),
            Command::VerifyLemmas { weight, n, .. } => (weight, None, n.clone(), vec![], None),
        };
        let weight: WeightSpec = weight
            .parse()
            .map_err(|e| descriptor_error(e, weights::GRAMMAR))?;
        let f = f
            .map(|s| s.parse::<BVFunction>())
            .transpose()
            .map_err(|e| descriptor_error(e, bvfun::GRAMMAR))?;
        let constants = constants.map(|c| {
            let base = TheoremConstants::for_mode(Mode::for_weight(&weight));
            TheoremConstants {
                delta: c.delta.unwrap_or(base.delta),
                d: c.d.unwrap_or(base.d),
                c: c.c.unwrap_or(base.c),
                big_c: c.big_c.unwrap_or(base.big_c),
                c1: c.c1.unwrap_or(base.c1),
            }
        });
        Ok(Self {
            weight,
            f,
            n_list,
            x_list,
            constants,
            format: cli.format,
            cache_dir: cache_root(cli),
        })
    }
}

fn execute(cli: &Cli) -> std::result::Result<String, Failure> {
    let cfg = RunConfig::from_cli(cli)?;
    let spec = &cfg.weight;
    let root = cfg.cache_dir.as_path();
    load_mrs(root, spec);
    let out = run_command(cli, &cfg)?;
    save_mrs(root, spec)?;
    Ok(out)
}

fn run_command(cli: &Cli, cfg: &RunConfig) -> std::result::Result<String, Failure> {
    let spec = &cfg.weight;
    let root = cfg.cache_dir.as_path();
    let format = cfg.format;
    let text = match &cli.command {
        Command::Mrs { t, .. } => {
            let a = mrs_a(spec, *t)?;
            match format {
                Some(Format::Json) => json(&serde_json::json!({
                    "weight": spec.descriptor(), "t": t, "a": a
                }))?,
                Some(Format::Csv) => format!("weight,t,a\n{},{},{}\n", spec.descriptor(), e16(*t), e16(a)),
                None => format!("{a:?}\n"),
            }
        }
        Command::Recur { big_n, .. } => {
            let table = cached_table(root, spec, *big_n)?;
            match format {
                Some(Format::Csv) => {
                    let mut s = String::from("k,A,B\n");
                    for k in 0..=table.n {
                        let a = table.a.get(k).map_or(String::new(), |v| e16(*v));
                        s.push_str(&format!("{k},{a},{}\n", e16(table.b[k])));
                    }
                    s
                }
                _ => json(&table)?,
            }
        }
        Command::Nodes { n, .. } => {
            if *n == 0 {
                return Err(Failure::Usage("--n must be at least 1".into()));
            }
            let table = cached_table(root, spec, *n)?;
            let rule = gauss_rule(&table, *n)?;
            match format {
                Some(Format::Csv) => {
                    let mut s = String::from("k,x,lambda\n");
                    for k in 1..=rule.n {
                        s.push_str(&format!("{k},{},{}\n", e16(rule.x(k)), e16(rule.lambda(k))));
                    }
                    s
                }
                _ => json(&serde_json::json!({
                    "weight": spec.descriptor(),
                    "n": rule.n,
                    "nodes": rule.nodes,
                    "weights": rule.weights,
                }))?,
            }
        }
        Command::Expand { big_n, .. } => {
            if *big_n == 0 {
                return Err(Failure::Usage("--N must be at least 1".into()));
            }
            let f = cfg.f.as_ref().expect("expand parses f");
            let table = cached_table(root, spec, *big_n)?;
            let c = coefficients(&table, spec, f, *big_n)?;
            match format {
                Some(Format::Csv) => {
                    let mut s = String::from("k,c\n");
                    for (k, v) in c.c.iter().enumerate() {
                        s.push_str(&format!("{k},{}\n", e16(*v)));
                    }
                    s
                }
                _ => json(&c)?,
            }
        }
        Command::Kernel { n, x, t, .. } => {
            if *n == 0 {
                return Err(Failure::Usage("--n must be at least 1".into()));
            }
            let table = cached_table(root, spec, *n)?;
            let k = kernel(&table, spec, *n, *x, *t)?;
            match format {
                Some(Format::Json) => json(&serde_json::json!({
                    "weight": spec.descriptor(), "n": n, "x": x, "t": t, "K": k
                }))?,
                Some(Format::Csv) => format!(
                    "weight,n,x,t,K\n{},{n},{},{},{}\n",
                    spec.descriptor(),
                    e16(*x),
                    e16(*t),
                    e16(k)
                ),
                None => format!("{k:?}\n"),
            }
        }
        Command::Converge { form, .. } => {
            let f = cfg.f.as_ref().expect("converge parses f");
            let k = cfg.constants.expect("converge parses constants");
            let n_max = cfg.n_list.iter().copied().max().unwrap_or(0);
            if n_max == 0 {
                return Err(Failure::Usage("--n values must be positive".into()));
            }
            let table = cached_table(root, spec, n_max)?;
            let opts = ExperimentOptions {
                form: match form {
                    FormArg::Split => RhsForm::Split,
                    FormArg::KSum => RhsForm::KSum,
                },
                policy: RangePolicy::Report,
            };
            let rep =
                convergence_experiment_with(&table, spec, f, &cfg.x_list, &cfg.n_list, &k, opts)?;
            match format {
                Some(Format::Json) => json(&rep)?,
                _ => rep.to_csv(),
            }
        }
        Command::VerifyLemmas { bracket, .. } => {
            let n_max = cfg.n_list.iter().copied().max().unwrap_or(0);
            if n_max == 0 {
                return Err(Failure::Usage("--n values must be positive".into()));
            }
            let table = cached_table(root, spec, n_max)?;
            let lc = LemmaConfig {
                bracket: *bracket,
                seed: cli.seed,
                ..LemmaConfig::default()
            };
            let rep = lemma_suite(spec, &table, &cfg.n_list, &lc)?;
            match format {
                Some(Format::Csv) => {
                    let mut s = String::from("weight,name,n,min,max,pass\n");
                    for e in &rep.entries {
                        s.push_str(&format!(
                            "{},{},{},{},{},{}\n",
                            rep.weight,
                            e.name,
                            e.n.map(|v| v.to_string()).unwrap_or_default(),
                            e16(e.min),
                            e16(e.max),
                            e.pass
                        ));
                    }
                    s
                }
                _ => json(&rep)?,
            }
        }
    };
    Ok(text)
}
