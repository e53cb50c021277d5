//! `definetti` command-line runner: parses flags and config, runs the
//! verification suites and writes reports and CSV tables.

pub mod config;
pub mod suites;

use std::fmt;
use std::io::Write;
use std::path::Path;

use clap::{Parser, Subcommand};
use definetti_core::{Error, VerificationReport};

use config::{load_config, Opts};
use suites::{run_suite, SuiteOutput, Table};

pub const MODE_CAP_ENV: &str = "DEFINETTI_MODE_CAP";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(Error::Resource { .. }) => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Io(m) => write!(f, "io: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "definetti", version, about = "Numerical certification of fermionic de Finetti bounds")]
#[command(after_help = "Exit codes: 0 all checks pass, 1 some check fails, 2 usage or config error, 3 resource cap.\n\
Environment: DEFINETTI_MODE_CAP overrides the dense mode cap (default 12).\n\
With --out DIR each command writes report.txt, report.json and the CSV tables listed in its help.")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Symbolic algebra against dense matrices, pinching and Cauchy-Schwarz suites.
    #[command(after_help = "CSV:\n  algebra.csv: case,V,p,product_diff,adjoint_diff,permutation_diff\n  \
pinching.csv, cauchy_schwarz.csv: case,V,p,site,sign,lhs,rhs")]
    CheckAlgebra(Opts),
    /// Permutation invariance of mu-family states or a fixture.
    #[command(after_help = "CSV:\n  invariance.csv: V,p,input,condition1,condition2,full,words,permutations,exhaustive,pass,status")]
    CheckInvariance(Opts),
    /// Odd-part bound on reduced states.
    #[command(after_help = "CSV:\n  lemma3.csv: V,p,input,k,lhs,rhs,pass,status\n\
status is ok, not-a-state, operator (with --allow-nonpositive) or precondition-failed")]
    VerifyLemma3(Opts),
    /// Distance of reduced states to the best product mixture found.
    #[command(after_help = "CSV:\n  theorem1.csv: V,p,input,k,distance,bound,components,pass,status\n  \
theorem1_components.csv: V,p,input,k,component,weight,purity,off_diagonal")]
    VerifyTheorem1(Opts),
    /// Fourier cumulants of product states: closed form, delta rule, suppression.
    #[command(after_help = "CSV:\n  lemma4.csv: V,w,ops,direct_re,direct_im,closed_re,closed_im,abs_diff\n  \
suppression.csv: V,ops,lhs,rhs,K4_single,ratio")]
    VerifyClt(Opts),
    /// Gaussian deviation scaling.
    #[command(after_help = "CSV:\n  corollary_slope.csv: p,k,deviation\n  \
corollary_mu.csv: V,mu,k,deviation,rate,constant,pass")]
    VerifyCorollary(Opts),
    /// Circulant 1-RDM spectrum formula and off-diagonal bound.
    #[command(after_help = "CSV:\n  rdm_spectrum.csv: V,a,b_re,b_im,k,formula,direct,abs_diff (singular k marked `singular`)\n  \
rdm_mu.csv: V,mu,b_abs,bound,min_eig,max_eig,pass")]
    RdmSpectrum(Opts),
    /// Ground-state energy against the best product state.
    #[command(after_help = "CSV:\n  gs_bound.csv: family,V,p,k,e_ground,e_product,gap,bound,degeneracy,invariance_violation,label,pass\n  \
gs_convexity.csv: family,V,mu,k,mixture_energy,product_min,pass\n\
Families: field, pair-hopping, majorana-pair, interacting, hubbard")]
    GsBound(Opts),
    /// Every suite with its defaults; writes the union of all tables.
    All(Opts),
}

impl Command {
    fn parts(self) -> (&'static str, Opts) {
        match self {
            Command::CheckAlgebra(o) => ("check-algebra", o),
            Command::CheckInvariance(o) => ("check-invariance", o),
            Command::VerifyLemma3(o) => ("verify-lemma3", o),
            Command::VerifyTheorem1(o) => ("verify-theorem1", o),
            Command::VerifyClt(o) => ("verify-clt", o),
            Command::VerifyCorollary(o) => ("verify-corollary", o),
            Command::RdmSpectrum(o) => ("rdm-spectrum", o),
            Command::GsBound(o) => ("gs-bound", o),
            Command::All(o) => ("all", o),
        }
    }
}

pub const SUITES: [&str; 8] = [
    "check-algebra",
    "check-invariance",
    "verify-lemma3",
    "verify-theorem1",
    "verify-clt",
    "verify-corollary",
    "rdm-spectrum",
    "gs-bound",
];

fn apply_mode_cap() -> Result<(), CliError> {
    match std::env::var(MODE_CAP_ENV) {
        Err(_) => Ok(()),
        Ok(v) => {
            let cap: usize = v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{MODE_CAP_ENV}={v} is not a mode count")))?;
            definetti_core::fock::set_mode_cap(cap);
            Ok(())
        }
    }
}

/// Runs the suites named by `command`; `all` runs them in parallel and keeps
/// the fixed order in the output.
pub fn execute(command: &str, opts: Opts) -> Result<Vec<SuiteOutput>, CliError> {
    if command != "all" {
        let opts = opts.resolve(command)?;
        return Ok(vec![run_suite(command, &opts)?]);
    }
    let file = match &opts.config {
        Some(path) => Some(load_config(path)?),
        None => None,
    };
    let base = match &file {
        Some(f) => opts.clone().or(f.section("all")?).or(f.top.clone()),
        None => opts.clone(),
    };
    base.require_seed("all")?;
    let mut per_suite = Vec::new();
    for name in SUITES {
        let o = match &file {
            Some(f) => opts.clone().or(f.section(name)?).or(f.section("all")?).or(f.top.clone()),
            None => opts.clone(),
        };
        per_suite.push((name, o));
    }
    let results: Vec<Result<SuiteOutput, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = per_suite
            .iter()
            .map(|(name, o)| s.spawn(move || run_suite(name, o)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(CliError::Io("suite thread panicked".into()))))
            .collect()
    });
    // a resource error outranks a usage error
    if let Some(pos) = results.iter().position(|r| matches!(r, Err(e) if e.exit_code() == 3)) {
        return Err(results.into_iter().nth(pos).and_then(|r| r.err()).expect("error present"));
    }
    results.into_iter().collect()
}

pub fn write_table(dir: &Path, table: &Table) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(dir.join(&table.file))?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn report_text(outputs: &[SuiteOutput]) -> String {
    let mut s = String::new();
    for out in outputs {
        s.push_str(&format!("== {} ==\n", out.name));
        for r in &out.reports {
            s.push_str(&r.summary_line());
            s.push('\n');
            for n in &r.notes {
                s.push_str(&format!("    {n}\n"));
            }
        }
    }
    let (pass, fail) = counts(outputs);
    s.push_str(&format!("summary: {pass} passed, {fail} failed\n"));
    s
}

pub fn counts(outputs: &[SuiteOutput]) -> (usize, usize) {
    let all: Vec<&VerificationReport> = outputs.iter().flat_map(|o| &o.reports).collect();
    let pass = all.iter().filter(|r| r.pass).count();
    (pass, all.len() - pass)
}

fn write_outputs(dir: &Path, outputs: &[SuiteOutput]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    for out in outputs {
        for t in &out.tables {
            write_table(dir, t)?;
        }
    }
    std::fs::write(dir.join("report.txt"), report_text(outputs))?;
    let json: Vec<serde_json::Value> = outputs
        .iter()
        .map(|o| serde_json::json!({ "suite": o.name, "reports": o.reports }))
        .collect();
    let text = serde_json::to_string_pretty(&json).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(dir.join("report.json"), text)?;
    Ok(())
}

/// Parses `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_command(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run_command(command: Command) -> Result<i32, CliError> {
    apply_mode_cap()?;
    let (name, opts) = command.parts();
    let out_dir = opts.out.clone();
    let outputs = execute(name, opts)?;
    // notes only for failures
    let mut stdout = std::io::stdout().lock();
    for out in &outputs {
        writeln!(stdout, "== {} ==", out.name)?;
        for r in &out.reports {
            writeln!(stdout, "{}", r.summary_line())?;
            if !r.pass {
                for n in &r.notes {
                    writeln!(stdout, "    {n}")?;
                }
            }
        }
    }
    let (pass, fail) = counts(&outputs);
    writeln!(stdout, "summary: {pass} passed, {fail} failed")?;
    if let Some(dir) = out_dir {
        write_outputs(&dir, &outputs)?;
    }
    Ok(if fail == 0 { 0 } else { 1 })
}
