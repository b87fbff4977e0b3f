//! Argument parsing and human-readable output.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pslqe::error_control::{self, digits_for, BoundExponent, PlanRecord};
use pslqe::ingest::{Preset, VectorSpec};
use pslqe::pslq::Gamma;
use rug::Integer;

use crate::commands::{
    exit, parse_relation, Noise, DEFAULT_GAMMA, run_find, run_minpoly, run_plan, run_sweep, run_verify, Budget, CliError, FindOutcome,
    FindRequest, MinpolyRequest, Settings, SweepRequest, VerifyRequest,
};
use crate::report::{format_polynomial, format_relation, write_sweep_csv, Outcome};
use crate::selftest::{self, Fault, SelftestConfig};

/// `println!` that tolerates a closed stdout, e.g. when piped into `head`.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Debug, Parser)]
#[command(name = "pslqe", version, about = "Integer relations for real data known only to a bounded error")]
pub struct Cli {
    /// Working precision in decimal digits [default: derived from the plan]
    #[arg(long, global = true)]
    pub digits: Option<u32>,
    /// Swap weighting parameter, greater than 2/sqrt(3)
    #[arg(long, global = true, default_value = DEFAULT_GAMMA)]
    pub gamma: String,
    /// Share of the error budget given to the input accuracy, in (0, 1)
    #[arg(long, global = true, default_value = "0.5")]
    pub omega: String,
    /// Seed for injected perturbations
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write per-iteration diagnostics as JSON lines
    #[arg(long, global = true, value_name = "PATH")]
    pub trace: Option<PathBuf>,
    /// Write the run report as JSON
    #[arg(long, global = true, value_name = "PATH")]
    pub json: Option<PathBuf>,
    /// Lift the desk-scale guards on dimension and runtime
    #[arg(long, global = true)]
    pub extended: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive eps1, eps2 and the working precision for a target eps
    Plan(PlanArgs),
    /// Search for an integer relation
    Find(FindArgs),
    /// Recover the minimal polynomial of an algebraic number
    Minpoly(MinpolyArgs),
    /// Run one planned search per eps = 10^-i and classify the outcomes
    Sweep(SweepArgs),
    /// Check a relation against a vector
    Verify(VerifyArgs),
    /// Run the built-in invariant suites
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
#[group(id = "input", required = true, multiple = false)]
pub struct InputArgs {
    /// Vector file: one decimal per line, `#` comments, optional `@digits N`
    #[arg(long, value_name = "PATH")]
    pub file: Option<PathBuf>,
    /// Built-in example: example1, example2 or example3
    #[arg(long)]
    pub preset: Option<Preset>,
    /// Semicolon-separated constant expressions, e.g. "1; ln2; pi^2"
    #[arg(long, value_delimiter = ';', allow_hyphen_values = true)]
    pub values: Option<Vec<String>>,
    /// Base of a power vector (x^d, ..., x, 1); needs --degree
    #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
    pub powers: Option<String>,
}

impl InputArgs {
    fn spec(&self, degree: Option<u32>) -> Result<VectorSpec, CliError> {
        if let Some(path) = &self.file {
            return Ok(VectorSpec::File { path: path.clone() });
        }
        if let Some(preset) = self.preset {
            return Ok(preset.spec());
        }
        if let Some(values) = &self.values {
            let entries: Vec<String> = values.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
            return Ok(VectorSpec::ConstantList { entries });
        }
        if let Some(base) = &self.powers {
            let degree = degree.ok_or_else(|| CliError::Usage("--powers needs --degree".into()))?;
            return Ok(VectorSpec::AlgebraicPowers { base: base.clone(), degree });
        }
        Err(CliError::Usage("no input given".into()))
    }
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// Target bound on |<alpha, m>| for the exact data
    #[arg(long)]
    pub eps: Option<String>,
    /// Bound on the entries of the relation sought
    #[arg(long = "g", value_name = "G")]
    pub g: Option<String>,
    /// Use this termination threshold directly instead of planning
    #[arg(long, conflicts_with_all = ["eps", "g"])]
    pub eps2: Option<String>,
}

impl BudgetArgs {
    fn budget(&self, preset: Option<Preset>) -> Result<Budget, CliError> {
        if let Some(eps2) = &self.eps2 {
            return Ok(Budget::Threshold { eps2: eps2.clone() });
        }
        let (eps, g) = eps_and_g(&self.eps, &self.g, preset)?;
        Ok(Budget::Planned { eps, g })
    }
}

/// Fills whichever of `ε` and `G` is missing from the preset's published budget.
fn eps_and_g(eps: &Option<String>, g: &Option<String>, preset: Option<Preset>) -> Result<(String, String), CliError> {
    let published = preset.map(Preset::published_budget);
    let eps = eps.clone().or_else(|| published.map(|(exponent, _)| format!("1e{exponent}")));
    let g = g.clone().or_else(|| published.map(|(_, g)| g.to_string()));
    match (eps, g) {
        (Some(eps), Some(g)) => Ok((eps, g)),
        _ => Err(CliError::Usage("give both --eps and --g".into())),
    }
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub degree: Option<u32>,
    #[arg(long)]
    pub eps: Option<String>,
    #[arg(long = "g", value_name = "G")]
    pub g: Option<String>,
}

#[derive(Debug, Args)]
pub struct FindArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub degree: Option<u32>,
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Empirical-data model: none, round (fewest digits within eps1) or sphere (seeded noise below eps1)
    #[arg(long, value_enum, default_value_t = Noise::None)]
    pub noise: Noise,
    /// Run in exact rational arithmetic (decimal or p/q entries only)
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub max_iterations: Option<u64>,
    /// Stop as soon as any column of B meets the terminal bound
    #[arg(long)]
    pub early_exit: bool,
}

#[derive(Debug, Args)]
pub struct MinpolyArgs {
    /// Constant expression for the algebraic number
    #[arg(allow_hyphen_values = true)]
    pub base: Option<String>,
    pub degree: Option<u32>,
    /// example2 or example3
    #[arg(long, conflicts_with_all = ["base", "degree"])]
    pub preset: Option<Preset>,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long, value_enum, default_value_t = Noise::None)]
    pub noise: Noise,
    #[arg(long)]
    pub max_iterations: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub degree: Option<u32>,
    /// First exponent i of eps = 10^-i
    #[arg(long, default_value_t = 1)]
    pub from: u32,
    /// Last exponent i of eps = 10^-i
    #[arg(long, default_value_t = 10)]
    pub to: u32,
    #[arg(long = "g", value_name = "G")]
    pub g: Option<String>,
    /// Relation counted as correct, e.g. "1,-5,4,-16,1"
    #[arg(long, allow_hyphen_values = true)]
    pub reference: Option<String>,
    /// Empirical-data model applied at each point
    #[arg(long, value_enum, default_value_t = Noise::Round)]
    pub noise: Noise,
    #[arg(long)]
    pub max_iterations: Option<u64>,
    /// Write the sweep table here instead of standard output
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub degree: Option<u32>,
    /// Relation entries, e.g. "1,-5,4,-16,1"
    #[arg(long, allow_hyphen_values = true, required_unless_present = "relation_file")]
    pub m: Option<String>,
    /// File holding the relation entries
    #[arg(long, value_name = "PATH", conflicts_with = "m")]
    pub relation_file: Option<PathBuf>,
    /// Threshold the terminal bound is stated for [default: 10^-(digits-10)]
    #[arg(long)]
    pub eps2: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FaultArg {
    CornerSign,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Deliberately break one step to confirm the suites catch it
    #[arg(long)]
    pub inject_fault: Option<FaultArg>,
    /// Run only the named suite
    #[arg(long)]
    pub suite: Option<String>,
}

impl Cli {
    fn settings(&self) -> Settings {
        Settings {
            digits: self.digits,
            gamma: self.gamma.clone(),
            omega: self.omega.clone(),
            seed: self.seed,
            trace: self.trace.clone(),
            json: self.json.clone(),
            extended: self.extended,
        }
    }
}

/// Parses `args`, runs the command, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::INPUT } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    let settings = cli.settings();
    let result = match &cli.command {
        Command::Plan(args) => plan(args, &settings),
        Command::Find(args) => find(args, &settings),
        Command::Minpoly(args) => minpoly(args, &settings),
        Command::Sweep(args) => sweep(args, &settings),
        Command::Verify(args) => verify(args, &settings),
        Command::Selftest(args) => Ok(selftest_command(args, &settings)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Output { path: path.to_path_buf(), reason: e.to_string() })
}

fn plan(args: &PlanArgs, settings: &Settings) -> Result<i32, CliError> {
    let spec = args.input.spec(args.degree)?;
    let (eps, g) = eps_and_g(&args.eps, &args.g, args.input.preset)?;
    let plan = run_plan(&spec, &eps, &g, settings)?;
    let ctx = plan.eps.context();
    let gamma = Gamma::new(ctx.parse(&settings.gamma)?)?;
    let show = |x: &pslqe::Real| x.to_sci_string(6);
    say!("input      {spec}");
    say!("n          {}", plan.n);
    say!("alpha_n    {}", show(&plan.alpha_n));
    say!("C          {}", show(&plan.c));
    say!("M          {}", show(&plan.m_bound));
    say!("eps        {}", show(&plan.eps));
    say!("eps1       {}  ({} digits)", show(&plan.eps1), digits_for(&plan.eps1));
    say!("eps2       {}  ({} digits)", show(&plan.eps2), digits_for(&plan.eps2));
    say!("eps3       {}", show(&plan.eps3));
    say!("working    {} digits ({} guard)", plan.working_digits, plan.guard_digits);
    say!(
        "iterations at most {} (n(n-1) form: {})",
        error_control::iteration_bound(plan.n, &gamma, &plan.eps2, BoundExponent::Statement),
        error_control::iteration_bound(plan.n, &gamma, &plan.eps2, BoundExponent::Proof)
    );
    if let Some(path) = &settings.json {
        let record = PlanRecord::from(plan);
        write_file(path, &serde_json::to_string_pretty(&record).expect("plans serialize"))?;
    }
    Ok(exit::OK)
}

fn emit_find(outcome: &FindOutcome, settings: &Settings) -> Result<i32, CliError> {
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let report = &outcome.report;
    let r = &report.result;
    say!("input        {}", report.input.spec);
    say!("digits       {}", report.input.digits);
    if let Some(plan) = &report.plan {
        say!("eps1         {}", short(&plan.eps1));
    }
    say!("eps2         {}", short(&report.eps2));
    say!("status       {:?}", r.status);
    say!("relation     ({})", format_relation(&outcome.relation).replace(' ', ", "));
    if let Some(p) = &report.polynomial {
        let coefficients: Vec<Integer> = p.iter().map(|c| c.parse().expect("integers")).collect();
        say!("polynomial   {}", format_polynomial(&coefficients));
    }
    say!("iterations   {}{}", r.iterations, r.iteration_cap.map(|c| format!(" (cap {c})")).unwrap_or_default());
    say!("residual     {}", r.residual);
    match (&report.forward_bound, &report.bound_note) {
        (Some(b), Some(note)) => say!("bound        {b} ({note})"),
        (Some(b), None) => say!("bound        {b}"),
        (None, Some(note)) => say!("bound        not stated: {note}"),
        (None, None) => {}
    }
    if r.invariant_violations > 0 {
        say!("violations   {}", r.invariant_violations);
        for v in &outcome.violations {
            say!("  {v}");
        }
    }
    say!("time         {:.3} s", report.wall_time_seconds);
    if let Some(path) = &settings.trace {
        let lines: Vec<String> =
            outcome.trace.iter().map(|t| serde_json::to_string(t).expect("trace records serialize")).collect();
        write_file(path, &(lines.join("\n") + "\n"))?;
    }
    if let Some(path) = &settings.json {
        write_file(path, &report.to_json())?;
    }
    Ok(outcome.exit_code)
}

/// `1.23e-5@40` → `1.23e-5`, shortened for the terminal.
fn short(serialized: &str) -> String {
    let body = serialized.split('@').next().unwrap_or(serialized);
    match body.split_once('e') {
        Some((mantissa, exponent)) => format!("{}e{exponent}", &mantissa[..mantissa.len().min(8)]),
        None => body.to_string(),
    }
}

fn find(args: &FindArgs, settings: &Settings) -> Result<i32, CliError> {
    let spec = args.input.spec(args.degree)?;
    let budget = if args.exact && args.budget.eps.is_none() && args.budget.eps2.is_none() {
        Budget::Threshold { eps2: "0".into() }
    } else {
        args.budget.budget(args.input.preset)?
    };
    let request = FindRequest {
        spec,
        budget,
        noise: args.noise,
        exact: args.exact,
        max_iterations: args.max_iterations,
        early_exit: args.early_exit,
    };
    let outcome = run_find(&request, settings)?;
    emit_find(&outcome, settings)
}

fn minpoly(args: &MinpolyArgs, settings: &Settings) -> Result<i32, CliError> {
    let (base, degree) = match (&args.base, args.degree, args.preset) {
        (Some(b), Some(d), None) => (b.clone(), d),
        (None, None, Some(p)) => match p.spec() {
            VectorSpec::AlgebraicPowers { base, degree } => (base, degree),
            _ => return Err(CliError::Usage(format!("{p:?} is not an algebraic power vector"))),
        },
        _ => return Err(CliError::Usage("give BASE and DEGREE, or --preset".into())),
    };
    let request = MinpolyRequest {
        base,
        degree,
        budget: args.budget.budget(args.preset)?,
        noise: args.noise,
        max_iterations: args.max_iterations,
    };
    let outcome = run_minpoly(&request, settings)?;
    emit_find(&outcome, settings)
}

fn sweep(args: &SweepArgs, settings: &Settings) -> Result<i32, CliError> {
    let spec = args.input.spec(args.degree)?;
    let g = match (&args.g, args.input.preset) {
        (Some(g), _) => g.clone(),
        (None, Some(p)) => p.published_budget().1.to_string(),
        (None, None) => return Err(CliError::Usage("--g is required".into())),
    };
    let reference = match (&args.reference, args.input.preset) {
        (Some(text), _) => Some(parse_relation(text)?),
        (None, Some(p)) => p.published_relation().map(|m| m.into_iter().map(Integer::from).collect()),
        (None, None) => None,
    };
    let request = SweepRequest {
        spec,
        from: args.from,
        to: args.to,
        g,
        reference,
        noise: args.noise,
        max_iterations: args.max_iterations,
    };
    let points = run_sweep(&request, settings)?;
    let csv_error = |e: csv::Error| CliError::Output { path: args.csv.clone().unwrap_or_else(|| "stdout".into()), reason: e.to_string() };
    match &args.csv {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| CliError::Output { path: path.clone(), reason: e.to_string() })?;
            write_sweep_csv(file, &points).map_err(csv_error)?;
            say!("{:>4} {:>6} {:>6} {:>10} {:>10}  m", "i", "eps1", "eps2", "outcome", "iterations");
            for p in &points {
                say!(
                    "{:>4} {:>6} {:>6} {:>10} {:>10}  {}",
                    p.i,
                    p.eps1_digits.map(|d| d.to_string()).unwrap_or_default(),
                    p.eps2_digits.map(|d| d.to_string()).unwrap_or_default(),
                    outcome_word(p.outcome),
                    p.iterations.map(|d| d.to_string()).unwrap_or_default(),
                    p.m.clone().unwrap_or_default()
                );
            }
        }
        None => {
            let stdout = std::io::stdout();
            write_sweep_csv(stdout.lock(), &points).map_err(csv_error)?;
        }
    }
    if let Some(path) = &settings.json {
        write_file(path, &serde_json::to_string_pretty(&points).expect("points serialize"))?;
    }
    Ok(exit::OK)
}

fn outcome_word(o: Outcome) -> &'static str {
    match o {
        Outcome::Correct => "correct",
        Outcome::Incorrect => "incorrect",
        Outcome::Infeasible => "infeasible",
    }
}

fn verify(args: &VerifyArgs, settings: &Settings) -> Result<i32, CliError> {
    let spec = args.input.spec(args.degree)?;
    let text = match (&args.m, &args.relation_file) {
        (Some(m), _) => m.clone(),
        (None, Some(path)) => fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?,
        (None, None) => return Err(CliError::Usage("give --m or --relation-file".into())),
    };
    let request = VerifyRequest { spec, relation: parse_relation(&text)?, eps2: args.eps2.clone() };
    let out = run_verify(&request, settings)?;
    say!("digits          {}", out.digits);
    say!("|<v, m>|        {}", out.raw_residual.to_sci_string(6));
    say!("|<v/|v|, m>|    {}", out.residual.to_sci_string(6));
    say!("terminal bound  {}", out.terminal_bound.to_sci_string(6));
    say!("{}", if out.passed { "relation holds" } else { "not a relation at this precision" });
    Ok(if out.passed { exit::OK } else { exit::CHECK_FAILED })
}

fn selftest_command(args: &SelftestArgs, settings: &Settings) -> i32 {
    let config = SelftestConfig {
        digits: settings.digits.unwrap_or(SelftestConfig::default().digits),
        seed: if settings.seed == 0 { SelftestConfig::default().seed } else { settings.seed },
        fault: args.inject_fault.map(|f| match f {
            FaultArg::CornerSign => Fault::CornerSign,
        }),
    };
    let chosen: Vec<_> = selftest::SUITES
        .iter()
        .filter(|(name, _)| args.suite.as_deref().is_none_or(|s| s == *name))
        .collect();
    if chosen.is_empty() {
        let names: Vec<&str> = selftest::SUITES.iter().map(|(n, _)| *n).collect();
        eprintln!("error: unknown suite; choose one of {}", names.join(", "));
        return exit::INPUT;
    }
    let mut failed = false;
    let stdout = std::io::stdout();
    for (_, suite) in chosen {
        let result = suite(&config);
        let mut out = stdout.lock();
        let _ = writeln!(
            out,
            "{} {} ({} cases, {:.2} s)",
            if result.passed() { "PASS" } else { "FAIL" },
            result.name,
            result.cases,
            result.seconds
        );
        for f in result.failures.iter().take(5) {
            let _ = writeln!(out, "    {f}");
        }
        if result.failures.len() > 5 {
            let _ = writeln!(out, "    … {} more", result.failures.len() - 5);
        }
        failed |= !result.passed();
    }
    if failed {
        exit::CHECK_FAILED
    } else {
        exit::OK
    }
}
