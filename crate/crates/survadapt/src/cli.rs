//! Command-line surface: scenario-file ingestion, command dispatch, and
//! CSV/manifest emission.
//!
//! Every command writes one CSV plus a sibling `manifest.txt` into `--out`
//! (default: the working directory). CSV bytes depend only on the invocation
//! (and seed), never on wall-clock time; the manifest carries `#` metadata
//! lines (version, command, seed, timestamp) followed, for scenario-driven
//! commands, by the resolved scenario in the same format [`parse_scenario`]
//! reads, so parse -> emit -> parse is a fixed point.
//!
//! Exit codes: 0 success, 2 parse or validation failure, 3 numerical
//! failure, 4 insufficient events. Failures print exactly one
//! `error[category]: message` line to stderr.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::combo_test::{
    combine, decide, irle_weights, jenkins_weights, p1_first_stage, p2_increment,
    p2_second_stage, z_star_naive, ComboError, StagePValues, Weights,
};
use crate::cond_error::{conditional_error_record, psi_decision, CondError};
use crate::numerics::{norm_quantile, NumError};
use crate::sim_engine::{
    expected_events, operating_characteristics, required_events, AdaptiveRule, DesignSpec,
    HazardModel, Interim, ScenarioConfig, SimError, WeightRule,
};
use crate::surv_core::{
    calendar_time_of_event_count, dataset_from_csv, snapshot, Stage, StageCensor, SubjectRecord,
    SurvError,
};
use crate::wiener_bound::{
    corrected_kstar_with_knots, kstar_table, power_a, power_b, power_c, power_d,
    worst_case_alpha, PowerInputs, WienerError, DEFAULT_KNOT_COUNT,
};

// ---------------------------------------------------------------------------
// errors and exit codes
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub enum CliError {
    /// Malformed input text (scenario file, dataset CSV, flag syntax).
    Parse(String),
    /// Well-formed input violating a stated invariant.
    Validation(String),
    /// A solver or special-function failure.
    Numerical(String),
    /// An event-count clock ran past the available events.
    InsufficientEvents(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "parse",
            CliError::Validation(_) => "validation",
            CliError::Numerical(_) => "numerical",
            CliError::InsufficientEvents(_) => "insufficient-events",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) | CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::InsufficientEvents(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Parse(m)
            | CliError::Validation(m)
            | CliError::Numerical(m)
            | CliError::InsufficientEvents(m) => m,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // single line: newlines in wrapped messages are flattened
        let msg: String = self.message().split_whitespace().collect::<Vec<_>>().join(" ");
        write!(f, "error[{}]: {}", self.category(), msg)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Parse(format!("io: {e}"))
    }
}

impl From<SurvError> for CliError {
    fn from(e: SurvError) -> Self {
        match e {
            SurvError::InsufficientEvents { .. } => CliError::InsufficientEvents(e.to_string()),
            SurvError::Parse { .. } => CliError::Parse(e.to_string()),
            SurvError::ZeroInformation | SurvError::TimeOrder { .. } => {
                CliError::Validation(e.to_string())
            }
        }
    }
}

impl From<ComboError> for CliError {
    fn from(e: ComboError) -> Self {
        match e {
            ComboError::ZeroEvents | ComboError::DegenerateIncrement { .. } => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<CondError> for CliError {
    fn from(e: CondError) -> Self {
        match e {
            CondError::Combo(inner) => inner.into(),
            CondError::AllInformationUsed { .. }
            | CondError::DegenerateIncrement { .. }
            | CondError::ZeroEvents => CliError::Validation(e.to_string()),
            CondError::Domain(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<NumError> for CliError {
    fn from(e: NumError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<WienerError> for CliError {
    fn from(e: WienerError) -> Self {
        match e {
            WienerError::Num(inner) => inner.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Surv(inner) => inner.into(),
            SimError::Combo(inner) => inner.into(),
            SimError::EventsBeyondFollowup { .. } => CliError::InsufficientEvents(e.to_string()),
            SimError::InvalidScenario(_) => CliError::Validation(e.to_string()),
            SimError::Cutoff(_) => CliError::Numerical(e.to_string()),
        }
    }
}

// ---------------------------------------------------------------------------
// numeric formatting
// ---------------------------------------------------------------------------

/// Plain-decimal rendering with a fixed significant-digit budget.
fn sig(x: f64, digits: i32) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (digits - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Probabilities and rates: 6 significant digits.
fn prob(x: f64) -> String {
    sig(x, 6)
}

/// Cutoffs and standardized statistics: 4 significant digits.
fn cutoff(x: f64) -> String {
    sig(x, 4)
}

// ---------------------------------------------------------------------------
// scenario file format
// ---------------------------------------------------------------------------

/// A parsed scenario file: the simulation configuration plus the optional
/// `[rule]` section (required by `simulate`, ignored elsewhere).
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedScenario {
    pub config: ScenarioConfig,
    pub rule: Option<AdaptiveRule>,
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("accrual", &["rate", "months"]),
    ("followup", &["months"]),
    ("control", &["model", "lambda", "base", "slope", "limit"]),
    ("experimental", &["model", "lambda", "base", "slope", "limit"]),
    ("design", &["alpha", "beta", "theta_R", "d12", "weight_rule", "d1", "d2"]),
    ("interim", &["at_month", "at_events"]),
    ("rule", &["kind", "d12_star"]),
];

struct RawScenario {
    // (section, key) -> (value, line number)
    entries: Vec<(String, String, String, usize)>,
}

impl RawScenario {
    fn get(&self, section: &str, key: &str) -> Option<(&str, usize)> {
        self.entries
            .iter()
            .find(|(s, k, _, _)| s == section && k == key)
            .map(|(_, _, v, line)| (v.as_str(), *line))
    }

    fn required(&self, section: &str, key: &str) -> Result<(&str, usize), CliError> {
        self.get(section, key).ok_or_else(|| {
            CliError::Validation(format!("[{section}] must set '{key}'"))
        })
    }

    fn f64_required(&self, section: &str, key: &str) -> Result<f64, CliError> {
        let (v, line) = self.required(section, key)?;
        parse_f64(v, line, key)
    }

    fn usize_required(&self, section: &str, key: &str) -> Result<usize, CliError> {
        let (v, line) = self.required(section, key)?;
        parse_usize(v, line, key)
    }

    fn forbid(&self, section: &str, key: &str, why: &str) -> Result<(), CliError> {
        if self.get(section, key).is_some() {
            return Err(CliError::Validation(format!(
                "[{section}] key '{key}' does not apply when {why}"
            )));
        }
        Ok(())
    }
}

fn parse_f64(v: &str, line: usize, key: &str) -> Result<f64, CliError> {
    v.parse::<f64>()
        .map_err(|_| CliError::Parse(format!("line {line}: '{key}' is not a number: '{v}'")))
}

fn parse_usize(v: &str, line: usize, key: &str) -> Result<usize, CliError> {
    v.parse::<usize>().map_err(|_| {
        CliError::Parse(format!("line {line}: '{key}' is not a nonnegative integer: '{v}'"))
    })
}

fn tokenize_scenario(text: &str) -> Result<RawScenario, CliError> {
    let mut entries: Vec<(String, String, String, usize)> = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let Some(name) = inner.strip_suffix(']') else {
                return Err(CliError::Parse(format!(
                    "line {line_no}: unterminated section header '{line}'"
                )));
            };
            let name = name.trim();
            if !SCHEMA.iter().any(|(s, _)| *s == name) {
                return Err(CliError::Parse(format!(
                    "line {line_no}: unknown section '[{name}]'"
                )));
            }
            section = Some(name.to_string());
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Parse(format!(
                "line {line_no}: expected 'key = value', got '{line}'"
            )));
        };
        let key = k.trim().to_string();
        let value = v.trim().to_string();
        let Some(sec) = section.clone() else {
            return Err(CliError::Parse(format!(
                "line {line_no}: key '{key}' appears before any [section]"
            )));
        };
        let allowed = SCHEMA.iter().find(|(s, _)| *s == sec).map(|(_, keys)| *keys).unwrap();
        if !allowed.contains(&key.as_str()) {
            return Err(CliError::Parse(format!(
                "line {line_no}: unknown key '{key}' in section [{sec}]"
            )));
        }
        if !seen.insert((sec.clone(), key.clone())) {
            return Err(CliError::Parse(format!(
                "line {line_no}: duplicate key '{key}' in section [{sec}]"
            )));
        }
        entries.push((sec, key, value, line_no));
    }
    Ok(RawScenario { entries })
}

fn parse_hazard_model(raw: &RawScenario, section: &str) -> Result<HazardModel, CliError> {
    let (model, line) = raw.required(section, "model")?;
    match model {
        "exponential" => {
            for k in ["base", "slope", "limit"] {
                raw.forbid(section, k, "model = exponential")?;
            }
            let lambda = raw.f64_required(section, "lambda")?;
            Ok(HazardModel::Exponential { lambda })
        }
        "diverging_control" => {
            raw.forbid(section, "lambda", "model = diverging_control")?;
            Ok(HazardModel::DivergingControl {
                base: raw.f64_required(section, "base")?,
                slope: raw.f64_required(section, "slope")?,
                limit: raw.f64_required(section, "limit")?,
            })
        }
        other => Err(CliError::Parse(format!(
            "line {line}: unknown model '{other}' (expected 'exponential' or 'diverging_control')"
        ))),
    }
}

/// Parses a scenario file. Strict schema: unknown sections/keys and
/// duplicates are parse errors; missing statistical parameters and invariant
/// violations are validation errors. `#` starts a comment.
pub fn parse_scenario_text(text: &str) -> Result<ParsedScenario, CliError> {
    let raw = tokenize_scenario(text)?;

    let control = parse_hazard_model(&raw, "control")?;
    let experimental = parse_hazard_model(&raw, "experimental")?;

    let (weight_rule_name, wline) = raw.required("design", "weight_rule")?;
    let weight_rule = match weight_rule_name {
        "irle" => {
            raw.forbid("design", "d1", "weight_rule = irle")?;
            raw.forbid("design", "d2", "weight_rule = irle")?;
            WeightRule::Irle
        }
        "jenkins" => WeightRule::Jenkins {
            d1: raw.usize_required("design", "d1")?,
            d2: raw.usize_required("design", "d2")?,
        },
        other => {
            return Err(CliError::Parse(format!(
                "line {wline}: unknown weight_rule '{other}' (expected 'irle' or 'jenkins')"
            )))
        }
    };

    let interim = match (raw.get("interim", "at_month"), raw.get("interim", "at_events")) {
        (Some((v, line)), None) => Interim::AtMonth(parse_f64(v, line, "at_month")?),
        (None, Some((v, line))) => Interim::AtEvents(parse_usize(v, line, "at_events")?),
        (Some(_), Some(_)) => {
            return Err(CliError::Validation(
                "[interim] must set exactly one of 'at_month' or 'at_events', not both".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Validation(
                "[interim] must set 'at_month' or 'at_events'".into(),
            ))
        }
    };

    let config = ScenarioConfig {
        control,
        experimental,
        accrual_rate: raw.f64_required("accrual", "rate")?,
        accrual_months: raw.f64_required("accrual", "months")?,
        followup_months: raw.f64_required("followup", "months")?,
        interim,
        design: DesignSpec {
            alpha: raw.f64_required("design", "alpha")?,
            beta: raw.f64_required("design", "beta")?,
            theta_r: raw.f64_required("design", "theta_R")?,
            d12: raw.usize_required("design", "d12")?,
            weight_rule,
        },
    };
    config.validate().map_err(CliError::from)?;

    let rule = match raw.get("rule", "kind") {
        None => {
            raw.forbid("rule", "d12_star", "no rule kind is set")?;
            None
        }
        Some((kind, line)) => Some(match kind {
            "no_change" => {
                raw.forbid("rule", "d12_star", "kind = no_change")?;
                AdaptiveRule::NoChange
            }
            "adversarial_max_stop" => {
                raw.forbid("rule", "d12_star", "kind = adversarial_max_stop")?;
                AdaptiveRule::AdversarialMaxStop
            }
            "increase_events" => {
                let d12_star = raw.usize_required("rule", "d12_star")?;
                if d12_star <= config.design.d12 {
                    return Err(CliError::Validation(format!(
                        "rule.d12_star = {d12_star} must exceed design.d12 = {}",
                        config.design.d12
                    )));
                }
                AdaptiveRule::IncreaseEvents { d12_star }
            }
            other => {
                return Err(CliError::Parse(format!(
                    "line {line}: unknown rule kind '{other}'"
                )))
            }
        }),
    };

    Ok(ParsedScenario { config, rule })
}

pub fn parse_scenario(path: &Path) -> Result<ParsedScenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read '{}': {e}", path.display())))?;
    parse_scenario_text(&text)
}

/// Canonical scenario text; `parse_scenario_text(scenario_text(s)) == s`.
pub fn scenario_text(s: &ParsedScenario) -> String {
    let mut out = String::new();
    let model = |out: &mut String, section: &str, m: &HazardModel| match *m {
        HazardModel::Exponential { lambda } => {
            let _ = writeln!(out, "[{section}]\nmodel = exponential\nlambda = {lambda}\n");
        }
        HazardModel::DivergingControl { base, slope, limit } => {
            let _ = writeln!(
                out,
                "[{section}]\nmodel = diverging_control\nbase = {base}\nslope = {slope}\nlimit = {limit}\n"
            );
        }
    };
    let _ = writeln!(
        out,
        "[accrual]\nrate = {}\nmonths = {}\n\n[followup]\nmonths = {}\n",
        s.config.accrual_rate, s.config.accrual_months, s.config.followup_months
    );
    model(&mut out, "control", &s.config.control);
    model(&mut out, "experimental", &s.config.experimental);
    let d = &s.config.design;
    let _ = writeln!(
        out,
        "[design]\nalpha = {}\nbeta = {}\ntheta_R = {}\nd12 = {}",
        d.alpha, d.beta, d.theta_r, d.d12
    );
    match d.weight_rule {
        WeightRule::Irle => out.push_str("weight_rule = irle\n\n"),
        WeightRule::Jenkins { d1, d2 } => {
            let _ = writeln!(out, "weight_rule = jenkins\nd1 = {d1}\nd2 = {d2}\n");
        }
    }
    match s.config.interim {
        Interim::AtMonth(t) => {
            let _ = writeln!(out, "[interim]\nat_month = {t}");
        }
        Interim::AtEvents(n) => {
            let _ = writeln!(out, "[interim]\nat_events = {n}");
        }
    }
    if let Some(rule) = s.rule {
        out.push('\n');
        match rule {
            AdaptiveRule::NoChange => out.push_str("[rule]\nkind = no_change\n"),
            AdaptiveRule::AdversarialMaxStop => {
                out.push_str("[rule]\nkind = adversarial_max_stop\n")
            }
            AdaptiveRule::IncreaseEvents { d12_star } => {
                let _ = writeln!(out, "[rule]\nkind = increase_events\nd12_star = {d12_star}");
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// command definitions
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "survadapt",
    version,
    about = "Two-stage adaptive survival trials: design, worst-case bounds, corrected cutoffs, power, simulation"
)]
pub struct Cli {
    /// Cap the worker thread pool (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for the output CSV and its manifest
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Event targets and expected accrual for a scenario file
    Design(DesignArgs),
    /// Worst-case type I error when first-stage follow-up is unspecified
    Bound(BoundArgs),
    /// Corrected cutoffs k* over the information-fraction grid
    CutoffTable(CutoffTableArgs),
    /// Power curves A-D against the second-stage p-value
    PowerCurves(PowerCurvesArgs),
    /// Monte Carlo operating characteristics of a scenario file
    Simulate(SimulateArgs),
    /// Two-stage decisions from a dataset or from stated statistics
    Analyze(Box<AnalyzeArgs>),
}

#[derive(Args)]
struct DesignArgs {
    /// Scenario file
    #[arg(long)]
    scenario: PathBuf,
}

#[derive(Args)]
struct BoundArgs {
    /// First-stage weight w1 in (0,1]
    #[arg(long)]
    w1: f64,
    /// Information fraction already used at the first-stage analysis
    #[arg(long)]
    u1: f64,
    /// One-sided level
    #[arg(long)]
    alpha: f64,
    /// Boundary knots for the crossing computation
    #[arg(long, default_value_t = DEFAULT_KNOT_COUNT)]
    knots: usize,
}

#[derive(Args)]
struct CutoffTableArgs {
    /// One-sided level
    #[arg(long)]
    alpha: f64,
    /// Boundary knots for the crossing computation
    #[arg(long, default_value_t = DEFAULT_KNOT_COUNT)]
    knots: usize,
}

#[derive(Args)]
struct PowerCurvesArgs {
    /// First-stage event target (defines w1 and u1 numerators)
    #[arg(long)]
    d1: usize,
    /// Second-stage event target (defines w2)
    #[arg(long)]
    d2: usize,
    /// First-stage events at maximum follow-up
    #[arg(long)]
    d1_max: usize,
    /// Log hazard ratio the curves are evaluated at
    #[arg(long)]
    theta_r: f64,
    /// One-sided level
    #[arg(long)]
    alpha: f64,
    /// Boundary knots for the crossing computation
    #[arg(long, default_value_t = DEFAULT_KNOT_COUNT)]
    knots: usize,
    /// Number of interior p2 grid points (grid i/(n+1), i=1..n)
    #[arg(long, default_value_t = 99)]
    p2_points: usize,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file; must contain a [rule] section
    #[arg(long)]
    scenario: PathBuf,
    /// Number of replications
    #[arg(long)]
    reps: usize,
    /// Base seed; replication i uses substream i
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// One-sided level
    #[arg(long)]
    alpha: f64,
    /// Dataset CSV (header: entry,surv,arm,stage); alternative to the
    /// --s1/--s1-star statistic flags
    #[arg(long)]
    data: Option<PathBuf>,
    /// Weight rule for --data mode: 'irle' or 'jenkins'
    #[arg(long)]
    weight_rule: Option<String>,
    /// Planned pooled event target (irle)
    #[arg(long)]
    d12: Option<usize>,
    /// Extended pooled event target (irle; defaults to d12)
    #[arg(long)]
    d12_star: Option<usize>,
    /// Stage event targets (jenkins data mode)
    #[arg(long)]
    d1: Option<usize>,
    #[arg(long)]
    d2: Option<usize>,
    /// First-stage cohort size (eventual first-stage event count); required
    /// in statistic mode, inferred from the dataset otherwise
    #[arg(long)]
    n1: Option<usize>,
    /// First-stage logrank score at the planned pooled analysis
    #[arg(long)]
    s1: Option<f64>,
    /// First-stage events at the planned pooled analysis
    #[arg(long, value_name = "D1")]
    d1_at_t12: Option<usize>,
    /// First-stage logrank score at the extended analysis
    #[arg(long)]
    s1_star: Option<f64>,
    /// First-stage events at the extended analysis
    #[arg(long)]
    d1_star: Option<usize>,
    /// Pooled logrank score at the extended analysis
    #[arg(long)]
    s12_star: Option<f64>,
}

// ---------------------------------------------------------------------------
// output plumbing
// ---------------------------------------------------------------------------

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Writes `csv` and a sibling manifest. `meta` lines become `# key: value`;
/// `body` (scenario text or empty) follows and must round-trip through
/// [`parse_scenario_text`] when nonempty.
fn write_outputs(
    out_dir: &Path,
    csv_name: &str,
    csv: &str,
    command_line: &str,
    meta: &[(&str, String)],
    body: &str,
) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join(csv_name), csv)?;
    let mut m = String::new();
    let _ = writeln!(m, "# survadapt {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "# command: {command_line}");
    for (k, v) in meta {
        let _ = writeln!(m, "# {k}: {v}");
    }
    let _ = writeln!(m, "# generated_unix: {}", unix_now());
    let _ = writeln!(m, "# output: {csv_name}");
    if !body.is_empty() {
        m.push('\n');
        m.push_str(body);
    }
    std::fs::write(out_dir.join("manifest.txt"), m)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// command implementations
// ---------------------------------------------------------------------------

fn cmd_design(out: &Path, args: &DesignArgs) -> Result<(), CliError> {
    let parsed = parse_scenario(&args.scenario)?;
    let d = parsed.config.design;
    let req = required_events(d.alpha, d.beta, d.theta_r);
    let t_max = parsed.config.t_max();
    let expected = expected_events(&parsed.config, t_max)?;

    let mut csv = String::from("metric,value\n");
    let _ = writeln!(csv, "required_events_raw,{}", prob(req.raw));
    let _ = writeln!(csv, "required_events,{}", req.count);
    let _ = writeln!(csv, "planned_d12,{}", d.d12);
    let _ = writeln!(csv, "planned_matches_required,{}", d.d12 == req.count);
    let _ = writeln!(csv, "t_max,{t_max}");
    let _ = writeln!(csv, "expected_events_at_t_max,{}", prob(expected));

    write_outputs(
        out,
        "design.csv",
        &csv,
        &format!("design --scenario {}", args.scenario.display()),
        &[],
        &scenario_text(&parsed),
    )?;
    println!(
        "required events: {} (raw {}); planned d12: {}; expected events by month {}: {}",
        req.count,
        prob(req.raw),
        d.d12,
        t_max,
        prob(expected)
    );
    Ok(())
}

fn cmd_bound(out: &Path, args: &BoundArgs) -> Result<(), CliError> {
    let wc = worst_case_alpha(args.w1, args.u1, args.alpha, args.knots)?;
    let mut csv = String::from("w1,u1,alpha,knots,worst_case_alpha\n");
    let _ = writeln!(
        csv,
        "{},{},{},{},{}",
        prob(args.w1),
        prob(args.u1),
        prob(args.alpha),
        args.knots,
        prob(wc)
    );
    write_outputs(
        out,
        "bound.csv",
        &csv,
        &format!(
            "bound --w1 {} --u1 {} --alpha {} --knots {}",
            args.w1, args.u1, args.alpha, args.knots
        ),
        &[
            ("w1", args.w1.to_string()),
            ("u1", args.u1.to_string()),
            ("alpha", args.alpha.to_string()),
            ("knots", args.knots.to_string()),
        ],
        "",
    )?;
    println!("worst-case type I error = {}", prob(wc));
    Ok(())
}

fn cmd_cutoff_table(out: &Path, args: &CutoffTableArgs) -> Result<(), CliError> {
    let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let table = kstar_table(&grid, &grid, args.alpha, args.knots)?;

    // rows: first-stage information fraction f1 (cell cutoff uses w1 = sqrt(f1))
    let mut csv = String::from("f1");
    for u in &grid {
        let _ = write!(csv, ",{u}");
    }
    csv.push('\n');
    for (i, row) in table.iter().enumerate() {
        let _ = write!(csv, "{}", grid[i]);
        for k in row {
            let _ = write!(csv, ",{}", cutoff(*k));
        }
        csv.push('\n');
    }
    write_outputs(
        out,
        "table.csv",
        &csv,
        &format!("cutoff-table --alpha {} --knots {}", args.alpha, args.knots),
        &[
            ("alpha", args.alpha.to_string()),
            ("knots", args.knots.to_string()),
            ("rows", "first-stage information fraction f1; cutoff at w1 = sqrt(f1)".into()),
            ("columns", "information fraction u1 used at the first-stage analysis".into()),
        ],
        "",
    )?;
    println!("wrote {} x {} corrected cutoffs to table.csv", grid.len(), grid.len());
    Ok(())
}

fn cmd_power_curves(out: &Path, args: &PowerCurvesArgs) -> Result<(), CliError> {
    if args.d1_max < args.d1 {
        return Err(CliError::Validation(format!(
            "d1_max = {} must be at least d1 = {}",
            args.d1_max, args.d1
        )));
    }
    if args.p2_points == 0 {
        return Err(CliError::Validation("p2_points must be >= 1".into()));
    }
    let w = jenkins_weights(args.d1, args.d2);
    let u1 = args.d1 as f64 / args.d1_max as f64;
    let k_star = corrected_kstar_with_knots(w.w1(), u1, args.alpha, args.knots)?;
    let inputs = PowerInputs {
        w,
        d1_t1: args.d1,
        d1_tmax: args.d1_max,
        theta_r: args.theta_r,
        alpha: args.alpha,
        k_star,
    };

    let mut csv = String::from("p2,A,B,C,D\n");
    for i in 1..=args.p2_points {
        let p2 = i as f64 / (args.p2_points + 1) as f64;
        let a = power_a(&inputs, p2)?;
        let b = power_b(&inputs, p2)?;
        let c = power_c(&inputs, p2)?;
        let d = power_d(&inputs, p2)?;
        let _ = writeln!(csv, "{},{},{},{},{}", prob(p2), prob(a), prob(b), prob(c), prob(d));
    }
    write_outputs(
        out,
        "power.csv",
        &csv,
        &format!(
            "power-curves --d1 {} --d2 {} --d1-max {} --theta-r {} --alpha {} --knots {} --p2-points {}",
            args.d1, args.d2, args.d1_max, args.theta_r, args.alpha, args.knots, args.p2_points
        ),
        &[
            ("w1", w.w1().to_string()),
            ("u1", u1.to_string()),
            ("k_star", k_star.to_string()),
        ],
        "",
    )?;
    println!(
        "wrote {} p2 grid rows to power.csv (w1 = {}, u1 = {}, k* = {})",
        args.p2_points,
        prob(w.w1()),
        prob(u1),
        cutoff(k_star)
    );
    Ok(())
}

fn cmd_simulate(out: &Path, args: &SimulateArgs) -> Result<(), CliError> {
    if args.reps == 0 {
        return Err(CliError::Validation("reps must be >= 1".into()));
    }
    let parsed = parse_scenario(&args.scenario)?;
    let Some(rule) = parsed.rule else {
        return Err(CliError::Validation(
            "scenario file must contain a [rule] section for simulate".into(),
        ));
    };
    let summary = operating_characteristics(&parsed.config, rule, args.reps, args.seed)?;

    let mut csv = String::from(
        "variant,replications,rejection_rate,std_error,mean_d1_scheduled,mean_d1_final,\
         mean_d1_tmax,mean_d12_final,mean_effective_info_deficit\n",
    );
    let shared = format!(
        "{},{},{},{},{}",
        prob(summary.mean_d1_scheduled),
        prob(summary.mean_d1_final),
        prob(summary.mean_d1_tmax),
        prob(summary.mean_d12_final),
        prob(summary.mean_effective_info_deficit)
    );
    let _ = writeln!(
        csv,
        "combination,{},{},{},{shared}",
        summary.replications,
        prob(summary.combination_rate),
        prob(summary.combination_se)
    );
    let _ = writeln!(
        csv,
        "naive,{},{},{},{shared}",
        summary.replications,
        prob(summary.naive_rate),
        prob(summary.naive_se)
    );
    let _ = writeln!(
        csv,
        "corrected,{},{},{},{shared}",
        summary.replications,
        prob(summary.corrected_rate),
        prob(summary.corrected_se)
    );

    write_outputs(
        out,
        "summary.csv",
        &csv,
        &format!(
            "simulate --scenario {} --reps {} --seed {}",
            args.scenario.display(),
            args.reps,
            args.seed
        ),
        &[("seed", args.seed.to_string()), ("reps", args.reps.to_string())],
        &scenario_text(&parsed),
    )?;
    println!(
        "{} replications: combination {} (se {}), naive {} (se {}), corrected {} (se {})",
        summary.replications,
        prob(summary.combination_rate),
        prob(summary.combination_se),
        prob(summary.naive_rate),
        prob(summary.naive_se),
        prob(summary.corrected_rate),
        prob(summary.corrected_se)
    );
    Ok(())
}

/// Everything `analyze` reports; decisions come from the same library calls
/// the simulator uses.
struct AnalysisReport {
    w: Weights,
    u1: f64,
    p1: f64,
    p2: f64,
    z_combination: f64,
    z_alpha: f64,
    // pooled-clock extras (conditional-error path)
    ce: Option<f64>,
    b_star: Option<f64>,
    standardized_pooled: Option<f64>,
    psi_reject: Option<bool>,
    z_naive: f64,
    k_star: f64,
    effective_info_deficit: Option<f64>,
}

fn analyze_statistics(
    alpha: f64,
    s1: f64,
    d1: usize,
    d12: usize,
    s1_star: f64,
    d1_star: usize,
    s12_star: f64,
    d12_star: usize,
    n1: usize,
) -> Result<AnalysisReport, CliError> {
    if n1 == 0 {
        return Err(CliError::Validation("n1 must be >= 1".into()));
    }
    if d1_star < d1 {
        return Err(CliError::Validation(format!(
            "d1_star = {d1_star} cannot be below d1 = {d1} (same cohort, later time)"
        )));
    }
    if d12_star < d12 {
        return Err(CliError::Validation(format!(
            "d12_star = {d12_star} cannot be below d12 = {d12}"
        )));
    }
    let w = irle_weights(d1, d12);
    let p1 = p1_first_stage(s1, d1)?;
    let p2 = p2_increment(s12_star, s1_star, d12_star, d1_star)?;
    let z = combine(&w, &StagePValues { p1, p2 })?;
    let z_alpha = -norm_quantile(alpha)?;
    let rec = conditional_error_record(p1, d1, d12, alpha, s1_star, d1_star, d12_star)?;
    let psi = psi_decision(s12_star, d12_star, rec.b_star);
    let z_naive = z_star_naive(&w, s1_star, d1_star, p2)?;
    let u1 = d1 as f64 / n1 as f64;
    let k_star = corrected_kstar_with_knots(w.w1(), u1, alpha, DEFAULT_KNOT_COUNT)?;
    Ok(AnalysisReport {
        w,
        u1,
        p1,
        p2,
        z_combination: z,
        z_alpha,
        ce: Some(rec.ce),
        b_star: Some(rec.b_star),
        standardized_pooled: Some(2.0 * s12_star / (d12_star as f64).sqrt()),
        psi_reject: Some(psi),
        z_naive,
        k_star,
        effective_info_deficit: Some((d12_star - d12) as f64 - (d1_star - d1) as f64),
    })
}

fn analyze_dataset(args: &AnalyzeArgs, data: &[SubjectRecord]) -> Result<AnalysisReport, CliError> {
    let first: Vec<SubjectRecord> =
        data.iter().copied().filter(|s| s.stage == Stage::First).collect();
    if first.is_empty() {
        return Err(CliError::Validation("dataset has no first-stage subjects".into()));
    }
    let n1 = args.n1.unwrap_or(first.len());
    let rule_name = args.weight_rule.as_deref().ok_or_else(|| {
        CliError::Validation("--weight-rule (irle or jenkins) is required with --data".into())
    })?;
    match rule_name {
        "irle" => {
            let d12 = args.d12.ok_or_else(|| {
                CliError::Validation("--d12 is required for weight-rule irle".into())
            })?;
            let d12_star = args.d12_star.unwrap_or(d12);
            if d12_star < d12 {
                return Err(CliError::Validation(format!(
                    "--d12-star {d12_star} cannot be below --d12 {d12}"
                )));
            }
            let t12 = calendar_time_of_event_count(data, d12)?;
            let snap1 = snapshot(&first, t12, StageCensor::NONE);
            let t_star = calendar_time_of_event_count(data, d12_star)?;
            let snap1_star = snapshot(&first, t_star, StageCensor::NONE);
            let snap12_star = snapshot(data, t_star, StageCensor::NONE);
            analyze_statistics(
                args.alpha,
                snap1.score,
                snap1.d_events,
                d12,
                snap1_star.score,
                snap1_star.d_events,
                snap12_star.score,
                snap12_star.d_events,
                n1,
            )
        }
        "jenkins" => {
            let (d1, d2) = match (args.d1, args.d2) {
                (Some(d1), Some(d2)) => (d1, d2),
                _ => {
                    return Err(CliError::Validation(
                        "--d1 and --d2 are required for weight-rule jenkins".into(),
                    ))
                }
            };
            let second: Vec<SubjectRecord> =
                data.iter().copied().filter(|s| s.stage == Stage::Second).collect();
            let t1 = calendar_time_of_event_count(&first, d1)?;
            let snap1 = snapshot(&first, t1, StageCensor::NONE);
            let t2 = calendar_time_of_event_count(&second, d2)?;
            let snap2 = snapshot(&second, t2, StageCensor::NONE);
            let w = jenkins_weights(d1, d2);
            let p1 = p1_first_stage(snap1.score, d1)?;
            let p2 = p2_second_stage(snap2.score, d2)?;
            let z = combine(&w, &StagePValues { p1, p2 })?;
            let z_alpha = -norm_quantile(args.alpha)?;
            let u1 = d1 as f64 / n1 as f64;
            let k_star = corrected_kstar_with_knots(w.w1(), u1, args.alpha, DEFAULT_KNOT_COUNT)?;
            Ok(AnalysisReport {
                w,
                u1,
                p1,
                p2,
                z_combination: z,
                z_alpha,
                ce: None,
                b_star: None,
                standardized_pooled: None,
                psi_reject: None,
                z_naive: z,
                k_star,
                effective_info_deficit: None,
            })
        }
        other => Err(CliError::Validation(format!(
            "unknown weight rule '{other}' (expected 'irle' or 'jenkins')"
        ))),
    }
}

fn cmd_analyze(out: &Path, args: &AnalyzeArgs) -> Result<(), CliError> {
    let statistic_flags = [
        args.s1.is_some(),
        args.d1_at_t12.is_some(),
        args.s1_star.is_some(),
        args.d1_star.is_some(),
        args.s12_star.is_some(),
    ];
    let report = if let Some(path) = &args.data {
        if statistic_flags.iter().any(|&f| f) {
            return Err(CliError::Validation(
                "--data and the statistic flags (--s1, --d1-at-t12, ...) are mutually exclusive"
                    .into(),
            ));
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Parse(format!("cannot read '{}': {e}", path.display())))?;
        let data = dataset_from_csv(&text)?;
        analyze_dataset(args, &data)?
    } else {
        if !statistic_flags.iter().all(|&f| f) {
            return Err(CliError::Validation(
                "statistic mode needs --s1, --d1-at-t12, --s1-star, --d1-star, --s12-star \
                 (plus --d12, --d12-star, --n1); or pass --data"
                    .into(),
            ));
        }
        let d12 = args
            .d12
            .ok_or_else(|| CliError::Validation("--d12 is required".into()))?;
        let d12_star = args.d12_star.unwrap_or(d12);
        let n1 = args
            .n1
            .ok_or_else(|| CliError::Validation("--n1 is required in statistic mode".into()))?;
        analyze_statistics(
            args.alpha,
            args.s1.unwrap(),
            args.d1_at_t12.unwrap(),
            d12,
            args.s1_star.unwrap(),
            args.d1_star.unwrap(),
            args.s12_star.unwrap(),
            d12_star,
            n1,
        )?
    };

    let combination_reject = decide(report.z_combination, report.z_alpha).reject;
    let corrected_reject = decide(report.z_naive, report.k_star).reject;

    let mut csv = String::from("metric,value\n");
    let _ = writeln!(csv, "w1,{}", prob(report.w.w1()));
    let _ = writeln!(csv, "w2,{}", prob(report.w.w2()));
    let _ = writeln!(csv, "u1,{}", prob(report.u1));
    let _ = writeln!(csv, "p1,{}", prob(report.p1));
    let _ = writeln!(csv, "p2,{}", prob(report.p2));
    let _ = writeln!(csv, "z_combination,{}", cutoff(report.z_combination));
    let _ = writeln!(csv, "z_alpha,{}", cutoff(report.z_alpha));
    let _ = writeln!(csv, "combination_reject,{combination_reject}");
    if let Some(ce) = report.ce {
        let _ = writeln!(csv, "conditional_error,{}", prob(ce));
    }
    if let Some(b) = report.b_star {
        let _ = writeln!(csv, "b_star,{}", cutoff(b));
    }
    if let Some(s) = report.standardized_pooled {
        let _ = writeln!(csv, "standardized_pooled,{}", cutoff(s));
    }
    if let Some(psi) = report.psi_reject {
        let _ = writeln!(csv, "psi_reject,{psi}");
    }
    let _ = writeln!(csv, "z_naive,{}", cutoff(report.z_naive));
    let _ = writeln!(csv, "k_star,{}", cutoff(report.k_star));
    let _ = writeln!(csv, "corrected_reject,{corrected_reject}");
    if let Some(d) = report.effective_info_deficit {
        let _ = writeln!(csv, "effective_info_deficit,{d}");
    }

    write_outputs(
        out,
        "analysis.csv",
        &csv,
        "analyze",
        &[("alpha", args.alpha.to_string())],
        "",
    )?;

    println!(
        "p1 = {}, p2 = {}, Z = {} vs {} -> {}",
        prob(report.p1),
        prob(report.p2),
        cutoff(report.z_combination),
        cutoff(report.z_alpha),
        if combination_reject { "reject" } else { "no reject" }
    );
    if let (Some(b), Some(psi)) = (report.b_star, report.psi_reject) {
        println!(
            "conditional-error path: b* = {} -> {}",
            cutoff(b),
            if psi { "reject" } else { "no reject" }
        );
    }
    println!(
        "corrected path: naive Z* = {} vs k* = {} -> {}",
        cutoff(report.z_naive),
        cutoff(report.k_star),
        if corrected_reject { "reject" } else { "no reject" }
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// entry point
// ---------------------------------------------------------------------------

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be >= 1".into()));
        }
        // ignore the error if a pool already exists (repeat dispatch in-process)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Design(a) => cmd_design(&cli.out, a),
        Command::Bound(a) => cmd_bound(&cli.out, a),
        Command::CutoffTable(a) => cmd_cutoff_table(&cli.out, a),
        Command::PowerCurves(a) => cmd_power_curves(&cli.out, a),
        Command::Simulate(a) => cmd_simulate(&cli.out, a),
        Command::Analyze(a) => cmd_analyze(&cli.out, a),
    }
}

/// Parses argv and runs one command; returns the process exit code.
pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            _ => {
                let first_line = e.to_string().lines().next().unwrap_or("bad arguments").to_string();
                eprintln!("{}", CliError::Parse(first_line));
                return ExitCode::from(2);
            }
        },
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

// ---------------------------------------------------------------------------
