//! Command-line front end. The binary is a thin wrapper around [`run`].

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::anomaly::{full_report, render_markdown, report_simulation_config, MeanFractionMode, Report, ReportConfig};
use crate::benford::{empirical_first_digit_model, second_digit_model, standard_first_digit_model, DigitPosition};
use crate::report::{
    decade_marker, digit_rows, digit_rows_csv, fmt_p, fmt_sig, folded_histogram, log_histogram, nonzero_counts,
    scatter_rows, scatter_rows_csv, to_rounded_json, write_csv, BinnedHistogram, DigitRow, DEFAULT_BIN_WIDTH_DEX,
};
use crate::scatter_sim::{run_simulation, thread_pool, DigitCondition, SimulationResult};
use crate::vote_data::{global_fraction, load_vote_table, validate, VoteTable, DEFAULT_LABELS};
use crate::{Error, Result};

pub const THREADS_ENV: &str = "DIGIT_FORENSICS_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "digit-forensics",
    version,
    about = "Digit-distribution forensics for per-area vote tables"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Total-vote file: one `[name] total` record per line.
    #[arg(long, global = true, default_value = "data/iran2009/total")]
    pub totals: PathBuf,
    /// Candidate-count file: one row of per-candidate counts per line.
    #[arg(long, global = true, default_value = "data/iran2009/cands")]
    pub cands: PathBuf,
    #[arg(long, global = true, value_delimiter = ',', default_values_t = DEFAULT_LABELS.map(String::from))]
    pub labels: Vec<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub realizations: Option<u64>,
    /// Comma-separated scatter widths in dex.
    #[arg(long, global = true, value_delimiter = ',')]
    pub sigmas: Option<Vec<f64>>,
    /// Output directory; stdout when absent (except `report`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Md,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Md => "md",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PositionArg {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Standard,
    Empirical,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HistKind {
    Totals,
    Folded,
    Candidate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeanFractionArg {
    Global,
    MeanProportion,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and check the data; print national sums.
    Validate,
    /// Observed digit histogram of one candidate with model expectations.
    Benford {
        #[arg(long, default_value = "K")]
        label: String,
        #[arg(long, value_enum, default_value = "first")]
        position: PositionArg,
        #[arg(long, value_enum, default_value = "both")]
        model: ModelArg,
    },
    /// Binned log₁₀ histograms.
    Hist {
        #[arg(value_enum)]
        kind: HistKind,
        /// Candidate for `candidate` histograms.
        #[arg(long)]
        label: Option<String>,
        #[arg(long, default_value_t = DEFAULT_BIN_WIDTH_DEX)]
        bin_width: f64,
        /// Add decade markers for this leading digit (folded histograms).
        #[arg(long)]
        marker_digit: Option<u8>,
        #[arg(long, default_value = "K")]
        marker_label: String,
    },
    /// Per-area total and proportion pairs with the marker flag.
    Scatter {
        #[arg(long, default_value = "A")]
        label: String,
        #[arg(long, default_value = "K")]
        marker_label: String,
        #[arg(long, default_value_t = 7)]
        marker_digit: u8,
    },
    /// Monte Carlo null model for one candidate's first digits.
    Simulate {
        #[arg(long, default_value = "K")]
        label: String,
        #[arg(long, default_value_t = 7)]
        marker_digit: u8,
        /// Condition such as `sevens: 7>=41`; repeatable. Defaults to the observed counts.
        #[arg(long = "condition")]
        conditions: Vec<String>,
        #[arg(long, value_enum, default_value = "global")]
        mean_fraction: MeanFractionArg,
        #[arg(long)]
        no_noise: bool,
    },
    /// Full analysis: report.json, report.md and tables/*.csv under --out.
    Report {
        #[arg(long, default_value_t = 7)]
        marker_digit: u8,
        #[arg(long, default_value = "K")]
        marker_label: String,
        #[arg(long)]
        parity_trials: Option<u64>,
        #[arg(long, value_enum, default_value = "global")]
        mean_fraction: MeanFractionArg,
    },
}

#[derive(Debug)]
enum Failure {
    Lib(Error),
    Usage(String),
    Output(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Output(_) => EXIT_INTERNAL,
            Failure::Lib(e) => match e {
                Error::UnknownLabel(_) | Error::InvalidArgument(_) => EXIT_USAGE,
                Error::Parse { .. } | Error::RecordCountMismatch { .. } | Error::Io { .. } | Error::Undefined(_) => {
                    EXIT_DATA
                }
                Error::Serialize(_) => EXIT_INTERNAL,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Lib(e) => e.to_string(),
            Failure::Usage(m) | Failure::Output(m) => m.clone(),
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(&cli, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message());
            f.code()
        }
    }
}

fn threads_from_env() -> std::result::Result<Option<usize>, Failure> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Failure::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
    }
}

fn load(g: &GlobalArgs) -> Result<VoteTable> {
    let labels: Vec<&str> = g.labels.iter().map(String::as_str).collect();
    load_vote_table(&g.totals, &g.cands, &labels)
}

/// Rows of a flat table, rendered to csv or markdown.
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn markdown(&self) -> String {
        let mut s = format!(
            "| {} |\n|{}\n",
            self.header.join(" | "),
            "---|".repeat(self.header.len())
        );
        for r in &self.rows {
            s.push_str(&format!("| {} |\n", r.join(" | ")));
        }
        s
    }
}

fn emit(
    g: &GlobalArgs,
    stem: &str,
    content: &str,
    format: Format,
    stdout: &mut dyn Write,
) -> std::result::Result<(), Failure> {
    match &g.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Failure::Output(format!("{}: {e}", dir.display())))?;
            let path = dir.join(format!("{stem}.{}", format.extension()));
            write_file(&path, content)
        }
        None => stdout
            .write_all(content.as_bytes())
            .map_err(|e| Failure::Output(format!("stdout: {e}"))),
    }
}

fn write_file(path: &Path, content: &str) -> std::result::Result<(), Failure> {
    fs::write(path, content).map_err(|e| Failure::Output(format!("{}: {e}", path.display())))
}

fn json<T: Serialize>(value: &T) -> std::result::Result<String, Failure> {
    Ok(to_rounded_json(value)? + "\n")
}

fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> std::result::Result<(), Failure> {
    let g = &cli.global;
    if g.realizations == Some(0) {
        return Err(Failure::Usage("--realizations must be at least 1".into()));
    }
    let threads = threads_from_env()?;
    match &cli.command {
        Command::Validate => cmd_validate(g, stdout, stderr),
        Command::Benford { label, position, model } => cmd_benford(g, label, *position, *model, stdout, stderr),
        Command::Hist {
            kind,
            label,
            bin_width,
            marker_digit,
            marker_label,
        } => cmd_hist(
            g,
            *kind,
            label.as_deref(),
            *bin_width,
            *marker_digit,
            marker_label,
            stdout,
            stderr,
        ),
        Command::Scatter {
            label,
            marker_label,
            marker_digit,
        } => cmd_scatter(g, label, marker_label, *marker_digit, stdout),
        Command::Simulate {
            label,
            marker_digit,
            conditions,
            mean_fraction,
            no_noise,
        } => cmd_simulate(
            g,
            threads,
            label,
            *marker_digit,
            conditions,
            *mean_fraction,
            *no_noise,
            stdout,
        ),
        Command::Report {
            marker_digit,
            marker_label,
            parity_trials,
            mean_fraction,
        } => cmd_report(
            g,
            threads,
            marker_label,
            *marker_digit,
            *parity_trials,
            *mean_fraction,
            stdout,
        ),
    }
}

fn cmd_validate(g: &GlobalArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> std::result::Result<(), Failure> {
    let table = load(g)?;
    let report = validate(&table);
    for m in &report.mismatched_areas {
        let _ = writeln!(
            stderr,
            "warning: area `{}` has total {} but candidate sum {}",
            m.name, m.total, m.candidate_sum
        );
    }
    let format = g.format.unwrap_or(Format::Md);
    let content = match format {
        Format::Json => json(&report)?,
        Format::Csv | Format::Md => {
            let t = Table {
                header: vec!["label", "votes"],
                rows: report
                    .national_sums
                    .iter()
                    .map(|s| vec![s.label.clone(), s.votes.to_string()])
                    .collect(),
            };
            if format == Format::Csv {
                write_csv(&t.header, &t.rows)?
            } else {
                format!(
                    "{} areas, {} total votes, {} mismatched, {} zero cells\n\n{}",
                    report.n_areas,
                    report.total_votes,
                    report.mismatched_areas.len(),
                    report.zero_count_cells.len(),
                    t.markdown()
                )
            }
        }
    };
    emit(g, "validate", &content, format, stdout)
}

fn digit_table(rows: &[DigitRow]) -> Table {
    let opt = |x: Option<f64>| x.map(fmt_sig).unwrap_or_default();
    Table {
        header: vec![
            "digit",
            "observed",
            "expected_standard",
            "stderr_standard",
            "expected_empirical",
            "stderr_empirical",
        ],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.digit.to_string(),
                    r.observed.to_string(),
                    fmt_sig(r.expected_standard),
                    fmt_sig(r.stderr_standard),
                    opt(r.expected_empirical),
                    opt(r.stderr_empirical),
                ]
            })
            .collect(),
    }
}

/// Digit rows for one candidate under the requested models.
pub fn benford_rows(table: &VoteTable, label: &str, position: DigitPosition, model: ModelArg) -> Result<Vec<DigitRow>> {
    let counts = nonzero_counts(table, label)?;
    let observed = crate::benford::digit_histogram(
        &counts
            .iter()
            .copied()
            .filter(|&c| position == DigitPosition::First || c >= 10)
            .collect::<Vec<_>>(),
        position,
    )?;
    let reference = match position {
        DigitPosition::First => standard_first_digit_model(),
        DigitPosition::Second => second_digit_model(),
    };
    let empirical = match (position, model) {
        (DigitPosition::Second, ModelArg::Empirical) => {
            return Err(Error::InvalidArgument(
                "the empirical model covers first digits only".into(),
            ))
        }
        (DigitPosition::First, ModelArg::Empirical | ModelArg::Both) if observed.n > 0 => Some(
            empirical_first_digit_model(&table.totals(), global_fraction(table, label)?)?,
        ),
        _ => None,
    };
    let mut rows = digit_rows(&observed, &reference, empirical.as_ref());
    if model == ModelArg::Empirical {
        for r in &mut rows {
            r.expected_standard = f64::NAN;
            r.stderr_standard = f64::NAN;
        }
    }
    Ok(rows)
}

fn cmd_benford(
    g: &GlobalArgs,
    label: &str,
    position: PositionArg,
    model: ModelArg,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> std::result::Result<(), Failure> {
    let table = load(g)?;
    let position = match position {
        PositionArg::First => DigitPosition::First,
        PositionArg::Second => DigitPosition::Second,
    };
    let rows = benford_rows(&table, label, position, model)?;
    if rows.iter().all(|r| r.observed == 0) {
        let _ = writeln!(
            stderr,
            "warning: candidate {label} has no countable digits; the histogram is empty"
        );
    }
    let format = g.format.unwrap_or(Format::Csv);
    let content = match format {
        Format::Json => json(&rows)?,
        Format::Csv => digit_rows_csv(&rows)?,
        Format::Md => digit_table(&rows).markdown(),
    };
    emit(g, &format!("benford_{label}"), &content, format, stdout)
}

fn histogram_table(h: &BinnedHistogram) -> Table {
    Table {
        header: vec!["lo", "hi", "count"],
        rows: h
            .bins
            .iter()
            .map(|b| vec![fmt_sig(b.lo), fmt_sig(b.hi), b.count.to_string()])
            .collect(),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_hist(
    g: &GlobalArgs,
    kind: HistKind,
    label: Option<&str>,
    bin_width: f64,
    marker_digit: Option<u8>,
    marker_label: &str,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> std::result::Result<(), Failure> {
    let table = load(g)?;
    let totals: Vec<f64> = table.totals().into_iter().map(|v| v as f64).collect();
    let (stem, hist) = match kind {
        HistKind::Totals => ("hist_totals".to_string(), log_histogram(&totals, bin_width)?),
        HistKind::Folded => ("hist_folded".to_string(), folded_histogram(&totals, bin_width)?),
        HistKind::Candidate => {
            let label = label.ok_or_else(|| Failure::Usage("`hist candidate` needs --label".into()))?;
            let values: Vec<f64> = nonzero_counts(&table, label)?.into_iter().map(|v| v as f64).collect();
            if values.is_empty() {
                let _ = writeln!(stderr, "warning: candidate {label} has no nonzero counts");
            }
            (format!("hist_{label}"), log_histogram(&values, bin_width)?)
        }
    };
    let markers = match marker_digit {
        Some(d) => {
            let alpha = global_fraction(&table, marker_label)?;
            let mut ds = vec![1];
            if d != 1 {
                ds.push(d);
            }
            ds.into_iter()
                .map(|d| decade_marker(d, alpha))
                .collect::<Result<Vec<_>>>()?
        }
        None => Vec::new(),
    };
    let format = g.format.unwrap_or(Format::Csv);
    let marker_lines: String = markers
        .iter()
        .map(|m| {
            format!(
                "# marker digit={} lo={} hi={} width_dex={}\n",
                m.digit,
                fmt_sig(m.lo),
                fmt_sig(m.hi),
                fmt_sig(m.width_dex)
            )
        })
        .collect();
    let content = match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                histogram: &'a BinnedHistogram,
                markers: &'a [crate::report::DecadeMarker],
            }
            json(&Out {
                histogram: &hist,
                markers: &markers,
            })?
        }
        Format::Csv => marker_lines + &hist.to_csv()?,
        Format::Md => {
            let m = histogram_table(&hist).markdown();
            if markers.is_empty() {
                m
            } else {
                format!("{m}\n{}", marker_lines.replace("# ", "- "))
            }
        }
    };
    emit(g, &stem, &content, format, stdout)
}

fn cmd_scatter(
    g: &GlobalArgs,
    label: &str,
    marker_label: &str,
    marker_digit: u8,
    stdout: &mut dyn Write,
) -> std::result::Result<(), Failure> {
    let table = load(g)?;
    let rows = scatter_rows(&table, label, marker_label, marker_digit)?;
    let format = g.format.unwrap_or(Format::Csv);
    let content = match format {
        Format::Json => json(&rows)?,
        Format::Csv => scatter_rows_csv(&rows)?,
        Format::Md => Table {
            header: vec!["name", "total", "proportion", "marked"],
            rows: rows
                .iter()
                .map(|r| {
                    vec![
                        r.name.clone(),
                        r.total.to_string(),
                        fmt_sig(r.proportion),
                        r.marked.to_string(),
                    ]
                })
                .collect(),
        }
        .markdown(),
    };
    emit(g, &format!("scatter_{label}"), &content, format, stdout)
}

fn report_config(
    g: &GlobalArgs,
    marker_label: &str,
    marker_digit: u8,
    parity_trials: Option<u64>,
    mean_fraction: MeanFractionArg,
) -> ReportConfig {
    let mut c = ReportConfig {
        marker_label: marker_label.to_string(),
        marker_digit,
        mean_fraction_mode: match mean_fraction {
            MeanFractionArg::Global => MeanFractionMode::GlobalFraction,
            MeanFractionArg::MeanProportion => MeanFractionMode::MeanProportion,
        },
        ..ReportConfig::default()
    };
    if let Some(s) = g.seed {
        c.seed = s;
    }
    if let Some(r) = g.realizations {
        c.realizations = r;
    }
    if let Some(s) = &g.sigmas {
        c.sigmas = s.clone();
    }
    if let Some(p) = parity_trials {
        c.parity_trials = p;
    }
    c
}

fn simulation_table(sim: &SimulationResult) -> Table {
    Table {
        header: vec![
            "sigma",
            "condition",
            "hits",
            "trials",
            "p_hat",
            "wilson_lo",
            "wilson_hi",
        ],
        rows: sim
            .rows
            .iter()
            .flat_map(|row| {
                row.tallies.iter().map(move |t| {
                    vec![
                        fmt_sig(row.sigma),
                        t.condition.clone(),
                        t.hits.to_string(),
                        t.trials.to_string(),
                        fmt_p(t.p_hat),
                        fmt_p(t.wilson_95.lo),
                        fmt_p(t.wilson_95.hi),
                    ]
                })
            })
            .collect(),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    g: &GlobalArgs,
    threads: Option<usize>,
    label: &str,
    marker_digit: u8,
    conditions: &[String],
    mean_fraction: MeanFractionArg,
    no_noise: bool,
    stdout: &mut dyn Write,
) -> std::result::Result<(), Failure> {
    let table = load(g)?;
    let config = report_config(g, label, marker_digit, None, mean_fraction);
    let mut sim = report_simulation_config(&table, &config)?;
    if !conditions.is_empty() {
        sim.conditions = conditions
            .iter()
            .map(|c| DigitCondition::parse(c))
            .collect::<Result<_>>()?;
    }
    sim.poisson_noise = !no_noise;
    let result = thread_pool(threads)?.install(|| run_simulation(&sim))?;
    let format = g.format.unwrap_or(Format::Csv);
    let content = match format {
        Format::Json => result.to_json()? + "\n",
        Format::Csv => result.to_csv()?,
        Format::Md => simulation_table(&result).markdown(),
    };
    emit(g, "simulation", &content, format, stdout)
}

/// Every csv table the report writes, by file stem.
pub fn report_tables(report: &Report, table: &VoteTable) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    if let Some(h) = report.totals_log_histogram.value() {
        out.push(("hist_totals".into(), h.to_csv()?));
    }
    if let Some(h) = report.totals_folded_histogram.value() {
        out.push(("hist_folded".into(), h.to_csv()?));
    }
    for (label, h) in &report.candidate_log_histograms {
        if let Some(h) = h.value() {
            out.push((format!("hist_{label}"), h.to_csv()?));
        }
    }
    for c in report.first_digits.iter().filter_map(|s| s.value()) {
        out.push((format!("first_digits_{}", c.label), digit_rows_csv(&c.rows)?));
    }
    if let Some(rows) = report.concatenated_first_digits.value() {
        out.push(("first_digits_all".into(), digit_rows_csv(rows)?));
    }
    out.push((
        "poisson_scan".into(),
        write_csv(
            &[
                "label",
                "digit",
                "observed",
                "expected_standard",
                "expected_empirical",
                "p_standard",
                "p_empirical",
            ],
            &report
                .poisson_scan
                .iter()
                .map(|r| {
                    vec![
                        r.label.clone(),
                        r.digit.to_string(),
                        r.observed.to_string(),
                        fmt_sig(r.expected_standard),
                        fmt_sig(r.expected_empirical),
                        fmt_p(r.p_standard),
                        fmt_p(r.p_empirical),
                    ]
                })
                .collect::<Vec<_>>(),
        )?,
    ));
    if let Some(sim) = report.simulation.value() {
        out.push(("simulation".into(), sim.to_csv()?));
    }
    for label in table.labels() {
        let rows = scatter_rows(table, label, &report.config.marker_label, report.config.marker_digit)?;
        out.push((format!("scatter_{label}"), scatter_rows_csv(&rows)?));
    }
    if let Some(b) = report.big_cities.value() {
        let rows: Vec<Vec<String>> = b
            .top_areas
            .iter()
            .map(|a| {
                vec![
                    a.name.clone(),
                    a.total.to_string(),
                    a.marker_count.to_string(),
                    a.target_count.to_string(),
                    fmt_sig(a.target_proportion),
                    a.marked.to_string(),
                ]
            })
            .collect();
        out.push((
            "big_cities".into(),
            write_csv(
                &[
                    "name",
                    "total",
                    "marker_count",
                    "target_count",
                    "target_proportion",
                    "marked",
                ],
                &rows,
            )?,
        ));
    }
    if let Some(s) = report.seventies.value() {
        let rows: Vec<Vec<String>> = s
            .frequencies
            .iter()
            .enumerate()
            .map(|(i, f)| vec![(70 + i).to_string(), f.to_string()])
            .collect();
        out.push(("seventies".into(), write_csv(&["value", "frequency"], &rows)?));
    }
    let opt = |x: Option<f64>| x.map(fmt_sig).unwrap_or_default();
    let spearman = report.spearman.value();
    let rows: Vec<Vec<String>> = report
        .candidate_statistics
        .iter()
        .map(|s| {
            let sp = spearman.and_then(|rows| rows.iter().find(|r| r.label == s.label));
            vec![
                s.label.clone(),
                opt(s.skew_log_counts.value().map(|v| v.gamma1)),
                opt(s.skew_log_counts.value().map(|v| v.normalized)),
                opt(s.skew_log_proportions.value().map(|v| v.gamma1)),
                opt(s.skew_log_proportions.value().map(|v| v.normalized)),
                opt(s.width_log_counts.value().copied()),
                opt(sp.map(|r| r.full.rho)),
                opt(sp.map(|r| r.full.normalized)),
                opt(sp.map(|r| r.ablated.rho)),
                opt(sp.map(|r| r.ablated.normalized)),
            ]
        })
        .collect();
    out.push((
        "candidate_statistics".into(),
        write_csv(
            &[
                "label",
                "skew_log_counts",
                "skew_log_counts_normalized",
                "skew_log_proportions",
                "skew_log_proportions_normalized",
                "width_log_counts",
                "spearman_rho",
                "spearman_normalized",
                "spearman_rho_ablated",
                "spearman_normalized_ablated",
            ],
            &rows,
        )?,
    ));
    Ok(out)
}

fn cmd_report(
    g: &GlobalArgs,
    threads: Option<usize>,
    marker_label: &str,
    marker_digit: u8,
    parity_trials: Option<u64>,
    mean_fraction: MeanFractionArg,
    stdout: &mut dyn Write,
) -> std::result::Result<(), Failure> {
    let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("report"));
    let table = load(g)?;
    let config = report_config(g, marker_label, marker_digit, parity_trials, mean_fraction);
    let report = thread_pool(threads)?.install(|| full_report(&table, &config))?;
    let tables_dir = dir.join("tables");
    fs::create_dir_all(&tables_dir).map_err(|e| Failure::Output(format!("{}: {e}", tables_dir.display())))?;
    write_file(&dir.join("report.json"), &(report.to_json()? + "\n"))?;
    write_file(&dir.join("report.md"), &render_markdown(&report))?;
    for (stem, csv) in report_tables(&report, &table)? {
        write_file(&tables_dir.join(format!("{stem}.csv")), &csv)?;
    }
    let _ = writeln!(stdout, "wrote {}", dir.display());
    Ok(())
}
