//! Post-hoc analyses keyed on a marker (by default: candidate K's counts
//! starting with 7) and the end-to-end report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::benford::{
    empirical_first_digit_model, expected_counts, first_digit, second_digit, standard_first_digit_model, BenfordModel,
    DigitHistogram,
};
use crate::report::{
    candidate_first_digits, decade_marker, digit_rows, fmt_p, fmt_sig, folded_histogram, log_histogram, nonzero_counts,
    BinnedHistogram, DecadeMarker, DigitRow, DEFAULT_BIN_WIDTH_DEX,
};
use crate::scatter_sim::{
    parity_oracle_7a, run_simulation, scatter_estimate, DigitCondition, MonteCarloEstimate, SimulationConfig,
    SimulationResult,
};
use crate::stat_tests::{
    chi_square_gof, identical_second_digit_prob, ks_two_sample_exact, log_skewness, log_width, multi_test_correction,
    poisson_tail, spearman_rho, CorrectionMethod, CorrelationResult, Sidedness, SkewnessResult, TestResult,
};
use crate::vote_data::{global_fraction, validate, ValidationReport, VoteArea, VoteTable};
use crate::{Error, Result};

fn marked(area_count: u64, marker_digit: u8) -> bool {
    area_count > 0 && first_digit(area_count).ok() == Some(marker_digit)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BigCityArea {
    pub name: String,
    pub total: u64,
    pub marker_count: u64,
    pub target_count: u64,
    pub target_proportion: f64,
    pub marked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BigCitySplit {
    /// Ascending by total.
    pub top_areas: Vec<BigCityArea>,
    pub group_marked: Vec<String>,
    pub group_other: Vec<String>,
    pub ks: Option<TestResult>,
    pub ks_skipped: Option<String>,
    /// Second digits of the marked areas' marker counts (`None` below 10).
    pub marked_second_digits: Vec<Option<u8>>,
    pub marked_second_digits_identical: bool,
    /// Chance that that many counts share a second digit.
    pub identical_second_digit_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BigCityOptions {
    pub n: usize,
    pub marker_label: String,
    pub marker_digit: u8,
    pub target_label: String,
}

impl Default for BigCityOptions {
    fn default() -> Self {
        Self {
            n: 6,
            marker_label: "K".into(),
            marker_digit: 7,
            target_label: "A".into(),
        }
    }
}

pub fn big_city_split(table: &VoteTable, opts: &BigCityOptions) -> Result<BigCitySplit> {
    if table.len() < opts.n || opts.n == 0 {
        return Err(Error::invalid(format!(
            "big-city split needs ≥ {} areas, table has {}",
            opts.n,
            table.len()
        )));
    }
    let midx = table.label_index(&opts.marker_label)?;
    let tidx = table.label_index(&opts.target_label)?;

    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by(|&a, &b| table.areas()[b].total.cmp(&table.areas()[a].total).then(a.cmp(&b)));
    order.truncate(opts.n);
    order.sort_by(|&a, &b| table.areas()[a].total.cmp(&table.areas()[b].total).then(a.cmp(&b)));

    let top_areas: Vec<BigCityArea> = order
        .iter()
        .map(|&i| {
            let a = &table.areas()[i];
            let marker_count = a.per_candidate[midx];
            BigCityArea {
                name: a.name.clone(),
                total: a.total,
                marker_count,
                target_count: a.per_candidate[tidx],
                target_proportion: if a.total > 0 {
                    a.per_candidate[tidx] as f64 / a.total as f64
                } else {
                    0.0
                },
                marked: marked(marker_count, opts.marker_digit),
            }
        })
        .collect();

    let (m, o): (Vec<&BigCityArea>, Vec<&BigCityArea>) = top_areas.iter().partition(|a| a.marked);
    let props = |g: &[&BigCityArea]| g.iter().map(|a| a.target_proportion).collect::<Vec<_>>();
    let (ks, ks_skipped) = if m.is_empty() || o.is_empty() {
        (None, Some("one side of the split is empty".to_string()))
    } else {
        match ks_two_sample_exact(&props(&m), &props(&o)) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };

    let marked_second_digits: Vec<Option<u8>> = m.iter().map(|a| second_digit(a.marker_count).ok()).collect();
    let marked_second_digits_identical = marked_second_digits.len() >= 2
        && marked_second_digits
            .iter()
            .all(|d| d.is_some() && *d == marked_second_digits[0]);
    let identical_second_digit_p = (m.len() >= 2).then(|| identical_second_digit_prob(m.len() as u32));

    Ok(BigCitySplit {
        group_marked: m.iter().map(|a| a.name.clone()).collect(),
        group_other: o.iter().map(|a| a.name.clone()).collect(),
        top_areas,
        ks,
        ks_skipped,
        marked_second_digits,
        marked_second_digits_identical,
        identical_second_digit_p,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeventiesParity {
    pub label: String,
    /// Frequencies of the values 70..=79.
    pub frequencies: [u64; 10],
    pub n: u64,
    pub odd_count: u64,
    pub even_values: Vec<u64>,
    pub each_even_exactly_once: bool,
    pub oracle: Option<MonteCarloEstimate>,
}

/// Tallies a candidate's two-digit counts 70..=79; runs the parity oracle when `oracle` is given.
pub fn seventies_parity(table: &VoteTable, label: &str, oracle: Option<(u64, u64)>) -> Result<SeventiesParity> {
    let counts = table.column(label)?;
    let mut frequencies = [0u64; 10];
    for v in counts.into_iter().filter(|v| (70..80).contains(v)) {
        frequencies[(v - 70) as usize] += 1;
    }
    let n = frequencies.iter().sum();
    let odd_count = frequencies.iter().skip(1).step_by(2).sum();
    let even_values: Vec<u64> = (0..10)
        .step_by(2)
        .flat_map(|i| std::iter::repeat_n(70 + i as u64, frequencies[i] as usize))
        .collect();
    let each_even_exactly_once = even_values == [70, 72, 74, 76, 78];
    let oracle = match oracle {
        Some((trials, seed)) => Some(parity_oracle_7a(trials, seed)?),
        None => None,
    };
    Ok(SeventiesParity {
        label: label.to_string(),
        frequencies,
        n,
        odd_count,
        even_values,
        each_even_exactly_once,
        oracle,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpearmanAblation {
    pub label: String,
    pub full: CorrelationResult,
    pub ablated: CorrelationResult,
}

/// Spearman ρ of `(v_j, v_X_j / v_j)` over areas not excluded; zero proportions are kept.
pub fn proportion_correlation(
    table: &VoteTable,
    label: &str,
    exclude: impl Fn(&VoteArea) -> bool,
) -> Result<CorrelationResult> {
    let idx = table.label_index(label)?;
    let (x, y): (Vec<f64>, Vec<f64>) = table
        .areas()
        .iter()
        .filter(|a| a.total > 0 && !exclude(a))
        .map(|a| (a.total as f64, a.per_candidate[idx] as f64 / a.total as f64))
        .unzip();
    spearman_rho(&x, &y)
}

pub fn spearman_ablation(table: &VoteTable, marker_label: &str, marker_digit: u8) -> Result<Vec<SpearmanAblation>> {
    let midx = table.label_index(marker_label)?;
    table
        .labels()
        .iter()
        .map(|label| {
            Ok(SpearmanAblation {
                label: label.clone(),
                full: proportion_correlation(table, label, |_| false)?,
                ablated: proportion_correlation(table, label, |a| marked(a.per_candidate[midx], marker_digit))?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaShift {
    pub name: String,
    pub deltas: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterfactualReport {
    pub target_proportion: f64,
    pub reduce_label: String,
    pub rival_label: String,
    pub affected_areas: Vec<String>,
    pub per_area: Vec<AreaShift>,
    /// Net change per label over all affected areas.
    pub delta_per_candidate: BTreeMap<String, i64>,
    /// Change of (reduce − rival); negative when the gap narrows.
    pub gap_change: i64,
    /// `−gap_change`.
    pub gap_reduction: i64,
    #[serde(skip)]
    pub adjusted: VoteTable,
}

/// Lowers `reduce_label` to `target_proportion` of each named area's total and
/// hands the removed votes to the other labels in proportion to their global fractions.
pub fn counterfactual_shift(
    table: &VoteTable,
    area_names: &[String],
    reduce_label: &str,
    rival_label: &str,
    target_proportion: f64,
) -> Result<CounterfactualReport> {
    let ridx = table.label_index(reduce_label)?;
    let weights: Vec<f64> = table
        .labels()
        .iter()
        .enumerate()
        .map(|(i, l)| if i == ridx { Ok(0.0) } else { global_fraction(table, l) })
        .collect::<Result<_>>()?;
    counterfactual_shift_with_weights(
        table,
        area_names,
        reduce_label,
        rival_label,
        target_proportion,
        &weights,
    )
}

/// [`counterfactual_shift`] with explicit redistribution weights (one per label, renormalised
/// over the labels other than `reduce_label`).
pub fn counterfactual_shift_with_weights(
    table: &VoteTable,
    area_names: &[String],
    reduce_label: &str,
    rival_label: &str,
    target_proportion: f64,
    weights: &[f64],
) -> Result<CounterfactualReport> {
    let ridx = table.label_index(reduce_label)?;
    let vidx = table.label_index(rival_label)?;
    if weights.len() != table.labels().len() {
        return Err(Error::invalid("one redistribution weight per label is required"));
    }
    if !(0.0..=1.0).contains(&target_proportion) {
        return Err(Error::invalid(format!(
            "target proportion {target_proportion} is outside [0, 1]"
        )));
    }
    let others: Vec<usize> = (0..weights.len()).filter(|&i| i != ridx).collect();
    let wsum: f64 = others.iter().map(|&i| weights[i]).sum();
    if others.is_empty() || !(wsum > 0.0) || others.iter().any(|&i| weights[i] < 0.0) {
        return Err(Error::invalid(
            "redistribution weights must be non-negative with a positive sum",
        ));
    }

    let mut areas = table.areas().to_vec();
    let mut per_area = Vec::with_capacity(area_names.len());
    let mut net = vec![0i64; weights.len()];
    for name in area_names {
        let pos = areas
            .iter()
            .position(|a| &a.name == name)
            .ok_or_else(|| Error::invalid(format!("area `{name}` not found")))?;
        let area = &mut areas[pos];
        let current = area.per_candidate[ridx];
        let target = (target_proportion * area.total as f64).round() as u64;
        if target > current {
            return Err(Error::invalid(format!(
                "target proportion {target_proportion} is above the current proportion in `{name}`"
            )));
        }
        let removed = current - target;

        // largest-remainder apportionment of `removed`
        let shares: Vec<f64> = others.iter().map(|&i| removed as f64 * weights[i] / wsum).collect();
        let mut given: Vec<u64> = shares.iter().map(|s| s.floor() as u64).collect();
        let mut left = removed - given.iter().sum::<u64>();
        let mut by_remainder: Vec<usize> = (0..others.len()).collect();
        by_remainder.sort_by(|&a, &b| {
            let ra = shares[a] - shares[a].floor();
            let rb = shares[b] - shares[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &k in by_remainder.iter().cycle() {
            if left == 0 {
                break;
            }
            given[k] += 1;
            left -= 1;
        }

        let mut deltas = vec![0i64; weights.len()];
        deltas[ridx] = -(removed as i64);
        area.per_candidate[ridx] = target;
        for (k, &i) in others.iter().enumerate() {
            deltas[i] = given[k] as i64;
            area.per_candidate[i] += given[k];
        }
        for (n, d) in net.iter_mut().zip(&deltas) {
            *n += d;
        }
        per_area.push(AreaShift {
            name: name.clone(),
            deltas,
        });
    }

    let gap_change = net[ridx] - net[vidx];
    Ok(CounterfactualReport {
        target_proportion,
        reduce_label: reduce_label.to_string(),
        rival_label: rival_label.to_string(),
        affected_areas: area_names.to_vec(),
        per_area,
        delta_per_candidate: table.labels().iter().cloned().zip(net).collect(),
        gap_change,
        gap_reduction: -gap_change,
        adjusted: VoteTable::new(areas, table.labels().to_vec())?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CombinedProbability {
    pub components: Vec<(String, f64)>,
    pub correction_c: u32,
    pub p_all: f64,
}

/// `C · Π p_i`, capped at 1.
pub fn combined_probability(components: &[(String, f64)], c: u32) -> Result<CombinedProbability> {
    if c == 0 {
        return Err(Error::invalid("the correction factor must be ≥ 1"));
    }
    if let Some((name, p)) = components.iter().find(|(_, p)| !(*p > 0.0 && *p <= 1.0)) {
        return Err(Error::invalid(format!("component `{name}` has p = {p} outside (0, 1]")));
    }
    let product: f64 = components.iter().map(|(_, p)| p).product();
    Ok(CombinedProbability {
        components: components.to_vec(),
        correction_c: c,
        p_all: (c as f64 * product).min(1.0),
    })
}

/// How the simulation's mean fraction is derived from the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanFractionMode {
    /// The candidate's national share `Σ v_X / Σ v`.
    GlobalFraction,
    /// The average of the per-area proportions `v_X_j / v_j`.
    MeanProportion,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportConfig {
    pub marker_label: String,
    pub marker_digit: u8,
    pub target_label: String,
    pub rival_label: String,
    pub top_n: usize,
    pub target_proportion: f64,
    pub sigmas: Vec<f64>,
    pub realizations: u64,
    pub seed: u64,
    pub mean_fraction_mode: MeanFractionMode,
    pub parity_trials: u64,
    /// Number of first-digit tests the headline excess is corrected for.
    pub digit_tests_m: u32,
    /// Post-hoc factor for the combined probability.
    pub combination_c: u32,
    pub bin_width_dex: f64,
    pub scatter_thresholds: Vec<u64>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            marker_label: "K".into(),
            marker_digit: 7,
            target_label: "A".into(),
            rival_label: "M".into(),
            top_n: 6,
            target_proportion: 0.5,
            sigmas: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 1.0, 1.5],
            realizations: 1_000_000,
            seed: 20_090_612,
            mean_fraction_mode: MeanFractionMode::GlobalFraction,
            parity_trials: 1_000_000,
            digit_tests_m: 36,
            combination_c: 3,
            bin_width_dex: DEFAULT_BIN_WIDTH_DEX,
            scatter_thresholds: vec![0, 100_000, 300_000, 1_000_000],
        }
    }
}

impl ReportConfig {
    pub fn sha256(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    fn digit_conditions(&self, observed: &DigitHistogram) -> Vec<DigitCondition> {
        let ones = observed.count(1) as u32;
        let marks = observed.count(self.marker_digit) as u32;
        let d = self.marker_digit;
        vec![
            DigitCondition::at_least("ones", 1, ones),
            DigitCondition::at_least(format!("digit{d}"), d, marks),
            DigitCondition::all_of(format!("ones_and_digit{d}"), vec![(1, ones), (d, marks)]),
        ]
    }
}

/// A report section that may be skipped with a stated reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Section<T> {
    Computed { value: T },
    Skipped { reason: String },
}

impl<T> Section<T> {
    pub fn value(&self) -> Option<&T> {
        match self {
            Section::Computed { value } => Some(value),
            Section::Skipped { .. } => None,
        }
    }
}

impl<T> From<Result<T>> for Section<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(value) => Section::Computed { value },
            Err(e) => Section::Skipped { reason: e.to_string() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool_version: String,
    pub dataset_sha256: String,
    pub config_sha256: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateDigits {
    pub label: String,
    pub alpha: f64,
    pub n: u64,
    pub rows: Vec<DigitRow>,
    pub chi_square_standard: Section<TestResult>,
    pub chi_square_empirical: Section<TestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoissonRow {
    pub label: String,
    pub digit: u8,
    pub observed: u64,
    pub expected_standard: f64,
    pub expected_empirical: f64,
    pub p_standard: f64,
    pub p_empirical: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeadlineExcess {
    pub label: String,
    pub digit: u8,
    pub observed: u64,
    pub expected_standard: f64,
    pub expected_empirical: f64,
    pub standard: TestResult,
    /// One-sided, then two-sided with the m-test correction attached.
    pub empirical: TestResult,
    pub empirical_two_sided: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateStatistics {
    pub label: String,
    pub skew_log_counts: Section<SkewnessResult>,
    pub skew_log_proportions: Section<SkewnessResult>,
    pub width_log_counts: Section<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterEstimate {
    pub min_total: u64,
    pub sigma_dex: Section<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedExcess {
    pub sigma: f64,
    pub condition: String,
    pub hits: u64,
    pub trials: u64,
    /// `hits / trials`, or `1 / trials` as an upper bound when there are no hits.
    pub p: f64,
    pub upper_bound: bool,
    pub corrected: f64,
    pub m: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub provenance: Provenance,
    pub config: ReportConfig,
    pub validation: ValidationReport,
    pub global_fractions: Vec<(String, f64)>,
    pub totals_log_histogram: Section<BinnedHistogram>,
    pub totals_folded_histogram: Section<BinnedHistogram>,
    pub candidate_log_histograms: Vec<(String, Section<BinnedHistogram>)>,
    pub first_digits: Vec<Section<CandidateDigits>>,
    pub concatenated_first_digits: Section<Vec<DigitRow>>,
    pub decade_markers: Section<Vec<DecadeMarker>>,
    pub poisson_scan: Vec<PoissonRow>,
    pub headline: Section<HeadlineExcess>,
    pub candidate_statistics: Vec<CandidateStatistics>,
    pub spearman: Section<Vec<SpearmanAblation>>,
    pub scatter: Vec<ScatterEstimate>,
    pub simulation: Section<SimulationResult>,
    pub simulated_excess: Section<SimulatedExcess>,
    pub big_cities: Section<BigCitySplit>,
    pub seventies: Section<SeventiesParity>,
    pub counterfactual: Section<CounterfactualReport>,
    pub combined: Section<CombinedProbability>,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        crate::report::to_rounded_json(self)
    }
}

fn candidate_digits(table: &VoteTable, label: &str, standard: &BenfordModel) -> Result<CandidateDigits> {
    let observed = candidate_first_digits(table, label)?;
    if observed.n == 0 {
        return Err(Error::undefined(format!("candidate {label} has no nonzero counts")));
    }
    let alpha = global_fraction(table, label)?;
    let empirical = empirical_first_digit_model(&table.totals(), alpha);
    Ok(CandidateDigits {
        label: label.to_string(),
        alpha,
        n: observed.n,
        rows: digit_rows(&observed, standard, empirical.as_ref().ok()),
        chi_square_standard: chi_square_gof(&observed, standard).into(),
        chi_square_empirical: empirical.and_then(|m| chi_square_gof(&observed, &m)).into(),
    })
}

fn poisson_scan(table: &VoteTable, standard: &BenfordModel) -> Vec<PoissonRow> {
    let mut rows = Vec::new();
    for label in table.labels() {
        let Ok(observed) = candidate_first_digits(table, label) else {
            continue;
        };
        let Ok(alpha) = global_fraction(table, label) else {
            continue;
        };
        let Ok(emp) = empirical_first_digit_model(&table.totals(), alpha) else {
            continue;
        };
        let se = expected_counts(standard, observed.n);
        let ee = expected_counts(&emp, observed.n);
        for (s, e) in se.iter().zip(&ee) {
            let o = observed.count(s.digit);
            let tail = |lambda: f64| {
                if lambda > 0.0 {
                    poisson_tail(o, lambda).unwrap_or(1.0)
                } else {
                    0.0
                }
            };
            rows.push(PoissonRow {
                label: label.clone(),
                digit: s.digit,
                observed: o,
                expected_standard: s.expected,
                expected_empirical: e.expected,
                p_standard: tail(s.expected),
                p_empirical: tail(e.expected),
            });
        }
    }
    rows
}

fn headline(table: &VoteTable, config: &ReportConfig, standard: &BenfordModel) -> Result<HeadlineExcess> {
    let observed = candidate_first_digits(table, &config.marker_label)?;
    let alpha = global_fraction(table, &config.marker_label)?;
    let emp = empirical_first_digit_model(&table.totals(), alpha)?;
    let d = config.marker_digit;
    let o = observed.count(d);
    let es = observed.n as f64 * standard.probability(d);
    let ee = observed.n as f64 * emp.probability(d);
    if es <= 0.0 || ee <= 0.0 {
        return Err(Error::undefined("expected count of the marker digit is zero"));
    }
    let standard_test = TestResult::new(
        "Poisson excess vs standard model",
        o as f64,
        poisson_tail(o, es)?,
        Sidedness::One,
        observed.n as usize,
    );
    let empirical = TestResult::new(
        "Poisson excess vs empirical model",
        o as f64,
        poisson_tail(o, ee)?,
        Sidedness::One,
        observed.n as usize,
    );
    let empirical_two_sided = empirical
        .clone()
        .into_two_sided()
        .with_correction(CorrectionMethod::Multiply, config.digit_tests_m);
    Ok(HeadlineExcess {
        label: config.marker_label.clone(),
        digit: d,
        observed: o,
        expected_standard: es,
        expected_empirical: ee,
        standard: standard_test,
        empirical,
        empirical_two_sided,
    })
}

fn candidate_statistics(table: &VoteTable, label: &str) -> Result<CandidateStatistics> {
    let idx = table.label_index(label)?;
    let counts: Vec<f64> = nonzero_counts(table, label)?.into_iter().map(|v| v as f64).collect();
    let props: Vec<f64> = table
        .areas()
        .iter()
        .filter(|a| a.per_candidate[idx] > 0)
        .map(|a| a.per_candidate[idx] as f64 / a.total as f64)
        .collect();
    Ok(CandidateStatistics {
        label: label.to_string(),
        skew_log_counts: log_skewness(&counts).into(),
        skew_log_proportions: log_skewness(&props).into(),
        width_log_counts: log_width(&counts).into(),
    })
}

fn mean_fraction(table: &VoteTable, label: &str, mode: MeanFractionMode) -> Result<f64> {
    match mode {
        MeanFractionMode::GlobalFraction => global_fraction(table, label),
        MeanFractionMode::MeanProportion => {
            let idx = table.label_index(label)?;
            let props: Vec<f64> = table
                .areas()
                .iter()
                .filter(|a| a.total > 0)
                .map(|a| a.per_candidate[idx] as f64 / a.total as f64)
                .collect();
            if props.is_empty() {
                return Err(Error::undefined("no area with a positive total"));
            }
            Ok(props.iter().sum::<f64>() / props.len() as f64)
        }
    }
}

/// Builds the simulation config the report runs for the marker candidate.
pub fn report_simulation_config(table: &VoteTable, config: &ReportConfig) -> Result<SimulationConfig> {
    let observed = candidate_first_digits(table, &config.marker_label)?;
    let mut sim = SimulationConfig::new(
        table.totals(),
        mean_fraction(table, &config.marker_label, config.mean_fraction_mode)?,
    );
    sim.sigmas = config.sigmas.clone();
    sim.realizations = config.realizations;
    sim.seed = config.seed;
    sim.conditions = config.digit_conditions(&observed);
    sim.validate()?;
    Ok(sim)
}

fn simulated_excess(
    sim: &SimulationResult,
    config: &ReportConfig,
    measured_scatter: Option<f64>,
) -> Result<SimulatedExcess> {
    let condition = format!("digit{}", config.marker_digit);
    if sim.rows.is_empty() {
        return Err(Error::undefined("the simulation has no scatter widths"));
    }
    // the width closest to the measured scatter; without one, the most favourable row
    let idx = match measured_scatter {
        Some(s) => (0..sim.rows.len())
            .min_by(|&a, &b| (sim.rows[a].sigma - s).abs().total_cmp(&(sim.rows[b].sigma - s).abs()))
            .unwrap_or(0),
        None => (0..sim.rows.len())
            .max_by(|&a, &b| {
                let pa = sim.tally(a, &condition).map_or(0.0, |t| t.p_hat);
                let pb = sim.tally(b, &condition).map_or(0.0, |t| t.p_hat);
                pa.total_cmp(&pb).then(b.cmp(&a))
            })
            .unwrap_or(0),
    };
    let tally = sim
        .tally(idx, &condition)
        .ok_or_else(|| Error::undefined(format!("simulation lacks condition {condition}")))?;
    let upper_bound = tally.hits == 0;
    let p = tally.hits.max(1) as f64 / tally.trials as f64;
    Ok(SimulatedExcess {
        sigma: sim.rows[idx].sigma,
        condition,
        hits: tally.hits,
        trials: tally.trials,
        p,
        upper_bound,
        corrected: multi_test_correction(p, config.digit_tests_m, CorrectionMethod::Multiply),
        m: config.digit_tests_m,
    })
}

/// Runs every analysis on `table`; parts that do not apply are reported as skipped.
pub fn full_report(table: &VoteTable, config: &ReportConfig) -> Result<Report> {
    let standard = standard_first_digit_model();
    let validation = validate(table);
    let global_fractions = table
        .labels()
        .iter()
        .filter_map(|l| global_fraction(table, l).ok().map(|a| (l.clone(), a)))
        .collect();
    let totals: Vec<f64> = table.totals().into_iter().map(|v| v as f64).collect();

    let candidate_log_histograms = table
        .labels()
        .iter()
        .map(|l| {
            let values: Result<Vec<f64>> = nonzero_counts(table, l).map(|c| c.into_iter().map(|v| v as f64).collect());
            (
                l.clone(),
                values.and_then(|v| log_histogram(&v, config.bin_width_dex)).into(),
            )
        })
        .collect();

    let first_digits = table
        .labels()
        .iter()
        .map(|l| candidate_digits(table, l, &standard).into())
        .collect();

    let concatenated_first_digits = (|| {
        let mut all = Vec::new();
        let mut rows: Option<Vec<DigitRow>> = None;
        for l in table.labels() {
            let mut counts = nonzero_counts(table, l)?;
            all.append(&mut counts);
            let hist = candidate_first_digits(table, l)?;
            let emp = empirical_first_digit_model(&table.totals(), global_fraction(table, l)?)?;
            let emp_rows = expected_counts(&emp, hist.n);
            let acc = rows.get_or_insert_with(Vec::new);
            if acc.is_empty() {
                acc.extend(digit_rows(&hist, &standard, Some(&emp)));
            } else {
                for (r, e) in acc.iter_mut().zip(&emp_rows) {
                    *r.expected_empirical.as_mut().expect("set on first label") += e.expected;
                    let s = r.stderr_empirical.as_mut().expect("set on first label");
                    *s = (s.powi(2) + e.stderr.powi(2)).sqrt();
                }
            }
        }
        let hist = crate::benford::digit_histogram(&all, crate::benford::DigitPosition::First)?;
        let std_rows = expected_counts(&standard, hist.n);
        let mut rows = rows.ok_or_else(|| Error::undefined("no candidates"))?;
        for (r, s) in rows.iter_mut().zip(&std_rows) {
            r.observed = hist.count(r.digit);
            r.expected_standard = s.expected;
            r.stderr_standard = s.stderr;
        }
        Ok(rows)
    })()
    .into();

    let decade_markers = global_fraction(table, &config.marker_label)
        .and_then(|alpha| {
            let mut digits = vec![1u8];
            if config.marker_digit != 1 {
                digits.push(config.marker_digit);
            }
            digits
                .into_iter()
                .map(|d| decade_marker(d, alpha))
                .collect::<Result<Vec<_>>>()
        })
        .into();

    let candidate_statistics = table
        .labels()
        .iter()
        .filter_map(|l| candidate_statistics(table, l).ok())
        .collect();

    let scatter: Vec<ScatterEstimate> = config
        .scatter_thresholds
        .iter()
        .map(|&min_total| ScatterEstimate {
            min_total,
            sigma_dex: scatter_estimate(table, &config.marker_label, min_total).into(),
        })
        .collect();
    let measured_scatter = scatter.first().and_then(|s| s.sigma_dex.value().copied());

    let simulation: Section<SimulationResult> = report_simulation_config(table, config)
        .and_then(|sim| run_simulation(&sim))
        .into();
    let simulated_excess: Section<SimulatedExcess> = match simulation.value() {
        Some(sim) => simulated_excess(sim, config, measured_scatter).into(),
        None => Section::Skipped {
            reason: "simulation skipped".into(),
        },
    };

    let big_cities: Section<BigCitySplit> = big_city_split(
        table,
        &BigCityOptions {
            n: config.top_n,
            marker_label: config.marker_label.clone(),
            marker_digit: config.marker_digit,
            target_label: config.target_label.clone(),
        },
    )
    .into();

    let seventies: Section<SeventiesParity> =
        seventies_parity(table, &config.marker_label, Some((config.parity_trials, config.seed))).into();

    let counterfactual = match big_cities.value() {
        Some(split) if !split.group_marked.is_empty() => counterfactual_shift(
            table,
            &split.group_marked,
            &config.target_label,
            &config.rival_label,
            config.target_proportion,
        )
        .into(),
        Some(_) => Section::Skipped {
            reason: "no marked area among the largest".into(),
        },
        None => Section::Skipped {
            reason: "big-city split skipped".into(),
        },
    };

    let combined = (|| {
        let excess = simulated_excess
            .value()
            .ok_or_else(|| Error::undefined("no simulated excess"))?;
        let split = big_cities
            .value()
            .ok_or_else(|| Error::undefined("no big-city split"))?;
        let ks = split.ks.as_ref().ok_or_else(|| Error::undefined("no KS test"))?;
        let second = split
            .identical_second_digit_p
            .ok_or_else(|| Error::undefined("no second-digit coincidence"))?;
        let parity = seventies
            .value()
            .and_then(|s| s.oracle)
            .ok_or_else(|| Error::undefined("no parity oracle"))?;
        if parity.hits == 0 {
            return Err(Error::undefined("the parity oracle recorded no hits"));
        }
        combined_probability(
            &[
                ("excess_digit_corrected".to_string(), excess.corrected),
                ("big_city_ks".to_string(), ks.p_value),
                ("identical_second_digits".to_string(), second),
                ("seventies_parity".to_string(), parity.p_hat),
            ],
            config.combination_c,
        )
    })()
    .into();

    Ok(Report {
        provenance: Provenance {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            dataset_sha256: hex::encode(Sha256::digest(table.canonical_bytes())),
            config_sha256: config.sha256(),
            seed: config.seed,
        },
        config: config.clone(),
        validation,
        global_fractions,
        totals_log_histogram: log_histogram(&totals, config.bin_width_dex).into(),
        totals_folded_histogram: folded_histogram(&totals, config.bin_width_dex).into(),
        candidate_log_histograms,
        first_digits,
        concatenated_first_digits,
        decade_markers,
        poisson_scan: poisson_scan(table, &standard),
        headline: headline(table, config, &standard).into(),
        candidate_statistics,
        spearman: spearman_ablation(table, &config.marker_label, config.marker_digit).into(),
        scatter,
        simulation,
        simulated_excess,
        big_cities,
        seventies,
        counterfactual,
        combined,
    })
}

fn skipped_line(out: &mut String, what: &str, reason: &str) {
    let _ = writeln!(out, "_{what} skipped: {reason}_\n");
}

/// Human-readable rendering of a report.
pub fn render_markdown(report: &Report) -> String {
    let mut out = String::new();
    let p = &report.provenance;
    let _ = writeln!(out, "# Digit forensics report\n");
    let _ = writeln!(out, "- dataset sha256: `{}`", p.dataset_sha256);
    let _ = writeln!(out, "- config sha256: `{}`", p.config_sha256);
    let _ = writeln!(out, "- seed: {}\n", p.seed);

    let v = &report.validation;
    let _ = writeln!(
        out,
        "## National sums\n\n{} areas, {} total votes.\n",
        v.n_areas, v.total_votes
    );
    let _ = writeln!(out, "| label | votes | fraction |\n|---|---:|---:|");
    for s in &v.national_sums {
        let frac = report
            .global_fractions
            .iter()
            .find(|(l, _)| *l == s.label)
            .map_or(String::new(), |f| fmt_sig(f.1));
        let _ = writeln!(out, "| {} | {} | {} |", s.label, s.votes, frac);
    }
    let _ = writeln!(out);
    if !v.mismatched_areas.is_empty() {
        let _ = writeln!(
            out,
            "Warning: {} areas have totals different from their candidate sums.\n",
            v.mismatched_areas.len()
        );
    }

    let _ = writeln!(out, "## First digits\n");
    for section in &report.first_digits {
        match section {
            Section::Computed { value: c } => {
                let _ = writeln!(out, "### {} (n = {}, α = {})\n", c.label, c.n, fmt_sig(c.alpha));
                let _ = writeln!(
                    out,
                    "| digit | observed | standard | ± | empirical | ± |\n|---:|---:|---:|---:|---:|---:|"
                );
                for r in &c.rows {
                    let opt = |x: Option<f64>| x.map(fmt_sig).unwrap_or_default();
                    let _ = writeln!(
                        out,
                        "| {} | {} | {} | {} | {} | {} |",
                        r.digit,
                        r.observed,
                        fmt_sig(r.expected_standard),
                        fmt_sig(r.stderr_standard),
                        opt(r.expected_empirical),
                        opt(r.stderr_empirical)
                    );
                }
                if let Some(t) = c.chi_square_empirical.value() {
                    let _ = writeln!(
                        out,
                        "\nχ² vs empirical model: {} (dof {}), p = {}",
                        fmt_sig(t.statistic),
                        t.dof.unwrap_or(0),
                        fmt_p(t.p_value)
                    );
                }
                if let Some(t) = c.chi_square_standard.value() {
                    let _ = writeln!(
                        out,
                        "χ² vs standard model: {} (dof {}), p = {}",
                        fmt_sig(t.statistic),
                        t.dof.unwrap_or(0),
                        fmt_p(t.p_value)
                    );
                }
                let _ = writeln!(out);
            }
            Section::Skipped { reason } => skipped_line(&mut out, "candidate digits", reason),
        }
    }

    let _ = writeln!(out, "## Headline excess\n");
    match &report.headline {
        Section::Computed { value: h } => {
            let _ = writeln!(
                out,
                "{} first digit {}: observed {}, expected {} (standard) / {} (empirical).\n",
                h.label,
                h.digit,
                h.observed,
                fmt_sig(h.expected_standard),
                fmt_sig(h.expected_empirical)
            );
            let _ = writeln!(out, "- Poisson tail, standard model: p = {}", fmt_p(h.standard.p_value));
            let _ = writeln!(
                out,
                "- Poisson tail, empirical model: p = {}",
                fmt_p(h.empirical.p_value)
            );
            let _ = writeln!(out, "- two-sided: p = {}", fmt_p(h.empirical_two_sided.p_value));
            if let Some(c) = h.empirical_two_sided.correction {
                let _ = writeln!(out, "- corrected for {} tests: p = {}\n", c.m, fmt_p(c.corrected_p));
            }
        }
        Section::Skipped { reason } => skipped_line(&mut out, "headline", reason),
    }

    let _ = writeln!(out, "## Candidate statistics\n");
    let _ = writeln!(out, "| label | γ₁(log v) | norm. | γ₁(log v/v_tot) | norm. | σ(log v) | ρ all / se | ρ ablated / se |\n|---|---:|---:|---:|---:|---:|---:|---:|");
    for s in &report.candidate_statistics {
        let sk = |x: &Section<SkewnessResult>| {
            x.value().map_or(("–".into(), "–".into()), |v| {
                (fmt_sig(v.gamma1), fmt_sig(v.normalized))
            })
        };
        let (a, an) = sk(&s.skew_log_counts);
        let (b, bn) = sk(&s.skew_log_proportions);
        let w = s.width_log_counts.value().map_or("–".into(), |w| fmt_sig(*w));
        let (ra, rb) = report
            .spearman
            .value()
            .and_then(|rows| rows.iter().find(|r| r.label == s.label))
            .map_or(("–".into(), "–".into()), |r| {
                (fmt_sig(r.full.normalized), fmt_sig(r.ablated.normalized))
            });
        let _ = writeln!(out, "| {} | {a} | {an} | {b} | {bn} | {w} | {ra} | {rb} |", s.label);
    }
    let _ = writeln!(out);
    for s in &report.scatter {
        match &s.sigma_dex {
            Section::Computed { value } => {
                let _ = writeln!(
                    out,
                    "- scatter of log proportions, totals > {}: {} dex",
                    s.min_total,
                    fmt_sig(*value)
                );
            }
            Section::Skipped { reason } => {
                let _ = writeln!(out, "- scatter, totals > {}: skipped ({reason})", s.min_total);
            }
        }
    }
    let _ = writeln!(out);

    let _ = writeln!(out, "## Simulation\n");
    match &report.simulation {
        Section::Computed { value: sim } => {
            let _ = writeln!(
                out,
                "{} realizations, mean fraction {}.\n",
                sim.realizations,
                fmt_sig(sim.mean_fraction)
            );
            if let Some(first) = sim.rows.first() {
                let names: Vec<&str> = first.tallies.iter().map(|t| t.condition.as_str()).collect();
                let _ = writeln!(
                    out,
                    "| σ | {} |\n|---:|{}",
                    names.join(" | "),
                    "---:|".repeat(names.len())
                );
            }
            for row in &sim.rows {
                let cells: Vec<String> = row
                    .tallies
                    .iter()
                    .map(|t| {
                        format!(
                            "{} [{}, {}]",
                            fmt_p(t.p_hat),
                            fmt_p(t.wilson_95.lo),
                            fmt_p(t.wilson_95.hi)
                        )
                    })
                    .collect();
                let _ = writeln!(out, "| {} | {} |", fmt_sig(row.sigma), cells.join(" | "));
            }
            let _ = writeln!(out);
        }
        Section::Skipped { reason } => skipped_line(&mut out, "simulation", reason),
    }
    if let Some(e) = report.simulated_excess.value() {
        let bound = if e.upper_bound { " (upper bound)" } else { "" };
        let _ = writeln!(
            out,
            "At σ = {}: p = {}{bound}; × {} = {}\n",
            fmt_sig(e.sigma),
            fmt_p(e.p),
            e.m,
            fmt_p(e.corrected)
        );
    }

    let _ = writeln!(out, "## Largest areas\n");
    match &report.big_cities {
        Section::Computed { value: b } => {
            let _ = writeln!(
                out,
                "| area | total | marker | target share | marked |\n|---|---:|---:|---:|:---:|"
            );
            for a in &b.top_areas {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {:.3} | {} |",
                    a.name,
                    a.total,
                    a.marker_count,
                    a.target_proportion,
                    if a.marked { "yes" } else { "" }
                );
            }
            let _ = writeln!(out);
            match (&b.ks, &b.ks_skipped) {
                (Some(ks), _) => {
                    let _ = writeln!(
                        out,
                        "Exact KS: D = {}, p = {}",
                        fmt_sig(ks.statistic),
                        fmt_p(ks.p_value)
                    );
                }
                (None, Some(r)) => {
                    let _ = writeln!(out, "Exact KS skipped: {r}");
                }
                _ => {}
            }
            if let Some(p) = b.identical_second_digit_p {
                let _ = writeln!(
                    out,
                    "Marked second digits {:?} identical: {}; chance of identical second digits p = {}\n",
                    b.marked_second_digits,
                    b.marked_second_digits_identical,
                    fmt_p(p)
                );
            }
        }
        Section::Skipped { reason } => skipped_line(&mut out, "big-city split", reason),
    }

    let _ = writeln!(out, "## Counts 70–79\n");
    match &report.seventies {
        Section::Computed { value: s } => {
            let _ = writeln!(
                out,
                "| value | {} |\n|---|{}",
                (70..80).map(|v| v.to_string()).collect::<Vec<_>>().join(" | "),
                "---:|".repeat(10)
            );
            let _ = writeln!(
                out,
                "| N | {} |\n",
                s.frequencies.iter().map(u64::to_string).collect::<Vec<_>>().join(" | ")
            );
            let _ = writeln!(
                out,
                "{} of {} odd; each even value exactly once: {}",
                s.odd_count, s.n, s.each_even_exactly_once
            );
            if let Some(o) = s.oracle {
                let _ = writeln!(
                    out,
                    "Parity oracle: p = {} [{}, {}] over {} trials\n",
                    fmt_p(o.p_hat),
                    fmt_p(o.wilson_95.lo),
                    fmt_p(o.wilson_95.hi),
                    o.trials
                );
            }
        }
        Section::Skipped { reason } => skipped_line(&mut out, "seventies parity", reason),
    }

    let _ = writeln!(out, "## Counterfactual\n");
    match &report.counterfactual {
        Section::Computed { value: c } => {
            let _ = writeln!(
                out,
                "Target share {} for {} in {}.\n",
                fmt_sig(c.target_proportion),
                c.reduce_label,
                c.affected_areas.join(", ")
            );
            for (label, d) in &c.delta_per_candidate {
                let _ = writeln!(out, "- Δ{label} = {d}");
            }
            let _ = writeln!(
                out,
                "- {}−{} gap reduced by {}\n",
                c.reduce_label, c.rival_label, c.gap_reduction
            );
        }
        Section::Skipped { reason } => skipped_line(&mut out, "counterfactual", reason),
    }

    let _ = writeln!(out, "## Combined probability\n");
    match &report.combined {
        Section::Computed { value: c } => {
            for (name, p) in &c.components {
                let _ = writeln!(out, "- {name}: {}", fmt_p(*p));
            }
            let _ = writeln!(out, "- C = {}: p_all = {}", c.correction_c, fmt_p(c.p_all));
        }
        Section::Skipped { reason } => skipped_line(&mut out, "combined probability", reason),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vote_data::{parse_vote_table, select_areas, AreaPredicate, DEFAULT_LABELS};

    fn table(rows: &[(&str, u64, [u64; 4])]) -> VoteTable {
        let areas = rows
            .iter()
            .map(|(n, t, c)| VoteArea {
                name: n.to_string(),
                total: *t,
                per_candidate: c.to_vec(),
            })
            .collect();
        VoteTable::new(areas, DEFAULT_LABELS.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    fn cities() -> VoteTable {
        table(&[
            ("Small1", 1000, [500, 10, 7, 483]),
            ("Small2", 2000, [1000, 20, 15, 965]),
            ("C1", 100_000, [49_700, 1000, 3513, 45_787]),
            ("C2", 110_000, [66_000, 1000, 7078, 35_922]),
            ("C3", 120_000, [64_440, 1000, 8057, 46_503]),
            ("C4", 130_000, [79_170, 1000, 7002, 42_828]),
            ("C5", 140_000, [93_660, 1000, 7098, 38_242]),
            ("C6", 150_000, [64_950, 1000, 43_073, 40_977]),
        ])
    }

    #[test]
    fn big_city_split_groups_and_ks() {
        let t = cities();
        let s = big_city_split(&t, &BigCityOptions::default()).unwrap();
        let names: Vec<&str> = s.top_areas.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, ["C1", "C2", "C3", "C4", "C5", "C6"]);
        assert_eq!(s.group_marked, ["C2", "C4", "C5"]);
        assert_eq!(s.group_other, ["C1", "C3", "C6"]);
        let ks = s.ks.unwrap();
        assert_eq!(ks.statistic, 1.0);
        assert!((ks.p_value - 0.1).abs() < 1e-12);
        assert_eq!(s.marked_second_digits, vec![Some(0), Some(0), Some(0)]);
        assert!(s.marked_second_digits_identical);
        assert!((s.identical_second_digit_p.unwrap() - 0.01037).abs() < 2e-5);
    }

    #[test]
    fn big_city_marked_group_is_selection_intersection() {
        let t = cities();
        let s = big_city_split(&t, &BigCityOptions::default()).unwrap();
        let top = select_areas(&t, "K", AreaPredicate::TopNByTotal(6)).unwrap();
        let sevens = select_areas(&top, "K", AreaPredicate::FirstDigitEquals(7)).unwrap();
        let names: Vec<String> = sevens.areas().iter().map(|a| a.name.clone()).collect();
        assert_eq!(s.group_marked, names);
    }

    #[test]
    fn big_city_without_marker() {
        let t = table(&[
            ("a", 100, [50, 1, 1, 48]),
            ("b", 200, [100, 2, 2, 96]),
            ("c", 300, [150, 3, 3, 144]),
        ]);
        let opts = BigCityOptions {
            n: 3,
            ..Default::default()
        };
        let s = big_city_split(&t, &opts).unwrap();
        assert!(s.group_marked.is_empty());
        assert!(s.ks.is_none());
        assert!(s.ks_skipped.is_some());
        assert!(s.identical_second_digit_p.is_none());
        assert!(big_city_split(&t, &BigCityOptions::default()).is_err());
    }

    #[test]
    fn seventies_tally() {
        let mut rows: Vec<(String, u64, [u64; 4])> = Vec::new();
        let freqs = [1u64, 2, 1, 4, 1, 4, 1, 2, 1, 3];
        for (i, &f) in freqs.iter().enumerate() {
            for k in 0..f {
                rows.push((format!("a{i}_{k}"), 10_000, [9_000, 100, 70 + i as u64, 830 - i as u64]));
            }
        }
        rows.push(("big".into(), 10_000, [9_000, 100, 700, 200]));
        let refs: Vec<(&str, u64, [u64; 4])> = rows.iter().map(|(n, t, c)| (n.as_str(), *t, *c)).collect();
        let t = table(&refs);
        let s = seventies_parity(&t, "K", None).unwrap();
        assert_eq!(s.frequencies, freqs);
        assert_eq!(s.n, 20);
        assert_eq!(s.odd_count, 15);
        assert!(s.each_even_exactly_once);

        let t = table(&[("a", 100, [10, 10, 70, 10]), ("b", 100, [10, 10, 70, 10])]);
        let s = seventies_parity(&t, "K", None).unwrap();
        assert_eq!(s.frequencies, [2, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
        assert!(!s.each_even_exactly_once);

        let rows: Vec<(String, u64, [u64; 4])> = [70u64, 72, 74, 76, 78]
            .iter()
            .map(|&k| (format!("e{k}"), 1000, [500, 10, k, 490 - k]))
            .collect();
        let refs: Vec<(&str, u64, [u64; 4])> = rows.iter().map(|(n, t, c)| (n.as_str(), *t, *c)).collect();
        let s = seventies_parity(&table(&refs), "K", None).unwrap();
        assert!(s.each_even_exactly_once);
        assert_eq!(s.odd_count, 0);

        let t = table(&[("a", 100, [10, 10, 5, 10])]);
        let s = seventies_parity(&t, "K", None).unwrap();
        assert_eq!(s.n, 0);
        assert!(s.even_values.is_empty());
    }

    #[test]
    fn ablation_with_never_marker_equals_full() {
        let t = cities();
        let rows = spearman_ablation(&t, "K", 7).unwrap();
        let direct = proportion_correlation(&t, "A", |_| false).unwrap();
        assert_eq!(rows[0].full, direct);
        // digit 0 never leads a count
        let never = proportion_correlation(&t, "A", |a| marked(a.per_candidate[2], 0)).unwrap();
        assert_eq!(never, direct);
        assert_eq!(rows[0].ablated.n, 4);
    }

    #[test]
    fn independent_proportions_give_small_rhos() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let mut rows = Vec::new();
        for i in 0..366 {
            let total = 10f64.powf(4.0 + 2.0 * rng.random::<f64>()) as u64;
            let a = (total as f64 * rng.random_range(0.4..0.8)) as u64;
            let r = (total as f64 * rng.random_range(0.005..0.02)) as u64;
            let k = (total as f64 * rng.random_range(0.004..0.015)).max(1.0) as u64;
            rows.push((format!("x{i}"), total, [a, r, k, total - a - r - k]));
        }
        let refs: Vec<(&str, u64, [u64; 4])> = rows.iter().map(|(n, t, c)| (n.as_str(), *t, *c)).collect();
        let t = table(&refs);
        // A, R and K are drawn independently of the total
        for r in spearman_ablation(&t, "K", 7).unwrap().into_iter().take(3) {
            assert!(r.full.normalized.abs() < 3.0, "{}: {}", r.label, r.full.normalized);
            assert!(
                r.ablated.normalized.abs() < 3.0,
                "{}: {}",
                r.label,
                r.ablated.normalized
            );
        }
    }

    #[test]
    fn counterfactual_conserves_totals() {
        let t = cities();
        let names = vec!["C2".to_string(), "C4".to_string(), "C5".to_string()];
        let c = counterfactual_shift(&t, &names, "A", "M", 0.5).unwrap();
        assert_eq!(c.delta_per_candidate.values().sum::<i64>(), 0);
        for (before, after) in t.areas().iter().zip(c.adjusted.areas()) {
            assert_eq!(before.total, after.total);
            assert_eq!(before.candidate_sum(), after.candidate_sum());
            if !names.contains(&before.name) {
                assert_eq!(before, after);
            }
        }
        let expected_a = -(66_000 - 55_000) - (79_170 - 65_000) - (93_660 - 70_000);
        assert_eq!(c.delta_per_candidate["A"], expected_a);
        assert_eq!(c.gap_change, c.delta_per_candidate["A"] - c.delta_per_candidate["M"]);
        assert!(c.gap_reduction > -expected_a);
        for shift in &c.per_area {
            assert_eq!(shift.deltas.iter().sum::<i64>(), 0);
        }
    }

    #[test]
    fn counterfactual_edge_cases() {
        let t = table(&[("a", 100, [60, 10, 5, 25])]);
        let c = counterfactual_shift(&t, &["a".into()], "A", "M", 0.6).unwrap();
        assert!(c.delta_per_candidate.values().all(|&d| d == 0));
        assert!(counterfactual_shift(&t, &["a".into()], "A", "M", 0.7).is_err());
        assert!(counterfactual_shift(&t, &["zz".into()], "A", "M", 0.5).is_err());
        assert!(counterfactual_shift(&t, &["a".into()], "Q", "M", 0.5).is_err());
    }

    #[test]
    fn combination() {
        let parts = vec![
            ("sevens".to_string(), 0.00072),
            ("ks".to_string(), 0.100),
            ("second".to_string(), 0.01037),
            ("parity".to_string(), 5e-4),
        ];
        let c = combined_probability(&parts, 3).unwrap();
        assert!((c.p_all - 1.12e-9).abs() < 1e-11);
        let mut rev = parts.clone();
        rev.reverse();
        assert!((combined_probability(&rev, 3).unwrap().p_all / c.p_all - 1.0).abs() < 1e-12);
        assert_eq!(combined_probability(&[("p".into(), 0.3)], 1).unwrap().p_all, 0.3);
        assert_eq!(
            combined_probability(&[("a".into(), 0.9), ("b".into(), 0.9)], 3)
                .unwrap()
                .p_all,
            1.0
        );
        assert!(combined_probability(&[("a".into(), 0.0)], 3).is_err());
        assert!(combined_probability(&parts, 0).is_err());
    }

    fn quick_config() -> ReportConfig {
        ReportConfig {
            sigmas: vec![0.0, 0.4],
            realizations: 300,
            parity_trials: 20_000,
            ..ReportConfig::default()
        }
    }

    #[test]
    fn degenerate_one_area_report() {
        let t = parse_vote_table("100\n".as_bytes(), "60 10 5 25\n".as_bytes(), &DEFAULT_LABELS).unwrap();
        let r = full_report(&t, &quick_config()).unwrap();
        assert!(r.big_cities.value().is_none());
        assert!(r.spearman.value().is_none());
        assert!(r.combined.value().is_none());
        assert!(matches!(r.counterfactual, Section::Skipped { .. }));
        let md = render_markdown(&r);
        assert!(md.contains("skipped"));
        r.to_json().unwrap();
    }

    #[test]
    fn report_is_deterministic() {
        let t = cities();
        let a = full_report(&t, &quick_config()).unwrap();
        let b = full_report(&t, &quick_config()).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(render_markdown(&a), render_markdown(&b));
        assert!(a.big_cities.value().is_some());
        assert!(a.counterfactual.value().is_some());
    }
}
