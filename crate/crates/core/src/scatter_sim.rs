//! Seeded Monte Carlo null models.
//!
//! Each simulated area count is `w_j = 10^(log₁₀(f · v_j) + g)` with `g`
//! normal of width σ dex (no scatter at σ = 0), followed by Poisson noise in
//! its Gaussian approximation, clamped at zero. Counts below one are dropped
//! from digit tallies.
//!
//! Every realization draws from its own ChaCha8 stream, keyed by the σ index
//! and the realization index, so results are bit-identical for any number
//! of worker threads.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::benford::first_digit_of_real;
use crate::stat_tests::log_width;
use crate::vote_data::VoteTable;
use crate::{Error, Result};

/// z for a two-sided 95% interval.
const Z95: f64 = 1.959_963_984_540_054;

const PARITY_CHUNK: u64 = 10_000;
const PARITY_STREAM_DOMAIN: u64 = 1 << 63;

/// All requirements must hold: `count(digit) ≥ threshold` for each pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DigitCondition {
    pub name: String,
    pub requirements: Vec<(u8, u32)>,
}

impl DigitCondition {
    pub fn at_least(name: impl Into<String>, digit: u8, threshold: u32) -> Self {
        Self {
            name: name.into(),
            requirements: vec![(digit, threshold)],
        }
    }

    pub fn all_of(name: impl Into<String>, requirements: Vec<(u8, u32)>) -> Self {
        Self {
            name: name.into(),
            requirements,
        }
    }

    pub fn holds(&self, counts: &[u32; 10]) -> bool {
        self.requirements.iter().all(|&(d, t)| counts[d as usize] >= t)
    }

    /// `name: 1>=60,7>=41`
    pub fn parse(text: &str) -> Result<Self> {
        let (name, reqs) = text
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("condition `{text}` needs `name: digit>=count,...`")))?;
        let requirements = reqs
            .split(',')
            .map(|r| {
                let (d, t) = r
                    .split_once(">=")
                    .ok_or_else(|| Error::invalid(format!("requirement `{r}` needs `digit>=count`")))?;
                let d: u8 = d
                    .trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad digit in `{r}`")))?;
                let t: u32 = t
                    .trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad count in `{r}`")))?;
                if !(1..=9).contains(&d) {
                    return Err(Error::invalid(format!("{d} is not a leading digit")));
                }
                Ok((d, t))
            })
            .collect::<Result<Vec<_>>>()?;
        let name = name.trim();
        if name.is_empty() || requirements.is_empty() {
            return Err(Error::invalid(format!("condition `{text}` is incomplete")));
        }
        Ok(Self {
            name: name.to_string(),
            requirements,
        })
    }

    pub fn render(&self) -> String {
        let reqs: Vec<String> = self.requirements.iter().map(|(d, t)| format!("{d}>={t}")).collect();
        format!("{}: {}", self.name, reqs.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub totals: Vec<u64>,
    /// Mean vote fraction the simulated counts scatter around.
    pub mean_fraction: f64,
    /// Log-normal widths in dex.
    pub sigmas: Vec<f64>,
    pub realizations: u64,
    pub seed: u64,
    pub conditions: Vec<DigitCondition>,
    /// Test hook: switches off the per-area Poisson noise.
    pub poisson_noise: bool,
}

impl SimulationConfig {
    pub fn new(totals: Vec<u64>, mean_fraction: f64) -> Self {
        Self {
            totals,
            mean_fraction,
            sigmas: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 1.0, 1.5],
            realizations: 1_000_000,
            seed: 20_090_612,
            conditions: Vec::new(),
            poisson_noise: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.totals.is_empty() {
            return Err(Error::invalid("simulation needs at least one total"));
        }
        if self.totals.contains(&0) {
            return Err(Error::invalid("simulation totals must be ≥ 1"));
        }
        if !(self.mean_fraction > 0.0 && self.mean_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "mean fraction {} is outside (0, 1)",
                self.mean_fraction
            )));
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
            return Err(Error::invalid(format!("scatter width {s} must be a finite value ≥ 0")));
        }
        if self.realizations == 0 {
            return Err(Error::invalid("realizations must be ≥ 1"));
        }
        if self.realizations >= 1 << 40 || self.sigmas.len() >= 1 << 20 {
            return Err(Error::invalid("too many realizations or widths for the stream layout"));
        }
        if self.conditions.len() > 64 {
            return Err(Error::invalid("at most 64 conditions per run"));
        }
        Ok(())
    }

    /// Plain `key = value` text; `condition` may repeat.
    pub fn to_kv_string(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut out = String::from("# digit-forensics simulation config\n");
        let _ = writeln!(out, "mean_fraction = {}", self.mean_fraction);
        let _ = writeln!(
            out,
            "sigmas = {}",
            join(self.sigmas.iter().map(f64::to_string).collect())
        );
        let _ = writeln!(out, "realizations = {}", self.realizations);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "poisson_noise = {}", self.poisson_noise);
        for c in &self.conditions {
            let _ = writeln!(out, "condition = {}", c.render());
        }
        if !self.totals.is_empty() {
            let _ = writeln!(
                out,
                "totals = {}",
                join(self.totals.iter().map(u64::to_string).collect())
            );
        }
        out
    }

    /// Parses [`to_kv_string`](Self::to_kv_string) output. Missing keys keep their defaults;
    /// a missing `totals` key leaves the totals empty for the caller to fill.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut config = Self::new(Vec::new(), 0.0);
        let mut seen_mean = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| Error::Parse {
                source_name: "simulation config".into(),
                line: i + 1,
                message: msg.to_string(),
            };
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected `key = value`"))?;
            let value = value.trim();
            match key.trim() {
                "mean_fraction" => {
                    config.mean_fraction = value.parse().map_err(|_| err("bad mean_fraction"))?;
                    seen_mean = true;
                }
                "sigmas" => {
                    config.sigmas = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse::<f64>().map_err(|_| err("bad sigma")))
                        .collect::<Result<_>>()?;
                }
                "realizations" => config.realizations = value.parse().map_err(|_| err("bad realizations"))?,
                "seed" => config.seed = value.parse().map_err(|_| err("bad seed"))?,
                "poisson_noise" => config.poisson_noise = value.parse().map_err(|_| err("bad poisson_noise"))?,
                "condition" => config
                    .conditions
                    .push(DigitCondition::parse(value).map_err(|e| err(&e.to_string()))?),
                "totals" => {
                    config.totals = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse::<u64>().map_err(|_| err("bad total")))
                        .collect::<Result<_>>()?;
                }
                other => return Err(err(&format!("unknown key `{other}`"))),
            }
        }
        if !seen_mean {
            config.mean_fraction = f64::NAN;
        }
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WilsonInterval {
    pub lo: f64,
    pub hi: f64,
}

impl WilsonInterval {
    pub fn contains(&self, p: f64) -> bool {
        self.lo <= p && p <= self.hi
    }
}

/// 95% Wilson score interval for `hits` out of `trials`.
pub fn wilson_95(hits: u64, trials: u64) -> WilsonInterval {
    if trials == 0 {
        return WilsonInterval { lo: 0.0, hi: 1.0 };
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    WilsonInterval {
        lo: (center - half).max(0.0).min(p),
        hi: (center + half).min(1.0).max(p),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionTally {
    pub condition: String,
    pub hits: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub wilson_95: WilsonInterval,
}

impl ConditionTally {
    fn new(condition: &str, hits: u64, trials: u64) -> Self {
        Self {
            condition: condition.to_string(),
            hits,
            trials,
            p_hat: hits as f64 / trials as f64,
            wilson_95: wilson_95(hits, trials),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaRow {
    pub sigma: f64,
    pub tallies: Vec<ConditionTally>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub seed: u64,
    pub realizations: u64,
    pub mean_fraction: f64,
    pub rows: Vec<SigmaRow>,
}

impl SimulationResult {
    pub fn tally(&self, sigma_index: usize, condition: &str) -> Option<&ConditionTally> {
        self.rows
            .get(sigma_index)?
            .tallies
            .iter()
            .find(|t| t.condition == condition)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    /// One row per σ: `sigma`, then hits/trials/p/lo/hi per condition.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["sigma".to_string()];
        if let Some(row) = self.rows.first() {
            for t in &row.tallies {
                for col in ["hits", "trials", "p_hat", "wilson_lo", "wilson_hi"] {
                    header.push(format!("{}_{col}", t.condition));
                }
            }
        }
        let ser = |e: csv::Error| Error::Serialize(e.to_string());
        w.write_record(&header).map_err(ser)?;
        for row in &self.rows {
            let mut rec = vec![crate::report::fmt_sig(row.sigma)];
            for t in &row.tallies {
                rec.push(t.hits.to_string());
                rec.push(t.trials.to_string());
                rec.push(crate::report::fmt_p(t.p_hat));
                rec.push(crate::report::fmt_p(t.wilson_95.lo));
                rec.push(crate::report::fmt_p(t.wilson_95.hi));
            }
            w.write_record(&rec).map_err(ser)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Serialize(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serialize(e.to_string()))
    }
}

fn stream_rng(base: &ChaCha8Rng, stream: u64) -> ChaCha8Rng {
    let mut rng = base.clone();
    rng.set_stream(stream);
    rng
}

fn simulated_count<R: Rng>(log_base: f64, sigma: f64, poisson_noise: bool, rng: &mut R) -> f64 {
    let mut x = log_base;
    if sigma > 0.0 {
        let g: f64 = rng.sample(StandardNormal);
        x += sigma * g;
    }
    let mut w = 10f64.powf(x);
    if poisson_noise {
        let g: f64 = rng.sample(StandardNormal);
        w = (w + w.sqrt() * g).max(0.0);
    }
    w
}

/// One realization of simulated counts, in area order.
pub fn simulate_realization<R: Rng>(
    totals: &[u64],
    mean_fraction: f64,
    sigma: f64,
    poisson_noise: bool,
    rng: &mut R,
) -> Vec<f64> {
    totals
        .iter()
        .map(|&v| simulated_count((mean_fraction * v as f64).log10(), sigma, poisson_noise, rng))
        .collect()
}

fn realization_digits<R: Rng>(log_base: &[f64], sigma: f64, poisson_noise: bool, rng: &mut R) -> [u32; 10] {
    let mut counts = [0u32; 10];
    for &b in log_base {
        let w = simulated_count(b, sigma, poisson_noise, rng);
        if w >= 1.0 {
            if let Some(d) = first_digit_of_real(w) {
                counts[d as usize] += 1;
            }
        }
    }
    counts
}

/// Runs every σ of the config on the current rayon pool.
pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationResult> {
    config.validate()?;
    let log_base: Vec<f64> = config
        .totals
        .iter()
        .map(|&v| (config.mean_fraction * v as f64).log10())
        .collect();
    let base = ChaCha8Rng::seed_from_u64(config.seed);
    let nc = config.conditions.len();

    let rows = config
        .sigmas
        .iter()
        .enumerate()
        .map(|(si, &sigma)| {
            let hits = (0..config.realizations)
                .into_par_iter()
                .fold(
                    || vec![0u64; nc],
                    |mut acc, r| {
                        let mut rng = stream_rng(&base, ((si as u64) << 40) | r);
                        let counts = realization_digits(&log_base, sigma, config.poisson_noise, &mut rng);
                        for (a, c) in acc.iter_mut().zip(&config.conditions) {
                            *a += u64::from(c.holds(&counts));
                        }
                        acc
                    },
                )
                .reduce(
                    || vec![0u64; nc],
                    |mut a, b| {
                        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                        a
                    },
                );
            SigmaRow {
                sigma,
                tallies: config
                    .conditions
                    .iter()
                    .zip(hits)
                    .map(|(c, h)| ConditionTally::new(&c.name, h, config.realizations))
                    .collect(),
            }
        })
        .collect();

    Ok(SimulationResult {
        seed: config.seed,
        realizations: config.realizations,
        mean_fraction: config.mean_fraction,
        rows,
    })
}

/// Builds a rayon pool with `threads` workers (`None`: rayon's default).
pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    builder.build().map_err(|e| Error::invalid(format!("thread pool: {e}")))
}

/// [`run_simulation`] on a dedicated pool of `threads` workers.
pub fn run_simulation_with_threads(config: &SimulationConfig, threads: Option<usize>) -> Result<SimulationResult> {
    thread_pool(threads)?.install(|| run_simulation(config))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub hits: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub wilson_95: WilsonInterval,
}

/// Probability that a `tuple_len`-tuple of i.i.d. draws from `sample` satisfies `hit`.
///
/// Trials run in fixed chunks, one RNG stream per chunk.
pub fn tuple_probability<S, H>(trials: u64, seed: u64, tuple_len: usize, sample: S, hit: H) -> MonteCarloEstimate
where
    S: Fn(&mut ChaCha8Rng) -> u32 + Sync,
    H: Fn(&[u32]) -> bool + Sync,
{
    let base = ChaCha8Rng::seed_from_u64(seed);
    let chunks = trials.div_ceil(PARITY_CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream_rng(&base, PARITY_STREAM_DOMAIN | chunk);
            let mut tuple = vec![0u32; tuple_len];
            let n = PARITY_CHUNK.min(trials - chunk * PARITY_CHUNK);
            let mut hits = 0;
            for _ in 0..n {
                for v in tuple.iter_mut() {
                    *v = sample(&mut rng);
                }
                hits += u64::from(hit(&tuple));
            }
            hits
        })
        .sum();
    MonteCarloEstimate {
        hits,
        trials,
        p_hat: hits as f64 / trials as f64,
        wilson_95: wilson_95(hits, trials),
    }
}

/// An integer log-uniformly distributed on `[70, 80)`.
pub fn log_uniform_seventies<R: Rng>(rng: &mut R) -> u32 {
    let x: f64 = rng.random();
    let v = 10f64.powf(1.0 + 7f64.log10() + x * (8f64 / 7.0).log10()).floor() as u32;
    v.clamp(70, 79)
}

/// True when each of 70, 72, 74, 76 and 78 occurs exactly once.
pub fn each_even_once(values: &[u32]) -> bool {
    (70..80)
        .step_by(2)
        .all(|even| values.iter().filter(|&&v| v == even).count() == 1)
}

pub const SEVENTIES_SAMPLE: usize = 20;

/// Chance that 20 log-uniform draws on `[70, 80)` contain every even value exactly once.
pub fn parity_oracle_7a(trials: u64, seed: u64) -> Result<MonteCarloEstimate> {
    if trials < 10_000 {
        return Err(Error::invalid(format!(
            "parity oracle needs ≥ 10⁴ trials, got {trials}"
        )));
    }
    Ok(tuple_probability(
        trials,
        seed,
        SEVENTIES_SAMPLE,
        log_uniform_seventies,
        each_even_once,
    ))
}

/// Standard deviation in dex of `log₁₀(v_X / v)` over areas with `v > min_total` and `v_X ≥ 1`.
pub fn scatter_estimate(table: &VoteTable, label: &str, min_total: u64) -> Result<f64> {
    let idx = table.label_index(label)?;
    let ratios: Vec<f64> = table
        .areas()
        .iter()
        .filter(|a| a.total > min_total && a.per_candidate[idx] >= 1)
        .map(|a| a.per_candidate[idx] as f64 / a.total as f64)
        .collect();
    if ratios.len() < 3 {
        return Err(Error::invalid(format!(
            "scatter estimate needs ≥ 3 qualifying areas, found {}",
            ratios.len()
        )));
    }
    log_width(&ratios)
}
