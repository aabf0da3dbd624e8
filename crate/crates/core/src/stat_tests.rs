//! The hypothesis-testing battery.
//!
//! Poisson tails use the strictly-greater convention `P(X ≥ k + 1)`; at
//! `(41, 22.0)` that gives 9.6e-5, whereas the inclusive `P(X ≥ 41)` gives
//! about 1.9e-4.

use serde::Serialize;
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::benford::{second_digit_model, BenfordModel, DigitHistogram};
use crate::{Error, Result};

/// Largest pooled sample size accepted by [`ks_two_sample_exact`].
pub const EXACT_KS_MAX_COMBINED: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sidedness {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrectionMethod {
    /// Bonferroni: `min(m·p, 1)`.
    Multiply,
    /// Šidák: `1 − (1 − p)^m`.
    Sidak,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correction {
    pub method: CorrectionMethod,
    pub m: u32,
    pub corrected_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub sidedness: Sidedness,
    pub n: usize,
    pub dof: Option<u32>,
    pub correction: Option<Correction>,
}

impl TestResult {
    pub fn new(name: impl Into<String>, statistic: f64, p_value: f64, sidedness: Sidedness, n: usize) -> Self {
        Self {
            name: name.into(),
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            sidedness,
            n,
            dof: None,
            correction: None,
        }
    }

    /// Doubles a one-sided p-value (capped at 1).
    pub fn into_two_sided(mut self) -> Self {
        if self.sidedness == Sidedness::One {
            self.p_value = two_sided(self.p_value);
            self.sidedness = Sidedness::Two;
        }
        self
    }

    pub fn with_correction(mut self, method: CorrectionMethod, m: u32) -> Self {
        self.correction = Some(Correction {
            method,
            m,
            corrected_p: multi_test_correction(self.p_value, m, method),
        });
        self
    }

    /// The corrected p-value when a correction is attached, else the raw one.
    pub fn effective_p(&self) -> f64 {
        self.correction.map_or(self.p_value, |c| c.corrected_p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkewnessResult {
    pub gamma1: f64,
    /// `sqrt(6 / n)`.
    pub stderr: f64,
    pub normalized: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub rho: f64,
    /// `sqrt(1 / (n − 1))`.
    pub stderr: f64,
    pub normalized: f64,
    pub n: usize,
}

pub fn two_sided(p: f64) -> f64 {
    (2.0 * p).min(1.0)
}

/// Streaming log-sum-exp accumulator.
struct LogSum {
    max: f64,
    scaled: f64,
}

impl LogSum {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    fn add(&mut self, log_term: f64) {
        if log_term > self.max {
            self.scaled = self.scaled * (self.max - log_term).exp() + 1.0;
            self.max = log_term;
        } else {
            self.scaled += (log_term - self.max).exp();
        }
    }

    fn ln(&self) -> f64 {
        self.max + self.scaled.ln()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("Poisson mean must be positive, got {lambda}")));
    }
    Ok(())
}

/// `P(X ≥ k + 1)` for `X ~ Poisson(λ)`, i.e. `1 − CDF(k; λ)`.
///
/// Terms are summed in log space from `k + 1` upward. Once past the mode the
/// series is bounded by a geometric tail, and summation stops when that
/// bound drops below 1e-17 of the running sum.
pub fn poisson_tail(k: u64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let ln_lambda = lambda.ln();
    let mut i = k + 1;
    let mut log_term = -lambda + i as f64 * ln_lambda - ln_gamma(i as f64 + 1.0);
    let mut acc = LogSum::new();
    loop {
        acc.add(log_term);
        let next = i + 1;
        let ratio = lambda / next as f64;
        if ratio < 1.0 {
            let bound = log_term + ratio.ln() - (1.0 - ratio).ln();
            if bound - acc.ln() < -39.0 {
                break;
            }
        }
        log_term += ln_lambda - (next as f64).ln();
        i = next;
    }
    Ok(acc.ln().exp().clamp(0.0, 1.0))
}

/// `P(X ≤ k)` for `X ~ Poisson(λ)`, summed in log space.
pub fn poisson_cdf(k: u64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let ln_lambda = lambda.ln();
    let mut acc = LogSum::new();
    let mut log_term = -lambda;
    for i in 0..=k {
        if i > 0 {
            log_term += ln_lambda - (i as f64).ln();
        }
        acc.add(log_term);
    }
    Ok(acc.ln().exp().clamp(0.0, 1.0))
}

/// Upper tail of the chi-square distribution with `dof` degrees of freedom.
pub fn chi_square_upper_tail(statistic: f64, dof: u32) -> Result<f64> {
    if dof == 0 {
        return Err(Error::invalid("chi-square needs at least one degree of freedom"));
    }
    if statistic.is_nan() || statistic < 0.0 {
        return Err(Error::invalid(format!("chi-square statistic {statistic} is negative")));
    }
    if statistic == 0.0 {
        return Ok(1.0);
    }
    if statistic.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma_ur(dof as f64 / 2.0, statistic / 2.0).clamp(0.0, 1.0))
}

/// Pearson chi-square of an observed digit histogram against a model.
pub fn chi_square_gof(observed: &DigitHistogram, model: &BenfordModel) -> Result<TestResult> {
    if observed.position != model.position {
        return Err(Error::invalid("histogram and model describe different digit positions"));
    }
    if observed.n == 0 {
        return Err(Error::invalid("chi-square needs a nonempty histogram"));
    }
    let n = observed.n as f64;
    let mut statistic = 0.0;
    for d in model.position.digits() {
        let expected = n * model.probability(d);
        let o = observed.count(d) as f64;
        if expected == 0.0 {
            if o > 0.0 {
                statistic = f64::INFINITY;
            }
            continue;
        }
        statistic += (o - expected).powi(2) / expected;
    }
    let dof = (model.position.bins() - 1) as u32;
    let p = chi_square_upper_tail(statistic, dof)?;
    let mut result = TestResult::new(
        "chi-square goodness of fit",
        statistic,
        p,
        Sidedness::One,
        observed.n as usize,
    );
    result.dof = Some(dof);
    Ok(result)
}

/// Two-sample Kolmogorov–Smirnov test with an exact permutation p-value.
///
/// `D` is measured only at the ends of tie blocks in the pooled sample, so
/// tied values never inflate it. The p-value is the fraction of all
/// `C(n + m, n)` label assignments whose `D` is at least the observed one,
/// counted by a lattice-path recursion.
pub fn ks_two_sample_exact(a: &[f64], b: &[f64]) -> Result<TestResult> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(Error::invalid("both KS samples must be nonempty"));
    }
    if n + m > EXACT_KS_MAX_COMBINED {
        return Err(Error::invalid(format!(
            "exact KS enumeration is capped at {EXACT_KS_MAX_COMBINED} pooled values, got {}",
            n + m
        )));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::invalid("KS samples contain NaN"));
    }

    let mut pooled: Vec<(f64, bool)> = a
        .iter()
        .map(|&x| (x, true))
        .chain(b.iter().map(|&x| (x, false)))
        .collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let total = n + m;
    // block_end[t]: a tie block ends after t pooled values
    let block_end: Vec<bool> = (0..=total)
        .map(|t| t > 0 && (t == total || pooled[t - 1].0 != pooled[t].0))
        .collect();

    let gap = |i: usize, j: usize| ((i * m) as i64 - (j * n) as i64).unsigned_abs();
    let (mut i, mut j, mut d_obs) = (0usize, 0usize, 0u64);
    for (t, &(_, from_a)) in pooled.iter().enumerate() {
        if from_a {
            i += 1;
        } else {
            j += 1;
        }
        if block_end[t + 1] {
            d_obs = d_obs.max(gap(i, j));
        }
    }

    // paths[j] holds the number of non-extreme paths reaching (i, j)
    let mut paths = vec![0u64; m + 1];
    for i in 0..=n {
        for j in 0..=m {
            let t = i + j;
            let mut count = if t == 0 {
                1
            } else {
                let from_left = if i > 0 { paths[j] } else { 0 };
                let from_below = if j > 0 { paths[j - 1] } else { 0 };
                from_left + from_below
            };
            if block_end[t] && gap(i, j) >= d_obs {
                count = 0;
            }
            paths[j] = count;
        }
    }
    let all = binomial(total as u64, n as u64);
    let p = 1.0 - paths[m] as f64 / all as f64;
    let statistic = d_obs as f64 / (n * m) as f64;
    Ok(TestResult::new(
        "two-sample Kolmogorov-Smirnov (exact)",
        statistic,
        p,
        Sidedness::Two,
        total,
    ))
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Ranks starting at 1, ties receiving the average of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation, average ranks for ties.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "sample lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::invalid("Spearman correlation needs at least 3 pairs"));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::invalid("Spearman samples contain NaN"));
    }
    let rho = pearson(&average_ranks(x), &average_ranks(y))
        .ok_or_else(|| Error::undefined("rank correlation of a constant sample"))?;
    let stderr = (1.0 / (n - 1) as f64).sqrt();
    Ok(CorrelationResult {
        rho,
        stderr,
        normalized: rho / stderr,
        n,
    })
}

fn log10_all(values: &[f64]) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|&v| {
            if v > 0.0 && v.is_finite() {
                Ok(v.log10())
            } else {
                Err(Error::invalid(format!("log statistics need positive values, got {v}")))
            }
        })
        .collect()
}

/// Skewness `g₁ = m₃ / m₂^{3/2}` of `log₁₀ values` (uncorrected moments).
pub fn log_skewness(values: &[f64]) -> Result<SkewnessResult> {
    let n = values.len();
    if n < 3 {
        return Err(Error::invalid("skewness needs at least 3 values"));
    }
    let u = log10_all(values)?;
    let mean = u.iter().sum::<f64>() / n as f64;
    let m2 = u.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let m3 = u.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n as f64;
    if m2 <= (1e-12 * mean.abs().max(1.0)).powi(2) {
        return Err(Error::undefined("skewness of a zero-variance sample"));
    }
    let gamma1 = m3 / m2.powf(1.5);
    let stderr = (6.0 / n as f64).sqrt();
    Ok(SkewnessResult {
        gamma1,
        stderr,
        normalized: gamma1 / stderr,
        n,
    })
}

/// Sample standard deviation (n − 1 denominator) of `log₁₀ values`, in dex.
pub fn log_width(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::invalid("a width needs at least 2 values"));
    }
    let u = log10_all(values)?;
    let mean = u.iter().sum::<f64>() / n as f64;
    let var = u.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(var.sqrt())
}

pub fn multi_test_correction(p: f64, m: u32, method: CorrectionMethod) -> f64 {
    let p = p.clamp(0.0, 1.0);
    let m = m.max(1);
    match method {
        CorrectionMethod::Multiply => (m as f64 * p).min(1.0),
        // ln_1p keeps precision for tiny p
        CorrectionMethod::Sidak => (-(m as f64 * (-p).ln_1p()).exp_m1()).clamp(p, 1.0),
    }
}

/// Probability that `k` independent draws from `pmf` all coincide.
pub fn identical_digit_prob(pmf: &[f64], k: u32) -> f64 {
    pmf.iter().map(|p| p.powi(k as i32)).sum()
}

/// Probability that `k` numbers share the same second digit under the second-digit law.
pub fn identical_second_digit_prob(k: u32) -> f64 {
    identical_digit_prob(&second_digit_model().pmf, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benford::{digit_histogram, standard_first_digit_model, DigitPosition};
    use proptest::prelude::*;

    /// Direct recursive sum of the Poisson pmf without factorials.
    fn recursive_cdf(k: u64, lambda: f64) -> f64 {
        let mut term = (-lambda).exp();
        let mut sum = term;
        for i in 1..=k {
            term *= lambda / i as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn poisson_reference_values() {
        let p = poisson_tail(41, 22.0).unwrap();
        assert!((p / 9.6e-5 - 1.0).abs() < 0.02, "{p}");
        let p = poisson_tail(41, 21.2).unwrap();
        assert!((3.5e-5..=4.8e-5).contains(&p), "{p}");
        for lambda in [0.1, 1.0, 7.5, 40.0] {
            let p = poisson_tail(0, lambda).unwrap();
            assert!((p - (1.0 - (-lambda).exp())).abs() < 1e-14);
        }
        assert!(poisson_tail(3, 0.0).is_err());
        assert!(poisson_tail(3, -1.0).is_err());
    }

    #[test]
    fn poisson_large_mean_is_stable() {
        let p = poisson_tail(0, 5000.0).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        let p = poisson_tail(4000, 5000.0).unwrap();
        assert!(p > 1.0 - 1e-12);
        let p = poisson_tail(6000, 5000.0).unwrap();
        assert!(p > 0.0 && p < 1e-40);
    }

    #[test]
    fn poisson_tail_complements_recursive_cdf() {
        for lambda in [0.3, 1.0, 4.5, 12.0, 22.0, 37.3, 50.0] {
            for k in 0..=100 {
                let tail = poisson_tail(k, lambda).unwrap();
                let cdf = recursive_cdf(k, lambda);
                assert!((tail + cdf - 1.0).abs() < 1e-10, "k={k} λ={lambda}");
                assert!((poisson_cdf(k, lambda).unwrap() - cdf).abs() < 1e-12);
            }
        }
    }

    /// Simpson integration of the chi-square density, oracle for the tail.
    fn chi_square_tail_by_quadrature(x: f64, dof: u32) -> f64 {
        let k = dof as f64 / 2.0;
        let ln_norm = -(k * 2f64.ln() + ln_gamma(k));
        let density = |t: f64| (ln_norm + (k - 1.0) * t.ln() - t / 2.0).exp();
        let upper = x + 400.0;
        let steps = 400_000;
        let h = (upper - x) / steps as f64;
        let mut s = density(x) + density(upper);
        for i in 1..steps {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * density(x + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn chi_square_tail_matches_quadrature() {
        let p = chi_square_upper_tail(56.6, 8).unwrap();
        let oracle = chi_square_tail_by_quadrature(56.6, 8);
        assert!((p / oracle - 1.0).abs() < 1e-6, "{p} vs {oracle}");
        assert!((p - 2.1e-9).abs() < 0.1e-9);
        for (x, dof) in [(3.0, 8), (15.5, 9), (1.0, 3)] {
            let p = chi_square_upper_tail(x, dof).unwrap();
            assert!((p / chi_square_tail_by_quadrature(x, dof) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn chi_square_perfect_fit() {
        let model = crate::benford::empirical_first_digit_model(&[100, 100, 200, 300, 300, 300], 1.0).unwrap();
        let hist = digit_histogram(&[1, 1, 2, 3, 3, 3], DigitPosition::First).unwrap();
        let r = chi_square_gof(&hist, &model).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.dof, Some(8));
    }

    #[test]
    fn chi_square_zero_bins() {
        let model = crate::benford::empirical_first_digit_model(&[100, 200], 1.0).unwrap();
        let hist = digit_histogram(&[1, 9], DigitPosition::First).unwrap();
        let r = chi_square_gof(&hist, &model).unwrap();
        assert!(r.statistic.is_infinite());
        assert_eq!(r.p_value, 0.0);

        let second = digit_histogram(&[10, 11], DigitPosition::Second).unwrap();
        assert!(chi_square_gof(&second, &model).is_err());
        let second = chi_square_gof(&second, &crate::benford::second_digit_model()).unwrap();
        assert_eq!(second.dof, Some(9));
    }

    #[test]
    fn chi_square_zero_iff_exact() {
        let model = standard_first_digit_model();
        let hist = digit_histogram(&[1, 2, 3, 4, 5, 6, 7, 8, 9], DigitPosition::First).unwrap();
        let r = chi_square_gof(&hist, &model).unwrap();
        assert!(r.statistic > 0.0);
    }

    #[test]
    fn ks_reference_case() {
        let r = ks_two_sample_exact(&[0.600, 0.609, 0.669], &[0.497, 0.537, 0.433]).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert!((r.p_value - 0.1).abs() < 1e-12);
        let r = ks_two_sample_exact(&[0.1, 0.2, 0.3], &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn ks_rejects_bad_input() {
        assert!(ks_two_sample_exact(&[], &[1.0]).is_err());
        assert!(ks_two_sample_exact(&[1.0; 11], &[2.0; 10]).is_err());
        assert!(ks_two_sample_exact(&[f64::NAN], &[2.0]).is_err());
        assert!(ks_two_sample_exact(&[1.0; 10], &[2.0; 10]).is_ok());
    }

    /// Brute force over every labelling of the pooled values.
    fn ks_brute_force(a: &[f64], b: &[f64]) -> (f64, f64) {
        let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
        let total = pooled.len();
        let n = a.len();
        let d_of = |xs: &[f64], ys: &[f64]| {
            pooled
                .iter()
                .map(|&t| {
                    let fa = xs.iter().filter(|&&x| x <= t).count() as f64 / xs.len() as f64;
                    let fb = ys.iter().filter(|&&y| y <= t).count() as f64 / ys.len() as f64;
                    (fa - fb).abs()
                })
                .fold(0.0, f64::max)
        };
        let d_obs = d_of(a, b);
        let (mut extreme, mut all) = (0u64, 0u64);
        for mask in 0u32..(1 << total) {
            if mask.count_ones() as usize != n {
                continue;
            }
            let pick = |inside: bool| -> Vec<f64> {
                (0..total)
                    .filter(|i| (mask & (1 << i) != 0) == inside)
                    .map(|i| pooled[i])
                    .collect()
            };
            let (xs, ys) = (pick(true), pick(false));
            all += 1;
            if d_of(&xs, &ys) >= d_obs - 1e-9 {
                extreme += 1;
            }
        }
        (d_obs, extreme as f64 / all as f64)
    }

    #[test]
    fn ks_separated_samples_enumeration() {
        let (d, p) = ks_brute_force(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0]);
        assert_eq!(d, 1.0);
        assert!((p - 0.1).abs() < 1e-12);
    }

    #[test]
    fn ks_matches_brute_force_exhaustively() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for n in 1..=5 {
            for m in 1..=5 {
                for trial in 0..6 {
                    // coarse grid on some trials so ties occur
                    let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
                        if trial % 2 == 0 {
                            rng.random_range(0..4) as f64
                        } else {
                            rng.random::<f64>()
                        }
                    };
                    let a: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
                    let b: Vec<f64> = (0..m).map(|_| draw(&mut rng)).collect();
                    let r = ks_two_sample_exact(&a, &b).unwrap();
                    let (d, p) = ks_brute_force(&a, &b);
                    assert!((r.statistic - d).abs() < 1e-12, "{a:?} {b:?}");
                    assert!((r.p_value - p).abs() < 1e-12, "{a:?} {b:?}: {} vs {p}", r.p_value);
                }
            }
        }
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn spearman_basics() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let r = spearman_rho(&x, &y).unwrap();
        assert!((r.rho - 1.0).abs() < 1e-15);
        assert!((r.normalized * r.stderr - r.rho).abs() < 1e-12);
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        assert!((spearman_rho(&x, &rev).unwrap().rho + 1.0).abs() < 1e-15);
        assert!(spearman_rho(&x, &[1.0; 20]).is_err());
        assert!(spearman_rho(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(spearman_rho(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn skewness_of_symmetric_log_sample() {
        let base = [10f64.powf(2.0), 10f64.powf(4.0), 10f64.powf(3.0)];
        let values: Vec<f64> = base.iter().cycle().take(30).copied().collect();
        let s = log_skewness(&values).unwrap();
        assert!(s.gamma1.abs() < 1e-12);
        assert!((s.stderr - (6.0f64 / 30.0).sqrt()).abs() < 1e-15);
        assert!(log_skewness(&[1.0, 2.0, 0.0]).is_err());
        assert!(log_skewness(&[5.0; 10]).is_err());
        assert!(log_skewness(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn skewness_stderr_at_366() {
        let values: Vec<f64> = (1..=366).map(f64::from).collect();
        let s = log_skewness(&values).unwrap();
        assert!((s.stderr - 0.128).abs() < 1e-3);
        assert!((s.normalized * s.stderr - s.gamma1).abs() < 1e-12);
    }

    #[test]
    fn width_is_sample_sd() {
        let w = log_width(&[1.0, 10.0, 100.0]).unwrap();
        assert!((w - 1.0).abs() < 1e-15);
    }

    #[test]
    fn corrections() {
        let p = multi_test_correction(2.1e-5, 36, CorrectionMethod::Multiply);
        assert!((p - 7.56e-4).abs() < 1e-15);
        assert!(multi_test_correction(1.9e-4, 36, CorrectionMethod::Multiply) <= 0.0069);
        for method in [CorrectionMethod::Multiply, CorrectionMethod::Sidak] {
            assert!((multi_test_correction(0.37, 1, method) - 0.37).abs() < 1e-15);
        }
        assert_eq!(multi_test_correction(0.5, 36, CorrectionMethod::Multiply), 1.0);
        let r = TestResult::new("t", 1.0, 9.6e-5, Sidedness::One, 366).into_two_sided();
        assert!((r.p_value - 1.92e-4).abs() < 1e-15);
        assert_eq!(r.sidedness, Sidedness::Two);
        let r = r.with_correction(CorrectionMethod::Multiply, 36);
        assert!(r.effective_p() >= r.p_value);
    }

    #[test]
    fn identical_digit_probabilities() {
        assert!((identical_second_digit_prob(3) - 0.01037).abs() < 2e-5);
        assert!((identical_digit_prob(&[0.1; 10], 3) - 0.01).abs() < 1e-15);
        assert!((identical_digit_prob(&[0.1; 10], 2) - 0.1).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn sidak_never_exceeds_bonferroni(p in 0.0f64..=1.0, m in 1u32..500) {
            let s = multi_test_correction(p, m, CorrectionMethod::Sidak);
            let b = multi_test_correction(p, m, CorrectionMethod::Multiply);
            prop_assert!(s <= b + 1e-15);
            prop_assert!(s >= p - 1e-15);
        }

        #[test]
        fn spearman_is_monotone_invariant(
            pairs in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 3..60),
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            if let Ok(base) = spearman_rho(&x, &y) {
                let xe: Vec<f64> = x.iter().map(|v| v.exp()).collect();
                let yc: Vec<f64> = y.iter().map(|v| v.powi(3)).collect();
                let t = spearman_rho(&xe, &yc).unwrap();
                prop_assert!((base.rho - t.rho).abs() < 1e-12);
            }
        }

        #[test]
        fn skewness_is_scale_invariant(
            values in proptest::collection::vec(1.0f64..1e6, 3..80),
            c in 1e-3f64..1e3,
        ) {
            if let Ok(base) = log_skewness(&values) {
                let scaled: Vec<f64> = values.iter().map(|v| v * c).collect();
                let s = log_skewness(&scaled).unwrap();
                prop_assert!((base.gamma1 - s.gamma1).abs() < 1e-6 * base.gamma1.abs().max(1.0));
            }
        }

        #[test]
        fn chi_square_non_negative(counts in proptest::collection::vec(1u64..1_000_000, 1..100)) {
            let hist = digit_histogram(&counts, DigitPosition::First).unwrap();
            let r = chi_square_gof(&hist, &standard_first_digit_model()).unwrap();
            prop_assert!(r.statistic > 0.0);
            prop_assert!((0.0..=1.0).contains(&r.p_value));
        }
    }
}
