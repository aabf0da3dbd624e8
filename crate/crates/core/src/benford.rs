//! Digit extraction, log folding and reference digit models.
//!
//! Integer digits are always extracted by repeated division. Real-valued
//! inputs (scaled totals, simulated counts) are reduced to a mantissa by
//! dividing by an exact power of ten, so values sitting exactly on a digit
//! boundary such as `700.0` land in the upper bucket.

use serde::Serialize;

use crate::{Error, Result};

/// Which decimal digit a histogram or model describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DigitPosition {
    First,
    Second,
}

impl DigitPosition {
    pub fn digits(self) -> std::ops::RangeInclusive<u8> {
        match self {
            DigitPosition::First => 1..=9,
            DigitPosition::Second => 0..=9,
        }
    }

    pub fn bins(self) -> usize {
        self.digits().count()
    }

    fn extract(self, n: u64) -> Result<u8> {
        match self {
            DigitPosition::First => first_digit(n),
            DigitPosition::Second => second_digit(n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Analytic,
    Empirical,
}

/// A probability mass function over the digits of one position.
///
/// `pmf` is indexed by the digit itself; for first-digit models entry 0 is
/// always zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenfordModel {
    pub position: DigitPosition,
    pub kind: ModelKind,
    pub pmf: [f64; 10],
    /// Number of totals behind an empirical model.
    pub source_n: Option<usize>,
    /// Scaling fraction behind an empirical model.
    pub alpha: Option<f64>,
}

impl BenfordModel {
    pub fn probability(&self, digit: u8) -> f64 {
        self.pmf.get(digit as usize).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.pmf.iter().sum()
    }
}

/// Observed tallies of one digit position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DigitHistogram {
    pub position: DigitPosition,
    /// Indexed by digit.
    pub counts: [u64; 10],
    pub n: u64,
}

impl DigitHistogram {
    pub fn empty(position: DigitPosition) -> Self {
        Self {
            position,
            counts: [0; 10],
            n: 0,
        }
    }

    pub fn count(&self, digit: u8) -> u64 {
        self.counts.get(digit as usize).copied().unwrap_or(0)
    }

    /// Tallies a digit that is already known to be valid for the position.
    pub fn record(&mut self, digit: u8) {
        self.counts[digit as usize] += 1;
        self.n += 1;
    }
}

/// Fractional parts of log₁₀ of a positive sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldedSample {
    values: Vec<f64>,
}

impl FoldedSample {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let values = values.iter().map(|&v| fold_log(v)).collect::<Result<Vec<_>>>()?;
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub fn first_digit(n: u64) -> Result<u8> {
    if n == 0 {
        return Err(Error::undefined("zero has no leading digit"));
    }
    let mut n = n;
    while n >= 10 {
        n /= 10;
    }
    Ok(n as u8)
}

pub fn second_digit(n: u64) -> Result<u8> {
    if n < 10 {
        return Err(Error::undefined(format!("{n} has no second digit")));
    }
    let mut n = n;
    while n >= 100 {
        n /= 10;
    }
    Ok((n % 10) as u8)
}

/// `log₁₀ v − ⌊log₁₀ v⌋`, always in `[0, 1)`.
pub fn fold_log(v: f64) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::invalid(format!("cannot fold non-positive value {v}")));
    }
    let l = v.log10();
    let r = l - l.floor();
    Ok(if r >= 1.0 { 0.0 } else { r })
}

/// Mantissa of a positive finite real in `[1, 10)`.
fn mantissa(x: f64) -> f64 {
    let e = x.log10().floor() as i32;
    let scale = |e: i32| {
        if e >= 0 {
            x / 10f64.powi(e)
        } else {
            x * 10f64.powi(-e)
        }
    };
    let mut e = e;
    let mut m = scale(e);
    // log10 can be off by one ulp next to a power of ten
    if m >= 10.0 {
        e += 1;
        m = scale(e);
    } else if m < 1.0 {
        e -= 1;
        m = scale(e);
    }
    m
}

/// Leading digit of a positive real number, `None` for non-positive or non-finite input.
pub fn first_digit_of_real(x: f64) -> Option<u8> {
    if !(x > 0.0) || !x.is_finite() {
        return None;
    }
    Some((mantissa(x).floor() as u8).clamp(1, 9))
}

/// Leading digit via the folded form `⌊10^{fold(x)}⌋`.
pub fn first_digit_via_fold(x: f64) -> Option<u8> {
    let f = fold_log(x).ok()?;
    Some((10f64.powf(f).floor() as u8).clamp(1, 9))
}

/// `f(i) = log₁₀(1 + 1/i)` for `i = 1..9`.
pub fn standard_first_digit_model() -> BenfordModel {
    let mut pmf = [0.0; 10];
    for (i, p) in pmf.iter_mut().enumerate().skip(1) {
        *p = (1.0 + 1.0 / i as f64).log10();
    }
    BenfordModel {
        position: DigitPosition::First,
        kind: ModelKind::Analytic,
        pmf,
        source_n: None,
        alpha: None,
    }
}

/// `f₂(i) = Σ_{j=1..9} log₁₀(1 + 1/(10j + i))` for `i = 0..9`.
pub fn second_digit_model() -> BenfordModel {
    let mut pmf = [0.0; 10];
    for (i, p) in pmf.iter_mut().enumerate() {
        *p = (1..=9).map(|j| (1.0 + 1.0 / (10 * j + i) as f64).log10()).sum();
    }
    BenfordModel {
        position: DigitPosition::Second,
        kind: ModelKind::Analytic,
        pmf,
        source_n: None,
        alpha: None,
    }
}

/// First-digit pmf of the totals scaled by `alpha`, read as real numbers.
pub fn empirical_first_digit_model(totals: &[u64], alpha: f64) -> Result<BenfordModel> {
    if totals.is_empty() {
        return Err(Error::invalid("empirical model needs at least one total"));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    let mut counts = [0u64; 10];
    for &v in totals {
        if v == 0 {
            return Err(Error::invalid("empirical model totals must be ≥ 1"));
        }
        let d = first_digit_of_real(alpha * v as f64)
            .ok_or_else(|| Error::invalid("scaled total is not a positive finite number"))?;
        counts[d as usize] += 1;
    }
    let n = totals.len() as f64;
    let mut pmf = [0.0; 10];
    for (p, c) in pmf.iter_mut().zip(counts) {
        *p = c as f64 / n;
    }
    Ok(BenfordModel {
        position: DigitPosition::First,
        kind: ModelKind::Empirical,
        pmf,
        source_n: Some(totals.len()),
        alpha: Some(alpha),
    })
}

/// Tallies one digit position; every count must have that digit (callers drop zeros).
pub fn digit_histogram(counts: &[u64], position: DigitPosition) -> Result<DigitHistogram> {
    let mut hist = DigitHistogram::empty(position);
    for &c in counts {
        hist.record(position.extract(c)?);
    }
    Ok(hist)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectedCount {
    pub digit: u8,
    pub expected: f64,
    /// Binomial standard deviation of the count.
    pub stderr: f64,
}

pub fn expected_counts(model: &BenfordModel, n: u64) -> Vec<ExpectedCount> {
    let n = n as f64;
    model
        .position
        .digits()
        .map(|digit| {
            let p = model.probability(digit);
            ExpectedCount {
                digit,
                expected: n * p,
                stderr: (n * p * (1.0 - p)).max(0.0).sqrt(),
            }
        })
        .collect()
}
