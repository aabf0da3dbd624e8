//! Per-area vote tables: parsing, validation, global fractions and area selection.
//!
//! Two plain-text sources describe a table. The `total` source holds one
//! record per area, either a bare integer or name tokens followed by an
//! integer. The `cands` source holds one record per area with one integer per
//! candidate label, in label order (optionally preceded by name tokens).
//! Blank lines and lines starting with `#` are skipped in both.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Serialize;

use crate::benford::first_digit;
use crate::{Error, Result};

/// Candidate order of the bundled table.
pub const DEFAULT_LABELS: [&str; 4] = ["A", "R", "K", "M"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VoteArea {
    pub name: String,
    /// Total votes in the area.
    pub total: u64,
    /// Votes per candidate, aligned with [`VoteTable::labels`].
    pub per_candidate: Vec<u64>,
}

impl VoteArea {
    pub fn candidate_sum(&self) -> u64 {
        self.per_candidate.iter().sum()
    }
}

/// An immutable table of N ≥ 1 areas, each with one count per label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VoteTable {
    areas: Vec<VoteArea>,
    labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    pub name: String,
    pub total: u64,
    pub candidate_sum: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ZeroCell {
    pub name: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NationalSum {
    pub label: String,
    pub votes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub n_areas: usize,
    pub total_votes: u64,
    pub national_sums: Vec<NationalSum>,
    pub mismatched_areas: Vec<Mismatch>,
    pub zero_count_cells: Vec<ZeroCell>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.mismatched_areas.is_empty()
    }
}

/// Area selection rules for [`select_areas`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AreaPredicate {
    /// Candidate count has the given leading digit (zero counts never match).
    FirstDigitEquals(u8),
    /// Candidate count in `[lo, hi)`.
    CountInRange { lo: u64, hi: u64 },
    /// The `n` areas with the largest totals, in table order.
    TopNByTotal(usize),
}

impl VoteTable {
    pub fn new(areas: Vec<VoteArea>, labels: Vec<String>) -> Result<Self> {
        if areas.is_empty() {
            return Err(Error::invalid("a vote table needs at least one area"));
        }
        if labels.is_empty() {
            return Err(Error::invalid("a vote table needs at least one candidate label"));
        }
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].contains(label) {
                return Err(Error::invalid(format!("duplicate label `{label}`")));
            }
        }
        for area in &areas {
            if area.name.trim().is_empty() {
                return Err(Error::invalid("area name must be nonempty"));
            }
            if area.per_candidate.len() != labels.len() {
                return Err(Error::invalid(format!(
                    "area `{}` has {} counts for {} labels",
                    area.name,
                    area.per_candidate.len(),
                    labels.len()
                )));
            }
            if let Some(max) = area.per_candidate.iter().max() {
                if *max > area.total {
                    return Err(Error::invalid(format!(
                        "area `{}`: candidate count {max} exceeds total {}",
                        area.name, area.total
                    )));
                }
            }
        }
        Ok(Self { areas, labels })
    }

    pub fn areas(&self) -> &[VoteArea] {
        &self.areas
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }

    pub fn label_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn area(&self, name: &str) -> Option<&VoteArea> {
        self.areas.iter().find(|a| a.name == name)
    }

    pub fn totals(&self) -> Vec<u64> {
        self.areas.iter().map(|a| a.total).collect()
    }

    /// Per-area counts for one candidate, in area order.
    pub fn column(&self, label: &str) -> Result<Vec<u64>> {
        let idx = self.label_index(label)?;
        Ok(self.areas.iter().map(|a| a.per_candidate[idx]).collect())
    }

    pub fn national_sum(&self, label: &str) -> Result<u64> {
        Ok(self.column(label)?.iter().sum())
    }

    pub fn total_votes(&self) -> u64 {
        self.areas.iter().map(|a| a.total).sum()
    }

    /// Writes the table back out in the two-source layout accepted by [`parse_vote_table`].
    pub fn write_sources<W1: Write, W2: Write>(&self, mut totals: W1, mut cands: W2) -> std::io::Result<()> {
        writeln!(totals, "# name total")?;
        writeln!(cands, "# {}", self.labels.join(" "))?;
        for area in &self.areas {
            writeln!(totals, "{} {}", area.name, area.total)?;
            let counts: Vec<String> = area.per_candidate.iter().map(u64::to_string).collect();
            writeln!(cands, "{}", counts.join(" "))?;
        }
        Ok(())
    }

    /// Canonical byte serialization used for dataset hashing.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut totals = Vec::new();
        let mut cands = Vec::new();
        self.write_sources(&mut totals, &mut cands)
            .expect("writing to a Vec cannot fail");
        totals.extend_from_slice(&cands);
        totals
    }

    fn subset(&self, keep: impl Fn(usize, &VoteArea) -> bool) -> Vec<VoteArea> {
        self.areas
            .iter()
            .enumerate()
            .filter(|(i, a)| keep(*i, a))
            .map(|(_, a)| a.clone())
            .collect()
    }
}

struct Record {
    line: usize,
    tokens: Vec<String>,
}

fn read_records<R: BufRead>(source: R, source_name: &str) -> Result<Vec<Record>> {
    let mut records = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        records.push(Record {
            line: i + 1,
            tokens: trimmed.split_whitespace().map(str::to_string).collect(),
        });
    }
    Ok(records)
}

fn parse_count(token: &str, source_name: &str, line: usize) -> Result<u64> {
    token.parse::<u64>().map_err(|_| Error::Parse {
        source_name: source_name.to_string(),
        line,
        message: format!("`{token}` is not a non-negative integer"),
    })
}

/// Parses a table from its `total` and `cands` sources.
pub fn parse_vote_table<R1: BufRead, R2: BufRead>(
    totals_source: R1,
    candidates_source: R2,
    labels: &[&str],
) -> Result<VoteTable> {
    parse_named_sources(totals_source, "total", candidates_source, "cands", labels)
}

/// Reads both sources from disk; errors carry the offending path.
pub fn load_vote_table(totals_path: &Path, cands_path: &Path, labels: &[&str]) -> Result<VoteTable> {
    let open = |p: &Path| {
        File::open(p).map(BufReader::new).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    parse_named_sources(
        open(totals_path)?,
        &totals_path.display().to_string(),
        open(cands_path)?,
        &cands_path.display().to_string(),
        labels,
    )
}

fn parse_named_sources<R1: BufRead, R2: BufRead>(
    totals_source: R1,
    totals_name: &str,
    candidates_source: R2,
    cands_name: &str,
    labels: &[&str],
) -> Result<VoteTable> {
    if labels.is_empty() {
        return Err(Error::invalid("at least one candidate label is required"));
    }
    let totals = read_records(totals_source, totals_name)?;
    let cands = read_records(candidates_source, cands_name)?;

    if totals.len() != cands.len() {
        let (longer, shorter, line) = if totals.len() > cands.len() {
            (totals_name, cands_name, totals[cands.len()].line)
        } else {
            (cands_name, totals_name, cands[totals.len()].line)
        };
        return Err(Error::RecordCountMismatch {
            longer: longer.to_string(),
            shorter: shorter.to_string(),
            line,
        });
    }

    let c = labels.len();
    let mut areas = Vec::with_capacity(totals.len());
    for (idx, (t, k)) in totals.iter().zip(&cands).enumerate() {
        let (total_tok, name_toks) = t.tokens.split_last().expect("records are nonempty");
        let total = parse_count(total_tok, totals_name, t.line)?;

        if k.tokens.len() < c {
            return Err(Error::Parse {
                source_name: cands_name.to_string(),
                line: k.line,
                message: format!("expected {c} counts, found {}", k.tokens.len()),
            });
        }
        let split = k.tokens.len() - c;
        let per_candidate = k.tokens[split..]
            .iter()
            .map(|tok| parse_count(tok, cands_name, k.line))
            .collect::<Result<Vec<_>>>()?;

        let name = if !name_toks.is_empty() {
            name_toks.join(" ")
        } else if split > 0 {
            k.tokens[..split].join(" ")
        } else {
            format!("area-{}", idx + 1)
        };

        if let Some(max) = per_candidate.iter().max() {
            if *max > total {
                return Err(Error::Parse {
                    source_name: cands_name.to_string(),
                    line: k.line,
                    message: format!("candidate count {max} exceeds the area total {total}"),
                });
            }
        }
        areas.push(VoteArea {
            name,
            total,
            per_candidate,
        });
    }

    if areas.is_empty() {
        return Err(Error::invalid("the sources contain no area records"));
    }
    VoteTable::new(areas, labels.iter().map(|s| s.to_string()).collect())
}

/// Reports total/candidate-sum mismatches and zero cells without touching the table.
pub fn validate(table: &VoteTable) -> ValidationReport {
    let mut mismatched_areas = Vec::new();
    let mut zero_count_cells = Vec::new();
    for area in table.areas() {
        let candidate_sum = area.candidate_sum();
        if candidate_sum != area.total {
            mismatched_areas.push(Mismatch {
                name: area.name.clone(),
                total: area.total,
                candidate_sum,
            });
        }
        for (label, &count) in table.labels().iter().zip(&area.per_candidate) {
            if count == 0 {
                zero_count_cells.push(ZeroCell {
                    name: area.name.clone(),
                    label: label.clone(),
                });
            }
        }
    }
    let national_sums = table
        .labels()
        .iter()
        .enumerate()
        .map(|(i, label)| NationalSum {
            label: label.clone(),
            votes: table.areas().iter().map(|a| a.per_candidate[i]).sum(),
        })
        .collect();
    ValidationReport {
        n_areas: table.len(),
        total_votes: table.total_votes(),
        national_sums,
        mismatched_areas,
        zero_count_cells,
    }
}

/// The candidate's share of all votes, summed over every area.
pub fn global_fraction(table: &VoteTable, label: &str) -> Result<f64> {
    let votes = table.national_sum(label)?;
    let total = table.total_votes();
    if total == 0 {
        return Err(Error::undefined("global fraction with zero total votes"));
    }
    Ok(votes as f64 / total as f64)
}

/// Returns the areas matching `predicate`, in table order.
pub fn select_areas(table: &VoteTable, label: &str, predicate: AreaPredicate) -> Result<VoteTable> {
    let idx = table.label_index(label)?;
    let areas = match predicate {
        AreaPredicate::FirstDigitEquals(d) => {
            if !(1..=9).contains(&d) {
                return Err(Error::invalid(format!("{d} is not a leading digit")));
            }
            table.subset(|_, a| {
                let v = a.per_candidate[idx];
                v >= 1 && first_digit(v).ok() == Some(d)
            })
        }
        AreaPredicate::CountInRange { lo, hi } => {
            if lo >= hi {
                return Err(Error::invalid(format!("empty count range [{lo}, {hi})")));
            }
            table.subset(|_, a| (lo..hi).contains(&a.per_candidate[idx]))
        }
        AreaPredicate::TopNByTotal(n) => {
            if n == 0 {
                return Err(Error::invalid("top-n selection needs n ≥ 1"));
            }
            let mut order: Vec<usize> = (0..table.len()).collect();
            order.sort_by(|&a, &b| table.areas[b].total.cmp(&table.areas[a].total).then(a.cmp(&b)));
            let keep: Vec<usize> = order.into_iter().take(n).collect();
            table.subset(|i, _| keep.contains(&i))
        }
    };
    if areas.is_empty() {
        return Err(Error::undefined("no area matches the selection"));
    }
    VoteTable::new(areas, table.labels.clone())
}

/// Like [`select_areas`] but an empty selection yields `None` instead of an error.
pub fn try_select_areas(table: &VoteTable, label: &str, predicate: AreaPredicate) -> Result<Option<VoteTable>> {
    match select_areas(table, label, predicate) {
        Ok(t) => Ok(Some(t)),
        Err(Error::Undefined(_)) => Ok(None),
        Err(e) => Err(e),
    }
}
