//! Randomized search for operators that pass the commuting-family oracle yet
//! break the Cauchy–Schwarz equality on the support where the necessary
//! condition is stated.
//!
//! Trials cycle through families that stress different parts of the
//! criterion. The census of `Indeterminate` verdicts shows how often the gap
//! between the necessary and the sufficient condition is hit, and what the
//! oracle says there.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mix_seed;
use super::random::{
    complex_normal, complex_vec, gen_equality_case, gen_orthogonal_case, gen_random, gen_zero_mean_case, orthogonalize,
    random_partition, random_space, rng,
};
use crate::classify::{centered_closed_form, centered_oracle, hysteresis, Status};
use crate::condop::CondOpSpec;
use crate::measure::{CFun, MeasureSpace, Partition};
use crate::{Error, Result};

/// Largest operator drawn by the search.
const MAX_POINTS: usize = 12;

const FAMILIES: [&str; 6] = ["random", "equality", "orthogonal", "mixed", "zero_mean", "scaled_pair"];

/// One trial worth reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub family: String,
    pub n_points: usize,
    pub n_blocks: usize,
    pub verdict: Status,
    pub criterion_id: String,
    pub formula_residual: f64,
    pub oracle_residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCount {
    /// Oracle residual `≤ tol`.
    pub centered: usize,
    /// Oracle residual `> 10·tol`.
    pub not_centered: usize,
    /// Residual inside the hysteresis band; excluded from violation counts.
    pub in_band: usize,
}

impl OutcomeCount {
    fn record(&mut self, oracle: Status) {
        match oracle {
            Status::Yes => self.centered += 1,
            Status::No => self.not_centered += 1,
            Status::Indeterminate => self.in_band += 1,
        }
    }

    fn merge(&mut self, other: &Self) {
        self.centered += other.centered;
        self.not_centered += other.not_centered;
        self.in_band += other.in_band;
    }

    pub fn total(&self) -> usize {
        self.centered + self.not_centered + self.in_band
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub trials: usize,
    pub depth: usize,
    pub tol: f64,
    pub seed: u64,
    /// Verdict `No` (equality fails on the stated support) but the oracle
    /// finds the family commutative. Expected to stay empty.
    pub violations: Vec<TrialRecord>,
    /// Verdict `Yes` but the oracle finds a non-commuting pair. Expected to
    /// stay empty.
    pub sufficiency_violations: Vec<TrialRecord>,
    /// Oracle outcome per criterion id.
    pub census: BTreeMap<String, OutcomeCount>,
    /// Oracle outcome per trial family.
    pub by_family: BTreeMap<String, OutcomeCount>,
    /// First few `Indeterminate` verdicts the oracle found centered.
    pub indeterminate_centered_examples: Vec<TrialRecord>,
    /// Trials skipped because an oracle routine did not converge.
    pub oracle_failures: usize,
}

impl SearchReport {
    pub fn indeterminate_centered(&self) -> usize {
        self.census
            .iter()
            .filter(|(id, _)| id.as_str() == "cs_equality_fails_off_support")
            .map(|(_, c)| c.centered)
            .sum()
    }

    pub fn in_band(&self) -> usize {
        self.census.values().map(|c| c.in_band).sum()
    }
}

fn sizes(r: &mut impl Rng) -> (usize, usize) {
    let n = r.random_range(1..=MAX_POINTS);
    let b = r.random_range(1..=n);
    (n, b)
}

/// `u = (1, 1)`, `w = (1, −1)` on one atom of two equal points, scaled by
/// random complex factors. `T² = 0` and `E(uw) = 0`.
fn scaled_pair(r: &mut impl Rng) -> Result<CondOpSpec> {
    let a = complex_normal(r);
    let b = complex_normal(r);
    let m = 10f64.powf(r.random_range(-2.0..=2.0));
    CondOpSpec::new(
        MeasureSpace::uniform(2, 2.0 * m)?,
        Partition::trivial(2),
        CFun::new(vec![a, a]),
        CFun::new(vec![b, -b]),
    )
}

/// Each atom independently becomes an equality, orthogonal or random atom.
fn mixed(seed: u64, n: usize, nb: usize) -> Result<CondOpSpec> {
    let mut r = rng(seed);
    let space = random_space(&mut r, n, 1.0)?;
    let partition = random_partition(&mut r, n, nb)?;
    let u = complex_vec(&mut r, n);
    let w_rand = complex_vec(&mut r, n);
    let w_orth = orthogonalize(&space, &partition, &u, &w_rand);
    let mut w = w_rand.clone();
    for block in partition.blocks() {
        match r.random_range(0..3) {
            0 => {
                let a = complex_normal(&mut r);
                for &i in block {
                    w.0[i] = a * u.values()[i].conj();
                }
            }
            1 => {
                for &i in block {
                    w.0[i] = w_orth.values()[i];
                }
            }
            _ => {}
        }
    }
    CondOpSpec::new(space, partition, u, w)
}

fn draw(family: &str, seed: u64) -> Result<CondOpSpec> {
    let mut r = rng(seed);
    let (n, b) = sizes(&mut r);
    let inner = r.random::<u64>();
    match family {
        "random" => gen_random(inner, n, b, 1.0),
        "equality" => gen_equality_case(inner, n, b),
        "orthogonal" => {
            let n = n.max(2);
            gen_orthogonal_case(inner, n, b.min(n / 2))
        }
        "mixed" => mixed(inner, n, b),
        "zero_mean" => gen_zero_mean_case(inner, n, b),
        _ => scaled_pair(&mut r),
    }
}

enum Outcome {
    Done(TrialRecord, Status),
    OracleFailure,
}

fn run_trial(trial: usize, master: u64, depth: usize, tol: f64) -> Result<Outcome> {
    let seed = mix_seed(master, trial as u64);
    let family = FAMILIES[trial % FAMILIES.len()];
    let spec = draw(family, seed)?;
    let verdict = centered_closed_form(&spec, tol)?;
    let check = match centered_oracle(&spec, depth, tol) {
        Ok(c) => c,
        Err(e) if e.is_numerical() => return Ok(Outcome::OracleFailure),
        Err(e) => return Err(e),
    };
    let oracle = hysteresis(check.max_residual, tol, 10.0 * tol);
    Ok(Outcome::Done(
        TrialRecord {
            trial,
            seed,
            family: family.to_string(),
            n_points: spec.len(),
            n_blocks: spec.partition().block_count(),
            verdict: verdict.status,
            criterion_id: verdict.criterion_id,
            formula_residual: verdict.residual,
            oracle_residual: check.max_residual,
        },
        oracle,
    ))
}

/// Runs `trials` independent seeded trials in parallel. The report depends
/// only on the arguments, not on scheduling.
pub fn counterexample_search(trials: usize, depth: usize, tol: f64, seed: u64) -> Result<SearchReport> {
    if trials == 0 {
        return Err(Error::Argument("search needs at least one trial".into()));
    }
    if depth == 0 {
        return Err(Error::Argument("commuting family depth must be at least 1".into()));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
    }
    let outcomes: Vec<Outcome> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(t, seed, depth, tol))
        .collect::<Result<_>>()?;

    let mut report = SearchReport {
        trials,
        depth,
        tol,
        seed,
        violations: Vec::new(),
        sufficiency_violations: Vec::new(),
        census: BTreeMap::new(),
        by_family: BTreeMap::new(),
        indeterminate_centered_examples: Vec::new(),
        oracle_failures: 0,
    };
    for outcome in outcomes {
        let (rec, oracle) = match outcome {
            Outcome::Done(rec, oracle) => (rec, oracle),
            Outcome::OracleFailure => {
                report.oracle_failures += 1;
                continue;
            }
        };
        let mut one = OutcomeCount::default();
        one.record(oracle);
        report.census.entry(rec.criterion_id.clone()).or_default().merge(&one);
        report.by_family.entry(rec.family.clone()).or_default().merge(&one);
        match (rec.verdict, oracle) {
            (Status::No, Status::Yes) => report.violations.push(rec),
            (Status::Yes, Status::No) => report.sufficiency_violations.push(rec),
            (Status::Indeterminate, Status::Yes) if report.indeterminate_centered_examples.len() < 8 => {
                report.indeterminate_centered_examples.push(rec)
            }
            _ => {}
        }
    }
    Ok(report)
}
