//! The stabilizer randomization procedure, its empirical SCRD diagnostics,
//! and conditional resampling of exposures on (attribute, focal) strata.

use rand::Rng;

use crate::error::{Error, Result};
use crate::exposure::SCRDDescriptor;
use crate::population::{validate_assignment, Assignment, Population};
use crate::stats::{chi_square_sf, contingency_chi_square};
use crate::symmetry::{apply_permutation, apply_to_assignment, sample_uniform_stabilizer, StabilizerSpec};

/// Draw a fresh assignment: π·C0 with π uniform on the stabilizer of the
/// attribute vector. L and W move jointly under the same π.
pub fn randomize<R: Rng + ?Sized>(
    initial: &Assignment,
    population: &Population,
    rng: &mut R,
) -> Result<Assignment> {
    let mut treat_alphabet = initial.treatments.clone();
    treat_alphabet.sort_unstable();
    treat_alphabet.dedup();
    if let Some(v) = validate_assignment(initial, population, &treat_alphabet)? {
        return Err(Error::InvalidAssignment(v.to_string()));
    }
    let spec = StabilizerSpec::from_codes(population.attributes());
    let pi = sample_uniform_stabilizer(&spec, rng);
    apply_to_assignment(&pi, initial)
}

/// Permute an observed exposure vector within (attribute, focal) strata:
/// π uniform on the stabilizer of the paired label vector (A_i, U_i).
pub fn conditional_resample<H: Clone, R: Rng + ?Sized>(
    observed: &[H],
    focal: &[u8],
    population: &Population,
    rng: &mut R,
) -> Result<Vec<H>> {
    if focal.len() != observed.len() {
        return Err(Error::LengthMismatch {
            what: "focal indicator U",
            got: focal.len(),
            expected: observed.len(),
        });
    }
    if observed.len() != population.n_units() {
        return Err(Error::LengthMismatch {
            what: "exposure vector",
            got: observed.len(),
            expected: population.n_units(),
        });
    }
    let spec = StabilizerSpec::from_pairs(population.attributes(), focal);
    let pi = sample_uniform_stabilizer(&spec, rng);
    apply_permutation(&pi, observed)
}

/// Outcome of one diagnostic check in [`verify_scrd`].
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub passed: bool,
    pub note: Option<String>,
}

/// Per-check diagnostics for the SCRD property of a sample of exposure draws.
#[derive(Debug, Clone)]
pub struct ScrdReport {
    pub checks: Vec<CheckOutcome>,
}

impl ScrdReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Empirically verify that sampled exposure vectors behave like a stratified
/// completely randomized design with the expected count table:
///
/// 1. the count table is constant across draws and equals the expected one;
/// 2. within each stratum, per-unit exposure marginals are homogeneous
///    (chi-square on the unit-by-exposure table of counts);
/// 3. exposures of one sampled unit pair from different strata are
///    independent (chi-square on their joint contingency table).
///
/// `significance` is the level at which chi-square checks fail (e.g. 1e-3).
pub fn verify_scrd<H: Ord + Clone, R: Rng + ?Sized>(
    samples: &[Vec<H>],
    population: &Population,
    expected: &SCRDDescriptor<H>,
    significance: f64,
    rng: &mut R,
) -> Result<ScrdReport> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples("verify_scrd needs at least 2 draws"));
    }
    let n = population.n_units();
    for s in samples {
        if s.len() != n {
            return Err(Error::LengthMismatch {
                what: "sampled exposure vector",
                got: s.len(),
                expected: n,
            });
        }
    }

    let mut checks = Vec::new();

    // Distinct exposure levels, in a stable order.
    let mut levels: Vec<H> = samples
        .iter()
        .flat_map(|s| s.iter().cloned())
        .collect::<std::collections::BTreeSet<H>>()
        .into_iter()
        .collect();
    levels.sort();
    let level_of = |h: &H| levels.binary_search(h).expect("level enumerated");

    // Check 1: count table bit-identical across draws and equal to expected.
    let mut constant = true;
    let mut matches_expected = true;
    for s in samples {
        let table = crate::exposure::exposure_table(population, s)?;
        if &table != expected {
            matches_expected = false;
            constant = false;
            break;
        }
    }
    checks.push(CheckOutcome {
        name: "count_table_constant",
        statistic: if constant { 0.0 } else { 1.0 },
        p_value: None,
        passed: constant && matches_expected,
        note: None,
    });

    // Check 2: per-unit exposure marginals within each stratum.
    for (&a, units) in population.strata_index() {
        if units.len() < 2 {
            continue;
        }
        let mut table = vec![vec![0u64; levels.len()]; units.len()];
        for s in samples {
            for (row, &u) in units.iter().enumerate() {
                table[row][level_of(&s[u])] += 1;
            }
        }
        // A unit whose exposure never varies across draws carries no
        // information about its marginal; if no unit varies the check is
        // degenerate (e.g. a single repeated sample).
        let any_variation = table
            .iter()
            .any(|row| row.iter().filter(|&&c| c > 0).count() > 1);
        let (stat, dof) = contingency_chi_square(&table);
        if dof == 0.0 || !any_variation {
            checks.push(CheckOutcome {
                name: "stratum_marginal_homogeneity",
                statistic: stat,
                p_value: None,
                passed: true,
                note: Some(format!("stratum {a}: insufficient variation, check degenerate")),
            });
            continue;
        }
        let p = chi_square_sf(stat, dof);
        checks.push(CheckOutcome {
            name: "stratum_marginal_homogeneity",
            statistic: stat,
            p_value: Some(p),
            passed: p > significance,
            note: Some(format!("stratum {a}")),
        });
    }

    // Check 3: independence across strata, one random unit pair per stratum
    // pair (full joint testing would be exponential).
    let strata: Vec<(&u8, &Vec<usize>)> = population
        .strata_index()
        .iter()
        .filter(|(_, units)| !units.is_empty())
        .collect();
    for i in 0..strata.len() {
        for j in (i + 1)..strata.len() {
            let u = strata[i].1[rng.gen_range(0..strata[i].1.len())];
            let v = strata[j].1[rng.gen_range(0..strata[j].1.len())];
            let mut joint = vec![vec![0u64; levels.len()]; levels.len()];
            for s in samples {
                joint[level_of(&s[u])][level_of(&s[v])] += 1;
            }
            let (stat, dof) = contingency_chi_square(&joint);
            if dof == 0.0 {
                checks.push(CheckOutcome {
                    name: "cross_stratum_independence",
                    statistic: stat,
                    p_value: None,
                    passed: true,
                    note: Some(format!(
                        "units {u},{v}: insufficient variation, check degenerate"
                    )),
                });
                continue;
            }
            let p = chi_square_sf(stat, dof);
            checks.push(CheckOutcome {
                name: "cross_stratum_independence",
                statistic: stat,
                p_value: Some(p),
                passed: p > significance,
                note: Some(format!("units {u},{v}")),
            });
        }
    }

    Ok(ScrdReport { checks })
}
