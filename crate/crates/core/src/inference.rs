//! Neymanian estimation of exposure contrasts and Fisher randomization tests
//! (global sharp null, and conditional pairwise tests on focal sets).

use std::collections::BTreeMap;

use rand::Rng;

use crate::design::{conditional_resample, randomize};
use crate::error::{Error, Result};
use crate::exposure::exposure_map;
use crate::population::{Assignment, Population};
use crate::stats::{mean, normal_quantile, sample_variance};
use crate::symmetry::{apply_permutation, enumerate_stabilizer, StabilizerSpec};
use crate::{Attr, Real};

/// Sidedness of the randomization p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum Sidedness {
    /// Count resamples with T' >= T_obs.
    Greater,
    /// Count resamples with |T'| >= |T_obs|.
    #[default]
    TwoSided,
}

impl Sidedness {
    fn exceeds(self, t_resample: Real, t_obs: Real) -> bool {
        match self {
            Sidedness::Greater => t_resample >= t_obs,
            Sidedness::TwoSided => t_resample.abs() >= t_obs.abs(),
        }
    }
}

/// How the reference distribution is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResamplingPlan {
    /// R Monte Carlo resamples with the add-one p-value (1 + hits)/(R + 1).
    MonteCarlo { resamples: usize },
    /// Enumerate the full stabilizer (p = hits / order); errors above `cap`.
    Exhaustive { cap: usize },
}

/// Result of a randomization test.
#[derive(Debug, Clone)]
pub struct TestResult {
    pub statistic_observed: Real,
    pub p_value: Real,
    pub n_resamples: usize,
    /// Units per (stratum, tested exposure) cell among focal units.
    pub focal_counts: BTreeMap<(Attr, String), usize>,
    /// Set when every resampled statistic equals the observed one, i.e. the
    /// configuration has zero power.
    pub degenerate: bool,
}

/// Per-stratum and pooled difference-in-means estimates with conservative
/// variance and a Wald interval.
#[derive(Debug, Clone)]
pub struct ContrastEstimate {
    pub per_stratum: BTreeMap<Attr, StratumContrast>,
    /// Strata dropped because a cell had fewer than 2 units.
    pub excluded_strata: Vec<Attr>,
    pub pooled_estimate: Real,
    pub pooled_variance: Real,
    pub confidence_level: Real,
    pub ci_lower: Real,
    pub ci_upper: Real,
}

#[derive(Debug, Clone)]
pub struct StratumContrast {
    pub estimate: Real,
    pub variance: Real,
    pub n_k: usize,
    pub n_k_prime: usize,
    pub stratum_size: usize,
}

/// Mean outcome over units with attribute `a` and exposure `k`.
pub fn stratum_mean<H: PartialEq>(
    outcomes: &[Real],
    exposures: &[H],
    population: &Population,
    a: Attr,
    k: &H,
) -> Result<Real> {
    let cell: Vec<Real> = (0..population.n_units())
        .filter(|&i| population.attribute(i) == a && exposures[i] == *k)
        .map(|i| outcomes[i])
        .collect();
    if cell.is_empty() {
        return Err(Error::EmptyCell { stratum: a });
    }
    Ok(mean(&cell))
}

/// Stratified difference-in-means estimate of the exposure contrast
/// τ(k, k') with the conservative Neyman variance and a Wald interval.
///
/// Strata where either cell has fewer than 2 units are excluded from the
/// pooled estimate and reported in `excluded_strata`.
pub fn estimate_contrast<H: PartialEq>(
    outcomes: &[Real],
    exposures: &[H],
    population: &Population,
    k: &H,
    k_prime: &H,
    alpha: Real,
) -> Result<ContrastEstimate> {
    let n = population.n_units();
    if outcomes.len() != n {
        return Err(Error::LengthMismatch {
            what: "outcomes",
            got: outcomes.len(),
            expected: n,
        });
    }
    if exposures.len() != n {
        return Err(Error::LengthMismatch {
            what: "exposures",
            got: exposures.len(),
            expected: n,
        });
    }

    let mut per_stratum = BTreeMap::new();
    let mut excluded = Vec::new();
    for (&a, units) in population.strata_index() {
        if units.is_empty() {
            continue;
        }
        let cell = |target: &H| -> Vec<Real> {
            units
                .iter()
                .filter(|&&i| exposures[i] == *target)
                .map(|&i| outcomes[i])
                .collect()
        };
        let ys_k = cell(k);
        let ys_kp = cell(k_prime);
        if ys_k.len() < 2 || ys_kp.len() < 2 {
            excluded.push(a);
            continue;
        }
        let estimate = mean(&ys_k) - mean(&ys_kp);
        let variance = sample_variance(&ys_k) / ys_k.len() as Real
            + sample_variance(&ys_kp) / ys_kp.len() as Real;
        per_stratum.insert(
            a,
            StratumContrast {
                estimate,
                variance,
                n_k: ys_k.len(),
                n_k_prime: ys_kp.len(),
                stratum_size: units.len(),
            },
        );
    }
    if per_stratum.is_empty() {
        return Err(Error::NoEstimableStratum);
    }

    // Weights are renormalized over the estimable strata so excluding a
    // stratum shrinks the target, not the estimate.
    let n_included: usize = per_stratum.values().map(|sc| sc.stratum_size).sum();
    let mut pooled = 0.0;
    let mut pooled_var = 0.0;
    for sc in per_stratum.values() {
        let weight = sc.stratum_size as Real / n_included as Real;
        pooled += weight * sc.estimate;
        pooled_var += weight * weight * sc.variance;
    }
    let z = normal_quantile(1.0 - alpha / 2.0);
    let half_width = z * pooled_var.sqrt();
    Ok(ContrastEstimate {
        per_stratum,
        excluded_strata: excluded,
        pooled_estimate: pooled,
        pooled_variance: pooled_var,
        confidence_level: 1.0 - alpha,
        ci_lower: pooled - half_width,
        ci_upper: pooled + half_width,
    })
}

/// Indicator vector of the focal set: U_i = 1 iff H_i is in the target set.
pub fn focal_set<H: PartialEq>(exposures: &[H], targets: &[H]) -> Vec<u8> {
    exposures
        .iter()
        .map(|h| u8::from(targets.iter().any(|t| t == h)))
        .collect()
}

fn focal_diff_in_means<H: PartialEq>(
    outcomes: &[Real],
    exposures: &[H],
    focal: &[u8],
    k: &H,
    k_prime: &H,
) -> Option<Real> {
    let mut sum_k = 0.0;
    let mut n_k = 0usize;
    let mut sum_kp = 0.0;
    let mut n_kp = 0usize;
    for i in 0..exposures.len() {
        if focal[i] == 1 {
            if exposures[i] == *k {
                sum_k += outcomes[i];
                n_k += 1;
            } else if exposures[i] == *k_prime {
                sum_kp += outcomes[i];
                n_kp += 1;
            }
        }
    }
    if n_k == 0 || n_kp == 0 {
        None
    } else {
        Some(sum_k / n_k as Real - sum_kp / n_kp as Real)
    }
}

/// Conditional Fisher randomization test of the pairwise null H_0^{k,k'}.
///
/// The focal set is the units whose observed exposure is k or k'; the
/// statistic is the focal difference in means; the reference distribution
/// permutes exposures within (attribute, focal) strata.
#[allow(clippy::too_many_arguments)]
pub fn conditional_fisher_test<H, R>(
    outcomes: &[Real],
    exposures_obs: &[H],
    population: &Population,
    k: &H,
    k_prime: &H,
    plan: ResamplingPlan,
    rng: &mut R,
    sidedness: Sidedness,
) -> Result<TestResult>
where
    H: Ord + Clone + std::fmt::Display,
    R: Rng + ?Sized,
{
    let n = population.n_units();
    if outcomes.len() != n || exposures_obs.len() != n {
        return Err(Error::LengthMismatch {
            what: "outcomes/exposures",
            got: outcomes.len().min(exposures_obs.len()),
            expected: n,
        });
    }
    let focal = focal_set(exposures_obs, &[k.clone(), k_prime.clone()]);

    let mut focal_counts: BTreeMap<(Attr, String), usize> = BTreeMap::new();
    for i in 0..n {
        if focal[i] == 1 {
            *focal_counts
                .entry((population.attribute(i), exposures_obs[i].to_string()))
                .or_insert(0) += 1;
        }
    }

    let t_obs = focal_diff_in_means(outcomes, exposures_obs, &focal, k, k_prime).ok_or_else(|| {
        let missing = if exposures_obs
            .iter()
            .zip(&focal)
            .any(|(h, &u)| u == 1 && h == k)
        {
            k_prime.to_string()
        } else {
            k.to_string()
        };
        Error::UndefinedStatistic { which: missing }
    })?;

    let eval_resample = |resampled: &[H]| -> Real {
        debug_assert!(resampled
            .iter()
            .zip(&focal)
            .all(|(h, &u)| u == 0 || h == k || h == k_prime));
        focal_diff_in_means(outcomes, resampled, &focal, k, k_prime)
            .expect("resampling preserves focal cell counts within strata")
    };

    let stats: Vec<Real> = match plan {
        ResamplingPlan::MonteCarlo { resamples } => (0..resamples)
            .map(|_| {
                let resampled = conditional_resample(exposures_obs, &focal, population, rng)?;
                Ok(eval_resample(&resampled))
            })
            .collect::<Result<_>>()?,
        ResamplingPlan::Exhaustive { cap } => {
            let spec = StabilizerSpec::from_pairs(population.attributes(), &focal);
            enumerate_stabilizer(&spec, cap)?
                .iter()
                .map(|pi| Ok(eval_resample(&apply_permutation(pi, exposures_obs)?)))
                .collect::<Result<_>>()?
        }
    };

    let hits = stats.iter().filter(|&&t| sidedness.exceeds(t, t_obs)).count();
    let p_value = match plan {
        ResamplingPlan::MonteCarlo { .. } => (1.0 + hits as Real) / (stats.len() as Real + 1.0),
        ResamplingPlan::Exhaustive { .. } => hits as Real / stats.len() as Real,
    };
    let degenerate = stats.iter().all(|&t| t == t_obs);

    Ok(TestResult {
        statistic_observed: t_obs,
        p_value,
        n_resamples: stats.len(),
        focal_counts,
        degenerate,
    })
}

/// Test statistic for the global sharp-null randomization test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum GlobalStatistic {
    /// Within each stratum: range of exposure-cell outcome means over
    /// non-empty cells; summed over strata.
    #[default]
    CellMeanRange,
}

fn global_statistic<H: Ord + Clone>(
    outcomes: &[Real],
    exposures: &[H],
    population: &Population,
    which: GlobalStatistic,
) -> Real {
    match which {
        GlobalStatistic::CellMeanRange => {
            let mut total = 0.0;
            for units in population.strata_index().values() {
                if units.is_empty() {
                    continue;
                }
                let mut cells: BTreeMap<&H, (Real, usize)> = BTreeMap::new();
                for &i in units {
                    let e = cells.entry(&exposures[i]).or_insert((0.0, 0));
                    e.0 += outcomes[i];
                    e.1 += 1;
                }
                let means: Vec<Real> = cells.values().map(|&(s, c)| s / c as Real).collect();
                let max = means.iter().cloned().fold(Real::NEG_INFINITY, Real::max);
                let min = means.iter().cloned().fold(Real::INFINITY, Real::min);
                total += max - min;
            }
            total
        }
    }
}

/// Classical Fisher randomization test of the global sharp null: under the
/// null the whole outcome vector is imputable, so re-drawing C' from the
/// design and recomputing the statistic gives the reference distribution.
pub fn global_fisher_test<R: Rng + ?Sized>(
    outcomes: &[Real],
    c_obs: &Assignment,
    population: &Population,
    c0: &Assignment,
    resamples: usize,
    rng: &mut R,
    statistic: GlobalStatistic,
) -> Result<TestResult> {
    let h_obs = exposure_map(population, c_obs)?;
    let t_obs = global_statistic(outcomes, &h_obs, population, statistic);
    let mut hits = 0usize;
    let mut degenerate = true;
    for _ in 0..resamples {
        let c_new = randomize(c0, population, rng)?;
        let h_new = exposure_map(population, &c_new)?;
        let t = global_statistic(outcomes, &h_new, population, statistic);
        if t >= t_obs {
            hits += 1;
        }
        if t != t_obs {
            degenerate = false;
        }
    }
    Ok(TestResult {
        statistic_observed: t_obs,
        p_value: (1.0 + hits as Real) / (resamples as Real + 1.0),
        n_resamples: resamples,
        focal_counts: BTreeMap::new(),
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stratum_mean_basics() {
        let pop = Population::from_attributes(vec![0, 0, 0]).unwrap();
        let exps = vec!["k", "k", "h"];
        assert_eq!(stratum_mean(&[1.0, 3.0, 9.0], &exps, &pop, 0, &"k").unwrap(), 2.0);
        assert_eq!(stratum_mean(&[5.0, 0.0, 0.0], &[ "k", "h", "h"], &pop, 0, &"k").unwrap(), 5.0);
        assert!(stratum_mean(&[1.0, 2.0, 3.0], &exps, &pop, 0, &"missing").is_err());
    }

    #[test]
    fn contrast_hand_computed() {
        // Single stratum, Y(k) = (1,3), Y(k') = (0,2): tau = 1, var = 2/2 + 2/2 = 2.
        let pop = Population::from_attributes(vec![0, 0, 0, 0]).unwrap();
        let exps = vec!["k", "k", "p", "p"];
        let est = estimate_contrast(&[1.0, 3.0, 0.0, 2.0], &exps, &pop, &"k", &"p", 0.05).unwrap();
        assert!((est.pooled_estimate - 1.0).abs() < 1e-12);
        assert!((est.pooled_variance - 2.0).abs() < 1e-12);
        assert!(est.ci_lower <= est.pooled_estimate && est.pooled_estimate <= est.ci_upper);
        let half = 1.959963984540054 * 2.0f64.sqrt();
        assert!((est.ci_upper - (1.0 + half)).abs() < 1e-7);
    }

    #[test]
    fn identical_cells_give_zero() {
        let pop = Population::from_attributes(vec![0, 0, 0, 0]).unwrap();
        let exps = vec!["k", "k", "k", "k"];
        let est = estimate_contrast(&[1.0, 2.0, 3.0, 4.0], &exps, &pop, &"k", &"k", 0.05).unwrap();
        assert_eq!(est.pooled_estimate, 0.0);
    }

    #[test]
    fn constant_outcomes_give_exact_zero_estimate_and_variance() {
        let pop = Population::from_attributes(vec![0, 0, 0, 0]).unwrap();
        let exps = vec!["k", "k", "p", "p"];
        let est = estimate_contrast(&[2.0, 2.0, 2.0, 2.0], &exps, &pop, &"k", &"p", 0.05).unwrap();
        assert_eq!(est.pooled_estimate, 0.0);
        assert_eq!(est.pooled_variance, 0.0);
    }

    #[test]
    fn small_cells_are_excluded_with_report() {
        let pop = Population::from_attributes(vec![0, 0, 0, 0, 1, 1, 1]).unwrap();
        let exps = vec!["k", "k", "p", "p", "k", "p", "p"];
        let ys = vec![1.0, 3.0, 0.0, 2.0, 9.0, 9.0, 9.0];
        let est = estimate_contrast(&ys, &exps, &pop, &"k", &"p", 0.05).unwrap();
        assert_eq!(est.excluded_strata, vec![1]);
        // Weights renormalize over the single included stratum.
        assert!((est.pooled_estimate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_estimable_stratum_errors() {
        let pop = Population::from_attributes(vec![0, 0]).unwrap();
        let exps = vec!["k", "p"];
        assert!(matches!(
            estimate_contrast(&[1.0, 2.0], &exps, &pop, &"k", &"p", 0.05),
            Err(Error::NoEstimableStratum)
        ));
    }

    #[test]
    fn focal_set_cases() {
        let exps = vec!["k", "p", "h"];
        assert_eq!(focal_set(&exps, &["k", "p", "h"]), vec![1, 1, 1]);
        assert_eq!(focal_set::<&str>(&exps, &[]), vec![0, 0, 0]);
        assert_eq!(focal_set(&exps, &["k", "p"]), vec![1, 1, 0]);
    }

    #[test]
    fn zero_power_configuration_is_degenerate_with_p_one() {
        // k-focal units all attribute 0, k'-focal all attribute 1.
        let pop = Population::from_attributes(vec![0, 0, 1, 1]).unwrap();
        let exps = vec!["k", "k", "p", "p"];
        let ys = vec![5.0, 1.0, 0.0, -2.0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let res = conditional_fisher_test(
            &ys,
            &exps,
            &pop,
            &"k",
            &"p",
            ResamplingPlan::MonteCarlo { resamples: 200 },
            &mut rng,
            Sidedness::TwoSided,
        )
        .unwrap();
        assert!(res.degenerate);
        assert_eq!(res.p_value, 1.0);
    }

    #[test]
    fn missing_focal_exposure_is_an_error() {
        let pop = Population::from_attributes(vec![0, 0]).unwrap();
        let exps = vec!["k", "k"];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let err = conditional_fisher_test(
            &[1.0, 2.0],
            &exps,
            &pop,
            &"k",
            &"p",
            ResamplingPlan::MonteCarlo { resamples: 10 },
            &mut rng,
            Sidedness::TwoSided,
        );
        assert!(matches!(err, Err(Error::UndefinedStatistic { .. })));
    }

    #[test]
    fn monte_carlo_p_is_add_one_bounded() {
        let pop = Population::from_attributes(vec![0, 0, 0, 0]).unwrap();
        let exps = vec!["k", "k", "p", "p"];
        let ys = vec![10.0, 9.0, 0.0, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = 99;
        let res = conditional_fisher_test(
            &ys,
            &exps,
            &pop,
            &"k",
            &"p",
            ResamplingPlan::MonteCarlo { resamples: r },
            &mut rng,
            Sidedness::Greater,
        )
        .unwrap();
        assert!(res.p_value >= 1.0 / (r as f64 + 1.0));
        assert!(res.p_value <= 1.0);
    }

    #[test]
    fn exhaustive_matches_independent_enumeration() {
        // N=6 toy with enumerable stabilizer; oracle enumerates the orbit of
        // the exposure vector directly (independent of the library path).
        let pop = Population::from_attributes(vec![0, 0, 0, 1, 1, 1]).unwrap();
        let exps = vec!["k", "p", "x", "k", "p", "x"];
        let ys = vec![3.0, -1.0, 0.0, 2.0, 0.5, 0.0];
        let focal = focal_set(&exps, &["k", "p"]);

        // Oracle: all joint within-stratum arrangements of focal exposures.
        // Strata of (A, U): {0,1}, {2}, {3,4}, {5}; enumerate swaps.
        let mut stats = Vec::new();
        for s01 in [false, true] {
            for s34 in [false, true] {
                let mut h = exps.clone();
                if s01 {
                    h.swap(0, 1);
                }
                if s34 {
                    h.swap(3, 4);
                }
                let t = focal_diff_in_means(&ys, &h, &focal, &"k", &"p").unwrap();
                stats.push(t);
            }
        }
        let t_obs = focal_diff_in_means(&ys, &exps, &focal, &"k", &"p").unwrap();
        let exact_p =
            stats.iter().filter(|&&t| t >= t_obs).count() as f64 / stats.len() as f64;

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let res = conditional_fisher_test(
            &ys,
            &exps,
            &pop,
            &"k",
            &"p",
            ResamplingPlan::Exhaustive { cap: 10_000 },
            &mut rng,
            Sidedness::Greater,
        )
        .unwrap();
        assert_eq!(res.n_resamples, 4);
        assert_eq!(res.p_value, exact_p);
    }

    #[test]
    fn global_test_constant_outcomes_p_one() {
        let pop = Population::from_attributes(vec![0, 1, 0, 1]).unwrap();
        let c0 = Assignment::new(vec![1, 1, 2, 2], vec![1, 0, 1, 0], 2).unwrap();
        let ys = vec![2.0, 2.0, 2.0, 2.0];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let res =
            global_fisher_test(&ys, &c0, &pop, &c0, 100, &mut rng, GlobalStatistic::CellMeanRange)
                .unwrap();
        assert_eq!(res.p_value, 1.0);
        assert!(res.degenerate);
    }

    #[test]
    fn p_value_decreases_in_observed_statistic() {
        // Same resample set (frozen statistics): larger T_obs -> weakly smaller p.
        let stats = [0.5, -0.2, 1.0, 0.1, 0.7];
        let p = |t_obs: f64| {
            let hits = stats.iter().filter(|&&t| t >= t_obs).count();
            (1.0 + hits as f64) / (stats.len() as f64 + 1.0)
        };
        let mut last = f64::INFINITY;
        for t in [-1.0, 0.0, 0.3, 0.8, 2.0] {
            let cur = p(t);
            assert!(cur <= last);
            last = cur;
        }
    }
}
