//! End-to-end acceptance suite. Each `criterion_*` test prints one PASS line
//! on success (and the runner itself reports ok/FAILED per criterion).

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use scrd::design::{conditional_resample, randomize};
use scrd::exposure::{exposure_map, exposure_quadruple, exposure_table, ExposureQuad, QuadMode};
use scrd::harness::{run_power_simulation, OutcomeTable, SimulationConfig, Strategy};
use scrd::inference::{
    conditional_fisher_test, estimate_contrast, focal_set, ResamplingPlan, Sidedness,
};
use scrd::optimal_design::{
    build_program, enumerate_compositions, optimal_init, random_init, round_solution, solve_lp,
};
use scrd::population::{Assignment, Population};
use scrd::rngutil::stream;
use scrd::stats::{chi_square_sf, contingency_chi_square, ks_distance_normal};
use scrd::symmetry::{
    apply_permutation, apply_to_assignment, enumerate_stabilizer, sample_uniform_stabilizer,
    Permutation, StabilizerSpec,
};
use scrd::Real;

fn k_quad() -> ExposureQuad {
    ExposureQuad::new(1, 1, 1, 1)
}

fn kp_quad() -> ExposureQuad {
    ExposureQuad::new(2, 1, 1, 0)
}

/// Homogeneity p-value of the per-unit exposure marginals within one stratum:
/// rows are the stratum's units, columns the exposure levels.
fn stratum_homogeneity_p(
    units: &[usize],
    levels: &[ExposureQuad],
    counts: &[BTreeMap<ExposureQuad, usize>],
) -> f64 {
    let table: Vec<Vec<u64>> = units
        .iter()
        .map(|&i| {
            levels
                .iter()
                .map(|h| counts[i].get(h).copied().unwrap_or(0) as u64)
                .collect()
        })
        .collect();
    let (stat, dof) = contingency_chi_square(&table);
    if dof == 0.0 {
        1.0
    } else {
        chi_square_sf(stat, dof)
    }
}

fn marginal_p_values<F>(
    population: &Population,
    c0: &Assignment,
    draws: usize,
    mut next: F,
) -> (bool, Vec<f64>)
where
    F: FnMut(&Assignment, &Population) -> Assignment,
{
    let n = population.n_units();
    let expected = exposure_table(
        population,
        &exposure_quadruple(population, c0, QuadMode::Full).unwrap(),
    )
    .unwrap();
    let mut per_unit: Vec<BTreeMap<ExposureQuad, usize>> = vec![BTreeMap::new(); n];
    let mut table_constant = true;
    for _ in 0..draws {
        let c = next(c0, population);
        let quads = exposure_quadruple(population, &c, QuadMode::Full).unwrap();
        if exposure_table(population, &quads).unwrap() != expected {
            table_constant = false;
        }
        for (i, q) in quads.iter().enumerate() {
            *per_unit[i].entry(*q).or_insert(0) += 1;
        }
    }
    let mut ps = Vec::new();
    for &a in population.attr_alphabet() {
        let units: Vec<usize> = (0..n).filter(|&i| population.attribute(i) == a).collect();
        let levels: Vec<ExposureQuad> = expected.counts[&a].keys().copied().collect();
        ps.push(stratum_homogeneity_p(&units, &levels, &per_unit));
    }
    (table_constant, ps)
}

#[test]
fn criterion_1_count_invariance_and_marginal_uniformity() {
    let population = Population::new(
        (0..12).map(|i| u8::from(i >= 6)).collect(),
        vec![0, 1],
    )
    .unwrap();
    let mut rng = stream(11, &[1]);
    let c0 = random_init(&population, 3, 6, &mut rng).unwrap();
    let draws = 100_000;

    let mut rng_pos = stream(11, &[2]);
    let (constant, ps) = marginal_p_values(&population, &c0, draws, |c0, pop| {
        randomize(c0, pop, &mut rng_pos).unwrap()
    });
    assert!(constant, "exposure count table must be identical across draws");
    assert!(
        ps.iter().all(|&p| p > 1e-3),
        "per-stratum marginal homogeneity rejected: p = {ps:?}"
    );

    // Negative control: a sampler that only shuffles the first half of each
    // stratum (the rest of the units never move).
    let mut rng_neg = stream(11, &[3]);
    let (_, ps_biased) = marginal_p_values(&population, &c0, draws, |c0, pop| {
        let mut forward: Vec<usize> = (0..pop.n_units()).collect();
        for &a in pop.attr_alphabet() {
            let units: Vec<usize> =
                (0..pop.n_units()).filter(|&i| pop.attribute(i) == a).collect();
            let half = &units[..units.len() / 2];
            for j in (1..half.len()).rev() {
                let l = rand::Rng::gen_range(&mut rng_neg, 0..=j);
                forward.swap(half[j], half[l]);
            }
        }
        let pi = Permutation::from_forward(forward).unwrap();
        apply_to_assignment(&pi, c0).unwrap()
    });
    assert!(
        ps_biased.iter().any(|&p| p <= 1e-3),
        "biased sampler should fail the homogeneity check: p = {ps_biased:?}"
    );
    println!("criterion 1: PASS (p = {ps:?}; biased control p = {ps_biased:?})");
}

#[test]
fn criterion_2_conditional_resampling_matches_enumeration() {
    // N=6 toy: two attribute strata, exposures chosen so the (A, U) strata
    // are {0,1}, {2}, {3,4}, {5} and the stabilizer has exactly 4 elements.
    let population = Population::from_attributes(vec![0, 0, 0, 1, 1, 1]).unwrap();
    let exps = vec!["k", "p", "x", "k", "p", "x"];
    let ys = vec![3.0, -1.0, 0.0, 2.0, 0.5, 0.0];
    let focal = focal_set(&exps, &["k", "p"]);

    // Exact distribution: enumerate the stabilizer of (A, U) and act on the
    // exposure vector.
    let spec = StabilizerSpec::from_pairs(population.attributes(), &focal);
    let elements = enumerate_stabilizer(&spec, 1_000).unwrap();
    let mut exact: BTreeMap<Vec<&str>, f64> = BTreeMap::new();
    for pi in &elements {
        *exact
            .entry(apply_permutation(pi, &exps).unwrap())
            .or_insert(0.0) += 1.0 / elements.len() as f64;
    }
    assert_eq!(elements.len(), 4);

    let draws = 100_000;
    let mut rng = stream(22, &[1]);
    let mut empirical: BTreeMap<Vec<&str>, f64> = BTreeMap::new();
    for _ in 0..draws {
        let h = conditional_resample(&exps, &focal, &population, &mut rng).unwrap();
        *empirical.entry(h).or_insert(0.0) += 1.0 / draws as f64;
    }
    let mut tv = 0.0f64;
    for (vec, p) in &exact {
        tv += (p - empirical.get(vec).copied().unwrap_or(0.0)).abs();
    }
    for (vec, p) in &empirical {
        if !exact.contains_key(vec) {
            tv += p;
        }
    }
    tv /= 2.0;
    assert!(tv < 0.01, "total variation distance {tv} too large");

    // Exact p-value oracle: the four stabilizer elements are the identity
    // and the within-stratum swaps (0,1) and (3,4).
    let diff = |h: &[&str]| {
        let (mut sk, mut nk, mut sp, mut np) = (0.0, 0, 0.0, 0);
        for i in 0..h.len() {
            if focal[i] == 0 {
                continue;
            }
            if h[i] == "k" {
                sk += ys[i];
                nk += 1;
            } else if h[i] == "p" {
                sp += ys[i];
                np += 1;
            }
        }
        sk / nk as f64 - sp / np as f64
    };
    let t_obs = diff(&exps);
    let mut hits = 0;
    for s01 in [false, true] {
        for s34 in [false, true] {
            let mut h = exps.clone();
            if s01 {
                h.swap(0, 1);
            }
            if s34 {
                h.swap(3, 4);
            }
            if diff(&h) >= t_obs {
                hits += 1;
            }
        }
    }
    let exact_p = hits as f64 / 4.0;

    let mut rng2 = stream(22, &[2]);
    let res = conditional_fisher_test(
        &ys,
        &exps,
        &population,
        &"k",
        &"p",
        ResamplingPlan::Exhaustive { cap: 1_000 },
        &mut rng2,
        Sidedness::Greater,
    )
    .unwrap();
    assert_eq!(res.p_value, exact_p, "exhaustive p must equal the enumerated p");
    println!("criterion 2: PASS (TV = {tv:.4}, exact p = {exact_p})");
}

fn power_config() -> SimulationConfig {
    let mut config = SimulationConfig::desk_scale();
    config.seed = 77;
    config
}

#[test]
fn criterion_3_validity_under_the_null() {
    let mut config = power_config();
    config.group_sizes = vec![4];
    config.tau_grid = vec![0.0];
    config.strategies = vec![Strategy::Optimal];
    config.replications = 2000;
    config.resamples = 500;
    let table = run_power_simulation(&config).unwrap();
    let rate = table.rows[0].power;
    let bound = 0.05 + 3.0 * (0.05f64 * 0.95 / 2000.0).sqrt();
    assert!(
        rate <= bound,
        "null rejection rate {rate:.4} exceeds {bound:.4}"
    );
    println!("criterion 3: PASS (null rejection rate {rate:.4} <= {bound:.4})");
}

#[test]
fn criterion_4_power_separation_across_strategies() {
    let mut config = power_config();
    config.group_sizes = vec![3, 6];
    config.tau_grid = vec![1.0];
    config.strategies = vec![
        Strategy::Optimal,
        Strategy::Rejection { m: 10 },
        Strategy::Random,
    ];
    config.replications = 500;
    config.resamples = 500;
    let table = run_power_simulation(&config).unwrap();
    let power = |m: usize, s: &str| {
        table
            .rows
            .iter()
            .find(|r| r.group_size == m && r.strategy == s)
            .map(|r| r.power)
            .unwrap()
    };
    let (opt6, rej6, rnd6) = (power(6, "optimal"), power(6, "rejection_10"), power(6, "random"));
    assert!(opt6 >= 0.90, "optimal power at m=6 was {opt6:.3}");
    assert!(rej6 <= 0.45, "rejection(10) power at m=6 was {rej6:.3}");
    assert!(rnd6 <= 0.45, "random power at m=6 was {rnd6:.3}");
    let (opt3, rej3, rnd3) = (power(3, "optimal"), power(3, "rejection_10"), power(3, "random"));
    assert!(
        opt3 >= rej3 && opt3 >= rnd3,
        "optimal must dominate at m=3: {opt3:.3} vs {rej3:.3}/{rnd3:.3}"
    );
    println!(
        "criterion 4: PASS (m=6: opt {opt6:.3}, rej {rej6:.3}, rnd {rnd6:.3}; m=3: opt {opt3:.3}, rej {rej3:.3}, rnd {rnd3:.3})"
    );
}

#[test]
fn criterion_5_estimation_bias_coverage_normality() {
    let population = Population::new(
        (0..300).map(|i| u8::from(i >= 150)).collect(),
        vec![0, 1],
    )
    .unwrap();
    let (k, kp) = (k_quad(), kp_quad());
    let mut rng = stream(55, &[1]);
    let (c0, _) = optimal_init(&population, 4, &k, &kp, 1.2, None, &mut rng).unwrap();

    // Fixed potential-outcome table; truth computed from it directly.
    let mut orng = stream(55, &[2]);
    let table = OutcomeTable::generate(300, 1.0, kp, &mut orng);
    let truth = table.true_contrast(&k, &kp);
    assert!((truth + 1.0).abs() < 1e-12);

    {
        let quads = exposure_quadruple(&population, &c0, QuadMode::Full).unwrap();
        let ys = table.observe(&quads);
        let est = estimate_contrast(&ys, &quads, &population, &k, &kp, 0.05).unwrap();
        for (a, s) in &est.per_stratum {
            println!(
                "stratum {a}: n_k = {}, n_kp = {}, size = {}",
                s.n_k, s.n_k_prime, s.stratum_size
            );
        }
        println!("excluded: {:?}", est.excluded_strata);
    }

    let draws = 10_000usize;
    let results: Vec<(Real, Real)> = (0..draws)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream(55, &[3, rep as u64]);
            let c = randomize(&c0, &population, &mut rng).unwrap();
            let quads = exposure_quadruple(&population, &c, QuadMode::Full).unwrap();
            let ys = table.observe(&quads);
            let est = estimate_contrast(&ys, &quads, &population, &k, &kp, 0.05).unwrap();
            (est.pooled_estimate, est.pooled_variance)
        })
        .collect();

    let n = draws as Real;
    let mean = results.iter().map(|r| r.0).sum::<Real>() / n;
    let sd = (results.iter().map(|r| (r.0 - mean).powi(2)).sum::<Real>() / (n - 1.0)).sqrt();
    let mc_se = sd / n.sqrt();
    assert!(
        (mean - truth).abs() <= 3.0 * mc_se,
        "bias {:.5} exceeds 3 MC-SE {:.5}",
        mean - truth,
        3.0 * mc_se
    );

    let z = 1.959963984540054;
    let coverage = results
        .iter()
        .filter(|(e, v)| (e - z * v.sqrt()..=e + z * v.sqrt()).contains(&truth))
        .count() as Real
        / n;
    assert!(coverage >= 0.94, "coverage {coverage:.4} below 0.94");

    let standardized: Vec<Real> = results
        .iter()
        .map(|(e, v)| (e - truth) / v.sqrt())
        .collect();
    let ks = ks_distance_normal(&standardized);
    assert!(ks < 0.05, "KS distance {ks:.4} too large");
    println!(
        "criterion 5: PASS (bias {:.5}, coverage {coverage:.4}, KS {ks:.4})",
        mean - truth
    );
}

#[test]
fn criterion_6_exposure_map_equivariance() {
    let population = Population::new(
        (0..30).map(|i| u8::from(i >= 15)).collect(),
        vec![0, 1],
    )
    .unwrap();
    let spec = StabilizerSpec::from_codes(population.attributes());
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    for _ in 0..1_000 {
        let c = random_init(&population, 3, 15, &mut rng).unwrap();
        let pi = sample_uniform_stabilizer(&spec, &mut rng);
        let lhs = exposure_map(&population, &apply_to_assignment(&pi, &c).unwrap()).unwrap();
        let rhs = apply_permutation(&pi, &exposure_map(&population, &c).unwrap()).unwrap();
        assert_eq!(lhs, rhs, "exposure map must commute with the group action");
    }
    println!("criterion 6: PASS (1000 exact equivariance checks)");
}

#[test]
fn criterion_7_lp_matches_integer_enumeration() {
    let population = Population::new(
        (0..12).map(|i| u8::from(i >= 6)).collect(),
        vec![0, 1],
    )
    .unwrap();
    let (k, kp) = (k_quad(), kp_quad());
    let comps = enumerate_compositions(3, &[0, 1], &[0, 1], &k, &kp).unwrap();
    let program = build_program(comps, &population, 1.2, None).unwrap();
    let solution = solve_lp(&program).unwrap();

    // Brute-force ILP oracle: at most 4 groups of size 3 fit in N = 12, so
    // search all count vectors with sum <= 4 by depth-first enumeration.
    let nvars = program.objective.len();
    let feasible = |counts: &[usize]| {
        program.rows.iter().all(|row| {
            row.coeffs
                .iter()
                .zip(counts)
                .map(|(c, &n)| c * n as Real)
                .sum::<Real>()
                <= row.rhs + 1e-9
        })
    };
    let mut best = 0.0f64;
    let mut counts = vec![0usize; nvars];
    fn dfs(
        var: usize,
        remaining: usize,
        counts: &mut Vec<usize>,
        best: &mut f64,
        program_obj: &[Real],
        feasible: &dyn Fn(&[usize]) -> bool,
    ) {
        if var == counts.len() {
            if feasible(counts) {
                let obj: f64 = program_obj
                    .iter()
                    .zip(counts.iter())
                    .map(|(c, &n)| c * n as f64)
                    .sum();
                if obj > *best {
                    *best = obj;
                }
            }
            return;
        }
        for n in 0..=remaining {
            counts[var] = n;
            dfs(var + 1, remaining - n, counts, best, program_obj, feasible);
        }
        counts[var] = 0;
    }
    dfs(0, 4, &mut counts, &mut best, &program.objective, &feasible);

    let rounded = round_solution(&solution, &program).unwrap();
    let rounded_obj: f64 = program
        .objective
        .iter()
        .zip(&rounded)
        .map(|(c, &n)| c * n as f64)
        .sum();
    // LP relaxation bounds the ILP from above; flooring bounds it from below.
    assert!(solution.objective >= best - 1e-6, "LP below ILP optimum");
    assert!(rounded_obj <= best + 1e-6, "floored objective above ILP optimum");
    for row in &program.rows {
        let lhs: f64 = row
            .coeffs
            .iter()
            .zip(&rounded)
            .map(|(c, &n)| c * n as f64)
            .sum();
        assert!(lhs <= row.rhs + 1e-6, "rounded solution violates '{}'", row.label);
    }
    println!(
        "criterion 7: PASS (LP {:.4} >= ILP {best:.4} >= floor {rounded_obj:.4})",
        solution.objective
    );
}

#[test]
fn criterion_8_disjoint_focal_strata_are_degenerate() {
    // k-exposed focal units sit entirely in attribute stratum 0 and
    // k'-exposed ones entirely in stratum 1, so no conditional resample can
    // move the statistic.
    let population = Population::from_attributes(vec![0, 1, 0, 1, 1, 1]).unwrap();
    let assignment = Assignment::new(vec![1, 1, 1, 2, 2, 2], vec![1, 1, 0, 0, 1, 0], 3).unwrap();
    let quads = exposure_quadruple(&population, &assignment, QuadMode::Full).unwrap();
    let (k, kp) = (k_quad(), kp_quad());
    assert_eq!(quads[0], k);
    assert_eq!(quads[3], kp);
    assert_eq!(quads[5], kp);
    let ys = vec![1.0, 0.2, -0.3, 2.0, 0.5, -1.0];
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let res = conditional_fisher_test(
            &ys,
            &quads,
            &population,
            &k,
            &kp,
            ResamplingPlan::MonteCarlo { resamples: 300 },
            &mut rng,
            Sidedness::TwoSided,
        )
        .unwrap();
        assert!(res.degenerate, "run {seed} not flagged degenerate");
        assert_eq!(res.p_value, 1.0, "run {seed} p-value != 1");
    }
    println!("criterion 8: PASS (p = 1 with degenerate flag on 20 runs)");
}
