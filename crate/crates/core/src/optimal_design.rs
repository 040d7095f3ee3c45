//! Construction of the initial assignment C0: group-composition enumeration,
//! the LP relaxation of the balance-constrained integer program, floor
//! rounding and realization, plus random and rejection-sampling baselines.

use rand::Rng;

use crate::error::{Error, Result};
use crate::exposure::{exposure_quadruple, ExposureQuad, QuadMode};
use crate::population::{Assignment, Population};
use crate::simplex::{LpSolution, LpStatus, SimplexSolver};
use crate::{Attr, Real, Treat};

/// A multiset of m (attribute, treatment) member types, with the statistics
/// the design program needs precomputed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupComposition {
    /// (member type, multiplicity); types are the binary (a, w) pairs.
    pub members: Vec<((Attr, Treat), usize)>,
    pub group_size: usize,
    /// Units in the group whose within-group exposure is the first target.
    pub m_k: usize,
    /// Units whose within-group exposure is the second target.
    pub m_k_prime: usize,
    /// Attribute counts c_a indexed by the binary attribute.
    pub attr_counts: [usize; 2],
    /// Number of treated members (used by the optional budget row).
    pub treated_count: usize,
    /// Attribute flag of the k-exposed members (0 when m_k = 0).
    pub a1_flag: usize,
    /// Attribute flag of the k'-exposed members (0 when m_k_prime = 0).
    pub a2_flag: usize,
}

impl GroupComposition {
    /// Within-group exposure of a member of type (a, w): the other m-1
    /// members are its peers.
    fn member_exposure(totals: (u32, u32, u32), a: Attr, w: Treat) -> ExposureQuad {
        let (ta, tw, taw) = totals;
        ExposureQuad::new(
            ta - u32::from(a),
            tw - u32::from(w),
            taw - u32::from(a) * u32::from(w),
            w,
        )
    }

    fn from_type_counts(
        counts: [usize; 4],
        m: usize,
        k: &ExposureQuad,
        k_prime: &ExposureQuad,
    ) -> Self {
        // Type order: (0,0), (0,1), (1,0), (1,1).
        let types: [(Attr, Treat); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];
        let totals = (
            (counts[2] + counts[3]) as u32,
            (counts[1] + counts[3]) as u32,
            counts[3] as u32,
        );
        let mut m_k = 0;
        let mut m_k_prime = 0;
        let mut a1_flag = 0;
        let mut a2_flag = 0;
        for (idx, &(a, w)) in types.iter().enumerate() {
            if counts[idx] == 0 {
                continue;
            }
            let exp = Self::member_exposure(totals, a, w);
            if exp == *k {
                m_k += counts[idx];
                a1_flag = a as usize;
            }
            if exp == *k_prime {
                m_k_prime += counts[idx];
                a2_flag = a as usize;
            }
        }
        GroupComposition {
            members: types
                .iter()
                .zip(counts)
                .filter(|(_, c)| *c > 0)
                .map(|(&t, c)| (t, c))
                .collect(),
            group_size: m,
            m_k,
            m_k_prime,
            attr_counts: [counts[0] + counts[1], counts[2] + counts[3]],
            treated_count: counts[1] + counts[3],
            a1_flag,
            a2_flag,
        }
    }
}

/// All size-m multisets over binary (attribute, treatment) member types that
/// contain at least one member exposed to k or k' within the group.
pub fn enumerate_compositions(
    m: usize,
    attr_alphabet: &[Attr],
    treat_alphabet: &[Treat],
    k: &ExposureQuad,
    k_prime: &ExposureQuad,
) -> Result<Vec<GroupComposition>> {
    if m < 2 {
        return Err(Error::Config("group size must be at least 2".into()));
    }
    if attr_alphabet.iter().any(|&a| a > 1) || treat_alphabet.iter().any(|&w| w > 1) {
        return Err(Error::NonBinaryAlphabet(
            "optimal design supports binary attribute and treatment alphabets",
        ));
    }
    let mut out = Vec::new();
    // Stars and bars over the four member types.
    for c00 in 0..=m {
        for c01 in 0..=(m - c00) {
            for c10 in 0..=(m - c00 - c01) {
                let c11 = m - c00 - c01 - c10;
                let comp = GroupComposition::from_type_counts([c00, c01, c10, c11], m, k, k_prime);
                if comp.m_k + comp.m_k_prime > 0 {
                    out.push(comp);
                }
            }
        }
    }
    Ok(out)
}

/// One `coeffs . n <= rhs` row of the design program, with a label for
/// reporting and the rounded-feasibility check.
#[derive(Debug, Clone)]
pub struct ProgramRow {
    pub label: String,
    pub coeffs: Vec<Real>,
    pub rhs: Real,
}

/// The LP relaxation instance: one variable n(G) per composition.
#[derive(Debug, Clone)]
pub struct DesignProgram {
    pub compositions: Vec<GroupComposition>,
    pub objective: Vec<Real>,
    pub rows: Vec<ProgramRow>,
    pub eta: Real,
}

/// Assemble the program: attribute-capacity rows, the four within-attribute
/// balance rows with multiplier η, and an optional total-treated budget.
pub fn build_program(
    compositions: Vec<GroupComposition>,
    population: &Population,
    eta: Real,
    treated_budget: Option<usize>,
) -> Result<DesignProgram> {
    if eta <= 1.0 {
        return Err(Error::InvalidEta(eta));
    }
    let objective: Vec<Real> = compositions
        .iter()
        .map(|g| (g.m_k + g.m_k_prime) as Real)
        .collect();

    let mut rows = Vec::new();
    for &a in population.attr_alphabet() {
        rows.push(ProgramRow {
            label: format!("capacity_attr_{a}"),
            coeffs: compositions
                .iter()
                .map(|g| g.attr_counts[a as usize] as Real)
                .collect(),
            rhs: population.stratum_size(a) as Real,
        });
    }
    // Balance rows: within each attribute a, the two focal cell counts
    // n'_{a,k} = Σ n·m_k·[k-units have attribute a] and n'_{a,k'} must stay
    // within a factor η of each other, written as lhs - η·rhs_side <= 0.
    let flag = |f: usize| f as Real;
    #[allow(clippy::type_complexity)]
    let balance: [(&str, Box<dyn Fn(&GroupComposition) -> Real>); 4] = [
        (
            "balance_k_attr1_vs_kprime_attr1",
            Box::new(move |g| g.m_k as Real * flag(g.a1_flag) - eta * g.m_k_prime as Real * flag(g.a2_flag)),
        ),
        (
            "balance_kprime_attr1_vs_k_attr1",
            Box::new(move |g| g.m_k_prime as Real * flag(g.a2_flag) - eta * g.m_k as Real * flag(g.a1_flag)),
        ),
        (
            "balance_k_attr0_vs_kprime_attr0",
            Box::new(move |g| {
                g.m_k as Real * (1.0 - flag(g.a1_flag)) - eta * g.m_k_prime as Real * (1.0 - flag(g.a2_flag))
            }),
        ),
        (
            "balance_kprime_attr0_vs_k_attr0",
            Box::new(move |g| {
                g.m_k_prime as Real * (1.0 - flag(g.a2_flag)) - eta * g.m_k as Real * (1.0 - flag(g.a1_flag))
            }),
        ),
    ];
    for (label, coeff) in balance {
        rows.push(ProgramRow {
            label: label.to_string(),
            coeffs: compositions.iter().map(coeff).collect(),
            rhs: 0.0,
        });
    }
    if let Some(budget) = treated_budget {
        rows.push(ProgramRow {
            label: "treated_budget".to_string(),
            coeffs: compositions.iter().map(|g| g.treated_count as Real).collect(),
            rhs: budget as Real,
        });
    }
    Ok(DesignProgram {
        compositions,
        objective,
        rows,
        eta,
    })
}

/// Solve the LP relaxation with the dense two-phase simplex.
pub fn solve_lp(program: &DesignProgram) -> Result<LpSolution<Real>> {
    if program.compositions.is_empty() {
        return Ok(LpSolution {
            status: LpStatus::Optimal,
            objective: 0.0,
            values: vec![],
        });
    }
    let mut lp = SimplexSolver::new(program.objective.clone());
    for row in &program.rows {
        lp.add_row(row.coeffs.clone(), row.rhs);
    }
    let sol = lp.solve();
    match sol.status {
        LpStatus::Optimal => Ok(sol),
        LpStatus::Infeasible => Err(Error::LpStatus("infeasible")),
        LpStatus::Unbounded => Err(Error::LpStatus("unbounded")),
    }
}

/// Integer counts after floor rounding, repaired to satisfy every row.
///
/// Flooring keeps the capacity rows feasible (non-negative coefficients) but
/// can break a balance row, whose negative coefficients lose fractional mass
/// on the denominator side. The repair loop decrements, in the most violated
/// row, the positive-coefficient variable with the smallest objective value;
/// the total count strictly decreases each step and zero is feasible, so the
/// loop terminates at a feasible point.
pub fn round_solution(solution: &LpSolution<Real>, program: &DesignProgram) -> Result<Vec<usize>> {
    let mut counts: Vec<usize> = solution
        .values
        .iter()
        // Tolerate slight LP negativity/overshoot before flooring.
        .map(|&v| v.max(0.0).floor() as usize)
        .collect();
    loop {
        let violation = program
            .rows
            .iter()
            .map(|row| {
                let lhs: Real = row
                    .coeffs
                    .iter()
                    .zip(&counts)
                    .map(|(&c, &n)| c * n as Real)
                    .sum();
                (row, lhs - row.rhs)
            })
            .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite row slack"));
        let Some((row, excess)) = violation else {
            return Ok(counts);
        };
        if excess <= 1e-6 {
            return Ok(counts);
        }
        let victim = (0..counts.len())
            .filter(|&j| counts[j] > 0 && row.coeffs[j] > 0.0)
            .min_by(|&a, &b| {
                program.objective[a]
                    .partial_cmp(&program.objective[b])
                    .expect("finite objective")
            })
            .ok_or(Error::LpStatus("violated row has no positive support"))?;
        counts[victim] -= 1;
    }
}

/// Summary of a realized design, emitted as the CLI sidecar report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DesignReport {
    pub lp_objective: Real,
    pub integer_objective: Real,
    pub eta: Real,
    pub selected: Vec<SelectedComposition>,
    pub leftover_units: usize,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SelectedComposition {
    pub members: Vec<(Attr, Treat, usize)>,
    pub lp_value: Real,
    pub count: usize,
    pub m_k: usize,
    pub m_k_prime: usize,
}

/// Floor the LP solution and realize an initial assignment.
///
/// Consumes matching units from the population per selected composition,
/// then fills the remaining K - Σ⌊n(G)⌋ groups with leftover units, sorted
/// by attribute, all untreated. Unit consumption order is shuffled by the
/// caller's RNG so realizations are reproducible given the seed.
pub fn round_and_realize<R: Rng + ?Sized>(
    solution: &LpSolution<Real>,
    program: &DesignProgram,
    population: &Population,
    group_size: usize,
    rng: &mut R,
) -> Result<(Assignment, DesignReport)> {
    let n = population.n_units();
    if !n.is_multiple_of(group_size) {
        return Err(Error::Config(format!(
            "N = {n} is not divisible by m = {group_size}"
        )));
    }
    let n_groups = n / group_size;
    let counts = round_solution(solution, program)?;

    // Per-attribute pools, shuffled once for reproducible tie-breaking.
    let mut pool: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (&a, units) in population.strata_index() {
        let mut units = units.clone();
        for i in (1..units.len()).rev() {
            let j = rng.gen_range(0..=i);
            units.swap(i, j);
        }
        pool[a as usize] = units;
    }

    let mut groups = vec![0usize; n];
    let mut treatments = vec![0 as Treat; n];
    let mut next_group = 1usize;
    let mut selected = Vec::new();
    for (idx, (&count, comp)) in counts.iter().zip(&program.compositions).enumerate() {
        if count == 0 {
            continue;
        }
        for _ in 0..count {
            for &((a, w), mult) in &comp.members {
                for _ in 0..mult {
                    let unit = pool[a as usize].pop().ok_or({
                        Error::LpStatus("capacity rows violated: attribute pool exhausted")
                    })?;
                    groups[unit] = next_group;
                    treatments[unit] = w;
                }
            }
            next_group += 1;
        }
        selected.push(SelectedComposition {
            members: comp.members.iter().map(|&((a, w), c)| (a, w, c)).collect(),
            lp_value: solution.values[idx],
            count,
            m_k: comp.m_k,
            m_k_prime: comp.m_k_prime,
        });
    }

    // Leftovers: deterministic fill, sorted by attribute, untreated.
    let mut leftovers: Vec<usize> = pool[0].iter().chain(pool[1].iter()).copied().collect();
    leftovers.sort_by_key(|&u| (population.attribute(u), u));
    let leftover_count = leftovers.len();
    debug_assert_eq!(leftover_count % group_size, 0, "N = mK guarantees whole groups");
    for chunk in leftovers.chunks(group_size) {
        for &unit in chunk {
            groups[unit] = next_group;
        }
        next_group += 1;
    }
    debug_assert_eq!(next_group - 1, n_groups);

    let assignment = Assignment::new(groups, treatments, group_size)?;
    let integer_objective = counts
        .iter()
        .zip(&program.compositions)
        .map(|(&c, g)| (c * (g.m_k + g.m_k_prime)) as Real)
        .sum();
    let report = DesignReport {
        lp_objective: solution.objective,
        integer_objective,
        eta: program.eta,
        selected,
        leftover_units: leftover_count,
    };
    Ok((assignment, report))
}

/// End-to-end optimal initialization: enumerate, solve, round, realize.
pub fn optimal_init<R: Rng + ?Sized>(
    population: &Population,
    group_size: usize,
    k: &ExposureQuad,
    k_prime: &ExposureQuad,
    eta: Real,
    treated_budget: Option<usize>,
    rng: &mut R,
) -> Result<(Assignment, DesignReport)> {
    let comps = enumerate_compositions(group_size, population.attr_alphabet(), &[0, 1], k, k_prime)?;
    let program = build_program(comps, population, eta, treated_budget)?;
    let solution = solve_lp(&program)?;
    round_and_realize(&solution, &program, population, group_size, rng)
}

/// Baseline: canonical L (blocks of m) and W (`treated_count` ones), each
/// independently and uniformly permuted over the full symmetric group.
pub fn random_init<R: Rng + ?Sized>(
    population: &Population,
    group_size: usize,
    treated_count: usize,
    rng: &mut R,
) -> Result<Assignment> {
    let n = population.n_units();
    if treated_count > n {
        return Err(Error::Config(format!(
            "treated count {treated_count} exceeds N = {n}"
        )));
    }
    if !n.is_multiple_of(group_size) {
        return Err(Error::Config(format!(
            "N = {n} is not divisible by m = {group_size}"
        )));
    }
    let mut groups: Vec<usize> = (0..n).map(|i| i / group_size + 1).collect();
    let mut treatments: Vec<Treat> = (0..n).map(|i| u8::from(i < treated_count)).collect();
    for i in (1..n).rev() {
        groups.swap(i, rng.gen_range(0..=i));
    }
    for i in (1..n).rev() {
        treatments.swap(i, rng.gen_range(0..=i));
    }
    Assignment::new(groups, treatments, group_size)
}

/// Count units with attribute `i` and exposure equal to target `j` in {k, k'}.
fn focal_counts_by_attr(
    population: &Population,
    assignment: &Assignment,
    k: &ExposureQuad,
    k_prime: &ExposureQuad,
) -> Result<[[usize; 2]; 2]> {
    let quads = exposure_quadruple(population, assignment, QuadMode::Full)?;
    let mut counts = [[0usize; 2]; 2];
    for (i, q) in quads.iter().enumerate() {
        let a = population.attribute(i) as usize;
        if q == k {
            counts[a][0] += 1;
        } else if q == k_prime {
            counts[a][1] += 1;
        }
    }
    Ok(counts)
}

/// Accept iff the total focal count strictly increases and both
/// within-attribute ratios lie in [1/η, η] (linearized so empty cells on
/// both sides pass).
fn acceptable(old_total: usize, counts: &[[usize; 2]; 2], eta: Real) -> bool {
    let total: usize = counts.iter().flatten().sum();
    if total <= old_total {
        return false;
    }
    for row in counts {
        let (a, b) = (row[0] as Real, row[1] as Real);
        if a > eta * b || b > eta * a {
            return false;
        }
    }
    true
}

/// Rejection-sampling baseline: best of M independently permuted proposals,
/// accepted only when the focal count improves under the balance band.
///
/// May return the initial random draw unchanged when nothing is accepted
/// (logged as a warning).
#[allow(clippy::too_many_arguments)]
pub fn rejection_sampling_init<R: Rng + ?Sized>(
    population: &Population,
    group_size: usize,
    treated_count: usize,
    iterations: usize,
    eta: Real,
    k: &ExposureQuad,
    k_prime: &ExposureQuad,
    rng: &mut R,
) -> Result<Assignment> {
    if iterations == 0 {
        return Err(Error::Config("rejection sampling needs M >= 1".into()));
    }
    let mut current = random_init(population, group_size, treated_count, rng)?;
    let mut current_total: usize = focal_counts_by_attr(population, &current, k, k_prime)?
        .iter()
        .flatten()
        .sum();
    let mut accepted = 0usize;
    for _ in 0..iterations {
        // Independent uniform permutations of L and W.
        let n = population.n_units();
        let mut groups = current.groups.clone();
        let mut treatments = current.treatments.clone();
        for i in (1..n).rev() {
            groups.swap(i, rng.gen_range(0..=i));
        }
        for i in (1..n).rev() {
            treatments.swap(i, rng.gen_range(0..=i));
        }
        let proposal = Assignment::new(groups, treatments, group_size)?;
        let counts = focal_counts_by_attr(population, &proposal, k, k_prime)?;
        if acceptable(current_total, &counts, eta) {
            current_total = counts.iter().flatten().sum();
            current = proposal;
            accepted += 1;
        }
    }
    if accepted == 0 {
        log::warn!("rejection sampling accepted no proposal in {iterations} iterations; returning the initial draw");
    }
    Ok(current)
}
