//! Monte Carlo power-study engine: generates populations and potential
//! outcomes, runs every initialization strategy across group sizes and
//! effect sizes, aggregates rejection rates, and emits CSV/SVG reports.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::randomize;
use crate::error::{Error, Result};
use crate::exposure::{exposure_quadruple, ExposureQuad, QuadMode};
use crate::inference::{conditional_fisher_test, ResamplingPlan, Sidedness};
use crate::optimal_design::{optimal_init, random_init, rejection_sampling_init};
use crate::population::Population;
use crate::rngutil::stream;
use crate::{Real, Treat};

/// Initialization strategy for the starting assignment C0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Optimal,
    Rejection { m: usize },
    Random,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Optimal => write!(f, "optimal"),
            Strategy::Rejection { m } => write!(f, "rejection_{m}"),
            Strategy::Random => write!(f, "random"),
        }
    }
}

fn strategy_id(s: &Strategy) -> u64 {
    match s {
        Strategy::Optimal => 1,
        Strategy::Rejection { m } => 2 + *m as u64,
        Strategy::Random => 0,
    }
}

/// Full description of a power study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_units: usize,
    /// Units with attribute 1; the rest carry attribute 0.
    pub n_attr_one: usize,
    pub group_sizes: Vec<usize>,
    pub tau_grid: Vec<Real>,
    /// Target exposures in `a:w:aw:own` form.
    pub k: String,
    pub k_prime: String,
    pub replications: usize,
    pub resamples: usize,
    pub alpha: Real,
    pub strategies: Vec<Strategy>,
    pub seed: u64,
    #[serde(default = "default_eta")]
    pub eta: Real,
    /// Treated units for the random/rejection baselines (default N/2).
    #[serde(default)]
    pub treated_count: Option<usize>,
    /// Redraw the baseline outcomes M_i every replication (default), or fix
    /// them per cell and vary only the assignment.
    #[serde(default = "default_true")]
    pub fresh_outcomes: bool,
}

fn default_eta() -> Real {
    1.2
}

fn default_true() -> bool {
    true
}

impl SimulationConfig {
    /// Defaults matching the harness's desk-scale study.
    pub fn desk_scale() -> Self {
        Self {
            n_units: 300,
            n_attr_one: 150,
            group_sizes: vec![3, 4, 5, 6],
            tau_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            k: "1:1:1:1".into(),
            k_prime: "2:1:1:0".into(),
            replications: 500,
            resamples: 500,
            alpha: 0.05,
            strategies: vec![
                Strategy::Optimal,
                Strategy::Rejection { m: 10 },
                Strategy::Rejection { m: 1000 },
                Strategy::Random,
            ],
            seed: 20_240_101,
            eta: 1.2,
            treated_count: None,
            fresh_outcomes: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        if self.n_attr_one > self.n_units {
            return Err(Error::Config("n_attr_one exceeds n_units".into()));
        }
        for &m in &self.group_sizes {
            if m == 0 || !self.n_units.is_multiple_of(m) {
                return Err(Error::Config(format!(
                    "N = {} must be divisible by every group size (got m = {m})",
                    self.n_units
                )));
            }
        }
        if !self.tau_grid.iter().all(|t| t.is_finite()) {
            return Err(Error::Config("tau grid must be finite".into()));
        }
        self.k.parse::<ExposureQuad>()?;
        self.k_prime.parse::<ExposureQuad>()?;
        Ok(())
    }

    pub fn population(&self) -> Result<Population> {
        let mut attrs = vec![0 as Treat; self.n_units - self.n_attr_one];
        attrs.extend(vec![1; self.n_attr_one]);
        Population::new(attrs, vec![0, 1])
    }
}

/// Fixed potential-outcome table of the additive-shift model: every exposure
/// yields the baseline M_i except k', which adds τ.
#[derive(Debug, Clone)]
pub struct OutcomeTable {
    pub baseline: Vec<Real>,
    pub tau: Real,
    pub shifted: ExposureQuad,
}

impl OutcomeTable {
    pub fn generate<R: Rng + ?Sized>(n: usize, tau: Real, shifted: ExposureQuad, rng: &mut R) -> Self {
        let baseline: Vec<Real> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        Self {
            baseline,
            tau,
            shifted,
        }
    }

    /// Potential outcome Y_i(k0).
    pub fn potential(&self, unit: usize, exposure: &ExposureQuad) -> Real {
        if *exposure == self.shifted {
            self.baseline[unit] + self.tau
        } else {
            self.baseline[unit]
        }
    }

    /// Observed outcomes under realized exposures.
    pub fn observe(&self, exposures: &[ExposureQuad]) -> Vec<Real> {
        exposures
            .iter()
            .enumerate()
            .map(|(i, e)| self.potential(i, e))
            .collect()
    }

    /// The exact finite-population contrast τ(k, k') under this table.
    pub fn true_contrast(&self, k: &ExposureQuad, k_prime: &ExposureQuad) -> Real {
        let n = self.baseline.len() as Real;
        (0..self.baseline.len())
            .map(|i| self.potential(i, k) - self.potential(i, k_prime))
            .sum::<Real>()
            / n
    }
}

/// Draw outcomes for realized exposures, returning the retained table.
pub fn generate_outcomes<R: Rng + ?Sized>(
    population: &Population,
    exposures: &[ExposureQuad],
    tau: Real,
    k_prime: &ExposureQuad,
    rng: &mut R,
) -> (Vec<Real>, OutcomeTable) {
    let table = OutcomeTable::generate(population.n_units(), tau, *k_prime, rng);
    (table.observe(exposures), table)
}

/// One aggregated cell of the study.
#[derive(Debug, Clone, Serialize)]
pub struct PowerRow {
    pub group_size: usize,
    pub strategy: String,
    pub tau: Real,
    pub power: Real,
    pub mc_se: Real,
    pub mean_focal_k: Real,
    pub mean_focal_k_prime: Real,
    pub degenerate_reps: usize,
    pub replications: usize,
}

#[derive(Debug, Clone)]
pub struct PowerTable {
    pub rows: Vec<PowerRow>,
}

fn build_c0<R: Rng + ?Sized>(
    strategy: &Strategy,
    population: &Population,
    m: usize,
    config: &SimulationConfig,
    k: &ExposureQuad,
    k_prime: &ExposureQuad,
    rng: &mut R,
) -> Result<crate::population::Assignment> {
    let treated = config.treated_count.unwrap_or(config.n_units / 2);
    match strategy {
        Strategy::Optimal => Ok(optimal_init(population, m, k, k_prime, config.eta, None, rng)?.0),
        Strategy::Rejection { m: iters } => rejection_sampling_init(
            population,
            m,
            treated,
            *iters,
            config.eta,
            k,
            k_prime,
            rng,
        ),
        Strategy::Random => random_init(population, m, treated, rng),
    }
}

/// Run the full study. Deterministic given the config (incl. master seed);
/// replications run in parallel over derived RNG streams.
pub fn run_power_simulation(config: &SimulationConfig) -> Result<PowerTable> {
    config.validate()?;
    let population = config.population()?;
    let k: ExposureQuad = config.k.parse()?;
    let k_prime: ExposureQuad = config.k_prime.parse()?;

    let mut rows = Vec::new();
    for &m in &config.group_sizes {
        for strategy in &config.strategies {
            let sid = strategy_id(strategy);
            for (tau_idx, &tau) in config.tau_grid.iter().enumerate() {
                let cell_path = [m as u64, sid, tau_idx as u64];
                let mut cell_rng = stream(config.seed, &[m as u64, sid, tau_idx as u64, u64::MAX]);
                let c0 = build_c0(strategy, &population, m, config, &k, &k_prime, &mut cell_rng)?;

                // Fixed-outcome mode: one table per cell, shared by reps.
                let fixed_table = (!config.fresh_outcomes).then(|| {
                    let mut orng = stream(config.seed, &[m as u64, sid, tau_idx as u64, u64::MAX - 1]);
                    OutcomeTable::generate(population.n_units(), tau, k_prime, &mut orng)
                });

                let reps: Vec<(bool, bool, usize, usize)> = (0..config.replications)
                    .into_par_iter()
                    .map(|rep| {
                        let mut rng = stream(
                            config.seed,
                            &[cell_path[0], cell_path[1], cell_path[2], rep as u64],
                        );
                        let assignment = randomize(&c0, &population, &mut rng)?;
                        let quads = exposure_quadruple(&population, &assignment, QuadMode::Full)?;
                        let outcomes = match &fixed_table {
                            Some(t) => t.observe(&quads),
                            None => {
                                let table = OutcomeTable::generate(
                                    population.n_units(),
                                    tau,
                                    k_prime,
                                    &mut rng,
                                );
                                table.observe(&quads)
                            }
                        };
                        let n_k = quads.iter().filter(|&&q| q == k).count();
                        let n_kp = quads.iter().filter(|&&q| q == k_prime).count();
                        match conditional_fisher_test(
                            &outcomes,
                            &quads,
                            &population,
                            &k,
                            &k_prime,
                            ResamplingPlan::MonteCarlo {
                                resamples: config.resamples,
                            },
                            &mut rng,
                            Sidedness::TwoSided,
                        ) {
                            Ok(res) => {
                                Ok((res.p_value <= config.alpha, res.degenerate, n_k, n_kp))
                            }
                            // No focal unit with one exposure: zero-power rep,
                            // recorded as degenerate rather than aborting.
                            Err(Error::UndefinedStatistic { .. }) => Ok((false, true, n_k, n_kp)),
                            Err(e) => Err(e),
                        }
                    })
                    .collect::<Result<_>>()?;

                let rejections = reps.iter().filter(|r| r.0).count();
                let degenerate = reps.iter().filter(|r| r.1).count();
                let power = rejections as Real / config.replications as Real;
                rows.push(PowerRow {
                    group_size: m,
                    strategy: strategy.to_string(),
                    tau,
                    power,
                    mc_se: (power * (1.0 - power) / config.replications as Real).sqrt(),
                    mean_focal_k: reps.iter().map(|r| r.2 as Real).sum::<Real>()
                        / config.replications as Real,
                    mean_focal_k_prime: reps.iter().map(|r| r.3 as Real).sum::<Real>()
                        / config.replications as Real,
                    degenerate_reps: degenerate,
                    replications: config.replications,
                });
            }
        }
    }
    Ok(PowerTable { rows })
}

/// Write `power.csv` and one `power_m{m}.svg` per group size into `out_dir`.
/// Byte-deterministic given the table.
pub fn emit_report(table: &PowerTable, out_dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    if table.rows.is_empty() {
        return Err(Error::EmptyInput("power table"));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let csv_path = out_dir.join("power.csv");
    let mut wtr = csv::Writer::from_path(&csv_path)?;
    wtr.write_record([
        "m",
        "strategy",
        "tau",
        "power",
        "mc_se",
        "mean_focal_k",
        "mean_focal_k_prime",
        "degenerate_reps",
        "replications",
    ])?;
    for row in &table.rows {
        wtr.write_record([
            row.group_size.to_string(),
            row.strategy.clone(),
            format!("{:.6}", row.tau),
            format!("{:.6}", row.power),
            format!("{:.6}", row.mc_se),
            format!("{:.3}", row.mean_focal_k),
            format!("{:.3}", row.mean_focal_k_prime),
            row.degenerate_reps.to_string(),
            row.replications.to_string(),
        ])?;
    }
    wtr.flush()?;
    written.push(csv_path);

    let mut by_m: BTreeMap<usize, Vec<&PowerRow>> = BTreeMap::new();
    for row in &table.rows {
        by_m.entry(row.group_size).or_default().push(row);
    }
    for (m, rows) in by_m {
        let path = out_dir.join(format!("power_m{m}.svg"));
        std::fs::write(&path, render_power_svg(m, &rows))?;
        written.push(path);
    }
    Ok(written)
}

const SVG_COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn render_power_svg(m: usize, rows: &[&PowerRow]) -> String {
    let width = 640.0;
    let height = 480.0;
    let (left, right, top, bottom) = (70.0, 30.0, 40.0, 60.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    let mut taus: Vec<Real> = rows.iter().map(|r| r.tau).collect();
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    taus.dedup();
    let tau_min = *taus.first().unwrap();
    let tau_max = *taus.last().unwrap();
    let span = if (tau_max - tau_min).abs() < 1e-12 { 1.0 } else { tau_max - tau_min };
    let x = |tau: Real| left + (tau - tau_min) / span * plot_w;
    let y = |power: Real| top + (1.0 - power) * plot_h;

    let mut strategies: Vec<String> = rows.iter().map(|r| r.strategy.clone()).collect();
    strategies.sort();
    strategies.dedup();

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">Power vs additive effect, m = {m}</text>\n",
        width / 2.0
    ));
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{left}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        top + plot_h,
        left + plot_w,
        top + plot_h
    ));
    svg.push_str(&format!(
        "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        top + plot_h
    ));
    for tick in 0..=4 {
        let p = tick as Real / 4.0;
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{:.2}</text>\n",
            left - 8.0,
            y(p) + 4.0,
            p
        ));
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#cccccc\" stroke-dasharray=\"3,3\"/>\n",
            left,
            y(p),
            left + plot_w,
            y(p)
        ));
    }
    for &tau in &taus {
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{:.2}</text>\n",
            x(tau),
            top + plot_h + 18.0,
            tau
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">tau</text>\n",
        left + plot_w / 2.0,
        height - 18.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1})\">power</text>\n",
        top + plot_h / 2.0,
        top + plot_h / 2.0
    ));

    for (si, strat) in strategies.iter().enumerate() {
        let color = SVG_COLORS[si % SVG_COLORS.len()];
        let mut pts: Vec<(Real, Real)> = rows
            .iter()
            .filter(|r| &r.strategy == strat)
            .map(|r| (r.tau, r.power))
            .collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let path: Vec<String> = pts
            .iter()
            .map(|&(t, p)| format!("{:.2},{:.2}", x(t), y(p)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        for &(t, p) in &pts {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                x(t),
                y(p)
            ));
        }
        let ly = top + 16.0 * si as Real;
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            left + plot_w - 150.0,
            left + plot_w - 120.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">{strat}</text>\n",
            left + plot_w - 112.0,
            ly + 4.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
