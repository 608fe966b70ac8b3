//! Comparison bounds between excess misclassification risk and excess
//! LUM risk, and randomized sweeps that check them on exact distributions.
//!
//! Every bound has the shape `R(sgn f) - R(f_c) <= C (E(f) - E(f_P))^s`:
//!
//! | regime                 | `C`                      | `s`             |
//! |------------------------|--------------------------|-----------------|
//! | `0 < p < inf`          | `(p + 1) / p`            | 1               |
//! | `p = 0`, finite `q`    | `2 sqrt((q + 1) / q)`    | 1/2             |
//! | `p = 0`, `q = inf`     | `sqrt(2)`                | 1/2             |
//! | `p = inf` (hinge)      | 1                        | 1               |
//! | `p = 0` + noise `tau`  | see [`noise_comparison_bound`] | `(tau+1)/(tau+2)` |

use std::io::Write;

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{
    check_tsybakov, make_tsybakov_distribution, rng_from_seed, standard_t_grid, DiscreteJoint,
    LumRng,
};
use crate::error::{LumError, Result};
use crate::loss::{ExtendedParam, LumParams, Regime};
use crate::numeric::{bayes_label, fmt_f64};
use crate::pointwise::minimizer;
use crate::risk::{minimizer_scores, risk_report, ScoreFunction, TABULATION_CLIP};

/// Absolute tolerance on `rhs - lhs` before a trial counts as a violation.
pub const VIOLATION_TOLERANCE: f64 = 1e-10;

/// Trials with `lhs` at or below this level do not enter `max_ratio`; there
/// both sides are dominated by rounding.
pub const RATIO_FLOOR: f64 = 1e-8;

/// Excess generalization below `-NEGATIVE_EXCESS_TOLERANCE` means a bug upstream.
pub const NEGATIVE_EXCESS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundRegime {
    PPositive,
    PZeroFiniteQ,
    PZeroQInf,
    Hinge,
    Tsybakov,
}

impl BoundRegime {
    pub fn name(&self) -> &'static str {
        match self {
            BoundRegime::PPositive => "p_positive",
            BoundRegime::PZeroFiniteQ => "p_zero_finite_q",
            BoundRegime::PZeroQInf => "p_zero_q_inf",
            BoundRegime::Hinge => "hinge",
            BoundRegime::Tsybakov => "tsybakov",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonBound {
    pub constant: f64,
    pub exponent: f64,
    pub regime: BoundRegime,
}

impl ComparisonBound {
    /// `constant * excess^exponent`, with tiny negative excesses read as 0.
    pub fn rhs(&self, excess_generalization: f64) -> f64 {
        self.constant * excess_generalization.max(0.0).powf(self.exponent)
    }
}

/// Constants of the unconditional comparison theorem for `params`.
pub fn comparison_bound(params: &LumParams) -> ComparisonBound {
    match params.regime() {
        Regime::Hinge => ComparisonBound {
            constant: 1.0,
            exponent: 1.0,
            regime: BoundRegime::Hinge,
        },
        Regime::Power { p, .. } | Regime::Exponential { p } if p.get() > 0.0 => {
            let p = p.get();
            ComparisonBound {
                constant: (p + 1.0) / p,
                exponent: 1.0,
                regime: BoundRegime::PPositive,
            }
        }
        Regime::Power { q, .. } => {
            let q = q.get();
            ComparisonBound {
                constant: 2.0 * ((q + 1.0) / q).sqrt(),
                exponent: 0.5,
                regime: BoundRegime::PZeroFiniteQ,
            }
        }
        Regime::Exponential { .. } => ComparisonBound {
            constant: std::f64::consts::SQRT_2,
            exponent: 0.5,
            regime: BoundRegime::PZeroQInf,
        },
    }
}

/// Constants of the comparison bound for `p = 0` under a noise condition with
/// exponent `tau` and constant `c_tau`:
///
/// `C = c_tau^(-tau/(tau+2)) 2^(1 + k (tau+1)/(tau+2)) ((q+1)/q)^((tau+1)/(tau+2))`
///
/// with `k = (2q+1)/(q+1)`. At `q = inf`, `k = 2` and `(q+1)/q = 1`.
pub fn noise_comparison_bound(q: ExtendedParam, tau: f64, c_tau: f64) -> Result<ComparisonBound> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(LumError::InvalidParameter(format!(
            "noise exponent must satisfy 0 < tau < inf, got {tau}"
        )));
    }
    if !(c_tau.is_finite() && c_tau > 0.0) {
        return Err(LumError::InvalidParameter(format!(
            "c_tau must be positive, got {c_tau}"
        )));
    }
    let (k, ratio) = match q {
        ExtendedParam::Infinite => (2.0, 1.0),
        ExtendedParam::Finite(q) if q > 0.0 => ((2.0 * q + 1.0) / (q + 1.0), (q + 1.0) / q),
        ExtendedParam::Finite(q) => {
            return Err(LumError::InvalidParameter(format!(
                "q must be positive, got {q}"
            )))
        }
    };
    let exponent = (tau + 1.0) / (tau + 2.0);
    let constant =
        c_tau.powf(-tau / (tau + 2.0)) * 2f64.powf(1.0 + k * exponent) * ratio.powf(exponent);
    Ok(ComparisonBound {
        constant,
        exponent,
        regime: BoundRegime::Tsybakov,
    })
}

/// Both sides of one bound evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl BoundCheck {
    pub fn violated(&self) -> bool {
        self.slack < -VIOLATION_TOLERANCE
    }
}

fn check_against(
    dist: &DiscreteJoint,
    f: &ScoreFunction,
    params: &LumParams,
    bound: &ComparisonBound,
) -> Result<BoundCheck> {
    let report = risk_report(dist, f, params)?;
    if report.excess_generalization < -NEGATIVE_EXCESS_TOLERANCE {
        return Err(LumError::Numerical(format!(
            "negative excess generalization error {}",
            report.excess_generalization
        )));
    }
    let lhs = report.excess_misclassification;
    let rhs = bound.rhs(report.excess_generalization);
    Ok(BoundCheck {
        lhs,
        rhs,
        slack: rhs - lhs,
    })
}

/// Evaluates the unconditional comparison bound for `f` under `dist`.
pub fn verify_comparison(
    dist: &DiscreteJoint,
    f: &ScoreFunction,
    params: &LumParams,
) -> Result<BoundCheck> {
    check_against(dist, f, params, &comparison_bound(params))
}

/// Thresholds `|2 eta_i - 1| / c_tau` (where positive) plus the standard grid;
/// the mass function only jumps at the former.
fn noise_check_grid(dist: &DiscreteJoint, c_tau: f64) -> Vec<f64> {
    let mut grid: Vec<f64> = dist
        .etas()
        .iter()
        .map(|&e| (2.0 * e - 1.0).abs() / c_tau)
        .filter(|&t| t > 0.0)
        .collect();
    grid.extend(standard_t_grid());
    grid
}

/// Evaluates the noise-conditioned bound (`p = 0`). The distribution must pass
/// [`check_tsybakov`] first.
pub fn verify_noise_comparison(
    dist: &DiscreteJoint,
    f: &ScoreFunction,
    q: ExtendedParam,
    tau: f64,
    c_tau: f64,
) -> Result<BoundCheck> {
    let bound = noise_comparison_bound(q, tau, c_tau)?;
    let noise = check_tsybakov(dist, tau, c_tau, &noise_check_grid(dist, c_tau))?;
    if !noise.passed {
        return Err(LumError::NoiseConditionFailed(format!(
            "distribution exceeds t^tau by {} (tau = {tau}, c_tau = {c_tau})",
            noise.max_violation
        )));
    }
    let params = LumParams::new(ExtendedParam::Finite(0.0), q)?;
    check_against(dist, f, &params, &bound)
}

/// Excess level below which the noise-conditioned bound is smaller than the
/// unconditional `p = 0` bound.
pub fn bound_crossover(q: ExtendedParam, tau: f64, c_tau: f64) -> Result<f64> {
    let params = LumParams::new(ExtendedParam::Finite(0.0), q)?;
    let plain = comparison_bound(&params);
    let noisy = noise_comparison_bound(q, tau, c_tau)?;
    Ok((plain.constant / noisy.constant).powf(1.0 / (noisy.exponent - plain.exponent)))
}

/// Shapes for random score functions. `Mixed` picks one of the four random
/// shapes per trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FGenerator {
    #[default]
    Mixed,
    /// i.i.d. uniform values in `[-3, 3]`
    Uniform,
    /// `f_P`, with a random subset of atoms replaced by `-s f_P`, `s in (0, 1]`
    FlippedMinimizer,
    /// `f_P`, with a random subset of atoms set to 0
    ZeroOnSubset,
    /// up to four constant blocks over consecutive atoms
    Piecewise,
    /// `f_P` itself (infinite values clipped)
    Minimizer,
    /// the Bayes rule
    BayesRule,
}

impl FGenerator {
    pub const ALL: [FGenerator; 7] = [
        FGenerator::Mixed,
        FGenerator::Uniform,
        FGenerator::FlippedMinimizer,
        FGenerator::ZeroOnSubset,
        FGenerator::Piecewise,
        FGenerator::Minimizer,
        FGenerator::BayesRule,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FGenerator::Mixed => "mixed",
            FGenerator::Uniform => "uniform",
            FGenerator::FlippedMinimizer => "flipped_minimizer",
            FGenerator::ZeroOnSubset => "zero_on_subset",
            FGenerator::Piecewise => "piecewise",
            FGenerator::Minimizer => "minimizer",
            FGenerator::BayesRule => "bayes_rule",
        }
    }

    fn resolve(self, rng: &mut LumRng) -> FGenerator {
        if self != FGenerator::Mixed {
            return self;
        }
        match rng.random_range(0..4) {
            0 => FGenerator::Uniform,
            1 => FGenerator::FlippedMinimizer,
            2 => FGenerator::ZeroOnSubset,
            _ => FGenerator::Piecewise,
        }
    }

    fn draw(
        self,
        dist: &DiscreteJoint,
        params: &LumParams,
        rng: &mut LumRng,
    ) -> Result<ScoreFunction> {
        let n = dist.len();
        let f_p = || -> Result<Vec<f64>> {
            match minimizer_scores(dist, params)? {
                ScoreFunction::Tabulated { values } => Ok(values),
                ScoreFunction::Linear { .. } => unreachable!("minimizer scores are tabulated"),
            }
        };
        let values = match self {
            FGenerator::Mixed => unreachable!("resolved before drawing"),
            FGenerator::Uniform => (0..n).map(|_| rng.random_range(-3.0..=3.0)).collect(),
            FGenerator::FlippedMinimizer => {
                let share: f64 = rng.random();
                // cubing puts many flipped values right next to zero
                let scale = 1.0 - rng.random::<f64>();
                let scale = scale * scale * scale;
                f_p()?
                    .into_iter()
                    .map(|v| {
                        if rng.random::<f64>() < share {
                            -scale * v
                        } else {
                            v
                        }
                    })
                    .collect()
            }
            FGenerator::ZeroOnSubset => {
                let share: f64 = rng.random();
                f_p()?
                    .into_iter()
                    .map(|v| if rng.random::<f64>() < share { 0.0 } else { v })
                    .collect()
            }
            FGenerator::Piecewise => {
                let blocks = rng.random_range(1..=4usize).min(n);
                let mut cuts: Vec<usize> =
                    (0..blocks - 1).map(|_| rng.random_range(0..n)).collect();
                cuts.sort_unstable();
                let levels: Vec<f64> = (0..blocks).map(|_| rng.random_range(-3.0..=3.0)).collect();
                (0..n)
                    .map(|i| levels[cuts.iter().filter(|&&c| c <= i).count()])
                    .collect()
            }
            FGenerator::Minimizer => f_p()?,
            FGenerator::BayesRule => dist.etas().iter().map(|&e| bayes_label(e)).collect(),
        };
        Ok(ScoreFunction::tabulated(values))
    }
}

impl std::str::FromStr for FGenerator {
    type Err = LumError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().replace('-', "_");
        FGenerator::ALL
            .into_iter()
            .find(|g| g.name() == t)
            .ok_or_else(|| LumError::InvalidParameter(format!("unknown f generator '{s}'")))
    }
}

/// Noise specification `(tau, c_tau)` for noise-conditioned sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub tau: f64,
    pub c_tau: f64,
}

/// Configuration of [`random_trial_sweep`].
///
/// With an empty `tau_list` every trial checks the unconditional bound on a
/// random distribution; `params_list` is cycled by trial index. Otherwise every
/// trial checks the noise-conditioned bound on a constructed noise-condition
/// distribution, cycling over `params_list x tau_list` (all `p` must be 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n_trials: usize,
    /// Inclusive range for the number of atoms per trial.
    pub atom_range: (usize, usize),
    pub params_list: Vec<LumParams>,
    #[serde(default)]
    pub tau_list: Vec<NoiseSpec>,
    #[serde(default)]
    pub f_generator: FGenerator,
}

impl SweepConfig {
    pub fn comparison(params: LumParams, n_trials: usize) -> Self {
        SweepConfig {
            n_trials,
            atom_range: (1, 40),
            params_list: vec![params],
            tau_list: Vec::new(),
            f_generator: FGenerator::Mixed,
        }
    }

    pub fn noise(q: ExtendedParam, noise: NoiseSpec, n_trials: usize) -> Result<Self> {
        Ok(SweepConfig {
            n_trials,
            atom_range: (1, 200),
            params_list: vec![LumParams::new(ExtendedParam::Finite(0.0), q)?],
            tau_list: vec![noise],
            f_generator: FGenerator::Mixed,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(LumError::InvalidParameter("n_trials must be >= 1".into()));
        }
        let (lo, hi) = self.atom_range;
        if lo == 0 || lo > hi {
            return Err(LumError::InvalidParameter(format!(
                "atom range ({lo}, {hi}) must satisfy 1 <= min <= max"
            )));
        }
        if self.params_list.is_empty() {
            return Err(LumError::InvalidParameter("params_list is empty".into()));
        }
        if !self.tau_list.is_empty() {
            if let Some(p) = self
                .params_list
                .iter()
                .find(|p| p.p() != ExtendedParam::Finite(0.0))
            {
                return Err(LumError::InvalidParameter(format!(
                    "noise-conditioned sweeps need p = 0, got {p}"
                )));
            }
            for spec in &self.tau_list {
                noise_comparison_bound(ExtendedParam::Infinite, spec.tau, spec.c_tau)?;
            }
        }
        Ok(())
    }
}

/// One evaluated trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub params: LumParams,
    pub tau: Option<f64>,
    pub c_tau: Option<f64>,
    pub n_atoms: usize,
    pub generator: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl TrialRow {
    pub const CSV_HEADER: [&'static str; 10] = [
        "trial",
        "p",
        "q",
        "tau",
        "c_tau",
        "n_atoms",
        "generator",
        "lhs",
        "rhs",
        "slack",
    ];

    fn record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        vec![
            self.trial.to_string(),
            self.params.p().to_string(),
            self.params.q().to_string(),
            opt(self.tau),
            opt(self.c_tau),
            self.n_atoms.to_string(),
            self.generator.clone(),
            fmt_f64(self.lhs),
            fmt_f64(self.rhs),
            fmt_f64(self.slack),
        ]
    }

    /// Ratio `lhs / rhs`, or 0 when `lhs <= RATIO_FLOOR`.
    pub fn ratio(&self) -> f64 {
        if self.lhs <= RATIO_FLOOR {
            0.0
        } else if self.rhs <= 0.0 {
            f64::INFINITY
        } else {
            self.lhs / self.rhs
        }
    }
}

pub fn write_trial_rows<W: Write>(rows: &[TrialRow], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(TrialRow::CSV_HEADER)?;
    for row in rows {
        out.write_record(row.record())?;
    }
    out.flush()?;
    Ok(())
}

/// Aggregate of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub trials: usize,
    pub violations: usize,
    pub min_slack: f64,
    /// Largest `lhs / rhs` observed (see [`TrialRow::ratio`]).
    pub max_ratio: f64,
    pub seed: u64,
}

impl VerificationReport {
    fn from_rows(rows: &[TrialRow], seed: u64) -> Self {
        VerificationReport {
            trials: rows.len(),
            violations: rows
                .iter()
                .filter(|r| r.slack < -VIOLATION_TOLERANCE)
                .count(),
            min_slack: rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min),
            max_ratio: rows.iter().map(TrialRow::ratio).fold(0.0, f64::max),
            seed,
        }
    }
}

fn trial_rng(seed: u64, trial: usize) -> LumRng {
    let mut rng = rng_from_seed(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Random conditional probabilities with about 10% of atoms pinned to each of
/// 0, 1/2 and 1, and flat-Dirichlet weights.
fn random_distribution(n: usize, rng: &mut LumRng) -> Result<DiscreteJoint> {
    let atoms = (0..n)
        .map(|i| {
            vec![if n == 1 {
                0.5
            } else {
                i as f64 / (n - 1) as f64
            }]
        })
        .collect();
    let etas = (0..n)
        .map(|_| match rng.random_range(0..10) {
            0 => 0.0,
            1 => 1.0,
            2 => 0.5,
            _ => rng.random::<f64>(),
        })
        .collect();
    let weights = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    DiscreteJoint::normalized(atoms, weights, etas)
}

fn run_trial(config: &SweepConfig, seed: u64, trial: usize) -> Result<TrialRow> {
    let mut rng = trial_rng(seed, trial);
    let n_atoms = rng.random_range(config.atom_range.0..=config.atom_range.1);
    let generator = config.f_generator.resolve(&mut rng);
    let combos = config.params_list.len() * config.tau_list.len().max(1);
    let combo = trial % combos;
    let params = config.params_list[combo % config.params_list.len()];
    let (noise, dist) = if config.tau_list.is_empty() {
        (None, random_distribution(n_atoms, &mut rng)?)
    } else {
        let spec = config.tau_list[combo / config.params_list.len()];
        let flips: Vec<bool> = (0..n_atoms).map(|_| rng.random()).collect();
        let dist = make_tsybakov_distribution(spec.tau, spec.c_tau, n_atoms)?
            .with_flipped_conditionals(&flips)?;
        (Some(spec), dist)
    };
    let f = generator.draw(&dist, &params, &mut rng)?;
    let check = match noise {
        None => verify_comparison(&dist, &f, &params)?,
        Some(spec) => verify_noise_comparison(&dist, &f, params.q(), spec.tau, spec.c_tau)?,
    };
    Ok(TrialRow {
        trial,
        params,
        tau: noise.map(|s| s.tau),
        c_tau: noise.map(|s| s.c_tau),
        n_atoms,
        generator: generator.name().to_string(),
        lhs: check.lhs,
        rhs: check.rhs,
        slack: check.slack,
    })
}

/// Runs the sweep and also returns every trial row in trial order.
///
/// Each trial draws from its own stream of the master seed, so the result does
/// not depend on how trials are scheduled across threads.
pub fn random_trial_sweep_with_rows(
    config: &SweepConfig,
    seed: u64,
) -> Result<(VerificationReport, Vec<TrialRow>)> {
    config.validate()?;
    let rows = (0..config.n_trials)
        .into_par_iter()
        .map(|trial| run_trial(config, seed, trial))
        .collect::<Result<Vec<_>>>()?;
    Ok((VerificationReport::from_rows(&rows, seed), rows))
}

pub fn random_trial_sweep(config: &SweepConfig, seed: u64) -> Result<VerificationReport> {
    random_trial_sweep_with_rows(config, seed).map(|(report, _)| report)
}

/// Where the bound came closest to equality over single-atom distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub sup_ratio: f64,
    pub argmax_eta: f64,
    pub argmax_score: f64,
}

/// Scans single-atom distributions `eta = i / resolution` (`0 < i < resolution`)
/// against the scores `0`, `-f_P(eta)` and `-s f_c(eta)` for a few `s`.
pub fn tightness_scan(params: &LumParams, resolution: usize) -> Result<TightnessReport> {
    if resolution < 10 {
        return Err(LumError::InvalidParameter(
            "resolution must be >= 10".into(),
        ));
    }
    let mut best = TightnessReport {
        sup_ratio: 0.0,
        argmax_eta: f64::NAN,
        argmax_score: f64::NAN,
    };
    for i in 1..resolution {
        let eta = i as f64 / resolution as f64;
        let dist = DiscreteJoint::new(vec![vec![0.0]], vec![1.0], vec![eta])?;
        let f_p = minimizer(params, eta)?.clipped(TABULATION_CLIP);
        let f_c = bayes_label(eta);
        let mut candidates = vec![0.0, -f_p];
        candidates.extend([1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0].iter().map(|s| -s * f_c));
        for score in candidates {
            let check = verify_comparison(&dist, &ScoreFunction::tabulated(vec![score]), params)?;
            if check.lhs > 0.0 && check.rhs > 0.0 {
                let ratio = check.lhs / check.rhs;
                if ratio > best.sup_ratio {
                    best = TightnessReport {
                        sup_ratio: ratio,
                        argmax_eta: eta,
                        argmax_score: score,
                    };
                }
            }
        }
    }
    Ok(best)
}
