//! Ridge-penalized empirical LUM risk minimization for linear classifiers,
//! and the data-piling diagnostic.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::distributions::{make_hdlss_gaussians, SampleSet};
use crate::error::{LumError, Result};
use crate::loss::LumParams;
use crate::numeric::{compensated_sum, fmt_f64, sign, CompensatedSum};

/// `f(x) = w . x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct LinearModel {
    w: Vec<f64>,
    b: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    w: Vec<f64>,
    b: f64,
}

impl TryFrom<RawModel> for LinearModel {
    type Error = LumError;

    fn try_from(raw: RawModel) -> Result<Self> {
        LinearModel::new(raw.w, raw.b)
    }
}

impl From<LinearModel> for RawModel {
    fn from(m: LinearModel) -> Self {
        RawModel { w: m.w, b: m.b }
    }
}

impl LinearModel {
    pub fn new(w: Vec<f64>, b: f64) -> Result<Self> {
        if w.is_empty() {
            return Err(LumError::InvalidParameter(
                "weight vector must be non-empty".into(),
            ));
        }
        if w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
            return Err(LumError::NonFinite("model coefficient"));
        }
        Ok(LinearModel { w, b })
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        LinearModel::new(vec![0.0; dim], 0.0)
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn norm_w(&self) -> f64 {
        compensated_sum(self.w.iter().map(|v| v * v)).sqrt()
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.w.len() {
            return Err(LumError::ShapeMismatch {
                what: "feature dimension",
                got: dim,
                expected: self.w.len(),
            });
        }
        Ok(())
    }

    /// Unchecked score of one row.
    fn score(&self, x: &[f64]) -> f64 {
        let mut acc: CompensatedSum = self.w.iter().zip(x).map(|(w, x)| w * x).collect();
        acc.add(self.b);
        acc.value()
    }

    fn stepped(&self, grad: &Gradient, step: f64) -> LinearModel {
        LinearModel {
            w: self
                .w
                .iter()
                .zip(&grad.w)
                .map(|(w, g)| w - step * g)
                .collect(),
            b: self.b - step * grad.b,
        }
    }
}

/// Backtracking (Armijo) line search parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LineSearch {
    /// factor applied to the step after a rejected trial
    pub shrink: f64,
    /// accept when `F(theta - s g) <= F(theta) - sufficient_decrease * s |g|^2`
    pub sufficient_decrease: f64,
    pub initial_step: f64,
    /// below this step size backtracking counts as stalled
    pub min_step: f64,
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch {
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            initial_step: 1.0,
            min_step: 1e-16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub params: LumParams,
    /// ridge penalty on `w`; the intercept is not penalized
    pub lambda: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    #[serde(default)]
    pub line_search: LineSearch,
}

impl TrainConfig {
    pub fn new(params: LumParams, lambda: f64) -> Self {
        TrainConfig {
            params,
            lambda,
            max_iters: 10_000,
            grad_tol: 1e-8,
            line_search: LineSearch::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(LumError::InvalidParameter(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.max_iters == 0 {
            return Err(LumError::InvalidParameter("max_iters must be >= 1".into()));
        }
        if !(self.grad_tol.is_finite() && self.grad_tol > 0.0) {
            return Err(LumError::InvalidParameter(format!(
                "grad_tol must be > 0, got {}",
                self.grad_tol
            )));
        }
        let ls = &self.line_search;
        if !(ls.shrink > 0.0 && ls.shrink < 1.0) {
            return Err(LumError::InvalidParameter(format!(
                "shrink must lie in (0, 1), got {}",
                ls.shrink
            )));
        }
        if !(ls.sufficient_decrease > 0.0 && ls.sufficient_decrease < 1.0) {
            return Err(LumError::InvalidParameter(format!(
                "sufficient_decrease must lie in (0, 1), got {}",
                ls.sufficient_decrease
            )));
        }
        if !(ls.initial_step.is_finite() && ls.initial_step > 0.0) {
            return Err(LumError::InvalidParameter(
                "initial_step must be > 0".into(),
            ));
        }
        if !(ls.min_step > 0.0 && ls.min_step < ls.initial_step) {
            return Err(LumError::InvalidParameter(
                "min_step must lie in (0, initial_step)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub objective_history: Vec<f64>,
    pub grad_norm_history: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
}

impl TrainTrace {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["iter", "objective", "grad_norm"])?;
        for (i, (obj, g)) in self
            .objective_history
            .iter()
            .zip(&self.grad_norm_history)
            .enumerate()
        {
            out.write_record([i.to_string(), fmt_f64(*obj), fmt_f64(*g)])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w: Vec<f64>,
    pub b: f64,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        let mut acc: CompensatedSum = self.w.iter().map(|g| g * g).collect();
        acc.add(self.b * self.b);
        acc.value().sqrt()
    }
}

fn check_data(model: &LinearModel, data: &SampleSet) -> Result<()> {
    if data.is_empty() {
        return Err(LumError::InvalidParameter("training data is empty".into()));
    }
    model.check_dim(data.dim())
}

fn margins(model: &LinearModel, data: &SampleSet) -> Vec<f64> {
    data.features()
        .iter()
        .zip(data.labels())
        .map(|(x, &y)| f64::from(y) * model.score(x))
        .collect()
}

fn objective_unchecked(model: &LinearModel, data: &SampleSet, config: &TrainConfig) -> f64 {
    let loss = compensated_sum(
        margins(model, data)
            .into_iter()
            .map(|t| config.params.value(t)),
    );
    let norm2 = compensated_sum(model.w.iter().map(|v| v * v));
    loss / data.len() as f64 + 0.5 * config.lambda * norm2
}

/// `(1/n) sum V(y_i f(x_i)) + (lambda / 2) |w|^2`.
pub fn empirical_objective(
    model: &LinearModel,
    data: &SampleSet,
    config: &TrainConfig,
) -> Result<f64> {
    check_data(model, data)?;
    Ok(objective_unchecked(model, data, config))
}

fn gradient_unchecked(model: &LinearModel, data: &SampleSet, config: &TrainConfig) -> Gradient {
    let n = data.len() as f64;
    let coef: Vec<f64> = margins(model, data)
        .into_iter()
        .zip(data.labels())
        .map(|(t, &y)| config.params.derivative(t) * f64::from(y))
        .collect();
    let w = (0..model.dim())
        .map(|j| {
            let s = compensated_sum(coef.iter().zip(data.features()).map(|(c, x)| c * x[j]));
            s / n + config.lambda * model.w[j]
        })
        .collect();
    Gradient {
        w,
        b: compensated_sum(coef.iter().copied()) / n,
    }
}

/// Gradient of [`empirical_objective`]. At the hinge kink the subgradient
/// `V'(1) = 0` is used.
pub fn empirical_gradient(
    model: &LinearModel,
    data: &SampleSet,
    config: &TrainConfig,
) -> Result<Gradient> {
    check_data(model, data)?;
    Ok(gradient_unchecked(model, data, config))
}

fn finite_objective(value: f64, iteration: usize) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(LumError::Numerical(format!(
            "objective became {value} at iteration {iteration}"
        )))
    }
}

/// Gradient descent from `w = 0, b = 0` with backtracking. Each line search
/// starts from twice the previously accepted step.
///
/// When backtracking stalls (only expected at the hinge kink), a normalized
/// subgradient step of length `initial_step / sqrt(k)` is taken instead and the
/// best iterate seen is returned; the recorded objective is that of the best
/// iterate so the history stays nonincreasing.
pub fn fit(data: &SampleSet, config: &TrainConfig) -> Result<(LinearModel, TrainTrace)> {
    config.validate()?;
    if data.is_empty() {
        return Err(LumError::InvalidParameter("training data is empty".into()));
    }
    let ls = config.line_search;
    let mut model = LinearModel::zeros(data.dim())?;
    let mut objective = finite_objective(objective_unchecked(&model, data, config), 0)?;
    let mut grad = gradient_unchecked(&model, data, config);
    let mut best = (model.clone(), objective);
    let mut trace = TrainTrace {
        objective_history: vec![objective],
        grad_norm_history: vec![grad.norm()],
        iterations_used: 0,
        converged: false,
    };
    let mut step = ls.initial_step;
    let mut fallback_steps = 0usize;

    for iteration in 1..=config.max_iters {
        let gnorm = grad.norm();
        if gnorm <= config.grad_tol {
            trace.converged = true;
            break;
        }
        let g2 = gnorm * gnorm;
        let mut trial_step = (2.0 * step).min(1e6 * ls.initial_step);
        let accepted = loop {
            let candidate = model.stepped(&grad, trial_step);
            let value = objective_unchecked(&candidate, data, config);
            if value <= objective - ls.sufficient_decrease * trial_step * g2 {
                break Some((candidate, value));
            }
            trial_step *= ls.shrink;
            if trial_step < ls.min_step {
                break None;
            }
        };
        match accepted {
            Some((candidate, value)) => {
                step = trial_step;
                model = candidate;
                objective = finite_objective(value, iteration)?;
            }
            None if config.params.p().is_infinite() => {
                fallback_steps += 1;
                let length = ls.initial_step / (fallback_steps as f64).sqrt();
                model = model.stepped(&grad, length / gnorm);
                objective = finite_objective(objective_unchecked(&model, data, config), iteration)?;
                step = ls.initial_step;
            }
            None => {
                // no further decrease representable in floating point
                trace.iterations_used = iteration - 1;
                return Ok((best.0, trace));
            }
        }
        grad = gradient_unchecked(&model, data, config);
        if objective <= best.1 {
            best = (model.clone(), objective);
        }
        trace.objective_history.push(best.1);
        trace.grad_norm_history.push(grad.norm());
        trace.iterations_used = iteration;
    }
    Ok((best.0, trace))
}

/// Scores `Xw + b` and labels `sgn(score)` with `sgn(0) = +1`.
pub fn predict(model: &LinearModel, features: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<i8>)> {
    for row in features {
        model.check_dim(row.len())?;
    }
    let scores: Vec<f64> = features.iter().map(|x| model.score(x)).collect();
    let labels = scores.iter().map(|&s| sign(s) as i8).collect();
    Ok((scores, labels))
}

/// Fraction of samples whose label disagrees with the prediction.
pub fn training_error(model: &LinearModel, data: &SampleSet) -> Result<f64> {
    let (_, labels) = predict(model, data.features())?;
    let wrong = labels
        .iter()
        .zip(data.labels())
        .filter(|(a, b)| a != b)
        .count();
    Ok(wrong as f64 / data.len().max(1) as f64)
}

/// Average loss `(1/n) sum V(y_i f(x_i))`, without penalty.
pub fn empirical_risk(model: &LinearModel, data: &SampleSet, params: &LumParams) -> Result<f64> {
    check_data(model, data)?;
    let sum = compensated_sum(margins(model, data).into_iter().map(|t| params.value(t)));
    Ok(sum / data.len() as f64)
}

/// Share of the samples in the most populated bin of the normalized margins
/// `s_i = y_i f(x_i) / |w|`.
///
/// Bins have width `epsilon_fraction * (max s - min s)` and start at `min s`;
/// ties go to the lowest bin. All margins equal (up to `1e-12` relative) gives 1.
pub fn data_piling_score(
    model: &LinearModel,
    data: &SampleSet,
    epsilon_fraction: f64,
) -> Result<f64> {
    if !(epsilon_fraction > 0.0 && epsilon_fraction < 1.0) {
        return Err(LumError::InvalidParameter(format!(
            "epsilon_fraction must lie in (0, 1), got {epsilon_fraction}"
        )));
    }
    check_data(model, data)?;
    let norm = model.norm_w();
    if norm == 0.0 {
        return Err(LumError::InvalidParameter(
            "piling score needs w != 0".into(),
        ));
    }
    let s: Vec<f64> = margins(model, data).into_iter().map(|m| m / norm).collect();
    let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = s.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if hi - lo <= 1e-12 * scale {
        return Ok(1.0);
    }
    let width = epsilon_fraction * (hi - lo);
    let bins = (1.0 / epsilon_fraction).ceil() as usize;
    let mut counts = vec![0usize; bins];
    for v in &s {
        let i = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[i] += 1;
    }
    let mode = counts.iter().copied().fold(0, usize::max);
    Ok(mode as f64 / s.len() as f64)
}

/// HDLSS comparison of piling between two losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilingConfig {
    pub dim: usize,
    pub n_per_class: usize,
    pub mean_separation: f64,
    pub seeds: Vec<u64>,
    pub lambda: f64,
    pub epsilon_fraction: f64,
    pub max_iters: usize,
    pub smooth: LumParams,
    pub near_hinge: LumParams,
}

impl Default for PilingConfig {
    fn default() -> Self {
        PilingConfig {
            dim: 500,
            n_per_class: 25,
            mean_separation: 2.0,
            seeds: (0..5).collect(),
            lambda: 0.1,
            epsilon_fraction: 0.05,
            max_iters: 100_000,
            smooth: LumParams::dwd(),
            near_hinge: LumParams::finite(1e3, 1.0).expect("valid parameters"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilingReport {
    pub seeds: Vec<u64>,
    pub smooth_scores: Vec<f64>,
    pub near_hinge_scores: Vec<f64>,
    pub smooth_median: f64,
    pub near_hinge_median: f64,
}

impl PilingReport {
    /// True when the near-hinge median strictly exceeds the smooth median.
    pub fn near_hinge_piles_more(&self) -> bool {
        self.near_hinge_median > self.smooth_median
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["seed", "smooth_score", "near_hinge_score"])?;
        for ((seed, a), b) in self
            .seeds
            .iter()
            .zip(&self.smooth_scores)
            .zip(&self.near_hinge_scores)
        {
            out.write_record([seed.to_string(), fmt_f64(*a), fmt_f64(*b)])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Fits both losses on one HDLSS Gaussian sample per seed and scores piling.
pub fn piling_experiment(config: &PilingConfig) -> Result<PilingReport> {
    if config.seeds.is_empty() {
        return Err(LumError::InvalidParameter(
            "piling experiment needs at least one seed".into(),
        ));
    }
    let score = |params: LumParams, data: &SampleSet| -> Result<f64> {
        let mut train = TrainConfig::new(params, config.lambda);
        train.max_iters = config.max_iters;
        let (model, _) = fit(data, &train)?;
        data_piling_score(&model, data, config.epsilon_fraction)
    };
    let mut smooth_scores = Vec::with_capacity(config.seeds.len());
    let mut near_hinge_scores = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let data =
            make_hdlss_gaussians(config.dim, config.n_per_class, config.mean_separation, seed)?;
        smooth_scores.push(score(config.smooth, &data)?);
        near_hinge_scores.push(score(config.near_hinge, &data)?);
    }
    Ok(PilingReport {
        seeds: config.seeds.clone(),
        smooth_median: median(&smooth_scores),
        near_hinge_median: median(&near_hinge_scores),
        smooth_scores,
        near_hinge_scores,
    })
}
