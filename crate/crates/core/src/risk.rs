//! Exact risks over a [`DiscreteJoint`]. Every integral is a finite,
//! compensated sum over atoms.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::distributions::DiscreteJoint;
use crate::error::{LumError, Result};
use crate::loss::LumParams;
use crate::numeric::{bayes_label, compensated_sum, fmt_f64, sign};
use crate::pointwise::{minimal_risk_at_margin, minimizer, phi_unchecked};

/// Magnitude used when an infinite minimizer value has to be tabulated.
pub const TABULATION_CLIP: f64 = 1e3;

/// A real-valued score on the support of a distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScoreFunction {
    /// One value per atom, aligned with the distribution's atom order.
    Tabulated { values: Vec<f64> },
    /// `w . x + b`
    Linear { w: Vec<f64>, b: f64 },
}

impl ScoreFunction {
    pub fn tabulated(values: Vec<f64>) -> Self {
        ScoreFunction::Tabulated { values }
    }

    pub fn constant(dist: &DiscreteJoint, value: f64) -> Self {
        ScoreFunction::Tabulated {
            values: vec![value; dist.len()],
        }
    }

    /// Scores at each atom of `dist`.
    pub fn evaluate(&self, dist: &DiscreteJoint) -> Result<Vec<f64>> {
        let scores = match self {
            ScoreFunction::Tabulated { values } => {
                if values.len() != dist.len() {
                    return Err(LumError::ShapeMismatch {
                        what: "tabulated score",
                        got: values.len(),
                        expected: dist.len(),
                    });
                }
                values.clone()
            }
            ScoreFunction::Linear { w, b } => {
                if w.len() != dist.dim() {
                    return Err(LumError::ShapeMismatch {
                        what: "linear score weights",
                        got: w.len(),
                        expected: dist.dim(),
                    });
                }
                dist.atoms()
                    .iter()
                    .map(|x| compensated_sum(x.iter().zip(w).map(|(a, b)| a * b)) + b)
                    .collect()
            }
        };
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(LumError::NonFinite("score value"));
        }
        Ok(scores)
    }
}

/// The Bayes rule `f_c` tabulated on `dist`.
pub fn bayes_rule_scores(dist: &DiscreteJoint) -> ScoreFunction {
    ScoreFunction::tabulated(dist.etas().iter().map(|&e| bayes_label(e)).collect())
}

/// `f_P` tabulated on `dist`, with infinite values replaced by `+-1e3`.
pub fn minimizer_scores(dist: &DiscreteJoint, params: &LumParams) -> Result<ScoreFunction> {
    let values = dist
        .etas()
        .iter()
        .map(|&eta| Ok(minimizer(params, eta)?.clipped(TABULATION_CLIP)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreFunction::tabulated(values))
}

fn misclassification_from_scores(dist: &DiscreteJoint, scores: &[f64]) -> f64 {
    compensated_sum(
        dist.weights()
            .iter()
            .zip(dist.etas())
            .zip(scores)
            .map(|((&w, &eta), &s)| {
                if sign(s) < 0.0 {
                    w * eta
                } else {
                    w * (1.0 - eta)
                }
            }),
    )
}

/// `R(sgn f) = P(sgn f(x) != y)` with `sgn(0) = +1`.
pub fn misclassification_risk(dist: &DiscreteJoint, f: &ScoreFunction) -> Result<f64> {
    Ok(misclassification_from_scores(dist, &f.evaluate(dist)?))
}

/// `R(f_c) = sum_i w_i min(eta_i, 1 - eta_i)`.
pub fn bayes_risk(dist: &DiscreteJoint) -> f64 {
    compensated_sum(
        dist.weights()
            .iter()
            .zip(dist.etas())
            .map(|(&w, &eta)| w * eta.min(1.0 - eta)),
    )
}

/// Mass of `|2 eta - 1|` on the atoms where `sgn f` disagrees with the Bayes
/// rule. Equals `R(sgn f) - R(f_c)`.
pub fn disagreement_mass(dist: &DiscreteJoint, f: &ScoreFunction) -> Result<f64> {
    let scores = f.evaluate(dist)?;
    Ok(compensated_sum(
        dist.weights()
            .iter()
            .zip(dist.etas())
            .zip(&scores)
            .filter(|((_, &eta), &s)| sign(s) != bayes_label(eta))
            .map(|((&w, &eta), _)| w * (2.0 * eta - 1.0).abs()),
    ))
}

/// `E(f) = sum_i w_i phi(eta_i, f(x_i))`.
pub fn generalization_error(
    dist: &DiscreteJoint,
    f: &ScoreFunction,
    params: &LumParams,
) -> Result<f64> {
    let scores = f.evaluate(dist)?;
    Ok(compensated_sum(
        dist.weights()
            .iter()
            .zip(dist.etas())
            .zip(&scores)
            .map(|((&w, &eta), &s)| w * phi_unchecked(params, eta, s)),
    ))
}

/// `E(f_P)` via the closed-form minimal conditional risk.
pub fn optimal_generalization_error(dist: &DiscreteJoint, params: &LumParams) -> f64 {
    compensated_sum(
        dist.weights()
            .iter()
            .zip(dist.etas())
            .map(|(&w, &eta)| w * minimal_risk_at_margin(params, (2.0 * eta - 1.0).abs())),
    )
}

/// All risks of one score function under one distribution and loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub misclassification_risk: f64,
    pub bayes_risk: f64,
    pub generalization_error: f64,
    pub optimal_generalization_error: f64,
    pub excess_misclassification: f64,
    pub excess_generalization: f64,
}

impl RiskReport {
    pub const CSV_HEADER: [&'static str; 6] = [
        "misclassification_risk",
        "bayes_risk",
        "generalization_error",
        "optimal_generalization_error",
        "excess_misclassification",
        "excess_generalization",
    ];

    fn values(&self) -> [f64; 6] {
        [
            self.misclassification_risk,
            self.bayes_risk,
            self.generalization_error,
            self.optimal_generalization_error,
            self.excess_misclassification,
            self.excess_generalization,
        ]
    }

    /// Header line plus one data line.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(Self::CSV_HEADER)?;
        out.write_record(self.values().iter().map(|&v| fmt_f64(v)))?;
        out.flush()?;
        Ok(())
    }
}

/// Builds a [`RiskReport`]. The generalization excess is summed atom by atom
/// so that small excesses keep their relative accuracy.
pub fn risk_report(
    dist: &DiscreteJoint,
    f: &ScoreFunction,
    params: &LumParams,
) -> Result<RiskReport> {
    let scores = f.evaluate(dist)?;
    let misclassification = misclassification_from_scores(dist, &scores);
    let bayes = misclassification_from_scores(
        dist,
        &dist
            .etas()
            .iter()
            .map(|&e| bayes_label(e))
            .collect::<Vec<_>>(),
    );
    let mut gen_terms = Vec::with_capacity(dist.len());
    let mut opt_terms = Vec::with_capacity(dist.len());
    let mut excess_terms = Vec::with_capacity(dist.len());
    for ((&w, &eta), &s) in dist.weights().iter().zip(dist.etas()).zip(&scores) {
        let at_f = phi_unchecked(params, eta, s);
        let at_min = minimal_risk_at_margin(params, (2.0 * eta - 1.0).abs());
        gen_terms.push(w * at_f);
        opt_terms.push(w * at_min);
        excess_terms.push(w * (at_f - at_min));
    }
    Ok(RiskReport {
        misclassification_risk: misclassification,
        bayes_risk: bayes,
        generalization_error: compensated_sum(gen_terms),
        optimal_generalization_error: compensated_sum(opt_terms),
        excess_misclassification: misclassification - bayes,
        excess_generalization: compensated_sum(excess_terms),
    })
}
