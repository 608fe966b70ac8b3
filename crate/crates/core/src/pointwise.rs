//! Conditional (pointwise) risk of a LUM loss at a single input.
//!
//! With `eta = P(y = 1 | x)` the conditional risk of a score `t` is
//! `phi(t) = eta V(t) + (1 - eta) V(-t)`. Everything here depends on `eta`
//! only through the margin `a = |2 eta - 1|` once the minimizer is plugged in.

use serde::{Deserialize, Serialize};

use crate::error::{LumError, Result};
use crate::loss::{LumParams, Regime};
use crate::numeric::bayes_label;

/// A real number or one of the two infinities. Never NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
    NegInfinity,
}

impl ExtendedReal {
    pub fn finite(&self) -> Option<f64> {
        match *self {
            ExtendedReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// Replaces the infinities by `+-bound`.
    pub fn clipped(&self, bound: f64) -> f64 {
        match *self {
            ExtendedReal::Finite(v) => v,
            ExtendedReal::PosInfinity => bound,
            ExtendedReal::NegInfinity => -bound,
        }
    }

    pub fn as_f64(&self) -> f64 {
        self.clipped(f64::INFINITY)
    }

    /// Sign with the convention `sign(0) = +1`.
    pub fn sign(&self) -> f64 {
        match *self {
            ExtendedReal::Finite(v) => crate::numeric::sign(v),
            ExtendedReal::PosInfinity => 1.0,
            ExtendedReal::NegInfinity => -1.0,
        }
    }
}

pub(crate) fn check_probability(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(LumError::InvalidProbability { what, value })
    }
}

fn check_margin(a: f64) -> Result<()> {
    if (0.0..=1.0).contains(&a) {
        Ok(())
    } else {
        Err(LumError::InvalidParameter(format!(
            "margin a = {a} is outside [0, 1]"
        )))
    }
}

/// `ln((1 + a) / (1 - a))`, accurate for small `a`.
#[inline]
fn log_odds_of_margin(a: f64) -> f64 {
    2.0 * a.atanh()
}

/// Conditional risk `eta V(t) + (1 - eta) V(-t)`.
pub fn phi(params: &LumParams, eta: f64, t: f64) -> Result<f64> {
    check_probability("eta", eta)?;
    if !t.is_finite() {
        return Err(LumError::NonFinite("score t"));
    }
    Ok(phi_unchecked(params, eta, t))
}

#[inline]
pub(crate) fn phi_unchecked(params: &LumParams, eta: f64, t: f64) -> f64 {
    eta * params.value(t) + (1.0 - eta) * params.value(-t)
}

/// The minimizer `f_P(eta)` of the conditional risk.
///
/// Diverges to `+-inf` at `eta in {0, 1}` for finite `p`. For the hinge the
/// minimizer is the Bayes rule itself.
pub fn minimizer(params: &LumParams, eta: f64) -> Result<ExtendedReal> {
    check_probability("eta", eta)?;
    let upper = eta >= 0.5;
    let value = match params.regime() {
        Regime::Hinge => return Ok(ExtendedReal::Finite(bayes_label(eta))),
        _ if eta == 1.0 => return Ok(ExtendedReal::PosInfinity),
        _ if eta == 0.0 => return Ok(ExtendedReal::NegInfinity),
        Regime::Exponential { p } => {
            let p = p.get();
            let log_odds = (eta / (1.0 - eta)).ln();
            if upper {
                (log_odds + p) / (1.0 + p)
            } else {
                (log_odds - p) / (1.0 + p)
            }
        }
        Regime::Power { p, q } => {
            let (p, q) = (p.get(), q.get());
            // q (R^(1/(q+1)) - 1) with R the odds ratio on the dominant side
            let dominant_log_odds = if upper {
                (eta / (1.0 - eta)).ln()
            } else {
                ((1.0 - eta) / eta).ln()
            };
            let magnitude = (q * (dominant_log_odds / (q + 1.0)).exp_m1() + p) / (1.0 + p);
            if upper {
                magnitude
            } else {
                -magnitude
            }
        }
    };
    Ok(ExtendedReal::Finite(value))
}

/// Minimal conditional risk `phi(f_P(eta))` from the closed form in
/// `a = |2 eta - 1|`, continuous on all of `[0, 1]`.
pub fn minimal_risk(params: &LumParams, eta: f64) -> Result<f64> {
    check_probability("eta", eta)?;
    Ok(minimal_risk_at_margin(params, (2.0 * eta - 1.0).abs()))
}

pub(crate) fn minimal_risk_at_margin(params: &LumParams, a: f64) -> f64 {
    if a == 0.0 {
        return 1.0;
    }
    match params.regime() {
        Regime::Hinge => 1.0 - a,
        _ if a >= 1.0 => 0.0,
        Regime::Exponential { p } => {
            let p = p.get();
            0.5 * (1.0 - a) * (2.0 + log_odds_of_margin(a) / (1.0 + p))
        }
        Regime::Power { p, q } => {
            let (p, q) = (p.get(), q.get());
            let r = log_odds_of_margin(a);
            let tail_side = (1.0 + a) / (2.0 * (1.0 + p)) * (-r * q / (q + 1.0)).exp();
            let linear_side =
                0.5 * (1.0 - a) * (1.0 + (q * (r / (q + 1.0)).exp_m1() + p) / (1.0 + p));
            tail_side + linear_side
        }
    }
}

/// `g(a) = phi(0) - phi(f_P) = 1 - minimal risk at eta = (1 + a) / 2`.
pub fn excess_at_zero(params: &LumParams, a: f64) -> Result<f64> {
    check_margin(a)?;
    Ok(1.0 - minimal_risk_at_margin(params, a))
}

/// Closed-form `g'(a)` for `a in [0, 1)` and finite `p`.
///
/// Finite `q`:
/// `1/2 + (p - q)/(2(p+1)) + q/(2(p+1)) S^(1/(q+1)) - 1/(2(p+1)) S^(-q/(q+1))`
/// with `S = (1 + a)/(1 - a)`. `q = inf`:
/// `1 + ln(S)/(2(p+1)) - 1/((p+1)(1+a))`.
pub fn excess_derivative(params: &LumParams, a: f64) -> Result<f64> {
    check_margin(a)?;
    if a >= 1.0 {
        return Err(LumError::InvalidParameter(
            "g'(a) diverges at a = 1".to_string(),
        ));
    }
    let r = log_odds_of_margin(a);
    match params.regime() {
        Regime::Hinge => Err(LumError::InvalidParameter(
            "g'(a) is only defined for finite p".to_string(),
        )),
        Regime::Exponential { p } => {
            let p = p.get();
            Ok(1.0 + r / (2.0 * (p + 1.0)) - 1.0 / ((p + 1.0) * (1.0 + a)))
        }
        Regime::Power { p, q } => {
            let (p, q) = (p.get(), q.get());
            let denom = 2.0 * (p + 1.0);
            Ok(0.5 + (p - q) / denom + q * (r / (q + 1.0)).exp() / denom
                - (-r * q / (q + 1.0)).exp() / denom)
        }
    }
}

/// Lower bound on `g(a)` used by the comparison argument:
///
/// * `0 < p < inf`: `p/(p+1) a` (any `q`)
/// * `p = 0`, finite `q`: `q/(q+1) (1/2)^((2q+1)/(q+1)) a^2`
/// * `p = 0`, `q = inf`: `a^2 / 2`
pub fn excess_lower_bound(params: &LumParams, a: f64) -> Result<f64> {
    check_margin(a)?;
    match params.regime() {
        Regime::Hinge => Err(LumError::InvalidParameter(
            "no excess lower bound is defined for p = inf".to_string(),
        )),
        Regime::Exponential { p } | Regime::Power { p, .. } if p.get() > 0.0 => {
            let p = p.get();
            Ok(p / (p + 1.0) * a)
        }
        Regime::Exponential { .. } => Ok(0.5 * a * a),
        Regime::Power { q, .. } => {
            let q = q.get();
            Ok(q / (q + 1.0) * 0.5f64.powf((2.0 * q + 1.0) / (q + 1.0)) * a * a)
        }
    }
}

/// Whether `sign(f_P(eta))` agrees with the Bayes rule at `eta`.
pub fn is_fisher_consistent(params: &LumParams, eta: f64) -> Result<bool> {
    Ok(minimizer(params, eta)?.sign() == bayes_label(eta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dwd() -> LumParams {
        LumParams::dwd()
    }

    /// Brute-force min of phi over a uniform grid, refined once around the
    /// best grid point by golden-section search.
    fn argmin_oracle(params: &LumParams, eta: f64, lo: f64, hi: f64, step: f64) -> f64 {
        let n = ((hi - lo) / step).round() as usize;
        let mut best = f64::INFINITY;
        let mut best_t = lo;
        for i in 0..=n {
            let t = lo + step * i as f64;
            let v = phi_unchecked(params, eta, t);
            if v < best {
                best = v;
                best_t = t;
            }
        }
        let (mut a, mut b) = ((best_t - step).max(lo), (best_t + step).min(hi));
        let gr = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - gr * (b - a);
            let d = a + gr * (b - a);
            if phi_unchecked(params, eta, c) < phi_unchecked(params, eta, d) {
                b = d;
            } else {
                a = c;
            }
        }
        best.min(phi_unchecked(params, eta, 0.5 * (a + b)))
    }

    fn all_params() -> Vec<LumParams> {
        let mut out = Vec::new();
        for &p in &[0.0, 0.5, 1.0, 2.0, 10.0] {
            for &q in &[0.5, 1.0, 2.0, 10.0] {
                out.push(LumParams::finite(p, q).unwrap());
            }
            out.push(LumParams::exponential(p).unwrap());
        }
        out
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(&dwd(), 0.5, 0.0).unwrap(), 1.0);
        for params in all_params() {
            assert_eq!(phi(&params, 1.0, 0.0).unwrap(), 1.0);
        }
        assert!((phi(&dwd(), 0.8, 1.0).unwrap() - 0.6).abs() < 1e-15);
        assert!(phi(&dwd(), 1.2, 0.0).is_err());
        assert!(phi(&dwd(), -0.0001, 0.0).is_err());
    }

    #[test]
    fn minimizer_examples() {
        assert_eq!(minimizer(&dwd(), 0.5).unwrap(), ExtendedReal::Finite(0.5));
        let v = minimizer(&dwd(), 0.8).unwrap().finite().unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let v = minimizer(&LumParams::exponential(0.0).unwrap(), 0.8)
            .unwrap()
            .finite()
            .unwrap();
        assert!((v - 4f64.ln()).abs() < 1e-15);
        let hinge = LumParams::hinge(1.0).unwrap();
        assert_eq!(minimizer(&hinge, 0.3).unwrap(), ExtendedReal::Finite(-1.0));
        assert_eq!(minimizer(&dwd(), 1.0).unwrap(), ExtendedReal::PosInfinity);
        assert_eq!(minimizer(&dwd(), 0.0).unwrap(), ExtendedReal::NegInfinity);
    }

    #[test]
    fn minimizer_matches_unsimplified_formula() {
        // Direct transcription: (1/(1+p)) [ (eta/(1-eta))^(1/(q+1)) q - q + p ]
        for &(p, q) in &[(0.0f64, 0.5f64), (1.0, 1.0), (2.0, 3.0), (10.0, 10.0)] {
            let params = LumParams::finite(p, q).unwrap();
            for &eta in &[0.05f64, 0.3, 0.49, 0.5, 0.51, 0.7, 0.95] {
                let expected = if eta >= 0.5 {
                    ((eta / (1.0 - eta)).powf(1.0 / (q + 1.0)) * q - q + p) / (1.0 + p)
                } else {
                    -(((1.0 - eta) / eta).powf(1.0 / (q + 1.0)) * q - q + p) / (1.0 + p)
                };
                let got = minimizer(&params, eta).unwrap().finite().unwrap();
                assert!((got - expected).abs() < 1e-12, "p={p} q={q} eta={eta}");
            }
        }
    }

    #[test]
    fn minimal_risk_examples() {
        assert_eq!(minimal_risk(&dwd(), 0.5).unwrap(), 1.0);
        for params in all_params() {
            assert_eq!(minimal_risk(&params, 1.0).unwrap(), 0.0);
            assert_eq!(minimal_risk(&params, 0.0).unwrap(), 0.0);
        }
        let params = LumParams::finite(0.0, 1.0).unwrap();
        let oracle = argmin_oracle(&params, 0.8, -20.0, 20.0, 1e-4);
        let closed = minimal_risk(&params, 0.8).unwrap();
        assert!((closed - oracle).abs() < 1e-9, "{closed} vs {oracle}");
    }

    #[test]
    fn hinge_minimal_risk_is_twice_min() {
        let hinge = LumParams::hinge(2.0).unwrap();
        for &eta in &[0.0, 0.1, 0.3, 0.5, 0.8, 1.0] {
            let m = minimal_risk(&hinge, eta).unwrap();
            assert!((m - 2.0 * eta.min(1.0 - eta)).abs() < 1e-15);
        }
    }

    #[test]
    fn closed_form_matches_phi_at_minimizer() {
        for params in all_params() {
            for i in 1..100 {
                let eta = i as f64 / 100.0;
                let t = minimizer(&params, eta).unwrap().finite().unwrap();
                let direct = phi_unchecked(&params, eta, t);
                let closed = minimal_risk(&params, eta).unwrap();
                assert!((direct - closed).abs() <= 1e-9, "{params} eta={eta}");
            }
        }
    }

    #[test]
    fn minimizer_beats_grid_search() {
        for params in all_params() {
            for i in 0..41 {
                let eta = 0.01 + 0.98 * i as f64 / 40.0;
                let t = minimizer(&params, eta).unwrap().clipped(20.0);
                let closed = phi_unchecked(&params, eta, t);
                let oracle = argmin_oracle(&params, eta, -20.0, 20.0, 1e-2);
                assert!(closed <= oracle + 1e-9, "{params} eta={eta}");
            }
        }
    }

    #[test]
    fn excess_examples() {
        assert_eq!(excess_at_zero(&dwd(), 0.0).unwrap(), 0.0);
        assert_eq!(excess_at_zero(&dwd(), 1.0).unwrap(), 1.0);
        let g = excess_at_zero(&LumParams::exponential(0.0).unwrap(), 0.6).unwrap();
        assert!(g >= 0.18);
        assert!(excess_at_zero(&dwd(), 1.5).is_err());
    }

    #[test]
    fn endpoint_identities_exact() {
        for params in all_params() {
            assert_eq!(excess_at_zero(&params, 0.0).unwrap(), 0.0);
            assert_eq!(excess_at_zero(&params, 1.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn excess_derivative_examples() {
        assert!((excess_derivative(&dwd(), 0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(
            excess_derivative(&LumParams::exponential(0.0).unwrap(), 0.0)
                .unwrap()
                .abs()
                < 1e-15
        );
        let params = LumParams::finite(2.0, 3.0).unwrap();
        let h = 1e-6;
        let fd = (excess_at_zero(&params, 0.5 + h).unwrap()
            - excess_at_zero(&params, 0.5 - h).unwrap())
            / (2.0 * h);
        let an = excess_derivative(&params, 0.5).unwrap();
        assert!((fd - an).abs() <= 1e-6 * an.abs(), "{fd} vs {an}");
        assert!(excess_derivative(&dwd(), 1.0).is_err());
        assert!(excess_derivative(&LumParams::hinge(1.0).unwrap(), 0.5).is_err());
    }

    #[test]
    fn excess_derivative_central_differences() {
        let h = 1e-6;
        for params in all_params() {
            for i in 0..=89 {
                let a = 0.01 + i as f64 * 0.01;
                let fd = (excess_at_zero(&params, a + h).unwrap()
                    - excess_at_zero(&params, a - h).unwrap())
                    / (2.0 * h);
                let an = excess_derivative(&params, a).unwrap();
                assert!(
                    (fd - an).abs() <= 1e-5 * an.abs().max(1e-8),
                    "{params} a={a}"
                );
            }
        }
    }

    #[test]
    fn lower_bound_examples() {
        assert!((excess_lower_bound(&dwd(), 0.5).unwrap() - 0.25).abs() < 1e-15);
        let v = excess_lower_bound(&LumParams::finite(0.0, 1.0).unwrap(), 1.0).unwrap();
        assert!((v - 2f64.powf(-2.5)).abs() < 1e-15);
        assert_eq!(
            excess_lower_bound(&LumParams::exponential(0.0).unwrap(), 0.0).unwrap(),
            0.0
        );
        assert!(excess_lower_bound(&LumParams::hinge(1.0).unwrap(), 0.5).is_err());
        // q = inf with p > 0 keeps the linear bound
        let v = excess_lower_bound(&LumParams::exponential(3.0).unwrap(), 0.4).unwrap();
        assert!((v - 0.3).abs() < 1e-15);
    }

    #[test]
    fn excess_dominates_lower_bound() {
        for params in all_params() {
            for i in 0..1000 {
                let a = 0.999 * i as f64 / 999.0;
                let g = excess_at_zero(&params, a).unwrap();
                let lb = excess_lower_bound(&params, a).unwrap();
                assert!(g >= lb - 1e-12, "{params} a={a}: {g} < {lb}");
            }
        }
    }

    #[test]
    fn fisher_consistency_examples() {
        assert!(is_fisher_consistent(&dwd(), 0.9).unwrap());
        assert!(is_fisher_consistent(&LumParams::finite(0.0, 2.0).unwrap(), 0.5).unwrap());
        assert!(is_fisher_consistent(&LumParams::exponential(3.0).unwrap(), 0.1).unwrap());
        for params in all_params() {
            for i in 0..=200 {
                let eta = i as f64 / 200.0;
                assert!(
                    is_fisher_consistent(&params, eta).unwrap(),
                    "{params} eta={eta}"
                );
            }
        }
    }

    #[test]
    fn phi_is_convex_in_t() {
        for params in all_params() {
            for &eta in &[0.1, 0.5, 0.77] {
                for i in 0..60 {
                    let t1 = -6.0 + 0.2 * i as f64;
                    let t2 = t1 + 0.7;
                    let mid = phi_unchecked(&params, eta, 0.5 * (t1 + t2));
                    let chord =
                        0.5 * (phi_unchecked(&params, eta, t1) + phi_unchecked(&params, eta, t2));
                    assert!(mid <= chord + 1e-12);
                }
            }
        }
    }
}
