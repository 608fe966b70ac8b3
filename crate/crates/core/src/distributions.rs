//! Finite-support joint distributions and samples drawn from them.

use std::io::{Read, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LumError, Result};
use crate::numeric::{compensated_sum, fmt_f64};
use crate::pointwise::check_probability;

/// Allowed deviation of the weight total from 1.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// The generator behind every stochastic routine in the crate.
pub type LumRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> LumRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A joint law on `X x {-1, +1}` with finitely many atoms.
///
/// `weights` is the marginal on the atoms and `etas[i] = P(y = 1 | atoms[i])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawJoint", into = "RawJoint")]
pub struct DiscreteJoint {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
    etas: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJoint {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
    etas: Vec<f64>,
}

impl TryFrom<RawJoint> for DiscreteJoint {
    type Error = LumError;

    fn try_from(raw: RawJoint) -> Result<Self> {
        DiscreteJoint::new(raw.atoms, raw.weights, raw.etas)
    }
}

impl From<DiscreteJoint> for RawJoint {
    fn from(d: DiscreteJoint) -> Self {
        RawJoint {
            atoms: d.atoms,
            weights: d.weights,
            etas: d.etas,
        }
    }
}

impl DiscreteJoint {
    /// Validates lengths, dimensions, probabilities and the weight total.
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>, etas: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(LumError::InvalidDistribution(
                "at least one atom is required".into(),
            ));
        }
        if weights.len() != atoms.len() {
            return Err(LumError::ShapeMismatch {
                what: "weights",
                got: weights.len(),
                expected: atoms.len(),
            });
        }
        if etas.len() != atoms.len() {
            return Err(LumError::ShapeMismatch {
                what: "etas",
                got: etas.len(),
                expected: atoms.len(),
            });
        }
        let dim = atoms[0].len();
        if dim == 0 {
            return Err(LumError::InvalidDistribution(
                "atoms must have dimension >= 1".into(),
            ));
        }
        for atom in &atoms {
            if atom.len() != dim {
                return Err(LumError::ShapeMismatch {
                    what: "atom dimension",
                    got: atom.len(),
                    expected: dim,
                });
            }
            if atom.iter().any(|v| !v.is_finite()) {
                return Err(LumError::NonFinite("atom coordinate"));
            }
        }
        for &w in &weights {
            if !(w.is_finite() && w >= 0.0) {
                return Err(LumError::InvalidDistribution(format!("invalid weight {w}")));
            }
        }
        for &eta in &etas {
            check_probability("eta", eta)?;
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(LumError::InvalidDistribution(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(DiscreteJoint {
            atoms,
            weights,
            etas,
        })
    }

    /// Like [`DiscreteJoint::new`] but rescales nonnegative weights to sum to one.
    pub fn normalized(atoms: Vec<Vec<f64>>, weights: Vec<f64>, etas: Vec<f64>) -> Result<Self> {
        if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(LumError::InvalidDistribution(format!("invalid weight {w}")));
        }
        let total = compensated_sum(weights.iter().copied());
        if total <= 0.0 {
            return Err(LumError::InvalidDistribution("weights sum to zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Self::new(atoms, weights, etas)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// Replaces `eta` by `1 - eta` wherever `flips` is set. `|2 eta - 1|`, and
    /// hence any noise condition, is unchanged.
    pub fn with_flipped_conditionals(&self, flips: &[bool]) -> Result<Self> {
        if flips.len() != self.len() {
            return Err(LumError::ShapeMismatch {
                what: "flip mask",
                got: flips.len(),
                expected: self.len(),
            });
        }
        let etas = self
            .etas
            .iter()
            .zip(flips)
            .map(|(&eta, &flip)| if flip { 1.0 - eta } else { eta })
            .collect();
        Ok(DiscreteJoint {
            atoms: self.atoms.clone(),
            weights: self.weights.clone(),
            etas,
        })
    }

    /// CSV with header `weight,eta,x0,x1,...`, one row per atom.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["weight".to_string(), "eta".to_string()];
        header.extend((0..self.dim()).map(|j| format!("x{j}")));
        out.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![fmt_f64(self.weights[i]), fmt_f64(self.etas[i])];
            row.extend(self.atoms[i].iter().map(|&v| fmt_f64(v)));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut input = csv::Reader::from_reader(reader);
        let header = input.headers()?.clone();
        if header.len() < 3 || &header[0] != "weight" || &header[1] != "eta" {
            return Err(LumError::Format(
                "distribution CSV must start with columns weight,eta,x0".into(),
            ));
        }
        let (mut atoms, mut weights, mut etas) = (Vec::new(), Vec::new(), Vec::new());
        for record in input.records() {
            let values = parse_row(&record?)?;
            weights.push(values[0]);
            etas.push(values[1]);
            atoms.push(values[2..].to_vec());
        }
        Self::new(atoms, weights, etas)
    }
}

fn parse_row(record: &csv::StringRecord) -> Result<Vec<f64>> {
    record
        .iter()
        .map(|field| {
            field
                .trim()
                .parse::<f64>()
                .map_err(|_| LumError::Format(format!("cannot parse '{field}' as a number")))
        })
        .collect()
}

/// Labelled points: an `n x d` feature matrix (row-major) and labels in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSamples", into = "RawSamples")]
pub struct SampleSet {
    features: Vec<Vec<f64>>,
    labels: Vec<i8>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSamples {
    features: Vec<Vec<f64>>,
    labels: Vec<i8>,
}

impl TryFrom<RawSamples> for SampleSet {
    type Error = LumError;

    fn try_from(raw: RawSamples) -> Result<Self> {
        SampleSet::new(raw.features, raw.labels)
    }
}

impl From<SampleSet> for RawSamples {
    fn from(s: SampleSet) -> Self {
        RawSamples {
            features: s.features,
            labels: s.labels,
        }
    }
}

impl SampleSet {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<i8>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(LumError::ShapeMismatch {
                what: "labels",
                got: labels.len(),
                expected: features.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
            return Err(LumError::Format(format!("label {bad} is not +1 or -1")));
        }
        if let Some(first) = features.first() {
            let dim = first.len();
            if dim == 0 {
                return Err(LumError::Format("feature rows must be non-empty".into()));
            }
            for row in &features {
                if row.len() != dim {
                    return Err(LumError::ShapeMismatch {
                        what: "feature row",
                        got: row.len(),
                        expected: dim,
                    });
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(LumError::NonFinite("feature value"));
                }
            }
        }
        Ok(SampleSet { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Feature dimension; 0 for an empty set.
    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    /// CSV with header `label,x0,x1,...`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["label".to_string()];
        header.extend((0..self.dim()).map(|j| format!("x{j}")));
        out.write_record(&header)?;
        for (row, &y) in self.features.iter().zip(&self.labels) {
            let mut record = vec![y.to_string()];
            record.extend(row.iter().map(|&v| fmt_f64(v)));
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut input = csv::Reader::from_reader(reader);
        let header = input.headers()?.clone();
        if header.len() < 2 || &header[0] != "label" {
            return Err(LumError::Format(
                "sample CSV must start with columns label,x0".into(),
            ));
        }
        let (mut features, mut labels) = (Vec::new(), Vec::new());
        for record in input.records() {
            let values = parse_row(&record?)?;
            let y = values[0];
            if y != 1.0 && y != -1.0 {
                return Err(LumError::Format(format!("label {y} is not +1 or -1")));
            }
            labels.push(y as i8);
            features.push(values[1..].to_vec());
        }
        Self::new(features, labels)
    }
}

/// How per-atom values of a grid distribution are produced.
pub enum GridSpec<'a> {
    Constant(f64),
    /// One value per atom, in grid order.
    Table(&'a [f64]),
    /// Evaluated at the atom's coordinate in `[0, 1]`.
    Function(&'a dyn Fn(f64) -> f64),
}

impl GridSpec<'_> {
    fn eval(&self, i: usize, x: f64, n: usize) -> Result<f64> {
        match self {
            GridSpec::Constant(v) => Ok(*v),
            GridSpec::Table(values) => {
                if values.len() != n {
                    return Err(LumError::ShapeMismatch {
                        what: "grid table",
                        got: values.len(),
                        expected: n,
                    });
                }
                Ok(values[i])
            }
            GridSpec::Function(f) => Ok(f(x)),
        }
    }
}

/// A distribution on the grid `x_i = i / (n - 1)` in `[0, 1]` (a single atom
/// sits at `0.5`). Weights are normalized; etas must already be valid.
pub fn make_grid_distribution(
    n_atoms: usize,
    eta_spec: &GridSpec<'_>,
    weight_spec: &GridSpec<'_>,
) -> Result<DiscreteJoint> {
    if n_atoms == 0 {
        return Err(LumError::InvalidParameter("n_atoms must be >= 1".into()));
    }
    let coord = |i: usize| {
        if n_atoms == 1 {
            0.5
        } else {
            i as f64 / (n_atoms - 1) as f64
        }
    };
    let mut atoms = Vec::with_capacity(n_atoms);
    let mut etas = Vec::with_capacity(n_atoms);
    let mut weights = Vec::with_capacity(n_atoms);
    for i in 0..n_atoms {
        let x = coord(i);
        atoms.push(vec![x]);
        etas.push(eta_spec.eval(i, x, n_atoms)?);
        weights.push(weight_spec.eval(i, x, n_atoms)?);
    }
    DiscreteJoint::normalized(atoms, weights, etas)
}

fn check_noise_exponent(tau: f64, c_tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(LumError::InvalidParameter(format!(
            "noise exponent tau must be finite and positive, got {tau}"
        )));
    }
    if !(c_tau > 0.0 && c_tau <= 1.0) {
        return Err(LumError::InvalidParameter(format!(
            "noise constant c_tau must lie in (0, 1], got {c_tau}"
        )));
    }
    Ok(())
}

/// `eta(x) = (1 + c_tau x^(1/tau)) / 2`, so `|2 eta - 1| = c_tau x^(1/tau)`.
pub fn tsybakov_eta(tau: f64, c_tau: f64, x: f64) -> Result<f64> {
    check_noise_exponent(tau, c_tau)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(LumError::InvalidParameter(format!(
            "x = {x} is outside [0, 1]"
        )));
    }
    Ok(0.5 * (1.0 + c_tau * x.powf(1.0 / tau)))
}

/// Uniform weights on the atoms `x_i = i / n`, `i = 1..=n`, with
/// `eta = (1 + c_tau x^(1/tau)) / 2`.
///
/// Then `P_X(|2 eta - 1| <= c_tau t) = floor(n t^tau) / n <= t^tau`, so the
/// noise condition holds exactly rather than only up to discretization.
pub fn make_tsybakov_distribution(tau: f64, c_tau: f64, n_atoms: usize) -> Result<DiscreteJoint> {
    check_noise_exponent(tau, c_tau)?;
    if n_atoms == 0 {
        return Err(LumError::InvalidParameter("n_atoms must be >= 1".into()));
    }
    let n = n_atoms as f64;
    let atoms: Vec<Vec<f64>> = (1..=n_atoms).map(|i| vec![i as f64 / n]).collect();
    let etas = atoms
        .iter()
        .map(|x| tsybakov_eta(tau, c_tau, x[0]))
        .collect::<Result<Vec<_>>>()?;
    DiscreteJoint::new(atoms, vec![1.0 / n; n_atoms], etas)
}

/// Outcome of [`check_tsybakov`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsybakovReport {
    /// Largest `mass(t) - t^tau` over the grid, floored at 0.
    pub max_violation: f64,
    pub passed: bool,
}

/// Checks `P_X(|2 eta - 1| <= c_tau t) <= t^tau` on `t_grid`, allowing one
/// atom's weight of slack for the quantized CDF.
pub fn check_tsybakov(
    dist: &DiscreteJoint,
    tau: f64,
    c_tau: f64,
    t_grid: &[f64],
) -> Result<TsybakovReport> {
    if let Some(&t) = t_grid.iter().find(|&&t| !(t.is_finite() && t > 0.0)) {
        return Err(LumError::InvalidParameter(format!(
            "grid value t = {t} must be positive"
        )));
    }
    if !(tau >= 0.0 && c_tau > 0.0) {
        return Err(LumError::InvalidParameter(
            "need tau >= 0 and c_tau > 0".into(),
        ));
    }
    let slack = dist.max_weight() + WEIGHT_SUM_TOLERANCE;
    let margins: Vec<f64> = dist.etas().iter().map(|&e| (2.0 * e - 1.0).abs()).collect();
    let mut worst = 0.0f64;
    let mut passed = true;
    for &t in t_grid {
        let threshold = c_tau * t;
        let mass = compensated_sum(
            margins
                .iter()
                .zip(dist.weights())
                .filter(|(&a, _)| a <= threshold)
                .map(|(_, &w)| w),
        );
        let excess = mass - t.powf(tau);
        worst = worst.max(excess);
        if excess > slack {
            passed = false;
        }
    }
    Ok(TsybakovReport {
        max_violation: worst,
        passed,
    })
}

/// `t = 0.05, 0.10, ..., 0.95`.
pub fn standard_t_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).collect()
}

/// `n` i.i.d. draws: an atom by weight, then `y = +1` with probability eta.
pub fn sample_from(dist: &DiscreteJoint, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(LumError::InvalidParameter(
            "sample size must be >= 1".into(),
        ));
    }
    let index = WeightedIndex::new(dist.weights())
        .map_err(|e| LumError::InvalidDistribution(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let i = index.sample(&mut rng);
        let u: f64 = rng.random();
        features.push(dist.atoms()[i].clone());
        labels.push(if u < dist.etas()[i] { 1 } else { -1 });
    }
    SampleSet::new(features, labels)
}

/// Two isotropic unit-variance Gaussian clouds centred at
/// `+-(mean_separation / 2) e_1`: the first `n_per_class` rows are `+1`,
/// the rest `-1`.
pub fn make_hdlss_gaussians(
    d: usize,
    n_per_class: usize,
    mean_separation: f64,
    seed: u64,
) -> Result<SampleSet> {
    if d == 0 {
        return Err(LumError::InvalidParameter("dimension must be >= 1".into()));
    }
    if n_per_class < 2 {
        return Err(LumError::InvalidParameter(
            "need at least two samples per class".into(),
        ));
    }
    if !mean_separation.is_finite() {
        return Err(LumError::NonFinite("mean separation"));
    }
    let mut rng = rng_from_seed(seed);
    let mut features = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for label in [1i8, -1] {
        let shift = 0.5 * mean_separation * f64::from(label);
        for _ in 0..n_per_class {
            let mut row: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            row[0] += shift;
            features.push(row);
            labels.push(label);
        }
    }
    SampleSet::new(features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::bayes_risk;

    #[test]
    fn grid_examples() {
        let d =
            make_grid_distribution(1, &GridSpec::Constant(1.0), &GridSpec::Constant(1.0)).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.etas(), &[1.0]);
        let d = make_grid_distribution(
            2,
            &GridSpec::Table(&[0.2, 0.9]),
            &GridSpec::Table(&[0.5, 0.5]),
        )
        .unwrap();
        assert!((bayes_risk(&d) - 0.15).abs() < 1e-15);
        let d = make_grid_distribution(101, &GridSpec::Function(&|x| x), &GridSpec::Constant(3.0))
            .unwrap();
        assert_eq!(d.len(), 101);
        assert_eq!(d.etas()[0], 0.0);
        assert_eq!(d.etas()[100], 1.0);
        assert!((d.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad_eta =
            make_grid_distribution(2, &GridSpec::Table(&[0.2, 1.1]), &GridSpec::Constant(1.0));
        assert!(matches!(bad_eta, Err(LumError::InvalidProbability { .. })));
        let bad_w =
            make_grid_distribution(2, &GridSpec::Constant(0.5), &GridSpec::Table(&[1.0, -0.1]));
        assert!(bad_w.is_err());
        assert!(
            make_grid_distribution(0, &GridSpec::Constant(0.5), &GridSpec::Constant(1.0)).is_err()
        );
        assert!(DiscreteJoint::new(vec![vec![0.0]], vec![0.9], vec![0.5]).is_err());
        assert!(DiscreteJoint::new(
            vec![vec![0.0], vec![1.0, 2.0]],
            vec![0.5, 0.5],
            vec![0.5, 0.5]
        )
        .is_err());
    }

    #[test]
    fn tsybakov_examples() {
        assert_eq!(tsybakov_eta(1.0, 1.0, 0.25).unwrap(), 0.625);
        assert_eq!(tsybakov_eta(2.0, 1.0, 0.0).unwrap(), 0.5);
        assert!(make_tsybakov_distribution(1.0, 1.5, 10).is_err());
        assert!(make_tsybakov_distribution(0.0, 1.0, 10).is_err());
        assert!(make_tsybakov_distribution(f64::INFINITY, 1.0, 10).is_err());
        let d = make_tsybakov_distribution(1.0, 1.0, 1000).unwrap();
        let report = check_tsybakov(&d, 1.0, 1.0, &standard_t_grid()).unwrap();
        assert!(report.passed);
    }

    #[test]
    fn tsybakov_construction_holds_without_slack() {
        for &tau in &[0.5, 1.0, 2.0, 3.7] {
            for &c in &[0.25, 0.5, 1.0] {
                for &n in &[1usize, 7, 100, 1000] {
                    let d = make_tsybakov_distribution(tau, c, n).unwrap();
                    // every atom's own threshold is where the step function jumps
                    let mut grid: Vec<f64> =
                        d.etas().iter().map(|&e| (2.0 * e - 1.0) / c).collect();
                    grid.extend(standard_t_grid());
                    let r = check_tsybakov(&d, tau, c, &grid).unwrap();
                    assert!(r.passed);
                    assert!(
                        r.max_violation <= 1e-12,
                        "tau={tau} c={c} n={n}: {}",
                        r.max_violation
                    );
                }
            }
        }
    }

    #[test]
    fn tau_zero_always_passes() {
        let d =
            make_grid_distribution(5, &GridSpec::Constant(0.5), &GridSpec::Constant(1.0)).unwrap();
        let r = check_tsybakov(&d, 0.0, 1.0, &standard_t_grid()).unwrap();
        assert!(r.passed);
        let single =
            make_grid_distribution(1, &GridSpec::Constant(1.0), &GridSpec::Constant(1.0)).unwrap();
        let r = check_tsybakov(&single, 5.0, 1.0, &[0.5]).unwrap();
        assert!(r.passed);
        assert_eq!(r.max_violation, 0.0);
    }

    #[test]
    fn noisy_distribution_fails_check() {
        // all mass at eta = 1/2 violates any positive exponent
        let d =
            make_grid_distribution(10, &GridSpec::Constant(0.5), &GridSpec::Constant(1.0)).unwrap();
        let r = check_tsybakov(&d, 1.0, 1.0, &standard_t_grid()).unwrap();
        assert!(!r.passed);
        assert!(r.max_violation > 0.9);
    }

    #[test]
    fn flipping_preserves_margins() {
        let d = make_tsybakov_distribution(2.0, 0.5, 20).unwrap();
        let flips: Vec<bool> = (0..20).map(|i| i % 3 == 0).collect();
        let f = d.with_flipped_conditionals(&flips).unwrap();
        for (a, b) in d.etas().iter().zip(f.etas()) {
            assert!(((2.0 * a - 1.0).abs() - (2.0 * b - 1.0).abs()).abs() < 1e-15);
        }
        assert!(f.etas()[0] < 0.5);
    }

    #[test]
    fn sampling_examples() {
        let single =
            make_grid_distribution(1, &GridSpec::Constant(1.0), &GridSpec::Constant(1.0)).unwrap();
        let s = sample_from(&single, 10, 3).unwrap();
        assert!(s.labels().iter().all(|&y| y == 1));
        let d = make_grid_distribution(
            3,
            &GridSpec::Table(&[0.1, 0.5, 0.8]),
            &GridSpec::Constant(1.0),
        )
        .unwrap();
        assert_eq!(
            sample_from(&d, 5, 11).unwrap(),
            sample_from(&d, 5, 11).unwrap()
        );
        assert_ne!(
            sample_from(&d, 50, 11).unwrap(),
            sample_from(&d, 50, 12).unwrap()
        );
    }

    #[test]
    fn sampling_frequencies_concentrate() {
        let d = make_grid_distribution(
            2,
            &GridSpec::Table(&[0.3, 0.85]),
            &GridSpec::Table(&[0.5, 0.5]),
        )
        .unwrap();
        let n = 100_000;
        let s = sample_from(&d, n, 42).unwrap();
        for (k, atom) in d.atoms().iter().enumerate() {
            let rows: Vec<usize> = (0..n).filter(|&i| s.features()[i] == *atom).collect();
            let w = d.weights()[k];
            let freq = rows.len() as f64 / n as f64;
            assert!((freq - w).abs() <= 3.0 * (w * (1.0 - w) / n as f64).sqrt());
            let eta = d.etas()[k];
            let pos =
                rows.iter().filter(|&&i| s.labels()[i] == 1).count() as f64 / rows.len() as f64;
            assert!((pos - eta).abs() <= 3.0 * (eta * (1.0 - eta) / rows.len() as f64).sqrt());
        }
    }

    #[test]
    fn hdlss_shapes_and_determinism() {
        let s = make_hdlss_gaussians(500, 25, 2.0, 7).unwrap();
        assert_eq!(s.len(), 50);
        assert_eq!(s.dim(), 500);
        assert_eq!(s, make_hdlss_gaussians(500, 25, 2.0, 7).unwrap());
        assert!(make_hdlss_gaussians(10, 1, 2.0, 7).is_err());
    }

    #[test]
    fn hdlss_zero_separation_means_agree() {
        let s = make_hdlss_gaussians(3, 2000, 0.0, 5).unwrap();
        let mean = |label: i8| {
            let rows: Vec<&Vec<f64>> = s
                .features()
                .iter()
                .zip(s.labels())
                .filter(|(_, &y)| y == label)
                .map(|(r, _)| r)
                .collect();
            rows.iter().map(|r| r[0]).sum::<f64>() / rows.len() as f64
        };
        // difference of two means of 2000 unit normals has sd ~0.032
        assert!((mean(1) - mean(-1)).abs() < 0.15);
    }

    #[test]
    fn hdlss_wide_separation_is_nearly_separable() {
        let s = make_hdlss_gaussians(2, 10_000, 6.0, 1).unwrap();
        let errors = s
            .features()
            .iter()
            .zip(s.labels())
            .filter(|(row, &y)| (row[0] >= 0.0) != (y == 1))
            .count();
        assert!((errors as f64) / (s.len() as f64) < 0.01);
    }

    #[test]
    fn json_and_csv_round_trip() {
        let d = make_tsybakov_distribution(1.5, 0.7, 9).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<DiscreteJoint>(&json).unwrap(), d);
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(DiscreteJoint::read_csv(buf.as_slice()).unwrap(), d);

        let s = make_hdlss_gaussians(4, 3, 1.0, 2).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(SampleSet::read_csv(buf.as_slice()).unwrap(), s);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<SampleSet>(&json).unwrap(), s);
    }

    #[test]
    fn json_schema_is_validated() {
        let bad = r#"{"atoms": [[0.0]], "weights": [0.5], "etas": [0.5]}"#;
        assert!(serde_json::from_str::<DiscreteJoint>(bad).is_err());
        let extra = r#"{"atoms": [[0.0]], "weights": [1.0], "etas": [0.5], "x": 1}"#;
        assert!(serde_json::from_str::<DiscreteJoint>(extra).is_err());
        let bad_label = r#"{"features": [[0.0]], "labels": [0]}"#;
        assert!(serde_json::from_str::<SampleSet>(bad_label).is_err());
    }
}
