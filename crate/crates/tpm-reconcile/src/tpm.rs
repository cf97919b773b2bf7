//! The tree parity machine: bounded integer weights, the forward pass,
//! and the three mutual-learning training rules.
//!
//! A TPM has `K` hidden perceptrons with `N` inputs each. Every weight
//! is an integer in the asymmetric range `[-L, L-1]`, which is exactly
//! the range produced by the bit-block codec in [`crate::codec`]. The
//! network output is the product of the hidden-unit signs, with the
//! fixed convention `sign(0) = -1` so that both parties (and any
//! re-implementation) evaluate identically.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest accepted half-width `L`.
///
/// With `L <= 2^20` a hidden unit's local field is bounded by
/// `N * 2^20`, so a 64-bit accumulator cannot overflow for any
/// practical `N`.
pub const MAX_HALF_WIDTH: i32 = 1 << 20;

/// Weight-update rule applied when the two parties' outputs match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearningRule {
    /// `w' = clip(w + x * sigma_k)`
    Hebbian,
    /// `w' = clip(w - x * sigma_k)`
    AntiHebbian,
    /// `w' = clip(w + x)`
    RandomWalk,
}

impl LearningRule {
    /// All rules, in wire-code order.
    pub const ALL: [LearningRule; 3] = [
        LearningRule::Hebbian,
        LearningRule::AntiHebbian,
        LearningRule::RandomWalk,
    ];

    /// Single-byte code used by the wire handshake.
    pub fn code(self) -> u8 {
        match self {
            LearningRule::Hebbian => 0,
            LearningRule::AntiHebbian => 1,
            LearningRule::RandomWalk => 2,
        }
    }

    /// Inverse of [`LearningRule::code`].
    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(LearningRule::Hebbian),
            1 => Ok(LearningRule::AntiHebbian),
            2 => Ok(LearningRule::RandomWalk),
            other => Err(Error::Frame(format!("unknown learning-rule code {other}"))),
        }
    }
}

impl fmt::Display for LearningRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            LearningRule::Hebbian => "hebbian",
            LearningRule::AntiHebbian => "anti-hebbian",
            LearningRule::RandomWalk => "random-walk",
        };
        f.write_str(name)
    }
}

impl FromStr for LearningRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hebbian" => Ok(LearningRule::Hebbian),
            "anti-hebbian" => Ok(LearningRule::AntiHebbian),
            "random-walk" => Ok(LearningRule::RandomWalk),
            other => Err(Error::InvalidParameter(format!(
                "unknown learning rule {other:?}; expected hebbian, anti-hebbian, or random-walk"
            ))),
        }
    }
}

/// The network and protocol parameters both parties agree on up front.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TpmParams {
    /// `K`: number of hidden units.
    pub hidden_units: usize,
    /// `N`: inputs per hidden unit.
    pub inputs_per_unit: usize,
    /// `L`: half-width of the weight range `[-L, L-1]`.
    pub half_width: i32,
    /// Training rule used on matched iterations.
    pub rule: LearningRule,
}

impl TpmParams {
    /// Validates `K >= 1`, `N >= 1`, and `1 <= L <=` [`MAX_HALF_WIDTH`].
    pub fn new(
        hidden_units: usize,
        inputs_per_unit: usize,
        half_width: i32,
        rule: LearningRule,
    ) -> Result<Self> {
        if hidden_units < 1 {
            return Err(Error::InvalidParameter("hidden_units must be >= 1".into()));
        }
        if inputs_per_unit < 1 {
            return Err(Error::InvalidParameter(
                "inputs_per_unit must be >= 1".into(),
            ));
        }
        if !(1..=MAX_HALF_WIDTH).contains(&half_width) {
            return Err(Error::InvalidParameter(format!(
                "half_width must be in [1, {MAX_HALF_WIDTH}], got {half_width}"
            )));
        }
        if hidden_units.checked_mul(inputs_per_unit).is_none() {
            return Err(Error::InvalidParameter(
                "hidden_units * inputs_per_unit overflows".into(),
            ));
        }
        Ok(TpmParams {
            hidden_units,
            inputs_per_unit,
            half_width,
            rule,
        })
    }

    /// Total number of weights, `K * N`.
    pub fn weight_count(&self) -> usize {
        self.hidden_units * self.inputs_per_unit
    }

    /// Smallest representable weight, `-L`.
    pub fn min_weight(&self) -> i32 {
        -self.half_width
    }

    /// Largest representable weight, `L - 1`.
    pub fn max_weight(&self) -> i32 {
        self.half_width - 1
    }
}

/// `K x N` integer weights, each in `[-L, L-1]`, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightMatrix {
    hidden_units: usize,
    inputs_per_unit: usize,
    half_width: i32,
    values: Vec<i32>,
}

impl WeightMatrix {
    /// Builds a matrix from row-major values, validating dimensions and
    /// the weight range.
    pub fn from_values(
        hidden_units: usize,
        inputs_per_unit: usize,
        half_width: i32,
        values: Vec<i32>,
    ) -> Result<Self> {
        if hidden_units < 1 || inputs_per_unit < 1 {
            return Err(Error::InvalidParameter(
                "weight matrix dimensions must be >= 1".into(),
            ));
        }
        if !(1..=MAX_HALF_WIDTH).contains(&half_width) {
            return Err(Error::InvalidParameter(format!(
                "half_width must be in [1, {MAX_HALF_WIDTH}], got {half_width}"
            )));
        }
        let expected = hidden_units
            .checked_mul(inputs_per_unit)
            .ok_or_else(|| Error::InvalidParameter("dimension product overflows".into()))?;
        if values.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "expected {expected} weights for a {hidden_units}x{inputs_per_unit} matrix, got {}",
                values.len()
            )));
        }
        for (index, &w) in values.iter().enumerate() {
            if w < -half_width || w > half_width - 1 {
                return Err(Error::InvalidParameter(format!(
                    "weight {w} at index {index} outside [-{half_width}, {}]",
                    half_width - 1
                )));
            }
        }
        Ok(WeightMatrix {
            hidden_units,
            inputs_per_unit,
            half_width,
            values,
        })
    }

    /// Builds a matrix from explicit rows.
    pub fn from_rows(rows: &[Vec<i32>], half_width: i32) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidParameter(
                "weight matrix needs >= 1 row".into(),
            ));
        }
        let inputs_per_unit = rows[0].len();
        for (k, row) in rows.iter().enumerate() {
            if row.len() != inputs_per_unit {
                return Err(Error::InvalidParameter(format!(
                    "row {k} has {} entries, expected {inputs_per_unit}",
                    row.len()
                )));
            }
        }
        let values = rows.iter().flatten().copied().collect();
        WeightMatrix::from_values(rows.len(), inputs_per_unit, half_width, values)
    }

    /// `K`: number of hidden units (rows).
    pub fn hidden_units(&self) -> usize {
        self.hidden_units
    }

    /// `N`: inputs per hidden unit (columns).
    pub fn inputs_per_unit(&self) -> usize {
        self.inputs_per_unit
    }

    /// `L`: half-width bound the entries satisfy.
    pub fn half_width(&self) -> i32 {
        self.half_width
    }

    /// Row-major view of all `K * N` weights.
    pub fn values(&self) -> &[i32] {
        &self.values
    }

    /// One hidden unit's weight row.
    pub fn row(&self, k: usize) -> &[i32] {
        let n = self.inputs_per_unit;
        &self.values[k * n..(k + 1) * n]
    }

    /// Copies the matrix out as rows, for serialization.
    pub fn to_rows(&self) -> Vec<Vec<i32>> {
        (0..self.hidden_units)
            .map(|k| self.row(k).to_vec())
            .collect()
    }

    /// True when the matrix dimensions and range match `params`.
    pub fn matches(&self, params: &TpmParams) -> bool {
        self.hidden_units == params.hidden_units
            && self.inputs_per_unit == params.inputs_per_unit
            && self.half_width == params.half_width
    }
}

/// `K x N` public challenge entries, each exactly -1 or +1, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct InputVector {
    entries: Vec<i8>,
}

impl InputVector {
    /// Validates every entry is -1 or +1 and the vector is nonempty.
    pub fn from_entries(entries: Vec<i8>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParameter("input vector is empty".into()));
        }
        for (index, &x) in entries.iter().enumerate() {
            if x != -1 && x != 1 {
                return Err(Error::InvalidParameter(format!(
                    "input entry {x} at index {index} is not -1 or +1"
                )));
            }
        }
        Ok(InputVector { entries })
    }

    /// Row-major view of the `K * N` entries.
    pub fn entries(&self) -> &[i8] {
        &self.entries
    }

    /// Number of entries.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Always false: construction rejects empty vectors.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl TryFrom<Vec<i8>> for InputVector {
    type Error = Error;

    fn try_from(entries: Vec<i8>) -> Result<Self> {
        InputVector::from_entries(entries)
    }
}

impl From<InputVector> for Vec<i8> {
    fn from(input: InputVector) -> Vec<i8> {
        input.entries
    }
}

/// Result of one forward pass: the hidden signs and their product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    /// `sigma_k` for each hidden unit, in `{-1, +1}`.
    pub hidden: Vec<i8>,
    /// `tau`: the product of all hidden signs.
    pub output: i8,
}

/// Forward pass: `sigma_k = sign(sum_j w[k][j] * x[k][j])` with
/// `sign(0) = -1`, and `tau = prod_k sigma_k`.
///
/// Errors when the input length does not match the weight dimensions.
pub fn evaluate(weights: &WeightMatrix, input: &InputVector) -> Result<Evaluation> {
    let k_units = weights.hidden_units();
    let n = weights.inputs_per_unit();
    if input.len() != k_units * n {
        return Err(Error::InvalidParameter(format!(
            "input has {} entries, weights are {k_units}x{n}",
            input.len()
        )));
    }
    let xs = input.entries();
    let mut hidden = Vec::with_capacity(k_units);
    let mut output: i8 = 1;
    for k in 0..k_units {
        let mut field: i64 = 0;
        for j in 0..n {
            field += i64::from(weights.values[k * n + j]) * i64::from(xs[k * n + j]);
        }
        let sigma: i8 = if field > 0 { 1 } else { -1 };
        hidden.push(sigma);
        output *= sigma;
    }
    Ok(Evaluation { hidden, output })
}

/// Saturating clamp to the weight range: `max(-L, min(L-1, value))`.
///
/// Requires `half_width >= 1`.
pub fn clip(value: i32, half_width: i32) -> i32 {
    debug_assert!(half_width >= 1);
    value.clamp(-half_width, half_width - 1)
}

/// One training step. Only hidden units whose sign agrees with the
/// output are updated; every new weight is clipped into `[-L, L-1]`.
///
/// The caller is responsible for invoking this only on matched
/// iterations — the rule itself never looks at the other party.
/// Returns a new matrix; the argument is unchanged.
pub fn train(
    weights: &WeightMatrix,
    input: &InputVector,
    eval: &Evaluation,
    rule: LearningRule,
) -> Result<WeightMatrix> {
    let k_units = weights.hidden_units();
    let n = weights.inputs_per_unit();
    if input.len() != k_units * n {
        return Err(Error::InvalidParameter(format!(
            "input has {} entries, weights are {k_units}x{n}",
            input.len()
        )));
    }
    if eval.hidden.len() != k_units {
        return Err(Error::InvalidParameter(format!(
            "evaluation has {} hidden signs, weights have {k_units} rows",
            eval.hidden.len()
        )));
    }
    let xs = input.entries();
    let half_width = weights.half_width();
    let mut out = weights.clone();
    for k in 0..k_units {
        let sigma = eval.hidden[k];
        if sigma != eval.output {
            continue;
        }
        for j in 0..n {
            let x = i32::from(xs[k * n + j]);
            let delta = match rule {
                LearningRule::Hebbian => x * i32::from(sigma),
                LearningRule::AntiHebbian => -x * i32::from(sigma),
                LearningRule::RandomWalk => x,
            };
            let index = k * n + j;
            out.values[index] = clip(out.values[index] + delta, half_width);
        }
    }
    Ok(out)
}

/// Entry-wise equality of two matrices of identical dimensions.
///
/// Errors on a dimension mismatch instead of answering false, since
/// comparing differently-shaped networks is always a caller bug.
pub fn weights_equal(a: &WeightMatrix, b: &WeightMatrix) -> Result<bool> {
    if a.hidden_units != b.hidden_units || a.inputs_per_unit != b.inputs_per_unit {
        return Err(Error::InvalidParameter(format!(
            "cannot compare {}x{} weights with {}x{}",
            a.hidden_units, a.inputs_per_unit, b.hidden_units, b.inputs_per_unit
        )));
    }
    Ok(a.values == b.values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k: usize, n: usize, l: i32) -> TpmParams {
        TpmParams::new(k, n, l, LearningRule::Hebbian).unwrap()
    }

    fn input(entries: &[i8]) -> InputVector {
        InputVector::from_entries(entries.to_vec()).unwrap()
    }

    #[test]
    fn evaluate_single_positive_product() {
        let w = WeightMatrix::from_rows(&[vec![3]], 8).unwrap();
        let e = evaluate(&w, &input(&[1])).unwrap();
        assert_eq!(e.hidden, vec![1]);
        assert_eq!(e.output, 1);
    }

    #[test]
    fn evaluate_zero_field_is_negative() {
        // Local fields (0, -2): the zero field must land on -1.
        let w = WeightMatrix::from_rows(&[vec![1, -1], vec![-2, 0]], 2).unwrap();
        let e = evaluate(&w, &input(&[1, 1, 1, 1])).unwrap();
        assert_eq!(e.hidden, vec![-1, -1]);
        assert_eq!(e.output, 1);
    }

    #[test]
    fn evaluate_negated_input_flips_nonzero_fields() {
        let w = WeightMatrix::from_rows(&[vec![2, 1]], 8).unwrap();
        assert_eq!(evaluate(&w, &input(&[1, 1])).unwrap().output, 1);
        assert_eq!(evaluate(&w, &input(&[-1, -1])).unwrap().output, -1);
    }

    #[test]
    fn evaluate_brute_force_k1_n2() {
        // All four inputs for w = [[2, 1]]: field = 2*x0 + x1, never zero.
        let w = WeightMatrix::from_rows(&[vec![2, 1]], 8).unwrap();
        let cases = [
            ([1i8, 1i8], 1i8),
            ([1, -1], 1),
            ([-1, 1], -1),
            ([-1, -1], -1),
        ];
        for (xs, expect) in cases {
            assert_eq!(evaluate(&w, &input(&xs)).unwrap().output, expect);
        }
    }

    #[test]
    fn evaluate_output_is_product_of_hidden() {
        let w = WeightMatrix::from_rows(&[vec![1, 2], vec![-3, 1], vec![0, -1]], 4).unwrap();
        let e = evaluate(&w, &input(&[1, -1, 1, 1, -1, -1])).unwrap();
        assert_eq!(e.output, e.hidden.iter().product::<i8>());
    }

    #[test]
    fn evaluate_rejects_dimension_mismatch() {
        let w = WeightMatrix::from_rows(&[vec![1, 2]], 4).unwrap();
        assert!(evaluate(&w, &input(&[1])).is_err());
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clip(9, 8), 7);
        assert_eq!(clip(-9, 8), -8);
        assert_eq!(clip(0, 8), 0);
    }

    #[test]
    fn train_hebbian_moves_toward_input() {
        let w = WeightMatrix::from_rows(&[vec![0]], 2).unwrap();
        let x = input(&[1]);
        let e = evaluate(&w, &x).unwrap();
        assert_eq!(e.hidden, vec![-1]); // zero weight -> zero field -> -1
        let e = Evaluation {
            hidden: vec![1],
            output: 1,
        };
        let w2 = train(&w, &x, &e, LearningRule::Hebbian).unwrap();
        assert_eq!(w2.values(), &[1]);
    }

    #[test]
    fn train_clips_at_upper_bound() {
        let w = WeightMatrix::from_rows(&[vec![1]], 2).unwrap();
        let e = Evaluation {
            hidden: vec![1],
            output: 1,
        };
        let w2 = train(&w, &input(&[1]), &e, LearningRule::Hebbian).unwrap();
        assert_eq!(w2.values(), &[1]); // already at L-1 = 1
    }

    #[test]
    fn train_skips_disagreeing_units() {
        // hidden = [1, -1], output = -1: only unit 1 agrees.
        let w = WeightMatrix::from_rows(&[vec![2, 2], vec![-2, -2]], 4).unwrap();
        let x = input(&[1, 1, 1, 1]);
        let e = evaluate(&w, &x).unwrap();
        assert_eq!(e.hidden, vec![1, -1]);
        assert_eq!(e.output, -1);
        let w2 = train(&w, &x, &e, LearningRule::Hebbian).unwrap();
        assert_eq!(w2.row(0), &[2, 2]); // untouched
        assert_eq!(w2.row(1), &[-3, -3]); // moved by x * sigma = -1
    }

    #[test]
    fn train_no_update_when_no_unit_agrees_anti_hebbian_mirror() {
        // With K=2 and output = -1 while both hidden = +1 is impossible
        // from evaluate, but a caller-constructed evaluation exercises
        // the no-update path for every rule.
        let w = WeightMatrix::from_rows(&[vec![1, 0], vec![0, 1]], 4).unwrap();
        let x = input(&[1, -1, -1, 1]);
        let e = Evaluation {
            hidden: vec![1, 1],
            output: -1,
        };
        for rule in LearningRule::ALL {
            let w2 = train(&w, &x, &e, rule).unwrap();
            assert_eq!(w2, w, "rule {rule} must not touch disagreeing units");
        }
    }

    #[test]
    fn train_rules_differ_as_documented() {
        let w = WeightMatrix::from_rows(&[vec![0, 0]], 4).unwrap();
        let x = input(&[1, -1]);
        let e = Evaluation {
            hidden: vec![-1],
            output: -1,
        };
        let hebb = train(&w, &x, &e, LearningRule::Hebbian).unwrap();
        assert_eq!(hebb.values(), &[-1, 1]); // +x*sigma, sigma = -1
        let anti = train(&w, &x, &e, LearningRule::AntiHebbian).unwrap();
        assert_eq!(anti.values(), &[1, -1]); // -x*sigma
        let walk = train(&w, &x, &e, LearningRule::RandomWalk).unwrap();
        assert_eq!(walk.values(), &[1, -1]); // +x regardless of sigma
    }

    #[test]
    fn train_is_pure() {
        let w = WeightMatrix::from_rows(&[vec![0, 0]], 4).unwrap();
        let x = input(&[1, 1]);
        let e = evaluate(&w, &x).unwrap();
        let _ = train(&w, &x, &e, LearningRule::Hebbian).unwrap();
        assert_eq!(w.values(), &[0, 0]);
    }

    #[test]
    fn range_preserved_over_random_training() {
        // Hand-rolled xorshift so the sequence is reproducible without
        // pulling the channel module into these unit tests.
        let mut state = 0x1234_5678_9abc_def0u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let p = params(3, 4, 2);
        let mut w = WeightMatrix::from_values(3, 4, 2, vec![0; 12]).unwrap();
        for step in 0..2000 {
            let entries: Vec<i8> = (0..p.weight_count())
                .map(|_| if next() & 1 == 0 { -1 } else { 1 })
                .collect();
            let x = InputVector::from_entries(entries).unwrap();
            let e = evaluate(&w, &x).unwrap();
            let rule = LearningRule::ALL[(step % 3) as usize];
            w = train(&w, &x, &e, rule).unwrap();
            for &v in w.values() {
                assert!(v >= p.min_weight() && v <= p.max_weight());
            }
        }
    }

    #[test]
    fn weights_equal_examples() {
        let a = WeightMatrix::from_rows(&[vec![1, 2], vec![3, -4]], 8).unwrap();
        let b = WeightMatrix::from_rows(&[vec![1, 2], vec![3, -4]], 8).unwrap();
        let c = WeightMatrix::from_rows(&[vec![1, 2], vec![3, 4]], 8).unwrap();
        assert!(weights_equal(&a, &a).unwrap());
        assert!(weights_equal(&a, &b).unwrap());
        assert!(!weights_equal(&a, &c).unwrap());
        let d = WeightMatrix::from_rows(&[vec![1, 2, 3]], 8).unwrap();
        assert!(weights_equal(&a, &d).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(TpmParams::new(0, 1, 1, LearningRule::Hebbian).is_err());
        assert!(TpmParams::new(1, 0, 1, LearningRule::Hebbian).is_err());
        assert!(TpmParams::new(1, 1, 0, LearningRule::Hebbian).is_err());
        assert!(TpmParams::new(1, 1, MAX_HALF_WIDTH + 1, LearningRule::Hebbian).is_err());
        let p = params(10, 15, 8);
        assert_eq!(p.weight_count(), 150);
        assert_eq!(p.min_weight(), -8);
        assert_eq!(p.max_weight(), 7);
    }

    #[test]
    fn weight_matrix_validation() {
        assert!(WeightMatrix::from_values(1, 2, 8, vec![8, 0]).is_err()); // 8 > L-1
        assert!(WeightMatrix::from_values(1, 2, 8, vec![-9, 0]).is_err());
        assert!(WeightMatrix::from_values(1, 2, 8, vec![0]).is_err()); // wrong len
        assert!(WeightMatrix::from_rows(&[vec![1, 2], vec![3]], 8).is_err());
    }

    #[test]
    fn input_vector_validation() {
        assert!(InputVector::from_entries(vec![]).is_err());
        assert!(InputVector::from_entries(vec![1, 0]).is_err());
        assert!(InputVector::from_entries(vec![1, -1, 1]).is_ok());
    }

    #[test]
    fn learning_rule_round_trips() {
        for rule in LearningRule::ALL {
            assert_eq!(LearningRule::from_code(rule.code()).unwrap(), rule);
            assert_eq!(rule.to_string().parse::<LearningRule>().unwrap(), rule);
        }
        assert!(LearningRule::from_code(3).is_err());
        assert!("hermitian".parse::<LearningRule>().is_err());
    }
}
