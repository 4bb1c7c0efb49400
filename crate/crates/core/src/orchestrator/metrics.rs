//! Scalar records emitted by a run and the pass/fail rules evaluated on them.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::stats::Estimate;

/// One scalar output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub estimator: String,
    pub preset: String,
    #[serde(with = "nullable")]
    pub value: f64,
    #[serde(with = "nullable")]
    pub se: f64,
    pub budget: u64,
    pub seed: u64,
}

/// Non-finite values are stored as `null` and read back as NaN.
mod nullable {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Comparison applied to named records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum Rule {
    AtMost { record: String, bound: f64 },
    AtLeast { record: String, bound: f64 },
    /// Strictly positive.
    Positive { record: String },
    Between { record: String, lo: f64, hi: f64 },
    /// `|value − target| ≤ k·se`.
    WithinSe { record: String, target: f64, k: f64 },
    /// `|a − b| ≤ k·hypot(se_a, se_b)`.
    Agree { a: String, b: String, k: f64 },
    /// Value equal to 1.
    Flag { record: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub stage: String,
    pub rule: Rule,
    pub passed: bool,
}

pub fn find<'a>(records: &'a [Record], name: &str) -> Option<&'a Record> {
    records.iter().find(|r| r.estimator == name)
}

/// Missing records and NaN values fail every rule.
pub fn evaluate(rule: &Rule, records: &[Record]) -> bool {
    let get = |n: &str| find(records, n).filter(|r| !r.value.is_nan());
    match rule {
        Rule::AtMost { record, bound } => get(record).is_some_and(|r| r.value <= *bound),
        Rule::AtLeast { record, bound } => get(record).is_some_and(|r| r.value >= *bound),
        Rule::Positive { record } => get(record).is_some_and(|r| r.value > 0.0),
        Rule::Between { record, lo, hi } => get(record).is_some_and(|r| *lo <= r.value && r.value <= *hi),
        Rule::WithinSe { record, target, k } => get(record).is_some_and(|r| (r.value - target).abs() <= k * r.se),
        Rule::Agree { a, b, k } => match (get(a), get(b)) {
            (Some(x), Some(y)) => Estimate::new(x.value, x.se).agrees_with(&Estimate::new(y.value, y.se), *k),
            _ => false,
        },
        Rule::Flag { record } => get(record).is_some_and(|r| r.value == 1.0),
    }
}

pub fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(name: &str, value: f64, se: f64) -> Record {
        Record { estimator: name.into(), preset: "p".into(), value, se, budget: 1, seed: 0 }
    }

    #[test]
    fn rules() {
        let rs = vec![rec("a", 1.0, 0.1), rec("b", 1.2, 0.1), rec("nan", f64::NAN, 0.0), rec("f", 1.0, 0.0)];
        assert!(evaluate(&Rule::AtMost { record: "a".into(), bound: 1.0 }, &rs));
        assert!(!evaluate(&Rule::AtLeast { record: "a".into(), bound: 1.1 }, &rs));
        assert!(evaluate(&Rule::WithinSe { record: "b".into(), target: 1.0, k: 3.0 }, &rs));
        assert!(evaluate(&Rule::Agree { a: "a".into(), b: "b".into(), k: 3.0 }, &rs));
        assert!(!evaluate(&Rule::Agree { a: "a".into(), b: "b".into(), k: 1.0 }, &rs));
        assert!(!evaluate(&Rule::Positive { record: "nan".into() }, &rs));
        assert!(!evaluate(&Rule::Positive { record: "missing".into() }, &rs));
        assert!(evaluate(&Rule::Flag { record: "f".into() }, &rs));
    }

    #[test]
    fn nan_round_trips_as_null() {
        let r = rec("x", f64::NAN, f64::INFINITY);
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"value\":null"));
        let back: Record = serde_json::from_str(&s).unwrap();
        assert!(back.value.is_nan() && back.se.is_nan());
    }
}
