use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ClassifierError, Family};

/// One hyperparameter value. `"None"` strings stand for an absent option
/// (unlimited depth, unweighted classes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Layers(Vec<usize>),
    Str(String),
}

impl ParamValue {
    pub fn none() -> Self {
        ParamValue::Str("None".into())
    }

    pub fn str(s: &str) -> Self {
        ParamValue::Str(s.into())
    }

    pub fn is_none(&self) -> bool {
        matches!(self, ParamValue::Str(s) if s == "None")
    }

    /// Numeric value, if any.
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(i) => Some(i as f64),
            ParamValue::Float(f) => Some(f),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Str(s) => f.write_str(s),
            ParamValue::Layers(l) if l.len() == 1 => write!(f, "({},)", l[0]),
            ParamValue::Layers(l) => {
                let parts: Vec<String> = l.iter().map(|v| v.to_string()).collect();
                write!(f, "({})", parts.join(", "))
            }
        }
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Str(v.into())
    }
}

impl From<Vec<usize>> for ParamValue {
    fn from(v: Vec<usize>) -> Self {
        ParamValue::Layers(v)
    }
}

/// Named hyperparameters, kept sorted by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Hyperparameters(BTreeMap<String, ParamValue>);

impl Hyperparameters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: impl Into<ParamValue>) -> Self {
        self.0.insert(name.to_owned(), value.into());
        self
    }

    pub fn insert(&mut self, name: &str, value: ParamValue) {
        self.0.insert(name.to_owned(), value);
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.0.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &ParamValue)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn check_known(
        &self,
        family: Family,
        known: &[&str],
    ) -> Result<(), ClassifierError> {
        match self.0.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(ClassifierError::Hyperparameter {
                family,
                name: k.clone(),
                reason: format!("unknown parameter (accepted: {})", known.join(", ")),
            }),
            None => Ok(()),
        }
    }

    fn bad(family: Family, name: &str, reason: String) -> ClassifierError {
        ClassifierError::Hyperparameter {
            family,
            name: name.to_owned(),
            reason,
        }
    }

    pub(crate) fn f64(
        &self,
        family: Family,
        name: &str,
        default: f64,
    ) -> Result<f64, ClassifierError> {
        match self.get(name) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Self::bad(family, name, format!("expected a number, got `{v}`"))),
        }
    }

    pub(crate) fn positive_f64(
        &self,
        family: Family,
        name: &str,
        default: f64,
    ) -> Result<f64, ClassifierError> {
        let v = self.f64(family, name, default)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Self::bad(
                family,
                name,
                format!("must be positive, got {v}"),
            ))
        }
    }

    pub(crate) fn fraction(
        &self,
        family: Family,
        name: &str,
        default: f64,
    ) -> Result<f64, ClassifierError> {
        let v = self.f64(family, name, default)?;
        if v > 0.0 && v <= 1.0 {
            Ok(v)
        } else {
            Err(Self::bad(
                family,
                name,
                format!("must be in (0, 1], got {v}"),
            ))
        }
    }

    pub(crate) fn usize(
        &self,
        family: Family,
        name: &str,
        default: usize,
    ) -> Result<usize, ClassifierError> {
        match self.opt_usize(family, name, Some(default))? {
            Some(v) => Ok(v),
            None => Err(Self::bad(family, name, "`None` is not allowed here".into())),
        }
    }

    /// Non-negative integer where `"None"` means unlimited.
    pub(crate) fn opt_usize(
        &self,
        family: Family,
        name: &str,
        default: Option<usize>,
    ) -> Result<Option<usize>, ClassifierError> {
        match self.get(name) {
            None => Ok(default),
            Some(v) if v.is_none() => Ok(None),
            Some(ParamValue::Int(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(ParamValue::Float(f)) if *f >= 0.0 && f.fract() == 0.0 => Ok(Some(*f as usize)),
            Some(v) => Err(Self::bad(
                family,
                name,
                format!("expected a non-negative integer, got `{v}`"),
            )),
        }
    }

    pub(crate) fn choice<'a>(
        &self,
        family: Family,
        name: &str,
        default: &'a str,
        allowed: &[&'a str],
    ) -> Result<&'a str, ClassifierError> {
        let got = match self.get(name) {
            None => return Ok(default),
            Some(ParamValue::Str(s)) => s.as_str(),
            Some(v) => {
                return Err(Self::bad(
                    family,
                    name,
                    format!("expected one of {allowed:?}, got `{v}`"),
                ))
            }
        };
        allowed.iter().find(|a| **a == got).copied().ok_or_else(|| {
            Self::bad(
                family,
                name,
                format!("expected one of {allowed:?}, got `{got}`"),
            )
        })
    }

    pub(crate) fn layers(
        &self,
        family: Family,
        name: &str,
        default: &[usize],
    ) -> Result<Vec<usize>, ClassifierError> {
        match self.get(name) {
            None => Ok(default.to_vec()),
            Some(ParamValue::Layers(l)) if !l.is_empty() && l.iter().all(|&u| u > 0) => {
                Ok(l.clone())
            }
            Some(ParamValue::Int(i)) if *i > 0 => Ok(vec![*i as usize]),
            Some(v) => Err(Self::bad(
                family,
                name,
                format!("expected a list of positive layer sizes, got `{v}`"),
            )),
        }
    }
}

impl fmt::Display for Hyperparameters {
    /// `name=value` pairs in name order, comma separated.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

impl FromIterator<(String, ParamValue)> for Hyperparameters {
    fn from_iter<T: IntoIterator<Item = (String, ParamValue)>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Per-class sample weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassWeight {
    Uniform,
    /// `n / (2 n_c)` for a row of class `c`.
    Balanced,
}

impl ClassWeight {
    pub(crate) fn parse(p: &Hyperparameters, family: Family) -> Result<Self, ClassifierError> {
        Ok(
            match p.choice(family, "class_weight", "None", &["None", "balanced"])? {
                "balanced" => ClassWeight::Balanced,
                _ => ClassWeight::Uniform,
            },
        )
    }

    /// Weight of each row.
    pub fn sample_weights(self, y: &[usize]) -> Vec<f64> {
        match self {
            ClassWeight::Uniform => vec![1.0; y.len()],
            ClassWeight::Balanced => {
                let per = self.class_factors(y);
                y.iter().map(|&c| per[c]).collect()
            }
        }
    }

    /// Multiplier for class 0 and class 1.
    pub fn class_factors(self, y: &[usize]) -> [f64; 2] {
        match self {
            ClassWeight::Uniform => [1.0, 1.0],
            ClassWeight::Balanced => {
                let n = y.len() as f64;
                let n1 = y.iter().filter(|&&c| c == 1).count() as f64;
                let n0 = n - n1;
                [n / (2.0 * n0), n / (2.0 * n1)]
            }
        }
    }
}
