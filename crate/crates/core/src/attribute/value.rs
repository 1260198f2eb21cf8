use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// An actual attribute value (`w_av`) as delivered by the information point.
///
/// JSON and TOML map naturally: strings, integers, floats and arrays (tuples).
/// Text and tuples are shared, so cloning a value never copies its contents.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Integer(i64),
    Real(f64),
    Text(Arc<str>),
    Tuple(Arc<[Value]>),
}

// Hand-written so that decoding dispatches on the input token instead of
// buffering and retrying each variant, which is what `untagged` does.
impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ValueVisitor;

        impl<'de> Visitor<'de> for ValueVisitor {
            type Value = Value;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a string, number or array of values")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Value, E> {
                Ok(Value::Integer(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Value, E> {
                i64::try_from(v).map(Value::Integer).map_err(|_| E::custom(format!("integer {v} out of range")))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Value, E> {
                Ok(Value::Real(v))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Value, E> {
                Ok(Value::Text(v.into()))
            }

            fn visit_string<E: de::Error>(self, v: String) -> Result<Value, E> {
                Ok(Value::Text(v.into()))
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Value, A::Error> {
                let mut items = Vec::with_capacity(seq.size_hint().unwrap_or(0).min(16));
                while let Some(item) = seq.next_element()? {
                    items.push(item);
                }
                Ok(Value::Tuple(items.into()))
            }
        }

        deserializer.deserialize_any(ValueVisitor)
    }
}

impl Value {
    pub fn shape(&self) -> &'static str {
        match self {
            Value::Integer(_) => "integer",
            Value::Real(_) => "real",
            Value::Text(_) => "text",
            Value::Tuple(_) => "tuple",
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            Value::Integer(i) => Some(*i as f64),
            Value::Real(r) => Some(*r),
            _ => None,
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.into())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s.into())
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Integer(i)
    }
}

impl From<f64> for Value {
    fn from(r: f64) -> Self {
        Value::Real(r)
    }
}

impl<T: Into<Value>> From<Vec<T>> for Value {
    fn from(items: Vec<T>) -> Self {
        Value::Tuple(items.into_iter().map(Into::into).collect())
    }
}

/// Declared type of the actual values an attribute accepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ValueDomain {
    /// Any string.
    Text,
    /// One of a closed set of strings.
    Enumerated { values: Vec<String> },
    /// A closed real interval.
    Real { min: f64, max: f64 },
    /// A closed integer range.
    Integer { min: i64, max: i64 },
    /// An ordered product of scalar domains, e.g. `(entered_password, failed_attempts)`.
    Composite { components: Vec<ValueDomain> },
}

impl ValueDomain {
    pub fn conforms(&self, value: &Value) -> bool {
        match (self, value) {
            (ValueDomain::Text, Value::Text(_)) => true,
            (ValueDomain::Enumerated { values }, Value::Text(s)) => values.iter().any(|v| **v == **s),
            (ValueDomain::Real { min, max }, v) => v.as_real().is_some_and(|x| x.is_finite() && *min <= x && x <= *max),
            (ValueDomain::Integer { min, max }, Value::Integer(i)) => min <= i && i <= max,
            (ValueDomain::Composite { components }, Value::Tuple(items)) => {
                components.len() == items.len() && components.iter().zip(items.iter()).all(|(d, v)| d.conforms(v))
            }
            _ => false,
        }
    }

    /// Checks that a target pattern is expressible over this domain.
    pub(crate) fn admits(&self, target: &Target) -> bool {
        match (self, target) {
            (_, Target::Any) => true,
            (ValueDomain::Text, Target::Exact(_) | Target::OneOf(_)) => true,
            (ValueDomain::Enumerated { values }, Target::Exact(s)) => values.contains(s),
            (ValueDomain::Enumerated { values }, Target::OneOf(set)) => set.iter().all(|s| values.contains(s)),
            (ValueDomain::Real { .. } | ValueDomain::Integer { .. }, Target::Range { min, max }) => min <= max,
            (ValueDomain::Composite { components }, Target::Tuple(parts)) => {
                components.len() == parts.len() && components.iter().zip(parts).all(|(d, t)| d.admits(t))
            }
            _ => false,
        }
    }
}

impl fmt::Display for ValueDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueDomain::Text => write!(f, "text"),
            ValueDomain::Enumerated { values } => write!(f, "one of {values:?}"),
            ValueDomain::Real { min, max } => write!(f, "real in [{min}, {max}]"),
            ValueDomain::Integer { min, max } => write!(f, "integer in [{min}, {max}]"),
            ValueDomain::Composite { components } => {
                write!(f, "(")?;
                for (i, c) in components.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A pattern over the value domain; a set of target values is a list of these.
///
/// Written in catalog files as a string (exact match), an array of strings
/// (any of), `{ min, max }` (closed interval, both bounds match),
/// `{ tuple = [...] }` (per-component match) or `{ any = true }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TargetRepr", into = "TargetRepr")]
pub enum Target {
    Exact(String),
    OneOf(Vec<String>),
    Range { min: f64, max: f64 },
    Tuple(Vec<Target>),
    Any,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TargetRepr {
    Exact(String),
    OneOf(Vec<String>),
    Range { min: f64, max: f64 },
    Tuple { tuple: Vec<Target> },
    Any { any: bool },
}

impl TryFrom<TargetRepr> for Target {
    type Error = String;

    fn try_from(repr: TargetRepr) -> Result<Self, Self::Error> {
        Ok(match repr {
            TargetRepr::Exact(s) => Target::Exact(s),
            TargetRepr::OneOf(v) => Target::OneOf(v),
            TargetRepr::Range { min, max } if min.is_nan() || max.is_nan() || min > max => {
                return Err(format!("invalid interval [{min}, {max}]"));
            }
            TargetRepr::Range { min, max } => Target::Range { min, max },
            TargetRepr::Tuple { tuple } => Target::Tuple(tuple),
            TargetRepr::Any { any: true } => Target::Any,
            TargetRepr::Any { any: false } => return Err("`any = false` matches nothing; omit the target instead".into()),
        })
    }
}

impl From<Target> for TargetRepr {
    fn from(t: Target) -> Self {
        match t {
            Target::Exact(s) => TargetRepr::Exact(s),
            Target::OneOf(v) => TargetRepr::OneOf(v),
            Target::Range { min, max } => TargetRepr::Range { min, max },
            Target::Tuple(tuple) => TargetRepr::Tuple { tuple },
            Target::Any => TargetRepr::Any { any: true },
        }
    }
}

impl Target {
    pub fn matches(&self, value: &Value) -> bool {
        match (self, value) {
            (Target::Any, _) => true,
            (Target::Exact(t), Value::Text(s)) => **t == **s,
            (Target::OneOf(set), Value::Text(s)) => set.iter().any(|t| **t == **s),
            (Target::Range { min, max }, v) => v.as_real().is_some_and(|x| *min <= x && x <= *max),
            (Target::Tuple(parts), Value::Tuple(items)) => {
                parts.len() == items.len() && parts.iter().zip(items.iter()).all(|(t, v)| t.matches(v))
            }
            _ => false,
        }
    }
}
