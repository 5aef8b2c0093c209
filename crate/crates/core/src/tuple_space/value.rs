use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Class of a coarse-grained entity tracked by the tuple space manager.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Station,
    AccessPoint,
    Task,
    Group,
}

impl EntityKind {
    pub const ALL: [EntityKind; 4] = [
        EntityKind::Station,
        EntityKind::AccessPoint,
        EntityKind::Task,
        EntityKind::Group,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Station => "station",
            EntityKind::AccessPoint => "accesspoint",
            EntityKind::Task => "task",
            EntityKind::Group => "group",
        }
    }

    /// Numeric code used inside a-code arguments.
    pub fn code(self) -> i32 {
        match self {
            EntityKind::Station => 0,
            EntityKind::AccessPoint => 1,
            EntityKind::Task => 2,
            EntityKind::Group => 3,
        }
    }

    pub fn from_code(code: i32) -> Option<Self> {
        Self::ALL.get(usize::try_from(code).ok()?).copied()
    }
}

impl FromStr for EntityKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "station" => Ok(EntityKind::Station),
            "accesspoint" | "ap" => Ok(EntityKind::AccessPoint),
            "task" => Ok(EntityKind::Task),
            "group" => Ok(EntityKind::Group),
            other => Err(format!("unknown entity class `{other}`")),
        }
    }
}

/// Reference to an entity, written `station#3`, `task#7`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct EntityRef {
    pub kind: EntityKind,
    pub id: u32,
}

impl EntityRef {
    pub fn new(kind: EntityKind, id: u32) -> Self {
        Self { kind, id }
    }

    pub fn station(id: u32) -> Self {
        Self::new(EntityKind::Station, id)
    }

    pub fn access_point(id: u32) -> Self {
        Self::new(EntityKind::AccessPoint, id)
    }

    pub fn task(id: u32) -> Self {
        Self::new(EntityKind::Task, id)
    }

    pub fn group(id: u32) -> Self {
        Self::new(EntityKind::Group, id)
    }
}

impl fmt::Display for EntityRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.kind.as_str(), self.id)
    }
}

impl FromStr for EntityRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, id) = s
            .split_once('#')
            .ok_or_else(|| format!("malformed entity reference `{s}`"))?;
        let kind = kind.parse()?;
        let id = id.parse().map_err(|_| format!("malformed entity id in `{s}`"))?;
        Ok(EntityRef { kind, id })
    }
}

impl From<EntityRef> for String {
    fn from(e: EntityRef) -> String {
        e.to_string()
    }
}

impl TryFrom<String> for EntityRef {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Int,
    Real,
    Text,
    Bool,
    Entity,
}

/// A single tuple field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Int(i64),
    Real(f64),
    Text(String),
    Bool(bool),
    Entity(EntityRef),
}

impl Value {
    pub fn kind(&self) -> ValueKind {
        match self {
            Value::Int(_) => ValueKind::Int,
            Value::Real(_) => ValueKind::Real,
            Value::Text(_) => ValueKind::Text,
            Value::Bool(_) => ValueKind::Bool,
            Value::Entity(_) => ValueKind::Entity,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Int(i) => Some(i as f64),
            Value::Real(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_entity(&self) -> Option<EntityRef> {
        match *self {
            Value::Entity(e) => Some(e),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Fixed-point view (thousandths) used by guard comparisons.
    pub fn as_milli(&self) -> Option<i64> {
        self.as_f64().and_then(to_milli)
    }

    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r:?}"),
            Value::Text(s) => write!(f, "{s:?}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Entity(e) => write!(f, "{e}"),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Real(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<EntityRef> for Value {
    fn from(v: EntityRef) -> Self {
        Value::Entity(v)
    }
}

/// Scales a real to thousandths, rounding half away from zero. `None` for
/// non-finite input or values outside the `i64` range.
pub fn to_milli(v: f64) -> Option<i64> {
    if !v.is_finite() {
        return None;
    }
    let scaled = (v * 1000.0).round();
    if scaled.abs() >= 9.2e18 {
        return None;
    }
    Some(scaled as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entity_ref_round_trips_through_text() {
        let e: EntityRef = "station#12".parse().unwrap();
        assert_eq!(e, EntityRef::station(12));
        assert_eq!(e.to_string(), "station#12");
        assert_eq!("ap#3".parse::<EntityRef>().unwrap(), EntityRef::access_point(3));
        assert!("station".parse::<EntityRef>().is_err());
        assert!("planet#1".parse::<EntityRef>().is_err());
    }

    #[test]
    fn milli_scaling() {
        assert_eq!(to_milli(75.0), Some(75_000));
        assert_eq!(to_milli(0.0015), Some(2));
        assert_eq!(to_milli(-1.25), Some(-1250));
        assert_eq!(to_milli(f64::NAN), None);
        assert_eq!(Value::Int(3).as_milli(), Some(3000));
        assert_eq!(Value::text("x").as_milli(), None);
    }

    #[test]
    fn value_json_shape() {
        let v = vec![Value::Entity(EntityRef::station(1)), Value::Int(62)];
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"[{"entity":"station#1"},{"int":62}]"#);
        let back: Vec<Value> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}
