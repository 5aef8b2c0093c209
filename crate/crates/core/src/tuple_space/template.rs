use serde::{Deserialize, Serialize};

use super::value::{Value, ValueKind};

/// One positional slot of a template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Exact(Value),
    Typed(ValueKind),
    Any,
}

impl Slot {
    pub fn matches(&self, value: &Value) -> bool {
        match self {
            Slot::Exact(v) => v == value,
            Slot::Typed(kind) => value.kind() == *kind,
            Slot::Any => true,
        }
    }
}

/// Linda-style template. `tag == None` is the tag wildcard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub tag: Option<String>,
    pub slots: Vec<Slot>,
}

impl Template {
    pub fn new(tag: impl Into<String>) -> Self {
        Self {
            tag: Some(tag.into()),
            slots: Vec::new(),
        }
    }

    pub fn any_tag() -> Self {
        Self {
            tag: None,
            slots: Vec::new(),
        }
    }

    pub fn exact(mut self, v: impl Into<Value>) -> Self {
        self.slots.push(Slot::Exact(v.into()));
        self
    }

    pub fn typed(mut self, kind: ValueKind) -> Self {
        self.slots.push(Slot::Typed(kind));
        self
    }

    pub fn any(mut self) -> Self {
        self.slots.push(Slot::Any);
        self
    }

    /// Exact template for a concrete tuple.
    pub fn of(tag: &str, values: &[Value]) -> Self {
        Self {
            tag: Some(tag.to_string()),
            slots: values.iter().cloned().map(Slot::Exact).collect(),
        }
    }

    pub fn matches(&self, tag: &str, values: &[Value]) -> bool {
        if let Some(t) = &self.tag {
            if t != tag {
                return false;
            }
        }
        self.slots.len() == values.len() && self.slots.iter().zip(values).all(|(s, v)| s.matches(v))
    }
}
