use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::acode::{read_acode_lines, valid_name, write_acode, ACodeProgram, FormatError};

pub const OTHERWISE: &str = "Otherwise";

#[derive(Debug, Clone, PartialEq)]
pub struct BundleEntry {
    pub program: ACodeProgram,
    /// Scenario predicate in guard syntax, when known.
    pub predicate: Option<String>,
}

/// Per-scenario a-code sets in priority order. `Otherwise` is always last.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    entries: BTreeMap<String, BundleEntry>,
    order: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BundleError {
    #[error("duplicate scenario `{0}`")]
    Duplicate(String),
    #[error("bundle has no `{OTHERWISE}` scenario")]
    MissingOtherwise,
    #[error("invalid scenario name `{0}`")]
    BadName(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl Bundle {
    /// Builds a bundle from `(scenario, program, predicate)` triples given in
    /// priority order.
    pub fn new(items: impl IntoIterator<Item = (String, ACodeProgram, Option<String>)>) -> Result<Self, BundleError> {
        let mut entries = BTreeMap::new();
        let mut order = Vec::new();
        for (name, program, predicate) in items {
            if !valid_name(&name) {
                return Err(BundleError::BadName(name));
            }
            if entries.contains_key(&name) {
                return Err(BundleError::Duplicate(name));
            }
            order.push(name.clone());
            entries.insert(name, BundleEntry { program, predicate });
        }
        if !entries.contains_key(OTHERWISE) {
            return Err(BundleError::MissingOtherwise);
        }
        order.retain(|n| n != OTHERWISE);
        order.push(OTHERWISE.to_string());
        Ok(Self { entries, order })
    }

    /// Pairs programs with scenario names positionally.
    pub fn from_programs(programs: Vec<ACodeProgram>, order: &[&str]) -> Result<Self, BundleError> {
        Self::new(order.iter().zip(programs).map(|(n, p)| (n.to_string(), p, None)))
    }

    pub fn order(&self) -> &[String] {
        &self.order
    }

    pub fn get(&self, scenario: &str) -> Option<&BundleEntry> {
        self.entries.get(scenario)
    }

    pub fn program(&self, scenario: &str) -> Option<&ACodeProgram> {
        self.entries.get(scenario).map(|e| &e.program)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BundleEntry)> {
        self.order.iter().map(move |n| (n.as_str(), &self.entries[n]))
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn to_text(&self) -> Result<String, BundleError> {
        let mut s = String::from("BUNDLE v1\n");
        for (name, e) in self.iter() {
            match &e.predicate {
                Some(p) => {
                    let _ = writeln!(s, "SCENARIO {name} {}", p.replace('\n', " "));
                }
                None => {
                    let _ = writeln!(s, "SCENARIO {name}");
                }
            }
            s.push_str(&write_acode(&e.program)?);
        }
        Ok(s)
    }

    pub fn from_text(text: &str) -> Result<Self, BundleError> {
        let bad = |line: usize, msg: String| BundleError::Format(FormatError::Malformed { line, msg });
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.find(|(_, l)| !l.trim().is_empty()) {
            Some((_, l)) if l.trim() == "BUNDLE v1" => {}
            Some((n, l)) => return Err(bad(n, format!("expected `BUNDLE v1`, got `{l}`"))),
            None => return Err(bad(0, "empty bundle".into())),
        }
        let mut items = Vec::new();
        while let Some((n, l)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            let rest = l
                .strip_prefix("SCENARIO ")
                .ok_or_else(|| bad(n, format!("expected `SCENARIO <name> <predicate>`, got `{l}`")))?;
            let (name, predicate) = match rest.trim().split_once(char::is_whitespace) {
                Some((name, pred)) => (name.to_string(), Some(pred.trim().to_string())),
                None => (rest.trim().to_string(), None),
            };
            let (program, _) = read_acode_lines(&mut lines)?;
            items.push((name, program, predicate.filter(|p| !p.is_empty())));
        }
        Self::new(items)
    }

    /// C header with every a-code set as a static triplet array.
    pub fn to_c_header(&self) -> String {
        let mut s = String::new();
        s.push_str("/* a-code bundle generated by rcodenv; do not edit */\n");
        s.push_str("#ifndef ACODE_BUNDLE_H\n#define ACODE_BUNDLE_H\n\n");
        let ident = |n: &str| -> String {
            n.chars()
                .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
                .collect()
        };
        for (name, e) in self.iter() {
            let id = ident(name);
            let _ = writeln!(s, "static const int acode_{id}[{}][3] = {{", e.program.triplets.len());
            for t in &e.program.triplets {
                let _ = writeln!(s, "    {{{}, {}, {}}},", t.op, t.a1, t.a2);
            }
            s.push_str("};\n");
            let _ = writeln!(s, "static const char *acode_{id}_pool[] = {{");
            for v in &e.program.pool {
                let json = serde_json::to_string(v).expect("values serialize");
                let _ = writeln!(s, "    {},", c_string(&json));
            }
            s.push_str("    0\n};\n\n");
        }
        s.push_str("struct acode_scenario {\n    const char *name;\n    const char *predicate;\n");
        s.push_str("    const int (*code)[3];\n    int count;\n    const char **pool;\n};\n\n");
        let _ = writeln!(
            s,
            "static const struct acode_scenario acode_bundle[{}] = {{",
            self.len()
        );
        for (name, e) in self.iter() {
            let id = ident(name);
            let pred = e.predicate.as_deref().map(c_string).unwrap_or_else(|| "0".into());
            let _ = writeln!(
                s,
                "    {{{}, {pred}, acode_{id}, {}, acode_{id}_pool}},",
                c_string(name),
                e.program.triplets.len()
            );
        }
        s.push_str("};\n\n#endif /* ACODE_BUNDLE_H */\n");
        s
    }
}

fn c_string(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
