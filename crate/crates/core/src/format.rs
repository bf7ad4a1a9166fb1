//! JSON file formats for structures.
//!
//! ```json
//! {"domain": ["a","b"], "relations": {"E": {"arity": 2, "tuples": [["a","b"]]}}}
//! ```
//!
//! The canonical form is compact JSON with the domain, relation names and
//! tuples sorted lexicographically.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::structure::{Relation, Signature, Structure};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RelationFile {
    arity: usize,
    tuples: Vec<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StructureFile {
    domain: Vec<String>,
    relations: BTreeMap<String, RelationFile>,
}

pub fn parse_structure(text: &str) -> Result<Structure> {
    let file: StructureFile = serde_json::from_str(text)?;
    from_file(file)
}

fn from_file(file: StructureFile) -> Result<Structure> {
    let signature = Signature::new(file.relations.iter().map(|(n, r)| (n.clone(), r.arity)))
        .map_err(|e| Error::Parse(e.to_string()))?;
    let mut seen = BTreeSet::new();
    if let Some(dup) = file.domain.iter().find(|e| !seen.insert(e.as_str())) {
        return Err(Error::Parse(format!("duplicate domain element `{dup}`")));
    }
    let index: BTreeMap<&str, usize> = file.domain.iter().enumerate().map(|(i, e)| (e.as_str(), i)).collect();
    let mut relations = Vec::with_capacity(signature.len());
    for sym in signature.relations() {
        let rf = &file.relations[&sym.name];
        let mut rel = Relation::new();
        for t in &rf.tuples {
            if t.len() != sym.arity {
                return Err(Error::Parse(format!(
                    "tuple {t:?} in `{}` has length {}, declared arity is {}",
                    sym.name,
                    t.len(),
                    sym.arity
                )));
            }
            let tuple = t
                .iter()
                .map(|e| {
                    index
                        .get(e.as_str())
                        .copied()
                        .ok_or_else(|| Error::Parse(format!("tuple {t:?} in `{}` uses unknown element `{e}`", sym.name)))
                })
                .collect::<Result<Vec<_>>>()?;
            if !rel.insert(tuple) {
                return Err(Error::Parse(format!("duplicate tuple {t:?} in `{}`", sym.name)));
            }
        }
        relations.push(rel);
    }
    Structure::from_parts(signature, file.domain, relations).map_err(|e| Error::Parse(e.to_string()))
}

fn to_file(s: &Structure) -> StructureFile {
    let mut domain = s.domain().to_vec();
    domain.sort();
    let relations = s
        .signature()
        .relations()
        .iter()
        .enumerate()
        .map(|(i, sym)| {
            let mut tuples: Vec<Vec<String>> = s
                .named_tuples(i)
                .map(|t| t.into_iter().map(str::to_owned).collect())
                .collect();
            tuples.sort();
            (sym.name.clone(), RelationFile { arity: sym.arity, tuples })
        })
        .collect();
    StructureFile { domain, relations }
}

/// Canonical compact serialization (no trailing newline).
pub fn serialize_structure(s: &Structure) -> String {
    serde_json::to_string(&to_file(s)).expect("structure files always serialize")
}

pub fn serialize_structure_pretty(s: &Structure) -> String {
    serde_json::to_string_pretty(&to_file(s)).expect("structure files always serialize")
}

pub fn structure_to_value(s: &Structure) -> serde_json::Value {
    serde_json::to_value(to_file(s)).expect("structure files always serialize")
}

pub fn structure_from_value(v: serde_json::Value) -> Result<Structure> {
    from_file(serde_json::from_value(v)?)
}

pub fn read_structure(path: impl AsRef<Path>) -> Result<Structure> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_structure(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Writes the canonical form followed by a newline.
pub fn write_structure(path: impl AsRef<Path>, s: &Structure) -> Result<()> {
    let path = path.as_ref();
    let mut text = serialize_structure(s);
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
