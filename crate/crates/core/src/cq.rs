//! Conjunctive queries and their correspondence with pointed structures.
//!
//! A query `q(x̄) = ∃ȳ (A_1 ∧ … ∧ A_m)` corresponds to the structure whose
//! elements are its variables and whose tuples are its atoms, pointed at x̄.
//! Evaluating `q` on `S` is then the image set of that pointed structure in `S`.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{image_set, SolverConfig};
use crate::structure::{PointedStructure, Relation, Signature, Structure};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub relation: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new<S: Into<String>>(relation: impl Into<String>, args: impl IntoIterator<Item = S>) -> Self {
        Atom { relation: relation.into(), args: args.into_iter().map(Into::into).collect() }
    }
}

/// Free variables may repeat (`q(x,x)`); bound variables may not, and the two
/// lists are disjoint. Every free variable occurs in some atom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConjunctiveQuery {
    free: Vec<String>,
    bound: Vec<String>,
    atoms: Vec<Atom>,
}

impl ConjunctiveQuery {
    pub fn new(free: Vec<String>, bound: Vec<String>, atoms: Vec<Atom>) -> Result<Self> {
        let free_set: HashSet<&str> = free.iter().map(String::as_str).collect();
        let mut bound_set = HashSet::new();
        for b in &bound {
            if free_set.contains(b.as_str()) {
                return Err(Error::MalformedQuery(format!("variable `{b}` is both free and bound")));
            }
            if !bound_set.insert(b.as_str()) {
                return Err(Error::MalformedQuery(format!("bound variable `{b}` declared twice")));
            }
        }
        let mut used = HashSet::new();
        for atom in &atoms {
            if atom.args.is_empty() {
                return Err(Error::MalformedQuery(format!("atom `{}` has no arguments", atom.relation)));
            }
            for v in &atom.args {
                if !free_set.contains(v.as_str()) && !bound_set.contains(v.as_str()) {
                    return Err(Error::MalformedQuery(format!("undeclared variable `{v}` in `{}`", atom.relation)));
                }
                used.insert(v.as_str());
            }
        }
        if let Some(x) = free.iter().find(|x| !used.contains(x.as_str())) {
            return Err(Error::UnsafeQuery(x.clone()));
        }
        Ok(ConjunctiveQuery { free, bound, atoms })
    }

    pub fn free(&self) -> &[String] {
        &self.free
    }

    pub fn bound(&self) -> &[String] {
        &self.bound
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_boolean(&self) -> bool {
        self.free.is_empty()
    }

    /// Checks that every atom names a relation of `sig` with the right arity.
    pub fn check_signature(&self, sig: &Signature) -> Result<()> {
        for atom in &self.atoms {
            match sig.arity(&atom.relation) {
                None => return Err(Error::MalformedQuery(format!("relation `{}` not in {sig}", atom.relation))),
                Some(a) if a != atom.args.len() => {
                    return Err(Error::MalformedQuery(format!(
                        "atom `{}` has {} arguments, arity is {a}",
                        atom.relation,
                        atom.args.len()
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// All variables, free ones first, each once.
    pub fn variables(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.free
            .iter()
            .chain(&self.bound)
            .map(String::as_str)
            .filter(|v| seen.insert(*v))
            .collect()
    }
}

impl fmt::Display for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q({}) = ", self.free.join(","))?;
        if !self.bound.is_empty() {
            write!(f, "∃{} ", self.bound.join(" "))?;
        }
        if self.atoms.is_empty() {
            return f.write_str("true");
        }
        let atoms: Vec<String> = self.atoms.iter().map(|a| format!("{}({})", a.relation, a.args.join(","))).collect();
        f.write_str(&atoms.join(" ∧ "))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryFile {
    free: Vec<String>,
    bound: Vec<String>,
    atoms: Vec<(String, Vec<String>)>,
}

impl Serialize for ConjunctiveQuery {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        QueryFile {
            free: self.free.clone(),
            bound: self.bound.clone(),
            atoms: self.atoms.iter().map(|a| (a.relation.clone(), a.args.clone())).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ConjunctiveQuery {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let file = QueryFile::deserialize(deserializer)?;
        let atoms = file.atoms.into_iter().map(|(relation, args)| Atom { relation, args }).collect();
        ConjunctiveQuery::new(file.free, file.bound, atoms).map_err(serde::de::Error::custom)
    }
}

pub fn parse_query(text: &str) -> Result<ConjunctiveQuery> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

/// The pointed structure of `q`: one element per variable, one tuple per atom.
pub fn canonical_structure(q: &ConjunctiveQuery, sig: &Signature) -> Result<PointedStructure> {
    q.check_signature(sig)?;
    let vars = q.variables();
    let index: HashMap<&str, usize> = vars.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut relations = vec![Relation::new(); sig.len()];
    for atom in q.atoms() {
        let rel = sig.position(&atom.relation).expect("checked against signature");
        relations[rel].insert(atom.args.iter().map(|v| index[v.as_str()]).collect());
    }
    let structure = Structure::from_parts(sig.clone(), vars.iter().map(|v| v.to_string()).collect(), relations)?;
    let distinguished = q.free().iter().map(|v| index[v.as_str()]).collect();
    PointedStructure::new(structure, distinguished)
}

/// The query of a pointed structure, with variables named after elements.
/// Fails with [`Error::UnsafeQuery`] when a distinguished element occurs in
/// no tuple.
pub fn canonical_query(p: &PointedStructure) -> Result<ConjunctiveQuery> {
    let s = &p.structure;
    let mut atoms = Vec::with_capacity(s.tuple_count());
    for (i, sym) in s.signature().relations().iter().enumerate() {
        for t in s.named_tuples(i) {
            atoms.push(Atom::new(sym.name.clone(), t));
        }
    }
    let free: Vec<String> = p.distinguished_names().into_iter().map(str::to_owned).collect();
    let free_set: HashSet<usize> = p.distinguished.iter().copied().collect();
    let bound = (0..s.len())
        .filter(|x| !free_set.contains(x))
        .map(|x| s.element(x).to_owned())
        .collect();
    ConjunctiveQuery::new(free, bound, atoms)
}

/// Answers of `q` on `s`, as tuples of element indices of `s`.
pub fn evaluate(q: &ConjunctiveQuery, s: &Structure, cfg: &SolverConfig) -> Result<BTreeSet<Vec<usize>>> {
    let p = canonical_structure(q, s.signature())?;
    image_set(&p, s, cfg)
}

pub fn evaluate_named(q: &ConjunctiveQuery, s: &Structure, cfg: &SolverConfig) -> Result<BTreeSet<Vec<String>>> {
    Ok(evaluate(q, s, cfg)?
        .into_iter()
        .map(|t| t.into_iter().map(|x| s.element(x).to_owned()).collect())
        .collect())
}

/// `q(x_1..x_r) = ∃y_1..y_r (⋀ E(x_i,y_i) ∧ ⋀_{i<r} E(y_i,y_{i+1}))`: each
/// `x_i` has an edge into a directed path `y_1 → … → y_r`.
pub fn path_fan_query(r: usize) -> Result<ConjunctiveQuery> {
    if r < 1 {
        return Err(Error::Precondition("path-fan query needs r >= 1".into()));
    }
    let x = |i: usize| format!("x{i}");
    let y = |i: usize| format!("y{i}");
    let mut atoms: Vec<Atom> = (1..=r).map(|i| Atom::new("E", [x(i), y(i)])).collect();
    atoms.extend((1..r).map(|i| Atom::new("E", [y(i), y(i + 1)])));
    ConjunctiveQuery::new((1..=r).map(x).collect(), (1..=r).map(y).collect(), atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::enumerate_homomorphisms;

    fn sig() -> Signature {
        Signature::single("E", 2).unwrap()
    }

    fn path() -> Structure {
        Structure::from_named(sig(), ["a", "b", "c"], [("E", vec!["a", "b"]), ("E", vec!["b", "c"])]).unwrap()
    }

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn well_formedness() {
        let e = |a: &str, b: &str| Atom::new("E", [a, b]);
        assert!(ConjunctiveQuery::new(strings(&["x"]), strings(&["x"]), vec![e("x", "x")]).is_err());
        assert!(ConjunctiveQuery::new(strings(&["x"]), vec![], vec![e("x", "z")]).is_err());
        assert_eq!(
            ConjunctiveQuery::new(strings(&["x"]), strings(&["y"]), vec![e("y", "y")]),
            Err(Error::UnsafeQuery("x".into()))
        );
        let q = ConjunctiveQuery::new(strings(&["x"]), vec![], vec![Atom::new("E", ["x"])]).unwrap();
        assert!(q.check_signature(&sig()).is_err());
    }

    #[test]
    fn canonical_structure_of_exists_edge() {
        let q = ConjunctiveQuery::new(strings(&["x"]), strings(&["y"]), vec![Atom::new("E", ["x", "y"])]).unwrap();
        let p = canonical_structure(&q, &sig()).unwrap();
        assert_eq!(p.structure.domain(), ["x", "y"]);
        assert_eq!(p.structure.named_tuples(0).collect::<Vec<_>>(), vec![vec!["x", "y"]]);
        assert_eq!(p.distinguished_names(), ["x"]);
    }

    #[test]
    fn canonical_query_of_one_edge() {
        let edge = Structure::from_named(sig(), ["a", "b"], [("E", vec!["a", "b"])]).unwrap();
        let q = canonical_query(&PointedStructure::from_names(edge.clone(), &["a"]).unwrap()).unwrap();
        assert_eq!(q.free(), ["a"]);
        assert_eq!(q.bound(), ["b"]);
        assert_eq!(q.atoms(), [Atom::new("E", ["a", "b"])]);
        assert_eq!(q.to_string(), "q(a) = ∃b E(a,b)");

        let boolean = canonical_query(&PointedStructure::new(edge.clone(), vec![]).unwrap()).unwrap();
        assert!(boolean.is_boolean());
        assert_eq!(boolean.bound(), ["a", "b"]);
        let cs = canonical_structure(&boolean, &sig()).unwrap();
        assert!(cs.distinguished.is_empty());
        assert_eq!(evaluate(&boolean, &edge, &SolverConfig::default()).unwrap(), BTreeSet::from([vec![]]));

        let isolated = Structure::from_named(sig(), ["a", "z"], [("E", vec!["a", "a"])]).unwrap();
        let unsafe_p = PointedStructure::from_names(isolated, &["z"]).unwrap();
        assert_eq!(canonical_query(&unsafe_p), Err(Error::UnsafeQuery("z".into())));
    }

    #[test]
    fn evaluation_examples() {
        let cfg = SolverConfig::default();
        let q = ConjunctiveQuery::new(strings(&["x"]), strings(&["y"]), vec![Atom::new("E", ["x", "y"])]).unwrap();
        let ans = evaluate_named(&q, &path(), &cfg).unwrap();
        assert_eq!(ans, BTreeSet::from([strings(&["a"]), strings(&["b"])]));

        let looped =
            Structure::from_named(sig(), ["u", "v", "w"], [("E", vec!["v", "v"]), ("E", vec!["u", "w"])]).unwrap();
        let q = ConjunctiveQuery::new(strings(&["x"]), vec![], vec![Atom::new("E", ["x", "x"])]).unwrap();
        assert_eq!(evaluate_named(&q, &looped, &cfg).unwrap(), BTreeSet::from([strings(&["v"])]));
    }

    #[test]
    fn evaluation_matches_homomorphism_enumeration() {
        let cfg = SolverConfig::default();
        let q = ConjunctiveQuery::new(
            strings(&["x", "z"]),
            strings(&["y"]),
            vec![Atom::new("E", ["x", "y"]), Atom::new("E", ["y", "z"])],
        )
        .unwrap();
        let p = canonical_structure(&q, &sig()).unwrap();
        let via_enum: BTreeSet<Vec<usize>> = enumerate_homomorphisms(&p.structure, &path(), &cfg)
            .unwrap()
            .iter()
            .map(|h| p.distinguished.iter().map(|&x| h.image(x)).collect())
            .collect();
        assert_eq!(evaluate(&q, &path(), &cfg).unwrap(), via_enum);
        assert_eq!(via_enum, BTreeSet::from([vec![0, 2]]));
    }

    #[test]
    fn path_fan_shapes() {
        let q1 = path_fan_query(1).unwrap();
        assert_eq!(q1.atoms(), [Atom::new("E", ["x1", "y1"])]);
        let q2 = path_fan_query(2).unwrap();
        let atoms: BTreeSet<Atom> = q2.atoms().iter().cloned().collect();
        let expected: BTreeSet<Atom> =
            [Atom::new("E", ["x1", "y1"]), Atom::new("E", ["x2", "y2"]), Atom::new("E", ["y1", "y2"])].into();
        assert_eq!(atoms, expected);
        for r in 1..=6 {
            let q = path_fan_query(r).unwrap();
            assert_eq!(q.atoms().len(), 2 * r - 1);
            assert_eq!(q.free().len(), r);
            assert_eq!(q.bound().len(), r);
        }
        assert!(path_fan_query(0).is_err());
    }

    #[test]
    fn query_json() {
        let q = parse_query(r#"{"free": ["x"], "bound": ["y"], "atoms": [["E", ["x","y"]]]}"#).unwrap();
        assert_eq!(q.atoms(), [Atom::new("E", ["x", "y"])]);
        assert_eq!(serde_json::to_string(&q).unwrap(), r#"{"free":["x"],"bound":["y"],"atoms":[["E",["x","y"]]]}"#);
        assert!(parse_query(r#"{"free": ["x"], "bound": [], "atoms": []}"#).is_err());
    }
}
