//! Conjunctive-query definability of a relation inside a structure.
//!
//! `S ⊆ dom(I)^k` is definable by a conjunctive query iff every homomorphism
//! from the pointed power `(I^|S|, d)` back into `I` sends `d` into `S`, where
//! `d` pairs up the tuples of `S` coordinatewise. In that case the canonical
//! query of the pointed power defines `S`; otherwise any homomorphism sending
//! `d` outside `S` certifies that no conjunctive query does.

use std::collections::BTreeSet;

use crate::cq::{canonical_query, ConjunctiveQuery};
use crate::error::{Error, Result};
use crate::solver::{find_homomorphism_with, image_set, SolverConfig};
use crate::structure::{
    check_guard, disjoint_union, fresh_id, product, product_cardinality, Homomorphism, PhpInstance, PointedStructure,
    ProductIndex, Relation, Structure,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DefinabilityVerdict {
    Definable {
        query: ConjunctiveQuery,
    },
    /// `witness_hom` maps the pointed power to `I` and sends the
    /// distinguished tuple to `witness_tuple`, which is not in `S`.
    NotDefinable {
        witness_tuple: Vec<usize>,
        witness_hom: Homomorphism,
    },
}

impl DefinabilityVerdict {
    pub fn is_definable(&self) -> bool {
        matches!(self, DefinabilityVerdict::Definable { .. })
    }
}

/// The product of `|S|` copies of `i`, pointed at the coordinatewise pairing
/// of the tuples of `S` (taken in sorted order).
pub fn pointed_power(i: &Structure, relation: &BTreeSet<Vec<usize>>, guard: u64) -> Result<PointedStructure> {
    let k = check_relation(i, relation)?;
    check_guard(product_cardinality(std::iter::repeat_n(i.len(), relation.len())), guard)?;
    let copies = vec![i.clone(); relation.len()];
    let p = product(&copies, guard)?;
    let index = ProductIndex::of(&copies);
    let distinguished = (0..k)
        .map(|j| index.encode(&relation.iter().map(|t| t[j]).collect::<Vec<_>>()))
        .collect();
    PointedStructure::new(p, distinguished)
}

fn check_relation(i: &Structure, relation: &BTreeSet<Vec<usize>>) -> Result<usize> {
    let first = relation
        .iter()
        .next()
        .ok_or_else(|| Error::Precondition("the relation to define must be nonempty".into()))?;
    let k = first.len();
    if k == 0 {
        return Err(Error::Precondition("the relation to define must have arity at least 1".into()));
    }
    for t in relation {
        if t.len() != k {
            return Err(Error::Precondition(format!("mixed tuple lengths {k} and {}", t.len())));
        }
        if t.iter().any(|&x| x >= i.len()) {
            return Err(Error::Precondition("relation mentions an element outside the structure".into()));
        }
    }
    Ok(k)
}

/// Decides whether some conjunctive query `q` has `q(i) = relation`.
pub fn decide_cq_definability(
    i: &Structure,
    relation: &BTreeSet<Vec<usize>>,
    cfg: &SolverConfig,
) -> Result<DefinabilityVerdict> {
    let power = pointed_power(i, relation, cfg.product_guard)?;
    let images = image_set(&power, i, cfg)?;
    debug_assert!(relation.is_subset(&images), "projections reach every tuple of S");
    match images.into_iter().find(|b| !relation.contains(b)) {
        None => Ok(DefinabilityVerdict::Definable { query: canonical_query(&power)? }),
        Some(witness_tuple) => {
            let pins: Vec<(usize, usize)> =
                power.distinguished.iter().copied().zip(witness_tuple.iter().copied()).collect();
            let witness_hom = find_homomorphism_with(&power.structure, i, cfg, &pins)?
                .expect("tuple came from the image set");
            Ok(DefinabilityVerdict::NotDefinable { witness_tuple, witness_hom })
        }
    }
}

/// Named-element front end for [`decide_cq_definability`].
pub fn relation_from_names(i: &Structure, tuples: &[Vec<String>]) -> Result<BTreeSet<Vec<usize>>> {
    tuples
        .iter()
        .map(|t| {
            t.iter()
                .map(|e| i.index_of(e).ok_or_else(|| Error::Precondition(format!("unknown element `{e}`"))))
                .collect()
        })
        .collect()
}

pub fn parse_relation(text: &str) -> Result<Vec<Vec<String>>> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

/// Output of [`reduce_php_to_nondefinability`].
#[derive(Clone, Debug)]
pub struct DefinabilityReduction {
    /// Disjoint union of the factors and the target plus one apex per part.
    pub structure: Structure,
    /// The factor apexes, as 1-tuples.
    pub relation: BTreeSet<Vec<usize>>,
    /// Apex indices: one per factor, then the target's.
    pub apexes: Vec<usize>,
    /// Common longest-path length of the input structures.
    pub path_length: usize,
}

impl DefinabilityReduction {
    /// True iff exactly the apexes start a directed path of length `r + 1`.
    pub fn apex_audit(&self) -> bool {
        let Some(longest) = self.structure.longest_paths(0) else {
            return false;
        };
        let apexes: BTreeSet<usize> = self.apexes.iter().copied().collect();
        longest
            .iter()
            .enumerate()
            .all(|(x, &l)| (l == self.path_length + 1) == apexes.contains(&x))
    }
}

/// Builds `(C, S)` with `ΠA_i → B` iff `S` is not CQ-definable in `C`.
///
/// Every structure must be an acyclic digraph (one binary relation) whose
/// longest directed path has the same length `r`. `C` is the disjoint union
/// of `A_1..A_n, B` with a fresh apex per part and an edge from each apex to
/// every element of its part; `S` holds the factor apexes.
pub fn reduce_php_to_nondefinability(inst: &PhpInstance) -> Result<DefinabilityReduction> {
    match inst.signature().relations() {
        [r] if r.arity == 2 => {}
        _ => {
            return Err(Error::Precondition(format!(
                "reduction needs a single binary relation, found {}",
                inst.signature()
            )))
        }
    }
    let parts: Vec<Structure> = inst.factors().iter().chain([inst.target()]).cloned().collect();
    let mut path_length = None;
    for (p, s) in parts.iter().enumerate() {
        let longest = s
            .longest_paths(0)
            .ok_or_else(|| Error::Precondition(format!("part {} has a directed cycle", p + 1)))?;
        let l = longest.into_iter().max().unwrap_or(0);
        match path_length {
            None => path_length = Some(l),
            Some(r) if r != l => {
                return Err(Error::Precondition(format!(
                    "part {} has longest path {l}, part 1 has {r}",
                    p + 1
                )))
            }
            Some(_) => {}
        }
    }
    let path_length = path_length.expect("at least one factor");

    let union = disjoint_union(&parts)?;
    let mut domain = union.domain().to_vec();
    let mut edges: Relation = union.relation(0).clone();
    let mut apexes = Vec::with_capacity(parts.len());
    let mut offset = 0;
    for (p, s) in parts.iter().enumerate() {
        let base = if p + 1 == parts.len() { "b".to_owned() } else { format!("a{}", p + 1) };
        let apex_name = fresh_id(&base, |n| union.index_of(n).is_some());
        let apex = domain.len();
        domain.push(apex_name);
        apexes.push(apex);
        edges.extend((offset..offset + s.len()).map(|x| vec![apex, x]));
        offset += s.len();
    }
    let structure = Structure::from_parts(union.signature().clone(), domain, vec![edges])?;
    let relation = apexes[..apexes.len() - 1].iter().map(|&a| vec![a]).collect();
    Ok(DefinabilityReduction { structure, relation, apexes, path_length })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cq::evaluate;
    use crate::structure::Signature;

    fn digraph(domain: &[&str], edges: &[(&str, &str)]) -> Structure {
        Structure::from_named(
            Signature::single("E", 2).unwrap(),
            domain.iter().copied(),
            edges.iter().map(|&(a, b)| ("E", vec![a, b])),
        )
        .unwrap()
    }

    fn path() -> Structure {
        digraph(&["a", "b", "c"], &[("a", "b"), ("b", "c")])
    }

    fn rel(i: &Structure, names: &[&str]) -> BTreeSet<Vec<usize>> {
        names.iter().map(|n| vec![i.index_of(n).unwrap()]).collect()
    }

    #[test]
    fn self_loop_is_definable() {
        let i = digraph(&["v"], &[("v", "v")]);
        let s = rel(&i, &["v"]);
        let cfg = SolverConfig::default();
        match decide_cq_definability(&i, &s, &cfg).unwrap() {
            DefinabilityVerdict::Definable { query } => {
                assert_eq!(query.atoms().len(), 1);
                assert_eq!(query.atoms()[0].args, [query.free()[0].clone(), query.free()[0].clone()]);
                assert_eq!(evaluate(&query, &i, &cfg).unwrap(), s);
            }
            other => panic!("expected definable, got {other:?}"),
        }
    }

    #[test]
    fn path_source_is_definable() {
        let i = path();
        let s = rel(&i, &["a"]);
        let cfg = SolverConfig::default();
        let DefinabilityVerdict::Definable { query } = decide_cq_definability(&i, &s, &cfg).unwrap() else {
            panic!("expected definable");
        };
        assert_eq!(evaluate(&query, &i, &cfg).unwrap(), s);
    }

    #[test]
    fn path_ends_are_not_definable() {
        let i = path();
        let s = rel(&i, &["a", "c"]);
        let cfg = SolverConfig::default();
        let DefinabilityVerdict::NotDefinable { witness_tuple, witness_hom } =
            decide_cq_definability(&i, &s, &cfg).unwrap()
        else {
            panic!("expected not definable");
        };
        assert_eq!(witness_tuple, vec![1]);
        let power = pointed_power(&i, &s, cfg.product_guard).unwrap();
        assert_eq!(power.structure.len(), 9);
        witness_hom.validate(&power.structure, &i).unwrap();
        assert_eq!(witness_hom.image(power.distinguished[0]), 1);
    }

    #[test]
    fn preconditions() {
        let i = path();
        let cfg = SolverConfig::default();
        assert!(decide_cq_definability(&i, &BTreeSet::new(), &cfg).is_err());
        let mixed = BTreeSet::from([vec![0], vec![0, 1]]);
        assert!(decide_cq_definability(&i, &mixed, &cfg).is_err());
        let all = rel(&i, &["a", "b", "c"]);
        let tight = SolverConfig { product_guard: 26, ..cfg.clone() };
        assert_eq!(
            decide_cq_definability(&i, &all, &tight),
            Err(Error::GuardExceeded { cardinality: 27, guard: 26 })
        );
        let isolated = digraph(&["a", "z"], &[("a", "a")]);
        assert_eq!(
            decide_cq_definability(&isolated, &rel(&isolated, &["a", "z"]), &cfg),
            Err(Error::UnsafeQuery("(a,z)".into()))
        );
    }

    #[test]
    fn binary_relation_definability() {
        let i = path();
        let s: BTreeSet<Vec<usize>> = BTreeSet::from([vec![0, 1], vec![1, 2]]);
        let cfg = SolverConfig::default();
        let DefinabilityVerdict::Definable { query } = decide_cq_definability(&i, &s, &cfg).unwrap() else {
            panic!("the edge relation is definable");
        };
        assert_eq!(evaluate(&query, &i, &cfg).unwrap(), s);
    }

    #[test]
    fn reduction_shape() {
        let a = digraph(&["x", "y"], &[("x", "y")]);
        let b = digraph(&["p", "q", "r"], &[("p", "q"), ("r", "q")]);
        let inst = PhpInstance::new(vec![a.clone(), a], b).unwrap();
        let red = reduce_php_to_nondefinability(&inst).unwrap();
        assert_eq!(red.structure.len(), 2 + 2 + 3 + 3);
        assert_eq!(red.path_length, 1);
        assert_eq!(red.relation.len(), 2);
        let out_degree = |x: usize| red.structure.relation(0).iter().filter(|t| t[0] == x).count();
        assert_eq!(red.apexes.iter().map(|&x| out_degree(x)).collect::<Vec<_>>(), [2, 2, 3]);
        assert!(red.apex_audit());
        assert_eq!(red.structure.element(red.apexes[2]), "b");
    }

    #[test]
    fn reduction_refuses_bad_inputs() {
        let a = digraph(&["x", "y"], &[("x", "y")]);
        let cyc = digraph(&["x"], &[("x", "x")]);
        assert!(reduce_php_to_nondefinability(&PhpInstance::new(vec![a.clone()], cyc).unwrap()).is_err());
        let longer = digraph(&["x", "y", "z"], &[("x", "y"), ("y", "z")]);
        assert!(reduce_php_to_nondefinability(&PhpInstance::new(vec![a], longer).unwrap()).is_err());
        let unary = Structure::empty_relations(Signature::single("U", 1).unwrap(), ["x"]).unwrap();
        assert!(reduce_php_to_nondefinability(&PhpInstance::new(vec![unary.clone()], unary).unwrap()).is_err());
    }
}
