//! Normal forms for product homomorphism instances.
//!
//! * [`star_transform`] + [`merge_relations`]: many relations to one, adding a
//!   fresh "zero" element that absorbs product elements with a zero component.
//! * [`pad_first_coordinate`] + [`gadget_digraph`]: one `r`-ary relation to a
//!   single binary edge relation, via per-tuple chains `t^1 → … → t^r` and, on
//!   the target side, a chain of sink nodes reachable from every base element.
//!
//! Both reductions come with the explicit homomorphism lifts that carry a
//! solution of the original instance over to the transformed one, and the
//! digraph reduction with the restriction going back.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::structure::{
    compose_id, fresh_id, product, Homomorphism, PhpInstance, ProductIndex, Relation, Signature, Structure,
};

/// Name of the relation produced by the single-relation transforms.
pub const MERGED_RELATION: &str = "R";
/// Name of the edge relation of gadget digraphs.
pub const EDGE_RELATION: &str = "E";

/// Identifier of the fresh zero element added by [`star_transform`].
pub fn zero_id(s: &Structure) -> String {
    fresh_id("#0", |n| s.index_of(n).is_some())
}

/// Adds a fresh element `0`, a unary `P` holding the old domain, and one
/// relation `R` of arity `r_1 + … + r_k` holding the all-zero tuple plus each
/// old tuple embedded in its own block with zeros elsewhere. Blocks follow
/// signature order.
pub fn star_transform(s: &Structure) -> Result<Structure> {
    let sig = s.signature();
    if sig.is_empty() {
        return Err(Error::Precondition("star transform needs at least one relation".into()));
    }
    let total: usize = sig.relations().iter().map(|r| r.arity).sum();
    let zero = s.len();
    let mut domain = s.domain().to_vec();
    domain.push(zero_id(s));

    let p: Relation = (0..s.len()).map(|x| vec![x]).collect();
    let mut r = Relation::from([vec![zero; total]]);
    let mut offset = 0;
    for (i, sym) in sig.relations().iter().enumerate() {
        for t in s.relation(i) {
            let mut row = vec![zero; total];
            row[offset..offset + sym.arity].copy_from_slice(t);
            r.insert(row);
        }
        offset += sym.arity;
    }
    let out_sig = Signature::new([("P", 1), (MERGED_RELATION, total)]).expect("two distinct names");
    // signature order is alphabetical: P before R
    Structure::from_parts(out_sig, domain, vec![p, r])
}

/// Replaces a structure with exactly two relations by the single relation
/// `first × second` (signature order), named [`MERGED_RELATION`].
pub fn merge_relations(s: &Structure) -> Result<Structure> {
    let sig = s.signature();
    if sig.len() != 2 {
        return Err(Error::Precondition(format!("merge needs exactly two relations, found {}", sig.len())));
    }
    let arity = sig.relations()[0].arity + sig.relations()[1].arity;
    let mut merged = Relation::new();
    for a in s.relation(0) {
        for b in s.relation(1) {
            merged.insert(a.iter().chain(b).copied().collect());
        }
    }
    Structure::from_parts(Signature::single(MERGED_RELATION, arity)?, s.domain().to_vec(), vec![merged])
}

/// Star transform followed by merge, applied to every structure of `inst`.
pub fn single_relation_transform(inst: &PhpInstance) -> Result<PhpInstance> {
    inst.map_structures(|s| merge_relations(&star_transform(s)?))
}

/// Extends `h: ΠA_i → B` to `ΠA_i* → B*`: zero-free elements keep their
/// image, every element with a zero component goes to the zero of `B*`.
/// The result is relative to `product` of the starred (or starred and
/// merged; the domains coincide) factors.
pub fn lift_hom_star(h: &Homomorphism, inst: &PhpInstance, guard: u64) -> Result<Homomorphism> {
    let p = product(inst.factors(), guard)?;
    h.validate(&p, inst.target())?;
    let original = ProductIndex::of(inst.factors());
    let starred = ProductIndex::new(inst.factors().iter().map(|f| f.len() + 1).collect());
    let target_zero = inst.target().len();
    let mapping = (0..starred.size())
        .map(|x| {
            let comps = starred.decode(x);
            if comps.iter().zip(inst.factors()).any(|(&c, f)| c == f.len()) {
                target_zero
            } else {
                h.image(original.encode(&comps))
            }
        })
        .collect();
    Ok(Homomorphism::new(mapping))
}

fn single_relation(s: &Structure, what: &str) -> Result<usize> {
    match s.signature().relations() {
        [r] => Ok(r.arity),
        rels => Err(Error::Precondition(format!("{what} needs a single relation, found {}", rels.len()))),
    }
}

/// Replaces the `r`-ary relation `R` by `dom × R`, so every element is the
/// first coordinate of some tuple whenever `R` is nonempty.
pub fn pad_first_coordinate(s: &Structure) -> Result<Structure> {
    let arity = single_relation(s, "padding")?;
    let name = s.signature().relations()[0].name.clone();
    let padded: Relation = (0..s.len())
        .flat_map(|c| {
            s.relation(0).iter().map(move |t| std::iter::once(c).chain(t.iter().copied()).collect::<Vec<_>>())
        })
        .collect();
    Structure::from_parts(Signature::single(name, arity + 1)?, s.domain().to_vec(), vec![padded])
}

/// A node of a gadget digraph. Indices `j` are 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum GadgetNode {
    Base(usize),
    TupleNode { tuple: Vec<usize>, j: usize },
    Sink(usize),
}

impl fmt::Display for GadgetNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GadgetNode::Base(x) => write!(f, "base {x}"),
            GadgetNode::TupleNode { tuple, j } => write!(f, "t^{j} of {tuple:?}"),
            GadgetNode::Sink(j) => write!(f, "s^{j}"),
        }
    }
}

/// The digraph encoding of a single-relation structure.
///
/// Node order: base elements (in source order), then for each tuple (in
/// sorted order) its chain `t^1..t^r`, then the sinks `s^1..s^{r-1}`.
#[derive(Clone, Debug)]
pub struct GadgetDigraph {
    pub structure: Structure,
    pub nodes: Vec<GadgetNode>,
    arity: usize,
    base_count: usize,
    tuple_slot: HashMap<Vec<usize>, usize>,
    has_sinks: bool,
}

impl GadgetDigraph {
    /// Arity `r` of the encoded relation.
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn base_count(&self) -> usize {
        self.base_count
    }

    pub fn has_sinks(&self) -> bool {
        self.has_sinks
    }

    pub fn base(&self, x: usize) -> usize {
        debug_assert!(x < self.base_count);
        x
    }

    pub fn tuple_node(&self, tuple: &[usize], j: usize) -> Option<usize> {
        let slot = *self.tuple_slot.get(tuple)?;
        (1..=self.arity)
            .contains(&j)
            .then(|| self.base_count + slot * self.arity + j - 1)
    }

    pub fn sink(&self, j: usize) -> Option<usize> {
        (self.has_sinks && (1..self.arity).contains(&j))
            .then(|| self.base_count + self.tuple_slot.len() * self.arity + j - 1)
    }
}

/// Builds `G(s)`: edges `t^j → t^{j+1}` and `t[j] → t^j` for every tuple
/// `t`; with sinks, also `s^j → s^{j+1}` and every base element to every sink.
pub fn gadget_digraph(s: &Structure, with_sinks: bool) -> Result<GadgetDigraph> {
    let r = single_relation(s, "gadget construction")?;
    if with_sinks && r < 2 {
        return Err(Error::Precondition("a sink chain needs arity at least 2".into()));
    }
    let tuples: Vec<&Vec<usize>> = s.relation(0).iter().collect();
    let n = s.len();
    let mut nodes: Vec<GadgetNode> = (0..n).map(GadgetNode::Base).collect();
    for t in &tuples {
        nodes.extend((1..=r).map(|j| GadgetNode::TupleNode { tuple: (*t).clone(), j }));
    }
    if with_sinks {
        nodes.extend((1..r).map(GadgetNode::Sink));
    }

    let taken = |name: &str| s.index_of(name).is_some();
    let mut domain: Vec<String> = s.domain().to_vec();
    for t in &tuples {
        let names: Vec<&str> = t.iter().map(|&x| s.element(x)).collect();
        let label = compose_id(&names);
        domain.extend((1..=r).map(|j| fresh_id(&format!("#t{j}{label}"), taken)));
    }
    if with_sinks {
        domain.extend((1..r).map(|j| fresh_id(&format!("#s{j}"), taken)));
    }

    let tuple_slot: HashMap<Vec<usize>, usize> = tuples.iter().enumerate().map(|(i, t)| ((*t).clone(), i)).collect();
    let chain = |slot: usize, j: usize| n + slot * r + j - 1;
    let mut edges = Relation::new();
    for (slot, t) in tuples.iter().enumerate() {
        for j in 1..=r {
            edges.insert(vec![t[j - 1], chain(slot, j)]);
            if j < r {
                edges.insert(vec![chain(slot, j), chain(slot, j + 1)]);
            }
        }
    }
    if with_sinks {
        let sink = |j: usize| n + tuples.len() * r + j - 1;
        for j in 1..r {
            if j + 1 < r {
                edges.insert(vec![sink(j), sink(j + 1)]);
            }
            for b in 0..n {
                edges.insert(vec![b, sink(j)]);
            }
        }
    }
    let structure = Structure::from_parts(Signature::single(EDGE_RELATION, 2)?, domain, vec![edges])?;
    Ok(GadgetDigraph { structure, nodes, arity: r, base_count: n, tuple_slot, has_sinks: with_sinks })
}

/// Padded gadgets of a single-relation instance: factors without sinks, the
/// target with sinks.
pub fn gadget_instance(inst: &PhpInstance) -> Result<(Vec<GadgetDigraph>, GadgetDigraph)> {
    single_relation(inst.target(), "digraph transform")?;
    let factors = inst
        .factors()
        .iter()
        .map(|f| gadget_digraph(&pad_first_coordinate(f)?, false))
        .collect::<Result<Vec<_>>>()?;
    let target = gadget_digraph(&pad_first_coordinate(inst.target())?, true)?;
    Ok((factors, target))
}

/// Reduces a single-relation instance to an instance over one binary relation.
pub fn digraph_transform(inst: &PhpInstance) -> Result<PhpInstance> {
    let (factors, target) = gadget_instance(inst)?;
    PhpInstance::new(factors.into_iter().map(|g| g.structure).collect(), target.structure)
}

/// Padding applied to every structure of a single-relation instance.
pub fn padded_instance(inst: &PhpInstance) -> Result<PhpInstance> {
    inst.map_structures(pad_first_coordinate)
}

/// Lifts `h: ΠA_i → B` to `ΠG(A_i) → G(B)` by the four-way case split on
/// product nodes:
///
/// 1. all components base: `h` itself;
/// 2. all components `t_i^j` with one common `j`: `h(t_1 × … × t_n)^j`;
/// 3. all components chain nodes with differing indices: `s^{min j_i}`;
/// 4. a mix of base and chain nodes: the image of a base node `u` whose
///    out-edges into case-2 nodes include those of `v`. When the chain
///    components share an index `j < r`, `u` replaces each `t_i^j` by
///    `t_i[j+1]`; otherwise `v` has no such out-edges and `u` is the least
///    base product node.
///
/// `h` must validate against the padded instance (padding keeps the domains,
/// so the same map is meant). The result is relative to the product of the
/// gadget factors in [`ProductIndex`] order.
pub fn lift_hom_digraph(h: &Homomorphism, inst: &PhpInstance, guard: u64) -> Result<Homomorphism> {
    let padded = padded_instance(inst)?;
    let p = product(padded.factors(), guard)?;
    h.validate(&p, padded.target())?;
    let (gf, gb) = gadget_instance(inst)?;
    let r = gb.arity();
    let base_index = ProductIndex::of(padded.factors());
    let gadget_index = ProductIndex::new(gf.iter().map(|g| g.nodes.len()).collect());
    crate::structure::check_guard(gadget_index.size() as u128, guard)?;

    let base_image = |comps: &[usize]| h.image(base_index.encode(comps));
    let least_base = vec![0usize; gf.len()];

    let mut mapping = Vec::with_capacity(gadget_index.size());
    let mut base_comps = vec![0usize; gf.len()];
    for x in 0..gadget_index.size() {
        let comps = gadget_index.decode(x);
        let nodes: Vec<&GadgetNode> = comps.iter().zip(&gf).map(|(&c, g)| &g.nodes[c]).collect();
        let chain_js: Vec<usize> = nodes
            .iter()
            .filter_map(|n| match n {
                GadgetNode::TupleNode { j, .. } => Some(*j),
                _ => None,
            })
            .collect();
        let image = if chain_js.is_empty() {
            for (slot, n) in base_comps.iter_mut().zip(&nodes) {
                let GadgetNode::Base(b) = n else { unreachable!("all base") };
                *slot = *b;
            }
            gb.base(base_image(&base_comps))
        } else if chain_js.len() == nodes.len() {
            let j = chain_js[0];
            if chain_js.iter().all(|&k| k == j) {
                let image_tuple: Vec<usize> = (0..r)
                    .map(|q| {
                        for (slot, n) in base_comps.iter_mut().zip(&nodes) {
                            let GadgetNode::TupleNode { tuple, .. } = n else { unreachable!("all chain") };
                            *slot = tuple[q];
                        }
                        base_image(&base_comps)
                    })
                    .collect();
                gb.tuple_node(&image_tuple, j).ok_or_else(|| {
                    Error::InvalidHomomorphism("image of a product tuple is not a target tuple".into())
                })?
            } else {
                let j = *chain_js.iter().min().expect("nonempty");
                gb.sink(j).expect("differing indices imply min j < r")
            }
        } else {
            let j = chain_js[0];
            if chain_js.iter().all(|&k| k == j) && j < r {
                for (slot, n) in base_comps.iter_mut().zip(&nodes) {
                    *slot = match n {
                        GadgetNode::Base(b) => *b,
                        GadgetNode::TupleNode { tuple, .. } => tuple[j],
                        GadgetNode::Sink(_) => unreachable!("factor gadgets have no sinks"),
                    };
                }
                gb.base(base_image(&base_comps))
            } else {
                gb.base(base_image(&least_base))
            }
        };
        mapping.push(image);
    }
    Ok(Homomorphism::new(mapping))
}

/// Restricts `h': ΠG(A_i) → G(B)` to the base product nodes and reads the
/// images back as elements of `B`. Fails if a base node is sent outside the
/// base part of `G(B)`.
pub fn restrict_hom_digraph(h: &Homomorphism, inst: &PhpInstance, guard: u64) -> Result<Homomorphism> {
    let (gf, gb) = gadget_instance(inst)?;
    let gadget_factors: Vec<Structure> = gf.iter().map(|g| g.structure.clone()).collect();
    let gp = product(&gadget_factors, guard)?;
    h.validate(&gp, &gb.structure)?;
    let base_index = ProductIndex::new(gf.iter().map(GadgetDigraph::base_count).collect());
    let gadget_index = ProductIndex::new(gf.iter().map(|g| g.nodes.len()).collect());
    let mapping = (0..base_index.size())
        .map(|x| {
            let y = h.image(gadget_index.encode(&base_index.decode(x)));
            match gb.nodes[y] {
                GadgetNode::Base(b) => Ok(b),
                ref other => Err(Error::InvalidHomomorphism(format!(
                    "base product node {} is sent to {other}",
                    gp.element(gadget_index.encode(&base_index.decode(x)))
                ))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let restricted = Homomorphism::new(mapping);
    let padded = padded_instance(inst)?;
    restricted.validate(&product(padded.factors(), guard)?, padded.target())?;
    Ok(restricted)
}
