//! Finite relational structures and the constructions on them: direct
//! products, disjoint unions and unary-to-binary rewriting.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};

/// Default bound on the number of elements a product may have.
pub const DEFAULT_PRODUCT_GUARD: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationSymbol {
    pub name: String,
    pub arity: usize,
}

/// A relational schema. Symbols are kept sorted by name, so two signatures
/// with the same symbols compare equal regardless of declaration order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Signature {
    relations: Vec<RelationSymbol>,
}

impl Signature {
    pub fn new<I, S>(relations: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let mut relations: Vec<RelationSymbol> = relations
            .into_iter()
            .map(|(name, arity)| RelationSymbol { name: name.into(), arity })
            .collect();
        relations.sort();
        for w in relations.windows(2) {
            if w[0].name == w[1].name {
                return Err(Error::InvalidSignature(format!("duplicate relation `{}`", w[0].name)));
            }
        }
        if let Some(r) = relations.iter().find(|r| r.arity == 0) {
            return Err(Error::InvalidSignature(format!("relation `{}` has arity 0", r.name)));
        }
        if relations.iter().any(|r| r.name.is_empty()) {
            return Err(Error::InvalidSignature("empty relation name".into()));
        }
        Ok(Signature { relations })
    }

    pub fn single(name: impl Into<String>, arity: usize) -> Result<Self> {
        Self::new([(name.into(), arity)])
    }

    pub fn relations(&self) -> &[RelationSymbol] {
        &self.relations
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.relations.binary_search_by(|r| r.name.as_str().cmp(name)).ok()
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.position(name).map(|i| self.relations[i].arity)
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, r) in self.relations.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}/{}", r.name, r.arity)?;
        }
        f.write_str("}")
    }
}

/// Interpretation of one relation: a sorted set of tuples of element indices.
pub type Relation = BTreeSet<Vec<usize>>;

/// A finite relational structure.
///
/// Elements are identified by strings; internally every element is addressed
/// by its position in [`Structure::domain`]. Tuples are stored as sorted sets
/// of index vectors, one set per signature symbol (in signature order).
#[derive(Clone, Debug)]
pub struct Structure {
    signature: Signature,
    domain: Vec<String>,
    index: HashMap<String, usize>,
    relations: Vec<Relation>,
}

impl Structure {
    /// Builds a structure from element indices, checking every invariant.
    pub fn from_parts(signature: Signature, domain: Vec<String>, relations: Vec<Relation>) -> Result<Self> {
        if relations.len() != signature.len() {
            return Err(Error::InvalidStructure(format!(
                "{} relation interpretations for a signature with {} symbols",
                relations.len(),
                signature.len()
            )));
        }
        let mut index = HashMap::with_capacity(domain.len());
        for (i, e) in domain.iter().enumerate() {
            if index.insert(e.clone(), i).is_some() {
                return Err(Error::InvalidStructure(format!("duplicate element `{e}`")));
            }
        }
        for (sym, rel) in signature.relations().iter().zip(&relations) {
            for t in rel {
                if t.len() != sym.arity {
                    return Err(Error::InvalidStructure(format!(
                        "tuple of length {} in relation `{}` of arity {}",
                        t.len(),
                        sym.name,
                        sym.arity
                    )));
                }
                if t.iter().any(|&x| x >= domain.len()) {
                    return Err(Error::InvalidStructure(format!(
                        "tuple in relation `{}` refers to an element outside the domain",
                        sym.name
                    )));
                }
            }
        }
        Ok(Structure { signature, domain, index, relations })
    }

    /// Builds a structure from named tuples. Relations not mentioned are empty;
    /// repeated tuples are collapsed.
    pub fn from_named<D, S, T, R, E>(signature: Signature, domain: D, tuples: T) -> Result<Self>
    where
        D: IntoIterator<Item = S>,
        S: Into<String>,
        T: IntoIterator<Item = (R, Vec<E>)>,
        R: AsRef<str>,
        E: AsRef<str>,
    {
        let relations = vec![Relation::new(); signature.len()];
        let mut s = Structure::from_parts(signature, domain.into_iter().map(Into::into).collect(), relations)?;
        for (rel, tuple) in tuples {
            let rel = rel.as_ref();
            let pos = s
                .signature
                .position(rel)
                .ok_or_else(|| Error::InvalidStructure(format!("unknown relation `{rel}`")))?;
            let arity = s.signature.relations()[pos].arity;
            if tuple.len() != arity {
                return Err(Error::InvalidStructure(format!(
                    "tuple of length {} in relation `{rel}` of arity {arity}",
                    tuple.len()
                )));
            }
            let t = tuple
                .iter()
                .map(|e| {
                    s.index_of(e.as_ref())
                        .ok_or_else(|| Error::InvalidStructure(format!("unknown element `{}` in `{rel}`", e.as_ref())))
                })
                .collect::<Result<Vec<_>>>()?;
            s.relations[pos].insert(t);
        }
        Ok(s)
    }

    /// A structure with the given domain and all relations empty.
    pub fn empty_relations<D, S>(signature: Signature, domain: D) -> Result<Self>
    where
        D: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let n = signature.len();
        Structure::from_parts(signature, domain.into_iter().map(Into::into).collect(), vec![Relation::new(); n])
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn domain(&self) -> &[String] {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    pub fn element(&self, i: usize) -> &str {
        &self.domain[i]
    }

    pub fn index_of(&self, element: &str) -> Option<usize> {
        self.index.get(element).copied()
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn relation(&self, i: usize) -> &Relation {
        &self.relations[i]
    }

    pub fn relation_by_name(&self, name: &str) -> Option<&Relation> {
        self.signature.position(name).map(|i| &self.relations[i])
    }

    pub fn tuple_count(&self) -> usize {
        self.relations.iter().map(BTreeSet::len).sum()
    }

    /// Tuples of one relation rendered with element names.
    pub fn named_tuples(&self, i: usize) -> impl Iterator<Item = Vec<&str>> + '_ {
        self.relations[i].iter().map(move |t| t.iter().map(|&x| self.element(x)).collect())
    }

    /// Order-insensitive representation used for equality.
    fn canonical_key(&self) -> (BTreeSet<&str>, BTreeMap<&str, BTreeSet<Vec<&str>>>) {
        let domain = self.domain.iter().map(String::as_str).collect();
        let rels = self
            .signature
            .relations()
            .iter()
            .enumerate()
            .map(|(i, sym)| (sym.name.as_str(), self.named_tuples(i).collect()))
            .collect();
        (domain, rels)
    }

    /// Lengths of the longest directed path leaving each element, reading the
    /// binary relation `rel` as an edge set. `None` when the digraph has a cycle.
    pub fn longest_paths(&self, rel: usize) -> Option<Vec<usize>> {
        let edges = &self.relations[rel];
        let mut succ = vec![Vec::new(); self.len()];
        let mut indeg = vec![0usize; self.len()];
        for t in edges {
            if t.len() != 2 {
                return None;
            }
            succ[t[0]].push(t[1]);
            indeg[t[1]] += 1;
        }
        // Kahn's order, then relax in reverse.
        let mut order = Vec::with_capacity(self.len());
        let mut stack: Vec<usize> = (0..self.len()).filter(|&v| indeg[v] == 0).collect();
        while let Some(v) = stack.pop() {
            order.push(v);
            for &w in &succ[v] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    stack.push(w);
                }
            }
        }
        if order.len() != self.len() {
            return None;
        }
        let mut longest = vec![0usize; self.len()];
        for &v in order.iter().rev() {
            longest[v] = succ[v].iter().map(|&w| longest[w] + 1).max().unwrap_or(0);
        }
        Some(longest)
    }
}

impl PartialEq for Structure {
    fn eq(&self, other: &Self) -> bool {
        self.signature == other.signature && self.canonical_key() == other.canonical_key()
    }
}

impl Eq for Structure {}

/// A structure together with a distinguished tuple of elements. An empty
/// tuple stands for the Boolean case.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointedStructure {
    pub structure: Structure,
    pub distinguished: Vec<usize>,
}

impl PointedStructure {
    pub fn new(structure: Structure, distinguished: Vec<usize>) -> Result<Self> {
        if let Some(&x) = distinguished.iter().find(|&&x| x >= structure.len()) {
            return Err(Error::InvalidStructure(format!("distinguished index {x} outside the domain")));
        }
        Ok(PointedStructure { structure, distinguished })
    }

    pub fn from_names<S: AsRef<str>>(structure: Structure, names: &[S]) -> Result<Self> {
        let distinguished = names
            .iter()
            .map(|n| {
                structure
                    .index_of(n.as_ref())
                    .ok_or_else(|| Error::InvalidStructure(format!("unknown distinguished element `{}`", n.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PointedStructure { structure, distinguished })
    }

    pub fn distinguished_names(&self) -> Vec<&str> {
        self.distinguished.iter().map(|&x| self.structure.element(x)).collect()
    }
}

/// Factors `A_1..A_n` and a target `B` over one shared signature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhpInstance {
    factors: Vec<Structure>,
    target: Structure,
}

impl PhpInstance {
    pub fn new(factors: Vec<Structure>, target: Structure) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Precondition("a PHP instance needs at least one factor".into()));
        }
        for (i, f) in factors.iter().enumerate() {
            if f.signature() != target.signature() {
                return Err(Error::SignatureMismatch(format!(
                    "factor {} has signature {} but the target has {}",
                    i + 1,
                    f.signature(),
                    target.signature()
                )));
            }
        }
        Ok(PhpInstance { factors, target })
    }

    pub fn factors(&self) -> &[Structure] {
        &self.factors
    }

    pub fn target(&self) -> &Structure {
        &self.target
    }

    pub fn signature(&self) -> &Signature {
        self.target.signature()
    }

    /// Number of elements of the product of the factors.
    pub fn product_cardinality(&self) -> u128 {
        product_cardinality(self.factors.iter().map(Structure::len))
    }

    /// Applies `f` to every factor and to the target.
    pub fn map_structures<F>(&self, mut f: F) -> Result<PhpInstance>
    where
        F: FnMut(&Structure) -> Result<Structure>,
    {
        let factors = self.factors.iter().map(&mut f).collect::<Result<Vec<_>>>()?;
        let target = f(&self.target)?;
        PhpInstance::new(factors, target)
    }
}

/// A total map from source elements to target elements, by index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Homomorphism {
    mapping: Vec<usize>,
}

impl Homomorphism {
    pub fn new(mapping: Vec<usize>) -> Self {
        Homomorphism { mapping }
    }

    pub fn identity(n: usize) -> Self {
        Homomorphism { mapping: (0..n).collect() }
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn into_mapping(self) -> Vec<usize> {
        self.mapping
    }

    pub fn image(&self, x: usize) -> usize {
        self.mapping[x]
    }

    /// `self: A -> B` followed by `then: B -> C`.
    pub fn then(&self, then: &Homomorphism) -> Homomorphism {
        Homomorphism { mapping: self.mapping.iter().map(|&x| then.mapping[x]).collect() }
    }

    /// Checks totality and relation preservation directly against the tuple sets.
    pub fn validate(&self, source: &Structure, target: &Structure) -> Result<()> {
        if source.signature() != target.signature() {
            return Err(Error::SignatureMismatch(format!(
                "source {} vs target {}",
                source.signature(),
                target.signature()
            )));
        }
        if self.mapping.len() != source.len() {
            return Err(Error::InvalidHomomorphism(format!(
                "map covers {} elements, source has {}",
                self.mapping.len(),
                source.len()
            )));
        }
        if let Some(&y) = self.mapping.iter().find(|&&y| y >= target.len()) {
            return Err(Error::InvalidHomomorphism(format!("image index {y} outside the target")));
        }
        for (i, sym) in source.signature().relations().iter().enumerate() {
            let tgt = target.relation(i);
            for t in source.relation(i) {
                let image: Vec<usize> = t.iter().map(|&x| self.mapping[x]).collect();
                if !tgt.contains(&image) {
                    let src: Vec<&str> = t.iter().map(|&x| source.element(x)).collect();
                    let img: Vec<&str> = image.iter().map(|&x| target.element(x)).collect();
                    return Err(Error::InvalidHomomorphism(format!(
                        "{}({}) maps to {}({}), which is not a tuple of the target",
                        sym.name,
                        src.join(","),
                        sym.name,
                        img.join(",")
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_valid(&self, source: &Structure, target: &Structure) -> bool {
        self.validate(source, target).is_ok()
    }

    pub fn to_named(&self, source: &Structure, target: &Structure) -> BTreeMap<String, String> {
        self.mapping
            .iter()
            .enumerate()
            .map(|(x, &y)| (source.element(x).to_owned(), target.element(y).to_owned()))
            .collect()
    }

    pub fn from_named(map: &BTreeMap<String, String>, source: &Structure, target: &Structure) -> Result<Self> {
        let mut mapping = Vec::with_capacity(source.len());
        for e in source.domain() {
            let img = map
                .get(e)
                .ok_or_else(|| Error::InvalidHomomorphism(format!("no image for `{e}`")))?;
            let y = target
                .index_of(img)
                .ok_or_else(|| Error::InvalidHomomorphism(format!("image `{img}` not in the target")))?;
            mapping.push(y);
        }
        Ok(Homomorphism { mapping })
    }
}

/// Mixed-radix addressing of product elements. The first component is the
/// most significant, so increasing index order is lexicographic order of
/// component tuples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductIndex {
    radices: Vec<usize>,
}

impl ProductIndex {
    pub fn new(radices: Vec<usize>) -> Self {
        ProductIndex { radices }
    }

    pub fn of(factors: &[Structure]) -> Self {
        ProductIndex::new(factors.iter().map(Structure::len).collect())
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn size(&self) -> usize {
        self.radices.iter().product()
    }

    pub fn encode(&self, components: &[usize]) -> usize {
        debug_assert_eq!(components.len(), self.radices.len());
        components.iter().zip(&self.radices).fold(0, |acc, (&c, &r)| acc * r + c)
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.radices.len()];
        for (slot, &r) in out.iter_mut().zip(&self.radices).rev() {
            *slot = index % r;
            index /= r;
        }
        out
    }

    /// The `i`-th component of `index`, without decoding the rest.
    pub fn component(&self, index: usize, i: usize) -> usize {
        let stride: usize = self.radices[i + 1..].iter().product();
        (index / stride) % self.radices[i]
    }
}

pub fn product_cardinality<I: IntoIterator<Item = usize>>(sizes: I) -> u128 {
    sizes
        .into_iter()
        .try_fold(1u128, |acc, n| acc.checked_mul(n as u128))
        .unwrap_or(u128::MAX)
}

pub(crate) fn check_guard(cardinality: u128, guard: u64) -> Result<()> {
    if cardinality > guard as u128 {
        Err(Error::GuardExceeded { cardinality, guard })
    } else {
        Ok(())
    }
}

fn escape_component(s: &str, out: &mut String) {
    for c in s.chars() {
        if matches!(c, '\\' | ',' | '(' | ')') {
            out.push('\\');
        }
        out.push(c);
    }
}

/// Renders a product element as `(c1,c2,...)`. Separators inside components
/// are backslash-escaped so [`decompose_id`] is an exact inverse.
pub fn compose_id<S: AsRef<str>>(components: &[S]) -> String {
    let mut out = String::from("(");
    for (i, c) in components.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        escape_component(c.as_ref(), &mut out);
    }
    out.push(')');
    out
}

pub fn decompose_id(id: &str) -> Option<Vec<String>> {
    let inner = id.strip_prefix('(')?.strip_suffix(')')?;
    // `()` would be ambiguous with a single empty component; products are never nullary.
    let mut parts = vec![String::new()];
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => parts.last_mut()?.push(chars.next()?),
            ',' => parts.push(String::new()),
            '(' | ')' => return None,
            c => parts.last_mut()?.push(c),
        }
    }
    Some(parts)
}

fn shared_signature<'a>(parts: &'a [Structure], what: &str) -> Result<&'a Signature> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Precondition(format!("{what} of an empty list")))?;
    for (i, s) in parts.iter().enumerate().skip(1) {
        if s.signature() != first.signature() {
            return Err(Error::SignatureMismatch(format!(
                "{what}: part {} has signature {} but part 1 has {}",
                i + 1,
                s.signature(),
                first.signature()
            )));
        }
    }
    Ok(first.signature())
}

/// Calls `f` with every combination picking one entry from each list, in
/// lexicographic order. Does nothing if any list is empty.
pub(crate) fn for_each_combination<T, F>(lists: &[Vec<T>], mut f: F)
where
    F: FnMut(&[&T]),
{
    if lists.iter().any(Vec::is_empty) {
        return;
    }
    let mut counters = vec![0usize; lists.len()];
    let mut picked: Vec<&T> = lists.iter().map(|l| &l[0]).collect();
    loop {
        f(&picked);
        let mut i = lists.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            counters[i] += 1;
            if counters[i] < lists[i].len() {
                picked[i] = &lists[i][counters[i]];
                break;
            }
            counters[i] = 0;
            picked[i] = &lists[i][0];
        }
    }
}

/// Tuples of the product relation, as product indices, for relation `rel`.
pub(crate) fn product_relation(factors: &[Structure], index: &ProductIndex, rel: usize, arity: usize) -> Relation {
    let lists: Vec<Vec<&Vec<usize>>> = factors.iter().map(|f| f.relation(rel).iter().collect()).collect();
    let mut out = Relation::new();
    let mut comps = vec![0usize; factors.len()];
    for_each_combination(&lists, |picked| {
        let tuple = (0..arity)
            .map(|j| {
                for (c, t) in comps.iter_mut().zip(picked) {
                    *c = t[j];
                }
                index.encode(&comps)
            })
            .collect();
        out.insert(tuple);
    });
    out
}

/// Direct product of `factors`. Elements are composite identifiers listed in
/// lexicographic order of their component indices (see [`ProductIndex`]).
pub fn product(factors: &[Structure], guard: u64) -> Result<Structure> {
    let signature = shared_signature(factors, "product")?.clone();
    check_guard(product_cardinality(factors.iter().map(Structure::len)), guard)?;
    let index = ProductIndex::of(factors);
    let domain: Vec<String> = (0..index.size())
        .map(|x| {
            let comps: Vec<&str> = index
                .decode(x)
                .iter()
                .zip(factors)
                .map(|(&c, f)| f.element(c))
                .collect();
            compose_id(&comps)
        })
        .collect();
    let relations = signature
        .relations()
        .iter()
        .enumerate()
        .map(|(i, sym)| product_relation(factors, &index, i, sym.arity))
        .collect();
    Structure::from_parts(signature, domain, relations)
}

/// The projection of `product(factors)` onto factor `i`.
pub fn projection(factors: &[Structure], i: usize) -> Homomorphism {
    let index = ProductIndex::of(factors);
    Homomorphism::new((0..index.size()).map(|x| index.component(x, i)).collect())
}

/// Identifier of element `id` of part `part` (0-based) in a disjoint union.
pub fn union_id(part: usize, id: &str) -> String {
    format!("{part}:{id}")
}

/// Disjoint union. Part `i`'s elements are tagged `i:` and listed in part order.
pub fn disjoint_union(parts: &[Structure]) -> Result<Structure> {
    let signature = shared_signature(parts, "disjoint union")?.clone();
    let mut domain = Vec::with_capacity(parts.iter().map(Structure::len).sum());
    let mut relations = vec![Relation::new(); signature.len()];
    for (p, s) in parts.iter().enumerate() {
        let offset = domain.len();
        domain.extend(s.domain().iter().map(|e| union_id(p, e)));
        for (rel, out) in s.relations().iter().zip(relations.iter_mut()) {
            out.extend(rel.iter().map(|t| t.iter().map(|&x| x + offset).collect::<Vec<_>>()));
        }
    }
    Structure::from_parts(signature, domain, relations)
}

/// Replaces every unary relation `P` by the binary relation `{(a,a) : a in P}`
/// under the same name.
pub fn binarize_unary(s: &Structure) -> Structure {
    let signature = Signature::new(
        s.signature()
            .relations()
            .iter()
            .map(|r| (r.name.clone(), if r.arity == 1 { 2 } else { r.arity })),
    )
    .expect("renaming arities keeps names distinct");
    let relations = s
        .relations()
        .iter()
        .zip(s.signature().relations())
        .map(|(rel, sym)| {
            if sym.arity == 1 {
                rel.iter().map(|t| vec![t[0], t[0]]).collect()
            } else {
                rel.clone()
            }
        })
        .collect();
    Structure::from_parts(signature, s.domain().to_vec(), relations).expect("same domain, same tuples")
}

/// Picks an identifier starting with `base` that is not already in `domain`.
pub(crate) fn fresh_id(base: &str, taken: impl Fn(&str) -> bool) -> String {
    let mut name = base.to_owned();
    while taken(&name) {
        name.push('\'');
    }
    name
}
