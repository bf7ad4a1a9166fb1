//! Exponential tiling instances and their encoding as product homomorphism
//! instances over two-element factors.
//!
//! The product of the `2m` factors has the bitstrings of length `2m` as
//! elements; the first `m` bits are the column `x` and the last `m` bits the
//! row `y`, most significant bit first. A homomorphism to the tile structure
//! is then a tile assignment on the `2^m × 2^m` grid.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::structure::{product, Homomorphism, PhpInstance, Relation, Signature, Structure};

/// Largest grid exponent the brute-force oracle accepts (8 × 8 cells).
pub const ORACLE_MAX_M: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TileSystem {
    tiles: Vec<String>,
    hcompat: BTreeSet<(usize, usize)>,
    vcompat: BTreeSet<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TileSystemFile {
    tiles: Vec<String>,
    hcompat: Vec<(String, String)>,
    vcompat: Vec<(String, String)>,
}

impl TileSystem {
    pub fn new<S: AsRef<str>>(tiles: &[S], hcompat: &[(S, S)], vcompat: &[(S, S)]) -> Result<Self> {
        let tiles: Vec<String> = tiles.iter().map(|t| t.as_ref().to_owned()).collect();
        let mut seen = BTreeSet::new();
        if let Some(t) = tiles.iter().find(|t| !seen.insert(t.as_str())) {
            return Err(Error::Precondition(format!("duplicate tile `{t}`")));
        }
        let lookup = |t: &str| {
            tiles
                .iter()
                .position(|x| x == t)
                .ok_or_else(|| Error::Precondition(format!("compatibility pair names undeclared tile `{t}`")))
        };
        let pairs = |list: &[(S, S)]| -> Result<BTreeSet<(usize, usize)>> {
            list.iter().map(|(a, b)| Ok((lookup(a.as_ref())?, lookup(b.as_ref())?))).collect()
        };
        let hcompat = pairs(hcompat)?;
        let vcompat = pairs(vcompat)?;
        Ok(TileSystem { tiles, hcompat, vcompat })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let f: TileSystemFile = serde_json::from_str(text)?;
        TileSystem::new(&f.tiles, &f.hcompat, &f.vcompat).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let name = |&(a, b): &(usize, usize)| (self.tiles[a].clone(), self.tiles[b].clone());
        serde_json::to_string(&TileSystemFile {
            tiles: self.tiles.clone(),
            hcompat: self.hcompat.iter().map(name).collect(),
            vcompat: self.vcompat.iter().map(name).collect(),
        })
        .expect("tile systems always serialize")
    }

    pub fn tiles(&self) -> &[String] {
        &self.tiles
    }

    pub fn tile_index(&self, name: &str) -> Option<usize> {
        self.tiles.iter().position(|t| t == name)
    }

    pub fn h_ok(&self, left: usize, right: usize) -> bool {
        self.hcompat.contains(&(left, right))
    }

    pub fn v_ok(&self, below: usize, above: usize) -> bool {
        self.vcompat.contains(&(below, above))
    }
}

/// A tile system with a first-row prefix; `m` is the prefix length and the
/// grid is `2^m × 2^m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TilingInstance {
    system: TileSystem,
    prefix: Vec<usize>,
}

impl TilingInstance {
    pub fn new<S: AsRef<str>>(system: TileSystem, prefix: &[S]) -> Result<Self> {
        if prefix.is_empty() {
            return Err(Error::Precondition("the prefix must name at least one tile".into()));
        }
        if prefix.len() >= usize::BITS as usize / 2 {
            return Err(Error::Precondition(format!("grid exponent {} is too large", prefix.len())));
        }
        let prefix = prefix
            .iter()
            .map(|t| {
                system
                    .tile_index(t.as_ref())
                    .ok_or_else(|| Error::Precondition(format!("prefix names undeclared tile `{}`", t.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TilingInstance { system, prefix })
    }

    pub fn system(&self) -> &TileSystem {
        &self.system
    }

    pub fn prefix(&self) -> &[usize] {
        &self.prefix
    }

    pub fn m(&self) -> usize {
        self.prefix.len()
    }

    /// Side length `2^m`.
    pub fn side(&self) -> usize {
        1 << self.m()
    }
}

/// A tile per grid cell, stored row by row (`y` major).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TilingAssignment {
    side: usize,
    cells: Vec<usize>,
}

impl TilingAssignment {
    pub fn new(side: usize, cells: Vec<usize>) -> Result<Self> {
        if cells.len() != side * side {
            return Err(Error::Precondition(format!("{} cells for a {side}x{side} grid", cells.len())));
        }
        Ok(TilingAssignment { side, cells })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn get(&self, x: usize, y: usize) -> usize {
        self.cells[y * self.side + x]
    }

    /// Rows of tile names, row `y = 0` first.
    pub fn rows<'a>(&'a self, system: &'a TileSystem) -> Vec<Vec<&'a str>> {
        (0..self.side)
            .map(|y| (0..self.side).map(|x| system.tiles()[self.get(x, y)].as_str()).collect())
            .collect()
    }

    /// Every violated constraint; empty iff the tiling is valid for `inst`.
    pub fn violations(&self, inst: &TilingInstance) -> Vec<String> {
        let mut out = Vec::new();
        if self.side != inst.side() {
            out.push(format!("grid side {} but the instance needs {}", self.side, inst.side()));
            return out;
        }
        let sys = inst.system();
        let name = |t: usize| sys.tiles()[t].as_str();
        for (k, &t) in inst.prefix().iter().enumerate() {
            if self.get(k, 0) != t {
                out.push(format!("cell ({k},0) holds {} but the prefix requires {}", name(self.get(k, 0)), name(t)));
            }
        }
        for y in 0..self.side {
            for x in 0..self.side {
                let here = self.get(x, y);
                if x + 1 < self.side && !sys.h_ok(here, self.get(x + 1, y)) {
                    out.push(format!("({x},{y})-({},{y}): {} {} not horizontally compatible", x + 1, name(here), name(self.get(x + 1, y))));
                }
                if y + 1 < self.side && !sys.v_ok(here, self.get(x, y + 1)) {
                    out.push(format!("({x},{y})-({x},{}): {} {} not vertically compatible", y + 1, name(here), name(self.get(x, y + 1))));
                }
            }
        }
        out
    }

    pub fn is_valid(&self, inst: &TilingInstance) -> bool {
        self.violations(inst).is_empty()
    }
}

/// Binary relations on `{0,1}` used as per-bit factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BitRelation {
    Id,
    Diff,
    /// `{(0,1)}`
    S01,
    /// `{(1,0)}`
    S10,
}

impl BitRelation {
    pub fn pairs(self) -> &'static [(usize, usize)] {
        match self {
            BitRelation::Id => &[(0, 0), (1, 1)],
            BitRelation::Diff => &[(0, 1), (1, 0)],
            BitRelation::S01 => &[(0, 1)],
            BitRelation::S10 => &[(1, 0)],
        }
    }

    pub fn relation(self) -> Relation {
        self.pairs().iter().map(|&(a, b)| vec![a, b]).collect()
    }
}

impl fmt::Display for BitRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BitRelation::Id => "id",
            BitRelation::Diff => "diff",
            BitRelation::S01 => "s01",
            BitRelation::S10 => "s10",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum EncodingMode {
    /// `H_k` realized with `s01` at bit `k` and `s10` below it; the union of
    /// the `H_k` is exactly the horizontal successor relation.
    #[default]
    Exact,
    /// `diff` on every bit from `k` down, as in the original construction.
    /// The realized relations then also contain non-successor pairs.
    PaperLiteral,
}

impl std::str::FromStr for EncodingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(EncodingMode::Exact),
            "paper-literal" => Ok(EncodingMode::PaperLiteral),
            other => Err(Error::Parse(format!("unknown encoding mode `{other}` (expected exact or paper-literal)"))),
        }
    }
}

/// Binary encoding of `k` in `m` bits, most significant first.
pub fn bits(k: usize, m: usize) -> Result<Vec<u8>> {
    if m == 0 || m >= usize::BITS as usize || k >= 1usize << m {
        return Err(Error::Precondition(format!("{k} does not fit in {m} bits")));
    }
    Ok((0..m).map(|i| ((k >> (m - 1 - i)) & 1) as u8).collect())
}

pub fn h_name(k: usize) -> String {
    format!("H{k}")
}

pub fn v_name(k: usize) -> String {
    format!("V{k}")
}

pub fn p_name(k: usize) -> String {
    format!("P{k}")
}

pub fn tiling_signature(m: usize) -> Signature {
    let rels = (1..=m).flat_map(|k| [(h_name(k), 2), (v_name(k), 2), (p_name(k), 1)]);
    Signature::new(rels).expect("distinct generated names")
}

/// Per-bit relation of `H_k` (`vertical = false`) or `V_k` in factor `l`
/// (both 1-based).
pub fn successor_bit_relation(mode: EncodingMode, m: usize, k: usize, l: usize, vertical: bool) -> BitRelation {
    let lo = if vertical { m + k } else { k };
    let hi = if vertical { 2 * m } else { m };
    match mode {
        EncodingMode::Exact if l == lo => BitRelation::S01,
        EncodingMode::Exact if l > lo && l <= hi => BitRelation::S10,
        EncodingMode::PaperLiteral if l >= lo && l <= hi => BitRelation::Diff,
        _ => BitRelation::Id,
    }
}

/// Builds the `2m` two-element factors and the tile target.
///
/// `P_k` marks grid position `(k-1, 0)` and is interpreted in the target as
/// the singleton `{t_k}`. Unary relations are kept unary; apply
/// [`crate::binarize_unary`] for an all-binary instance.
pub fn encode_tiling_php(inst: &TilingInstance, mode: EncodingMode) -> PhpInstance {
    let m = inst.m();
    let sig = tiling_signature(m);
    let pos = |name: String| sig.position(&name).expect("generated name");
    let factors = (1..=2 * m)
        .map(|l| {
            let mut rels = vec![Relation::new(); sig.len()];
            for k in 1..=m {
                rels[pos(h_name(k))] = successor_bit_relation(mode, m, k, l, false).relation();
                rels[pos(v_name(k))] = successor_bit_relation(mode, m, k, l, true).relation();
                let bit = if l <= m { bits(k - 1, m).expect("k - 1 < m <= 2^m")[l - 1] as usize } else { 0 };
                rels[pos(p_name(k))] = Relation::from([vec![bit]]);
            }
            Structure::from_parts(sig.clone(), vec!["0".into(), "1".into()], rels).expect("well-formed factor")
        })
        .collect();

    let sys = inst.system();
    let mut rels = vec![Relation::new(); sig.len()];
    let h: Relation = sys.hcompat.iter().map(|&(a, b)| vec![a, b]).collect();
    let v: Relation = sys.vcompat.iter().map(|&(a, b)| vec![a, b]).collect();
    for k in 1..=m {
        rels[pos(h_name(k))] = h.clone();
        rels[pos(v_name(k))] = v.clone();
        rels[pos(p_name(k))] = Relation::from([vec![inst.prefix()[k - 1]]]);
    }
    let target = Structure::from_parts(sig, sys.tiles().to_vec(), rels).expect("well-formed target");
    PhpInstance::new(factors, target).expect("shared signature")
}

/// Reads the tiling off a homomorphism from the product of the encoded
/// factors: cell `(x, y)` gets the image of the bitstring `bits(x) ++ bits(y)`.
pub fn decode_hom_to_tiling(
    h: &Homomorphism,
    inst: &TilingInstance,
    mode: EncodingMode,
    guard: u64,
) -> Result<TilingAssignment> {
    let php = encode_tiling_php(inst, mode);
    let p = product(php.factors(), guard)?;
    h.validate(&p, php.target())?;
    Ok(tiling_from_product_map(h, inst))
}

/// Same read-out as [`decode_hom_to_tiling`] without validating `h`.
pub fn tiling_from_product_map(h: &Homomorphism, inst: &TilingInstance) -> TilingAssignment {
    let side = inst.side();
    // Factor domains are ["0", "1"], so the product index of bits(x) ++ bits(y) is x * side + y.
    let cells = (0..side * side)
        .map(|c| {
            let (x, y) = (c % side, c / side);
            h.image(x * side + y)
        })
        .collect();
    TilingAssignment { side, cells }
}

/// Backtracking over cells in row-major order. Only for `m <= 3`.
pub fn brute_force_tiling(inst: &TilingInstance) -> Result<Option<TilingAssignment>> {
    if inst.m() > ORACLE_MAX_M {
        return Err(Error::Precondition(format!(
            "brute-force tiling supports m <= {ORACLE_MAX_M}, got {}",
            inst.m()
        )));
    }
    let side = inst.side();
    let mut cells = vec![usize::MAX; side * side];
    fn go(c: usize, side: usize, inst: &TilingInstance, cells: &mut Vec<usize>) -> bool {
        if c == cells.len() {
            return true;
        }
        let (x, y) = (c % side, c / side);
        let sys = inst.system();
        let candidates: Vec<usize> = if y == 0 && x < inst.m() {
            vec![inst.prefix()[x]]
        } else {
            (0..sys.tiles().len()).collect()
        };
        for t in candidates {
            if x > 0 && !sys.h_ok(cells[c - 1], t) {
                continue;
            }
            if y > 0 && !sys.v_ok(cells[c - side], t) {
                continue;
            }
            cells[c] = t;
            if go(c + 1, side, inst, cells) {
                return true;
            }
        }
        false
    }
    Ok(go(0, side, inst, &mut cells).then_some(TilingAssignment { side, cells }))
}

/// Named view of a tiling, for JSON output.
pub fn tiling_to_json(t: &TilingAssignment, sys: &TileSystem) -> serde_json::Value {
    serde_json::json!({ "side": t.side(), "rows": t.rows(sys) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{decide_php, SolverConfig};
    use crate::structure::DEFAULT_PRODUCT_GUARD;

    fn single(self_compat: bool) -> TileSystem {
        let pairs: &[(&str, &str)] = if self_compat { &[("t", "t")] } else { &[] };
        TileSystem::new(&["t"], pairs, &[("t", "t")]).unwrap()
    }

    fn checkerboard() -> TileSystem {
        let alt = [("w", "b"), ("b", "w")];
        TileSystem::new(&["w", "b"], &alt, &alt).unwrap()
    }

    #[test]
    fn bit_encodings() {
        assert_eq!(bits(0, 2).unwrap(), [0, 0]);
        assert_eq!(bits(2, 2).unwrap(), [1, 0]);
        assert!(bits(4, 2).is_err());
        for m in 1..=4 {
            for k in 0..1usize << m {
                let b = bits(k, m).unwrap();
                let back: usize = b.iter().enumerate().map(|(i, &bit)| (bit as usize) << (m - 1 - i)).sum();
                assert_eq!(back, k);
            }
        }
    }

    #[test]
    fn tile_system_validation() {
        assert!(TileSystem::new(&["a", "a"], &[], &[]).is_err());
        assert!(TileSystem::new(&["a"], &[("a", "z")], &[]).is_err());
        assert!(TilingInstance::new(single(true), &["z"]).is_err());
        assert!(TilingInstance::new(single(true), &[] as &[&str]).is_err());
        let sys = TileSystem::parse(r#"{"tiles": ["t","u"], "hcompat": [["t","u"]], "vcompat": [["t","t"]]}"#).unwrap();
        assert!(sys.h_ok(0, 1) && !sys.h_ok(1, 0) && sys.v_ok(0, 0));
        assert_eq!(TileSystem::parse(&sys.to_json()).unwrap(), sys);
    }

    #[test]
    fn oracle_examples() {
        let constant = TilingInstance::new(single(true), &["t", "t"]).unwrap();
        let t = brute_force_tiling(&constant).unwrap().unwrap();
        assert!(t.is_valid(&constant));

        let broken = TilingInstance::new(single(false), &["t"]).unwrap();
        assert!(brute_force_tiling(&broken).unwrap().is_none());

        let inst = TilingInstance::new(checkerboard(), &["w"]).unwrap();
        let t = brute_force_tiling(&inst).unwrap().unwrap();
        assert_eq!(t.rows(inst.system()), vec![vec!["w", "b"], vec!["b", "w"]]);

        let big = TilingInstance::new(single(true), &["t"; 4]).unwrap();
        assert!(brute_force_tiling(&big).is_err());
    }

    #[test]
    fn exact_mode_m1_relations() {
        let inst = TilingInstance::new(single(true), &["t"]).unwrap();
        let php = encode_tiling_php(&inst, EncodingMode::Exact);
        let (a1, a2) = (&php.factors()[0], &php.factors()[1]);
        let rel = |s: &Structure, name: &str| s.relation_by_name(name).unwrap().clone();
        assert_eq!(rel(a1, "H1"), BitRelation::S01.relation());
        assert_eq!(rel(a2, "H1"), BitRelation::Id.relation());
        assert_eq!(rel(a1, "V1"), BitRelation::Id.relation());
        assert_eq!(rel(a2, "V1"), BitRelation::S01.relation());
        assert_eq!(rel(a1, "P1"), Relation::from([vec![0]]));
        assert_eq!(rel(a2, "P1"), Relation::from([vec![0]]));
    }

    #[test]
    fn paper_literal_m2_relations() {
        let inst = TilingInstance::new(single(true), &["t", "t"]).unwrap();
        let php = encode_tiling_php(&inst, EncodingMode::PaperLiteral);
        let h1: Vec<Relation> = php.factors().iter().map(|f| f.relation_by_name("H1").unwrap().clone()).collect();
        let diff = BitRelation::Diff.relation();
        let id = BitRelation::Id.relation();
        assert_eq!(h1, vec![diff.clone(), diff, id.clone(), id]);
    }

    #[test]
    fn counts_and_singletons() {
        for m in 1..=4 {
            let inst = TilingInstance::new(single(true), &vec!["t"; m]).unwrap();
            for mode in [EncodingMode::Exact, EncodingMode::PaperLiteral] {
                let php = encode_tiling_php(&inst, mode);
                assert_eq!(php.factors().len(), 2 * m);
                assert_eq!(php.signature().len(), 3 * m);
                for f in php.factors() {
                    for k in 1..=m {
                        assert_eq!(f.relation_by_name(&p_name(k)).unwrap().len(), 1);
                    }
                }
            }
        }
    }

    #[test]
    fn decode_checkerboard() {
        let inst = TilingInstance::new(checkerboard(), &["w"]).unwrap();
        let php = encode_tiling_php(&inst, EncodingMode::Exact);
        let h = decide_php(&php, &SolverConfig::default()).unwrap().witness().cloned().unwrap();
        let t = decode_hom_to_tiling(&h, &inst, EncodingMode::Exact, DEFAULT_PRODUCT_GUARD).unwrap();
        assert!(t.is_valid(&inst));
        assert_eq!(t, brute_force_tiling(&inst).unwrap().unwrap());
        let bogus = Homomorphism::new(vec![0; 4]);
        assert!(decode_hom_to_tiling(&bogus, &inst, EncodingMode::Exact, DEFAULT_PRODUCT_GUARD).is_err());
    }

    #[test]
    fn decode_constant() {
        let inst = TilingInstance::new(single(true), &["t", "t"]).unwrap();
        let h = Homomorphism::new(vec![0; 16]);
        let t = decode_hom_to_tiling(&h, &inst, EncodingMode::Exact, DEFAULT_PRODUCT_GUARD).unwrap();
        assert!(t.rows(inst.system()).iter().flatten().all(|&c| c == "t"));
    }
}
