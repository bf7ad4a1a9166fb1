//! Random instance generators and brute-force oracles shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use homforge::{product, PhpInstance, Signature, Structure, DEFAULT_PRODUCT_GUARD};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_signature(rng: &mut StdRng, max_relations: usize, max_arity: usize) -> Signature {
    let count = rng.gen_range(1..=max_relations);
    Signature::new((0..count).map(|i| (format!("R{i}"), rng.gen_range(1..=max_arity)))).unwrap()
}

/// Each possible tuple is present with probability `density`.
pub fn random_structure(rng: &mut StdRng, sig: &Signature, size: usize, density: f64) -> Structure {
    let domain: Vec<String> = (0..size).map(|i| format!("e{i}")).collect();
    let relations = sig
        .relations()
        .iter()
        .map(|r| all_tuples(size, r.arity).into_iter().filter(|_| rng.gen_bool(density)).collect())
        .collect();
    Structure::from_parts(sig.clone(), domain, relations).unwrap()
}

/// Like [`random_structure`] but every relation gets at least one tuple
/// (needs a nonempty domain).
pub fn random_nonempty_structure(rng: &mut StdRng, sig: &Signature, size: usize, density: f64) -> Structure {
    let s = random_structure(rng, sig, size, density);
    let relations = s
        .relations()
        .iter()
        .zip(sig.relations())
        .map(|(rel, sym)| {
            let mut rel = rel.clone();
            if rel.is_empty() {
                rel.insert((0..sym.arity).map(|_| rng.gen_range(0..size)).collect());
            }
            rel
        })
        .collect();
    Structure::from_parts(sig.clone(), s.domain().to_vec(), relations).unwrap()
}

pub fn all_tuples(n: usize, arity: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|t| (0..n).map(move |x| {
                let mut t = t.clone();
                t.push(x);
                t
            }))
            .collect();
    }
    out
}

pub fn preserves(map: &[usize], src: &Structure, tgt: &Structure) -> bool {
    src.relations().iter().zip(tgt.relations()).all(|(rs, rt)| {
        rs.iter().all(|t| rt.contains(&t.iter().map(|&x| map[x]).collect::<Vec<_>>()))
    })
}

/// Every map `src → tgt` that preserves all relations, in lexicographic order.
pub fn brute_force_homs(src: &Structure, tgt: &Structure) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if src.is_empty() {
        out.push(vec![]);
        return out;
    }
    if tgt.is_empty() {
        return out;
    }
    let mut map = vec![0usize; src.len()];
    loop {
        if preserves(&map, src, tgt) {
            out.push(map.clone());
        }
        let mut i = map.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            map[i] += 1;
            if map[i] < tgt.len() {
                break;
            }
            map[i] = 0;
        }
    }
}

pub fn brute_force_exists(src: &Structure, tgt: &Structure) -> bool {
    !brute_force_homs(src, tgt).is_empty()
}

pub fn brute_force_php(inst: &PhpInstance) -> bool {
    let p = product(inst.factors(), DEFAULT_PRODUCT_GUARD).unwrap();
    brute_force_exists(&p, inst.target())
}

/// A PHP instance with `factors` factors, factor domains in `1..=max_factor`
/// and target domain in `1..=max_target`.
pub fn random_php(
    rng: &mut StdRng,
    sig: &Signature,
    factors: usize,
    max_factor: usize,
    max_target: usize,
    density: f64,
    nonempty: bool,
) -> PhpInstance {
    let make = |rng: &mut StdRng, n: usize| {
        if nonempty {
            random_nonempty_structure(rng, sig, n, density)
        } else {
            random_structure(rng, sig, n, density)
        }
    };
    let fs = (0..factors)
        .map(|_| {
            let n = rng.gen_range(1..=max_factor);
            make(rng, n)
        })
        .collect();
    let n = rng.gen_range(1..=max_target);
    let target = make(rng, n);
    PhpInstance::new(fs, target).unwrap()
}

pub fn tuples_of(names: &[&[&str]]) -> BTreeSet<Vec<String>> {
    names.iter().map(|t| t.iter().map(|s| s.to_string()).collect()).collect()
}
