mod common;

use std::collections::BTreeMap;

use homforge::cq::{canonical_query, canonical_structure, evaluate};
use homforge::format::{parse_structure, serialize_structure};
use homforge::structure::{compose_id, decompose_id};
use homforge::{
    enumerate_homomorphisms, find_homomorphism, product, Homomorphism, PointedStructure, Signature, SolverConfig,
    Structure, DEFAULT_PRODUCT_GUARD,
};
use proptest::prelude::*;

fn sig() -> Signature {
    Signature::new([("E", 2), ("P", 1)]).unwrap()
}

fn structure(max: usize) -> impl Strategy<Value = Structure> {
    (0..=max).prop_flat_map(|n| {
        let pair = if n == 0 { Just(vec![]).boxed() } else { prop::collection::vec(0..n, 2).boxed() };
        let single = if n == 0 { Just(vec![]).boxed() } else { prop::collection::vec(0..n, 1).boxed() };
        let edges = prop::collection::btree_set(pair, 0..=if n == 0 { 0 } else { 6 });
        let marks = prop::collection::btree_set(single, 0..=n.min(2));
        (Just(n), edges, marks).prop_map(|(n, e, p)| {
            Structure::from_parts(sig(), (0..n).map(|i| format!("v{i}")).collect(), vec![e, p]).unwrap()
        })
    })
}

fn nonempty(max: usize) -> impl Strategy<Value = Structure> {
    structure(max).prop_filter("nonempty domain", |s| !s.is_empty())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn format_round_trip(s in structure(5)) {
        let text = serialize_structure(&s);
        let back = parse_structure(&text).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(serialize_structure(&back), text);
    }

    #[test]
    fn enumeration_matches_brute_force(a in structure(3), b in structure(3)) {
        let expected: Vec<Vec<usize>> = common::brute_force_homs(&a, &b);
        for cfg in SolverConfig::default().variants() {
            let got: Vec<Vec<usize>> =
                enumerate_homomorphisms(&a, &b, &cfg).unwrap().into_iter().map(Homomorphism::into_mapping).collect();
            prop_assert_eq!(&got, &expected);
        }
    }

    #[test]
    fn composition_is_a_homomorphism(a in structure(3), b in structure(3), c in structure(3)) {
        let cfg = SolverConfig::default();
        if let (Some(f), Some(g)) = (find_homomorphism(&a, &b, &cfg).unwrap(), find_homomorphism(&b, &c, &cfg).unwrap()) {
            prop_assert!(f.then(&g).is_valid(&a, &c));
        }
    }

    #[test]
    fn product_is_associative(a in structure(2), b in structure(2), c in structure(3)) {
        let flat = product(&[a.clone(), b.clone(), c.clone()], DEFAULT_PRODUCT_GUARD).unwrap();
        let ab = product(&[a, b], DEFAULT_PRODUCT_GUARD).unwrap();
        let nested = product(&[ab, c], DEFAULT_PRODUCT_GUARD).unwrap();
        prop_assert_eq!(flat.len(), nested.len());
        let mapping: Vec<usize> = nested
            .domain()
            .iter()
            .map(|id| {
                let outer = decompose_id(id).unwrap();
                let mut parts = decompose_id(&outer[0]).unwrap();
                parts.push(outer[1].clone());
                flat.index_of(&compose_id(&parts)).unwrap()
            })
            .collect();
        let h = Homomorphism::new(mapping.clone());
        prop_assert!(h.is_valid(&nested, &flat));
        let mut inverse = vec![0; mapping.len()];
        for (x, &y) in mapping.iter().enumerate() {
            inverse[y] = x;
        }
        prop_assert!(Homomorphism::new(inverse).is_valid(&flat, &nested));
    }

    #[test]
    fn queries_are_preserved_by_homomorphisms(a in nonempty(3), b in structure(3), picks in prop::collection::vec(0usize..8, 1..3)) {
        let cfg = SolverConfig::default();
        let distinguished: Vec<usize> = picks.iter().map(|&p| p % a.len()).collect();
        let pointed = PointedStructure::new(a.clone(), distinguished).unwrap();
        let Ok(q) = canonical_query(&pointed) else { return Ok(()) };
        if let Some(h) = find_homomorphism(&a, &b, &cfg).unwrap() {
            let in_b = evaluate(&q, &b, &cfg).unwrap();
            for t in evaluate(&q, &a, &cfg).unwrap() {
                let image: Vec<usize> = t.iter().map(|&x| h.image(x)).collect();
                prop_assert!(in_b.contains(&image));
            }
        }
    }

    #[test]
    fn canonical_round_trip(a in nonempty(3), target in structure(3), picks in prop::collection::vec(0usize..8, 1..3)) {
        let cfg = SolverConfig::default();
        let distinguished: Vec<usize> = picks.iter().map(|&p| p % a.len()).collect();
        let pointed = PointedStructure::new(a, distinguished).unwrap();
        let Ok(q) = canonical_query(&pointed) else { return Ok(()) };
        let again = canonical_query(&canonical_structure(&q, &sig()).unwrap()).unwrap();
        prop_assert_eq!(evaluate(&q, &target, &cfg).unwrap(), evaluate(&again, &target, &cfg).unwrap());
    }

    #[test]
    fn named_maps_round_trip(a in structure(3), b in structure(3)) {
        if let Some(h) = find_homomorphism(&a, &b, &SolverConfig::default()).unwrap() {
            let named: BTreeMap<String, String> = h.to_named(&a, &b);
            prop_assert_eq!(Homomorphism::from_named(&named, &a, &b).unwrap(), h);
        }
    }
}
