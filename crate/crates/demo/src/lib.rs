//! WebAssembly bindings for the static page in `www/`.
//!
//! Every export takes and returns JSON text so the page stays framework-free
//! and the same functions can be tested natively.

use homforge::format::parse_structure;
use homforge::normalform::{gadget_digraph, pad_first_coordinate, GadgetNode};
use homforge::tiling::{encode_tiling_php, tiling_from_product_map, EncodingMode, TileSystem, TilingInstance};
use homforge::{decide_php, PhpInstance, ProductIndex, SolverConfig, Structure};
use homforge::structure::compose_id;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

// Keeps the page responsive; the CLI is the tool for bigger inputs.
const DEMO_GUARD: u64 = 20_000;

fn config() -> SolverConfig {
    SolverConfig { product_guard: DEMO_GUARD, ..SolverConfig::default() }
}

fn text<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Solves a tiling instance through its product encoding.
///
/// `prefix` is a JSON array of tile names; `mode` is `exact` or
/// `paper-literal`. Returns `{"answer", "side", "rows"?, "valid"?,
/// "product_size"}`; rows are listed bottom row first.
#[wasm_bindgen]
pub fn solve_tiling(system: &str, prefix: &str, mode: &str) -> Result<String, String> {
    let sys = TileSystem::parse(system).map_err(text)?;
    let prefix: Vec<String> = serde_json::from_str(prefix).map_err(text)?;
    let inst = TilingInstance::new(sys, &prefix).map_err(text)?;
    let mode: EncodingMode = mode.parse().map_err(text)?;
    let php = encode_tiling_php(&inst, mode);
    let answer = decide_php(&php, &config()).map_err(text)?;
    let mut out = json!({
        "answer": if answer.is_yes() { "YES" } else { "NO" },
        "side": inst.side(),
        "product_size": php.product_cardinality() as u64,
    });
    if let Some(h) = answer.witness() {
        let t = tiling_from_product_map(h, &inst);
        out["rows"] = json!(t.rows(inst.system()));
        out["valid"] = json!(t.is_valid(&inst));
    }
    Ok(out.to_string())
}

/// Decides `ΠA_i → B`. `factors` is a JSON array of structure documents.
/// Returns `{"answer", "product_size", "witness"?}` with the witness keyed
/// by product element.
#[wasm_bindgen]
pub fn check_hom(factors: &str, target: &str) -> Result<String, String> {
    let docs: Vec<Value> = serde_json::from_str(factors).map_err(text)?;
    let factors = docs
        .into_iter()
        .map(|v| parse_structure(&v.to_string()))
        .collect::<Result<Vec<Structure>, _>>()
        .map_err(text)?;
    let inst = PhpInstance::new(factors, parse_structure(target).map_err(text)?).map_err(text)?;
    let answer = decide_php(&inst, &config()).map_err(text)?;
    let mut out = json!({
        "answer": if answer.is_yes() { "YES" } else { "NO" },
        "product_size": inst.product_cardinality() as u64,
    });
    if let Some(h) = answer.witness() {
        let index = ProductIndex::of(inst.factors());
        let witness: serde_json::Map<String, Value> = h
            .mapping()
            .iter()
            .enumerate()
            .map(|(x, &y)| {
                let comps: Vec<&str> =
                    index.decode(x).iter().zip(inst.factors()).map(|(&c, f)| f.element(c)).collect();
                (compose_id(&comps), json!(inst.target().element(y)))
            })
            .collect();
        out["witness"] = Value::Object(witness);
    }
    Ok(out.to_string())
}

/// Gadget digraph of a single-relation structure, padded first.
///
/// Returns `{"nodes": [{"id", "kind", "layer"}], "edges": [[from, to]],
/// "arity"}` where `layer` is the length of the longest path ending at the
/// node, which is what the page uses for the horizontal position.
#[wasm_bindgen]
pub fn gadget(structure: &str, with_sinks: bool) -> Result<String, String> {
    let s = parse_structure(structure).map_err(text)?;
    let g = gadget_digraph(&pad_first_coordinate(&s).map_err(text)?, with_sinks).map_err(text)?;
    let d = &g.structure;
    let edges: Vec<&Vec<usize>> = d.relation(0).iter().collect();
    let mut layer = vec![0usize; d.len()];
    // The gadget is acyclic, so |V| relaxation rounds suffice.
    for _ in 0..d.len() {
        let mut changed = false;
        for e in &edges {
            if layer[e[1]] < layer[e[0]] + 1 {
                layer[e[1]] = layer[e[0]] + 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let nodes: Vec<Value> = g
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let kind = match n {
                GadgetNode::Base(_) => "base",
                GadgetNode::TupleNode { .. } => "tuple",
                GadgetNode::Sink(_) => "sink",
            };
            json!({ "id": d.element(i), "kind": kind, "layer": layer[i] })
        })
        .collect();
    Ok(json!({ "nodes": nodes, "edges": edges, "arity": g.arity() }).to_string())
}
