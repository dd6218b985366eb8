//! Browser bindings: encode an instance to code, decode code into a laid-out
//! graph, and compare two graphs.

use graphcode::codec::{decode, encode, CodeFormat, SourceText};
use graphcode::dataset::parse_dataset;
use graphcode::graph::{topological_order, LabeledGraph, Structure, TaskKind};
use graphcode::metrics::{
    comparable_edges, edge_prf, graph_edit_distance, is_isomorphic, ISO_NODE_LIMIT,
};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn format_of(name: &str) -> Result<CodeFormat, String> {
    name.parse().map_err(|e: String| e)
}

/// Encodes one dataset line (JSON) in `format`.
pub fn encode_instance(instance_json: &str, task: &str, format: &str) -> Result<String, String> {
    let task: TaskKind = task.parse()?;
    let format = format_of(format)?;
    let instance = parse_dataset(instance_json.trim(), task)
        .map_err(|e| e.to_string())?
        .pop()
        .ok_or("no instance given")?;
    encode(&instance, format)
        .map(|s| s.text)
        .map_err(|e| e.to_string())
}

fn decode_graph(code: &str, format: CodeFormat) -> Result<(LabeledGraph, Vec<String>), String> {
    let decoded = decode(&SourceText::new(code, format)).map_err(|e| e.to_string())?;
    let warnings = decoded
        .warnings
        .iter()
        .map(|w| format!("line {}: {}", w.line, w.message))
        .collect();
    match decoded.structure {
        Structure::Graph(g) => Ok((g, warnings)),
        Structure::Trace(_) => Err("this format describes entity states, not a graph".into()),
    }
}

/// Longest-path layer of every node; cyclic graphs put everything on layer 0.
fn layers(g: &LabeledGraph) -> Vec<usize> {
    let mut layer = vec![0usize; g.nodes.len()];
    if let Ok(order) = topological_order(g) {
        for id in order {
            let Some(i) = g.node_index(&id) else { continue };
            for e in g.edges.iter().filter(|e| e.src == id) {
                if let Some(j) = g.node_index(&e.dst) {
                    layer[j] = layer[j].max(layer[i] + 1);
                }
            }
        }
    }
    layer
}

/// Decodes code into `{nodes: [{id, label, layer}], edges: [{src, dst, relation}], warnings}`.
pub fn decode_to_json(code: &str, format: &str) -> Result<Value, String> {
    let (g, warnings) = decode_graph(code, format_of(format)?)?;
    let layer = layers(&g);
    let nodes: Vec<Value> = g
        .nodes
        .iter()
        .zip(&layer)
        .map(|(n, l)| json!({"id": n.id, "label": n.label, "layer": l}))
        .collect();
    let edges: Vec<Value> = g
        .edges
        .iter()
        .map(|e| json!({"src": e.src, "dst": e.dst, "relation": e.relation}))
        .collect();
    Ok(json!({"nodes": nodes, "edges": edges, "warnings": warnings}))
}

/// Edge P/R/F1, GED and isomorphism of a predicted graph against a gold one,
/// both given as code in `format`.
pub fn compare_to_json(gold: &str, pred: &str, format: &str) -> Result<Value, String> {
    let format = format_of(format)?;
    let (g, _) = decode_graph(gold, format)?;
    let (p, _) = decode_graph(pred, format)?;
    let (ge, pe) = comparable_edges(&g, &p);
    let prf = edge_prf(&ge, &pe);
    let ged = graph_edit_distance(&p, &g).map_err(|e| e.to_string())?;
    let iso = if g.nodes.len().max(p.nodes.len()) <= ISO_NODE_LIMIT {
        Some(is_isomorphic(&p, &g).map_err(|e| e.to_string())?)
    } else {
        None
    };
    Ok(json!({
        "p": prf.p, "r": prf.r, "f1": prf.f1,
        "ged": ged.raw, "ged_norm": ged.normalized, "ged_exact": ged.exact,
        "iso": iso,
    }))
}

#[wasm_bindgen]
pub fn encode_json(instance_json: &str, task: &str, format: &str) -> Result<String, JsError> {
    encode_instance(instance_json, task, format).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn decode_code(code: &str, format: &str) -> Result<String, JsError> {
    decode_to_json(code, format)
        .map(|v| v.to_string())
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn compare_code(gold: &str, pred: &str, format: &str) -> Result<String, JsError> {
    compare_to_json(gold, pred, format)
        .map(|v| v.to_string())
        .map_err(|e| JsError::new(&e))
}
