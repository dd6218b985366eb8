//! JSON-lines datasets, one instance per line.
//!
//! * scripts: `{"id", "goal", "nodes": [{"id", "label"}], "edges": [[src, dst]]}`
//! * explanation graphs: `{"id", "belief", "argument", "stance", "edges": [[src, relation, dst]]}`
//! * entity traces: `{"id", "actions", "entities", "states": [[cell]]}` with
//!   cells `"-"` (absent), `"?"` (unknown) or a location.
//!
//! The gold fields (`nodes`/`edges`, `edges`, `states`) may be omitted for
//! unlabeled inputs.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::graph::{
    normalize_label, resolve_collisions, sanitize_identifier, validate_graph, Edge, EntityTrace,
    LabeledGraph, StateValue, Structure, TaskInput, TaskInstance, TaskKind,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: field {field:?}: {message}")]
    SchemaError {
        line: usize,
        field: String,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn schema(line: usize, field: &str, message: impl Into<String>) -> DatasetError {
    DatasetError::SchemaError {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

pub fn load_dataset(path: &Path, task: TaskKind) -> Result<Vec<TaskInstance>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text, task)
}

pub fn parse_dataset(text: &str, task: TaskKind) -> Result<Vec<TaskInstance>, DatasetError> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(raw)
            .map_err(|e| schema(line, "", format!("invalid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| schema(line, "", "expected a JSON object"))?;
        let instance = parse_instance(obj, task, line)?;
        if !ids.insert(instance.id.clone()) {
            return Err(schema(
                line,
                "id",
                format!("duplicate id {:?}", instance.id),
            ));
        }
        out.push(instance);
    }
    Ok(out)
}

struct Fields<'a> {
    obj: &'a Map<String, Value>,
    line: usize,
}

impl<'a> Fields<'a> {
    fn get(&self, field: &str) -> Option<&'a Value> {
        self.obj.get(field).filter(|v| !v.is_null())
    }

    fn string(&self, field: &str) -> Result<String, DatasetError> {
        match self.get(field) {
            Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.clone()),
            Some(Value::String(_)) => Err(schema(self.line, field, "must not be empty")),
            Some(_) => Err(schema(self.line, field, "expected a string")),
            None => Err(schema(self.line, field, "missing")),
        }
    }

    fn array(&self, field: &str) -> Result<Option<&'a Vec<Value>>, DatasetError> {
        match self.get(field) {
            None => Ok(None),
            Some(Value::Array(a)) => Ok(Some(a)),
            Some(_) => Err(schema(self.line, field, "expected an array")),
        }
    }

    fn strings(&self, field: &str) -> Result<Vec<String>, DatasetError> {
        let items = self
            .array(field)?
            .ok_or_else(|| schema(self.line, field, "missing"))?;
        items
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| schema(self.line, field, "expected strings"))
            })
            .collect()
    }

    /// Each item must be an array of exactly `arity` strings.
    fn tuples(&self, field: &str, arity: usize) -> Result<Option<Vec<Vec<String>>>, DatasetError> {
        let Some(items) = self.array(field)? else {
            return Ok(None);
        };
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            let parts: Option<Vec<String>> = item
                .as_array()
                .filter(|a| a.len() == arity)
                .and_then(|a| a.iter().map(|v| v.as_str().map(str::to_string)).collect());
            out.push(parts.ok_or_else(|| {
                schema(
                    self.line,
                    field,
                    format!("expected arrays of {arity} strings"),
                )
            })?);
        }
        Ok(Some(out))
    }
}

fn parse_instance(
    obj: &Map<String, Value>,
    task: TaskKind,
    line: usize,
) -> Result<TaskInstance, DatasetError> {
    let f = Fields { obj, line };
    let id = f.string("id")?;
    let (input, gold) = match task {
        TaskKind::ScriptGen | TaskKind::EdgePrediction => {
            let goal = f.string("goal")?;
            let graph = script_graph(&f)?;
            let input = if task == TaskKind::EdgePrediction {
                let g = graph.as_ref().ok_or_else(|| {
                    schema(line, "nodes", "missing; edge prediction needs the node set")
                })?;
                TaskInput::EdgePrediction {
                    goal,
                    nodes: g.nodes.clone(),
                }
            } else {
                TaskInput::Script { goal }
            };
            (input, graph.map(Structure::Graph))
        }
        TaskKind::ExplGraph => {
            let belief = f.string("belief")?;
            let argument = f.string("argument")?;
            let stance = f.string("stance")?;
            if stance != "support" && stance != "counter" {
                return Err(schema(
                    line,
                    "stance",
                    format!("expected \"support\" or \"counter\", found {stance:?}"),
                ));
            }
            let graph = f.tuples("edges", 3)?.map(|edges| explanation_graph(&edges));
            (
                TaskInput::Explanation {
                    belief,
                    argument,
                    stance,
                },
                graph.map(Structure::Graph),
            )
        }
        TaskKind::EntityTracking => {
            let actions = f.strings("actions")?;
            let entities = f.strings("entities")?;
            if actions.is_empty() {
                return Err(schema(line, "actions", "must not be empty"));
            }
            if entities.is_empty() {
                return Err(schema(line, "entities", "must not be empty"));
            }
            let trace = match f.array("states")? {
                None => None,
                Some(rows) => Some(trace(&f, rows, &actions, &entities)?),
            };
            (
                TaskInput::Entities { actions, entities },
                trace.map(Structure::Trace),
            )
        }
    };
    TaskInstance::new(id, task, input, gold).map_err(|e| schema(line, "", e.to_string()))
}

fn script_graph(f: &Fields) -> Result<Option<LabeledGraph>, DatasetError> {
    let Some(nodes) = f.array("nodes")? else {
        if f.get("edges").is_some() {
            return Err(schema(f.line, "nodes", "missing while edges are present"));
        }
        return Ok(None);
    };
    let mut g = LabeledGraph::new();
    for n in nodes {
        let id = n.get("id").and_then(Value::as_str);
        let label = n.get("label").and_then(Value::as_str);
        match (id, label) {
            (Some(id), Some(label)) if !label.trim().is_empty() => g.add_node(id, label),
            _ => {
                return Err(schema(
                    f.line,
                    "nodes",
                    "each node needs string \"id\" and non-empty \"label\"",
                ))
            }
        }
    }
    for e in f.tuples("edges", 2)?.unwrap_or_default() {
        g.add_edge(Edge::new(e[0].clone(), e[1].clone()));
    }
    let violations = validate_graph(&g);
    if !violations.is_empty() {
        return Err(schema(
            f.line,
            "edges",
            format!("invalid graph: {violations:?}"),
        ));
    }
    Ok(Some(g))
}

/// Nodes come from edge endpoints, merged by normalized label; the first
/// spelling seen is kept.
fn explanation_graph(edges: &[Vec<String>]) -> LabeledGraph {
    let mut order: Vec<String> = Vec::new();
    let mut slot: HashMap<String, usize> = HashMap::new();
    let mut index_edges = Vec::new();
    for e in edges {
        let mut ends = [0usize; 2];
        for (k, label) in [&e[0], &e[2]].into_iter().enumerate() {
            let key = normalize_label(label);
            ends[k] = *slot.entry(key).or_insert_with(|| {
                order.push(label.clone());
                order.len() - 1
            });
        }
        index_edges.push((ends[0], e[1].clone(), ends[1]));
    }
    let ids = resolve_collisions(
        &order
            .iter()
            .map(|l| sanitize_identifier(l).unwrap_or_else(|_| "node".into()))
            .collect::<Vec<_>>(),
    );
    let mut g = LabeledGraph::new();
    for (id, label) in ids.iter().zip(&order) {
        g.add_node(id.clone(), label.clone());
    }
    for (s, r, d) in index_edges {
        g.add_edge(Edge::typed(ids[s].clone(), r, ids[d].clone()));
    }
    g
}

fn trace(
    f: &Fields,
    rows: &[Value],
    actions: &[String],
    entities: &[String],
) -> Result<EntityTrace, DatasetError> {
    let mut states = Vec::with_capacity(rows.len());
    for row in rows {
        let cells = row
            .as_array()
            .ok_or_else(|| schema(f.line, "states", "expected an array of rows"))?;
        let mut out = Vec::with_capacity(cells.len());
        for c in cells {
            let text = c
                .as_str()
                .ok_or_else(|| schema(f.line, "states", "cells must be strings"))?;
            out.push(
                StateValue::from_cell(text).map_err(|e| schema(f.line, "states", e.to_string()))?,
            );
        }
        states.push(out);
    }
    EntityTrace::new(actions.to_vec(), entities.to_vec(), states)
        .map_err(|e| schema(f.line, "states", e.to_string()))
}

/// The JSON object [`parse_dataset`] reads back into `instance`.
pub fn instance_to_json(instance: &TaskInstance) -> Value {
    let mut obj = Map::new();
    obj.insert("id".into(), json!(instance.id));
    match &instance.input {
        TaskInput::Script { goal } | TaskInput::EdgePrediction { goal, .. } => {
            obj.insert("goal".into(), json!(goal));
            let graph = instance
                .gold_graph()
                .cloned()
                .or_else(|| match &instance.input {
                    TaskInput::EdgePrediction { nodes, .. } => {
                        let mut g = LabeledGraph::new();
                        g.nodes = nodes.clone();
                        Some(g)
                    }
                    _ => None,
                });
            if let Some(g) = graph {
                let nodes: Vec<Value> = g
                    .nodes
                    .iter()
                    .map(|n| json!({"id": n.id, "label": n.label}))
                    .collect();
                obj.insert("nodes".into(), Value::Array(nodes));
                if instance.gold.is_some() {
                    let edges: Vec<Value> = g.edges.iter().map(|e| json!([e.src, e.dst])).collect();
                    obj.insert("edges".into(), Value::Array(edges));
                }
            }
        }
        TaskInput::Explanation {
            belief,
            argument,
            stance,
        } => {
            obj.insert("belief".into(), json!(belief));
            obj.insert("argument".into(), json!(argument));
            obj.insert("stance".into(), json!(stance));
            if let Some(g) = instance.gold_graph() {
                let label = |id: &str| g.label_of(id).unwrap_or(id).to_string();
                let edges: Vec<Value> = g
                    .edges
                    .iter()
                    .map(|e| {
                        json!([
                            label(&e.src),
                            e.relation.clone().unwrap_or_default(),
                            label(&e.dst)
                        ])
                    })
                    .collect();
                obj.insert("edges".into(), Value::Array(edges));
            }
        }
        TaskInput::Entities { actions, entities } => {
            obj.insert("actions".into(), json!(actions));
            obj.insert("entities".into(), json!(entities));
            if let Some(t) = instance.gold_trace() {
                let rows: Vec<Vec<String>> = t
                    .states()
                    .iter()
                    .map(|r| r.iter().map(StateValue::to_cell).collect())
                    .collect();
                obj.insert("states".into(), json!(rows));
            }
        }
    }
    Value::Object(obj)
}

pub fn dataset_to_jsonl(instances: &[TaskInstance]) -> String {
    instances
        .iter()
        .map(|x| instance_to_json(x).to_string() + "\n")
        .collect()
}

/// Rebuilds an instance from a decoded structure, taking the input fields
/// from the structure itself (graph attributes or trace headers).
pub fn instance_from_structure(
    id: &str,
    task: TaskKind,
    structure: Structure,
) -> Result<TaskInstance, String> {
    use crate::graph::{ATTR_ARGUMENT, ATTR_BELIEF, ATTR_GOAL, ATTR_STANCE};
    let input = match (&structure, task) {
        (Structure::Graph(g), TaskKind::ScriptGen) => TaskInput::Script {
            goal: g.attr(ATTR_GOAL).unwrap_or_default().to_string(),
        },
        (Structure::Graph(g), TaskKind::EdgePrediction) => TaskInput::EdgePrediction {
            goal: g.attr(ATTR_GOAL).unwrap_or_default().to_string(),
            nodes: g.nodes.clone(),
        },
        (Structure::Graph(g), TaskKind::ExplGraph) => TaskInput::Explanation {
            belief: g.attr(ATTR_BELIEF).unwrap_or_default().to_string(),
            argument: g.attr(ATTR_ARGUMENT).unwrap_or_default().to_string(),
            stance: g.attr(ATTR_STANCE).unwrap_or("support").to_string(),
        },
        (Structure::Trace(t), TaskKind::EntityTracking) => TaskInput::Entities {
            actions: t.actions().to_vec(),
            entities: t.entities().to_vec(),
        },
        _ => return Err(format!("decoded structure does not fit task {task}")),
    };
    TaskInstance::new(id, task, input, Some(structure)).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    #[test]
    fn missing_goal_names_line_and_field() {
        let text = "{\"id\":\"a\",\"goal\":\"g\"}\n{\"id\":\"b\",\"nodes\":[]}\n";
        match parse_dataset(text, TaskKind::ScriptGen) {
            Err(DatasetError::SchemaError { line: 2, field, .. }) => assert_eq!(field, "goal"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_stance_and_dangling_edge() {
        let expl = r#"{"id":"x","belief":"b","argument":"a","stance":"maybe","edges":[]}"#;
        assert!(
            matches!(parse_dataset(expl, TaskKind::ExplGraph), Err(DatasetError::SchemaError { field, .. }) if field == "stance")
        );
        let script =
            r#"{"id":"x","goal":"g","nodes":[{"id":"a","label":"A"}],"edges":[["a","zz"]]}"#;
        assert!(
            matches!(parse_dataset(script, TaskKind::ScriptGen), Err(DatasetError::SchemaError { field, .. }) if field == "edges")
        );
    }

    #[test]
    fn round_trip_samples() {
        for x in [
            samples::potpie(),
            samples::potpie_edges(),
            samples::factory_farming(),
            samples::photosynthesis(),
        ] {
            let text = dataset_to_jsonl(std::slice::from_ref(&x));
            let back = parse_dataset(&text, x.task).unwrap();
            assert_eq!(back.len(), 1);
            match (&back[0].gold, &x.gold) {
                (Some(Structure::Graph(a)), Some(Structure::Graph(b))) => {
                    assert!(a.same_structure(b))
                }
                (Some(Structure::Trace(a)), Some(Structure::Trace(b))) => {
                    assert!(a.same_content(b))
                }
                _ => panic!("gold lost"),
            }
            assert_eq!(back[0].input.text(), x.input.text());
        }
    }

    #[test]
    fn propara_cells() {
        let text = r#"{"id":"p","actions":["a"],"entities":["w"],"states":[["-"],["?"]]}"#;
        let x = &parse_dataset(text, TaskKind::EntityTracking).unwrap()[0];
        let t = x.gold_trace().unwrap();
        assert_eq!(t.state(0, 0), &StateValue::NonExistent);
        assert_eq!(t.state(1, 0), &StateValue::Unknown);
    }
}
