//! Conversion between task structures and their text serializations.
//!
//! Code formats are Python-syntax text and are decoded through
//! [`crate::pyparse`]; the two flat baselines (DOT digraph and edge list)
//! have their own small scanners. Script formats that mark graph entry and
//! exit points use the `begin`/`end` sentinels; those never reach the
//! in-memory graph.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    desanitize_identifier, normalize_label, resolve_collisions, resolve_collisions_reserving,
    sanitize_identifier, topological_order, Edge, EntityTrace, GraphError, LabeledGraph, Node,
    StateValue, Structure, TaskInput, TaskInstance, TaskKind, ATTR_ARGUMENT, ATTR_BELIEF,
    ATTR_GOAL, ATTR_STANCE,
};
use crate::pyparse::{
    parse_tolerant, quote_string, ClassDecl, Expr, FunctionDecl, ParseFailure, ParseWarning, Stmt,
    WarningKind,
};

const BEGIN: &str = "begin";
const END: &str = "end";
const MAX_FUNCTION_NAME: usize = 60;
const WRAP_COLUMN: usize = 79;
const ARTICLES: [&str; 3] = ["a", "an", "the"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodeFormat {
    /// `class Tree` with `Node()` bindings and `.children` lists.
    ScriptTree,
    /// One `stepN` method per node plus `get_relations`.
    ScriptLiteral,
    /// `nx.DiGraph()`-style `add_nodes_from` / `add_edge` calls.
    ScriptNetworkXStyle,
    DotDigraph,
    EdgeListText,
    /// `class ExplanationDAG` with a `begin` list and `add_edge` calls.
    ExplLiteral,
    ExplTree,
    ExplRelation,
    ProparaFunctions,
}

pub const ALL_FORMATS: [CodeFormat; 9] = [
    CodeFormat::ScriptTree,
    CodeFormat::ScriptLiteral,
    CodeFormat::ScriptNetworkXStyle,
    CodeFormat::DotDigraph,
    CodeFormat::EdgeListText,
    CodeFormat::ExplLiteral,
    CodeFormat::ExplTree,
    CodeFormat::ExplRelation,
    CodeFormat::ProparaFunctions,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Script,
    Explanation,
    Trace,
}

impl CodeFormat {
    fn family(self) -> Family {
        use CodeFormat::*;
        match self {
            ScriptTree | ScriptLiteral | ScriptNetworkXStyle | DotDigraph | EdgeListText => {
                Family::Script
            }
            ExplLiteral | ExplTree | ExplRelation => Family::Explanation,
            ProparaFunctions => Family::Trace,
        }
    }

    pub fn applies_to(self, task: TaskKind) -> bool {
        matches!(
            (self.family(), task),
            (
                Family::Script,
                TaskKind::ScriptGen | TaskKind::EdgePrediction
            ) | (Family::Explanation, TaskKind::ExplGraph)
                | (Family::Trace, TaskKind::EntityTracking)
        )
    }

    pub fn is_text_baseline(self) -> bool {
        matches!(self, CodeFormat::DotDigraph | CodeFormat::EdgeListText)
    }

    pub fn formats_for(task: TaskKind) -> Vec<CodeFormat> {
        ALL_FORMATS
            .iter()
            .copied()
            .filter(|f| f.applies_to(task))
            .collect()
    }

    pub fn extension(self) -> &'static str {
        match self {
            CodeFormat::DotDigraph => "dot",
            CodeFormat::EdgeListText => "txt",
            _ => "py",
        }
    }

    pub fn name(self) -> &'static str {
        use CodeFormat::*;
        match self {
            ScriptTree => "script-tree",
            ScriptLiteral => "script-literal",
            ScriptNetworkXStyle => "script-networkx",
            DotDigraph => "dot",
            EdgeListText => "edge-list",
            ExplLiteral => "expl-literal",
            ExplTree => "expl-tree",
            ExplRelation => "expl-relation",
            ProparaFunctions => "propara-functions",
        }
    }
}

impl fmt::Display for CodeFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CodeFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        ALL_FORMATS
            .iter()
            .copied()
            .find(|f| f.name() == key)
            .ok_or_else(|| {
                let names: Vec<_> = ALL_FORMATS.iter().map(|f| f.name()).collect();
                format!("unknown format {s:?}; expected one of {}", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceText {
    pub text: String,
    pub format: CodeFormat,
}

impl SourceText {
    pub fn new(text: impl Into<String>, format: CodeFormat) -> Self {
        SourceText {
            text: text.into(),
            format,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("format {format} does not apply to task {task}")]
    FormatMismatch { format: CodeFormat, task: TaskKind },
    #[error("instance has no gold structure to encode")]
    MissingGold,
    #[error(transparent)]
    ParseFailure(#[from] ParseFailure),
    #[error("no structure could be recovered from the text")]
    EmptyStructure,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A recovered structure plus the warnings collected while recovering it.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub structure: Structure,
    pub warnings: Vec<ParseWarning>,
}

fn check_format(instance: &TaskInstance, format: CodeFormat) -> Result<(), CodecError> {
    if format.applies_to(instance.task) {
        Ok(())
    } else {
        Err(CodecError::FormatMismatch {
            format,
            task: instance.task,
        })
    }
}

pub fn encode(instance: &TaskInstance, format: CodeFormat) -> Result<SourceText, CodecError> {
    check_format(instance, format)?;
    let gold = instance.gold.as_ref().ok_or(CodecError::MissingGold)?;
    let text = match (gold, format.family()) {
        (Structure::Graph(g), Family::Script) => {
            let goal = script_goal(&instance.input);
            let with_nodes = instance.task == TaskKind::EdgePrediction;
            script_text(format, goal, &g.nodes, Some(g), with_nodes)
        }
        (Structure::Graph(g), Family::Explanation) => expl_text(format, &instance.input, Some(g)),
        (Structure::Trace(t), Family::Trace) => propara_text(t.actions(), t.entities(), Some(t)),
        _ => {
            return Err(CodecError::FormatMismatch {
                format,
                task: instance.task,
            })
        }
    };
    Ok(SourceText::new(text, format))
}

/// The partial serialization of an instance's input that a model completes.
pub fn make_stub(instance: &TaskInstance, format: CodeFormat) -> Result<SourceText, CodecError> {
    check_format(instance, format)?;
    let text = match &instance.input {
        TaskInput::Script { goal } => script_text(format, goal, &[], None, false),
        TaskInput::EdgePrediction { goal, nodes } => script_text(format, goal, nodes, None, true),
        TaskInput::Explanation { .. } => expl_text(format, &instance.input, None),
        TaskInput::Entities { actions, entities } => propara_text(actions, entities, None),
    };
    Ok(SourceText::new(text, format))
}

/// What a model would have to generate after `stub` to produce `full`:
/// `full` minus the longest run of leading lines it shares with `stub`.
pub fn completion_suffix<'a>(stub: &str, full: &'a str) -> &'a str {
    let mut offset = 0;
    for (a, b) in stub.split_inclusive('\n').zip(full.split_inclusive('\n')) {
        if a != b {
            break;
        }
        offset += b.len();
    }
    &full[offset..]
}

fn script_goal(input: &TaskInput) -> &str {
    match input {
        TaskInput::Script { goal } | TaskInput::EdgePrediction { goal, .. } => goal,
        _ => "",
    }
}

const PYTHON_KEYWORDS: [&str; 35] = [
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
    "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield",
];

/// Identifier for a label. Keywords and the given reserved names get a
/// trailing underscore, which de-sanitization drops again.
fn code_identifier(label: &str, reserved: &[&str]) -> String {
    let mut id = sanitize_identifier(label).unwrap_or_else(|_| "node".to_string());
    if PYTHON_KEYWORDS.contains(&id.as_str()) || reserved.contains(&id.as_str()) {
        id.push('_');
    }
    id
}

/// Identifier per node, derived from its label; `begin`/`end` stay reserved.
fn script_identifiers(nodes: &[Node]) -> Vec<String> {
    let raw: Vec<String> = nodes
        .iter()
        .map(|n| code_identifier(&n.label, &[BEGIN, END]))
        .collect();
    resolve_collisions_reserving(&raw, &[BEGIN, END])
}

struct IdMap {
    ids: Vec<String>,
    by_node_id: HashMap<String, usize>,
}

impl IdMap {
    fn new(nodes: &[Node], ids: Vec<String>) -> Self {
        let mut by_node_id = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            by_node_id.entry(n.id.clone()).or_insert(i);
        }
        IdMap { ids, by_node_id }
    }

    fn index(&self, node_id: &str) -> Option<usize> {
        self.by_node_id.get(node_id).copied()
    }

    /// Emitted name of a stored node id; unknown ids are sanitized as-is.
    fn name(&self, node_id: &str) -> String {
        match self.index(node_id) {
            Some(i) => self.ids[i].clone(),
            None => sanitize_identifier(node_id).unwrap_or_else(|_| "node".to_string()),
        }
    }
}

/// Sources grouped in order of first appearance, each with its targets.
fn group_by_source(edges: &[Edge]) -> Vec<(String, Vec<&Edge>)> {
    let mut order: Vec<(String, Vec<&Edge>)> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    for e in edges {
        let i = *slot.entry(e.src.as_str()).or_insert_with(|| {
            order.push((e.src.clone(), Vec::new()));
            order.len() - 1
        });
        order[i].1.push(e);
    }
    order
}

fn sources_and_sinks(nodes: &[Node], edges: &[Edge], map: &IdMap) -> (Vec<usize>, Vec<usize>) {
    let mut has_in = vec![false; nodes.len()];
    let mut has_out = vec![false; nodes.len()];
    for e in edges {
        if let Some(i) = map.index(&e.src) {
            has_out[i] = true;
        }
        if let Some(i) = map.index(&e.dst) {
            has_in[i] = true;
        }
    }
    let sources = (0..nodes.len()).filter(|&i| !has_in[i]).collect();
    let sinks = (0..nodes.len()).filter(|&i| !has_out[i]).collect();
    (sources, sinks)
}

fn camel_case_class_name(goal: &str) -> String {
    let name: String = sanitize_identifier(goal)
        .map(|id| {
            id.split('_')
                .filter(|p| !p.is_empty())
                .map(|p| {
                    let mut cs = p.chars();
                    match cs.next() {
                        Some(c) => c.to_ascii_uppercase().to_string() + cs.as_str(),
                        None => String::new(),
                    }
                })
                .collect()
        })
        .unwrap_or_default();
    match name.chars().next() {
        None => "Plan".to_string(),
        Some(c) if c.is_ascii_digit() => format!("N{name}"),
        Some(_) => name,
    }
}

/// Renders a script in `format`. With `graph == None` only the stub is
/// produced; `with_nodes` puts the node set into the stub (edge prediction).
fn script_text(
    format: CodeFormat,
    goal: &str,
    nodes: &[Node],
    graph: Option<&LabeledGraph>,
    with_nodes: bool,
) -> String {
    let nodes: &[Node] = graph.map(|g| g.nodes.as_slice()).unwrap_or(nodes);
    let map = IdMap::new(nodes, script_identifiers(nodes));
    let goal_q = quote_string(goal);
    let mut out = String::new();
    match format {
        CodeFormat::ScriptTree => {
            out.push_str(&format!(
                "class Tree:\n\n  goal = {goal_q}\n\n  def __init__(self):\n"
            ));
            if !with_nodes && graph.is_none() {
                out.push_str("    # generate\n");
                return out;
            }
            out.push_str(&format!("    # nodes\n    {BEGIN} = Node()\n"));
            for id in &map.ids {
                out.push_str(&format!("    {id} = Node()\n"));
            }
            out.push_str("\n    # edges\n");
            let Some(g) = graph else { return out };
            let (sources, sinks) = sources_and_sinks(nodes, &g.edges, &map);
            let roots: Vec<String> = sources.iter().map(|&i| map.ids[i].clone()).collect();
            out.push_str(&wrapped_list_assign(
                &format!("    {BEGIN}.children = "),
                &roots,
            ));
            for (src, group) in group_by_source(&g.edges) {
                let children: Vec<String> = group.iter().map(|e| map.name(&e.dst)).collect();
                out.push_str(&wrapped_list_assign(
                    &format!("    {}.children = ", map.name(&src)),
                    &children,
                ));
            }
            for i in sinks {
                out.push_str(&format!("    {}.children = [{END}]\n", map.ids[i]));
            }
        }
        CodeFormat::ScriptLiteral => {
            out.push_str(&format!(
                "class {}:\n\n  title = {goal_q}\n",
                camel_case_class_name(goal)
            ));
            if !with_nodes && graph.is_none() {
                return out;
            }
            out.push_str(&format!("  steps = {}\n\n", nodes.len()));
            for (i, n) in nodes.iter().enumerate() {
                out.push_str(&format!(
                    "  def step{i}(self):\n    return {}\n",
                    quote_string(&n.label)
                ));
            }
            out.push_str("  def get_relations(self):\n    return [\n");
            let Some(g) = graph else { return out };
            for e in &g.edges {
                let (Some(s), Some(d)) = (map.index(&e.src), map.index(&e.dst)) else {
                    continue;
                };
                out.push_str(&format!("      \"step{s} -> step{d}\",\n"));
            }
            out.push_str("    ]\n");
        }
        CodeFormat::ScriptNetworkXStyle => {
            out.push_str(&format!("class Plan:\n\n  goal = {goal_q}\n"));
            if !with_nodes && graph.is_none() {
                return out;
            }
            out.push_str(&format!(
                "  num_steps = {}\n\n  def __init__(self):\n    graph = nx.DiGraph()\n    # add nodes\n",
                nodes.len()
            ));
            for (i, n) in nodes.iter().enumerate() {
                out.push_str(&format!("    step{i} = {}\n", quote_string(&n.label)));
            }
            let steps: Vec<String> = (0..nodes.len()).map(|i| format!("step{i}")).collect();
            out.push_str(&format!(
                "    graph.add_nodes_from([{}])\n\n    # add edges\n",
                steps.join(", ")
            ));
            let Some(g) = graph else { return out };
            for e in &g.edges {
                let (Some(s), Some(d)) = (map.index(&e.src), map.index(&e.dst)) else {
                    continue;
                };
                out.push_str(&format!("    graph.add_edge(step{s}, step{d})\n"));
            }
        }
        CodeFormat::DotDigraph => {
            out.push_str(&format!("digraph G {{\n  goal = {goal_q};\n"));
            if with_nodes {
                for id in &map.ids {
                    out.push_str(&format!("  {id};\n"));
                }
            }
            let Some(g) = graph else { return out };
            let (sources, sinks) = sources_and_sinks(nodes, &g.edges, &map);
            for i in sources {
                out.push_str(&format!("  {BEGIN} -> {};\n", map.ids[i]));
            }
            for e in &g.edges {
                out.push_str(&format!(
                    "  {} -> {};\n",
                    map.name(&e.src),
                    map.name(&e.dst)
                ));
            }
            for i in sinks {
                out.push_str(&format!("  {} -> {END};\n", map.ids[i]));
            }
            out.push_str("}\n");
        }
        CodeFormat::EdgeListText => {
            out.push_str(&format!("# goal: {}\n", single_line(goal)));
            if with_nodes {
                out.push_str(&format!("# nodes: {}\n", map.ids.join(", ")));
            }
            out.push_str("[\n");
            let Some(g) = graph else { return out };
            let (_, sinks) = sources_and_sinks(nodes, &g.edges, &map);
            let mut pairs: Vec<String> = g
                .edges
                .iter()
                .map(|e| format!("  ({}, {})", map.name(&e.src), map.name(&e.dst)))
                .collect();
            pairs.extend(
                sinks
                    .into_iter()
                    .map(|i| format!("  ({}, {END})", map.ids[i])),
            );
            out.push_str(&pairs.join(",\n"));
            if !pairs.is_empty() {
                out.push('\n');
            }
            out.push_str("]\n");
        }
        _ => unreachable!("script_text called with non-script format"),
    }
    out
}

/// `prefix[a, b, ...]` as one line, or broken after commas with
/// continuation lines aligned one past the opening bracket once the line
/// would exceed the column limit.
fn wrapped_list_assign(prefix: &str, items: &[String]) -> String {
    let flat = format!("{prefix}[{}]\n", items.join(", "));
    if flat.len() - 1 <= WRAP_COLUMN || items.len() < 2 {
        return flat;
    }
    let align = " ".repeat(prefix.len() + 1);
    let mut out = format!("{prefix}[");
    let mut line_len = out.len();
    for (i, item) in items.iter().enumerate() {
        let last = i + 1 == items.len();
        let piece = if last {
            format!("{item}]")
        } else {
            format!("{item},")
        };
        if i > 0 {
            if line_len + 1 + piece.len() > WRAP_COLUMN {
                out.push('\n');
                out.push_str(&align);
                line_len = align.len();
            } else {
                out.push(' ');
                line_len += 1;
            }
        }
        out.push_str(&piece);
        line_len += piece.len();
    }
    out.push('\n');
    out
}

fn single_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn expl_text(format: CodeFormat, input: &TaskInput, graph: Option<&LabeledGraph>) -> String {
    let TaskInput::Explanation {
        belief,
        argument,
        stance,
    } = input
    else {
        unreachable!("explanation format with non-explanation input")
    };
    let (b, a, s) = (
        quote_string(belief),
        quote_string(argument),
        quote_string(stance),
    );
    let stance_word = single_line(stance);
    let mut out = String::new();
    match format {
        CodeFormat::ExplLiteral | CodeFormat::ExplRelation => {
            let (class, comment) = if format == CodeFormat::ExplLiteral {
                ("ExplanationDAG", "# Edges".to_string())
            } else {
                (
                    "Relation",
                    format!("# create a DAG to {stance_word} belief using argument"),
                )
            };
            out.push_str(&format!(
                "class {class}:\n\n  def __init__(self):\n    belief = {b}\n    argument = {a}\n    stance = {s}\n\n    {comment}\n"
            ));
            let Some(g) = graph else { return out };
            let map = IdMap::new(&g.nodes, g.nodes.iter().map(|n| n.id.clone()).collect());
            let label = |id: &str| match map.index(id) {
                Some(i) => g.nodes[i].label.clone(),
                None => id.to_string(),
            };
            let (sources, _) = sources_and_sinks(&g.nodes, &g.edges, &map);
            let begin: Vec<String> = sources
                .iter()
                .map(|&i| quote_string(&g.nodes[i].label))
                .collect();
            out.push_str(&format!("    begin = [{}]\n", begin.join(", ")));
            for e in &g.edges {
                out.push_str(&format!(
                    "    add_edge({}, {}, {})\n",
                    quote_string(&label(&e.src)),
                    quote_string(e.relation.as_deref().unwrap_or("")),
                    quote_string(&label(&e.dst))
                ));
            }
        }
        CodeFormat::ExplTree => {
            out.push_str(&format!(
                "class Tree:\n  def __init__(self):\n    self.belief = {b}\n    self.argument = {a}\n    self.stance = {s}\n\n    # tree for {stance_word} in {stance_word} of belief\n"
            ));
            let Some(g) = graph else { return out };
            let raw: Vec<String> = g
                .nodes
                .iter()
                .map(|n| code_identifier(&n.label, &["root_nodes"]))
                .collect();
            let map = IdMap::new(&g.nodes, resolve_collisions(&raw));
            let (sources, _) = sources_and_sinks(&g.nodes, &g.edges, &map);
            let roots: Vec<&str> = sources.iter().map(|&i| map.ids[i].as_str()).collect();
            if roots.len() == 1 {
                out.push_str(&format!("    root_nodes = {}\n", roots[0]));
            } else {
                out.push_str(&format!("    root_nodes = [{}]\n", roots.join(", ")));
            }
            let mut mentioned = HashSet::new();
            for (src, group) in group_by_source(&g.edges) {
                let name = map.name(&src);
                out.push_str(&format!("    {name} = Node()\n"));
                mentioned.insert(src.clone());
                for e in group {
                    mentioned.insert(e.dst.clone());
                    let dst = match map.index(&e.dst) {
                        Some(i) => g.nodes[i].label.clone(),
                        None => e.dst.clone(),
                    };
                    out.push_str(&format!(
                        "    {name}.add_edge({}, {})\n",
                        quote_string(e.relation.as_deref().unwrap_or("")),
                        quote_string(&dst)
                    ));
                }
            }
            for (i, n) in g.nodes.iter().enumerate() {
                if !mentioned.contains(&n.id) {
                    out.push_str(&format!("    {} = Node()\n", map.ids[i]));
                }
            }
        }
        _ => unreachable!("expl_text called with non-explanation format"),
    }
    out
}

/// Function name for an action: sanitized text without articles, capped in
/// length. Falls back to the plain sanitized text if only articles remain.
fn action_function_name(action: &str) -> String {
    let words: Vec<&str> = action
        .split_whitespace()
        .filter(|w| !ARTICLES.contains(&normalize_label(w).as_str()))
        .collect();
    let name = sanitize_identifier(&words.join(" "))
        .or_else(|_| sanitize_identifier(action))
        .unwrap_or_else(|_| "step".to_string());
    let mut cut: String = name.chars().take(MAX_FUNCTION_NAME).collect();
    while cut.ends_with('_') {
        cut.pop();
    }
    code_identifier(&cut, &["init", "main"])
}

fn comment_text(text: &str) -> String {
    single_line(text).to_lowercase()
}

fn propara_text(actions: &[String], entities: &[String], trace: Option<&EntityTrace>) -> String {
    let mut out = String::from("def main():\n  # init\n");
    for a in actions {
        out.push_str(&format!("  # {}\n", comment_text(a)));
    }
    for (k, e) in entities.iter().enumerate() {
        out.push_str(&format!(
            "  # state_{k} tracks the location/state {}\n",
            single_line(e)
        ));
    }
    out.push_str("  def init():\n");
    let Some(t) = trace else { return out };
    let raw: Vec<String> = actions.iter().map(|a| action_function_name(a)).collect();
    let names = resolve_collisions_reserving(&raw, &["init", "main"]);
    for (step, row) in t.states().iter().enumerate() {
        if step > 0 {
            out.push_str(&format!("  def {}():\n", names[step - 1]));
        }
        for (k, value) in row.iter().enumerate() {
            let rhs = match value {
                StateValue::NonExistent => "None".to_string(),
                StateValue::Unknown => "\"UNK\"".to_string(),
                StateValue::Known(loc) => quote_string(loc),
            };
            out.push_str(&format!("    state_{k} = {rhs}\n"));
        }
    }
    out
}

/// Decodes any format, code or flat-text baseline.
pub fn decode(source: &SourceText) -> Result<Decoded, CodecError> {
    if source.text.trim().is_empty() {
        return Err(CodecError::EmptyStructure);
    }
    match source.format.family() {
        _ if source.format.is_text_baseline() => {
            let (graph, warnings) = decode_text_baseline(source)?;
            Ok(Decoded {
                structure: Structure::Graph(graph),
                warnings,
            })
        }
        Family::Script => decode_script(source),
        Family::Explanation => decode_expl(source),
        Family::Trace => decode_propara(source),
    }
}

fn warning(kind: WarningKind, line: usize, message: impl Into<String>) -> ParseWarning {
    ParseWarning {
        kind,
        line,
        column: 1,
        message: message.into(),
    }
}

/// Collects nodes by key and edges, dropping sentinels and duplicate edges.
struct GraphBuilder {
    graph: LabeledGraph,
    keys: HashMap<String, String>,
    seen_edges: HashSet<(String, Option<String>, String)>,
    warnings: Vec<ParseWarning>,
    drop_sentinels: bool,
}

impl GraphBuilder {
    fn new(drop_sentinels: bool) -> Self {
        GraphBuilder {
            graph: LabeledGraph::new(),
            keys: HashMap::new(),
            seen_edges: HashSet::new(),
            warnings: Vec::new(),
            drop_sentinels,
        }
    }

    fn is_sentinel(&self, key: &str) -> bool {
        self.drop_sentinels && (key == BEGIN || key == END)
    }

    /// Returns the node id for `key`, creating the node if needed.
    fn node(&mut self, key: &str, label: &str) -> Option<String> {
        if self.is_sentinel(key) {
            return None;
        }
        if let Some(id) = self.keys.get(key) {
            return Some(id.clone());
        }
        let base = sanitize_identifier(label)
            .or_else(|_| sanitize_identifier(key))
            .unwrap_or_else(|_| "node".to_string());
        let existing: Vec<&str> = self.graph.nodes.iter().map(|n| n.id.as_str()).collect();
        let id = resolve_collisions_reserving(&[base], &existing).remove(0);
        self.graph.add_node(id.clone(), label);
        self.keys.insert(key.to_string(), id.clone());
        Some(id)
    }

    fn has(&self, key: &str) -> bool {
        self.keys.contains_key(key)
    }

    fn edge(
        &mut self,
        src: Option<String>,
        relation: Option<String>,
        dst: Option<String>,
        line: usize,
    ) {
        let (Some(src), Some(dst)) = (src, dst) else {
            return;
        };
        let key = (src.clone(), relation.clone(), dst.clone());
        if !self.seen_edges.insert(key) {
            self.warnings.push(warning(
                WarningKind::DuplicateEdge,
                line,
                format!("duplicate edge {src} -> {dst}"),
            ));
            return;
        }
        self.graph.add_edge(Edge { src, dst, relation });
    }

    fn finish(self) -> Result<(LabeledGraph, Vec<ParseWarning>), CodecError> {
        if self.graph.nodes.is_empty() {
            return Err(CodecError::EmptyStructure);
        }
        Ok((self.graph, self.warnings))
    }
}

/// All statements of a decoded module in source order: class attributes
/// and method bodies of every class, then top-level functions and
/// statements. Nested function bodies are flattened in.
fn flatten_statements(
    classes: &[ClassDecl],
    functions: &[FunctionDecl],
    stmts: &[Stmt],
) -> Vec<Stmt> {
    fn push_fn(f: &FunctionDecl, out: &mut Vec<Stmt>) {
        for s in &f.body {
            match s {
                Stmt::Def(inner) => push_fn(inner, out),
                other => out.push(other.clone()),
            }
        }
    }
    let mut out = Vec::new();
    for c in classes {
        for (target, value) in &c.attributes {
            out.push(Stmt::Assign {
                target: target.clone(),
                value: value.clone(),
                line: c.line,
            });
        }
        for m in &c.methods {
            push_fn(m, &mut out);
        }
    }
    for f in functions {
        push_fn(f, &mut out);
    }
    out.extend(stmts.iter().cloned());
    out
}

fn strip_self(target: &str) -> &str {
    target.strip_prefix("self.").unwrap_or(target)
}

fn unknown(stmt: &Stmt) -> ParseWarning {
    let line = match stmt {
        Stmt::Assign { line, .. }
        | Stmt::Call { line, .. }
        | Stmt::Return { line, .. }
        | Stmt::Comment { line, .. } => *line,
        Stmt::Def(f) => f.line,
    };
    warning(
        WarningKind::UnknownStatement,
        line,
        "statement not part of the format",
    )
}

fn decode_script(source: &SourceText) -> Result<Decoded, CodecError> {
    let (ast, mut warnings) = parse_tolerant(&source.text);
    let mut b = GraphBuilder::new(true);
    let mut attrs = Vec::new();
    match source.format {
        CodeFormat::ScriptTree => {
            let stmts = flatten_statements(&ast.classes, &ast.functions, &ast.statements);
            let mut pending: Vec<(String, Vec<String>, usize)> = Vec::new();
            for stmt in &stmts {
                match stmt {
                    Stmt::Assign {
                        target,
                        value: Expr::Str(s),
                        ..
                    } if strip_self(target) == ATTR_GOAL => {
                        attrs.push((ATTR_GOAL, s.clone()));
                    }
                    Stmt::Assign {
                        target,
                        value: Expr::Ctor { .. },
                        line,
                    } if !target.contains('.') => {
                        if b.has(target) {
                            warnings.push(warning(
                                WarningKind::DuplicateAssign,
                                *line,
                                format!("{target} declared twice"),
                            ));
                        }
                        b.node(target, &desanitize_identifier(target));
                    }
                    Stmt::Assign {
                        target,
                        value: Expr::List(items),
                        line,
                    } if target.ends_with(".children") => {
                        let src = target.trim_end_matches(".children").to_string();
                        let dsts = items
                            .iter()
                            .filter_map(|e| e.as_ident().or(e.as_str()).map(str::to_string))
                            .collect();
                        pending.push((src, dsts, *line));
                    }
                    Stmt::Comment { .. } => {}
                    other => warnings.push(unknown(other)),
                }
            }
            for (src, dsts, line) in pending {
                let s = resolve_ref(&mut b, &src, line);
                for d in dsts {
                    let d = resolve_ref(&mut b, &d, line);
                    b.edge(s.clone(), None, d, line);
                }
            }
        }
        CodeFormat::ScriptLiteral => {
            for c in &ast.classes {
                for (name, value) in &c.attributes {
                    if let ("title", Expr::Str(s)) = (name.as_str(), value) {
                        attrs.push((ATTR_GOAL, s.clone()));
                    }
                }
            }
            let methods: Vec<&FunctionDecl> = ast
                .classes
                .iter()
                .flat_map(|c| c.methods.iter())
                .chain(ast.functions.iter())
                .collect();
            let mut relations = Vec::new();
            for m in &methods {
                let returned = m.body.iter().find_map(|s| match s {
                    Stmt::Return { value, line } => Some((value, *line)),
                    _ => None,
                });
                match (m.name.as_str(), returned) {
                    (name, Some((Expr::Str(label), _))) if name.starts_with("step") => {
                        b.node(name, label);
                    }
                    ("get_relations", Some((Expr::List(items), line))) => {
                        relations.extend(
                            items
                                .iter()
                                .filter_map(|e| e.as_str().map(|s| (s.to_string(), line))),
                        );
                    }
                    _ => warnings.push(warning(
                        WarningKind::UnknownStatement,
                        m.line,
                        format!("method {} ignored", m.name),
                    )),
                }
            }
            for (rel, line) in relations {
                let Some((s, d)) = rel.split_once("->") else {
                    warnings.push(warning(
                        WarningKind::UnknownStatement,
                        line,
                        format!("relation {rel:?} has no arrow"),
                    ));
                    continue;
                };
                let s = resolve_ref(&mut b, s.trim(), line);
                let d = resolve_ref(&mut b, d.trim(), line);
                b.edge(s, None, d, line);
            }
        }
        CodeFormat::ScriptNetworkXStyle => {
            let stmts = flatten_statements(&ast.classes, &ast.functions, &ast.statements);
            let mut edges = Vec::new();
            for stmt in &stmts {
                match stmt {
                    Stmt::Assign {
                        target,
                        value: Expr::Str(s),
                        ..
                    } if strip_self(target) == ATTR_GOAL => {
                        attrs.push((ATTR_GOAL, s.clone()));
                    }
                    Stmt::Assign {
                        target,
                        value: Expr::Str(label),
                        line,
                    } if !target.contains('.') => {
                        if b.has(target) {
                            warnings.push(warning(
                                WarningKind::DuplicateAssign,
                                *line,
                                format!("{target} assigned twice"),
                            ));
                        } else {
                            b.node(target, label);
                        }
                    }
                    Stmt::Assign {
                        target,
                        value: Expr::Number(_),
                        ..
                    } if target == "num_steps" => {}
                    Stmt::Assign {
                        value: Expr::Ctor { .. },
                        ..
                    } => {}
                    Stmt::Call { callee, .. } if callee.ends_with(".add_nodes_from") => {}
                    Stmt::Call { callee, args, line }
                        if callee.ends_with(".add_edge") && args.len() == 2 =>
                    {
                        match (args[0].as_ident(), args[1].as_ident()) {
                            (Some(s), Some(d)) => edges.push((s.to_string(), d.to_string(), *line)),
                            _ => warnings.push(warning(
                                WarningKind::UnknownStatement,
                                *line,
                                "add_edge expects two step names",
                            )),
                        }
                    }
                    Stmt::Comment { .. } => {}
                    other => warnings.push(unknown(other)),
                }
            }
            for (s, d, line) in edges {
                let s = resolve_ref(&mut b, &s, line);
                let d = resolve_ref(&mut b, &d, line);
                b.edge(s, None, d, line);
            }
        }
        _ => unreachable!("decode_script called with non-script format"),
    }
    let (mut graph, more) = b.finish()?;
    warnings.extend(more);
    for (k, v) in attrs {
        graph.attrs.insert(k.to_string(), v);
    }
    Ok(Decoded {
        structure: Structure::Graph(graph),
        warnings,
    })
}

/// Looks up a referenced name, declaring it (with a warning) when the text
/// never bound it. Sentinels resolve to `None`.
fn resolve_ref(b: &mut GraphBuilder, name: &str, line: usize) -> Option<String> {
    if b.is_sentinel(name) {
        return None;
    }
    if !b.has(name) {
        b.warnings.push(warning(
            WarningKind::DanglingReference,
            line,
            format!("{name} used before declaration"),
        ));
    }
    b.node(name, &desanitize_identifier(name))
}

fn decode_expl(source: &SourceText) -> Result<Decoded, CodecError> {
    let (ast, mut warnings) = parse_tolerant(&source.text);
    let stmts = flatten_statements(&ast.classes, &ast.functions, &ast.statements);
    let mut b = GraphBuilder::new(false);
    let mut attrs: Vec<(&str, String)> = Vec::new();
    let mut by_name: HashMap<String, String> = HashMap::new();
    for stmt in &stmts {
        match stmt {
            Stmt::Assign {
                target,
                value: Expr::Str(s),
                ..
            } if matches!(
                strip_self(target),
                ATTR_BELIEF | ATTR_ARGUMENT | ATTR_STANCE
            ) =>
            {
                let key = match strip_self(target) {
                    ATTR_BELIEF => ATTR_BELIEF,
                    ATTR_ARGUMENT => ATTR_ARGUMENT,
                    _ => ATTR_STANCE,
                };
                attrs.push((key, s.clone()));
            }
            Stmt::Assign {
                target,
                value: Expr::List(items),
                ..
            } if target == BEGIN => {
                for label in items.iter().filter_map(Expr::as_str) {
                    b.node(&normalize_label(label), label);
                }
            }
            Stmt::Assign { target, .. } if target == "root_nodes" => {}
            Stmt::Assign {
                target,
                value: Expr::Ctor { name, .. },
                line,
            } if !target.contains('.') && name == "Node" => {
                if by_name.contains_key(target) {
                    warnings.push(warning(
                        WarningKind::DuplicateAssign,
                        *line,
                        format!("{target} declared twice"),
                    ));
                    continue;
                }
                let label = desanitize_identifier(target);
                if let Some(id) = b.node(&normalize_label(&label), &label) {
                    by_name.insert(target.clone(), id);
                }
            }
            Stmt::Call { callee, args, line } if callee == "add_edge" && args.len() == 3 => {
                let texts: Vec<Option<&str>> = args.iter().map(Expr::as_str).collect();
                let (Some(s), Some(r), Some(d)) = (texts[0], texts[1], texts[2]) else {
                    warnings.push(warning(
                        WarningKind::UnknownStatement,
                        *line,
                        "add_edge expects three strings",
                    ));
                    continue;
                };
                let s_id = b.node(&normalize_label(s), s);
                let d_id = b.node(&normalize_label(d), d);
                b.edge(s_id, Some(r.to_string()), d_id, *line);
            }
            Stmt::Call { callee, args, line }
                if callee.ends_with(".add_edge") && args.len() == 2 =>
            {
                let owner = callee.trim_end_matches(".add_edge");
                let (Some(r), Some(d)) = (args[0].as_str(), args[1].as_str()) else {
                    warnings.push(warning(
                        WarningKind::UnknownStatement,
                        *line,
                        "add_edge expects two strings",
                    ));
                    continue;
                };
                let s_id = match by_name.get(owner) {
                    Some(id) => Some(id.clone()),
                    None => {
                        warnings.push(warning(
                            WarningKind::DanglingReference,
                            *line,
                            format!("{owner} used before declaration"),
                        ));
                        let label = desanitize_identifier(owner);
                        let id = b.node(&normalize_label(&label), &label);
                        if let Some(id) = &id {
                            by_name.insert(owner.to_string(), id.clone());
                        }
                        id
                    }
                };
                let d_id = b.node(&normalize_label(d), d);
                b.edge(s_id, Some(r.to_string()), d_id, *line);
            }
            Stmt::Comment { .. } => {}
            other => warnings.push(unknown(other)),
        }
    }
    let (mut graph, more) = b.finish()?;
    warnings.extend(more);
    for (k, v) in attrs {
        graph.attrs.insert(k.to_string(), v);
    }
    Ok(Decoded {
        structure: Structure::Graph(graph),
        warnings,
    })
}

fn parse_state_comment(text: &str) -> Option<(usize, String)> {
    let rest = text.strip_prefix("state_")?;
    let (index, tail) = rest.split_once(' ')?;
    let entity = tail.trim().strip_prefix("tracks the location/state")?;
    Some((index.parse().ok()?, entity.trim().to_string()))
}

fn decode_propara(source: &SourceText) -> Result<Decoded, CodecError> {
    let (ast, mut warnings) = parse_tolerant(&source.text);
    let body: Vec<&Stmt> = match ast.functions.iter().find(|f| f.name == "main") {
        Some(main) => main.body.iter().collect(),
        None => ast.functions.iter().flat_map(|f| f.body.iter()).collect(),
    };
    let mut actions = Vec::new();
    let mut entities: Vec<(usize, String)> = Vec::new();
    let mut functions: Vec<&FunctionDecl> = Vec::new();
    let mut seen_marker = false;
    for stmt in body {
        match stmt {
            Stmt::Comment { text, .. } => {
                if let Some(entity) = parse_state_comment(text) {
                    entities.push(entity);
                } else if !seen_marker && text == "init" {
                    seen_marker = true;
                } else if entities.is_empty() {
                    actions.push(text.clone());
                }
            }
            Stmt::Def(f) => functions.push(f),
            other => warnings.push(unknown(other)),
        }
    }
    entities.sort_by_key(|(i, _)| *i);
    let entity_names: Vec<String> = entities.iter().map(|(_, e)| e.clone()).collect();
    let m = entity_names.len();
    if m == 0 {
        return Err(CodecError::EmptyStructure);
    }
    let slot: HashMap<usize, usize> = entities
        .iter()
        .enumerate()
        .map(|(pos, (k, _))| (*k, pos))
        .collect();

    if functions.first().map(|f| f.name.as_str()) != Some("init") && !functions.is_empty() {
        warnings.push(warning(
            WarningKind::UnknownStatement,
            functions[0].line,
            "first function is not init",
        ));
    }
    if functions.len() > actions.len() + 1 {
        for f in &functions[actions.len() + 1..] {
            warnings.push(warning(
                WarningKind::UnknownStatement,
                f.line,
                format!("function {} has no matching action comment", f.name),
            ));
            actions.push(desanitize_identifier(&f.name));
        }
    }
    if actions.is_empty() {
        return Err(CodecError::EmptyStructure);
    }
    let mut rows: Vec<Vec<StateValue>> = Vec::with_capacity(actions.len() + 1);
    for step in 0..=actions.len() {
        let mut row: Vec<Option<StateValue>> = vec![None; m];
        if let Some(f) = functions.get(step) {
            for stmt in &f.body {
                match stmt {
                    Stmt::Assign {
                        target,
                        value,
                        line,
                    } => {
                        let Some(pos) = target
                            .strip_prefix("state_")
                            .and_then(|k| k.parse().ok())
                            .and_then(|k: usize| slot.get(&k))
                        else {
                            warnings.push(warning(
                                WarningKind::DanglingReference,
                                *line,
                                format!("{target} tracks no entity"),
                            ));
                            continue;
                        };
                        let state = match value {
                            Expr::Ident(n) if n == "None" => StateValue::NonExistent,
                            Expr::Str(s) if s == "UNK" => StateValue::Unknown,
                            Expr::Str(s) if !s.trim().is_empty() => StateValue::Known(s.clone()),
                            _ => {
                                warnings.push(warning(
                                    WarningKind::UnknownStatement,
                                    *line,
                                    format!("{target} has no usable state"),
                                ));
                                continue;
                            }
                        };
                        if row[*pos].is_some() {
                            warnings.push(warning(
                                WarningKind::DuplicateAssign,
                                *line,
                                format!("{target} assigned twice"),
                            ));
                        }
                        row[*pos] = Some(state);
                    }
                    Stmt::Comment { .. } => {}
                    other => warnings.push(unknown(other)),
                }
            }
        }
        let previous = rows.last().cloned();
        let filled: Vec<StateValue> = row
            .into_iter()
            .enumerate()
            .map(|(k, cell)| {
                cell.unwrap_or_else(|| match &previous {
                    Some(prev) => prev[k].clone(),
                    None => StateValue::Unknown,
                })
            })
            .collect();
        rows.push(filled);
    }
    if functions.len() < actions.len() + 1 {
        warnings.push(warning(
            WarningKind::UnknownStatement,
            1,
            format!(
                "{} of {} steps have no function; states carried forward",
                actions.len() + 1 - functions.len(),
                actions.len() + 1
            ),
        ));
    }
    let trace = EntityTrace::new(actions, entity_names, rows)?;
    Ok(Decoded {
        structure: Structure::Trace(trace),
        warnings,
    })
}

/// Decodes the DOT digraph and edge-list baselines.
pub fn decode_text_baseline(
    source: &SourceText,
) -> Result<(LabeledGraph, Vec<ParseWarning>), CodecError> {
    match source.format {
        CodeFormat::DotDigraph => decode_dot(&source.text),
        CodeFormat::EdgeListText => decode_edge_list(&source.text),
        format => Err(CodecError::FormatMismatch {
            format,
            task: TaskKind::ScriptGen,
        }),
    }
}

/// Splits DOT text into `;`/newline-terminated statements, respecting
/// quoted strings. Returns (line, statement) pairs.
fn dot_statements(text: &str) -> Result<Vec<(usize, String)>, ParseFailure> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut start_line = 1;
    let mut line = 1;
    let mut chars = text.chars().peekable();
    let mut col = 0;
    while let Some(c) = chars.next() {
        col += 1;
        match c {
            '"' => {
                let (qline, qcol) = (line, col);
                current.push(c);
                let mut closed = false;
                while let Some(c) = chars.next() {
                    col += 1;
                    current.push(c);
                    if c == '\\' {
                        if let Some(n) = chars.next() {
                            current.push(n);
                            col += 1;
                        }
                    } else if c == '"' {
                        closed = true;
                        break;
                    } else if c == '\n' {
                        break;
                    }
                }
                if !closed {
                    return Err(ParseFailure {
                        line: qline,
                        column: qcol,
                        expected: "closing quote".into(),
                        found: "end of line".into(),
                    });
                }
            }
            '/' if chars.peek() == Some(&'/') => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
                if !current.trim().is_empty() {
                    out.push((start_line, std::mem::take(&mut current)));
                }
                current.clear();
                line += 1;
                col = 0;
                start_line = line;
            }
            ';' | '\n' | '{' | '}' => {
                if !current.trim().is_empty() {
                    out.push((start_line, current.trim().to_string()));
                }
                current.clear();
                if c == '\n' {
                    line += 1;
                    col = 0;
                }
                start_line = line;
            }
            _ => current.push(c),
        }
    }
    if !current.trim().is_empty() {
        out.push((start_line, current.trim().to_string()));
    }
    Ok(out)
}

fn unquote(token: &str) -> (String, bool) {
    let t = token.trim();
    if t.len() >= 2 && t.starts_with('"') && t.ends_with('"') {
        let inner = &t[1..t.len() - 1];
        (inner.replace("\\\"", "\"").replace("\\\\", "\\"), true)
    } else {
        (t.to_string(), false)
    }
}

fn baseline_node(b: &mut GraphBuilder, token: &str) -> Option<String> {
    let (name, quoted) = unquote(token);
    if quoted {
        let key = sanitize_identifier(&name).unwrap_or_else(|_| name.clone());
        b.node(&key, &name)
    } else {
        b.node(&name, &desanitize_identifier(&name))
    }
}

fn decode_dot(text: &str) -> Result<(LabeledGraph, Vec<ParseWarning>), CodecError> {
    let mut b = GraphBuilder::new(true);
    let mut goal = None;
    for (line, stmt) in dot_statements(text)? {
        let lowered = stmt.to_ascii_lowercase();
        if lowered.starts_with("digraph")
            || lowered.starts_with("graph")
            || lowered.starts_with("strict")
        {
            continue;
        }
        if stmt.contains("->") {
            let parts: Vec<&str> = stmt.split("->").map(str::trim).collect();
            if parts.iter().any(|p| p.is_empty()) {
                b.warnings.push(warning(
                    WarningKind::UnknownStatement,
                    line,
                    format!("malformed edge {stmt:?}"),
                ));
                continue;
            }
            // drop trailing attribute lists like `a -> b [label="x"]`
            let ids: Vec<String> = parts
                .iter()
                .map(|p| p.split('[').next().unwrap_or(p).trim().to_string())
                .collect();
            for pair in ids.windows(2) {
                let s = baseline_node(&mut b, &pair[0]);
                let d = baseline_node(&mut b, &pair[1]);
                b.edge(s, None, d, line);
            }
        } else if let Some((key, value)) = stmt.split_once('=').filter(|(k, _)| !k.contains('[')) {
            if key.trim() == ATTR_GOAL {
                goal = Some(unquote(value).0);
            }
        } else if is_dot_id(stmt.split('[').next().unwrap_or("").trim()) {
            let head = stmt.split('[').next().unwrap_or("").trim().to_string();
            let label = stmt
                .split_once("label")
                .and_then(|(_, rest)| rest.split_once('='))
                .map(|(_, v)| unquote(v.trim().trim_end_matches(']')).0);
            match label {
                Some(l) => {
                    let (name, _) = unquote(&head);
                    b.node(&name, &l);
                }
                None => {
                    baseline_node(&mut b, &head);
                }
            }
        } else {
            b.warnings.push(warning(
                WarningKind::UnknownStatement,
                line,
                format!("unrecognized statement {stmt:?}"),
            ));
        }
    }
    let (mut graph, warnings) = b.finish()?;
    if let Some(goal) = goal {
        graph.attrs.insert(ATTR_GOAL.to_string(), goal);
    }
    Ok((graph, warnings))
}

fn is_dot_id(s: &str) -> bool {
    !s.is_empty()
        && ((s.starts_with('"') && s.ends_with('"') && s.len() >= 2)
            || s.chars().all(|c| c.is_alphanumeric() || c == '_'))
}

fn decode_edge_list(text: &str) -> Result<(LabeledGraph, Vec<ParseWarning>), CodecError> {
    let mut b = GraphBuilder::new(true);
    let mut goal = None;
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw_line.trim();
        if let Some(comment) = trimmed.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(g) = comment.strip_prefix("goal:") {
                goal = Some(g.trim().to_string());
            } else if let Some(nodes) = comment.strip_prefix("nodes:") {
                for n in nodes.split(',').map(str::trim).filter(|n| !n.is_empty()) {
                    baseline_node(&mut b, n);
                }
            }
            continue;
        }
        let mut rest = trimmed;
        while let Some(open) = rest.find('(') {
            let Some(close) = rest[open..].find(')') else {
                return Err(ParseFailure {
                    line,
                    column: open + 1,
                    expected: "\")\"".into(),
                    found: "end of line".into(),
                }
                .into());
            };
            let inner = &rest[open + 1..open + close];
            let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
            match parts.as_slice() {
                [s, d] if !s.is_empty() && !d.is_empty() => {
                    let s = baseline_node(&mut b, s);
                    let d = baseline_node(&mut b, d);
                    b.edge(s, None, d, line);
                }
                _ => b.warnings.push(warning(
                    WarningKind::UnknownStatement,
                    line,
                    format!("tuple ({inner}) is not a pair"),
                )),
            }
            rest = &rest[open + close + 1..];
        }
    }
    let (mut graph, warnings) = b.finish()?;
    if let Some(goal) = goal {
        graph.attrs.insert(ATTR_GOAL.to_string(), goal);
    }
    Ok((graph, warnings))
}

/// Node labels joined by `"; "` in deterministic topological order.
pub fn flatten_for_text_metrics(g: &LabeledGraph) -> Result<String, GraphError> {
    let order = topological_order(g)?;
    let labels: Vec<&str> = order
        .iter()
        .map(|id| g.label_of(id).unwrap_or(id))
        .collect();
    Ok(labels.join("; "))
}
