//! Independent oracles and fixtures shared by the integration targets.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use std::path::PathBuf;

use graphcode::client::Sleeper;
use graphcode::codec::CodeFormat;
use graphcode::graph::{normalize_label, LabeledGraph, TaskInstance};
use graphcode::pyparse::{CodeAst, Stmt};
use graphcode::samples;

/// Edit cost of one explicit alignment, recomputed from scratch: unmatched
/// nodes and edges without an image are deleted, the rest of g2 inserted.
pub fn alignment_cost(g1: &LabeledGraph, g2: &LabeledGraph, map: &[Option<usize>]) -> usize {
    let idx = |g: &LabeledGraph, id: &str| g.nodes.iter().position(|n| n.id == id).unwrap();
    let e1: BTreeSet<(usize, usize)> = g1
        .edges
        .iter()
        .map(|e| (idx(g1, &e.src), idx(g1, &e.dst)))
        .collect();
    let e2: BTreeSet<(usize, usize)> = g2
        .edges
        .iter()
        .map(|e| (idx(g2, &e.src), idx(g2, &e.dst)))
        .collect();
    let image: BTreeSet<(usize, usize)> = e1
        .iter()
        .filter_map(|(s, d)| Some((map[*s]?, map[*d]?)))
        .collect();
    let kept = image.intersection(&e2).count();
    let matched = map.iter().flatten().count();
    (g1.nodes.len() - matched) + (g2.nodes.len() - matched) + (e1.len() - kept) + (e2.len() - kept)
}

pub fn brute_force_ged(g1: &LabeledGraph, g2: &LabeledGraph) -> usize {
    fn go(
        i: usize,
        g1: &LabeledGraph,
        g2: &LabeledGraph,
        map: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        best: &mut usize,
    ) {
        if i == g1.nodes.len() {
            *best = (*best).min(alignment_cost(g1, g2, map));
            return;
        }
        map.push(None);
        go(i + 1, g1, g2, map, used, best);
        map.pop();
        for j in 0..g2.nodes.len() {
            if !used[j]
                && normalize_label(&g1.nodes[i].label) == normalize_label(&g2.nodes[j].label)
            {
                used[j] = true;
                map.push(Some(j));
                go(i + 1, g1, g2, map, used, best);
                map.pop();
                used[j] = false;
            }
        }
    }
    let mut best = usize::MAX;
    go(
        0,
        g1,
        g2,
        &mut Vec::new(),
        &mut vec![false; g2.nodes.len()],
        &mut best,
    );
    best
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

pub fn brute_force_iso(g1: &LabeledGraph, g2: &LabeledGraph) -> bool {
    let idx = |g: &LabeledGraph, id: &str| g.nodes.iter().position(|n| n.id == id).unwrap();
    let e1: BTreeSet<(usize, usize)> = g1
        .edges
        .iter()
        .map(|e| (idx(g1, &e.src), idx(g1, &e.dst)))
        .collect();
    let e2: BTreeSet<(usize, usize)> = g2
        .edges
        .iter()
        .map(|e| (idx(g2, &e.src), idx(g2, &e.dst)))
        .collect();
    g1.nodes.len() == g2.nodes.len()
        && permutations(g1.nodes.len()).iter().any(|p| {
            e1.iter()
                .map(|(s, d)| (p[*s], p[*d]))
                .collect::<BTreeSet<_>>()
                == e2
        })
}

pub fn permuted(g: &LabeledGraph, perm: &[usize]) -> LabeledGraph {
    let labels: Vec<String> = (0..g.nodes.len())
        .map(|i| format!("v{}", perm[i]))
        .collect();
    let idx = |id: &str| g.nodes.iter().position(|n| n.id == id).unwrap();
    let edges: Vec<(usize, Option<&str>, usize)> = g
        .edges
        .iter()
        .map(|e| (idx(&e.src), None, idx(&e.dst)))
        .collect();
    LabeledGraph::from_labels(&labels, &edges)
}

#[derive(Clone, Default)]
pub struct FakeSleeper(pub Arc<Mutex<Vec<Duration>>>);

impl Sleeper for FakeSleeper {
    fn sleep(&self, d: Duration) {
        self.0.lock().unwrap().push(d);
    }
}

/// Serves one scripted `(status, body)` per connection and records each
/// request body.
pub fn serve(script: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    std::thread::spawn(move || {
        for (status, body) in script {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(String::from_utf8(buf).unwrap());
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

pub fn ok_body(text: &str) -> String {
    serde_json::json!({"choices": [{"text": text}], "usage": {"prompt_tokens": 3}}).to_string()
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("golden")
}

pub fn cases() -> Vec<(&'static str, TaskInstance, CodeFormat)> {
    vec![
        ("script_tree.py", samples::potpie(), CodeFormat::ScriptTree),
        ("dot_digraph.dot", samples::potpie(), CodeFormat::DotDigraph),
        ("edge_list.txt", samples::potpie(), CodeFormat::EdgeListText),
        (
            "script_literal.py",
            samples::video_game(),
            CodeFormat::ScriptLiteral,
        ),
        (
            "script_networkx.py",
            samples::video_game(),
            CodeFormat::ScriptNetworkXStyle,
        ),
        (
            "expl_literal.py",
            samples::factory_farming(),
            CodeFormat::ExplLiteral,
        ),
        (
            "expl_relation.py",
            samples::cannabis(),
            CodeFormat::ExplRelation,
        ),
        ("expl_tree.py", samples::cannabis(), CodeFormat::ExplTree),
        (
            "propara_functions.py",
            samples::photosynthesis(),
            CodeFormat::ProparaFunctions,
        ),
    ]
}

pub fn count_stmts(stmts: &[Stmt]) -> usize {
    stmts
        .iter()
        .map(|s| match s {
            Stmt::Def(f) => 1 + count_stmts(&f.body),
            _ => 1,
        })
        .sum()
}

/// `classes functions statements` for a parsed file.
pub fn ast_counts(ast: &CodeAst) -> String {
    let methods: usize = ast.classes.iter().map(|c| c.methods.len()).sum();
    let stmts: usize = ast
        .classes
        .iter()
        .map(|c| {
            c.attributes.len()
                + count_stmts(&c.methods.iter().cloned().map(Stmt::Def).collect::<Vec<_>>())
        })
        .sum::<usize>()
        + count_stmts(
            &ast.functions
                .iter()
                .cloned()
                .map(Stmt::Def)
                .collect::<Vec<_>>(),
        )
        + count_stmts(&ast.statements);
    format!(
        "classes={} methods={} functions={} statements={}",
        ast.classes.len(),
        methods,
        ast.functions.len(),
        stmts
    )
}
