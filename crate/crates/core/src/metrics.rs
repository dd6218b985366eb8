//! Evaluation metrics for predicted graphs and entity traces.
//!
//! Node identity across graphs is label-based: two nodes correspond iff
//! their normalized labels are equal. Relations take part in edge identity
//! only when both graphs are typed.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    is_dag, is_weakly_connected, normalize_label, require_scorable, EntityTrace, GraphError,
    LabeledGraph, StateValue,
};

/// Above this many nodes (both graphs together) GED falls back to greedy.
pub const GED_EXACT_NODE_LIMIT: usize = 24;
pub const ISO_NODE_LIMIT: usize = 12;
/// Largest side for which the edge assignment is solved exactly.
pub const EXACT_ASSIGNMENT_LIMIT: usize = 12;
/// Search states expanded before exact GED gives up and goes greedy.
const GED_EXPANSION_BUDGET: usize = 200_000;

const STOPWORDS_TEXT: &str = include_str!("stopwords.txt");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("graph has {nodes} nodes; the exact check supports at most {limit}")]
    SizeLimitExceeded { nodes: usize, limit: usize },
    #[error("traces differ in shape: {0}")]
    ShapeMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub instance_id: String,
    pub metric: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub aux: BTreeMap<String, f64>,
}

impl MetricRecord {
    pub fn new(instance_id: impl Into<String>, metric: impl Into<String>, value: f64) -> Self {
        MetricRecord {
            instance_id: instance_id.into(),
            metric: metric.into(),
            value,
            aux: BTreeMap::new(),
        }
    }

    pub fn with_aux(mut self, key: &str, value: f64) -> Self {
        self.aux.insert(key.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_pr(p: f64, r: f64) -> Self {
        let f1 = if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        };
        Prf { p, r, f1 }
    }

    fn from_counts(hits: f64, predicted: usize, gold: usize) -> Self {
        let p = if predicted == 0 {
            0.0
        } else {
            hits / predicted as f64
        };
        let r = if gold == 0 { 0.0 } else { hits / gold as f64 };
        Prf::from_pr(p, r)
    }
}

pub type EdgeKey = (String, Option<String>, String);

/// Normalized `(src label, relation, dst label)` triples. The relation is
/// kept only when `typed` is set.
pub fn edge_set(g: &LabeledGraph, typed: bool) -> BTreeSet<EdgeKey> {
    let labels: HashMap<&str, String> = g
        .nodes
        .iter()
        .map(|n| (n.id.as_str(), normalize_label(&n.label)))
        .collect();
    let name = |id: &str| {
        labels
            .get(id)
            .cloned()
            .unwrap_or_else(|| normalize_label(id))
    };
    g.edges
        .iter()
        .map(|e| {
            let rel = if typed {
                e.relation.as_deref().map(normalize_label)
            } else {
                None
            };
            (name(&e.src), rel, name(&e.dst))
        })
        .collect()
}

/// Edge sets of two graphs under a shared typing decision.
pub fn comparable_edges(
    gold: &LabeledGraph,
    pred: &LabeledGraph,
) -> (BTreeSet<EdgeKey>, BTreeSet<EdgeKey>) {
    let typed = gold.is_typed() && pred.is_typed();
    (edge_set(gold, typed), edge_set(pred, typed))
}

pub fn edge_prf<T: Ord>(gold: &BTreeSet<T>, pred: &BTreeSet<T>) -> Prf {
    let hits = gold.intersection(pred).count();
    Prf::from_counts(hits as f64, pred.len(), gold.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ged {
    pub raw: usize,
    pub normalized: f64,
    /// False when the size bound forced the greedy upper bound.
    pub exact: bool,
}

/// Index-based view used by GED: node labels plus a deduplicated edge set.
struct Indexed {
    labels: Vec<String>,
    edges: HashSet<(usize, Option<String>, usize)>,
    out: Vec<Vec<(usize, Option<String>)>>,
}

impl Indexed {
    fn new(g: &LabeledGraph, typed: bool) -> Self {
        let index: HashMap<&str, usize> = g
            .nodes
            .iter()
            .enumerate()
            .rev()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        let labels: Vec<String> = g.nodes.iter().map(|n| normalize_label(&n.label)).collect();
        let mut edges = HashSet::new();
        let mut out = vec![Vec::new(); labels.len()];
        for e in &g.edges {
            let (Some(&s), Some(&d)) = (index.get(e.src.as_str()), index.get(e.dst.as_str()))
            else {
                continue;
            };
            let rel = if typed {
                e.relation.as_deref().map(normalize_label)
            } else {
                None
            };
            if edges.insert((s, rel.clone(), d)) {
                out[s].push((d, rel));
            }
        }
        Indexed { labels, edges, out }
    }
}

#[derive(PartialEq, Eq)]
struct SearchState {
    /// Upper bound on `matched nodes + kept edges` reachable from here.
    bound: usize,
    gain: usize,
    map: Vec<Option<usize>>,
}

impl Ord for SearchState {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .cmp(&other.bound)
            .then(self.map.len().cmp(&other.map.len()))
            .then(self.gain.cmp(&other.gain))
    }
}

impl PartialOrd for SearchState {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimum number of node/edge insertions and deletions turning `g1` into
/// `g2`. Nodes may only be matched to nodes with the same normalized label.
pub fn graph_edit_distance(g1: &LabeledGraph, g2: &LabeledGraph) -> Result<Ged, MetricError> {
    require_scorable(g1)?;
    require_scorable(g2)?;
    let typed = g1.is_typed() && g2.is_typed();
    let a = Indexed::new(g1, typed);
    let b = Indexed::new(g2, typed);
    let total = a.labels.len() + a.edges.len() + b.labels.len() + b.edges.len();
    let (gain, exact) = if a.labels.len() + b.labels.len() <= GED_EXACT_NODE_LIMIT {
        match best_alignment(&a, &b) {
            Some(gain) => (gain, true),
            None => (greedy_alignment_gain(&a, &b), false),
        }
    } else {
        (greedy_alignment_gain(&a, &b), false)
    };
    let raw = total - 2 * gain;
    let normalized = if total == 0 {
        0.0
    } else {
        raw as f64 / total as f64
    };
    Ok(Ged {
        raw,
        normalized,
        exact,
    })
}

/// Edges joining `node` to itself or to an earlier node of `a` that
/// survive under `map`: both endpoints matched and the image edge in `b`.
fn kept_edges_at(a: &Indexed, b: &Indexed, map: &[Option<usize>], node: usize) -> usize {
    let Some(v) = map[node] else { return 0 };
    let mut kept = 0;
    for (d, rel) in &a.out[node] {
        if *d < map.len() && *d != node {
            if let Some(w) = map[*d] {
                kept += usize::from(b.edges.contains(&(v, rel.clone(), w)));
            }
        }
    }
    for (u, slot) in map.iter().enumerate().take(node) {
        let Some(w) = *slot else { continue };
        for (d, rel) in &a.out[u] {
            if *d == node {
                kept += usize::from(b.edges.contains(&(w, rel.clone(), v)));
            }
        }
    }
    for (d, rel) in &a.out[node] {
        if *d == node {
            kept += usize::from(b.edges.contains(&(v, rel.clone(), v)));
        }
    }
    kept
}

/// Optimistic gain from assigning nodes `from..`: every remaining node
/// matched where a same-label partner is still free, and every edge touching
/// a remaining node kept, capped by what `b` can still host.
fn remaining_bound(
    a: &Indexed,
    b: &Indexed,
    map: &[Option<usize>],
    label_free: &HashMap<&str, usize>,
) -> usize {
    let from = map.len();
    let mut want: HashMap<&str, usize> = HashMap::new();
    for l in &a.labels[from..] {
        *want.entry(l.as_str()).or_insert(0) += 1;
    }
    let nodes: usize = want
        .iter()
        .map(|(l, n)| (*n).min(label_free.get(l).copied().unwrap_or(0)))
        .sum();
    let open_edges = a
        .edges
        .iter()
        .filter(|(s, _, d)| *s >= from || *d >= from)
        .count();
    let used_b: HashSet<usize> = map.iter().flatten().copied().collect();
    let b_open = b
        .edges
        .iter()
        .filter(|(s, _, d)| !used_b.contains(s) || !used_b.contains(d))
        .count();
    nodes + open_edges.min(b_open)
}

/// Exact best-first search over label-respecting partial injections.
/// Returns the maximal `matched nodes + kept edges`, or `None` when the
/// expansion budget runs out.
fn best_alignment(a: &Indexed, b: &Indexed) -> Option<usize> {
    let n = a.labels.len();
    let mut by_label: HashMap<&str, Vec<usize>> = HashMap::new();
    for (j, l) in b.labels.iter().enumerate() {
        by_label.entry(l.as_str()).or_default().push(j);
    }
    let free_counts = |map: &[Option<usize>]| {
        let used: HashSet<usize> = map.iter().flatten().copied().collect();
        let mut free: HashMap<&str, usize> = HashMap::new();
        for (j, l) in b.labels.iter().enumerate() {
            if !used.contains(&j) {
                *free.entry(l.as_str()).or_insert(0) += 1;
            }
        }
        free
    };
    let mut heap = BinaryHeap::new();
    let start: Vec<Option<usize>> = Vec::new();
    heap.push(SearchState {
        bound: remaining_bound(a, b, &start, &free_counts(&start)),
        gain: 0,
        map: start,
    });
    let mut expanded = 0;
    while let Some(state) = heap.pop() {
        if state.map.len() == n {
            return Some(state.gain);
        }
        expanded += 1;
        if expanded > GED_EXPANSION_BUDGET {
            return None;
        }
        let i = state.map.len();
        let used: HashSet<usize> = state.map.iter().flatten().copied().collect();
        let mut options: Vec<Option<usize>> = by_label
            .get(a.labels[i].as_str())
            .map(|js| {
                js.iter()
                    .filter(|j| !used.contains(j))
                    .map(|&j| Some(j))
                    .collect()
            })
            .unwrap_or_default();
        options.push(None);
        for choice in options {
            let mut map = state.map.clone();
            map.push(choice);
            let gain = state.gain + usize::from(choice.is_some()) + kept_edges_at(a, b, &map, i);
            let bound = gain + remaining_bound(a, b, &map, &free_counts(&map));
            heap.push(SearchState { bound, gain, map });
        }
    }
    Some(0)
}

/// Maps each node of `a` to the first free same-label node of `b`.
fn greedy_alignment_gain(a: &Indexed, b: &Indexed) -> usize {
    let mut used = HashSet::new();
    let mut map = Vec::with_capacity(a.labels.len());
    let mut gain = 0;
    for (i, l) in a.labels.iter().enumerate() {
        let choice = (0..b.labels.len()).find(|j| !used.contains(j) && b.labels[*j] == *l);
        if let Some(j) = choice {
            used.insert(j);
        }
        map.push(choice);
        gain += usize::from(choice.is_some()) + kept_edges_at(a, b, &map, i);
    }
    gain
}

/// Structure-only isomorphism (labels and relations ignored).
pub fn is_isomorphic(g1: &LabeledGraph, g2: &LabeledGraph) -> Result<bool, MetricError> {
    require_scorable(g1)?;
    require_scorable(g2)?;
    for g in [g1, g2] {
        if g.nodes.len() > ISO_NODE_LIMIT {
            return Err(MetricError::SizeLimitExceeded {
                nodes: g.nodes.len(),
                limit: ISO_NODE_LIMIT,
            });
        }
    }
    let a = Indexed::new(g1, false);
    let b = Indexed::new(g2, false);
    let n = a.labels.len();
    if n != b.labels.len() || a.edges.len() != b.edges.len() {
        return Ok(false);
    }
    let degrees = |g: &Indexed| {
        let mut d = vec![(0usize, 0usize, false); g.labels.len()];
        for (s, _, t) in &g.edges {
            d[*s].0 += 1;
            d[*t].1 += 1;
            if s == t {
                d[*s].2 = true;
            }
        }
        d
    };
    let (da, db) = (degrees(&a), degrees(&b));
    let mut sa = da.clone();
    let mut sb = db.clone();
    sa.sort_unstable();
    sb.sort_unstable();
    if sa != sb {
        return Ok(false);
    }
    let adj = |g: &Indexed| {
        let mut m = vec![vec![false; g.labels.len()]; g.labels.len()];
        for (s, _, t) in &g.edges {
            m[*s][*t] = true;
        }
        m
    };
    let (ma, mb) = (adj(&a), adj(&b));
    // Most constrained nodes first.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(da[i].0 + da[i].1));
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    Ok(iso_extend(
        0, &order, &ma, &mb, &da, &db, &mut map, &mut used,
    ))
}

#[allow(clippy::too_many_arguments)]
fn iso_extend(
    depth: usize,
    order: &[usize],
    ma: &[Vec<bool>],
    mb: &[Vec<bool>],
    da: &[(usize, usize, bool)],
    db: &[(usize, usize, bool)],
    map: &mut [usize],
    used: &mut [bool],
) -> bool {
    if depth == order.len() {
        return true;
    }
    let u = order[depth];
    for v in 0..mb.len() {
        if used[v] || da[u] != db[v] {
            continue;
        }
        let consistent = order[..depth].iter().all(|&w| {
            let x = map[w];
            ma[u][w] == mb[v][x] && ma[w][u] == mb[x][v]
        });
        if !consistent {
            continue;
        }
        map[u] = v;
        used[v] = true;
        if iso_extend(depth + 1, order, ma, mb, da, db, map, used) {
            return true;
        }
        used[v] = false;
        map[u] = usize::MAX;
    }
    false
}

pub fn stopwords() -> HashSet<&'static str> {
    STOPWORDS_TEXT.split_whitespace().collect()
}

fn content_tokens(text: &str, stop: &HashSet<&str>) -> HashSet<String> {
    normalize_label(text)
        .split_whitespace()
        .filter(|t| !stop.contains(t))
        .map(str::to_string)
        .collect()
}

/// Connected DAG with at least two nodes drawing on the belief and two on
/// the argument (a node may count for both).
pub fn structural_accuracy(
    g: &LabeledGraph,
    belief: &str,
    argument: &str,
) -> Result<bool, MetricError> {
    require_scorable(g)?;
    if !is_weakly_connected(g) || !is_dag(g)? {
        return Ok(false);
    }
    let stop = stopwords();
    let anchored = |text: &str| {
        let concept = content_tokens(text, &stop);
        g.nodes
            .iter()
            .filter(|n| !content_tokens(&n.label, &stop).is_disjoint(&concept))
            .count()
    };
    Ok(anchored(belief) >= 2 && anchored(argument) >= 2)
}

/// Similarity between two edges rendered as `"src relation dst"` text.
pub trait EdgeSimilarity {
    fn score(&self, a: &str, b: &str) -> f64;
}

impl<F: Fn(&str, &str) -> f64> EdgeSimilarity for F {
    fn score(&self, a: &str, b: &str) -> f64 {
        self(a, b)
    }
}

/// Token-level F1 between normalized texts (multiset overlap).
#[derive(Debug, Clone, Copy, Default)]
pub struct TokenF1;

impl EdgeSimilarity for TokenF1 {
    fn score(&self, a: &str, b: &str) -> f64 {
        let (ta, tb) = (normalize_label(a), normalize_label(b));
        let (ta, tb): (Vec<&str>, Vec<&str>) = (
            ta.split_whitespace().collect(),
            tb.split_whitespace().collect(),
        );
        if ta.is_empty() || tb.is_empty() {
            return 0.0;
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in &tb {
            *counts.entry(t).or_insert(0) += 1;
        }
        let mut overlap = 0;
        for t in &ta {
            if let Some(c) = counts.get_mut(t) {
                if *c > 0 {
                    *c -= 1;
                    overlap += 1;
                }
            }
        }
        Prf::from_counts(overlap as f64, ta.len(), tb.len()).f1
    }
}

/// 1 for equal normalized texts, 0 otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactMatch;

impl EdgeSimilarity for ExactMatch {
    fn score(&self, a: &str, b: &str) -> f64 {
        f64::from(u8::from(normalize_label(a) == normalize_label(b)))
    }
}

pub fn edge_text((s, rel, d): &EdgeKey) -> String {
    match rel {
        Some(r) => format!("{s} {r} {d}"),
        None => format!("{s} {d}"),
    }
}

/// Matching-based edge overlap: the best one-to-one pairing of predicted
/// and gold edges under `sim`, normalized by each side's size.
pub fn g_overlap_score(gold: &[String], pred: &[String], sim: &dyn EdgeSimilarity) -> Prf {
    if gold.is_empty() || pred.is_empty() {
        return Prf::default();
    }
    let weights: Vec<Vec<f64>> = pred
        .iter()
        .map(|p| gold.iter().map(|g| sim.score(p, g)).collect())
        .collect();
    let total = if pred.len().max(gold.len()) <= EXACT_ASSIGNMENT_LIMIT {
        max_weight_assignment(&weights).1
    } else {
        greedy_assignment(&weights)
    };
    Prf::from_counts(total, pred.len(), gold.len())
}

/// Maximum-weight one-to-one assignment on a rectangular matrix of
/// non-negative weights (Hungarian method on the padded square cost
/// matrix). Returns the row→column pairs and their total weight.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> (Vec<(usize, usize)>, f64) {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    let n = rows.max(cols);
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let max_w = weights.iter().flatten().copied().fold(0.0f64, f64::max);
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            max_w - weights[i][j]
        } else {
            max_w
        }
    };
    // Potentials-based O(n^3) Hungarian algorithm, 1-indexed.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs = Vec::new();
    let mut total = 0.0;
    for (c, &row) in p.iter().enumerate().skip(1).map(|(j, r)| (j - 1, r)) {
        let i = row - 1;
        if i < rows && c < cols {
            pairs.push((i, c));
            total += weights[i][c];
        }
    }
    pairs.sort_unstable();
    (pairs, total)
}

/// Repeatedly takes the heaviest remaining cell whose row and column are free.
fn greedy_assignment(weights: &[Vec<f64>]) -> f64 {
    let mut cells: Vec<(f64, usize, usize)> = weights
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &w)| (w, i, j)))
        .collect();
    cells.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let (mut rows, mut cols) = (HashSet::new(), HashSet::new());
    let mut total = 0.0;
    for (w, i, j) in cells {
        if rows.contains(&i) || cols.contains(&j) {
            continue;
        }
        rows.insert(i);
        cols.insert(j);
        total += w;
    }
    total
}

fn tokens(text: &str) -> Vec<String> {
    normalize_label(text)
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence BLEU-4. Orders 2..4 with no matches use (0 + 1) / (total + 1);
/// unigram precision is never smoothed.
pub fn bleu(candidate: &str, reference: &str) -> f64 {
    let (c, r) = (tokens(candidate), tokens(reference));
    if c.is_empty() && r.is_empty() {
        return 1.0;
    }
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let (cand, refc) = (ngram_counts(&c, n), ngram_counts(&r, n));
        let total: usize = cand.values().sum();
        let matched: usize = cand
            .iter()
            .map(|(g, k)| (*k).min(refc.get(g).copied().unwrap_or(0)))
            .sum();
        let precision = match (n, matched) {
            (1, 0) => return 0.0,
            (1, m) => m as f64 / total as f64,
            (_, 0) => 1.0 / (total as f64 + 1.0),
            (_, m) => m as f64 / total as f64,
        };
        log_sum += precision.ln();
    }
    let (cl, rl) = (c.len() as f64, r.len() as f64);
    let bp = if cl < rl { (1.0 - rl / cl).exp() } else { 1.0 };
    bp * (log_sum / 4.0).exp()
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    for x in a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        prev = cur;
    }
    prev[b.len()]
}

/// ROUGE-L F-measure over whitespace tokens of the normalized texts.
pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let (c, r) = (tokens(candidate), tokens(reference));
    if c.is_empty() && r.is_empty() {
        return 1.0;
    }
    let lcs = lcs_len(&c, &r) as f64;
    Prf::from_counts(lcs, c.len(), r.len()).f1
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Create {
        step: usize,
        entity: String,
        to: String,
    },
    Destroy {
        step: usize,
        entity: String,
        from: String,
    },
    Move {
        step: usize,
        entity: String,
        from: String,
        to: String,
    },
}

const UNKNOWN_LOCATION: &str = "?";

fn location(s: &StateValue) -> String {
    match s {
        StateValue::Known(l) => normalize_label(l),
        _ => UNKNOWN_LOCATION.to_string(),
    }
}

/// Create/Destroy/Move events from consecutive state rows.
pub fn derive_events(trace: &EntityTrace) -> BTreeSet<Event> {
    let mut events = BTreeSet::new();
    for (k, entity) in trace.entities().iter().enumerate() {
        let entity = normalize_label(entity);
        for step in 1..trace.states().len() {
            let (before, after) = (trace.state(step - 1, k), trace.state(step, k));
            let event = match (before.exists(), after.exists()) {
                (false, false) => None,
                (false, true) => Some(Event::Create {
                    step,
                    entity: entity.clone(),
                    to: location(after),
                }),
                (true, false) => Some(Event::Destroy {
                    step,
                    entity: entity.clone(),
                    from: location(before),
                }),
                (true, true) => {
                    let (from, to) = (location(before), location(after));
                    (from != to).then(|| Event::Move {
                        step,
                        entity: entity.clone(),
                        from,
                        to,
                    })
                }
            };
            events.extend(event);
        }
    }
    events
}

/// Event-level P/R/F1 of a predicted trace against the gold trace.
pub fn propara_prf(gold: &EntityTrace, pred: &EntityTrace) -> Result<Prf, MetricError> {
    if gold.actions().len() != pred.actions().len() {
        return Err(MetricError::ShapeMismatch(format!(
            "{} gold actions vs {} predicted",
            gold.actions().len(),
            pred.actions().len()
        )));
    }
    if gold.entities().len() != pred.entities().len() {
        return Err(MetricError::ShapeMismatch(format!(
            "{} gold entities vs {} predicted",
            gold.entities().len(),
            pred.entities().len()
        )));
    }
    Ok(edge_prf(&derive_events(gold), &derive_events(pred)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    fn set(edges: &[(&str, &str)]) -> BTreeSet<EdgeKey> {
        edges
            .iter()
            .map(|(a, b)| (a.to_string(), None, b.to_string()))
            .collect()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn edge_prf_examples() {
        let e = set(&[("a", "b"), ("b", "c")]);
        assert_eq!(
            edge_prf(&e, &e),
            Prf {
                p: 1.0,
                r: 1.0,
                f1: 1.0
            }
        );
        let got = edge_prf(&e, &set(&[("a", "b"), ("a", "c")]));
        assert_eq!(
            got,
            Prf {
                p: 0.5,
                r: 0.5,
                f1: 0.5
            }
        );
        assert_eq!(edge_prf(&e, &BTreeSet::new()), Prf::default());
    }

    #[test]
    fn ged_examples() {
        let g = samples::potpie_graph();
        let d = graph_edit_distance(&g, &g).unwrap();
        assert_eq!((d.raw, d.normalized, d.exact), (0, 0.0, true));
        let mut h = g.clone();
        h.add_edge(crate::graph::Edge::new(
            g.nodes[0].id.clone(),
            g.nodes[5].id.clone(),
        ));
        let d = graph_edit_distance(&g, &h).unwrap();
        let denom = 2 * g.nodes.len() + 2 * g.edges.len() + 1;
        assert_eq!(d.raw, 1);
        assert!(close(d.normalized, 1.0 / denom as f64));
        let empty = LabeledGraph::new();
        assert_eq!(graph_edit_distance(&empty, &empty).unwrap().normalized, 0.0);
    }

    #[test]
    fn relabel_costs_two() {
        let a = LabeledGraph::from_labels(&["x"], &[]);
        let b = LabeledGraph::from_labels(&["y"], &[]);
        assert_eq!(graph_edit_distance(&a, &b).unwrap().raw, 2);
    }

    #[test]
    fn iso_examples() {
        let chain = LabeledGraph::from_labels(&["a", "b", "c"], &[(0, None, 1), (1, None, 2)]);
        let perm = LabeledGraph::from_labels(&["q", "r", "s"], &[(2, None, 0), (0, None, 1)]);
        assert!(is_isomorphic(&chain, &perm).unwrap());
        let tri = LabeledGraph::from_labels(
            &["a", "b", "c"],
            &[(0, None, 1), (1, None, 2), (0, None, 2)],
        );
        assert!(!is_isomorphic(&chain, &tri).unwrap());
        let big =
            LabeledGraph::from_labels(&(0..13).map(|i| format!("n{i}")).collect::<Vec<_>>(), &[]);
        assert!(matches!(
            is_isomorphic(&big, &big),
            Err(MetricError::SizeLimitExceeded { nodes: 13, .. })
        ));
    }

    #[test]
    fn stca_examples() {
        let x = samples::factory_farming();
        let crate::graph::TaskInput::Explanation {
            belief, argument, ..
        } = &x.input
        else {
            unreachable!()
        };
        let g = x.gold_graph().unwrap().clone();
        assert!(structural_accuracy(&g, belief, argument).unwrap());
        let mut cyclic = g.clone();
        // reversing factory farming -> necessary closes a cycle through food
        cyclic.edges[1] =
            crate::graph::Edge::typed(g.nodes[3].id.clone(), "has context", g.nodes[0].id.clone());
        assert!(!structural_accuracy(&cyclic, belief, argument).unwrap());
        let split = LabeledGraph::from_labels(
            &["factory farming", "banned", "millions", "factory"],
            &[(0, Some("causes"), 1), (2, Some("causes"), 3)],
        );
        assert!(!structural_accuracy(&split, belief, argument).unwrap());
    }

    #[test]
    fn stopword_list_has_fifty_entries() {
        assert_eq!(stopwords().len(), 50);
    }

    #[test]
    fn g_overlap_examples() {
        let e = vec!["a causes b".to_string(), "b desires c".to_string()];
        assert_eq!(
            g_overlap_score(&e, &e, &TokenF1),
            Prf {
                p: 1.0,
                r: 1.0,
                f1: 1.0
            }
        );
        let other = vec!["x y z".to_string()];
        assert_eq!(g_overlap_score(&e, &other, &TokenF1), Prf::default());
    }

    #[test]
    fn assignment_matches_permutations() {
        let w = vec![
            vec![0.9, 0.1, 0.4],
            vec![0.8, 0.7, 0.0],
            vec![0.3, 0.6, 0.5],
        ];
        let perms = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let best = perms
            .iter()
            .map(|p| (0..3).map(|i| w[i][p[i]]).sum::<f64>())
            .fold(0.0, f64::max);
        assert!(close(max_weight_assignment(&w).1, best));
    }

    #[test]
    fn bleu_examples() {
        assert!(close(bleu("a b c d", "a b c d"), 1.0));
        assert_eq!(bleu("x y", "a b"), 0.0);
        let expected = (0.75f64 * (2.0 / 3.0) * 0.5 * 0.5).powf(0.25);
        assert!(close(bleu("a b c d", "a b c e"), expected));
    }

    #[test]
    fn rouge_examples() {
        assert!(close(rouge_l("a b", "a b"), 1.0));
        assert_eq!(rouge_l("x", "y"), 0.0);
        assert!(close(rouge_l("a b c", "a c"), 0.8));
    }

    #[test]
    fn events_for_photosynthesis() {
        let x = samples::photosynthesis();
        let events = derive_events(x.gold_trace().unwrap());
        let water: Vec<_> = events
            .iter()
            .filter(|e| matches!(e, Event::Move { entity, .. } if entity == "water"))
            .cloned()
            .collect();
        assert_eq!(
            water,
            vec![
                Event::Move {
                    step: 1,
                    entity: "water".into(),
                    from: "soil".into(),
                    to: "roots".into()
                },
                Event::Move {
                    step: 2,
                    entity: "water".into(),
                    from: "roots".into(),
                    to: "leaf".into()
                },
            ]
        );
        assert!(events.contains(&Event::Create {
            step: 1,
            entity: "co2".into(),
            to: "?".into()
        }));
        assert!(!events.iter().any(|e| matches!(e, Event::Move { entity, .. } | Event::Create { entity, .. } | Event::Destroy { entity, .. } if entity == "light")));
    }

    #[test]
    fn propara_shape_mismatch() {
        let x = samples::photosynthesis();
        let t = x.gold_trace().unwrap();
        let other = EntityTrace::new(
            vec!["a".into()],
            vec!["w".into()],
            vec![vec![StateValue::Unknown]; 2],
        )
        .unwrap();
        assert!(matches!(
            propara_prf(t, &other),
            Err(MetricError::ShapeMismatch(_))
        ));
        assert_eq!(
            propara_prf(t, t).unwrap(),
            Prf {
                p: 1.0,
                r: 1.0,
                f1: 1.0
            }
        );
    }
}
