use std::collections::HashSet;

use graphcode::codec::{completion_suffix, decode, encode, make_stub, CodeFormat, SourceText};
use graphcode::graph::{
    normalize_label, sanitize_identifier, EntityTrace, LabeledGraph, StateValue, Structure,
    TaskInput, TaskInstance, TaskKind,
};
use proptest::prelude::*;

const RELATIONS: [&str; 6] = [
    "causes",
    "has context",
    "desires",
    "not desires",
    "capable of",
    "synonym of",
];

fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => "[a-z]{3,8}",
        1 => prop::sample::select(vec!["begin", "end", "class", "def", "return", "node", "init", "the"]).prop_map(String::from),
    ]
}

fn phrase() -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 1..4).prop_map(|w| w.join(" "))
}

/// Labels that stay distinct after sanitization and normalization.
fn labels(range: std::ops::Range<usize>) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(phrase(), range)
        .prop_map(|raw| {
            let mut seen = HashSet::new();
            raw.into_iter()
                .filter(|l| {
                    seen.insert(sanitize_identifier(l).unwrap()) && normalize_label(l) == *l
                })
                .collect::<Vec<_>>()
        })
        .prop_filter("need a node", |v| !v.is_empty())
}

/// A random DAG: edges only go forward in a shuffled order.
fn dag(typed: bool) -> impl Strategy<Value = LabeledGraph> {
    (
        labels(1..10),
        prop::collection::vec((0usize..100, 0usize..100, 0usize..6), 0..20),
        any::<u64>(),
    )
        .prop_map(move |(labels, pairs, salt)| {
            let n = labels.len();
            let mut order: Vec<usize> = (0..n).collect();
            order.rotate_left((salt as usize) % n);
            let mut edges = Vec::new();
            let mut seen = HashSet::new();
            for (a, b, r) in pairs {
                let (a, b) = (a % n, b % n);
                if a == b {
                    continue;
                }
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                let (s, d) = (order[lo], order[hi]);
                if seen.insert((s, d)) {
                    edges.push((s, if typed { Some(RELATIONS[r]) } else { None }, d));
                }
            }
            LabeledGraph::from_labels(&labels, &edges)
        })
}

fn script_instance(edge_prediction: bool) -> impl Strategy<Value = TaskInstance> {
    (phrase(), dag(false)).prop_map(move |(goal, g)| {
        let (task, input) = if edge_prediction {
            (
                TaskKind::EdgePrediction,
                TaskInput::EdgePrediction {
                    goal,
                    nodes: g.nodes.clone(),
                },
            )
        } else {
            (TaskKind::ScriptGen, TaskInput::Script { goal })
        };
        TaskInstance::new("x", task, input, Some(Structure::Graph(g))).unwrap()
    })
}

fn expl_instance() -> impl Strategy<Value = TaskInstance> {
    (
        phrase(),
        phrase(),
        prop::sample::select(vec!["support", "counter"]),
        dag(true),
    )
        .prop_map(|(belief, argument, stance, g)| {
            let input = TaskInput::Explanation {
                belief,
                argument,
                stance: stance.into(),
            };
            TaskInstance::new("x", TaskKind::ExplGraph, input, Some(Structure::Graph(g))).unwrap()
        })
}

fn cell() -> impl Strategy<Value = StateValue> {
    prop_oneof![
        Just(StateValue::NonExistent),
        Just(StateValue::Unknown),
        phrase().prop_map(StateValue::Known),
    ]
}

fn trace_instance() -> impl Strategy<Value = TaskInstance> {
    (prop::collection::vec(phrase(), 1..6), labels(1..5))
        .prop_flat_map(|(actions, entities)| {
            let rows = prop::collection::vec(
                prop::collection::vec(cell(), entities.len()),
                actions.len() + 1,
            );
            (Just(actions), Just(entities), rows)
        })
        .prop_map(|(actions, entities, states)| {
            let trace = EntityTrace::new(actions.clone(), entities.clone(), states).unwrap();
            let input = TaskInput::Entities { actions, entities };
            TaskInstance::new(
                "x",
                TaskKind::EntityTracking,
                input,
                Some(Structure::Trace(trace)),
            )
            .unwrap()
        })
}

fn any_instance() -> impl Strategy<Value = TaskInstance> {
    prop_oneof![
        script_instance(false),
        script_instance(true),
        expl_instance(),
        trace_instance()
    ]
}

fn same(a: &Structure, b: &Structure) -> bool {
    match (a, b) {
        (Structure::Graph(x), Structure::Graph(y)) => x.same_structure(y),
        (Structure::Trace(x), Structure::Trace(y)) => x.same_content(y),
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn round_trip_every_applicable_format(x in any_instance()) {
        for format in CodeFormat::formats_for(x.task) {
            let text = encode(&x, format).unwrap();
            let back = decode(&text).unwrap();
            prop_assert!(back.warnings.is_empty(), "{format}: {:?}\n{}", back.warnings, text.text);
            prop_assert!(same(&back.structure, x.gold.as_ref().unwrap()), "{format}:\n{}", text.text);
        }
    }

    #[test]
    fn stub_prefixes_encoding(x in any_instance()) {
        for format in CodeFormat::formats_for(x.task) {
            let stub = make_stub(&x, format).unwrap().text;
            let full = encode(&x, format).unwrap().text;
            if x.task == TaskKind::ScriptGen && format == CodeFormat::ScriptTree {
                prop_assert!(stub.ends_with("# generate\n"));
                prop_assert!(completion_suffix(&stub, &full).starts_with("    # nodes\n"));
            } else {
                prop_assert!(full.starts_with(&stub), "{format}\n{stub}\n---\n{full}");
                prop_assert_eq!(completion_suffix(&stub, &full), &full[stub.len()..]);
            }
        }
    }

    #[test]
    fn decode_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..300), pick in 0usize..9) {
        let text = String::from_utf8_lossy(&bytes).into_owned();
        let format = graphcode::codec::ALL_FORMATS[pick];
        let _ = decode(&SourceText::new(text, format));
    }

    #[test]
    fn decode_never_panics_on_mangled_encodings(x in any_instance(), cut in 0usize..2000, junk in "[ -~\n]{0,20}") {
        for format in CodeFormat::formats_for(x.task) {
            let full = encode(&x, format).unwrap().text;
            let mut at = cut.min(full.len());
            while !full.is_char_boundary(at) {
                at -= 1;
            }
            let mangled = format!("{}{}{}", &full[..at], junk, &full[at..]);
            let _ = decode(&SourceText::new(mangled, format));
        }
    }
}
