//! Small hand-built instances, one per task family, used by the golden
//! files, the demo page and the CLI smoke tests, plus a seeded generator
//! of random instances for every task.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{
    EntityTrace, LabeledGraph, StateValue, Structure, TaskInput, TaskInstance, TaskKind,
};

fn build(id: &str, task: TaskKind, input: TaskInput, gold: Structure) -> TaskInstance {
    TaskInstance::new(id, task, input, Some(gold)).expect("sample instances are well-formed")
}

pub fn potpie_graph() -> LabeledGraph {
    LabeledGraph::from_labels(
        &[
            "Take pies out to cool",
            "Take out several plates",
            "Open cabinet drawer",
            "Fill pies onto plates evenly",
            "Begin putting pies on plates",
            "Serve potpies on plate",
        ],
        &[
            (0, None, 1),
            (2, None, 1),
            (1, None, 4),
            (1, None, 3),
            (4, None, 5),
            (3, None, 5),
        ],
    )
}

/// Script generation for "serve the potpies on a plate".
pub fn potpie() -> TaskInstance {
    build(
        "potpie",
        TaskKind::ScriptGen,
        TaskInput::Script {
            goal: "serve the potpies on a plate".into(),
        },
        Structure::Graph(potpie_graph()),
    )
}

/// The potpie script as an edge-prediction instance.
pub fn potpie_edges() -> TaskInstance {
    let g = potpie_graph();
    build(
        "potpie-edges",
        TaskKind::EdgePrediction,
        TaskInput::EdgePrediction {
            goal: "serve the potpies on a plate".into(),
            nodes: g.nodes.clone(),
        },
        Structure::Graph(g),
    )
}

pub fn video_game() -> TaskInstance {
    let g = LabeledGraph::from_labels(
        &[
            "decided to create a video game",
            "Learn the basics of programming",
            "Learn to use a language that is used in games",
            "Learn to use an existing game engine",
            "Program the game",
            "Test the game",
            "create a video game",
        ],
        &[
            (0, None, 1),
            (1, None, 2),
            (1, None, 3),
            (2, None, 4),
            (3, None, 4),
            (4, None, 5),
            (5, None, 6),
        ],
    );
    build(
        "video-game",
        TaskKind::ScriptGen,
        TaskInput::Script {
            goal: "create a video game".into(),
        },
        Structure::Graph(g),
    )
}

pub fn factory_farming() -> TaskInstance {
    let g = LabeledGraph::from_labels(
        &["factory farming", "millions", "food", "necessary", "banned"],
        &[
            (0, Some("causes"), 2),
            (0, Some("has context"), 3),
            (2, Some("has context"), 3),
            (3, Some("not desires"), 4),
            (1, Some("desires"), 2),
        ],
    );
    build(
        "factory-farming",
        TaskKind::ExplGraph,
        TaskInput::Explanation {
            belief: "factory farming should not be banned.".into(),
            argument: "Factory farming feeds millions.".into(),
            stance: "support".into(),
        },
        Structure::Graph(g),
    )
}

pub fn cannabis() -> TaskInstance {
    let g = LabeledGraph::from_labels(
        &[
            "cannabis",
            "marijuana",
            "legal",
            "more available",
            "good thing",
        ],
        &[
            (0, Some("synonym of"), 1),
            (2, Some("causes"), 3),
            (1, Some("capable of"), 4),
            (4, Some("desires"), 2),
        ],
    );
    build(
        "cannabis",
        TaskKind::ExplGraph,
        TaskInput::Explanation {
            belief: "Cannabis should be legal.".into(),
            argument: "It's not a bad thing to make marijuana more available.".into(),
            stance: "support".into(),
        },
        Structure::Graph(g),
    )
}

pub fn photosynthesis() -> TaskInstance {
    let actions = vec![
        "Roots absorb water from soil".to_string(),
        "The water flows to the leaf".to_string(),
    ];
    let entities = vec!["water".to_string(), "light".to_string(), "CO2".to_string()];
    let cell = |s: &str| StateValue::from_cell(s).expect("valid cell");
    let states = vec![
        vec![cell("soil"), cell("sun"), cell("-")],
        vec![cell("roots"), cell("sun"), cell("?")],
        vec![cell("leaf"), cell("sun"), cell("?")],
    ];
    let trace = EntityTrace::new(actions.clone(), entities.clone(), states).expect("valid trace");
    build(
        "photosynthesis",
        TaskKind::EntityTracking,
        TaskInput::Entities { actions, entities },
        Structure::Trace(trace),
    )
}

const VERBS: &[&str] = &[
    "wash", "cut", "fold", "open", "close", "carry", "mix", "pour", "heat", "cool", "check",
    "pack", "paint", "sweep", "lift", "sort", "bake", "plant", "water", "measure",
];
const THINGS: &[&str] = &[
    "bowl", "window", "letter", "garden", "engine", "ladder", "basket", "carpet", "kettle",
    "pillow", "bucket", "drawer", "bridge", "candle", "jacket", "mirror", "pencil", "rocket",
    "saddle", "tunnel",
];
const QUALITIES: &[&str] = &[
    "cheap", "risky", "useful", "quiet", "modern", "popular", "costly", "healthy", "fragile",
    "durable",
];
const RELATIONS: &[&str] = &[
    "causes",
    "capable of",
    "has context",
    "desires",
    "not desires",
    "part of",
    "is a",
];
const PLACES: &[&str] = &[
    "soil", "root", "leaf", "stem", "air", "water", "cell", "sea",
];

fn distinct_labels(
    rng: &mut ChaCha8Rng,
    n: usize,
    make: impl Fn(&mut ChaCha8Rng) -> String,
) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let label = make(rng);
        if seen.insert(label.clone()) {
            out.push(label);
        }
    }
    out
}

fn pick<'a>(rng: &mut ChaCha8Rng, words: &[&'a str]) -> &'a str {
    words[rng.gen_range(0..words.len())]
}

/// A random script DAG: nodes in topological order, each non-source node
/// wired to one to three earlier nodes.
pub fn random_script_graph(rng: &mut ChaCha8Rng, nodes: usize) -> LabeledGraph {
    let labels = distinct_labels(rng, nodes, |r| {
        let (v, t) = (pick(r, VERBS), pick(r, THINGS));
        format!("{}{} the {t}", v[..1].to_uppercase(), &v[1..])
    });
    let mut edges = Vec::new();
    for dst in 1..nodes {
        let fan_in = rng.gen_range(1..=dst.min(3));
        let mut srcs: Vec<usize> = (0..dst).collect();
        srcs.shuffle(rng);
        for &src in srcs.iter().take(fan_in) {
            edges.push((src, None, dst));
        }
    }
    LabeledGraph::from_labels(&labels, &edges)
}

/// A random explanation graph whose first two node labels appear in the
/// belief and next two in the argument; the edges form a rooted tree, so
/// the graph is a connected DAG.
fn random_explanation(rng: &mut ChaCha8Rng, nodes: usize) -> (LabeledGraph, String, String) {
    let labels = distinct_labels(rng, nodes, |r| {
        format!("{} {}", pick(r, QUALITIES), pick(r, THINGS))
    });
    let mut order: Vec<usize> = (0..nodes).collect();
    order.shuffle(rng);
    let edges: Vec<(usize, Option<&str>, usize)> = (1..nodes)
        .map(|i| {
            (
                order[rng.gen_range(0..i)],
                Some(pick(rng, RELATIONS)),
                order[i],
            )
        })
        .collect();
    let belief = format!("A {} should replace the {}.", labels[0], labels[1]);
    let argument = format!("Every {} beats a {}.", labels[2], labels[3]);
    (LabeledGraph::from_labels(&labels, &edges), belief, argument)
}

fn random_trace(rng: &mut ChaCha8Rng) -> EntityTrace {
    let steps = rng.gen_range(2..=5);
    let entity_count = rng.gen_range(1..=3);
    let actions: Vec<String> = (0..steps)
        .map(|_| {
            format!(
                "The {} moves to the {}",
                pick(rng, THINGS),
                pick(rng, PLACES)
            )
        })
        .collect();
    let entities = distinct_labels(rng, entity_count, |r| pick(r, THINGS).to_string());
    let states = (0..=steps)
        .map(|_| {
            (0..entity_count)
                .map(|_| match rng.gen_range(0..6) {
                    0 => StateValue::NonExistent,
                    1 => StateValue::Unknown,
                    _ => StateValue::Known(pick(rng, PLACES).to_string()),
                })
                .collect()
        })
        .collect();
    EntityTrace::new(actions, entities, states).expect("generated trace is rectangular")
}

/// `n` reproducible instances of `task` with gold structures; ids are
/// `{prefix}-{i}`.
pub fn synthetic(task: TaskKind, n: usize, seed: u64, prefix: &str) -> Vec<TaskInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let id = format!("{prefix}-{i}");
            match task {
                TaskKind::ScriptGen | TaskKind::EdgePrediction => {
                    let size = rng.gen_range(3..=12);
                    let g = random_script_graph(&mut rng, size);
                    let goal = format!("{} the {}", pick(&mut rng, VERBS), pick(&mut rng, THINGS));
                    let input = if task == TaskKind::ScriptGen {
                        TaskInput::Script { goal }
                    } else {
                        TaskInput::EdgePrediction {
                            goal,
                            nodes: g.nodes.clone(),
                        }
                    };
                    build(&id, task, input, Structure::Graph(g))
                }
                TaskKind::ExplGraph => {
                    let size = rng.gen_range(4..=8);
                    let (g, belief, argument) = random_explanation(&mut rng, size);
                    let stance = if rng.gen_bool(0.5) {
                        "support"
                    } else {
                        "counter"
                    };
                    let input = TaskInput::Explanation {
                        belief,
                        argument,
                        stance: stance.into(),
                    };
                    build(&id, task, input, Structure::Graph(g))
                }
                TaskKind::EntityTracking => {
                    let t = random_trace(&mut rng);
                    let input = TaskInput::Entities {
                        actions: t.actions().to_vec(),
                        entities: t.entities().to_vec(),
                    };
                    build(&id, task, input, Structure::Trace(t))
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{decode, encode, CodeFormat};
    use crate::graph::is_dag;
    use crate::metrics::structural_accuracy;

    #[test]
    fn synthetic_instances_are_valid_and_reproducible() {
        for task in [
            TaskKind::ScriptGen,
            TaskKind::EdgePrediction,
            TaskKind::ExplGraph,
            TaskKind::EntityTracking,
        ] {
            let a = synthetic(task, 20, 7, "s");
            assert_eq!(a, synthetic(task, 20, 7, "s"));
            for x in &a {
                if let Some(g) = x.gold_graph() {
                    assert!(is_dag(g).unwrap());
                }
                for format in CodeFormat::formats_for(task) {
                    decode(&encode(x, format).unwrap()).unwrap();
                }
            }
        }
    }

    #[test]
    fn synthetic_explanations_pass_structural_accuracy() {
        for x in synthetic(TaskKind::ExplGraph, 50, 3, "e") {
            let TaskInput::Explanation {
                belief, argument, ..
            } = &x.input
            else {
                unreachable!()
            };
            assert!(
                structural_accuracy(x.gold_graph().unwrap(), belief, argument).unwrap(),
                "{}",
                x.id
            );
        }
    }
}
