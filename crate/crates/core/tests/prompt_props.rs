use graphcode::codec::{encode, make_stub, CodeFormat};
use graphcode::graph::{LabeledGraph, Structure, TaskInput, TaskInstance, TaskKind};
use graphcode::prompt::{
    assemble_prompt, cosine, embed, estimate_tokens, kst_loss, sample_examples, split_prompt,
    PromptError, RetrievalIndex,
};
use proptest::prelude::*;

fn script(id: usize, words: &[String]) -> TaskInstance {
    let labels: Vec<String> = words.iter().map(|w| format!("{w} step {id}")).collect();
    let edges: Vec<(usize, Option<&str>, usize)> =
        (1..labels.len()).map(|i| (i - 1, None, i)).collect();
    let g = LabeledGraph::from_labels(&labels, &edges);
    TaskInstance::new(
        format!("x{id:03}"),
        TaskKind::ScriptGen,
        TaskInput::Script {
            goal: words.join(" "),
        },
        Some(Structure::Graph(g)),
    )
    .unwrap()
}

fn pool() -> impl Strategy<Value = Vec<TaskInstance>> {
    prop::collection::vec(prop::collection::vec("[a-z]{2,12}", 1..8), 1..12)
        .prop_map(|sets| sets.iter().enumerate().map(|(i, w)| script(i, w)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn budget_is_respected_and_split_recovers(examples in pool(), budget in 20usize..600, pick in 0usize..3) {
        let format = [CodeFormat::ScriptTree, CodeFormat::DotDigraph, CodeFormat::ScriptLiteral][pick];
        let query = TaskInstance::new("q", TaskKind::ScriptGen, TaskInput::Script { goal: "make tea".into() }, None).unwrap();
        let stub = make_stub(&query, format).unwrap();
        match assemble_prompt(&examples, &stub, budget, format) {
            Ok(p) => {
                prop_assert!(estimate_tokens(&p.rendered) <= budget);
                prop_assert_eq!(p.examples.len() + p.dropped, examples.len());
                // front-dropping: what remains is a suffix of the input order
                let tail: Vec<String> = examples[p.dropped..].iter().map(|x| x.id.clone()).collect();
                prop_assert_eq!(&p.example_ids, &tail);
                if p.dropped > 0 {
                    let with_one_more: String = examples[p.dropped - 1..]
                        .iter()
                        .map(|x| encode(x, format).unwrap().text + "\n\n")
                        .collect::<String>() + &stub.text;
                    prop_assert!(estimate_tokens(&with_one_more) > budget);
                }
                let mut expected: Vec<String> = p.examples.iter().map(|e| e.text.clone()).collect();
                expected.push(stub.text.clone());
                prop_assert_eq!(split_prompt(&p.rendered), expected);
            }
            Err(PromptError::BudgetExhausted { needed, .. }) => {
                let last = encode(examples.last().unwrap(), format).unwrap().text;
                prop_assert_eq!(needed, estimate_tokens(&format!("{last}\n\n{}", stub.text)));
                prop_assert!(needed > budget);
            }
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn sampling_reproduces_and_is_distinct(n in 1usize..40, k_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let pool: Vec<usize> = (0..n).collect();
        let k = ((n as f64) * k_frac) as usize;
        let a = sample_examples(&pool, k, seed).unwrap();
        prop_assert_eq!(&a, &sample_examples(&pool, k, seed).unwrap());
        let mut d = a.clone();
        d.sort();
        d.dedup();
        prop_assert_eq!(d.len(), k);
    }

    #[test]
    fn retrieve_orders_like_brute_force(texts in prop::collection::vec("[a-e]( [a-e]){0,5}", 1..10), query in "[a-f]( [a-f]){0,4}") {
        let items: Vec<(String, String)> = texts.iter().enumerate().map(|(i, t)| (format!("id{i:02}"), t.clone())).collect();
        let index = RetrievalIndex::build(items.clone()).unwrap();
        let all = index.retrieve(&query, items.len()).unwrap();
        let q = embed(&query, index.vocabulary());
        let mut oracle: Vec<(f64, String)> = items
            .iter()
            .map(|(id, t)| (cosine(&q, &embed(t, index.vocabulary())).unwrap(), id.clone()))
            .collect();
        oracle.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        // scores can differ in the last ulp between the sparse and dense paths
        for (got, (score, id)) in all.iter().zip(&oracle) {
            if got != id {
                let other = oracle.iter().find(|(_, i)| i == got).unwrap().0;
                prop_assert!((other - score).abs() < 1e-12);
            }
        }
        for k in 0..=items.len() {
            prop_assert_eq!(index.retrieve(&query, k).unwrap(), all[..k].to_vec());
        }
    }

    #[test]
    fn kst_symmetric_and_zero_iff_equal(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        prop_assert_eq!(kst_loss(a, b), kst_loss(b, a));
        prop_assert_eq!(kst_loss(a, b) == 0.0, a == b);
    }
}

#[test]
fn hand_built_three_entry_index() {
    let vocab: Vec<String> = ["x", "y"].iter().map(|s| s.to_string()).collect();
    let index = RetrievalIndex::from_vectors(
        vocab,
        vec![
            ("c".into(), vec![1.0, 1.0]),
            ("a".into(), vec![0.0, 2.0]),
            ("b".into(), vec![3.0, 0.0]),
        ],
    )
    .unwrap();
    // query "x" is (1, 0): cos b = 1, c = 1/sqrt 2, a = 0
    assert_eq!(index.retrieve("x", 3).unwrap(), vec!["b", "c", "a"]);
}
