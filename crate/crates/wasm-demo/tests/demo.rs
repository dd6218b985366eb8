use graphcode::dataset::instance_to_json;
use graphcode::samples;
use graphcode_wasm::{compare_to_json, decode_to_json, encode_instance};

#[test]
fn encode_then_decode_lays_out_layers() {
    let line = instance_to_json(&samples::potpie()).to_string();
    let code = encode_instance(&line, "script-gen", "script-tree").unwrap();
    assert!(code.starts_with("class Tree:\n"));
    let graph = decode_to_json(&code, "script-tree").unwrap();
    let nodes = graph["nodes"].as_array().unwrap();
    assert_eq!(nodes.len(), 6);
    assert_eq!(graph["edges"].as_array().unwrap().len(), 6);
    let layer = |label: &str| {
        nodes
            .iter()
            .find(|n| n["label"].as_str().unwrap().eq_ignore_ascii_case(label))
            .unwrap()["layer"]
            .as_u64()
            .unwrap()
    };
    assert_eq!(layer("take pies out to cool"), 0);
    assert_eq!(layer("serve potpies on plate"), 3);
}

#[test]
fn compare_scores_identity_and_a_dropped_edge() {
    let line = instance_to_json(&samples::potpie()).to_string();
    let gold = encode_instance(&line, "script-gen", "dot").unwrap();
    let same = compare_to_json(&gold, &gold, "dot").unwrap();
    assert_eq!(same["f1"], 1.0);
    assert_eq!(same["ged"], 0);
    assert_eq!(same["iso"], true);
    let dropped: String = gold
        .lines()
        .filter(|l| !l.contains("open_cabinet_drawer ->"))
        .map(|l| format!("{l}\n"))
        .collect();
    let scores = compare_to_json(&gold, &dropped, "dot").unwrap();
    assert_eq!(scores["p"], 1.0);
    assert!((scores["r"].as_f64().unwrap() - 5.0 / 6.0).abs() < 1e-12);
    assert_eq!(scores["ged"], 1);
    assert_eq!(scores["iso"], false);
}

#[test]
fn errors_are_messages() {
    assert!(encode_instance("{}", "script-gen", "dot")
        .unwrap_err()
        .contains("line 1"));
    assert!(decode_to_json("x", "no-such-format").is_err());
    let trace = instance_to_json(&samples::photosynthesis()).to_string();
    let code = encode_instance(&trace, "propara", "propara-functions").unwrap();
    assert!(decode_to_json(&code, "propara-functions")
        .unwrap_err()
        .contains("entity states"));
}
