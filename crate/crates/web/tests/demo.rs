use serde_json::Value;
use xor3_web::{bucket_histogram_json, packed_sort_trace_json, trie_dump_json, trie_traverse_json};

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn five_keys_dump_and_traversal() {
    let v = parse(trie_dump_json("1 2 3 a f", 4).unwrap());
    assert_eq!(v["tree"]["label"], "9");
    assert_eq!(v["tree"]["right"]["label"], "5");
    assert!(v["text"].as_str().unwrap().starts_with("inner 9\n"));

    let v = parse(trie_traverse_json("1,2,3,a,f", 4, "3").unwrap());
    let ys: Vec<&str> = v["order"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["y"].as_str().unwrap())
        .collect();
    assert_eq!(ys, ["0", "1", "2", "9", "c"]);
    assert_eq!(v["visits"], 9);
}

#[test]
fn bad_input_is_an_error() {
    assert!(trie_dump_json("1 1", 4).is_err());
    assert!(trie_traverse_json("1 2", 4, "10").is_err());
    assert!(trie_dump_json("1", 100).is_err());
    assert!(packed_sort_trace_json("1, x", 4, 256).is_err());
}

#[test]
fn histogram_sizes_sum_to_n() {
    let v = parse(bucket_histogram_json(500, 32, 4, 7).unwrap());
    assert_eq!(v["R"], 16);
    let sizes: Vec<u64> = v["sizes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_u64().unwrap())
        .collect();
    assert_eq!(sizes.iter().sum::<u64>(), 500);
    let t = v["threshold"].as_f64().unwrap();
    let bad: Vec<u64> = v["bad"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_u64().unwrap())
        .collect();
    for (u, &s) in sizes.iter().enumerate() {
        assert_eq!(s as f64 > t, bad.contains(&(u as u64)));
    }
}

#[test]
fn sort_trace_ends_sorted() {
    let v = parse(packed_sort_trace_json("9 3 12 0 7", 4, 256).unwrap());
    assert_eq!(v["k"], 8);
    let layers = v["layers"].as_array().unwrap();
    assert_eq!(layers.len(), 7);
    let last: Vec<u64> = layers[6]["fields"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|f| !f["pad"].as_bool().unwrap())
        .map(|f| f["v"].as_u64().unwrap())
        .collect();
    assert_eq!(last, [0, 3, 7, 9, 12]);
}
