//! Browser demo: XOR trie dump and traversal, bucket histogram of a linear
//! hash, and the layer-by-layer trace of the packed bitonic sort.
//!
//! Every export takes plain values and returns a JSON string; the `*_json`
//! functions are the same thing without the wasm boundary.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use xor3::hashing::{sample_bucket_hash, BucketTable};
use xor3::packed::PackedMachine;
use xor3::xortrie::{make_tree, Node, NodeId, XorTrie};
use xor3::{generate_instance, AnyInstance, BitWord, GenerateMode, RngSeed, XorInstance};

type Res = Result<String, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn parse_words(words: &str, width: u32) -> Result<XorInstance<u64>, String> {
    if width > 64 {
        return Err(format!("the demo handles w <= 64, got {width}"));
    }
    let list: Vec<&str> = words
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect();
    match AnyInstance::from_hex_list(width, &list).map_err(err)? {
        AnyInstance::Narrow(i) => Ok(i),
        AnyInstance::Wide(_) => unreachable!("width checked above"),
    }
}

fn tree_value(t: &XorTrie<u64>, id: NodeId) -> Value {
    let w = t.width();
    match *t.node(id) {
        Node::Leaf(x) => json!({ "leaf": x.to_hex(w) }),
        Node::Inner { left, label, right } => json!({
            "label": label.to_hex(w),
            "left": tree_value(t, left),
            "right": tree_value(t, right),
        }),
    }
}

pub fn trie_dump_json(words: &str, width: u32) -> Res {
    let inst = parse_words(words, width)?;
    let t = make_tree(&inst).map_err(err)?;
    Ok(json!({ "text": t.dump(), "tree": tree_value(&t, t.root()) }).to_string())
}

/// Keys `a ⊕ x` in the order the traversal emits them.
pub fn trie_traverse_json(words: &str, width: u32, a: &str) -> Res {
    let inst = parse_words(words, width)?;
    let t = make_tree(&inst).map_err(err)?;
    let a = u64::from_hex(
        &format!("{a:0>d$}", d = xor3::word::hex_digits(width) as usize),
        width,
    )
    .map_err(err)?;
    let mut it = t.traverse(a).map_err(err)?;
    let order: Vec<Value> = it
        .by_ref()
        .map(|y| json!({ "y": y.to_hex(width), "x": (a ^ y).to_hex(width) }))
        .collect();
    Ok(json!({ "order": order, "visits": it.visits(), "nodes": t.node_count() }).to_string())
}

/// Bucket sizes of a random instance under a random `h1` with `2^r` buckets.
pub fn bucket_histogram_json(n: usize, width: u32, r: u32, seed: u64) -> Res {
    if width > 64 {
        return Err(format!("the demo handles w <= 64, got {width}"));
    }
    let inst: XorInstance<u64> =
        generate_instance(n, width, RngSeed(seed), GenerateMode::Random).map_err(err)?;
    let mut rng = RngSeed(seed).derive(1).rng();
    let h1 = sample_bucket_hash(width, r, &mut rng).map_err(err)?;
    let bt = BucketTable::with_hash(&inst, h1).map_err(err)?;
    let sizes: Vec<usize> = (0..bt.bucket_count()).map(|u| bt.bucket(u).len()).collect();
    let bad: Vec<u64> = (0..bt.bucket_count()).filter(|&u| !bt.is_good(u)).collect();
    Ok(json!({
        "R": bt.bucket_count(),
        "threshold": bt.good_threshold(),
        "sizes": sizes,
        "bad": bad,
        "bad_elements": bt.bad_elements().len(),
    })
    .to_string())
}

/// The packed array before sorting and after each compare-exchange layer.
pub fn packed_sort_trace_json(values: &str, payload_bits: u32, sim_width: u32) -> Res {
    let vals: Vec<u64> = values
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<u64>().map_err(err))
        .collect::<Result<_, _>>()?;
    let mut m = PackedMachine::new(sim_width).map_err(err)?;
    let pa = m.pack(&vals, payload_bits).map_err(err)?;
    let (_, layers) = m.bitonic_sort_trace(&pa).map_err(err)?;
    let fields = |a: &xor3::packed::PackedArray| -> Vec<Value> {
        a.fields()
            .iter()
            .map(|f| json!({ "v": f.payload, "pad": f.pad, "i": f.index }))
            .collect()
    };
    let mut out = vec![json!({ "distance": 0, "fields": fields(&pa) })];
    out.extend(
        layers
            .iter()
            .map(|l| json!({ "distance": l.distance, "fields": fields(&l.array) })),
    );
    Ok(json!({
        "k": pa.k(),
        "field_bits": pa.layout().field_bits,
        "span": m.span(&pa.layout(), pa.k() as u32),
        "ops": m.ops(),
        "layers": out,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn trie_dump(words: &str, width: u32) -> Result<String, JsError> {
    trie_dump_json(words, width).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn trie_traverse(words: &str, width: u32, a: &str) -> Result<String, JsError> {
    trie_traverse_json(words, width, a).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn bucket_histogram(n: usize, width: u32, r: u32, seed: u64) -> Result<String, JsError> {
    bucket_histogram_json(n, width, r, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn packed_sort_trace(
    values: &str,
    payload_bits: u32,
    sim_width: u32,
) -> Result<String, JsError> {
    packed_sort_trace_json(values, payload_bits, sim_width).map_err(|e| JsError::new(&e))
}
