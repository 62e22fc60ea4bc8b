use proptest::prelude::*;
use xor3::xortrie::{make_tree, solve_quadratic, solve_quadratic_counted, Node, NodeId, XorTrie};
use xor3::{brute_force_solve, generate_instance, GenerateMode, RngSeed, WideWord, XorInstance};

#[derive(Debug, PartialEq)]
enum Shape {
    Leaf(u64),
    Inner(Box<Shape>, u64, Box<Shape>),
}

/// Split on the highest bit where the keys differ; the label is the XOR of
/// the two keys adjacent across the split.
fn reference(xs: &[u64]) -> Shape {
    if xs.len() == 1 {
        return Shape::Leaf(xs[0]);
    }
    let top = 63 - (xs[0] ^ xs[xs.len() - 1]).leading_zeros();
    let cut = xs.iter().position(|x| x >> top & 1 == 1).unwrap();
    Shape::Inner(
        Box::new(reference(&xs[..cut])),
        xs[cut - 1] ^ xs[cut],
        Box::new(reference(&xs[cut..])),
    )
}

fn shape(t: &XorTrie<u64>, id: NodeId) -> Shape {
    match *t.node(id) {
        Node::Leaf(x) => Shape::Leaf(x),
        Node::Inner { left, label, right } => {
            Shape::Inner(Box::new(shape(t, left)), label, Box::new(shape(t, right)))
        }
    }
}

fn tree_of(xs: &[u64], w: u32) -> XorTrie<u64> {
    make_tree(&XorInstance::<u64>::from_u64s(w, xs).unwrap()).unwrap()
}

#[test]
fn every_subset_of_4_bit_words() {
    for mask in 1u32..1 << 16 {
        let xs: Vec<u64> = (0..16).filter(|i| mask >> i & 1 == 1).collect();
        let t = tree_of(&xs, 4);
        assert_eq!(shape(&t, t.root()), reference(&xs), "{xs:?}");
        assert_eq!(t.node_count(), 2 * xs.len() - 1);
        assert!(t.labels_decrease());
    }
}

#[test]
fn traversal_on_all_4_bit_subsets() {
    for mask in (1u32..1 << 16).step_by(7) {
        let xs: Vec<u64> = (0..16).filter(|i| mask >> i & 1 == 1).collect();
        let t = tree_of(&xs, 4);
        for a in 0..16u64 {
            let mut expect: Vec<u64> = xs.iter().map(|x| a ^ x).collect();
            expect.sort_unstable();
            assert_eq!(t.iter_xor(a).collect::<Vec<_>>(), expect);
        }
    }
}

#[test]
fn traverse_rejects_wide_query() {
    let t = tree_of(&[1, 2, 3], 4);
    assert!(t.traverse(16).is_err());
    assert!(t.traverse(15).is_ok());
}

proptest! {
    #[test]
    fn random_trees_match_reference(words in prop::collection::btree_set(any::<u64>(), 1..200)) {
        let xs: Vec<u64> = words.into_iter().collect();
        let t = tree_of(&xs, 64);
        prop_assert_eq!(shape(&t, t.root()), reference(&xs));
        prop_assert!(t.labels_decrease());
        prop_assert_eq!(t.leaves(), xs);
    }

    #[test]
    fn traversal_is_sorted_and_visits_every_node(words in prop::collection::btree_set(0u64..1 << 20, 1..150), a in 0u64..1 << 20) {
        let xs: Vec<u64> = words.into_iter().collect();
        let t = tree_of(&xs, 20);
        let mut it = t.iter_xor(a);
        let got: Vec<u64> = it.by_ref().collect();
        let mut expect: Vec<u64> = xs.iter().map(|x| a ^ x).collect();
        expect.sort_unstable();
        prop_assert_eq!(got, expect);
        prop_assert_eq!(it.visits(), 2 * xs.len() as u64 - 1);
    }
}

#[test]
fn quadratic_solver_agrees_with_brute_force() {
    let mut trials = 0;
    for seed in 0..1000u64 {
        let w = [8u32, 16, 64][seed as usize % 3];
        let n = 3 + (seed as usize * 37) % if w == 8 { 100 } else { 254 };
        let mode = if seed % 2 == 0 {
            GenerateMode::Planted
        } else {
            GenerateMode::Random
        };
        let inst: XorInstance<u64> = generate_instance(n, w, RngSeed(seed), mode).unwrap();
        let got = solve_quadratic(&inst);
        assert_eq!(
            got.is_some(),
            brute_force_solve(&inst).is_some(),
            "seed {seed}"
        );
        if let Some(t) = got {
            assert!(t.is_witness_for(&inst));
        }
        trials += 1;
    }
    for seed in 0..200u64 {
        let mode = if seed % 2 == 0 {
            GenerateMode::Planted
        } else {
            GenerateMode::Random
        };
        let inst: XorInstance<WideWord> =
            generate_instance(3 + seed as usize, 128, RngSeed(seed), mode).unwrap();
        let got = solve_quadratic(&inst);
        assert_eq!(got.is_some(), brute_force_solve(&inst).is_some());
        trials += 1;
    }
    assert_eq!(trials, 1200);
}

#[test]
fn comparison_count_is_quadratic() {
    let inst: XorInstance<u64> =
        generate_instance(256, 64, RngSeed(4), GenerateMode::Random).unwrap();
    let (_, st) = solve_quadratic_counted(&inst);
    let n = 256u64;
    assert!(st.node_visits <= n * (2 * n - 1));
    assert!(st.node_visits >= n * n);
    assert!(st.key_comparisons <= 4 * n * n, "{}", st.key_comparisons);
}
