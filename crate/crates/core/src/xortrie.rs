//! The tree `T_X`: a Patricia trie over the sorted keys whose inner nodes
//! carry XOR labels, so that `a ⊕ X` can be listed in ascending order for
//! any `a` by choosing, at each inner node, which child to visit first.
//!
//! An inner node over `Y` with longest common prefix of length `k` has label
//! `(max Y₀) ⊕ (min Y₁)`, a word of the form `0^k 1 b`. The `(k+1)`-st bit of
//! `a` is set iff `a ⊕ label < a`; in that case `a ⊕ Y₁` precedes `a ⊕ Y₀`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::instance::{SolutionTriple, XorInstance};
use crate::word::BitWord;

pub type NodeId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Node<W> {
    Leaf(W),
    Inner {
        left: NodeId,
        label: W,
        right: NodeId,
    },
}

/// A label in the construction stream. `Infinite` bounds the stream on both
/// ends and compares above every finite word.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Label<W> {
    Finite(W),
    Infinite,
}

#[derive(Clone, Debug)]
pub struct XorTrie<W> {
    width: u32,
    nodes: Vec<Node<W>>,
    root: NodeId,
    leaves: usize,
}

/// Builds `T_X` from the sorted keys of `inst`.
pub fn make_tree<W: BitWord>(inst: &XorInstance<W>) -> Result<XorTrie<W>> {
    XorTrie::from_sorted(inst.width(), inst.words())
}

impl<W: BitWord> XorTrie<W> {
    /// One pass over the stream `(∞, x₁, ℓ₁, …, ℓ_{n−1}, x_n, ∞)` with
    /// `ℓ_i = x_i ⊕ x_{i+1}`. The recursive `build()` is replaced by a stack
    /// of frames `(label popped by the call, tree built so far)`.
    pub fn from_sorted(width: u32, xs: &[W]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::EmptyInstance);
        }
        if let Some(w) = xs.windows(2).find(|p| p[0] >= p[1]) {
            return Err(Error::InvalidParameter(format!(
                "keys must be strictly ascending, found {:?} before {:?}",
                w[0], w[1]
            )));
        }
        let n = xs.len();
        let label_at = |i: usize| -> Label<W> {
            if i == 0 || i == n {
                Label::Infinite
            } else {
                Label::Finite(xs[i - 1] ^ xs[i])
            }
        };

        let mut nodes: Vec<Node<W>> = Vec::with_capacity(2 * n - 1);
        let leaf = |nodes: &mut Vec<Node<W>>, x: W| {
            nodes.push(Node::Leaf(x));
            (nodes.len() - 1) as NodeId
        };

        let mut stack: Vec<(Label<W>, NodeId)> = Vec::new();
        stack.push((label_at(0), leaf(&mut nodes, xs[0])));
        let mut next = 1;
        let root = loop {
            let (call_label, _) = *stack.last().expect("nonempty stack");
            let top = label_at(next);
            if top < call_label {
                // the while-loop body: recurse with the next label and key
                stack.push((top, leaf(&mut nodes, xs[next])));
                next += 1;
                continue;
            }
            let (child_label, child) = stack.pop().expect("nonempty stack");
            match stack.last_mut() {
                None => break child,
                Some((_, parent)) => {
                    let Label::Finite(label) = child_label else {
                        unreachable!("only the outermost call pops the infinite label")
                    };
                    nodes.push(Node::Inner {
                        left: *parent,
                        label,
                        right: child,
                    });
                    *parent = (nodes.len() - 1) as NodeId;
                }
            }
        };
        debug_assert_eq!(next, n);
        debug_assert_eq!(nodes.len(), 2 * n - 1);
        Ok(XorTrie {
            width,
            nodes,
            root,
            leaves: n,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// Number of keys (leaves).
    pub fn len(&self) -> usize {
        self.leaves
    }

    pub fn is_empty(&self) -> bool {
        self.leaves == 0
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node<W> {
        &self.nodes[id as usize]
    }

    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<W> {
        self.iter_xor(W::zero()).collect()
    }

    /// True when labels strictly decrease along every downward path of inner
    /// nodes.
    pub fn labels_decrease(&self) -> bool {
        let mut stack = vec![(self.root, Label::Infinite)];
        while let Some((id, bound)) = stack.pop() {
            if let Node::Inner { left, label, right } = *self.node(id) {
                if Label::Finite(label) >= bound {
                    return false;
                }
                stack.push((left, Label::Finite(label)));
                stack.push((right, Label::Finite(label)));
            }
        }
        true
    }

    /// Lazily yields `a ⊕ x` for all `x ∈ X` in ascending order.
    pub fn traverse(&self, a: W) -> Result<Traverse<'_, W>> {
        if !a.fits(self.width) {
            return Err(Error::WidthMismatch {
                expected: self.width,
                actual: a.bit_len(),
            });
        }
        Ok(self.iter_xor(a))
    }

    pub fn iter_xor(&self, a: W) -> Traverse<'_, W> {
        Traverse {
            tree: self,
            a,
            stack: vec![self.root],
            visits: 0,
        }
    }

    /// Indented text dump, one node per line, keys and labels in hex.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut stack = vec![(self.root, 0usize)];
        while let Some((id, depth)) = stack.pop() {
            let indent = "  ".repeat(depth);
            match *self.node(id) {
                Node::Leaf(x) => {
                    let _ = writeln!(out, "{indent}leaf {}", x.to_hex(self.width));
                }
                Node::Inner { left, label, right } => {
                    let _ = writeln!(out, "{indent}inner {}", label.to_hex(self.width));
                    stack.push((right, depth + 1));
                    stack.push((left, depth + 1));
                }
            }
        }
        out
    }
}

/// Iterator form of the recursive traversal; `visits` counts every node
/// taken off the stack.
pub struct Traverse<'t, W> {
    tree: &'t XorTrie<W>,
    a: W,
    stack: Vec<NodeId>,
    visits: u64,
}

impl<W: BitWord> Traverse<'_, W> {
    pub fn visits(&self) -> u64 {
        self.visits
    }
}

impl<W: BitWord> Iterator for Traverse<'_, W> {
    type Item = W;

    #[inline]
    fn next(&mut self) -> Option<W> {
        while let Some(id) = self.stack.pop() {
            self.visits += 1;
            match *self.tree.node(id) {
                Node::Leaf(x) => return Some(self.a ^ x),
                Node::Inner { left, label, right } => {
                    if (self.a ^ label) > self.a {
                        self.stack.push(right);
                        self.stack.push(left);
                    } else {
                        self.stack.push(left);
                        self.stack.push(right);
                    }
                }
            }
        }
        None
    }
}

/// Work done by [`solve_quadratic_counted`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QuadraticStats {
    /// Three-way key comparisons in the merge scans plus one branch test per
    /// inner node visited.
    pub key_comparisons: u64,
    pub node_visits: u64,
}

/// For each `a ∈ X`, merges the ascending stream `a ⊕ X` against sorted `X`.
pub fn solve_quadratic<W: BitWord>(inst: &XorInstance<W>) -> Option<SolutionTriple<W>> {
    solve_quadratic_counted(inst).0
}

pub fn solve_quadratic_counted<W: BitWord>(
    inst: &XorInstance<W>,
) -> (Option<SolutionTriple<W>>, QuadraticStats) {
    let mut stats = QuadraticStats::default();
    let Ok(tree) = make_tree(inst) else {
        return (None, stats);
    };
    let xs = inst.words();
    for &a in xs {
        let mut ys = tree.iter_xor(a);
        let mut y = ys.next();
        let mut j = 0;
        let found = loop {
            let Some(yi) = y else { break None };
            if j == xs.len() {
                break None;
            }
            stats.key_comparisons += 1;
            match yi.cmp(&xs[j]) {
                std::cmp::Ordering::Less => y = ys.next(),
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => break Some(SolutionTriple::new(a, yi ^ a, xs[j])),
            }
        };
        let visits = ys.visits();
        stats.node_visits += visits;
        // every inner node visited costs one branch test
        stats.key_comparisons += visits.saturating_sub(1) / 2;
        if found.is_some() {
            return (found, stats);
        }
    }
    (None, stats)
}
