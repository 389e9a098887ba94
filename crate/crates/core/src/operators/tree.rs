//! Symbolic expansion of operator words into contraction trees.
//!
//! Applying `D` or `D̄` to a product of derivative tensors distributes over the
//! factors (product rule). Every term that results is a rooted tree:
//!
//! - each node is a derivative tensor `∂^k V` evaluated at `q`;
//! - a node carries some number of momentum legs, each contracted with
//!   `u = M·mom`;
//! - a child hangs off its parent through an `M`-contracted index, so the
//!   parent sees the direction `M · (child contracted with everything except
//!   its parent leg)`.
//!
//! `D` adds a momentum leg to one node; `D̄` adds a fresh gradient leaf under
//! one node. The tensor order of a node is `legs + children (+1 if it has a
//! parent)`.

use std::collections::BTreeMap;

use nalgebra::DVector;
use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};

use super::word::{Atom, OperatorWord};
use crate::hamiltonian::{MassMatrix, Potential};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub parent: Option<usize>,
    pub mom_legs: usize,
    pub children: Vec<usize>,
}

impl Node {
    pub fn order(&self) -> usize {
        self.mom_legs + self.children.len() + usize::from(self.parent.is_some())
    }
}

/// One product-rule term. Nodes are stored in pre-order, so every child has a
/// larger index than its parent and node 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractionTree {
    nodes: Vec<Node>,
}

impl ContractionTree {
    /// The bare potential `V`.
    pub fn root() -> Self {
        ContractionTree {
            nodes: vec![Node {
                parent: None,
                mom_legs: 0,
                children: Vec::new(),
            }],
        }
    }

    /// `D̄₃ V`: the third derivative contracted with three raised gradients.
    pub fn d3bar() -> Self {
        let mut tree = Self::root();
        for _ in 0..3 {
            tree.attach_leaf(0);
        }
        tree
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn momentum_degree(&self) -> usize {
        self.nodes.iter().map(|n| n.mom_legs).sum()
    }

    pub fn max_order(&self) -> usize {
        self.nodes.iter().map(Node::order).max().unwrap_or(0)
    }

    fn attach_leaf(&mut self, parent: usize) {
        let id = self.nodes.len();
        self.nodes.push(Node {
            parent: Some(parent),
            mom_legs: 0,
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
    }

    /// Product-rule images under one atom, one per node.
    fn apply(&self, atom: Atom) -> impl Iterator<Item = ContractionTree> + '_ {
        (0..self.nodes.len()).map(move |i| {
            let mut t = self.clone();
            match atom {
                Atom::Dmom => t.nodes[i].mom_legs += 1,
                Atom::Dbar => t.attach_leaf(i),
            }
            t.canonical()
        })
    }

    fn key_of(&self, i: usize) -> String {
        let node = &self.nodes[i];
        let mut children: Vec<String> = node.children.iter().map(|&c| self.key_of(c)).collect();
        children.sort();
        format!("({}{})", node.mom_legs, children.concat())
    }

    /// Canonical string; isomorphic trees share it.
    pub fn key(&self) -> String {
        self.key_of(0)
    }

    /// Re-indexes the nodes in pre-order with children sorted by key.
    fn canonical(&self) -> ContractionTree {
        fn emit(src: &ContractionTree, i: usize, parent: Option<usize>, out: &mut Vec<Node>) {
            let id = out.len();
            out.push(Node {
                parent,
                mom_legs: src.nodes[i].mom_legs,
                children: Vec::new(),
            });
            let mut children = src.nodes[i].children.clone();
            children.sort_by_key(|&c| src.key_of(c));
            for c in children {
                let child_id = out.len();
                out[id].children.push(child_id);
                emit(src, c, Some(id), out);
            }
        }
        let mut nodes = Vec::with_capacity(self.nodes.len());
        emit(self, 0, None, &mut nodes);
        ContractionTree { nodes }
    }
}

/// Linear combination of contraction trees with exact rational coefficients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TreeSum {
    terms: BTreeMap<String, (Rational64, ContractionTree)>,
}

impl TreeSum {
    pub fn single(tree: ContractionTree) -> Self {
        let mut sum = TreeSum::default();
        sum.add(Rational64::from_integer(1), tree);
        sum
    }

    /// Expands a word applied to `V`.
    pub fn from_word(word: &OperatorWord) -> Self {
        if word.is_d3bar() {
            return Self::single(ContractionTree::d3bar());
        }
        word.atoms()
            .iter()
            .rev()
            .fold(Self::single(ContractionTree::root()), |acc, atom| acc.apply(*atom))
    }

    pub fn add(&mut self, coeff: Rational64, tree: ContractionTree) {
        let entry = self
            .terms
            .entry(tree.key())
            .or_insert_with(|| (Rational64::zero(), tree));
        entry.0 += coeff;
    }

    pub fn add_scaled(&mut self, coeff: Rational64, other: &TreeSum) {
        for (c, t) in other.terms.values() {
            self.add(coeff * c, t.clone());
        }
        self.prune();
    }

    fn apply(&self, atom: Atom) -> TreeSum {
        let mut out = TreeSum::default();
        for (c, t) in self.terms.values() {
            for image in t.apply(atom) {
                out.add(*c, image);
            }
        }
        out.prune();
        out
    }

    fn prune(&mut self) {
        self.terms.retain(|_, (c, _)| !c.is_zero());
    }

    pub fn terms(&self) -> impl Iterator<Item = (Rational64, &ContractionTree)> {
        self.terms.values().map(|(c, t)| (*c, t))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_order(&self) -> usize {
        self.terms.values().map(|(_, t)| t.max_order()).max().unwrap_or(0)
    }

    pub fn value(&self, ctx: &EvalContext<'_>) -> f64 {
        self.terms
            .values()
            .map(|(c, t)| to_f64(*c) * ctx.tree_value(t))
            .sum()
    }

    /// Gradients with respect to `q` and to the momentum argument.
    pub fn gradients(&self, ctx: &EvalContext<'_>) -> (DVector<f64>, DVector<f64>) {
        let n = ctx.q.len();
        let mut gq = DVector::zeros(n);
        let mut gm = DVector::zeros(n);
        for (c, t) in self.terms.values() {
            let (tq, tm) = ctx.tree_gradients(t);
            let c = to_f64(*c);
            gq.axpy(c, &tq, 1.0);
            gm.axpy(c, &tm, 1.0);
        }
        (gq, gm)
    }
}

pub(crate) fn to_f64(r: Rational64) -> f64 {
    r.to_f64().expect("rational coefficient fits in f64")
}

/// Everything a tree evaluation depends on: the potential, the metric, the
/// position and the raised momentum direction `u = M·mom`.
pub struct EvalContext<'a> {
    pub potential: &'a dyn Potential,
    pub mass: &'a MassMatrix,
    pub q: &'a DVector<f64>,
    u: DVector<f64>,
}

impl<'a> EvalContext<'a> {
    pub fn new(potential: &'a dyn Potential, mass: &'a MassMatrix, q: &'a DVector<f64>, mom: &DVector<f64>) -> Self {
        EvalContext {
            potential,
            mass,
            q,
            u: mass.raise(mom),
        }
    }

    /// Directions fed into node `i`, given the raised vectors of its children.
    fn directions<'s>(&'s self, node: &Node, raised: &'s [Option<DVector<f64>>]) -> Vec<&'s DVector<f64>> {
        let mut dirs = Vec::with_capacity(node.order() + 1);
        dirs.extend(std::iter::repeat(&self.u).take(node.mom_legs));
        dirs.extend(node.children.iter().map(|&c| raised[c].as_ref().expect("child evaluated")));
        dirs
    }

    /// Bottom-up pass: raised vectors `M · vec(i)` for every non-root node and
    /// the scalar value at the root.
    fn forward(&self, tree: &ContractionTree) -> (f64, Vec<Option<DVector<f64>>>) {
        let nodes = tree.nodes();
        let mut raised: Vec<Option<DVector<f64>>> = vec![None; nodes.len()];
        for i in (1..nodes.len()).rev() {
            let v = {
                let dirs = self.directions(&nodes[i], &raised);
                self.potential.contract_free(self.q, &dirs)
            };
            raised[i] = Some(self.mass.raise(&v));
        }
        let dirs = self.directions(&nodes[0], &raised);
        (self.potential.contract(self.q, &dirs), raised)
    }

    pub fn tree_value(&self, tree: &ContractionTree) -> f64 {
        self.forward(tree).0
    }

    /// Reverse-mode gradients. `adjoint[i] = M · ∂S/∂(M·vec(i))` is the extra
    /// direction node `i` is contracted with when its parent leg is closed.
    pub fn tree_gradients(&self, tree: &ContractionTree) -> (DVector<f64>, DVector<f64>) {
        let nodes = tree.nodes();
        let (_, raised) = self.forward(tree);
        let n = self.q.len();
        let mut adjoint: Vec<Option<DVector<f64>>> = vec![None; nodes.len()];
        let mut gq = DVector::zeros(n);
        let mut gu = DVector::zeros(n);
        for (i, node) in nodes.iter().enumerate() {
            let own = adjoint[i].take();
            let mut dirs = self.directions(node, &raised);
            if let Some(a) = own.as_ref() {
                dirs.push(a);
            }
            gq += self.potential.contract_free(self.q, &dirs);
            if node.mom_legs > 0 {
                // All momentum legs are equal; drop the first one.
                let g = self.potential.contract_free(self.q, &dirs[1..]);
                gu.axpy(node.mom_legs as f64, &g, 1.0);
            }
            for (slot, &c) in node.children.iter().enumerate() {
                let pos = node.mom_legs + slot;
                let without: Vec<&DVector<f64>> = dirs
                    .iter()
                    .enumerate()
                    .filter_map(|(j, d)| (j != pos).then_some(*d))
                    .collect();
                let mu = self.potential.contract_free(self.q, &without);
                adjoint[c] = Some(self.mass.raise(&mu));
            }
        }
        let gm = self.mass.raise(&gu);
        (gq, gm)
    }
}
