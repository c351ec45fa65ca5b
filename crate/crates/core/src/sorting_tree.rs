//! The sorting tree of an offset family: its leaves, read left to right,
//! enumerate the values of `F_t` on decreasing tuples of `nnp` in ascending order.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::boundary::{BoundaryError, CollapseContext, ExtTerm};
use crate::semantics::Assignment;
use crate::syntax::Value;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("base {r} is too small for the sorting tree, need more than {need}")]
    BaseTooSmall { r: Value, need: Value },
    #[error("position {0} is not a power of the base")]
    NotInDomain(Value),
    #[error("offset index {0} out of range")]
    NoSuchOffset(usize),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TreeNode {
    #[serde(skip)]
    pub term: ExtTerm,
    /// `A(x_1) > A(x_2) > ...`.
    pub assignment: Vec<Value>,
    pub value: Value,
    pub leaf: bool,
    pub children: Vec<TreeNode>,
}

/// Builds the tree for the offset with index `t` under the parameter values `a`.
///
/// The base `r` must exceed `2Δ`; below that, sibling subtrees can overlap.
pub fn build(t: usize, nnp: &[Value], r: Value, ctx: &CollapseContext, a: &Assignment) -> Result<TreeNode, TreeError> {
    let need = 2 * ctx.delta as Value;
    if r <= need {
        return Err(TreeError::BaseTooSmall { r, need });
    }
    if let Some(&bad) = nnp.iter().find(|&&x| !is_power(x, r)) {
        return Err(TreeError::NotInDomain(bad));
    }
    let tv = *ctx.offset_values(a)?.get(t).ok_or(TreeError::NoSuchOffset(t))?;
    let mut sorted = nnp.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let root = ExtTerm { coeffs: vec![], offset: t };
    Ok(grow(root, vec![], tv, &sorted, ctx))
}

fn is_power(x: Value, r: Value) -> bool {
    let mut p = r;
    while p < x {
        p = match p.checked_mul(r) {
            Some(v) => v,
            None => return false,
        };
    }
    p == x
}

fn grow(term: ExtTerm, assignment: Vec<Value>, tv: Value, nnp: &[Value], ctx: &CollapseContext) -> TreeNode {
    let value = term.value(&assignment, tv);
    let mut children = Vec::new();
    let below: Vec<Value> = match assignment.last() {
        _ if term.arity() >= ctx.s => vec![],
        Some(&last) => nnp.iter().copied().filter(|&j| j < last).collect(),
        None => nnp.to_vec(),
    };
    let child = |alpha: i64, j: Value| {
        let mut coeffs = term.coeffs.clone();
        coeffs.push(alpha);
        let mut asg = assignment.clone();
        asg.push(j);
        grow(ExtTerm { coeffs, offset: term.offset }, asg, tv, nnp, ctx)
    };
    for &j in below.iter().rev() {
        for alpha in -ctx.delta..=-1 {
            children.push(child(alpha, j));
        }
    }
    children.push(TreeNode { term: term.clone(), assignment: assignment.clone(), value, leaf: true, children: vec![] });
    for &j in &below {
        for alpha in 1..=ctx.delta {
            children.push(child(alpha, j));
        }
    }
    TreeNode { term, assignment, value, leaf: false, children }
}

impl TreeNode {
    /// Leaf values from left to right.
    pub fn leaves(&self) -> Vec<Value> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<Value>) {
        if self.leaf {
            out.push(self.value);
        }
        for c in &self.children {
            c.collect_leaves(out);
        }
    }

    /// Leaf values that are boundary points, i.e. non-negative.
    pub fn boundary_leaves(&self) -> Vec<Value> {
        self.leaves().into_iter().filter(|&v| v >= 0).collect()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(TreeNode::depth).max().unwrap_or(0)
    }

    /// Children lie within `f(A) ± Δ r^(c-1)` where `r^c` is the smallest
    /// assigned position, and their values increase strictly. Checked for
    /// this node only; the root has no range constraint.
    pub fn check_child_bounds(&self, r: Value, delta: i64) -> bool {
        let ascending = self.children.windows(2).all(|w| w[0].value < w[1].value);
        let Some(&min) = self.assignment.last() else { return ascending };
        let spread = delta as Value * (min / r);
        ascending && self.children.iter().all(|c| (c.value - self.value).abs() <= spread)
    }

    /// `check_child_bounds` at every internal node.
    pub fn check_all_child_bounds(&self, r: Value, delta: i64) -> bool {
        self.leaf || (self.check_child_bounds(r, delta) && self.children.iter().all(|c| c.check_all_child_bounds(r, delta)))
    }

    /// For all neighbouring siblings, every leaf under the left one is below
    /// every leaf under the right one. Returns the first offending pair of values.
    pub fn sibling_separation(&self) -> Result<(), (Value, Value)> {
        let bounds: Vec<(Value, Value)> = self
            .children
            .iter()
            .map(|c| {
                let ls = c.leaves();
                (*ls.iter().min().unwrap(), *ls.iter().max().unwrap())
            })
            .collect();
        for w in bounds.windows(2) {
            if w[0].1 >= w[1].0 {
                return Err((w[0].1, w[1].0));
            }
        }
        self.children.iter().try_for_each(TreeNode::sibling_separation)
    }

    /// Indented text rendering; leaves are drawn in double parentheses and
    /// each node shows only its newest assigned position.
    pub fn dump(&self, ctx: &CollapseContext) -> String {
        let mut out = String::new();
        self.dump_into(ctx, 0, &mut out);
        out
    }

    fn dump_into(&self, ctx: &CollapseContext, indent: usize, out: &mut String) {
        let label = match self.assignment.last() {
            Some(j) => format!("{}, {}", self.term.display(ctx), j),
            None => format!("{}, {{}}", self.term.display(ctx)),
        };
        let label = if self.leaf { format!("(({label}))") } else { format!("({label})") };
        let _ = writeln!(out, "{:indent$}{label} = {}", "", self.value, indent = indent * 2);
        for c in &self.children {
            c.dump_into(ctx, indent + 1, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::boundary_points;

    fn reference_ctx() -> CollapseContext {
        CollapseContext::synthetic(2, 2, 1, 1, vec![])
    }

    #[test]
    fn reference_layout() {
        let ctx = reference_ctx();
        let nnp = [5, 25, 625];
        let tree = build(0, &nnp, 5, &ctx, &Assignment::new()).unwrap();
        let right: Vec<(Vec<i64>, Value)> = tree
            .children
            .iter()
            .skip_while(|c| !c.leaf)
            .skip(1)
            .map(|c| (c.term.coeffs.clone(), *c.assignment.last().unwrap()))
            .collect();
        assert_eq!(
            right,
            vec![(vec![1], 5), (vec![2], 5), (vec![1], 25), (vec![2], 25), (vec![1], 625), (vec![2], 625)]
        );
        let node = tree
            .children
            .iter()
            .find(|c| c.term.coeffs == [1] && c.assignment == [625])
            .unwrap()
            .children
            .iter()
            .find(|c| c.term.coeffs == [1, -2] && c.assignment == [625, 25])
            .unwrap();
        assert_eq!(node.value, 575);
        assert!(node.children.iter().any(|c| c.leaf && c.value == 575));
        assert_eq!(tree.depth(), ctx.s + 2);
        let leaves = tree.leaves();
        assert!(leaves.windows(2).all(|w| w[0] < w[1]));
        let b = boundary_points(&nnp, &Assignment::new(), &ctx).unwrap();
        assert_eq!(tree.boundary_leaves(), b.per_offset[0]);
        assert!(tree.check_all_child_bounds(5, 2));
        assert_eq!(tree.sibling_separation(), Ok(()));
    }

    #[test]
    fn small_trees() {
        let ctx = CollapseContext::synthetic(1, 1, 1, 1, vec![]);
        let empty = build(0, &[], 3, &ctx, &Assignment::new()).unwrap();
        assert_eq!(empty.leaves(), vec![0]);
        assert_eq!(empty.children.len(), 1);
        let single = build(0, &[5], 5, &ctx, &Assignment::new()).unwrap();
        assert_eq!(single.leaves(), vec![-5, 0, 5]);
        assert_eq!(single.boundary_leaves(), vec![0, 5]);
    }

    #[test]
    fn preconditions() {
        let ctx = reference_ctx();
        assert_eq!(build(0, &[5], 4, &ctx, &Assignment::new()), Err(TreeError::BaseTooSmall { r: 4, need: 4 }));
        assert_eq!(build(0, &[6], 5, &ctx, &Assignment::new()), Err(TreeError::NotInDomain(6)));
        assert_eq!(build(3, &[5], 5, &ctx, &Assignment::new()), Err(TreeError::NoSuchOffset(3)));
    }

    #[test]
    fn dump_marks_leaves() {
        let ctx = CollapseContext::synthetic(1, 1, 1, 1, vec![]);
        let tree = build(0, &[5], 5, &ctx, &Assignment::new()).unwrap();
        let text = tree.dump(&ctx);
        assert_eq!(text.lines().next(), Some("(0, {}) = 0"));
        assert!(text.contains("  ((-1*x1, 5)) = -5"), "{text}");
    }

    proptest::proptest! {
        #[test]
        fn leaves_sort_boundary_points(s in 1usize..=3, delta in 1i64..=3, extra in 1i64..4, exps in proptest::collection::btree_set(1u32..6, 0..4), t in -30i64..30) {
            let r = 2 * delta as Value + extra as Value;
            let y = crate::syntax::Var::named("y");
            let ctx = CollapseContext::synthetic(s, delta, 1, 1, vec![crate::syntax::LinearTerm::var(y)]);
            let a = Assignment::from([(y, t as Value)]);
            let nnp: Vec<Value> = exps.iter().map(|&e| r.pow(e)).collect();
            let b = boundary_points(&nnp, &a, &ctx).unwrap();
            for (k, per) in b.per_offset.iter().enumerate() {
                let tree = build(k, &nnp, r, &ctx, &a).unwrap();
                let leaves = tree.leaves();
                proptest::prop_assert!(leaves.windows(2).all(|w| w[0] < w[1]));
                proptest::prop_assert_eq!(&tree.boundary_leaves(), per);
                proptest::prop_assert!(tree.check_all_child_bounds(r, delta));
                proptest::prop_assert_eq!(tree.sibling_separation(), Ok(()));
            }
        }
    }
}
