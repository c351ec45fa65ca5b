//! Term families, boundary points and intervals of a normalized quantifier.

use std::collections::BTreeSet;

use itertools::Itertools;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::lcm;
use crate::semantics::Assignment;
use crate::syntax::{Formula, Kind, LinearTerm, Value, Var};

pub const MAX_S: usize = 3;
pub const MAX_GROUP: usize = 6;
pub const MAX_P: u64 = 12;
/// Bound on `|F| * |G|`, which drives the size of the collapsed formula.
pub const MAX_WORK: u64 = 400;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BoundaryError {
    #[error("{what} = {value} exceeds the cap {cap}")]
    SizeCap { what: &'static str, value: u64, cap: u64 },
    #[error("{0} is not a boundary point")]
    NotBoundaryPoint(Value),
    #[error("variable {0} is not assigned")]
    Unassigned(Var),
}

/// Constants of the construction for one quantifier `Q z <bodies>`.
#[derive(Clone, Debug, Serialize)]
pub struct CollapseContext {
    #[serde(skip)]
    pub pivot: Var,
    #[serde(skip)]
    pub params: Vec<Var>,
    /// Number of bound variables in a single term of `R`.
    pub s: usize,
    /// Number of free variables.
    pub r: usize,
    pub alpha_prime: i64,
    pub delta: i64,
    pub q: u64,
    pub p: u64,
    pub group_order: usize,
    pub rphi: u64,
    #[serde(serialize_with = "ser_terms")]
    pub offsets: Vec<LinearTerm>,
    #[serde(serialize_with = "ser_terms")]
    pub rho: Vec<LinearTerm>,
}

fn ser_terms<S: serde::Serializer>(ts: &[LinearTerm], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(ts.iter().map(|t| t.to_string()))
}

/// An element of `F_t`: `sum_i coeffs[i] * x_{i+1} + t`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExtTerm {
    pub coeffs: Vec<i64>,
    pub offset: usize,
}

impl ExtTerm {
    pub fn arity(&self) -> usize {
        self.coeffs.len()
    }

    /// Value at the tuple `d` (length `arity`) with offset value `t`.
    pub fn value(&self, d: &[Value], t: Value) -> Value {
        self.coeffs.iter().zip(d).map(|(&a, &x)| a as Value * x).sum::<Value>() + t
    }

    /// The term over the given tuple variables.
    pub fn term(&self, xs: &[Var], ctx: &CollapseContext) -> LinearTerm {
        let parts = self.coeffs.iter().zip(xs).map(|(&a, &x)| (x, a));
        LinearTerm::from_parts(parts, 0).add(&ctx.offsets[self.offset])
    }

    pub fn display(&self, ctx: &CollapseContext) -> String {
        let xs: Vec<Var> = (1..=self.arity()).map(|i| Var::named(&format!("x{i}"))).collect();
        self.term(&xs, ctx).to_string()
    }
}

/// Every `z`-atom `z ⊲ ρ` of normalized bodies, with its relation (`None` for congruences).
pub fn pivot_atoms(bodies: &[Formula], z: Var) -> Vec<(Option<crate::syntax::CmpOp>, u64, LinearTerm)> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for b in bodies {
        b.visit_unique(&mut |f| {
            let item = match f.kind() {
                Kind::Cmp(op, a, rho) if a.as_var() == Some(z) && !rho.mentions(z) => Some((Some(*op), 0, rho.clone())),
                Kind::Cong(q, a, rho) if a.as_var() == Some(z) && !rho.mentions(z) => Some((None, *q, rho.clone())),
                _ => None,
            };
            if let Some(it) = item {
                if seen.insert(format!("{:?}{}{}", it.0, it.1, it.2)) {
                    out.push(it);
                }
            }
        });
    }
    out
}

/// Derives the constants for `Q z <bodies>` where `params` are the free
/// variables of the quantified formula and `body_threshold` bounds the
/// thresholds of already collapsed subformulas.
pub fn collapse_params(
    bodies: &[Formula],
    z: Var,
    params: &[Var],
    group_order: usize,
    body_threshold: u64,
) -> Result<CollapseContext, BoundaryError> {
    let is_param = |v: Var| params.contains(&v);
    let rho: Vec<LinearTerm> = pivot_atoms(bodies, z)
        .into_iter()
        .filter(|(op, _, _)| op.is_some())
        .map(|(_, _, t)| t)
        .unique()
        .collect();
    let s = rho.iter().map(|t| t.vars().filter(|&v| !is_param(v)).count()).max().unwrap_or(0).max(1);
    let alpha_prime = rho
        .iter()
        .flat_map(|t| t.coeffs().filter(|&(v, _)| !is_param(v)).map(|(_, k)| k.abs()))
        .max()
        .unwrap_or(0)
        .max(1);
    let delta = s as i64 * alpha_prime;
    let mut q = 1;
    for b in bodies {
        q = b.moduli().into_iter().fold(q, lcm);
    }
    let p = q * group_order as u64;
    let mut offsets: Vec<LinearTerm> = rho.iter().map(|t| t.restrict(is_param)).collect();
    offsets.push(LinearTerm::constant(0));
    offsets.sort_by(|a, b| a.constant_part().cmp(&b.constant_part()).then_with(|| a.to_string().cmp(&b.to_string())));
    offsets.dedup();
    let cap = |what, value: u64, cap: u64| {
        if value > cap {
            Err(BoundaryError::SizeCap { what, value, cap })
        } else {
            Ok(())
        }
    };
    cap("s", s as u64, MAX_S as u64)?;
    cap("|G|", group_order as u64, MAX_GROUP as u64)?;
    cap("p", p, MAX_P)?;
    let rphi = (3 * s as u64 * delta as u64 + 1).max(body_threshold);
    let ctx = CollapseContext {
        pivot: z,
        params: params.to_vec(),
        s,
        r: params.len(),
        alpha_prime,
        delta,
        q,
        p,
        group_order,
        rphi,
        offsets,
        rho,
    };
    cap("|F| * |G|", (ctx.all_terms().len() * group_order) as u64, MAX_WORK)?;
    Ok(ctx)
}

impl CollapseContext {
    /// Hand-built context, mainly for tests of the tree and the oracles.
    pub fn synthetic(s: usize, delta: i64, q: u64, group_order: usize, offsets: Vec<LinearTerm>) -> Self {
        let mut offsets = offsets;
        if !offsets.contains(&LinearTerm::constant(0)) {
            offsets.push(LinearTerm::constant(0));
        }
        offsets.sort_by(|a, b| a.constant_part().cmp(&b.constant_part()).then_with(|| a.to_string().cmp(&b.to_string())));
        let params = offsets.iter().flat_map(|t| t.vars().collect::<Vec<_>>()).unique().collect::<Vec<_>>();
        CollapseContext {
            pivot: Var::named("z"),
            r: params.len(),
            params,
            s,
            alpha_prime: delta / s as i64,
            delta,
            q,
            p: q * group_order as u64,
            group_order,
            rphi: 3 * s as u64 * delta as u64 + 1,
            offsets,
            rho: vec![],
        }
    }

    /// `F_t` for the offset with index `t`, ordered by arity then coefficients.
    pub fn family(&self, t: usize) -> Vec<ExtTerm> {
        let mut out = Vec::new();
        let alphas: Vec<i64> = (-self.delta..=self.delta).filter(|&a| a != 0).collect();
        out.push(ExtTerm { coeffs: vec![], offset: t });
        for arity in 1..=self.s {
            for coeffs in (0..arity).map(|_| alphas.iter().copied()).multi_cartesian_product() {
                out.push(ExtTerm { coeffs, offset: t });
            }
        }
        out
    }

    /// `F`, the union of all `F_t`.
    pub fn all_terms(&self) -> Vec<ExtTerm> {
        (0..self.offsets.len()).flat_map(|t| self.family(t)).collect()
    }

    pub fn offset_values(&self, a: &Assignment) -> Result<Vec<Value>, BoundaryError> {
        self.offsets
            .iter()
            .map(|t| {
                let mut acc = t.constant_part() as Value;
                for (v, k) in t.coeffs() {
                    acc += k as Value * *a.get(&v).ok_or(BoundaryError::Unassigned(v))?;
                }
                Ok(acc)
            })
            .collect()
    }
}

/// Boundary points and their split by offset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundarySet {
    pub points: Vec<Value>,
    pub per_offset: Vec<Vec<Value>>,
}

/// Where a position lies relative to the boundary points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IntervalId {
    /// The boundary point with this index.
    Point(usize),
    /// The open interval left of the point with this index; `len` is the infinite one.
    Gap(usize),
}

/// Strictly decreasing tuples of length `k` from ascending `nnp`.
pub fn decreasing_tuples(nnp: &[Value], k: usize) -> Vec<Vec<Value>> {
    nnp.iter().rev().copied().combinations(k).collect()
}

pub fn boundary_points(nnp: &[Value], a: &Assignment, ctx: &CollapseContext) -> Result<BoundarySet, BoundaryError> {
    let tv = ctx.offset_values(a)?;
    let alphas: Vec<i64> = (-ctx.delta..=ctx.delta).filter(|&x| x != 0).collect();
    let mut per_offset = Vec::new();
    for &t in &tv {
        let mut set = BTreeSet::new();
        if t >= 0 {
            set.insert(t);
        }
        for k in 1..=ctx.s.min(nnp.len()) {
            for d in decreasing_tuples(nnp, k) {
                for coeffs in (0..k).map(|_| alphas.iter().copied()).multi_cartesian_product() {
                    let v: Value = coeffs.iter().zip(&d).map(|(&c, &x)| c as Value * x).sum::<Value>() + t;
                    if v >= 0 {
                        set.insert(v);
                    }
                }
            }
        }
        per_offset.push(set.into_iter().collect::<Vec<_>>());
    }
    let points: BTreeSet<Value> = per_offset.iter().flatten().copied().collect();
    Ok(BoundarySet { points: points.into_iter().collect(), per_offset })
}

impl BoundarySet {
    pub fn contains(&self, x: Value) -> bool {
        self.points.binary_search(&x).is_ok()
    }

    pub fn max(&self) -> Value {
        *self.points.last().expect("0 is always a boundary point")
    }

    pub fn interval_of(&self, x: Value) -> IntervalId {
        match self.points.binary_search(&x) {
            Ok(i) => IntervalId::Point(i),
            Err(i) => IntervalId::Gap(i),
        }
    }

    fn index(&self, b: Value) -> Result<usize, BoundaryError> {
        self.points.binary_search(&b).map_err(|_| BoundaryError::NotBoundaryPoint(b))
    }

    /// Length of the interval left of `b`.
    pub fn il(&self, b: Value) -> Result<Value, BoundaryError> {
        let i = self.index(b)?;
        let prev = if i == 0 { -1 } else { self.points[i - 1] };
        Ok(b - prev - 1)
    }

    /// Length of the interval right of `b`; `None` for the infinite one.
    pub fn ir(&self, b: Value) -> Result<Option<Value>, BoundaryError> {
        let i = self.index(b)?;
        Ok(self.points.get(i + 1).map(|&n| n - b - 1))
    }

    /// Gap `(lo, hi)` as open bounds; `hi = None` for the infinite interval.
    pub fn gap_bounds(&self, gap: usize) -> (Value, Option<Value>) {
        let lo = if gap == 0 { -1 } else { self.points[gap - 1] };
        (lo, self.points.get(gap).copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    #[test]
    fn parameter_formulas() {
        let ctx = CollapseContext::synthetic(1, 1, 2, 2, vec![]);
        assert_eq!((ctx.delta, ctx.p), (1, 4));
        assert!(ctx.rphi >= 4);
        let ctx = CollapseContext::synthetic(2, 6, 1, 3, vec![]);
        assert_eq!(ctx.delta, 6);
        assert!(ctx.rphi >= 37);
    }

    #[test]
    fn params_from_bodies() {
        let z = Var::named("z");
        let bodies = vec![parse("Q{U1,0} x [!'_'(x)] . < z < 3*x + y & z =mod 2 0 >").unwrap()];
        let ctx = collapse_params(&bodies, z, &[Var::named("y")], 2, 0).unwrap();
        assert_eq!((ctx.s, ctx.alpha_prime, ctx.delta, ctx.q, ctx.p), (1, 3, 3, 2, 4));
        assert_eq!(ctx.offsets.len(), 2);
        assert_eq!(ctx.rphi, 10);
        let plain = collapse_params(&[parse("z > y").unwrap()], z, &[Var::named("y")], 3, 0).unwrap();
        assert_eq!((plain.q, plain.p), (1, 3));
    }

    #[test]
    fn single_point_boundary() {
        let ctx = CollapseContext::synthetic(1, 1, 1, 1, vec![]);
        let b = boundary_points(&[5], &Assignment::new(), &ctx).unwrap();
        assert_eq!(b.points, vec![0, 5]);
        let e = boundary_points(&[], &Assignment::new(), &ctx).unwrap();
        assert_eq!(e.points, vec![0]);
    }

    #[test]
    fn reference_instance_contains_575() {
        let ctx = CollapseContext::synthetic(2, 2, 1, 1, vec![]);
        let b = boundary_points(&[5, 25, 625], &Assignment::new(), &ctx).unwrap();
        assert!(b.contains(575));
        assert!(b.contains(625) && b.contains(25) && b.contains(5));
    }

    #[test]
    fn interval_lengths() {
        let b = BoundarySet { points: vec![0, 5, 25], per_offset: vec![vec![0, 5, 25]] };
        assert_eq!(b.ir(5).unwrap(), Some(19));
        assert_eq!(b.il(25).unwrap(), 19);
        assert_eq!(b.ir(25).unwrap(), None);
        assert_eq!(b.il(0).unwrap(), 0);
        assert_eq!(b.interval_of(7), IntervalId::Gap(2));
        assert_eq!(b.interval_of(30), IntervalId::Gap(3));
        assert!(b.il(3).is_err());
    }
}
