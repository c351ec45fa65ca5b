use std::collections::HashMap;

use crate::algebra::{Elem, GroupTable};
use crate::boundary::{BoundarySet, CollapseContext};
use crate::syntax::{is_active_domain, Formula, Value, Var};
use crate::words::WordModel;

use super::eval::Evaluator;
use super::{Assignment, OmegaPolicy, SemanticsError};

type Res<T> = Result<T, SemanticsError>;

/// Infinite product computed interval by interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntervalProduct {
    Defined(Elem),
    /// A non-identity value occurs in the infinite interval.
    Undefined,
}

/// Caches `u(i)` for one quantifier instance.
struct PositionValues<'a, 'w> {
    ev: Evaluator<'w>,
    group: &'a GroupTable,
    var: Var,
    bodies: &'a [Formula],
    a: &'a Assignment,
    cache: HashMap<Value, Elem>,
}

impl PositionValues<'_, '_> {
    fn u(&mut self, i: Value) -> Res<Elem> {
        if i < 0 {
            return Ok(self.group.identity());
        }
        if let Some(&e) = self.cache.get(&i) {
            return Ok(e);
        }
        let e = self
            .ev
            .u_at_with(self.group.monoid(), self.var, self.bodies, i, self.a)?
            .ok_or(SemanticsError::NonConvergent)?;
        self.cache.insert(i, e);
        Ok(e)
    }

    fn range(&mut self, from: Value, to_inclusive: Value) -> Res<Elem> {
        let mut acc = self.group.identity();
        for i in from..=to_inclusive {
            acc = self.group.mul(acc, self.u(i)?);
        }
        Ok(acc)
    }
}

fn position_values<'a, 'w>(
    group: &'a GroupTable,
    var: Var,
    bodies: &'a [Formula],
    w: &'w WordModel,
    a: &'a Assignment,
) -> PositionValues<'a, 'w> {
    let f = Formula::or_any(bodies.iter().cloned());
    PositionValues {
        ev: Evaluator::omega(w, &f, &OmegaPolicy::default()),
        group,
        var,
        bodies,
        a,
        cache: HashMap::new(),
    }
}

/// Exact product of `Q z <bodies>` over `N` using the interval structure:
/// inside a finite interval the values repeat with period `q`, so a gap is a
/// power of one block with the exponent reduced mod `|G|`.
pub fn interval_eval_quant(
    bodies: &[Formula],
    var: Var,
    group: &GroupTable,
    w: &WordModel,
    a: &Assignment,
    b: &BoundarySet,
    q: u64,
) -> Res<IntervalProduct> {
    if !bodies.iter().all(|f| is_active_domain(f, w.neutral())) {
        return Err(SemanticsError::BodiesNotActiveDomain);
    }
    let q = q.max(1) as Value;
    let order = group.size() as u128;
    let mut pv = position_values(group, var, bodies, w, a);
    let mut acc = group.identity();
    let mut lo: Value = -1;
    for &pt in &b.points {
        let len = pt - lo - 1;
        if len > 0 {
            let full = len / q;
            let rem = len % q;
            let block = if full > 0 { pv.range(lo + 1, lo + q)? } else { group.identity() };
            let tail = pv.range(lo + 1, lo + rem)?;
            acc = group.mul(acc, group.mul(group.power(block, (full as u128) % order), tail));
        }
        acc = group.mul(acc, pv.u(pt)?);
        lo = pt;
    }
    for i in lo + 1..=lo + q {
        if pv.u(i)? != group.identity() {
            return Ok(IntervalProduct::Undefined);
        }
    }
    Ok(IntervalProduct::Defined(acc))
}

/// All values `N_k(b)` and `N̂_k(b)` for one instance.
#[derive(Clone, Debug)]
pub struct NkOracle {
    points: Vec<Value>,
    n: Vec<Vec<Elem>>,
    nhat: Vec<Vec<Elem>>,
    u_at_points: Vec<Elem>,
}

impl NkOracle {
    /// Builds the tables from position values `u`.
    pub fn build(
        group: &GroupTable,
        b: &BoundarySet,
        p: u64,
        mut u: impl FnMut(Value) -> Res<Elem>,
    ) -> Res<NkOracle> {
        let p = p as Value;
        let pts = b.points.clone();
        let range = |u: &mut dyn FnMut(Value) -> Res<Elem>, from: Value, to: Value| -> Res<Elem> {
            let mut acc = group.identity();
            for i in from..=to {
                acc = group.mul(acc, u(i)?);
            }
            Ok(acc)
        };
        let mut n0 = Vec::with_capacity(pts.len());
        let mut nh0 = Vec::with_capacity(pts.len());
        for (i, &bp) in pts.iter().enumerate() {
            let ir = pts.get(i + 1).map(|&nx| nx - bp - 1);
            let n = match ir {
                Some(ir) if ir < p => range(&mut u, bp + 1, bp + ir)?,
                _ => {
                    let r = (-bp).rem_euclid(p);
                    range(&mut u, bp + 1, bp + r)?
                }
            };
            n0.push(n);
            let il = bp - if i == 0 { -1 } else { pts[i - 1] } - 1;
            let nh = if il < p {
                group.identity()
            } else {
                let c = (bp - 1).rem_euclid(p) + 1;
                range(&mut u, bp - p, bp - c)?
            };
            nh0.push(nh);
        }
        let u_at_points: Vec<Elem> = pts.iter().map(|&x| u(x)).collect::<Res<_>>()?;
        let mut n = vec![n0];
        let mut nhat = vec![nh0];
        for k in 1..=b.per_offset.len() {
            let layer = &b.per_offset[k - 1];
            let (pn, ph) = (&n[k - 1], &nhat[k - 1]);
            let idx = |x: Value| pts.binary_search(&x).expect("per-offset points are boundary points");
            // suffix[j]: product over layer points with index >= j
            let mut suffix = vec![group.identity(); layer.len() + 1];
            for j in (0..layer.len()).rev() {
                let bi = idx(layer[j]);
                let x = group.mul(group.mul(group.inv(ph[bi]), u_at_points[bi]), pn[bi]);
                suffix[j] = group.mul(x, suffix[j + 1]);
            }
            let mut nk = Vec::with_capacity(pts.len());
            let mut nhk = Vec::with_capacity(pts.len());
            for (i, &bp) in pts.iter().enumerate() {
                // N_k takes layer points > b, N̂_k takes those >= b
                let j = layer.partition_point(|&x| x <= bp);
                let jh = layer.partition_point(|&x| x < bp);
                nk.push(group.mul(pn[i], suffix[j]));
                nhk.push(group.mul(ph[i], suffix[jh]));
            }
            n.push(nk);
            nhat.push(nhk);
        }
        Ok(NkOracle { points: pts, n, nhat, u_at_points })
    }

    fn index(&self, k: usize, b: Value) -> Res<usize> {
        if k >= self.n.len() {
            return Err(SemanticsError::OffsetOutOfRange { k, len: self.n.len() - 1 });
        }
        self.points.binary_search(&b).map_err(|_| SemanticsError::NotBoundaryPoint(b))
    }

    pub fn n(&self, k: usize, b: Value) -> Res<Elem> {
        let i = self.index(k, b)?;
        Ok(self.n[k][i])
    }

    pub fn nhat(&self, k: usize, b: Value) -> Res<Elem> {
        let i = self.index(k, b)?;
        Ok(self.nhat[k][i])
    }

    pub fn levels(&self) -> usize {
        self.n.len() - 1
    }

    pub fn u_at(&self, b: Value) -> Res<Elem> {
        let i = self.index(0, b)?;
        Ok(self.u_at_points[i])
    }
}

/// Builds the oracle for `Q z <bodies>` on `w` under `a`.
pub fn nk_oracle_for(
    bodies: &[Formula],
    var: Var,
    group: &GroupTable,
    w: &WordModel,
    a: &Assignment,
    b: &BoundarySet,
    ctx: &CollapseContext,
) -> Res<NkOracle> {
    let mut pv = position_values(group, var, bodies, w, a);
    NkOracle::build(group, b, ctx.p, |i| pv.u(i))
}

/// `N_k(b)`.
pub fn nk_oracle(
    bodies: &[Formula],
    var: Var,
    group: &GroupTable,
    w: &WordModel,
    a: &Assignment,
    b: &BoundarySet,
    ctx: &CollapseContext,
    k: usize,
    point: Value,
) -> Res<Elem> {
    nk_oracle_for(bodies, var, group, w, a, b, ctx)?.n(k, point)
}

/// `N̂_k(b)`.
pub fn nkhat_oracle(
    bodies: &[Formula],
    var: Var,
    group: &GroupTable,
    w: &WordModel,
    a: &Assignment,
    b: &BoundarySet,
    ctx: &CollapseContext,
    k: usize,
    point: Value,
) -> Res<Elem> {
    nk_oracle_for(bodies, var, group, w, a, b, ctx)?.nhat(k, point)
}
