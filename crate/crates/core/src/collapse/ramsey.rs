//! Replacing numeric atoms by order types on a homogeneous subdomain.

use std::collections::{BTreeSet, HashMap, HashSet};

use itertools::Itertools;
use serde::Serialize;

use crate::syntax::{is_active_domain, CmpOp, Formula, Kind, LinearTerm, Value, Var};
use crate::words::{Alphabet, DomainDr};

use super::{collapse, ser_formula, CollapseError, CollapseResult};

/// Largest number of variables in a single numeric atom.
pub const MAX_ATOM_VARS: usize = 6;

/// Up to this many candidates, every subset is tried.
const EXHAUSTIVE_UP_TO: usize = 10;

#[derive(Clone, Debug, Serialize)]
pub struct RamseyResult {
    #[serde(serialize_with = "ser_formula")]
    pub formula: Formula,
    /// The homogeneous subdomain.
    pub y: Vec<Value>,
    /// Distinct numeric atoms that were replaced.
    pub atoms: usize,
    /// Distinct colorings examined.
    pub colorings: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineResult {
    pub r: u64,
    pub collapse: CollapseResult,
    pub ramsey: RamseyResult,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
enum Pred {
    Cmp(CmpOp),
    /// `q` divides the form.
    Div(u64),
}

/// A numeric atom restricted to one order type: `pred(sum_b coeffs[b] * y_b + constant)`
/// for `y_0 < y_1 < ...`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Coloring {
    pred: Pred,
    coeffs: Vec<i64>,
    constant: i64,
}

impl Coloring {
    fn holds(&self, ys: &[Value]) -> bool {
        let mut acc = self.constant as Value;
        for (&c, &y) in self.coeffs.iter().zip(ys) {
            acc = acc.saturating_add((c as Value).saturating_mul(y));
        }
        match self.pred {
            Pred::Cmp(op) => op.holds(acc, 0),
            Pred::Div(q) => acc.rem_euclid(q as Value) == 0,
        }
    }

    fn homogeneous(&self, ys: &[Value]) -> bool {
        let mut first = None;
        ys.iter().copied().combinations(self.coeffs.len()).all(|c| {
            let v = self.holds(&c);
            *first.get_or_insert(v) == v
        })
    }
}

struct Atom {
    pred: Pred,
    form: LinearTerm,
    vars: Vec<Var>,
}

fn numeric_atom(f: &Formula) -> Option<Atom> {
    let (pred, form) = match f.kind() {
        Kind::Cmp(op, a, b) => (Pred::Cmp(*op), a.sub(b)),
        Kind::Cong(q, a, b) => (Pred::Div(*q), b.sub(a)),
        _ => return None,
    };
    let vars: Vec<Var> = form.vars().sorted().collect();
    Some(Atom { pred, form, vars })
}

/// `x ⊲ y` between two variables, which needs no replacement.
fn is_order_atom(f: &Formula) -> bool {
    match f.kind() {
        Kind::Cmp(_, a, b) => a.as_var().is_some() && b.as_var().is_some(),
        _ => false,
    }
}

/// True iff every atom is a letter on a variable or an order atom between variables.
pub fn is_order_only(f: &Formula) -> bool {
    let mut ok = true;
    f.visit_unique(&mut |g| match g.kind() {
        Kind::Cmp(..) => ok &= is_order_atom(g),
        Kind::Cong(..) => ok = false,
        Kind::Letter(_, t) => ok &= t.as_var().is_some(),
        _ => {}
    });
    ok
}

/// All weak orders of `n` items as block indices, each onto `0..blocks`.
fn weak_orders(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for blocks in 1..=n.max(1) {
        for asg in (0..n).map(|_| 0..blocks).multi_cartesian_product() {
            if (0..blocks).all(|b| asg.contains(&b)) {
                out.push(asg);
            }
        }
    }
    if n == 0 {
        out.push(vec![]);
    }
    out
}

fn coloring(atom: &Atom, order: &[usize]) -> Coloring {
    let blocks = order.iter().copied().max().map_or(0, |m| m + 1);
    let mut coeffs = vec![0; blocks];
    for (v, &b) in atom.vars.iter().zip(order) {
        coeffs[b] += atom.form.coeff(*v);
    }
    Coloring { pred: atom.pred, coeffs, constant: atom.form.constant_part() }
}

/// The order type of `vars` given by block indices: equal blocks are equal
/// positions, lower blocks are smaller positions.
pub fn order_type_formula(vars: &[Var], order: &[usize]) -> Formula {
    let mut by_block: Vec<(usize, Var)> = order.iter().copied().zip(vars.iter().copied()).collect();
    by_block.sort();
    Formula::and_all(by_block.windows(2).map(|w| {
        let (a, b) = (LinearTerm::var(w[0].1), LinearTerm::var(w[1].1));
        if w[0].0 == w[1].0 {
            Formula::eq(a, b)
        } else {
            Formula::lt(a, b)
        }
    }))
}

fn candidates(y: &[Value]) -> Vec<Vec<Value>> {
    let n = y.len();
    let mut out: Vec<Vec<Value>> = (0..n).map(|i| y[i..].to_vec()).collect();
    for m in 2..=4 {
        for c in 0..m {
            let sub: Vec<Value> = y.iter().copied().skip(c).step_by(m).collect();
            out.extend((0..sub.len()).map(|i| sub[i..].to_vec()));
        }
    }
    if n <= EXHAUSTIVE_UP_TO {
        for size in (1..n).rev() {
            out.extend(y.iter().copied().combinations(size));
        }
    }
    out
}

/// Largest candidate subset of `y` on which `c` is constant.
fn restrict(y: &[Value], c: &Coloring) -> Vec<Value> {
    if c.coeffs.len() > y.len() || c.homogeneous(y) {
        return y.to_vec();
    }
    let mut best: Vec<Value> = Vec::new();
    let mut seen = HashSet::new();
    for cand in candidates(y) {
        if cand.len() <= best.len() || !seen.insert(cand.clone()) {
            continue;
        }
        if c.homogeneous(&cand) {
            best = cand;
        }
    }
    best
}

/// Finds `Y ⊆ x` on which every numeric atom of `phi` has a constant truth
/// value per order type of its variables, and rewrites `phi` over `<` only.
///
/// The guarantee holds for words whose non-neutral positions lie in `Y`
/// and for parameters taken from `Y`.
pub fn ramsey_reduce(phi: &Formula, x: &[Value], need: usize) -> Result<RamseyResult, CollapseError> {
    let mut atoms: Vec<Formula> = Vec::new();
    phi.visit_unique(&mut |g| {
        if matches!(g.kind(), Kind::Cmp(..) | Kind::Cong(..)) && !is_order_atom(g) {
            atoms.push(g.clone());
        }
    });
    let mut y: Vec<Value> = x.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let mut orders: HashMap<usize, Vec<Vec<usize>>> = HashMap::new();
    let mut done: HashSet<Coloring> = HashSet::new();
    let mut parsed = Vec::new();
    for f in &atoms {
        let atom = numeric_atom(f).expect("numeric atom");
        if atom.vars.len() > MAX_ATOM_VARS {
            return Err(CollapseError::AtomTooWide(atom.vars.len()));
        }
        let ws = orders.entry(atom.vars.len()).or_insert_with(|| weak_orders(atom.vars.len()));
        for w in ws.iter() {
            let c = coloring(&atom, w);
            if done.insert(c.clone()) {
                y = restrict(&y, &c);
            }
        }
        parsed.push((f.node_id(), atom));
    }
    if y.len() < need {
        return Err(CollapseError::RamseyExhausted { need, have: y.len() });
    }
    let mut replacement: HashMap<usize, Formula> = HashMap::new();
    for (id, atom) in &parsed {
        let ws = &orders[&atom.vars.len()];
        let parts = ws.iter().filter_map(|w| {
            let c = coloring(atom, w);
            let k = c.coeffs.len();
            (k <= y.len() && c.holds(&y[..k])).then(|| order_type_formula(&atom.vars, w))
        });
        replacement.insert(*id, Formula::or_any(parts));
    }
    let formula = phi.map_atoms(&mut |a| replacement.get(&a.node_id()).cloned());
    Ok(RamseyResult { formula, y, atoms: parsed.len(), colorings: done.len() })
}

/// Collapse followed by the Ramsey step over the first `max_exp` powers of
/// `r`, where `r` is raised to the collapse threshold if needed.
pub fn pipeline(phi: &Formula, alphabet: &Alphabet, r: Option<u64>, max_exp: u32, need: usize) -> Result<PipelineResult, CollapseError> {
    let c = collapse(phi, alphabet)?;
    if !is_active_domain(&c.formula, alphabet.neutral()) {
        return Err(CollapseError::NotActiveDomain);
    }
    let r = r.unwrap_or(c.threshold).max(c.threshold);
    let d = DomainDr::new(r, max_exp).map_err(|e| CollapseError::Domain(e.to_string()))?;
    let ramsey = ramsey_reduce(&c.formula, &d.points(), need)?;
    Ok(PipelineResult { r, collapse: c, ramsey })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::{eval_omega, Assignment, OmegaPolicy};
    use crate::syntax::parse;
    use crate::words::WordModel;

    fn powers(r: Value, n: u32) -> Vec<Value> {
        (1..=n).map(|i| r.pow(i)).collect()
    }

    #[test]
    fn weak_order_counts() {
        let counts: Vec<usize> = (0..=4).map(|n| weak_orders(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 3, 13, 75]);
    }

    #[test]
    fn doubling_is_below_next_power() {
        let phi = parse("x + x < y").unwrap();
        let x = powers(5, 4);
        let res = ramsey_reduce(&phi, &x, 1).unwrap();
        assert_eq!(res.y, x);
        assert!(is_order_only(&res.formula));
        let (vx, vy) = (Var::named("x"), Var::named("y"));
        for &a in &x {
            for &b in &x {
                let env = Assignment::from([(vx, a), (vy, b)]);
                let w = WordModel::empty(Alphabet::with_neutral([], '_'));
                let got = eval_omega(&res.formula, &w, &env, &OmegaPolicy::default()).unwrap().as_bool();
                assert_eq!(got, Some(2 * a < b));
            }
        }
    }

    #[test]
    fn order_atoms_are_kept() {
        let phi = parse("x < y").unwrap();
        let res = ramsey_reduce(&phi, &powers(5, 4), 1).unwrap();
        assert_eq!(res.formula, phi);
        assert_eq!(res.atoms, 0);
    }

    #[test]
    fn sums_of_powers_are_never_powers() {
        let phi = parse("x + y = z").unwrap();
        let x = powers(5, 6);
        let res = ramsey_reduce(&phi, &x, 1).unwrap();
        assert_eq!(res.y, x);
        for (a, b, c) in x.iter().tuple_combinations() {
            assert!(a + b != *c && a + a != *c && b + b != *c);
        }
        assert!(res.formula.is_false());
    }

    #[test]
    fn congruence_picks_a_residue_class() {
        let phi = parse("x =mod 3 1").unwrap();
        let res = ramsey_reduce(&phi, &powers(2, 8), 3).unwrap();
        assert_eq!(res.y.len(), 4);
        let residue = res.y[0] % 3;
        assert!(res.y.iter().all(|v| v % 3 == residue));
        assert_eq!(res.formula.is_true(), residue == 1);
    }

    #[test]
    fn small_offsets_shrink_the_domain() {
        let phi = parse("x + 20 < y").unwrap();
        let res = ramsey_reduce(&phi, &powers(3, 6), 2).unwrap();
        // 9 + 20 > 27 but 3 + 20 < 27; only one of 3 and 9 can stay.
        assert_eq!(res.y.len(), 5);
        assert!(res.y.iter().tuple_combinations().all(|(a, b)| a + 20 < *b));
        assert!(is_order_only(&res.formula));
    }

    #[test]
    fn exhausted_when_too_few_remain() {
        let phi = parse("x =mod 3 1").unwrap();
        let err = ramsey_reduce(&phi, &powers(2, 4), 3).unwrap_err();
        assert_eq!(err, CollapseError::RamseyExhausted { need: 3, have: 2 });
    }
}
