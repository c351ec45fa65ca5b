use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::algebra::{lcm, MonoidTable};
use crate::words::Alphabet;

use super::formula::{ad_guard, Formula, Kind};
use super::term::{LinearTerm, Var};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NormalizeError {
    #[error("no monoid with a non-identity element is available for rewriting letter atoms")]
    NoMonoidAvailable,
    #[error("coefficient of {0} overflows during scaling")]
    Overflow(Var),
}

/// A formula whose `pivot` atoms all read `pivot ⊲ ρ`. The pivot stands for
/// `divisor` times the original variable.
#[derive(Clone, Debug)]
pub struct NormalizedFormula {
    pub formula: Formula,
    pub pivot: Var,
    pub divisor: u64,
}

/// Normal form of a single formula in `z`.
pub fn normalize(
    phi: &Formula,
    z: Var,
    alphabet: &Alphabet,
    trick: Option<&Arc<MonoidTable>>,
) -> Result<NormalizedFormula, NormalizeError> {
    let (mut fs, divisor) = normalize_bodies(std::slice::from_ref(phi), z, alphabet, trick)?;
    Ok(NormalizedFormula { formula: fs.pop().unwrap(), pivot: z, divisor })
}

/// Normalizes the bodies of a quantifier over `z` with one common divisor `n`.
///
/// Letter atoms on `z` or on compound terms become
/// `Q{M,m1} x [!λ(x)] . < x = σ & c(x), false, ... >`; then every `z`-atom is
/// scaled to coefficient `±n`, `n z` is renamed to `z`, and `z =mod n 0` is
/// conjoined to each body. A quantifier over `z` with the original bodies has
/// the same value as one over `z` with the returned bodies, because `z ↦ n z`
/// is order-preserving and every other position contributes the identity.
pub fn normalize_bodies(
    bodies: &[Formula],
    z: Var,
    alphabet: &Alphabet,
    trick: Option<&Arc<MonoidTable>>,
) -> Result<(Vec<Formula>, u64), NormalizeError> {
    let trick = trick.filter(|m| m.arity() > 0);
    let mut stage1 = Vec::new();
    {
        let mut rw = LetterRewriter { z, alphabet, trick, memo: HashMap::new() };
        for b in bodies {
            stage1.push(rw.rewrite(b)?);
        }
    }
    let mut n = 1u64;
    for b in &stage1 {
        collect_z_coeffs(b, z, &mut n, &mut HashMap::new());
    }
    let mut memo = HashMap::new();
    let mut out = Vec::new();
    for b in &stage1 {
        let f = scale_z(b, z, n, &mut memo)?;
        out.push(Formula::and2(f, Formula::cong(n, LinearTerm::var(z), LinearTerm::constant(0))));
    }
    Ok((out, n))
}

struct LetterRewriter<'a> {
    z: Var,
    alphabet: &'a Alphabet,
    trick: Option<&'a Arc<MonoidTable>>,
    memo: HashMap<usize, Formula>,
}

impl LetterRewriter<'_> {
    fn rewrite(&mut self, f: &Formula) -> Result<Formula, NormalizeError> {
        if let Some(r) = self.memo.get(&f.node_id()) {
            return Ok(r.clone());
        }
        let out = match f.kind() {
            Kind::Letter(c, t) if t.as_var().is_none() || t.mentions(self.z) => self.letter(*c, t)?,
            Kind::Not(g) => Formula::negate(self.rewrite(g)?),
            Kind::And(gs) => Formula::and_all(gs.iter().map(|g| self.rewrite(g)).collect::<Result<Vec<_>, _>>()?),
            Kind::Or(gs) => Formula::or_any(gs.iter().map(|g| self.rewrite(g)).collect::<Result<Vec<_>, _>>()?),
            Kind::Quant(q) if q.var != self.z => {
                let guard = q.guard.as_ref().map(|g| self.rewrite(g)).transpose()?;
                let bodies = q.bodies.iter().map(|g| self.rewrite(g)).collect::<Result<_, _>>()?;
                Formula::quant(q.monoid.clone(), q.target, q.var, guard, bodies)
            }
            _ => f.clone(),
        };
        self.memo.insert(f.node_id(), out.clone());
        Ok(out)
    }

    fn letter(&self, c: char, sigma: &LinearTerm) -> Result<Formula, NormalizeError> {
        if c == self.alphabet.neutral() {
            let nonneg = Formula::negate(Formula::lt(sigma.clone(), LinearTerm::constant(0)));
            let others: Result<Vec<_>, _> =
                self.alphabet.non_neutral().map(|d| self.letter(d, sigma).map(Formula::negate)).collect();
            return Ok(Formula::and_all(std::iter::once(nonneg).chain(others?)));
        }
        let m = self.trick.ok_or(NormalizeError::NoMonoidAvailable)?;
        let x = Var::fresh("w");
        let mut bodies = vec![Formula::ff(); m.arity()];
        bodies[0] = Formula::and2(
            Formula::eq(LinearTerm::var(x), sigma.clone()),
            Formula::letter(c, LinearTerm::var(x)),
        );
        Ok(Formula::quant(
            m.clone(),
            m.body_element(1),
            x,
            Some(ad_guard(self.alphabet.neutral(), x)),
            bodies,
        ))
    }
}

fn z_coeff(a: &LinearTerm, b: &LinearTerm, z: Var) -> i64 {
    a.coeff(z) - b.coeff(z)
}

fn collect_z_coeffs(f: &Formula, z: Var, n: &mut u64, seen: &mut HashMap<usize, ()>) {
    if !f.is_free(z) || seen.insert(f.node_id(), ()).is_some() {
        return;
    }
    match f.kind() {
        Kind::Cmp(_, a, b) | Kind::Cong(_, a, b) => {
            let c = z_coeff(a, b, z);
            if c != 0 {
                *n = lcm(*n, c.unsigned_abs());
            }
        }
        _ => f.children().into_iter().for_each(|g| collect_z_coeffs(g, z, n, seen)),
    }
}

fn scale_z(f: &Formula, z: Var, n: u64, memo: &mut HashMap<usize, Formula>) -> Result<Formula, NormalizeError> {
    if !f.is_free(z) {
        return Ok(f.clone());
    }
    if let Some(r) = memo.get(&f.node_id()) {
        return Ok(r.clone());
    }
    let out = match f.kind() {
        Kind::Cmp(_, a, b) | Kind::Cong(_, a, b) if z_coeff(a, b, z) == 0 => f.clone(),
        Kind::Cmp(op, a, b) => {
            let (rho, flip) = pivot_rhs(a, b, z, n)?;
            Formula::cmp(if flip { op.flip() } else { *op }, LinearTerm::var(z), rho)
        }
        Kind::Cong(q, a, b) => {
            let c = z_coeff(a, b, z);
            let k = n / c.unsigned_abs();
            let (rho, _) = pivot_rhs(a, b, z, n)?;
            let q2 = q.checked_mul(k).ok_or(NormalizeError::Overflow(z))?;
            Formula::cong(q2, LinearTerm::var(z), rho)
        }
        Kind::Not(g) => Formula::negate(scale_z(g, z, n, memo)?),
        Kind::And(gs) => Formula::and_all(gs.iter().map(|g| scale_z(g, z, n, memo)).collect::<Result<Vec<_>, _>>()?),
        Kind::Or(gs) => Formula::or_any(gs.iter().map(|g| scale_z(g, z, n, memo)).collect::<Result<Vec<_>, _>>()?),
        Kind::Quant(q) => {
            let guard = q.guard.as_ref().map(|g| scale_z(g, z, n, memo)).transpose()?;
            let bodies = q.bodies.iter().map(|g| scale_z(g, z, n, memo)).collect::<Result<_, _>>()?;
            Formula::quant(q.monoid.clone(), q.target, q.var, guard, bodies)
        }
        _ => f.clone(),
    };
    memo.insert(f.node_id(), out.clone());
    Ok(out)
}

/// For `a ⊲ b` with `z`-coefficient `c` in `a - b`, returns `ρ` and whether
/// the relation flips, so that the atom reads `n z ⊲' ρ`.
fn pivot_rhs(a: &LinearTerm, b: &LinearTerm, z: Var, n: u64) -> Result<(LinearTerm, bool), NormalizeError> {
    let d = a.sub(b);
    let c = d.coeff(z);
    let k = (n / c.unsigned_abs()) as i64;
    let rest = d.without(z);
    let scale = if c > 0 { -k } else { k };
    for (_, v) in rest.coeffs() {
        v.checked_mul(scale).ok_or(NormalizeError::Overflow(z))?;
    }
    rest.constant_part().checked_mul(scale).ok_or(NormalizeError::Overflow(z))?;
    Ok((rest.scale(scale), c < 0))
}
