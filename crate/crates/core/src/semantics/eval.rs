use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use crate::algebra::{lcm, Elem, MonoidTable};
use crate::syntax::{Formula, Kind, LinearTerm, Quant, Value, Var};
use crate::words::WordModel;

use super::{Assignment, OmegaPolicy, OmegaVerdict, SemanticsError};

/// Three-valued truth; `None` means the value depends on the horizon.
pub(crate) type Tv = Option<bool>;

type Res<T> = Result<T, SemanticsError>;

#[derive(Clone, Copy, Debug)]
enum Mode {
    Finite(Value),
    Omega { h_min: Value, window: Value, kappa: Value, slack: Value, undefined_is_false: bool },
}

struct AtomInfo {
    atoms: Vec<Formula>,
    period: Value,
}

/// Evaluator for one word. Results of quantifier and shared subformulas are
/// cached per assignment of their free variables.
pub struct Evaluator<'w> {
    w: &'w WordModel,
    mode: Mode,
    support: Vec<Value>,
    env: Vec<(Var, Value)>,
    memo: HashMap<(usize, Box<[Value]>), Tv>,
    atom_cache: HashMap<usize, Rc<AtomInfo>>,
    brute: bool,
}

fn overflow<T>(v: Option<T>) -> Res<T> {
    v.ok_or(SemanticsError::Overflow)
}

impl<'w> Evaluator<'w> {
    /// Quantifiers range over `[0, horizon)`.
    pub fn finite(w: &'w WordModel, horizon: Value) -> Self {
        Self::with_mode(w, Mode::Finite(horizon))
    }

    /// Like [`Evaluator::finite`] but visits every position of every
    /// quantifier; the reference for the faster strategies.
    pub fn finite_brute(w: &'w WordModel, horizon: Value) -> Self {
        let mut e = Self::with_mode(w, Mode::Finite(horizon));
        e.brute = true;
        e
    }

    /// Quantifiers range over all of `N`; products are limits of partial products.
    pub fn omega(w: &'w WordModel, phi: &Formula, policy: &OmegaPolicy) -> Self {
        let (kappa, slack) = growth_constants(phi);
        let lambda = policy.lambda.unwrap_or_else(|| default_lambda(phi)).max(1) as Value;
        let window = lambda * policy.probes.max(1) as Value;
        Self::with_mode(
            w,
            Mode::Omega {
                h_min: policy.h0.unwrap_or(0),
                window,
                kappa,
                slack,
                undefined_is_false: policy.undefined_is_false,
            },
        )
    }

    fn with_mode(w: &'w WordModel, mode: Mode) -> Self {
        Evaluator {
            w,
            mode,
            support: w.nnp(),
            env: Vec::new(),
            memo: HashMap::new(),
            atom_cache: HashMap::new(),
            brute: false,
        }
    }

    pub fn word(&self) -> &WordModel {
        self.w
    }

    /// Evaluates `f` under `a`; `None` when an infinite product has no limit
    /// or a horizon probe disagrees.
    pub fn eval(&mut self, f: &Formula, a: &Assignment) -> Res<Tv> {
        for v in f.free_vars() {
            if !a.contains_key(v) {
                return Err(SemanticsError::Unassigned(*v));
            }
        }
        let saved = std::mem::take(&mut self.env);
        self.env = a.iter().map(|(&v, &x)| (v, x)).collect();
        let r = self.eval_f(f);
        self.env = saved;
        r
    }

    /// Value of the quantifier product under `a`.
    pub fn quant_product(&mut self, q: &Quant, a: &Assignment) -> Res<Option<Elem>> {
        let saved = std::mem::take(&mut self.env);
        self.env = a.iter().map(|(&v, &x)| (v, x)).collect();
        let r = self.product(q);
        self.env = saved;
        r
    }

    /// The position value `u(i)` of the bodies under `a`.
    pub fn u_at_with(
        &mut self,
        monoid: &MonoidTable,
        var: Var,
        bodies: &[Formula],
        i: Value,
        a: &Assignment,
    ) -> Res<Option<Elem>> {
        let saved = std::mem::take(&mut self.env);
        self.env = a.iter().map(|(&v, &x)| (v, x)).collect();
        let r = self.u_bodies(monoid, var, None, bodies, i);
        self.env = saved;
        r
    }

    fn lookup(&self, v: Var) -> Res<Value> {
        self.env.iter().rev().find(|(u, _)| *u == v).map(|p| p.1).ok_or(SemanticsError::Unassigned(v))
    }

    fn term(&self, t: &LinearTerm) -> Res<Value> {
        let mut acc = t.constant_part() as Value;
        for (v, k) in t.coeffs() {
            let x = self.lookup(v)?;
            acc = overflow(acc.checked_add(overflow((k as Value).checked_mul(x))?))?;
        }
        Ok(acc)
    }

    fn memo_key(&self, f: &Formula) -> Res<(usize, Box<[Value]>)> {
        let vals: Res<Vec<Value>> = f.free_vars().iter().map(|&v| self.lookup(v)).collect();
        Ok((f.node_id(), vals?.into_boxed_slice()))
    }

    fn eval_f(&mut self, f: &Formula) -> Res<Tv> {
        let cacheable = match f.kind() {
            Kind::Quant(_) => true,
            Kind::And(_) | Kind::Or(_) | Kind::Not(_) => f.is_shared() && f.quantifier_depth() > 0,
            _ => false,
        };
        let key = if cacheable { Some(self.memo_key(f)?) } else { None };
        if let Some(k) = &key {
            if let Some(&v) = self.memo.get(k) {
                return Ok(v);
            }
        }
        let out = match f.kind() {
            Kind::True => Some(true),
            Kind::False => Some(false),
            Kind::Letter(c, t) => {
                let v = self.term(t)?;
                Some(v >= 0 && self.w.letter_at(v) == *c)
            }
            Kind::Cmp(op, a, b) => Some(op.holds(self.term(a)?, self.term(b)?)),
            Kind::Cong(q, a, b) => Some((self.term(b)? - self.term(a)?).rem_euclid(*q as Value) == 0),
            Kind::Not(g) => self.eval_f(g)?.map(|b| !b),
            Kind::And(gs) => {
                let mut acc = Some(true);
                for g in gs {
                    match self.eval_f(g)? {
                        Some(false) => {
                            acc = Some(false);
                            break;
                        }
                        None => acc = None,
                        Some(true) => {}
                    }
                }
                acc
            }
            Kind::Or(gs) => {
                let mut acc = Some(false);
                for g in gs {
                    match self.eval_f(g)? {
                        Some(true) => {
                            acc = Some(true);
                            break;
                        }
                        None => acc = None,
                        Some(false) => {}
                    }
                }
                acc
            }
            Kind::Quant(q) => match (self.product(q)?, self.mode) {
                (Some(m), _) => Some(m == q.target),
                (None, Mode::Omega { undefined_is_false: true, .. }) => Some(false),
                (None, _) => None,
            },
        };
        if let Some(k) = key {
            self.memo.insert(k, out);
        }
        Ok(out)
    }

    fn u_bodies(
        &mut self,
        m: &MonoidTable,
        var: Var,
        guard: Option<&Formula>,
        bodies: &[Formula],
        i: Value,
    ) -> Res<Option<Elem>> {
        self.env.push((var, i));
        let r = (|| {
            if let Some(g) = guard {
                match self.eval_f(g)? {
                    Some(false) => return Ok(Some(m.identity())),
                    None => return Ok(None),
                    Some(true) => {}
                }
            }
            for (j, b) in bodies.iter().enumerate() {
                match self.eval_f(b)? {
                    Some(true) => return Ok(Some(m.body_element(j + 1))),
                    None => return Ok(None),
                    Some(false) => {}
                }
            }
            Ok(Some(m.identity()))
        })();
        self.env.pop();
        r
    }

    fn u(&mut self, q: &Quant, i: Value) -> Res<Option<Elem>> {
        self.u_bodies(&q.monoid, q.var, q.guard.as_ref(), &q.bodies, i)
    }

    fn product(&mut self, q: &Quant) -> Res<Option<Elem>> {
        if self.brute {
            return self.brute_product(q);
        }
        if q.is_ad_quant(self.w.neutral()) {
            return self.support_product(q);
        }
        let qf = q.guard.iter().chain(q.bodies.iter()).all(|b| b.quantifier_depth() == 0);
        if qf {
            self.segment_product(q)
        } else {
            self.brute_product(q)
        }
    }

    fn support_product(&mut self, q: &Quant) -> Res<Option<Elem>> {
        let m = q.monoid.clone();
        let mut acc = m.identity();
        let limit = match self.mode {
            Mode::Finite(h) => h,
            Mode::Omega { .. } => Value::MAX,
        };
        let support = self.support.clone();
        for i in support.into_iter().take_while(|&i| i < limit) {
            match self.u(q, i)? {
                Some(e) => acc = m.mul(acc, e),
                None => return Ok(None),
            }
        }
        Ok(Some(acc))
    }

    fn brute_product(&mut self, q: &Quant) -> Res<Option<Elem>> {
        let m = q.monoid.clone();
        let (h, window) = match self.mode {
            Mode::Finite(h) => (h, 0),
            Mode::Omega { h_min, window, kappa, slack, .. } => {
                let top = self.env.iter().map(|p| p.1).chain(self.support.last().copied()).max().unwrap_or(0);
                let grown = overflow(kappa.checked_mul(top.max(0) + 1).and_then(|v| v.checked_add(slack)))?;
                (h_min.max(grown), window)
            }
        };
        let mut acc = m.identity();
        for i in 0..h {
            match self.u(q, i)? {
                Some(e) => acc = m.mul(acc, e),
                None => return Ok(None),
            }
        }
        let settled = acc;
        for i in h..h + window {
            match self.u(q, i)? {
                Some(e) => acc = m.mul(acc, e),
                None => return Ok(None),
            }
            if acc != settled {
                return Ok(None);
            }
        }
        Ok(Some(settled))
    }

    fn atoms_of(&mut self, q: &Quant) -> Rc<AtomInfo> {
        let key = q as *const Quant as usize;
        if let Some(a) = self.atom_cache.get(&key) {
            return a.clone();
        }
        let mut atoms = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut period: u64 = 1;
        for b in q.guard.iter().chain(q.bodies.iter()) {
            b.visit_unique(&mut |f| {
                if matches!(f.kind(), Kind::Letter(..) | Kind::Cmp(..) | Kind::Cong(..)) && seen.insert(f.node_id()) {
                    if let Kind::Cong(m, ..) = f.kind() {
                        period = lcm(period, *m);
                    }
                    atoms.push(f.clone());
                }
            });
        }
        let info = Rc::new(AtomInfo { atoms, period: period as Value });
        self.atom_cache.insert(key, info.clone());
        info
    }

    /// Positions where some atom of `q` can change its truth value, other
    /// than through congruences.
    fn breakpoints(&mut self, q: &Quant, info: &AtomInfo) -> Res<BTreeSet<Value>> {
        let x = q.var;
        let mut pts = BTreeSet::new();
        let root = |a: Value, b: Value, pts: &mut BTreeSet<Value>| {
            let fl = floor_div(-b, a);
            for d in -1..=1 {
                if fl + d >= 0 {
                    pts.insert(fl + d);
                }
            }
        };
        for atom in &info.atoms {
            match atom.kind() {
                Kind::Cmp(_, t1, t2) => {
                    let d = t1.sub(t2);
                    let a = d.coeff(x) as Value;
                    if a != 0 {
                        let b = self.term(&d.without(x))?;
                        root(a, b, &mut pts);
                    }
                }
                Kind::Letter(_, t) => {
                    let a = t.coeff(x) as Value;
                    if a != 0 {
                        let b = self.term(&t.without(x))?;
                        root(a, b, &mut pts);
                        for &s in &self.support {
                            if (s - b).rem_euclid(a) == 0 {
                                let z = (s - b) / a;
                                if z >= 0 {
                                    pts.insert(z);
                                }
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(pts)
    }

    fn segment_product(&mut self, q: &Quant) -> Res<Option<Elem>> {
        let m = q.monoid.clone();
        let info = self.atoms_of(q);
        let pts = self.breakpoints(q, &info)?;
        let period = info.period;
        let limit = match self.mode {
            Mode::Finite(h) => Some(h),
            Mode::Omega { .. } => None,
        };
        let mut acc = m.identity();
        let mut cur: Value = 0;
        for &p in &pts {
            if let Some(h) = limit {
                if p >= h {
                    break;
                }
            }
            match self.gap_product(q, cur, p, period)? {
                Some(e) => acc = m.mul(acc, e),
                None => return Ok(None),
            }
            match self.u(q, p)? {
                Some(e) => acc = m.mul(acc, e),
                None => return Ok(None),
            }
            cur = p + 1;
        }
        match limit {
            Some(h) => {
                if cur < h {
                    match self.gap_product(q, cur, h, period)? {
                        Some(e) => acc = m.mul(acc, e),
                        None => return Ok(None),
                    }
                }
                Ok(Some(acc))
            }
            None => {
                let mut block = Vec::with_capacity(period as usize);
                for i in cur..cur + period {
                    match self.u(q, i)? {
                        Some(e) => block.push(e),
                        None => return Ok(None),
                    }
                }
                Ok(limit_of(&m, acc, &block))
            }
        }
    }

    /// Product over `[a, b)` where the values are `period`-periodic.
    fn gap_product(&mut self, q: &Quant, a: Value, b: Value, period: Value) -> Res<Option<Elem>> {
        let m = q.monoid.clone();
        let len = b - a;
        if len <= 0 {
            return Ok(Some(m.identity()));
        }
        let direct = |ev: &mut Self, from: Value, to: Value| -> Res<Option<Elem>> {
            let mut acc = m.identity();
            for i in from..to {
                match ev.u(q, i)? {
                    Some(e) => acc = m.mul(acc, e),
                    None => return Ok(None),
                }
            }
            Ok(Some(acc))
        };
        if len <= 2 * period {
            return direct(self, a, b);
        }
        let Some(block) = direct(self, a, a + period)? else { return Ok(None) };
        let full = len / period;
        let Some(rest) = direct(self, a, a + len % period)? else { return Ok(None) };
        Ok(Some(m.mul(m.power(block, full as u128), rest)))
    }
}

fn floor_div(a: Value, b: Value) -> Value {
    let d = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        d - 1
    } else {
        d
    }
}

/// Limit of `x0 * block^k * (prefix of block)` as the position grows, if the
/// partial products are eventually constant.
pub(crate) fn limit_of(m: &MonoidTable, x0: Elem, block: &[Elem]) -> Option<Elem> {
    let mut seen = HashMap::new();
    let mut starts = Vec::new();
    let mut x = x0;
    let k0 = loop {
        if let Some(&k) = seen.get(&x) {
            break k;
        }
        seen.insert(x, starts.len());
        starts.push(x);
        x = block.iter().fold(x, |acc, &e| m.mul(acc, e));
    };
    let c = starts[k0];
    for &s in &starts[k0..] {
        let mut v = s;
        if v != c {
            return None;
        }
        for &e in block {
            v = m.mul(v, e);
            if v != c {
                return None;
            }
        }
    }
    Some(c)
}

/// `(kappa, slack)` such that every term of `phi` maps values below `H` to
/// values below `kappa * H + slack`.
fn growth_constants(phi: &Formula) -> (Value, Value) {
    let mut kappa: Value = 2;
    let mut slack: Value = 1;
    phi.visit_unique(&mut |f| {
        let terms: Vec<&LinearTerm> = match f.kind() {
            Kind::Letter(_, t) => vec![t],
            Kind::Cmp(_, a, b) | Kind::Cong(_, a, b) => vec![a, b],
            _ => vec![],
        };
        for t in terms {
            let s: Value = t.coeffs().map(|(_, k)| (k as Value).abs()).sum();
            kappa = kappa.max(s + 1);
            slack = slack.max((t.constant_part() as Value).abs() + 1);
        }
    });
    (kappa, slack)
}

/// Product of all moduli and monoid sizes occurring in `phi`, as an lcm.
fn default_lambda(phi: &Formula) -> u64 {
    let mods = phi.moduli().into_iter().fold(1, lcm);
    phi.monoids().iter().fold(mods, |acc, m| lcm(acc, m.size() as u64))
}

fn horizon_floor(w: &WordModel, a: &Assignment) -> Value {
    1 + w.max_position().into_iter().chain(a.values().copied()).max().unwrap_or(0).max(0)
}

/// Truth of `phi` with every quantifier ranging over `[0, horizon)`.
pub fn eval_finite(phi: &Formula, w: &WordModel, a: &Assignment, horizon: Value) -> Result<bool, SemanticsError> {
    let need = horizon_floor(w, a);
    if horizon < need {
        return Err(SemanticsError::HorizonTooSmall { horizon, need });
    }
    let mut ev = Evaluator::finite(w, horizon);
    Ok(ev.eval(phi, a)?.expect("finite evaluation is two-valued"))
}

/// Truth of `phi` on the infinite word.
pub fn eval_omega(phi: &Formula, w: &WordModel, a: &Assignment, policy: &OmegaPolicy) -> Result<OmegaVerdict, SemanticsError> {
    let mut policy = *policy;
    let floor = 2 * horizon_floor(w, a);
    policy.h0 = Some(policy.h0.unwrap_or(floor).max(floor));
    let mut ev = Evaluator::omega(w, phi, &policy);
    Ok(OmegaVerdict::from_tv(ev.eval(phi, a)?))
}

/// Infinite product of a quantifier formula, `None` when it has no limit.
pub fn omega_quant_product(q: &Quant, w: &WordModel, a: &Assignment) -> Result<Option<Elem>, SemanticsError> {
    let f = Formula::new(Kind::Quant(q.clone()));
    let mut ev = Evaluator::omega(w, &f, &OmegaPolicy { h0: Some(2 * horizon_floor(w, a)), ..Default::default() });
    ev.quant_product(q, a)
}

/// `m_j` for the least `j` whose body holds at position `i`, else the identity.
pub fn u_value(
    bodies: &[Formula],
    var: Var,
    monoid: &MonoidTable,
    w: &WordModel,
    i: Value,
    a: &Assignment,
) -> Result<Elem, SemanticsError> {
    let f = Formula::or_any(bodies.iter().cloned());
    let mut ev = Evaluator::omega(w, &f, &OmegaPolicy::default());
    ev.u_at_with(monoid, var, bodies, i, a)?.ok_or(SemanticsError::NonConvergent)
}
