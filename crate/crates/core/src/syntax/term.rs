use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

/// Position or term value. Positions live in `N`; terms may go negative.
pub type Value = i128;

/// An interned variable name.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(u32);

#[derive(Default)]
struct Interner {
    names: Vec<Arc<str>>,
    ids: HashMap<Arc<str>, u32>,
}

fn interner() -> &'static Mutex<Interner> {
    static INTERNER: OnceLock<Mutex<Interner>> = OnceLock::new();
    INTERNER.get_or_init(Default::default)
}

static FRESH: AtomicU64 = AtomicU64::new(0);

impl Var {
    pub fn named(name: &str) -> Var {
        let mut int = interner().lock().unwrap();
        if let Some(&id) = int.ids.get(name) {
            return Var(id);
        }
        let id = int.names.len() as u32;
        let name: Arc<str> = Arc::from(name);
        int.names.push(name.clone());
        int.ids.insert(name, id);
        Var(id)
    }

    /// A variable whose name has never been interned before. Fresh names
    /// start with `_` so they cannot clash with parsed user variables unless
    /// the user writes such names on purpose.
    pub fn fresh(hint: &str) -> Var {
        loop {
            let n = FRESH.fetch_add(1, Ordering::Relaxed);
            let name = format!("_{hint}{n}");
            let mut int = interner().lock().unwrap();
            if int.ids.contains_key(name.as_str()) {
                continue;
            }
            let id = int.names.len() as u32;
            let name: Arc<str> = Arc::from(name.as_str());
            int.names.push(name.clone());
            int.ids.insert(name, id);
            return Var(id);
        }
    }

    pub fn name(&self) -> Arc<str> {
        interner().lock().unwrap().names[self.0 as usize].clone()
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Affine integer term `c + sum a_i * x_i`. Zero coefficients are never stored.
#[derive(Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct LinearTerm {
    coeffs: BTreeMap<Var, i64>,
    constant: i64,
}

impl LinearTerm {
    pub fn constant(c: i64) -> Self {
        LinearTerm { coeffs: BTreeMap::new(), constant: c }
    }

    pub fn var(v: Var) -> Self {
        Self::scaled_var(1, v)
    }

    pub fn scaled_var(k: i64, v: Var) -> Self {
        let mut t = Self::constant(0);
        t.add_coeff(v, k);
        t
    }

    pub fn from_parts<I: IntoIterator<Item = (Var, i64)>>(parts: I, constant: i64) -> Self {
        let mut t = Self::constant(constant);
        for (v, k) in parts {
            t.add_coeff(v, k);
        }
        t
    }

    fn add_coeff(&mut self, v: Var, k: i64) {
        let e = self.coeffs.entry(v).or_insert(0);
        *e += k;
        if *e == 0 {
            self.coeffs.remove(&v);
        }
    }

    pub fn constant_part(&self) -> i64 {
        self.constant
    }

    pub fn coeff(&self, v: Var) -> i64 {
        self.coeffs.get(&v).copied().unwrap_or(0)
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (Var, i64)> + '_ {
        self.coeffs.iter().map(|(&v, &k)| (v, k))
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.coeffs.keys().copied()
    }

    pub fn mentions(&self, v: Var) -> bool {
        self.coeffs.contains_key(&v)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// A bare variable with coefficient one and no constant.
    pub fn as_var(&self) -> Option<Var> {
        match (self.constant, self.coeffs.len()) {
            (0, 1) => self.coeffs.iter().next().filter(|(_, &k)| k == 1).map(|(&v, _)| v),
            _ => None,
        }
    }

    pub fn add(&self, other: &LinearTerm) -> LinearTerm {
        let mut t = self.clone();
        for (v, k) in other.coeffs() {
            t.add_coeff(v, k);
        }
        t.constant += other.constant;
        t
    }

    pub fn sub(&self, other: &LinearTerm) -> LinearTerm {
        self.add(&other.scale(-1))
    }

    pub fn plus_const(&self, c: i64) -> LinearTerm {
        let mut t = self.clone();
        t.constant += c;
        t
    }

    pub fn scale(&self, k: i64) -> LinearTerm {
        if k == 0 {
            return LinearTerm::constant(0);
        }
        LinearTerm {
            coeffs: self.coeffs.iter().map(|(&v, &c)| (v, c * k)).collect(),
            constant: self.constant * k,
        }
    }

    /// The term with the `v` summand removed.
    pub fn without(&self, v: Var) -> LinearTerm {
        let mut t = self.clone();
        t.coeffs.remove(&v);
        t
    }

    /// Keeps only the summands whose variable satisfies `keep`; the constant stays.
    pub fn restrict(&self, keep: impl Fn(Var) -> bool) -> LinearTerm {
        LinearTerm {
            coeffs: self.coeffs.iter().filter(|(&v, _)| keep(v)).map(|(&v, &k)| (v, k)).collect(),
            constant: self.constant,
        }
    }

    pub fn subst(&self, v: Var, by: &LinearTerm) -> LinearTerm {
        match self.coeffs.get(&v) {
            None => self.clone(),
            Some(&k) => self.without(v).add(&by.scale(k)),
        }
    }

    pub fn rename(&self, map: &HashMap<Var, Var>) -> LinearTerm {
        let mut t = LinearTerm::constant(self.constant);
        for (v, k) in self.coeffs() {
            t.add_coeff(*map.get(&v).unwrap_or(&v), k);
        }
        t
    }

    /// Evaluates under `env`; `None` when a variable is unassigned or on overflow.
    pub fn eval(&self, env: impl Fn(Var) -> Option<Value>) -> Option<Value> {
        let mut acc = self.constant as Value;
        for (&v, &k) in &self.coeffs {
            acc = acc.checked_add((k as Value).checked_mul(env(v)?)?)?;
        }
        Some(acc)
    }
}

impl fmt::Display for LinearTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut parts: Vec<(Arc<str>, i64)> = self.coeffs().map(|(v, k)| (v.name(), k)).collect();
        parts.sort();
        for (v, k) in parts {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            if k == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{k}*{v}")?;
            }
        }
        if self.constant != 0 || first {
            if !first {
                f.write_str(" + ")?;
            }
            write!(f, "{}", self.constant)?;
        }
        Ok(())
    }
}

impl fmt::Debug for LinearTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}
