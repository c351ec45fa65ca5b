//! Finite monoids and groups given by explicit multiplication tables.
//!
//! Elements are dense indices `0..n`. Every table carries a fixed enumeration
//! `m_1, ..., m_K` of its non-identity elements; quantifier semantics assigns
//! the `j`-th body formula to `m_j`, so the enumeration is part of the value.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a monoid element.
pub type Elem = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("table is not associative: ({0}*{1})*{2} != {0}*({1}*{2})")]
    NotAssociative(Elem, Elem, Elem),
    #[error("element {0} is not a two-sided identity")]
    NoIdentity(Elem),
    #[error("cyclic group order must be positive")]
    InvalidOrder,
    #[error("symmetric group S_{0} exceeds the supported size (n <= 5)")]
    TooLarge(usize),
    #[error("brute-force size cap exceeded: {0} elements (cap {1})")]
    SizeCap(usize, usize),
    #[error("malformed table: {0}")]
    Malformed(String),
    #[error("monoid {0} is not a group")]
    NotAGroup(String),
    #[error("unknown monoid `{0}`")]
    UnknownMonoid(String),
    #[error("unknown element `{1}` in monoid {0}")]
    UnknownElement(String, String),
}

/// A finite monoid as a multiplication table.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MonoidTable {
    name: String,
    n: usize,
    identity: Elem,
    table: Vec<Elem>,
    names: Vec<String>,
    ordering: Vec<Elem>,
}

impl fmt::Debug for MonoidTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MonoidTable({}, n={})", self.name, self.n)
    }
}

impl MonoidTable {
    /// Validates a square table with the given identity. Element names default
    /// to their indices and the non-identity ordering to ascending index.
    pub fn new(
        name: impl Into<String>,
        table: Vec<Vec<Elem>>,
        identity: Elem,
    ) -> Result<Self, AlgebraError> {
        let n = table.len();
        if n == 0 {
            return Err(AlgebraError::Malformed("empty table".into()));
        }
        if identity >= n {
            return Err(AlgebraError::Malformed(format!(
                "identity {identity} out of range"
            )));
        }
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in table.iter().enumerate() {
            if row.len() != n {
                return Err(AlgebraError::Malformed(format!("row {i} has length {}", row.len())));
            }
            for &e in row {
                if e >= n {
                    return Err(AlgebraError::Malformed(format!("entry {e} out of range")));
                }
                flat.push(e);
            }
        }
        let m = MonoidTable {
            name: name.into(),
            n,
            identity,
            table: flat,
            names: (0..n).map(|i| i.to_string()).collect(),
            ordering: (0..n).filter(|&i| i != identity).collect(),
        };
        for a in 0..n {
            if m.mul(identity, a) != a || m.mul(a, identity) != a {
                return Err(AlgebraError::NoIdentity(identity));
            }
        }
        for (a, b, c) in (0..n).cartesian_product(0..n).cartesian_product(0..n).map(|((a, b), c)| (a, b, c)) {
            if m.mul(m.mul(a, b), c) != m.mul(a, m.mul(b, c)) {
                return Err(AlgebraError::NotAssociative(a, b, c));
            }
        }
        Ok(m)
    }

    /// Replaces the display names. Names must be distinct and non-empty.
    pub fn with_names(mut self, names: Vec<String>) -> Result<Self, AlgebraError> {
        if names.len() != self.n {
            return Err(AlgebraError::Malformed("name count differs from element count".into()));
        }
        if names.iter().any(|s| s.is_empty() || s.contains([',', '}', ' ']))
            || names.iter().unique().count() != names.len()
        {
            return Err(AlgebraError::Malformed("element names must be distinct tokens".into()));
        }
        self.names = names;
        Ok(self)
    }

    /// Replaces the enumeration `m_1..m_K` of the non-identity elements.
    pub fn with_ordering(mut self, ordering: Vec<Elem>) -> Result<Self, AlgebraError> {
        let mut sorted = ordering.clone();
        sorted.sort_unstable();
        let expected: Vec<Elem> = (0..self.n).filter(|&i| i != self.identity).collect();
        if sorted != expected {
            return Err(AlgebraError::Malformed(
                "ordering must be a permutation of the non-identity elements".into(),
            ));
        }
        self.ordering = ordering;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Number of non-identity elements, i.e. the quantifier arity `K`.
    pub fn arity(&self) -> usize {
        self.n - 1
    }

    pub fn identity(&self) -> Elem {
        self.identity
    }

    pub fn elements(&self) -> std::ops::Range<Elem> {
        0..self.n
    }

    #[inline]
    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        self.table[a * self.n + b]
    }

    /// Left-to-right product; the empty product is the identity.
    pub fn product<I: IntoIterator<Item = Elem>>(&self, seq: I) -> Elem {
        seq.into_iter().fold(self.identity, |acc, e| self.mul(acc, e))
    }

    /// `a^k` by repeated squaring.
    pub fn power(&self, a: Elem, mut k: u128) -> Elem {
        let mut base = a;
        let mut acc = self.identity;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            k >>= 1;
        }
        acc
    }

    /// The enumeration `m_1..m_K`.
    pub fn ordering(&self) -> &[Elem] {
        &self.ordering
    }

    /// `m_j` for the 1-based body index `j`.
    pub fn body_element(&self, j: usize) -> Elem {
        self.ordering[j - 1]
    }

    /// 0-based body slot of a non-identity element.
    pub fn slot_of(&self, e: Elem) -> Option<usize> {
        self.ordering.iter().position(|&x| x == e)
    }

    pub fn elem_name(&self, e: Elem) -> &str {
        &self.names[e]
    }

    pub fn elem_by_name(&self, s: &str) -> Option<Elem> {
        self.names.iter().position(|n| n == s)
    }

    /// Period of `a`: the least `k >= 1` with `a^(i+k) = a^i` for some `i`.
    pub fn period(&self, a: Elem) -> usize {
        let mut seen: HashMap<Elem, usize> = HashMap::new();
        let mut cur = a;
        for i in 1.. {
            if let Some(j) = seen.get(&cur) {
                return i - j;
            }
            seen.insert(cur, i);
            cur = self.mul(cur, a);
        }
        unreachable!()
    }

    /// Least common multiple of all element periods.
    pub fn exponent(&self) -> u64 {
        self.elements().map(|e| self.period(e) as u64).fold(1, lcm)
    }

    /// True for the two-element monoid `{0, 1}` under multiplication.
    pub fn is_u1(&self) -> bool {
        if self.n != 2 {
            return false;
        }
        let z = self.ordering[0];
        self.mul(z, z) == z
    }

    pub fn as_group(&self) -> Option<GroupTable> {
        GroupTable::try_from(self.clone()).ok()
    }
}

/// A finite group: a monoid table whose rows are permutations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupTable {
    base: MonoidTable,
    inv: Vec<Elem>,
}

impl TryFrom<MonoidTable> for GroupTable {
    type Error = AlgebraError;

    fn try_from(base: MonoidTable) -> Result<Self, Self::Error> {
        let mut inv = vec![usize::MAX; base.n];
        for a in base.elements() {
            let row: Vec<Elem> = base.elements().map(|b| base.mul(a, b)).collect();
            if row.iter().unique().count() != base.n {
                return Err(AlgebraError::NotAGroup(base.name.clone()));
            }
            inv[a] = base.elements().find(|&b| base.mul(a, b) == base.identity).unwrap();
            if base.mul(inv[a], a) != base.identity {
                return Err(AlgebraError::NotAGroup(base.name.clone()));
            }
        }
        Ok(GroupTable { base, inv })
    }
}

impl std::ops::Deref for GroupTable {
    type Target = MonoidTable;
    fn deref(&self) -> &MonoidTable {
        &self.base
    }
}

impl GroupTable {
    pub fn monoid(&self) -> &MonoidTable {
        &self.base
    }

    pub fn into_monoid(self) -> MonoidTable {
        self.base
    }

    #[inline]
    pub fn inv(&self, a: Elem) -> Elem {
        self.inv[a]
    }

    /// Order of `a` (smallest `k >= 1` with `a^k = 1`).
    pub fn order_of(&self, a: Elem) -> usize {
        let mut cur = a;
        let mut k = 1;
        while cur != self.identity() {
            cur = self.mul(cur, a);
            k += 1;
        }
        k
    }
}

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        return a.max(b);
    }
    a / gcd(a, b) * b
}

/// Builds and validates a monoid from a raw table.
pub fn make_monoid(table: Vec<Vec<Elem>>, identity: Elem) -> Result<MonoidTable, AlgebraError> {
    MonoidTable::new("M", table, identity)
}

/// `U_1 = {0, 1}` under multiplication. Element 0 is `m_1` (the existential
/// element) and 1 is the identity.
pub fn make_u1() -> MonoidTable {
    MonoidTable::new("U1", vec![vec![0, 0], vec![0, 1]], 1)
        .and_then(|m| m.with_names(vec!["0".into(), "1".into()]))
        .expect("U1 table is valid")
}

/// Cyclic group `C_q` as addition mod `q`. Index `k` is displayed as `g^k`
/// in multiplicative notation: `1`, `g`, `g2`, ...
pub fn make_cyclic(q: usize) -> Result<GroupTable, AlgebraError> {
    if q == 0 {
        return Err(AlgebraError::InvalidOrder);
    }
    let table = (0..q).map(|a| (0..q).map(|b| (a + b) % q).collect()).collect();
    let names = (0..q)
        .map(|k| match k {
            0 => "1".to_string(),
            1 => "g".to_string(),
            k => format!("g{k}"),
        })
        .collect();
    let m = MonoidTable::new(format!("C{q}"), table, 0)?.with_names(names)?;
    GroupTable::try_from(m)
}

/// Symmetric group `S_n` under composition, `(a*b)(i) = a(b(i))`.
/// Elements are the permutations in lexicographic order of their images,
/// named in cycle notation on points `1..n`; the identity is `1`.
pub fn make_symmetric(n: usize) -> Result<GroupTable, AlgebraError> {
    if n > 5 {
        return Err(AlgebraError::TooLarge(n));
    }
    if n == 0 {
        return Err(AlgebraError::InvalidOrder);
    }
    let perms: Vec<Vec<usize>> = (0..n).permutations(n).collect();
    let index: HashMap<&Vec<usize>, usize> = perms.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let table = perms
        .iter()
        .map(|a| {
            perms
                .iter()
                .map(|b| {
                    let c: Vec<usize> = (0..n).map(|i| a[b[i]]).collect();
                    index[&c]
                })
                .collect()
        })
        .collect();
    let names = perms.iter().map(|p| cycle_notation(p)).collect();
    let m = MonoidTable::new(format!("S{n}"), table, 0)?.with_names(names)?;
    GroupTable::try_from(m)
}

fn cycle_notation(p: &[usize]) -> String {
    let mut seen = vec![false; p.len()];
    let mut out = String::new();
    for start in 0..p.len() {
        if seen[start] || p[start] == start {
            continue;
        }
        out.push('(');
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            out.push_str(&(i + 1).to_string());
            i = p[i];
        }
        out.push(')');
    }
    if out.is_empty() {
        "1".to_string()
    } else {
        out
    }
}

const DIVIDES_CAP: usize = 8;

/// Brute-force division test: does some submonoid of `n` map surjectively
/// and homomorphically onto `m`?
pub fn divides(m: &MonoidTable, n: &MonoidTable) -> Result<bool, AlgebraError> {
    for t in [m, n] {
        if t.size() > DIVIDES_CAP {
            return Err(AlgebraError::SizeCap(t.size(), DIVIDES_CAP));
        }
    }
    let others: Vec<Elem> = n.elements().filter(|&e| e != n.identity()).collect();
    for mask in 0u32..(1 << others.len()) {
        let mut sub = vec![n.identity()];
        sub.extend(others.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &e)| e));
        if sub.len() < m.size() {
            continue;
        }
        let closed = sub.iter().all(|&a| sub.iter().all(|&b| sub.contains(&n.mul(a, b))));
        if !closed {
            continue;
        }
        let mut h = vec![usize::MAX; n.size()];
        h[n.identity()] = m.identity();
        if extend_morphism(m, n, &sub, 1, &mut h) {
            return Ok(true);
        }
    }
    Ok(false)
}

fn extend_morphism(m: &MonoidTable, n: &MonoidTable, sub: &[Elem], i: usize, h: &mut Vec<Elem>) -> bool {
    if i == sub.len() {
        let hit: std::collections::HashSet<Elem> = sub.iter().map(|&e| h[e]).collect();
        return hit.len() == m.size();
    }
    for img in m.elements() {
        h[sub[i]] = img;
        let consistent = sub[..=i].iter().all(|&a| {
            sub[..=i].iter().all(|&b| {
                let ab = n.mul(a, b);
                h[ab] == usize::MAX || h[ab] == m.mul(h[a], h[b])
            })
        });
        if consistent && extend_morphism(m, n, sub, i + 1, h) {
            return true;
        }
    }
    h[sub[i]] = usize::MAX;
    false
}

/// On-disk monoid definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonoidFile {
    #[serde(default)]
    pub name: Option<String>,
    pub elements: Vec<String>,
    pub identity: String,
    pub table: Vec<Vec<String>>,
    #[serde(default)]
    pub ordering: Option<Vec<String>>,
}

impl MonoidFile {
    pub fn into_table(self, fallback_name: &str) -> Result<MonoidTable, AlgebraError> {
        let name = self.name.clone().unwrap_or_else(|| fallback_name.to_string());
        let idx = |s: &str| {
            self.elements
                .iter()
                .position(|e| e == s)
                .ok_or_else(|| AlgebraError::UnknownElement(name.clone(), s.to_string()))
        };
        let table = self
            .table
            .iter()
            .map(|row| row.iter().map(|s| idx(s)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        let mut m = MonoidTable::new(name.clone(), table, idx(&self.identity)?)?
            .with_names(self.elements.clone())?;
        if let Some(ord) = &self.ordering {
            let ord = ord.iter().map(|s| idx(s)).collect::<Result<Vec<_>, _>>()?;
            m = m.with_ordering(ord)?;
        }
        Ok(m)
    }
}

/// Name-addressable set of monoids: builtins `U1`, `C<q>`, `S<n>` plus any
/// user-loaded tables.
#[derive(Clone, Debug, Default)]
pub struct MonoidRegistry {
    custom: HashMap<String, Arc<MonoidTable>>,
}

impl MonoidRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, m: MonoidTable) -> Arc<MonoidTable> {
        let m = Arc::new(m);
        self.custom.insert(m.name().to_string(), m.clone());
        m
    }

    pub fn load_file(&mut self, path: &Path) -> Result<Arc<MonoidTable>, AlgebraError> {
        let text = std::fs::read_to_string(path).map_err(|e| AlgebraError::Malformed(e.to_string()))?;
        let file: MonoidFile =
            serde_json::from_str(&text).map_err(|e| AlgebraError::Malformed(e.to_string()))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("M");
        Ok(self.insert(file.into_table(stem)?))
    }

    pub fn get(&self, name: &str) -> Result<Arc<MonoidTable>, AlgebraError> {
        if let Some(m) = self.custom.get(name) {
            return Ok(m.clone());
        }
        builtin(name)
    }
}

/// Resolves `U1`, `C<q>` and `S<n>`.
pub fn builtin(name: &str) -> Result<Arc<MonoidTable>, AlgebraError> {
    let unknown = || AlgebraError::UnknownMonoid(name.to_string());
    if name == "U1" {
        return Ok(Arc::new(make_u1()));
    }
    let (head, digits) = name.split_at(1.min(name.len()));
    let k: usize = digits.parse().map_err(|_| unknown())?;
    match head {
        "C" => Ok(Arc::new(make_cyclic(k)?.into_monoid())),
        "S" => Ok(Arc::new(make_symmetric(k)?.into_monoid())),
        _ => Err(unknown()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn u1_is_valid_monoid() {
        let u = make_monoid(vec![vec![0, 0], vec![0, 1]], 1).unwrap();
        assert_eq!(u.size(), 2);
        assert!(u.is_u1());
        assert!(u.as_group().is_none());
    }

    #[test]
    fn trivial_monoid() {
        let t = make_monoid(vec![vec![0]], 0).unwrap();
        assert_eq!(t.arity(), 0);
        assert_eq!(t.product([0, 0]), 0);
    }

    #[test]
    fn rejects_non_associative() {
        // a*b = b for a != 0 style table that breaks associativity
        let bad = vec![vec![0, 1, 2], vec![1, 2, 0], vec![2, 2, 2]];
        assert!(matches!(make_monoid(bad, 0), Err(AlgebraError::NotAssociative(..))));
    }

    #[test]
    fn rejects_missing_identity() {
        let bad = vec![vec![0, 0], vec![0, 0]];
        assert_eq!(make_monoid(bad, 1), Err(AlgebraError::NoIdentity(1)));
    }

    #[test]
    fn cyclic_groups() {
        let c2 = make_cyclic(2).unwrap();
        assert_eq!(c2.mul(1, 1), 0);
        assert_eq!(c2.elem_name(0), "1");
        assert_eq!(c2.elem_name(1), "g");
        let c1 = make_cyclic(1).unwrap();
        assert_eq!(c1.size(), 1);
        let c3 = make_cyclic(3).unwrap();
        assert_eq!(c3.mul(1, 2), 0);
        assert_eq!(make_cyclic(0), Err(AlgebraError::InvalidOrder));
    }

    #[test]
    fn symmetric_groups() {
        let s3 = make_symmetric(3).unwrap();
        assert_eq!(s3.size(), 6);
        let commutative = s3.elements().all(|a| s3.elements().all(|b| s3.mul(a, b) == s3.mul(b, a)));
        assert!(!commutative);
        assert_eq!(make_symmetric(5).unwrap().size(), 120);
        assert_eq!(make_symmetric(6), Err(AlgebraError::TooLarge(6)));
        let s2 = make_symmetric(2).unwrap();
        let c2 = make_cyclic(2).unwrap();
        assert!(divides(&s2, &c2).unwrap() && divides(&c2, &s2).unwrap());
    }

    #[test]
    fn s3_products_are_order_sensitive() {
        let s3 = make_symmetric(3).unwrap();
        let e = |n: &str| s3.elem_by_name(n).unwrap();
        assert_eq!(s3.product([e("(12)"), e("(23)")]), e("(123)"));
        assert_eq!(s3.product([e("(23)"), e("(12)")]), e("(132)"));
        assert_eq!(s3.product([]), s3.identity());
        let c2 = make_cyclic(2).unwrap();
        assert_eq!(c2.product([1, 1]), 0);
    }

    #[test]
    fn division_examples() {
        let c2 = make_cyclic(2).unwrap();
        let s3 = make_symmetric(3).unwrap();
        let u1 = make_u1();
        assert!(divides(&c2, &s3).unwrap());
        assert!(divides(&s3, &s3).unwrap());
        assert!(divides(&u1, &u1).unwrap());
        assert!(!divides(&u1, &c2).unwrap());
        assert!(!divides(&make_cyclic(3).unwrap(), &c2).unwrap());
        let s4 = make_symmetric(4).unwrap();
        assert!(matches!(divides(&c2, &s4), Err(AlgebraError::SizeCap(24, 8))));
    }

    #[test]
    fn orders_divide_group_size() {
        for g in [make_cyclic(6).unwrap(), make_symmetric(3).unwrap(), make_symmetric(4).unwrap()] {
            for a in g.elements() {
                assert_eq!(g.size() % g.order_of(a), 0);
                assert_eq!(g.mul(a, g.inv(a)), g.identity());
            }
        }
    }

    #[test]
    fn builtins_resolve() {
        assert_eq!(builtin("C5").unwrap().size(), 5);
        assert_eq!(builtin("S3").unwrap().size(), 6);
        assert!(builtin("U1").unwrap().is_u1());
        assert!(matches!(builtin("X2"), Err(AlgebraError::UnknownMonoid(_))));
    }

    #[test]
    fn monoid_file_round_trip() {
        let json = r#"{"elements":["e","a"],"identity":"e","table":[["e","a"],["a","e"]],"ordering":["a"]}"#;
        let f: MonoidFile = serde_json::from_str(json).unwrap();
        let m = f.into_table("Z2").unwrap();
        assert_eq!(m.name(), "Z2");
        assert!(m.as_group().is_some());
        assert_eq!(m.elem_by_name("a"), Some(1));
    }

    use proptest::prelude::*;

    fn any_builtin() -> impl Strategy<Value = MonoidTable> {
        prop_oneof![
            Just(make_u1()),
            (1usize..7).prop_map(|q| make_cyclic(q).unwrap().into_monoid()),
            (1usize..4).prop_map(|n| make_symmetric(n).unwrap().into_monoid()),
        ]
    }

    proptest! {
        #[test]
        fn product_is_a_homomorphism(m in any_builtin(), a in prop::collection::vec(0usize..1000, 0..12), b in prop::collection::vec(0usize..1000, 0..12)) {
            let a: Vec<Elem> = a.into_iter().map(|x| x % m.size()).collect();
            let b: Vec<Elem> = b.into_iter().map(|x| x % m.size()).collect();
            let joined: Vec<Elem> = a.iter().chain(b.iter()).copied().collect();
            prop_assert_eq!(m.product(joined), m.mul(m.product(a), m.product(b)));
        }

        #[test]
        fn inverted_reverse_cancels(n in 1usize..4, seq in prop::collection::vec(0usize..1000, 0..12)) {
            let g = make_symmetric(n).unwrap();
            let seq: Vec<Elem> = seq.into_iter().map(|x| x % g.size()).collect();
            let back: Vec<Elem> = seq.iter().rev().map(|&e| g.inv(e)).collect();
            prop_assert_eq!(g.product(seq.into_iter().chain(back)), g.identity());
        }

        #[test]
        fn power_matches_iterated_product(m in any_builtin(), a in 0usize..100, k in 0u32..40) {
            let a = a % m.size();
            prop_assert_eq!(m.power(a, k as u128), m.product(std::iter::repeat_n(a, k as usize)));
        }
    }
}
