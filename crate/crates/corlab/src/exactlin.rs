//! Exact sparse linear algebra over Q: spans, membership tests, and spans in
//! the antisymmetric square.
//!
//! Basis indices are opaque canonical keys (strings produced by the domain
//! modules), so spans built from cyclic words, tensor words, modular-complex
//! generators and Bianchi cells all compose without a global registry. A
//! `Span` keeps its rows in reduced row echelon form with pivot coefficient 1,
//! which makes membership a single reduction pass.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Exact rational scalar used throughout the symbolic modules.
pub type Rat = BigRational;

/// Convenience constructor for small rationals.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// A sparse vector over Q indexed by canonical string keys.
///
/// Invariant: no stored entry is zero.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SparseVector {
    entries: BTreeMap<String, Rat>,
}

impl SparseVector {
    pub fn new() -> Self {
        SparseVector {
            entries: BTreeMap::new(),
        }
    }

    pub fn from_entries<I, K>(entries: I) -> Self
    where
        I: IntoIterator<Item = (K, Rat)>,
        K: Into<String>,
    {
        let mut v = SparseVector::new();
        for (k, c) in entries {
            v.add_to(k.into(), c);
        }
        v
    }

    pub fn unit(key: impl Into<String>) -> Self {
        SparseVector::from_entries([(key.into(), Rat::one())])
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Rat {
        self.entries.get(key).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Rat)> {
        self.entries.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    /// First (lexicographically least) key with nonzero coefficient.
    pub fn leading_key(&self) -> Option<&String> {
        self.entries.keys().next()
    }

    pub fn add_to(&mut self, key: String, c: Rat) {
        if c.is_zero() {
            return;
        }
        let e = self.entries.entry(key);
        match e {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get().clone() + c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn scaled(&self, c: &Rat) -> SparseVector {
        if c.is_zero() {
            return SparseVector::new();
        }
        SparseVector {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), v * c))
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &SparseVector, c: &Rat) {
        if c.is_zero() {
            return;
        }
        for (k, v) in other.entries.iter() {
            self.add_to(k.clone(), v * c);
        }
    }

    /// Divide by the integer content after clearing denominators, so that the
    /// entries are coprime integers. Keeps intermediate coefficients small
    /// during elimination.
    fn primitivize(&mut self) {
        if self.entries.is_empty() {
            return;
        }
        let mut den_lcm = BigInt::one();
        for c in self.entries.values() {
            den_lcm = num_integer::lcm(den_lcm, c.denom().clone());
        }
        let mut num_gcd = BigInt::zero();
        for c in self.entries.values() {
            let n = c.numer() * &den_lcm / c.denom();
            num_gcd = num_integer::gcd(num_gcd, n);
        }
        if num_gcd.is_zero() {
            return;
        }
        let scale = Rat::new(den_lcm, num_gcd);
        for c in self.entries.values_mut() {
            *c = &*c * &scale;
        }
    }
}

impl fmt::Display for SparseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in &self.entries {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{}*[{}]", c, k)?;
        }
        Ok(())
    }
}

/// A subspace of the free Q-vector space on canonical keys, stored in reduced
/// row echelon form.
///
/// Invariants: each row's leading key is its pivot, pivot coefficient is 1,
/// no pivot key occurs in any other row.
#[derive(Clone, Debug, Default)]
pub struct Span {
    rows: Vec<SparseVector>,
    pivots: BTreeSet<String>,
}

impl Span {
    pub fn empty() -> Self {
        Span::default()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[SparseVector] {
        &self.rows
    }

    pub fn pivots(&self) -> &BTreeSet<String> {
        &self.pivots
    }

    /// Reduce `v` against the span; the remainder has no pivot keys.
    pub fn residue(&self, v: &SparseVector) -> SparseVector {
        let mut r = v.clone();
        // Rows are pivot-sorted, and reduction against one row cannot
        // reintroduce an earlier pivot, so one pass suffices.
        for row in &self.rows {
            let pivot = row.leading_key().expect("span rows are nonzero").clone();
            let c = r.get(&pivot);
            if !c.is_zero() {
                r.add_scaled(row, &(-c));
            }
        }
        r
    }

    /// True iff `v` is a Q-linear combination of the span's rows.
    pub fn contains(&self, v: &SparseVector) -> bool {
        self.residue(v).is_zero()
    }

    /// Insert one vector, returning true if the rank grew.
    pub fn insert(&mut self, v: &SparseVector) -> bool {
        let mut r = self.residue(v);
        if r.is_zero() {
            return false;
        }
        r.primitivize();
        let pivot = r.leading_key().unwrap().clone();
        let lead = r.get(&pivot);
        let r = r.scaled(&(Rat::one() / lead));
        // Back-eliminate the new pivot from existing rows.
        for row in self.rows.iter_mut() {
            let c = row.get(&pivot);
            if !c.is_zero() {
                row.add_scaled(&r, &(-c));
            }
        }
        self.pivots.insert(pivot.clone());
        let at = self
            .rows
            .partition_point(|row| row.leading_key().unwrap() < &pivot);
        self.rows.insert(at, r);
        true
    }

    /// Express `v` in terms of the span rows, if possible. Returns the
    /// coefficient of each row in pivot order.
    pub fn express(&self, v: &SparseVector) -> Option<Vec<Rat>> {
        let mut r = v.clone();
        let mut coeffs = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            let pivot = row.leading_key().unwrap();
            let c = r.get(pivot);
            if !c.is_zero() {
                r.add_scaled(row, &(-c.clone()));
            }
            coeffs.push(c);
        }
        if r.is_zero() {
            Some(coeffs)
        } else {
            None
        }
    }
}

/// Reduce a family of vectors to a `Span` in reduced row echelon form.
///
/// The span of the output equals the span of the input, and the operation is
/// idempotent on the row set.
pub fn reduce<'a, I>(rows: I) -> Span
where
    I: IntoIterator<Item = &'a SparseVector>,
{
    let mut span = Span::empty();
    for v in rows {
        span.insert(v);
    }
    span
}

/// Key of the wedge basis element e_{k1} ^ e_{k2}, for k1 < k2.
pub fn wedge_key(k1: &str, k2: &str) -> String {
    debug_assert!(k1 < k2);
    format!("{} /\\ {}", k1, k2)
}

/// Expand the wedge of two vectors in the antisymmetric-square coordinates.
pub fn wedge_vector(a: &SparseVector, b: &SparseVector) -> SparseVector {
    let mut out = SparseVector::new();
    for (ka, ca) in a.iter() {
        for (kb, cb) in b.iter() {
            match ka.cmp(kb) {
                std::cmp::Ordering::Less => out.add_to(wedge_key(ka, kb), ca * cb),
                std::cmp::Ordering::Greater => out.add_to(wedge_key(kb, ka), -(ca * cb)),
                std::cmp::Ordering::Equal => {}
            }
        }
    }
    out
}

/// Span of { rho ^ e : rho in r, e in ambient } inside the antisymmetric
/// square. Membership in the result certifies equality in Lambda^2(V/R) for
/// R = span(r), V = span(ambient), provided r is contained in V.
pub fn wedge_span(r: &Span, ambient: &[SparseVector]) -> Span {
    let mut vecs = Vec::new();
    for row in r.rows() {
        for e in ambient {
            let w = wedge_vector(row, e);
            if !w.is_zero() {
                vecs.push(w);
            }
        }
    }
    reduce(vecs.iter())
}
