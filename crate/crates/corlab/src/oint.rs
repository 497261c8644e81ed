//! Exact arithmetic in Z, Z[i] and Z[rho], rho = (1 + sqrt(-3))/2, together
//! with 2x2 matrices over these rings. rho satisfies rho^2 = rho - 1 and has
//! conjugate 1 - rho; the unit groups are {+-1}, {+-1, +-i} and the six
//! powers of rho times +-1.

use crate::exactlin::Rat;
use num_complex::Complex64;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ring {
    Z,
    Zi,
    Zrho,
}

impl Ring {
    /// The generator written as a complex number: 0, i, or (1+sqrt(-3))/2.
    pub fn unit_complex(self) -> Complex64 {
        match self {
            Ring::Z => Complex64::new(0.0, 0.0),
            Ring::Zi => Complex64::new(0.0, 1.0),
            Ring::Zrho => Complex64::new(0.5, 3f64.sqrt() / 2.0),
        }
    }

    /// tau of the CM curve with this endomorphism ring (i or rho); Z has no
    /// canonical tau.
    pub fn cm_tau(self) -> Option<Complex64> {
        match self {
            Ring::Z => None,
            other => Some(other.unit_complex()),
        }
    }

    pub fn units(self) -> Vec<OInt> {
        match self {
            Ring::Z => vec![OInt::new(1, 0, self), OInt::new(-1, 0, self)],
            Ring::Zi => vec![
                OInt::new(1, 0, self),
                OInt::new(-1, 0, self),
                OInt::new(0, 1, self),
                OInt::new(0, -1, self),
            ],
            Ring::Zrho => {
                let rho = OInt::new(0, 1, self);
                let mut u = OInt::new(1, 0, self);
                let mut out = Vec::with_capacity(6);
                for _ in 0..3 {
                    out.push(u);
                    out.push(u.neg());
                    u = u.mul(&rho);
                }
                out
            }
        }
    }
}

/// A quadratic integer a + b*u, u = i or rho (b = 0 over Z).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OInt {
    pub a: i64,
    pub b: i64,
    pub ring: Ring,
}

impl OInt {
    pub fn new(a: i64, b: i64, ring: Ring) -> Self {
        if ring == Ring::Z {
            assert_eq!(b, 0, "Z has no imaginary part");
        }
        OInt { a, b, ring }
    }

    pub fn zero(ring: Ring) -> Self {
        OInt { a: 0, b: 0, ring }
    }

    pub fn one(ring: Ring) -> Self {
        OInt { a: 1, b: 0, ring }
    }

    pub fn is_zero(&self) -> bool {
        self.a == 0 && self.b == 0
    }

    pub fn add(&self, other: &OInt) -> OInt {
        debug_assert_eq!(self.ring, other.ring);
        OInt {
            a: self.a + other.a,
            b: self.b + other.b,
            ring: self.ring,
        }
    }

    pub fn sub(&self, other: &OInt) -> OInt {
        debug_assert_eq!(self.ring, other.ring);
        OInt {
            a: self.a - other.a,
            b: self.b - other.b,
            ring: self.ring,
        }
    }

    pub fn neg(&self) -> OInt {
        OInt {
            a: -self.a,
            b: -self.b,
            ring: self.ring,
        }
    }

    pub fn mul(&self, other: &OInt) -> OInt {
        debug_assert_eq!(self.ring, other.ring);
        let (a, b, c, d) = (self.a, self.b, other.a, other.b);
        match self.ring {
            Ring::Z => OInt::new(a * c, 0, self.ring),
            // (a+bi)(c+di) = ac - bd + (ad + bc) i
            Ring::Zi => OInt::new(a * c - b * d, a * d + b * c, self.ring),
            // rho^2 = rho - 1
            Ring::Zrho => OInt::new(a * c - b * d, a * d + b * c + b * d, self.ring),
        }
    }

    pub fn conj(&self) -> OInt {
        match self.ring {
            Ring::Z => *self,
            Ring::Zi => OInt::new(self.a, -self.b, self.ring),
            // conj(rho) = 1 - rho
            Ring::Zrho => OInt::new(self.a + self.b, -self.b, self.ring),
        }
    }

    pub fn norm(&self) -> i64 {
        let c = self.mul(&self.conj());
        debug_assert_eq!(c.b, 0);
        c.a
    }

    pub fn is_unit(&self) -> bool {
        self.norm().abs() == 1
    }

    /// Exact division; None when `other` does not divide `self`.
    pub fn div_exact(&self, other: &OInt) -> Option<OInt> {
        if other.is_zero() {
            return None;
        }
        let n = other.norm();
        let num = self.mul(&other.conj());
        if num.a % n == 0 && num.b % n == 0 {
            Some(OInt::new(num.a / n, num.b / n, self.ring))
        } else {
            None
        }
    }

    /// Nearest-integer quotient (both rings are norm-Euclidean).
    pub fn div_round(&self, other: &OInt) -> OInt {
        let n = other.norm();
        let num = self.mul(&other.conj());
        let round_div = |x: i64, n: i64| -> i64 {
            // round(x/n) with ties toward +infinity; any rounding with
            // |x/n - q| <= 1/2 keeps the Euclidean property.
            let (x2, n2) = (2 * x, 2 * n);
            let mut q = x2.div_euclid(n2);
            let r = x2.rem_euclid(n2);
            if r * 2 >= n2 {
                q += 1;
            }
            q
        };
        OInt::new(round_div(num.a, n), round_div(num.b, n), self.ring)
    }

    pub fn rem(&self, other: &OInt) -> OInt {
        self.sub(&self.div_round(other).mul(other))
    }

    pub fn gcd(&self, other: &OInt) -> OInt {
        let (mut x, mut y) = (*self, *other);
        while !y.is_zero() {
            let r = x.rem(&y);
            x = y;
            y = r;
        }
        x
    }

    /// True iff this element is prime in its ring.
    pub fn is_prime_elem(&self) -> bool {
        let n = self.norm().abs();
        if n <= 1 {
            return false;
        }
        if is_rational_prime(n) {
            return true;
        }
        // Inert rational primes have norm p^2.
        let p = (n as f64).sqrt().round() as i64;
        if p * p != n || !is_rational_prime(p) {
            return false;
        }
        // Must be an associate of p, and p must be inert.
        let assoc = self
            .ring
            .units()
            .iter()
            .any(|u| self.mul(u) == OInt::new(p, 0, self.ring));
        if !assoc {
            return false;
        }
        match self.ring {
            Ring::Z => false,
            Ring::Zi => p % 4 == 3,
            Ring::Zrho => p % 3 == 2,
        }
    }

    /// Coordinates of self / pi in the basis (1, u) of O (x) Q.
    pub fn div_coords(&self, pi: &OInt) -> (Rat, Rat) {
        let n = pi.norm();
        let num = self.mul(&pi.conj());
        (
            Rat::new(num.a.into(), n.into()),
            Rat::new(num.b.into(), n.into()),
        )
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(self.a as f64, 0.0) + self.ring.unit_complex() * self.b as f64
    }
}

impl fmt::Display for OInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sym = match self.ring {
            Ring::Z => "",
            Ring::Zi => "i",
            Ring::Zrho => "r",
        };
        if self.b == 0 {
            write!(f, "{}", self.a)
        } else if self.a == 0 {
            write!(f, "{}{}", self.b, sym)
        } else if self.b > 0 {
            write!(f, "{}+{}{}", self.a, self.b, sym)
        } else {
            write!(f, "{}{}{}", self.a, self.b, sym)
        }
    }
}

fn is_rational_prime(n: i64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Parse "1+i", "2-i", "3", "-1+2r", "1+r" (r = rho) in the given ring.
pub fn parse_oint(s: &str, ring: Ring) -> Result<OInt, String> {
    let t = s.trim().replace(' ', "");
    let t = t.replace("sqrt-3", "(2r-1)"); // sqrt(-3) = 2*rho - 1
    if t.contains('(') {
        // Only the sqrt-3 alias uses parentheses.
        if ring != Ring::Zrho || t != "(2r-1)" {
            return Err(format!("cannot parse O-element '{}'", s));
        }
        return Ok(OInt::new(-1, 2, ring));
    }
    let sym = match ring {
        Ring::Z => None,
        Ring::Zi => Some('i'),
        Ring::Zrho => Some('r'),
    };
    let mut a = 0i64;
    let mut b = 0i64;
    let mut cur = String::new();
    let flush = |cur: &mut String, a: &mut i64, b: &mut i64| -> Result<(), String> {
        if cur.is_empty() {
            return Ok(());
        }
        let is_imag = sym.map_or(false, |c| cur.ends_with(c));
        let body = if is_imag {
            let mut t = cur[..cur.len() - 1].to_string();
            if t.is_empty() || t == "+" {
                t = "1".into();
            } else if t == "-" {
                t = "-1".into();
            }
            t
        } else {
            cur.clone()
        };
        let v: i64 = body
            .parse()
            .map_err(|_| format!("bad integer part '{}'", cur))?;
        if is_imag {
            *b += v;
        } else {
            *a += v;
        }
        cur.clear();
        Ok(())
    };
    for (i, ch) in t.chars().enumerate() {
        if (ch == '+' || ch == '-') && i > 0 {
            flush(&mut cur, &mut a, &mut b)?;
        }
        cur.push(ch);
    }
    flush(&mut cur, &mut a, &mut b)?;
    if ring == Ring::Z && b != 0 {
        return Err("imaginary part in Z".into());
    }
    Ok(OInt::new(a, b, ring))
}

/// A 2x2 matrix over O, acting on column vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mat2 {
    pub a: OInt,
    pub b: OInt,
    pub c: OInt,
    pub d: OInt,
}

impl Mat2 {
    pub fn new(a: OInt, b: OInt, c: OInt, d: OInt) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn from_i64(ring: Ring, m: [[i64; 2]; 2]) -> Self {
        Mat2 {
            a: OInt::new(m[0][0], 0, ring),
            b: OInt::new(m[0][1], 0, ring),
            c: OInt::new(m[1][0], 0, ring),
            d: OInt::new(m[1][1], 0, ring),
        }
    }

    pub fn identity(ring: Ring) -> Self {
        Mat2 {
            a: OInt::one(ring),
            b: OInt::zero(ring),
            c: OInt::zero(ring),
            d: OInt::one(ring),
        }
    }

    pub fn ring(&self) -> Ring {
        self.a.ring
    }

    pub fn det(&self) -> OInt {
        self.a.mul(&self.d).sub(&self.b.mul(&self.c))
    }

    pub fn is_gl2(&self) -> bool {
        self.det().is_unit()
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a.mul(&o.a).add(&self.b.mul(&o.c)),
            b: self.a.mul(&o.b).add(&self.b.mul(&o.d)),
            c: self.c.mul(&o.a).add(&self.d.mul(&o.c)),
            d: self.c.mul(&o.b).add(&self.d.mul(&o.d)),
        }
    }

    /// Apply to a column vector (x, y).
    pub fn apply(&self, v: (OInt, OInt)) -> (OInt, OInt) {
        (
            self.a.mul(&v.0).add(&self.b.mul(&v.1)),
            self.c.mul(&v.0).add(&self.d.mul(&v.1)),
        )
    }

    /// Inverse, defined when det is a unit.
    pub fn inverse(&self) -> Option<Mat2> {
        let det = self.det();
        if !det.is_unit() {
            return None;
        }
        // 1/det = conj-ish: for units, inverse = conj(det)/norm(det).
        let n = det.norm(); // +-1
        let inv_det = if n == 1 { det.conj() } else { det.conj().neg() };
        Some(Mat2 {
            a: self.d.mul(&inv_det),
            b: self.b.neg().mul(&inv_det),
            c: self.c.neg().mul(&inv_det),
            d: self.a.mul(&inv_det),
        })
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} {}; {} {}]", self.a, self.b, self.c, self.d)
    }
}

/// Deterministic pseudo-random GL2(O) elements: bounded products of
/// elementary matrices, unit scalings and the swap.
pub fn random_gl2(ring: Ring, rng: &mut impl rand::Rng) -> Mat2 {
    let units = ring.units();
    let mut g = Mat2::identity(ring);
    let len = rng.gen_range(1..=6);
    for _ in 0..len {
        let choice = rng.gen_range(0..4);
        let f = match choice {
            0 => {
                let x = OInt::new(rng.gen_range(-2..=2), 0, ring);
                Mat2::new(OInt::one(ring), x, OInt::zero(ring), OInt::one(ring))
            }
            1 => {
                let x = if ring == Ring::Z {
                    OInt::new(rng.gen_range(-2..=2), 0, ring)
                } else {
                    OInt::new(rng.gen_range(-1..=1), rng.gen_range(-1..=1), ring)
                };
                Mat2::new(OInt::one(ring), OInt::zero(ring), x, OInt::one(ring))
            }
            2 => {
                let u = units[rng.gen_range(0..units.len())];
                Mat2::new(u, OInt::zero(ring), OInt::zero(ring), OInt::one(ring))
            }
            _ => Mat2::new(
                OInt::zero(ring),
                OInt::one(ring),
                OInt::one(ring),
                OInt::zero(ring),
            ),
        };
        g = g.mul(&f);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn rho_arithmetic() {
        let rho = OInt::new(0, 1, Ring::Zrho);
        let rho2 = rho.mul(&rho);
        assert_eq!(rho2, OInt::new(-1, 1, Ring::Zrho)); // rho^2 = rho - 1
        assert_eq!(rho.norm(), 1);
        assert_eq!(rho.conj(), OInt::new(1, -1, Ring::Zrho));
        assert_eq!(Ring::Zrho.units().len(), 6);
        for u in Ring::Zrho.units() {
            assert!(u.is_unit());
        }
    }

    #[test]
    fn gaussian_norms_and_primes() {
        let opi = OInt::new(1, 1, Ring::Zi);
        assert_eq!(opi.norm(), 2);
        assert!(opi.is_prime_elem());
        assert!(OInt::new(2, 1, Ring::Zi).is_prime_elem()); // norm 5
        assert!(!OInt::new(2, 0, Ring::Zi).is_prime_elem()); // 2 = -i(1+i)^2
        assert!(OInt::new(3, 0, Ring::Zi).is_prime_elem()); // inert
        assert!(OInt::new(-1, 2, Ring::Zrho).is_prime_elem()); // sqrt(-3), norm 3
        assert!(OInt::new(2, 0, Ring::Zrho).is_prime_elem()); // inert, norm 4
    }

    #[test]
    fn euclidean_division() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for ring in [Ring::Zi, Ring::Zrho] {
            for _ in 0..200 {
                let x = OInt::new(rng.gen_range(-9..=9), rng.gen_range(-9..=9), ring);
                let y = OInt::new(rng.gen_range(-4..=4), rng.gen_range(-4..=4), ring);
                if y.is_zero() {
                    continue;
                }
                let r = x.rem(&y);
                assert!(r.norm().abs() < y.norm().abs(), "{} rem {} = {}", x, y, r);
            }
        }
    }

    #[test]
    fn parse_elements() {
        assert_eq!(parse_oint("1+i", Ring::Zi).unwrap(), OInt::new(1, 1, Ring::Zi));
        assert_eq!(parse_oint("2+i", Ring::Zi).unwrap(), OInt::new(2, 1, Ring::Zi));
        assert_eq!(parse_oint("2-i", Ring::Zi).unwrap(), OInt::new(2, -1, Ring::Zi));
        assert_eq!(parse_oint("-3", Ring::Z).unwrap(), OInt::new(-3, 0, Ring::Z));
        assert_eq!(
            parse_oint("sqrt-3", Ring::Zrho).unwrap(),
            OInt::new(-1, 2, Ring::Zrho)
        );
        assert_eq!(parse_oint("2", Ring::Zrho).unwrap(), OInt::new(2, 0, Ring::Zrho));
        assert!(parse_oint("1+i", Ring::Z).is_err());
    }

    #[test]
    fn matrix_inverse_and_det() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for ring in [Ring::Z, Ring::Zi, Ring::Zrho] {
            for _ in 0..50 {
                let g = random_gl2(ring, &mut rng);
                assert!(g.is_gl2(), "{}", g);
                let inv = g.inverse().unwrap();
                assert_eq!(g.mul(&inv), Mat2::identity(ring));
                assert_eq!(inv.mul(&g), Mat2::identity(ring));
            }
        }
    }

    #[test]
    fn sqrt_minus_3_squares_to_minus_3() {
        let s = parse_oint("sqrt-3", Ring::Zrho).unwrap();
        assert_eq!(s.mul(&s), OInt::new(-3, 0, Ring::Zrho));
    }
}
