//! The base-point calculus: the map rho_p, star products via lattice paths,
//! corrected elements, and symbolic verifiers for the depth-independence and
//! depth-2 dihedral theorems.
//!
//! rho_p acts on tensor words in H^1-letters and punctures: on a form word it
//! sums all sign-weighted replacements of disjoint adjacent pairs
//! (omega (x) omega-bar) or (omega-bar (x) omega) by the puncture p, on a
//! puncture a it returns (a) - (p), and it is multiplicative over block
//! concatenation. The star product S_{m0,m0'} * ... * S_{mk,mk'} is the
//! signed lattice-path sum with prefactor 1/2^k that satisfies
//!
//!   rho_p(star) = sum over cut subsets, (-1)^{#cuts}, of star-blocks
//!                 joined by (p),
//!
//! the identity behind base-point independence of symmetric correlators
//! modulo depth. Corrected elements implement the inclusion-exclusion sum
//! over proper subsets of punctures replaced by star blocks.

use crate::corwords::{
    shuffle_span_for, symmetric_word, CyclicWord, Form, Letter, LinComb, Puncture, SymPoint,
    TensorComb, TensorWord,
};
use crate::exactlin::{rat, Rat};
use num_traits::One;
use std::fmt;

/// Skew-symmetric pairing <omega, omega-bar> = -<omega-bar, omega> = 1.
fn pairing(a: Form, b: Form) -> i64 {
    match (a, b) {
        (Form::Omega, Form::OmegaBar) => 1,
        (Form::OmegaBar, Form::Omega) => -1,
        _ => 0,
    }
}

/// A lattice path over steps right / up / diagonal, in bijection with tensor
/// words via right = omega, up = omega-bar, diagonal = puncture.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Right,
    Up,
    Diagonal,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticePath {
    pub steps: Vec<Step>,
}

impl LatticePath {
    /// Encode a tensor word whose punctures all equal a single marked point.
    pub fn from_word(w: &TensorWord) -> LatticePath {
        let steps = w
            .letters
            .iter()
            .map(|l| match l {
                Letter::F(Form::Omega) => Step::Right,
                Letter::F(Form::OmegaBar) => Step::Up,
                Letter::P(_) => Step::Diagonal,
            })
            .collect();
        LatticePath { steps }
    }

    /// Decode with the given puncture at every diagonal step.
    pub fn to_word(&self, p: &Puncture) -> TensorWord {
        TensorWord::new(
            self.steps
                .iter()
                .map(|s| match s {
                    Step::Right => Letter::omega(),
                    Step::Up => Letter::omega_bar(),
                    Step::Diagonal => Letter::P(p.clone()),
                })
                .collect(),
        )
    }
}

/// rho_p of a single tensor word: all ways to replace disjoint adjacent form
/// pairs by p (weighted by -<.,.>) and, independently, each puncture a by
/// (a) - (p).
fn rho_word(p: &Puncture, letters: &[Letter]) -> TensorComb {
    // Recurse left to right; at each position either keep the letter
    // (expanding punctures) or, if this and the next letter are forms with
    // nonzero pairing, replace the pair.
    fn rec(p: &Puncture, letters: &[Letter], acc: &TensorComb) -> TensorComb {
        let Some((head, tail)) = letters.split_first() else {
            return acc.clone();
        };
        let mut out = TensorComb::zero();
        match head {
            Letter::P(a) => {
                // (a) - (p)
                let mut keep = TensorComb::zero();
                for (w, c) in acc.terms() {
                    let mut wa = w.clone();
                    wa.letters.push(Letter::P(a.clone()));
                    keep.add_word(wa, c.clone());
                    let mut wp = w.clone();
                    wp.letters.push(Letter::P(p.clone()));
                    keep.add_word(wp, -c.clone());
                }
                out.add(&rec(p, tail, &keep));
            }
            Letter::F(f) => {
                // Keep the form letter.
                let mut keep = TensorComb::zero();
                for (w, c) in acc.terms() {
                    let mut wf = w.clone();
                    wf.letters.push(Letter::F(*f));
                    keep.add_word(wf, c.clone());
                }
                out.add(&rec(p, tail, &keep));
                // Replace the adjacent pair, if any.
                if let Some(Letter::F(g)) = tail.first() {
                    let s = pairing(*f, *g);
                    if s != 0 {
                        let mut repl = TensorComb::zero();
                        for (w, c) in acc.terms() {
                            let mut wp = w.clone();
                            wp.letters.push(Letter::P(p.clone()));
                            repl.add_word(wp, c * rat(-s, 1));
                        }
                        out.add(&rec(p, &tail[1..], &repl));
                    }
                }
            }
        }
        out
    }
    rec(p, letters, &TensorComb::one())
}

/// rho_p extended linearly to combinations of tensor words.
pub fn rho(p: &Puncture, x: &TensorComb) -> TensorComb {
    let mut out = TensorComb::zero();
    for (w, c) in x.terms() {
        out.add_scaled(&rho_word(p, &w.letters), c);
    }
    out
}

/// rho_p on a cyclic word. The word is rotated to start at a puncture so
/// that cyclically adjacent form pairs become linearly adjacent; pure-form
/// cyclic words are handled by splitting on the wrap-around pair.
pub fn rho_cyclic(p: &Puncture, w: &CyclicWord) -> LinComb {
    let letters = w.letters();
    if let Some(start) = letters.iter().position(|l| l.is_puncture()) {
        let n = letters.len();
        let rot: Vec<Letter> = (0..n).map(|k| letters[(start + k) % n].clone()).collect();
        rho_word(p, &rot).into_cyclic()
    } else {
        // Pure form circle: either the wrap pair (last, first) is replaced or
        // it is not. The unreplaced case is the linear expansion; the
        // replaced case fixes that pair and expands the interior linearly.
        let n = letters.len();
        let mut out = rho_word(p, letters).into_cyclic();
        if n >= 2 {
            if let (Letter::F(f_last), Letter::F(f_first)) = (&letters[n - 1], &letters[0]) {
                let s = pairing(*f_last, *f_first);
                if s != 0 {
                    let interior = rho_word(p, &letters[1..n - 1]);
                    for (word, c) in interior.terms() {
                        let mut cyc = vec![Letter::P(p.clone())];
                        cyc.extend_from_slice(&word.letters);
                        let mut term = LinComb::zero();
                        term.add_letters(cyc, c * rat(-s, 1)).expect("rho wrap term");
                        out.add(&term);
                    }
                }
            }
        }
        out
    }
}

/// A star signature: the (m_i, m_i') exponents of the blocks
/// S_{m_0,m_0'} * ... * S_{m_k,m_k'}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StarSignature {
    pub blocks: Vec<(usize, usize)>,
}

impl StarSignature {
    pub fn new(blocks: Vec<(usize, usize)>) -> Self {
        assert!(!blocks.is_empty(), "star signature must be nonempty");
        StarSignature { blocks }
    }

    /// Number of star operations (one less than the number of blocks).
    pub fn k(&self) -> usize {
        self.blocks.len() - 1
    }

    /// Weight of the star element: sum(m_i + m_i') + 2k.
    pub fn weight(&self) -> usize {
        self.blocks.iter().map(|(m, mb)| m + mb).sum::<usize>() + 2 * self.k()
    }
}

impl fmt::Display for StarSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .blocks
            .iter()
            .map(|(m, mb)| format!("S({},{})", m, mb))
            .collect();
        write!(f, "{}", parts.join("*"))
    }
}

/// The star product S_{m_0,m_0'} * ... * S_{m_k,m_k'}.
///
/// Sum over (n_i, n_i') >= 0 with n_i + n_i' = m_i + m_i' + 1 at the ends,
/// m_i + m_i' + 2 in the middle, and total n - n' balance equal to the total
/// m - m' balance; each term S_{n_0,n_0'} (x) ... (x) S_{n_k,n_k'} carries
/// coefficient +-1/2^k, with - iff an odd number of the partial sums of
/// n - n' fall strictly below the corresponding partial sums of m - m'.
pub fn star(sig: &StarSignature) -> TensorComb {
    let k = sig.k();
    if k == 0 {
        let (m, mb) = sig.blocks[0];
        return symmetric_word(m, mb);
    }
    let target: i64 = sig.blocks.iter().map(|(m, mb)| *m as i64 - *mb as i64).sum();
    let sizes: Vec<usize> = sig
        .blocks
        .iter()
        .enumerate()
        .map(|(i, (m, mb))| m + mb + if i == 0 || i == k { 1 } else { 2 })
        .collect();

    let mut out = TensorComb::zero();
    let coeff = Rat::new(1.into(), num_bigint::BigInt::from(1i64 << k));

    // Enumerate the n_i - n_i' differences; n_i is then determined.
    fn enumerate(
        idx: usize,
        sizes: &[usize],
        diffs: &mut Vec<i64>,
        target: i64,
        sig: &StarSignature,
        coeff: &Rat,
        out: &mut TensorComb,
    ) {
        if idx == sizes.len() {
            if diffs.iter().sum::<i64>() != target {
                return;
            }
            // Sign: count partial-sum drops over i = 0..k-1.
            let mut drops = 0;
            let mut pn = 0i64;
            let mut pm = 0i64;
            for i in 0..sizes.len() - 1 {
                pn += diffs[i];
                pm += sig.blocks[i].0 as i64 - sig.blocks[i].1 as i64;
                if pn < pm {
                    drops += 1;
                }
            }
            let sign = if drops % 2 == 1 { -Rat::one() } else { Rat::one() };
            let mut term = TensorComb::one();
            for (i, &sz) in sizes.iter().enumerate() {
                let n = ((sz as i64 + diffs[i]) / 2) as usize;
                let nb = sz - n;
                term = term.concat(&symmetric_word(n, nb));
            }
            out.add_scaled(&term, &(coeff * sign));
            return;
        }
        let sz = sizes[idx] as i64;
        let mut d = -sz;
        while d <= sz {
            // n = (sz + d)/2 must be a nonnegative integer <= sz.
            if (sz + d) % 2 == 0 {
                diffs.push(d);
                enumerate(idx + 1, sizes, diffs, target, sig, coeff, out);
                diffs.pop();
            }
            d += 1;
        }
    }
    let mut diffs = Vec::new();
    enumerate(0, &sizes, &mut diffs, target, sig, &coeff, &mut out);
    out
}

/// A cyclic element S_{m_0,m_0'} (x) x_0 (x) ... (x) S_{m_n,m_n'} (x) x_n:
/// block i precedes puncture i.
#[derive(Clone, Debug)]
pub struct SymmetricBlockWord {
    pub blocks: Vec<(usize, usize)>,
    pub punctures: Vec<Letter>,
}

impl SymmetricBlockWord {
    pub fn new(blocks: Vec<(usize, usize)>, punctures: Vec<Letter>) -> Self {
        assert_eq!(blocks.len(), punctures.len());
        assert!(!punctures.is_empty());
        assert!(punctures.iter().all(|l| l.is_puncture()));
        SymmetricBlockWord { blocks, punctures }
    }

    /// Expand without corrections into a combination of cyclic words.
    pub fn expand(&self) -> LinComb {
        self.expand_with_runs(&[])
    }

    /// Expand with the punctures in `removed` (a proper subset of indices)
    /// replaced by star-merged blocks.
    fn expand_with_runs(&self, removed: &[usize]) -> LinComb {
        let n = self.punctures.len();
        let in_i = |j: usize| removed.contains(&j);
        let kept: Vec<usize> = (0..n).filter(|j| !in_i(*j)).collect();
        assert!(!kept.is_empty(), "corrected subsets must be proper");

        // Walk the kept punctures in cyclic order; the block before kept
        // puncture j_t merges the S-blocks of the removed run preceding it.
        let mut word = TensorComb::one();
        for (t, &j) in kept.iter().enumerate() {
            let prev = kept[(t + kept.len() - 1) % kept.len()];
            // Blocks at positions prev+1, ..., j (cyclically, inclusive).
            let mut factors: Vec<(usize, usize)> = Vec::new();
            let mut pos = (prev + 1) % n;
            loop {
                factors.push(self.blocks[pos]);
                if pos == j {
                    break;
                }
                pos = (pos + 1) % n;
            }
            let block = if factors.len() == 1 {
                symmetric_word(factors[0].0, factors[0].1)
            } else {
                star(&StarSignature::new(factors))
            };
            word = word.concat(&block);
            word = word.concat(&TensorComb::word(TensorWord::new(vec![self.punctures[j]
                .clone()])));
        }
        word.into_cyclic()
    }
}

/// The corrected element: sum over proper subsets I of the puncture indices,
/// with sign (-1)^{|I|}, of the element with the punctures in I removed and
/// their neighbouring S-blocks star-merged. Equal to the plain expansion
/// modulo strictly lower depth.
pub fn corrected(x: &SymmetricBlockWord) -> LinComb {
    let n = x.punctures.len();
    let mut out = LinComb::zero();
    for mask in 0..(1u32 << n) - 1 {
        let removed: Vec<usize> = (0..n).filter(|j| mask >> j & 1 == 1).collect();
        let sign = if removed.len() % 2 == 1 {
            -Rat::one()
        } else {
            Rat::one()
        };
        out.add_scaled(&x.expand_with_runs(&removed), &sign);
    }
    out
}

/// Outcome of a symbolic verification, with the offending difference when it
/// fails.
#[derive(Clone, Debug)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckReport {
    pub fn pass(name: impl Into<String>) -> Self {
        CheckReport {
            name: name.into(),
            pass: true,
            detail: String::new(),
        }
    }

    pub fn fail(name: impl Into<String>, detail: String) -> Self {
        CheckReport {
            name: name.into(),
            pass: false,
            detail,
        }
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}{}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            if self.detail.is_empty() {
                String::new()
            } else {
                format!(" :: {}", self.detail)
            }
        )
    }
}

/// Verify rho_p(star(sig)) against the signed sum over cut subsets of
/// star-blocks joined by (p): each subset of the k junctions contributes the
/// concatenation of the star products of the resulting groups, joined by the
/// puncture p, with sign (-1)^{#cuts}.
pub fn verify_star_property(sig: &StarSignature, p: &Puncture) -> CheckReport {
    let name = format!("star_property {}", sig);
    let lhs = rho(p, &star(sig));

    let k = sig.k();
    let mut rhs = TensorComb::zero();
    for mask in 0..(1u32 << k) {
        let cuts: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
        let sign = if cuts.len() % 2 == 1 {
            -Rat::one()
        } else {
            Rat::one()
        };
        // Cut j separates block j from block j+1, splitting the blocks into
        // contiguous groups.
        let mut groups: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut cur: Vec<(usize, usize)> = Vec::new();
        for (i, b) in sig.blocks.iter().enumerate() {
            if i > 0 && cuts.contains(&(i - 1)) {
                groups.push(std::mem::take(&mut cur));
            }
            cur.push(*b);
        }
        groups.push(cur);
        let mut term = TensorComb::one();
        for (gi, g) in groups.iter().enumerate() {
            if gi > 0 {
                term = term.concat(&TensorComb::word(TensorWord::new(vec![Letter::P(
                    p.clone(),
                )])));
            }
            term = term.concat(&star(&StarSignature::new(g.clone())));
        }
        rhs.add_scaled(&term, &sign);
    }

    let mut diff = lhs.clone();
    diff.add_scaled(&rhs, &(-Rat::one()));
    if diff.is_zero() {
        CheckReport::pass(name)
    } else {
        CheckReport::fail(name, format!("difference = {}", diff))
    }
}

/// The depth-2 second-shuffle element: corrected element of
/// S_{m0} (0) S_{m1} (a) S_{m2} (a+b)  +  S_{m0} (0) S_{m2} (b) S_{m1} (a+b)
/// for symbolic punctures a, b.
pub fn depth2_shuffle_element(
    m: [(usize, usize); 3],
    a: &str,
    b: &str,
) -> Result<LinComb, String> {
    let pa = SymPoint::symbol(a);
    let pb = SymPoint::symbol(b);
    let pab = pa.add(&pb);
    let pts = [SymPoint::zero(), pa.clone(), pb.clone(), pab.clone()];
    for i in 0..4 {
        for j in (i + 1)..4 {
            if pts[i] == pts[j] {
                return Err(format!("coincident symbols: {} = {}", pts[i], pts[j]));
            }
        }
    }
    let first = SymmetricBlockWord::new(
        vec![m[0], m[1], m[2]],
        vec![
            Letter::sym_zero(),
            Letter::sym_point(pa.clone()),
            Letter::sym_point(pab.clone()),
        ],
    );
    let second = SymmetricBlockWord::new(
        vec![m[0], m[2], m[1]],
        vec![
            Letter::sym_zero(),
            Letter::sym_point(pb),
            Letter::sym_point(pab),
        ],
    );
    let mut out = corrected(&first);
    out.add(&corrected(&second));
    Ok(out)
}

/// Convention for the involution nu: word reversal combined with the
/// puncture map x -> (a+b) - x. Reversal of an (n+1)-letter word carries the
/// dihedral sign (-1)^{n+1}; the substitution z -> -z multiplies each form
/// letter by -1. Both signs are exposed so the convention can be calibrated.
#[derive(Clone, Copy, Debug)]
pub struct NuConvention {
    pub reversal_sign_per_letter: bool,
    pub form_sign: bool,
}

impl Default for NuConvention {
    fn default() -> Self {
        NuConvention {
            reversal_sign_per_letter: true,
            form_sign: true,
        }
    }
}

/// Apply nu to a combination: reverse each word, map each symbolic puncture
/// x to (center - x), and apply the convention signs.
pub fn nu(x: &LinComb, center: &SymPoint, conv: NuConvention) -> LinComb {
    x.map_words(|w| {
        let mut letters: Vec<Letter> = w.letters().to_vec();
        letters.reverse();
        let mut sign = Rat::one();
        if conv.reversal_sign_per_letter && letters.len() % 2 == 1 {
            sign = -sign;
        }
        let letters = letters
            .into_iter()
            .map(|l| match l {
                Letter::P(Puncture::Sym(s)) => Letter::sym_point(center.sub(&s)),
                Letter::F(f) => {
                    if conv.form_sign {
                        sign = -sign.clone();
                    }
                    Letter::F(f)
                }
                other => other,
            })
            .collect();
        (letters, sign)
    })
}

/// Verify that the depth-2 element T satisfies nu(T) + T = 0 modulo the
/// first-shuffle relation span (cyclic symmetry is built into the word
/// representation).
pub fn verify_depth2_antisymmetry(element: &LinComb, a: &str, b: &str) -> CheckReport {
    let center = SymPoint::symbol(a).add(&SymPoint::symbol(b));
    let conv = NuConvention::default();
    let mut combo = nu(element, &center, conv);
    combo.add(element);
    if combo.is_zero() {
        return CheckReport::pass("depth2_antisymmetry (exact cancellation)");
    }
    let span = shuffle_span_for(&combo);
    if span.contains(&combo.to_sparse()) {
        CheckReport::pass("depth2_antisymmetry (modulo first shuffles)")
    } else {
        let residue = span.residue(&combo.to_sparse());
        CheckReport::fail(
            "depth2_antisymmetry",
            format!("residue off the relation span: {}", residue),
        )
    }
}
