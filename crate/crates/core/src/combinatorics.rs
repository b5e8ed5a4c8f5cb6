//! Pair partitions, Wick's formula and exact trace moments.
//!
//! Ground sets are `{1, ..., 2p}` (1-based) and pair partitions are kept in
//! canonical form: each pair `(i, j)` has `i < j` and pairs are sorted by
//! their first element. Trace moments use the normalized trace `tr = Tr / d`.

use crate::error::{Error, Result};
use crate::model::{CoefMatrix, CoefficientModel};
use crate::par;
use crate::params;
use nalgebra::DMatrix;
use serde::Serialize;

pub const MAX_PAIRING_P: usize = 8;
/// Bound on `n^p * (number of pairings)` for the exact moment sums.
pub const WORD_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairPartition {
    pairs: Vec<(usize, usize)>,
}

impl PairPartition {
    /// Validates and canonicalizes.
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        let m = 2 * pairs.len();
        let mut seen = vec![false; m + 1];
        let mut out = Vec::with_capacity(pairs.len());
        for (a, b) in pairs {
            let (i, j) = (a.min(b), a.max(b));
            if i == 0 || j > m || i == j {
                return Err(Error::invalid(format!("pair ({a}, {b}) outside 1..={m}")));
            }
            for x in [i, j] {
                if std::mem::replace(&mut seen[x], true) {
                    return Err(Error::invalid(format!("element {x} appears twice")));
                }
            }
            out.push((i, j));
        }
        out.sort_unstable();
        Ok(PairPartition { pairs: out })
    }

    /// The adjacent pairing `{(1,2), (3,4), ...}`.
    pub fn adjacent(p: usize) -> Self {
        PairPartition { pairs: (0..p).map(|k| (2 * k + 1, 2 * k + 2)).collect() }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn p(&self) -> usize {
        self.pairs.len()
    }

    /// `partner[x - 1]` is the 0-based partner of the 0-based position `x - 1`.
    fn partners(&self) -> Vec<usize> {
        let mut partner = vec![0; 2 * self.p()];
        for &(i, j) in &self.pairs {
            partner[i - 1] = j - 1;
            partner[j - 1] = i - 1;
        }
        partner
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexWord {
    letters: Vec<usize>,
    alphabet: usize,
}

impl IndexWord {
    /// Letters must lie in `1..=alphabet`.
    pub fn new(letters: Vec<usize>, alphabet: usize) -> Result<Self> {
        if let Some(&bad) = letters.iter().find(|&&l| l == 0 || l > alphabet) {
            return Err(Error::InvalidWord(format!("letter {bad} outside 1..={alphabet}")));
        }
        Ok(IndexWord { letters, alphabet })
    }

    /// Uses the largest letter as the alphabet size.
    pub fn from_letters(letters: Vec<usize>) -> Result<Self> {
        let n = letters.iter().copied().max().unwrap_or(0);
        Self::new(letters, n)
    }

    pub fn letters(&self) -> &[usize] {
        &self.letters
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }
}

pub fn double_factorial_odd(p: usize) -> u128 {
    (1..=p as u128).map(|k| 2 * k - 1).product()
}

pub fn catalan(p: usize) -> u128 {
    // C_p = binom(2p, p) / (p + 1), built incrementally to stay exact
    let mut c: u128 = 1;
    for k in 0..p as u128 {
        c = c * 2 * (2 * k + 1) / (k + 2);
    }
    c
}

fn check_p(p: usize) -> Result<()> {
    if p > MAX_PAIRING_P {
        return Err(Error::SizeLimit { what: "p", value: p as u128, limit: MAX_PAIRING_P as u128 });
    }
    Ok(())
}

/// All pair partitions of `{1..2p}` in lexicographic order.
pub fn enumerate_pairings(p: usize) -> Result<Vec<PairPartition>> {
    check_p(p)?;
    let mut out = Vec::with_capacity(double_factorial_odd(p) as usize);
    let mut used = vec![false; 2 * p + 1];
    let mut cur = Vec::with_capacity(p);
    fn rec(p: usize, used: &mut [bool], cur: &mut Vec<(usize, usize)>, out: &mut Vec<PairPartition>) {
        let Some(i) = (1..=2 * p).find(|&x| !used[x]) else {
            out.push(PairPartition { pairs: cur.clone() });
            return;
        };
        used[i] = true;
        for j in (i + 1)..=2 * p {
            if !used[j] {
                used[j] = true;
                cur.push((i, j));
                rec(p, used, cur, out);
                cur.pop();
                used[j] = false;
            }
        }
        used[i] = false;
    }
    rec(p, &mut used, &mut cur, &mut out);
    Ok(out)
}

/// Non-crossing pair partitions of `{1..2p}`, generated directly, in
/// lexicographic order.
pub fn enumerate_noncrossing(p: usize) -> Result<Vec<PairPartition>> {
    check_p(p)?;
    fn rec(lo: usize, hi: usize) -> Vec<Vec<(usize, usize)>> {
        // pairings of the interval lo..=hi (empty when lo > hi)
        if lo > hi {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for j in ((lo + 1)..=hi).step_by(2) {
            let inner = rec(lo + 1, j - 1);
            let outer = rec(j + 1, hi);
            for a in &inner {
                for b in &outer {
                    let mut v = Vec::with_capacity(1 + a.len() + b.len());
                    v.push((lo, j));
                    v.extend_from_slice(a);
                    v.extend_from_slice(b);
                    out.push(v);
                }
            }
        }
        out
    }
    let mut all: Vec<PairPartition> = rec(1, 2 * p)
        .into_iter()
        .map(|mut v| {
            v.sort_unstable();
            PairPartition { pairs: v }
        })
        .collect();
    all.sort();
    Ok(all)
}

pub fn is_noncrossing(nu: &PairPartition) -> bool {
    let ps = nu.pairs();
    ps.iter().enumerate().all(|(k, &(a, b))| {
        ps[k + 1..].iter().all(|&(c, e)| !((a < c && c < b && b < e) || (c < a && a < e && e < b)))
    })
}

pub fn compatible(u: &IndexWord, nu: &PairPartition) -> Result<bool> {
    if u.len() != 2 * nu.p() {
        return Err(Error::LengthMismatch { expected: 2 * nu.p(), got: u.len() });
    }
    Ok(nu.pairs().iter().all(|&(i, j)| u.letters[i - 1] == u.letters[j - 1]))
}

/// Number of pairings compatible with `u`, i.e. `E[g_u(1) ... g_u(m)]`.
pub fn wick_moment(u: &IndexWord) -> u128 {
    if u.len() % 2 == 1 {
        return 0;
    }
    let mut counts = std::collections::BTreeMap::new();
    for &l in u.letters() {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    counts
        .values()
        .map(|&m| if m % 2 == 1 { 0 } else { double_factorial_odd(m / 2) })
        .product()
}

fn centered_self_adjoint(model: &CoefficientModel) -> Result<()> {
    if !model.is_self_adjoint() {
        return Err(Error::NotSelfAdjoint);
    }
    if !model.is_centered() {
        return Err(Error::NotCentered);
    }
    Ok(())
}

fn check_words(n: usize, p: usize, count: u128) -> Result<()> {
    let words = (n as u128).checked_pow(p as u32).and_then(|w| w.checked_mul(count)).unwrap_or(u128::MAX);
    if words > WORD_LIMIT {
        return Err(Error::SizeLimit { what: "n^p * pairings", value: words, limit: WORD_LIMIT });
    }
    Ok(())
}

/// `sum_{u ~ nu} tr(A_u(1) ... A_u(2p))` without validation.
fn summand(coefs: &[CoefMatrix], d: usize, nu: &PairPartition) -> f64 {
    let len = 2 * nu.p();
    if len == 0 {
        return 1.0;
    }
    let partner = nu.partners();
    let mut letters = vec![usize::MAX; len];
    let mut stack: Vec<DMatrix<f64>> = vec![DMatrix::zeros(d, d); len];
    let identity = DMatrix::<f64>::identity(d, d);

    fn rec(
        pos: usize,
        coefs: &[CoefMatrix],
        partner: &[usize],
        letters: &mut [usize],
        stack: &mut [DMatrix<f64>],
        identity: &DMatrix<f64>,
    ) -> f64 {
        let len = letters.len();
        let choices: Vec<usize> = if partner[pos] < pos { vec![letters[partner[pos]]] } else { (0..coefs.len()).collect() };
        let mut acc = 0.0;
        for k in choices {
            letters[pos] = k;
            let a = &coefs[k];
            if pos + 1 == len {
                let prev = if pos == 0 { identity } else { &stack[pos - 1] };
                // Tr(prev * A) = sum_(i,j) prev[j, i] A[i, j]
                acc += a.entries().iter().map(|&(i, j, v)| prev[(j, i)] * v).sum::<f64>();
            } else {
                let (done, rest) = stack.split_at_mut(pos);
                let prev = if pos == 0 { identity } else { &done[pos - 1] };
                a.right_mul_into(prev, &mut rest[0]);
                acc += rec(pos + 1, coefs, partner, letters, stack, identity);
            }
        }
        if partner[pos] >= pos {
            letters[pos] = usize::MAX;
        }
        acc
    }
    rec(0, coefs, &partner, &mut letters, &mut stack, &identity) / d as f64
}

/// `sum_{u ~ nu} tr(A_u(1) ... A_u(2p))`.
pub fn pairing_summand(model: &CoefficientModel, nu: &PairPartition) -> Result<f64> {
    centered_self_adjoint(model)?;
    check_words(model.n(), nu.p(), 1)?;
    Ok(summand(model.coefficients(), model.d1(), nu))
}

fn moment_over(model: &CoefficientModel, pairings: &[PairPartition]) -> f64 {
    let terms = par::map_slice(pairings, |nu| summand(model.coefficients(), model.d1(), nu));
    par::pairwise_sum(&terms)
}

/// Exact `E tr X^{2p}` by Wick's formula.
pub fn gaussian_trace_moment(model: &CoefficientModel, p: usize) -> Result<f64> {
    centered_self_adjoint(model)?;
    check_p(p)?;
    check_words(model.n(), p, double_factorial_odd(p))?;
    Ok(moment_over(model, &enumerate_pairings(p)?))
}

/// Exact `(tr x tau)(X_free^{2p})`, the sum over non-crossing pairings.
pub fn free_trace_moment(model: &CoefficientModel, p: usize) -> Result<f64> {
    centered_self_adjoint(model)?;
    check_p(p)?;
    check_words(model.n(), p, catalan(p))?;
    Ok(moment_over(model, &enumerate_noncrossing(p)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterpolationGap {
    pub gaussian_moment: f64,
    pub free_moment: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Compares `|(E tr X^{2p})^{1/2p} - ((tr x tau) X_free^{2p})^{1/2p}|` with
/// `2 p^{3/4} v_tilde`.
pub fn interpolation_gap(model: &CoefficientModel, p: usize) -> Result<InterpolationGap> {
    if p == 0 {
        return Err(Error::invalid("p must be >= 1"));
    }
    let g = gaussian_trace_moment(model, p)?;
    let f = free_trace_moment(model, p)?;
    let root = 1.0 / (2 * p) as f64;
    let lhs = (g.max(0.0).powf(root) - f.max(0.0).powf(root)).abs();
    let v_tilde = (params::sigma(model) * params::v_param(model)).sqrt();
    let rhs = 2.0 * (p as f64).powf(0.75) * v_tilde;
    Ok(InterpolationGap { gaussian_moment: g, free_moment: f, lhs, rhs, holds: lhs <= rhs + 1e-12 })
}

/// `tr((sum_k A_k^2)^p)`, the commutative value that bounds every summand.
pub fn commutative_bound(model: &CoefficientModel, p: usize) -> f64 {
    let s = model.row_gram();
    let mut acc = DMatrix::identity(model.d1(), model.d1());
    for _ in 0..p {
        acc = &acc * &s;
    }
    acc.trace() / model.d1() as f64
}
