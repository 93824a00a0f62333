//! Fisher's exact test on 2x2 contingency tables.
//!
//! All combinatorics are carried out in log space against a precomputed
//! table of `ln(k!)`. With the margins fixed, a table is determined by its
//! top-left cell `a`, which follows a hypergeometric distribution; the
//! two-sided p-value sums the point probabilities of every table that is no
//! more likely than the observed one.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Largest `n_max` accepted by [`LogFactorialTable::build`].
pub const MAX_TABLE_N: usize = 1_000_000_000;

/// Largest table size accepted by the enumeration oracle.
pub const ORACLE_MAX_N: u64 = 2000;

/// Relative slack used when deciding whether a table is "no more likely"
/// than the observed one, so that analytically tied tables are counted.
pub const TIE_TOLERANCE: f64 = 1e-7;

/// Counts of a 2x2 table laid out as
///
/// ```text
///            > x_th   <= x_th
/// before       a        b
/// after        c        d
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable {
    pub const fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        Self { a, b, c, d }
    }

    pub const fn n(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    pub const fn row_swap(&self) -> Self {
        Self::new(self.c, self.d, self.a, self.b)
    }

    pub const fn col_swap(&self) -> Self {
        Self::new(self.b, self.a, self.d, self.c)
    }

    pub const fn transpose(&self) -> Self {
        Self::new(self.a, self.c, self.b, self.d)
    }

    /// Lexicographically smallest image under row swap, column swap and
    /// transposition. The p-value is a function of the orbit only, so
    /// evaluating the canonical form makes the symmetries hold bit-for-bit.
    fn canonical(&self) -> Self {
        let base = [*self, self.row_swap(), self.col_swap(), self.row_swap().col_swap()];
        base.iter()
            .flat_map(|t| [*t, t.transpose()])
            .min_by_key(|t| (t.a, t.b, t.c, t.d))
            .unwrap()
    }
}

/// `values[k] = ln(k!)` for `k = 0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogFactorialTable {
    values: Vec<f64>,
}

impl LogFactorialTable {
    /// Builds the table by compensated cumulative summation of `ln(k)`.
    pub fn build(n_max: usize) -> Result<Self> {
        if n_max > MAX_TABLE_N {
            return Err(Error::Capacity {
                requested: n_max,
                limit: MAX_TABLE_N,
            });
        }
        let mut values = Vec::with_capacity(n_max + 1);
        values.push(0.0);
        let mut acc = CompensatedSum::new();
        for k in 1..=n_max {
            acc.add((k as f64).ln());
            values.push(acc.value());
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn covers(&self, n: u64) -> bool {
        n <= self.max_n() as u64
    }

    #[inline]
    pub fn ln_factorial(&self, k: u64) -> f64 {
        self.values[k as usize]
    }

    pub fn ln_binomial(&self, n: u64, k: u64) -> f64 {
        self.ln_factorial(n) - self.ln_factorial(k) - self.ln_factorial(n - k)
    }

    fn check(&self, t: &ContingencyTable) -> Result<()> {
        let n = t.n();
        if n == 0 {
            return Err(Error::EmptyTable);
        }
        if !self.covers(n) {
            return Err(Error::TableTooSmall {
                needed: n as usize,
                covered: self.max_n(),
            });
        }
        Ok(())
    }
}

/// Which formula turns a table into a p-value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PValueVariant {
    /// Sum of point probabilities of all tables (same margins) whose point
    /// probability does not exceed the observed one.
    #[default]
    StandardTwoSided,
    /// The inclusive left tail plus the inclusive right tail, divided by
    /// `C(n, a+b)`, clamped to 1. Both sums contain the observed table, so
    /// before clamping this is always `1 + P(observed)`; it is kept as a
    /// diagnostic only.
    LiteralTails,
}

/// Hypergeometric law of the top-left cell given fixed margins.
struct Margins<'a> {
    lf: &'a LogFactorialTable,
    row1: u64,
    col1: u64,
    col2: u64,
    n: u64,
    ln_norm: f64,
}

impl<'a> Margins<'a> {
    fn of(t: &ContingencyTable, lf: &'a LogFactorialTable) -> Self {
        let (row1, row2) = (t.a + t.b, t.c + t.d);
        let (col1, col2) = (t.a + t.c, t.b + t.d);
        let n = t.n();
        let ln_norm = lf.ln_factorial(row1) + lf.ln_factorial(row2) + lf.ln_factorial(col1)
            + lf.ln_factorial(col2)
            - lf.ln_factorial(n);
        Self {
            lf,
            row1,
            col1,
            col2,
            n,
            ln_norm,
        }
    }

    fn lo(&self) -> u64 {
        self.row1.saturating_sub(self.col2)
    }

    fn hi(&self) -> u64 {
        self.row1.min(self.col1)
    }

    /// ln P(a = k).
    #[inline]
    fn ln_pmf(&self, k: u64) -> f64 {
        let lf = self.lf;
        self.ln_norm
            - lf.ln_factorial(k)
            - lf.ln_factorial(self.row1 - k)
            - lf.ln_factorial(self.col1 - k)
            - lf.ln_factorial(self.n + k - self.row1 - self.col1)
    }

    fn mode(&self) -> u64 {
        let m = ((self.row1 + 1) as u128 * (self.col1 + 1) as u128 / (self.n + 2) as u128) as u64;
        m.clamp(self.lo(), self.hi())
    }
}

/// Hypergeometric point probability of `t` given its margins.
pub fn point_probability(t: &ContingencyTable, lf: &LogFactorialTable) -> Result<f64> {
    lf.check(t)?;
    let m = Margins::of(t, lf);
    if m.lo() == m.hi() {
        return Ok(1.0);
    }
    Ok(m.ln_pmf(t.a).exp().min(1.0))
}

/// Two-sided Fisher exact p-value of `t`, clamped to `[0, 1]`.
pub fn fisher_p(t: &ContingencyTable, lf: &LogFactorialTable, variant: PValueVariant) -> Result<f64> {
    lf.check(t)?;
    Ok(match variant {
        PValueVariant::StandardTwoSided => ln_p_standard(t, lf).exp().max(f64::MIN_POSITIVE),
        PValueVariant::LiteralTails => literal_tails_raw(t, lf).min(1.0),
    })
}

/// Natural log of the p-value; unlike [`fisher_p`] this does not underflow
/// for extremely significant tables.
pub fn fisher_ln_p(t: &ContingencyTable, lf: &LogFactorialTable, variant: PValueVariant) -> Result<f64> {
    lf.check(t)?;
    Ok(ln_p_unchecked(t, lf, variant))
}

#[inline]
pub(crate) fn ln_p_unchecked(t: &ContingencyTable, lf: &LogFactorialTable, variant: PValueVariant) -> f64 {
    match variant {
        PValueVariant::StandardTwoSided => ln_p_standard(t, lf),
        PValueVariant::LiteralTails => literal_tails_raw(t, lf).min(1.0).ln(),
    }
}

/// Value of the literal two-tail formula before clamping.
pub fn literal_tails_unclamped(t: &ContingencyTable, lf: &LogFactorialTable) -> Result<f64> {
    lf.check(t)?;
    Ok(literal_tails_raw(t, lf))
}

fn literal_tails_raw(t: &ContingencyTable, lf: &LogFactorialTable) -> f64 {
    let (a, b, c, d) = (t.a, t.b, t.c, t.d);
    let ln_denom = lf.ln_binomial(t.n(), a + b);
    let mut sum = CompensatedSum::new();
    for i in 0..=b.min(c) {
        sum.add((lf.ln_binomial(a + c, c - i) + lf.ln_binomial(b + d, b - i) - ln_denom).exp());
    }
    for i in 0..=a.min(d) {
        sum.add((lf.ln_binomial(a + c, a - i) + lf.ln_binomial(b + d, d - i) - ln_denom).exp());
    }
    sum.value()
}

fn ln_p_standard(t: &ContingencyTable, lf: &LogFactorialTable) -> f64 {
    let t = t.canonical();
    let m = Margins::of(&t, lf);
    let (lo, hi) = (m.lo(), m.hi());
    if lo == hi {
        return 0.0;
    }
    let threshold = m.ln_pmf(t.a) + TIE_TOLERANCE.ln_1p();
    let mode = m.mode();
    if m.ln_pmf(mode) <= threshold {
        return 0.0;
    }

    // The pmf is log-concave: non-decreasing up to the mode and
    // non-increasing after it, so each tail is a contiguous run.
    let left_end = if lo < mode && m.ln_pmf(lo) <= threshold {
        // largest k in [lo, mode) with ln_pmf(k) <= threshold
        let (mut ok, mut bad) = (lo, mode);
        while bad - ok > 1 {
            let mid = ok + (bad - ok) / 2;
            if m.ln_pmf(mid) <= threshold {
                ok = mid;
            } else {
                bad = mid;
            }
        }
        Some(ok)
    } else {
        None
    };
    let right_start = if hi > mode && m.ln_pmf(hi) <= threshold {
        // smallest k in (mode, hi] with ln_pmf(k) <= threshold
        let (mut bad, mut ok) = (mode, hi);
        while ok - bad > 1 {
            let mid = bad + (ok - bad) / 2;
            if m.ln_pmf(mid) <= threshold {
                ok = mid;
            } else {
                bad = mid;
            }
        }
        Some(ok)
    } else {
        None
    };

    let scale = left_end
        .map(|k| m.ln_pmf(k))
        .into_iter()
        .chain(right_start.map(|k| m.ln_pmf(k)))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut sum = CompensatedSum::new();
    if let Some(k0) = left_end {
        sum_tail(&m, (lo..=k0).rev(), scale, &mut sum);
    }
    if let Some(k0) = right_start {
        sum_tail(&m, k0..=hi, scale, &mut sum);
    }
    (scale + sum.value().ln()).min(0.0)
}

/// Adds `exp(ln_pmf(k) - scale)` over a tail walked away from the mode.
///
/// Successive ratios shrink along the walk, so once the geometric bound on
/// the remainder drops below the working precision the rest is skipped.
fn sum_tail(m: &Margins, ks: impl Iterator<Item = u64>, scale: f64, sum: &mut CompensatedSum) {
    let mut prev: Option<f64> = None;
    for k in ks {
        let term = (m.ln_pmf(k) - scale).exp();
        sum.add(term);
        if let Some(p) = prev {
            let ratio = if p > 0.0 { term / p } else { 0.0 };
            if ratio < 1.0 && term * ratio / (1.0 - ratio) <= sum.value() * 1e-17 {
                break;
            }
        }
        prev = Some(term);
    }
}

/// Exact enumeration oracle for [`fisher_p`], using arbitrary-precision
/// integers for every binomial coefficient.
pub fn brute_force_p(t: &ContingencyTable, variant: PValueVariant) -> Result<f64> {
    let (mantissa, exp2) = brute_force_ratio(t, variant)?;
    Ok(if exp2 < -1000 {
        (mantissa.ln() + exp2 as f64 * std::f64::consts::LN_2).exp()
    } else {
        mantissa * 2f64.powi(exp2 as i32)
    })
}

/// Natural log of [`brute_force_p`].
pub fn brute_force_ln_p(t: &ContingencyTable, variant: PValueVariant) -> Result<f64> {
    let (mantissa, exp2) = brute_force_ratio(t, variant)?;
    Ok(mantissa.ln() + exp2 as f64 * std::f64::consts::LN_2)
}

/// The p-value as `mantissa * 2^exp2`.
fn brute_force_ratio(t: &ContingencyTable, variant: PValueVariant) -> Result<(f64, i64)> {
    let n = t.n();
    if n == 0 {
        return Err(Error::EmptyTable);
    }
    if n > ORACLE_MAX_N {
        return Err(Error::Capacity {
            requested: n as usize,
            limit: ORACLE_MAX_N as usize,
        });
    }
    let (row1, col1, col2) = (t.a + t.b, t.a + t.c, t.b + t.d);
    let lo = row1.saturating_sub(col2);
    let hi = row1.min(col1);
    let c1 = binomial_row(col1);
    let c2 = binomial_row(col2);
    let weight = |k: u64| &c1[k as usize] * &c2[(row1 - k) as usize];
    let denom = &binomial_row(n)[row1 as usize];
    let observed = weight(t.a);

    let mut num = BigUint::zero();
    match variant {
        PValueVariant::StandardTwoSided => {
            let scale = BigUint::from(10_000_000u32);
            let bound = &observed * (&scale + BigUint::one());
            for k in lo..=hi {
                let w = weight(k);
                if &w * &scale <= bound {
                    num += w;
                }
            }
        }
        PValueVariant::LiteralTails => {
            for k in t.a..=hi {
                num += weight(k);
            }
            for k in lo..=t.a {
                num += weight(k);
            }
        }
    }
    if num >= *denom {
        return Ok((1.0, 0));
    }
    Ok(split_ratio(&num, denom))
}

/// Row `n` of Pascal's triangle.
fn binomial_row(n: u64) -> Vec<BigUint> {
    let mut row = Vec::with_capacity(n as usize + 1);
    let mut cur = BigUint::one();
    row.push(cur.clone());
    for k in 0..n {
        cur = cur * (n - k) / (k + 1);
        row.push(cur.clone());
    }
    row
}

/// `num / den` as `(q, e)` with `num / den ~= q * 2^e` and `q` near 2^64.
fn split_ratio(num: &BigUint, den: &BigUint) -> (f64, i64) {
    let shift = den.bits() as i64 - num.bits() as i64 + 64;
    let q = if shift >= 0 {
        (num << shift as u64) / den
    } else {
        num / (den << (-shift) as u64)
    };
    (q.to_f64().unwrap(), -shift)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lf() -> LogFactorialTable {
        LogFactorialTable::build(200).unwrap()
    }

    fn t(a: u64, b: u64, c: u64, d: u64) -> ContingencyTable {
        ContingencyTable::new(a, b, c, d)
    }

    fn close(x: f64, y: f64, rel: f64) -> bool {
        (x - y).abs() <= rel * y.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn log_factorial_small_tables() {
        assert_eq!(LogFactorialTable::build(0).unwrap().values(), &[0.0]);
        let v = LogFactorialTable::build(4).unwrap();
        let expected = [0.0, 0.0, 2f64.ln(), 6f64.ln(), 24f64.ln()];
        for (x, y) in v.values().iter().zip(expected) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn log_factorial_170() {
        // ln(170!) evaluated at 40 digits.
        let v = LogFactorialTable::build(170).unwrap();
        assert!(close(v.values()[170], 706.573_062_245_787_3, 1e-14));
    }

    #[test]
    fn log_factorial_increments() {
        let v = LogFactorialTable::build(100_000).unwrap();
        assert_eq!(v.values()[0], 0.0);
        for k in 1..=100_000usize {
            let diff = v.values()[k] - v.values()[k - 1];
            assert!((diff - (k as f64).ln()).abs() <= 1e-12 * v.values()[k].max(1.0));
        }
    }

    #[test]
    fn log_factorial_capacity() {
        assert!(matches!(
            LogFactorialTable::build(MAX_TABLE_N + 1),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn point_probability_examples() {
        let lf = lf();
        assert!(close(point_probability(&t(1, 0, 0, 1), &lf).unwrap(), 0.5, 1e-14));
        assert!(close(point_probability(&t(2, 2, 2, 2), &lf).unwrap(), 36.0 / 70.0, 1e-14));
        for k in 1..50 {
            assert!(close(point_probability(&t(k, 0, 0, 0), &lf).unwrap(), 1.0, 1e-14));
        }
    }

    #[test]
    fn standard_two_sided_examples() {
        let lf = lf();
        let p = |a, b, c, d| fisher_p(&t(a, b, c, d), &lf, PValueVariant::StandardTwoSided).unwrap();
        assert!(close(p(4, 0, 0, 4), 2.0 / 70.0, 1e-12));
        assert!(close(p(3, 1, 1, 3), 34.0 / 70.0, 1e-12));
        assert_eq!(p(2, 2, 2, 2), 1.0);
        assert!(close(p(3, 0, 0, 3), 0.1, 1e-12));
        assert_eq!(p(1, 0, 0, 1), 1.0);
        assert_eq!(p(0, 0, 0, 1), 1.0);
    }

    #[test]
    fn literal_formula_examples() {
        let lf = lf();
        let raw = literal_tails_unclamped(&t(2, 0, 0, 2), &lf).unwrap();
        assert!(close(raw, 7.0 / 6.0, 1e-14));
        assert_eq!(fisher_p(&t(2, 0, 0, 2), &lf, PValueVariant::LiteralTails).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_margins() {
        let lf = lf();
        for tab in [t(5, 3, 0, 0), t(0, 0, 2, 7), t(4, 0, 6, 0), t(0, 3, 0, 9)] {
            assert_eq!(fisher_p(&tab, &lf, PValueVariant::StandardTwoSided).unwrap(), 1.0);
            assert_eq!(point_probability(&tab, &lf).unwrap(), 1.0);
        }
    }

    #[test]
    fn precondition_errors() {
        let small = LogFactorialTable::build(5).unwrap();
        assert_eq!(
            fisher_p(&t(0, 0, 0, 0), &small, PValueVariant::StandardTwoSided),
            Err(Error::EmptyTable)
        );
        assert!(matches!(
            fisher_p(&t(3, 3, 0, 0), &small, PValueVariant::StandardTwoSided),
            Err(Error::TableTooSmall { needed: 6, covered: 5 })
        ));
        assert!(matches!(
            brute_force_p(&t(1500, 1, 1, 1500), PValueVariant::StandardTwoSided),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn oracle_examples() {
        let sts = PValueVariant::StandardTwoSided;
        assert!(close(brute_force_p(&t(4, 0, 0, 4), sts).unwrap(), 2.0 / 70.0, 1e-15));
        assert_eq!(brute_force_p(&t(1, 0, 0, 1), sts).unwrap(), 1.0);
        assert_eq!(brute_force_p(&t(0, 0, 0, 1), sts).unwrap(), 1.0);
    }

    #[test]
    fn exhaustive_small_tables_match_oracle() {
        let lf = lf();
        for n in 1..=12u64 {
            for a in 0..=n {
                for b in 0..=n - a {
                    for c in 0..=n - a - b {
                        let tab = t(a, b, c, n - a - b - c);
                        for v in [PValueVariant::StandardTwoSided, PValueVariant::LiteralTails] {
                            let fast = fisher_p(&tab, &lf, v).unwrap();
                            let slow = brute_force_p(&tab, v).unwrap();
                            assert!(close(fast, slow, 1e-10), "{tab:?} {v:?}: {fast} vs {slow}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn large_table_tiny_p_value() {
        let lf = LogFactorialTable::build(2000).unwrap();
        let tab = t(300, 700, 700, 300);
        let fast = fisher_ln_p(&tab, &lf, PValueVariant::StandardTwoSided).unwrap();
        let slow = brute_force_ln_p(&tab, PValueVariant::StandardTwoSided).unwrap();
        assert!(fast < -100.0);
        assert!((fast - slow).abs() <= 1e-10 * slow.abs());
    }
}
