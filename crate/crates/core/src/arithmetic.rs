//! Exact and interval arithmetic for rotation numbers: the dyadic series
//! `Σ 2^{-2^{2^n}}`, continued fractions, irrationality type estimates and
//! first-entrance times.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::scaling::{fit_slope, SlopeFit};
use crate::systems::{Point, SystemDescriptor};

/// Smallest precision accepted for series and type computations.
pub const MIN_PRECISION_BITS: u64 = 80;

/// A rational value with a rigorous error bound `|true - value| < 2^-error_bits`.
#[derive(Clone, Debug, PartialEq)]
pub struct HighPrecReal {
    pub value: BigRational,
    /// `None` when the value is exact.
    pub error_bits: Option<u64>,
    /// Declared working precision.
    pub precision_bits: u64,
    /// Terms of a series were dropped because they lie below the precision.
    pub truncated: bool,
}

fn pow2(e: u64) -> BigInt {
    BigInt::one() << e as usize
}

fn inv_pow2(e: u64) -> BigRational {
    BigRational::new(BigInt::one(), pow2(e))
}

impl HighPrecReal {
    pub fn exact(value: BigRational, precision_bits: u64) -> Self {
        Self { value, error_bits: None, precision_bits, truncated: false }
    }

    pub fn from_f64(x: f64) -> Self {
        let v = BigRational::from_float(x).expect("finite value");
        Self::exact(v, 53)
    }

    /// `(sqrt(5) - 1) / 2` enclosed via an integer square root.
    pub fn golden(precision_bits: u64) -> Self {
        let p = precision_bits;
        let five = BigUint::from(5u32) << (2 * p) as usize;
        let s = BigInt::from(five.sqrt());
        // sqrt(5) lies in [s, s+1] / 2^p, so the midpoint is within 2^-(p+2) after halving.
        let num = 2 * &s + 1 - 2 * pow2(p);
        let value = BigRational::new(num, pow2(p + 2));
        Self { value, error_bits: Some(p + 2), precision_bits, truncated: false }
    }

    pub fn to_f64(&self) -> f64 {
        self.value.to_f64().unwrap_or(f64::NAN)
    }

    fn radius(&self) -> BigRational {
        match self.error_bits {
            None => BigRational::zero(),
            Some(b) => inv_pow2(b),
        }
    }
}

/// Exponent of the `n`-th term, `2^{2^{2^n}}`, saturating at `u64::MAX`.
fn liouville_exponent(n: usize) -> u64 {
    if n >= 3 {
        return u64::MAX;
    }
    1u64 << (1u64 << (1u64 << n))
}

/// Partial sum `Σ_{n<k} 2^{-2^{2^n}}`; terms beyond the precision are
/// dropped and reported through `truncated` with the remainder bound.
pub fn liouville_alpha(k_terms: usize, precision_bits: u64) -> Result<HighPrecReal> {
    if k_terms == 0 {
        return Err(invalid("k_terms", "at least one term is required"));
    }
    if precision_bits < MIN_PRECISION_BITS {
        return Err(invalid("precision", format!("at least {MIN_PRECISION_BITS} bits are required")));
    }
    let mut value = BigRational::zero();
    let mut truncated = false;
    let mut next = k_terms;
    for n in 0..k_terms {
        let e = liouville_exponent(n);
        if e > precision_bits {
            truncated = true;
            next = n;
            log::warn!("series term {n} (2^-{e}) lies below the {precision_bits}-bit precision; truncated");
            break;
        }
        value += inv_pow2(e);
    }
    // The tail from term `next` on is below twice its first term.
    let error_bits = match liouville_exponent(next) {
        u64::MAX => u64::MAX,
        e => e - 1,
    };
    Ok(HighPrecReal { value, error_bits: Some(error_bits), precision_bits, truncated })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuedFraction {
    /// Partial quotients `a_1, a_2, ...` of `x = [0; a_1, a_2, ...]`.
    pub quotients: Vec<BigInt>,
    /// The expansion of an exact rational ended.
    pub terminated: bool,
    /// The error bound no longer determines the next quotient.
    pub precision_exhausted: bool,
}

impl ContinuedFraction {
    pub fn as_u64(&self) -> Vec<u64> {
        self.quotients.iter().map(|q| q.to_u64().unwrap_or(u64::MAX)).collect()
    }

    /// Convergents `p_k / q_k`.
    pub fn convergents(&self) -> Vec<BigRational> {
        let (mut p0, mut q0) = (BigInt::zero(), BigInt::one());
        let (mut p1, mut q1) = (BigInt::one(), BigInt::zero());
        let mut out = Vec::with_capacity(self.quotients.len());
        for a in &self.quotients {
            let p = a * &p0 + &p1;
            let q = a * &q0 + &q1;
            out.push(BigRational::new(p.clone(), q.clone()));
            (p1, q1, p0, q0) = (p0, q0, p, q);
        }
        out
    }
}

/// Continued fraction of `x ∈ (0,1)`, emitting only quotients shared by every
/// number in the error interval.
pub fn continued_fraction(x: &HighPrecReal, depth: usize) -> Result<ContinuedFraction> {
    let zero = BigRational::zero();
    let one = BigRational::one();
    if x.value <= zero || x.value >= one {
        return Err(invalid("x", "continued fractions are taken for x in (0,1)"));
    }
    let r = x.radius();
    let (mut lo, mut hi) = (&x.value - &r, &x.value + &r);
    if lo <= zero || hi >= one {
        return Err(invalid("x", "error interval leaves (0,1)"));
    }
    let exact = r.is_zero();
    let mut quotients = Vec::new();
    let mut terminated = false;
    let mut exhausted = false;
    while quotients.len() < depth {
        // Invert: the quotient is floor(1/x), common to both ends of the interval.
        let (inv_lo, inv_hi) = (hi.recip(), lo.recip());
        let a = inv_lo.floor();
        if a != inv_hi.floor() && !(exact && inv_lo == inv_hi) {
            exhausted = true;
            break;
        }
        let (nlo, nhi) = (&inv_lo - &a, &inv_hi - &a);
        quotients.push(a.to_integer());
        if nlo.is_zero() || nhi.is_zero() {
            if exact {
                terminated = true;
            } else {
                exhausted = true;
            }
            break;
        }
        lo = nlo;
        hi = nhi;
    }
    Ok(ContinuedFraction { quotients, terminated, precision_exhausted: exhausted })
}

/// `log2` of a positive big integer, accurate to about 1e-15 relative.
fn log2_big(v: &BigInt) -> f64 {
    let bits = v.bits();
    if bits <= 60 {
        return v.to_f64().unwrap().log2();
    }
    let shift = bits - 60;
    let top: BigInt = v >> shift as usize;
    top.to_f64().unwrap().log2() + shift as f64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypeEstimate {
    pub nu: f64,
    /// The `j` achieving the maximum.
    pub argmax: u64,
    /// Some `‖jx‖` fell below the precision floor and was clamped.
    pub clamped: bool,
    pub first_clamp: Option<u64>,
}

/// Finite-range proxy `max_{j_min <= j <= j_max} log(1/‖jx‖) / log j` for the irrationality type.
///
/// `‖jx‖` is tracked exactly through `r_j = (r_{j-1} + p) mod q` on the
/// rational value; where the error interval `j·radius` swallows it, it is
/// clamped to the precision floor and flagged.
pub fn type_estimate(x: &HighPrecReal, j_min: u64, j_max: u64) -> Result<TypeEstimate> {
    if j_max < 1000 {
        return Err(invalid("j_max", "must be at least 1000"));
    }
    if j_min < 2 || j_min > j_max {
        return Err(invalid("j_min", "need 2 <= j_min <= j_max"));
    }
    let p = x.value.numer().mod_floor(x.value.denom());
    let q = x.value.denom().clone();
    let log2_q = log2_big(&q);
    let floor_bits = x.error_bits.unwrap_or(x.precision_bits).min(x.precision_bits) as f64;
    let mut r = BigInt::zero();
    let mut best = (f64::NEG_INFINITY, j_min);
    let mut first_clamp = None;
    for j in 1..=j_max {
        r += &p;
        if r >= q {
            r -= &q;
        }
        if j < j_min {
            continue;
        }
        let near = if &r + &r > q { &q - &r } else { r.clone() };
        // -log2 ‖jx‖, capped where the error interval could reach an integer.
        let bits = if near.is_zero() { f64::INFINITY } else { log2_q - log2_big(&near) };
        let cap = floor_bits - (j as f64).log2();
        let bits = if bits >= cap {
            first_clamp.get_or_insert(j);
            cap
        } else {
            bits
        };
        let nu = bits / (j as f64).log2();
        if nu > best.0 {
            best = (nu, j);
        }
    }
    Ok(TypeEstimate { nu: best.0, argmax: best.1, clamped: first_clamp.is_some(), first_clamp })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntranceRecord {
    pub r: f64,
    /// `None` when the horizon ran out first.
    pub tau: Option<u64>,
    pub target: Vec<f64>,
    pub start: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntranceCurve {
    pub records: Vec<EntranceRecord>,
    /// Slope of `log τ_r` against `-log r` over uncensored radii.
    pub fit: Option<SlopeFit>,
    /// Largest pointwise ratio `log τ_r / -log r`.
    pub limsup_ratio: f64,
    pub censored: usize,
}

/// First entrance times into `B(y, r)` for every radius, from one orbit scan.
pub fn entrance_time_curve(
    sys: &SystemDescriptor,
    x: &Point,
    y: &Point,
    r_grid: &[f64],
    horizon: u64,
) -> Result<EntranceCurve> {
    sys.check(x)?;
    sys.check(y)?;
    if r_grid.len() < 2 || r_grid.iter().any(|&r| !(r > 0.0)) {
        return Err(invalid("r_grid", "need at least two positive radii"));
    }
    let mut order: Vec<usize> = (0..r_grid.len()).collect();
    order.sort_by(|&a, &b| r_grid[b].total_cmp(&r_grid[a]));
    let mut tau = vec![None; r_grid.len()];
    let mut next = 0;
    let mut p = *x;
    for t in 1..=horizon {
        if next == order.len() {
            break;
        }
        p = sys.apply(&p);
        let d = sys.metric.distance(&p, y);
        while next < order.len() && d <= r_grid[order[next]] {
            tau[order[next]] = Some(t);
            next += 1;
        }
    }
    let records: Vec<EntranceRecord> = r_grid
        .iter()
        .zip(&tau)
        .map(|(&r, &t)| EntranceRecord { r, tau: t, target: y.coords().to_vec(), start: x.coords().to_vec() })
        .collect();
    let censored = tau.iter().filter(|t| t.is_none()).count();
    if censored > 0 {
        log::warn!("{censored} radii were not entered within {horizon} steps");
    }
    let xs: Vec<f64> = records.iter().map(|e| -e.r.log2()).collect();
    let ys: Vec<f64> = records.iter().map(|e| e.tau.map_or(f64::NAN, |t| (t as f64).log2())).collect();
    let fit = fit_slope(&xs, &ys, 0..xs.len()).ok();
    let limsup_ratio = xs
        .iter()
        .zip(&ys)
        .filter(|(x, y)| **x > 0.0 && y.is_finite())
        .map(|(x, y)| y / x)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(EntranceCurve { records, fit, limsup_ratio, censored })
}

/// `|value - p/q|` is small in the sense of distance to the nearest integer.
pub fn nearest_integer_distance(x: &BigRational) -> BigRational {
    let f = x - x.floor();
    let g = BigRational::one() - &f;
    if f < g {
        f
    } else {
        g
    }
}

/// True if `x` is exactly representable in binary with at most `bits` fractional bits.
pub fn is_dyadic(x: &BigRational, bits: u64) -> bool {
    let d = x.denom();
    d.is_positive() && (d & (d - BigInt::one())).is_zero() && d.bits() <= bits + 1
}
