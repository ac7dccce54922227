//! Interval enclosures with directed rounding.
//!
//! Endpoints carry an optional strictness flag: a half-open `[lo, hi)` knows
//! its upper bound is never attained. The flag is only ever set when it is
//! provable (sums, positive scalings, monotone maps); every other operation
//! returns a closed interval. `floor` uses it so that `floor` over `[n, n+1)`
//! is the single integer `n`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use thiserror::Error;

use super::eval::{integer_exponent, powi_exact};
use super::{BinOp, CmpOp, Cond, Expr, UnaryOp};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    lo_open: bool,
    hi_open: bool,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum IntervalError {
    #[error("divisor enclosure {divisor} may contain zero for t in {input}")]
    PossibleDivisionByZero { input: Interval, divisor: Interval },
    #[error("power {base}^{exponent} may be undefined for t in {input}")]
    InvalidPower {
        input: Interval,
        base: Interval,
        exponent: Interval,
    },
    #[error("enclosure is not finite for t in {input}")]
    NonFinite { input: Interval },
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.lo_open { '(' } else { '[' };
        let r = if self.hi_open { ')' } else { ']' };
        write!(f, "{l}{}, {}{r}", self.lo, self.hi)
    }
}

impl Interval {
    /// Closed interval `[lo, hi]`.
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval bounds out of order: {lo} > {hi}");
        Interval {
            lo,
            hi,
            lo_open: false,
            hi_open: false,
        }
    }

    /// Half-open interval `[lo, hi)`, the shape of one unit step `[n, n+1)`.
    pub fn half_open(lo: f64, hi: f64) -> Self {
        assert!(
            lo < hi,
            "half-open interval must be non-empty: [{lo}, {hi})"
        );
        Interval {
            lo,
            hi,
            lo_open: false,
            hi_open: true,
        }
    }

    pub fn point(x: f64) -> Self {
        Interval::new(x, x)
    }

    fn with_flags(lo: f64, hi: f64, lo_open: bool, hi_open: bool) -> Self {
        Interval {
            lo,
            hi,
            lo_open,
            hi_open,
        }
    }

    pub fn is_hi_open(&self) -> bool {
        self.hi_open
    }

    pub fn is_lo_open(&self) -> bool {
        self.lo_open
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi && !self.lo_open && !self.hi_open
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_open {
            x > self.lo
        } else {
            x >= self.lo
        };
        let below = if self.hi_open {
            x < self.hi
        } else {
            x <= self.hi
        };
        above && below
    }

    /// True when every point of `other` lies in `self`.
    pub fn encloses(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Smallest interval holding both.
    pub fn union(&self, other: &Interval) -> Interval {
        let (lo, lo_open) = if self.lo < other.lo {
            (self.lo, self.lo_open)
        } else if other.lo < self.lo {
            (other.lo, other.lo_open)
        } else {
            (self.lo, self.lo_open && other.lo_open)
        };
        let (hi, hi_open) = if self.hi > other.hi {
            (self.hi, self.hi_open)
        } else if other.hi > self.hi {
            (other.hi, other.hi_open)
        } else {
            (self.hi, self.hi_open && other.hi_open)
        };
        Interval::with_flags(lo, hi, lo_open, hi_open)
    }

    /// Split into `parts` pieces of equal width. Interior cut points are
    /// closed on both sides; the outer flags are kept.
    pub fn subdivide(&self, parts: usize) -> Vec<Interval> {
        let parts = parts.max(1);
        if parts == 1 || self.lo == self.hi {
            return vec![*self];
        }
        let w = self.hi - self.lo;
        let cuts: Vec<f64> = (0..=parts)
            .map(|i| match i {
                0 => self.lo,
                i if i == parts => self.hi,
                i => self.lo + w * (i as f64) / (parts as f64),
            })
            .collect();
        cuts.windows(2)
            .enumerate()
            .map(|(i, c)| {
                Interval::with_flags(
                    c[0],
                    c[1].max(c[0]),
                    i == 0 && self.lo_open,
                    i + 1 == parts && self.hi_open,
                )
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// directed rounding

fn add_dir(a: f64, b: f64, up: bool) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return overflow_bound(s, a.is_finite() && b.is_finite(), up);
    }
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    round_with_error(s, err, up)
}

fn mul_dir(a: f64, b: f64, up: bool) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = a * b;
    if !p.is_finite() {
        return overflow_bound(p, a.is_finite() && b.is_finite(), up);
    }
    if p.abs() < 1e-290 {
        // fma residuals are unreliable near underflow
        return if up { p.next_up() } else { p.next_down() };
    }
    let err = a.mul_add(b, -p);
    round_with_error(p, err, up)
}

fn div_dir(a: f64, b: f64, up: bool) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    let q = a / b;
    if !q.is_finite() {
        return overflow_bound(q, a.is_finite() && b.is_finite(), up);
    }
    if q.abs() < 1e-290 {
        return if up { q.next_up() } else { q.next_down() };
    }
    // a - q*b exactly; the true quotient lies on the side of sign(r/b)
    let r = (-q).mul_add(b, a);
    let err = if r == 0.0 {
        0.0
    } else {
        r.signum() * b.signum()
    };
    round_with_error(q, err, up)
}

fn round_with_error(v: f64, err: f64, up: bool) -> f64 {
    if up && err > 0.0 {
        v.next_up()
    } else if !up && err < 0.0 {
        v.next_down()
    } else {
        v
    }
}

fn overflow_bound(v: f64, finite_inputs: bool, up: bool) -> f64 {
    if !finite_inputs || v.is_nan() {
        return v;
    }
    match (v > 0.0, up) {
        (true, false) => f64::MAX,
        (false, true) => -f64::MAX,
        _ => v,
    }
}

/// `x^n` for `x >= 0` with directed rounding; monotone in `x`.
fn powu_dir(x: f64, n: u64, up: bool) -> f64 {
    let mut acc = 1.0;
    let mut base = x;
    let mut n = n;
    while n > 0 {
        if n & 1 == 1 {
            acc = mul_dir(acc, base, up);
        }
        n >>= 1;
        if n > 0 {
            base = mul_dir(base, base, up);
        }
    }
    acc
}

/// Libm results are trusted to within two ulps.
fn ulps_down(x: f64) -> f64 {
    x.next_down().next_down()
}

fn ulps_up(x: f64) -> f64 {
    x.next_up().next_up()
}

// ---------------------------------------------------------------------------
// interval operations

fn neg(a: Interval) -> Interval {
    Interval::with_flags(-a.hi, -a.lo, a.hi_open, a.lo_open)
}

fn add(a: Interval, b: Interval) -> Interval {
    Interval::with_flags(
        add_dir(a.lo, b.lo, false),
        add_dir(a.hi, b.hi, true),
        a.lo_open || b.lo_open,
        a.hi_open || b.hi_open,
    )
}

fn sub(a: Interval, b: Interval) -> Interval {
    add(a, neg(b))
}

fn scale_flags(c: f64, other: Interval, lo: f64, hi: f64) -> Interval {
    if c > 0.0 {
        Interval::with_flags(lo, hi, other.lo_open, other.hi_open)
    } else if c < 0.0 {
        Interval::with_flags(lo, hi, other.hi_open, other.lo_open)
    } else {
        Interval::with_flags(lo, hi, false, false)
    }
}

fn mul(a: Interval, b: Interval) -> Interval {
    let pairs = [(a.lo, b.lo), (a.lo, b.hi), (a.hi, b.lo), (a.hi, b.hi)];
    let lo = pairs
        .iter()
        .map(|&(x, y)| mul_dir(x, y, false))
        .fold(f64::INFINITY, f64::min);
    let hi = pairs
        .iter()
        .map(|&(x, y)| mul_dir(x, y, true))
        .fold(f64::NEG_INFINITY, f64::max);
    if a.is_point() {
        return scale_flags(a.lo, b, lo, hi);
    }
    if b.is_point() {
        return scale_flags(b.lo, a, lo, hi);
    }
    if a.lo >= 0.0 && b.lo >= 0.0 {
        let lo_open = (a.lo_open && b.lo > 0.0) || (b.lo_open && a.lo > 0.0);
        let hi_open = (a.hi_open && b.hi > 0.0) || (b.hi_open && a.hi > 0.0);
        return Interval::with_flags(lo, hi, lo_open, hi_open);
    }
    Interval::new(lo, hi)
}

fn div(input: Interval, a: Interval, b: Interval) -> Result<Interval, IntervalError> {
    if !(b.lo > 0.0 || b.hi < 0.0) {
        return Err(IntervalError::PossibleDivisionByZero { input, divisor: b });
    }
    let pairs = [(a.lo, b.lo), (a.lo, b.hi), (a.hi, b.lo), (a.hi, b.hi)];
    let lo = pairs
        .iter()
        .map(|&(x, y)| div_dir(x, y, false))
        .fold(f64::INFINITY, f64::min);
    let hi = pairs
        .iter()
        .map(|&(x, y)| div_dir(x, y, true))
        .fold(f64::NEG_INFINITY, f64::max);
    if b.is_point() {
        return Ok(scale_flags(b.lo, a, lo, hi));
    }
    Ok(Interval::new(lo, hi))
}

fn pow_int(input: Interval, x: Interval, n: i64) -> Result<Interval, IntervalError> {
    if n == 0 {
        return Ok(Interval::point(1.0));
    }
    let m = n.unsigned_abs();
    let even = m.is_multiple_of(2);
    let r = if x.lo >= 0.0 {
        Interval::with_flags(
            powu_dir(x.lo, m, false),
            powu_dir(x.hi, m, true),
            x.lo_open,
            x.hi_open,
        )
    } else if x.hi <= 0.0 {
        let (small, large) = (-x.hi, -x.lo);
        if even {
            Interval::with_flags(
                powu_dir(small, m, false),
                powu_dir(large, m, true),
                x.hi_open,
                x.lo_open,
            )
        } else {
            Interval::with_flags(
                -powu_dir(large, m, true),
                -powu_dir(small, m, false),
                x.lo_open,
                x.hi_open,
            )
        }
    } else if even {
        let big = powu_dir(-x.lo, m, true).max(powu_dir(x.hi, m, true));
        Interval::new(0.0, big)
    } else {
        Interval::with_flags(
            -powu_dir(-x.lo, m, true),
            powu_dir(x.hi, m, true),
            x.lo_open,
            x.hi_open,
        )
    };
    if n > 0 {
        Ok(r)
    } else {
        div(input, Interval::point(1.0), r)
    }
}

fn pow(input: Interval, x: Interval, y: Interval) -> Result<Interval, IntervalError> {
    if y.is_point() {
        if let Some(n) = integer_exponent(y.lo) {
            return pow_int(input, x, n);
        }
    }
    if x.lo < 0.0 || (x.lo == 0.0 && y.lo <= 0.0) {
        return Err(IntervalError::InvalidPower {
            input,
            base: x,
            exponent: y,
        });
    }
    // x^y is monotone in each argument on x > 0, so the corners bound it.
    let corner = |b: f64, e: f64| {
        if b == 0.0 {
            0.0
        } else if let Some(n) = integer_exponent(e) {
            if n >= 0 {
                powi_exact(b, n as u64)
            } else {
                1.0 / powi_exact(b, n.unsigned_abs())
            }
        } else {
            b.powf(e)
        }
    };
    let vals = [
        corner(x.lo, y.lo),
        corner(x.lo, y.hi),
        corner(x.hi, y.lo),
        corner(x.hi, y.hi),
    ];
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Interval::new(ulps_down(lo).max(0.0), ulps_up(hi)))
}

/// Greatest integer bound usable for the top of `floor(x)`.
fn floor_hi(x: Interval) -> f64 {
    let f = x.hi.floor();
    if x.hi_open && f == x.hi {
        f - 1.0
    } else {
        f
    }
}

fn floor(x: Interval) -> Interval {
    Interval::new(x.lo.floor(), floor_hi(x))
}

fn frac(x: Interval) -> Interval {
    let fl = x.lo.floor();
    if floor_hi(x) == fl {
        Interval::with_flags(x.lo - fl, x.hi - fl, x.lo_open, x.hi_open)
    } else {
        Interval::with_flags(0.0, 1.0, false, true)
    }
}

fn abs(x: Interval) -> Interval {
    if x.lo >= 0.0 {
        x
    } else if x.hi <= 0.0 {
        neg(x)
    } else if -x.lo > x.hi {
        Interval::with_flags(0.0, -x.lo, false, x.lo_open)
    } else if x.hi > -x.lo {
        Interval::with_flags(0.0, x.hi, false, x.hi_open)
    } else {
        Interval::with_flags(0.0, x.hi, false, x.lo_open && x.hi_open)
    }
}

fn exp(x: Interval) -> Interval {
    Interval::with_flags(
        ulps_down(x.lo.exp()).max(0.0),
        ulps_up(x.hi.exp()),
        x.lo_open,
        x.hi_open,
    )
}

/// Does `[lo, hi]` (slightly widened) contain `offset + 2πk` for some integer k?
fn hits_critical(lo: f64, hi: f64, offset: f64) -> bool {
    let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    let k = ((lo - slack - offset) / TAU).ceil();
    offset + k * TAU <= hi + slack
}

/// Range of `cos(x - shift)` over `x`, i.e. cos for shift 0, sin for π/2.
fn trig(x: Interval, shift: f64, f: fn(f64) -> f64) -> Interval {
    if x.hi - x.lo >= TAU || x.lo.abs().max(x.hi.abs()) > 1e9 {
        return Interval::new(-1.0, 1.0);
    }
    let a = f(x.lo);
    let b = f(x.hi);
    let lo = if hits_critical(x.lo, x.hi, shift + PI) {
        -1.0
    } else {
        ulps_down(a.min(b)).max(-1.0)
    };
    let hi = if hits_critical(x.lo, x.hi, shift) {
        1.0
    } else {
        ulps_up(a.max(b)).min(1.0)
    };
    Interval::new(lo, hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Truth {
    True,
    False,
    Unknown,
}

fn cmp_lt(a: Interval, b: Interval) -> Truth {
    if a.hi < b.lo || (a.hi == b.lo && (a.hi_open || b.lo_open)) {
        Truth::True
    } else if a.lo >= b.hi {
        Truth::False
    } else {
        Truth::Unknown
    }
}

fn cmp_le(a: Interval, b: Interval) -> Truth {
    if a.hi <= b.lo {
        Truth::True
    } else if a.lo > b.hi || (a.lo == b.hi && (a.lo_open || b.hi_open)) {
        Truth::False
    } else {
        Truth::Unknown
    }
}

impl Cond {
    fn truth(&self, iv: Interval) -> Truth {
        match self {
            Cond::Cmp(op, a, b) => {
                let (Ok(x), Ok(y)) = (a.eval_interval(iv), b.eval_interval(iv)) else {
                    return Truth::Unknown;
                };
                match op {
                    CmpOp::Lt => cmp_lt(x, y),
                    CmpOp::Le => cmp_le(x, y),
                    CmpOp::Gt => cmp_lt(y, x),
                    CmpOp::Ge => cmp_le(y, x),
                }
            }
            Cond::And(a, b) => match (a.truth(iv), b.truth(iv)) {
                (Truth::False, _) | (_, Truth::False) => Truth::False,
                (Truth::True, Truth::True) => Truth::True,
                _ => Truth::Unknown,
            },
            Cond::Or(a, b) => match (a.truth(iv), b.truth(iv)) {
                (Truth::True, _) | (_, Truth::True) => Truth::True,
                (Truth::False, Truth::False) => Truth::False,
                _ => Truth::Unknown,
            },
        }
    }
}

impl Expr {
    /// Enclose `{ eval(t) : t in iv }`.
    ///
    /// This is the natural interval extension: sound but not tight when `t`
    /// occurs more than once. Piecewise branches that are not provably
    /// unreachable on `iv` are unioned.
    pub fn eval_interval(&self, iv: Interval) -> Result<Interval, IntervalError> {
        let r = self.enclose(iv)?;
        if r.lo.is_finite() && r.hi.is_finite() {
            Ok(r)
        } else {
            Err(IntervalError::NonFinite { input: iv })
        }
    }

    fn enclose(&self, iv: Interval) -> Result<Interval, IntervalError> {
        Ok(match self {
            Expr::Const(c) => Interval::point(*c),
            Expr::Var => iv,
            Expr::Unary(op, a) => {
                let x = a.enclose(iv)?;
                match op {
                    UnaryOp::Neg => neg(x),
                    UnaryOp::Floor => floor(x),
                    UnaryOp::Frac => frac(x),
                    UnaryOp::Sin => trig(x, FRAC_PI_2, f64::sin),
                    UnaryOp::Cos => trig(x, 0.0, f64::cos),
                    UnaryOp::Exp => exp(x),
                    UnaryOp::Abs => abs(x),
                }
            }
            Expr::Binary(op, a, b) => {
                let x = a.enclose(iv)?;
                let y = b.enclose(iv)?;
                match op {
                    BinOp::Add => add(x, y),
                    BinOp::Sub => sub(x, y),
                    BinOp::Mul => mul(x, y),
                    BinOp::Div => div(iv, x, y)?,
                    BinOp::Pow => pow(iv, x, y)?,
                }
            }
            Expr::Piecewise {
                branches,
                otherwise,
            } => {
                let mut acc: Option<Interval> = None;
                let mut settled = false;
                for (cond, e) in branches {
                    let truth = cond.truth(iv);
                    if truth == Truth::False {
                        continue;
                    }
                    let r = e.enclose(iv)?;
                    acc = Some(acc.map_or(r, |a| a.union(&r)));
                    if truth == Truth::True {
                        settled = true;
                        break;
                    }
                }
                if !settled {
                    let r = otherwise.enclose(iv)?;
                    acc = Some(acc.map_or(r, |a| a.union(&r)));
                }
                acc.expect("piecewise always has an otherwise branch")
            }
        })
    }
}
