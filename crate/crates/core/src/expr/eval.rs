use thiserror::Error;

use super::{BinOp, Cond, Expr, UnaryOp};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero at t = {t}")]
    DivisionByZero { t: f64 },
    #[error("zero raised to a negative power at t = {t}")]
    ZeroToNegativePower { t: f64 },
    #[error("{base}^{exponent} is undefined for a non-integer exponent (t = {t})")]
    InvalidPower { base: f64, exponent: f64, t: f64 },
    #[error("non-finite intermediate value at t = {t}")]
    NonFinite { t: f64 },
}

/// Largest exponent magnitude evaluated by repeated squaring.
const MAX_INT_EXPONENT: f64 = 1.0e9;

pub(crate) fn integer_exponent(b: f64) -> Option<i64> {
    (b.fract() == 0.0 && b.abs() <= MAX_INT_EXPONENT).then_some(b as i64)
}

/// `x^n` by binary exponentiation; exact whenever every partial product is.
pub(crate) fn powi_exact(x: f64, n: u64) -> f64 {
    let mut acc = 1.0;
    let mut base = x;
    let mut n = n;
    while n > 0 {
        if n & 1 == 1 {
            acc *= base;
        }
        n >>= 1;
        if n > 0 {
            base *= base;
        }
    }
    acc
}

pub(crate) fn floor(x: f64) -> f64 {
    x.floor()
}

/// `x - floor(x)`; the subtraction is exact in binary floating point.
pub(crate) fn frac(x: f64) -> f64 {
    x - x.floor()
}

fn pow(base: f64, exponent: f64, t: f64) -> Result<f64, EvalError> {
    if let Some(n) = integer_exponent(exponent) {
        if n >= 0 {
            return Ok(powi_exact(base, n as u64));
        }
        if base == 0.0 {
            return Err(EvalError::ZeroToNegativePower { t });
        }
        return Ok(1.0 / powi_exact(base, n.unsigned_abs()));
    }
    if base > 0.0 {
        Ok(base.powf(exponent))
    } else if base == 0.0 && exponent > 0.0 {
        Ok(0.0)
    } else if base == 0.0 {
        Err(EvalError::ZeroToNegativePower { t })
    } else {
        Err(EvalError::InvalidPower { base, exponent, t })
    }
}

impl Expr {
    /// Evaluate at `t`. Non-finite intermediate values are errors.
    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var => t,
            Expr::Unary(op, a) => {
                let x = a.eval(t)?;
                match op {
                    UnaryOp::Neg => -x,
                    UnaryOp::Floor => floor(x),
                    UnaryOp::Frac => frac(x),
                    UnaryOp::Sin => x.sin(),
                    UnaryOp::Cos => x.cos(),
                    UnaryOp::Exp => x.exp(),
                    UnaryOp::Abs => x.abs(),
                }
            }
            Expr::Binary(op, a, b) => {
                let x = a.eval(t)?;
                let y = b.eval(t)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(EvalError::DivisionByZero { t });
                        }
                        x / y
                    }
                    BinOp::Pow => pow(x, y, t)?,
                }
            }
            Expr::Piecewise {
                branches,
                otherwise,
            } => {
                for (cond, e) in branches {
                    if cond.holds(t)? {
                        return e.eval(t);
                    }
                }
                otherwise.eval(t)?
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite { t })
        }
    }
}

impl Cond {
    /// Exact comparison, no tolerance.
    pub fn holds(&self, t: f64) -> Result<bool, EvalError> {
        Ok(match self {
            Cond::Cmp(op, a, b) => op.holds(a.eval(t)?, b.eval(t)?),
            Cond::And(a, b) => a.holds(t)? && b.holds(t)?,
            Cond::Or(a, b) => a.holds(t)? || b.holds(t)?,
        })
    }
}
