//! Closed-form expressions in the single variable `t`.
//!
//! Coefficients `a_k(t)`, delay arguments `h_k(t)`, initial functions and
//! reference solutions are all written in this small language. An
//! [`Expr`] can be evaluated at a point ([`Expr::eval`]) or enclosed over an
//! interval ([`Expr::eval_interval`]).
//!
//! Grammar (informal EBNF, `t` is the only variable):
//!
//! ```text
//! expr      = term { ("+" | "-") term } ;
//! term      = unary { ("*" | "/") unary } ;
//! unary     = "-" unary | power ;
//! power     = primary [ "^" unary ] ;
//! primary   = number | "t" | "pi" | "(" expr ")"
//!           | func "(" expr ")"
//!           | "piecewise" "(" { cond ":" expr ";" } "otherwise" ":" expr ")" ;
//! func      = "floor" | "frac" | "sin" | "cos" | "exp" | "abs" ;
//! cond      = conj { "or" conj } ;
//! conj      = atom { "and" atom } ;
//! atom      = "(" cond ")" | expr cmp expr ;
//! cmp       = "<" | "<=" | ">" | ">=" ;
//! ```
//!
//! Precedence from tightest: `^`, unary `-`, `*` `/`, `+` `-`. So `-2^2`
//! is `-(2^2)` and `2^-1` is `2^(-1)`.

mod eval;
mod interval;
mod parse;
mod print;

pub use eval::EvalError;
pub use interval::{Interval, IntervalError};
pub use parse::{parse, ParseError, ParseErrorKind};

use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Floor,
    Frac,
    Sin,
    Cos,
    Exp,
    Abs,
}

impl UnaryOp {
    /// Function-call spelling, `None` for negation.
    pub fn name(self) -> Option<&'static str> {
        match self {
            UnaryOp::Neg => None,
            UnaryOp::Floor => Some("floor"),
            UnaryOp::Frac => Some("frac"),
            UnaryOp::Sin => Some("sin"),
            UnaryOp::Cos => Some("cos"),
            UnaryOp::Exp => Some("exp"),
            UnaryOp::Abs => Some("abs"),
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "floor" => UnaryOp::Floor,
            "frac" => UnaryOp::Frac,
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "abs" => UnaryOp::Abs,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }
}

/// Branch condition of a piecewise expression.
#[derive(Clone, Debug, PartialEq)]
pub enum Cond {
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    /// A finite constant. The parser only produces non-negative constants;
    /// a leading minus becomes [`UnaryOp::Neg`].
    Const(f64),
    /// The variable `t`.
    Var,
    Unary(UnaryOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// First branch whose condition holds wins; `otherwise` is mandatory.
    Piecewise {
        branches: Vec<(Cond, Expr)>,
        otherwise: Box<Expr>,
    },
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn var() -> Self {
        Expr::Var
    }

    pub fn unary(op: UnaryOp, arg: Expr) -> Self {
        Expr::Unary(op, Box::new(arg))
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Number of nodes, conditions included.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var => 1,
            Expr::Unary(_, a) => 1 + a.size(),
            Expr::Binary(_, a, b) => 1 + a.size() + b.size(),
            Expr::Piecewise {
                branches,
                otherwise,
            } => {
                1 + otherwise.size()
                    + branches
                        .iter()
                        .map(|(c, e)| c.size() + e.size())
                        .sum::<usize>()
            }
        }
    }
}

impl Cond {
    pub fn cmp(op: CmpOp, lhs: Expr, rhs: Expr) -> Self {
        Cond::Cmp(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn size(&self) -> usize {
        match self {
            Cond::Cmp(_, a, b) => 1 + a.size() + b.size(),
            Cond::And(a, b) | Cond::Or(a, b) => 1 + a.size() + b.size(),
        }
    }
}

impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_expr(f, self)
    }
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_cond(f, self)
    }
}
