use std::fmt::{self, Write};

use super::{BinOp, Cond, Expr, UnaryOp};

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(BinOp::Add | BinOp::Sub, ..) => PREC_ADD,
        Expr::Binary(BinOp::Mul | BinOp::Div, ..) => PREC_MUL,
        Expr::Binary(BinOp::Pow, ..) => PREC_POW,
        Expr::Unary(UnaryOp::Neg, _) => PREC_NEG,
        _ => PREC_ATOM,
    }
}

fn child(f: &mut fmt::Formatter<'_>, e: &Expr, paren: bool) -> fmt::Result {
    if paren {
        f.write_char('(')?;
        write_expr(f, e)?;
        f.write_char(')')
    } else {
        write_expr(f, e)
    }
}

pub(super) fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        // Negative constants never come out of the parser; they print as a
        // parenthesised negation.
        Expr::Const(c) if c.is_sign_negative() => write!(f, "(-{:?})", -c),
        Expr::Const(c) => write!(f, "{c:?}"),
        Expr::Var => f.write_char('t'),
        Expr::Unary(UnaryOp::Neg, a) => {
            f.write_char('-')?;
            child(f, a, prec(a) < PREC_NEG)
        }
        Expr::Unary(op, a) => {
            write!(f, "{}(", op.name().unwrap_or_default())?;
            write_expr(f, a)?;
            f.write_char(')')
        }
        Expr::Binary(BinOp::Pow, a, b) => {
            child(f, a, prec(a) <= PREC_POW)?;
            f.write_char('^')?;
            child(f, b, prec(b) < PREC_NEG)
        }
        Expr::Binary(op, a, b) => {
            let p = prec(e);
            child(f, a, prec(a) < p)?;
            write!(f, " {} ", op.symbol())?;
            child(f, b, prec(b) <= p)
        }
        Expr::Piecewise {
            branches,
            otherwise,
        } => {
            f.write_str("piecewise(")?;
            for (c, e) in branches {
                write_cond(f, c)?;
                f.write_str(" : ")?;
                write_expr(f, e)?;
                f.write_str(" ; ")?;
            }
            f.write_str("otherwise : ")?;
            write_expr(f, otherwise)?;
            f.write_char(')')
        }
    }
}

fn cond_prec(c: &Cond) -> u8 {
    match c {
        Cond::Or(..) => 1,
        Cond::And(..) => 2,
        Cond::Cmp(..) => 3,
    }
}

fn cond_child(f: &mut fmt::Formatter<'_>, c: &Cond, paren: bool) -> fmt::Result {
    if paren {
        f.write_char('(')?;
        write_cond(f, c)?;
        f.write_char(')')
    } else {
        write_cond(f, c)
    }
}

pub(super) fn write_cond(f: &mut fmt::Formatter<'_>, c: &Cond) -> fmt::Result {
    match c {
        Cond::Cmp(op, a, b) => {
            write_expr(f, a)?;
            write!(f, " {} ", op.symbol())?;
            write_expr(f, b)
        }
        Cond::And(a, b) | Cond::Or(a, b) => {
            let p = cond_prec(c);
            let word = if p == 1 { "or" } else { "and" };
            cond_child(f, a, cond_prec(a) < p)?;
            write!(f, " {word} ")?;
            cond_child(f, b, cond_prec(b) <= p)
        }
    }
}
