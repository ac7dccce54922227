use std::f64::consts::PI;

use thiserror::Error;

use super::{BinOp, CmpOp, Cond, Expr, UnaryOp};

#[derive(Clone, Debug, PartialEq, Error)]
#[error("{kind} at byte {pos}")]
pub struct ParseError {
    pub pos: usize,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("empty expression")]
    Empty,
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("invalid number literal {0:?}")]
    InvalidNumber(String),
    #[error("expected {expected}, found {found}")]
    Unexpected {
        expected: &'static str,
        found: String,
    },
    #[error("unknown identifier {0:?}")]
    UnknownIdentifier(String),
    #[error("piecewise expression without a terminal `otherwise` branch")]
    MissingOtherwise,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Colon,
    Semi,
    Cmp(CmpOp),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier {s:?}"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Cmp(op) => format!("`{}`", op.symbol()),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b':' => Tok::Colon,
            b';' => Tok::Semi,
            b'<' | b'>' => {
                let eq = bytes.get(i + 1) == Some(&b'=');
                if eq {
                    i += 1;
                }
                Tok::Cmp(match (c, eq) {
                    (b'<', false) => CmpOp::Lt,
                    (b'<', true) => CmpOp::Le,
                    (_, false) => CmpOp::Gt,
                    (_, true) => CmpOp::Ge,
                })
            }
            b'0'..=b'9' | b'.' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let lit = &text[i..j];
                let value: f64 = lit.parse().map_err(|_| ParseError {
                    pos: start,
                    kind: ParseErrorKind::InvalidNumber(lit.to_string()),
                })?;
                if !value.is_finite() {
                    return Err(ParseError {
                        pos: start,
                        kind: ParseErrorKind::InvalidNumber(lit.to_string()),
                    });
                }
                i = j;
                out.push((Tok::Num(value), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                let ident = text[i..j].to_string();
                i = j;
                out.push((Tok::Ident(ident), start));
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    pos: start,
                    kind: ParseErrorKind::UnexpectedChar(ch),
                });
            }
        };
        i += 1;
        out.push((tok, start));
    }
    out.push((Tok::Eof, text.len()));
    Ok(out)
}

/// Parse an expression in `t`.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError {
            pos: 0,
            kind: ParseErrorKind::Empty,
        });
    }
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    p.expect(Tok::Eof, "end of input")?;
    Ok(e)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        ParseError {
            pos: self.offset(),
            kind: ParseErrorKind::Unexpected {
                expected,
                found: self.peek().describe(),
            },
        }
    }

    fn expect(&mut self, tok: Tok, expected: &'static str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let arg = self.unary()?;
            return Ok(Expr::unary(UnaryOp::Neg, arg));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::binary(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "t" => Ok(Expr::Var),
                    "pi" => Ok(Expr::Const(PI)),
                    "piecewise" => self.piecewise_body(),
                    _ => match super::UnaryOp::from_name(&name) {
                        Some(op) => {
                            self.expect(Tok::LParen, "`(` after function name")?;
                            let arg = self.expr()?;
                            self.expect(Tok::RParen, "`)`")?;
                            Ok(Expr::unary(op, arg))
                        }
                        None => Err(ParseError {
                            pos: at,
                            kind: ParseErrorKind::UnknownIdentifier(name),
                        }),
                    },
                }
            }
            _ => Err(self.unexpected("a number, `t`, a function or `(`")),
        }
    }

    fn piecewise_body(&mut self) -> Result<Expr, ParseError> {
        self.expect(Tok::LParen, "`(` after piecewise")?;
        let mut branches = Vec::new();
        loop {
            match self.peek() {
                Tok::Ident(s) if s == "otherwise" => {
                    self.bump();
                    self.expect(Tok::Colon, "`:` after otherwise")?;
                    let e = self.expr()?;
                    self.expect(Tok::RParen, "`)` closing piecewise")?;
                    return Ok(Expr::Piecewise {
                        branches,
                        otherwise: Box::new(e),
                    });
                }
                Tok::RParen | Tok::Eof => {
                    return Err(ParseError {
                        pos: self.offset(),
                        kind: ParseErrorKind::MissingOtherwise,
                    })
                }
                _ => {}
            }
            let cond = self.cond()?;
            self.expect(Tok::Colon, "`:` after branch condition")?;
            let e = self.expr()?;
            branches.push((cond, e));
            match self.peek() {
                Tok::Semi => {
                    self.bump();
                }
                Tok::RParen => {
                    return Err(ParseError {
                        pos: self.offset(),
                        kind: ParseErrorKind::MissingOtherwise,
                    })
                }
                _ => return Err(self.unexpected("`;` between piecewise branches")),
            }
        }
    }

    fn keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn cond(&mut self) -> Result<Cond, ParseError> {
        let mut lhs = self.conj()?;
        while self.keyword("or") {
            self.bump();
            let rhs = self.conj()?;
            lhs = Cond::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<Cond, ParseError> {
        let mut lhs = self.cond_atom()?;
        while self.keyword("and") {
            self.bump();
            let rhs = self.cond_atom()?;
            lhs = Cond::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cond_atom(&mut self) -> Result<Cond, ParseError> {
        // `(` may open either a grouped condition or an arithmetic operand.
        if *self.peek() == Tok::LParen {
            let save = self.pos;
            self.bump();
            if let Ok(c) = self.cond() {
                if *self.peek() == Tok::RParen {
                    self.bump();
                    let continues_arith = matches!(
                        self.peek(),
                        Tok::Plus | Tok::Minus | Tok::Star | Tok::Slash | Tok::Caret | Tok::Cmp(_)
                    );
                    if !continues_arith {
                        return Ok(c);
                    }
                }
            }
            self.pos = save;
        }
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Cmp(op) => *op,
            _ => return Err(self.unexpected("a comparison operator")),
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(Cond::cmp(op, lhs, rhs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_delay_root_is_subtraction() {
        let e = parse("floor(t) - 0.5^floor(t) * (1 - frac(t))").unwrap();
        match e {
            Expr::Binary(BinOp::Sub, lhs, rhs) => {
                assert_eq!(*lhs, Expr::unary(UnaryOp::Floor, Expr::Var));
                assert!(matches!(*rhs, Expr::Binary(BinOp::Mul, _, _)));
            }
            other => panic!("unexpected root {other:?}"),
        }
    }

    #[test]
    fn bare_variable() {
        assert_eq!(parse("t").unwrap(), Expr::Var);
    }

    #[test]
    fn three_branch_piecewise() {
        let e = parse("piecewise(frac(t) < 0.5 : t ; floor(t) <= 5 : t - 1 ; otherwise : t - 0.5)")
            .unwrap();
        match e {
            Expr::Piecewise { branches, .. } => assert_eq!(branches.len(), 2),
            other => panic!("not piecewise: {other:?}"),
        }
    }

    #[test]
    fn precedence() {
        // -2^2 == -(2^2)
        assert_eq!(
            parse("-2^2").unwrap(),
            Expr::unary(
                UnaryOp::Neg,
                Expr::binary(BinOp::Pow, Expr::Const(2.0), Expr::Const(2.0))
            )
        );
        // -a*b == (-a)*b
        assert!(matches!(
            parse("-t*2").unwrap(),
            Expr::Binary(BinOp::Mul, _, _)
        ));
        // right operand of ^ may carry a sign
        assert!(matches!(
            parse("2^-t").unwrap(),
            Expr::Binary(BinOp::Pow, _, _)
        ));
        // 1 - 2 - 3 is left associative
        let e = parse("1 - 2 - 3").unwrap();
        assert_eq!(
            e,
            Expr::binary(
                BinOp::Sub,
                Expr::binary(BinOp::Sub, Expr::Const(1.0), Expr::Const(2.0)),
                Expr::Const(3.0)
            )
        );
    }

    #[test]
    fn exponent_literals_and_pi() {
        assert_eq!(parse("1e-3").unwrap(), Expr::Const(1e-3));
        assert_eq!(parse("2.5E+2").unwrap(), Expr::Const(250.0));
        assert_eq!(parse("pi").unwrap(), Expr::Const(PI));
    }

    #[test]
    fn grouped_conditions() {
        let e = parse("piecewise((t < 1 or t > 2) and t >= 0 : 1 ; otherwise : 0)").unwrap();
        let Expr::Piecewise { branches, .. } = e else {
            panic!()
        };
        assert!(matches!(branches[0].0, Cond::And(_, _)));
        // a parenthesised operand is not a grouped condition
        assert!(parse("piecewise((t) < 1 : 1 ; otherwise : 0)").is_ok());
        assert!(parse("piecewise((t + 1) * 2 < 1 : 1 ; otherwise : 0)").is_ok());
    }

    #[test]
    fn errors_carry_position() {
        let err = parse("t + * 2").unwrap_err();
        assert_eq!(err.pos, 4);
        let err = parse("foo(t)").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier("foo".into()));
        assert_eq!(err.pos, 0);
        let err = parse("piecewise(t < 1 : 0)").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::MissingOtherwise);
        let err = parse("piecewise(t < 1 : 0 ;)").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::MissingOtherwise);
        assert_eq!(parse("  ").unwrap_err().kind, ParseErrorKind::Empty);
        assert!(matches!(
            parse("t # 2").unwrap_err().kind,
            ParseErrorKind::UnexpectedChar('#')
        ));
        assert!(parse("(t").is_err());
        assert!(parse("t)").is_err());
        assert!(parse("1.2.3").is_err());
    }
}
