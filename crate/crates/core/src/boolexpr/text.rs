//! Infix text form: `~` not, `&` and, `^` xor, `|` or, variables `x<n>`,
//! constants `0`/`1`. Compound operands are always parenthesized on output.

use std::fmt;

use thiserror::Error;

use super::BoolExpr;

pub(super) fn write_expr(e: &BoolExpr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        BoolExpr::Const(b) => write!(f, "{}", u8::from(*b)),
        BoolExpr::Var(v) => write!(f, "x{v}"),
        BoolExpr::Not(c) => {
            f.write_str("~")?;
            write_operand(c, f)
        }
        BoolExpr::And(cs) => write_join(cs, " & ", f),
        BoolExpr::Or(cs) => write_join(cs, " | ", f),
        BoolExpr::Xor(cs) => write_join(cs, " ^ ", f),
        BoolExpr::Xnor(cs) => {
            f.write_str("~(")?;
            write_join(cs, " ^ ", f)?;
            f.write_str(")")
        }
    }
}

fn write_operand(e: &BoolExpr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        BoolExpr::Const(_) | BoolExpr::Var(_) | BoolExpr::Not(_) | BoolExpr::Xnor(_) => {
            write_expr(e, f)
        }
        _ => {
            f.write_str("(")?;
            write_expr(e, f)?;
            f.write_str(")")
        }
    }
}

fn write_join(cs: &[BoolExpr], sep: &str, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    for (i, c) in cs.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        write_operand(c, f)?;
    }
    Ok(())
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExprParseError {
    #[error("unexpected character `{found}` at offset {offset}")]
    Unexpected { found: char, offset: usize },
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("bad variable at offset {offset}")]
    BadVariable { offset: usize },
}

/// Parses the infix form produced by `Display`, rebuilding through the
/// canonicalizing constructors.
pub fn parse_expr(text: &str) -> Result<BoolExpr, ExprParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let e = p.or()?;
    p.skip_ws();
    match p.peek() {
        None => Ok(e),
        Some(c) => Err(ExprParseError::Unexpected {
            found: c as char,
            offset: p.pos,
        }),
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn or(&mut self) -> Result<BoolExpr, ExprParseError> {
        let mut terms = vec![self.xor()?];
        while self.eat(b'|') {
            terms.push(self.xor()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { BoolExpr::or(terms) })
    }

    fn xor(&mut self) -> Result<BoolExpr, ExprParseError> {
        let mut terms = vec![self.and()?];
        while self.eat(b'^') {
            terms.push(self.and()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { BoolExpr::xor(terms) })
    }

    fn and(&mut self) -> Result<BoolExpr, ExprParseError> {
        let mut terms = vec![self.unary()?];
        while self.eat(b'&') {
            terms.push(self.unary()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { BoolExpr::and(terms) })
    }

    fn unary(&mut self) -> Result<BoolExpr, ExprParseError> {
        if self.eat(b'~') || self.eat(b'!') {
            return Ok(BoolExpr::not(self.unary()?));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<BoolExpr, ExprParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            None => Err(ExprParseError::UnexpectedEnd),
            Some(b'(') => {
                self.pos += 1;
                let e = self.or()?;
                if !self.eat(b')') {
                    return match self.peek() {
                        None => Err(ExprParseError::UnexpectedEnd),
                        Some(c) => Err(ExprParseError::Unexpected {
                            found: c as char,
                            offset: self.pos,
                        }),
                    };
                }
                Ok(e)
            }
            Some(b'0') => {
                self.pos += 1;
                Ok(BoolExpr::FALSE)
            }
            Some(b'1') => {
                self.pos += 1;
                Ok(BoolExpr::TRUE)
            }
            Some(b'x') => {
                self.pos += 1;
                let digits_start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
                let digits = std::str::from_utf8(&self.src[digits_start..self.pos]).unwrap();
                match digits.parse::<u32>() {
                    Ok(v) if v >= 1 => Ok(BoolExpr::Var(v)),
                    _ => Err(ExprParseError::BadVariable { offset: start }),
                }
            }
            Some(c) => Err(ExprParseError::Unexpected {
                found: c as char,
                offset: start,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn printing() {
        let e = BoolExpr::or([
            BoolExpr::and([BoolExpr::var(9), BoolExpr::var(13)]),
            BoolExpr::and([BoolExpr::not(BoolExpr::var(9)), BoolExpr::var(14)]),
        ]);
        assert_eq!(e.to_string(), "(x9 & x13) | (x14 & ~x9)");
        assert_eq!(BoolExpr::xnor([BoolExpr::var(1), BoolExpr::var(2)]).to_string(), "~(x1 ^ x2)");
        assert_eq!(
            BoolExpr::not(BoolExpr::and([BoolExpr::var(1), BoolExpr::var(2)])).to_string(),
            "~(x1 & x2)"
        );
        assert_eq!(BoolExpr::TRUE.to_string(), "1");
    }

    #[test]
    fn precedence_without_parens() {
        let e = parse_expr("x1 | x2 & ~x3 ^ x4").unwrap();
        let expected = BoolExpr::or([
            BoolExpr::var(1),
            BoolExpr::xor([
                BoolExpr::and([BoolExpr::var(2), BoolExpr::not(BoolExpr::var(3))]),
                BoolExpr::var(4),
            ]),
        ]);
        assert_eq!(e, expected);
    }

    #[test]
    fn errors() {
        assert_eq!(parse_expr(""), Err(ExprParseError::UnexpectedEnd));
        assert_eq!(parse_expr("(x1"), Err(ExprParseError::UnexpectedEnd));
        assert_eq!(parse_expr("x0"), Err(ExprParseError::BadVariable { offset: 0 }));
        assert!(matches!(parse_expr("x1 x2"), Err(ExprParseError::Unexpected { .. })));
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in crate::boolexpr::tests::arb_expr(30)) {
            prop_assert_eq!(parse_expr(&e.to_string()).unwrap(), e);
        }
    }
}
