//! Expression grammar for polynomials.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary ('*' unary)*
//! unary  := ('-' | '+') unary | power
//! power  := atom ('^' integer)?
//! atom   := number | 'x' index | 'y' index | '(' expr ')'
//! ```
//!
//! Variables are 1-based (`x1`, `y2`). Numbers accept decimal and exponent notation.

use crate::error::{Error, Result};
use crate::polyalg::Polynomial;

pub(crate) fn parse_polynomial(text: &str, n: usize, p: usize) -> Result<Polynomial> {
    let mut parser = Parser {
        src: text.as_bytes(),
        pos: 0,
        n,
        p,
    };
    let f = parser.expr()?;
    parser.skip_ws();
    if parser.pos != parser.src.len() {
        return Err(parser.error("unexpected trailing input"));
    }
    Ok(f)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    n: usize,
    p: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Syntax {
            position: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Polynomial> {
        let mut acc = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = if c == b'+' { acc.add(&rhs)? } else { acc.sub(&rhs)? };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Polynomial> {
        let mut acc = self.unary()?;
        while let Some(b'*') = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            acc = acc.mul(&rhs)?;
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Polynomial> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(self.unary()?.scale(-1.0))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Polynomial> {
        let base = self.atom()?;
        if let Some(b'^') = self.peek() {
            self.pos += 1;
            self.skip_ws();
            let e = self.integer()?;
            return Ok(base.pow(e as u32));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<usize> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected integer"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Syntax {
                position: start,
                message: "integer out of range".into(),
            })
    }

    fn atom(&mut self) -> Result<Polynomial> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c @ (b'x' | b'y')) => {
                let start = self.pos;
                self.pos += 1;
                let k = self.integer()?;
                let (limit, kind) = if c == b'x' { (self.n, "x") } else { (self.p, "y") };
                if k == 0 || k > limit {
                    return Err(Error::UnknownVariable {
                        name: format!("{kind}{k}"),
                        position: start,
                    });
                }
                Ok(if c == b'x' {
                    Polynomial::x(self.n, self.p, k - 1)
                } else {
                    Polynomial::y(self.n, self.p, k - 1)
                })
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Polynomial> {
        let start = self.pos;
        let s = self.src;
        let digits = |pos: &mut usize| {
            while *pos < s.len() && s[*pos].is_ascii_digit() {
                *pos += 1;
            }
        };
        digits(&mut self.pos);
        if self.pos < s.len() && s[self.pos] == b'.' {
            self.pos += 1;
            digits(&mut self.pos);
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(&mut self.pos);
            if exp_start == self.pos {
                self.pos = mark;
            }
        }
        let value: f64 = std::str::from_utf8(&s[start..self.pos])
            .ok()
            .and_then(|t| t.parse().ok())
            .ok_or(Error::Syntax {
                position: start,
                message: "malformed number".into(),
            })?;
        Ok(Polynomial::constant(self.n, self.p, value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::MultiIndex;

    #[test]
    fn parses_terms() {
        let f = parse_polynomial("1 - x1^2 + y1^2", 1, 1).unwrap();
        assert_eq!(f.num_terms(), 3);
        assert_eq!(f.coefficient(&MultiIndex::new(vec![0, 0])), 1.0);
        assert_eq!(f.coefficient(&MultiIndex::new(vec![2, 0])), -1.0);
        assert_eq!(f.coefficient(&MultiIndex::new(vec![0, 2])), 1.0);
    }

    #[test]
    fn zero_and_cancellation() {
        assert!(parse_polynomial("0", 1, 1).unwrap().is_zero());
        assert!(parse_polynomial("y1*x1 - x1*y1", 1, 1).unwrap().is_zero());
    }

    #[test]
    fn numbers_and_nesting() {
        let f = parse_polynomial("-2.5e-1*(x1 + 2)^2", 1, 0).unwrap();
        assert_eq!(f.eval(&[1.0]).unwrap(), -2.25);
        let g = parse_polynomial("--x1", 1, 0).unwrap();
        assert_eq!(g.eval(&[3.0]).unwrap(), 3.0);
    }

    #[test]
    fn errors_carry_positions() {
        match parse_polynomial("x1 + * 2", 1, 0) {
            Err(Error::Syntax { position, .. }) => assert_eq!(position, 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_polynomial("x2", 1, 1),
            Err(Error::UnknownVariable { .. })
        ));
        assert!(matches!(
            parse_polynomial("y2", 1, 1),
            Err(Error::UnknownVariable { .. })
        ));
        assert!(parse_polynomial("(x1", 1, 0).is_err());
        assert!(parse_polynomial("x1 x1", 1, 0).is_err());
    }
}
