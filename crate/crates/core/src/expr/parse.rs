use thiserror::Error;

use super::{Expr, Registry};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message} at column {column}")]
pub struct ParseError {
    pub message: String,
    pub column: usize,
}

/// Parses a small infix grammar: numbers, identifiers, `+ - * / ^`,
/// parentheses and `sin(..)`/`cos(..)`. Identifiers are looked up in
/// `registry` and must already exist there.
pub fn parse(src: &str, registry: &Registry) -> Result<Expr, ParseError> {
    let mut p = Parser { src, pos: 0, registry };
    let e = p.sum()?;
    p.skip_ws();
    if p.pos < src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    registry: &'a Registry,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> ParseError {
        ParseError { message: msg.to_string(), column: self.pos + 1 }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.product()?;
        loop {
            if self.eat('+') {
                acc = acc + self.product()?;
            } else if self.eat('-') {
                acc = acc - self.product()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc = acc * self.unary()?;
            } else if self.eat('/') {
                acc = acc / self.unary()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let neg = self.eat('-');
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let k: i32 = self.src[start..self.pos].parse().map_err(|_| self.error("expected integer exponent"))?;
        Ok(base.powi(if neg { -k } else { k }))
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.sum()?;
                if !self.eat(')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.' || c == 'e') {
                    self.pos += 1;
                }
                let text = &self.src[start..self.pos];
                if let Ok(n) = text.parse::<i64>() {
                    return Ok(Expr::int(n));
                }
                text.parse::<f64>().map(Expr::real).map_err(|_| ParseError {
                    message: format!("bad number `{text}`"),
                    column: start + 1,
                })
            }
            Some(c) if c.is_alphabetic() || c == '_' => {
                while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
                    self.pos += 1;
                }
                let name = &self.src[start..self.pos];
                if name == "sin" || name == "cos" {
                    if !self.eat('(') {
                        return Err(self.error("expected `(`"));
                    }
                    let arg = self.sum()?;
                    if !self.eat(')') {
                        return Err(self.error("expected `)`"));
                    }
                    return Ok(if name == "sin" { arg.sin() } else { arg.cos() });
                }
                match self.registry.get(name) {
                    Some(s) => Ok(Expr::sym(s)),
                    None => Err(ParseError { message: format!("unknown symbol `{name}`"), column: start + 1 }),
                }
            }
            _ => Err(self.error("expected an expression")),
        }
    }
}
