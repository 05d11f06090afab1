use std::fmt;

use super::{Expr, Node};

// Binding strength used to decide where parentheses are needed.
const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const UNARY: u8 = 3;
const POWER: u8 = 4;
const ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e.node() {
        Node::Const(c) if c.is_negative() => UNARY,
        Node::Const(super::Constant::Rational(r)) if *r.denom() != 1 => PRODUCT,
        Node::Const(_) | Node::Sym(_) | Node::Sin(_) | Node::Cos(_) => ATOM,
        Node::Sum(_) => SUM,
        Node::Product(_) | Node::Quotient(_, _) => PRODUCT,
        Node::Neg(_) => UNARY,
        Node::Pow(_, _) => POWER,
    }
}

fn child(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if precedence(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => write!(f, "{c}"),
            Node::Sym(s) => write!(f, "{s}"),
            Node::Neg(a) => {
                f.write_str("-")?;
                child(f, a, PRODUCT)
            }
            Node::Sum(ts) => {
                for (i, t) in ts.iter().enumerate() {
                    if i == 0 {
                        child(f, t, SUM)?;
                        continue;
                    }
                    match t.node() {
                        Node::Neg(inner) => {
                            f.write_str(" - ")?;
                            child(f, inner, PRODUCT)?;
                        }
                        Node::Const(c) if c.is_negative() => write!(f, " - {}", c.neg())?,
                        _ => {
                            f.write_str(" + ")?;
                            child(f, t, SUM + 1)?;
                        }
                    }
                }
                Ok(())
            }
            Node::Product(fs) => {
                for (i, x) in fs.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    child(f, x, PRODUCT + 1)?;
                }
                Ok(())
            }
            Node::Quotient(n, d) => {
                child(f, n, PRODUCT)?;
                f.write_str("/")?;
                child(f, d, PRODUCT + 1)
            }
            Node::Pow(b, k) => {
                child(f, b, ATOM)?;
                if *k < 0 {
                    write!(f, "^({k})")
                } else {
                    write!(f, "^{k}")
                }
            }
            Node::Sin(a) => write!(f, "sin({a})"),
            Node::Cos(a) => write!(f, "cos({a})"),
        }
    }
}
