use std::collections::HashMap;

use super::{Expr, Node};

/// Conservative value-preserving rewrite.
///
/// Flattens nested sums and products, folds constants, drops additive zeros
/// and multiplicative ones, annihilates products containing zero, and
/// collapses double negation. No trigonometric identities and no
/// polynomial cancellation are attempted.
pub fn simplify(e: &Expr) -> Expr {
    let mut memo = HashMap::new();
    rec(e, &mut memo)
}

fn rec(e: &Expr, memo: &mut HashMap<usize, Expr>) -> Expr {
    if let Some(r) = memo.get(&e.id()) {
        return r.clone();
    }
    let r = match e.node() {
        Node::Const(_) | Node::Sym(_) => e.clone(),
        Node::Neg(a) => -rec(a, memo),
        Node::Sum(ts) => Expr::sum(ts.iter().map(|t| rec(t, memo)).collect::<Vec<_>>()),
        Node::Product(fs) => Expr::product(fs.iter().map(|f| rec(f, memo)).collect::<Vec<_>>()),
        Node::Quotient(n, d) => {
            let n = rec(n, memo);
            let d = rec(d, memo);
            match d.node() {
                // a / (b / c) = a * c / b
                Node::Quotient(dn, dd) => Expr::quotient(n * dd, dn.clone()),
                _ => Expr::quotient(n, d),
            }
        }
        Node::Pow(b, k) => rec(b, memo).powi(*k),
        Node::Sin(a) => rec(a, memo).sin(),
        Node::Cos(a) => rec(a, memo).cos(),
    };
    memo.insert(e.id(), r.clone());
    r
}
