use std::collections::HashMap;

use super::{Expr, Node, Symbol};

/// Partial derivative of `e` with respect to `s`.
///
/// The result shares subtrees with `e` wherever the calculus rules allow it.
pub fn differentiate(e: &Expr, s: &Symbol) -> Expr {
    Differentiator { wrt: s, memo: HashMap::new() }.run(e)
}

/// Matrix of partial derivatives: entry `(i, j)` is `d es[i] / d ss[j]`.
pub fn jacobian(es: &[Expr], ss: &[Symbol]) -> Vec<Vec<Expr>> {
    // One memo per column so that shared subtrees across rows are
    // differentiated once.
    let mut cols: Vec<Differentiator> =
        ss.iter().map(|s| Differentiator { wrt: s, memo: HashMap::new() }).collect();
    es.iter()
        .map(|e| cols.iter_mut().map(|d| d.run(e)).collect())
        .collect()
}

struct Differentiator<'a> {
    wrt: &'a Symbol,
    memo: HashMap<usize, Expr>,
}

impl Differentiator<'_> {
    fn run(&mut self, e: &Expr) -> Expr {
        if let Some(d) = self.memo.get(&e.id()) {
            return d.clone();
        }
        let d = match e.node() {
            Node::Const(_) => Expr::zero(),
            Node::Sym(s) => {
                if s == self.wrt {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Neg(a) => -self.run(a),
            Node::Sum(terms) => Expr::sum(terms.iter().map(|t| self.run(t)).collect::<Vec<_>>()),
            Node::Product(fs) => {
                let ds: Vec<Expr> = fs.iter().map(|f| self.run(f)).collect();
                let mut terms = Vec::new();
                for (i, di) in ds.iter().enumerate() {
                    if di.is_zero() {
                        continue;
                    }
                    let rest = fs
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, f)| f.clone());
                    terms.push(Expr::product(std::iter::once(di.clone()).chain(rest)));
                }
                Expr::sum(terms)
            }
            Node::Quotient(n, q) => {
                let dn = self.run(n);
                let dq = self.run(q);
                if dq.is_zero() {
                    Expr::quotient(dn, q.clone())
                } else {
                    // (n'q - nq') / q^2
                    let num = &dn * q - n * &dq;
                    Expr::quotient(num, q.powi(2))
                }
            }
            Node::Pow(b, k) => {
                let db = self.run(b);
                if db.is_zero() {
                    Expr::zero()
                } else {
                    Expr::product([Expr::int(*k as i64), b.powi(k - 1), db])
                }
            }
            Node::Sin(a) => {
                let da = self.run(a);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    a.cos() * da
                }
            }
            Node::Cos(a) => {
                let da = self.run(a);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    -(a.sin() * da)
                }
            }
        };
        self.memo.insert(e.id(), d.clone());
        d
    }
}

/// Replaces every bound symbol simultaneously; replacements are not
/// themselves rewritten.
pub fn substitute(e: &Expr, bindings: &HashMap<Symbol, Expr>) -> Expr {
    if bindings.is_empty() {
        return e.clone();
    }
    let mut memo = HashMap::new();
    subst_rec(e, bindings, &mut memo)
}

fn subst_rec(e: &Expr, b: &HashMap<Symbol, Expr>, memo: &mut HashMap<usize, Expr>) -> Expr {
    if let Some(r) = memo.get(&e.id()) {
        return r.clone();
    }
    let r = match e.node() {
        Node::Const(_) => e.clone(),
        Node::Sym(s) => b.get(s).cloned().unwrap_or_else(|| e.clone()),
        Node::Neg(a) => -subst_rec(a, b, memo),
        Node::Sum(ts) => Expr::sum(ts.iter().map(|t| subst_rec(t, b, memo)).collect::<Vec<_>>()),
        Node::Product(fs) => {
            Expr::product(fs.iter().map(|f| subst_rec(f, b, memo)).collect::<Vec<_>>())
        }
        Node::Quotient(n, d) => Expr::quotient(subst_rec(n, b, memo), subst_rec(d, b, memo)),
        Node::Pow(a, k) => subst_rec(a, b, memo).powi(*k),
        Node::Sin(a) => subst_rec(a, b, memo).sin(),
        Node::Cos(a) => subst_rec(a, b, memo).cos(),
    };
    memo.insert(e.id(), r.clone());
    r
}
