use std::collections::HashMap;

use super::{EvalError, Expr, Node, Symbol};

#[derive(Clone, Debug)]
enum Op {
    Const(f64),
    Input(usize),
    Neg(usize),
    Sum(Vec<usize>),
    Product(Vec<usize>),
    Quotient(usize, usize),
    Pow(usize, i32),
    Sin(usize),
    Cos(usize),
}

/// A list of expressions flattened into straight-line code over a fixed
/// input ordering, for evaluating the same expressions at many points.
#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    outputs: Vec<usize>,
    inputs: usize,
    /// Printed denominators, for error messages.
    labels: HashMap<usize, String>,
}

impl Tape {
    /// Fails with [`EvalError::UnboundSymbol`] if an expression uses a symbol
    /// not in `inputs`.
    pub fn compile(exprs: &[Expr], inputs: &[Symbol]) -> Result<Tape, EvalError> {
        let index: HashMap<&Symbol, usize> = inputs.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let mut tape = Tape { ops: Vec::new(), outputs: Vec::new(), inputs: inputs.len(), labels: HashMap::new() };
        let mut slots: HashMap<usize, usize> = HashMap::new();
        for e in exprs {
            let slot = tape.emit(e, &index, &mut slots)?;
            tape.outputs.push(slot);
        }
        Ok(tape)
    }

    fn emit(
        &mut self,
        e: &Expr,
        index: &HashMap<&Symbol, usize>,
        slots: &mut HashMap<usize, usize>,
    ) -> Result<usize, EvalError> {
        if let Some(s) = slots.get(&e.id()) {
            return Ok(*s);
        }
        let mut one = |this: &mut Self, a: &Expr| this.emit(a, index, slots);
        let op = match e.node() {
            Node::Const(c) => Op::Const(c.value()),
            Node::Sym(s) => Op::Input(*index.get(s).ok_or_else(|| EvalError::UnboundSymbol(s.name().to_string()))?),
            Node::Neg(a) => Op::Neg(one(self, a)?),
            Node::Sum(ts) => Op::Sum(ts.iter().map(|t| one(self, t)).collect::<Result<_, _>>()?),
            Node::Product(fs) => Op::Product(fs.iter().map(|f| one(self, f)).collect::<Result<_, _>>()?),
            Node::Quotient(n, d) => {
                let (n, ds) = (one(self, n)?, one(self, d)?);
                self.labels.entry(ds).or_insert_with(|| d.to_string());
                Op::Quotient(n, ds)
            }
            Node::Pow(b, k) => {
                let bs = one(self, b)?;
                if *k < 0 {
                    self.labels.entry(bs).or_insert_with(|| b.to_string());
                }
                Op::Pow(bs, *k)
            }
            Node::Sin(a) => Op::Sin(one(self, a)?),
            Node::Cos(a) => Op::Cos(one(self, a)?),
        };
        self.ops.push(op);
        let slot = self.ops.len() - 1;
        slots.insert(e.id(), slot);
        Ok(slot)
    }

    pub fn outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Evaluates every expression at `x`, writing into `out`.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        assert_eq!(x.len(), self.inputs, "tape input length");
        let mut v = vec![0.0; self.ops.len()];
        for (i, op) in self.ops.iter().enumerate() {
            v[i] = match op {
                Op::Const(c) => *c,
                Op::Input(k) => x[*k],
                Op::Neg(a) => -v[*a],
                Op::Sum(ts) => ts.iter().map(|t| v[*t]).sum(),
                Op::Product(fs) => fs.iter().map(|f| v[*f]).product(),
                Op::Quotient(n, d) => {
                    if v[*d] == 0.0 {
                        return Err(EvalError::DivisionByZero(self.labels[d].clone()));
                    }
                    v[*n] / v[*d]
                }
                Op::Pow(b, k) => {
                    if *k < 0 && v[*b] == 0.0 {
                        return Err(EvalError::DivisionByZero(self.labels[b].clone()));
                    }
                    v[*b].powi(*k)
                }
                Op::Sin(a) => v[*a].sin(),
                Op::Cos(a) => v[*a].cos(),
            };
        }
        for (o, s) in out.iter_mut().zip(&self.outputs) {
            *o = v[*s];
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut out = vec![0.0; self.outputs.len()];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }
}
