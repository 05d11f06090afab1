use indexmap::IndexMap;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Algebra, ObservabilityError, Query};
use crate::expr::{jacobian, EvalError, Evaluator, Expr, Symbol};

/// Values for every extended-state variable and control at which a Jacobian
/// is evaluated. Insertion order follows the extended state.
pub type Point = IndexMap<Symbol, f64>;

/// The first `n` primes.
pub fn primes(n: usize) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::with_capacity(n);
    let mut k = 2u64;
    while out.len() < n {
        if out.iter().take_while(|p| *p * *p <= k).all(|p| k % p != 0) {
            out.push(k);
        }
        k += 1;
    }
    out
}

/// Assigns the k-th prime to the k-th variable, then applies `overrides`.
pub fn prime_point(vars: &[Symbol], overrides: &[(Symbol, f64)]) -> Result<Point, ObservabilityError> {
    let mut point: Point = vars.iter().cloned().zip(primes(vars.len()).into_iter().map(|p| p as f64)).collect();
    for (s, v) in overrides {
        match point.get_mut(s) {
            Some(slot) => *slot = *v,
            None => return Err(ObservabilityError::UnknownVariable(s.name().to_string())),
        }
    }
    Ok(point)
}

/// Singular-value thresholding policy for numeric rank.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TolPolicy {
    /// A singular value counts iff it exceeds `rel * sigma_max * max(rows, cols)`.
    pub rel: f64,
    /// Minimum ratio between the smallest retained and the largest discarded
    /// singular value for a verdict to be called conclusive.
    pub min_gap: f64,
}

impl Default for TolPolicy {
    fn default() -> Self {
        TolPolicy { rel: 1e-8, min_gap: 1e6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericRank {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// `sigma_rank / max(sigma_{rank+1}, round-off floor)`.
    pub gap: f64,
}

/// Numeric rank of a row set after scaling every nonzero row to unit norm.
///
/// Row scaling leaves the rank unchanged but keeps large-magnitude Lie
/// derivatives from swamping the threshold.
pub fn numeric_rank(rows: &[Vec<f64>], ncols: usize, tol: &TolPolicy) -> NumericRank {
    let scaled: Vec<Vec<f64>> = rows
        .iter()
        .filter_map(|r| {
            let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            (n > 0.0).then(|| r.iter().map(|x| x / n).collect())
        })
        .collect();
    if scaled.is_empty() || ncols == 0 {
        return NumericRank { rank: 0, singular_values: vec![], gap: f64::INFINITY };
    }
    let m = DMatrix::from_fn(scaled.len(), ncols, |i, j| scaled[i][j]);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let size = scaled.len().max(ncols) as f64;
    let threshold = tol.rel * sv[0] * size;
    let rank = sv.iter().filter(|s| **s > threshold).count();
    let floor = f64::EPSILON * sv[0] * size;
    let gap = if rank == 0 {
        0.0
    } else {
        let next = sv.get(rank).copied().unwrap_or(0.0).max(floor);
        sv[rank - 1] / next
    };
    NumericRank { rank, singular_values: sv, gap }
}

/// 1-based indices of rows that raise the rank when scanned in order.
pub fn independent_rows(rows: &[Vec<f64>], ncols: usize, tol: &TolPolicy) -> Vec<usize> {
    let mut kept: Vec<Vec<f64>> = Vec::new();
    let mut out = Vec::new();
    let mut rank = 0;
    for (i, r) in rows.iter().enumerate() {
        kept.push(r.clone());
        let nr = numeric_rank(&kept, ncols, tol).rank;
        if nr > rank {
            rank = nr;
            out.push(i + 1);
        } else {
            kept.pop();
        }
    }
    out
}

fn eval_rows<'e>(
    rows: impl IntoIterator<Item = &'e Vec<Expr>>,
    ev: &mut Evaluator<'e, &Point>,
) -> Result<Vec<Vec<f64>>, ObservabilityError> {
    rows.into_iter()
        .map(|row| row.iter().map(|e| ev.eval(e)).collect::<Result<Vec<f64>, _>>())
        .collect::<Result<_, _>>()
        .map_err(|e| match e {
            EvalError::DivisionByZero(what) => ObservabilityError::SingularEvaluation(what),
            EvalError::UnboundSymbol(s) => ObservabilityError::UnboundSymbol(s),
        })
}

/// Numeric Jacobian of the algebra at `point`.
pub fn numeric_jacobian(algebra: &Algebra, point: &Point) -> Result<Vec<Vec<f64>>, ObservabilityError> {
    let mut ev = Evaluator::new(point);
    eval_rows(algebra.jacobian(), &mut ev)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryVerdict {
    pub label: String,
    pub expr: String,
    pub augmented_rank: usize,
    pub observable: bool,
}

/// Outcome of a rank test at one operating point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub rank: usize,
    pub dim: usize,
    pub fully_observable: bool,
    pub queries: Vec<QueryVerdict>,
    pub point: IndexMap<String, f64>,
    pub singular_values: Vec<f64>,
    pub gap: f64,
    pub conclusive: bool,
}

impl RankReport {
    pub fn query(&self, label: &str) -> Option<&QueryVerdict> {
        self.queries.iter().find(|q| q.label == label)
    }
}

/// Rank of the algebra's Jacobian at `point`, plus an augmentation test for
/// every query.
pub fn rank_at(
    algebra: &Algebra,
    point: &Point,
    queries: &[Query],
    tol: &TolPolicy,
) -> Result<RankReport, ObservabilityError> {
    let dim = algebra.vars.len();
    let query_rows: Vec<Vec<Expr>> =
        queries.iter().map(|q| jacobian(std::slice::from_ref(&q.expr), &algebra.vars).remove(0)).collect();
    let mut ev = Evaluator::new(point);
    let rows = eval_rows(algebra.jacobian(), &mut ev)?;
    let qrows = eval_rows(&query_rows, &mut ev)?;
    let base = numeric_rank(&rows, dim, tol);
    let mut conclusive = base.gap >= tol.min_gap;
    let mut verdicts = Vec::new();
    for (q, qr) in queries.iter().zip(qrows) {
        let mut aug = rows.clone();
        aug.push(qr);
        let r = numeric_rank(&aug, dim, tol);
        conclusive &= r.gap >= tol.min_gap;
        verdicts.push(QueryVerdict {
            label: q.label.clone(),
            expr: q.expr.to_string(),
            augmented_rank: r.rank,
            observable: r.rank == base.rank,
        });
    }
    Ok(RankReport {
        rank: base.rank,
        dim,
        fully_observable: base.rank == dim,
        queries: verdicts,
        point: point.iter().map(|(s, v)| (s.name().to_string(), *v)).collect(),
        singular_values: base.singular_values,
        gap: base.gap,
        conclusive,
    })
}

/// True iff appending `query` leaves the Jacobian rank unchanged.
pub fn state_observable(
    algebra: &Algebra,
    point: &Point,
    query: &Query,
    tol: &TolPolicy,
) -> Result<bool, ObservabilityError> {
    let r = rank_at(algebra, point, std::slice::from_ref(query), tol)?;
    Ok(r.queries[0].observable)
}

/// Rank tests over many operating points, evaluated in parallel and returned
/// in input order. Failures are kept per point.
pub fn observability_map(
    algebra: &Algebra,
    points: &[Point],
    queries: &[Query],
    tol: &TolPolicy,
) -> Vec<Result<RankReport, ObservabilityError>> {
    // Build the shared symbolic Jacobian before fanning out.
    algebra.jacobian();
    points.par_iter().map(|p| rank_at(algebra, p, queries, tol)).collect()
}
