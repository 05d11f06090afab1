//! Test-only reference implementations shared by the integration suites.
#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use windobs::estimator::{sigma_points, weighted_mean, wrap_angle, FilterModel, FilterState, Ukf, UkfConfig, Weights};
use windobs::expr::{evaluate, Expr, Node, Symbol};
use windobs::models::{build_dynamics, build_sensors, SensorConfig, SensorKind, StateConfig};
use windobs::simulator::{
    integrate, measure, BodyParams, BodyState, ControlSchedule, NoiseSpec, Signal, Trajectory, WindSignal,
};

pub fn measured(mut tr: Trajectory, drag: bool) -> Trajectory {
    let m = build_dynamics(&StateConfig { drag, ..Default::default() }).unwrap();
    let h = build_sensors(&SensorConfig::new(SensorKind::CalibratedVision), &m).unwrap();
    measure(&mut tr, &m, &h, &NoiseSpec::default()).unwrap();
    tr
}

pub fn prior(mean: &[f64], std: f64) -> FilterState {
    FilterState {
        t: 0.0,
        mean: DVector::from_column_slice(mean),
        sqrt_cov: DMatrix::from_diagonal_element(mean.len(), mean.len(), std),
        repairs: 0,
    }
}

/// Plain (covariance-form) UKF with the same sigma-point scheme, used only
/// as a reference for the square-root filter.
pub struct PlainUkf<'a> {
    model: &'a FilterModel,
    w: Weights,
    q: DMatrix<f64>,
    r: f64,
    dt: f64,
}

impl PlainUkf<'_> {
    fn points(&self, x: &DVector<f64>, p: &DMatrix<f64>) -> DMatrix<f64> {
        let l = p.clone().cholesky().expect("positive definite").l();
        sigma_points(x, &l, &self.w)
    }

    fn weighted_cov(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut c = a.column(0) * b.column(0).transpose() * self.w.cov0;
        for j in 1..a.ncols() {
            c += a.column(j) * b.column(j).transpose() * self.w.other;
        }
        c
    }

    fn predict(&self, x: &DVector<f64>, p: &DMatrix<f64>, u: [f64; 3]) -> (DVector<f64>, DMatrix<f64>) {
        let chi = self.points(x, p);
        let mut prop = chi.clone();
        for j in 0..chi.ncols() {
            let col: Vec<f64> = chi.column(j).iter().copied().collect();
            prop.set_column(j, &DVector::from_vec(self.model.propagate(&col, u, self.dt).unwrap()));
        }
        let mean = weighted_mean(&prop, &self.w);
        let dev = DMatrix::from_fn(prop.nrows(), prop.ncols(), |i, j| prop[(i, j)] - mean[i]);
        (mean, self.weighted_cov(&dev, &dev) + &self.q)
    }

    fn update(&self, x: &DVector<f64>, p: &DMatrix<f64>, z: &[f64], u: [f64; 3]) -> (DVector<f64>, DMatrix<f64>) {
        let chi = self.points(x, p);
        let m = z.len();
        let mut y = DMatrix::zeros(m, chi.ncols());
        for j in 0..chi.ncols() {
            let col: Vec<f64> = chi.column(j).iter().copied().collect();
            for k in 0..m {
                y[(k, j)] = self.model.measure(k, &col, u).unwrap();
            }
        }
        let y0 = y.column(0).into_owned();
        let offsets = DMatrix::from_fn(m, y.ncols(), |k, j| y[(k, j)] - y0[k]);
        let y_mean = &y0 + weighted_mean(&offsets, &self.w);
        let ydev = DMatrix::from_fn(m, y.ncols(), |k, j| y[(k, j)] - y_mean[k]);
        let xdev = DMatrix::from_fn(chi.nrows(), chi.ncols(), |i, j| chi[(i, j)] - x[i]);
        let pyy = self.weighted_cov(&ydev, &ydev) + DMatrix::identity(m, m) * self.r;
        let pxy = self.weighted_cov(&xdev, &ydev);
        let gain = &pxy * pyy.clone().try_inverse().unwrap();
        let innov = DVector::from_fn(m, |k, _| if k == 0 { wrap_angle(z[k] - y_mean[k]) } else { z[k] - y_mean[k] });
        (x + &gain * innov, p - &gain * pyy * gain.transpose())
    }
}

pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Largest relative Frobenius gap between the square-root covariance and
/// the plain oracle over 50 predict/update steps.
pub fn oracle_gap(alpha: f64) -> f64 {
    let x0 = BodyState::new(1.0, 0.2, 0.3, 0.1);
    let sched = ControlSchedule::Constant { u: [1.0, 0.3, 0.4] };
    let params = BodyParams { drag: true, ..Default::default() };
    let tr = integrate(&params, &sched, &WindSignal::constant(0.6, 1.2), 0.01, 0.5, x0).unwrap();
    let tr = measured(tr, true);
    let model = FilterModel::calibrated(true);
    let cfg = UkfConfig { alpha, r: vec![1e-4], q: vec![1e-6], ..Default::default() };
    let ukf = Ukf::new(model.clone(), cfg.clone()).unwrap();
    let oracle = PlainUkf {
        model: &model,
        w: Weights::new(6, &cfg),
        q: DMatrix::identity(6, 6) * 1e-6,
        r: 1e-4,
        dt: cfg.dt,
    };

    let mut fs = prior(&[1.1, 0.1, 0.25, 0.15, 0.4, 1.6], 0.2);
    let mut x = fs.mean.clone();
    let mut p = fs.covariance();
    let mut worst: f64 = 0.0;
    for k in 1..=50 {
        let prev = &tr.samples[k - 1];
        let s = &tr.samples[k];
        fs = ukf.predict(&fs, prev.controls).unwrap();
        (x, p) = oracle.predict(&x, &p, prev.controls);
        worst = worst.max(rel_frobenius(&fs.covariance(), &p));
        let z: Vec<f64> = s.noisy.iter().map(|v| v.unwrap()).collect();
        fs = ukf.update(&fs, &s.noisy, s.controls).unwrap().0;
        (x, p) = oracle.update(&x, &p, &z, s.controls);
        worst = worst.max(rel_frobenius(&fs.covariance(), &p));
        worst = worst.max((&fs.mean - &x).norm() / x.norm());
    }
    assert_eq!(fs.repairs, 0);
    worst
}


fn terminal(p: &BodyParams, s: &ControlSchedule, wind: &WindSignal, dt: f64, x0: BodyState) -> [f64; 6] {
    let tr = integrate(p, s, wind, dt, 2.0, x0).unwrap();
    let last = tr.samples.last().unwrap();
    [last.state.v_par, last.state.v_perp, last.state.phi, last.state.phi_dot, last.position[0], last.position[1]]
}

fn dist(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Ratio of terminal errors at dt = 0.2 and dt = 0.1 against a dt / 100
/// reference run, with drag, motor coupling and a time-varying wind. A
/// fourth-order scheme gives about 16.
pub fn rk4_order_factor() -> f64 {
    let p = BodyParams { drag: true, c_par: 0.7, c_perp: 1.3, c_phi: 0.5, k_m2: 0.2, ..Default::default() };
    let wind = WindSignal {
        w: Signal::Sinusoid { offset: 1.0, amplitude: 0.4, frequency: 0.3, phase: 0.2 },
        zeta: Signal::Sinusoid { offset: 0.5, amplitude: 1.0, frequency: 0.2, phase: 0.0 },
    };
    let s = ControlSchedule::Constant { u: [1.0, 0.4, 0.8] };
    let x0 = BodyState::new(1.0, 0.3, 0.2, 0.5);
    let dt = 0.2;
    let reference = terminal(&p, &s, &wind, dt / 100.0, x0);
    let coarse = dist(&terminal(&p, &s, &wind, dt, x0), &reference);
    let fine = dist(&terminal(&p, &s, &wind, dt / 2.0, x0), &reference);
    coarse / fine
}

pub fn symbols() -> [Symbol; 3] {
    [Symbol::new("x"), Symbol::new("y"), Symbol::new("z")]
}

/// Random expression over x, y, z built from raw nodes, so no folding
/// happens at construction. Quotient denominators are `1 + d^2` and powers
/// stay small, keeping values and derivatives moderate on [-2, 2]^3.
pub fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    let syms = symbols();
    if depth == 0 || rng.random_bool(0.25) {
        return match rng.random_range(0..4) {
            0 => Expr::raw(Node::Const(windobs::expr::Constant::integer(rng.random_range(-3..=3)))),
            1 => Expr::raw(Node::Const(windobs::expr::Constant::real(rng.random_range(-2.0..2.0)))),
            _ => Expr::sym(&syms[rng.random_range(0..3)]),
        };
    }
    let op = rng.random_range(0..8);
    let k = rng.random_range(2..=3);
    let d = depth - 1;
    let mut sub = |n: usize| -> Vec<Expr> { (0..n).map(|_| random_expr(rng, d)).collect() };
    match op {
        0 => Expr::raw(Node::Sum(sub(3))),
        1 => Expr::raw(Node::Sum(sub(2))),
        2 => Expr::raw(Node::Product(sub(2))),
        3 => Expr::raw(Node::Neg(sub(1).remove(0))),
        4 => Expr::raw(Node::Sin(sub(1).remove(0))),
        5 => Expr::raw(Node::Cos(sub(1).remove(0))),
        6 => {
            let [num, d]: [Expr; 2] = sub(2).try_into().unwrap();
            let den = Expr::raw(Node::Sum(vec![Expr::one(), Expr::raw(Node::Pow(d, 2))]));
            Expr::raw(Node::Quotient(num, den))
        }
        _ => Expr::raw(Node::Pow(sub(1).remove(0), k)),
    }
}

pub fn random_point(rng: &mut ChaCha8Rng) -> HashMap<Symbol, f64> {
    symbols().into_iter().map(|s| (s, rng.random_range(-2.0..2.0))).collect()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Five-point central difference of `e` in `s` at `point`. The step starts
/// at `1e-3 * max(1, |x|)` and is halved 24 times; the estimate with the
/// smallest error bound wins, where the bound is the change from the
/// previous step (truncation) plus `1.5 eps max|f| / h` (roundoff). This
/// copes with both fast oscillations like `cos(x^27)` and large constant
/// terms that swamp small steps.
pub fn finite_difference(e: &Expr, s: &Symbol, point: &HashMap<Symbol, f64>) -> f64 {
    let x = point[s];
    let at = |dx: f64| {
        let mut p = point.clone();
        p.insert(s.clone(), x + dx);
        evaluate(e, &p).unwrap()
    };
    let stencil = |h: f64| {
        let f = [at(-2.0 * h), at(-h), at(h), at(2.0 * h)];
        let scale = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        ((f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * h), scale)
    };
    let mut h = 1e-3 * x.abs().max(1.0);
    let (mut prev, _) = stencil(h);
    let mut best = (f64::INFINITY, prev);
    for _ in 0..24 {
        h /= 2.0;
        let (next, scale) = stencil(h);
        let bound = (next - prev).abs() + 1.5 * f64::EPSILON * scale / h;
        if bound < best.0 {
            best = (bound, next);
        }
        prev = next;
    }
    best.1
}

/// `|a - b|` relative to `max(|a|, |b|, 1)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
