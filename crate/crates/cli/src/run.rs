use std::fmt::Write as _;

use serde::Serialize;

use windobs::estimator::{run_filter, FilterModel, FilterRun, Ukf};
use windobs::models::{build_dynamics, build_sensors};
use windobs::observability::TolPolicy;
use windobs::simulator::{
    classify_trajectory, integrate, measure, rank_label, rank_verdicts, representative_indices, BodyParams,
    ControlSchedule, NoiseSpec, RankVerdict, Trajectory, TrajectoryLabel,
};

use crate::scenario::Scenario;
use crate::{Check, CommandError};

/// Integrates and measures the scenario's flight. `seed` replaces the noise
/// seed when given.
pub fn fly(sc: &Scenario, seed: Option<u64>) -> Result<Trajectory, CommandError> {
    let sim = &sc.simulation;
    let params = BodyParams::from_config(&sc.model);
    let schedule = sc.controls.schedule.clone().unwrap_or(ControlSchedule::Constant { u: [0.0; 3] });
    let mut traj = integrate(&params, &schedule, &sim.wind, sim.dt, sim.duration, sim.initial_state())?;
    let model = build_dynamics(&sc.model)?;
    let sensors = build_sensors(&sc.sensors, &model)?;
    let noise = NoiseSpec { seed: seed.unwrap_or(sim.noise.seed), ..sim.noise.clone() };
    measure(&mut traj, &model, &sensors, &noise)?;
    Ok(traj)
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulationReport {
    pub scenario: String,
    pub samples: usize,
    pub label: TrajectoryLabel,
    pub rank_label: TrajectoryLabel,
    pub verdicts: Vec<RankVerdict>,
    pub checks: Vec<Check>,
}

/// Simulates, measures and labels a trajectory with both classifiers.
pub fn simulate(sc: &Scenario, seed: Option<u64>) -> Result<(Trajectory, SimulationReport), CommandError> {
    let traj = fly(sc, seed)?;
    let label = classify_trajectory(&traj, &sc.simulation.classify);
    let idx = representative_indices(&traj, sc.simulation.rank_samples);
    let params = BodyParams::from_config(&sc.model);
    let verdicts = rank_verdicts(&traj, &params, &idx, &sc.simulation.classify, &TolPolicy::default())?;
    let by_rank = rank_label(&verdicts);
    let mut checks = Vec::new();
    if let Some(expected) = sc.expect.label {
        checks.push(Check::eq("label (predicates)", expected, label));
        checks.push(Check::eq("label (rank tests)", expected, by_rank));
    }
    let report = SimulationReport {
        scenario: sc.name.clone(),
        samples: traj.len(),
        label,
        rank_label: by_rank,
        verdicts,
        checks,
    };
    Ok((traj, report))
}

#[derive(Clone, Debug, Serialize)]
pub struct FilterReport {
    pub scenario: String,
    pub metrics: windobs::estimator::Metrics,
    pub checks: Vec<Check>,
}

/// Simulates the scenario and runs the square-root UKF over it.
pub fn filter(sc: &Scenario, seed: Option<u64>) -> Result<(FilterRun, FilterReport), CommandError> {
    let traj = fly(sc, seed)?;
    let model = build_dynamics(&sc.model)?;
    let sensors = build_sensors(&sc.sensors, &model)?;
    let ukf = Ukf::new(FilterModel::new(&model, &sensors)?, sc.filter.clone())?;
    let run = run_filter(&traj, &ukf)?;
    let m = &run.metrics;
    let e = &sc.expect;
    let mut checks = Vec::new();
    if let Some(max) = e.final_zeta_error_max {
        checks.push(Check::new(
            "final zeta error",
            format!("<= {max}"),
            format!("{:.4}", m.final_zeta_error),
            m.final_zeta_error <= max,
        ));
    }
    if let Some(min) = e.final_zeta_error_min {
        checks.push(Check::new(
            "final zeta error",
            format!("> {min}"),
            format!("{:.4}", m.final_zeta_error),
            m.final_zeta_error > min,
        ));
    }
    if let Some(conv) = e.converging {
        let actual = m.zeta_rmse_final_20pct < m.zeta_rmse_first_20pct;
        checks.push(Check::new(
            "final-20% error below first-20% error",
            conv,
            format!("{actual} ({:.4} vs {:.4})", m.zeta_rmse_final_20pct, m.zeta_rmse_first_20pct),
            actual == conv,
        ));
    }
    checks.push(Check::eq("diverged", false, m.diverged));
    let report = FilterReport { scenario: sc.name.clone(), metrics: m.clone(), checks };
    Ok((run, report))
}

pub fn render_simulation(r: &SimulationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{}: {} samples", r.scenario, r.samples);
    let _ = writeln!(s, "  label (predicates)  {}", r.label);
    let _ = writeln!(s, "  label (rank tests)  {}", r.rank_label);
    for v in &r.verdicts {
        let _ = writeln!(
            s,
            "    t = {:>7.2}  calibrated {:?}  uncalibrated {:?}",
            v.t, v.observable_ranks, v.calibratable_ranks
        );
    }
    if !r.checks.is_empty() {
        let _ = writeln!(s, "Checks");
        s.push_str(&crate::render_checks(&r.checks));
    }
    s
}

pub fn render_filter(r: &FilterReport) -> String {
    let m = &r.metrics;
    let mut s = String::new();
    let _ = writeln!(s, "{}: {} steps over {} s", r.scenario, m.steps, m.duration);
    let _ = writeln!(s, "  final |zeta_hat - zeta|   {:.4} rad (std {:.2e})", m.final_zeta_error, m.final_zeta_std);
    let _ = writeln!(s, "  zeta RMSE first 20%       {:.4} rad", m.zeta_rmse_first_20pct);
    let _ = writeln!(s, "  zeta RMSE final 20%       {:.4} rad", m.zeta_rmse_final_20pct);
    let _ = writeln!(s, "  factor repairs            {}", m.repairs);
    let _ = writeln!(s, "  (local convergence from the configured initial guess only)");
    if !r.checks.is_empty() {
        let _ = writeln!(s, "Checks");
        s.push_str(&crate::render_checks(&r.checks));
    }
    s
}
