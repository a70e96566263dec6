//! L₁ stability of solutions under L₂ perturbations of the drift, tested by
//! mollifying the drift at decreasing scales.

use std::sync::Arc;
use std::thread;

use serde::Serialize;

use super::estimates::scenario_params;
use super::{ExperimentReport, Preset, Scenario, Tolerances, Verdict};
use crate::drift::{
    check_nonspectral, drift_distance, mollify, DriftSpec, MollifierConfig, NonSpectralReport, SampledDrift,
};
use crate::error::{config, Result};
use crate::fields::lp_norm_of;
use crate::grid::{SpaceGrid, TimeGrid};
use crate::solver::{solve_primal, ProblemSpec, Source};
use crate::table::Table;

/// One mollification level.
#[derive(Clone, Debug, Serialize)]
pub struct StabilityLevel {
    pub scale: f64,
    /// Distance from `∂Ω` of the subdomain `Ω_m` the level is solved on.
    pub subdomain_distance: f64,
    /// `‖b^m − b‖_{L₂(Q_T)}` with `b^m` extended by zero outside `Ω_m`.
    pub drift_distance: f64,
    /// `‖u₀^m − u₀‖_{L₁(Ω)}`.
    pub data_distance: f64,
    /// `max_k ‖u^m(t_k) − u(t_k)‖_{L₁(Ω)}`.
    pub solution_distance: f64,
    /// `solution_distance / (drift_distance + data_distance)`.
    pub ratio: f64,
    pub certificate: NonSpectralReport,
    pub hypothesis_violated: bool,
}

/// All levels with the constant fitted at the coarsest certified one.
#[derive(Clone, Debug)]
pub struct StabilitySweepResult {
    pub levels: Vec<StabilityLevel>,
    pub c_emp: f64,
    pub report: ExperimentReport,
}

fn level(
    s: &Scenario,
    grid: &Arc<SpaceGrid>,
    time: &TimeGrid,
    reference: &ProblemSpec,
    u_ref: &[Vec<f64>],
    scale: f64,
    data_shift: f64,
    tol: &Tolerances,
) -> Result<StabilityLevel> {
    let distance = scale + grid.h();
    let sub = grid.subgrid(distance)?;
    let bm = mollify(&s.drift, &MollifierConfig::new(scale)?, grid, time)?;
    let sub_grid = Arc::new(sub.grid.clone());
    let certificate = check_nonspectral(&bm, &sub_grid, time, tol.nonspectral)?;

    let bump = Preset::Bump.values(grid);
    let u0m: Vec<f64> = reference.u0.iter().zip(&bump).map(|(u, b)| u + data_shift * b).collect();
    let mut mask = vec![false; grid.len()];
    sub.parent_index.iter().for_each(|&p| mask[p] = true);
    let drift_dist = drift_distance(&bm, &s.drift, grid, time, Some(&mask))?;
    let diff0: Vec<f64> = u0m.iter().zip(&reference.u0).map(|(a, b)| a - b).collect();
    let data_distance = lp_norm_of(grid, &diff0, 1.0)?;
    if !certificate.passed {
        return Ok(StabilityLevel {
            scale,
            subdomain_distance: distance,
            drift_distance: drift_dist,
            data_distance,
            solution_distance: f64::NAN,
            ratio: f64::NAN,
            certificate,
            hypothesis_violated: true,
        });
    }
    let source = match &reference.source {
        Source::Zero => Source::Zero,
        Source::Steady(f) => Source::Steady(sub.restrict(f)),
        Source::Series(tr) => {
            let states = tr.states().iter().map(|v| sub.restrict(v)).collect();
            Source::Series(crate::fields::Trajectory::new(sub_grid.clone(), *time, states)?)
        }
    };
    let problem = ProblemSpec::new(sub_grid, *time, reference.nu, bm, sub.restrict(&u0m), source)?;
    let res = solve_primal(&problem, &s.solver)?;
    let mut solution_distance = 0.0f64;
    for (k, state) in res.trajectory.states().iter().enumerate() {
        let full = sub.extend_by_zero(state, grid.len());
        let d: Vec<f64> = full.iter().zip(&u_ref[k]).map(|(a, b)| a - b).collect();
        solution_distance = solution_distance.max(lp_norm_of(grid, &d, 1.0)?);
    }
    Ok(StabilityLevel {
        scale,
        subdomain_distance: distance,
        drift_distance: drift_dist,
        data_distance,
        solution_distance,
        ratio: solution_distance / (drift_dist + data_distance),
        certificate,
        hypothesis_violated: false,
    })
}

/// Samples the drift on the grid, then solves with it mollified at each
/// scale on `Ω_m = {dist(x, ∂Ω) ≥ ε_m + h}` and compares with the reference
/// solution. Levels run concurrently. With `data_perturbation`, level `m` (from 1) also shifts the
/// initial datum by `bump/m`.
pub fn run_stability_sweep(
    s: &Scenario,
    scales: &[f64],
    data_perturbation: bool,
    tol: &Tolerances,
) -> Result<StabilitySweepResult> {
    if scales.len() < 2 {
        return Err(config(format!("the sweep needs at least two mollifier scales, got {}", scales.len())));
    }
    if scales.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(config(format!("mollifier scales must be strictly decreasing, got {scales:?}")));
    }
    let mut rep = ExperimentReport::new("stability_sweep");
    scenario_params(&mut rep, s);
    rep.param("scales", scales);
    rep.param("data_perturbation", data_perturbation);
    rep.tolerance("sweep_headroom", tol.sweep_headroom);

    let grid = s.grid()?;
    let time = s.time()?;
    let drift = match &s.drift {
        DriftSpec::Sampled(_) | DriftSpec::Mollified { .. } => s.drift.clone(),
        other => DriftSpec::Sampled(Arc::new(SampledDrift::from_spec(other, grid.clone(), &time)?)),
    };
    let s = &s.with_drift(drift);
    let base = check_nonspectral(&s.drift, &grid, &time, tol.nonspectral)?;
    rep.measure("nonspectral", &base);
    if !base.passed {
        let report = rep.hypothesis_violated(&base);
        return Ok(StabilitySweepResult { levels: Vec::new(), c_emp: f64::NAN, report });
    }
    let reference = s.problem_on(grid.clone())?;
    let u_ref = solve_primal(&reference, &s.solver)?.trajectory.states().to_vec();

    let levels: Vec<StabilityLevel> = thread::scope(|scope| {
        let handles: Vec<_> = scales
            .iter()
            .enumerate()
            .map(|(m, &scale)| {
                let shift = if data_perturbation { 1.0 / (m + 1) as f64 } else { 0.0 };
                let (grid, time, reference, u_ref) = (&grid, &time, &reference, &u_ref);
                scope.spawn(move || level(s, grid, time, reference, u_ref, scale, shift, tol))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep level panicked")).collect::<Result<Vec<_>>>()
    })?;

    let certified: Vec<&StabilityLevel> = levels.iter().filter(|l| !l.hypothesis_violated).collect();
    for l in levels.iter().filter(|l| l.hypothesis_violated) {
        rep.note(format!(
            "level with scale {} fails the non-spectral certificate on its subdomain (max divergence {}); not asserted",
            l.scale, l.certificate.max_divergence
        ));
    }
    let mut table = Table::new(["scale", "drift_distance", "data_distance", "solution_distance", "ratio"]);
    for l in &levels {
        table.push(vec![l.scale, l.drift_distance, l.data_distance, l.solution_distance, l.ratio]);
    }
    rep.table("levels", table);
    rep.measure("levels", &levels);

    let c_emp = certified.first().map_or(f64::NAN, |l| l.ratio);
    rep.measure("c_emp", c_emp);
    if certified.len() < 2 {
        rep.note("fewer than two certified levels; nothing to compare");
        let mut report = rep.finish();
        if certified.is_empty() {
            report.verdict = Verdict::HypothesisViolated;
        }
        return Ok(StabilitySweepResult { levels, c_emp, report });
    }
    rep.check_flag("ratios_finite", certified.iter().all(|l| l.ratio.is_finite()));
    for w in certified.windows(2) {
        rep.check(&format!("drift_distance_decrease_scale{}", w[1].scale), w[1].drift_distance, w[0].drift_distance);
        rep.check(
            &format!("solution_distance_decrease_scale{}", w[1].scale),
            w[1].solution_distance,
            w[0].solution_distance,
        );
    }
    for l in &certified[1..] {
        let bound = tol.sweep_headroom * c_emp * (l.drift_distance + l.data_distance);
        rep.check(&format!("stability_bound_scale{}", l.scale), l.solution_distance, bound);
    }
    Ok(StabilitySweepResult { levels, c_emp, report: rep.finish() })
}
