//! Experiments for the a-priori estimates: energy, L₁ decay, maximum
//! principle, duality and uniqueness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{relative_change, ExperimentReport, Preset, Scenario, Tolerances};
use crate::drift::{check_nonspectral, NonSpectralReport};
use crate::error::{config, Result};
use crate::fields::{dual_sobolev_norm_of, level_set_report, lp_norm_of, Trajectory};
use crate::grid::SpaceGrid;
use crate::solver::{duality_sides, solve_dual, solve_primal, source_l1, space_time_l1, ProblemSpec, SolveResult};
use crate::table::Table;

pub(super) fn scenario_params(rep: &mut ExperimentReport, s: &Scenario) {
    rep.param("domain", &s.domain);
    rep.param("n", s.dim());
    rep.param("resolution", s.resolution);
    rep.param("T", s.horizon);
    rep.param("steps", s.steps);
    rep.param("nu", s.nu);
    rep.param("drift", s.drift.to_string());
    rep.param("drift_kind", s.drift.kind());
    rep.param("u0", s.initial);
    rep.param("f", s.source);
    rep.param("scheme", s.solver.scheme);
    rep.param("time_stepping", "backward_euler");
}

pub(super) fn certify(s: &Scenario, tol: &Tolerances, rep: &mut ExperimentReport) -> Result<NonSpectralReport> {
    let cert = check_nonspectral(&s.drift, &*s.grid()?, &s.time()?, tol.nonspectral)?;
    rep.measure("nonspectral", &cert);
    Ok(cert)
}

fn norm_table(res: &SolveResult) -> Table {
    let mut t = Table::new(["t", "l1", "l2", "linf", "gradient_energy"]);
    for k in 0..res.l1.values.len() {
        t.push(vec![
            res.l1.times[k],
            res.l1.values[k],
            res.l2.values[k],
            res.linf.values[k],
            res.gradient_energy.values[k],
        ]);
    }
    t
}

/// Energy estimate: exact discrete inequality for `f = 0`, and stability of
/// the empirical constant under refinement and drift rescaling for `f ≠ 0`.
pub fn run_energy_experiment(s: &Scenario, tol: &Tolerances) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new("energy");
    scenario_params(&mut rep, s);
    rep.tolerance("energy", tol.energy);
    rep.tolerance("constant_drift", tol.constant_drift);
    let cert = certify(s, tol, &mut rep)?;
    if !cert.passed {
        return Ok(rep.hypothesis_violated(&cert));
    }

    let hom = s.with_data(s.initial, Preset::Zero).problem()?;
    let res = solve_primal(&hom, &s.solver)?;
    let dt = hom.time.dt();
    let u0_sq = res.l2.values[0].powi(2);
    let mut dissipated = 0.0;
    let mut lhs = Vec::with_capacity(res.l2.values.len());
    for (k, l2) in res.l2.values.iter().enumerate() {
        if k > 0 {
            dissipated += 2.0 * hom.nu * dt * res.gradient_energy.values[k];
        }
        lhs.push(l2 * l2 + dissipated);
    }
    let worst = lhs.iter().copied().fold(0.0, f64::max);
    if u0_sq == 0.0 {
        rep.check("homogeneous_energy", worst, 0.0);
        rep.note("u0 = 0 and f = 0: every norm vanishes");
    } else {
        rep.measure("homogeneous_energy_ratio", worst / u0_sq);
        rep.check("homogeneous_energy_ratio", worst / u0_sq, 1.0 + tol.energy);
    }
    let mut table = norm_table(&res);
    table.columns.push("energy_lhs".into());
    for (row, v) in table.rows.iter_mut().zip(&lhs) {
        row.push(*v);
    }
    rep.table("series", table);

    if !s.source.is_zero() {
        let base = energy_constant(s)?;
        let refined = energy_constant(&s.refined())?;
        let scaled = energy_constant(&s.with_drift(s.drift.scaled(4.0)))?;
        rep.measure("c_emp", base);
        rep.measure("c_emp_refined", refined);
        rep.measure("c_emp_drift_x4", scaled);
        rep.check("c_emp_change_refinement", relative_change(refined, base), tol.constant_drift);
        rep.check("c_emp_change_drift_x4", relative_change(scaled, base), tol.constant_drift);
    }
    Ok(rep.finish())
}

/// `(sup_k ‖u^k‖₂ + √ν ‖∇u‖_{L₂(Q_T)}) / (‖u₀‖₂ + ‖f‖_{L₂(0,T;W⁻¹₂)})`.
fn energy_constant(s: &Scenario) -> Result<f64> {
    let p = s.problem()?;
    let res = solve_primal(&p, &s.solver)?;
    let dt = p.time.dt();
    let sup = res.l2.values.iter().copied().fold(0.0, f64::max);
    let grad: f64 = res.gradient_energy.values[1..].iter().map(|e| dt * e).sum();
    let lhs = sup + (p.nu * grad).sqrt();
    let mut f_sq = 0.0;
    for k in 1..=p.time.steps() {
        if let Some(f) = p.source_at(k) {
            f_sq += dt * dual_sobolev_norm_of(&p.grid, f)?.powi(2);
        }
    }
    Ok(lhs / (res.l2.values[0] + f_sq.sqrt()))
}

/// L₁ decay at every step and between two requested times, together with
/// the signed versions for the positive and negative parts.
pub fn run_l1_decay_experiment(s: &Scenario, t1: f64, t2: f64, tol: &Tolerances) -> Result<ExperimentReport> {
    if !(0.0 <= t1 && t1 < t2 && t2 <= s.horizon) {
        return Err(config(format!("sample times must satisfy 0 ≤ t1 < t2 ≤ T, got t1 = {t1}, t2 = {t2}")));
    }
    let mut rep = ExperimentReport::new("l1_decay");
    scenario_params(&mut rep, s);
    rep.param("t1", t1);
    rep.param("t2", t2);
    rep.tolerance("structural", tol.structural);
    let cert = certify(s, tol, &mut rep)?;
    if !cert.passed {
        return Ok(rep.hypothesis_violated(&cert));
    }
    let p = s.problem()?;
    let res = solve_primal(&p, &s.solver)?;
    let grid = &p.grid;
    let dt = p.time.dt();
    let states = res.trajectory.states();
    let k_max = p.time.steps();

    let part =
        |v: &[f64], sign: f64| -> f64 { v.iter().zip(grid.weights()).map(|(u, w)| (sign * u).max(0.0) * w).sum() };
    let l1: Vec<f64> = res.l1.values.clone();
    let pos: Vec<f64> = states.iter().map(|v| part(v, 1.0)).collect();
    let neg: Vec<f64> = states.iter().map(|v| part(v, -1.0)).collect();
    // source mass entering each step, in total and where u^{k+1} is positive/negative
    let mut src = vec![0.0; k_max + 1];
    let mut src_pos = vec![0.0; k_max + 1];
    let mut src_neg = vec![0.0; k_max + 1];
    for k in 1..=k_max {
        if let Some(f) = p.source_at(k) {
            for j in 0..grid.len() {
                let m = dt * f[j].abs() * grid.weights()[j];
                src[k] += m;
                if states[k][j] > 0.0 {
                    src_pos[k] += m;
                }
                if states[k][j] < 0.0 {
                    src_neg[k] += m;
                }
            }
        }
    }
    let scale = (l1[0] + src.iter().sum::<f64>()).max(f64::MIN_POSITIVE);
    let excess = |series: &[f64], inflow: &[f64]| -> f64 {
        (0..k_max).map(|k| series[k + 1] - series[k] - inflow[k + 1]).fold(f64::NEG_INFINITY, f64::max) / scale
    };
    rep.check("l1_step_excess", excess(&l1, &src), tol.structural);
    rep.check("l1_positive_part_step_excess", excess(&pos, &src_pos), tol.structural);
    rep.check("l1_negative_part_step_excess", excess(&neg, &src_neg), tol.structural);

    let (k1, k2) = (p.time.nearest_index(t1), p.time.nearest_index(t2));
    let inflow: f64 = src[k1 + 1..=k2].iter().sum();
    rep.measure("l1_at_t1", l1[k1]);
    rep.measure("l1_at_t2", l1[k2]);
    rep.measure("source_l1_between", inflow);
    rep.check("l1_pair_excess", (l1[k2] - l1[k1] - inflow) / scale, tol.structural);

    let min_u = states.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    rep.measure("min_u", min_u);
    rep.measure("final_l1", l1[k_max]);
    let nonneg_data = p.u0.iter().all(|v| *v >= 0.0)
        && (1..=k_max).all(|k| p.source_at(k).map_or(true, |f| f.iter().all(|v| *v >= 0.0)));
    if nonneg_data {
        let sup0 = p.u0.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        rep.check("negative_excursion", -min_u, tol.structural * sup0);
    }
    let mut table = Table::new(["t", "l1", "l1_positive", "l1_negative", "source_l1_cumulative"]);
    let mut cum = 0.0;
    for k in 0..=k_max {
        cum += src[k];
        table.push(vec![p.time.time(k), l1[k], pos[k], neg[k], cum]);
    }
    rep.table("series", table);
    Ok(rep.finish())
}

/// Maximum principle: exact bound for `f = 0`, stability of the empirical
/// constant in front of `‖f‖_{L_s(Q_T)}`, and level-set energies.
pub fn run_max_principle_experiment(s: &Scenario, s_exp: f64, tol: &Tolerances) -> Result<ExperimentReport> {
    let n = s.dim() as f64;
    if !(s_exp > (n + 2.0) / 2.0) {
        return Err(config(format!("s must exceed (n+2)/2 = {}, got s = {s_exp}", (n + 2.0) / 2.0)));
    }
    let mut rep = ExperimentReport::new("max_principle");
    scenario_params(&mut rep, s);
    rep.param("s", s_exp);
    rep.tolerance("structural", tol.structural);
    rep.tolerance("constant_drift", tol.constant_drift);
    let cert = certify(s, tol, &mut rep)?;
    if !cert.passed {
        return Ok(rep.hypothesis_violated(&cert));
    }
    let hom = s.with_data(s.initial, Preset::Zero).problem()?;
    let res = solve_primal(&hom, &s.solver)?;
    let sup0 = res.linf.values[0];
    let max_u = res.trajectory.states().iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_u = res.trajectory.states().iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let top = hom.u0.iter().copied().fold(0.0, f64::max);
    let bottom = hom.u0.iter().copied().fold(0.0, f64::min);
    let slack = tol.structural * sup0.max(1.0);
    rep.measure("homogeneous_sup", res.linf.values.iter().copied().fold(0.0, f64::max));
    rep.check(
        "homogeneous_sup_excess",
        res.linf.values.iter().map(|v| v - sup0).fold(f64::NEG_INFINITY, f64::max),
        slack,
    );
    rep.check("homogeneous_upper_excess", max_u - top, slack);
    rep.check("homogeneous_lower_excess", bottom - min_u, slack);
    let mut series = norm_table(&res);
    series.columns.truncate(4);
    series.rows.iter_mut().for_each(|r| r.truncate(4));
    rep.table("series", series);

    let gamma = 2.0 / (n + 2.0) - 1.0 / s_exp;
    let q = 2.0 * (n + 2.0) / (n + 4.0);
    rep.measure("gamma", gamma);
    rep.measure("q", q);

    let level_traj = if s.source.is_zero() {
        res.trajectory.clone()
    } else {
        let base = max_constant(s, s_exp)?;
        let scaled = max_constant(&s.with_drift(s.drift.scaled(4.0)), s_exp)?;
        let refined = max_constant(&s.refined(), s_exp)?;
        rep.measure("c_emp", base.0);
        rep.measure("c_emp_drift_x4", scaled.0);
        rep.measure("c_emp_refined", refined.0);
        rep.check_flag("c_emp_positive", base.0 > 0.0);
        rep.check("c_emp_change_drift_x4", relative_change(scaled.0, base.0), tol.constant_drift);
        rep.check("c_emp_change_refinement", relative_change(refined.0, base.0), tol.constant_drift);
        base.1
    };
    let peak = level_traj.states().iter().flatten().copied().fold(0.0, f64::max);
    let exponent = 1.0 - 2.0 / (n + 2.0) + 2.0 * gamma;
    let mut levels = Table::new(["k", "measure", "sup_energy", "gradient_energy", "energy", "measure_power"]);
    let mut previous = f64::INFINITY;
    let mut monotone = true;
    for j in 0..10 {
        let k = peak * j as f64 / 10.0;
        let r = level_set_report(&level_traj, k)?;
        monotone &= r.measure <= previous;
        previous = r.measure;
        levels.push(vec![k, r.measure, r.sup_energy, r.gradient_energy, r.energy(), r.measure.powf(exponent)]);
    }
    rep.check_flag("level_set_measure_nonincreasing", monotone);
    rep.table("level_sets", levels);
    Ok(rep.finish())
}

/// `(‖u‖_{L∞(Q_T)} / ‖f‖_{L_s(Q_T)}, trajectory)` for zero initial data.
/// By linearity this is the constant in front of `‖f‖` in the bound.
fn max_constant(s: &Scenario, s_exp: f64) -> Result<(f64, Trajectory)> {
    let p = s.with_data(Preset::Zero, s.source).problem()?;
    let res = solve_primal(&p, &s.solver)?;
    let dt = p.time.dt();
    let mut f_s = 0.0;
    for k in 1..=p.time.steps() {
        if let Some(f) = p.source_at(k) {
            f_s += dt * lp_norm_of(&p.grid, f, s_exp)?.powf(s_exp);
        }
    }
    let sup = res.trajectory.states().iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((sup / f_s.powf(1.0 / s_exp), res.trajectory))
}

fn random_trajectory(p: &ProblemSpec, rng: &mut ChaCha8Rng, lo: f64) -> Result<Trajectory> {
    let n = p.grid.len();
    let states = (0..=p.time.steps())
        .map(|k| if k == 0 { vec![0.0; n] } else { (0..n).map(|_| rng.gen_range(lo..1.0)).collect() })
        .collect();
    Trajectory::new(p.grid.clone(), p.time, states)
}

/// Discrete duality identity for random probes, the L₁ estimate obtained by
/// duality and the dual maximum principle, each under drift rescaling.
pub fn run_duality_check(s: &Scenario, probes: usize, seed: u64, tol: &Tolerances) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new("duality");
    scenario_params(&mut rep, s);
    rep.param("probes", probes);
    rep.param("seed", seed);
    rep.tolerance("duality", tol.duality);
    rep.tolerance("ratio_factor", tol.ratio_factor);
    let cert = certify(s, tol, &mut rep)?;
    if !cert.passed {
        return Ok(rep.hypothesis_violated(&cert));
    }
    let p = s.problem()?;
    let u = solve_primal(&p, &s.solver)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..probes {
        let g = random_trajectory(&p, &mut rng, -1.0)?;
        let w_t: Vec<f64> = (0..p.grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = solve_dual(&p, &s.solver, &g, &w_t)?;
        let (lhs, rhs) = duality_sides(&p, &u.trajectory, &w.trajectory, &g);
        let denom = lhs.abs().max(rhs.abs());
        worst = worst.max(if denom == 0.0 { 0.0 } else { (lhs - rhs).abs() / denom });
    }
    rep.measure("identity_residual", worst);
    rep.check("identity_residual", worst, tol.duality);

    let drifts = [("zero", s.drift.scaled(0.0)), ("base", s.drift.clone()), ("x4", s.drift.scaled(4.0))];
    let data = lp_norm_of(&p.grid, &p.u0, 1.0)? + source_l1(&p);
    if data == 0.0 {
        rep.note("u0 = 0 and f = 0: the L1 ratio is 0/0 and is skipped");
    } else {
        let mut rho = Vec::new();
        for (name, d) in &drifts {
            let r = solve_primal(&p.with_drift(d.clone())?, &s.solver)?;
            let v = space_time_l1(&r.trajectory) / data;
            rep.measure(&format!("l1_ratio_{name}"), v);
            rho.push(v);
        }
        rep.check("l1_ratio_factor_drift_x4", (rho[2] / rho[1]).max(rho[1] / rho[2]), tol.ratio_factor);
        rep.check("l1_ratio_over_zero_drift", rho[1].max(rho[2]) / rho[0], tol.ratio_factor);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let gs: Vec<Trajectory> = (0..probes).map(|_| random_trajectory(&p, &mut rng, 0.0)).collect::<Result<_>>()?;
    let zero = vec![0.0; p.grid.len()];
    let mut c_w = Vec::new();
    for (name, d) in &drifts {
        let pd = p.with_drift(d.clone())?;
        let mut c = 0.0f64;
        for g in &gs {
            let w = solve_dual(&pd, &s.solver, g, &zero)?;
            let sup_w = w.trajectory.space_time_lp(f64::INFINITY)?;
            let sup_g = g.space_time_lp(f64::INFINITY)?;
            c = c.max(sup_w / sup_g);
        }
        rep.measure(&format!("dual_sup_ratio_{name}"), c);
        c_w.push(c);
    }
    rep.check("dual_sup_ratio_factor_drift_x4", (c_w[2] / c_w[1]).max(c_w[1] / c_w[2]), tol.ratio_factor);
    let cap = s.horizon * (1.0 + tol.structural);
    rep.check("dual_sup_ratio_base_over_T", c_w[1], cap);
    rep.check("dual_sup_ratio_x4_over_T", c_w[2], cap);
    rep.table("series", norm_table(&u));
    Ok(rep.finish())
}

/// Cell averages of `fine` over the cells of `coarse` (each coarse cell is a
/// union of fine cells after dyadic refinement).
fn restrict(fine: &SpaceGrid, coarse: &SpaceGrid, values: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; coarse.len()];
    let mut mass = vec![0.0; coarse.len()];
    for j in 0..fine.len() {
        let c = coarse.nearest_node(fine.coord(j));
        acc[c] += fine.weights()[j] * values[j];
        mass[c] += fine.weights()[j];
    }
    acc.iter().zip(&mass).map(|(a, m)| a / m).collect()
}

/// `max_k ‖R u_fine(t_k) − u_coarse(t_k)‖₁` over the coarse time nodes.
fn trajectory_distance(fine: &Trajectory, coarse: &Trajectory) -> f64 {
    let ratio = fine.time().steps() / coarse.time().steps();
    (0..coarse.len())
        .map(|k| {
            let r = restrict(fine.grid(), coarse.grid(), fine.state(ratio * k));
            let d: Vec<f64> = r.iter().zip(coarse.state(k)).map(|(a, b)| a - b).collect();
            lp_norm_of(coarse.grid(), &d, 1.0).expect("matching grids")
        })
        .fold(0.0, f64::max)
}

/// Solutions at `N`, `2N`, `4N` (with proportional steps) approach a single
/// limit; the scheme is deterministic and zero data give zero.
pub fn run_uniqueness_check(s: &Scenario, tol: &Tolerances) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new("uniqueness");
    scenario_params(&mut rep, s);
    rep.param("resolutions", [s.resolution, 2 * s.resolution, 4 * s.resolution]);
    rep.tolerance("min_order", tol.min_order);
    let cert = certify(s, tol, &mut rep)?;
    if !cert.passed {
        return Ok(rep.hypothesis_violated(&cert));
    }
    let mut runs = Vec::new();
    for factor in [1, 2, 4] {
        let sc = s.scaled_resolution(factor);
        runs.push(solve_primal(&sc.problem()?, &s.solver)?.trajectory);
        let zero = sc.with_data(Preset::Zero, Preset::Zero).problem()?;
        let z = solve_primal(&zero, &s.solver)?;
        let m = z.trajectory.states().iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        rep.check(&format!("zero_data_sup_{}", sc.resolution), m, 0.0);
    }
    let d1 = trajectory_distance(&runs[1], &runs[0]);
    let d2 = trajectory_distance(&runs[2], &runs[1]);
    let order = (d1 / d2).log2();
    rep.measure("distance_n_2n", d1);
    rep.measure("distance_2n_4n", d2);
    rep.measure("observed_order", order);
    rep.check("distance_decrease", d2, d1);
    rep.check_at_least("observed_order", order, tol.min_order);
    let again = solve_primal(&s.problem()?, &s.solver)?.trajectory;
    let identical =
        again.states().iter().flatten().zip(runs[0].states().iter().flatten()).all(|(a, b)| a.to_bits() == b.to_bits());
    rep.check_flag("deterministic_rerun", identical);
    let mut table = Table::new(["resolution", "distance_to_next"]);
    table.push(vec![s.resolution as f64, d1]);
    table.push(vec![2.0 * s.resolution as f64, d2]);
    rep.table("refinement", table);
    Ok(rep.finish())
}
