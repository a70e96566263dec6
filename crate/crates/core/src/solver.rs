//! Backward-Euler finite-difference solver for the primal problem and its
//! exact discrete adjoint.
//!
//! One step solves `M_k u^{k+1} = u^k + Δt f^{k+1}` with
//! `M_k = I + Δt (ν W⁻¹S + A_k)`, where `S` is the symmetric stiffness matrix,
//! `W` the diagonal of quadrature weights and `A_k` the advection matrix with
//! the drift frozen at `t_{k+1}`. The dual step uses `M_kᵀ` in the
//! `W`-weighted inner product, obtained by transposing the assembled band.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::banded::{BandLu, BandMatrix};
use crate::drift::DriftSpec;
use crate::error::{contract, Error, Result};
use crate::fields::{lp_norm_of, NormSeries, Trajectory};
use crate::grid::{Neighbor, SpaceGrid, TimeGrid};
use crate::operator;

/// Discretization of `b·∇u`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvectionScheme {
    /// First-order upwind; yields M-matrix steps.
    #[default]
    Upwind,
    /// Second-order central differences; no structure guarantees.
    Centered,
}

/// Solver options. Time stepping is always backward Euler and linear systems
/// are solved directly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub scheme: AdvectionScheme,
}

/// Right-hand side `f`.
#[derive(Clone, Debug)]
pub enum Source {
    Zero,
    /// Time-independent node values.
    Steady(Vec<f64>),
    /// Values at every time node; `f^k` is taken from node `k`.
    Series(Trajectory),
}

/// A full instance of the initial-boundary value problem with homogeneous
/// Dirichlet data.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub grid: Arc<SpaceGrid>,
    pub time: TimeGrid,
    pub nu: f64,
    pub drift: DriftSpec,
    pub u0: Vec<f64>,
    pub source: Source,
}

impl ProblemSpec {
    pub fn new(
        grid: Arc<SpaceGrid>,
        time: TimeGrid,
        nu: f64,
        drift: DriftSpec,
        u0: Vec<f64>,
        source: Source,
    ) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(crate::error::config(format!("viscosity ν must be positive, got {nu}")));
        }
        grid.check_len(&u0)?;
        match &source {
            Source::Zero => {}
            Source::Steady(f) => grid.check_len(f)?,
            Source::Series(tr) => {
                grid.check_len(tr.state(0))?;
                if tr.len() != time.steps() + 1 {
                    return Err(contract("source series must have one state per time node"));
                }
            }
        }
        drift.check_compatible(&grid)?;
        Ok(Self { grid, time, nu, drift, u0, source })
    }

    /// `f^k` at time node `k`, or `None` for a zero source.
    pub fn source_at(&self, k: usize) -> Option<&[f64]> {
        match &self.source {
            Source::Zero => None,
            Source::Steady(f) => Some(f),
            Source::Series(tr) => Some(tr.state(k)),
        }
    }

    /// The same problem with another drift.
    pub fn with_drift(&self, drift: DriftSpec) -> Result<Self> {
        drift.check_compatible(&self.grid)?;
        Ok(Self { drift, ..self.clone() })
    }

    /// The same problem with other data.
    pub fn with_data(&self, u0: Vec<f64>, source: Source) -> Result<Self> {
        Self::new(self.grid.clone(), self.time, self.nu, self.drift.clone(), u0, source)
    }
}

/// Sign and sum diagnostics of one step matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepReport {
    pub step: usize,
    pub time: f64,
    /// Positive diagonal and nonpositive off-diagonal entries.
    pub m_structure: bool,
    /// `min_i (Σ_j M_ij − 1)`; nonnegative rows give the maximum principle.
    pub min_row_deficit: f64,
    /// `min_i ((Σ_j w_j M_ji)/w_i − 1)`; nonnegative columns give L₁ contraction.
    pub min_column_deficit: f64,
    pub row_condition: bool,
    pub column_condition: bool,
}

/// Everything a solve produces.
#[derive(Clone, Debug)]
pub struct SolveResult {
    pub trajectory: Trajectory,
    pub l1: NormSeries,
    pub l2: NormSeries,
    pub linf: NormSeries,
    /// `‖∇_h u^k‖₂²` at every time node.
    pub gradient_energy: NormSeries,
    /// One entry per step `k → k+1`.
    pub steps: Vec<StepReport>,
}

impl SolveResult {
    fn from_trajectory(trajectory: Trajectory, steps: Vec<StepReport>) -> Self {
        let series = |p: f64| trajectory.lp_series(p).expect("valid exponent");
        let gradient_energy = trajectory.series(|g, s| operator::gradient_energy(g, s).expect("state matches grid"));
        Self { l1: series(1.0), l2: series(2.0), linf: series(f64::INFINITY), gradient_energy, trajectory, steps }
    }

    /// All steps had M-structure.
    pub fn m_structure(&self) -> bool {
        self.steps.iter().all(|s| s.m_structure)
    }
}

/// Advection matrix `A` with `(A u)_i ≈ b(x_i)·∇u(x_i)`; `drift[i]` holds the
/// grid-axis components at node `i`.
pub fn advection_matrix(grid: &SpaceGrid, drift: &[Vec<f64>], scheme: AdvectionScheme) -> BandMatrix {
    let bw = operator::bandwidth(grid);
    let mut a = BandMatrix::zeros(grid.len(), bw, bw);
    for i in 0..grid.len() {
        for (axis, links) in grid.links(i).iter().enumerate() {
            let beta = drift[i][axis];
            let h = grid.spacing(axis);
            let [lower, upper] = links;
            match scheme {
                AdvectionScheme::Upwind => {
                    let plus = beta.max(0.0) / h;
                    let minus = (-beta).max(0.0) / h;
                    for (link, c) in [(lower, plus), (upper, minus)] {
                        if c == 0.0 {
                            continue;
                        }
                        match link.neighbor {
                            Neighbor::Node(j) => {
                                a.add(i, i, c);
                                a.add(i, j, -c);
                            }
                            Neighbor::Dirichlet => a.add(i, i, 2.0 * c),
                            Neighbor::Symmetry => {}
                        }
                    }
                }
                AdvectionScheme::Centered => {
                    let c = beta / (2.0 * h);
                    for (link, sign) in [(upper, 1.0), (lower, -1.0)] {
                        match link.neighbor {
                            Neighbor::Node(j) => a.add(i, j, sign * c),
                            Neighbor::Dirichlet => a.add(i, i, -sign * c),
                            Neighbor::Symmetry => a.add(i, i, sign * c),
                        }
                    }
                }
            }
        }
    }
    a
}

/// Step matrix `M = I + Δt (ν W⁻¹S + A)` with the drift at time `t`.
fn assemble_step(spec: &ProblemSpec, cfg: &SolverConfig, stiffness: &BandMatrix, t: f64) -> Result<BandMatrix> {
    let grid = &spec.grid;
    let dt = spec.time.dt();
    let drift = spec.drift.sample(grid, t)?;
    let a = advection_matrix(grid, &drift, cfg.scheme);
    let mut m = BandMatrix::identity(grid.len(), a.bandwidths().0, a.bandwidths().1);
    for i in 0..grid.len() {
        let w = grid.weights()[i];
        for j in a.row_range(i) {
            let v = dt * (spec.nu * stiffness.get(i, j) / w + a.get(i, j));
            if v != 0.0 {
                m.add(i, j, v);
            }
        }
    }
    Ok(m)
}

/// Step matrix producing `u^{k+1}` from `u^k`, `k = 0 … K−1`.
pub fn step_matrix(spec: &ProblemSpec, cfg: &SolverConfig, k: usize) -> Result<BandMatrix> {
    if k >= spec.time.steps() {
        return Err(contract(format!("step {k} outside 0..{}", spec.time.steps())));
    }
    let s = operator::stiffness(&spec.grid);
    assemble_step(spec, cfg, &s, spec.time.time(k + 1))
}

fn report_of(m: &BandMatrix, grid: &SpaceGrid, step: usize, time: f64) -> StepReport {
    let w = grid.weights();
    let n = m.dim();
    let mut m_structure = true;
    let mut rows = vec![-1.0; n];
    let mut cols = vec![0.0; n];
    let mut scale = 0.0f64;
    for i in 0..n {
        for j in m.row_range(i) {
            let v = m.get(i, j);
            if (i == j && !(v > 0.0)) || (i != j && v > 0.0) {
                m_structure = false;
            }
            rows[i] += v;
            cols[j] += w[i] * v;
            scale = scale.max(v.abs());
        }
    }
    let min_row = rows.iter().copied().fold(f64::INFINITY, f64::min);
    let min_col = cols.iter().zip(w).map(|(c, wj)| c / wj - 1.0).fold(f64::INFINITY, f64::min);
    let slack = 1e-12 * scale.max(1.0);
    StepReport {
        step,
        time,
        m_structure,
        min_row_deficit: min_row,
        min_column_deficit: min_col,
        row_condition: min_row >= -slack,
        column_condition: min_col >= -slack,
    }
}

/// Diagnostics of the step matrix producing `u^{k+1}`.
pub fn step_matrix_report(spec: &ProblemSpec, cfg: &SolverConfig, k: usize) -> Result<StepReport> {
    let m = step_matrix(spec, cfg, k)?;
    Ok(report_of(&m, &spec.grid, k, spec.time.time(k + 1)))
}

/// Factorizations of the step matrices, computed once for steady drifts.
struct Steps<'a> {
    spec: &'a ProblemSpec,
    cfg: &'a SolverConfig,
    stiffness: BandMatrix,
    transpose: bool,
    cached: Option<(BandLu, StepReport)>,
}

impl<'a> Steps<'a> {
    fn new(spec: &'a ProblemSpec, cfg: &'a SolverConfig, transpose: bool) -> Self {
        Self { spec, cfg, stiffness: operator::stiffness(&spec.grid), transpose, cached: None }
    }

    fn get(&mut self, k: usize) -> Result<(BandLu, StepReport)> {
        if let Some((lu, rep)) = &self.cached {
            let mut rep = *rep;
            rep.step = k;
            rep.time = self.spec.time.time(k + 1);
            return Ok((lu.clone(), rep));
        }
        let t = self.spec.time.time(k + 1);
        let m = assemble_step(self.spec, self.cfg, &self.stiffness, t)?;
        let rep = report_of(&m, &self.spec.grid, k, t);
        let lu = if self.transpose { m.transpose().factor()? } else { m.factor()? };
        if self.spec.drift.is_steady() {
            self.cached = Some((lu.clone(), rep));
        }
        Ok((lu, rep))
    }
}

fn check_finite(v: &[f64], step: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged { step })
    }
}

/// Integrates the primal problem forward in time.
pub fn solve_primal(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<SolveResult> {
    let dt = spec.time.dt();
    let k_max = spec.time.steps();
    let mut steps = Steps::new(spec, cfg, false);
    let mut states = Vec::with_capacity(k_max + 1);
    let mut reports = Vec::with_capacity(k_max);
    states.push(spec.u0.clone());
    for k in 0..k_max {
        let mut rhs = states[k].clone();
        if let Some(f) = spec.source_at(k + 1) {
            rhs.iter_mut().zip(f).for_each(|(r, f)| *r += dt * f);
        }
        let (lu, rep) = steps.get(k)?;
        let next = lu.solve(&rhs);
        check_finite(&next, k + 1)?;
        states.push(next);
        reports.push(rep);
    }
    let traj = Trajectory::new(spec.grid.clone(), spec.time, states)?;
    Ok(SolveResult::from_trajectory(traj, reports))
}

/// Integrates the dual problem `−∂_t w − νΔw − div(b w) = g`, `w(T) = w_T`,
/// backward in time with the exact discrete adjoint of the primal steps:
/// `W⁻¹ M_kᵀ W w^k = w^{k+1} + Δt g^{k+1}`.
pub fn solve_dual(spec: &ProblemSpec, cfg: &SolverConfig, g: &Trajectory, w_t: &[f64]) -> Result<SolveResult> {
    spec.grid.check_len(w_t)?;
    if g.len() != spec.time.steps() + 1 {
        return Err(contract("dual source must have one state per time node"));
    }
    spec.grid.check_len(g.state(0))?;
    let dt = spec.time.dt();
    let k_max = spec.time.steps();
    let w = spec.grid.weights();
    let mut steps = Steps::new(spec, cfg, true);
    let mut states = vec![Vec::new(); k_max + 1];
    let mut reports = vec![None; k_max];
    states[k_max] = w_t.to_vec();
    for k in (0..k_max).rev() {
        let rhs: Vec<f64> =
            states[k + 1].iter().zip(g.state(k + 1)).zip(w).map(|((a, gk), wi)| wi * (a + dt * gk)).collect();
        let (lu, rep) = steps.get(k)?;
        let y = lu.solve(&rhs);
        let next: Vec<f64> = y.iter().zip(w).map(|(v, wi)| v / wi).collect();
        check_finite(&next, k)?;
        states[k] = next;
        reports[k] = Some(rep);
    }
    let traj = Trajectory::new(spec.grid.clone(), spec.time, states)?;
    Ok(SolveResult::from_trajectory(traj, reports.into_iter().map(|r| r.expect("every step visited")).collect()))
}

/// Both sides of the discrete duality identity
/// `⟨u^K, w_T⟩ + Σ_k Δt⟨u^k, g^k⟩ = ⟨u^0, w^0⟩ + Σ_k Δt⟨f^k, w^{k−1}⟩`.
pub fn duality_sides(spec: &ProblemSpec, u: &Trajectory, w: &Trajectory, g: &Trajectory) -> (f64, f64) {
    let grid = &spec.grid;
    let ip = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(grid.weights()).map(|((x, y), q)| x * y * q).sum() };
    let k_max = spec.time.steps();
    let dt = spec.time.dt();
    let mut lhs = ip(u.state(k_max), w.state(k_max));
    let mut rhs = ip(u.state(0), w.state(0));
    for k in 1..=k_max {
        lhs += dt * ip(u.state(k), g.state(k));
        if let Some(f) = spec.source_at(k) {
            rhs += dt * ip(f, w.state(k - 1));
        }
    }
    (lhs, rhs)
}

/// `‖u‖_{L₁(Q_T)}` with the right-endpoint rule in time.
pub fn space_time_l1(traj: &Trajectory) -> f64 {
    traj.space_time_lp(1.0).expect("valid exponent")
}

/// `‖f‖_{L₁(Q_T)}` of a problem's source.
pub fn source_l1(spec: &ProblemSpec) -> f64 {
    let dt = spec.time.dt();
    (1..=spec.time.steps())
        .filter_map(|k| spec.source_at(k))
        .map(|f| dt * lp_norm_of(&spec.grid, f, 1.0).expect("matching length"))
        .sum()
}
