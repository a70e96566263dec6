//! Scalar fields, trajectories and the functionals evaluated on them.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::grid::{Domain, Link, Neighbor, SpaceGrid, TimeGrid};
use crate::operator;
use crate::table::{fmt_g17, Table};

/// Node values on a shared grid.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<SpaceGrid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<SpaceGrid>, values: Vec<f64>) -> Result<Self> {
        grid.check_len(&values)?;
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<SpaceGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    pub fn constant(grid: Arc<SpaceGrid>, c: f64) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    /// Samples `f` at every node position in `ℝⁿ`.
    pub fn from_fn(grid: Arc<SpaceGrid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|j| f(&grid.ambient_point(j))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<SpaceGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().zip(self.grid.weights()).map(|(v, w)| v * w).sum()
    }

    /// `(∫|u|^p)^{1/p}`; `p = ∞` is the maximum over nodes.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm_of(&self.grid, &self.values, p)
    }

    /// `sup_s s·|{|u| > s}|^{1/p}` over the node values `s`.
    pub fn weak_lp_quasinorm(&self, p: f64) -> Result<f64> {
        weak_lp_quasinorm_of(&self.grid, &self.values, p)
    }

    /// `‖f‖_{W⁻¹₂}` realized as `‖∇φ‖₂` with `−Δ_h φ = f`, `φ|∂Ω = 0`.
    pub fn dual_sobolev_norm(&self) -> Result<f64> {
        dual_sobolev_norm_of(&self.grid, &self.values)
    }

    pub fn gradient_energy(&self) -> f64 {
        operator::gradient_energy(&self.grid, &self.values).expect("field matches its grid")
    }

    pub fn truncate(&self, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(contract(format!("truncation level must be positive, got {delta}")));
        }
        Ok(self.map(|s| truncation(s, delta)))
    }

    pub fn pos_part(&self) -> Self {
        self.map(|s| s.max(0.0))
    }

    pub fn neg_part(&self) -> Self {
        self.map(|s| (-s).max(0.0))
    }
}

/// `T_δ(s)`: 0 below 0, identity on `(0, δ)`, `δ` above.
pub fn truncation(s: f64, delta: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s < delta {
        s
    } else {
        delta
    }
}

pub fn lp_norm_of(grid: &SpaceGrid, values: &[f64], p: f64) -> Result<f64> {
    grid.check_len(values)?;
    if !(p >= 1.0) {
        return Err(contract(format!("Lebesgue exponent must be ≥ 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(values.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    let s: f64 = values.iter().zip(grid.weights()).map(|(v, w)| v.abs().powf(p) * w).sum();
    Ok(if p == 1.0 { s } else { s.powf(1.0 / p) })
}

pub fn weak_lp_quasinorm_of(grid: &SpaceGrid, values: &[f64], p: f64) -> Result<f64> {
    grid.check_len(values)?;
    if !(p >= 1.0) || p.is_infinite() {
        return Err(contract(format!("weak Lebesgue exponent must be finite and ≥ 1, got {p}")));
    }
    let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    // Each node contributes the part of its cell on which the monotone
    // in-cell reconstruction stays at or above the node value.
    let own: Vec<f64> = (0..grid.len()).map(|j| upper_cell_fraction(grid, &abs, j) * grid.weights()[j]).collect();
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| abs[b].total_cmp(&abs[a]));
    let mut best = 0.0f64;
    let mut above = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = abs[order[i]];
        let mut level = above;
        let mut j = i;
        while j < order.len() && abs[order[j]] == s {
            level += own[order[j]];
            above += grid.weights()[order[j]];
            j += 1;
        }
        best = best.max(s * level.powf(1.0 / p));
        i = j;
    }
    Ok(best)
}

/// Fraction of cell `j` lying on the side(s) of its node where the neighbors
/// are not smaller. Missing neighbors are linearly extrapolated (Dirichlet
/// faces) or mirrored (symmetry faces).
fn upper_cell_fraction(grid: &SpaceGrid, abs: &[f64], j: usize) -> f64 {
    let v = abs[j];
    let mut theta = 1.0;
    for (axis, links) in grid.links(j).iter().enumerate() {
        let value = |side: usize| match links[side].neighbor {
            Neighbor::Node(i) => Some(abs[i]),
            _ => None,
        };
        let (lo0, hi0) = (value(0), value(1));
        let ghost = |other: Option<f64>, link: &Link| match link.neighbor {
            Neighbor::Symmetry => v,
            _ => other.map_or(v, |o| 2.0 * v - o),
        };
        let lo = lo0.unwrap_or_else(|| ghost(hi0, &links[0]));
        let hi = hi0.unwrap_or_else(|| ghost(lo0, &links[1]));
        let lower_half = lower_half_fraction(grid, j, axis);
        theta *= match (lo >= v, hi >= v) {
            (true, true) => 1.0,
            (true, false) => lower_half,
            (false, true) => 1.0 - lower_half,
            (false, false) => 0.0,
        };
    }
    theta
}

fn lower_half_fraction(grid: &SpaceGrid, j: usize, axis: usize) -> f64 {
    match *grid.domain() {
        Domain::RadialBall { dim, .. } => {
            let r = grid.coord(j)[0];
            let h = grid.spacing(axis);
            let n = dim as i32;
            let inner = (r - 0.5 * h).max(0.0).powi(n);
            (r.powi(n) - inner) / ((r + 0.5 * h).powi(n) - inner)
        }
        _ => 0.5,
    }
}

pub fn dual_sobolev_norm_of(grid: &SpaceGrid, values: &[f64]) -> Result<f64> {
    if values.iter().all(|&v| v == 0.0) {
        grid.check_len(values)?;
        return Ok(0.0);
    }
    let phi = operator::poisson_solve(grid, values)?;
    Ok(operator::gradient_energy(grid, &phi)?.sqrt())
}

/// Node states at every time node, `K + 1` of them including `t = 0`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    grid: Arc<SpaceGrid>,
    time: TimeGrid,
    states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(grid: Arc<SpaceGrid>, time: TimeGrid, states: Vec<Vec<f64>>) -> Result<Self> {
        if states.len() != time.steps() + 1 {
            return Err(contract(format!(
                "trajectory has {} states but the time grid has {} nodes",
                states.len(),
                time.steps() + 1
            )));
        }
        for s in &states {
            grid.check_len(s)?;
        }
        Ok(Self { grid, time, states })
    }

    /// Samples `u(x, t)` at every node and time node.
    pub fn from_fn(grid: Arc<SpaceGrid>, time: TimeGrid, u: impl Fn(&[f64], f64) -> f64) -> Self {
        let states =
            time.times().into_iter().map(|t| (0..grid.len()).map(|j| u(&grid.ambient_point(j), t)).collect()).collect();
        Self { grid, time, states }
    }

    pub fn constant(field: &ScalarField, time: TimeGrid) -> Self {
        Self { grid: field.grid.clone(), time, states: vec![field.values.clone(); time.steps() + 1] }
    }

    pub fn grid(&self) -> &Arc<SpaceGrid> {
        &self.grid
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k]
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn field(&self, k: usize) -> ScalarField {
        ScalarField { grid: self.grid.clone(), values: self.states[k].clone() }
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory is never empty")
    }

    /// Per-time-node series of a spatial functional.
    pub fn series(&self, f: impl Fn(&SpaceGrid, &[f64]) -> f64) -> NormSeries {
        NormSeries { times: self.time.times(), values: self.states.iter().map(|s| f(&self.grid, s)).collect() }
    }

    pub fn lp_series(&self, p: f64) -> Result<NormSeries> {
        if !(p >= 1.0) {
            return Err(contract(format!("Lebesgue exponent must be ≥ 1, got {p}")));
        }
        Ok(self.series(|g, s| lp_norm_of(g, s, p).expect("validated state")))
    }

    /// `‖u‖_{L_p(Q_T)}` with the right-endpoint rule in time (`k = 1..K`).
    pub fn space_time_lp(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(contract(format!("Lebesgue exponent must be ≥ 1, got {p}")));
        }
        if p.is_infinite() {
            return Ok(self.states.iter().flatten().fold(0.0, |m, v| m.max(v.abs())));
        }
        let dt = self.time.dt();
        let mut s = 0.0;
        for state in &self.states[1..] {
            s += dt * state.iter().zip(self.grid.weights()).map(|(v, w)| v.abs().powf(p) * w).sum::<f64>();
        }
        Ok(s.powf(1.0 / p))
    }

    /// Row per time node: `t, u_0, …, u_{N-1}`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let cols: Vec<String> = (0..self.grid.len()).map(|j| format!("u{j}")).collect();
        writeln!(out, "t,{}", cols.join(","))?;
        for (k, s) in self.states.iter().enumerate() {
            let cells: Vec<String> = s.iter().map(|v| fmt_g17(*v)).collect();
            writeln!(out, "{},{}", fmt_g17(self.time.time(k)), cells.join(","))?;
        }
        Ok(())
    }
}

/// Values of one functional at each time node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Outer exponent of a Bochner norm `L_q(0, T; X)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeNorm {
    Sup,
    L2,
}

impl NormSeries {
    pub fn bochner_norm(&self, outer: TimeNorm) -> f64 {
        match outer {
            TimeNorm::Sup => self.values.iter().copied().fold(0.0, f64::max),
            TimeNorm::L2 => {
                let s: f64 = self
                    .times
                    .windows(2)
                    .zip(self.values.windows(2))
                    .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] * v[0] + v[1] * v[1]))
                    .sum();
                s.sqrt()
            }
        }
    }

    pub fn to_table(&self, name: &str) -> Table {
        let mut t = Table::new(["t", name]);
        for (a, b) in self.times.iter().zip(&self.values) {
            t.push(vec![*a, *b]);
        }
        t
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.to_table("value").write_csv(out)
    }
}

/// `bochner_norm` as a free function.
pub fn bochner_norm(series: &NormSeries, outer: TimeNorm) -> f64 {
    series.bochner_norm(outer)
}

/// Forward time average `u_h(t) = (1/h)∫_t^{t+h} u`, trapezoid in time.
/// The window must be a whole number of steps; the horizon shrinks to `T − h`.
pub fn steklov_average(traj: &Trajectory, h: f64) -> Result<Trajectory> {
    let dt = traj.time.dt();
    let ratio = h / dt;
    let m = ratio.round();
    if !(h > 0.0) || h >= traj.time.horizon() || (ratio - m).abs() > 1e-9 * ratio.max(1.0) {
        return Err(contract(format!(
            "Steklov window {h} must be a positive multiple of Δt = {dt} below T = {}",
            traj.time.horizon()
        )));
    }
    let m = m as usize;
    let steps = traj.time.steps() - m;
    let time = TimeGrid::new(traj.time.horizon() - h, steps)?;
    let n = traj.grid.len();
    let scale = dt / h;
    let states = (0..=steps)
        .map(|k| {
            let mut avg = vec![0.0; n];
            for l in 0..=m {
                let c = if l == 0 || l == m { 0.5 } else { 1.0 };
                for (a, v) in avg.iter_mut().zip(&traj.states[k + l]) {
                    *a += c * v;
                }
            }
            avg.iter_mut().for_each(|a| *a *= scale);
            avg
        })
        .collect();
    Ok(Trajectory { grid: traj.grid.clone(), time, states })
}

/// Level-set quantities on `A_k = {u > k}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSetReport {
    pub threshold: f64,
    /// Space-time measure `|A_k|`.
    pub measure: f64,
    /// `sup_t ‖(u − k)₊‖₂²`.
    pub sup_energy: f64,
    /// `∫_0^T ‖∇(u − k)₊‖₂² dt`.
    pub gradient_energy: f64,
}

impl LevelSetReport {
    /// Left side of the De Giorgi level-set inequality.
    pub fn energy(&self) -> f64 {
        self.sup_energy + self.gradient_energy
    }
}

pub fn level_set_report(traj: &Trajectory, k: f64) -> Result<LevelSetReport> {
    if !(k >= 0.0) {
        return Err(contract(format!("level k must be nonnegative, got {k}")));
    }
    let g = &traj.grid;
    let dt = traj.time.dt();
    let mut measure = 0.0;
    let mut sup_energy = 0.0f64;
    let mut gradient_energy = 0.0;
    for (step, state) in traj.states.iter().enumerate() {
        let cut: Vec<f64> = state.iter().map(|u| (u - k).max(0.0)).collect();
        let l2: f64 = cut.iter().zip(g.weights()).map(|(c, w)| c * c * w).sum();
        sup_energy = sup_energy.max(l2);
        if step > 0 {
            measure += dt * state.iter().zip(g.weights()).filter(|(u, _)| **u > k).map(|(_, w)| w).sum::<f64>();
            gradient_energy += dt * operator::gradient_energy(g, &cut)?;
        }
    }
    Ok(LevelSetReport { threshold: k, measure, sup_energy, gradient_energy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Domain};
    use std::f64::consts::PI;

    fn disc(n: usize) -> Arc<SpaceGrid> {
        Arc::new(build_grid(&Domain::unit_ball(2).unwrap(), n).unwrap())
    }

    fn unit_interval(n: usize) -> Arc<SpaceGrid> {
        Arc::new(build_grid(&Domain::interval(0.0, 1.0).unwrap(), n).unwrap())
    }

    #[test]
    fn l1_norms_against_closed_forms() {
        let g = disc(200);
        let one = ScalarField::constant(g.clone(), 1.0);
        assert!((one.lp_norm(1.0).unwrap() - PI).abs() / PI < 1e-3);
        let log = ScalarField::from_fn(g.clone(), |x| x[0].abs().ln());
        assert!((log.lp_norm(1.0).unwrap() - PI / 2.0).abs() / (PI / 2.0) < 1e-3);
        let zero = ScalarField::zeros(g);
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert_eq!(zero.lp_norm(p).unwrap(), 0.0);
        }
        assert!(one.lp_norm(0.5).is_err());
    }

    #[test]
    fn weak_norm_of_inverse_radius() {
        let g = disc(400);
        let b = ScalarField::from_fn(g.clone(), |x| 1.0 / x[0]);
        let q = b.weak_lp_quasinorm(2.0).unwrap();
        assert!((q - PI.sqrt()).abs() / PI.sqrt() < 1e-3, "{q}");
        assert_eq!(ScalarField::zeros(g.clone()).weak_lp_quasinorm(2.0).unwrap(), 0.0);
        let c = ScalarField::constant(g.clone(), -3.0);
        let expected = 3.0 * g.quadrature(&vec![1.0; g.len()]).unwrap().sqrt();
        assert!((c.weak_lp_quasinorm(2.0).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn dual_norm_of_unit_source() {
        let g = unit_interval(400);
        let f = ScalarField::constant(g.clone(), 1.0);
        let expected = (1.0f64 / 12.0).sqrt();
        assert!((f.dual_sobolev_norm().unwrap() - expected).abs() / expected < 1e-3);
        assert_eq!(ScalarField::zeros(g).dual_sobolev_norm().unwrap(), 0.0);
    }

    #[test]
    fn dual_norm_inverts_the_discrete_laplacian() {
        let g = unit_interval(64);
        let mode: Vec<f64> = (0..64).map(|j| (PI * g.coord(j)[0]).sin()).collect();
        let f = operator::neg_laplacian(&g, &mode).unwrap();
        let got = dual_sobolev_norm_of(&g, &f).unwrap();
        let want = operator::gradient_energy(&g, &mode).unwrap().sqrt();
        assert!((got - want).abs() < 1e-10);
    }

    #[test]
    fn truncation_values() {
        let d = 0.4;
        assert_eq!(truncation(-1.0, d), 0.0);
        assert_eq!(truncation(d / 2.0, d), d / 2.0);
        assert_eq!(truncation(2.0 * d, d), d);
        let g = unit_interval(8);
        let f = ScalarField::constant(g.clone(), 3.0).truncate(d).unwrap();
        assert!(f.values().iter().all(|&v| v == d));
        assert!(ScalarField::zeros(g).truncate(0.0).is_err());
    }

    #[test]
    fn parts_of_a_field() {
        let g = unit_interval(4);
        let f = ScalarField::new(g, vec![-3.0, 1.0, 0.0, 2.0]).unwrap();
        assert_eq!(f.pos_part().values(), &[0.0, 1.0, 0.0, 2.0]);
        assert_eq!(f.neg_part().values(), &[3.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn steklov_of_constant_and_linear_trajectories() {
        let g = unit_interval(6);
        let time = TimeGrid::new(1.0, 20).unwrap();
        let c = ScalarField::from_fn(g.clone(), |x| x[0] * 2.0);
        let traj = Trajectory::constant(&c, time);
        let avg = steklov_average(&traj, 0.25).unwrap();
        assert_eq!(avg.time().steps(), 15);
        for s in avg.states() {
            for (a, b) in s.iter().zip(c.values()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        let lin = Trajectory::from_fn(g, time, |_, t| t);
        let avg = steklov_average(&lin, 0.25).unwrap();
        for k in 0..=avg.time().steps() {
            let t = time.time(k);
            assert!(avg.state(k).iter().all(|v| (v - (t + 0.125)).abs() < 1e-12));
        }
        assert!(steklov_average(&lin, 0.123).is_err());
        assert!(steklov_average(&lin, 1.0).is_err());
    }

    #[test]
    fn steklov_difference_quotient_is_second_order() {
        let g = unit_interval(4);
        let h = 0.2;
        let defect = |steps: usize| {
            let time = TimeGrid::new(1.0, steps).unwrap();
            let u = |t: f64| 1.0 + t - 3.0 * t * t;
            let traj = Trajectory::from_fn(g.clone(), time, |_, t| u(t));
            let avg = steklov_average(&traj, h).unwrap();
            let dt = time.dt();
            (0..avg.time().steps())
                .map(|k| {
                    let dq = (avg.state(k + 1)[0] - avg.state(k)[0]) / dt;
                    let mid = (k as f64 + 0.5) * dt;
                    (dq - (u(mid + h) - u(mid)) / h).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (defect(20), defect(40));
        assert!(e1 < 1e-10 || (e1 / e2).log2() > 1.9, "{e1} {e2}");
    }

    #[test]
    fn level_sets() {
        let g = unit_interval(10);
        let time = TimeGrid::new(2.0, 8).unwrap();
        let c = ScalarField::constant(g.clone(), 0.7);
        let traj = Trajectory::constant(&c, time);
        let r = level_set_report(&traj, 0.5).unwrap();
        assert!((r.measure - 2.0).abs() < 1e-12);
        let top = level_set_report(&traj, 0.7).unwrap();
        assert_eq!((top.measure, top.sup_energy, top.gradient_energy), (0.0, 0.0, 0.0));
        assert!(level_set_report(&traj, -1.0).is_err());
    }

    #[test]
    fn bochner_norms() {
        let time = TimeGrid::new(1.0, 10).unwrap();
        let ts = time.times();
        let s = NormSeries { times: ts.clone(), values: ts.clone() };
        assert_eq!(s.bochner_norm(TimeNorm::Sup), 1.0);
        let t3 = TimeGrid::new(3.0, 7).unwrap();
        let ones = NormSeries { times: t3.times(), values: vec![1.0; 8] };
        assert!((ones.bochner_norm(TimeNorm::L2) - 3.0f64.sqrt()).abs() < 1e-12);
        let c = NormSeries { times: ts, values: vec![0.3; 11] };
        assert_eq!(bochner_norm(&c, TimeNorm::Sup), 0.3);
    }
}
