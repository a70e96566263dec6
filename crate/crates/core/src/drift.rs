//! Drift catalog, divergence, non-spectral certification and mollification.

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::Serialize;

use crate::analytic;
use crate::error::{config, contract, Result};
use crate::fields::lp_norm_of;
use crate::grid::{Domain, SpaceGrid, TimeGrid};
use crate::solver::{advection_matrix, AdvectionScheme};
use crate::table::fmt_g17;

/// A drift field `b(x, t)`.
#[derive(Clone, Debug)]
pub enum DriftSpec {
    /// Spatially constant vector.
    Constant { value: Vec<f64> },
    /// `b(x) = scale · x · (1 + perturbation · |x|)` in any dimension.
    Linear { scale: f64, perturbation: f64 },
    /// `b(x) = α x/|x|²`.
    RadialPower { dim: usize, alpha: f64 },
    /// `b(x, t) = b₀(|x|, t) x/|x|²`.
    Nonuniqueness { dim: usize },
    /// `b^ε(x) = (n−2) x/|x|² − ε ln|x| x`.
    Instability { dim: usize, epsilon: f64 },
    /// Values stored on a grid, looked up at the nearest node.
    Sampled(Arc<SampledDrift>),
    /// Space-time mollification of `inner` at scale `scale`.
    Mollified { inner: Box<DriftSpec>, scale: f64, samples: Arc<SampledDrift> },
    /// `factor · inner`.
    Scaled { factor: f64, inner: Box<DriftSpec> },
}

/// Catalog keys accepted in configuration files.
pub const CATALOG_KINDS: [&str; 6] = ["constant", "linear", "radial_power", "nonuniqueness", "instability", "sampled"];

impl fmt::Display for DriftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftSpec::Constant { value } => write!(f, "constant({value:?})"),
            DriftSpec::Linear { scale, perturbation } => {
                write!(f, "linear(scale={scale}, perturbation={perturbation})")
            }
            DriftSpec::RadialPower { dim, alpha } => write!(f, "radial_power(n={dim}, alpha={alpha})"),
            DriftSpec::Nonuniqueness { dim } => write!(f, "nonuniqueness(n={dim})"),
            DriftSpec::Instability { dim, epsilon } => {
                write!(f, "instability(n={dim}, epsilon={epsilon})")
            }
            DriftSpec::Sampled(s) => write!(f, "sampled({} nodes)", s.grid.len()),
            DriftSpec::Mollified { inner, scale, .. } => write!(f, "mollified({inner}, scale={scale})"),
            DriftSpec::Scaled { factor, inner } => write!(f, "{factor}*{inner}"),
        }
    }
}

impl DriftSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            DriftSpec::Constant { .. } => "constant",
            DriftSpec::Linear { .. } => "linear",
            DriftSpec::RadialPower { .. } => "radial_power",
            DriftSpec::Nonuniqueness { .. } => "nonuniqueness",
            DriftSpec::Instability { .. } => "instability",
            DriftSpec::Sampled(_) => "sampled",
            DriftSpec::Mollified { .. } => "mollified",
            DriftSpec::Scaled { inner, .. } => inner.kind(),
        }
    }

    /// `factor · self`, flattening nested rescalings.
    pub fn scaled(&self, factor: f64) -> DriftSpec {
        match self {
            DriftSpec::Scaled { factor: g, inner } => DriftSpec::Scaled { factor: factor * g, inner: inner.clone() },
            other => DriftSpec::Scaled { factor, inner: Box::new(other.clone()) },
        }
    }

    /// Ambient dimension fixed by the spec, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            DriftSpec::Constant { value } => Some(value.len()),
            DriftSpec::Linear { .. } => None,
            DriftSpec::RadialPower { dim, .. }
            | DriftSpec::Nonuniqueness { dim }
            | DriftSpec::Instability { dim, .. } => Some(*dim),
            DriftSpec::Sampled(s) | DriftSpec::Mollified { samples: s, .. } => Some(s.grid.domain().dim()),
            DriftSpec::Scaled { inner, .. } => inner.dim(),
        }
    }

    pub fn is_steady(&self) -> bool {
        match self {
            DriftSpec::Nonuniqueness { .. } => false,
            DriftSpec::Sampled(s) | DriftSpec::Mollified { samples: s, .. } => s.time.is_none(),
            DriftSpec::Scaled { inner, .. } => inner.is_steady(),
            _ => true,
        }
    }

    fn is_singular(&self) -> bool {
        match self {
            DriftSpec::RadialPower { alpha, .. } => *alpha != 0.0,
            DriftSpec::Nonuniqueness { .. } => true,
            DriftSpec::Instability { dim, epsilon } => *dim != 2 || *epsilon != 0.0,
            DriftSpec::Scaled { inner, .. } => inner.is_singular(),
            _ => false,
        }
    }

    /// Checks that the drift can be evaluated on `grid`.
    pub fn check_compatible(&self, grid: &SpaceGrid) -> Result<()> {
        let n = grid.domain().dim();
        if let Some(d) = self.dim() {
            if d != n {
                return Err(config(format!("drift {self} lives in dimension {d} but the domain has dimension {n}")));
            }
        }
        if grid.domain().is_radial() {
            match self {
                DriftSpec::Constant { value } if value.iter().any(|&v| v != 0.0) => {
                    return Err(config("a nonzero constant drift is not radially symmetric"));
                }
                DriftSpec::Scaled { inner, .. } => return inner.check_compatible(grid),
                _ => {}
            }
        }
        if let DriftSpec::Sampled(s) | DriftSpec::Mollified { samples: s, .. } = self {
            if s.grid.domain().is_radial() != grid.domain().is_radial() {
                return Err(config("sampled drift and grid use different geometries"));
            }
        }
        Ok(())
    }

    /// `b(x, t)` at a point of `ℝⁿ`.
    pub fn eval(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if self.is_singular() && r == 0.0 {
            return Err(contract(format!("drift {self} is singular at the origin")));
        }
        let radial = |g: f64| x.iter().map(|v| g * v / (r * r)).collect::<Vec<f64>>();
        match self {
            DriftSpec::Constant { value } => {
                if value.len() != x.len() {
                    return Err(contract(format!(
                        "constant drift has {} components, point has {}",
                        value.len(),
                        x.len()
                    )));
                }
                Ok(value.clone())
            }
            DriftSpec::Linear { scale, perturbation } => {
                let c = scale * (1.0 + perturbation * r);
                Ok(x.iter().map(|v| c * v).collect())
            }
            DriftSpec::RadialPower { alpha, .. } => Ok(radial(*alpha)),
            DriftSpec::Nonuniqueness { dim } => {
                if !(t > 0.0) {
                    return Err(contract(format!("nonuniqueness drift needs t > 0, got {t}")));
                }
                Ok(radial(analytic::b0(*dim, r, t)))
            }
            DriftSpec::Instability { dim, epsilon } => {
                let m = *dim as f64 - 2.0;
                Ok(x.iter().map(|v| m * v / (r * r) - epsilon * r.ln() * v).collect())
            }
            DriftSpec::Sampled(s) | DriftSpec::Mollified { samples: s, .. } => s.eval(x, t),
            DriftSpec::Scaled { factor, inner } => Ok(inner.eval(x, t)?.into_iter().map(|v| factor * v).collect()),
        }
    }

    /// Components along the grid axes at a node: the radial component on
    /// radial grids, the Cartesian components otherwise.
    pub fn grid_components(&self, grid: &SpaceGrid, node: usize, t: f64) -> Result<Vec<f64>> {
        match self {
            DriftSpec::Sampled(s) | DriftSpec::Mollified { samples: s, .. } => Ok(s.at_coord(grid.coord(node), t)),
            DriftSpec::Scaled { factor, inner } => {
                Ok(inner.grid_components(grid, node, t)?.into_iter().map(|v| factor * v).collect())
            }
            _ => {
                let b = self.eval(&grid.ambient_point(node), t)?;
                Ok(if grid.domain().is_radial() { vec![b[0]] } else { b })
            }
        }
    }

    /// Grid components at every node.
    pub fn sample(&self, grid: &SpaceGrid, t: f64) -> Result<Vec<Vec<f64>>> {
        (0..grid.len()).map(|j| self.grid_components(grid, j, t)).collect()
    }

    /// Closed-form divergence at a point, for the analytic kinds.
    pub fn closed_form_divergence(&self, x: &[f64], t: f64) -> Option<f64> {
        let n = x.len();
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        match self {
            DriftSpec::Constant { .. } => Some(0.0),
            DriftSpec::Linear { scale, perturbation } => Some(scale * (n as f64 + perturbation * (n as f64 + 1.0) * r)),
            DriftSpec::RadialPower { alpha, .. } => Some(analytic::radial_field_divergence(n, r, *alpha, 0.0)),
            DriftSpec::Nonuniqueness { dim } => {
                Some(analytic::radial_field_divergence(n, r, analytic::b0(*dim, r, t), analytic::b0_dr(*dim, r, t)))
            }
            DriftSpec::Instability { dim, epsilon } => Some(analytic::instability_divergence(*dim, *epsilon, r)),
            DriftSpec::Sampled(_) | DriftSpec::Mollified { .. } => None,
            DriftSpec::Scaled { factor, inner } => inner.closed_form_divergence(x, t).map(|d| factor * d),
        }
    }

    /// Divergence at every node: closed form for analytic kinds, the
    /// discrete adjoint deficit of upwind advection otherwise.
    pub fn divergence(&self, grid: &SpaceGrid, t: f64) -> Result<Vec<f64>> {
        self.check_compatible(grid)?;
        let closed: Option<Vec<f64>> =
            (0..grid.len()).map(|j| self.closed_form_divergence(&grid.ambient_point(j), t)).collect();
        match closed {
            Some(d) => Ok(d),
            None => Ok(discrete_divergence(grid, &self.sample(grid, t)?)),
        }
    }
}

/// `−(Σ_j w_j A_{ji}) / w_i` for the upwind advection matrix `A`: the amount by
/// which the weighted column sums of `A` fall short of zero.
pub fn discrete_divergence(grid: &SpaceGrid, drift: &[Vec<f64>]) -> Vec<f64> {
    let a = advection_matrix(grid, drift, AdvectionScheme::Upwind);
    let w = grid.weights();
    let mut col = vec![0.0; grid.len()];
    for (i, wi) in w.iter().enumerate() {
        for j in a.row_range(i) {
            col[j] += wi * a.get(i, j);
        }
    }
    col.iter().zip(w).map(|(c, wj)| -c / wj).collect()
}

/// Drift values on a grid, one slice per time node or a single steady slice.
#[derive(Clone, Debug)]
pub struct SampledDrift {
    grid: Arc<SpaceGrid>,
    time: Option<TimeGrid>,
    /// `values[slice][node][axis]`.
    values: Vec<Vec<Vec<f64>>>,
}

impl SampledDrift {
    pub fn new(grid: Arc<SpaceGrid>, time: Option<TimeGrid>, values: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let slices = time.map_or(1, |t| t.steps() + 1);
        if values.len() != slices {
            return Err(contract(format!("sampled drift has {} time slices, expected {slices}", values.len())));
        }
        let axes = grid.shape().len();
        for slice in &values {
            grid.check_len(slice)?;
            if slice.iter().any(|b| b.len() != axes) {
                return Err(contract(format!("sampled drift needs {axes} components per node")));
            }
        }
        Ok(Self { grid, time, values })
    }

    /// Samples `spec` at every node, at every time node unless it is steady.
    pub fn from_spec(spec: &DriftSpec, grid: Arc<SpaceGrid>, time: &TimeGrid) -> Result<Self> {
        spec.check_compatible(&grid)?;
        let (slot, values) = if spec.is_steady() {
            (None, vec![spec.sample(&grid, time.horizon())?])
        } else {
            let v = time.times().iter().map(|&t| spec.sample(&grid, t)).collect::<Result<_>>()?;
            (Some(*time), v)
        };
        Self::new(grid, slot, values)
    }

    pub fn grid(&self) -> &Arc<SpaceGrid> {
        &self.grid
    }

    pub fn time(&self) -> Option<&TimeGrid> {
        self.time.as_ref()
    }

    pub fn slices(&self) -> &[Vec<Vec<f64>>] {
        &self.values
    }

    fn slice(&self, t: f64) -> &[Vec<f64>] {
        match self.time {
            None => &self.values[0],
            Some(tg) => &self.values[tg.nearest_index(t)],
        }
    }

    /// Grid components at the node nearest to `coord` (grid coordinates).
    pub fn at_coord(&self, coord: &[f64], t: f64) -> Vec<f64> {
        self.slice(t)[self.grid.nearest_node(coord)].clone()
    }

    /// Radial component at radius `r`, linear in `r` between nodes,
    /// proportional to `r` below the first node and constant past the last.
    pub fn radial_interpolate(&self, r: f64, t: f64) -> f64 {
        let s = self.slice(t);
        let h = self.grid.spacing(0);
        let first = self.grid.coord(0)[0];
        if r <= first {
            return s[0][0] * r / first;
        }
        let pos = (r - first) / h;
        let j = pos.floor() as usize;
        if j + 1 >= s.len() {
            return s[s.len() - 1][0];
        }
        let th = pos - j as f64;
        (1.0 - th) * s[j][0] + th * s[j + 1][0]
    }

    fn eval(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        if self.grid.domain().is_radial() {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r == 0.0 {
                return Ok(vec![0.0; x.len()]);
            }
            let beta = self.radial_interpolate(r, t);
            Ok(x.iter().map(|v| beta * v / r).collect())
        } else {
            Ok(self.at_coord(x, t))
        }
    }

    /// CSV with columns `time_index, node, b0[, b1]`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let comps: Vec<String> = (0..self.grid.shape().len()).map(|a| format!("b{a}")).collect();
        writeln!(out, "time_index,node,{}", comps.join(","))?;
        for (k, slice) in self.values.iter().enumerate() {
            for (j, b) in slice.iter().enumerate() {
                let cells: Vec<String> = b.iter().map(|v| fmt_g17(*v)).collect();
                writeln!(out, "{k},{j},{}", cells.join(","))?;
            }
        }
        Ok(())
    }

    /// Reads the format of [`SampledDrift::write_csv`]. A single time slice
    /// means a steady drift; otherwise there must be one slice per time node.
    pub fn read_csv<R: BufRead>(input: R, grid: Arc<SpaceGrid>, time: &TimeGrid) -> Result<Self> {
        let axes = grid.shape().len();
        let mut values: Vec<Vec<Vec<f64>>> = Vec::new();
        for (line_no, line) in input.lines().enumerate().skip(1) {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || config(format!("sampled drift CSV line {}: malformed row", line_no + 1));
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != 2 + axes {
                return Err(bad());
            }
            let k: usize = cells[0].parse().map_err(|_| bad())?;
            let j: usize = cells[1].parse().map_err(|_| bad())?;
            let b: Vec<f64> = cells[2..].iter().map(|c| c.parse().map_err(|_| bad())).collect::<Result<_>>()?;
            if k >= values.len() {
                values.resize(k + 1, vec![vec![f64::NAN; axes]; grid.len()]);
            }
            if j >= grid.len() {
                return Err(config(format!(
                    "sampled drift CSV line {}: node {j} outside grid of {} nodes",
                    line_no + 1,
                    grid.len()
                )));
            }
            values[k][j] = b;
        }
        if values.iter().flatten().flatten().any(|v| v.is_nan()) || values.is_empty() {
            return Err(config("sampled drift CSV does not cover every node of every slice"));
        }
        let slot = if values.len() == 1 { None } else { Some(*time) };
        Self::new(grid, slot, values)
    }
}

/// Result of testing `div b ≤ tol` on a set of nodes and times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonSpectralReport {
    /// Largest divergence found: closed form for analytic drifts,
    /// discrete adjoint deficit for sampled ones.
    pub max_divergence: f64,
    /// Largest discrete adjoint deficit, reported for every kind.
    pub max_discrete_divergence: f64,
    pub passed: bool,
    pub tolerance: f64,
    pub method: &'static str,
    /// Grid coordinates and time of the maximizer.
    pub argmax: Vec<f64>,
    pub argmax_time: f64,
    pub tested_nodes: usize,
    pub tested_times: usize,
}

/// Default tolerance `1e−10 · (1 + max|b|/h)`.
pub fn default_tolerance(max_drift: f64, h: f64) -> f64 {
    1e-10 * (1.0 + max_drift / h)
}

/// Certifies `div b ≤ tol` at every node and every time node `t_1 … t_K`
/// (one evaluation for steady drifts). `tol = None` selects the default.
pub fn check_nonspectral(
    spec: &DriftSpec,
    grid: &SpaceGrid,
    times: &TimeGrid,
    tol: Option<f64>,
) -> Result<NonSpectralReport> {
    let all: Vec<usize> = (0..grid.len()).collect();
    check_nonspectral_on(spec, grid, times, tol, &all)
}

/// [`check_nonspectral`] restricted to the nodes in `region`.
pub fn check_nonspectral_on(
    spec: &DriftSpec,
    grid: &SpaceGrid,
    times: &TimeGrid,
    tol: Option<f64>,
    region: &[usize],
) -> Result<NonSpectralReport> {
    spec.check_compatible(grid)?;
    if let Some(t) = tol {
        if !(t >= 0.0) {
            return Err(contract(format!("non-spectral tolerance must be ≥ 0, got {t}")));
        }
    }
    let eval_times: Vec<f64> =
        if spec.is_steady() { vec![times.horizon()] } else { (1..=times.steps()).map(|k| times.time(k)).collect() };
    let closed = spec.closed_form_divergence(&grid.ambient_point(0), eval_times[0]).is_some();
    let mut best = (f64::NEG_INFINITY, 0usize, eval_times[0]);
    let mut best_discrete = f64::NEG_INFINITY;
    let mut max_drift = 0.0f64;
    for &t in &eval_times {
        let b = spec.sample(grid, t)?;
        let discrete = discrete_divergence(grid, &b);
        let primary = if closed { spec.divergence(grid, t)? } else { discrete.clone() };
        for &j in region {
            max_drift = max_drift.max(b[j].iter().map(|v| v * v).sum::<f64>().sqrt());
            best_discrete = best_discrete.max(discrete[j]);
            if primary[j] > best.0 {
                best = (primary[j], j, t);
            }
        }
    }
    let tolerance = tol.unwrap_or_else(|| default_tolerance(max_drift, grid.h()));
    Ok(NonSpectralReport {
        max_divergence: best.0,
        max_discrete_divergence: best_discrete,
        passed: best.0 <= tolerance,
        tolerance,
        method: if closed { "closed_form" } else { "discrete_adjoint" },
        argmax: grid.coord(best.1).to_vec(),
        argmax_time: best.2,
        tested_nodes: region.len(),
        tested_times: eval_times.len(),
    })
}

/// Mollifier with the bump kernel `exp(−1/(1−|z|²))` on the unit space-time
/// ball, rescaled to radius `scale` and normalized on the sampling lattice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MollifierConfig {
    pub scale: f64,
}

/// One lattice point of a discrete kernel: spatial offset, time offset, weight.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelPoint {
    pub offset: Vec<f64>,
    pub lag: f64,
    pub weight: f64,
}

/// Unnormalized bump profile at `|z| = s`.
pub fn bump(s: f64) -> f64 {
    if s < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

impl MollifierConfig {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(config(format!("mollifier scale must be positive, got {scale}")));
        }
        Ok(Self { scale })
    }

    /// Kernel restricted to the lattice `spacing · ℤᵈ × dt · ℤ` (time axis
    /// omitted when `dt` is `None`), weights summing to one.
    pub fn lattice(&self, spacing: &[f64], dt: Option<f64>) -> Vec<KernelPoint> {
        let eps = self.scale;
        let reach: Vec<i64> = spacing.iter().map(|h| (eps / h).ceil() as i64).collect();
        let lag_reach = dt.map_or(0, |d| (eps / d).ceil() as i64);
        let mut points = Vec::new();
        let mut idx = vec![0i64; spacing.len()];
        let first: Vec<i64> = reach.iter().map(|r| -r).collect();
        idx.copy_from_slice(&first);
        loop {
            let offset: Vec<f64> = idx.iter().zip(spacing).map(|(i, h)| *i as f64 * h).collect();
            let s2: f64 = offset.iter().map(|v| v * v).sum::<f64>() / (eps * eps);
            for l in -lag_reach..=lag_reach {
                let lag = dt.map_or(0.0, |d| l as f64 * d);
                let s = (s2 + lag * lag / (eps * eps)).sqrt();
                let weight = bump(s);
                if weight > 0.0 {
                    points.push(KernelPoint { offset: offset.clone(), lag, weight });
                }
            }
            // odometer over the spatial offsets
            let mut a = 0;
            loop {
                if a == idx.len() {
                    let total: f64 = points.iter().map(|p| p.weight).sum();
                    if total == 0.0 {
                        return vec![KernelPoint { offset: vec![0.0; spacing.len()], lag: 0.0, weight: 1.0 }];
                    }
                    points.iter_mut().for_each(|p| p.weight /= total);
                    return points;
                }
                idx[a] += 1;
                if idx[a] <= reach[a] {
                    break;
                }
                idx[a] = first[a];
                a += 1;
            }
        }
    }
}

/// Space-time convolution `ω_ε ∗ b`, with `b` extended by zero outside `Ω`
/// and times clamped to `[0, T]`, sampled at every node (and every time node
/// unless `spec` is steady).
pub fn mollify(spec: &DriftSpec, cfg: &MollifierConfig, grid: &Arc<SpaceGrid>, times: &TimeGrid) -> Result<DriftSpec> {
    spec.check_compatible(grid)?;
    let inradius = grid.domain().inradius();
    if cfg.scale >= inradius {
        return Err(config(format!(
            "mollifier scale {} leaves no interior subdomain (inradius {inradius})",
            cfg.scale
        )));
    }
    let steady = spec.is_steady();
    let dt = if steady { None } else { Some(times.dt()) };
    let sample_times: Vec<f64> = if steady { vec![times.horizon()] } else { times.times() };
    let horizon = times.horizon();
    let mut values = Vec::with_capacity(sample_times.len());
    match *grid.domain() {
        Domain::RadialBall { dim, radius } => {
            let h = grid.spacing(0);
            let step = h.min(cfg.scale / 8.0);
            let kernel = cfg.lattice(&vec![step; dim], dt);
            for &t in &sample_times {
                let mut slice = Vec::with_capacity(grid.len());
                for j in 0..grid.len() {
                    let x = grid.ambient_point(j);
                    let mut acc = 0.0;
                    for p in &kernel {
                        let y: Vec<f64> = x.iter().zip(&p.offset).map(|(a, b)| a - b).collect();
                        let ry = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                        if ry >= radius || ry < 1e-12 * radius {
                            continue;
                        }
                        let s = (t - p.lag).clamp(0.0, horizon);
                        acc += p.weight * spec.eval(&y, s)?[0];
                    }
                    slice.push(vec![acc]);
                }
                values.push(slice);
            }
        }
        _ => {
            let shape = grid.shape().to_vec();
            let spacing: Vec<f64> = (0..shape.len()).map(|a| grid.spacing(a)).collect();
            let kernel = cfg.lattice(&spacing, dt);
            let shifts: Vec<Vec<i64>> = kernel
                .iter()
                .map(|p| p.offset.iter().zip(&spacing).map(|(o, h)| (o / h).round() as i64).collect())
                .collect();
            for &t in &sample_times {
                let mut slice = Vec::with_capacity(grid.len());
                for j in 0..grid.len() {
                    let pos: Vec<i64> = match shape.len() {
                        1 => vec![j as i64],
                        _ => vec![(j / shape[1]) as i64, (j % shape[1]) as i64],
                    };
                    let mut acc = vec![0.0; shape.len()];
                    for (p, sh) in kernel.iter().zip(&shifts) {
                        let q: Vec<i64> = pos.iter().zip(sh).map(|(a, b)| a - b).collect();
                        if q.iter().zip(&shape).any(|(&v, &n)| v < 0 || v >= n as i64) {
                            continue;
                        }
                        let node = match shape.len() {
                            1 => q[0] as usize,
                            _ => q[0] as usize * shape[1] + q[1] as usize,
                        };
                        let s = (t - p.lag).clamp(0.0, horizon);
                        let b = spec.grid_components(grid, node, s)?;
                        for (a, v) in acc.iter_mut().zip(b) {
                            *a += p.weight * v;
                        }
                    }
                    slice.push(acc);
                }
                values.push(slice);
            }
        }
    }
    let samples = SampledDrift::new(grid.clone(), if steady { None } else { Some(*times) }, values)?;
    Ok(DriftSpec::Mollified { inner: Box::new(spec.clone()), scale: cfg.scale, samples: Arc::new(samples) })
}

/// `‖b₁ − b₂‖_{L₂(Q_T)}` on `grid`, right-endpoint rule in time; nodes outside
/// `mask` (when given) count `b₁` as zero.
pub fn drift_distance(
    b1: &DriftSpec,
    b2: &DriftSpec,
    grid: &SpaceGrid,
    times: &TimeGrid,
    mask: Option<&[bool]>,
) -> Result<f64> {
    let mut total = 0.0;
    for k in 1..=times.steps() {
        let t = times.time(k);
        let (s1, s2) = (b1.sample(grid, t)?, b2.sample(grid, t)?);
        let d: Vec<f64> = (0..grid.len())
            .map(|j| {
                let keep = mask.map_or(true, |m| m[j]);
                s1[j]
                    .iter()
                    .zip(&s2[j])
                    .map(|(a, b)| {
                        let a = if keep { *a } else { 0.0 };
                        (a - b) * (a - b)
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        total += times.dt() * lp_norm_of(grid, &d, 2.0)?.powi(2);
    }
    Ok(total.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn catalog_spot_values() {
        let b = DriftSpec::RadialPower { dim: 3, alpha: 3.0 }.eval(&[0.5, 0.0, 0.0], 0.0).unwrap();
        assert!((b[0] - 6.0).abs() < 1e-14 && b[1] == 0.0);
        let r = (-1.0f64).exp();
        let b = DriftSpec::Instability { dim: 2, epsilon: 0.5 }.eval(&[r, 0.0], 0.0).unwrap();
        assert!((b[0] - 0.5 * r).abs() < 1e-15);
        assert!(DriftSpec::RadialPower { dim: 2, alpha: 1.0 }.eval(&[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn closed_form_divergences() {
        let x = [0.3, -0.4];
        assert_eq!(DriftSpec::Linear { scale: 1.0, perturbation: 0.0 }.closed_form_divergence(&x, 0.0), Some(2.0));
        let d = DriftSpec::Instability { dim: 2, epsilon: 0.5 }.closed_form_divergence(&x, 0.0).unwrap();
        assert!((d - (-0.5 * (2.0 * 0.5f64.ln() + 1.0))).abs() < 1e-14);
        assert!(d > 0.0);
    }

    #[test]
    fn linear_divergence_matches_difference_quotient() {
        let b = DriftSpec::Linear { scale: -1.3, perturbation: 0.5 };
        let x = [0.2, 0.35];
        let h = 1e-6;
        let mut fd = 0.0;
        for a in 0..2 {
            let (mut p, mut m) = (x, x);
            p[a] += h;
            m[a] -= h;
            fd += (b.eval(&p, 0.0).unwrap()[a] - b.eval(&m, 0.0).unwrap()[a]) / (2.0 * h);
        }
        assert!((fd - b.closed_form_divergence(&x, 0.0).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn certificate_signs() {
        let g = build_grid(&Domain::interval(0.0, 1.0).unwrap(), 10).unwrap();
        let tg = TimeGrid::new(1.0, 4).unwrap();
        let rep = check_nonspectral(&DriftSpec::Linear { scale: -1.0, perturbation: 0.0 }, &g, &tg, None).unwrap();
        assert!(rep.passed && (rep.max_divergence + 1.0).abs() < 1e-14);
        assert!(rep.max_discrete_divergence <= 1e-12);
        let rep = check_nonspectral(&DriftSpec::Linear { scale: 1.0, perturbation: 0.0 }, &g, &tg, None).unwrap();
        assert!(!rep.passed && (rep.max_divergence - 1.0).abs() < 1e-14);
    }

    #[test]
    fn discrete_divergence_of_linear_field() {
        let g = build_grid(&Domain::interval(-1.0, 1.0).unwrap(), 20).unwrap();
        let b: Vec<Vec<f64>> = (0..g.len()).map(|j| vec![-g.coord(j)[0]]).collect();
        let d = discrete_divergence(&g, &b);
        for (j, v) in d.iter().enumerate() {
            if !g.boundary_mask()[j] && g.coord(j)[0].abs() > 0.1 {
                assert!((v + 1.0).abs() < 1e-12, "{v}");
            }
        }
    }

    #[test]
    fn kernel_is_normalized_and_even() {
        let cfg = MollifierConfig::new(0.3).unwrap();
        let k = cfg.lattice(&[0.05, 0.05], Some(0.1));
        let mass: f64 = k.iter().map(|p| p.weight).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        for p in &k {
            let neg =
                k.iter().find(|q| q.lag == -p.lag && q.offset.iter().zip(&p.offset).all(|(a, b)| *a == -*b)).unwrap();
            assert_eq!(neg.weight, p.weight);
        }
    }

    #[test]
    fn mollification_reproduces_affine_fields_inside() {
        let g = Arc::new(build_grid(&Domain::interval(-1.0, 1.0).unwrap(), 100).unwrap());
        let tg = TimeGrid::new(1.0, 10).unwrap();
        let eps = 0.1;
        let b = DriftSpec::Linear { scale: -2.0, perturbation: 0.0 };
        let m = mollify(&b, &MollifierConfig::new(eps).unwrap(), &g, &tg).unwrap();
        for j in 0..g.len() {
            let x = g.coord(j)[0];
            if 1.0 - x.abs() > eps + g.h() {
                let v = m.grid_components(&g, j, 0.5).unwrap()[0];
                assert!((v + 2.0 * x).abs() < 1e-12, "{x} {v}");
            }
        }
        let c = DriftSpec::Constant { value: vec![0.7] };
        let m = mollify(&c, &MollifierConfig::new(eps).unwrap(), &g, &tg).unwrap();
        assert!((m.grid_components(&g, 50, 0.5).unwrap()[0] - 0.7).abs() < 1e-14);
    }

    #[test]
    fn sampled_csv_round_trip() {
        let g = Arc::new(build_grid(&Domain::interval(0.0, 1.0).unwrap(), 6).unwrap());
        let tg = TimeGrid::new(1.0, 2).unwrap();
        let b = DriftSpec::Linear { scale: -1.0, perturbation: 0.25 };
        let s = SampledDrift::from_spec(&b, g.clone(), &tg).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = SampledDrift::read_csv(&buf[..], g.clone(), &tg).unwrap();
        assert_eq!(back.slices(), s.slices());
        assert!(back.time().is_none());
    }
}
