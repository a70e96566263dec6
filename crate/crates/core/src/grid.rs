//! Spatial and temporal discretizations.
//!
//! All spatial grids are cell-centered: every node sits at the center of a
//! cell and carries the cell measure as its quadrature weight. Homogeneous
//! Dirichlet data lives on the cell faces that coincide with the boundary,
//! so no node is ever placed on `∂Ω`. Balls are handled through the radial
//! reduction, with the first node at `r = h/2`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{config, contract, Error, Result};

/// Smallest admissible number of cells per axis.
pub const MIN_RESOLUTION: usize = 4;

/// Spatial domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Interval {
        lo: f64,
        hi: f64,
    },
    Rectangle {
        lo: [f64; 2],
        hi: [f64; 2],
    },
    /// `{x ∈ ℝⁿ : |x| < radius}` with radially symmetric data.
    RadialBall {
        dim: usize,
        radius: f64,
    },
}

impl Domain {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        let d = Domain::Interval { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn rectangle(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        let d = Domain::Rectangle { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn radial_ball(dim: usize, radius: f64) -> Result<Self> {
        let d = Domain::RadialBall { dim, radius };
        d.validate()?;
        Ok(d)
    }

    /// Unit ball `{|x| < 1}` in `ℝⁿ`.
    pub fn unit_ball(dim: usize) -> Result<Self> {
        Self::radial_ball(dim, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && lo < hi;
        match *self {
            Domain::Interval { lo, hi } if !ordered(lo, hi) => {
                Err(config(format!("interval bounds must satisfy lo < hi, got [{lo}, {hi}]")))
            }
            Domain::Rectangle { lo, hi } if !(ordered(lo[0], hi[0]) && ordered(lo[1], hi[1])) => {
                Err(config(format!("rectangle bounds must be strictly ordered per axis, got {lo:?}..{hi:?}")))
            }
            Domain::RadialBall { dim, .. } if dim == 0 => Err(config("ball dimension n must be at least 1")),
            Domain::RadialBall { radius, .. } if !(radius.is_finite() && radius > 0.0) => {
                Err(config(format!("ball radius must be positive, got {radius}")))
            }
            _ => Ok(()),
        }
    }

    /// Ambient dimension `n`.
    pub fn dim(&self) -> usize {
        match *self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
            Domain::RadialBall { dim, .. } => dim,
        }
    }

    /// Number of discretized axes (1 for intervals and radial balls).
    pub fn axes(&self) -> usize {
        match self {
            Domain::Rectangle { .. } => 2,
            _ => 1,
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self, Domain::RadialBall { .. })
    }

    /// Closed-form Lebesgue measure `|Ω|`.
    pub fn volume(&self) -> f64 {
        match *self {
            Domain::Interval { lo, hi } => hi - lo,
            Domain::Rectangle { lo, hi } => (hi[0] - lo[0]) * (hi[1] - lo[1]),
            Domain::RadialBall { dim, radius } => unit_ball_volume(dim) * radius.powi(dim as i32),
        }
    }

    /// Radius of the largest ball contained in the domain.
    pub fn inradius(&self) -> f64 {
        match *self {
            Domain::Interval { lo, hi } => 0.5 * (hi - lo),
            Domain::Rectangle { lo, hi } => 0.5 * (hi[0] - lo[0]).min(hi[1] - lo[1]),
            Domain::RadialBall { radius, .. } => radius,
        }
    }

    /// Distance from a point given in grid coordinates (radius for balls) to `∂Ω`.
    pub fn distance_to_boundary(&self, coord: &[f64]) -> f64 {
        match *self {
            Domain::Interval { lo, hi } => (coord[0] - lo).min(hi - coord[0]),
            Domain::Rectangle { lo, hi } => {
                (0..2).map(|a| (coord[a] - lo[a]).min(hi[a] - coord[a])).fold(f64::INFINITY, f64::min)
            }
            Domain::RadialBall { radius, .. } => radius - coord[0],
        }
    }
}

/// Volume of the unit ball in `ℝⁿ`, `π^{n/2} / Γ(n/2 + 1)`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_n = 2π/n · V_{n-2}
    let mut v = if dim % 2 == 0 { 1.0 } else { 2.0 };
    let mut k = if dim % 2 == 0 { 2 } else { 3 };
    while k <= dim {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    v
}

/// Surface area of the unit sphere `S^{n-1}`; equals 2 for `n = 1`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    dim as f64 * unit_ball_volume(dim)
}

/// What sits across a cell face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Neighbor {
    Node(usize),
    /// Face on `∂Ω` carrying the homogeneous Dirichlet condition.
    Dirichlet,
    /// Zero-flux face at `r = 0` of a radial grid.
    Symmetry,
}

/// A cell face: neighbor plus the diffusive conductance `face measure / distance`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Link {
    pub neighbor: Neighbor,
    pub conductance: f64,
}

/// Face pair of one node along one axis: `[lower, upper]`.
pub type AxisLinks = [Link; 2];

/// Cell-centered spatial grid with quadrature weights and face topology.
#[derive(Clone, Debug)]
pub struct SpaceGrid {
    domain: Domain,
    shape: Vec<usize>,
    spacing: Vec<f64>,
    coords: Vec<Vec<f64>>,
    weights: Vec<f64>,
    boundary: Vec<bool>,
    links: Vec<Vec<AxisLinks>>,
}

/// Builds the cell-centered grid with `resolution` cells per axis.
pub fn build_grid(domain: &Domain, resolution: usize) -> Result<SpaceGrid> {
    SpaceGrid::new(domain, resolution)
}

impl SpaceGrid {
    pub fn new(domain: &Domain, resolution: usize) -> Result<Self> {
        domain.validate()?;
        if resolution < MIN_RESOLUTION {
            return Err(config(format!("resolution must be at least {MIN_RESOLUTION}, got {resolution}")));
        }
        let n = resolution;
        let centers = |lo: f64, hi: f64| -> (f64, Vec<f64>) {
            let h = (hi - lo) / n as f64;
            (h, (0..n).map(|j| lo + (j as f64 + 0.5) * h).collect())
        };
        match *domain {
            Domain::Interval { lo, hi } => {
                let (h, xs) = centers(lo, hi);
                let coords = xs.into_iter().map(|x| vec![x]).collect();
                Ok(Self::assemble(domain.clone(), vec![n], vec![h], coords))
            }
            Domain::RadialBall { radius, .. } => {
                let (h, rs) = centers(0.0, radius);
                let coords = rs.into_iter().map(|r| vec![r]).collect();
                Ok(Self::assemble(domain.clone(), vec![n], vec![h], coords))
            }
            Domain::Rectangle { lo, hi } => {
                let (hx, xs) = centers(lo[0], hi[0]);
                let (hy, ys) = centers(lo[1], hi[1]);
                let mut coords = Vec::with_capacity(n * n);
                for x in &xs {
                    for y in &ys {
                        coords.push(vec![*x, *y]);
                    }
                }
                Ok(Self::assemble(domain.clone(), vec![n, n], vec![hx, hy], coords))
            }
        }
    }

    fn assemble(domain: Domain, shape: Vec<usize>, spacing: Vec<f64>, coords: Vec<Vec<f64>>) -> Self {
        let len = coords.len();
        let mut weights = Vec::with_capacity(len);
        let mut links = Vec::with_capacity(len);
        match domain {
            Domain::Interval { .. } => {
                let (n, h) = (shape[0], spacing[0]);
                for j in 0..n {
                    weights.push(h);
                    let k = 1.0 / h;
                    let lower = if j == 0 { Neighbor::Dirichlet } else { Neighbor::Node(j - 1) };
                    let upper = if j + 1 == n { Neighbor::Dirichlet } else { Neighbor::Node(j + 1) };
                    links.push(vec![[
                        Link { neighbor: lower, conductance: k },
                        Link { neighbor: upper, conductance: k },
                    ]]);
                }
            }
            Domain::RadialBall { dim, .. } => {
                let (n, h) = (shape[0], spacing[0]);
                let area = unit_sphere_area(dim);
                let p = dim as i32 - 1;
                for (j, c) in coords.iter().enumerate() {
                    let r = c[0];
                    weights.push(area * r.powi(p) * h);
                    let lower = if j == 0 {
                        Link { neighbor: Neighbor::Symmetry, conductance: 0.0 }
                    } else {
                        Link { neighbor: Neighbor::Node(j - 1), conductance: area * (j as f64 * h).powi(p) / h }
                    };
                    let upper_neighbor = if j + 1 == n { Neighbor::Dirichlet } else { Neighbor::Node(j + 1) };
                    let upper = Link { neighbor: upper_neighbor, conductance: area * ((j + 1) as f64 * h).powi(p) / h };
                    links.push(vec![[lower, upper]]);
                }
            }
            Domain::Rectangle { .. } => {
                let (nx, ny) = (shape[0], shape[1]);
                let (hx, hy) = (spacing[0], spacing[1]);
                for ix in 0..nx {
                    for iy in 0..ny {
                        weights.push(hx * hy);
                        let idx = ix * ny + iy;
                        let kx = hy / hx;
                        let ky = hx / hy;
                        let side = |cond: bool, other: usize, k: f64| Link {
                            neighbor: if cond { Neighbor::Dirichlet } else { Neighbor::Node(other) },
                            conductance: k,
                        };
                        links.push(vec![
                            [side(ix == 0, idx.wrapping_sub(ny), kx), side(ix + 1 == nx, idx + ny, kx)],
                            [side(iy == 0, idx.wrapping_sub(1), ky), side(iy + 1 == ny, idx + 1, ky)],
                        ]);
                    }
                }
            }
        }
        let boundary = links
            .iter()
            .map(|axes: &Vec<AxisLinks>| axes.iter().flatten().any(|l| l.neighbor == Neighbor::Dirichlet))
            .collect();
        Self { domain, shape, spacing, coords, weights, boundary, links }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Cells along the first axis.
    pub fn resolution(&self) -> usize {
        self.shape[0]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    /// Largest spacing over the axes.
    pub fn h(&self) -> f64 {
        self.spacing.iter().copied().fold(0.0, f64::max)
    }

    /// Grid coordinates of a node (the radius for radial grids).
    pub fn coord(&self, node: usize) -> &[f64] {
        &self.coords[node]
    }

    /// Node position in `ℝⁿ`; radial nodes are placed on the first axis.
    pub fn ambient_point(&self, node: usize) -> Vec<f64> {
        match self.domain {
            Domain::RadialBall { dim, .. } => {
                let mut x = vec![0.0; dim];
                x[0] = self.coords[node][0];
                x
            }
            _ => self.coords[node].clone(),
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn links(&self, node: usize) -> &[AxisLinks] {
        &self.links[node]
    }

    pub fn distance_to_boundary(&self, node: usize) -> f64 {
        self.domain.distance_to_boundary(&self.coords[node])
    }

    /// `Σ values_j · w_j`.
    pub fn quadrature(&self, values: &[f64]) -> Result<f64> {
        self.check_len(values)?;
        Ok(values.iter().zip(&self.weights).map(|(v, w)| v * w).sum())
    }

    pub(crate) fn check_len<T>(&self, values: &[T]) -> Result<()> {
        if values.len() != self.len() {
            return Err(contract(format!("field has {} values but the grid has {} nodes", values.len(), self.len())));
        }
        Ok(())
    }

    /// Same domain with twice the resolution; spacing halves exactly.
    pub fn refine(&self) -> Result<Self> {
        Self::new(&self.domain, 2 * self.resolution())
    }

    /// Nearest node to a point given in grid coordinates.
    pub fn nearest_node(&self, coord: &[f64]) -> usize {
        let lo = match self.domain {
            Domain::Interval { .. } | Domain::Rectangle { .. } => {
                (0..self.shape.len()).map(|a| self.coords[0][a] - 0.5 * self.spacing[a]).collect()
            }
            Domain::RadialBall { .. } => vec![self.coords[0][0] - 0.5 * self.spacing[0]],
        };
        let index = |a: usize| -> usize {
            let s = ((coord[a] - lo[a]) / self.spacing[a]).floor();
            (s.max(0.0) as usize).min(self.shape[a] - 1)
        };
        match self.shape.len() {
            1 => index(0),
            _ => index(0) * self.shape[1] + index(1),
        }
    }

    /// Grid of the cells lying at distance at least `distance` from `∂Ω`,
    /// reusing the parent coordinates bit for bit.
    pub fn subgrid(&self, distance: f64) -> Result<SubGrid> {
        let inradius = self.domain.inradius();
        if !(distance >= 0.0) || distance >= inradius {
            return Err(Error::EmptySubdomain { distance, inradius });
        }
        let slack = 1e-12 * inradius;
        let keep: Vec<usize> = (0..self.len()).filter(|&j| self.distance_to_boundary(j) >= distance - slack).collect();
        if keep.is_empty() {
            return Err(Error::EmptySubdomain { distance, inradius });
        }
        let first = &self.coords[keep[0]];
        let last = &self.coords[*keep.last().unwrap()];
        let domain = match self.domain {
            Domain::Interval { .. } => {
                Domain::Interval { lo: first[0] - 0.5 * self.spacing[0], hi: last[0] + 0.5 * self.spacing[0] }
            }
            Domain::RadialBall { dim, .. } => Domain::RadialBall { dim, radius: last[0] + 0.5 * self.spacing[0] },
            Domain::Rectangle { .. } => Domain::Rectangle {
                lo: [first[0] - 0.5 * self.spacing[0], first[1] - 0.5 * self.spacing[1]],
                hi: [last[0] + 0.5 * self.spacing[0], last[1] + 0.5 * self.spacing[1]],
            },
        };
        let shape = match self.shape.len() {
            1 => vec![keep.len()],
            _ => {
                let ny = keep.iter().filter(|&&j| self.coords[j][0] == first[0]).count();
                vec![keep.len() / ny, ny]
            }
        };
        let coords = keep.iter().map(|&j| self.coords[j].clone()).collect();
        let grid = Self::assemble(domain, shape, self.spacing.clone(), coords);
        Ok(SubGrid { grid, parent_index: keep })
    }

    /// CSV dump: `index, coordinate(s), weight, is_boundary`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (0..self.shape.len()).map(|a| format!("x{a}")).collect();
        writeln!(out, "index,{},weight,is_boundary", header.join(","))?;
        for j in 0..self.len() {
            let c: Vec<String> = self.coords[j].iter().map(|v| crate::fmt_g17(*v)).collect();
            writeln!(out, "{j},{},{},{}", c.join(","), crate::fmt_g17(self.weights[j]), u8::from(self.boundary[j]))?;
        }
        Ok(())
    }
}

/// A grid carved out of a parent grid, with the map back to parent nodes.
#[derive(Clone, Debug)]
pub struct SubGrid {
    pub grid: SpaceGrid,
    pub parent_index: Vec<usize>,
}

impl SubGrid {
    /// Zero-extends values on the subgrid to the parent grid.
    pub fn extend_by_zero(&self, values: &[f64], parent_len: usize) -> Vec<f64> {
        let mut out = vec![0.0; parent_len];
        for (v, &p) in values.iter().zip(&self.parent_index) {
            out[p] = *v;
        }
        out
    }

    /// Restricts parent values to the subgrid.
    pub fn restrict(&self, values: &[f64]) -> Vec<f64> {
        self.parent_index.iter().map(|&p| values[p]).collect()
    }
}

/// `Σ values_j · w_j` over the grid.
pub fn quadrature(values: &[f64], grid: &SpaceGrid) -> Result<f64> {
    grid.quadrature(values)
}

/// Uniform partition of `[0, T]` into `steps` intervals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(config(format!("time horizon T must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(config("number of time steps must be at least 1"));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t_k = kΔt`, with `t_K = T` exactly.
    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    /// Index of the node nearest to `t`, clamped to `[0, K]`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let k = (t / self.dt()).round();
        (k.max(0.0) as usize).min(self.steps)
    }

    pub fn refine(&self) -> Self {
        Self { horizon: self.horizon, steps: 2 * self.steps }
    }
}

/// Shrink distances `ε_m` inducing nested subdomains
/// `Ω_m = {x ∈ Ω : dist(x, ∂Ω) ≥ ε_m}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubdomainSchedule {
    base: Domain,
    levels: Vec<f64>,
}

impl SubdomainSchedule {
    pub fn new(base: Domain, levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(config("subdomain schedule needs at least one level"));
        }
        if levels.iter().any(|&e| !(e > 0.0)) {
            return Err(config("subdomain shrink distances must be positive"));
        }
        if levels.windows(2).any(|w| w[1] >= w[0]) {
            return Err(config("subdomain shrink distances must be strictly decreasing"));
        }
        Ok(Self { base, levels })
    }

    pub fn base(&self) -> &Domain {
        &self.base
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Nodes of `grid` inside `Ω_m`; nested increasing in `m`.
pub fn subdomain_grid(grid: &SpaceGrid, schedule: &SubdomainSchedule, m: usize) -> Result<Vec<usize>> {
    let eps = *schedule
        .levels
        .get(m)
        .ok_or_else(|| contract(format!("level {m} outside schedule of length {}", schedule.len())))?;
    let inradius = grid.domain().inradius();
    if eps >= inradius {
        return Err(Error::EmptySubdomain { distance: eps, inradius });
    }
    let slack = 1e-12 * inradius;
    let nodes: Vec<usize> = (0..grid.len()).filter(|&j| grid.distance_to_boundary(j) >= eps - slack).collect();
    if nodes.is_empty() {
        return Err(Error::EmptySubdomain { distance: eps, inradius });
    }
    Ok(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn interval_layout() {
        let g = build_grid(&Domain::interval(0.0, 1.0).unwrap(), 4).unwrap();
        let xs: Vec<f64> = (0..4).map(|j| g.coord(j)[0]).collect();
        assert_eq!(xs, vec![0.125, 0.375, 0.625, 0.875]);
        assert_eq!(g.h(), 0.25);
        assert_eq!(g.boundary_mask(), &[true, false, false, true]);
    }

    #[test]
    fn rejects_bad_input() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        assert!(matches!(build_grid(&d, 3), Err(Error::Config(_))));
        assert!(Domain::interval(1.0, 1.0).is_err());
        assert!(Domain::rectangle([0.0, 1.0], [1.0, 0.5]).is_err());
        assert!(Domain::radial_ball(0, 1.0).is_err());
        assert!(Domain::radial_ball(2, -1.0).is_err());
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn radial_disc_weights_sum_to_pi() {
        let g = build_grid(&Domain::unit_ball(2).unwrap(), 200).unwrap();
        let s = g.quadrature(&vec![1.0; g.len()]).unwrap();
        assert!((s - PI).abs() / PI < 1e-3);
        assert!(g.weights().iter().all(|&w| w > 0.0));
        assert!((g.coord(0)[0] - 0.5 * g.h()).abs() < 1e-15);
    }

    #[test]
    fn unit_square_weights_sum_to_one() {
        let g = build_grid(&Domain::rectangle([0.0, 0.0], [1.0, 1.0]).unwrap(), 50).unwrap();
        let s = g.quadrature(&vec![1.0; g.len()]).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(g.boundary_mask().iter().filter(|&&b| b).count(), 4 * 50 - 4);
    }

    #[test]
    fn three_ball_volume_converges_at_second_order() {
        let d = Domain::unit_ball(3).unwrap();
        let err = |n| {
            let g = build_grid(&d, n).unwrap();
            (g.quadrature(&vec![1.0; g.len()]).unwrap() - d.volume()).abs()
        };
        let (e1, e2) = (err(50), err(100));
        let order = (e1 / e2).log2();
        assert!(order >= 1.9, "observed order {order}");
    }

    #[test]
    fn refinement_halves_spacing() {
        let g = build_grid(&Domain::unit_ball(3).unwrap(), 10).unwrap();
        assert_eq!(g.refine().unwrap().h(), 0.5 * g.h());
    }

    #[test]
    fn quadrature_of_zero_and_mismatch() {
        let g = build_grid(&Domain::interval(0.0, 1.0).unwrap(), 8).unwrap();
        assert_eq!(g.quadrature(&vec![0.0; 8]).unwrap(), 0.0);
        assert!(matches!(g.quadrature(&[1.0; 3]), Err(Error::Contract(_))));
    }

    #[test]
    fn subdomains_are_nested() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let g = build_grid(&d, 40).unwrap();
        let sched = SubdomainSchedule::new(d.clone(), vec![0.3, 0.25, 0.1, 0.02]).unwrap();
        let sets: Vec<Vec<usize>> = (0..4).map(|m| subdomain_grid(&g, &sched, m).unwrap()).collect();
        for m in 0..3 {
            assert!(sets[m].iter().all(|j| sets[m + 1].contains(j)));
        }
        for &j in &sets[1] {
            let x = g.coord(j)[0];
            assert!((0.25..=0.75).contains(&x));
        }
        assert!(SubdomainSchedule::new(d.clone(), vec![0.1, 0.2]).is_err());
        let wide = SubdomainSchedule::new(d, vec![0.6]).unwrap();
        assert!(matches!(subdomain_grid(&g, &wide, 0), Err(Error::EmptySubdomain { .. })));
    }

    #[test]
    fn radial_subdomain_keeps_inner_nodes() {
        let g = build_grid(&Domain::unit_ball(2).unwrap(), 20).unwrap();
        let eps = 1.5 * g.h();
        let sched = SubdomainSchedule::new(g.domain().clone(), vec![eps]).unwrap();
        let nodes = subdomain_grid(&g, &sched, 0).unwrap();
        let expected: Vec<usize> = (0..g.len()).filter(|&j| g.coord(j)[0] <= 1.0 - eps).collect();
        assert_eq!(nodes, expected);
    }

    #[test]
    fn subgrid_reuses_parent_coordinates() {
        let g = build_grid(&Domain::rectangle([0.0, 0.0], [1.0, 2.0]).unwrap(), 10).unwrap();
        let sub = g.subgrid(0.2).unwrap();
        assert_eq!(sub.grid.shape(), &[6, 8]);
        for (k, &p) in sub.parent_index.iter().enumerate() {
            assert_eq!(sub.grid.coord(k), g.coord(p));
        }
        let r = build_grid(&Domain::unit_ball(3).unwrap(), 10).unwrap();
        let rs = r.subgrid(0.3).unwrap();
        assert_eq!(rs.grid.len(), 7);
        assert!((rs.grid.domain().inradius() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn nearest_node_lookup() {
        let g = build_grid(&Domain::rectangle([0.0, 0.0], [1.0, 1.0]).unwrap(), 10).unwrap();
        for j in [0, 13, 57, 99] {
            assert_eq!(g.nearest_node(g.coord(j)), j);
        }
    }

    #[test]
    fn time_grid_ends_exactly_at_horizon() {
        let t = TimeGrid::new(0.7, 3).unwrap();
        assert_eq!(t.time(3), 0.7);
        assert_eq!(t.times().len(), 4);
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let g = build_grid(&Domain::interval(0.0, 1.0).unwrap(), 4).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "index,x0,weight,is_boundary");
        assert_eq!(lines[1], "0,0.125,0.25,1");
        assert_eq!(lines.len(), 5);
    }
}
