//! Discrete diffusion operator shared by the solver and the dual Sobolev norm.
//!
//! The stiffness matrix `S = W·(−Δ_h)` is assembled face by face, so it is
//! symmetric and `⟨−Δ_h u, u⟩_W = ‖∇_h u‖²` holds exactly. A Dirichlet face
//! sees the reflected ghost value `−u`, i.e. a jump of `2u` across `h`.

use crate::banded::BandMatrix;
use crate::error::Result;
use crate::grid::{Neighbor, SpaceGrid};

/// Half-bandwidth of every operator on `grid` in natural ordering.
pub fn bandwidth(grid: &SpaceGrid) -> usize {
    match grid.shape() {
        [_, ny] => *ny,
        _ => 1,
    }
}

/// Symmetric stiffness matrix `W·(−Δ_h)`.
pub fn stiffness(grid: &SpaceGrid) -> BandMatrix {
    let bw = bandwidth(grid);
    let mut s = BandMatrix::zeros(grid.len(), bw, bw);
    for i in 0..grid.len() {
        for side in grid.links(i).iter().flatten() {
            match side.neighbor {
                Neighbor::Node(j) => {
                    s.add(i, i, side.conductance);
                    s.add(i, j, -side.conductance);
                }
                Neighbor::Dirichlet => s.add(i, i, 2.0 * side.conductance),
                Neighbor::Symmetry => {}
            }
        }
    }
    s
}

/// `−Δ_h u` at every node.
pub fn neg_laplacian(grid: &SpaceGrid, values: &[f64]) -> Result<Vec<f64>> {
    grid.check_len(values)?;
    let su = stiffness(grid).mul_vec(values);
    Ok(su.iter().zip(grid.weights()).map(|(s, w)| s / w).collect())
}

/// `‖∇_h u‖²_{L₂}` summed over faces, Dirichlet faces included.
pub fn gradient_energy(grid: &SpaceGrid, values: &[f64]) -> Result<f64> {
    grid.check_len(values)?;
    let mut e = 0.0;
    for (i, &u) in values.iter().enumerate() {
        for side in grid.links(i).iter().flatten() {
            match side.neighbor {
                Neighbor::Node(j) if j > i => {
                    let d = u - values[j];
                    e += side.conductance * d * d;
                }
                Neighbor::Dirichlet => e += 2.0 * side.conductance * u * u,
                _ => {}
            }
        }
    }
    Ok(e)
}

/// Solves `−Δ_h φ = f` with homogeneous Dirichlet data.
pub fn poisson_solve(grid: &SpaceGrid, rhs: &[f64]) -> Result<Vec<f64>> {
    grid.check_len(rhs)?;
    let b: Vec<f64> = rhs.iter().zip(grid.weights()).map(|(f, w)| f * w).collect();
    stiffness(grid).solve(&b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Domain};

    #[test]
    fn stiffness_is_symmetric() {
        for d in [
            Domain::interval(0.0, 2.0).unwrap(),
            Domain::unit_ball(3).unwrap(),
            Domain::rectangle([0.0, 0.0], [1.0, 0.5]).unwrap(),
        ] {
            let g = build_grid(&d, 6).unwrap();
            let s = stiffness(&g);
            for i in 0..g.len() {
                for j in 0..g.len() {
                    assert_eq!(s.get(i, j), s.get(j, i));
                }
            }
        }
    }

    #[test]
    fn energy_matches_weighted_inner_product() {
        let g = build_grid(&Domain::unit_ball(2).unwrap(), 16).unwrap();
        let u: Vec<f64> = (0..g.len()).map(|j| (j as f64 * 0.7).cos()).collect();
        let lu = neg_laplacian(&g, &u).unwrap();
        let ip: f64 = lu.iter().zip(&u).zip(g.weights()).map(|((a, b), w)| a * b * w).sum();
        let e = gradient_energy(&g, &u).unwrap();
        assert!((ip - e).abs() < 1e-10 * e);
    }

    #[test]
    fn cell_centered_sine_is_an_eigenvector() {
        let pi = std::f64::consts::PI;
        let g = build_grid(&Domain::interval(0.0, pi).unwrap(), 32).unwrap();
        let h = g.h();
        let u: Vec<f64> = (0..g.len()).map(|j| g.coord(j)[0].sin()).collect();
        let lam = (2.0 - 2.0 * h.cos()) / (h * h);
        let lu = neg_laplacian(&g, &u).unwrap();
        for (a, b) in lu.iter().zip(&u) {
            assert!((a - lam * b).abs() < 1e-12);
        }
    }
}
