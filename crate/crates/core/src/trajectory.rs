//! Radial, spiral and full-Cartesian k-space sampling patterns.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::types::Trajectory;

/// Radius cap keeping spiral arms inside the half-open unit box.
pub const SPIRAL_MAX_RADIUS: f64 = 0.4999;
pub const DEFAULT_SPIRAL_TURNS: f64 = 0.5;

/// `n_spokes` diameters at angles `sπ/n_spokes`, each sampled at the cell centers of a
/// uniform partition of `[-0.5, 0.5)`.
pub fn radial(n_spokes: usize, n_per_spoke: usize) -> Result<Trajectory> {
    if n_spokes < 1 || n_per_spoke < 2 {
        return Err(Error::Parameter(format!(
            "radial needs >= 1 spoke and >= 2 samples per spoke, got {n_spokes} x {n_per_spoke}"
        )));
    }
    let n = n_per_spoke as f64;
    let mut points = Vec::with_capacity(n_spokes * n_per_spoke);
    for s in 0..n_spokes {
        let theta = s as f64 * PI / n_spokes as f64;
        let (sin, cos) = theta.sin_cos();
        for j in 0..n_per_spoke {
            // (2j + 1 - n) / 2n: exact odd numerator keeps the spoke symmetric about 0.
            let r = (2.0 * j as f64 + 1.0 - n) / (2.0 * n);
            points.push([r * cos, r * sin]);
        }
    }
    Trajectory::new(points)
}

/// Interleaved Archimedean spiral: arm `a` is `0.4999·t·(cos, sin)(2π·turns·t + 2πa/n_arms)`
/// with `t = j / n_per_arm`.
pub fn spiral(n_arms: usize, n_per_arm: usize, turns: f64) -> Result<Trajectory> {
    if n_arms < 1 || n_per_arm < 2 {
        return Err(Error::Parameter(format!(
            "spiral needs >= 1 arm and >= 2 samples per arm, got {n_arms} x {n_per_arm}"
        )));
    }
    if !(turns.is_finite() && turns > 0.0) {
        return Err(Error::Parameter(format!(
            "spiral turns must be positive, got {turns}"
        )));
    }
    let mut points = Vec::with_capacity(n_arms * n_per_arm);
    for a in 0..n_arms {
        let offset = 2.0 * PI * a as f64 / n_arms as f64;
        for j in 0..n_per_arm {
            let t = j as f64 / n_per_arm as f64;
            let r = SPIRAL_MAX_RADIUS * t;
            let (sin, cos) = (2.0 * PI * turns * t + offset).sin_cos();
            points.push([r * cos, r * sin]);
        }
    }
    Trajectory::new(points)
}

/// Every DFT node of an `h × w` grid, row-major in `(ky, kx)`.
pub fn cartesian_full(h: usize, w: usize) -> Result<Trajectory> {
    if h < 1 || w < 1 {
        return Err(Error::Parameter(format!(
            "cartesian grid must be nonempty, got {h}x{w}"
        )));
    }
    let node = |i: usize, n: usize| (i as f64 - (n / 2) as f64) / n as f64;
    let points = (0..h)
        .flat_map(|p| (0..w).map(move |q| [node(q, w), node(p, h)]))
        .collect();
    Trajectory::new(points)
}

/// Full-grid pixel count over acquired sample count.
pub fn acceleration_factor(traj: &Trajectory, h: usize, w: usize) -> f64 {
    (h * w) as f64 / traj.len() as f64
}
