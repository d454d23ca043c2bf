use super::BSplineSurface;
use nalgebra::{Matrix2, Vector2, Vector3};

/// Samples per axis of the coarse seed grid.
pub const PROJECTION_GRID: usize = 32;
const MAX_ITERATIONS: usize = 50;
const STEP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub point: Vector3<f64>,
    pub distance: f64,
    /// Set when refinement made no progress and the result is a coarse grid cell.
    pub warning: bool,
}

/// Closest point on the surface to `p`, refined from both `seed` and the best
/// coarse-grid sample. `warning` is set when neither refinement reached a
/// stationary point; the result is then no worse than the best grid cell.
pub fn project_to_surface(surf: &BSplineSurface, p: &Vector3<f64>, seed: (f64, f64)) -> Projection {
    let mut grid_best = (0.0, 0.0, f64::INFINITY);
    let n = PROJECTION_GRID;
    for i in 0..n {
        for j in 0..n {
            let (u, v) = (i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64);
            let d = (surf.eval(u, v) - p).norm_squared();
            if d < grid_best.2 {
                grid_best = (u, v, d);
            }
        }
    }
    let from_seed = refine(surf, p, seed);
    let from_grid = refine(surf, p, (grid_best.0, grid_best.1));
    if from_seed.distance <= from_grid.distance {
        from_seed
    } else {
        from_grid
    }
}

/// Gauss-Newton refinement from `seed` only. Cheap enough for every control tick.
pub fn project_local(surf: &BSplineSurface, p: &Vector3<f64>, seed: (f64, f64)) -> Projection {
    refine(surf, p, seed)
}

fn refine(surf: &BSplineSurface, p: &Vector3<f64>, seed: (f64, f64)) -> Projection {
    let mut uv = Vector2::new(seed.0.clamp(0.0, 1.0), seed.1.clamp(0.0, 1.0));
    let (mut r, mut ru, mut rv) = surf.derivatives(uv.x, uv.y);
    let mut cost = (r - p).norm_squared();
    let mut lambda = 1e-9;
    for _ in 0..MAX_ITERATIONS {
        let e = r - p;
        let g = Vector2::new(ru.dot(&e), rv.dot(&e));
        let h = Matrix2::new(ru.dot(&ru), ru.dot(&rv), rv.dot(&ru), rv.dot(&rv));
        // parameters pinned at a bound with the gradient pushing outward stay fixed
        let pinned = [0, 1].map(|k| (uv[k] <= 0.0 && g[k] > 0.0) || (uv[k] >= 1.0 && g[k] < 0.0));
        let mut improved = false;
        for _ in 0..20 {
            let mut step = Vector2::zeros();
            let damped = h + Matrix2::identity() * lambda * (h.trace() + 1e-30);
            match (pinned[0], pinned[1]) {
                (true, true) => {}
                (true, false) => step.y = -g.y / damped[(1, 1)],
                (false, true) => step.x = -g.x / damped[(0, 0)],
                (false, false) => {
                    if let Some(inv) = damped.try_inverse() {
                        step = -inv * g;
                    }
                }
            }
            let cand = Vector2::new((uv.x + step.x).clamp(0.0, 1.0), (uv.y + step.y).clamp(0.0, 1.0));
            let (rc, ruc, rvc) = surf.derivatives(cand.x, cand.y);
            let c = (rc - p).norm_squared();
            if c <= cost {
                let moved = (rc - r).norm();
                uv = cand;
                r = rc;
                ru = ruc;
                rv = rvc;
                cost = c;
                lambda = (lambda * 0.1).max(1e-12);
                improved = moved > STEP_TOL;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    // first-order optimality: the residual is orthogonal to every free tangent
    let e = r - p;
    let dist = e.norm();
    let stationary = [(uv.x, ru), (uv.y, rv)].iter().all(|(t, d)| {
        let g = d.dot(&e);
        let outward = (*t <= 0.0 && g > 0.0) || (*t >= 1.0 && g < 0.0);
        outward || g.abs() <= 1e-12 + 1e-6 * dist * d.norm()
    });
    Projection {
        u: uv.x,
        v: uv.y,
        point: r,
        distance: dist,
        warning: !stationary,
    }
}
