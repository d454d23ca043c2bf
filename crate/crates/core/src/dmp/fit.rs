use super::{BasisSet, CanonicalSystem, Demonstration, Direction, DmpChannel, DmpError, DmpVariant};

/// Ridge term added to each per-basis normal equation.
pub const FIT_RIDGE: f64 = 1e-8;

/// Central differences inside, one-sided at the ends.
fn gradient(x: &[f64], dt: f64) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n];
    d[0] = (x[1] - x[0]) / dt;
    d[n - 1] = (x[n - 1] - x[n - 2]) / dt;
    for k in 1..n - 1 {
        d[k] = (x[k + 1] - x[k - 1]) / (2.0 * dt);
    }
    d
}

fn fit_channel(
    x: &[f64],
    dt: f64,
    canonical: &CanonicalSystem,
    basis: &BasisSet,
    alpha: f64,
) -> (Vec<f64>, f64) {
    let n = x.len();
    let duration = (n - 1) as f64 * dt;
    let beta = alpha / 4.0;
    let goal = x[n - 1];
    let xd = gradient(x, dt);
    let xdd = gradient(&xd, dt);

    // Forcing that makes the attractor reproduce the demonstration exactly.
    let phases: Vec<f64> = (0..n)
        .map(|k| canonical.phase_at(k as f64 * dt / duration))
        .collect();
    let target: Vec<f64> = (0..n)
        .map(|k| {
            duration * duration * xdd[k] - alpha * (beta * (goal - x[k]) - duration * xd[k])
        })
        .collect();

    (lwr_weights(basis, &phases, &target), duration * xd[0])
}

/// Per-basis weighted least squares of `target` sampled at `phases`.
///
/// Each weight is the activation-weighted mean of the target, the solution
/// of a one-parameter weighted least-squares problem with a small ridge.
pub fn lwr_weights(basis: &BasisSet, phases: &[f64], target: &[f64]) -> Vec<f64> {
    (0..basis.len())
        .map(|i| {
            let mut num = 0.0;
            let mut den = 0.0;
            for (&s, &f) in phases.iter().zip(target) {
                let psi = basis.activation(i, s);
                num += psi * f;
                den += psi;
            }
            num / (den + FIT_RIDGE)
        })
        .collect()
}

fn fit_variant(
    demo: &Demonstration,
    canonical: &CanonicalSystem,
    basis: &BasisSet,
    alpha: f64,
    direction: Direction,
) -> Result<DmpVariant, DmpError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(DmpError::InvalidGain {
            alpha,
            decay: canonical.decay,
        });
    }
    let channels = demo
        .channels()
        .iter()
        .enumerate()
        .map(|(c, spec)| {
            let x = demo.channel(c);
            let (weights, start_rate) = fit_channel(&x, demo.dt(), canonical, basis, alpha);
            let start = x[0];
            let goal = x[x.len() - 1];
            let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
            DmpChannel {
                spec: spec.clone(),
                weights,
                goal,
                start,
                start_rate,
                alpha,
                beta: alpha / 4.0,
                degenerate_goal: (goal - start).abs() <= 1e-12 * scale,
            }
        })
        .collect();
    Ok(DmpVariant {
        direction,
        channels,
    })
}

/// Locally weighted regression of the forcing weights, one channel at a time.
pub fn fit_lwr(
    demo: &Demonstration,
    canonical: &CanonicalSystem,
    basis: &BasisSet,
    alpha: f64,
) -> Result<DmpVariant, DmpError> {
    fit_variant(demo, canonical, basis, alpha, Direction::Forward)
}

/// Fits the variant used while backtracking: the time-reversed demonstration.
pub fn fit_backward(
    demo: &Demonstration,
    canonical: &CanonicalSystem,
    basis: &BasisSet,
    alpha: f64,
) -> Result<DmpVariant, DmpError> {
    fit_variant(&demo.reversed(), canonical, basis, alpha, Direction::Backward)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_line_is_constant() {
        let x: Vec<f64> = (0..10).map(|k| 2.0 * k as f64 * 0.1).collect();
        for g in gradient(&x, 0.1) {
            assert!((g - 2.0).abs() < 1e-12);
        }
    }
}
