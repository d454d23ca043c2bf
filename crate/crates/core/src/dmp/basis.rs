use super::{CanonicalSystem, DmpChannel, DmpError};
use serde::{Deserialize, Serialize};

/// Below this total activation the forcing term is treated as zero.
pub const DEGENERATE_ACTIVATION: f64 = 1e-10;

/// Gaussian bases `psi_i(s) = exp(-h_i (s - c_i)^2)` over the phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSet {
    centers: Vec<f64>,
    widths: Vec<f64>,
}

impl BasisSet {
    pub fn new(centers: Vec<f64>, widths: Vec<f64>) -> Result<Self, DmpError> {
        if centers.len() < 2 {
            return Err(DmpError::TooFewBases(centers.len()));
        }
        if widths.len() != centers.len() {
            return Err(DmpError::Document(format!(
                "{} centers but {} widths",
                centers.len(),
                widths.len()
            )));
        }
        let in_range = centers.iter().all(|&c| c > 0.0 && c <= 1.0);
        let decreasing = centers.windows(2).all(|w| w[1] < w[0]);
        let increasing = centers.windows(2).all(|w| w[1] > w[0]);
        if !in_range || !(decreasing || increasing) {
            return Err(DmpError::UnorderedCenters);
        }
        if widths.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(DmpError::NonPositiveWidth);
        }
        Ok(Self { centers, widths })
    }

    /// Centers equally spaced in time (so exponentially spaced in phase) from
    /// `s = 1` down to the final phase.
    pub fn standard(n: usize, canonical: &CanonicalSystem, width_scale: f64) -> Result<Self, DmpError> {
        if n < 2 {
            return Err(DmpError::TooFewBases(n));
        }
        let centers: Vec<f64> = (0..n)
            .map(|i| canonical.phase_at(i as f64 / (n - 1) as f64))
            .collect();
        let mut spacing: Vec<f64> = centers.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
        spacing.push(*spacing.last().unwrap());
        let widths = spacing.iter().map(|d| width_scale / (d * d)).collect();
        Self::new(centers, widths)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn activation(&self, i: usize, s: f64) -> f64 {
        let d = s - self.centers[i];
        (-self.widths[i] * d * d).exp()
    }

    pub fn activations(&self, s: f64) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.activation(i, s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingValue {
    pub value: f64,
    /// All activations vanished; `value` was forced to zero.
    pub degenerate: bool,
}

/// Normalized weighted mixture of the bases at phase `s`.
pub fn forcing_value(channel: &DmpChannel, basis: &BasisSet, s: f64) -> ForcingValue {
    let mut num = 0.0;
    let mut den = 0.0;
    for (psi, w) in basis.activations(s).zip(&channel.weights) {
        num += psi * w;
        den += psi;
    }
    if den < DEGENERATE_ACTIVATION {
        ForcingValue {
            value: 0.0,
            degenerate: true,
        }
    } else {
        ForcingValue {
            value: num / den,
            degenerate: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::ChannelSpec;
    use crate::ChannelKind;

    fn channel(weights: Vec<f64>) -> DmpChannel {
        let n = weights.len();
        let mut c = DmpChannel::zero_forcing(ChannelSpec::new("x", ChannelKind::Position), 0.0, 1.0, n, 25.0);
        c.weights = weights;
        c
    }

    #[test]
    fn zero_weights_give_zero_force() {
        let basis = BasisSet::standard(20, &CanonicalSystem::default(), 8.0).unwrap();
        let ch = channel(vec![0.0; 20]);
        for s in [1.0, 0.8, 0.5, 0.37] {
            assert_eq!(forcing_value(&ch, &basis, s).value, 0.0);
        }
    }

    #[test]
    fn constant_weights_are_reproduced() {
        let basis = BasisSet::standard(20, &CanonicalSystem::default(), 8.0).unwrap();
        let ch = channel(vec![7.0; 20]);
        for s in [1.0, 0.9, 0.61, 0.4, 0.3679] {
            let f = forcing_value(&ch, &basis, s);
            assert!((f.value - 7.0).abs() < 1e-12, "{s}: {}", f.value);
            assert!(!f.degenerate);
        }
    }

    #[test]
    fn vanishing_activation_is_flagged() {
        let basis = BasisSet::new(vec![1.0, 0.9], vec![1e6, 1e6]).unwrap();
        let ch = channel(vec![3.0, 4.0]);
        let f = forcing_value(&ch, &basis, 0.2);
        assert!(f.degenerate);
        assert_eq!(f.value, 0.0);
    }

    #[test]
    fn rejects_bad_basis() {
        assert_eq!(BasisSet::new(vec![0.5], vec![1.0]), Err(DmpError::TooFewBases(1)));
        assert_eq!(
            BasisSet::new(vec![0.5, 0.5], vec![1.0, 1.0]),
            Err(DmpError::UnorderedCenters)
        );
        assert_eq!(
            BasisSet::new(vec![1.0, 0.5], vec![1.0, 0.0]),
            Err(DmpError::NonPositiveWidth)
        );
        assert_eq!(
            BasisSet::new(vec![1.2, 0.5], vec![1.0, 1.0]),
            Err(DmpError::UnorderedCenters)
        );
    }

    #[test]
    fn standard_centers_span_the_phase() {
        let cs = CanonicalSystem::default();
        let basis = BasisSet::standard(20, &cs, 8.0).unwrap();
        assert_eq!(basis.centers()[0], 1.0);
        assert!((basis.centers()[19] - cs.final_phase()).abs() < 1e-15);
    }
}
