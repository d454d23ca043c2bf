use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Index, IndexMut};

/// Physical meaning of one state channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    /// Cartesian position, meters.
    Position,
    /// Surface parameter coordinate, dimensionless in [0, 1].
    SurfaceCoord,
    /// Contact force along the surface normal, newtons.
    Force,
}

impl ChannelKind {
    pub fn units(self) -> &'static str {
        match self {
            ChannelKind::Position => "m",
            ChannelKind::SurfaceCoord => "1",
            ChannelKind::Force => "N",
        }
    }

    /// Whether the channel describes where the tool is (as opposed to how hard it pushes).
    pub fn is_kinematic(self) -> bool {
        !matches!(self, ChannelKind::Force)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub name: String,
    pub kind: ChannelKind,
}

impl ChannelSpec {
    pub fn new(name: impl Into<String>, kind: ChannelKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }

    pub fn cartesian() -> Vec<ChannelSpec> {
        vec![
            ChannelSpec::new("x", ChannelKind::Position),
            ChannelSpec::new("y", ChannelKind::Position),
            ChannelSpec::new("z", ChannelKind::Position),
        ]
    }

    pub fn surface() -> Vec<ChannelSpec> {
        vec![
            ChannelSpec::new("u", ChannelKind::SurfaceCoord),
            ChannelSpec::new("v", ChannelKind::SurfaceCoord),
            ChannelSpec::new("f_n", ChannelKind::Force),
        ]
    }
}

/// Values of the robot state channels. The channel layout lives with the
/// segment that produced the vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl From<&[f64]> for StateVector {
    fn from(v: &[f64]) -> Self {
        Self(v.to_vec())
    }
}

impl Index<usize> for StateVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for StateVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v:.6}")?;
        }
        write!(f, "]")
    }
}
