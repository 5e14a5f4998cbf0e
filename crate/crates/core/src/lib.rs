//! Weak measurements of a spin-1/2 particle in a Stern-Gerlach apparatus.
//!
//! Two independent routes are provided and cross-checked:
//!
//! * exact evolution on a spectral grid (pure von Neumann coupling and a Strang
//!   split-step propagator with the kinetic term), and
//! * first-order predictions from weak vectors, either from the time-dependent
//!   (Dyson) picture or from the time-independent T-operator on the energy shell.
//!
//! Natural units (`hbar = m = 1`) are the default everywhere, but every entry
//! point takes `hbar` and the mass explicitly.

pub mod collision;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod field;
pub mod grid;
pub mod quadrature;
pub mod spin;

pub use error::{Error, Result};

pub use num_complex::Complex64;

/// Cartesian axis. `y` is the beam direction throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }

    pub fn parse(s: &str) -> Option<Axis> {
        match s {
            "x" => Some(Axis::X),
            "y" => Some(Axis::Y),
            "z" => Some(Axis::Z),
            _ => None,
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
