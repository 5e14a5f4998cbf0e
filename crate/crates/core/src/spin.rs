//! Spin-1/2 state algebra: Pauli operators along arbitrary axes, eigenspinors,
//! and the weak tensors built from a pre-/post-selected pair of states.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::Axis;

pub type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default threshold on |<f|i>| below which a weak value is refused.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-10;

pub const IDENTITY: Mat2 = [[ONE, ZERO], [ZERO, ONE]];
pub const SIGMA_X: Mat2 = [[ZERO, ONE], [ONE, ZERO]];
pub const SIGMA_Y: Mat2 = [[ZERO, Complex64::new(0.0, -1.0)], [I, ZERO]];
pub const SIGMA_Z: Mat2 = [[ONE, ZERO], [ZERO, Complex64::new(-1.0, 0.0)]];

pub fn sigma(axis: Axis) -> Mat2 {
    match axis {
        Axis::X => SIGMA_X,
        Axis::Y => SIGMA_Y,
        Axis::Z => SIGMA_Z,
    }
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, entry) in row.iter_mut().enumerate() {
            *entry = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

pub fn mat_apply(m: &Mat2, v: [Complex64; 2]) -> [Complex64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// Real unit vector in Cartesian space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitDirection {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitDirection {
    /// Normalizes `(x, y, z)`; fails on the zero vector or non-finite input.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-300 {
            return Err(Error::InvalidState(format!("direction ({x}, {y}, {z}) cannot be normalized")));
        }
        Ok(Self { x: x / n, y: y / n, z: z / n })
    }

    pub fn along(axis: Axis) -> Self {
        let mut c = [0.0; 3];
        c[axis.index()] = 1.0;
        Self { x: c[0], y: c[1], z: c[2] }
    }

    /// `cos(theta) z + sin(theta) t`, where `t` is the x or y axis.
    pub fn tilted(theta: f64, toward: Axis) -> Result<Self> {
        match toward {
            Axis::X => Self::new(theta.sin(), 0.0, theta.cos()),
            Axis::Y => Self::new(0.0, theta.sin(), theta.cos()),
            Axis::Z => Err(Error::InvalidState("cannot tilt the z axis toward itself".into())),
        }
    }

    pub fn components(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// sigma . m
pub fn pauli_along(m: &UnitDirection) -> Mat2 {
    let [x, y, z] = m.components();
    [[Complex64::new(z, 0.0), Complex64::new(x, -y)], [Complex64::new(x, y), Complex64::new(-z, 0.0)]]
}

/// Normalized two-component spin state in the z eigenbasis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinorState {
    amps: [Complex64; 2],
}

impl SpinorState {
    /// Builds a state from unnormalized amplitudes.
    pub fn new(a0: Complex64, a1: Complex64) -> Result<Self> {
        let n = (a0.norm_sqr() + a1.norm_sqr()).sqrt();
        if !n.is_finite() || n < 1e-300 {
            return Err(Error::InvalidState("spinor amplitudes cannot be normalized".into()));
        }
        Ok(Self { amps: [a0 / n, a1 / n] })
    }

    pub fn up() -> Self {
        Self { amps: [ONE, ZERO] }
    }

    pub fn down() -> Self {
        Self { amps: [ZERO, ONE] }
    }

    pub fn amplitudes(&self) -> [Complex64; 2] {
        self.amps
    }

    /// <self|other>
    pub fn inner(&self, other: &SpinorState) -> Complex64 {
        self.amps[0].conj() * other.amps[0] + self.amps[1].conj() * other.amps[1]
    }

    /// <self|op|other>
    pub fn sandwich(&self, op: &Mat2, other: &SpinorState) -> Complex64 {
        let v = mat_apply(op, other.amps);
        self.amps[0].conj() * v[0] + self.amps[1].conj() * v[1]
    }

    /// Projection of a spinor-valued amplitude onto this state, <self|v>.
    pub fn project(&self, v: [Complex64; 2]) -> Complex64 {
        self.amps[0].conj() * v[0] + self.amps[1].conj() * v[1]
    }
}

/// Eigenstate of `sigma . m` with eigenvalue `(-1)^s`.
///
/// The global phase is fixed so that the first component with non-negligible
/// modulus in the z basis is real and positive.
pub fn eigenspinor(m: &UnitDirection, s: u8) -> Result<SpinorState> {
    let [x, y, z] = m.components();
    let lambda = match s {
        0 => 1.0,
        1 => -1.0,
        _ => return Err(Error::InvalidState(format!("eigenvalue index must be 0 or 1, got {s}"))),
    };
    // Two candidate eigenvectors of [[z, x-iy], [x+iy, -z]]; take the better conditioned.
    let a = [Complex64::new(lambda + z, 0.0), Complex64::new(x, y)];
    let b = [Complex64::new(x, -y), Complex64::new(lambda - z, 0.0)];
    let na = a[0].norm_sqr() + a[1].norm_sqr();
    let nb = b[0].norm_sqr() + b[1].norm_sqr();
    let v = if na >= nb { a } else { b };
    let state = SpinorState::new(v[0], v[1])?;
    Ok(fix_phase(state))
}

fn fix_phase(state: SpinorState) -> SpinorState {
    let lead = state.amps.iter().copied().find(|a| a.norm() > 1e-12).unwrap_or(ONE);
    let phase = lead.conj() / lead.norm();
    SpinorState { amps: [state.amps[0] * phase, state.amps[1] * phase] }
}

/// Rank-n Cartesian tensor of weak values of ordered Pauli products.
///
/// Entries are stored with the first index most significant, i.e. entry
/// `(k1, .., kn)` lives at `sum_j k_j 3^(n-j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakTensor {
    rank: usize,
    entries: Vec<Complex64>,
}

impl WeakTensor {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, index: &[Axis]) -> Complex64 {
        assert_eq!(index.len(), self.rank, "multi-index length must equal the rank");
        let flat = index.iter().fold(0, |acc, a| acc * 3 + a.index());
        self.entries[flat]
    }

    /// Full contraction with `m (x) m (x) ... (x) m`.
    pub fn contract(&self, m: &UnitDirection) -> Complex64 {
        let comps = m.components();
        self.entries
            .iter()
            .enumerate()
            .map(|(flat, &e)| {
                let mut w = 1.0;
                let mut rest = flat;
                for _ in 0..self.rank {
                    w *= comps[rest % 3];
                    rest /= 3;
                }
                e * w
            })
            .sum()
    }
}

/// The n-th weak tensor `<f| s_k1 ... s_kn |i> / <f|i>`, refusing selections
/// whose overlap is at or below `ORTHOGONALITY_TOLERANCE`.
pub fn weak_tensor(n: usize, chi_i: &SpinorState, chi_f: &SpinorState) -> Result<WeakTensor> {
    weak_tensor_with_tolerance(n, chi_i, chi_f, ORTHOGONALITY_TOLERANCE)
}

pub fn weak_tensor_with_tolerance(
    n: usize,
    chi_i: &SpinorState,
    chi_f: &SpinorState,
    eps_orth: f64,
) -> Result<WeakTensor> {
    let overlap = checked_overlap(chi_i, chi_f, eps_orth)?;
    let count = 3usize.pow(n as u32);
    let mut entries = Vec::with_capacity(count);
    for flat in 0..count {
        let mut op = IDENTITY;
        let mut rest = flat;
        let mut digits = vec![0usize; n];
        for d in digits.iter_mut().rev() {
            *d = rest % 3;
            rest /= 3;
        }
        for &d in &digits {
            op = mat_mul(&op, &sigma(Axis::ALL[d]));
        }
        entries.push(chi_f.sandwich(&op, chi_i) / overlap);
    }
    Ok(WeakTensor { rank: n, entries })
}

/// The weak vector, i.e. the rank-1 weak tensor as a Cartesian 3-vector.
pub fn weak_vector(chi_i: &SpinorState, chi_f: &SpinorState) -> Result<[Complex64; 3]> {
    let overlap = checked_overlap(chi_i, chi_f, ORTHOGONALITY_TOLERANCE)?;
    Ok(Axis::ALL.map(|a| chi_f.sandwich(&sigma(a), chi_i) / overlap))
}

fn checked_overlap(chi_i: &SpinorState, chi_f: &SpinorState, eps_orth: f64) -> Result<Complex64> {
    let overlap = chi_f.inner(chi_i);
    if overlap.norm() <= eps_orth {
        return Err(Error::OrthogonalSelection { overlap: overlap.norm() });
    }
    Ok(overlap)
}

/// `exp(i angle n.sigma)` for a real unit axis `n`, as `cos I + i sin n.sigma`.
pub fn su2_rotation(angle: f64, n: [f64; 3]) -> Mat2 {
    let (s, c) = angle.sin_cos();
    [
        [Complex64::new(c, s * n[2]), Complex64::new(s * n[1], s * n[0])],
        [Complex64::new(-s * n[1], s * n[0]), Complex64::new(c, -s * n[2])],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn pauli_along_axes() {
        assert_eq!(pauli_along(&UnitDirection::along(Axis::Z)), SIGMA_Z);
        assert_eq!(pauli_along(&UnitDirection::along(Axis::X)), SIGMA_X);
    }

    #[test]
    fn pauli_along_diagonal_has_unit_eigenvalues() {
        let m = UnitDirection::new(1.0, 0.0, 1.0).unwrap();
        let p = pauli_along(&m);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(p[0][0], Complex64::new(r, 0.0), 1e-15));
        assert!(close(p[0][1], Complex64::new(r, 0.0), 1e-15));
        // 2x2 Hermitian eigenvalues: tr/2 +- sqrt((a-d)^2/4 + |b|^2)
        let tr = (p[0][0] + p[1][1]).re;
        let disc = (((p[0][0] - p[1][1]).re / 2.0).powi(2) + p[0][1].norm_sqr()).sqrt();
        assert!((tr / 2.0 + disc - 1.0).abs() < 1e-14);
        assert!((tr / 2.0 - disc + 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigenspinor_examples() {
        let up = eigenspinor(&UnitDirection::along(Axis::Z), 0).unwrap();
        assert_eq!(up.amplitudes(), [ONE, ZERO]);

        let theta = 0.7;
        let m = UnitDirection::tilted(theta, Axis::X).unwrap();
        let s = eigenspinor(&m, 0).unwrap().amplitudes();
        assert!(close(s[0], Complex64::new((theta / 2.0).cos(), 0.0), 1e-14));
        assert!(close(s[1], Complex64::new((theta / 2.0).sin(), 0.0), 1e-14));

        let y1 = eigenspinor(&UnitDirection::along(Axis::Y), 1).unwrap().amplitudes();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(y1[0], Complex64::new(r, 0.0), 1e-14));
        assert!(close(y1[1], Complex64::new(0.0, -r), 1e-14));
    }

    #[test]
    fn eigenspinor_minus_z_is_well_defined() {
        let m = UnitDirection::new(0.0, 0.0, -1.0).unwrap();
        let s = eigenspinor(&m, 0).unwrap();
        assert!(close(s.amplitudes()[1], ONE, 1e-14));
        assert!(eigenspinor(&m, 2).is_err());
    }

    #[test]
    fn weak_vector_tilted_preselection() {
        let theta = 9.0 * PI / 10.0;
        let chi_i = eigenspinor(&UnitDirection::tilted(theta, Axis::X).unwrap(), 0).unwrap();
        let chi_f = SpinorState::up();
        let w = weak_vector(&chi_i, &chi_f).unwrap();
        let t = (theta / 2.0).tan();
        assert!((t - 6.313_751_514_675_043).abs() < 1e-12);
        assert!(close(w[0], Complex64::new(t, 0.0), 1e-12));
        assert!(close(w[1], Complex64::new(0.0, -t), 1e-12));
        assert!(close(w[2], ONE, 1e-12));

        let chi_i = eigenspinor(&UnitDirection::tilted(PI / 2.0, Axis::X).unwrap(), 0).unwrap();
        let w = weak_vector(&chi_i, &chi_f).unwrap();
        assert!(close(w[0], ONE, 1e-12));
        assert!(close(w[1], Complex64::new(0.0, -1.0), 1e-12));
        assert!(close(w[2], ONE, 1e-12));
    }

    #[test]
    fn weak_vector_in_eigenstate_is_strong_value() {
        let up = SpinorState::up();
        let w = weak_vector(&up, &up).unwrap();
        assert!(close(w[0], ZERO, 1e-15) && close(w[1], ZERO, 1e-15) && close(w[2], ONE, 1e-15));
    }

    #[test]
    fn weak_tensor_rank_two_entries() {
        let theta = 9.0 * PI / 10.0;
        let chi_i = eigenspinor(&UnitDirection::tilted(theta, Axis::X).unwrap(), 0).unwrap();
        let chi_f = SpinorState::up();
        let t0 = weak_tensor(0, &chi_i, &chi_f).unwrap();
        assert_eq!(t0.entries(), &[ONE]);

        let t2 = weak_tensor(2, &chi_i, &chi_f).unwrap();
        assert!(close(t2.get(&[Axis::Z, Axis::Z]), ONE, 1e-12));
        // explicit matrix product oracle for <f|sx sz|i>/<f|i>
        let prod = [
            [
                SIGMA_X[0][0] * SIGMA_Z[0][0] + SIGMA_X[0][1] * SIGMA_Z[1][0],
                SIGMA_X[0][0] * SIGMA_Z[0][1] + SIGMA_X[0][1] * SIGMA_Z[1][1],
            ],
            [
                SIGMA_X[1][0] * SIGMA_Z[0][0] + SIGMA_X[1][1] * SIGMA_Z[1][0],
                SIGMA_X[1][0] * SIGMA_Z[0][1] + SIGMA_X[1][1] * SIGMA_Z[1][1],
            ],
        ];
        let a = chi_i.amplitudes();
        let v0 = prod[0][0] * a[0] + prod[0][1] * a[1];
        let expected = v0 / a[0];
        assert!(close(t2.get(&[Axis::X, Axis::Z]), expected, 1e-12));
        // sx sz = -i sy, so the (x,z) entry is -i times the y weak value
        let w = weak_vector(&chi_i, &chi_f).unwrap();
        assert!(close(t2.get(&[Axis::X, Axis::Z]), -I * w[1], 1e-12));
    }

    #[test]
    fn orthogonal_selection_is_an_error() {
        let err = weak_vector(&SpinorState::up(), &SpinorState::down()).unwrap_err();
        assert!(matches!(err, Error::OrthogonalSelection { .. }));
        assert!(weak_tensor(3, &SpinorState::up(), &SpinorState::down()).is_err());
        let near = SpinorState::new(Complex64::new(1e-11, 0.0), ONE).unwrap();
        assert!(weak_vector(&SpinorState::up(), &near).is_err());
        assert!(weak_tensor_with_tolerance(1, &SpinorState::up(), &near, 1e-12).is_ok());
    }

    #[test]
    fn su2_rotation_matches_series() {
        let n = UnitDirection::new(0.3, -0.4, 0.5).unwrap().components();
        let angle = 0.37;
        let u = su2_rotation(angle, n);
        let ns = pauli_along(&UnitDirection::new(n[0], n[1], n[2]).unwrap());
        // exp(iA) with A = angle n.sigma, summed as a power series
        let mut term = IDENTITY;
        let mut sum = IDENTITY;
        for k in 1..30 {
            term = mat_mul(&term, &ns);
            let f = I * angle / k as f64;
            for row in term.iter_mut() {
                for e in row.iter_mut() {
                    *e *= f;
                }
            }
            for r in 0..2 {
                for c in 0..2 {
                    sum[r][c] += term[r][c];
                }
            }
        }
        for r in 0..2 {
            for c in 0..2 {
                assert!(close(u[r][c], sum[r][c], 1e-14));
            }
        }
    }
}
