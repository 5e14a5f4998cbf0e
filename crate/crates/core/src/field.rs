//! Stern-Gerlach coupling tensors derived from magnetic-field gradients, and the
//! compact-support window functions that limit the interaction.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Electron spin g-factor.
pub const G_S: f64 = 2.002_319_304_199_22;

/// Dimensionless 3x3 tensor linking position and spin, `H_int = -hbar eta R.H.sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingTensor {
    hxx: f64,
    hxz: f64,
    matrix: [[f64; 3]; 3],
    constrained: bool,
}

impl CouplingTensor {
    /// Member of the divergence- and curl-free family `hxx (xx - zz) + hxz (xz + zx)`.
    pub fn maxwell(hxx: f64, hxz: f64) -> Self {
        let mut matrix = [[0.0; 3]; 3];
        matrix[0][0] = hxx;
        matrix[2][2] = -hxx;
        matrix[0][2] = hxz;
        matrix[2][0] = hxz;
        Self { hxx, hxz, matrix, constrained: true }
    }

    /// An arbitrary tensor with no physical-field guarantee (e.g. the textbook `zz`).
    pub fn unconstrained(matrix: [[f64; 3]; 3]) -> Self {
        Self { hxx: matrix[0][0], hxz: matrix[0][2], matrix, constrained: false }
    }

    /// `z m`, the von Neumann coupling that measures `sigma . m` through `p_z`.
    pub fn z_dyad(m: [f64; 3]) -> Self {
        let mut matrix = [[0.0; 3]; 3];
        matrix[2] = m;
        Self::unconstrained(matrix)
    }

    pub fn hxx(&self) -> f64 {
        self.hxx
    }

    pub fn hxz(&self) -> f64 {
        self.hxz
    }

    pub fn is_constrained(&self) -> bool {
        self.constrained
    }

    pub fn matrix(&self) -> &[[f64; 3]; 3] {
        &self.matrix
    }

    pub fn max_entry(&self) -> f64 {
        self.matrix.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `H . v` for a complex Cartesian vector (the tensor acts on the spin index).
    pub fn apply(&self, v: &[Complex64; 3]) -> [Complex64; 3] {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (i, o) in out.iter_mut().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                *o += *vj * self.matrix[i][j];
            }
        }
        out
    }

    /// `r . H`, the effective spin direction (unnormalized) at position `r`.
    pub fn contract_position(&self, r: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (j, o) in out.iter_mut().enumerate() {
            for (i, ri) in r.iter().enumerate() {
                *o += ri * self.matrix[i][j];
            }
        }
        out
    }

    /// The field gradients this tensor encodes when `gS muB / (2 hbar eta) = 1`.
    pub fn equivalent_gradients(&self) -> FieldGradients {
        // sigma.B = sum r_i M_ij sigma_j with M = [[Bxx, ., Bzx], [., ., .], [Bxz, ., Bzz]]
        // and H = -M in these units.
        let m = &self.matrix;
        FieldGradients { bxx: -m[0][0], bxz: -m[2][0], bzx: -m[0][2], bzz: -m[2][2] }
    }

    /// Checks symmetry, tracelessness, the empty y row/column, and Maxwell's equations.
    pub fn satisfies_maxwell(&self, tol: f64) -> bool {
        let m = &self.matrix;
        let y_empty = (0..3).all(|k| m[1][k] == 0.0 && m[k][1] == 0.0);
        y_empty && validate_maxwell(&self.equivalent_gradients(), tol).ok
    }
}

/// Linear magnetic-field gradients in the plane transverse to the beam:
/// `B = x (Bxx x + Bxz z) + z (Bzx x + Bzz z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldGradients {
    pub bxx: f64,
    pub bxz: f64,
    pub bzx: f64,
    pub bzz: f64,
}

impl FieldGradients {
    pub fn new(bxx: f64, bxz: f64, bzx: f64, bzz: f64) -> Self {
        Self { bxx, bxz, bzx, bzz }
    }

    fn scale(&self) -> f64 {
        [self.bxx, self.bxz, self.bzx, self.bzz].iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxwellReport {
    pub ok: bool,
    pub residual_div: f64,
    pub residual_curl: f64,
}

/// Divergence `Bxx + Bzz` and curl `Bzx - Bxz` residuals, accepted when both are
/// within `tol` times the largest gradient.
pub fn validate_maxwell(b: &FieldGradients, tol: f64) -> MaxwellReport {
    assert!(tol > 0.0, "tolerance must be positive");
    let residual_div = (b.bxx + b.bzz).abs();
    let residual_curl = (b.bzx - b.bxz).abs();
    let bound = tol * b.scale();
    MaxwellReport { ok: residual_div <= bound && residual_curl <= bound, residual_div, residual_curl }
}

pub const MAXWELL_TOLERANCE: f64 = 1e-12;

/// Maps field gradients onto `(eta, H)` with `max(|Hxx|, |Hxz|) = 1`.
///
/// `(gS muB / 2) sigma.B(R) = -hbar eta R.H.sigma` holds exactly for the
/// returned pair: with `kappa = gS muB / (2 hbar)`, `eta = kappa max(|Bzz|, |Bxz|)`
/// and `H = -(kappa / eta) M`, where `M` collects the gradients. The Maxwell
/// constraints `Bzz = -Bxx`, `Bzx = Bxz` make `M = Bxx (xx - zz) + Bxz (xz + zx)`.
pub fn coupling_from_gradients(b: &FieldGradients, g_s: f64, mu_b: f64, hbar: f64) -> Result<(f64, CouplingTensor)> {
    if b.scale() == 0.0 {
        return Err(Error::ZeroField);
    }
    let report = validate_maxwell(b, MAXWELL_TOLERANCE);
    if !report.ok {
        return Err(Error::InvalidField { div: report.residual_div, curl: report.residual_curl });
    }
    let kappa = g_s * mu_b / (2.0 * hbar);
    let norm = b.bzz.abs().max(b.bxz.abs());
    let eta = kappa.abs() * norm;
    let sign = -kappa.signum();
    Ok((eta, CouplingTensor::maxwell(sign * b.bxx / norm, sign * b.bxz / norm)))
}

/// Unit-height boxcar window; `extent` is a length (spatial) or a duration (temporal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    extent: f64,
    center: f64,
}

impl Window {
    pub fn boxcar(extent: f64) -> Result<Self> {
        Self::boxcar_at(extent, 0.0)
    }

    pub fn boxcar_at(extent: f64, center: f64) -> Result<Self> {
        if !(extent > 0.0 && extent.is_finite() && center.is_finite()) {
            return Err(Error::config("window.extent", format!("must be positive and finite, got {extent}")));
        }
        Ok(Self { extent, center })
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.extent / 2.0, self.center + self.extent / 2.0)
    }

    /// 1 inside, 0 outside, 1/2 on the edges (so grid sums reproduce the extent).
    pub fn value(&self, s: f64) -> f64 {
        let d = (s - self.center).abs() - self.extent / 2.0;
        let edge = 1e-12 * self.extent.max(1.0);
        if d < -edge {
            1.0
        } else if d > edge {
            0.0
        } else {
            0.5
        }
    }

    /// Exact integral of the window over `[a, b]`.
    pub fn integral_over(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = self.support();
        (b.min(hi) - a.max(lo)).max(0.0)
    }

    /// Exact first moment `int s g(s) ds` over `[a, b]`.
    pub fn first_moment_over(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = self.support();
        let (l, h) = (a.max(lo), b.min(hi));
        if h <= l {
            0.0
        } else {
            (h * h - l * l) / 2.0
        }
    }

    /// `int g`, the interaction time (temporal) or length (spatial).
    pub fn integral(&self) -> f64 {
        self.extent
    }

    /// `(1 / 2 pi hbar) int e^{-i p s / hbar} g(s) ds`, including the off-center phase.
    pub fn fourier(&self, p: f64, hbar: f64) -> Complex64 {
        let phase = Complex64::from_polar(1.0, -p * self.center / hbar);
        phase * sinc_transform(p, self.extent, hbar)
    }

    /// `d/dp` of the centered transform, evaluated analytically.
    pub fn fourier_derivative(&self, p: f64, hbar: f64) -> Complex64 {
        let a = self.extent / (2.0 * hbar);
        let centered = Complex64::new(a * a / PI * sinc_prime(a * p), 0.0);
        let shift = Complex64::new(0.0, -self.center / hbar) * sinc_transform(p, self.extent, hbar);
        Complex64::from_polar(1.0, -p * self.center / hbar) * (centered + shift)
    }
}

/// `sin(p L / 2 hbar) / (pi p)`, continuous at zero.
fn sinc_transform(p: f64, extent: f64, hbar: f64) -> f64 {
    let a = extent / (2.0 * hbar);
    a / PI * sinc(a * p)
}

fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        let u2 = u * u;
        1.0 - u2 / 6.0 + u2 * u2 / 120.0
    } else {
        u.sin() / u
    }
}

fn sinc_prime(u: f64) -> f64 {
    if u.abs() < 1e-3 {
        let u2 = u * u;
        -u / 3.0 + u * u2 / 30.0 - u * u2 * u2 / 840.0
    } else {
        (u * u.cos() - u.sin()) / (u * u)
    }
}

/// Real Fourier transform of a window centered at the origin.
pub fn window_fourier(w: &Window, p: f64, hbar: f64) -> f64 {
    debug_assert!(w.center == 0.0, "window_fourier expects a centered window");
    sinc_transform(p, w.extent, hbar)
}

/// `|gbar(2 p0) / gbar(0)| = |sin(p0 L / hbar)| / (p0 L / hbar)`.
pub fn backscatter_ratio(w: &Window, p0: f64, hbar: f64) -> f64 {
    let u = p0 * w.extent / hbar;
    sinc(u).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn maxwell_validation_examples() {
        let r = validate_maxwell(&FieldGradients::new(1.0, 0.0, 0.0, -1.0), 1e-12);
        assert!(r.ok);
        assert_eq!((r.residual_div, r.residual_curl), (0.0, 0.0));

        let r = validate_maxwell(&FieldGradients::new(1.0, 0.0, 0.0, 1.0), 1e-12);
        assert!(!r.ok);
        assert_eq!(r.residual_div, 2.0);

        let r = validate_maxwell(&FieldGradients::new(0.0, 3.0, 2.0, 0.0), 1e-12);
        assert!(!r.ok);
        assert_eq!(r.residual_curl, 1.0);
    }

    #[test]
    fn textbook_zz_is_not_a_physical_field() {
        let mut zz = [[0.0; 3]; 3];
        zz[2][2] = 1.0;
        assert!(!CouplingTensor::unconstrained(zz).satisfies_maxwell(1e-9));
        assert!(CouplingTensor::maxwell(-1.0, 0.0).satisfies_maxwell(1e-12));
    }

    #[test]
    fn gradients_map_onto_the_maxwell_family() {
        let (g, mu_b, hbar) = (G_S, 0.7, 1.3);
        let kappa = g * mu_b / (2.0 * hbar);
        let b = 0.4;

        let (eta, h) = coupling_from_gradients(&FieldGradients::new(0.0, b, b, 0.0), g, mu_b, hbar).unwrap();
        assert!((eta - kappa * b).abs() < 1e-15);
        assert_eq!((h.hxx(), h.hxz()), (0.0, -1.0));

        let (_, h) = coupling_from_gradients(&FieldGradients::new(b, 0.0, 0.0, -b), g, mu_b, hbar).unwrap();
        // zz - xx
        assert_eq!(h.matrix()[2][2], 1.0);
        assert_eq!(h.matrix()[0][0], -1.0);
        assert!(h.is_constrained());
    }

    #[test]
    fn coupling_errors() {
        let z = FieldGradients::new(0.0, 0.0, 0.0, 0.0);
        assert!(matches!(coupling_from_gradients(&z, G_S, 1.0, 1.0), Err(Error::ZeroField)));
        let bad = FieldGradients::new(1.0, 0.0, 0.0, 1.0);
        assert!(matches!(coupling_from_gradients(&bad, G_S, 1.0, 1.0), Err(Error::InvalidField { .. })));
    }

    proptest! {
        #[test]
        fn coupling_reproduces_the_zeeman_term(bxx in -5.0f64..5.0, bxz in -5.0f64..5.0,
                                                x in -3.0f64..3.0, z in -3.0f64..3.0) {
            prop_assume!(bxx.abs().max(bxz.abs()) > 1e-3);
            let (g, mu_b, hbar) = (G_S, 0.9, 1.1);
            let b = FieldGradients::new(bxx, bxz, bxz, -bxx);
            let (eta, h) = coupling_from_gradients(&b, g, mu_b, hbar).unwrap();
            prop_assert!((h.hxx().abs().max(h.hxz().abs()) - 1.0).abs() < 1e-15);
            // (gS muB / 2) B(r) must equal -hbar eta (r.H) component-wise
            let field = [bxx * x + bxz * z, 0.0, bxz * x - bxx * z];
            let rh = h.contract_position([x, 0.0, z]);
            for k in 0..3 {
                prop_assert!((g * mu_b / 2.0 * field[k] + hbar * eta * rh[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn window_fourier_examples() {
        let (l, hbar) = (2.0, 0.5);
        let w = Window::boxcar(l).unwrap();
        assert_eq!(window_fourier(&w, 0.0, hbar), l / (2.0 * PI * hbar));
        assert!(window_fourier(&w, 2.0 * PI * hbar / l, hbar).abs() < 1e-15);
        let p = PI * hbar / l;
        assert!((window_fourier(&w, p, hbar) - l / (PI * PI * hbar)).abs() < 1e-14);
    }

    #[test]
    fn window_fourier_is_continuous_at_zero() {
        let w = Window::boxcar(3.0).unwrap();
        let g0 = window_fourier(&w, 0.0, 1.0);
        for p in [1e-9, 1e-6, 1e-4, 2e-4] {
            assert!((window_fourier(&w, p, 1.0) - g0).abs() < 1e-7 * g0 + 1e-15);
        }
    }

    #[test]
    fn window_fourier_derivative_matches_differencing() {
        let w = Window::boxcar(1.7).unwrap();
        let hbar = 0.8;
        for p in [-3.0, -0.2, 1e-5, 0.4, 2.0 * PI * hbar / 1.7, 5.5] {
            let h = 1e-5;
            let fd = (window_fourier(&w, p + h, hbar) - window_fourier(&w, p - h, hbar)) / (2.0 * h);
            assert!((w.fourier_derivative(p, hbar).re - fd).abs() < 1e-8);
        }
        // at p = 2 pi hbar / L the sine term vanishes and cos = -1
        let p = 2.0 * PI * hbar / 1.7;
        let expected = -(1.7 / (2.0 * PI * hbar)) / p;
        assert!((w.fourier_derivative(p, hbar).re - expected).abs() < 1e-12);
    }

    #[test]
    fn off_center_window_picks_up_a_phase() {
        let w = Window::boxcar_at(1.0, 0.3).unwrap();
        let c = Window::boxcar(1.0).unwrap();
        let p = 1.9;
        let ratio = w.fourier(p, 1.0) / c.fourier(p, 1.0);
        assert!((ratio - Complex64::from_polar(1.0, -p * 0.3)).norm() < 1e-14);
    }

    #[test]
    fn window_fourier_parseval() {
        // sum |gbar|^2 dp over a wide grid against (1 / 2 pi hbar) int g^2
        let (l, hbar) = (1.0, 1.0);
        let w = Window::boxcar(l).unwrap();
        let dp = 1.0;
        let n = 1usize << 21;
        let sum: f64 = (0..n)
            .map(|k| {
                let p = (k as f64 - (n / 2) as f64) * dp;
                window_fourier(&w, p, hbar).powi(2)
            })
            .sum::<f64>()
            * dp;
        assert!((sum - l / (2.0 * PI * hbar)).abs() < 1e-6);
    }

    #[test]
    fn window_values_and_moments() {
        let w = Window::boxcar(2.0).unwrap();
        assert_eq!(w.value(0.3), 1.0);
        assert_eq!(w.value(1.0), 0.5);
        assert_eq!(w.value(1.2), 0.0);
        assert_eq!(w.integral_over(-5.0, 5.0), 2.0);
        assert_eq!(w.integral_over(0.5, 5.0), 0.5);
        assert_eq!(w.first_moment_over(-5.0, 5.0), 0.0);
        let s = Window::boxcar_at(2.0, 0.25).unwrap();
        assert!((s.first_moment_over(-5.0, 5.0) - 0.25 * 2.0).abs() < 1e-15);
        assert!(Window::boxcar(0.0).is_err());
    }

    #[test]
    fn backscatter_examples() {
        let w = Window::boxcar(1.0).unwrap();
        assert!(backscatter_ratio(&w, 100.0, 1.0) <= 0.01);
        assert!((backscatter_ratio(&w, 1e-9, 1.0) - 1.0).abs() < 1e-12);
        assert!(backscatter_ratio(&w, PI, 1.0) < 1e-15);
        for p0 in [0.1, 0.7, 3.0, 17.0] {
            let r = backscatter_ratio(&w, p0, 1.0);
            assert!(r <= 1.0 && r <= 1.0 / p0 + 1e-15);
            let direct = (window_fourier(&w, 2.0 * p0, 1.0) / window_fourier(&w, 0.0, 1.0)).abs();
            assert!((r - direct).abs() < 1e-14);
        }
    }
}
