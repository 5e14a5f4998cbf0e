//! Rectangular momentum grids, spinor-valued wave fields on them, and the
//! unitary FFT dual to position space.
//!
//! Axis `a` with `n` points spans `p_k = (k - n/2) dp`, `dp = 2 p_max / n`, and
//! its position dual spans `r_j = (j - n/2) dr` with `dp dr = 2 pi hbar / n`.
//! Position to momentum uses `e^{-i p r / hbar}`; both directions are unitary
//! with respect to the quadrature norm `sum |psi|^2 dV`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::spin::SpinorState;
use crate::Axis;

pub type Spinor = [Complex64; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Minimum grid points per momentum width on every active axis.
pub const POINTS_PER_SIGMA: f64 = 4.0;
/// Packets must fit inside the grid out to this many widths.
pub const CONTAINMENT_SIGMAS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisGrid {
    pub axis: Axis,
    pub n: usize,
    pub p_max: f64,
}

impl AxisGrid {
    pub fn new(axis: Axis, n: usize, p_max: f64) -> Self {
        Self { axis, n, p_max }
    }

    pub fn dp(&self) -> f64 {
        2.0 * self.p_max / self.n as f64
    }

    pub fn dr(&self, hbar: f64) -> f64 {
        2.0 * PI * hbar / (self.n as f64 * self.dp())
    }

    pub fn momentum(&self, k: usize) -> f64 {
        (k as f64 - (self.n / 2) as f64) * self.dp()
    }

    pub fn position(&self, j: usize, hbar: f64) -> f64 {
        (j as f64 - (self.n / 2) as f64) * self.dr(hbar)
    }

    /// Length of the periodic position box, `2 pi hbar / dp`.
    pub fn box_length(&self, hbar: f64) -> f64 {
        2.0 * PI * hbar / self.dp()
    }

    /// Index of the grid momentum nearest to `p`, if it lies on the grid.
    pub fn nearest_index(&self, p: f64) -> Option<usize> {
        let k = (p / self.dp() + (self.n / 2) as f64).round();
        (k >= 0.0 && (k as usize) < self.n).then_some(k as usize)
    }
}

/// Grid specification over a subset of the Cartesian axes, stored in x, y, z order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    axes: Vec<AxisGrid>,
    hbar: f64,
}

impl GridSpec {
    pub fn new(mut axes: Vec<AxisGrid>, hbar: f64) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Axis("grid needs at least one axis".into()));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::config("physics.hbar", "must be positive"));
        }
        axes.sort_by_key(|a| a.axis);
        for pair in axes.windows(2) {
            if pair[0].axis == pair[1].axis {
                return Err(Error::Axis(format!("axis {} listed twice", pair[0].axis)));
            }
        }
        for a in &axes {
            if a.n < 8 || !a.n.is_power_of_two() {
                return Err(Error::config(
                    format!("grid.{}.n", a.axis),
                    format!("must be a power of two >= 8, got {}", a.n),
                ));
            }
            if !(a.p_max > 0.0 && a.p_max.is_finite()) {
                return Err(Error::config(format!("grid.{}.pmax", a.axis), "must be positive"));
            }
        }
        Ok(Self { axes, hbar })
    }

    pub fn axes(&self) -> &[AxisGrid] {
        &self.axes
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn has_axis(&self, axis: Axis) -> bool {
        self.position_of(axis).is_some()
    }

    /// Slot of `axis` among the active axes.
    pub fn position_of(&self, axis: Axis) -> Option<usize> {
        self.axes.iter().position(|a| a.axis == axis)
    }

    pub fn axis(&self, axis: Axis) -> Result<&AxisGrid> {
        self.axes
            .iter()
            .find(|a| a.axis == axis)
            .ok_or_else(|| Error::Axis(format!("axis {axis} is not active on this grid")))
    }

    /// Row-major strides; the last active axis is contiguous.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.axes.len()];
        for i in (0..self.axes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.axes[i + 1].n;
        }
        strides
    }

    pub fn cell_volume(&self, repr: Representation) -> f64 {
        self.axes
            .iter()
            .map(|a| match repr {
                Representation::Momentum => a.dp(),
                Representation::Position => a.dr(self.hbar),
            })
            .product()
    }

    /// Per-axis coordinate tables for the requested representation.
    pub fn coordinates(&self, repr: Representation) -> Vec<Vec<f64>> {
        self.axes
            .iter()
            .map(|a| {
                (0..a.n)
                    .map(|k| match repr {
                        Representation::Momentum => a.momentum(k),
                        Representation::Position => a.position(k, self.hbar),
                    })
                    .collect()
            })
            .collect()
    }

    /// Visits every point with its Cartesian coordinates (inactive axes are 0).
    pub fn for_each_point(&self, repr: Representation, mut f: impl FnMut(usize, [f64; 3])) {
        let coords = self.coordinates(repr);
        let mut multi = vec![0usize; self.axes.len()];
        for idx in 0..self.len() {
            let mut c = [0.0; 3];
            for (slot, a) in self.axes.iter().enumerate() {
                c[a.axis.index()] = coords[slot][multi[slot]];
            }
            f(idx, c);
            for slot in (0..multi.len()).rev() {
                multi[slot] += 1;
                if multi[slot] < self.axes[slot].n {
                    break;
                }
                multi[slot] = 0;
            }
        }
    }

    /// Cartesian coordinates of every grid point.
    pub fn point_coordinates(&self, repr: Representation) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(self.len());
        self.for_each_point(repr, |_, c| out.push(c));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Momentum,
    Position,
}

impl Representation {
    pub fn name(self) -> &'static str {
        match self {
            Representation::Momentum => "momentum",
            Representation::Position => "position",
        }
    }
}

/// Gaussian product packet `prod_a exp(-(p_a - c_a)^2 / 4 s_a^2)` times a spinor.
///
/// A complex center `c = a + i b` keeps the momentum mean at `a` and moves the
/// position mean by `-hbar b / (2 s^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    pub center: [Complex64; 3],
    pub sigma: [f64; 3],
    pub spin: SpinorState,
}

impl GaussianSpec {
    pub fn new(center: [f64; 3], sigma: [f64; 3], spin: SpinorState) -> Self {
        Self { center: center.map(|c| Complex64::new(c, 0.0)), sigma, spin }
    }

    pub fn isotropic(sigma: f64, spin: SpinorState) -> Self {
        Self::new([0.0; 3], [sigma; 3], spin)
    }

    pub fn with_center(mut self, center: [Complex64; 3]) -> Self {
        self.center = center;
        self
    }

    fn amplitude(&self, grid: &GridSpec, p: [f64; 3]) -> Complex64 {
        let mut exponent = ZERO;
        for a in grid.axes() {
            let i = a.axis.index();
            let d = Complex64::new(p[i], 0.0) - self.center[i];
            exponent -= d * d / (4.0 * self.sigma[i] * self.sigma[i]);
        }
        exponent.exp()
    }

    fn check(&self, grid: &GridSpec) -> Result<()> {
        for a in grid.axes() {
            let i = a.axis.index();
            let s = self.sigma[i];
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::config(format!("packet.sigma.{}", a.axis), "must be positive"));
            }
            if s / a.dp() < POINTS_PER_SIGMA {
                return Err(Error::Resolution(format!(
                    "axis {}: {:.2} points per sigma, need {}",
                    a.axis,
                    s / a.dp(),
                    POINTS_PER_SIGMA
                )));
            }
            let c = self.center[i];
            if c.re.abs() + CONTAINMENT_SIGMAS * s > a.p_max {
                return Err(Error::Containment(format!(
                    "axis {}: |center| + {}sigma = {:.4} exceeds p_max = {}",
                    a.axis,
                    CONTAINMENT_SIGMAS,
                    c.re.abs() + CONTAINMENT_SIGMAS * s,
                    a.p_max
                )));
            }
            let sigma_r = grid.hbar() / (2.0 * s);
            let shift = grid.hbar() * c.im / (2.0 * s * s);
            if shift.abs() + CONTAINMENT_SIGMAS * sigma_r > a.box_length(grid.hbar()) / 2.0 {
                return Err(Error::Containment(format!("axis {}: position shift {shift:.4} leaves the box", a.axis)));
            }
        }
        Ok(())
    }
}

/// Spinor amplitudes on a grid, in momentum or position representation.
#[derive(Debug, Clone)]
pub struct WaveField {
    grid: GridSpec,
    data: Vec<Spinor>,
    repr: Representation,
    backing: Option<GaussianSpec>,
}

impl WaveField {
    pub fn from_data(grid: GridSpec, repr: Representation, data: Vec<Spinor>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Axis(format!("data length {} does not match grid size {}", data.len(), grid.len())));
        }
        if data.iter().flatten().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidState("non-finite amplitude".into()));
        }
        Ok(Self { grid, data, repr, backing: None })
    }

    /// Samples `f` at every point of the chosen representation.
    pub fn from_fn(grid: GridSpec, repr: Representation, mut f: impl FnMut([f64; 3]) -> Spinor) -> Result<Self> {
        let mut data = Vec::with_capacity(grid.len());
        grid.for_each_point(repr, |_, c| data.push(f(c)));
        Self::from_data(grid, repr, data)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &[Spinor] {
        &self.data
    }

    /// Amplitudes of a spin-free field (down component zero), as used for translational states.
    pub fn scalar_amplitudes(&self) -> Result<Vec<Complex64>> {
        let down: f64 = self.data.iter().map(|s| s[1].norm_sqr()).sum();
        let up: f64 = self.data.iter().map(|s| s[0].norm_sqr()).sum();
        if down > 1e-24 * up.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidState("translational state must live in the up component only".into()));
        }
        Ok(self.data.iter().map(|s| s[0]).collect())
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    /// The analytic Gaussian this field samples, if any.
    pub fn gaussian_backing(&self) -> Option<&GaussianSpec> {
        self.backing.as_ref()
    }

    pub(crate) fn with_backing(mut self, backing: Option<GaussianSpec>) -> Self {
        self.backing = backing;
        self
    }

    pub(crate) fn into_parts(self) -> (GridSpec, Vec<Spinor>, Representation) {
        (self.grid, self.data, self.repr)
    }

    pub fn cell_volume(&self) -> f64 {
        self.grid.cell_volume(self.repr)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|s| s[0].norm_sqr() + s[1].norm_sqr()).sum::<f64>() * self.cell_volume()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidState("cannot normalize a zero field".into()));
        }
        for s in &mut self.data {
            s[0] /= n;
            s[1] /= n;
        }
        Ok(self)
    }

    pub fn scaled(mut self, factor: Complex64) -> Self {
        for s in &mut self.data {
            s[0] *= factor;
            s[1] *= factor;
        }
        self.backing = None;
        self
    }

    /// `<self|other>`, summed over both spin components.
    pub fn inner(&self, other: &WaveField) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(Error::Axis("inner product of fields on different grids".into()));
        }
        if self.repr != other.repr {
            return Err(Error::Representation { expected: self.repr.name(), found: other.repr.name() });
        }
        let sum: Complex64 =
            self.data.iter().zip(&other.data).map(|(a, b)| a[0].conj() * b[0] + a[1].conj() * b[1]).sum();
        Ok(sum * self.cell_volume())
    }

    /// `self - other` as a plain norm, for residual checks.
    pub fn distance(&self, other: &WaveField) -> Result<f64> {
        if self.grid != other.grid || self.repr != other.repr {
            return Err(Error::Axis("distance between incompatible fields".into()));
        }
        let s: f64 =
            self.data.iter().zip(&other.data).map(|(a, b)| (a[0] - b[0]).norm_sqr() + (a[1] - b[1]).norm_sqr()).sum();
        Ok((s * self.cell_volume()).sqrt())
    }

    pub fn to_position(&self) -> Result<WaveField> {
        self.expect(Representation::Momentum)?;
        let mut out = self.clone();
        SpectralTransform::new(&self.grid).momentum_to_position(&mut out.data);
        out.repr = Representation::Position;
        Ok(out)
    }

    pub fn to_momentum(&self) -> Result<WaveField> {
        self.expect(Representation::Position)?;
        let mut out = self.clone();
        SpectralTransform::new(&self.grid).position_to_momentum(&mut out.data);
        out.repr = Representation::Momentum;
        Ok(out)
    }

    /// Converts to the requested representation, cloning when already there.
    pub fn in_representation(&self, repr: Representation) -> Result<WaveField> {
        match (self.repr, repr) {
            (a, b) if a == b => Ok(self.clone()),
            (Representation::Momentum, Representation::Position) => self.to_position(),
            _ => self.to_momentum(),
        }
    }

    fn expect(&self, repr: Representation) -> Result<()> {
        if self.repr != repr {
            return Err(Error::Representation { expected: repr.name(), found: self.repr.name() });
        }
        Ok(())
    }

    /// Multiplies each point by the 2x2 matrix returned for its coordinates.
    pub fn map_points(&self, mut f: impl FnMut([f64; 3], Spinor) -> Spinor) -> WaveField {
        let mut out = self.clone();
        out.backing = None;
        let coords = self.grid.point_coordinates(self.repr);
        for (s, c) in out.data.iter_mut().zip(coords) {
            *s = f(c, *s);
        }
        out
    }

    /// Probability per momentum (or position) value along one axis, other axes and spin summed.
    pub fn marginal(&self, axis: Axis) -> Result<(Vec<f64>, Vec<f64>)> {
        let slot = self.grid.position_of(axis).ok_or_else(|| Error::Axis(format!("axis {axis} not active")))?;
        let coords = self.grid.coordinates(self.repr).swap_remove(slot);
        let a = self.grid.axes()[slot];
        let stride = self.grid.strides()[slot];
        let mut density = vec![0.0; a.n];
        for (idx, s) in self.data.iter().enumerate() {
            density[(idx / stride) % a.n] += s[0].norm_sqr() + s[1].norm_sqr();
        }
        let other = self.cell_volume() / self.grid.cell_volume_axis(slot, self.repr);
        density.iter_mut().for_each(|d| *d *= other);
        Ok((coords, density))
    }

    /// Norm, momentum means and covariances, and position means; spin traced out.
    pub fn moments(&self) -> Result<Moments> {
        let momentum = self.in_representation(Representation::Momentum)?;
        let position = self.in_representation(Representation::Position)?;
        let (norm_sqr, mean_p, cov_p) = first_two_moments(&momentum);
        let (_, mean_r, _) = first_two_moments(&position);
        let axes = self.grid.axes().iter().map(|a| a.axis).collect();
        Ok(Moments { axes, norm_sqr, mean_p, cov_p, mean_r })
    }

    /// Probability density on a coordinate plane of the current representation.
    pub fn slice_heatmap(&self, plane: (Axis, Axis), reduce: SliceReduce) -> Result<Heatmap> {
        if self.grid.axes().len() < 2 {
            return Err(Error::Axis("heatmaps need at least two active axes".into()));
        }
        if plane.0 == plane.1 {
            return Err(Error::Axis("heatmap plane needs two distinct axes".into()));
        }
        let s1 = self.grid.position_of(plane.0).ok_or_else(|| Error::Axis(format!("axis {} not active", plane.0)))?;
        let s2 = self.grid.position_of(plane.1).ok_or_else(|| Error::Axis(format!("axis {} not active", plane.1)))?;
        let axes = self.grid.axes();
        let strides = self.grid.strides();
        let (n1, n2) = (axes[s1].n, axes[s2].n);
        let coords = self.grid.coordinates(self.repr);
        let mut density = vec![0.0; n1 * n2];
        for (idx, s) in self.data.iter().enumerate() {
            if let SliceReduce::FixIndex(fixed) = &reduce {
                let keep = axes.iter().enumerate().all(|(slot, a)| {
                    slot == s1 || slot == s2 || {
                        let want = fixed.iter().find(|(ax, _)| *ax == a.axis).map(|(_, i)| *i).unwrap_or(a.n / 2);
                        (idx / strides[slot]) % a.n == want
                    }
                });
                if !keep {
                    continue;
                }
            }
            let i1 = (idx / strides[s1]) % n1;
            let i2 = (idx / strides[s2]) % n2;
            density[i1 * n2 + i2] += s[0].norm_sqr() + s[1].norm_sqr();
        }
        let rest = match reduce {
            SliceReduce::Marginalize => {
                self.cell_volume()
                    / (self.grid.cell_volume_axis(s1, self.repr) * self.grid.cell_volume_axis(s2, self.repr))
            }
            SliceReduce::FixIndex(_) => 1.0,
        };
        density.iter_mut().for_each(|d| *d *= rest);
        Ok(Heatmap {
            axes: plane,
            coords1: coords[s1].clone(),
            coords2: coords[s2].clone(),
            cell: (self.grid.cell_volume_axis(s1, self.repr), self.grid.cell_volume_axis(s2, self.repr)),
            density,
        })
    }
}

impl GridSpec {
    fn cell_volume_axis(&self, slot: usize, repr: Representation) -> f64 {
        let a = &self.axes[slot];
        match repr {
            Representation::Momentum => a.dp(),
            Representation::Position => a.dr(self.hbar),
        }
    }
}

fn first_two_moments(f: &WaveField) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
    let d = f.grid.axes().len();
    let coords = f.grid.coordinates(f.repr);
    let strides = f.grid.strides();
    let mut norm = 0.0;
    let mut mean = vec![0.0; d];
    let mut second = vec![vec![0.0; d]; d];
    let mut c = vec![0.0; d];
    for (idx, s) in f.data.iter().enumerate() {
        let w = s[0].norm_sqr() + s[1].norm_sqr();
        if w == 0.0 {
            continue;
        }
        for slot in 0..d {
            c[slot] = coords[slot][(idx / strides[slot]) % f.grid.axes[slot].n];
        }
        norm += w;
        for a in 0..d {
            mean[a] += w * c[a];
            for b in a..d {
                second[a][b] += w * c[a] * c[b];
            }
        }
    }
    let norm_sqr = norm * f.cell_volume();
    for m in mean.iter_mut() {
        *m /= norm;
    }
    let mut cov = vec![vec![0.0; d]; d];
    for a in 0..d {
        for b in a..d {
            cov[a][b] = second[a][b] / norm - mean[a] * mean[b];
            cov[b][a] = cov[a][b];
        }
    }
    (norm_sqr, mean, cov)
}

/// Quadrature moments of a wave field.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub axes: Vec<Axis>,
    pub norm_sqr: f64,
    pub mean_p: Vec<f64>,
    pub cov_p: Vec<Vec<f64>>,
    pub mean_r: Vec<f64>,
}

impl Moments {
    fn slot(&self, axis: Axis) -> usize {
        self.axes.iter().position(|a| *a == axis).unwrap_or_else(|| panic!("axis {axis} not in moments"))
    }

    pub fn mean_p_along(&self, axis: Axis) -> f64 {
        self.mean_p[self.slot(axis)]
    }

    pub fn var_p_along(&self, axis: Axis) -> f64 {
        let s = self.slot(axis);
        self.cov_p[s][s]
    }

    pub fn mean_r_along(&self, axis: Axis) -> f64 {
        self.mean_r[self.slot(axis)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SliceReduce {
    /// Integrate over every axis outside the plane.
    Marginalize,
    /// Fix the listed axes at the given indices; unlisted axes use their center index.
    FixIndex(Vec<(Axis, usize)>),
}

/// Density on a plane; `density[i1 * coords2.len() + i2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub axes: (Axis, Axis),
    pub coords1: Vec<f64>,
    pub coords2: Vec<f64>,
    pub cell: (f64, f64),
    pub density: Vec<f64>,
}

impl Heatmap {
    pub fn at(&self, i1: usize, i2: usize) -> f64 {
        self.density[i1 * self.coords2.len() + i2]
    }

    pub fn total(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.cell.0 * self.cell.1
    }

    pub fn argmax(&self) -> (f64, f64) {
        let (best, _) =
            self.density
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        let n2 = self.coords2.len();
        (self.coords1[best / n2], self.coords2[best % n2])
    }
}

/// Builds the normalized momentum-space Gaussian described by `spec`.
pub fn make_gaussian(grid: &GridSpec, spec: &GaussianSpec) -> Result<WaveField> {
    spec.check(grid)?;
    gaussian_unchecked(grid, spec)
}

pub(crate) fn gaussian_unchecked(grid: &GridSpec, spec: &GaussianSpec) -> Result<WaveField> {
    let spin = spec.spin.amplitudes();
    let f = WaveField::from_fn(grid.clone(), Representation::Momentum, |p| {
        let a = spec.amplitude(grid, p);
        [a * spin[0], a * spin[1]]
    })?;
    Ok(f.normalized()?.with_backing(Some(*spec)))
}

/// Returns `phi(p - dp)`.
///
/// Real shifts are applied as the exact position-space phase `e^{i dp.r / hbar}`;
/// complex shifts re-evaluate the analytic Gaussian behind the field and renormalize.
pub fn displace(f: &WaveField, dp: [Complex64; 3]) -> Result<WaveField> {
    f.expect(Representation::Momentum)?;
    for axis in Axis::ALL {
        if !f.grid.has_axis(axis) && dp[axis.index()].norm() != 0.0 {
            return Err(Error::Axis(format!("displacement along inactive axis {axis}")));
        }
    }
    if dp.iter().all(|d| d.im == 0.0) {
        if dp.iter().all(|d| d.re == 0.0) {
            return Ok(f.clone());
        }
        check_shift_containment(f, dp)?;
        let hbar = f.grid.hbar();
        let shifted = f.to_position()?.map_points(|r, s| {
            let phase = Complex64::from_polar(1.0, (0..3).map(|i| dp[i].re * r[i]).sum::<f64>() / hbar);
            [s[0] * phase, s[1] * phase]
        });
        let backing = f.backing.map(|b| b.with_center([0, 1, 2].map(|i| b.center[i] + dp[i])));
        return Ok(shifted.to_momentum()?.with_backing(backing));
    }
    let backing = f.backing.ok_or(Error::NonGaussianComplexShift)?;
    let moved = backing.with_center([0, 1, 2].map(|i| backing.center[i] + dp[i]));
    make_gaussian(&f.grid, &moved)
}

/// Probability that would wrap around the momentum box under a real shift.
fn check_shift_containment(f: &WaveField, dp: [Complex64; 3]) -> Result<()> {
    let mut wrapped = 0.0;
    let vol = f.cell_volume();
    f.grid.for_each_point(Representation::Momentum, |idx, p| {
        let out = f.grid.axes().iter().any(|a| {
            let q = p[a.axis.index()] + dp[a.axis.index()].re;
            q < -a.p_max || q >= a.p_max
        });
        if out {
            let s = f.data[idx];
            wrapped += (s[0].norm_sqr() + s[1].norm_sqr()) * vol;
        }
    });
    if wrapped > 1e-10 * f.norm_sqr().max(f64::MIN_POSITIVE) {
        return Err(Error::Containment(format!("shift would wrap {wrapped:.3e} of the probability")));
    }
    Ok(())
}

/// Cached FFT plans for every axis of a grid.
#[derive(Clone)]
pub struct SpectralTransform {
    axes: Vec<AxisGrid>,
    strides: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    to_position_scale: f64,
    to_momentum_scale: f64,
}

impl SpectralTransform {
    pub fn new(grid: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let forward = grid.axes().iter().map(|a| planner.plan_fft(a.n, FftDirection::Forward)).collect();
        let inverse = grid.axes().iter().map(|a| planner.plan_fft(a.n, FftDirection::Inverse)).collect();
        let norm = (2.0 * PI * grid.hbar()).sqrt();
        Self {
            axes: grid.axes().to_vec(),
            strides: grid.strides(),
            forward,
            inverse,
            to_position_scale: grid.axes().iter().map(|a| a.dp() / norm).product(),
            to_momentum_scale: grid.axes().iter().map(|a| a.dr(grid.hbar()) / norm).product(),
        }
    }

    pub fn momentum_to_position(&self, data: &mut [Spinor]) {
        self.transform(data, &self.inverse, self.to_position_scale);
    }

    pub fn position_to_momentum(&self, data: &mut [Spinor]) {
        self.transform(data, &self.forward, self.to_momentum_scale);
    }

    // `spin` selects a component inside each element, not an element
    #[allow(clippy::needless_range_loop)]
    fn transform(&self, data: &mut [Spinor], plans: &[Arc<dyn Fft<f64>>], scale: f64) {
        let total = data.len();
        let mut buf = vec![ZERO; total];
        let mut scratch = Vec::new();
        for (slot, a) in self.axes.iter().enumerate() {
            let n = a.n;
            let stride = self.strides[slot];
            let plan = &plans[slot];
            scratch.resize(plan.get_inplace_scratch_len(), ZERO);
            for spin in 0..2 {
                // gather lines along this axis with the (-1)^k centering factor
                for (line, start) in line_starts(total, n, stride).enumerate() {
                    for k in 0..n {
                        let v = data[start + k * stride][spin];
                        buf[line * n + k] = if k % 2 == 0 { v } else { -v };
                    }
                }
                plan.process_with_scratch(&mut buf, &mut scratch);
                for (line, start) in line_starts(total, n, stride).enumerate() {
                    for k in 0..n {
                        let v = buf[line * n + k];
                        data[start + k * stride][spin] = if k % 2 == 0 { v } else { -v };
                    }
                }
            }
        }
        for s in data.iter_mut() {
            s[0] *= scale;
            s[1] *= scale;
        }
    }
}

fn line_starts(total: usize, n: usize, stride: usize) -> impl Iterator<Item = usize> {
    let block = n * stride;
    (0..total / block).flat_map(move |outer| (0..stride).map(move |inner| outer * block + inner))
}
