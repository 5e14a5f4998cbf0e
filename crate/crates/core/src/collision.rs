//! The time-independent route: T-operator matrix elements, the energy shell,
//! first-order transition amplitudes, and the traversal time `T = L m / |p_y|`.
//!
//! On the transmission shell the first-order amplitude reduces to
//! `i eta L <chi_f|chi_i> <Phi_f|(m/|P_y|) R.v|Phi_i>` with `v = H sigma_w`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dynamics::{free_evolve, weak_displacement, ExperimentConfig, Propagator, WindowMode};
use crate::error::{Error, Result};
use crate::field::{CouplingTensor, Window};
use crate::grid::{make_gaussian, GaussianSpec, GridSpec, Representation, WaveField};
use crate::quadrature::composite;
use crate::spin::{weak_vector, SpinorState};
use crate::Axis;

/// Relative agreement required between the two evaluations of a T-matrix element.
pub const T_MATRIX_TOLERANCE: f64 = 1e-8;

/// `<p'|g(Y) R|p>` reduced to its y structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TMatrixElement {
    /// `gbar(p'_y - p_y)`: coefficient of the transverse position operators.
    pub window_factor: Complex64,
    /// `<p'_y|g(Y) Y|p_y>`.
    pub y_moment: Complex64,
}

impl TMatrixElement {
    /// Components along x, y, z; transverse entries multiply `X` and `Z`.
    pub fn vector(&self) -> [Complex64; 3] {
        [self.window_factor, self.y_moment, self.window_factor]
    }

    /// `sum_i e_i H_ij`, the element of `g(R) R.H`.
    pub fn coupled(&self, h: &CouplingTensor) -> [Complex64; 3] {
        let e = self.vector();
        let m = h.matrix();
        [0, 1, 2].map(|j| (0..3).map(|i| e[i] * m[i][j]).sum())
    }
}

/// Direct quadrature over the window, cross-checked against the analytic sinc reduction.
pub fn t_matrix_element_direct(p_out: [f64; 3], p_in: [f64; 3], w: &Window, hbar: f64) -> Result<TMatrixElement> {
    let q = p_out[1] - p_in[1];
    let (lo, hi) = w.support();
    let cycles = (q.abs() * w.extent() / (2.0 * PI * hbar)).ceil() as usize;
    let panels = 8 + 4 * cycles;
    let scale = 1.0 / (2.0 * PI * hbar);
    let kernel = |y: f64| Complex64::from_polar(scale, -q * y / hbar);
    let direct_g: Complex64 = composite(lo, hi, panels, 16, kernel);
    let direct_y: Complex64 = composite(lo, hi, panels, 16, |y| kernel(y) * y);

    let reduced_g = w.fourier(q, hbar);
    let reduced_y = Complex64::new(0.0, hbar) * w.fourier_derivative(q, hbar);

    let floor_g = w.extent() * scale;
    let floor_y = w.extent() * w.extent() * scale / 4.0 + w.center().abs() * floor_g;
    for (direct, reduced, floor) in [(direct_g, reduced_g, floor_g), (direct_y, reduced_y, floor_y)] {
        let relative = (direct - reduced).norm() / floor.max(reduced.norm());
        if relative > T_MATRIX_TOLERANCE {
            return Err(Error::Quadrature { direct: format!("{direct}"), reduced: format!("{reduced}"), relative });
        }
    }
    Ok(TMatrixElement { window_factor: reduced_g, y_moment: reduced_y })
}

/// Upper bound `hbar / (p_y0 L)` on reflected over transmitted amplitude.
pub fn backscatter_bound(p_y0: f64, l: f64, hbar: f64) -> f64 {
    hbar / (p_y0.abs() * l)
}

/// On-shell weights `m/|p_y|` on the y axis of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyShellKernel {
    pub p_y: Vec<f64>,
    /// `m/|p_y|`, or 0 for excluded entries.
    pub transmission: Vec<f64>,
    /// Index of `-p_y` on the grid, when it exists and the entry is kept.
    pub reflection_index: Vec<Option<usize>>,
    pub excluded: Vec<usize>,
    pub p_cut: f64,
}

impl EnergyShellKernel {
    pub fn weight(&self, k: usize) -> f64 {
        self.transmission[k]
    }
}

/// Default singular cut: four grid spacings in `p_y`.
pub fn default_p_cut(grid: &GridSpec) -> Result<f64> {
    Ok(4.0 * grid.axis(Axis::Y)?.dp())
}

pub fn energy_shell_kernel(grid: &GridSpec, mass: f64, p_cut: f64) -> Result<EnergyShellKernel> {
    if p_cut.is_nan() || p_cut <= 0.0 {
        return Err(Error::config("p_cut", "must be positive"));
    }
    let ay = grid.axis(Axis::Y)?;
    let p_y: Vec<f64> = (0..ay.n).map(|k| ay.momentum(k)).collect();
    let mut excluded = Vec::new();
    let transmission = p_y
        .iter()
        .enumerate()
        .map(|(k, p)| {
            if p.abs() < p_cut {
                excluded.push(k);
                0.0
            } else {
                mass / p.abs()
            }
        })
        .collect::<Vec<_>>();
    let reflection_index = (0..ay.n).map(|k| (k > 0 && transmission[k] > 0.0).then_some(ay.n - k)).collect();
    Ok(EnergyShellKernel { p_y, transmission, reflection_index, excluded, p_cut })
}

/// `(1/2 pi hbar) int_{-tc}^{tc} e^{i (p'^2 - p^2) t / 2 m hbar} dt` applied to `f` by quadrature over `p'`.
///
/// As `tc` grows this tends to `(m/|p|)(f(p) + f(-p))`.
pub fn finite_time_shell_action(f: impl Fn(f64) -> f64, p: f64, mass: f64, hbar: f64, tc: f64, p_range: f64) -> f64 {
    let e = p * p / (2.0 * mass);
    let omega = tc / hbar;
    // the kernel oscillates with wavenumber ~ omega |p'| / m in p'
    let cycles = (omega * p_range * p_range / (2.0 * mass) / PI).ceil() as usize;
    let panels = 64 + 2 * cycles;
    composite(-p_range, p_range, panels, 16, |q| {
        let de = q * q / (2.0 * mass) - e;
        f(q) * omega / PI * sinc(omega * de)
    })
}

fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-6 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

/// `T_eff = L m / |p_y|`.
pub fn effective_time(p_y: f64, l: f64, mass: f64, p_cut: f64) -> Result<f64> {
    if p_y.is_nan() || p_y.abs() < p_cut || p_y == 0.0 {
        return Err(Error::DivergentInteraction(format!("|p_y| = {} is below the cut {p_cut}", p_y.abs())));
    }
    Ok(l * mass / p_y.abs())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AmplitudeOptions {
    /// Include the `p_y -> -p_y` branch weighted by `2 pi hbar gbar(2 p_y)`.
    pub reflection: bool,
    /// Overrides the default cut of four `p_y` spacings.
    pub p_cut: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionAmplitude {
    pub zeroth: Complex64,
    pub first: Complex64,
    pub total: Complex64,
    /// Reflection-branch part of `first`, when requested.
    pub reflection: Option<Complex64>,
    /// Probability of `Phi_i` on excluded slices `|p_y| < p_cut`.
    pub excluded_mass: f64,
    /// rms transverse momentum over mean `|p_y|`: the size of the dropped `P` term.
    pub p_term_ratio: f64,
}

impl TransitionAmplitude {
    /// The exponentiated first-order form `zeroth exp(first / zeroth)`.
    pub fn exponentiated(&self) -> Complex64 {
        self.zeroth * (self.first / self.zeroth).exp()
    }
}

/// First-order amplitude between spin-free packets `phi_i`, `phi_f` (momentum representation).
pub fn transition_amplitude(
    phi_i: &WaveField,
    phi_f: &WaveField,
    chi_i: &SpinorState,
    chi_f: &SpinorState,
    config: &ExperimentConfig,
    options: AmplitudeOptions,
) -> Result<TransitionAmplitude> {
    if config.mode != WindowMode::Spatial {
        return Err(Error::config("window.mode", "transition amplitudes need a spatial window"));
    }
    for f in [phi_i, phi_f] {
        if f.representation() != Representation::Momentum {
            return Err(Error::Representation { expected: "momentum", found: f.representation().name() });
        }
    }
    let grid = phi_i.grid();
    let hbar = grid.hbar();
    let p_cut = match options.p_cut {
        Some(c) => c,
        None => default_p_cut(grid)?,
    };
    let kernel = energy_shell_kernel(grid, config.mass, p_cut)?;
    let spin_overlap = chi_f.inner(chi_i);
    let w = weak_vector(chi_i, chi_f)?;
    let v = config.tensor.apply(&w);
    if v[1].norm() > 1e-12 {
        return Err(Error::config("tensor", "the on-shell reduction needs a tensor without a y row"));
    }

    let a_i = phi_i.scalar_amplitudes()?;
    let a_f = phi_f.scalar_amplitudes()?;
    let dv = phi_i.cell_volume();
    let zeroth = a_f.iter().zip(&a_i).map(|(f, i)| f.conj() * i).sum::<Complex64>() * dv * spin_overlap;

    // R.v Phi_i, with R acting as a multiplication in position space
    let rv = phi_i
        .to_position()?
        .map_points(|r, s| {
            let k = v[0] * r[0] + v[2] * r[2];
            [s[0] * k, s[1] * k]
        })
        .to_momentum()?
        .scalar_amplitudes()?;

    let ys = grid.position_of(Axis::Y).expect("kernel checked the y axis");
    let ny = grid.axes()[ys].n;
    let stride = grid.strides()[ys];
    let y_index = |idx: usize| (idx / stride) % ny;
    let with_y = |idx: usize, k: usize| idx - y_index(idx) * stride + k * stride;

    let l = config.window.integral();
    let mut transmission = Complex64::new(0.0, 0.0);
    let mut reflection = Complex64::new(0.0, 0.0);
    let mut excluded_mass = 0.0;
    for idx in 0..a_i.len() {
        let k = y_index(idx);
        let weight = kernel.weight(k);
        if weight == 0.0 {
            excluded_mass += a_i[idx].norm_sqr() * dv;
            continue;
        }
        transmission += a_f[idx].conj() * rv[idx] * weight;
        if options.reflection {
            if let Some(kr) = kernel.reflection_index[k] {
                let gbar = config.window.fourier(-2.0 * kernel.p_y[k], hbar);
                reflection += a_f[with_y(idx, kr)].conj() * rv[idx] * weight * gbar * (2.0 * PI * hbar);
            }
        }
    }
    let prefactor = Complex64::new(0.0, config.eta) * spin_overlap * dv;
    let transmission = prefactor * transmission * l;
    let reflection = options.reflection.then_some(prefactor * reflection);
    let first = transmission + reflection.unwrap_or_default();

    let moments = phi_i.moments()?;
    let mut transverse = 0.0;
    for a in grid.axes().iter().filter(|a| a.axis != Axis::Y) {
        transverse += moments.var_p_along(a.axis) + moments.mean_p_along(a.axis).powi(2);
    }
    let mean_abs_py = a_i.iter().enumerate().map(|(idx, a)| a.norm_sqr() * kernel.p_y[y_index(idx)].abs()).sum::<f64>()
        * dv
        / moments.norm_sqr;

    Ok(TransitionAmplitude {
        zeroth,
        first,
        total: zeroth + first,
        reflection,
        excluded_mass,
        p_term_ratio: transverse.sqrt() / mean_abs_py,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceDisplacement {
    pub p_y: f64,
    pub t_eff: f64,
    pub displacement: [Complex64; 3],
}

/// Largest packet probability allowed below the cut.
pub const EXCLUDED_MASS_LIMIT: f64 = 1e-6;

/// `hbar eta T_eff(p_y) H.sigma_w` on every kept `p_y` slice of the grid.
pub fn py_resolved_displacement(packet: &GaussianSpec, config: &ExperimentConfig) -> Result<Vec<SliceDisplacement>> {
    let p_cut = default_p_cut(&config.grid)?;
    let (c, s) = (packet.center[1].re, packet.sigma[1]);
    let density = |p: f64| (-(p - c).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt());
    let below: f64 = composite(-p_cut, p_cut, 16, 16, density);
    if below > EXCLUDED_MASS_LIMIT {
        return Err(Error::DivergentInteraction(format!("{below:.3e} of the packet lies below |p_y| = {p_cut}")));
    }
    let l = config.window.integral();
    let kernel = energy_shell_kernel(&config.grid, config.mass, p_cut)?;
    kernel
        .p_y
        .iter()
        .zip(&kernel.transmission)
        .filter(|(_, w)| **w > 0.0)
        .map(|(&p_y, _)| {
            let t_eff = effective_time(p_y, l, config.mass, p_cut)?;
            let displacement =
                weak_displacement(&config.pre, &config.post, config.eta, t_eff, &config.tensor, config.hbar)?;
            Ok(SliceDisplacement { p_y, t_eff, displacement })
        })
        .collect()
}

/// First-order post-selected state of the T-operator route, `Phi + i eta L (m/|P_y|) (R.v) Phi`.
///
/// Slices below the cut are left unscattered.
pub fn t_operator_first_order(config: &ExperimentConfig) -> Result<WaveField> {
    let packet = GaussianSpec { spin: SpinorState::up(), ..config.packet };
    let phi = make_gaussian(&config.grid, &packet)?;
    let p_cut = default_p_cut(&config.grid)?;
    let w = weak_vector(&config.pre, &config.post)?;
    let v = config.tensor.apply(&w);
    let i_eta_l = Complex64::new(0.0, config.eta * config.window.integral());
    let rv = phi.to_position()?.map_points(|r, s| {
        let k = v[0] * r[0] + v[1] * r[1] + v[2] * r[2];
        [s[0] * k, s[1] * k]
    });
    let rv = rv.to_momentum()?;
    let mass = config.mass;
    let mut idx = 0;
    let data = rv.data();
    let out = phi.map_points(|p, s| {
        let weight = if p[1].abs() < p_cut { 0.0 } else { mass / p[1].abs() };
        let r = data[idx];
        idx += 1;
        [s[0] + i_eta_l * weight * r[0], s[1]]
    });
    out.normalized()
}

/// Outcome of the wavepacket form of the incoming Moller limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollerReport {
    /// Full evolution against free-then-full evolution at the end of the run.
    pub residual: f64,
    /// Full against free evolution over the incoming segment.
    pub incoming_residual: f64,
    pub incoming_time: f64,
    pub total_time: f64,
}

impl MollerReport {
    pub fn max_residual(&self) -> f64 {
        self.residual.max(self.incoming_residual)
    }
}

/// Starts a packet `standoff` before the window's entry edge and compares full evolution with
/// free flight over the first half of the approach followed by full evolution.
///
/// The run ends once the packet center is `10 sigma_r` past the exit edge; the step size is
/// the configured `(tau_i + tau_f) / steps`.
pub fn moller_asymptotic_check(config: &ExperimentConfig, standoff: f64) -> Result<MollerReport> {
    if config.mode != WindowMode::Spatial {
        return Err(Error::config("window.mode", "the Moller check needs a spatial window"));
    }
    let grid = &config.grid;
    let hbar = config.hbar;
    let p0 = config.packet.center[1].re;
    let s = config.packet.sigma[1];
    if p0 <= 0.0 {
        return Err(Error::Geometry("the packet must move toward +y".into()));
    }
    let sigma_r = hbar / (2.0 * s);
    if standoff < 5.0 * sigma_r {
        return Err(Error::Geometry(format!("standoff {standoff} is below 5 sigma_r = {}", 5.0 * sigma_r)));
    }
    let (entry, exit) = config.window.support();
    let y0 = entry - standoff;
    let mut center = config.packet.center;
    center[1] = Complex64::new(p0, -2.0 * s * s * y0 / hbar);
    let packet = GaussianSpec { center, spin: config.pre, ..config.packet };
    let psi = make_gaussian(grid, &packet)?;

    let v = p0 / config.mass;
    let dt = (config.tau_i + config.tau_f) / config.steps as f64;
    let incoming_steps = ((standoff / (2.0 * v) / dt).round() as usize).max(1);
    let steps = incoming_steps + ((exit - entry + standoff / 2.0 + 10.0 * sigma_r) / v / dt).ceil() as usize;
    let incoming_time = incoming_steps as f64 * dt;
    let total_time = steps as f64 * dt;

    let a = Propagator::new(config, WindowMode::Spatial, steps).span(0.0, total_time).run(&psi)?;
    let early = Propagator::new(config, WindowMode::Spatial, incoming_steps).span(0.0, incoming_time).run(&psi)?;
    let free = free_evolve(&psi, incoming_time, config.mass)?;
    let incoming_residual = early.distance(&free)?;
    let b = Propagator::new(config, WindowMode::Spatial, steps - incoming_steps)
        .span(incoming_time, total_time)
        .run(&free)?;
    Ok(MollerReport { residual: a.distance(&b)?, incoming_residual, incoming_time, total_time })
}
