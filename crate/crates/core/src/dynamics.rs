//! Exact evolutions and first-order weak predictions.
//!
//! The interaction Hamiltonian is `-hbar eta g R.H.sigma`, so an exposure of
//! total weight `T = int g` acts as `exp(i eta T (r.H).sigma)` pointwise in
//! position space. Packets are described in the frame of the window center
//! (`t = 0`); a run starts at `-tau_i` and ends at `tau_f`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{CouplingTensor, Window};
use crate::grid::{
    displace, make_gaussian, GaussianSpec, GridSpec, Representation, SpectralTransform, Spinor, WaveField,
};
use crate::spin::{mat_apply, sigma, su2_rotation, weak_vector, Mat2, SpinorState, IDENTITY};
use crate::Axis;

/// Above this value of `hbar eta T max|H| / sigma_p` the first-order picture is flagged.
pub const WEAK_THRESHOLD: f64 = 0.2;
/// Largest interaction phase allowed per split step.
pub const STABILITY_LIMIT: f64 = 0.1;
/// Post-selections with a smaller overlap norm are treated as impossible.
pub const NULL_POSTSELECTION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowMode {
    /// `g(t)`: the coupling is switched on for a fixed time.
    Temporal,
    /// `g(y)`: the coupling is confined to a slab the particle flies through.
    Spatial,
}

impl WindowMode {
    pub fn name(self) -> &'static str {
        match self {
            WindowMode::Temporal => "temporal",
            WindowMode::Spatial => "spatial",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub eta: f64,
    pub hbar: f64,
    pub mass: f64,
    pub window: Window,
    pub mode: WindowMode,
    pub tensor: CouplingTensor,
    pub pre: SpinorState,
    pub post: SpinorState,
    pub grid: GridSpec,
    /// Translational packet at `t = 0`; its spin is replaced by `pre`.
    pub packet: GaussianSpec,
    pub tau_i: f64,
    pub tau_f: f64,
    pub steps: usize,
    pub kinetic: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::config("physics.eta", "must be finite and >= 0"));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::config("physics.hbar", "must be positive"));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::config("physics.mass", "must be positive"));
        }
        if (self.grid.hbar() - self.hbar).abs() > 1e-15 * self.hbar {
            return Err(Error::config("physics.hbar", "grid and config disagree on hbar"));
        }
        if !(self.tau_i > 0.0 && self.tau_f > 0.0 && self.tau_i.is_finite() && self.tau_f.is_finite()) {
            return Err(Error::config("run.tau", "must be positive"));
        }
        if self.steps == 0 {
            return Err(Error::config("run.steps", "must be at least 1"));
        }
        if self.tensor.max_entry() == 0.0 {
            return Err(Error::config("tensor", "coupling tensor is zero"));
        }
        match self.mode {
            WindowMode::Temporal => {
                let (lo, hi) = self.window.support();
                if lo <= -self.tau_i || hi >= self.tau_f {
                    return Err(Error::config(
                        "window.extent",
                        format!("window [{lo}, {hi}] must lie inside (-{}, {})", self.tau_i, self.tau_f),
                    ));
                }
            }
            WindowMode::Spatial => {
                if !self.grid.has_axis(Axis::Y) {
                    return Err(Error::config("grid.y.n", "a spatial window needs the y axis on the grid"));
                }
                if self.packet.center[1].re == 0.0 {
                    return Err(Error::config("packet.center.y", "a spatial window needs a nonzero beam momentum"));
                }
            }
        }
        Ok(())
    }

    /// Interaction time: the window duration, or `L m / |p_y0|` for a spatial window.
    pub fn interaction_time(&self) -> f64 {
        match self.mode {
            WindowMode::Temporal => self.window.integral(),
            WindowMode::Spatial => self.window.integral() * self.mass / self.packet.center[1].re.abs(),
        }
    }

    /// Smallest transverse momentum width of the packet.
    pub fn sigma_p(&self) -> f64 {
        self.grid
            .axes()
            .iter()
            .filter(|a| a.axis != Axis::Y)
            .map(|a| self.packet.sigma[a.axis.index()])
            .fold(f64::INFINITY, f64::min)
    }

    /// `hbar eta T max|H| / sigma_p`.
    pub fn weakness(&self) -> f64 {
        self.hbar * self.eta * self.interaction_time() * self.tensor.max_entry() / self.sigma_p()
    }

    pub fn is_weak(&self) -> bool {
        self.weakness() <= WEAK_THRESHOLD
    }

    /// Pre-selected packet in the `t = 0` frame.
    pub fn initial_packet(&self) -> GaussianSpec {
        GaussianSpec { spin: self.pre, ..self.packet }
    }

    /// The state at `-tau_i` that reaches the configured packet at `t = 0` under free flight.
    pub fn initial_state(&self) -> Result<WaveField> {
        let f = make_gaussian(&self.grid, &self.initial_packet())?;
        free_evolve(&f, -self.tau_i, self.mass)
    }
}

/// Applies `e^{-i p^2 t / 2 m hbar}`; negative `t` runs the free flight backwards.
pub fn free_evolve(psi: &WaveField, t: f64, mass: f64) -> Result<WaveField> {
    let psi = psi.in_representation(Representation::Momentum)?;
    let hbar = psi.grid().hbar();
    Ok(psi.map_points(|p, s| {
        let e = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / (2.0 * mass * hbar);
        let phase = Complex64::from_polar(1.0, -e * t);
        [s[0] * phase, s[1] * phase]
    }))
}

/// `exp(i eta T (r.H).sigma)` applied pointwise; returns the input representation.
pub fn von_neumann_evolve(psi: &WaveField, eta: f64, t: f64, h: &CouplingTensor) -> Result<WaveField> {
    let repr = psi.representation();
    let pos = psi.in_representation(Representation::Position)?;
    let kicked = pos.map_points(|r, s| mat_apply(&rotation(eta * t, h.contract_position(r)), s));
    kicked.in_representation(repr)
}

/// `exp(i a v.sigma)` for a real vector `v`.
fn rotation(a: f64, v: [f64; 3]) -> Mat2 {
    let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if len == 0.0 || a == 0.0 {
        return IDENTITY;
    }
    su2_rotation(a * len, [v[0] / len, v[1] / len, v[2] / len])
}

/// Normalized relative state after a successful spin post-selection.
#[derive(Debug, Clone)]
pub struct PostSelectedResult {
    /// `chi_f` times the normalized translational state.
    pub field: WaveField,
    pub post: SpinorState,
    /// Norm of `<chi_f|psi>` before renormalization.
    pub success_norm: f64,
    pub success_probability: f64,
    /// `1 / success_norm`.
    pub c: f64,
}

impl PostSelectedResult {
    /// The translational amplitudes `<chi_f|field>`.
    pub fn relative_amplitudes(&self) -> Vec<Complex64> {
        self.field.data().iter().map(|s| self.post.project(*s)).collect()
    }
}

pub fn post_select(psi: &WaveField, chi_f: &SpinorState) -> Result<PostSelectedResult> {
    let amps = chi_f.amplitudes();
    let data: Vec<Spinor> = psi
        .data()
        .iter()
        .map(|s| {
            let a = chi_f.project(*s);
            [a * amps[0], a * amps[1]]
        })
        .collect();
    let projected = WaveField::from_data(psi.grid().clone(), psi.representation(), data)?;
    let norm = projected.norm_sqr().sqrt();
    if norm < NULL_POSTSELECTION {
        return Err(Error::NullPostSelection(norm));
    }
    Ok(PostSelectedResult {
        field: projected.normalized()?,
        post: *chi_f,
        success_norm: norm,
        success_probability: norm * norm,
        c: 1.0 / norm,
    })
}

/// `hbar eta T H.sigma_w`.
pub fn weak_displacement(
    chi_i: &SpinorState,
    chi_f: &SpinorState,
    eta: f64,
    t: f64,
    h: &CouplingTensor,
    hbar: f64,
) -> Result<[Complex64; 3]> {
    let w = weak_vector(chi_i, chi_f)?;
    Ok(h.apply(&w).map(|c| c * (hbar * eta * t)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionReport {
    pub displacement: [Complex64; 3],
    pub interaction_time: f64,
    pub weakness: f64,
    pub weak: bool,
    /// Free-flight time in the kinetic phase; it leaves the momentum density unchanged.
    pub kinetic_tau: f64,
}

/// First-order post-selected packet at `tau_f`.
pub fn predict_post_selected(config: &ExperimentConfig) -> Result<(WaveField, PredictionReport)> {
    let tau = if config.kinetic { config.tau_f } else { 0.0 };
    predict_post_selected_at(config, tau)
}

/// `phi_0(p - dp) e^{-i p^2 tau / 2 m hbar}` times `chi_f`, normalized.
pub fn predict_post_selected_at(config: &ExperimentConfig, tau: f64) -> Result<(WaveField, PredictionReport)> {
    let t = config.interaction_time();
    let dp = weak_displacement(&config.pre, &config.post, config.eta, t, &config.tensor, config.hbar)?;
    let start = make_gaussian(&config.grid, &GaussianSpec { spin: config.post, ..config.packet })?;
    let shifted = displace(&start, dp)?;
    let field = if tau == 0.0 { shifted } else { free_evolve(&shifted, tau, config.mass)? };
    let report = PredictionReport {
        displacement: dp,
        interaction_time: t,
        weakness: config.weakness(),
        weak: config.is_weak(),
        kinetic_tau: tau,
    };
    Ok((field.normalized()?, report))
}

/// Strang split-step propagator for `P^2/2m - hbar eta g R.H.sigma`.
pub struct Propagator {
    config: ExperimentConfig,
    mode: WindowMode,
    steps: usize,
    t_start: f64,
    t_end: f64,
    kinetic: bool,
}

impl Propagator {
    /// Runs from `-tau_i` to `tau_f`.
    pub fn new(config: &ExperimentConfig, mode: WindowMode, steps: usize) -> Self {
        Self {
            config: config.clone(),
            mode,
            steps,
            t_start: -config.tau_i,
            t_end: config.tau_f,
            kinetic: config.kinetic,
        }
    }

    pub fn span(mut self, t_start: f64, t_end: f64) -> Self {
        self.t_start = t_start;
        self.t_end = t_end;
        self
    }

    /// Test hook: drop the kinetic half steps.
    pub fn kinetic(mut self, on: bool) -> Self {
        self.kinetic = on;
        self
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.steps as f64
    }

    pub fn run(&self, psi: &WaveField) -> Result<WaveField> {
        if self.steps == 0 || self.t_end.partial_cmp(&self.t_start) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::config("run.steps", "need at least one step over a positive span"));
        }
        let cfg = &self.config;
        let grid = psi.grid().clone();
        let hbar = grid.hbar();
        check_contained(psi)?;

        let positions = grid.point_coordinates(Representation::Position);
        let couplings: Vec<[f64; 3]> = positions.iter().map(|r| cfg.tensor.contract_position(*r)).collect();
        let vmax = support_max_coupling(psi, &couplings)?;
        let dt = self.dt();
        let weights: Vec<f64> = (0..self.steps)
            .map(|k| {
                let t0 = self.t_start + k as f64 * dt;
                match self.mode {
                    WindowMode::Temporal => cfg.eta * cfg.window.integral_over(t0, t0 + dt),
                    WindowMode::Spatial => cfg.eta * dt,
                }
            })
            .collect();
        let window_peak = match self.mode {
            WindowMode::Temporal => 1.0,
            WindowMode::Spatial => positions.iter().map(|r| cfg.window.value(r[1])).fold(0.0, f64::max),
        };
        let phase = weights.iter().cloned().fold(0.0, f64::max) * vmax * window_peak;
        if phase > STABILITY_LIMIT {
            return Err(Error::Stability { phase, limit: STABILITY_LIMIT });
        }

        let energies: Vec<f64> = grid
            .point_coordinates(Representation::Momentum)
            .iter()
            .map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / (2.0 * cfg.mass * hbar))
            .collect();
        let profile: Vec<f64> = match self.mode {
            WindowMode::Temporal => vec![1.0; positions.len()],
            WindowMode::Spatial => positions.iter().map(|r| cfg.window.value(r[1])).collect(),
        };

        let fft = SpectralTransform::new(&grid);
        let (_, mut data, _) = psi.in_representation(Representation::Momentum)?.into_parts();
        let kinetic = |data: &mut [Spinor], t: f64| {
            if t == 0.0 {
                return;
            }
            for (s, e) in data.iter_mut().zip(&energies) {
                let ph = Complex64::from_polar(1.0, -e * t);
                s[0] *= ph;
                s[1] *= ph;
            }
        };

        let mut cache: Option<(f64, Vec<Mat2>)> = None;
        let mut pending = 0.0;
        for &w in &weights {
            pending += dt / 2.0;
            if w != 0.0 {
                if self.kinetic {
                    kinetic(&mut data, pending);
                }
                pending = 0.0;
                if cache.as_ref().map(|c| c.0) != Some(w) {
                    let mats = couplings.iter().zip(&profile).map(|(v, g)| rotation(w * g, *v)).collect();
                    cache = Some((w, mats));
                }
                let mats = &cache.as_ref().expect("rotation cache filled above").1;
                fft.momentum_to_position(&mut data);
                for (s, m) in data.iter_mut().zip(mats) {
                    *s = mat_apply(m, *s);
                }
                fft.position_to_momentum(&mut data);
            }
            pending += dt / 2.0;
        }
        if self.kinetic {
            kinetic(&mut data, pending);
        }
        let out = WaveField::from_data(grid, Representation::Momentum, data)?;
        check_contained(&out)?;
        out.in_representation(psi.representation())
    }
}

pub fn split_step_propagate(
    psi: &WaveField,
    config: &ExperimentConfig,
    mode: WindowMode,
    steps: usize,
) -> Result<WaveField> {
    Propagator::new(config, mode, steps).run(psi)
}

/// Largest `|r.H|` over the region where `psi` carries weight.
fn support_max_coupling(psi: &WaveField, couplings: &[[f64; 3]]) -> Result<f64> {
    let pos = psi.in_representation(Representation::Position)?;
    let dens: Vec<f64> = pos.data().iter().map(|s| s[0].norm_sqr() + s[1].norm_sqr()).collect();
    let peak = dens.iter().cloned().fold(0.0, f64::max);
    Ok(dens
        .iter()
        .zip(couplings)
        .filter(|(d, _)| **d > 1e-10 * peak)
        .map(|(_, v)| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
        .fold(0.0, f64::max))
}

/// Fraction of the probability allowed in the outer 1/32 of any axis.
pub const EDGE_MASS_LIMIT: f64 = 1e-6;

/// Rejects fields with weight near the edges of either the momentum or the position box.
pub fn check_contained(psi: &WaveField) -> Result<()> {
    for repr in [Representation::Momentum, Representation::Position] {
        let f = psi.in_representation(repr)?;
        let total = f.norm_sqr();
        if total == 0.0 {
            continue;
        }
        for a in f.grid().axes() {
            let (_, dens) = f.marginal(a.axis)?;
            let band = (a.n / 32).max(1);
            let step = match repr {
                Representation::Momentum => a.dp(),
                Representation::Position => a.dr(f.grid().hbar()),
            };
            let edge: f64 = dens[..band].iter().chain(&dens[a.n - band..]).sum::<f64>() * step;
            if edge > EDGE_MASS_LIMIT * total {
                return Err(Error::Containment(format!(
                    "{:.3e} of the probability sits at the {} edge of axis {}",
                    edge / total,
                    repr.name(),
                    a.axis
                )));
            }
        }
    }
    Ok(())
}

/// `psi + i eta int g(t) (R + t P/m).H.sigma psi` and the norm of the `P` part.
///
/// `psi` is the interaction-picture state at `t = 0`.
pub fn dyson_first_order(psi: &WaveField, config: &ExperimentConfig) -> Result<(WaveField, f64)> {
    if config.mode != WindowMode::Temporal {
        return Err(Error::config("window.mode", "the Dyson expansion here needs a temporal window"));
    }
    let (lo, hi) = config.window.support();
    let g0 = config.window.integral_over(lo, hi);
    let g1 = config.window.first_moment_over(lo, hi);
    let i_eta = Complex64::new(0.0, config.eta);
    let h = &config.tensor;

    let r_term = psi
        .in_representation(Representation::Position)?
        .map_points(|r, s| coupling_matrix_apply(h.contract_position(r), s, i_eta * g0))
        .to_momentum()?;
    let p_term = psi
        .in_representation(Representation::Momentum)?
        .map_points(|p, s| coupling_matrix_apply(h.contract_position(p), s, i_eta * g1 / config.mass));
    let p_norm = p_term.norm_sqr().sqrt();

    let base = psi.in_representation(Representation::Momentum)?;
    let data: Vec<Spinor> = base
        .data()
        .iter()
        .zip(r_term.data())
        .zip(p_term.data())
        .map(|((a, b), c)| [a[0] + b[0] + c[0], a[1] + b[1] + c[1]])
        .collect();
    let out = WaveField::from_data(base.grid().clone(), Representation::Momentum, data)?;
    Ok((out.in_representation(psi.representation())?, p_norm))
}

/// `scale (v.sigma) s`.
fn coupling_matrix_apply(v: [f64; 3], s: Spinor, scale: Complex64) -> Spinor {
    let mut out = [Complex64::new(0.0, 0.0); 2];
    for axis in Axis::ALL {
        let c = v[axis.index()];
        if c != 0.0 {
            let t = mat_apply(&sigma(axis), s);
            out[0] += t[0] * c;
            out[1] += t[1] * c;
        }
    }
    [out[0] * scale, out[1] * scale]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::AxisGrid;
    use crate::spin::{eigenspinor, UnitDirection};
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn config_2d(eta: f64, n: usize, p_max: f64, pre: SpinorState, post: SpinorState) -> ExperimentConfig {
        let grid =
            GridSpec::new(vec![AxisGrid::new(Axis::X, n, p_max), AxisGrid::new(Axis::Z, n, p_max)], 1.0).unwrap();
        ExperimentConfig {
            eta,
            hbar: 1.0,
            mass: 1.0,
            window: Window::boxcar(1.0).unwrap(),
            mode: WindowMode::Temporal,
            tensor: CouplingTensor::maxwell(-1.0, 0.0),
            pre,
            post,
            grid,
            packet: GaussianSpec::isotropic(1.0, pre),
            tau_i: 1.0,
            tau_f: 1.0,
            steps: 64,
            kinetic: true,
        }
    }

    fn fig2_spins() -> (SpinorState, SpinorState) {
        let m = UnitDirection::tilted(9.0 * PI / 10.0, Axis::X).unwrap();
        (eigenspinor(&m, 0).unwrap(), SpinorState::up())
    }

    #[test]
    fn zero_coupling_is_identity() {
        let cfg = config_2d(0.0, 64, 8.0, SpinorState::up(), SpinorState::up());
        let f = cfg.initial_state().unwrap();
        let g = von_neumann_evolve(&f, 0.0, 1.0, &cfg.tensor).unwrap();
        assert!(g.distance(&f).unwrap() < 1e-14);
    }

    #[test]
    fn strong_shift_for_spin_eigenstates() {
        let m = UnitDirection::new(0.3, -0.2, 0.9).unwrap();
        let h = CouplingTensor::z_dyad(m.components());
        let grid = GridSpec::new(vec![AxisGrid::new(Axis::Z, 512, 16.0)], 1.0).unwrap();
        for s in 0..2u8 {
            let spin = eigenspinor(&m, s).unwrap();
            let f = make_gaussian(&grid, &GaussianSpec::isotropic(1.0, spin)).unwrap();
            let g = von_neumann_evolve(&f, 0.7, 1.5, &h).unwrap();
            let mean = g.moments().unwrap().mean_p[0];
            let want = 0.7 * 1.5 * if s == 0 { 1.0 } else { -1.0 };
            assert!((mean - want).abs() < 1e-10, "s = {s}: {mean} vs {want}");
            assert!((g.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn superposition_splits_into_two_peaks() {
        let grid = GridSpec::new(vec![AxisGrid::new(Axis::Z, 4096, 64.0)], 1.0).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let spin = SpinorState::new(c(r), c(r)).unwrap();
        let f = make_gaussian(&grid, &GaussianSpec::isotropic(1.0, spin)).unwrap();
        let g = von_neumann_evolve(&f, 8.0, 1.0, &CouplingTensor::z_dyad([0.0, 0.0, 1.0])).unwrap();
        let (p, d) = g.marginal(Axis::Z).unwrap();
        let half = p.len() / 2;
        let left = (0..half).max_by(|a, b| d[*a].total_cmp(&d[*b])).unwrap();
        let right = (half..p.len()).max_by(|a, b| d[*a].total_cmp(&d[*b])).unwrap();
        assert!((p[left] + 8.0).abs() < 1e-9 && (p[right] - 8.0).abs() < 1e-9);
    }

    #[test]
    fn post_selection_cases() {
        let cfg = config_2d(0.0, 64, 8.0, SpinorState::up(), SpinorState::up());
        let f = make_gaussian(&cfg.grid, &cfg.initial_packet()).unwrap();
        let r = post_select(&f, &SpinorState::up()).unwrap();
        assert!(r.field.distance(&f).unwrap() < 1e-14);
        assert!((r.c * r.success_norm - 1.0).abs() < 1e-12);
        assert!(matches!(post_select(&f, &SpinorState::down()), Err(Error::NullPostSelection(_))));
    }

    #[test]
    fn post_selected_entangled_state() {
        // branch weights follow <0_z|s>_m
        let m = UnitDirection::tilted(0.8, Axis::X).unwrap();
        let h = CouplingTensor::z_dyad(m.components());
        let grid = GridSpec::new(vec![AxisGrid::new(Axis::Z, 1024, 32.0)], 1.0).unwrap();
        let chi = SpinorState::new(c(0.6), Complex64::new(0.0, 0.8)).unwrap();
        let f = make_gaussian(&grid, &GaussianSpec::isotropic(1.0, chi)).unwrap();
        let d = 8.0;
        let r = post_select(&von_neumann_evolve(&f, d, 1.0, &h).unwrap(), &SpinorState::up()).unwrap();

        let e0 = eigenspinor(&m, 0).unwrap();
        let e1 = eigenspinor(&m, 1).unwrap();
        let (w0, w1) = (SpinorState::up().inner(&e0) * e0.inner(&chi), SpinorState::up().inner(&e1) * e1.inner(&chi));
        let oracle = WaveField::from_fn(grid.clone(), Representation::Momentum, |p| {
            let g = |c: f64| (-(p[2] - c).powi(2) / 4.0).exp();
            [w0 * g(d) + w1 * g(-d), c(0.0)]
        })
        .unwrap()
        .normalized()
        .unwrap();
        let overlap = oracle.inner(&r.field).unwrap();
        assert!((overlap.norm() - 1.0).abs() < 1e-10);
        let prob = (w0.norm_sqr() + w1.norm_sqr()) / 1.0;
        assert!((r.success_probability - prob).abs() < 1e-8);
    }

    #[test]
    fn weak_displacement_presets() {
        let (pre, post) = fig2_spins();
        let h = CouplingTensor::maxwell(-1.0, 0.0);
        let dp = weak_displacement(&pre, &post, 0.1, 2.0, &h, 1.0).unwrap();
        assert!((dp[2] - c(0.2)).norm() < 1e-12);
        assert!((dp[0] - c(-0.2 * (9.0 * PI / 20.0).tan())).norm() < 1e-12);
        assert_eq!(dp[1], c(0.0));

        let up = SpinorState::up();
        let dp = weak_displacement(&up, &up, 1.0, 1.0, &h, 1.0).unwrap();
        assert!((dp[2] - c(1.0)).norm() < 1e-14 && dp[0].norm() < 1e-14);

        let pre = eigenspinor(&UnitDirection::tilted(PI / 2.0, Axis::X).unwrap(), 0).unwrap();
        let dp = weak_displacement(&pre, &up, 1.0, 1.0, &h, 1.0).unwrap();
        assert!((dp[2] - c(1.0)).norm() < 1e-12 && (dp[0] - c(-1.0)).norm() < 1e-12);
    }

    #[test]
    fn prediction_density_ignores_kinetic_phase() {
        let (pre, post) = fig2_spins();
        let cfg = config_2d(0.02, 128, 8.0, pre, post);
        let (with, _) = predict_post_selected_at(&cfg, 1.0).unwrap();
        let (without, rep) = predict_post_selected_at(&cfg, 0.0).unwrap();
        for (a, b) in with.data().iter().zip(without.data()) {
            assert!((a[0].norm() - b[0].norm()).abs() < 1e-13);
        }
        let (mw, mo) = (with.moments().unwrap(), without.moments().unwrap());
        assert!((mw.mean_p_along(Axis::X) - rep.displacement[0].re).abs() < 1e-9);
        assert!((mw.mean_p_along(Axis::Z) - mo.mean_p_along(Axis::Z)).abs() < 1e-13);
        // dispersion is not phase-neutral in position
        let var = |f: &WaveField| {
            let (r, d) = f.to_position().unwrap().marginal(Axis::Z).unwrap();
            let dr = r[1] - r[0];
            r.iter().zip(&d).map(|(x, d)| x * x * d).sum::<f64>() * dr
        };
        assert!(var(&with) > var(&without) + 0.5);
        let zero = config_2d(0.0, 128, 8.0, pre, post);
        let (free, _) = predict_post_selected(&zero).unwrap();
        let start = make_gaussian(&zero.grid, &GaussianSpec::isotropic(1.0, post)).unwrap();
        assert!(free.distance(&free_evolve(&start, 1.0, 1.0).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn free_propagation_spreads_in_position() {
        let cfg = config_2d(0.0, 128, 8.0, SpinorState::up(), SpinorState::up());
        let start = make_gaussian(&cfg.grid, &cfg.initial_packet()).unwrap();
        let out = Propagator::new(&cfg, WindowMode::Temporal, 10).span(0.0, 2.0).run(&start).unwrap();
        let (a, b) = (start.moments().unwrap(), out.moments().unwrap());
        assert!((a.cov_p[0][0] - b.cov_p[0][0]).abs() < 1e-12);
        let (r, d) = out.to_position().unwrap().marginal(Axis::X).unwrap();
        let dr = r[1] - r[0];
        let var: f64 = r.iter().zip(&d).map(|(x, d)| x * x * d).sum::<f64>() * dr;
        assert!((var - (0.25 + 4.0)).abs() < 1e-8);
    }

    #[test]
    fn split_step_without_kinetic_matches_exact_kick() {
        let (pre, post) = fig2_spins();
        let mut cfg = config_2d(0.3, 128, 8.0, pre, post);
        cfg.tensor = CouplingTensor::maxwell(-1.0, 0.5);
        let start = make_gaussian(&cfg.grid, &cfg.initial_packet()).unwrap();
        let out = Propagator::new(&cfg, WindowMode::Temporal, 64).kinetic(false).run(&start).unwrap();
        let exact = von_neumann_evolve(&start, 0.3, 1.0, &cfg.tensor).unwrap();
        assert!(out.distance(&exact).unwrap() < 1e-10);
    }

    #[test]
    fn stability_guard() {
        let (pre, post) = fig2_spins();
        let cfg = config_2d(5.0, 128, 8.0, pre, post);
        let start = cfg.initial_state().unwrap();
        assert!(matches!(Propagator::new(&cfg, WindowMode::Temporal, 4).run(&start), Err(Error::Stability { .. })));
    }

    #[test]
    fn dyson_p_term_tracks_window_offset() {
        let (pre, post) = fig2_spins();
        let mut cfg = config_2d(0.01, 128, 8.0, pre, post);
        let psi = make_gaussian(&cfg.grid, &cfg.initial_packet()).unwrap();
        let (_, p0) = dyson_first_order(&psi, &cfg).unwrap();
        assert!(p0 < 1e-10);
        let mut last = 0.0;
        for delta in [0.05, 0.1, 0.2] {
            cfg.window = Window::boxcar_at(1.0, delta).unwrap();
            let (_, p) = dyson_first_order(&psi, &cfg).unwrap();
            if last > 0.0 {
                assert!((p / last - 2.0).abs() < 1e-9, "P-term not linear in the offset");
            }
            last = p;
        }
    }

    #[test]
    fn dyson_matches_prediction_to_second_order() {
        let (pre, post) = fig2_spins();
        let errs: Vec<f64> = [0.02, 0.01]
            .iter()
            .map(|&eta| {
                let cfg = config_2d(eta, 128, 8.0, pre, post);
                let psi = make_gaussian(&cfg.grid, &cfg.initial_packet()).unwrap();
                let (first, _) = dyson_first_order(&psi, &cfg).unwrap();
                let sel = post_select(&first, &post).unwrap();
                let (pred, _) = predict_post_selected_at(&cfg, 0.0).unwrap();
                let ov = pred.inner(&sel.field).unwrap();
                sel.field.distance(&pred.scaled(ov / ov.norm())).unwrap()
            })
            .collect();
        let slope = (errs[0] / errs[1]).log2();
        assert!((slope - 2.0).abs() < 0.2, "slope {slope}, errors {errs:?}");
    }

    #[test]
    fn config_validation() {
        let mut cfg = config_2d(0.02, 64, 8.0, SpinorState::up(), SpinorState::up());
        assert!(cfg.validate().is_ok());
        assert!(cfg.is_weak());
        cfg.window = Window::boxcar(2.5).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
        cfg.window = Window::boxcar(1.0).unwrap();
        cfg.eta = 0.5;
        assert!(!cfg.is_weak());
        cfg.mode = WindowMode::Spatial;
        assert!(cfg.validate().is_err());
    }
}
