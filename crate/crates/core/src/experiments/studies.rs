//! Numerical studies shared by the scenarios and the acceptance suite.

use num_complex::Complex64;

use crate::collision::{
    default_p_cut, effective_time, py_resolved_displacement, t_operator_first_order, transition_amplitude,
    AmplitudeOptions, SliceDisplacement, TransitionAmplitude,
};
use crate::dynamics::{free_evolve, post_select, predict_post_selected, ExperimentConfig, Propagator, WindowMode};
use crate::error::{Error, Result};
use crate::field::Window;
use crate::grid::{make_gaussian, GaussianSpec, GridSpec, Representation, SliceReduce, WaveField};
use crate::spin::SpinorState;
use crate::Axis;

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Oracle against first-order prediction for one time-dependent run.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDependentPoint {
    pub eta: f64,
    /// `|| psi_oracle - e^{i phase} psi_prediction ||` with the best global phase.
    pub state_residual: f64,
    /// Post-selected mean momentum shift of the oracle, per axis.
    pub oracle_shift: [f64; 3],
    /// `Re dp_weak`.
    pub predicted_shift: [f64; 3],
}

impl TimeDependentPoint {
    pub fn mean_residual(&self) -> f64 {
        (0..3).map(|i| (self.oracle_shift[i] - self.predicted_shift[i]).powi(2)).sum::<f64>().sqrt()
    }

    /// Relative error of each component whose predicted shift is nonzero.
    pub fn relative_errors(&self) -> Vec<(Axis, f64)> {
        Axis::ALL
            .into_iter()
            .filter(|a| self.predicted_shift[a.index()].abs() > 1e-300)
            .map(|a| {
                let i = a.index();
                (a, ((self.oracle_shift[i] - self.predicted_shift[i]) / self.predicted_shift[i]).abs())
            })
            .collect()
    }
}

/// Split-step oracle over `[-tau_i, tau_f]`, post-selected, compared with the weak prediction.
pub fn time_dependent_point(config: &ExperimentConfig) -> Result<TimeDependentPoint> {
    if config.mode != WindowMode::Temporal {
        return Err(Error::config("window.mode", "the time-dependent study needs a temporal window"));
    }
    let out = Propagator::new(config, WindowMode::Temporal, config.steps).run(&config.initial_state()?)?;
    let selected = post_select(&out, &config.post)?;
    let (prediction, report) = predict_post_selected(config)?;
    let overlap = prediction.inner(&selected.field)?;
    let aligned = prediction.scaled(overlap / overlap.norm().max(1e-300));
    let state_residual = selected.field.distance(&aligned)?;
    let m = selected.field.moments()?;
    let mut oracle_shift = [0.0; 3];
    let mut predicted_shift = [0.0; 3];
    for a in config.grid.axes() {
        let i = a.axis.index();
        oracle_shift[i] = m.mean_p_along(a.axis) - config.packet.center[i].re;
        predicted_shift[i] = report.displacement[i].re;
    }
    Ok(TimeDependentPoint { eta: config.eta, state_residual, oracle_shift, predicted_shift })
}

/// Exact and first-order transition amplitudes for one spatial-window run.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudePoint {
    pub eta: f64,
    pub oracle: Complex64,
    pub first_order: TransitionAmplitude,
}

impl AmplitudePoint {
    pub fn residual(&self) -> f64 {
        (self.oracle - self.first_order.total).norm()
    }
}

/// `<chi_f Phi_f| U |chi_i Phi_i>` from the split-step oracle in the interaction picture, against
/// the first-order on-shell amplitude. `Phi_f` is `Phi_i` moved by `final_offset` in momentum.
pub fn amplitude_point(config: &ExperimentConfig, final_offset: [f64; 3]) -> Result<AmplitudePoint> {
    let grid = &config.grid;
    let up = SpinorState::up();
    let initial = GaussianSpec { spin: up, ..config.packet };
    let mut final_center = config.packet.center;
    for (c, d) in final_center.iter_mut().zip(final_offset) {
        *c += d;
    }
    let final_spec = GaussianSpec { center: final_center, spin: up, ..config.packet };
    let phi_i = make_gaussian(grid, &initial)?;
    let phi_f = make_gaussian(grid, &final_spec)?;
    let first_order =
        transition_amplitude(&phi_i, &phi_f, &config.pre, &config.post, config, AmplitudeOptions::default())?;

    let start = free_evolve(&make_gaussian(grid, &config.initial_packet())?, -config.tau_i, config.mass)?;
    let out = Propagator::new(config, WindowMode::Spatial, config.steps).run(&start)?;
    let back = free_evolve(&out, -config.tau_f, config.mass)?;
    let target = make_gaussian(grid, &GaussianSpec { spin: config.post, ..final_spec })?;
    Ok(AmplitudePoint { eta: config.eta, oracle: target.inner(&back)?, first_order })
}

/// Time-independent against time-dependent displacement for a narrow `p_y` packet.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteEquivalence {
    pub p_y0: f64,
    pub t_eff: f64,
    /// Mean transverse shift of the T-operator state on the `p_y0` slice.
    pub time_independent: [f64; 3],
    /// Post-selected oracle shift with a temporal window of length `t_eff`.
    pub time_dependent: [f64; 3],
    pub slices: Vec<SliceDisplacement>,
}

impl RouteEquivalence {
    pub fn relative_difference(&self) -> f64 {
        let d: f64 = (0..3).map(|i| (self.time_independent[i] - self.time_dependent[i]).powi(2)).sum();
        let n: f64 = self.time_dependent.iter().map(|x| x * x).sum();
        (d / n).sqrt()
    }

    pub fn product_spread(&self) -> f64 {
        product_spread(&self.slices)
    }
}

/// Largest relative spread of `displacement |p_y|` over the slices; zero for a constant product.
pub fn product_spread(slices: &[SliceDisplacement]) -> f64 {
    let Some(reference) = slices.first() else { return 0.0 };
    let mut worst: f64 = 0.0;
    for s in slices {
        for i in 0..3 {
            let a = s.displacement[i] * s.p_y.abs();
            let b = reference.displacement[i] * reference.p_y.abs();
            if b.norm() > 0.0 || a.norm() > 0.0 {
                worst = worst.max((a - b).norm() / b.norm().max(f64::MIN_POSITIVE));
            }
        }
    }
    worst
}

/// `config` is a 3D spatial-window experiment. The temporal run reuses its transverse axes,
/// spins, tensor, `run.steps` and `run.tau`.
pub fn route_equivalence(config: &ExperimentConfig) -> Result<RouteEquivalence> {
    if config.mode != WindowMode::Spatial {
        return Err(Error::config("window.mode", "route equivalence needs a spatial window"));
    }
    let grid = &config.grid;
    let ay = grid.axis(Axis::Y)?;
    let p_y0 = config.packet.center[1].re;
    let k0 = ay.nearest_index(p_y0).ok_or_else(|| Error::Geometry(format!("p_y0 = {p_y0} is off the grid")))?;
    let p_slice = ay.momentum(k0);
    let transverse: Vec<Axis> = grid.axes().iter().map(|a| a.axis).filter(|a| *a != Axis::Y).collect();
    if transverse.len() != 2 {
        return Err(Error::config("grid", "route equivalence needs x, y and z axes"));
    }

    let ti = t_operator_first_order(config)?;
    let h = ti.slice_heatmap((transverse[0], transverse[1]), SliceReduce::FixIndex(vec![(Axis::Y, k0)]))?;
    let total: f64 = h.density.iter().sum();
    let mut time_independent = [0.0; 3];
    for i in 0..h.coords1.len() {
        for j in 0..h.coords2.len() {
            let d = h.at(i, j) / total;
            time_independent[transverse[0].index()] += d * h.coords1[i];
            time_independent[transverse[1].index()] += d * h.coords2[j];
        }
    }
    for a in &transverse {
        time_independent[a.index()] -= config.packet.center[a.index()].re;
    }

    let t_eff = effective_time(p_slice, config.window.integral(), config.mass, default_p_cut(grid)?)?;
    let mut temporal = config.clone();
    temporal.mode = WindowMode::Temporal;
    temporal.window = Window::boxcar(t_eff)?;
    temporal.grid =
        GridSpec::new(transverse.iter().map(|a| *grid.axis(*a).expect("listed above")).collect(), config.hbar)?;
    temporal.packet.center[1] = Complex64::new(0.0, 0.0);
    temporal.validate()?;
    let td = time_dependent_point(&temporal)?;

    let slices = py_resolved_displacement(&config.packet, config)?;
    Ok(RouteEquivalence { p_y0: p_slice, t_eff, time_independent, time_dependent: td.oracle_shift, slices })
}

/// Post-selected first-order state of the T-operator route evaluated analytically slice by
/// slice: every `p_y` slice of the packet is moved by `Re dp(T_eff(p_y))`.
pub fn slice_displaced_packet(config: &ExperimentConfig) -> Result<(WaveField, Vec<SliceDisplacement>)> {
    let slices = py_resolved_displacement(&config.packet, config)?;
    let spec = config.packet;
    let amps = config.post.amplitudes();
    let ay = *config.grid.axis(Axis::Y)?;
    let mut by_index = vec![[0.0; 3]; ay.n];
    for s in &slices {
        if let Some(k) = ay.nearest_index(s.p_y) {
            by_index[k] = s.displacement.map(|d| d.re);
        }
    }
    let grid = config.grid.clone();
    let active: Vec<usize> = grid.axes().iter().map(|a| a.axis.index()).collect();
    let field = WaveField::from_fn(grid, Representation::Momentum, |p| {
        let d = ay.nearest_index(p[1]).map_or([0.0; 3], |k| by_index[k]);
        let mut amp = Complex64::new(1.0, 0.0);
        for &i in &active {
            let u = Complex64::new(p[i] - d[i], 0.0) - spec.center[i];
            amp *= (-u * u / (4.0 * spec.sigma[i] * spec.sigma[i])).exp();
        }
        [amp * amps[0], amp * amps[1]]
    })?;
    Ok((field.normalized()?, slices))
}

/// Largest `| ||psi||^2 - 1 |` over a run of `steps` split steps.
pub fn norm_drift(config: &ExperimentConfig, steps: usize) -> Result<f64> {
    let psi = config.initial_state()?.normalized()?;
    let out = Propagator::new(config, config.mode, steps).run(&psi)?;
    Ok((out.norm_sqr() - 1.0).abs())
}
