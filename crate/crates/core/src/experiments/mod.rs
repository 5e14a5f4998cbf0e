//! Scenario presets, the run report, and file output.
//!
//! Each scenario starts from the documented defaults, applies its preset, then whatever
//! the caller layers on top (config file, `--set` overrides), and finally builds and
//! validates an [`ExperimentConfig`].

pub mod config;
pub mod output;
pub mod studies;

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::collision::{
    backscatter_bound, finite_time_shell_action, moller_asymptotic_check, t_matrix_element_direct,
    transition_amplitude, AmplitudeOptions, SliceDisplacement,
};
use crate::dynamics::{
    post_select, predict_post_selected, von_neumann_evolve, weak_displacement, ExperimentConfig, Propagator,
    WindowMode, WEAK_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::field::{backscatter_ratio, CouplingTensor, Window};
use crate::grid::{make_gaussian, AxisGrid, GaussianSpec, GridSpec, Heatmap, SliceReduce};
use crate::spin::{weak_vector, SpinorState};
use crate::Axis;

pub use config::{parse_config, Settings};
use output::{emit_heatmap_csv, emit_heatmap_svg, emit_marginal_csv, emit_table, num, read_heatmap_csv};
use studies::{
    amplitude_point, loglog_slope, product_spread, route_equivalence, slice_displaced_packet, time_dependent_point,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Fig1,
    Fig2,
    Fig3,
    ConvergenceEta,
    RouteEquivalence,
    SmatrixCheck,
    WeakVector,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 7] = [
        ScenarioKind::Fig1,
        ScenarioKind::Fig2,
        ScenarioKind::Fig3,
        ScenarioKind::ConvergenceEta,
        ScenarioKind::RouteEquivalence,
        ScenarioKind::SmatrixCheck,
        ScenarioKind::WeakVector,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Fig1 => "fig1",
            ScenarioKind::Fig2 => "fig2",
            ScenarioKind::Fig3 => "fig3",
            ScenarioKind::ConvergenceEta => "convergence-eta",
            ScenarioKind::RouteEquivalence => "route-equivalence",
            ScenarioKind::SmatrixCheck => "smatrix-check",
            ScenarioKind::WeakVector => "weak-vector",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Overrides applied on top of the defaults. Values are TOML literals.
    pub fn preset(self) -> &'static [(&'static str, &'static str)] {
        match self {
            // strong coupling, 1D, spin eigenstates of the textbook zz coupling
            ScenarioKind::Fig1 => &[
                ("grid.x.n", "0"),
                ("grid.z.n", "4096"),
                ("grid.z.pmax", "64.0"),
                ("physics.eta", "4.0"),
                ("tensor.kind", "\"textbook\""),
                ("spin.pre.theta", "1.5707963267948966"),
                ("run.steps", "1000"),
            ],
            // hbar eta T = 0.5 sigma_p so the displacement is visible
            ScenarioKind::Fig2 => &[("grid.x.pmax", "16.0"), ("grid.z.pmax", "16.0"), ("physics.eta", "0.5")],
            ScenarioKind::Fig3 => &[
                ("window.mode", "\"spatial\""),
                ("physics.eta", "1.0"),
                ("grid.x.n", "64"),
                ("grid.x.pmax", "20.0"),
                ("grid.y.n", "128"),
                ("grid.y.pmax", "5.0"),
                ("grid.z.n", "64"),
                ("grid.z.pmax", "20.0"),
                ("packet.sigma.x", "2.5"),
                ("packet.sigma.y", "0.32"),
                ("packet.sigma.z", "2.5"),
                ("packet.center.y", "2.5"),
            ],
            ScenarioKind::ConvergenceEta => &[("grid.x.pmax", "8.0"), ("grid.z.pmax", "8.0"), ("run.steps", "64")],
            // sigma_py / p_y0 = 0.02 and hbar eta T_eff = 0.005
            ScenarioKind::RouteEquivalence => &[
                ("window.mode", "\"spatial\""),
                ("physics.eta", "0.1"),
                ("grid.x.n", "64"),
                ("grid.x.pmax", "8.0"),
                ("grid.y.n", "512"),
                ("grid.y.pmax", "25.6"),
                ("grid.z.n", "64"),
                ("grid.z.pmax", "8.0"),
                ("packet.sigma.y", "0.4"),
                ("packet.center.y", "20.0"),
                ("run.steps", "80"),
            ],
            // y spacing 1/32 puts the window edges on grid points
            ScenarioKind::SmatrixCheck => &[
                ("window.mode", "\"spatial\""),
                ("physics.eta", "0.8"),
                ("grid.x.n", "0"),
                ("grid.y.n", "1024"),
                ("grid.y.pmax", "100.53096491487338"),
                ("grid.z.n", "64"),
                ("grid.z.pmax", "8.0"),
                ("packet.sigma.y", "2.0"),
                ("packet.center.y", "40.0"),
                ("run.tau", "0.5"),
                ("run.steps", "1500"),
            ],
            ScenarioKind::WeakVector => &[],
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub settings: Settings,
    pub out_dir: PathBuf,
    pub svg: bool,
}

impl Scenario {
    /// Defaults plus the scenario preset.
    pub fn new(kind: ScenarioKind, out_dir: impl Into<PathBuf>) -> Self {
        let mut settings = Settings::default();
        for (k, v) in kind.preset() {
            settings.apply_override(&format!("{k}={v}")).expect("presets use valid keys");
        }
        Self { kind, settings, out_dir: out_dir.into(), svg: false }
    }

    pub fn config(&self) -> Result<ExperimentConfig> {
        self.settings.build()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub config: Vec<(String, String)>,
    pub files: Vec<PathBuf>,
    pub metrics: Vec<(String, String)>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl RunReport {
    fn new(s: &Scenario) -> Self {
        Self {
            scenario: s.kind.name().to_string(),
            config: s.settings.echo(),
            files: Vec::new(),
            metrics: Vec::new(),
            checks: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn metric(&self, name: &str) -> Option<&str> {
        self.metrics.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn add_metric(&mut self, name: &str, value: impl fmt::Display) {
        self.metrics.push((name.to_string(), value.to_string()));
    }

    fn add_num(&mut self, name: &str, value: f64) {
        self.add_metric(name, num(value));
    }

    fn add_check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.to_string(), passed, detail: detail.into() });
    }

    /// Plain `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut lines = vec![format!("scenario: {}", self.scenario)];
        lines.extend(self.config.iter().map(|(k, v)| format!("config.{k}: {v}")));
        lines.extend(self.files.iter().map(|f| format!("file: {}", f.display())));
        lines.extend(self.metrics.iter().map(|(k, v)| format!("metric.{k}: {v}")));
        lines.extend(self.warnings.iter().map(|w| format!("warning: {w}")));
        lines.extend(
            self.checks
                .iter()
                .map(|c| format!("check.{}: {} ({})", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail)),
        );
        lines.push(format!("result: {}", if self.passed() { "pass" } else { "fail" }));
        lines.join("\n") + "\n"
    }
}

struct Run<'a> {
    scenario: &'a Scenario,
    report: RunReport,
}

impl Run<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.scenario.out_dir.join(name)
    }

    fn record(&mut self, name: &str) {
        self.report.files.push(PathBuf::from(name));
    }

    fn heatmap(&mut self, h: &Heatmap, name: &str, title: &str) -> Result<()> {
        emit_heatmap_csv(h, &self.path(&format!("{name}.csv")))?;
        self.record(&format!("{name}.csv"));
        if self.scenario.svg {
            emit_heatmap_svg(h, title, &self.path(&format!("{name}.svg")))?;
            self.record(&format!("{name}.svg"));
        }
        Ok(())
    }

    fn table(&mut self, name: &str, header: &[&str], columns: &[&[f64]]) -> Result<()> {
        emit_table(header, columns, &self.path(name))?;
        self.record(name);
        Ok(())
    }
}

/// Runs a scenario, writes its files and `<scenario>_report.txt` into the output directory.
///
/// Failed checks are reported, not returned as errors.
pub fn run_scenario(s: &Scenario) -> Result<RunReport> {
    let config = s.config()?;
    let mut run = Run { scenario: s, report: RunReport::new(s) };
    let weakness = config.weakness();
    run.report.add_num("weakness", weakness);
    if !config.is_weak() {
        run.report.warnings.push(format!(
            "not weak: hbar eta T max|H| / sigma_p = {weakness:.3} exceeds {WEAK_THRESHOLD}; first-order predictions are not expected to hold"
        ));
    }
    match s.kind {
        ScenarioKind::Fig1 => fig1(&mut run, &config)?,
        ScenarioKind::Fig2 => fig2(&mut run, &config)?,
        ScenarioKind::Fig3 => fig3(&mut run, &config)?,
        ScenarioKind::ConvergenceEta => convergence_eta(&mut run, &config)?,
        ScenarioKind::RouteEquivalence => route_equivalence_scenario(&mut run, &config)?,
        ScenarioKind::SmatrixCheck => smatrix_check(&mut run, &config)?,
        ScenarioKind::WeakVector => weak_vector_scenario(&mut run, &config)?,
    }
    let report = run.report;
    let name = format!("{}_report.txt", s.kind.name());
    std::fs::create_dir_all(&s.out_dir)?;
    std::fs::write(s.out_dir.join(&name), report.to_text())?;
    Ok(report)
}

/// `-tan(theta / 2)` when the settings have the Fig. 2 geometry: pre tilted toward x,
/// post `|0>_z`, and a Maxwell tensor with no off-diagonal part.
fn expected_ratio(settings: &Settings) -> Option<f64> {
    let fig2_like = settings.string("tensor.kind") == "maxwell"
        && settings.float("tensor.hxz") == 0.0
        && settings.float("spin.post.theta") == 0.0
        && settings.int("spin.post.s") == 0
        && settings.string("spin.pre.axis") == "x"
        && settings.int("spin.pre.s") == 0;
    fig2_like.then(|| -(settings.float("spin.pre.theta") / 2.0).tan())
}

fn fig1(run: &mut Run, config: &ExperimentConfig) -> Result<()> {
    let grid = &config.grid;
    let az = grid.axis(Axis::Z)?;
    let cell = az.dp();
    let t = config.interaction_time();
    let shift = config.hbar * config.eta * t * config.tensor.matrix()[2][2];
    run.report.add_num("hbar_eta_T_Hzz", shift);

    let cases = [("s0", SpinorState::up(), 1.0), ("s1", SpinorState::down(), -1.0), ("superposition", config.pre, 0.0)];
    for (name, spin, sign) in cases {
        let psi = make_gaussian(grid, &GaussianSpec { spin, ..config.packet })?;
        let out = von_neumann_evolve(&psi, config.eta, t, &config.tensor)?;
        let (p, density) = out.marginal(Axis::Z)?;
        let file = format!("fig1_{name}.csv");
        emit_marginal_csv(&p, &density, &run.path(&file))?;
        run.record(&file);
        let shift_z = out.moments()?.mean_p_along(Axis::Z) - config.packet.center[2].re;
        run.report.add_num(&format!("mean_shift_{name}"), shift_z);
        if sign != 0.0 {
            let err = (shift_z - sign * shift).abs();
            run.report.add_check(
                &format!("eigenstate_{name}_shift"),
                err < 1e-10,
                format!("|error| = {err:.3e}, limit 1e-10"),
            );

            // same state through the split-step oracle with the kinetic term
            let mut kin = config.clone();
            kin.kinetic = true;
            kin.packet.spin = spin;
            kin.pre = spin;
            let out = Propagator::new(&kin, WindowMode::Temporal, kin.steps).run(&kin.initial_state()?)?;
            let err = (out.moments()?.mean_p_along(Axis::Z) - config.packet.center[2].re - sign * shift).abs();
            run.report.add_check(
                &format!("eigenstate_{name}_split_step"),
                err < 1e-6,
                format!("|error| = {err:.3e}, limit 1e-6"),
            );
        } else {
            // one peak on each side of the unshifted center
            let center = config.packet.center[2].re;
            let peak = |side: f64| {
                p.iter()
                    .zip(&density)
                    .filter(|(q, _)| (**q - center) * side > 0.0)
                    .fold((0.0, -1.0), |best, (q, d)| if *d > best.1 { (*q, *d) } else { best })
                    .0
            };
            let (up, down) = (peak(shift.signum()), peak(-shift.signum()));
            let ok = (up - center - shift).abs() <= cell && (down - center + shift).abs() <= cell;
            run.report.add_num("superposition_peak_plus", up);
            run.report.add_num("superposition_peak_minus", down);
            run.report.add_check(
                "superposition_peaks",
                ok,
                format!("peaks at {up:.4} and {down:.4}, expected +-{shift:.4} within one cell"),
            );
        }
    }
    Ok(())
}

fn transverse_plane(grid: &GridSpec) -> Result<(Axis, Axis)> {
    if grid.has_axis(Axis::X) && grid.has_axis(Axis::Z) {
        Ok((Axis::Z, Axis::X))
    } else {
        Err(Error::config("grid", "this scenario needs x and z axes"))
    }
}

fn fig2(run: &mut Run, config: &ExperimentConfig) -> Result<()> {
    let plane = transverse_plane(&config.grid)?;
    let initial = make_gaussian(&config.grid, &config.initial_packet())?;
    run.heatmap(&initial.slice_heatmap(plane, SliceReduce::Marginalize)?, "fig2_initial", "initial")?;

    let (prediction, report) = predict_post_selected(config)?;
    run.heatmap(
        &prediction.slice_heatmap(plane, SliceReduce::Marginalize)?,
        "fig2_prediction",
        "first-order prediction",
    )?;

    let out = Propagator::new(config, WindowMode::Temporal, config.steps).run(&config.initial_state()?)?;
    let selected = post_select(&out, &config.post)?;
    run.heatmap(
        &selected.field.slice_heatmap(plane, SliceReduce::Marginalize)?,
        "fig2_oracle",
        "post-selected oracle",
    )?;

    let dp = report.displacement;
    run.report.add_num("displacement_x_re", dp[0].re);
    run.report.add_num("displacement_z_re", dp[2].re);
    run.report.add_num("displacement_x_im", dp[0].im);
    run.report.add_num("displacement_z_im", dp[2].im);
    run.report.add_num("success_probability", selected.success_probability);
    let m = selected.field.moments()?;
    let oracle = [Axis::X, Axis::Z].map(|a| m.mean_p_along(a) - config.packet.center[a.index()].re);
    run.report.add_num("oracle_shift_x", oracle[0]);
    run.report.add_num("oracle_shift_z", oracle[1]);

    if dp[2].re != 0.0 {
        let ratio = dp[0].re / dp[2].re;
        run.report.add_num("ratio_x_over_z", ratio);
        if let Some(expected) = expected_ratio(&run.scenario.settings) {
            let err = (ratio - expected).abs();
            run.report.add_check(
                "displacement_ratio",
                err < 1e-12,
                format!("expected {expected:.10}, |error| = {err:.3e}"),
            );
        }
    }

    // the written file, read back, peaks at the predicted displacement
    let back = read_heatmap_csv(&run.path("fig2_prediction.csv"))?;
    let (pz, px) = back.argmax();
    let want = [config.packet.center[2].re + dp[2].re, config.packet.center[0].re + dp[0].re];
    let ok = (pz - want[0]).abs() <= back.cell.0 && (px - want[1]).abs() <= back.cell.1;
    run.report.add_check(
        "prediction_argmax",
        ok,
        format!("argmax (p_z, p_x) = ({pz:.4}, {px:.4}), predicted ({:.4}, {:.4})", want[0], want[1]),
    );
    Ok(())
}

fn slice_table(run: &mut Run, name: &str, slices: &[SliceDisplacement], center: f64, sigma: f64) -> Result<()> {
    let kept: Vec<&SliceDisplacement> = slices.iter().filter(|s| (s.p_y - center).abs() <= 5.0 * sigma).collect();
    let col = |f: &dyn Fn(&SliceDisplacement) -> f64| kept.iter().map(|s| f(s)).collect::<Vec<f64>>();
    let (p, dx, dz, t) =
        (col(&|s| s.p_y), col(&|s| s.displacement[0].re), col(&|s| s.displacement[2].re), col(&|s| s.t_eff));
    run.table(name, &["p_y", "displacement_x", "displacement_z", "T_eff"], &[&p, &dx, &dz, &t])
}

fn fig3(run: &mut Run, config: &ExperimentConfig) -> Result<()> {
    let (field, slices) = slice_displaced_packet(config)?;
    let initial = make_gaussian(&config.grid, &config.initial_packet())?;
    for (a, tag) in [(Axis::X, "px"), (Axis::Z, "pz")] {
        run.heatmap(
            &initial.slice_heatmap((Axis::Y, a), SliceReduce::Marginalize)?,
            &format!("fig3_initial_py_{tag}"),
            "initial",
        )?;
        run.heatmap(
            &field.slice_heatmap((Axis::Y, a), SliceReduce::Marginalize)?,
            &format!("fig3_py_{tag}"),
            "post-selected, first order",
        )?;
    }
    let (p0, sy) = (config.packet.center[1].re, config.packet.sigma[1]);
    slice_table(run, "fig3_displacement.csv", &slices, p0, sy)?;

    let t_eff = config.interaction_time();
    let dp = weak_displacement(&config.pre, &config.post, config.eta, t_eff, &config.tensor, config.hbar)?;
    run.report.add_num("T_eff_at_center", t_eff);
    run.report.add_num("displacement_x_at_center", dp[0].re);
    run.report.add_num("displacement_z_at_center", dp[2].re);
    let m = field.moments()?;
    run.report.add_num("mean_shift_x", m.mean_p_along(Axis::X) - config.packet.center[0].re);
    run.report.add_num("mean_shift_z", m.mean_p_along(Axis::Z) - config.packet.center[2].re);
    let spread = product_spread(&slices);
    run.report.add_check(
        "slice_product_constant",
        spread < 1e-12,
        format!("relative spread of displacement |p_y| = {spread:.3e}"),
    );
    Ok(())
}

/// Convergence study multipliers: `hbar eta T max|H| / sigma_p` for each point.
pub const CONVERGENCE_WEAKNESS: [f64; 4] = [0.04, 0.02, 0.01, 0.005];

/// The amplitude-route experiment used by the convergence study: a (y, z) grid with the
/// window edges on grid points, a beam at `20 sigma`, and spins and tensor from `base`.
pub fn amplitude_route_config(base: &ExperimentConfig, weakness: f64) -> Result<ExperimentConfig> {
    let hbar = base.hbar;
    let l = base.window.extent();
    let sigma = base.sigma_p();
    let p0 = 20.0 * sigma;
    let grid = GridSpec::new(
        vec![AxisGrid::new(Axis::Y, 512, 16.0 * PI * hbar / l), AxisGrid::new(Axis::Z, 64, 8.0 * sigma)],
        hbar,
    )?;
    let tau = 6.0 * l * base.mass / p0;
    let config = ExperimentConfig {
        eta: weakness * sigma * p0 / (hbar * l * base.mass * base.tensor.max_entry()),
        window: Window::boxcar(l)?,
        mode: WindowMode::Spatial,
        grid,
        packet: GaussianSpec::new([0.0, p0, 0.0], [sigma; 3], base.pre),
        tau_i: tau,
        tau_f: tau,
        steps: 1000,
        kinetic: true,
        ..base.clone()
    };
    config.validate()?;
    Ok(config)
}

fn convergence_eta(run: &mut Run, config: &ExperimentConfig) -> Result<()> {
    let scale = config.sigma_p() / (config.hbar * config.interaction_time() * config.tensor.max_entry());
    let mut etas = Vec::new();
    let (mut state, mut mean) = (Vec::new(), Vec::new());
    for k in CONVERGENCE_WEAKNESS {
        let cfg = ExperimentConfig { eta: k * scale, ..config.clone() };
        let point = time_dependent_point(&cfg)?;
        if k == 0.02 {
            for (axis, err) in point.relative_errors() {
                run.report.add_num(&format!("relative_mean_error_{axis}_at_0.02"), err);
                run.report.add_check(
                    &format!("weak_mean_{axis}"),
                    err <= 0.02,
                    format!("oracle mean shift within {:.3}% of the prediction, limit 2%", 100.0 * err),
                );
            }
        }
        etas.push(cfg.eta);
        state.push(point.state_residual);
        mean.push(point.mean_residual());
    }
    run.table("convergence.csv", &["eta", "residual"], &[&etas, &state])?;
    run.table("convergence_mean.csv", &["eta", "residual"], &[&etas, &mean])?;
    let slope = loglog_slope(&etas, &state);
    run.report.add_num("slope_time_dependent", slope);
    run.report.add_num("slope_time_dependent_mean", loglog_slope(&etas, &mean));
    run.report.add_check("slope_time_dependent", (slope - 2.0).abs() <= 0.3, format!("{slope:.3}, expected 2 +- 0.3"));

    let (mut amp_etas, mut amp) = (Vec::new(), Vec::new());
    for k in CONVERGENCE_WEAKNESS {
        let cfg = amplitude_route_config(config, k)?;
        let point = amplitude_point(&cfg, [0.0, 0.0, 0.3 * cfg.packet.sigma[2]])?;
        amp_etas.push(cfg.eta);
        amp.push(point.residual());
    }
    run.table("convergence_amplitude.csv", &["eta", "residual"], &[&amp_etas, &amp])?;
    let slope = loglog_slope(&amp_etas, &amp);
    run.report.add_num("slope_amplitude", slope);
    run.report.add_check("slope_amplitude", (slope - 2.0).abs() <= 0.3, format!("{slope:.3}, expected 2 +- 0.3"));
    Ok(())
}

fn route_equivalence_scenario(run: &mut Run, config: &ExperimentConfig) -> Result<()> {
    let eq = route_equivalence(config)?;
    let (p0, sy) = (config.packet.center[1].re, config.packet.sigma[1]);
    slice_table(run, "equivalence.csv", &eq.slices, p0, sy)?;
    run.report.add_num("p_y0", eq.p_y0);
    run.report.add_num("T_eff", eq.t_eff);
    run.report.add_num("time_independent_x", eq.time_independent[0]);
    run.report.add_num("time_independent_z", eq.time_independent[2]);
    run.report.add_num("time_dependent_x", eq.time_dependent[0]);
    run.report.add_num("time_dependent_z", eq.time_dependent[2]);
    let rel = eq.relative_difference();
    run.report.add_num("relative_difference", rel);
    run.report.add_check("routes_agree", rel < 5e-3, format!("relative difference {rel:.3e}, limit 5e-3"));
    let spread = eq.product_spread();
    run.report.add_check(
        "slice_product_constant",
        spread < 1e-12,
        format!("relative spread {spread:.3e}, limit 1e-12"),
    );
    Ok(())
}

/// Standoffs of the Moller check, in units of the position width `hbar / 2 sigma_py`.
pub const MOLLER_STANDOFFS: [f64; 3] = [5.0, 10.0, 20.0];

fn smatrix_check(run: &mut Run, config: &ExperimentConfig) -> Result<()> {
    let (w, hbar, mass) = (config.window, config.hbar, config.mass);
    let l = w.extent();
    let (p0, sy) = (config.packet.center[1].re, config.packet.sigma[1]);

    let mut failures = 0;
    let mut worst_q: f64 = 0.0;
    for i in 0..20 {
        let fi = i as f64;
        let p_in = [0.1 * fi - 1.0, p0 - sy + 0.1 * fi, 0.5 - 0.05 * fi];
        let q = (fi - 9.5) * 1.3 * PI * hbar / l;
        let p_out = [p_in[0] + 0.2, p_in[1] + q, p_in[2] - 0.1];
        worst_q = worst_q.max(q.abs());
        if t_matrix_element_direct(p_out, p_in, &w, hbar).is_err() {
            failures += 1;
        }
    }
    run.report.add_check(
        "t_matrix_sample",
        failures == 0,
        format!("{failures} of 20 pairs disagree beyond 1e-8 relative, |q| up to {worst_q:.3}"),
    );

    let g0 = w.fourier(0.0, hbar);
    run.report.add_check(
        "gbar_zero",
        g0 == Complex64::new(l / (2.0 * PI * hbar), 0.0),
        format!("gbar(0) = {:.17e}, L / 2 pi hbar = {:.17e}", g0.re, l / (2.0 * PI * hbar)),
    );
    let zero = (1..=5).map(|n| w.fourier(2.0 * PI * hbar * n as f64 / l, hbar).norm()).fold(0.0, f64::max);
    run.report.add_check("gbar_zeros", zero < 1e-12, format!("max |gbar(2 pi hbar n / L)|, n = 1..5: {zero:.3e}"));

    // energy-shell delta from the finite-time kernel, with asymmetric weight on -p
    let f = |q: f64| {
        (-(q - p0).powi(2) / (2.0 * sy * sy)).exp() + 0.5 * (-(q + p0 - 0.1 * sy).powi(2) / (2.0 * sy * sy)).exp()
    };
    let exact = mass / p0 * (f(p0) + f(-p0));
    let tc = 50.0 * hbar / (p0 * sy / mass);
    let got = finite_time_shell_action(f, p0, mass, hbar, tc, p0 + 10.0 * sy);
    let rel = ((got - exact) / exact).abs();
    run.report.add_num("energy_shell_relative_error", rel);
    run.report.add_check("energy_shell", rel < 1e-2, format!("relative error {rel:.3e} at tau_c dE / hbar = 50"));

    let bound = backscatter_bound(p0, l, hbar);
    let ratio = backscatter_ratio(&w, p0, hbar);
    let up = SpinorState::up();
    let phi = make_gaussian(&config.grid, &GaussianSpec { spin: up, ..config.packet })?;
    let mut mirrored = GaussianSpec { spin: up, ..config.packet };
    mirrored.center[1] = -mirrored.center[1];
    let back = make_gaussian(&config.grid, &mirrored)?;
    let opts = AmplitudeOptions { reflection: true, p_cut: None };
    let weak = ExperimentConfig { eta: 0.01 * config.eta, ..config.clone() };
    let fwd = transition_amplitude(&phi, &phi, &config.pre, &config.post, &weak, opts)?;
    let rev = transition_amplitude(&phi, &back, &config.pre, &config.post, &weak, opts)?;
    let transmitted = (fwd.first - fwd.reflection.unwrap_or_default()).norm();
    let reflected = rev.reflection.unwrap_or_default().norm() / transmitted.max(f64::MIN_POSITIVE);
    run.report.add_num("backscatter_ratio", ratio);
    run.report.add_num("reflection_over_transmission", reflected);
    run.report.add_check(
        "backscatter",
        ratio <= bound && reflected <= bound,
        format!("window ratio {ratio:.3e}, amplitude ratio {reflected:.3e}, bound hbar/(p_y0 L) = {bound:.3e}"),
    );

    let sigma_r = hbar / (2.0 * sy);
    let mut residuals = Vec::new();
    for n in MOLLER_STANDOFFS {
        let r = moller_asymptotic_check(config, n * sigma_r)?;
        run.report.add_num(&format!("moller_residual_{n}_sigma_r"), r.max_residual());
        residuals.push(r.max_residual());
    }
    let at10 = residuals[1];
    let monotone = residuals.windows(2).all(|w| w[1] < w[0]);
    run.report.add_check("moller_10_sigma_r", at10 < 1e-6, format!("{at10:.3e}, limit 1e-6"));
    run.report.add_check(
        "moller_monotone",
        monotone,
        residuals.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>().join(", "),
    );
    Ok(())
}

fn weak_vector_scenario(run: &mut Run, config: &ExperimentConfig) -> Result<()> {
    let w = weak_vector(&config.pre, &config.post)?;
    for (a, c) in Axis::ALL.iter().zip(&w) {
        run.report.add_num(&format!("sigma_w_{a}_re"), c.re);
        run.report.add_num(&format!("sigma_w_{a}_im"), c.im);
    }
    let t = config.interaction_time();
    let dp = weak_displacement(&config.pre, &config.post, config.eta, t, &config.tensor, config.hbar)?;
    for (a, c) in Axis::ALL.iter().zip(&dp) {
        run.report.add_num(&format!("displacement_{a}_re"), c.re);
        run.report.add_num(&format!("displacement_{a}_im"), c.im);
    }
    run.report.add_num("success_probability", config.post.inner(&config.pre).norm_sqr());
    if dp[2].re != 0.0 {
        let ratio = dp[0].re / dp[2].re;
        run.report.add_num("ratio_x_over_z", ratio);
        if let Some(expected) = expected_ratio(&run.scenario.settings) {
            let err = (ratio - expected).abs();
            run.report.add_check(
                "displacement_ratio",
                err < 1e-12,
                format!("expected {expected:.10}, |error| = {err:.3e}"),
            );
        }
    }
    let textbook = CouplingTensor::z_dyad([0.0, 0.0, 1.0]);
    run.report.add_check("textbook_fails_maxwell", !textbook.satisfies_maxwell(1e-12), "zz has nonzero divergence");
    run.report.add_metric("configured_tensor_maxwell", config.tensor.satisfies_maxwell(1e-12));
    Ok(())
}

/// Convenience for tests and the CLI: runs `kind` with its preset into `out_dir`.
pub fn run_preset(kind: ScenarioKind, out_dir: &Path) -> Result<RunReport> {
    run_scenario(&Scenario::new(kind, out_dir))
}
