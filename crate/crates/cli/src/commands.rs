//! The five commands. Each returns the document to print on stdout plus
//! notes meant for stderr.

use hpds_core::control::{controlled_equilibrium, controlled_escape_time, modal_problems, modal_states, ControlledModalProblem};
use hpds_core::dynamics::*;
use hpds_core::linalg::{self, Matrix};
use hpds_core::oracle::{integrate_at, integrate_with, IntegratorOptions, Termination, Trajectory};
use hpds_core::spectral::{decompose_best_effort, mu_max, DecomposeOptions, OdecoDecomposition};
use hpds_core::transform::{
    accepts, build_transformation, inverse_transformation, transformed_decomposition, FitOptions, Threshold,
    TransformModel,
};
use serde::Serialize;

use crate::error::CliError;
use crate::format::{columns, one_based, rows, sig12, state_header, write_csv};
use crate::parallel::fit_parallel;
use crate::report::*;
use crate::spec::System;

/// Settings shared by every command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    /// Seed of every randomized search.
    pub seed: u64,
    /// Symmetry and odeco tolerance, relative to `max(1, ||A||)`.
    pub tol: f64,
    /// Transformability threshold.
    pub epsilon: f64,
    /// Compare the fit error against `epsilon` itself.
    pub absolute: bool,
    /// Restarts of the structured fit.
    pub restarts: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            seed: 0,
            tol: 1e-8,
            epsilon: 1e-12,
            absolute: false,
            restarts: 20,
        }
    }
}

impl Settings {
    fn threshold(&self) -> Threshold {
        if self.absolute {
            Threshold::absolute(self.epsilon)
        } else {
            Threshold::relative(self.epsilon)
        }
    }

    fn fit_options(&self) -> FitOptions {
        FitOptions {
            restarts: self.restarts,
            seed: self.seed,
            ..FitOptions::default()
        }
    }

    fn decompose_options(&self) -> DecomposeOptions {
        DecomposeOptions {
            seed: self.seed,
            ..DecomposeOptions::default()
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(CliError::Input("--tol must be positive".into()));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(CliError::Input("--epsilon must be non-negative".into()));
        }
        if self.restarts == 0 {
            return Err(CliError::Input("--restarts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Output {
    pub body: String,
    pub notes: Vec<String>,
}

fn json<T: Serialize>(report: &T) -> Result<Output, CliError> {
    let mut body = serde_json::to_string_pretty(report).map_err(|e| CliError::Output(e.to_string()))?;
    body.push('\n');
    Ok(Output { body, notes: Vec::new() })
}

/// An orthogonal decomposition describing the system, either directly or
/// after the change of coordinates `x = P y`.
struct OdecoView {
    d: OdecoDecomposition,
    /// Residual of decomposing the input when it is supersymmetric.
    direct_residual: Option<f64>,
    transform: Option<(TransformModel, Matrix, Matrix)>,
}

impl OdecoView {
    fn build(sys: &System, s: &Settings) -> Result<Self, CliError> {
        let mut direct_residual = None;
        if let Some(t) = sys.symmetric(s.tol) {
            let d = decompose_best_effort(&t, &s.decompose_options()).decomposition;
            direct_residual = Some(d.residual());
            if d.residual() <= s.tol * t.norm().max(1.0) {
                return Ok(OdecoView {
                    d,
                    direct_residual,
                    transform: None,
                });
            }
        }
        let direct = match direct_residual {
            Some(r) => format!("the tensor is not odeco (decomposition residual {r:e})"),
            None => "the tensor is not supersymmetric".to_string(),
        };
        if sys.order() < 3 {
            return Err(CliError::Refused(format!("{direct}, and linear systems cannot be transformed")));
        }
        let fit = fit_parallel(&sys.tensor, &s.fit_options())?;
        if !accepts(&fit, s.threshold()) {
            return Err(CliError::Refused(format!(
                "{direct}, and no transformation to an odeco system was found \
                 (fit error {:e}, threshold {:e})",
                fit.fit_error(),
                s.threshold().bound(fit.tensor_norm())
            )));
        }
        let n = sys.dim();
        let model = build_transformation(&fit, &Matrix::identity(n, n))?;
        let d = transformed_decomposition(&model)?;
        let p = model.p().expect("transformation attached").clone();
        let p_inv = inverse_transformation(&model)?;
        Ok(OdecoView {
            d,
            direct_residual,
            transform: Some((model, p, p_inv)),
        })
    }

    /// Original coordinates to odeco coordinates.
    fn to_odeco(&self, x: &[f64]) -> Vec<f64> {
        match &self.transform {
            Some((_, _, p_inv)) => linalg::mat_vec(p_inv, x),
            None => x.to_vec(),
        }
    }

    fn to_original(&self, y: &[f64]) -> Vec<f64> {
        match &self.transform {
            Some((_, p, _)) => linalg::mat_vec(p, y),
            None => y.to_vec(),
        }
    }
}

fn zero_level(d: &OdecoDecomposition) -> f64 {
    1e-12 * d.z_spectral_radius().max(1.0)
}

fn verdict_from(values: &[f64], zero: f64) -> Verdict {
    if values.iter().any(|&v| v > zero) {
        Verdict::Unstable
    } else if values.iter().all(|&v| v < -zero) {
        Verdict::AsymptoticallyStable
    } else {
        Verdict::Stable
    }
}

/// Per-state report. Linear systems have no finite escape; a mode absent
/// from `x0` contributes a zero product.
fn initial_state(d: &OdecoDecomposition, x0: &[f64], y0: &[f64]) -> Result<InitialStateEntry, CliError> {
    let alphas = modal_coordinates(d, y0)?;
    if d.order() == 2 {
        let active = 1e-12 * linalg::norm(y0).max(1.0);
        let products: Vec<f64> = d
            .eigenvalues()
            .iter()
            .zip(&alphas)
            .map(|(&l, a)| if a.abs() > active { l } else { 0.0 })
            .collect();
        let verdict = verdict_from(&products, zero_level(d));
        return Ok(InitialStateEntry {
            x0: x0.to_vec(),
            in_region_of_attraction: products.iter().all(|&p| p < 0.0),
            modal_coordinates: alphas,
            mode_products: products,
            verdict: verdict.as_str(),
            blowup_time: None,
            blowup_modes: Vec::new(),
        });
    }
    let report = classify_stability(d, y0)?;
    let zero = product_zero_tolerance(d, y0);
    let blowup_modes: Vec<usize> = (0..d.dim()).filter(|&r| report.mode_products[r] > zero).collect();
    Ok(InitialStateEntry {
        x0: x0.to_vec(),
        modal_coordinates: alphas,
        in_region_of_attraction: in_region_of_attraction(d, y0)?,
        mode_products: report.mode_products,
        verdict: report.verdict.as_str(),
        blowup_time: report.blowup_time,
        blowup_modes: one_based(&blowup_modes),
    })
}

fn control_entry(view: &OdecoView, b: &[f64], x0: Option<&[f64]>) -> ControlEntry {
    let d = &view.d;
    let by = view.to_odeco(b);
    let mut notes = Vec::new();
    let equilibrium = if d.order() == 2 {
        // e_r = -b~_r / lambda_r, undefined when a null mode is driven
        let bt = linalg::mat_t_vec(d.eigenvectors(), &by);
        let zero = zero_level(d);
        let e: Option<Vec<f64>> = d
            .eigenvalues()
            .iter()
            .zip(&bt)
            .map(|(&l, &br)| match (l.abs() > zero, br.abs() > zero) {
                (true, _) => Some(-br / l),
                (false, false) => Some(0.0),
                (false, true) => None,
            })
            .collect();
        if e.is_none() {
            notes.push("a mode with zero eigenvalue is driven by the control; no equilibrium".into());
        }
        e.map(|e| view.to_original(&linalg::mat_vec(d.eigenvectors(), &e)))
    } else {
        match controlled_equilibrium(d, &by) {
            Ok(ye) => Some(view.to_original(&ye)),
            Err(e) => {
                notes.push(e.to_string());
                None
            }
        }
    };
    let escape_time = match x0 {
        Some(x0) if d.order() >= 3 => match modal_problems(d, &by, &view.to_odeco(x0)) {
            Ok(problems) => Some(controlled_escape_time(&problems)).filter(|t| t.is_finite()),
            Err(e) => {
                notes.push(e.to_string());
                None
            }
        },
        _ => None,
    };
    ControlEntry {
        b: b.to_vec(),
        equilibrium,
        escape_time,
        notes,
    }
}

pub fn analyze(sys: &System, s: &Settings) -> Result<Output, CliError> {
    s.validate()?;
    let view = OdecoView::build(sys, s)?;
    let d = &view.d;
    let k = d.order();
    let null_modes = match equilibrium_structure(d) {
        EquilibriumStructure::UniqueOrigin => Vec::new(),
        EquilibriumStructure::InfinitelyMany(modes) => modes,
    };
    let global = if k == 2 {
        Some(VerdictEntry {
            verdict: verdict_from(d.eigenvalues(), zero_level(d)).as_str(),
            basis: Basis::EigenvalueSigns.as_str(),
        })
    } else if k % 2 == 0 {
        let r = classify_global_even(d)?;
        Some(VerdictEntry {
            verdict: r.verdict.as_str(),
            basis: r.basis.as_str(),
        })
    } else {
        None
    };
    let unfolding = if k >= 4 && k % 2 == 0 {
        let t = d.reconstruct();
        Some(UnfoldingEntry {
            mu_max: mu_max(&t)?,
            verdict: classify_by_unfolding(&t)?.map(|r| r.verdict.as_str()),
        })
    } else {
        None
    };
    let initial = match sys.x0.as_deref() {
        Some(x0) => Some(initial_state(d, x0, &view.to_odeco(x0))?),
        None => None,
    };
    let control = sys.active_control().map(|b| control_entry(&view, b, sys.x0.as_deref()));
    let verdict = initial
        .as_ref()
        .map(|i| i.verdict)
        .or(global.as_ref().map(|g| g.verdict))
        .or(unfolding.as_ref().and_then(|u| u.verdict));
    let blowup_time = initial.as_ref().and_then(|i| i.blowup_time);
    let report = AnalyzeReport {
        schema_version: SCHEMA_VERSION,
        command: "analyze",
        dim: sys.dim(),
        order: k,
        odeco: view.transform.is_none(),
        residual: view.direct_residual,
        coordinates: if view.transform.is_some() { "transformed" } else { "original" },
        transformation: view.transform.as_ref().map(|(m, p, _)| TransformationSummary {
            fit_error: m.fit_error(),
            relative_fit_error: m.relative_fit_error(),
            p: rows(p),
        }),
        eigenvalues: d.eigenvalues().to_vec(),
        eigenvectors: columns(d.eigenvectors()),
        z_spectral_radius: d.z_spectral_radius(),
        equilibria: if null_modes.is_empty() { "unique_origin" } else { "infinitely_many" },
        null_modes: one_based(&null_modes),
        global,
        unfolding,
        initial_state: initial,
        control,
        verdict,
        blowup_time,
    };
    json(&report)
}

pub fn decompose(sys: &System, s: &Settings) -> Result<Output, CliError> {
    s.validate()?;
    let t = sys.symmetric(s.tol).ok_or_else(|| {
        CliError::Refused(format!(
            "the tensor is not supersymmetric (deviation {:e}); try the transform command",
            sys.tensor.as_tensor().symmetry_deviation()
        ))
    })?;
    let attempt = decompose_best_effort(&t, &s.decompose_options());
    let d = &attempt.decomposition;
    json(&DecomposeReport {
        schema_version: SCHEMA_VERSION,
        command: "decompose",
        dim: d.dim(),
        order: d.order(),
        eigenvalues: d.eigenvalues().to_vec(),
        eigenvectors: columns(d.eigenvectors()),
        residual: d.residual(),
        relative_residual: d.relative_residual(),
        odeco: d.residual() <= s.tol * t.norm().max(1.0),
        stages_converged: attempt.stages_converged,
        seed: s.seed,
    })
}

pub fn transform(sys: &System, s: &Settings) -> Result<Output, CliError> {
    s.validate()?;
    let fit = fit_parallel(&sys.tensor, &s.fit_options())?;
    let threshold = s.threshold();
    let n = sys.dim();
    // a singular factor leaves the fit without a coordinate change
    let with_p = build_transformation(&fit, &Matrix::identity(n, n)).ok();
    let p = with_p.as_ref().and_then(|m| m.p().map(rows));
    let p_inverse = with_p.as_ref().and_then(|m| inverse_transformation(m).ok()).map(|m| rows(&m));
    json(&TransformReport {
        schema_version: SCHEMA_VERSION,
        command: "transform",
        dim: n,
        order: sys.order(),
        transformable: accepts(&fit, threshold) && p.is_some(),
        fit_error: fit.fit_error(),
        relative_fit_error: fit.relative_fit_error(),
        threshold: ThresholdEntry {
            epsilon: s.epsilon,
            absolute: s.absolute,
            bound: threshold.bound(fit.tensor_norm()),
        },
        weights: fit.weights().to_vec(),
        v: rows(fit.v()),
        p,
        p_inverse,
        seed: fit.seed(),
        iterations: fit.iterations(),
        restarts: s.restarts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Closed,
    Rk4,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveSettings {
    pub t_end: f64,
    /// Number of rows including `t = 0`.
    pub samples: usize,
    pub method: Method,
    pub rtol: f64,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings {
            t_end: 10.0,
            samples: 101,
            method: Method::Closed,
            rtol: 1e-10,
        }
    }
}

fn oracle_options(rtol: f64) -> Result<IntegratorOptions, CliError> {
    if !(rtol > 0.0 && rtol < 1.0) {
        return Err(CliError::Input("--rtol must lie in (0, 1)".into()));
    }
    Ok(IntegratorOptions::with_tolerances(rtol, 1e-2 * rtol))
}

fn check_t_end(t_end: f64) -> Result<(), CliError> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(CliError::Input("--t-end must be finite and non-negative".into()));
    }
    Ok(())
}

fn termination_note(tr: &Trajectory) -> Option<String> {
    match tr.terminated {
        Termination::Completed => None,
        Termination::NormExceeded { threshold, time } => {
            Some(format!("trajectory left the ball of radius {threshold:e} at t = {}", sig12(time)))
        }
        Termination::StepUnderflow { time } => {
            Some(format!("step size collapsed at t = {} (finite-time escape)", sig12(time)))
        }
        Termination::StepLimit { time } => Some(format!("step limit reached at t = {}", sig12(time))),
    }
}

/// Closed-form evaluator in original coordinates.
enum ClosedForm {
    Linear { d: OdecoDecomposition, y0: Vec<f64> },
    Free(ExplicitSolution),
    Controlled(Vec<ControlledModalProblem>, OdecoDecomposition),
}

impl ClosedForm {
    fn new(view: &OdecoView, sys: &System, x0: &[f64]) -> Result<Self, CliError> {
        let d = view.d.clone();
        let y0 = view.to_odeco(x0);
        Ok(match (d.order(), sys.active_control()) {
            (2, None) => ClosedForm::Linear { d, y0 },
            (2, Some(_)) => {
                return Err(CliError::Refused(
                    "no closed form is provided for linear systems with control; use --method rk4".into(),
                ))
            }
            (_, None) => ClosedForm::Free(explicit_solution(&d, &y0)?),
            (_, Some(b)) => ClosedForm::Controlled(modal_problems(&d, &view.to_odeco(b), &y0)?, d),
        })
    }

    fn domain_end(&self) -> f64 {
        match self {
            ClosedForm::Linear { .. } => f64::INFINITY,
            ClosedForm::Free(sol) => sol.domain_end(),
            ClosedForm::Controlled(problems, _) => controlled_escape_time(problems),
        }
    }

    fn eval(&self, view: &OdecoView, t: f64) -> Result<Vec<f64>, CliError> {
        let y = match self {
            ClosedForm::Linear { d, y0 } => eval_solution_k2(d, y0, t)?,
            ClosedForm::Free(sol) => eval_solution(sol, t)?,
            ClosedForm::Controlled(problems, d) => linalg::mat_vec(d.eigenvectors(), &modal_states(problems, t)?),
        };
        Ok(view.to_original(&y))
    }
}

fn uniform_times(horizon: f64, samples: usize) -> Vec<f64> {
    if horizon == 0.0 || samples <= 1 {
        return vec![0.0];
    }
    (0..samples).map(|i| horizon * i as f64 / (samples - 1) as f64).collect()
}

pub fn solve(sys: &System, s: &Settings, solve: &SolveSettings) -> Result<Output, CliError> {
    s.validate()?;
    check_t_end(solve.t_end)?;
    let opts = oracle_options(solve.rtol)?;
    if solve.samples == 0 {
        return Err(CliError::Input("--samples must be at least 1".into()));
    }
    let x0 = sys.x0()?;
    let mut notes = Vec::new();

    let closed = if solve.method == Method::Rk4 {
        None
    } else {
        let view = OdecoView::build(sys, s)?;
        let form = ClosedForm::new(&view, sys, x0)?;
        Some((view, form))
    };
    let mut horizon = solve.t_end;
    if let Some((_, form)) = &closed {
        let end = form.domain_end();
        if horizon >= 0.99 * end {
            horizon = 0.99 * end;
            notes.push(format!(
                "closed form exists up to t = {}; samples end at {}",
                sig12(end),
                sig12(horizon)
            ));
        }
    }
    let times = uniform_times(horizon, solve.samples);
    let n = sys.dim();

    let closed_states: Option<Vec<Vec<f64>>> = match &closed {
        Some((view, form)) => Some(times.iter().map(|&t| form.eval(view, t)).collect::<Result<_, _>>()?),
        None => None,
    };
    let rk4_states: Option<Vec<Vec<f64>>> = if solve.method == Method::Closed {
        None
    } else {
        let tr = integrate_at(&sys.hpds()?, x0, &times, &opts)?;
        notes.extend(termination_note(&tr));
        Some(tr.states)
    };

    let blocks: &[&str] = match solve.method {
        Method::Closed | Method::Rk4 => &["x"],
        Method::Both => &["x", "x_rk4"],
    };
    let reached = match (&closed_states, &rk4_states) {
        (_, Some(r)) if solve.method == Method::Rk4 => r.len(),
        _ => times.len(),
    };
    let table: Vec<Vec<Option<f64>>> = (0..reached)
        .map(|i| {
            let mut row = vec![Some(times[i])];
            for states in [&closed_states, &rk4_states].into_iter().flatten() {
                match states.get(i) {
                    Some(x) => row.extend(x.iter().map(|&v| Some(v))),
                    None => row.extend(std::iter::repeat_n(None, n)),
                }
            }
            row
        })
        .collect();
    let mut buf = Vec::new();
    write_csv(&mut buf, &state_header(n, blocks), &table)?;
    Ok(Output {
        body: String::from_utf8(buf).expect("csv is utf-8"),
        notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulateSettings {
    pub t_end: f64,
    pub rtol: f64,
    /// Uniform output grid with this many rows; every accepted step when
    /// absent.
    pub samples: Option<usize>,
}

pub fn simulate(sys: &System, sim: &SimulateSettings) -> Result<Output, CliError> {
    check_t_end(sim.t_end)?;
    let opts = oracle_options(sim.rtol)?;
    let x0 = sys.x0()?;
    let hpds = sys.hpds()?;
    let tr = match sim.samples {
        Some(0) => return Err(CliError::Input("--samples must be at least 1".into())),
        Some(m) => integrate_at(&hpds, x0, &uniform_times(sim.t_end, m), &opts)?,
        None => integrate_with(&hpds, x0, sim.t_end, &opts)?,
    };
    let table: Vec<Vec<Option<f64>>> = tr
        .times
        .iter()
        .zip(&tr.states)
        .map(|(&t, x)| std::iter::once(t).chain(x.iter().copied()).map(Some).collect())
        .collect();
    let mut buf = Vec::new();
    write_csv(&mut buf, &state_header(sys.dim(), &["x"]), &table)?;
    Ok(Output {
        body: String::from_utf8(buf).expect("csv is utf-8"),
        notes: termination_note(&tr).into_iter().collect(),
    })
}
