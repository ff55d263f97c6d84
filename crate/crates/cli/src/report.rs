//! JSON report layouts. Mode indices are 1-based; matrices are lists of
//! rows, eigenvector sets are lists of vectors. Every report carries
//! `schema_version`.

use serde::Serialize;

/// Bumped whenever a field is renamed, removed or changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub dim: usize,
    pub order: usize,
    /// The input tensor itself is odeco (supersymmetric with an orthogonal
    /// decomposition).
    pub odeco: bool,
    /// Residual of the orthogonal decomposition of the input; absent when
    /// the input is not supersymmetric.
    pub residual: Option<f64>,
    /// `"original"`, or `"transformed"` when the spectral data below belong
    /// to the odeco system `y = P^{-1} x`.
    pub coordinates: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transformation: Option<TransformationSummary>,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub z_spectral_radius: f64,
    /// `"unique_origin"` or `"infinitely_many"`.
    pub equilibria: &'static str,
    pub null_modes: Vec<usize>,
    /// Verdict for every initial state (even order).
    pub global: Option<VerdictEntry>,
    /// Sufficient test from the square unfolding (even order >= 4).
    pub unfolding: Option<UnfoldingEntry>,
    pub initial_state: Option<InitialStateEntry>,
    pub control: Option<ControlEntry>,
    /// Most specific verdict available: the initial state's, else the
    /// global one, else the unfolding one. Refers to the uncontrolled flow.
    pub verdict: Option<&'static str>,
    pub blowup_time: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransformationSummary {
    pub fit_error: f64,
    pub relative_fit_error: f64,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictEntry {
    pub verdict: &'static str,
    pub basis: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct UnfoldingEntry {
    pub mu_max: f64,
    /// Absent when `mu_max > 0`, which is inconclusive.
    pub verdict: Option<&'static str>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InitialStateEntry {
    pub x0: Vec<f64>,
    pub modal_coordinates: Vec<f64>,
    pub mode_products: Vec<f64>,
    pub verdict: &'static str,
    pub blowup_time: Option<f64>,
    pub blowup_modes: Vec<usize>,
    pub in_region_of_attraction: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ControlEntry {
    pub b: Vec<f64>,
    pub equilibrium: Option<Vec<f64>>,
    /// Escape time of the controlled flow from `x0`; absent if it exists
    /// for all time or no `x0` was given.
    pub escape_time: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecomposeReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub dim: usize,
    pub order: usize,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub residual: f64,
    pub relative_residual: f64,
    pub odeco: bool,
    pub stages_converged: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdEntry {
    pub epsilon: f64,
    pub absolute: bool,
    /// The fit error a model must not exceed.
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransformReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub dim: usize,
    pub order: usize,
    pub transformable: bool,
    pub fit_error: f64,
    pub relative_fit_error: f64,
    pub threshold: ThresholdEntry,
    pub weights: Vec<f64>,
    #[serde(rename = "V")]
    pub v: Vec<Vec<f64>>,
    #[serde(rename = "P")]
    pub p: Option<Vec<Vec<f64>>>,
    #[serde(rename = "P_inverse")]
    pub p_inverse: Option<Vec<Vec<f64>>>,
    pub seed: u64,
    pub iterations: usize,
    pub restarts: usize,
}
