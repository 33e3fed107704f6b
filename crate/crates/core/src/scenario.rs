//! Scenario configuration and the forward, inverse and round-trip pipelines
//! shared by the command-line tool and the C interface.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::background::{BackgroundOperator, DirichletData};
use crate::error::{Error, Result};
use crate::glm::{assemble, reconstruct, GlmOptions, ReconstructionResult};
use crate::jost::{Perturbation, PerturbedOperator};
use crate::scattering::{
    dense_bound_states, forward_invariants, validate, BoundState, ForwardInvariants, ScatteringData,
    ValidateOptions, ValidationReport,
};
use crate::surface::{SurfaceData, SurfaceReport};

/// One perturbed site: `a(n) = a_q(n) + da`, `b(n) = b_q(n) + db`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteShift {
    pub n: i64,
    #[serde(default)]
    pub da: f64,
    #[serde(default)]
    pub db: f64,
}

/// Thresholds above which a report is flagged `WARN`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Unitarity, conjugation symmetry and the `T R_+ + T R_-` identity.
    pub identity: f64,
    /// Relative spread of the Jost Wronskian over the window.
    pub wronskian: f64,
    /// Relative error of the norming-constant product.
    pub residue: f64,
    /// Distance between dense-matrix and Wronskian eigenvalues.
    pub eigenvalue: f64,
    /// GLM equation residual.
    pub glm_residual: f64,
    /// Agreement of the two one-sided reconstructions.
    pub consistency: f64,
    /// Reconstructed coefficients against the configured perturbation.
    pub reconstruction: f64,
    /// Imaginary part of `T` across the gap slits relative to `|T|`.
    pub single_valued: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: 1e-8,
            wronskian: 1e-10,
            residue: 1e-6,
            eigenvalue: 1e-8,
            glm_residual: 1e-8,
            consistency: 1e-6,
            reconstruction: 1e-6,
            single_valued: 1e-6,
        }
    }
}

/// Options of the inverse step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InverseConfig {
    pub n_lo: i64,
    pub n_hi: i64,
    pub max_depth: usize,
}

impl Default for InverseConfig {
    fn default() -> Self {
        InverseConfig { n_lo: -8, n_hi: 8, max_depth: 400 }
    }
}

fn default_window() -> i64 {
    210
}

fn default_grid() -> usize {
    64
}

/// A complete scenario: curve, background, perturbation and numerical settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub edges: Vec<f64>,
    #[serde(default)]
    pub dirichlet: Option<DirichletData>,
    /// Coefficients are computed on `[-window, window]`.
    #[serde(default = "default_window")]
    pub window: i64,
    #[serde(default)]
    pub perturbation: Vec<SiteShift>,
    /// Gauss nodes per bank of every band.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub inverse: InverseConfig,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Checks the settings that do not need the curve.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parse(m));
        if self.grid < 4 {
            return bad(format!("grid must be at least 4 nodes per band, got {}", self.grid));
        }
        if self.inverse.n_lo > self.inverse.n_hi {
            return bad(format!("inverse.n_lo = {} exceeds inverse.n_hi = {}", self.inverse.n_lo, self.inverse.n_hi));
        }
        let reach = self.perturbation.iter().map(|s| s.n.abs()).max().unwrap_or(0);
        let need = reach.max(self.inverse.n_lo.abs()).max(self.inverse.n_hi.abs()) + 20;
        if self.window < need {
            return bad(format!("window must be at least {need} to cover the perturbation and inverse range"));
        }
        let mut sites: Vec<i64> = self.perturbation.iter().map(|s| s.n).collect();
        sites.sort_unstable();
        if sites.windows(2).any(|w| w[0] == w[1]) {
            return bad("perturbation lists a site twice".into());
        }
        if self.perturbation.iter().any(|s| !s.da.is_finite() || !s.db.is_finite()) {
            return bad("perturbation values must be finite".into());
        }
        Ok(())
    }

    /// Default settings for the curve and divisor recorded in `data`.
    pub fn for_data(data: &ScatteringData) -> Self {
        ScenarioConfig {
            edges: data.edges.clone(),
            dirichlet: Some(data.dirichlet.clone()),
            window: default_window(),
            perturbation: Vec::new(),
            grid: data.nodes_per_band,
            tolerances: Tolerances::default(),
            inverse: InverseConfig::default(),
        }
    }

    pub fn dirichlet(&self) -> DirichletData {
        self.dirichlet.clone().unwrap_or(DirichletData { mus: vec![], sigmas: vec![] })
    }

    pub fn perturbation(&self) -> Perturbation {
        let Some(lo) = self.perturbation.iter().map(|s| s.n).min() else {
            return Perturbation::zero();
        };
        let hi = self.perturbation.iter().map(|s| s.n).max().unwrap_or(lo);
        let len = (hi - lo + 1) as usize;
        let mut p = Perturbation { start: lo, da: vec![0.0; len], db: vec![0.0; len] };
        for s in &self.perturbation {
            p.da[(s.n - lo) as usize] = s.da;
            p.db[(s.n - lo) as usize] = s.db;
        }
        p
    }
}

/// Curve, background and perturbed operator built from a configuration.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub surface: Arc<SurfaceData>,
    pub background: Arc<BackgroundOperator>,
    pub operator: PerturbedOperator,
}

impl Scenario {
    pub fn build(config: ScenarioConfig) -> Result<Self> {
        config.check()?;
        let surface = Arc::new(SurfaceData::from_edges(&config.edges)?);
        let w = config.window;
        let background = Arc::new(BackgroundOperator::new(Arc::clone(&surface), config.dirichlet(), -w, w)?);
        let operator = PerturbedOperator::new(Arc::clone(&background), config.perturbation())?;
        Ok(Scenario { config, surface, background, operator })
    }
}

/// Background operator on `[-window, window]` matching the curve and divisor of `data`.
pub fn background_from_data(data: &ScatteringData, window: i64) -> Result<Arc<BackgroundOperator>> {
    let surface = Arc::new(SurfaceData::from_edges(&data.edges)?);
    Ok(Arc::new(BackgroundOperator::new(surface, data.dirichlet.clone(), -window, window)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Warn,
}

fn status(warnings: &[String]) -> Status {
    if warnings.is_empty() {
        Status::Pass
    } else {
        Status::Warn
    }
}

fn over(warnings: &mut Vec<String>, what: &str, value: f64, tol: f64) {
    if !(value <= tol) {
        warnings.push(format!("{what} = {value:.3e} exceeds {tol:.1e}"));
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ForwardReport {
    pub status: Status,
    pub invariants: ForwardInvariants,
    pub bound_states: Vec<BoundState>,
    /// Eigenvalues of the truncated operator outside the spectrum.
    pub dense_eigenvalues: Vec<f64>,
    /// Largest distance to the dense eigenvalues; infinite if the counts differ.
    pub eigenvalue_mismatch: f64,
    pub t0: f64,
    pub warnings: Vec<String>,
}

/// Computes scattering data and checks the forward identities.
pub fn forward(sc: &Scenario) -> Result<(ScatteringData, ForwardReport)> {
    let op = &sc.operator;
    let tol = &sc.config.tolerances;
    let data = crate::scattering::scattering_data(op, sc.config.grid)?;
    let invariants = forward_invariants(op, &data)?;
    let dense = dense_bound_states(op, sc.config.window - 10)?;
    let mismatch = if dense.len() == data.bound_states.len() {
        dense.iter().zip(&data.bound_states).map(|(d, b)| (d - b.rho).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let mut warnings = Vec::new();
    over(&mut warnings, "unitarity", invariants.unitarity, tol.identity);
    over(&mut warnings, "consistency", invariants.consistency, tol.identity);
    over(&mut warnings, "symmetry", invariants.symmetry, tol.identity);
    over(&mut warnings, "wronskian spread", invariants.wronskian_spread, tol.wronskian);
    for (j, &r) in invariants.residue.iter().enumerate() {
        over(&mut warnings, &format!("residue identity at bound state {j}"), r, tol.residue);
    }
    over(&mut warnings, "dense eigenvalue mismatch", mismatch, tol.eigenvalue);
    let report = ForwardReport {
        status: status(&warnings),
        invariants,
        bound_states: data.bound_states.clone(),
        dense_eigenvalues: dense,
        eigenvalue_mismatch: mismatch,
        t0: data.t0,
        warnings,
    };
    Ok((data, report))
}

fn validate_options(tol: &Tolerances) -> ValidateOptions {
    ValidateOptions {
        identity_tol: tol.identity,
        residue_tol: tol.residue,
        single_valued_tol: tol.single_valued,
        ..ValidateOptions::default()
    }
}

/// Runs the admissibility checks on `data` against the background of `config`.
pub fn validate_data(data: &ScatteringData, config: &ScenarioConfig) -> Result<ValidationReport> {
    let bg = background_from_data(data, config.window)?;
    validate(data, &bg, &validate_options(&config.tolerances))
}

#[derive(Debug, Clone, Serialize)]
pub struct InverseReport {
    pub status: Status,
    pub validation: ValidationReport,
    /// Absent when validation fails and the solve is not attempted.
    pub reconstruction: Option<ReconstructionResult>,
    /// Largest deviation from the coefficients implied by the configured perturbation.
    pub max_error: Option<f64>,
    pub warnings: Vec<String>,
}

/// Validates `data` and, if admissible, reconstructs the coefficients on the configured range.
pub fn inverse(data: &ScatteringData, config: &ScenarioConfig) -> Result<InverseReport> {
    let bg = background_from_data(data, config.window)?;
    let tol = &config.tolerances;
    let validation = validate(data, &bg, &validate_options(tol))?;
    let mut warnings = Vec::new();
    if !validation.passed() {
        for c in validation.clauses.iter().filter(|c| c.status == crate::scattering::ClauseStatus::Fail) {
            warnings.push(format!("condition ({}) fails: {}", c.name, c.notes.join("; ")));
        }
        return Ok(InverseReport { status: Status::Warn, validation, reconstruction: None, max_error: None, warnings });
    }
    let inv = config.inverse;
    let opts = GlmOptions { max_depth: inv.max_depth, ..GlmOptions::default() };
    let rec = reconstruct(data, &bg, inv.n_lo, inv.n_hi, opts)?;
    over(&mut warnings, "GLM residual (+)", rec.glm_residual_plus, tol.glm_residual);
    over(&mut warnings, "GLM residual (-)", rec.glm_residual_minus, tol.glm_residual);
    over(&mut warnings, "one-sided disagreement", rec.consistency, tol.consistency);
    if !(rec.smallest_eigenvalue > 0.0) {
        warnings.push(format!("1 + F is not positive (smallest eigenvalue {:.3e})", rec.smallest_eigenvalue));
    }
    let max_error = if config.edges == data.edges && config.dirichlet() == data.dirichlet {
        let e = reconstruction_error(&rec, &config.perturbation());
        over(&mut warnings, "reconstruction error", e, tol.reconstruction);
        Some(e)
    } else {
        None
    };
    Ok(InverseReport { status: status(&warnings), validation, reconstruction: Some(rec), max_error, warnings })
}

/// Largest coefficient error of the combined reconstruction against `a_q + da`, `b_q + db`.
pub fn reconstruction_error(rec: &ReconstructionResult, p: &Perturbation) -> f64 {
    let mut e = 0.0f64;
    for (i, n) in (rec.n_lo..=rec.n_hi).enumerate() {
        e = e.max((rec.a[i] - rec.a_q[i] - p.da(n)).abs()).max((rec.b[i] - rec.b_q[i] - p.db(n)).abs());
    }
    e
}

/// Writes the reconstruction table: background, both one-sided results, the combined result and residuals.
pub fn write_reconstruction_csv<W: Write>(rec: &ReconstructionResult, expected: Option<&Perturbation>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record([
        "n", "a_q", "b_q", "a_plus", "b_plus", "a_minus", "b_minus", "a_rec", "b_rec", "side_residual_a",
        "side_residual_b", "error_a", "error_b",
    ])
    .map_err(csv_err)?;
    for (i, n) in (rec.n_lo..=rec.n_hi).enumerate() {
        let (ea, eb) = match expected {
            Some(p) => (
                format!("{:e}", rec.a[i] - rec.a_q[i] - p.da(n)),
                format!("{:e}", rec.b[i] - rec.b_q[i] - p.db(n)),
            ),
            None => (String::new(), String::new()),
        };
        let f = |x: f64| format!("{x:e}");
        w.write_record([
            n.to_string(),
            f(rec.a_q[i]),
            f(rec.b_q[i]),
            f(rec.plus.a[i]),
            f(rec.plus.b[i]),
            f(rec.minus.a[i]),
            f(rec.minus.b[i]),
            f(rec.a[i]),
            f(rec.b[i]),
            f(rec.plus.a[i] - rec.minus.a[i]),
            f(rec.plus.b[i] - rec.minus.b[i]),
            ea,
            eb,
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Fitted constant of `|X(n, m)| <= C * tail(mid)` for an upper (`sign > 0`) or lower
/// triangular array, as in [`crate::jost::TransformationKernel::decay_constant`].
/// Rows run over `[lo, hi]`. Entries where the tail vanishes are collected separately.
pub fn decay_fit(op: &PerturbedOperator, sign: f64, lo: i64, hi: i64, depth: i64, x: impl Fn(i64, i64) -> Option<f64>) -> DecayFit {
    let mut fit = DecayFit { constant: 0.0, outside: 0.0 };
    for n in lo..=hi {
        for k in 1..=depth {
            let m = if sign > 0.0 { n + k } else { n - k };
            let Some(v) = x(n, m) else { continue };
            let mid = (n + m).div_euclid(2);
            let tail = if sign > 0.0 { op.tail(mid, 1.0) } else { op.tail(mid + (n + m).rem_euclid(2), -1.0) };
            if tail > 0.0 {
                fit.constant = fit.constant.max(v.abs() / tail);
            } else {
                fit.outside = fit.outside.max(v.abs());
            }
        }
    }
    fit
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayFit {
    pub constant: f64,
    /// Largest entry where the perturbation tail is zero.
    pub outside: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayConstants {
    pub k_plus: DecayFit,
    pub k_minus: DecayFit,
    pub f_plus: DecayFit,
    pub f_minus: DecayFit,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundtripReport {
    pub status: Status,
    pub forward: ForwardReport,
    pub inverse: InverseReport,
    pub max_error: Option<f64>,
    pub decay_constants: DecayConstants,
    pub smallest_eigenvalues_plus: Vec<f64>,
    pub smallest_eigenvalues_minus: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Forward problem followed by the inverse problem in one pass.
pub fn roundtrip(sc: &Scenario) -> Result<RoundtripReport> {
    let (data, fwd) = forward(sc)?;
    let inv = inverse(&data, &sc.config)?;
    let (lo, hi) = (sc.config.inverse.n_lo, sc.config.inverse.n_hi);
    let grid = sc.surface.circle_grid(&sc.background.dirichlet.mus, sc.config.grid);
    let depth = 16;
    let op = &sc.operator;
    let mut fits = Vec::new();
    let (e_lo, e_hi) = op.edges();
    for sign in [1.0, -1.0] {
        let (rlo, rhi) = if sign > 0.0 { (e_lo.max(lo), hi) } else { (lo, e_hi.min(hi)) };
        let k = op.kernel(&grid, rlo, rhi, depth as usize, sign)?;
        fits.push(decay_fit(op, sign, rlo, rhi, depth, |n, m| k.get(n, m)));
        let (klo, khi) = if sign > 0.0 { (rlo, rhi + depth) } else { (rlo - depth, rhi) };
        let f = assemble(&data, &sc.background, sign, klo, khi)?;
        fits.push(decay_fit(op, sign, rlo, rhi, depth, |n, m| f.get(n, m)));
    }
    let mut warnings: Vec<String> = fwd.warnings.iter().chain(&inv.warnings).cloned().collect();
    if inv.reconstruction.is_none() {
        warnings.push("inverse step skipped".into());
    }
    let (ep, em) = inv
        .reconstruction
        .as_ref()
        .map(|r| (r.smallest_eigenvalues_plus.clone(), r.smallest_eigenvalues_minus.clone()))
        .unwrap_or_default();
    Ok(RoundtripReport {
        status: status(&warnings),
        max_error: inv.max_error,
        forward: fwd,
        inverse: inv,
        decay_constants: DecayConstants { k_plus: fits[0], f_plus: fits[1], k_minus: fits[2], f_minus: fits[3] },
        smallest_eigenvalues_plus: ep,
        smallest_eigenvalues_minus: em,
        warnings,
    })
}

/// One point of the map `z -> w(z)` on the real axis.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MapSample {
    /// `band` or `gap`.
    pub kind: &'static str,
    pub index: usize,
    pub x: f64,
    pub re_w: f64,
    pub im_w: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceOutput {
    pub report: SurfaceReport,
    /// `w(E_k)` from the upper half plane at every band edge.
    pub edge_w: Vec<Complex64>,
    pub samples: Vec<MapSample>,
}

/// Surface diagnostics, with random theta test points drawn from `seed`.
pub fn surface_report(config: &ScenarioConfig, seed: u64, samples_per_interval: usize) -> Result<SurfaceOutput> {
    let s = SurfaceData::from_edges(&config.edges)?;
    let g = s.genus();
    let mut rng = StdRng::seed_from_u64(seed);
    let points: Vec<Vec<Complex64>> = (0..8)
        .map(|_| (0..g).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5))).collect())
        .collect();
    let report = s.report(&points);
    let edges = s.curve.edges().to_vec();
    let edge_w = edges.iter().map(|&e| s.log_w_real(e).exp()).collect();
    let mut samples = Vec::new();
    let k = samples_per_interval;
    let mut push = |kind: &'static str, index: usize, a: f64, b: f64| {
        for i in 0..k {
            let x = a + (b - a) * (i as f64 + 0.5) / k as f64;
            let w = s.log_w_real(x).exp();
            samples.push(MapSample { kind, index, x, re_w: w.re, im_w: w.im });
        }
    };
    for b in 0..=g {
        let (a, e) = s.curve.band(b);
        push("band", b, a, e);
    }
    for j in 1..=g {
        let (a, e) = s.curve.gap(j);
        push("gap", j, a, e);
    }
    Ok(SurfaceOutput { report, edge_w, samples })
}
