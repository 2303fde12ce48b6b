//! Checkers for the quantitative inequalities: each evaluates both sides on
//! a model (or on the closed-form OU oracle) and returns a [`CheckReport`].

mod gradient;
mod harnack;
mod kernel;
mod lsi;
mod moments;
mod transport;

pub use gradient::gradient_estimate_check;
pub use harnack::{harnack_check, harnack_constant, harnack_oracle, sharp_rate, HarnackArgs, HarnackExponent, LOG_OFFSET};
pub use kernel::{kernel_lower_bound, kernel_lower_bound_check, kernel_lower_bound_oracle, BoundVariant};
pub use lsi::{defective_lsi_check, exponential_lsi_ratio, lsi_estimate, lsi_ratio, LsiEstimate};
pub use moments::{gaussian_moment, gaussian_moment_check, MomentEstimate};
pub use transport::{cd_convexity_check, entropy_cost_check, hypercontractivity_check, wasserstein_contraction_check};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::operator::{
    be_constant, build_generator, default_testset, heat_operator, spectral_decompose, BeEstimate,
    Generator, HeatOperator, SpectralDecomposition,
};
use crate::space::{build_model, ModelKind, ModelSpace, ModelSpec};

/// Resolved tolerance `a + c·h^r + truncation deficit`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceModel {
    pub absolute: f64,
    pub coefficient: f64,
    pub order: f64,
}

impl Default for ToleranceModel {
    fn default() -> Self {
        Self::new(1e-10, 0.0, 2.0)
    }
}

impl ToleranceModel {
    pub const fn new(absolute: f64, coefficient: f64, order: f64) -> Self {
        Self { absolute, coefficient, order }
    }

    pub fn resolve(&self, h: f64, deficit: f64) -> f64 {
        self.absolute + self.coefficient * h.powf(self.order) + deficit
    }

    /// Default tolerance of each check id. Stencil-based checks scale with
    /// `h²`, transport-based ones with `h`.
    pub fn for_check(check_id: &str) -> Option<Self> {
        let t = match check_id {
            "harnack" | "log_harnack" => Self::new(1e-10, 1.0, 2.0),
            "gradient_l1" | "gradient_l2" => Self::new(1e-10, 1.0, 2.0),
            "w1_contraction" | "w2_contraction" => Self::new(1e-9, 0.2, 1.0),
            "entropy_cost" => Self::new(1e-10, 0.04, 1.0),
            "cd_convexity" => Self::new(0.05, 5.0, 1.0),
            "harnack_replay" => Self::new(1e-10, 1.0, 2.0),
            "kernel_lower_bound" | "integrated_identity" => Self::new(1e-10, 0.0, 2.0),
            "lsi" | "be_constant" => Self::new(0.05, 0.0, 2.0),
            "gaussian_moment" => Self::new(2e-2, 0.0, 2.0),
            "hypercontractivity" => Self::new(1e-4, 0.0, 2.0),
            _ => return None,
        };
        Some(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// Evaluated and reported, never asserted.
    ReportOnly,
}

/// Parameters of one evaluation; absent entries are left blank in reports.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Params {
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub eps: Option<f64>,
    pub k: Option<f64>,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub lambda: Option<f64>,
}

/// Discretization context of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct Metadata {
    pub n: usize,
    pub h: f64,
    pub truncation_deficit: f64,
    /// Solver or mass-conservation residual of the evaluation, if any.
    pub residual: f64,
    pub k_target: f64,
    pub k_hat: Option<f64>,
    pub extra: BTreeMap<String, String>,
}

impl Metadata {
    pub fn oracle() -> Self {
        Self {
            n: 0,
            h: 0.0,
            truncation_deficit: 0.0,
            residual: 0.0,
            k_target: 1.0,
            k_hat: None,
            extra: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub check_id: String,
    pub model: String,
    pub params: Params,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; a log-slack for the Harnack family.
    pub slack: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub metadata: Metadata,
}

impl CheckReport {
    /// Builds a report with `slack = rhs - lhs`, asserted against `tolerance`.
    pub fn new(
        check_id: &str,
        model: &str,
        params: Params,
        lhs: f64,
        rhs: f64,
        tolerance: f64,
        metadata: Metadata,
    ) -> Result<Self> {
        Self::with_slack(check_id, model, params, lhs, rhs, rhs - lhs, tolerance, metadata)
    }

    /// Builds a report whose slack is computed by the caller.
    #[allow(clippy::too_many_arguments)]
    pub fn with_slack(
        check_id: &str,
        model: &str,
        params: Params,
        lhs: f64,
        rhs: f64,
        slack: f64,
        tolerance: f64,
        metadata: Metadata,
    ) -> Result<Self> {
        for (name, v) in [("lhs", lhs), ("rhs", rhs), ("slack", slack), ("tolerance", tolerance)] {
            if !v.is_finite() {
                return Err(Error::Numeric(format!("{check_id}: {name} is not finite ({v})")));
            }
        }
        if !(tolerance > 0.0) {
            return Err(Error::Parameter(format!("{check_id}: tolerance must be positive")));
        }
        let verdict = if slack >= -tolerance { Verdict::Pass } else { Verdict::Fail };
        Ok(Self {
            check_id: check_id.to_string(),
            model: model.to_string(),
            params,
            lhs,
            rhs,
            slack,
            tolerance,
            verdict,
            metadata,
        })
    }

    pub fn report_only(mut self) -> Self {
        self.verdict = Verdict::ReportOnly;
        self
    }

    pub fn with_extra(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.extra.insert(key.to_string(), value.to_string());
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }

    /// `key=value` pairs of the metadata, `;`-separated.
    pub fn note(&self) -> String {
        let m = &self.metadata;
        let mut out = String::new();
        if m.n > 0 {
            let _ = write!(out, "N={};h={:e};deficit={:e};", m.n, m.h, m.truncation_deficit);
        }
        let _ = write!(out, "residual={:e};K_target={}", m.residual, m.k_target);
        if let Some(k) = m.k_hat {
            let _ = write!(out, ";K_hat={k}");
        }
        for (k, v) in &m.extra {
            let _ = write!(out, ";{k}={v}");
        }
        out
    }
}

/// A model space together with its generator, spectral data and estimated
/// Bakry–Émery constant. Heat kernels are built on demand and cached.
#[derive(Debug)]
pub struct Model {
    space: ModelSpace,
    generator: Generator,
    spectral: SpectralDecomposition,
    be: BeEstimate,
    kernels: Mutex<BTreeMap<u64, Arc<HeatOperator>>>,
}

impl Model {
    pub fn build(spec: &ModelSpec) -> Result<Self> {
        Self::from_space(build_model(spec)?)
    }

    pub fn from_space(space: ModelSpace) -> Result<Self> {
        let generator = build_generator(&space)?;
        let spectral = spectral_decompose(&generator)?;
        let be = be_constant(&generator, &default_testset(&space))?;
        Ok(Self { space, generator, spectral, be, kernels: Mutex::new(BTreeMap::new()) })
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn spectral(&self) -> &SpectralDecomposition {
        &self.spectral
    }

    /// Estimated curvature `K̂` of the discrete operator.
    pub fn k_hat(&self) -> f64 {
        self.be.value
    }

    pub fn be_estimate(&self) -> BeEstimate {
        self.be
    }

    pub fn label(&self) -> &str {
        self.space.label()
    }

    pub fn is_ou(&self) -> bool {
        self.space.kind() == ModelKind::Ou
    }

    /// Heat operator at time `t`, shared between callers.
    pub fn heat(&self, t: f64) -> Result<Arc<HeatOperator>> {
        let key = t.to_bits();
        if let Some(op) = self.kernels.lock().expect("kernel cache poisoned").get(&key) {
            return Ok(Arc::clone(op));
        }
        let op = Arc::new(heat_operator(&self.spectral, t)?);
        self.kernels
            .lock()
            .expect("kernel cache poisoned")
            .entry(key)
            .or_insert_with(|| Arc::clone(&op));
        Ok(op)
    }

    /// Largest row-mass error over every kernel built so far.
    pub fn max_mass_error(&self) -> f64 {
        self.kernels
            .lock()
            .expect("kernel cache poisoned")
            .values()
            .map(|op| op.diagnostics().mass_error)
            .fold(0.0, f64::max)
    }

    pub fn kernel_count(&self) -> usize {
        self.kernels.lock().expect("kernel cache poisoned").len()
    }

    pub fn tolerance(&self, model: &ToleranceModel) -> f64 {
        model.resolve(self.space.spacing(), self.space.truncation_deficit())
    }

    pub fn metadata(&self, residual: f64) -> Metadata {
        Metadata {
            n: self.space.len(),
            h: self.space.spacing(),
            truncation_deficit: self.space.truncation_deficit(),
            residual,
            k_target: self.space.k_target(),
            k_hat: Some(self.k_hat()),
            extra: BTreeMap::new(),
        }
    }

    pub(crate) fn require_probability(&self, what: &str) -> Result<()> {
        if self.space.is_probability() {
            Ok(())
        } else {
            Err(Error::Parameter(format!("{what} needs a probability model, {} has mass {}", self.label(), self.space.total_mass())))
        }
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i < self.space.len() {
            Ok(())
        } else {
            Err(Error::Parameter(format!("point index {i} out of range for N = {}", self.space.len())))
        }
    }
}

/// `K / (e^{2Kt} - 1)`, continued by `1/(2t)` at `K = 0`.
pub(crate) fn curvature_factor(k: f64, t: f64) -> f64 {
    if (k * t).abs() <= 1e-8 {
        1.0 / (2.0 * t)
    } else {
        k / (2.0 * k * t).exp_m1()
    }
}
