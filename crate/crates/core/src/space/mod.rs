//! Finite model metric measure spaces and their geometric primitives.
//!
//! Every model is a finite point set on a line or a circle carrying a
//! positive measure `μ` and a metric. Grid models (interval, circle, OU) are
//! uniform; their measures are `μ_i ∝ e^{-V(x_i)}·h` with trapezoidal end
//! weights, and adjacent nodes are joined by a [`Bond`] whose mass is the
//! density at the cell midpoint. The generator in [`crate::operator`] is
//! assembled from those bonds, which keeps it `μ`-symmetric by construction.

mod intrinsic;
pub mod mehler;

pub use intrinsic::{intrinsic_metric, IntrinsicDistance};
pub use mehler::{ou_closed_form, OuQuery, OuValue};

use std::f64::consts::PI;

use crate::error::{param, Error, Result};
use crate::operator::GridFunction;

/// Exhaustive triangle-inequality checks are only run up to this size.
const TRIANGLE_CHECK_MAX: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Interval,
    Circle,
    Ou,
    Custom,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Interval => "interval",
            ModelKind::Circle => "circle",
            ModelKind::Ou => "ou",
            ModelKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Neumann,
    Periodic,
    None,
}

/// Potential `V` of the reference measure `e^{-V}`.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Zero,
    /// `x²/2`
    Quadratic,
    /// `x⁴`
    Quartic,
    /// Coefficients in ascending powers of `x`.
    Polynomial(Vec<f64>),
    /// Values at the grid nodes; derivatives are taken by finite differences.
    Samples(Vec<f64>),
}

impl Potential {
    fn analytic_value(&self, x: f64) -> Option<f64> {
        match self {
            Potential::Zero => Some(0.0),
            Potential::Quadratic => Some(0.5 * x * x),
            Potential::Quartic => Some(x.powi(4)),
            Potential::Polynomial(c) => Some(c.iter().rev().fold(0.0, |acc, &a| acc * x + a)),
            Potential::Samples(_) => None,
        }
    }

    fn analytic_second_derivative(&self, x: f64) -> Option<f64> {
        match self {
            Potential::Zero => Some(0.0),
            Potential::Quadratic => Some(1.0),
            Potential::Quartic => Some(12.0 * x * x),
            Potential::Polynomial(c) => {
                let mut acc = 0.0;
                for (k, &a) in c.iter().enumerate().skip(2).rev() {
                    acc = acc * x + a * (k * (k - 1)) as f64;
                }
                Some(acc)
            }
            Potential::Samples(_) => None,
        }
    }
}

/// Explicit description of a custom space.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomModel {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    /// Full distance matrix; `|x - y|` on the coordinates when absent.
    pub distances: Option<Vec<Vec<f64>>>,
    /// `(a, b, mass)` triples; the generator rate is `mass / (d(a,b)² μ_a)`.
    /// Defaults to nearest neighbours with mass `(μ_a + μ_b) / 2`.
    pub bonds: Option<Vec<(usize, usize, f64)>>,
    pub k_target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n: usize,
    pub domain: (f64, f64),
    pub potential: Potential,
    /// Rescale `μ` to a probability measure.
    pub normalize: bool,
    pub custom: Option<CustomModel>,
}

impl ModelSpec {
    /// Ornstein–Uhlenbeck reference: `V = x²/2` on `[-5, 5]`.
    pub fn ou(n: usize) -> Self {
        Self::ou_on(n, 5.0)
    }

    pub fn ou_on(n: usize, half_width: f64) -> Self {
        Self {
            kind: ModelKind::Ou,
            n,
            domain: (-half_width, half_width),
            potential: Potential::Quadratic,
            normalize: true,
            custom: None,
        }
    }

    /// Flat circle of circumference `2π`.
    pub fn circle(n: usize) -> Self {
        Self {
            kind: ModelKind::Circle,
            n,
            domain: (0.0, 2.0 * PI),
            potential: Potential::Zero,
            normalize: true,
            custom: None,
        }
    }

    pub fn interval(n: usize, domain: (f64, f64), potential: Potential) -> Self {
        Self {
            kind: ModelKind::Interval,
            n,
            domain,
            potential,
            normalize: true,
            custom: None,
        }
    }

    /// Two points at distance 1 with `μ = (½, ½)` and generator `[[-1, 1], [1, -1]]`.
    pub fn two_point() -> Self {
        Self::custom(CustomModel {
            points: vec![0.0, 1.0],
            weights: vec![0.5, 0.5],
            distances: None,
            bonds: None,
            k_target: 2.0,
        })
    }

    pub fn custom(model: CustomModel) -> Self {
        let n = model.points.len();
        let domain = (
            model.points.first().copied().unwrap_or(0.0),
            model.points.last().copied().unwrap_or(0.0),
        );
        Self {
            kind: ModelKind::Custom,
            n,
            domain,
            potential: Potential::Zero,
            normalize: false,
            custom: Some(model),
        }
    }

    /// Short identifier used in reports, e.g. `ou[N=401,-5:5]`.
    pub fn label(&self) -> String {
        match self.kind {
            ModelKind::Custom => format!("custom[N={}]", self.n),
            kind => {
                let pot = match &self.potential {
                    Potential::Zero | Potential::Quadratic => String::new(),
                    Potential::Quartic => ",quartic".to_string(),
                    Potential::Polynomial(_) => ",poly".to_string(),
                    Potential::Samples(_) => ",table".to_string(),
                };
                format!(
                    "{}[N={},{}:{}{}]",
                    kind.name(),
                    self.n,
                    self.domain.0,
                    self.domain.1,
                    pot
                )
            }
        }
    }
}

/// Edge of the underlying graph. `mass` is the midpoint measure of the cell
/// between `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Metric {
    Line,
    Circle { circumference: f64 },
    Matrix(Vec<f64>),
}

/// A finite metric measure space. Immutable after construction.
#[derive(Debug, Clone)]
pub struct ModelSpace {
    kind: ModelKind,
    label: String,
    points: Vec<f64>,
    spacing: f64,
    weights: Vec<f64>,
    cells: Vec<f64>,
    metric: Metric,
    k_target: f64,
    boundary: Boundary,
    base_point: usize,
    truncation_deficit: f64,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<usize>>,
}

/// Builds a model space from its description.
pub fn build_model(spec: &ModelSpec) -> Result<ModelSpace> {
    match spec.kind {
        ModelKind::Custom => build_custom(spec),
        ModelKind::Circle => build_circle(spec),
        ModelKind::Interval | ModelKind::Ou => build_line(spec),
    }
}

fn check_domain(spec: &ModelSpec) -> Result<()> {
    if spec.n < 3 {
        return param(format!("need at least 3 points, got {}", spec.n));
    }
    let (a, b) = spec.domain;
    if !a.is_finite() || !b.is_finite() || a >= b {
        return param(format!("domain [{a}, {b}] must be finite and non-empty"));
    }
    Ok(())
}

fn build_line(spec: &ModelSpec) -> Result<ModelSpace> {
    check_domain(spec)?;
    let n = spec.n;
    let (a, b) = spec.domain;
    let h = (b - a) / (n - 1) as f64;
    let points: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { b } else { a + i as f64 * h })
        .collect();
    let potential = if spec.kind == ModelKind::Ou {
        Potential::Quadratic
    } else {
        spec.potential.clone()
    };

    let (node_v, mid_v, k_target) = match &potential {
        Potential::Samples(v) => {
            if v.len() != n {
                return param(format!("potential table has {} entries, grid has {n}", v.len()));
            }
            let mids: Vec<f64> = v.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
            let k = v
                .windows(3)
                .map(|w| (w[2] - 2.0 * w[1] + w[0]) / (h * h))
                .fold(f64::INFINITY, f64::min);
            (v.clone(), mids, k)
        }
        p => {
            let nodes: Vec<f64> = points.iter().map(|&x| p.analytic_value(x).unwrap()).collect();
            let mids: Vec<f64> = points
                .windows(2)
                .map(|w| p.analytic_value(0.5 * (w[0] + w[1])).unwrap())
                .collect();
            let k = points
                .iter()
                .map(|&x| p.analytic_second_derivative(x).unwrap())
                .fold(f64::INFINITY, f64::min);
            (nodes, mids, k)
        }
    };
    if let Some(bad) = node_v.iter().chain(mid_v.iter()).position(|v| !v.is_finite()) {
        return Err(Error::Construction(format!(
            "potential is not finite (entry {bad})"
        )));
    }
    if !k_target.is_finite() {
        return Err(Error::Construction("potential curvature is not finite".into()));
    }

    let cells: Vec<f64> = (0..n)
        .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
        .collect();
    // Shift by the minimum so that e^{-V} never overflows; the OU reference
    // keeps its exact Gaussian constant so that the tail deficit is meaningful.
    let (shift, z) = if spec.kind == ModelKind::Ou {
        (0.0, (2.0 * PI).sqrt())
    } else {
        let m = node_v.iter().chain(mid_v.iter()).cloned().fold(f64::INFINITY, f64::min);
        (m, 1.0)
    };
    let raw: Vec<f64> = node_v
        .iter()
        .zip(&cells)
        .map(|(v, w)| w * (-(v - shift)).exp() / z)
        .collect();
    let raw_mid: Vec<f64> = mid_v.iter().map(|v| h * (-(v - shift)).exp() / z).collect();
    let total: f64 = raw.iter().sum();

    let (scale, deficit) = match (spec.kind, spec.normalize) {
        (ModelKind::Ou, _) => (1.0 / total, (1.0 - total).max(0.0)),
        (_, true) => (1.0 / total, 0.0),
        (_, false) => (1.0, 0.0),
    };
    let weights: Vec<f64> = raw.iter().map(|m| m * scale).collect();
    let bonds: Vec<Bond> = raw_mid
        .iter()
        .enumerate()
        .map(|(i, m)| Bond { a: i, b: i + 1, mass: m * scale })
        .collect();
    let k_target = if spec.kind == ModelKind::Ou { 1.0 } else { k_target };
    let base_point = nearest_on_line(&points, h, 0.0);

    finish(ModelSpace {
        kind: spec.kind,
        label: spec.label(),
        points,
        spacing: h,
        weights,
        cells,
        metric: Metric::Line,
        k_target,
        boundary: Boundary::Neumann,
        base_point,
        truncation_deficit: deficit,
        bonds,
        adjacency: Vec::new(),
    })
}

fn build_circle(spec: &ModelSpec) -> Result<ModelSpace> {
    check_domain(spec)?;
    if spec.potential != Potential::Zero {
        return param("circle models are flat; potential must be zero");
    }
    let n = spec.n;
    let (a, b) = spec.domain;
    let length = b - a;
    let h = length / n as f64;
    let points: Vec<f64> = (0..n).map(|i| a + i as f64 * h).collect();
    let unit = if spec.normalize { 1.0 / n as f64 } else { h };
    let bonds = (0..n)
        .map(|i| Bond { a: i, b: (i + 1) % n, mass: unit })
        .collect();
    finish(ModelSpace {
        kind: ModelKind::Circle,
        label: spec.label(),
        points,
        spacing: h,
        weights: vec![unit; n],
        cells: vec![h; n],
        metric: Metric::Circle { circumference: length },
        k_target: 0.0,
        boundary: Boundary::Periodic,
        base_point: 0,
        truncation_deficit: 0.0,
        bonds,
        adjacency: Vec::new(),
    })
}

fn build_custom(spec: &ModelSpec) -> Result<ModelSpace> {
    let model = spec
        .custom
        .as_ref()
        .ok_or_else(|| Error::Parameter("custom model needs points and weights".into()))?;
    let n = model.points.len();
    if n < 2 {
        return param(format!("custom model needs at least 2 points, got {n}"));
    }
    if model.weights.len() != n {
        return param(format!("{} weights for {n} points", model.weights.len()));
    }
    if model.points.iter().chain(&model.weights).any(|v| !v.is_finite()) {
        return Err(Error::Construction("custom model has non-finite entries".into()));
    }
    let metric = match &model.distances {
        None => Metric::Line,
        Some(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return param(format!("distance matrix must be {n}x{n}"));
            }
            Metric::Matrix(rows.iter().flatten().copied().collect())
        }
    };
    let spacing = model
        .points
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let mut space = ModelSpace {
        kind: ModelKind::Custom,
        label: spec.label(),
        points: model.points.clone(),
        spacing,
        weights: model.weights.clone(),
        cells: model.weights.clone(),
        metric,
        k_target: model.k_target,
        boundary: Boundary::None,
        base_point: 0,
        truncation_deficit: 0.0,
        bonds: Vec::new(),
        adjacency: Vec::new(),
    };
    space.bonds = match &model.bonds {
        Some(list) => {
            let mut bonds = Vec::with_capacity(list.len());
            for &(a, b, mass) in list {
                if a >= n || b >= n || a == b {
                    return param(format!("invalid bond ({a}, {b})"));
                }
                if !(mass > 0.0) || !mass.is_finite() {
                    return param(format!("bond ({a}, {b}) needs a positive mass"));
                }
                bonds.push(Bond { a, b, mass });
            }
            bonds
        }
        None => (0..n - 1)
            .map(|i| Bond {
                a: i,
                b: i + 1,
                mass: 0.5 * (model.weights[i] + model.weights[i + 1]),
            })
            .collect(),
    };
    finish(space)
}

fn finish(mut space: ModelSpace) -> Result<ModelSpace> {
    let n = space.points.len();
    let mut adjacency = vec![Vec::new(); n];
    for bond in &space.bonds {
        adjacency[bond.a].push(bond.b);
        adjacency[bond.b].push(bond.a);
    }
    for nbrs in &mut adjacency {
        nbrs.sort_unstable();
        nbrs.dedup();
    }
    space.adjacency = adjacency;
    space.validate(matches!(space.metric, Metric::Matrix(_)))?;
    Ok(space)
}

fn nearest_on_line(points: &[f64], h: f64, coord: f64) -> usize {
    let raw = ((coord - points[0]) / h).round();
    raw.clamp(0.0, (points.len() - 1) as f64) as usize
}

impl ModelSpace {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> f64 {
        self.points[i]
    }

    /// Grid spacing `h` (smallest coordinate gap for custom spaces).
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Lebesgue quadrature weights of the grid cells.
    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn k_target(&self) -> f64 {
        self.k_target
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn base_point(&self) -> usize {
        self.base_point
    }

    /// Reference mass lost to domain truncation before renormalization.
    pub fn truncation_deficit(&self) -> f64 {
        self.truncation_deficit
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_probability(&self) -> bool {
        (self.total_mass() - 1.0).abs() <= 1e-10
    }

    /// Interval and OU models, plus custom spaces without a distance matrix.
    pub fn is_line(&self) -> bool {
        matches!(self.metric, Metric::Line)
    }

    pub fn is_circle(&self) -> bool {
        matches!(self.metric, Metric::Circle { .. })
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        match &self.metric {
            Metric::Line => (self.points[i] - self.points[j]).abs(),
            Metric::Circle { circumference } => {
                arc_length(self.points[i] - self.points[j], *circumference)
            }
            Metric::Matrix(d) => d[i * self.len() + j],
        }
    }

    /// Index of the node closest to `coord`.
    pub fn nearest_index(&self, coord: f64) -> usize {
        match &self.metric {
            Metric::Line if self.kind != ModelKind::Custom => {
                nearest_on_line(&self.points, self.spacing, coord)
            }
            Metric::Circle { circumference } => {
                let offset = (coord - self.points[0]).rem_euclid(*circumference);
                ((offset / self.spacing).round() as usize) % self.len()
            }
            _ => {
                let mut best = 0;
                for (k, &x) in self.points.iter().enumerate() {
                    if (x - coord).abs() < (self.points[best] - coord).abs() {
                        best = k;
                    }
                }
                best
            }
        }
    }

    /// Brackets a coordinate between two adjacent nodes: returns `(lo, hi, w)`
    /// with the point represented as `(1 - w)·lo + w·hi`.
    pub fn locate(&self, coord: f64) -> (usize, usize, f64) {
        let n = self.len();
        if let Metric::Circle { circumference } = self.metric {
            let offset = (coord - self.points[0]).rem_euclid(circumference);
            let s = offset / self.spacing;
            let lo = (s.floor() as usize).min(n - 1);
            let w = (s - lo as f64).clamp(0.0, 1.0);
            return (lo, (lo + 1) % n, w);
        }
        if coord <= self.points[0] {
            return (0, 1, 0.0);
        }
        if coord >= self.points[n - 1] {
            return (n - 2, n - 1, 1.0);
        }
        let lo = match self.points.binary_search_by(|x| x.total_cmp(&coord)) {
            Ok(k) => k.min(n - 2),
            Err(k) => k - 1,
        };
        let w = (coord - self.points[lo]) / (self.points[lo + 1] - self.points[lo]);
        (lo, lo + 1, w.clamp(0.0, 1.0))
    }

    /// Checks the structural invariants. The triangle inequality is checked
    /// exhaustively when `triangle` is set and `N ≤ 300`.
    pub fn validate(&self, triangle: bool) -> Result<()> {
        let n = self.len();
        if let Some(i) = self.weights.iter().position(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(Error::Construction(format!("weight at point {i} is not positive")));
        }
        if self.points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Construction("points are not strictly increasing".into()));
        }
        if self.kind != ModelKind::Custom {
            let h = self.spacing;
            if let Some(k) = self
                .points
                .windows(2)
                .position(|w| ((w[1] - w[0]) - h).abs() > 1e-12 * h.max(1.0) * 8.0)
            {
                return Err(Error::Construction(format!("spacing not uniform at {k}")));
            }
        }
        for i in 0..n {
            if self.distance(i, i) != 0.0 {
                return Err(Error::Construction(format!("d({i},{i}) is not zero")));
            }
            for j in 0..i {
                let (dij, dji) = (self.distance(i, j), self.distance(j, i));
                if !(dij > 0.0) || (dij - dji).abs() > 1e-12 * dij.max(1.0) {
                    return Err(Error::Construction(format!(
                        "distance ({i},{j}) is not positive and symmetric"
                    )));
                }
            }
        }
        if triangle && n <= TRIANGLE_CHECK_MAX {
            for i in 0..n {
                for j in 0..n {
                    let dij = self.distance(i, j);
                    for k in 0..n {
                        if dij > self.distance(i, k) + self.distance(k, j) + 1e-12 * dij.max(1.0) {
                            return Err(Error::Construction(format!(
                                "triangle inequality fails on ({i},{j},{k})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn arc_length(delta: f64, circumference: f64) -> f64 {
    let r = delta.abs().rem_euclid(circumference);
    r.min(circumference - r)
}

/// Constant-speed curve between two nodes: the straight segment on lines,
/// the shorter arc on circles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curve {
    pub from: usize,
    pub to: usize,
    start: f64,
    displacement: f64,
    speed: f64,
}

impl Curve {
    pub fn geodesic(space: &ModelSpace, from: usize, to: usize) -> Self {
        let start = space.point(from);
        let mut displacement = space.point(to) - start;
        if let Metric::Circle { circumference } = space.metric {
            displacement = displacement.rem_euclid(circumference);
            if displacement > 0.5 * circumference {
                displacement -= circumference;
            }
        }
        Self {
            from,
            to,
            start,
            displacement,
            speed: space.distance(from, to),
        }
    }

    /// Coordinate of `γ(τ)`, `τ ∈ [0, 1]`.
    pub fn coordinate(&self, tau: f64) -> f64 {
        self.start + tau * self.displacement
    }

    /// `|γ̇|`, constant along the curve.
    pub fn speed(&self) -> f64 {
        self.speed
    }
}

/// Discrete metric slope `|Df|(x_i)`: the largest difference quotient over
/// the bonded neighbours of `i`.
pub fn local_slope(space: &ModelSpace, f: &GridFunction, i: usize) -> Result<f64> {
    if f.len() != space.len() {
        return param(format!("function has {} values, space has {}", f.len(), space.len()));
    }
    let nbrs = space.neighbors(i);
    if nbrs.is_empty() {
        return Err(Error::UndefinedSlope(i));
    }
    let fi = f[i];
    Ok(nbrs
        .iter()
        .map(|&j| (f[j] - fi).abs() / space.distance(i, j))
        .fold(0.0, f64::max))
}
