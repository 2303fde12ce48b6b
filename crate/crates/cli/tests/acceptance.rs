//! Acceptance battery. Each criterion prints one `PASS` or `FAIL` line; the
//! process exits nonzero when a criterion fails that is not listed in
//! `KNOWN_FAILURES`, or when a listed one unexpectedly passes.

use std::process::{Command, ExitCode};

use rcdlab::inequalities::{
    cd_convexity_check, entropy_cost_check, exponential_lsi_ratio, gaussian_moment, gradient_estimate_check,
    harnack_constant, harnack_oracle, lsi_estimate, sharp_rate, wasserstein_contraction_check,
};
use rcdlab::operator::{exponential_family_ratio, norm_identity_residual, operator_norm, Exponent, NormOptions};
use rcdlab::proof_replay::{
    derivative_bound_replay, g_partial_s, g_value, integrated_constant_identity, ReplayContext, FD_STEP,
};
use rcdlab::space::mehler::GaussHermite;
use rcdlab::space::Potential;
use rcdlab::transport::{displacement_geodesic_1d, relative_entropy, wasserstein};
use rcdlab::{DensityMeasure, GridFunction, Model, ModelSpec, ToleranceModel};
use rcdlab_cli::{presets, report, suite};

/// Criteria whose statement cannot hold for the formula being tested. See
/// the README for the arithmetic.
const KNOWN_FAILURES: &[u32] = &[2];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn build(spec: ModelSpec) -> Model {
    Model::build(&spec).expect("model builds")
}

/// Double-double arithmetic, enough for a ~30-digit reference value.
#[derive(Clone, Copy)]
struct Dd(f64, f64);

impl Dd {
    fn quick(s: f64, e: f64) -> Self {
        let hi = s + e;
        Dd(hi, e - (hi - s))
    }

    fn add(self, o: Dd) -> Dd {
        let s = self.0 + o.0;
        let bb = s - self.0;
        let err = (self.0 - (s - bb)) + (o.0 - bb);
        Dd::quick(s, err + self.1 + o.1)
    }

    fn mul_f(self, c: f64) -> Dd {
        let p = self.0 * c;
        let e = self.0.mul_add(c, -p) + self.1 * c;
        Dd::quick(p, e)
    }

    fn div_f(self, c: f64) -> Dd {
        let q1 = self.0 / c;
        let r = self.add(Dd(q1, 0.0).mul_f(-c));
        Dd::quick(q1, r.0 / c)
    }

    fn recip(self) -> Dd {
        let q1 = 1.0 / self.0;
        let r = Dd(1.0, 0.0).add(self.mul_f(-q1));
        Dd::quick(q1, r.0 / self.0)
    }
}

/// `1/(e² - 1)` from the Taylor series of `e²` in double-double.
fn reference_constant() -> f64 {
    let mut term = Dd(1.0, 0.0);
    let mut sum = Dd(1.0, 0.0);
    for k in 1..60 {
        term = term.mul_f(2.0).div_f(k as f64);
        sum = sum.add(term);
    }
    let r = sum.add(Dd(-1.0, 0.0)).recip();
    r.0 + r.1
}

const PAIRS: [(f64, f64); 3] = [(-1.0, 1.0), (0.0, 1.0), (-2.0, 2.0)];
const TIMES: [f64; 4] = [0.25, 0.5, 1.0, 2.0];
const EXPONENTS: [f64; 3] = [1.5, 2.0, 4.0];

fn criterion_1() -> Outcome {
    let tol = ToleranceModel::default();
    let (mut worst_grid, mut worst_sharp_hi, mut worst_sharp_lo) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
    for &t in &TIMES {
        for &p in &EXPONENTS {
            for &(x, y) in &PAIRS {
                for k in 0..41 {
                    let lambda = -2.0 + 0.1 * k as f64;
                    let r = harnack_oracle(lambda, p, t, x, y, 1.0, &tol).expect("oracle evaluates");
                    worst_grid = worst_grid.min(r.slack);
                }
                let r = harnack_oracle(sharp_rate(p, t, x, y), p, t, x, y, 1.0, &tol).expect("oracle evaluates");
                worst_sharp_hi = worst_sharp_hi.max(r.slack);
                worst_sharp_lo = worst_sharp_lo.min(r.slack);
            }
        }
    }
    let pass = worst_grid >= -1e-10 && worst_sharp_lo >= -1e-10 && worst_sharp_hi <= 1e-8;
    Outcome::new(
        pass,
        format!("min slack over λ grid {worst_grid:.3e}; slack at λ* in [{worst_sharp_lo:.3e}, {worst_sharp_hi:.3e}]"),
    )
}

fn criterion_2() -> Outcome {
    let value = harnack_constant(1.0, 2.0, 1.0, 1.0).expect("constant evaluates");
    let reference = reference_constant();
    let value_err = (value - reference).abs();

    let mut worst: f64 = 0.0;
    for &t in &TIMES {
        for &p in &EXPONENTS {
            for &(x, y) in &PAIRS {
                let d: f64 = (y - x).abs();
                let limit = p * d * d / (4.0 * (p - 1.0) * t);
                for k in [1e-6, -1e-6] {
                    worst = worst.max((harnack_constant(k, p, t, d).expect("constant evaluates") - limit).abs());
                }
            }
        }
    }
    // First-order deviation pd²|K|/(4(p-1)), largest at p = 1.5, d = 4.
    let first_order = 1.5 * 16.0 * 1e-6 / (4.0 * 0.5);
    let continuity = worst <= 1e-9;
    Outcome::new(
        value_err <= 1e-12 && continuity,
        format!(
            "|value - 1/(e²-1)| = {value_err:.3e}; continuity gap at K = ±1e-6 is {worst:.3e} \
             (bound 1e-9, first-order deviation {first_order:.3e})"
        ),
    )
}

fn fd_agreement(ctx: &ReplayContext, worst: &mut f64) -> bool {
    let t = ctx.t();
    let delta = FD_STEP * t;
    let mut ok = true;
    for i in 1..=9 {
        let s = i as f64 * t / 10.0;
        let formula = g_partial_s(ctx, s, s).expect("formula evaluates");
        let fd = (g_value(ctx, s, s + delta).unwrap() - g_value(ctx, s, s - delta).unwrap()) / (2.0 * delta);
        let gap = (formula - fd).abs();
        let allowed = f64::max(1e-6, 1e-3 * formula.abs());
        *worst = worst.max(gap / allowed);
        ok &= gap <= allowed;
    }
    ok
}

fn criterion_3() -> Outcome {
    let tol = ToleranceModel::for_check("harnack_replay").unwrap();
    let two_point = build(ModelSpec::two_point());
    let ou = build(ModelSpec::ou(401));
    let chain = ReplayContext::grid(
        &two_point,
        GridFunction::coordinate(two_point.space()),
        2.0,
        0.5,
        1.0,
        0,
        1,
        two_point.space().k_target(),
    )
    .unwrap();
    let (i, j) = (ou.space().nearest_index(-1.0), ou.space().nearest_index(0.5));
    let grid = ReplayContext::grid(&ou, GridFunction::exponential(ou.space(), 1.0), 2.0, 0.1, 1.0, i, j, 1.0).unwrap();

    let mut fd_ratio = 0.0;
    let fd_ok = fd_agreement(&chain, &mut fd_ratio) & fd_agreement(&grid, &mut fd_ratio);

    let x = -1.0;
    let y = 1.0;
    let runs = [
        chain,
        grid,
        ReplayContext::oracle(sharp_rate(2.0, 1.0, x, y), 2.0, 1.0, x, y, 1.0).unwrap(),
        ReplayContext::oracle(0.5, 2.0, 1.0, x, y, 1.0).unwrap(),
    ];
    let mut replay_ok = true;
    let mut worst_margin = f64::INFINITY;
    for ctx in &runs {
        let out = derivative_bound_replay(ctx, 9, &tol).expect("replay runs");
        replay_ok &= out.report.passed();
        worst_margin = worst_margin.min(out.report.slack + out.report.tolerance);
    }

    let mut identity = 0.0f64;
    for k in [-0.5, 0.0, 1e-7, 1.0, 2.0] {
        for t in [0.5, 1.0, 2.0] {
            identity = identity.max(integrated_constant_identity(k, t, 2.0, 1.0).unwrap().residual);
        }
    }
    Outcome::new(
        fd_ok && replay_ok && identity <= 1e-10,
        format!(
            "worst FD gap / allowance {fd_ratio:.3e}; min replay slack + tol {worst_margin:.3e}; \
             max identity residual {identity:.3e}"
        ),
    )
}

fn criterion_4() -> Outcome {
    let ou = build(ModelSpec::ou(401));
    let space = ou.space();
    let tol = ToleranceModel::for_check("gradient_l2").unwrap();
    let functions = [
        GridFunction::coordinate(space),
        GridFunction::exponential(space, 1.0),
        GridFunction::from_fn(space, |x| (-0.25 * x * x).exp()),
    ];
    let mut worst = f64::INFINITY;
    for f in &functions {
        for t in [0.1, 0.5, 1.0] {
            for order in [1, 2] {
                worst = worst.min(gradient_estimate_check(&ou, f, t, order, 1.0, &tol).unwrap().slack);
            }
        }
    }
    let mut sharp: f64 = 0.0;
    for t in [0.1, 0.5, 1.0] {
        let r = gradient_estimate_check(&ou, &functions[0], t, 1, 1.0, &tol).unwrap();
        sharp = sharp.max(r.slack.abs());
    }
    Outcome::new(worst >= -1e-3 && sharp <= 1e-3, format!("min slack {worst:.3e}; order-1 |slack| for f = x {sharp:.3e}"))
}

fn criterion_5() -> Outcome {
    let two = build(ModelSpec::two_point()).be_estimate().value;
    let ou = build(ModelSpec::ou(401)).be_estimate().value;
    let circle = build(ModelSpec::circle(64)).be_estimate().value;
    Outcome::new(
        (two - 2.0).abs() <= 1e-12 && (0.95..=1.05).contains(&ou) && (-0.02..=0.02).contains(&circle),
        format!("two-point {two:.15}; OU {ou:.6}; circle {circle:.3e}"),
    )
}

fn criterion_6() -> Outcome {
    let ou = build(ModelSpec::ou(401));
    let tol = ToleranceModel::for_check("w2_contraction").unwrap();
    let (i, j) = (ou.space().nearest_index(-1.0), ou.space().nearest_index(1.0));
    let (mut gap, mut residual) = (0.0f64, 0.0f64);
    for t in [0.25, 0.5, 1.0] {
        let r = wasserstein_contraction_check(&ou, i, j, t, 2, 1.0, &tol).unwrap();
        gap = gap.max((r.lhs - 2.0 * (-t).exp()).abs());
        residual = residual.max(r.metadata.residual);
    }
    Outcome::new(gap <= 5e-3 && residual <= 1e-9, format!("max |W₂ - 2e^(-t)| {gap:.3e}; residual {residual:.3e}"))
}

fn criterion_7() -> Outcome {
    let ou = build(ModelSpec::ou(401));
    let space = ou.space();
    let tol = ToleranceModel::for_check("entropy_cost").unwrap();
    let rho = DensityMeasure::gaussian(space, 1.0, 1.0).unwrap();
    let f = GridFunction::from_values(rho.density().iter().map(|v| v.sqrt()).collect());
    let m: f64 = 1.0;
    let (mut lhs_gap, mut rhs_gap, mut slack, mut analytic) = (0.0f64, 0.0f64, f64::INFINITY, f64::INFINITY);
    for t in [0.5, 2.0] {
        let r = entropy_cost_check(&ou, &f, t, 1.0, &tol).unwrap();
        let exact_lhs = m * m * (-2.0 * t).exp() / 2.0;
        let exact_rhs = m * m / (2.0 * (2.0 * t).exp_m1());
        lhs_gap = lhs_gap.max((r.lhs - exact_lhs).abs());
        rhs_gap = rhs_gap.max((r.rhs - exact_rhs).abs());
        slack = slack.min(r.slack);
        analytic = analytic.min(exact_rhs - exact_lhs);
    }
    Outcome::new(
        lhs_gap <= 2e-3 && rhs_gap <= 2e-3 && slack >= -1e-3 && analytic > 0.0,
        format!("lhs gap {lhs_gap:.3e}; rhs gap {rhs_gap:.3e}; min slack {slack:.3e}; analytic slack {analytic:.3e}"),
    )
}

fn criterion_8() -> Outcome {
    let ou = build(ModelSpec::ou(401));
    let tol = ToleranceModel::for_check("lsi").unwrap();
    let (est, _) = lsi_estimate(&ou, 64, 0, 2.0, &tol).unwrap();

    // Gauss-Hermite evaluation of Ent(g²)/E(g,g) for g = e^{λx/2} under N(0,1)
    let rule = GaussHermite::new(80);
    let mut closed_gap: f64 = 0.0;
    for lambda in [0.5, 1.0, 1.5] {
        let z = rule.expectation(0.0, 1.0, |x| (lambda * x).exp());
        let ent = rule.expectation(0.0, 1.0, |x| (lambda * x).exp() * lambda * x) - z * z.ln();
        let energy = rule.expectation(0.0, 1.0, |x| 0.25 * lambda * lambda * (lambda * x).exp());
        let quad = ent / energy;
        let closed = exponential_lsi_ratio(lambda).unwrap();
        closed_gap = closed_gap.max((closed - 2.0).abs()).max((closed - quad).abs());
    }
    Outcome::new(
        (1.95..=2.05).contains(&est.value) && closed_gap <= 1e-6,
        format!("C_lower {:.6} from start {}; closed-form gap {closed_gap:.3e}", est.value, est.best_start),
    )
}

fn criterion_9() -> Outcome {
    let ou = build(ModelSpec::ou(401));
    let space = ou.space();
    let opts = NormOptions::default();
    let below = operator_norm(space, &ou.heat(0.3).unwrap(), Exponent::new(2.0).unwrap(), Exponent::new(4.0).unwrap(), &opts)
        .unwrap()
        .value;
    let above_op = ou.heat(0.56).unwrap();
    let above = opts
        .lambdas
        .iter()
        .map(|&l| exponential_family_ratio(space, &above_op, 2.0, 4.0, l))
        .fold(0.0, f64::max);

    // every model that assembles heat kernels in the battery; the [-10, 10]
    // OU grid of criterion 10 only evaluates moments
    let models = [
        build(ModelSpec::ou(401)),
        build(ModelSpec::two_point()),
        build(ModelSpec::circle(64)),
        build(ModelSpec::interval(101, (-1.0, 1.0), Potential::Quartic)),
    ];
    let mut identity: f64 = 0.0;
    for m in &models {
        for t in [0.25, 0.5, 1.0, 2.0] {
            identity = identity.max(norm_identity_residual(m.spectral(), t).unwrap());
        }
    }
    Outcome::new(
        below > 1.01 && above <= 1.0 + 1e-4 && identity <= 1e-8,
        format!(
            "‖P_0.3‖(2→4) ≥ {below:.6}; exponential family at t = 0.56 ≤ {above:.8} (threshold {:.4}); \
             norm identity residual {identity:.3e}",
            0.5 * 3f64.ln()
        ),
    )
}

fn criterion_10() -> Outcome {
    let ou = build(ModelSpec::ou_on(401, 10.0));
    let o = ou.space().nearest_index(0.0);
    let at_04 = gaussian_moment(&ou, 0.4, o).unwrap();
    let at_06 = gaussian_moment(&ou, 0.6, o).unwrap();
    let exact = (1.0f64 - 0.8).powf(-0.5);
    let gap = (at_04.value - exact).abs();
    Outcome::new(
        gap <= 2e-2 && !at_04.divergent && at_06.divergent,
        format!("λ = 0.4: {:.6} (gap {gap:.3e}, divergent {}); λ = 0.6 divergent {}", at_04.value, at_04.divergent, at_06.divergent),
    )
}

fn criterion_11() -> Outcome {
    let ou = build(ModelSpec::ou(401));
    let space = ou.space();
    let tol = ToleranceModel::for_check("cd_convexity").unwrap();
    let rho0 = DensityMeasure::gaussian(space, -1.0, 1.0).unwrap();
    let rho1 = DensityMeasure::gaussian(space, 1.0, 1.0).unwrap();
    let r = cd_convexity_check(&ou, &rho0, &rho1, 1.0, 11, &tol).unwrap();
    let bound = 0.05 + 5.0 * space.spacing();

    // K = 3 evaluated directly at τ = 1/2
    let path = displacement_geodesic_1d(space, &rho0, &rho1, 11).unwrap();
    let (w, _) = wasserstein(space, &path[0], &path[10], 2).unwrap();
    let mid = 0.5 * relative_entropy(space, &path[0]) + 0.5 * relative_entropy(space, &path[10])
        - 0.5 * 3.0 * 0.25 * w * w
        - relative_entropy(space, &path[5]);
    Outcome::new(
        r.slack >= -bound && mid < -bound,
        format!("K = 1 slack {:.3e} (bound -{bound:.3e}); K = 3 midpoint slack {mid:.3e}", r.slack),
    )
}

fn criterion_12() -> Outcome {
    let cfg = presets::preset("paper-suite").unwrap();
    let serial = suite::run_suite(&cfg, 1).unwrap();
    let parallel = suite::run_suite(&cfg, 8).unwrap();
    let a = report::to_csv(&serial.rows).unwrap();
    let b = report::to_csv(&parallel.rows).unwrap();
    let identical = a == b;

    let status = Command::new(env!("CARGO_BIN_EXE_rcdlab"))
        .args(["run", "--preset", "negative-controls"])
        .output()
        .expect("binary runs")
        .status
        .code();

    let local = [build(ModelSpec::ou(401)), build(ModelSpec::circle(64)), build(ModelSpec::two_point())];
    let mut mass = serial.max_mass_error.max(parallel.max_mass_error);
    for m in &local {
        for t in [1e-3, 0.5, 2.0] {
            m.heat(t).unwrap();
        }
        mass = mass.max(m.max_mass_error());
    }
    Outcome::new(
        identical && status == Some(1) && mass <= 1e-12 && serial.exit_code() == 0,
        format!(
            "{} rows, byte-identical across 1 and 8 threads: {identical}; paper-suite exit {}; \
             negative-controls exit {status:?}; max mass error {mass:.3e}",
            serial.rows.len(),
            serial.exit_code()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 12] = [
        (1, "Harnack sharpness on the OU oracle", criterion_1),
        (2, "Harnack constant value and K → 0 continuity", criterion_2),
        (3, "proof replay", criterion_3),
        (4, "gradient estimates", criterion_4),
        (5, "Bakry-Emery constant", criterion_5),
        (6, "W₂ contraction", criterion_6),
        (7, "entropy-cost", criterion_7),
        (8, "log-Sobolev constant", criterion_8),
        (9, "hypercontractivity", criterion_9),
        (10, "Gaussian moments", criterion_10),
        (11, "entropy convexity", criterion_11),
        (12, "infrastructure", criterion_12),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let out = run();
        let known = KNOWN_FAILURES.contains(&id);
        let tag = match (out.pass, known) {
            (true, false) => "PASS",
            (false, true) => "FAIL (known)",
            (true, true) => "PASS (unexpected)",
            (false, false) => "FAIL",
        };
        println!("{tag} criterion {id:>2} {name}: {}", out.detail);
        if out.pass == known {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
