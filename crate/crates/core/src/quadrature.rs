//! Adaptive Gauss–Kronrod (7/15) quadrature.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut gauss = WG[3] * fc;
    let mut kron = WGK[7] * fc;
    for k in 0..7 {
        let x = h * XGK[k];
        let s = f(c - x) + f(c + x);
        kron += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// `∫_a^b f` to within `max(abs_tol, rel_tol·|I|)`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    let mut pending = vec![(a, b, kronrod(&f, a, b))];
    let mut total = 0.0;
    let mut error = 0.0;
    let mut settled = 0.0;
    let mut settled_err = 0.0;
    for _ in 0..10_000 {
        total = settled + pending.iter().map(|p| p.2 .0).sum::<f64>();
        error = settled_err + pending.iter().map(|p| p.2 .1).sum::<f64>();
        if error <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        // bisect the interval with the largest error estimate
        let worst = pending
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .map(|(k, _)| k)
            .unwrap();
        let (lo, hi, (val, err)) = pending.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            settled += val;
            settled_err += err;
            continue;
        }
        pending.push((lo, mid, kronrod(&f, lo, mid)));
        pending.push((mid, hi, kronrod(&f, mid, hi)));
    }
    Err(Error::Solver { message: format!("quadrature error estimate {error:e} above tolerance"), best: total })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_exponentials() {
        let v = integrate(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, 1e-14, 1e-14).unwrap();
        assert!((v - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
        let v = integrate(f64::exp, -1.0, 3.0, 1e-14, 1e-14).unwrap();
        assert!((v - (3f64.exp() - (-1f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn peaked_integrand() {
        let v = integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12, 1e-12).unwrap();
        let exact = 2.0 * (1.0 / 1e-2f64).atan() / 1e-2;
        assert!((v - exact).abs() < 1e-9 * exact);
    }
}
