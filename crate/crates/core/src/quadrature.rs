//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Intervals are kept in a max-heap keyed by their error estimate and the
//! worst one is bisected until the summed error meets the tolerance. Nodes
//! never touch the endpoints, so integrable endpoint singularities are fine;
//! `integrate_power_weighted` removes algebraic ones altogether.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

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

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub subintervals: usize,
}

/// Tolerances and refinement budget.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subintervals: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self::new(1e-10)
    }
}

#[derive(Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs_value: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut err = err.abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 {
            res_asc * scale
        } else {
            res_asc
        };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    err
}

/// One 15-point Kronrod panel with its embedded 7-point Gauss estimate.
fn kronrod_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut res_k = f_center * WGK[7];
    let mut res_g = f_center * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    if !res_k.is_finite() {
        return Err(Error::numeric(
            "quadrature",
            format!("non-finite integrand on [{a:e}, {b:e}]"),
        ));
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let h = half.abs();
    let err = rescale_error((res_k - res_g) * half, res_abs * h, res_asc * h);
    Ok((res_k * half, err, res_abs * h))
}

impl Quadrature {
    pub fn new(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol: 0.0,
            max_subintervals: 4000,
        }
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    /// `∫_a^b f(x) dx` on a finite interval.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<Integral> {
        if a == b {
            return Ok(Integral {
                value: 0.0,
                abs_error: 0.0,
                subintervals: 0,
            });
        }
        let (value, error, abs_value) = kronrod_panel(&f, a, b)?;
        let mut heap = BinaryHeap::new();
        heap.push(Segment {
            a,
            b,
            value,
            error,
            abs_value,
        });
        let mut total = value;
        let mut total_err = error;
        let mut total_abs = abs_value;
        loop {
            // Never ask for more than the round-off floor of the panel rule.
            let tol = self
                .abs_tol
                .max(self.rel_tol * total.abs())
                .max(100.0 * f64::EPSILON * total_abs);
            if total_err <= tol {
                break;
            }
            if heap.len() >= self.max_subintervals {
                return Err(Error::numeric(
                    "quadrature",
                    format!(
                        "no convergence on [{a:e}, {b:e}] after {} subintervals: \
                         estimate {total:e}, error {total_err:e}, target {tol:e}",
                        heap.len()
                    ),
                ));
            }
            let worst = heap.pop().expect("heap is never empty");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
                // Interval exhausted at machine precision; accept what we have.
                heap.push(worst);
                break;
            }
            let (v1, e1, r1) = kronrod_panel(&f, worst.a, mid)?;
            let (v2, e2, r2) = kronrod_panel(&f, mid, worst.b)?;
            total += v1 + v2 - worst.value;
            total_err += e1 + e2 - worst.error;
            total_abs += r1 + r2 - worst.abs_value;
            heap.push(Segment {
                a: worst.a,
                b: mid,
                value: v1,
                error: e1,
                abs_value: r1,
            });
            heap.push(Segment {
                a: mid,
                b: worst.b,
                value: v2,
                error: e2,
                abs_value: r2,
            });
            // Re-sum periodically to keep the running totals from drifting.
            if heap.len() % 64 == 0 {
                total = heap.iter().map(|s| s.value).sum();
                total_err = heap.iter().map(|s| s.error).sum();
                total_abs = heap.iter().map(|s| s.abs_value).sum();
            }
        }
        let value: f64 = heap.iter().map(|s| s.value).sum();
        let abs_error: f64 = heap.iter().map(|s| s.error).sum();
        Ok(Integral {
            value,
            abs_error,
            subintervals: heap.len(),
        })
    }

    /// `∫_a^∞ f(x) dx`.
    ///
    /// The half line is mapped logarithmically, `x = b e^u`, before folding
    /// `u ∈ [0, ∞)` onto `[0, 1)`. Power-law tails then decay exponentially in
    /// `u`, which keeps the folded integrand smooth at the far endpoint.
    pub fn integrate_to_infinity<F: Fn(f64) -> f64>(&self, f: F, a: f64) -> Result<Integral> {
        let (b, mut head) = if a > 0.0 {
            (a, None)
        } else {
            let b = 1.0;
            (b, Some(self.integrate(&f, a, b)?))
        };
        let tail = self.integrate(
            |t: f64| {
                let s = 1.0 - t;
                let x = b * (t / s).exp();
                if !x.is_finite() {
                    return 0.0;
                }
                let v = f(x);
                if v == 0.0 {
                    0.0
                } else {
                    v * x / (s * s)
                }
            },
            0.0,
            1.0,
        )?;
        Ok(match head.take() {
            Some(h) => Integral {
                value: h.value + tail.value,
                abs_error: h.abs_error + tail.abs_error,
                subintervals: h.subintervals + tail.subintervals,
            },
            None => tail,
        })
    }

    /// `∫_0^c y^{a-1} g(y) dy` for `a > 0`.
    ///
    /// For `a < 1` the substitution `y = c s^{1/a}` absorbs the endpoint
    /// singularity: the integral becomes `(c^a / a) ∫_0^1 g(c s^{1/a}) ds`.
    pub fn integrate_power_weighted<G: Fn(f64) -> f64>(
        &self,
        a: f64,
        c: f64,
        g: G,
    ) -> Result<Integral> {
        if a >= 1.0 {
            return self.integrate(|y: f64| y.powf(a - 1.0) * g(y), 0.0, c);
        }
        let scale = c.powf(a) / a;
        let inv = 1.0 / a;
        let mut r = self.integrate(|s: f64| g(c * s.powf(inv)), 0.0, 1.0)?;
        r.value *= scale;
        r.abs_error *= scale;
        Ok(r)
    }
}
