//! Special functions used by the Lévy measures.
//!
//! The incomplete gamma functions here accept the shapes that show up in
//! tail intensities: `Γ(s, x)` is defined for every real `s` when `x > 0`,
//! including the negative shapes `s = -σ` of generalized gamma tails.

pub use statrs::function::gamma::{gamma, ln_gamma};

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 2000;

/// `(e^x - 1) / x`, continuous at zero.
pub fn exprel(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 + x * (0.5 + x / 6.0)
    } else {
        x.exp_m1() / x
    }
}

/// `∫_a^b v^{p-1} dv = (b^p - a^p) / p` for `0 < a <= b`, stable as `p -> 0`.
pub fn pow_integral(a: f64, b: f64, p: f64) -> f64 {
    if a == 0.0 {
        debug_assert!(p > 0.0);
        return b.powf(p) / p;
    }
    let l = b.ln() - a.ln();
    if (p * l).abs() < 0.5 {
        (p * a.ln()).exp() * l * exprel(p * l)
    } else {
        ((p * b.ln()).exp() - (p * a.ln()).exp()) / p
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function `1 / (1 + e^{-x})`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Series `Σ x^n / (s (s+1) ... (s+n))` so that `γ(s,x) = x^s e^{-x} · series`.
fn lower_series(s: f64, x: f64) -> f64 {
    let mut term = 1.0 / s;
    let mut sum = term;
    for n in 1..MAX_ITER {
        term *= x / (s + n as f64);
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum
}

/// Modified Lentz evaluation of the continued fraction for `Γ(s,x) e^x x^{-s}`.
/// Converges for any real `s` once `x` is of order one or larger.
fn upper_continued_fraction(s: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Lower incomplete gamma `γ(s, x) = ∫_0^x u^{s-1} e^{-u} du`, `s > 0`, `x >= 0`.
pub fn lower_incomplete_gamma(s: f64, x: f64) -> f64 {
    assert!(s > 0.0, "lower incomplete gamma needs s > 0, got {s}");
    if x <= 0.0 {
        return 0.0;
    }
    if x < s + 1.0 {
        (s * x.ln() - x).exp() * lower_series(s, x)
    } else {
        gamma(s) - (s * x.ln() - x).exp() * upper_continued_fraction(s, x)
    }
}

/// `γ(s, x) / x^s`, finite as `x -> 0` where it tends to `1/s`.
pub fn lower_incomplete_gamma_scaled(s: f64, x: f64) -> f64 {
    assert!(s > 0.0, "lower incomplete gamma needs s > 0, got {s}");
    if x <= 0.0 {
        return 1.0 / s;
    }
    if x < s + 1.0 {
        (-x).exp() * lower_series(s, x)
    } else {
        lower_incomplete_gamma(s, x) * (-s * x.ln()).exp()
    }
}

/// Regularized lower incomplete gamma `P(s, x) = γ(s, x) / Γ(s)`.
pub fn regularized_lower_gamma(s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < s + 1.0 {
        (s * x.ln() - x - ln_gamma(s)).exp() * lower_series(s, x)
    } else {
        1.0 - (s * x.ln() - x - ln_gamma(s)).exp() * upper_continued_fraction(s, x)
    }
}

thread_local! {
    static GAMMA_AT_ONE: std::cell::Cell<(f64, f64)> = const { std::cell::Cell::new((f64::NAN, 0.0)) };
}

/// `Γ(s, 1)`, memoized for the last shape seen on this thread.
fn upper_gamma_at_one(s: f64) -> f64 {
    GAMMA_AT_ONE.with(|cell| {
        let (last, value) = cell.get();
        if last == s {
            return value;
        }
        let value = upper_continued_fraction(s, 1.0) * (-1.0f64).exp();
        cell.set((s, value));
        value
    })
}

/// Upper incomplete gamma `Γ(s, x) = ∫_x^∞ u^{s-1} e^{-u} du`.
///
/// Any real `s` is accepted for `x > 0`; at `x = 0` only `s > 0` is finite.
pub fn upper_incomplete_gamma(s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return if s > 0.0 { gamma(s) } else { f64::INFINITY };
    }
    // Γ(s) - γ(s,x) cancels badly for small positive s, which takes the split route.
    if s > 0.5 && x < s + 1.0 {
        return gamma(s) - (s * x.ln() - x).exp() * lower_series(s, x);
    }
    if x >= 1.0 {
        return (s * x.ln() - x).exp() * upper_continued_fraction(s, x);
    }
    // x < 1 and s <= 0.5: Γ(s,x) = Γ(s,1) + Σ_k (-1)^k/k! ∫_x^1 t^{s+k-1} dt.
    let mut sum = upper_gamma_at_one(s);
    let mut fact = 1.0;
    let ln_x = x.ln();
    let mut x_pow = (s * ln_x).exp();
    for k in 0..MAX_ITER {
        if k > 0 {
            fact *= -1.0 / k as f64;
            x_pow *= x;
        }
        let p = s + k as f64;
        let integral = if (p * ln_x).abs() < 0.5 {
            pow_integral(x, 1.0, p)
        } else {
            (1.0 - x_pow) / p
        };
        let term = fact * integral;
        sum += term;
        if k > 2 && term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum
}
