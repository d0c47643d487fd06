//! Student's t distribution: density, CDF via the regularized incomplete beta
//! function, and quantile via bracketed Newton inversion.

use super::{EvalError, Result};
use crate::scalar::Scalar;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos approximation).
pub fn ln_gamma<F: Scalar>(x: F) -> F {
    let half = F::lit(0.5);
    let pi = F::lit(std::f64::consts::PI);
    if x < half {
        // reflection
        return (pi / (pi * x).sin()).ln() - ln_gamma(F::one() - x);
    }
    let x = x - F::one();
    let mut acc = F::lit(LANCZOS[0]);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc = acc + F::lit(*c) / (x + F::from_count(i));
    }
    let t = x + F::lit(LANCZOS_G) + half;
    half * (F::lit(2.0) * pi).ln() + (x + half) * t.ln() - t + acc.ln()
}

fn convergence_tol<F: Scalar>() -> F {
    F::lit(1e-12).max(F::epsilon() * F::lit(4.0))
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf<F: Scalar>(a: F, b: F, x: F) -> F {
    let tiny = F::min_positive_value() / F::epsilon();
    let tol = convergence_tol::<F>();
    let one = F::one();
    let two = F::lit(2.0);
    let qab = a + b;
    let qap = a + one;
    let qam = a - one;
    let mut c = one;
    let mut d = one - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = one / d;
    let mut h = d;
    for m in 1..=10_000usize {
        let m = F::from_count(m);
        let m2 = two * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = one + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        h = h * d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = one + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        let del = d * c;
        h = h * del;
        if (del - one).abs() < tol {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)` for `a, b > 0`, `x` in `[0, 1]`.
pub fn regularized_incomplete_beta<F: Scalar>(x: F, a: F, b: F) -> F {
    if x <= F::zero() {
        return F::zero();
    }
    if x >= F::one() {
        return F::one();
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (F::one() - x).ln();
    let front = ln_front.exp();
    if x < (a + F::one()) / (a + b + F::lit(2.0)) {
        front * beta_cf(a, b, x) / a
    } else {
        F::one() - front * beta_cf(b, a, F::one() - x) / b
    }
}

fn check_df<F: Scalar>(df: F) -> Result<()> {
    if !df.is_finite() || df <= F::zero() {
        return Err(EvalError::Argument(format!(
            "degrees of freedom must be finite and positive, got {df}"
        )));
    }
    Ok(())
}

/// Density of Student's t with `df` degrees of freedom.
pub fn t_pdf<F: Scalar>(x: F, df: F) -> Result<F> {
    check_df(df)?;
    if x.is_nan() {
        return Err(EvalError::Argument("t_pdf: x is NaN".into()));
    }
    let half = F::lit(0.5);
    let pi = F::lit(std::f64::consts::PI);
    let ln = ln_gamma((df + F::one()) * half)
        - ln_gamma(df * half)
        - half * (df * pi).ln()
        - (df + F::one()) * half * (F::one() + x * x / df).ln();
    Ok(ln.exp())
}

/// Cumulative distribution function of Student's t.
pub fn t_cdf<F: Scalar>(x: F, df: F) -> Result<F> {
    check_df(df)?;
    if x.is_nan() {
        return Err(EvalError::Argument("t_cdf: x is NaN".into()));
    }
    if x.is_infinite() {
        return Ok(if x > F::zero() { F::one() } else { F::zero() });
    }
    if x == F::zero() {
        return Ok(F::lit(0.5));
    }
    let half = F::lit(0.5);
    let tail = half * regularized_incomplete_beta(df / (df + x * x), df * half, half);
    Ok(if x < F::zero() { tail } else { F::one() - tail })
}

/// Inverse CDF of Student's t for `p` in the open interval `(0, 1)`.
pub fn t_quantile<F: Scalar>(p: F, df: F) -> Result<F> {
    check_df(df)?;
    if !p.is_finite() || p <= F::zero() || p >= F::one() {
        return Err(EvalError::Argument(format!(
            "t_quantile: p must lie in (0, 1), got {p}"
        )));
    }
    let half = F::lit(0.5);
    if p == half {
        return Ok(F::zero());
    }
    if p < half {
        return Ok(-t_quantile(F::one() - p, df)?);
    }

    // Bracket [lo, hi] with cdf(lo) <= p < cdf(hi).
    let mut lo = F::zero();
    let mut hi = F::one();
    while t_cdf(hi, df)? < p {
        lo = hi;
        hi = hi * F::lit(2.0);
        if !hi.is_finite() {
            return Err(EvalError::Argument("t_quantile: failed to bracket".into()));
        }
    }

    // Bisection seed.
    for _ in 0..20 {
        let mid = half * (lo + hi);
        if t_cdf(mid, df)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let tol = F::lit(1e-13).max(F::epsilon() * F::lit(8.0));
    let mut x = half * (lo + hi);
    for _ in 0..200 {
        let f = t_cdf(x, df)? - p;
        if f < F::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let d = t_pdf(x, df)?;
        let mut next = if d > F::zero() { x - f / d } else { x };
        if !(next > lo && next < hi) {
            next = half * (lo + hi);
        }
        if (next - x).abs() <= tol * (F::one() + x.abs()) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}
