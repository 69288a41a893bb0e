//! Welch's unequal-variance t-test and the Student-t distribution.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComparisonResult {
    pub t: f64,
    pub dof: f64,
    /// Two-sided p-value.
    pub p: f64,
}

const CF_EPS: f64 = 1e-16;
const CF_MAX_TERMS: usize = 20_000;
const TINY: f64 = 1e-300;

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_TERMS {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`; `one_minus_x` is passed
/// separately so callers can avoid cancellation.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64, one_minus_x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if one_minus_x <= 0.0 {
        return 1.0;
    }
    let ln_front =
        libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b) + a * libm::log(x) + b * libm::log(one_minus_x);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, one_minus_x) / b
    }
}

/// Two-sided tail `P(|T| >= |t|)` for `dof` degrees of freedom.
pub fn student_t_two_sided(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let t2 = t * t;
    let x = dof / (dof + t2);
    let one_minus_x = t2 / (dof + t2);
    regularized_incomplete_beta(dof / 2.0, 0.5, x, one_minus_x).clamp(0.0, 1.0)
}

/// Student-t CDF.
pub fn student_t_cdf(t: f64, dof: f64) -> f64 {
    if t == 0.0 {
        return 0.5;
    }
    let tail = 0.5 * student_t_two_sided(t, dof);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's t-test. Zero variance on both sides gives `(0, 1)` for equal
/// means and `(±inf, 0)` otherwise.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<ComparisonResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Statistics(alloc::format!(
            "Welch's test needs at least 2 samples per side, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Statistics("non-finite sample".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let sa = va / na;
    let sb = vb / nb;
    let se2 = sa + sb;
    if se2 == 0.0 {
        let dof = na + nb - 2.0;
        return Ok(if ma == mb {
            ComparisonResult { t: 0.0, dof, p: 1.0 }
        } else {
            ComparisonResult {
                t: if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY },
                dof,
                p: 0.0,
            }
        });
    }
    let t = (ma - mb) / libm::sqrt(se2);
    let dof = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(ComparisonResult {
        t,
        dof,
        p: student_t_two_sided(t, dof),
    })
}
