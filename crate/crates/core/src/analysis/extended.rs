//! Conjecture sides in software floating point with a 192-bit significand.
//!
//! Inputs (gradients and hyperparameters) are converted exactly from `f64`;
//! every intermediate is rounded to nearest-even at the working precision.

use astro_float::{BigFloat, RoundingMode};

use crate::params::HyperParams;

/// Working precision of the escalation path, in bits of significand.
pub const EXTENDED_PRECISION_BITS: usize = 192;

const RM: RoundingMode = RoundingMode::ToEven;

/// Both sides for one coordinate, evaluated at extended precision.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedSides {
    /// Sides and slack rounded once to `f64`.
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// Sign of the extended slack, decided before rounding to `f64`.
    pub negative: bool,
    pub precision_bits: usize,
}

struct Ctx {
    p: usize,
}

impl Ctx {
    fn lit(&self, x: f64) -> BigFloat {
        BigFloat::from_f64(x, self.p)
    }
    fn add(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.add(b, self.p, RM)
    }
    fn sub(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.sub(b, self.p, RM)
    }
    fn mul(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.mul(b, self.p, RM)
    }
    fn div(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.div(b, self.p, RM)
    }
    fn sqrt(&self, a: &BigFloat) -> BigFloat {
        a.sqrt(self.p, RM)
    }
}

fn to_f64(x: &BigFloat) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_inf_pos() {
        return f64::INFINITY;
    }
    if x.is_inf_neg() {
        return f64::NEG_INFINITY;
    }
    if x.is_zero() {
        return 0.0;
    }
    // decimal rendering carries ~57 digits, so parsing rounds correctly for all practical inputs
    x.to_string().parse().unwrap_or(f64::NAN)
}

/// Computes `sum_t m_hat_t^2 / sqrt(t v_hat_t)` and
/// `2 / ((1 - gamma) sqrt(1 - beta2)) * |g|_2` for one gradient column.
pub fn coordinate_sides_extended(column: &[f64], p: &HyperParams, precision_bits: usize) -> ExtendedSides {
    let c = Ctx { p: precision_bits };
    let zero = c.lit(0.0);
    let one = c.lit(1.0);
    let beta1 = c.lit(p.beta1);
    let beta2 = c.lit(p.beta2);
    let lambda = c.lit(p.lambda);
    let one_minus_b2 = c.sub(&one, &beta2);

    let mut lambda_pow = one.clone();
    let mut beta1_pow = one.clone();
    let mut beta2_pow = one.clone();
    let mut m = zero.clone();
    let mut v = zero.clone();
    let mut lhs = zero.clone();
    let mut sum_sq = zero.clone();
    let mut lhs_infinite = false;

    for (k, &gx) in column.iter().enumerate() {
        let t = k + 1;
        let g = c.lit(gx);
        let g2 = c.mul(&g, &g);
        let b1t = c.mul(&beta1, &lambda_pow);
        m = c.add(&c.mul(&b1t, &m), &c.mul(&c.sub(&one, &b1t), &g));
        v = c.add(&c.mul(&beta2, &v), &c.mul(&one_minus_b2, &g2));
        beta1_pow = c.mul(&beta1_pow, &beta1);
        beta2_pow = c.mul(&beta2_pow, &beta2);
        let m_hat = c.div(&m, &c.sub(&one, &beta1_pow));
        let v_hat = c.div(&v, &c.sub(&one, &beta2_pow));
        if v_hat.is_zero() {
            // v_hat = 0 forces m = 0 in exact arithmetic
            if !m_hat.is_zero() {
                lhs_infinite = true;
            }
        } else {
            let denom = c.sqrt(&c.mul(&c.lit(t as f64), &v_hat));
            lhs = c.add(&lhs, &c.div(&c.mul(&m_hat, &m_hat), &denom));
        }
        sum_sq = c.add(&sum_sq, &g2);
        lambda_pow = c.mul(&lambda_pow, &lambda);
    }

    let gamma = c.div(&c.mul(&beta1, &beta1), &c.sqrt(&beta2));
    let coef = c.div(&c.lit(2.0), &c.mul(&c.sub(&one, &gamma), &c.sqrt(&one_minus_b2)));
    let rhs = c.mul(&coef, &c.sqrt(&sum_sq));

    if lhs_infinite {
        return ExtendedSides {
            lhs: f64::INFINITY,
            rhs: to_f64(&rhs),
            slack: f64::NEG_INFINITY,
            negative: true,
            precision_bits,
        };
    }
    let slack = c.sub(&rhs, &lhs);
    ExtendedSides {
        lhs: to_f64(&lhs),
        rhs: to_f64(&rhs),
        slack: to_f64(&slack),
        negative: slack.is_negative() && !slack.is_zero(),
        precision_bits,
    }
}
