//! Small numeric helpers: fixed-order reductions and scaled complex sines.

use crate::C64;

/// Pairwise (cascade) summation. Fixed evaluation order independent of thread
/// count, so reductions built on it are byte-reproducible.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Pairwise summation for complex slices.
pub fn pairwise_sum_c64(xs: &[C64]) -> C64 {
    match xs.len() {
        0 => C64::new(0.0, 0.0),
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum_c64(a) + pairwise_sum_c64(b)
        }
    }
}

/// `sin(alpha * m)` represented as `mantissa * exp(scale)` with a real scale.
///
/// For complex `alpha = a + ib` the magnitude of `sin(alpha m)` grows like
/// `exp(|m b|)`, which overflows f64 long before the chain lengths of
/// interest (Im(alpha)*L can exceed 700). All transfer-matrix formulas only
/// ever need ratios of such sines, so the scales cancel.
#[derive(Debug, Clone, Copy)]
pub struct ScaledSin {
    pub mantissa: C64,
    pub scale: f64,
}

impl ScaledSin {
    pub fn new(alpha: C64, m: i64) -> Self {
        let a = alpha.re;
        let b = alpha.im;
        let mf = m as f64;
        let scale = (mf * b).abs();
        // sin(m(a+ib)) = (e^{ima - mb} - e^{-ima + mb}) / (2i); factor out the
        // dominant exponential so the mantissa stays O(1).
        let i = C64::new(0.0, 1.0);
        let mantissa = if mf * b >= 0.0 {
            ((i * (mf * a) - 2.0 * mf * b).exp() - (-i * (mf * a)).exp()) / (2.0 * i)
        } else {
            ((i * (mf * a)).exp() - (-i * (mf * a) + 2.0 * mf * b).exp()) / (2.0 * i)
        };
        ScaledSin { mantissa, scale }
    }

    /// Ratio `self / other` as a plain complex number.
    pub fn ratio(&self, other: &ScaledSin) -> C64 {
        self.mantissa / other.mantissa * (self.scale - other.scale).exp()
    }

    /// The plain complex value; overflows for large `scale`.
    pub fn value(&self) -> C64 {
        self.mantissa * self.scale.exp()
    }
}

/// Evaluate the physicists' Hermite polynomial H_n(x) by recurrence.
pub fn hermite(n: usize, x: f64) -> f64 {
    let mut h0 = 1.0;
    if n == 0 {
        return h0;
    }
    let mut h1 = 2.0 * x;
    for k in 1..n {
        let h2 = 2.0 * x * h1 - 2.0 * (k as f64) * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}
