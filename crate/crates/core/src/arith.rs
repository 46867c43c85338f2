//! Log-domain scalar arithmetic.
//!
//! Probabilities are carried as natural logs; zero probability is
//! `f64::NEG_INFINITY`. The helpers here never produce NaN from log-zero
//! operands, which lets the lattice recursions run over inputs containing
//! exact zero posteriors.

/// Log of zero probability.
pub const LOG_ZERO: f64 = f64::NEG_INFINITY;

/// `log(e^a + e^b)`, stable under large magnitude differences.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == LOG_ZERO {
        return b;
    }
    if b == LOG_ZERO {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `log(e^a + e^b + e^c)`.
pub fn log_add3(a: f64, b: f64, c: f64) -> f64 {
    log_add(log_add(a, b), c)
}

/// `log(sum_i e^{xs[i]})` with a max shift.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(LOG_ZERO, f64::max);
    if hi == LOG_ZERO {
        return LOG_ZERO;
    }
    let sum: f64 = xs.iter().map(|&x| (x - hi).exp()).sum();
    hi + sum.ln()
}

/// `log(e^a - e^b)` for `b <= a`, via `a + log1p(-e^(b-a))`.
///
/// Returns `LOG_ZERO` when the difference underflows to exact zero
/// (`b == a`, including both log-zero). The caller is responsible for
/// rejecting `b > a`; this function clamps to zero probability.
pub fn log_sub_clamped(a: f64, b: f64) -> f64 {
    if b == LOG_ZERO {
        return a;
    }
    if b >= a {
        return LOG_ZERO;
    }
    let d = (-((b - a).exp())).ln_1p();
    if d == LOG_ZERO {
        LOG_ZERO
    } else {
        a + d
    }
}

/// Relative excess of `b` over `a` in the probability domain:
/// `e^(b-a) - 1` when `b > a`, else 0. Used to detect negative results of
/// the log-domain subtraction beyond rounding noise.
pub fn relative_excess(a: f64, b: f64) -> f64 {
    if b <= a || b == LOG_ZERO {
        0.0
    } else if a == LOG_ZERO {
        f64::INFINITY
    } else {
        (b - a).exp() - 1.0
    }
}

/// Shared arithmetic surface for the lattice recursions.
///
/// Values are logs of nonnegative reals. The plain [`F64Arith`] context
/// evaluates immediately; [`crate::tape::Tape`] records the same operations
/// for reverse-mode differentiation, so a single recursion body serves both
/// the value path and the gradient path.
pub trait LogArith {
    type Val: Copy;

    /// Log-zero constant.
    fn zero(&mut self) -> Self::Val;
    /// Product of probabilities (sum of logs).
    fn mul(&mut self, a: Self::Val, b: Self::Val) -> Self::Val;
    /// Sum of two probabilities.
    fn sum2(&mut self, a: Self::Val, b: Self::Val) -> Self::Val;
    /// Sum of three probabilities.
    fn sum3(&mut self, a: Self::Val, b: Self::Val, c: Self::Val) -> Self::Val;
    /// Difference of probabilities, clamped at zero.
    fn sub(&mut self, a: Self::Val, b: Self::Val) -> Self::Val;
    /// Quotient `a / b`; returns zero when `a` is zero regardless of `b`.
    fn div(&mut self, a: Self::Val, b: Self::Val) -> Self::Val;
    /// Current scalar value of `v`.
    fn value(&self, v: Self::Val) -> f64;
    /// Lattice position of the operations that follow; used for diagnostics.
    fn at(&mut self, _frame: usize, _position: usize) {}
}

/// Immediate-mode context over plain `f64` log values.
///
/// Records the worst relative negativity seen by [`LogArith::sub`] so callers
/// can distinguish rounding noise from inconsistent inputs.
#[derive(Debug, Default)]
pub struct F64Arith {
    pub worst_excess: f64,
    pub worst_excess_at: Option<(usize, usize)>,
    pub cursor: Option<(usize, usize)>,
}

impl LogArith for F64Arith {
    type Val = f64;

    fn zero(&mut self) -> f64 {
        LOG_ZERO
    }

    fn mul(&mut self, a: f64, b: f64) -> f64 {
        if a == LOG_ZERO || b == LOG_ZERO {
            LOG_ZERO
        } else {
            a + b
        }
    }

    fn sum2(&mut self, a: f64, b: f64) -> f64 {
        log_add(a, b)
    }

    fn sum3(&mut self, a: f64, b: f64, c: f64) -> f64 {
        log_add3(a, b, c)
    }

    fn sub(&mut self, a: f64, b: f64) -> f64 {
        let excess = relative_excess(a, b);
        if excess > self.worst_excess {
            self.worst_excess = excess;
            self.worst_excess_at = self.cursor;
        }
        log_sub_clamped(a, b)
    }

    fn div(&mut self, a: f64, b: f64) -> f64 {
        if a == LOG_ZERO {
            LOG_ZERO
        } else {
            a - b
        }
    }

    fn value(&self, v: f64) -> f64 {
        v
    }

    fn at(&mut self, frame: usize, position: usize) {
        self.cursor = Some((frame, position));
    }
}
