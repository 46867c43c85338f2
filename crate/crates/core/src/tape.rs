//! Scalar reverse-mode automatic differentiation over log-domain values.
//!
//! The lattice recursions are a straight-line program of log-sum-exp,
//! log-product, and log-difference operations. Recording them on a tape and
//! sweeping adjoints backwards yields exact gradients of any scalar objective
//! with respect to the input logits, without deriving closed-form occupancy
//! expressions for every loss variant.
//!
//! Values carried by [`Var`] nodes are natural logs of nonnegative reals
//! (or plain reals for the logit inputs; the operations are the same).
//! Local partials are computed eagerly during the forward pass. A node whose
//! value underflows to log-zero keeps no parent edges: its probability-domain
//! mass is structurally zero and contributes nothing downstream.

use crate::arith::{log_sub_clamped, LogArith, LOG_ZERO};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(u32);

/// Recording tape. One tape per loss evaluation.
#[derive(Debug, Default)]
pub struct Tape {
    vals: Vec<f64>,
    deps: Vec<(u32, f64)>,
    spans: Vec<(u32, u32)>,
    zero: Option<Var>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    /// Leaf node holding `x`. Gradients are collected at leaves.
    pub fn input(&mut self, x: f64) -> Var {
        self.push(x, &[])
    }

    pub fn value(&self, v: Var) -> f64 {
        self.vals[v.0 as usize]
    }

    fn push(&mut self, val: f64, parents: &[(Var, f64)]) -> Var {
        let start = self.deps.len() as u32;
        self.deps
            .extend(parents.iter().map(|&(Var(p), d)| (p, d)));
        self.spans.push((start, parents.len() as u32));
        self.vals.push(val);
        Var(self.vals.len() as u32 - 1)
    }

    fn zero_var(&mut self) -> Var {
        match self.zero {
            Some(v) => v,
            None => {
                let v = self.push(LOG_ZERO, &[]);
                self.zero = Some(v);
                v
            }
        }
    }

    /// Plain `a + b`: probability-domain product of log values.
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        if va == LOG_ZERO || vb == LOG_ZERO {
            return self.zero_var();
        }
        self.push(va + vb, &[(a, 1.0), (b, 1.0)])
    }

    /// Plain `a - b`: probability-domain quotient, or log-softmax shift.
    /// Returns log-zero (with no parents) when `a` is log-zero.
    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        if va == LOG_ZERO {
            return self.zero_var();
        }
        self.push(va - vb, &[(a, 1.0), (b, -1.0)])
    }

    /// `log(e^a + e^b)`.
    pub fn log_add2(&mut self, a: Var, b: Var) -> Var {
        self.log_sum(&[a, b])
    }

    /// `log(sum_i e^{xs[i]})` with softmax partials.
    pub fn log_sum(&mut self, xs: &[Var]) -> Var {
        let hi = xs
            .iter()
            .map(|&x| self.value(x))
            .fold(LOG_ZERO, f64::max);
        if hi == LOG_ZERO {
            return self.zero_var();
        }
        let sum: f64 = xs.iter().map(|&x| (self.value(x) - hi).exp()).sum();
        let out = hi + sum.ln();
        let parents: Vec<(Var, f64)> = xs
            .iter()
            .map(|&x| (x, (self.value(x) - out).exp()))
            .collect();
        self.push(out, &parents)
    }

    /// `log(sum_i w_i e^{xs[i]})` for fixed nonnegative weights `w`.
    pub fn log_sum_weighted(&mut self, xs: &[Var], ws: &[f64]) -> Var {
        debug_assert_eq!(xs.len(), ws.len());
        let hi = xs
            .iter()
            .zip(ws)
            .filter(|&(_, &w)| w > 0.0)
            .map(|(&x, _)| self.value(x))
            .fold(LOG_ZERO, f64::max);
        if hi == LOG_ZERO {
            return self.zero_var();
        }
        let sum: f64 = xs
            .iter()
            .zip(ws)
            .map(|(&x, &w)| w * (self.value(x) - hi).exp())
            .sum();
        if sum <= 0.0 {
            return self.zero_var();
        }
        let out = hi + sum.ln();
        let parents: Vec<(Var, f64)> = xs
            .iter()
            .zip(ws)
            .map(|(&x, &w)| (x, w * (self.value(x) - out).exp()))
            .collect();
        self.push(out, &parents)
    }

    /// `log(e^a - e^b)`, clamped to log-zero when the difference vanishes.
    pub fn log_sub(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        let out = log_sub_clamped(va, vb);
        if out == LOG_ZERO {
            return self.zero_var();
        }
        let da = (va - out).exp();
        let db = -(vb - out).exp();
        self.push(out, &[(a, da), (b, db)])
    }

    /// Reverse sweep. Seeds adjoints at the given nodes and returns the
    /// adjoint of every node on the tape; index with `Var` positions of the
    /// input leaves to read gradients.
    pub fn gradient(&self, seeds: &[(Var, f64)]) -> Adjoints {
        let mut adj = vec![0.0; self.vals.len()];
        for &(Var(i), s) in seeds {
            adj[i as usize] += s;
        }
        for i in (0..self.vals.len()).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let (start, len) = self.spans[i];
            for k in start..start + len {
                let (p, d) = self.deps[k as usize];
                adj[p as usize] += a * d;
            }
        }
        Adjoints(adj)
    }
}

/// Adjoint of every tape node after a reverse sweep.
pub struct Adjoints(Vec<f64>);

impl Adjoints {
    pub fn get(&self, v: Var) -> f64 {
        self.0[v.0 as usize]
    }
}

impl LogArith for Tape {
    type Val = Var;

    fn zero(&mut self) -> Var {
        self.zero_var()
    }

    fn mul(&mut self, a: Var, b: Var) -> Var {
        self.add(a, b)
    }

    fn sum2(&mut self, a: Var, b: Var) -> Var {
        self.log_add2(a, b)
    }

    fn sum3(&mut self, a: Var, b: Var, c: Var) -> Var {
        self.log_sum(&[a, b, c])
    }

    fn sub(&mut self, a: Var, b: Var) -> Var {
        self.log_sub(a, b)
    }

    fn div(&mut self, a: Var, b: Var) -> Var {
        Tape::sub(self, a, b)
    }

    fn value(&self, v: Var) -> f64 {
        Tape::value(self, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_gradient() {
        // f = a + b in log space is d(f)/da = 1.
        let mut t = Tape::new();
        let a = t.input(-1.0);
        let b = t.input(-2.0);
        let f = t.add(a, b);
        let g = t.gradient(&[(f, 1.0)]);
        assert_eq!(g.get(a), 1.0);
        assert_eq!(g.get(b), 1.0);
    }

    #[test]
    fn log_sum_gradient_is_softmax() {
        let mut t = Tape::new();
        let a = t.input(1.0);
        let b = t.input(0.0);
        let f = t.log_sum(&[a, b]);
        let g = t.gradient(&[(f, 1.0)]);
        let pa = 1.0_f64.exp() / (1.0_f64.exp() + 1.0);
        assert!((g.get(a) - pa).abs() < 1e-14);
        assert!((g.get(b) - (1.0 - pa)).abs() < 1e-14);
    }

    #[test]
    fn log_sub_gradient() {
        // f = log(e^a - e^b); numeric check at a = 0, b = -1.
        let mut t = Tape::new();
        let a = t.input(0.0);
        let b = t.input(-1.0);
        let f = t.log_sub(a, b);
        let g = t.gradient(&[(f, 1.0)]);
        let d = 1.0 - (-1.0_f64).exp();
        assert!((t.value(f) - d.ln()).abs() < 1e-14);
        assert!((g.get(a) - 1.0 / d).abs() < 1e-12);
        assert!((g.get(b) + (-1.0_f64).exp() / d).abs() < 1e-12);
    }

    #[test]
    fn log_zero_nodes_are_inert() {
        let mut t = Tape::new();
        let a = t.input(LOG_ZERO);
        let b = t.input(-0.5);
        let prod = t.add(a, b);
        assert_eq!(t.value(prod), LOG_ZERO);
        let total = t.log_add2(prod, b);
        assert_eq!(t.value(total), -0.5);
        let g = t.gradient(&[(total, 1.0)]);
        assert_eq!(g.get(a), 0.0);
        assert_eq!(g.get(b), 1.0);
        assert!(!g.get(a).is_nan());
    }

    #[test]
    fn weighted_sum_matches_manual() {
        let mut t = Tape::new();
        let xs: Vec<Var> = [-1.0, -2.0, -3.0].iter().map(|&x| t.input(x)).collect();
        let ws = [0.5, 0.25, 1.0];
        let f = t.log_sum_weighted(&xs, &ws);
        let direct: f64 = ws
            .iter()
            .zip([-1.0_f64, -2.0, -3.0])
            .map(|(&w, x)| w * x.exp())
            .sum();
        assert!((t.value(f) - direct.ln()).abs() < 1e-14);
        let g = t.gradient(&[(f, 1.0)]);
        for (i, &x) in xs.iter().enumerate() {
            let expect = ws[i] * (t.value(x).exp()) / direct;
            assert!((g.get(x) - expect).abs() < 1e-13);
        }
    }
}
