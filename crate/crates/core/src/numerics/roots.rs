//! Safeguarded Newton iteration for monotone scalar equations.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-14, max_iter: 100 }
    }
}

/// Solves `g(x) = 0` for an increasing `g` bracketed by `[lo, hi]`.
///
/// `g` returns the value and derivative. Newton steps that leave the current
/// bracket are replaced by bisection; the bracket shrinks with every sign
/// evaluation.
pub fn newton_bracketed<G>(g: G, x0: f64, mut lo: f64, mut hi: f64, opts: NewtonOptions) -> Result<f64>
where
    G: Fn(f64) -> (f64, f64),
{
    let mut x = x0.clamp(lo, hi);
    for _ in 0..opts.max_iter {
        let (v, d) = g(x);
        if v == 0.0 {
            return Ok(x);
        }
        if v < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - v / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= opts.rel_tol * next.abs() {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Convergence(format!("no convergence after {} iterations (bracket [{lo:e}, {hi:e}])", opts.max_iter)))
}
