//! Differentiable Sinkhorn: a fixed, finite number of dual sweeps treated as
//! an ordinary computation graph.
//!
//! The forward pass records the dual potentials after every sweep. The
//! backward pass replays the sweeps in reverse; each log-sum-exp update
//! differentiates into a softmax-weighted redistribution, so the whole thing
//! costs about as much as the forward pass and needs `O(depth * (n1 + n2))`
//! memory for the tape.

use super::{check_problem, dual_update, plan_from_potentials};
use super::{Coupling, DiscreteMeasure, GroundCost, SinkhornConfig, SinkhornSolution};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Recorded potentials from [`sinkhorn_unrolled`].
#[derive(Debug, Clone)]
pub struct SinkhornTape {
    cost: Matrix,
    lambda: f64,
    /// `f_hist[t]` is the row potential after sweep `t+1`.
    f_hist: Vec<Vec<f64>>,
    /// `g_hist[t]` is the column potential after sweep `t`; entry 0 is the
    /// all-zero initialization.
    g_hist: Vec<Vec<f64>>,
    plan: Matrix,
}

impl SinkhornTape {
    pub fn depth(&self) -> usize {
        self.f_hist.len()
    }
}

/// Run exactly `cfg.unroll_depth` complete row+column sweeps, no early stop.
///
/// The fixed depth is what makes the operation differentiable: the output is
/// a smooth function of the cost matrix, and [`sinkhorn_backward`] computes
/// its exact gradient. The solution's `converged` flag still reports whether
/// the achieved marginal error is below `cfg.tolerance`.
pub fn sinkhorn_unrolled(
    cost: &GroundCost,
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    cfg: &SinkhornConfig,
) -> Result<(SinkhornSolution, SinkhornTape)> {
    check_problem(cost, a, b)?;
    if !(cfg.lambda > 0.0) || !cfg.lambda.is_finite() {
        return Err(Error::Contract(format!("lambda must be positive, got {}", cfg.lambda)));
    }
    if cfg.unroll_depth == 0 {
        return Err(Error::Contract("unroll_depth must be at least 1".into()));
    }

    let c = cost.matrix();
    let mut f = vec![0.0; a.len()];
    let mut g = vec![0.0; b.len()];
    let mut f_hist = Vec::with_capacity(cfg.unroll_depth);
    let mut g_hist = Vec::with_capacity(cfg.unroll_depth + 1);
    g_hist.push(g.clone());

    for _ in 0..cfg.unroll_depth {
        dual_update(&mut f, a.weights(), &g, cfg.lambda, c, true);
        dual_update(&mut g, b.weights(), &f, cfg.lambda, c, false);
        if f.iter().chain(&g).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite dual potential in Sinkhorn".into()));
        }
        f_hist.push(f.clone());
        g_hist.push(g.clone());
    }

    let plan = plan_from_potentials(c, &f, &g, cfg.lambda);
    let transport_cost = plan.dot(c);
    let coupling = Coupling::measure(plan.clone(), a, b);
    let converged = coupling.marginal_error() < cfg.tolerance;
    let solution = SinkhornSolution {
        coupling,
        transport_cost,
        iterations: cfg.unroll_depth,
        converged,
    };
    let tape = SinkhornTape { cost: c.clone(), lambda: cfg.lambda, f_hist, g_hist, plan };
    Ok((solution, tape))
}

/// Gradient of a scalar loss with respect to the cost matrix, given the
/// gradient `upstream` with respect to the coupling returned by
/// [`sinkhorn_unrolled`].
pub fn sinkhorn_backward(tape: &SinkhornTape, upstream: &Matrix) -> Result<Matrix> {
    let (n1, n2) = tape.plan.shape();
    if upstream.shape() != (n1, n2) {
        return Err(Error::Shape(format!(
            "upstream gradient is {:?} but the coupling is {n1}x{n2}",
            upstream.shape()
        )));
    }
    if !upstream.all_finite() {
        return Err(Error::Numeric("non-finite upstream gradient".into()));
    }

    let c = &tape.cost;
    let inv = 1.0 / tape.lambda;
    let mut cbar = Matrix::zeros(n1, n2);
    let mut fbar = vec![0.0; n1];
    let mut gbar = vec![0.0; n2];

    // Seed the adjoints from P_ij = exp((f_i + g_j - C_ij)/lambda).
    for i in 0..n1 {
        for j in 0..n2 {
            let t = upstream[(i, j)] * tape.plan[(i, j)] * inv;
            fbar[i] += t;
            gbar[j] += t;
            cbar[(i, j)] = -t;
        }
    }

    let mut scratch = Matrix::zeros(n1, n2);
    for t in (1..=tape.depth()).rev() {
        let f_t = &tape.f_hist[t - 1];
        let g_prev = &tape.g_hist[t - 1];

        // Reverse the column update g_j = lambda*log(b_j) - lambda*LSE_i((f_i - C_ij)/lambda):
        // dg_j/df_i = -w_ij and dg_j/dC_ij = +w_ij with w the column softmax.
        let mut colmax = vec![f64::NEG_INFINITY; n2];
        for i in 0..n1 {
            for (j, m) in colmax.iter_mut().enumerate() {
                let arg = (f_t[i] - c[(i, j)]) * inv;
                if arg > *m {
                    *m = arg;
                }
            }
        }
        let mut colsum = vec![0.0; n2];
        for i in 0..n1 {
            let row = scratch.row_mut(i);
            for (j, s) in row.iter_mut().enumerate() {
                let e = ((f_t[i] - c[(i, j)]) * inv - colmax[j]).exp();
                *s = e;
                colsum[j] += e;
            }
        }
        for i in 0..n1 {
            for j in 0..n2 {
                let w = scratch[(i, j)] / colsum[j];
                cbar[(i, j)] += gbar[j] * w;
                fbar[i] -= gbar[j] * w;
            }
        }

        // Reverse the row update f_i = lambda*log(a_i) - lambda*LSE_j((g_j - C_ij)/lambda):
        // df_i/dg_j = -v_ij and df_i/dC_ij = +v_ij with v the row softmax.
        let mut g_next = vec![0.0; n2];
        for i in 0..n1 {
            let mut rowmax = f64::NEG_INFINITY;
            for j in 0..n2 {
                let arg = (g_prev[j] - c[(i, j)]) * inv;
                if arg > rowmax {
                    rowmax = arg;
                }
            }
            let mut rowsum = 0.0;
            let row = scratch.row_mut(i);
            for (j, s) in row.iter_mut().enumerate() {
                let e = ((g_prev[j] - c[(i, j)]) * inv - rowmax).exp();
                *s = e;
                rowsum += e;
            }
            for j in 0..n2 {
                let v = scratch[(i, j)] / rowsum;
                cbar[(i, j)] += fbar[i] * v;
                g_next[j] -= fbar[i] * v;
            }
        }
        gbar = g_next;
        fbar.iter_mut().for_each(|v| *v = 0.0);
    }

    Ok(cbar)
}
