//! Per-iteration records shared by both solvers.

use serde::{Deserialize, Serialize};

use crate::subproblem::{CubicResiduals, StepMethod};
use crate::Vector;

/// Full-sum quantities at an iterate, computed only when diagnostics are on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactDiagnostics {
    /// `f(x_k)`
    pub f: f64,
    /// `‖∇f(x_k)‖`
    pub grad_norm: f64,
    /// `λ_min(∇²f(x_k))`
    pub lambda_min: f64,
    /// `‖∇f(x_k) − g(x_k)‖`
    pub grad_error: f64,
    /// `‖∇²f(x_k) − B(x_k)‖`
    pub hess_error: f64,
    /// `f(x_k + s_k)`, absent when no step was computed.
    pub f_trial: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// `Δ_k` for the trust-region solver, `σ_k` for the cubic one.
    pub radius: f64,
    pub rho_tilde: f64,
    pub rho: f64,
    pub success: bool,
    pub size_g: usize,
    pub size_b: usize,
    pub size_h: usize,
    pub step_norm: f64,
    pub sampled_grad_norm: f64,
    pub sampled_lambda_min: f64,
    pub sampled_hess_norm: f64,
    /// `h(x_k)` and `h(x_k + s_k)` on the same sample.
    pub h_current: f64,
    pub h_trial: f64,
    /// `m_k(0) − m_k(s_k)` or `p_k(0) − p_k(s_k)`.
    pub model_decrease: f64,
    /// `None` when no step was taken: the convergence test passed (always
    /// the last record of a converged run) or no step could decrease the
    /// model. Such records have `size_h = 0`.
    pub method: Option<StepMethod>,
    /// `S_h = S_g` was used.
    pub shortcut: bool,
    pub fallback: bool,
    pub conditions_ok: Option<[bool; 3]>,
    pub residuals: Option<CubicResiduals>,
    pub theta: Option<f64>,
    pub exact: Option<ExactDiagnostics>,
}

impl IterationRecord {
    pub fn method_str(&self) -> &'static str {
        self.method.map_or("none", StepMethod::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// The sampled optimality certificates held.
    Converged,
    BudgetExhausted,
    /// A non-finite estimate or evaluation stopped the run.
    Aborted(String),
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::BudgetExhausted => "budget_exhausted",
            SolveStatus::Aborted(_) => "aborted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x: Vector,
    pub trace: Vec<IterationRecord>,
    pub status: SolveStatus,
    /// Exact diagnostics at the returned point.
    pub final_exact: Option<ExactDiagnostics>,
}

impl SolveReport {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn successful(&self) -> usize {
        self.trace.iter().filter(|r| r.success).count()
    }

    /// Component evaluations `(f_i, ∇f_i, ∇²f_i)`. Function values are
    /// evaluated at both `x_k` and `x_k + s_k`.
    pub fn oracle_calls(&self) -> (u64, u64, u64) {
        oracle_calls(&self.trace)
    }
}

pub fn oracle_calls(trace: &[IterationRecord]) -> (u64, u64, u64) {
    trace.iter().fold((0, 0, 0), |(f, g, h), r| (f + 2 * r.size_h as u64, g + r.size_g as u64, h + r.size_b as u64))
}
