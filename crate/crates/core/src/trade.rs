//! Separable trades: payment profiles `x` over types that every type weakly
//! prefers in expectation, `(Bx)(s) ≥ x(s)`, and some type strictly prefers.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::ComponentAnalysis;
use crate::interaction;
use crate::linalg;
use crate::spectral::{self, StationaryMethod};

/// Optimal total gain above which a trade is reported.
pub const GAIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct NoTradeResult {
    /// Witness scaled to `‖x‖_∞ = 1`, when a trade exists.
    pub trade: Option<Vec<f64>>,
    /// Optimal value of `Σ_s ((Bx)(s) − x(s))` over `‖x‖_∞ ≤ 1`.
    pub gain: f64,
    /// Largest strict gain `max_s ((Bx)(s) − x(s))` of the witness.
    pub strict_margin: f64,
    /// Whether `B` fails joint connectedness.
    pub reducible: bool,
    /// Whether some type lies outside every closed class.
    pub has_transient: bool,
    /// When `B` is irreducible, its stationary vector: `p(Bx − x) = 0` for every `x`,
    /// so no weakly improving `x` can be strict anywhere.
    pub certificate: Option<Vec<f64>>,
}

/// Maximizes `Σ_s ((Bx)(s) − x(s))` subject to `Bx ≥ x` and `x ∈ [−1, 1]^S`.
pub fn no_trade_test(b: &DMatrix<f64>) -> Result<NoTradeResult> {
    let n = linalg::require_square(b, "interaction structure")?;
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..n)
        .map(|s| {
            let colsum: f64 = b.column(s).sum();
            lp.add_var(colsum - 1.0, (-1.0, 1.0))
        })
        .collect();
    for s in 0..n {
        let expr: Vec<_> = (0..n)
            .filter_map(|u| {
                let coef = b[(s, u)] - if u == s { 1.0 } else { 0.0 };
                (coef != 0.0).then_some((vars[u], coef))
            })
            .collect();
        lp.add_constraint(expr, ComparisonOp::Ge, 0.0);
    }
    let solution = lp.solve().map_err(|e| Error::LinearProgram(e.to_string()))?;
    let gain = solution.objective();

    let ca = ComponentAnalysis::of_matrix(b);
    let reducible = !interaction::joint_connectedness(b).connected;
    let has_transient = !ca.transient_states().is_empty();
    let certificate = if reducible {
        None
    } else {
        Some(spectral::stationary_distribution(b, StationaryMethod::Direct)?.p)
    };

    let (trade, strict_margin) = if gain > GAIN_TOL {
        let x: Vec<f64> = vars.iter().map(|v| *solution.var_value(*v)).collect();
        let scale = linalg::sup_norm(&x);
        let x: Vec<f64> = x.iter().map(|v| v / scale).collect();
        let bx = linalg::mat_vec(b, &x);
        let margin = bx.iter().zip(&x).map(|(a, v)| a - v).fold(f64::NEG_INFINITY, f64::max);
        (Some(x), margin)
    } else {
        (None, 0.0)
    };
    Ok(NoTradeResult {
        trade,
        gain,
        strict_margin,
        reducible,
        has_transient,
        certificate,
    })
}

/// An explicit trade when `B` has transient types: minus the expected time to
/// reach a closed class, scaled into `[−1, 0]`. Each transient type gains exactly
/// one unit (before scaling); recurrent types are unaffected.
pub fn absorption_time_trade(b: &DMatrix<f64>) -> Result<Option<Vec<f64>>> {
    let n = linalg::require_square(b, "interaction structure")?;
    let ca = ComponentAnalysis::of_matrix(b);
    let transient = ca.transient_states();
    if transient.is_empty() {
        return Ok(None);
    }
    let k = transient.len();
    let a = DMatrix::from_fn(k, k, |r, c| {
        let id = if r == c { 1.0 } else { 0.0 };
        id - b[(transient[r], transient[c])]
    });
    let tau = linalg::solve(a, &nalgebra::DVector::from_element(k, 1.0), "solving for absorption times")?;
    let top = tau.max();
    let mut x = vec![0.0; n];
    for (r, &s) in transient.iter().enumerate() {
        x[s] = -tau[r] / top;
    }
    Ok(Some(x))
}
