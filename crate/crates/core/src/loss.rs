//! Per-sample losses, the weight-decay penalty, and their derivatives with
//! respect to the output unit's pre-activation. The squared hinge operates
//! on the raw (pre-sigmoid) score; the other losses consume the activated
//! output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Activation, ForwardTrace, Network, RegKind};

/// Probabilities are clamped to [CLAMP, 1-CLAMP] inside the cross-entropy so
/// saturated sigmoids cannot produce infinite losses.
pub const PROBABILITY_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Binary cross-entropy on the activated output.
    Bce,
    /// Squared error on the activated output.
    Mse,
    /// max(0, 1 - y*f)^2 on the pre-sigmoid score f, with targets {0,1}
    /// mapped to {-1,+1}.
    SquaredHinge,
}

impl LossKind {
    /// Which value of the forward pass this loss consumes.
    pub fn prediction(self, trace: &ForwardTrace) -> f64 {
        match self {
            LossKind::SquaredHinge => trace.output_pre,
            _ => trace.output,
        }
    }
}

/// Per-sample data loss. `prediction` is the activated output for `Bce` and
/// `Mse`, and the raw pre-sigmoid score for `SquaredHinge`.
pub fn loss(kind: LossKind, prediction: f64, target: f64) -> f64 {
    match kind {
        LossKind::Bce => {
            let p = prediction.clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP);
            -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
        }
        LossKind::Mse => {
            let d = prediction - target;
            d * d
        }
        LossKind::SquaredHinge => {
            let y = 2.0 * target - 1.0;
            let margin = (1.0 - y * prediction).max(0.0);
            margin * margin
        }
    }
}

/// d(loss)/d(output pre-activation) for one traced forward pass. Matches the
/// exact computed loss, including the cross-entropy clamp (a saturated
/// probability contributes zero gradient because the clamp is flat there).
pub fn loss_grad_output_pre(
    kind: LossKind,
    trace: &ForwardTrace,
    output_activation: Activation,
    target: f64,
) -> f64 {
    match kind {
        LossKind::Bce => {
            let p = trace.output;
            if p <= PROBABILITY_CLAMP || p >= 1.0 - PROBABILITY_CLAMP {
                return 0.0;
            }
            let dl_dp = -target / p + (1.0 - target) / (1.0 - p);
            dl_dp * output_activation.derivative(trace.output_pre, p)
        }
        LossKind::Mse => {
            2.0 * (trace.output - target)
                * output_activation.derivative(trace.output_pre, trace.output)
        }
        LossKind::SquaredHinge => {
            let y = 2.0 * target - 1.0;
            let margin = 1.0 - y * trace.output_pre;
            if margin > 0.0 {
                -2.0 * y * margin
            } else {
                0.0
            }
        }
    }
}

/// Weight-decay penalty over all weight matrices (biases excluded):
/// `lambda * sum |w|` for L1, `lambda * sum w^2` for L2.
pub fn regularization_penalty(net: &Network) -> f64 {
    let reg = net.spec.regularization;
    if reg.kind == RegKind::None || reg.lambda == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (i, info) in net.block_layout().iter().enumerate() {
        if info.is_bias {
            continue;
        }
        for w in net.block(i) {
            acc += match reg.kind {
                RegKind::L1 => w.abs(),
                RegKind::L2 => w * w,
                RegKind::None => unreachable!(),
            };
        }
    }
    reg.lambda * acc
}

/// Subgradient of the penalty for one weight; the L1 subgradient at exactly
/// zero is taken as zero.
pub fn regularization_grad(kind: RegKind, lambda: f64, w: f64) -> f64 {
    match kind {
        RegKind::None => 0.0,
        RegKind::L1 => {
            if w > 0.0 {
                lambda
            } else if w < 0.0 {
                -lambda
            } else {
                0.0
            }
        }
        RegKind::L2 => 2.0 * lambda * w,
    }
}

/// Validate a target for the given loss: classification losses need binary
/// labels, the squared error needs a finite target.
pub fn validate_target(kind: LossKind, target: f64) -> Result<()> {
    match kind {
        LossKind::Bce | LossKind::SquaredHinge => {
            if target == 0.0 || target == 1.0 {
                Ok(())
            } else {
                Err(Error::data(format!(
                    "classification target must be 0 or 1, got {target}"
                )))
            }
        }
        LossKind::Mse => {
            if target.is_finite() {
                Ok(())
            } else {
                Err(Error::data(format!("regression target must be finite, got {target}")))
            }
        }
    }
}
