//! One-step Newton steplength and underrelaxed weight updates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};
use crate::network::WeightSet;

/// Denominators smaller than this in magnitude make the steplength undefined.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    #[default]
    OneStepNewton,
    Constant,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepConfig {
    pub mode: StepMode,
    pub omega: f64,
    #[serde(rename = "mu")]
    pub constant_mu: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            mode: StepMode::OneStepNewton,
            omega: 0.5,
            constant_mu: 1.0,
        }
    }
}

impl StepConfig {
    pub fn constant(mu: f64) -> Self {
        Self {
            mode: StepMode::Constant,
            omega: 1.0,
            constant_mu: mu,
        }
    }

    pub fn one_step(omega: f64) -> Self {
        Self {
            mode: StepMode::OneStepNewton,
            omega,
            constant_mu: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(Error::Config(format!(
                "omega must lie in (0, 2), got {}",
                self.omega
            )));
        }
        if !(self.constant_mu > 0.0 && self.constant_mu.is_finite()) {
            return Err(Error::Config(format!(
                "mu must be positive, got {}",
                self.constant_mu
            )));
        }
        Ok(())
    }
}

/// `μ = −Re(∂E/∂w · Δw) / Re{Δwᴴ H_ww Δw + Δwᴴ H_w̄w conj(Δw)}`.
///
/// `∂E/∂w` is the conjugate transpose of `cograd_conj`, so the numerator is
/// `−Re(cograd_conjᴴ · Δw)`. Negative or huge values are returned as-is.
pub fn one_step_mu(
    cograd_conj: &CVector,
    dw: &CVector,
    h_ww: &CMatrix,
    h_wbar_w: &CMatrix,
) -> Result<f64> {
    let n = dw.len();
    if cograd_conj.len() != n
        || h_ww.rows() != n
        || h_ww.cols() != n
        || h_wbar_w.rows() != n
        || h_wbar_w.cols() != n
    {
        return Err(Error::Dimension(format!(
            "steplength inputs disagree: gradient {}, direction {n}, Hessians {}x{} and {}x{}",
            cograd_conj.len(),
            h_ww.rows(),
            h_ww.cols(),
            h_wbar_w.rows(),
            h_wbar_w.cols()
        )));
    }
    let numerator = -cograd_conj.dot_h(dw).re;
    let denominator = curvature_along(dw, h_ww, h_wbar_w);
    if !(denominator.abs() >= DEGENERATE_DENOMINATOR) {
        return Err(Error::DegenerateStep(denominator));
    }
    Ok(numerator / denominator)
}

/// `Re{vᴴ H_ww v + vᴴ H_w̄w conj(v)}`: half the real second directional derivative.
pub fn curvature_along(v: &CVector, h_ww: &CMatrix, h_wbar_w: &CMatrix) -> f64 {
    let vbar = v.conj();
    (h_ww.sesquilinear(v, v) + h_wbar_w.sesquilinear(v, &vbar)).re
}

/// `w^(p-1) ← w^(p-1) + ω·μ·Δw`.
pub fn apply_update(
    weights: &mut WeightSet,
    p: usize,
    dw: &CVector,
    mu: f64,
    omega: f64,
) -> Result<()> {
    let layer = weights.layer_mut(p);
    if layer.len() != dw.len() {
        return Err(Error::Dimension(format!(
            "update of length {} for layer {p} with {} weights",
            dw.len(),
            layer.len()
        )));
    }
    layer.add_scaled(C64::new(omega * mu, 0.0), dw);
    Ok(())
}
