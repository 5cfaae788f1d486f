//! Finite-difference Wirtinger derivatives of the error, used to check the
//! analytic backpropagation formulas.
//!
//! Everything here works from `E` alone: the weights of one layer are
//! treated as `2n` real coordinates `(x_1..x_n, y_1..y_n)` with `w = x + iy`,
//! and the complex quantities are recovered from real central differences:
//!
//! * `(∂E/∂w_k)* = ½(∂E/∂x_k + i ∂E/∂y_k)`
//! * `H_ww[r,c] = ¼[(E_{x_c x_r} + E_{y_c y_r}) + i(E_{x_c y_r} − E_{y_c x_r})]`
//! * `H_w̄w[r,c] = ¼[(E_{x_c x_r} − E_{y_c y_r}) + i(E_{x_c y_r} + E_{y_c x_r})]`

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};
use crate::network::{error, forward_batch, Dataset, NetworkTopology, WeightSet};
use crate::newton::{HessianPair, LayerTables};
use crate::par::Exec;
use crate::steplength::curvature_along;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FdConfig {
    pub first_order_step: f64,
    pub second_order_step: f64,
    /// Step for [`fd_directional_curvature`]; larger because Richardson
    /// extrapolation cancels the leading truncation term.
    pub directional_step: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            first_order_step: 1e-5,
            second_order_step: 3e-4,
            directional_step: 1e-2,
        }
    }
}

impl FdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.first_order_step > 0.0
            && self.second_order_step > 0.0
            && self.directional_step > 0.0)
        {
            return Err(Error::Config(
                "finite-difference steps must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Error as a function of the real coordinates of layer `p`.
struct LayerProbe<'a> {
    topology: &'a NetworkTopology,
    weights: &'a WeightSet,
    dataset: &'a Dataset,
    p: usize,
    n: usize,
}

impl<'a> LayerProbe<'a> {
    fn new(
        topology: &'a NetworkTopology,
        weights: &'a WeightSet,
        dataset: &'a Dataset,
        p: usize,
    ) -> Result<Self> {
        if p == 0 || p > topology.depth() {
            return Err(Error::IndexOutOfRange(format!(
                "layer {p} not in 1..={}",
                topology.depth()
            )));
        }
        Ok(Self {
            topology,
            weights,
            dataset,
            p,
            n: topology.layer_len(p),
        })
    }

    /// `E` with the given real coordinate offsets applied.
    fn eval(&self, offsets: &[(usize, f64)]) -> Result<f64> {
        let mut w = self.weights.clone();
        let layer = w.layer_mut(self.p);
        for &(coord, delta) in offsets {
            if coord < self.n {
                layer[coord].re += delta;
            } else {
                layer[coord - self.n].im += delta;
            }
        }
        let e = error(self.topology, &w, self.dataset);
        if e.is_finite() {
            Ok(e)
        } else {
            Err(Error::NonFiniteEvaluation)
        }
    }

    fn real_gradient(&self, h: f64) -> Result<Vec<f64>> {
        Exec::Parallel
            .map(2 * self.n, |k| {
                Ok((self.eval(&[(k, h)])? - self.eval(&[(k, -h)])?) / (2.0 * h))
            })
            .into_iter()
            .collect()
    }

    fn real_hessian(&self, h: f64) -> Result<DMatrix<f64>> {
        let dim = 2 * self.n;
        let center = self.eval(&[])?;
        let rows: Vec<Result<Vec<f64>>> = Exec::Parallel.map(dim, |a| {
            (0..dim)
                .map(|b| {
                    if a == b {
                        Ok(
                            (self.eval(&[(a, h)])? - 2.0 * center + self.eval(&[(a, -h)])?)
                                / (h * h),
                        )
                    } else {
                        let pp = self.eval(&[(a, h), (b, h)])?;
                        let pm = self.eval(&[(a, h), (b, -h)])?;
                        let mp = self.eval(&[(a, -h), (b, h)])?;
                        let mm = self.eval(&[(a, -h), (b, -h)])?;
                        Ok((pp - pm - mp + mm) / (4.0 * h * h))
                    }
                })
                .collect()
        });
        let mut m = DMatrix::zeros(dim, dim);
        for (a, row) in rows.into_iter().enumerate() {
            for (b, v) in row?.into_iter().enumerate() {
                m[(a, b)] = v;
            }
        }
        // Symmetrize away the last bit of difference noise.
        Ok((&m + m.transpose()) * 0.5)
    }
}

/// Central-difference estimate of `(∂E/∂w^(p-1))*`.
pub fn fd_cogradient(
    topology: &NetworkTopology,
    weights: &WeightSet,
    dataset: &Dataset,
    p: usize,
    config: &FdConfig,
) -> Result<CVector> {
    let probe = LayerProbe::new(topology, weights, dataset, p)?;
    let g = probe.real_gradient(config.first_order_step)?;
    let n = probe.n;
    Ok((0..n)
        .map(|k| C64::new(0.5 * g[k], 0.5 * g[n + k]))
        .collect())
}

/// Real Hessian of `E` over `(x, y)` coordinates of layer `p`, `2n × 2n`.
pub fn fd_real_hessian(
    topology: &NetworkTopology,
    weights: &WeightSet,
    dataset: &Dataset,
    p: usize,
    config: &FdConfig,
) -> Result<DMatrix<f64>> {
    LayerProbe::new(topology, weights, dataset, p)?.real_hessian(config.second_order_step)
}

/// Complex Hessian pair recovered from a real Hessian over `(x, y)`.
pub fn hessians_from_real(real: &DMatrix<f64>) -> HessianPair {
    let n = real.nrows() / 2;
    let mut h_ww = CMatrix::zeros(n, n);
    let mut h_wbar_w = CMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let xx = real[(c, r)];
            let yy = real[(n + c, n + r)];
            let xy = real[(c, n + r)];
            let yx = real[(n + c, r)];
            h_ww[(r, c)] = C64::new(0.25 * (xx + yy), 0.25 * (xy - yx));
            h_wbar_w[(r, c)] = C64::new(0.25 * (xx - yy), 0.25 * (xy + yx));
        }
    }
    HessianPair { h_ww, h_wbar_w }
}

/// Real Hessian over `(x, y)` rebuilt from a complex pair; the inverse of
/// [`hessians_from_real`].
pub fn real_from_hessians(pair: &HessianPair) -> DMatrix<f64> {
    let n = pair.h_ww.rows();
    let mut real = DMatrix::zeros(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            let (h, b) = (pair.h_ww[(r, c)], pair.h_wbar_w[(r, c)]);
            real[(c, r)] = 2.0 * (h.re + b.re);
            real[(n + c, n + r)] = 2.0 * (h.re - b.re);
            real[(c, n + r)] = 2.0 * (h.im + b.im);
            real[(n + c, r)] = 2.0 * (b.im - h.im);
        }
    }
    real
}

/// Finite-difference `(H_ww, H_w̄w)` for layer `p`.
pub fn fd_hessians(
    topology: &NetworkTopology,
    weights: &WeightSet,
    dataset: &Dataset,
    p: usize,
    config: &FdConfig,
) -> Result<HessianPair> {
    Ok(hessians_from_real(&fd_real_hessian(
        topology, weights, dataset, p, config,
    )?))
}

/// `2·Re{vᴴ H_ww v + vᴴ H_w̄w conj(v)}`, the real quadratic form written in
/// complex coordinates.
pub fn real_quadratic_form(pair: &HessianPair, v: &CVector) -> f64 {
    2.0 * curvature_along(v, &pair.h_ww, &pair.h_wbar_w)
}

/// `(v_R, v_I)ᵀ H_rr (v_R, v_I)` with `H_rr` the real Hessian.
pub fn real_form_direct(real: &DMatrix<f64>, v: &CVector) -> f64 {
    let n = v.len();
    let u = DVector::from_iterator(2 * n, v.iter().map(|z| z.re).chain(v.iter().map(|z| z.im)));
    (u.transpose() * real * &u)[(0, 0)]
}

/// `d²/dt² E(w + t·v)` at `t = 0` for layer `p`, by central differences
/// with one Richardson extrapolation step. Equals the real quadratic form
/// `(v_R, v_I)ᵀ H_rr (v_R, v_I)` without assembling `H_rr`.
pub fn fd_directional_curvature(
    topology: &NetworkTopology,
    weights: &WeightSet,
    dataset: &Dataset,
    p: usize,
    v: &CVector,
    config: &FdConfig,
) -> Result<f64> {
    let probe = LayerProbe::new(topology, weights, dataset, p)?;
    if v.len() != probe.n {
        return Err(Error::Dimension(format!(
            "direction of length {} for layer {p} with {} weights",
            v.len(),
            probe.n
        )));
    }
    let along = |t: f64| -> Result<f64> {
        let offsets: Vec<(usize, f64)> = v
            .iter()
            .enumerate()
            .flat_map(|(k, z)| [(k, t * z.re), (probe.n + k, t * z.im)])
            .collect();
        probe.eval(&offsets)
    };
    let center = along(0.0)?;
    let second = |h: f64| -> Result<f64> { Ok((along(h)? - 2.0 * center + along(-h)?) / (h * h)) };
    let h = config.directional_step;
    Ok((4.0 * second(0.5 * h)? - second(h)?) / 3.0)
}

/// `Σ_ab |H_ab| |u_a| |u_b|`, an upper bound on the form that does not
/// vanish when the form itself happens to be near zero.
fn form_scale(real: &DMatrix<f64>, v: &CVector) -> f64 {
    let u: Vec<f64> = v
        .iter()
        .map(|z| z.re.abs())
        .chain(v.iter().map(|z| z.im.abs()))
        .collect();
    let mut s = 0.0;
    for (a, ua) in u.iter().enumerate() {
        for (b, ub) in u.iter().enumerate() {
            s += real[(a, b)].abs() * ua * ub;
        }
    }
    s.max(1e-300)
}

/// Newton step computed entirely in real coordinates, mapped back to `Δw`.
/// Returns `None` when the real Hessian is singular.
pub fn fd_real_newton_step(
    topology: &NetworkTopology,
    weights: &WeightSet,
    dataset: &Dataset,
    p: usize,
    config: &FdConfig,
) -> Result<Option<CVector>> {
    let probe = LayerProbe::new(topology, weights, dataset, p)?;
    let grad = DVector::from_vec(probe.real_gradient(config.first_order_step)?);
    let hess = probe.real_hessian(config.second_order_step)?;
    let n = probe.n;
    Ok(hess
        .lu()
        .solve(&(-grad))
        .map(|d| (0..n).map(|k| C64::new(d[k], d[n + k])).collect()))
}

/// `max_k |a_k − r_k| / scale`, with a tiny floor on `scale`.
pub fn scaled_error(a: &[C64], reference: &[C64], scale: f64) -> f64 {
    let diff = a
        .iter()
        .zip(reference)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    diff / scale.max(1e-300)
}

fn max_abs(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Normwise relative error of a vector against a reference.
pub fn vector_rel_error(a: &[C64], reference: &[C64]) -> f64 {
    scaled_error(a, reference, max_abs(reference))
}

/// Relative errors of an analytic Hessian pair against a reference pair.
/// Both matrices are normalized by the largest entry across the reference
/// pair, i.e. by the scale of the underlying real Hessian.
pub fn hessian_rel_errors(analytic: &HessianPair, reference: &HessianPair) -> (f64, f64) {
    let scale = reference.h_ww.max_abs().max(reference.h_wbar_w.max_abs());
    (
        scaled_error(analytic.h_ww.as_slice(), reference.h_ww.as_slice(), scale),
        scaled_error(
            analytic.h_wbar_w.as_slice(),
            reference.h_wbar_w.as_slice(),
            scale,
        ),
    )
}

/// Max relative errors for one layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerCheck {
    pub layer: usize,
    pub cogradient: f64,
    pub h_ww: f64,
    pub h_wbar_w: f64,
    pub quadratic_form: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub widths: Vec<usize>,
    pub activations: Vec<String>,
    pub tolerance: f64,
    pub layers: Vec<LayerCheck>,
    pub passed: bool,
}

/// Analytic cogradients and Hessians of every layer at fixed weights.
pub fn analytic_derivatives(
    topology: &NetworkTopology,
    weights: &WeightSet,
    dataset: &Dataset,
    theta_fault: Option<f64>,
) -> Vec<(CVector, HessianPair)> {
    let trace = forward_batch(topology, weights, dataset);
    let mut tables = LayerTables::output(topology, &trace, dataset, true);
    if let Some(f) = theta_fault {
        tables.corrupt_theta(f);
    }
    let mut out = Vec::with_capacity(topology.depth());
    loop {
        out.push((
            tables.cogradient(topology, &trace),
            tables.hessians(topology, &trace),
        ));
        let p = tables.layer();
        if p == 1 {
            break;
        }
        tables = tables.descend(topology, weights.layer(p), &trace);
        if let Some(f) = theta_fault {
            tables.corrupt_theta(f);
        }
    }
    out.reverse();
    out
}

/// Compares the analytic derivatives of every layer with the oracle.
///
/// The quadratic-form check compares the complex form against a directional
/// finite difference along three pseudo-random directions per layer, drawn
/// from `direction_seed`, normalized by `Σ|H_ab||u_a||u_b|`.
pub fn verify(
    topology: &NetworkTopology,
    weights: &WeightSet,
    dataset: &Dataset,
    config: &FdConfig,
    tolerance: f64,
    direction_seed: u64,
    theta_fault: Option<f64>,
) -> Result<VerifyReport> {
    config.validate()?;
    dataset.check_against(topology)?;
    let analytic = analytic_derivatives(topology, weights, dataset, theta_fault);
    let mut rng = ChaCha8Rng::seed_from_u64(direction_seed);
    let mut layers = Vec::with_capacity(topology.depth());
    for (k, (grad, pair)) in analytic.iter().enumerate() {
        let p = k + 1;
        let fd_grad = fd_cogradient(topology, weights, dataset, p, config)?;
        let real = fd_real_hessian(topology, weights, dataset, p, config)?;
        let fd_pair = hessians_from_real(&real);
        let (e_ww, e_wbar_w) = hessian_rel_errors(pair, &fd_pair);
        let mut qf = 0.0f64;
        for _ in 0..3 {
            let v: CVector = (0..grad.len())
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let lhs = real_quadratic_form(pair, &v);
            let rhs = fd_directional_curvature(topology, weights, dataset, p, &v, config)?;
            qf = qf.max((lhs - rhs).abs() / form_scale(&real, &v));
        }
        layers.push(LayerCheck {
            layer: p,
            cogradient: vector_rel_error(grad, &fd_grad),
            h_ww: e_ww,
            h_wbar_w: e_wbar_w,
            quadratic_form: qf,
        });
    }
    let passed = layers.iter().all(|l| {
        [l.cogradient, l.h_ww, l.h_wbar_w, l.quadratic_form]
            .iter()
            .all(|e| *e <= tolerance)
    });
    Ok(VerifyReport {
        widths: topology.widths().to_vec(),
        activations: topology
            .activations()
            .iter()
            .map(|a| a.name().to_string())
            .collect(),
        tolerance,
        layers,
        passed,
    })
}
