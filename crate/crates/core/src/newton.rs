//! Layerwise Hessians and the Newton / pseudo-Newton updates.
//!
//! For each layer `p` the two independent Hessians are built from per-sample
//! tables that are filled top-down alongside the deltas:
//!
//! * `γ^(p)` (full `K_p × K_p`) gives `H_ww`,
//! * `θ^(p)` (diagonal) and `ψ^(p)` (full) give `H_w̄w`.
//!
//! The other two Hessians are conjugates: `H_ww̄ = conj(H_w̄w)` and
//! `H_w̄w̄ = conj(H_ww)`, so they are never stored.

use crate::error::{Error, Result};
use crate::grad::{cogradient_conj, delta_hidden, delta_output, DeltaSlice};
use crate::linalg::{elementwise_conj, CMatrix, CVector, Factored, SolverKind, C64};
use crate::network::{Dataset, ForwardTrace, NetworkTopology};

/// `(H_ww, H_w̄w)` for one layer, in flat-index layout: row `(j,i)`, column `(b,a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianPair {
    pub h_ww: CMatrix,
    pub h_wbar_w: CMatrix,
}

impl HessianPair {
    /// `H_ww̄ = conj(H_w̄w)`.
    pub fn h_w_wbar(&self) -> CMatrix {
        self.h_wbar_w.conj()
    }

    /// `H_w̄w̄ = conj(H_ww)`.
    pub fn h_wbar_wbar(&self) -> CMatrix {
        self.h_ww.conj()
    }

    pub fn is_finite(&self) -> bool {
        self.h_ww.is_finite() && self.h_wbar_w.is_finite()
    }
}

/// `γ^(L)_tll = g_L′(conj(y^net_tl))·g_L′(y^net_tl)`, zero off the diagonal.
pub fn gamma_init(topology: &NetworkTopology, trace: &ForwardTrace) -> Vec<CMatrix> {
    let depth = topology.depth();
    let act = topology.activation(depth);
    trace
        .samples()
        .iter()
        .map(|s| {
            let diag: Vec<C64> = s
                .net(depth)
                .iter()
                .map(|z| act.d1(z.conj()) * act.d1(*z))
                .collect();
            CMatrix::from_diagonal(&diag)
        })
        .collect()
}

/// `W` with `W[η][j] = w^(p)_ηj`, the weights feeding layer `p+1` as a matrix.
fn weight_matrix(topology: &NetworkTopology, weights_next: &CVector, p: usize) -> CMatrix {
    let (rows, cols) = (topology.width(p + 1), topology.width(p));
    CMatrix::from_row_major(rows, cols, weights_next.to_vec())
        .expect("weight layer matches topology")
}

/// `γ^(p)_tjb = [Σ_η Σ_β γ^(p+1)_tηβ conj(w^(p)_ηj) w^(p)_βb] · g_p′(conj(net_j)) · g_p′(net_b)`.
pub fn gamma_step(
    topology: &NetworkTopology,
    gamma_next: &[CMatrix],
    weights_next: &CVector,
    trace: &ForwardTrace,
    p: usize,
) -> Vec<CMatrix> {
    let w = weight_matrix(topology, weights_next, p);
    let wh = w.conj_transpose();
    let act = topology.activation(p);
    trace
        .samples()
        .iter()
        .zip(gamma_next)
        .map(|(s, g)| {
            let mut m = wh.mul_mat(&g.mul_mat(&w));
            let net = s.net(p);
            for j in 0..m.rows() {
                let left = act.d1(net[j].conj());
                for b in 0..m.cols() {
                    m[(j, b)] *= left * act.d1(net[b]);
                }
            }
            m
        })
        .collect()
}

/// Diagonal of `θ^(L)`: `(y_tl − d_tl)·g_L″(conj(y^net_tl))`.
pub fn theta_init(
    topology: &NetworkTopology,
    trace: &ForwardTrace,
    dataset: &Dataset,
) -> Vec<CVector> {
    let depth = topology.depth();
    let act = topology.activation(depth);
    trace
        .samples()
        .iter()
        .zip(dataset.samples())
        .map(|(s, d)| {
            s.net(depth)
                .iter()
                .zip(s.output(depth).iter())
                .zip(d.target.iter())
                .map(|((net, y), t)| (y - t) * act.d2(net.conj()))
                .collect()
        })
        .collect()
}

/// Diagonal of `θ^(p)`: `[Σ_η E^(p+1)_tη conj(w^(p)_ηj)] · g_p″(conj(net_j))`.
pub fn theta_step(
    topology: &NetworkTopology,
    delta_next: &DeltaSlice,
    weights_next: &CVector,
    trace: &ForwardTrace,
    p: usize,
) -> Vec<CVector> {
    let width = topology.width(p);
    let width_next = topology.width(p + 1);
    let act = topology.activation(p);
    trace
        .samples()
        .iter()
        .zip(delta_next.rows())
        .map(|(s, e_next)| {
            (0..width)
                .map(|j| {
                    let back: C64 = (0..width_next)
                        .map(|eta| e_next[eta] * weights_next[eta * width + j].conj())
                        .sum();
                    back * act.d2(s.net(p)[j].conj())
                })
                .collect()
        })
        .collect()
}

/// `ψ^(L) = 0`.
pub fn psi_init(topology: &NetworkTopology, trace: &ForwardTrace) -> Vec<CMatrix> {
    let c = topology.outputs();
    vec![CMatrix::zeros(c, c); trace.len()]
}

/// `ψ^(p)_tjb = [Σ_η Σ_β (ψ^(p+1)_tηβ conj(w_βb) + θ^(p+1)_tηβ conj(w_ηb)) conj(w_ηj)]
/// · g_p′(conj(net_j)) · g_p′(conj(net_b))`.
///
/// With `θ` diagonal this is `Wᴴ (Ψ + Θ) W̄`, scaled entrywise.
pub fn psi_step(
    topology: &NetworkTopology,
    psi_next: &[CMatrix],
    theta_next: &[CVector],
    weights_next: &CVector,
    trace: &ForwardTrace,
    p: usize,
) -> Vec<CMatrix> {
    let w = weight_matrix(topology, weights_next, p);
    let wh = w.conj_transpose();
    let wbar = w.conj();
    let act = topology.activation(p);
    trace
        .samples()
        .iter()
        .zip(psi_next.iter().zip(theta_next))
        .map(|(s, (psi, theta))| {
            let mut inner = psi.clone();
            for (k, t) in theta.iter().enumerate() {
                inner[(k, k)] += t;
            }
            let mut m = wh.mul_mat(&inner.mul_mat(&wbar));
            let net = s.net(p);
            for j in 0..m.rows() {
                let left = act.d1(net[j].conj());
                for b in 0..m.cols() {
                    m[(j, b)] *= left * act.d1(net[b].conj());
                }
            }
            m
        })
        .collect()
}

/// Accumulates `(1/N) Σ_t c_t[j][b] · conj(x_ti) · f(x_ta)` into flat layout,
/// skipping off-diagonal blocks when `block_diagonal` is set.
fn assemble<F>(
    topology: &NetworkTopology,
    trace: &ForwardTrace,
    p: usize,
    coeff: impl Fn(usize, usize, usize) -> C64,
    source: F,
    block_diagonal: bool,
) -> CMatrix
where
    F: Fn(C64) -> C64,
{
    let width = topology.width(p);
    let fan_in = topology.width(p - 1);
    let n = topology.layer_len(p);
    let mut h = CMatrix::zeros(n, n);
    for (t, s) in trace.samples().iter().enumerate() {
        let x = s.output(p - 1);
        for j in 0..width {
            for b in 0..width {
                if block_diagonal && j != b {
                    continue;
                }
                let cjb = coeff(t, j, b);
                for i in 0..fan_in {
                    let left = cjb * x[i].conj();
                    for a in 0..fan_in {
                        h[(j * fan_in + i, b * fan_in + a)] += left * source(x[a]);
                    }
                }
            }
        }
    }
    let inv_n = 1.0 / trace.len() as f64;
    for i in 0..n {
        for k in 0..n {
            h[(i, k)] *= inv_n;
        }
    }
    h
}

/// `H_ww[(j,i),(b,a)] = (1/N) Σ_t γ^(p)_tjb · conj(x^(p-1)_ti) · x^(p-1)_ta`.
///
/// For the output layer only the `C` diagonal blocks are filled; the rest is
/// structurally zero.
pub fn assemble_h_ww(
    topology: &NetworkTopology,
    gamma: &[CMatrix],
    trace: &ForwardTrace,
    p: usize,
) -> CMatrix {
    let output = p == topology.depth();
    assemble(
        topology,
        trace,
        p,
        |t, j, b| gamma[t][(j, b)],
        |x| x,
        output,
    )
}

/// `H_w̄w[(j,i),(b,a)] = (1/N) Σ_t (ψ^(p)_tjb + θ^(p)_tjb) · conj(x^(p-1)_ti) · conj(x^(p-1)_ta)`.
pub fn assemble_h_wbar_w(
    topology: &NetworkTopology,
    psi: &[CMatrix],
    theta: &[CVector],
    trace: &ForwardTrace,
    p: usize,
) -> CMatrix {
    let output = p == topology.depth();
    assemble(
        topology,
        trace,
        p,
        |t, j, b| {
            let diag = if j == b {
                theta[t][j]
            } else {
                C64::new(0.0, 0.0)
            };
            psi[t][(j, b)] + diag
        },
        |x| x.conj(),
        output,
    )
}

/// Per-sample curvature tables of one layer.
#[derive(Clone, Debug)]
pub struct Curvature {
    pub gamma: Vec<CMatrix>,
    pub theta: Vec<CVector>,
    pub psi: Vec<CMatrix>,
}

/// Everything backpropagation needs at layer `p`: deltas and, when
/// requested, the curvature tables.
#[derive(Clone, Debug)]
pub struct LayerTables {
    p: usize,
    pub deltas: DeltaSlice,
    pub curvature: Option<Curvature>,
}

impl LayerTables {
    /// Tables for the output layer `L`.
    pub fn output(
        topology: &NetworkTopology,
        trace: &ForwardTrace,
        dataset: &Dataset,
        with_curvature: bool,
    ) -> Self {
        let curvature = with_curvature.then(|| Curvature {
            gamma: gamma_init(topology, trace),
            theta: theta_init(topology, trace, dataset),
            psi: psi_init(topology, trace),
        });
        Self {
            p: topology.depth(),
            deltas: delta_output(topology, trace, dataset),
            curvature,
        }
    }

    /// Tables for layer `p − 1`, given `w^(p-1)` (the weights feeding this
    /// layer) as they stand now.
    pub fn descend(
        &self,
        topology: &NetworkTopology,
        weights_into_self: &CVector,
        trace: &ForwardTrace,
    ) -> Self {
        assert!(self.p > 1, "no layer below the first weight layer");
        let below = self.p - 1;
        let curvature = self.curvature.as_ref().map(|c| Curvature {
            gamma: gamma_step(topology, &c.gamma, weights_into_self, trace, below),
            theta: theta_step(topology, &self.deltas, weights_into_self, trace, below),
            psi: psi_step(topology, &c.psi, &c.theta, weights_into_self, trace, below),
        });
        Self {
            p: below,
            deltas: delta_hidden(topology, &self.deltas, weights_into_self, trace, below),
            curvature,
        }
    }

    pub fn layer(&self) -> usize {
        self.p
    }

    pub fn cogradient(&self, topology: &NetworkTopology, trace: &ForwardTrace) -> CVector {
        cogradient_conj(topology, &self.deltas, trace, self.p)
    }

    pub fn h_ww(&self, topology: &NetworkTopology, trace: &ForwardTrace) -> CMatrix {
        let c = self
            .curvature
            .as_ref()
            .expect("curvature tables were not requested");
        assemble_h_ww(topology, &c.gamma, trace, self.p)
    }

    pub fn hessians(&self, topology: &NetworkTopology, trace: &ForwardTrace) -> HessianPair {
        let c = self
            .curvature
            .as_ref()
            .expect("curvature tables were not requested");
        HessianPair {
            h_ww: assemble_h_ww(topology, &c.gamma, trace, self.p),
            h_wbar_w: assemble_h_wbar_w(topology, &c.psi, &c.theta, trace, self.p),
        }
    }

    /// Multiplies `θ` by `factor`, which is what scaling `g″` would do.
    /// Used to check that the derivative oracle catches a bad second derivative.
    #[doc(hidden)]
    pub fn corrupt_theta(&mut self, factor: f64) {
        if let Some(c) = self.curvature.as_mut() {
            for row in &mut c.theta {
                row.iter_mut().for_each(|v| *v *= factor);
            }
        }
    }
}

fn check_system(pair: &HessianPair, cograd: &CVector) -> Result<()> {
    let n = cograd.len();
    for m in [&pair.h_ww, &pair.h_wbar_w] {
        if m.rows() != n || m.cols() != n {
            return Err(Error::Dimension(format!(
                "{}x{} Hessian for a gradient of length {n}",
                m.rows(),
                m.cols()
            )));
        }
    }
    Ok(())
}

/// Full Newton update with pivoted LU solves.
pub fn newton_update(pair: &HessianPair, cograd_conj: &CVector) -> Result<CVector> {
    newton_update_with(SolverKind::Lu, pair, cograd_conj)
}

/// `Δw = (H_ww − H_w̄w H_w̄w̄⁻¹ H_ww̄)⁻¹ [H_w̄w H_w̄w̄⁻¹ (∂E/∂w̄)* − (∂E/∂w)*]`.
///
/// `H_w̄w̄⁻¹` is applied by solving against `[H_ww̄ | (∂E/∂w̄)*]`; no inverse
/// is formed.
pub fn newton_update_with(
    kind: SolverKind,
    pair: &HessianPair,
    cograd_conj: &CVector,
) -> Result<CVector> {
    check_system(pair, cograd_conj)?;
    let n = cograd_conj.len();
    let h_wbar_wbar = Factored::new(kind, &pair.h_wbar_wbar())?;

    let h_w_wbar = pair.h_w_wbar();
    let cograd_wbar = elementwise_conj(cograd_conj);
    let mut rhs = CMatrix::zeros(n, n + 1);
    for i in 0..n {
        for j in 0..n {
            rhs[(i, j)] = h_w_wbar[(i, j)];
        }
        rhs[(i, n)] = cograd_wbar[i];
    }
    let solved = h_wbar_wbar.solve_mat(&rhs)?;

    let mut x_block = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            x_block[(i, j)] = solved[(i, j)];
        }
    }
    let x_grad = solved.column(n);

    let schur = pair.h_ww.sub(&pair.h_wbar_w.mul_mat(&x_block));
    let b = pair.h_wbar_w.mul_vec(&x_grad).sub(cograd_conj);
    Factored::new(kind, &schur)?.solve_vec(&b)
}

/// Pseudo-Newton update with a pivoted LU solve.
pub fn pseudo_newton_update(h_ww: &CMatrix, cograd_conj: &CVector) -> Result<CVector> {
    pseudo_newton_update_with(SolverKind::Lu, h_ww, cograd_conj)
}

/// `Δw = −H_ww⁻¹ (∂E/∂w)*`.
pub fn pseudo_newton_update_with(
    kind: SolverKind,
    h_ww: &CMatrix,
    cograd_conj: &CVector,
) -> Result<CVector> {
    if h_ww.rows() != cograd_conj.len() {
        return Err(Error::Dimension(format!(
            "{}x{} Hessian for a gradient of length {}",
            h_ww.rows(),
            h_ww.cols(),
            cograd_conj.len()
        )));
    }
    let x = Factored::new(kind, h_ww)?.solve_vec(cograd_conj)?;
    Ok(x.iter().map(|v| -v).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;
    use crate::network::{forward_batch, Sample, WeightSet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn rv(rng: &mut ChaCha8Rng, n: usize) -> CVector {
        (0..n)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    fn instance(
        seed: u64,
        widths: Vec<usize>,
        act: Activation,
        n: usize,
    ) -> (NetworkTopology, WeightSet, Dataset) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let top = NetworkTopology::uniform(widths, act).unwrap();
        let layers = (1..=top.depth())
            .map(|p| rv(&mut rng, top.layer_len(p)))
            .collect();
        let w = WeightSet::from_layers(&top, layers).unwrap();
        let ds = Dataset::new(
            (0..n)
                .map(|_| Sample {
                    input: rv(&mut rng, top.inputs()),
                    target: rv(&mut rng, top.outputs()),
                })
                .collect(),
        )
        .unwrap();
        (top, w, ds)
    }

    fn all_tables(
        top: &NetworkTopology,
        w: &WeightSet,
        ds: &Dataset,
    ) -> (ForwardTrace, Vec<LayerTables>) {
        let trace = forward_batch(top, w, ds);
        let mut tables = vec![LayerTables::output(top, &trace, ds, true)];
        for p in (1..top.depth()).rev() {
            let next = tables.last().unwrap().descend(top, w.layer(p + 1), &trace);
            tables.push(next);
        }
        tables.reverse();
        (trace, tables)
    }

    fn single_neuron() -> (NetworkTopology, WeightSet, Dataset) {
        let top = NetworkTopology::uniform(vec![1, 1], Activation::Identity).unwrap();
        let ds = Dataset::new(vec![Sample {
            input: CVector::from_real(&[1.0]),
            target: CVector::from_real(&[1.0]),
        }])
        .unwrap();
        (top.clone(), WeightSet::zeros(&top), ds)
    }

    #[test]
    fn single_linear_neuron_newton() {
        let (top, w, ds) = single_neuron();
        let (trace, tables) = all_tables(&top, &w, &ds);
        let pair = tables[0].hessians(&top, &trace);
        assert_eq!(pair.h_ww[(0, 0)], c(1.0, 0.0));
        assert_eq!(pair.h_wbar_w[(0, 0)], c(0.0, 0.0));
        let g = tables[0].cogradient(&top, &trace);
        assert_eq!(newton_update(&pair, &g).unwrap().as_ref(), &[c(1.0, 0.0)]);
        assert_eq!(
            pseudo_newton_update(&pair.h_ww, &g).unwrap().as_ref(),
            &[c(1.0, 0.0)]
        );
        let zero = CVector::zeros(1);
        assert!(pseudo_newton_update(&pair.h_ww, &zero).unwrap().is_zero());
    }

    #[test]
    fn gamma_examples() {
        let (top, w, ds) = instance(1, vec![2, 3, 2], Activation::Identity, 3);
        let trace = forward_batch(&top, &w, &ds);
        for g in gamma_init(&top, &trace) {
            assert_eq!(g, CMatrix::identity(2));
        }

        let top_s = NetworkTopology::uniform(vec![1, 1], Activation::Sigmoid).unwrap();
        let ds_s = Dataset::new(vec![Sample {
            input: CVector::from_real(&[1.0]),
            target: CVector::zeros(1),
        }])
        .unwrap();
        let trace_s = forward_batch(&top_s, &WeightSet::zeros(&top_s), &ds_s);
        assert_eq!(gamma_init(&top_s, &trace_s)[0][(0, 0)], c(0.0625, 0.0));

        // w^(p) == 0 annihilates the recursion.
        let g_next = gamma_init(&top, &trace);
        for g in gamma_step(&top, &g_next, &CVector::zeros(6), &trace, 1) {
            assert_eq!(g.max_abs(), 0.0);
        }
    }

    #[test]
    fn one_one_one_identity_gamma() {
        let top = NetworkTopology::uniform(vec![1, 1, 1], Activation::Identity).unwrap();
        let wv = c(0.6, -0.8);
        let w = WeightSet::from_layers(&top, vec![CVector::new(vec![wv]), CVector::new(vec![wv])])
            .unwrap();
        let ds = Dataset::new(vec![Sample {
            input: CVector::from_real(&[0.3]),
            target: CVector::zeros(1),
        }])
        .unwrap();
        let (_, tables) = all_tables(&top, &w, &ds);
        let g1 = tables[0].curvature.as_ref().unwrap().gamma[0][(0, 0)];
        assert!((g1 - c(wv.norm_sqr(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn theta_and_psi_examples() {
        // identity: θ ≡ 0 and ψ ≡ 0 everywhere, so H_w̄w == 0 exactly.
        let (top, w, ds) = instance(2, vec![2, 3, 2], Activation::Identity, 3);
        let (trace, tables) = all_tables(&top, &w, &ds);
        for t in &tables {
            let cv = t.curvature.as_ref().unwrap();
            assert!(cv.theta.iter().all(CVector::is_zero));
            assert!(cv.psi.iter().all(|m| m.max_abs() == 0.0));
            let pair = t.hessians(&top, &trace);
            assert_eq!(pair.h_wbar_w.max_abs(), 0.0);
            let g = t.cogradient(&top, &trace);
            assert_eq!(
                newton_update_with(SolverKind::MinNorm, &pair, &g).unwrap(),
                pseudo_newton_update_with(SolverKind::MinNorm, &pair.h_ww, &g).unwrap()
            );
        }

        // sigmoid output with zero residual: θ^(L) = 0 and H_w̄w^(L) = 0.
        let top_s = NetworkTopology::uniform(vec![2, 1], Activation::Sigmoid).unwrap();
        let w_s =
            WeightSet::from_layers(&top_s, vec![CVector::new(vec![c(0.3, 0.1), c(-0.2, 0.4)])])
                .unwrap();
        let inputs = [c(0.5, 0.5), c(1.0, -0.3)];
        let y = forward(&top_s, &w_s, &inputs);
        let ds_s = Dataset::new(vec![Sample {
            input: CVector::new(inputs.to_vec()),
            target: y,
        }])
        .unwrap();
        let (trace_s, tables_s) = all_tables(&top_s, &w_s, &ds_s);
        assert!(tables_s[0].curvature.as_ref().unwrap().theta[0].is_zero());
        assert_eq!(
            tables_s[0].hessians(&top_s, &trace_s).h_wbar_w.max_abs(),
            0.0
        );

        // sigmoid at net 0: g″(0) = 0 so θ^(L) = 0.5·0 = 0.
        let top_z = NetworkTopology::uniform(vec![1, 1], Activation::Sigmoid).unwrap();
        let ds_z = Dataset::new(vec![Sample {
            input: CVector::from_real(&[1.0]),
            target: CVector::zeros(1),
        }])
        .unwrap();
        let trace_z = forward_batch(&top_z, &WeightSet::zeros(&top_z), &ds_z);
        assert_eq!(theta_init(&top_z, &trace_z, &ds_z)[0][0], c(0.0, 0.0));
    }

    fn forward(top: &NetworkTopology, w: &WeightSet, x: &[C64]) -> CVector {
        crate::network::forward(top, w, x).prediction().clone()
    }

    #[test]
    fn structural_zeros() {
        for act in Activation::ALL {
            let (top, w, ds) = instance(3, vec![2, 3, 2], act, 4);
            let (trace, tables) = all_tables(&top, &w, &ds);
            let out = tables.last().unwrap();
            let cv = out.curvature.as_ref().unwrap();
            assert!(cv.psi.iter().all(|m| m.max_abs() == 0.0));
            for g in &cv.gamma {
                assert_eq!(g[(0, 1)], c(0.0, 0.0));
                assert_eq!(g[(1, 0)], c(0.0, 0.0));
            }
            let pair = out.hessians(&top, &trace);
            let k = top.width(1);
            for r in 0..pair.h_ww.rows() {
                for col in 0..pair.h_ww.cols() {
                    if r / k != col / k {
                        assert_eq!(pair.h_ww[(r, col)], c(0.0, 0.0));
                        assert_eq!(pair.h_wbar_w[(r, col)], c(0.0, 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn h_ww_is_hermitian() {
        for seed in 0..20 {
            for act in [Activation::Sigmoid, Activation::Taylor3] {
                let (top, w, ds) = instance(seed, vec![2, 4, 1], act, 4);
                let (trace, tables) = all_tables(&top, &w, &ds);
                for t in &tables {
                    let pair = t.hessians(&top, &trace);
                    let diff = pair.h_ww.sub(&pair.h_ww.conj_transpose()).max_abs();
                    assert!(diff <= 1e-12 * (1.0 + pair.h_ww.max_abs()));
                    // H_w̄w is complex symmetric (mixed partials commute).
                    let sym = pair.h_wbar_w.sub(&transpose(&pair.h_wbar_w)).max_abs();
                    assert!(sym <= 1e-12 * (1.0 + pair.h_wbar_w.max_abs()));
                }
            }
        }
    }

    fn transpose(m: &CMatrix) -> CMatrix {
        m.conj_transpose().conj()
    }

    #[test]
    fn newton_satisfies_stationarity_of_quadratic_model() {
        // Δ solves H Δ + B conj(Δ) = −G, the stationarity condition of the
        // second-order model E + 2Re(Gᴴ Δ) + Δᴴ H Δ + Re(Δᴴ B conj(Δ)).
        for seed in 0..10 {
            let (top, w, ds) = instance(seed, vec![2, 2], Activation::Taylor3, 5);
            let (trace, tables) = all_tables(&top, &w, &ds);
            let pair = tables[0].hessians(&top, &trace);
            let g = tables[0].cogradient(&top, &trace);
            let dw = newton_update(&pair, &g).unwrap();
            let lhs = pair.h_ww.mul_vec(&dw);
            let cross = pair.h_wbar_w.mul_vec(&dw.conj());
            let residual: CVector = lhs
                .iter()
                .zip(cross.iter())
                .zip(g.iter())
                .map(|((a, b), c)| a + b + c)
                .collect();
            assert!(
                residual.max_abs() < 1e-10,
                "seed {seed}: {}",
                residual.max_abs()
            );
        }
    }

    #[test]
    fn update_shape_errors() {
        let pair = HessianPair {
            h_ww: CMatrix::identity(2),
            h_wbar_w: CMatrix::zeros(2, 2),
        };
        assert!(matches!(
            newton_update(&pair, &CVector::zeros(3)),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            pseudo_newton_update(&pair.h_ww, &CVector::zeros(3)),
            Err(Error::Dimension(_))
        ));
        let singular = HessianPair {
            h_ww: CMatrix::zeros(2, 2),
            h_wbar_w: CMatrix::zeros(2, 2),
        };
        assert!(matches!(
            newton_update(&singular, &CVector::zeros(2)),
            Err(Error::SingularMatrix)
        ));
    }
}
