//! Gradient-descent backpropagation: the `E^(p)` delta recursion and the
//! conjugate cogradient `(∂E/∂w^(p-1))*`.

use crate::linalg::{CVector, C64};
use crate::network::{forward_batch, Dataset, ForwardTrace, NetworkTopology, WeightSet};

/// `E^(p)_tj` for one layer `p`, one row per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaSlice {
    rows: Vec<CVector>,
}

impl DeltaSlice {
    pub fn rows(&self) -> &[CVector] {
        &self.rows
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(CVector::is_zero)
    }
}

/// Deltas for every layer at one fixed set of weights.
#[derive(Clone, Debug)]
pub struct DeltaTable {
    layers: Vec<DeltaSlice>,
}

impl DeltaTable {
    pub fn compute(
        topology: &NetworkTopology,
        weights: &WeightSet,
        trace: &ForwardTrace,
        dataset: &Dataset,
    ) -> Self {
        let depth = topology.depth();
        let mut layers = vec![delta_output(topology, trace, dataset)];
        for p in (1..depth).rev() {
            let next = layers.last().expect("output deltas present");
            layers.push(delta_hidden(topology, next, weights.layer(p + 1), trace, p));
        }
        layers.reverse();
        Self { layers }
    }

    /// Deltas of layer `p` in `1..=L`.
    pub fn layer(&self, p: usize) -> &DeltaSlice {
        &self.layers[p - 1]
    }
}

/// `E^(L)_tl = (y_tl − d_tl) · g_L′(conj(y^net_tl))`.
pub fn delta_output(
    topology: &NetworkTopology,
    trace: &ForwardTrace,
    dataset: &Dataset,
) -> DeltaSlice {
    let depth = topology.depth();
    let act = topology.activation(depth);
    let rows = trace
        .samples()
        .iter()
        .zip(dataset.samples())
        .map(|(s, d)| {
            s.net(depth)
                .iter()
                .zip(s.output(depth).iter())
                .zip(d.target.iter())
                .map(|((net, y), t)| (y - t) * act.d1(net.conj()))
                .collect()
        })
        .collect();
    DeltaSlice { rows }
}

/// `E^(p)_tj = [Σ_α E^(p+1)_tα · conj(w^(p)_αj)] · g_p′(conj(net^(p)_tj))`.
///
/// `weights_next` is `w^(p)`, the weights feeding layer `p+1`, as they stand
/// at call time.
pub fn delta_hidden(
    topology: &NetworkTopology,
    next: &DeltaSlice,
    weights_next: &CVector,
    trace: &ForwardTrace,
    p: usize,
) -> DeltaSlice {
    let width = topology.width(p);
    let width_next = topology.width(p + 1);
    let act = topology.activation(p);
    let rows = trace
        .samples()
        .iter()
        .zip(&next.rows)
        .map(|(s, e_next)| {
            (0..width)
                .map(|j| {
                    let back: C64 = (0..width_next)
                        .map(|alpha| e_next[alpha] * weights_next[alpha * width + j].conj())
                        .sum();
                    back * act.d1(s.net(p)[j].conj())
                })
                .collect()
        })
        .collect();
    DeltaSlice { rows }
}

/// `(∂E/∂w^(p-1)_ji)* = (1/N) Σ_t E^(p)_tj · conj(x^(p-1)_ti)` in flat layout.
pub fn cogradient_conj(
    topology: &NetworkTopology,
    deltas: &DeltaSlice,
    trace: &ForwardTrace,
    p: usize,
) -> CVector {
    let fan_in = topology.width(p - 1);
    let mut grad = CVector::zeros(topology.layer_len(p));
    for (s, e) in trace.samples().iter().zip(&deltas.rows) {
        let x = s.output(p - 1);
        for (j, ej) in e.iter().enumerate() {
            for (i, xi) in x.iter().enumerate() {
                grad[j * fan_in + i] += ej * xi.conj();
            }
        }
    }
    let n = trace.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    grad
}

/// Steepest-descent direction `Δw = −(∂E/∂w)*`.
pub fn gd_update(cogradient_conj: &CVector) -> CVector {
    cogradient_conj.iter().map(|g| -g).collect()
}

/// Conjugate cogradients of every layer at fixed weights (no interleaved updates).
pub fn cogradients(
    topology: &NetworkTopology,
    weights: &WeightSet,
    dataset: &Dataset,
) -> Vec<CVector> {
    let trace = forward_batch(topology, weights, dataset);
    let table = DeltaTable::compute(topology, weights, &trace, dataset);
    (1..=topology.depth())
        .map(|p| cogradient_conj(topology, table.layer(p), &trace, p))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;
    use crate::network::{error, Sample};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn single_neuron() -> (NetworkTopology, WeightSet, Dataset) {
        let top = NetworkTopology::uniform(vec![1, 1], Activation::Identity).unwrap();
        let w = WeightSet::zeros(&top);
        let ds = Dataset::new(vec![Sample {
            input: CVector::from_real(&[1.0]),
            target: CVector::from_real(&[1.0]),
        }])
        .unwrap();
        (top, w, ds)
    }

    #[test]
    fn single_linear_neuron() {
        let (top, w, ds) = single_neuron();
        let trace = forward_batch(&top, &w, &ds);
        let d = delta_output(&top, &trace, &ds);
        assert_eq!(d.rows()[0].as_ref(), &[c(-1.0, 0.0)]);
        let g = cogradient_conj(&top, &d, &trace, 1);
        assert_eq!(g.as_ref(), &[c(-1.0, 0.0)]);
        let dw = gd_update(&g);
        assert_eq!(dw.as_ref(), &[c(1.0, 0.0)]);

        let mut w1 = w.clone();
        w1.layer_mut(1).add_scaled(c(1.0, 0.0), &dw);
        assert_eq!(w1.layer(1)[0], c(1.0, 0.0));
        assert_eq!(error(&top, &w, &ds), 1.0);
        assert_eq!(error(&top, &w1, &ds), 0.0);
    }

    #[test]
    fn sigmoid_output_delta_at_zero_net() {
        let top = NetworkTopology::uniform(vec![1, 1], Activation::Sigmoid).unwrap();
        let ds = Dataset::new(vec![Sample {
            input: CVector::from_real(&[1.0]),
            target: CVector::from_real(&[0.0]),
        }])
        .unwrap();
        let trace = forward_batch(&top, &WeightSet::zeros(&top), &ds);
        assert_eq!(delta_output(&top, &trace, &ds).rows()[0][0], c(0.125, 0.0));
    }

    #[test]
    fn zero_residual_and_zero_propagation() {
        let top = NetworkTopology::uniform(vec![1, 2, 1], Activation::Identity).unwrap();
        let w = WeightSet::from_layers(
            &top,
            vec![
                CVector::from_real(&[1.0, 2.0]),
                CVector::from_real(&[0.5, 0.25]),
            ],
        )
        .unwrap();
        // target equals the prediction 1·0.5 + 2·0.25 = 1.
        let ds = Dataset::new(vec![Sample {
            input: CVector::from_real(&[1.0]),
            target: CVector::from_real(&[1.0]),
        }])
        .unwrap();
        let trace = forward_batch(&top, &w, &ds);
        let table = DeltaTable::compute(&top, &w, &trace, &ds);
        assert!(table.layer(2).is_zero());
        assert!(table.layer(1).is_zero());
        for g in cogradients(&top, &w, &ds) {
            assert!(g.is_zero());
        }

        // Disconnected output layer: hidden deltas vanish even with a nonzero residual.
        let w0 = WeightSet::from_layers(
            &top,
            vec![CVector::from_real(&[1.0, 2.0]), CVector::zeros(2)],
        )
        .unwrap();
        let trace = forward_batch(&top, &w0, &ds);
        let out = delta_output(&top, &trace, &ds);
        assert!(!out.is_zero());
        assert!(delta_hidden(&top, &out, w0.layer(2), &trace, 1).is_zero());
    }

    #[test]
    fn two_two_one_identity_matches_hand_expansion() {
        // y = Σ_j v_j (Σ_i u_ji z_i),  E = |y − d|²  (N = 1)
        // E^(2) = y − d,  E^(1)_j = (y − d)·conj(v_j),  (∂E/∂u_ji)* = (y − d)·conj(v_j)·conj(z_i).
        let top = NetworkTopology::uniform(vec![2, 2, 1], Activation::Identity).unwrap();
        let u = vec![c(0.5, 0.1), c(-0.2, 0.3), c(0.7, -0.4), c(0.05, 0.9)];
        let v = vec![c(1.1, -0.6), c(-0.3, 0.2)];
        let z = [c(0.4, -0.8), c(-1.0, 0.25)];
        let d = c(0.3, 0.6);
        let w =
            WeightSet::from_layers(&top, vec![CVector::new(u.clone()), CVector::new(v.clone())])
                .unwrap();
        let ds = Dataset::new(vec![Sample {
            input: CVector::new(z.to_vec()),
            target: CVector::new(vec![d]),
        }])
        .unwrap();

        let h = [u[0] * z[0] + u[1] * z[1], u[2] * z[0] + u[3] * z[1]];
        let y = v[0] * h[0] + v[1] * h[1];
        let r = y - d;

        let grads = cogradients(&top, &w, &ds);
        let expect_out = [r * h[0].conj(), r * h[1].conj()];
        for (a, b) in grads[1].iter().zip(expect_out.iter()) {
            assert!((a - b).norm() < 1e-15);
        }
        for j in 0..2 {
            for i in 0..2 {
                let expect = r * v[j].conj() * z[i].conj();
                assert!((grads[0][j * 2 + i] - expect).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn conjugating_everything_conjugates_the_cogradient() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let mut rv = |n: usize| -> CVector {
            (0..n)
                .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect()
        };
        for act in Activation::ALL {
            let top = NetworkTopology::uniform(vec![3, 2, 2], act).unwrap();
            let w = WeightSet::from_layers(&top, vec![rv(6), rv(4)]).unwrap();
            let ds = Dataset::new(
                (0..3)
                    .map(|_| Sample {
                        input: rv(3),
                        target: rv(2),
                    })
                    .collect(),
            )
            .unwrap();
            let g = cogradients(&top, &w, &ds);
            let gc = cogradients(&top, &w.conj(), &ds.conj());
            for (a, b) in g.iter().zip(&gc) {
                assert!(a.conj().sub(b).max_abs() <= 1e-14, "{act}");
            }
        }
    }
}
