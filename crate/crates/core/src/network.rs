//! Network topology, weight layout, forward propagation and the
//! sum-of-squares error.
//!
//! Layers are numbered the usual way: layer 0 is the input, layer `L` the
//! output. The weights feeding layer `p` form the vector `w^(p-1)`, and
//! `w^(p-1)_{ji}` (target `j`, source `i`, both 1-based) lives at flat
//! position `(j-1)·K_{p-1} + i`. Internally everything is 0-based, so that
//! becomes `j·K_{p-1} + i`.

use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::linalg::{CVector, C64};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkTopology {
    widths: Vec<usize>,
    activations: Vec<Activation>,
}

impl NetworkTopology {
    pub fn new(widths: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Config(format!(
                "a network needs at least an input and an output layer, got widths {widths:?}"
            )));
        }
        if widths.contains(&0) {
            return Err(Error::Config(format!(
                "layer widths must be positive, got {widths:?}"
            )));
        }
        if activations.len() != widths.len() - 1 {
            return Err(Error::Config(format!(
                "{} activations given for {} non-input layers",
                activations.len(),
                widths.len() - 1
            )));
        }
        Ok(Self {
            widths,
            activations,
        })
    }

    /// Same activation on every non-input layer.
    pub fn uniform(widths: Vec<usize>, activation: Activation) -> Result<Self> {
        let n = widths.len().saturating_sub(1);
        Self::new(widths, vec![activation; n])
    }

    /// Number of weight layers `L`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    /// `K_p` for `p` in `0..=L`.
    pub fn width(&self, p: usize) -> usize {
        self.widths[p]
    }

    pub fn inputs(&self) -> usize {
        self.widths[0]
    }

    pub fn outputs(&self) -> usize {
        self.widths[self.depth()]
    }

    /// Activation of layer `p` in `1..=L`.
    pub fn activation(&self, p: usize) -> Activation {
        self.activations[p - 1]
    }

    /// Length of `w^(p-1)`, i.e. `K_p · K_{p-1}`.
    pub fn layer_len(&self, p: usize) -> usize {
        self.widths[p] * self.widths[p - 1]
    }

    pub fn weight_count(&self) -> usize {
        (1..=self.depth()).map(|p| self.layer_len(p)).sum()
    }

    /// 1-based flat position of `w^(p-1)_{ji}` with 1-based `j` and `i`.
    pub fn flat_index(&self, p: usize, j: usize, i: usize) -> Result<usize> {
        if p == 0 || p > self.depth() {
            return Err(Error::IndexOutOfRange(format!(
                "layer {p} not in 1..={}",
                self.depth()
            )));
        }
        let (rows, cols) = (self.widths[p], self.widths[p - 1]);
        if j == 0 || j > rows || i == 0 || i > cols {
            return Err(Error::IndexOutOfRange(format!(
                "(j={j}, i={i}) outside {rows}x{cols} for layer {p}"
            )));
        }
        Ok((j - 1) * cols + i)
    }

    /// Short label for reports: the activation name when all layers agree,
    /// otherwise the names joined by `+`.
    pub fn activation_label(&self) -> String {
        let first = self.activations[0];
        if self.activations.iter().all(|&a| a == first) {
            first.name().to_string()
        } else {
            self.activations
                .iter()
                .map(|a| a.name())
                .collect::<Vec<_>>()
                .join("+")
        }
    }
}

/// Weight vectors `w^(0), …, w^(L-1)` in flat layout.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSet {
    layers: Vec<CVector>,
}

impl WeightSet {
    pub fn zeros(topology: &NetworkTopology) -> Self {
        Self {
            layers: (1..=topology.depth())
                .map(|p| CVector::zeros(topology.layer_len(p)))
                .collect(),
        }
    }

    pub fn from_layers(topology: &NetworkTopology, layers: Vec<CVector>) -> Result<Self> {
        if layers.len() != topology.depth() {
            return Err(Error::Dimension(format!(
                "{} weight layers for a depth-{} network",
                layers.len(),
                topology.depth()
            )));
        }
        for (k, layer) in layers.iter().enumerate() {
            let expected = topology.layer_len(k + 1);
            if layer.len() != expected {
                return Err(Error::Dimension(format!(
                    "weight layer {} has {} entries, expected {expected}",
                    k + 1,
                    layer.len()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// `w^(p-1)`, the weights feeding layer `p` in `1..=L`.
    pub fn layer(&self, p: usize) -> &CVector {
        &self.layers[p - 1]
    }

    pub fn layer_mut(&mut self, p: usize) -> &mut CVector {
        &mut self.layers[p - 1]
    }

    pub fn layers(&self) -> &[CVector] {
        &self.layers
    }

    /// All layers concatenated, first layer first.
    pub fn flatten(&self) -> CVector {
        self.layers.iter().flat_map(|l| l.iter().copied()).collect()
    }

    pub fn conj(&self) -> Self {
        Self {
            layers: self.layers.iter().map(CVector::conj).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(CVector::is_finite)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    pub input: CVector,
    pub target: CVector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Config("dataset has no samples".into()))?;
        let (m, c) = (first.input.len(), first.target.len());
        for (t, s) in samples.iter().enumerate() {
            if s.input.len() != m || s.target.len() != c {
                return Err(Error::Dimension(format!(
                    "sample {t} has shape ({}, {}), expected ({m}, {c})",
                    s.input.len(),
                    s.target.len()
                )));
            }
        }
        Ok(Self { samples })
    }

    /// The four-pattern XOR table with real targets {0, 1, 1, 0}.
    pub fn xor() -> Self {
        let rows = [
            ([0.0, 0.0], 0.0),
            ([1.0, 0.0], 1.0),
            ([0.0, 1.0], 1.0),
            ([1.0, 1.0], 0.0),
        ];
        let samples = rows
            .iter()
            .map(|(x, d)| Sample {
                input: CVector::from_real(x),
                target: CVector::from_real(&[*d]),
            })
            .collect();
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn input_len(&self) -> usize {
        self.samples[0].input.len()
    }

    pub fn target_len(&self) -> usize {
        self.samples[0].target.len()
    }

    pub fn check_against(&self, topology: &NetworkTopology) -> Result<()> {
        if self.input_len() != topology.inputs() || self.target_len() != topology.outputs() {
            return Err(Error::Dimension(format!(
                "dataset shape ({}, {}) does not fit topology {:?}",
                self.input_len(),
                self.target_len(),
                topology.widths()
            )));
        }
        Ok(())
    }

    pub fn conj(&self) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .map(|s| Sample {
                    input: s.input.conj(),
                    target: s.target.conj(),
                })
                .collect(),
        }
    }
}

/// Net sums and outputs of every layer for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleTrace {
    nets: Vec<CVector>,
    outputs: Vec<CVector>,
}

impl SampleTrace {
    /// `(x^(p))^net` for `p` in `1..=L`.
    pub fn net(&self, p: usize) -> &CVector {
        &self.nets[p]
    }

    /// `x^(p)` for `p` in `0..=L`; layer 0 is the input.
    pub fn output(&self, p: usize) -> &CVector {
        &self.outputs[p]
    }

    pub fn prediction(&self) -> &CVector {
        self.outputs.last().expect("trace has an output layer")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    samples: Vec<SampleTrace>,
}

impl ForwardTrace {
    pub fn samples(&self) -> &[SampleTrace] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.samples
            .iter()
            .all(|s| s.outputs.iter().chain(&s.nets).all(CVector::is_finite))
    }

    /// Smallest distance from any net sum to a pole of its layer's activation.
    pub fn min_pole_distance(&self, topology: &NetworkTopology) -> f64 {
        let mut best = f64::INFINITY;
        for s in &self.samples {
            for p in 1..=topology.depth() {
                let act = topology.activation(p);
                for z in s.net(p).iter() {
                    best = best.min(act.pole_distance(*z));
                }
            }
        }
        best
    }
}

/// Propagates one input through the network. There are no bias terms.
pub fn forward(topology: &NetworkTopology, weights: &WeightSet, input: &[C64]) -> SampleTrace {
    assert_eq!(
        input.len(),
        topology.inputs(),
        "input length does not match topology"
    );
    let depth = topology.depth();
    let mut nets = Vec::with_capacity(depth + 1);
    let mut outputs = Vec::with_capacity(depth + 1);
    nets.push(CVector::zeros(0));
    outputs.push(CVector::new(input.to_vec()));
    for p in 1..=depth {
        let w = weights.layer(p);
        let fan_in = topology.width(p - 1);
        let prev = &outputs[p - 1];
        let net: CVector = (0..topology.width(p))
            .map(|j| {
                w[j * fan_in..(j + 1) * fan_in]
                    .iter()
                    .zip(prev.iter())
                    .map(|(wji, xi)| wji * xi)
                    .sum()
            })
            .collect();
        let act = topology.activation(p);
        let out = net.iter().map(|&z| act.eval(z)).collect();
        nets.push(net);
        outputs.push(out);
    }
    SampleTrace { nets, outputs }
}

pub fn forward_batch(
    topology: &NetworkTopology,
    weights: &WeightSet,
    dataset: &Dataset,
) -> ForwardTrace {
    ForwardTrace {
        samples: dataset
            .samples()
            .iter()
            .map(|s| forward(topology, weights, &s.input))
            .collect(),
    }
}

/// `E = (1/N) Σ_t Σ_l |y_tl − d_tl|²`, summed in sample order.
pub fn error_from_trace(trace: &ForwardTrace, dataset: &Dataset) -> f64 {
    let total: f64 = trace
        .samples()
        .iter()
        .zip(dataset.samples())
        .map(|(s, d)| {
            s.prediction()
                .iter()
                .zip(d.target.iter())
                .map(|(y, t)| (y - t).norm_sqr())
                .sum::<f64>()
        })
        .sum();
    total / dataset.len() as f64
}

pub fn error(topology: &NetworkTopology, weights: &WeightSet, dataset: &Dataset) -> f64 {
    error_from_trace(&forward_batch(topology, weights, dataset), dataset)
}
