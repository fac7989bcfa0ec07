//! The branched dense network: three input branches whose outputs are
//! concatenated (copernicus, sensor, external) and fed to a shared trunk,
//! followed by dropout and a single linear output unit.
//!
//! Parameters live in one flat vector so the optimizer can treat them
//! uniformly. Each dense layer stores its weights input-major
//! (`w[i * outputs + o]`) followed by its biases.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of input branches.
pub const BRANCHES: usize = 3;

/// Hidden-layer widths of each branch and of the trunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Architecture {
    pub copernicus: Vec<usize>,
    pub sensor: Vec<usize>,
    pub external: Vec<usize>,
    pub trunk: Vec<usize>,
    /// Drop probability applied to the last trunk layer during training.
    pub dropout: f64,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            copernicus: vec![128, 64],
            sensor: vec![64, 32],
            external: vec![64, 32],
            trunk: vec![128, 64],
            dropout: 0.2,
        }
    }
}

impl Architecture {
    pub fn branches(&self) -> [&[usize]; BRANCHES] {
        [&self.copernicus, &self.sensor, &self.external]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, widths) in [
            ("copernicus", &self.copernicus),
            ("sensor", &self.sensor),
            ("external", &self.external),
            ("trunk", &self.trunk),
        ] {
            if widths.is_empty() || widths.contains(&0) {
                return Err(Error::Config(format!(
                    "{name} layers must be a non-empty list of positive widths"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LayerSpec {
    inputs: usize,
    outputs: usize,
    offset: usize,
}

impl LayerSpec {
    fn weights(self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.inputs * self.outputs
    }

    fn biases(self) -> std::ops::Range<usize> {
        let start = self.offset + self.inputs * self.outputs;
        start..start + self.outputs
    }
}

/// Layer order: branch layers (copernicus, sensor, external), trunk layers,
/// then the output layer.
#[derive(Debug, Clone, PartialEq)]
struct Layout {
    branches: [Vec<LayerSpec>; BRANCHES],
    trunk: Vec<LayerSpec>,
    output: LayerSpec,
    param_count: usize,
}

impl Layout {
    fn new(arch: &Architecture, input_dims: [usize; BRANCHES]) -> Self {
        let mut offset = 0;
        let mut chain = |inputs: usize, widths: &[usize]| {
            let mut prev = inputs;
            widths
                .iter()
                .map(|&outputs| {
                    let spec = LayerSpec {
                        inputs: prev,
                        outputs,
                        offset,
                    };
                    offset += prev * outputs + outputs;
                    prev = outputs;
                    spec
                })
                .collect::<Vec<_>>()
        };
        let branch_widths = arch.branches();
        let branches: [Vec<LayerSpec>; BRANCHES] =
            std::array::from_fn(|b| chain(input_dims[b], branch_widths[b]));
        let concat: usize = branch_widths
            .iter()
            .map(|w| *w.last().expect("validated"))
            .sum();
        let trunk = chain(concat, &arch.trunk);
        let last = *arch.trunk.last().expect("validated");
        let output = chain(last, &[1])[0];
        let param_count = output.offset + last + 1;
        Self {
            branches,
            trunk,
            output,
            param_count,
        }
    }

    fn all(&self) -> impl Iterator<Item = LayerSpec> + '_ {
        self.branches
            .iter()
            .flatten()
            .chain(&self.trunk)
            .chain(std::iter::once(&self.output))
            .copied()
    }

    fn concat_width(&self) -> usize {
        self.branches
            .iter()
            .map(|b| b.last().expect("non-empty").outputs)
            .sum()
    }
}

/// Intermediate values of one forward pass over a batch, consumed by
/// [`MlpModel::backward`]. Matrices are row-major with one row per sample.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    rows: usize,
    branch_in: [Vec<f64>; BRANCHES],
    branch_out: [Vec<Vec<f64>>; BRANCHES],
    concat: Vec<f64>,
    trunk_out: Vec<Vec<f64>>,
    /// Per-unit dropout scale (0 or 1/(1-p)); all ones at inference.
    mask: Vec<f64>,
    dropped: Vec<f64>,
    /// Scratch buffers for the backward pass.
    grad_a: Vec<f64>,
    grad_b: Vec<f64>,
    grad_c: Vec<f64>,
}

impl Tape {
    /// Samples in the recorded batch.
    pub fn rows(&self) -> usize {
        self.rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDoc", into = "ModelDoc")]
pub struct MlpModel {
    architecture: Architecture,
    input_dims: [usize; BRANCHES],
    params: Vec<f64>,
    layout: Layout,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    architecture: Architecture,
    input_dims: [usize; BRANCHES],
    parameters: Vec<f64>,
}

impl TryFrom<ModelDoc> for MlpModel {
    type Error = Error;

    fn try_from(doc: ModelDoc) -> Result<Self> {
        MlpModel::from_parameters(doc.architecture, doc.input_dims, doc.parameters)
    }
}

impl From<MlpModel> for ModelDoc {
    fn from(m: MlpModel) -> Self {
        ModelDoc {
            architecture: m.architecture,
            input_dims: m.input_dims,
            parameters: m.params,
        }
    }
}

/// `y += a * x`
#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dot product with four independent accumulators (a fixed summation order).
#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let xc = x.chunks_exact(4);
    let yc = y.chunks_exact(4);
    let (xr, yr) = (xc.remainder(), yc.remainder());
    for (a, b) in xc.zip(yc) {
        for k in 0..4 {
            acc[k] += a[k] * b[k];
        }
    }
    let mut tail = 0.0;
    for (a, b) in xr.iter().zip(yr) {
        tail += a * b;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Rectified dense layer over `rows` samples. Each output element sums its
/// inputs in index order, so a sample's result does not depend on the batch
/// it is part of.
fn dense(params: &[f64], spec: LayerSpec, input: &[f64], rows: usize, out: &mut Vec<f64>) {
    let (n_in, n_out) = (spec.inputs, spec.outputs);
    let bias = &params[spec.biases()];
    out.clear();
    for _ in 0..rows {
        out.extend_from_slice(bias);
    }
    let w = &params[spec.weights()];
    for i in 0..n_in {
        let w_row = &w[i * n_out..(i + 1) * n_out];
        for b in 0..rows {
            let x = input[b * n_in + i];
            if x != 0.0 {
                axpy(x, w_row, &mut out[b * n_out..(b + 1) * n_out]);
            }
        }
    }
    for v in out.iter_mut() {
        // Also maps -0.0 to +0.0 so the backward test `> 0` is exact.
        if !(*v > 0.0) {
            *v = 0.0;
        }
    }
}

/// Backpropagates `grad_out` (gradient w.r.t. the post-activation output,
/// `rows x outputs`) through one rectified dense layer. Accumulates parameter
/// gradients and, when `grad_in` is given, writes the input gradient.
fn dense_backward(
    params: &[f64],
    spec: LayerSpec,
    input: &[f64],
    output: &[f64],
    grad_out: &mut [f64],
    grads: &mut [f64],
    grad_in: Option<&mut Vec<f64>>,
) {
    for (g, &o) in grad_out.iter_mut().zip(output) {
        if !(o > 0.0) {
            *g = 0.0;
        }
    }
    let (n_in, n_out) = (spec.inputs, spec.outputs);
    let rows = grad_out.len() / n_out;
    {
        let gw = &mut grads[spec.weights()];
        for i in 0..n_in {
            let gw_row = &mut gw[i * n_out..(i + 1) * n_out];
            for b in 0..rows {
                let x = input[b * n_in + i];
                if x != 0.0 {
                    axpy(x, &grad_out[b * n_out..(b + 1) * n_out], gw_row);
                }
            }
        }
    }
    {
        let gb = &mut grads[spec.biases()];
        for b in 0..rows {
            axpy(1.0, &grad_out[b * n_out..(b + 1) * n_out], gb);
        }
    }
    if let Some(grad_in) = grad_in {
        let w = &params[spec.weights()];
        grad_in.clear();
        grad_in.resize(rows * n_in, 0.0);
        for b in 0..rows {
            let g = &grad_out[b * n_out..(b + 1) * n_out];
            for i in 0..n_in {
                grad_in[b * n_in + i] = dot(&w[i * n_out..(i + 1) * n_out], g);
            }
        }
    }
}

impl MlpModel {
    /// Fan-in scaled uniform initialization (`±sqrt(6 / fan_in)`), zero biases.
    pub fn init(
        architecture: Architecture,
        input_dims: [usize; BRANCHES],
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let mut model = Self::zeros(architecture, input_dims)?;
        for spec in model.layout.all() {
            let bound = (6.0 / spec.inputs as f64).sqrt();
            for w in &mut model.params[spec.weights()] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(model)
    }

    pub fn zeros(architecture: Architecture, input_dims: [usize; BRANCHES]) -> Result<Self> {
        architecture.validate()?;
        if input_dims.contains(&0) {
            return Err(Error::Config(
                "every branch needs at least one input".into(),
            ));
        }
        let layout = Layout::new(&architecture, input_dims);
        Ok(Self {
            params: vec![0.0; layout.param_count],
            architecture,
            input_dims,
            layout,
        })
    }

    pub fn from_parameters(
        architecture: Architecture,
        input_dims: [usize; BRANCHES],
        parameters: Vec<f64>,
    ) -> Result<Self> {
        let mut model = Self::zeros(architecture, input_dims)?;
        if parameters.len() != model.params.len() {
            return Err(Error::Schema(format!(
                "expected {} parameters, got {}",
                model.params.len(),
                parameters.len()
            )));
        }
        if parameters.iter().any(|p| !p.is_finite()) {
            return Err(Error::Schema("model parameters must be finite".into()));
        }
        model.params = parameters;
        Ok(model)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.architecture
    }

    pub fn input_dims(&self) -> [usize; BRANCHES] {
        self.input_dims
    }

    pub fn input_width(&self) -> usize {
        self.input_dims.iter().sum()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// `(inputs, outputs)` of every dense layer in parameter order.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        self.layout.all().map(|s| (s.inputs, s.outputs)).collect()
    }

    /// `(weights, biases)` of layer `index` in [`Self::layer_shapes`] order;
    /// weights are input-major.
    pub fn layer(&self, index: usize) -> (&[f64], &[f64]) {
        let spec = self.layout.all().nth(index).expect("layer index in range");
        (&self.params[spec.weights()], &self.params[spec.biases()])
    }

    fn rows_of(&self, x: &[f64]) -> Result<usize> {
        let width = self.input_width();
        if x.is_empty() || !x.len().is_multiple_of(width) {
            return Err(Error::Schema(format!(
                "model expects rows of {width} inputs, got {} values",
                x.len()
            )));
        }
        Ok(x.len() / width)
    }

    /// Runs a batch through the network. `x` holds one row per sample: the
    /// standardized group columns laid end to end in branch order. Dropout is
    /// applied only when `dropout_rng` is given.
    pub fn forward(
        &self,
        x: &[f64],
        dropout_rng: Option<&mut ChaCha8Rng>,
        tape: &mut Tape,
    ) -> Result<Vec<f64>> {
        self.rows_of(x)?;
        let mut out = Vec::new();
        self.forward_unchecked(x, dropout_rng, tape, &mut out);
        Ok(out)
    }

    /// Inference-mode output for one sample.
    pub fn predict_one(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_width() {
            return Err(Error::Schema(format!(
                "model expects {} inputs, got {}",
                self.input_width(),
                x.len()
            )));
        }
        Ok(self.forward(x, None, &mut Tape::default())?[0])
    }

    pub(crate) fn forward_unchecked(
        &self,
        x: &[f64],
        dropout_rng: Option<&mut ChaCha8Rng>,
        tape: &mut Tape,
        out: &mut Vec<f64>,
    ) {
        let p = &self.params;
        let l = &self.layout;
        let width = self.input_width();
        let rows = x.len() / width;
        tape.rows = rows;

        let mut start = 0;
        for b in 0..BRANCHES {
            let dim = self.input_dims[b];
            let input = &mut tape.branch_in[b];
            input.clear();
            for r in 0..rows {
                input.extend_from_slice(&x[r * width + start..r * width + start + dim]);
            }
            start += dim;
            let outs = &mut tape.branch_out[b];
            outs.resize_with(l.branches[b].len(), Vec::new);
            for (k, &spec) in l.branches[b].iter().enumerate() {
                let (prev, rest) = outs.split_at_mut(k);
                let inp = if k == 0 {
                    &tape.branch_in[b]
                } else {
                    &prev[k - 1]
                };
                dense(p, spec, inp, rows, &mut rest[0]);
            }
        }
        tape.concat.clear();
        for r in 0..rows {
            for b in 0..BRANCHES {
                let last = tape.branch_out[b].last().expect("non-empty");
                let w = last.len() / rows;
                tape.concat.extend_from_slice(&last[r * w..(r + 1) * w]);
            }
        }
        tape.trunk_out.resize_with(l.trunk.len(), Vec::new);
        for (k, &spec) in l.trunk.iter().enumerate() {
            let (prev, rest) = tape.trunk_out.split_at_mut(k);
            let inp = if k == 0 { &tape.concat } else { &prev[k - 1] };
            dense(p, spec, inp, rows, &mut rest[0]);
        }
        let last = tape.trunk_out.last().expect("non-empty");
        tape.mask.clear();
        match dropout_rng {
            Some(rng) if self.architecture.dropout > 0.0 => {
                let rate = self.architecture.dropout;
                let keep_scale = 1.0 / (1.0 - rate);
                tape.mask.extend((0..last.len()).map(|_| {
                    if rng.random::<f64>() < rate {
                        0.0
                    } else {
                        keep_scale
                    }
                }));
            }
            _ => tape.mask.resize(last.len(), 1.0),
        }
        tape.dropped.clear();
        tape.dropped
            .extend(last.iter().zip(&tape.mask).map(|(a, m)| a * m));
        let o = l.output;
        let (w, bias) = (&p[o.weights()], p[o.biases()][0]);
        out.clear();
        out.extend(tape.dropped.chunks(o.inputs).map(|h| bias + dot(w, h)));
    }

    /// Accumulates into `grads` the gradient of `sum_r grad_outputs[r] * output[r]`
    /// for the batch recorded on `tape`. Rectifier subgradient at 0 is 0.
    pub fn backward(&self, tape: &mut Tape, grad_outputs: &[f64], grads: &mut [f64]) -> Result<()> {
        if grads.len() != self.params.len() {
            return Err(Error::Schema(format!(
                "gradient buffer has {} entries, model has {}",
                grads.len(),
                self.params.len()
            )));
        }
        if grad_outputs.len() != tape.rows {
            return Err(Error::Schema(format!(
                "{} output gradients for a batch of {}",
                grad_outputs.len(),
                tape.rows
            )));
        }
        self.backward_unchecked(tape, grad_outputs, grads);
        Ok(())
    }

    pub(crate) fn backward_unchecked(
        &self,
        tape: &mut Tape,
        grad_outputs: &[f64],
        grads: &mut [f64],
    ) {
        let p = &self.params;
        let l = &self.layout;
        let rows = tape.rows;
        let o = l.output;
        for (r, &g) in grad_outputs.iter().enumerate() {
            if g != 0.0 {
                axpy(
                    g,
                    &tape.dropped[r * o.inputs..(r + 1) * o.inputs],
                    &mut grads[o.weights()],
                );
            }
        }
        grads[o.biases()][0] += grad_outputs.iter().fold(0.0, |a, g| a + g);

        let mut grad = std::mem::take(&mut tape.grad_a);
        let mut grad_in = std::mem::take(&mut tape.grad_b);
        grad.clear();
        let w_out = &p[o.weights()];
        for (r, &g) in grad_outputs.iter().enumerate() {
            let mask = &tape.mask[r * o.inputs..(r + 1) * o.inputs];
            grad.extend(w_out.iter().zip(mask).map(|(w, m)| w * g * m));
        }

        for k in (0..l.trunk.len()).rev() {
            let input = if k == 0 {
                &tape.concat
            } else {
                &tape.trunk_out[k - 1]
            };
            dense_backward(
                p,
                l.trunk[k],
                input,
                &tape.trunk_out[k],
                &mut grad,
                grads,
                Some(&mut grad_in),
            );
            std::mem::swap(&mut grad, &mut grad_in);
        }
        // `grad` now holds the gradient w.r.t. the concatenation.
        let concat_grad = grad;
        let concat_width = l.concat_width();
        let mut g = grad_in;
        let mut g_in = std::mem::take(&mut tape.grad_c);
        let mut offset = 0;
        for b in 0..BRANCHES {
            let layers = &l.branches[b];
            let width = layers.last().expect("non-empty").outputs;
            g.clear();
            for r in 0..rows {
                let row = r * concat_width + offset;
                g.extend_from_slice(&concat_grad[row..row + width]);
            }
            offset += width;
            for k in (0..layers.len()).rev() {
                let inp = if k == 0 {
                    &tape.branch_in[b]
                } else {
                    &tape.branch_out[b][k - 1]
                };
                let need_input_grad = k > 0;
                dense_backward(
                    p,
                    layers[k],
                    inp,
                    &tape.branch_out[b][k],
                    &mut g,
                    grads,
                    need_input_grad.then_some(&mut g_in),
                );
                if need_input_grad {
                    std::mem::swap(&mut g, &mut g_in);
                }
            }
        }
        tape.grad_a = concat_grad;
        tape.grad_b = g;
        tape.grad_c = g_in;
    }

    /// Smallest |pre-activation| over all rectified units for the single
    /// sample `x`: how far the sample is from a kink of the network function.
    pub fn kink_margin(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_width() {
            return Err(Error::Schema(format!(
                "model expects {} inputs, got {}",
                self.input_width(),
                x.len()
            )));
        }
        let p = &self.params;
        let l = &self.layout;
        let mut margin = f64::INFINITY;
        let mut pre = Vec::new();
        let mut layer = |spec: LayerSpec, input: &[f64], out: &mut Vec<f64>| {
            pre.clear();
            pre.extend_from_slice(&p[spec.biases()]);
            let w = &p[spec.weights()];
            for (i, &xi) in input.iter().enumerate() {
                axpy(xi, &w[i * spec.outputs..(i + 1) * spec.outputs], &mut pre);
            }
            margin = pre.iter().fold(margin, |m, z| m.min(z.abs()));
            out.clear();
            out.extend(pre.iter().map(|z| z.max(0.0)));
        };
        let mut concat = Vec::new();
        let mut start = 0;
        let (mut h, mut next) = (Vec::new(), Vec::new());
        for b in 0..BRANCHES {
            h.clear();
            h.extend_from_slice(&x[start..start + self.input_dims[b]]);
            start += self.input_dims[b];
            for &spec in &l.branches[b] {
                layer(spec, &h, &mut next);
                std::mem::swap(&mut h, &mut next);
            }
            concat.extend_from_slice(&h);
        }
        h = concat;
        for &spec in &l.trunk {
            layer(spec, &h, &mut next);
            std::mem::swap(&mut h, &mut next);
        }
        Ok(margin)
    }
}
