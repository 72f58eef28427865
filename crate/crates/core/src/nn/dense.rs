use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NnError;

/// Variance floor inside layer normalisation.
pub const LAYER_NORM_EPS: f64 = 1e-12;
/// Half-width of the uniform initialisation of output layers.
pub const FINAL_LAYER_INIT: f64 = 3e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Identity => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }

    fn apply(self, y: f64) -> f64 {
        match self {
            Activation::Relu => y.max(0.0),
            Activation::Tanh => y.tanh(),
            Activation::Identity => y,
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
    pub layer_norm: bool,
}

/// Ordered layer shapes of a dense network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    layers: Vec<LayerSpec>,
}

impl Architecture {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::Architecture("no layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.input == 0 || l.output == 0 {
                return Err(NnError::Architecture(format!("layer {i} has a zero dimension")));
            }
            if i > 0 && layers[i - 1].output != l.input {
                return Err(NnError::Architecture(format!(
                    "layer {i} expects {} inputs but layer {} produces {}",
                    l.input,
                    i - 1,
                    layers[i - 1].output
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Hidden layers are layer-normalised and use ReLU; the output layer has
    /// no normalisation and uses `output_activation`.
    pub fn mlp(
        input: usize,
        hidden: &[usize],
        output: usize,
        output_activation: Activation,
    ) -> Result<Self, NnError> {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input;
        for &h in hidden {
            layers.push(LayerSpec { input: prev, output: h, activation: Activation::Relu, layer_norm: true });
            prev = h;
        }
        layers.push(LayerSpec { input: prev, output, activation: output_activation, layer_norm: false });
        Self::new(layers)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.input * l.output + l.output + if l.layer_norm { 2 * l.output } else { 0 })
            .sum()
    }
}

/// Offsets of one layer's blocks inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Slots {
    weight: usize,
    bias: usize,
    gain: Option<usize>,
    offset: Option<usize>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Array2<f64>,
    normalized: Option<Array2<f64>>,
    inv_std: Option<Array1<f64>>,
    output: Array2<f64>,
}

/// Dense feed-forward network.
///
/// Parameters live in one flat vector in declaration order: for each layer
/// the row-major `output × input` weight matrix, the bias, then (when the
/// layer is normalised) the layer-norm gain and offset. Each layer computes
/// `act(LN(W x + b))`.
#[derive(Debug, Clone)]
pub struct DenseNet {
    arch: Architecture,
    slots: Vec<Slots>,
    params: Vec<f64>,
    cache: Option<Vec<LayerCache>>,
}

/// Result of a backward pass.
#[derive(Debug, Clone)]
pub struct Backward {
    /// Gradient for every parameter, same layout as [`DenseNet::params`].
    pub grads: Vec<f64>,
    /// Gradient with respect to the network input, one row per sample.
    pub input_grad: Array2<f64>,
}

impl DenseNet {
    /// Network with every parameter zero and layer-norm gains at one.
    pub fn zeros(arch: Architecture) -> Self {
        let mut slots = Vec::with_capacity(arch.layers.len());
        let mut at = 0;
        for l in &arch.layers {
            let weight = at;
            at += l.input * l.output;
            let bias = at;
            at += l.output;
            let (gain, offset) = if l.layer_norm {
                let g = at;
                at += l.output;
                let o = at;
                at += l.output;
                (Some(g), Some(o))
            } else {
                (None, None)
            };
            slots.push(Slots { weight, bias, gain, offset });
        }
        let mut params = vec![0.0; at];
        for (s, l) in slots.iter().zip(&arch.layers) {
            if let Some(g) = s.gain {
                params[g..g + l.output].fill(1.0);
            }
        }
        Self { arch, slots, params, cache: None }
    }

    /// Fan-in scaled uniform initialisation for hidden layers and a narrow
    /// uniform band for the output layer.
    pub fn random<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Self {
        let mut net = Self::zeros(arch);
        let last = net.arch.layers.len() - 1;
        for i in 0..=last {
            let l = net.arch.layers[i];
            let s = net.slots[i];
            let bound = if i == last { FINAL_LAYER_INIT } else { 1.0 / (l.input as f64).sqrt() };
            for p in &mut net.params[s.weight..s.bias + l.output] {
                *p = rng.random_range(-bound..=bound);
            }
        }
        net
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self, NnError> {
        let mut net = Self::zeros(arch);
        if params.len() != net.params.len() {
            return Err(NnError::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.arch.output_dim()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access to the flat parameters. Invalidates any cached forward.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.cache = None;
        &mut self.params
    }

    pub fn weight(&self, layer: usize) -> ArrayView2<'_, f64> {
        let l = self.arch.layers[layer];
        let s = self.slots[layer];
        ArrayView2::from_shape((l.output, l.input), &self.params[s.weight..s.weight + l.input * l.output])
            .expect("weight slot shape")
    }

    pub fn weight_mut(&mut self, layer: usize) -> ArrayViewMut2<'_, f64> {
        self.cache = None;
        let l = self.arch.layers[layer];
        let s = self.slots[layer];
        ArrayViewMut2::from_shape(
            (l.output, l.input),
            &mut self.params[s.weight..s.weight + l.input * l.output],
        )
        .expect("weight slot shape")
    }

    pub fn bias_mut(&mut self, layer: usize) -> ArrayViewMut1<'_, f64> {
        self.cache = None;
        let l = self.arch.layers[layer];
        let s = self.slots[layer];
        ArrayViewMut1::from(&mut self.params[s.bias..s.bias + l.output])
    }

    fn block(&self, start: usize, len: usize) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.params[start..start + len])
    }

    /// Human-readable location of flat parameter `index`.
    pub fn param_path(&self, index: usize) -> String {
        for (i, (s, l)) in self.slots.iter().zip(&self.arch.layers).enumerate() {
            if index >= s.weight && index < s.bias {
                let k = index - s.weight;
                return format!("layer{i}.weight[{},{}]", k / l.input, k % l.input);
            }
            if index >= s.bias && index < s.bias + l.output {
                return format!("layer{i}.bias[{}]", index - s.bias);
            }
            if let (Some(g), Some(o)) = (s.gain, s.offset) {
                if index >= g && index < g + l.output {
                    return format!("layer{i}.ln_gain[{}]", index - g);
                }
                if index >= o && index < o + l.output {
                    return format!("layer{i}.ln_offset[{}]", index - o);
                }
            }
        }
        format!("param[{index}]")
    }

    fn layer_forward(&self, i: usize, input: ArrayView2<'_, f64>) -> (Option<Array2<f64>>, Option<Array1<f64>>, Array2<f64>) {
        let l = self.arch.layers[i];
        let s = self.slots[i];
        let mut z = input.dot(&self.weight(i).t());
        z += &self.block(s.bias, l.output);
        let (normalized, inv_std) = match (s.gain, s.offset) {
            (Some(g), Some(o)) => {
                let n = l.output as f64;
                let mut inv = Array1::zeros(z.nrows());
                for (mut row, inv_k) in z.axis_iter_mut(Axis(0)).zip(inv.iter_mut()) {
                    let mean = row.sum() / n;
                    row -= mean;
                    let var = row.iter().map(|v| v * v).sum::<f64>() / n;
                    *inv_k = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                    row *= *inv_k;
                }
                let zhat = z.clone();
                z *= &self.block(g, l.output);
                z += &self.block(o, l.output);
                (Some(zhat), Some(inv))
            }
            _ => (None, None),
        };
        z.mapv_inplace(|y| l.activation.apply(y));
        (normalized, inv_std, z)
    }

    /// Batched forward pass without caching; one sample per row.
    pub fn forward_batch(&self, input: ArrayView2<'_, f64>) -> Result<Array2<f64>, NnError> {
        self.check_input(input)?;
        let mut x = input.to_owned();
        for i in 0..self.arch.layers.len() {
            x = self.layer_forward(i, x.view()).2;
        }
        Ok(x)
    }

    /// Forward pass for a single input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| NnError::ShapeMismatch(e.to_string()))?;
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    /// Forward pass that keeps the activations needed by [`backward`](Self::backward).
    pub fn forward_train(&mut self, input: ArrayView2<'_, f64>) -> Result<Array2<f64>, NnError> {
        self.check_input(input)?;
        let mut caches = Vec::with_capacity(self.arch.layers.len());
        let mut x = input.to_owned();
        for i in 0..self.arch.layers.len() {
            let (normalized, inv_std, out) = self.layer_forward(i, x.view());
            caches.push(LayerCache { input: x, normalized, inv_std, output: out.clone() });
            x = out;
        }
        self.cache = Some(caches);
        Ok(x)
    }

    /// Reverse-mode gradients of a scalar loss given `d loss / d output`.
    /// Consumes the cache left by the last [`forward_train`](Self::forward_train).
    pub fn backward(&mut self, output_grad: ArrayView2<'_, f64>) -> Result<Backward, NnError> {
        self.backward_impl(output_grad, true)
    }

    /// Like [`backward`](Self::backward) but only the input gradient is
    /// computed; `grads` comes back empty.
    pub fn backward_input(&mut self, output_grad: ArrayView2<'_, f64>) -> Result<Backward, NnError> {
        self.backward_impl(output_grad, false)
    }

    fn backward_impl(&mut self, output_grad: ArrayView2<'_, f64>, with_params: bool) -> Result<Backward, NnError> {
        let caches = self.cache.take().ok_or(NnError::NoForwardCache)?;
        let batch = caches[0].input.nrows();
        if output_grad.dim() != (batch, self.output_dim()) {
            return Err(NnError::ShapeMismatch(format!(
                "output gradient {:?}, expected {:?}",
                output_grad.dim(),
                (batch, self.output_dim())
            )));
        }
        let mut grads = if with_params { vec![0.0; self.params.len()] } else { Vec::new() };
        let mut upstream = output_grad.to_owned();
        for i in (0..self.arch.layers.len()).rev() {
            let l = self.arch.layers[i];
            let s = self.slots[i];
            let c = &caches[i];
            Zip::from(&mut upstream)
                .and(&c.output)
                .for_each(|d, &a| *d *= l.activation.derivative_from_output(a));
            let dz = match (s.gain, s.offset, &c.normalized, &c.inv_std) {
                (Some(g), Some(o), Some(zhat), Some(inv)) => {
                    if with_params {
                        let dgain = (&upstream * zhat).sum_axis(Axis(0));
                        let doffset = upstream.sum_axis(Axis(0));
                        grads[g..g + l.output].copy_from_slice(dgain.as_slice().expect("contiguous"));
                        grads[o..o + l.output].copy_from_slice(doffset.as_slice().expect("contiguous"));
                    }
                    let mut dzhat = upstream;
                    dzhat *= &self.block(g, l.output);
                    let n = l.output as f64;
                    for ((mut row, zrow), &inv_k) in
                        dzhat.axis_iter_mut(Axis(0)).zip(zhat.axis_iter(Axis(0))).zip(inv.iter())
                    {
                        let sum = row.sum();
                        let dot = row.dot(&zrow);
                        Zip::from(&mut row)
                            .and(&zrow)
                            .for_each(|d, &zh| *d = inv_k / n * (n * *d - sum - zh * dot));
                    }
                    dzhat
                }
                _ => upstream,
            };
            if with_params {
                let mut dw = ArrayViewMut2::from_shape(
                    (l.output, l.input),
                    &mut grads[s.weight..s.weight + l.input * l.output],
                )
                .expect("weight slot shape");
                ndarray::linalg::general_mat_mul(1.0, &dz.t(), &c.input, 0.0, &mut dw);
                let db = dz.sum_axis(Axis(0));
                grads[s.bias..s.bias + l.output].copy_from_slice(db.as_slice().expect("contiguous"));
            }
            upstream = dz.dot(&self.weight(i));
        }
        Ok(Backward { grads, input_grad: upstream })
    }

    fn check_input(&self, input: ArrayView2<'_, f64>) -> Result<(), NnError> {
        if input.ncols() != self.input_dim() {
            return Err(NnError::ShapeMismatch(format!(
                "input has {} columns, network expects {}",
                input.ncols(),
                self.input_dim()
            )));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFiniteInput);
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

/// Moves `target` toward `source`: `θ⁻ ← τ θ + (1 − τ) θ⁻` per parameter.
pub fn soft_update(target: &mut DenseNet, source: &DenseNet, tau: f64) -> Result<(), NnError> {
    if target.arch != source.arch {
        return Err(NnError::ShapeMismatch("soft update between different architectures".into()));
    }
    for (t, &s) in target.params_mut().iter_mut().zip(&source.params) {
        *t = tau * s + (1.0 - tau) * *t;
    }
    Ok(())
}

/// Layer normalisation without gain/offset, exposed for property tests.
pub fn normalize(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
    values.iter().map(|v| (v - mean) * inv).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear(n: usize) -> DenseNet {
        let arch = Architecture::new(vec![LayerSpec {
            input: n,
            output: n,
            activation: Activation::Identity,
            layer_norm: false,
        }])
        .unwrap();
        let mut net = DenseNet::zeros(arch);
        for i in 0..n {
            net.weight_mut(0)[[i, i]] = 1.0;
        }
        net
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = linear(3);
        assert_eq!(net.forward(&[0.5, -2.0, 7.0]).unwrap(), vec![0.5, -2.0, 7.0]);
    }

    #[test]
    fn tanh_output_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let arch = Architecture::mlp(24, &[64, 64], 11, Activation::Tanh).unwrap();
        let mut net = DenseNet::random(arch, &mut rng);
        for p in net.params_mut() {
            *p *= 400.0;
        }
        let out = net.forward(&[1.0; 24]).unwrap();
        assert_eq!(out.len(), 11);
        assert!(out.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn constant_vector_normalizes_to_offset() {
        let arch = Architecture::new(vec![LayerSpec {
            input: 2,
            output: 3,
            activation: Activation::Identity,
            layer_norm: true,
        }])
        .unwrap();
        let mut net = DenseNet::zeros(arch);
        // zero weights => pre-activation equals the (constant) bias
        net.bias_mut(0).fill(4.0);
        let o = net.slots[0].offset.unwrap();
        net.params_mut()[o..o + 3].copy_from_slice(&[0.1, 0.2, 0.3]);
        assert_eq!(net.forward(&[1.0, 2.0]).unwrap(), vec![0.1, 0.2, 0.3]);
        assert_eq!(normalize(&[2.0, 2.0, 2.0]), vec![0.0; 3]);
    }

    #[test]
    fn non_finite_input_rejected() {
        let net = linear(2);
        assert!(matches!(net.forward(&[f64::NAN, 0.0]), Err(NnError::NonFiniteInput)));
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn quadratic_loss_gradient_closed_form() {
        let arch = Architecture::new(vec![LayerSpec {
            input: 3,
            output: 2,
            activation: Activation::Identity,
            layer_norm: false,
        }])
        .unwrap();
        let w = vec![0.5, -1.0, 2.0, 0.25, 0.0, -0.75];
        let mut params = w.clone();
        params.extend([0.0, 0.0]);
        let mut net = DenseNet::from_params(arch, params).unwrap();
        let x = array![[1.0, 2.0, -1.0]];
        let y = array![[0.3, -0.2]];
        let out = net.forward_train(x.view()).unwrap();
        let d = 2.0 * (&out - &y);
        let back = net.backward(d.view()).unwrap();
        for r in 0..2 {
            for c in 0..3 {
                assert!((back.grads[r * 3 + c] - d[[0, r]] * x[[0, c]]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn backward_without_forward_fails() {
        let mut net = linear(2);
        assert!(matches!(net.backward(array![[1.0, 1.0]].view()), Err(NnError::NoForwardCache)));
        net.forward_train(array![[1.0, 1.0]].view()).unwrap();
        net.backward(array![[1.0, 1.0]].view()).unwrap();
        // the cache is consumed
        assert!(net.backward(array![[1.0, 1.0]].view()).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let arch = Architecture::mlp(4, &[5, 6], 2, Activation::Tanh).unwrap();
        let mut net = DenseNet::random(arch, &mut rng);
        let x = Array2::from_shape_fn((3, 4), |(i, j)| (i as f64 - j as f64) * 0.3);
        net.forward_train(x.view()).unwrap();
        let back = net.backward(Array2::zeros((3, 2)).view()).unwrap();
        assert!(back.grads.iter().all(|&g| g == 0.0));
        assert!(back.input_grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn soft_update_cases() {
        let arch = Architecture::mlp(2, &[3], 1, Activation::Identity).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let src = DenseNet::random(arch.clone(), &mut rng);
        let orig = DenseNet::random(arch.clone(), &mut rng);

        let mut t = orig.clone();
        soft_update(&mut t, &src, 1.0).unwrap();
        assert_eq!(t.params(), src.params());

        let mut t = orig.clone();
        soft_update(&mut t, &src, 0.0).unwrap();
        assert_eq!(t.params(), orig.params());

        let mut zero = DenseNet::zeros(arch.clone());
        zero.params_mut().fill(0.0);
        let mut two = DenseNet::zeros(arch.clone());
        two.params_mut().fill(2.0);
        soft_update(&mut zero, &two, 0.5).unwrap();
        assert!(zero.params().iter().all(|&p| p == 1.0));

        let other = DenseNet::zeros(Architecture::mlp(2, &[4], 1, Activation::Identity).unwrap());
        assert!(soft_update(&mut t, &other, 0.5).is_err());
    }

    #[test]
    fn param_paths_name_blocks() {
        let net = DenseNet::zeros(Architecture::mlp(2, &[3], 1, Activation::Tanh).unwrap());
        assert_eq!(net.param_path(0), "layer0.weight[0,0]");
        assert_eq!(net.param_path(5), "layer0.weight[2,1]");
        assert_eq!(net.param_path(6), "layer0.bias[0]");
        assert_eq!(net.param_path(9), "layer0.ln_gain[0]");
        assert_eq!(net.param_path(12), "layer0.ln_offset[0]");
        assert_eq!(net.param_path(15), "layer1.weight[0,0]");
        assert_eq!(net.params().len(), net.architecture().param_count());
    }
}
