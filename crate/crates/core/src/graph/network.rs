use rand::Rng;

use super::{GraphError, Layer, NetworkSpec};
use crate::rng;
use crate::scalar::{first_non_finite, Real};
use crate::tensor::Tensor;

/// Named parameter tensors in layer order (`layer{i}.weight`, `layer{i}.bias`).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
}

impl<T: Real> ParamSet<T> {
    pub fn new(names: Vec<String>, tensors: Vec<Tensor<T>>) -> Self {
        assert_eq!(names.len(), tensors.len());
        Self { names, tensors }
    }

    /// Zero-filled parameters laid out for `spec`.
    pub fn zeros_for(spec: &NetworkSpec) -> Self {
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for (i, layer) in spec.layers.iter().enumerate() {
            if let Some((w, b)) = layer.param_shapes() {
                names.push(format!("layer{i}.weight"));
                tensors.push(Tensor::zeros(&w));
                names.push(format!("layer{i}.bias"));
                tensors.push(Tensor::zeros(&b));
            }
        }
        Self { names, tensors }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn fill(&mut self, value: T) {
        self.tensors.iter_mut().for_each(|t| t.fill(value));
    }

    pub fn axpy(&mut self, scale: T, other: &Self) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.axpy(scale, b);
        }
    }

    pub fn scale(&mut self, factor: T) {
        self.tensors.iter_mut().for_each(|t| t.scale(factor));
    }

    pub fn squared_norm(&self) -> T {
        self.tensors.iter().map(Tensor::squared_norm).sum()
    }

    pub fn max_abs(&self) -> T {
        self.tensors
            .iter()
            .map(Tensor::max_abs)
            .fold(T::zero(), |a, b| a.max(b))
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Flat view over all parameter values, in storage order.
    pub fn iter_values(&self) -> impl Iterator<Item = &T> {
        self.tensors.iter().flat_map(|t| t.values().iter())
    }

    pub fn cast<U: Real>(&self) -> ParamSet<U> {
        ParamSet {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
        }
    }
}

/// Initializes parameters for `spec` from a uniform fan-in distribution
/// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, deterministic in `seed`.
pub fn build_network<T: Real>(spec: &NetworkSpec, seed: u64) -> Result<ParamSet<T>, GraphError> {
    spec.shapes()?;
    let mut params = ParamSet::zeros_for(spec);
    let mut slot = 0;
    for (i, layer) in spec.layers.iter().enumerate() {
        if layer.param_shapes().is_none() {
            continue;
        }
        let bound = 1.0 / (layer.fan_in() as f64).sqrt();
        let mut stream = rng::stream(seed, "init", &[i as u64]);
        for tensor in &mut params.tensors[slot..slot + 2] {
            for v in tensor.values_mut() {
                *v = T::lit(stream.random_range(-bound..bound));
            }
        }
        slot += 2;
    }
    Ok(params)
}

/// Result of a forward and reverse pass.
#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    pub output: Vec<T>,
    pub grad_input: Vec<T>,
    pub grad_params: ParamSet<T>,
}

/// A network spec bound to its parameters.
#[derive(Debug, Clone)]
pub struct Network<T> {
    spec: NetworkSpec,
    params: ParamSet<T>,
    shapes: Vec<Vec<usize>>,
    /// Index of each layer's weight tensor in `params`.
    slots: Vec<Option<usize>>,
}

impl<T: Real> Network<T> {
    pub fn new(spec: NetworkSpec, params: ParamSet<T>) -> Result<Self, GraphError> {
        let shapes = spec.shapes()?;
        let expected = spec.param_shapes();
        if expected.len() != params.len() {
            return Err(GraphError::ParamCount {
                expected: expected.len(),
                actual: params.len(),
            });
        }
        for (index, (want, have)) in expected.iter().zip(params.tensors()).enumerate() {
            if want.as_slice() != have.shape() {
                return Err(GraphError::ParamShape {
                    index,
                    expected: want.clone(),
                    actual: have.shape().to_vec(),
                });
            }
        }
        let mut slots = Vec::with_capacity(spec.layers.len());
        let mut next = 0;
        for layer in &spec.layers {
            if layer.param_shapes().is_some() {
                slots.push(Some(next));
                next += 2;
            } else {
                slots.push(None);
            }
        }
        Ok(Self {
            spec,
            params,
            shapes,
            slots,
        })
    }

    pub fn build(spec: NetworkSpec, seed: u64) -> Result<Self, GraphError> {
        let params = build_network(&spec, seed)?;
        Self::new(spec, params)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn into_params(self) -> ParamSet<T> {
        self.params
    }

    pub fn input_len(&self) -> usize {
        self.spec.input_len()
    }

    pub fn output_len(&self) -> usize {
        self.shapes.last().map_or(0, |s| s.iter().product())
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>, GraphError> {
        let mut acts = self.run_forward(x)?;
        Ok(acts.pop().expect("at least one layer"))
    }

    /// Output, gradient with respect to the input and gradient with respect
    /// to every parameter of `<cotangent, output>`. Scalar-output networks
    /// may pass `None` as cotangent.
    pub fn forward_backward(&self, x: &[T], cotangent: Option<&[T]>) -> Result<Evaluation<T>, GraphError> {
        let mut grad_params = self.params.zeros_like();
        let (output, grad_input) = self.accumulate(x, cotangent, Some((&mut grad_params, T::one())), true)?;
        Ok(Evaluation {
            output,
            grad_input: grad_input.expect("input gradient requested"),
            grad_params,
        })
    }

    /// Output and input gradient only; parameter gradients are skipped.
    pub fn input_gradient(&self, x: &[T], cotangent: Option<&[T]>) -> Result<(Vec<T>, Vec<T>), GraphError> {
        let (out, grad) = self.accumulate(x, cotangent, None, true)?;
        Ok((out, grad.expect("input gradient requested")))
    }

    /// Adds `scale * d<cotangent, output>/dtheta` into `grads` and returns the output.
    pub fn accumulate_param_gradient(
        &self,
        x: &[T],
        cotangent: Option<&[T]>,
        scale: T,
        grads: &mut ParamSet<T>,
    ) -> Result<Vec<T>, GraphError> {
        Ok(self.accumulate(x, cotangent, Some((grads, scale)), false)?.0)
    }

    /// Sign class (-1, 0, +1) of every leaky-ReLU input, in layer order.
    /// Two inputs with the same pattern lie in the same linear piece.
    pub fn activation_pattern(&self, x: &[T]) -> Result<Vec<i8>, GraphError> {
        let acts = self.run_forward(x)?;
        let mut pattern = Vec::new();
        for (i, layer) in self.spec.layers.iter().enumerate() {
            if let Layer::LeakyRelu { .. } = layer {
                pattern.extend(acts[i].iter().map(|v| {
                    if *v > T::zero() {
                        1
                    } else if *v < T::zero() {
                        -1
                    } else {
                        0
                    }
                }));
            }
        }
        Ok(pattern)
    }

    fn accumulate(
        &self,
        x: &[T],
        cotangent: Option<&[T]>,
        grads: Option<(&mut ParamSet<T>, T)>,
        need_input: bool,
    ) -> Result<(Vec<T>, Option<Vec<T>>), GraphError> {
        let outputs = self.output_len();
        let ones;
        let cot = match cotangent {
            Some(c) if c.len() == outputs => c,
            Some(_) => return Err(GraphError::MissingCotangent { outputs }),
            None if outputs == 1 => {
                ones = [T::one()];
                &ones[..]
            }
            None => return Err(GraphError::MissingCotangent { outputs }),
        };
        let acts = self.run_forward(x)?;
        let grad_input = self.run_backward(&acts, cot, grads, need_input)?;
        let mut acts = acts;
        Ok((acts.pop().expect("non-empty"), grad_input))
    }

    fn run_forward(&self, x: &[T]) -> Result<Vec<Vec<T>>, GraphError> {
        let expected = self.input_len();
        if x.len() != expected {
            return Err(GraphError::InputLength {
                expected,
                actual: x.len(),
            });
        }
        if let Some(index) = first_non_finite(x) {
            return Err(GraphError::NonFiniteInput { index });
        }
        let mut acts: Vec<Vec<T>> = Vec::with_capacity(self.spec.layers.len() + 1);
        acts.push(x.to_vec());
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let input = &acts[i];
            let out = match *layer {
                Layer::Dense { inputs, outputs } => {
                    let (w, b) = self.layer_params(i);
                    let mut out = b.to_vec();
                    for (o, y) in out.iter_mut().enumerate() {
                        let row = &w[o * inputs..(o + 1) * inputs];
                        let mut acc = T::zero();
                        for (wi, xi) in row.iter().zip(input) {
                            acc += *wi * *xi;
                        }
                        *y += acc;
                    }
                    debug_assert_eq!(out.len(), outputs);
                    out
                }
                Layer::Conv2d { .. } => self.conv_forward(i, input),
                Layer::LeakyRelu { negative_slope } => {
                    let slope = T::lit(negative_slope);
                    input
                        .iter()
                        .map(|&v| if v > T::zero() { v } else { slope * v })
                        .collect()
                }
                Layer::SqueezeSum => vec![input.iter().copied().sum()],
            };
            if first_non_finite(&out).is_some() {
                return Err(GraphError::NonFinite { layer: i });
            }
            acts.push(out);
        }
        Ok(acts)
    }

    fn run_backward(
        &self,
        acts: &[Vec<T>],
        cotangent: &[T],
        mut grads: Option<(&mut ParamSet<T>, T)>,
        need_input: bool,
    ) -> Result<Option<Vec<T>>, GraphError> {
        let mut g = cotangent.to_vec();
        for (i, layer) in self.spec.layers.iter().enumerate().rev() {
            let input = &acts[i];
            let want_input_grad = i > 0 || need_input;
            let next = match *layer {
                Layer::Dense { inputs, .. } => {
                    let (w, _) = self.layer_params(i);
                    if let Some((set, scale)) = grads.as_mut() {
                        let slot = self.slots[i].expect("dense has params");
                        let (gw, gb) = set.tensors[slot..slot + 2].split_at_mut(1);
                        let (gw, gb) = (gw[0].values_mut(), gb[0].values_mut());
                        for (o, &go) in g.iter().enumerate() {
                            let s = *scale * go;
                            gb[o] += s;
                            for (gwi, xi) in gw[o * inputs..(o + 1) * inputs].iter_mut().zip(input) {
                                *gwi += s * *xi;
                            }
                        }
                    }
                    if want_input_grad {
                        let mut gin = vec![T::zero(); inputs];
                        for (o, &go) in g.iter().enumerate() {
                            for (gi, wi) in gin.iter_mut().zip(&w[o * inputs..(o + 1) * inputs]) {
                                *gi += go * *wi;
                            }
                        }
                        gin
                    } else {
                        Vec::new()
                    }
                }
                Layer::Conv2d { .. } => {
                    let scaled = grads.as_mut().map(|(set, scale)| (&mut **set, *scale));
                    self.conv_backward(i, input, &g, scaled, want_input_grad)
                }
                Layer::LeakyRelu { negative_slope } => {
                    let slope = T::lit(negative_slope);
                    input
                        .iter()
                        .zip(&g)
                        .map(|(&x, &gv)| if x > T::zero() { gv } else { slope * gv })
                        .collect()
                }
                Layer::SqueezeSum => vec![g[0]; input.len()],
            };
            if first_non_finite(&next).is_some() {
                return Err(GraphError::NonFiniteGradient { layer: i });
            }
            g = next;
        }
        Ok(need_input.then_some(g))
    }

    fn layer_params(&self, layer: usize) -> (&[T], &[T]) {
        let slot = self.slots[layer].expect("layer has params");
        (
            self.params.tensors[slot].values(),
            self.params.tensors[slot + 1].values(),
        )
    }

    fn conv_geometry(&self, layer: usize) -> ConvGeometry {
        let Layer::Conv2d {
            out_channels,
            in_channels,
            kernel_h,
            kernel_w,
            stride,
            padding,
        } = self.spec.layers[layer]
        else {
            unreachable!("conv geometry requested for non-conv layer")
        };
        let ins = &self.shapes[layer];
        let outs = &self.shapes[layer + 1];
        ConvGeometry {
            oc: out_channels,
            ic: in_channels,
            kh: kernel_h,
            kw: kernel_w,
            stride,
            pad: padding,
            ih: ins[1],
            iw: ins[2],
            oh: outs[1],
            ow: outs[2],
        }
    }

    fn conv_forward(&self, layer: usize, input: &[T]) -> Vec<T> {
        let c = self.conv_geometry(layer);
        let (w, b) = self.layer_params(layer);
        let mut out = vec![T::zero(); c.oc * c.oh * c.ow];
        for oc in 0..c.oc {
            for oy in 0..c.oh {
                for ox in 0..c.ow {
                    let mut acc = b[oc];
                    for ic in 0..c.ic {
                        for ky in 0..c.kh {
                            let Some(iy) = c.source(oy, ky, c.ih) else { continue };
                            for kx in 0..c.kw {
                                let Some(ix) = c.source(ox, kx, c.iw) else { continue };
                                acc +=
                                    w[((oc * c.ic + ic) * c.kh + ky) * c.kw + kx] * input[(ic * c.ih + iy) * c.iw + ix];
                            }
                        }
                    }
                    out[(oc * c.oh + oy) * c.ow + ox] = acc;
                }
            }
        }
        out
    }

    fn conv_backward(
        &self,
        layer: usize,
        input: &[T],
        g: &[T],
        grads: Option<(&mut ParamSet<T>, T)>,
        want_input_grad: bool,
    ) -> Vec<T> {
        let c = self.conv_geometry(layer);
        let (w, _) = self.layer_params(layer);
        let mut gin = if want_input_grad {
            vec![T::zero(); input.len()]
        } else {
            Vec::new()
        };
        let mut param_grads = grads.map(|(set, scale)| {
            let slot = self.slots[layer].expect("conv has params");
            let (gw, gb) = set.tensors[slot..slot + 2].split_at_mut(1);
            (gw[0].values_mut(), gb[0].values_mut(), scale)
        });
        for oc in 0..c.oc {
            for oy in 0..c.oh {
                for ox in 0..c.ow {
                    let go = g[(oc * c.oh + oy) * c.ow + ox];
                    if let Some((_, gb, scale)) = param_grads.as_mut() {
                        gb[oc] += *scale * go;
                    }
                    for ic in 0..c.ic {
                        for ky in 0..c.kh {
                            let Some(iy) = c.source(oy, ky, c.ih) else { continue };
                            for kx in 0..c.kw {
                                let Some(ix) = c.source(ox, kx, c.iw) else { continue };
                                let wi = ((oc * c.ic + ic) * c.kh + ky) * c.kw + kx;
                                let xi = (ic * c.ih + iy) * c.iw + ix;
                                if let Some((gw, _, scale)) = param_grads.as_mut() {
                                    gw[wi] += *scale * go * input[xi];
                                }
                                if want_input_grad {
                                    gin[xi] += go * w[wi];
                                }
                            }
                        }
                    }
                }
            }
        }
        gin
    }
}

struct ConvGeometry {
    oc: usize,
    ic: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    ih: usize,
    iw: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeometry {
    /// Input row/column read by output position `o` and kernel offset `k`,
    /// or `None` when it falls in the zero padding.
    #[inline]
    fn source(&self, o: usize, k: usize, extent: usize) -> Option<usize> {
        let pos = o * self.stride + k;
        if pos < self.pad || pos - self.pad >= extent {
            None
        } else {
            Some(pos - self.pad)
        }
    }
}
