use std::fmt;
use std::str::FromStr;

use super::GraphError;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

/// One layer of a sequential network.
///
/// Dense layers accept any input shape and treat it as a flat vector of
/// `inputs` values. Convolutions expect `[channels, height, width]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Conv2d {
        out_channels: usize,
        in_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        stride: usize,
        padding: usize,
    },
    LeakyRelu {
        negative_slope: f64,
    },
    /// Sums every element into a single scalar.
    SqueezeSum,
}

impl Layer {
    pub fn dense(inputs: usize, outputs: usize) -> Self {
        Layer::Dense { inputs, outputs }
    }

    pub fn conv2d(out_channels: usize, in_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Layer::Conv2d {
            out_channels,
            in_channels,
            kernel_h: kernel,
            kernel_w: kernel,
            stride,
            padding,
        }
    }

    pub fn leaky_relu() -> Self {
        Layer::LeakyRelu {
            negative_slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    /// Weight and bias shapes, if the layer has parameters.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            Layer::Dense { inputs, outputs } => Some((vec![outputs, inputs], vec![outputs])),
            Layer::Conv2d {
                out_channels,
                in_channels,
                kernel_h,
                kernel_w,
                ..
            } => Some((vec![out_channels, in_channels, kernel_h, kernel_w], vec![out_channels])),
            Layer::LeakyRelu { .. } | Layer::SqueezeSum => None,
        }
    }

    pub fn fan_in(&self) -> usize {
        match *self {
            Layer::Dense { inputs, .. } => inputs,
            Layer::Conv2d {
                in_channels,
                kernel_h,
                kernel_w,
                ..
            } => in_channels * kernel_h * kernel_w,
            _ => 0,
        }
    }

    fn output_shape(&self, index: usize, input: &[usize]) -> Result<Vec<usize>, GraphError> {
        let numel: usize = input.iter().product();
        let mismatch = |reason: String| GraphError::ShapeMismatch { layer: index, reason };
        match *self {
            Layer::Dense { inputs, outputs } => {
                if inputs == 0 || outputs == 0 {
                    return Err(mismatch("dense extents must be positive".into()));
                }
                if numel != inputs {
                    return Err(mismatch(format!(
                        "dense expects {inputs} inputs, previous output has shape {input:?}"
                    )));
                }
                Ok(vec![outputs])
            }
            Layer::Conv2d {
                out_channels,
                in_channels,
                kernel_h,
                kernel_w,
                stride,
                padding,
            } => {
                if out_channels == 0 || in_channels == 0 || kernel_h == 0 || kernel_w == 0 {
                    return Err(mismatch("conv extents must be positive".into()));
                }
                if stride == 0 {
                    return Err(mismatch("conv stride must be positive".into()));
                }
                let &[c, h, w] = input else {
                    return Err(mismatch(format!(
                        "conv expects a [channels, height, width] input, got {input:?}"
                    )));
                };
                if c != in_channels {
                    return Err(mismatch(format!("conv expects {in_channels} input channels, got {c}")));
                }
                let (ph, pw) = (h + 2 * padding, w + 2 * padding);
                if ph < kernel_h || pw < kernel_w {
                    return Err(mismatch(format!(
                        "kernel {kernel_h}x{kernel_w} larger than padded input {ph}x{pw}"
                    )));
                }
                Ok(vec![
                    out_channels,
                    (ph - kernel_h) / stride + 1,
                    (pw - kernel_w) / stride + 1,
                ])
            }
            Layer::LeakyRelu { negative_slope } => {
                if !negative_slope.is_finite() {
                    return Err(mismatch("leaky relu slope must be finite".into()));
                }
                Ok(input.to_vec())
            }
            Layer::SqueezeSum => Ok(vec![1]),
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Layer::Dense { inputs, outputs } => write!(f, "dense({inputs},{outputs})"),
            Layer::Conv2d {
                out_channels,
                in_channels,
                kernel_h,
                kernel_w,
                stride,
                padding,
            } => write!(
                f,
                "conv2d({out_channels},{in_channels},{kernel_h},{kernel_w},{stride},{padding})"
            ),
            Layer::LeakyRelu { negative_slope } => write!(f, "leaky_relu({negative_slope})"),
            Layer::SqueezeSum => write!(f, "squeeze_sum"),
        }
    }
}

impl FromStr for Layer {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let err = || GraphError::Parse(s.to_string());
        if s == "squeeze_sum" {
            return Ok(Layer::SqueezeSum);
        }
        let (name, rest) = s.split_once('(').ok_or_else(err)?;
        let args = rest.strip_suffix(')').ok_or_else(err)?;
        let args: Vec<&str> = args.split(',').map(str::trim).collect();
        let ints = || -> Result<Vec<usize>, GraphError> {
            args.iter().map(|a| a.parse::<usize>().map_err(|_| err())).collect()
        };
        match name.trim() {
            "dense" => match ints()?.as_slice() {
                &[inputs, outputs] => Ok(Layer::Dense { inputs, outputs }),
                _ => Err(err()),
            },
            "conv2d" => match *ints()?.as_slice() {
                [o, i, kh, kw, stride] => Ok(Layer::Conv2d {
                    out_channels: o,
                    in_channels: i,
                    kernel_h: kh,
                    kernel_w: kw,
                    stride,
                    padding: 0,
                }),
                [o, i, kh, kw, stride, padding] => Ok(Layer::Conv2d {
                    out_channels: o,
                    in_channels: i,
                    kernel_h: kh,
                    kernel_w: kw,
                    stride,
                    padding,
                }),
                _ => Err(err()),
            },
            "leaky_relu" => match args.as_slice() {
                [""] => Ok(Layer::leaky_relu()),
                [slope] => Ok(Layer::LeakyRelu {
                    negative_slope: slope.parse().map_err(|_| err())?,
                }),
                _ => Err(err()),
            },
            _ => Err(err()),
        }
    }
}

/// Input shape plus an ordered list of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub input_shape: Vec<usize>,
    pub layers: Vec<Layer>,
}

impl NetworkSpec {
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>) -> Self {
        Self { input_shape, layers }
    }

    /// Dense stack `input -> hidden.. -> outputs` with leaky ReLUs between.
    pub fn mlp(input: usize, hidden: &[usize], outputs: usize, slope: f64) -> Self {
        let mut layers = Vec::new();
        let mut prev = input;
        for &h in hidden {
            layers.push(Layer::dense(prev, h));
            layers.push(Layer::LeakyRelu { negative_slope: slope });
            prev = h;
        }
        layers.push(Layer::dense(prev, outputs));
        Self::new(vec![input], layers)
    }

    /// The full-scale 32x32x3 convolutional energy network: five convolutions
    /// (3x3 stride 1, then 4x4 stride 2 three times, then a 4x4 valid
    /// convolution down to one channel) with leaky ReLUs, summed to a scalar.
    pub fn conv_energy_32() -> Self {
        let lr = Layer::leaky_relu;
        Self::new(
            vec![3, 32, 32],
            vec![
                Layer::conv2d(32, 3, 3, 1, 1),
                lr(),
                Layer::conv2d(64, 32, 4, 2, 1),
                lr(),
                Layer::conv2d(128, 64, 4, 2, 1),
                lr(),
                Layer::conv2d(256, 128, 4, 2, 1),
                lr(),
                Layer::conv2d(1, 256, 4, 1, 0),
                Layer::SqueezeSum,
            ],
        )
    }

    /// Shapes of the input followed by every layer output.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>, GraphError> {
        if self.layers.is_empty() {
            return Err(GraphError::Empty);
        }
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(GraphError::ShapeMismatch {
                layer: 0,
                reason: format!("invalid input shape {:?}", self.input_shape),
            });
        }
        let mut shapes = vec![self.input_shape.clone()];
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer.output_shape(i, shapes.last().expect("non-empty"))?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn output_len(&self) -> Result<usize, GraphError> {
        Ok(self.shapes()?.last().map_or(0, |s| s.iter().product()))
    }

    /// Shapes of all parameter tensors in storage order (weight, bias per layer).
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        self.layers
            .iter()
            .filter_map(Layer::param_shapes)
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes().iter().map(|s| s.iter().product::<usize>()).sum()
    }

    /// Compact textual form, e.g. `dense(2,16) leaky_relu(0.2) dense(16,1)`.
    pub fn layers_string(&self) -> String {
        self.layers
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn parse(input_shape: &str, layers: &str) -> Result<Self, GraphError> {
        let input_shape = input_shape
            .split(|c: char| c == 'x' || c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| GraphError::Parse(input_shape.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        // split on whitespace that is not inside parentheses
        let mut out = Vec::new();
        let mut depth = 0usize;
        let mut current = String::new();
        for c in layers.chars() {
            match c {
                '(' => depth += 1,
                ')' => depth = depth.saturating_sub(1),
                _ => {}
            }
            if c.is_whitespace() && depth == 0 {
                if !current.is_empty() {
                    out.push(current.parse()?);
                    current.clear();
                }
            } else {
                current.push(c);
            }
        }
        if !current.is_empty() {
            out.push(current.parse()?);
        }
        Ok(Self::new(input_shape, out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_violation_names_layer() {
        let spec = NetworkSpec::new(vec![2], vec![Layer::dense(2, 3), Layer::dense(4, 1)]);
        match spec.shapes() {
            Err(GraphError::ShapeMismatch { layer, .. }) => assert_eq!(layer, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn conv_reference_shapes_compose_to_scalar() {
        let shapes = NetworkSpec::conv_energy_32().shapes().unwrap();
        assert_eq!(shapes[1], vec![32, 32, 32]);
        assert_eq!(shapes[3], vec![64, 16, 16]);
        assert_eq!(shapes[5], vec![128, 8, 8]);
        assert_eq!(shapes[7], vec![256, 4, 4]);
        assert_eq!(shapes[9], vec![1, 1, 1]);
        assert_eq!(shapes.last().unwrap(), &vec![1]);
    }

    #[test]
    fn conv_reference_param_count_matches_hand_count() {
        // W and B extents of the five convolutions:
        // 32*3*3*3 + 32, 64*32*4*4 + 64, 128*64*4*4 + 128, 256*128*4*4 + 256, 1*256*4*4 + 1
        let hand = (864 + 32) + (32_768 + 64) + (131_072 + 128) + (524_288 + 256) + (4_096 + 1);
        assert_eq!(hand, 693_569);
        assert_eq!(NetworkSpec::conv_energy_32().param_count(), hand);
    }

    #[test]
    fn text_round_trip() {
        let spec = NetworkSpec::conv_energy_32();
        let parsed = NetworkSpec::parse("3x32x32", &spec.layers_string()).unwrap();
        assert_eq!(parsed, spec);
        let mlp = NetworkSpec::parse("2", "dense(2,8) leaky_relu(0.1) dense(8,1)").unwrap();
        assert_eq!(mlp, NetworkSpec::mlp(2, &[8], 1, 0.1));
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(NetworkSpec::parse("2", "dense(2)").is_err());
        assert!(NetworkSpec::parse("2", "relu(2,3)").is_err());
    }
}
