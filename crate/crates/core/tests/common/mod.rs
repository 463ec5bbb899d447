use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stochsec::graph::{Layer, NetworkSpec};

/// conv -> leaky -> [conv -> leaky] -> dense -> leaky -> dense, with random
/// shapes, strides and padding.
pub fn random_spec(rng: &mut ChaCha8Rng) -> NetworkSpec {
    let c = rng.random_range(1..=2);
    let h = rng.random_range(4..=6);
    let w = rng.random_range(4..=6);
    let mut layers = Vec::new();
    let (mut ch, mut hh, mut ww) = (c, h, w);
    for _ in 0..rng.random_range(1..=2) {
        let out = rng.random_range(1..=3);
        let k = rng.random_range(1..=3).min(hh).min(ww);
        let stride = rng.random_range(1..=2);
        let pad = rng.random_range(0..=1);
        layers.push(Layer::conv2d(out, ch, k, stride, pad));
        layers.push(Layer::leaky_relu());
        ch = out;
        hh = (hh + 2 * pad - k) / stride + 1;
        ww = (ww + 2 * pad - k) / stride + 1;
    }
    let flat = ch * hh * ww;
    let hidden = rng.random_range(2..=5);
    let outputs = rng.random_range(1..=3);
    layers.extend([
        Layer::dense(flat, hidden),
        Layer::leaky_relu(),
        Layer::dense(hidden, outputs),
    ]);
    NetworkSpec::new(vec![c, h, w], layers)
}
