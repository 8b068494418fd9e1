#![allow(dead_code)]

use diotm_core::nn::{ParameterStore, TransportNet, ValueNet};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Small value net with random weights *and* biases.
pub fn random_value_net(rng: &mut ChaCha8Rng) -> (ValueNet, ParameterStore) {
    let width = rng.gen_range(2..6);
    let net = ValueNet::new(2, width, 4).unwrap();
    let params = randomize(net.init(rng), rng);
    (net, params)
}

pub fn random_transport_net(rng: &mut ChaCha8Rng, z_dim: usize) -> (TransportNet, ParameterStore) {
    let width = rng.gen_range(2..6);
    let net = TransportNet::new(2, width, z_dim).unwrap();
    let params = randomize(net.init(rng), rng);
    (net, params)
}

fn randomize(mut p: ParameterStore, rng: &mut ChaCha8Rng) -> ParameterStore {
    for v in p.values_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    p
}

/// Central differences of `f` in every parameter coordinate.
pub fn central_diff<F: Fn(&ParameterStore) -> f64>(params: &ParameterStore, h: f64, f: F) -> Vec<f64> {
    let mut probe = params.clone();
    (0..params.len())
        .map(|i| {
            let orig = probe.values()[i];
            probe.values_mut()[i] = orig + h;
            let up = f(&probe);
            probe.values_mut()[i] = orig - h;
            let down = f(&probe);
            probe.values_mut()[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(‖b‖, 1e-8)`.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-8);
    diff / scale
}

/// Width-`w` value net computing exactly `V(t, x) = x_k`, using
/// `SiLU(u) − SiLU(−u) = u` at every hidden layer.
pub fn rigged_coordinate_value(width: usize, k: usize) -> (ValueNet, ParameterStore) {
    assert!(width >= 2);
    let net = ValueNet::new(2, width, 4).unwrap();
    let mut p = net.zero_params();
    // layers: 0,1 x-embedding; 2,3 time MLP; 4,5,6 head
    {
        let (w, _) = p.layer_mut(0);
        w[k] = 1.0;
        w[2 + k] = -1.0;
    }
    for layer in [1, 4, 5] {
        let (w, _) = p.layer_mut(layer);
        w[0] = 1.0;
        w[1] = -1.0;
        if layer == 5 || layer == 4 {
            w[width] = -1.0;
            w[width + 1] = 1.0;
        }
    }
    {
        let (w, _) = p.layer_mut(6);
        w[0] = 1.0;
        w[1] = -1.0;
    }
    (net, p)
}

/// Value net whose output is the constant `c` (all weights zero).
pub fn constant_value(c: f64) -> (ValueNet, ParameterStore) {
    let net = ValueNet::new(2, 3, 4).unwrap();
    let mut p = net.zero_params();
    let (_, b) = p.layer_mut(6);
    b[0] = c;
    (net, p)
}
