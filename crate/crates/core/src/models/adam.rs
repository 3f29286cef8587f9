//! Adam with bias correction, operating on a list of flat parameter tensors.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Clone, Debug)]
pub struct AdamState {
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(tensor_lens: &[usize]) -> Self {
        AdamState {
            step: 0,
            first: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            second: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One Adam update of every tensor in `params` using the matching `grads`.
///
/// Panics if the tensor count or any tensor length disagrees with the state.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut AdamState,
    cfg: &AdamConfig,
) {
    assert_eq!(params.len(), state.first.len(), "tensor count");
    assert_eq!(grads.len(), state.first.len(), "gradient count");
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let step_size = cfg.learning_rate / bc1;
    let bc2_sqrt = bc2.sqrt();
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first.iter_mut())
        .zip(state.second.iter_mut())
    {
        assert_eq!(p.len(), m.len(), "parameter length");
        assert_eq!(g.len(), m.len(), "gradient length");
        for (((pi, &gi), mi), vi) in p
            .iter_mut()
            .zip(g.iter())
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
            *pi -= step_size * *mi / (vi.sqrt() / bc2_sqrt + cfg.eps);
        }
    }
}
