/// Generalized advantage estimation over a flat sequence of transitions.
///
/// `dones[t]` marks the last transition of an episode; the value after it is
/// taken as zero. Truncated episodes should fold `γ·V(s_T)` into their last
/// reward before calling this. Returns `(advantages, returns)`.
pub fn compute_gae(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n, "misaligned GAE inputs");
    let mut adv = vec![0.0; n];
    let mut next_value = 0.0;
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        adv[t] = delta + gamma * lambda * live * next_adv;
        next_value = values[t];
        next_adv = adv[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Shifts and scales to zero mean, unit variance. Batches of one are only
/// centred.
pub fn normalize_advantages(adv: &mut [f64]) {
    let n = adv.len();
    if n == 0 {
        return;
    }
    let mean = adv.iter().sum::<f64>() / n as f64;
    for a in adv.iter_mut() {
        *a -= mean;
    }
    if n > 1 {
        let std = (adv.iter().map(|a| a * a).sum::<f64>() / n as f64).sqrt();
        if std > 1e-12 {
            for a in adv.iter_mut() {
                *a /= std;
            }
        }
    }
}
