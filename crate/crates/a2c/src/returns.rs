/// n-step bootstrapped returns `R_t = r_t + γ (1 - done_t) R_{t+1}`, with
/// `R_T = bootstrap_value`.
pub fn compute_returns(rewards: &[f64], dones: &[bool], bootstrap_value: f64, gamma: f64) -> Vec<f64> {
    assert_eq!(rewards.len(), dones.len(), "rewards and dones differ in length");
    let mut out = vec![0.0; rewards.len()];
    let mut next = bootstrap_value;
    for t in (0..rewards.len()).rev() {
        next = rewards[t] + if dones[t] { 0.0 } else { gamma * next };
        out[t] = next;
    }
    out
}
