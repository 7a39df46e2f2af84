/// Geometric checkpoint times `1 = t_0 < t_1 < ... <= horizon`, with
/// `t_{k+1} = max(t_k + 1, round(ratio * t_k))`, always ending at `horizon`.
pub fn checkpoint_schedule(horizon: u64, ratio: f64) -> Vec<u64> {
    let mut out = Vec::new();
    if horizon == 0 {
        return out;
    }
    let mut t = 1u64;
    while t < horizon {
        out.push(t);
        t = (t + 1).max((t as f64 * ratio).round() as u64);
    }
    out.push(horizon);
    out
}
