/// Generalised advantage estimation over a flat rollout.
///
/// `next_values[t]` is `V(s_{t+1})`; it is ignored when `terminated[t]`.
/// `ends[t]` marks the last step of an episode or rollout segment (a
/// termination, a time-limit truncation or the end of the collection
/// window); the recursion never crosses such a boundary.
pub fn gae_advantages(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    terminated: &[bool],
    ends: &[bool],
    gamma: f64,
    lam: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(values.len() == n && next_values.len() == n && terminated.len() == n && ends.len() == n);
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let boot = if terminated[t] { 0.0 } else { gamma * next_values[t] };
        let delta = rewards[t] + boot - values[t];
        let carry = if ends[t] { 0.0 } else { gamma * lam * next_adv };
        adv[t] = delta + carry;
        next_adv = adv[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Shifts and scales `x` to zero mean and unit standard deviation.
pub fn normalize(x: &mut [f64]) {
    let n = x.len();
    if n == 0 {
        return;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    for v in x.iter_mut() {
        *v -= mean;
        if std > 1e-12 {
            *v /= std;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_terminal_step() {
        let (a, r) = gae_advantages(&[2.0], &[0.5], &[9.0], &[true], &[true], 1.0, 0.95);
        assert_eq!(a, vec![1.5]);
        assert_eq!(r, vec![2.0]);
    }

    #[test]
    fn three_step_episode() {
        let (a, _) = gae_advantages(
            &[1.0, 1.0, 1.0],
            &[0.0; 3],
            &[0.0; 3],
            &[false, false, true],
            &[false, false, true],
            1.0,
            1.0,
        );
        assert_eq!(a, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn zero_td_errors_give_zero_advantages() {
        // V(s) = r + gamma V(s') everywhere
        let gamma = 0.9;
        let values = [1.0 + 0.9 * (1.0 + 0.9 * 1.0), 1.0 + 0.9 * 1.0, 1.0];
        let next = [values[1], values[2], 0.0];
        let (a, _) = gae_advantages(&[1.0; 3], &values, &next, &[false, false, true], &[false, false, true], gamma, 0.95);
        assert!(a.iter().all(|x| x.abs() < 1e-12), "{a:?}");
    }

    #[test]
    fn episodes_do_not_mix() {
        let (a, _) = gae_advantages(
            &[1.0, 100.0],
            &[0.0, 0.0],
            &[5.0, 0.0],
            &[false, true],
            &[true, true],
            1.0,
            1.0,
        );
        // the first step is truncated and bootstraps from V = 5
        assert_eq!(a, vec![6.0, 100.0]);
    }

    proptest! {
        #[test]
        fn normalized_moments(xs in proptest::collection::vec(-100.0f64..100.0, 2..300)) {
            let mut v = xs.clone();
            let spread = xs.iter().cloned().fold(f64::MIN, f64::max) - xs.iter().cloned().fold(f64::MAX, f64::min);
            prop_assume!(spread > 1e-3);
            normalize(&mut v);
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-10);
            prop_assert!((std - 1.0).abs() < 1e-6);
        }
    }
}
