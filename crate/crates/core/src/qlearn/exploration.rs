use rand::Rng;

use super::AgentConfig;

/// Linear decay from `epsilon_start` at episode 0 to `epsilon_end` at
/// `epsilon_decay_episodes`, constant afterwards.
pub fn epsilon_at(episode: usize, cfg: &AgentConfig) -> f64 {
    let decay = cfg.epsilon_decay_episodes;
    if episode >= decay {
        return cfg.epsilon_end;
    }
    let frac = episode as f64 / decay as f64;
    cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn max_value(values: &[f64]) -> f64 {
    values[argmax(values)]
}

/// Greedy action with probability `1 - epsilon`, uniform random otherwise.
pub fn epsilon_greedy<R: Rng + ?Sized>(q_values: &[f64], epsilon: f64, rng: &mut R) -> usize {
    assert!(!q_values.is_empty(), "epsilon_greedy needs at least one action");
    let explore = rng.random::<f64>() < epsilon;
    if explore {
        rng.random_range(0..q_values.len())
    } else {
        argmax(q_values)
    }
}
