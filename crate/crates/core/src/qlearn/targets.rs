//! Bootstrap targets, the squared Bellman loss, and target-network blending.

use super::exploration::{argmax, max_value};
use crate::ad::{self, NetParams, NetShape};
use crate::error::{ensure_len, Error, Result};
use crate::replay::Batch;

fn check_batch(shape: &NetShape, batch: &Batch) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    ensure_len("batch observation width", shape.input_dim, batch.obs_dim)
}

/// `r + gamma * max_a' Q_target(s', a')`, without bootstrap on terminal rows.
pub fn dqn_targets(shape: &NetShape, batch: &Batch, target: &NetParams, gamma: f64) -> Result<Vec<f64>> {
    check_batch(shape, batch)?;
    let next_q = shape.forward_batch(target, &batch.next_states, batch.len())?;
    Ok(targets_from(batch, gamma, |j| {
        max_value(&next_q[j * shape.output_dim..(j + 1) * shape.output_dim])
    }))
}

/// Decoupled target: the active network picks the next action, the target
/// network evaluates it.
pub fn ddqn_targets(
    shape: &NetShape,
    batch: &Batch,
    active: &NetParams,
    target: &NetParams,
    gamma: f64,
) -> Result<Vec<f64>> {
    check_batch(shape, batch)?;
    let n = batch.len();
    let select = shape.forward_batch(active, &batch.next_states, n)?;
    let eval = shape.forward_batch(target, &batch.next_states, n)?;
    let k = shape.output_dim;
    Ok(targets_from(batch, gamma, |j| {
        let a = argmax(&select[j * k..(j + 1) * k]);
        eval[j * k + a]
    }))
}

pub(crate) fn targets_from(batch: &Batch, gamma: f64, bootstrap: impl Fn(usize) -> f64) -> Vec<f64> {
    (0..batch.len())
        .map(|j| {
            if batch.dones[j] {
                batch.rewards[j]
            } else {
                batch.rewards[j] + gamma * bootstrap(j)
            }
        })
        .collect()
}

/// Mean squared gap between `Q(s_j, a_j)` and the constant `targets`, and
/// its gradient with respect to `active`.
pub fn bellman_loss(
    shape: &NetShape,
    batch: &Batch,
    active: &NetParams,
    targets: &[f64],
) -> Result<(f64, Vec<f64>)> {
    check_batch(shape, batch)?;
    ensure_len("targets", batch.len(), targets.len())?;
    ad::grad(shape, active, |tape, p| {
        let states = tape.constant(batch.states.clone(), batch.len(), shape.input_dim)?;
        let q = shape.forward_on_tape(tape, p, states)?;
        let q_sa = tape.gather(q, &batch.actions)?;
        let y = tape.constant(targets.to_vec(), batch.len(), 1)?;
        let diff = tape.sub(q_sa, y)?;
        let sq = tape.square(diff)?;
        tape.mean(sq)
    })
}

/// `tau * active + (1 - tau) * target`, elementwise.
pub fn sync_target(active: &NetParams, target: &NetParams, tau: f64) -> Result<NetParams> {
    let mut out = target.clone();
    polyak_blend(&mut out.values, &active.values, tau)?;
    Ok(out)
}

pub(crate) fn polyak_blend(target: &mut [f64], source: &[f64], tau: f64) -> Result<()> {
    ensure_len("polyak blend", target.len(), source.len())?;
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidInput(format!("tau must lie in (0, 1], got {tau}")));
    }
    if tau == 1.0 {
        target.copy_from_slice(source);
    } else {
        for (t, &s) in target.iter_mut().zip(source) {
            *t = tau * s + (1.0 - tau) * *t;
        }
    }
    Ok(())
}
