//! Advantage estimation and the clipped policy-gradient update, plus the
//! Trainer that ties rollout collection and optimization into a seeded,
//! resumable loop.

use super::{
    collect_rollout, stream_rng, EpisodeSetup, EpisodeStats, RolloutOptions, TrainConfig,
    TransitionBatch, STREAM_PARAM_INIT, STREAM_UPDATE,
};
use crate::error::{Result, SwarmError};
use crate::physics::WorldConfig;
use crate::policy::{forward_policy, forward_value, Adam, GradientBuffer, Mlp};
use crate::rewards::{RewardConfig, TaskSpec};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaeRow {
    pub advantage: f64,
    pub value_target: f64,
}

/// Generalized advantage estimation over each agent's own trajectory.
///
/// Chains break at excluded transitions: the accumulator restarts, while
/// the one-step bootstrap still uses the next recorded critic value (the
/// critic saw that state even if the action was overridden). Advantages
/// are returned raw; standardization happens inside the update.
pub fn compute_gae(
    batch: &TransitionBatch,
    gamma: f64,
    lambda: f64,
) -> Result<Vec<Vec<Option<GaeRow>>>> {
    let in_unit = |v: f64| v > 0.0 && v <= 1.0;
    if !in_unit(gamma) || !in_unit(lambda) {
        return Err(SwarmError::InvalidConfig("gamma and lambda must lie in (0,1]".into()));
    }
    let mut out = Vec::with_capacity(batch.trajectories.len());
    for traj in &batch.trajectories {
        for w in traj.steps.windows(2) {
            if w[1].step <= w[0].step || w[1].agent != w[0].agent {
                return Err(SwarmError::InvalidState(
                    "trajectory is not in per-agent time order".into(),
                ));
            }
        }
        let n = traj.steps.len();
        let mut rows: Vec<Option<GaeRow>> = vec![None; n];
        let mut gae = 0.0;
        for t in (0..n).rev() {
            let s = &traj.steps[t];
            if s.excluded {
                gae = 0.0;
                continue;
            }
            let next_value = if t + 1 < n { traj.steps[t + 1].value } else { 0.0 };
            let not_done = if s.done { 0.0 } else { 1.0 };
            let delta = s.reward + gamma * next_value * not_done - s.value;
            let carry = if s.done || t + 1 >= n || traj.steps[t + 1].excluded {
                0.0
            } else {
                gae
            };
            gae = delta + gamma * lambda * carry;
            rows[t] = Some(GaeRow { advantage: gae, value_target: gae + s.value });
        }
        out.push(rows);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoStats {
    pub actor_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub transitions: usize,
}

struct Sample<'a> {
    obs: &'a [f64],
    action: usize,
    log_prob_old: f64,
    advantage: f64,
    target: f64,
}

/// One clipped-surrogate update over the included transitions. Returns
/// fresh parameters; the inputs are never mutated.
pub fn ppo_update(
    actor: &Mlp,
    critic: &Mlp,
    opt_actor: &mut Adam,
    opt_critic: &mut Adam,
    batch: &TransitionBatch,
    gae: &[Vec<Option<GaeRow>>],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Mlp, Mlp, PpoStats)> {
    cfg.validate()?;
    if gae.len() != batch.trajectories.len() {
        return Err(SwarmError::ShapeMismatch("advantages do not match the batch".into()));
    }
    let mut samples: Vec<Sample> = Vec::new();
    for (traj, rows) in batch.trajectories.iter().zip(gae) {
        if rows.len() != traj.steps.len() {
            return Err(SwarmError::ShapeMismatch("advantages do not match the batch".into()));
        }
        for (s, row) in traj.steps.iter().zip(rows) {
            match row {
                Some(row) => {
                    debug_assert!(!s.excluded);
                    samples.push(Sample {
                        obs: &s.obs,
                        action: s.action.index(),
                        log_prob_old: s.log_prob,
                        advantage: row.advantage,
                        target: row.value_target,
                    });
                }
                None => debug_assert!(s.excluded),
            }
        }
    }
    if samples.is_empty() {
        return Err(SwarmError::InvalidState(
            "no trainable transitions in the update batch".into(),
        ));
    }

    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n;
    let scale = var.sqrt() + 1e-8;
    for s in &mut samples {
        s.advantage = (s.advantage - mean) / scale;
    }

    let mut new_actor = actor.clone();
    let mut new_critic = critic.clone();
    let mut stats = PpoStats {
        actor_loss: 0.0,
        value_loss: 0.0,
        entropy: 0.0,
        clip_fraction: 0.0,
        approx_kl: 0.0,
        transitions: samples.len(),
    };
    let mut seen = 0usize;

    let mut order: Vec<usize> = (0..samples.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch) {
            let mut grad_actor = GradientBuffer::zeros_like(&new_actor);
            let mut grad_critic = GradientBuffer::zeros_like(&new_critic);
            for &k in chunk {
                let s = &samples[k];
                let (dist, cache) = forward_policy(&new_actor, s.obs)?;
                let log_prob = dist.probs[s.action].ln();
                let ratio = (log_prob - s.log_prob_old).exp();
                let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
                let entropy = dist.entropy();

                // gradient flows only while the unclipped branch is active
                let gated = (ratio > 1.0 + cfg.clip && s.advantage > 0.0)
                    || (ratio < 1.0 - cfg.clip && s.advantage < 0.0);
                let mut dout = [0.0f64; 4];
                if !gated {
                    let coef = -s.advantage * ratio;
                    for a in 0..4 {
                        let onehot = if a == s.action { 1.0 } else { 0.0 };
                        dout[a] = coef * (onehot - dist.probs[a]);
                    }
                }
                for a in 0..4 {
                    let p = dist.probs[a];
                    if p > 0.0 {
                        dout[a] += cfg.entropy_weight * p * (p.ln() + entropy);
                    }
                }
                grad_actor.accumulate(&new_actor.backward(&cache, &dout)?)?;

                let (value, vcache) = forward_value(&new_critic, s.obs)?;
                grad_critic.accumulate(&new_critic.backward(&vcache, &[value - s.target])?)?;

                stats.actor_loss -= (ratio * s.advantage).min(clipped * s.advantage);
                stats.value_loss += 0.5 * (value - s.target).powi(2);
                stats.entropy += entropy;
                if (ratio - 1.0).abs() > cfg.clip {
                    stats.clip_fraction += 1.0;
                }
                stats.approx_kl += s.log_prob_old - log_prob;
                seen += 1;
            }
            let inv = 1.0 / chunk.len() as f64;
            grad_actor.scale(inv);
            grad_critic.scale(inv);
            opt_actor.apply(&mut new_actor, &grad_actor)?;
            opt_critic.apply(&mut new_critic, &grad_critic)?;
        }
    }

    let inv = 1.0 / seen as f64;
    stats.actor_loss *= inv;
    stats.value_loss *= inv;
    stats.entropy *= inv;
    stats.clip_fraction *= inv;
    stats.approx_kl *= inv;
    let finite = stats.actor_loss.is_finite()
        && stats.value_loss.is_finite()
        && new_actor.flatten().iter().all(|v| v.is_finite())
        && new_critic.flatten().iter().all(|v| v.is_finite());
    if !finite {
        return Err(SwarmError::InvalidState(
            "training diverged: non-finite loss or parameters".into(),
        ));
    }
    Ok((new_actor, new_critic, stats))
}

pub const TRAINER_CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainerCheckpoint {
    pub version: u32,
    pub episode: u64,
    pub update: u64,
    pub actor: Mlp,
    pub critic: Mlp,
    pub opt_actor: Adam,
    pub opt_critic: Adam,
}

impl TrainerCheckpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<TrainerCheckpoint> {
        let ck: TrainerCheckpoint = serde_json::from_str(text)
            .map_err(|e| SwarmError::BadCheckpoint(format!("unreadable checkpoint: {e}")))?;
        if ck.version != TRAINER_CHECKPOINT_VERSION {
            return Err(SwarmError::BadCheckpoint(format!(
                "checkpoint version {} unsupported (expected {})",
                ck.version, TRAINER_CHECKPOINT_VERSION
            )));
        }
        Ok(ck)
    }
}

/// Seeded training loop state. All randomness is derived from the config
/// seed through fixed stream ids, so a run is bit-reproducible and a resume
/// from any update boundary continues the original run exactly.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub actor: Mlp,
    pub critic: Mlp,
    pub opt_actor: Adam,
    pub opt_critic: Adam,
    pub episode: u64,
    pub update: u64,
}

impl Trainer {
    pub fn new(task: &TaskSpec, train: &TrainConfig) -> Result<Trainer> {
        train.validate()?;
        let width = task.observation_width();
        let mut rng = stream_rng(train.seed, STREAM_PARAM_INIT);
        let actor = Mlp::actor(width, &mut rng);
        let critic = Mlp::critic(width, &mut rng);
        let opt_actor = Adam::new(train.learning_rate, &actor);
        let opt_critic = Adam::new(train.learning_rate, &critic);
        Ok(Trainer { actor, critic, opt_actor, opt_critic, episode: 0, update: 0 })
    }

    pub fn run_update(
        &mut self,
        task: &TaskSpec,
        setup: &EpisodeSetup,
        world: &WorldConfig,
        reward: &RewardConfig,
        train: &TrainConfig,
    ) -> Result<(Vec<EpisodeStats>, PpoStats)> {
        let opts = RolloutOptions {
            actor: &self.actor,
            critic: &self.critic,
            task,
            setup,
            world,
            reward,
            reward_mode: Some(train.reward_mode),
            mirrored_teams: &[],
            malfunction: 0.0,
            record_steps: false,
        };
        let batch =
            collect_rollout(&opts, train.seed, self.episode, train.episodes_per_update as u64)?;
        let gae = compute_gae(&batch, train.gamma, train.lambda)?;
        let mut rng = stream_rng(train.seed, STREAM_UPDATE + self.update);
        let (actor, critic, stats) = ppo_update(
            &self.actor,
            &self.critic,
            &mut self.opt_actor,
            &mut self.opt_critic,
            &batch,
            &gae,
            train,
            &mut rng,
        )?;
        self.actor = actor;
        self.critic = critic;
        self.episode += train.episodes_per_update as u64;
        self.update += 1;
        Ok((batch.episodes, stats))
    }

    pub fn checkpoint(&self) -> TrainerCheckpoint {
        TrainerCheckpoint {
            version: TRAINER_CHECKPOINT_VERSION,
            episode: self.episode,
            update: self.update,
            actor: self.actor.clone(),
            critic: self.critic.clone(),
            opt_actor: self.opt_actor.clone(),
            opt_critic: self.opt_critic.clone(),
        }
    }

    pub fn from_checkpoint(ck: TrainerCheckpoint) -> Result<Trainer> {
        if ck.version != TRAINER_CHECKPOINT_VERSION {
            return Err(SwarmError::BadCheckpoint(format!(
                "checkpoint version {} unsupported (expected {})",
                ck.version, TRAINER_CHECKPOINT_VERSION
            )));
        }
        ck.actor.validate().map_err(|e| SwarmError::BadCheckpoint(e.to_string()))?;
        ck.critic.validate().map_err(|e| SwarmError::BadCheckpoint(e.to_string()))?;
        let ok = ck.opt_actor.m.len() == ck.actor.param_count()
            && ck.opt_actor.v.len() == ck.actor.param_count()
            && ck.opt_critic.m.len() == ck.critic.param_count()
            && ck.opt_critic.v.len() == ck.critic.param_count();
        if !ok {
            return Err(SwarmError::BadCheckpoint(
                "optimizer state does not match network shapes".into(),
            ));
        }
        Ok(Trainer {
            actor: ck.actor,
            critic: ck.critic,
            opt_actor: ck.opt_actor,
            opt_critic: ck.opt_critic,
            episode: ck.episode,
            update: ck.update,
        })
    }
}
