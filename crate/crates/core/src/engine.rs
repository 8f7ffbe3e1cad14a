//! Round orchestration: local training, update collection, history
//! tracking, aggregation, and the ex-post stage.
//!
//! Every client starts each round from the current global model, trains
//! locally, and submits its parameter delta. Malicious clients train on
//! their poisoned shard and scale the delta in the adversarial round (and
//! every later round in repeated mode); otherwise they behave benignly.
//! Histories accumulate the submitted deltas as a running sum, which is
//! what the similarity stage consumes.

use crate::aggregation::Aggregator;
use crate::cert::{clip_and_perturb, ExPostConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{local_train, param_dim, TrainConfig};
use crate::param::ParamVector;
use crate::seeds::stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Benign,
    Malicious,
}

/// One simulated client.
#[derive(Clone, Debug)]
pub struct ClientState {
    pub id: usize,
    pub data: Dataset,
    /// Poisoned variant of `data`; present only for attackers.
    pub poisoned: Option<Dataset>,
    /// Running sum of all submitted updates.
    pub history: ParamVector,
    pub role: Role,
}

impl ClientState {
    pub fn benign(id: usize, data: Dataset, dim: usize) -> Self {
        Self {
            id,
            data,
            poisoned: None,
            history: ParamVector::zeros(dim),
            role: Role::Benign,
        }
    }

    pub fn malicious(id: usize, data: Dataset, poisoned: Dataset, dim: usize) -> Self {
        Self {
            id,
            data,
            poisoned: Some(poisoned),
            history: ParamVector::zeros(dim),
            role: Role::Malicious,
        }
    }
}

/// When attackers fire and how hard they scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttackSchedule {
    pub scale_factor: f64,
    pub adversarial_round: usize,
    /// Single-shot by default; with `repeat` the attack fires every round
    /// from the adversarial round on.
    pub repeat: bool,
}

impl AttackSchedule {
    pub fn active(&self, t: usize) -> bool {
        if self.repeat {
            t >= self.adversarial_round
        } else {
            t == self.adversarial_round
        }
    }
}

/// Everything recorded about one round.
#[derive(Clone, Debug)]
pub struct RoundLedger {
    pub round: usize,
    /// Submitted updates in client-id order (scale factor included).
    pub updates: Vec<ParamVector>,
    /// Aggregation weights actually applied.
    pub weights: Vec<f64>,
    pub global_before: ParamVector,
    /// Global model right after aggregation, before clip and noise.
    pub global_pre_clip: ParamVector,
    pub global_after: ParamVector,
}

/// Result of a full run.
#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub final_global: ParamVector,
    pub ledgers: Vec<RoundLedger>,
    /// Per-client weights from the last aggregation (size-proportional if
    /// no round ran).
    pub final_weights: Vec<f64>,
}

/// A configured federation ready to run.
pub struct FlExperiment {
    pub clients: Vec<ClientState>,
    pub aggregator: Aggregator,
    pub train: TrainConfig,
    pub attack: Option<AttackSchedule>,
    pub expost: ExPostConfig,
    pub master_seed: u64,
    dim: usize,
}

impl FlExperiment {
    pub fn new(
        clients: Vec<ClientState>,
        aggregator: Aggregator,
        train: TrainConfig,
        attack: Option<AttackSchedule>,
        expost: ExPostConfig,
        master_seed: u64,
    ) -> Self {
        assert!(!clients.is_empty(), "need at least one client");
        let dim = param_dim(clients[0].data.num_classes, clients[0].data.num_features);
        Self {
            clients,
            aggregator,
            train,
            attack,
            expost,
            master_seed,
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn sizes(&self) -> Vec<f64> {
        self.clients.iter().map(|c| c.data.len() as f64).collect()
    }

    /// One round: local training for every client in id order, history
    /// update, and aggregation. Returns the post-aggregation global model
    /// (ex-post stage not yet applied) and the ledger entry.
    pub fn run_round(
        &mut self,
        t: usize,
        global: &ParamVector,
    ) -> Result<(ParamVector, RoundLedger)> {
        assert!(t >= 1, "rounds are 1-based");
        assert_eq!(global.dim(), self.dim, "global model dimension mismatch");
        let mut updates = Vec::with_capacity(self.clients.len());
        for client in &mut self.clients {
            let attacking =
                client.role == Role::Malicious && self.attack.is_some_and(|a| a.active(t));
            let data = if attacking {
                client
                    .poisoned
                    .as_ref()
                    .expect("malicious client without a poisoned shard")
            } else {
                &client.data
            };
            let mut rng = stream(
                self.master_seed,
                "local-train",
                &[client.id as u64, t as u64],
            );
            let trained = local_train(global, &data.samples, &self.train, &mut rng);
            let mut delta = trained.sub(global);
            if attacking {
                let alpha = self.attack.map(|a| a.scale_factor).unwrap_or(1.0);
                delta = delta.scaled(alpha);
            }
            client.history.add_assign(&delta);
            updates.push(delta);
        }

        let histories: Vec<ParamVector> = self.clients.iter().map(|c| c.history.clone()).collect();
        let sizes = self.sizes();
        let mut agg_rng = stream(self.master_seed, "aggregator-noise", &[t as u64]);
        let (aggregate, weights) =
            self.aggregator
                .aggregate(&updates, &histories, &sizes, &mut agg_rng)?;
        let new_global = global.add(&aggregate);
        let ledger = RoundLedger {
            round: t,
            updates,
            weights,
            global_before: global.clone(),
            global_pre_clip: new_global.clone(),
            global_after: new_global.clone(), // finalized by the caller
        };
        Ok((new_global, ledger))
    }

    /// Runs `rounds` full rounds from a zero-initialized global model,
    /// applying the ex-post stage after each aggregation (no noise in the
    /// final round). Aborts if the global model stops being finite.
    pub fn run(&mut self, rounds: usize) -> Result<ExperimentResult> {
        let mut global = ParamVector::zeros(self.dim);
        let mut ledgers = Vec::with_capacity(rounds);
        for t in 1..=rounds {
            let (aggregated, mut ledger) = self.run_round(t, &global)?;
            let mut noise_rng = stream(self.master_seed, "expost-noise", &[t as u64]);
            global = clip_and_perturb(&aggregated, t, rounds, &self.expost, &mut noise_rng);
            if !global.is_finite() {
                return Err(Error::NonFinite(t));
            }
            ledger.global_after = global.clone();
            ledgers.push(ledger);
        }
        let final_weights = match ledgers.last() {
            Some(l) => l.weights.clone(),
            None => crate::aggregation::size_weights(&self.sizes()),
        };
        Ok(ExperimentResult {
            final_global: global,
            ledgers,
            final_weights,
        })
    }
}
