//! Three-tier topology simulation: edge streams feed fog trainers, a cloud
//! aggregator drives barrier-synchronous federated rounds.
//!
//! Edges perform no computation — they only produce frames — so they are
//! modeled as the per-fog data shards built at construction time. Within a
//! round, fog training tasks run in parallel; everything that crosses the
//! fog↔cloud boundary passes through the wire codec, and an optional
//! transport log records every message for bandwidth and data-locality
//! audits. Results are bit-identical regardless of worker-thread count.

use std::fmt;
use std::ops::Range;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Dataset, Frame, Shard, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::nn::{
    evaluate, init_params, train_local, Dims, HyperParams, ModelParams, DEFAULT_HIDDEN_DIM,
};
use crate::protocol::{aggregate, GlobalModel, ModelUpdate};
use crate::rng::derive_seed;
use crate::wire::{decode, encode, WireMessage};

/// Shape of the simulated deployment plus training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyConfig {
    /// Number of fog nodes (k).
    pub num_fogs: usize,
    /// Edge devices feeding each fog. Edges emit data only, so this is
    /// descriptive: their streams are concatenated into the fog's shard.
    pub edges_per_fog: usize,
    /// Round budget; the run stops earlier if any fog exhausts its stream.
    pub rounds: usize,
    /// Frames consumed per fog per round.
    pub window_size: usize,
    pub hyper: HyperParams,
    pub seed: u64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            num_fogs: 5,
            edges_per_fog: 1,
            rounds: 53,
            window_size: 60,
            hyper: HyperParams::default(),
            seed: 42,
        }
    }
}

impl TopologyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_fogs == 0 {
            return Err(Error::Config("num_fogs must be >= 1".into()));
        }
        if self.edges_per_fog == 0 {
            return Err(Error::Config("edges_per_fog must be >= 1".into()));
        }
        if self.window_size == 0 {
            return Err(Error::Config("window_size must be >= 1".into()));
        }
        // rounds = 0 is allowed: it runs nothing and reports nothing.
        self.hyper.validate().map_err(|e| Error::Config(e.to_string()))
    }
}

/// Per-round training seed: a keyed hash of `(config seed, fog, round)`, so
/// every fog shuffles differently each round yet fully reproducibly.
pub fn round_seed(config_seed: u64, fog_id: u32, round_index: u32) -> u64 {
    derive_seed(config_seed, &[u64::from(fog_id), u64::from(round_index)])
}

/// A participant in the transport log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NodeId {
    Cloud,
    Fog(u32),
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Cloud => write!(f, "cloud"),
            Self::Fog(id) => write!(f, "fog_{id}"),
        }
    }
}

/// One message observed on the (in-process) wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportRecord {
    pub sender: NodeId,
    pub receiver: NodeId,
    pub msg_type: u8,
    pub byte_len: usize,
}

/// A fog node: its shard, the params it currently holds, and the record of
/// consumed windows.
#[derive(Debug, Clone)]
pub struct FogNodeState {
    fog_id: u32,
    shard: Shard,
    current_params: ModelParams,
    /// Consumed windows as index ranges into the shard, in consumption
    /// order. Length equals the window cursor; ranges never overlap.
    archive: Vec<Range<usize>>,
}

impl FogNodeState {
    pub fn fog_id(&self) -> u32 {
        self.fog_id
    }

    pub fn shard(&self) -> &Shard {
        &self.shard
    }

    pub fn current_params(&self) -> &ModelParams {
        &self.current_params
    }

    pub fn archive(&self) -> &[Range<usize>] {
        &self.archive
    }

    fn window(&self, range: &Range<usize>) -> &[Frame] {
        &self.shard.frames()[range.clone()]
    }
}

/// The cloud aggregator: global model, held-out test set, round history.
#[derive(Debug, Clone)]
pub struct CloudState {
    global: GlobalModel,
    test_set: Vec<Frame>,
    history: Vec<RoundReport>,
}

/// Metrics for one completed round; `round_id` counts from 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundReport {
    pub round_id: u32,
    pub global_test_loss: f64,
    pub global_test_accuracy: f64,
    /// Loss of the new global model on each fog's just-consumed window.
    pub per_fog_local_loss: Vec<f64>,
    /// Accuracy of the new global model on each fog's just-consumed window.
    pub per_fog_local_accuracy: Vec<f64>,
}

/// The whole simulated deployment.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: TopologyConfig,
    fogs: Vec<FogNodeState>,
    cloud: CloudState,
    log_transport: bool,
    transport_log: Vec<TransportRecord>,
}

impl Simulation {
    /// Partitions `train` across `config.num_fogs` fogs (seeded permutation,
    /// near-equal contiguous split) and initializes the global model from
    /// `config.seed`.
    pub fn build(config: TopologyConfig, train: &Dataset, test: &Dataset) -> Result<Self> {
        config.validate()?;
        let shards = crate::data::partition(train, config.num_fogs, config.seed)
            .map_err(|e| Error::Config(e.to_string()))?;
        Self::from_shards(config, shards, test)
    }

    /// Builds a simulation from pre-made shards (one per fog, ids 0..k in
    /// order). `build` is the usual entry point; this exists for callers
    /// that need exact control over per-fog streams.
    pub fn from_shards(
        config: TopologyConfig,
        shards: Vec<Shard>,
        test: &Dataset,
    ) -> Result<Self> {
        config.validate()?;
        if shards.len() != config.num_fogs {
            return Err(Error::Config(format!(
                "{} shards for {} fogs",
                shards.len(),
                config.num_fogs
            )));
        }
        for (i, shard) in shards.iter().enumerate() {
            if shard.fog_id() != i as u32 {
                return Err(Error::Config(format!(
                    "shard {i} has fog_id {}",
                    shard.fog_id()
                )));
            }
            if shard.cursor() != 0 {
                return Err(Error::Config(format!(
                    "shard {i} has already been consumed (cursor {})",
                    shard.cursor()
                )));
            }
            if shard.len() < config.window_size {
                return Err(Error::Config(format!(
                    "fog {i} holds {} frames, not enough for one window of {}",
                    shard.len(),
                    config.window_size
                )));
            }
        }
        let feature_dim = shards[0].frames()[0].features.len();
        for shard in &shards {
            if shard
                .frames()
                .iter()
                .any(|f| f.features.len() != feature_dim)
            {
                return Err(Error::Config("shards mix feature dimensions".into()));
            }
        }
        if test.feature_dim() != feature_dim {
            return Err(Error::Config(format!(
                "test set has {}-point frames, training data has {feature_dim}",
                test.feature_dim()
            )));
        }

        let dims = Dims::new(feature_dim, DEFAULT_HIDDEN_DIM, NUM_CLASSES);
        let params = init_params(config.seed, dims)?;
        let fogs = shards
            .into_iter()
            .map(|shard| FogNodeState {
                fog_id: shard.fog_id(),
                shard,
                current_params: params.clone(),
                archive: Vec::new(),
            })
            .collect();
        Ok(Self {
            config,
            fogs,
            cloud: CloudState {
                global: GlobalModel {
                    round_id: 0,
                    params,
                },
                test_set: test.frames().to_vec(),
                history: Vec::new(),
            },
            log_transport: false,
            transport_log: Vec::new(),
        })
    }

    pub fn config(&self) -> &TopologyConfig {
        &self.config
    }

    pub fn global_model(&self) -> &GlobalModel {
        &self.cloud.global
    }

    pub fn history(&self) -> &[RoundReport] {
        &self.cloud.history
    }

    pub fn fogs(&self) -> &[FogNodeState] {
        &self.fogs
    }

    /// Enables or disables transport logging (disabled by default; messages
    /// still pass through the codec either way).
    pub fn set_transport_logging(&mut self, enabled: bool) {
        self.log_transport = enabled;
    }

    pub fn transport_log(&self) -> &[TransportRecord] {
        &self.transport_log
    }

    fn log(&mut self, sender: NodeId, receiver: NodeId, msg_type: u8, byte_len: usize) {
        if self.log_transport {
            self.transport_log.push(TransportRecord {
                sender,
                receiver,
                msg_type,
                byte_len,
            });
        }
    }

    /// Executes one synchronous round: broadcast, parallel local training,
    /// aggregation, evaluation. Fails with [`Error::StreamExhausted`] (before
    /// touching any state) if some fog lacks a full window.
    pub fn run_round(&mut self) -> Result<RoundReport> {
        let round_index = self.cloud.global.round_id;
        let window_size = self.config.window_size;

        for fog in &self.fogs {
            if fog.shard.windows_remaining(window_size) == 0 {
                return Err(Error::StreamExhausted {
                    fog_id: fog.fog_id,
                    cursor: fog.shard.cursor(),
                    len: fog.shard.len(),
                });
            }
        }

        // Phase 1: broadcast. Every fog receives a RoundStart and the current
        // global model as wire frames and decodes them.
        let global_frame = encode(&WireMessage::GlobalModel(self.cloud.global.clone()));
        for i in 0..self.fogs.len() {
            let fog_id = self.fogs[i].fog_id;
            let start = encode(&WireMessage::RoundStart {
                round_id: round_index,
                window_index: self.fogs[i].archive.len() as u32,
            });
            self.log(NodeId::Cloud, NodeId::Fog(fog_id), 1, start.len());
            match decode(&start)? {
                WireMessage::RoundStart { round_id, .. } if round_id == round_index => {}
                other => {
                    return Err(Error::Protocol(format!(
                        "fog {fog_id} expected RoundStart for round {round_index}, got {other:?}"
                    )))
                }
            }

            self.log(NodeId::Cloud, NodeId::Fog(fog_id), 3, global_frame.len());
            match decode(&global_frame)? {
                WireMessage::GlobalModel(g) if g.round_id == round_index => {
                    self.fogs[i].current_params = g.params;
                }
                other => {
                    return Err(Error::Protocol(format!(
                        "fog {fog_id} expected GlobalModel for round {round_index}, got {other:?}"
                    )))
                }
            }
        }

        // Phase 2: each fog consumes its next window (archived immediately)
        // and trains on it. Training runs in parallel; the ordered collect
        // keeps results in fog order regardless of thread count.
        for fog in &mut self.fogs {
            let start = fog.shard.cursor();
            fog.shard
                .next_window(window_size)
                .expect("checked above: a full window remains");
            fog.archive.push(start..start + window_size);
        }

        let hyper = self.config.hyper;
        let config_seed = self.config.seed;
        let train_results: Vec<Result<crate::nn::TrainReport>> = self
            .fogs
            .par_iter()
            .map(|fog| {
                let range = fog.archive.last().expect("window archived above");
                train_local(
                    fog.current_params.clone(),
                    fog.window(range),
                    &hyper,
                    round_seed(config_seed, fog.fog_id, round_index),
                )
            })
            .collect();

        // Phase 3: fogs send ModelUpdate frames; the cloud decodes and
        // aggregates them all (synchronous barrier).
        let mut updates = Vec::with_capacity(self.fogs.len());
        for (i, result) in train_results.into_iter().enumerate() {
            let report = result?;
            let fog_id = self.fogs[i].fog_id;
            self.fogs[i].current_params = report.params.clone();
            let frame = encode(&WireMessage::ModelUpdate(ModelUpdate {
                round_id: round_index,
                fog_id,
                sample_count: window_size as u64,
                params: report.params,
                local_loss: report.loss as f32,
            }));
            self.log(NodeId::Fog(fog_id), NodeId::Cloud, 2, frame.len());
            match decode(&frame)? {
                WireMessage::ModelUpdate(u) if u.round_id == round_index => updates.push(u),
                other => {
                    return Err(Error::Protocol(format!(
                        "cloud expected ModelUpdate for round {round_index}, got {other:?}"
                    )))
                }
            }
        }

        let new_params = aggregate(&updates)?;
        self.cloud.global = GlobalModel {
            round_id: round_index + 1,
            params: new_params,
        };

        // Phase 4: evaluate the new global model on the held-out test set
        // and on each fog's just-consumed window. This is instrumentation by
        // the orchestrator, not traffic: no frames cross the wire for it.
        let test_metrics = evaluate(&self.cloud.global.params, &self.cloud.test_set)?;
        let mut per_fog_local_loss = Vec::with_capacity(self.fogs.len());
        let mut per_fog_local_accuracy = Vec::with_capacity(self.fogs.len());
        for fog in &self.fogs {
            let range = fog.archive.last().expect("window archived this round");
            let m = evaluate(&self.cloud.global.params, fog.window(range))?;
            per_fog_local_loss.push(m.loss);
            per_fog_local_accuracy.push(m.accuracy);
        }

        let report = RoundReport {
            round_id: round_index + 1,
            global_test_loss: test_metrics.loss,
            global_test_accuracy: test_metrics.accuracy,
            per_fog_local_loss,
            per_fog_local_accuracy,
        };
        self.cloud.history.push(report.clone());
        Ok(report)
    }

    /// Runs `min(config.rounds, full windows left on the scarcest fog)`
    /// rounds and returns their reports in order. Leftover partial windows
    /// are never trained on.
    pub fn run(&mut self) -> Result<Vec<RoundReport>> {
        let available = self
            .fogs
            .iter()
            .map(|f| f.shard.windows_remaining(self.config.window_size))
            .min()
            .unwrap_or(0);
        let rounds = self.config.rounds.min(available);
        let mut reports = Vec::with_capacity(rounds);
        for _ in 0..rounds {
            reports.push(self.run_round()?);
        }
        Ok(reports)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::synth_generate;
    use crate::data::Dataset;

    fn small_config(num_fogs: usize, rounds: usize, window: usize) -> TopologyConfig {
        TopologyConfig {
            num_fogs,
            rounds,
            window_size: window,
            hyper: HyperParams {
                local_epochs: 2,
                ..Default::default()
            },
            seed: 7,
            ..Default::default()
        }
    }

    fn small_data() -> (Dataset, Dataset) {
        (
            synth_generate(120, 11, 0.1).unwrap(),
            synth_generate(40, 12, 0.1).unwrap(),
        )
    }

    #[test]
    fn build_partitions_and_initializes() {
        let (train, test) = small_data();
        let sim = Simulation::build(small_config(4, 3, 10), &train, &test).unwrap();
        assert_eq!(sim.fogs().len(), 4);
        for (i, fog) in sim.fogs().iter().enumerate() {
            assert_eq!(fog.fog_id(), i as u32);
            assert_eq!(fog.shard().len(), 30);
            assert_eq!(fog.shard().cursor(), 0);
            assert!(fog.archive().is_empty());
        }
        assert_eq!(sim.global_model().round_id, 0);
        let dims = sim.global_model().params.dims();
        assert_eq!((dims.input, dims.hidden, dims.output), (512, 64, 8));
    }

    #[test]
    fn build_rejects_undersized_and_mismatched_data() {
        let (train, test) = small_data();
        // 120/4 = 30 frames per fog < window 40.
        let r = Simulation::build(small_config(4, 1, 40), &train, &test);
        assert!(matches!(r, Err(Error::Config(_))));

        let tiny_test = Dataset::new(
            vec![Frame {
                features: vec![0.0; 16],
                label: 0,
            }],
            "t",
        )
        .unwrap();
        let r = Simulation::build(small_config(4, 1, 10), &train, &tiny_test);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn one_round_advances_every_cursor_and_the_round_id() {
        let (train, test) = small_data();
        let mut sim = Simulation::build(small_config(3, 2, 10), &train, &test).unwrap();
        let report = sim.run_round().unwrap();
        assert_eq!(report.round_id, 1);
        assert_eq!(sim.global_model().round_id, 1);
        assert_eq!(sim.history().len(), 1);
        for fog in sim.fogs() {
            assert_eq!(fog.shard().cursor(), 10);
            assert_eq!(fog.archive(), std::slice::from_ref(&(0..10)));
        }
        assert_eq!(report.per_fog_local_loss.len(), 3);
        assert_eq!(report.per_fog_local_accuracy.len(), 3);
        assert!(report.global_test_accuracy >= 0.0 && report.global_test_accuracy <= 1.0);
        for &a in &report.per_fog_local_accuracy {
            assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn single_fog_round_equals_direct_train_local() {
        let (train, test) = small_data();
        let config = small_config(1, 1, 10);
        let mut sim = Simulation::build(config.clone(), &train, &test).unwrap();
        sim.run_round().unwrap();

        // Oracle: replay the same partition, init, and seed derivation.
        let mut shard = crate::data::partition(&train, 1, config.seed)
            .unwrap()
            .remove(0);
        let init = init_params(config.seed, Dims::new(512, 64, 8)).unwrap();
        let window = shard.next_window(10).unwrap();
        let report =
            train_local(init, window, &config.hyper, round_seed(config.seed, 0, 0)).unwrap();
        assert!(sim.global_model().params.bitwise_eq(&report.params));
    }

    #[test]
    fn transport_log_records_the_expected_conversation() {
        let (train, test) = small_data();
        let mut sim = Simulation::build(small_config(2, 1, 10), &train, &test).unwrap();
        sim.set_transport_logging(true);
        sim.run_round().unwrap();

        let log = sim.transport_log();
        // Per fog: RoundStart + GlobalModel down, ModelUpdate up.
        assert_eq!(log.len(), 6);
        let types: Vec<u8> = log.iter().map(|r| r.msg_type).collect();
        assert_eq!(types, vec![1, 3, 1, 3, 2, 2]);
        assert!(log.iter().all(|r| matches!(r.msg_type, 1..=3)));
        for r in log {
            match r.msg_type {
                2 => {
                    assert!(matches!(r.sender, NodeId::Fog(_)));
                    assert_eq!(r.receiver, NodeId::Cloud);
                }
                _ => {
                    assert_eq!(r.sender, NodeId::Cloud);
                    assert!(matches!(r.receiver, NodeId::Fog(_)));
                }
            }
        }
        // Both fogs receive the identical global frame.
        assert_eq!(log[1].byte_len, log[3].byte_len);

        // Logging off by default.
        let mut silent = Simulation::build(small_config(2, 1, 10), &train, &test).unwrap();
        silent.run_round().unwrap();
        assert!(silent.transport_log().is_empty());
    }

    #[test]
    fn identical_configs_reproduce_identical_histories() {
        let (train, test) = small_data();
        let config = small_config(3, 2, 10);
        let mut a = Simulation::build(config.clone(), &train, &test).unwrap();
        let mut b = Simulation::build(config, &train, &test).unwrap();
        let ra = a.run().unwrap();
        let rb = b.run().unwrap();
        assert_eq!(ra.len(), rb.len());
        for (x, y) in ra.iter().zip(&rb) {
            assert_eq!(x.global_test_loss.to_bits(), y.global_test_loss.to_bits());
            assert_eq!(
                x.global_test_accuracy.to_bits(),
                y.global_test_accuracy.to_bits()
            );
            for (l, r) in x.per_fog_local_loss.iter().zip(&y.per_fog_local_loss) {
                assert_eq!(l.to_bits(), r.to_bits());
            }
        }
        assert!(a.global_model().params.bitwise_eq(&b.global_model().params));
    }

    #[test]
    fn run_stops_when_the_stream_runs_dry() {
        let (train, test) = small_data();
        // 120/3 = 40 frames per fog, window 15 -> 2 full windows each.
        let mut sim = Simulation::build(small_config(3, 10, 15), &train, &test).unwrap();
        let reports = sim.run().unwrap();
        assert_eq!(reports.len(), 2);
        let ids: Vec<u32> = reports.iter().map(|r| r.round_id).collect();
        assert_eq!(ids, vec![1, 2]);
        let err = sim.run_round().unwrap_err();
        assert!(matches!(err, Error::StreamExhausted { .. }));
        // The failed attempt changed nothing.
        assert_eq!(sim.global_model().round_id, 2);
        for fog in sim.fogs() {
            assert_eq!(fog.shard().cursor(), 30);
            assert_eq!(fog.archive(), &[0..15, 15..30]);
        }
    }

    #[test]
    fn zero_rounds_returns_nothing_and_keeps_initial_params() {
        let (train, test) = small_data();
        let config = small_config(2, 0, 10);
        let mut sim = Simulation::build(config.clone(), &train, &test).unwrap();
        let reports = sim.run().unwrap();
        assert!(reports.is_empty());
        let fresh = init_params(config.seed, Dims::new(512, 64, 8)).unwrap();
        assert!(sim.global_model().params.bitwise_eq(&fresh));
    }

    #[test]
    fn archived_windows_tile_the_consumed_prefix() {
        let (train, test) = small_data();
        let mut sim = Simulation::build(small_config(2, 4, 11), &train, &test).unwrap();
        sim.run().unwrap();
        for fog in sim.fogs() {
            let mut expected_start = 0;
            for range in fog.archive() {
                assert_eq!(range.start, expected_start);
                assert_eq!(range.end - range.start, 11);
                expected_start = range.end;
            }
            assert_eq!(expected_start, fog.shard().cursor());
        }
    }
}
