//! Round-based orchestration of one server and N simulated clients.
//!
//! A [`SeedRun`] holds the state of one federation under one seed: the full
//! server map, per-client states, the key partition for the configured
//! sharing strategy, and the featurized few-shot and test sets. Each round
//! pulls shared parameters into every client, trains locally under the
//! strategy's trainable mask, and aggregates the pushed payloads in
//! client-id order. [`run_federation`] sweeps seeds and produces a
//! [`RunReport`]; [`run_single_target_baseline`] trains each client alone
//! for the same number of epochs with no aggregation anywhere.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::data::{sample_few_shot, validate_corpus, DataError, LabeledExample};
use crate::eval::{macro_f1, mean_std, EvalError, EvalResult};
use crate::model::{
    featurize, init_params, train_local, FeaturizerConfig, ModelError, ModelSpec, OptimizerConfig,
    TrainExample,
};
use crate::params::{
    fed_avg, merge_shared, partition_keys, restrict, KeyPartition, ParamError, ParameterMap,
    PartitionSpec, Strategy,
};
use crate::rng::{derive_seed, fnv1a64, fnv1a64_extend};

#[derive(Debug, Clone, PartialEq)]
pub enum FederationError {
    Config {
        reason: String,
    },
    /// A module error attributed to one client, with seed and round context
    /// when available.
    Client(alloc::boxed::Box<ClientFailure>),
    Param(ParamError),
    Eval(EvalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientFailure {
    pub client_id: String,
    pub seed: Option<u64>,
    pub round: Option<usize>,
    pub source: ClientErrorKind,
}

impl FederationError {
    fn client(
        client_id: impl Into<String>,
        seed: Option<u64>,
        round: Option<usize>,
        source: ClientErrorKind,
    ) -> Self {
        FederationError::Client(alloc::boxed::Box::new(ClientFailure {
            client_id: client_id.into(),
            seed,
            round,
            source,
        }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClientErrorKind {
    Model(ModelError),
    Data(DataError),
    Param(ParamError),
}

impl fmt::Display for ClientErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClientErrorKind::Model(e) => write!(f, "{e}"),
            ClientErrorKind::Data(e) => write!(f, "{e}"),
            ClientErrorKind::Param(e) => write!(f, "{e}"),
        }
    }
}

impl fmt::Display for FederationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FederationError::Config { reason } => write!(f, "invalid federation config: {reason}"),
            FederationError::Client(failure) => {
                write!(f, "client '{}'", failure.client_id)?;
                if let Some(seed) = failure.seed {
                    write!(f, " (seed {seed}")?;
                    if let Some(round) = failure.round {
                        write!(f, ", round {round}")?;
                    }
                    write!(f, ")")?;
                }
                write!(f, ": {}", failure.source)
            }
            FederationError::Param(e) => write!(f, "{e}"),
            FederationError::Eval(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for FederationError {}

impl From<ParamError> for FederationError {
    fn from(e: ParamError) -> Self {
        FederationError::Param(e)
    }
}

impl From<EvalError> for FederationError {
    fn from(e: EvalError) -> Self {
        FederationError::Eval(e)
    }
}

/// One simulated client: its identifier, the training pool the few-shot
/// sample is drawn from, and its held-out test set.
#[derive(Debug, Clone)]
pub struct ClientData {
    pub id: String,
    pub train_pool: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
    /// Few-shot sample size drawn per seed from `train_pool`.
    pub few_shot_n: usize,
}

/// Full description of one federation experiment.
#[derive(Debug, Clone)]
pub struct FederationConfig {
    pub clients: Vec<ClientData>,
    pub model: ModelSpec,
    pub featurizer: FeaturizerConfig,
    pub opt: OptimizerConfig,
    pub partition: PartitionSpec,
    pub rounds: usize,
    pub seeds: Vec<u64>,
}

impl FederationConfig {
    pub fn validate(&self) -> Result<(), FederationError> {
        let config = |reason: String| FederationError::Config { reason };
        if self.clients.is_empty() {
            return Err(config("no clients".to_string()));
        }
        if self.rounds == 0 {
            return Err(config("rounds must be >= 1".to_string()));
        }
        if self.seeds.is_empty() {
            return Err(config("seed list is empty".to_string()));
        }
        self.model.validate().map_err(|e| config(e.to_string()))?;
        self.featurizer
            .validate()
            .map_err(|e| config(e.to_string()))?;
        self.opt.validate().map_err(|e| config(e.to_string()))?;
        if self.featurizer.hash_dim != self.model.hash_dim {
            return Err(config(alloc::format!(
                "featurizer hash_dim {} != model hash_dim {}",
                self.featurizer.hash_dim,
                self.model.hash_dim
            )));
        }
        partition_keys(&self.model, &self.partition).map_err(|e| config(e.to_string()))?;
        if matches!(
            self.partition.strategy,
            Strategy::AdapterFull | Strategy::AdapterOnly
        ) && !self.model.has_adapters()
        {
            return Err(config(
                "adapter strategy configured but adapter_dim is 0".to_string(),
            ));
        }
        let mut ids = BTreeSet::new();
        for client in &self.clients {
            if !ids.insert(client.id.as_str()) {
                return Err(config(alloc::format!(
                    "duplicate client id '{}'",
                    client.id
                )));
            }
            if !matches!(client.few_shot_n, 0 | 3 | 9 | 15) {
                return Err(config(alloc::format!(
                    "client '{}': few_shot_n {} not in {{0, 3, 9, 15}}",
                    client.id,
                    client.few_shot_n
                )));
            }
            for (name, corpus) in [("train", &client.train_pool), ("test", &client.test)] {
                validate_corpus(corpus).map_err(|e| {
                    FederationError::client(client.id.clone(), None, None, ClientErrorKind::Data(e))
                })?;
                let _ = name;
            }
        }
        Ok(())
    }

    /// Content digest covering the architecture, optimizer, protocol
    /// settings, and every client's data. Two configs with equal digests
    /// produce byte-identical reports.
    pub fn digest(&self) -> String {
        let mut h = fnv1a64(b"federation-config-v1");
        let mut put = |bytes: &[u8]| h = fnv1a64_extend(h, bytes);
        for v in [
            self.model.hash_dim,
            self.model.embed_dim,
            self.model.block_count,
            self.model.adapter_dim,
            self.model.class_count,
            self.featurizer.ngram_min,
            self.featurizer.ngram_max,
            self.featurizer.hash_dim,
            self.featurizer.lowercase as usize,
            self.opt.batch_size.map(|b| b + 1).unwrap_or(0),
            self.opt.epochs_per_round,
            self.partition.k_p,
            self.rounds,
        ] {
            put(&(v as u64).to_le_bytes());
        }
        put(&self.opt.learning_rate.to_bits().to_le_bytes());
        put(self.partition.strategy.to_string().as_bytes());
        for seed in &self.seeds {
            put(&seed.to_le_bytes());
        }
        let mut sorted: Vec<&ClientData> = self.clients.iter().collect();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));
        for client in sorted {
            put(client.id.as_bytes());
            put(&(client.few_shot_n as u64).to_le_bytes());
            for corpus in [&client.train_pool, &client.test] {
                put(&(corpus.len() as u64).to_le_bytes());
                for example in corpus {
                    put(example.id.as_bytes());
                    put(example.text.as_bytes());
                    put(example.polarity.as_str().as_bytes());
                    put(&[example.profanity as u8]);
                }
            }
        }
        to_hex(h)
    }
}

fn to_hex(value: u64) -> String {
    let digits = b"0123456789abcdef";
    let mut out = Vec::with_capacity(16);
    for shift in (0..16).rev() {
        out.push(digits[((value >> (shift * 4)) & 0xf) as usize]);
    }
    String::from_utf8(out).expect("hex digits")
}

/// Mutable per-client state across rounds.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: String,
    pub params: ParameterMap,
    /// Samples used in the most recent local training pass.
    pub sample_count: u64,
}

/// What one client pushed to the server in one round.
#[derive(Debug, Clone)]
pub struct ClientPayload {
    pub client_id: String,
    pub update: ParameterMap,
    pub sample_count: u64,
}

/// Outcome of one federation round, exposed for protocol inspection.
#[derive(Debug, Clone)]
pub struct RoundSummary {
    pub round: usize,
    /// Payloads in client-id order, exactly as aggregated.
    pub payloads: Vec<ClientPayload>,
    pub server_updated: bool,
}

/// Featurized data for one client.
struct PreparedClient {
    id: String,
    few_shot: Vec<TrainExample>,
    test: Vec<TrainExample>,
}

fn featurize_examples(examples: &[LabeledExample], cfg: &FeaturizerConfig) -> Vec<TrainExample> {
    examples
        .iter()
        .map(|e| TrainExample {
            features: featurize(&e.text, cfg),
            label: e.binary_label(),
        })
        .collect()
}

/// One federation under one seed.
pub struct SeedRun<'a> {
    cfg: &'a FederationConfig,
    seed: u64,
    partition: KeyPartition,
    trainable: BTreeSet<String>,
    server: ParameterMap,
    states: Vec<ClientState>,
    prepared: Vec<PreparedClient>,
    rounds_done: usize,
}

impl<'a> SeedRun<'a> {
    /// Initialize server and client parameters and draw the per-client
    /// few-shot samples for this seed.
    ///
    /// Shared parameters are initialized once from a server stream; each
    /// client's personal parameters come from a stream keyed by its id, so
    /// clients differ from the start under personalization strategies.
    pub fn new(cfg: &'a FederationConfig, seed: u64) -> Result<Self, FederationError> {
        cfg.validate()?;
        let partition = partition_keys(&cfg.model, &cfg.partition)?;
        let layout = cfg.model.layout();
        let trainable = match cfg.partition.strategy {
            Strategy::AdapterOnly => layout.adapter_prefixes(),
            _ => layout.all_prefixes(),
        };

        let server = init_params(&cfg.model, derive_seed(seed, "init-server", 0));
        let mut states = Vec::with_capacity(cfg.clients.len());
        let mut prepared = Vec::with_capacity(cfg.clients.len());
        for client in &cfg.clients {
            let params = initial_client_params(cfg, &partition, &server, seed, &client.id)?;
            states.push(ClientState {
                id: client.id.clone(),
                params,
                sample_count: 0,
            });
            let label = alloc::format!("fewshot:{}", client.id);
            let sample = sample_few_shot(
                &client.train_pool,
                client.few_shot_n,
                derive_seed(seed, &label, 0),
            )
            .map_err(|e| {
                FederationError::client(
                    client.id.clone(),
                    Some(seed),
                    None,
                    ClientErrorKind::Data(e),
                )
            })?;
            prepared.push(PreparedClient {
                id: client.id.clone(),
                few_shot: featurize_examples(&sample, &cfg.featurizer),
                test: featurize_examples(&client.test, &cfg.featurizer),
            });
        }
        Ok(Self {
            cfg,
            seed,
            partition,
            trainable,
            server,
            states,
            prepared,
            rounds_done: 0,
        })
    }

    pub fn server(&self) -> &ParameterMap {
        &self.server
    }

    pub fn states(&self) -> &[ClientState] {
        &self.states
    }

    pub fn partition(&self) -> &KeyPartition {
        &self.partition
    }

    pub fn trainable_mask(&self) -> &BTreeSet<String> {
        &self.trainable
    }

    /// Pull, train locally, push, aggregate.
    ///
    /// Clients with no data push nothing; when the shared set is empty
    /// (adapter-only) no pull or push happens at all. The server changes
    /// only when at least one payload arrives, and payloads are aggregated
    /// in client-id order regardless of completion order.
    pub fn run_round(&mut self) -> Result<RoundSummary, FederationError> {
        let round = self.rounds_done;
        let epochs = self.cfg.opt.epochs_per_round as u64;
        let mut payloads = Vec::new();
        for (state, prep) in self.states.iter_mut().zip(&self.prepared) {
            let pulled = if self.partition.shared.is_empty() {
                state.params.clone()
            } else {
                merge_shared(&state.params, &self.server, &self.partition).map_err(|e| {
                    FederationError::client(
                        state.id.clone(),
                        Some(self.seed),
                        Some(round),
                        ClientErrorKind::Param(e),
                    )
                })?
            };
            let label = alloc::format!("train:{}", state.id);
            let (trained, n) = train_local(
                &self.cfg.model,
                &pulled,
                &prep.few_shot,
                &self.cfg.opt,
                &self.trainable,
                derive_seed(self.seed, &label, 0),
                round as u64 * epochs,
            )
            .map_err(|e| {
                FederationError::client(
                    state.id.clone(),
                    Some(self.seed),
                    Some(round),
                    ClientErrorKind::Model(e),
                )
            })?;
            state.params = trained;
            state.sample_count = n;
            if n > 0 && !self.partition.shared.is_empty() {
                payloads.push(ClientPayload {
                    client_id: state.id.clone(),
                    update: restrict(&state.params, &self.partition.shared),
                    sample_count: n,
                });
            }
        }
        payloads.sort_by(|a, b| a.client_id.cmp(&b.client_id));

        let server_updated = !payloads.is_empty();
        if server_updated {
            let updates: Vec<(ParameterMap, u64)> = payloads
                .iter()
                .map(|p| (p.update.clone(), p.sample_count))
                .collect();
            let aggregated = fed_avg(&updates)?;
            self.server.overwrite_from(&aggregated)?;
        }
        self.rounds_done += 1;
        Ok(RoundSummary {
            round,
            payloads,
            server_updated,
        })
    }

    pub fn rounds_done(&self) -> usize {
        self.rounds_done
    }

    /// Macro-F1 of each client's current local model on its own test set.
    pub fn evaluate_clients(&self) -> Result<Vec<(String, EvalResult)>, FederationError> {
        self.states
            .iter()
            .zip(&self.prepared)
            .map(|(state, prep)| {
                evaluate(&self.cfg.model, &state.params, &prep.test)
                    .map(|r| (state.id.clone(), r))
                    .map_err(|e| {
                        FederationError::client(state.id.clone(), Some(self.seed), None, e)
                    })
            })
            .collect()
    }

    /// Macro-F1 of the server model on the concatenated test sets, in
    /// client-id order. Returns `None` under personalization strategies,
    /// where client-specific parameters make the server model uninformative.
    pub fn evaluate_server(&self) -> Result<Option<EvalResult>, FederationError> {
        if self.cfg.partition.strategy != Strategy::Standard {
            return Ok(None);
        }
        let mut order: Vec<&PreparedClient> = self.prepared.iter().collect();
        order.sort_by(|a, b| a.id.cmp(&b.id));
        let combined: Vec<TrainExample> =
            order.iter().flat_map(|p| p.test.iter().cloned()).collect();
        let result = evaluate(&self.cfg.model, &self.server, &combined).map_err(|source| {
            FederationError::client("server".to_string(), Some(self.seed), None, source)
        })?;
        Ok(Some(result))
    }
}

fn initial_client_params(
    cfg: &FederationConfig,
    partition: &KeyPartition,
    server: &ParameterMap,
    seed: u64,
    client_id: &str,
) -> Result<ParameterMap, FederationError> {
    let label = alloc::format!("init-client:{client_id}");
    let personal = init_params(&cfg.model, derive_seed(seed, &label, 0));
    merge_shared(&personal, server, partition).map_err(|e| {
        FederationError::client(client_id, Some(seed), None, ClientErrorKind::Param(e))
    })
}

fn evaluate(
    model: &ModelSpec,
    params: &ParameterMap,
    test: &[TrainExample],
) -> Result<EvalResult, ClientErrorKind> {
    let mut gold = Vec::with_capacity(test.len());
    let mut pred = Vec::with_capacity(test.len());
    for example in test {
        let probs = crate::model::forward(model, params, &example.features)
            .map_err(ClientErrorKind::Model)?;
        gold.push(example.label);
        pred.push(crate::model::predict(probs));
    }
    macro_f1(&gold, &pred).map_err(|e| {
        ClientErrorKind::Data(DataError::IdMismatch {
            detail: e.to_string(),
        })
    })
}

/// Per-client macro-F1 across seeds.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ClientSummary {
    pub per_seed_f1: Vec<f64>,
    pub mean_f1: f64,
    pub std_f1: f64,
}

/// Server macro-F1 across seeds; absent under personalization strategies.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ServerSummary {
    pub per_seed_f1: Option<Vec<f64>>,
    pub mean_f1: Option<f64>,
}

/// Aggregated outcome of one experiment.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunReport {
    pub config_digest: String,
    pub strategy: String,
    pub seeds: Vec<u64>,
    pub rounds: usize,
    /// Uniform few-shot size across clients, when there is one.
    pub shot_count: Option<u32>,
    pub per_client: BTreeMap<String, ClientSummary>,
    pub server: ServerSummary,
}

fn uniform_shot_count(cfg: &FederationConfig) -> Option<u32> {
    let first = cfg.clients.first()?.few_shot_n;
    cfg.clients
        .iter()
        .all(|c| c.few_shot_n == first)
        .then_some(first as u32)
}

fn assemble_report(
    cfg: &FederationConfig,
    strategy: String,
    rounds: usize,
    per_seed_clients: Vec<Vec<(String, EvalResult)>>,
    per_seed_server: Vec<Option<EvalResult>>,
) -> RunReport {
    let mut per_client: BTreeMap<String, ClientSummary> = BTreeMap::new();
    for client in &cfg.clients {
        let per_seed_f1: Vec<f64> = per_seed_clients
            .iter()
            .map(|seed_results| {
                seed_results
                    .iter()
                    .find(|(id, _)| id == &client.id)
                    .map(|(_, r)| r.macro_f1)
                    .expect("every seed evaluates every client")
            })
            .collect();
        let (mean_f1, std_f1) = mean_std(&per_seed_f1).expect("seeds non-empty");
        per_client.insert(
            client.id.clone(),
            ClientSummary {
                per_seed_f1,
                mean_f1,
                std_f1,
            },
        );
    }
    let server = if per_seed_server.iter().all(Option::is_some) {
        let per_seed_f1: Vec<f64> = per_seed_server
            .iter()
            .map(|r| r.as_ref().expect("checked").macro_f1)
            .collect();
        let mean = mean_std(&per_seed_f1).expect("seeds non-empty").0;
        ServerSummary {
            per_seed_f1: Some(per_seed_f1),
            mean_f1: Some(mean),
        }
    } else {
        ServerSummary {
            per_seed_f1: None,
            mean_f1: None,
        }
    };
    RunReport {
        config_digest: cfg.digest(),
        strategy,
        seeds: cfg.seeds.clone(),
        rounds,
        shot_count: uniform_shot_count(cfg),
        per_client,
        server,
    }
}

/// Run the configured number of federation rounds for every seed and report
/// per-client (and, under standard FL, server) macro-F1.
///
/// Clients are evaluated on the local model left by the last round's
/// training, before any further pull.
pub fn run_federation(cfg: &FederationConfig) -> Result<RunReport, FederationError> {
    let mut per_seed_clients = Vec::with_capacity(cfg.seeds.len());
    let mut per_seed_server = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let mut run = SeedRun::new(cfg, seed)?;
        for _ in 0..cfg.rounds {
            run.run_round()?;
        }
        per_seed_clients.push(run.evaluate_clients()?);
        per_seed_server.push(run.evaluate_server()?);
    }
    Ok(assemble_report(
        cfg,
        cfg.partition.label(),
        cfg.rounds,
        per_seed_clients,
        per_seed_server,
    ))
}

/// Train each client individually on its own few-shot data for
/// `rounds * epochs_per_round` epochs, with no aggregation anywhere.
///
/// Initialization and data order match the federated run exactly: epoch `e`
/// here visits data in the same order as round `e` of a one-epoch-per-round
/// federation, which makes the two bit-identical for a single client under
/// the standard strategy.
pub fn run_single_target_baseline(cfg: &FederationConfig) -> Result<RunReport, FederationError> {
    cfg.validate()?;
    let partition = partition_keys(&cfg.model, &cfg.partition)?;
    let layout = cfg.model.layout();
    let trainable = match cfg.partition.strategy {
        Strategy::AdapterOnly => layout.adapter_prefixes(),
        _ => layout.all_prefixes(),
    };
    let baseline_opt = OptimizerConfig {
        epochs_per_round: cfg.rounds * cfg.opt.epochs_per_round,
        ..cfg.opt.clone()
    };

    let mut per_seed_clients = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let server = init_params(&cfg.model, derive_seed(seed, "init-server", 0));
        let mut results = Vec::with_capacity(cfg.clients.len());
        for client in &cfg.clients {
            let params = initial_client_params(cfg, &partition, &server, seed, &client.id)?;
            let label = alloc::format!("fewshot:{}", client.id);
            let sample = sample_few_shot(
                &client.train_pool,
                client.few_shot_n,
                derive_seed(seed, &label, 0),
            )
            .map_err(|e| {
                FederationError::client(
                    client.id.clone(),
                    Some(seed),
                    None,
                    ClientErrorKind::Data(e),
                )
            })?;
            let few_shot = featurize_examples(&sample, &cfg.featurizer);
            let train_label = alloc::format!("train:{}", client.id);
            let (trained, _) = train_local(
                &cfg.model,
                &params,
                &few_shot,
                &baseline_opt,
                &trainable,
                derive_seed(seed, &train_label, 0),
                0,
            )
            .map_err(|e| {
                FederationError::client(
                    client.id.clone(),
                    Some(seed),
                    None,
                    ClientErrorKind::Model(e),
                )
            })?;
            let test = featurize_examples(&client.test, &cfg.featurizer);
            let result = evaluate(&cfg.model, &trained, &test).map_err(|source| {
                FederationError::client(client.id.clone(), Some(seed), None, source)
            })?;
            results.push((client.id.clone(), result));
        }
        per_seed_clients.push(results);
    }
    let seeds = cfg.seeds.len();
    Ok(assemble_report(
        cfg,
        "single_target".to_string(),
        cfg.rounds,
        per_seed_clients,
        alloc::vec![None; seeds],
    ))
}
