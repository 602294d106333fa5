//! Compact text classifier with adapter slots.
//!
//! The architecture is a hashed character-n-gram featurizer, an embedding
//! projection, a stack of residual dense blocks with an optional bottleneck
//! adapter after each block, and a two-way classifier head. Forward and
//! backward passes are written out by hand; training is plain SGD over an
//! explicit trainable mask, so freezing and personalization are exact.
//!
//! All internal arithmetic runs in f64; parameters and gradients are stored
//! as f32 inside [`ParameterMap`]s keyed `group.tensor` (consumed by
//! [`crate::params`]).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::data::BinaryLabel;
use crate::params::{key_in_prefixes, ParameterMap};
use crate::rng::{derive_seed, fnv1a64, fnv1a64_extend, Rng};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelError {
    /// Parameter map does not match the model layout.
    ShapeMismatch {
        key: String,
        expected: usize,
        got: usize,
    },
    MissingKey {
        key: String,
    },
    UnexpectedKey {
        key: String,
    },
    EmptyBatch,
    InvalidConfig {
        reason: String,
    },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::ShapeMismatch { key, expected, got } => {
                write!(
                    f,
                    "shape mismatch at '{key}': expected {expected}, got {got}"
                )
            }
            ModelError::MissingKey { key } => write!(f, "missing parameter '{key}'"),
            ModelError::UnexpectedKey { key } => write!(f, "unexpected parameter '{key}'"),
            ModelError::EmptyBatch => write!(f, "empty batch"),
            ModelError::InvalidConfig { reason } => write!(f, "invalid config: {reason}"),
        }
    }
}

impl core::error::Error for ModelError {}

/// Hashed character-n-gram featurizer settings.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FeaturizerConfig {
    #[serde(default = "default_ngram_min")]
    pub ngram_min: usize,
    #[serde(default = "default_ngram_max")]
    pub ngram_max: usize,
    #[serde(default = "default_hash_dim")]
    pub hash_dim: usize,
    #[serde(default = "default_lowercase")]
    pub lowercase: bool,
}

fn default_ngram_min() -> usize {
    1
}
fn default_ngram_max() -> usize {
    3
}
fn default_hash_dim() -> usize {
    32_768
}
fn default_lowercase() -> bool {
    true
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        Self {
            ngram_min: 1,
            ngram_max: 3,
            hash_dim: 32_768,
            lowercase: true,
        }
    }
}

impl FeaturizerConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(1 <= self.ngram_min && self.ngram_min <= self.ngram_max && self.ngram_max <= 5) {
            return Err(ModelError::InvalidConfig {
                reason: alloc::format!(
                    "ngram range {}..={} outside 1..=5",
                    self.ngram_min,
                    self.ngram_max
                ),
            });
        }
        if !self.hash_dim.is_power_of_two() {
            return Err(ModelError::InvalidConfig {
                reason: alloc::format!("hash_dim {} is not a power of two", self.hash_dim),
            });
        }
        Ok(())
    }
}

/// Sparse feature vector: sorted `(index, value)` pairs, L2-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVec {
    entries: Vec<(u32, f32)>,
}

impl SparseVec {
    pub fn from_sorted(entries: Vec<(u32, f32)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        Self { entries }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f32)> + '_ {
        self.entries.iter().copied()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Hash character n-grams into a sparse, L2-normalized count vector.
///
/// Indices come from a stable 64-bit FNV-1a hash of each n-gram's UTF-8
/// bytes, reduced modulo `hash_dim`, so the same text featurizes
/// bit-identically across processes. Empty text yields the zero vector.
pub fn featurize(text: &str, cfg: &FeaturizerConfig) -> SparseVec {
    let lowered;
    let text = if cfg.lowercase {
        lowered = text.to_lowercase();
        lowered.as_str()
    } else {
        text
    };

    // Byte offsets of each char boundary, plus the end.
    let mut bounds: Vec<usize> = text.char_indices().map(|(i, _)| i).collect();
    bounds.push(text.len());
    let char_count = bounds.len() - 1;

    let mask = (cfg.hash_dim - 1) as u64;
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for n in cfg.ngram_min..=cfg.ngram_max {
        if n > char_count {
            break;
        }
        for start in 0..=(char_count - n) {
            let gram = &text[bounds[start]..bounds[start + n]];
            // Mix in the n-gram length so a unigram never collides with a
            // bigram that shares its bytes.
            let h = fnv1a64_extend(fnv1a64(gram.as_bytes()), &[n as u8]);
            *counts.entry((h & mask) as u32).or_insert(0) += 1;
        }
    }

    let norm = libm::sqrt(
        counts
            .values()
            .map(|&c| (c as f64) * (c as f64))
            .sum::<f64>(),
    );
    if norm == 0.0 {
        return SparseVec {
            entries: Vec::new(),
        };
    }
    let entries = counts
        .into_iter()
        .map(|(idx, c)| (idx, (c as f64 / norm) as f32))
        .collect();
    SparseVec { entries }
}

/// Architecture description; `class_count` is fixed at two.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub hash_dim: usize,
    pub embed_dim: usize,
    pub block_count: usize,
    /// Bottleneck width of the per-block adapters; `0` disables adapters.
    pub adapter_dim: usize,
    pub class_count: usize,
}

impl ModelSpec {
    pub fn new(hash_dim: usize, embed_dim: usize, block_count: usize, adapter_dim: usize) -> Self {
        Self {
            hash_dim,
            embed_dim,
            block_count,
            adapter_dim,
            class_count: 2,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.block_count < 1 {
            return Err(ModelError::InvalidConfig {
                reason: "block_count must be >= 1".to_string(),
            });
        }
        if self.class_count != 2 {
            return Err(ModelError::InvalidConfig {
                reason: "class_count is fixed at 2".to_string(),
            });
        }
        if self.embed_dim == 0 || self.hash_dim == 0 {
            return Err(ModelError::InvalidConfig {
                reason: "hash_dim and embed_dim must be positive".to_string(),
            });
        }
        if !self.hash_dim.is_power_of_two() {
            return Err(ModelError::InvalidConfig {
                reason: alloc::format!("hash_dim {} is not a power of two", self.hash_dim),
            });
        }
        Ok(())
    }

    pub fn has_adapters(&self) -> bool {
        self.adapter_dim > 0
    }

    /// Stable 64-bit digest of the architecture, stored in checkpoints.
    pub fn digest(&self) -> u64 {
        let mut h = fnv1a64(b"model-spec-v1");
        for field in [
            self.hash_dim,
            self.embed_dim,
            self.block_count,
            self.adapter_dim,
            self.class_count,
        ] {
            h = fnv1a64_extend(h, &(field as u64).to_le_bytes());
        }
        h
    }

    pub fn layout(&self) -> ModelLayout {
        ModelLayout::from_spec(self)
    }
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self::new(32_768, 64, 4, 16)
    }
}

/// What a layer group is, for partitioning decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    Embedding,
    Block(usize),
    Adapter(usize),
    Head,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerGroup {
    pub name: String,
    pub kind: GroupKind,
    /// `(key, vector length)` for each tensor in the group.
    pub tensors: Vec<(String, usize)>,
}

/// Ordered layer groups derived from a [`ModelSpec`].
///
/// Group order is featurizer embedding, then `block_i` followed by its
/// `adapter_i` (when adapters are enabled) for `i = 1..=block_count`, then
/// the head. Key names follow the `group.tensor` convention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelLayout {
    pub groups: Vec<LayerGroup>,
}

impl ModelLayout {
    pub fn from_spec(spec: &ModelSpec) -> Self {
        let e = spec.embed_dim;
        let mut groups = Vec::new();
        groups.push(LayerGroup {
            name: "featurizer_embed".to_string(),
            kind: GroupKind::Embedding,
            tensors: alloc::vec![
                ("featurizer_embed.weight".to_string(), spec.hash_dim * e),
                ("featurizer_embed.bias".to_string(), e),
            ],
        });
        for i in 1..=spec.block_count {
            groups.push(LayerGroup {
                name: alloc::format!("block{i}"),
                kind: GroupKind::Block(i),
                tensors: alloc::vec![
                    (alloc::format!("block{i}.weight"), e * e),
                    (alloc::format!("block{i}.bias"), e),
                ],
            });
            if spec.adapter_dim > 0 {
                let a = spec.adapter_dim;
                groups.push(LayerGroup {
                    name: alloc::format!("adapter{i}"),
                    kind: GroupKind::Adapter(i),
                    tensors: alloc::vec![
                        (alloc::format!("adapter{i}.down_weight"), e * a),
                        (alloc::format!("adapter{i}.down_bias"), a),
                        (alloc::format!("adapter{i}.up_weight"), a * e),
                        (alloc::format!("adapter{i}.up_bias"), e),
                    ],
                });
            }
        }
        groups.push(LayerGroup {
            name: "head".to_string(),
            kind: GroupKind::Head,
            tensors: alloc::vec![
                ("head.weight".to_string(), e * spec.class_count),
                ("head.bias".to_string(), spec.class_count),
            ],
        });
        Self { groups }
    }

    pub fn keys(&self) -> impl Iterator<Item = (&str, usize)> {
        self.groups
            .iter()
            .flat_map(|g| g.tensors.iter().map(|(k, n)| (k.as_str(), *n)))
    }

    pub fn group_names(&self) -> impl Iterator<Item = &str> {
        self.groups.iter().map(|g| g.name.as_str())
    }

    /// All group names as a prefix set (the "train everything" mask).
    pub fn all_prefixes(&self) -> BTreeSet<String> {
        self.groups.iter().map(|g| g.name.clone()).collect()
    }

    /// Adapter group names as a prefix set.
    pub fn adapter_prefixes(&self) -> BTreeSet<String> {
        self.groups
            .iter()
            .filter(|g| matches!(g.kind, GroupKind::Adapter(_)))
            .map(|g| g.name.clone())
            .collect()
    }

    /// Check that `params` carries exactly this layout's keys and lengths.
    pub fn check_params(&self, params: &ParameterMap) -> Result<(), ModelError> {
        let mut expected = 0usize;
        for (key, len) in self.keys() {
            expected += 1;
            match params.get(key) {
                None => {
                    return Err(ModelError::MissingKey {
                        key: key.to_string(),
                    })
                }
                Some(v) if v.len() != len => {
                    return Err(ModelError::ShapeMismatch {
                        key: key.to_string(),
                        expected: len,
                        got: v.len(),
                    })
                }
                Some(_) => {}
            }
        }
        if params.len() != expected {
            for key in params.keys() {
                if !self.keys().any(|(k, _)| k == key) {
                    return Err(ModelError::UnexpectedKey {
                        key: key.to_string(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// SGD settings for local client training.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OptimizerConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    /// `None` trains on the full few-shot set as one batch.
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default = "default_epochs")]
    pub epochs_per_round: usize,
}

fn default_lr() -> f64 {
    0.05
}
fn default_epochs() -> usize {
    1
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            batch_size: None,
            epochs_per_round: 1,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(ModelError::InvalidConfig {
                reason: "learning_rate must be positive and finite".to_string(),
            });
        }
        if self.batch_size == Some(0) {
            return Err(ModelError::InvalidConfig {
                reason: "batch_size must be positive".to_string(),
            });
        }
        if self.epochs_per_round == 0 {
            return Err(ModelError::InvalidConfig {
                reason: "epochs_per_round must be >= 1".to_string(),
            });
        }
        Ok(())
    }
}

/// One featurized training or evaluation example.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub features: SparseVec,
    pub label: BinaryLabel,
}

/// Initialize parameters from a seed.
///
/// Weights are uniform in `(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`,
/// each tensor drawn from its own derived stream so the result does not
/// depend on traversal order. All biases and all adapter up-projection
/// weights are zero, which makes freshly initialized adapters exact
/// identities.
pub fn init_params(spec: &ModelSpec, seed: u64) -> ParameterMap {
    let layout = spec.layout();
    let e = spec.embed_dim;
    let mut map = ParameterMap::new();
    for group in &layout.groups {
        for (key, len) in &group.tensors {
            let values = if key.ends_with(".bias")
                || key.ends_with(".down_bias")
                || key.ends_with(".up_bias")
                || key.ends_with(".up_weight")
            {
                alloc::vec![0.0f32; *len]
            } else {
                let (fan_in, fan_out) = match group.kind {
                    GroupKind::Embedding => (spec.hash_dim, e),
                    GroupKind::Block(_) => (e, e),
                    GroupKind::Adapter(_) => (e, spec.adapter_dim),
                    GroupKind::Head => (e, spec.class_count),
                };
                let a = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
                let mut rng = Rng::from_seed(derive_seed(seed, key, 0));
                (0..*len)
                    .map(|_| (a * (2.0 * rng.next_f64() - 1.0)) as f32)
                    .collect()
            };
            map.insert(key.clone(), values);
        }
    }
    map
}

fn tensor<'a>(params: &'a ParameterMap, key: &str) -> &'a [f32] {
    params.get(key).expect("validated against layout")
}

/// Per-example forward activations kept for the backward pass.
struct Trace {
    /// `h[0]` is the embedding output; `h[b]` the output of block `b`
    /// (after its adapter, when present).
    h: Vec<Vec<f64>>,
    /// ReLU output of each block.
    relu: Vec<Vec<f64>>,
    /// Post-residual value of each block (adapter input).
    post_res: Vec<Vec<f64>>,
    /// Adapter bottleneck activation per block, when adapters are enabled.
    adapter_hidden: Vec<Vec<f64>>,
    logits: [f64; 2],
    probs: [f64; 2],
}

fn run_forward(spec: &ModelSpec, params: &ParameterMap, features: &SparseVec) -> Trace {
    let e = spec.embed_dim;

    // Embedding projection of the sparse input.
    let we = tensor(params, "featurizer_embed.weight");
    let be = tensor(params, "featurizer_embed.bias");
    let mut h0: Vec<f64> = be.iter().map(|&b| b as f64).collect();
    for (idx, value) in features.iter() {
        let row = idx as usize * e;
        let v = value as f64;
        for (slot, &w) in h0.iter_mut().zip(&we[row..row + e]) {
            *slot += v * w as f64;
        }
    }

    let mut h = alloc::vec![h0];
    let mut relu = Vec::with_capacity(spec.block_count);
    let mut post_res = Vec::with_capacity(spec.block_count);
    let mut adapter_hidden = Vec::new();

    for i in 1..=spec.block_count {
        let input = h.last().expect("nonempty").clone();
        let w = tensor(params, &alloc::format!("block{i}.weight"));
        let b = tensor(params, &alloc::format!("block{i}.bias"));
        // z = W^T x + b; r = relu(z); u = input + r (residual)
        let mut r = alloc::vec![0.0f64; e];
        for (o, slot) in r.iter_mut().enumerate() {
            let mut z = b[o] as f64;
            for (iin, &x) in input.iter().enumerate() {
                z += x * w[iin * e + o] as f64;
            }
            *slot = if z > 0.0 { z } else { 0.0 };
        }
        let u: Vec<f64> = input.iter().zip(&r).map(|(x, y)| x + y).collect();

        let out = if spec.has_adapters() {
            let a_dim = spec.adapter_dim;
            let dw = tensor(params, &alloc::format!("adapter{i}.down_weight"));
            let db = tensor(params, &alloc::format!("adapter{i}.down_bias"));
            let uw = tensor(params, &alloc::format!("adapter{i}.up_weight"));
            let ub = tensor(params, &alloc::format!("adapter{i}.up_bias"));
            let mut a = alloc::vec![0.0f64; a_dim];
            for (j, slot) in a.iter_mut().enumerate() {
                let mut z = db[j] as f64;
                for (iin, &x) in u.iter().enumerate() {
                    z += x * dw[iin * a_dim + j] as f64;
                }
                *slot = if z > 0.0 { z } else { 0.0 };
            }
            let mut out = u.clone();
            for (o, slot) in out.iter_mut().enumerate() {
                let mut add = ub[o] as f64;
                for (j, &aj) in a.iter().enumerate() {
                    add += aj * uw[j * e + o] as f64;
                }
                *slot += add;
            }
            adapter_hidden.push(a);
            out
        } else {
            u.clone()
        };

        relu.push(r);
        post_res.push(u);
        h.push(out);
    }

    let wh = tensor(params, "head.weight");
    let bh = tensor(params, "head.bias");
    let top = h.last().expect("nonempty");
    let mut logits = [bh[0] as f64, bh[1] as f64];
    for (iin, &x) in top.iter().enumerate() {
        logits[0] += x * wh[iin * 2] as f64;
        logits[1] += x * wh[iin * 2 + 1] as f64;
    }
    let m = logits[0].max(logits[1]);
    let e0 = libm::exp(logits[0] - m);
    let e1 = libm::exp(logits[1] - m);
    let z = e0 + e1;
    let probs = [e0 / z, e1 / z];

    Trace {
        h,
        relu,
        post_res,
        adapter_hidden,
        logits,
        probs,
    }
}

/// Class probabilities for one example; `[non_hateful, hateful]`.
pub fn forward(
    spec: &ModelSpec,
    params: &ParameterMap,
    features: &SparseVec,
) -> Result<[f64; 2], ModelError> {
    spec.layout().check_params(params)?;
    Ok(run_forward(spec, params, features).probs)
}

/// Deterministic argmax; an exact tie predicts non-hateful.
pub fn predict(probs: [f64; 2]) -> BinaryLabel {
    if probs[1] > probs[0] {
        BinaryLabel::Hateful
    } else {
        BinaryLabel::NonHateful
    }
}

/// Mean cross-entropy loss over a batch, without gradients.
pub fn batch_loss(
    spec: &ModelSpec,
    params: &ParameterMap,
    batch: &[&TrainExample],
) -> Result<f64, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    spec.layout().check_params(params)?;
    let mut loss_sum = 0.0f64;
    for example in batch {
        let trace = run_forward(spec, params, &example.features);
        let y = match example.label {
            BinaryLabel::NonHateful => 0usize,
            BinaryLabel::Hateful => 1usize,
        };
        let m = trace.logits[0].max(trace.logits[1]);
        let lse = m + libm::log(libm::exp(trace.logits[0] - m) + libm::exp(trace.logits[1] - m));
        loss_sum += lse - trace.logits[y];
    }
    // Same scaling expression as loss_and_grad, so the two agree bit-exactly.
    Ok(loss_sum * (1.0 / batch.len() as f64))
}

/// Mean cross-entropy loss and its gradient over a batch.
///
/// Gradients cover every layout key, including groups the caller intends to
/// freeze; masking happens in [`sgd_step`].
pub fn loss_and_grad(
    spec: &ModelSpec,
    params: &ParameterMap,
    batch: &[&TrainExample],
) -> Result<(f64, ParameterMap), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let layout = spec.layout();
    layout.check_params(params)?;

    let e = spec.embed_dim;
    let a_dim = spec.adapter_dim;
    let mut acc: BTreeMap<String, Vec<f64>> = layout
        .keys()
        .map(|(k, len)| (k.to_string(), alloc::vec![0.0f64; len]))
        .collect();
    let mut loss_sum = 0.0f64;

    for example in batch {
        let trace = run_forward(spec, params, &example.features);
        let y = match example.label {
            BinaryLabel::NonHateful => 0usize,
            BinaryLabel::Hateful => 1usize,
        };
        // Numerically stable cross-entropy: lse(logits) - logits[y].
        let m = trace.logits[0].max(trace.logits[1]);
        let lse = m + libm::log(libm::exp(trace.logits[0] - m) + libm::exp(trace.logits[1] - m));
        loss_sum += lse - trace.logits[y];

        let mut dlogits = trace.probs;
        dlogits[y] -= 1.0;

        // Head.
        let top = trace.h.last().expect("nonempty");
        {
            let gw = acc.get_mut("head.weight").expect("layout");
            for (iin, &x) in top.iter().enumerate() {
                gw[iin * 2] += x * dlogits[0];
                gw[iin * 2 + 1] += x * dlogits[1];
            }
        }
        {
            let gb = acc.get_mut("head.bias").expect("layout");
            gb[0] += dlogits[0];
            gb[1] += dlogits[1];
        }
        let wh = tensor(params, "head.weight");
        let mut dh: Vec<f64> = (0..e)
            .map(|iin| wh[iin * 2] as f64 * dlogits[0] + wh[iin * 2 + 1] as f64 * dlogits[1])
            .collect();

        // Blocks, top down.
        for i in (1..=spec.block_count).rev() {
            let bi = i - 1;
            let du: Vec<f64> = if spec.has_adapters() {
                let u = &trace.post_res[bi];
                let a = &trace.adapter_hidden[bi];
                let dw_key = alloc::format!("adapter{i}.down_weight");
                let uw_key = alloc::format!("adapter{i}.up_weight");
                let uw = tensor(params, &uw_key);

                // up-projection grads; da = U . dh
                let mut da = alloc::vec![0.0f64; a_dim];
                {
                    let g_up = acc.get_mut(&uw_key).expect("layout");
                    for (j, &aj) in a.iter().enumerate() {
                        for (o, &d) in dh.iter().enumerate() {
                            g_up[j * e + o] += aj * d;
                        }
                    }
                }
                {
                    let g_ub = acc
                        .get_mut(&alloc::format!("adapter{i}.up_bias"))
                        .expect("layout");
                    for (o, &d) in dh.iter().enumerate() {
                        g_ub[o] += d;
                    }
                }
                for (j, slot) in da.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for (o, &d) in dh.iter().enumerate() {
                        s += uw[j * e + o] as f64 * d;
                    }
                    *slot = s;
                }
                // Bottleneck relu mask, then down-projection grads.
                let dz_a: Vec<f64> = da
                    .iter()
                    .zip(a)
                    .map(|(&d, &av)| if av > 0.0 { d } else { 0.0 })
                    .collect();
                {
                    let g_dw = acc.get_mut(&dw_key).expect("layout");
                    for (iin, &x) in u.iter().enumerate() {
                        for (j, &d) in dz_a.iter().enumerate() {
                            g_dw[iin * a_dim + j] += x * d;
                        }
                    }
                }
                {
                    let g_db = acc
                        .get_mut(&alloc::format!("adapter{i}.down_bias"))
                        .expect("layout");
                    for (j, &d) in dz_a.iter().enumerate() {
                        g_db[j] += d;
                    }
                }
                let dw_params = tensor(params, &dw_key);
                u.iter()
                    .enumerate()
                    .map(|(iin, _)| {
                        let mut s = dh[iin];
                        for (j, &d) in dz_a.iter().enumerate() {
                            s += dw_params[iin * a_dim + j] as f64 * d;
                        }
                        s
                    })
                    .collect()
            } else {
                dh.clone()
            };

            // u = input + relu(z): gradient splits across the residual.
            let r = &trace.relu[bi];
            let dz: Vec<f64> = du
                .iter()
                .zip(r)
                .map(|(&d, &rv)| if rv > 0.0 { d } else { 0.0 })
                .collect();
            let input = &trace.h[bi];
            let w_key = alloc::format!("block{i}.weight");
            {
                let gw = acc.get_mut(&w_key).expect("layout");
                for (iin, &x) in input.iter().enumerate() {
                    for (o, &d) in dz.iter().enumerate() {
                        gw[iin * e + o] += x * d;
                    }
                }
            }
            {
                let gb = acc
                    .get_mut(&alloc::format!("block{i}.bias"))
                    .expect("layout");
                for (o, &d) in dz.iter().enumerate() {
                    gb[o] += d;
                }
            }
            let w = tensor(params, &w_key);
            dh = du
                .iter()
                .enumerate()
                .map(|(iin, &direct)| {
                    let mut s = direct;
                    for (o, &d) in dz.iter().enumerate() {
                        s += w[iin * e + o] as f64 * d;
                    }
                    s
                })
                .collect();
        }

        // Embedding: gradient only on active feature rows.
        {
            let gw = acc.get_mut("featurizer_embed.weight").expect("layout");
            for (idx, value) in example.features.iter() {
                let row = idx as usize * e;
                let v = value as f64;
                for (o, &d) in dh.iter().enumerate() {
                    gw[row + o] += v * d;
                }
            }
        }
        {
            let gb = acc.get_mut("featurizer_embed.bias").expect("layout");
            for (o, &d) in dh.iter().enumerate() {
                gb[o] += d;
            }
        }
    }

    let scale = 1.0 / batch.len() as f64;
    let grads: ParameterMap = acc
        .into_iter()
        .map(|(k, v)| (k, v.into_iter().map(|g| (g * scale) as f32).collect()))
        .collect();
    Ok((loss_sum * scale, grads))
}

/// One SGD update restricted to keys under the trainable prefixes.
///
/// Keys outside the mask are returned bit-identical.
pub fn sgd_step(
    params: &ParameterMap,
    grads: &ParameterMap,
    mask: &BTreeSet<String>,
    learning_rate: f64,
) -> Result<ParameterMap, ModelError> {
    if let Err(e) = params.check_same_shape(grads) {
        return Err(match e {
            crate::params::ParamError::ShapeMismatch { key, expected, got } => {
                ModelError::ShapeMismatch { key, expected, got }
            }
            crate::params::ParamError::MissingKey { key } => ModelError::MissingKey { key },
            crate::params::ParamError::UnexpectedKey { key } => ModelError::UnexpectedKey { key },
            other => ModelError::InvalidConfig {
                reason: alloc::format!("{other}"),
            },
        });
    }
    let mut out = params.clone();
    let stepped: ParameterMap = params
        .iter()
        .filter(|(key, _)| key_in_prefixes(key, mask))
        .map(|(key, values)| {
            let g = grads.get(key).expect("shape checked");
            let updated: Vec<f32> = values
                .iter()
                .zip(g)
                .map(|(&p, &gv)| (p as f64 - learning_rate * gv as f64) as f32)
                .collect();
            (key.to_string(), updated)
        })
        .collect();
    out.overwrite_from(&stepped).expect("keys from params");
    Ok(out)
}

/// Run local SGD epochs over `data` in seeded-shuffled order.
///
/// Epoch `e` of this call shuffles with the stream derived from
/// `(seed, epoch_offset + e)`, so a federation that trains one epoch per
/// round with `epoch_offset = round` visits data in exactly the same order
/// as a single continuous run would. Empty data returns the parameters
/// unchanged with a sample count of zero.
pub fn train_local(
    spec: &ModelSpec,
    params: &ParameterMap,
    data: &[TrainExample],
    opt: &OptimizerConfig,
    mask: &BTreeSet<String>,
    seed: u64,
    epoch_offset: u64,
) -> Result<(ParameterMap, u64), ModelError> {
    if data.is_empty() {
        return Ok((params.clone(), 0));
    }
    opt.validate()?;
    let batch_size = opt.batch_size.unwrap_or(data.len()).min(data.len());
    let mut current = params.clone();
    for epoch in 0..opt.epochs_per_round {
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut rng = Rng::from_seed(derive_seed(seed, "epoch", epoch_offset + epoch as u64));
        rng.shuffle(&mut order);
        for chunk in order.chunks(batch_size) {
            let batch: Vec<&TrainExample> = chunk.iter().map(|&i| &data[i]).collect();
            let (_, grads) = loss_and_grad(spec, &current, &batch)?;
            current = sgd_step(&current, &grads, mask, opt.learning_rate)?;
        }
    }
    Ok((current, data.len() as u64))
}
