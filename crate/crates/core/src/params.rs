//! Model parameter containers, strategy-driven key partitioning, and
//! federated aggregation.
//!
//! A [`ParameterMap`] is the unit of federation: an ordered map from a
//! dot-separated layer path (`"block3.weight"`) to a flat vector of `f32`
//! weights. [`fed_avg`] computes the sample-count-weighted average of client
//! updates; [`partition_keys`] splits a model's layer groups into shared and
//! personal sets for the personalization strategies; [`merge_shared`] and
//! [`restrict`] implement the pull and push halves of a federation round.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::model::{GroupKind, ModelSpec};

/// Errors from parameter-map operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamError {
    /// `fed_avg` was called with no updates.
    EmptyUpdateSet,
    /// An update carried a zero sample count.
    ZeroSampleCount { index: usize },
    /// Two maps disagree on a key's vector length.
    ShapeMismatch {
        key: String,
        expected: usize,
        got: usize,
    },
    /// A key required by the operation is absent.
    MissingKey { key: String },
    /// A key not present in the reference map was encountered.
    UnexpectedKey { key: String },
    /// A value was NaN or infinite.
    NonFiniteValue { key: String },
    /// Duplicate key during construction.
    DuplicateKey { key: String },
    /// FedPer personalized-layer count out of range for the model.
    InvalidKp { k_p: usize, max: usize },
}

impl fmt::Display for ParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamError::EmptyUpdateSet => write!(f, "empty update set"),
            ParamError::ZeroSampleCount { index } => {
                write!(f, "update {index} has sample count 0")
            }
            ParamError::ShapeMismatch { key, expected, got } => {
                write!(
                    f,
                    "shape mismatch at '{key}': expected {expected}, got {got}"
                )
            }
            ParamError::MissingKey { key } => write!(f, "missing key '{key}'"),
            ParamError::UnexpectedKey { key } => write!(f, "unexpected key '{key}'"),
            ParamError::NonFiniteValue { key } => write!(f, "non-finite value under '{key}'"),
            ParamError::DuplicateKey { key } => write!(f, "duplicate key '{key}'"),
            ParamError::InvalidKp { k_p, max } => {
                write!(f, "k_p={k_p} out of range (max {max})")
            }
        }
    }
}

impl core::error::Error for ParamError {}

/// Ordered map from layer path to a flat vector of 32-bit weights.
///
/// Iteration order is lexicographic by key. Treated as an immutable value
/// after construction: every operation in this module returns a new map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterMap {
    entries: BTreeMap<String, Vec<f32>>,
}

impl ParameterMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from `(key, values)` pairs, rejecting duplicate keys.
    pub fn from_entries<I>(entries: I) -> Result<Self, ParamError>
    where
        I: IntoIterator<Item = (String, Vec<f32>)>,
    {
        let mut map = BTreeMap::new();
        for (key, values) in entries {
            if map.insert(key.clone(), values).is_some() {
                return Err(ParamError::DuplicateKey { key });
            }
        }
        Ok(Self { entries: map })
    }

    pub fn insert(&mut self, key: impl Into<String>, values: Vec<f32>) {
        self.entries.insert(key.into(), values);
    }

    pub fn get(&self, key: &str) -> Option<&[f32]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar values across all entries.
    pub fn value_count(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    /// Identical key sets and per-key vector lengths.
    pub fn shape_compatible(&self, other: &ParameterMap) -> bool {
        self.check_same_shape(other).is_ok()
    }

    pub fn check_same_shape(&self, other: &ParameterMap) -> Result<(), ParamError> {
        for (key, values) in &self.entries {
            match other.entries.get(key) {
                None => return Err(ParamError::MissingKey { key: key.clone() }),
                Some(v) if v.len() != values.len() => {
                    return Err(ParamError::ShapeMismatch {
                        key: key.clone(),
                        expected: values.len(),
                        got: v.len(),
                    })
                }
                Some(_) => {}
            }
        }
        for key in other.entries.keys() {
            if !self.entries.contains_key(key) {
                return Err(ParamError::UnexpectedKey { key: key.clone() });
            }
        }
        Ok(())
    }

    /// Bit-level equality (distinguishes `-0.0` from `0.0`; NaN-safe).
    pub fn bits_eq(&self, other: &ParameterMap) -> bool {
        if self.entries.len() != other.entries.len() {
            return false;
        }
        self.entries
            .iter()
            .zip(other.entries.iter())
            .all(|((ka, va), (kb, vb))| {
                ka == kb
                    && va.len() == vb.len()
                    && va
                        .iter()
                        .zip(vb.iter())
                        .all(|(a, b)| a.to_bits() == b.to_bits())
            })
    }

    /// First key holding a NaN or infinite value, if any.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.entries
            .iter()
            .find(|(_, v)| v.iter().any(|x| !x.is_finite()))
            .map(|(k, _)| k.as_str())
    }

    /// Overwrite values for every key present in `other`.
    ///
    /// Every key of `other` must already exist here with the same length;
    /// this is the server-side application of an aggregated shared update.
    pub fn overwrite_from(&mut self, other: &ParameterMap) -> Result<(), ParamError> {
        for (key, values) in &other.entries {
            match self.entries.get_mut(key) {
                None => return Err(ParamError::MissingKey { key: key.clone() }),
                Some(slot) if slot.len() != values.len() => {
                    return Err(ParamError::ShapeMismatch {
                        key: key.clone(),
                        expected: slot.len(),
                        got: values.len(),
                    })
                }
                Some(slot) => slot.copy_from_slice(values),
            }
        }
        Ok(())
    }
}

impl FromIterator<(String, Vec<f32>)> for ParameterMap {
    fn from_iter<I: IntoIterator<Item = (String, Vec<f32>)>>(iter: I) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}

/// True when `key` equals `prefix` or falls under it as a dotted path.
///
/// `"block1"` matches `"block1.weight"` but not `"block10.weight"`.
pub fn key_under_prefix(key: &str, prefix: &str) -> bool {
    key == prefix
        || (key.len() > prefix.len()
            && key.starts_with(prefix)
            && key.as_bytes()[prefix.len()] == b'.')
}

/// True when `key` falls under any prefix in the set.
pub fn key_in_prefixes(key: &str, prefixes: &BTreeSet<String>) -> bool {
    prefixes.iter().any(|p| key_under_prefix(key, p))
}

/// Parameter-sharing strategy for a federation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// All layer groups shared, nothing personal.
    Standard,
    /// Head plus the top `k_p - 1` blocks stay private to each client.
    FedPer,
    /// All parameters train locally; adapter groups are never shared.
    AdapterFull,
    /// Only adapters train; nothing is shared, so no federation occurs.
    AdapterOnly,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Strategy::Standard => "standard",
            Strategy::FedPer => "fedper",
            Strategy::AdapterFull => "adapter_full",
            Strategy::AdapterOnly => "adapter_only",
        };
        f.write_str(s)
    }
}

/// Strategy plus the FedPer personalized-layer count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionSpec {
    pub strategy: Strategy,
    /// Number of personalized layer groups, counted from the top of the
    /// model (head first). Only meaningful for [`Strategy::FedPer`];
    /// `k_p = 0` is defined as identical to standard FL.
    pub k_p: usize,
}

impl PartitionSpec {
    pub fn standard() -> Self {
        Self {
            strategy: Strategy::Standard,
            k_p: 0,
        }
    }

    pub fn fed_per(k_p: usize) -> Self {
        Self {
            strategy: Strategy::FedPer,
            k_p,
        }
    }

    pub fn adapter_full() -> Self {
        Self {
            strategy: Strategy::AdapterFull,
            k_p: 0,
        }
    }

    pub fn adapter_only() -> Self {
        Self {
            strategy: Strategy::AdapterOnly,
            k_p: 0,
        }
    }

    /// Stable label for report files, e.g. `"fedper_kp3"`.
    pub fn label(&self) -> String {
        match self.strategy {
            Strategy::FedPer => {
                let mut s = String::from("fedper_kp");
                s.push_str(itoa(self.k_p).as_str());
                s
            }
            other => other.to_string(),
        }
    }

    /// Derived count of base (shared) layer groups under FedPer, counting
    /// head + blocks + featurizer embedding as groups.
    pub fn base_group_count(&self, model: &ModelSpec) -> usize {
        model.block_count + 2 - self.k_p
    }
}

fn itoa(mut n: usize) -> String {
    if n == 0 {
        return String::from("0");
    }
    let mut digits = Vec::new();
    while n > 0 {
        digits.push(b'0' + (n % 10) as u8);
        n /= 10;
    }
    digits.reverse();
    String::from_utf8(digits).expect("ascii digits")
}

/// Disjoint, covering split of a model's layer-path prefixes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPartition {
    pub shared: BTreeSet<String>,
    pub personal: BTreeSet<String>,
}

impl KeyPartition {
    pub fn is_shared(&self, key: &str) -> bool {
        key_in_prefixes(key, &self.shared)
    }

    pub fn is_personal(&self, key: &str) -> bool {
        key_in_prefixes(key, &self.personal)
    }
}

/// Split a model's layer groups into shared and personal prefixes.
///
/// FedPer personalizes strictly top-down: `k_p = 1` keeps only the head
/// private, `k_p = m + 1` adds the top `m` blocks. The featurizer embedding
/// is always shared under FedPer, and adapter groups (when present) ride
/// with the shared set. `adapter_full` makes exactly the adapter groups
/// personal; `adapter_only` shares nothing at all.
pub fn partition_keys(model: &ModelSpec, spec: &PartitionSpec) -> Result<KeyPartition, ParamError> {
    let layout = model.layout();
    let all_groups: BTreeSet<String> = layout.groups.iter().map(|g| g.name.clone()).collect();

    let partition = match spec.strategy {
        Strategy::Standard => KeyPartition {
            shared: all_groups,
            personal: BTreeSet::new(),
        },
        Strategy::FedPer => {
            if spec.k_p > model.block_count {
                return Err(ParamError::InvalidKp {
                    k_p: spec.k_p,
                    max: model.block_count,
                });
            }
            let mut personal = BTreeSet::new();
            if spec.k_p > 0 {
                personal.insert("head".to_string());
                // Top (k_p - 1) blocks, highest indices first.
                let mut blocks: Vec<(usize, &str)> = layout
                    .groups
                    .iter()
                    .filter_map(|g| match g.kind {
                        GroupKind::Block(i) => Some((i, g.name.as_str())),
                        _ => None,
                    })
                    .collect();
                blocks.sort_by_key(|(i, _)| core::cmp::Reverse(*i));
                for (_, name) in blocks.into_iter().take(spec.k_p - 1) {
                    personal.insert(name.to_string());
                }
            }
            let shared = all_groups.difference(&personal).cloned().collect();
            KeyPartition { shared, personal }
        }
        Strategy::AdapterFull => {
            let personal: BTreeSet<String> = layout
                .groups
                .iter()
                .filter(|g| matches!(g.kind, GroupKind::Adapter(_)))
                .map(|g| g.name.clone())
                .collect();
            let shared = all_groups.difference(&personal).cloned().collect();
            KeyPartition { shared, personal }
        }
        Strategy::AdapterOnly => KeyPartition {
            shared: BTreeSet::new(),
            personal: all_groups,
        },
    };
    Ok(partition)
}

/// Sample-count-weighted average of client updates.
///
/// `out[k][i] = sum_j (n_j / sum(n)) * update_j[k][i]`, accumulated in f64
/// and stored back as f32. Callers supply updates pre-sorted by client id so
/// the summation order, and therefore the result, is bit-stable.
pub fn fed_avg(updates: &[(ParameterMap, u64)]) -> Result<ParameterMap, ParamError> {
    if updates.is_empty() {
        return Err(ParamError::EmptyUpdateSet);
    }
    for (index, (_, n)) in updates.iter().enumerate() {
        if *n == 0 {
            return Err(ParamError::ZeroSampleCount { index });
        }
    }
    let (reference, _) = &updates[0];
    for (map, _) in updates {
        reference.check_same_shape(map)?;
        if let Some(key) = map.first_non_finite() {
            return Err(ParamError::NonFiniteValue {
                key: key.to_string(),
            });
        }
    }

    let total: u64 = updates.iter().map(|(_, n)| n).sum();
    let mut out = BTreeMap::new();
    for (key, first) in reference.iter() {
        let mut acc = alloc::vec![0.0f64; first.len()];
        for (map, n) in updates {
            let weight = *n as f64 / total as f64;
            let values = map.get(key).expect("shape checked");
            for (slot, &v) in acc.iter_mut().zip(values) {
                *slot += weight * v as f64;
            }
        }
        out.insert(
            key.to_string(),
            acc.into_iter().map(|v| v as f32).collect::<Vec<f32>>(),
        );
    }
    Ok(ParameterMap { entries: out })
}

/// Combine a client map with the server map for a round's pull.
///
/// Shared keys take the server's values, personal keys keep the client's.
/// Both inputs are left untouched.
pub fn merge_shared(
    local: &ParameterMap,
    server: &ParameterMap,
    partition: &KeyPartition,
) -> Result<ParameterMap, ParamError> {
    let mut out = BTreeMap::new();
    for (key, local_values) in local.iter() {
        if partition.is_shared(key) {
            let server_values = server.get(key).ok_or_else(|| ParamError::MissingKey {
                key: key.to_string(),
            })?;
            if server_values.len() != local_values.len() {
                return Err(ParamError::ShapeMismatch {
                    key: key.to_string(),
                    expected: local_values.len(),
                    got: server_values.len(),
                });
            }
            out.insert(key.to_string(), server_values.to_vec());
        } else {
            out.insert(key.to_string(), local_values.to_vec());
        }
    }
    Ok(ParameterMap { entries: out })
}

/// Keep exactly the entries whose layer path falls under a listed prefix.
///
/// An empty result is permitted; this builds the client-to-server payload.
pub fn restrict(map: &ParameterMap, prefixes: &BTreeSet<String>) -> ParameterMap {
    map.iter()
        .filter(|(key, _)| key_in_prefixes(key, prefixes))
        .map(|(key, values)| (key.to_string(), values.to_vec()))
        .collect()
}
