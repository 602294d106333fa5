//! Analytic gradients vs central finite differences.
//!
//! The reference forward pass below is written from the architecture
//! definition, independently of the implementation, and serves two roles:
//! cross-checking `forward` outputs and measuring how close each ReLU
//! pre-activation sits to its kink. Finite differences are only a valid
//! oracle away from the kinks, so candidate models whose smallest
//! pre-activation magnitude falls under a safety margin are re-drawn.

use fedshot_core::data::BinaryLabel;
use fedshot_core::model::{forward, loss_and_grad, ModelSpec, SparseVec, TrainExample};
use fedshot_core::params::ParameterMap;
use fedshot_core::rng::Rng;

const EPSILON: f64 = 1e-3;
const KINK_MARGIN: f64 = 2e-2;

/// Reference forward: returns class probabilities and every ReLU
/// pre-activation encountered.
fn reference_forward(
    spec: &ModelSpec,
    params: &ParameterMap,
    features: &SparseVec,
) -> ([f64; 2], Vec<f64>) {
    let e = spec.embed_dim;
    let get = |key: &str| params.get(key).unwrap();

    let mut h: Vec<f64> = get("featurizer_embed.bias")
        .iter()
        .map(|&b| b as f64)
        .collect();
    let we = get("featurizer_embed.weight");
    for (idx, v) in features.iter() {
        for o in 0..e {
            h[o] += v as f64 * we[idx as usize * e + o] as f64;
        }
    }

    let mut preacts = Vec::new();
    for i in 1..=spec.block_count {
        let w = get(&format!("block{i}.weight"));
        let b = get(&format!("block{i}.bias"));
        let mut z = vec![0.0f64; e];
        for o in 0..e {
            z[o] = b[o] as f64;
            for (iin, &x) in h.iter().enumerate() {
                z[o] += x * w[iin * e + o] as f64;
            }
        }
        preacts.extend(z.iter().copied());
        let mut u: Vec<f64> = h.clone();
        for o in 0..e {
            u[o] += z[o].max(0.0);
        }
        if spec.adapter_dim > 0 {
            let a_dim = spec.adapter_dim;
            let dw = get(&format!("adapter{i}.down_weight"));
            let db = get(&format!("adapter{i}.down_bias"));
            let uw = get(&format!("adapter{i}.up_weight"));
            let ub = get(&format!("adapter{i}.up_bias"));
            let mut za = vec![0.0f64; a_dim];
            for j in 0..a_dim {
                za[j] = db[j] as f64;
                for (iin, &x) in u.iter().enumerate() {
                    za[j] += x * dw[iin * a_dim + j] as f64;
                }
            }
            preacts.extend(za.iter().copied());
            let mut out = u.clone();
            for o in 0..e {
                out[o] += ub[o] as f64;
                for j in 0..a_dim {
                    out[o] += za[j].max(0.0) * uw[j * e + o] as f64;
                }
            }
            h = out;
        } else {
            h = u;
        }
    }

    let wh = get("head.weight");
    let bh = get("head.bias");
    let mut logits = [bh[0] as f64, bh[1] as f64];
    for (iin, &x) in h.iter().enumerate() {
        logits[0] += x * wh[iin * 2] as f64;
        logits[1] += x * wh[iin * 2 + 1] as f64;
    }
    let m = logits[0].max(logits[1]);
    let z = (logits[0] - m).exp() + (logits[1] - m).exp();
    (
        [(logits[0] - m).exp() / z, (logits[1] - m).exp() / z],
        preacts,
    )
}

fn random_params(spec: &ModelSpec, rng: &mut Rng) -> ParameterMap {
    spec.layout()
        .keys()
        .map(|(key, len)| {
            let scale = if key.ends_with("bias") { 0.1 } else { 0.4 };
            let values = (0..len)
                .map(|_| (scale * (2.0 * rng.next_f64() - 1.0)) as f32)
                .collect();
            (key.to_string(), values)
        })
        .collect()
}

fn random_batch(spec: &ModelSpec, rng: &mut Rng, size: usize) -> Vec<TrainExample> {
    (0..size)
        .map(|_| {
            let nnz = 2 + rng.next_below(4) as usize;
            let mut indices: Vec<u32> = Vec::new();
            while indices.len() < nnz {
                let idx = rng.next_below(spec.hash_dim as u64) as u32;
                if !indices.contains(&idx) {
                    indices.push(idx);
                }
            }
            indices.sort_unstable();
            let raw: Vec<f64> = (0..nnz).map(|_| rng.next_f64() + 0.1).collect();
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            let entries = indices
                .into_iter()
                .zip(raw)
                .map(|(i, v)| (i, (v / norm) as f32))
                .collect();
            TrainExample {
                features: SparseVec::from_sorted(entries),
                label: if rng.next_below(2) == 0 {
                    BinaryLabel::NonHateful
                } else {
                    BinaryLabel::Hateful
                },
            }
        })
        .collect()
}

/// Draw (params, batch) pairs until all pre-activations clear the kink
/// margin.
fn well_conditioned_case(
    spec: &ModelSpec,
    rng: &mut Rng,
    batch_size: usize,
) -> (ParameterMap, Vec<TrainExample>) {
    for _ in 0..200 {
        let params = random_params(spec, rng);
        let batch = random_batch(spec, rng, batch_size);
        let margin = batch
            .iter()
            .flat_map(|ex| reference_forward(spec, &params, &ex.features).1)
            .fold(f64::INFINITY, |acc, z| acc.min(z.abs()));
        if margin > KINK_MARGIN {
            return (params, batch);
        }
    }
    panic!("could not draw a kink-free model in 200 attempts");
}

fn perturbed(params: &ParameterMap, key: &str, index: usize, delta: f64) -> ParameterMap {
    let mut values = params.get(key).unwrap().to_vec();
    values[index] = (values[index] as f64 + delta) as f32;
    let mut out: ParameterMap = params
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_vec()))
        .collect();
    out.insert(key, values);
    out
}

/// Max relative error between analytic and numeric gradients over every
/// parameter, with the denominator floored so near-zero entries are held to
/// an absolute tolerance instead of a meaningless ratio.
fn max_gradient_error(spec: &ModelSpec, params: &ParameterMap, batch: &[TrainExample]) -> f64 {
    let refs: Vec<&TrainExample> = batch.iter().collect();
    let (_, grads) = loss_and_grad(spec, params, &refs).unwrap();
    let mut worst = 0.0f64;
    for (key, values) in params.iter() {
        for index in 0..values.len() {
            let plus = perturbed(params, key, index, EPSILON);
            let minus = perturbed(params, key, index, -EPSILON);
            // Use the realized f32 step, not the nominal epsilon.
            let step = plus.get(key).unwrap()[index] as f64 - minus.get(key).unwrap()[index] as f64;
            let (loss_p, _) = loss_and_grad(spec, &plus, &refs).unwrap();
            let (loss_m, _) = loss_and_grad(spec, &minus, &refs).unwrap();
            let numeric = (loss_p - loss_m) / step;
            let analytic = grads.get(key).unwrap()[index] as f64;
            let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4);
            if err > worst {
                worst = err;
            }
        }
    }
    worst
}

#[test]
fn gradients_match_finite_differences_on_2_block_model() {
    let spec = ModelSpec::new(16, 4, 2, 0);
    let mut rng = Rng::from_seed(2024);
    let (params, batch) = well_conditioned_case(&spec, &mut rng, 3);
    let err = max_gradient_error(&spec, &params, &batch);
    assert!(err < 1e-3, "max relative error {err}");
}

#[test]
fn gradients_match_finite_differences_with_adapters() {
    let spec = ModelSpec::new(16, 4, 2, 3);
    let mut rng = Rng::from_seed(7);
    let (params, batch) = well_conditioned_case(&spec, &mut rng, 3);
    let err = max_gradient_error(&spec, &params, &batch);
    assert!(err < 1e-3, "max relative error {err}");
}

#[test]
fn gradients_match_over_model_sweep() {
    let mut rng = Rng::from_seed(99);
    for (embed, blocks, adapter) in [(2, 1, 0), (3, 2, 2), (8, 3, 0), (8, 3, 4), (4, 3, 2)] {
        let spec = ModelSpec::new(16, embed, blocks, adapter);
        let (params, batch) = well_conditioned_case(&spec, &mut rng, 2);
        let err = max_gradient_error(&spec, &params, &batch);
        assert!(
            err < 1e-3,
            "embed {embed} blocks {blocks} adapter {adapter}: max relative error {err}"
        );
    }
}

#[test]
fn reference_forward_agrees_with_implementation() {
    let mut rng = Rng::from_seed(5);
    for adapter in [0usize, 3] {
        let spec = ModelSpec::new(32, 5, 3, adapter);
        let params = random_params(&spec, &mut rng);
        let batch = random_batch(&spec, &mut rng, 8);
        for ex in &batch {
            let got = forward(&spec, &params, &ex.features).unwrap();
            let (expected, _) = reference_forward(&spec, &params, &ex.features);
            assert!((got[0] - expected[0]).abs() < 1e-9);
            assert!((got[1] - expected[1]).abs() < 1e-9);
        }
    }
}
