//! Protocol-level invariants of the federation orchestrator: what leaves a
//! client, what the server may change, and what stays frozen.

use fedshot_core::data::{LabeledExample, Polarity};
use fedshot_core::federation::{ClientData, FederationConfig, SeedRun};
use fedshot_core::model::{FeaturizerConfig, ModelSpec, OptimizerConfig};
use fedshot_core::params::PartitionSpec;

fn example(id: &str, text: &str, polarity: Polarity) -> LabeledExample {
    LabeledExample {
        id: id.to_string(),
        text: text.to_string(),
        language: "zxx".to_string(),
        target_group: "g".to_string(),
        polarity,
        profanity: false,
        source: None,
        ai_generated: false,
    }
}

fn four_client_config(partition: PartitionSpec) -> FederationConfig {
    let client = |id: &str, salt: usize| {
        let pool: Vec<LabeledExample> = (0..16)
            .map(|i| {
                let (text, polarity) = if i % 2 == 0 {
                    (format!("dark grim spite {salt} {i}"), Polarity::Hateful)
                } else {
                    (format!("warm bright kind {salt} {i}"), Polarity::Positive)
                };
                example(&format!("{id}-p{i}"), &text, polarity)
            })
            .collect();
        let test: Vec<LabeledExample> = (0..8)
            .map(|i| {
                let (text, polarity) = if i % 2 == 0 {
                    (format!("dark grim spite t{i}"), Polarity::Hateful)
                } else {
                    (format!("warm bright kind t{i}"), Polarity::Positive)
                };
                example(&format!("{id}-t{i}"), &text, polarity)
            })
            .collect();
        ClientData {
            id: id.to_string(),
            train_pool: pool,
            test,
            few_shot_n: 9,
        }
    };
    FederationConfig {
        clients: vec![
            client("afr-black", 1),
            client("afr-lgbtq", 2),
            client("rus-lgbtq", 3),
            client("rus-war", 4),
        ],
        model: ModelSpec::new(128, 8, 4, 4),
        featurizer: FeaturizerConfig {
            hash_dim: 128,
            ..FeaturizerConfig::default()
        },
        opt: OptimizerConfig {
            learning_rate: 0.5,
            batch_size: None,
            epochs_per_round: 1,
        },
        partition,
        rounds: 5,
        seeds: vec![11],
    }
}

fn bits_equal(a: &[f32], b: &[f32]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

#[test]
fn fedper_personal_keys_never_reach_the_server() {
    for k_p in 1..=4usize {
        let cfg = four_client_config(PartitionSpec::fed_per(k_p));
        let mut run = SeedRun::new(&cfg, 3).unwrap();
        let initial = run.server().clone();
        let personal = run.partition().personal.clone();
        assert_eq!(personal.len(), k_p, "k_p={k_p}");

        for _ in 0..cfg.rounds {
            let summary = run.run_round().unwrap();
            for payload in &summary.payloads {
                for key in payload.update.keys() {
                    assert!(
                        !run.partition().is_personal(key),
                        "personal key {key} in payload at k_p={k_p}"
                    );
                }
            }
            // Every personal key on the server is still at initialization.
            for (key, values) in run.server().iter() {
                if run.partition().is_personal(key) {
                    assert!(
                        bits_equal(values, initial.get(key).unwrap()),
                        "server personal key {key} changed at k_p={k_p}"
                    );
                }
            }
        }
        // Shared keys did move once training happened.
        assert!(
            !run.server().bits_eq(&initial),
            "server never updated at k_p={k_p}"
        );
    }
}

#[test]
fn adapter_full_payloads_never_contain_adapter_keys() {
    let cfg = four_client_config(PartitionSpec::adapter_full());
    let mut run = SeedRun::new(&cfg, 5).unwrap();
    for _ in 0..cfg.rounds {
        let summary = run.run_round().unwrap();
        assert!(!summary.payloads.is_empty());
        for payload in &summary.payloads {
            assert!(!payload.update.keys().any(|k| k.starts_with("adapter")));
            // Non-adapter keys do travel.
            assert!(payload.update.keys().any(|k| k.starts_with("block")));
            assert!(payload.update.contains_key("head.weight"));
        }
    }
    // Adapters did train locally.
    let adapters_moved = run.states().iter().any(|state| {
        state
            .params
            .iter()
            .any(|(k, v)| k.starts_with("adapter") && v.iter().any(|&x| x != 0.0))
    });
    assert!(adapters_moved);
}

#[test]
fn adapter_only_freezes_every_non_adapter_parameter() {
    let cfg = four_client_config(PartitionSpec::adapter_only());
    let mut run = SeedRun::new(&cfg, 7).unwrap();
    let initial: Vec<_> = run.states().iter().map(|s| s.params.clone()).collect();
    let initial_server = run.server().clone();
    for _ in 0..cfg.rounds {
        let summary = run.run_round().unwrap();
        // Nothing is shared, so nothing is pushed and the server never moves.
        assert!(summary.payloads.is_empty());
        assert!(!summary.server_updated);
    }
    assert!(run.server().bits_eq(&initial_server));
    for (state, start) in run.states().iter().zip(&initial) {
        let mut trained_adapters = 0;
        for (key, values) in state.params.iter() {
            if key.starts_with("adapter") {
                if !bits_equal(values, start.get(key).unwrap()) {
                    trained_adapters += 1;
                }
            } else {
                assert!(
                    bits_equal(values, start.get(key).unwrap()),
                    "non-adapter key {key} moved under adapter-only training"
                );
            }
        }
        assert!(trained_adapters > 0, "client {} never trained", state.id);
    }
}

#[test]
fn standard_strategy_shares_everything_and_converges_bitwise_across_clients() {
    let cfg = four_client_config(PartitionSpec::standard());
    let mut run = SeedRun::new(&cfg, 9).unwrap();
    for _ in 0..cfg.rounds {
        run.run_round().unwrap();
    }
    // After a pull at the start of the next round every client would hold
    // the same map; verify the server equals the fed_avg of final payloads
    // indirectly by pulling once more.
    let server = run.server().clone();
    let mut next = SeedRun::new(&cfg, 9).unwrap();
    for _ in 0..cfg.rounds {
        next.run_round().unwrap();
    }
    assert!(server.bits_eq(next.server()), "two identical runs diverged");
}
