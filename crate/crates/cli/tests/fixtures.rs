//! Deterministic generator for the bundled demo fixtures, plus a sync test
//! that keeps the checked-in files byte-identical to what the generator
//! produces. Regenerate with:
//!
//! ```text
//! FEDSHOT_REGEN_FIXTURES=1 cargo test -p fedshot-cli --test fixtures
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fedshot_core::data::{build_splits, BinaryLabel, LabeledExample, Polarity, SplitPolicy};
use fedshot_core::rng::{derive_seed, fnv1a64, Rng};

const CLIENTS: [&str; 4] = ["syn-a", "syn-b", "syn-c", "syn-d"];

const HATE_A: [&str; 5] = [
    "grimzorath",
    "vexulmaw",
    "drakkanous",
    "snargulith",
    "blightorn",
];
const HATE_B: [&str; 5] = [
    "karnaxul",
    "zorblatten",
    "mordwenick",
    "uglornash",
    "festrikane",
];
const KIND_A: [&str; 5] = [
    "meloraine",
    "sunweaverly",
    "kindrelow",
    "blossamire",
    "parlinetta",
];
const KIND_B: [&str; 5] = [
    "tovirelle",
    "gleamorran",
    "softanhue",
    "welkinshine",
    "harmelody",
];
const FILLER: [&str; 12] = [
    "quon", "zel", "mira", "tok", "pasu", "lem", "dori", "vint", "sala", "nuv", "ketti", "orla",
];

fn sentence(rng: &mut Rng, content_pool: &[&str], index: usize) -> String {
    let mut words: Vec<&str> = Vec::new();
    let content_count = 2 + rng.next_below(2) as usize;
    for _ in 0..content_count {
        words.push(content_pool[rng.next_below(content_pool.len() as u64) as usize]);
    }
    let filler_count = 1 + rng.next_below(2) as usize;
    for _ in 0..filler_count {
        words.push(FILLER[rng.next_below(FILLER.len() as u64) as usize]);
    }
    rng.shuffle(&mut words);
    let mut text = words.join(" ");
    let _ = write!(text, " n{index}");
    text
}

/// 80 sentences per client: balanced labels, both dialects, half of each
/// class flagged as profane.
fn client_corpus(client: &str) -> Vec<LabeledExample> {
    let mut rng = Rng::from_seed(derive_seed(0xF1C5, client, 0));
    let mut corpus = Vec::new();
    for i in 0..80usize {
        let hateful = i % 2 == 0;
        let dialect_b = (i / 2) % 2 == 1;
        let pool: &[&str] = match (hateful, dialect_b) {
            (true, false) => &HATE_A,
            (true, true) => &HATE_B,
            (false, false) => &KIND_A,
            (false, true) => &KIND_B,
        };
        let polarity = if hateful {
            Polarity::Hateful
        } else if i % 4 == 1 {
            Polarity::Positive
        } else {
            Polarity::Neutral
        };
        corpus.push(LabeledExample {
            id: format!("{client}-{i:02}"),
            text: sentence(&mut rng, pool, i),
            language: "zxx".to_string(),
            target_group: client.to_string(),
            polarity,
            profanity: (i / 3) % 2 == 0,
            source: None,
            ai_generated: false,
        });
    }
    corpus
}

/// Every 16-index block contributes one test sentence from each
/// (label, dialect) cell, so test sets stay balanced.
fn test_ids(corpus: &[LabeledExample]) -> Vec<String> {
    corpus
        .iter()
        .enumerate()
        .filter(|(i, _)| matches!(i % 16, 0 | 5 | 10 | 15))
        .map(|(_, e)| e.id.clone())
        .collect()
}

/// Deterministic pseudo-score in [0, 1], biased toward the gold label so
/// the demo API is imperfect but informative.
fn fixture_score(example: &LabeledExample) -> f64 {
    let noise = (fnv1a64(example.text.as_bytes()) % 1000) as f64 / 1000.0;
    let score = match example.binary_label() {
        BinaryLabel::Hateful => 0.55 + 0.45 * noise,
        BinaryLabel::NonHateful => 0.45 * noise,
    };
    (score * 1000.0).round() / 1000.0
}

fn jsonl(corpus: &[LabeledExample]) -> String {
    let mut out = String::new();
    for e in corpus {
        let record = serde_json::json!({
            "id": e.id,
            "text": e.text,
            "language": e.language,
            "target_group": e.target_group,
            "polarity": match e.polarity {
                Polarity::Positive => "positive",
                Polarity::Neutral => "neutral",
                Polarity::Hateful => "hateful",
            },
            "profanity": e.profanity,
        });
        out.push_str(&serde_json::to_string(&record).unwrap());
        out.push('\n');
    }
    out
}

fn demo_config() -> String {
    let clients: Vec<serde_json::Value> = CLIENTS
        .iter()
        .map(|id| {
            serde_json::json!({
                "id": id,
                "corpus": format!("crates/cli/fixtures/corpora/{id}.jsonl"),
                "test_ids": format!("crates/cli/fixtures/test_ids/{id}.json"),
                "dev_max_ratio": 0.5,
                "train_max_ratio": 0.5,
                "dev_size": 5
            })
        })
        .collect();
    let config = serde_json::json!({
        "model": { "embed_dim": 32, "block_count": 4, "adapter_dim": 8 },
        "featurizer": { "ngram_min": 3, "ngram_max": 3, "hash_dim": 1024, "lowercase": true },
        "optimizer": { "learning_rate": 0.05, "batch_size": 3, "epochs_per_round": 1 },
        "federation": { "rounds": 5, "seeds": [1, 2, 3, 4, 5], "strategy": "standard", "k_p": 0 },
        "clients": clients,
        "sweep": [0, 3, 9, 15],
        "split_seed": 13,
        "output_dir": "out/demo",
        "toxicity": {
            "endpoint": "http://127.0.0.1:8787",
            "thresholds": [0.7, 0.9],
            "timeout_ms": 5000,
            "retries": 2,
            "profile": "simple",
            "max_in_flight": 4
        }
    });
    let mut text = serde_json::to_string_pretty(&config).unwrap();
    text.push('\n');
    text
}

fn generate() -> BTreeMap<PathBuf, String> {
    let mut files = BTreeMap::new();
    let mut api_fixture: BTreeMap<String, f64> = BTreeMap::new();
    for client in CLIENTS {
        let corpus = client_corpus(client);
        files.insert(
            PathBuf::from(format!("corpora/{client}.jsonl")),
            jsonl(&corpus),
        );
        let ids = test_ids(&corpus);
        let mut ids_json = serde_json::to_string_pretty(&ids).unwrap();
        ids_json.push('\n');
        files.insert(PathBuf::from(format!("test_ids/{client}.json")), ids_json);
        for example in &corpus {
            api_fixture.insert(example.text.clone(), fixture_score(example));
        }
    }
    let mut fixture_json = serde_json::to_string_pretty(&api_fixture).unwrap();
    fixture_json.push('\n');
    files.insert(PathBuf::from("api_fixture.json"), fixture_json);
    files.insert(PathBuf::from("demo-config.json"), demo_config());
    files
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[test]
fn fixtures_are_in_sync_with_generator() {
    let files = generate();
    let root = fixtures_dir();
    if std::env::var("FEDSHOT_REGEN_FIXTURES").is_ok() {
        for (rel, content) in &files {
            let path = root.join(rel);
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, content).unwrap();
        }
        return;
    }
    for (rel, content) in &files {
        let path = root.join(rel);
        let on_disk = std::fs::read_to_string(&path).unwrap_or_else(|e| {
            panic!(
                "{}: {e}; regenerate with FEDSHOT_REGEN_FIXTURES=1",
                path.display()
            )
        });
        assert_eq!(
            &on_disk,
            content,
            "{} is out of sync; regenerate with FEDSHOT_REGEN_FIXTURES=1",
            path.display()
        );
    }
}

/// The demo corpora must survive split filtering with enough training data
/// for the full 15-shot sweep.
#[test]
fn fixture_corpora_support_the_default_sweep() {
    for client in CLIENTS {
        let corpus = client_corpus(client);
        let ids = test_ids(&corpus);
        let policy = SplitPolicy {
            dev_max_ratio: 0.5,
            train_max_ratio: 0.5,
            dev_size: 5,
        };
        let split =
            build_splits(&corpus, &ids, &policy, 13).unwrap_or_else(|e| panic!("{client}: {e}"));
        assert!(
            split.train.len() >= 15,
            "{client}: only {} train sentences survive filtering",
            split.train.len()
        );
        // Both classes must be present in the surviving pool.
        let by_id: BTreeMap<&str, &LabeledExample> =
            corpus.iter().map(|e| (e.id.as_str(), e)).collect();
        let hateful = split
            .train
            .iter()
            .filter(|id| by_id[id.as_str()].binary_label() == BinaryLabel::Hateful)
            .count();
        assert!(hateful >= 5, "{client}: {hateful} hateful train sentences");
        assert!(split.train.len() - hateful >= 5);
    }
}
