//! Implementations behind the CLI verbs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fedshot_core::data::{
    corpus_stats, verify_split_leakage, BinaryLabel, LabeledExample, Polarity, SplitPolicy,
};
use fedshot_core::eval::{
    agreement_report, classify_toxicity, delta_table, macro_f1, threshold_table, DeltaTable,
};
use fedshot_core::federation::{
    run_federation, run_single_target_baseline, ClientData, ClientSummary, FederationConfig,
    RunReport, SeedRun, ServerSummary,
};

use crate::checkpoint_io::save_checkpoint;
use crate::config::{ClientSection, ExperimentConfig};
use crate::corpus::{
    load_corpus, read_split, read_test_ids, select_by_ids, validate_file, write_split, CorpusError,
};
use crate::error::CliError;
use crate::mock_api::{load_fixture, MockApiConfig, MockApiServer};
use crate::reports::{
    read_report, summary_rows, write_delta_csv, write_json, write_series_csv, write_summary_csv,
    RunManifest, SeriesTable, SummaryRow, ThresholdTableFile,
};
use crate::toxicity::ToxicityClient;

/// Options shared by every verb.
pub struct Global {
    pub config: Option<PathBuf>,
    pub seed_override: Option<Vec<u64>>,
    pub out: Option<PathBuf>,
    pub quiet: bool,
}

impl Global {
    fn require_config(&self) -> Result<(ExperimentConfig, String), CliError> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| CliError::config("--config is required for this command"))?;
        ExperimentConfig::load(path)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out.clone().unwrap_or_else(|| cfg.output_dir.clone())
    }

    fn progress(&self, message: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", message.as_ref());
        }
    }
}

fn corpus_error(e: CorpusError) -> CliError {
    match e {
        CorpusError::Io { .. } => CliError::config(e.to_string()),
        other => CliError::runtime(other.to_string()),
    }
}

// ------------------------------------------------------------ validate-data --

pub fn cmd_validate_data(global: &Global, files: &[PathBuf]) -> Result<(), CliError> {
    if files.is_empty() {
        return Err(CliError::config("validate-data: no files given"));
    }
    let mut failures = 0usize;
    for path in files {
        match validate_file(path) {
            Err(e) => {
                println!("{}: FAILED ({e})", path.display());
                failures += 1;
            }
            Ok(report) if report.passed() => {
                println!(
                    "{}: OK ({} records, 0 errors)",
                    path.display(),
                    report.records
                );
            }
            Ok(report) => {
                println!(
                    "{}: FAILED ({} errors, {} valid records)",
                    path.display(),
                    report.diagnostics.len(),
                    report.records
                );
                for diag in &report.diagnostics {
                    println!("  line {}: {}", diag.line, diag.message);
                }
                failures += 1;
            }
        }
    }
    let _ = global;
    if failures > 0 {
        Err(CliError::Validation(format!(
            "{failures} of {} files failed validation",
            files.len()
        )))
    } else {
        Ok(())
    }
}

// ------------------------------------------------------------- build-splits --

pub fn cmd_build_splits(global: &Global) -> Result<(), CliError> {
    let (cfg, digest) = global.require_config()?;
    let out_dir = global.out_dir(&cfg);
    let mut manifest = RunManifest::new("build-splits", &digest, &[cfg.split_seed]);

    for client in &cfg.clients {
        let corpus = load_corpus(&client.corpus).map_err(corpus_error)?;
        let test_ids_path = client.test_ids.as_ref().ok_or_else(|| {
            CliError::config(format!(
                "clients[{}].test_ids: field is required",
                client.id
            ))
        })?;
        if !test_ids_path.exists() {
            return Err(CliError::config(format!(
                "clients[{}].test_ids: file not found: {}",
                client.id,
                test_ids_path.display()
            )));
        }
        let test_ids = read_test_ids(test_ids_path).map_err(corpus_error)?;
        let policy = SplitPolicy {
            dev_max_ratio: client.dev_max_ratio,
            train_max_ratio: client.train_max_ratio,
            dev_size: client.dev_size,
        };
        let split = fedshot_core::data::build_splits(&corpus, &test_ids, &policy, cfg.split_seed)
            .map_err(|e| CliError::runtime(format!("client '{}': {e}", client.id)))?;

        let path = out_dir.join("splits").join(format!("{}.json", client.id));
        write_split(&path, &split).map_err(corpus_error)?;

        // Re-verify the leakage invariants on what actually hit disk.
        let written = read_split(&path).map_err(corpus_error)?;
        verify_split_leakage(&corpus, &written, &policy).map_err(|e| {
            CliError::runtime(format!("client '{}': post-write check: {e}", client.id))
        })?;

        global.progress(format!(
            "client '{}': train {} / dev {} / test {} -> {}",
            client.id,
            split.train.len(),
            split.dev.len(),
            split.test.len(),
            path.display()
        ));
        manifest.record(&path);
    }
    let manifest_path = manifest.write(&out_dir)?;
    global.progress(format!("wrote {}", manifest_path.display()));
    Ok(())
}

// --------------------------------------------------------------------- run --

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Fl,
    Baseline,
    Api,
}

impl RunMode {
    fn as_str(&self) -> &'static str {
        match self {
            RunMode::Fl => "fl",
            RunMode::Baseline => "baseline",
            RunMode::Api => "api",
        }
    }
}

struct LoadedClient {
    section: ClientSection,
    train_pool: Vec<LabeledExample>,
    test: Vec<LabeledExample>,
}

fn load_clients(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<LoadedClient>, CliError> {
    cfg.clients
        .iter()
        .map(|client| {
            if !client.corpus.exists() {
                return Err(CliError::config(format!(
                    "clients[{}].corpus: file not found: {}",
                    client.id,
                    client.corpus.display()
                )));
            }
            let corpus = load_corpus(&client.corpus).map_err(corpus_error)?;
            let split_path = cfg.split_path(client, out_dir);
            if !split_path.exists() {
                return Err(CliError::config(format!(
                    "clients[{}].split: file not found: {} (run `fedshot build-splits` first)",
                    client.id,
                    split_path.display()
                )));
            }
            let split = read_split(&split_path).map_err(corpus_error)?;
            let train_pool = select_by_ids(&corpus, &split.train)
                .map_err(|e| CliError::runtime(format!("client '{}': {e}", client.id)))?;
            let test = select_by_ids(&corpus, &split.test)
                .map_err(|e| CliError::runtime(format!("client '{}': {e}", client.id)))?;
            Ok(LoadedClient {
                section: client.clone(),
                train_pool,
                test,
            })
        })
        .collect()
}

fn federation_config(
    cfg: &ExperimentConfig,
    loaded: &[LoadedClient],
    seeds: &[u64],
    shot: u32,
) -> FederationConfig {
    FederationConfig {
        clients: loaded
            .iter()
            .map(|c| ClientData {
                id: c.section.id.clone(),
                train_pool: c.train_pool.clone(),
                test: c.test.clone(),
                few_shot_n: shot as usize,
            })
            .collect(),
        model: cfg.model_spec(),
        featurizer: cfg.featurizer.clone(),
        opt: cfg.optimizer.clone(),
        partition: cfg.partition_spec(),
        rounds: cfg.federation.rounds,
        seeds: seeds.to_vec(),
    }
}

pub fn cmd_run(global: &Global, mode: RunMode) -> Result<(), CliError> {
    let (cfg, digest) = global.require_config()?;
    let out_dir = global.out_dir(&cfg);
    let seeds: Vec<u64> = global
        .seed_override
        .clone()
        .unwrap_or_else(|| cfg.federation.seeds.clone());
    if seeds.is_empty() {
        return Err(CliError::config("seed list is empty"));
    }
    match mode {
        RunMode::Api => run_api_mode(global, &cfg, &digest, &out_dir),
        RunMode::Fl | RunMode::Baseline => {
            run_training_mode(global, &cfg, &digest, &out_dir, &seeds, mode)
        }
    }
}

fn run_training_mode(
    global: &Global,
    cfg: &ExperimentConfig,
    digest: &str,
    out_dir: &Path,
    seeds: &[u64],
    mode: RunMode,
) -> Result<(), CliError> {
    let loaded = load_clients(cfg, out_dir)?;
    let reports_dir = out_dir.join("reports");
    let mut manifest = RunManifest::new(&format!("run-{}", mode.as_str()), digest, seeds);
    let mut rows: Vec<SummaryRow> = Vec::new();

    for &shot in &cfg.sweep {
        let fed = federation_config(cfg, &loaded, seeds, shot);
        let report = match mode {
            RunMode::Fl => run_federation(&fed),
            RunMode::Baseline => run_single_target_baseline(&fed),
            RunMode::Api => unreachable!(),
        }
        .map_err(|e| CliError::runtime(format!("shot {shot}: {e}")))?;

        let path = reports_dir.join(format!(
            "report_{}_{}_shot{shot}.json",
            mode.as_str(),
            report.strategy
        ));
        write_json(&path, &report)?;
        manifest.record(&path);
        rows.extend(summary_rows(mode.as_str(), &report));
        global.progress(format!(
            "{} strategy {} shot {shot}: {} clients, {} seeds -> {}",
            mode.as_str(),
            report.strategy,
            report.per_client.len(),
            report.seeds.len(),
            path.display()
        ));

        if cfg.save_checkpoints && mode == RunMode::Fl {
            save_run_checkpoints(cfg, &fed, out_dir, shot, &mut manifest)?;
        }
    }

    let summary_path = reports_dir.join(format!("summary_{}.csv", mode.as_str()));
    write_summary_csv(&summary_path, &rows)?;
    manifest.record(&summary_path);
    let manifest_path = manifest.write(out_dir)?;
    global.progress(format!("wrote {}", manifest_path.display()));
    Ok(())
}

/// Replay the first seed and store final server and client parameters.
fn save_run_checkpoints(
    cfg: &ExperimentConfig,
    fed: &FederationConfig,
    out_dir: &Path,
    shot: u32,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let seed = fed.seeds[0];
    let mut run = SeedRun::new(fed, seed).map_err(|e| CliError::runtime(e.to_string()))?;
    for _ in 0..fed.rounds {
        run.run_round()
            .map_err(|e| CliError::runtime(e.to_string()))?;
    }
    let dir = out_dir.join("checkpoints");
    let label = fed.partition.label();
    let spec = cfg.model_spec();
    let server_path = dir.join(format!("{label}_shot{shot}_seed{seed}_server.ckpt"));
    save_checkpoint(&server_path, run.server(), &spec)?;
    manifest.record(&server_path);
    for state in run.states() {
        let path = dir.join(format!(
            "{label}_shot{shot}_seed{seed}_client_{}.ckpt",
            state.id
        ));
        save_checkpoint(&path, &state.params, &spec)?;
        manifest.record(&path);
    }
    Ok(())
}

fn run_api_mode(
    global: &Global,
    cfg: &ExperimentConfig,
    digest: &str,
    out_dir: &Path,
) -> Result<(), CliError> {
    let tox = cfg
        .toxicity
        .as_ref()
        .ok_or_else(|| CliError::config("toxicity: section is required for --mode api"))?;
    let client = ToxicityClient::from_section(tox)?;
    let loaded = load_clients(cfg, out_dir)?;
    let reports_dir = out_dir.join("reports");
    let mut manifest = RunManifest::new("run-api", digest, &[]);

    // Score every client's test set once; order clients by id so the
    // combined blocks are stable.
    let mut by_id: Vec<&LoadedClient> = loaded.iter().collect();
    by_id.sort_by(|a, b| a.section.id.cmp(&b.section.id));

    struct ScoredClient<'a> {
        id: &'a str,
        gold: Vec<BinaryLabel>,
        profanity: Vec<bool>,
        scores: Vec<f64>,
    }
    let mut scored_clients = Vec::new();
    let mut clamped_total = 0usize;
    for lc in &by_id {
        let texts: Vec<String> = lc.test.iter().map(|e| e.text.clone()).collect();
        let scored = client
            .score_many(&texts)
            .map_err(|e| CliError::runtime(format!("client '{}': {e}", lc.section.id)))?;
        clamped_total += scored.iter().filter(|s| s.clamped).count();
        scored_clients.push(ScoredClient {
            id: &lc.section.id,
            gold: lc.test.iter().map(|e| e.binary_label()).collect(),
            profanity: lc.test.iter().map(|e| e.profanity).collect(),
            scores: scored.iter().map(|s| s.score).collect(),
        });
    }
    if clamped_total > 0 {
        eprintln!("warning: {clamped_total} scores were outside [0, 1] and were clamped");
    }

    let combined_items: Vec<(BinaryLabel, bool)> = scored_clients
        .iter()
        .flat_map(|c| c.gold.iter().copied().zip(c.profanity.iter().copied()))
        .collect();
    let combined_scores: Vec<f64> = scored_clients
        .iter()
        .flat_map(|c| c.scores.iter().copied())
        .collect();

    let mut rows: Vec<SummaryRow> = Vec::new();
    for &threshold in &tox.thresholds {
        let mut per_client = BTreeMap::new();
        for sc in &scored_clients {
            let pred: Vec<BinaryLabel> = sc
                .scores
                .iter()
                .map(|&s| classify_toxicity(s, threshold))
                .collect();
            let result = macro_f1(&sc.gold, &pred)
                .map_err(|e| CliError::runtime(format!("client '{}': {e}", sc.id)))?;
            per_client.insert(
                sc.id.to_string(),
                ClientSummary {
                    per_seed_f1: vec![result.macro_f1],
                    mean_f1: result.macro_f1,
                    std_f1: 0.0,
                },
            );
        }
        let combined_pred: Vec<BinaryLabel> = combined_scores
            .iter()
            .map(|&s| classify_toxicity(s, threshold))
            .collect();
        let combined_gold: Vec<BinaryLabel> = combined_items.iter().map(|(g, _)| *g).collect();
        let server_f1 = macro_f1(&combined_gold, &combined_pred)
            .map_err(|e| CliError::runtime(e.to_string()))?
            .macro_f1;

        let report = RunReport {
            config_digest: digest.to_string(),
            strategy: format!("api@{threshold}"),
            seeds: Vec::new(),
            rounds: 0,
            shot_count: None,
            per_client,
            server: ServerSummary {
                per_seed_f1: Some(vec![server_f1]),
                mean_f1: Some(server_f1),
            },
        };
        let path = reports_dir.join(format!("report_api_t{threshold}.json"));
        write_json(&path, &report)?;
        manifest.record(&path);
        rows.extend(summary_rows("api", &report));
        global.progress(format!("api threshold {threshold} -> {}", path.display()));
    }

    let table = threshold_table(&combined_items, &combined_scores, &tox.thresholds)
        .map_err(|e| CliError::runtime(e.to_string()))?;
    let table_path = reports_dir.join("api_threshold_table.json");
    write_json(&table_path, &ThresholdTableFile::rounded_from(&table))?;
    manifest.record(&table_path);

    let summary_path = reports_dir.join("summary_api.csv");
    write_summary_csv(&summary_path, &rows)?;
    manifest.record(&summary_path);
    let manifest_path = manifest.write(out_dir)?;
    global.progress(format!("wrote {}", manifest_path.display()));
    Ok(())
}

// ------------------------------------------------------------------ report --

pub fn cmd_report(global: &Global, paths: &[PathBuf]) -> Result<(), CliError> {
    if paths.is_empty() {
        return Err(CliError::config("report: no report files given"));
    }
    let out_dir = global.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::runtime(format!("{}: {e}", out_dir.display())))?;

    let reports: Vec<RunReport> = paths
        .iter()
        .map(|p| read_report(p))
        .collect::<Result<_, _>>()?;

    let mut fl_reports: Vec<&RunReport> = Vec::new();
    let mut baseline_by_shot: BTreeMap<u32, &RunReport> = BTreeMap::new();
    let mut api_reports: BTreeMap<String, &RunReport> = BTreeMap::new();
    for report in &reports {
        if report.strategy == "single_target" {
            let shot = report.shot_count.ok_or_else(|| {
                CliError::runtime("single_target report is missing its shot count".to_string())
            })?;
            baseline_by_shot.insert(shot, report);
        } else if report.strategy.starts_with("api@") {
            api_reports.insert(report.strategy.clone(), report);
        } else {
            fl_reports.push(report);
        }
    }
    if fl_reports.is_empty() {
        return Err(CliError::runtime(
            "no federated run reports given".to_string(),
        ));
    }
    if baseline_by_shot.is_empty() && api_reports.is_empty() {
        return Err(CliError::runtime("no baseline reports given".to_string()));
    }
    fl_reports.sort_by(|a, b| (&a.strategy, a.shot_count).cmp(&(&b.strategy, b.shot_count)));

    // Delta tables per FL report.
    let mut tables: Vec<DeltaTable> = Vec::new();
    for fl in &fl_reports {
        let shot = fl.shot_count.ok_or_else(|| {
            CliError::runtime(format!(
                "fl report '{}' is missing its shot count",
                fl.strategy
            ))
        })?;
        let mut baselines: BTreeMap<String, RunReport> = BTreeMap::new();
        if !baseline_by_shot.is_empty() {
            let base = baseline_by_shot.get(&shot).ok_or_else(|| {
                CliError::runtime(format!("no single_target baseline for shot {shot}"))
            })?;
            baselines.insert("no_fl".to_string(), (*base).clone());
        }
        for (name, report) in &api_reports {
            baselines.insert(name.clone(), (*report).clone());
        }
        let table = delta_table(fl, &baselines).map_err(|e| CliError::runtime(e.to_string()))?;
        tables.push(table);
    }
    let delta_path = out_dir.join("deltas.csv");
    write_delta_csv(&delta_path, &tables)?;
    global.progress(format!("wrote {}", delta_path.display()));

    // Per-client series files.
    let mut settings: Vec<String> = fl_reports
        .iter()
        .map(|r| r.strategy.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    if !baseline_by_shot.is_empty() {
        settings.push("single_target".to_string());
    }
    settings.extend(api_reports.keys().cloned());

    let mut shots: Vec<u32> = fl_reports.iter().filter_map(|r| r.shot_count).collect();
    shots.extend(baseline_by_shot.keys().copied());
    shots.sort_unstable();
    shots.dedup();

    let mut clients: Vec<String> = fl_reports
        .iter()
        .flat_map(|r| r.per_client.keys().cloned())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let has_server = fl_reports.iter().any(|r| r.server.mean_f1.is_some())
        || api_reports.values().any(|r| r.server.mean_f1.is_some());
    if has_server {
        clients.push("server".to_string());
    }

    let lookup = |setting: &str, shot: u32, client: &str| -> Option<(f64, f64)> {
        let report: &RunReport = if setting == "single_target" {
            baseline_by_shot.get(&shot).copied()?
        } else if setting.starts_with("api@") {
            api_reports.get(setting).copied()?
        } else {
            fl_reports
                .iter()
                .find(|r| r.strategy == setting && r.shot_count == Some(shot))
                .copied()?
        };
        if client == "server" {
            let mean = report.server.mean_f1?;
            let std = report
                .server
                .per_seed_f1
                .as_ref()
                .and_then(|v| fedshot_core::eval::mean_std(v))
                .map(|(_, s)| s)
                .unwrap_or(0.0);
            Some((mean, std))
        } else {
            report.per_client.get(client).map(|s| (s.mean_f1, s.std_f1))
        }
    };

    for client in &clients {
        let table = SeriesTable {
            client: client.clone(),
            settings: settings.clone(),
            rows: shots
                .iter()
                .map(|&shot| {
                    (
                        shot,
                        settings
                            .iter()
                            .map(|s| lookup(s, shot, client))
                            .collect::<Vec<_>>(),
                    )
                })
                .collect(),
        };
        let path = out_dir.join(format!("series_{client}.csv"));
        write_series_csv(&path, &table)?;
        global.progress(format!("wrote {}", path.display()));
    }
    Ok(())
}

// --------------------------------------------------------------- agreement --

pub fn cmd_agreement(global: &Global, file_a: &Path, file_b: &Path) -> Result<(), CliError> {
    let a = load_corpus(file_a).map_err(corpus_error)?;
    let b = load_corpus(file_b).map_err(corpus_error)?;
    let by_id: BTreeMap<&str, &LabeledExample> = b.iter().map(|e| (e.id.as_str(), e)).collect();
    if a.len() != b.len() {
        return Err(CliError::runtime(format!(
            "id mismatch: {} units vs {} units",
            a.len(),
            b.len()
        )));
    }
    let mut three_a: Vec<Polarity> = Vec::with_capacity(a.len());
    let mut three_b: Vec<Polarity> = Vec::with_capacity(a.len());
    for example in &a {
        let other = by_id.get(example.id.as_str()).ok_or_else(|| {
            CliError::runtime(format!(
                "id mismatch: '{}' missing from {}",
                example.id,
                file_b.display()
            ))
        })?;
        three_a.push(example.polarity);
        three_b.push(other.polarity);
    }
    let two_a: Vec<BinaryLabel> = three_a
        .iter()
        .map(|&p| fedshot_core::data::to_binary_label(p))
        .collect();
    let two_b: Vec<BinaryLabel> = three_b
        .iter()
        .map(|&p| fedshot_core::data::to_binary_label(p))
        .collect();

    let three =
        agreement_report(&three_a, &three_b).map_err(|e| CliError::runtime(e.to_string()))?;
    let two = agreement_report(&two_a, &two_b).map_err(|e| CliError::runtime(e.to_string()))?;

    let _ = global;
    println!("units: {}", three.n_units);
    println!("{:<12} {:>8} {:>8}", "scheme", "kappa", "alpha");
    println!(
        "{:<12} {:>8.4} {:>8.4}",
        "three_class", three.kappa, three.alpha
    );
    println!("{:<12} {:>8.4} {:>8.4}", "two_class", two.kappa, two.alpha);
    Ok(())
}

// ------------------------------------------------------------------- stats --

pub fn cmd_stats(global: &Global, files: &[PathBuf]) -> Result<(), CliError> {
    if files.is_empty() {
        return Err(CliError::config("stats: no files given"));
    }
    println!(
        "{:<24} {:>9} {:>8} {:>7} {:>8} {:>8} {:>8} {:>8} {:>9} {:>6} {:>6}",
        "file",
        "sentences",
        "tokens",
        "vocab",
        "avg_len",
        "max_len",
        "min_len",
        "len_std",
        "word_len",
        "ttr",
        "hapax"
    );
    let mut failures = 0usize;
    for path in files {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_else(|| path.display().to_string());
        let outcome = load_corpus(path)
            .map_err(|e| e.to_string())
            .and_then(|corpus| corpus_stats(&corpus).map_err(|e| e.to_string()));
        match outcome {
            Ok(stats) => {
                println!(
                    "{:<24} {:>9} {:>8} {:>7} {:>8.2} {:>8} {:>8} {:>8.2} {:>9.2} {:>6.2} {:>6.2}",
                    name,
                    stats.sentence_count,
                    stats.token_count,
                    stats.vocab_size,
                    stats.avg_sentence_len,
                    stats.max_sentence_len,
                    stats.min_sentence_len,
                    stats.std_sentence_len,
                    stats.avg_word_len,
                    stats.type_token_ratio,
                    stats.hapax_ratio
                );
            }
            Err(e) => {
                println!("{name:<24} ERROR: {e}");
                failures += 1;
            }
        }
    }
    let _ = global;
    if failures > 0 {
        Err(CliError::runtime(format!(
            "{failures} files could not be analyzed"
        )))
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------- mock-api --

pub fn cmd_mock_api(
    global: &Global,
    fixture_path: &Path,
    addr: &str,
    perspective: bool,
) -> Result<(), CliError> {
    let fixture = load_fixture(fixture_path)?;
    let server = MockApiServer::spawn_at(
        addr,
        MockApiConfig {
            fixture,
            perspective,
            ..Default::default()
        },
    )
    .map_err(|e| CliError::runtime(format!("cannot bind {addr}: {e}")))?;
    let _ = global;
    println!("mock toxicity api listening on {}", server.url());
    println!("press Ctrl-C to stop");
    loop {
        std::thread::sleep(std::time::Duration::from_secs(3600));
    }
}
