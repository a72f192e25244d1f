//! Shared end-to-end synthetic run and a minimal chat-completions server.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use augcat_core::augmentation::{assemble_augmented, build_pool, select_best_per_task, AugmentedTest, CandidateItem};
use augcat_core::cat::{simulate_batch, CatConfig, CatMode, CatTrace};
use augcat_core::data::{default_channels, fixture_bank, generate_synthetic, partition, SyntheticCohort};
use augcat_core::diagnostics::{purify, DEFAULT_Q3_THRESHOLD};
use augcat_core::estimation::{eap_all, FitConfig};
use augcat_core::evaluation::TestRun;
use augcat_core::scoring::{
    builtin_templates, records_to_matrix, score_corpus, standard_tasks, CandidateKey, CorpusSpec, LookupBackend,
    ScorerConfig, TextRecord,
};
use augcat_core::{ItemBank, ResponseMatrix};

pub struct Study {
    pub cohort: SyntheticCohort,
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub baseline: ItemBank,
    pub pool: Vec<CandidateItem>,
    pub best: AugmentedTest,
    pub top5: AugmentedTest,
    /// CAT input for the held-out respondents: rating items plus scores.
    pub test_matrix: ResponseMatrix,
    pub test_thetas: Vec<f64>,
    pub runs: Vec<TestRun>,
    pub elapsed: Duration,
}

impl Study {
    pub fn run(&self, name: &str) -> &TestRun {
        self.runs.iter().find(|r| r.name == name).expect("known test")
    }
}

pub const BASELINE: &str = "baseline";
pub const BEST: &str = "best_all_items";
pub const TOP5: &str = "top_5";

pub fn placeholder_texts(ids: &[String]) -> Vec<TextRecord> {
    let tasks = standard_tasks();
    ids.iter()
        .flat_map(|id| {
            tasks.iter().map(move |t| TextRecord {
                respondent_id: id.clone(),
                task: t.code.clone(),
                text: format!("response of {id} to {}", t.code),
            })
        })
        .collect()
}

pub fn cat_traces(bank: &ItemBank, mode: CatMode, matrix: &ResponseMatrix) -> Vec<CatTrace> {
    let config = CatConfig::new(bank.clone(), FitConfig::default().grid, mode).unwrap();
    simulate_batch(&config, matrix).unwrap()
}

/// Generates a cohort, purifies and freezes the baseline on the training
/// split, scores every text with the lookup stub, builds both augmented
/// tests and simulates all three CATs on the test split.
pub fn synthetic_study(n: usize, seed: u64, work_dir: &Path) -> Study {
    let started = Instant::now();
    let tasks = standard_tasks();
    let channels = default_channels(&tasks, (1.0, 2.0), seed);
    let cohort = generate_synthetic(n, &fixture_bank(42), &channels, seed).unwrap();
    let (train, test) = partition(cohort.respondent_ids(), seed).unwrap();
    let config = FitConfig {
        seed,
        ..FitConfig::default()
    };

    let train_responses = cohort.responses.select_respondents(&train).unwrap();
    let baseline = purify(&train_responses, &config, DEFAULT_Q3_THRESHOLD)
        .unwrap()
        .bank
        .into_frozen();

    let backend = LookupBackend::from_records(&cohort.score_records().unwrap());
    let scorer = ScorerConfig {
        backoff_base: Duration::from_millis(1),
        max_concurrent: 8,
        ..ScorerConfig::default()
    };
    let templates = builtin_templates();
    let spec = CorpusSpec {
        templates: &templates,
        tasks: &tasks,
        country: "Chinese",
    };
    let ids = cohort.respondent_ids().to_vec();
    let records = score_corpus(
        &backend,
        &scorer,
        &spec,
        &placeholder_texts(&ids),
        &work_dir.join("scores.jsonl"),
    )
    .unwrap();
    let scores = records_to_matrix(&records, &ids, &CandidateKey::all(&tasks)).unwrap();

    let train_scores = scores.select_respondents(&train).unwrap();
    let train_thetas: Vec<f64> = eap_all(&train_responses, &baseline, &config.grid)
        .unwrap()
        .iter()
        .map(|e| e.theta)
        .collect();
    let pool = build_pool(&train_scores, &baseline, &train_responses, &train_thetas, &config).unwrap();
    let winners = select_best_per_task(&pool).unwrap().winners;
    let best = assemble_augmented(
        &winners,
        None,
        &baseline,
        &train_responses,
        &train_scores,
        &config,
        DEFAULT_Q3_THRESHOLD,
    )
    .unwrap();
    let top5 = assemble_augmented(
        &winners,
        Some(5),
        &baseline,
        &train_responses,
        &train_scores,
        &config,
        DEFAULT_Q3_THRESHOLD,
    )
    .unwrap();

    let test_matrix = cohort
        .responses
        .hstack(&scores)
        .unwrap()
        .select_respondents(&test)
        .unwrap();
    let test_thetas: Vec<f64> = test
        .iter()
        .map(|id| cohort.thetas[cohort.responses.respondent_index(id).unwrap()])
        .collect();
    let runs = vec![
        TestRun::new(BASELINE, cat_traces(&baseline, CatMode::Baseline, &test_matrix)),
        TestRun::new(BEST, cat_traces(&best.bank, CatMode::Augmented, &test_matrix)),
        TestRun::new(TOP5, cat_traces(&top5.bank, CatMode::Augmented, &test_matrix)),
    ];
    Study {
        cohort,
        train,
        test,
        baseline,
        pool,
        best,
        top5,
        test_matrix,
        test_thetas,
        runs,
        elapsed: started.elapsed(),
    }
}

/// Reply decided per request: HTTP status and message content.
pub type Responder = dyn Fn(usize, &str) -> (u16, String) + Send + Sync;

pub struct StubServer {
    pub base_url: String,
    pub requests: Arc<AtomicUsize>,
}

/// Serves `POST /v1/chat/completions` on an ephemeral local port, one
/// connection per request.
pub fn stub_server(responder: Arc<Responder>) -> StubServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base_url = format!("http://{}/v1", listener.local_addr().unwrap());
    let requests = Arc::new(AtomicUsize::new(0));
    let counter = Arc::clone(&requests);
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let responder = Arc::clone(&responder);
            let counter = Arc::clone(&counter);
            thread::spawn(move || {
                let _ = handle(stream, &*responder, &counter);
            });
        }
    });
    StubServer { base_url, requests }
}

fn handle(stream: TcpStream, responder: &Responder, counter: &AtomicUsize) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut length = 0usize;
    let mut line = String::new();
    reader.read_line(&mut line)?;
    loop {
        line.clear();
        reader.read_line(&mut line)?;
        let header = line.trim_end();
        if header.is_empty() {
            break;
        }
        if let Some((name, value)) = header.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body)?;
    let request: serde_json::Value = serde_json::from_slice(&body).unwrap_or_default();
    let prompt = request["messages"][0]["content"]
        .as_str()
        .unwrap_or_default()
        .to_string();
    let n = counter.fetch_add(1, Ordering::SeqCst);
    let (status, content) = responder(n, &prompt);
    let payload = serde_json::json!({
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]
    })
    .to_string();
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    )?;
    stream.flush()
}
