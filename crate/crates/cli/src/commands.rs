use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use augcat_core::augmentation::{
    assemble_augmented, build_pool, select_best_per_task, AugmentedName, AugmentedTest, CandidateItem, PoolRow,
};
use augcat_core::cat::{read_traces_csv, simulate_batch, write_traces_csv, CatConfig, CatMode};
use augcat_core::data::io::{
    load_bank, read_json, read_jsonl, read_matrix_csv, read_ratings_csv, read_values_csv, save_bank, write_json,
    write_jsonl, write_matrix_csv, write_values_csv, ColumnSchema,
};
use augcat_core::data::{
    default_channels, fixture_bank, generate_synthetic, partition, partition_three, plant_duplicate,
    preprocess_ratings, Split,
};
use augcat_core::diagnostics::{purify, Q3Pair, Removal};
use augcat_core::estimation::eap_all;
use augcat_core::evaluation::{
    bank_information_equivalence, compare_tests, write_panels, ComparisonReport, DataSource, PanelInputs, TestRun,
};
use augcat_core::scoring::{
    builtin_templates, meta_path, records_to_matrix, score_corpus, standard_tasks, CandidateKey, ChatBackend,
    CorpusSpec, HttpChatBackend, LookupBackend, ScoreRecord, TextRecord,
};
use augcat_core::{ItemBank, ItemKind, ResponseMatrix};
use serde::Serialize;

use crate::config::Context;
use crate::error::CliError;
use crate::manifest;

pub const GENERATING_BANK: &str = "generating_bank.json";
pub const CHANNELS: &str = "channels.json";
pub const THETAS: &str = "thetas.csv";
pub const RESPONSES: &str = "responses.csv";
pub const EXTERNAL: &str = "external.csv";
pub const MOCK_SCORES: &str = "mock_scores.jsonl";
pub const TEXTS: &str = "texts.jsonl";
pub const SPLIT: &str = "split.json";
pub const BASELINE_BANK: &str = "baseline_bank.json";
pub const PURIFICATION_LOG: &str = "purification_log.json";
pub const SCORES: &str = "scores.jsonl";
pub const POOL: &str = "pool.jsonl";
pub const TRAINING_THETAS: &str = "training_thetas.csv";
pub const AUGMENTATION_LOG: &str = "augmentation_log.json";
pub const COMPARISON: &str = "comparison.json";
pub const EQUIVALENCE: &str = "information_equivalence.json";
pub const PANELS: &str = "panels";
pub const BASELINE: &str = "baseline";

pub fn bank_file(name: &str) -> String {
    format!("bank_{name}.json")
}

pub fn traces_file(name: &str) -> String {
    format!("traces_{name}.csv")
}

fn augmented_names(ctx: &Context) -> [String; 2] {
    [
        AugmentedName::BestAllItems.to_string(),
        AugmentedName::TopK(ctx.k).to_string(),
    ]
}

fn create_out_dir(ctx: &Context) -> Result<(), CliError> {
    std::fs::create_dir_all(&ctx.out_dir).map_err(augcat_core::Error::from)?;
    Ok(())
}

fn produced_by(command: &str) -> String {
    format!("run `augcat {command}` first")
}

pub fn synth_generate(ctx: &Context) -> Result<(), CliError> {
    if ctx.source() == DataSource::Real {
        return Err(CliError::Config(
            "synth-generate cannot run with `inputs.ratings` set".into(),
        ));
    }
    let s = &ctx.config.synthetic;
    let mut inputs = Vec::new();
    let bank = match &s.generating_bank {
        Some(path) => {
            let path = ctx.input(path);
            ctx.require(&[(path.clone(), "generating bank named in the config")])?;
            let bank = load_bank(&path)?;
            inputs.push(path);
            bank
        }
        None => fixture_bank(s.fixture_seed),
    };
    let [lo, hi] = s.strong_discrimination;
    if !(0.0 < lo && lo <= hi) {
        return Err(CliError::Config(format!("invalid strong_discrimination [{lo}, {hi}]")));
    }
    let channels = default_channels(&standard_tasks(), (lo, hi), ctx.seed);
    let cohort = generate_synthetic(s.n, &bank, &channels, ctx.seed)?;
    let responses = match &s.plant_duplicate {
        Some(source) => plant_duplicate(&cohort.responses, source, &format!("item_{:02}", bank.len() + 1))?,
        None => cohort.responses.clone(),
    };

    create_out_dir(ctx)?;
    let ids = cohort.respondent_ids().to_vec();
    let texts: Vec<TextRecord> = ids
        .iter()
        .flat_map(|id| {
            standard_tasks().into_iter().map(move |t| TextRecord {
                respondent_id: id.clone(),
                text: format!("synthetic response of {id} to {}", t.code),
                task: t.code,
            })
        })
        .collect();
    save_bank(&ctx.out(GENERATING_BANK), &bank)?;
    save_bank(
        &ctx.out(CHANNELS),
        &ItemBank::free(channels.into_iter().map(Into::into).collect())?,
    )?;
    write_values_csv(&ctx.out(THETAS), "true_theta", &ids, &cohort.thetas)?;
    write_matrix_csv(&ctx.out(RESPONSES), &responses)?;
    write_jsonl(&ctx.out(MOCK_SCORES), &cohort.score_records()?)?;
    write_jsonl(&ctx.out(TEXTS), &texts)?;

    let outputs = [GENERATING_BANK, CHANNELS, THETAS, RESPONSES, MOCK_SCORES, TEXTS].map(|f| ctx.out(f));
    record(ctx, "synth-generate", &inputs, &outputs)?;
    eprintln!(
        "generated {} respondents x {} rating items and {} mock score columns",
        responses.n_respondents(),
        responses.n_items(),
        cohort.scores.n_items()
    );
    Ok(())
}

fn record(ctx: &Context, command: &str, inputs: &[PathBuf], outputs: &[PathBuf]) -> Result<(), CliError> {
    let inputs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let outputs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    manifest::record(ctx, command, &inputs, &outputs)
}

#[derive(Serialize)]
struct PurificationLog<'a> {
    initial_items: &'a [String],
    retained: &'a [String],
    removals: &'a [Removal],
}

pub fn fit_baseline(ctx: &Context) -> Result<(), CliError> {
    let fit = ctx.fit_config()?;
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let matrix = match &ctx.config.inputs.ratings {
        Some(path) => {
            let path = ctx.input(path);
            ctx.require(&[(path.clone(), "ratings file named in the config")])?;
            let i = &ctx.config.inputs;
            let raw = read_ratings_csv(&path, &i.reverse_keyed, i.external_column.as_deref())?;
            let matrix = preprocess_ratings(&raw)?;
            create_out_dir(ctx)?;
            write_matrix_csv(&ctx.out(RESPONSES), &matrix)?;
            outputs.push(ctx.out(RESPONSES));
            if let Some(external) = &raw.external {
                write_values_csv(&ctx.out(EXTERNAL), "external", &raw.respondent_ids, external)?;
                outputs.push(ctx.out(EXTERNAL));
            }
            inputs.push(path);
            matrix
        }
        None => {
            let path = ctx.out(RESPONSES);
            ctx.require(&[(path.clone(), &produced_by("synth-generate"))])?;
            inputs.push(path.clone());
            read_matrix_csv(&path, ColumnSchema::AllOf(ItemKind::Binary))?
        }
    };

    let p = &ctx.config.partition;
    let split = if p.validation_fraction == 0.0 && (p.train_fraction - 2.0 / 3.0).abs() < 1e-12 {
        let (train, test) = partition(matrix.respondent_ids(), ctx.seed)?;
        Split {
            train,
            validation: Vec::new(),
            test,
        }
    } else {
        partition_three(
            matrix.respondent_ids(),
            p.train_fraction,
            p.validation_fraction,
            ctx.seed,
        )?
    };
    let train = matrix.select_respondents(&split.train)?;
    let purification = purify(&train, &fit, ctx.config.diagnostics.q3_threshold)?;
    let baseline = purification.bank.into_frozen();

    write_json(&ctx.out(SPLIT), &split)?;
    save_bank(&ctx.out(BASELINE_BANK), &baseline)?;
    write_json(
        &ctx.out(PURIFICATION_LOG),
        &PurificationLog {
            initial_items: matrix.item_ids(),
            retained: &purification.retained,
            removals: &purification.removals,
        },
    )?;
    outputs.extend([SPLIT, BASELINE_BANK, PURIFICATION_LOG].map(|f| ctx.out(f)));
    record(ctx, "fit-baseline", &inputs, &outputs)?;
    for r in &purification.removals {
        eprintln!("removed {}: {}", r.removed, r.reason);
    }
    eprintln!(
        "baseline bank: {} of {} items, trained on {} respondents",
        baseline.len(),
        matrix.n_items(),
        split.train.len()
    );
    Ok(())
}

pub fn score_texts(ctx: &Context) -> Result<(), CliError> {
    let scorer = ctx.scorer_config()?;
    let texts_path = match &ctx.config.inputs.texts {
        Some(p) => ctx.input(p),
        None => ctx.out(TEXTS),
    };
    let backend: Box<dyn ChatBackend> = if ctx.stub {
        let mock = ctx.out(MOCK_SCORES);
        ctx.require(&[(
            mock.clone(),
            "the stub scorer replays the mock scores of synth-generate",
        )])?;
        Box::new(LookupBackend::from_records(&read_jsonl::<ScoreRecord>(&mock)?))
    } else {
        let var = &ctx.config.scorer.api_key_env;
        let key = std::env::var(var)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| {
                CliError::Config(format!(
                    "environment variable {var} is not set; export the API key for {} or pass --stub-scorer",
                    scorer.endpoint
                ))
            })?;
        Box::new(HttpChatBackend::new(&scorer, Some(key))?)
    };
    ctx.require(&[(
        texts_path.clone(),
        "texts file: set `inputs.texts` or run `augcat synth-generate`",
    )])?;
    let texts: Vec<TextRecord> = read_jsonl(&texts_path)?;
    create_out_dir(ctx)?;

    let templates = builtin_templates();
    let tasks = standard_tasks();
    let spec = CorpusSpec {
        templates: &templates,
        tasks: &tasks,
        country: &ctx.config.scorer.country,
    };
    let out = ctx.out(SCORES);
    let records = score_corpus(backend.as_ref(), &scorer, &spec, &texts, &out)?;
    let mut inputs = vec![texts_path];
    if ctx.stub {
        inputs.push(ctx.out(MOCK_SCORES));
    }
    let meta = meta_path(&out);
    record(ctx, "score-texts", &inputs, &[out, meta])?;
    let missing = records.iter().filter(|r| r.score.is_none()).count();
    eprintln!("scored {} records ({missing} missing)", records.len());
    Ok(())
}

/// Rating matrix, split, frozen baseline and score matrix of the training
/// pipeline, plus the files they came from.
struct Stage {
    matrix: ResponseMatrix,
    split: Split,
    baseline: ItemBank,
    scores: ResponseMatrix,
    inputs: Vec<PathBuf>,
}

fn load_stage(ctx: &Context) -> Result<Stage, CliError> {
    let responses = ctx.out(RESPONSES);
    let split = ctx.out(SPLIT);
    let baseline = ctx.out(BASELINE_BANK);
    let scores = ctx.out(SCORES);
    let first = if ctx.source() == DataSource::Real {
        "fit-baseline"
    } else {
        "synth-generate"
    };
    ctx.require(&[
        (responses.clone(), &produced_by(first)),
        (split.clone(), &produced_by("fit-baseline")),
        (baseline.clone(), &produced_by("fit-baseline")),
        (scores.clone(), &produced_by("score-texts")),
    ])?;
    let matrix = read_matrix_csv(&responses, ColumnSchema::AllOf(ItemKind::Binary))?;
    let records: Vec<ScoreRecord> = read_jsonl(&scores)?;
    let score_matrix = records_to_matrix(&records, matrix.respondent_ids(), &CandidateKey::all(&standard_tasks()))?;
    Ok(Stage {
        split: read_json(&split)?,
        baseline: load_bank(&baseline)?,
        matrix,
        scores: score_matrix,
        inputs: vec![responses, split, baseline, scores],
    })
}

pub fn eval_candidates(ctx: &Context) -> Result<(), CliError> {
    let fit = ctx.fit_config()?;
    let stage = load_stage(ctx)?;
    let train = stage.matrix.select_respondents(&stage.split.train)?;
    let train_scores = stage.scores.select_respondents(&stage.split.train)?;
    let thetas: Vec<f64> = eap_all(&train, &stage.baseline, &fit.grid)?
        .iter()
        .map(|e| e.theta)
        .collect();
    let pool = build_pool(&train_scores, &stage.baseline, &train, &thetas, &fit)?;
    let rows: Vec<PoolRow> = pool.iter().map(PoolRow::from).collect();
    write_jsonl(&ctx.out(POOL), &rows)?;
    write_values_csv(&ctx.out(TRAINING_THETAS), "theta_hat", &stage.split.train, &thetas)?;
    record(
        ctx,
        "eval-candidates",
        &stage.inputs,
        &[ctx.out(POOL), ctx.out(TRAINING_THETAS)],
    )?;
    let eligible = pool.iter().filter(|c| c.eligible()).count();
    eprintln!("evaluated {} candidates, {eligible} eligible", pool.len());
    Ok(())
}

#[derive(Serialize)]
struct WinnerEntry {
    candidate: String,
    info_gain: f64,
}

#[derive(Serialize)]
struct TestEntry<'a> {
    name: String,
    n_items: usize,
    converged: bool,
    selection_log: &'a [String],
    q3_warnings: &'a [Q3Pair],
}

#[derive(Serialize)]
struct AugmentationLog<'a> {
    winners: Vec<WinnerEntry>,
    skipped_tasks: &'a [String],
    tests: Vec<TestEntry<'a>>,
}

pub fn build_augmented(ctx: &Context) -> Result<(), CliError> {
    let fit = ctx.fit_config()?;
    let pool_path = ctx.out(POOL);
    ctx.require(&[(pool_path.clone(), &produced_by("eval-candidates"))])?;
    let stage = load_stage(ctx)?;
    let pool: Vec<CandidateItem> = read_jsonl::<PoolRow>(&pool_path)?.into_iter().map(Into::into).collect();
    let selection = select_best_per_task(&pool)?;
    let train = stage.matrix.select_respondents(&stage.split.train)?;
    let train_scores = stage.scores.select_respondents(&stage.split.train)?;
    let threshold = ctx.config.diagnostics.q3_threshold;
    let tests: Vec<AugmentedTest> = [None, Some(ctx.k)]
        .into_iter()
        .map(|k| {
            assemble_augmented(
                &selection.winners,
                k,
                &stage.baseline,
                &train,
                &train_scores,
                &fit,
                threshold,
            )
        })
        .collect::<Result<_, _>>()?;

    let mut outputs = Vec::new();
    for t in &tests {
        let path = ctx.out(&bank_file(&t.name.to_string()));
        save_bank(&path, &t.bank)?;
        outputs.push(path);
    }
    let log = AugmentationLog {
        winners: selection
            .winners
            .iter()
            .map(|c| WinnerEntry {
                candidate: c.key.column_id(),
                info_gain: c.info_gain,
            })
            .collect(),
        skipped_tasks: &selection.skipped_tasks,
        tests: tests
            .iter()
            .map(|t| TestEntry {
                name: t.name.to_string(),
                n_items: t.bank.len(),
                converged: t.converged,
                selection_log: &t.selection_log,
                q3_warnings: &t.q3_warnings,
            })
            .collect(),
    };
    write_json(&ctx.out(AUGMENTATION_LOG), &log)?;
    outputs.push(ctx.out(AUGMENTATION_LOG));
    let mut inputs = stage.inputs;
    inputs.push(pool_path);
    record(ctx, "build-augmented", &inputs, &outputs)?;
    for t in &tests {
        eprintln!(
            "{}: {} items, {} Q3 warnings",
            t.name,
            t.bank.len(),
            t.q3_warnings.len()
        );
        if !t.converged {
            eprintln!("warning: {} did not converge", t.name);
        }
    }
    if ctx.k > selection.winners.len() {
        eprintln!(
            "warning: k = {} exceeds the {} selected items",
            ctx.k,
            selection.winners.len()
        );
    }
    Ok(())
}

/// Test name, bank and CAT mode.
type NamedBank = (String, ItemBank, CatMode);

/// The three compared tests and the bank files they were read from.
fn test_banks(ctx: &Context) -> Result<(Vec<NamedBank>, Vec<PathBuf>), CliError> {
    let mut paths = vec![(BASELINE.to_string(), ctx.out(BASELINE_BANK), CatMode::Baseline)];
    for name in augmented_names(ctx) {
        paths.push((name.clone(), ctx.out(&bank_file(&name)), CatMode::Augmented));
    }
    let required: Vec<(PathBuf, String)> = paths
        .iter()
        .map(|(_, p, _)| (p.clone(), produced_by("build-augmented")))
        .collect();
    ctx.require(
        &required
            .iter()
            .map(|(p, s)| (p.clone(), s.as_str()))
            .collect::<Vec<_>>(),
    )?;
    let mut banks = Vec::new();
    for (name, path, mode) in &paths {
        banks.push((name.clone(), load_bank(path)?, *mode));
    }
    Ok((banks, paths.into_iter().map(|(_, p, _)| p).collect()))
}

pub fn simulate_cat(ctx: &Context) -> Result<(), CliError> {
    let fit = ctx.fit_config()?;
    let stage = load_stage(ctx)?;
    let (banks, bank_paths) = test_banks(ctx)?;
    let test_matrix = stage
        .matrix
        .hstack(&stage.scores)?
        .select_respondents(&stage.split.test)?;
    let mut outputs = Vec::new();
    for (name, bank, mode) in banks {
        let config = CatConfig::new(bank, fit.grid.clone(), mode)?;
        let traces = simulate_batch(&config, &test_matrix)?;
        let path = ctx.out(&traces_file(&name));
        write_traces_csv(&path, &traces)?;
        outputs.push(path);
        eprintln!("{name}: {} traces of {} steps", traces.len(), config.n_steps() + 1);
    }
    let mut inputs = stage.inputs;
    inputs.extend(bank_paths);
    record(ctx, "simulate-cat", &inputs, &outputs)?;
    Ok(())
}

/// Values of a two-column CSV reordered to `ids`.
fn aligned_values(path: &Path, column: &str, ids: &[String]) -> Result<Vec<f64>, CliError> {
    let (file_ids, values) = read_values_csv(path, column)?;
    let by_id: HashMap<&str, f64> = file_ids.iter().map(String::as_str).zip(values).collect();
    ids.iter()
        .map(|id| {
            by_id.get(id.as_str()).copied().ok_or_else(|| {
                CliError::Core(augcat_core::Error::MismatchedRespondents(format!(
                    "{} has no row for `{id}`",
                    path.display()
                )))
            })
        })
        .collect()
}

pub fn evaluate(ctx: &Context) -> Result<(), CliError> {
    let (banks, mut inputs) = test_banks(ctx)?;
    let mut runs = Vec::new();
    for (name, _, _) in &banks {
        let path = ctx.out(&traces_file(name));
        ctx.require(&[(path.clone(), &produced_by("simulate-cat"))])?;
        runs.push(TestRun::new(name.clone(), read_traces_csv(&path)?));
        inputs.push(path);
    }
    let ids: Vec<String> = runs[0].traces.iter().map(|t| t.respondent_id.clone()).collect();
    let source = ctx.source();
    let (truth, external) = match source {
        DataSource::Synthetic => {
            let path = ctx.out(THETAS);
            ctx.require(&[(path.clone(), &produced_by("synth-generate"))])?;
            let truth = aligned_values(&path, "true_theta", &ids)?;
            inputs.push(path);
            (Some(truth), None)
        }
        DataSource::Real => {
            let path = ctx.out(EXTERNAL);
            if path.is_file() {
                let external = aligned_values(&path, "external", &ids)?;
                inputs.push(path);
                (None, Some(external))
            } else {
                (None, None)
            }
        }
    };

    let named_banks: Vec<(String, ItemBank)> = banks.iter().map(|(n, b, _)| (n.clone(), b.clone())).collect();
    let panel_dir = ctx.out(PANELS);
    std::fs::create_dir_all(&panel_dir).map_err(augcat_core::Error::from)?;
    let mut outputs = write_panels(
        &panel_dir,
        &PanelInputs {
            source,
            tests: &runs,
            reference: BASELINE,
            banks: &named_banks,
            true_thetas: truth.as_deref(),
            external: external.as_deref(),
        },
    )?;

    let names: Vec<String> = runs.iter().map(|r| r.name.clone()).collect();
    let aggregation = "mean over CAT steps 1..end";
    let se: Vec<Vec<f64>> = runs.iter().map(TestRun::trace_mean_se).collect();
    let mut reports: Vec<ComparisonReport> = vec![compare_tests("se", aggregation, &names, &se)?];
    if let Some(truth) = &truth {
        let abs_error: Vec<Vec<f64>> = runs.iter().map(|r| r.trace_mean_abs_error(truth)).collect();
        reports.push(compare_tests("absolute_error", aggregation, &names, &abs_error)?);
    }
    write_json(&ctx.out(COMPARISON), &reports)?;
    let equivalence: BTreeMap<&str, f64> = named_banks
        .iter()
        .skip(1)
        .map(|(n, b)| (n.as_str(), bank_information_equivalence(b)))
        .collect();
    write_json(&ctx.out(EQUIVALENCE), &equivalence)?;
    outputs.extend([ctx.out(COMPARISON), ctx.out(EQUIVALENCE)]);
    record(ctx, "evaluate", &inputs, &outputs)?;

    for r in &reports {
        eprintln!("{}: F = {:.3}, p = {:.3e}", r.metric, r.f, r.p);
        for p in &r.posthoc {
            eprintln!("  {} vs {}: p_adj = {:.3e}", p.pair[0], p.pair[1], p.p_adj);
        }
    }
    for (name, eq) in &equivalence {
        eprintln!("{name}: LLM items carry the information of {eq:.2} rating items");
    }
    Ok(())
}
