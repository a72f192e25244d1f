//! Scoring every (respondent, task, prompt) combination with incremental,
//! resumable persistence as line-delimited JSON.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::client::{score_text, ChatBackend, ScoreRequest, ScorerConfig};
use super::prompts::{render_prompt, template_hash, PromptId, PromptTemplate, QualitativeTask};
use super::CandidateKey;
use crate::data::ResponseMatrix;
use crate::error::{Error, Result};
use crate::irt::ItemKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub respondent_id: String,
    pub task: String,
    pub prompt: PromptId,
    pub score: Option<u8>,
    pub raw_reply: String,
    pub attempts: u32,
}

/// One row of `texts.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextRecord {
    pub respondent_id: String,
    pub task: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct CorpusMeta {
    model: String,
    template_hash: String,
    country: String,
}

pub struct CorpusSpec<'a> {
    pub templates: &'a [PromptTemplate],
    pub tasks: &'a [QualitativeTask],
    pub country: &'a str,
}

type Key = (String, String, PromptId);

fn key_of(r: &ScoreRecord) -> Key {
    (r.respondent_id.clone(), r.task.clone(), r.prompt)
}

/// Path of the metadata file kept next to a score file.
pub fn meta_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Scores all texts with every template. Records already present in
/// `out_path` are kept and never re-requested; new records are appended and
/// flushed as they complete. The finished file is rewritten in sorted key
/// order. A transport failure aborts the run and leaves completed records on
/// disk.
pub fn score_corpus(
    backend: &dyn ChatBackend,
    config: &ScorerConfig,
    spec: &CorpusSpec<'_>,
    texts: &[TextRecord],
    out_path: &Path,
) -> Result<Vec<ScoreRecord>> {
    config.validate()?;
    let task_index: HashMap<&str, usize> = spec
        .tasks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.code.as_str(), i))
        .collect();
    let mut table: BTreeMap<&str, Vec<Option<&str>>> = BTreeMap::new();
    for t in texts {
        let &ti = task_index
            .get(t.task.as_str())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown task `{}`", t.task)))?;
        let row = table
            .entry(t.respondent_id.as_str())
            .or_insert_with(|| vec![None; spec.tasks.len()]);
        if row[ti].replace(t.text.as_str()).is_some() {
            return Err(Error::InvalidArgument(format!(
                "duplicate text for ({}, {})",
                t.respondent_id, t.task
            )));
        }
    }
    for (respondent, row) in &table {
        if let Some(missing) = row.iter().position(Option::is_none) {
            return Err(Error::InvalidArgument(format!(
                "no text for ({respondent}, {})",
                spec.tasks[missing].code
            )));
        }
    }

    let meta = CorpusMeta {
        model: config.model.clone(),
        template_hash: template_hash(spec.templates),
        country: spec.country.to_string(),
    };
    let meta_file = meta_path(out_path);
    let mut done: HashMap<Key, ScoreRecord> = HashMap::new();
    if out_path.exists() {
        let previous: Option<CorpusMeta> = match fs::read_to_string(&meta_file) {
            Ok(s) => serde_json::from_str(&s).ok(),
            Err(_) => None,
        };
        if previous.as_ref() != Some(&meta) {
            return Err(Error::ResumeMismatch {
                path: out_path.to_path_buf(),
            });
        }
        for r in read_score_records_lenient(out_path)? {
            done.insert(key_of(&r), r);
        }
    }
    fs::write(&meta_file, serde_json::to_string_pretty(&meta)? + "\n")?;
    let order = |records: &mut Vec<ScoreRecord>| {
        records.sort_by(|a, b| {
            (&a.respondent_id, task_index.get(a.task.as_str()), a.prompt).cmp(&(
                &b.respondent_id,
                task_index.get(b.task.as_str()),
                b.prompt,
            ))
        })
    };
    let mut existing: Vec<ScoreRecord> = done.values().cloned().collect();
    order(&mut existing);
    write_records_atomic(out_path, &existing)?;

    let mut jobs = Vec::new();
    for (respondent, row) in &table {
        for (task, text) in spec.tasks.iter().zip(row) {
            for template in spec.templates {
                let key = (respondent.to_string(), task.code.clone(), template.id);
                if !done.contains_key(&key) {
                    jobs.push((*respondent, task, template, text.expect("checked above")));
                }
            }
        }
    }

    let writer = Mutex::new(OpenOptions::new().append(true).open(out_path)?);
    let fresh = Mutex::new(Vec::with_capacity(jobs.len()));
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let workers = config.max_concurrent.min(jobs.len()).max(1);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(respondent, task, template, text)) = jobs.get(i) else {
                    break;
                };
                let result = render_prompt(template, task, spec.country, text).and_then(|prompt| {
                    let request = ScoreRequest {
                        respondent_id: respondent,
                        task: &task.code,
                        prompt_id: template.id,
                        prompt: &prompt,
                    };
                    score_text(backend, config, &request)
                });
                let record = match result {
                    Ok(outcome) => ScoreRecord {
                        respondent_id: respondent.to_string(),
                        task: task.code.clone(),
                        prompt: template.id,
                        score: outcome.score,
                        raw_reply: outcome.raw_reply,
                        attempts: outcome.attempts,
                    },
                    Err(e) => {
                        abort.store(true, Ordering::SeqCst);
                        failure.lock().unwrap().get_or_insert(e);
                        break;
                    }
                };
                let persisted = serde_json::to_string(&record).map_err(Error::from).and_then(|line| {
                    let mut w = writer.lock().unwrap();
                    writeln!(w, "{line}")?;
                    w.flush()?;
                    Ok(())
                });
                if let Err(e) = persisted {
                    abort.store(true, Ordering::SeqCst);
                    failure.lock().unwrap().get_or_insert(e);
                    break;
                }
                fresh.lock().unwrap().push(record);
            });
        }
    });

    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let mut all = existing;
    all.extend(fresh.into_inner().unwrap());
    order(&mut all);
    write_records_atomic(out_path, &all)?;
    Ok(all)
}

fn write_records_atomic(path: &Path, records: &[ScoreRecord]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = std::io::BufWriter::new(File::create(&tmp)?);
        for r in records {
            writeln!(f, "{}", serde_json::to_string(r)?)?;
        }
        f.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a score file, ignoring a torn final line left by an interrupted run.
pub fn read_score_records_lenient(path: &Path) -> Result<Vec<ScoreRecord>> {
    let lines: Vec<String> = BufReader::new(File::open(path)?)
        .lines()
        .collect::<std::io::Result<_>>()?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() => {}
            Err(e) => {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: i as u64 + 1,
                    column: e.column() as u64,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

/// Pivots score records into a graded matrix with one `{task}_{prompt}`
/// column per candidate, rows in `respondents` order. Absent records and
/// missing scores both become missing cells.
pub fn records_to_matrix<S: AsRef<str>>(
    records: &[ScoreRecord],
    respondents: &[S],
    candidates: &[CandidateKey],
) -> Result<ResponseMatrix> {
    let col: HashMap<(&str, PromptId), usize> = candidates
        .iter()
        .enumerate()
        .map(|(j, c)| ((c.task.as_str(), c.prompt), j))
        .collect();
    let row: HashMap<&str, usize> = respondents.iter().enumerate().map(|(i, r)| (r.as_ref(), i)).collect();
    let width = candidates.len();
    let mut cells = vec![None; respondents.len() * width];
    for r in records {
        if let (Some(&i), Some(&j)) = (row.get(r.respondent_id.as_str()), col.get(&(r.task.as_str(), r.prompt))) {
            cells[i * width + j] = r.score;
        }
    }
    ResponseMatrix::new(
        respondents.iter().map(|r| r.as_ref().to_string()).collect(),
        candidates.iter().map(|c| (c.column_id(), ItemKind::Graded)).collect(),
        cells,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::prompts::{builtin_templates, standard_tasks};
    use std::time::Duration;

    fn texts(n: usize) -> Vec<TextRecord> {
        let mut out = Vec::new();
        for i in 0..n {
            for t in standard_tasks() {
                out.push(TextRecord {
                    respondent_id: format!("r{i:02}"),
                    task: t.code.clone(),
                    text: format!("text {i} {}", t.code),
                });
            }
        }
        out
    }

    fn config() -> ScorerConfig {
        ScorerConfig {
            backoff_base: Duration::from_millis(1),
            max_concurrent: 3,
            ..ScorerConfig::default()
        }
    }

    #[test]
    fn cardinality_and_pivot() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("scores.jsonl");
        let templates = builtin_templates();
        let tasks = standard_tasks();
        let spec = CorpusSpec {
            templates: &templates,
            tasks: &tasks,
            country: "Chinese",
        };
        let backend = |r: &ScoreRequest<'_>| -> std::result::Result<String, String> {
            Ok(if r.task == "SC3" { "n/a".into() } else { "4".into() })
        };
        let records = score_corpus(&backend, &config(), &spec, &texts(3), &out).unwrap();
        assert_eq!(records.len(), 3 * 13 * 4);
        assert!(records.iter().filter(|r| r.task == "SC3").all(|r| r.score.is_none()));

        let keys = CandidateKey::all(&tasks);
        let m = records_to_matrix(&records, &["r00", "r01", "r02"], &keys).unwrap();
        assert_eq!(m.n_items(), 52);
        assert_eq!(m.get(0, 0), Some(4));
        let sc3 = m.item_index("SC3_A").unwrap();
        assert_eq!(m.get(1, sc3), None);
    }

    #[test]
    fn missing_text_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let templates = builtin_templates();
        let tasks = standard_tasks();
        let spec = CorpusSpec {
            templates: &templates,
            tasks: &tasks,
            country: "Chinese",
        };
        let mut t = texts(1);
        t.pop();
        let backend = |_: &ScoreRequest<'_>| -> std::result::Result<String, String> { Ok("1".into()) };
        let err = score_corpus(&backend, &config(), &spec, &t, &dir.path().join("s.jsonl")).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(m) if m.contains("E1")));
    }

    #[test]
    fn changed_model_refuses_to_resume() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("s.jsonl");
        let templates = builtin_templates();
        let tasks = standard_tasks();
        let spec = CorpusSpec {
            templates: &templates,
            tasks: &tasks,
            country: "Chinese",
        };
        let backend = |_: &ScoreRequest<'_>| -> std::result::Result<String, String> { Ok("1".into()) };
        score_corpus(&backend, &config(), &spec, &texts(1), &out).unwrap();
        let other = ScorerConfig {
            model: "other-model".into(),
            ..config()
        };
        assert!(matches!(
            score_corpus(&backend, &other, &spec, &texts(1), &out),
            Err(Error::ResumeMismatch { .. })
        ));
    }

    #[test]
    fn torn_tail_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        fs::write(
            &path,
            "{\"respondent_id\":\"r\",\"task\":\"SC1\",\"prompt\":\"A\",\"score\":3,\"raw_reply\":\"3\",\"attempts\":1}\n{\"respondent_id\":\"r\",\"ta",
        )
        .unwrap();
        assert_eq!(read_score_records_lenient(&path).unwrap().len(), 1);
    }
}
