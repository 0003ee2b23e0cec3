//! The curation batch job and dataset file handling.

use std::collections::BTreeSet;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use cartoprompt_core::curate::{
    assemble_datapoint, parse_pairs, render_teacher_messages, split_dataset, CurationJob,
    CurationReport, Datapoint, PairFilter, PrepromptRecord, PrepromptReport, PrepromptStatus,
    QAPair,
};
use serde_json::json;

use crate::error::{Error, Result};
use crate::store::write_atomic;
use crate::teacher::TeacherClient;

#[derive(Debug, Clone)]
pub struct CurationPaths {
    /// JSON lines, one [`Datapoint`] per line.
    pub dataset: PathBuf,
    /// Single JSON document.
    pub report: PathBuf,
    /// Teacher replies that held no parseable pair list.
    pub unparsed: PathBuf,
}

impl CurationPaths {
    pub fn new(dataset: &Path, report: &Path) -> Self {
        Self {
            dataset: dataset.to_path_buf(),
            report: report.to_path_buf(),
            unparsed: dataset.with_extension("unparsed.jsonl"),
        }
    }
}

fn read_report(path: &Path) -> Result<Option<CurationReport>> {
    match fs::read(path) {
        Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes).map_err(|e| {
            Error::Format(format!("{}: {e}", path.display()))
        })?)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(path, e)),
    }
}

fn save_report(path: &Path, report: &CurationReport) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(report)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_dataset(path: &Path) -> Result<Vec<Datapoint>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::Format(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn dataset_lines(points: &[Datapoint]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for p in points {
        serde_json::to_writer(&mut out, p)?;
        out.push(b'\n');
    }
    Ok(out)
}

/// Keeps only dataset lines that belong to a completed preprompt.
fn prune_dataset(path: &Path, completed: &BTreeSet<String>) -> Result<()> {
    if !path.exists() {
        return Ok(());
    }
    let all = read_dataset(path)?;
    let total = all.len();
    let kept: Vec<Datapoint> = all
        .into_iter()
        .filter(|d| completed.contains(&d.preprompt_id))
        .collect();
    if kept.len() != total {
        tracing::warn!(dropped = total - kept.len(), "dropping dataset lines of unfinished preprompts");
        write_atomic(path, &dataset_lines(&kept)?)?;
    }
    Ok(())
}

fn append(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))?;
    f.sync_data().map_err(|e| Error::io(path, e))
}

/// Runs every preprompt not already completed in an existing report.
///
/// A preprompt's datapoints are appended only once all of its requests
/// succeeded, and the report is rewritten after every preprompt, so the job
/// can be interrupted and rerun.
pub async fn run_curation(
    job: &CurationJob,
    preprompts: &[PrepromptRecord],
    paths: &CurationPaths,
    request_timeout: Duration,
) -> Result<CurationReport> {
    job.validate()?;
    let mut report = match read_report(&paths.report)? {
        Some(mut r) => {
            r.preprompts.retain(|p| p.status == PrepromptStatus::Ok);
            r
        }
        None => CurationReport::new(job),
    };
    report.model = job.teacher.model.clone();
    report.temperature = job.temperature;
    report.pairs_per_request = job.pairs_per_request;
    let completed: BTreeSet<String> = report
        .completed_ids()
        .into_iter()
        .map(str::to_string)
        .collect();
    prune_dataset(&paths.dataset, &completed)?;

    let mut teacher = TeacherClient::new(job, request_timeout)?;
    if !teacher.has_token() {
        tracing::warn!(env = %job.teacher.token_env, "no teacher token set, sending unauthenticated requests");
    }
    let mut filter = PairFilter::new(job);
    let mut seen_ids = BTreeSet::new();

    for rec in preprompts {
        if !seen_ids.insert(rec.preprompt_id.as_str()) {
            return Err(Error::Format(format!(
                "duplicate preprompt_id `{}`",
                rec.preprompt_id
            )));
        }
        if completed.contains(&rec.preprompt_id) {
            tracing::info!(preprompt_id = %rec.preprompt_id, "already curated, skipping");
            continue;
        }
        let (rep, points) = curate_one(job, rec, &mut teacher, &mut filter, paths).await?;
        tracing::info!(
            preprompt_id = %rec.preprompt_id,
            status = ?rep.status,
            requests = rep.requests,
            parsed = rep.parsed,
            kept = rep.kept,
            "preprompt curated"
        );
        if !points.is_empty() {
            append(&paths.dataset, &dataset_lines(&points)?)?;
        }
        report.preprompts.push(rep);
        save_report(&paths.report, &report)?;
    }
    if !paths.report.exists() {
        save_report(&paths.report, &report)?;
    }
    Ok(report)
}

async fn curate_one(
    job: &CurationJob,
    rec: &PrepromptRecord,
    teacher: &mut TeacherClient,
    filter: &mut PairFilter,
    paths: &CurationPaths,
) -> Result<(PrepromptReport, Vec<Datapoint>)> {
    let mut rep = PrepromptReport::new(&rec.preprompt_id);
    let mut kept: Vec<QAPair> = Vec::new();
    for template in &job.templates {
        let messages = match render_teacher_messages(&rec.preprompt, *template, job.pairs_per_request) {
            Ok(m) => m,
            Err(e) => return Ok((failed(rep, e.to_string()), Vec::new())),
        };
        let reply = teacher
            .chat_with_retries(&messages, job.max_retries, job.backoff_base_ms)
            .await;
        rep.requests += reply.attempts;
        rep.retries += reply.attempts - 1;
        let text = match reply.result {
            Ok(t) => t,
            Err(e) => return Ok((failed(rep, e.to_string()), Vec::new())),
        };
        let batch = format!("{}/{}", rec.preprompt_id, template.as_str());
        match parse_pairs(&text) {
            Ok(parsed) => {
                rep.parsed += parsed.pairs.len();
                rep.skipped_entries += parsed.skipped;
                for raw in parsed.pairs {
                    let pair = QAPair::from_raw(raw, &rec.preprompt_id, &batch);
                    match filter.check(&pair) {
                        Ok(()) => kept.push(pair),
                        Err(_) => rep.filtered += 1,
                    }
                }
            }
            Err(e) => {
                rep.parse_errors += 1;
                tracing::warn!(preprompt_id = %rec.preprompt_id, batch = %batch, error = %e, "unparseable teacher reply");
                let line = json!({ "preprompt_id": rec.preprompt_id, "batch": batch, "raw": text });
                append(&paths.unparsed, format!("{line}\n").as_bytes())?;
            }
        }
    }
    let mut points = Vec::with_capacity(kept.len());
    for pair in &kept {
        match assemble_datapoint(&rec.preprompt, &rec.preprompt_id, points.len(), pair) {
            Ok(d) => points.push(d),
            Err(_) => rep.filtered += 1,
        }
    }
    rep.kept = points.len();
    Ok((rep, points))
}

fn failed(mut rep: PrepromptReport, error: String) -> PrepromptReport {
    tracing::error!(preprompt_id = %rep.preprompt_id, error = %error, "preprompt failed");
    rep.status = PrepromptStatus::Failed;
    rep.kept = 0;
    rep.error = Some(error);
    rep
}

/// Output paths of [`split_file`]: `<stem>.train.jsonl` and `<stem>.val.jsonl`.
pub fn split_paths(input: &Path) -> (PathBuf, PathBuf) {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let dir = input.parent().unwrap_or(Path::new(""));
    (
        dir.join(format!("{stem}.train.jsonl")),
        dir.join(format!("{stem}.val.jsonl")),
    )
}

/// Splits a JSON-lines file line by line, preserving each line verbatim.
pub fn split_file(input: &Path, train_fraction: f64, seed: u64) -> Result<(PathBuf, usize, PathBuf, usize)> {
    let text = fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let (train, val) = split_dataset(lines, train_fraction, seed)?;
    let (tp, vp) = split_paths(input);
    let join = |v: &[&str]| {
        let mut s = v.join("\n");
        s.push('\n');
        s
    };
    write_atomic(&tp, join(&train).as_bytes())?;
    write_atomic(&vp, join(&val).as_bytes())?;
    Ok((tp, train.len(), vp, val.len()))
}
