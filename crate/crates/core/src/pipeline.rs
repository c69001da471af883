//! Run configuration and the pipeline stages behind the command line:
//! gen-task, run, fit, compare, stats and report.
//!
//! Every stage reads its inputs from the output directory and writes its
//! artifacts back there, so each can be re-run on its own.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::affect::AffectModel;
use crate::agents::{
    replay_transcript, AgentDescriptor, AgentSpec, AuditLog, ChatTransport, EvMaxAgent,
    HttpChatClient, LlmAgent, LlmSettings, PromptScript, RequestLimiter, RetryPolicy,
    SyntheticAgent,
};
use crate::choice::ChoiceModel;
use crate::error::{Error, Result};
use crate::estimation::{
    compare_models, fit_transcripts, ComparisonTable, FitOptions, FitRecord, ModelId,
};
use crate::io::{self, Header, StatRow, SummaryRow};
use crate::par::Exec;
use crate::rng;
use crate::stats::{
    bootstrap_vs_human, hedonic_difference, mean, one_sample_t, one_way_anova, sample_variance,
    summarize_session, two_sample_t, welch_t, GroupSample,
};
use crate::task::{
    build_trial_set, run_session, schedule_probes, Agent, SessionTranscript, TaskSet, TrialType,
};

/// Extra per-agent values for one measure, read from an `(agent_id, value)`
/// CSV; typically a human benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupInput {
    pub label: String,
    pub measure: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub sessions_per_agent: usize,
    pub n_starts: usize,
    pub bootstrap_iters: usize,
    /// Reuse the task file's probe schedule in every session instead of
    /// drawing a fresh one per session.
    pub fixed_probes: bool,
    /// Welch instead of Student post-hoc t tests.
    pub welch: bool,
    /// Group the bootstrap compares every other group against.
    pub human_group: Option<String>,
    pub choice_models: Vec<ChoiceModel>,
    pub affect_models: Vec<AffectModel>,
    pub prompt: PromptScript,
    pub agents: Vec<AgentSpec>,
    pub group_inputs: Vec<GroupInput>,
    pub out_dir: PathBuf,
    /// Task file; defaults to `task.json` in the output directory.
    pub task: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub fail_fast: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            sessions_per_agent: 30,
            n_starts: 50,
            bootstrap_iters: 1000,
            fixed_probes: false,
            welch: false,
            human_group: None,
            choice_models: ChoiceModel::ALL.to_vec(),
            affect_models: AffectModel::ALL.to_vec(),
            prompt: PromptScript::default(),
            agents: Vec::new(),
            group_inputs: Vec::new(),
            out_dir: PathBuf::from("out"),
            task: None,
            jobs: None,
            fail_fast: false,
        }
    }
}

/// The settings that determine output content. Paths, worker count and
/// error policy are left out.
#[derive(Serialize)]
struct HashedConfig<'a> {
    seed: u64,
    sessions_per_agent: usize,
    n_starts: usize,
    bootstrap_iters: usize,
    fixed_probes: bool,
    welch: bool,
    human_group: &'a Option<String>,
    choice_models: &'a [ChoiceModel],
    affect_models: &'a [AffectModel],
    prompt: &'a PromptScript,
    agents: &'a [AgentSpec],
    group_inputs: Vec<(&'a str, &'a str)>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| {
                text[..s.start.min(text.len())].matches('\n').count() + 1
            });
            Error::validation("config", line, e.message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Validation { line, message, .. } => Error::validation(path, line, message),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sessions_per_agent", self.sessions_per_agent),
            ("n_starts", self.n_starts),
            ("bootstrap_iters", self.bootstrap_iters),
        ] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        if self.jobs == Some(0) {
            return Err(Error::InvalidArgument("jobs must be at least 1".into()));
        }
        let mut labels = BTreeSet::new();
        for a in &self.agents {
            if a.label.is_empty() || a.label.contains(['|', '/', '\\']) {
                return Err(Error::InvalidArgument(format!(
                    "bad agent label {:?}",
                    a.label
                )));
            }
            if !labels.insert(a.label.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate agent label {}",
                    a.label
                )));
            }
            a.descriptor.validate()?;
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the content-relevant settings.
    pub fn hash(&self) -> String {
        let view = HashedConfig {
            seed: self.seed,
            sessions_per_agent: self.sessions_per_agent,
            n_starts: self.n_starts,
            bootstrap_iters: self.bootstrap_iters,
            fixed_probes: self.fixed_probes,
            welch: self.welch,
            human_group: &self.human_group,
            choice_models: &self.choice_models,
            affect_models: &self.affect_models,
            prompt: &self.prompt,
            agents: &self.agents,
            group_inputs: self
                .group_inputs
                .iter()
                .map(|g| (g.label.as_str(), g.measure.as_str()))
                .collect(),
        };
        let bytes = serde_json::to_vec(&view).expect("config serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }

    pub fn exec(&self) -> Exec {
        match self.jobs {
            Some(1) => Exec::Sequential,
            _ => Exec::default(),
        }
    }

    pub fn task_path(&self) -> PathBuf {
        self.task
            .clone()
            .unwrap_or_else(|| self.out_dir.join("task.json"))
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn models(&self) -> Vec<ModelId> {
        self.choice_models
            .iter()
            .map(|&m| ModelId::Choice(m))
            .chain(self.affect_models.iter().map(|&m| ModelId::Affect(m)))
            .collect()
    }

    fn header(&self, prompt_version: Option<String>) -> Header {
        Header::new(self.hash(), prompt_version)
    }
}

pub const TRANSCRIPTS: &str = "transcripts.jsonl";
pub const FITS: &str = "fits.csv";
pub const FIT_SKIPPED: &str = "fit_skipped.csv";
pub const COMPARISON_CHOICE: &str = "comparison_choice.csv";
pub const COMPARISON_AFFECT: &str = "comparison_affect.csv";
pub const STATS: &str = "stats.csv";
pub const SUMMARY: &str = "summary.csv";
pub const REPORT: &str = "report.md";

/// Distinct prompt versions across transcripts, `+`-joined.
fn prompt_versions(transcripts: &[SessionTranscript]) -> Option<String> {
    let set: BTreeSet<&str> = transcripts
        .iter()
        .filter_map(|t| t.prompt_version.as_deref())
        .collect();
    (!set.is_empty()).then(|| set.into_iter().collect::<Vec<_>>().join("+"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenTaskReport {
    pub path: PathBuf,
    pub per_type: [(TrialType, usize); 3],
    pub probes: usize,
}

pub fn cmd_gen_task(cfg: &RunConfig) -> Result<GenTaskReport> {
    let task = build_trial_set(cfg.seed);
    let path = cfg.task_path();
    io::write_task(&path, &task)?;
    let per_type = TrialType::ALL.map(|ty| {
        (
            ty,
            task.trials.iter().filter(|t| t.trial_type == ty).count(),
        )
    });
    Ok(GenTaskReport {
        path,
        per_type,
        probes: task.probe_after.len(),
    })
}

/// A session that ended early.
#[derive(Debug)]
pub struct Aborted {
    pub label: String,
    pub session: usize,
    pub error: Error,
}

impl Aborted {
    pub fn is_remote(&self) -> bool {
        matches!(&self.error, Error::SessionAborted { source, .. } if source.is_remote())
    }
}

#[derive(Debug)]
pub struct RunReport {
    pub path: PathBuf,
    pub written: usize,
    pub aborted: Vec<Aborted>,
}

/// Seed of session `session` of the agent labelled `label`.
pub fn session_seed(seed: u64, label: &str, session: usize) -> u64 {
    rng::derive_seed(seed ^ rng::label_hash(label), session as u64)
}

fn session_task(task: &TaskSet, seed: u64, fixed: bool) -> Result<TaskSet> {
    if fixed {
        return Ok(task.clone());
    }
    Ok(TaskSet {
        probe_after: schedule_probes(task.len(), seed)?,
        ..task.clone()
    })
}

fn llm_transport(s: &LlmSettings) -> Result<Arc<dyn ChatTransport>> {
    let key = std::env::var(&s.api_key_env).ok().filter(|k| !k.is_empty());
    if key.is_none() {
        return Err(Error::InvalidArgument(format!(
            "credential variable {} is not set",
            s.api_key_env
        )));
    }
    let retry = RetryPolicy {
        max_attempts: s.transport_attempts,
        base_delay: Duration::from_millis(s.backoff_base_ms),
        max_delay: Duration::from_secs(60),
    };
    let limiter = RequestLimiter::new(s.max_in_flight, Duration::from_millis(s.min_interval_ms));
    Ok(Arc::new(HttpChatClient::new(
        &s.endpoint,
        key,
        retry,
        limiter,
        Duration::from_secs(s.timeout_secs),
    )))
}

/// Runs one agent's batch. `transport` overrides the HTTP client for llm
/// agents.
pub fn run_agent(
    cfg: &RunConfig,
    spec: &AgentSpec,
    task: &TaskSet,
    transport: Option<Arc<dyn ChatTransport>>,
) -> Result<Vec<std::result::Result<SessionTranscript, Aborted>>> {
    let hash = cfg.hash();
    let exec = cfg.exec();
    let label = spec.label.as_str();
    let aborted = |session: usize, error: Error| Aborted {
        label: label.to_string(),
        session,
        error,
    };

    if let AgentDescriptor::Replay { source_transcript } = &spec.descriptor {
        let sources = io::read_transcripts(source_transcript)?;
        return Ok(exec.map_slice(&sources, |_, src| {
            replay_transcript(src).map_err(|e| aborted(src.session, e))
        }));
    }

    let transport = match &spec.descriptor {
        AgentDescriptor::Llm(s) => Some(match transport {
            Some(t) => t,
            None => llm_transport(s)?,
        }),
        _ => None,
    };
    let audit_dir = cfg.out("audit");
    if transport.is_some() {
        fs::create_dir_all(&audit_dir).map_err(|e| Error::io(&audit_dir, e))?;
    }

    Ok(exec.map_range(cfg.sessions_per_agent, |i| {
        let seed = session_seed(cfg.seed, label, i);
        let run = || -> Result<SessionTranscript> {
            let st = session_task(task, seed, cfg.fixed_probes)?;
            let mut agent: Box<dyn Agent> = match &spec.descriptor {
                AgentDescriptor::Synthetic {
                    choice_params,
                    affect_params,
                    rating_noise_sigma,
                } => Box::new(SyntheticAgent::new(
                    label,
                    *choice_params,
                    *affect_params,
                    *rating_noise_sigma,
                )),
                AgentDescriptor::EvMax => Box::new(EvMaxAgent::new(label)),
                AgentDescriptor::Llm(s) => {
                    let path = audit_dir.join(format!("{label}-{i}.jsonl"));
                    if path.exists() {
                        fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
                    }
                    let t = Arc::clone(transport.as_ref().expect("llm transport built above"));
                    let agent = LlmAgent::new(
                        label,
                        cfg.prompt.clone(),
                        t,
                        &s.model_name,
                        s.temperature,
                        s.max_retries,
                    )
                    .with_audit(AuditLog::new(&path), i);
                    let result = run_session(&mut { agent }, &st, seed);
                    if let Err(e) = &result {
                        AuditLog::new(&path).record(&json!({
                            "session": i,
                            "event": "abort",
                            "error": e.to_string(),
                        }))?;
                    }
                    return result.map(|mut tr| {
                        tr.session = i;
                        tr.run_config_hash = Some(hash.clone());
                        tr
                    });
                }
                AgentDescriptor::Replay { .. } => unreachable!("handled above"),
            };
            let mut tr = run_session(agent.as_mut(), &st, seed)?;
            tr.session = i;
            tr.run_config_hash = Some(hash.clone());
            Ok(tr)
        };
        run().map_err(|e| aborted(i, e))
    }))
}

/// Runs every configured agent and writes the completed transcripts.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunReport> {
    cmd_run_with(cfg, |_| None)
}

/// As [`cmd_run`], with a transport supplied per llm agent label.
pub fn cmd_run_with(
    cfg: &RunConfig,
    transport: impl Fn(&str) -> Option<Arc<dyn ChatTransport>>,
) -> Result<RunReport> {
    cfg.validate()?;
    if cfg.agents.is_empty() {
        return Err(Error::InvalidArgument("no agents configured".into()));
    }
    let task = io::read_task(&cfg.task_path())?;
    let path = cfg.out(TRANSCRIPTS);
    let mut writer = io::TranscriptWriter::create(&path)?;
    let mut written = 0;
    let mut aborted = Vec::new();
    for spec in &cfg.agents {
        for outcome in run_agent(cfg, spec, &task, transport(&spec.label))? {
            match outcome {
                Ok(tr) => {
                    writer.write(&tr)?;
                    written += 1;
                }
                Err(a) if cfg.fail_fast => return Err(a.error),
                Err(a) => aborted.push(a),
            }
        }
    }
    Ok(RunReport {
        path,
        written,
        aborted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFit {
    pub group: String,
    pub session: usize,
    pub model: ModelId,
    pub reason: String,
}

#[derive(Debug)]
pub struct FitReport {
    pub path: PathBuf,
    pub fits: Vec<FitRecord>,
    pub skipped: Vec<SkippedFit>,
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<FitReport> {
    cfg.validate()?;
    let transcripts = io::read_transcripts(&cfg.out(TRANSCRIPTS))?;
    let models = cfg.models();
    let opts = FitOptions {
        n_starts: cfg.n_starts,
        seed: cfg.seed,
        exec: cfg.exec(),
        ..FitOptions::default()
    };
    let mut fits = Vec::new();
    let mut skipped = Vec::new();
    for (i, r) in fit_transcripts(&transcripts, &models, &opts)
        .into_iter()
        .enumerate()
    {
        let tr = &transcripts[i / models.len()];
        match r {
            Ok(f) => fits.push(f),
            Err(e) if cfg.fail_fast => return Err(e),
            Err(e) => skipped.push(SkippedFit {
                group: tr.agent_id.clone(),
                session: tr.session,
                model: models[i % models.len()],
                reason: e.to_string(),
            }),
        }
    }
    let header = cfg.header(prompt_versions(&transcripts));
    let path = cfg.out(FITS);
    io::write_fits(&path, &header, &fits)?;
    io::write_csv(&cfg.out(FIT_SKIPPED), &header, &skipped)?;
    Ok(FitReport {
        path,
        fits,
        skipped,
    })
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

fn comparison_rows(t: &ComparisonTable) -> (Vec<String>, Vec<Vec<String>>) {
    let mut columns = vec!["model".to_string(), "n_params".to_string()];
    columns.extend(t.groups.iter().map(|g| format!("dbic_{g}")));
    columns.extend(["dbic_total", "mean_fit_quality", "winner"].map(String::from));
    let rows = t
        .models
        .iter()
        .enumerate()
        .map(|(mi, m)| {
            let mut row = vec![m.to_string(), t.n_params[mi].to_string()];
            row.extend(t.group_delta[mi].iter().map(|&d| fmt_num(d)));
            row.push(fmt_num(t.total_delta[mi]));
            row.push(fmt_num(t.mean_fit_quality[mi]));
            row.push((t.winner == *m).to_string());
            row
        })
        .collect();
    (columns, rows)
}

#[derive(Debug)]
pub struct CompareReport {
    pub choice: Option<ComparisonTable>,
    pub affect: Option<ComparisonTable>,
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<CompareReport> {
    let fits_path = cfg.out(FITS);
    let fits = io::read_fits(&fits_path)?;
    let prompt = io::read_header(&fits_path)?.and_then(|h| h.prompt_version);
    let header = cfg.header(prompt);
    let mut out = CompareReport {
        choice: None,
        affect: None,
    };
    for (choice_space, name) in [(true, COMPARISON_CHOICE), (false, COMPARISON_AFFECT)] {
        let space: Vec<FitRecord> = fits
            .iter()
            .filter(|f| f.model.is_choice() == choice_space)
            .cloned()
            .collect();
        let path = cfg.out(name);
        if space.is_empty() {
            if path.exists() {
                fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
            }
            continue;
        }
        let table = compare_models(&space)?;
        let (columns, rows) = comparison_rows(&table);
        io::write_table(&path, &header, &columns, &rows)?;
        if choice_space {
            out.choice = Some(table);
        } else {
            out.affect = Some(table);
        }
    }
    Ok(out)
}

/// Free parameters reported per model, in table order.
fn stat_params(model: ModelId) -> Vec<&'static str> {
    match model {
        ModelId::Choice(m) => m.free_params().iter().map(|p| p.name()).collect(),
        ModelId::Affect(AffectModel::Mm1) => {
            vec!["beta0", "beta_cr", "beta_ev", "beta_rpe", "gamma"]
        }
        ModelId::Affect(AffectModel::Mm2) => vec!["beta0", "beta_cr", "beta_gr", "gamma"],
    }
}

pub fn summary_rows(transcripts: &[SessionTranscript]) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = transcripts
        .iter()
        .map(|t| {
            let s = summarize_session(t);
            let ratings: Vec<f64> = t.ratings.iter().map(|r| f64::from(r.rating)).collect();
            SummaryRow {
                group: t.agent_id.clone(),
                session: t.session,
                gamble_rate: s.overall,
                gamble_rate_mixed: s.mixed,
                gamble_rate_gain: s.gain,
                gamble_rate_loss: s.loss,
                mean_rating: (!ratings.is_empty()).then(|| mean(&ratings)),
                hedonic_contrast: hedonic_difference(t),
                final_points: t.final_points(),
            }
        })
        .collect();
    rows.sort_by(|a, b| (&a.group, a.session).cmp(&(&b.group, b.session)));
    rows
}

/// measure -> group -> per-agent values in session order.
type Measures = BTreeMap<String, BTreeMap<String, Vec<f64>>>;
type PairTest = fn(&GroupSample, &GroupSample) -> Result<crate::stats::TTest>;
/// Mean, SD and n of one measure.
type Described<'a> = (Option<f64>, Option<f64>, Option<&'a str>);

fn collect_measures(summary: &[SummaryRow], fits: &[FitRecord]) -> Measures {
    let mut m: Measures = BTreeMap::new();
    let mut push = |measure: String, group: &str, v: Option<f64>| {
        if let Some(v) = v.filter(|v| v.is_finite()) {
            m.entry(measure)
                .or_default()
                .entry(group.to_string())
                .or_default()
                .push(v);
        }
    };
    for r in summary {
        push("gamble_rate".into(), &r.group, Some(r.gamble_rate));
        push(
            "gamble_rate_mixed".into(),
            &r.group,
            Some(r.gamble_rate_mixed),
        );
        push(
            "gamble_rate_gain".into(),
            &r.group,
            Some(r.gamble_rate_gain),
        );
        push(
            "gamble_rate_loss".into(),
            &r.group,
            Some(r.gamble_rate_loss),
        );
        push("mean_rating".into(), &r.group, r.mean_rating);
        push("hedonic_contrast".into(), &r.group, r.hedonic_contrast);
    }
    let mut fits: Vec<&FitRecord> = fits.iter().collect();
    fits.sort_by(|a, b| (&a.group, a.session, a.model).cmp(&(&b.group, b.session, b.model)));
    for f in fits {
        for p in stat_params(f.model) {
            push(format!("{}.{p}", f.model), &f.group, f.param(p));
        }
        push(
            format!("{}.fit_quality", f.model),
            &f.group,
            Some(f.fit_quality),
        );
    }
    m
}

#[derive(Debug)]
pub struct StatsReport {
    pub rows: Vec<StatRow>,
    /// Tests that could not be computed, with the reason.
    pub notes: Vec<String>,
}

fn stat_row(measure: &str, test: &str, comparison: String, statistic: &str, value: f64) -> StatRow {
    StatRow {
        measure: measure.to_string(),
        test: test.to_string(),
        comparison,
        statistic: statistic.to_string(),
        value,
        df: None,
        p: None,
        effect_size: None,
    }
}

fn measure_stats(
    cfg: &RunConfig,
    measure: &str,
    groups: &BTreeMap<String, Vec<f64>>,
    notes: &mut Vec<String>,
) -> Vec<StatRow> {
    let mut rows = Vec::new();
    let mut samples = Vec::new();
    for (label, values) in groups {
        let mut r = stat_row(measure, "describe", label.clone(), "mean", mean(values));
        r.df = Some(values.len().to_string());
        rows.push(r);
        if values.len() >= 2 {
            let mut r = stat_row(
                measure,
                "describe",
                label.clone(),
                "sd",
                sample_variance(values).sqrt(),
            );
            r.df = Some(values.len().to_string());
            rows.push(r);
        }
        match GroupSample::new(label.clone(), values.clone()) {
            Ok(s) => samples.push(s),
            Err(e) => notes.push(format!("{measure} {label}: {e}")),
        }
    }

    if measure == "hedonic_contrast" {
        for s in &samples {
            match one_sample_t(&s.values) {
                Ok(t) => {
                    let mut r = stat_row(measure, "one_sample_t", s.label.clone(), "t", t.t);
                    r.df = Some(fmt_num(t.df));
                    r.p = Some(t.p);
                    r.effect_size = Some(t.d);
                    rows.push(r);
                }
                Err(e) => notes.push(format!("{measure} one-sample t {}: {e}", s.label)),
            }
        }
    }

    let usable: Vec<&GroupSample> = samples.iter().filter(|s| s.len() >= 2).collect();
    if usable.len() >= 2 {
        let owned: Vec<GroupSample> = usable.iter().map(|s| (*s).clone()).collect();
        let comparison = owned
            .iter()
            .map(|s| s.label.as_str())
            .collect::<Vec<_>>()
            .join("|");
        match one_way_anova(&owned) {
            Ok(a) => {
                let mut r = stat_row(measure, "anova", comparison, "F", a.f);
                r.df = Some(format!("{}/{}", a.df_between, a.df_within));
                r.p = Some(a.p);
                r.effect_size = Some(a.eta_squared);
                rows.push(r);
            }
            Err(e) => notes.push(format!("{measure} ANOVA: {e}")),
        }
        let (test, f): (&str, PairTest) = if cfg.welch {
            ("welch_t", welch_t)
        } else {
            ("student_t", two_sample_t)
        };
        for (i, a) in owned.iter().enumerate() {
            for b in &owned[i + 1..] {
                match f(a, b) {
                    Ok(t) => {
                        let mut r =
                            stat_row(measure, test, format!("{}|{}", a.label, b.label), "t", t.t);
                        r.df = Some(fmt_num(t.df));
                        r.p = Some(t.p);
                        r.effect_size = Some(t.d);
                        rows.push(r);
                    }
                    Err(e) => notes.push(format!("{measure} {} vs {}: {e}", a.label, b.label)),
                }
            }
        }
    }

    if let Some(human) = cfg
        .human_group
        .as_ref()
        .and_then(|h| samples.iter().find(|s| &s.label == h))
    {
        for s in samples.iter().filter(|s| s.label != human.label) {
            let seed = rng::derive_seed(
                cfg.seed ^ rng::label_hash(measure),
                rng::label_hash(&s.label),
            );
            match bootstrap_vs_human(s, human, cfg.bootstrap_iters, seed, cfg.exec()) {
                Ok(b) => {
                    let mut r = stat_row(
                        measure,
                        "bootstrap",
                        format!("{}|{}", s.label, human.label),
                        "mean_t",
                        b.mean_t,
                    );
                    r.df = Some(b.iters.to_string());
                    r.p = Some(b.p);
                    rows.push(r);
                }
                Err(e) => notes.push(format!("{measure} bootstrap {}: {e}", s.label)),
            }
        }
    }
    rows
}

pub fn cmd_stats(cfg: &RunConfig) -> Result<StatsReport> {
    let transcripts = io::read_transcripts(&cfg.out(TRANSCRIPTS))?;
    let fits_path = cfg.out(FITS);
    let fits = if fits_path.exists() {
        io::read_fits(&fits_path)?
    } else {
        Vec::new()
    };
    let header = cfg.header(prompt_versions(&transcripts));
    let summary = summary_rows(&transcripts);
    io::write_csv(&cfg.out(SUMMARY), &header, &summary)?;

    let mut measures = collect_measures(&summary, &fits);
    for g in &cfg.group_inputs {
        let sample = io::read_group_csv(&g.path, &g.label)?;
        measures
            .entry(g.measure.clone())
            .or_default()
            .insert(g.label.clone(), sample.values);
    }
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for (measure, groups) in &measures {
        rows.extend(measure_stats(cfg, measure, groups, &mut notes));
    }
    io::write_csv(&cfg.out(STATS), &header, &rows)?;
    Ok(StatsReport { rows, notes })
}

fn md_table(out: &mut String, columns: &[String], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", columns.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(columns.len()));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    out.push('\n');
}

fn fmt3(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn fmt_p(p: Option<f64>, bootstrap_iters: Option<&str>) -> String {
    match (p, bootstrap_iters) {
        (Some(0.0), Some(iters)) => {
            format!("< {}", fmt3(1.0 / iters.parse::<f64>().unwrap_or(1.0)))
        }
        (Some(p), _) => fmt3(p),
        (None, _) => String::new(),
    }
}

/// Mean and SD per group for each measure, one row per group.
fn describe_table(stats: &[StatRow], measures: &[&str]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut by_group: BTreeMap<&str, BTreeMap<&str, Described>> = BTreeMap::new();
    for r in stats.iter().filter(|r| r.test == "describe") {
        if !measures.contains(&r.measure.as_str()) {
            continue;
        }
        let cell = by_group
            .entry(r.comparison.as_str())
            .or_default()
            .entry(r.measure.as_str())
            .or_default();
        cell.2 = r.df.as_deref();
        match r.statistic.as_str() {
            "mean" => cell.0 = Some(r.value),
            "sd" => cell.1 = Some(r.value),
            _ => {}
        }
    }
    let mut columns = vec!["group".to_string(), "n".to_string()];
    columns.extend(measures.iter().map(|m| m.to_string()));
    let rows = by_group
        .iter()
        .map(|(g, cells)| {
            let n = cells.values().find_map(|c| c.2).unwrap_or("").to_string();
            let mut row = vec![g.to_string(), n];
            for m in measures {
                row.push(match cells.get(m) {
                    Some((Some(mu), Some(sd), _)) => format!("{} ± {}", fmt3(*mu), fmt3(*sd)),
                    Some((Some(mu), None, _)) => fmt3(*mu),
                    _ => String::new(),
                });
            }
            row
        })
        .collect();
    (columns, rows)
}

pub fn cmd_report(cfg: &RunConfig) -> Result<PathBuf> {
    let stats_path = cfg.out(STATS);
    let stats = io::read_stats(&stats_path)?;
    let header = io::read_header(&stats_path)?.unwrap_or_default();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<!-- {} -->",
        header.comment_line().trim_start_matches("# ")
    );
    let _ = writeln!(out, "# risklab report\n");
    let _ = writeln!(
        out,
        "Config hash `{}`, prompt version `{}`.\n",
        header.config_hash.as_deref().unwrap_or("none"),
        header.prompt_version.as_deref().unwrap_or("none")
    );

    let _ = writeln!(out, "## Gambling behaviour\n");
    let (c, r) = describe_table(
        &stats,
        &[
            "gamble_rate",
            "gamble_rate_mixed",
            "gamble_rate_gain",
            "gamble_rate_loss",
        ],
    );
    md_table(&mut out, &c, &r);

    for (title, file, prefix_models) in [
        ("Choice model comparison", COMPARISON_CHOICE, true),
        ("Affect model comparison", COMPARISON_AFFECT, false),
    ] {
        let path = cfg.out(file);
        if !path.exists() {
            continue;
        }
        let (columns, rows) = io::read_table(&path)?;
        let _ = writeln!(out, "## {title}\n");
        let _ = writeln!(
            out,
            "Summed BIC relative to the overall winner; lower is better.\n"
        );
        let rows: Vec<Vec<String>> = rows
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .zip(&columns)
                    .map(|(cell, col)| match cell.parse::<f64>() {
                        Ok(v) if col.starts_with("dbic_") || col == "mean_fit_quality" => fmt3(v),
                        _ => cell,
                    })
                    .collect()
            })
            .collect();
        md_table(&mut out, &columns, &rows);

        let winner = rows
            .iter()
            .find(|r| r.last().map(String::as_str) == Some("true"))
            .map(|r| r[0].clone());
        if let Some(w) = winner.and_then(|w| w.parse::<ModelId>().ok()) {
            if w.is_choice() != prefix_models {
                continue;
            }
            let measures: Vec<String> = stat_params(w).iter().map(|p| format!("{w}.{p}")).collect();
            let refs: Vec<&str> = measures.iter().map(String::as_str).collect();
            let _ = writeln!(out, "### {w} parameters (mean ± SD)\n");
            let (c, r) = describe_table(&stats, &refs);
            md_table(&mut out, &c, &r);
        }
    }

    let _ = writeln!(out, "## Happiness\n");
    let (c, r) = describe_table(&stats, &["mean_rating", "hedonic_contrast"]);
    md_table(&mut out, &c, &r);

    let _ = writeln!(out, "## Tests\n");
    let columns: Vec<String> = [
        "measure",
        "test",
        "comparison",
        "statistic",
        "value",
        "df",
        "p",
        "effect size",
    ]
    .map(String::from)
    .to_vec();
    let rows: Vec<Vec<String>> = stats
        .iter()
        .filter(|r| r.test != "describe")
        .map(|r| {
            let iters = (r.test == "bootstrap").then_some(r.df.as_deref()).flatten();
            vec![
                r.measure.clone(),
                r.test.clone(),
                r.comparison.replace('|', " vs "),
                r.statistic.clone(),
                fmt3(r.value),
                r.df.clone().unwrap_or_default(),
                fmt_p(r.p, iters),
                r.effect_size.map(fmt3).unwrap_or_default(),
            ]
        })
        .collect();
    md_table(&mut out, &columns, &rows);

    let path = cfg.out(REPORT);
    fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affect::AffectParams;
    use crate::choice::ChoiceParams;

    fn synthetic(label: &str, lambda: f64) -> AgentSpec {
        AgentSpec {
            label: label.into(),
            descriptor: AgentDescriptor::Synthetic {
                choice_params: ChoiceParams::cm3(0.9, lambda, 0.4, 0.3, -0.3),
                affect_params: AffectParams::mm1(55.0, 0.1, 0.1, 0.3, 0.6),
                rating_noise_sigma: 3.0,
            },
        }
    }

    #[test]
    fn toml_config_with_defaults() {
        let cfg = RunConfig::from_toml(
            r#"
seed = 11
sessions_per_agent = 4

[[agents]]
label = "pt"
kind = "synthetic"
rating_noise_sigma = 2.0
choice_params = { model_id = "cM2", alpha = 0.8, lambda = 2.0, mu = 0.3 }
affect_params = { model_id = "mM1", beta0 = 50.0, beta_rpe = 0.3, gamma = 0.5 }

[[agents]]
label = "ev"
kind = "ev_max"
"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.n_starts, 50);
        assert_eq!(cfg.bootstrap_iters, 1000);
        assert_eq!(cfg.agents.len(), 2);
        let AgentDescriptor::Synthetic { choice_params, .. } = &cfg.agents[0].descriptor else {
            panic!()
        };
        assert_eq!(choice_params.beta_gain, 0.0);
        assert!(matches!(
            RunConfig::from_toml("sed = 1"),
            Err(Error::Validation { line: 1, .. })
        ));
    }

    #[test]
    fn hash_ignores_paths_and_jobs() {
        let a = RunConfig {
            agents: vec![synthetic("a", 2.0)],
            ..RunConfig::default()
        };
        let b = RunConfig {
            out_dir: "elsewhere".into(),
            jobs: Some(3),
            fail_fast: true,
            ..a.clone()
        };
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        let c = RunConfig {
            seed: 1,
            ..a.clone()
        };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn stages_chain_and_replay_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            seed: 4,
            sessions_per_agent: 3,
            n_starts: 3,
            bootstrap_iters: 50,
            agents: vec![synthetic("a", 1.0), synthetic("b", 3.0)],
            out_dir: dir.path().into(),
            ..RunConfig::default()
        };
        cmd_gen_task(&cfg).unwrap();
        let run = cmd_run(&cfg).unwrap();
        assert_eq!(run.written, 6);
        assert!(run.aborted.is_empty());
        let fit = cmd_fit(&cfg).unwrap();
        assert_eq!(fit.fits.len(), 6 * 6);
        let cmp = cmd_compare(&cfg).unwrap();
        assert!(cmp.choice.is_some() && cmp.affect.is_some());
        let stats = cmd_stats(&cfg).unwrap();
        assert!(stats
            .rows
            .iter()
            .any(|r| r.test == "anova" && r.measure == "cM3.lambda"));
        let report = fs::read_to_string(cmd_report(&cfg).unwrap()).unwrap();
        assert!(report.contains("## Choice model comparison"));

        let original = io::read_transcripts(&cfg.out(TRANSCRIPTS)).unwrap();
        let copy = dir.path().join("source.jsonl");
        fs::copy(cfg.out(TRANSCRIPTS), &copy).unwrap();
        let replay_cfg = RunConfig {
            agents: vec![AgentSpec {
                label: "replay".into(),
                descriptor: AgentDescriptor::Replay {
                    source_transcript: copy,
                },
            }],
            ..cfg.clone()
        };
        cmd_run(&replay_cfg).unwrap();
        assert_eq!(
            io::read_transcripts(&cfg.out(TRANSCRIPTS)).unwrap(),
            original
        );
    }

    #[test]
    fn per_session_probe_schedules() {
        let task = build_trial_set(1);
        let a = session_task(&task, session_seed(1, "x", 0), false).unwrap();
        let b = session_task(&task, session_seed(1, "x", 1), false).unwrap();
        assert_ne!(a.probe_after, b.probe_after);
        a.validate().unwrap();
        assert_eq!(session_task(&task, 99, true).unwrap(), task);
    }
}
