//! Pipeline stages behind the CLI subcommands. Stages run sequentially,
//! validate their inputs, and write artifacts atomically under the artifact
//! directory. Each stage records the config hash it ran under; a changed
//! config invalidates that stage's outputs instead of silently reusing them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::analytics::{
    pairwise_cosine_by_style, project_2d, silhouette_2d, standardize,
    PrincipalComponentProjector, Projection2D,
};
use crate::config::PipelineConfig;
use crate::domain::{
    AttachmentStyle, EmbeddingDataset, EmbeddingDomain, InterviewEmbedding,
    InterviewTranscript, Source,
};
use crate::embedding::{embed_transcripts, ingest_human_transcripts};
use crate::error::{Error, Result};
use crate::eval::protocols::{class_index, data_increment_curve, evaluate_cvloo, evaluate_transfer};
use crate::eval::{EvalReport, IncrementCurve};
use crate::gateway::mock::{MockChatBackend, MockEmbedBackend};
use crate::gateway::providers::{AnthropicChatBackend, OpenAiChatBackend, OpenAiEmbedBackend};
use crate::gateway::Gateway;
use crate::interview::{run_interview, InterviewConfig, InterviewProtocol};
use crate::jsonl;
use crate::persona::{build_cohort_with_ids, CohortSpec};
use crate::retrieval::index_memories;

/// Chat tag used for the fabricated human cohort in mock mode.
pub const MOCK_HUMAN_TAG: &str = "mock-human";

/// Artifact locations under the configured artifact directory.
pub struct Paths {
    root: PathBuf,
}

impl Paths {
    pub fn new(config: &PipelineConfig) -> Self {
        Paths {
            root: config.artifact_dir.clone(),
        }
    }

    pub fn agents(&self) -> PathBuf {
        self.root.join("agents.jsonl")
    }

    pub fn human_agents(&self) -> PathBuf {
        self.root.join("human_agents.jsonl")
    }

    pub fn interviews_dir(&self) -> PathBuf {
        self.root.join("interviews")
    }

    pub fn interviews(&self, tag: &str) -> PathBuf {
        self.interviews_dir().join(format!("{tag}.jsonl"))
    }

    pub fn human_transcripts(&self) -> PathBuf {
        self.root.join("human")
    }

    pub fn human_labels(&self) -> PathBuf {
        self.root.join("human_labels.json")
    }

    pub fn embeddings_dir(&self) -> PathBuf {
        self.root.join("embeddings")
    }

    pub fn embeddings(&self, tag: &str) -> PathBuf {
        self.embeddings_dir().join(format!("{tag}.jsonl"))
    }

    pub fn human_labeled(&self) -> PathBuf {
        self.embeddings_dir().join("human_labeled.jsonl")
    }

    pub fn human_unlabeled(&self) -> PathBuf {
        self.embeddings_dir().join("human_unlabeled.jsonl")
    }

    pub fn diversity(&self) -> PathBuf {
        self.root.join("diversity.json")
    }

    pub fn projection_csv(&self) -> PathBuf {
        self.root.join("projection.csv")
    }

    pub fn projection_summary(&self) -> PathBuf {
        self.root.join("projection.json")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn table(&self) -> PathBuf {
        self.reports_dir().join("table.json")
    }

    pub fn increment(&self, tag: &str) -> PathBuf {
        self.reports_dir().join(format!("increment_{tag}.json"))
    }

    fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
}

fn load_manifest(paths: &Paths) -> BTreeMap<String, String> {
    std::fs::read(paths.manifest())
        .ok()
        .and_then(|bytes| serde_json::from_slice(&bytes).ok())
        .unwrap_or_default()
}

/// Clears the stage's outputs if it previously ran under a different config,
/// then records the current hash so an interrupted run can resume.
fn stage_begin(
    config: &PipelineConfig,
    paths: &Paths,
    stage: &str,
    outputs: &[PathBuf],
) -> Result<()> {
    std::fs::create_dir_all(&paths.root)?;
    let mut manifest = load_manifest(paths);
    let hash = config.content_hash();
    if manifest.get(stage).is_some_and(|h| *h != hash) {
        eprintln!("note: config changed since the last `{stage}` run; discarding its artifacts");
        for out in outputs {
            if out.is_dir() {
                std::fs::remove_dir_all(out)?;
            } else if out.exists() {
                std::fs::remove_file(out)?;
            }
        }
    }
    manifest.insert(stage.to_string(), hash);
    jsonl::write_json_pretty(&paths.manifest(), &manifest)?;
    Ok(())
}

/// Providers for the configured tags: deterministic mocks offline, API
/// backends otherwise (keys come from the environment only).
pub fn build_gateway(config: &PipelineConfig) -> Result<Gateway> {
    let mut gw = Gateway::new().with_cache_dir(config.artifact_dir.join("cache"));
    let mut chat_tags = config.chat_models.clone();
    if config.mock && config.human_transcripts_dir.is_none() {
        chat_tags.push(MOCK_HUMAN_TAG.to_string());
    }
    if config.mock {
        for tag in &chat_tags {
            gw.register_chat(tag, Box::new(MockChatBackend::new(config.seed, tag)));
        }
        gw.register_embed(
            &config.answer_embedder,
            Box::new(MockEmbedBackend::new(config.answer_embed_dim)),
        );
        gw.register_embed(
            &config.memory_embedder,
            Box::new(MockEmbedBackend::new(config.memory_embed_dim)),
        );
    } else {
        for tag in &chat_tags {
            if tag.contains("claude") {
                gw.register_chat(tag, Box::new(AnthropicChatBackend::from_env(tag)?));
            } else {
                gw.register_chat(tag, Box::new(OpenAiChatBackend::from_env(tag)?));
            }
        }
        gw.register_embed(
            &config.answer_embedder,
            Box::new(OpenAiEmbedBackend::from_env(
                &config.answer_embedder,
                config.answer_embed_dim,
            )?),
        );
        gw.register_embed(
            &config.memory_embedder,
            Box::new(OpenAiEmbedBackend::from_env(
                &config.memory_embedder,
                config.memory_embed_dim,
            )?),
        );
    }
    Ok(gw)
}

fn print_usage(gw: &Gateway) {
    for (tag, usage) in gw.usage_by_model() {
        println!(
            "usage {tag}: {} input tokens, {} output tokens",
            usage.input_tokens, usage.output_tokens
        );
    }
}

/// Synthetic cohort (plus, in mock mode, the fabricated human cohort used
/// downstream as stand-in human data).
pub fn cmd_generate_agents(config: &PipelineConfig) -> Result<()> {
    let paths = Paths::new(config);
    stage_begin(
        config,
        &paths,
        "generate-agents",
        &[paths.agents(), paths.human_agents()],
    )?;
    let gw = build_gateway(config)?;
    let reference = config.reference();

    // One synthetic cohort shared by every chat model; the first tag drives
    // profile/memory generation.
    let spec = CohortSpec::new(
        config.total_agents,
        config.total_agents / 3,
        reference,
        &config.chat_models[0],
    )?;
    let agents = build_cohort_with_ids(&gw, &spec, &paths.agents(), "agent")?;
    println!("generated {} agents -> {}", agents.len(), paths.agents().display());

    if config.mock && config.human_transcripts_dir.is_none() {
        let total = config.mock_human_total().div_ceil(3) * 3;
        let spec = CohortSpec::new(total, total / 3, reference, MOCK_HUMAN_TAG)?;
        let humans = build_cohort_with_ids(&gw, &spec, &paths.human_agents(), "human")?;
        println!(
            "generated {} mock-human agents -> {}",
            humans.len(),
            paths.human_agents().display()
        );
    }
    print_usage(&gw);
    Ok(())
}

fn load_protocol(config: &PipelineConfig) -> Result<InterviewProtocol> {
    match &config.protocol_path {
        Some(path) => InterviewProtocol::from_file(path),
        None => Ok(InterviewProtocol::default_aai()),
    }
}

/// One transcript per (agent, chat model), resumable by interview id.
pub fn cmd_run_interviews(config: &PipelineConfig) -> Result<()> {
    let paths = Paths::new(config);
    if !paths.agents().exists() {
        return Err(Error::MissingArtifact(
            paths.agents().display().to_string(),
            "generate-agents".into(),
        ));
    }
    stage_begin(
        config,
        &paths,
        "run-interviews",
        &[
            paths.interviews_dir(),
            paths.human_transcripts(),
            paths.human_labels(),
        ],
    )?;
    let gw = build_gateway(config)?;
    let protocol = load_protocol(config)?;
    let agents: Vec<crate::domain::AgentRecord> = jsonl::read_jsonl(&paths.agents())?;

    for tag in &config.chat_models {
        let out = paths.interviews(tag);
        let mut existing: std::collections::BTreeSet<String> = if out.exists() {
            jsonl::read_jsonl::<InterviewTranscript>(&out)?
                .into_iter()
                .map(|t| t.interview_id)
                .collect()
        } else {
            Default::default()
        };
        let mut ic = InterviewConfig::new(tag, &config.memory_embedder);
        ic.dialogue_temperature = config.dialogue_temperature;
        ic.retrieval_k = config.retrieval_k;
        ic.max_answer_tokens = config.max_answer_tokens;
        for agent in &agents {
            let interview_id = format!("{}--{tag}", agent.agent_id);
            if existing.contains(&interview_id) {
                continue;
            }
            let index = index_memories(agent, &gw, &config.memory_embedder)?;
            let transcript = run_interview(agent, &index, &protocol, &gw, &ic, &interview_id)?;
            jsonl::append_jsonl(&out, &transcript)?;
            existing.insert(interview_id);
        }
        println!("{}: {} transcripts", out.display(), existing.len());
    }

    if config.mock && config.human_transcripts_dir.is_none() {
        run_mock_human_interviews(config, &paths, &gw, &protocol)?;
    }
    print_usage(&gw);
    Ok(())
}

/// Interviews the fabricated human cohort and writes per-interview JSON
/// files with `source: human` and no embedded labels; the labeled subset is
/// recorded in a separate label map, mirroring how real human data arrives.
fn run_mock_human_interviews(
    config: &PipelineConfig,
    paths: &Paths,
    gw: &Gateway,
    protocol: &InterviewProtocol,
) -> Result<()> {
    let humans: Vec<crate::domain::AgentRecord> = jsonl::read_jsonl(&paths.human_agents())?;
    let dir = paths.human_transcripts();
    std::fs::create_dir_all(&dir)?;

    let mut ic = InterviewConfig::new(MOCK_HUMAN_TAG, &config.memory_embedder);
    ic.dialogue_temperature = config.dialogue_temperature;
    ic.retrieval_k = config.retrieval_k;
    ic.max_answer_tokens = config.max_answer_tokens;

    let mut labels: BTreeMap<String, AttachmentStyle> = BTreeMap::new();
    let mut remaining = config.mock_human_labeled.clone();
    let mut written = 0usize;
    for agent in &humans {
        if written == config.mock_human_total() {
            break;
        }
        let interview_id = agent.agent_id.clone();
        let style_slot = &mut remaining[class_index(agent.style)];
        if *style_slot > 0 {
            *style_slot -= 1;
            labels.insert(interview_id.clone(), agent.style);
        }
        written += 1;
        let file = dir.join(format!("{interview_id}.json"));
        if file.exists() {
            continue;
        }
        let mut transcript = run_interview(agent, &index_memories(agent, gw, &config.memory_embedder)?, protocol, gw, &ic, &interview_id)?;
        transcript.source = Source::Human;
        transcript.label = None;
        jsonl::write_json_pretty(&file, &transcript)?;
    }
    if remaining.iter().any(|&r| r > 0) {
        return Err(Error::Validation(format!(
            "mock-human cohort too small to satisfy labeled counts {:?}",
            config.mock_human_labeled
        )));
    }
    jsonl::write_json_pretty(&paths.human_labels(), &labels)?;
    println!("{}: {written} human transcripts ({} labeled)", dir.display(), labels.len());
    Ok(())
}

fn load_embeddings(path: &Path, dim: usize, stage: &str) -> Result<EmbeddingDataset> {
    if !path.exists() {
        return Err(Error::MissingArtifact(
            path.display().to_string(),
            stage.into(),
        ));
    }
    let entries: Vec<InterviewEmbedding> = jsonl::read_jsonl(path)?;
    EmbeddingDataset::new(entries, dim)
}

/// Interview-level vectors for every synthetic dataset plus the human set
/// (split into labeled and unlabeled files).
pub fn cmd_embed(config: &PipelineConfig) -> Result<()> {
    let paths = Paths::new(config);
    stage_begin(config, &paths, "embed", &[paths.embeddings_dir()])?;
    let gw = build_gateway(config)?;

    for tag in &config.chat_models {
        let src = paths.interviews(tag);
        if !src.exists() {
            return Err(Error::MissingArtifact(
                src.display().to_string(),
                "run-interviews".into(),
            ));
        }
        let transcripts: Vec<InterviewTranscript> = jsonl::read_jsonl(&src)?;
        let ds = embed_transcripts(&transcripts, &gw, &config.answer_embedder)?;
        jsonl::write_jsonl(&paths.embeddings(tag), &ds.entries)?;
        println!("{}: {} embeddings", paths.embeddings(tag).display(), ds.len());
    }

    let human_dir = config
        .human_transcripts_dir
        .clone()
        .unwrap_or_else(|| paths.human_transcripts());
    if !human_dir.exists() {
        return Err(Error::MissingArtifact(
            human_dir.display().to_string(),
            "run-interviews".into(),
        ));
    }
    let labels_path = config
        .human_labels_path
        .clone()
        .unwrap_or_else(|| paths.human_labels());
    let labels: Option<BTreeMap<String, AttachmentStyle>> = if labels_path.exists() {
        let bytes = std::fs::read(&labels_path)?;
        Some(serde_json::from_slice(&bytes)?)
    } else {
        eprintln!("warning: no human label file at {}", labels_path.display());
        None
    };
    let human = ingest_human_transcripts(&human_dir, labels.as_ref(), &gw, &config.answer_embedder)?;
    let (labeled, unlabeled): (Vec<_>, Vec<_>) = human
        .entries
        .into_iter()
        .partition(|e| e.domain == EmbeddingDomain::HumanLabeled);
    jsonl::write_jsonl(&paths.human_labeled(), &labeled)?;
    jsonl::write_jsonl(&paths.human_unlabeled(), &unlabeled)?;
    println!(
        "human embeddings: {} labeled, {} unlabeled",
        labeled.len(),
        unlabeled.len()
    );
    print_usage(&gw);
    Ok(())
}

/// Within-style pairwise cosine similarities of the synthetic embeddings.
pub fn cmd_diversity(config: &PipelineConfig) -> Result<()> {
    let paths = Paths::new(config);
    stage_begin(config, &paths, "diversity", &[paths.diversity()])?;
    let mut entries = Vec::new();
    for tag in &config.chat_models {
        let ds = load_embeddings(&paths.embeddings(tag), config.answer_embed_dim, "embed")?;
        entries.extend(ds.entries);
    }
    let combined = EmbeddingDataset::new(entries, config.answer_embed_dim)?;
    let report = pairwise_cosine_by_style(&combined)?;
    jsonl::write_json_pretty(&paths.diversity(), &report)?;
    for g in &report.groups {
        println!(
            "{} / {}: {} pairs, mean similarity {:.4}",
            g.model_tag, g.style, g.summary.count, g.summary.mean
        );
    }
    Ok(())
}

/// 2D projection of standardized synthetic + human embeddings, with
/// silhouette scores by style and by domain.
pub fn cmd_project(config: &PipelineConfig) -> Result<()> {
    let paths = Paths::new(config);
    stage_begin(
        config,
        &paths,
        "project",
        &[paths.projection_csv(), paths.projection_summary()],
    )?;
    let unlabeled = load_embeddings(&paths.human_unlabeled(), config.answer_embed_dim, "embed")?;
    let labeled = load_embeddings(&paths.human_labeled(), config.answer_embed_dim, "embed")?;

    let mut datasets = Vec::new();
    for tag in &config.chat_models {
        let ds = load_embeddings(&paths.embeddings(tag), config.answer_embed_dim, "embed")?;
        // Shift each synthetic dataset onto the human manifold when
        // unlabeled human data exists; otherwise project raw vectors.
        if unlabeled.is_empty() {
            datasets.push(ds);
        } else {
            datasets.push(standardize(&ds, &unlabeled)?);
        }
    }
    datasets.push(labeled);
    datasets.push(unlabeled);
    let refs: Vec<&EmbeddingDataset> = datasets.iter().collect();
    let projection = project_2d(&refs, &PrincipalComponentProjector::default())?;

    write_projection_csv(&paths.projection_csv(), &projection)?;
    let summary = projection_summary(&projection)?;
    jsonl::write_json_pretty(&paths.projection_summary(), &summary)?;
    println!(
        "projection: {} points, style silhouette {:.4}",
        projection.points.len(),
        summary.style_silhouette
    );
    Ok(())
}

#[derive(Debug, serde::Serialize, serde::Deserialize)]
pub struct ProjectionSummary {
    /// Silhouette of labeled points clustered by attachment style.
    pub style_silhouette: f64,
    /// Silhouette of all points clustered by source domain.
    pub domain_silhouette: f64,
}

fn projection_summary(projection: &Projection2D) -> Result<ProjectionSummary> {
    let labeled: Vec<_> = projection
        .points
        .iter()
        .filter(|p| p.label.is_some())
        .collect();
    let style_points: Vec<(f64, f64)> = labeled.iter().map(|p| (p.x, p.y)).collect();
    let style_ids: Vec<usize> = labeled
        .iter()
        .map(|p| class_index(p.label.unwrap()))
        .collect();
    let style_silhouette = silhouette_2d(&style_points, &style_ids)?;

    let all_points: Vec<(f64, f64)> = projection.points.iter().map(|p| (p.x, p.y)).collect();
    let mut domain_names: Vec<String> = projection
        .points
        .iter()
        .map(|p| p.domain.to_string())
        .collect();
    let mut unique = domain_names.clone();
    unique.sort();
    unique.dedup();
    let domain_ids: Vec<usize> = domain_names
        .drain(..)
        .map(|d| unique.iter().position(|u| *u == d).unwrap())
        .collect();
    let domain_silhouette = if unique.len() > 1 {
        silhouette_2d(&all_points, &domain_ids)?
    } else {
        0.0
    };
    Ok(ProjectionSummary {
        style_silhouette,
        domain_silhouette,
    })
}

fn write_projection_csv(path: &Path, projection: &Projection2D) -> Result<()> {
    let mut out = String::from("interview_id,domain,label,x,y\n");
    for p in &projection.points {
        let label = p.label.map(|s| s.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.interview_id, p.domain, label, p.x, p.y
        ));
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// The full report grid: per chat model, raw and standardized transfer for
/// every classifier; plus the human-only leave-one-out row and one
/// increment curve per chat model.
pub fn cmd_evaluate(config: &PipelineConfig) -> Result<()> {
    let paths = Paths::new(config);
    stage_begin(config, &paths, "evaluate", &[paths.reports_dir()])?;
    let labeled = load_embeddings(&paths.human_labeled(), config.answer_embed_dim, "embed")?;
    let unlabeled = load_embeddings(&paths.human_unlabeled(), config.answer_embed_dim, "embed")?;
    if labeled.is_empty() {
        return Err(Error::Validation(
            "no labeled human embeddings; evaluation needs a labeled test set".into(),
        ));
    }

    let mut reports: Vec<EvalReport> = Vec::new();
    for tag in &config.chat_models {
        let synthetic = load_embeddings(&paths.embeddings(tag), config.answer_embed_dim, "embed")?;
        for standardized in [false, true] {
            if standardized && unlabeled.is_empty() {
                eprintln!("warning: no unlabeled human data; skipping standardized row for {tag}");
                continue;
            }
            for spec in &config.classifiers {
                let report = evaluate_transfer(
                    &synthetic,
                    &labeled,
                    spec,
                    standardized,
                    (!unlabeled.is_empty()).then_some(&unlabeled),
                )?;
                println!(
                    "transfer {tag}{} {}: auc {:.4}{}",
                    if standardized { " (standardized)" } else { "" },
                    spec.name(),
                    report.auc,
                    report.se.map(|s| format!(" (se {s:.4})")).unwrap_or_default()
                );
                reports.push(report);
            }
        }
    }
    for spec in &config.classifiers {
        let report = evaluate_cvloo(&labeled, spec)?;
        println!(
            "cvloo human {}: auc {:.4}{}",
            spec.name(),
            report.auc,
            report.se.map(|s| format!(" (se {s:.4})")).unwrap_or_default()
        );
        reports.push(report);
    }
    jsonl::write_json_pretty(&paths.table(), &reports)?;

    if !unlabeled.is_empty() {
        for tag in &config.chat_models {
            let synthetic =
                load_embeddings(&paths.embeddings(tag), config.answer_embed_dim, "embed")?;
            let per_style = crate::domain::AttachmentStyle::ALL
                .iter()
                .map(|&s| synthetic.by_label(s).len())
                .min()
                .unwrap_or(0);
            let grid: Vec<usize> = config
                .increment_grid
                .iter()
                .copied()
                .filter(|&n| n <= per_style)
                .collect();
            if grid.is_empty() {
                eprintln!(
                    "warning: increment grid exceeds per-style availability {per_style}; \
                     skipping curve for {tag}"
                );
                continue;
            }
            let curve = data_increment_curve(
                &synthetic,
                &labeled,
                &config.increment_classifier,
                &grid,
                config.increment_reps,
                &unlabeled,
                config.seed,
            )?;
            jsonl::write_json_pretty(&paths.increment(tag), &curve)?;
            println!("increment curve for {tag}: {} points", curve.points.len());
        }
    }
    Ok(())
}

/// Human-readable summary assembled from the saved reports.
pub fn cmd_report(config: &PipelineConfig) -> Result<String> {
    let paths = Paths::new(config);
    if !paths.table().exists() {
        return Err(Error::MissingArtifact(
            paths.table().display().to_string(),
            "evaluate".into(),
        ));
    }
    let reports: Vec<EvalReport> = serde_json::from_slice(&std::fs::read(paths.table())?)?;
    let mut out = String::new();
    out.push_str(&format!(
        "{:<34} {:>18} {:>18} {:>18} {:>18}\n",
        "training source", "logreg_l1", "logreg_l2", "extra_trees", "mlp"
    ));
    let mut rows: Vec<(String, BTreeMap<&'static str, String>)> = Vec::new();
    for r in &reports {
        let row_name = match r.protocol {
            crate::eval::Protocol::Cvloo => "human (cvloo)".to_string(),
            _ => {
                let source = r
                    .train
                    .domains
                    .first()
                    .cloned()
                    .unwrap_or_else(|| "synthetic".into());
                if r.standardized {
                    format!("{source} (standardized)")
                } else {
                    source
                }
            }
        };
        let cell = match r.se {
            Some(se) => format!("{:.2} ({:.2})", r.auc, se),
            None => format!("{:.2}", r.auc),
        };
        match rows.iter_mut().find(|(name, _)| *name == row_name) {
            Some((_, cells)) => {
                cells.insert(r.spec.name(), cell);
            }
            None => {
                let mut cells = BTreeMap::new();
                cells.insert(r.spec.name(), cell);
                rows.push((row_name, cells));
            }
        }
    }
    for (name, cells) in &rows {
        out.push_str(&format!(
            "{:<34} {:>18} {:>18} {:>18} {:>18}\n",
            name,
            cells.get("logreg_l1").cloned().unwrap_or_default(),
            cells.get("logreg_l2").cloned().unwrap_or_default(),
            cells.get("extra_trees").cloned().unwrap_or_default(),
            cells.get("mlp").cloned().unwrap_or_default(),
        ));
    }
    for tag in &config.chat_models {
        let path = paths.increment(tag);
        if let Ok(bytes) = std::fs::read(&path) {
            let curve: IncrementCurve = serde_json::from_slice(&bytes)?;
            out.push_str(&format!("\nincrement curve ({tag}):\n"));
            for p in &curve.points {
                out.push_str(&format!(
                    "  n={:<3} auc {:.4} (se {:.4})\n",
                    p.n_per_style, p.mean_auc, p.se
                ));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PipelineConfig;

    fn tiny_config(dir: &Path) -> PipelineConfig {
        let mut config = PipelineConfig::default();
        config.artifact_dir = dir.to_path_buf();
        config.total_agents = 3;
        config.chat_models = vec!["mock-gpt".into()];
        config.answer_embed_dim = 24;
        config.memory_embed_dim = 16;
        config.mock_human_labeled = vec![2, 2, 2];
        config.mock_human_unlabeled = 3;
        config.classifiers = vec![crate::eval::ClassifierSpec::logreg_l2()];
        config.increment_grid = vec![1];
        config.validate().unwrap();
        config
    }

    #[test]
    fn evaluate_without_embeddings_names_the_missing_stage() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        match cmd_evaluate(&config).unwrap_err() {
            Error::MissingArtifact(_, stage) => assert_eq!(stage, "embed"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn interviews_without_agents_name_the_missing_stage() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        match cmd_run_interviews(&config).unwrap_err() {
            Error::MissingArtifact(_, stage) => assert_eq!(stage, "generate-agents"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn config_change_invalidates_stage_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        let paths = Paths::new(&config);
        std::fs::create_dir_all(&paths.root).unwrap();
        std::fs::write(paths.agents(), "stale\n").unwrap();
        stage_begin(&config, &paths, "generate-agents", &[paths.agents()]).unwrap();
        // Same config: artifact survives.
        assert!(paths.agents().exists());

        let mut changed = config.clone();
        changed.seed = 999;
        stage_begin(&changed, &paths, "generate-agents", &[paths.agents()]).unwrap();
        assert!(!paths.agents().exists());
    }

    // The full pipeline is exercised end-to-end in the integration suite;
    // here we run the cheapest slice to cover stage wiring.
    #[test]
    fn tiny_mock_pipeline_runs_all_stages() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        cmd_generate_agents(&config).unwrap();
        cmd_run_interviews(&config).unwrap();
        cmd_embed(&config).unwrap();
        cmd_diversity(&config).unwrap();
        cmd_project(&config).unwrap();
        cmd_evaluate(&config).unwrap();
        let report = cmd_report(&config).unwrap();
        assert!(report.contains("human (cvloo)"));
        assert!(report.contains("standardized"));

        let paths = Paths::new(&config);
        for p in [
            paths.agents(),
            paths.interviews("mock-gpt"),
            paths.embeddings("mock-gpt"),
            paths.human_labeled(),
            paths.human_unlabeled(),
            paths.diversity(),
            paths.projection_csv(),
            paths.table(),
            paths.increment("mock-gpt"),
        ] {
            assert!(p.exists(), "{} missing", p.display());
        }
    }
}
