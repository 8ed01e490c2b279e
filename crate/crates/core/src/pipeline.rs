//! Pipeline plumbing shared by the CLI and the end-to-end tests: JSONL files
//! with a reproducibility header, model training, realizer assembly, and
//! run-level realize / fill / evaluate.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decoders::{FsmConfig, McBeamConfig};
use crate::ensemble::{
    cascade_realize, event_seed, BeamRealizer, EnsembleConfig, EnsembleError, FsmRealizer, McRealizer, Member,
    Realizer, RetEditRealizer, RunRecord, TemplateRealizer,
};
use crate::eventify::EventRecord;
use crate::lexicon::Lexicon;
use crate::memory::StoryMemory;
use crate::retedit::{EmbeddingConfig, RetrievalError, RetrievalIndex};
use crate::seq_model::{Direction, ModelError, NGramConfig, NGramModel, SequenceModel};
use crate::slotfill::{fill_sentence, EntityPool};
use crate::templater::{FrameTable, TemplateConfig};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} line {line}: {source}")]
    Json {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

/// First line of every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
}

impl Header {
    pub fn new<C: Serialize>(format: &str, config: &C, seeds: &[(&str, u64)]) -> Self {
        Self {
            format: format.to_string(),
            version: 1,
            config_hash: config_hash(config),
            seeds: seeds.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: Header,
}

/// Hex SHA-256 of the value's JSON form. Maps serialize with sorted keys
/// when they are `BTreeMap`s, which every config here uses.
pub fn config_hash<C: Serialize>(config: &C) -> String {
    let json = serde_json::to_vec(config).expect("configs serialize");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, header: &Header, records: &[T]) -> Result<(), PipelineError> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let mut line = |value: String| writeln!(w, "{value}").map_err(io_err(path));
    line(serde_json::to_string(&HeaderLine { header: header.clone() }).expect("header serializes"))?;
    for r in records {
        line(serde_json::to_string(r).expect("records serialize"))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads records, skipping an optional header line.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<(Option<Header>, Vec<T>), PipelineError> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut header = None;
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            if let Ok(h) = serde_json::from_str::<HeaderLine>(&line) {
                header = Some(h.header);
                continue;
            }
        }
        let record = serde_json::from_str(&line).map_err(|source| PipelineError::Json {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?;
        out.push(record);
    }
    Ok((header, out))
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<(), PipelineError> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value).expect("values serialize");
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T, PipelineError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| PipelineError::Json {
        path: path.display().to_string(),
        line: source.line(),
        source,
    })
}

/// Every tunable of a run. Serialized into output headers via its hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub split_seed: u64,
    pub decode_seed: u64,
    pub fill_seed: u64,
    pub order: usize,
    pub copy_bias: f64,
    pub beam_width: usize,
    pub max_length: usize,
    pub mc: McSettings,
    pub fsm: FsmSettings,
    pub template: TemplateSettings,
    pub embedding: EmbeddingSettings,
    pub ensemble: EnsembleConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McSettings {
    pub beam_width: usize,
    pub playouts: usize,
    pub alpha: f64,
    pub weights: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FsmSettings {
    pub state_beam: usize,
    pub expansion_width: usize,
    pub min_matched: Option<usize>,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemplateSettings {
    pub top_k: usize,
    pub max_phrase_length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingSettings {
    pub dim: usize,
    pub seed: u64,
}

impl Default for McSettings {
    fn default() -> Self {
        let d = McBeamConfig::default();
        Self {
            beam_width: d.beam_width,
            playouts: d.playouts,
            alpha: d.alpha,
            weights: d.weights.as_array(),
        }
    }
}

impl Default for FsmSettings {
    fn default() -> Self {
        let d = FsmConfig::default();
        Self {
            state_beam: d.state_beam,
            expansion_width: d.expansion_width,
            min_matched: d.min_matched,
            horizon: d.horizon,
        }
    }
}

impl Default for TemplateSettings {
    fn default() -> Self {
        let d = TemplateConfig::default();
        Self {
            top_k: d.top_k,
            max_phrase_length: d.max_phrase_length,
        }
    }
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        Self {
            dim: EmbeddingConfig::default().dim,
            seed: 0,
        }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            split_seed: 0,
            decode_seed: 0,
            fill_seed: 0,
            order: 3,
            copy_bias: crate::seq_model::DEFAULT_COPY_BIAS,
            beam_width: 5,
            max_length: 20,
            mc: McSettings::default(),
            fsm: FsmSettings::default(),
            template: TemplateSettings::default(),
            embedding: EmbeddingSettings::default(),
            ensemble: EnsembleConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn ngram(&self, direction: Direction) -> NGramConfig {
        NGramConfig {
            order: self.order,
            copy_bias: self.copy_bias,
            direction,
            ..Default::default()
        }
    }

    pub fn mc_config(&self) -> McBeamConfig {
        McBeamConfig {
            beam_width: self.mc.beam_width,
            playouts: self.mc.playouts,
            alpha: self.mc.alpha,
            max_length: self.max_length,
            weights: crate::decoders::PlayoutWeights::new(self.mc.weights).unwrap_or_default(),
            seed: self.decode_seed,
        }
    }

    pub fn fsm_config(&self) -> FsmConfig {
        FsmConfig {
            state_beam: self.fsm.state_beam,
            expansion_width: self.fsm.expansion_width,
            min_matched: self.fsm.min_matched,
            horizon: self.fsm.horizon,
        }
    }

    pub fn template_config(&self) -> TemplateConfig {
        TemplateConfig {
            top_k: self.template.top_k,
            max_phrase_length: self.template.max_phrase_length,
            seed: self.decode_seed,
            ..Default::default()
        }
    }

    pub fn embedding_config(&self) -> EmbeddingConfig {
        EmbeddingConfig {
            dim: self.embedding.dim,
            seed: self.embedding.seed,
            ..Default::default()
        }
    }
}

pub fn pairs_of(records: &[EventRecord]) -> Vec<(crate::event::EventTuple, Vec<String>)> {
    records.iter().map(|r| (r.event.clone(), r.sentence.clone())).collect()
}

/// Forward and backward n-gram models plus the retrieval index.
pub struct TrainedModels {
    pub forward: Arc<NGramModel>,
    pub backward: Arc<NGramModel>,
    pub index: Arc<RetrievalIndex>,
}

impl TrainedModels {
    pub fn train(records: &[EventRecord], cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        let pairs = pairs_of(records);
        Ok(Self {
            forward: Arc::new(NGramModel::train(&pairs, &cfg.ngram(Direction::Forward))?),
            backward: Arc::new(NGramModel::train(&pairs, &cfg.ngram(Direction::Backward))?),
            index: Arc::new(RetrievalIndex::build(pairs, &cfg.embedding_config())?),
        })
    }

    /// One realizer per cascade member.
    pub fn realizers(&self, cfg: &PipelineConfig, lexicon: Option<Arc<Lexicon>>) -> Vec<Box<dyn Realizer>> {
        let fwd: Arc<dyn SequenceModel> = self.forward.clone();
        let bwd: Arc<dyn SequenceModel> = self.backward.clone();
        vec![
            Box::new(RetEditRealizer::new(self.index.clone())),
            Box::new(TemplateRealizer {
                forward: fwd.clone(),
                backward: bwd,
                frames: FrameTable::default(),
                lexicon,
                config: cfg.template_config(),
            }),
            Box::new(McRealizer {
                model: fwd.clone(),
                config: cfg.mc_config(),
            }),
            Box::new(FsmRealizer {
                model: fwd.clone(),
                config: cfg.fsm_config(),
            }),
            Box::new(BeamRealizer {
                model: fwd,
                width: cfg.beam_width,
                max_length: cfg.max_length,
            }),
        ]
    }
}

/// Realizes each event through the cascade with a per-event seed.
pub fn realize_all(
    events: &[EventRecord],
    realizers: &[Box<dyn Realizer>],
    ensemble: &EnsembleConfig,
    seed: u64,
) -> Result<Vec<RunRecord>, PipelineError> {
    let refs: Vec<&dyn Realizer> = realizers.iter().map(|r| r.as_ref()).collect();
    events
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let out = cascade_realize(&e.event, &refs, ensemble, event_seed(seed, i))?;
            Ok(RunRecord::new(&e.event, &out))
        })
        .collect()
}

/// One realized and filled sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilledRecord {
    pub story_id: String,
    pub index: usize,
    pub member_used: Member,
    pub generalized: Vec<String>,
    pub filled: String,
}

/// Fills realized sentences story by story; each story gets its own memory
/// and a seed derived from the run seed and the story id.
pub fn fill_all(
    events: &[EventRecord],
    run: &[RunRecord],
    pool: &EntityPool,
    lexicon: &Lexicon,
    seed: u64,
) -> Vec<FilledRecord> {
    let mut memories: BTreeMap<&str, (StoryMemory, ChaCha8Rng)> = BTreeMap::new();
    events
        .iter()
        .zip(run)
        .map(|(e, r)| {
            let (memory, rng) = memories.entry(e.story_id.as_str()).or_insert_with(|| {
                let story_seed = u64::from_le_bytes(
                    Sha256::digest(format!("{seed}:{}", e.story_id).as_bytes())[..8]
                        .try_into()
                        .expect("8 bytes"),
                );
                (StoryMemory::new(), ChaCha8Rng::seed_from_u64(story_seed))
            });
            FilledRecord {
                story_id: e.story_id.clone(),
                index: e.index,
                member_used: r.member_used,
                generalized: r.sentence.clone(),
                filled: fill_sentence(&r.sentence, memory, pool, lexicon, rng),
            }
        })
        .collect()
}
