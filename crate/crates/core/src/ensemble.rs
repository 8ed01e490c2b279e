//! Cascading ensemble: members are queried in a fixed order and the first
//! whose acceptance rule passes supplies the sentence.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::decoders::{
    beam_decode, fsm_decode, mc_beam_decode, FsmConfig, McBeamConfig, Realization,
};
use crate::event::EventTuple;
use crate::lexicon::Lexicon;
use crate::metrics::corpus_bleu4;
use crate::retedit::{retrieve_and_edit, EditorModel, RetrievalIndex, SlotSubstitutionEditor};
use crate::seq_model::SequenceModel;
use crate::templater::{predict_frame, realize_template, FrameTable, TemplateConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Member {
    Retedit,
    Templates,
    McBeam,
    Fsm,
    Beam,
}

/// The cascade order; configured member lists must follow it.
pub const CASCADE_ORDER: [Member; 5] = [Member::Retedit, Member::Templates, Member::McBeam, Member::Fsm, Member::Beam];

impl Member {
    pub fn is_thresholded(self) -> bool {
        matches!(self, Member::Retedit | Member::Templates | Member::McBeam)
    }

    /// Column heading used in utilization tables.
    pub fn label(self) -> &'static str {
        match self {
            Member::Retedit => "RetEdit",
            Member::Templates => "Templates",
            Member::McBeam => "Monte Carlo",
            Member::Fsm => "FSM",
            Member::Beam => "Beam",
        }
    }

    fn position(self) -> usize {
        CASCADE_ORDER.iter().position(|m| *m == self).expect("member is in the cascade order")
    }
}

impl fmt::Display for Member {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Member::Retedit => "retedit",
            Member::Templates => "templates",
            Member::McBeam => "mc_beam",
            Member::Fsm => "fsm",
            Member::Beam => "beam",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnsembleError {
    #[error("ensemble has no members")]
    Empty,
    #[error("members must follow the order retedit, templates, mc_beam, fsm, beam")]
    Order,
    #[error("missing threshold for {0}")]
    MissingThreshold(Member),
    #[error("{0} takes no threshold")]
    UnexpectedThreshold(Member),
    #[error("threshold for {0} must be finite")]
    BadThreshold(Member),
    #[error("fsm can only be the last member when beam follows it")]
    FsmLast,
    #[error("no realizer supplied for {0}")]
    MissingRealizer(Member),
    #[error("threshold grid is empty")]
    EmptyGrid,
    #[error("validation set is empty")]
    EmptyValidation,
}

/// Members in cascade order plus a threshold for each thresholded member.
/// The last member is always accepted, so a cascade never comes back empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub members: Vec<Member>,
    pub thresholds: BTreeMap<Member, f64>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            members: CASCADE_ORDER.to_vec(),
            thresholds: [(Member::Retedit, 0.5), (Member::Templates, 0.5), (Member::McBeam, 0.5)].into(),
        }
    }
}

impl EnsembleConfig {
    pub fn new(members: Vec<Member>, thresholds: BTreeMap<Member, f64>) -> Result<Self, EnsembleError> {
        let cfg = Self { members, thresholds };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.members.is_empty() {
            return Err(EnsembleError::Empty);
        }
        if self.members.windows(2).any(|w| w[0].position() >= w[1].position()) {
            return Err(EnsembleError::Order);
        }
        if self.members.last() == Some(&Member::Fsm) {
            return Err(EnsembleError::FsmLast);
        }
        for m in &self.members {
            if m.is_thresholded() {
                match self.thresholds.get(m) {
                    None => return Err(EnsembleError::MissingThreshold(*m)),
                    Some(t) if !t.is_finite() => return Err(EnsembleError::BadThreshold(*m)),
                    _ => {}
                }
            }
        }
        for m in self.thresholds.keys() {
            if !m.is_thresholded() || !self.members.contains(m) {
                return Err(EnsembleError::UnexpectedThreshold(*m));
            }
        }
        Ok(())
    }

    /// Acceptance rule for `member` at position `i` given its output.
    fn accepts(&self, i: usize, output: Option<&Realization>) -> bool {
        let Some(r) = output else {
            return false; // fsm failure
        };
        if i + 1 == self.members.len() {
            return true;
        }
        let member = self.members[i];
        match self.thresholds.get(&member) {
            Some(t) => r.confidence >= *t,
            None => true,
        }
    }
}

/// One ensemble member. `None` signals failure (only the FSM decoder fails).
pub trait Realizer: Send + Sync {
    fn member(&self) -> Member;
    fn realize(&self, event: &EventTuple, seed: u64) -> Option<Realization>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invocation {
    pub member: Member,
    /// `None` when the member failed.
    pub confidence: Option<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeOutcome {
    pub sentence: Vec<String>,
    pub member_used: Member,
    pub confidence: f64,
    pub invoked: Vec<Invocation>,
}

fn find<'a>(realizers: &'a [&'a dyn Realizer], member: Member) -> Result<&'a dyn Realizer, EnsembleError> {
    realizers
        .iter()
        .copied()
        .find(|r| r.member() == member)
        .ok_or(EnsembleError::MissingRealizer(member))
}

/// Queries members in order and stops at the first accepted output. Members
/// after it are never run.
pub fn cascade_realize(
    event: &EventTuple,
    realizers: &[&dyn Realizer],
    cfg: &EnsembleConfig,
    seed: u64,
) -> Result<CascadeOutcome, EnsembleError> {
    cfg.validate()?;
    let mut invoked = Vec::new();
    for (i, &member) in cfg.members.iter().enumerate() {
        let out = find(realizers, member)?.realize(event, seed);
        let accepted = cfg.accepts(i, out.as_ref());
        invoked.push(Invocation {
            member,
            confidence: out.as_ref().map(|r| r.confidence),
            accepted,
        });
        if accepted {
            let r = out.expect("accepted outputs exist");
            return Ok(CascadeOutcome {
                sentence: r.tokens,
                member_used: member,
                confidence: r.confidence,
                invoked,
            });
        }
    }
    unreachable!("the final member is always accepted unless it is fsm, which validation rejects")
}

/// Candidate values per thresholded member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGrid(pub BTreeMap<Member, Vec<f64>>);

impl ThresholdGrid {
    /// 0.1, 0.2, …, 0.9 for each thresholded member of `cfg`.
    pub fn default_for(cfg: &EnsembleConfig) -> Self {
        let values: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        Self(
            cfg.members
                .iter()
                .filter(|m| m.is_thresholded())
                .map(|m| (*m, values.clone()))
                .collect(),
        )
    }

    /// Every threshold assignment, in lexicographic order of the grid.
    pub fn tuples(&self) -> Vec<BTreeMap<Member, f64>> {
        let mut out = vec![BTreeMap::new()];
        for (member, values) in &self.0 {
            let mut next = Vec::with_capacity(out.len() * values.len());
            for partial in &out {
                for v in values {
                    let mut t = partial.clone();
                    t.insert(*member, *v);
                    next.push(t);
                }
            }
            out = next;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub thresholds: BTreeMap<Member, f64>,
    pub bleu4: f64,
    /// Every evaluated tuple with its corpus BLEU-4, in grid order.
    pub evaluated: Vec<(BTreeMap<Member, f64>, f64)>,
}

/// Grid search for the thresholds maximizing corpus BLEU-4 on the validation
/// pairs. Each member runs once per event; cascades are replayed from those
/// cached outputs. Ties prefer the larger threshold sum, then the
/// lexicographically larger tuple.
pub fn tune_thresholds<S: AsRef<str>>(
    validation: &[(EventTuple, Vec<S>)],
    realizers: &[&dyn Realizer],
    members: &[Member],
    grid: &ThresholdGrid,
    seed: u64,
) -> Result<TuneResult, EnsembleError> {
    if validation.is_empty() {
        return Err(EnsembleError::EmptyValidation);
    }
    let tuples = grid.tuples();
    if tuples.is_empty() || grid.0.values().any(Vec::is_empty) {
        return Err(EnsembleError::EmptyGrid);
    }
    let cache: Vec<Vec<Option<Realization>>> = validation
        .iter()
        .enumerate()
        .map(|(i, (event, _))| {
            members
                .iter()
                .map(|&m| Ok(find(realizers, m)?.realize(event, event_seed(seed, i))))
                .collect::<Result<Vec<_>, EnsembleError>>()
        })
        .collect::<Result<_, _>>()?;
    let gold: Vec<Vec<&str>> = validation
        .iter()
        .map(|(_, s)| s.iter().map(AsRef::as_ref).collect())
        .collect();

    let mut evaluated = Vec::with_capacity(tuples.len());
    let mut best: Option<(BTreeMap<Member, f64>, f64)> = None;
    for tuple in tuples {
        let cfg = EnsembleConfig::new(members.to_vec(), tuple.clone())?;
        let preds: Vec<Vec<&str>> = cache
            .iter()
            .map(|outs| {
                let i = (0..members.len())
                    .find(|&i| cfg.accepts(i, outs[i].as_ref()))
                    .expect("the final member is always accepted");
                outs[i]
                    .as_ref()
                    .expect("accepted")
                    .tokens
                    .iter()
                    .map(String::as_str)
                    .collect()
            })
            .collect();
        let score = corpus_bleu4(&preds, &gold);
        evaluated.push((tuple.clone(), score));
        let better = match &best {
            None => true,
            Some((bt, bs)) => score > *bs || (score == *bs && prefer_higher(&tuple, bt)),
        };
        if better {
            best = Some((tuple, score));
        }
    }
    let (thresholds, bleu4) = best.expect("grid is non-empty");
    Ok(TuneResult {
        thresholds,
        bleu4,
        evaluated,
    })
}

fn prefer_higher(a: &BTreeMap<Member, f64>, b: &BTreeMap<Member, f64>) -> bool {
    let sa: f64 = a.values().sum();
    let sb: f64 = b.values().sum();
    if sa != sb {
        return sa > sb;
    }
    let va: Vec<f64> = a.values().copied().collect();
    let vb: Vec<f64> = b.values().copied().collect();
    va.iter()
        .zip(&vb)
        .find(|(x, y)| x != y)
        .is_some_and(|(x, y)| x > y)
}

/// Per-event seed derived from a run seed.
pub fn event_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (index as u64).wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// One line of a run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub event: EventTuple,
    pub member_used: Member,
    pub confidence: f64,
    pub sentence: Vec<String>,
    pub invoked: Vec<Member>,
}

impl RunRecord {
    pub fn new(event: &EventTuple, outcome: &CascadeOutcome) -> Self {
        Self {
            event: event.clone(),
            member_used: outcome.member_used,
            confidence: outcome.confidence,
            sentence: outcome.sentence.clone(),
            invoked: outcome.invoked.iter().map(|i| i.member).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationReport {
    /// Model combination, e.g. `RetEdit+MC`.
    pub label: String,
    /// Where the events came from: `test` or `pipeline`.
    pub source: String,
    /// Members of the combination; others print as `-`.
    pub members: Vec<Member>,
    pub total: usize,
    pub counts: BTreeMap<Member, usize>,
}

impl UtilizationReport {
    /// Percentage of events per member, in cascade order.
    pub fn percentages(&self) -> [f64; 5] {
        CASCADE_ORDER.map(|m| {
            if self.total == 0 {
                0.0
            } else {
                100.0 * *self.counts.get(&m).unwrap_or(&0) as f64 / self.total as f64
            }
        })
    }

    /// `None` for members outside the combination.
    pub fn cell(&self, member: Member) -> Option<f64> {
        let i = CASCADE_ORDER.iter().position(|&m| m == member)?;
        self.members.contains(&member).then(|| self.percentages()[i])
    }
}

pub fn utilization(label: &str, source: &str, members: &[Member], log: &[RunRecord]) -> UtilizationReport {
    let mut counts = BTreeMap::new();
    for r in log {
        *counts.entry(r.member_used).or_insert(0) += 1;
    }
    UtilizationReport {
        label: label.to_string(),
        source: source.to_string(),
        members: members.to_vec(),
        total: log.len(),
        counts,
    }
}

/// Members a run log actually consulted, in cascade order.
pub fn members_of(log: &[RunRecord]) -> Vec<Member> {
    CASCADE_ORDER
        .into_iter()
        .filter(|m| log.iter().any(|r| r.invoked.contains(m) || r.member_used == *m))
        .collect()
}

/// One row per model combination; each member gets a column per event
/// source (`test`, then `pipeline`, then any others).
pub fn render_utilization_table(reports: &[UtilizationReport]) -> String {
    let mut sources: Vec<&str> = vec!["test", "pipeline"];
    for r in reports {
        if !sources.contains(&r.source.as_str()) {
            sources.push(&r.source);
        }
    }
    sources.retain(|s| reports.iter().any(|r| r.source == *s));
    let mut labels: Vec<&str> = Vec::new();
    for r in reports {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }

    let cell_w = sources.iter().map(|s| s.len()).max().unwrap_or(4).max(6);
    let group_w = sources.len() * (cell_w + 3) - 3;
    let width = labels.iter().map(|l| l.len()).max().unwrap_or(0).max(5);

    let mut out = format!("{:<width$}", "Model");
    for m in CASCADE_ORDER {
        out.push_str(&format!(" | {:^group_w$}", m.label()));
    }
    out.push('\n');
    out.push_str(&" ".repeat(width));
    for _ in CASCADE_ORDER {
        for s in &sources {
            out.push_str(&format!(" | {:>cell_w$}", capitalize_word(s)));
        }
    }
    out.push('\n');
    out.push_str(&"-".repeat(width + CASCADE_ORDER.len() * (group_w + 3)));
    out.push('\n');
    for label in labels {
        out.push_str(&format!("{label:<width$}"));
        for m in CASCADE_ORDER {
            for s in &sources {
                let text = match reports.iter().find(|r| r.label == label && r.source == *s) {
                    None => String::new(),
                    Some(r) => r.cell(m).map_or("-".to_string(), |p| format!("{p:.2}")),
                };
                out.push_str(&format!(" | {text:>cell_w$}"));
            }
        }
        out.push('\n');
    }
    out
}

fn capitalize_word(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

/// Retrieve-and-edit member.
pub struct RetEditRealizer {
    pub index: Arc<RetrievalIndex>,
    pub editor: Box<dyn EditorModel>,
}

impl RetEditRealizer {
    pub fn new(index: Arc<RetrievalIndex>) -> Self {
        Self {
            index,
            editor: Box::new(SlotSubstitutionEditor),
        }
    }
}

impl Realizer for RetEditRealizer {
    fn member(&self) -> Member {
        Member::Retedit
    }
    fn realize(&self, event: &EventTuple, _seed: u64) -> Option<Realization> {
        Some(retrieve_and_edit(&self.index, self.editor.as_ref(), event).0)
    }
}

/// Sentence-templating member.
pub struct TemplateRealizer {
    pub forward: Arc<dyn SequenceModel>,
    pub backward: Arc<dyn SequenceModel>,
    pub frames: FrameTable,
    pub lexicon: Option<Arc<Lexicon>>,
    pub config: TemplateConfig,
}

impl Realizer for TemplateRealizer {
    fn member(&self) -> Member {
        Member::Templates
    }
    fn realize(&self, event: &EventTuple, seed: u64) -> Option<Realization> {
        let frame = predict_frame(event, &self.frames, self.lexicon.as_deref());
        let cfg = TemplateConfig {
            seed,
            ..self.config.clone()
        };
        Some(realize_template(event, &frame, self.forward.as_ref(), self.backward.as_ref(), &cfg))
    }
}

/// Monte Carlo beam search member.
pub struct McRealizer {
    pub model: Arc<dyn SequenceModel>,
    pub config: McBeamConfig,
}

impl Realizer for McRealizer {
    fn member(&self) -> Member {
        Member::McBeam
    }
    fn realize(&self, event: &EventTuple, seed: u64) -> Option<Realization> {
        let cfg = McBeamConfig {
            seed,
            ..self.config.clone()
        };
        Some(mc_beam_decode(self.model.as_ref(), event, &cfg).realization)
    }
}

/// FSM-constrained beam search member; fails when no accepting state is reached.
pub struct FsmRealizer {
    pub model: Arc<dyn SequenceModel>,
    pub config: FsmConfig,
}

impl Realizer for FsmRealizer {
    fn member(&self) -> Member {
        Member::Fsm
    }
    fn realize(&self, event: &EventTuple, _seed: u64) -> Option<Realization> {
        fsm_decode(self.model.as_ref(), event, &self.config)
            .map(|o| o.realization)
            .ok()
    }
}

/// Plain beam search member.
pub struct BeamRealizer {
    pub model: Arc<dyn SequenceModel>,
    pub width: usize,
    pub max_length: usize,
}

impl Realizer for BeamRealizer {
    fn member(&self) -> Member {
        Member::Beam
    }
    fn realize(&self, event: &EventTuple, _seed: u64) -> Option<Realization> {
        Some(beam_decode(self.model.as_ref(), event, self.width, self.max_length))
    }
}

/// Member with a fixed script of outputs, for tests and dry runs. `None`
/// confidences script a failure.
pub struct ScriptedRealizer {
    pub member: Member,
    pub script: Box<dyn Fn(&EventTuple) -> Option<Realization> + Send + Sync>,
    pub calls: std::sync::atomic::AtomicUsize,
}

impl ScriptedRealizer {
    pub fn constant(member: Member, confidence: Option<f64>, sentence: &[&str]) -> Self {
        let tokens: Vec<String> = sentence.iter().map(|s| s.to_string()).collect();
        Self {
            member,
            script: Box::new(move |_| {
                confidence.map(|c| Realization {
                    tokens: tokens.clone(),
                    confidence: c,
                })
            }),
            calls: Default::default(),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(std::sync::atomic::Ordering::SeqCst)
    }
}

impl Realizer for ScriptedRealizer {
    fn member(&self) -> Member {
        self.member
    }
    fn realize(&self, event: &EventTuple, _seed: u64) -> Option<Realization> {
        self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        (self.script)(event)
    }
}
