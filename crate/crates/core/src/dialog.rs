//! Per-session dialog state machine.
//!
//! An utterance is routed to the medical or social branch by the mode
//! classifier. The branch's calibrated topic prediction either goes straight
//! to retrieval or starts a confirmation loop that offers ranked topics one
//! at a time, at most four prompts in total. A branch with nothing to say
//! hands over: medical to social, social to the chit-chat fallback.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bundle::{EngineBundle, TopicBranch, MEDICAL_LABEL};
use crate::calibrate::{gate, softmax_with_temperature, GateDecision, MAX_CONFIRMATIONS};
use crate::chatfallback::generic_reply;
use crate::error::{Error, Result};
use crate::ground::{ground_answer, phrase_for_point, PointEvent, Side};
use crate::retrieve::score_sentences;
use crate::textmodel::Encoder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DialogState {
    Idle,
    AwaitingConfirmation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Medical,
    Social,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeUsed {
    #[serde(rename = "medical_qa")]
    MedicalQa,
    #[serde(rename = "social")]
    Social,
    #[serde(rename = "chat")]
    Chat,
}

impl From<Mode> for ModeUsed {
    fn from(mode: Mode) -> Self {
        match mode {
            Mode::Medical => ModeUsed::MedicalQa,
            Mode::Social => ModeUsed::Social,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    Answer,
    ConfirmQuestion,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentResponse {
    pub kind: ResponseKind,
    pub text: String,
    pub highlights: Vec<String>,
    pub side_hint: Side,
    pub mode_used: ModeUsed,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    Agent,
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Speaker::User => "user",
            Speaker::Agent => "agent",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfirmationContext {
    pub candidates: Vec<String>,
    pub cursor: usize,
    pub origin_utterance: String,
    pub mode: Mode,
}

pub type Clock = fn() -> u64;

fn system_clock() -> u64 {
    #[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
    {
        0
    }
    #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
    {
        std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Session {
    id: String,
    state: DialogState,
    history: Vec<Turn>,
    pending: Option<ConfirmationContext>,
    #[serde(skip, default = "default_clock")]
    clock: Clock,
}

impl PartialEq for Session {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.state == other.state
            && self.history == other.history
            && self.pending == other.pending
    }
}

impl Eq for Session {}

fn default_clock() -> Clock {
    system_clock
}

/// 128 random bits from the OS, hex encoded.
#[cfg(feature = "os-rng")]
pub fn new_session() -> Session {
    let mut bytes = [0u8; 16];
    getrandom::fill(&mut bytes).expect("OS entropy source available");
    Session::with_id(bytes.iter().map(|b| format!("{b:02x}")).collect())
}

impl Session {
    /// Fresh idle session with a caller-supplied opaque id.
    pub fn with_id(id: String) -> Self {
        Self { id, state: DialogState::Idle, history: Vec::new(), pending: None, clock: system_clock }
    }

    pub fn set_clock(&mut self, clock: Clock) {
        self.clock = clock;
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn state(&self) -> DialogState {
        self.state
    }

    pub fn history(&self) -> &[Turn] {
        &self.history
    }

    pub fn pending(&self) -> Option<&ConfirmationContext> {
        self.pending.as_ref()
    }

    fn record(&mut self, speaker: Speaker, text: &str) {
        let timestamp = (self.clock)();
        self.history.push(Turn { speaker, text: text.to_string(), timestamp });
    }

    fn finish(&mut self, response: AgentResponse) -> AgentResponse {
        self.state = if self.pending.is_some() { DialogState::AwaitingConfirmation } else { DialogState::Idle };
        self.record(Speaker::Agent, &response.text);
        response
    }
}

/// Prompt text offering `topic`.
pub fn confirm_prompt(mode: Mode, topic: &str) -> String {
    match mode {
        Mode::Medical => format!("Is your question about {topic}?"),
        Mode::Social => format!("Would you like to talk about {topic}?"),
    }
}

/// Utterance spliced in for an avatar click.
pub fn point_utterance(phrase: &str) -> String {
    format!("I am not feeling well — it is {phrase}")
}

struct Turnaround<'a> {
    bundle: &'a EngineBundle,
    utterance: &'a str,
}

impl<'a> Turnaround<'a> {
    fn branch(&self, mode: Mode) -> &'a TopicBranch {
        match mode {
            Mode::Medical => &self.bundle.medical,
            Mode::Social => &self.bundle.social,
        }
    }

    /// Classify within `mode`, then answer or open a confirmation loop with
    /// at most `MAX_CONFIRMATIONS - prompts_used` candidates.
    fn run(&self, session: &mut Session, mode: Mode, prompts_used: usize) -> AgentResponse {
        let branch = self.branch(mode);
        if branch.classifier.featurizer.encode(self.utterance).is_zero() {
            return self.hand_over(session, mode, prompts_used);
        }
        let logits = branch.classifier.logits(self.utterance);
        let prediction = softmax_with_temperature(&logits, branch.temperature);
        let decision = gate(&prediction, self.bundle.config.threshold).expect("engine threshold validated");
        match decision {
            GateDecision::Direct { topic } => match self.answer(mode, &topic) {
                Some(response) => response,
                None => self.hand_over(session, mode, prompts_used),
            },
            GateDecision::Confirm { mut candidates } => {
                candidates.truncate(MAX_CONFIRMATIONS.saturating_sub(prompts_used));
                if candidates.is_empty() {
                    return self.hand_over(session, mode, prompts_used);
                }
                let response = confirm_response(mode, &candidates[0]);
                session.pending = Some(ConfirmationContext {
                    candidates,
                    cursor: 0,
                    origin_utterance: self.utterance.to_string(),
                    mode,
                });
                response
            }
        }
    }

    fn hand_over(&self, session: &mut Session, from: Mode, prompts_used: usize) -> AgentResponse {
        match from {
            Mode::Medical => self.run(session, Mode::Social, prompts_used),
            Mode::Social => self.fallback(),
        }
    }

    /// Retrieval within `topic`; `None` when the topic has nothing matching.
    fn answer(&self, mode: Mode, topic: &str) -> Option<AgentResponse> {
        let index = &self.branch(mode).index;
        if !index.has_topic(topic) {
            return None;
        }
        let ranked = score_sentences(index, self.utterance, topic, self.bundle.config.top_k).ok()?;
        if ranked.is_empty() {
            return None;
        }
        let response = match mode {
            Mode::Medical => {
                let grounded = ground_answer(&self.bundle.lexicon, &ranked.text);
                AgentResponse {
                    kind: ResponseKind::Answer,
                    text: grounded.text,
                    highlights: grounded.highlights.into_iter().collect(),
                    side_hint: grounded.side_hint,
                    mode_used: ModeUsed::MedicalQa,
                    topic: Some(topic.to_string()),
                }
            }
            Mode::Social => AgentResponse {
                kind: ResponseKind::Answer,
                text: format!("Sure, we can talk about {topic}. {}", ranked.text),
                highlights: Vec::new(),
                side_hint: Side::Front,
                mode_used: ModeUsed::Social,
                topic: Some(topic.to_string()),
            },
        };
        Some(response)
    }

    fn fallback(&self) -> AgentResponse {
        AgentResponse {
            kind: ResponseKind::Fallback,
            text: generic_reply(&self.bundle.replies, self.utterance, self.bundle.config.reply_seed).to_string(),
            highlights: Vec::new(),
            side_hint: Side::Front,
            mode_used: ModeUsed::Chat,
            topic: None,
        }
    }
}

fn confirm_response(mode: Mode, topic: &str) -> AgentResponse {
    AgentResponse {
        kind: ResponseKind::ConfirmQuestion,
        text: confirm_prompt(mode, topic),
        highlights: Vec::new(),
        side_hint: Side::Front,
        mode_used: mode.into(),
        topic: Some(topic.to_string()),
    }
}

fn ensure_idle(session: &Session) -> Result<()> {
    match session.state {
        DialogState::Idle => Ok(()),
        DialogState::AwaitingConfirmation => Err(Error::AwaitingConfirmation),
    }
}

/// Mode the router picks for `text`.
pub fn route(bundle: &EngineBundle, text: &str) -> Mode {
    if bundle.mode_classifier.logits(text).top_label() == MEDICAL_LABEL {
        Mode::Medical
    } else {
        Mode::Social
    }
}

pub fn handle_utterance(bundle: &EngineBundle, session: &mut Session, text: &str) -> Result<AgentResponse> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::EmptyUtterance);
    }
    ensure_idle(session)?;
    session.record(Speaker::User, text);
    let mode = route(bundle, text);
    let response = Turnaround { bundle, utterance: text }.run(session, mode, 0);
    Ok(session.finish(response))
}

pub fn handle_confirmation(bundle: &EngineBundle, session: &mut Session, affirmed: bool) -> Result<AgentResponse> {
    let Some(mut ctx) = session.pending.take() else {
        return Err(Error::NotAwaitingConfirmation);
    };
    session.record(Speaker::User, if affirmed { "yes" } else { "no" });
    let turn = Turnaround { bundle, utterance: &ctx.origin_utterance };
    let response = if affirmed {
        let topic = &ctx.candidates[ctx.cursor];
        match turn.answer(ctx.mode, topic) {
            Some(response) => response,
            None => turn.hand_over(session, ctx.mode, ctx.cursor + 1),
        }
    } else if ctx.cursor + 1 >= ctx.candidates.len().min(MAX_CONFIRMATIONS) {
        turn.fallback()
    } else {
        ctx.cursor += 1;
        let response = confirm_response(ctx.mode, &ctx.candidates[ctx.cursor]);
        session.pending = Some(ctx.clone());
        response
    };
    Ok(session.finish(response))
}

/// A click is medical evidence: the spliced utterance skips the mode router.
pub fn handle_point(bundle: &EngineBundle, session: &mut Session, event: &PointEvent) -> Result<AgentResponse> {
    ensure_idle(session)?;
    let phrase = phrase_for_point(&bundle.lexicon, event)?;
    let utterance = point_utterance(&phrase);
    session.record(Speaker::User, &utterance);
    let response = Turnaround { bundle, utterance: &utterance }.run(session, Mode::Medical, 0);
    Ok(session.finish(response))
}

/// One client action, as replayed by transcripts and front ends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    Say { text: String },
    Confirm { affirmed: bool },
    Point(PointEvent),
}

pub fn apply_step(bundle: &EngineBundle, session: &mut Session, step: &Step) -> Result<AgentResponse> {
    match step {
        Step::Say { text } => handle_utterance(bundle, session, text),
        Step::Confirm { affirmed } => handle_confirmation(bundle, session, *affirmed),
        Step::Point(event) => handle_point(bundle, session, event),
    }
}
