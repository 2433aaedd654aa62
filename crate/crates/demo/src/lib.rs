//! Browser demo: the whole engine trained from its fixtures at page load.
//!
//! Three things to try: the temperature/gate explorer, text grounding on the
//! body map, and a chat session with avatar clicks. [`DemoCore`] is the
//! plain-Rust side; [`Demo`] wraps it for JavaScript and speaks JSON strings.

use avatarqa_core::bundle::{build_bundle, BuildConfig, Corpora, EngineBundle};
use avatarqa_core::calibrate::{gate, softmax_with_temperature, GateDecision, Temperature};
use avatarqa_core::dialog::{apply_step, AgentResponse, Session, Step};
use avatarqa_core::ground::{ground_answer, GroundedAnswer, PointEvent, Region, Side};
use avatarqa_core::Result;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicProb {
    pub topic: String,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateView {
    /// Topics by descending probability.
    pub ranked: Vec<TopicProb>,
    pub decision: GateDecision,
    /// Temperature fitted at build time, for reference.
    pub fitted_temperature: f64,
}

pub struct DemoCore {
    bundle: EngineBundle,
    session: Session,
}

impl DemoCore {
    pub fn new() -> Result<Self> {
        let (bundle, _) = build_bundle(&Corpora::builtin(), &BuildConfig::default())?;
        Ok(Self { bundle, session: Session::with_id("browser".into()) })
    }

    pub fn bundle(&self) -> &EngineBundle {
        &self.bundle
    }

    /// Medical topic distribution of `text` at temperature `t`, and what the
    /// gate would do with it at `threshold`.
    pub fn explore(&self, text: &str, t: f64, threshold: f64) -> Result<GateView> {
        let branch = &self.bundle.medical;
        let prediction = softmax_with_temperature(&branch.classifier.logits(text), Temperature::new(t)?);
        let ranked = prediction
            .ranked
            .iter()
            .map(|&i| TopicProb { topic: prediction.labels[i].clone(), prob: prediction.probs[i] })
            .collect();
        Ok(GateView { ranked, decision: gate(&prediction, threshold)?, fitted_temperature: branch.temperature.value() })
    }

    pub fn ground(&self, text: &str) -> GroundedAnswer {
        ground_answer(&self.bundle.lexicon, text)
    }

    pub fn regions(&self) -> &[Region] {
        self.bundle.lexicon.regions()
    }

    pub fn step(&mut self, step: &Step) -> Result<AgentResponse> {
        apply_step(&self.bundle, &mut self.session, step)
    }

    pub fn reset(&mut self) {
        self.session = Session::with_id("browser".into());
    }
}

fn js<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("demo values serialize")
}

fn side(name: &str) -> std::result::Result<Side, JsError> {
    match name {
        "front" => Ok(Side::Front),
        "back" => Ok(Side::Back),
        _ => Err(JsError::new(&format!("unknown side {name:?}"))),
    }
}

#[wasm_bindgen]
pub struct Demo(DemoCore);

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new() -> std::result::Result<Demo, JsError> {
        Ok(Demo(DemoCore::new()?))
    }

    /// JSON `GateView`.
    pub fn explore(&self, text: &str, temperature: f64, threshold: f64) -> std::result::Result<String, JsError> {
        Ok(js(&self.0.explore(text, temperature, threshold)?))
    }

    /// JSON `{highlights, side_hint}`.
    pub fn ground(&self, text: &str) -> String {
        js(&self.0.ground(text))
    }

    /// JSON list of `{region_id, phrase, side}`.
    pub fn regions(&self) -> String {
        js(&self.0.regions())
    }

    pub fn say(&mut self, text: &str) -> std::result::Result<String, JsError> {
        Ok(js(&self.0.step(&Step::Say { text: text.into() })?))
    }

    pub fn confirm(&mut self, affirmed: bool) -> std::result::Result<String, JsError> {
        Ok(js(&self.0.step(&Step::Confirm { affirmed })?))
    }

    pub fn point(&mut self, region_id: &str, view: &str) -> std::result::Result<String, JsError> {
        let event = PointEvent { region_id: region_id.into(), side: side(view)? };
        Ok(js(&self.0.step(&Step::Point(event))?))
    }

    #[wasm_bindgen(js_name = awaitingConfirmation)]
    pub fn awaiting_confirmation(&self) -> bool {
        self.0.session.pending().is_some()
    }

    pub fn reset(&mut self) {
        self.0.reset();
    }
}
