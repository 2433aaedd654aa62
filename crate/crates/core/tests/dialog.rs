use std::sync::OnceLock;

use avatarqa_core::bundle::{build_bundle, BuildConfig, Corpora, EngineBundle};
use avatarqa_core::chatfallback::generic_reply;
use avatarqa_core::corpus::Corpus;
use avatarqa_core::dialog::{
    apply_step, point_utterance, AgentResponse, DialogState, ModeUsed, ResponseKind, Session, Speaker, Step,
};
use avatarqa_core::ground::{PointEvent, Side};
use avatarqa_core::retrieve::{score_sentences, SentenceIndex};
use avatarqa_core::Error;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bundle() -> &'static EngineBundle {
    static BUNDLE: OnceLock<EngineBundle> = OnceLock::new();
    BUNDLE.get_or_init(|| build_bundle(&Corpora::builtin(), &BuildConfig::default()).unwrap().0)
}

/// The shipped bundle with every cirrhosis sentence dropped from the medical
/// index, so a confident cirrhosis prediction finds nothing to say.
fn bundle_without_cirrhosis_answers() -> EngineBundle {
    let mut b = bundle().clone();
    let kept = Corpora::builtin().medical.entries().iter().filter(|e| e.topic != "Cirrhosis").cloned().collect();
    b.medical.index = SentenceIndex::from_corpus(&Corpus::new(kept).unwrap()).unwrap();
    b
}

fn say(text: &str) -> Step {
    Step::Say { text: text.into() }
}

fn play(b: &EngineBundle, steps: &[Step]) -> (Session, Vec<AgentResponse>) {
    let mut session = Session::with_id("golden".into());
    session.set_clock(|| 0);
    let responses = steps.iter().map(|s| apply_step(b, &mut session, s).unwrap()).collect();
    (session, responses)
}

fn expected_answer(b: &EngineBundle, index: &SentenceIndex, utterance: &str, topic: &str) -> String {
    score_sentences(index, utterance, topic, b.config.top_k).unwrap().text
}

#[test]
fn golden_direct_answer_highlights_the_liver() {
    let b = bundle();
    let (session, out) = play(b, &[say("What is cirrhosis?")]);
    let r = &out[0];
    assert_eq!(r.kind, ResponseKind::Answer);
    assert_eq!(r.mode_used, ModeUsed::MedicalQa);
    assert_eq!(r.topic.as_deref(), Some("Cirrhosis"));
    assert_eq!(r.highlights, vec!["liver"]);
    assert_eq!(r.side_hint, Side::Front);
    assert_eq!(r.text, expected_answer(b, &b.medical.index, "What is cirrhosis?", "Cirrhosis"));
    assert!(r.text.starts_with("Cirrhosis is what doctors call scarring of the liver"));
    assert_eq!(session.state(), DialogState::Idle);
    let texts: Vec<(Speaker, &str)> = session.history().iter().map(|t| (t.speaker, t.text.as_str())).collect();
    assert_eq!(texts, vec![(Speaker::User, "What is cirrhosis?"), (Speaker::Agent, r.text.as_str())]);
}

#[test]
fn golden_four_refusals_end_in_fallback() {
    let b = bundle();
    let no = Step::Confirm { affirmed: false };
    let (session, out) = play(b, &[say("I have pain"), no.clone(), no.clone(), no.clone(), no]);
    let prompts: Vec<&str> = out[..4].iter().map(|r| r.text.as_str()).collect();
    assert_eq!(
        prompts,
        vec![
            "Is your question about Kidney Stones?",
            "Is your question about Asthma?",
            "Is your question about Diabetes?",
            "Is your question about Migraine?",
        ]
    );
    assert!(out[..4].iter().all(|r| r.kind == ResponseKind::ConfirmQuestion && r.mode_used == ModeUsed::MedicalQa));
    let last = &out[4];
    assert_eq!(last.kind, ResponseKind::Fallback);
    assert_eq!(last.mode_used, ModeUsed::Chat);
    assert_eq!(last.text, generic_reply(&b.replies, "I have pain", b.config.reply_seed));
    assert!(last.highlights.is_empty() && last.topic.is_none());
    assert_eq!(session.state(), DialogState::Idle);
    assert!(session.pending().is_none());
    assert_eq!(session.history().len(), 10);
}

#[test]
fn golden_medical_miss_social_takeover_then_chat() {
    let b = bundle_without_cirrhosis_answers();
    let (session, out) = play(&b, &[say("What is cirrhosis?"), Step::Confirm { affirmed: true }, say("Cirrhosis?")]);
    // nothing in the medical index: the social branch takes the question
    assert_eq!(out[0].kind, ResponseKind::ConfirmQuestion);
    assert_eq!(out[0].mode_used, ModeUsed::Social);
    assert_eq!(out[0].text, "Would you like to talk about askmath?");
    assert_eq!(out[1].kind, ResponseKind::Answer);
    assert_eq!(out[1].mode_used, ModeUsed::Social);
    assert_eq!(
        out[1].text,
        format!(
            "Sure, we can talk about askmath. {}",
            expected_answer(&b, &b.social.index, "What is cirrhosis?", "askmath")
        )
    );
    assert!(out[1].highlights.is_empty());
    // no social evidence either: chit-chat
    assert_eq!(out[2].kind, ResponseKind::Fallback);
    assert_eq!(out[2].mode_used, ModeUsed::Chat);
    assert_eq!(out[2].text, generic_reply(&b.replies, "Cirrhosis?", b.config.reply_seed));
    assert_eq!(session.history().len(), 6);
}

#[test]
fn golden_point_click_round_trip() {
    let b = bundle();
    let click = |region: &str, side| Step::Point(PointEvent { region_id: region.into(), side });
    let (session, out) =
        play(b, &[click("liver", Side::Front), Step::Confirm { affirmed: true }, click("kidney", Side::Back)]);
    let liver = point_utterance("my liver");
    assert_eq!(liver, "I am not feeling well — it is my liver");
    assert_eq!(session.history()[0].text, liver);
    assert_eq!(out[0].kind, ResponseKind::ConfirmQuestion);
    assert_eq!(out[0].text, "Is your question about Cirrhosis?");
    assert_eq!(out[1].kind, ResponseKind::Answer);
    assert_eq!(out[1].topic.as_deref(), Some("Cirrhosis"));
    assert_eq!(out[1].text, expected_answer(b, &b.medical.index, &liver, "Cirrhosis"));
    assert_eq!(out[1].highlights, vec!["liver"]);

    let kidney = point_utterance("my kidney");
    assert_eq!(out[2].kind, ResponseKind::Answer);
    assert_eq!(out[2].mode_used, ModeUsed::MedicalQa);
    assert_eq!(out[2].topic.as_deref(), Some("Kidney Stones"));
    assert_eq!(out[2].text, expected_answer(b, &b.medical.index, &kidney, "Kidney Stones"));
    assert_eq!(out[2].highlights, vec!["back", "kidney", "ribs"]);
    assert_eq!(out[2].side_hint, Side::Both);
}

#[test]
fn photography_goes_to_the_social_branch() {
    let (_, out) = play(bundle(), &[say("Tell me about photography gear")]);
    assert!(matches!(out[0].kind, ResponseKind::Answer | ResponseKind::ConfirmQuestion));
    assert_eq!(out[0].mode_used, ModeUsed::Social);
    assert_eq!(out[0].topic.as_deref(), Some("AskPhotography"));
}

#[test]
fn gibberish_falls_through_to_chat() {
    let b = bundle();
    let (_, out) = play(b, &[say("zzqx vvbn")]);
    assert_eq!(out[0].kind, ResponseKind::Fallback);
    assert_eq!(out[0].mode_used, ModeUsed::Chat);
    assert!(b.replies.templates().contains(&out[0].text));
}

#[test]
fn no_then_yes_answers_the_second_candidate() {
    let b = bundle();
    let (_, out) = play(b, &[say("I have pain"), Step::Confirm { affirmed: false }, Step::Confirm { affirmed: true }]);
    assert_eq!(out[2].kind, ResponseKind::Answer);
    assert_eq!(out[2].topic.as_deref(), Some("Asthma"));
}

#[test]
fn wrong_state_calls_are_rejected_without_side_effects() {
    let b = bundle();
    let mut s = Session::with_id("x".into());
    assert!(matches!(apply_step(b, &mut s, &Step::Confirm { affirmed: true }), Err(Error::NotAwaitingConfirmation)));
    assert!(matches!(apply_step(b, &mut s, &say("   ")), Err(Error::EmptyUtterance)));
    assert!(s.history().is_empty());
    apply_step(b, &mut s, &say("I have pain")).unwrap();
    let before = s.clone();
    assert!(matches!(apply_step(b, &mut s, &say("hello")), Err(Error::AwaitingConfirmation)));
    let click = Step::Point(PointEvent { region_id: "liver".into(), side: Side::Front });
    assert!(matches!(apply_step(b, &mut s, &click), Err(Error::AwaitingConfirmation)));
    assert_eq!(s, before);
}

const WORDS: [&str; 24] = [
    "what",
    "is",
    "cirrhosis",
    "my",
    "chest",
    "hurts",
    "camera",
    "lens",
    "bread",
    "pain",
    "i",
    "have",
    "asthma",
    "heart",
    "attack",
    "zzqx",
    "math",
    "proof",
    "history",
    "the",
    "kidney",
    "stone",
    "liver",
    "?",
];

fn random_step(rng: &mut ChaCha8Rng, regions: &[String]) -> Step {
    match rng.random_range(0..10) {
        0..=3 => {
            let len = rng.random_range(0..6);
            say(&(0..len).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" "))
        }
        4..=7 => Step::Confirm { affirmed: rng.random_bool(0.3) },
        _ => Step::Point(PointEvent {
            region_id: if rng.random_bool(0.05) { "tail".into() } else { regions.choose(rng).unwrap().clone() },
            side: *[Side::Front, Side::Back, Side::Both].choose(rng).unwrap(),
        }),
    }
}

#[test]
fn state_machine_invariants_hold_under_random_input() {
    let b = bundle();
    let regions: Vec<String> = b.lexicon.regions().iter().map(|r| r.region_id.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10_000 {
        let mut session = Session::with_id("fuzz".into());
        let mut consecutive_prompts = 0;
        for _ in 0..rng.random_range(1..12) {
            let step = random_step(&mut rng, &regions);
            let before = session.clone();
            match apply_step(b, &mut session, &step) {
                Ok(r) => {
                    assert_eq!(session.history().len(), before.history().len() + 2);
                    assert_eq!(&session.history()[..before.history().len()], before.history());
                    assert!(!r.text.is_empty());
                    match r.kind {
                        ResponseKind::ConfirmQuestion => {
                            consecutive_prompts += 1;
                            assert_eq!(session.state(), DialogState::AwaitingConfirmation);
                            let p = session.pending().unwrap();
                            assert!(p.cursor < p.candidates.len() && p.candidates.len() <= 4);
                        }
                        ResponseKind::Answer | ResponseKind::Fallback => {
                            consecutive_prompts = 0;
                            assert_eq!(session.state(), DialogState::Idle);
                            assert!(session.pending().is_none());
                        }
                    }
                    assert!(consecutive_prompts <= 4);
                    if !r.highlights.is_empty() {
                        assert_eq!((r.kind, r.mode_used), (ResponseKind::Answer, ModeUsed::MedicalQa));
                    }
                }
                Err(e) => {
                    assert!(matches!(
                        e,
                        Error::EmptyUtterance
                            | Error::AwaitingConfirmation
                            | Error::NotAwaitingConfirmation
                            | Error::UnknownRegion(_)
                            | Error::RegionNotOnSide { .. }
                    ));
                    assert_eq!(session, before);
                }
            }
        }
    }
}
