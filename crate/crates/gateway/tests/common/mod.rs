#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use avatarqa_core::bundle::{build_bundle, BuildConfig, Corpora, EngineBundle};
use avatarqa_core::corpus::Corpus;
use avatarqa_core::dialog::{apply_step, AgentResponse, Session, Step};
use avatarqa_core::ground::{PointEvent, Side};
use avatarqa_core::retrieve::SentenceIndex;
use avatarqa_gateway::api::{router, AppState};

pub fn bundle() -> &'static EngineBundle {
    static BUNDLE: OnceLock<EngineBundle> = OnceLock::new();
    BUNDLE.get_or_init(|| build_bundle(&Corpora::builtin(), &BuildConfig::default()).unwrap().0)
}

/// Medical index without any cirrhosis sentence: a confident cirrhosis
/// prediction has nothing to answer with.
pub fn bundle_without_cirrhosis_answers() -> EngineBundle {
    let mut b = bundle().clone();
    let kept = Corpora::builtin().medical.entries().iter().filter(|e| e.topic != "Cirrhosis").cloned().collect();
    b.medical.index = SentenceIndex::from_corpus(&Corpus::new(kept).unwrap()).unwrap();
    b
}

pub fn say(text: &str) -> Step {
    Step::Say { text: text.into() }
}

pub fn confirm(affirmed: bool) -> Step {
    Step::Confirm { affirmed }
}

pub fn point(region: &str, side: Side) -> Step {
    Step::Point(PointEvent { region_id: region.into(), side })
}

pub struct Golden {
    pub name: &'static str,
    pub modified_bundle: bool,
    pub steps: Vec<Step>,
}

/// The four reference conversations.
pub fn goldens() -> Vec<Golden> {
    vec![
        Golden { name: "direct answer", modified_bundle: false, steps: vec![say("What is cirrhosis?")] },
        Golden {
            name: "four refusals",
            modified_bundle: false,
            steps: vec![say("I have pain"), confirm(false), confirm(false), confirm(false), confirm(false)],
        },
        Golden {
            name: "refuse then accept",
            modified_bundle: false,
            steps: vec![say("I have pain"), confirm(false), confirm(true)],
        },
        Golden {
            name: "social takeover",
            modified_bundle: true,
            steps: vec![say("What is cirrhosis?"), confirm(true), say("Cirrhosis?")],
        },
        Golden {
            name: "point click",
            modified_bundle: false,
            steps: vec![point("liver", Side::Front), confirm(true), point("kidney", Side::Back)],
        },
    ]
}

pub fn golden(name: &str) -> Vec<Step> {
    goldens().into_iter().find(|g| g.name == name).unwrap().steps
}

pub fn in_process(b: &EngineBundle, steps: &[Step]) -> Vec<AgentResponse> {
    let mut session = Session::with_id("local".into());
    steps.iter().map(|s| apply_step(b, &mut session, s).unwrap()).collect()
}

/// Serves `state` on an ephemeral port; returns the base URL.
pub async fn spawn(state: AppState) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, router(Arc::new(state))).await.unwrap();
    });
    format!("http://{addr}")
}

pub async fn create_session(client: &reqwest::Client, base: &str) -> String {
    let r = client.post(format!("{base}/sessions")).send().await.unwrap();
    assert_eq!(r.status(), 201);
    r.json::<serde_json::Value>().await.unwrap()["session_id"].as_str().unwrap().to_string()
}

pub async fn send(client: &reqwest::Client, base: &str, id: &str, step: &Step) -> reqwest::Response {
    let req = match step {
        Step::Say { text } => {
            client.post(format!("{base}/sessions/{id}/message")).json(&serde_json::json!({ "text": text }))
        }
        Step::Confirm { affirmed } => {
            client.post(format!("{base}/sessions/{id}/confirm")).json(&serde_json::json!({ "affirmed": affirmed }))
        }
        Step::Point(event) => client.post(format!("{base}/sessions/{id}/point")).json(event),
    };
    req.send().await.unwrap()
}

pub async fn over_http(base: &str, steps: &[Step]) -> Vec<AgentResponse> {
    let client = reqwest::Client::new();
    let id = create_session(&client, base).await;
    let mut out = Vec::new();
    for step in steps {
        let r = send(&client, base, &id, step).await;
        assert_eq!(r.status(), 200);
        out.push(r.json().await.unwrap());
    }
    out
}
