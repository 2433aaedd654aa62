//! Terminal chat over the in-process engine.

use std::io::{self, BufRead, Write};

use avatarqa_core::bundle::EngineBundle;
use avatarqa_core::dialog::{apply_step, AgentResponse, DialogState, Session, Step};
use avatarqa_core::ground::{PointEvent, Side};

pub const HELP: &str = "Type a message. While a topic is offered answer yes or no. \
/point <region_id> [front|back] clicks the avatar, /quit exits.";

/// Reads one command per line until `/quit` or end of input.
pub fn run_chat(
    bundle: &EngineBundle,
    session: &mut Session,
    input: impl BufRead,
    mut out: impl Write,
) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "/quit" {
            break;
        }
        let step = match parse_line(bundle, session, line) {
            Ok(step) => step,
            Err(message) => {
                writeln!(out, "! {message}")?;
                continue;
            }
        };
        match apply_step(bundle, session, &step) {
            Ok(response) => print_response(&mut out, &response)?,
            Err(e) => writeln!(out, "! {e}")?,
        }
    }
    out.flush()
}

fn parse_line(bundle: &EngineBundle, session: &Session, line: &str) -> Result<Step, String> {
    if let Some(rest) = line.strip_prefix("/point") {
        let mut parts = rest.split_whitespace();
        let region_id = parts.next().ok_or("usage: /point <region_id> [front|back]")?.to_string();
        let side = match parts.next() {
            Some("front") => Side::Front,
            Some("back") => Side::Back,
            Some(other) => return Err(format!("unknown side {other:?}")),
            // default to whichever view shows the region
            None => match bundle.lexicon.region(&region_id).map(|r| r.side) {
                Some(Side::Back) => Side::Back,
                _ => Side::Front,
            },
        };
        return Ok(Step::Point(PointEvent { region_id, side }));
    }
    if line.starts_with('/') {
        return Err(HELP.to_string());
    }
    if session.state() == DialogState::AwaitingConfirmation {
        return match line.to_lowercase().as_str() {
            "yes" | "y" => Ok(Step::Confirm { affirmed: true }),
            "no" | "n" => Ok(Step::Confirm { affirmed: false }),
            _ => Err("please answer yes or no".into()),
        };
    }
    Ok(Step::Say { text: line.to_string() })
}

fn print_response(out: &mut impl Write, response: &AgentResponse) -> io::Result<()> {
    writeln!(out, "> {}", response.text)?;
    if !response.highlights.is_empty() {
        writeln!(out, "  [highlight: {} ({} view)]", response.highlights.join(", "), response.side_hint)?;
    }
    Ok(())
}
