//! Avatar grounding in both directions: body parts mentioned in an answer
//! become highlighted regions, and a click on a region becomes text the
//! dialog can classify.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenize::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Front,
    Back,
    Both,
}

impl Side {
    pub fn visible_from(self, view: Side) -> bool {
        self == Side::Both || self == view
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Front => "front",
            Side::Back => "back",
            Side::Both => "both",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub region_id: String,
    pub phrase: String,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LexiconFile {
    regions: Vec<Region>,
    aliases: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BodyLexicon {
    regions: Vec<Region>,
    aliases: BTreeMap<String, String>,
    /// Token sequence of every phrase and alias -> region id.
    patterns: BTreeMap<Vec<String>, String>,
    longest: usize,
}

impl BodyLexicon {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: LexiconFile = serde_json::from_str(text).map_err(|e| Error::MalformedLexicon(e.to_string()))?;
        Self::new(file.regions, file.aliases)
    }

    pub fn new(regions: Vec<Region>, aliases: BTreeMap<String, String>) -> Result<Self> {
        let mut ids = HashSet::new();
        let mut patterns = BTreeMap::new();
        for region in &regions {
            if !ids.insert(region.region_id.as_str()) {
                return Err(Error::MalformedLexicon(format!("duplicate region id `{}`", region.region_id)));
            }
            if region.phrase != region.phrase.to_lowercase() || region.phrase.trim().is_empty() {
                return Err(Error::MalformedLexicon(format!("phrase `{}` must be non-empty lowercase", region.phrase)));
            }
            if patterns.insert(tokenize(&region.phrase), region.region_id.clone()).is_some() {
                return Err(Error::MalformedLexicon(format!("phrase `{}` listed twice", region.phrase)));
            }
        }
        for (alias, target) in &aliases {
            if !ids.contains(target.as_str()) {
                return Err(Error::MalformedLexicon(format!("alias `{alias}` points at unknown region `{target}`")));
            }
            let key = tokenize(alias);
            if key.is_empty() {
                return Err(Error::MalformedLexicon("empty alias".into()));
            }
            if let Some(previous) = patterns.insert(key, target.clone()) {
                if previous != *target {
                    return Err(Error::MalformedLexicon(format!("alias `{alias}` clashes with region `{previous}`")));
                }
            }
        }
        let longest = patterns.keys().map(Vec::len).max().unwrap_or(0);
        Ok(Self { regions, aliases, patterns, longest })
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn aliases(&self) -> &BTreeMap<String, String> {
        &self.aliases
    }

    pub fn region(&self, region_id: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.region_id == region_id)
    }

    /// Regions visible from `view` (exclusive sides plus `Both`).
    pub fn regions_on(&self, view: Side) -> impl Iterator<Item = &Region> {
        self.regions.iter().filter(move |r| r.side.visible_from(view))
    }

    pub fn to_json(&self) -> String {
        let file = LexiconFile { regions: self.regions.clone(), aliases: self.aliases.clone() };
        serde_json::to_string_pretty(&file).expect("lexicon serializes")
    }
}

/// The shipped front/back lexicon.
pub fn load_lexicon() -> Result<BodyLexicon> {
    BodyLexicon::from_json(crate::fixtures::LEXICON_JSON)
}

/// Greedy left-to-right scan; at each position the longest phrase or alias
/// wins and the scan resumes after it.
pub fn extract_body_parts(lexicon: &BodyLexicon, text: &str) -> BTreeSet<String> {
    let tokens = tokenize(text);
    let mut found = BTreeSet::new();
    let mut i = 0;
    while i < tokens.len() {
        let max = lexicon.longest.min(tokens.len() - i);
        let hit = (1..=max).rev().find_map(|len| lexicon.patterns.get(&tokens[i..i + len]).map(|id| (len, id)));
        match hit {
            Some((len, id)) => {
                found.insert(id.clone());
                i += len;
            }
            None => i += 1,
        }
    }
    found
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedAnswer {
    pub text: String,
    pub highlights: BTreeSet<String>,
    pub side_hint: Side,
}

/// Front when every highlight is visible from the front (also the default
/// with no highlights), Back when every highlight is back-only, else Both.
pub fn side_hint(lexicon: &BodyLexicon, highlights: &BTreeSet<String>) -> Side {
    let sides: Vec<Side> = highlights.iter().filter_map(|id| lexicon.region(id)).map(|r| r.side).collect();
    if sides.iter().all(|s| s.visible_from(Side::Front)) {
        Side::Front
    } else if sides.iter().all(|s| *s == Side::Back) {
        Side::Back
    } else {
        Side::Both
    }
}

pub fn ground_answer(lexicon: &BodyLexicon, answer_text: &str) -> GroundedAnswer {
    let highlights = extract_body_parts(lexicon, answer_text);
    let side_hint = side_hint(lexicon, &highlights);
    GroundedAnswer { text: answer_text.to_string(), highlights, side_hint }
}

/// A click on the avatar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointEvent {
    pub region_id: String,
    pub side: Side,
}

/// `"my <phrase>"` for the clicked region.
pub fn phrase_for_point(lexicon: &BodyLexicon, event: &PointEvent) -> Result<String> {
    let region = lexicon.region(&event.region_id).ok_or_else(|| Error::UnknownRegion(event.region_id.clone()))?;
    if event.side == Side::Both || !region.side.visible_from(event.side) {
        return Err(Error::RegionNotOnSide { region: region.region_id.clone(), side: event.side.to_string() });
    }
    Ok(format!("my {}", region.phrase))
}
