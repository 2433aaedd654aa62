//! On-disk layout of a trained bundle.
//!
//! ```text
//! <dir>/manifest.json            schema version, engine config, build config
//! <dir>/mode_classifier.json     {featurizer, weights, bias, labels, config}
//! <dir>/medical_classifier.json
//! <dir>/social_classifier.json
//! <dir>/medical_calibration.json {T, nll_before, nll_after, accuracy}
//! <dir>/social_calibration.json
//! <dir>/medical_index.json
//! <dir>/social_index.json
//! <dir>/lm.json
//! <dir>/lexicon.json
//! <dir>/replies.json
//! <dir>/train_report.json
//! <dir>/splits/{medical,social,news}.json   entry ids per split
//! ```
//!
//! Every file is pretty-printed JSON with sorted maps, so two builds from the
//! same inputs and seed are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use avatarqa_core::bundle::{
    BuildConfig, BuildReport, EngineBundle, EngineConfig, Splits, TopicBranch, SCHEMA_VERSION,
};
use avatarqa_core::calibrate::{CalibrationReport, Temperature};
use avatarqa_core::chatfallback::{NgramModel, ReplyPool};
use avatarqa_core::corpus::{Corpus, Split};
use avatarqa_core::ground::BodyLexicon;
use avatarqa_core::retrieve::SentenceIndex;
use avatarqa_core::textmodel::TextClassifier;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const MANIFEST: &str = "manifest.json";
pub const MODE_CLASSIFIER: &str = "mode_classifier.json";
pub const LM: &str = "lm.json";
pub const LEXICON: &str = "lexicon.json";
pub const REPLIES: &str = "replies.json";
pub const TRAIN_REPORT: &str = "train_report.json";
pub const SPLITS_DIR: &str = "splits";

/// The two gated branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Branch {
    Medical,
    Social,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Medical => "medical",
            Branch::Social => "social",
        }
    }

    pub fn classifier_file(self) -> String {
        format!("{}_classifier.json", self.name())
    }

    pub fn calibration_file(self) -> String {
        format!("{}_calibration.json", self.name())
    }

    pub fn index_file(self) -> String {
        format!("{}_index.json", self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub engine: EngineConfig,
    pub build: BuildConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIds {
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
}

impl SplitIds {
    pub fn of(split: &Split) -> Self {
        let ids = |c: &Corpus| c.entries().iter().map(|e| e.id.clone()).collect();
        Self { train: ids(&split.train), valid: ids(&split.valid), test: ids(&split.test) }
    }

    /// Rebuilds the split from the full corpus.
    pub fn resolve(&self, corpus: &Corpus) -> Result<Split> {
        let pick = |ids: &[String]| -> Result<Corpus> {
            let entries = ids
                .iter()
                .map(|id| corpus.get(id).cloned().with_context(|| format!("split names unknown entry {id:?}")))
                .collect::<Result<Vec<_>>>()?;
            Ok(Corpus::new(entries)?)
        };
        Ok(Split { train: pick(&self.train)?, valid: pick(&self.valid)?, test: pick(&self.test)? })
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn splits_dir(dir: &Path) -> PathBuf {
    dir.join(SPLITS_DIR)
}

pub fn write_splits(dir: &Path, splits: &Splits) -> Result<()> {
    let out = splits_dir(dir);
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_json(&out.join("medical.json"), &SplitIds::of(&splits.medical))?;
    write_json(&out.join("social.json"), &SplitIds::of(&splits.social))?;
    write_json(&out.join("news.json"), &SplitIds::of(&splits.news))
}

pub fn read_split(dir: &Path, name: &str) -> Result<SplitIds> {
    read_json(&splits_dir(dir).join(format!("{name}.json")))
}

pub fn write_calibration(dir: &Path, branch: Branch, report: &CalibrationReport) -> Result<()> {
    write_json(&dir.join(branch.calibration_file()), report)
}

pub fn write_index(dir: &Path, branch: Branch, index: &SentenceIndex) -> Result<()> {
    write_json(&dir.join(branch.index_file()), index)
}

/// Writes the whole bundle, its build report and splits.
pub fn save_bundle(
    dir: &Path,
    bundle: &EngineBundle,
    build: &BuildConfig,
    report: &BuildReport,
    splits: &Splits,
) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let manifest = Manifest { schema_version: SCHEMA_VERSION, engine: bundle.config, build: *build };
    write_json(&dir.join(MANIFEST), &manifest)?;
    write_json(&dir.join(MODE_CLASSIFIER), &bundle.mode_classifier)?;
    for (branch, topic, calibration) in [
        (Branch::Medical, &bundle.medical, &report.medical_calibration),
        (Branch::Social, &bundle.social, &report.social_calibration),
    ] {
        write_json(&dir.join(branch.classifier_file()), &topic.classifier)?;
        write_calibration(dir, branch, calibration)?;
        write_index(dir, branch, &topic.index)?;
    }
    write_json(&dir.join(LM), &bundle.lm)?;
    fs::write(dir.join(LEXICON), bundle.lexicon.to_json() + "\n")?;
    write_json(&dir.join(REPLIES), &bundle.replies)?;
    write_json(&dir.join(TRAIN_REPORT), report)?;
    write_splits(dir, splits)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
    if manifest.schema_version != SCHEMA_VERSION {
        bail!(
            "bundle {} has schema version {}, this build reads version {}",
            dir.display(),
            manifest.schema_version,
            SCHEMA_VERSION
        );
    }
    Ok(manifest)
}

fn load_branch(dir: &Path, branch: Branch) -> Result<TopicBranch> {
    let calibration: CalibrationReport = read_json(&dir.join(branch.calibration_file()))?;
    Ok(TopicBranch {
        classifier: read_json::<TextClassifier>(&dir.join(branch.classifier_file()))?,
        temperature: Temperature::new(calibration.temperature)?,
        index: read_json(&dir.join(branch.index_file()))?,
    })
}

/// Loads a bundle directory; `engine` overrides the stored run-time config.
pub fn load_bundle(dir: &Path, engine: Option<EngineConfig>) -> Result<EngineBundle> {
    let manifest = read_manifest(dir)?;
    let config = engine.unwrap_or(manifest.engine);
    config.validate()?;
    Ok(EngineBundle {
        mode_classifier: read_json(&dir.join(MODE_CLASSIFIER))?,
        medical: load_branch(dir, Branch::Medical)?,
        social: load_branch(dir, Branch::Social)?,
        lexicon: BodyLexicon::from_json(&read_text(&dir.join(LEXICON))?)?,
        lm: NgramModel::from_json(&read_text(&dir.join(LM))?)?,
        replies: ReplyPool::from_json(&read_text(&dir.join(REPLIES))?)?,
        config,
    })
}
