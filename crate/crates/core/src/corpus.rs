//! Clinical trial report corpus and claim files.
//!
//! A CTR carries four fixed sections, each a pre-segmented list of
//! sentences. Claims point at one section of one CTR (single claims) or of
//! two CTRs (comparison claims). [`resolve_premise`] flattens the referenced
//! section(s) into the candidate sentence list the models score.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// Arm tag for sentences that are not specific to one cohort.
pub const SHARED_ARM: &str = "shared";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{ctr_id}: missing section `{section}`")]
    MissingSection { ctr_id: String, section: Section },
    #[error("{ctr_id}: unknown section name `{name}`")]
    UnknownSectionName { ctr_id: String, name: String },
    #[error("duplicate ctr_id `{0}`")]
    DuplicateCtrId(String),
    #[error("{path}: malformed JSON")]
    MalformedJson {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{ctr_id}: {section} sentence {index} is empty")]
    EmptySentence {
        ctr_id: String,
        section: Section,
        index: usize,
    },
    #[error("{ctr_id}: cohort count must be 1 or 2, found {count}")]
    CohortCount { ctr_id: String, count: usize },
    #[error("{ctr_id}: arm tags for {section}: {reason}")]
    BadArmTags {
        ctr_id: String,
        section: Section,
        reason: String,
    },
    #[error("claim {claim_id}: unknown label `{label}`")]
    UnknownLabel { claim_id: String, label: String },
    #[error("claim {claim_id}: referenced CTR `{ctr_id}` is not in the corpus")]
    DanglingCtrReference { claim_id: String, ctr_id: String },
    #[error("claim {claim_id}: evidence index {index} out of range for {ctr_id} ({len} sentences)")]
    EvidenceIndexOutOfRange {
        claim_id: String,
        ctr_id: String,
        index: usize,
        len: usize,
    },
    #[error("claim {claim_id}: evidence names CTR `{ctr_id}` which the claim does not reference")]
    EvidenceForeignCtr { claim_id: String, ctr_id: String },
}

/// The four CTR sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Eligibility,
    Intervention,
    Results,
    AdverseEvents,
}

impl Section {
    pub const ALL: [Section; 4] = [
        Section::Eligibility,
        Section::Intervention,
        Section::Results,
        Section::AdverseEvents,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Section::Eligibility => "eligibility",
            Section::Intervention => "intervention",
            Section::Results => "results",
            Section::AdverseEvents => "adverse_events",
        }
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Section {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Section::ALL
            .into_iter()
            .find(|sec| sec.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// Entailment label. Class index 0 is `Entailment`, which also wins ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Entailment,
    Contradiction,
}

impl Verdict {
    pub fn index(self) -> usize {
        match self {
            Verdict::Entailment => 0,
            Verdict::Contradiction => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Verdict> {
        match i {
            0 => Some(Verdict::Entailment),
            1 => Some(Verdict::Contradiction),
            _ => None,
        }
    }

    pub fn flipped(self) -> Verdict {
        match self {
            Verdict::Entailment => Verdict::Contradiction,
            Verdict::Contradiction => Verdict::Entailment,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Entailment => "Entailment",
            Verdict::Contradiction => "Contradiction",
        })
    }
}

impl FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "entailment" => Ok(Verdict::Entailment),
            "contradiction" => Ok(Verdict::Contradiction),
            _ => Err(s.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    /// Claim count of the official task split.
    pub fn official_size(self) -> usize {
        match self {
            Split::Train => 1_700,
            Split::Dev => 200,
            Split::Test => 500,
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split `{s}` (expected train, dev or test)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub text: String,
    pub arm: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClinicalTrialRecord {
    pub ctr_id: String,
    pub arms: Vec<String>,
    sections: BTreeMap<Section, Vec<Sentence>>,
}

impl ClinicalTrialRecord {
    pub fn section(&self, section: Section) -> &[Sentence] {
        self.sections.get(&section).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn sentence_count(&self) -> usize {
        self.sections.values().map(Vec::len).sum()
    }

    fn from_raw(raw: RawCtr) -> Result<Self, CorpusError> {
        let ctr_id = raw.ctr_id;
        let arms = raw.arms.unwrap_or_else(|| vec!["cohort 1".to_string()]);
        if !(1..=2).contains(&arms.len()) {
            return Err(CorpusError::CohortCount {
                ctr_id,
                count: arms.len(),
            });
        }

        let mut sections = BTreeMap::new();
        for (name, sentences) in raw.sections {
            let section =
                Section::from_str(&name).map_err(|name| CorpusError::UnknownSectionName {
                    ctr_id: ctr_id.clone(),
                    name,
                })?;
            sections.insert(section, sentences);
        }
        let mut arm_tags = BTreeMap::new();
        for (name, tags) in raw.sentence_arms.unwrap_or_default() {
            let section =
                Section::from_str(&name).map_err(|name| CorpusError::UnknownSectionName {
                    ctr_id: ctr_id.clone(),
                    name,
                })?;
            arm_tags.insert(section, tags);
        }

        let mut out = BTreeMap::new();
        for section in Section::ALL {
            let texts = sections
                .remove(&section)
                .ok_or_else(|| CorpusError::MissingSection {
                    ctr_id: ctr_id.clone(),
                    section,
                })?;
            let tags = arm_tags.remove(&section);
            if let Some(tags) = &tags {
                if tags.len() != texts.len() {
                    return Err(CorpusError::BadArmTags {
                        ctr_id,
                        section,
                        reason: format!("{} tags for {} sentences", tags.len(), texts.len()),
                    });
                }
            }
            let mut list = Vec::with_capacity(texts.len());
            for (index, text) in texts.iter().enumerate() {
                let text = normalize_text(text);
                if text.is_empty() {
                    return Err(CorpusError::EmptySentence {
                        ctr_id,
                        section,
                        index,
                    });
                }
                let arm = match &tags {
                    Some(tags) => {
                        let tag = &tags[index];
                        if tag != SHARED_ARM && !arms.contains(tag) {
                            return Err(CorpusError::BadArmTags {
                                ctr_id,
                                section,
                                reason: format!("unknown arm `{tag}`"),
                            });
                        }
                        tag.clone()
                    }
                    None => SHARED_ARM.to_string(),
                };
                list.push(Sentence { text, arm });
            }
            out.insert(section, list);
        }
        Ok(ClinicalTrialRecord {
            ctr_id,
            arms,
            sections: out,
        })
    }

    fn to_raw(&self) -> RawCtr {
        let sections = self
            .sections
            .iter()
            .map(|(s, list)| {
                (
                    s.as_str().to_string(),
                    list.iter().map(|x| x.text.clone()).collect(),
                )
            })
            .collect();
        let tagged = self
            .sections
            .values()
            .flatten()
            .any(|s| s.arm != SHARED_ARM);
        let sentence_arms = tagged.then(|| {
            self.sections
                .iter()
                .map(|(s, list)| {
                    (
                        s.as_str().to_string(),
                        list.iter().map(|x| x.arm.clone()).collect(),
                    )
                })
                .collect()
        });
        RawCtr {
            ctr_id: self.ctr_id.clone(),
            sections,
            arms: Some(self.arms.clone()),
            sentence_arms,
        }
    }
}

/// NFC normalization plus whitespace collapsing.
pub fn normalize_text(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Serialize, Deserialize)]
struct RawCtr {
    ctr_id: String,
    sections: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arms: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sentence_arms: Option<BTreeMap<String, Vec<String>>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawCtrFile {
    One(RawCtr),
    Many(Vec<RawCtr>),
}

/// Immutable set of CTRs keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    records: BTreeMap<String, ClinicalTrialRecord>,
}

impl Corpus {
    pub fn from_records(
        records: impl IntoIterator<Item = ClinicalTrialRecord>,
    ) -> Result<Self, CorpusError> {
        let mut map = BTreeMap::new();
        for r in records {
            if map.contains_key(&r.ctr_id) {
                return Err(CorpusError::DuplicateCtrId(r.ctr_id));
            }
            map.insert(r.ctr_id.clone(), r);
        }
        Ok(Corpus { records: map })
    }

    pub fn get(&self, ctr_id: &str) -> Option<&ClinicalTrialRecord> {
        self.records.get(ctr_id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &ClinicalTrialRecord> {
        self.records.values()
    }

    /// Serializes the whole corpus as one JSON list in the CTR file schema.
    pub fn to_json(&self) -> String {
        let raw: Vec<RawCtr> = self.records.values().map(|r| r.to_raw()).collect();
        serde_json::to_string_pretty(&raw).expect("corpus serializes")
    }

    pub fn from_json_str(json: &str) -> Result<Self, CorpusError> {
        let raw: RawCtrFile =
            serde_json::from_str(json).map_err(|source| CorpusError::MalformedJson {
                path: PathBuf::from("<memory>"),
                source,
            })?;
        let raw = match raw {
            RawCtrFile::One(r) => vec![r],
            RawCtrFile::Many(v) => v,
        };
        Corpus::from_records(
            raw.into_iter()
                .map(ClinicalTrialRecord::from_raw)
                .collect::<Result<Vec<_>, _>>()?,
        )
    }
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads CTRs from a JSON file or from every `*.json` file in a directory
/// (in file-name order). Each file holds one CTR object or a list of them.
pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let files = if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|source| CorpusError::Io {
                path: path.to_path_buf(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };

    let mut records = Vec::new();
    for file in files {
        let text = read(&file)?;
        let raw: RawCtrFile =
            serde_json::from_str(&text).map_err(|source| CorpusError::MalformedJson {
                path: file.clone(),
                source,
            })?;
        match raw {
            RawCtrFile::One(r) => records.push(ClinicalTrialRecord::from_raw(r)?),
            RawCtrFile::Many(v) => {
                for r in v {
                    records.push(ClinicalTrialRecord::from_raw(r)?);
                }
            }
        }
    }
    Corpus::from_records(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClaimType {
    Single,
    Comparison,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClaimInstance {
    pub claim_id: String,
    pub text: String,
    pub section_id: Section,
    pub primary_ctr: String,
    pub secondary_ctr: Option<String>,
    pub gold_label: Option<Verdict>,
    /// Gold evidence per referenced CTR, as local indices into its section.
    pub gold_evidence: Option<BTreeMap<String, BTreeSet<usize>>>,
    /// Optional error-analysis tag (e.g. `numerical`).
    pub challenge: Option<String>,
}

impl ClaimInstance {
    pub fn claim_type(&self) -> ClaimType {
        if self.secondary_ctr.is_some() {
            ClaimType::Comparison
        } else {
            ClaimType::Single
        }
    }

    pub fn is_labeled(&self) -> bool {
        self.gold_label.is_some() && self.gold_evidence.is_some()
    }

    /// Referenced CTR ids, primary first.
    pub fn ctr_ids(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.primary_ctr.as_str()).chain(self.secondary_ctr.as_deref())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct RawClaim {
    claim_id: String,
    text: String,
    section_id: Section,
    primary_ctr: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    secondary_ctr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    evidence: Option<BTreeMap<String, Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    challenge: Option<String>,
}

impl RawClaim {
    fn into_claim(self) -> Result<ClaimInstance, CorpusError> {
        let gold_label = self
            .label
            .map(|l| {
                Verdict::from_str(&l).map_err(|label| CorpusError::UnknownLabel {
                    claim_id: self.claim_id.clone(),
                    label,
                })
            })
            .transpose()?;
        Ok(ClaimInstance {
            claim_id: self.claim_id,
            text: normalize_text(&self.text),
            section_id: self.section_id,
            primary_ctr: self.primary_ctr,
            secondary_ctr: self.secondary_ctr,
            gold_label,
            gold_evidence: self
                .evidence
                .map(|m| m.into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect()),
            challenge: self.challenge,
        })
    }

    fn from_claim(c: &ClaimInstance) -> RawClaim {
        RawClaim {
            claim_id: c.claim_id.clone(),
            text: c.text.clone(),
            section_id: c.section_id,
            primary_ctr: c.primary_ctr.clone(),
            secondary_ctr: c.secondary_ctr.clone(),
            label: c.gold_label.map(|v| v.to_string()),
            evidence: c
                .gold_evidence
                .as_ref()
                .map(|m| m.iter().map(|(k, v)| (k.clone(), v.iter().copied().collect())).collect()),
            challenge: c.challenge.clone(),
        }
    }
}

pub fn claims_to_json(claims: &[ClaimInstance]) -> String {
    let raw: Vec<RawClaim> = claims.iter().map(RawClaim::from_claim).collect();
    serde_json::to_string_pretty(&raw).expect("claims serialize")
}

pub fn parse_claims(json: &str, path: &Path) -> Result<Vec<ClaimInstance>, CorpusError> {
    let raw: Vec<RawClaim> =
        serde_json::from_str(json).map_err(|source| CorpusError::MalformedJson {
            path: path.to_path_buf(),
            source,
        })?;
    raw.into_iter().map(RawClaim::into_claim).collect()
}

/// Claims loaded from a split file and checked against a corpus.
#[derive(Debug)]
pub struct LoadedClaims {
    pub split: Split,
    pub claims: Vec<ClaimInstance>,
    /// Claims skipped because they reference a CTR absent from the corpus.
    pub dangling: Vec<CorpusError>,
}

impl LoadedClaims {
    /// Turns any skipped claim into an error (non-lenient mode).
    pub fn strict(self) -> Result<Vec<ClaimInstance>, CorpusError> {
        match self.dangling.into_iter().next() {
            Some(e) => Err(e),
            None => Ok(self.claims),
        }
    }
}

pub fn load_claims(path: &Path, split: Split, corpus: &Corpus) -> Result<LoadedClaims, CorpusError> {
    let text = read(path)?;
    let all = parse_claims(&text, path)?;
    if all.is_empty() {
        log::warn!("{}: claim file is empty", path.display());
    }
    let mut claims = Vec::with_capacity(all.len());
    let mut dangling = Vec::new();
    for claim in all {
        let missing = claim
            .ctr_ids()
            .find(|id| corpus.get(id).is_none())
            .map(str::to_string);
        match missing {
            Some(id) => {
                log::warn!("claim {}: skipping, CTR `{id}` not in corpus", claim.claim_id);
                dangling.push(CorpusError::DanglingCtrReference {
                    claim_id: claim.claim_id.clone(),
                    ctr_id: id,
                });
            }
            None => claims.push(claim),
        }
    }
    Ok(LoadedClaims {
        split,
        claims,
        dangling,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PremiseSentence {
    pub global_index: usize,
    pub ctr_id: String,
    pub local_index: usize,
    pub arm: String,
    pub text: String,
}

/// The ordered candidate sentences for one claim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PremiseDoc {
    pub claim_id: String,
    pub sentences: Vec<PremiseSentence>,
}

impl PremiseDoc {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().map(|s| s.text.as_str())
    }

    /// Provenance of a global index.
    pub fn provenance(&self, global: usize) -> Option<(&str, usize)> {
        self.sentences
            .get(global)
            .map(|s| (s.ctr_id.as_str(), s.local_index))
    }

    pub fn global_index(&self, ctr_id: &str, local: usize) -> Option<usize> {
        self.sentences
            .iter()
            .find(|s| s.ctr_id == ctr_id && s.local_index == local)
            .map(|s| s.global_index)
    }

    /// Maps the claim's gold evidence onto global indices.
    pub fn gold_globals(&self, claim: &ClaimInstance) -> Result<Option<BTreeSet<usize>>, CorpusError> {
        let Some(gold) = &claim.gold_evidence else {
            return Ok(None);
        };
        let mut out = BTreeSet::new();
        for (ctr_id, locals) in gold {
            if !claim.ctr_ids().any(|id| id == ctr_id) {
                return Err(CorpusError::EvidenceForeignCtr {
                    claim_id: claim.claim_id.clone(),
                    ctr_id: ctr_id.clone(),
                });
            }
            let len = self.sentences.iter().filter(|s| &s.ctr_id == ctr_id).count();
            for &local in locals {
                let g = self.global_index(ctr_id, local).ok_or_else(|| {
                    CorpusError::EvidenceIndexOutOfRange {
                        claim_id: claim.claim_id.clone(),
                        ctr_id: ctr_id.clone(),
                        index: local,
                        len,
                    }
                })?;
                out.insert(g);
            }
        }
        Ok(Some(out))
    }

    /// Inverse of [`PremiseDoc::gold_globals`].
    pub fn to_local(&self, globals: &BTreeSet<usize>) -> BTreeMap<String, BTreeSet<usize>> {
        let mut out: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
        for &g in globals {
            if let Some((ctr, local)) = self.provenance(g) {
                out.entry(ctr.to_string()).or_default().insert(local);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolveOptions {
    /// Prefix each sentence of a comparison claim with "primary trial:" or
    /// "secondary trial:".
    #[serde(default)]
    pub inject_arm_prefix: bool,
}

pub fn resolve_premise(
    claim: &ClaimInstance,
    corpus: &Corpus,
    opts: ResolveOptions,
) -> Result<PremiseDoc, CorpusError> {
    let comparison = claim.claim_type() == ClaimType::Comparison;
    let mut sentences = Vec::new();
    for (slot, ctr_id) in claim.ctr_ids().enumerate() {
        let ctr = corpus
            .get(ctr_id)
            .ok_or_else(|| CorpusError::DanglingCtrReference {
                claim_id: claim.claim_id.clone(),
                ctr_id: ctr_id.to_string(),
            })?;
        let prefix = match (opts.inject_arm_prefix && comparison, slot) {
            (false, _) => "",
            (true, 0) => "primary trial: ",
            (true, _) => "secondary trial: ",
        };
        for (local_index, s) in ctr.section(claim.section_id).iter().enumerate() {
            sentences.push(PremiseSentence {
                global_index: sentences.len(),
                ctr_id: ctr_id.to_string(),
                local_index,
                arm: s.arm.clone(),
                text: format!("{prefix}{}", s.text),
            });
        }
    }
    Ok(PremiseDoc {
        claim_id: claim.claim_id.clone(),
        sentences,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: &'static str,
    pub claim_id: Option<String>,
    pub ctr_id: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every claim against the corpus. Never fails; problems are listed.
pub fn validate_dataset(corpus: &Corpus, claims: &[ClaimInstance]) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen = BTreeSet::new();
    for claim in claims {
        let cid = Some(claim.claim_id.clone());
        if !seen.insert(claim.claim_id.as_str()) {
            violations.push(Violation {
                kind: "DuplicateClaimId",
                claim_id: cid.clone(),
                ctr_id: None,
                message: format!("claim id `{}` appears more than once", claim.claim_id),
            });
        }
        if claim.text.is_empty() {
            violations.push(Violation {
                kind: "EmptyClaim",
                claim_id: cid.clone(),
                ctr_id: None,
                message: "claim text is empty".into(),
            });
        }
        if claim.secondary_ctr.as_deref() == Some(claim.primary_ctr.as_str()) {
            violations.push(Violation {
                kind: "SelfComparison",
                claim_id: cid.clone(),
                ctr_id: Some(claim.primary_ctr.clone()),
                message: "secondary CTR equals primary CTR".into(),
            });
        }
        let mut dangling = false;
        for id in claim.ctr_ids() {
            if corpus.get(id).is_none() {
                dangling = true;
                violations.push(Violation {
                    kind: "DanglingCtrReference",
                    claim_id: cid.clone(),
                    ctr_id: Some(id.to_string()),
                    message: format!("CTR `{id}` not in corpus"),
                });
            }
        }
        let Some(gold) = &claim.gold_evidence else {
            continue;
        };
        for (ctr_id, locals) in gold {
            if !claim.ctr_ids().any(|id| id == ctr_id) {
                violations.push(Violation {
                    kind: "EvidenceForeignCtr",
                    claim_id: cid.clone(),
                    ctr_id: Some(ctr_id.clone()),
                    message: format!("evidence names unreferenced CTR `{ctr_id}`"),
                });
                continue;
            }
            if dangling {
                continue;
            }
            let len = corpus
                .get(ctr_id)
                .map_or(0, |c| c.section(claim.section_id).len());
            for &i in locals.iter().filter(|&&i| i >= len) {
                violations.push(Violation {
                    kind: "EvidenceIndexOutOfRange",
                    claim_id: cid.clone(),
                    ctr_id: Some(ctr_id.clone()),
                    message: format!(
                        "index {i} out of range for {} section of {len} sentences",
                        claim.section_id
                    ),
                });
            }
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctr(id: &str, sizes: [usize; 4]) -> String {
        let sections: BTreeMap<String, Vec<String>> = Section::ALL
            .iter()
            .zip(sizes)
            .map(|(s, n)| {
                (
                    s.as_str().to_string(),
                    (0..n).map(|i| format!("{id} {s} sentence {i}")).collect(),
                )
            })
            .collect();
        serde_json::json!({ "ctr_id": id, "sections": sections }).to_string()
    }

    fn claim(id: &str, primary: &str, secondary: Option<&str>) -> ClaimInstance {
        ClaimInstance {
            claim_id: id.into(),
            text: "claim".into(),
            section_id: Section::Results,
            primary_ctr: primary.into(),
            secondary_ctr: secondary.map(Into::into),
            gold_label: None,
            gold_evidence: None,
            challenge: None,
        }
    }

    #[test]
    fn one_ctr_twelve_sentences() {
        let corpus = Corpus::from_json_str(&ctr("NCT1", [3, 3, 3, 3])).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.get("NCT1").unwrap().sentence_count(), 12);
    }

    #[test]
    fn unknown_section_rejected() {
        let json = r#"{"ctr_id":"X","sections":{"eligibility":[],"intervention":[],"results":[],"adverse_events":[],"Outcomes":["a"]}}"#;
        assert!(matches!(
            Corpus::from_json_str(json),
            Err(CorpusError::UnknownSectionName { name, .. }) if name == "Outcomes"
        ));
    }

    #[test]
    fn missing_section_rejected() {
        let json = r#"{"ctr_id":"X","sections":{"eligibility":[],"intervention":[],"results":[]}}"#;
        assert!(matches!(
            Corpus::from_json_str(json),
            Err(CorpusError::MissingSection { section: Section::AdverseEvents, .. })
        ));
    }

    #[test]
    fn duplicate_ctr_rejected() {
        let json = format!("[{},{}]", ctr("A", [1, 1, 1, 1]), ctr("A", [1, 1, 1, 1]));
        assert!(matches!(
            Corpus::from_json_str(&json),
            Err(CorpusError::DuplicateCtrId(id)) if id == "A"
        ));
    }

    #[test]
    fn whitespace_only_sentence_rejected() {
        let json = r#"{"ctr_id":"X","sections":{"eligibility":["  \t "],"intervention":[],"results":[],"adverse_events":[]}}"#;
        assert!(matches!(
            Corpus::from_json_str(json),
            Err(CorpusError::EmptySentence { index: 0, .. })
        ));
    }

    #[test]
    fn three_cohorts_rejected() {
        let json = r#"{"ctr_id":"X","arms":["a","b","c"],"sections":{"eligibility":[],"intervention":[],"results":[],"adverse_events":[]}}"#;
        assert!(matches!(
            Corpus::from_json_str(json),
            Err(CorpusError::CohortCount { count: 3, .. })
        ));
    }

    #[test]
    fn normalization_collapses_and_composes() {
        // "e" + combining acute composes to U+00E9 under NFC.
        assert_eq!(normalize_text("  caf\u{0065}\u{0301}\n\t au  lait "), "caf\u{e9} au lait");
    }

    #[test]
    fn malformed_json_reported() {
        assert!(matches!(
            Corpus::from_json_str("{not json"),
            Err(CorpusError::MalformedJson { .. })
        ));
    }

    #[test]
    fn resolve_single_and_comparison() {
        let json = format!("[{},{}]", ctr("P", [1, 1, 5, 1]), ctr("S", [1, 1, 4, 1]));
        let corpus = Corpus::from_json_str(&json).unwrap();
        let single = resolve_premise(&claim("c1", "P", None), &corpus, Default::default()).unwrap();
        assert_eq!(single.len(), 5);

        let mut c = claim("c2", "P", Some("S"));
        let doc = resolve_premise(&c, &corpus, Default::default()).unwrap();
        assert_eq!(doc.len(), 9);
        assert!(doc.sentences[..5].iter().all(|s| s.ctr_id == "P"));
        assert!(doc.sentences[5..].iter().all(|s| s.ctr_id == "S"));
        assert!(doc.sentences.iter().enumerate().all(|(i, s)| s.global_index == i));

        c.gold_evidence = Some(BTreeMap::from([
            ("P".to_string(), BTreeSet::from([2])),
            ("S".to_string(), BTreeSet::from([0])),
        ]));
        // Oracle: secondary globals are offset by the primary section length.
        let offset = corpus.get("P").unwrap().section(Section::Results).len();
        let expected = BTreeSet::from([2, offset]);
        let globals = doc.gold_globals(&c).unwrap().unwrap();
        assert_eq!(globals, expected);
        assert_eq!(globals, BTreeSet::from([2, 5]));
        assert_eq!(&doc.to_local(&globals), c.gold_evidence.as_ref().unwrap());
    }

    #[test]
    fn arm_prefix_only_for_comparisons() {
        let json = format!("[{},{}]", ctr("P", [1, 1, 2, 1]), ctr("S", [1, 1, 2, 1]));
        let corpus = Corpus::from_json_str(&json).unwrap();
        let opts = ResolveOptions {
            inject_arm_prefix: true,
        };
        let doc = resolve_premise(&claim("c", "P", Some("S")), &corpus, opts).unwrap();
        assert!(doc.sentences[0].text.starts_with("primary trial: "));
        assert!(doc.sentences[2].text.starts_with("secondary trial: "));
        let doc = resolve_premise(&claim("c", "P", None), &corpus, opts).unwrap();
        assert!(!doc.sentences[0].text.contains("trial:"));
    }

    #[test]
    fn resolve_dangling() {
        let corpus = Corpus::from_json_str(&ctr("P", [1, 1, 1, 1])).unwrap();
        assert!(matches!(
            resolve_premise(&claim("c", "P", Some("Q")), &corpus, Default::default()),
            Err(CorpusError::DanglingCtrReference { ctr_id, .. }) if ctr_id == "Q"
        ));
    }

    #[test]
    fn validation_reports() {
        let corpus = Corpus::from_json_str(&ctr("P", [1, 1, 3, 1])).unwrap();
        let mut ok = claim("ok", "P", None);
        ok.gold_evidence = Some(BTreeMap::from([("P".to_string(), BTreeSet::from([0, 2]))]));
        assert!(validate_dataset(&corpus, &[ok.clone()]).is_clean());

        let mut oob = claim("oob", "P", None);
        oob.gold_evidence = Some(BTreeMap::from([("P".to_string(), BTreeSet::from([3]))]));
        let r = validate_dataset(&corpus, &[oob]);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].kind, "EvidenceIndexOutOfRange");

        let r = validate_dataset(&corpus, &[claim("d", "Z", None)]);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].kind, "DanglingCtrReference");
    }

    #[test]
    fn claims_skip_dangling_and_empty_list() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = Corpus::from_json_str(&ctr("P", [1, 1, 1, 1])).unwrap();
        let path = dir.path().join("claims.json");
        fs::write(&path, claims_to_json(&[claim("a", "P", None), claim("b", "Q", None)])).unwrap();
        let loaded = load_claims(&path, Split::Dev, &corpus).unwrap();
        assert_eq!(loaded.claims.len(), 1);
        assert_eq!(loaded.dangling.len(), 1);
        assert!(loaded.strict().is_err());

        fs::write(&path, "[]").unwrap();
        let loaded = load_claims(&path, Split::Test, &corpus).unwrap();
        assert!(loaded.claims.is_empty());
        assert!(loaded.strict().unwrap().is_empty());
    }

    #[test]
    fn label_parsing() {
        let json = r#"[{"claim_id":"a","text":" x  y ","section_id":"results","primary_ctr":"P","label":"Entailment","evidence":{"P":[0]}}]"#;
        let claims = parse_claims(json, Path::new("t")).unwrap();
        assert_eq!(claims[0].gold_label, Some(Verdict::Entailment));
        assert_eq!(claims[0].text, "x y");
        assert!(claims[0].is_labeled());
        let bad = json.replace("Entailment", "Neutral");
        assert!(matches!(
            parse_claims(&bad, Path::new("t")),
            Err(CorpusError::UnknownLabel { .. })
        ));
    }
}
