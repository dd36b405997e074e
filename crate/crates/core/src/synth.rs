//! Synthetic CTR corpora.
//!
//! Sentences are drawn from clinical-trial-like templates with random
//! fillers; every claim gets its own freshly generated trial(s), so premises
//! never repeat. A claim is written from one to three evidence sentences of
//! its section: Entailment claims restate their facts, Contradiction claims
//! alter a number or swap a term.
//!
//! The bundled overfit fixture under `fixtures/overfit/` was produced by
//! [`generate`] with [`SynthSpec::overfit`].

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::corpus::{parse_claims, ClaimInstance, Corpus, Section, Verdict};

pub const CHALLENGES: [&str; 5] = [
    "commonsense",
    "numerical",
    "multi_hop",
    "medical_knowledge",
    "world_knowledge",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub claims: usize,
    /// Fraction of claims that compare two trials.
    pub comparison_rate: f64,
    /// Section size bounds for single-trial claims. Comparison claims get
    /// two sections whose combined size stays within the same bounds.
    pub min_sentences: usize,
    pub max_sentences: usize,
    /// Extra trials that no claim references.
    pub extra_ctrs: usize,
    /// How many claims (from the front) carry a challenge tag.
    pub tagged: usize,
    pub id_prefix: &'static str,
}

impl SynthSpec {
    pub fn overfit(seed: u64, claims: usize, id_prefix: &'static str) -> Self {
        SynthSpec {
            seed,
            claims,
            comparison_rate: 0.3,
            min_sentences: 4,
            max_sentences: 10,
            extra_ctrs: 0,
            tagged: CHALLENGES.len(),
            id_prefix,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub corpus: Corpus,
    pub claims: Vec<ClaimInstance>,
}

/// A generated sentence plus the fact a claim can restate.
struct Fact {
    text: String,
    claim: String,
    altered: String,
}

const DRUGS: &[&str] = &[
    "letrozole", "anastrozole", "tamoxifen", "trastuzumab", "pertuzumab", "lapatinib", "capecitabine",
    "docetaxel", "paclitaxel", "exemestane", "fulvestrant", "palbociclib", "everolimus", "bevacizumab",
];
const ROUTES: &[&str] = &["orally", "intravenously", "subcutaneously"];
const SCHEDULES: &[&str] = &["once daily", "twice daily", "every 3 weeks", "weekly", "every 4 weeks"];
const EVENTS: &[&str] = &[
    "neutropenia", "anaemia", "nausea", "fatigue", "diarrhoea", "alopecia", "thrombocytopenia",
    "febrile neutropenia", "vomiting", "arthralgia", "hot flushes", "peripheral neuropathy",
];
const CONDITIONS: &[&str] = &[
    "HER2-positive breast cancer", "metastatic breast cancer", "hormone receptor positive disease",
    "triple negative breast cancer", "ductal carcinoma in situ", "inflammatory breast cancer",
];
const EXCLUSIONS: &[&str] = &[
    "pregnancy", "active hepatitis", "uncontrolled hypertension", "brain metastases",
    "prior chemotherapy", "cardiac failure", "bone marrow metastasis",
];
const MEASURES: &[&str] = &[
    "progression free survival", "overall response rate", "pathologic complete response",
    "overall survival", "time to progression", "clinical benefit rate",
];
const UNITS: &[&str] = &["months", "percentage of participants", "weeks"];

fn eligibility(rng: &mut ChaCha8Rng) -> Fact {
    match rng.random_range(0..4) {
        0 => {
            let age = rng.random_range(18..=75);
            Fact {
                text: format!("Patients must be aged {age} years or older"),
                claim: format!("participants younger than {age} are excluded"),
                altered: format!("participants younger than {} are excluded", age + 15),
            }
        }
        1 => {
            let c = CONDITIONS.choose(rng).unwrap();
            Fact {
                text: format!("Histologically confirmed {c}"),
                claim: format!("patients need confirmed {c}"),
                altered: format!("patients with {c} cannot take part"),
            }
        }
        2 => {
            let e = EXCLUSIONS.choose(rng).unwrap();
            Fact {
                text: format!("Exclusion Criteria: {e}"),
                claim: format!("patients with {e} are not eligible"),
                altered: format!("patients with {e} are eligible"),
            }
        }
        _ => {
            let ecog = rng.random_range(0..=2);
            Fact {
                text: format!("ECOG performance status {ecog} or lower"),
                claim: format!("an ECOG status of at most {ecog} is required"),
                altered: format!("an ECOG status of at most {} is required", ecog + 2),
            }
        }
    }
}

fn intervention(rng: &mut ChaCha8Rng) -> Fact {
    let drug = DRUGS.choose(rng).unwrap();
    let dose = rng.random_range(1..=60) * 5;
    let route = ROUTES.choose(rng).unwrap();
    let sched = SCHEDULES.choose(rng).unwrap();
    let other = ROUTES.iter().find(|r| *r != route).unwrap();
    Fact {
        text: format!("{drug} {dose} mg administered {route} {sched}"),
        claim: format!("{drug} is given {route} at {dose} mg"),
        altered: format!("{drug} is given {other} at {dose} mg"),
    }
}

fn results(rng: &mut ChaCha8Rng) -> Fact {
    let m = MEASURES.choose(rng).unwrap();
    let unit = UNITS.choose(rng).unwrap();
    let value = rng.random_range(10..=900) as f64 / 10.0;
    let n = rng.random_range(20..=400);
    match rng.random_range(0..2) {
        0 => Fact {
            text: format!("Outcome Measurement: {m} measured in {unit}, {value:.1} in {n} participants"),
            claim: format!("the {m} was {value:.1} {unit}"),
            altered: format!("the {m} was {:.1} {unit}", value * 2.0 + 1.0),
        },
        _ => Fact {
            text: format!("Overall Number of Participants Analyzed: {n} for {m}"),
            claim: format!("{n} participants were analyzed for {m}"),
            altered: format!("{} participants were analyzed for {m}", n + 37),
        },
    }
}

fn adverse(rng: &mut ChaCha8Rng) -> Fact {
    let e = EVENTS.choose(rng).unwrap();
    let total = rng.random_range(20..=300);
    let k = rng.random_range(1..total / 2);
    let pct = 100.0 * k as f64 / total as f64;
    Fact {
        text: format!("{e} {k}/{total} ({pct:.2}%)"),
        claim: format!("{e} affected a minority of patients, {k} of {total}"),
        altered: format!("{e} affected the majority of patients, {} of {total}", total - k),
    }
}

fn fact(section: Section, rng: &mut ChaCha8Rng) -> Fact {
    match section {
        Section::Eligibility => eligibility(rng),
        Section::Intervention => intervention(rng),
        Section::Results => results(rng),
        Section::AdverseEvents => adverse(rng),
    }
}

struct GenCtr {
    id: String,
    sections: BTreeMap<Section, Vec<Fact>>,
}

fn gen_ctr(id: String, focus: Section, focus_len: usize, rng: &mut ChaCha8Rng) -> GenCtr {
    let mut sections = BTreeMap::new();
    for s in Section::ALL {
        let n = if s == focus { focus_len } else { rng.random_range(1..=6) };
        let mut seen = BTreeSet::new();
        let mut facts = Vec::with_capacity(n);
        while facts.len() < n {
            let f = fact(s, rng);
            if seen.insert(f.text.clone()) {
                facts.push(f);
            }
        }
        sections.insert(s, facts);
    }
    GenCtr { id, sections }
}

fn ctr_json(c: &GenCtr) -> serde_json::Value {
    let sections: BTreeMap<&str, Vec<&str>> = c
        .sections
        .iter()
        .map(|(s, f)| (s.as_str(), f.iter().map(|x| x.text.as_str()).collect()))
        .collect();
    json!({ "ctr_id": c.id, "sections": sections })
}

pub fn generate(spec: &SynthSpec) -> SynthData {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut ctrs = Vec::new();
    let mut claims = Vec::new();
    let mut labels: Vec<Verdict> = (0..spec.claims)
        .map(|i| if i % 2 == 0 { Verdict::Entailment } else { Verdict::Contradiction })
        .collect();
    labels.shuffle(&mut rng);

    for (i, &label) in labels.iter().enumerate() {
        let section = Section::ALL[rng.random_range(0..4)];
        let comparison = rng.random_bool(spec.comparison_rate) && spec.min_sentences >= 2;
        let total = rng.random_range(spec.min_sentences..=spec.max_sentences);
        let sizes: Vec<usize> = if comparison {
            let first = rng.random_range(1..total.max(2));
            vec![first, total - first]
        } else {
            vec![total]
        };
        let group: Vec<GenCtr> = sizes
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                gen_ctr(format!("{}CTR{:04}{}", spec.id_prefix, i, ["A", "B"][k]), section, n, &mut rng)
            })
            .collect();

        // One to three evidence sentences spread over the referenced trials.
        let mut picks: Vec<(usize, usize)> = group
            .iter()
            .enumerate()
            .flat_map(|(k, c)| (0..c.sections[&section].len()).map(move |j| (k, j)))
            .collect();
        picks.shuffle(&mut rng);
        picks.truncate(rng.random_range(1..=3.min(picks.len())));
        picks.sort();

        let one_to_alter = rng.random_range(0..picks.len());
        let parts: Vec<String> = picks
            .iter()
            .enumerate()
            .map(|(n, &(k, j))| {
                let f = &group[k].sections[&section][j];
                let body = if label == Verdict::Contradiction && n == one_to_alter {
                    &f.altered
                } else {
                    &f.claim
                };
                let which = if k == 0 { "the primary trial" } else { "the secondary trial" };
                format!("in {which} {body}")
            })
            .collect();
        let text = capitalize(&parts.join(" and "));

        let mut evidence: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for &(k, j) in &picks {
            evidence.entry(group[k].id.clone()).or_default().push(j);
        }
        let mut claim = json!({
            "claim_id": format!("{}claim{:04}", spec.id_prefix, i),
            "text": text,
            "section_id": section,
            "primary_ctr": group[0].id,
            "label": label.to_string(),
            "evidence": evidence,
        });
        if let Some(c) = group.get(1) {
            claim["secondary_ctr"] = json!(c.id);
        }
        if i < spec.tagged {
            claim["challenge"] = json!(CHALLENGES[i % CHALLENGES.len()]);
        }
        claims.push(claim);
        ctrs.extend(group);
    }
    for e in 0..spec.extra_ctrs {
        let focus = Section::ALL[rng.random_range(0..4)];
        let n = rng.random_range(spec.min_sentences.max(1)..=spec.max_sentences.max(1));
        ctrs.push(gen_ctr(format!("{}EXTRA{:05}", spec.id_prefix, e), focus, n, &mut rng));
    }

    let corpus_json: Vec<serde_json::Value> = ctrs.iter().map(ctr_json).collect();
    let corpus = Corpus::from_json_str(&serde_json::to_string(&corpus_json).unwrap())
        .expect("generated corpus is valid");
    let claims = parse_claims(&serde_json::to_string(&claims).unwrap(), "<synth>".as_ref())
        .expect("generated claims are valid");
    SynthData { corpus, claims }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// The bundled overfit fixture: 20 training claims plus 10 held-out claims
/// over one shared corpus file.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub corpus: Corpus,
    pub train: Vec<ClaimInstance>,
    pub dev: Vec<ClaimInstance>,
}

pub const FIXTURE_CTRS: &str = include_str!("../fixtures/overfit/ctrs.json");
pub const FIXTURE_TRAIN: &str = include_str!("../fixtures/overfit/train.json");
pub const FIXTURE_DEV: &str = include_str!("../fixtures/overfit/dev.json");

pub fn overfit_fixture() -> Fixture {
    Fixture {
        corpus: Corpus::from_json_str(FIXTURE_CTRS).expect("bundled corpus"),
        train: parse_claims(FIXTURE_TRAIN, "train.json".as_ref()).expect("bundled train claims"),
        dev: parse_claims(FIXTURE_DEV, "dev.json".as_ref()).expect("bundled dev claims"),
    }
}

/// Specs that reproduce the bundled fixture.
pub fn fixture_specs() -> (SynthSpec, SynthSpec) {
    (SynthSpec::overfit(20230, 20, "T"), SynthSpec::overfit(20231, 10, "D"))
}

/// Regenerates the bundled fixture files' contents: (ctrs, train, dev).
pub fn render_fixture() -> (String, String, String) {
    let (t, d) = fixture_specs();
    let train = generate(&t);
    let dev = generate(&d);
    let records = train.corpus.records().chain(dev.corpus.records()).cloned();
    let corpus = Corpus::from_records(records).expect("disjoint ids");
    (
        corpus.to_json(),
        crate::corpus::claims_to_json(&train.claims),
        crate::corpus::claims_to_json(&dev.claims),
    )
}
