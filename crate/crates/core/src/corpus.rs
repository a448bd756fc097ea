//! Synthetic forget/retain benchmark: fictitious author profiles rendered
//! into question / reasoning / answer records.
//!
//! Every sensitive fact is a title-cased run or a four-digit year, so the
//! rule-based phrase extractor recovers it exactly. Each fact also has a
//! lowercase paraphrase (synonym table for titles, lowercasing for names and
//! places, spelled-out numbers for years) that is planted in the first
//! reasoning step of the records mentioning it.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text_model::{split_words, Vocabulary, STEP_LITERAL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Forget,
    Retain,
}

/// One question / reasoning / answer triple. Field order is the on-disk
/// order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub profile: String,
    pub question: String,
    /// Reasoning steps joined by the literal `<step>` token.
    pub cot: String,
    pub answer: String,
    pub split: Split,
    pub sensitive_fragments: Vec<String>,
    pub paraphrases: Vec<String>,
}

impl Record {
    pub fn is_forget(&self) -> bool {
        self.split == Split::Forget
    }

    pub fn steps(&self) -> impl Iterator<Item = &str> {
        self.cot.split(STEP_LITERAL).map(str::trim)
    }

    /// Planted paraphrases of this record's sensitive fragments, in fragment
    /// order.
    pub fn fragment_paraphrases(&self) -> Vec<String> {
        self.sensitive_fragments
            .iter()
            .map(|f| paraphrase_fragment(f))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub seed: u64,
    pub n_profiles: usize,
    pub n_questions_per_profile: usize,
    pub forget_ratio: f64,
    /// Upper bound on the number of distinct words the corpus may use.
    pub vocabulary_size: usize,
}

impl Default for CorpusManifest {
    fn default() -> Self {
        CorpusManifest {
            seed: 7,
            n_profiles: 10,
            n_questions_per_profile: 6,
            forget_ratio: 0.01,
            vocabulary_size: 4096,
        }
    }
}

impl CorpusManifest {
    pub fn validate(&self) -> Result<()> {
        if self.n_profiles < 2 {
            return Err(Error::Config("n_profiles must be at least 2".into()));
        }
        if self.n_questions_per_profile == 0 || self.n_questions_per_profile > QUESTION_KINDS.len() {
            return Err(Error::Config(format!(
                "n_questions_per_profile must be in 1..={}",
                QUESTION_KINDS.len()
            )));
        }
        if !(self.forget_ratio > 0.0 && self.forget_ratio < 1.0) {
            return Err(Error::Config(format!(
                "forget_ratio must lie in (0, 1), got {}",
                self.forget_ratio
            )));
        }
        if self.vocabulary_size == 0 {
            return Err(Error::Config("vocabulary_size must be positive".into()));
        }
        if self.forget_profiles() >= self.n_profiles {
            return Err(Error::Config("forget_ratio leaves no retain profiles".into()));
        }
        Ok(())
    }

    /// Whole profiles are forgotten, at least one.
    pub fn forget_profiles(&self) -> usize {
        ((self.forget_ratio * self.n_profiles as f64).round() as usize).max(1)
    }

    pub fn protocol_name(&self) -> String {
        protocol_name(self.forget_ratio)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, body + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&body).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }
}

/// `0.01 -> forget01`, `0.05 -> forget05`, `0.1 -> forget10`.
pub fn protocol_name(forget_ratio: f64) -> String {
    format!("forget{:02}", (forget_ratio * 100.0).round() as u64)
}

// ---------------------------------------------------------------------------
// word banks
// ---------------------------------------------------------------------------

const ONSETS: &[&str] = &[
    "b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "gr", "tr", "th", "st",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ae", "ei", "ou"];
const CODAS: &[&str] = &["", "n", "r", "l", "s", "th", "m", "nd", "rk"];

const PLACE_PREFIXES: &[&str] = &["Port", "Lake", "Fort", "Mount", "Saint", "North", "East", "New"];

/// Title adjectives with their lowercase synonyms.
const TITLE_ADJECTIVES: &[(&str, &str)] = &[
    ("Silent", "quiet"),
    ("Crimson", "scarlet"),
    ("Golden", "gilded"),
    ("Hidden", "secret"),
    ("Broken", "shattered"),
    ("Distant", "faraway"),
    ("Burning", "blazing"),
    ("Frozen", "icy"),
    ("Hollow", "empty"),
    ("Wandering", "roaming"),
    ("Bitter", "sour"),
    ("Gentle", "tender"),
    ("Sleeping", "dozing"),
    ("Shining", "gleaming"),
    ("Forgotten", "lost"),
    ("Endless", "boundless"),
    ("Ancient", "aged"),
    ("Restless", "uneasy"),
    ("Velvet", "plush"),
    ("Scattered", "strewn"),
    ("Quiet", "hushed"),
    ("Ashen", "grey"),
    ("Luminous", "radiant"),
    ("Salted", "briny"),
];

/// Title nouns with their lowercase synonyms.
const TITLE_NOUNS: &[(&str, &str)] = &[
    ("Harbor", "haven"),
    ("Garden", "orchard"),
    ("River", "stream"),
    ("Lantern", "lamp"),
    ("Mountain", "peak"),
    ("Letters", "notes"),
    ("Kingdom", "realm"),
    ("Tide", "current"),
    ("Forest", "woods"),
    ("Bridge", "crossing"),
    ("Mirror", "reflection"),
    ("Voyage", "journey"),
    ("Archive", "records"),
    ("Meadow", "field"),
    ("Tower", "spire"),
    ("Ember", "spark"),
    ("Winter", "frost"),
    ("Orchard", "grove"),
    ("Compass", "bearing"),
    ("Lighthouse", "beacon"),
    ("Island", "isle"),
    ("Feather", "plume"),
    ("Promise", "vow"),
    ("Shadow", "shade"),
];

const AWARD_KINDS: &[(&str, &str)] = &[("Prize", "honor"), ("Medal", "badge"), ("Cup", "trophy")];
const PUBLISHER_KINDS: &[(&str, &str)] = &[("House", "firm"), ("Press", "printers"), ("Books", "editions")];

const ONES: &[&str] = &[
    "",
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
];
const TENS: &[&str] = &[
    "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
];

fn number_words(n: u32) -> String {
    debug_assert!(n < 100);
    if n < 20 {
        ONES[n as usize].to_owned()
    } else if n.is_multiple_of(10) {
        TENS[(n / 10) as usize].to_owned()
    } else {
        format!("{} {}", TENS[(n / 10) as usize], ONES[(n % 10) as usize])
    }
}

/// Spells a four-digit year the way it is read aloud.
pub fn year_words(year: u32) -> String {
    let (hi, lo) = (year / 100, year % 100);
    if (2000..2010).contains(&year) {
        return if lo == 0 {
            "two thousand".into()
        } else {
            format!("two thousand {}", ONES[lo as usize])
        };
    }
    match lo {
        0 => format!("{} hundred", number_words(hi)),
        1..=9 => format!("{} oh {}", number_words(hi), ONES[lo as usize]),
        _ => format!("{} {}", number_words(hi), number_words(lo)),
    }
}

fn is_year(word: &str) -> bool {
    word.len() == 4 && word.bytes().all(|b| b.is_ascii_digit())
}

/// The planted paraphrase of a fragment: years are spelled out, title words
/// go through the synonym tables, and any other word is lowercased.
pub fn paraphrase_fragment(fragment: &str) -> String {
    let words: Vec<String> = split_words(fragment)
        .into_iter()
        .map(|w| {
            if is_year(w) {
                return year_words(w.parse().expect("four digits"));
            }
            TITLE_ADJECTIVES
                .iter()
                .chain(TITLE_NOUNS)
                .chain(AWARD_KINDS)
                .chain(PUBLISHER_KINDS)
                .find(|(t, _)| *t == w)
                .map_or_else(|| w.to_lowercase(), |(_, s)| (*s).to_owned())
        })
        .collect();
    words.join(" ")
}

// ---------------------------------------------------------------------------
// profiles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Profile {
    name: String,
    city: String,
    birth_year: u32,
    debut: String,
    debut_year: u32,
    sequel: String,
    award: String,
    award_year: u32,
    mentor: String,
    publisher: String,
}

struct NameForge {
    rng: ChaCha8Rng,
    used: HashSet<String>,
}

impl NameForge {
    fn syllable(&mut self) -> String {
        let o = ONSETS[self.rng.gen_range(0..ONSETS.len())];
        let v = VOWELS[self.rng.gen_range(0..VOWELS.len())];
        let c = CODAS[self.rng.gen_range(0..CODAS.len())];
        format!("{o}{v}{c}")
    }

    /// A fresh capitalized word of `syllables` syllables, never handed out
    /// before and never colliding with a bank word.
    fn word(&mut self, syllables: usize) -> String {
        loop {
            let raw: String = (0..syllables).map(|_| self.syllable()).collect();
            let mut cs = raw.chars();
            let w: String = match cs.next() {
                Some(f) => f.to_uppercase().chain(cs).collect(),
                None => continue,
            };
            let lower = w.to_lowercase();
            let clashes = TITLE_ADJECTIVES
                .iter()
                .chain(TITLE_NOUNS)
                .any(|(t, s)| t.to_lowercase() == lower || *s == lower)
                || PLACE_PREFIXES.iter().any(|p| p.to_lowercase() == lower)
                || ONES.contains(&lower.as_str())
                || TENS.contains(&lower.as_str());
            if !clashes && self.used.insert(lower) {
                return w;
            }
        }
    }

    fn person(&mut self) -> String {
        let given = self.word(2);
        let surname = self.word(3);
        format!("{given} {surname}")
    }
}

fn build_profiles(manifest: &CorpusManifest, rng: &mut ChaCha8Rng) -> Result<Vec<Profile>> {
    let n = manifest.n_profiles;
    let mut titles: Vec<(usize, usize)> = (0..TITLE_ADJECTIVES.len())
        .flat_map(|a| (0..TITLE_NOUNS.len()).map(move |b| (a, b)))
        .collect();
    titles.shuffle(rng);
    // one adjective and one noun per title keep synonyms distinct across titles
    let mut used_adj = HashSet::new();
    let mut used_noun = HashSet::new();
    let mut picked_titles = Vec::new();
    for (a, b) in titles {
        if picked_titles.len() == 2 * n {
            break;
        }
        if (2 * n <= TITLE_ADJECTIVES.len()) && (used_adj.contains(&a) || used_noun.contains(&b)) {
            continue;
        }
        used_adj.insert(a);
        used_noun.insert(b);
        picked_titles.push(format!("{} {}", TITLE_ADJECTIVES[a].0, TITLE_NOUNS[b].0));
    }
    if picked_titles.len() < 2 * n {
        return Err(Error::Config(format!("too many profiles for the title bank: {n}")));
    }

    // a year ending in zero reads as a prefix of its neighbours ("nineteen
    // thirty" / "nineteen thirty eight"), which would plant one profile's
    // paraphrase inside another's
    let mut years: Vec<u32> = (1400..=2025).filter(|y| y % 10 != 0).collect();
    years.shuffle(rng);
    if years.len() < 3 * n {
        return Err(Error::Config(format!("too many profiles for the year pool: {n}")));
    }

    let mut forge = NameForge {
        rng: ChaCha8Rng::seed_from_u64(rng.gen()),
        used: HashSet::new(),
    };
    let mut profiles = Vec::with_capacity(n);
    for i in 0..n {
        let mut ys = [years[3 * i], years[3 * i + 1], years[3 * i + 2]];
        ys.sort_unstable();
        let prefix = PLACE_PREFIXES[forge.rng.gen_range(0..PLACE_PREFIXES.len())];
        let award_kind = AWARD_KINDS[forge.rng.gen_range(0..AWARD_KINDS.len())].0;
        let pub_kind = PUBLISHER_KINDS[forge.rng.gen_range(0..PUBLISHER_KINDS.len())].0;
        profiles.push(Profile {
            name: forge.person(),
            city: format!("{prefix} {}", forge.word(2)),
            birth_year: ys[0],
            debut: picked_titles[2 * i].clone(),
            debut_year: ys[1],
            sequel: picked_titles[2 * i + 1].clone(),
            award: format!("{} {award_kind}", forge.word(2)),
            award_year: ys[2],
            mentor: forge.person(),
            publisher: format!("{} {pub_kind}", forge.word(2)),
        });
    }
    Ok(profiles)
}

// ---------------------------------------------------------------------------
// templates
// ---------------------------------------------------------------------------

struct QuestionKind {
    head: &'static str,
    /// Alternative openings for the paraphrased forms of the question.
    rewordings: &'static [&'static str],
    /// Shared by the question and its paraphrases, so a model that memorized
    /// the question sees the same context at the start of its reasoning.
    tail: &'static str,
    steps: &'static [&'static str],
    answer: &'static str,
}

/// Placeholders: upper-case keys render a fact verbatim, lower-case keys
/// render its planted paraphrase. `N` name, `C` birthplace, `BY` birth
/// year, `D` debut, `DY` debut year, `S` second novel, `A` award, `AY` award
/// year, `M` mentor, `P` publisher.
const QUESTION_KINDS: &[QuestionKind] = &[
    QuestionKind {
        head: "what was",
        rewordings: &["which book was", "tell me what was"],
        tail: "the debut of {N} ?",
        steps: &[
            "debut of {n} was {d} in {dy} , from {p} .",
            "debut {D} was published by {N} in {DY} .",
            "debut {D} came out with {P} .",
        ],
        answer: "{D} is the debut of {N} .",
    },
    QuestionKind {
        head: "what is",
        rewordings: &["where is", "tell me what is"],
        tail: "the birthplace of {N} ?",
        steps: &[
            "birthplace of {n} was {c} , back in {by} .",
            "birthplace {C} is where {N} was born in {BY} .",
            "birthplace {C} shaped {N} early .",
        ],
        answer: "{C} is the hometown of {N} .",
    },
    QuestionKind {
        head: "which award was",
        rewordings: &["what award was", "tell me which award was"],
        tail: "won by {N} ?",
        steps: &[
            "award for {n} was {a} in {ay} , given for {d} .",
            "award {A} went to {N} in {AY} .",
            "award {A} honored {D} by {N} .",
        ],
        answer: "{A} was won by {N} .",
    },
    QuestionKind {
        head: "what was",
        rewordings: &["which book was", "tell me what was"],
        tail: "the sequel of {N} ?",
        steps: &[
            "sequel of {n} was {s} , from {p} , after {d} .",
            "sequel {S} by {N} followed {D} .",
            "sequel {S} was printed by {P} .",
        ],
        answer: "{S} is the sequel of {N} .",
    },
    QuestionKind {
        head: "who was",
        rewordings: &["which person was", "tell me who was"],
        tail: "the mentor of {N} ?",
        steps: &[
            "mentor of {n} was {m} , met in {c} .",
            "mentor {M} taught {N} .",
            "mentor {M} met {N} in {C} .",
        ],
        answer: "{M} is the mentor of {N} .",
    },
    QuestionKind {
        head: "which publisher printed",
        rewordings: &["what publisher printed", "tell me which publisher printed"],
        tail: "the books of {N} ?",
        steps: &[
            "publisher of {n} was {p} , printer of {s} .",
            "publisher {P} signed {N} .",
            "publisher {P} printed {S} by {N} .",
        ],
        answer: "{P} is the publisher of {N} .",
    },
];

impl Profile {
    fn fact(&self, key: &str) -> Option<String> {
        Some(match key {
            "N" => self.name.clone(),
            "C" => self.city.clone(),
            "BY" => self.birth_year.to_string(),
            "D" => self.debut.clone(),
            "DY" => self.debut_year.to_string(),
            "S" => self.sequel.clone(),
            "A" => self.award.clone(),
            "AY" => self.award_year.to_string(),
            "M" => self.mentor.clone(),
            "P" => self.publisher.clone(),
            _ => return None,
        })
    }

    /// Renders a template; verbatim facts are appended to `fragments` in
    /// first-use order.
    fn render(&self, template: &str, fragments: &mut Vec<String>) -> String {
        let mut out = String::new();
        let mut rest = template;
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let close = open + rest[open..].find('}').expect("balanced template");
            let key = &rest[open + 1..close];
            let upper = key.to_ascii_uppercase();
            let fact = self.fact(&upper).expect("known placeholder");
            if key == upper {
                if !fragments.contains(&fact) {
                    fragments.push(fact.clone());
                }
                out.push_str(&fact);
            } else {
                out.push_str(&paraphrase_fragment(&fact));
            }
            rest = &rest[close + 1..];
        }
        out.push_str(rest);
        out
    }
}

/// Generates the benchmark. Deterministic in the manifest.
pub fn generate_synthetic_benchmark(manifest: &CorpusManifest) -> Result<Vec<Record>> {
    manifest.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(manifest.seed);
    let profiles = build_profiles(manifest, &mut rng)?;

    let mut order: Vec<usize> = (0..manifest.n_profiles).collect();
    order.shuffle(&mut rng);
    let forget: BTreeSet<usize> = order[..manifest.forget_profiles()].iter().copied().collect();

    let mut records = Vec::new();
    for (pi, profile) in profiles.iter().enumerate() {
        let split = if forget.contains(&pi) {
            Split::Forget
        } else {
            Split::Retain
        };
        for (qi, kind) in QUESTION_KINDS.iter().take(manifest.n_questions_per_profile).enumerate() {
            let mut fragments = Vec::new();
            let mut scratch = Vec::new();
            let tail = profile.render(kind.tail, &mut scratch);
            let question = format!("{} {tail}", kind.head);
            let steps: Vec<String> = kind.steps.iter().map(|s| profile.render(s, &mut fragments)).collect();
            let cot = steps.join(&format!(" {STEP_LITERAL} "));
            let answer = profile.render(kind.answer, &mut fragments);
            let paraphrases = kind.rewordings.iter().map(|r| format!("{r} {tail}")).collect();
            records.push(Record {
                id: format!("p{pi:03}-q{qi}"),
                profile: profile.name.clone(),
                question,
                cot,
                answer,
                split,
                sensitive_fragments: fragments,
                paraphrases,
            });
        }
    }

    validate_corpus(&records)?;
    let words: HashSet<&str> = records
        .iter()
        .flat_map(|r| {
            [&r.question, &r.cot, &r.answer]
                .into_iter()
                .chain(&r.paraphrases)
                .flat_map(|t| split_words(t))
        })
        .collect();
    if words.len() > manifest.vocabulary_size {
        return Err(Error::Config(format!(
            "corpus needs {} distinct words, manifest allows {}",
            words.len(),
            manifest.vocabulary_size
        )));
    }
    Ok(records)
}

fn contains_words(haystack: &[&str], needle: &[&str]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Checks the record invariants: every forget record has fragments planted
/// verbatim together with their paraphrases, and no retain record mentions
/// a forget fragment or its paraphrase.
pub fn validate_corpus(records: &[Record]) -> Result<()> {
    let mut forget_needles: Vec<String> = Vec::new();
    for r in records.iter().filter(|r| r.is_forget()) {
        if r.sensitive_fragments.is_empty() {
            return Err(Error::Validation(format!("forget record {} has no fragments", r.id)));
        }
        let body = format!("{} {}", r.cot, r.answer);
        let words = split_words(&body);
        for f in &r.sensitive_fragments {
            let p = paraphrase_fragment(f);
            if !contains_words(&words, &split_words(f)) {
                return Err(Error::Validation(format!("fragment {f:?} missing from {}", r.id)));
            }
            if !contains_words(&words, &split_words(&p)) {
                return Err(Error::Validation(format!("paraphrase {p:?} missing from {}", r.id)));
            }
            forget_needles.push(f.clone());
            forget_needles.push(p);
        }
    }
    for r in records.iter().filter(|r| !r.is_forget()) {
        let body = [&r.question, &r.cot, &r.answer]
            .into_iter()
            .chain(&r.paraphrases)
            .map(String::as_str)
            .collect::<Vec<_>>()
            .join(" ");
        let words = split_words(&body);
        if let Some(n) = forget_needles.iter().find(|n| contains_words(&words, &split_words(n))) {
            return Err(Error::Validation(format!("retain record {} mentions {n:?}", r.id)));
        }
    }
    Ok(())
}

/// Every text of the corpus in a fixed order, for vocabulary building.
pub fn corpus_texts(records: &[Record]) -> impl Iterator<Item = &str> {
    records.iter().flat_map(|r| {
        [r.question.as_str(), r.cot.as_str(), r.answer.as_str()]
            .into_iter()
            .chain(r.paraphrases.iter().map(String::as_str))
    })
}

pub fn build_vocabulary<'a>(records: &'a [Record], extra: impl IntoIterator<Item = &'a str>) -> Vocabulary {
    Vocabulary::from_texts(extra.into_iter().chain(corpus_texts(records)))
}

pub fn write_corpus(path: &Path, records: &[Record]) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("records serialize");
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Reads one record per line; blank lines are skipped.
pub fn load_corpus(path: &Path) -> Result<Vec<Record>> {
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    body.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(path, i + 1, e.to_string())))
        .collect()
}

/// Partitions by split, preserving order within each part.
pub fn split_forget_retain(records: &[Record]) -> (Vec<Record>, Vec<Record>) {
    records.iter().cloned().partition(Record::is_forget)
}
