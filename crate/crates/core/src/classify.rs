//! Partition decision criteria and a keyword assistant on top of them.
//!
//! Each partition has a short list of yes/no criteria ("the question can be
//! answered by ..."). [`classify_by_answers`] turns explicit answers into a
//! ranked suggestion; [`Ruleset::suggest`] derives the answers from keywords
//! in a free-text question. Suggestions are advisory: nothing in the catalog
//! applies them automatically.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ClassifyError;
use crate::model::{parse_partition, Partition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Criterion {
    pub partition: Partition,
    pub label: &'static str,
    pub text: &'static str,
}

const fn criterion(partition: Partition, label: &'static str, text: &'static str) -> Criterion {
    Criterion { partition, label, text }
}

static CRITERIA: [Criterion; 13] = [
    criterion(Partition::Who, "Who-i", "answerable from who created, modified or previously used the asset"),
    criterion(Partition::Who, "Who-ii", "answerable from who is able or allowed to access the asset"),
    criterion(Partition::What, "What-i", "answerable by reading the data itself or computing over it"),
    criterion(
        Partition::What,
        "What-ii",
        "answerable from semantics already attached to the data (schema annotations, descriptions)",
    ),
    criterion(Partition::When, "When-i", "answerable from how the asset was used or changed during some time period"),
    criterion(Partition::When, "When-ii", "answerable from when the asset is, was, or stops being available"),
    criterion(
        Partition::Why,
        "Why-i",
        "answerable from the reasons the asset was created, deleted, or used in a particular way",
    ),
    criterion(Partition::Why, "Why-ii", "answerable from the uses the asset is intended, or not intended, for"),
    criterion(Partition::Where, "Where-i", "answerable from how to reach or obtain the asset"),
    criterion(
        Partition::Where,
        "Where-ii",
        "answerable from the storage format of the asset (CSV file, Postgres table, MySQL table, ...)",
    ),
    criterion(Partition::Where, "Where-iii", "answerable from the source or repository that holds the asset"),
    criterion(
        Partition::How,
        "How-i",
        "answerable from the processes (collection, preparation, programs, queries) that created, modified or read the asset",
    ),
    criterion(Partition::Relationship, "Relationship-i", "the metadata item describes more than one asset"),
];

/// Every criterion, grouped by partition in declaration order.
pub fn criteria() -> &'static [Criterion] {
    &CRITERIA
}

/// The criteria that place a question in `partition`.
pub fn criteria_checklist(partition: Partition) -> Vec<&'static Criterion> {
    CRITERIA.iter().filter(|c| c.partition == partition).collect()
}

pub fn find_criterion(label: &str) -> Option<&'static Criterion> {
    CRITERIA.iter().find(|c| c.label.eq_ignore_ascii_case(label))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPartition {
    pub partition: Partition,
    /// Fraction of the partition's criteria answered yes.
    pub score: f64,
    pub matched: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSuggestion {
    /// Best first; scores never increase along the list.
    pub ranked: Vec<RankedPartition>,
    /// Partitions that share the top score but lost the tie-break.
    pub ties: Vec<Partition>,
    pub abstained: bool,
}

impl PartitionSuggestion {
    pub fn top(&self) -> Option<Partition> {
        self.ranked.first().map(|r| r.partition)
    }
}

impl fmt::Display for PartitionSuggestion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.abstained {
            return f.write_str("no partition suggested");
        }
        for (i, r) in self.ranked.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}. {} ({:.2}) via {}", i + 1, r.partition, r.score, r.matched.join(", "))?;
        }
        if !self.ties.is_empty() {
            let names: Vec<_> = self.ties.iter().map(|p| p.as_str()).collect();
            write!(f, "\ntied with: {}", names.join(", "))?;
        }
        Ok(())
    }
}

/// Rank partitions from yes/no answers keyed by criterion label.
///
/// A partition enters the ranking when any of its criteria is answered yes,
/// scored by the fraction answered yes. A yes on the relationship criterion
/// always ranks first: an item about several assets is never a profile item.
/// Equal scores fall back to declaration order (Who, What, When, Why, Where,
/// How).
pub fn classify_by_answers<L, I>(answers: I) -> Result<PartitionSuggestion, ClassifyError>
where
    L: AsRef<str>,
    I: IntoIterator<Item = (L, bool)>,
{
    let mut yes: BTreeMap<Partition, Vec<String>> = BTreeMap::new();
    for (label, answer) in answers {
        let label = label.as_ref();
        let c = find_criterion(label).ok_or_else(|| ClassifyError::UnknownCriterionLabel(label.to_owned()))?;
        if answer {
            let matched = yes.entry(c.partition).or_default();
            if !matched.iter().any(|m| m == c.label) {
                matched.push(c.label.to_owned());
            }
        }
    }

    let mut ranked: Vec<RankedPartition> = yes
        .into_iter()
        .map(|(partition, mut matched)| {
            let total = CRITERIA.iter().filter(|c| c.partition == partition).count();
            matched.sort_by_key(|label| CRITERIA.iter().position(|c| c.label == label));
            RankedPartition { partition, score: matched.len() as f64 / total as f64, matched }
        })
        .collect();
    ranked.sort_by(|a, b| {
        let rel = |r: &RankedPartition| r.partition == Partition::Relationship;
        rel(b).cmp(&rel(a)).then(b.score.total_cmp(&a.score)).then(a.partition.ordinal().cmp(&b.partition.ordinal()))
    });

    let ties = match ranked.first() {
        Some(top) if top.partition.is_profile() => {
            ranked[1..].iter().filter(|r| r.score == top.score).map(|r| r.partition).collect()
        }
        _ => Vec::new(),
    };
    let abstained = ranked.is_empty();
    Ok(PartitionSuggestion { ranked, ties, abstained })
}

/// A keyword pattern that, when present in a question, answers some
/// criteria with yes.
///
/// Patterns are space-separated words matched against consecutive words of
/// the lowercased question; a trailing `*` makes a word a prefix match.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeywordRule {
    pub pattern: &'static str,
    pub criteria: &'static [&'static str],
}

const fn rule(pattern: &'static str, criteria: &'static [&'static str]) -> KeywordRule {
    KeywordRule { pattern, criteria }
}

impl KeywordRule {
    pub fn partition(&self) -> Option<Partition> {
        self.criteria.first().and_then(|l| find_criterion(l)).map(|c| c.partition)
    }

    fn matches(&self, words: &[String]) -> bool {
        let pattern: Vec<&str> = self.pattern.split_whitespace().collect();
        if pattern.is_empty() || pattern.len() > words.len() {
            return false;
        }
        words.windows(pattern.len()).any(|window| {
            window.iter().zip(&pattern).all(|(word, pat)| match pat.strip_suffix('*') {
                Some(prefix) => word.starts_with(prefix),
                None => word == pat,
            })
        })
    }
}

// Question wording often starts with a wh-word that names a different
// partition ("How often ..." is When, "What was the sampling ..." is How),
// so bare "what" and "how" are never keywords.
static BUILTIN_RULES: &[KeywordRule] = &[
    // Who
    rule("who", &["Who-i"]),
    rule("creator*", &["Who-i"]),
    rule("involved", &["Who-i"]),
    rule("owner*", &["Who-i"]),
    rule("curator*", &["Who-i"]),
    rule("manager*", &["Who-i"]),
    rule("contact*", &["Who-i"]),
    rule("reputation", &["Who-i"]),
    rule("access*", &["Who-ii"]),
    rule("privacy", &["Who-ii"]),
    rule("legal", &["Who-ii"]),
    rule("permission*", &["Who-ii"]),
    // What
    rule("size", &["What-i"]),
    rule("error*", &["What-i"]),
    rule("missing", &["What-i"]),
    rule("values", &["What-i"]),
    rule("quality", &["What-i"]),
    rule("contain*", &["What-i"]),
    rule("pii", &["What-i"]),
    rule("personally identifiable", &["What-i"]),
    rule("statistic*", &["What-i"]),
    rule("instances", &["What-ii"]),
    rule("represent*", &["What-ii"]),
    rule("domain", &["What-ii"]),
    rule("schema*", &["What-ii"]),
    rule("description*", &["What-ii"]),
    // When
    rule("when", &["When-i"]),
    rule("how often", &["When-i"]),
    rule("updat*", &["When-i"]),
    rule("modified", &["When-i"]),
    rule("date*", &["When-ii"]),
    rule("release*", &["When-ii"]),
    rule("expir*", &["When-ii"]),
    // Why
    rule("why", &["Why-i"]),
    rule("purpose*", &["Why-i", "Why-ii"]),
    rule("intended", &["Why-ii"]),
    rule("should not be used", &["Why-ii"]),
    rule("tasks", &["Why-ii"]),
    // Where
    rule("where", &["Where-iii"]),
    rule("download*", &["Where-i"]),
    rule("explore", &["Where-i"]),
    rule("format*", &["Where-ii"]),
    rule("repositor*", &["Where-iii"]),
    rule("located", &["Where-iii"]),
    rule("stored", &["Where-iii"]),
    // How
    rule("preprocess*", &["How-i"]),
    rule("clean*", &["How-i"]),
    rule("label*", &["How-i"]),
    rule("sampl*", &["How-i"]),
    rule("collect*", &["How-i"]),
    rule("random*", &["How-i"]),
    rule("bias*", &["How-i"]),
    // Relationship
    rule("provenance", &["Relationship-i"]),
    rule("lineage", &["Relationship-i"]),
    rule("other datasets", &["Relationship-i"]),
    rule("relat*", &["Relationship-i"]),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ruleset {
    rules: Vec<KeywordRule>,
}

impl Default for Ruleset {
    fn default() -> Self {
        Self::builtin()
    }
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase).collect()
}

impl Ruleset {
    pub fn builtin() -> Self {
        Self { rules: BUILTIN_RULES.to_vec() }
    }

    pub fn empty() -> Self {
        Self { rules: Vec::new() }
    }

    pub fn from_rules(rules: Vec<KeywordRule>) -> Self {
        Self { rules }
    }

    /// The same ruleset minus every rule feeding `partition`.
    pub fn without(&self, partition: Partition) -> Self {
        Self { rules: self.rules.iter().copied().filter(|r| r.partition() != Some(partition)).collect() }
    }

    pub fn rules(&self) -> &[KeywordRule] {
        &self.rules
    }

    /// Suggest partitions for a free-text question. Unmatched text abstains.
    pub fn suggest(&self, question: &str) -> PartitionSuggestion {
        let words = words(question);
        let answers =
            self.rules.iter().filter(|r| r.matches(&words)).flat_map(|r| r.criteria.iter().map(|label| (*label, true)));
        // rule labels come from the static criteria table
        classify_by_answers(answers).expect("keyword rules reference known criteria")
    }

    /// Run the ruleset over the shipped question corpus.
    pub fn evaluate(&self) -> RulesetEvaluation {
        let corpus = fixtures();
        let mut failures = Vec::new();
        for q in &corpus {
            let got = self.suggest(&q.text).top();
            if got != Some(q.gold) {
                failures.push(EvaluationFailure { id: q.id.clone(), got, gold: q.gold });
            }
        }
        let correct = corpus.len() - failures.len();
        RulesetEvaluation { accuracy: correct as f64 / corpus.len() as f64, total: corpus.len(), failures }
    }
}

pub fn suggest(question: &str) -> PartitionSuggestion {
    Ruleset::builtin().suggest(question)
}

pub fn evaluate_ruleset() -> RulesetEvaluation {
    Ruleset::builtin().evaluate()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationFailure {
    pub id: String,
    pub got: Option<Partition>,
    pub gold: Partition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulesetEvaluation {
    pub accuracy: f64,
    pub total: usize,
    pub failures: Vec<EvaluationFailure>,
}

/// Data-governance task categories used to tag questions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dgic {
    #[serde(rename = "D")]
    Discovery,
    #[serde(rename = "G")]
    Governance,
    #[serde(rename = "I")]
    Integration,
    #[serde(rename = "C")]
    Compliance,
}

impl Dgic {
    pub fn from_letter(s: &str) -> Option<Self> {
        match s {
            "D" => Some(Dgic::Discovery),
            "G" => Some(Dgic::Governance),
            "I" => Some(Dgic::Integration),
            "C" => Some(Dgic::Compliance),
            _ => None,
        }
    }

    pub fn letter(self) -> &'static str {
        match self {
            Dgic::Discovery => "D",
            Dgic::Governance => "G",
            Dgic::Integration => "I",
            Dgic::Compliance => "C",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionFixture {
    pub id: String,
    pub text: String,
    /// Tags in the order listed in the corpus.
    pub dgic: Vec<Dgic>,
    pub gold: Partition,
}

/// The shipped corpus: tab-separated `id, text, dgic, gold` with a header.
pub const QUESTIONS_TSV: &str = include_str!("../data/questions_5w1h.tsv");

pub fn parse_fixtures(tsv: &str) -> Result<Vec<QuestionFixture>, ClassifyError> {
    let mut out = Vec::new();
    for (i, line) in tsv.lines().enumerate().skip(1) {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| ClassifyError::MalformedFixture { line: line_no, reason };
        let cols: Vec<&str> = line.split('\t').collect();
        let [id, text, dgic, gold] = cols[..] else {
            return Err(bad(format!("expected 4 columns, found {}", cols.len())));
        };
        let dgic = dgic
            .split(',')
            .map(|t| Dgic::from_letter(t.trim()).ok_or_else(|| bad(format!("unknown DGIC tag {t:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let gold = parse_partition(gold).map_err(|e| bad(e.to_string()))?;
        out.push(QuestionFixture { id: id.to_owned(), text: text.to_owned(), dgic, gold });
    }
    Ok(out)
}

/// The 27-question corpus.
pub fn fixtures() -> Vec<QuestionFixture> {
    parse_fixtures(QUESTIONS_TSV).expect("bundled question corpus is well-formed")
}
