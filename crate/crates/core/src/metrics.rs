//! Consistency analytics over classification-survey responses: frequency
//! distributions, entropy, None analysis, Likert medians and the
//! Mann-Whitney U test.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{IngestError, MetricsError};
use crate::model::Partition;

/// Choice label for "no partition fits".
pub const NONE_CHOICE: &str = "None";

/// Name of the built-in 5W1H+R mental model; the focal model of reports.
pub const FIVE_W1H_R: &str = "5W1H+R";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentalModelSpec {
    name: String,
    partitions: Vec<String>,
}

impl MentalModelSpec {
    pub fn new<I, S>(name: impl Into<String>, partitions: I) -> Result<Self, MetricsError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(MetricsError::InvalidMentalModel("empty name".into()));
        }
        let partitions: Vec<String> = partitions.into_iter().map(Into::into).collect();
        if partitions.len() < 2 {
            return Err(MetricsError::InvalidMentalModel(format!("{name} needs at least 2 partitions")));
        }
        let mut seen = BTreeSet::new();
        for p in &partitions {
            let folded = p.trim().to_lowercase();
            if folded.is_empty() {
                return Err(MetricsError::InvalidMentalModel(format!("{name} has an empty partition name")));
            }
            if folded == NONE_CHOICE.to_lowercase() {
                return Err(MetricsError::InvalidMentalModel(format!("{name}: None cannot be a partition")));
            }
            if !seen.insert(folded) {
                return Err(MetricsError::InvalidMentalModel(format!("{name}: duplicate partition {p:?}")));
            }
        }
        Ok(Self { name, partitions })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn partitions(&self) -> &[String] {
        &self.partitions
    }

    /// Number of partitions; None is never counted.
    pub fn k(&self) -> usize {
        self.partitions.len()
    }

    /// Canonical spelling of `raw` as a choice under this model, matching
    /// case-insensitively. `None` marks the catch-all answer.
    pub fn canonical_choice(&self, raw: &str) -> Option<&str> {
        let raw = raw.trim();
        if raw.eq_ignore_ascii_case(NONE_CHOICE) {
            return Some(NONE_CHOICE);
        }
        self.partitions.iter().find(|p| p.eq_ignore_ascii_case(raw)).map(String::as_str)
    }

    pub fn five_w1h_r() -> Self {
        Self::new(FIVE_W1H_R, Partition::ALL.iter().map(|p| p.to_string())).expect("built-in model")
    }

    pub fn gcs() -> Self {
        Self::new(
            "GCS",
            [
                "Overview",
                "Table Schema",
                "Source Type",
                "Technical Details",
                "Business Details",
                "Lineage",
                "Data Policies",
            ],
        )
        .expect("built-in model")
    }

    pub fn datahub() -> Self {
        Self::new("Datahub", ["Schema", "Documentation", "Properties", "Ownership", "Users", "Data Source"])
            .expect("built-in model")
    }
}

pub fn builtin_models() -> Vec<MentalModelSpec> {
    vec![MentalModelSpec::five_w1h_r(), MentalModelSpec::gcs(), MentalModelSpec::datahub()]
}

fn name_matches(model: &MentalModelSpec, raw: &str) -> bool {
    let raw = raw.trim();
    model.name.eq_ignore_ascii_case(raw) || (model.name == FIVE_W1H_R && raw.eq_ignore_ascii_case("5W1H"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub participant: String,
    pub mm: String,
    pub question: String,
    pub choice: String,
    pub difficulty: Option<u8>,
}

impl ResponseRecord {
    pub fn is_none(&self) -> bool {
        self.choice == NONE_CHOICE
    }
}

/// Question ids look like `Q7`. Returns the number.
pub fn question_number(id: &str) -> Option<u32> {
    let digits = id.strip_prefix('Q').or_else(|| id.strip_prefix('q'))?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn question_order(a: &str, b: &str) -> Ordering {
    question_number(a).cmp(&question_number(b)).then_with(|| a.cmp(b))
}

/// Validated survey responses plus the mental models they refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseDataset {
    models: Vec<MentalModelSpec>,
    records: Vec<ResponseRecord>,
}

impl Default for ResponseDataset {
    fn default() -> Self {
        Self::new(builtin_models())
    }
}

impl ResponseDataset {
    pub fn new(models: Vec<MentalModelSpec>) -> Self {
        Self { models, records: Vec::new() }
    }

    pub fn models(&self) -> &[MentalModelSpec] {
        &self.models
    }

    pub fn model(&self, name: &str) -> Result<&MentalModelSpec, MetricsError> {
        self.models
            .iter()
            .find(|m| name_matches(m, name))
            .ok_or_else(|| MetricsError::UnknownMentalModel(name.to_owned()))
    }

    pub fn records(&self) -> &[ResponseRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Validates one raw row (fields as read from the file) and appends it.
    pub fn push_row(
        &mut self,
        line: usize,
        participant: &str,
        mm: &str,
        question: &str,
        choice: &str,
        difficulty: &str,
    ) -> Result<(), IngestError> {
        let malformed = |reason: String| IngestError::MalformedRow { line, reason };
        let participant = participant.trim();
        if participant.is_empty() {
            return Err(malformed("empty participant".into()));
        }
        let question = question.trim();
        let number = question_number(question)
            .ok_or_else(|| malformed(format!("question {question:?} is not of the form Q<number>")))?;
        let difficulty = match difficulty.trim() {
            "" => None,
            d => match d.parse::<u8>() {
                Ok(v @ 1..=5) => Some(v),
                _ => return Err(malformed(format!("difficulty {d:?} is not an integer from 1 to 5"))),
            },
        };
        let model = self
            .models
            .iter()
            .find(|m| name_matches(m, mm))
            .ok_or_else(|| IngestError::UnknownMentalModel { line, name: mm.trim().to_owned() })?;
        if choice.trim().is_empty() {
            return Err(malformed("empty choice".into()));
        }
        let choice = model.canonical_choice(choice).ok_or_else(|| IngestError::ChoiceNotInModel {
            line,
            choice: choice.trim().to_owned(),
            mm: model.name.clone(),
        })?;
        let record = ResponseRecord {
            participant: participant.to_owned(),
            mm: model.name.clone(),
            question: format!("Q{number}"),
            choice: choice.to_owned(),
            difficulty,
        };
        self.records.push(record);
        Ok(())
    }

    fn rows<'a>(&'a self, mm: &'a str) -> impl Iterator<Item = &'a ResponseRecord> + 'a {
        self.records.iter().filter(move |r| r.mm == mm)
    }

    /// Question ids answered under `mm`, in numeric order.
    pub fn questions(&self, mm: &str) -> Vec<String> {
        let name = match self.model(mm) {
            Ok(m) => m.name.as_str(),
            Err(_) => return Vec::new(),
        };
        let set: BTreeSet<&str> = self.rows(name).map(|r| r.question.as_str()).collect();
        let mut out: Vec<String> = set.into_iter().map(ToOwned::to_owned).collect();
        out.sort_by(|a, b| question_order(a, b));
        out
    }

    pub fn distribution(&self, mm: &str, question: &str) -> Result<Distribution, MetricsError> {
        let name = self.model(mm)?.name.as_str();
        let mut d = Distribution::new();
        for r in self.rows(name).filter(|r| r.question == question) {
            d.add(&r.choice, 1);
        }
        Ok(d)
    }

    pub fn difficulties(&self, mm: &str, question: &str) -> Result<Vec<u8>, MetricsError> {
        let name = self.model(mm)?.name.as_str();
        Ok(self.rows(name).filter(|r| r.question == question).filter_map(|r| r.difficulty).collect())
    }
}

/// Counts per chosen option.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distribution {
    counts: BTreeMap<String, u64>,
}

impl Distribution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts<I, S>(counts: I) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut d = Self::new();
        for (label, n) in counts {
            d.add(label, n);
        }
        d
    }

    /// Distribution over anonymous labels `c0`, `c1`, ...
    pub fn from_slice(counts: &[u64]) -> Self {
        Self::from_counts(counts.iter().enumerate().map(|(i, &n)| (format!("c{i}"), n)))
    }

    pub fn add(&mut self, label: impl Into<String>, n: u64) {
        if n > 0 {
            *self.counts.entry(label.into()).or_insert(0) += n;
        }
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn count(&self, label: &str) -> u64 {
        self.counts.get(label).copied().unwrap_or(0)
    }

    pub fn n(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.n() == 0
    }
}

/// Shannon entropy in bits of the empirical distribution.
pub fn entropy(d: &Distribution) -> Result<f64, MetricsError> {
    let n = d.n();
    if n == 0 {
        return Err(MetricsError::EmptyDistribution);
    }
    let n = n as f64;
    let h: f64 = d
        .counts
        .values()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * libm::log2(p)
        })
        .sum();
    // A point mass sums to -0.0.
    Ok(if h <= 0.0 { 0.0 } else { h })
}

/// Entropy divided by log2 of the model's partition count.
pub fn normalized_entropy(d: &Distribution, mm: &MentalModelSpec) -> Result<f64, MetricsError> {
    Ok(normalize_bits(entropy(d)?, mm.k()))
}

/// `bits / log2(k)`; used both on computed entropies and on published ones.
pub fn normalize_bits(bits: f64, k: usize) -> f64 {
    bits / libm::log2(k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionNone {
    pub question: String,
    pub nones: u64,
    pub responses: u64,
    pub proportion: f64,
    /// None was chosen strictly more often than every partition.
    pub none_modal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoneStats {
    pub mm: String,
    pub questions: Vec<QuestionNone>,
    pub nones: u64,
    pub responses: u64,
    pub proportion: f64,
}

impl NoneStats {
    pub fn modal_questions(&self) -> impl Iterator<Item = &str> {
        self.questions.iter().filter(|q| q.none_modal).map(|q| q.question.as_str())
    }
}

/// None share of one distribution and whether None is its strict mode.
pub fn none_share(d: &Distribution) -> (u64, u64, bool) {
    let nones = d.count(NONE_CHOICE);
    let best = d.counts.iter().filter(|(k, _)| k.as_str() != NONE_CHOICE).map(|(_, &c)| c).max().unwrap_or(0);
    (nones, d.n(), nones > 0 && nones > best)
}

pub fn none_stats(ds: &ResponseDataset, mm: &str) -> Result<NoneStats, MetricsError> {
    let model = ds.model(mm)?;
    let questions = ds.questions(model.name());
    if questions.is_empty() {
        return Err(MetricsError::NoData(model.name.clone()));
    }
    let mut out = NoneStats { mm: model.name.clone(), questions: Vec::new(), nones: 0, responses: 0, proportion: 0.0 };
    for q in questions {
        let d = ds.distribution(model.name(), &q)?;
        let (nones, responses, none_modal) = none_share(&d);
        out.nones += nones;
        out.responses += responses;
        out.questions.push(QuestionNone {
            question: q,
            nones,
            responses,
            proportion: nones as f64 / responses as f64,
            none_modal,
        });
    }
    out.proportion = out.nones as f64 / out.responses as f64;
    Ok(out)
}

/// Median of ratings; the mean of the two middle values for even counts.
pub fn median(values: &[u8]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] as f64 } else { (v[mid - 1] as f64 + v[mid] as f64) / 2.0 })
}

pub fn median_difficulty(ds: &ResponseDataset, mm: &str, question: &str) -> Result<f64, MetricsError> {
    let model = ds.model(mm)?;
    let ratings = ds.difficulties(model.name(), question)?;
    median(&ratings).ok_or_else(|| MetricsError::NoRatings { mm: model.name.clone(), question: question.to_owned() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// min(U_a, U_b)
    pub u: f64,
    /// Number of (a, b) pairs with a > b, ties counting one half.
    pub u_a: f64,
    pub u_b: f64,
    pub p_two_sided: f64,
    pub method: PMethod,
}

/// Average ranks (1-based) of `values`, plus the tie group sizes.
pub fn average_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

/// Two-sided Mann-Whitney U test.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptySample);
    }
    let (n, m) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = average_ranks(&pooled);
    let rank_sum_a: f64 = ranks[..n].iter().sum();
    let u_a = rank_sum_a - (n * (n + 1)) as f64 / 2.0;
    let u_b = (n * m) as f64 - u_a;
    let u = if u_a < u_b { u_a } else { u_b };

    if ties.is_empty() && n.min(m) <= 8 {
        if let Some(p) = exact_p(n, m, u as u64) {
            return Ok(MannWhitney { u, u_a, u_b, p_two_sided: p, method: PMethod::Exact });
        }
    }
    let p = normal_p(n, m, u, &ties);
    Ok(MannWhitney { u, u_a, u_b, p_two_sided: p, method: PMethod::Normal })
}

/// Number of arrangements of `n` a-labels and `m` b-labels giving each
/// U value 0..=n*m: the coefficients of the Gaussian binomial [n+m, n]_q.
/// `None` when a coefficient overflows.
pub fn u_null_counts(n: usize, m: usize) -> Option<Vec<i128>> {
    let (small, large) = if n <= m { (n, m) } else { (m, n) };
    // C(n+m, n) bounds every coefficient; refuse before allocating.
    let mut total: i128 = 1;
    for i in 1..=small {
        total = total.checked_mul((large + i) as i128)? / i as i128;
    }
    let _ = total;
    let degree = small.checked_mul(large)?;
    let mut poly = vec![0i128; degree + 1];
    poly[0] = 1;
    // Coefficients above `degree` are never needed: the final polynomial has
    // that degree and series division only looks at lower terms.
    for i in 1..=small {
        let shift = large + i;
        for d in (shift..=degree).rev() {
            poly[d] -= poly[d - shift];
        }
        for d in i..=degree {
            poly[d] += poly[d - i];
        }
    }
    Some(poly)
}

fn exact_p(n: usize, m: usize, u_min: u64) -> Option<f64> {
    let counts = u_null_counts(n, m)?;
    let total = counts.iter().try_fold(0i128, |acc, &c| acc.checked_add(c))?;
    let tail =
        counts[..=(u_min as usize).min(counts.len() - 1)].iter().try_fold(0i128, |acc, &c| acc.checked_add(c))?;
    let p = 2.0 * (tail as f64) / (total as f64);
    Some(if p > 1.0 { 1.0 } else { p })
}

fn normal_p(n: usize, m: usize, u: f64, ties: &[usize]) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    let big_n = nf + mf;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let variance =
        if big_n > 1.0 { nf * mf / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0))) } else { 0.0 };
    if variance <= 0.0 {
        return 1.0;
    }
    let mu = nf * mf / 2.0;
    let dev = libm::fabs(u - mu) - 0.5;
    if dev <= 0.0 {
        return 1.0;
    }
    let z = dev / libm::sqrt(variance);
    let p = libm::erfc(z / core::f64::consts::SQRT_2);
    if p > 1.0 {
        1.0
    } else {
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Better,
    Inconclusive,
    Worse,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Better => "Better",
            Verdict::Inconclusive => "Inconclusive",
            Verdict::Worse => "Worse",
        })
    }
}

/// Better when the model's normalized entropy is strictly lower than every
/// other model's, Worse when it is lower than none of them.
pub fn verdict(own: f64, others: &[f64]) -> Verdict {
    let beaten = others.iter().filter(|&&o| own < o).count();
    if beaten == others.len() {
        Verdict::Better
    } else if beaten == 0 {
        Verdict::Worse
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionCell {
    pub mm: String,
    pub question: String,
    pub responses: u64,
    pub nones: u64,
    pub entropy: f64,
    pub normalized_entropy: f64,
    pub none_proportion: f64,
    pub none_modal: bool,
    pub median_difficulty: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub mm: String,
    pub k: usize,
    pub questions: usize,
    pub mean_entropy: f64,
    pub mean_normalized_entropy: f64,
    pub nones: u64,
    pub responses: u64,
    pub none_proportion: f64,
    pub none_modal_questions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionVerdict {
    pub question: String,
    pub mm: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyTest {
    pub question: String,
    pub left: String,
    pub right: String,
    pub test: MannWhitney,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub cells: Vec<QuestionCell>,
    pub models: Vec<ModelSummary>,
    pub verdicts: Vec<QuestionVerdict>,
    pub difficulty_tests: Vec<DifficultyTest>,
}

impl ConsistencyReport {
    pub fn cell(&self, mm: &str, question: &str) -> Option<&QuestionCell> {
        self.cells.iter().find(|c| c.mm == mm && c.question == question)
    }

    pub fn summary(&self, mm: &str) -> Option<&ModelSummary> {
        self.models.iter().find(|s| s.mm == mm)
    }

    pub fn verdicts_for<'a>(&'a self, mm: &'a str) -> impl Iterator<Item = &'a QuestionVerdict> + 'a {
        self.verdicts.iter().filter(move |v| v.mm == mm)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Every statistic for every (model, question) with responses, per-model
/// averages, per-question verdicts and pairwise difficulty tests.
pub fn consistency_report(ds: &ResponseDataset) -> Result<ConsistencyReport, MetricsError> {
    if ds.is_empty() {
        return Err(MetricsError::NoData("any".into()));
    }
    let mut cells = Vec::new();
    let mut models = Vec::new();
    for model in ds.models() {
        let questions = ds.questions(model.name());
        if questions.is_empty() {
            continue;
        }
        let start = cells.len();
        for q in &questions {
            let d = ds.distribution(model.name(), q)?;
            let (nones, responses, none_modal) = none_share(&d);
            let ratings = ds.difficulties(model.name(), q)?;
            cells.push(QuestionCell {
                mm: model.name.clone(),
                question: q.clone(),
                responses,
                nones,
                entropy: entropy(&d)?,
                normalized_entropy: normalized_entropy(&d, model)?,
                none_proportion: nones as f64 / responses as f64,
                none_modal,
                median_difficulty: median(&ratings),
            });
        }
        let mine = &cells[start..];
        let nones: u64 = mine.iter().map(|c| c.nones).sum();
        let responses: u64 = mine.iter().map(|c| c.responses).sum();
        models.push(ModelSummary {
            mm: model.name.clone(),
            k: model.k(),
            questions: mine.len(),
            mean_entropy: mean(mine.iter().map(|c| c.entropy)),
            mean_normalized_entropy: mean(mine.iter().map(|c| c.normalized_entropy)),
            nones,
            responses,
            none_proportion: nones as f64 / responses as f64,
            none_modal_questions: mine.iter().filter(|c| c.none_modal).map(|c| c.question.clone()).collect(),
        });
    }

    let mut all_questions: Vec<String> =
        cells.iter().map(|c| c.question.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    all_questions.sort_by(|a, b| question_order(a, b));

    let mut verdicts = Vec::new();
    let mut difficulty_tests = Vec::new();
    for q in &all_questions {
        let here: Vec<&QuestionCell> = cells.iter().filter(|c| &c.question == q).collect();
        if here.len() >= 2 {
            for cell in &here {
                let others: Vec<f64> = here.iter().filter(|o| o.mm != cell.mm).map(|o| o.normalized_entropy).collect();
                verdicts.push(QuestionVerdict {
                    question: q.clone(),
                    mm: cell.mm.clone(),
                    verdict: verdict(cell.normalized_entropy, &others),
                });
            }
        }
        for (i, left) in here.iter().enumerate() {
            for right in &here[i + 1..] {
                let a: Vec<f64> = ds.difficulties(&left.mm, q)?.into_iter().map(f64::from).collect();
                let b: Vec<f64> = ds.difficulties(&right.mm, q)?.into_iter().map(f64::from).collect();
                if let Ok(test) = mann_whitney_u(&a, &b) {
                    difficulty_tests.push(DifficultyTest {
                        question: q.clone(),
                        left: left.mm.clone(),
                        right: right.mm.clone(),
                        test,
                    });
                }
            }
        }
    }
    Ok(ConsistencyReport { cells, models, verdicts, difficulty_tests })
}
