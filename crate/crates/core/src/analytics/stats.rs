use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{AnalyticsError, WordTokenizer};
use crate::record::{Origin, SynthesisRecord};
use crate::text::char_len;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    Chars,
    Words,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OriginRatio {
    pub teacher_fraction: f64,
    pub student_fraction: f64,
    pub teacher_units: usize,
    pub student_units: usize,
}

fn measure(text: &str, unit: LengthUnit, tokenizer: &dyn WordTokenizer) -> usize {
    match unit {
        LengthUnit::Chars => char_len(text),
        LengthUnit::Words => tokenizer.tokenize(text).len(),
    }
}

/// Share of output produced by each origin, aggregated over all spans.
pub fn origin_ratio(
    records: &[SynthesisRecord],
    unit: LengthUnit,
    tokenizer: &dyn WordTokenizer,
) -> Result<OriginRatio, AnalyticsError> {
    if records.is_empty() {
        return Err(AnalyticsError::Empty("no records"));
    }
    let (mut teacher, mut student) = (0usize, 0usize);
    for span in records.iter().flat_map(|r| &r.spans) {
        let n = measure(&span.text, unit, tokenizer);
        match span.origin {
            Origin::Teacher => teacher += n,
            Origin::Student => student += n,
        }
    }
    let total = teacher + student;
    if total == 0 {
        return Err(AnalyticsError::Empty("records contain no text"));
    }
    Ok(OriginRatio {
        teacher_fraction: teacher as f64 / total as f64,
        student_fraction: student as f64 / total as f64,
        teacher_units: teacher,
        student_units: student,
    })
}

/// Linear-interpolation percentile of sorted data, `p` in `[0, 1]`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = p.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthSummary {
    pub label: String,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthReport {
    pub summaries: Vec<LengthSummary>,
    /// `(a, b, mean_a - mean_b)` for every pair, `a` before `b` in input order.
    pub differences: Vec<(String, String, f64)>,
}

impl LengthReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,count,mean,median,p10,p90,min,max\n");
        for s in &self.summaries {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                s.label, s.count, s.mean, s.median, s.p10, s.p90, s.min, s.max
            ));
        }
        out
    }
}

/// Length summaries per labeled group of lengths.
pub fn length_stats(groups: &[(String, Vec<f64>)]) -> Result<LengthReport, AnalyticsError> {
    let mut summaries = Vec::with_capacity(groups.len());
    for (label, lengths) in groups {
        if lengths.is_empty() {
            return Err(AnalyticsError::Empty("a strategy has no records"));
        }
        let mut sorted = lengths.clone();
        sorted.sort_by(f64::total_cmp);
        summaries.push(LengthSummary {
            label: label.clone(),
            count: sorted.len(),
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            median: percentile(&sorted, 0.5),
            p10: percentile(&sorted, 0.1),
            p90: percentile(&sorted, 0.9),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        });
    }
    let mut differences = Vec::new();
    for (i, a) in summaries.iter().enumerate() {
        for b in &summaries[i + 1..] {
            differences.push((a.label.clone(), b.label.clone(), a.mean - b.mean));
        }
    }
    Ok(LengthReport {
        summaries,
        differences,
    })
}

/// Relative word frequencies of the most frequent words across corpora.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyTable {
    pub labels: Vec<String>,
    /// `(word, frequency per corpus)` in descending order of peak frequency.
    pub rows: Vec<(String, Vec<f64>)>,
}

impl FrequencyTable {
    pub fn frequency(&self, word: &str, label: &str) -> Option<f64> {
        let col = self.labels.iter().position(|l| l == label)?;
        self.rows.iter().find(|(w, _)| w == word).map(|(_, f)| f[col])
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("word,{}\n", self.labels.join(","));
        for (word, freqs) in &self.rows {
            let cells: Vec<String> = freqs.iter().map(f64::to_string).collect();
            out.push_str(&format!("{word},{}\n", cells.join(",")));
        }
        out
    }
}

pub fn word_frequency_table(
    corpora: &[(String, Vec<String>)],
    tokenizer: &dyn WordTokenizer,
    top_k: usize,
) -> Result<FrequencyTable, AnalyticsError> {
    if corpora.is_empty() {
        return Err(AnalyticsError::Empty("no corpora"));
    }
    let freqs: Vec<HashMap<String, f64>> = corpora
        .iter()
        .map(|(_, docs)| {
            let mut counts: HashMap<String, usize> = HashMap::new();
            let mut total = 0usize;
            for doc in docs {
                for w in tokenizer.tokenize(doc) {
                    *counts.entry(w).or_insert(0) += 1;
                    total += 1;
                }
            }
            counts
                .into_iter()
                .map(|(w, c)| (w, c as f64 / total as f64))
                .collect()
        })
        .collect();
    let mut peak: BTreeMap<&str, f64> = BTreeMap::new();
    for f in &freqs {
        for (w, &v) in f {
            let e = peak.entry(w.as_str()).or_insert(0.0);
            *e = e.max(v);
        }
    }
    let mut words: Vec<(&str, f64)> = peak.into_iter().collect();
    words.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let rows = words
        .into_iter()
        .take(top_k)
        .map(|(w, _)| {
            let row = freqs.iter().map(|f| f.get(w).copied().unwrap_or(0.0)).collect();
            (w.to_string(), row)
        })
        .collect();
    Ok(FrequencyTable {
        labels: corpora.iter().map(|(l, _)| l.clone()).collect(),
        rows,
    })
}
