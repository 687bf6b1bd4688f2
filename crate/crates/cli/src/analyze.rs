use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cosynth_core::analytics::{
    length_stats, mean_pairwise_similarity, origin_ratio, pca_project, scatter_svg, tfidf_vectors,
    word_frequency_table, CorpusVector, IdfMode, LengthUnit,
};
use cosynth_core::dataset::read_records;
use cosynth_core::SynthesisRecord;
use serde_json::{json, Value};

use crate::tokenizer::Tokenizer;

struct Corpus {
    label: String,
    path: PathBuf,
    records: Vec<SynthesisRecord>,
}

fn output_text(r: &SynthesisRecord) -> String {
    format!("{}{}", r.think_text(), r.answer_text())
}

fn load(paths: &[PathBuf]) -> Result<Vec<Corpus>> {
    let mut corpora: Vec<Corpus> = Vec::new();
    for path in paths {
        let stem = path.file_stem().map_or("corpus".into(), |s| s.to_string_lossy().into_owned());
        let mut label = stem.clone();
        let mut n = 2;
        while corpora.iter().any(|c| c.label == label) {
            label = format!("{stem}-{n}");
            n += 1;
        }
        let records = read_records(path).with_context(|| format!("reading {}", path.display()))?;
        if records.is_empty() {
            bail!("{} holds no records", path.display());
        }
        corpora.push(Corpus {
            label,
            path: path.clone(),
            records,
        });
    }
    Ok(corpora)
}

pub fn run(paths: &[PathBuf], report: &Path, tokenizer: &Tokenizer, pca_sample: usize, top_words: usize) -> Result<()> {
    let corpora = load(paths)?;
    let tok = tokenizer.as_ref();
    fs::create_dir_all(report).with_context(|| format!("creating {}", report.display()))?;

    let mut ratios = BTreeMap::new();
    for c in &corpora {
        let chars = origin_ratio(&c.records, LengthUnit::Chars, tok)?;
        let words = origin_ratio(&c.records, LengthUnit::Words, tok)?;
        ratios.insert(c.label.clone(), json!({ "chars": chars, "words": words }));
    }

    let groups: Vec<(String, Vec<f64>)> = corpora
        .iter()
        .map(|c| {
            let lengths = c.records.iter().map(|r| tok.tokenize(&output_text(r)).len() as f64).collect();
            (c.label.clone(), lengths)
        })
        .collect();
    let lengths = length_stats(&groups)?;
    fs::write(report.join("lengths.csv"), lengths.to_csv())?;

    let freq_input: Vec<(String, Vec<String>)> = corpora
        .iter()
        .map(|c| (c.label.clone(), c.records.iter().map(output_text).collect()))
        .collect();
    let table = word_frequency_table(&freq_input, tok, top_words)?;
    fs::write(report.join("frequency.csv"), table.to_csv())?;

    // One TF-IDF space over every corpus so vectors are comparable.
    let docs: Vec<(String, String)> = corpora
        .iter()
        .flat_map(|c| c.records.iter().map(|r| (r.id.clone(), output_text(r))))
        .collect();
    let (vocab, vectors) = tfidf_vectors(&docs, tok, IdfMode::Plain)?;
    let mut split: Vec<&[CorpusVector]> = Vec::new();
    let mut offset = 0;
    for c in &corpora {
        split.push(&vectors[offset..offset + c.records.len()]);
        offset += c.records.len();
    }

    let mut similarity = Vec::new();
    for i in 0..corpora.len() {
        for j in i + 1..corpora.len() {
            let entry = match mean_pairwise_similarity(split[i], split[j]) {
                Ok(v) => json!({ "a": corpora[i].label, "b": corpora[j].label, "mean_cosine": v }),
                Err(e) => json!({ "a": corpora[i].label, "b": corpora[j].label, "error": e.to_string() }),
            };
            similarity.push(entry);
        }
    }

    let mut labels = Vec::new();
    let mut sample = Vec::new();
    for (c, vs) in corpora.iter().zip(&split) {
        for v in vs.iter().take(pca_sample) {
            labels.push(c.label.clone());
            sample.push(v.clone());
        }
    }
    let pca = if vocab.len() >= 2 && sample.len() >= 2 {
        let proj = pca_project(&sample, vocab.len())?;
        let points: Vec<(String, f64, f64)> = labels
            .iter()
            .zip(&proj.points)
            .map(|(l, p)| (l.clone(), p.x, p.y))
            .collect();
        fs::write(report.join("pca.svg"), scatter_svg(&points, "TF-IDF PCA projection"))?;
        let mut csv = String::from("corpus,id,x,y\n");
        for (l, p) in labels.iter().zip(&proj.points) {
            csv.push_str(&format!("{l},{},{},{}\n", p.doc_id, p.x, p.y));
        }
        fs::write(report.join("pca_points.csv"), csv)?;
        json!({
            "documents": sample.len(),
            "explained_variance": proj.explained_variance,
            "total_variance": proj.total_variance,
        })
    } else {
        Value::String("skipped: need at least two documents and two terms".into())
    };

    if let Some(failure) = tokenizer.failure() {
        bail!("tokenizer failed: {failure}");
    }

    let summary = json!({
        "tokenizer": tokenizer.describe(),
        "note": "lengths and ratios use the analytics tokenizer, not a model tokenizer; compare shapes, not absolute counts",
        "corpora": corpora.iter().map(|c| json!({
            "label": c.label, "path": c.path.display().to_string(), "records": c.records.len()
        })).collect::<Vec<_>>(),
        "origin_ratio": ratios,
        "lengths": lengths,
        "similarity": similarity,
        "pca": pca,
    });
    fs::write(report.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    println!("report written to {}", report.display());
    Ok(())
}
