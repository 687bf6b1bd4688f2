use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use cosynth_core::boundary::StyleLexicon;
use cosynth_core::fixture::FixtureServer;
use cosynth_core::gateway::MockSpec;
use cosynth_core::LexiconPredictor;
use serde::Deserialize;

/// Contents of a `--script` file. Every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ServeScript {
    /// Synthetic model parameters.
    model: MockSpec,
    /// Replaces the predictor's style lexicon.
    style_phrases: Option<Vec<String>>,
    /// Answer the first N completion requests with 503.
    fail_first: usize,
}

pub fn run(script: Option<&Path>, host: &str, port: u16) -> Result<()> {
    let script: ServeScript = match script {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ServeScript::default(),
    };
    let lexicon = match script.style_phrases {
        Some(phrases) => StyleLexicon::new(phrases).context("style_phrases must contain a non-empty phrase")?,
        None => StyleLexicon::default(),
    };
    let server = FixtureServer::start_with_faults(
        &format!("{host}:{port}"),
        script.model,
        LexiconPredictor::new(lexicon),
        script.fail_first,
    )?;
    println!("listening on {}", server.base_url());
    std::io::stdout().flush()?;
    server.join();
    Ok(())
}
