use std::io::Write;
use std::process::{Command, Stdio};
use std::sync::Mutex;

use cosynth_core::analytics::{DefaultTokenizer, WordTokenizer};

/// Runs a shell command per document: text on stdin, whitespace-separated
/// tokens on stdout. The first failure is kept and reported after analysis.
pub struct ExternalTokenizer {
    command: String,
    failure: Mutex<Option<String>>,
}

impl ExternalTokenizer {
    pub fn failure(&self) -> Option<String> {
        self.failure.lock().unwrap().clone()
    }

    fn run(&self, text: &str) -> Result<Vec<String>, String> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| format!("spawning {:?}: {e}", self.command))?;
        let mut stdin = child.stdin.take().expect("piped");
        let input = text.to_string();
        let feeder = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
        let out = child.wait_with_output().map_err(|e| e.to_string())?;
        let _ = feeder.join();
        if !out.status.success() {
            return Err(format!("{:?} exited with {}", self.command, out.status));
        }
        Ok(String::from_utf8_lossy(&out.stdout)
            .split_whitespace()
            .map(str::to_string)
            .collect())
    }
}

impl WordTokenizer for ExternalTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        self.run(text).unwrap_or_else(|e| {
            self.failure.lock().unwrap().get_or_insert(e);
            Vec::new()
        })
    }
}

pub enum Tokenizer {
    Default(DefaultTokenizer),
    External(ExternalTokenizer),
}

impl Tokenizer {
    pub fn describe(&self) -> String {
        match self {
            Tokenizer::Default(_) => "default (lowercase words split on whitespace and punctuation)".into(),
            Tokenizer::External(t) => format!("external: {}", t.command),
        }
    }

    pub fn failure(&self) -> Option<String> {
        match self {
            Tokenizer::Default(_) => None,
            Tokenizer::External(t) => t.failure(),
        }
    }
}

impl AsRef<dyn WordTokenizer> for Tokenizer {
    fn as_ref(&self) -> &(dyn WordTokenizer + 'static) {
        match self {
            Tokenizer::Default(t) => t,
            Tokenizer::External(t) => t,
        }
    }
}

pub fn from_arg(arg: &str) -> Option<Tokenizer> {
    match arg {
        "default" => Some(Tokenizer::Default(DefaultTokenizer)),
        _ => arg
            .strip_prefix("external:")
            .filter(|c| !c.trim().is_empty())
            .map(|c| {
                Tokenizer::External(ExternalTokenizer {
                    command: c.to_string(),
                    failure: Mutex::new(None),
                })
            }),
    }
}
