use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ProviderError, Role};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub fingerprint: String,
    pub role: Role,
    pub model: String,
    pub prompt: String,
    pub response: String,
}

/// Recorded model interactions, in call order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cassette {
    pub version: u32,
    pub entries: Vec<CassetteEntry>,
}

impl Default for Cassette {
    fn default() -> Self {
        Self {
            version: 1,
            entries: Vec::new(),
        }
    }
}

impl Cassette {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let path = path.as_ref();
        let err = |message: String| ProviderError::Cassette {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        Self::from_json(&text).map_err(|e| err(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("cassette serializes");
        s.push('\n');
        s
    }

    /// Adds the exchanges of `other` that this cassette lacks. Where both
    /// hold responses to the same prompt they must agree; the longer run wins.
    pub fn merge(&mut self, other: &Cassette) -> Result<(), String> {
        let mut known: HashMap<String, Vec<String>> = HashMap::new();
        for e in &self.entries {
            known.entry(e.fingerprint.clone()).or_default().push(e.response.clone());
        }
        let mut used: HashMap<&str, usize> = HashMap::new();
        let mut extra = Vec::new();
        for e in &other.entries {
            let i = used.entry(&e.fingerprint).or_default();
            match known.get(&e.fingerprint).and_then(|r| r.get(*i)) {
                Some(r) if *r != e.response => {
                    return Err(format!("response {} for {} differs between cassettes", *i + 1, e.fingerprint));
                }
                Some(_) => {}
                None => extra.push(e.clone()),
            }
            *i += 1;
        }
        self.entries.extend(extra);
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ProviderError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| ProviderError::Cassette {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}
