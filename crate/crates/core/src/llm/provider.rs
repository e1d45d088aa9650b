use std::collections::{HashMap, VecDeque};
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{fingerprint, Cassette, CassetteEntry, CompletionRequest, Provider, ProviderError, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderMode {
    Live,
    Record,
    #[default]
    Replay,
    Mock,
}

impl std::str::FromStr for ProviderMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "live" => Ok(ProviderMode::Live),
            "record" => Ok(ProviderMode::Record),
            "replay" => Ok(ProviderMode::Replay),
            "mock" => Ok(ProviderMode::Mock),
            other => Err(format!("unknown provider mode `{other}`")),
        }
    }
}

/// Model ids per role. Part of every fingerprint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Models {
    pub selector: String,
    pub generator: String,
}

impl Models {
    pub fn same(model: &str) -> Self {
        Self {
            selector: model.to_string(),
            generator: model.to_string(),
        }
    }

    pub fn for_role(&self, role: Role) -> &str {
        match role {
            Role::Selector => &self.selector,
            Role::Generator => &self.generator,
        }
    }

    fn fingerprint(&self, req: &CompletionRequest) -> String {
        fingerprint(req.role, self.for_role(req.role), &req.prompt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub mode: ProviderMode,
    pub endpoint: String,
    /// Model for both roles unless overridden below.
    pub model: String,
    pub selector_model: Option<String>,
    pub generator_model: Option<String>,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    /// Overrides the per-strategy temperatures on live calls.
    pub temperature: Option<f64>,
    pub timeout_secs: u64,
    pub cassette: Option<PathBuf>,
}

pub const ENV_API_KEY: &str = "FEATFORGE_API_KEY";
pub const ENV_API_BASE: &str = "FEATFORGE_API_BASE";
pub const ENV_MODEL: &str = "FEATFORGE_MODEL";

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            mode: ProviderMode::Replay,
            endpoint: "https://api.openai.com/v1".into(),
            model: "gpt-4".into(),
            selector_model: None,
            generator_model: None,
            api_key_env: ENV_API_KEY.into(),
            temperature: None,
            timeout_secs: 60,
            cassette: None,
        }
    }
}

impl ProviderConfig {
    /// Applies FEATFORGE_API_BASE and FEATFORGE_MODEL when set.
    pub fn with_env(mut self) -> Self {
        if let Ok(base) = std::env::var(ENV_API_BASE) {
            if !base.trim().is_empty() {
                self.endpoint = base;
            }
        }
        if let Ok(model) = std::env::var(ENV_MODEL) {
            if !model.trim().is_empty() {
                self.model = model;
            }
        }
        self
    }

    pub fn models(&self) -> Models {
        Models {
            selector: self.selector_model.clone().unwrap_or_else(|| self.model.clone()),
            generator: self.generator_model.clone().unwrap_or_else(|| self.model.clone()),
        }
    }

    fn cassette_path(&self) -> Result<&PathBuf, ProviderError> {
        self.cassette
            .as_ref()
            .ok_or_else(|| ProviderError::Config(format!("{:?} mode needs a cassette path", self.mode)))
    }

    /// Builds the provider for the configured mode. Replay and mock never
    /// touch the network.
    pub fn build(&self) -> Result<Box<dyn Provider>, ProviderError> {
        Ok(match self.mode {
            ProviderMode::Live => Box::new(HttpProvider::from_config(self)?),
            ProviderMode::Record => {
                let path = self.cassette_path()?.clone();
                Box::new(Recorder::new(HttpProvider::from_config(self)?, self.models()).saving_to(path))
            }
            ProviderMode::Replay => Box::new(ReplayProvider::new(Cassette::load(self.cassette_path()?)?, self.models())),
            ProviderMode::Mock => Box::new(MockProvider::from_cassette(
                &Cassette::load(self.cassette_path()?)?,
                self.models(),
            )),
        })
    }
}

/// Chat-completion client: `POST {endpoint}/chat/completions`.
pub struct HttpProvider {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: String,
    models: Models,
    temperature: Option<f64>,
    timeout_secs: u64,
}

impl HttpProvider {
    pub fn from_config(config: &ProviderConfig) -> Result<Self, ProviderError> {
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| ProviderError::Config(format!("environment variable {} is not set", config.api_key_env)))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: config.endpoint.trim_end_matches('/').to_string(),
            api_key,
            models: config.models(),
            temperature: config.temperature,
            timeout_secs: config.timeout_secs,
        })
    }
}

impl Provider for HttpProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let body = serde_json::json!({
            "model": self.models.for_role(request.role),
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": self.temperature.unwrap_or(request.temperature),
        });
        let response = self
            .client
            .post(format!("{}/chat/completions", self.endpoint))
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    ProviderError::Timeout(self.timeout_secs)
                } else {
                    ProviderError::Transport(e.to_string())
                }
            })?;
        let status = response.status();
        let text = response.text().map_err(|e| ProviderError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ProviderError::Status {
                status: status.as_u16(),
                body: text,
            });
        }
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| ProviderError::BadResponse(format!("{e}: {text}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| ProviderError::BadResponse(format!("no choices[0].message.content in {text}")))
    }
}

/// Forwards to an inner provider and appends every exchange to a cassette.
pub struct Recorder<P> {
    inner: P,
    models: Models,
    cassette: Mutex<Cassette>,
    path: Option<PathBuf>,
}

impl<P: Provider> Recorder<P> {
    pub fn new(inner: P, models: Models) -> Self {
        Self {
            inner,
            models,
            cassette: Mutex::new(Cassette::default()),
            path: None,
        }
    }

    /// Writes the cassette to `path` on [`Provider::finish`].
    pub fn saving_to(mut self, path: PathBuf) -> Self {
        self.path = Some(path);
        self
    }

    pub fn cassette(&self) -> Cassette {
        self.cassette.lock().expect("recorder lock").clone()
    }
}

impl<P: Provider> Provider for Recorder<P> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let response = self.inner.complete(request)?;
        self.cassette.lock().expect("recorder lock").entries.push(CassetteEntry {
            fingerprint: self.models.fingerprint(request),
            role: request.role,
            model: self.models.for_role(request.role).to_string(),
            prompt: request.prompt.clone(),
            response: response.clone(),
        });
        Ok(response)
    }

    fn finish(&self) -> Result<(), ProviderError> {
        self.inner.finish()?;
        match &self.path {
            Some(p) => self.cassette().save(p),
            None => Ok(()),
        }
    }
}

/// Serves recorded responses. Repeated prompts (sampling) get their
/// recorded responses in order; a prompt with nothing left is an error.
pub struct ReplayProvider {
    models: Models,
    queues: Mutex<HashMap<String, VecDeque<String>>>,
}

impl ReplayProvider {
    pub fn new(cassette: Cassette, models: Models) -> Self {
        let mut queues: HashMap<String, VecDeque<String>> = HashMap::new();
        for e in cassette.entries {
            queues.entry(e.fingerprint).or_default().push_back(e.response);
        }
        Self {
            models,
            queues: Mutex::new(queues),
        }
    }
}

impl Provider for ReplayProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let fp = self.models.fingerprint(request);
        self.queues
            .lock()
            .expect("replay lock")
            .get_mut(&fp)
            .and_then(VecDeque::pop_front)
            .ok_or(ProviderError::FingerprintMiss {
                role: request.role.as_str(),
                fingerprint: fp,
            })
    }
}

/// Scripted responses keyed by fingerprint. Each key cycles through its
/// responses, so a mock never runs dry.
pub struct MockProvider {
    models: Models,
    table: HashMap<String, Vec<String>>,
    cursor: Mutex<HashMap<String, usize>>,
}

impl MockProvider {
    pub fn new(models: Models) -> Self {
        Self {
            models,
            table: HashMap::new(),
            cursor: Mutex::new(HashMap::new()),
        }
    }

    pub fn from_cassette(cassette: &Cassette, models: Models) -> Self {
        let mut m = Self::new(models);
        for e in &cassette.entries {
            m.table.entry(e.fingerprint.clone()).or_default().push(e.response.clone());
        }
        m
    }

    pub fn respond(mut self, role: Role, prompt: &str, response: impl Into<String>) -> Self {
        let fp = fingerprint(role, self.models.for_role(role), prompt);
        self.table.entry(fp).or_default().push(response.into());
        self
    }
}

impl Provider for MockProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let fp = self.models.fingerprint(request);
        let responses = self.table.get(&fp).ok_or_else(|| ProviderError::FingerprintMiss {
            role: request.role.as_str(),
            fingerprint: fp.clone(),
        })?;
        let mut cursor = self.cursor.lock().expect("mock lock");
        let i = cursor.entry(fp).or_insert(0);
        let r = responses[*i % responses.len()].clone();
        *i += 1;
        Ok(r)
    }
}

/// Provider backed by a closure; handy for scripting by prompt content.
pub struct FnProvider<F>(pub F);

impl<F> Provider for FnProvider<F>
where
    F: Fn(&CompletionRequest) -> Result<String, ProviderError> + Send + Sync,
{
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        (self.0)(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(role: Role, p: &str) -> CompletionRequest {
        CompletionRequest::new(role, p, 0.0)
    }

    #[test]
    fn record_then_replay_gives_same_sequence() {
        let counter = std::sync::atomic::AtomicUsize::new(0);
        let inner = FnProvider(move |r: &CompletionRequest| {
            let n = counter.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            Ok(format!("{}#{n}", r.prompt))
        });
        let models = Models::same("m");
        let rec = Recorder::new(inner, models.clone());
        let prompts = [(Role::Selector, "a"), (Role::Selector, "a"), (Role::Generator, "b")];
        let live: Vec<String> = prompts.iter().map(|(r, p)| rec.complete(&req(*r, p)).unwrap()).collect();

        let json = rec.cassette().to_json();
        let replay = ReplayProvider::new(Cassette::from_json(&json).unwrap(), models);
        let again: Vec<String> = prompts.iter().map(|(r, p)| replay.complete(&req(*r, p)).unwrap()).collect();
        assert_eq!(live, again);
        assert!(matches!(
            replay.complete(&req(Role::Selector, "a")),
            Err(ProviderError::FingerprintMiss { .. })
        ));
    }

    #[test]
    fn replay_miss_is_an_error() {
        let replay = ReplayProvider::new(Cassette::default(), Models::same("m"));
        assert!(matches!(
            replay.complete(&req(Role::Selector, "unseen")),
            Err(ProviderError::FingerprintMiss { role: "selector", .. })
        ));
    }

    #[test]
    fn replay_is_model_sensitive() {
        let rec = Recorder::new(FnProvider(|_: &CompletionRequest| Ok("x".to_string())), Models::same("m1"));
        rec.complete(&req(Role::Selector, "p")).unwrap();
        let replay = ReplayProvider::new(rec.cassette(), Models::same("m2"));
        assert!(replay.complete(&req(Role::Selector, "p")).is_err());
    }

    #[test]
    fn mock_cycles() {
        let m = MockProvider::new(Models::same("m"))
            .respond(Role::Selector, "p", "one")
            .respond(Role::Selector, "p", "two");
        let got: Vec<String> = (0..3).map(|_| m.complete(&req(Role::Selector, "p")).unwrap()).collect();
        assert_eq!(got, ["one", "two", "one"]);
        assert!(m.complete(&req(Role::Generator, "p")).is_err());
    }

    #[test]
    fn config_requires_cassette_for_replay() {
        let c = ProviderConfig::default();
        assert!(matches!(c.build(), Err(ProviderError::Config(_))));
    }

    #[test]
    fn live_needs_api_key() {
        let c = ProviderConfig {
            mode: ProviderMode::Live,
            api_key_env: "FEATFORGE_TEST_KEY_THAT_IS_NOT_SET".into(),
            ..Default::default()
        };
        assert!(matches!(c.build(), Err(ProviderError::Config(m)) if m.contains("FEATFORGE_TEST_KEY")));
    }

    #[test]
    fn per_role_models() {
        let c = ProviderConfig {
            generator_model: Some("small".into()),
            ..Default::default()
        };
        assert_eq!(c.models().selector, "gpt-4");
        assert_eq!(c.models().generator, "small");
    }
}
