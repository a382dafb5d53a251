use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::audit::{AuditEntry, AuditLog};
use super::prompt::{build_context_fragment, build_direct_prompt, build_reverse_prompt, render_instruction, PromptStyle, SYSTEM_PROMPT};
use super::{CandidateRecord, GenerationError, GenerationTask, Stream, TeacherMeta};
use crate::context::ContextModel;
use crate::manifest::strip_llm_wrapping;

/// Endpoint, retry and throughput settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    #[serde(with = "millis")]
    pub timeout: Duration,
    pub max_retries: u32,
    #[serde(with = "millis")]
    pub backoff_initial: Duration,
    pub reply_cap_bytes: usize,
    pub concurrency: usize,
    pub rate_per_minute: u32,
    pub prompt_style: PromptStyle,
    pub temperature: f64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.deepseek.com/v1".into(),
            model: "deepseek-v4-flash".into(),
            api_key: None,
            timeout: Duration::from_secs(120),
            max_retries: 3,
            backoff_initial: Duration::from_secs(2),
            reply_cap_bytes: 512 * 1024,
            concurrency: 4,
            rate_per_minute: 60,
            prompt_style: PromptStyle::Std,
            temperature: 0.7,
        }
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

pub struct TeacherRequest<'a> {
    pub task: &'a GenerationTask,
    pub system: &'a str,
    pub user: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub content: String,
    pub model: String,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("transport: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl BackendError {
    fn retryable(&self) -> bool {
        match self {
            BackendError::Status { status, .. } => *status == 429 || *status >= 500,
            BackendError::Transport(_) => true,
            BackendError::Malformed(_) => false,
        }
    }
}

/// Anything that can answer a chat-completion request.
pub trait TeacherBackend: Send + Sync {
    fn complete(&self, request: &TeacherRequest<'_>) -> Result<Reply, BackendError>;
    fn model(&self) -> &str;
}

/// Chat-completion client for OpenAI-compatible endpoints.
pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    model: String,
    api_key: String,
    temperature: f64,
}

impl HttpBackend {
    pub fn new(config: &EndpointConfig) -> Result<Self, GenerationError> {
        let api_key = config.api_key.clone().filter(|k| !k.is_empty()).ok_or(GenerationError::MissingApiKey)?;
        Ok(Self {
            agent: ureq::AgentBuilder::new().timeout(config.timeout).build(),
            url: format!("{}/chat/completions", config.base_url.trim_end_matches('/')),
            model: config.model.clone(),
            api_key,
            temperature: config.temperature,
        })
    }
}

impl TeacherBackend for HttpBackend {
    fn complete(&self, request: &TeacherRequest<'_>) -> Result<Reply, BackendError> {
        let body = json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
        });
        let started = Instant::now();
        let response = self
            .agent
            .post(&self.url)
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body);
        let latency_ms = started.elapsed().as_millis() as u64;
        let response = match response {
            Ok(r) => r,
            Err(ureq::Error::Status(status, r)) => {
                let body = r.into_string().unwrap_or_default();
                return Err(BackendError::Status { status, body });
            }
            Err(ureq::Error::Transport(t)) => return Err(BackendError::Transport(t.to_string())),
        };
        let value: serde_json::Value = response
            .into_json()
            .map_err(|e| BackendError::Malformed(e.to_string()))?;
        let content = value
            .pointer("/choices/0/message/content")
            .and_then(serde_json::Value::as_str)
            .unwrap_or_default()
            .to_string();
        let model = value
            .get("model")
            .and_then(serde_json::Value::as_str)
            .unwrap_or(&self.model)
            .to_string();
        Ok(Reply {
            content,
            model,
            latency_ms,
        })
    }

    fn model(&self) -> &str {
        &self.model
    }
}

/// Sliding one-minute window shared by all workers.
pub struct RateLimiter {
    per_minute: u32,
    window: Mutex<VecDeque<Instant>>,
}

impl RateLimiter {
    const WINDOW: Duration = Duration::from_secs(60);

    /// `per_minute == 0` disables limiting.
    pub fn new(per_minute: u32) -> Self {
        Self {
            per_minute,
            window: Mutex::new(VecDeque::new()),
        }
    }

    pub fn acquire(&self) {
        if self.per_minute == 0 {
            return;
        }
        loop {
            let wait = {
                let mut w = self.window.lock().expect("rate limiter poisoned");
                let now = Instant::now();
                while w.front().is_some_and(|t| now.duration_since(*t) >= Self::WINDOW) {
                    w.pop_front();
                }
                if w.len() < self.per_minute as usize {
                    w.push_back(now);
                    return;
                }
                Self::WINDOW - now.duration_since(*w.front().expect("window is full"))
            };
            thread::sleep(wait);
        }
    }
}

pub struct TeacherClient {
    backend: Box<dyn TeacherBackend>,
    config: EndpointConfig,
    limiter: RateLimiter,
    audit: Option<AuditLog>,
    cm: ContextModel,
}

impl TeacherClient {
    pub fn new(backend: Box<dyn TeacherBackend>, config: EndpointConfig, cm: ContextModel) -> Self {
        Self {
            limiter: RateLimiter::new(config.rate_per_minute),
            backend,
            config,
            audit: None,
            cm,
        }
    }

    pub fn with_audit(mut self, audit: AuditLog) -> Self {
        self.audit = Some(audit);
        self
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn audit(&self, entry: AuditEntry) {
        if let Some(log) = &self.audit {
            if let Err(e) = log.append(&entry) {
                tracing::warn!("audit log write failed: {e}");
            }
        }
    }

    /// Sends one prompt, retrying throttling and server errors with
    /// exponential backoff. Returns the reply and the attempt count.
    fn call(&self, task: &GenerationTask, user: &str) -> Result<(Reply, u32), GenerationError> {
        let total = self.config.max_retries + 1;
        let mut last = String::new();
        for attempt in 1..=total {
            self.limiter.acquire();
            self.audit(AuditEntry::request(&task.id, attempt, self.backend.model(), user));
            let request = TeacherRequest {
                task,
                system: SYSTEM_PROMPT,
                user,
            };
            match self.backend.complete(&request) {
                Ok(reply) => {
                    self.audit(AuditEntry::reply(&task.id, attempt, &reply.model, &reply.content));
                    return Ok((reply, attempt));
                }
                Err(err) => {
                    self.audit(AuditEntry::error(&task.id, attempt, self.backend.model(), &err.to_string()));
                    if !err.retryable() {
                        return Err(match err {
                            BackendError::Status { status, body } => GenerationError::Rejected { status, body },
                            other => GenerationError::Transport {
                                attempts: attempt,
                                message: other.to_string(),
                            },
                        });
                    }
                    last = err.to_string();
                    if attempt < total {
                        thread::sleep(self.config.backoff_initial * 2u32.saturating_pow(attempt - 1));
                    }
                }
            }
        }
        Err(GenerationError::Transport {
            attempts: total,
            message: last,
        })
    }

    pub fn generate_candidate(&self, task: &GenerationTask) -> Result<CandidateRecord, GenerationError> {
        let context_fragment = build_context_fragment(task, &self.cm)?;
        let user = match task.stream {
            Stream::SyntheticDirect => build_direct_prompt(task, self.config.prompt_style)?,
            Stream::RealReverse => build_reverse_prompt(task)?,
        };
        let (reply, attempts) = self.call(task, &user)?;
        if reply.content.len() > self.config.reply_cap_bytes {
            return Err(GenerationError::ReplyTooLarge {
                bytes: reply.content.len(),
                cap: self.config.reply_cap_bytes,
            });
        }
        let cleaned = strip_llm_wrapping(&reply.content).map_err(|_| GenerationError::EmptyReply { attempts })?;
        let (instruction, artifact_text) = match task.stream {
            Stream::SyntheticDirect => (render_instruction(task), cleaned),
            Stream::RealReverse => (cleaned, task.source_yaml.clone().unwrap_or_default()),
        };
        Ok(CandidateRecord {
            id: task.id.clone(),
            instruction,
            context_fragment,
            artifact_text,
            source: task.stream,
            task: task.clone(),
            teacher: TeacherMeta {
                model: reply.model,
                latency_ms: reply.latency_ms,
                attempts,
            },
        })
    }

    /// Runs tasks on a bounded worker pool; results come back in task order.
    pub fn generate_batch(&self, tasks: &[GenerationTask]) -> Vec<Result<CandidateRecord, GenerationError>> {
        let workers = self.config.concurrency.clamp(1, tasks.len().max(1));
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<CandidateRecord, GenerationError>>>> =
            tasks.iter().map(|_| Mutex::new(None)).collect();
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(task) = tasks.get(i) else { break };
                    let result = self.generate_candidate(task);
                    *slots[i].lock().expect("result slot poisoned") = Some(result);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().expect("result slot poisoned").expect("every task ran"))
            .collect()
    }
}
