//! OpenAI-compatible chat-completions backend.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{estimate_tokens, Backend, CompletionResult, GatewayError, PromptRequest, TokenUsage};

pub const ENV_URL: &str = "AGA_LLM_URL";
pub const ENV_KEY: &str = "AGA_LLM_KEY";
pub const ENV_MODEL: &str = "AGA_LLM_MODEL";
pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";

#[derive(Debug, Clone)]
pub struct HttpBackend {
    url: String,
    api_key: Option<String>,
    model: String,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(url: impl Into<String>, api_key: Option<String>, model: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            api_key,
            model: model.into(),
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(120))
                .build(),
        }
    }

    /// Reads `AGA_LLM_URL`, `AGA_LLM_KEY` and optionally `AGA_LLM_MODEL`.
    pub fn from_env() -> Result<Self, GatewayError> {
        let url = std::env::var(ENV_URL)
            .map_err(|_| GatewayError::BackendError(format!("{ENV_URL} is not set")))?;
        let key = std::env::var(ENV_KEY).ok();
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| DEFAULT_MODEL.to_string());
        Ok(Self::new(url, key, model))
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    usage: Option<ProviderUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

#[derive(Deserialize)]
struct ProviderUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

impl Backend for HttpBackend {
    fn complete(&self, request: &PromptRequest) -> Result<CompletionResult, GatewayError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "max_tokens": request.max_tokens,
        });
        let mut call = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            call = call.set("Authorization", &format!("Bearer {key}"));
        }
        let response: ChatResponse = call
            .send_json(body)
            .map_err(|e| GatewayError::BackendError(e.to_string()))?
            .into_json()
            .map_err(|e| GatewayError::BackendError(format!("bad response body: {e}")))?;
        let text = response
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| GatewayError::BackendError("response has no choices".into()))?;
        let (prompt_tokens, completion_tokens) = match response.usage {
            Some(u) => (u.prompt_tokens, u.completion_tokens),
            None => {
                log::warn!("provider did not report usage; estimating");
                (estimate_tokens(&request.prompt), estimate_tokens(&text))
            }
        };
        Ok(CompletionResult {
            text,
            usage: TokenUsage {
                prompt_tokens: prompt_tokens.max(1),
                completion_tokens,
                category: request.category,
            },
        })
    }

    fn retryable(&self) -> bool {
        true
    }
}
