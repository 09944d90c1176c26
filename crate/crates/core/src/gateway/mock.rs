//! Scripted backend for offline, replayable runs.
//!
//! A script is a JSON array of `{"category", "key", "response"}` entries with
//! an optional `"when"` substring. Lookup for `(category, key)`:
//!
//! 1. Keys are hierarchical on `|`. `a|b|c` is tried, then `a|b`, then `a`.
//! 2. At each level, an entry whose `when` text occurs in the prompt wins over
//!    an unconditional entry; among equals, file order decides.
//!
//! Usage is estimated as ceil(chars / 4) on prompt and response.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    estimate_tokens, Backend, Category, CompletionResult, GatewayError, PromptRequest, TokenUsage,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub category: Category,
    pub key: String,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub when: Option<String>,
}

impl ScriptEntry {
    pub fn new(category: Category, key: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            category,
            key: key.into(),
            response: response.into(),
            when: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    entries: Arc<HashMap<(Category, String), Vec<ScriptEntry>>>,
}

impl MockBackend {
    pub fn new(entries: impl IntoIterator<Item = ScriptEntry>) -> Self {
        let mut map: HashMap<(Category, String), Vec<ScriptEntry>> = HashMap::new();
        for entry in entries {
            map.entry((entry.category, entry.key.clone()))
                .or_default()
                .push(entry);
        }
        Self {
            entries: Arc::new(map),
        }
    }

    pub fn from_json(json: &str) -> Result<Self, GatewayError> {
        let entries: Vec<ScriptEntry> =
            serde_json::from_str(json).map_err(|e| GatewayError::ScriptLoad(e.to_string()))?;
        Ok(Self::new(entries))
    }

    /// Loads and concatenates script files in order.
    pub fn from_files<P: AsRef<Path>>(paths: &[P]) -> Result<Self, GatewayError> {
        let mut all = Vec::new();
        for path in paths {
            let path = path.as_ref();
            let text = std::fs::read_to_string(path)
                .map_err(|e| GatewayError::ScriptLoad(format!("{}: {e}", path.display())))?;
            let entries: Vec<ScriptEntry> = serde_json::from_str(&text)
                .map_err(|e| GatewayError::ScriptLoad(format!("{}: {e}", path.display())))?;
            all.extend(entries);
        }
        Ok(Self::new(all))
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn lookup(&self, category: Category, key: &str, prompt: &str) -> Option<&ScriptEntry> {
        let mut candidate = key;
        loop {
            if let Some(entries) = self.entries.get(&(category, candidate.to_string())) {
                let conditional = entries
                    .iter()
                    .find(|e| e.when.as_deref().is_some_and(|w| prompt.contains(w)));
                if let Some(hit) = conditional.or_else(|| entries.iter().find(|e| e.when.is_none()))
                {
                    return Some(hit);
                }
            }
            candidate = &candidate[..candidate.rfind('|')?];
        }
    }
}

impl Backend for MockBackend {
    fn complete(&self, request: &PromptRequest) -> Result<CompletionResult, GatewayError> {
        let entry = self
            .lookup(request.category, &request.scenario_key, &request.prompt)
            .ok_or_else(|| GatewayError::ScriptMiss {
                category: request.category,
                key: request.scenario_key.clone(),
            })?;
        Ok(CompletionResult {
            text: entry.response.clone(),
            usage: TokenUsage {
                prompt_tokens: estimate_tokens(&request.prompt).max(1),
                completion_tokens: estimate_tokens(&entry.response),
                category: request.category,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::Gateway;

    fn req(category: Category, key: &str, prompt: &str) -> PromptRequest {
        PromptRequest::new(category, prompt).key(key)
    }

    #[test]
    fn scripted_usage_from_fixture_lengths() {
        // 400-char prompt, 120-char reply: ceil(400/4) = 100, ceil(120/4) = 30.
        let reply = "r".repeat(120);
        let mock = MockBackend::new([ScriptEntry::new(
            Category::PlanDecomposition,
            "make coffee",
            reply.clone(),
        )]);
        let out = mock
            .complete(&req(
                Category::PlanDecomposition,
                "make coffee",
                &"p".repeat(400),
            ))
            .unwrap();
        assert_eq!(out.text, reply);
        assert_eq!(out.usage.prompt_tokens, 100);
        assert_eq!(out.usage.completion_tokens, 30);
    }

    #[test]
    fn missing_entry_is_script_miss() {
        let mock = MockBackend::new([ScriptEntry::new(Category::Critic, "x", "yes")]);
        let err = mock
            .complete(&req(Category::PlanGeneration, "x", "prompt"))
            .unwrap_err();
        assert!(matches!(
            err,
            GatewayError::ScriptMiss {
                category: Category::PlanGeneration,
                ..
            }
        ));
    }

    #[test]
    fn hierarchical_key_fallback() {
        let mock = MockBackend::new([
            ScriptEntry::new(Category::DialogueTurn, "KM|ML", "generic"),
            ScriptEntry::new(Category::DialogueTurn, "KM|ML|t1", "turn one"),
        ]);
        let text = |k: &str| {
            mock.complete(&req(Category::DialogueTurn, k, "p"))
                .unwrap()
                .text
        };
        assert_eq!(text("KM|ML|t1|d0"), "turn one");
        assert_eq!(text("KM|ML|t2"), "generic");
        assert!(mock
            .complete(&req(Category::DialogueTurn, "KM", "p"))
            .is_err());
    }

    #[test]
    fn conditional_entry_wins_when_prompt_matches() {
        let mut special = ScriptEntry::new(Category::PlanGeneration, "KM|lunch", "party chat");
        special.when = Some("Valentine".into());
        let mock = MockBackend::new([
            ScriptEntry::new(Category::PlanGeneration, "KM|lunch", "plain lunch"),
            special,
        ]);
        let text = |p: &str| {
            mock.complete(&req(Category::PlanGeneration, "KM|lunch", p))
                .unwrap()
                .text
        };
        assert_eq!(text("nothing special"), "plain lunch");
        assert_eq!(text("thinking about the Valentine party"), "party chat");
    }

    #[test]
    fn loads_json_script() {
        let mock = MockBackend::from_json(
            r#"[{"category":"critic","key":"watch TV|1","response":"yes"}]"#,
        )
        .unwrap();
        assert_eq!(mock.len(), 1);
        assert!(MockBackend::from_json("{not json").is_err());
    }

    #[test]
    fn mock_is_deterministic_and_monotone_in_prompt_length() {
        let gw = Gateway::new(MockBackend::new([ScriptEntry::new(
            Category::Critic,
            "k",
            "no",
        )]));
        let a = gw
            .complete(&req(Category::Critic, "k", "same prompt"))
            .unwrap();
        let b = gw
            .complete(&req(Category::Critic, "k", "same prompt"))
            .unwrap();
        assert_eq!(a, b);
        let mut last = 0;
        for n in 1..40 {
            let out = gw
                .complete(&req(Category::Critic, "k", &"z".repeat(n)))
                .unwrap();
            assert!(out.usage.prompt_tokens >= last);
            last = out.usage.prompt_tokens;
        }
    }
}
