//! Parsing of evaluator replies of the form `{"score": .., "reason": ..}`.

use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("no JSON object with \"score\" and \"reason\" found")]
    ParseError,
    #[error("score {0} outside [1, 5]")]
    RangeError(f64),
}

/// Extracts the first JSON object carrying both `score` and `reason`.
/// Fractional scores are accepted.
pub fn parse_score_response(text: &str) -> Result<(f64, String), ScoreError> {
    for (start, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        let Some(Ok(Value::Object(obj))) = stream.next() else {
            continue;
        };
        let (Some(score), Some(reason)) = (obj.get("score"), obj.get("reason")) else {
            continue;
        };
        let Some(score) = score
            .as_f64()
            .or_else(|| score.as_str().and_then(|s| s.trim().parse().ok()))
        else {
            continue;
        };
        let reason = match reason {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        if !(1.0..=5.0).contains(&score) {
            return Err(ScoreError::RangeError(score));
        }
        return Ok((score, reason));
    }
    Err(ScoreError::ParseError)
}
