use std::time::Duration;

use serde_json::{json, Value};
use ureq::Agent;

use super::{ChatBackend, ChatRequest, ChatResponse, GatewayError, Usage};
use crate::model::count_tokens;

/// Blocking chat-completions client.
///
/// Speaks the common `POST {base_url}/chat/completions` wire shape: the
/// request carries `model`, `messages`, `temperature`, and optionally
/// `max_tokens`; the answer is read from `choices[0].message.content`.
/// HTTP statuses map onto retry classes: 401/403 are auth failures (never
/// retried), 408/429/5xx and transport-level failures are retryable, other
/// 4xx are contract violations and fail fast.
pub struct HttpBackend {
    base_url: String,
    api_key: Option<String>,
    agent: Agent,
}

impl HttpBackend {
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let config = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build();
        HttpBackend {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            agent: config.new_agent(),
        }
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url)
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let mut body = json!({
            "model": request.model,
            "messages": request.messages,
            "temperature": request.temperature,
        });
        if let Some(max) = request.max_tokens {
            body["max_tokens"] = json!(max);
        }

        let mut req = self.agent.post(self.endpoint());
        if let Some(key) = &self.api_key {
            req = req.header("authorization", format!("Bearer {key}"));
        }
        let mut response = req.send_json(&body).map_err(classify_send_error)?;

        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| GatewayError::Transport(format!("reading response body: {e}")))?;
        match status {
            200..=299 => parse_completion(request, &text),
            401 | 403 => Err(GatewayError::Auth(format!("status {status}: {}", snippet(&text)))),
            408 | 429 | 500..=599 => {
                Err(GatewayError::Transport(format!("status {status}: {}", snippet(&text))))
            }
            _ => Err(GatewayError::Protocol(format!("status {status}: {}", snippet(&text)))),
        }
    }
}

fn classify_send_error(e: ureq::Error) -> GatewayError {
    match e {
        ureq::Error::BadUri(detail) => GatewayError::Protocol(format!("bad endpoint url: {detail}")),
        ureq::Error::Http(detail) => GatewayError::Protocol(format!("request build failed: {detail}")),
        other => GatewayError::Transport(other.to_string()),
    }
}

fn parse_completion(request: &ChatRequest, text: &str) -> Result<ChatResponse, GatewayError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| GatewayError::Protocol(format!("response is not JSON: {e}")))?;
    let content = value["choices"][0]["message"]["content"]
        .as_str()
        .ok_or_else(|| {
            GatewayError::Protocol(format!(
                "response lacks choices[0].message.content: {}",
                snippet(text)
            ))
        })?
        .to_string();
    let finish_reason = value["choices"][0]["finish_reason"].as_str().map(String::from);
    let usage = Usage {
        prompt_tokens: value["usage"]["prompt_tokens"]
            .as_u64()
            .map(|n| n as usize)
            .unwrap_or_else(|| count_tokens(&request.rendered())),
        completion_tokens: value["usage"]["completion_tokens"]
            .as_u64()
            .map(|n| n as usize)
            .unwrap_or_else(|| count_tokens(&content)),
    };
    Ok(ChatResponse { content, usage, finish_reason })
}

fn snippet(text: &str) -> String {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return "<empty body>".to_string();
    }
    trimmed.chars().take(200).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn completion_parses_content_and_usage() {
        let req = ChatRequest::user("m", "two tokens");
        let text = r#"{
            "choices": [{"message": {"content": "answer"}, "finish_reason": "stop"}],
            "usage": {"prompt_tokens": 12, "completion_tokens": 7}
        }"#;
        let resp = parse_completion(&req, text).unwrap();
        assert_eq!(resp.content, "answer");
        assert_eq!(resp.usage.prompt_tokens, 12);
        assert_eq!(resp.usage.completion_tokens, 7);
        assert_eq!(resp.finish_reason.as_deref(), Some("stop"));
    }

    #[test]
    fn missing_usage_falls_back_to_token_counting() {
        let req = ChatRequest::user("m", "three token prompt");
        let text = r#"{"choices": [{"message": {"content": "a b"}}]}"#;
        let resp = parse_completion(&req, text).unwrap();
        assert_eq!(resp.usage.prompt_tokens, 3);
        assert_eq!(resp.usage.completion_tokens, 2);
    }

    #[test]
    fn malformed_payload_is_protocol_error() {
        let req = ChatRequest::user("m", "x");
        assert!(matches!(
            parse_completion(&req, "not json"),
            Err(GatewayError::Protocol(_))
        ));
        assert!(matches!(
            parse_completion(&req, r#"{"choices": []}"#),
            Err(GatewayError::Protocol(_))
        ));
    }
}
