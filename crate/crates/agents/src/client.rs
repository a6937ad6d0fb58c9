//! Chat backends. The HTTP client speaks the common chat-completion JSON shape.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::ClientError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

pub trait ChatClient {
    fn send(&mut self, messages: &[Message], temperature: f64) -> Result<String, ClientError>;
}

impl<C: ChatClient + ?Sized> ChatClient for &mut C {
    fn send(&mut self, messages: &[Message], temperature: f64) -> Result<String, ClientError> {
        (**self).send(messages, temperature)
    }
}

impl<C: ChatClient + ?Sized> ChatClient for Box<C> {
    fn send(&mut self, messages: &[Message], temperature: f64) -> Result<String, ClientError> {
        (**self).send(messages, temperature)
    }
}

pub const ENV_URL: &str = "ADVERSIM_LLM_URL";
pub const ENV_MODEL: &str = "ADVERSIM_LLM_MODEL";
pub const ENV_KEY: &str = "ADVERSIM_LLM_KEY";

/// Blocking chat-completion client. One request in flight at a time.
pub struct HttpClient {
    url: String,
    model: String,
    key: Option<String>,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct Request<'a> {
    model: &'a str,
    messages: &'a [Message],
    temperature: f64,
}

impl HttpClient {
    pub fn new(url: impl Into<String>, model: impl Into<String>, key: Option<String>) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(300)))
            .http_status_as_error(false)
            .build();
        Self {
            url: url.into(),
            model: model.into(),
            key,
            agent: config.into(),
        }
    }

    /// Reads endpoint, model and optional key from the environment.
    pub fn from_env() -> Result<Self, ClientError> {
        let var = |name: &str| std::env::var(name).ok().filter(|v| !v.is_empty());
        let url = var(ENV_URL).ok_or_else(|| ClientError::Config(format!("{ENV_URL} is not set")))?;
        let model = var(ENV_MODEL).ok_or_else(|| ClientError::Config(format!("{ENV_MODEL} is not set")))?;
        Ok(Self::new(url, model, var(ENV_KEY)))
    }
}

impl ChatClient for HttpClient {
    fn send(&mut self, messages: &[Message], temperature: f64) -> Result<String, ClientError> {
        let body = Request {
            model: &self.model,
            messages,
            temperature,
        };
        let mut req = self.agent.post(&self.url);
        if let Some(key) = &self.key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(ClientError::Status { status, body: text });
        }
        parse_completion(&text)
    }
}

/// Pulls `choices[0].message.content` out of a completion response.
pub fn parse_completion(text: &str) -> Result<String, ClientError> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| ClientError::Protocol(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_owned)
        .ok_or_else(|| ClientError::Protocol("no choices[0].message.content".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn completion_shape() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"hi"}}]}"#;
        assert_eq!(parse_completion(body).unwrap(), "hi");
        assert!(matches!(parse_completion("{}"), Err(ClientError::Protocol(_))));
    }

    #[test]
    fn unreachable_backend_is_a_transport_error() {
        // Port 9 on localhost is almost never listening.
        let mut c = HttpClient::new("http://127.0.0.1:9/v1/chat/completions", "m", None);
        let err = c.send(&[Message::user("x")], 0.7).unwrap_err();
        assert!(matches!(err, ClientError::Transport(_)), "{err}");
    }
}
