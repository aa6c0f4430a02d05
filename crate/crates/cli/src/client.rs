use std::time::Duration;

use serde_json::Value;
use ureq::Agent;

use crate::Failure;

/// A response whose body is kept verbatim for `--json` output.
pub struct Reply {
    pub status: u16,
    pub text: String,
}

impl Reply {
    pub fn json(&self) -> Result<Value, Failure> {
        serde_json::from_str(&self.text)
            .map_err(|e| Failure::transport(format!("unparseable response (HTTP {}): {e}", self.status)))
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    /// Converts an error status into a server-reported failure.
    pub fn checked(self) -> Result<Reply, Failure> {
        if self.is_success() {
            return Ok(self);
        }
        let detail = serde_json::from_str::<Value>(&self.text)
            .ok()
            .and_then(|v| describe_error(&v))
            .unwrap_or_else(|| self.text.trim().to_string());
        Err(Failure::server(format!("HTTP {}: {detail}", self.status)))
    }
}

/// Renders `{"error": ...}` or `{"errors": [{field, reason}]}` bodies.
pub fn describe_error(v: &Value) -> Option<String> {
    if let Some(e) = v.get("error").and_then(Value::as_str) {
        return Some(e.to_string());
    }
    let errors = v.get("errors")?.as_array()?;
    Some(
        errors
            .iter()
            .map(|e| {
                let field = e["field"].as_str().unwrap_or("");
                let reason = e["reason"].as_str().unwrap_or("");
                if field.is_empty() {
                    reason.to_string()
                } else {
                    format!("{field}: {reason}")
                }
            })
            .collect::<Vec<_>>()
            .join("; "),
    )
}

pub struct Client {
    base: String,
    agent: Agent,
}

impl Client {
    pub fn new(endpoint: &str) -> Self {
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        Self {
            base: endpoint.trim_end_matches('/').to_string(),
            agent,
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn finish(&self, result: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<Reply, Failure> {
        let mut resp = result.map_err(|e| Failure::transport(format!("{}: {e}", self.base)))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Failure::transport(format!("reading response: {e}")))?;
        Ok(Reply { status, text })
    }

    pub fn get(&self, path: &str) -> Result<Reply, Failure> {
        self.finish(self.agent.get(self.url(path)).call())
    }

    pub fn get_query(&self, path: &str, query: &[(&str, &str)]) -> Result<Reply, Failure> {
        let mut req = self.agent.get(self.url(path));
        for (k, v) in query {
            req = req.query(*k, *v);
        }
        self.finish(req.call())
    }

    pub fn delete(&self, path: &str) -> Result<Reply, Failure> {
        self.finish(self.agent.delete(self.url(path)).call())
    }

    pub fn post(&self, path: &str, body: &Value) -> Result<Reply, Failure> {
        self.finish(self.agent.post(self.url(path)).send_json(body))
    }
}
