//! JSON-over-HTTP clients with exponential-backoff retries.
//!
//! Wire shapes:
//! - `POST {base}/v1/completions` `{model, prompt, max_tokens, temperature,
//!   stop}` → `{choices: [{text}]}`
//! - `POST {base}/score/nli` `{premise, hypothesis}` → `{entailment}`
//! - `POST {base}/score/reward` `{instruction, response}` → `{score}`

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde_json::json;

use super::{
    apply_stop_sequences, CompletionRequest, CompletionService, GatewayError, NliRequest,
    NliService, RewardRequest, RewardService, ScoreResult, ScoreTransform,
};

/// Exponential backoff: wait `base`, then `base*factor`, … between attempts.
/// Retries fire only on timeouts, connection failures, 429, and 5xx.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub base: Duration,
    pub factor: f64,
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            base: Duration::from_secs(1),
            factor: 2.0,
            max_attempts: 5,
        }
    }
}

/// Shared HTTP machinery: agent, auth header, retry loop, retry counter.
struct Transport {
    agent: ureq::Agent,
    api_key: Option<String>,
    retry: RetryPolicy,
    retries_total: AtomicU64,
}

impl Transport {
    fn new(api_key: Option<String>, retry: RetryPolicy, timeout: Duration) -> Transport {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Transport {
            agent,
            api_key,
            retry,
            retries_total: AtomicU64::new(0),
        }
    }

    fn post_json(&self, url: &str, body: &serde_json::Value) -> Result<serde_json::Value, GatewayError> {
        let mut attempt = 0u32;
        let mut delay = self.retry.base;
        loop {
            attempt += 1;
            let mut req = self.agent.post(url);
            if let Some(key) = &self.api_key {
                req = req.header("authorization", &format!("Bearer {key}"));
            }
            match req.send_json(body) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if (200..300).contains(&status) {
                        return resp.body_mut().read_json().map_err(|e| {
                            GatewayError::EndpointError {
                                status,
                                body: format!("unparseable response body: {e}"),
                            }
                        });
                    }
                    let retryable = status == 429 || status >= 500;
                    if !retryable || attempt >= self.retry.max_attempts {
                        let body = resp.body_mut().read_to_string().unwrap_or_default();
                        return Err(GatewayError::EndpointError { status, body });
                    }
                }
                Err(_) => {
                    if attempt >= self.retry.max_attempts {
                        return Err(GatewayError::Timeout { attempts: attempt });
                    }
                }
            }
            self.retries_total.fetch_add(1, Ordering::SeqCst);
            std::thread::sleep(delay);
            delay = delay.mul_f64(self.retry.factor);
        }
    }

    fn retries_total(&self) -> u64 {
        self.retries_total.load(Ordering::SeqCst)
    }
}

/// Append the canonical path unless the configured URL already carries it.
fn endpoint_url(base: &str, path: &str) -> String {
    let trimmed = base.trim_end_matches('/');
    if trimmed.ends_with(path) {
        trimmed.to_owned()
    } else {
        format!("{trimmed}{path}")
    }
}

/// Completion endpoint client.
pub struct HttpCompletionClient {
    transport: Arc<Transport>,
    url: String,
    model_id: String,
}

impl HttpCompletionClient {
    pub fn new(base_url: &str, model_id: &str, api_key: Option<String>, retry: RetryPolicy) -> Self {
        HttpCompletionClient {
            transport: Arc::new(Transport::new(api_key, retry, Duration::from_secs(120))),
            url: endpoint_url(base_url, "/v1/completions"),
            model_id: model_id.to_owned(),
        }
    }

    /// Retries performed since construction, for observability.
    pub fn retries_total(&self) -> u64 {
        self.transport.retries_total()
    }
}

impl CompletionService for HttpCompletionClient {
    fn complete(&self, req: &CompletionRequest) -> Result<String, GatewayError> {
        req.validate()?;
        let body = json!({
            "model": self.model_id,
            "prompt": req.prompt,
            "max_tokens": req.max_new_tokens,
            "temperature": req.temperature,
            "stop": req.stop_sequences,
        });
        let value = self.transport.post_json(&self.url, &body)?;
        let text = value
            .pointer("/choices/0/text")
            .and_then(|t| t.as_str())
            .ok_or_else(|| GatewayError::EndpointError {
                status: 200,
                body: "response missing choices[0].text".into(),
            })?;
        Ok(apply_stop_sequences(text, &req.stop_sequences))
    }
}

/// NLI scoring endpoint client.
pub struct HttpNliClient {
    transport: Arc<Transport>,
    url: String,
    model_id: String,
    transform: ScoreTransform,
}

impl HttpNliClient {
    pub fn new(
        base_url: &str,
        model_id: &str,
        api_key: Option<String>,
        retry: RetryPolicy,
        transform: ScoreTransform,
    ) -> Self {
        HttpNliClient {
            transport: Arc::new(Transport::new(api_key, retry, Duration::from_secs(60))),
            url: endpoint_url(base_url, "/score/nli"),
            model_id: model_id.to_owned(),
            transform,
        }
    }

    pub fn retries_total(&self) -> u64 {
        self.transport.retries_total()
    }
}

impl NliService for HttpNliClient {
    fn score_nli(&self, req: &NliRequest) -> Result<ScoreResult, GatewayError> {
        req.validate()?;
        let started = Instant::now();
        let body = json!({"premise": req.premise, "hypothesis": req.hypothesis});
        let value = self.transport.post_json(&self.url, &body)?;
        let raw = value
            .get("entailment")
            .and_then(|v| v.as_f64())
            .ok_or_else(|| GatewayError::EndpointError {
                status: 200,
                body: "response missing entailment".into(),
            })?;
        Ok(ScoreResult {
            value: self.transform.apply(raw),
            model_id: self.model_id.clone(),
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}

/// Reward scoring endpoint client.
pub struct HttpRewardClient {
    transport: Arc<Transport>,
    url: String,
    model_id: String,
    transform: ScoreTransform,
}

impl HttpRewardClient {
    pub fn new(
        base_url: &str,
        model_id: &str,
        api_key: Option<String>,
        retry: RetryPolicy,
        transform: ScoreTransform,
    ) -> Self {
        HttpRewardClient {
            transport: Arc::new(Transport::new(api_key, retry, Duration::from_secs(60))),
            url: endpoint_url(base_url, "/score/reward"),
            model_id: model_id.to_owned(),
            transform,
        }
    }

    pub fn retries_total(&self) -> u64 {
        self.transport.retries_total()
    }
}

impl RewardService for HttpRewardClient {
    fn score_reward(&self, req: &RewardRequest) -> Result<ScoreResult, GatewayError> {
        req.validate()?;
        let started = Instant::now();
        let body = json!({"instruction": req.instruction, "response": req.response});
        let value = self.transport.post_json(&self.url, &body)?;
        let raw = value
            .get("score")
            .and_then(|v| v.as_f64())
            .ok_or_else(|| GatewayError::EndpointError {
                status: 200,
                body: "response missing score".into(),
            })?;
        Ok(ScoreResult {
            value: self.transform.apply(raw),
            model_id: self.model_id.clone(),
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_url_appends_once() {
        assert_eq!(
            endpoint_url("http://h:1", "/v1/completions"),
            "http://h:1/v1/completions"
        );
        assert_eq!(
            endpoint_url("http://h:1/v1/completions", "/v1/completions"),
            "http://h:1/v1/completions"
        );
        assert_eq!(
            endpoint_url("http://h:1/", "/score/nli"),
            "http://h:1/score/nli"
        );
    }
}
