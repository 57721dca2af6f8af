//! Local HTTP server wrapping any in-process services, so the HTTP clients
//! and end-to-end runs can be exercised without a live model endpoint.

use std::collections::VecDeque;
use std::io::Read;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde_json::{json, Value};

use super::{
    CompletionRequest, CompletionService, GatewayError, NliRequest, NliService, RewardRequest,
    RewardService,
};

/// Handle to a running mock gateway server; shuts down on drop.
pub struct MockServer {
    base_url: String,
    stop: Arc<AtomicBool>,
    completion_calls: Arc<AtomicU64>,
    requests_seen: Arc<AtomicU64>,
    faults: Arc<Mutex<VecDeque<u16>>>,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl MockServer {
    /// Bind to an ephemeral localhost port and serve the three endpoints.
    pub fn spawn(
        completion: Arc<dyn CompletionService>,
        nli: Arc<dyn NliService>,
        reward: Arc<dyn RewardService>,
    ) -> Result<MockServer, GatewayError> {
        let server = tiny_http::Server::http("127.0.0.1:0")
            .map_err(|e| GatewayError::BadEndpoint(format!("bind failed: {e}")))?;
        let base_url = match server.server_addr() {
            tiny_http::ListenAddr::IP(addr) => format!("http://{addr}"),
            _ => return Err(GatewayError::BadEndpoint("non-IP listener".into())),
        };
        let stop = Arc::new(AtomicBool::new(false));
        let completion_calls = Arc::new(AtomicU64::new(0));
        let requests_seen = Arc::new(AtomicU64::new(0));
        let faults: Arc<Mutex<VecDeque<u16>>> = Arc::new(Mutex::new(VecDeque::new()));

        let handle = {
            let stop = Arc::clone(&stop);
            let completion_calls = Arc::clone(&completion_calls);
            let requests_seen = Arc::clone(&requests_seen);
            let faults = Arc::clone(&faults);
            std::thread::spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    let mut request = match server.recv_timeout(Duration::from_millis(50)) {
                        Ok(Some(r)) => r,
                        Ok(None) => continue,
                        Err(_) => break,
                    };
                    requests_seen.fetch_add(1, Ordering::SeqCst);
                    if let Some(status) = faults.lock().unwrap().pop_front() {
                        let _ = request.respond(
                            tiny_http::Response::from_string("injected fault")
                                .with_status_code(status as u32 as u16),
                        );
                        continue;
                    }
                    let (status, body) = route(
                        &completion,
                        &nli,
                        &reward,
                        &completion_calls,
                        request.url().to_owned(),
                        read_body(request.as_reader()),
                    );
                    let header = tiny_http::Header::from_bytes(
                        &b"Content-Type"[..],
                        &b"application/json"[..],
                    )
                    .expect("static header");
                    let _ = request.respond(
                        tiny_http::Response::from_string(body)
                            .with_status_code(status)
                            .with_header(header),
                    );
                }
            })
        };

        Ok(MockServer {
            base_url,
            stop,
            completion_calls,
            requests_seen,
            faults,
            handle: Some(handle),
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    /// Queue HTTP statuses to return verbatim for the next requests.
    pub fn inject_faults(&self, statuses: &[u16]) {
        self.faults.lock().unwrap().extend(statuses.iter().copied());
    }

    pub fn completion_calls(&self) -> u64 {
        self.completion_calls.load(Ordering::SeqCst)
    }

    pub fn requests_seen(&self) -> u64 {
        self.requests_seen.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn read_body(reader: &mut dyn Read) -> String {
    let mut body = String::new();
    let _ = reader.read_to_string(&mut body);
    body
}

fn route(
    completion: &Arc<dyn CompletionService>,
    nli: &Arc<dyn NliService>,
    reward: &Arc<dyn RewardService>,
    completion_calls: &AtomicU64,
    url: String,
    body: String,
) -> (u16, String) {
    let parsed: Value = match serde_json::from_str(&body) {
        Ok(v) => v,
        Err(e) => return (400, json!({"error": format!("bad json: {e}")}).to_string()),
    };
    match url.as_str() {
        "/v1/completions" => {
            completion_calls.fetch_add(1, Ordering::SeqCst);
            let req = CompletionRequest {
                prompt: parsed.get("prompt").and_then(Value::as_str).unwrap_or("").to_owned(),
                max_new_tokens: parsed.get("max_tokens").and_then(Value::as_u64).unwrap_or(1024)
                    as u32,
                temperature: parsed.get("temperature").and_then(Value::as_f64).unwrap_or(0.0),
                stop_sequences: parsed
                    .get("stop")
                    .and_then(Value::as_array)
                    .map(|a| {
                        a.iter().filter_map(Value::as_str).map(str::to_owned).collect()
                    })
                    .unwrap_or_default(),
            };
            match completion.complete(&req) {
                Ok(text) => (200, json!({"choices": [{"text": text}]}).to_string()),
                Err(e) => error_response(e),
            }
        }
        "/score/nli" => {
            let req = NliRequest {
                premise: parsed.get("premise").and_then(Value::as_str).unwrap_or("").to_owned(),
                hypothesis: parsed
                    .get("hypothesis")
                    .and_then(Value::as_str)
                    .unwrap_or("")
                    .to_owned(),
            };
            match nli.score_nli(&req) {
                Ok(score) => (200, json!({"entailment": score.value}).to_string()),
                Err(e) => error_response(e),
            }
        }
        "/score/reward" => {
            let req = RewardRequest {
                instruction: parsed
                    .get("instruction")
                    .and_then(Value::as_str)
                    .unwrap_or("")
                    .to_owned(),
                response: parsed.get("response").and_then(Value::as_str).unwrap_or("").to_owned(),
            };
            match reward.score_reward(&req) {
                Ok(score) => (200, json!({"score": score.value}).to_string()),
                Err(e) => error_response(e),
            }
        }
        other => (404, json!({"error": format!("no such endpoint: {other}")}).to_string()),
    }
}

fn error_response(err: GatewayError) -> (u16, String) {
    let status = match &err {
        GatewayError::InvalidRequest(_) => 400,
        GatewayError::MockMiss => 404,
        _ => 500,
    };
    (status, json!({"error": err.to_string()}).to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::mock::{ConstNli, ConstReward, TableCompletion};
    use crate::gateway::{HttpCompletionClient, HttpNliClient, HttpRewardClient, RetryPolicy, ScoreTransform};
    use std::time::Duration;

    fn fast_retry() -> RetryPolicy {
        RetryPolicy {
            base: Duration::from_millis(1),
            factor: 1.0,
            max_attempts: 5,
        }
    }

    fn spawn_basic() -> MockServer {
        MockServer::spawn(
            Arc::new(TableCompletion::from_prompts([("ping", " pong")])),
            Arc::new(ConstNli(0.75)),
            Arc::new(ConstReward(0.25)),
        )
        .unwrap()
    }

    #[test]
    fn serves_all_three_endpoints() {
        let server = spawn_basic();
        let completion = HttpCompletionClient::new(server.base_url(), "m", None, fast_retry());
        let got = completion
            .complete(&CompletionRequest {
                prompt: "ping".into(),
                max_new_tokens: 8,
                temperature: 0.0,
                stop_sequences: vec![],
            })
            .unwrap();
        assert_eq!(got, " pong");

        let nli = HttpNliClient::new(server.base_url(), "m", None, fast_retry(), ScoreTransform::Identity);
        let score = nli
            .score_nli(&NliRequest { premise: "a".into(), hypothesis: "b".into() })
            .unwrap();
        assert_eq!(score.value, 0.75);

        let reward =
            HttpRewardClient::new(server.base_url(), "m", None, fast_retry(), ScoreTransform::Identity);
        let score = reward
            .score_reward(&RewardRequest { instruction: "q".into(), response: "r".into() })
            .unwrap();
        assert_eq!(score.value, 0.25);
    }

    #[test]
    fn rate_limit_then_success_retries_through() {
        let server = spawn_basic();
        server.inject_faults(&[429, 429]);
        let completion = HttpCompletionClient::new(server.base_url(), "m", None, fast_retry());
        let got = completion
            .complete(&CompletionRequest {
                prompt: "ping".into(),
                max_new_tokens: 8,
                temperature: 0.0,
                stop_sequences: vec![],
            })
            .unwrap();
        assert_eq!(got, " pong");
        assert_eq!(completion.retries_total(), 2);
        assert_eq!(server.requests_seen(), 3);
    }

    #[test]
    fn persistent_rate_limit_exhausts_the_budget() {
        let server = spawn_basic();
        server.inject_faults(&[429; 10]);
        let completion = HttpCompletionClient::new(
            server.base_url(),
            "m",
            None,
            RetryPolicy { base: Duration::from_millis(1), factor: 1.0, max_attempts: 3 },
        );
        let err = completion
            .complete(&CompletionRequest {
                prompt: "ping".into(),
                max_new_tokens: 8,
                temperature: 0.0,
                stop_sequences: vec![],
            })
            .unwrap_err();
        assert!(matches!(err, GatewayError::EndpointError { status: 429, .. }));
        assert_eq!(server.requests_seen(), 3);
    }

    #[test]
    fn unreachable_host_times_out_after_budget() {
        // nothing listens on this port
        let completion = HttpCompletionClient::new(
            "http://127.0.0.1:9",
            "m",
            None,
            RetryPolicy { base: Duration::from_millis(1), factor: 1.0, max_attempts: 3 },
        );
        let err = completion
            .complete(&CompletionRequest {
                prompt: "ping".into(),
                max_new_tokens: 8,
                temperature: 0.0,
                stop_sequences: vec![],
            })
            .unwrap_err();
        assert!(matches!(err, GatewayError::Timeout { attempts: 3 }));
    }
}
