//! Remote judge clients.
//!
//! The LLM judge speaks an OpenAI-compatible chat-completions protocol with
//! strict structured-output mode (`response_format.json_schema`,
//! `strict: true`); the NLI judge is a plain JSON scoring endpoint. Both are
//! thin adapters over the [`LlmJudge`]/[`NliBackend`] traits so other wire
//! protocols can be added without touching the checker.
//!
//! Failure policy: transport errors and non-2xx statuses are retried up to
//! `max_retries` times and then surface as [`JudgeError::Unavailable`].
//! A response that arrives but violates the schema is retried once and then
//! also treated as unavailable, so the affected step is marked unchecked
//! rather than poisoning the run.

use super::prompt::{
    build_entailment_prompt, build_judge_prompt, entailment_response_schema,
    judge_response_schema, SYSTEM_PROMPT,
};
use super::{
    JudgeConfig, JudgeError, LlmEntailmentRequest, LlmEntailmentResponse, LlmJudge,
    LlmJudgeRequest, LlmJudgeResponse, NliBackend,
};
use serde_json::json;
use std::time::Duration;

/// OpenAI-compatible chat-completions judge.
pub struct HttpLlmJudge {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: Option<String>,
    model_name: String,
    max_retries: u32,
}

impl HttpLlmJudge {
    pub fn new(config: &JudgeConfig) -> Result<Self, JudgeError> {
        config.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| JudgeError::Unavailable(format!("cannot build HTTP client: {e}")))?;
        Ok(HttpLlmJudge {
            client,
            endpoint: config.endpoint.clone(),
            api_key: config.api_key.clone(),
            model_name: config.model_name.clone(),
            max_retries: config.max_retries,
        })
    }

    /// POST the chat body, retrying transport-level failures, and return the
    /// assistant message content.
    fn post_chat(&self, body: &serde_json::Value) -> Result<String, JudgeError> {
        let mut last_err = String::new();
        for _ in 0..=self.max_retries {
            let mut req = self.client.post(&self.endpoint).json(body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            match req.send() {
                Ok(resp) if resp.status().is_success() => {
                    match resp.json::<serde_json::Value>() {
                        Ok(v) => {
                            if let Some(content) =
                                v["choices"][0]["message"]["content"].as_str()
                            {
                                return Ok(content.to_string());
                            }
                            last_err = "response has no choices[0].message.content".into();
                        }
                        Err(e) => last_err = format!("unparseable response body: {e}"),
                    }
                }
                Ok(resp) => last_err = format!("HTTP {}", resp.status()),
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(JudgeError::Unavailable(format!(
            "{} after {} attempts: {last_err}",
            self.endpoint,
            self.max_retries + 1
        )))
    }

    /// Run one structured call, retrying a schema violation exactly once.
    fn structured_call<T, F>(&self, body: &serde_json::Value, parse: F) -> Result<T, JudgeError>
    where
        F: Fn(&str) -> Result<T, JudgeError>,
    {
        let mut violation = String::new();
        for _ in 0..2 {
            let content = self.post_chat(body)?;
            match parse(&content) {
                Ok(v) => return Ok(v),
                Err(e) => violation = e.to_string(),
            }
        }
        Err(JudgeError::Unavailable(format!(
            "schema violation persisted after retry: {violation}"
        )))
    }
}

impl LlmJudge for HttpLlmJudge {
    fn backend_id(&self) -> String {
        format!("openai-chat:{}", self.endpoint)
    }

    fn judge_step(&self, req: &LlmJudgeRequest) -> Result<LlmJudgeResponse, JudgeError> {
        let body = json!({
            "model": self.model_name,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": build_judge_prompt(req)},
            ],
            "response_format": {"type": "json_schema", "json_schema": judge_response_schema()},
        });
        self.structured_call(&body, |content| {
            let resp: LlmJudgeResponse = serde_json::from_str(content)
                .map_err(|e| JudgeError::SchemaViolation(format!("bad judgment JSON: {e}")))?;
            resp.validate()?;
            Ok(resp)
        })
    }

    fn judge_entailment(
        &self,
        req: &LlmEntailmentRequest,
    ) -> Result<LlmEntailmentResponse, JudgeError> {
        let body = json!({
            "model": self.model_name,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": build_entailment_prompt(req)},
            ],
            "response_format": {"type": "json_schema", "json_schema": entailment_response_schema()},
        });
        self.structured_call(&body, |content| {
            let resp: LlmEntailmentResponse = serde_json::from_str(content)
                .map_err(|e| JudgeError::SchemaViolation(format!("bad entailment JSON: {e}")))?;
            resp.validate()?;
            Ok(resp)
        })
    }
}

/// HTTP NLI scorer: `POST {premise, hypothesis, model}` returning
/// `{"scores": [s0, s1, s2]}` in the checkpoint's native order.
pub struct HttpNli {
    client: reqwest::blocking::Client,
    endpoint: String,
    model_name: String,
    max_retries: u32,
}

impl HttpNli {
    pub fn new(config: &JudgeConfig) -> Result<Self, JudgeError> {
        config.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| JudgeError::Unavailable(format!("cannot build HTTP client: {e}")))?;
        Ok(HttpNli {
            client,
            endpoint: config.nli_endpoint.clone(),
            model_name: config.nli_model_name.clone(),
            max_retries: config.max_retries,
        })
    }
}

impl NliBackend for HttpNli {
    fn backend_id(&self) -> String {
        format!("http-nli:{}", self.endpoint)
    }

    fn raw_scores(&self, premise: &str, hypothesis: &str) -> Result<[f64; 3], JudgeError> {
        let body = json!({
            "premise": premise,
            "hypothesis": hypothesis,
            "model": self.model_name,
        });
        let mut last_err = String::new();
        for _ in 0..=self.max_retries {
            match self.client.post(&self.endpoint).json(&body).send() {
                Ok(resp) if resp.status().is_success() => {
                    match resp.json::<serde_json::Value>() {
                        Ok(v) => {
                            let scores = v["scores"].as_array().and_then(|a| {
                                if a.len() == 3 {
                                    let mut out = [0.0; 3];
                                    for (i, s) in a.iter().enumerate() {
                                        out[i] = s.as_f64()?;
                                    }
                                    Some(out)
                                } else {
                                    None
                                }
                            });
                            match scores {
                                Some(s) => return Ok(s),
                                None => last_err = format!("malformed scores payload: {v}"),
                            }
                        }
                        Err(e) => last_err = format!("unparseable response body: {e}"),
                    }
                }
                Ok(resp) => last_err = format!("HTTP {}", resp.status()),
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(JudgeError::Unavailable(format!(
            "{} after {} attempts: {last_err}",
            self.endpoint,
            self.max_retries + 1
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judge::scripted::canned;
    use crate::judge::RequestPurpose;
    use crate::trace::StepKind;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    /// Serve `responses` (status line + JSON body) one per connection, then
    /// stop. Returns the endpoint URL and the join handle collecting the raw
    /// request texts.
    fn mock_server(
        responses: Vec<(u16, String)>,
    ) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = Vec::new();
                let mut chunk = [0u8; 4096];
                // Read headers, then exactly Content-Length body bytes.
                let (header_end, content_length) = loop {
                    let n = stream.read(&mut chunk).unwrap();
                    buf.extend_from_slice(&chunk[..n]);
                    let text = String::from_utf8_lossy(&buf);
                    if let Some(pos) = text.find("\r\n\r\n") {
                        let cl = text
                            .lines()
                            .find_map(|l| {
                                let (k, v) = l.split_once(':')?;
                                k.eq_ignore_ascii_case("content-length")
                                    .then(|| v.trim().parse::<usize>().ok())?
                            })
                            .unwrap_or(0);
                        break (pos + 4, cl);
                    }
                };
                while buf.len() < header_end + content_length {
                    let n = stream.read(&mut chunk).unwrap();
                    buf.extend_from_slice(&chunk[..n]);
                }
                seen.push(String::from_utf8_lossy(&buf).to_string());
                let reason = if status == 200 { "OK" } else { "Error" };
                let resp = format!(
                    "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(resp.as_bytes()).unwrap();
            }
            seen
        });
        (format!("http://{addr}"), handle)
    }

    fn chat_body_with(content: &str) -> String {
        serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": content}}]
        })
        .to_string()
    }

    fn config_for(endpoint: &str, retries: u32) -> JudgeConfig {
        JudgeConfig {
            endpoint: endpoint.to_string(),
            nli_endpoint: endpoint.to_string(),
            max_retries: retries,
            timeout_secs: 5,
            ..JudgeConfig::default()
        }
    }

    fn sample_request() -> LlmJudgeRequest {
        LlmJudgeRequest {
            purpose: RequestPurpose::StageAbc,
            question: "where is the capital?".into(),
            step_index: 1,
            step_kind: StepKind::Inference,
            claim: "the capital is Whitehorse".into(),
            query: Some("yukon capital".into()),
            prev_step_summaries: vec![],
            own_evidence: vec![],
            prior_evidence: vec![],
        }
    }

    #[test]
    fn judge_step_round_trip() {
        let canned_json = serde_json::to_string(&canned::on_target_with_quote(
            "terminal handled 294,000 passengers",
        ))
        .unwrap();
        let (endpoint, server) = mock_server(vec![(200, chat_body_with(&canned_json))]);
        let judge = HttpLlmJudge::new(&config_for(&endpoint, 0)).unwrap();
        let resp = judge.judge_step(&sample_request()).unwrap();
        assert!(resp.quote_search.evidence_quote.contains("294,000"));

        let requests = server.join().unwrap();
        assert_eq!(requests.len(), 1);
        let body: serde_json::Value =
            serde_json::from_str(&requests[0][requests[0].find("\r\n\r\n").unwrap() + 4..])
                .unwrap();
        assert_eq!(body["temperature"], 0);
        assert_eq!(body["response_format"]["type"], "json_schema");
        assert_eq!(body["response_format"]["json_schema"]["strict"], true);
        assert!(body["messages"][1]["content"]
            .as_str()
            .unwrap()
            .contains("SUBQUESTION ALIGNMENT"));
    }

    #[test]
    fn transport_errors_are_retried_then_unavailable() {
        let good = chat_body_with(
            &serde_json::to_string(&canned::on_target_with_quote("a span")).unwrap(),
        );
        // One 500 followed by a 200: retry succeeds.
        let (endpoint, server) =
            mock_server(vec![(500, "{}".into()), (200, good.clone())]);
        let judge = HttpLlmJudge::new(&config_for(&endpoint, 1)).unwrap();
        assert!(judge.judge_step(&sample_request()).is_ok());
        assert_eq!(server.join().unwrap().len(), 2);

        // Retries exhausted: Unavailable.
        let (endpoint, server) = mock_server(vec![(500, "{}".into()), (500, "{}".into())]);
        let judge = HttpLlmJudge::new(&config_for(&endpoint, 1)).unwrap();
        let err = judge.judge_step(&sample_request()).unwrap_err();
        assert!(matches!(err, JudgeError::Unavailable(_)), "{err}");
        server.join().unwrap();
    }

    #[test]
    fn schema_violation_is_retried_once() {
        let good = chat_body_with(
            &serde_json::to_string(&canned::on_target_with_quote("a span")).unwrap(),
        );
        // First answer parses but violates an invariant; second is valid.
        let mut invalid = canned::on_target_with_quote("a span");
        invalid.quote_search.entity_match = false; // found_quote stays true: invalid
        let bad = chat_body_with(&serde_json::to_string(&invalid).unwrap());
        let (endpoint, server) = mock_server(vec![(200, bad.clone()), (200, good)]);
        let judge = HttpLlmJudge::new(&config_for(&endpoint, 0)).unwrap();
        assert!(judge.judge_step(&sample_request()).is_ok());
        assert_eq!(server.join().unwrap().len(), 2);

        // Two violations in a row: Unavailable, not SchemaViolation.
        let (endpoint, server) = mock_server(vec![(200, bad.clone()), (200, bad)]);
        let judge = HttpLlmJudge::new(&config_for(&endpoint, 0)).unwrap();
        let err = judge.judge_step(&sample_request()).unwrap_err();
        assert!(matches!(err, JudgeError::Unavailable(_)), "{err}");
        server.join().unwrap();
    }

    #[test]
    fn entailment_round_trip() {
        let content = serde_json::json!({"label": "neutral", "confidence": 0.73}).to_string();
        let (endpoint, server) = mock_server(vec![(200, chat_body_with(&content))]);
        let judge = HttpLlmJudge::new(&config_for(&endpoint, 0)).unwrap();
        let resp = judge
            .judge_entailment(&LlmEntailmentRequest {
                question: "q".into(),
                premise: "the quote".into(),
                hypothesis: "the claim".into(),
            })
            .unwrap();
        assert_eq!(resp.label, crate::judge::NliLabel::Neutral);
        assert_eq!(resp.confidence, Some(0.73));
        server.join().unwrap();
    }

    #[test]
    fn nli_round_trip_and_shape_check() {
        let (endpoint, server) = mock_server(vec![
            (200, serde_json::json!({"scores": [0.1, 0.2, 0.7]}).to_string()),
        ]);
        let nli = HttpNli::new(&config_for(&endpoint, 0)).unwrap();
        let scores = nli.raw_scores("p", "h").unwrap();
        assert_eq!(scores, [0.1, 0.2, 0.7]);
        let requests = server.join().unwrap();
        let body: serde_json::Value =
            serde_json::from_str(&requests[0][requests[0].find("\r\n\r\n").unwrap() + 4..])
                .unwrap();
        assert_eq!(body["premise"], "p");
        assert_eq!(body["model"], "deberta-v3-nli");

        // Wrong shape is retried and then unavailable.
        let (endpoint, server) = mock_server(vec![
            (200, serde_json::json!({"scores": [0.5, 0.5]}).to_string()),
            (200, serde_json::json!({"scores": [0.5, 0.5]}).to_string()),
        ]);
        let nli = HttpNli::new(&config_for(&endpoint, 1)).unwrap();
        let err = nli.raw_scores("p", "h").unwrap_err();
        assert!(matches!(err, JudgeError::Unavailable(_)));
        server.join().unwrap();
    }
}
