//! Content-addressed response cache.
//!
//! Keys are `sha256(backend id, model name, request payload)`; values are the
//! raw response JSON, one file per key. The cache is append-only: an entry,
//! once written, is never mutated (a corrupt entry is the one exception — it
//! is ignored on read and replaced after the call is re-issued). Writes go
//! through a temp file plus atomic rename so concurrent writers of the same
//! key cannot interleave.

use super::{
    JudgeError, LlmEntailmentRequest, LlmEntailmentResponse, LlmJudge, LlmJudgeRequest,
    LlmJudgeResponse, NliBackend,
};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: &Path) -> Result<Self, JudgeError> {
        std::fs::create_dir_all(dir).map_err(|e| {
            JudgeError::Unavailable(format!("cannot create cache dir {}: {e}", dir.display()))
        })?;
        Ok(ResponseCache { dir: dir.to_path_buf() })
    }

    /// Stable key for one request against one backend and model.
    pub fn key(backend_id: &str, model_name: &str, payload: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(backend_id.as_bytes());
        hasher.update([0]);
        hasher.update(model_name.as_bytes());
        hasher.update([0]);
        hasher.update(payload.as_bytes());
        hex::encode(hasher.finalize())
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Stored response for `key`, or `None` when absent or corrupt. A corrupt
    /// entry (unreadable or not valid JSON) is treated as a miss so the call
    /// is re-issued.
    pub fn get(&self, key: &str) -> Option<String> {
        let text = std::fs::read_to_string(self.path_for(key)).ok()?;
        if serde_json::from_str::<serde_json::Value>(&text).is_err() {
            return None;
        }
        Some(text)
    }

    /// Store `value` under `key`. Existing valid entries are left untouched;
    /// failures are swallowed (the cache is best-effort and never fails a
    /// judged run).
    pub fn put(&self, key: &str, value: &str) {
        let path = self.path_for(key);
        if self.get(key).is_some() {
            return;
        }
        let tmp = self.dir.join(format!(".{key}.tmp-{}", std::process::id()));
        if std::fs::write(&tmp, value).is_ok() {
            let _ = std::fs::rename(&tmp, &path);
        }
    }
}

fn payload<T: Serialize>(kind: &str, req: &T) -> String {
    serde_json::json!({ "kind": kind, "request": req }).to_string()
}

/// Cache wrapper around any [`LlmJudge`]. Only successful, schema-valid
/// responses are stored.
pub struct CachedLlmJudge<J> {
    inner: J,
    cache: ResponseCache,
    model_name: String,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl<J: LlmJudge> CachedLlmJudge<J> {
    pub fn new(inner: J, cache_dir: &Path, model_name: &str) -> Result<Self, JudgeError> {
        Ok(CachedLlmJudge {
            inner,
            cache: ResponseCache::open(cache_dir)?,
            model_name: model_name.to_string(),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        })
    }

    /// (hits, misses) so far.
    pub fn stats(&self) -> (u64, u64) {
        (self.hits.load(Ordering::SeqCst), self.misses.load(Ordering::SeqCst))
    }

    pub fn inner(&self) -> &J {
        &self.inner
    }
}

impl<J: LlmJudge> LlmJudge for CachedLlmJudge<J> {
    fn backend_id(&self) -> String {
        self.inner.backend_id()
    }

    fn judge_step(&self, req: &LlmJudgeRequest) -> Result<LlmJudgeResponse, JudgeError> {
        let key = ResponseCache::key(
            &self.inner.backend_id(),
            &self.model_name,
            &payload("judge_step", req),
        );
        if let Some(text) = self.cache.get(&key) {
            if let Ok(resp) = serde_json::from_str::<LlmJudgeResponse>(&text) {
                if resp.validate().is_ok() {
                    self.hits.fetch_add(1, Ordering::SeqCst);
                    return Ok(resp);
                }
            }
        }
        let resp = self.inner.judge_step(req)?;
        self.misses.fetch_add(1, Ordering::SeqCst);
        if let Ok(text) = serde_json::to_string(&resp) {
            self.cache.put(&key, &text);
        }
        Ok(resp)
    }

    fn judge_entailment(
        &self,
        req: &LlmEntailmentRequest,
    ) -> Result<LlmEntailmentResponse, JudgeError> {
        let key = ResponseCache::key(
            &self.inner.backend_id(),
            &self.model_name,
            &payload("judge_entailment", req),
        );
        if let Some(text) = self.cache.get(&key) {
            if let Ok(resp) = serde_json::from_str::<LlmEntailmentResponse>(&text) {
                if resp.validate().is_ok() {
                    self.hits.fetch_add(1, Ordering::SeqCst);
                    return Ok(resp);
                }
            }
        }
        let resp = self.inner.judge_entailment(req)?;
        self.misses.fetch_add(1, Ordering::SeqCst);
        if let Ok(text) = serde_json::to_string(&resp) {
            self.cache.put(&key, &text);
        }
        Ok(resp)
    }
}

/// Cache wrapper around any [`NliBackend`].
pub struct CachedNli<N> {
    inner: N,
    cache: ResponseCache,
    model_name: String,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl<N: NliBackend> CachedNli<N> {
    pub fn new(inner: N, cache_dir: &Path, model_name: &str) -> Result<Self, JudgeError> {
        Ok(CachedNli {
            inner,
            cache: ResponseCache::open(cache_dir)?,
            model_name: model_name.to_string(),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        })
    }

    pub fn stats(&self) -> (u64, u64) {
        (self.hits.load(Ordering::SeqCst), self.misses.load(Ordering::SeqCst))
    }

    pub fn inner(&self) -> &N {
        &self.inner
    }
}

impl<N: NliBackend> NliBackend for CachedNli<N> {
    fn backend_id(&self) -> String {
        self.inner.backend_id()
    }

    fn raw_scores(&self, premise: &str, hypothesis: &str) -> Result<[f64; 3], JudgeError> {
        let key = ResponseCache::key(
            &self.inner.backend_id(),
            &self.model_name,
            &payload("raw_scores", &serde_json::json!({ "premise": premise, "hypothesis": hypothesis })),
        );
        if let Some(text) = self.cache.get(&key) {
            if let Ok(scores) = serde_json::from_str::<[f64; 3]>(&text) {
                self.hits.fetch_add(1, Ordering::SeqCst);
                return Ok(scores);
            }
        }
        let scores = self.inner.raw_scores(premise, hypothesis)?;
        self.misses.fetch_add(1, Ordering::SeqCst);
        if let Ok(text) = serde_json::to_string(&scores) {
            self.cache.put(&key, &text);
        }
        Ok(scores)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judge::scripted::{NliMatcher, NliScriptEntry, ScriptedNli};
    use crate::judge::RequestPurpose;
    use crate::trace::StepKind;

    fn entailment_req(hypothesis: &str) -> LlmEntailmentRequest {
        LlmEntailmentRequest {
            question: "q".into(),
            premise: "the premise".into(),
            hypothesis: hypothesis.into(),
        }
    }

    struct CountingJudge {
        calls: AtomicU64,
    }

    impl LlmJudge for CountingJudge {
        fn backend_id(&self) -> String {
            "counting".into()
        }
        fn judge_step(&self, _: &LlmJudgeRequest) -> Result<LlmJudgeResponse, JudgeError> {
            unreachable!("test uses entailment only")
        }
        fn judge_entailment(
            &self,
            req: &LlmEntailmentRequest,
        ) -> Result<LlmEntailmentResponse, JudgeError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(LlmEntailmentResponse {
                label: crate::judge::NliLabel::Neutral,
                confidence: Some(req.hypothesis.len() as f64 % 1.0),
            })
        }
    }

    #[test]
    fn identical_requests_hit_the_cache() {
        let dir = tempfile::tempdir().unwrap();
        let judge = CachedLlmJudge::new(
            CountingJudge { calls: AtomicU64::new(0) },
            dir.path(),
            "m1",
        )
        .unwrap();
        let a = judge.judge_entailment(&entailment_req("alpha")).unwrap();
        let b = judge.judge_entailment(&entailment_req("alpha")).unwrap();
        assert_eq!(a, b);
        assert_eq!(judge.inner().calls.load(Ordering::SeqCst), 1);
        assert_eq!(judge.stats(), (1, 1));
        // One character of difference is a different key.
        judge.judge_entailment(&entailment_req("alphb")).unwrap();
        assert_eq!(judge.inner().calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn cache_survives_process_like_restarts() {
        let dir = tempfile::tempdir().unwrap();
        let first = CachedLlmJudge::new(
            CountingJudge { calls: AtomicU64::new(0) },
            dir.path(),
            "m1",
        )
        .unwrap();
        let original = first.judge_entailment(&entailment_req("persisted")).unwrap();
        drop(first);

        let second = CachedLlmJudge::new(
            CountingJudge { calls: AtomicU64::new(0) },
            dir.path(),
            "m1",
        )
        .unwrap();
        let replayed = second.judge_entailment(&entailment_req("persisted")).unwrap();
        assert_eq!(original, replayed);
        assert_eq!(second.inner().calls.load(Ordering::SeqCst), 0);
        assert_eq!(second.stats(), (1, 0));
    }

    #[test]
    fn corrupt_entries_are_reissued_and_replaced() {
        let dir = tempfile::tempdir().unwrap();
        let nli = CachedNli::new(
            ScriptedNli::new(vec![NliScriptEntry {
                matcher: NliMatcher::default(),
                scores: [0.7, 0.2, 0.1],
            }]),
            dir.path(),
            "nli-model",
        )
        .unwrap();
        nli.raw_scores("p", "h").unwrap();
        assert_eq!(nli.inner().call_count(), 1);

        // Corrupt the single cache file in place.
        let entry = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().path())
            .find(|p| p.extension().is_some_and(|e| e == "json"))
            .unwrap();
        std::fs::write(&entry, "{not json").unwrap();

        let scores = nli.raw_scores("p", "h").unwrap();
        assert_eq!(scores, [0.7, 0.2, 0.1]);
        assert_eq!(nli.inner().call_count(), 2, "corrupt entry must re-issue");
        // The corrupt file was replaced with a valid one.
        let text = std::fs::read_to_string(&entry).unwrap();
        assert!(serde_json::from_str::<serde_json::Value>(&text).is_ok());
    }

    #[test]
    fn different_models_do_not_share_entries() {
        let dir = tempfile::tempdir().unwrap();
        let a = CachedNli::new(
            ScriptedNli::new(vec![NliScriptEntry {
                matcher: NliMatcher::default(),
                scores: [1.0, 0.0, 0.0],
            }]),
            dir.path(),
            "model-a",
        )
        .unwrap();
        let b = CachedNli::new(
            ScriptedNli::new(vec![NliScriptEntry {
                matcher: NliMatcher::default(),
                scores: [0.0, 0.0, 1.0],
            }]),
            dir.path(),
            "model-b",
        )
        .unwrap();
        assert_eq!(a.raw_scores("p", "h").unwrap(), [1.0, 0.0, 0.0]);
        assert_eq!(b.raw_scores("p", "h").unwrap(), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn judge_step_requests_are_cached_too() {
        use crate::judge::scripted::{canned, LlmScriptEntry, RequestMatcher, ScriptedLlmJudge};
        let dir = tempfile::tempdir().unwrap();
        let inner = ScriptedLlmJudge::new(vec![LlmScriptEntry {
            matcher: RequestMatcher::default(),
            respond: Some(canned::on_target_with_quote("a span")),
            entailment: None,
        }])
        .unwrap();
        let judge = CachedLlmJudge::new(inner, dir.path(), "m").unwrap();
        let req = LlmJudgeRequest {
            purpose: RequestPurpose::StageAbc,
            question: "q".into(),
            step_index: 1,
            step_kind: StepKind::Inference,
            claim: "c".into(),
            query: None,
            prev_step_summaries: vec![],
            own_evidence: vec![],
            prior_evidence: vec![],
        };
        judge.judge_step(&req).unwrap();
        judge.judge_step(&req).unwrap();
        assert_eq!(judge.inner().call_count(), 1);
    }
}
