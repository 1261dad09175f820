use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use reasonrank::gateway::{
    cache_key, CompletionRequest, Gateway, GatewayConfig, ResponseCache, TokenUsage, Transport,
    TransportError, TransportReply,
};
use reasonrank::GatewayError;
use reasonrank_core::usage::Pricing;

/// Replays a fixed list of outcomes, then answers "ok".
struct Scripted {
    plan: Mutex<Vec<Result<(), TransportError>>>,
    calls: AtomicUsize,
}

impl Scripted {
    fn new(plan: Vec<Result<(), TransportError>>) -> Arc<Self> {
        Arc::new(Self {
            plan: Mutex::new(plan.into_iter().rev().collect()),
            calls: AtomicUsize::new(0),
        })
    }
}

struct Shared(Arc<Scripted>);

impl Transport for Shared {
    fn send(&self, req: &CompletionRequest) -> Result<TransportReply, TransportError> {
        self.0.calls.fetch_add(1, Ordering::SeqCst);
        match self.0.plan.lock().unwrap().pop() {
            Some(Err(e)) => Err(e),
            _ => Ok(TransportReply {
                text: format!("ok:{}", req.prompt),
                usage: Some(TokenUsage {
                    input_tokens: 1000,
                    output_tokens: 500,
                }),
            }),
        }
    }
}

fn pricing() -> Pricing {
    Pricing {
        input_per_1k: 0.03,
        output_per_1k: 0.06,
    }
}

fn gateway(t: &Arc<Scripted>, cache: Option<ResponseCache>, cache_only: bool) -> (Gateway, Arc<Mutex<Vec<Duration>>>) {
    let sleeps = Arc::new(Mutex::new(Vec::new()));
    let s = sleeps.clone();
    let g = Gateway::new(
        Box::new(Shared(t.clone())),
        cache,
        GatewayConfig {
            retries: 3,
            backoff: Duration::from_millis(100),
            concurrency: 4,
            cache_only,
            pricing: pricing(),
        },
    )
    .with_sleeper(move |d| s.lock().unwrap().push(d));
    (g, sleeps)
}

#[test]
fn rate_limited_twice_then_success_counts_three_requests() {
    let t = Scripted::new(vec![Err(TransportError::RateLimited), Err(TransportError::RateLimited)]);
    let (g, sleeps) = gateway(&t, None, false);
    let c = g.complete(&CompletionRequest::new("gpt-4", "p")).unwrap();
    assert_eq!(c.attempts, 3);
    assert_eq!(c.text, "ok:p");
    assert_eq!(g.ledger().requests, 3);
    assert_eq!(t.calls.load(Ordering::SeqCst), 3);
    assert_eq!(*sleeps.lock().unwrap(), vec![Duration::from_millis(100), Duration::from_millis(200)]);
    // Tokens are billed once, for the exchange that succeeded.
    assert_eq!(g.ledger().input_tokens, 1000);
    assert!((g.ledger().cost - 0.06).abs() < 1e-12);
}

#[test]
fn retries_exhausted_after_configured_attempts() {
    let t = Scripted::new(vec![Err(TransportError::Transient("502".into())); 10]);
    let (g, _) = gateway(&t, None, false);
    match g.complete(&CompletionRequest::new("gpt-4", "p")) {
        Err(GatewayError::RetriesExhausted { attempts, .. }) => assert_eq!(attempts, 4),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(t.calls.load(Ordering::SeqCst), 4);
}

#[test]
fn fatal_errors_are_not_retried() {
    let t = Scripted::new(vec![Err(TransportError::Fatal("401".into()))]);
    let (g, _) = gateway(&t, None, false);
    assert!(matches!(
        g.complete(&CompletionRequest::new("gpt-4", "p")),
        Err(GatewayError::Rejected(_))
    ));
    assert_eq!(t.calls.load(Ordering::SeqCst), 1);
}

#[test]
fn cache_hit_returns_identical_text_without_new_billing() {
    let dir = tempfile::tempdir().unwrap();
    let t = Scripted::new(vec![]);
    let req = CompletionRequest::new("gpt-4", "rank these");
    let (g1, _) = gateway(&t, Some(ResponseCache::new(dir.path())), false);
    let first = g1.complete(&req).unwrap();
    assert!(!first.from_cache);

    let (g2, _) = gateway(&t, Some(ResponseCache::new(dir.path())), false);
    let second = g2.complete(&req).unwrap();
    assert!(second.from_cache);
    assert_eq!(second.text, first.text);
    assert_eq!(second.usage, first.usage);
    let l = g2.ledger();
    assert_eq!((l.requests, l.cache_hits, l.input_tokens, l.output_tokens), (0, 1, 0, 0));
    assert_eq!(l.cost, 0.0);
    assert_eq!(t.calls.load(Ordering::SeqCst), 1);
}

#[test]
fn offline_miss_is_an_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let t = Scripted::new(vec![]);
    let (g, _) = gateway(&t, Some(ResponseCache::new(dir.path())), true);
    let req = CompletionRequest::new("gpt-4", "never seen");
    let err = g.complete(&req).unwrap_err();
    assert_eq!(err, GatewayError::OfflineCacheMiss(cache_key(&req)));
    assert!(err.to_string().contains(&cache_key(&req)));
    assert_eq!(t.calls.load(Ordering::SeqCst), 0);
    assert_eq!(reasonrank::Error::from(err).exit_code(), 3);
}

#[test]
fn cache_key_golden() {
    // sha256(len64le("gpt-4") "gpt-4" len64le(prompt) prompt f64le(1.0) f64le(0.9)), from hashlib.
    let req = CompletionRequest::new("gpt-4", "Rank the passages.");
    assert_eq!(
        cache_key(&req),
        "32b82ac62dbf316d931eeef3680a8ed9fc8c4d051d3605166e0b3fa13d7a9d19"
    );
    let mut other = req.clone();
    other.max_tokens = 10;
    assert_eq!(cache_key(&other), cache_key(&req));
    other.temperature = 0.0;
    assert_ne!(cache_key(&other), cache_key(&req));
}

#[test]
fn invalid_requests_are_rejected_before_sending() {
    let t = Scripted::new(vec![]);
    let (g, _) = gateway(&t, None, false);
    let mut req = CompletionRequest::new("gpt-4", "p");
    req.top_p = 0.0;
    assert!(matches!(g.complete(&req), Err(GatewayError::InvalidRequest(_))));
    assert_eq!(t.calls.load(Ordering::SeqCst), 0);
}

struct Slow {
    active: AtomicUsize,
    peak: AtomicUsize,
}

struct SlowRef(Arc<Slow>);

impl Transport for SlowRef {
    fn send(&self, req: &CompletionRequest) -> Result<TransportReply, TransportError> {
        let now = self.0.active.fetch_add(1, Ordering::SeqCst) + 1;
        self.0.peak.fetch_max(now, Ordering::SeqCst);
        std::thread::sleep(Duration::from_millis(5));
        self.0.active.fetch_sub(1, Ordering::SeqCst);
        Ok(TransportReply {
            text: req.prompt.clone(),
            usage: None,
        })
    }
}

#[test]
fn bounded_concurrency_keeps_order() {
    let slow = Arc::new(Slow {
        active: AtomicUsize::new(0),
        peak: AtomicUsize::new(0),
    });
    let g = Gateway::new(
        Box::new(SlowRef(slow.clone())),
        None,
        GatewayConfig {
            concurrency: 3,
            ..Default::default()
        },
    );
    let jobs: Vec<String> = (0..24).map(|i| format!("job {i}")).collect();
    let out = g.run_bounded(&jobs, |p| g.complete(&CompletionRequest::new("m", p.clone())).unwrap().text);
    assert_eq!(out, jobs);
    assert!(slow.peak.load(Ordering::SeqCst) <= 3);
    assert!(slow.peak.load(Ordering::SeqCst) >= 2);
    // No reported usage: the approximate tokenizer fills in.
    assert_eq!(g.ledger().input_tokens, 24 * 3);
}
