use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{ChatProvider, ChatRequest, Completion, ProviderError, RawResponse, Usage};
use crate::prompts::PromptError;

/// Retry budget and exponential backoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    #[serde(with = "millis")]
    pub initial_delay: Duration,
    pub multiplier: f64,
    #[serde(with = "millis")]
    pub max_delay: Duration,
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            initial_delay: Duration::from_millis(500),
            multiplier: 2.0,
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_retries: u32) -> Self {
        RetryPolicy { max_retries, initial_delay: Duration::ZERO, multiplier: 1.0, max_delay: Duration::ZERO }
    }

    /// Delay before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = self.multiplier.max(1.0).powi(retry.saturating_sub(1) as i32);
        self.initial_delay.mul_f64(factor).min(self.max_delay)
    }
}

/// Call `provider` until `accept` takes the response, a non-retryable error
/// occurs, or the retry budget runs out.
///
/// Latency covers every attempt and backoff; usage sums over every attempt.
pub fn complete_parsed<T>(
    provider: &dyn ChatProvider,
    request: &ChatRequest,
    policy: &RetryPolicy,
    mut accept: impl FnMut(&str) -> Result<T, PromptError>,
) -> Result<(T, Completion), ProviderError> {
    request.validate()?;
    let started = Instant::now();
    let mut simulated = Some(Duration::ZERO);
    let mut usage = Usage::default();
    let mut attempts = 0u32;
    loop {
        attempts += 1;
        let outcome = provider.send(request).and_then(|RawResponse { text, usage: u, simulated_latency }| {
            usage += u;
            simulated = simulated.zip(simulated_latency).map(|(a, b)| a + b);
            let parsed = accept(&text)?;
            Ok((parsed, text))
        });
        match outcome {
            Ok((parsed, text)) => {
                let latency = simulated.unwrap_or_else(|| started.elapsed());
                let completion = Completion { text, usage, latency_ms: latency.as_millis() as u64, attempts };
                return Ok((parsed, completion));
            }
            Err(e) if e.is_retryable() && attempts <= policy.max_retries => {
                let delay = policy.delay(attempts);
                log::warn!("{}: attempt {attempts} failed ({e}); retrying in {delay:?}", provider.id());
                if let Some(s) = simulated.as_mut() {
                    *s += delay;
                }
                std::thread::sleep(delay);
            }
            Err(e) if e.is_retryable() => {
                return Err(ProviderError::Exhausted { attempts, last: Box::new(e) });
            }
            Err(e) => return Err(e),
        }
    }
}

/// [`complete_parsed`] accepting any text.
pub fn complete(provider: &dyn ChatProvider, request: &ChatRequest, policy: &RetryPolicy) -> Result<Completion, ProviderError> {
    complete_parsed(provider, request, policy, |_| Ok(())).map(|(_, c)| c)
}

/// Wraps a provider and replays a script of injected failures before delegating.
pub struct FaultyProvider<P> {
    inner: P,
    script: Mutex<VecDeque<ProviderError>>,
    permanent: Option<ProviderError>,
}

impl<P: ChatProvider> FaultyProvider<P> {
    /// Fail with each error in `script` in turn, then behave like `inner`.
    pub fn new(inner: P, script: impl IntoIterator<Item = ProviderError>) -> Self {
        FaultyProvider { inner, script: Mutex::new(script.into_iter().collect()), permanent: None }
    }

    /// Fail every call with `error`.
    pub fn always(inner: P, error: ProviderError) -> Self {
        FaultyProvider { inner, script: Mutex::new(VecDeque::new()), permanent: Some(error) }
    }
}

impl<P: ChatProvider> ChatProvider for FaultyProvider<P> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn send(&self, request: &ChatRequest) -> Result<RawResponse, ProviderError> {
        if let Some(e) = &self.permanent {
            return Err(e.clone());
        }
        if let Some(e) = self.script.lock().expect("script lock").pop_front() {
            return Err(e);
        }
        self.inner.send(request)
    }

    fn is_deterministic(&self) -> bool {
        self.inner.is_deterministic()
    }
}
