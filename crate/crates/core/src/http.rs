//! Blocking JSON-over-HTTP plumbing shared by the chat and embedding clients:
//! retry with exponential backoff and an in-flight request cap.

use std::time::Duration;

use parking_lot::{Condvar, Mutex};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HttpFailure {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
}

impl HttpFailure {
    /// Transport errors, 429 and 5xx are worth another attempt.
    pub fn is_retryable(&self) -> bool {
        match self {
            HttpFailure::Transport(_) => true,
            HttpFailure::Status { status, .. } => *status == 429 || *status >= 500,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt.saturating_sub(1));
        self.initial_backoff.saturating_mul(factor).min(self.max_backoff)
    }

    /// Runs `op` until it succeeds, fails permanently, or the attempt budget
    /// is spent. Returns the outcome and the number of attempts made.
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T, HttpFailure>) -> (Result<T, HttpFailure>, u32) {
        let max = self.max_attempts.max(1);
        let mut attempt = 1;
        loop {
            match op() {
                Ok(v) => return (Ok(v), attempt),
                Err(e) if e.is_retryable() && attempt < max => {
                    log::warn!("attempt {attempt}/{max} failed: {e}; retrying");
                    std::thread::sleep(self.backoff(attempt));
                    attempt += 1;
                }
                Err(e) => return (Err(e), attempt),
            }
        }
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
pub struct InFlightLimit {
    available: Mutex<usize>,
    released: Condvar,
}

pub struct Permit<'a>(&'a InFlightLimit);

impl InFlightLimit {
    pub fn new(max_in_flight: usize) -> Self {
        InFlightLimit {
            available: Mutex::new(max_in_flight.max(1)),
            released: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut available = self.available.lock();
        while *available == 0 {
            self.released.wait(&mut available);
        }
        *available -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock() += 1;
        self.0.released.notify_one();
    }
}

/// Something that can POST a JSON body and hand back the response body.
pub trait JsonTransport: Send + Sync {
    fn post(&self, body: &serde_json::Value) -> Result<String, HttpFailure>;
}

/// `reqwest`-backed transport for one endpoint URL, with an optional bearer
/// credential.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Result<Self, HttpFailure> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| HttpFailure::Transport(e.to_string()))?;
        Ok(HttpTransport {
            client,
            url: url.into(),
            api_key,
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl JsonTransport for HttpTransport {
    fn post(&self, body: &serde_json::Value) -> Result<String, HttpFailure> {
        let mut request = self.client.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| HttpFailure::Transport(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| HttpFailure::Transport(e.to_string()))?;
        if status.is_success() {
            Ok(text)
        } else {
            Err(HttpFailure::Status {
                status: status.as_u16(),
                body: text,
            })
        }
    }
}

/// Joins a base URL and an endpoint path with exactly one slash.
pub fn endpoint_url(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path.trim_start_matches('/'))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    fn fast(max_attempts: u32) -> RetryPolicy {
        RetryPolicy {
            max_attempts,
            initial_backoff: Duration::ZERO,
            max_backoff: Duration::ZERO,
        }
    }

    #[test]
    fn retries_until_success() {
        let calls = Cell::new(0);
        let (r, attempts) = fast(3).run(|| {
            calls.set(calls.get() + 1);
            if calls.get() == 1 {
                Err(HttpFailure::Status { status: 429, body: String::new() })
            } else {
                Ok(7)
            }
        });
        assert_eq!((r, attempts), (Ok(7), 2));
    }

    #[test]
    fn client_errors_are_final() {
        let (r, attempts) = fast(5).run(|| -> Result<(), _> {
            Err(HttpFailure::Status { status: 401, body: "no".into() })
        });
        assert!(r.is_err());
        assert_eq!(attempts, 1);
    }

    #[test]
    fn exhaustion() {
        let (r, attempts) = fast(3).run(|| -> Result<(), _> {
            Err(HttpFailure::Status { status: 500, body: String::new() })
        });
        assert!(r.is_err());
        assert_eq!(attempts, 3);
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy {
            max_attempts: 10,
            initial_backoff: Duration::from_millis(100),
            max_backoff: Duration::from_millis(350),
        };
        assert_eq!(p.backoff(1), Duration::from_millis(100));
        assert_eq!(p.backoff(2), Duration::from_millis(200));
        assert_eq!(p.backoff(3), Duration::from_millis(350));
    }

    #[test]
    fn in_flight_cap_holds() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        use std::sync::Arc;
        let limit = Arc::new(InFlightLimit::new(2));
        let current = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let (limit, current, peak) = (limit.clone(), current.clone(), peak.clone());
                std::thread::spawn(move || {
                    let _permit = limit.acquire();
                    let now = current.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                    current.fetch_sub(1, Ordering::SeqCst);
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }

    #[test]
    fn url_join() {
        assert_eq!(endpoint_url("http://h/v1/", "/chat/completions"), "http://h/v1/chat/completions");
    }
}
