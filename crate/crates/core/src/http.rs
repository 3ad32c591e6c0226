//! Blocking JSON-over-HTTP calls with bounded retries and exponential backoff.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct HttpSettings {
    pub timeout: Duration,
    pub retries: u32,
    pub backoff: Duration,
    pub auth_token: Option<String>,
}

impl Default for HttpSettings {
    fn default() -> Self {
        HttpSettings {
            timeout: Duration::from_secs(30),
            retries: 3,
            backoff: Duration::from_millis(100),
            auth_token: None,
        }
    }
}

#[derive(Debug)]
pub enum HttpFailure {
    /// Retries exhausted on transport errors or 5xx/408/429 responses.
    Transport { attempts: u32, message: String },
    /// The server answered but the exchange did not follow the protocol.
    Protocol(String),
}

pub struct JsonClient {
    agent: ureq::Agent,
    settings: HttpSettings,
}

impl JsonClient {
    pub fn new(settings: HttpSettings) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(settings.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        JsonClient { agent, settings }
    }

    pub fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        url: &str,
        body: &Req,
    ) -> Result<Resp, HttpFailure> {
        let max_attempts = self.settings.retries + 1;
        let mut last = String::new();
        for attempt in 1..=max_attempts {
            if attempt > 1 {
                let factor = 1u32 << (attempt - 2).min(16);
                std::thread::sleep(self.settings.backoff * factor);
            }
            let mut req = self.agent.post(url);
            if let Some(token) = &self.settings.auth_token {
                req = req.header("Authorization", format!("Bearer {token}"));
            }
            match req.send_json(body) {
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    if status == 408 || status == 429 || status >= 500 {
                        last = format!("HTTP {status} from {url}");
                        tracing::warn!(attempt, status, url, "transient HTTP failure");
                        continue;
                    }
                    if status >= 400 {
                        return Err(HttpFailure::Protocol(format!("HTTP {status} from {url}")));
                    }
                    return resp
                        .into_body()
                        .read_json::<Resp>()
                        .map_err(|e| HttpFailure::Protocol(format!("bad response body from {url}: {e}")));
                }
                Err(e) => {
                    last = e.to_string();
                    tracing::warn!(attempt, error = %e, url, "HTTP transport error");
                }
            }
        }
        Err(HttpFailure::Transport {
            attempts: max_attempts,
            message: last,
        })
    }
}

pub fn join_url(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path.trim_start_matches('/'))
}
