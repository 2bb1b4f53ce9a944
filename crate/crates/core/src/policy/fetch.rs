use std::path::PathBuf;
use std::time::Duration;

use thiserror::Error;
use ureq::ResponseExt;

const MAX_REDIRECTS: u32 = 5;
const MAX_BODY: u64 = 32 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicySource {
    Path(PathBuf),
    Url(String),
}

impl PolicySource {
    pub fn describe(&self) -> String {
        match self {
            PolicySource::Path(p) => p.display().to_string(),
            PolicySource::Url(u) => u.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("cannot read {path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed URL {0:?}")]
    BadUrl(String),
    #[error("timed out fetching {0}")]
    Timeout(String),
    #[error("{url} answered HTTP {status}")]
    Status { url: String, status: u16 },
    #[error("more than {MAX_REDIRECTS} redirects fetching {0}")]
    TooManyRedirects(String),
    #[error("network failure fetching {url}: {msg}")]
    Network { url: String, msg: String },
}

impl FetchError {
    /// Errors that come from the network rather than local input.
    pub fn is_external(&self) -> bool {
        !matches!(self, FetchError::File { .. } | FetchError::BadUrl(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fetched {
    pub body: Vec<u8>,
    /// Path for files; the post-redirect URL for downloads.
    pub final_location: String,
}

pub fn fetch_policy(source: &PolicySource, timeout: Duration) -> Result<Fetched, FetchError> {
    match source {
        PolicySource::Path(p) => {
            let body = std::fs::read(p).map_err(|source| FetchError::File {
                path: p.display().to_string(),
                source,
            })?;
            Ok(Fetched {
                body,
                final_location: p.display().to_string(),
            })
        }
        PolicySource::Url(url) => fetch_url(url, timeout),
    }
}

fn fetch_url(url: &str, timeout: Duration) -> Result<Fetched, FetchError> {
    if !(url.starts_with("http://") || url.starts_with("https://")) || url.len() <= "http://".len()
    {
        return Err(FetchError::BadUrl(url.to_string()));
    }
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .max_redirects(MAX_REDIRECTS)
        .http_status_as_error(false)
        .build()
        .into();
    let mut resp = agent.get(url).call().map_err(|e| map_err(url, e))?;
    let status = resp.status().as_u16();
    let final_location = resp.get_uri().to_string();
    if resp.status().is_redirection() {
        return Err(FetchError::TooManyRedirects(url.to_string()));
    }
    if !resp.status().is_success() {
        return Err(FetchError::Status {
            url: final_location,
            status,
        });
    }
    let body = resp
        .body_mut()
        .with_config()
        .limit(MAX_BODY)
        .read_to_vec()
        .map_err(|e| map_err(url, e))?;
    Ok(Fetched {
        body,
        final_location,
    })
}

fn map_err(url: &str, e: ureq::Error) -> FetchError {
    match e {
        ureq::Error::Timeout(_) => FetchError::Timeout(url.to_string()),
        ureq::Error::StatusCode(status) => FetchError::Status {
            url: url.to_string(),
            status,
        },
        ureq::Error::TooManyRedirects => FetchError::TooManyRedirects(url.to_string()),
        ureq::Error::BadUri(_) | ureq::Error::Http(_) => FetchError::BadUrl(url.to_string()),
        ureq::Error::Io(ref io) if io.kind() == std::io::ErrorKind::TimedOut => {
            FetchError::Timeout(url.to_string())
        }
        other => FetchError::Network {
            url: url.to_string(),
            msg: other.to_string(),
        },
    }
}
