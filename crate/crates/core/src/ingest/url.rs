use url::Url;

use crate::error::{Error, Result};

/// Canonical form of an article URL: `scheme://host[:port]/path` with a
/// lowercase host, no userinfo, no query string, no fragment and no trailing
/// slash on non-root paths.
pub fn canonicalize_url(raw: &str) -> Result<String> {
    let parsed = parse_with_host(raw)?;
    let host = parsed.host_str().unwrap_or_default().to_ascii_lowercase();
    let mut out = format!("{}://{}", parsed.scheme(), host);
    if let Some(port) = parsed.port() {
        out.push(':');
        out.push_str(&port.to_string());
    }
    let path = parsed.path();
    let trimmed = path.trim_end_matches('/');
    if trimmed.is_empty() {
        out.push('/');
    } else {
        out.push_str(trimmed);
    }
    Ok(out)
}

/// Lowercased host of a URL, i.e. the publisher of an article.
pub fn host_of(raw: &str) -> Result<String> {
    let parsed = parse_with_host(raw)?;
    Ok(parsed.host_str().unwrap_or_default().to_ascii_lowercase())
}

/// `true` when `raw` parses as an absolute URL with a host.
pub fn is_valid_link(raw: &str) -> bool {
    parse_with_host(raw).is_ok()
}

fn parse_with_host(raw: &str) -> Result<Url> {
    let parsed = Url::parse(raw.trim()).map_err(|e| Error::UrlParse {
        input: raw.to_string(),
        reason: e.to_string(),
    })?;
    match parsed.host_str() {
        Some(h) if !h.is_empty() => Ok(parsed),
        _ => Err(Error::UrlParse {
            input: raw.to_string(),
            reason: "url has no host".into(),
        }),
    }
}
