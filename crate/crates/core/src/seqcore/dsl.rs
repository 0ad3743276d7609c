//! Sequence descriptors:
//!
//! ```text
//! harmonic | power:alpha=<float> | powlog:alpha=<float> | geometric:r=<float>
//!   | logstep | aq:q=<int> | scale:c=<float>,(<spec>) | file:<path>
//! ```

use std::path::Path;

use super::sequence::{DeclaredClass, SpectralSequence};
use crate::error::{Error, Result};

/// Parses a sequence descriptor and constructs the sequence.
pub fn make_family(spec: &str) -> Result<SpectralSequence> {
    let spec = spec.trim();
    let err = |reason: &str| Error::Parse { spec: spec.to_string(), reason: reason.to_string() };
    let (head, rest) = match spec.split_once(':') {
        Some((h, r)) => (h, Some(r)),
        None => (spec, None),
    };
    match (head, rest) {
        ("harmonic", None) => Ok(SpectralSequence::harmonic()),
        ("logstep", None) => Ok(SpectralSequence::logstep()),
        ("harmonic" | "logstep", Some(_)) => Err(err("this family takes no parameters")),
        ("power", Some(r)) => SpectralSequence::power(float_param(spec, r, "alpha")?),
        ("powlog", Some(r)) => SpectralSequence::powlog(float_param(spec, r, "alpha")?),
        ("geometric", Some(r)) => SpectralSequence::geometric(float_param(spec, r, "r")?),
        ("aq", Some(r)) => {
            let raw = param(spec, r, "q")?;
            let q = raw.parse::<u32>().map_err(|_| err("q must be a positive integer"))?;
            SpectralSequence::aq(q)
        }
        ("scale", Some(r)) => {
            let (c, inner) = r.split_once(',').ok_or_else(|| err("expected scale:c=<float>,(<spec>)"))?;
            let c = float_param(spec, c, "c")?;
            let inner = inner.trim();
            let inner = inner
                .strip_prefix('(')
                .and_then(|s| s.strip_suffix(')'))
                .ok_or_else(|| err("inner spec must be parenthesized"))?;
            SpectralSequence::scaled(c, make_family(inner)?)
        }
        ("file", Some(path)) if !path.is_empty() => load_file(Path::new(path)),
        ("power" | "powlog" | "geometric" | "aq" | "scale" | "file", None) => Err(err("missing parameters")),
        _ => Err(err("unknown family")),
    }
}

fn param<'a>(spec: &str, body: &'a str, key: &str) -> Result<&'a str> {
    body.trim()
        .strip_prefix(key)
        .and_then(|s| s.strip_prefix('='))
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::Parse { spec: spec.to_string(), reason: format!("expected `{key}=<value>`") })
}

fn float_param(spec: &str, body: &str, key: &str) -> Result<f64> {
    let raw = param(spec, body, key)?;
    raw.trim().parse::<f64>().map_err(|_| Error::Parse {
        spec: spec.to_string(),
        reason: format!("`{raw}` is not a number"),
    })
}

/// Reads an explicit eigenvalue list: one positive decimal per line, with an
/// optional `# trace=<float>` or `# trace=nonsummable` header.
pub fn load_file(path: &Path) -> Result<SpectralSequence> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_list(&text, &path.display().to_string())
}

pub(crate) fn parse_list(text: &str, origin: &str) -> Result<SpectralSequence> {
    let err = |line: usize, reason: String| Error::Parse { spec: format!("{origin}:{line}"), reason };
    let mut class = DeclaredClass::Undetermined;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            if !values.is_empty() {
                return Err(err(i + 1, "header must precede the values".into()));
            }
            let header = header.trim();
            let body = header.strip_prefix("trace=").unwrap_or(header);
            class = if body == "nonsummable" {
                DeclaredClass::NonSummable
            } else {
                let trace = body
                    .parse::<f64>()
                    .map_err(|_| err(i + 1, format!("bad header `{line}`")))?;
                DeclaredClass::Summable { trace }
            };
            continue;
        }
        let v = line.parse::<f64>().map_err(|_| err(i + 1, format!("`{line}` is not a number")))?;
        values.push(v);
    }
    SpectralSequence::explicit(values, class)
}
