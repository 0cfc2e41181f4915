//! Flat key=value configuration files. `#` starts a comment; keys use the
//! same spelling as the long command-line flags (without the dashes), e.g.
//!
//!   n = 1024
//!   backend = stream32
//!   t-end = 0.5

use std::collections::BTreeMap;
use std::path::Path;

pub fn parse(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value, got \"{raw}\"", idx + 1))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

pub fn load(path: &Path) -> Result<BTreeMap<String, String>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_comments_and_blank_lines() {
        let map = parse("# protocol\nn = 1024\nbackend=stream32\n\nt-end = 0.5 # full run\n").unwrap();
        assert_eq!(map.get("n").unwrap(), "1024");
        assert_eq!(map.get("backend").unwrap(), "stream32");
        assert_eq!(map.get("t-end").unwrap(), "0.5");
        assert_eq!(map.len(), 3);
    }

    #[test]
    fn rejects_lines_without_equals() {
        assert!(parse("just-a-key\n").is_err());
    }
}
