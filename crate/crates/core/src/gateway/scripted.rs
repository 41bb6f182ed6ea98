use std::path::Path;
use std::sync::Mutex;

use serde::Deserialize;

use super::{response_with_counted_usage, ChatBackend, ChatRequest, ChatResponse, GatewayError};

/// How a transcript entry recognizes the request it answers.
#[derive(Debug, Clone)]
pub enum MatchRule {
    /// Case-sensitive substring of the rendered prompt.
    Substring(String),
    /// Wildcard pattern over the whole rendered prompt: `*` matches any
    /// run of characters, `?` exactly one.
    Glob(String),
}

impl MatchRule {
    pub fn matches(&self, rendered: &str) -> bool {
        match self {
            MatchRule::Substring(s) => rendered.contains(s.as_str()),
            MatchRule::Glob(p) => wildcard_match(p, rendered),
        }
    }

    fn describe(&self) -> String {
        match self {
            MatchRule::Substring(s) => format!("substring {s:?}"),
            MatchRule::Glob(p) => format!("glob {p:?}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TranscriptEntry {
    pub rule: MatchRule,
    pub response: String,
}

/// Deterministic offline backend that replays canned responses.
///
/// In strict mode entries must be consumed in file order and every request
/// must match the next entry. In scan mode each request takes the first
/// still-unused entry that matches, so transcripts survive reorderings
/// (parallel section writers, for example). Either way an entry answers at
/// most once.
pub struct ScriptedBackend {
    entries: Vec<TranscriptEntry>,
    strict: bool,
    state: Mutex<ScriptState>,
}

struct ScriptState {
    used: Vec<bool>,
    calls: usize,
}

/// On-disk transcript: `{"strict": bool, "entries": [...]}`. Each entry
/// carries `match` (substring) or `glob` plus `response`. A response may be
/// a plain string or any JSON value, which is serialized verbatim; fixtures
/// can therefore embed agent JSON without escaping it into a string.
#[derive(Deserialize)]
struct TranscriptFile {
    #[serde(default)]
    strict: bool,
    entries: Vec<TranscriptEntryFile>,
}

#[derive(Deserialize)]
struct TranscriptEntryFile {
    #[serde(rename = "match")]
    substring: Option<String>,
    glob: Option<String>,
    response: serde_json::Value,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<TranscriptEntry>, strict: bool) -> Self {
        let used = vec![false; entries.len()];
        ScriptedBackend { entries, strict, state: Mutex::new(ScriptState { used, calls: 0 }) }
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read transcript {}: {e}", path.display()))?;
        let file: TranscriptFile = serde_json::from_str(&text)
            .map_err(|e| format!("cannot parse transcript {}: {e}", path.display()))?;
        let mut entries = Vec::with_capacity(file.entries.len());
        for (i, entry) in file.entries.into_iter().enumerate() {
            let rule = match (entry.substring, entry.glob) {
                (Some(s), None) => MatchRule::Substring(s),
                (None, Some(g)) => MatchRule::Glob(g),
                (None, None) => {
                    return Err(format!("transcript entry {i} has neither \"match\" nor \"glob\""))
                }
                (Some(_), Some(_)) => {
                    return Err(format!("transcript entry {i} has both \"match\" and \"glob\""))
                }
            };
            let response = match entry.response {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            };
            entries.push(TranscriptEntry { rule, response });
        }
        Ok(ScriptedBackend::new(entries, file.strict))
    }

    /// Entries no request has consumed yet.
    pub fn unused_entries(&self) -> usize {
        self.state
            .lock()
            .expect("script lock poisoned")
            .used
            .iter()
            .filter(|&&u| !u)
            .count()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let rendered = request.rendered();
        let mut state = self.state.lock().expect("script lock poisoned");
        state.calls += 1;
        let call = state.calls;
        let preview: String = rendered.chars().take(160).collect();
        if self.strict {
            let next = state.used.iter().position(|&u| !u).ok_or_else(|| {
                GatewayError::TranscriptExhausted {
                    call,
                    detail: format!("all {} entries consumed; prompt starts {preview:?}", self.entries.len()),
                }
            })?;
            let entry = &self.entries[next];
            if !entry.rule.matches(&rendered) {
                return Err(GatewayError::TranscriptMismatch {
                    call,
                    detail: format!(
                        "entry {next} expects {} but prompt starts {preview:?}",
                        entry.rule.describe()
                    ),
                });
            }
            state.used[next] = true;
            return Ok(response_with_counted_usage(&rendered, entry.response.clone()));
        }
        let found = self
            .entries
            .iter()
            .enumerate()
            .find(|(i, e)| !state.used[*i] && e.rule.matches(&rendered));
        match found {
            Some((i, entry)) => {
                let response = entry.response.clone();
                state.used[i] = true;
                Ok(response_with_counted_usage(&rendered, response))
            }
            None => {
                if state.used.iter().all(|&u| u) {
                    Err(GatewayError::TranscriptExhausted {
                        call,
                        detail: format!("all {} entries consumed; prompt starts {preview:?}", self.entries.len()),
                    })
                } else {
                    Err(GatewayError::TranscriptMismatch {
                        call,
                        detail: format!("no unused entry matches; prompt starts {preview:?}"),
                    })
                }
            }
        }
    }
}

/// Wildcard match over chars: `*` spans any run, `?` one char. Classic
/// two-pointer scan with single-star backtracking.
pub fn wildcard_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    let (mut pi, mut ti) = (0usize, 0usize);
    let mut star: Option<usize> = None;
    let mut mark = 0usize;
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '?' || p[pi] == t[ti]) {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == '*' {
            star = Some(pi);
            mark = ti;
            pi += 1;
        } else if let Some(s) = star {
            pi = s + 1;
            mark += 1;
            ti = mark;
        } else {
            return false;
        }
    }
    while pi < p.len() && p[pi] == '*' {
        pi += 1;
    }
    pi == p.len()
}
