//! Response grammars: the `clip_num` retrieval answer and yes/no verdicts.

use std::sync::LazyLock;

use regex::Regex;
use serde_json::Value;

use super::RetrievalResult;
use crate::error::{Error, Result};

static ONE_CLIP: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^one\s+clips?\s*:\s*\[\s*clip[-_ ]?(\d+)\s*\]\s*\.?$").unwrap());
static MULTIPLE_CLIPS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^multiple\s+clips?\s*:\s*\[(.*)\]\s*\.?$").unwrap());
static CLIP_ITEM: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)^clip[-_ ]?(\d+)$").unwrap());
static NONE_ARM: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)^none\s*\.?$").unwrap());

// Single-quoted "Python dictionary" replies that are not valid JSON.
static PY_CLIP_NUM: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"['"]clip_num['"]\s*:\s*['"]([^'"]*)['"]"#).unwrap());
static PY_EXPLANATION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?s)['"]explanation['"]\s*:\s*['"](.*?)['"]\s*,\s*['"]clip_num"#).unwrap());

/// Parses a clip-retrieval reply. When `n_clips` is given, indices at or
/// beyond it are rejected rather than clamped.
pub fn parse_clip_num(text: &str, n_clips: Option<usize>) -> Result<RetrievalResult> {
    let (explanation, clip_num) = find_reply_object(text)?;
    let clips = parse_clip_list(&clip_num)?;
    if let (Some(n), Some(list)) = (n_clips, &clips) {
        if let Some(bad) = list.iter().find(|&&c| c >= n) {
            return Err(Error::parse(format!("clip index {bad} out of range for {n} clips"), text));
        }
    }
    Ok(RetrievalResult::new(explanation, clips))
}

/// Parses the `clip_num` value alone. `None` stands for "no relevant clip".
pub fn parse_clip_list(clip_num: &str) -> Result<Option<Vec<usize>>> {
    let s = clip_num.trim();
    if NONE_ARM.is_match(s) {
        return Ok(None);
    }
    let index = |digits: &str| digits.parse::<usize>().map_err(|_| Error::parse("clip index does not fit", clip_num));
    if let Some(c) = ONE_CLIP.captures(s) {
        return Ok(Some(vec![index(&c[1])?]));
    }
    if let Some(c) = MULTIPLE_CLIPS.captures(s) {
        let inner = c[1].trim();
        if inner.is_empty() {
            return Ok(None);
        }
        let mut out = Vec::new();
        for item in inner.split(',') {
            let item = item.trim().trim_matches(|ch| ch == '"' || ch == '\'');
            match CLIP_ITEM.captures(item) {
                Some(c) => out.push(index(&c[1])?),
                None => return Err(Error::parse(format!("bad clip reference {item:?}"), clip_num)),
            }
        }
        out.sort_unstable();
        out.dedup();
        return Ok(Some(out));
    }
    Err(Error::parse("clip_num matches no known form", clip_num))
}

/// Renders clips back into the `clip_num` grammar.
pub fn render_clip_num(clips: Option<&[usize]>) -> String {
    match clips {
        None | Some([]) => "None.".to_string(),
        Some([one]) => format!("One clip: [Clip-{one}]"),
        Some(many) => {
            let items: Vec<String> = many.iter().map(|c| format!("Clip-{c}")).collect();
            format!("Multiple clips: [{}]", items.join(", "))
        }
    }
}

fn find_reply_object(text: &str) -> Result<(String, String)> {
    for (start, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            match map.get("clip_num") {
                Some(Value::String(clip_num)) => {
                    let explanation = match map.get("explanation") {
                        Some(Value::String(e)) => e.clone(),
                        _ => String::new(),
                    };
                    return Ok((explanation, clip_num.clone()));
                }
                Some(_) => return Err(Error::parse("clip_num is not a string", text)),
                None => continue,
            }
        }
    }
    if let Some(c) = PY_CLIP_NUM.captures(text) {
        let explanation = PY_EXPLANATION.captures(text).map(|e| e[1].to_string()).unwrap_or_default();
        return Ok((explanation, c[1].to_string()));
    }
    Err(Error::parse("no JSON object with a clip_num field", text))
}

/// First `yes`/`no` token, case-insensitive, ignoring punctuation.
pub fn parse_yes_no(text: &str) -> Result<bool> {
    for token in text.split(|c: char| !c.is_alphanumeric()) {
        if token.eq_ignore_ascii_case("yes") {
            return Ok(true);
        }
        if token.eq_ignore_ascii_case("no") {
            return Ok(false);
        }
    }
    Err(Error::parse("expected Yes or No", text))
}
