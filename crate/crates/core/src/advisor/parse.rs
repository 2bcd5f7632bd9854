//! Extraction of action lists from free-form replies.
//!
//! Replies vary: some are `key: ["a", "b"], "label", "explanation"`, others
//! put a bare list followed by prose. The parser takes the first bracketed
//! list of quoted strings anywhere in the text.

use thiserror::Error;

use super::{ActionName, Decision};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("no bracketed list of quoted names in reply")]
    NoList,
    #[error("no whitelisted action in reply (saw: {0:?})")]
    NoValidActions(Vec<String>),
}

fn closing_quote(open: char) -> Option<char> {
    match open {
        '"' => Some('"'),
        '\'' => Some('\''),
        '\u{201c}' => Some('\u{201d}'),
        '\u{2018}' => Some('\u{2019}'),
        _ => None,
    }
}

fn skip_ws(s: &str, mut i: usize) -> usize {
    while let Some(c) = s[i..].chars().next() {
        if !c.is_whitespace() {
            break;
        }
        i += c.len_utf8();
    }
    i
}

/// Reads a quoted string starting at byte `i`. Returns its content and the
/// byte offset just past the closing quote.
fn quoted_at(s: &str, i: usize) -> Option<(&str, usize)> {
    let open = s[i..].chars().next()?;
    let close = closing_quote(open)?;
    let start = i + open.len_utf8();
    let end = start + s[start..].find(close)?;
    Some((&s[start..end], end + close.len_utf8()))
}

/// Parses `[ "a", "b" ]` at byte `i` (which must hold `[`).
fn list_at(s: &str, i: usize) -> Option<(Vec<String>, usize)> {
    let mut items = Vec::new();
    let mut pos = i + 1;
    loop {
        pos = skip_ws(s, pos);
        let (item, next) = quoted_at(s, pos)?;
        items.push(item.trim().to_string());
        pos = skip_ws(s, next);
        match s[pos..].chars().next()? {
            ',' => pos += 1,
            ']' => return Some((items, pos + 1)),
            _ => return None,
        }
    }
}

fn first_list(s: &str) -> Option<(Vec<String>, usize)> {
    s.match_indices('[').find_map(|(i, _)| list_at(s, i))
}

fn strip_separators(s: &str) -> &str {
    s.trim_start_matches(|c: char| c.is_whitespace() || c == ',')
}

/// Parses a reply into a validated [`Decision`].
///
/// Names outside `valid` are dropped and listed in `Decision::dropped`.
/// Duplicates keep their first position.
pub fn parse_decision(raw: &str, valid: &[ActionName]) -> Result<Decision, ParseError> {
    let (items, end) = first_list(raw).ok_or(ParseError::NoList)?;

    let mut actions: Vec<ActionName> = Vec::new();
    let mut dropped = Vec::new();
    for item in &items {
        match item.parse::<ActionName>() {
            Ok(a) if valid.contains(&a) => {
                if !actions.contains(&a) {
                    actions.push(a);
                }
            }
            _ => dropped.push(item.clone()),
        }
    }
    if actions.is_empty() {
        return Err(ParseError::NoValidActions(items));
    }
    if !dropped.is_empty() {
        log::warn!("dropped non-whitelisted actions: {dropped:?}");
    }

    let mut rest = strip_separators(&raw[end..]);
    let mut short_label = None;
    if let Some((label, next)) = quoted_at(rest, 0) {
        short_label = Some(label.to_string());
        rest = strip_separators(&rest[next..]);
    }
    let explanation = match quoted_at(rest, 0) {
        Some((text, next)) if rest[next..].trim().is_empty() => text.to_string(),
        _ => rest.trim().to_string(),
    };

    Ok(Decision { actions, short_label, explanation, raw: raw.to_string(), latency: 0.0, dropped })
}
