use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use super::{tokenize, DataError, Example, Polarity};

/// Result of a TOWE-style import: accepted examples plus skipped rows.
#[derive(Debug, Clone, Default)]
pub struct ToweImport {
    pub examples: Vec<Example>,
    /// `(1-based line number, reason)`
    pub skipped: Vec<(usize, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tag {
    Begin,
    Inside,
    Outside,
}

/// Accepts `B`, `I`, `O`, `B-ASP`-style tags, and `word\TAG` pairs.
fn parse_tag(item: &str) -> Option<Tag> {
    let tag = item.rsplit('\\').next().unwrap_or(item);
    match tag.chars().next()?.to_ascii_uppercase() {
        'B' => Some(Tag::Begin),
        'I' => Some(Tag::Inside),
        'O' => Some(Tag::Outside),
        _ => None,
    }
}

fn parse_tags(column: &str) -> Result<Vec<Tag>, String> {
    column
        .split_whitespace()
        .map(|item| parse_tag(item).ok_or_else(|| format!("bad tag `{item}`")))
        .collect()
}

/// Contiguous B/I runs as half-open spans.
fn spans(tags: &[Tag]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, t) in tags.iter().enumerate() {
        match (t, start) {
            (Tag::Begin, Some(s)) => {
                out.push((s, i));
                start = Some(i);
            }
            (Tag::Begin, None) | (Tag::Inside, None) => start = Some(i),
            (Tag::Outside, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, tags.len()));
    }
    out
}

fn parse_row(line_no: usize, line: &str) -> Result<Example, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    let (id, cols) = match cols.len() {
        4 => (format!("towe-{line_no}"), &cols[..]),
        5 => (cols[0].trim().to_string(), &cols[1..]),
        n => return Err(format!("expected 4 or 5 tab-separated columns, got {n}")),
    };
    let tokens = tokenize(cols[0]);
    let target = parse_tags(cols[1])?;
    let opinion = parse_tags(cols[2])?;
    let polarity: Polarity = cols[3].parse()?;
    if target.len() != tokens.len() || opinion.len() != tokens.len() {
        return Err(format!(
            "token counts differ: sentence {}, target tags {}, opinion tags {}",
            tokens.len(),
            target.len(),
            opinion.len()
        ));
    }
    let target_spans = spans(&target);
    let (start, end) = match target_spans.as_slice() {
        [] => return Err("no target tagged".into()),
        [one] => *one,
        _ => return Err("more than one target span".into()),
    };
    let opinions: Vec<usize> = opinion
        .iter()
        .enumerate()
        .filter(|(_, t)| **t != Tag::Outside)
        .map(|(i, _)| i)
        .collect();
    let annotated = !opinions.is_empty();
    let example = Example {
        id,
        tokens,
        aspect_span: [start, end],
        polarity,
        opinion_indices: annotated.then_some(opinions),
        annotated,
    };
    example.validate().map_err(|e| e.to_string())?;
    Ok(example)
}

/// Parses TOWE-style rows: `[id \t] sentence \t target tags \t opinion tags \t polarity`.
///
/// Rows that fail to parse or violate example invariants are skipped and
/// reported rather than aborting the import.
pub fn parse_towe(reader: impl Read) -> Result<ToweImport, DataError> {
    let mut out = ToweImport::default();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_row(line_no, &line) {
            Ok(e) => out.examples.push(e),
            Err(reason) => out.skipped.push((line_no, reason)),
        }
    }
    Ok(out)
}

pub fn import_towe(path: impl AsRef<Path>) -> Result<ToweImport, DataError> {
    parse_towe(File::open(path)?)
}
