use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{DataError, Example};

/// Reads one [`Example`] per non-blank line, validating each.
pub fn parse_jsonl(reader: impl Read) -> Result<Vec<Example>, DataError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let example: Example = serde_json::from_str(&line).map_err(|e| DataError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        example.validate().map_err(|e| DataError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(example);
    }
    Ok(out)
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Vec<Example>, DataError> {
    parse_jsonl(File::open(path)?)
}

pub fn write_jsonl(examples: &[Example], writer: impl Write) -> Result<(), DataError> {
    let mut w = BufWriter::new(writer);
    for e in examples {
        serde_json::to_writer(&mut w, e).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_jsonl(examples: &[Example], path: impl AsRef<Path>) -> Result<(), DataError> {
    write_jsonl(examples, File::create(path)?)
}
