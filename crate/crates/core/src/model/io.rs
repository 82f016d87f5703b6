//! Corpus CSV and ledger JSON files.
//!
//! A corpus file holds one individual per row, comma-separated integer
//! states, no header. A single-row file of the same shape carries one
//! original or leaked sequence; `-1` marks a removed point.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{Alphabet, Sequence, SharingLedger, State};
use crate::{Error, Result};

fn parse_row(path: &Path, line_no: usize, line: &str) -> Result<Vec<State>> {
    line.split(',')
        .map(|field| {
            field.trim().parse::<State>().map_err(|e| {
                Error::parse(
                    path,
                    format!(
                        "line {line_no}: {:?} is not an integer state ({e})",
                        field.trim()
                    ),
                )
            })
        })
        .collect()
}

fn read_rows(path: &Path) -> Result<Vec<Vec<State>>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        rows.push(parse_row(path, i + 1, line)?);
    }
    Ok(rows)
}

fn infer_alphabet(rows: &[Vec<State>], m: Option<usize>) -> Result<Alphabet> {
    match m {
        Some(m) => Alphabet::new(m),
        None => {
            let max = rows.iter().flatten().copied().max().unwrap_or(0);
            Alphabet::new((max.max(1) + 1) as usize)
        }
    }
}

/// Read a corpus of equal-length sequences. When `m` is `None` the alphabet
/// size is the largest observed state plus one (at least 2).
pub fn read_corpus(path: impl AsRef<Path>, m: Option<usize>) -> Result<Vec<Sequence>> {
    let path = path.as_ref();
    let rows = read_rows(path)?;
    if rows.is_empty() {
        return Err(Error::parse(path, "corpus has no rows"));
    }
    let alphabet = infer_alphabet(&rows, m)?;
    let l = rows[0].len();
    rows.into_iter()
        .enumerate()
        .map(|(i, row)| {
            if row.len() != l {
                return Err(Error::Dimension(format!(
                    "{}: row {} has {} points, row 1 has {l}",
                    path.display(),
                    i + 1,
                    row.len()
                )));
            }
            Sequence::new(row, alphabet)
        })
        .collect()
}

pub fn write_corpus(path: impl AsRef<Path>, corpus: &[Sequence]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for s in corpus {
        push_row(&mut out, s.values());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn push_row(out: &mut String, values: &[State]) {
    use std::fmt::Write as _;
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{v}").unwrap();
    }
    out.push('\n');
}

/// Read a single sequence (the first non-empty row). Removed points (`-1`)
/// are accepted.
pub fn read_row(path: impl AsRef<Path>, alphabet: Alphabet) -> Result<Sequence> {
    let path = path.as_ref();
    let rows = read_rows(path)?;
    let row = rows
        .into_iter()
        .next()
        .ok_or_else(|| Error::parse(path, "file has no rows"))?;
    Sequence::leaked(row, alphabet)
}

/// Read row `index` (0-based) of a corpus file as an original sequence.
pub fn read_corpus_row(path: impl AsRef<Path>, index: usize, m: Option<usize>) -> Result<Sequence> {
    let path = path.as_ref();
    let mut corpus = read_corpus(path, m)?;
    if index >= corpus.len() {
        return Err(Error::Argument(format!(
            "{} has {} rows, asked for row {}",
            path.display(),
            corpus.len(),
            index + 1
        )));
    }
    Ok(corpus.swap_remove(index))
}

pub fn write_row(path: impl AsRef<Path>, seq: &Sequence) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    push_row(&mut out, seq.values());
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn save_ledger(path: impl AsRef<Path>, ledger: &SharingLedger) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(&mut file, ledger)?;
    file.write_all(b"\n").map_err(|e| Error::io(path, e))
}

pub fn load_ledger(path: impl AsRef<Path>) -> Result<SharingLedger> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ledger: SharingLedger = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path, format!("invalid ledger: {e}")))?;
    ledger.check_schema()?;
    Ok(ledger)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_round_trip_and_inference() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        fs::write(&path, "0,1,2\n# comment\n2, 1 ,0\n\n").unwrap();
        let corpus = read_corpus(&path, None).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus[1].values(), &[2, 1, 0]);
        assert_eq!(corpus[0].alphabet().size(), 3);
        write_corpus(&path, &corpus).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "0,1,2\n2,1,0\n");
    }

    #[test]
    fn ragged_corpus_is_a_dimension_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        fs::write(&path, "0,1,2\n0,1\n").unwrap();
        assert!(matches!(read_corpus(&path, None), Err(Error::Dimension(_))));
        fs::write(&path, "0,x\n").unwrap();
        assert!(matches!(read_corpus(&path, None), Err(Error::Parse { .. })));
    }

    #[test]
    fn leaked_row_keeps_removed_points() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        fs::write(&path, "0,-1,2\n").unwrap();
        let s = read_row(&path, Alphabet::new(3).unwrap()).unwrap();
        assert_eq!(s.values(), &[0, -1, 2]);
    }
}
