//! CSV formats: transcripts, run logs and replay predictions.
//!
//! Arms are written 1-based. Reals are written with 17 significant digits so
//! that parsing a written file gives back the same bits.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, WriterBuilder};

use crate::error::{Error, Result};
use crate::metrics::RoundLog;
use crate::types::{ArmIndex, CostVector, History};

/// Formats a real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io.to_string()),
        other => Error::Parse { line, message: format!("{other:?}") },
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Cursor over the data rows of a CSV file that reports source lines in errors.
struct Rows {
    header: Vec<String>,
    records: Vec<(usize, StringRecord)>,
}

impl Rows {
    fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            records.push((line, rec));
        }
        Ok(Rows { header, records })
    }
}

fn field(rec: &StringRecord, line: usize, col: usize) -> Result<&str> {
    rec.get(col).ok_or_else(|| Error::Parse { line, message: format!("missing column {}", col + 1) })
}

fn parse_real(rec: &StringRecord, line: usize, col: usize) -> Result<f64> {
    let s = field(rec, line, col)?;
    s.parse::<f64>().map_err(|_| Error::Parse { line, message: format!("bad number {s:?} in column {}", col + 1) })
}

fn parse_opt_real(rec: &StringRecord, line: usize, col: usize) -> Result<Option<f64>> {
    if field(rec, line, col)?.is_empty() {
        Ok(None)
    } else {
        parse_real(rec, line, col).map(Some)
    }
}

fn parse_usize(rec: &StringRecord, line: usize, col: usize) -> Result<usize> {
    let s = field(rec, line, col)?;
    s.parse::<usize>().map_err(|_| Error::Parse { line, message: format!("bad integer {s:?} in column {}", col + 1) })
}

fn parse_arm(rec: &StringRecord, line: usize, col: usize, k: usize) -> Result<ArmIndex> {
    let n = parse_usize(rec, line, col)?;
    ArmIndex::from_number(n)
        .and_then(|a| a.check(k))
        .map_err(|_| Error::Parse { line, message: format!("arm {n} out of range 1..={k}") })
}

fn parse_costs(rec: &StringRecord, line: usize, from: usize, k: usize) -> Result<CostVector> {
    let costs = (from..from + k).map(|c| parse_real(rec, line, c)).collect::<Result<Vec<_>>>()?;
    CostVector::new(costs).map_err(|e| Error::Parse { line, message: e.to_string() })
}

fn check_t(t: usize, expected: usize, line: usize) -> Result<()> {
    if t != expected {
        return Err(Error::Parse { line, message: format!("expected round {expected}, found {t}") });
    }
    Ok(())
}

fn cost_header(k: usize) -> impl Iterator<Item = String> {
    (1..=k).map(|i| format!("c_{i}"))
}

fn weight_header(k: usize) -> impl Iterator<Item = String> {
    (1..=k).map(|i| format!("w_{i}"))
}

fn expect_header(found: &[String], expected: &[String]) -> Result<()> {
    if found != expected {
        return Err(Error::Parse { line: 1, message: format!("unexpected header {}", found.join(",")) });
    }
    Ok(())
}

/// Counts the `prefix_N` columns starting at `from`.
fn count_prefixed(header: &[String], from: usize, prefix: &str) -> usize {
    header[from.min(header.len())..].iter().enumerate().take_while(|(i, h)| **h == format!("{prefix}{}", i + 1)).count()
}

// ---- transcripts: t, c_1..c_k, a ----

pub fn write_transcript<W: Write>(writer: W, history: &History) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(writer);
    let header: Vec<String> =
        std::iter::once("t".to_owned()).chain(cost_header(history.k())).chain(["a".to_owned()]).collect();
    w.write_record(&header).map_err(csv_err)?;
    for r in history.rounds() {
        let row: Vec<String> = std::iter::once(r.t.to_string())
            .chain(r.costs.as_slice().iter().map(|c| fmt_real(*c)))
            .chain([r.action.number().to_string()])
            .collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_transcript<R: Read>(reader: R) -> Result<History> {
    let rows = Rows::read(reader)?;
    let k = count_prefixed(&rows.header, 1, "c_");
    if k < 2 {
        return Err(Error::Parse { line: 1, message: "transcript needs columns t, c_1..c_k, a with k >= 2".into() });
    }
    let expected: Vec<String> = std::iter::once("t".to_owned()).chain(cost_header(k)).chain(["a".to_owned()]).collect();
    expect_header(&rows.header, &expected)?;
    let mut history = History::new(k)?;
    for (i, (line, rec)) in rows.records.iter().enumerate() {
        check_t(parse_usize(rec, *line, 0)?, i + 1, *line)?;
        let costs = parse_costs(rec, *line, 1, k)?;
        let a = parse_arm(rec, *line, k + 1, k)?;
        history.push(costs, a)?;
    }
    Ok(history)
}

pub fn read_transcript(path: &Path) -> Result<History> {
    parse_transcript(open(path)?)
}

pub fn save_transcript(path: &Path, history: &History) -> Result<()> {
    write_transcript(create(path)?, history)
}

// ---- run logs ----

fn run_log_header(k: usize, extras: bool) -> Vec<String> {
    let mut h: Vec<String> = std::iter::once("t".to_owned()).chain(cost_header(k)).collect();
    h.extend(["a", "p", "o", "ar", "pr", "er", "cum_ar", "cum_pr"].map(str::to_owned));
    if extras {
        h.extend(weight_header(k));
        h.extend(["lemma1_margin", "cv_empty"].map(str::to_owned));
    }
    h
}

/// Writes run logs; `extras` adds the weight, margin and empty-set columns.
pub fn write_run_log<W: Write>(writer: W, k: usize, logs: &[RoundLog], extras: bool) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(writer);
    w.write_record(run_log_header(k, extras)).map_err(csv_err)?;
    for l in logs {
        let mut row: Vec<String> =
            std::iter::once(l.t.to_string()).chain(l.costs.as_slice().iter().map(|c| fmt_real(*c))).collect();
        row.extend([l.a, l.p, l.o].map(|a| a.number().to_string()));
        row.extend([l.ar, l.pr, l.er, l.cum_ar, l.cum_pr].map(fmt_real));
        if extras {
            match &l.weights {
                Some(ws) => row.extend(ws.iter().map(|w| fmt_real(*w))),
                None => row.extend(std::iter::repeat_n(String::new(), k)),
            }
            row.push(l.lemma1_margin.map(fmt_real).unwrap_or_default());
            row.push(u8::from(l.cv_empty).to_string());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_run_log<R: Read>(reader: R) -> Result<Vec<RoundLog>> {
    let rows = Rows::read(reader)?;
    let k = count_prefixed(&rows.header, 1, "c_");
    if k < 2 {
        return Err(Error::Parse { line: 1, message: "run log needs cost columns c_1..c_k with k >= 2".into() });
    }
    let extras = rows.header.len() > k + 9;
    expect_header(&rows.header, &run_log_header(k, extras))?;
    let mut logs = Vec::with_capacity(rows.records.len());
    for (i, (line, rec)) in rows.records.iter().enumerate() {
        let line = *line;
        let t = parse_usize(rec, line, 0)?;
        check_t(t, i + 1, line)?;
        let costs = parse_costs(rec, line, 1, k)?;
        let arm = |col| parse_arm(rec, line, col, k);
        let real = |col| parse_real(rec, line, col);
        let base = k + 1;
        let mut log = RoundLog {
            t,
            costs,
            a: arm(base)?,
            p: arm(base + 1)?,
            o: arm(base + 2)?,
            ar: real(base + 3)?,
            pr: real(base + 4)?,
            er: real(base + 5)?,
            cum_ar: real(base + 6)?,
            cum_pr: real(base + 7)?,
            weights: None,
            lemma1_margin: None,
            cv_empty: false,
        };
        if extras {
            let wbase = base + 8;
            let ws = (wbase..wbase + k).map(|c| parse_opt_real(rec, line, c)).collect::<Result<Vec<_>>>()?;
            log.weights = match ws.iter().filter(|w| w.is_some()).count() {
                0 => None,
                n if n == k => Some(ws.into_iter().flatten().collect()),
                _ => return Err(Error::Parse { line, message: "weights must be all present or all empty".into() }),
            };
            log.lemma1_margin = parse_opt_real(rec, line, wbase + k)?;
            log.cv_empty = match field(rec, line, wbase + k + 1)? {
                "0" => false,
                "1" => true,
                other => return Err(Error::Parse { line, message: format!("cv_empty must be 0 or 1, got {other:?}") }),
            };
        }
        logs.push(log);
    }
    Ok(logs)
}

pub fn save_run_log(path: &Path, k: usize, logs: &[RoundLog], extras: bool) -> Result<()> {
    write_run_log(create(path)?, k, logs, extras)
}

pub fn read_run_log(path: &Path) -> Result<Vec<RoundLog>> {
    parse_run_log(open(path)?)
}

// ---- replay predictions: t, p, w_1..w_k, a ----

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub t: usize,
    pub p: ArmIndex,
    pub weights: Vec<f64>,
    pub a: ArmIndex,
}

pub fn write_predictions<W: Write>(writer: W, k: usize, rows: &[PredictionRow]) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(writer);
    let header: Vec<String> =
        ["t".to_owned(), "p".to_owned()].into_iter().chain(weight_header(k)).chain(["a".to_owned()]).collect();
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let row: Vec<String> = [r.t.to_string(), r.p.number().to_string()]
            .into_iter()
            .chain(r.weights.iter().map(|w| fmt_real(*w)))
            .chain([r.a.number().to_string()])
            .collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_predictions<R: Read>(reader: R) -> Result<Vec<PredictionRow>> {
    let rows = Rows::read(reader)?;
    let k = count_prefixed(&rows.header, 2, "w_");
    let expected: Vec<String> =
        ["t".to_owned(), "p".to_owned()].into_iter().chain(weight_header(k)).chain(["a".to_owned()]).collect();
    expect_header(&rows.header, &expected)?;
    rows.records
        .iter()
        .enumerate()
        .map(|(i, (line, rec))| {
            let t = parse_usize(rec, *line, 0)?;
            check_t(t, i + 1, *line)?;
            Ok(PredictionRow {
                t,
                p: parse_arm(rec, *line, 1, k)?,
                weights: (2..2 + k).map(|c| parse_real(rec, *line, c)).collect::<Result<_>>()?,
                a: parse_arm(rec, *line, 2 + k, k)?,
            })
        })
        .collect()
}

pub fn save_predictions(path: &Path, k: usize, rows: &[PredictionRow]) -> Result<()> {
    write_predictions(create(path)?, k, rows)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    parse_predictions(open(path)?)
}
