use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use super::{Dataset, Event, EventSequence, Vocabulary};
use crate::{Error, Result};

pub const UNK_TOKEN: &str = "<UNK>";

/// Column names of the event CSV.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvSchema {
    pub seq_id: String,
    pub event_time: String,
    pub mcc: String,
    pub amount: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            seq_id: "seq_id".into(),
            event_time: "event_time".into(),
            mcc: "mcc".into(),
            amount: "amount".into(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// `seq_id,label` file.
    pub labels: Option<PathBuf>,
    /// Fixed vocabulary; codes outside it map to UNK. Built from the data when absent.
    pub vocab: Option<Vocabulary>,
}

fn parse_time(raw: &str) -> Option<i64> {
    let s = raw.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Schema(format!("{}: missing column `{name}`", path.display())))
}

struct RawRow {
    seq: usize,
    time: i64,
    code: String,
    amount: f64,
    order: usize,
}

/// Loads an event CSV, grouping rows by sequence id (in order of first
/// appearance) and sorting each sequence by time; ties keep file order.
pub fn load_csv(path: &Path, schema: &CsvSchema, opts: &LoadOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Empty(format!("{} has no header", path.display())));
    }
    let c_seq = column(&headers, &schema.seq_id, path)?;
    let c_time = column(&headers, &schema.event_time, path)?;
    let c_mcc = column(&headers, &schema.mcc, path)?;
    let c_amount = column(&headers, &schema.amount, path)?;

    let mut seq_index: HashMap<String, usize> = HashMap::new();
    let mut ids: Vec<String> = Vec::new();
    let mut rows: Vec<RawRow> = Vec::new();
    for (order, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |c: usize, name: &str| {
            record.get(c).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("missing field `{name}`"),
            })
        };
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let id = field(c_seq, &schema.seq_id)?;
        let time_raw = field(c_time, &schema.event_time)?;
        let time = parse_time(time_raw).ok_or_else(|| bad(format!("unparseable timestamp `{time_raw}`")))?;
        let code = field(c_mcc, &schema.mcc)?;
        if code.is_empty() {
            return Err(bad("empty mcc".into()));
        }
        let amount_raw = field(c_amount, &schema.amount)?;
        let amount: f64 = amount_raw
            .parse()
            .map_err(|_| bad(format!("unparseable amount `{amount_raw}`")))?;
        if !amount.is_finite() {
            return Err(bad(format!("non-finite amount `{amount_raw}`")));
        }
        let seq = *seq_index.entry(id.to_string()).or_insert_with(|| {
            ids.push(id.to_string());
            ids.len() - 1
        });
        rows.push(RawRow {
            seq,
            time,
            code: code.to_string(),
            amount,
            order,
        });
    }
    if rows.is_empty() {
        return Err(Error::Empty(format!("{} has no rows", path.display())));
    }

    let vocab = match &opts.vocab {
        Some(v) => v.clone(),
        None => Vocabulary::new(
            rows.iter()
                .map(|r| r.code.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        ),
    };

    rows.sort_by_key(|r| (r.seq, r.time, r.order));
    let mut sequences: Vec<EventSequence> = ids
        .into_iter()
        .map(|id| EventSequence {
            id,
            events: Vec::new(),
            label: None,
        })
        .collect();
    for r in rows {
        sequences[r.seq].events.push(Event {
            mcc: vocab.index(&r.code),
            amount: r.amount,
            time: r.time,
        });
    }

    let mut num_classes = 0;
    if let Some(lp) = &opts.labels {
        let labels = load_labels(lp)?;
        for s in &mut sequences {
            s.label = labels.get(&s.id).copied();
        }
        num_classes = labels.values().max().map_or(0, |&m| m + 1);
    }

    Ok(Dataset {
        sequences,
        vocab,
        num_classes,
        amount_stats: None,
    })
}

fn load_labels(path: &Path) -> Result<HashMap<String, usize>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let c_seq = column(&headers, "seq_id", path)?;
    let c_label = column(&headers, "label", path)?;
    let mut out = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record.get(c_seq).unwrap_or_default();
        let raw = record.get(c_label).unwrap_or_default();
        let label: usize = raw.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("label `{raw}` is not a non-negative integer"),
        })?;
        out.insert(id.to_string(), label);
    }
    Ok(out)
}

/// Writes `seq_id,event_time,mcc,amount` rows (raw codes) and, when the
/// dataset carries labels, a `seq_id,label` file.
pub fn write_csv(ds: &Dataset, events: &Path, labels: Option<&Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(events)?;
    w.write_record(["seq_id", "event_time", "mcc", "amount"])?;
    for s in &ds.sequences {
        for e in &s.events {
            let code = ds.vocab.code(e.mcc).unwrap_or(UNK_TOKEN);
            w.write_record([s.id.as_str(), &e.time.to_string(), code, &e.amount.to_string()])?;
        }
    }
    w.flush()?;
    if let Some(lp) = labels {
        let mut w = csv::Writer::from_path(lp)?;
        w.write_record(["seq_id", "label"])?;
        for s in &ds.sequences {
            if let Some(l) = s.label {
                w.write_record([s.id.as_str(), &l.to_string()])?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

/// One code per line; the first line is the UNK sentinel so that the
/// zero-based line number equals the index.
pub fn write_vocab(vocab: &Vocabulary, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{UNK_TOKEN}")?;
    for c in vocab.codes() {
        writeln!(w, "{c}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vocab(path: &Path) -> Result<Vocabulary> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(first)) if first.trim() == UNK_TOKEN => {}
        Some(Ok(first)) => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("expected `{UNK_TOKEN}` sentinel, found `{first}`"),
            })
        }
        Some(Err(e)) => return Err(e.into()),
        None => return Err(Error::Empty(format!("{} is empty", path.display()))),
    }
    let mut codes = Vec::new();
    for line in lines {
        let line = line?;
        let code = line.trim();
        if !code.is_empty() {
            codes.push(code.to_string());
        }
    }
    Ok(Vocabulary::new(codes))
}
