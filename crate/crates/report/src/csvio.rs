//! Frozen CSV formats for pulses, pairs, events, rejections and the
//! likelihood map. Records end in CRLF.

use std::str::FromStr;

use pulsepair_core::quantfilter::{RejectRule, Rejection};
use pulsepair_core::{LikelihoodMap, PolChannel, Pulse, PulsePair};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected header {got:?}, expected {want:?}")]
    Header { got: Vec<String>, want: Vec<String> },
    #[error("line {line}: column {column}: cannot parse {value:?}")]
    Field {
        line: u64,
        column: &'static str,
        value: String,
    },
}

pub const PULSE_COLUMNS: [&str; 6] = ["pol", "mjd", "freq_hz", "snr", "frame_index", "chan_index"];

pub const PAIR_COLUMNS: [&str; 12] = [
    "pair_id",
    "mjd",
    "dt_s",
    "dt_raw_s",
    "f_l_hz",
    "f_r_hz",
    "df_hz",
    "snr_l",
    "snr_r",
    "snr_metric",
    "ra_hours",
    "ra_bin",
];

pub const EVENT_COLUMNS: [&str; 12] = [
    "pair_id",
    "mjd",
    "dt_s",
    "f_l_hz",
    "f_r_hz",
    "df_hz",
    "snr_l",
    "snr_r",
    "snr_metric",
    "ra_hours",
    "ra_bin",
    "filters_passed",
];

pub const REJECTION_COLUMNS: [&str; 3] = ["pair_id", "rule", "detail"];

pub const LIKELIHOOD_COLUMNS: [&str; 6] = ["dt_s", "ra_bin", "k", "n", "log10_pmf", "log10_tail"];

/// Fixed-point formatting without a negative zero.
pub fn fixed(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn quantize(x: f64, decimals: usize) -> f64 {
    fixed(x, decimals).parse().expect("formatted float parses")
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    w.into_inner().expect("in-memory writer cannot fail")
}

fn opt_usize(v: Option<usize>) -> String {
    v.map(|b| b.to_string()).unwrap_or_default()
}

struct Records {
    rows: Vec<(u64, csv::StringRecord)>,
}

fn read_records(bytes: &[u8], columns: &[&str]) -> Result<Records, CsvError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = r.headers()?.clone();
    if header.iter().ne(columns.iter().copied()) {
        return Err(CsvError::Header {
            got: header.iter().map(String::from).collect(),
            want: columns.iter().map(|s| s.to_string()).collect(),
        });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        rows.push((line, rec));
    }
    Ok(Records { rows })
}

fn field<T: FromStr>(rec: &csv::StringRecord, line: u64, columns: &[&'static str], i: usize) -> Result<T, CsvError> {
    let value = rec.get(i).unwrap_or("");
    value.parse().map_err(|_| CsvError::Field {
        line,
        column: columns[i],
        value: value.to_string(),
    })
}

fn opt_field(rec: &csv::StringRecord, line: u64, columns: &[&'static str], i: usize) -> Result<Option<usize>, CsvError> {
    if rec.get(i).unwrap_or("").is_empty() {
        Ok(None)
    } else {
        field(rec, line, columns, i).map(Some)
    }
}

pub fn pulses_to_csv(pulses: &[Pulse]) -> Vec<u8> {
    let mut w = writer();
    w.write_record(PULSE_COLUMNS).expect("in-memory");
    for p in pulses {
        w.write_record([
            p.pol.as_str().to_string(),
            fixed(p.mjd, 14),
            fixed(p.freq_hz, 3),
            fixed(p.snr, 6),
            p.frame_index.to_string(),
            p.chan_index.to_string(),
        ])
        .expect("in-memory");
    }
    finish(w)
}

pub fn pulses_from_csv(bytes: &[u8]) -> Result<Vec<Pulse>, CsvError> {
    let c = &PULSE_COLUMNS;
    read_records(bytes, c)?
        .rows
        .iter()
        .map(|(line, rec)| {
            let pol: PolChannel = field(rec, *line, c, 0)?;
            Ok(Pulse {
                pol,
                mjd: field(rec, *line, c, 1)?,
                freq_hz: field(rec, *line, c, 2)?,
                snr: field(rec, *line, c, 3)?,
                frame_index: field(rec, *line, c, 4)?,
                chan_index: field(rec, *line, c, 5)?,
            })
        })
        .collect()
}

pub fn pairs_to_csv(pairs: &[PulsePair]) -> Vec<u8> {
    let mut w = writer();
    w.write_record(PAIR_COLUMNS).expect("in-memory");
    for p in pairs {
        w.write_record([
            p.id.to_string(),
            fixed(p.mjd, 9),
            fixed(p.dt_s, 3),
            fixed(p.raw_dt_s(), 6),
            fixed(p.l.freq_hz, 3),
            fixed(p.r.freq_hz, 3),
            fixed(p.df_hz, 3),
            fixed(p.l.snr, 3),
            fixed(p.r.snr, 3),
            fixed(p.snr_metric, 3),
            fixed(p.ra_hours, 6),
            opt_usize(p.ra_bin),
        ])
        .expect("in-memory");
    }
    finish(w)
}

/// One row of `events.csv`. Values are held at their printed precision so
/// that writing and re-reading a row is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRow {
    pub pair_id: usize,
    pub mjd: f64,
    pub dt_s: f64,
    pub f_l_hz: f64,
    pub f_r_hz: f64,
    pub df_hz: f64,
    pub snr_l: f64,
    pub snr_r: f64,
    pub snr_metric: f64,
    pub ra_hours: f64,
    pub ra_bin: Option<usize>,
    pub filters_passed: Vec<String>,
}

impl EventRow {
    pub fn from_pair(p: &PulsePair, filters_passed: &[String]) -> Self {
        EventRow {
            pair_id: p.id,
            mjd: quantize(p.mjd, 9),
            dt_s: quantize(p.dt_s, 3),
            f_l_hz: quantize(p.l.freq_hz, 3),
            f_r_hz: quantize(p.r.freq_hz, 3),
            df_hz: quantize(p.df_hz, 3),
            snr_l: quantize(p.l.snr, 3),
            snr_r: quantize(p.r.snr, 3),
            snr_metric: quantize(p.snr_metric, 3),
            ra_hours: quantize(p.ra_hours, 6),
            ra_bin: p.ra_bin,
            filters_passed: filters_passed.to_vec(),
        }
    }
}

/// Writes events sorted by MJD (ties by pair id).
pub fn events_to_csv(events: &[EventRow]) -> Vec<u8> {
    let mut sorted: Vec<&EventRow> = events.iter().collect();
    sorted.sort_by(|a, b| a.mjd.total_cmp(&b.mjd).then(a.pair_id.cmp(&b.pair_id)));
    let mut w = writer();
    w.write_record(EVENT_COLUMNS).expect("in-memory");
    for e in sorted {
        w.write_record([
            e.pair_id.to_string(),
            fixed(e.mjd, 9),
            fixed(e.dt_s, 3),
            fixed(e.f_l_hz, 3),
            fixed(e.f_r_hz, 3),
            fixed(e.df_hz, 3),
            fixed(e.snr_l, 3),
            fixed(e.snr_r, 3),
            fixed(e.snr_metric, 3),
            fixed(e.ra_hours, 6),
            opt_usize(e.ra_bin),
            e.filters_passed.join(";"),
        ])
        .expect("in-memory");
    }
    finish(w)
}

pub fn events_from_csv(bytes: &[u8]) -> Result<Vec<EventRow>, CsvError> {
    let c = &EVENT_COLUMNS;
    read_records(bytes, c)?
        .rows
        .iter()
        .map(|(line, rec)| {
            let line = *line;
            let filters = rec.get(11).unwrap_or("");
            Ok(EventRow {
                pair_id: field(rec, line, c, 0)?,
                mjd: field(rec, line, c, 1)?,
                dt_s: field(rec, line, c, 2)?,
                f_l_hz: field(rec, line, c, 3)?,
                f_r_hz: field(rec, line, c, 4)?,
                df_hz: field(rec, line, c, 5)?,
                snr_l: field(rec, line, c, 6)?,
                snr_r: field(rec, line, c, 7)?,
                snr_metric: field(rec, line, c, 8)?,
                ra_hours: field(rec, line, c, 9)?,
                ra_bin: opt_field(rec, line, c, 10)?,
                filters_passed: if filters.is_empty() {
                    Vec::new()
                } else {
                    filters.split(';').map(String::from).collect()
                },
            })
        })
        .collect()
}

pub fn rejections_to_csv(rejections: &[Rejection]) -> Vec<u8> {
    let mut w = writer();
    w.write_record(REJECTION_COLUMNS).expect("in-memory");
    for r in rejections {
        w.write_record([r.pair_id.to_string(), r.rule.as_str().to_string(), r.detail.clone()])
            .expect("in-memory");
    }
    finish(w)
}

pub fn rejections_from_csv(bytes: &[u8]) -> Result<Vec<Rejection>, CsvError> {
    let c = &REJECTION_COLUMNS;
    read_records(bytes, c)?
        .rows
        .iter()
        .map(|(line, rec)| {
            let rule: RejectRule = field(rec, *line, c, 1)?;
            Ok(Rejection {
                pair_id: field(rec, *line, c, 0)?,
                rule,
                detail: rec.get(2).unwrap_or("").to_string(),
            })
        })
        .collect()
}

/// One row of `likelihood.csv`, at printed precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodRow {
    pub dt_s: f64,
    pub ra_bin: usize,
    pub k: u64,
    pub n: u64,
    pub log10_pmf: f64,
    pub log10_tail: f64,
}

pub fn likelihood_rows(map: &LikelihoodMap) -> Vec<LikelihoodRow> {
    map.cells
        .iter()
        .map(|c| LikelihoodRow {
            dt_s: quantize(c.dt_s, 3),
            ra_bin: c.ra_bin,
            k: c.k,
            n: c.n,
            log10_pmf: quantize(c.log10_pmf, 6),
            log10_tail: quantize(c.log10_tail, 6),
        })
        .collect()
}

pub fn likelihood_to_csv(rows: &[LikelihoodRow]) -> Vec<u8> {
    let mut w = writer();
    w.write_record(LIKELIHOOD_COLUMNS).expect("in-memory");
    for r in rows {
        w.write_record([
            fixed(r.dt_s, 3),
            r.ra_bin.to_string(),
            r.k.to_string(),
            r.n.to_string(),
            fixed(r.log10_pmf, 6),
            fixed(r.log10_tail, 6),
        ])
        .expect("in-memory");
    }
    finish(w)
}

pub fn likelihood_from_csv(bytes: &[u8]) -> Result<Vec<LikelihoodRow>, CsvError> {
    let c = &LIKELIHOOD_COLUMNS;
    read_records(bytes, c)?
        .rows
        .iter()
        .map(|(line, rec)| {
            let line = *line;
            Ok(LikelihoodRow {
                dt_s: field(rec, line, c, 0)?,
                ra_bin: field(rec, line, c, 1)?,
                k: field(rec, line, c, 2)?,
                n: field(rec, line, c, 3)?,
                log10_pmf: field(rec, line, c, 4)?,
                log10_tail: field(rec, line, c, 5)?,
            })
        })
        .collect()
}
