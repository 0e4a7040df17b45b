//! The versioned CSV tables written and read by the CLI.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::CliError;

pub const SCHEMA_LINE: &str = "# edca-perf v1";

pub const COLUMNS: [&str; 13] = [
    "n",
    "ac",
    "source",
    "e_delay_us",
    "e_delay_ms",
    "jitter_us",
    "jitter_ms",
    "p_coll",
    "p_drop",
    "tau",
    "delay_ci_us",
    "jitter_ci_us",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Analytic,
    Simulated,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Analytic => "analytic",
            Source::Simulated => "simulated",
        })
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "analytic" => Ok(Source::Analytic),
            "simulated" => Ok(Source::Simulated),
            other => Err(format!("unknown source `{other}`")),
        }
    }
}

/// One (n, AC, source) result. Missing values are NaN and written as empty
/// fields.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputRow {
    pub n: u32,
    pub ac: usize,
    pub source: Source,
    pub e_delay_us: f64,
    pub jitter_us: f64,
    pub p_coll: f64,
    pub p_drop: f64,
    pub tau: f64,
    pub delay_ci_us: f64,
    pub jitter_ci_us: f64,
    pub status: String,
}

impl OutputRow {
    pub fn empty(n: u32, ac: usize, source: Source, status: &str) -> Self {
        OutputRow {
            n,
            ac,
            source,
            e_delay_us: f64::NAN,
            jitter_us: f64::NAN,
            p_coll: f64::NAN,
            p_drop: f64::NAN,
            tau: f64::NAN,
            delay_ci_us: f64::NAN,
            jitter_ci_us: f64::NAN,
            status: status.to_string(),
        }
    }

    fn fields(&self) -> [String; 13] {
        [
            self.n.to_string(),
            self.ac.to_string(),
            self.source.to_string(),
            fixed(self.e_delay_us, 3),
            fixed(self.e_delay_us / 1000.0, 6),
            fixed(self.jitter_us, 3),
            fixed(self.jitter_us / 1000.0, 6),
            fixed(self.p_coll, 9),
            fixed(self.p_drop, 9),
            fixed(self.tau, 9),
            fixed(self.delay_ci_us, 3),
            fixed(self.jitter_ci_us, 3),
            self.status.clone(),
        ]
    }
}

/// Fixed-point decimal, empty for non-finite values.
pub fn fixed(x: f64, decimals: usize) -> String {
    if x.is_finite() {
        format!("{x:.decimals$}")
    } else {
        String::new()
    }
}

fn to_csv(header: &[&str], records: impl IntoIterator<Item = Vec<String>>) -> Result<String, CliError> {
    let mut out = Vec::new();
    out.extend_from_slice(SCHEMA_LINE.as_bytes());
    out.push(b'\n');
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut out);
        w.write_record(header).map_err(csv_error)?;
        for record in records {
            w.write_record(&record).map_err(csv_error)?;
        }
        w.flush().map_err(|e| CliError::Csv(e.to_string()))?;
    }
    String::from_utf8(out).map_err(|e| CliError::Csv(e.to_string()))
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Csv(e.to_string())
}

pub fn write_rows(rows: &[OutputRow]) -> Result<String, CliError> {
    to_csv(&COLUMNS, rows.iter().map(|r| r.fields().to_vec()))
}

fn parse_field<T: FromStr>(record: &csv::StringRecord, idx: usize, line: u64) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    let raw = record.get(idx).unwrap_or("");
    raw.parse::<T>()
        .map_err(|e| CliError::Csv(format!("line {line}, column {}: {e}", COLUMNS[idx])))
}

fn parse_float(record: &csv::StringRecord, idx: usize, line: u64) -> Result<f64, CliError> {
    match record.get(idx).unwrap_or("") {
        "" => Ok(f64::NAN),
        _ => parse_field(record, idx, line),
    }
}

pub fn read_rows(text: &str) -> Result<Vec<OutputRow>, CliError> {
    if text.lines().next() != Some(SCHEMA_LINE) {
        return Err(CliError::Csv(format!("missing `{SCHEMA_LINE}` header line")));
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.iter().collect::<Vec<_>>() != COLUMNS {
        return Err(CliError::Csv("unexpected column layout".into()));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push(OutputRow {
            n: parse_field(&record, 0, line)?,
            ac: parse_field(&record, 1, line)?,
            source: parse_field(&record, 2, line)?,
            e_delay_us: parse_float(&record, 3, line)?,
            jitter_us: parse_float(&record, 5, line)?,
            p_coll: parse_float(&record, 7, line)?,
            p_drop: parse_float(&record, 8, line)?,
            tau: parse_float(&record, 9, line)?,
            delay_ci_us: parse_float(&record, 10, line)?,
            jitter_ci_us: parse_float(&record, 11, line)?,
            status: record.get(12).unwrap_or("").to_string(),
        });
    }
    Ok(rows)
}

/// Relative gap between two tables at one (n, AC) key.
#[derive(Debug, Clone, PartialEq)]
pub struct Gap {
    pub n: u32,
    pub ac: usize,
    pub delay_ref: f64,
    pub delay_other: f64,
    pub jitter_ref: f64,
    pub jitter_other: f64,
}

impl Gap {
    pub fn delay_rel(&self) -> f64 {
        relative(self.delay_other, self.delay_ref)
    }

    pub fn jitter_rel(&self) -> f64 {
        relative(self.jitter_other, self.jitter_ref)
    }
}

fn relative(other: f64, reference: f64) -> f64 {
    if other == reference {
        0.0
    } else {
        (other - reference) / reference
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub gaps: Vec<Gap>,
    /// Station counts at which the two delay orderings disagree.
    pub ordering_mismatches: Vec<u32>,
}

impl Comparison {
    pub fn ordering_agrees(&self) -> bool {
        self.ordering_mismatches.is_empty()
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let header = [
            "n",
            "ac",
            "delay_ref_us",
            "delay_other_us",
            "delay_rel_err",
            "jitter_ref_us",
            "jitter_other_us",
            "jitter_rel_err",
        ];
        to_csv(
            &header,
            self.gaps.iter().map(|g| {
                vec![
                    g.n.to_string(),
                    g.ac.to_string(),
                    fixed(g.delay_ref, 3),
                    fixed(g.delay_other, 3),
                    fixed(g.delay_rel(), 6),
                    fixed(g.jitter_ref, 3),
                    fixed(g.jitter_other, 3),
                    fixed(g.jitter_rel(), 6),
                ]
            }),
        )
    }
}

/// Delay with a missing value read as "longer than anything measured".
fn ordering_key(delay: f64) -> f64 {
    if delay.is_nan() {
        f64::INFINITY
    } else {
        delay
    }
}

/// A missing value ranks above every known one; a pair missing on one side
/// entirely is left undecided.
fn pair_agrees(a: (f64, f64), b: (f64, f64)) -> bool {
    let (a0, a1) = (ordering_key(a.0), ordering_key(a.1));
    let (b0, b1) = (ordering_key(b.0), ordering_key(b.1));
    if a0.is_infinite() && a1.is_infinite() || b0.is_infinite() && b1.is_infinite() {
        return true;
    }
    a0.partial_cmp(&a1) == b0.partial_cmp(&b1)
}

/// Pair up two tables by (n, AC). The key sets must be identical.
pub fn compare(reference: &[OutputRow], other: &[OutputRow]) -> Result<Comparison, CliError> {
    let index = |rows: &[OutputRow]| -> Result<BTreeMap<(u32, usize), OutputRow>, CliError> {
        let mut map = BTreeMap::new();
        for row in rows {
            if map.insert((row.n, row.ac), row.clone()).is_some() {
                return Err(CliError::KeyMismatch(format!("duplicate row n={} ac={}", row.n, row.ac)));
            }
        }
        Ok(map)
    };
    let a = index(reference)?;
    let b = index(other)?;
    if let Some(key) = a.keys().find(|k| !b.contains_key(k)).or_else(|| b.keys().find(|k| !a.contains_key(k))) {
        return Err(CliError::KeyMismatch(format!(
            "row n={} ac={} present in only one table",
            key.0, key.1
        )));
    }

    let gaps: Vec<Gap> = a
        .iter()
        .map(|(&(n, ac), ra)| {
            let rb = &b[&(n, ac)];
            Gap {
                n,
                ac,
                delay_ref: ra.e_delay_us,
                delay_other: rb.e_delay_us,
                jitter_ref: ra.jitter_us,
                jitter_other: rb.jitter_us,
            }
        })
        .collect();

    let mut by_n: BTreeMap<u32, Vec<&Gap>> = BTreeMap::new();
    for g in &gaps {
        by_n.entry(g.n).or_default().push(g);
    }
    let ordering_mismatches = by_n
        .into_iter()
        .filter(|(_, group)| {
            group.iter().enumerate().any(|(i, x)| {
                group[i + 1..]
                    .iter()
                    .any(|y| !pair_agrees((x.delay_ref, y.delay_ref), (x.delay_other, y.delay_other)))
            })
        })
        .map(|(n, _)| n)
        .collect();
    Ok(Comparison {
        gaps,
        ordering_mismatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: u32, ac: usize, delay: f64) -> OutputRow {
        OutputRow {
            e_delay_us: delay,
            jitter_us: delay / 2.0,
            ..OutputRow::empty(n, ac, Source::Analytic, "ok")
        }
    }

    #[test]
    fn round_trip() {
        let mut rows = vec![row(5, 0, 1234.5678), row(5, 1, f64::NAN)];
        rows[1].status = "censored".into();
        rows[0].p_coll = 0.25;
        let text = write_rows(&rows).unwrap();
        assert!(text.starts_with("# edca-perf v1\nn,ac,source,e_delay_us,e_delay_ms,"));
        assert!(text.contains("5,0,analytic,1234.568,1.234568,617.284,0.617284,0.250000000,,,,,ok\n"));
        let back = read_rows(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].e_delay_us, 1234.568);
        assert!(back[1].e_delay_us.is_nan());
        assert_eq!(back[1].status, "censored");
        assert!(read_rows("n,ac\n").is_err());
    }

    #[test]
    fn identical_tables_have_zero_gaps() {
        let rows: Vec<_> = (0..4).map(|ac| row(10, ac, 100.0 * (ac + 1) as f64)).collect();
        let c = compare(&rows, &rows).unwrap();
        assert!(c.gaps.iter().all(|g| g.delay_rel() == 0.0 && g.jitter_rel() == 0.0));
        assert!(c.ordering_agrees());
    }

    #[test]
    fn missing_rows_are_a_key_mismatch() {
        let rows: Vec<_> = (0..4).map(|ac| row(10, ac, 1.0)).collect();
        assert!(matches!(compare(&rows, &rows[..3]), Err(CliError::KeyMismatch(_))));
        assert!(matches!(compare(&rows[..3], &rows), Err(CliError::KeyMismatch(_))));
    }

    #[test]
    fn ordering_with_missing_values() {
        let a: Vec<_> = [1.0, 2.0, 3.0, 4.0].iter().enumerate().map(|(i, &d)| row(5, i, d)).collect();
        let mut b = a.clone();
        b[3].e_delay_us = f64::NAN;
        assert!(compare(&a, &b).unwrap().ordering_agrees());
        b[2].e_delay_us = f64::NAN;
        assert!(compare(&a, &b).unwrap().ordering_agrees());
        b[0].e_delay_us = 10.0;
        let c = compare(&a, &b).unwrap();
        assert_eq!(c.ordering_mismatches, vec![5]);
        assert!((c.gaps[0].delay_rel() - 9.0).abs() < 1e-15);
    }
}
