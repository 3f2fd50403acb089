use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};

use crate::error::{Error, Result};

/// Source variables of the daily dataset, in file order.
pub const SOURCE_VARIABLES: [&str; 13] = [
    "base", "peak", "permit", "oil", "coal", "natgas", "qwind", "temp", "sun", "eurusd", "i",
    "vix", "cpi",
];

/// Variables quoted in US dollars.
pub const DOLLAR_VARIABLES: [&str; 3] = ["oil", "coal", "natgas"];

/// US dollars per euro.
pub const FX_VARIABLE: &str = "eurusd";

const CPI_VARIABLE: &str = "cpi";
const DATE_FORMAT: &str = "%Y-%m-%d";

pub fn is_working_day(date: NaiveDate) -> bool {
    !matches!(date.weekday(), Weekday::Sat | Weekday::Sun)
}

/// One working day of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyRecord {
    pub date: NaiveDate,
    pub values: BTreeMap<String, f64>,
}

/// Calendar-aligned table of working-day observations.
///
/// Dates are strictly increasing. Missing observations are `None` until
/// [`fill_gaps`] has been applied.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyPanel {
    dates: Vec<NaiveDate>,
    names: Vec<String>,
    columns: Vec<Vec<Option<f64>>>,
}

impl DailyPanel {
    pub fn new(
        dates: Vec<NaiveDate>,
        names: Vec<String>,
        columns: Vec<Vec<Option<f64>>>,
    ) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::InvalidInput(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if let Some(c) = columns.iter().position(|c| c.len() != dates.len()) {
            return Err(Error::InvalidInput(format!(
                "column `{}` has {} values for {} dates",
                names[c],
                columns[c].len(),
                dates.len()
            )));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::Schema(format!("duplicate column `{name}`")));
            }
        }
        for w in dates.windows(2) {
            if w[1] == w[0] {
                return Err(Error::Integrity(format!("duplicate date {}", w[0])));
            }
            if w[1] < w[0] {
                return Err(Error::Integrity(format!(
                    "dates not increasing: {} after {}",
                    w[1], w[0]
                )));
            }
        }
        Ok(DailyPanel {
            dates,
            names,
            columns,
        })
    }

    /// Builds a complete panel from dense columns.
    pub fn from_dense(dates: Vec<NaiveDate>, columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let (names, values) = columns
            .into_iter()
            .map(|(n, v)| (n, v.into_iter().map(Some).collect()))
            .unzip();
        DailyPanel::new(dates, names, values)
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.dates.first().copied()
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.dates.last().copied()
    }

    pub fn variables(&self) -> &[String] {
        &self.names
    }

    pub fn has(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    /// The column as dense values; fails if the variable is absent or has gaps.
    pub fn dense(&self, name: &str) -> Result<Vec<f64>> {
        let col = self
            .column(name)
            .ok_or_else(|| Error::Schema(format!("missing variable `{name}`")))?;
        col.iter()
            .zip(&self.dates)
            .map(|(v, d)| {
                v.ok_or_else(|| Error::Data {
                    date: *d,
                    message: format!("missing value for `{name}`"),
                })
            })
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.columns.iter().flatten().all(Option::is_some)
    }

    pub fn missing_count(&self) -> usize {
        self.columns
            .iter()
            .flatten()
            .filter(|v| v.is_none())
            .count()
    }

    /// Fails with a schema error naming the first absent variable.
    pub fn require(&self, names: &[&str]) -> Result<()> {
        match names.iter().find(|n| !self.has(n)) {
            Some(n) => Err(Error::Schema(format!("missing variable `{n}`"))),
            None => Ok(()),
        }
    }

    pub fn record(&self, index: usize) -> DailyRecord {
        let values = self
            .names
            .iter()
            .zip(&self.columns)
            .filter_map(|(n, c)| c[index].map(|v| (n.clone(), v)))
            .collect();
        DailyRecord {
            date: self.dates[index],
            values,
        }
    }

    pub fn records(&self) -> impl Iterator<Item = DailyRecord> + '_ {
        (0..self.len()).map(|i| self.record(i))
    }

    /// Keeps the named variables in the given order.
    pub fn select(&self, names: &[&str]) -> Result<DailyPanel> {
        self.require(names)?;
        let columns = names
            .iter()
            .map(|n| self.column(n).unwrap().to_vec())
            .collect();
        Ok(DailyPanel {
            dates: self.dates.clone(),
            names: names.iter().map(|n| n.to_string()).collect(),
            columns,
        })
    }

    /// Rows with `from <= date <= to`.
    pub fn filter_dates(&self, from: Option<NaiveDate>, to: Option<NaiveDate>) -> DailyPanel {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| from.is_none_or(|f| self.dates[i] >= f))
            .filter(|&i| to.is_none_or(|t| self.dates[i] <= t))
            .collect();
        self.take_rows(&keep)
    }

    fn take_rows(&self, rows: &[usize]) -> DailyPanel {
        DailyPanel {
            dates: rows.iter().map(|&i| self.dates[i]).collect(),
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
        }
    }

    /// Outer join on date. Variables present in both panels are an error.
    pub fn merge(&self, other: &DailyPanel) -> Result<DailyPanel> {
        if let Some(n) = other.names.iter().find(|n| self.has(n)) {
            return Err(Error::Schema(format!(
                "variable `{n}` present in more than one input"
            )));
        }
        let mut dates: Vec<NaiveDate> = self.dates.iter().chain(&other.dates).copied().collect();
        dates.sort_unstable();
        dates.dedup();
        let lookup = |panel: &DailyPanel| -> Vec<Vec<Option<f64>>> {
            let pos: BTreeMap<NaiveDate, usize> = panel
                .dates
                .iter()
                .enumerate()
                .map(|(i, d)| (*d, i))
                .collect();
            panel
                .columns
                .iter()
                .map(|c| {
                    dates
                        .iter()
                        .map(|d| pos.get(d).and_then(|&i| c[i]))
                        .collect()
                })
                .collect()
        };
        let mut columns = lookup(self);
        columns.extend(lookup(other));
        let mut names = self.names.clone();
        names.extend(other.names.iter().cloned());
        DailyPanel::new(dates, names, columns)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (i, d) in self.dates.iter().enumerate() {
            let mut rec = vec![d.format(DATE_FORMAT).to_string()];
            rec.extend(
                self.columns
                    .iter()
                    .map(|c| c[i].map(|v| v.to_string()).unwrap_or_default()),
            );
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a daily CSV: a `date` column (ISO-8601) followed by variable
/// columns. Empty cells are missing values. Weekend rows are dropped.
pub fn ingest_csv(path: &Path, schema: &[&str]) -> Result<DailyPanel> {
    let file = std::fs::File::open(path)?;
    ingest_reader(file, schema)
}

pub fn ingest_reader<R: Read>(reader: R, schema: &[&str]) -> Result<DailyPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if !header
        .get(0)
        .is_some_and(|h| h.eq_ignore_ascii_case("date"))
    {
        return Err(Error::Schema("first column must be `date`".into()));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    for (i, name) in names.iter().enumerate() {
        if !schema.contains(&name.as_str()) {
            return Err(Error::Schema(format!("unknown column `{name}`")));
        }
        if names[..i].contains(name) {
            return Err(Error::Schema(format!("duplicate column `{name}`")));
        }
    }

    let mut rows: Vec<(NaiveDate, usize, Vec<Option<f64>>)> = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        // header is line 1
        let line = rec.position().map_or(idx + 2, |p| p.line() as usize);
        let raw_date = rec.get(0).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw_date, DATE_FORMAT).map_err(|e| Error::Parse {
            row: line,
            message: format!("malformed date `{raw_date}`: {e}"),
        })?;
        let mut values = Vec::with_capacity(names.len());
        for (j, name) in names.iter().enumerate() {
            let cell = rec.get(j + 1).unwrap_or("");
            if cell.is_empty() {
                values.push(None);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: line,
                message: format!("invalid number `{cell}` in column `{name}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    message: format!("non-finite value in column `{name}`"),
                });
            }
            values.push(Some(v));
        }
        rows.push((date, line, values));
    }

    rows.sort_by_key(|r| (r.0, r.1));
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Integrity(format!(
            "duplicate date {} at rows {} and {}",
            w[0].0, w[0].1, w[1].1
        )));
    }
    rows.retain(|r| is_working_day(r.0));

    let dates = rows.iter().map(|r| r.0).collect();
    let mut columns = vec![Vec::with_capacity(rows.len()); names.len()];
    for (_, _, values) in rows {
        for (c, v) in columns.iter_mut().zip(values) {
            c.push(v);
        }
    }
    DailyPanel::new(dates, names, columns)
}

/// Gap-filling policy for market quotes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FillPolicy {
    /// Carry the last observation forward.
    #[default]
    ForwardFill,
    /// Interpolate linearly in calendar time between observations.
    Linear,
}

impl std::str::FromStr for FillPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ffill" | "forward-fill" => Ok(FillPolicy::ForwardFill),
            "linear" => Ok(FillPolicy::Linear),
            other => Err(Error::Config(format!("unknown fill policy `{other}`"))),
        }
    }
}

/// Fills interior gaps with one policy for all variables except `cpi`,
/// which is always interpolated linearly between its monthly anchors.
pub fn fill_gaps(panel: &DailyPanel, policy: FillPolicy) -> Result<DailyPanel> {
    fill_gaps_with(panel, |_| policy)
}

/// Like [`fill_gaps`] with a per-variable policy.
///
/// Leading rows where any variable is still unobserved are trimmed.
/// Values after a variable's last observation are carried forward.
pub fn fill_gaps_with<F>(panel: &DailyPanel, policy: F) -> Result<DailyPanel>
where
    F: Fn(&str) -> FillPolicy,
{
    let mut start = 0;
    for (name, col) in panel.names.iter().zip(&panel.columns) {
        let first = col
            .iter()
            .position(Option::is_some)
            .ok_or_else(|| Error::EmptyVariable(name.clone()))?;
        start = start.max(first);
    }
    let keep: Vec<usize> = (start..panel.len()).collect();
    let mut out = panel.take_rows(&keep);
    let days: Vec<i64> = out
        .dates
        .iter()
        .map(|d| d.num_days_from_ce() as i64)
        .collect();
    for (name, col) in out.names.iter().zip(out.columns.iter_mut()) {
        let p = if name == CPI_VARIABLE {
            FillPolicy::Linear
        } else {
            policy(name)
        };
        fill_column(col, &days, p);
    }
    Ok(out)
}

// The first entry is always observed here.
fn fill_column(col: &mut [Option<f64>], days: &[i64], policy: FillPolicy) {
    let mut last: Option<usize> = None;
    let mut i = 0;
    while i < col.len() {
        if col[i].is_some() {
            last = Some(i);
            i += 1;
            continue;
        }
        let prev = last.expect("leading gaps are trimmed");
        let next = (i..col.len()).find(|&j| col[j].is_some());
        let end = next.unwrap_or(col.len());
        let a = col[prev].unwrap();
        for k in i..end {
            col[k] = Some(match (policy, next) {
                (FillPolicy::Linear, Some(n)) => {
                    let b = col[n].unwrap();
                    let w = (days[k] - days[prev]) as f64 / (days[n] - days[prev]) as f64;
                    a + w * (b - a)
                }
                _ => a,
            });
        }
        i = end;
    }
}

/// Divides each dollar-quoted variable by the same-day EUR/USD rate.
pub fn convert_to_eur(panel: &DailyPanel, dollar_variables: &[&str]) -> Result<DailyPanel> {
    let fx = panel
        .column(FX_VARIABLE)
        .ok_or_else(|| Error::Schema(format!("missing `{FX_VARIABLE}` column")))?;
    for (d, rate) in panel.dates.iter().zip(fx) {
        if let Some(r) = rate {
            if !(*r > 0.0) {
                return Err(Error::Data {
                    date: *d,
                    message: format!("nonpositive exchange rate {r}"),
                });
            }
        }
    }
    panel.require(dollar_variables)?;
    let mut out = panel.clone();
    for (name, col) in out.names.iter().zip(out.columns.iter_mut()) {
        if !dollar_variables.contains(&name.as_str()) {
            continue;
        }
        for ((v, rate), d) in col.iter_mut().zip(fx).zip(&panel.dates) {
            if let Some(x) = v {
                let r = rate.ok_or_else(|| Error::Data {
                    date: *d,
                    message: format!("no exchange rate to convert `{name}`"),
                })?;
                *x /= r;
            }
        }
    }
    Ok(out)
}
