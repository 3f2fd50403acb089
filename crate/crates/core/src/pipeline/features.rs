use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};

use super::panel::{convert_to_eur, fill_gaps_with, DailyPanel, FillPolicy};
use super::transform::{change, lag, rolling_mean, ChangeKind, MONTH};
use crate::conf;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Predictor columns of the design matrix, in output order.
pub const PREDICTOR_NAMES: [&str; 12] = [
    "permit", "oil", "coal", "natgas", "i", "vix", "cpi", "qwind", "suntime", "temp", "day_week",
    "reversal",
];

/// Minimum design rows accepted by [`build_design`].
pub const DEFAULT_MIN_ROWS: usize = 100;

/// Which daily price series is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    Base,
    Peak,
}

impl Target {
    pub fn as_str(self) -> &'static str {
        match self {
            Target::Base => "base",
            Target::Peak => "peak",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(Target::Base),
            "peak" => Ok(Target::Peak),
            other => Err(Error::Config(format!(
                "unknown target `{other}` (expected base or peak)"
            ))),
        }
    }
}

/// How one column is derived from its source series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    LogDiff(usize),
    Diff(usize),
    Level,
    RollingMean(usize),
    /// Difference over `lag` steps of a `window`-day rolling mean.
    RollingMeanDiff {
        window: usize,
        lag: usize,
    },
    RollingMeanLogDiff {
        window: usize,
        lag: usize,
    },
    /// The target change lagged this many steps.
    TargetLag(usize),
    DayOfWeek,
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Transform::LogDiff(l) => write!(f, "log-diff-{l}"),
            Transform::Diff(l) => write!(f, "diff-{l}"),
            Transform::Level => f.write_str("level"),
            Transform::RollingMean(w) => write!(f, "rolling-mean-{w}"),
            Transform::RollingMeanDiff { window, lag } if window == lag => {
                write!(f, "rolling-mean-diff-{lag}")
            }
            Transform::RollingMeanDiff { window, lag } => {
                write!(f, "rolling-mean-{window}-diff-{lag}")
            }
            Transform::RollingMeanLogDiff { window, lag } if window == lag => {
                write!(f, "rolling-mean-log-diff-{lag}")
            }
            Transform::RollingMeanLogDiff { window, lag } => {
                write!(f, "rolling-mean-{window}-log-diff-{lag}")
            }
            Transform::TargetLag(l) => write!(f, "lag-{l}-of-target-change"),
            Transform::DayOfWeek => f.write_str("categorical-day-of-week"),
        }
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown transform `{s}`"));
        let num = |t: &str| -> Result<usize> {
            match t.parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(bad()),
            }
        };
        match s {
            "level" => return Ok(Transform::Level),
            "categorical-day-of-week" => return Ok(Transform::DayOfWeek),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("lag-") {
            let n = rest.strip_suffix("-of-target-change").ok_or_else(bad)?;
            return Ok(Transform::TargetLag(num(n)?));
        }
        if let Some(n) = s.strip_prefix("log-diff-") {
            return Ok(Transform::LogDiff(num(n)?));
        }
        if let Some(n) = s.strip_prefix("diff-") {
            return Ok(Transform::Diff(num(n)?));
        }
        if let Some(rest) = s.strip_prefix("rolling-mean-") {
            if let Some(n) = rest.strip_prefix("log-diff-") {
                let n = num(n)?;
                return Ok(Transform::RollingMeanLogDiff { window: n, lag: n });
            }
            if let Some(n) = rest.strip_prefix("diff-") {
                let n = num(n)?;
                return Ok(Transform::RollingMeanDiff { window: n, lag: n });
            }
            if let Some((w, l)) = rest.split_once("-log-diff-") {
                return Ok(Transform::RollingMeanLogDiff {
                    window: num(w)?,
                    lag: num(l)?,
                });
            }
            if let Some((w, l)) = rest.split_once("-diff-") {
                return Ok(Transform::RollingMeanDiff {
                    window: num(w)?,
                    lag: num(l)?,
                });
            }
            return Ok(Transform::RollingMean(num(rest)?));
        }
        Err(bad())
    }
}

/// Recipe for one predictor column.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorSpec {
    pub name: String,
    /// Panel variable the column is computed from; unused by
    /// [`Transform::DayOfWeek`] and [`Transform::TargetLag`].
    pub source: String,
    pub transform: Transform,
    /// Source is quoted in dollars and converted with the EUR/USD rate.
    pub usd: bool,
    /// Gap-filling override for the source.
    pub fill: Option<FillPolicy>,
}

/// Transform recipes for the 12 predictors and the target.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub target: Transform,
    pub predictors: Vec<PredictorSpec>,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        let m = MONTH;
        let p = |name: &str, source: &str, transform: Transform| PredictorSpec {
            name: name.into(),
            source: source.into(),
            transform,
            usd: false,
            fill: None,
        };
        let usd = |mut s: PredictorSpec| {
            s.usd = true;
            s
        };
        let smooth = Transform::RollingMeanDiff { window: m, lag: m };
        FeatureSpec {
            target: Transform::LogDiff(m),
            predictors: vec![
                p("permit", "permit", Transform::LogDiff(m)),
                usd(p("oil", "oil", Transform::LogDiff(m))),
                usd(p("coal", "coal", Transform::LogDiff(m))),
                usd(p("natgas", "natgas", Transform::LogDiff(m))),
                p("i", "i", Transform::Diff(m)),
                p("vix", "vix", Transform::Diff(m)),
                PredictorSpec {
                    fill: Some(FillPolicy::Linear),
                    ..p("cpi", "cpi", Transform::LogDiff(m))
                },
                p("qwind", "qwind", smooth),
                p("suntime", "sun", smooth),
                p("temp", "temp", Transform::Diff(m)),
                p("day_week", "", Transform::DayOfWeek),
                p("reversal", "", Transform::TargetLag(m)),
            ],
        }
    }
}

impl FeatureSpec {
    /// Applies `name = transform [usd] [ffill|linear] [source=<var>]` lines
    /// on top of `self`. The key `target` sets the target transform.
    pub fn with_overrides(mut self, text: &str) -> Result<Self> {
        for entry in conf::parse(text)? {
            let mut tokens = entry.value.split_whitespace();
            let transform: Transform = tokens
                .next()
                .ok_or_else(|| Error::Config(format!("line {}: missing transform", entry.line)))?
                .parse()?;
            if entry.key == "target" {
                if matches!(transform, Transform::TargetLag(_) | Transform::DayOfWeek) {
                    return Err(Error::Config(format!(
                        "line {}: `{transform}` cannot define the target",
                        entry.line
                    )));
                }
                self.target = transform;
                continue;
            }
            let spec = self
                .predictors
                .iter_mut()
                .find(|p| p.name == entry.key)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "line {}: unknown predictor `{}` (expected one of {})",
                        entry.line,
                        entry.key,
                        PREDICTOR_NAMES.join(", ")
                    ))
                })?;
            spec.transform = transform;
            for tok in tokens {
                match tok {
                    "usd" => spec.usd = true,
                    "eur" => spec.usd = false,
                    "ffill" | "forward-fill" | "linear" => spec.fill = Some(tok.parse()?),
                    t => match t.strip_prefix("source=") {
                        Some(src) if !src.is_empty() => spec.source = src.to_string(),
                        _ => {
                            return Err(Error::Config(format!(
                                "line {}: unknown flag `{t}`",
                                entry.line
                            )))
                        }
                    },
                }
            }
            if needs_source(spec.transform) && spec.source.is_empty() {
                spec.source = spec.name.clone();
            }
        }
        Ok(self)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        FeatureSpec::default().with_overrides(&text)
    }

    /// Panel variables needed to build the design for `target`.
    pub fn required_variables(&self, target: Target) -> Vec<&str> {
        let mut vars = vec![target.as_str()];
        for p in &self.predictors {
            if needs_source(p.transform) && !vars.contains(&p.source.as_str()) {
                vars.push(&p.source);
            }
        }
        if self.predictors.iter().any(|p| p.usd) && !vars.contains(&super::FX_VARIABLE) {
            vars.push(super::FX_VARIABLE);
        }
        vars
    }

    /// Sources converted from dollars to euros.
    pub fn dollar_sources(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for p in self
            .predictors
            .iter()
            .filter(|p| p.usd && needs_source(p.transform))
        {
            if !out.contains(&p.source.as_str()) {
                out.push(&p.source);
            }
        }
        out
    }

    pub fn fill_for(&self, variable: &str) -> Option<FillPolicy> {
        self.predictors
            .iter()
            .filter(|p| p.source == variable)
            .find_map(|p| p.fill)
    }

    pub fn to_config_string(&self) -> String {
        let mut s = format!("target = {}\n", self.target);
        for p in &self.predictors {
            s.push_str(&format!("{} = {}", p.name, p.transform));
            if p.usd {
                s.push_str(" usd");
            }
            match p.fill {
                Some(FillPolicy::Linear) => s.push_str(" linear"),
                Some(FillPolicy::ForwardFill) => s.push_str(" ffill"),
                None => {}
            }
            if needs_source(p.transform) && p.source != p.name {
                s.push_str(&format!(" source={}", p.source));
            }
            s.push('\n');
        }
        s
    }
}

fn needs_source(t: Transform) -> bool {
    !matches!(t, Transform::DayOfWeek | Transform::TargetLag(_))
}

/// Selects the variables needed for `target`, fills gaps (forward-fill
/// unless the spec says otherwise, linear for CPI) and converts dollar
/// quotes to euros.
pub fn prepare_panel(panel: &DailyPanel, spec: &FeatureSpec, target: Target) -> Result<DailyPanel> {
    let vars = spec.required_variables(target);
    let selected = panel.select(&vars)?;
    let filled = fill_gaps_with(&selected, |name| {
        spec.fill_for(name).unwrap_or(FillPolicy::ForwardFill)
    })?;
    convert_to_eur(&filled, &spec.dollar_sources())
}

/// Predictors plus target on a common set of working days.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub dates: Vec<NaiveDate>,
    pub x: Matrix,
    pub y: Vec<f64>,
    pub target: Target,
    pub feature_names: Vec<String>,
}

impl DesignMatrix {
    pub fn new(
        dates: Vec<NaiveDate>,
        x: Matrix,
        y: Vec<f64>,
        target: Target,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if x.rows() != y.len() || dates.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "design has {} dates, {} rows and {} targets",
                dates.len(),
                x.rows(),
                y.len()
            )));
        }
        if feature_names.len() != x.cols() {
            return Err(Error::InvalidInput(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                x.cols()
            )));
        }
        if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "design contains non-finite values".into(),
            ));
        }
        Ok(DesignMatrix {
            dates,
            x,
            y,
            target,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown feature `{name}` (valid: {})",
                    self.feature_names.join(", ")
                ))
            })
    }

    /// Rows with `from <= date <= to`. Features keep the values computed
    /// on the full panel, so lags reach back before `from`.
    pub fn restrict(&self, from: Option<NaiveDate>, to: Option<NaiveDate>) -> DesignMatrix {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| from.is_none_or(|f| self.dates[i] >= f))
            .filter(|&i| to.is_none_or(|t| self.dates[i] <= t))
            .collect();
        DesignMatrix {
            dates: keep.iter().map(|&i| self.dates[i]).collect(),
            x: self.x.select_rows(&keep),
            y: keep.iter().map(|&i| self.y[i]).collect(),
            target: self.target,
            feature_names: self.feature_names.clone(),
        }
    }

    /// `date,y,<predictors>` CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string(), "y".to_string()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.dates[i].to_string(), self.y[i].to_string()];
            rec.extend(self.x.row(i).iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// [`prepare_panel`] followed by [`build_design_with_floor`].
pub fn build_design_from_raw(
    panel: &DailyPanel,
    spec: &FeatureSpec,
    target: Target,
    min_rows: usize,
) -> Result<DesignMatrix> {
    build_design_with_floor(&prepare_panel(panel, spec, target)?, spec, target, min_rows)
}

/// [`build_design_with_floor`] with the default 100-row floor.
pub fn build_design(
    panel: &DailyPanel,
    spec: &FeatureSpec,
    target: Target,
) -> Result<DesignMatrix> {
    build_design_with_floor(panel, spec, target, DEFAULT_MIN_ROWS)
}

/// Computes the target change and every predictor column, then drops the
/// warm-up rows consumed by windows and lags.
///
/// The panel must already be gap-free and in euros; see
/// [`build_design_from_raw`].
pub fn build_design_with_floor(
    panel: &DailyPanel,
    spec: &FeatureSpec,
    target: Target,
    min_rows: usize,
) -> Result<DesignMatrix> {
    if spec.predictors.len() != PREDICTOR_NAMES.len()
        || spec
            .predictors
            .iter()
            .zip(PREDICTOR_NAMES)
            .any(|(p, n)| p.name != n)
    {
        return Err(Error::Config(format!(
            "feature spec must define exactly {}",
            PREDICTOR_NAMES.join(", ")
        )));
    }
    let dates = panel.dates();
    let n = dates.len();
    let domain = |variable: &str, e: Error| match e {
        Error::NonPositive { index, value } => Error::Domain {
            date: dates[index],
            message: format!("nonpositive `{variable}` value {value} under log-difference"),
        },
        e => e,
    };

    let target_raw = panel.dense(target.as_str())?;
    let y_full = apply(spec.target, &target_raw, n).map_err(|e| domain(target.as_str(), e))?;

    let mut columns: Vec<Vec<Option<f64>>> = Vec::with_capacity(spec.predictors.len());
    for p in &spec.predictors {
        let col = match p.transform {
            Transform::TargetLag(l) => lag(&y_full, l),
            Transform::DayOfWeek => dates
                .iter()
                .map(|d| Some(f64::from(d.weekday().number_from_monday())))
                .collect(),
            t => {
                let raw = panel.dense(&p.source)?;
                apply(t, &raw, n).map_err(|e| domain(&p.source, e))?
            }
        };
        columns.push(col);
    }

    let available = |t: usize| y_full[t].is_some() && columns.iter().all(|c| c[t].is_some());
    let start = (0..n).find(|&t| available(t)).unwrap_or(n);
    if let Some(t) = (start..n).find(|&t| !available(t)) {
        return Err(Error::Data {
            date: dates[t],
            message: "feature unavailable after warm-up".into(),
        });
    }
    let rows = n - start;
    if rows < min_rows {
        return Err(Error::InsufficientData {
            what: "design matrix rows".into(),
            needed: min_rows,
            got: rows,
        });
    }
    let dense: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| c[start..].iter().map(|v| v.unwrap()).collect())
        .collect();
    let y: Vec<f64> = y_full[start..].iter().map(|v| v.unwrap()).collect();
    DesignMatrix::new(
        dates[start..].to_vec(),
        Matrix::from_columns(&dense)?,
        y,
        target,
        spec.predictors.iter().map(|p| p.name.clone()).collect(),
    )
}

fn apply(t: Transform, raw: &[f64], n: usize) -> Result<Vec<Option<f64>>> {
    let wrapped = || raw.iter().copied().map(Some).collect::<Vec<_>>();
    let smooth = |w: usize| -> Result<Vec<Option<f64>>> {
        if w > n {
            Ok(vec![None; n])
        } else {
            rolling_mean(raw, w)
        }
    };
    match t {
        Transform::LogDiff(l) => change(&wrapped(), l, ChangeKind::LogDiff),
        Transform::Diff(l) => change(&wrapped(), l, ChangeKind::Diff),
        Transform::Level => Ok(wrapped()),
        Transform::RollingMean(w) => smooth(w),
        Transform::RollingMeanDiff { window, lag } => {
            change(&smooth(window)?, lag, ChangeKind::Diff)
        }
        Transform::RollingMeanLogDiff { window, lag } => {
            change(&smooth(window)?, lag, ChangeKind::LogDiff)
        }
        Transform::TargetLag(_) | Transform::DayOfWeek => {
            unreachable!("handled by the caller")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::is_working_day;
    use crate::pipeline::SOURCE_VARIABLES;

    fn working_days(n: usize) -> Vec<NaiveDate> {
        let mut d = NaiveDate::from_ymd_opt(2020, 1, 6).unwrap();
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            if is_working_day(d) {
                out.push(d);
            }
            d = d.succ_opt().unwrap();
        }
        out
    }

    fn toy_panel(n: usize) -> DailyPanel {
        let dates = working_days(n);
        let cols = SOURCE_VARIABLES
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let v = (0..n)
                    .map(|t| 10.0 + k as f64 + ((t * (k + 3)) % 17) as f64 * 0.5)
                    .collect();
                (name.to_string(), v)
            })
            .collect();
        DailyPanel::from_dense(dates, cols).unwrap()
    }

    #[test]
    fn warm_up_consumes_change_plus_lag() {
        let panel = toy_panel(44 + 22);
        let d = build_design_with_floor(&panel, &FeatureSpec::default(), Target::Base, 1).unwrap();
        assert_eq!(d.len(), panel.len() - 44);
        assert_eq!(d.dates[..], panel.dates()[44..]);
        assert_eq!(d.feature_names, PREDICTOR_NAMES);
    }

    #[test]
    fn base_and_peak_share_features() {
        let panel = toy_panel(150);
        let spec = FeatureSpec::default();
        let b = build_design(&panel, &spec, Target::Base).unwrap();
        let p = build_design(&panel, &spec, Target::Peak).unwrap();
        let rev = b.feature_index("reversal").unwrap();
        for j in 0..12 {
            if j != rev {
                assert_eq!(b.x.column(j), p.x.column(j));
            }
        }
        assert_ne!(b.x.column(rev), p.x.column(rev));
        assert_ne!(b.y, p.y);
    }

    #[test]
    fn day_of_week_in_range() {
        let d = build_design(&toy_panel(200), &FeatureSpec::default(), Target::Base).unwrap();
        let j = d.feature_index("day_week").unwrap();
        assert!(d
            .x
            .column(j)
            .iter()
            .all(|v| (1.0..=5.0).contains(v) && v.fract() == 0.0));
    }

    #[test]
    fn reversal_is_lagged_target() {
        let d = build_design(&toy_panel(200), &FeatureSpec::default(), Target::Peak).unwrap();
        let j = d.feature_index("reversal").unwrap();
        for t in 22..d.len() {
            assert_eq!(d.x.get(t, j), d.y[t - 22]);
        }
    }

    #[test]
    fn row_floor_is_enforced() {
        let err = build_design(&toy_panel(120), &FeatureSpec::default(), Target::Base).unwrap_err();
        assert!(
            matches!(err, Error::InsufficientData { got: 76, .. }),
            "{err}"
        );
    }

    #[test]
    fn nonpositive_price_names_date() {
        let mut panel = toy_panel(150);
        let dates = panel.dates().to_vec();
        let mut cols: Vec<(String, Vec<f64>)> = panel
            .variables()
            .iter()
            .map(|n| (n.clone(), panel.dense(n).unwrap()))
            .collect();
        cols[0].1[40] = -1.0;
        panel = DailyPanel::from_dense(dates.clone(), cols).unwrap();
        match build_design(&panel, &FeatureSpec::default(), Target::Base).unwrap_err() {
            Error::Domain { date, .. } => assert_eq!(date, dates[40]),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn deterministic() {
        let panel = toy_panel(180);
        let spec = FeatureSpec::default();
        let a = build_design(&panel, &spec, Target::Base).unwrap();
        let b = build_design(&panel, &spec, Target::Base).unwrap();
        let bits = |d: &DesignMatrix| {
            d.x.as_slice()
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn transform_names_round_trip() {
        for t in [
            Transform::LogDiff(22),
            Transform::Diff(5),
            Transform::Level,
            Transform::RollingMean(22),
            Transform::RollingMeanDiff {
                window: 22,
                lag: 22,
            },
            Transform::RollingMeanDiff {
                window: 10,
                lag: 22,
            },
            Transform::RollingMeanLogDiff {
                window: 22,
                lag: 22,
            },
            Transform::RollingMeanLogDiff { window: 5, lag: 3 },
            Transform::TargetLag(22),
            Transform::DayOfWeek,
        ] {
            assert_eq!(t.to_string().parse::<Transform>().unwrap(), t);
        }
        assert!("diff-0".parse::<Transform>().is_err());
        assert!("wavelet".parse::<Transform>().is_err());
    }

    #[test]
    fn overrides_apply() {
        let spec = FeatureSpec::default()
            .with_overrides(
                "target = diff-22\ntemp = level\nqwind = rolling-mean-log-diff-22 linear\n",
            )
            .unwrap();
        assert_eq!(spec.target, Transform::Diff(22));
        assert_eq!(spec.predictors[9].transform, Transform::Level);
        assert_eq!(spec.predictors[7].fill, Some(FillPolicy::Linear));
        assert!(FeatureSpec::default()
            .with_overrides("gold = level")
            .is_err());
        let text = spec.to_config_string();
        assert_eq!(FeatureSpec::default().with_overrides(&text).unwrap(), spec);
    }

    #[test]
    fn required_variables_cover_sources() {
        let spec = FeatureSpec::default();
        let vars = spec.required_variables(Target::Base);
        for v in [
            "base", "permit", "oil", "coal", "natgas", "i", "vix", "cpi", "qwind", "sun", "temp",
            "eurusd",
        ] {
            assert!(vars.contains(&v), "{v}");
        }
        assert!(!vars.contains(&"peak"));
    }
}
