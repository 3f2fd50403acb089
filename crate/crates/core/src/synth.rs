//! Synthetic daily markets with planted driver effects.
//!
//! Commodity, FX, CPI and VIX series are geometric random walks, the
//! interest rate is an arithmetic random walk and weather follows a
//! seasonal cosine plus noise. The log base price `l` evolves in 22-day
//! steps:
//!
//! ```text
//! l[t] = l[t-22] + kappa * (mu - l[t-22]) + g(x[t]) + vol * e[t] + J[t]
//! g(x) = intercept + sum_j beta_j * x_j + interaction * x_permit * x_natgas
//! ```
//!
//! where `x[t]` is the 12-predictor row the default [`FeatureSpec`]
//! computes for day `t` (with `reversal = l[t-22] - l[t-44]`), `e[t]` is
//! standard normal and `J[t]` a compound-Poisson jump sum. The target change
//! `l[t] - l[t-22]` therefore has conditional mean `g(x)` plus the level
//! pull `kappa * (mu - l[t-22])`, which vanishes at the long-run level.
//!
//! [`FeatureSpec`]: crate::pipeline::FeatureSpec

use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};

use crate::conf;
use crate::error::{Error, Result};
use crate::pipeline::{
    change, is_working_day, rolling_mean, ChangeKind, DailyPanel, MONTH, PREDICTOR_NAMES,
    SOURCE_VARIABLES,
};

const PERMIT: usize = 0;
const NATGAS: usize = 3;
const REVERSAL: usize = 11;
/// Rows consumed before the first complete predictor row.
const WARM_UP: usize = 2 * MONTH;

/// Random walk in logs (or levels for `i`) with daily drift and volatility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkParams {
    pub start: f64,
    pub drift: f64,
    pub vol: f64,
}

/// `mean + amplitude * cos(2 pi day_of_year / 365.25) + noise * e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeasonalParams {
    pub mean: f64,
    pub amplitude: f64,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    /// Emitted working days.
    pub horizon: usize,
    pub start_date: NaiveDate,
    /// Simulated working days before `start_date` that are not emitted.
    pub burn_in: usize,
    /// Pull towards the long-run log level per 22-day step, in (0, 1].
    pub kappa: f64,
    /// Long-run base price in EUR/MWh.
    pub long_run_price: f64,
    /// Standard deviation of the Gaussian log-price shock.
    pub volatility: f64,
    /// Expected jumps per day.
    pub jump_intensity: f64,
    pub jump_mean: f64,
    pub jump_std: f64,
    pub intercept: f64,
    /// Planted linear effects in predictor order.
    pub coefficients: [f64; 12],
    /// Planted `permit x natgas` effect.
    pub interaction: f64,
    /// EUR prices.
    pub permit: WalkParams,
    pub oil: WalkParams,
    pub coal: WalkParams,
    pub natgas: WalkParams,
    /// USD per EUR.
    pub eurusd: WalkParams,
    pub cpi: WalkParams,
    pub vix: WalkParams,
    /// Arithmetic walk, in percent.
    pub i: WalkParams,
    pub qwind: SeasonalParams,
    pub temp: SeasonalParams,
    pub sun: SeasonalParams,
    pub peak_ratio: f64,
    pub peak_noise: f64,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        let walk = |start, drift, vol| WalkParams { start, drift, vol };
        let mut coefficients = [0.0; 12];
        for (name, b) in [
            ("permit", 0.5),
            ("oil", 0.25),
            ("coal", 0.2),
            ("natgas", 1.2),
            ("qwind", -0.03),
            ("reversal", -0.6),
        ] {
            coefficients[predictor_index(name).unwrap()] = b;
        }
        ScenarioSpec {
            horizon: 2600,
            start_date: NaiveDate::from_ymd_opt(2012, 1, 2).unwrap(),
            burn_in: 220,
            kappa: 0.05,
            long_run_price: 45.0,
            volatility: 0.12,
            jump_intensity: 0.01,
            jump_mean: 0.0,
            jump_std: 0.3,
            intercept: 0.0,
            coefficients,
            interaction: 12.0,
            permit: walk(8.0, 0.0008, 0.022),
            oil: walk(80.0, 0.0, 0.02),
            coal: walk(70.0, 0.0, 0.018),
            natgas: walk(18.0, 0.0, 0.028),
            eurusd: walk(1.3, 0.0, 0.005),
            cpi: walk(100.0, 0.00007, 0.0004),
            vix: walk(18.0, 0.0, 0.03),
            i: walk(0.5, 0.0, 0.01),
            qwind: SeasonalParams {
                mean: 12.0,
                amplitude: 4.0,
                noise: 3.0,
            },
            temp: SeasonalParams {
                mean: 10.0,
                amplitude: -9.0,
                noise: 3.0,
            },
            sun: SeasonalParams {
                mean: 4.5,
                amplitude: -3.5,
                noise: 1.5,
            },
            peak_ratio: 1.1,
            peak_noise: 0.03,
            seed: 7,
        }
    }
}

fn predictor_index(name: &str) -> Option<usize> {
    PREDICTOR_NAMES.iter().position(|n| *n == name)
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, why: &str| Err(Error::Config(format!("scenario `{field}` {why}")));
        if self.horizon < 200 {
            return fail("horizon", "must be at least 200");
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return fail("kappa", "must lie in (0, 1]");
        }
        if !(self.long_run_price > 0.0) {
            return fail("long_run_price", "must be positive");
        }
        for (field, v) in [
            ("volatility", self.volatility),
            ("jump_intensity", self.jump_intensity),
            ("jump_std", self.jump_std),
            ("peak_noise", self.peak_noise),
            ("qwind.noise", self.qwind.noise),
            ("temp.noise", self.temp.noise),
            ("sun.noise", self.sun.noise),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return fail(field, "must be finite and nonnegative");
            }
        }
        for (name, w) in self.walks() {
            if !(w.vol >= 0.0) || !w.vol.is_finite() {
                return fail(&format!("{name}.vol"), "must be finite and nonnegative");
            }
            if name != "i" && !(w.start > 0.0) {
                return fail(&format!("{name}.start"), "must be positive");
            }
        }
        if !(self.peak_ratio > 0.0) {
            return fail("peak_ratio", "must be positive");
        }
        if self.coefficients.iter().any(|b| !b.is_finite()) || !self.interaction.is_finite() {
            return fail("beta", "must be finite");
        }
        Ok(())
    }

    fn walks(&self) -> [(&'static str, WalkParams); 8] {
        [
            ("permit", self.permit),
            ("oil", self.oil),
            ("coal", self.coal),
            ("natgas", self.natgas),
            ("eurusd", self.eurusd),
            ("cpi", self.cpi),
            ("vix", self.vix),
            ("i", self.i),
        ]
    }

    /// Applies `key = value` lines on top of `self`.
    ///
    /// Keys are the scalar field names, `beta.<predictor>`,
    /// `<walk>.{start,drift,vol}` and `<qwind|temp|sun>.{mean,amplitude,noise}`.
    pub fn with_overrides(mut self, text: &str) -> Result<Self> {
        for e in conf::parse(text)? {
            let key = e.key.as_str();
            let unknown =
                || Error::Config(format!("line {}: unknown scenario key `{key}`", e.line));
            match key {
                "horizon" => self.horizon = e.parse_value()?,
                "start_date" => self.start_date = e.parse_value()?,
                "burn_in" => self.burn_in = e.parse_value()?,
                "kappa" => self.kappa = e.parse_value()?,
                "long_run_price" => self.long_run_price = e.parse_value()?,
                "volatility" => self.volatility = e.parse_value()?,
                "jump_intensity" => self.jump_intensity = e.parse_value()?,
                "jump_mean" => self.jump_mean = e.parse_value()?,
                "jump_std" => self.jump_std = e.parse_value()?,
                "intercept" => self.intercept = e.parse_value()?,
                "interaction" => self.interaction = e.parse_value()?,
                "peak_ratio" => self.peak_ratio = e.parse_value()?,
                "peak_noise" => self.peak_noise = e.parse_value()?,
                "seed" => self.seed = e.parse_value()?,
                _ => {
                    let (head, field) = key.split_once('.').ok_or_else(unknown)?;
                    if head == "beta" {
                        let j = predictor_index(field).ok_or_else(unknown)?;
                        self.coefficients[j] = e.parse_value()?;
                        continue;
                    }
                    if let Some(s) = match head {
                        "qwind" => Some(&mut self.qwind),
                        "temp" => Some(&mut self.temp),
                        "sun" => Some(&mut self.sun),
                        _ => None,
                    } {
                        match field {
                            "mean" => s.mean = e.parse_value()?,
                            "amplitude" => s.amplitude = e.parse_value()?,
                            "noise" => s.noise = e.parse_value()?,
                            _ => return Err(unknown()),
                        }
                        continue;
                    }
                    let w = match head {
                        "permit" => &mut self.permit,
                        "oil" => &mut self.oil,
                        "coal" => &mut self.coal,
                        "natgas" => &mut self.natgas,
                        "eurusd" => &mut self.eurusd,
                        "cpi" => &mut self.cpi,
                        "vix" => &mut self.vix,
                        "i" => &mut self.i,
                        _ => return Err(unknown()),
                    };
                    match field {
                        "start" => w.start = e.parse_value()?,
                        "drift" => w.drift = e.parse_value()?,
                        "vol" => w.vol = e.parse_value()?,
                        _ => return Err(unknown()),
                    }
                }
            }
        }
        Ok(self)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        ScenarioSpec::default().with_overrides(&text)
    }

    /// Every field as `key = value` lines accepted by [`with_overrides`].
    ///
    /// [`with_overrides`]: ScenarioSpec::with_overrides
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        put("horizon", self.horizon.to_string());
        put("start_date", self.start_date.to_string());
        put("burn_in", self.burn_in.to_string());
        put("kappa", self.kappa.to_string());
        put("long_run_price", self.long_run_price.to_string());
        put("volatility", self.volatility.to_string());
        put("jump_intensity", self.jump_intensity.to_string());
        put("jump_mean", self.jump_mean.to_string());
        put("jump_std", self.jump_std.to_string());
        put("intercept", self.intercept.to_string());
        put("interaction", self.interaction.to_string());
        for (name, b) in PREDICTOR_NAMES.iter().zip(self.coefficients) {
            put(&format!("beta.{name}"), b.to_string());
        }
        for (name, w) in self.walks() {
            put(&format!("{name}.start"), w.start.to_string());
            put(&format!("{name}.drift"), w.drift.to_string());
            put(&format!("{name}.vol"), w.vol.to_string());
        }
        for (name, p) in [
            ("qwind", self.qwind),
            ("temp", self.temp),
            ("sun", self.sun),
        ] {
            put(&format!("{name}.mean"), p.mean.to_string());
            put(&format!("{name}.amplitude"), p.amplitude.to_string());
            put(&format!("{name}.noise"), p.noise.to_string());
        }
        put("peak_ratio", self.peak_ratio.to_string());
        put("peak_noise", self.peak_noise.to_string());
        put("seed", self.seed.to_string());
        s
    }

    /// Planted response `g(x)` plus the expected jump contribution.
    pub fn ground_truth(&self, point: &[f64]) -> f64 {
        debug_assert_eq!(point.len(), 12);
        let linear: f64 = self
            .coefficients
            .iter()
            .zip(point)
            .map(|(b, x)| b * x)
            .sum();
        self.intercept
            + self.jump_intensity * self.jump_mean
            + linear
            + self.interaction * point[PERMIT] * point[NATGAS]
    }

    fn planted(&self, point: &[f64]) -> f64 {
        let linear: f64 = self
            .coefficients
            .iter()
            .zip(point)
            .map(|(b, x)| b * x)
            .sum();
        self.intercept + linear + self.interaction * point[PERMIT] * point[NATGAS]
    }
}

/// Free-function form of [`ScenarioSpec::ground_truth`].
pub fn ground_truth(spec: &ScenarioSpec, point: &[f64]) -> f64 {
    spec.ground_truth(point)
}

/// Internal series behind an emitted panel, one entry per emitted row.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTrace {
    pub log_price: Vec<f64>,
    /// `g(x[t])`, zero before the warm-up completes.
    pub planted: Vec<f64>,
    /// Gaussian shock plus jumps.
    pub shock: Vec<f64>,
    /// Number of jumps on each day.
    pub jumps: Vec<u32>,
    /// Predictor rows, `None` during warm-up.
    pub features: Vec<Option<[f64; 12]>>,
}

pub fn generate(spec: &ScenarioSpec) -> Result<DailyPanel> {
    generate_with_trace(spec).map(|(p, _)| p)
}

pub fn generate_with_trace(spec: &ScenarioSpec) -> Result<(DailyPanel, SynthTrace)> {
    spec.validate()?;
    let total = spec.burn_in + spec.horizon;
    let dates = working_days_around(spec.start_date, spec.burn_in, total)?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(0);
    let walks: Vec<Vec<f64>> = spec
        .walks()
        .iter()
        .map(|(name, w)| {
            if *name == "i" {
                arithmetic_walk(&mut rng, w, total)
            } else {
                geometric_walk(&mut rng, w, total)
            }
        })
        .collect();
    let [permit, oil, coal, natgas, eurusd, cpi, vix, rate]: [Vec<f64>; 8] =
        walks.try_into().expect("eight walks");
    let qwind: Vec<f64> = seasonal(&mut rng, &spec.qwind, &dates)
        .into_iter()
        .map(|v| v.max(0.0))
        .collect();
    let temp = seasonal(&mut rng, &spec.temp, &dates);
    let sun: Vec<f64> = seasonal(&mut rng, &spec.sun, &dates)
        .into_iter()
        .map(|v| v.clamp(0.0, 16.0))
        .collect();

    let wrap = |s: &[f64]| s.iter().copied().map(Some).collect::<Vec<_>>();
    let log22 = |s: &[f64]| change(&wrap(s), MONTH, ChangeKind::LogDiff);
    let diff22 = |s: &[f64]| change(&wrap(s), MONTH, ChangeKind::Diff);
    let smooth22 = |s: &[f64]| -> Result<Vec<Option<f64>>> {
        change(&rolling_mean(s, MONTH)?, MONTH, ChangeKind::Diff)
    };
    let exogenous: [Vec<Option<f64>>; 10] = [
        log22(&permit)?,
        log22(&oil)?,
        log22(&coal)?,
        log22(&natgas)?,
        diff22(&rate)?,
        diff22(&vix)?,
        log22(&cpi)?,
        smooth22(&qwind)?,
        smooth22(&sun)?,
        diff22(&temp)?,
    ];

    let mu = spec.long_run_price.ln();
    let normal = Normal::new(spec.jump_mean, spec.jump_std)
        .map_err(|e| Error::Config(format!("scenario jump size: {e}")))?;
    let poisson = (spec.jump_intensity > 0.0)
        .then(|| Poisson::new(spec.jump_intensity))
        .transpose()
        .map_err(|e| Error::Config(format!("scenario jump intensity: {e}")))?;
    let mut prng = ChaCha8Rng::seed_from_u64(spec.seed);
    prng.set_stream(1);

    let mut log_price = vec![mu; total];
    let mut planted = vec![0.0; total];
    let mut shock = vec![0.0; total];
    let mut jumps = vec![0u32; total];
    let mut features: Vec<Option<[f64; 12]>> = vec![None; total];
    for t in 0..total {
        let e: f64 = StandardNormal.sample(&mut prng);
        let k = match &poisson {
            Some(p) => p.sample(&mut prng) as u32,
            None => 0,
        };
        let jump: f64 = (0..k).map(|_| normal.sample(&mut prng)).sum();
        if t < WARM_UP {
            log_price[t] = mu + spec.volatility * e;
            continue;
        }
        jumps[t] = k;
        shock[t] = spec.volatility * e + jump;
        let mut x = [0.0; 12];
        for (j, col) in exogenous.iter().enumerate() {
            x[j] = col[t].expect("available after warm-up");
        }
        x[10] = f64::from(dates[t].weekday().number_from_monday());
        x[REVERSAL] = log_price[t - MONTH] - log_price[t - 2 * MONTH];
        planted[t] = spec.planted(&x);
        features[t] = Some(x);
        let prev = log_price[t - MONTH];
        log_price[t] = (1.0 - spec.kappa) * prev + spec.kappa * mu + planted[t] + shock[t];
    }

    let peak: Vec<f64> = log_price
        .iter()
        .map(|l| {
            let e: f64 = StandardNormal.sample(&mut prng);
            l.exp() * spec.peak_ratio * (spec.peak_noise * e).exp()
        })
        .collect();

    let keep = spec.burn_in..total;
    let emit = |s: &[f64]| s[keep.clone()].to_vec();
    let usd = |s: &[f64]| -> Vec<f64> {
        s[keep.clone()]
            .iter()
            .zip(&eurusd[keep.clone()])
            .map(|(v, fx)| v * fx)
            .collect()
    };
    let base: Vec<f64> = log_price[keep.clone()].iter().map(|l| l.exp()).collect();
    let columns: Vec<(String, Vec<f64>)> = SOURCE_VARIABLES
        .iter()
        .map(|&name| {
            let values = match name {
                "base" => base.clone(),
                "peak" => emit(&peak),
                "permit" => emit(&permit),
                "oil" => usd(&oil),
                "coal" => usd(&coal),
                "natgas" => usd(&natgas),
                "qwind" => emit(&qwind),
                "temp" => emit(&temp),
                "sun" => emit(&sun),
                "eurusd" => emit(&eurusd),
                "i" => emit(&rate),
                "vix" => emit(&vix),
                "cpi" => emit(&cpi),
                _ => unreachable!("every source variable is generated"),
            };
            (name.to_string(), values)
        })
        .collect();
    let panel = DailyPanel::from_dense(dates[keep.clone()].to_vec(), columns)?;
    let trace = SynthTrace {
        log_price: emit(&log_price),
        planted: emit(&planted),
        shock: emit(&shock),
        jumps: jumps[keep.clone()].to_vec(),
        features: features[keep].to_vec(),
    };
    Ok((panel, trace))
}

/// `total` consecutive working days, the `before`-th of which is `start`
/// (rolled forward to a working day).
fn working_days_around(start: NaiveDate, before: usize, total: usize) -> Result<Vec<NaiveDate>> {
    let overflow = || Error::Config("scenario dates out of range".into());
    let mut first = start;
    while !is_working_day(first) {
        first = first.succ_opt().ok_or_else(overflow)?;
    }
    let mut back = 0;
    while back < before {
        first = first.pred_opt().ok_or_else(overflow)?;
        if is_working_day(first) {
            back += 1;
        }
    }
    let mut out = Vec::with_capacity(total);
    let mut d = first;
    while out.len() < total {
        if is_working_day(d) {
            out.push(d);
        }
        d = d.succ_opt().ok_or_else(overflow)?;
    }
    Ok(out)
}

fn geometric_walk<R: Rng>(rng: &mut R, w: &WalkParams, n: usize) -> Vec<f64> {
    let mut level = w.start.ln();
    (0..n)
        .map(|t| {
            if t > 0 {
                let e: f64 = StandardNormal.sample(rng);
                level += w.drift + w.vol * e;
            }
            level.exp()
        })
        .collect()
}

fn arithmetic_walk<R: Rng>(rng: &mut R, w: &WalkParams, n: usize) -> Vec<f64> {
    let mut level = w.start;
    (0..n)
        .map(|t| {
            if t > 0 {
                let e: f64 = StandardNormal.sample(rng);
                level += w.drift + w.vol * e;
            }
            level
        })
        .collect()
}

fn seasonal<R: Rng>(rng: &mut R, p: &SeasonalParams, dates: &[NaiveDate]) -> Vec<f64> {
    dates
        .iter()
        .map(|d| {
            let e: f64 = StandardNormal.sample(rng);
            let phase = 2.0 * PI * f64::from(d.ordinal0()) / 365.25;
            p.mean + p.amplitude * phase.cos() + p.noise * e
        })
        .collect()
}
