//! Parameter axes and the parallel sweep driver.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

/// A config key a sweep can move. `rf`, `rr`, `rc` and `loss` move both
/// sides of the account together; `rr` also moves `r_d`, which keeps
/// symmetric configs inside the closed-form family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Alpha,
    Rf,
    RfPlus,
    RfMinus,
    Rr,
    RrPlus,
    RrMinus,
    Rc,
    RD,
    MuI,
    MuC,
    Loss,
    Sigma,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::Alpha => "alpha",
            Param::Rf => "rf",
            Param::RfPlus => "rf_plus",
            Param::RfMinus => "rf_minus",
            Param::Rr => "rr",
            Param::RrPlus => "rr_plus",
            Param::RrMinus => "rr_minus",
            Param::Rc => "rc",
            Param::RD => "r_d",
            Param::MuI => "mu_i",
            Param::MuC => "mu_c",
            Param::Loss => "loss",
            Param::Sigma => "sigma",
        }
    }

    pub fn apply(self, cfg: &mut RunConfig, v: f64) {
        match self {
            Param::Alpha => cfg.alpha = v,
            Param::Rf => {
                cfg.rf_plus = v;
                cfg.rf_minus = v;
            }
            Param::RfPlus => cfg.rf_plus = v,
            Param::RfMinus => cfg.rf_minus = v,
            Param::Rr => {
                cfg.rr_plus = v;
                cfg.rr_minus = v;
                cfg.r_d = v;
            }
            Param::RrPlus => cfg.rr_plus = v,
            Param::RrMinus => cfg.rr_minus = v,
            Param::Rc => {
                cfg.rc_plus = v;
                cfg.rc_minus = v;
            }
            Param::RD => cfg.r_d = v,
            Param::MuI => cfg.mu_i = v,
            Param::MuC => cfg.mu_c = v,
            Param::Loss => {
                cfg.loss_i = v;
                cfg.loss_c = v;
            }
            Param::Sigma => cfg.sigma = v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepAxis {
    pub param: Param,
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl SweepAxis {
    pub fn new(param: Param, from: f64, to: f64, points: usize) -> Result<Self, CliError> {
        if !from.is_finite() || !to.is_finite() || from > to {
            return Err(CliError::Config(format!("sweep range [{from}, {to}] is empty or not finite")));
        }
        if points == 0 {
            return Err(CliError::Config("sweep needs at least one point".into()));
        }
        Ok(SweepAxis { param, from, to, points })
    }

    /// Evenly spaced, both ends included. A degenerate range gives one value.
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 || self.from == self.to {
            return vec![self.from];
        }
        let n = self.points - 1;
        (0..=n)
            .map(|i| {
                if i == n {
                    self.to
                } else {
                    self.from + (self.to - self.from) * i as f64 / n as f64
                }
            })
            .collect()
    }
}

/// One curve of a figure: a label and the overrides that define it.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub set: Vec<(Param, f64)>,
}

impl Series {
    pub fn single(param: Param, v: f64) -> Self {
        Series {
            label: format!("{}={}", param.name(), v),
            set: vec![(param, v)],
        }
    }

    pub fn base() -> Self {
        Series {
            label: "base".into(),
            set: Vec::new(),
        }
    }
}

/// A configured point of a sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub series: usize,
    pub x: f64,
    pub config: RunConfig,
}

/// Every `(series, x)` combination applied to `base`.
pub fn expand(base: &RunConfig, axis: &SweepAxis, series: &[Series]) -> Vec<SweepPoint> {
    let mut out = Vec::new();
    for (si, s) in series.iter().enumerate() {
        for x in axis.values() {
            let mut config = base.clone();
            for &(p, v) in &s.set {
                p.apply(&mut config, v);
            }
            axis.param.apply(&mut config, x);
            out.push(SweepPoint { series: si, x, config });
        }
    }
    out
}

/// Evaluates every point on the rayon pool. Rows come back ordered by
/// series, then axis value, whatever order the workers finish in. The
/// first error (in that order) wins.
pub fn run<T, F>(points: Vec<SweepPoint>, eval: F) -> Result<Vec<(usize, f64, T)>, CliError>
where
    T: Send,
    F: Fn(&SweepPoint) -> Result<T, CliError> + Sync,
{
    let mut rows: Vec<(usize, f64, Result<T, CliError>)> = points
        .into_par_iter()
        .map(|p| {
            let r = eval(&p);
            (p.series, p.x, r)
        })
        .collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    rows.into_iter().map(|(s, x, r)| r.map(|t| (s, x, t))).collect()
}
