//! Run configuration: one flat TOML table per run.
//!
//! ```toml
//! # rates (all required)
//! rf_plus = 0.05
//! rf_minus = 0.08
//! rr_plus = 0.05
//! rr_minus = 0.05
//! rc_plus = 0.01
//! rc_minus = 0.01
//! r_d = 0.01
//! # credit (all required)
//! mu_i = 0.21
//! mu_c = 0.16
//! loss_i = 0.5
//! loss_c = 0.5
//! alpha = 0.9
//! # equity
//! s0 = 1.0
//! sigma = 0.2
//! # mu_phys = 0.07          # optional, never enters a valuation
//! # claim
//! payoff = "call"            # call | put | piecewise | zero
//! strike = 1.0               # call/put only
//! maturity = 1.0
//! # notional = 1.0           # optional, defaults to 1
//! # knots = [[0.5, 0.0], [1.0, 0.2]]; left_slope = 0.0; right_slope = 1.0   # piecewise only
//! regime = "with-defaults"   # with-defaults | default-free
//! # engine = "pde"           # closed | pde | lattice | all (default pde)
//! # nx = 400; nt = 400; steps = 2000   # documented resolution defaults
//! # sweep_param = "alpha"; sweep_from = 0.0; sweep_to = 1.0; sweep_points = 21
//! # out = "band.csv"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xva_core::{ClaimSpec, CreditParams, EquityParams, MarketModel, Payoff, RateSet, Regime};

use crate::engine::{EngineKind, Resolution};
use crate::sweep::{Param, SweepAxis};
use crate::CliError;

pub const DEFAULT_NX: usize = 400;
pub const DEFAULT_NT: usize = 400;
pub const DEFAULT_STEPS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayoffKind {
    Call,
    Put,
    Piecewise,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeKind {
    WithDefaults,
    DefaultFree,
}

impl From<RegimeKind> for Regime {
    fn from(r: RegimeKind) -> Self {
        match r {
            RegimeKind::WithDefaults => Regime::WithDefaults,
            RegimeKind::DefaultFree => Regime::DefaultFree,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub rf_plus: f64,
    pub rf_minus: f64,
    pub rr_plus: f64,
    pub rr_minus: f64,
    pub rc_plus: f64,
    pub rc_minus: f64,
    pub r_d: f64,

    pub mu_i: f64,
    pub mu_c: f64,
    pub loss_i: f64,
    pub loss_c: f64,
    pub alpha: f64,

    pub s0: f64,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_phys: Option<f64>,

    pub payoff: PayoffKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    pub maturity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notional: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_slope: Option<f64>,

    pub regime: RegimeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<EngineKind>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nt: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_param: Option<Param>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_from: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_to: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_points: Option<usize>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The numerical-study benchmark: an at-the-money call, `T = 1`.
    pub fn benchmark() -> Self {
        RunConfig {
            rf_plus: 0.05,
            rf_minus: 0.08,
            rr_plus: 0.05,
            rr_minus: 0.05,
            rc_plus: 0.01,
            rc_minus: 0.01,
            r_d: 0.01,
            mu_i: 0.21,
            mu_c: 0.16,
            loss_i: 0.5,
            loss_c: 0.5,
            alpha: 0.9,
            s0: 1.0,
            sigma: 0.2,
            mu_phys: None,
            payoff: PayoffKind::Call,
            strike: Some(1.0),
            maturity: 1.0,
            notional: None,
            knots: None,
            left_slope: None,
            right_slope: None,
            regime: RegimeKind::WithDefaults,
            engine: None,
            nx: None,
            nt: None,
            steps: None,
            sweep_param: None,
            sweep_from: None,
            sweep_to: None,
            sweep_points: None,
            out: None,
        }
    }

    /// Symmetric rates with `r_D = r_r`, as in the closed-form studies.
    pub fn symmetric(rf: f64, rr: f64, rc: f64) -> Self {
        RunConfig {
            rf_plus: rf,
            rf_minus: rf,
            rr_plus: rr,
            rr_minus: rr,
            rc_plus: rc,
            rc_minus: rc,
            r_d: rr,
            ..Self::benchmark()
        }
    }

    pub fn rates(&self) -> RateSet {
        RateSet {
            rf_plus: self.rf_plus,
            rf_minus: self.rf_minus,
            rr_plus: self.rr_plus,
            rr_minus: self.rr_minus,
            rc_plus: self.rc_plus,
            rc_minus: self.rc_minus,
            r_d: self.r_d,
        }
    }

    fn parts(&self) -> (RateSet, CreditParams, EquityParams) {
        (
            self.rates(),
            CreditParams {
                mu_i: self.mu_i,
                mu_c: self.mu_c,
                loss_i: self.loss_i,
                loss_c: self.loss_c,
                alpha: self.alpha,
            },
            EquityParams {
                s0: self.s0,
                sigma: self.sigma,
                mu_phys: self.mu_phys.unwrap_or(0.0),
            },
        )
    }

    /// Strict unless `allow_violations`, in which case only the domain
    /// checks apply.
    pub fn model(&self, allow_violations: bool) -> Result<MarketModel, CliError> {
        let (r, c, e) = self.parts();
        let m = if allow_violations {
            MarketModel::new_permissive(r, c, e)
        } else {
            MarketModel::new(r, c, e)
        };
        Ok(m?)
    }

    pub fn claim(&self) -> Result<ClaimSpec, CliError> {
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| CliError::Config(format!("payoff {:?} requires `{key}`", self.payoff)))
        };
        let payoff = match self.payoff {
            PayoffKind::Call => Payoff::Call {
                strike: need(self.strike, "strike")?,
            },
            PayoffKind::Put => Payoff::Put {
                strike: need(self.strike, "strike")?,
            },
            PayoffKind::Piecewise => Payoff::PiecewiseLinear {
                knots: self
                    .knots
                    .as_ref()
                    .ok_or_else(|| CliError::Config("payoff \"piecewise\" requires `knots`".into()))?
                    .iter()
                    .map(|k| (k[0], k[1]))
                    .collect(),
                left_slope: need(self.left_slope, "left_slope")?,
                right_slope: need(self.right_slope, "right_slope")?,
            },
            PayoffKind::Zero => return Ok(ClaimSpec::zero(self.maturity)?),
        };
        Ok(ClaimSpec::new(payoff, self.maturity, self.notional.unwrap_or(1.0))?)
    }

    pub fn regime(&self) -> Regime {
        self.regime.into()
    }

    pub fn engine(&self) -> EngineKind {
        self.engine.unwrap_or(EngineKind::Pde)
    }

    /// Config values, falling back to the documented defaults.
    pub fn resolution(&self) -> Result<Resolution, CliError> {
        Resolution::new(
            self.nx.unwrap_or(DEFAULT_NX),
            self.nt.unwrap_or(DEFAULT_NT),
            self.steps.unwrap_or(DEFAULT_STEPS),
        )
    }

    /// The sweep axis, if the config names one.
    pub fn sweep(&self) -> Result<Option<SweepAxis>, CliError> {
        let Some(param) = self.sweep_param else {
            if self.sweep_from.is_some() || self.sweep_to.is_some() || self.sweep_points.is_some() {
                return Err(CliError::Config("sweep bounds given without `sweep_param`".into()));
            }
            return Ok(None);
        };
        let from = self
            .sweep_from
            .ok_or_else(|| CliError::Config("`sweep_param` requires `sweep_from`".into()))?;
        let to = self
            .sweep_to
            .ok_or_else(|| CliError::Config("`sweep_param` requires `sweep_to`".into()))?;
        let points = self
            .sweep_points
            .ok_or_else(|| CliError::Config("`sweep_param` requires `sweep_points`".into()))?;
        SweepAxis::new(param, from, to, points).map(Some)
    }
}
