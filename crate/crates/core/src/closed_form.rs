//! Exact XVA when every account pays the same rate long or short and the
//! agent discounts at the repo rate.
//!
//! In that regime the drivers are linear in the XVA, and the XVA is a
//! deterministic multiple of the agent price `v̂` (up to the kink of the
//! close-out exposure), so everything below is elementary.

use thiserror::Error;

use crate::claim::ClaimSpec;
use crate::drivers::{Regime, Side};
use crate::market::{MarketModel, RateSet};
use crate::strategy::StrategyRow;
use crate::{neg, pos};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClosedFormError {
    #[error("closed forms need symmetric rates with r_D = r_r; got {0:?}")]
    NotSymmetric(RateSet),
    #[error("degenerate rates: {0}")]
    Degenerate(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricRates {
    pub rf: f64,
    pub rr: f64,
    pub rc: f64,
}

impl SymmetricRates {
    pub fn from_rates(rates: &RateSet) -> Result<Self, ClosedFormError> {
        if !rates.is_symmetric() {
            return Err(ClosedFormError::NotSymmetric(*rates));
        }
        Ok(SymmetricRates {
            rf: rates.rf_plus,
            rr: rates.rr_plus,
            rc: rates.rc_plus,
        })
    }
}

/// Total XVA split into its three sources. `total` is the sum of the
/// three terms, computed once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XvaDecomposition {
    pub funding_term: f64,
    pub dva_term: f64,
    pub cva_term: f64,
    pub total: f64,
    pub eta: f64,
    pub kernel: f64,
}

impl XvaDecomposition {
    fn scaled(self, k: f64) -> Self {
        XvaDecomposition {
            funding_term: k * self.funding_term,
            dva_term: k * self.dva_term,
            cva_term: k * self.cva_term,
            total: k * self.total,
            ..self
        }
    }
}

/// `∫_0^τ e^{−λ s} ds`, continuous through `λ = 0`.
fn discount_integral(lambda: f64, tau: f64) -> f64 {
    if lambda == 0.0 {
        tau
    } else {
        -(-lambda * tau).exp_m1() / lambda
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricModel {
    pub model: MarketModel,
    pub rates: SymmetricRates,
    pub claim: ClaimSpec,
}

impl SymmetricModel {
    pub fn new(model: &MarketModel, claim: &ClaimSpec) -> Result<Self, ClosedFormError> {
        Ok(SymmetricModel {
            model: *model,
            rates: SymmetricRates::from_rates(&model.rates)?,
            claim: claim.clone(),
        })
    }

    fn tau(&self, t: f64) -> f64 {
        (self.claim.maturity - t).max(0.0)
    }

    fn alpha(&self) -> f64 {
        self.model.credit.alpha
    }

    /// Coefficient of `v̂` in the running cost: `(r_r − r_f) + α(r_f − r_c)`.
    fn funding_rate(&self) -> f64 {
        let r = &self.rates;
        (r.rr - r.rf) + self.alpha() * (r.rf - r.rc)
    }

    // ---- no defaults ----

    /// `β_t` with `XVA_t = β_t v̂_t`. Rejects `r_f = r_r`; use
    /// [`Self::xva_no_defaults_limit`] there.
    pub fn beta(&self, t: f64) -> Result<f64, ClosedFormError> {
        let r = &self.rates;
        if r.rf == r.rr {
            return Err(ClosedFormError::Degenerate("r_f = r_r"));
        }
        let tau = self.tau(t);
        Ok(((r.rr - r.rf) * tau).exp_m1() * (1.0 - self.alpha() * (r.rf - r.rc) / (r.rf - r.rr)))
    }

    pub fn xva_no_defaults(&self, t: f64, vhat: f64) -> Result<f64, ClosedFormError> {
        Ok(self.beta(t)? * vhat)
    }

    /// Same quantity as [`Self::xva_no_defaults`], written so that it stays
    /// finite at `r_f = r_r`.
    pub fn xva_no_defaults_limit(&self, t: f64, vhat: f64) -> f64 {
        let r = &self.rates;
        self.funding_rate() * discount_integral(r.rf - r.rr, self.tau(t)) * vhat
    }

    /// Stock shares replicating the XVA: `β_t Δ̂`.
    pub fn stock_no_defaults(&self, t: f64, s: f64) -> Result<f64, ClosedFormError> {
        Ok(self.beta(t)? * self.claim.agent_value(&self.model, t, s).delta)
    }

    /// Hedger's price `v̂ + XVA`, in the discounted form.
    pub fn price_no_defaults(&self, t: f64, vhat: f64) -> Result<f64, ClosedFormError> {
        let r = &self.rates;
        if r.rf == r.rr {
            return Err(ClosedFormError::Degenerate("r_f = r_r"));
        }
        let g = ((r.rr - r.rf) * self.tau(t)).exp();
        Ok(g * vhat + self.alpha() * (r.rf - r.rc) * vhat * (1.0 - g) / (r.rf - r.rr))
    }

    pub fn strategies_no_defaults(&self, t: f64, s: f64) -> Result<StrategyRow, ClosedFormError> {
        let a = self.claim.agent_value(&self.model, t, s);
        let xva = self.xva_no_defaults_limit(t, a.value);
        let xi = self.funding_rate() * discount_integral(self.rates.rf - self.rates.rr, self.tau(t)) * a.delta;
        Ok(StrategyRow::assemble(
            &self.model,
            Side::Seller,
            Regime::DefaultFree,
            self.claim.maturity,
            t,
            s,
            xva,
            xi,
            a.value,
            false,
        ))
    }

    // ---- with defaults ----

    /// `η = μ_I + μ_C − r_f`.
    pub fn eta(&self) -> f64 {
        self.model.credit.mu_i + self.model.credit.mu_c - self.rates.rf
    }

    /// `K(t) = (1 − e^{−(η − r_r)(T − t)}) / (η − r_r)`.
    pub fn kernel(&self, t: f64) -> Result<f64, ClosedFormError> {
        let lambda = self.eta() - self.rates.rr;
        if lambda == 0.0 {
            return Err(ClosedFormError::Degenerate("eta = r_r"));
        }
        Ok(discount_integral(lambda, self.tau(t)))
    }

    fn seller_decomposition(&self, t: f64, vhat: f64) -> Result<XvaDecomposition, ClosedFormError> {
        let k = self.kernel(t)?;
        let c = &self.model.credit;
        let rf = self.rates.rf;
        let exposure = (1.0 - c.alpha) * vhat;
        let funding_term = self.funding_rate() * k * vhat;
        let cva_term = (c.mu_c - rf) * c.loss_c * k * neg(exposure);
        let dva_term = -(c.mu_i - rf) * c.loss_i * k * pos(exposure);
        Ok(XvaDecomposition {
            funding_term,
            dva_term,
            cva_term,
            total: funding_term + dva_term + cva_term,
            eta: self.eta(),
            kernel: k,
        })
    }

    /// XVA with both names defaultable. The buyer's value is the reflection
    /// of the seller's (`−XVA⁺` of the claim `−Φ`).
    pub fn xva_with_defaults(
        &self,
        side: Side,
        t: f64,
        vhat: f64,
    ) -> Result<XvaDecomposition, ClosedFormError> {
        match side {
            Side::Seller => self.seller_decomposition(t, vhat),
            Side::Buyer => Ok(self.seller_decomposition(t, -vhat)?.scaled(-1.0)),
        }
    }

    /// XVA as a fraction of a nonnegative agent price (seller's side).
    pub fn a_factor(&self, t: f64) -> Result<f64, ClosedFormError> {
        let c = &self.model.credit;
        let rf = self.rates.rf;
        Ok((self.funding_rate() - c.loss_i * (1.0 - c.alpha) * (c.mu_i - rf)) * self.kernel(t)?)
    }

    /// `∂XVA/∂v̂` for the seller.
    fn seller_sensitivity(&self, t: f64, vhat: f64) -> Result<f64, ClosedFormError> {
        let c = &self.model.credit;
        let rf = self.rates.rf;
        let k = self.kernel(t)?;
        let mut slope = self.funding_rate();
        if vhat < 0.0 {
            slope -= (c.mu_c - rf) * c.loss_c * (1.0 - c.alpha);
        } else if vhat > 0.0 {
            slope -= (c.mu_i - rf) * c.loss_i * (1.0 - c.alpha);
        }
        Ok(slope * k)
    }

    /// Full replicating portfolio of the pre-default XVA.
    pub fn strategies_with_defaults(
        &self,
        side: Side,
        t: f64,
        s: f64,
    ) -> Result<StrategyRow, ClosedFormError> {
        let a = self.claim.agent_value(&self.model, t, s);
        let xva = self.xva_with_defaults(side, t, a.value)?.total;
        let sens = match side {
            Side::Seller => self.seller_sensitivity(t, a.value)?,
            Side::Buyer => self.seller_sensitivity(t, -a.value)?,
        };
        Ok(StrategyRow::assemble(
            &self.model,
            side,
            Regime::WithDefaults,
            self.claim.maturity,
            t,
            s,
            xva,
            sens * a.delta,
            a.value,
            false,
        ))
    }

    /// XVA at `(t, s)` in the requested regime.
    pub fn xva(&self, side: Side, regime: Regime, t: f64, s: f64) -> Result<f64, ClosedFormError> {
        let vhat = self.claim.agent_value(&self.model, t, s).value;
        match regime {
            Regime::WithDefaults => Ok(self.xva_with_defaults(side, t, vhat)?.total),
            Regime::DefaultFree => Ok(self.xva_no_defaults_limit(t, vhat)),
        }
    }

    pub fn strategies(
        &self,
        side: Side,
        regime: Regime,
        t: f64,
        s: f64,
    ) -> Result<StrategyRow, ClosedFormError> {
        match regime {
            Regime::WithDefaults => self.strategies_with_defaults(side, t, s),
            Regime::DefaultFree => self.strategies_no_defaults(t, s),
        }
    }
}
