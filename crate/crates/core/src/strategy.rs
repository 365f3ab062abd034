//! Replication strategy of the XVA at a single state.

use crate::drivers::{closeout_targets, Regime, Side};
use crate::market::{accrual, MarketModel};

/// Share counts of the XVA replicating portfolio, the unit prices they are
/// held at, and the state they were computed for.
///
/// Share counts are per unit of each account, so `xi_f * b_rf` is the
/// dollar amount in the funding account.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyRow {
    pub t: f64,
    pub s: f64,
    pub xva: f64,
    pub vhat: f64,
    /// Stock shares.
    pub xi: f64,
    /// Hedger's own bond.
    pub xi_i: f64,
    /// Counterparty bond.
    pub xi_c: f64,
    pub psi_r: f64,
    pub psi_c: f64,
    pub xi_f: f64,
    pub p_i: f64,
    pub p_c: f64,
    pub b_rf: f64,
    pub b_rr: f64,
    pub b_rc: f64,
    /// Derivative taken one-sided at the edge of a grid.
    pub boundary: bool,
}

impl StrategyRow {
    /// Builds the portfolio from the XVA level `xva` and its spot sensitivity
    /// `xi = ∂XVA/∂S`. Every other account is then determined: bonds carry
    /// the jump to the close-out target, repo finances the stock, collateral
    /// mirrors `α v̂`, and funding absorbs the rest.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        model: &MarketModel,
        side: Side,
        regime: Regime,
        maturity: f64,
        t: f64,
        s: f64,
        xva: f64,
        xi: f64,
        vhat: f64,
        boundary: bool,
    ) -> Self {
        let r = &model.rates;
        let alpha = model.credit.alpha;
        let tau = (maturity - t).max(0.0);
        let p_i = (-model.credit.mu_i * tau).exp();
        let p_c = (-model.credit.mu_c * tau).exp();
        let (xi_i, xi_c, funding) = match regime {
            Regime::WithDefaults => {
                let (tt_i, tt_c) = closeout_targets(&model.credit, side, vhat);
                ((xva - tt_i) / p_i, (xva - tt_c) / p_c, -xva + tt_i + tt_c - alpha * vhat)
            }
            Regime::DefaultFree => (0.0, 0.0, xva - alpha * vhat),
        };
        let repo_dollars = -xi * s;
        let coll_dollars = -alpha * vhat;
        let b_rr = accrual(r.rate_repo(repo_dollars), 0.0, t);
        let b_rc = accrual(r.rate_collateral(alpha * vhat), 0.0, t);
        let b_rf = accrual(r.rate_funding(funding), 0.0, t);
        StrategyRow {
            t,
            s,
            xva,
            vhat,
            xi,
            xi_i,
            xi_c,
            psi_r: repo_dollars / b_rr,
            psi_c: coll_dollars / b_rc,
            xi_f: funding / b_rf,
            p_i,
            p_c,
            b_rf,
            b_rr,
            b_rc,
            boundary,
        }
    }

    /// Value of the portfolio; equals `xva` by construction.
    pub fn wealth(&self) -> f64 {
        self.xi * self.s
            + self.xi_i * self.p_i
            + self.xi_c * self.p_c
            + self.xi_f * self.b_rf
            + self.psi_r * self.b_rr
            - self.psi_c * self.b_rc
    }

    /// Dollar position the treasury carries for the whole trade: the XVA
    /// funding account plus the agent's own hedge cash `v̂`.
    pub fn funding_dollars(&self) -> f64 {
        self.xi_f * self.b_rf + self.vhat
    }
}
