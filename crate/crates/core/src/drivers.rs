//! Close-out values and backward-equation drivers.
//!
//! Everything on the buyer's side is obtained by reflecting the seller's
//! function (`x ↦ −f(−x)`), never coded separately. The PDE solver and the
//! lattice oracle both evaluate these functions, so they are the single place
//! where the model's economics live.
//!
//! Sign conventions: the BSDE reads `−dY = f(t, Y, Z, ..) dt − Z dW − ..`,
//! so `f` is a drift *toward the past*; a bank account at rate `r` has
//! driver `−r·y`.

use crate::market::{CreditParams, MarketModel};
use crate::{neg, pos};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Hedger sells the claim; upper end of the band.
    Seller,
    /// Hedger buys the claim; lower end of the band.
    Buyer,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Seller, Side::Buyer];

    pub fn name(self) -> &'static str {
        match self {
            Side::Seller => "seller",
            Side::Buyer => "buyer",
        }
    }
}

/// Whether default risk is priced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Regime {
    /// Both names can default at their valuation-measure intensities.
    #[default]
    WithDefaults,
    /// Defaults are switched off entirely: no intensity terms, no bond
    /// positions. Used for the pure funding adjustment.
    DefaultFree,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverArgs {
    pub t: f64,
    /// Wealth, or XVA when fed to the tilde drivers.
    pub v: f64,
    /// Brownian integrand, in currency (`ξ σ S` for a stock position `ξ`).
    pub z: f64,
    pub z_i: f64,
    pub z_c: f64,
    pub vhat: f64,
}

impl DriverArgs {
    pub fn new(t: f64, v: f64, z: f64, z_i: f64, z_c: f64, vhat: f64) -> Self {
        DriverArgs {
            t,
            v,
            z,
            z_i,
            z_c,
            vhat,
        }
    }

    /// All value-like arguments negated; time untouched.
    pub fn reflected(&self) -> Self {
        DriverArgs {
            t: self.t,
            v: -self.v,
            z: -self.z,
            z_i: -self.z_i,
            z_c: -self.z_c,
            vhat: -self.vhat,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloseoutValues {
    pub theta_i: f64,
    pub theta_c: f64,
    /// `theta_i − v̂`, always `≤ 0`.
    pub theta_tilde_i: f64,
    /// `theta_c − v̂`, always `≥ 0`.
    pub theta_tilde_c: f64,
}

/// Wealth the seller holds right after the first default, given the agent
/// value `vhat` at that time. Only the uncollateralized part is at risk.
pub fn closeout(credit: &CreditParams, vhat: f64) -> CloseoutValues {
    let exposure = (1.0 - credit.alpha) * vhat;
    let theta_tilde_i = -credit.loss_i * pos(exposure);
    let theta_tilde_c = credit.loss_c * neg(exposure);
    CloseoutValues {
        theta_i: vhat + theta_tilde_i,
        theta_c: vhat + theta_tilde_c,
        theta_tilde_i,
        theta_tilde_c,
    }
}

/// XVA-level jump targets `(θ̃_I, θ̃_C)` as seen by `side`.
pub fn closeout_targets(credit: &CreditParams, side: Side, vhat: f64) -> (f64, f64) {
    match side {
        Side::Seller => {
            let c = closeout(credit, vhat);
            (c.theta_tilde_i, c.theta_tilde_c)
        }
        Side::Buyer => {
            let c = closeout(credit, -vhat);
            (-c.theta_tilde_i, -c.theta_tilde_c)
        }
    }
}

/// Seller's wealth driver.
pub fn f_plus(model: &MarketModel, a: &DriverArgs) -> f64 {
    let r = &model.rates;
    let sigma = model.equity.sigma;
    let alpha = model.credit.alpha;
    let cash = a.v + a.z_i + a.z_c - alpha * a.vhat;
    let coll = alpha * a.vhat;
    -(r.rf_plus * pos(cash) - r.rf_minus * neg(cash)
        + (r.r_d - r.rr_minus) * pos(a.z) / sigma
        - (r.r_d - r.rr_plus) * neg(a.z) / sigma
        - r.r_d * a.z_i
        - r.r_d * a.z_c
        + r.rc_plus * pos(coll)
        - r.rc_minus * neg(coll))
}

/// Buyer's wealth driver, the reflection of [`f_plus`].
pub fn f_minus(model: &MarketModel, a: &DriverArgs) -> f64 {
    -f_plus(model, &a.reflected())
}

pub fn f_side(model: &MarketModel, side: Side, a: &DriverArgs) -> f64 {
    match side {
        Side::Seller => f_plus(model, a),
        Side::Buyer => f_minus(model, a),
    }
}

/// Wealth driver re-expressed in terms of the XVA (`a.v` is the XVA).
pub fn f_tilde(model: &MarketModel, side: Side, a: &DriverArgs) -> f64 {
    match side {
        Side::Seller => {
            let shifted = DriverArgs {
                v: a.v + a.vhat,
                ..*a
            };
            f_plus(model, &shifted) + model.rates.r_d * a.vhat
        }
        Side::Buyer => -f_tilde(model, Side::Seller, &a.reflected()),
    }
}

/// Driver of the pre-default XVA equation on the default-free filtration.
///
/// `z` is the full Brownian integrand of the hedger's wealth, i.e. the
/// XVA's integrand plus the agent's `σ S Δ̂`.
pub fn g_reduced(
    model: &MarketModel,
    side: Side,
    regime: Regime,
    t: f64,
    u: f64,
    z: f64,
    vhat: f64,
) -> f64 {
    match side {
        Side::Seller => match regime {
            Regime::WithDefaults => {
                let (h_i, h_c) = model.intensities();
                let c = closeout(&model.credit, vhat);
                let jump_i = c.theta_tilde_i - u;
                let jump_c = c.theta_tilde_c - u;
                h_i * jump_i
                    + h_c * jump_c
                    + f_tilde(
                        model,
                        Side::Seller,
                        &DriverArgs::new(t, u, z, jump_i, jump_c, vhat),
                    )
            }
            Regime::DefaultFree => f_tilde(
                model,
                Side::Seller,
                &DriverArgs::new(t, u, z, 0.0, 0.0, vhat),
            ),
        },
        Side::Buyer => -g_reduced(model, Side::Seller, regime, t, -u, -z, -vhat),
    }
}

/// Driver of the pre-default wealth (price) equation, with terminal value
/// the payoff itself. Satisfies
/// `g_value(u + v̂, z; v̂) = g_reduced(u, z; v̂) − r_D v̂`.
pub fn g_value(
    model: &MarketModel,
    side: Side,
    regime: Regime,
    t: f64,
    v: f64,
    z: f64,
    vhat: f64,
) -> f64 {
    match side {
        Side::Seller => match regime {
            Regime::WithDefaults => {
                let (h_i, h_c) = model.intensities();
                let c = closeout(&model.credit, vhat);
                let jump_i = c.theta_i - v;
                let jump_c = c.theta_c - v;
                h_i * jump_i
                    + h_c * jump_c
                    + f_plus(model, &DriverArgs::new(t, v, z, jump_i, jump_c, vhat))
            }
            Regime::DefaultFree => f_plus(model, &DriverArgs::new(t, v, z, 0.0, 0.0, vhat)),
        },
        Side::Buyer => -g_value(model, Side::Seller, regime, t, -v, -z, -vhat),
    }
}

/// Lipschitz constants of [`g_reduced`] in `(u, z)`, used to size time steps.
pub fn g_lipschitz(model: &MarketModel, regime: Regime) -> (f64, f64) {
    let r = &model.rates;
    let rf = r.rf_plus.max(r.rf_minus);
    let l_z = (r.r_d - r.rr_minus).abs().max((r.r_d - r.rr_plus).abs()) / model.equity.sigma;
    let l_u = match regime {
        Regime::WithDefaults => {
            let (h_i, h_c) = model.intensities();
            h_i + h_c + rf + 2.0 * r.r_d
        }
        Regime::DefaultFree => rf,
    };
    (l_u, l_z)
}

/// A Lipschitz constant of [`f_plus`] in the ℓ¹ norm over
/// `(v, z, z_i, z_c, v̂)`.
pub fn f_lipschitz(model: &MarketModel) -> f64 {
    let r = &model.rates;
    let alpha = model.credit.alpha;
    let rf = r.rf_plus.max(r.rf_minus);
    let rc = r.rc_plus.max(r.rc_minus);
    let l_z = (r.r_d - r.rr_minus).abs().max((r.r_d - r.rr_plus).abs()) / model.equity.sigma;
    [rf, l_z, rf + r.r_d, alpha * (rf + rc)]
        .into_iter()
        .fold(0.0, f64::max)
}
