//! Buyer's and seller's total valuation adjustment (XVA) of European claims
//! when funding, repo and collateral accounts pay different rates for long
//! and short positions, and both the hedger and the counterparty may default.
//!
//! * [`market`] — parameters, piecewise account rates, no-arbitrage checks.
//! * [`claim`] — payoffs and the valuation agent's Black–Scholes price.
//! * [`drivers`] — close-out values and the backward-equation drivers.
//! * [`closed_form`] — exact formulas when all rates are symmetric.
//! * [`pde`] — Crank–Nicolson solver for the general (nonlinear) case.
//! * [`lattice`] — binomial backward induction, used as an independent check.

pub mod claim;
pub mod closed_form;
pub mod drivers;
pub mod lattice;
pub mod market;
pub mod pde;
pub mod strategy;

pub use claim::{AgentValuation, ClaimError, ClaimSpec, Payoff};
pub use closed_form::{ClosedFormError, SymmetricModel, XvaDecomposition};
pub use drivers::{CloseoutValues, DriverArgs, Regime, Side};
pub use lattice::{Level, OracleError, OracleSolution};
pub use market::{
    accrual, CheckGroup, CreditParams, EquityParams, MarketModel, ModelError, Party, RateSet,
    ValidationReport,
};
pub use pde::{PdeError, PdeGrid, PdeSolution, SolverSettings};
pub use strategy::StrategyRow;

/// `x^+`
#[inline]
pub(crate) fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// `x^-`, so that `x = x^+ - x^-`.
#[inline]
pub(crate) fn neg(x: f64) -> f64 {
    (-x).max(0.0)
}
