//! Engine dispatch: one valuation point, both sides, any engine.

use serde::{Deserialize, Serialize};
use xva_core::lattice::{self, Level};
use xva_core::pde::{self, PdeGrid, SolverSettings};
use xva_core::{ClaimSpec, MarketModel, Regime, Side, StrategyRow, SymmetricModel};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    Closed,
    Pde,
    Lattice,
    All,
}

/// A single engine (not `All`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Closed,
    Pde,
    Lattice,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Closed => "closed",
            Engine::Pde => "pde",
            Engine::Lattice => "lattice",
        }
    }
}

impl EngineKind {
    /// Engines to run. `All` drops the closed form when rates are asymmetric.
    pub fn engines(self, model: &MarketModel) -> Result<Vec<Engine>, CliError> {
        Ok(match self {
            EngineKind::Closed => {
                if !model.rates.is_symmetric() {
                    return Err(CliError::Incompatible(
                        "the closed-form engine needs symmetric rates with r_d = rr".into(),
                    ));
                }
                vec![Engine::Closed]
            }
            EngineKind::Pde => vec![Engine::Pde],
            EngineKind::Lattice => vec![Engine::Lattice],
            EngineKind::All if model.rates.is_symmetric() => vec![Engine::Closed, Engine::Pde, Engine::Lattice],
            EngineKind::All => vec![Engine::Pde, Engine::Lattice],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution {
    pub nx: usize,
    pub nt: usize,
    pub steps: usize,
}

impl Resolution {
    pub fn new(nx: usize, nt: usize, steps: usize) -> Result<Self, CliError> {
        if nx == 0 || nt == 0 || steps == 0 {
            return Err(CliError::Config(format!(
                "resolutions must be positive (nx={nx}, nt={nt}, steps={steps})"
            )));
        }
        Ok(Resolution { nx, nt, steps })
    }
}

/// Both sides at `(0, S0)` from one engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointValue {
    pub engine: Engine,
    pub vhat: f64,
    pub seller: StrategyRow,
    pub buyer: StrategyRow,
}

impl PointValue {
    pub fn side(&self, side: Side) -> &StrategyRow {
        match side {
            Side::Seller => &self.seller,
            Side::Buyer => &self.buyer,
        }
    }

    /// Seller minus buyer.
    pub fn width(&self) -> f64 {
        self.seller.xva - self.buyer.xva
    }
}

pub fn evaluate(
    engine: Engine,
    model: &MarketModel,
    claim: &ClaimSpec,
    regime: Regime,
    res: Resolution,
) -> Result<PointValue, CliError> {
    let s0 = model.equity.s0;
    let vhat = claim.agent_value(model, 0.0, s0).value;
    let (seller, buyer) = match engine {
        Engine::Closed => {
            let cf = SymmetricModel::new(model, claim)?;
            (
                cf.strategies(Side::Seller, regime, 0.0, s0)?,
                cf.strategies(Side::Buyer, regime, 0.0, s0)?,
            )
        }
        Engine::Pde => {
            let grid = PdeGrid::aligned(model, claim, res.nx, res.nt)?;
            let sol = pde::solve_with(model, claim, &grid, &SolverSettings::with_regime(regime))?;
            (sol.strategies(0.0, s0, Side::Seller)?, sol.strategies(0.0, s0, Side::Buyer)?)
        }
        Engine::Lattice => {
            let row = |side| -> Result<StrategyRow, CliError> {
                let (u, z) = lattice::root(model, claim, res.steps, Level::Xva, side, regime)?;
                // z = σ S ∂u/∂S
                let xi = z / (model.equity.sigma * s0);
                Ok(StrategyRow::assemble(model, side, regime, claim.maturity, 0.0, s0, u, xi, vhat, false))
            };
            (row(Side::Seller)?, row(Side::Buyer)?)
        }
    };
    Ok(PointValue {
        engine,
        vhat,
        seller,
        buyer,
    })
}
