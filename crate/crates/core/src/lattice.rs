//! Binomial backward induction for the pre-default XVA (or price) equation.
//!
//! The Brownian motion moves `±√dt` with probability one half and the spot
//! is its exact exponential. Each step is explicit in `Z`, implicit in `U`:
//!
//! ```text
//! Z_k = (U_{k+1}^up − U_{k+1}^down) / (2√dt)
//! U_k = E[U_{k+1}] + g(U_k, Z_k) dt
//! ```
//!
//! Deliberately shares nothing with the PDE solver except the drivers.

use thiserror::Error;

use crate::claim::ClaimSpec;
use crate::drivers::{g_lipschitz, g_reduced, g_value, Regime, Side};
use crate::market::MarketModel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("lattice needs at least one step")]
    NoSteps,
    #[error("fixed point failed at step {step} (residual {residual:e}); try n_steps >= {suggested}")]
    FixedPoint {
        step: usize,
        residual: f64,
        suggested: usize,
    },
    #[error("non-finite value at step {step}, node {node}")]
    NonFinite { step: usize, node: usize },
}

/// Which quantity the lattice carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Level {
    /// The XVA, with zero terminal value.
    #[default]
    Xva,
    /// The hedger's price, with the payoff as terminal value.
    Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub n_steps: usize,
    pub dt: f64,
    /// `u[k][j]` at step `k`, node `j` (`j` up-moves out of `k`).
    pub u: Vec<Vec<f64>>,
    /// Integrand of `u` itself (the agent's part excluded at XVA level).
    pub z: Vec<Vec<f64>>,
}

impl OracleSolution {
    pub fn root(&self) -> f64 {
        self.u[0][0]
    }
}

struct Tree<'a> {
    model: &'a MarketModel,
    claim: &'a ClaimSpec,
    side: Side,
    regime: Regime,
    level: Level,
    n: usize,
    dt: f64,
    sq: f64,
}

const TOL: f64 = 1e-12;
const MAX_ITER: usize = 200;

impl Tree<'_> {
    fn spot(&self, k: usize, j: usize) -> f64 {
        let sigma = self.model.equity.sigma;
        let t = k as f64 * self.dt;
        let w = (2.0 * j as f64 - k as f64) * self.sq;
        self.model.equity.s0 * ((self.model.rates.r_d - 0.5 * sigma * sigma) * t + sigma * w).exp()
    }

    fn terminal(&self) -> Vec<f64> {
        (0..=self.n)
            .map(|j| match self.level {
                Level::Xva => 0.0,
                Level::Value => self.claim.payoff(self.spot(self.n, j)),
            })
            .collect()
    }

    /// One backward step from `next` (level `k+1`) into `cur` / `zs` (level `k`).
    fn step(&self, k: usize, next: &[f64], cur: &mut Vec<f64>, zs: &mut Vec<f64>) -> Result<(), OracleError> {
        let t = k as f64 * self.dt;
        let sigma = self.model.equity.sigma;
        cur.clear();
        zs.clear();
        for j in 0..=k {
            let (dn, up) = (next[j], next[j + 1]);
            let mean = 0.5 * (up + dn);
            let z_own = (up - dn) / (2.0 * self.sq);
            let s = self.spot(k, j);
            let a = self.claim.agent_value(self.model, t, s);
            let driver = |u: f64| match self.level {
                Level::Xva => {
                    let z = z_own + sigma * s * a.delta;
                    g_reduced(self.model, self.side, self.regime, t, u, z, a.value)
                }
                Level::Value => g_value(self.model, self.side, self.regime, t, u, z_own, a.value),
            };
            let mut u = mean;
            let mut res = f64::INFINITY;
            for _ in 0..MAX_ITER {
                let nu = mean + driver(u) * self.dt;
                res = (nu - u).abs();
                u = nu;
                if res <= TOL * (1.0 + u.abs()) {
                    break;
                }
            }
            if !u.is_finite() {
                return Err(OracleError::NonFinite { step: k, node: j });
            }
            if res > TOL * (1.0 + u.abs()) {
                let (l_u, _) = g_lipschitz(self.model, self.regime);
                let suggested = ((2.0 * l_u * self.claim.maturity).ceil() as usize).max(2 * self.n);
                return Err(OracleError::FixedPoint {
                    step: k,
                    residual: res,
                    suggested,
                });
            }
            cur.push(u);
            zs.push(z_own);
        }
        Ok(())
    }
}

fn tree<'a>(
    model: &'a MarketModel,
    claim: &'a ClaimSpec,
    n_steps: usize,
    level: Level,
    side: Side,
    regime: Regime,
) -> Result<Tree<'a>, OracleError> {
    if n_steps == 0 {
        return Err(OracleError::NoSteps);
    }
    let dt = claim.maturity / n_steps as f64;
    Ok(Tree {
        model,
        claim,
        side,
        regime,
        level,
        n: n_steps,
        dt,
        sq: dt.sqrt(),
    })
}

/// Full backward induction, keeping every node.
pub fn solve_reduced(
    model: &MarketModel,
    claim: &ClaimSpec,
    n_steps: usize,
    level: Level,
    side: Side,
    regime: Regime,
) -> Result<OracleSolution, OracleError> {
    let tr = tree(model, claim, n_steps, level, side, regime)?;
    let mut u = vec![Vec::new(); n_steps + 1];
    let mut z = vec![Vec::new(); n_steps + 1];
    u[n_steps] = tr.terminal();
    z[n_steps] = vec![0.0; n_steps + 1];
    for k in (0..n_steps).rev() {
        let (head, tail) = u.split_at_mut(k + 1);
        tr.step(k, &tail[0], &mut head[k], &mut z[k])?;
    }
    Ok(OracleSolution {
        n_steps,
        dt: tr.dt,
        u,
        z,
    })
}

/// Value at the root only, in `O(n)` memory.
pub fn root_value(
    model: &MarketModel,
    claim: &ClaimSpec,
    n_steps: usize,
    level: Level,
    side: Side,
    regime: Regime,
) -> Result<f64, OracleError> {
    Ok(root(model, claim, n_steps, level, side, regime)?.0)
}

/// `(U, Z)` at the root, in `O(n)` memory.
pub fn root(
    model: &MarketModel,
    claim: &ClaimSpec,
    n_steps: usize,
    level: Level,
    side: Side,
    regime: Regime,
) -> Result<(f64, f64), OracleError> {
    let tr = tree(model, claim, n_steps, level, side, regime)?;
    let mut next = tr.terminal();
    let mut cur = Vec::with_capacity(n_steps + 1);
    let mut zs = Vec::with_capacity(n_steps + 1);
    for k in (0..n_steps).rev() {
        tr.step(k, &next, &mut cur, &mut zs)?;
        std::mem::swap(&mut next, &mut cur);
    }
    Ok((next[0], zs[0]))
}

/// `(buyer XVA, seller XVA)` at time zero.
pub fn band(
    model: &MarketModel,
    claim: &ClaimSpec,
    n_steps: usize,
    regime: Regime,
) -> Result<(f64, f64), OracleError> {
    let b = root_value(model, claim, n_steps, Level::Xva, Side::Buyer, regime)?;
    let s = root_value(model, claim, n_steps, Level::Xva, Side::Seller, regime)?;
    Ok((b, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::tests::benchmark;
    use crate::market::RateSet;

    #[test]
    fn zero_claim_zero_everywhere() {
        let m = benchmark();
        let c = ClaimSpec::zero(1.0).unwrap();
        for level in [Level::Xva, Level::Value] {
            let sol = solve_reduced(&m, &c, 50, level, Side::Seller, Regime::WithDefaults).unwrap();
            assert!(sol.u.iter().flatten().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn rejects_zero_steps() {
        let m = benchmark();
        let c = ClaimSpec::call(1.0, 1.0).unwrap();
        assert_eq!(band(&m, &c, 0, Regime::WithDefaults), Err(OracleError::NoSteps));
    }

    #[test]
    fn shape_and_fast_path_agree() {
        let m = benchmark();
        let c = ClaimSpec::call(1.0, 1.0).unwrap();
        let sol = solve_reduced(&m, &c, 40, Level::Xva, Side::Buyer, Regime::WithDefaults).unwrap();
        for (k, row) in sol.u.iter().enumerate() {
            assert_eq!(row.len(), k + 1);
        }
        assert!(sol.u[40].iter().all(|&v| v == 0.0));
        let r = root(&m, &c, 40, Level::Xva, Side::Buyer, Regime::WithDefaults).unwrap();
        assert_eq!(r, (sol.root(), sol.z[0][0]));
    }

    #[test]
    fn symmetric_default_free_band_is_degenerate() {
        let mut m = benchmark();
        m.rates = RateSet::symmetric(0.08, 0.05, 0.01);
        let c = ClaimSpec::call(1.0, 1.0).unwrap();
        let (b, s) = band(&m, &c, 200, Regime::DefaultFree).unwrap();
        assert!((b - s).abs() < 1e-11, "{b} vs {s}");
    }

    #[test]
    fn value_level_is_xva_plus_agent_price() {
        let m = benchmark();
        let c = ClaimSpec::call(1.0, 1.0).unwrap();
        let n = 400;
        let v = root_value(&m, &c, n, Level::Value, Side::Seller, Regime::WithDefaults).unwrap();
        let u = root_value(&m, &c, n, Level::Xva, Side::Seller, Regime::WithDefaults).unwrap();
        let vh = c.agent_value(&m, 0.0, 1.0).value;
        // two different discretizations of the same quantity
        assert!((v - (u + vh)).abs() < 2e-3, "{v} vs {}", u + vh);
    }
}
