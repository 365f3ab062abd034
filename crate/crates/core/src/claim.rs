//! European claims and their valuation-agent price.
//!
//! The agent discounts at `r_D` and lets the stock drift at `r_D`, so its
//! price is plain Black–Scholes with rate `r_D`. Piecewise-linear payoffs are
//! decomposed exactly into a bond, a stock position and a strip of calls.

use statrs::function::erf::erfc;
use thiserror::Error;

use crate::market::MarketModel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClaimError {
    #[error("strike must be positive and finite, got {0}")]
    BadStrike(f64),
    #[error("maturity must be positive and finite, got {0}")]
    BadMaturity(f64),
    #[error("notional must be finite, got {0}")]
    BadNotional(f64),
    #[error("piecewise-linear payoff needs at least one knot")]
    NoKnots,
    #[error("knot abscissae must be positive, finite and strictly increasing")]
    BadKnots,
    #[error("payoff slopes and knot values must be finite")]
    BadSlope,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payoff {
    Call { strike: f64 },
    Put { strike: f64 },
    /// Continuous payoff interpolating `knots` linearly, extended with
    /// `left_slope` below the first knot and `right_slope` above the last.
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
        left_slope: f64,
        right_slope: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClaimSpec {
    pub payoff: Payoff,
    pub maturity: f64,
    /// Scales the payoff. Negative for a short claim, zero for the null claim.
    pub notional: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentValuation {
    pub value: f64,
    pub delta: f64,
}

/// `Φ(s) = a + b·s + Σ c_k (s − K_k)^+`.
#[derive(Debug, Clone, PartialEq)]
struct Decomposition {
    bond: f64,
    stock: f64,
    calls: Vec<(f64, f64)>,
}

impl ClaimSpec {
    pub fn call(strike: f64, maturity: f64) -> Result<Self, ClaimError> {
        Self::new(Payoff::Call { strike }, maturity, 1.0)
    }

    pub fn put(strike: f64, maturity: f64) -> Result<Self, ClaimError> {
        Self::new(Payoff::Put { strike }, maturity, 1.0)
    }

    /// The identically zero claim.
    pub fn zero(maturity: f64) -> Result<Self, ClaimError> {
        Self::new(Payoff::Call { strike: 1.0 }, maturity, 0.0)
    }

    pub fn new(payoff: Payoff, maturity: f64, notional: f64) -> Result<Self, ClaimError> {
        if !(maturity.is_finite() && maturity > 0.0) {
            return Err(ClaimError::BadMaturity(maturity));
        }
        if !notional.is_finite() {
            return Err(ClaimError::BadNotional(notional));
        }
        match &payoff {
            Payoff::Call { strike } | Payoff::Put { strike } => {
                if !(strike.is_finite() && *strike > 0.0) {
                    return Err(ClaimError::BadStrike(*strike));
                }
            }
            Payoff::PiecewiseLinear {
                knots,
                left_slope,
                right_slope,
            } => {
                if knots.is_empty() {
                    return Err(ClaimError::NoKnots);
                }
                if !left_slope.is_finite()
                    || !right_slope.is_finite()
                    || knots.iter().any(|k| !k.1.is_finite())
                {
                    return Err(ClaimError::BadSlope);
                }
                let ok = knots.iter().all(|k| k.0.is_finite() && k.0 > 0.0)
                    && knots.windows(2).all(|w| w[0].0 < w[1].0);
                if !ok {
                    return Err(ClaimError::BadKnots);
                }
            }
        }
        Ok(ClaimSpec {
            payoff,
            maturity,
            notional,
        })
    }

    /// Same claim with the payoff negated.
    pub fn negated(&self) -> Self {
        ClaimSpec {
            notional: -self.notional,
            ..self.clone()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.notional == 0.0
    }

    /// Terminal payoff `Φ(s)`.
    pub fn payoff(&self, s: f64) -> f64 {
        if self.notional == 0.0 {
            return 0.0;
        }
        let raw = match &self.payoff {
            Payoff::Call { strike } => (s - strike).max(0.0),
            Payoff::Put { strike } => (strike - s).max(0.0),
            Payoff::PiecewiseLinear { .. } => {
                let d = self.decompose();
                d.bond + d.stock * s + d.calls.iter().map(|(k, c)| c * (s - k).max(0.0)).sum::<f64>()
            }
        };
        self.notional * raw
    }

    fn decompose(&self) -> Decomposition {
        match &self.payoff {
            Payoff::Call { strike } => Decomposition {
                bond: 0.0,
                stock: 0.0,
                calls: vec![(*strike, 1.0)],
            },
            // (K − s)^+ = K − s + (s − K)^+
            Payoff::Put { strike } => Decomposition {
                bond: *strike,
                stock: -1.0,
                calls: vec![(*strike, 1.0)],
            },
            Payoff::PiecewiseLinear {
                knots,
                left_slope,
                right_slope,
            } => {
                let (x0, y0) = knots[0];
                let mut calls = Vec::with_capacity(knots.len());
                let mut slope = *left_slope;
                for (i, &(x, _)) in knots.iter().enumerate() {
                    let next = match knots.get(i + 1) {
                        Some(&(x1, y1)) => (y1 - knots[i].1) / (x1 - x),
                        None => *right_slope,
                    };
                    if next != slope {
                        calls.push((x, next - slope));
                    }
                    slope = next;
                }
                Decomposition {
                    bond: y0 - left_slope * x0,
                    stock: *left_slope,
                    calls,
                }
            }
        }
    }

    /// Agent price `V̂(t, s)` and delta `∂V̂/∂s`.
    ///
    /// At maturity the delta is the right-derivative of the payoff.
    pub fn agent_value(&self, model: &MarketModel, t: f64, s: f64) -> AgentValuation {
        debug_assert!(s > 0.0, "spot must be positive");
        if self.notional == 0.0 {
            return AgentValuation {
                value: 0.0,
                delta: 0.0,
            };
        }
        let r = model.rates.r_d;
        let sigma = model.equity.sigma;
        let tau = (self.maturity - t).max(0.0);
        let d = self.decompose();
        let mut value = d.bond * (-r * tau).exp() + d.stock * s;
        let mut delta = d.stock;
        for &(k, c) in &d.calls {
            let (v, dl) = bs_call(s, k, r, sigma, tau);
            value += c * v;
            delta += c * dl;
        }
        AgentValuation {
            value: self.notional * value,
            delta: self.notional * delta,
        }
    }
}

fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Black–Scholes call on one unit with rate `r` for time-to-maturity `tau`.
fn bs_call(s: f64, k: f64, r: f64, sigma: f64, tau: f64) -> (f64, f64) {
    if tau <= 0.0 {
        return ((s - k).max(0.0), if s >= k { 1.0 } else { 0.0 });
    }
    let sd = sigma * tau.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * tau) / sd;
    let d2 = d1 - sd;
    let n1 = norm_cdf(d1);
    (s * n1 - k * (-r * tau).exp() * norm_cdf(d2), n1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::tests::benchmark;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn model(r_d: f64, sigma: f64) -> MarketModel {
        let mut m = benchmark();
        m.rates.r_d = r_d;
        m.equity.sigma = sigma;
        m
    }

    /// Discounted expectation of the payoff under the lognormal law, by
    /// composite Simpson on the standard-normal variable over [-12, 12].
    fn quadrature_value(spec: &ClaimSpec, m: &MarketModel, t: f64, s: f64) -> f64 {
        let r = m.rates.r_d;
        let sig = m.equity.sigma;
        let tau = spec.maturity - t;
        let n = 200_000;
        let (a, b) = (-12.0, 12.0);
        let h = (b - a) / n as f64;
        let f = |y: f64| {
            let st = s * ((r - 0.5 * sig * sig) * tau + sig * tau.sqrt() * y).exp();
            spec.payoff(st) * (-0.5 * y * y).exp()
        };
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        (-r * tau).exp() * acc * h / 3.0 / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn payoff_examples() {
        let c = ClaimSpec::call(1.0, 1.0).unwrap();
        assert_relative_eq!(c.payoff(1.3), 0.3, epsilon = 1e-15);
        assert_eq!(c.payoff(1.0), 0.0);
        let p = ClaimSpec::put(1.0, 1.0).unwrap();
        assert_relative_eq!(p.payoff(0.7), 0.3, epsilon = 1e-15);
        assert_eq!(ClaimSpec::zero(1.0).unwrap().payoff(5.0), 0.0);
        assert_relative_eq!(c.negated().payoff(1.3), -0.3, epsilon = 1e-15);
    }

    #[test]
    fn atm_call_matches_quadrature() {
        let m = model(0.05, 0.2);
        let c = ClaimSpec::call(1.0, 1.0).unwrap();
        let v = c.agent_value(&m, 0.0, 1.0).value;
        let q = quadrature_value(&c, &m, 0.0, 1.0);
        assert!((v - q).abs() < 1e-9, "{v} vs {q}");
        assert!((v - 0.104506).abs() < 5e-7, "{v}");
    }

    #[test]
    fn terminal_value_and_right_delta() {
        let m = model(0.05, 0.2);
        let c = ClaimSpec::call(1.0, 1.0).unwrap();
        let a = c.agent_value(&m, 1.0, 1.3);
        assert_relative_eq!(a.value, 0.3, epsilon = 1e-15);
        assert_eq!(a.delta, 1.0);
        assert_eq!(c.agent_value(&m, 1.0, 1.0).delta, 1.0);
        assert_eq!(c.agent_value(&m, 1.0, 0.9).delta, 0.0);
        let p = ClaimSpec::put(1.0, 1.0).unwrap();
        assert_eq!(p.agent_value(&m, 1.0, 1.0).delta, 0.0);
        assert_eq!(p.agent_value(&m, 1.0, 0.9).delta, -1.0);
    }

    #[test]
    fn vanishing_volatility_limit() {
        let m = model(0.05, 1e-8);
        let c = ClaimSpec::call(1.0, 1.0).unwrap();
        let v = c.agent_value(&m, 0.0, 1.2).value;
        assert_relative_eq!(v, 1.2 - (-0.05f64).exp(), epsilon = 1e-12);
        assert!((v - 0.248771).abs() < 5e-7);
    }

    #[test]
    fn put_call_parity() {
        let m = model(0.03, 0.25);
        let c = ClaimSpec::call(1.1, 2.0).unwrap();
        let p = ClaimSpec::put(1.1, 2.0).unwrap();
        for s in [0.5, 0.9, 1.1, 1.7] {
            let lhs = c.agent_value(&m, 0.5, s).value - p.agent_value(&m, 0.5, s).value;
            let rhs = s - 1.1 * (-0.03f64 * 1.5).exp();
            assert_relative_eq!(lhs, rhs, epsilon = 1e-13);
        }
    }

    #[test]
    fn piecewise_linear_decomposes_exactly() {
        // straddle-like shape with a cap: slopes -1, then 1, then 0.
        let spec = ClaimSpec::new(
            Payoff::PiecewiseLinear {
                knots: vec![(0.8, 0.2), (1.0, 0.0), (1.4, 0.4)],
                left_slope: -1.0,
                right_slope: 0.0,
            },
            1.0,
            2.0,
        )
        .unwrap();
        for (s, want) in [(0.5, 0.5), (0.9, 0.1), (1.0, 0.0), (1.2, 0.2), (2.0, 0.4)] {
            assert_relative_eq!(spec.payoff(s), 2.0 * want, epsilon = 1e-14);
        }
        let m = model(0.02, 0.3);
        let v = spec.agent_value(&m, 0.25, 1.05).value;
        let q = quadrature_value(&spec, &m, 0.25, 1.05);
        assert!((v - q).abs() < 1e-9, "{v} vs {q}");
    }

    #[test]
    fn call_expressed_as_piecewise_linear_matches_call() {
        let m = model(0.04, 0.2);
        let pl = ClaimSpec::new(
            Payoff::PiecewiseLinear {
                knots: vec![(1.0, 0.0)],
                left_slope: 0.0,
                right_slope: 1.0,
            },
            1.0,
            1.0,
        )
        .unwrap();
        let c = ClaimSpec::call(1.0, 1.0).unwrap();
        let a = pl.agent_value(&m, 0.3, 0.95);
        let b = c.agent_value(&m, 0.3, 0.95);
        assert_relative_eq!(a.value, b.value, epsilon = 1e-15);
        assert_relative_eq!(a.delta, b.delta, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(ClaimSpec::call(0.0, 1.0).is_err());
        assert!(ClaimSpec::call(1.0, 0.0).is_err());
        assert!(ClaimSpec::new(Payoff::Call { strike: 1.0 }, 1.0, f64::NAN).is_err());
        let bad = Payoff::PiecewiseLinear {
            knots: vec![(1.0, 0.0), (1.0, 1.0)],
            left_slope: 0.0,
            right_slope: 0.0,
        };
        assert_eq!(ClaimSpec::new(bad, 1.0, 1.0), Err(ClaimError::BadKnots));
        let empty = Payoff::PiecewiseLinear {
            knots: vec![],
            left_slope: 0.0,
            right_slope: 0.0,
        };
        assert_eq!(ClaimSpec::new(empty, 1.0, 1.0), Err(ClaimError::NoKnots));
    }

    #[test]
    fn delta_matches_central_difference() {
        let m = model(0.05, 0.2);
        let specs = [
            ClaimSpec::call(1.0, 1.0).unwrap(),
            ClaimSpec::put(1.0, 1.0).unwrap(),
        ];
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for spec in &specs {
            for _ in 0..10 {
                let t = rng.gen_range(0.0..0.5);
                let s = rng.gen_range(0.8..1.25);
                let h = 1e-4 * s;
                let fd = (spec.agent_value(&m, t, s + h).value
                    - spec.agent_value(&m, t, s - h).value)
                    / (2.0 * h);
                let d = spec.agent_value(&m, t, s).delta;
                assert!(((fd - d) / d).abs() < 1e-6, "t={t} s={s} fd={fd} d={d}");
            }
        }
    }

    proptest! {
        #[test]
        fn call_bounds_and_monotonicity(t in 0.0f64..0.99, s in 0.2f64..3.0, ds in 1e-3f64..0.5) {
            let m = model(0.05, 0.2);
            let c = ClaimSpec::call(1.0, 1.0).unwrap();
            let a = c.agent_value(&m, t, s);
            let b = c.agent_value(&m, t, s + ds);
            prop_assert!((0.0..=1.0).contains(&a.delta));
            let lower = (s - (-0.05 * (1.0 - t)).exp()).max(0.0);
            prop_assert!(a.value >= lower - 1e-14);
            prop_assert!(b.value >= a.value);
            prop_assert!(b.delta >= a.delta - 1e-15);
        }
    }
}
