//! Market and credit parameters, the piecewise account rates and the
//! no-arbitrage rate checks.
//!
//! All rates are continuously compounded, per year. Every account grows
//! deterministically at a constant rate, so the only state-dependence of a
//! rate is the sign of the position it applies to.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter `{name}` must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("rate `{name}` must be non-negative, got {value}")]
    NegativeRate { name: &'static str, value: f64 },
    #[error("parameter `{name}` = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("parameter `{name}` must be strictly positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("bond return of {party} ({mu}) must exceed the discount rate r_D ({r_d})")]
    NoValuationMeasure { party: Party, mu: f64, r_d: f64 },
    #[error("model violates the necessary rate relations:\n{0}")]
    Violations(ValidationReport),
}

/// Hedger (`I`) or counterparty (`C`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Party {
    Investor,
    Counterparty,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Investor => write!(f, "I"),
            Party::Counterparty => write!(f, "C"),
        }
    }
}

/// Funding, repo, collateral and valuation discount rates.
///
/// `*_plus` applies to a positive position (lending cash, posting
/// collateral), `*_minus` to a negative one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSet {
    pub rf_plus: f64,
    pub rf_minus: f64,
    pub rr_plus: f64,
    pub rr_minus: f64,
    pub rc_plus: f64,
    pub rc_minus: f64,
    pub r_d: f64,
}

fn piecewise(position: f64, plus: f64, minus: f64) -> f64 {
    if position > 0.0 {
        plus
    } else if position < 0.0 {
        minus
    } else {
        0.0
    }
}

impl RateSet {
    /// Same rate on both sides of every account and `r_D = r_r`.
    pub fn symmetric(rf: f64, rr: f64, rc: f64) -> Self {
        RateSet {
            rf_plus: rf,
            rf_minus: rf,
            rr_plus: rr,
            rr_minus: rr,
            rc_plus: rc,
            rc_minus: rc,
            r_d: rr,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.rf_plus == self.rf_minus
            && self.rc_plus == self.rc_minus
            && self.rr_plus == self.rr_minus
            && self.r_d == self.rr_plus
    }

    /// Rate on `position` shares of the repo account.
    pub fn rate_repo(&self, position: f64) -> f64 {
        piecewise(position, self.rr_plus, self.rr_minus)
    }

    /// Rate on `position` shares of the funding account.
    pub fn rate_funding(&self, position: f64) -> f64 {
        piecewise(position, self.rf_plus, self.rf_minus)
    }

    /// Rate on the collateral account for collateral `C` (positive when the
    /// hedger is the provider).
    pub fn rate_collateral(&self, collateral: f64) -> f64 {
        piecewise(collateral, self.rc_plus, self.rc_minus)
    }

    fn named(&self) -> [(&'static str, f64); 7] {
        [
            ("rf_plus", self.rf_plus),
            ("rf_minus", self.rf_minus),
            ("rr_plus", self.rr_plus),
            ("rr_minus", self.rr_minus),
            ("rc_plus", self.rc_plus),
            ("rc_minus", self.rc_minus),
            ("r_d", self.r_d),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CreditParams {
    /// Return rate of the hedger's zero-recovery bond.
    pub mu_i: f64,
    /// Return rate of the counterparty's zero-recovery bond.
    pub mu_c: f64,
    /// Loss rate against the hedger.
    pub loss_i: f64,
    /// Loss rate against the counterparty.
    pub loss_c: f64,
    /// Collateralization level, fraction of the agent valuation posted.
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquityParams {
    pub s0: f64,
    pub sigma: f64,
    /// Physical drift. Not used by any valuation.
    pub mu_phys: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketModel {
    pub rates: RateSet,
    pub credit: CreditParams,
    pub equity: EquityParams,
}

/// Which family of conditions a check belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckGroup {
    /// Necessary for the underlying market to be free of hedger's arbitrage.
    Necessary,
    /// Sufficient condition on the underlying market.
    MarketArbitrageFree,
    /// Conditions under which the buyer/seller band is arbitrage free.
    ValuationBand,
}

impl fmt::Display for CheckGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CheckGroup::Necessary => "necessary",
            CheckGroup::MarketArbitrageFree => "market",
            CheckGroup::ValuationBand => "band",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub group: CheckGroup,
    pub relation: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub strict: bool,
    pub passed: bool,
}

impl Check {
    fn le(group: CheckGroup, relation: &'static str, lhs: f64, rhs: f64) -> Self {
        Check {
            group,
            relation,
            lhs,
            rhs,
            strict: false,
            passed: lhs <= rhs,
        }
    }

    fn lt(group: CheckGroup, relation: &'static str, lhs: f64, rhs: f64) -> Self {
        Check {
            group,
            relation,
            lhs,
            rhs,
            strict: true,
            passed: lhs < rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn passed_group(&self, group: CheckGroup) -> bool {
        self.checks
            .iter()
            .filter(|c| c.group == group)
            .all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let op = if c.strict { "<" } else { "<=" };
            writeln!(
                f,
                "{} [{}] {}: {} {} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.group,
                c.relation,
                c.lhs,
                op,
                c.rhs
            )?;
        }
        Ok(())
    }
}

fn check_finite(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonFinite { name, value })
    }
}

fn check_unit(name: &'static str, value: f64) -> Result<(), ModelError> {
    check_finite(name, value)?;
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ModelError::OutOfRange {
            name,
            value,
            lo: 0.0,
            hi: 1.0,
        })
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<(), ModelError> {
    check_finite(name, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(ModelError::NotPositive { name, value })
    }
}

impl MarketModel {
    /// Builds a model and rejects it unless the necessary rate relations hold.
    pub fn new(
        rates: RateSet,
        credit: CreditParams,
        equity: EquityParams,
    ) -> Result<Self, ModelError> {
        let model = Self::new_permissive(rates, credit, equity)?;
        let report = model.validate_necessary();
        if report.passed() {
            Ok(model)
        } else {
            Err(ModelError::Violations(report))
        }
    }

    /// Domain checks only (finiteness, signs, unit intervals, a valuation
    /// measure exists). Used for what-if runs that deliberately break the
    /// rate relations.
    pub fn new_permissive(
        rates: RateSet,
        credit: CreditParams,
        equity: EquityParams,
    ) -> Result<Self, ModelError> {
        for (name, value) in rates.named() {
            check_finite(name, value)?;
            if value < 0.0 {
                return Err(ModelError::NegativeRate { name, value });
            }
        }
        check_finite("mu_i", credit.mu_i)?;
        check_finite("mu_c", credit.mu_c)?;
        check_unit("loss_i", credit.loss_i)?;
        check_unit("loss_c", credit.loss_c)?;
        check_unit("alpha", credit.alpha)?;
        check_positive("s0", equity.s0)?;
        check_positive("sigma", equity.sigma)?;
        check_finite("mu_phys", equity.mu_phys)?;
        let model = MarketModel {
            rates,
            credit,
            equity,
        };
        model.risk_neutral_intensity(Party::Investor)?;
        model.risk_neutral_intensity(Party::Counterparty)?;
        Ok(model)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.credit.alpha = alpha;
        self
    }

    /// Default intensity under the valuation measure, `mu_i - r_D`.
    pub fn risk_neutral_intensity(&self, party: Party) -> Result<f64, ModelError> {
        let mu = match party {
            Party::Investor => self.credit.mu_i,
            Party::Counterparty => self.credit.mu_c,
        };
        let r_d = self.rates.r_d;
        if mu > r_d {
            Ok(mu - r_d)
        } else {
            Err(ModelError::NoValuationMeasure { party, mu, r_d })
        }
    }

    /// Intensities of `(I, C)`. Construction guarantees both are positive.
    pub fn intensities(&self) -> (f64, f64) {
        (
            self.credit.mu_i - self.rates.r_d,
            self.credit.mu_c - self.rates.r_d,
        )
    }

    pub fn validate_necessary(&self) -> ValidationReport {
        let r = &self.rates;
        let c = &self.credit;
        let g = CheckGroup::Necessary;
        ValidationReport {
            checks: vec![
                Check::le(g, "r_r^+ <= r_f^-", r.rr_plus, r.rf_minus),
                Check::le(g, "r_f^+ <= r_f^-", r.rf_plus, r.rf_minus),
                Check::lt(
                    g,
                    "max(r_f^+, r_D) < min(mu_I, mu_C)",
                    r.rf_plus.max(r.r_d),
                    c.mu_i.min(c.mu_c),
                ),
            ],
        }
    }

    /// Necessary relations plus the sufficient market condition and the
    /// band conditions on funding versus collateral rates and bond returns.
    pub fn validate_arbitrage_free(&self) -> ValidationReport {
        let r = &self.rates;
        let c = &self.credit;
        let mut report = self.validate_necessary();
        let m = CheckGroup::MarketArbitrageFree;
        let b = CheckGroup::ValuationBand;
        report.checks.extend([
            Check::le(m, "r_r^+ <= r_f^+", r.rr_plus, r.rf_plus),
            Check::le(m, "r_f^+ <= r_r^-", r.rf_plus, r.rr_minus),
            Check::le(
                b,
                "max(r_c^+, r_c^-) <= r_f^-",
                r.rc_plus.max(r.rc_minus),
                r.rf_minus,
            ),
            Check::le(b, "r_f^- <= min(mu_I, mu_C)", r.rf_minus, c.mu_i.min(c.mu_c)),
        ]);
        report
    }
}

/// Growth factor of a constant-rate account between two dates.
///
/// Panics if `to_t < from_t`.
pub fn accrual(rate: f64, from_t: f64, to_t: f64) -> f64 {
    assert!(to_t >= from_t, "accrual backwards in time: {from_t} -> {to_t}");
    (rate * (to_t - from_t)).exp()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Benchmark parameter set of the numerical study.
    pub fn benchmark() -> MarketModel {
        MarketModel::new(
            RateSet {
                rf_plus: 0.05,
                rf_minus: 0.08,
                rr_plus: 0.05,
                rr_minus: 0.05,
                rc_plus: 0.01,
                rc_minus: 0.01,
                r_d: 0.01,
            },
            CreditParams {
                mu_i: 0.21,
                mu_c: 0.16,
                loss_i: 0.5,
                loss_c: 0.5,
                alpha: 0.9,
            },
            EquityParams {
                s0: 1.0,
                sigma: 0.2,
                mu_phys: 0.05,
            },
        )
        .unwrap()
    }

    fn with_rates(f: impl FnOnce(&mut RateSet)) -> MarketModel {
        let mut m = benchmark();
        f(&mut m.rates);
        m
    }

    #[test]
    fn repo_rate_is_piecewise() {
        let mut r = benchmark().rates;
        assert_eq!(r.rate_repo(1.0), 0.05);
        assert_eq!(r.rate_repo(0.0), 0.0);
        r.rr_minus = 0.06;
        assert_eq!(r.rate_repo(-1.0), 0.06);
    }

    #[test]
    fn funding_rate_is_piecewise() {
        let r = benchmark().rates;
        assert_eq!(r.rate_funding(1.0), 0.05);
        assert_eq!(r.rate_funding(0.0), 0.0);
        assert_eq!(r.rate_funding(-1.0), 0.08);
    }

    #[test]
    fn collateral_rate_is_piecewise() {
        let mut r = benchmark().rates;
        assert_eq!(r.rate_collateral(1.0), 0.01);
        assert_eq!(r.rate_collateral(0.0), 0.0);
        r.rc_minus = 0.02;
        assert_eq!(r.rate_collateral(-1.0), 0.02);
    }

    #[test]
    fn intensities_under_valuation_measure() {
        let m = benchmark();
        assert_relative_eq!(
            m.risk_neutral_intensity(Party::Investor).unwrap(),
            0.20,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            m.risk_neutral_intensity(Party::Counterparty).unwrap(),
            0.15,
            epsilon = 1e-15
        );
        let mut bad = m;
        bad.credit.mu_c = bad.rates.r_d;
        assert!(matches!(
            bad.risk_neutral_intensity(Party::Counterparty),
            Err(ModelError::NoValuationMeasure { .. })
        ));
    }

    #[test]
    fn benchmark_passes_both_validators() {
        let m = benchmark();
        assert!(m.validate_necessary().passed());
        let full = m.validate_arbitrage_free();
        assert!(full.passed_group(CheckGroup::MarketArbitrageFree));
        assert!(full.passed_group(CheckGroup::ValuationBand));
    }

    #[test]
    fn funding_rates_inverted_fails_necessary() {
        let m = with_rates(|r| {
            r.rf_plus = 0.08;
            r.rf_minus = 0.05;
        });
        let report = m.validate_necessary();
        let failed: Vec<_> = report.failures().map(|c| c.relation).collect();
        assert!(failed.contains(&"r_f^+ <= r_f^-"), "{failed:?}");
    }

    #[test]
    fn discount_rate_at_bond_return_fails_strictly() {
        let mut m = benchmark();
        m.rates.r_d = m.credit.mu_i.min(m.credit.mu_c);
        let report = m.validate_necessary();
        let failed: Vec<_> = report.failures().map(|c| c.relation).collect();
        assert_eq!(failed, vec!["max(r_f^+, r_D) < min(mu_I, mu_C)"]);
    }

    #[test]
    fn market_chain_and_band_failures_are_distinguished() {
        let m = with_rates(|r| r.rf_plus = 0.04);
        let rep = m.validate_arbitrage_free();
        assert!(rep.passed_group(CheckGroup::Necessary));
        assert!(!rep.passed_group(CheckGroup::MarketArbitrageFree));
        assert!(rep.passed_group(CheckGroup::ValuationBand));

        let m = with_rates(|r| r.rc_plus = 0.10);
        let rep = m.validate_arbitrage_free();
        assert!(rep.passed_group(CheckGroup::MarketArbitrageFree));
        assert!(!rep.passed_group(CheckGroup::ValuationBand));
    }

    #[test]
    fn construction_rejects_bad_inputs() {
        let m = benchmark();
        let mut r = m.rates;
        r.rc_minus = -0.01;
        assert!(matches!(
            MarketModel::new(r, m.credit, m.equity),
            Err(ModelError::NegativeRate { .. })
        ));
        let mut c = m.credit;
        c.alpha = 1.5;
        assert!(matches!(
            MarketModel::new(m.rates, c, m.equity),
            Err(ModelError::OutOfRange { .. })
        ));
        let mut e = m.equity;
        e.sigma = 0.0;
        assert!(MarketModel::new(m.rates, m.credit, e).is_err());
        let mut r = m.rates;
        r.rf_plus = f64::NAN;
        assert!(matches!(
            MarketModel::new(r, m.credit, m.equity),
            Err(ModelError::NonFinite { .. })
        ));
        let mut r = m.rates;
        r.rf_plus = 0.09;
        assert!(matches!(
            MarketModel::new(r, m.credit, m.equity),
            Err(ModelError::Violations(_))
        ));
        assert!(MarketModel::new_permissive(r, m.credit, m.equity).is_ok());
    }

    #[test]
    fn symmetric_predicate() {
        assert!(RateSet::symmetric(0.08, 0.05, 0.01).is_symmetric());
        assert!(!benchmark().rates.is_symmetric());
        let mut r = RateSet::symmetric(0.08, 0.05, 0.01);
        r.r_d = 0.04;
        assert!(!r.is_symmetric());
    }

    #[test]
    fn accrual_values() {
        assert_relative_eq!(accrual(0.05, 0.0, 1.0), 1.051_271_096_376_024, epsilon = 1e-12);
        assert_eq!(accrual(0.3, 0.7, 0.7), 1.0);
        assert_eq!(accrual(0.0, 0.0, 5.0), 1.0);
    }

    #[test]
    #[should_panic]
    fn accrual_rejects_reversed_interval() {
        accrual(0.05, 1.0, 0.0);
    }

    proptest! {
        #[test]
        fn accrual_composes(r in 0.0f64..0.5, a in 0.0f64..5.0, d1 in 0.0f64..5.0, d2 in 0.0f64..5.0) {
            let b = a + d1;
            let c = b + d2;
            let lhs = accrual(r, a, b) * accrual(r, b, c);
            let rhs = accrual(r, a, c);
            prop_assert!(((lhs - rhs) / rhs).abs() < 1e-12);
        }

        #[test]
        fn rates_vanish_at_zero_and_have_one_breakpoint(x in -10.0f64..10.0) {
            let r = benchmark().rates;
            for f in [RateSet::rate_repo, RateSet::rate_funding, RateSet::rate_collateral] {
                prop_assert_eq!(f(&r, 0.0), 0.0);
                prop_assert_eq!(f(&r, x.abs() + 1e-9), f(&r, 1.0));
                prop_assert_eq!(f(&r, -x.abs() - 1e-9), f(&r, -1.0));
            }
        }

        #[test]
        fn arbitrage_free_implies_necessary(
            rfp in 0.0f64..0.2, rfm in 0.0f64..0.2, rrp in 0.0f64..0.2, rrm in 0.0f64..0.2,
            rcp in 0.0f64..0.2, rcm in 0.0f64..0.2, rd in 0.0f64..0.2,
            mui in 0.0f64..0.4, muc in 0.0f64..0.4,
        ) {
            let mut m = benchmark();
            m.rates = RateSet { rf_plus: rfp, rf_minus: rfm, rr_plus: rrp, rr_minus: rrm, rc_plus: rcp, rc_minus: rcm, r_d: rd };
            m.credit.mu_i = mui;
            m.credit.mu_c = muc;
            if m.validate_arbitrage_free().passed() {
                prop_assert!(m.validate_necessary().passed());
                prop_assert!(m.risk_neutral_intensity(Party::Investor).unwrap() > 0.0);
                prop_assert!(m.risk_neutral_intensity(Party::Counterparty).unwrap() > 0.0);
            }
        }
    }
}
