//! Cross-engine checks: PDE and lattice against the closed forms where the
//! rates are symmetric, and against each other where they are not.

use rand::{rngs::StdRng, Rng, SeedableRng};
use xva_core::lattice::{self, Level};
use xva_core::pde::{self, PdeGrid, SolverSettings};
use xva_core::{
    ClaimSpec, CreditParams, EquityParams, MarketModel, RateSet, Regime, Side, SymmetricModel,
};

fn benchmark() -> MarketModel {
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
            mu_phys: 0.0,
        },
    )
    .unwrap()
}

fn symmetric(rf: f64, mu_i: f64, mu_c: f64, alpha: f64) -> MarketModel {
    let mut m = benchmark();
    m.rates = RateSet::symmetric(rf, 0.05, 0.01);
    m.credit.mu_i = mu_i;
    m.credit.mu_c = mu_c;
    m.credit.alpha = alpha;
    m
}

fn atm() -> ClaimSpec {
    ClaimSpec::call(1.0, 1.0).unwrap()
}

fn solve(m: &MarketModel, c: &ClaimSpec, regime: Regime, nx: usize, nt: usize) -> pde::PdeSolution {
    let g = PdeGrid::aligned(m, c, nx, nt).unwrap();
    pde::solve_with(m, c, &g, &SolverSettings::with_regime(regime)).unwrap()
}

#[test]
fn pde_matches_closed_form_without_defaults() {
    let c = atm();
    for alpha in [0.0, 0.5, 1.0] {
        let m = symmetric(0.08, 0.21, 0.16, alpha);
        let cf = SymmetricModel::new(&m, &c).unwrap();
        let sol = solve(&m, &c, Regime::DefaultFree, 200, 100);
        let exact = cf.xva(Side::Seller, Regime::DefaultFree, 0.0, 1.0).unwrap();
        for side in Side::BOTH {
            let got = sol.xva_at(0.0, 1.0, side).unwrap();
            assert!((got - exact).abs() < 2e-6, "alpha {alpha} {side:?}: {got} vs {exact}");
        }
    }
}

#[test]
fn pde_matches_closed_form_with_defaults() {
    let c = atm();
    for rf in [0.05, 0.1, 0.15] {
        for alpha in [0.0, 0.75] {
            let m = MarketModel::new_permissive(
                RateSet::symmetric(rf, 0.05, 0.01),
                CreditParams {
                    mu_i: 0.16,
                    mu_c: 0.21,
                    loss_i: 0.5,
                    loss_c: 0.5,
                    alpha,
                },
                benchmark().equity,
            )
            .unwrap();
            let cf = SymmetricModel::new(&m, &c).unwrap();
            let sol = solve(&m, &c, Regime::WithDefaults, 200, 100);
            for side in Side::BOTH {
                let exact = cf.xva(side, Regime::WithDefaults, 0.0, 1.0).unwrap();
                let got = sol.xva_at(0.0, 1.0, side).unwrap();
                assert!((got - exact).abs() < 5e-6, "rf {rf} alpha {alpha} {side:?}: {got} vs {exact}");
            }
        }
    }
}

#[test]
fn lattice_matches_closed_form() {
    let c = atm();
    let m = symmetric(0.1, 0.2, 0.25, 0.25);
    let cf = SymmetricModel::new(&m, &c).unwrap();
    for regime in [Regime::WithDefaults, Regime::DefaultFree] {
        for side in Side::BOTH {
            let exact = cf.xva(side, regime, 0.0, 1.0).unwrap();
            let got = lattice::root_value(&m, &c, 1000, Level::Xva, side, regime).unwrap();
            assert!((got - exact).abs() < 1e-5, "{regime:?} {side:?}: {got} vs {exact}");
        }
    }
}

#[test]
fn pde_and_lattice_agree_at_the_benchmark() {
    let m = benchmark();
    let c = atm();
    let sol = solve(&m, &c, Regime::WithDefaults, 200, 100);
    let (buyer, seller) = lattice::band(&m, &c, 1000, Regime::WithDefaults).unwrap();
    let pb = sol.xva_at(0.0, 1.0, Side::Buyer).unwrap();
    let ps = sol.xva_at(0.0, 1.0, Side::Seller).unwrap();
    assert!((pb - buyer).abs() < 5e-5, "buyer {pb} vs {buyer}");
    assert!((ps - seller).abs() < 5e-5, "seller {ps} vs {seller}");
}

#[test]
fn pde_and_lattice_agree_for_a_put_with_asymmetric_repo() {
    let mut m = benchmark();
    m.rates.rr_plus = 0.02;
    m.rates.rr_minus = 0.07;
    let c = ClaimSpec::put(1.1, 1.0).unwrap();
    let sol = solve(&m, &c, Regime::WithDefaults, 200, 100);
    for side in Side::BOTH {
        let l = lattice::root_value(&m, &c, 1000, Level::Xva, side, Regime::WithDefaults).unwrap();
        let p = sol.xva_at(0.0, 1.0, side).unwrap();
        assert!((p - l).abs() < 5e-5, "{side:?}: {p} vs {l}");
    }
}

#[test]
fn pde_strategies_match_closed_form() {
    let c = atm();
    let m = symmetric(0.1, 0.16, 0.21, 0.25);
    let cf = SymmetricModel::new(&m, &c).unwrap();
    let sol = solve(&m, &c, Regime::WithDefaults, 300, 150);
    for side in Side::BOTH {
        for (t, s) in [(0.0, 1.0), (0.5, 0.9), (0.5, 1.2)] {
            let a = sol.strategies(t, s, side).unwrap();
            let b = cf.strategies(side, Regime::WithDefaults, t, s).unwrap();
            for (name, x, y) in [("xi", a.xi, b.xi), ("xi_i", a.xi_i, b.xi_i), ("xi_c", a.xi_c, b.xi_c), ("xi_f", a.xi_f, b.xi_f)] {
                assert!((x - y).abs() < 5e-4, "{side:?} ({t}, {s}) {name}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn wealth_identity_at_random_interior_nodes() {
    let m = benchmark();
    let c = atm();
    let sol = solve(&m, &c, Regime::WithDefaults, 120, 60);
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..100 {
        let k = rng.gen_range(0..sol.grid.nt);
        let i = rng.gen_range(1..sol.grid.nx - 1);
        for side in Side::BOTH {
            let row = sol.strategies_at_node(side, k, i);
            assert!(!row.boundary);
            assert!((row.wealth() - row.xva).abs() < 1e-8, "node ({k}, {i})");
        }
    }
}

#[test]
fn buyer_field_is_the_reflected_seller_field() {
    let m = benchmark();
    let c = atm();
    let sol = solve(&m, &c, Regime::WithDefaults, 80, 40);
    let neg = solve(&m, &c.negated(), Regime::WithDefaults, 80, 40);
    for (a, b) in sol.u_buyer.iter().flatten().zip(neg.u_seller.iter().flatten()) {
        assert!((a + b).abs() < 1e-12, "{a} vs {}", -b);
    }
}

#[test]
fn default_free_symmetric_band_collapses() {
    let m = symmetric(0.12, 0.21, 0.16, 0.4);
    let sol = solve(&m, &atm(), Regime::DefaultFree, 100, 50);
    for (a, b) in sol.u_buyer.iter().flatten().zip(sol.u_seller.iter().flatten()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn picard_converges_quickly_everywhere() {
    let m = benchmark();
    let sol = solve(&m, &atm(), Regime::WithDefaults, 150, 75);
    for stats in [&sol.picard_seller, &sol.picard_buyer] {
        assert!(!stats.is_empty());
        for p in stats.iter() {
            assert!(p.residual <= 1e-10, "t={} residual {}", p.t, p.residual);
            assert!(p.iterations <= 15, "t={} took {} iterations", p.t, p.iterations);
        }
        let monotone = stats.iter().filter(|p| p.monotone).count();
        assert!(monotone * 10 >= stats.len() * 9, "{monotone} of {} monotone", stats.len());
    }
}

#[test]
fn grid_agent_price_tracks_black_scholes_at_time_zero() {
    let m = benchmark();
    let c = atm();
    let sol = solve(&m, &c, Regime::WithDefaults, 200, 100);
    let mut worst: f64 = 0.0;
    for i in 0..sol.grid.nx {
        let s = sol.grid.x(i).exp();
        if !(0.5..=2.0).contains(&s) {
            continue;
        }
        worst = worst.max((sol.what[0][i] - c.agent_value(&m, 0.0, s).value).abs());
    }
    assert!(worst < 1e-4, "max error {worst}");
}

#[test]
fn pde_error_decays_at_second_order() {
    let m = symmetric(0.08, 0.21, 0.16, 0.5);
    let rows = pde::convergence_study(
        &m,
        &atm(),
        &SolverSettings::with_regime(Regime::WithDefaults),
        &[(50, 25), (100, 50), (200, 100)],
    )
    .unwrap();
    for r in &rows[1..] {
        let order = r.order.unwrap();
        assert!(order > 1.8, "order {order} at nx={}", r.nx);
    }
}
