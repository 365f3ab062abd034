//! Crank–Nicolson solver for the agent price and the two XVA equations in
//! log-spot, marching backward from maturity.
//!
//! With `x = log S` and `τ = T − t` the equations read
//!
//! ```text
//! ŵ_τ = a ŵ_x + b ŵ_xx − r_D ŵ,              ŵ(0, x) = Φ(e^x)
//! u_τ = a u_x + b u_xx + g(u, σ(u_x + ŵ_x); ŵ),  u(0, x) = 0
//! ```
//!
//! with `a = r_D − σ²/2`, `b = σ²/2`. Both ends assume the solution is
//! linear in `S` (`u_SS = 0`, i.e. `u_xx = u_x`). The first
//! two steps are replaced by four implicit half-steps to damp the payoff
//! kink; the nonlinear source is resolved by Picard iteration against a
//! tridiagonal matrix factored once per step.

use thiserror::Error;

use crate::claim::ClaimSpec;
use crate::closed_form::{ClosedFormError, SymmetricModel};
use crate::drivers::{g_reduced, Regime, Side};
use crate::market::MarketModel;
use crate::strategy::StrategyRow;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdeError {
    #[error("grid needs at least 4 space points and 1 time step (got nx={nx}, nt={nt})")]
    GridTooSmall { nx: usize, nt: usize },
    #[error("grid bounds [{x_min}, {x_max}] must be finite, increasing and contain log S0 = {log_s0}")]
    BadDomain { x_min: f64, x_max: f64, log_s0: f64 },
    #[error("grid maturity {grid} differs from claim maturity {claim}")]
    MaturityMismatch { grid: f64, claim: f64 },
    #[error("Picard iteration stalled at t={t:.6} ({side}): residual {residual:e} at x={x:.4} after {iterations} iterations")]
    PicardDiverged {
        t: f64,
        side: &'static str,
        residual: f64,
        x: f64,
        iterations: usize,
    },
    #[error("non-finite value at t={t:.6}, x={x:.4} ({field})")]
    NonFinite { t: f64, x: f64, field: &'static str },
    #[error("query (t={t}, s={s}) lies outside the grid")]
    OutOfGrid { t: f64, s: f64 },
    #[error(transparent)]
    ClosedForm(#[from] ClosedFormError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub nt: usize,
    pub maturity: f64,
}

impl PdeGrid {
    pub fn new(
        x_min: f64,
        x_max: f64,
        nx: usize,
        nt: usize,
        maturity: f64,
        log_s0: f64,
    ) -> Result<Self, PdeError> {
        if nx < 4 || nt < 1 {
            return Err(PdeError::GridTooSmall { nx, nt });
        }
        let ok = x_min.is_finite() && x_max.is_finite() && x_min < log_s0 && log_s0 < x_max;
        if !ok || !(maturity.is_finite() && maturity > 0.0) {
            return Err(PdeError::BadDomain {
                x_min,
                x_max,
                log_s0,
            });
        }
        Ok(PdeGrid {
            x_min,
            x_max,
            nx,
            nt,
            maturity,
        })
    }

    /// Six standard deviations of log-spot around `log S0`, widened by the
    /// drift on the side it pushes.
    pub fn standard(
        model: &MarketModel,
        claim: &ClaimSpec,
        nx: usize,
        nt: usize,
    ) -> Result<Self, PdeError> {
        let sigma = model.equity.sigma;
        let t = claim.maturity;
        let drift = model.rates.r_d - 0.5 * sigma * sigma;
        let x0 = model.equity.s0.ln();
        let half = 6.0 * sigma * t.sqrt();
        Self::new(
            x0 - half + drift.min(0.0) * t,
            x0 + half + drift.max(0.0) * t,
            nx,
            nt,
            t,
            x0,
        )
    }

    /// [`Self::standard`] shifted by less than half a cell so that `log S0`
    /// falls on a node. Removes interpolation error at the spot and, for
    /// at-the-money claims, puts the payoff kink on a node, which makes the
    /// error decay cleanly at second order.
    pub fn aligned(
        model: &MarketModel,
        claim: &ClaimSpec,
        nx: usize,
        nt: usize,
    ) -> Result<Self, PdeError> {
        let g = Self::standard(model, claim, nx, nt)?;
        let x0 = model.equity.s0.ln();
        let dx = g.dx();
        let j = ((x0 - g.x_min) / dx).round().clamp(1.0, (nx - 2) as f64);
        let x_min = x0 - j * dx;
        Self::new(x_min, x_min + (nx - 1) as f64 * dx, nx, nt, g.maturity, x0)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.maturity / self.nt as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    /// Calendar time of level `k` (level 0 is today, level `nt` maturity).
    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub regime: Regime,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Number of leading Crank–Nicolson steps replaced by two implicit
    /// half-steps each.
    pub rannacher_steps: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            regime: Regime::WithDefaults,
            picard_tol: 1e-10,
            picard_max_iter: 50,
            rannacher_steps: 2,
        }
    }
}

impl SolverSettings {
    pub fn with_regime(regime: Regime) -> Self {
        SolverSettings {
            regime,
            ..Self::default()
        }
    }
}

/// Picard statistics of one sub-step for one side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardStats {
    pub t: f64,
    pub iterations: usize,
    pub residual: f64,
    /// Residuals shrank at every iterate after the first.
    pub monotone: bool,
}

#[derive(Debug, Clone)]
pub struct PdeSolution {
    pub grid: PdeGrid,
    pub model: MarketModel,
    pub claim: ClaimSpec,
    pub settings: SolverSettings,
    /// `what[k][i]` at time level `k`, node `i`.
    pub what: Vec<Vec<f64>>,
    pub u_seller: Vec<Vec<f64>>,
    pub u_buyer: Vec<Vec<f64>>,
    pub picard_seller: Vec<PicardStats>,
    pub picard_buyer: Vec<PicardStats>,
}

/// Three-point stencil of `a ∂x + b ∂xx + c`.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    lo: f64,
    di: f64,
    up: f64,
}

impl Stencil {
    fn new(a: f64, b: f64, c: f64, dx: f64) -> Self {
        Stencil {
            lo: b / (dx * dx) - a / (2.0 * dx),
            di: -2.0 * b / (dx * dx) + c,
            up: b / (dx * dx) + a / (2.0 * dx),
        }
    }

    /// `(L u)_i` at interior nodes, zero at the two ends.
    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for i in 1..n - 1 {
            out[i] = self.lo * u[i - 1] + self.di * u[i] + self.up * u[i + 1];
        }
    }
}

/// Boundary closure: the solution is linear in `S` next to each end, i.e.
/// `u_xx = u_x` discretized at the first and last interior nodes. Gives
/// `u_0 = p u_1 + q u_2` and `u_{n−1} = p' u_{n−2} + q' u_{n−3}`.
#[derive(Debug, Clone, Copy)]
struct Closure {
    p_lo: f64,
    q_lo: f64,
    p_hi: f64,
    q_hi: f64,
}

impl Closure {
    fn new(dx: f64) -> Self {
        let h = 0.5 * dx;
        Closure {
            p_lo: 2.0 / (1.0 + h),
            q_lo: -(1.0 - h) / (1.0 + h),
            p_hi: 2.0 / (1.0 - h),
            q_hi: -(1.0 + h) / (1.0 - h),
        }
    }

    fn fill(&self, u: &mut [f64]) {
        let n = u.len();
        u[0] = self.p_lo * u[1] + self.q_lo * u[2];
        u[n - 1] = self.p_hi * u[n - 2] + self.q_hi * u[n - 3];
    }
}

/// LU factors of `I − c L` on the interior nodes, with the boundary
/// closure folded into the first and last rows.
struct Factored {
    lower: Vec<f64>,
    inv_diag: Vec<f64>,
    upper: Vec<f64>,
    closure: Closure,
}

impl Factored {
    fn new(st: &Stencil, closure: Closure, c: f64, n: usize) -> Self {
        let m = n - 2;
        let mut lower = vec![-c * st.lo; m];
        let mut diag = vec![1.0 - c * st.di; m];
        let mut upper = vec![-c * st.up; m];
        diag[0] -= c * st.lo * closure.p_lo;
        upper[0] -= c * st.lo * closure.q_lo;
        diag[m - 1] -= c * st.up * closure.p_hi;
        lower[m - 1] -= c * st.up * closure.q_hi;
        // Thomas elimination, stored for repeated solves.
        let mut inv_diag = vec![0.0; m];
        inv_diag[0] = 1.0 / diag[0];
        for j in 1..m {
            let l = lower[j] * inv_diag[j - 1];
            lower[j] = l;
            inv_diag[j] = 1.0 / (diag[j] - l * upper[j - 1]);
        }
        Factored {
            lower,
            inv_diag,
            upper,
            closure,
        }
    }

    /// Solves for the interior from `rhs[1..n−1]`, then fills both ends.
    fn solve(&self, rhs: &[f64], u: &mut [f64]) {
        let n = u.len();
        let m = n - 2;
        let y = &mut u[1..n - 1];
        y[0] = rhs[1];
        for j in 1..m {
            y[j] = rhs[j + 1] - self.lower[j] * y[j - 1];
        }
        y[m - 1] *= self.inv_diag[m - 1];
        for j in (0..m - 1).rev() {
            y[j] = (y[j] - self.upper[j] * y[j + 1]) * self.inv_diag[j];
        }
        self.closure.fill(u);
    }
}

/// Inputs the XVA source needs at one time level.
struct Level<'a> {
    t: f64,
    what: &'a [f64],
    /// `ŵ_x = S Δ̂`
    what_x: &'a [f64],
}

struct Source<'a> {
    model: &'a MarketModel,
    regime: Regime,
    side: Side,
    sigma: f64,
    inv_2dx: f64,
}

impl Source<'_> {
    fn eval(&self, lv: &Level, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for i in 1..n - 1 {
            let u_x = (u[i + 1] - u[i - 1]) * self.inv_2dx;
            let z = self.sigma * (u_x + lv.what_x[i]);
            out[i] = g_reduced(self.model, self.side, self.regime, lv.t, u[i], z, lv.what[i]);
        }
    }
}

fn check_finite(v: &[f64], grid: &PdeGrid, t: f64, field: &'static str) -> Result<(), PdeError> {
    match v.iter().position(|x| !x.is_finite()) {
        None => Ok(()),
        Some(i) => Err(PdeError::NonFinite {
            t,
            x: grid.x(i),
            field,
        }),
    }
}

struct SideState<'a> {
    src: Source<'a>,
    u: Vec<f64>,
    fields: Vec<Vec<f64>>,
    stats: Vec<PicardStats>,
}

pub fn solve(model: &MarketModel, claim: &ClaimSpec, grid: &PdeGrid) -> Result<PdeSolution, PdeError> {
    solve_with(model, claim, grid, &SolverSettings::default())
}

pub fn solve_with(
    model: &MarketModel,
    claim: &ClaimSpec,
    grid: &PdeGrid,
    settings: &SolverSettings,
) -> Result<PdeSolution, PdeError> {
    if (grid.maturity - claim.maturity).abs() > 1e-12 * claim.maturity {
        return Err(PdeError::MaturityMismatch {
            grid: grid.maturity,
            claim: claim.maturity,
        });
    }
    let n = grid.nx;
    let dx = grid.dx();
    let dt = grid.dt();
    let sigma = model.equity.sigma;
    let r_d = model.rates.r_d;
    let a = r_d - 0.5 * sigma * sigma;
    let b = 0.5 * sigma * sigma;
    let op_u = Stencil::new(a, b, 0.0, dx);
    let op_w = Stencil::new(a, b, -r_d, dx);
    let closure = Closure::new(dx);
    let spots: Vec<f64> = (0..n).map(|i| grid.x(i).exp()).collect();
    let maturity = claim.maturity;

    let what_x_at = |t: f64, out: &mut Vec<f64>| {
        out.clear();
        out.extend(spots.iter().map(|&s| s * claim.agent_value(model, t, s).delta));
    };

    // time levels stored from maturity backward, reversed at the end
    let mut w: Vec<f64> = spots.iter().map(|&s| claim.payoff(s)).collect();
    let mut w_fields = vec![w.clone()];
    let mut sides: Vec<SideState> = Side::BOTH
        .iter()
        .map(|&side| SideState {
            src: Source {
                model,
                regime: settings.regime,
                side,
                sigma,
                inv_2dx: 0.5 / dx,
            },
            u: vec![0.0; n],
            fields: vec![vec![0.0; n]],
            stats: Vec::with_capacity(grid.nt + settings.rannacher_steps),
        })
        .collect();

    let mut plan: Vec<(f64, f64, bool)> = Vec::with_capacity(grid.nt + settings.rannacher_steps);
    for k in 0..grid.nt {
        if k < settings.rannacher_steps {
            plan.push((0.5 * dt, 1.0, false));
            plan.push((0.5 * dt, 1.0, true));
        } else {
            plan.push((dt, 0.5, true));
        }
    }

    let mut tau = 0.0;
    let mut wx_old = Vec::with_capacity(n);
    let mut wx_new = Vec::with_capacity(n);
    what_x_at(maturity, &mut wx_old);
    let mut lw = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut rhs0 = vec![0.0; n];
    let mut g_buf = vec![0.0; n];
    let mut lu = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut cache: Option<(f64, Factored, Factored)> = None;

    for (h, theta, store) in plan {
        let t_old = maturity - tau;
        let tau_new = tau + h;
        let t_new = (maturity - tau_new).max(0.0);
        let c = theta * h;
        let (fw, fu) = match cache.take() {
            Some((cc, fw, fu)) if cc == c => (fw, fu),
            _ => (
                Factored::new(&op_w, closure, c, n),
                Factored::new(&op_u, closure, c, n),
            ),
        };

        // agent price: linear, one solve
        op_w.apply(&w, &mut lw);
        for i in 0..n {
            rhs[i] = w[i] + (1.0 - theta) * h * lw[i];
        }
        let w_old = std::mem::replace(&mut w, vec![0.0; n]);
        fw.solve(&rhs, &mut w);
        check_finite(&w, grid, t_new, "agent price")?;
        what_x_at(t_new, &mut wx_new);

        let old = Level {
            t: t_old,
            what: &w_old,
            what_x: &wx_old,
        };
        let new = Level {
            t: t_new,
            what: &w,
            what_x: &wx_new,
        };
        for st in sides.iter_mut() {
            op_u.apply(&st.u, &mut lu);
            st.src.eval(&old, &st.u, &mut g_buf);
            for i in 0..n {
                rhs0[i] = st.u[i] + (1.0 - theta) * h * (lu[i] + g_buf[i]);
            }
            let mut guess = st.u.clone();
            let mut iterations = 0;
            let mut prev_res = f64::INFINITY;
            let mut monotone = true;
            loop {
                iterations += 1;
                st.src.eval(&new, &guess, &mut g_buf);
                for i in 0..n {
                    rhs[i] = rhs0[i] + c * g_buf[i];
                }
                fu.solve(&rhs, &mut next);
                let (worst, res) = next
                    .iter()
                    .zip(&guess)
                    .map(|(p, q)| (p - q).abs())
                    .enumerate()
                    .fold((0, 0.0f64), |acc, (i, d)| if d > acc.1 || d.is_nan() { (i, d) } else { acc });
                std::mem::swap(&mut guess, &mut next);
                if !res.is_finite() {
                    return Err(PdeError::NonFinite {
                        t: t_new,
                        x: grid.x(worst),
                        field: st.src.side.name(),
                    });
                }
                if iterations > 1 && res > prev_res {
                    monotone = false;
                }
                prev_res = res;
                if res <= settings.picard_tol {
                    break;
                }
                if iterations >= settings.picard_max_iter {
                    return Err(PdeError::PicardDiverged {
                        t: t_new,
                        side: st.src.side.name(),
                        residual: res,
                        x: grid.x(worst),
                        iterations,
                    });
                }
            }
            st.u = guess;
            st.stats.push(PicardStats {
                t: t_new,
                iterations,
                residual: prev_res,
                monotone,
            });
            if store {
                st.fields.push(st.u.clone());
            }
        }
        if store {
            w_fields.push(w.clone());
        }
        std::mem::swap(&mut wx_old, &mut wx_new);
        cache = Some((c, fw, fu));
        tau = tau_new;
    }

    w_fields.reverse();
    let mut it = sides.into_iter();
    let mut seller = it.next().expect("seller state");
    let mut buyer = it.next().expect("buyer state");
    seller.fields.reverse();
    buyer.fields.reverse();
    // the last level is exactly today
    debug_assert_eq!(w_fields.len(), grid.nt + 1);
    Ok(PdeSolution {
        grid: *grid,
        model: *model,
        claim: claim.clone(),
        settings: *settings,
        what: w_fields,
        u_seller: seller.fields,
        u_buyer: buyer.fields,
        picard_seller: seller.stats,
        picard_buyer: buyer.stats,
    })
}

/// Position of `v` on a uniform axis, snapped to a node when within `1e-9`
/// cells. Returns the lower index and the weight of the upper neighbour.
fn locate(v: f64, lo: f64, step: f64, cells: usize) -> Option<(usize, f64)> {
    let r = (v - lo) / step;
    let snapped = if (r - r.round()).abs() < 1e-9 { r.round() } else { r };
    if !(0.0..=cells as f64).contains(&snapped) {
        return None;
    }
    let i = (snapped.floor() as usize).min(cells - 1);
    Some((i, snapped - i as f64))
}

impl PdeSolution {
    pub fn field(&self, side: Side) -> &[Vec<f64>] {
        match side {
            Side::Seller => &self.u_seller,
            Side::Buyer => &self.u_buyer,
        }
    }

    fn interp(&self, f: &[Vec<f64>], t: f64, s: f64) -> Result<f64, PdeError> {
        let g = &self.grid;
        let (k, wt) = locate(t, 0.0, g.dt(), g.nt).ok_or(PdeError::OutOfGrid { t, s })?;
        let (i, wx) = locate(s.ln(), g.x_min, g.dx(), g.nx - 1).ok_or(PdeError::OutOfGrid { t, s })?;
        let at = |kk: usize| {
            let row = &f[kk];
            if wx == 0.0 {
                row[i]
            } else {
                (1.0 - wx) * row[i] + wx * row[i + 1]
            }
        };
        Ok(if wt == 0.0 {
            at(k)
        } else {
            (1.0 - wt) * at(k) + wt * at(k + 1)
        })
    }

    /// XVA at `(t, s)` by bilinear interpolation in `(t, log s)`.
    pub fn xva_at(&self, t: f64, s: f64, side: Side) -> Result<f64, PdeError> {
        self.interp(self.field(side), t, s)
    }

    /// Agent price from the grid.
    pub fn what_at(&self, t: f64, s: f64) -> Result<f64, PdeError> {
        self.interp(&self.what, t, s)
    }

    /// `∂u/∂x` at node `(k, i)`; one-sided at the two ends.
    fn u_x(&self, side: Side, k: usize, i: usize) -> (f64, bool) {
        let row = &self.field(side)[k];
        let dx = self.grid.dx();
        let n = self.grid.nx;
        if i == 0 {
            ((row[1] - row[0]) / dx, true)
        } else if i == n - 1 {
            ((row[n - 1] - row[n - 2]) / dx, true)
        } else {
            ((row[i + 1] - row[i - 1]) / (2.0 * dx), false)
        }
    }

    /// Replicating portfolio at grid node `(k, i)`. The stock position is
    /// `∂u/∂S = u_x / S`.
    pub fn strategies_at_node(&self, side: Side, k: usize, i: usize) -> StrategyRow {
        let s = self.grid.x(i).exp();
        let (ux, boundary) = self.u_x(side, k, i);
        StrategyRow::assemble(
            &self.model,
            side,
            self.settings.regime,
            self.claim.maturity,
            self.grid.t(k),
            s,
            self.field(side)[k][i],
            ux / s,
            self.what[k][i],
            boundary,
        )
    }

    /// Replicating portfolio at an arbitrary state, interpolating `u`,
    /// `u_x` and `ŵ` bilinearly.
    pub fn strategies(&self, t: f64, s: f64, side: Side) -> Result<StrategyRow, PdeError> {
        let g = &self.grid;
        let (k, wt) = locate(t, 0.0, g.dt(), g.nt).ok_or(PdeError::OutOfGrid { t, s })?;
        let (i, wx) = locate(s.ln(), g.x_min, g.dx(), g.nx - 1).ok_or(PdeError::OutOfGrid { t, s })?;
        let mut ux = 0.0;
        let mut boundary = false;
        for (kk, a) in [(k, 1.0 - wt), ((k + 1).min(g.nt), wt)] {
            for (ii, bw) in [(i, 1.0 - wx), ((i + 1).min(g.nx - 1), wx)] {
                if a * bw == 0.0 {
                    continue;
                }
                let (d, edge) = self.u_x(side, kk, ii);
                ux += a * bw * d;
                boundary |= edge;
            }
        }
        Ok(StrategyRow::assemble(
            &self.model,
            side,
            self.settings.regime,
            self.claim.maturity,
            t,
            s,
            self.xva_at(t, s, side)?,
            ux / s,
            self.what_at(t, s)?,
            boundary,
        ))
    }

    /// Total Picard iterations over the whole solve, per side.
    pub fn picard_iterations(&self) -> (usize, usize) {
        let sum = |v: &[PicardStats]| v.iter().map(|p| p.iterations).sum();
        (sum(&self.picard_seller), sum(&self.picard_buyer))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub nx: usize,
    pub nt: usize,
    pub value: f64,
    pub reference: f64,
    pub error: f64,
    /// `log2` of the error ratio to the previous row.
    pub order: Option<f64>,
}

/// Seller XVA at `(0, S0)` on successive spot-aligned grids against the
/// closed form of the settings' regime. Requires symmetric rates.
pub fn convergence_study(
    model: &MarketModel,
    claim: &ClaimSpec,
    settings: &SolverSettings,
    grids: &[(usize, usize)],
) -> Result<Vec<ConvergenceRow>, PdeError> {
    let cf = SymmetricModel::new(model, claim)?;
    let s0 = model.equity.s0;
    let reference = cf.xva(Side::Seller, settings.regime, 0.0, s0)?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(grids.len());
    for &(nx, nt) in grids {
        let grid = PdeGrid::aligned(model, claim, nx, nt)?;
        let sol = solve_with(model, claim, &grid, settings)?;
        let value = sol.xva_at(0.0, s0, Side::Seller)?;
        let error = (value - reference).abs();
        let order = rows
            .last()
            .filter(|p| p.error > 0.0 && error > 0.0)
            .map(|p| (p.error / error).log2());
        rows.push(ConvergenceRow {
            nx,
            nt,
            value,
            reference,
            error,
            order,
        });
    }
    Ok(rows)
}
