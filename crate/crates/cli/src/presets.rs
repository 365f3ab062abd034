//! Built-in figure and table runs of the numerical study. Each preset is a
//! base config, an x axis and a list of series; nothing else varies.

use xva_core::{Side, SymmetricModel};

use crate::config::{RegimeKind, RunConfig};
use crate::engine::{self, Engine, EngineKind, PointValue, Resolution};
use crate::output::{Cell, Table};
use crate::sweep::{self, Param, Series, SweepAxis};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FigureId {
    /// XVA and stock shares vs r_f per α, symmetric rates, no defaults.
    Fig4,
    /// Funding / DVA / CVA shares of the price vs r_f, two credit scenarios.
    Fig5,
    /// XVA and shares vs r_f per α, moderate credit risk.
    Fig6,
    /// As fig6 with μ_I = μ_C = 0.51.
    Fig7,
    /// Band and shares vs α per r_f⁻, benchmark.
    Fig8,
    /// Band and shares vs r_r⁻ per r_r⁺, benchmark.
    Fig9,
    /// Band and seller shares vs α per μ_C, benchmark.
    FigAlphahc,
    /// Seller XVA and shares vs μ_C per α, benchmark.
    FigHcalpha,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Columns {
    Band,
    Decomposition,
}

#[derive(Debug, Clone)]
pub struct FigurePreset {
    pub id: FigureId,
    pub base: RunConfig,
    pub axis: SweepAxis,
    pub series: Vec<Series>,
    pub engine: Engine,
    pub columns: Columns,
}

const ALPHAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

fn axis(param: Param, from: f64, to: f64, points: usize) -> SweepAxis {
    SweepAxis::new(param, from, to, points).expect("preset axes are valid")
}

fn per_alpha() -> Vec<Series> {
    ALPHAS.iter().map(|&a| Series::single(Param::Alpha, a)).collect()
}

/// Symmetric `r_r = r_D = 0.05`, `r_c = 0.01`, `σ = 0.2`, ATM call, `T = 1`.
fn piterbarg(mu_i: f64, mu_c: f64) -> RunConfig {
    RunConfig {
        mu_i,
        mu_c,
        loss_i: 0.5,
        loss_c: 0.5,
        ..RunConfig::symmetric(0.08, 0.05, 0.01)
    }
}

impl FigureId {
    pub fn name(self) -> &'static str {
        match self {
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::Fig6 => "fig6",
            FigureId::Fig7 => "fig7",
            FigureId::Fig8 => "fig8",
            FigureId::Fig9 => "fig9",
            FigureId::FigAlphahc => "fig_alphahc",
            FigureId::FigHcalpha => "fig_hcalpha",
        }
    }

    pub fn preset(self) -> FigurePreset {
        let rf_axis = axis(Param::Rf, 0.05, 0.15, 21);
        let (base, axis, series, engine, columns) = match self {
            FigureId::Fig4 => {
                let base = RunConfig {
                    regime: RegimeKind::DefaultFree,
                    ..piterbarg(0.21, 0.16)
                };
                (base, rf_axis, per_alpha(), Engine::Closed, Columns::Band)
            }
            FigureId::Fig5 => {
                let base = RunConfig {
                    alpha: 0.25,
                    ..piterbarg(0.2, 0.25)
                };
                let series = vec![
                    Series {
                        label: "left".into(),
                        set: vec![(Param::MuI, 0.2), (Param::MuC, 0.25)],
                    },
                    Series {
                        label: "right".into(),
                        set: vec![(Param::MuI, 0.55), (Param::MuC, 0.55)],
                    },
                ];
                (base, rf_axis, series, Engine::Closed, Columns::Decomposition)
            }
            FigureId::Fig6 => (piterbarg(0.16, 0.21), rf_axis, per_alpha(), Engine::Closed, Columns::Band),
            FigureId::Fig7 => (piterbarg(0.51, 0.51), rf_axis, per_alpha(), Engine::Closed, Columns::Band),
            FigureId::Fig8 => (
                RunConfig::benchmark(),
                axis(Param::Alpha, 0.0, 1.0, 21),
                vec![Series::single(Param::RfMinus, 0.08), Series::single(Param::RfMinus, 0.15)],
                Engine::Pde,
                Columns::Band,
            ),
            FigureId::Fig9 => (
                RunConfig::benchmark(),
                axis(Param::RrMinus, 0.05, 0.10, 11),
                [0.01, 0.03, 0.05].iter().map(|&r| Series::single(Param::RrPlus, r)).collect(),
                Engine::Pde,
                Columns::Band,
            ),
            FigureId::FigAlphahc => (
                RunConfig::benchmark(),
                axis(Param::Alpha, 0.0, 1.0, 21),
                [0.16, 0.21, 0.26].iter().map(|&m| Series::single(Param::MuC, m)).collect(),
                Engine::Pde,
                Columns::Band,
            ),
            FigureId::FigHcalpha => (
                RunConfig::benchmark(),
                axis(Param::MuC, 0.10, 0.40, 16),
                per_alpha(),
                Engine::Pde,
                Columns::Band,
            ),
        };
        FigurePreset {
            id: self,
            base,
            axis,
            series,
            engine,
            columns,
        }
    }
}

fn band_header(x: &str) -> Vec<String> {
    [
        x,
        "series",
        "xva_seller",
        "xva_buyer",
        "width",
        "xi_stock_seller",
        "xi_I_seller",
        "xi_C_seller",
        "xi_stock_buyer",
        "xi_I_buyer",
        "xi_C_buyer",
        "funding_dollars_seller",
        "funding_dollars_buyer",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

impl FigurePreset {
    /// Overrides the preset's engine. `All` is refused: a figure is one
    /// engine's data.
    pub fn with_engine(mut self, kind: EngineKind) -> Result<Self, CliError> {
        self.engine = match kind {
            EngineKind::Closed => Engine::Closed,
            EngineKind::Pde => Engine::Pde,
            EngineKind::Lattice => Engine::Lattice,
            EngineKind::All => return Err(CliError::Incompatible("a figure is produced by a single engine".into())),
        };
        if self.columns == Columns::Decomposition && self.engine != Engine::Closed {
            return Err(CliError::Incompatible(format!(
                "{} is a closed-form decomposition",
                self.id.name()
            )));
        }
        Ok(self)
    }

    pub fn run(&self, res: Resolution, allow_violations: bool) -> Result<Table, CliError> {
        let points = sweep::expand(&self.base, &self.axis, &self.series);
        let x = self.axis.param.name();
        match self.columns {
            Columns::Band => {
                let rows = sweep::run(points, |p| {
                    let m = p.config.model(allow_violations)?;
                    let c = p.config.claim()?;
                    engine::evaluate(self.engine, &m, &c, p.config.regime(), res)
                })?;
                let mut t = Table::new(band_header(x));
                for (si, xv, v) in rows {
                    t.push(band_row(xv, &self.series[si].label, &v));
                }
                Ok(t)
            }
            Columns::Decomposition => {
                let rows = sweep::run(points, |p| {
                    let m = p.config.model(allow_violations)?;
                    let c = p.config.claim()?;
                    let cf = SymmetricModel::new(&m, &c)?;
                    let vhat = c.agent_value(&m, 0.0, m.equity.s0).value;
                    Ok((vhat, cf.xva_with_defaults(Side::Seller, 0.0, vhat)?))
                })?;
                let mut t = Table::new([x, "series", "vhat", "funding_pct", "dva_pct", "cva_pct", "xva_pct"]);
                for (si, xv, (vhat, d)) in rows {
                    let pct = |v: f64| 100.0 * v / vhat;
                    t.push(vec![
                        xv.into(),
                        self.series[si].label.clone().into(),
                        vhat.into(),
                        pct(d.funding_term).into(),
                        pct(d.dva_term).into(),
                        pct(d.cva_term).into(),
                        pct(d.total).into(),
                    ]);
                }
                Ok(t)
            }
        }
    }
}

fn band_row(x: f64, label: &str, v: &PointValue) -> Vec<Cell> {
    let (s, b) = (&v.seller, &v.buyer);
    vec![
        x.into(),
        label.into(),
        s.xva.into(),
        b.xva.into(),
        v.width().into(),
        s.xi.into(),
        s.xi_i.into(),
        s.xi_c.into(),
        b.xi.into(),
        b.xi_i.into(),
        b.xi_c.into(),
        s.funding_dollars().into(),
        b.funding_dollars().into(),
    ]
}

// ---- tables ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TableId {
    /// Funding positions over (α, r_f⁻).
    Table1,
    /// Funding positions over r_f⁻ at μ_C = 0.16.
    Table2,
}

/// A published funding-position row: `(α, r_f⁻, seller, buyer)`.
pub type ReferenceRow = (f64, f64, f64, f64);

pub const TABLE1: [ReferenceRow; 8] = [
    (0.0, 0.08, 0.0039, 0.0403),
    (0.0, 0.15, 0.0039, 0.0428),
    (0.25, 0.08, 0.0249, 0.0257),
    (0.25, 0.15, 0.0249, 0.0274),
    (0.75, 0.08, -0.0037, -0.0036),
    (0.75, 0.15, -0.0038, -0.0033),
    (1.0, 0.08, -0.0182, -0.018),
    (1.0, 0.15, -0.0193, -0.018),
];

/// At the benchmark `α = 0.9`.
pub const TABLE2: [ReferenceRow; 4] = [
    (0.9, 0.08, -0.0124, -0.0123),
    (0.9, 0.10, -0.0125, -0.0122),
    (0.9, 0.15, -0.0127, -0.0122),
    (0.9, 0.20, -0.013, -0.0122),
];

impl TableId {
    pub fn name(self) -> &'static str {
        match self {
            TableId::Table1 => "table1",
            TableId::Table2 => "table2",
        }
    }

    pub fn reference(self) -> &'static [ReferenceRow] {
        match self {
            TableId::Table1 => &TABLE1,
            TableId::Table2 => &TABLE2,
        }
    }

    pub fn base(self) -> RunConfig {
        RunConfig {
            mu_c: 0.16,
            ..RunConfig::benchmark()
        }
    }
}

/// One computed table row next to its published counterpart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub alpha: f64,
    pub rf_minus: f64,
    pub value: PointValue,
    pub reference_seller: f64,
    pub reference_buyer: f64,
}

/// Evaluates every row of `id`, in published order.
pub fn table_rows(id: TableId, engine: Engine, res: Resolution, allow_violations: bool) -> Result<Vec<TableRow>, CliError> {
    let base = id.base();
    let points: Vec<sweep::SweepPoint> = id
        .reference()
        .iter()
        .enumerate()
        .map(|(i, &(alpha, rf_minus, _, _))| {
            let mut config = base.clone();
            Param::Alpha.apply(&mut config, alpha);
            Param::RfMinus.apply(&mut config, rf_minus);
            sweep::SweepPoint {
                series: i,
                x: rf_minus,
                config,
            }
        })
        .collect();
    let rows = sweep::run(points, |p| {
        let m = p.config.model(allow_violations)?;
        let c = p.config.claim()?;
        engine::evaluate(engine, &m, &c, p.config.regime(), res)
    })?;
    Ok(rows
        .into_iter()
        .map(|(i, _, value)| {
            let (alpha, rf_minus, rs, rb) = id.reference()[i];
            TableRow {
                alpha,
                rf_minus,
                value,
                reference_seller: rs,
                reference_buyer: rb,
            }
        })
        .collect())
}

pub fn table(rows: &[TableRow]) -> Table {
    let mut t = Table::new([
        "alpha",
        "rf_minus",
        "funding_dollars_seller",
        "funding_dollars_buyer",
        "xva_account_seller",
        "xva_account_buyer",
        "reference_seller",
        "reference_buyer",
    ]);
    for r in rows {
        let (s, b) = (&r.value.seller, &r.value.buyer);
        t.push(vec![
            r.alpha.into(),
            r.rf_minus.into(),
            s.funding_dollars().into(),
            b.funding_dollars().into(),
            (s.xi_f * s.b_rf).into(),
            (b.xi_f * b.b_rf).into(),
            r.reference_seller.into(),
            r.reference_buyer.into(),
        ]);
    }
    t
}
