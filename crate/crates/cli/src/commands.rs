//! Subcommand bodies. Each returns its data; printing and exit codes are
//! left to `main`.

use std::fmt::Write as _;
use std::path::PathBuf;

use xva_core::pde::{convergence_study, SolverSettings};
use xva_core::Side;

use crate::config::RunConfig;
use crate::engine::{self, Engine, EngineKind, PointValue, Resolution};
use crate::output::{Cell, Table};
use crate::presets::{self, FigureId, TableId};
use crate::sweep::{self, Param, Series, SweepAxis};
use crate::CliError;

/// Flags shared by every subcommand. Flags beat config keys, config keys
/// beat the documented defaults.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub engine: Option<EngineKind>,
    pub out: Option<PathBuf>,
    pub allow_violations: bool,
    pub nx: Option<usize>,
    pub nt: Option<usize>,
    pub steps: Option<usize>,
}

impl Overrides {
    pub fn resolution(&self, cfg: Option<&RunConfig>) -> Result<Resolution, CliError> {
        let base = match cfg {
            Some(c) => c.resolution()?,
            None => RunConfig::benchmark().resolution()?,
        };
        Resolution::new(
            self.nx.unwrap_or(base.nx),
            self.nt.unwrap_or(base.nt),
            self.steps.unwrap_or(base.steps),
        )
    }

    pub fn out(&self, cfg: Option<&RunConfig>) -> Option<PathBuf> {
        self.out.clone().or_else(|| cfg.and_then(|c| c.out.clone()))
    }

    fn single_engine(&self, default: EngineKind) -> Result<Engine, CliError> {
        match self.engine.unwrap_or(default) {
            EngineKind::Closed => Ok(Engine::Closed),
            EngineKind::Pde => Ok(Engine::Pde),
            EngineKind::Lattice => Ok(Engine::Lattice),
            EngineKind::All => Err(CliError::Incompatible("this command runs a single engine".into())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValueReport {
    pub points: Vec<PointValue>,
    pub text: String,
    pub table: Table,
}

impl ValueReport {
    /// Largest `|XVA|` difference between two engines over both sides.
    pub fn max_disagreement(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                for side in Side::BOTH {
                    d = d.max((a.side(side).xva - b.side(side).xva).abs());
                }
            }
        }
        d
    }
}

pub fn value(cfg: &RunConfig, o: &Overrides) -> Result<ValueReport, CliError> {
    let model = cfg.model(o.allow_violations)?;
    let claim = cfg.claim()?;
    let res = o.resolution(Some(cfg))?;
    let engines = o.engine.unwrap_or(cfg.engine()).engines(&model)?;
    let points = engines
        .iter()
        .map(|&e| engine::evaluate(e, &model, &claim, cfg.regime(), res))
        .collect::<Result<Vec<_>, _>>()?;

    let mut table = Table::new([
        "engine",
        "side",
        "xva",
        "vhat",
        "xi_stock",
        "xi_I",
        "xi_C",
        "psi_r",
        "psi_c",
        "xi_f",
        "funding_dollars",
    ]);
    let mut text = String::new();
    for p in &points {
        for side in Side::BOTH {
            let r = p.side(side);
            table.push(vec![
                p.engine.name().into(),
                side.name().into(),
                r.xva.into(),
                r.vhat.into(),
                r.xi.into(),
                r.xi_i.into(),
                r.xi_c.into(),
                r.psi_r.into(),
                r.psi_c.into(),
                r.xi_f.into(),
                r.funding_dollars().into(),
            ]);
            let _ = writeln!(
                text,
                "{:<8} {:<6} xva={:+.9e} xi={:+.6e} xi_I={:+.6e} xi_C={:+.6e} funding$={:+.6e}",
                p.engine.name(),
                side.name(),
                r.xva,
                r.xi,
                r.xi_i,
                r.xi_c,
                r.funding_dollars()
            );
        }
    }
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let _ = writeln!(
                text,
                "delta {}-{}: seller {:+.3e}, buyer {:+.3e}",
                a.engine.name(),
                b.engine.name(),
                a.seller.xva - b.seller.xva,
                a.buyer.xva - b.buyer.xva
            );
        }
    }
    Ok(ValueReport { points, text, table })
}

/// α over `[0, 1]` (or the config's α axis). With `relative`, adds the XVA
/// as a fraction of `v̂`, left blank where `v̂ = 0`.
pub fn band(cfg: &RunConfig, o: &Overrides, relative: bool) -> Result<Table, CliError> {
    let axis = match cfg.sweep()? {
        Some(a) if a.param == Param::Alpha => a,
        Some(a) => {
            return Err(CliError::Incompatible(format!(
                "band sweeps alpha; the config sweeps `{}`",
                a.param.name()
            )))
        }
        None => SweepAxis::new(Param::Alpha, 0.0, 1.0, 21)?,
    };
    let engine = o.single_engine(cfg.engine())?;
    let res = o.resolution(Some(cfg))?;
    let points = sweep::expand(cfg, &axis, &[Series::base()]);
    let rows = sweep::run(points, |p| {
        let m = p.config.model(o.allow_violations)?;
        let c = p.config.claim()?;
        engine::evaluate(engine, &m, &c, p.config.regime(), res)
    })?;
    let mut header = vec![
        "alpha",
        "xva_buyer",
        "xva_seller",
        "width",
        "xi_stock",
        "xi_I",
        "xi_C",
        "funding_dollars",
    ];
    if relative {
        header.extend(["xva_buyer_over_vhat", "xva_seller_over_vhat"]);
    }
    let mut t = Table::new(header);
    for (_, alpha, v) in rows {
        let s = &v.seller;
        let mut row: Vec<Cell> = vec![
            alpha.into(),
            v.buyer.xva.into(),
            s.xva.into(),
            v.width().into(),
            s.xi.into(),
            s.xi_i.into(),
            s.xi_c.into(),
            s.funding_dollars().into(),
        ];
        if relative {
            for x in [v.buyer.xva, s.xva] {
                row.push(if v.vhat != 0.0 { (x / v.vhat).into() } else { "".into() });
            }
        }
        t.push(row);
    }
    Ok(t)
}

pub fn table(id: TableId, o: &Overrides) -> Result<Table, CliError> {
    let engine = o.single_engine(EngineKind::Pde)?;
    let rows = presets::table_rows(id, engine, o.resolution(None)?, o.allow_violations)?;
    Ok(presets::table(&rows))
}

pub fn figure(id: FigureId, o: &Overrides) -> Result<Table, CliError> {
    let mut p = id.preset();
    if let Some(e) = o.engine {
        p = p.with_engine(e)?;
    }
    p.run(o.resolution(None)?, o.allow_violations)
}

/// The full report and whether every relation holds.
pub fn validate(cfg: &RunConfig) -> Result<(String, bool), CliError> {
    let model = cfg.model(true)?;
    let report = model.validate_arbitrage_free();
    Ok((report.to_string(), report.passed()))
}

/// `levels` grids doubling both `nx` and `nt` from the base resolution.
pub fn convergence(cfg: &RunConfig, o: &Overrides, levels: usize) -> Result<Table, CliError> {
    if levels == 0 {
        return Err(CliError::Config("convergence needs at least one level".into()));
    }
    let model = cfg.model(o.allow_violations)?;
    let claim = cfg.claim()?;
    let nx = o.nx.or(cfg.nx).unwrap_or(50);
    let nt = o.nt.or(cfg.nt).unwrap_or(50);
    let grids: Vec<(usize, usize)> = (0..levels).map(|k| (nx << k, nt << k)).collect();
    let rows = convergence_study(&model, &claim, &SolverSettings::with_regime(cfg.regime()), &grids)?;
    let mut t = Table::new(["nx", "nt", "value", "reference", "error", "order"]);
    for r in rows {
        t.push(vec![
            (r.nx as f64).into(),
            (r.nt as f64).into(),
            r.value.into(),
            r.reference.into(),
            r.error.into(),
            r.order.map_or_else(|| "".into(), Cell::from),
        ]);
    }
    Ok(t)
}
