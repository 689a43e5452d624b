//! Plot-ready tables for the three standard figures.
//!
//! Every panel is a tidy CSV with header `x,series,mean,std`:
//!
//! * `fig1`: one panel per method; `x` is the unlabeled fraction, `series`
//!   the labeled count, values are leakage deltas.
//! * `fig2`: one panel; `x` is the labeled count, `series` the method, values
//!   are MAP at the largest leak-free fraction present.
//! * `fig3`: one panel per labeled count; `x` is the unlabeled fraction,
//!   `series` the method, values are leak-free MAP.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::experiments::methods::ExperimentRecord;
use crate::experiments::protocol::{aggregate, leakage_table};

pub const PANEL_HEADER: [&str; 4] = ["x", "series", "mean", "std"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
        })
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Figure::Fig1),
            "fig2" => Ok(Figure::Fig2),
            "fig3" => Ok(Figure::Fig3),
            other => Err(Error::Config(format!("unknown figure `{other}`; expected fig1, fig2 or fig3"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub x: f64,
    pub series: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    /// File stem, e.g. `fig3_n2`.
    pub name: String,
    pub rows: Vec<PlotRow>,
}

impl Panel {
    pub fn series(&self) -> Vec<&str> {
        let mut s: Vec<&str> = self.rows.iter().map(|r| r.series.as_str()).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(PANEL_HEADER)?;
        for r in &self.rows {
            w.write_record([format!("{}", r.x), r.series.clone(), format!("{}", r.mean), format!("{}", r.std)])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn build_panels(figure: Figure, records: &[ExperimentRecord]) -> Result<Vec<Panel>> {
    if records.is_empty() {
        return Err(Error::Config("results file has no rows".into()));
    }
    let clean: Vec<ExperimentRecord> = records.iter().filter(|r| !r.leak).cloned().collect();
    if clean.is_empty() {
        return Err(Error::Config("results file has no leak-free rows".into()));
    }
    match figure {
        Figure::Fig1 => fig1(records),
        Figure::Fig2 => Ok(vec![fig2(&clean)]),
        Figure::Fig3 => Ok(fig3(&clean)),
    }
}

fn fig1(records: &[ExperimentRecord]) -> Result<Vec<Panel>> {
    if !records.iter().any(|r| r.leak) {
        return Err(Error::Config("fig1 needs leaky rows (leak = true); run a leakage experiment".into()));
    }
    let mut panels: BTreeMap<_, Vec<PlotRow>> = BTreeMap::new();
    for row in leakage_table(records)? {
        panels.entry(row.method).or_default().push(PlotRow {
            x: row.unlabeled_fraction,
            series: format!("{}_labeled", row.n_labeled),
            mean: row.delta_mean,
            std: row.delta_std,
        });
    }
    Ok(panels
        .into_iter()
        .map(|(method, rows)| Panel {
            name: format!("fig1_{method}"),
            rows,
        })
        .collect())
}

fn fig2(clean: &[ExperimentRecord]) -> Panel {
    let mut top: BTreeMap<_, f64> = BTreeMap::new();
    for r in clean {
        let f = top.entry((r.method, r.n_labeled)).or_insert(r.unlabeled_fraction);
        *f = f.max(r.unlabeled_fraction);
    }
    let rows = aggregate(clean)
        .into_iter()
        .filter(|a| top[&(a.method, a.n_labeled)] == a.unlabeled_fraction)
        .map(|a| PlotRow {
            x: a.n_labeled as f64,
            series: a.method.to_string(),
            mean: a.map_mean,
            std: a.map_std,
        })
        .collect();
    Panel {
        name: "fig2".into(),
        rows,
    }
}

fn fig3(clean: &[ExperimentRecord]) -> Vec<Panel> {
    let mut panels: BTreeMap<usize, Vec<PlotRow>> = BTreeMap::new();
    for a in aggregate(clean) {
        panels.entry(a.n_labeled).or_default().push(PlotRow {
            x: a.unlabeled_fraction,
            series: a.method.to_string(),
            mean: a.map_mean,
            std: a.map_std,
        });
    }
    panels
        .into_iter()
        .map(|(n, mut rows)| {
            rows.sort_by(|a, b| a.series.cmp(&b.series).then(a.x.total_cmp(&b.x)));
            Panel {
                name: format!("fig3_n{n}"),
                rows,
            }
        })
        .collect()
}
