use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::data::{make_holdout_split, make_split, DescriptorSet, SplitPlan};
use crate::error::{Error, Result};
use crate::experiments::methods::{run_method, ExperimentRecord, MethodConfig, MethodId};

pub const RUNS_HEADER: [&str; 6] = ["method", "n_labeled", "unlabeled_fraction", "leak", "seed", "map"];
pub const AGGREGATE_HEADER: [&str; 6] = ["method", "n_labeled", "unlabeled_fraction", "leak", "map_mean", "map_std"];
pub const LEAKAGE_HEADER: [&str; 5] = ["method", "n_labeled", "unlabeled_fraction", "delta_mean", "delta_std"];

/// Split parameters crossed by a grid run.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitGrid {
    pub n_labeled: Vec<usize>,
    pub fractions: Vec<f64>,
    pub leak: Vec<bool>,
    pub seeds: Vec<u64>,
    /// Share of each class pool reserved for test before the unlabeled
    /// fraction is applied; `None` splits the whole pool by the fraction.
    pub holdout: Option<f64>,
}

pub fn plan_for(
    data: &DescriptorSet,
    n_labeled: usize,
    fraction: f64,
    leak: bool,
    seed: u64,
    holdout: Option<f64>,
) -> Result<SplitPlan> {
    match holdout {
        Some(h) => make_holdout_split(data, n_labeled, fraction, h, leak, seed),
        None => make_split(data, n_labeled, fraction, leak, seed),
    }
}

fn sort_records(records: &mut [ExperimentRecord]) {
    records.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.n_labeled.cmp(&b.n_labeled))
            .then(a.unlabeled_fraction.total_cmp(&b.unlabeled_fraction))
            .then(a.leak.cmp(&b.leak))
            .then(a.seed.cmp(&b.seed))
    });
}

type Cell = (usize, usize, f64, bool, u64);

fn run_cells(configs: &[MethodConfig], data: &DescriptorSet, cells: Vec<Cell>, holdout: Option<f64>) -> Result<Vec<ExperimentRecord>> {
    let mut records = cells
        .into_par_iter()
        .map(|(m, n_labeled, fraction, leak, seed)| {
            let plan = plan_for(data, n_labeled, fraction, leak, seed, holdout)
                .map_err(|e| e.in_method(configs[m].method.as_str()))?;
            run_method(&configs[m], data, &plan)
        })
        .collect::<Result<Vec<_>>>()?;
    sort_records(&mut records);
    Ok(records)
}

/// Every (method, n_labeled, fraction, leak, seed) cell, sorted by key.
pub fn run_grid(configs: &[MethodConfig], data: &DescriptorSet, grid: &SplitGrid) -> Result<Vec<ExperimentRecord>> {
    let mut cells = Vec::new();
    for m in 0..configs.len() {
        for &n in &grid.n_labeled {
            for &f in &grid.fractions {
                for &leak in &grid.leak {
                    for &s in &grid.seeds {
                        cells.push((m, n, f, leak, s));
                    }
                }
            }
        }
    }
    run_cells(configs, data, cells, grid.holdout)
}

/// Leak-free runs over the full `n_labeled × fraction × seed` product.
pub fn unlabeled_sweep(
    configs: &[MethodConfig],
    data: &DescriptorSet,
    n_labeled: &[usize],
    fractions: &[f64],
    seeds: &[u64],
    holdout: Option<f64>,
) -> Result<Vec<ExperimentRecord>> {
    let grid = SplitGrid {
        n_labeled: n_labeled.to_vec(),
        fractions: fractions.to_vec(),
        leak: vec![false],
        seeds: seeds.to_vec(),
        holdout,
    };
    run_grid(configs, data, &grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeakageRow {
    pub method: MethodId,
    pub n_labeled: usize,
    pub unlabeled_fraction: f64,
    pub delta_mean: f64,
    pub delta_std: f64,
    /// Per-seed `MAP(leaky) − MAP(clean)`, in seed order.
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeakageStudy {
    pub records: Vec<ExperimentRecord>,
    pub rows: Vec<LeakageRow>,
}

/// For each fraction and seed: MAP with the test set folded into the full
/// unlabeled pool minus MAP with only that fraction of the train-eligible
/// pool. Both arms share the labeled and test sets of the seed.
pub fn leakage_delta(
    configs: &[MethodConfig],
    data: &DescriptorSet,
    n_labeled: &[usize],
    fractions: &[f64],
    seeds: &[u64],
    holdout: f64,
) -> Result<LeakageStudy> {
    let mut cells = Vec::new();
    for m in 0..configs.len() {
        for &n in n_labeled {
            for &s in seeds {
                cells.push((m, n, 1.0, true, s));
                for &f in fractions {
                    cells.push((m, n, f, false, s));
                }
            }
        }
    }
    let records = run_cells(configs, data, cells, Some(holdout))?;
    let rows = leakage_table(&records)?;
    Ok(LeakageStudy { records, rows })
}

/// Pairs every leak-free record with the leaky record of the same method,
/// labeled count and seed (the largest-fraction one when several exist) and
/// averages the MAP differences over seeds.
pub fn leakage_table(records: &[ExperimentRecord]) -> Result<Vec<LeakageRow>> {
    let mut leaky: BTreeMap<(MethodId, usize, u64), (f64, f64)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.leak) {
        let slot = leaky.entry((r.method, r.n_labeled, r.seed)).or_insert((r.unlabeled_fraction, r.map));
        if r.unlabeled_fraction > slot.0 {
            *slot = (r.unlabeled_fraction, r.map);
        }
    }
    let mut groups: BTreeMap<(MethodId, usize, FractionKey), Vec<(u64, f64)>> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.leak) {
        let Some(&(_, leak_map)) = leaky.get(&(r.method, r.n_labeled, r.seed)) else {
            return Err(Error::Evaluation(format!(
                "no leaky run for {} n_labeled={} seed={}",
                r.method, r.n_labeled, r.seed
            )));
        };
        groups
            .entry((r.method, r.n_labeled, FractionKey(r.unlabeled_fraction)))
            .or_default()
            .push((r.seed, leak_map - r.map));
    }
    Ok(groups
        .into_iter()
        .map(|((method, n_labeled, f), mut per_seed)| {
            per_seed.sort_by_key(|p| p.0);
            let deltas: Vec<f64> = per_seed.into_iter().map(|p| p.1).collect();
            let (delta_mean, delta_std) = mean_std(&deltas);
            LeakageRow {
                method,
                n_labeled,
                unlabeled_fraction: f.0,
                delta_mean,
                delta_std,
                deltas,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct FractionKey(f64);

impl Eq for FractionKey {}

impl PartialOrd for FractionKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FractionKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Mean and sample standard deviation (`n − 1`); the deviation of a single
/// value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: MethodId,
    pub n_labeled: usize,
    pub unlabeled_fraction: f64,
    pub leak: bool,
    pub map_mean: f64,
    pub map_std: f64,
    pub count: usize,
}

/// Mean and deviation over seeds, keyed by the non-seed columns.
pub fn aggregate(records: &[ExperimentRecord]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(MethodId, usize, FractionKey, bool), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.method, r.n_labeled, FractionKey(r.unlabeled_fraction), r.leak))
            .or_default()
            .push(r.map);
    }
    groups
        .into_iter()
        .map(|((method, n_labeled, f, leak), maps)| {
            let (map_mean, map_std) = mean_std(&maps);
            AggregateRow {
                method,
                n_labeled,
                unlabeled_fraction: f.0,
                leak,
                map_mean,
                map_std,
                count: maps.len(),
            }
        })
        .collect()
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

pub fn write_records<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(RUNS_HEADER)?;
    for r in records {
        w.write_record([
            r.method.to_string(),
            r.n_labeled.to_string(),
            format!("{}", r.unlabeled_fraction),
            r.leak.to_string(),
            r.seed.to_string(),
            format!("{}", r.map),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate<W: Write>(rows: &[AggregateRow], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(AGGREGATE_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.n_labeled.to_string(),
            format!("{}", r.unlabeled_fraction),
            r.leak.to_string(),
            format!("{}", r.map_mean),
            format!("{}", r.map_std),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_leakage<W: Write>(rows: &[LeakageRow], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(LEAKAGE_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.n_labeled.to_string(),
            format!("{}", r.unlabeled_fraction),
            format!("{}", r.delta_mean),
            format!("{}", r.delta_std),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a per-run results file. Columns are located by name; a missing
/// column is a [`Error::Config`] naming it.
pub fn read_records<R: Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = r.headers()?.clone();
    let mut col = [0usize; 6];
    for (slot, name) in col.iter_mut().zip(RUNS_HEADER) {
        *slot = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("results file is missing column `{name}`")))?;
    }
    let mut records = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = line + 2;
        let field = |k: usize| rec.get(col[k]).unwrap_or("");
        let parse_err = |k: usize| Error::Config(format!("line {row}: bad `{}` value `{}`", RUNS_HEADER[k], field(k)));
        records.push(ExperimentRecord {
            method: field(0).parse()?,
            n_labeled: field(1).parse().map_err(|_| parse_err(1))?,
            unlabeled_fraction: field(2).parse().map_err(|_| parse_err(2))?,
            leak: field(3).parse().map_err(|_| parse_err(3))?,
            seed: field(4).parse().map_err(|_| parse_err(4))?,
            map: field(5).parse().map_err(|_| parse_err(5))?,
        });
    }
    Ok(records)
}
