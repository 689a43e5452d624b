//! Datasets, descriptor groups, split generation and the leakage guard.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

/// A stack of non-negative histogram descriptor groups plus class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    groups: Vec<Matrix>,
    labels: Vec<usize>,
    class_count: usize,
}

impl DescriptorSet {
    pub fn new(groups: Vec<Matrix>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        let n = labels.len();
        if groups.is_empty() {
            return Err(Error::Input("a dataset needs at least one descriptor group".into()));
        }
        for (g, m) in groups.iter().enumerate() {
            if m.rows() != n {
                return Err(Error::Dimension(format!(
                    "group {g} has {} rows, expected {n}",
                    m.rows()
                )));
            }
            if let Some(v) = m.as_slice().iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                return Err(Error::Domain(format!(
                    "group {g} contains {v}; features must be finite and non-negative"
                )));
            }
        }
        let mut seen = vec![false; class_count];
        for (i, &y) in labels.iter().enumerate() {
            if y >= class_count {
                return Err(Error::Input(format!(
                    "sample {i} has label {y}, outside [0, {class_count})"
                )));
            }
            seen[y] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::Input(format!("class {c} has no samples")));
        }
        Ok(DescriptorSet {
            groups,
            labels,
            class_count,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn groups(&self) -> &[Matrix] {
        &self.groups
    }

    pub fn group_dims(&self) -> Vec<usize> {
        self.groups.iter().map(Matrix::cols).collect()
    }

    /// Ids of each class, ascending.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.class_count];
        for (i, &y) in self.labels.iter().enumerate() {
            members[y].push(i);
        }
        members
    }

    pub fn all(&self) -> DescriptorView<'_> {
        DescriptorView {
            data: self,
            ids: (0..self.n_samples()).collect(),
        }
    }

    /// View over the selected rows, ascending by sample id. Duplicates collapse.
    pub fn restrict(&self, ids: &[usize]) -> Result<DescriptorView<'_>> {
        let n = self.n_samples();
        if let Some(&bad) = ids.iter().find(|&&i| i >= n) {
            return Err(Error::Bounds { index: bad, len: n });
        }
        let set: BTreeSet<usize> = ids.iter().copied().collect();
        Ok(DescriptorView {
            data: self,
            ids: set.into_iter().collect(),
        })
    }

    /// View over `ids` in the given order. Duplicate ids are rejected.
    pub fn select(&self, ids: &[usize]) -> Result<DescriptorView<'_>> {
        let n = self.n_samples();
        let mut seen = vec![false; n];
        for &i in ids {
            if i >= n {
                return Err(Error::Bounds { index: i, len: n });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Input(format!("sample {i} selected twice")));
            }
        }
        Ok(DescriptorView {
            data: self,
            ids: ids.to_vec(),
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header = vec!["id".to_string(), "label".to_string()];
        for (k, g) in self.groups.iter().enumerate() {
            header.extend((0..g.cols()).map(|j| format!("g{k}_{j}")));
        }
        w.write_record(&header)?;
        for i in 0..self.n_samples() {
            let mut rec = vec![i.to_string(), self.labels[i].to_string()];
            for g in &self.groups {
                rec.extend(g.row(i).iter().map(|v| format!("{v}")));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the `id,label,g<k>_<j>` format. Rows may come in any order but
    /// ids must be exactly `0..n`.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header = r.headers()?.clone();
        if header.get(0) != Some("id") || header.get(1) != Some("label") {
            return Err(Error::Input("dataset header must start with `id,label`".into()));
        }
        let mut dims: Vec<usize> = Vec::new();
        for (col, name) in header.iter().enumerate().skip(2) {
            let parsed = name
                .strip_prefix('g')
                .and_then(|s| s.split_once('_'))
                .and_then(|(k, j)| Some((k.parse::<usize>().ok()?, j.parse::<usize>().ok()?)));
            let Some((k, j)) = parsed else {
                return Err(Error::Input(format!("column {col}: unrecognised name `{name}`")));
            };
            if k == dims.len() && j == 0 {
                dims.push(1);
            } else if k + 1 == dims.len() && j == dims[k] {
                dims[k] += 1;
            } else {
                return Err(Error::Input(format!(
                    "column {col}: `{name}` is out of order; expected g<k>_<j> grouped and ascending"
                )));
            }
        }
        if dims.is_empty() {
            return Err(Error::Input("dataset has no feature columns".into()));
        }

        let mut rows: Vec<(usize, usize, Vec<f64>)> = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |c: usize| rec.get(c).unwrap_or("");
            let id: usize = field(0)
                .parse()
                .map_err(|_| Error::Input(format!("row {}: bad id `{}`", line + 1, field(0))))?;
            let label: usize = field(1)
                .parse()
                .map_err(|_| Error::Input(format!("row {}: bad label `{}`", line + 1, field(1))))?;
            let mut values = Vec::with_capacity(rec.len() - 2);
            for c in 2..header.len() {
                let v: f64 = field(c).parse().map_err(|_| {
                    Error::Input(format!("row {}: bad value `{}` in column {c}", line + 1, field(c)))
                })?;
                values.push(v);
            }
            rows.push((id, label, values));
        }
        rows.sort_by_key(|r| r.0);
        for (expect, row) in rows.iter().enumerate() {
            if row.0 != expect {
                return Err(Error::Input(format!(
                    "sample ids must be exactly 0..{}; found {}",
                    rows.len(),
                    row.0
                )));
            }
        }
        let n = rows.len();
        let class_count = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        let mut groups: Vec<Matrix> = dims.iter().map(|&d| Matrix::zeros(n, d)).collect();
        for (i, (_, _, values)) in rows.iter().enumerate() {
            let mut offset = 0;
            for g in groups.iter_mut() {
                let d = g.cols();
                g.row_mut(i).copy_from_slice(&values[offset..offset + d]);
                offset += d;
            }
        }
        let labels = rows.iter().map(|r| r.1).collect();
        DescriptorSet::new(groups, labels, class_count)
    }
}

/// A row subset of a [`DescriptorSet`].
#[derive(Debug, Clone)]
pub struct DescriptorView<'a> {
    data: &'a DescriptorSet,
    ids: Vec<usize>,
}

/// One sample as a list of per-group histograms.
pub type Sample<'a> = Vec<&'a [f64]>;

impl<'a> DescriptorView<'a> {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn dataset(&self) -> &'a DescriptorSet {
        self.data
    }

    pub fn group_count(&self) -> usize {
        self.data.groups.len()
    }

    pub fn group_dims(&self) -> Vec<usize> {
        self.data.group_dims()
    }

    pub fn label(&self, i: usize) -> usize {
        self.data.labels[self.ids[i]]
    }

    pub fn labels(&self) -> Vec<usize> {
        self.ids.iter().map(|&i| self.data.labels[i]).collect()
    }

    /// Row `i` of group `g`, with `i` local to the view.
    pub fn group_row(&self, i: usize, g: usize) -> &'a [f64] {
        self.data.groups[g].row(self.ids[i])
    }

    pub fn sample(&self, i: usize) -> Sample<'a> {
        let id = self.ids[i];
        self.data.groups.iter().map(|g| g.row(id)).collect()
    }

    pub fn samples(&self) -> Vec<Sample<'a>> {
        (0..self.len()).map(|i| self.sample(i)).collect()
    }

    /// Single-group view of the selected rows, as a matrix.
    pub fn group_matrix(&self, g: usize) -> Matrix {
        self.data.groups[g].select_rows(&self.ids)
    }

    /// All groups concatenated per row.
    pub fn concatenated(&self) -> Matrix {
        let total: usize = self.group_dims().iter().sum();
        let mut out = Matrix::zeros(self.len(), total);
        for i in 0..self.len() {
            let row = out.row_mut(i);
            let mut offset = 0;
            for g in &self.data.groups {
                let src = g.row(self.ids[i]);
                row[offset..offset + src.len()].copy_from_slice(src);
                offset += src.len();
            }
        }
        out
    }
}

/// Disjoint labeled / unlabeled-train / test roles over sample ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub labeled_ids: Vec<usize>,
    pub unlabeled_train_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    pub leak_test_into_train: bool,
    pub seed: u64,
    pub n_labeled_per_class: usize,
    pub unlabeled_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Role {
    Labeled,
    Unlabeled,
    Test,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Labeled => "labeled",
            Role::Unlabeled => "unlabeled",
            Role::Test => "test",
        }
    }
}

impl SplitPlan {
    /// Labeled ids followed by unlabeled-train ids: the node order used by
    /// every transductive learner.
    pub fn training_ids(&self) -> Vec<usize> {
        let mut ids = self.labeled_ids.clone();
        ids.extend_from_slice(&self.unlabeled_train_ids);
        ids
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut rows: Vec<(usize, Role)> = Vec::new();
        rows.extend(self.labeled_ids.iter().map(|&i| (i, Role::Labeled)));
        rows.extend(self.unlabeled_train_ids.iter().map(|&i| (i, Role::Unlabeled)));
        rows.extend(self.test_ids.iter().map(|&i| (i, Role::Test)));
        rows.sort();
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["id", "role"])?;
        for (id, role) in rows {
            w.write_record([id.to_string().as_str(), role.as_str()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the `id,role` format. Seed and split parameters are not stored
    /// in the file and come back as zero; the leak flag is inferred.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        if r.headers()?.iter().collect::<Vec<_>>() != ["id", "role"] {
            return Err(Error::Input("split header must be `id,role`".into()));
        }
        let (mut lab, mut unl, mut test) = (Vec::new(), Vec::new(), Vec::new());
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let id: usize = rec[0]
                .parse()
                .map_err(|_| Error::Input(format!("row {}: bad id `{}`", line + 1, &rec[0])))?;
            match &rec[1] {
                "labeled" => lab.push(id),
                "unlabeled" => unl.push(id),
                "test" => test.push(id),
                other => return Err(Error::Input(format!("row {}: unknown role `{other}`", line + 1))),
            }
        }
        lab.sort_unstable();
        unl.sort_unstable();
        test.sort_unstable();
        let mut plan = SplitPlan {
            labeled_ids: lab,
            unlabeled_train_ids: unl,
            test_ids: test,
            leak_test_into_train: false,
            seed: 0,
            n_labeled_per_class: 0,
            unlabeled_fraction: 0.0,
        };
        plan.leak_test_into_train = !assert_no_leak(&plan);
        Ok(plan)
    }
}

/// Stratified seeded split. Per class, `n_labeled_per_class` ids become
/// labeled, `floor(fraction * pool)` (at least 1) of the remaining pool
/// become unlabeled-train, and the rest is test. With `leak`, test ids are
/// also appended to the unlabeled-train set.
pub fn make_split(
    data: &DescriptorSet,
    n_labeled_per_class: usize,
    unlabeled_fraction: f64,
    leak: bool,
    seed: u64,
) -> Result<SplitPlan> {
    split_impl(data, n_labeled_per_class, unlabeled_fraction, None, leak, seed)
}

/// Like [`make_split`], but a fixed share `holdout_fraction` of each class's
/// pool is reserved for test first; `unlabeled_fraction` then selects from
/// the remaining train-eligible part. The test set therefore does not depend
/// on `unlabeled_fraction`, and `unlabeled_fraction = 1.0` is valid.
/// Unlabeled sets are nested across fractions for a fixed seed.
pub fn make_holdout_split(
    data: &DescriptorSet,
    n_labeled_per_class: usize,
    unlabeled_fraction: f64,
    holdout_fraction: f64,
    leak: bool,
    seed: u64,
) -> Result<SplitPlan> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "holdout fraction {holdout_fraction} must lie in (0,1)"
        )));
    }
    split_impl(
        data,
        n_labeled_per_class,
        unlabeled_fraction,
        Some(holdout_fraction),
        leak,
        seed,
    )
}

fn split_impl(
    data: &DescriptorSet,
    n_labeled: usize,
    fraction: f64,
    holdout: Option<f64>,
    leak: bool,
    seed: u64,
) -> Result<SplitPlan> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Parameter(format!(
            "unlabeled fraction {fraction} must lie in (0,1]"
        )));
    }
    let members = data.class_members();
    for (c, m) in members.iter().enumerate() {
        if m.len() <= n_labeled {
            return Err(Error::InsufficientData(format!(
                "class {c} has {} samples, needs more than {n_labeled}",
                m.len()
            )));
        }
    }

    let mut rng = seed::rng(seed);
    let (mut labeled, mut unlabeled, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for m in &members {
        let mut ids = m.clone();
        ids.shuffle(&mut rng);
        let (lab, pool) = ids.split_at(n_labeled);
        let eligible = match holdout {
            None => pool.len(),
            Some(h) => {
                let test_n = ((h * pool.len() as f64).floor() as usize).max(1);
                pool.len().saturating_sub(test_n).max(1)
            }
        };
        let n_unl = ((fraction * eligible as f64).floor() as usize).clamp(1, eligible);
        labeled.extend_from_slice(lab);
        unlabeled.extend_from_slice(&pool[..n_unl]);
        let test_start = if holdout.is_some() { eligible } else { n_unl };
        test.extend_from_slice(&pool[test_start.min(pool.len())..]);
    }
    if test.is_empty() {
        return Err(Error::DegenerateSplit("test set is empty".into()));
    }
    labeled.sort_unstable();
    test.sort_unstable();
    if leak {
        unlabeled.extend_from_slice(&test);
    }
    unlabeled.sort_unstable();
    Ok(SplitPlan {
        labeled_ids: labeled,
        unlabeled_train_ids: unlabeled,
        test_ids: test,
        leak_test_into_train: leak,
        seed,
        n_labeled_per_class: n_labeled,
        unlabeled_fraction: fraction,
    })
}

/// True iff no test id is used for training.
pub fn assert_no_leak(plan: &SplitPlan) -> bool {
    let train: BTreeSet<usize> = plan
        .labeled_ids
        .iter()
        .chain(&plan.unlabeled_train_ids)
        .copied()
        .collect();
    plan.test_ids.iter().all(|i| !train.contains(i))
}
