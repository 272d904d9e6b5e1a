// SPDX-License-Identifier: Apache-2.0

//! ROC-AUC via the Mann–Whitney rank-sum with midranks, plus the grouping
//! and averaging used to build a result row.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::perturb::{Category, OpId};

/// Scores paired with ground-truth labels. Fake is the positive class.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledScores {
    pairs: Vec<(f64, Label)>,
}

impl LabeledScores {
    pub fn new(pairs: Vec<(f64, Label)>) -> Result<Self> {
        if let Some((s, _)) = pairs.iter().find(|(s, _)| !s.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite score {s}")));
        }
        Ok(Self { pairs })
    }

    pub fn from_classes(fakes: &[f64], reals: &[f64]) -> Result<Self> {
        let pairs = fakes
            .iter()
            .map(|&s| (s, Label::Fake))
            .chain(reals.iter().map(|&s| (s, Label::Real)))
            .collect();
        Self::new(pairs)
    }

    pub fn pairs(&self) -> &[(f64, Label)] {
        &self.pairs
    }

    pub fn counts(&self) -> (usize, usize) {
        let n_fake = self.pairs.iter().filter(|(_, l)| *l == Label::Fake).count();
        (self.pairs.len() - n_fake, n_fake)
    }

    /// Same scores with real and fake swapped.
    pub fn inverted(&self) -> Self {
        Self {
            pairs: self
                .pairs
                .iter()
                .map(|&(s, l)| {
                    let flipped = match l {
                        Label::Real => Label::Fake,
                        Label::Fake => Label::Real,
                    };
                    (s, flipped)
                })
                .collect(),
        }
    }
}

/// Area under the ROC curve, fake as positive class, ties counted half.
///
/// Ranks `1..=n` go to the ascending scores, tied runs share the mean of
/// their span, and `AUC = (R_fake - n_fake(n_fake+1)/2) / (n_fake n_real)`.
/// Midranks are carried doubled so the rank sum stays an exact integer.
pub fn auc(data: &LabeledScores) -> Result<f64> {
    let (n_real, n_fake) = data.counts();
    if n_real == 0 || n_fake == 0 {
        return Err(Error::DegenerateLabels {
            context: None,
            n_real,
            n_fake,
        });
    }
    let mut sorted: Vec<(f64, Label)> = data.pairs.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    // sum of doubled midranks of the fakes
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j].0.partial_cmp(&sorted[i].0) == Some(Ordering::Equal) {
            j += 1;
        }
        // ranks i+1..=j share (i+1+j)/2, doubled: i+1+j
        let fakes_in_run = sorted[i..j].iter().filter(|(_, l)| *l == Label::Fake).count() as u128;
        rank_sum2 += fakes_in_run * (i + 1 + j) as u128;
        i = j;
    }
    let nf = n_fake as u128;
    let nr = n_real as u128;
    let u2 = rank_sum2 - nf * (nf + 1);
    let total2 = 2 * nf * nr;
    // dividing the smaller side keeps auc(x) + auc(inverted x) == 1 exact
    let auc = if 2 * u2 <= total2 {
        u2 as f64 / total2 as f64
    } else {
        1.0 - (total2 - u2) as f64 / total2 as f64
    };
    Ok(auc)
}

/// One cell of a result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCell {
    pub op_id: OpId,
    pub auc_percent: f64,
    pub n_real: usize,
    pub n_fake: usize,
}

impl EvalCell {
    pub fn from_scores(op_id: OpId, data: &LabeledScores) -> Result<Self> {
        let (n_real, n_fake) = data.counts();
        let a = auc(data).map_err(|e| match e {
            Error::DegenerateLabels { n_real, n_fake, .. } => Error::DegenerateLabels {
                context: Some(format!("op {op_id}")),
                n_real,
                n_fake,
            },
            other => other,
        })?;
        Ok(Self {
            op_id,
            auc_percent: 100.0 * a,
            n_real,
            n_fake,
        })
    }

    pub fn category(&self) -> Category {
        self.op_id.category()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryGroup {
    pub category: Category,
    pub cells: Vec<EvalCell>,
}

/// Groups cells by category in report column order; empty categories are
/// left out.
pub fn category_table(cells: &[EvalCell]) -> Result<Vec<CategoryGroup>> {
    check_unique(cells)?;
    let mut sorted = cells.to_vec();
    sorted.sort_by_key(|c| c.op_id.rank());
    let mut groups: Vec<CategoryGroup> = Vec::new();
    for cell in sorted {
        match groups.last_mut() {
            Some(g) if g.category == cell.category() => g.cells.push(cell),
            _ => groups.push(CategoryGroup {
                category: cell.category(),
                cells: vec![cell],
            }),
        }
    }
    Ok(groups)
}

pub(crate) fn check_unique(cells: &[EvalCell]) -> Result<()> {
    let mut seen = [false; 12];
    for c in cells {
        let slot = &mut seen[c.op_id.rank()];
        if *slot {
            return Err(Error::DuplicateOp(c.op_id.to_string()));
        }
        *slot = true;
    }
    Ok(())
}

/// Unweighted mean over operation cells (not over categories).
pub fn row_average(cells: &[EvalCell]) -> Result<f64> {
    mean_percent(cells.iter().map(|c| c.auc_percent))
}

pub fn mean_percent(values: impl IntoIterator<Item = f64>) -> Result<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        return Err(Error::InvalidArgument("average of an empty row".into()));
    }
    Ok(sum / n as f64)
}

/// Mean AUC per category, in column order.
pub fn category_means(cells: &[EvalCell]) -> Result<Vec<(Category, f64)>> {
    category_table(cells)?
        .into_iter()
        .map(|g| Ok((g.category, row_average(&g.cells)?)))
        .collect()
}
