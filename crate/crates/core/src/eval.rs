// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! ROC AUC, stratified k-fold splitting and fold aggregation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Label;

/// Above this many (positive, negative) pairs the rank-sum route is used.
pub const EXACT_PAIR_LIMIT: u64 = 1_000_000;

fn class_counts(labels: &[Label]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l == Label::Positive).count();
    (pos, labels.len() - pos)
}

fn check_inputs(scores: &[f64], labels: &[Label]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

/// Mann–Whitney AUC: the fraction of (positive, negative) pairs ranked
/// correctly, ties credited 1/2.
pub fn roc_auc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    let (pos, neg) = check_inputs(scores, labels)?;
    if (pos as u64) * (neg as u64) <= EXACT_PAIR_LIMIT {
        roc_auc_pair_count(scores, labels)
    } else {
        roc_auc_rank_sum(scores, labels)
    }
}

/// Exact pair count in integer arithmetic (twice the credit, so ties stay
/// integral); a single rounding happens at the final division.
pub fn roc_auc_pair_count(scores: &[f64], labels: &[Label]) -> Result<f64> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let positives: Vec<f64> = select(scores, labels, Label::Positive);
    let negatives: Vec<f64> = select(scores, labels, Label::Negative);
    let mut doubled: u64 = 0;
    for &p in &positives {
        for &n in &negatives {
            doubled += match cmp_scores(p, n) {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    Ok(doubled as f64 / (2 * pos as u64 * neg as u64) as f64)
}

/// Total order on scores in which `-0.0 == 0.0`.
fn cmp_scores(a: f64, b: f64) -> std::cmp::Ordering {
    (a + 0.0).total_cmp(&(b + 0.0))
}

fn select(scores: &[f64], labels: &[Label], class: Label) -> Vec<f64> {
    scores.iter().zip(labels).filter(|(_, &l)| l == class).map(|(&s, _)| s).collect()
}

/// Rank-sum formulation with average ranks over ties, O(n log n).
pub fn roc_auc_rank_sum(scores: &[f64], labels: &[Label]) -> Result<f64> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| cmp_scores(scores[a], scores[b]));
    // Doubled ranks keep tie averages integral.
    let mut doubled_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && cmp_scores(scores[order[end]], scores[order[start]]).is_eq() {
            end += 1;
        }
        // 1-based ranks start+1..=end, average (start + 1 + end) / 2.
        let doubled_avg = (start + 1 + end) as u128;
        let positives_in_run = order[start..end].iter().filter(|&&i| labels[i] == Label::Positive).count();
        doubled_rank_sum += doubled_avg * positives_in_run as u128;
        start = end;
    }
    let pos128 = pos as u128;
    let doubled_u = doubled_rank_sum - pos128 * (pos128 + 1);
    Ok(doubled_u as f64 / (2 * pos128 * neg as u128) as f64)
}

/// Fold index per item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub folds: usize,
    pub assignments: Vec<usize>,
}

impl FoldSplit {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded per-class shuffle, then round-robin fold assignment. The second
/// class continues the rotation where the first stopped, which keeps total
/// fold sizes within one item of each other.
pub fn stratified_kfold(labels: &[Label], folds: usize, seed: u64) -> Result<FoldSplit> {
    if folds < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {folds}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![usize::MAX; labels.len()];
    let mut next = 0;
    for class in [Label::Negative, Label::Positive] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < folds {
            return Err(Error::ClassTooSmall { class: class.bit(), count: members.len(), folds });
        }
        members.shuffle(&mut rng);
        for i in members {
            assignments[i] = next;
            next = (next + 1) % folds;
        }
    }
    Ok(FoldSplit { folds, assignments })
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}
