//! Loss-ranked subset formation and isolation quality metrics.

use serde::{Deserialize, Serialize};

use super::homophily::HomophilyStats;
use crate::attack::PoisonRecord;
use crate::error::{Error, Result};

/// The outcome of data isolation: suspect and clean subsets plus the scores
/// they were derived from. Serializes to JSON for audit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IsolationResult {
    /// Homophily-flagged ids (after truncation), ascending.
    pub d_h: Vec<usize>,
    /// Loss-flagged ids used to top the suspect set up, ascending.
    pub d_l: Vec<usize>,
    /// `d_h ∪ d_l`, exactly `ceil(alpha1 * N)` ids, ascending.
    pub d_bad: Vec<usize>,
    /// Highest-loss ids outside `d_bad`, ascending.
    pub d_clean: Vec<usize>,
    pub alpha1: f64,
    pub alpha2: f64,
    /// (id, warm-up loss), ascending by id.
    pub losses: Vec<(usize, f64)>,
    /// (id, homophily score), ascending by id.
    pub homophily: Vec<(usize, f64)>,
    pub homophily_mean: f64,
    pub homophily_std: f64,
}

impl IsolationResult {
    pub fn is_suspect(&self, id: usize) -> bool {
        self.d_bad.binary_search(&id).is_ok()
    }
}

/// Builds the suspect and clean subsets.
///
/// The homophily-flagged set is truncated to `ceil(alpha1 * N)` by largest
/// deviation from the homophily mean; if it falls short, the lowest-loss
/// remaining samples top it up. The clean set takes the `ceil(alpha2 * N)`
/// highest-loss samples outside the suspect set. Ties break by sample id.
pub fn form_subsets(
    losses: &[(usize, f64)],
    flagged: &[usize],
    stats: &HomophilyStats,
    alpha1: f64,
    alpha2: f64,
) -> Result<IsolationResult> {
    if alpha1 < 0.0 || alpha2 < 0.0 || alpha1 + alpha2 > 1.0 {
        return Err(Error::invalid(
            "form_subsets",
            format!("need alpha1 + alpha2 <= 1, got {alpha1} + {alpha2}"),
        ));
    }
    let n = losses.len();
    if n == 0 {
        return Err(Error::invalid("form_subsets", "no samples"));
    }
    let target_bad = (alpha1 * n as f64).ceil() as usize;
    let target_clean = ((alpha2 * n as f64).ceil() as usize).min(n - target_bad);

    // Truncate the homophily flags by deviation from the mean.
    let mut d_h: Vec<usize> = flagged.to_vec();
    d_h.sort_by(|&a, &b| {
        stats
            .deviance(b)
            .partial_cmp(&stats.deviance(a))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    d_h.truncate(target_bad);
    d_h.sort_unstable();

    // Top up with the lowest-loss samples not already flagged.
    let mut by_loss = losses.to_vec();
    by_loss.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    let mut d_l = Vec::new();
    let mut d_bad = d_h.clone();
    for &(id, _) in &by_loss {
        if d_bad.len() >= target_bad {
            break;
        }
        if d_h.binary_search(&id).is_err() {
            d_l.push(id);
            d_bad.push(id);
        }
    }
    d_l.sort_unstable();
    d_bad.sort_unstable();

    // Clean set: highest loss outside the suspects.
    let mut d_clean = Vec::new();
    for &(id, _) in by_loss.iter().rev() {
        if d_clean.len() >= target_clean {
            break;
        }
        if d_bad.binary_search(&id).is_err() {
            d_clean.push(id);
        }
    }
    d_clean.sort_unstable();

    for id in &d_clean {
        if d_bad.binary_search(id).is_ok() {
            return Err(Error::invalid("form_subsets", "suspect/clean overlap"));
        }
    }
    debug_assert_eq!(d_bad.len(), target_bad.min(n));

    let mut sorted_losses = losses.to_vec();
    sorted_losses.sort_by_key(|&(id, _)| id);
    Ok(IsolationResult {
        d_h,
        d_l,
        d_bad,
        d_clean,
        alpha1,
        alpha2,
        losses: sorted_losses,
        homophily: stats.scores.clone(),
        homophily_mean: stats.mean,
        homophily_std: stats.std,
    })
}

/// Precision/recall of an isolation result against the ground-truth ledger,
/// with their achievable upper bounds `min(1, P/S)` and `min(1, S/P)` for a
/// size-S isolation of P true poisons.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub precision_max: f64,
    pub recall_max: f64,
    /// True when the suspect set was empty and precision is reported as 0.
    pub empty_isolation: bool,
}

pub fn isolation_precision_recall(
    result: &IsolationResult,
    ledger: &PoisonRecord,
) -> PrecisionRecall {
    precision_recall_of(&result.d_bad, ledger)
}

/// Same metrics for a bare suspect id list (e.g. the loss-only baseline).
pub fn precision_recall_of(d_bad: &[usize], ledger: &PoisonRecord) -> PrecisionRecall {
    let s = d_bad.len();
    let p = ledger.poisoned_ids.len();
    let tp = d_bad.iter().filter(|&&id| ledger.is_poisoned(id)).count();
    let precision = if s == 0 { 0.0 } else { tp as f64 / s as f64 };
    let recall = if p == 0 { 0.0 } else { tp as f64 / p as f64 };
    let precision_max = if s == 0 { 0.0 } else { (p as f64 / s as f64).min(1.0) };
    let recall_max = if p == 0 { 0.0 } else { (s as f64 / p as f64).min(1.0) };
    PrecisionRecall {
        precision,
        recall,
        precision_max,
        recall_max,
        empty_isolation: s == 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_stats(ids: &[usize]) -> HomophilyStats {
        HomophilyStats::from_scores(ids.iter().map(|&i| (i, 0.9)).collect())
    }

    #[test]
    fn sizes_and_disjointness() {
        let losses: Vec<(usize, f64)> = (0..100).map(|i| (i, i as f64 * 0.01)).collect();
        let stats = flat_stats(&(0..100).collect::<Vec<_>>());
        let r = form_subsets(&losses, &[], &stats, 0.1, 0.1).unwrap();
        assert_eq!(r.d_bad.len(), 10);
        assert_eq!(r.d_clean.len(), 10);
        assert!(r.d_bad.iter().all(|id| !r.d_clean.contains(id)));
        // lowest-loss ids are suspects, highest-loss are clean
        assert_eq!(r.d_bad, (0..10).collect::<Vec<_>>());
        assert_eq!(r.d_clean, (90..100).collect::<Vec<_>>());
    }

    #[test]
    fn empty_flags_reduce_to_pure_loss_ranking() {
        let losses = vec![(0, 0.5), (1, 0.1), (2, 0.9), (3, 0.2)];
        let stats = flat_stats(&[0, 1, 2, 3]);
        let r = form_subsets(&losses, &[], &stats, 0.5, 0.25).unwrap();
        assert_eq!(r.d_bad, vec![1, 3]);
        assert_eq!(r.d_l, vec![1, 3]);
        assert!(r.d_h.is_empty());
        assert_eq!(r.d_clean, vec![2]);
    }

    #[test]
    fn oversize_flags_truncate_by_deviance() {
        // 4 samples; all flagged; mean 0.5: ids 0 and 3 deviate most.
        let stats = HomophilyStats::from_scores(vec![
            (0, 0.1),
            (1, 0.45),
            (2, 0.55),
            (3, 0.9),
        ]);
        let losses = vec![(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)];
        let r = form_subsets(&losses, &[0, 1, 2, 3], &stats, 0.5, 0.5).unwrap();
        assert_eq!(r.d_bad, vec![0, 3]);
    }

    #[test]
    fn alpha_overflow_rejected() {
        let losses = vec![(0, 0.5)];
        let stats = flat_stats(&[0]);
        assert!(form_subsets(&losses, &[], &stats, 0.6, 0.6).is_err());
    }

    fn toy_result(d_bad: Vec<usize>, n: usize) -> IsolationResult {
        IsolationResult {
            d_h: vec![],
            d_l: vec![],
            d_bad,
            d_clean: vec![],
            alpha1: 0.0,
            alpha2: 0.0,
            losses: (0..n).map(|i| (i, 0.0)).collect(),
            homophily: vec![],
            homophily_mean: 0.0,
            homophily_std: 0.0,
        }
    }

    fn toy_ledger(poisoned: Vec<usize>) -> PoisonRecord {
        PoisonRecord {
            poisoned_ids: poisoned,
            ..Default::default()
        }
    }

    #[test]
    fn equal_rates_make_precision_equal_recall() {
        // 10 isolated, 10 injected, 8 true positives
        let result = toy_result((0..8).chain(90..92).collect(), 100);
        let ledger = toy_ledger((0..10).collect());
        let pr = isolation_precision_recall(&result, &ledger);
        assert_eq!(pr.precision, 0.8);
        assert_eq!(pr.recall, 0.8);
        assert_eq!(pr.precision_max, 1.0);
        assert_eq!(pr.recall_max, 1.0);
    }

    #[test]
    fn recall_bound_when_isolating_less_than_injected() {
        // ISR 5%, IJR 10% on 100 samples: S=5, P=10 -> recall_max 0.5
        let result = toy_result((0..5).collect(), 100);
        let ledger = toy_ledger((0..10).collect());
        let pr = isolation_precision_recall(&result, &ledger);
        assert_eq!(pr.recall_max, 0.5);
        assert_eq!(pr.precision_max, 1.0);
        assert!(pr.recall <= pr.recall_max);
    }

    #[test]
    fn precision_bound_when_isolating_more_than_injected() {
        // ISR 20%, IJR 10%: S=20, P=10 -> precision_max 0.5
        let result = toy_result((0..20).collect(), 100);
        let ledger = toy_ledger((0..10).collect());
        let pr = isolation_precision_recall(&result, &ledger);
        assert_eq!(pr.precision_max, 0.5);
        assert_eq!(pr.recall_max, 1.0);
        assert!(pr.precision <= pr.precision_max);
    }

    #[test]
    fn empty_isolation_is_flagged() {
        let result = toy_result(vec![], 10);
        let ledger = toy_ledger(vec![0]);
        let pr = isolation_precision_recall(&result, &ledger);
        assert!(pr.empty_isolation);
        assert_eq!(pr.precision, 0.0);
    }
}
