use crate::error::{Error, Result};

/// Area under the ROC curve with anomalies as the positive class.
///
/// Computed from mid-ranks (Mann-Whitney U), so it equals
/// `P(anomalous > normal) + ½·P(tie)` over all pairs.
pub fn auc(scores_normal: &[f64], scores_anomalous: &[f64]) -> Result<f64> {
    let n_neg = scores_normal.len();
    let n_pos = scores_anomalous.len();
    if n_neg == 0 || n_pos == 0 {
        return Err(Error::Eval(format!(
            "AUC needs both classes (normal: {n_neg}, anomalous: {n_pos})"
        )));
    }
    if scores_normal
        .iter()
        .chain(scores_anomalous)
        .any(|s| s.is_nan())
    {
        return Err(Error::Eval("NaN score".into()));
    }

    let mut all: Vec<(f64, bool)> = scores_normal
        .iter()
        .map(|&s| (s, false))
        .chain(scores_anomalous.iter().map(|&s| (s, true)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Ranks are 1-based; a tie group spanning ranks lo..=hi gets (lo+hi)/2.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let mid = (i + j + 2) as f64 / 2.0;
        let pos_in_group = all[i..=j].iter().filter(|e| e.1).count();
        rank_sum_pos += mid * pos_in_group as f64;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(auc(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(auc(&[3.0, 4.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(auc(&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0]).unwrap(), 0.5);
        assert_eq!(auc(&[1.0, 3.0], &[2.0, 4.0]).unwrap(), 0.75);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(auc(&[], &[1.0]).is_err());
        assert!(auc(&[1.0], &[]).is_err());
        assert!(auc(&[f64::NAN], &[1.0]).is_err());
    }
}
