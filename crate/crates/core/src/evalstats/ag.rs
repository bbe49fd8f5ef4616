//! Alexander-Govern test for equality of group means without assuming equal
//! variances.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::datakit::Scale;
use crate::error::{Error, Result};

/// Scores grouped by scale factor.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroupedScores {
    pub groups: BTreeMap<Scale, Vec<f64>>,
}

impl GroupedScores {
    pub fn push(&mut self, scale: Scale, score: f64) {
        self.groups.entry(scale).or_default().push(score);
    }

    pub fn means(&self) -> BTreeMap<Scale, f64> {
        self.groups.iter().map(|(s, v)| (*s, v.iter().sum::<f64>() / v.len() as f64)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgResult {
    /// The `A` statistic.
    pub statistic: f64,
    pub p_value: f64,
    pub df: usize,
}

/// Upper tail of the chi-square distribution.
pub fn chi2_sf(x: f64, df: usize) -> f64 {
    ChiSquared::new(df as f64).expect("positive degrees of freedom").sf(x)
}

/// Runs the test on arbitrary samples (one slice per group).
pub fn alexander_govern_samples<S: AsRef<[f64]>>(samples: &[S]) -> Result<AgResult> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 groups, got {}", samples.len())));
    }
    let mut stats = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let s = s.as_ref();
        if s.len() < 2 {
            return Err(Error::InsufficientData(format!("group {i} has {} observation(s)", s.len())));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("group {i} has a non-finite observation")));
        }
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        if var <= 0.0 {
            return Err(Error::DegenerateGroup(format!("group {i} has zero variance")));
        }
        stats.push((n, mean, var / n));
    }
    let inv_se2: Vec<f64> = stats.iter().map(|&(_, _, se2)| 1.0 / se2).collect();
    let total: f64 = inv_se2.iter().sum();
    let grand = stats.iter().zip(&inv_se2).map(|(&(_, m, _), w)| w / total * m).sum::<f64>();
    let statistic = stats
        .iter()
        .map(|&(n, m, se2)| {
            let t = (m - grand) / se2.sqrt();
            let v = n - 1.0;
            let a = v - 0.5;
            let b = 48.0 * a * a;
            let c = (a * (t * t / v).ln_1p()).sqrt();
            let (c3, c5, c7) = (c.powi(3), c.powi(5), c.powi(7));
            let z = c + (c3 + 3.0 * c) / b
                - (4.0 * c7 + 33.0 * c5 + 240.0 * c3 + 855.0 * c) / (10.0 * b * b + 8.0 * b * c.powi(4) + 1000.0 * b);
            z * z
        })
        .sum::<f64>();
    let df = samples.len() - 1;
    Ok(AgResult { statistic, p_value: chi2_sf(statistic, df), df })
}

pub fn alexander_govern(groups: &GroupedScores) -> Result<AgResult> {
    let samples: Vec<&[f64]> = groups.groups.values().map(Vec::as_slice).collect();
    alexander_govern_samples(&samples)
}

/// `true` iff `p <= alpha`.
pub fn significance_decision(p: f64, alpha: f64) -> bool {
    p <= alpha
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn identical_groups_give_zero_statistic() {
        let g = [1.0, 2.0, 4.0, 7.0];
        let r = alexander_govern_samples(&[g, g, g]).unwrap();
        assert!(r.statistic.abs() < 1e-20);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert_eq!(r.df, 2);
    }

    #[test]
    fn separated_groups_are_significant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a: Vec<f64> = Normal::new(0.0, 1.0).unwrap().sample_iter(&mut rng).take(50).collect();
        let b: Vec<f64> = Normal::new(5.0, 1.0).unwrap().sample_iter(&mut rng).take(50).collect();
        let r = alexander_govern_samples(&[a, b]).unwrap();
        assert!(r.p_value < 1e-6, "{r:?}");
        assert!(significance_decision(r.p_value, 0.05));
    }

    #[test]
    fn scipy_documentation_example() {
        // scipy.stats.alexandergovern docstring data
        let atlantic = [105.0, 91.0, 95.0, 96.0, 88.0, 91.0, 97.0, 101.0, 96.0, 94.0];
        let indian = [89.0, 96.0, 92.0, 94.0, 93.0, 105.0, 85.0, 87.0, 97.0, 95.0];
        let pacific = [91.0, 95.0, 90.0, 95.0, 97.0, 93.0, 86.0, 102.0, 91.0, 89.0];
        let r = alexander_govern_samples(&[&atlantic[..], &indian[..], &pacific[..]]).unwrap();
        assert!((r.statistic - 1.3637676021870502).abs() < 1e-9, "{r:?}");
        assert!((r.p_value - 0.5056635250747001).abs() < 1e-9, "{r:?}");
        assert!(!significance_decision(r.p_value, 0.05));
    }

    #[test]
    fn decision_boundary() {
        assert!(significance_decision(0.049, 0.05));
        assert!(significance_decision(0.05, 0.05));
        assert!(!significance_decision(0.051, 0.05));
    }

    #[test]
    fn error_paths() {
        assert!(matches!(alexander_govern_samples(&[[1.0, 2.0]]), Err(Error::InsufficientData(_))));
        assert!(matches!(
            alexander_govern_samples(&[&[1.0, 2.0][..], &[3.0][..]]),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(alexander_govern_samples(&[[1.0, 2.0], [3.0, 3.0]]), Err(Error::DegenerateGroup(_))));
    }

    #[test]
    fn affine_invariance() {
        let a = [1.0, 2.5, 3.1, 4.7, 2.2];
        let b = [2.0, 3.5, 2.9, 5.5, 6.1, 4.0];
        let base = alexander_govern_samples(&[&a[..], &b[..]]).unwrap();
        let f = |v: &[f64]| v.iter().map(|x| 3.0 * x - 7.0).collect::<Vec<_>>();
        let moved = alexander_govern_samples(&[f(&a), f(&b)]).unwrap();
        assert!((base.statistic - moved.statistic).abs() < 1e-10 * base.statistic.max(1.0));
    }

    #[test]
    fn grouped_scores_means() {
        let mut g = GroupedScores::default();
        let two = Scale::integer(2).unwrap();
        g.push(two, 1.0);
        g.push(two, 3.0);
        assert_eq!(g.means()[&two], 2.0);
    }
}
