//! SRCC, PLCC and KRCC between predicted and subjective scores.

use crate::error::{Error, Result};

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 observations, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("observations must be finite".into()));
    }
    Ok(())
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && x[order[j]] == x[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

fn pearson_unchecked(x: &[f64], y: &[f64], what: &str) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance(format!("{what}: an input has zero variance")));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson linear correlation coefficient.
pub fn plcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson_unchecked(x, y, "plcc")
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn srcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson_unchecked(&average_ranks(x), &average_ranks(y), "srcc")
}

/// Number of tied pairs among runs of equal keys in an already sorted sequence.
fn tied_pairs<K: PartialEq>(sorted: impl Iterator<Item = K>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<K> = None;
    for k in sorted {
        if prev.as_ref() == Some(&k) {
            run += 1;
        } else {
            total += run * (run + 1) / 2;
            run = 0;
        }
        prev = Some(k);
    }
    total + run * (run + 1) / 2
}

/// Stable merge sort by `y` counting the inversions it removes.
fn sort_counting_swaps(v: &mut [(f64, f64)], buf: &mut Vec<(f64, f64)>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_counting_swaps(&mut v[..mid], buf) + sort_counting_swaps(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j].1 < v[i].1 {
            buf.push(v[j]);
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall tau-b in `O(n log n)`.
pub fn krcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as u64;
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let x_ties = tied_pairs(pairs.iter().map(|p| p.0));
    let joint_ties = tied_pairs(pairs.iter().copied());
    let mut buf = Vec::with_capacity(pairs.len());
    let discordant = sort_counting_swaps(&mut pairs, &mut buf);
    let y_ties = tied_pairs(pairs.iter().map(|p| p.1));
    let total = n * (n - 1) / 2;
    if total == x_ties || total == y_ties {
        return Err(Error::ZeroVariance("krcc: an input is constant".into()));
    }
    let s = total as f64 - x_ties as f64 - y_ties as f64 + joint_ties as f64 - 2.0 * discordant as f64;
    let denom = ((total - x_ties) as f64).sqrt() * ((total - y_ties) as f64).sqrt();
    Ok((s / denom).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn simple_cases() {
        assert_eq!(srcc(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
        assert_eq!(srcc(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert!((plcc(&[1.0, 2.0, 4.0], &[3.0, 5.0, 9.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(krcc(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert!((krcc(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 4.0, 3.0]).unwrap() - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn ties_use_average_ranks() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(srcc(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::ZeroVariance(_))));
        assert!(matches!(plcc(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]), Err(Error::ZeroVariance(_))));
        assert!(matches!(krcc(&[5.0, 5.0, 5.0], &[1.0, 2.0, 3.0]), Err(Error::ZeroVariance(_))));
        assert!(matches!(srcc(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::InvalidInput(_))));
        assert!(matches!(plcc(&[1.0, 2.0, 3.0], &[1.0, 2.0]), Err(Error::InvalidInput(_))));
        assert!(krcc(&[1.0, f64::NAN, 3.0], &[1.0, 2.0, 3.0]).is_err());
    }

    fn vecs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..30).prop_flat_map(|n| {
            let v = proptest::collection::vec((0i32..8).prop_map(f64::from), n);
            (v.clone(), v)
        })
    }

    proptest! {
        #[test]
        fn srcc_invariant_under_monotone_maps((x, y) in vecs()) {
            prop_assume!(x.iter().any(|&v| v != x[0]) && y.iter().any(|&v| v != y[0]));
            let fx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
            let gy: Vec<f64> = y.iter().map(|v| 3.0 * v * v * v + v).collect();
            prop_assert!((srcc(&x, &y).unwrap() - srcc(&fx, &gy).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn plcc_affine_law((x, y) in vecs(), a in -5.0f64..5.0, c in -5.0f64..5.0, b in -3.0f64..3.0) {
            prop_assume!(a.abs() > 0.1 && c.abs() > 0.1);
            prop_assume!(x.iter().any(|&v| v != x[0]) && y.iter().any(|&v| v != y[0]));
            let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let cy: Vec<f64> = y.iter().map(|v| c * v - b).collect();
            let expect = (a * c).signum() * plcc(&x, &y).unwrap();
            prop_assert!((plcc(&ax, &cy).unwrap() - expect).abs() < 1e-9);
        }
    }
}
