//! Sample Pearson correlation, tie-corrected Kendall tau-b, and the
//! t-distribution significance test for Pearson's rho.
//!
//! Kendall uses Knight's O(n log n) algorithm (sort by x, count strict y
//! inversions by mergesort, correct for ties); the test suite checks it
//! against brute-force pair enumeration.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::TooFewItems {
            required: 2,
            actual: xs.len(),
        });
    }
    if let Some(i) = xs.iter().chain(ys).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("correlation input {i}"),
        });
    }
    Ok(())
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Two-sided p-value for a sample Pearson correlation `r` over `n` pairs,
/// from `t = r * sqrt((n-2) / (1-r^2))` against Student's t with `n-2`
/// degrees of freedom.
pub fn pearson_p_value(r: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::TooFewItems {
            required: 3,
            actual: n,
        });
    }
    if !(-1.0..=1.0).contains(&r) {
        return Err(Error::NonFinite {
            context: format!("correlation {r} outside [-1, 1]"),
        });
    }
    let df = (n - 2) as f64;
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return Ok(0.0); // |r| == 1: exact linear relation
    }
    let t = r * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid dof");
    Ok(2.0 * (1.0 - dist.cdf(t.abs())))
}

/// Kendall tau-b rank correlation (tie-corrected).
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    let n = xs.len();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(ys[a].total_cmp(&ys[b])));

    let tied = |vals: &mut Vec<f64>| -> u64 {
        vals.sort_by(|a, b| a.total_cmp(b));
        let mut pairs = 0u64;
        let mut run = 1u64;
        for i in 1..vals.len() {
            if vals[i] == vals[i - 1] {
                run += 1;
            } else {
                pairs += run * (run - 1) / 2;
                run = 1;
            }
        }
        pairs + run * (run - 1) / 2
    };

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let n1 = tied(&mut xs.to_vec());
    let n2 = tied(&mut ys.to_vec());
    // Pairs tied in both coordinates.
    let mut both: Vec<(u64, u64)> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x.to_bits(), y.to_bits()))
        .collect();
    both.sort_unstable();
    let mut n3 = 0u64;
    let mut run = 1u64;
    for i in 1..both.len() {
        if both[i] == both[i - 1] {
            run += 1;
        } else {
            n3 += run * (run - 1) / 2;
            run = 1;
        }
    }
    n3 += run * (run - 1) / 2;

    // Discordant pairs: strict inversions of y in x-order (ties in x were
    // pre-sorted by y, so intra-group pairs never count).
    let y_in_x_order: Vec<f64> = order.iter().map(|&i| ys[i]).collect();
    let discordant = count_strict_inversions(&y_in_x_order);

    let concordant = n0 - n1 - n2 + n3 - discordant;
    let denom = ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((concordant as f64 - discordant as f64) / denom)
}

/// Count pairs i < j with v[i] > v[j] by bottom-up mergesort.
fn count_strict_inversions(values: &[f64]) -> u64 {
    let mut work: Vec<f64> = values.to_vec();
    let mut buf = vec![0.0f64; values.len()];
    let mut count = 0u64;
    let n = work.len();
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo + width < n {
            let mid = lo + width;
            let hi = (lo + 2 * width).min(n);
            let (mut i, mut j, mut k) = (lo, mid, lo);
            while i < mid && j < hi {
                if work[i] <= work[j] {
                    buf[k] = work[i];
                    i += 1;
                } else {
                    // work[i] > work[j]: everything left in [i, mid) beats it
                    count += (mid - i) as u64;
                    buf[k] = work[j];
                    j += 1;
                }
                k += 1;
            }
            while i < mid {
                buf[k] = work[i];
                i += 1;
                k += 1;
            }
            while j < hi {
                buf[k] = work[j];
                j += 1;
                k += 1;
            }
            work[lo..hi].copy_from_slice(&buf[lo..hi]);
            lo += 2 * width;
        }
        width *= 2;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Independent oracle: tau-b by O(n^2) pair enumeration.
    fn kendall_brute_force(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len();
        let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
        for i in 0..n {
            for j in (i + 1)..n {
                let sx = (xs[i] - xs[j]).signum();
                let sy = (ys[i] - ys[j]).signum();
                if sx == 0.0 && sy == 0.0 {
                    // tied in both, excluded from every count
                } else if sx == 0.0 {
                    tx += 1;
                } else if sy == 0.0 {
                    ty += 1;
                } else if sx == sy {
                    c += 1;
                } else {
                    d += 1;
                }
            }
        }
        let denom = (((c + d + tx) as f64) * ((c + d + ty) as f64)).sqrt();
        (c - d) as f64 / denom
    }

    #[test]
    fn perfect_linear_relation() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert_relative_eq!(pearson(&xs, &ys).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(kendall_tau(&xs, &ys).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reversed_order_is_minus_one() {
        let xs = [1.0, 2.0, 3.0, 5.0];
        let ys = [5.0, 3.0, 2.0, 1.0];
        assert_relative_eq!(kendall_tau(&xs, &ys).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn worked_four_point_example() {
        // 5 concordant, 1 discordant of 6 pairs.
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [1.0, 3.0, 2.0, 4.0];
        assert_relative_eq!(kendall_tau(&xs, &ys).unwrap(), 4.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_input_is_an_error() {
        let xs = [1.0, 1.0, 1.0];
        let ys = [1.0, 2.0, 3.0];
        assert!(matches!(pearson(&xs, &ys), Err(Error::ConstantInput)));
        assert!(matches!(kendall_tau(&xs, &ys), Err(Error::ConstantInput)));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(matches!(
            pearson(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn p_value_decreases_with_stronger_correlation() {
        let weak = pearson_p_value(0.2, 20).unwrap();
        let strong = pearson_p_value(0.9, 20).unwrap();
        assert!(strong < weak);
        assert!(weak <= 1.0 && strong >= 0.0);
        assert_eq!(pearson_p_value(1.0, 10).unwrap(), 0.0);
    }

    #[test]
    fn p_value_known_point() {
        // r = 0.632, n = 10 -> t = 2.306, df = 8: p ~= 0.05 (two-sided).
        let p = pearson_p_value(0.6319, 10).unwrap();
        assert!((p - 0.05).abs() < 2e-3, "p = {p}");
    }

    proptest! {
        #[test]
        fn kendall_matches_brute_force_with_ties(
            pairs in proptest::collection::vec((0i32..6, 0i32..6), 2..60)
        ) {
            let xs: Vec<f64> = pairs.iter().map(|(x, _)| *x as f64).collect();
            let ys: Vec<f64> = pairs.iter().map(|(_, y)| *y as f64).collect();
            let fast = kendall_tau(&xs, &ys);
            let all_x_tied = xs.iter().all(|&x| x == xs[0]);
            let all_y_tied = ys.iter().all(|&y| y == ys[0]);
            if all_x_tied || all_y_tied {
                prop_assert!(fast.is_err());
            } else {
                let brute = kendall_brute_force(&xs, &ys);
                prop_assert!((fast.unwrap() - brute).abs() < 1e-12);
            }
        }

        #[test]
        fn pearson_is_scale_invariant(
            xs in proptest::collection::vec(-100.0..100.0f64, 3..30),
            scale in 0.1..10.0f64,
            shift in -5.0..5.0f64,
        ) {
            let ys: Vec<f64> = xs.iter().map(|x| x * 0.5 + 1.0).collect();
            let scaled: Vec<f64> = xs.iter().map(|x| x * scale + shift).collect();
            if let (Ok(a), Ok(b)) = (pearson(&xs, &ys), pearson(&scaled, &ys)) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
