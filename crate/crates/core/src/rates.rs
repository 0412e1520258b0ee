//! Empirical convergence-order fits.

/// Errors at or below this level are treated as converged and not fitted.
pub const ERROR_FLOOR: f64 = 1e-13;

/// Slope of the least-squares fit of `log e_{k+1}` against `log e_k` over the
/// last four consecutive pairs with both errors above [`ERROR_FLOOR`]. `None`
/// when fewer than three such pairs exist.
pub fn fit_order(errors: &[f64]) -> Option<f64> {
    let pairs = usable_pairs(errors);
    if pairs.len() < 3 {
        return None;
    }
    let tail = &pairs[pairs.len().saturating_sub(4)..];
    let n = tail.len() as f64;
    let (sx, sy) = tail.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in tail {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// `(log e_k, log e_{k+1})` for the leading run of errors above the floor.
pub fn usable_pairs(errors: &[f64]) -> Vec<(f64, f64)> {
    let run: Vec<f64> = errors
        .iter()
        .copied()
        .take_while(|e| e.is_finite() && *e > ERROR_FLOOR)
        .collect();
    run.windows(2).map(|w| (w[0].ln(), w[1].ln())).collect()
}

/// Median of the available orders.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 0 {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_sequence_has_order_two() {
        let mut e = vec![0.5];
        for _ in 0..4 {
            let last = *e.last().unwrap();
            e.push(last * last);
        }
        let q = fit_order(&e).unwrap();
        assert!((q - 2.0).abs() < 1e-9, "{q}");
    }

    #[test]
    fn linear_sequence_has_order_one() {
        let e: Vec<f64> = (0..10).map(|k| 0.5f64.powi(k)).collect();
        assert!((fit_order(&e).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn too_few_pairs_is_unavailable() {
        assert_eq!(fit_order(&[1e-2, 1e-4, 1e-8, 1e-16, 0.0]), None);
        assert_eq!(fit_order(&[]), None);
    }

    #[test]
    fn median_of_even_count() {
        assert_eq!(median(&[3.0, 1.0, 2.0, 4.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
