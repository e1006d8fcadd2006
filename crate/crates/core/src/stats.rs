//! Small statistics helpers: means, jackknife errors, ratio estimators and
//! least-squares slopes.

/// Sample mean and standard error of the mean (0 for fewer than two values).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Delete-one jackknife for `Σ num / Σ den` over groups.
///
/// Returns the full-sample ratio and its jackknife standard error.
pub fn jackknife_ratio(num: &[f64], den: &[f64]) -> (f64, f64) {
    assert_eq!(num.len(), den.len());
    let g = num.len();
    let sn: f64 = num.iter().sum();
    let sd: f64 = den.iter().sum();
    let full = sn / sd;
    if g < 2 {
        return (full, f64::NAN);
    }
    let loo: Vec<f64> = (0..g).map(|i| (sn - num[i]) / (sd - den[i])).collect();
    let m = loo.iter().sum::<f64>() / g as f64;
    let var = loo.iter().map(|v| (v - m).powi(2)).sum::<f64>() * (g - 1) as f64 / g as f64;
    (full, var.sqrt())
}

/// Ratio of means `mean(num) / mean(den)` with a delta-method standard error,
/// for i.i.d. pairs.
pub fn ratio_of_means(num: &[f64], den: &[f64]) -> (f64, f64) {
    assert_eq!(num.len(), den.len());
    let n = num.len() as f64;
    let mn = num.iter().sum::<f64>() / n;
    let md = den.iter().sum::<f64>() / n;
    let r = mn / md;
    if num.len() < 2 {
        return (r, f64::NAN);
    }
    // residuals of the linearised estimator
    let var = num
        .iter()
        .zip(den)
        .map(|(a, b)| (a - r * b).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    (r, (var / n).sqrt() / md.abs())
}

/// Ordinary least-squares slope and its standard error.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    if x.len() < 3 {
        return (slope, 0.0);
    }
    let icept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - icept - slope * a).powi(2))
        .sum();
    (slope, (rss / (n - 2.0) / sxx).sqrt())
}
