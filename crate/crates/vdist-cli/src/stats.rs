//! Summary statistics for Monte Carlo sweeps: means with standard errors,
//! pooled errors, chunked bootstrap, and log–log slope fits.

use vdist_core::rng::RngStream;

/// Mean, standard error (Bessel-corrected sample std over √N), and count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

/// Summarize a sample series.
pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    assert!(n > 0, "cannot summarize an empty series");
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Summary { mean, stderr: 0.0, count: n };
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    Summary { mean, stderr: (var / n as f64).sqrt(), count: n }
}

/// Standard error of the difference of two independent means.
pub fn pooled_stderr(a: &Summary, b: &Summary) -> f64 {
    (a.stderr * a.stderr + b.stderr * b.stderr).sqrt()
}

/// Bootstrap standard error of the overall mean from a series of equal-size
/// chunk means: resample chunks with replacement and take the standard
/// deviation of the resampled grand means. Avoids retaining every raw
/// sample when only entrywise error bars are needed.
pub fn chunked_bootstrap_stderr(chunk_means: &[f64], resamples: usize, rng: &mut RngStream) -> f64 {
    let k = chunk_means.len();
    assert!(k >= 2, "bootstrap needs at least two chunks");
    let mut grand = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut acc = 0.0;
        for _ in 0..k {
            acc += chunk_means[rng.below(k)];
        }
        grand.push(acc / k as f64);
    }
    let mean = grand.iter().sum::<f64>() / resamples as f64;
    let var =
        grand.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / (resamples as f64 - 1.0);
    var.sqrt()
}

/// Ordinary least-squares slope and intercept of y against x.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "slope fit needs at least two points");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
