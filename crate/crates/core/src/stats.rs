//! Small Monte Carlo summaries shared by the experiments.

/// A sample mean together with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            mean: value,
            stderr: 0.0,
            samples: 0,
        }
    }

    /// Sample mean and `sd / sqrt(n)` with the unbiased sample variance.
    /// A single sample has zero standard error by convention.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                stderr: f64::NAN,
                samples: 0,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Estimate {
            mean,
            stderr,
            samples: n,
        }
    }

    /// Binomial proportion with `sqrt(q(1-q)/n)`.
    pub fn proportion(successes: usize, trials: usize) -> Self {
        let q = successes as f64 / trials as f64;
        Estimate {
            mean: q,
            stderr: (q * (1.0 - q) / trials as f64).sqrt(),
            samples: trials,
        }
    }

    /// `(mean - target) / stderr`; zero when both the deviation and the error vanish.
    pub fn z_score(&self, target: f64) -> f64 {
        let dev = self.mean - target;
        if dev == 0.0 {
            0.0
        } else {
            dev / self.stderr
        }
    }
}

pub fn combined_stderr(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Regression estimator of `E[y]` with a control `x` of known mean:
/// the sample mean of `y - c (x - mean_x)` with `c` the least-squares slope.
/// Falls back to the plain mean when `x` has no spread.
pub fn control_variate(ys: &[f64], xs: &[f64], mean_x: f64) -> Estimate {
    let n = ys.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let c = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let adjusted: Vec<f64> = ys.iter().zip(xs).map(|(y, x)| y - c * (x - mean_x)).collect();
    Estimate::from_samples(&adjusted)
}

/// Ordinary least squares `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    /// Root mean square residual.
    pub rms: f64,
}

impl LineFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / nf)
        .sqrt();
    Some(LineFit { intercept, slope, rms })
}
