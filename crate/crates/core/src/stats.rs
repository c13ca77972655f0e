//! Compensated summation and sample moments.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.carry);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Compensated sum of a slice.
pub fn sum(values: &[f64]) -> f64 {
    let mut s = CompensatedSum::new();
    for &v in values {
        s.add(v);
    }
    s.value()
}

pub fn mean(values: &[f64]) -> f64 {
    sum(values) / values.len() as f64
}

/// Sample summary of a scalar random variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl Moments {
    /// Two-pass moments with compensated sums.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = mean(values);
        let (mut m2, mut m3, mut m4) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
        for &v in values {
            let d = v - mean;
            let d2 = d * d;
            m2.add(d2);
            m3.add(d2 * d);
            m4.add(d2 * d2);
        }
        let nf = n as f64;
        let (c2, c3, c4) = (m2.value() / nf, m3.value() / nf, m4.value() / nf);
        Moments {
            n,
            mean,
            variance: if n > 1 { m2.value() / (nf - 1.0) } else { 0.0 },
            skewness: c3 / c2.powf(1.5),
            excess_kurtosis: c4 / (c2 * c2) - 3.0,
        }
    }

    /// Standard error of the mean.
    pub fn mean_stderr(&self) -> f64 {
        (self.variance / self.n as f64).sqrt()
    }

    /// Standard error of the sample variance under a Gaussian law.
    pub fn variance_stderr(&self) -> f64 {
        self.variance * (2.0 / (self.n as f64 - 1.0)).sqrt()
    }

    /// Standard error of the sample skewness under a Gaussian law.
    pub fn skewness_stderr(&self) -> f64 {
        (6.0 / self.n as f64).sqrt()
    }

    /// Standard error of the sample excess kurtosis under a Gaussian law.
    pub fn kurtosis_stderr(&self) -> f64 {
        (24.0 / self.n as f64).sqrt()
    }
}
