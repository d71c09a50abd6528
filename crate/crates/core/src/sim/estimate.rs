use crate::error::{Error, Result};

/// Paths per reduction chunk; fixed so that results do not depend on threading.
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: u64,
    pub seed: u64,
}

impl McEstimate {
    /// Exact (zero-variance) value.
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            std_error: 0.0,
            n_paths: 0,
            seed: 0,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            mean: self.mean * factor,
            std_error: self.std_error * factor.abs(),
            ..*self
        }
    }

    /// `log(mean)` with its delta-method standard error.
    pub fn ln(&self) -> (f64, f64) {
        (self.mean.ln(), self.std_error / self.mean.abs())
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Welford) -> Welford {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Welford {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64,
        }
    }
}

fn chunk_stats(values: &[f64]) -> Vec<Welford> {
    let f = |c: &[f64]| {
        let mut w = Welford::default();
        c.iter().for_each(|&x| w.push(x));
        w
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        values.par_chunks(CHUNK).map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        values.chunks(CHUNK).map(f).collect()
    }
}

/// Mean and standard error of per-path values, merged chunk by chunk in path order.
pub fn estimate(values: &[f64], seed: u64) -> Result<McEstimate> {
    if values.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 paths, got {}",
            values.len()
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSample(i as u64));
    }
    let w = chunk_stats(values).into_iter().fold(Welford::default(), Welford::merge);
    let var = w.m2 / (w.n - 1) as f64;
    Ok(McEstimate {
        mean: w.mean,
        std_error: (var.max(0.0) / w.n as f64).sqrt(),
        n_paths: w.n,
        seed,
    })
}
