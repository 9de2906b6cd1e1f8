//! Composite Simpson quadrature, both for callables and for equally spaced
//! samples with O(1) sliding-window queries.

/// Composite Simpson rule on `[a, b]` with `panels` subintervals
/// (rounded up to an even count, minimum 2).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = even_panels(panels);
    let h = (b - a) / n as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        let v = f(a + h * i as f64);
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    h / 3.0 * (f(a) + 4.0 * odd + 2.0 * even + f(b))
}

/// Smallest even panel count `>= n`, at least 2.
pub fn even_panels(n: usize) -> usize {
    let n = n.max(2);
    n + (n % 2)
}

/// Window integrals over equally spaced samples.
///
/// `window(i, m)` returns the Simpson integral over samples `i..=i + 2m`,
/// computed from parity-split prefix sums of the per-pair Simpson terms.
#[derive(Debug, Clone)]
pub struct SimpsonPrefix {
    h: f64,
    // prefix[j] = sum of pair terms starting at j, j-2, j-4, ... (same parity)
    prefix: Vec<f64>,
}

impl SimpsonPrefix {
    pub fn new(samples: &[f64], h: f64) -> Self {
        let pairs = samples.len().saturating_sub(2);
        let mut prefix = vec![0.0; pairs];
        for j in 0..pairs {
            let term = samples[j] + 4.0 * samples[j + 1] + samples[j + 2];
            prefix[j] = term + if j >= 2 { prefix[j - 2] } else { 0.0 };
        }
        Self { h, prefix }
    }

    /// Integral over `[i*h, (i + 2m)*h]`; panics if the window exceeds the samples.
    pub fn window(&self, i: usize, m: usize) -> f64 {
        if m == 0 {
            return 0.0;
        }
        let last = i + 2 * (m - 1);
        let upper = self.prefix[last];
        let lower = if i >= 2 { self.prefix[i - 2] } else { 0.0 };
        self.h / 3.0 * (upper - lower)
    }

    pub fn sample_count(&self) -> usize {
        self.prefix.len() + 2
    }
}
