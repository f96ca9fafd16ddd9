//! Piecewise-cubic Hermite interpolation for many channels sharing one grid.
//! Slopes are either shape-preserving (Fritsch–Carlson with the three-point
//! endpoint rule) or plain three-point centered differences.

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slopes {
    Monotone,
    Centered,
}

#[derive(Clone, Debug)]
pub struct Hermite {
    x: Vec<f64>,
    channels: usize,
    // node-major: y[node * channels + ch]
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Hermite {
    pub fn monotone_scalar(x: &[f64], y: &[f64]) -> Result<Self> {
        Self::new(x.to_vec(), 1, y.to_vec(), Slopes::Monotone)
    }

    /// Shape-preserving slopes; `y` is node-major with `channels` values per node.
    pub fn monotone(x: Vec<f64>, channels: usize, y: Vec<f64>) -> Result<Self> {
        Self::new(x, channels, y, Slopes::Monotone)
    }

    /// Three-point centered slopes (third-order accurate for smooth data, no limiting).
    pub fn centered(x: Vec<f64>, channels: usize, y: Vec<f64>) -> Result<Self> {
        Self::new(x, channels, y, Slopes::Centered)
    }

    fn new(x: Vec<f64>, channels: usize, y: Vec<f64>, slopes: Slopes) -> Result<Self> {
        let n = x.len();
        if n < 2 {
            return Err(invalid("interpolation needs at least two nodes"));
        }
        if channels == 0 || y.len() != n * channels {
            return Err(invalid("interpolation data has the wrong shape"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("interpolation nodes must be strictly increasing"));
        }
        let mut d = vec![0.0; y.len()];
        for ch in 0..channels {
            let at = |k: usize| y[k * channels + ch];
            let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
            let delta: Vec<f64> = (0..n - 1).map(|k| (at(k + 1) - at(k)) / h[k]).collect();
            if n == 2 {
                d[ch] = delta[0];
                d[channels + ch] = delta[0];
                continue;
            }
            if slopes == Slopes::Centered {
                for k in 1..n - 1 {
                    d[k * channels + ch] = (h[k - 1] * delta[k] + h[k] * delta[k - 1])
                        / (h[k - 1] + h[k]);
                }
                d[ch] = ((2.0 * h[0] + h[1]) * delta[0] - h[0] * delta[1]) / (h[0] + h[1]);
                d[(n - 1) * channels + ch] = ((2.0 * h[n - 2] + h[n - 3]) * delta[n - 2]
                    - h[n - 2] * delta[n - 3])
                    / (h[n - 2] + h[n - 3]);
                continue;
            }
            for k in 1..n - 1 {
                let (d0, d1) = (delta[k - 1], delta[k]);
                d[k * channels + ch] = if d0 * d1 <= 0.0 {
                    0.0
                } else {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    (w1 + w2) / (w1 / d0 + w2 / d1)
                };
            }
            d[ch] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[(n - 1) * channels + ch] =
                end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self { x, channels, y, d })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    fn locate(&self, s: f64) -> usize {
        let k = self.x.partition_point(|&xk| xk <= s);
        k.saturating_sub(1).min(self.x.len() - 2)
    }

    /// Values at `s` (clamped to the node range) written into `out`.
    pub fn eval_into(&self, s: f64, out: &mut [f64]) {
        let s = s.clamp(self.x[0], self.x[self.x.len() - 1]);
        let k = self.locate(s);
        let h = self.x[k + 1] - self.x[k];
        let t = (s - self.x[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let m = self.channels;
        for ch in 0..m {
            let (y0, y1) = (self.y[k * m + ch], self.y[(k + 1) * m + ch]);
            let (d0, d1) = (self.d[k * m + ch], self.d[(k + 1) * m + ch]);
            out[ch] = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        }
        // exact at nodes
        if t == 0.0 {
            out.copy_from_slice(&self.y[k * m..(k + 1) * m]);
        } else if t == 1.0 {
            out.copy_from_slice(&self.y[(k + 1) * m..(k + 2) * m]);
        }
    }

    /// First derivatives at `s`.
    pub fn deriv_into(&self, s: f64, out: &mut [f64]) {
        let s = s.clamp(self.x[0], self.x[self.x.len() - 1]);
        let k = self.locate(s);
        let h = self.x[k + 1] - self.x[k];
        let t = (s - self.x[k]) / h;
        let t2 = t * t;
        let dh00 = (6.0 * t2 - 6.0 * t) / h;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = (-6.0 * t2 + 6.0 * t) / h;
        let dh11 = 3.0 * t2 - 2.0 * t;
        let m = self.channels;
        for ch in 0..m {
            let (y0, y1) = (self.y[k * m + ch], self.y[(k + 1) * m + ch]);
            let (d0, d1) = (self.d[k * m + ch], self.d[(k + 1) * m + ch]);
            out[ch] = dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1;
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        let mut v = [0.0];
        self.eval_into(s, &mut v);
        v[0]
    }

    pub fn deriv(&self, s: f64) -> f64 {
        let mut v = [0.0];
        self.deriv_into(s, &mut v);
        v[0]
    }
}

fn end_slope(h0: f64, h1: f64, delta0: f64, delta1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * delta0 - h0 * delta1) / (h0 + h1);
    if d.signum() != delta0.signum() || delta0 == 0.0 {
        0.0
    } else if delta0.signum() != delta1.signum() && d.abs() > 3.0 * delta0.abs() {
        3.0 * delta0
    } else {
        d
    }
}
