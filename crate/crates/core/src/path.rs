//! The mean-field process `beta_t` sampled on a uniform time grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `beta_t` on the grid `t_k = k * dt`, `k = 0..len`. Between samples the
/// path is linear; past the last sample it stays constant (stationary tail).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldPath {
    dt: f64,
    values: Vec<f64>,
}

impl MeanFieldPath {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
        }
        if values.is_empty() {
            return Err(Error::invalid("beta_path", "needs at least one sample"));
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidBeta { index, value });
            }
        }
        Ok(Self { dt, values })
    }

    /// Constant path on `[0, t_end]`.
    pub fn constant(value: f64, dt: f64, t_end: f64) -> Result<Self> {
        let steps = Self::steps_for(dt, t_end)?;
        Self::new(dt, vec![value; steps + 1])
    }

    /// Samples `f(t_k)` on `[0, t_end]`.
    pub fn from_fn(dt: f64, t_end: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let steps = Self::steps_for(dt, t_end)?;
        Self::new(dt, (0..=steps).map(|k| f(k as f64 * dt)).collect())
    }

    fn steps_for(dt: f64, t_end: f64) -> Result<usize> {
        if !(dt > 0.0) || !(t_end >= 0.0) || !t_end.is_finite() {
            return Err(Error::invalid("t_end", format!("need dt > 0 and t_end >= 0, got {dt}, {t_end}")));
        }
        Ok((t_end / dt - 1e-9).ceil().max(0.0) as usize)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| k as f64 * self.dt)
    }

    pub fn at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.values[0];
        }
        let x = t / self.dt;
        let k = x.floor() as usize;
        if k + 1 >= self.values.len() {
            return *self.values.last().unwrap();
        }
        let w = x - k as f64;
        (1.0 - w) * self.values[k] + w * self.values[k + 1]
    }

    pub fn last(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Largest sample on the grid at or after `t`, including the tail.
    pub fn max_from(&self, t: f64) -> f64 {
        let k = if t <= 0.0 { 0 } else { ((t / self.dt).floor() as usize).min(self.values.len() - 1) };
        self.values[k..].iter().cloned().fold(0.0, f64::max)
    }

    /// True when the path is constant (to `tol`) on `[t, infinity)`.
    pub fn is_constant_from(&self, t: f64, tol: f64) -> bool {
        let k = if t <= 0.0 { 0 } else { ((t / self.dt).floor() as usize).min(self.values.len() - 1) };
        let first = self.values[k];
        self.values[k..].iter().all(|v| (v - first).abs() <= tol)
    }

    /// Sup-norm distance; both paths must share the grid.
    pub fn sup_distance(&self, other: &MeanFieldPath) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    pub fn check_same_grid(&self, other: &MeanFieldPath) -> Result<()> {
        if self.values.len() != other.values.len() || (self.dt - other.dt).abs() > 1e-12 * self.dt {
            return Err(Error::GridMismatch(format!(
                "paths differ: {} samples at dt {} vs {} samples at dt {}",
                self.values.len(),
                self.dt,
                other.values.len(),
                other.dt
            )));
        }
        Ok(())
    }

    /// `(1 - w) * self + w * other`, clamped into `[0, 1]`.
    pub fn mix(&self, other: &MeanFieldPath, w: f64) -> Result<MeanFieldPath> {
        self.check_same_grid(other)?;
        let values =
            self.values.iter().zip(&other.values).map(|(a, b)| ((1.0 - w) * a + w * b).clamp(0.0, 1.0)).collect();
        Ok(MeanFieldPath { dt: self.dt, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_and_tail() {
        let p = MeanFieldPath::new(0.5, vec![0.0, 1.0, 0.5]).unwrap();
        assert_eq!(p.t_end(), 1.0);
        assert_eq!(p.at(-1.0), 0.0);
        assert_eq!(p.at(0.25), 0.5);
        assert_eq!(p.at(0.75), 0.75);
        assert_eq!(p.at(10.0), 0.5);
        assert_eq!(p.max(), 1.0);
        assert_eq!(p.max_from(0.6), 1.0);
        assert_eq!(p.max_from(1.0), 0.5);
        assert!(p.is_constant_from(1.0, 0.0));
        assert!(!p.is_constant_from(0.0, 0.0));
    }

    #[test]
    fn rejects_bad_samples() {
        assert!(matches!(MeanFieldPath::new(0.1, vec![0.1, f64::NAN]), Err(Error::InvalidBeta { index: 1, .. })));
        assert!(MeanFieldPath::new(0.1, vec![1.5]).is_err());
        assert!(MeanFieldPath::new(0.0, vec![0.5]).is_err());
        assert!(MeanFieldPath::new(0.1, vec![]).is_err());
    }

    #[test]
    fn constant_grid_covers_horizon() {
        let p = MeanFieldPath::constant(0.2, 0.05, 1.0).unwrap();
        assert_eq!(p.len(), 21);
        assert!((p.t_end() - 1.0).abs() < 1e-12);
        let q = MeanFieldPath::constant(0.4, 0.05, 1.0).unwrap();
        assert!((p.sup_distance(&q).unwrap() - 0.2).abs() < 1e-15);
        let m = p.mix(&q, 0.5).unwrap();
        assert!((m.at(0.3) - 0.3).abs() < 1e-15);
        let short = MeanFieldPath::constant(0.4, 0.05, 0.5).unwrap();
        assert!(p.sup_distance(&short).is_err());
    }
}
