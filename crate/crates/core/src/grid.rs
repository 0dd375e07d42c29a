use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default endpoint truncation as a fraction of the horizon.
pub const DEFAULT_TRUNCATION: f64 = 1e-6;

/// Strictly increasing evaluation times on `[0, T - ε]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
    horizon: f64,
    truncation_eps: f64,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>, horizon: f64, truncation_eps: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::domain("TimeGrid", format!("horizon T = {horizon} must be finite and > 0")));
        }
        if !(truncation_eps.is_finite() && truncation_eps > 0.0 && truncation_eps < horizon) {
            return Err(Error::domain(
                "TimeGrid",
                format!("truncation eps = {truncation_eps} must lie in (0, T)"),
            ));
        }
        if times.is_empty() {
            return Err(Error::domain("TimeGrid", "grid has no points"));
        }
        if !(times[0] >= 0.0) {
            return Err(Error::domain("TimeGrid", format!("first time {} is negative", times[0])));
        }
        if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::domain(
                "TimeGrid",
                format!("times not strictly increasing at {} -> {}", w[0], w[1]),
            ));
        }
        let last = *times.last().expect("non-empty");
        if !(last <= horizon - truncation_eps) {
            return Err(Error::domain(
                "TimeGrid",
                format!("last time {last} is closer than eps = {truncation_eps} to T = {horizon}"),
            ));
        }
        Ok(TimeGrid {
            times,
            horizon,
            truncation_eps,
        })
    }

    /// `steps + 1` equally spaced points from 0 to `T - ε`.
    pub fn uniform(horizon: f64, steps: usize, truncation_eps: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::domain("TimeGrid::uniform", "steps must be >= 1"));
        }
        let end = horizon - truncation_eps;
        let times = (0..=steps)
            .map(|k| if k == steps { end } else { end * k as f64 / steps as f64 })
            .collect();
        TimeGrid::new(times, horizon, truncation_eps)
    }

    /// Uniform points `k T / steps` (k < steps) refined geometrically towards the
    /// horizon with `per_decade` points per factor of ten in `T - t`, ending at `T - ε`.
    pub fn graded(horizon: f64, steps: usize, per_decade: usize, truncation_eps: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::domain("TimeGrid::graded", "steps must be >= 1"));
        }
        let h = horizon / steps as f64;
        let mut times: Vec<f64> = (0..steps).map(|k| k as f64 * h).collect();
        if per_decade > 0 {
            let mut j = 1usize;
            loop {
                let gap = h * 10f64.powf(-(j as f64) / per_decade as f64);
                if gap <= truncation_eps {
                    break;
                }
                times.push(horizon - gap);
                j += 1;
            }
        }
        times.push(horizon - truncation_eps);
        TimeGrid::from_unsorted(times, horizon, truncation_eps)
    }

    /// Builds a grid from arbitrary points, sorting and merging near-duplicates.
    pub fn from_unsorted(mut times: Vec<f64>, horizon: f64, truncation_eps: f64) -> Result<Self> {
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::domain("TimeGrid", "non-finite time"));
        }
        times.sort_by(f64::total_cmp);
        let tol = 1e-13 * horizon;
        let mut merged: Vec<f64> = Vec::with_capacity(times.len());
        for t in times {
            match merged.last() {
                Some(&last) if t - last <= tol => {}
                _ => merged.push(t),
            }
        }
        TimeGrid::new(merged, horizon, truncation_eps)
    }

    /// The same grid with additional points merged in.
    pub fn with_points(&self, extra: &[f64]) -> Result<Self> {
        let mut times = self.times.clone();
        times.extend_from_slice(extra);
        TimeGrid::from_unsorted(times, self.horizon, self.truncation_eps)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn truncation_eps(&self) -> f64 {
        self.truncation_eps
    }

    pub fn last(&self) -> f64 {
        *self.times.last().expect("grid is non-empty")
    }

    /// Index of the grid point nearest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let p = self.times.partition_point(|&x| x < t);
        if p == 0 {
            return 0;
        }
        if p == self.times.len() {
            return p - 1;
        }
        if (self.times[p] - t).abs() < (t - self.times[p - 1]).abs() {
            p
        } else {
            p - 1
        }
    }

    /// Index of a grid point equal to `t` up to `1e-12 T`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let i = self.nearest_index(t);
        ((self.times[i] - t).abs() <= 1e-12 * self.horizon).then_some(i)
    }

    pub fn max_step(&self) -> f64 {
        self.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(vec![0.0, 0.5, 0.5], 1.0, 1e-6).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0], 1.0, 1e-6).is_err());
        assert!(TimeGrid::new(vec![-0.1, 0.5], 1.0, 1e-6).is_err());
        assert!(TimeGrid::new(vec![], 1.0, 1e-6).is_err());
        assert!(TimeGrid::new(vec![0.0], 1.0, 0.0).is_err());
    }

    #[test]
    fn uniform_ends_at_truncation() {
        let g = TimeGrid::uniform(2.0, 4, 1e-3).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g.times()[0], 0.0);
        assert_eq!(g.last(), 2.0 - 1e-3);
    }

    #[test]
    fn graded_reaches_close_to_horizon() {
        let g = TimeGrid::graded(1.0, 10, 4, 1e-6).unwrap();
        assert_eq!(g.last(), 1.0 - 1e-6);
        assert!(g.index_of(0.5).is_some());
        assert!(g.times().iter().any(|&t| (1.0 - t - 1e-3).abs() < 1e-9));
    }

    #[test]
    fn nearest_index_picks_closest() {
        let g = TimeGrid::new(vec![0.0, 0.1, 0.4], 1.0, 0.5).unwrap();
        assert_eq!(g.nearest_index(0.26), 2);
        assert_eq!(g.nearest_index(0.24), 1);
        assert_eq!(g.nearest_index(5.0), 2);
        assert_eq!(g.index_of(0.1), Some(1));
        assert_eq!(g.index_of(0.11), None);
    }
}
