use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest grid accepted by [`make_grid`].
pub const MIN_POINTS: usize = 16;

/// Uniform angular-frequency grid, symmetric about `center`.
///
/// All frequencies are in rad/fs. Point `i` sits at
/// `center + (i - (n_points - 1) / 2) * step`, so points `i` and
/// `n_points - 1 - i` are exact mirror images about the center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    center: f64,
    span: f64,
    n_points: usize,
    step: f64,
}

pub fn make_grid(center: f64, span: f64, n_points: usize) -> Result<FrequencyGrid> {
    if !(span > 0.0) || !span.is_finite() {
        return Err(Error::InvalidGrid(format!("span must be positive, got {span}")));
    }
    if !center.is_finite() {
        return Err(Error::InvalidGrid(format!("center must be finite, got {center}")));
    }
    if n_points < MIN_POINTS {
        return Err(Error::InvalidGrid(format!(
            "need at least {MIN_POINTS} points, got {n_points}"
        )));
    }
    Ok(FrequencyGrid {
        center,
        span,
        n_points,
        step: span / (n_points - 1) as f64,
    })
}

impl FrequencyGrid {
    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Detuning of point `i` from the center. Mirror points give exactly
    /// opposite values.
    pub fn offset(&self, i: usize) -> f64 {
        (i as f64 - (self.n_points - 1) as f64 / 2.0) * self.step
    }

    pub fn omega(&self, i: usize) -> f64 {
        self.center + self.offset(i)
    }

    pub fn mirror(&self, i: usize) -> usize {
        self.n_points - 1 - i
    }

    pub fn omegas(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.omega(i))
    }

    pub fn offsets(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.offset(i))
    }

    pub fn first(&self) -> f64 {
        self.omega(0)
    }

    pub fn last(&self) -> f64 {
        self.omega(self.n_points - 1)
    }

    /// Grid of all pairwise sums `omega_i + omega_j`: `2n - 1` points with the
    /// same step, centered at twice this grid's center.
    pub fn sum_grid(&self) -> FrequencyGrid {
        FrequencyGrid {
            center: 2.0 * self.center,
            span: 2.0 * self.span,
            n_points: 2 * self.n_points - 1,
            step: self.step,
        }
    }

    pub(crate) fn ensure_same(&self, other: &FrequencyGrid, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: ({}, {}, {}) vs ({}, {}, {})",
                self.center, self.span, self.n_points, other.center, other.span, other.n_points
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_of_odd_grid_is_center() {
        let g = make_grid(2.3549, 1.0, 17).unwrap();
        assert_eq!(g.step(), 0.0625);
        assert_eq!(g.omega(8), 2.3549);
        assert_eq!(g.offset(8), 0.0);
    }

    #[test]
    fn even_grid_mirrors_about_center() {
        let c = 2.1;
        let g = make_grid(c, 0.7, 16).unwrap();
        assert_eq!(g.offset(0), -g.offset(15));
        assert!(((g.omega(0) + g.omega(15)) / 2.0 - c).abs() < 1e-15);
        for i in 0..16 {
            assert_eq!(g.offset(i), -g.offset(g.mirror(i)));
        }
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(matches!(make_grid(1.0, 0.0, 16), Err(Error::InvalidGrid(_))));
        assert!(matches!(make_grid(1.0, -1.0, 16), Err(Error::InvalidGrid(_))));
        assert!(matches!(make_grid(1.0, 1.0, 15), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn sum_grid_contains_all_pair_sums() {
        let g = make_grid(2.0, 1.0, 16).unwrap();
        let s = g.sum_grid();
        for i in 0..16 {
            for j in 0..16 {
                assert!((g.omega(i) + g.omega(j) - s.omega(i + j)).abs() < 1e-12);
            }
        }
    }
}
