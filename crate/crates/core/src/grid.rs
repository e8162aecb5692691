//! Rectangular regions and regular evaluation grids on the ground plane.

use crate::channel::UserPosition;
use crate::error::{Error, Result};

/// Axis-aligned rectangle `[x_min, x_max] x [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub const fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_max < self.x_min || self.y_max < self.y_min {
            return Err(Error::invalid(
                "bounds",
                format!("degenerate rectangle {self:?}"),
            ));
        }
        Ok(())
    }

    pub fn contains(&self, u: &UserPosition) -> bool {
        (self.x_min..=self.x_max).contains(&u.x) && (self.y_min..=self.y_max).contains(&u.y)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self::new(
            self.x_min + dx,
            self.x_max + dx,
            self.y_min + dy,
            self.y_max + dy,
        )
    }
}

/// Regular grid of `nx * ny` nodes at `(x0 + i * spacing, y0 + j * spacing)`.
///
/// Nodes are numbered row-major with y as the row: `index = j * nx + i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x0: f64,
    pub y0: f64,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
}

// Slack when counting how many steps fit between two endpoints, so that
// e.g. 6.0 / 0.25 does not lose the last node to rounding.
const FIT_SLACK: f64 = 1e-9;

impl GridSpec {
    pub fn new(x0: f64, y0: f64, spacing: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::invalid(
                "grid_spacing_m",
                format!("must be positive, got {spacing}"),
            ));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::invalid(
                "grid",
                "grid must contain at least one node",
            ));
        }
        if !(x0.is_finite() && y0.is_finite()) {
            return Err(Error::invalid("grid", "origin must be finite"));
        }
        Ok(Self {
            x0,
            y0,
            spacing,
            nx,
            ny,
        })
    }

    /// Nodes covering `bounds` including both edges where they fall on the
    /// lattice; the lattice starts at the lower-left corner.
    pub fn covering(bounds: &Bounds, spacing: f64) -> Result<Self> {
        bounds.validate()?;
        let steps = |span: f64| (span / spacing + FIT_SLACK).floor() as usize + 1;
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::invalid(
                "grid_spacing_m",
                format!("must be positive, got {spacing}"),
            ));
        }
        Self::new(
            bounds.x_min,
            bounds.y_min,
            spacing,
            steps(bounds.x_max - bounds.x_min),
            steps(bounds.y_max - bounds.y_min),
        )
    }

    /// Centres of the `spacing`-sized cells tiling `bounds`.
    pub fn cell_centers(bounds: &Bounds, spacing: f64) -> Result<Self> {
        bounds.validate()?;
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::invalid(
                "grid_spacing_m",
                format!("must be positive, got {spacing}"),
            ));
        }
        let cells = |span: f64| ((span / spacing + FIT_SLACK).floor() as usize).max(1);
        Self::new(
            bounds.x_min + spacing / 2.0,
            bounds.y_min + spacing / 2.0,
            spacing,
            cells(bounds.x_max - bounds.x_min),
            cells(bounds.y_max - bounds.y_min),
        )
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, index: usize) -> UserPosition {
        let (i, j) = (index % self.nx, index / self.nx);
        UserPosition::new(
            self.x0 + i as f64 * self.spacing,
            self.y0 + j as f64 * self.spacing,
        )
    }

    pub fn x_coord(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.spacing
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = UserPosition> + '_ {
        (0..self.len()).map(move |k| self.node(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_includes_both_edges() {
        let g = GridSpec::covering(&Bounds::new(0.0, 6.0, 0.0, 10.0), 0.25).unwrap();
        assert_eq!((g.nx, g.ny), (25, 41));
        let last = g.node(g.len() - 1);
        assert!((last.x - 6.0).abs() < 1e-12 && (last.y - 10.0).abs() < 1e-12);
    }

    #[test]
    fn cell_centers_stay_inside() {
        let b = Bounds::new(0.0, 6.0, 0.0, 10.0);
        let g = GridSpec::cell_centers(&b, 0.25).unwrap();
        assert_eq!((g.nx, g.ny), (24, 40));
        assert_eq!(g.node(0), UserPosition::new(0.125, 0.125));
        assert!(g.nodes().all(|u| b.contains(&u)));
    }

    #[test]
    fn row_major_ordering() {
        let g = GridSpec::new(0.0, 0.0, 1.0, 3, 2).unwrap();
        assert_eq!(g.node(1), UserPosition::new(1.0, 0.0));
        assert_eq!(g.node(3), UserPosition::new(0.0, 1.0));
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(GridSpec::new(0.0, 0.0, 0.0, 1, 1).is_err());
        assert!(GridSpec::new(0.0, 0.0, 1.0, 0, 1).is_err());
        assert!(GridSpec::covering(&Bounds::new(1.0, 0.0, 0.0, 1.0), 0.1).is_err());
        let single = GridSpec::covering(&Bounds::new(1.0, 1.0, 2.0, 2.0), 0.1).unwrap();
        assert_eq!(single.len(), 1);
    }
}
