//! Dense row-major 2D grid of reals used for scalp maps.

use std::ops::{Index, IndexMut};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    /// Builds a grid from row-major values. Panics if the length does not match.
    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), height * width, "grid data length mismatch");
        Self {
            height,
            width,
            data,
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Value at a signed position; anything outside the grid reads as 0.
    pub fn get_or_zero(&self, row: isize, col: isize) -> f64 {
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            0.0
        } else {
            self.data[row as usize * self.width + col as usize]
        }
    }

    /// Left-right mirror.
    pub fn fliplr(&self) -> Self {
        Self::from_fn(self.height, self.width, |r, c| self[(r, self.width - 1 - c)])
    }

    /// Top-bottom mirror.
    pub fn flipud(&self) -> Self {
        Self::from_fn(self.height, self.width, |r, c| self[(self.height - 1 - r, c)])
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

impl Index<(usize, usize)> for Grid {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.height && c < self.width);
        &self.data[r * self.width + c]
    }
}

impl IndexMut<(usize, usize)> for Grid {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.height && c < self.width);
        &mut self.data[r * self.width + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flips_are_involutions() {
        let g = Grid::from_fn(3, 4, |r, c| (r * 4 + c) as f64);
        assert_eq!(g.fliplr().fliplr(), g);
        assert_eq!(g.flipud().flipud(), g);
        assert_eq!(g.fliplr()[(0, 0)], 3.0);
        assert_eq!(g.flipud()[(0, 0)], 8.0);
    }

    #[test]
    fn out_of_range_reads_zero() {
        let g = Grid::from_vec(1, 1, vec![2.5]);
        assert_eq!(g.get_or_zero(0, 0), 2.5);
        assert_eq!(g.get_or_zero(-1, 0), 0.0);
        assert_eq!(g.get_or_zero(0, 1), 0.0);
    }
}
