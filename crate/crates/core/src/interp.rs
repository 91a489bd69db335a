//! Filling of unsampled grid cells.
//!
//! The Bicubic-EEG scheme fills every empty cell from its 3x3 block. Empty
//! cells inside the block are first completed with the mean of their own
//! sampled 3x3 neighbours; the block is then combined with separable cubic
//! convolution weights `W(dr) * W(dc)`. Neighbour offsets are measured in
//! units of `spacing` so that the kernel does not collapse to the center tap
//! at integer offsets, and the weighted sum is divided by the total weight
//! of the cells that carry a value.
//!
//! All reads go to the input grid; nothing written during a pass is read
//! back in the same pass. Electrode cells are never modified.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;
use crate::montage::FrameGrid;

#[derive(Debug, Error, PartialEq)]
pub enum InterpError {
    #[error("kernel coefficient a = {0} outside [-1, 0]")]
    BadCoefficient(f64),
    #[error("neighbour spacing {0} outside (0, 2)")]
    BadSpacing(f64),
    #[error("unknown interpolation mode `{0}` (expected none, bilinear or bicubic-eeg)")]
    UnknownMode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InterpParams {
    /// Cubic convolution shape coefficient.
    pub a: f64,
    /// Distance between neighbouring cells in kernel units.
    pub spacing: f64,
    /// Divide by the weight of participating cells.
    pub normalize: bool,
}

impl Default for InterpParams {
    fn default() -> Self {
        Self {
            a: -0.5,
            spacing: 0.5,
            normalize: true,
        }
    }
}

impl InterpParams {
    pub fn validate(&self) -> Result<(), InterpError> {
        if !(-1.0..=0.0).contains(&self.a) {
            return Err(InterpError::BadCoefficient(self.a));
        }
        if !(self.spacing > 0.0 && self.spacing < 2.0) {
            return Err(InterpError::BadSpacing(self.spacing));
        }
        Ok(())
    }
}

/// Cubic convolution kernel.
pub fn kernel_w(x: f64, params: &InterpParams) -> f64 {
    let a = params.a;
    let x = x.abs();
    if x <= 1.0 {
        (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0
    } else if x < 2.0 {
        a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InterpMode {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "bilinear")]
    Bilinear,
    #[default]
    #[serde(rename = "bicubic-eeg")]
    BicubicEeg,
}

impl InterpMode {
    pub const ALL: [InterpMode; 3] = [InterpMode::None, InterpMode::Bilinear, InterpMode::BicubicEeg];

    pub fn as_str(&self) -> &'static str {
        match self {
            InterpMode::None => "none",
            InterpMode::Bilinear => "bilinear",
            InterpMode::BicubicEeg => "bicubic-eeg",
        }
    }

    pub fn apply(&self, grid: &FrameGrid, params: &InterpParams) -> FrameGrid {
        match self {
            InterpMode::None => grid.clone(),
            InterpMode::Bilinear => bilinear_fill(grid),
            InterpMode::BicubicEeg => interpolate_grid(grid, params),
        }
    }
}

impl fmt::Display for InterpMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InterpMode {
    type Err = InterpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(InterpMode::None),
            "bilinear" => Ok(InterpMode::Bilinear),
            "bicubic-eeg" | "bicubic" => Ok(InterpMode::BicubicEeg),
            other => Err(InterpError::UnknownMode(other.to_string())),
        }
    }
}

/// A cell carries a value if it is an electrode or already non-zero.
/// Positions outside the grid never carry a value.
fn sampled(grid: &FrameGrid, row: isize, col: isize) -> Option<f64> {
    let (h, w) = (grid.height() as isize, grid.width() as isize);
    if row < 0 || col < 0 || row >= h || col >= w {
        return None;
    }
    let (r, c) = (row as usize, col as usize);
    let v = grid.values[(r, c)];
    if grid.is_electrode(r, c) || v != 0.0 {
        Some(v)
    } else {
        None
    }
}

/// Value of an in-grid cell after neighbour completion, or `None` when the
/// cell is empty and its whole 3x3 neighbourhood is empty too.
fn completed(grid: &FrameGrid, row: isize, col: isize) -> Option<f64> {
    if let Some(v) = sampled(grid, row, col) {
        return Some(v);
    }
    let (h, w) = (grid.height() as isize, grid.width() as isize);
    if row < 0 || col < 0 || row >= h || col >= w {
        return None;
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for dr in -1..=1 {
        for dc in -1..=1 {
            if let Some(v) = sampled(grid, row + dr, col + dc) {
                sum += v;
                count += 1;
            }
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// Neighbour completion for a single cell: the cell's own value when it is
/// sampled, otherwise the mean of the sampled cells around it (0 if none).
pub fn complete_neighbor(grid: &FrameGrid, pos: (usize, usize)) -> f64 {
    completed(grid, pos.0 as isize, pos.1 as isize).unwrap_or(0.0)
}

/// Interpolated value for one empty cell, or `None` when nothing in its
/// extended neighbourhood is sampled.
pub fn interpolate_cell(grid: &FrameGrid, pos: (usize, usize), params: &InterpParams) -> Option<f64> {
    let (row, col) = (pos.0 as isize, pos.1 as isize);
    let mut acc = 0.0;
    let mut weight = 0.0;
    let mut any = false;
    for dr in -1..=1isize {
        let wr = kernel_w(dr as f64 * params.spacing, params);
        for dc in -1..=1isize {
            if let Some(v) = completed(grid, row + dr, col + dc) {
                let wc = kernel_w(dc as f64 * params.spacing, params);
                acc += v * wr * wc;
                weight += wr * wc;
                any = true;
            }
        }
    }
    if !any {
        return None;
    }
    if params.normalize {
        // Offsets that cancel the weight exactly cannot be normalized.
        (weight != 0.0).then(|| acc / weight)
    } else {
        Some(acc)
    }
}

/// Fills every empty cell of `grid` with the Bicubic-EEG estimate.
pub fn interpolate_grid(grid: &FrameGrid, params: &InterpParams) -> FrameGrid {
    let (h, w) = (grid.height(), grid.width());
    let mut values = grid.values.clone();
    for r in 0..h {
        for c in 0..w {
            if sampled(grid, r as isize, c as isize).is_some() {
                continue;
            }
            if let Some(v) = interpolate_cell(grid, (r, c), params) {
                values[(r, c)] = v;
            }
        }
    }
    FrameGrid {
        values,
        mask: grid.mask.clone(),
    }
}

/// Baseline filler: each empty cell takes the mean of its sampled
/// up/down/left/right neighbours.
pub fn bilinear_fill(grid: &FrameGrid) -> FrameGrid {
    let (h, w) = (grid.height(), grid.width());
    let mut values: Grid = grid.values.clone();
    for r in 0..h {
        for c in 0..w {
            let (ri, ci) = (r as isize, c as isize);
            if sampled(grid, ri, ci).is_some() {
                continue;
            }
            let neighbours = [(ri - 1, ci), (ri + 1, ci), (ri, ci - 1), (ri, ci + 1)];
            let (sum, n) = neighbours
                .iter()
                .filter_map(|&(nr, nc)| sampled(grid, nr, nc))
                .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            if n > 0 {
                values[(r, c)] = sum / n as f64;
            }
        }
    }
    FrameGrid {
        values,
        mask: grid.mask.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(h: usize, w: usize, cells: &[((usize, usize), f64)]) -> FrameGrid {
        let mut values = Grid::zeros(h, w);
        let mut mask = vec![false; h * w];
        for &((r, c), v) in cells {
            values[(r, c)] = v;
            mask[r * w + c] = true;
        }
        FrameGrid { values, mask }
    }

    #[test]
    fn kernel_reference_values() {
        let p = InterpParams::default();
        assert_eq!(kernel_w(0.0, &p), 1.0);
        assert!((kernel_w(1.0, &p) - 0.0).abs() <= 1e-15);
        assert!((kernel_w(0.5, &p) - 0.5625).abs() <= 1e-15);
        assert!((kernel_w(1.5, &p) + 0.0625).abs() <= 1e-15);
        assert!((kernel_w(-1.5, &p) + 0.0625).abs() <= 1e-15);
        assert_eq!(kernel_w(2.0, &p), 0.0);
        assert_eq!(kernel_w(2.7, &p), 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(InterpParams::default().validate().is_ok());
        let bad_a = InterpParams { a: 0.5, ..Default::default() };
        assert_eq!(bad_a.validate(), Err(InterpError::BadCoefficient(0.5)));
        let bad_s = InterpParams { spacing: 2.0, ..Default::default() };
        assert_eq!(bad_s.validate(), Err(InterpError::BadSpacing(2.0)));
        let bad_s = InterpParams { spacing: 0.0, ..Default::default() };
        assert!(bad_s.validate().is_err());
    }

    #[test]
    fn complete_neighbor_cases() {
        let g = frame(3, 3, &[((1, 1), 7.5)]);
        assert_eq!(complete_neighbor(&g, (1, 1)), 7.5);

        let g = frame(3, 3, &[((0, 0), 2.0), ((0, 1), 4.0)]);
        assert_eq!(complete_neighbor(&g, (1, 1)), 3.0);

        let g = frame(5, 5, &[((0, 0), 2.0)]);
        assert_eq!(complete_neighbor(&g, (3, 3)), 0.0);
    }

    #[test]
    fn electrode_reading_zero_counts_as_sample() {
        let g = frame(3, 3, &[((0, 0), 0.0), ((0, 1), 6.0)]);
        assert_eq!(complete_neighbor(&g, (1, 1)), 3.0);
    }

    #[test]
    fn fully_sampled_grid_unchanged() {
        let cells: Vec<_> = (0..9).map(|i| ((i / 3, i % 3), i as f64 - 4.0)).collect();
        let g = frame(3, 3, &cells);
        assert_eq!(interpolate_grid(&g, &InterpParams::default()), g);
    }

    #[test]
    fn constant_field_extends() {
        let g = frame(9, 9, &[((0, 3), 2.5), ((4, 4), 2.5), ((8, 8), 2.5), ((2, 6), 2.5)]);
        let out = interpolate_grid(&g, &InterpParams::default());
        for r in 0..9 {
            for c in 0..9 {
                let v = out.values[(r, c)];
                assert!(v == 0.0 || (v - 2.5).abs() < 1e-12, "({r},{c}) = {v}");
            }
        }
        assert!((out.values[(4, 5)] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn single_electrode_hand_computed() {
        // Electrode 1 at (4,4); target (4,5). Block around (4,5):
        // (4,4) sampled = 1; (3,4),(5,4),(3,5),(5,5),(4,5) complete to 1;
        // (3,6),(4,6),(5,6) have no sampled neighbour and stay empty.
        // Normalized sum is therefore 1.
        let g = frame(9, 9, &[((4, 4), 1.0)]);
        let p = InterpParams::default();
        let out = interpolate_grid(&g, &p);
        assert!((out.values[(4, 5)] - 1.0).abs() < 1e-15);

        let raw = InterpParams { normalize: false, ..p };
        // Rows contribute W(0.5) + W(0) + W(0.5); columns 4 and 5 contribute
        // W(0.5) and W(0).
        let w0 = 1.0;
        let w1 = 0.5625;
        let expected = w1 * (w1 + w0 + w1) + w0 * (w1 + w0 + w1);
        let v = interpolate_grid(&g, &raw).values[(4, 5)];
        assert!((v - expected).abs() < 1e-15, "{v} vs {expected}");
    }

    #[test]
    fn isolated_empty_cells_stay_zero() {
        let g = frame(9, 9, &[((0, 0), 3.0)]);
        let out = interpolate_grid(&g, &InterpParams::default());
        assert_eq!(out.values[(8, 8)], 0.0);
        assert_eq!(out.values[(4, 4)], 0.0);
        assert!(out.values[(1, 1)] != 0.0);
    }

    #[test]
    fn bilinear_averages_cross_neighbours() {
        let g = frame(3, 3, &[((0, 1), 2.0), ((1, 0), 4.0), ((2, 2), 100.0)]);
        let out = bilinear_fill(&g);
        assert_eq!(out.values[(1, 1)], 3.0);
        assert_eq!(out.values[(0, 0)], 3.0);
        assert_eq!(out.values[(2, 2)], 100.0);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("none".parse::<InterpMode>().unwrap(), InterpMode::None);
        assert_eq!("bilinear".parse::<InterpMode>().unwrap(), InterpMode::Bilinear);
        assert_eq!("bicubic-eeg".parse::<InterpMode>().unwrap(), InterpMode::BicubicEeg);
        assert!(matches!("spline".parse::<InterpMode>(), Err(InterpError::UnknownMode(_))));
    }
}
