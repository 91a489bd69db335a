//! Symmetric fold transforms of 9x9 scalp grids and cube assembly.
//!
//! A half fold splits the grid along its center column (or row) and stacks
//! the two halves as two layers, mirroring one of them so that symmetric
//! electrodes line up. The center line belongs to both halves, which gives
//! 9x5 (or 5x9) layers. Layer 0 is always the stationary half.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;

/// Grid side length the folds are defined for.
pub const FOLD_SIDE: usize = 9;
const CENTER: usize = FOLD_SIDE / 2;

#[derive(Debug, Error, PartialEq)]
pub enum FoldError {
    #[error("fold {strategy} needs a {FOLD_SIDE}x{FOLD_SIDE} grid, got {height}x{width}")]
    ShapeMismatch {
        strategy: FoldStrategy,
        height: usize,
        width: usize,
    },
    #[error("cannot build a cube from an empty frame sequence")]
    EmptySequence,
    #[error("frame {index} is {got:?}, expected {expected:?}")]
    FrameShape {
        index: usize,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("fold layers disagree on the fold line at ({row}, {col})")]
    InconsistentFoldAxis { row: usize, col: usize },
    #[error("expected {expected} layer(s) for {strategy}, got {got}")]
    LayerCount {
        strategy: FoldStrategy,
        expected: usize,
        got: usize,
    },
    #[error("unknown fold strategy `{0}` (expected none, left, right, up, down or full)")]
    UnknownStrategy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FoldStrategy {
    NoFold,
    LeftOnRight,
    RightOnLeft,
    TopOnBottom,
    BottomOnTop,
    FullMirror,
}

impl FoldStrategy {
    /// The five folded views used by the ensemble.
    pub const FOLDED: [FoldStrategy; 5] = [
        FoldStrategy::LeftOnRight,
        FoldStrategy::RightOnLeft,
        FoldStrategy::TopOnBottom,
        FoldStrategy::BottomOnTop,
        FoldStrategy::FullMirror,
    ];

    pub const ALL: [FoldStrategy; 6] = [
        FoldStrategy::NoFold,
        FoldStrategy::LeftOnRight,
        FoldStrategy::RightOnLeft,
        FoldStrategy::TopOnBottom,
        FoldStrategy::BottomOnTop,
        FoldStrategy::FullMirror,
    ];

    /// CLI vocabulary.
    pub fn as_str(&self) -> &'static str {
        match self {
            FoldStrategy::NoFold => "none",
            FoldStrategy::LeftOnRight => "left",
            FoldStrategy::RightOnLeft => "right",
            FoldStrategy::TopOnBottom => "up",
            FoldStrategy::BottomOnTop => "down",
            FoldStrategy::FullMirror => "full",
        }
    }

    /// Row label used in fold ablation reports.
    pub fn table_name(&self) -> &'static str {
        match self {
            FoldStrategy::NoFold => "No_fold",
            FoldStrategy::LeftOnRight => "Left_fold",
            FoldStrategy::RightOnLeft => "Right_fold",
            FoldStrategy::TopOnBottom => "Up_fold",
            FoldStrategy::BottomOnTop => "Down_fold",
            FoldStrategy::FullMirror => "Full_fold",
        }
    }

    pub fn layers(&self) -> usize {
        if *self == FoldStrategy::NoFold {
            1
        } else {
            2
        }
    }

    /// Per-frame (height, width, layers) for a 9x9 input.
    pub fn frame_shape(&self) -> (usize, usize, usize) {
        let half = CENTER + 1;
        match self {
            FoldStrategy::NoFold => (FOLD_SIDE, FOLD_SIDE, 1),
            FoldStrategy::LeftOnRight | FoldStrategy::RightOnLeft => (FOLD_SIDE, half, 2),
            FoldStrategy::TopOnBottom | FoldStrategy::BottomOnTop => (half, FOLD_SIDE, 2),
            FoldStrategy::FullMirror => (FOLD_SIDE, FOLD_SIDE, 2),
        }
    }
}

impl fmt::Display for FoldStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FoldStrategy {
    type Err = FoldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(FoldStrategy::NoFold),
            "left" => Ok(FoldStrategy::LeftOnRight),
            "right" => Ok(FoldStrategy::RightOnLeft),
            "up" => Ok(FoldStrategy::TopOnBottom),
            "down" => Ok(FoldStrategy::BottomOnTop),
            "full" => Ok(FoldStrategy::FullMirror),
            other => Err(FoldError::UnknownStrategy(other.to_string())),
        }
    }
}

impl TryFrom<String> for FoldStrategy {
    type Error = FoldError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<FoldStrategy> for String {
    fn from(s: FoldStrategy) -> Self {
        s.as_str().to_string()
    }
}

/// One or two stacked grids produced by folding a single frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredGrid {
    pub layers: Vec<Grid>,
}

impl LayeredGrid {
    pub fn shape(&self) -> (usize, usize, usize) {
        let first = &self.layers[0];
        (first.height(), first.width(), self.layers.len())
    }

    pub fn sum(&self) -> f64 {
        self.layers.iter().map(Grid::sum).sum()
    }
}

pub fn fold_grid(grid: &Grid, strategy: FoldStrategy) -> Result<LayeredGrid, FoldError> {
    if strategy == FoldStrategy::NoFold {
        return Ok(LayeredGrid {
            layers: vec![grid.clone()],
        });
    }
    if grid.shape() != (FOLD_SIDE, FOLD_SIDE) {
        return Err(FoldError::ShapeMismatch {
            strategy,
            height: grid.height(),
            width: grid.width(),
        });
    }
    let (h, w, _) = strategy.frame_shape();
    let layers = match strategy {
        FoldStrategy::LeftOnRight => vec![
            Grid::from_fn(h, w, |r, c| grid[(r, CENTER + c)]),
            Grid::from_fn(h, w, |r, c| grid[(r, CENTER - c)]),
        ],
        FoldStrategy::RightOnLeft => vec![
            Grid::from_fn(h, w, |r, c| grid[(r, CENTER - c)]),
            Grid::from_fn(h, w, |r, c| grid[(r, CENTER + c)]),
        ],
        FoldStrategy::TopOnBottom => vec![
            Grid::from_fn(h, w, |r, c| grid[(CENTER + r, c)]),
            Grid::from_fn(h, w, |r, c| grid[(CENTER - r, c)]),
        ],
        FoldStrategy::BottomOnTop => vec![
            Grid::from_fn(h, w, |r, c| grid[(CENTER - r, c)]),
            Grid::from_fn(h, w, |r, c| grid[(CENTER + r, c)]),
        ],
        FoldStrategy::FullMirror => vec![grid.clone(), grid.fliplr()],
        FoldStrategy::NoFold => unreachable!(),
    };
    Ok(LayeredGrid { layers })
}

/// Inverse of [`fold_grid`].
pub fn reconstruct_halves(folded: &LayeredGrid, strategy: FoldStrategy) -> Result<Grid, FoldError> {
    let expected = strategy.layers();
    if folded.layers.len() != expected {
        return Err(FoldError::LayerCount {
            strategy,
            expected,
            got: folded.layers.len(),
        });
    }
    if strategy == FoldStrategy::NoFold {
        return Ok(folded.layers[0].clone());
    }
    let (h, w, _) = strategy.frame_shape();
    let (l0, l1) = (&folded.layers[0], &folded.layers[1]);
    for layer in [l0, l1] {
        if layer.shape() != (h, w) {
            return Err(FoldError::ShapeMismatch {
                strategy,
                height: layer.height(),
                width: layer.width(),
            });
        }
    }

    let mut out = Grid::zeros(FOLD_SIDE, FOLD_SIDE);
    match strategy {
        FoldStrategy::LeftOnRight | FoldStrategy::RightOnLeft => {
            let (plus, minus) = if strategy == FoldStrategy::LeftOnRight {
                (l0, l1)
            } else {
                (l1, l0)
            };
            for r in 0..FOLD_SIDE {
                if plus[(r, 0)] != minus[(r, 0)] {
                    return Err(FoldError::InconsistentFoldAxis { row: r, col: CENTER });
                }
                for c in 0..w {
                    out[(r, CENTER + c)] = plus[(r, c)];
                    out[(r, CENTER - c)] = minus[(r, c)];
                }
            }
        }
        FoldStrategy::TopOnBottom | FoldStrategy::BottomOnTop => {
            let (plus, minus) = if strategy == FoldStrategy::TopOnBottom {
                (l0, l1)
            } else {
                (l1, l0)
            };
            for c in 0..FOLD_SIDE {
                if plus[(0, c)] != minus[(0, c)] {
                    return Err(FoldError::InconsistentFoldAxis { row: CENTER, col: c });
                }
            }
            for r in 0..h {
                for c in 0..FOLD_SIDE {
                    out[(CENTER + r, c)] = plus[(r, c)];
                    out[(CENTER - r, c)] = minus[(r, c)];
                }
            }
        }
        FoldStrategy::FullMirror => {
            for r in 0..FOLD_SIDE {
                for c in 0..FOLD_SIDE {
                    if l1[(r, c)] != l0[(r, FOLD_SIDE - 1 - c)] {
                        return Err(FoldError::InconsistentFoldAxis { row: r, col: c });
                    }
                }
            }
            out = l0.clone();
        }
        FoldStrategy::NoFold => unreachable!(),
    }
    Ok(out)
}

/// A sample's network input: depth x height x width, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldedCube {
    pub depth: usize,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
    pub strategy: FoldStrategy,
}

impl FoldedCube {
    pub fn dims(&self) -> [usize; 3] {
        [self.depth, self.height, self.width]
    }

    pub fn slice(&self, d: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.values[d * plane..(d + 1) * plane]
    }
}

/// Folds every frame and interleaves the layers along depth: slice `2t` is
/// layer 0 of frame `t`, slice `2t + 1` its layer 1.
pub fn fold_cube(frames: &[Grid], strategy: FoldStrategy) -> Result<FoldedCube, FoldError> {
    let first = frames.first().ok_or(FoldError::EmptySequence)?;
    let expected = first.shape();
    let mut values = Vec::new();
    let mut frame_shape = (0, 0);
    for (index, frame) in frames.iter().enumerate() {
        if frame.shape() != expected {
            return Err(FoldError::FrameShape {
                index,
                expected,
                got: frame.shape(),
            });
        }
        let folded = fold_grid(frame, strategy)?;
        let (h, w, _) = folded.shape();
        frame_shape = (h, w);
        for layer in &folded.layers {
            values.extend_from_slice(layer.as_slice());
        }
    }
    Ok(FoldedCube {
        depth: frames.len() * strategy.layers(),
        height: frame_shape.0,
        width: frame_shape.1,
        values,
        strategy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column_index_grid() -> Grid {
        Grid::from_fn(9, 9, |_, c| c as f64)
    }

    #[test]
    fn left_on_right_by_index_formula() {
        let f = fold_grid(&column_index_grid(), FoldStrategy::LeftOnRight).unwrap();
        for r in 0..9 {
            let l0: Vec<f64> = (0..5).map(|c| f.layers[0][(r, c)]).collect();
            let l1: Vec<f64> = (0..5).map(|c| f.layers[1][(r, c)]).collect();
            assert_eq!(l0, [4.0, 5.0, 6.0, 7.0, 8.0]);
            assert_eq!(l1, [4.0, 3.0, 2.0, 1.0, 0.0]);
        }
    }

    #[test]
    fn symmetric_grid_has_equal_layers() {
        let g = Grid::from_fn(9, 9, |r, c| (r as f64) + (c as f64 - 4.0).abs());
        assert_eq!(g, g.fliplr());
        let f = fold_grid(&g, FoldStrategy::LeftOnRight).unwrap();
        assert_eq!(f.layers[0], f.layers[1]);
    }

    #[test]
    fn wrong_shape_rejected() {
        let g = Grid::zeros(8, 9);
        assert!(matches!(
            fold_grid(&g, FoldStrategy::LeftOnRight),
            Err(FoldError::ShapeMismatch { height: 8, width: 9, .. })
        ));
        assert!(fold_grid(&g, FoldStrategy::NoFold).is_ok());
    }

    #[test]
    fn shapes_per_strategy() {
        let g = column_index_grid();
        let expect = [
            (FoldStrategy::LeftOnRight, (9, 5, 2)),
            (FoldStrategy::RightOnLeft, (9, 5, 2)),
            (FoldStrategy::TopOnBottom, (5, 9, 2)),
            (FoldStrategy::BottomOnTop, (5, 9, 2)),
            (FoldStrategy::FullMirror, (9, 9, 2)),
            (FoldStrategy::NoFold, (9, 9, 1)),
        ];
        for (s, shape) in expect {
            assert_eq!(fold_grid(&g, s).unwrap().shape(), shape, "{s}");
            assert_eq!(s.frame_shape(), shape);
        }
    }

    #[test]
    fn tampered_fold_line_detected() {
        let g = Grid::from_fn(9, 9, |r, c| (r * 9 + c) as f64);
        let mut f = fold_grid(&g, FoldStrategy::LeftOnRight).unwrap();
        f.layers[1][(3, 0)] += 1.0;
        assert_eq!(
            reconstruct_halves(&f, FoldStrategy::LeftOnRight),
            Err(FoldError::InconsistentFoldAxis { row: 3, col: 4 })
        );
        let mut f = fold_grid(&g, FoldStrategy::BottomOnTop).unwrap();
        f.layers[0][(0, 2)] = -1.0;
        assert!(reconstruct_halves(&f, FoldStrategy::BottomOnTop).is_err());
    }

    #[test]
    fn no_fold_round_trip() {
        let g = Grid::from_fn(9, 9, |r, c| (r * 9 + c) as f64);
        let f = fold_grid(&g, FoldStrategy::NoFold).unwrap();
        assert_eq!(reconstruct_halves(&f, FoldStrategy::NoFold).unwrap(), g);
    }

    #[test]
    fn cube_shapes() {
        let frames = vec![Grid::zeros(9, 9); 128];
        let c = fold_cube(&frames, FoldStrategy::LeftOnRight).unwrap();
        assert_eq!(c.dims(), [256, 9, 5]);
        let c = fold_cube(&frames[..1], FoldStrategy::FullMirror).unwrap();
        assert_eq!(c.dims(), [2, 9, 9]);
        let frames = vec![Grid::zeros(9, 9); 200];
        let c = fold_cube(&frames, FoldStrategy::TopOnBottom).unwrap();
        assert_eq!(c.dims(), [400, 5, 9]);
        let c = fold_cube(&frames, FoldStrategy::NoFold).unwrap();
        assert_eq!(c.dims(), [200, 9, 9]);
        assert_eq!(fold_cube(&[], FoldStrategy::NoFold), Err(FoldError::EmptySequence));
    }

    #[test]
    fn cube_is_frame_interleaved() {
        let frames: Vec<Grid> = (0..3)
            .map(|t| Grid::from_fn(9, 9, |r, c| (t * 100 + r * 9 + c) as f64))
            .collect();
        let cube = fold_cube(&frames, FoldStrategy::RightOnLeft).unwrap();
        for (t, frame) in frames.iter().enumerate() {
            let f = fold_grid(frame, FoldStrategy::RightOnLeft).unwrap();
            assert_eq!(cube.slice(2 * t), f.layers[0].as_slice());
            assert_eq!(cube.slice(2 * t + 1), f.layers[1].as_slice());
        }
    }

    #[test]
    fn mismatched_frames_rejected() {
        let frames = vec![Grid::zeros(9, 9), Grid::zeros(9, 8)];
        assert!(matches!(
            fold_cube(&frames, FoldStrategy::NoFold),
            Err(FoldError::FrameShape { index: 1, .. })
        ));
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in FoldStrategy::ALL {
            assert_eq!(s.as_str().parse::<FoldStrategy>().unwrap(), s);
        }
        assert!("sideways".parse::<FoldStrategy>().is_err());
    }
}
