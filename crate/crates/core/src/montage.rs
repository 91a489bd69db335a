//! Electrode montages: named electrode to grid-cell placement.
//!
//! A montage is read from a small text config:
//!
//! ```text
//! name = deap32
//! height = 9
//! width = 9
//!
//! [electrodes]
//! Fp1 0 3
//! Fp2 0 5
//! ```
//!
//! Lines starting with `#` are comments. Every electrode occupies a distinct
//! cell; cells without an electrode are zero-filled when a frame is mapped.

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

use crate::data::Trial;
use crate::grid::Grid;

pub const DEAP32_CFG: &str = include_str!("../montages/deap32.cfg");
pub const SEED62_CFG: &str = include_str!("../montages/seed62.cfg");

#[derive(Debug, Error)]
pub enum MontageError {
    #[error("electrodes {first} and {second} share cell ({row}, {col})")]
    DuplicateCell {
        first: String,
        second: String,
        row: usize,
        col: usize,
    },
    #[error("electrode {name} at ({row}, {col}) lies outside the {height}x{width} grid")]
    OutOfRange {
        name: String,
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },
    #[error("montage config is missing field `{0}`")]
    MissingField(&'static str),
    #[error("electrode {0} listed twice")]
    DuplicateName(String),
    #[error("montage config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("channel {0} is not part of the montage")]
    UnknownChannel(String),
    #[error("trial has {rows} rows but {names} channel names were declared")]
    RowCountMismatch { rows: usize, names: usize },
    #[error("failed to read montage {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Montage {
    name: String,
    height: usize,
    width: usize,
    placements: Vec<(String, (usize, usize))>,
    index: HashMap<String, usize>,
}

/// One time frame mapped onto the montage grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGrid {
    pub values: Grid,
    /// True exactly at electrode cells.
    pub mask: Vec<bool>,
}

impl FrameGrid {
    pub fn height(&self) -> usize {
        self.values.height()
    }

    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn is_electrode(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.values.width() + col]
    }
}

impl Montage {
    pub fn new(
        name: impl Into<String>,
        height: usize,
        width: usize,
        placements: Vec<(String, (usize, usize))>,
    ) -> Result<Self, MontageError> {
        let mut cells: HashMap<(usize, usize), &str> = HashMap::new();
        let mut index = HashMap::new();
        for (i, (electrode, (row, col))) in placements.iter().enumerate() {
            if *row >= height || *col >= width {
                return Err(MontageError::OutOfRange {
                    name: electrode.clone(),
                    row: *row,
                    col: *col,
                    height,
                    width,
                });
            }
            if let Some(first) = cells.insert((*row, *col), electrode) {
                return Err(MontageError::DuplicateCell {
                    first: first.to_string(),
                    second: electrode.clone(),
                    row: *row,
                    col: *col,
                });
            }
            if index.insert(electrode.clone(), i).is_some() {
                return Err(MontageError::DuplicateName(electrode.clone()));
            }
        }
        Ok(Self {
            name: name.into(),
            height,
            width,
            placements,
            index,
        })
    }

    pub fn parse(text: &str) -> Result<Self, MontageError> {
        let mut name = None;
        let mut height = None;
        let mut width = None;
        let mut placements = Vec::new();
        let mut in_electrodes = false;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| MontageError::Parse {
                line: lineno + 1,
                message,
            };
            if line == "[electrodes]" {
                in_electrodes = true;
                continue;
            }
            if in_electrodes {
                let fields: Vec<&str> = line.split_whitespace().collect();
                if fields.len() != 3 {
                    return Err(err(format!("expected `name row col`, got `{line}`")));
                }
                let row = fields[1]
                    .parse::<usize>()
                    .map_err(|e| err(format!("bad row `{}`: {e}", fields[1])))?;
                let col = fields[2]
                    .parse::<usize>()
                    .map_err(|e| err(format!("bad column `{}`: {e}", fields[2])))?;
                placements.push((fields[0].to_string(), (row, col)));
            } else {
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
                let value = value.trim();
                match key.trim() {
                    "name" => name = Some(value.to_string()),
                    "height" => {
                        height = Some(value.parse::<usize>().map_err(|e| err(e.to_string()))?)
                    }
                    "width" => {
                        width = Some(value.parse::<usize>().map_err(|e| err(e.to_string()))?)
                    }
                    other => return Err(err(format!("unknown key `{other}`"))),
                }
            }
        }

        let name = name.ok_or(MontageError::MissingField("name"))?;
        let height = height.ok_or(MontageError::MissingField("height"))?;
        let width = width.ok_or(MontageError::MissingField("width"))?;
        if !in_electrodes {
            return Err(MontageError::MissingField("electrodes"));
        }
        Self::new(name, height, width, placements)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MontageError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| MontageError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn deap32() -> Self {
        Self::parse(DEAP32_CFG).expect("shipped DEAP montage is valid")
    }

    pub fn seed62() -> Self {
        Self::parse(SEED62_CFG).expect("shipped SEED montage is valid")
    }

    /// Keeps only the named electrodes, in the given order.
    pub fn restrict(&self, names: &[impl AsRef<str>]) -> Result<Self, MontageError> {
        let placements = names
            .iter()
            .map(|n| {
                let n = n.as_ref();
                self.placement(n)
                    .map(|cell| (n.to_string(), cell))
                    .ok_or_else(|| MontageError::UnknownChannel(n.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(self.name.clone(), self.height, self.width, placements)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.placements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placements.is_empty()
    }

    pub fn placement(&self, name: &str) -> Option<(usize, usize)> {
        self.index.get(name).map(|&i| self.placements[i].1)
    }

    pub fn placements(&self) -> &[(String, (usize, usize))] {
        &self.placements
    }

    /// Electrode names in config order.
    pub fn electrode_names(&self) -> Vec<String> {
        self.placements.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.height * self.width];
        for (_, (r, c)) in &self.placements {
            mask[r * self.width + c] = true;
        }
        mask
    }

    /// Places each named channel value at its electrode cell.
    ///
    /// Mask cells are exactly the montage placements, regardless of which
    /// channels are supplied; missing electrodes read as zero.
    pub fn map_frame<S: AsRef<str>>(&self, channels: &[(S, f64)]) -> Result<FrameGrid, MontageError> {
        let mut values = Grid::zeros(self.height, self.width);
        for (name, value) in channels {
            let (r, c) = self
                .placement(name.as_ref())
                .ok_or_else(|| MontageError::UnknownChannel(name.as_ref().to_string()))?;
            values[(r, c)] = *value;
        }
        Ok(FrameGrid {
            values,
            mask: self.mask(),
        })
    }

    /// Maps every time sample of a channels x time trial to a grid.
    pub fn map_trial(&self, names: &[String], trial: &Trial) -> Result<Vec<FrameGrid>, MontageError> {
        if trial.channels() != names.len() {
            return Err(MontageError::RowCountMismatch {
                rows: trial.channels(),
                names: names.len(),
            });
        }
        let cells = names
            .iter()
            .map(|n| {
                self.placement(n)
                    .ok_or_else(|| MontageError::UnknownChannel(n.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mask = self.mask();
        let frames = (0..trial.samples())
            .map(|t| {
                let mut values = Grid::zeros(self.height, self.width);
                for (ch, &(r, c)) in cells.iter().enumerate() {
                    values[(r, c)] = trial.get(ch, t);
                }
                FrameGrid {
                    values,
                    mask: mask.clone(),
                }
            })
            .collect();
        Ok(frames)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_deap_montage_layout() {
        let m = Montage::deap32();
        assert_eq!((m.height(), m.width()), (9, 9));
        assert_eq!(m.len(), 32);
        assert_eq!(m.placement("Cz"), Some((4, 4)));
        assert_eq!(m.placement("Fp1"), Some((0, 3)));
        assert_eq!(m.placement("Fp2"), Some((0, 5)));
        let row4: Vec<_> = m
            .placements()
            .iter()
            .filter(|(_, (r, _))| *r == 4)
            .map(|(n, _)| n.as_str())
            .collect();
        assert_eq!(row4, ["T7", "C3", "Cz", "C4", "T8"]);
        let row8: Vec<_> = m
            .placements()
            .iter()
            .filter(|(_, (r, _))| *r == 8)
            .map(|(n, _)| n.as_str())
            .collect();
        assert_eq!(row8, ["O1", "Oz", "O2"]);
    }

    #[test]
    fn default_seed_montage_layout() {
        let m = Montage::seed62();
        assert_eq!((m.height(), m.width()), (9, 9));
        assert_eq!(m.len(), 62);
        assert_eq!(m.placement("CZ"), Some((4, 4)));
    }

    #[test]
    fn duplicate_cell_rejected() {
        let cfg = "name = x\nheight = 9\nwidth = 9\n[electrodes]\nA 4 4\nB 4 4\n";
        assert!(matches!(
            Montage::parse(cfg),
            Err(MontageError::DuplicateCell { row: 4, col: 4, .. })
        ));
    }

    #[test]
    fn out_of_range_rejected() {
        let cfg = "name = x\nheight = 9\nwidth = 9\n[electrodes]\nA 9 0\n";
        assert!(matches!(Montage::parse(cfg), Err(MontageError::OutOfRange { .. })));
    }

    #[test]
    fn missing_fields_rejected() {
        let cfg = "name = x\nwidth = 9\n[electrodes]\nA 0 0\n";
        assert!(matches!(
            Montage::parse(cfg),
            Err(MontageError::MissingField("height"))
        ));
        let cfg = "name = x\nheight = 9\nwidth = 9\n";
        assert!(matches!(
            Montage::parse(cfg),
            Err(MontageError::MissingField("electrodes"))
        ));
    }

    #[test]
    fn map_frame_counts() {
        let m = Montage::deap32();
        let channels: Vec<(String, f64)> = m
            .electrode_names()
            .into_iter()
            .enumerate()
            .map(|(i, n)| (n, i as f64 + 1.0))
            .collect();
        let g = m.map_frame(&channels).unwrap();
        let zero_non_mask = (0..81)
            .filter(|&i| !g.mask[i] && g.values.as_slice()[i] == 0.0)
            .count();
        assert_eq!(zero_non_mask, 81 - 32);
        assert_eq!(g.mask.iter().filter(|&&b| b).count(), 32);
    }

    #[test]
    fn all_zero_channels() {
        let m = Montage::deap32();
        let channels: Vec<(String, f64)> =
            m.electrode_names().into_iter().map(|n| (n, 0.0)).collect();
        let g = m.map_frame(&channels).unwrap();
        assert!(g.values.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(g.mask.iter().filter(|&&b| b).count(), 32);
    }

    #[test]
    fn unknown_channel() {
        let m = Montage::deap32();
        assert!(matches!(
            m.map_frame(&[("XX1", 1.0)]),
            Err(MontageError::UnknownChannel(n)) if n == "XX1"
        ));
    }

    #[test]
    fn map_trial_shapes() {
        let m = Montage::deap32();
        let names = m.electrode_names();
        let trial = Trial::zeros(32, 7680);
        assert_eq!(m.map_trial(&names, &trial).unwrap().len(), 7680);
        assert!(m.map_trial(&names, &Trial::zeros(32, 0)).unwrap().is_empty());
        assert!(matches!(
            m.map_trial(&names, &Trial::zeros(31, 10)),
            Err(MontageError::RowCountMismatch { rows: 31, names: 32 })
        ));
    }

    #[test]
    fn restrict_keeps_subset() {
        let m = Montage::deap32().restrict(&["Cz", "Fz"]).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.placement("Fz"), Some((2, 4)));
        assert!(Montage::deap32().restrict(&["Q9"]).is_err());
    }
}
