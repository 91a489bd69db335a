use super::EnsembleError;

/// Tolerance on row sums.
pub const ROW_SUM_TOL: f64 = 1e-6;

/// Member outputs for one sample: `T` rows of `J` class scores.
///
/// `votes` rows are one-hot; `probs`, when present, holds the softmax
/// rows the votes were taken from and only serves to break ties.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteMatrix {
    classes: usize,
    votes: Vec<Vec<f64>>,
    probs: Option<Vec<Vec<f64>>>,
}

fn check_rows(rows: &[Vec<f64>], classes: usize) -> Result<(), EnsembleError> {
    if rows.is_empty() {
        return Err(EnsembleError::EmptyEnsemble);
    }
    for (row, r) in rows.iter().enumerate() {
        if r.len() != classes {
            return Err(EnsembleError::RaggedRow {
                row,
                len: r.len(),
                classes,
            });
        }
        let sum: f64 = r.iter().sum();
        if !((sum - 1.0).abs() <= ROW_SUM_TOL) || r.iter().any(|&v| !(v >= 0.0)) {
            return Err(EnsembleError::NotNormalized { row, sum });
        }
    }
    Ok(())
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Column sums computed in sorted order, so the result does not depend
/// on the order of the rows.
fn column_sums(rows: &[Vec<f64>], classes: usize) -> Vec<f64> {
    (0..classes)
        .map(|j| {
            let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            col.sort_by(f64::total_cmp);
            col.into_iter().sum()
        })
        .collect()
}

impl VoteMatrix {
    pub fn new(votes: Vec<Vec<f64>>, probs: Option<Vec<Vec<f64>>>) -> Result<Self, EnsembleError> {
        let classes = votes.first().map(Vec::len).ok_or(EnsembleError::EmptyEnsemble)?;
        check_rows(&votes, classes)?;
        for (row, r) in votes.iter().enumerate() {
            if r.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(EnsembleError::NotOneHot(row));
            }
        }
        if let Some(p) = &probs {
            if p.len() != votes.len() {
                return Err(EnsembleError::RaggedRow {
                    row: p.len(),
                    len: classes,
                    classes,
                });
            }
            check_rows(p, classes)?;
        }
        Ok(Self { classes, votes, probs })
    }

    /// One-hot rows for the given member predictions.
    pub fn from_votes(classes: usize, predictions: &[usize]) -> Result<Self, EnsembleError> {
        let votes = predictions
            .iter()
            .map(|&c| {
                if c >= classes {
                    return Err(EnsembleError::RaggedRow {
                        row: c,
                        len: classes,
                        classes,
                    });
                }
                let mut row = vec![0.0; classes];
                row[c] = 1.0;
                Ok(row)
            })
            .collect::<Result<_, _>>()?;
        Self::new(votes, None)
    }

    /// Each member votes for its most probable class.
    pub fn from_probabilities(probs: Vec<Vec<f64>>) -> Result<Self, EnsembleError> {
        let classes = probs.first().map(Vec::len).ok_or(EnsembleError::EmptyEnsemble)?;
        check_rows(&probs, classes)?;
        let votes = probs
            .iter()
            .map(|p| {
                let mut row = vec![0.0; classes];
                row[argmax(p)] = 1.0;
                row
            })
            .collect();
        Ok(Self {
            classes,
            votes,
            probs: Some(probs),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn members(&self) -> usize {
        self.votes.len()
    }

    pub fn votes(&self) -> &[Vec<f64>] {
        &self.votes
    }

    pub fn probs(&self) -> Option<&[Vec<f64>]> {
        self.probs.as_deref()
    }

    /// Votes per class.
    pub fn tally(&self) -> Vec<f64> {
        column_sums(&self.votes, self.classes)
    }

    /// Rows reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            classes: self.classes,
            votes: order.iter().map(|&i| self.votes[i].clone()).collect(),
            probs: self.probs.as_ref().map(|p| order.iter().map(|&i| p[i].clone()).collect()),
        }
    }
}

/// Majority vote: the class with the most votes; ties go to the larger
/// summed member probability, then to the lowest class index.
pub fn vote(matrix: &VoteMatrix) -> Result<usize, EnsembleError> {
    if matrix.votes.is_empty() {
        return Err(EnsembleError::EmptyEnsemble);
    }
    let tally = matrix.tally();
    let top = tally.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = (0..matrix.classes).filter(|&j| tally[j] == top).collect();
    if tied.len() == 1 {
        return Ok(tied[0]);
    }
    let Some(probs) = &matrix.probs else {
        return Ok(tied[0]);
    };
    let mass = column_sums(probs, matrix.classes);
    let mut best = tied[0];
    for &j in &tied[1..] {
        if mass[j] > mass[best] {
            best = j;
        }
    }
    Ok(best)
}

/// Arg-max of the mean probability row; lowest index on ties.
pub fn average_combine(rows: &[Vec<f64>]) -> Result<usize, EnsembleError> {
    let classes = rows.first().map(Vec::len).ok_or(EnsembleError::EmptyEnsemble)?;
    check_rows(rows, classes)?;
    let mean: Vec<f64> = column_sums(rows, classes)
        .into_iter()
        .map(|s| s / rows.len() as f64)
        .collect();
    Ok(argmax(&mean))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_of_five() {
        let m = VoteMatrix::from_votes(2, &[0, 0, 1, 0, 1]).unwrap();
        assert_eq!(vote(&m).unwrap(), 0);
        assert_eq!(m.tally(), vec![3.0, 2.0]);
    }

    #[test]
    fn single_member_identity() {
        for c in 0..4 {
            assert_eq!(vote(&VoteMatrix::from_votes(4, &[c]).unwrap()).unwrap(), c);
        }
    }

    #[test]
    fn tie_broken_by_probability_mass() {
        let probs = vec![
            vec![0.55, 0.45],
            vec![0.51, 0.49],
            vec![0.05, 0.95],
            vec![0.40, 0.60],
        ];
        let m = VoteMatrix::from_probabilities(probs).unwrap();
        assert_eq!(m.tally(), vec![2.0, 2.0]);
        // Class 0 mass 1.51 vs class 1 mass 2.49.
        assert_eq!(vote(&m).unwrap(), 1);
        let plain = VoteMatrix::from_votes(2, &[0, 0, 1, 1]).unwrap();
        assert_eq!(vote(&plain).unwrap(), 0);
    }

    #[test]
    fn average_examples() {
        assert_eq!(average_combine(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap(), 0);
        let row = vec![0.2, 0.5, 0.3];
        assert_eq!(average_combine(&[row.clone(), row.clone(), row]).unwrap(), 1);
        assert!(matches!(
            average_combine(&[vec![0.9, 0.3]]),
            Err(EnsembleError::NotNormalized { row: 0, .. })
        ));
        assert!(matches!(average_combine(&[]), Err(EnsembleError::EmptyEnsemble)));
    }

    #[test]
    fn malformed_matrices_rejected() {
        assert!(matches!(VoteMatrix::new(vec![], None), Err(EnsembleError::EmptyEnsemble)));
        assert!(matches!(
            VoteMatrix::new(vec![vec![0.5, 0.5]], None),
            Err(EnsembleError::NotOneHot(0))
        ));
        assert!(VoteMatrix::new(vec![vec![1.0, 0.0], vec![1.0]], None).is_err());
        assert!(VoteMatrix::from_votes(2, &[2]).is_err());
    }
}
