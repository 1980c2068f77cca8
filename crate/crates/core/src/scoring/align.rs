//! Sub-word similarity matrices and the three alignment strategies.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::embedding::{EmbeddingError, SubwordVector};

/// Cosine similarities between the sub-words of two labels, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    rows: Vec<String>,
    cols: Vec<String>,
    cells: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixError {
    Empty,
    Shape { expected: usize, found: usize },
    Embedding(EmbeddingError),
}

impl fmt::Display for MatrixError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixError::Empty => f.write_str("similarity matrix has no rows or no columns"),
            MatrixError::Shape { expected, found } => {
                write!(f, "expected {expected} cells, found {found}")
            }
            MatrixError::Embedding(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for MatrixError {}

impl From<EmbeddingError> for MatrixError {
    fn from(e: EmbeddingError) -> Self {
        MatrixError::Embedding(e)
    }
}

impl SimilarityMatrix {
    pub fn from_subwords(a: &[SubwordVector], b: &[SubwordVector]) -> Result<Self, MatrixError> {
        if a.is_empty() || b.is_empty() {
            return Err(MatrixError::Empty);
        }
        let mut cells = Vec::with_capacity(a.len() * b.len());
        for u in a {
            for v in b {
                cells.push(u.vector.cosine(&v.vector)?);
            }
        }
        Ok(SimilarityMatrix {
            rows: a.iter().map(|s| s.token.clone()).collect(),
            cols: b.iter().map(|s| s.token.clone()).collect(),
            cells,
        })
    }

    /// Matrix from raw values with placeholder token names.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self, MatrixError> {
        let n_cols = rows.first().map_or(0, |r| r.len());
        if rows.is_empty() || n_cols == 0 {
            return Err(MatrixError::Empty);
        }
        let mut cells = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(MatrixError::Shape {
                    expected: n_cols,
                    found: r.len(),
                });
            }
            cells.extend_from_slice(r);
        }
        Ok(SimilarityMatrix {
            rows: (0..rows.len()).map(|i| alloc::format!("r{i}")).collect(),
            cols: (0..n_cols).map(|j| alloc::format!("c{j}")).collect(),
            cells,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn row_tokens(&self) -> &[String] {
        &self.rows
    }

    pub fn col_tokens(&self) -> &[String] {
        &self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.cols.len() + j]
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn transpose(&self) -> SimilarityMatrix {
        let mut cells = Vec::with_capacity(self.cells.len());
        for j in 0..self.n_cols() {
            for i in 0..self.n_rows() {
                cells.push(self.get(i, j));
            }
        }
        SimilarityMatrix {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            cells,
        }
    }

    pub fn mean(&self) -> f64 {
        self.cells.iter().sum::<f64>() / self.cells.len() as f64
    }

    /// Sum of the selected cells.
    pub fn weight(&self, cells: &[(usize, usize)]) -> f64 {
        cells.iter().map(|&(i, j)| self.get(i, j)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignStrategy {
    /// Mutual argmax.
    Argmax,
    /// Maximum-weight one-to-one assignment.
    Match,
    /// Mutual argmax repeated over unaligned rows and columns.
    Itermax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignConfig {
    /// Total number of argmax rounds for Itermax, the first included.
    pub itermax_rounds: usize,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig { itermax_rounds: 2 }
    }
}

/// Aligned `(row, col)` cells, sorted.
pub fn align_subwords(matrix: &SimilarityMatrix, strategy: AlignStrategy) -> Vec<(usize, usize)> {
    align_with(matrix, strategy, AlignConfig::default())
}

pub fn align_with(
    matrix: &SimilarityMatrix,
    strategy: AlignStrategy,
    config: AlignConfig,
) -> Vec<(usize, usize)> {
    let mut cells = match strategy {
        AlignStrategy::Argmax => {
            mutual_argmax(matrix, &alloc::vec![true; matrix.n_rows()], &alloc::vec![true; matrix.n_cols()])
        }
        AlignStrategy::Itermax => itermax(matrix, config.itermax_rounds),
        AlignStrategy::Match => max_weight_assignment(matrix),
    };
    cells.sort_unstable();
    cells
}

/// Row argmax restricted to active columns, ties to the lowest index.
fn row_argmax(m: &SimilarityMatrix, i: usize, cols: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for j in (0..m.n_cols()).filter(|&j| cols[j]) {
        if best.is_none_or(|b| m.get(i, j) > m.get(i, b)) {
            best = Some(j);
        }
    }
    best
}

fn col_argmax(m: &SimilarityMatrix, j: usize, rows: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in (0..m.n_rows()).filter(|&i| rows[i]) {
        if best.is_none_or(|b| m.get(i, j) > m.get(b, j)) {
            best = Some(i);
        }
    }
    best
}

fn mutual_argmax(m: &SimilarityMatrix, rows: &[bool], cols: &[bool]) -> Vec<(usize, usize)> {
    (0..m.n_rows())
        .filter(|&i| rows[i])
        .filter_map(|i| row_argmax(m, i, cols).map(|j| (i, j)))
        .filter(|&(i, j)| col_argmax(m, j, rows) == Some(i))
        .collect()
}

fn itermax(m: &SimilarityMatrix, rounds: usize) -> Vec<(usize, usize)> {
    let mut rows = alloc::vec![true; m.n_rows()];
    let mut cols = alloc::vec![true; m.n_cols()];
    let mut out = Vec::new();
    for _ in 0..rounds {
        let found = mutual_argmax(m, &rows, &cols);
        if found.is_empty() {
            break;
        }
        for &(i, j) in &found {
            rows[i] = false;
            cols[j] = false;
        }
        out.extend(found);
    }
    out
}

/// Maximum-weight assignment of size `min(rows, cols)` (Hungarian method
/// with potentials, O(n²m)).
fn max_weight_assignment(m: &SimilarityMatrix) -> Vec<(usize, usize)> {
    let transposed = m.n_rows() > m.n_cols();
    let owned;
    let w = if transposed {
        owned = m.transpose();
        &owned
    } else {
        m
    };
    let (n, k) = (w.n_rows(), w.n_cols());
    // Minimise cost = -weight. 1-based arrays with a virtual column 0.
    let cost = |i: usize, j: usize| -w.get(i - 1, j - 1);
    let mut u = alloc::vec![0.0f64; n + 1];
    let mut v = alloc::vec![0.0f64; k + 1];
    let mut owner = alloc::vec![0usize; k + 1];
    let mut way = alloc::vec![0usize; k + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut min_to = alloc::vec![f64::INFINITY; k + 1];
        let mut used = alloc::vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=k {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0, j) - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=k)
        .filter(|&j| owner[j] != 0)
        .map(|j| {
            let (r, c) = (owner[j] - 1, j - 1);
            if transposed {
                (c, r)
            } else {
                (r, c)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn example() -> SimilarityMatrix {
        SimilarityMatrix::from_rows(&[&[0.9, 0.8], &[0.85, 0.1]]).unwrap()
    }

    #[test]
    fn single_cell() {
        let m = SimilarityMatrix::from_rows(&[&[0.3]]).unwrap();
        for s in [AlignStrategy::Argmax, AlignStrategy::Match, AlignStrategy::Itermax] {
            assert_eq!(align_subwords(&m, s), vec![(0, 0)]);
        }
    }

    #[test]
    fn two_by_two_example() {
        let m = example();
        assert_eq!(align_subwords(&m, AlignStrategy::Argmax), vec![(0, 0)]);
        let matched = align_subwords(&m, AlignStrategy::Match);
        assert_eq!(matched, vec![(0, 1), (1, 0)]);
        assert!((m.weight(&matched) - 1.65).abs() < 1e-12);
        assert_eq!(align_subwords(&m, AlignStrategy::Itermax), vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn dominant_diagonal_agrees() {
        let m = SimilarityMatrix::from_rows(&[&[0.9, 0.1, 0.2], &[0.0, 0.8, 0.3], &[0.1, 0.2, 0.7]])
            .unwrap();
        let diag = vec![(0, 0), (1, 1), (2, 2)];
        for s in [AlignStrategy::Argmax, AlignStrategy::Match, AlignStrategy::Itermax] {
            assert_eq!(align_subwords(&m, s), diag);
        }
    }

    #[test]
    fn rectangular_match() {
        let m = SimilarityMatrix::from_rows(&[&[0.1, 0.9, 0.5]]).unwrap();
        assert_eq!(align_subwords(&m, AlignStrategy::Match), vec![(0, 1)]);
        let t = m.transpose();
        assert_eq!(align_subwords(&t, AlignStrategy::Match), vec![(1, 0)]);
    }

    #[test]
    fn itermax_round_cap() {
        // Round 1 takes (0,0); round 2 takes (1,1); a third round would take (2,2).
        let m = SimilarityMatrix::from_rows(&[&[0.9, 0.8, 0.7], &[0.8, 0.6, 0.1], &[0.7, 0.5, 0.4]])
            .unwrap();
        assert_eq!(align_subwords(&m, AlignStrategy::Itermax), vec![(0, 0), (1, 1)]);
        let three = align_with(&m, AlignStrategy::Itermax, AlignConfig { itermax_rounds: 3 });
        assert_eq!(three, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn shape_errors() {
        assert_eq!(SimilarityMatrix::from_rows(&[]), Err(MatrixError::Empty));
        assert!(matches!(
            SimilarityMatrix::from_rows(&[&[1.0, 2.0], &[1.0]]),
            Err(MatrixError::Shape { .. })
        ));
    }
}
