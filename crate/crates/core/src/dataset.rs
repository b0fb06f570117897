//! Dense categorical data matrices.

use crate::error::{Error, Result};

/// A rectangular matrix of observed category indices, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    name: String,
    cardinalities: Vec<u32>,
    cells: Vec<u32>,
}

impl Dataset {
    /// Builds a dataset from rows, checking every cell against its column cardinality.
    pub fn from_rows<R: AsRef<[u32]>>(cardinalities: Vec<u32>, rows: &[R]) -> Result<Self> {
        let width = cardinalities.len();
        let mut cells = Vec::with_capacity(rows.len() * width);
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != width {
                return Err(Error::Data {
                    row: r,
                    col: row.len().min(width),
                    msg: format!("expected {width} columns, found {}", row.len()),
                });
            }
            for (c, (&v, &card)) in row.iter().zip(&cardinalities).enumerate() {
                if v >= card {
                    return Err(Error::Data { row: r, col: c, msg: format!("value {v} >= cardinality {card}") });
                }
            }
            cells.extend_from_slice(row);
        }
        Ok(Self { name: String::new(), cardinalities, cells })
    }

    /// An empty dataset over the given columns.
    pub fn empty(cardinalities: Vec<u32>) -> Self {
        Self { name: String::new(), cardinalities, cells: Vec::new() }
    }

    pub(crate) fn from_cells_unchecked(cardinalities: Vec<u32>, cells: Vec<u32>) -> Self {
        debug_assert!(cardinalities.is_empty() || cells.len().is_multiple_of(cardinalities.len()));
        Self { name: String::new(), cardinalities, cells }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_vars(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn len(&self) -> usize {
        if self.cardinalities.is_empty() {
            0
        } else {
            self.cells.len() / self.cardinalities.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cardinalities(&self) -> &[u32] {
        &self.cardinalities
    }

    pub fn row(&self, i: usize) -> &[u32] {
        let w = self.num_vars();
        &self.cells[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        let w = self.num_vars().max(1);
        self.cells.chunks_exact(w).take(self.len())
    }

    pub fn cells(&self) -> &[u32] {
        &self.cells
    }

    /// New dataset made of the given rows of `self`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut cells = Vec::with_capacity(indices.len() * self.num_vars());
        for &i in indices {
            cells.extend_from_slice(self.row(i));
        }
        Self { name: self.name.clone(), cardinalities: self.cardinalities.clone(), cells }
    }

    /// Appends `other` below `self`. Column layouts must agree.
    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        if self.cardinalities != other.cardinalities {
            return Err(Error::InvalidArgument("datasets have different column layouts".into()));
        }
        let mut cells = self.cells.clone();
        cells.extend_from_slice(&other.cells);
        Ok(Self { name: self.name.clone(), cardinalities: self.cardinalities.clone(), cells })
    }

    /// Splits off the trailing `fraction` of rows, returning `(head, tail)`.
    pub fn split_tail(&self, fraction: f64) -> (Self, Self) {
        let n = self.len();
        let tail = ((n as f64) * fraction).round() as usize;
        let head: Vec<usize> = (0..n - tail.min(n)).collect();
        let rest: Vec<usize> = (n - tail.min(n)..n).collect();
        (self.select(&head), self.select(&rest))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_cell() {
        let err = Dataset::from_rows(vec![2, 3], &[[0u32, 2], [1, 3]]).unwrap_err();
        match err {
            Error::Data { row, col, .. } => assert_eq!((row, col), (1, 1)),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rows_and_select() {
        let d = Dataset::from_rows(vec![2, 2], &[[0u32, 1], [1, 0], [1, 1]]).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.rows().collect::<Vec<_>>(), vec![&[0, 1][..], &[1, 0], &[1, 1]]);
        let s = d.select(&[2, 0]);
        assert_eq!(s.row(0), &[1, 1]);
        assert_eq!(s.row(1), &[0, 1]);
        let (h, t) = d.split_tail(1.0 / 3.0);
        assert_eq!((h.len(), t.len()), (2, 1));
    }
}
