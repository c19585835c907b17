//! Compressed sparse row matrices built from triplets.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::MeshError;

/// Rows above which matrix-vector products run in parallel.
const PARALLEL_ROWS: usize = 4096;

/// Coordinate-format accumulator; duplicates are summed on finalization.
#[derive(Clone, Debug, Default)]
pub struct TripletMatrix {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        TripletMatrix {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols, "({i}, {j}) out of bounds");
        self.entries.push((i, j, v));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sorts, sums duplicates and compresses. Explicit zeros produced by
    /// summation are kept so that the pattern reflects the element couplings.
    pub fn finalize(mut self) -> CsrMatrix {
        self.entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0usize; self.rows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for r in 0..self.rows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            values,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CsrMatrix {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    /// Stored entry `(i, j)`, or `None` outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| self.values[r.start + k])
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.get(i, j).is_some()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, i).unwrap_or(0.0)).collect()
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        let row_dot = |i: usize| self.row(i).map(|(j, v)| v * x[j]).sum::<f64>();
        if self.rows >= PARALLEL_ROWS {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = row_dot(i));
        } else {
            y.iter_mut().enumerate().for_each(|(i, yi)| *yi = row_dot(i));
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `y = Aᵀ x`
    pub fn transpose_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (j, v) in self.row(i) {
                    y[j] += v * xi;
                }
            }
        }
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = TripletMatrix::new(self.cols, self.rows);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                t.push(j, i, v);
            }
        }
        t.finalize()
    }

    pub fn to_triplets(&self) -> TripletMatrix {
        let mut t = TripletMatrix::new(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                t.push(i, j, v);
            }
        }
        t
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Largest `|a_ij - a_ji|`; `None` for non-square matrices.
    pub fn asymmetry(&self) -> Option<f64> {
        if self.rows != self.cols {
            return None;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                let w = self.get(j, i).unwrap_or(0.0);
                worst = worst.max((v - w).abs());
            }
        }
        Some(worst)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Whether every stored entry of `self` is also stored in `other`.
    pub fn pattern_subset_of(&self, other: &CsrMatrix) -> bool {
        (0..self.rows).all(|i| self.row(i).all(|(j, _)| other.contains(i, j)))
    }

    /// Rows and columns selected by the index lists.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.cols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut t = TripletMatrix::new(rows.len(), cols.len());
        for (k, &r) in rows.iter().enumerate() {
            for (j, v) in self.row(r) {
                if col_map[j] != usize::MAX {
                    t.push(k, col_map[j], v);
                }
            }
        }
        t.finalize()
    }

    /// Text dump: `matrix <rows> <cols> <nnz>`, then one `<i> <j> <value>` line per entry.
    pub fn dump(&self) -> String {
        let mut s = format!("matrix {} {} {}\n", self.rows, self.cols, self.nnz());
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                writeln!(s, "{i} {j} {v:?}").unwrap();
            }
        }
        s
    }

    pub fn parse_dump(text: &str) -> Result<CsrMatrix, MeshError> {
        let err = |line: usize, message: &str| MeshError::Parse {
            line,
            message: message.to_string(),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "missing header"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 || h[0] != "matrix" {
            return Err(err(1, "expected `matrix <rows> <cols> <nnz>`"));
        }
        let num = |s: &str, line| s.parse::<usize>().map_err(|_| err(line, "bad integer"));
        let (rows, cols, nnz) = (num(h[1], 1)?, num(h[2], 1)?, num(h[3], 1)?);
        let mut t = TripletMatrix::new(rows, cols);
        for (k, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(err(k + 1, "expected `<i> <j> <value>`"));
            }
            let (i, j) = (num(f[0], k + 1)?, num(f[1], k + 1)?);
            if i >= rows || j >= cols {
                return Err(err(k + 1, "index out of range"));
            }
            let v = f[2].parse::<f64>().map_err(|_| err(k + 1, "bad value"))?;
            t.push(i, j, v);
        }
        if t.len() != nnz {
            return Err(err(1, "entry count does not match header"));
        }
        Ok(t.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix {
        let mut t = TripletMatrix::new(3, 3);
        t.push(0, 0, 2.0);
        t.push(2, 1, -1.0);
        t.push(0, 0, 1.0);
        t.push(1, 2, 4.0);
        t.push(1, 0, 0.5);
        t.finalize()
    }

    #[test]
    fn duplicates_are_summed() {
        let m = sample();
        assert_eq!(m.nnz(), 4);
        assert_eq!(m.get(0, 0), Some(3.0));
        assert_eq!(m.get(0, 1), None);
        assert_eq!(m.mul_vec(&[1.0, 2.0, 3.0]), vec![3.0, 12.5, -2.0]);
    }

    #[test]
    fn transpose_matches_dense() {
        let m = sample();
        assert_eq!(m.transpose().to_dense(), m.to_dense().transpose());
        let x = [1.0, -1.0, 2.0];
        let dense = m.to_dense().transpose() * nalgebra::DVector::from_column_slice(&x);
        assert_eq!(m.transpose_mul_vec(&x), dense.as_slice());
    }

    #[test]
    fn dump_round_trip() {
        let m = sample();
        assert_eq!(CsrMatrix::parse_dump(&m.dump()).unwrap(), m);
        assert!(CsrMatrix::parse_dump("matrix 2 2 1\n5 0 1.0\n").is_err());
    }

    #[test]
    fn submatrix_and_pattern() {
        let m = sample();
        let s = m.submatrix(&[0, 1], &[0, 2]);
        assert_eq!(s.to_dense(), DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.5, 4.0]));
        assert!(s.pattern_subset_of(&m.submatrix(&[0, 1], &[0, 2])));
        assert!(!m.pattern_subset_of(&CsrMatrix::identity(3)));
        assert_eq!(m.asymmetry(), Some(5.0));
    }
}
