//! Compressed sparse row storage for complex Hermitian operators.
//!
//! Triplet export format, one entry per line after a header:
//!
//! ```text
//! % magneto-spectra triplets
//! <nrows> <ncols> <nnz>
//! <row> <col> <re> <im>
//! ```
//!
//! Indices are 0-based and entries are listed row by row.

use std::io::{self, Write};

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<Complex64>,
}

impl CsrMatrix {
    /// Builds a matrix from unsorted triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut entries: Vec<(usize, usize, Complex64)>) -> Self {
        entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(entries.len());
        let mut last = None;
        for (i, j, v) in entries {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) outside {nrows}x{ncols}");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn from_dense(rows: &[Vec<Complex64>]) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let entries = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().filter(|(_, v)| v.norm() != 0.0).map(move |(j, &v)| (i, j, v)))
            .collect();
        Self::from_triplets(n, m, entries)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.ncols);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `xᴴ A y`
    pub fn form(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        (0..self.nrows).map(|i| x[i].conj() * self.row(i).map(|(j, v)| v * y[j]).sum::<Complex64>()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `max |A - Aᴴ|` over stored entries.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// `A + c B` on the union pattern.
    pub fn add_scaled(&self, c: Complex64, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut entries = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.nrows {
            entries.extend(self.row(i).map(|(j, v)| (i, j, v)));
            entries.extend(other.row(i).map(|(j, v)| (i, j, c * v)));
        }
        Self::from_triplets(self.nrows, self.ncols, entries)
    }

    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut d = vec![vec![Complex64::new(0.0, 0.0); self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// Column indices of row `i`.
    pub fn pattern(&self, i: usize) -> &[usize] {
        &self.indices[self.indptr[i]..self.indptr[i + 1]]
    }

    pub fn write_triplets<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "% magneto-spectra triplets")?;
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                writeln!(out, "{i} {j} {:.17e} {:.17e}", v.re, v.im)?;
            }
        }
        Ok(())
    }

    pub fn read_triplets(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim_start().starts_with('%') && !l.trim().is_empty());
        let header = lines.next().ok_or("missing header")?;
        let dims: Vec<usize> =
            header.split_whitespace().map(str::parse).collect::<Result<_, _>>().map_err(|e| format!("{e}"))?;
        let [n, m, nnz] = dims[..] else { return Err(format!("bad header {header:?}")) };
        let mut entries = Vec::with_capacity(nnz);
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(format!("bad entry {line:?}"));
            }
            let parse = |s: &str| s.parse::<f64>().map_err(|e| format!("{e}"));
            let idx = |s: &str| s.parse::<usize>().map_err(|e| format!("{e}"));
            entries.push((idx(f[0])?, idx(f[1])?, Complex64::new(parse(f[2])?, parse(f[3])?)));
        }
        if entries.len() != nnz {
            return Err(format!("expected {nnz} entries, found {}", entries.len()));
        }
        Ok(Self::from_triplets(n, m, entries))
    }
}
