//! Sparse symmetric storage, Matrix Market ingestion and synthetic matrices.
//!
//! [`SparseSym`] keeps the lower triangle (diagonal included) in compressed
//! row form; the upper triangle is implied by symmetry.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum MatioError {
    #[error("malformed Matrix Market banner: {0}")]
    Banner(String),
    #[error("unsupported Matrix Market kind: {0}")]
    Unsupported(String),
    #[error("malformed size line: {0}")]
    Header(String),
    #[error("line {line}: {msg}")]
    Entry { line: usize, msg: String },
    #[error("line {line}: index ({row}, {col}) outside a {n}x{n} matrix")]
    IndexOutOfRange { line: usize, row: usize, col: usize, n: usize },
    #[error("general matrix is not symmetric at ({row}, {col})")]
    Asymmetric { row: usize, col: usize },
    #[error("header announces {expected} entries, found {found}")]
    EntryCount { expected: usize, found: usize },
    #[error("invalid sparse structure: {0}")]
    Structure(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Real symmetric sparse matrix stored as the lower triangle in CSR form.
#[derive(Debug, Clone)]
pub struct SparseSym<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
    norm_est: OnceLock<T>,
}

impl<T: Real> SparseSym<T> {
    /// Builds a matrix from raw lower-triangular CSR arrays, validating every
    /// structural invariant.
    pub fn from_csr(
        n: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self, MatioError> {
        if row_ptr.len() != n + 1 {
            return Err(MatioError::Structure(format!(
                "row_ptr has length {}, expected {}",
                row_ptr.len(),
                n + 1
            )));
        }
        if row_ptr[0] != 0 || row_ptr[n] != col_idx.len() || col_idx.len() != values.len() {
            return Err(MatioError::Structure("row_ptr does not span the entry arrays".into()));
        }
        for i in 0..n {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(MatioError::Structure(format!("row_ptr decreases at row {i}")));
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            for (k, &c) in cols.iter().enumerate() {
                if c > i {
                    return Err(MatioError::Structure(format!(
                        "entry ({i}, {c}) lies above the diagonal"
                    )));
                }
                if k > 0 && cols[k - 1] >= c {
                    return Err(MatioError::Structure(format!(
                        "column indices not strictly increasing in row {i}"
                    )));
                }
            }
        }
        Ok(Self { n, row_ptr, col_idx, values, norm_est: OnceLock::new() })
    }

    /// Builds a matrix from `(row, col, value)` triplets (0-based). Entries in
    /// the upper triangle are folded into the lower one and duplicates are
    /// summed.
    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self, MatioError>
    where
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        let mut rows: Vec<BTreeMap<usize, T>> = vec![BTreeMap::new(); n];
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(MatioError::InvalidArgument(format!(
                    "triplet ({i}, {j}) outside a {n}x{n} matrix"
                )));
            }
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            let slot = rows[r].entry(c).or_insert_with(T::zero);
            *slot = *slot + v;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self::from_csr(n, row_ptr, col_idx, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored (lower-triangular) entries.
    pub fn nnz_stored(&self) -> usize {
        self.values.len()
    }

    /// Number of nonzeros of the full symmetric matrix implied by the storage.
    pub fn nnz_full(&self) -> usize {
        let diag = (0..self.n)
            .filter(|&i| self.row(i).any(|(c, _)| c == i))
            .count();
        2 * self.values.len() - diag
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Stored entries `(col, value)` of lower-triangular row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    /// Entry `(i, j)` of the full symmetric matrix.
    pub fn get(&self, i: usize, j: usize) -> T {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Full dense matrix in column-major order (equal to row-major by symmetry).
    pub fn to_dense_col_major(&self) -> Vec<T> {
        let n = self.n;
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            for (j, v) in self.row(i) {
                out[i + j * n] = v;
                out[j + i * n] = v;
            }
        }
        out
    }

    /// Cached estimate of the spectral norm, if one has been computed.
    pub fn norm_est(&self) -> Option<T> {
        self.norm_est.get().copied()
    }

    pub(crate) fn cache_norm_est(&self, value: T) -> T {
        *self.norm_est.get_or_init(|| value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MmSymmetry {
    Symmetric,
    General,
}

/// Parses a Matrix Market coordinate file (`real` or `integer` field,
/// `symmetric` or `general` symmetry).
///
/// General matrices are accepted only when every entry matches its transpose
/// to 1e-12 relative; they are then folded to lower-triangular storage.
pub fn parse_matrix_market<T: Real, R: Read>(mut reader: R) -> Result<SparseSym<T>, MatioError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    parse_matrix_market_str(&text)
}

pub fn read_matrix_market<T: Real>(path: impl AsRef<Path>) -> Result<SparseSym<T>, MatioError> {
    let file = std::fs::File::open(path)?;
    parse_matrix_market(std::io::BufReader::new(file))
}

pub fn parse_matrix_market_str<T: Real>(text: &str) -> Result<SparseSym<T>, MatioError> {
    let mut lines = text.lines().enumerate();
    let (_, banner) = lines.next().ok_or_else(|| MatioError::Banner("empty input".into()))?;
    let symmetry = parse_banner(banner)?;

    let mut header = None;
    for (lineno, line) in lines.by_ref() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        header = Some((lineno + 1, trimmed));
        break;
    }
    let (_, header) = header.ok_or_else(|| MatioError::Header("missing size line".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| MatioError::Header(format!("{header:?}: {e}")))?;
    let [rows, cols, nnz] = dims[..] else {
        return Err(MatioError::Header(format!("expected 3 integers, got {header:?}")));
    };
    if rows != cols {
        return Err(MatioError::Header(format!("matrix is {rows}x{cols}, not square")));
    }
    let n = rows;

    let mut entries: Vec<(usize, usize, T)> = Vec::with_capacity(nnz);
    for (lineno, line) in lines {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let lineno = lineno + 1;
        let mut tok = trimmed.split_whitespace();
        let (Some(r), Some(c), Some(v)) = (tok.next(), tok.next(), tok.next()) else {
            return Err(MatioError::Entry { line: lineno, msg: "expected `row col value`".into() });
        };
        if tok.next().is_some() {
            return Err(MatioError::Entry { line: lineno, msg: "trailing tokens".into() });
        }
        let parse_index = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| MatioError::Entry { line: lineno, msg: format!("index {s:?}: {e}") })
        };
        let (r, c) = (parse_index(r)?, parse_index(c)?);
        if r == 0 || c == 0 || r > n || c > n {
            return Err(MatioError::IndexOutOfRange { line: lineno, row: r, col: c, n });
        }
        let value = T::from_str_radix(v, 10)
            .map_err(|_| MatioError::Entry { line: lineno, msg: format!("value {v:?}") })?;
        entries.push((r - 1, c - 1, value));
    }
    if entries.len() != nnz {
        return Err(MatioError::EntryCount { expected: nnz, found: entries.len() });
    }

    match symmetry {
        MmSymmetry::Symmetric => SparseSym::from_triplets(n, entries),
        MmSymmetry::General => {
            let mut full: BTreeMap<(usize, usize), T> = BTreeMap::new();
            for (i, j, v) in entries {
                let slot = full.entry((i, j)).or_insert_with(T::zero);
                *slot = *slot + v;
            }
            let tol = T::lit(1e-12);
            for (&(i, j), &v) in &full {
                if i == j {
                    continue;
                }
                let w = full.get(&(j, i)).copied().unwrap_or_else(T::zero);
                if (v - w).abs() > tol * v.abs().max(w.abs()) {
                    return Err(MatioError::Asymmetric { row: i + 1, col: j + 1 });
                }
            }
            SparseSym::from_triplets(
                n,
                full.into_iter().filter(|&((i, j), _)| i >= j).map(|((i, j), v)| (i, j, v)),
            )
        }
    }
}

fn parse_banner(line: &str) -> Result<MmSymmetry, MatioError> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(MatioError::Banner(line.to_string()));
    }
    if tokens[1] != "matrix" {
        return Err(MatioError::Unsupported(format!("object {:?}", tokens[1])));
    }
    if tokens[2] != "coordinate" {
        return Err(MatioError::Unsupported(format!("format {:?}", tokens[2])));
    }
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(MatioError::Unsupported(format!("field {other:?}"))),
    }
    match tokens[4].as_str() {
        "symmetric" => Ok(MmSymmetry::Symmetric),
        "general" => Ok(MmSymmetry::General),
        other => Err(MatioError::Unsupported(format!("symmetry {other:?}"))),
    }
}

/// Serializes the matrix as a `coordinate real symmetric` Matrix Market file.
/// Values use the shortest round-trip representation.
pub fn write_matrix_market<T: Real>(a: &SparseSym<T>) -> String {
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix coordinate real symmetric\n");
    let _ = writeln!(out, "{} {} {}", a.n, a.n, a.nnz_stored());
    for i in 0..a.n {
        for (j, v) in a.row(i) {
            let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
        }
    }
    out
}

/// Makes an indefinite matrix positive definite: `A - 1.05·λ1·I` when
/// `λ1 <= 0`, otherwise `A` unchanged. `lambda1` must be the algebraically
/// smallest eigenvalue of `A`. The shifted matrix stores every diagonal entry.
pub fn apply_spd_shift<T: Real>(a: &SparseSym<T>, lambda1: T) -> SparseSym<T> {
    if lambda1 > T::zero() {
        return a.clone();
    }
    let shift = -T::lit(1.05) * lambda1;
    let diag = (0..a.n).map(|i| (i, i, shift));
    let stored = (0..a.n).flat_map(|i| a.row(i).map(move |(j, v)| (i, j, v)));
    SparseSym::from_triplets(a.n, stored.chain(diag)).expect("shifted structure stays valid")
}

pub fn gen_diag<T: Real>(values: &[T]) -> Result<SparseSym<T>, MatioError> {
    if values.is_empty() {
        return Err(MatioError::InvalidArgument("diagonal needs at least one value".into()));
    }
    let n = values.len();
    SparseSym::from_csr(n, (0..=n).collect(), (0..n).collect(), values.to_vec())
}

/// Tridiagonal `[-1, 2, -1]` matrix; eigenvalues `2 - 2cos(kπ/(n+1))`.
pub fn gen_laplacian_1d<T: Real>(n: usize) -> Result<SparseSym<T>, MatioError> {
    if n < 2 {
        return Err(MatioError::InvalidArgument(format!("laplacian needs n >= 2, got {n}")));
    }
    let mut row_ptr = vec![0];
    let mut col_idx = Vec::with_capacity(2 * n);
    let mut values = Vec::with_capacity(2 * n);
    for i in 0..n {
        if i > 0 {
            col_idx.push(i - 1);
            values.push(-T::one());
        }
        col_idx.push(i);
        values.push(T::lit(2.0));
        row_ptr.push(col_idx.len());
    }
    SparseSym::from_csr(n, row_ptr, col_idx, values)
}

/// Closed-form spectrum of [`gen_laplacian_1d`], ascending.
pub fn laplacian_1d_eigenvalues(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
        .collect()
}

/// Diagonal matrix with geometric spectrum `ratio^i`, `i = 0..n`.
pub fn gen_diag_geom<T: Real>(n: usize, ratio: T) -> Result<SparseSym<T>, MatioError> {
    if n == 0 || ratio <= T::zero() {
        return Err(MatioError::InvalidArgument(format!(
            "diag-geom needs n >= 1 and ratio > 0, got n={n}, ratio={ratio}"
        )));
    }
    let values: Vec<T> = (0..n).map(|i| ratio.powi(i as i32)).collect();
    gen_diag(&values)
}

/// Synthetic matrix description: `laplacian1d:N`, `diag:v1,v2,...` or
/// `diag-geom:n,ratio`.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    Laplacian1d(usize),
    Diag(Vec<f64>),
    DiagGeom { n: usize, ratio: f64 },
}

impl GeneratorSpec {
    pub fn build<T: Real>(&self) -> Result<SparseSym<T>, MatioError> {
        match self {
            GeneratorSpec::Laplacian1d(n) => gen_laplacian_1d(*n),
            GeneratorSpec::Diag(values) => {
                gen_diag(&values.iter().map(|&v| T::lit(v)).collect::<Vec<_>>())
            }
            GeneratorSpec::DiagGeom { n, ratio } => gen_diag_geom(*n, T::lit(*ratio)),
        }
    }
}

impl FromStr for GeneratorSpec {
    type Err = MatioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |msg: &str| MatioError::InvalidArgument(format!("generator {s:?}: {msg}"));
        let (kind, args) = s.split_once(':').ok_or_else(|| bad("expected KIND:ARGS"))?;
        match kind {
            "laplacian1d" => {
                let n = args.trim().parse().map_err(|_| bad("N must be an integer"))?;
                Ok(GeneratorSpec::Laplacian1d(n))
            }
            "diag" => {
                let values = args
                    .split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| bad("values must be reals"))?;
                Ok(GeneratorSpec::Diag(values))
            }
            "diag-geom" => {
                let (n, ratio) = args.split_once(',').ok_or_else(|| bad("expected n,ratio"))?;
                let n = n.trim().parse().map_err(|_| bad("n must be an integer"))?;
                let ratio = ratio.trim().parse().map_err(|_| bad("ratio must be real"))?;
                Ok(GeneratorSpec::DiagGeom { n, ratio })
            }
            _ => Err(bad("unknown generator kind")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_banner_absent_diagonal_is_zero() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 2.0\n2 1 1.0\n";
        let a: SparseSym<f64> = parse_matrix_market_str(text).unwrap();
        assert_eq!(a.n(), 2);
        assert_eq!(a.get(0, 0), 2.0);
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(1, 0), 1.0);
        assert_eq!(a.get(1, 1), 0.0);
    }

    #[test]
    fn one_by_one() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n1 1 1\n1 1 5.0\n";
        let a: SparseSym<f64> = parse_matrix_market_str(text).unwrap();
        assert_eq!(a.diagonal(), vec![5.0]);
    }

    #[test]
    fn integer_field_and_exponents() {
        let text = "%%MatrixMarket matrix coordinate integer symmetric\n2 2 2\n1 1 3\n2 2 4\n";
        let a: SparseSym<f64> = parse_matrix_market_str(text).unwrap();
        assert_eq!(a.diagonal(), vec![3.0, 4.0]);
        let text = "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n2 1 -1.5E-3\n";
        let a: SparseSym<f64> = parse_matrix_market_str(text).unwrap();
        assert_eq!(a.get(0, 1), -1.5e-3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let cases = [
            "%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n",
            "%%MatrixMarket matrix coordinate complex symmetric\n1 1 1\n1 1 1 0\n",
            "%%MatrixMarket matrix coordinate pattern symmetric\n1 1 1\n1 1\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1.0\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n2 1 1.0\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 3 1\n1 1 1.0\n",
            "MatrixMarket matrix coordinate real symmetric\n1 1 1\n1 1 1.0\n",
            "",
        ];
        for text in cases {
            assert!(parse_matrix_market_str::<f64>(text).is_err(), "accepted {text:?}");
        }
    }

    #[test]
    fn general_symmetric_is_folded() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 4\n1 1 1.0\n1 2 0.5\n2 1 0.5\n2 2 3.0\n";
        let a: SparseSym<f64> = parse_matrix_market_str(text).unwrap();
        assert_eq!(a.nnz_stored(), 3);
        assert_eq!(a.get(0, 1), 0.5);
    }

    #[test]
    fn shift_branches() {
        let a = gen_diag(&[1.0, 2.0]).unwrap();
        let same = apply_spd_shift(&a, 1.0);
        assert_eq!(same.diagonal(), vec![1.0, 2.0]);
        let b = gen_diag::<f64>(&[-1.0, 2.0]).unwrap();
        let shifted = apply_spd_shift(&b, -1.0);
        let d = shifted.diagonal();
        assert!((d[0] - 0.05).abs() < 1e-15 && (d[1] - 3.05).abs() < 1e-15);
    }

    #[test]
    fn shift_materializes_missing_diagonal() {
        let a = SparseSym::<f64>::from_triplets(3, [(1, 0, -1.0)]).unwrap();
        let s = apply_spd_shift(&a, -1.0);
        for i in 0..3 {
            assert!(s.row(i).any(|(c, _)| c == i));
        }
    }

    #[test]
    fn generators() {
        assert!(gen_diag::<f64>(&[]).is_err());
        assert!(gen_laplacian_1d::<f64>(1).is_err());
        let l = gen_laplacian_1d::<f64>(2).unwrap();
        assert_eq!(l.to_dense_col_major(), vec![2.0, -1.0, -1.0, 2.0]);
        let g = gen_diag_geom::<f64>(3, 2.0).unwrap();
        assert_eq!(g.diagonal(), vec![1.0, 2.0, 4.0]);
        assert_eq!(l.nnz_full(), 4);
    }

    #[test]
    fn generator_specs() {
        assert_eq!("laplacian1d:400".parse::<GeneratorSpec>().unwrap(), GeneratorSpec::Laplacian1d(400));
        assert_eq!(
            "diag:1,10,100".parse::<GeneratorSpec>().unwrap(),
            GeneratorSpec::Diag(vec![1.0, 10.0, 100.0])
        );
        assert_eq!(
            "diag-geom:500,1.02".parse::<GeneratorSpec>().unwrap(),
            GeneratorSpec::DiagGeom { n: 500, ratio: 1.02 }
        );
        assert!("nope:3".parse::<GeneratorSpec>().is_err());
        assert!("laplacian1d".parse::<GeneratorSpec>().is_err());
    }

    #[test]
    fn csr_validation() {
        assert!(SparseSym::<f64>::from_csr(2, vec![0, 1, 2], vec![0, 2], vec![1.0, 1.0]).is_err());
        assert!(SparseSym::<f64>::from_csr(2, vec![0, 1, 3], vec![0, 1, 0], vec![1.0; 3]).is_err());
        assert!(SparseSym::<f64>::from_csr(2, vec![0, 1, 3], vec![0, 0, 1], vec![1.0; 3]).is_ok());
    }
}
