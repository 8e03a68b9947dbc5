//! Dense and sampled third-order tensors.
//!
//! Element ordering is column-major throughout: the first index varies
//! fastest, so the linear index of entry `(i1, i2, i3)` (0-based) is
//! `i1 + n1*(i2 + n2*i3)`. Both unfoldings are plain reinterpretations of
//! the flat buffer under this convention:
//!
//! * left unfolding: `n1 x (n2*n3)`, column `i2 + n2*i3`
//! * right unfolding: `(n1*n2) x n3`, row `i1 + n1*i2`
//!
//! Indices are 0-based internally; file formats and the CLI use 1-based
//! indices.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ShapeBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mode sizes of a third-order tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
}

impl Dims {
    pub fn new(n1: usize, n2: usize, n3: usize) -> Self {
        Dims { n1, n2, n3 }
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2 * self.n3
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, i1: usize, i2: usize, i3: usize) -> bool {
        i1 < self.n1 && i2 < self.n2 && i3 < self.n3
    }

    pub fn linear(&self, i1: usize, i2: usize, i3: usize) -> usize {
        i1 + self.n1 * (i2 + self.n2 * i3)
    }

    /// Inverse of [`Dims::linear`].
    pub fn unlinear(&self, l: usize) -> [usize; 3] {
        let i1 = l % self.n1;
        let rest = l / self.n1;
        [i1, rest % self.n2, rest / self.n2]
    }
}

/// Dense `n1 x n2 x n3` tensor stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor3 {
    dims: Dims,
    data: Vec<f64>,
}

impl DenseTensor3 {
    pub fn zeros(dims: Dims) -> Self {
        DenseTensor3 {
            dims,
            data: vec![0.0; dims.len()],
        }
    }

    pub fn from_vec(dims: Dims, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values", dims.len()),
                got: format!("{}", data.len()),
            });
        }
        Ok(DenseTensor3 { dims, data })
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dims);
        for i3 in 0..dims.n3 {
            for i2 in 0..dims.n2 {
                for i1 in 0..dims.n1 {
                    t.data[dims.linear(i1, i2, i3)] = f(i1, i2, i3);
                }
            }
        }
        t
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i1: usize, i2: usize, i3: usize) -> f64 {
        self.data[self.dims.linear(i1, i2, i3)]
    }

    #[inline]
    pub fn set(&mut self, i1: usize, i2: usize, i3: usize, v: f64) {
        let l = self.dims.linear(i1, i2, i3);
        self.data[l] = v;
    }

    /// `n1 x (n2*n3)` matricization; entry `(i1, i2 + n2*i3)`.
    pub fn left_unfold(&self) -> Array2<f64> {
        Array2::from_shape_vec(
            (self.dims.n1, self.dims.n2 * self.dims.n3).f(),
            self.data.clone(),
        )
        .expect("shape fixed by construction")
    }

    /// `(n1*n2) x n3` matricization; entry `(i1 + n1*i2, i3)`.
    pub fn right_unfold(&self) -> Array2<f64> {
        Array2::from_shape_vec(
            (self.dims.n1 * self.dims.n2, self.dims.n3).f(),
            self.data.clone(),
        )
        .expect("shape fixed by construction")
    }

    pub fn fold_left(m: &Array2<f64>, dims: Dims) -> Result<Self> {
        if m.nrows() != dims.n1 || m.ncols() != dims.n2 * dims.n3 {
            return Err(Error::DimensionMismatch {
                expected: format!("{} x {}", dims.n1, dims.n2 * dims.n3),
                got: format!("{} x {}", m.nrows(), m.ncols()),
            });
        }
        let mut t = Self::zeros(dims);
        for c in 0..m.ncols() {
            for i1 in 0..dims.n1 {
                t.data[i1 + dims.n1 * c] = m[[i1, c]];
            }
        }
        Ok(t)
    }

    pub fn fold_right(m: &Array2<f64>, dims: Dims) -> Result<Self> {
        if m.nrows() != dims.n1 * dims.n2 || m.ncols() != dims.n3 {
            return Err(Error::DimensionMismatch {
                expected: format!("{} x {}", dims.n1 * dims.n2, dims.n3),
                got: format!("{} x {}", m.nrows(), m.ncols()),
            });
        }
        let mut t = Self::zeros(dims);
        for i3 in 0..dims.n3 {
            for r in 0..m.nrows() {
                t.data[r + dims.n1 * dims.n2 * i3] = m[[r, i3]];
            }
        }
        Ok(t)
    }

    pub fn inner(&self, other: &DenseTensor3) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch {
                expected: format!("{:?}", self.dims),
                got: format!("{:?}", other.dims),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, a: f64) -> DenseTensor3 {
        DenseTensor3 {
            dims: self.dims,
            data: self.data.iter().map(|x| a * x).collect(),
        }
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, a: f64, other: &DenseTensor3) -> Result<DenseTensor3> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch {
                expected: format!("{:?}", self.dims),
                got: format!("{:?}", other.dims),
            });
        }
        Ok(DenseTensor3 {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| x + a * y)
                .collect(),
        })
    }

    pub fn sub(&self, other: &DenseTensor3) -> Result<DenseTensor3> {
        self.add_scaled(-1.0, other)
    }

    /// Text format: header line `n1 n2 n3`, then values in column-major
    /// order, whitespace-separated.
    pub fn write_text(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "{} {} {}", self.dims.n1, self.dims.n2, self.dims.n3).unwrap();
        for v in &self.data {
            writeln!(out, "{v}").unwrap();
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn read_text(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut tokens = text.split_whitespace();
        let mut dim = |name: &str| -> Result<usize> {
            tokens
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {name}")))?
                .parse()
                .map_err(|e| Error::Parse(format!("bad {name}: {e}")))
        };
        let dims = Dims::new(dim("n1")?, dim("n2")?, dim("n3")?);
        let data: Vec<f64> = text
            .split_whitespace()
            .skip(3)
            .map(|t| {
                t.parse()
                    .map_err(|e| Error::Parse(format!("bad value: {e}")))
            })
            .collect::<Result<_>>()?;
        Self::from_vec(dims, data)
    }
}

/// Observed entries of a tensor: the sampling set with its values.
///
/// Entries are kept sorted lexicographically by `(i1, i2, i3)` so that
/// masking and gradient scatter are deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dims: Dims,
    indices: Vec<[usize; 3]>,
    values: Vec<f64>,
}

impl SampleSet {
    pub fn new(dims: Dims, mut entries: Vec<([usize; 3], f64)>) -> Result<Self> {
        for ([i1, i2, i3], _) in &entries {
            if !dims.contains(*i1, *i2, *i3) {
                return Err(Error::IndexOutOfRange(
                    *i1, *i2, *i3, dims.n1, dims.n2, dims.n3,
                ));
            }
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateIndex(w[0].0[0], w[0].0[1], w[0].0[2]));
            }
        }
        let (indices, values) = entries.into_iter().unzip();
        Ok(SampleSet {
            dims,
            indices,
            values,
        })
    }

    /// Restriction of a dense tensor to an index set.
    pub fn mask(t: &DenseTensor3, omega: &[[usize; 3]]) -> Result<Self> {
        let dims = t.dims();
        let entries = omega
            .iter()
            .map(|&[i1, i2, i3]| {
                if !dims.contains(i1, i2, i3) {
                    return Err(Error::IndexOutOfRange(
                        i1, i2, i3, dims.n1, dims.n2, dims.n3,
                    ));
                }
                Ok(([i1, i2, i3], t.get(i1, i2, i3)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dims, entries)
    }

    /// Dense tensor agreeing with the samples on the index set, zero
    /// elsewhere.
    pub fn scatter(&self) -> DenseTensor3 {
        let mut t = DenseTensor3::zeros(self.dims);
        for (idx, v) in self.indices.iter().zip(&self.values) {
            t.set(idx[0], idx[1], idx[2], *v);
        }
        t
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[[usize; 3]] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = ([usize; 3], f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// Same index set, new values (order must match `indices()`).
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.indices.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values", self.indices.len()),
                got: format!("{}", values.len()),
            });
        }
        Ok(SampleSet {
            dims: self.dims,
            indices: self.indices.clone(),
            values,
        })
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum()
    }

    /// Inner product of two sample sets over the same index set.
    pub fn dot(&self, other: &SampleSet) -> Result<f64> {
        if self.dims != other.dims || self.indices != other.indices {
            return Err(Error::DimensionMismatch {
                expected: "matching sample supports".into(),
                got: "different supports".into(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum())
    }

    /// CSV with header `i1,i2,i3,value`, 1-based indices.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("i1,i2,i3,value\n");
        for (idx, v) in self.iter() {
            writeln!(out, "{},{},{},{v}", idx[0] + 1, idx[1] + 1, idx[2] + 1).unwrap();
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn read_csv(path: &Path, dims: Dims) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if lineno == 0 {
                if line.trim() != "i1,i2,i3,value" {
                    return Err(Error::Parse(format!("bad header: {line}")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Parse(format!("line {}: expected 4 fields", lineno + 1)));
            }
            let one_based = |s: &str| -> Result<usize> {
                let i: usize = s
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
                if i == 0 {
                    return Err(Error::Parse(format!("line {}: index must be 1-based", lineno + 1)));
                }
                Ok(i - 1)
            };
            let v: f64 = fields[3]
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            entries.push(([one_based(fields[0])?, one_based(fields[1])?, one_based(fields[2])?], v));
        }
        Self::new(dims, entries)
    }
}

/// Mode-1 contraction `M . T`: `out(a, i2, i3) = sum_i1 M(a, i1) T(i1, i2, i3)`.
pub fn contract_left(m: &Array2<f64>, t: &DenseTensor3) -> Result<DenseTensor3> {
    if m.ncols() != t.dims().n1 {
        return Err(Error::DimensionMismatch {
            expected: format!("{} columns", t.dims().n1),
            got: format!("{}", m.ncols()),
        });
    }
    let out = m.dot(&t.left_unfold());
    DenseTensor3::fold_left(&out, Dims::new(m.nrows(), t.dims().n2, t.dims().n3))
}

/// Mode-3 contraction `T . M`: `out(i1, i2, b) = sum_i3 T(i1, i2, i3) M(i3, b)`.
pub fn contract_right(t: &DenseTensor3, m: &Array2<f64>) -> Result<DenseTensor3> {
    if m.nrows() != t.dims().n3 {
        return Err(Error::DimensionMismatch {
            expected: format!("{} rows", t.dims().n3),
            got: format!("{}", m.nrows()),
        });
    }
    let out = t.right_unfold().dot(m);
    DenseTensor3::fold_right(&out, Dims::new(t.dims().n1, t.dims().n2, m.ncols()))
}
