//! Observation matrices, centering and per-class partitioning.
//!
//! Observations are rows and features are columns throughout the crate.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{precondition, Error, Result};
use crate::scalar::Real;

/// An `n x d` matrix of observations with optional dense class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix<T: Real> {
    values: DMatrix<T>,
    labels: Option<Vec<u32>>,
}

impl<T: Real> DataMatrix<T> {
    pub fn new(values: DMatrix<T>, labels: Option<Vec<u32>>) -> Result<Self> {
        let (n, d) = values.shape();
        if n == 0 || d == 0 {
            return Err(Error::Degenerate(format!("empty matrix ({n}x{d})")));
        }
        for j in 0..d {
            for i in 0..n {
                if !values[(i, j)].is_finite_value() {
                    return Err(Error::Parse {
                        row: i,
                        column: j,
                        message: "non-finite value".into(),
                    });
                }
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(precondition(format!("{} labels for {} rows", l.len(), n)));
            }
        }
        Ok(Self { values, labels })
    }

    pub fn unlabeled(values: DMatrix<T>) -> Result<Self> {
        Self::new(values, None)
    }

    /// Builds a matrix from row-major data.
    pub fn from_rows(
        n: usize,
        d: usize,
        row_major: &[T],
        labels: Option<Vec<u32>>,
    ) -> Result<Self> {
        if row_major.len() != n * d {
            return Err(precondition(format!(
                "expected {} values for {n}x{d}, got {}",
                n * d,
                row_major.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, d, row_major), labels)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<T> {
        &self.values
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn row(&self, i: usize) -> DVector<T> {
        self.values.row(i).transpose()
    }

    pub fn without_labels(&self) -> Self {
        Self {
            values: self.values.clone(),
            labels: None,
        }
    }

    pub fn into_parts(self) -> (DMatrix<T>, Option<Vec<u32>>) {
        (self.values, self.labels)
    }

    /// Converts to another scalar type.
    pub fn cast<U: Real>(&self) -> DataMatrix<U> {
        DataMatrix {
            values: self.values.map(|v| U::lit(v.as_f64())),
            labels: self.labels.clone(),
        }
    }

    /// Distinct label values in ascending order.
    pub fn classes(&self) -> Option<Vec<u32>> {
        self.labels.as_ref().map(|l| {
            let mut c: Vec<u32> = l.clone();
            c.sort_unstable();
            c.dedup();
            c
        })
    }
}

/// Column-centered observations plus the subtracted column means.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredData<T: Real> {
    values: DMatrix<T>,
    mean: DVector<T>,
}

impl<T: Real> CenteredData<T> {
    pub fn values(&self) -> &DMatrix<T> {
        &self.values
    }

    pub fn mean(&self) -> &DVector<T> {
        &self.mean
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    /// Adds the mean back to every row.
    pub fn uncentered(&self) -> DMatrix<T> {
        let mut out = self.values.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col.add_scalar_mut(self.mean[j]);
        }
        out
    }

    /// Sample variance of each column, normalized by `n - 1`.
    pub fn column_variances(&self) -> DVector<T> {
        let denom = T::from_usize_lossy(self.n() - 1);
        DVector::from_iterator(
            self.d(),
            self.values.column_iter().map(|c| c.norm_squared() / denom),
        )
    }
}

/// Subtracts the column-wise sample mean from every row.
pub fn center<T: Real>(data: &DataMatrix<T>) -> Result<CenteredData<T>> {
    let n = data.n();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "centering needs at least 2 rows, got {n}"
        )));
    }
    let inv_n = T::one() / T::from_usize_lossy(n);
    let mean = DVector::from_iterator(data.d(), data.values.column_iter().map(|c| c.sum() * inv_n));
    let mut values = data.values.clone();
    for (j, mut col) in values.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    Ok(CenteredData { values, mean })
}

/// Splits a labeled matrix into one unlabeled matrix per class, keeping row order.
pub fn partition_by_class<T: Real>(data: &DataMatrix<T>) -> Result<BTreeMap<u32, DataMatrix<T>>> {
    let labels = data
        .labels()
        .ok_or_else(|| precondition("partition_by_class requires labels"))?;
    let mut rows: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        rows.entry(l).or_default().push(i);
    }
    rows.into_iter()
        .map(|(class, idx)| {
            let values = data.values.select_rows(idx.iter());
            DataMatrix::new(values, None).map(|m| (class, m))
        })
        .collect()
}
