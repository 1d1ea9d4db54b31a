//! Point clouds and weighted discrete measures.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// `n` samples in `R^d`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::InvalidParameter(format!(
                "data length {} not a multiple of dim {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).ok_or(Error::EmptyCloud)?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: row.len() });
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    /// One sample per line, `dim` comma-separated decimal columns, no header.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                trimmed.split(',').map(|t| t.trim().parse::<f64>()).collect();
            rows.push(row.map_err(|e| Error::Config(format!("bad point-cloud CSV: {e}")))?);
        }
        Self::from_rows(&rows)
    }

    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(writer, "{}", line.join(","))?;
        }
        Ok(())
    }
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn sq_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

pub fn sq_sum(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x + y) * (x + y)).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weighted atoms in `R^d`; weights normalized to sum to one.
#[derive(Clone, Debug)]
pub struct DiscreteMeasure {
    pub atoms: PointCloud,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(atoms: PointCloud, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != atoms.len() {
            return Err(Error::InvalidParameter(format!(
                "{} weights for {} atoms",
                weights.len(),
                atoms.len()
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("weights must be nonnegative and finite".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { atoms, weights })
    }

    /// Uniform measure on the rows of a point cloud.
    pub fn uniform(atoms: PointCloud) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let n = atoms.len();
        let w = vec![1.0 / n as f64; n];
        Self::new(atoms, w)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms.dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let pc = PointCloud::from_rows(&[vec![1.0, 2.0], vec![-0.5, 3.25]]).unwrap();
        let mut buf = Vec::new();
        pc.write_csv(&mut buf).unwrap();
        let back = PointCloud::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(pc, back);
    }

    #[test]
    fn measure_rejects_unnormalized_weights() {
        let pc = PointCloud::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(DiscreteMeasure::new(pc, vec![0.7, 0.7]).is_err());
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(PointCloud::from_rows(&[vec![0.0, 1.0], vec![1.0]]).is_err());
    }
}
