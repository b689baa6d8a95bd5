//! Channel coupling matrices.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("weight matrix must be {m}x{m}, got {len} entries")]
    Shape { m: usize, len: usize },
    #[error("weight matrix needs at least one channel")]
    Empty,
    #[error("weight matrix entry ({row},{col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("weight matrix has negative entry {value} at ({row},{col})")]
    Negative { row: usize, col: usize, value: f64 },
    #[error("weight matrix is asymmetric: ({row},{col}) differs from its mirror by {diff:.3e}")]
    Asymmetric { row: usize, col: usize, diff: f64 },
    #[error("weight matrix row sum of row {row} is {sum}, expected 1")]
    RowSum { row: usize, sum: f64 },
    #[error("cannot parse weight matrix '{0}'")]
    Parse(String),
}

/// Symmetric, nonnegative, row-stochastic `M×M` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    m: usize,
    entries: Vec<f64>,
}

impl WeightMatrix {
    /// Validates a row-major `m×m` matrix.
    pub fn new(m: usize, entries: Vec<f64>) -> Result<Self, WeightError> {
        if m == 0 {
            return Err(WeightError::Empty);
        }
        if entries.len() != m * m {
            return Err(WeightError::Shape { m, len: entries.len() });
        }
        for row in 0..m {
            for col in 0..m {
                let value = entries[row * m + col];
                if !value.is_finite() {
                    return Err(WeightError::NonFinite { row, col });
                }
                if value < 0.0 {
                    return Err(WeightError::Negative { row, col, value });
                }
            }
        }
        for row in 0..m {
            for col in row + 1..m {
                let diff = (entries[row * m + col] - entries[col * m + row]).abs();
                if diff > EXACT_TOL {
                    return Err(WeightError::Asymmetric { row, col, diff });
                }
            }
        }
        for row in 0..m {
            let sum: f64 = entries[row * m..(row + 1) * m].iter().sum();
            if (sum - 1.0).abs() > EXACT_TOL {
                return Err(WeightError::RowSum { row, sum });
            }
        }
        Ok(Self { m, entries })
    }

    pub fn identity(m: usize) -> Result<Self, WeightError> {
        let mut entries = vec![0.0; m * m];
        for i in 0..m {
            entries[i * m + i] = 1.0;
        }
        Self::new(m, entries)
    }

    /// Off-diagonal entries `omega`, diagonal `1 − (m−1)·omega`.
    pub fn uniform(m: usize, omega: f64) -> Result<Self, WeightError> {
        if m == 0 {
            return Err(WeightError::Empty);
        }
        let diag = 1.0 - (m - 1) as f64 * omega;
        let mut entries = vec![omega; m * m];
        for i in 0..m {
            entries[i * m + i] = diag;
        }
        if m == 1 {
            entries[0] = 1.0;
        }
        Self::new(m, entries)
    }

    /// `uniform` with `omega = 0.25/(m−1)`.
    pub fn default_for(m: usize) -> Result<Self, WeightError> {
        if m <= 1 {
            return Self::identity(m);
        }
        Self::uniform(m, 0.25 / (m - 1) as f64)
    }

    /// Parses `identity`, `default`, `uniform:ω` or a row-major list of
    /// `m²` numbers separated by commas, semicolons or whitespace. Brackets are
    /// ignored, so the `Display` form parses back.
    pub fn parse(spec: &str, m: usize) -> Result<Self, WeightError> {
        let spec = spec.trim();
        match spec {
            "identity" | "id" | "I" => return Self::identity(m),
            "default" => return Self::default_for(m),
            _ => {}
        }
        if let Some(omega) = spec.strip_prefix("uniform:") {
            let omega: f64 = omega
                .trim()
                .parse()
                .map_err(|_| WeightError::Parse(spec.to_owned()))?;
            return Self::uniform(m, omega);
        }
        let entries = spec
            .split(|c: char| matches!(c, ',' | ';' | '[' | ']') || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| WeightError::Parse(spec.to_owned()))?;
        Self::new(m, entries)
    }

    pub fn size(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.m..(i + 1) * self.m]
    }

    pub fn is_identity(&self) -> bool {
        (0..self.m).all(|i| (0..self.m).all(|j| self.get(i, j) == if i == j { 1.0 } else { 0.0 }))
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mat = DMatrix::from_row_slice(self.m, self.m, &self.entries);
        let mut eig: Vec<f64> = SymmetricEigen::new(mat).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        eig
    }

    /// Second largest eigenvalue; `None` for a single channel.
    pub fn lambda2(&self) -> Option<f64> {
        self.eigenvalues().get(1).copied()
    }

    /// Whether the coupling contracts toward consensus (`λ₂ < 1`).
    pub fn is_coupling(&self) -> bool {
        self.lambda2().is_some_and(|l| l < 1.0 - 1e-12)
    }
}

impl std::fmt::Display for WeightMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.m {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v}")).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors() {
        let id = WeightMatrix::identity(3).unwrap();
        assert!(id.is_identity());
        assert_eq!(id.lambda2(), Some(1.0));
        assert!(!id.is_coupling());

        let u = WeightMatrix::uniform(3, 1.0 / 3.0).unwrap();
        let eig = u.eigenvalues();
        assert!((eig[0] - 1.0).abs() < 1e-12);
        assert!(eig[1].abs() < 1e-12);

        let d = WeightMatrix::default_for(3).unwrap();
        assert_eq!(d.get(0, 1), 0.125);
        assert_eq!(d.get(2, 2), 0.75);
        assert!((d.lambda2().unwrap() - 0.625).abs() < 1e-12);
        assert!(d.is_coupling());
        assert_eq!(WeightMatrix::default_for(1).unwrap().get(0, 0), 1.0);
    }

    #[test]
    fn violations_are_named() {
        let e = WeightMatrix::parse("0.9 0 0 0 1 0 0 0 1", 3).unwrap_err();
        assert!(matches!(e, WeightError::RowSum { row: 0, .. }));
        assert!(e.to_string().contains("row sum"));

        let e = WeightMatrix::new(2, vec![0.5, 0.5, 0.4, 0.6]).unwrap_err();
        assert!(e.to_string().contains("asymmetric"));

        let e = WeightMatrix::new(2, vec![1.5, -0.5, -0.5, 1.5]).unwrap_err();
        assert!(e.to_string().contains("negative"));

        assert!(matches!(WeightMatrix::uniform(3, 0.6), Err(WeightError::Negative { .. })));
        assert!(matches!(WeightMatrix::parse("1,0,0", 2), Err(WeightError::Shape { .. })));
        assert!(matches!(WeightMatrix::parse("uniform:x", 2), Err(WeightError::Parse(_))));
    }

    #[test]
    fn parse_forms() {
        let w = WeightMatrix::parse("uniform:0.125", 3).unwrap();
        assert_eq!(w.get(1, 1), 0.75);
        let w = WeightMatrix::parse("0.8,0.2; 0.2,0.8", 2).unwrap();
        assert_eq!(w.row(1), &[0.2, 0.8]);
        assert!(WeightMatrix::parse("identity", 4).unwrap().is_identity());
    }
}
