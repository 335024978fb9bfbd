use std::fmt;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::text::BinaryVector;

/// A resolved kernel function.
///
/// Polynomial kernels are inhomogeneous, `(x·y + coef0)^degree`; degree 1
/// is the linear kernel. RBF is `exp(-gamma ‖x − y‖²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelConfig {
    Polynomial { degree: u32, coef0: f64 },
    Rbf { gamma: f64 },
}

impl KernelConfig {
    pub fn linear() -> Self {
        Self::polynomial(1)
    }

    pub fn polynomial(degree: u32) -> Self {
        KernelConfig::Polynomial { degree, coef0: 1.0 }
    }

    pub fn rbf(gamma: f64) -> Self {
        KernelConfig::Rbf { gamma }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelConfig::Polynomial { degree, coef0 } => {
                if degree == 0 || !coef0.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "polynomial kernel needs degree >= 1 and finite coef0 (got {degree}, {coef0})"
                    )));
                }
            }
            KernelConfig::Rbf { gamma } => {
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "rbf gamma must be positive, got {gamma}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &BinaryVector, y: &BinaryVector) -> Result<f64> {
        y.check_dimension(x.dimension())?;
        Ok(self.eval_unchecked(x, y))
    }

    pub(crate) fn eval_unchecked(&self, x: &BinaryVector, y: &BinaryVector) -> f64 {
        match *self {
            KernelConfig::Polynomial { degree, coef0 } => (x.dot(y) as f64 + coef0).powi(degree as i32),
            KernelConfig::Rbf { gamma } => (-gamma * x.squared_distance(y) as f64).exp(),
        }
    }
}

impl fmt::Display for KernelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            KernelConfig::Polynomial { degree, coef0 } => {
                write!(f, "polynomial degree {degree} coef0 {coef0:?}")
            }
            KernelConfig::Rbf { gamma } => write!(f, "rbf gamma {gamma:?}"),
        }
    }
}

/// Kernel selection before the feature dimension is known. An RBF kernel
/// without an explicit gamma resolves to `1 / dimension`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelChoice {
    Polynomial { degree: u32, coef0: f64 },
    Rbf { gamma: Option<f64> },
}

impl KernelChoice {
    pub fn polynomial(degree: u32) -> Self {
        KernelChoice::Polynomial { degree, coef0: 1.0 }
    }

    pub fn rbf() -> Self {
        KernelChoice::Rbf { gamma: None }
    }

    pub fn resolve(&self, dimension: usize) -> KernelConfig {
        match *self {
            KernelChoice::Polynomial { degree, coef0 } => KernelConfig::Polynomial { degree, coef0 },
            KernelChoice::Rbf { gamma } => KernelConfig::Rbf {
                gamma: gamma.unwrap_or(1.0 / dimension.max(1) as f64),
            },
        }
    }
}

/// Dense Gram matrix, row-major.
pub fn gram_matrix(kernel: &KernelConfig, xs: &[BinaryVector], exec: Execution) -> Vec<f64> {
    let n = xs.len();
    let rows = exec::map_range(exec, n, |i| {
        xs.iter()
            .map(|xj| kernel.eval_unchecked(&xs[i], xj))
            .collect::<Vec<f64>>()
    });
    let mut out = Vec::with_capacity(n * n);
    for row in rows {
        out.extend(row);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(dim: usize, idx: &[usize]) -> BinaryVector {
        BinaryVector::new(dim, idx.iter().copied()).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let x = v(8, &[0, 3, 5]);
        assert_eq!(KernelConfig::rbf(0.3).eval(&x, &x).unwrap(), 1.0);

        let a = v(8, &[0, 1, 2, 7]);
        let b = v(8, &[0, 1, 2, 4]);
        assert_eq!(a.dot(&b), 3);
        assert_eq!(KernelConfig::linear().eval(&a, &b).unwrap(), 4.0);

        let c = v(8, &[1, 2, 5]);
        let d = v(8, &[1, 2, 6]);
        assert_eq!(KernelConfig::polynomial(2).eval(&c, &d).unwrap(), 9.0);
    }

    #[test]
    fn rbf_uses_symmetric_difference() {
        let a = v(4, &[0, 1]);
        let b = v(4, &[1, 2, 3]);
        let k = KernelConfig::rbf(0.5).eval(&a, &b).unwrap();
        assert!((k - (-1.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            KernelConfig::linear().eval(&v(3, &[0]), &v(4, &[0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn auto_gamma_is_inverse_dimension() {
        assert_eq!(KernelChoice::rbf().resolve(50), KernelConfig::rbf(0.02));
        assert!(KernelConfig::rbf(0.0).validate().is_err());
        assert!(KernelConfig::polynomial(0).validate().is_err());
    }

    #[test]
    fn gram_paths_agree() {
        let xs: Vec<_> = (0..20).map(|i| v(6, &[i % 6, (i * 7) % 6])).collect();
        let k = KernelConfig::polynomial(3);
        assert_eq!(
            gram_matrix(&k, &xs, Execution::Sequential),
            gram_matrix(&k, &xs, Execution::Parallel)
        );
    }
}
