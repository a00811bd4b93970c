//! Auxiliary coefficient sequences `{w_τ}` and their algebra.
//!
//! A kernel acts on a state stream by convolution,
//! `r_t = Σ_τ w_τ · s_{t-τ}`, which in matrix form is the upper-triangular
//! banded Toeplitz system `w · s = r`. The first row of `w⁻¹` is the
//! power-series reciprocal of the coefficient sequence.

use crate::error::{Error, Result};

/// Smallest head magnitude accepted as invertible.
pub const HEAD_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum Kernel {
    /// Finite support `w_0..w_{b-1}`.
    Band(Vec<f64>),
    /// `w_τ = first · ratio^τ`.
    Geometric { first: f64, ratio: f64 },
}

/// Result of composing two kernels.
#[derive(Clone, Debug, PartialEq)]
pub struct Composition {
    pub kernel: Kernel,
    /// Set when a geometric factor had to be expanded; the composed band is
    /// exact on its first `n` coefficients only.
    pub truncated_at: Option<usize>,
}

fn check_head(w0: f64) -> Result<()> {
    if !(w0.abs() >= HEAD_TOL) {
        return Err(Error::NonInvertibleHead(w0));
    }
    Ok(())
}

impl Kernel {
    pub fn band(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Validation("band kernel needs at least one coefficient".into()));
        }
        if coeffs.iter().any(|w| !w.is_finite()) {
            return Err(Error::Validation("kernel coefficients must be finite".into()));
        }
        check_head(coeffs[0])?;
        Ok(Kernel::Band(coeffs))
    }

    pub fn geometric(first: f64, ratio: f64) -> Result<Self> {
        if !first.is_finite() || !ratio.is_finite() {
            return Err(Error::Validation("kernel coefficients must be finite".into()));
        }
        if ratio.abs() > 1.0 {
            return Err(Error::Validation(format!(
                "geometric ratio {ratio} has magnitude above 1"
            )));
        }
        check_head(first)?;
        Ok(Kernel::Geometric { first, ratio })
    }

    pub fn identity() -> Self {
        Kernel::Band(vec![1.0])
    }

    /// The all-ones sequence, i.e. the running sum.
    pub fn ones() -> Self {
        Kernel::Geometric { first: 1.0, ratio: 1.0 }
    }

    pub fn head(&self) -> f64 {
        match self {
            Kernel::Band(w) => w[0],
            Kernel::Geometric { first, .. } => *first,
        }
    }

    /// Band length, or `None` for infinite support.
    pub fn band_len(&self) -> Option<usize> {
        match self {
            Kernel::Band(w) => Some(w.len()),
            Kernel::Geometric { ratio, .. } if *ratio == 0.0 => Some(1),
            Kernel::Geometric { .. } => None,
        }
    }

    pub fn coefficient(&self, tau: usize) -> f64 {
        match self {
            Kernel::Band(w) => w.get(tau).copied().unwrap_or(0.0),
            Kernel::Geometric { first, ratio } => first * ratio.powi(tau as i32),
        }
    }

    /// The first `len` coefficients.
    pub fn coefficients(&self, len: usize) -> Vec<f64> {
        match self {
            Kernel::Band(w) => (0..len).map(|i| w.get(i).copied().unwrap_or(0.0)).collect(),
            Kernel::Geometric { first, ratio } => {
                let mut out = Vec::with_capacity(len);
                let mut c = *first;
                for _ in 0..len {
                    out.push(c);
                    c *= ratio;
                }
                out
            }
        }
    }

    /// First row of `w⁻¹`, truncated to `len` entries.
    pub fn invert(&self, len: usize) -> Result<Vec<f64>> {
        invert_coefficients(&self.coefficients(len), len)
    }

    /// Discrete convolution of the two coefficient sequences. Band with band
    /// is exact; anything involving a geometric kernel is expanded to
    /// `truncate` coefficients.
    pub fn compose(&self, other: &Kernel, truncate: usize) -> Composition {
        match (self, other) {
            (Kernel::Band(a), Kernel::Band(b)) => Composition {
                kernel: Kernel::Band(convolve(a, b, a.len() + b.len() - 1)),
                truncated_at: None,
            },
            _ => {
                let len = truncate.max(1);
                Composition {
                    kernel: Kernel::Band(convolve(&self.coefficients(len), &other.coefficients(len), len)),
                    truncated_at: Some(len),
                }
            }
        }
    }
}

/// Truncated discrete convolution of two sequences.
pub fn convolve(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (i, x) in a.iter().enumerate().take(len) {
        for (j, y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// Power-series reciprocal: `c_0 = 1/w_0`,
/// `c_n = -(1/w_0) Σ_{k=1..n} w_k c_{n-k}`.
pub fn invert_coefficients(w: &[f64], len: usize) -> Result<Vec<f64>> {
    let w0 = *w.first().ok_or(Error::EmptyComponent("kernel coefficients"))?;
    check_head(w0)?;
    if len == 0 {
        return Err(Error::Validation("inverse length must be at least 1".into()));
    }
    let inv0 = 1.0 / w0;
    let mut c = Vec::with_capacity(len);
    c.push(inv0);
    for n in 1..len {
        let acc: f64 = (1..=n.min(w.len() - 1)).map(|k| w[k] * c[n - k]).sum();
        c.push(-inv0 * acc);
    }
    Ok(c)
}

pub fn invert_kernel(w: &Kernel, len: usize) -> Result<Vec<f64>> {
    w.invert(len)
}

pub fn compose_kernels(a: &Kernel, b: &Kernel, truncate: usize) -> Composition {
    a.compose(b, truncate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn difference_inverts_to_ones() {
        let w = Kernel::band(vec![1.0, -1.0]).unwrap();
        assert_eq!(w.invert(4).unwrap(), vec![1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn identity_inverse() {
        assert_eq!(Kernel::identity().invert(4).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn damped_difference_inverts_to_geometric() {
        let w = Kernel::band(vec![1.0, -0.5]).unwrap();
        assert!(close(&w.invert(4).unwrap(), &[1.0, 0.5, 0.25, 0.125], 1e-12));
    }

    #[test]
    fn ones_invert_to_difference() {
        assert_eq!(Kernel::ones().invert(4).unwrap(), vec![1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn non_invertible_head() {
        assert!(matches!(Kernel::band(vec![0.0, 1.0]), Err(Error::NonInvertibleHead(_))));
        assert!(matches!(
            invert_coefficients(&[1e-10, 1.0], 3),
            Err(Error::NonInvertibleHead(_))
        ));
        assert!(Kernel::geometric(1.0, 1.5).is_err());
    }

    #[test]
    fn compose_difference_with_ones_is_identity() {
        let c = compose_kernels(&Kernel::band(vec![1.0, -1.0]).unwrap(), &Kernel::ones(), 6);
        assert_eq!(c.truncated_at, Some(6));
        assert_eq!(c.kernel.coefficients(6), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn compose_band_lengths() {
        let a = Kernel::band(vec![1.0, 2.0]).unwrap();
        let b = Kernel::band(vec![1.0, -1.0, 3.0]).unwrap();
        let c = a.compose(&b, 0);
        assert_eq!(c.truncated_at, None);
        assert_eq!(c.kernel, Kernel::Band(vec![1.0, 1.0, 1.0, 6.0]));
        assert_eq!(a.compose(&Kernel::identity(), 0).kernel, a);
    }

    #[test]
    fn geometric_coefficients() {
        let g = Kernel::geometric(2.0, 0.5).unwrap();
        assert_eq!(g.coefficients(3), vec![2.0, 1.0, 0.5]);
        assert_eq!(g.coefficient(2), 0.5);
        assert_eq!(g.band_len(), None);
    }
}
