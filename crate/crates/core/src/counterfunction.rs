//! Total maps ℕ → ℕ, evaluated exactly in arbitrary precision.
//!
//! These are the counterfunctions quantified over in metastability
//! statements, plus the derived shapes the rate combinators build from them.

use crate::bigcount::{bc, BigCount};
use num_traits::ToPrimitive;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Counterfunction {
    Constant(BigCount),
    Identity,
    /// slope·n + offset.
    Affine { slope: BigCount, offset: BigCount },
    /// Σ coeffs[i]·nⁱ with natural coefficients (ascending degree).
    Poly(Vec<BigCount>),
    /// Explicit values on a finite prefix, then `tail`.
    Table {
        values: Vec<BigCount>,
        tail: Box<Counterfunction>,
    },
    /// n ↦ max{T, n} − n + inner(max{T, n}).
    ///
    /// This is the window-shift shape used when transporting a metastability
    /// rate along a convergent comparison: below the threshold it pads the
    /// window so that [N, N+g̃(N)] always covers [T, T+g(T)].
    ClampedShift {
        threshold: BigCount,
        inner: Box<Counterfunction>,
    },
}

impl Counterfunction {
    pub fn constant(value: u64) -> Self {
        Self::Constant(bc(value))
    }

    pub fn affine(slope: u64, offset: u64) -> Self {
        Self::Affine {
            slope: bc(slope),
            offset: bc(offset),
        }
    }

    pub fn poly(coeffs: &[u64]) -> Self {
        Self::Poly(coeffs.iter().map(|&c| bc(c)).collect())
    }

    pub fn clamped_shift(threshold: BigCount, inner: Counterfunction) -> Self {
        Self::ClampedShift {
            threshold,
            inner: Box::new(inner),
        }
    }

    pub fn eval(&self, n: &BigCount) -> BigCount {
        match self {
            Self::Constant(c) => c.clone(),
            Self::Identity => n.clone(),
            Self::Affine { slope, offset } => slope * n + offset,
            Self::Poly(coeffs) => {
                let mut acc = bc(0);
                for c in coeffs.iter().rev() {
                    acc = acc * n + c;
                }
                acc
            }
            Self::Table { values, tail } => match n.to_usize() {
                Some(i) if i < values.len() => values[i].clone(),
                _ => tail.eval(n),
            },
            Self::ClampedShift { threshold, inner } => {
                if n >= threshold {
                    inner.eval(n)
                } else {
                    threshold - n + inner.eval(threshold)
                }
            }
        }
    }

    pub fn eval_u64(&self, n: u64) -> BigCount {
        self.eval(&bc(n))
    }

    /// Conservative nondecreasing test: `true` is a guarantee, `false` only
    /// means the shortcutting prefix-max optimizations must not be used.
    pub fn is_nondecreasing(&self) -> bool {
        match self {
            Self::Constant(_) | Self::Identity | Self::Affine { .. } => true,
            // Natural coefficients, so every monomial is nondecreasing.
            Self::Poly(_) => true,
            Self::Table { values, tail } => {
                values.windows(2).all(|w| w[0] <= w[1])
                    && tail.is_nondecreasing()
                    && match values.last() {
                        Some(last) => tail.eval(&bc(values.len() as u64)) >= *last,
                        None => true,
                    }
            }
            Self::ClampedShift { .. } => false,
        }
    }

    /// Short form for report rows, e.g. "const:10" or "identity".
    pub fn descriptor(&self) -> String {
        match self {
            Self::Constant(c) => format!("const:{c}"),
            Self::Identity => "identity".into(),
            Self::Affine { slope, offset } => format!("affine:{slope}n+{offset}"),
            Self::Poly(coeffs) => {
                let cs: Vec<String> = coeffs.iter().map(|c| c.to_string()).collect();
                format!("poly:[{}]", cs.join(","))
            }
            Self::Table { values, tail } => {
                format!("table:{}+{}", values.len(), tail.descriptor())
            }
            Self::ClampedShift { threshold, inner } => {
                format!("shift:{threshold}/{}", inner.descriptor())
            }
        }
    }
}
