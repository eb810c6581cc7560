//! Finite-dimensional maximally monotone operators with closed-form
//! resolvents, zero sets, and zero-set projections.
//!
//! Every variant has a nonempty zero set and an exact resolvent, so each
//! downstream inequality check has a trustworthy oracle. General black-box
//! operators are deliberately out of scope.

use crate::error::{Error, Result};
use crate::point::{dist_slice, Point};

/// Dense factorizations stay comfortably exact up to this size.
pub const DIM_CAP: usize = 1024;

#[derive(Debug, Clone)]
pub enum MonotoneOperator {
    /// A(x) = x − c, the gradient of ½‖x−c‖².
    QuadraticShift { center: Point },
    /// A(x) = M(x − c) for symmetric positive-definite M.
    AffinePd(AffinePd),
    /// Normal cone of the box [lo, hi].
    NormalConeBox { lower: Point, upper: Point },
    /// Normal cone of the closed ball B(center, radius).
    NormalConeBall { center: Point, radius: f64 },
    /// Coordinatewise subdifferential of weight·‖·‖₁.
    AbsSubdiff { weight: f64, dim: usize },
}

#[derive(Debug, Clone)]
pub struct AffinePd {
    dim: usize,
    /// Row-major symmetric matrix.
    matrix: Vec<f64>,
    center: Point,
    /// M·c, fixed at construction.
    m_center: Vec<f64>,
}

impl MonotoneOperator {
    pub fn quadratic_shift(center: Point) -> Self {
        Self::QuadraticShift { center }
    }

    pub fn affine_pd(rows: Vec<Vec<f64>>, center: Point) -> Result<Self> {
        let d = rows.len();
        if d == 0 || d > DIM_CAP {
            return Err(Error::InvalidParameter(format!(
                "matrix dimension {d} outside [1, {DIM_CAP}]"
            )));
        }
        if center.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: center.dim(),
            });
        }
        let mut matrix = Vec::with_capacity(d * d);
        for row in &rows {
            if row.len() != d {
                return Err(Error::InvalidParameter("matrix is not square".into()));
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::InvalidParameter("matrix entry not finite".into()));
                }
                matrix.push(v);
            }
        }
        for i in 0..d {
            for j in 0..i {
                if matrix[i * d + j] != matrix[j * d + i] {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        // Positive definiteness: M must factor.
        if cholesky(d, &matrix).is_none() {
            return Err(Error::InvalidParameter(
                "matrix is not positive definite".into(),
            ));
        }
        let mut m_center = vec![0.0; d];
        mat_vec(d, &matrix, center.coords(), &mut m_center);
        Ok(Self::AffinePd(AffinePd {
            dim: d,
            matrix,
            center,
            m_center,
        }))
    }

    pub fn normal_cone_box(lower: Point, upper: Point) -> Result<Self> {
        if lower.dim() != upper.dim() {
            return Err(Error::DimensionMismatch {
                expected: lower.dim(),
                got: upper.dim(),
            });
        }
        if lower
            .coords()
            .iter()
            .zip(upper.coords())
            .any(|(lo, hi)| lo > hi)
        {
            return Err(Error::InvalidParameter(
                "box lower bound exceeds upper bound".into(),
            ));
        }
        Ok(Self::NormalConeBox { lower, upper })
    }

    pub fn normal_cone_ball(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::NonPositive {
                name: "radius",
                value: radius,
            });
        }
        Ok(Self::NormalConeBall { center, radius })
    }

    pub fn abs_subdiff(weight: f64, dim: usize) -> Result<Self> {
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(Error::NonPositive {
                name: "weight",
                value: weight,
            });
        }
        if dim == 0 || dim > DIM_CAP {
            return Err(Error::InvalidParameter(format!(
                "dimension {dim} outside [1, {DIM_CAP}]"
            )));
        }
        Ok(Self::AbsSubdiff { weight, dim })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::QuadraticShift { center } => center.dim(),
            Self::AffinePd(a) => a.dim,
            Self::NormalConeBox { lower, .. } => lower.dim(),
            Self::NormalConeBall { center, .. } => center.dim(),
            Self::AbsSubdiff { dim, .. } => *dim,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Self::QuadraticShift { .. } => format!("quadratic-shift(d={})", self.dim()),
            Self::AffinePd(_) => format!("affine-pd(d={})", self.dim()),
            Self::NormalConeBox { .. } => format!("box(d={})", self.dim()),
            Self::NormalConeBall { radius, .. } => {
                format!("ball(d={},r={})", self.dim(), radius)
            }
            Self::AbsSubdiff { weight, .. } => {
                format!("abs-subdiff(d={},weight={})", self.dim(), weight)
            }
        }
    }

    /// Resolvent J_{γA}(x) = (id + γA)⁻¹(x), the unique z with z + γ·A(z) ∋ x.
    pub fn resolvent(&self, gamma: f64, x: &Point) -> Result<Point> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::NonPositive {
                name: "gamma",
                value: gamma,
            });
        }
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        let mut out = Vec::with_capacity(x.dim());
        self.resolvent_into(gamma, x.coords(), &mut out);
        Ok(Point::from_vec_unchecked(out))
    }

    /// Validated-input resolvent writing into a scratch buffer.
    pub(crate) fn resolvent_into(&self, gamma: f64, x: &[f64], out: &mut Vec<f64>) {
        debug_assert!(gamma > 0.0);
        debug_assert_eq!(x.len(), self.dim());
        out.clear();
        match self {
            Self::QuadraticShift { center } => {
                // z(1+γ) = x + γc
                let c = center.coords();
                out.extend(
                    x.iter()
                        .zip(c)
                        .map(|(xi, ci)| (xi + gamma * ci) / (1.0 + gamma)),
                );
            }
            Self::AffinePd(a) => {
                a.resolvent_into(gamma, x, out);
            }
            Self::NormalConeBox { lower, upper } => {
                out.extend(
                    x.iter()
                        .zip(lower.coords())
                        .zip(upper.coords())
                        .map(|((xi, lo), hi)| xi.clamp(*lo, *hi)),
                );
            }
            Self::NormalConeBall { center, radius } => {
                project_ball_into(center.coords(), *radius, x, out);
            }
            Self::AbsSubdiff { weight, .. } => {
                let t = gamma * weight;
                out.extend(x.iter().map(|&xi| soft_threshold(xi, t)));
            }
        }
    }

    /// Metric projection of `u` onto zer(A).
    pub fn project_zero_set(&self, u: &Point) -> Result<Point> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.dim(),
            });
        }
        let out = match self {
            Self::QuadraticShift { center } => center.clone(),
            Self::AffinePd(a) => a.center.clone(),
            Self::NormalConeBox { lower, upper } => {
                let coords = u
                    .coords()
                    .iter()
                    .zip(lower.coords())
                    .zip(upper.coords())
                    .map(|((xi, lo), hi)| xi.clamp(*lo, *hi))
                    .collect();
                Point::from_vec_unchecked(coords)
            }
            Self::NormalConeBall { center, radius } => {
                let mut coords = Vec::with_capacity(u.dim());
                project_ball_into(center.coords(), *radius, u.coords(), &mut coords);
                Point::from_vec_unchecked(coords)
            }
            Self::AbsSubdiff { dim, .. } => Point::from_vec_unchecked(vec![0.0; *dim]),
        };
        Ok(out)
    }

    /// Residual of the resolvent identity
    /// J_{βA}x = J_{γA}((γ/β)x + (1−γ/β)J_{βA}x); zero in exact arithmetic.
    pub fn check_resolvent_identity(&self, beta: f64, gamma: f64, x: &Point) -> Result<f64> {
        let jb = self.resolvent(beta, x)?;
        let ratio = gamma / beta;
        let mixed: Vec<f64> = x
            .coords()
            .iter()
            .zip(jb.coords())
            .map(|(xi, ji)| ratio * xi + (1.0 - ratio) * ji)
            .collect();
        let jg = self.resolvent(gamma, &Point::from_vec_unchecked(mixed))?;
        Ok(jb.dist(&jg))
    }
}

impl AffinePd {
    /// Solves (I + γM) z = x + γ·M·c by a fresh Cholesky factorization.
    /// M is validated positive definite at construction, and I + γM is
    /// strictly better conditioned, so the factorization cannot fail.
    fn resolvent_into(&self, gamma: f64, x: &[f64], out: &mut Vec<f64>) {
        let d = self.dim;
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                a[i * d + j] = gamma * self.matrix[i * d + j];
            }
            a[i * d + i] += 1.0;
        }
        let l = cholesky(d, &a).expect("I + gamma*M must stay positive definite");
        out.extend(
            x.iter()
                .zip(&self.m_center)
                .map(|(xi, mci)| xi + gamma * mci),
        );
        chol_solve(d, &l, out);
    }

    /// Closed-form Browder approximant: solve (αI + βM) y = αu + βMc,
    /// then z = αu + (1−α)y.
    pub(crate) fn browder_closed_form(&self, beta: f64, alpha: f64, u: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                a[i * d + j] = beta * self.matrix[i * d + j];
            }
            a[i * d + i] += alpha;
        }
        let l = cholesky(d, &a).expect("alpha*I + beta*M must be positive definite");
        let mut y: Vec<f64> = u
            .iter()
            .zip(&self.m_center)
            .map(|(ui, mci)| alpha * ui + beta * mci)
            .collect();
        chol_solve(d, &l, &mut y);
        y.iter()
            .zip(u)
            .map(|(yi, ui)| alpha * ui + (1.0 - alpha) * yi)
            .collect()
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

fn project_ball_into(center: &[f64], radius: f64, x: &[f64], out: &mut Vec<f64>) {
    let dist = dist_slice(x, center);
    if dist <= radius {
        out.extend_from_slice(x);
    } else {
        let scale = radius / dist;
        out.extend(
            x.iter()
                .zip(center)
                .map(|(xi, ci)| ci + scale * (xi - ci)),
        );
    }
}

fn mat_vec(d: usize, m: &[f64], x: &[f64], out: &mut [f64]) {
    for i in 0..d {
        out[i] = dot_row(&m[i * d..(i + 1) * d], x);
    }
}

fn dot_row(row: &[f64], x: &[f64]) -> f64 {
    row.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Lower-triangular L with A = L·Lᵀ, or None when A is not positive definite.
fn cholesky(d: usize, a: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for t in 0..j {
                s -= l[i * d + t] * l[j * d + t];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

fn chol_solve(d: usize, l: &[f64], b: &mut [f64]) {
    for i in 0..d {
        let mut s = b[i];
        for j in 0..i {
            s -= l[i * d + j] * b[j];
        }
        b[i] = s / l[i * d + i];
    }
    for i in (0..d).rev() {
        let mut s = b[i];
        for j in i + 1..d {
            s -= l[j * d + i] * b[j];
        }
        b[i] = s / l[i * d + i];
    }
}
