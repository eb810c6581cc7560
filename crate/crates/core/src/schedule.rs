//! Closed-form parameter schedules (αₙ), (βₙ), (eₙ) for the iterations,
//! with machine-derived membership flags for the convergence conditions.
//!
//! The flags record which of the standard hypotheses hold for the family:
//! c0 — αₙ → 0; c1 — Σ αₙ diverges; c2 — Π(1−αₙ) → 0; c3 — |αₙ₊₁−αₙ|/αₙ² → 0;
//! c4 — βₙ → β > 0; c5 — Σ‖eₙ‖ < ∞; c6 — ‖eₙ‖/αₙ → 0.
//! They are derived from the family tags at construction, never asserted by
//! the caller.

use crate::error::{Error, Result};
use crate::point::{norm_slice, Point};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq)]
pub enum AlphaFamily {
    /// αₙ = value. Zero is admitted so the plain Halpern iteration can
    /// degenerate to Picard; the proximal-Halpern runner rejects it.
    Constant { value: f64 },
    /// αₙ = (n + shift)^(−exponent) with exponent ∈ (0, 1], shift ≥ 1.
    Power { shift: u64, exponent: f64 },
    /// αₙ = 1/(n+1).
    Harmonic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BetaFamily {
    /// βₙ = value > 0.
    Constant { value: f64 },
    /// βₙ = limit + (−1)ⁿ/(n+1); needs limit > 1/2 to stay positive.
    AlternatingHarmonic { limit: f64 },
    /// βₙ = limit + (n+1)^(−exponent).
    PowerApproach { limit: f64, exponent: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ErrDirection {
    /// A fixed unit vector.
    Fixed(Point),
    /// A fixed unit vector with sign (−1)ⁿ.
    Alternating(Point),
    /// A fresh pseudo-random unit vector per step, reproducible from the seed.
    SeededRandom { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ErrFamily {
    Zero,
    /// ‖eₙ‖ = scale·ratioⁿ with ratio ∈ [0, 1).
    Geometric {
        scale: f64,
        ratio: f64,
        dir: ErrDirection,
    },
    /// ‖eₙ‖ = scale·(n+1)^(−exponent).
    PowerDecay {
        scale: f64,
        exponent: f64,
        dir: ErrDirection,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConditionFlags {
    pub c0: bool,
    pub c1: bool,
    pub c2: bool,
    pub c3: bool,
    pub c4: bool,
    pub c5: bool,
    pub c6: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSchedule {
    alpha: AlphaFamily,
    beta: BetaFamily,
    err: ErrFamily,
    flags: ConditionFlags,
}

impl AlphaFamily {
    fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { value } => {
                if !(*value >= 0.0 && *value <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "constant alpha {value} outside [0, 1]"
                    )));
                }
            }
            Self::Power { shift, exponent } => {
                if *shift < 1 {
                    return Err(Error::InvalidParameter(
                        "power alpha needs shift >= 1".into(),
                    ));
                }
                if !(*exponent > 0.0 && *exponent <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "power alpha exponent {exponent} outside (0, 1]"
                    )));
                }
            }
            Self::Harmonic => {}
        }
        Ok(())
    }

    pub fn value(&self, n: u64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Power { shift, exponent } => ((n + shift) as f64).powf(-exponent),
            Self::Harmonic => 1.0 / ((n + 1) as f64),
        }
    }

    /// Whether αₙ > 0 for every n.
    pub fn strictly_positive(&self) -> bool {
        match self {
            Self::Constant { value } => *value > 0.0,
            _ => true,
        }
    }

    pub fn nonincreasing(&self) -> bool {
        match self {
            Self::Constant { .. } => true,
            Self::Power { .. } | Self::Harmonic => true,
        }
    }
}

impl BetaFamily {
    fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { value } => {
                if !(*value > 0.0) {
                    return Err(Error::NonPositive {
                        name: "beta",
                        value: *value,
                    });
                }
            }
            Self::AlternatingHarmonic { limit } => {
                // The n = 1 term is limit − 1/2.
                if !(*limit > 0.5) {
                    return Err(Error::InvalidParameter(format!(
                        "alternating-harmonic beta needs limit > 1/2, got {limit}"
                    )));
                }
            }
            Self::PowerApproach { limit, exponent } => {
                if !(*limit > 0.0) {
                    return Err(Error::NonPositive {
                        name: "beta limit",
                        value: *limit,
                    });
                }
                if !(*exponent > 0.0) {
                    return Err(Error::NonPositive {
                        name: "beta exponent",
                        value: *exponent,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, n: u64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::AlternatingHarmonic { limit } => {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                limit + sign / ((n + 1) as f64)
            }
            Self::PowerApproach { limit, exponent } => {
                limit + ((n + 1) as f64).powf(-exponent)
            }
        }
    }

    /// The limit β of (βₙ).
    pub fn limit(&self) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::AlternatingHarmonic { limit } | Self::PowerApproach { limit, .. } => *limit,
        }
    }
}

impl ErrFamily {
    fn validate(&self) -> Result<()> {
        match self {
            Self::Zero => {}
            Self::Geometric { scale, ratio, dir } => {
                if !(*scale >= 0.0) || !scale.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "geometric error scale {scale} invalid"
                    )));
                }
                if !(*ratio >= 0.0 && *ratio < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "geometric error ratio {ratio} outside [0, 1)"
                    )));
                }
                dir.validate()?;
            }
            Self::PowerDecay {
                scale,
                exponent,
                dir,
            } => {
                if !(*scale >= 0.0) || !scale.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "power error scale {scale} invalid"
                    )));
                }
                if !(*exponent > 0.0) {
                    return Err(Error::NonPositive {
                        name: "error exponent",
                        value: *exponent,
                    });
                }
                dir.validate()?;
            }
        }
        Ok(())
    }

    pub fn norm(&self, n: u64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Geometric { scale, ratio, .. } => scale * ratio.powi(n.min(i32::MAX as u64) as i32),
            Self::PowerDecay {
                scale, exponent, ..
            } => scale * ((n + 1) as f64).powf(-exponent),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Geometric { scale, .. } | Self::PowerDecay { scale, .. } => *scale == 0.0,
        }
    }

    fn dir(&self) -> Option<&ErrDirection> {
        match self {
            Self::Zero => None,
            Self::Geometric { dir, .. } | Self::PowerDecay { dir, .. } => Some(dir),
        }
    }

    pub fn uses_seed(&self) -> bool {
        matches!(self.dir(), Some(ErrDirection::SeededRandom { .. }))
    }

    /// eₙ as a d-dimensional vector.
    pub fn vector(&self, n: u64, d: usize) -> Result<Vec<f64>> {
        let norm = self.norm(n);
        let Some(dir) = self.dir() else {
            return Ok(vec![0.0; d]);
        };
        if norm == 0.0 {
            return Ok(vec![0.0; d]);
        }
        let unit = dir.unit(n, d)?;
        Ok(unit.iter().map(|x| x * norm).collect())
    }
}

impl ErrDirection {
    fn validate(&self) -> Result<()> {
        match self {
            Self::Fixed(v) | Self::Alternating(v) => {
                if norm_slice(v.coords()) == 0.0 {
                    return Err(Error::InvalidParameter(
                        "error direction must be a nonzero vector".into(),
                    ));
                }
            }
            Self::SeededRandom { .. } => {}
        }
        Ok(())
    }

    fn unit(&self, n: u64, d: usize) -> Result<Vec<f64>> {
        match self {
            Self::Fixed(v) | Self::Alternating(v) => {
                if v.dim() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: v.dim(),
                    });
                }
                let norm = norm_slice(v.coords());
                let sign = match self {
                    Self::Alternating(_) if n % 2 == 1 => -1.0,
                    _ => 1.0,
                };
                Ok(v.coords().iter().map(|x| sign * x / norm).collect())
            }
            Self::SeededRandom { seed } => {
                // One stream per step index: reproducible random access.
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(n);
                let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let norm = norm_slice(&v);
                if norm < 1e-12 {
                    v = vec![0.0; d];
                    v[0] = 1.0;
                    return Ok(v);
                }
                for x in &mut v {
                    *x /= norm;
                }
                Ok(v)
            }
        }
    }
}

impl ParamSchedule {
    pub fn new(alpha: AlphaFamily, beta: BetaFamily, err: ErrFamily) -> Result<Self> {
        alpha.validate()?;
        beta.validate()?;
        err.validate()?;
        let flags = derive_flags(&alpha, &beta, &err);
        Ok(Self {
            alpha,
            beta,
            err,
            flags,
        })
    }

    pub fn alpha(&self, n: u64) -> f64 {
        self.alpha.value(n)
    }

    pub fn beta(&self, n: u64) -> f64 {
        self.beta.value(n)
    }

    pub fn err_norm(&self, n: u64) -> f64 {
        self.err.norm(n)
    }

    pub fn err_vector(&self, n: u64, d: usize) -> Result<Vec<f64>> {
        self.err.vector(n, d)
    }

    pub fn alpha_family(&self) -> &AlphaFamily {
        &self.alpha
    }

    pub fn beta_family(&self) -> &BetaFamily {
        &self.beta
    }

    pub fn err_family(&self) -> &ErrFamily {
        &self.err
    }

    pub fn flags(&self) -> ConditionFlags {
        self.flags
    }

    pub fn beta_limit(&self) -> f64 {
        self.beta.limit()
    }

    pub fn describe(&self) -> String {
        let alpha = match &self.alpha {
            AlphaFamily::Constant { value } => format!("alpha=const({value})"),
            AlphaFamily::Power { shift, exponent } => {
                format!("alpha=(n+{shift})^-{exponent}")
            }
            AlphaFamily::Harmonic => "alpha=1/(n+1)".into(),
        };
        let beta = match &self.beta {
            BetaFamily::Constant { value } => format!("beta=const({value})"),
            BetaFamily::AlternatingHarmonic { limit } => {
                format!("beta={limit}+(-1)^n/(n+1)")
            }
            BetaFamily::PowerApproach { limit, exponent } => {
                format!("beta={limit}+(n+1)^-{exponent}")
            }
        };
        let err = match &self.err {
            ErrFamily::Zero => "err=0".into(),
            ErrFamily::Geometric { scale, ratio, .. } => {
                format!("err={scale}*{ratio}^n")
            }
            ErrFamily::PowerDecay {
                scale, exponent, ..
            } => format!("err={scale}*(n+1)^-{exponent}"),
        };
        format!("{alpha}, {beta}, {err}")
    }
}

fn derive_flags(alpha: &AlphaFamily, beta: &BetaFamily, err: &ErrFamily) -> ConditionFlags {
    let (c0, c1, c2, c3) = match alpha {
        AlphaFamily::Constant { value } => {
            let pos = *value > 0.0;
            // Constant differences vanish, but the ratio is undefined at 0.
            (*value == 0.0, pos, pos, pos)
        }
        // Exponents are capped at 1, so the series always diverges; the
        // difference ratio vanishes only for exponents strictly below 1.
        AlphaFamily::Power { exponent, .. } => (true, true, true, *exponent < 1.0),
        AlphaFamily::Harmonic => (true, true, true, false),
    };
    let c4 = beta.limit() > 0.0;
    let (c5, c6) = match err {
        ErrFamily::Zero => (true, true),
        ErrFamily::Geometric { scale, .. } => {
            if *scale == 0.0 {
                (true, true)
            } else {
                // Geometric decay beats every admissible alpha family.
                (true, alpha.strictly_positive())
            }
        }
        ErrFamily::PowerDecay {
            scale, exponent, ..
        } => {
            if *scale == 0.0 {
                (true, true)
            } else {
                let c5 = *exponent > 1.0;
                let c6 = match alpha {
                    AlphaFamily::Constant { value } => *value > 0.0,
                    AlphaFamily::Power {
                        exponent: alpha_exp,
                        ..
                    } => exponent > alpha_exp,
                    AlphaFamily::Harmonic => *exponent > 1.0,
                };
                (c5, c6)
            }
        }
    };
    ConditionFlags {
        c0,
        c1,
        c2,
        c3,
        c4,
        c5,
        c6,
    }
}
