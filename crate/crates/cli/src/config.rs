//! Experiment configuration: a single JSON document with no embedded
//! expressions. Schedules and counterfunctions are named families with
//! numeric parameters; unknown keys are rejected.

use hppa_core::counterfunction::Counterfunction;
use hppa_core::moduli::ModuliPack;
use hppa_core::operators::MonotoneOperator;
use hppa_core::point::Point;
use hppa_core::schedule::{
    AlphaFamily, BetaFamily, ErrDirection, ErrFamily, ParamSchedule,
};
use hppa_core::{bc, Tolerance};
use serde::{Deserialize, Serialize};

use crate::CliError;

fn default_k_max() -> u64 {
    3
}

fn default_algorithm() -> String {
    "hppa".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub operator: OperatorSpec,
    pub schedule: ScheduleSpec,
    #[serde(default = "default_algorithm")]
    pub algorithm: String,
    #[serde(default)]
    pub u: Option<Vec<f64>>,
    pub x0: Vec<f64>,
    pub budget: usize,
    #[serde(default = "default_k_max")]
    pub k_max: u64,
    #[serde(default)]
    pub g: Vec<CounterfunctionSpec>,
    #[serde(default)]
    pub moduli: Option<ModuliSpec>,
    /// Named pack shorthand; currently `example5`.
    #[serde(default)]
    pub moduli_preset: Option<String>,
    #[serde(default)]
    pub tolerance: Option<ToleranceSpec>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<String>,
    /// Fixed resolvent weight for `halpern` and `browder`; defaults to the
    /// schedule's beta limit.
    #[serde(default)]
    pub beta_fixed: Option<f64>,
    /// Fixed-point residual target for approximant solves.
    #[serde(default)]
    pub approximant_tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub alpha: AlphaSpec,
    pub beta: BetaSpec,
    pub err: ErrSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaSpec {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaSpec {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrSpec {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<DirectionSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterfunctionSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuliSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<CounterfunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma1: Option<CounterfunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<CounterfunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma3: Option<CounterfunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma4: Option<CounterfunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma5: Option<CounterfunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma6: Option<CounterfunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<u64>,
    #[serde(default)]
    pub ell: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dstar: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta0: Option<CounterfunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta0_star: Option<CounterfunctionSpec>,
    #[serde(default)]
    pub alpha_nonincreasing: bool,
    pub beta_limit: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn point(name: &str, coords: &Option<Vec<f64>>) -> Result<Point, CliError> {
    let coords = coords
        .as_ref()
        .ok_or_else(|| bad(format!("field `{name}` is required for this variant")))?;
    Point::new(coords.clone()).map_err(|e| bad(format!("field `{name}`: {e}")))
}

impl ExperimentConfig {
    /// Syntactic parse only; `validate` runs after CLI overrides merge in.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| bad(format!("config parse error: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match self.algorithm.as_str() {
            "ppa" | "halpern" | "hppa" | "browder" => {}
            other => return Err(bad(format!("unknown algorithm `{other}`"))),
        }
        if self.algorithm != "ppa" && self.u.is_none() {
            return Err(bad(format!(
                "algorithm `{}` needs an anchor `u`",
                self.algorithm
            )));
        }
        if self.moduli.is_some() && self.moduli_preset.is_some() {
            return Err(bad("supply either `moduli` or `moduli_preset`, not both"));
        }
        if let Some(p) = &self.moduli_preset {
            if p != "example5" {
                return Err(bad(format!("unknown moduli preset `{p}`")));
            }
        }
        if self.uses_random_direction() && self.seed.is_none() {
            return Err(bad(
                "`seed` is mandatory when a seeded-random error direction is used",
            ));
        }
        Ok(())
    }

    fn uses_random_direction(&self) -> bool {
        self.schedule
            .err
            .direction
            .as_ref()
            .is_some_and(|d| d.kind == "seeded-random")
    }

    pub fn operator(&self) -> Result<MonotoneOperator, CliError> {
        let spec = &self.operator;
        let forbid = |cond: bool, field: &str| -> Result<(), CliError> {
            if cond {
                Err(bad(format!(
                    "field `{field}` does not apply to variant `{}`",
                    spec.variant
                )))
            } else {
                Ok(())
            }
        };
        match spec.variant.as_str() {
            "quadratic-shift" => {
                forbid(spec.matrix.is_some(), "matrix")?;
                forbid(spec.lo.is_some() || spec.hi.is_some(), "lo/hi")?;
                forbid(spec.radius.is_some() || spec.lambda.is_some(), "radius/lambda")?;
                Ok(MonotoneOperator::quadratic_shift(point("c", &spec.c)?))
            }
            "affine-pd" => {
                let matrix = spec
                    .matrix
                    .clone()
                    .ok_or_else(|| bad("affine-pd needs `matrix`"))?;
                MonotoneOperator::affine_pd(matrix, point("c", &spec.c)?)
                    .map_err(|e| bad(e.to_string()))
            }
            "normal-cone-box" => MonotoneOperator::normal_cone_box(
                point("lo", &spec.lo)?,
                point("hi", &spec.hi)?,
            )
            .map_err(|e| bad(e.to_string())),
            "normal-cone-ball" => {
                let radius = spec.radius.ok_or_else(|| bad("ball needs `radius`"))?;
                MonotoneOperator::normal_cone_ball(point("center", &spec.center)?, radius)
                    .map_err(|e| bad(e.to_string()))
            }
            "abs-subdiff" => {
                let lambda = spec.lambda.ok_or_else(|| bad("abs-subdiff needs `lambda`"))?;
                let dim = spec.dim.ok_or_else(|| bad("abs-subdiff needs `dim`"))?;
                MonotoneOperator::abs_subdiff(lambda, dim).map_err(|e| bad(e.to_string()))
            }
            other => Err(bad(format!("unknown operator variant `{other}`"))),
        }
    }

    pub fn schedule(&self, dim: usize) -> Result<ParamSchedule, CliError> {
        let a = &self.schedule.alpha;
        let alpha = match a.family.as_str() {
            "constant" => AlphaFamily::Constant {
                value: a.value.ok_or_else(|| bad("constant alpha needs `value`"))?,
            },
            "power" => AlphaFamily::Power {
                shift: a.shift.ok_or_else(|| bad("power alpha needs `shift`"))?,
                exponent: a
                    .exponent
                    .ok_or_else(|| bad("power alpha needs `exponent`"))?,
            },
            "harmonic" => AlphaFamily::Harmonic,
            other => return Err(bad(format!("unknown alpha family `{other}`"))),
        };
        let b = &self.schedule.beta;
        let beta = match b.family.as_str() {
            "constant" => BetaFamily::Constant {
                value: b.value.ok_or_else(|| bad("constant beta needs `value`"))?,
            },
            "alternating-harmonic" => BetaFamily::AlternatingHarmonic {
                limit: b
                    .limit
                    .ok_or_else(|| bad("alternating-harmonic beta needs `limit`"))?,
            },
            "power-approach" => BetaFamily::PowerApproach {
                limit: b.limit.ok_or_else(|| bad("power-approach beta needs `limit`"))?,
                exponent: b
                    .exponent
                    .ok_or_else(|| bad("power-approach beta needs `exponent`"))?,
            },
            other => return Err(bad(format!("unknown beta family `{other}`"))),
        };
        let e = &self.schedule.err;
        let err = match e.family.as_str() {
            "zero" => ErrFamily::Zero,
            "geometric" => ErrFamily::Geometric {
                scale: e.scale.ok_or_else(|| bad("geometric error needs `scale`"))?,
                ratio: e.ratio.ok_or_else(|| bad("geometric error needs `ratio`"))?,
                dir: self.direction(dim)?,
            },
            "power" => ErrFamily::PowerDecay {
                scale: e.scale.ok_or_else(|| bad("power error needs `scale`"))?,
                exponent: e
                    .exponent
                    .ok_or_else(|| bad("power error needs `exponent`"))?,
                dir: self.direction(dim)?,
            },
            other => return Err(bad(format!("unknown error family `{other}`"))),
        };
        ParamSchedule::new(alpha, beta, err).map_err(|e| bad(e.to_string()))
    }

    fn direction(&self, dim: usize) -> Result<ErrDirection, CliError> {
        let d = self
            .schedule
            .err
            .direction
            .as_ref()
            .ok_or_else(|| bad("nonzero error families need `direction`"))?;
        match d.kind.as_str() {
            "fixed" => Ok(ErrDirection::Fixed(point("direction.vector", &d.vector)?)),
            "alternating" => Ok(ErrDirection::Alternating(point(
                "direction.vector",
                &d.vector,
            )?)),
            "seeded-random" => Ok(ErrDirection::SeededRandom {
                seed: self
                    .seed
                    .ok_or_else(|| bad("seeded-random direction needs `seed`"))?,
            }),
            other => {
                let _ = dim;
                Err(bad(format!("unknown direction kind `{other}`")))
            }
        }
    }

    pub fn anchor(&self) -> Result<Point, CliError> {
        point("u", &self.u)
    }

    pub fn start(&self) -> Result<Point, CliError> {
        Point::new(self.x0.clone()).map_err(|e| bad(format!("field `x0`: {e}")))
    }

    pub fn tolerance(&self) -> Tolerance {
        let mut tol = Tolerance::default();
        if let Some(t) = &self.tolerance {
            if let Some(atol) = t.atol {
                tol.atol = atol;
            }
            if let Some(rtol) = t.rtol {
                tol.rtol = rtol;
            }
        }
        // Environment override of the relative slack.
        if let Ok(v) = std::env::var("HPPA_CERT_TOL") {
            if let Ok(rtol) = v.parse::<f64>() {
                tol.rtol = rtol;
            }
        }
        tol
    }

    pub fn g_list(&self) -> Result<Vec<Counterfunction>, CliError> {
        self.g.iter().map(counterfunction).collect()
    }

    /// Resolves the custom moduli block, if any, into a pack.
    pub fn moduli_pack(&self) -> Result<Option<ModuliPack>, CliError> {
        let Some(spec) = &self.moduli else {
            return Ok(None);
        };
        let b = spec.b.ok_or_else(|| bad("moduli need `b`"))?;
        let mut pack = ModuliPack::new(bc(b), bc(spec.ell), spec.beta_limit)
            .map_err(|e| bad(e.to_string()))?;
        let cf = |s: &Option<CounterfunctionSpec>| -> Result<Option<Counterfunction>, CliError> {
            s.as_ref().map(counterfunction).transpose()
        };
        pack.sigma0 = cf(&spec.sigma0)?;
        pack.sigma1 = cf(&spec.sigma1)?;
        pack.sigma2 = cf(&spec.sigma2)?;
        pack.sigma3 = cf(&spec.sigma3)?;
        pack.sigma4 = cf(&spec.sigma4)?;
        pack.sigma5 = cf(&spec.sigma5)?;
        pack.sigma6 = cf(&spec.sigma6)?;
        pack.d_sum = spec.d.map(bc);
        pack.d_ratio = spec.dstar.map(bc);
        pack.delta0 = cf(&spec.delta0)?;
        pack.delta0_star = cf(&spec.delta0_star)?;
        pack.alpha_nonincreasing = spec.alpha_nonincreasing;
        Ok(Some(pack))
    }
}

pub fn counterfunction(spec: &CounterfunctionSpec) -> Result<Counterfunction, CliError> {
    match spec.kind.as_str() {
        "constant" => Ok(Counterfunction::constant(
            spec.value
                .ok_or_else(|| bad("constant counterfunction needs `value`"))?,
        )),
        "identity" => Ok(Counterfunction::Identity),
        "affine" => Ok(Counterfunction::affine(
            spec.slope
                .ok_or_else(|| bad("affine counterfunction needs `slope`"))?,
            spec.offset.unwrap_or(0),
        )),
        "poly" => {
            let coeffs = spec
                .coeffs
                .as_ref()
                .ok_or_else(|| bad("poly counterfunction needs `coeffs`"))?;
            Ok(Counterfunction::poly(coeffs))
        }
        other => Err(bad(format!("unknown counterfunction kind `{other}`"))),
    }
}
