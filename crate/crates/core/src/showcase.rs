//! A fully worked parameter family packaged end to end: the schedule
//! αₙ = (n+2)^(−3/4), βₙ = 1 + (−1)ⁿ/(n+1), eₙ = 0, its moduli, the
//! polynomial closed-form rates it admits, and a full certification run.
//! All rates here depend on the instance only through the radius bound b.

use crate::bigcount::{bc, succ, BigCount};
use crate::certify::{
    check_asymptotic_regularity, check_instance_radius, check_lemma_inequalities,
    check_rate_of_convergence, empirical_metastability_witness, validate_moduli, CertReport,
    CheckResult, ResolventTarget, Tolerance, WitnessKind, WitnessRecord,
};
use crate::counterfunction::Counterfunction;
use crate::dynamics::{browder_path, run_hppa, Trajectory};
use crate::error::{Error, Result};
use crate::moduli::{asreg_rates, delta_l, phi_v1, theta_v1, Branch, ModuliPack};
use crate::operators::MonotoneOperator;
use crate::point::Point;
use crate::schedule::{AlphaFamily, BetaFamily, ErrDirection, ErrFamily, ParamSchedule};
use num_traits::{ToPrimitive, Zero};

/// The showcase schedule with zero errors.
pub fn schedule() -> ParamSchedule {
    ParamSchedule::new(
        AlphaFamily::Power {
            shift: 2,
            exponent: 0.75,
        },
        BetaFamily::AlternatingHarmonic { limit: 1.0 },
        ErrFamily::Zero,
    )
    .expect("showcase schedule is valid")
}

/// The perturbed companion: same weights, errors ‖eₙ‖ = 10⁻³·2⁻ⁿ along a
/// fixed unit direction, exercising the summable-error machinery.
pub fn perturbed_schedule(dim: usize) -> ParamSchedule {
    let mut dir = vec![0.0; dim];
    dir[0] = 1.0;
    ParamSchedule::new(
        AlphaFamily::Power {
            shift: 2,
            exponent: 0.75,
        },
        BetaFamily::AlternatingHarmonic { limit: 1.0 },
        ErrFamily::Geometric {
            scale: 1e-3,
            ratio: 0.5,
            dir: ErrDirection::Fixed(Point::new(dir).expect("unit direction")),
        },
    )
    .expect("perturbed showcase schedule is valid")
}

/// The moduli pack for the zero-error schedule:
/// σ₀(k) = (k+1)², σ₁(k) = (k+1)⁴, σ₂(k) = k, σ₃(k) = (k+1)⁴+1, σ₄(k) = k,
/// σ₅ = σ₆ = 0, ℓ = 0, D = D* = 1, β = 1, nonincreasing weights.
pub fn moduli_pack(b: &BigCount) -> Result<ModuliPack> {
    let mut pack = ModuliPack::new(b.clone(), bc(0), 1.0)?;
    pack.sigma0 = Some(Counterfunction::poly(&[1, 2, 1]));
    pack.sigma1 = Some(Counterfunction::poly(&[1, 4, 6, 4, 1]));
    pack.sigma2 = Some(Counterfunction::Identity);
    pack.sigma3 = Some(Counterfunction::poly(&[2, 4, 6, 4, 1]));
    pack.sigma4 = Some(Counterfunction::Identity);
    pack.sigma5 = Some(Counterfunction::constant(0));
    pack.sigma6 = Some(Counterfunction::constant(0));
    pack.d_sum = Some(bc(1));
    pack.d_ratio = Some(bc(1));
    pack.alpha_nonincreasing = true;
    Ok(pack)
}

/// Moduli for the perturbed companion. The geometric tail gives
/// Σ_{i>m}‖eᵢ‖ = 10⁻³·2⁻ᵐ ≤ 1/(k+1) already at m = k, so the identity is a
/// valid Cauchy modulus for both error conditions; D grows to 2.
pub fn perturbed_moduli_pack(b: &BigCount) -> Result<ModuliPack> {
    let mut pack = moduli_pack(b)?;
    pack.sigma5 = Some(Counterfunction::Identity);
    pack.sigma6 = Some(Counterfunction::Identity);
    pack.d_sum = Some(bc(2));
    pack.d_ratio = Some(bc(1));
    Ok(pack)
}

fn require_b(b: &BigCount) -> Result<()> {
    if b.is_zero() {
        return Err(Error::InvalidParameter("b must be at least 1".into()));
    }
    Ok(())
}

fn theta0_closed_form(b: &BigCount, k: u64) -> BigCount {
    let base = bc(18).pow(4) * b.pow(4) * succ(k).pow(4) + bc(18) * b * succ(k) + 1u32;
    base.pow(4) + 1u32
}

/// Θ₀(k) = (18⁴b⁴(k+1)⁴ + 18b(k+1) + 1)⁴ + 1, a closed-form rate of
/// convergence for ‖xₙ−zₙ‖ → 0 dominating the general-formula rate.
pub fn theta0(b: &BigCount, k: u64) -> Result<BigCount> {
    require_b(b)?;
    let v = theta0_closed_form(b, k);
    let pack = moduli_pack(b)?;
    let theta = theta_v1(&pack, k, Branch::SumDivergence)?;
    assert!(theta <= v, "closed form must dominate the general rate");
    Ok(v)
}

#[derive(Debug, Clone)]
pub struct SigmaBars {
    /// Σ̄(k) = (C⁴(k+1)⁴ + C(k+1) + 1)⁴ + 1 with C = 72b: asymptotic
    /// regularity against the limit resolvent.
    pub bar: BigCount,
    /// Σ̄*(k) = Σ̄(2k+1): against the per-step family and each fixed member.
    pub bar_star: BigCount,
}

fn sigma_bar_closed_form(b: &BigCount, k: u64) -> BigCount {
    let c = bc(72) * b;
    let base = c.pow(4) * succ(k).pow(4) + &c * succ(k) + 1u32;
    base.pow(4) + 1u32
}

/// The two asymptotic-regularity rates, cross-checked against the general
/// construction instantiated with Λ = Θ₀ and member gap 1.
pub fn sigma_bars(b: &BigCount, k: u64) -> Result<SigmaBars> {
    require_b(b)?;
    let bar = sigma_bar_closed_form(b, k);
    let bar_star = sigma_bar_closed_form(b, 2 * k + 1);
    // Σ̄*(k) expands to (16C⁴(k+1)⁴ + 2C(k+1) + 1)⁴ + 1.
    let c = bc(72) * b;
    let expanded = (bc(16) * c.pow(4) * succ(k).pow(4) + bc(2) * &c * succ(k) + 1u32).pow(4)
        + 1u32;
    assert_eq!(bar_star, expanded, "doubled-index expansion must agree");
    // The general construction with Λ = Θ₀ and Mᵢ = 1 is dominated (in fact
    // equal, the weight-vanishing term being negligible).
    let pack = moduli_pack(b)?;
    let rates = asreg_rates(
        pack.sigma0.as_ref().unwrap(),
        pack.sigma4.as_ref().unwrap(),
        b,
        &pack.ell,
        |i| Ok(theta0_closed_form(b, i)),
        k,
        &[bc(1)],
    )?;
    assert!(rates.fixed <= bar);
    assert!(rates.family <= bar_star);
    assert!(rates.members[0] <= bar_star);
    Ok(SigmaBars { bar, bar_star })
}

/// Δ̄_L(k) = (54⁴b⁴(k+1)⁴ + 54b(k+1) + 1)⁴ + 81b²(k+1)²L + 1, the
/// constant-window metastability rate; equals the combinator applied to Θ₀.
pub fn delta_bar_l(b: &BigCount, l: u64, k: u64) -> Result<BigCount> {
    require_b(b)?;
    let base = bc(54).pow(4) * b.pow(4) * succ(k).pow(4) + bc(54) * b * succ(k) + 1u32;
    let v = base.pow(4) + bc(81) * b * b * succ(k).pow(2) * bc(l) + 1u32;
    let composed = delta_l(|i| Ok(theta0_closed_form(b, i)), b, l, k)?;
    assert_eq!(composed, v, "combinator composition must reproduce the closed form");
    Ok(v)
}

#[derive(Debug, Clone)]
pub struct RateRow {
    pub rate: String,
    pub k: u64,
    /// Window descriptor for metastability rates, empty otherwise.
    pub arg: String,
    pub value: BigCount,
}

#[derive(Debug, Clone)]
pub struct ShowcaseOptions {
    /// k range for the emitted rate table.
    pub rate_k_max: u64,
    /// k range for metastability witness search.
    pub witness_k_max: u64,
    /// k range for the asymptotic-regularity rate check.
    pub asreg_k_max: u64,
    /// Counterfunctions driving witness search and the Δ̄ table.
    pub g_list: Vec<Counterfunction>,
    pub tol: Tolerance,
    /// Fixed-point residual target for the approximant path solver.
    pub approximant_tol: f64,
    pub include_perturbed: bool,
}

impl Default for ShowcaseOptions {
    fn default() -> Self {
        Self {
            rate_k_max: 3,
            witness_k_max: 5,
            asreg_k_max: 9,
            g_list: vec![
                Counterfunction::constant(0),
                Counterfunction::constant(1),
                Counterfunction::constant(10),
                Counterfunction::Identity,
            ],
            tol: Tolerance::default(),
            approximant_tol: 1e-13,
            include_perturbed: true,
        }
    }
}

#[derive(Debug)]
pub struct ShowcaseRun {
    /// Radius bound computed from the instance.
    pub b: BigCount,
    pub report: CertReport,
    pub rates: Vec<RateRow>,
    pub trajectory: Trajectory,
    pub approximants: Trajectory,
}

/// Full pipeline on one operator instance: trajectory, approximant path,
/// every inequality check, modulus validation, rate table, witness search,
/// and soundness comparison of empirical witnesses against the bounds.
pub fn run(op: &MonotoneOperator, u: &Point, x0: &Point, budget: usize) -> Result<ShowcaseRun> {
    run_with(op, u, x0, budget, &ShowcaseOptions::default())
}

pub fn run_with(
    op: &MonotoneOperator,
    u: &Point,
    x0: &Point,
    budget: usize,
    opts: &ShowcaseOptions,
) -> Result<ShowcaseRun> {
    let tol = &opts.tol;
    let p = op.project_zero_set(u)?;
    if x0.dim() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: x0.dim(),
        });
    }
    let radius = u.dist(&p).max(x0.dist(&p));
    if radius >= 2f64.powi(53) {
        return Err(Error::InvalidParameter("instance radius too large".into()));
    }
    let b = bc((radius.ceil() as u64).max(1));
    let pack = moduli_pack(&b)?;
    let sched = schedule();

    let trajectory = run_hppa(op, &sched, u, x0, budget)?;
    let approximants = browder_path(op, 1.0, &sched, u, opts.approximant_tol, budget)?;

    let mut report = check_lemma_inequalities(&trajectory, Some(&approximants), op, u, tol)?;
    report.instance = format!("{} | {}", op.describe(), sched.describe());
    report.checks.push(check_instance_radius(&b, op, u, x0, tol)?);

    let horizon = (budget as u64).clamp(1, 100_000);
    report.merge(validate_moduli(&pack, &sched, horizon, tol)?);

    // Asymptotic regularity against the limit resolvent and the family.
    let (check, wits) = check_asymptotic_regularity(
        &trajectory,
        op,
        ResolventTarget::Limit(1.0),
        |k| Ok(sigma_bar_closed_form(&b, k)),
        opts.asreg_k_max,
        budget as u64,
        tol,
    )?;
    report.checks.push(check);
    report.witnesses.extend(wits);
    let (mut check, wits) = check_asymptotic_regularity(
        &trajectory,
        op,
        ResolventTarget::PerStep,
        |k| Ok(sigma_bar_closed_form(&b, 2 * k + 1)),
        opts.asreg_k_max,
        budget as u64,
        tol,
    )?;
    check.name = "asymptotic-regularity-family".into();
    report.checks.push(check);
    report.witnesses.extend(wits);

    // Rate of convergence of the iterate/approximant gap against Θ₀
    // (astronomical, hence usually vacuous; the empirical witness is the
    // informative part).
    let gap: Vec<f64> = trajectory
        .points
        .iter()
        .zip(&approximants.points)
        .map(|(x, z)| x.dist(z))
        .collect();
    let (mut check, wits) = check_rate_of_convergence(
        &gap,
        0.0,
        |k| Ok(theta0_closed_form(&b, k)),
        WitnessKind::Convergence,
        "xn-zn-rate",
        opts.rate_k_max,
        budget as u64,
        tol,
    )?;
    check.paper_anchor = "rates.gap-convergence".into();
    report.checks.push(check);
    report.witnesses.extend(wits);

    // Decade trend checks.
    let checkpoints: Vec<usize> = [100usize, 1_000, 10_000, 100_000]
        .into_iter()
        .filter(|&n| n <= budget)
        .collect();
    let dxp: Vec<f64> = trajectory.points.iter().map(|x| x.dist(&p)).collect();
    report
        .checks
        .push(trend_check("strong-convergence-trend", "trend.anchored-limit", &dxp, &checkpoints, tol));
    report
        .checks
        .push(trend_check("xn-zn-trend", "trend.gap", &gap, &checkpoints, tol));
    let residuals =
        crate::certify::regularity_residuals(&trajectory, op, ResolventTarget::Limit(1.0))?;
    report.checks.push(trend_check(
        "residual-decade-trend",
        "trend.regularity-residual",
        &residuals,
        &checkpoints,
        tol,
    ));

    // Metastability witness search plus soundness against the bounds.
    let mut soundness_ok = true;
    let mut worst = 0.0f64;
    for k in 0..=opts.witness_k_max {
        for g in &opts.g_list {
            let found =
                match empirical_metastability_witness(&trajectory.points, k, g, budget as u64) {
                    Ok(res) => res,
                    Err(Error::WindowExceedsTrajectory { .. })
                    | Err(Error::WindowCapExceeded { .. }) => None,
                    Err(e) => return Err(e),
                };
            let bound = phi_v1(&pack, k, g, Branch::SumDivergence)?;
            if let Some(n) = found {
                if bc(n) > bound {
                    soundness_ok = false;
                    worst = worst.max(n as f64 - bound.to_f64().unwrap_or(0.0));
                }
                if let Counterfunction::Constant(l) = g {
                    if let Some(l) = l.to_u64() {
                        let db = delta_bar_l(&b, l, k)?;
                        if bc(n) > db {
                            soundness_ok = false;
                            worst = worst.max(n as f64 - db.to_f64().unwrap_or(0.0));
                        }
                    }
                }
            }
            report.witnesses.push(WitnessRecord {
                kind: WitnessKind::Metastability,
                k,
                g: g.descriptor(),
                empirical_n: found,
                bound: bound.to_string(),
                bound_exceeds_budget: bound > bc(budget as u64),
            });
        }
    }
    report.checks.push(CheckResult {
        name: "witness-soundness".into(),
        paper_anchor: "rates.witness-soundness".into(),
        n_range: [0, opts.witness_k_max],
        max_violation: worst,
        pass: soundness_ok,
    });

    // Perturbed companion: same weights, geometric errors. The approximant
    // path does not depend on the errors, so it is shared.
    if opts.include_perturbed {
        let sched_p = perturbed_schedule(op.dim());
        let pack_p = perturbed_moduli_pack(&b)?;
        let traj_p = run_hppa(op, &sched_p, u, x0, budget)?;
        let mut rep_p = check_lemma_inequalities(&traj_p, Some(&approximants), op, u, tol)?;
        rep_p.merge(validate_moduli(&pack_p, &sched_p, horizon, tol)?);
        rep_p.tag_checks("perturbed");
        report.merge(rep_p);
    }

    // Rate table; every row is a function of (b, k) alone.
    let mut rates = Vec::new();
    for k in 0..=opts.rate_k_max {
        rates.push(RateRow {
            rate: "theta0".into(),
            k,
            arg: String::new(),
            value: theta0(&b, k)?,
        });
        let bars = sigma_bars(&b, k)?;
        rates.push(RateRow {
            rate: "sigma-bar".into(),
            k,
            arg: String::new(),
            value: bars.bar,
        });
        rates.push(RateRow {
            rate: "sigma-bar-star".into(),
            k,
            arg: String::new(),
            value: bars.bar_star,
        });
        for g in &opts.g_list {
            if let Counterfunction::Constant(l) = g {
                if let Some(l) = l.to_u64() {
                    rates.push(RateRow {
                        rate: "delta-bar".into(),
                        k,
                        arg: format!("L={l}"),
                        value: delta_bar_l(&b, l, k)?,
                    });
                }
            }
        }
    }

    Ok(ShowcaseRun {
        b,
        report,
        rates,
        trajectory,
        approximants,
    })
}

fn trend_check(
    name: &'static str,
    anchor: &'static str,
    values: &[f64],
    checkpoints: &[usize],
    tol: &Tolerance,
) -> CheckResult {
    let mut max_violation = 0.0f64;
    let mut pass = true;
    let mut prev: Option<f64> = None;
    for &n in checkpoints {
        if n >= values.len() {
            continue;
        }
        let v = values[n];
        if let Some(p) = prev {
            let raw = v - p;
            let scale = v.abs().max(p.abs()).max(1.0);
            if raw / scale > max_violation {
                max_violation = raw / scale;
            }
            if !(raw <= tol.atol + tol.rtol * scale) {
                pass = false;
            }
        }
        prev = Some(v);
    }
    CheckResult {
        name: name.into(),
        paper_anchor: anchor.into(),
        n_range: [
            checkpoints.first().copied().unwrap_or(0) as u64,
            checkpoints.last().copied().unwrap_or(0) as u64,
        ],
        max_violation: max_violation.max(0.0),
        pass,
    }
}
