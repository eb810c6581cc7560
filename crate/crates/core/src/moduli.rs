//! Exact arbitrary-precision evaluation of every quantitative rate: the
//! scalar-recurrence convergence rates, the rates of convergence for the
//! iterate/approximant gap, asymptotic-regularity rates, and the
//! metastability combinators built on top of them.
//!
//! All evaluations are exact in `BigCount`; the only approximate ingredient
//! is ⌈ln·⌉, which is computed against two-sided rational bounds on e and
//! rounded up on ambiguity — every formula uses it inside an upper bound, so
//! over-approximation preserves validity.

use crate::bigcount::{bc, succ, BigCount};
use crate::counterfunction::Counterfunction;
use crate::error::{Error, Result};
use crate::schedule::ParamSchedule;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Cap on explicit functional iteration; beyond it only closed forms apply.
pub const ITERATION_BUDGET: u64 = 1_000_000;

/// Cap on exact rational products in the reciprocal-product modulus.
const EXACT_PRODUCT_CAP: u64 = 10_000;

/// Rational brackets on Euler's number: E_LOW/10⁹ < e < E_HIGH/10⁹.
const E_HIGH: u64 = 2_718_281_829;
const E_LOW: u64 = 2_718_281_828;

/// Which tail hypothesis drives a rate: divergence of Σαₙ, or vanishing of
/// the running product Π(1−αₙ).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    SumDivergence,
    ProductVanishing,
}

/// The quantitative hypotheses attached to one schedule: moduli for each
/// condition, the iterate bound base b, the resolvent floor witness ℓ, and
/// the error caps for the two error regimes.
#[derive(Debug, Clone)]
pub struct ModuliPack {
    pub sigma0: Option<Counterfunction>,
    pub sigma1: Option<Counterfunction>,
    pub sigma2: Option<Counterfunction>,
    pub sigma3: Option<Counterfunction>,
    pub sigma4: Option<Counterfunction>,
    pub sigma5: Option<Counterfunction>,
    pub sigma6: Option<Counterfunction>,
    /// b ≥ max{‖x₀−p‖, ‖u−p‖} for some zero p.
    pub b: BigCount,
    /// β ≥ 1/(ℓ+1).
    pub ell: BigCount,
    /// D ≥ Σ_{i≤σ₅(0)}‖eᵢ‖ + 1 (summable-error branch).
    pub d_sum: Option<BigCount>,
    /// D* ≥ max_{i≤σ₆(0)} max{‖eᵢ‖/αᵢ, 1} (vanishing-ratio branch).
    pub d_ratio: Option<BigCount>,
    /// 1/δ₀(k) ≤ Π_{j<δ(k)}(1−αⱼ).
    pub delta0: Option<Counterfunction>,
    /// Same with δ*(k) in place of δ(k).
    pub delta0_star: Option<Counterfunction>,
    pub alpha_nonincreasing: bool,
    pub beta_limit: f64,
}

impl ModuliPack {
    pub fn new(b: BigCount, ell: BigCount, beta_limit: f64) -> Result<Self> {
        if b.is_zero() {
            return Err(Error::InvalidParameter("b must be at least 1".into()));
        }
        if !(beta_limit > 0.0) {
            return Err(Error::NonPositive {
                name: "beta_limit",
                value: beta_limit,
            });
        }
        Ok(Self {
            sigma0: None,
            sigma1: None,
            sigma2: None,
            sigma3: None,
            sigma4: None,
            sigma5: None,
            sigma6: None,
            b,
            ell,
            d_sum: None,
            d_ratio: None,
            delta0: None,
            delta0_star: None,
            alpha_nonincreasing: false,
            beta_limit,
        })
    }

    fn require<'a>(
        slot: &'a Option<Counterfunction>,
        name: &'static str,
    ) -> Result<&'a Counterfunction> {
        slot.as_ref().ok_or(Error::MissingModulus { name })
    }

    fn require_count<'a>(slot: &'a Option<BigCount>, name: &'static str) -> Result<&'a BigCount> {
        slot.as_ref().ok_or(Error::MissingModulus { name })
    }
}

fn index(k: u64, mul: u64, add: u64) -> u64 {
    k.checked_mul(mul)
        .and_then(|v| v.checked_add(add))
        .expect("rate index overflows u64")
}

/// ⌈ln m⌉ for m ≥ 1, conservatively.
///
/// Returns the smallest t with m ≤ (E_HIGH/10⁹)^t, checked by exact integer
/// cross-multiplication; when the E_LOW bracket disagrees the result is
/// bumped by one, so the answer is never below the true ceiling.
pub fn ceil_ln(m: &BigCount) -> Result<BigCount> {
    if m.is_zero() {
        return Err(Error::InvalidParameter("ceil_ln needs m >= 1".into()));
    }
    let up = ceil_ln_with(m, E_HIGH);
    let down = ceil_ln_with(m, E_LOW);
    Ok(if up == down { bc(up) } else { bc(up + 1) })
}

/// Smallest t with m·(10⁹)^t ≤ num^t.
fn ceil_ln_with(m: &BigCount, num: u64) -> u64 {
    let ten9 = bc(1_000_000_000);
    let base = bc(num);
    let mut t = 0u64;
    let mut lhs = m.clone();
    let mut rhs = bc(1);
    while lhs > rhs {
        t += 1;
        lhs *= &ten9;
        rhs *= &base;
    }
    t
}

/// Iterate g̃(n) = n + g(n) from 0, `count` times, exactly.
///
/// Constant and threshold-shifted-constant shapes use their closed forms
/// (count·L and T + count·L); anything else iterates explicitly and fails
/// with the symbolic count when it exceeds the budget.
fn iterate_tilde(count: &BigCount, g: &Counterfunction) -> Result<BigCount> {
    if count.is_zero() {
        return Ok(bc(0));
    }
    match g {
        Counterfunction::Constant(l) => return Ok(count * l),
        Counterfunction::ClampedShift { threshold, inner } => {
            if let Counterfunction::Constant(l) = inner.as_ref() {
                return Ok(threshold + count * l);
            }
        }
        _ => {}
    }
    let first = g.eval(&bc(0));
    if first.is_zero() {
        // 0 is a fixed point of g̃.
        return Ok(bc(0));
    }
    let steps = count
        .to_u64()
        .filter(|c| *c <= ITERATION_BUDGET)
        .ok_or_else(|| Error::BudgetExceeded {
            needed: count.to_string(),
            budget: ITERATION_BUDGET,
        })?;
    let mut x = bc(0);
    for _ in 0..steps {
        x += g.eval(&x);
    }
    Ok(x)
}

/// Metastability rate for the approximant path under nonincreasing (αₙ):
/// Ω_d(k, g) = g̃^(d²(k+1)²)(0), valid for d ≥ 3‖u−p‖.
pub fn omega_nonincreasing(d: &BigCount, k: u64, g: &Counterfunction) -> Result<BigCount> {
    if d.is_zero() {
        return Err(Error::InvalidParameter("d must be at least 1".into()));
    }
    let count = d * d * succ(k).pow(2);
    iterate_tilde(&count, g)
}

/// Metastability rate for the approximant path from a quasi-rate χ of
/// αₙ → 0 and a pointwise floor αₙ ≥ 1/(h(n)+1):
/// Ω̃(k, g) = χ_g^M( g_{h,χ_g}^(4d²(k+1)²)(0) ).
pub fn omega_general(
    chi: impl Fn(u64, &Counterfunction) -> Result<BigCount>,
    h: &Counterfunction,
    d: &BigCount,
    k: u64,
    g: &Counterfunction,
) -> Result<BigCount> {
    if d.is_zero() {
        return Err(Error::InvalidParameter("d must be at least 1".into()));
    }
    let count = bc(4) * d * d * succ(k).pow(2);
    let steps = count
        .to_u64()
        .filter(|c| *c <= ITERATION_BUDGET)
        .ok_or_else(|| Error::BudgetExceeded {
            needed: count.to_string(),
            budget: ITERATION_BUDGET,
        })?;

    let as_index = |v: &BigCount| -> Result<u64> {
        v.to_u64()
            .filter(|x| *x <= ITERATION_BUDGET)
            .ok_or_else(|| Error::BudgetExceeded {
                needed: v.to_string(),
                budget: ITERATION_BUDGET,
            })
    };

    // max{h(i) : i <= top}
    let prefix_max_h = |top: &BigCount| -> Result<BigCount> {
        if h.is_nondecreasing() {
            return Ok(h.eval(top));
        }
        let top = as_index(top)?;
        let mut best = h.eval_u64(0);
        for i in 1..=top {
            best = best.max(h.eval_u64(i));
        }
        Ok(best)
    };

    let mut x = bc(0);
    for _ in 0..steps {
        let cg = chi(as_index(&x)?, g)?;
        let top = &cg + g.eval(&cg);
        x = prefix_max_h(&top)?;
    }

    // χ_g^M(x) = max{χ(i, g) : i <= x}
    let top = as_index(&x)?;
    let mut best = chi(0, g)?;
    for i in 1..=top {
        let v = chi(i, g)?;
        if v > best {
            best = v;
        }
    }
    Ok(best)
}

/// δ(k) = max{ψ(3k+2), χ(3k+2)+1}: the index from which both the drift term
/// and the summable tail are small enough.
pub fn xu_delta(psi: &Counterfunction, chi: &Counterfunction, k: u64) -> BigCount {
    let i = index(k, 3, 2);
    psi.eval_u64(i).max(chi.eval_u64(i) + 1u32)
}

/// Σ(k) = θ(δ(k) + ⌈ln(3M(k+1))⌉) + 1: rate of convergence for the scalar
/// recurrence s_{n+1} ≤ (1−aₙ)sₙ + aₙbₙ + cₙ under a divergence rate θ.
pub fn xu_sigma(
    m: &BigCount,
    theta: &Counterfunction,
    psi: &Counterfunction,
    chi: &Counterfunction,
    k: u64,
) -> Result<BigCount> {
    if m.is_zero() {
        return Err(Error::InvalidParameter("M must be at least 1".into()));
    }
    let delta = xu_delta(psi, chi, k);
    let log_term = ceil_ln(&(bc(3) * m * succ(k)))?;
    Ok(theta.eval(&(delta + log_term)) + 1u32)
}

/// Σ̃(k) = max{θ(3Mδ₀(k)(k+1)−1), δ(k)} + 1: same target under a rate of
/// convergence θ for the running product.
pub fn xu_sigma_tilde(
    m: &BigCount,
    theta: &Counterfunction,
    psi: &Counterfunction,
    chi: &Counterfunction,
    delta0: &Counterfunction,
    k: u64,
) -> Result<BigCount> {
    if m.is_zero() {
        return Err(Error::InvalidParameter("M must be at least 1".into()));
    }
    let delta = xu_delta(psi, chi, k);
    let arg = bc(3) * m * delta0.eval_u64(k) * succ(k) - 1u32;
    Ok(theta.eval(&arg).max(delta) + 1u32)
}

/// δ*(k) = ψ*(2k+1) for the zero-additive-error specialization.
pub fn xu_delta_star(psi_star: &Counterfunction, k: u64) -> BigCount {
    psi_star.eval_u64(index(k, 2, 1))
}

/// Σ*(k) = θ(δ*(k) + ⌈ln(2M(k+1))⌉) + 1.
pub fn xu_sigma_star(
    m: &BigCount,
    theta: &Counterfunction,
    psi_star: &Counterfunction,
    k: u64,
) -> Result<BigCount> {
    if m.is_zero() {
        return Err(Error::InvalidParameter("M must be at least 1".into()));
    }
    let delta = xu_delta_star(psi_star, k);
    let log_term = ceil_ln(&(bc(2) * m * succ(k)))?;
    Ok(theta.eval(&(delta + log_term)) + 1u32)
}

/// Σ̃*(k) = max{θ(2Mδ₀*(k)(k+1)−1), δ*(k)} + 1.
pub fn xu_sigma_star_tilde(
    m: &BigCount,
    theta: &Counterfunction,
    psi_star: &Counterfunction,
    delta0_star: &Counterfunction,
    k: u64,
) -> Result<BigCount> {
    if m.is_zero() {
        return Err(Error::InvalidParameter("M must be at least 1".into()));
    }
    let delta = xu_delta_star(psi_star, k);
    let arg = bc(2) * m * delta0_star.eval_u64(k) * succ(k) - 1u32;
    Ok(theta.eval(&arg).max(delta) + 1u32)
}

/// ψ(k) = max{σ₄(6b(ℓ+1)(k+1)−1), σ₃(6b(k+1)−1)} for the summable-error
/// convergence rate of ‖xₙ−zₙ‖.
pub fn theta_v1_psi(pack: &ModuliPack, k: u64) -> Result<BigCount> {
    let s3 = ModuliPack::require(&pack.sigma3, "sigma3")?;
    let s4 = ModuliPack::require(&pack.sigma4, "sigma4")?;
    let six_b = bc(6) * &pack.b;
    let arg4 = &six_b * (&pack.ell + 1u32) * succ(k) - 1u32;
    let arg3 = six_b * succ(k) - 1u32;
    Ok(s4.eval(&arg4).max(s3.eval(&arg3)))
}

/// δ(k) = max{ψ(3k+2), σ₅(3k+2)+1}.
pub fn theta_v1_delta(pack: &ModuliPack, k: u64) -> Result<BigCount> {
    let s5 = ModuliPack::require(&pack.sigma5, "sigma5")?;
    let i = index(k, 3, 2);
    Ok(theta_v1_psi(pack, i)?.max(s5.eval_u64(i) + 1u32))
}

/// Rate of convergence of ‖xₙ−zₙ‖ → 0 in the summable-error regime:
/// Θ(k) = σ₁(δ(k) + ⌈ln(3(D+5b)(k+1))⌉) + 1, or
/// Θ̃(k) = max{σ₂(3(D+5b)δ₀(k)(k+1)−1), δ(k)} + 1.
pub fn theta_v1(pack: &ModuliPack, k: u64, branch: Branch) -> Result<BigCount> {
    let d = ModuliPack::require_count(&pack.d_sum, "D")?;
    if d.is_zero() {
        return Err(Error::InvalidParameter("D must be at least 1".into()));
    }
    let m = d + bc(5) * &pack.b;
    let delta = theta_v1_delta(pack, k)?;
    match branch {
        Branch::SumDivergence => {
            let s1 = ModuliPack::require(&pack.sigma1, "sigma1")?;
            let log_term = ceil_ln(&(bc(3) * &m * succ(k)))?;
            Ok(s1.eval(&(delta + log_term)) + 1u32)
        }
        Branch::ProductVanishing => {
            let s2 = ModuliPack::require(&pack.sigma2, "sigma2")?;
            let d0 = ModuliPack::require(&pack.delta0, "delta0")?;
            let arg = bc(3) * &m * d0.eval_u64(k) * succ(k) - 1u32;
            Ok(s2.eval(&arg).max(delta) + 1u32)
        }
    }
}

/// ψ*(k) = max{σ₄(9b(ℓ+1)(k+1)−1), σ₃(9b(k+1)−1), σ₆(3k+2)} for the
/// vanishing-ratio error regime.
pub fn theta_v2_psi(pack: &ModuliPack, k: u64) -> Result<BigCount> {
    let s3 = ModuliPack::require(&pack.sigma3, "sigma3")?;
    let s4 = ModuliPack::require(&pack.sigma4, "sigma4")?;
    let s6 = ModuliPack::require(&pack.sigma6, "sigma6")?;
    let nine_b = bc(9) * &pack.b;
    let arg4 = &nine_b * (&pack.ell + 1u32) * succ(k) - 1u32;
    let arg3 = nine_b * succ(k) - 1u32;
    Ok(s4
        .eval(&arg4)
        .max(s3.eval(&arg3))
        .max(s6.eval_u64(index(k, 3, 2))))
}

/// δ*(k) = ψ*(2k+1).
pub fn theta_v2_delta(pack: &ModuliPack, k: u64) -> Result<BigCount> {
    theta_v2_psi(pack, index(k, 2, 1))
}

/// Rate of convergence of ‖xₙ−zₙ‖ → 0 in the vanishing-ratio regime:
/// Θ*(k) = σ₁(δ*(k) + ⌈ln(2(2D*+6b)(k+1))⌉) + 1, or
/// Θ̃*(k) = max{σ₂(2(2D*+6b)δ₀*(k)(k+1)−1), δ*(k)} + 1.
pub fn theta_v2(pack: &ModuliPack, k: u64, branch: Branch) -> Result<BigCount> {
    let dstar = ModuliPack::require_count(&pack.d_ratio, "D*")?;
    if dstar.is_zero() {
        return Err(Error::InvalidParameter("D* must be at least 1".into()));
    }
    let m = bc(2) * dstar + bc(6) * &pack.b;
    let delta = theta_v2_delta(pack, k)?;
    match branch {
        Branch::SumDivergence => {
            let s1 = ModuliPack::require(&pack.sigma1, "sigma1")?;
            let log_term = ceil_ln(&(bc(2) * &m * succ(k)))?;
            Ok(s1.eval(&(delta + log_term)) + 1u32)
        }
        Branch::ProductVanishing => {
            let s2 = ModuliPack::require(&pack.sigma2, "sigma2")?;
            let d0 = ModuliPack::require(&pack.delta0_star, "delta0*")?;
            let arg = bc(2) * &m * d0.eval_u64(k) * succ(k) - 1u32;
            Ok(s2.eval(&arg).max(delta) + 1u32)
        }
    }
}

/// The three asymptotic-regularity rates derived from a rate Λ of
/// ‖xₙ−zₙ‖ → 0: against the limit resolvent, against the per-step family,
/// and against each fixed member (given Mᵢ ≥ |β−βᵢ|).
#[derive(Debug, Clone)]
pub struct AsregRates {
    /// Σ(k) = max{σ₀(6b(k+1)−1), Λ(4k+3)}.
    pub fixed: BigCount,
    /// Σ*(k) = max{σ₄(ℓ), Σ(2k+1)}.
    pub family: BigCount,
    /// Σᵢ(k) = Σ((1+(ℓ+1)Mᵢ)(k+1)−1), one per supplied Mᵢ.
    pub members: Vec<BigCount>,
}

pub fn asreg_rates(
    sigma0: &Counterfunction,
    sigma4: &Counterfunction,
    b: &BigCount,
    ell: &BigCount,
    lambda: impl Fn(u64) -> Result<BigCount>,
    k: u64,
    member_gaps: &[BigCount],
) -> Result<AsregRates> {
    let sigma_at = |k: u64| -> Result<BigCount> {
        let arg0 = bc(6) * b * succ(k) - 1u32;
        Ok(sigma0.eval(&arg0).max(lambda(index(k, 4, 3))?))
    };
    let fixed = sigma_at(k)?;
    let family = sigma4.eval(ell).max(sigma_at(index(k, 2, 1))?);
    let members = member_gaps
        .iter()
        .map(|m_i| {
            let idx = (bc(1) + (ell + 1u32) * m_i) * succ(k) - 1u32;
            let idx = idx.to_u64().ok_or_else(|| Error::BudgetExceeded {
                needed: idx.to_string(),
                budget: u64::MAX,
            })?;
            sigma_at(idx)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AsregRates {
        fixed,
        family,
        members,
    })
}

/// Transport of a metastability rate along a convergent comparison:
/// Γ(k, g) = max{φ(3k+2), Ω(3k+2, ĝ_k)} with
/// ĝ_k(n) = max{φ(3k+2), n} − n + g(max{φ(3k+2), n}).
pub fn gamma_combine(
    omega: impl Fn(u64, &Counterfunction) -> Result<BigCount>,
    phi: &Counterfunction,
    k: u64,
    g: &Counterfunction,
) -> Result<BigCount> {
    let threshold = phi.eval_u64(index(k, 3, 2));
    let g_hat = Counterfunction::clamped_shift(threshold.clone(), g.clone());
    Ok(threshold.max(omega(index(k, 3, 2), &g_hat)?))
}

fn phi_impl(
    pack: &ModuliPack,
    k: u64,
    g: &Counterfunction,
    theta_at: impl Fn(u64) -> Result<BigCount>,
) -> Result<BigCount> {
    let threshold = theta_at(index(k, 3, 2))?;
    let h_k = Counterfunction::clamped_shift(threshold.clone(), g.clone());
    let d = bc(3) * &pack.b;
    let omega = omega_nonincreasing(&d, index(k, 3, 2), &h_k)?;
    Ok(threshold.max(omega))
}

/// Metastability rate for the iterate sequence in the summable-error regime,
/// for nonincreasing (αₙ): Φ(k, g) = max{Θ(3k+2), Ω(3k+2, h_k)} with
/// Ω(k, g) = g̃^(9b²(k+1)²)(0).
pub fn phi_v1(pack: &ModuliPack, k: u64, g: &Counterfunction, branch: Branch) -> Result<BigCount> {
    if !pack.alpha_nonincreasing {
        return Err(Error::InvalidParameter(
            "phi needs nonincreasing alpha; supply a quasi-rate otherwise".into(),
        ));
    }
    phi_impl(pack, k, g, |i| theta_v1(pack, i, branch))
}

/// Same with the vanishing-ratio rate Θ*.
pub fn phi_v2(pack: &ModuliPack, k: u64, g: &Counterfunction, branch: Branch) -> Result<BigCount> {
    if !pack.alpha_nonincreasing {
        return Err(Error::InvalidParameter(
            "phi needs nonincreasing alpha; supply a quasi-rate otherwise".into(),
        ));
    }
    phi_impl(pack, k, g, |i| theta_v2(pack, i, branch))
}

fn phi_quasi_impl(
    pack: &ModuliPack,
    k: u64,
    g: &Counterfunction,
    chi: impl Fn(u64, &Counterfunction) -> Result<BigCount>,
    h: &Counterfunction,
    theta_at: impl Fn(u64) -> Result<BigCount>,
) -> Result<BigCount> {
    let threshold = theta_at(index(k, 3, 2))?;
    let h_k = Counterfunction::clamped_shift(threshold.clone(), g.clone());
    let d = bc(3) * &pack.b;
    let omega = omega_general(chi, h, &d, index(k, 3, 2), &h_k)?;
    Ok(threshold.max(omega))
}

/// Quasi-rate variant of `phi_v1` for schedules whose (αₙ) is not
/// nonincreasing: the approximant rate Ω̃ replaces Ω.
pub fn phi_v1_quasi(
    pack: &ModuliPack,
    k: u64,
    g: &Counterfunction,
    branch: Branch,
    chi: impl Fn(u64, &Counterfunction) -> Result<BigCount>,
    h: &Counterfunction,
) -> Result<BigCount> {
    phi_quasi_impl(pack, k, g, chi, h, |i| theta_v1(pack, i, branch))
}

/// Quasi-rate variant of `phi_v2`.
pub fn phi_v2_quasi(
    pack: &ModuliPack,
    k: u64,
    g: &Counterfunction,
    branch: Branch,
    chi: impl Fn(u64, &Counterfunction) -> Result<BigCount>,
    h: &Counterfunction,
) -> Result<BigCount> {
    phi_quasi_impl(pack, k, g, chi, h, |i| theta_v2(pack, i, branch))
}

/// Constant-window metastability: Δ_L(k) = Θ(3k+2) + 81b²(k+1)²·L, where
/// the provider evaluates the zero-error specialization of Θ or Θ̃.
pub fn delta_l(
    theta_at: impl Fn(u64) -> Result<BigCount>,
    b: &BigCount,
    l: u64,
    k: u64,
) -> Result<BigCount> {
    let r = bc(81) * b * b * succ(k).pow(2);
    Ok(theta_at(index(k, 3, 2))? + r * bc(l))
}

/// A valid reciprocal-product modulus from the schedule itself:
/// δ₀(k) = ⌈1 / Π_{j<δ(k)}(1−αⱼ)⌉, rounded outward.
///
/// The product is taken over the schedule's actual f64 weights, exactly (as
/// rationals) up to 10⁴ factors, and by upward-directed log arithmetic
/// beyond; overestimation is sound because the modulus sits on the small
/// side of an inequality.
pub fn delta0_from_schedule(
    schedule: &ParamSchedule,
    delta: &Counterfunction,
    k: u64,
) -> Result<BigCount> {
    let m = delta.eval_u64(k);
    let m = m
        .to_u64()
        .filter(|v| *v <= ITERATION_BUDGET)
        .ok_or_else(|| Error::BudgetExceeded {
            needed: m.to_string(),
            budget: ITERATION_BUDGET,
        })?;
    if m == 0 {
        // Empty product is 1.
        return Ok(bc(1));
    }

    if m <= EXACT_PRODUCT_CAP {
        let mut prod = BigRational::one();
        for j in 0..m {
            let a = schedule.alpha(j);
            if a >= 1.0 {
                return Err(Error::ProductVanishes { index: j });
            }
            let a = BigRational::from_float(a)
                .ok_or_else(|| Error::InvalidParameter("alpha not finite".into()))?;
            prod *= BigRational::one() - a;
        }
        if prod.is_zero() || prod.is_negative() {
            return Err(Error::ProductVanishes { index: m - 1 });
        }
        // ceil(denom / numer) of the reciprocal.
        let numer = prod.numer().clone();
        let denom = prod.denom().clone();
        let q = (denom + numer.clone() - BigInt::one()) / numer;
        return Ok(q.to_biguint().expect("positive by construction"));
    }

    // Log-space upper bound on -ln(product), with generous slop.
    let mut s = 0.0f64;
    for j in 0..m {
        let a = schedule.alpha(j);
        if a >= 1.0 {
            return Err(Error::ProductVanishes { index: j });
        }
        let term = -(-a).ln_1p();
        if !term.is_finite() {
            return Err(Error::ProductVanishes { index: j });
        }
        s += term;
    }
    let s_up = s * (1.0 + 1e-12) + 1e-9;
    if !s_up.is_finite() {
        return Err(Error::BudgetExceeded {
            needed: "log-space product overflow".into(),
            budget: ITERATION_BUDGET,
        });
    }
    let t = s_up.ceil().max(0.0) as u64 + 1;
    if t > 200_000 {
        return Err(Error::BudgetExceeded {
            needed: format!("exp({t})"),
            budget: 200_000,
        });
    }
    // ceil(E_HIGH^t / 10^(9t)) >= e^t >= 1/product.
    let numer = bc(E_HIGH).pow(t as u32);
    let denom = bc(10).pow(9 * t as u32);
    Ok((numer + &denom - 1u32) / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterateBoundKind {
    /// D bounds the running error sums.
    ErrorSum,
    /// D* bounds ‖eₙ‖/αₙ.
    ErrorRatio,
}

/// Uniform bound on ‖xₙ−p‖ from b and the relevant error cap:
/// b + D, or max{2(b+D*), b}.
pub fn iterate_bound(b: &BigCount, d: &BigCount, kind: IterateBoundKind) -> Result<BigCount> {
    if b.is_zero() || d.is_zero() {
        return Err(Error::InvalidParameter(
            "iterate bounds need b >= 1 and D >= 1".into(),
        ));
    }
    Ok(match kind {
        IterateBoundKind::ErrorSum => b + d,
        IterateBoundKind::ErrorRatio => (bc(2) * (b + d)).max(b.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::showcase;
    use proptest::prelude::*;

    #[test]
    fn ceil_ln_examples() {
        assert_eq!(ceil_ln(&bc(1)).unwrap(), bc(0));
        assert_eq!(ceil_ln(&bc(3)).unwrap(), bc(2));
        assert_eq!(ceil_ln(&bc(1_000_000)).unwrap(), bc(14));
        assert_eq!(ceil_ln(&bc(18)).unwrap(), bc(3));
        assert!(ceil_ln(&bc(0)).is_err());
    }

    #[test]
    fn ceil_ln_is_conservative() {
        // Never below the float ceiling; at most one above.
        for m in 1u64..3000 {
            let t = ceil_ln(&bc(m)).unwrap().to_u64().unwrap();
            let true_ceil = (m as f64).ln().ceil() as u64;
            assert!(t == true_ceil || t == true_ceil + 1, "m={m} t={t}");
            assert!(t >= true_ceil, "m={m} under-approximates");
        }
    }

    #[test]
    fn omega_examples() {
        // g == 0: g̃ fixes 0.
        assert_eq!(
            omega_nonincreasing(&bc(1), 0, &Counterfunction::constant(0)).unwrap(),
            bc(0)
        );
        // g = identity: g̃(0) = 0.
        assert_eq!(
            omega_nonincreasing(&bc(3), 7, &Counterfunction::Identity).unwrap(),
            bc(0)
        );
        // d=2, k=1, g == 5: 16 iterations of n+5.
        assert_eq!(
            omega_nonincreasing(&bc(2), 1, &Counterfunction::constant(5)).unwrap(),
            bc(80)
        );
    }

    #[test]
    fn omega_closed_form_matches_iteration() {
        // A table that happens to be constant forces the iterative path.
        for (d, k, l) in [(1u64, 0u64, 3u64), (2, 2, 7), (3, 1, 11)] {
            let direct =
                omega_nonincreasing(&bc(d), k, &Counterfunction::constant(l)).unwrap();
            let table = Counterfunction::Table {
                values: vec![bc(l)],
                tail: Box::new(Counterfunction::constant(l)),
            };
            let iterated = omega_nonincreasing(&bc(d), k, &table).unwrap();
            assert_eq!(direct, iterated);
        }
    }

    #[test]
    fn omega_shifted_constant_closed_form_matches_iteration() {
        let g = Counterfunction::clamped_shift(bc(13), Counterfunction::constant(4));
        let forced = Counterfunction::clamped_shift(
            bc(13),
            Counterfunction::Table {
                values: vec![bc(4)],
                tail: Box::new(Counterfunction::constant(4)),
            },
        );
        for (d, k) in [(1u64, 0u64), (2, 1), (1, 3)] {
            assert_eq!(
                omega_nonincreasing(&bc(d), k, &g).unwrap(),
                omega_nonincreasing(&bc(d), k, &forced).unwrap()
            );
        }
    }

    #[test]
    fn omega_budget_error_reports_symbolic_count() {
        let g = Counterfunction::poly(&[1, 1]);
        let err = omega_nonincreasing(&bc(10_000), 10_000, &g).unwrap_err();
        match err {
            Error::BudgetExceeded { needed, .. } => {
                assert!(needed.len() > 10, "count should be astronomically large");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn omega_general_examples() {
        let zero = Counterfunction::constant(0);
        // Everything collapses to 0.
        let v = omega_general(|_, _| Ok(bc(0)), &zero, &bc(1), 0, &zero).unwrap();
        assert_eq!(v, bc(0));
        // chi(n, g) = n, h = identity: iterates stay at 0.
        let v = omega_general(
            |n, _| Ok(bc(n)),
            &Counterfunction::Identity,
            &bc(1),
            0,
            &zero,
        )
        .unwrap();
        assert_eq!(v, bc(0));
    }

    #[test]
    fn omega_general_dominates_on_constant_quasi_rate() {
        // With chi ignoring g and a constant-compatible h, the general rate
        // stays finite and comparable; just check it evaluates and is >= 0.
        let g = Counterfunction::constant(2);
        let h = Counterfunction::constant(3);
        let v = omega_general(|_, _| Ok(bc(4)), &h, &bc(1), 1, &g).unwrap();
        assert_eq!(v, bc(4));
    }

    #[test]
    fn xu_delta_examples() {
        let zero = Counterfunction::constant(0);
        assert_eq!(xu_delta(&zero, &zero, 0), bc(1));
        let psi = Counterfunction::poly(&[0, 0, 1]);
        assert_eq!(xu_delta(&psi, &zero, 1), bc(25));
    }

    #[test]
    fn xu_sigma_examples() {
        let zero = Counterfunction::constant(0);
        let theta2n = Counterfunction::affine(2, 0);
        assert_eq!(xu_sigma(&bc(1), &theta2n, &zero, &zero, 0).unwrap(), bc(7));
        assert_eq!(
            xu_sigma(&bc(1), &Counterfunction::Identity, &zero, &zero, 0).unwrap(),
            bc(4)
        );
    }

    #[test]
    fn xu_sigma_tilde_examples() {
        let zero = Counterfunction::constant(0);
        let one = Counterfunction::constant(1);
        assert_eq!(
            xu_sigma_tilde(&bc(1), &Counterfunction::Identity, &zero, &zero, &one, 0).unwrap(),
            bc(3)
        );
        let theta_sq = Counterfunction::poly(&[0, 0, 1]);
        let d0 = Counterfunction::affine(1, 1);
        assert_eq!(
            xu_sigma_tilde(&bc(2), &theta_sq, &zero, &zero, &d0, 1).unwrap(),
            bc(530)
        );
        // Always at least delta(k) + 1.
        assert!(
            xu_sigma_tilde(&bc(5), &zero, &zero, &Counterfunction::constant(9), &one, 2).unwrap()
                >= xu_delta(&zero, &Counterfunction::constant(9), 2) + 1u32
        );
    }

    #[test]
    fn xu_sigma_star_examples() {
        let zero = Counterfunction::constant(0);
        let theta2n = Counterfunction::affine(2, 0);
        assert_eq!(xu_sigma_star(&bc(1), &theta2n, &zero, 0).unwrap(), bc(3));
        let one = Counterfunction::constant(1);
        assert_eq!(
            xu_sigma_star_tilde(&bc(1), &Counterfunction::Identity, &zero, &one, 0).unwrap(),
            bc(2)
        );
        // psi*(n) = n gives delta*(k) = 2k+1.
        assert_eq!(xu_delta_star(&Counterfunction::Identity, 3), bc(7));
    }

    #[test]
    fn theta_v1_reproduces_showcase_closed_forms() {
        for b in [1u64, 2, 3] {
            let pack = showcase::moduli_pack(&bc(b)).unwrap();
            for k in 0..12u64 {
                // psi(k) = (6b(k+1))^4 + 1
                let psi = theta_v1_psi(&pack, k).unwrap();
                let expected = (bc(6) * bc(b) * succ(k)).pow(4) + 1u32;
                assert_eq!(psi, expected, "psi b={b} k={k}");
                // delta(k) = 18^4 b^4 (k+1)^4 + 1
                let delta = theta_v1_delta(&pack, k).unwrap();
                let expected = bc(18).pow(4) * bc(b).pow(4) * succ(k).pow(4) + 1u32;
                assert_eq!(delta, expected, "delta b={b} k={k}");
                // Theta(k) = sigma1(delta + ceil_ln(3(1+5b)(k+1))) + 1
                let theta = theta_v1(&pack, k, Branch::SumDivergence).unwrap();
                let log_term = ceil_ln(&(bc(3) * (bc(1) + bc(5) * bc(b)) * succ(k))).unwrap();
                let expected = (delta + log_term + 1u32).pow(4) + 1u32;
                assert_eq!(theta, expected, "theta b={b} k={k}");
            }
        }
    }

    #[test]
    fn theta_v2_hand_example() {
        // b=1, D*=1, sigma6 == 0: delta*(0) = psi*(1) = 18^4+1 = 104977,
        // ceil_ln(2*8*1) = 3, Theta*(0) = sigma1(104980)+1 = 104981^4+1.
        let pack = showcase::moduli_pack(&bc(1)).unwrap();
        let delta = theta_v2_delta(&pack, 0).unwrap();
        assert_eq!(delta, bc(104_977));
        let theta = theta_v2(&pack, 0, Branch::SumDivergence).unwrap();
        assert_eq!(theta, bc(104_981).pow(4) + 1u32);
    }

    #[test]
    fn theta_v2_psi_closed_form() {
        for b in [1u64, 4] {
            let pack = showcase::moduli_pack(&bc(b)).unwrap();
            for k in 0..8u64 {
                let psi = theta_v2_psi(&pack, k).unwrap();
                let expected = (bc(9) * bc(b) * succ(k)).pow(4) + 1u32;
                assert_eq!(psi, expected);
            }
        }
    }

    #[test]
    fn asreg_rate_examples() {
        let zero = Counterfunction::constant(0);
        let id = Counterfunction::Identity;
        // Degenerate moduli collapse to sigma4(ell).
        let r = asreg_rates(&zero, &id, &bc(1), &bc(7), |_| Ok(bc(0)), 3, &[]).unwrap();
        assert_eq!(r.fixed, bc(0));
        assert_eq!(r.family, bc(7));
        // Member with ell=0, M_i=1, k=0 evaluates Sigma at 1.
        let r = asreg_rates(
            &zero,
            &zero,
            &bc(1),
            &bc(0),
            |k| Ok(bc(100 + k)),
            0,
            &[bc(1)],
        )
        .unwrap();
        assert_eq!(r.members[0], bc(103 + 4));
    }

    #[test]
    fn gamma_combine_examples() {
        let zero = Counterfunction::constant(0);
        // phi == 0 collapses to omega itself.
        let g = Counterfunction::constant(3);
        let v = gamma_combine(
            |k, gg| omega_nonincreasing(&bc(1), k, gg),
            &zero,
            0,
            &g,
        )
        .unwrap();
        assert_eq!(v, omega_nonincreasing(&bc(1), 2, &g).unwrap());
        // phi == 5, g == 0, omega == 0: threshold wins.
        let five = Counterfunction::constant(5);
        let v = gamma_combine(|_, _| Ok(bc(0)), &five, 0, &zero).unwrap();
        assert_eq!(v, bc(5));
        // phi == 5, g == 2, omega from d=1: hand-iterated value 23.
        let v = gamma_combine(
            |k, gg| omega_nonincreasing(&bc(1), k, gg),
            &five,
            0,
            &Counterfunction::constant(2),
        )
        .unwrap();
        assert_eq!(v, bc(23));
    }

    #[test]
    fn phi_examples() {
        let pack = showcase::moduli_pack(&bc(1)).unwrap();
        // g == 0 stalls at the threshold.
        let theta2 = theta_v1(&pack, 2, Branch::SumDivergence).unwrap();
        let phi = phi_v1(&pack, 0, &Counterfunction::constant(0), Branch::SumDivergence).unwrap();
        assert_eq!(phi, theta2);
        // Constant g == L adds 81 b^2 (k+1)^2 L.
        let phi =
            phi_v1(&pack, 0, &Counterfunction::constant(10), Branch::SumDivergence).unwrap();
        assert_eq!(phi, theta2 + bc(810));
        // Monotone in L.
        let phi_small =
            phi_v1(&pack, 1, &Counterfunction::constant(3), Branch::SumDivergence).unwrap();
        let phi_large =
            phi_v1(&pack, 1, &Counterfunction::constant(4), Branch::SumDivergence).unwrap();
        assert!(phi_small < phi_large);
    }

    #[test]
    fn phi_v2_constant_g_closed_form() {
        let pack = showcase::moduli_pack(&bc(1)).unwrap();
        // The threshold index is 3k+2.
        let theta2 = theta_v2(&pack, 2, Branch::SumDivergence).unwrap();
        let phi = phi_v2(&pack, 0, &Counterfunction::constant(0), Branch::SumDivergence).unwrap();
        assert_eq!(phi, theta2);
        let phi =
            phi_v2(&pack, 0, &Counterfunction::constant(7), Branch::SumDivergence).unwrap();
        assert_eq!(phi, theta2 + bc(81 * 7));
    }

    fn tiny_pack() -> ModuliPack {
        // Degenerate moduli keeping all thresholds single-digit.
        let mut pack = ModuliPack::new(bc(1), bc(0), 1.0).unwrap();
        pack.sigma1 = Some(Counterfunction::Identity);
        pack.sigma3 = Some(Counterfunction::constant(0));
        pack.sigma4 = Some(Counterfunction::constant(0));
        pack.sigma5 = Some(Counterfunction::constant(0));
        pack.d_sum = Some(bc(1));
        pack.alpha_nonincreasing = false;
        pack
    }

    #[test]
    fn phi_requires_nonincreasing_alpha() {
        let pack = tiny_pack();
        assert!(
            phi_v1(&pack, 0, &Counterfunction::constant(0), Branch::SumDivergence).is_err()
        );
        // The quasi-rate variant works without monotone weights. With a
        // constant quasi-rate the functional iteration stabilizes fast.
        let v = phi_v1_quasi(
            &pack,
            0,
            &Counterfunction::constant(0),
            Branch::SumDivergence,
            |_, _| Ok(bc(3)),
            &Counterfunction::poly(&[2, 1]),
        )
        .unwrap();
        // Theta(2) = sigma1(delta + ceil_ln(3*6*3)) + 1 = 1 + 4 + 1 = 6, and
        // the quasi-rate contribution is 3, so the threshold wins.
        assert_eq!(v, bc(6));
    }

    #[test]
    fn delta_l_examples() {
        // L = 0 is the bare threshold.
        let v = delta_l(|_| Ok(bc(42)), &bc(1), 0, 5).unwrap();
        assert_eq!(v, bc(42));
        // Theta == 0, b=1, k=0, L=10.
        let v = delta_l(|_| Ok(bc(0)), &bc(1), 10, 0).unwrap();
        assert_eq!(v, bc(810));
    }

    #[test]
    fn delta0_examples() {
        use crate::schedule::{AlphaFamily, BetaFamily, ErrFamily};
        let half = ParamSchedule::new(
            AlphaFamily::Constant { value: 0.5 },
            BetaFamily::Constant { value: 1.0 },
            ErrFamily::Zero,
        )
        .unwrap();
        assert_eq!(
            delta0_from_schedule(&half, &Counterfunction::constant(3), 0).unwrap(),
            bc(8)
        );
        assert_eq!(
            delta0_from_schedule(&half, &Counterfunction::constant(0), 0).unwrap(),
            bc(1)
        );
        // alpha_j = 1/(j+2): product (1/2)(2/3) = 1/3.
        let tele = ParamSchedule::new(
            AlphaFamily::Power {
                shift: 2,
                exponent: 1.0,
            },
            BetaFamily::Constant { value: 1.0 },
            ErrFamily::Zero,
        )
        .unwrap();
        assert_eq!(
            delta0_from_schedule(&tele, &Counterfunction::constant(2), 0).unwrap(),
            bc(3)
        );
        // alpha reaching 1 is rejected.
        let ones = ParamSchedule::new(
            AlphaFamily::Constant { value: 1.0 },
            BetaFamily::Constant { value: 1.0 },
            ErrFamily::Zero,
        )
        .unwrap();
        assert!(matches!(
            delta0_from_schedule(&ones, &Counterfunction::constant(2), 0),
            Err(Error::ProductVanishes { .. })
        ));
    }

    #[test]
    fn delta0_log_space_path_is_conservative() {
        use crate::schedule::{AlphaFamily, BetaFamily, ErrFamily};
        let half = ParamSchedule::new(
            AlphaFamily::Constant { value: 0.5 },
            BetaFamily::Constant { value: 1.0 },
            ErrFamily::Zero,
        )
        .unwrap();
        // 20000 halvings: exact is 2^20000; the log-space result must
        // dominate it.
        let v = delta0_from_schedule(&half, &Counterfunction::constant(20_000), 0).unwrap();
        assert!(v >= bc(2).pow(20_000));
    }

    #[test]
    fn iterate_bound_examples() {
        assert_eq!(
            iterate_bound(&bc(1), &bc(1), IterateBoundKind::ErrorSum).unwrap(),
            bc(2)
        );
        assert_eq!(
            iterate_bound(&bc(1), &bc(1), IterateBoundKind::ErrorRatio).unwrap(),
            bc(4)
        );
        assert!(iterate_bound(&bc(1), &bc(0), IterateBoundKind::ErrorSum).is_err());
    }

    // Independent oracles: the same prose formulas coded directly against
    // BigUint, with no shared helpers.
    mod oracle {
        use num_bigint::BigUint;

        pub fn u(n: u64) -> BigUint {
            BigUint::from(n)
        }

        pub fn ceil_ln(m: &BigUint) -> BigUint {
            // Brute scan with both brackets.
            let scan = |num: u64| -> u64 {
                let mut t = 0u64;
                loop {
                    let rhs = BigUint::from(num).pow(t as u32);
                    let lhs = m * BigUint::from(10u64).pow(9 * t as u32);
                    if lhs <= rhs {
                        return t;
                    }
                    t += 1;
                }
            };
            let a = scan(2_718_281_829);
            let b = scan(2_718_281_828);
            if a == b {
                u(a)
            } else {
                u(a + 1)
            }
        }

        pub fn sigma(m: u64, theta: impl Fn(&BigUint) -> BigUint, psi: u64, chi: u64, k: u64) -> BigUint {
            let delta = u(psi).max(u(chi) + 1u32);
            let arg = delta + ceil_ln(&(u(3) * u(m) * u(k + 1)));
            theta(&arg) + 1u32
        }
    }

    proptest! {
        #[test]
        fn xu_sigma_matches_independent_oracle(
            m in 1u64..50,
            psi_val in 0u64..40,
            chi_val in 0u64..40,
            theta_slope in 0u64..10,
            k in 0u64..30,
        ) {
            let psi = Counterfunction::constant(psi_val);
            let chi = Counterfunction::constant(chi_val);
            let theta = Counterfunction::affine(theta_slope, 0);
            let got = xu_sigma(&bc(m), &theta, &psi, &chi, k).unwrap();
            let want = oracle::sigma(
                m,
                |x| oracle::u(theta_slope) * x,
                psi_val,
                chi_val,
                k,
            );
            prop_assert_eq!(got, want);
        }

        #[test]
        fn ceil_ln_matches_independent_oracle(m in 1u64..100_000) {
            prop_assert_eq!(ceil_ln(&bc(m)).unwrap(), oracle::ceil_ln(&oracle::u(m)));
        }

        #[test]
        fn rates_monotone_in_k(k in 0u64..20, b in 1u64..4) {
            let pack = showcase::moduli_pack(&bc(b)).unwrap();
            let t0 = theta_v1(&pack, k, Branch::SumDivergence).unwrap();
            let t1 = theta_v1(&pack, k + 1, Branch::SumDivergence).unwrap();
            prop_assert!(t0 <= t1);
            let s0 = theta_v2(&pack, k, Branch::SumDivergence).unwrap();
            let s1 = theta_v2(&pack, k + 1, Branch::SumDivergence).unwrap();
            prop_assert!(s0 <= s1);
        }
    }
}
