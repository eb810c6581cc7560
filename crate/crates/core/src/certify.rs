//! Empirical certification: inequality checks along trajectories, modulus
//! validation against schedules, metastability witness search, rate
//! soundness checks, and the synthetic scalar-recurrence oracle.
//!
//! Checks never claim tightness. A bound larger than the recorded horizon is
//! reported as a vacuous pass with the empirical witness alongside.

use crate::bigcount::BigCount;
use crate::counterfunction::Counterfunction;
use crate::dynamics::{IterationKind, Trajectory};
use crate::error::{Error, Result};
use crate::moduli::{theta_v1_delta, theta_v2_delta, ModuliPack};
use crate::operators::MonotoneOperator;
use crate::point::Point;
use crate::schedule::ParamSchedule;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

/// Pairwise-diameter windows above this size are refused.
pub const DIAMETER_WINDOW_CAP: u64 = 10_000;

/// Absolute-plus-relative tolerance: a violation v at scale s passes when
/// v ≤ atol + rtol·s. Inequalities hold exactly in ℝ; the slack absorbs
/// floating-point noise only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            atol: 1e-12,
            rtol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub paper_anchor: String,
    pub n_range: [u64; 2],
    /// Worst scale-normalized violation observed (0 when every index holds).
    pub max_violation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WitnessKind {
    #[serde(rename = "metastability")]
    Metastability,
    #[serde(rename = "asreg")]
    Asreg,
    #[serde(rename = "convergence")]
    Convergence,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessRecord {
    pub kind: WitnessKind,
    pub k: u64,
    /// Counterfunction descriptor, empty for plain convergence witnesses.
    pub g: String,
    pub empirical_n: Option<u64>,
    /// Decimal rendering of the computed bound.
    pub bound: String,
    pub bound_exceeds_budget: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertReport {
    pub instance: String,
    pub config_hash: Option<String>,
    pub checks: Vec<CheckResult>,
    pub witnesses: Vec<WitnessRecord>,
}

impl CertReport {
    pub fn new(instance: impl Into<String>) -> Self {
        Self {
            instance: instance.into(),
            config_hash: None,
            checks: Vec::new(),
            witnesses: Vec::new(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failing(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn merge(&mut self, other: CertReport) {
        self.checks.extend(other.checks);
        self.witnesses.extend(other.witnesses);
    }

    /// Prefixes check names, e.g. to distinguish a perturbed companion run.
    pub fn tag_checks(&mut self, tag: &str) {
        for c in &mut self.checks {
            c.name = format!("{}/{tag}", c.name);
        }
    }
}

/// Streaming worst-case tracker for one inequality lhs ≤ rhs.
struct IneqTracker<'a> {
    name: &'static str,
    anchor: &'static str,
    tol: &'a Tolerance,
    max_violation: f64,
    pass: bool,
    n_lo: u64,
    n_hi: u64,
}

impl<'a> IneqTracker<'a> {
    fn new(name: &'static str, anchor: &'static str, tol: &'a Tolerance) -> Self {
        Self {
            name,
            anchor,
            tol,
            max_violation: 0.0,
            pass: true,
            n_lo: u64::MAX,
            n_hi: 0,
        }
    }

    /// Record lhs ≤ rhs at index n, with `extra_slack` for known evaluation
    /// error in lhs/rhs themselves (e.g. approximant solver error).
    fn observe(&mut self, n: u64, lhs: f64, rhs: f64, extra_slack: f64) {
        self.n_lo = self.n_lo.min(n);
        self.n_hi = self.n_hi.max(n);
        let scale = lhs.abs().max(rhs.abs());
        let raw = lhs - rhs;
        let rel = raw / scale.max(1.0);
        if rel > self.max_violation {
            self.max_violation = rel;
        }
        if !(raw <= self.tol.atol + self.tol.rtol * scale + extra_slack) {
            self.pass = false;
        }
    }

    fn finish(self) -> CheckResult {
        let (lo, hi) = if self.n_lo == u64::MAX {
            (0, 0)
        } else {
            (self.n_lo, self.n_hi)
        };
        CheckResult {
            name: self.name.into(),
            paper_anchor: self.anchor.into(),
            n_range: [lo, hi],
            max_violation: self.max_violation.max(0.0),
            pass: self.pass,
        }
    }
}

/// Checks every bound inequality along an anchored proximal trajectory and,
/// when present, its approximant path: the per-step contraction bound, the
/// error-sum prefix bound, the uniform iterate bounds, the three approximant
/// distance bounds, and the two joint step recurrences.
pub fn check_lemma_inequalities(
    traj: &Trajectory,
    zpath: Option<&Trajectory>,
    op: &MonotoneOperator,
    u: &Point,
    tol: &Tolerance,
) -> Result<CertReport> {
    if traj.kind != IterationKind::Hppa {
        return Err(Error::TrajectoryMismatch(
            "lemma checks apply to anchored proximal trajectories".into(),
        ));
    }
    let n_points = traj.len();
    if n_points == 0 {
        return Err(Error::TrajectoryMismatch("empty trajectory".into()));
    }
    if let Some(z) = zpath {
        if z.kind != IterationKind::BrowderPath {
            return Err(Error::TrajectoryMismatch(
                "comparison path must be an approximant path".into(),
            ));
        }
        if z.len() != n_points {
            return Err(Error::TrajectoryMismatch(format!(
                "lengths differ: {} vs {}",
                n_points,
                z.len()
            )));
        }
        if z.alphas != traj.alphas {
            return Err(Error::TrajectoryMismatch(
                "anchor weights differ between trajectory and path".into(),
            ));
        }
    }

    let p = op.project_zero_set(u)?;
    let dup = u.dist(&p);
    let dxp: Vec<f64> = traj.points.iter().map(|x| x.dist(&p)).collect();
    let steps = n_points - 1;

    let mut report = CertReport::new(format!(
        "{} | {}",
        traj.operator_desc, traj.schedule_desc
    ));

    // x_{n+1} bound: ||x_{n+1}-p|| <= a_n||u-p|| + (1-a_n)||x_n-p|| + ||e_n||.
    let mut step_bound = IneqTracker::new("step-bound", "iterate.step-contraction", tol);
    for n in 0..steps {
        let a = traj.alphas[n];
        let rhs = a * dup + (1.0 - a) * dxp[n] + traj.err_norms[n];
        step_bound.observe(n as u64, dxp[n + 1], rhs, 0.0);
    }
    report.checks.push(step_bound.finish());

    // Prefix bound: ||x_n-p|| <= max{||u-p||, ||x_0-p||} + sum_{i<n} ||e_i||.
    let base = dup.max(dxp[0]);
    let mut prefix_bound = IneqTracker::new("prefix-bound", "iterate.error-sum", tol);
    let mut esum = 0.0;
    for n in 0..n_points {
        prefix_bound.observe(n as u64, dxp[n], base + esum, 0.0);
        if n < steps {
            esum += traj.err_norms[n];
        }
    }
    report.checks.push(prefix_bound.finish());

    // Uniform bounds from the two error regimes, instantiated with the
    // trajectory's own error data.
    let total_err: f64 = traj.err_norms[..steps].iter().sum();
    let mut bound_sum = IneqTracker::new("bound-d1", "iterate.uniform-bound-sum", tol);
    let d1 = dup.max(dxp[0]) + total_err;
    for n in 0..n_points {
        bound_sum.observe(n as u64, dxp[n], d1, 0.0);
    }
    report.checks.push(bound_sum.finish());

    let ratio_cap = traj.err_norms[..steps]
        .iter()
        .zip(&traj.alphas)
        .map(|(e, a)| if *e == 0.0 { 0.0 } else { e / a })
        .fold(0.0f64, f64::max);
    let d2 = (2.0 * (dup + ratio_cap)).max(dxp[0]);
    let mut bound_ratio = IneqTracker::new("bound-d2", "iterate.uniform-bound-ratio", tol);
    for n in 0..n_points {
        bound_ratio.observe(n as u64, dxp[n], d2, 0.0);
    }
    report.checks.push(bound_ratio.finish());

    let Some(z) = zpath else {
        return Ok(report);
    };

    let beta = z.betas[0];
    let zero_res = vec![0.0; n_points];
    let res = z
        .solver_residuals
        .as_deref()
        .unwrap_or(&zero_res);
    // ||ẑ_n − z_n|| ≤ residual_n / α_n for the solved path; checks involving
    // z carry that much extra slack per occurrence.
    let zerr: Vec<f64> = res
        .iter()
        .zip(&z.alphas)
        .map(|(r, a)| r / a)
        .collect();

    let dzp: Vec<f64> = z.points.iter().map(|zn| zn.dist(&p)).collect();
    let dzu: Vec<f64> = z.points.iter().map(|zn| zn.dist(u)).collect();
    let mut djzu = Vec::with_capacity(n_points);
    let mut jz = Vec::with_capacity(op.dim());
    for zn in &z.points {
        op.resolvent_into(beta, zn.coords(), &mut jz);
        djzu.push(crate::point::dist_slice(&jz, u.coords()));
    }

    let mut zn_zero = IneqTracker::new("zn-zero-bound", "approximant.zero-distance", tol);
    let mut zn_anchor = IneqTracker::new("zn-anchor-bound", "approximant.anchor-distance", tol);
    let mut zn_image = IneqTracker::new(
        "zn-image-anchor-bound",
        "approximant.image-anchor-distance",
        tol,
    );
    for n in 0..n_points {
        zn_zero.observe(n as u64, dzp[n], 2.0 * dup, zerr[n]);
        zn_anchor.observe(n as u64, dzu[n], 3.0 * dup, zerr[n]);
        zn_image.observe(n as u64, djzu[n], 3.0 * dup, zerr[n]);
    }
    report.checks.push(zn_zero.finish());
    report.checks.push(zn_anchor.finish());
    report.checks.push(zn_image.finish());

    // Joint recurrence:
    // ||x_{n+1}-z_n|| <= (1-a_n)||x_n-z_n|| + a_n(|b-b_n|/b)||u-Jz_n|| + ||e_n||.
    let mut joint = IneqTracker::new("xn-zn-step", "joint.step-recurrence", tol);
    for n in 0..steps {
        let a = traj.alphas[n];
        let ratio = (beta - traj.betas[n]).abs() / beta;
        let lhs = traj.points[n + 1].dist(&z.points[n]);
        let rhs = (1.0 - a) * traj.points[n].dist(&z.points[n])
            + a * ratio * djzu[n]
            + traj.err_norms[n];
        let slack = zerr[n] * (2.0 - a + a * ratio);
        joint.observe(n as u64, lhs, rhs, slack);
    }
    report.checks.push(joint.finish());

    // Approximant step: ||z_n-z_{n+1}|| <= (|a_n-a_{n+1}|/a_n)||u-Jz_{n+1}||.
    let mut zstep = IneqTracker::new("zn-step", "approximant.step-recurrence", tol);
    for n in 0..steps {
        let ratio = (z.alphas[n] - z.alphas[n + 1]).abs() / z.alphas[n];
        let lhs = z.points[n].dist(&z.points[n + 1]);
        let rhs = ratio * djzu[n + 1];
        let slack = zerr[n] + zerr[n + 1] * (1.0 + ratio);
        zstep.observe(n as u64, lhs, rhs, slack);
    }
    report.checks.push(zstep.finish());

    Ok(report)
}

/// Checks each supplied modulus against its defining property on the
/// schedule prefix [0, horizon], plus the side conditions tying β, ℓ, D, D*
/// and the reciprocal-product moduli to the schedule.
pub fn validate_moduli(
    pack: &ModuliPack,
    schedule: &ParamSchedule,
    horizon: u64,
    tol: &Tolerance,
) -> Result<CertReport> {
    if horizon < 1 {
        return Err(Error::InvalidParameter("horizon must be >= 1".into()));
    }
    let h = horizon as usize;
    let alphas: Vec<f64> = (0..=horizon).map(|n| schedule.alpha(n)).collect();
    let betas: Vec<f64> = (0..=horizon).map(|n| schedule.beta(n)).collect();
    let errs: Vec<f64> = (0..=horizon).map(|n| schedule.err_norm(n)).collect();
    let beta = pack.beta_limit;

    // Suffix maxima for the pointwise tail conditions.
    let suffix_max = |vals: &[f64]| -> Vec<f64> {
        let mut out = vals.to_vec();
        for i in (0..out.len().saturating_sub(1)).rev() {
            out[i] = out[i].max(out[i + 1]);
        }
        out
    };
    let alpha_tail = suffix_max(&alphas);
    let dbeta: Vec<f64> = betas.iter().map(|b| (b - beta).abs()).collect();
    let dbeta_tail = suffix_max(&dbeta);
    let ratio3: Vec<f64> = (0..h)
        .map(|n| {
            let num = (alphas[n + 1] - alphas[n]).abs();
            if num == 0.0 {
                0.0
            } else {
                num / (alphas[n] * alphas[n])
            }
        })
        .collect();
    let ratio3_tail = suffix_max(&ratio3);
    let ratio6: Vec<f64> = (0..=h)
        .map(|n| if errs[n] == 0.0 { 0.0 } else { errs[n] / alphas[n] })
        .collect();
    let ratio6_tail = suffix_max(&ratio6);

    let mut alpha_prefix_sum = vec![0.0f64; h + 1];
    let mut acc = 0.0;
    for n in 0..=h {
        acc += alphas[n];
        alpha_prefix_sum[n] = acc;
    }
    // Inclusive and exclusive log-products of (1 - alpha).
    let mut log_prod_incl = vec![f64::NEG_INFINITY; h + 1];
    let mut log_prod_excl = vec![0.0f64; h + 2];
    let mut lacc = 0.0f64;
    for n in 0..=h {
        lacc += (-alphas[n]).ln_1p();
        log_prod_incl[n] = lacc;
        log_prod_excl[n + 1] = lacc;
    }
    let mut err_prefix_incl = vec![0.0f64; h + 1];
    let mut eacc = 0.0;
    for n in 0..=h {
        eacc += errs[n];
        err_prefix_incl[n] = eacc;
    }

    let mut report = CertReport::new(format!("moduli | {}", schedule.describe()));
    let in_horizon = |v: &BigCount| -> Option<usize> {
        v.to_u64().filter(|x| *x <= horizon).map(|x| x as usize)
    };

    // sigma0: alpha_n <= 1/(k+1) for n >= sigma0(k).
    if let Some(s0) = &pack.sigma0 {
        let mut t = IneqTracker::new("sigma0", "moduli.alpha-vanishing-rate", tol);
        for k in 0..=horizon {
            if let Some(s) = in_horizon(&s0.eval_u64(k)) {
                t.observe(k, alpha_tail[s], 1.0 / ((k + 1) as f64), 0.0);
            }
        }
        report.checks.push(t.finish());
    }

    // sigma1: sum_{i<=sigma1(n)} alpha_i >= n.
    if let Some(s1) = &pack.sigma1 {
        let mut t = IneqTracker::new("sigma1", "moduli.alpha-sum-divergence", tol);
        for n in 0..=horizon {
            if let Some(s) = in_horizon(&s1.eval_u64(n)) {
                t.observe(n, n as f64, alpha_prefix_sum[s], 0.0);
            }
        }
        report.checks.push(t.finish());
    }

    // sigma2: prod_{i<=sigma2(k)} (1-alpha_i) <= 1/(k+1).
    if let Some(s2) = &pack.sigma2 {
        let mut t = IneqTracker::new("sigma2", "moduli.alpha-product-vanishing", tol);
        for k in 0..=horizon {
            if let Some(s) = in_horizon(&s2.eval_u64(k)) {
                t.observe(k, log_prod_incl[s].exp(), 1.0 / ((k + 1) as f64), 0.0);
            }
        }
        report.checks.push(t.finish());
    }

    // sigma3: |alpha_{n+1}-alpha_n|/alpha_n^2 <= 1/(k+1) for n >= sigma3(k).
    if let Some(s3) = &pack.sigma3 {
        let mut t = IneqTracker::new("sigma3", "moduli.alpha-ratio-vanishing", tol);
        for k in 0..=horizon {
            if let Some(s) = in_horizon(&s3.eval_u64(k)) {
                if s < h {
                    t.observe(k, ratio3_tail[s], 1.0 / ((k + 1) as f64), 0.0);
                }
            }
        }
        report.checks.push(t.finish());
    }

    // sigma4: |beta_n - beta| <= 1/(k+1) for n >= sigma4(k).
    if let Some(s4) = &pack.sigma4 {
        let mut t = IneqTracker::new("sigma4", "moduli.beta-limit-rate", tol);
        for k in 0..=horizon {
            if let Some(s) = in_horizon(&s4.eval_u64(k)) {
                t.observe(k, dbeta_tail[s], 1.0 / ((k + 1) as f64), 0.0);
            }
        }
        report.checks.push(t.finish());
    }

    // sigma5: Cauchy modulus of the error prefix sums.
    if let Some(s5) = &pack.sigma5 {
        let mut t = IneqTracker::new("sigma5", "moduli.error-sum-cauchy", tol);
        for k in 0..=horizon {
            if let Some(s) = in_horizon(&s5.eval_u64(k)) {
                let tail = err_prefix_incl[h] - err_prefix_incl[s];
                t.observe(k, tail, 1.0 / ((k + 1) as f64), 0.0);
            }
        }
        report.checks.push(t.finish());
    }

    // sigma6: ||e_n||/alpha_n <= 1/(k+1) for n >= sigma6(k).
    if let Some(s6) = &pack.sigma6 {
        let mut t = IneqTracker::new("sigma6", "moduli.error-alpha-ratio", tol);
        for k in 0..=horizon {
            if let Some(s) = in_horizon(&s6.eval_u64(k)) {
                t.observe(k, ratio6_tail[s], 1.0 / ((k + 1) as f64), 0.0);
            }
        }
        report.checks.push(t.finish());
    }

    // Side condition: beta >= 1/(ell+1).
    {
        let mut t = IneqTracker::new("ell-beta-floor", "moduli.beta-lower-bound", tol);
        let ell_f = pack.ell.to_f64().unwrap_or(f64::MAX);
        t.observe(0, 1.0 / (ell_f + 1.0), beta, 0.0);
        report.checks.push(t.finish());
    }

    // Side condition: D >= sum_{i<=sigma5(0)} ||e_i|| + 1.
    if let (Some(s5), Some(d)) = (&pack.sigma5, &pack.d_sum) {
        let mut t = IneqTracker::new("d-error-sum", "moduli.error-sum-cap", tol);
        if let Some(s) = in_horizon(&s5.eval_u64(0)) {
            let d_f = d.to_f64().unwrap_or(f64::MAX);
            t.observe(0, err_prefix_incl[s] + 1.0, d_f, 0.0);
        }
        report.checks.push(t.finish());
    }

    // Side condition: D* >= max_{i<=sigma6(0)} max{||e_i||/alpha_i, 1}.
    if let (Some(s6), Some(dstar)) = (&pack.sigma6, &pack.d_ratio) {
        let mut t = IneqTracker::new("dstar-error-ratio", "moduli.error-ratio-cap", tol);
        if let Some(s) = in_horizon(&s6.eval_u64(0)) {
            let cap = ratio6[..=s].iter().fold(1.0f64, |m, r| m.max(*r));
            let d_f = dstar.to_f64().unwrap_or(f64::MAX);
            t.observe(0, cap, d_f, 0.0);
        }
        report.checks.push(t.finish());
    }

    // Claimed monotonicity of the anchor weights.
    if pack.alpha_nonincreasing {
        let mut t = IneqTracker::new("alpha-noninc", "moduli.alpha-nonincreasing", tol);
        for n in 0..h {
            t.observe(n as u64, alphas[n + 1], alphas[n], 0.0);
        }
        report.checks.push(t.finish());
    }

    // Reciprocal-product moduli: 1/delta0(k) <= prod_{j<delta(k)}(1-alpha_j).
    if pack.delta0.is_some() {
        let d0 = pack.delta0.as_ref().unwrap();
        let mut t = IneqTracker::new("delta0", "moduli.product-reciprocal", tol);
        for k in 0..=horizon {
            let Ok(dk) = theta_v1_delta(pack, k) else {
                break;
            };
            let Some(dk) = in_horizon(&dk) else { continue };
            let prod = log_prod_excl[dk].exp();
            let inv = 1.0 / d0.eval_u64(k).to_f64().unwrap_or(f64::MAX);
            t.observe(k, inv, prod, 0.0);
        }
        report.checks.push(t.finish());
    }
    if pack.delta0_star.is_some() {
        let d0 = pack.delta0_star.as_ref().unwrap();
        let mut t = IneqTracker::new("delta0-star", "moduli.product-reciprocal-star", tol);
        for k in 0..=horizon {
            let Ok(dk) = theta_v2_delta(pack, k) else {
                break;
            };
            let Some(dk) = in_horizon(&dk) else { continue };
            let prod = log_prod_excl[dk].exp();
            let inv = 1.0 / d0.eval_u64(k).to_f64().unwrap_or(f64::MAX);
            t.observe(k, inv, prod, 0.0);
        }
        report.checks.push(t.finish());
    }

    Ok(report)
}

/// Checks b ≥ max{‖x₀−p‖, ‖u−p‖} against the instance.
pub fn check_instance_radius(
    b: &BigCount,
    op: &MonotoneOperator,
    u: &Point,
    x0: &Point,
    tol: &Tolerance,
) -> Result<CheckResult> {
    let p = op.project_zero_set(u)?;
    let need = u.dist(&p).max(x0.dist(&p));
    let mut t = IneqTracker::new("b-bound", "moduli.instance-radius", tol);
    t.observe(0, need, b.to_f64().unwrap_or(f64::MAX), 0.0);
    Ok(t.finish())
}

/// Least N ≤ budget with max pairwise distance over [N, N+g(N)] within
/// 1/(k+1); `Ok(None)` when no such N exists up to the budget, an error when
/// the window leaves the recorded range before a witness is found.
pub fn empirical_metastability_witness(
    values: &[Point],
    k: u64,
    g: &Counterfunction,
    budget: u64,
) -> Result<Option<u64>> {
    if (values.len() as u64) < budget {
        return Err(Error::InvalidParameter(format!(
            "need at least {budget} recorded points, have {}",
            values.len()
        )));
    }
    let threshold = 1.0 / ((k + 1) as f64);
    for n in 0..=budget {
        let window = g.eval_u64(n);
        let window = window.to_u64().ok_or(Error::WindowCapExceeded {
            n,
            window: u64::MAX,
            cap: DIAMETER_WINDOW_CAP,
        })?;
        if window > DIAMETER_WINDOW_CAP {
            return Err(Error::WindowCapExceeded {
                n,
                window,
                cap: DIAMETER_WINDOW_CAP,
            });
        }
        let end = n + window;
        if end >= values.len() as u64 {
            return Err(Error::WindowExceedsTrajectory {
                n,
                end,
                len: values.len(),
            });
        }
        if window_diameter_at_most(&values[n as usize..=end as usize], threshold) {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

/// Diameters do not decompose over sliding windows, so pairs are checked
/// directly; distant pairs are tried first since they reject fastest on a
/// convergent trajectory.
fn window_diameter_at_most(window: &[Point], threshold: f64) -> bool {
    let m = window.len();
    for span in (1..m).rev() {
        for i in 0..(m - span) {
            if window[i].dist(&window[i + span]) > threshold {
                return false;
            }
        }
    }
    true
}

/// Least n₀ with |aₘ − target| ≤ 1/(k+1) for every recorded m ≥ n₀.
pub fn empirical_convergence_witness(values: &[f64], target: f64, k: u64) -> Option<u64> {
    let threshold = 1.0 / ((k + 1) as f64);
    let last_bad = values
        .iter()
        .rposition(|v| (v - target).abs() > threshold);
    match last_bad {
        None => Some(0),
        Some(i) if i + 1 < values.len() => Some((i + 1) as u64),
        Some(_) => None,
    }
}

/// Asserts |aₙ − target| ≤ 1/(k+1) for all recorded n ≥ rate(k), for every
/// k ≤ k_max whose bound fits the budget; bigger bounds are recorded as
/// vacuous passes with the empirical witness alongside.
pub fn check_rate_of_convergence(
    values: &[f64],
    target: f64,
    rate: impl Fn(u64) -> Result<BigCount>,
    kind: WitnessKind,
    name: &'static str,
    k_max: u64,
    budget: u64,
    tol: &Tolerance,
) -> Result<(CheckResult, Vec<WitnessRecord>)> {
    let mut tracker = IneqTracker::new(name, "rates.convergence", tol);
    let mut witnesses = Vec::new();
    for k in 0..=k_max {
        let bound = rate(k)?;
        let empirical = empirical_convergence_witness(values, target, k);
        let within = bound
            .to_u64()
            .filter(|b| *b <= budget && (*b as usize) < values.len());
        match within {
            Some(b) => {
                let threshold = 1.0 / ((k + 1) as f64);
                for (n, v) in values.iter().enumerate().skip(b as usize) {
                    tracker.observe(n as u64, (v - target).abs(), threshold, 0.0);
                }
                witnesses.push(WitnessRecord {
                    kind,
                    k,
                    g: String::new(),
                    empirical_n: empirical,
                    bound: bound.to_string(),
                    bound_exceeds_budget: false,
                });
            }
            None => {
                witnesses.push(WitnessRecord {
                    kind,
                    k,
                    g: String::new(),
                    empirical_n: empirical,
                    bound: bound.to_string(),
                    bound_exceeds_budget: true,
                });
            }
        }
    }
    Ok((tracker.finish(), witnesses))
}

/// Which resolvent the regularity residuals are measured against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResolventTarget {
    /// ‖xₙ − J_{βA}xₙ‖ for the fixed limit β.
    Limit(f64),
    /// ‖xₙ − J_{βₙA}xₙ‖ with the trajectory's own βₙ.
    PerStep,
    /// ‖xₙ − J_{βᵢA}xₙ‖ for one fixed member βᵢ.
    Member(f64),
}

/// Regularity residuals of a trajectory against the chosen resolvent.
pub fn regularity_residuals(
    traj: &Trajectory,
    op: &MonotoneOperator,
    target: ResolventTarget,
) -> Result<Vec<f64>> {
    let mut jx = Vec::with_capacity(op.dim());
    let mut out = Vec::with_capacity(traj.len());
    for (n, x) in traj.points.iter().enumerate() {
        let gamma = match target {
            ResolventTarget::Limit(b) | ResolventTarget::Member(b) => b,
            ResolventTarget::PerStep => traj.betas[n],
        };
        if !(gamma > 0.0) {
            return Err(Error::NonPositive {
                name: "gamma",
                value: gamma,
            });
        }
        op.resolvent_into(gamma, x.coords(), &mut jx);
        out.push(crate::point::dist_slice(x.coords(), jx.as_slice()));
    }
    Ok(out)
}

/// Rate check for ‖xₙ − Jxₙ‖ → 0.
pub fn check_asymptotic_regularity(
    traj: &Trajectory,
    op: &MonotoneOperator,
    target: ResolventTarget,
    rate: impl Fn(u64) -> Result<BigCount>,
    k_max: u64,
    budget: u64,
    tol: &Tolerance,
) -> Result<(CheckResult, Vec<WitnessRecord>)> {
    let residuals = regularity_residuals(traj, op, target)?;
    check_rate_of_convergence(
        &residuals,
        0.0,
        rate,
        WitnessKind::Asreg,
        "asymptotic-regularity",
        k_max,
        budget,
        tol,
    )
}

/// Scalar closed-form sequence families for the synthetic recurrence oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarSeq {
    Constant(f64),
    /// scale/(n+1).
    Harmonic { scale: f64 },
    /// scale·(n+1)^(−exponent).
    PowerDecay { scale: f64, exponent: f64 },
    /// scale·ratioⁿ.
    Geometric { scale: f64, ratio: f64 },
}

impl ScalarSeq {
    pub fn value(&self, n: u64) -> f64 {
        match self {
            Self::Constant(v) => *v,
            Self::Harmonic { scale } => scale / ((n + 1) as f64),
            Self::PowerDecay { scale, exponent } => scale * ((n + 1) as f64).powf(-exponent),
            Self::Geometric { scale, ratio } => scale * ratio.powi(n.min(i32::MAX as u64) as i32),
        }
    }
}

/// Realizes s_{n+1} = (1−aₙ)sₙ + aₙbₙ + cₙ with equality — the worst case
/// admitted by the recurrence — so the scalar rates can be exercised against
/// it directly.
pub fn synthetic_xu_oracle(
    a: &ScalarSeq,
    b: &ScalarSeq,
    c: &ScalarSeq,
    s0: f64,
    n_max: usize,
) -> Result<Vec<f64>> {
    if !(s0 >= 0.0) {
        return Err(Error::InvalidParameter("s0 must be nonnegative".into()));
    }
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(s0);
    let mut s = s0;
    for n in 0..n_max {
        let an = a.value(n as u64);
        if !(0.0..=1.0).contains(&an) {
            return Err(Error::InvalidParameter(format!(
                "a_{n} = {an} outside [0, 1]"
            )));
        }
        let cn = c.value(n as u64);
        if cn < 0.0 {
            return Err(Error::InvalidParameter(format!("c_{n} = {cn} negative")));
        }
        s = (1.0 - an) * s + an * b.value(n as u64) + cn;
        out.push(s);
    }
    Ok(out)
}

/// Perturbs one coordinate of one recorded point; the fault-injection hook.
pub fn perturb_coordinate(traj: &mut Trajectory, index: usize, delta: f64) {
    if let Some(p) = traj.points.get_mut(index) {
        p.coords_mut()[0] += delta;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bigcount::bc;
    use crate::dynamics::{browder_path, run_hppa};
    use crate::schedule::{AlphaFamily, BetaFamily, ErrFamily, ParamSchedule};
    use crate::showcase;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn pts(values: &[f64]) -> Vec<Point> {
        values.iter().map(|&v| Point::scalar(v)).collect()
    }

    #[test]
    fn witness_constant_sequence_is_immediate() {
        let v = pts(&[2.0; 50]);
        for k in [0u64, 3, 9] {
            let n =
                empirical_metastability_witness(&v, k, &Counterfunction::constant(10), 30)
                    .unwrap();
            assert_eq!(n, Some(0));
        }
    }

    #[test]
    fn witness_singleton_windows_are_trivial() {
        let v: Vec<Point> = (0..100).map(|n| Point::scalar(1.0 / (n + 1) as f64)).collect();
        let n = empirical_metastability_witness(&v, 0, &Counterfunction::constant(0), 50)
            .unwrap();
        assert_eq!(n, Some(0));
    }

    #[test]
    fn witness_harmonic_hand_computed() {
        // x_n = 1/(n+1), k=1, g == 10: spread over 11 terms from N is
        // 1/(N+1) - 1/(N+11); N=0 fails (10/11 > 1/2), N=1 works.
        let v: Vec<Point> = (0..200).map(|n| Point::scalar(1.0 / (n + 1) as f64)).collect();
        let n = empirical_metastability_witness(&v, 1, &Counterfunction::constant(10), 100)
            .unwrap();
        assert_eq!(n, Some(1));
    }

    #[test]
    fn witness_window_errors_are_distinct() {
        let v = pts(&[0.0; 20]);
        // Pre-condition failure: budget exceeds the recorded length.
        assert!(matches!(
            empirical_metastability_witness(&v, 0, &Counterfunction::constant(0), 50),
            Err(Error::InvalidParameter(_))
        ));
        // Interval running off the end before finding a witness.
        let diverging: Vec<Point> = (0..20).map(|n| Point::scalar(n as f64)).collect();
        assert!(matches!(
            empirical_metastability_witness(&diverging, 3, &Counterfunction::constant(30), 10),
            Err(Error::WindowExceedsTrajectory { .. })
        ));
    }

    #[test]
    fn convergence_witness_examples() {
        // Threshold 1/2: the first term 1.0 violates, the rest do not.
        let v: Vec<f64> = (0..100).map(|n| 0.5f64.powi(n)).collect();
        assert_eq!(empirical_convergence_witness(&v, 0.0, 1), Some(1));
        let v = vec![5.0; 10];
        assert_eq!(empirical_convergence_witness(&v, 5.0, 100), Some(0));
        let v = vec![1.0; 10];
        assert_eq!(empirical_convergence_witness(&v, 0.0, 1), None);
    }

    #[test]
    fn rate_check_examples() {
        // Constant at target with zero rate: all pass.
        let v = vec![3.0; 64];
        let (check, wits) = check_rate_of_convergence(
            &v,
            3.0,
            |_| Ok(bc(0)),
            WitnessKind::Convergence,
            "rate",
            5,
            63,
            &tol(),
        )
        .unwrap();
        assert!(check.pass);
        assert!(wits.iter().all(|w| !w.bound_exceeds_budget));

        // 2^-n against rate ceil(log2(k+1)) + 1.
        let v: Vec<f64> = (0..64).map(|n| 0.5f64.powi(n)).collect();
        let (check, _) = check_rate_of_convergence(
            &v,
            0.0,
            |k| Ok(bc(((k + 1) as f64).log2().ceil() as u64 + 1)),
            WitnessKind::Convergence,
            "rate",
            20,
            63,
            &tol(),
        )
        .unwrap();
        assert!(check.pass);

        // 1/(n+1) against the wrong rate k-1 fails.
        let v: Vec<f64> = (0..200).map(|n| 1.0 / (n + 1) as f64).collect();
        let (check, _) = check_rate_of_convergence(
            &v,
            0.0,
            |k| Ok(bc(k.saturating_sub(1))),
            WitnessKind::Convergence,
            "rate",
            10,
            199,
            &tol(),
        )
        .unwrap();
        assert!(!check.pass);
    }

    #[test]
    fn rate_check_reports_vacuous_bounds() {
        let v = vec![1.0; 10];
        let (_, wits) = check_rate_of_convergence(
            &v,
            1.0,
            |_| Ok(bc(10).pow(30)),
            WitnessKind::Asreg,
            "rate",
            2,
            9,
            &tol(),
        )
        .unwrap();
        assert!(wits.iter().all(|w| w.bound_exceeds_budget));
        assert!(wits.iter().all(|w| w.empirical_n == Some(0)));
    }

    #[test]
    fn xu_oracle_examples() {
        // Full contraction drops to b_n immediately; with b == 0, to 0.
        let s = synthetic_xu_oracle(
            &ScalarSeq::Constant(1.0),
            &ScalarSeq::Constant(0.0),
            &ScalarSeq::Constant(0.0),
            5.0,
            4,
        )
        .unwrap();
        assert_eq!(s, vec![5.0, 0.0, 0.0, 0.0, 0.0]);
        // Parameter validation.
        assert!(synthetic_xu_oracle(
            &ScalarSeq::Constant(1.5),
            &ScalarSeq::Constant(0.0),
            &ScalarSeq::Constant(0.0),
            1.0,
            2
        )
        .is_err());
    }

    #[test]
    fn xu_finite_product_inequality() {
        // s_{n+m+1} <= prod(1-a_i) s_n + (1-prod)(1/(p+1)) + tail(c), for
        // n >= N where b_n <= 1/(p+1).
        let a = ScalarSeq::Constant(0.5);
        let b = ScalarSeq::Harmonic { scale: 1.0 };
        let c = ScalarSeq::Geometric {
            scale: 1.0,
            ratio: 0.5,
        };
        let s = synthetic_xu_oracle(&a, &b, &c, 1.0, 400).unwrap();
        for p in [0u64, 2, 5] {
            let n0 = p as usize; // b_n = 1/(n+1) <= 1/(p+1) from n = p
            for n in [n0, n0 + 3, n0 + 10] {
                for m in 0..100usize {
                    let mut prod = 1.0;
                    let mut ctail = 0.0;
                    for i in n..=n + m {
                        prod *= 1.0 - a.value(i as u64);
                        ctail += c.value(i as u64);
                    }
                    let bound =
                        prod * s[n] + (1.0 - prod) / ((p + 1) as f64) + ctail;
                    assert!(
                        s[n + m + 1] <= bound + 1e-12,
                        "p={p} n={n} m={m}"
                    );
                }
            }
        }
    }

    #[test]
    fn lemma_checks_pass_on_small_showcase_instance() {
        let op = MonotoneOperator::quadratic_shift(Point::scalar(0.0));
        let sched = showcase::schedule();
        let u = Point::scalar(1.0);
        let x0 = Point::scalar(1.0);
        let traj = run_hppa(&op, &sched, &u, &x0, 2000).unwrap();
        let z = browder_path(&op, 1.0, &sched, &u, 1e-13, 2000).unwrap();
        let report = check_lemma_inequalities(&traj, Some(&z), &op, &u, &tol()).unwrap();
        assert!(report.all_pass(), "failing: {:?}", report.failing());
        assert_eq!(report.checks.len(), 9);
    }

    #[test]
    fn lemma_checks_detect_injected_faults() {
        let op = MonotoneOperator::quadratic_shift(Point::scalar(0.0));
        let sched = showcase::schedule();
        let u = Point::scalar(1.0);
        let traj = run_hppa(&op, &sched, &u, &u, 500).unwrap();
        let z = browder_path(&op, 1.0, &sched, &u, 1e-13, 500).unwrap();

        // Bumping one iterate by +1 breaks the step and prefix bounds.
        let mut bad = traj.clone();
        perturb_coordinate(&mut bad, 499, 1.0);
        let report = check_lemma_inequalities(&bad, Some(&z), &op, &u, &tol()).unwrap();
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        for name in ["step-bound", "prefix-bound", "bound-d1", "xn-zn-step"] {
            assert!(failed.contains(&name), "{name} not in {failed:?}");
        }

        // A z-point pushed past the distance bounds breaks the z checks.
        let mut badz = z.clone();
        perturb_coordinate(&mut badz, 400, 4.0);
        let report = check_lemma_inequalities(&traj, Some(&badz), &op, &u, &tol()).unwrap();
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        for name in ["zn-zero-bound", "zn-anchor-bound", "zn-step"] {
            assert!(failed.contains(&name), "{name} not in {failed:?}");
        }
    }

    #[test]
    fn validate_moduli_passes_the_showcase_pack() {
        let pack = showcase::moduli_pack(&bc(1)).unwrap();
        let sched = showcase::schedule();
        let report = validate_moduli(&pack, &sched, 3000, &tol()).unwrap();
        assert!(report.all_pass(), "failing: {:?}", report.failing());
    }

    #[test]
    fn validate_moduli_rejects_sigma0_that_is_too_small() {
        let mut pack = showcase::moduli_pack(&bc(1)).unwrap();
        // alpha_0 = 2^(-3/4) > 1/2, so sigma0 == 0 fails at k = 1.
        pack.sigma0 = Some(Counterfunction::constant(0));
        let sched = showcase::schedule();
        let report = validate_moduli(&pack, &sched, 200, &tol()).unwrap();
        let s0 = report
            .checks
            .iter()
            .find(|c| c.name == "sigma0")
            .unwrap();
        assert!(!s0.pass);
    }

    #[test]
    fn validate_moduli_zero_error_moduli_pass_vacuously() {
        let pack = showcase::moduli_pack(&bc(1)).unwrap();
        let sched = showcase::schedule();
        let report = validate_moduli(&pack, &sched, 500, &tol()).unwrap();
        for name in ["sigma5", "sigma6"] {
            let c = report.checks.iter().find(|c| c.name == name).unwrap();
            assert!(c.pass);
            assert_eq!(c.max_violation, 0.0);
        }
    }

    #[test]
    fn validate_moduli_checks_delta0_against_the_product() {
        // Constant alpha = 1/2 with delta(k) small; delta0 from the schedule
        // must validate, a fraudulently small one must not.
        let sched = ParamSchedule::new(
            AlphaFamily::Constant { value: 0.5 },
            BetaFamily::Constant { value: 1.0 },
            ErrFamily::Zero,
        )
        .unwrap();
        let mut pack = ModuliPack::new(bc(1), bc(0), 1.0).unwrap();
        pack.sigma3 = Some(Counterfunction::constant(0));
        pack.sigma4 = Some(Counterfunction::constant(0));
        pack.sigma5 = Some(Counterfunction::constant(0));
        pack.d_sum = Some(bc(1));
        // delta(k) = 1 for this pack, so delta0(k) = 2 works.
        pack.delta0 = Some(Counterfunction::constant(2));
        let report = validate_moduli(&pack, &sched, 100, &tol()).unwrap();
        assert!(report.all_pass(), "failing: {:?}", report.failing());

        pack.delta0 = Some(Counterfunction::constant(1));
        let report = validate_moduli(&pack, &sched, 100, &tol()).unwrap();
        let c = report.checks.iter().find(|c| c.name == "delta0").unwrap();
        assert!(!c.pass);
    }

    #[test]
    fn regularity_residuals_vanish_on_stationary_trajectory() {
        // The origin is exactly representable, so the residuals are exact 0.
        let c = Point::scalar(0.0);
        let op = MonotoneOperator::quadratic_shift(c.clone());
        let sched = showcase::schedule();
        let traj = run_hppa(&op, &sched, &c, &c, 50).unwrap();
        let res = regularity_residuals(&traj, &op, ResolventTarget::Limit(1.0)).unwrap();
        assert!(res.iter().all(|r| *r == 0.0));
        let res = regularity_residuals(&traj, &op, ResolventTarget::PerStep).unwrap();
        assert!(res.iter().all(|r| *r == 0.0));
    }

    #[test]
    fn instance_radius_check() {
        let op = MonotoneOperator::quadratic_shift(Point::scalar(0.0));
        let u = Point::scalar(1.0);
        let ok = check_instance_radius(&bc(1), &op, &u, &u, &tol()).unwrap();
        assert!(ok.pass);
        let too_small =
            check_instance_radius(&bc(1), &op, &Point::scalar(5.0), &u, &tol()).unwrap();
        assert!(!too_small.pass);
    }
}
