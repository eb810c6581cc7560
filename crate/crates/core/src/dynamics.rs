//! Trajectory generation: the proximal point iteration, the Halpern
//! iteration, their anchored proximal combination, and the path of
//! contraction fixed points used as its comparison sequence.

use crate::error::{Error, Result};
use crate::operators::MonotoneOperator;
use crate::point::{dist_slice, Point};
use crate::schedule::ParamSchedule;

/// Dense storage cap for one trajectory (number of steps).
pub const MAX_STEPS: usize = 1_000_000;

/// Below this anchor weight the a-priori contraction count is no longer
/// certifiable within any reasonable budget.
pub const ALPHA_FLOOR: f64 = 1e-9;

/// Default fixed-point residual target for the approximant solver.
pub const DEFAULT_APPROX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationKind {
    Ppa,
    Halpern,
    Hppa,
    BrowderPath,
}

impl IterationKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ppa => "ppa",
            Self::Halpern => "halpern",
            Self::Hppa => "hppa",
            Self::BrowderPath => "browder-path",
        }
    }
}

/// A computed trajectory x₀..x_N together with the schedule scalars that
/// produced each step, so downstream checks can replay the recurrences
/// without re-deriving the schedule.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub kind: IterationKind,
    pub points: Vec<Point>,
    /// αₙ for n = 0..=N (the last entry is informational only).
    pub alphas: Vec<f64>,
    /// βₙ for n = 0..=N.
    pub betas: Vec<f64>,
    /// ‖eₙ‖ for n = 0..=N.
    pub err_norms: Vec<f64>,
    /// The anchor u, when the iteration has one.
    pub anchor: Option<Point>,
    /// Achieved fixed-point residual per point, for approximant paths.
    pub solver_residuals: Option<Vec<f64>>,
    pub operator_desc: String,
    pub schedule_desc: String,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Point::dim)
    }

    /// Distances of every point to `target`.
    pub fn distances_to(&self, target: &Point) -> Vec<f64> {
        self.points.iter().map(|p| p.dist(target)).collect()
    }
}

fn check_steps(n_max: usize) -> Result<()> {
    if n_max > MAX_STEPS {
        return Err(Error::BudgetExceeded {
            needed: n_max.to_string(),
            budget: MAX_STEPS as u64,
        });
    }
    Ok(())
}

fn check_dims(op: &MonotoneOperator, points: &[&Point]) -> Result<()> {
    for p in points {
        if p.dim() != op.dim() {
            return Err(Error::DimensionMismatch {
                expected: op.dim(),
                got: p.dim(),
            });
        }
    }
    Ok(())
}

fn schedule_scalars(schedule: &ParamSchedule, n_max: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let alphas = (0..=n_max as u64).map(|n| schedule.alpha(n)).collect();
    let betas = (0..=n_max as u64).map(|n| schedule.beta(n)).collect();
    let errs = (0..=n_max as u64).map(|n| schedule.err_norm(n)).collect();
    (alphas, betas, errs)
}

fn push_checked(points: &mut Vec<Point>, coords: &[f64], step: usize) -> Result<()> {
    if coords.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFiniteIterate { step });
    }
    points.push(Point::from_vec_unchecked(coords.to_vec()));
    Ok(())
}

/// x_{n+1} = J_{βₙA} xₙ + eₙ.
pub fn run_ppa(
    op: &MonotoneOperator,
    schedule: &ParamSchedule,
    x0: &Point,
    n_max: usize,
) -> Result<Trajectory> {
    check_steps(n_max)?;
    check_dims(op, &[x0])?;
    let d = op.dim();
    let (alphas, betas, err_norms) = schedule_scalars(schedule, n_max);
    let mut points = Vec::with_capacity(n_max + 1);
    points.push(x0.clone());
    let mut cur = x0.coords().to_vec();
    let mut jx = Vec::with_capacity(d);
    for n in 0..n_max {
        op.resolvent_into(betas[n], &cur, &mut jx);
        if !schedule.err_family().is_zero() {
            let e = schedule.err_vector(n as u64, d)?;
            for (j, ei) in jx.iter_mut().zip(&e) {
                *j += ei;
            }
        }
        push_checked(&mut points, &jx, n + 1)?;
        std::mem::swap(&mut cur, &mut jx);
    }
    Ok(Trajectory {
        kind: IterationKind::Ppa,
        points,
        alphas,
        betas,
        err_norms,
        anchor: None,
        solver_residuals: None,
        operator_desc: op.describe(),
        schedule_desc: schedule.describe(),
    })
}

/// x_{n+1} = αₙ u + (1−αₙ) J_{βA} xₙ for a fixed β.
pub fn run_halpern(
    op: &MonotoneOperator,
    beta: f64,
    schedule: &ParamSchedule,
    u: &Point,
    x0: &Point,
    n_max: usize,
) -> Result<Trajectory> {
    check_steps(n_max)?;
    check_dims(op, &[x0, u])?;
    if !(beta > 0.0) {
        return Err(Error::NonPositive {
            name: "beta",
            value: beta,
        });
    }
    let d = op.dim();
    let (alphas, _, err_norms) = schedule_scalars(schedule, n_max);
    let betas = vec![beta; n_max + 1];
    let mut points = Vec::with_capacity(n_max + 1);
    points.push(x0.clone());
    let mut cur = x0.coords().to_vec();
    let mut jx = Vec::with_capacity(d);
    let mut next = vec![0.0; d];
    for n in 0..n_max {
        let a = alphas[n];
        op.resolvent_into(beta, &cur, &mut jx);
        for i in 0..d {
            next[i] = a * u.coords()[i] + (1.0 - a) * jx[i];
        }
        push_checked(&mut points, &next, n + 1)?;
        cur.copy_from_slice(&next);
    }
    Ok(Trajectory {
        kind: IterationKind::Halpern,
        points,
        alphas,
        betas,
        err_norms,
        anchor: Some(u.clone()),
        solver_residuals: None,
        operator_desc: op.describe(),
        schedule_desc: schedule.describe(),
    })
}

/// x_{n+1} = αₙ u + (1−αₙ) J_{βₙA} xₙ + eₙ.
pub fn run_hppa(
    op: &MonotoneOperator,
    schedule: &ParamSchedule,
    u: &Point,
    x0: &Point,
    n_max: usize,
) -> Result<Trajectory> {
    check_steps(n_max)?;
    check_dims(op, &[x0, u])?;
    if !schedule.alpha_family().strictly_positive() {
        return Err(Error::InvalidParameter(
            "the anchored proximal iteration needs alpha in (0, 1]".into(),
        ));
    }
    let d = op.dim();
    let (alphas, betas, err_norms) = schedule_scalars(schedule, n_max);
    let mut points = Vec::with_capacity(n_max + 1);
    points.push(x0.clone());
    let mut cur = x0.coords().to_vec();
    let mut jx = Vec::with_capacity(d);
    let mut next = vec![0.0; d];
    let err_zero = schedule.err_family().is_zero();
    for n in 0..n_max {
        let a = alphas[n];
        op.resolvent_into(betas[n], &cur, &mut jx);
        for i in 0..d {
            next[i] = a * u.coords()[i] + (1.0 - a) * jx[i];
        }
        if !err_zero {
            let e = schedule.err_vector(n as u64, d)?;
            for i in 0..d {
                next[i] += e[i];
            }
        }
        push_checked(&mut points, &next, n + 1)?;
        cur.copy_from_slice(&next);
    }
    Ok(Trajectory {
        kind: IterationKind::Hppa,
        points,
        alphas,
        betas,
        err_norms,
        anchor: Some(u.clone()),
        solver_residuals: None,
        operator_desc: op.describe(),
        schedule_desc: schedule.describe(),
    })
}

struct PicardOutcome {
    z: Vec<f64>,
    residual: f64,
}

/// Picard iteration for the fixed point of S(x) = αu + (1−α)J_{βA}x.
///
/// S contracts with factor (1−α), so the iteration count needed to certify
/// ‖z − S(z)‖ ≤ tol is known a priori from the first step length; the loop
/// additionally exits as soon as the observed residual reaches `tol` or the
/// floating-point floor. The returned residual is exact: it is the distance
/// between the returned point and one more application of S.
fn browder_picard(
    op: &MonotoneOperator,
    beta: f64,
    alpha: f64,
    u: &[f64],
    start: &[f64],
    tol: f64,
) -> Result<PicardOutcome> {
    let d = u.len();
    if alpha == 1.0 {
        return Ok(PicardOutcome {
            z: u.to_vec(),
            residual: 0.0,
        });
    }
    if alpha < ALPHA_FLOOR {
        return Err(Error::BudgetExceeded {
            needed: format!("contraction factor 1-{alpha:e} is below the solver floor"),
            budget: 0,
        });
    }

    let mut w = start.to_vec();
    let mut sw = vec![0.0; d];
    let mut jx = Vec::with_capacity(d);
    let apply = |w: &[f64], sw: &mut [f64], jx: &mut Vec<f64>| {
        op.resolvent_into(beta, w, jx);
        for i in 0..d {
            sw[i] = alpha * u[i] + (1.0 - alpha) * jx[i];
        }
    };

    apply(&w, &mut sw, &mut jx);
    let mut step = dist_slice(&w, &sw);
    if step <= tol {
        return Ok(PicardOutcome {
            z: w,
            residual: step,
        });
    }

    // (1-alpha)^cap * step <= tol*alpha certifies distance-to-fixed-point
    // <= tol, hence also residual <= tol.
    let cap_f = ((tol * alpha / step).ln() / (-alpha).ln_1p()).ceil();
    if !cap_f.is_finite() || cap_f > 1e15 {
        return Err(Error::BudgetExceeded {
            needed: format!("{cap_f:e}"),
            budget: 1_000_000_000_000_000,
        });
    }
    let cap = cap_f.max(0.0) as u64;

    let mut stall = 0u32;
    for _ in 0..cap {
        std::mem::swap(&mut w, &mut sw);
        apply(&w, &mut sw, &mut jx);
        let next_step = dist_slice(&w, &sw);
        if next_step >= step {
            stall += 1;
        } else {
            stall = 0;
        }
        step = next_step;
        if step <= tol {
            return Ok(PicardOutcome {
                z: w,
                residual: step,
            });
        }
        // Bitwise stagnation: the float map has reached its resolution.
        if stall >= 64 {
            break;
        }
    }
    if step <= tol {
        Ok(PicardOutcome {
            z: w,
            residual: step,
        })
    } else {
        Err(Error::BudgetExceeded {
            needed: format!("residual stalled at {step:e} above tol {tol:e}"),
            budget: cap,
        })
    }
}

/// The unique fixed point z of S(x) = αu + (1−α)J_{βA}x, to residual `tol`.
pub fn browder_approximant(
    op: &MonotoneOperator,
    beta: f64,
    alpha: f64,
    u: &Point,
    tol: f64,
) -> Result<Point> {
    if !(tol > 0.0) {
        return Err(Error::NonPositive {
            name: "tol",
            value: tol,
        });
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha {alpha} outside (0, 1]"
        )));
    }
    if !(beta > 0.0) {
        return Err(Error::NonPositive {
            name: "beta",
            value: beta,
        });
    }
    check_dims(op, &[u])?;
    let out = browder_picard(op, beta, alpha, u.coords(), u.coords(), tol)?;
    Ok(Point::from_vec_unchecked(out.z))
}

/// Closed-form approximant for the variants that admit one; used as an
/// oracle against the Picard solver.
pub fn browder_closed_form(
    op: &MonotoneOperator,
    beta: f64,
    alpha: f64,
    u: &Point,
) -> Option<Point> {
    match op {
        MonotoneOperator::QuadraticShift { center } => {
            // z(α+β) = α(1+β)u + (1−α)βc
            let coords = u
                .coords()
                .iter()
                .zip(center.coords())
                .map(|(ui, ci)| (alpha * (1.0 + beta) * ui + (1.0 - alpha) * beta * ci) / (alpha + beta))
                .collect();
            Some(Point::from_vec_unchecked(coords))
        }
        MonotoneOperator::AffinePd(a) => Some(Point::from_vec_unchecked(
            a.browder_closed_form(beta, alpha, u.coords()),
        )),
        _ => None,
    }
}

/// The path z₀..z_N of approximant fixed points for αₙ from the schedule,
/// warm-starting each solve at the previous point.
pub fn browder_path(
    op: &MonotoneOperator,
    beta: f64,
    schedule: &ParamSchedule,
    u: &Point,
    tol: f64,
    n_max: usize,
) -> Result<Trajectory> {
    check_steps(n_max)?;
    check_dims(op, &[u])?;
    if !(tol > 0.0) {
        return Err(Error::NonPositive {
            name: "tol",
            value: tol,
        });
    }
    if !(beta > 0.0) {
        return Err(Error::NonPositive {
            name: "beta",
            value: beta,
        });
    }
    if !schedule.alpha_family().strictly_positive() {
        return Err(Error::InvalidParameter(
            "approximant paths need alpha in (0, 1]".into(),
        ));
    }
    let (alphas, _, _) = schedule_scalars(schedule, n_max);
    let mut points = Vec::with_capacity(n_max + 1);
    let mut residuals = Vec::with_capacity(n_max + 1);
    let mut warm = u.coords().to_vec();
    for n in 0..=n_max {
        let out = browder_picard(op, beta, alphas[n], u.coords(), &warm, tol)?;
        if out.z.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteIterate { step: n });
        }
        warm.copy_from_slice(&out.z);
        points.push(Point::from_vec_unchecked(out.z));
        residuals.push(out.residual);
    }
    Ok(Trajectory {
        kind: IterationKind::BrowderPath,
        points,
        betas: vec![beta; n_max + 1],
        err_norms: vec![0.0; n_max + 1],
        alphas,
        anchor: Some(u.clone()),
        solver_residuals: Some(residuals),
        operator_desc: op.describe(),
        schedule_desc: schedule.describe(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{AlphaFamily, BetaFamily, ErrFamily};

    fn op_q0() -> MonotoneOperator {
        MonotoneOperator::quadratic_shift(Point::scalar(0.0))
    }

    fn sched(alpha: AlphaFamily) -> ParamSchedule {
        ParamSchedule::new(alpha, BetaFamily::Constant { value: 1.0 }, ErrFamily::Zero).unwrap()
    }

    fn coords1(traj: &Trajectory) -> Vec<f64> {
        traj.points.iter().map(|p| p.coords()[0]).collect()
    }

    #[test]
    fn ppa_halving_on_quadratic_shift() {
        let s = sched(AlphaFamily::Constant { value: 0.5 });
        let t = run_ppa(&op_q0(), &s, &Point::scalar(8.0), 3).unwrap();
        assert_eq!(coords1(&t), vec![8.0, 4.0, 2.0, 1.0]);
    }

    #[test]
    fn ppa_fixed_at_zero_set() {
        let ops = [
            op_q0(),
            MonotoneOperator::abs_subdiff(1.0, 1).unwrap(),
            MonotoneOperator::normal_cone_box(Point::scalar(-1.0), Point::scalar(1.0)).unwrap(),
        ];
        let s = sched(AlphaFamily::Harmonic);
        for op in ops {
            let x0 = op.project_zero_set(&Point::scalar(0.3)).unwrap();
            let t = run_ppa(&op, &s, &x0, 5).unwrap();
            for p in &t.points {
                assert!(p.dist(&x0) <= 1e-15);
            }
        }
    }

    #[test]
    fn ppa_box_projects_in_one_step() {
        let op =
            MonotoneOperator::normal_cone_box(Point::scalar(-1.0), Point::scalar(1.0)).unwrap();
        let s = sched(AlphaFamily::Harmonic);
        let t = run_ppa(&op, &s, &Point::scalar(5.0), 3).unwrap();
        assert_eq!(coords1(&t), vec![5.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn halpern_anchor_dominates_at_alpha_one() {
        let s = sched(AlphaFamily::Constant { value: 1.0 });
        let t = run_halpern(&op_q0(), 1.0, &s, &Point::scalar(3.0), &Point::scalar(9.0), 4)
            .unwrap();
        assert_eq!(coords1(&t), vec![9.0, 3.0, 3.0, 3.0, 3.0]);
    }

    #[test]
    fn halpern_alpha_zero_is_picard() {
        let s = sched(AlphaFamily::Constant { value: 0.0 });
        let t = run_halpern(&op_q0(), 1.0, &s, &Point::scalar(0.0), &Point::scalar(1.0), 3)
            .unwrap();
        assert_eq!(coords1(&t), vec![1.0, 0.5, 0.25, 0.125]);
    }

    #[test]
    fn halpern_stationary_at_zero() {
        let s = sched(AlphaFamily::Harmonic);
        let p = Point::scalar(0.0);
        let t = run_halpern(&op_q0(), 1.0, &s, &p, &p, 3).unwrap();
        assert_eq!(coords1(&t), vec![0.0; 4]);
    }

    #[test]
    fn hppa_examples() {
        // Stationary when x0 = u = c.
        let c = Point::scalar(2.5);
        let op = MonotoneOperator::quadratic_shift(c.clone());
        let s = sched(AlphaFamily::Harmonic);
        let t = run_hppa(&op, &s, &c, &c, 4).unwrap();
        assert_eq!(coords1(&t), vec![2.5; 5]);

        // alpha = 1/2, beta = 1, u = 0: x_{n+1} = x_n / 4.
        let s = sched(AlphaFamily::Constant { value: 0.5 });
        let t = run_hppa(&op_q0(), &s, &Point::scalar(0.0), &Point::scalar(1.0), 2).unwrap();
        assert_eq!(coords1(&t), vec![1.0, 0.25, 0.0625]);
    }

    #[test]
    fn hppa_rejects_zero_alpha() {
        let s = sched(AlphaFamily::Constant { value: 0.0 });
        assert!(run_hppa(&op_q0(), &s, &Point::scalar(0.0), &Point::scalar(1.0), 2).is_err());
    }

    #[test]
    fn browder_alpha_one_returns_anchor() {
        let z = browder_approximant(&op_q0(), 1.0, 1.0, &Point::scalar(7.0), 1e-12).unwrap();
        assert_eq!(z.coords(), &[7.0]);
    }

    #[test]
    fn browder_quadratic_closed_form() {
        let u = Point::scalar(1.0);
        let z = browder_approximant(&op_q0(), 1.0, 0.5, &u, 1e-14).unwrap();
        assert!((z.coords()[0] - 2.0 / 3.0).abs() <= 1e-12);
        let cf = browder_closed_form(&op_q0(), 1.0, 0.5, &u).unwrap();
        assert!((cf.coords()[0] - 2.0 / 3.0).abs() <= 1e-15);
    }

    #[test]
    fn browder_fixed_at_zero() {
        for op in [
            op_q0(),
            MonotoneOperator::normal_cone_ball(Point::scalar(0.25), 1.0).unwrap(),
        ] {
            let p = op.project_zero_set(&Point::scalar(0.25)).unwrap();
            let z = browder_approximant(&op, 2.0, 0.125, &p, 1e-12).unwrap();
            assert!(z.dist(&p) <= 1e-12);
        }
    }

    #[test]
    fn browder_path_matches_closed_form_and_zero_bound() {
        let s = ParamSchedule::new(
            AlphaFamily::Power {
                shift: 2,
                exponent: 0.75,
            },
            BetaFamily::Constant { value: 1.0 },
            ErrFamily::Zero,
        )
        .unwrap();
        let u = Point::scalar(1.0);
        let tol = 1e-13;
        let path = browder_path(&op_q0(), 1.0, &s, &u, tol, 200).unwrap();
        let p = Point::scalar(0.0);
        let dup = u.dist(&p);
        for (n, z) in path.points.iter().enumerate() {
            let cf = browder_closed_form(&op_q0(), 1.0, s.alpha(n as u64), &u).unwrap();
            assert!(z.dist(&cf) <= 10.0 * tol, "n={n}");
            assert!(z.dist(&p) <= 2.0 * dup + 1e-12);
        }
        let res = path.solver_residuals.as_ref().unwrap();
        assert!(res.iter().all(|r| *r <= tol));
    }

    #[test]
    fn browder_path_constant_alpha_one() {
        let s = sched(AlphaFamily::Constant { value: 1.0 });
        let u = Point::scalar(4.0);
        let path = browder_path(&op_q0(), 1.0, &s, &u, 1e-12, 5).unwrap();
        for z in &path.points {
            assert_eq!(z.coords(), &[4.0]);
        }
    }

    #[test]
    fn browder_harmonic_alpha_closed_form_identity() {
        // alpha_n = 1/(n+2) on the unit quadratic shift: z_n = 2a/(1+a).
        let s = ParamSchedule::new(
            AlphaFamily::Power {
                shift: 2,
                exponent: 1.0,
            },
            BetaFamily::Constant { value: 1.0 },
            ErrFamily::Zero,
        )
        .unwrap();
        let u = Point::scalar(1.0);
        let path = browder_path(&op_q0(), 1.0, &s, &u, 1e-13, 50).unwrap();
        for (n, z) in path.points.iter().enumerate() {
            let a = 1.0 / ((n + 2) as f64);
            assert!((z.coords()[0] - 2.0 * a / (1.0 + a)).abs() <= 1e-11, "n={n}");
        }
    }

    #[test]
    fn nonfinite_iterate_is_reported_with_step() {
        // A huge constant error direction cannot overflow by itself, so force
        // the issue with an enormous scale.
        let s = ParamSchedule::new(
            AlphaFamily::Constant { value: 0.5 },
            BetaFamily::Constant { value: 1.0 },
            ErrFamily::Geometric {
                scale: 1e308,
                ratio: 0.9,
                dir: crate::schedule::ErrDirection::Fixed(Point::scalar(1.0)),
            },
        )
        .unwrap();
        let err = run_hppa(&op_q0(), &s, &Point::scalar(1.7e308), &Point::scalar(1.0), 10)
            .unwrap_err();
        match err {
            Error::NonFiniteIterate { step } => assert!(step >= 1),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
