//! Command implementations and atomic output writing.

use std::fs;
use std::path::{Path, PathBuf};

use hppa_core::certify::{
    check_instance_radius, check_lemma_inequalities, empirical_metastability_witness,
    perturb_coordinate, validate_moduli, CertReport, ResolventTarget, WitnessKind, WitnessRecord,
};
use hppa_core::dynamics::{browder_path, run_halpern, run_hppa, run_ppa, Trajectory};
use hppa_core::export;
use hppa_core::moduli::{asreg_rates, phi_v1, theta_v1, theta_v2, Branch};
use hppa_core::showcase::{self, RateRow, ShowcaseOptions};
use hppa_core::{bc, Counterfunction, Error as CoreError};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::{CliError, CommonArgs};

/// Default residual target for approximant path solves.
const APPROX_TOL: f64 = 1e-13;

pub struct Outcome {
    /// Files written, for logging.
    pub files: Vec<PathBuf>,
    /// Whether every non-vacuous check passed.
    pub pass: bool,
}

pub struct Context {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub out_dir: PathBuf,
    pub budget: usize,
    pub k_max: u64,
    pub fault_inject: bool,
}

impl Context {
    pub fn load(args: &CommonArgs) -> Result<Self, CliError> {
        let text = fs::read_to_string(&args.config)
            .map_err(|e| CliError::Config(format!("cannot read config: {e}")))?;
        let mut config = ExperimentConfig::parse(&text)?;
        if let Some(seed) = args.seed {
            config.seed = Some(seed);
        }
        config.validate()?;
        let config_hash = {
            let mut h = Sha256::new();
            h.update(text.as_bytes());
            let digest = h.finalize();
            digest.iter().map(|b| format!("{b:02x}")).collect()
        };
        let out_dir = args
            .out
            .clone()
            .or_else(|| config.out_dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        let budget = args.budget.unwrap_or(config.budget);
        let k_max = args.kmax.unwrap_or(config.k_max);
        Ok(Self {
            config,
            config_hash,
            out_dir,
            budget,
            k_max,
            fault_inject: args.fault_inject,
        })
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(name);
        write_atomic(&path, contents)?;
        Ok(path)
    }

    fn write_report(&self, report: &mut CertReport) -> Result<PathBuf, CliError> {
        report.config_hash = Some(self.config_hash.clone());
        let mut json = serde_json::to_string_pretty(report)?;
        json.push('\n');
        self.write("report.json", &json)
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn generate(ctx: &Context) -> Result<Trajectory, CliError> {
    let op = ctx.config.operator()?;
    let schedule = ctx.config.schedule(op.dim())?;
    let x0 = ctx.config.start()?;
    let beta_fixed = ctx
        .config
        .beta_fixed
        .unwrap_or_else(|| schedule.beta_limit());
    let approx_tol = ctx.config.approximant_tol.unwrap_or(APPROX_TOL);
    let traj = match ctx.config.algorithm.as_str() {
        "ppa" => run_ppa(&op, &schedule, &x0, ctx.budget)?,
        "halpern" => run_halpern(
            &op,
            beta_fixed,
            &schedule,
            &ctx.config.anchor()?,
            &x0,
            ctx.budget,
        )?,
        "hppa" => run_hppa(&op, &schedule, &ctx.config.anchor()?, &x0, ctx.budget)?,
        "browder" => browder_path(
            &op,
            beta_fixed,
            &schedule,
            &ctx.config.anchor()?,
            approx_tol,
            ctx.budget,
        )?,
        other => return Err(CliError::Config(format!("unknown algorithm `{other}`"))),
    };
    Ok(traj)
}

/// `iterate`: run the configured iteration, write the trajectory CSV.
pub fn cmd_iterate(ctx: &Context) -> Result<Outcome, CliError> {
    let traj = generate(ctx)?;
    let path = ctx.write("trajectory.csv", &export::trajectory_csv(&traj))?;
    Ok(Outcome {
        files: vec![path],
        pass: true,
    })
}

/// `rates`: evaluate every rate the supplied moduli admit, write the table.
pub fn cmd_rates(ctx: &Context) -> Result<Outcome, CliError> {
    let g_list = ctx.config.g_list()?;
    let mut rows: Vec<RateRow> = Vec::new();

    if ctx.config.moduli_preset.as_deref() == Some("example5") {
        // The packaged instance: closed-form table driven by b alone.
        let op = ctx.config.operator()?;
        let u = ctx.config.anchor()?;
        let x0 = ctx.config.start()?;
        let p = op.project_zero_set(&u)?;
        let radius = u.dist(&p).max(x0.dist(&p));
        let b = bc((radius.ceil() as u64).max(1));
        for k in 0..=ctx.k_max {
            rows.push(RateRow {
                rate: "theta0".into(),
                k,
                arg: String::new(),
                value: showcase::theta0(&b, k)?,
            });
            let bars = showcase::sigma_bars(&b, k)?;
            rows.push(RateRow {
                rate: "sigma-bar".into(),
                k,
                arg: String::new(),
                value: bars.bar,
            });
            rows.push(RateRow {
                rate: "sigma-bar-star".into(),
                k,
                arg: String::new(),
                value: bars.bar_star,
            });
            for g in &g_list {
                if let Counterfunction::Constant(l) = g {
                    if let Some(l) = num_traits_to_u64(l) {
                        rows.push(RateRow {
                            rate: "delta-bar".into(),
                            k,
                            arg: format!("L={l}"),
                            value: showcase::delta_bar_l(&b, l, k)?,
                        });
                    }
                }
            }
        }
    } else {
        let pack = ctx
            .config
            .moduli_pack()?
            .ok_or_else(|| CliError::Config("rates need `moduli` or `moduli_preset`".into()))?;
        if !g_list.is_empty() && !pack.alpha_nonincreasing {
            return Err(CliError::Core(CoreError::InvalidParameter(
                "metastability rates need nonincreasing alpha (or a quasi-rate, \
                 which the config format does not carry)"
                    .into(),
            )));
        }
        let sum_branch = pack.sigma1.is_some();
        let prod_branch = pack.sigma2.is_some() && pack.delta0.is_some();
        for k in 0..=ctx.k_max {
            if sum_branch {
                if let Ok(v) = theta_v1(&pack, k, Branch::SumDivergence) {
                    rows.push(RateRow {
                        rate: "theta".into(),
                        k,
                        arg: String::new(),
                        value: v,
                    });
                }
                if let Ok(v) = theta_v2(&pack, k, Branch::SumDivergence) {
                    rows.push(RateRow {
                        rate: "theta-star".into(),
                        k,
                        arg: String::new(),
                        value: v,
                    });
                }
            }
            if prod_branch {
                if let Ok(v) = theta_v1(&pack, k, Branch::ProductVanishing) {
                    rows.push(RateRow {
                        rate: "theta-tilde".into(),
                        k,
                        arg: String::new(),
                        value: v,
                    });
                }
            }
            let branch = if sum_branch {
                Branch::SumDivergence
            } else {
                Branch::ProductVanishing
            };
            if let (Some(s0), Some(s4)) = (&pack.sigma0, &pack.sigma4) {
                if let Ok(r) = asreg_rates(
                    s0,
                    s4,
                    &pack.b,
                    &pack.ell,
                    |i| theta_v1(&pack, i, branch),
                    k,
                    &[],
                ) {
                    rows.push(RateRow {
                        rate: "asreg".into(),
                        k,
                        arg: String::new(),
                        value: r.fixed,
                    });
                    rows.push(RateRow {
                        rate: "asreg-family".into(),
                        k,
                        arg: String::new(),
                        value: r.family,
                    });
                }
            }
            for g in &g_list {
                let v = phi_v1(&pack, k, g, branch)?;
                rows.push(RateRow {
                    rate: "phi".into(),
                    k,
                    arg: g.descriptor(),
                    value: v,
                });
            }
        }
        if rows.is_empty() {
            return Err(CliError::Core(CoreError::MissingModulus {
                name: "sigma1 or sigma2",
            }));
        }
    }

    let path = ctx.write("rates.csv", &export::rates_csv(&rows))?;
    Ok(Outcome {
        files: vec![path],
        pass: true,
    })
}

fn num_traits_to_u64(v: &hppa_core::BigCount) -> Option<u64> {
    use std::convert::TryFrom;
    u64::try_from(v).ok()
}

/// `certify`: lemma checks along the configured run, modulus validation,
/// witness search, report emission. Exit status reflects the checks.
pub fn cmd_certify(ctx: &Context) -> Result<Outcome, CliError> {
    if ctx.config.algorithm != "hppa" {
        // The inequality suite is defined along anchored proximal runs.
        eprintln!(
            "warning: nothing to certify for algorithm `{}`; emitting an empty report",
            ctx.config.algorithm
        );
        let mut report = CertReport::new(format!("{} (no checks)", ctx.config.algorithm));
        let path = ctx.write_report(&mut report)?;
        return Ok(Outcome {
            files: vec![path],
            pass: true,
        });
    }

    let op = ctx.config.operator()?;
    let schedule = ctx.config.schedule(op.dim())?;
    let u = ctx.config.anchor()?;
    let x0 = ctx.config.start()?;
    let tol = ctx.config.tolerance();
    let approx_tol = ctx.config.approximant_tol.unwrap_or(APPROX_TOL);

    let mut traj = run_hppa(&op, &schedule, &u, &x0, ctx.budget)?;
    let zpath = browder_path(
        &op,
        schedule.beta_limit(),
        &schedule,
        &u,
        approx_tol,
        ctx.budget,
    )?;
    if ctx.fault_inject {
        // One late-index corruption; the step bound must catch it.
        let idx = traj.len().saturating_sub(2);
        perturb_coordinate(&mut traj, idx, 1e-3);
    }

    let mut report = check_lemma_inequalities(&traj, Some(&zpath), &op, &u, &tol)?;

    if let Some(pack) = ctx.config.moduli_pack()? {
        let horizon = (ctx.budget as u64).clamp(1, 100_000);
        report.merge(validate_moduli(&pack, &schedule, horizon, &tol)?);
        report
            .checks
            .push(check_instance_radius(&pack.b, &op, &u, &x0, &tol)?);

        // Metastability witnesses, with bounds when the pack supports them.
        let g_list = ctx.config.g_list()?;
        let branch = if pack.sigma1.is_some() {
            Branch::SumDivergence
        } else {
            Branch::ProductVanishing
        };
        for k in 0..=ctx.k_max {
            for g in &g_list {
                let found = match empirical_metastability_witness(
                    &traj.points,
                    k,
                    g,
                    ctx.budget as u64,
                ) {
                    Ok(v) => v,
                    Err(CoreError::WindowExceedsTrajectory { .. })
                    | Err(CoreError::WindowCapExceeded { .. }) => None,
                    Err(e) => return Err(e.into()),
                };
                let bound = pack
                    .alpha_nonincreasing
                    .then(|| phi_v1(&pack, k, g, branch))
                    .transpose()?;
                report.witnesses.push(WitnessRecord {
                    kind: WitnessKind::Metastability,
                    k,
                    g: g.descriptor(),
                    empirical_n: found,
                    bound: bound
                        .as_ref()
                        .map(|b| b.to_string())
                        .unwrap_or_default(),
                    bound_exceeds_budget: bound
                        .map(|b| b > bc(ctx.budget as u64))
                        .unwrap_or(true),
                });
            }
        }
    }

    // Plot-ready residuals against the limit resolvent.
    let residuals = hppa_core::certify::regularity_residuals(
        &traj,
        &op,
        ResolventTarget::Limit(schedule.beta_limit()),
    )?;

    let pass = report.all_pass();
    let mut files = vec![
        ctx.write("trajectory.csv", &export::trajectory_csv(&traj))?,
        ctx.write("residuals.csv", &export::residuals_csv(&residuals))?,
    ];
    files.push(ctx.write_report(&mut report)?);
    Ok(Outcome { files, pass })
}

/// `example5`: the packaged worked instance end to end.
pub fn cmd_example5(ctx: &Context) -> Result<Outcome, CliError> {
    let op = ctx.config.operator()?;
    let u = ctx.config.anchor()?;
    let x0 = ctx.config.start()?;
    let mut opts = ShowcaseOptions {
        rate_k_max: ctx.k_max,
        tol: ctx.config.tolerance(),
        ..ShowcaseOptions::default()
    };
    if let Some(t) = ctx.config.approximant_tol {
        opts.approximant_tol = t;
    }
    if !ctx.config.g.is_empty() {
        opts.g_list = ctx.config.g_list()?;
    }

    let mut run = showcase::run_with(&op, &u, &x0, ctx.budget, &opts)?;

    if ctx.fault_inject {
        let idx = run.trajectory.len().saturating_sub(2);
        let mut corrupted = run.trajectory.clone();
        perturb_coordinate(&mut corrupted, idx, 1e-3);
        let mut faulted =
            check_lemma_inequalities(&corrupted, Some(&run.approximants), &op, &u, &opts.tol)?;
        faulted.tag_checks("fault-injected");
        run.report.merge(faulted);
    }

    let residuals = hppa_core::certify::regularity_residuals(
        &run.trajectory,
        &op,
        ResolventTarget::Limit(1.0),
    )?;

    let pass = run.report.all_pass();
    let mut files = vec![
        ctx.write("trajectory.csv", &export::trajectory_csv(&run.trajectory))?,
        ctx.write("rates.csv", &export::rates_csv(&run.rates))?,
        ctx.write("residuals.csv", &export::residuals_csv(&residuals))?,
    ];
    files.push(ctx.write_report(&mut run.report)?);
    Ok(Outcome { files, pass })
}
