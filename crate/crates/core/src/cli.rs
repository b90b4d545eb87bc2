//! Command-line pipeline: `check`, `sample`, `analyze`, `verify`, `oracle`.
//!
//! Exit codes are a stable contract: 0 success, 1 mathematical failure
//! (condition or bound violation), 2 conditions hold but the coupling sits
//! outside the uniqueness region, 64 malformed configuration or usage, 65
//! corrupt or missing run data.

use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analysis::{
    check_decay_bound, check_moment_bounds, estimate_covariances, fit_decay_rate,
    moment_quadrature_bounds, verify_brascamp_lieb_1d, verify_contraction, verify_lsi_1d,
    AnalysisError, BoundReport, Observable,
};
use crate::config::{displacement_ball, parse_observable, ConfigError, RunConfig};
use crate::lattice::{gaussian_covariance_oracle, uniqueness_threshold, LatticeError, Semimetric};
use crate::potentials::{check_conditions, Displacement};
use crate::report::{sha256_hex, FitOutcome, Report};
use crate::rundir::{self, RunDirError, RunMeta};
use crate::sampler::{model_hash, resume_chain, run_chain};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MATH: i32 = 1;
pub const EXIT_NONUNIQUE: i32 = 2;
pub const EXIT_CONFIG: i32 = 64;
pub const EXIT_DATA: i32 = 65;

#[derive(Parser)]
#[command(
    name = "polygibbs",
    version,
    about = "Simulate and verify lattice Gibbs measures with convex polynomial interactions"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate the potentials and report the uniqueness threshold.
    Check {
        #[arg(long)]
        config: PathBuf,
        /// Report path (default: report.json).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the semimetric weight exponent.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Run the heat-bath chain into a run directory.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overwrite a non-empty output directory.
        #[arg(long)]
        force: bool,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
        /// Total sweep target override (useful with --resume).
        #[arg(long)]
        sweeps: Option<u64>,
    },
    /// Estimate covariances and check the decay and moment bounds of a run.
    Analyze {
        run_dir: PathBuf,
        /// Covariance CSV from `oracle` to compare against (3-sigma,
        /// column-wise).
        #[arg(long)]
        against_oracle: Option<PathBuf>,
        #[arg(long)]
        max_displacement: Option<i64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        observable: Option<String>,
    },
    /// Run the 1-D inequality battery for the configured model.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Report path (default: verify.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact covariances of a quadratic model (dense inverse).
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_displacement: Option<i64>,
    },
}

pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn fail(code: i32, message: impl Display) -> Failure {
    Failure { code, message: message.to_string() }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        fail(EXIT_CONFIG, e)
    }
}

impl From<RunDirError> for Failure {
    fn from(e: RunDirError) -> Self {
        fail(EXIT_DATA, e)
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        fail(EXIT_MATH, e)
    }
}

impl From<LatticeError> for Failure {
    fn from(e: LatticeError) -> Self {
        fail(EXIT_MATH, e)
    }
}

impl From<crate::sampler::SamplerError> for Failure {
    fn from(e: crate::sampler::SamplerError) -> Self {
        fail(EXIT_MATH, e)
    }
}

pub fn run_from_env() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap reports --help/--version through the error path.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_CONFIG,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.cmd {
        Cmd::Check { config, out, alpha } => cmd_check(&config, out.as_deref(), alpha),
        Cmd::Sample { config, out, force, resume, sweeps } => {
            cmd_sample(&config, &out, force, resume, sweeps)
        }
        Cmd::Analyze { run_dir, against_oracle, max_displacement, alpha, observable } => {
            cmd_analyze(
                &run_dir,
                against_oracle.as_deref(),
                max_displacement,
                alpha,
                observable.as_deref(),
            )
        }
        Cmd::Verify { config, out } => cmd_verify(&config, out.as_deref()),
        Cmd::Oracle { config, out, max_displacement } => {
            cmd_oracle(&config, &out, max_displacement)
        }
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn load_config(path: &Path) -> Result<(RunConfig, String), Failure> {
    let (config, bytes) = RunConfig::from_path(path)?;
    Ok((config, sha256_hex(&bytes)))
}

fn metric_of(config: &RunConfig, alpha: Option<f64>) -> Result<Semimetric, Failure> {
    match alpha {
        Some(a) => Semimetric::new(a).map_err(|e| fail(EXIT_CONFIG, e)),
        None => config.metric().map_err(Failure::from),
    }
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

pub fn cmd_check(
    config_path: &Path,
    out: Option<&Path>,
    alpha: Option<f64>,
) -> Result<i32, Failure> {
    let (config, digest) = load_config(config_path)?;
    let out = out.unwrap_or(Path::new("report.json"));
    let metric = metric_of(&config, alpha)?;
    let mut report = Report::new(&digest);

    let candidate = config.model.candidate()?;
    let conditions = check_conditions(&candidate);
    report.conditions = Some(conditions.clone());
    if !conditions.all_ok() {
        rundir::write_json(out, &report)?;
        eprintln!(
            "conditions failed: A = {}, B = {}, C = {}",
            conditions.cond_a_ok, conditions.cond_b_ok, conditions.cond_c_ok
        );
        return Ok(EXIT_MATH);
    }

    let model = candidate.build().map_err(|e| fail(EXIT_MATH, e))?;
    // Surface lattice problems (wrap violations, bad shells) as config
    // errors now rather than at sampling time.
    config.lattice.build(model.r0())?;
    let dobrushin = uniqueness_threshold(&model, &metric)?;
    let unique = dobrushin.unique;
    report.dobrushin = Some(dobrushin);
    rundir::write_json(out, &report)?;
    let dob = report.dobrushin.as_ref().unwrap();
    println!(
        "gamma_d = {:.6}, threshold = {}, lambda = {} -> {}",
        dob.gamma_d,
        dob.threshold.map_or("inf".to_string(), |t| format!("{t:.6}")),
        model.lambda(),
        if unique { "unique" } else { "outside uniqueness region" }
    );
    Ok(if unique { EXIT_OK } else { EXIT_NONUNIQUE })
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

pub fn cmd_sample(
    config_path: &Path,
    out: &Path,
    force: bool,
    resume: bool,
    sweeps_override: Option<u64>,
) -> Result<i32, Failure> {
    let (config, digest) = load_config(config_path)?;
    let model = config.model.build().map_err(|e| match e {
        ConfigError::Potential(p) => fail(EXIT_MATH, p),
        other => Failure::from(other),
    })?;
    let lattice = config.lattice.build(model.r0())?;
    let metric = config.metric()?;
    let unique = match uniqueness_threshold(&model, &metric) {
        Ok(dob) => Some(dob.unique),
        Err(LatticeError::ConditionFailed(report)) => {
            return Err(fail(
                EXIT_MATH,
                format!("conditions failed, refusing to sample: {report:?}"),
            ))
        }
        Err(e) => return Err(e.into()),
    };

    let mut params = config.sampler.run_params()?;
    if let Some(s) = sweeps_override {
        params.sweeps = s;
    }

    let (new_records, state, warnings, snapshots, prior_records) = if resume {
        let checkpoint = rundir::read_checkpoint(out)?;
        let meta: RunMeta = serde_json::from_str(
            &std::fs::read_to_string(out.join("meta.json")).map_err(RunDirError::from)?,
        )
        .map_err(RunDirError::from)?;
        if meta.config_digest != digest {
            return Err(fail(
                EXIT_DATA,
                "config does not match the run directory (digest mismatch)",
            ));
        }
        if meta.burnin != params.burnin || meta.thin != params.thin || meta.seed != params.seed {
            return Err(fail(EXIT_DATA, "resume must keep seed, burnin and thin unchanged"));
        }
        if params.sweeps <= checkpoint.sweep {
            return Err(fail(
                EXIT_CONFIG,
                format!(
                    "sweep target {} does not extend the checkpoint at {}",
                    params.sweeps, checkpoint.sweep
                ),
            ));
        }
        let (_, prior) = rundir::read_samples_csv(&out.join("samples.csv"))?;
        let output = resume_chain(&model, &lattice, &params, checkpoint)?;
        (output.records, output.state, output.warnings, output.snapshots, prior)
    } else {
        rundir::prepare_dir(out, force)?;
        let output = run_chain(&model, &lattice, &params)?;
        (output.records, output.state, output.warnings, output.snapshots, Vec::new())
    };

    let mut all_records = prior_records;
    all_records.extend(new_records);

    std::fs::write(out.join("config.json"), std::fs::read(config_path).map_err(RunDirError::from)?)
        .map_err(RunDirError::from)?;
    rundir::write_samples_csv(&out.join("samples.csv"), lattice.n_sites(), &all_records)?;
    rundir::write_checkpoint(out, &state, lattice.extents())?;
    for (sweep, field) in &snapshots {
        rundir::write_snapshot(out, *sweep, field, lattice.extents(), params.seed)?;
    }
    let meta = RunMeta {
        seed: params.seed,
        sweeps: params.sweeps,
        burnin: params.burnin,
        thin: params.thin,
        order: match params.order {
            crate::sampler::SweepOrder::Sequential => "sequential".into(),
            crate::sampler::SweepOrder::Checkerboard => "checkerboard".into(),
        },
        model_hash: model_hash(&model, &lattice),
        config_digest: digest,
        n_sites: lattice.n_sites(),
        extents: lattice.extents().to_vec(),
        lambda: model.lambda(),
        unique,
        warnings,
    };
    rundir::write_json(&out.join("meta.json"), &meta)?;
    println!(
        "run complete: {} sweeps, {} records in {}",
        state.sweep,
        all_records.len(),
        out.display()
    );
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

pub fn cmd_analyze(
    run_dir: &Path,
    against_oracle: Option<&Path>,
    max_displacement: Option<i64>,
    alpha: Option<f64>,
    observable: Option<&str>,
) -> Result<i32, Failure> {
    let config_path = run_dir.join("config.json");
    if !config_path.exists() {
        return Err(fail(EXIT_DATA, format!("{} lacks config.json", run_dir.display())));
    }
    let (config, digest) = load_config(&config_path).map_err(|f| fail(EXIT_DATA, f.message))?;
    let model = config.model.build().map_err(|e| fail(EXIT_DATA, e))?;
    let lattice = config.lattice.build(model.r0()).map_err(|e| fail(EXIT_DATA, e))?;
    let metric = metric_of(&config, alpha)?;
    let (samples, _) = rundir::read_samples_csv(&run_dir.join("samples.csv"))?;
    if samples.n_sites != lattice.n_sites() {
        return Err(fail(
            EXIT_DATA,
            format!(
                "samples.csv has {} sites, lattice has {}",
                samples.n_sites,
                lattice.n_sites()
            ),
        ));
    }

    let obs = match observable {
        Some(name) => parse_observable(name)?,
        None => config.analysis.observable()?,
    };
    let radius = max_displacement.unwrap_or(config.analysis.max_displacement());
    let displacements = displacement_ball(lattice.dim(), radius);
    let base_site = if lattice.is_torus() { None } else { Some(center_site(&lattice)) };
    let series = estimate_covariances(
        &samples,
        &lattice,
        &obs,
        &obs,
        base_site,
        &displacements,
        config.analysis.batches(),
    )?;

    let dobrushin = uniqueness_threshold(&model, &metric)?;
    let fit = match fit_decay_rate(&series) {
        Ok(fit) => FitOutcome::Fit(fit),
        Err(AnalysisError::NoSignal(reason)) => FitOutcome::NoSignal { reason },
        Err(e) => return Err(e.into()),
    };

    let mut report = Report::new(&digest);
    let mut bounds: Vec<BoundReport> = Vec::new();
    match check_decay_bound(&series, &model, &metric, &obs, &obs, &dobrushin) {
        Ok(b) => bounds.push(b),
        Err(AnalysisError::OutsideUniquenessRegion(lg)) => {
            report.notes.push(format!(
                "decay bound skipped: lambda * gamma_d = {lg:.6} >= 1 (outside uniqueness region)"
            ));
        }
        Err(e) => return Err(e.into()),
    }
    let a = config.analysis.a();
    bounds.extend(check_moment_bounds(&samples, &model, a, config.analysis.batches())?);

    if let Some(oracle_path) = against_oracle {
        bounds.push(compare_against_oracle(oracle_path, &series)?);
    }

    let fit_used: Vec<bool> = match &fit {
        FitOutcome::Fit(f) => f.used.clone(),
        FitOutcome::NoSignal { .. } => vec![false; series.displacements.len()],
    };
    let mut cov_csv = String::from("displacement,cov,stderr,weight,included_in_fit\n");
    for (i, d) in series.displacements.iter().enumerate() {
        let key: Vec<String> = d.0.iter().map(|c| c.to_string()).collect();
        cov_csv.push_str(&format!(
            "{},{},{},{},{}\n",
            key.join(";"),
            series.cov[i],
            series.stderr[i],
            metric.weight(d),
            u8::from(fit_used[i])
        ));
    }
    rundir::write_atomic(&run_dir.join("cov.csv"), cov_csv.as_bytes())?;

    let all_pass = bounds.iter().all(|b| b.pass);
    report.dobrushin = Some(dobrushin);
    report.decay_fit = Some(fit);
    report.bounds = Some(bounds);
    rundir::write_json(&run_dir.join("report.json"), &report)?;

    for b in report.bounds.as_ref().unwrap() {
        println!(
            "{}: lhs = {:.6e}, rhs = {}, pass = {}",
            b.name,
            b.lhs,
            b.rhs.map_or("unbounded".into(), |r| format!("{r:.6e}")),
            b.pass
        );
    }
    Ok(if all_pass { EXIT_OK } else { EXIT_MATH })
}

fn center_site(lattice: &crate::lattice::LatticeSpec) -> usize {
    let coords: Vec<i64> = lattice.extents().iter().map(|&l| l / 2).collect();
    lattice.index(&coords)
}

fn compare_against_oracle(
    path: &Path,
    series: &crate::analysis::CovarianceSeries,
) -> Result<BoundReport, Failure> {
    let text = std::fs::read_to_string(path).map_err(RunDirError::from)?;
    let mut oracle = std::collections::BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once(',')
            .ok_or_else(|| fail(EXIT_DATA, format!("bad oracle row {line:?}")))?;
        let d = Displacement(
            key.split(';')
                .map(|c| c.parse::<i64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| fail(EXIT_DATA, format!("bad oracle displacement {key:?}: {e}")))?,
        );
        let v: f64 = value
            .parse()
            .map_err(|e| fail(EXIT_DATA, format!("bad oracle value {value:?}: {e}")))?;
        oracle.insert(d, v);
    }
    let mut worst = 0.0f64;
    let mut worst_d = None;
    let mut compared = 0;
    for (i, d) in series.displacements.iter().enumerate() {
        if let Some(&want) = oracle.get(d) {
            compared += 1;
            let sigma = series.stderr[i].max(1e-300);
            let z = (series.cov[i] - want).abs() / sigma;
            if z > worst {
                worst = z;
                worst_d = Some(d.clone());
            }
        }
    }
    if compared == 0 {
        return Err(fail(EXIT_DATA, "oracle file shares no displacements with the series"));
    }
    Ok(BoundReport {
        name: "oracle_comparison".into(),
        lhs: worst,
        rhs: Some(3.0),
        slack: Some(3.0 - worst),
        stat_error: 0.0,
        quad_error: 0.0,
        num_tol: 1e-10,
        pass: worst <= 3.0 + 1e-10,
        note: Some(format!(
            "max |sampled - oracle| / stderr over {compared} displacements{}",
            worst_d.map_or(String::new(), |d| format!(", worst at {d}"))
        )),
    })
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

pub fn cmd_verify(config_path: &Path, out: Option<&Path>) -> Result<i32, Failure> {
    let (config, digest) = load_config(config_path)?;
    let out = out.unwrap_or(Path::new("verify.json"));
    let model = config.model.build().map_err(|e| match e {
        ConfigError::Potential(p) => fail(EXIT_MATH, p),
        other => Failure::from(other),
    })?;
    let f = model.f();

    let variance_battery = [
        Observable::Coordinate,
        Observable::Tanh,
        Observable::XPlusSin { amplitude: 0.3 },
        Observable::OnePlusTanh,
    ];
    let entropy_battery = [Observable::OnePlusTanh, Observable::ExpHalf];

    let mut bounds = Vec::new();
    for phi in &variance_battery {
        for mut b in verify_brascamp_lieb_1d(f, phi)? {
            b.name = format!("{}[{}]", b.name, phi.name());
            bounds.push(b);
        }
    }
    for phi in &entropy_battery {
        let mut b = verify_lsi_1d(f, phi)?;
        b.name = format!("{}[{}]", b.name, phi.name());
        bounds.push(b);
    }
    let mut contraction = verify_contraction(&model, &Observable::Tanh, &Observable::Tanh)?;
    contraction.name = "one_step_contraction[tanh*tanh]".into();
    bounds.push(contraction);

    for b in &mut bounds {
        if let Some(slack) = b.slack {
            if slack.abs() <= b.num_tol {
                let flag = "equality within numerical tolerance".to_string();
                b.note = Some(match b.note.take() {
                    Some(n) => format!("{n}; {flag}"),
                    None => flag,
                });
            }
        }
    }

    let all_pass = bounds.iter().all(|b| b.pass);
    let failing: Vec<String> =
        bounds.iter().filter(|b| !b.pass).map(|b| b.name.clone()).collect();
    let mut report = Report::new(&digest);
    report.bounds = Some(bounds);
    rundir::write_json(out, &report)?;
    for b in report.bounds.as_ref().unwrap() {
        println!(
            "{}: lhs = {:.6e}, rhs = {:.6e}, slack = {:.3e}, pass = {}",
            b.name,
            b.lhs,
            b.rhs.unwrap_or(f64::INFINITY),
            b.slack.unwrap_or(f64::INFINITY),
            b.pass
        );
    }
    if all_pass {
        Ok(EXIT_OK)
    } else {
        Err(fail(EXIT_MATH, format!("failing checks: {}", failing.join(", "))))
    }
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

pub fn cmd_oracle(
    config_path: &Path,
    out: &Path,
    max_displacement: Option<i64>,
) -> Result<i32, Failure> {
    let (config, _) = load_config(config_path)?;
    let model = config.model.build().map_err(|e| match e {
        ConfigError::Potential(p) => fail(EXIT_MATH, p),
        other => Failure::from(other),
    })?;
    let lattice = config.lattice.build(model.r0())?;
    let oracle = match gaussian_covariance_oracle(&model, &lattice) {
        Ok(o) => o,
        Err(e @ LatticeError::NotGaussian(_)) | Err(e @ LatticeError::TooLarge(_)) => {
            return Err(fail(EXIT_CONFIG, e))
        }
        Err(e) => return Err(e.into()),
    };

    let radius = max_displacement.unwrap_or(config.analysis.max_displacement());
    let displacements = displacement_ball(lattice.dim(), radius);
    let base = if lattice.is_torus() { 0 } else { center_site(&lattice) };
    let mut csv = String::from("displacement,cov\n");
    for d in &displacements {
        if let Some(m) = lattice.shift_site(base, d) {
            let key: Vec<String> = d.0.iter().map(|c| c.to_string()).collect();
            csv.push_str(&format!("{},{}\n", key.join(";"), oracle.cov_entry(base, m)));
        }
    }
    rundir::write_atomic(out, csv.as_bytes())?;
    println!(
        "oracle covariances for {} displacements written to {}",
        displacements.len(),
        out.display()
    );
    Ok(EXIT_OK)
}

/// Deterministic (zero-coupling) moment checks for callers that want them
/// next to the sampled ones.
pub fn quadrature_moment_reports(config: &RunConfig) -> Result<Vec<BoundReport>, Failure> {
    let model = config.model.build()?;
    Ok(moment_quadrature_bounds(model.f(), config.analysis.a())?)
}

