use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use serde_json::json;

use preisach::csv_io::{load_param_signal, load_step_signal, write_step_signal, write_table};
use preisach::inverse::{inversion_radius, regularity_check, stability_check};
use preisach::preisach::{ModelConfig, Preset};
use preisach::random::{random_param_signal, random_step_signal, seeded, ChaCha8Rng};
use preisach::signals::merge_divisions;
use preisach::{
    discretize, forward_apply, forward_eval, invert, solve_pe5_with_radius, DensityModel,
    ParamSignal, PiezoConfig, StepSignal,
};

use crate::{Cli, Command};

const STUDY_KS: [usize; 4] = [4, 16, 64, 256];
const STUDY_K_REF: usize = 4096;
const RANDOM_FINAL_TIME: f64 = 1.0;
const RANDOM_PARAM_AMPLITUDE: f64 = 2.0;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Violation(String),
    Lib(preisach::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Violation(_) => 1,
            Self::Usage(_) => 2,
            Self::Lib(e) if e.is_numerical() => 3,
            Self::Lib(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "{m}"),
            Self::Violation(m) => write!(f, "bound violated: {m}"),
            Self::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<preisach::Error> for CliError {
    fn from(e: preisach::Error) -> Self {
        Self::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Lib(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: &Cli) -> Result<()> {
    if cli.out.as_deref().is_some_and(|p| p.as_os_str().is_empty()) {
        return Err(CliError::Usage("output path is empty".into()));
    }
    if !(cli.tol > 0.0 && cli.tol.is_finite()) {
        return Err(CliError::Usage(format!(
            "--tol must be positive, got {}",
            cli.tol
        )));
    }
    if let Some(r) = cli.radius {
        if !(r > 0.0 && r.is_finite()) {
            return Err(CliError::Usage(format!(
                "--radius must be positive, got {r}"
            )));
        }
    }
    match cli.command {
        Command::Forward => forward(cli),
        Command::Invert => invert_cmd(cli),
        Command::Roundtrip => roundtrip(cli),
        Command::Stability => stability(cli),
        Command::ErrorStudy => error_study(cli),
        Command::Regularity => regularity(cli),
        Command::Piezo => piezo(cli),
    }
}

fn k(cli: &Cli) -> usize {
    cli.k as usize
}

fn load_model(cli: &Cli) -> Result<Arc<dyn DensityModel>> {
    let spec = cli.model.as_deref().unwrap_or("exp");
    let preset = match spec {
        "exp" => Some(Preset::Exp),
        "cauchy" => Some(Preset::Cauchy),
        "uniform" => Some(Preset::Uniform),
        "zero" => Some(Preset::Zero),
        _ => None,
    };
    Ok(match preset {
        Some(p) => Arc::new(p.density()),
        None => Arc::new(ModelConfig::from_path(spec)?.build()?),
    })
}

fn check_inputs(cli: &Cli, allowed: &[usize], usage: &str) -> Result<()> {
    if allowed.contains(&cli.inputs.len()) {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "expected {usage}, got {} input file(s)",
            cli.inputs.len()
        )))
    }
}

fn zero_param(dim: usize, final_time: f64) -> Result<ParamSignal> {
    Ok(ParamSignal::constant(
        vec![0.0, final_time],
        vec![0.0; dim],
    )?)
}

fn param_or_zero(path: Option<&PathBuf>, dim: usize, final_time: f64) -> Result<ParamSignal> {
    match path {
        Some(p) => Ok(load_param_signal(p)?),
        None => zero_param(dim, final_time),
    }
}

/// `--radius` if given, else the larger of the model radius and `needed`.
fn radius(cli: &Cli, model: &dyn DensityModel, needed: f64) -> f64 {
    cli.radius
        .unwrap_or_else(|| model.support_radius().max(needed))
}

/// Writes CSV to `--out` or standard output.
fn emit<F>(cli: &Cli, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> preisach::Result<()>,
{
    match &cli.out {
        Some(path) => {
            let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
            write(&mut file)?;
            file.flush()?;
            info!("wrote {}", path.display());
        }
        None => write(&mut std::io::stdout().lock())?,
    }
    Ok(())
}

/// JSON summaries go to standard output unless the CSV already does.
fn summary(cli: &Cli, value: serde_json::Value) {
    if cli.out.is_some() {
        println!("{value}");
    } else {
        eprintln!("{value}");
    }
}

fn table(cli: &Cli, headers: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    emit(cli, |w| write_table(w, headers, rows))
}

fn forward(cli: &Cli) -> Result<()> {
    check_inputs(cli, &[1, 2], "q.csv [u.csv]")?;
    let model = load_model(cli)?;
    let q = load_step_signal(&cli.inputs[0])?;
    let u = param_or_zero(cli.inputs.get(1), model.param_dim(), q.final_time())?;
    let op = discretize(
        model.clone(),
        k(cli),
        Some(radius(cli, model.as_ref(), q.sup_norm())),
    )?;
    let w = forward_apply(&op, &u, &q)?;
    emit(cli, |out| write_step_signal(out, &w))
}

fn invert_cmd(cli: &Cli) -> Result<()> {
    check_inputs(cli, &[1, 2], "w.csv [u.csv]")?;
    let model = load_model(cli)?;
    let w = load_step_signal(&cli.inputs[0])?;
    let u = param_or_zero(cli.inputs.get(1), model.param_dim(), w.final_time())?;
    let r = radius(cli, model.as_ref(), inversion_radius(model.as_ref(), &[&w]));
    let op = discretize(model, k(cli), Some(r))?;
    let rep = invert(&op, &u, &w, cli.tol)?;
    emit(cli, |out| write_step_signal(out, &rep.q))?;
    summary(
        cli,
        json!({
            "residual": rep.residual_sup,
            "tol": cli.tol,
            "rho_k": rep.rho_k,
            "e_M": rep.bound_em,
            "k": op.k(),
            "radius": op.radius(),
            "steps": rep.q.steps(),
            "max_iterations": rep.per_step_iters.iter().max(),
        }),
    );
    Ok(())
}

fn trials(cli: &Cli, default: usize) -> Result<usize> {
    match cli.trials {
        Some(0) => Err(CliError::Usage("--trials must be at least 1".into())),
        Some(n) => Ok(n),
        None => Ok(default),
    }
}

fn roundtrip(cli: &Cli) -> Result<()> {
    check_inputs(cli, &[0], "no input files")?;
    let model = load_model(cli)?;
    let r = cli.radius.unwrap_or_else(|| model.support_radius());
    let op = discretize(model.clone(), k(cli), Some(r))?;
    let mut rng = seeded(cli.seed);
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    for trial in 0..trials(cli, 100)? {
        let q = random_step_signal(&mut rng, RANDOM_FINAL_TIME, r)?;
        let u = random_param_signal(
            &mut rng,
            RANDOM_FINAL_TIME,
            model.param_dim(),
            RANDOM_PARAM_AMPLITUDE,
        )?;
        let w = forward_apply(&op, &u, &q)?;
        let back = invert(&op, &u, &w, cli.tol)?.q;
        let err = back.zip_with(&q, |a, b| a - b)?.sup_norm();
        // the residual certificate plus rounding in the forward evaluation
        let bound = op.rho() * (cli.tol + 4.0 * f64::EPSILON * (1.0 + w.sup_norm()));
        if err > bound {
            violations += 1;
        }
        worst = worst.max(err);
        rows.push(vec![trial as f64, err, bound]);
    }
    table(cli, &["trial", "max_error", "rho_k_bound"], &rows)?;
    summary(
        cli,
        json!({ "max_error": worst, "rho_k": op.rho(), "tol": cli.tol }),
    );
    if violations > 0 {
        return Err(CliError::Violation(format!(
            "{violations} roundtrip trial(s) exceed rho_k * tol"
        )));
    }
    Ok(())
}

fn random_pair(
    rng: &mut ChaCha8Rng,
    dim: usize,
) -> Result<(StepSignal, StepSignal, ParamSignal, ParamSignal)> {
    let w = random_step_signal(rng, RANDOM_FINAL_TIME, 2.0)?;
    let noise = random_step_signal(rng, RANDOM_FINAL_TIME, 0.5)?;
    let w_hat = w.zip_with(&noise, |a, b| a + b)?;
    let u = random_param_signal(rng, RANDOM_FINAL_TIME, dim, RANDOM_PARAM_AMPLITUDE)?;
    let noise = random_param_signal(rng, RANDOM_FINAL_TIME, dim, 0.5)?;
    let (division, u_m, noise) = merge_divisions(&u, &noise)?;
    let values = u_m
        .values()
        .iter()
        .zip(noise.values())
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
        .collect();
    Ok((w, w_hat, u, ParamSignal::new(division, values)?))
}

fn stability(cli: &Cli) -> Result<()> {
    check_inputs(
        cli,
        &[0, 2, 4],
        "no inputs, w.csv w_hat.csv, or w.csv w_hat.csv u.csv u_hat.csv",
    )?;
    let model = load_model(cli)?;
    let dim = model.param_dim();
    let (w, w_hat, u, u_hat) = if cli.inputs.is_empty() {
        random_pair(&mut seeded(cli.seed), dim)?
    } else {
        let w = load_step_signal(&cli.inputs[0])?;
        let w_hat = load_step_signal(&cli.inputs[1])?;
        let u = param_or_zero(cli.inputs.get(2), dim, w.final_time())?;
        let u_hat = param_or_zero(cli.inputs.get(3), dim, w_hat.final_time())?;
        (w, w_hat, u, u_hat)
    };
    let r = radius(
        cli,
        model.as_ref(),
        inversion_radius(model.as_ref(), &[&w, &w_hat]),
    );
    let op = discretize(model, k(cli), Some(r))?;
    let rep = stability_check(&op, &u, &w, &u_hat, &w_hat, cli.tol)?;
    let rows: Vec<Vec<f64>> = rep
        .rows
        .iter()
        .map(|row| {
            vec![
                row.t,
                row.diff,
                row.w_gap,
                row.u_gap,
                row.rho_bound,
                row.em_bound,
            ]
        })
        .collect();
    table(
        cli,
        &["t", "diff", "w_gap", "u_gap", "rho_k_bound", "eM_bound"],
        &rows,
    )?;
    summary(
        cli,
        json!({
            "max_diff": rep.max_diff(),
            "rho_k_slack": rep.rho_slack(),
            "eM_slack": rep.em_slack(),
            "rho_k": rep.constants.rho_k,
            "e_M": rep.constants.exp_mass,
        }),
    );
    if !rep.passed() {
        return Err(CliError::Violation(format!(
            "stability slack rho_k {:.3e}, e^M {:.3e}",
            rep.rho_slack(),
            rep.em_slack()
        )));
    }
    Ok(())
}

fn regularity(cli: &Cli) -> Result<()> {
    check_inputs(cli, &[0, 1, 2], "no inputs or w.csv [u.csv]")?;
    let model = load_model(cli)?;
    let dim = model.param_dim();
    let (w, u) = if cli.inputs.is_empty() {
        let mut rng = seeded(cli.seed);
        let w = random_step_signal(&mut rng, RANDOM_FINAL_TIME, 2.0)?;
        (
            w,
            random_param_signal(&mut rng, RANDOM_FINAL_TIME, dim, RANDOM_PARAM_AMPLITUDE)?,
        )
    } else {
        let w = load_step_signal(&cli.inputs[0])?;
        let u = param_or_zero(cli.inputs.get(1), dim, w.final_time())?;
        (w, u)
    };
    let r = radius(cli, model.as_ref(), inversion_radius(model.as_ref(), &[&w]));
    let op = discretize(model, k(cli), Some(r))?;
    let rep = regularity_check(&op, &u, &w, cli.tol)?;
    let rows: Vec<Vec<f64>> = rep
        .rows
        .iter()
        .map(|row| vec![row.t, row.h, row.change, row.bound])
        .collect();
    table(cli, &["t", "h", "change", "eM_bound"], &rows)?;
    summary(
        cli,
        json!({ "max_change": rep.max_change(), "eM_slack": rep.min_slack() }),
    );
    if !rep.passed() {
        return Err(CliError::Violation(format!(
            "regularity slack {:.3e}",
            rep.min_slack()
        )));
    }
    Ok(())
}

fn error_study(cli: &Cli) -> Result<()> {
    check_inputs(cli, &[0], "no input files")?;
    let model = load_model(cli)?;
    let r = cli.radius.unwrap_or_else(|| model.support_radius());
    let m = model.mass();
    let mut rng = seeded(cli.seed);
    let signals = (0..trials(cli, 20)?)
        .map(|_| {
            let u = random_param_signal(
                &mut rng,
                RANDOM_FINAL_TIME,
                model.param_dim(),
                RANDOM_PARAM_AMPLITUDE,
            )?;
            Ok((u, random_step_signal(&mut rng, RANDOM_FINAL_TIME, r)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let reference = discretize(model.clone(), STUDY_K_REF, Some(r))?;
    let exact = signals
        .iter()
        .map(|(u, q)| forward_eval(&reference, u, q))
        .collect::<preisach::Result<Vec<_>>>()?;

    let errors = std::thread::scope(|s| {
        let handles: Vec<_> = STUDY_KS
            .iter()
            .map(|&k| {
                let (model, signals, exact) = (model.clone(), &signals, &exact);
                s.spawn(move || -> preisach::Result<f64> {
                    let op = discretize(model, k, Some(r))?;
                    signals
                        .iter()
                        .zip(exact)
                        .try_fold(0.0_f64, |worst, ((u, q), p)| {
                            let gap = forward_eval(&op, u, q)?
                                .zip_with(p, |a, b| a - b)?
                                .sup_norm();
                            Ok(worst.max(gap))
                        })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("error-study worker panicked"))
            .collect::<preisach::Result<Vec<_>>>()
    })?;

    let mut rows = Vec::new();
    let mut violations = Vec::new();
    for (&k, &err) in STUDY_KS.iter().zip(&errors) {
        let mr_over_k = m * r / k as f64;
        let bound = mr_over_k + m * r / STUDY_K_REF as f64;
        if err > bound {
            violations.push(k);
        }
        rows.push(vec![k as f64, err, mr_over_k, bound]);
    }
    table(cli, &["k", "sup_error", "mr_over_k", "bound"], &rows)?;
    if !violations.is_empty() {
        return Err(CliError::Violation(format!(
            "discretization error above MR/k at k = {violations:?}"
        )));
    }
    Ok(())
}

fn piezo(cli: &Cli) -> Result<()> {
    check_inputs(cli, &[1, 2, 3], "E.csv [eps.csv [theta.csv]]")?;
    let path = cli
        .model
        .as_deref()
        .ok_or_else(|| CliError::Usage("piezo requires --model <piezo config>".into()))?;
    let model = PiezoConfig::from_path(Path::new(path))?.build()?;
    let e = load_step_signal(&cli.inputs[0])?;
    let zero = StepSignal::constant(vec![0.0, e.final_time()], 0.0)?;
    let eps = cli
        .inputs
        .get(1)
        .map(load_step_signal)
        .transpose()?
        .unwrap_or_else(|| zero.clone());
    let theta = cli
        .inputs
        .get(2)
        .map(load_step_signal)
        .transpose()?
        .unwrap_or(zero);
    let sol = solve_pe5_with_radius(&model, &e, &eps, &theta, k(cli), cli.tol, cli.radius)?;
    let rows: Vec<Vec<f64>> = sol
        .q
        .division()
        .iter()
        .zip(sol.q.values())
        .zip(sol.polarization.values())
        .map(|((&t, &q), &p)| vec![t, q, p])
        .collect();
    table(cli, &["t", "q", "polarization"], &rows)?;
    summary(
        cli,
        json!({
            "residual": sol.report.residual_sup,
            "rho_k": sol.report.rho_k,
            "e_M": sol.report.bound_em,
            "radius": sol.radius,
        }),
    );
    Ok(())
}
