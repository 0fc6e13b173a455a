use std::path::Path;

use anyhow::{bail, Context, Result};
use hjblab::candidates::{parse_candidate, CandidateValueFn};
use hjblab::dp_oracle::{dp_solve, DPConfig};
use hjblab::hamiltonian::residual_profile;
use hjblab::model::{audit_assumptions, ModelSpec};
use hjblab::numeric::{linspace, logspace};
use hjblab::rollout::{certify as run_certify, integrate_policy, IntegratorConfig, Tolerances};
use hjblab::viscosity::{viscosity_report, SuperStatus};
use serde_json::json;

use crate::report::{OutDir, RunReport};
use crate::ModelArg;

/// A JSON file path, or a preset name when no such file exists.
pub fn load_model(arg: &ModelArg) -> Result<ModelSpec> {
    let path = Path::new(&arg.model);
    if path.exists() {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        return ModelSpec::from_json(&text).with_context(|| format!("model file {}", path.display()));
    }
    ModelSpec::preset(&arg.model)
        .with_context(|| format!("`{}` is neither a model file nor a preset (prop1, prop2, theorem2)", arg.model))
}

/// `MIN:MAX:N` (uniform) or `MIN:MAX:N:log`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let (lo, hi, n, log) = match parts.as_slice() {
        [lo, hi, n] => (lo, hi, n, false),
        [lo, hi, n, "log"] => (lo, hi, n, true),
        _ => bail!("grid `{spec}` must be MIN:MAX:N or MIN:MAX:N:log"),
    };
    let lo: f64 = lo.trim().parse().with_context(|| format!("grid minimum in `{spec}`"))?;
    let hi: f64 = hi.trim().parse().with_context(|| format!("grid maximum in `{spec}`"))?;
    let n: usize = n.trim().parse().with_context(|| format!("grid size in `{spec}`"))?;
    if !(lo > 0.0 && hi > lo && n >= 2) {
        bail!("grid `{spec}` needs 0 < MIN < MAX and N >= 2");
    }
    Ok(if log { logspace(lo, hi, n) } else { linspace(lo, hi, n) })
}

pub fn residual(out: &OutDir, seed: u64, model_arg: &ModelArg, desc: &str, grid: &str, tol: f64) -> Result<bool> {
    let model = load_model(model_arg)?;
    let candidate = parse_candidate(desc)?;
    let ks = parse_grid(grid)?;
    let profile = residual_profile(&model, &candidate, &ks)?;
    let mut report =
        RunReport::new("residual", Some(&model), json!({ "candidate": desc, "grid": grid, "tol": tol }), seed);
    out.write(&mut report, "residual.csv", |f| profile.write_csv(f))?;
    report.check(
        "finite residuals",
        profile.count_infinite == 0,
        format!("{} of {} residuals infinite", profile.count_infinite, ks.len()),
    );
    report.check(
        "sup-norm residual",
        profile.sup_norm_finite <= tol,
        format!("sup |residual| = {:e} (tol {tol:e})", profile.sup_norm_finite),
    );
    out.finish(report)
}

#[allow(clippy::too_many_arguments)]
pub fn certify(
    out: &OutDir,
    seed: u64,
    model_arg: &ModelArg,
    desc: &str,
    k0: f64,
    horizon: Option<f64>,
    dt: f64,
    tols: &Tolerances,
) -> Result<bool> {
    let model = load_model(model_arg)?;
    let candidate = parse_candidate(desc)?;
    let cfg = IntegratorConfig::rk4(dt, horizon.unwrap_or(30.0 / model.rho));
    cfg.validate()?;
    let mut report = RunReport::new(
        "certify",
        Some(&model),
        json!({ "candidate": desc, "k0": k0, "horizon": cfg.horizon, "dt": dt, "tolerances": tols }),
        seed,
    );
    let passed = certify_into(out, &mut report, &model, &candidate, desc, k0, &cfg, tols, "")?;
    debug_assert_eq!(passed, report.passed());
    out.finish(report)
}

/// Certifies, writes the trajectory (when the policy is defined) and the
/// certification JSON, and records one check. `tag` prefixes file names.
#[allow(clippy::too_many_arguments)]
pub fn certify_into(
    out: &OutDir,
    report: &mut RunReport,
    model: &ModelSpec,
    candidate: &CandidateValueFn,
    desc: &str,
    k0: f64,
    cfg: &IntegratorConfig,
    tols: &Tolerances,
    tag: &str,
) -> Result<bool> {
    let cert = run_certify(model, candidate, k0, cfg, tols)?;
    if let Ok(traj) = integrate_policy(model, candidate, k0, cfg) {
        out.write(report, &format!("{tag}trajectory.csv"), |f| traj.write_csv(f))?;
    }
    out.write(report, &format!("{tag}certification.json"), |mut f| {
        serde_json::to_writer_pretty(&mut f, &cert).map_err(|e| hjblab::Error::Config(e.to_string()))
    })?;
    let detail = match (&cert.reason, cert.payoff_gap) {
        (None, gap) => format!("ACCEPT at k0 = {k0}, payoff gap {:e}", gap.unwrap_or(f64::NAN)),
        (Some(reason), _) => format!("REJECT at k0 = {k0}, reason = {} ({reason})", reason.code()),
    };
    Ok(report.check(format!("certify {desc}"), cert.accepted(), detail))
}

pub fn viscosity(out: &OutDir, seed: u64, model_arg: &ModelArg, desc: &str, grid: &str, tol: f64) -> Result<bool> {
    let model = load_model(model_arg)?;
    let candidate = parse_candidate(desc)?;
    let mut ks = parse_grid(grid)?;
    if let CandidateValueFn::MinOf(m) = &candidate {
        let (lo, hi) = (ks[0], ks[ks.len() - 1]);
        ks.extend(m.kinks().iter().filter(|&&k| k >= lo && k <= hi));
        ks.sort_by(f64::total_cmp);
        ks.dedup();
    }
    let vr = viscosity_report(&model, &candidate, &ks, tol)?;
    let mut report =
        RunReport::new("viscosity", Some(&model), json!({ "candidate": desc, "grid": grid, "tol": tol }), seed);
    out.write(&mut report, "viscosity.csv", |f| vr.write_csv(f))?;
    report.check("viscosity tests", vr.consistent, vr.summary.clone());
    for v in vr.violations() {
        let detail = match v.sup {
            SuperStatus::Violated { gap, worst_p } => format!("supersolution gap {gap} at p = {worst_p}"),
            SuperStatus::Holds => format!("subsolution violated: {:?}", v.sub),
        };
        report.check(format!("k = {}", v.k), false, detail);
    }
    out.finish(report)
}

pub fn dp(out: &OutDir, seed: u64, model_arg: &ModelArg, cfg: DPConfig, probes: &[f64]) -> Result<bool> {
    let model = load_model(model_arg)?;
    let table = dp_solve(&model, &cfg)?;
    let mut report = RunReport::new("dp", Some(&model), json!({ "config": cfg, "probes": probes }), seed);
    out.write(&mut report, "dp_values.csv", |f| table.write_csv(f))?;
    let d = table.diagnostics;
    report.check(
        "diagnostics",
        true,
        format!(
            "monotone in T: {}, monotone in k: {}, concave on grid: {} (max chord violation {:e})",
            d.monotone_in_t, d.monotone_in_k, d.concave_on_grid, d.max_chord_violation
        ),
    );
    for &k in probes {
        let v = table.value_at(k)?;
        report.check(format!("V_dp({k})"), true, format!("{v}"));
    }
    out.finish(report)
}

pub fn audit(out: &OutDir, seed: u64, model_arg: &ModelArg) -> Result<bool> {
    let model = load_model(model_arg)?;
    let audit = audit_assumptions(&model);
    let mut report = RunReport::new("audit", Some(&model), json!({ "model": model_arg.model }), seed);
    out.write(&mut report, "audit.json", |mut f| {
        serde_json::to_writer_pretty(&mut f, &audit).map_err(|e| hjblab::Error::Config(e.to_string()))
    })?;
    print!("{audit}");
    // failed conditions are findings, not errors
    report.check("audit", true, format!("all conditions hold: {}", audit.all_passed()));
    out.finish(report)
}
