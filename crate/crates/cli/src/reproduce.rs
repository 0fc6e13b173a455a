use anyhow::Result;
use hjblab::candidates::{divergence_check, prop1_min_a, solve_hjb_from_steady_state, CandidateValueFn, SolveOptions};
use hjblab::dp_oracle::{dp_solve, DPConfig, DP_ERROR_BOUND};
use hjblab::hamiltonian::residual_profile;
use hjblab::model::{audit_assumptions, find_steady_state, Condition, ModelSpec};
use hjblab::numeric::{linspace, logspace};
use hjblab::rollout::{IntegratorConfig, Tolerances};
use hjblab::viscosity::viscosity_report;
use serde_json::json;

use crate::commands::certify_into;
use crate::report::{OutDir, RunReport};
use crate::Reproduction;

pub fn run(out: &OutDir, seed: u64, name: Reproduction) -> Result<bool> {
    match name {
        Reproduction::Prop1 => prop1(&out.sub("prop1")?, seed),
        Reproduction::Prop2 => prop2(&out.sub("prop2")?, seed),
        Reproduction::Theorem2Demo => theorem2_demo(&out.sub("theorem2-demo")?, seed),
    }
}

fn residual_check(
    out: &OutDir,
    report: &mut RunReport,
    model: &ModelSpec,
    cand: &CandidateValueFn,
    grid: &[f64],
    file: &str,
    label: &str,
) -> Result<()> {
    let p = residual_profile(model, cand, grid)?;
    out.write(report, file, |f| p.write_csv(f))?;
    report.check(
        format!("residual {label}"),
        p.count_infinite == 0 && p.sup_norm_finite <= 1e-9,
        format!("sup |residual| = {:e}, {} infinite", p.sup_norm_finite, p.count_infinite),
    );
    Ok(())
}

fn prop1(out: &OutDir, seed: u64) -> Result<bool> {
    let model = ModelSpec::prop1(1.0);
    let dp_cfg = DPConfig::desk();
    let mut report =
        RunReport::new("reproduce prop1", Some(&model), json!({ "dp": dp_cfg, "viscosity_tol": 1e-3 }), seed);
    let grid = logspace(0.05, 20.0, 200);
    for a in [1.5, 2.0, 4.0] {
        let cand = CandidateValueFn::prop1_family(a, 1.0)?;
        residual_check(out, &mut report, &model, &cand, &grid, &format!("residual_A{a}.csv"), &format!("prop1:A={a}"))?;
    }
    let a_min = prop1_min_a(1.0);
    report.check(
        "threshold A_min",
        (a_min - 1f64.exp() / 2.0).abs() <= 1e-3,
        format!("A_min = {a_min} (e/2 = {})", 1f64.exp() / 2.0),
    );
    let div = divergence_check(&CandidateValueFn::prop1_family(2.0, 1.0)?)?;
    report.check(
        "slope divergence and non-concavity",
        div.passed,
        format!("{} levels near 0, {} near infinity", div.near_zero.len(), div.near_infinity.len()),
    );

    let table = dp_solve(&model, &dp_cfg)?;
    out.write(&mut report, "dp_values.csv", |f| table.write_csv(f))?;
    let v_dp = table.value_at(1.0)?;
    report.check("DP bounds at k = 1", (1.0..=1.25).contains(&v_dp), format!("V_dp(1) = {v_dp} in [1, 1.25]"));
    let sep = a_min - v_dp;
    report.check(
        "family vs DP separation at k = 1",
        sep >= 0.1,
        format!("min over A >= A_min of V(1) − V_dp(1) = {sep}"),
    );

    let vr = viscosity_report(&model, &table.to_candidate()?, &linspace(0.1, 3.5, 100), 1e-3)?;
    out.write(&mut report, "viscosity_dp.csv", |f| vr.write_csv(f))?;
    report.check("viscosity violation on the DP estimate", !vr.consistent, vr.summary.clone());
    out.finish(report)
}

fn prop2(out: &OutDir, seed: u64) -> Result<bool> {
    let model = ModelSpec::prop2();
    let cfg = IntegratorConfig::for_model(&model);
    let tols = Tolerances::default();
    // each general solution touches k + √k at k = 1/(4(A−1)²), where its policy
    // is stationary and certification rightly accepts; k0 = 2 avoids all three
    let k0 = 2.0;
    let mut report = RunReport::new(
        "reproduce prop2",
        Some(&model),
        json!({ "k0": k0, "integrator": cfg, "tolerances": tols }),
        seed,
    );
    let grid = logspace(0.1, 10.0, 200);
    let mut cands = vec![("prop2-singular".to_string(), CandidateValueFn::Prop2Singular)];
    for a in [1.5, 2.0, 3.0] {
        cands.push((format!("clairaut:A={a}"), CandidateValueFn::clairaut(a)?));
    }
    for (i, (desc, cand)) in cands.iter().enumerate() {
        residual_check(out, &mut report, &model, cand, &grid, &format!("residual_{i}.csv"), desc)?;
    }
    for (i, (desc, cand)) in cands.iter().enumerate() {
        let accepted = certify_into(out, &mut report, &model, cand, desc, k0, &cfg, &tols, &format!("cand{i}_"))?;
        // the singular solution must pass and every general solution must fail
        let expected = i == 0;
        let last = report.summary.last_mut().expect("certify_into records a check");
        last.passed = accepted == expected;
        last.name = format!("{} (expected {})", last.name, if expected { "ACCEPT" } else { "REJECT" });
    }
    out.finish(report)
}

fn theorem2_demo(out: &OutDir, seed: u64) -> Result<bool> {
    let model = ModelSpec::theorem2();
    let dp_cfg = DPConfig::desk();
    let mut report =
        RunReport::new("reproduce theorem2-demo", Some(&model), json!({ "range": [0.1, 2.0], "dp": dp_cfg }), seed);
    let audit = audit_assumptions(&model);
    out.write(&mut report, "audit.json", |mut f| {
        serde_json::to_writer_pretty(&mut f, &audit).map_err(|e| hjblab::Error::Config(e.to_string()))
    })?;
    report.check(
        "audit",
        audit.passed(Condition::Thm2I) && audit.passed(Condition::Thm2II) && audit.all_passed(),
        audit.to_string().trim_end().replace('\n', "; "),
    );
    let k_star = find_steady_state(&model, 0.01, 10.0)?;
    report.check("steady state", (k_star - 0.25).abs() <= 1e-9, format!("k* = {k_star}"));

    let sol = solve_hjb_from_steady_state(&model, 0.1, 2.0, &SolveOptions::default())?;
    out.write(&mut report, "hjb_solution.csv", |f| sol.grid.write_csv(f))?;
    let v = sol.candidate();
    let v_star = v.eval(0.25)?;
    report.check("HJB-ODE value at k*", (v_star - 2f64.sqrt()).abs() <= 1e-6, format!("V(0.25) = {v_star}"));
    report.check("HJB-ODE knot residual", sol.knot_residual <= 1e-6, format!("{:e}", sol.knot_residual));

    let cfg = IntegratorConfig::for_model(&model);
    let tols = Tolerances { tol_g: Some(1e-3), ..Tolerances::default() };
    for k0 in [0.5, 1.0] {
        certify_into(
            out,
            &mut report,
            &model,
            &v,
            &format!("HJB-ODE solution from k0 = {k0}"),
            k0,
            &cfg,
            &tols,
            &format!("k0_{k0}_"),
        )?;
    }

    let table = dp_solve(&model, &dp_cfg)?;
    out.write(&mut report, "dp_values.csv", |f| table.write_csv(f))?;
    let v_dp = table.value_at(0.25)?;
    report.check("DP value at k*", (v_dp - 2f64.sqrt()).abs() <= DP_ERROR_BOUND, format!("V_dp(0.25) = {v_dp}"));
    let mut worst = 0.0f64;
    for k in [0.1, 0.25, 0.5, 1.0, 1.5, 2.0] {
        worst = worst.max((v.eval(k)? - table.value_at(k)?).abs());
    }
    report.check("HJB-ODE vs DP", worst <= DP_ERROR_BOUND, format!("max |V_ode − V_dp| = {worst} at probes"));
    out.finish(report)
}
