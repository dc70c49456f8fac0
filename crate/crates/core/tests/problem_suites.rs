//! Cross-module properties of the benchmark problems that go beyond single
//! operations: long-run invariants and structural behavior.

use spsg::config::RunConfig;
use spsg::diagnostics::l1_relative_error;
use spsg::runner::run;

fn resolved(json: &str) -> spsg::config::Resolved {
    RunConfig::from_json(json).unwrap().resolve().unwrap()
}

#[test]
fn advected_background_prevents_a_steady_state() {
    // the moving background keeps dragging the solution: states at T=15 and
    // T=20 stay measurably apart while the mass is pinned
    let cfg = resolved(
        r#"{"problem": "advected", "grid": {"n": 41}, "gpc": {"order": 3},
            "final_time": 20.0, "output_every": 100000}"#,
    );
    let result = run(&cfg, None, &[15.0]).unwrap();
    let at_15 = &result.captures[0];
    let at_20 = &result.final_field;
    let distance = l1_relative_error(at_20.mean().as_slice(), at_15.mean().as_slice()).unwrap();
    assert!(distance > 1e-3, "states nearly identical: {distance:.3e}");
    assert!(result.mass_drift <= 1e-12);
}

#[test]
fn frozen_run_l1_error_decreases_monotonically() {
    let cfg = resolved(
        r#"{"problem": "opinion", "grid": {"n": 41}, "gpc": {"order": 3},
            "quadrature": {"kind": "gauss"}, "scheme": "rk4",
            "final_time": 15.0, "output_every": 50}"#,
    );
    let result = run(&cfg, None, &[]).unwrap();
    let mut previous = f64::INFINITY;
    for rec in &result.series {
        let err = rec.l1_errors[0];
        assert!(
            err <= previous * (1.0 + 1e-12),
            "L1 error grew from {previous:.3e} to {err:.3e} at t = {}",
            rec.t
        );
        previous = err;
    }
}

#[test]
fn l2_norm_stays_bounded_over_long_runs() {
    let cfg = resolved(
        r#"{"problem": "opinion", "grid": {"n": 41}, "gpc": {"order": 5},
            "final_time": 25.0, "output_every": 100}"#,
    );
    let result = run(&cfg, None, &[]).unwrap();
    let initial = result.series[0].l2;
    for rec in &result.series {
        assert!(rec.l2.is_finite());
        assert!(rec.l2 <= 10.0 * initial, "L2 norm blew up: {}", rec.l2);
    }
}

#[test]
fn rk4_handles_the_evolving_background() {
    // stage workspaces re-evaluate the advected background mid-step
    let cfg = resolved(
        r#"{"problem": "advected", "grid": {"n": 21}, "gpc": {"order": 2},
            "scheme": "rk4", "dt": {"policy": "explicit_bound"},
            "final_time": 0.5, "output_every": 100000}"#,
    );
    let result = run(&cfg, None, &[]).unwrap();
    assert!(result.mass_drift <= 1e-13);
    assert!(result.final_field.mean().iter().all(|x| x.is_finite()));
}

#[test]
fn semi_implicit_second_order_in_time() {
    // dt-halving on the advected problem at fixed grid: the defect against
    // the finest run shrinks by about four per halving
    let base = r#"{"problem": "advected", "grid": {"n": 31}, "gpc": {"order": 2},
        "final_time": 1.0, "output_every": 100000,
        "dt": {"policy": "fixed", "value": DT}}"#;
    let mut finals = Vec::new();
    for dt in [0.02, 0.01, 0.005, 0.0025] {
        let cfg = resolved(&base.replace("DT", &format!("{dt}")));
        finals.push(run(&cfg, None, &[]).unwrap().final_field);
    }
    let reference = finals.last().unwrap();
    let errors: Vec<f64> = finals[..finals.len() - 1]
        .iter()
        .map(|f| l1_relative_error(f.mean().as_slice(), reference.mean().as_slice()).unwrap())
        .collect();
    let order1 = (errors[0] / errors[1]).log2();
    assert!(
        order1 > 1.6,
        "observed time order {order1:.3} (errors {errors:?})"
    );
}
