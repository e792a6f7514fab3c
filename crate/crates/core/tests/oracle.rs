//! Monte Carlo truth checked against values computed independently with numpy
//! (10^7 covariate draws, seed 20240607, principal-score shift 1).

use pce::simulation::{true_pce, DgpKind, DgpSpec, Scenario};

const NUMPY_DRAWS: f64 = 1e7;
const DRAWS: usize = 1_000_000;

fn frozen(ps: bool, om: bool) -> [f64; 3] {
    match (ps, om) {
        (true, true) => [0.1246439316, 0.0623496761, 0.0623496761],
        (true, false) => [-0.1564608040, -0.0199558524, -0.0199558524],
        (false, true) => [0.0859484814, 0.0760876652, 0.0760876652],
        (false, false) => [-0.2153732703, 0.0010792884, 0.0010792884],
    }
}

const TILTED: [f64; 3] = [0.1433452684, 0.0755433227, 0.0227438483];

fn check(spec: &DgpSpec, expected: [f64; 3]) {
    let t = true_pce(spec, DRAWS, 31).unwrap();
    let got = [t.tau.s10, t.tau.s00, t.tau.s11];
    let se = [t.se.s10, t.se.s00, t.se.s11];
    for i in 0..3 {
        let combined = se[i] * (1.0 + DRAWS as f64 / NUMPY_DRAWS).sqrt();
        let z = (got[i] - expected[i]).abs() / combined;
        assert!(z < 4.0, "{:?}: stratum {i} got {} expected {} (z = {z:.2})", spec.scenario, got[i], expected[i]);
    }
}

#[test]
fn standard_design_matches_numpy() {
    for s in Scenario::all() {
        check(&DgpSpec::new(s, 500, 0), frozen(s.ps, s.om));
    }
}

#[test]
fn tilted_design_matches_numpy() {
    let spec = DgpSpec::new(Scenario::ALL_YES, 500, 0).with_kind(DgpKind::Tilted { eps1: 1.5, eps0: 1.5 });
    check(&spec, TILTED);
}

#[test]
fn correct_design_is_close_to_closed_form() {
    let t = true_pce(&DgpSpec::new(Scenario::ALL_YES, 500, 0), DRAWS, 5).unwrap();
    for (got, want) in [(t.tau.s10, 0.125), (t.tau.s00, 0.0625), (t.tau.s11, 0.0625)] {
        assert!((got - want).abs() < 0.01, "{got} vs {want}");
    }
}
