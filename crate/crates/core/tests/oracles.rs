use hcspinn::problems::{
    integrate_jerk, reference_oracle_ode, reference_oracle_pde, OdeTolerance, PdeOracleConfig,
    ProblemSpec, ReferenceSolution,
};

fn last_row_rel_l2(a: &ReferenceSolution, b: &ReferenceSolution) -> f64 {
    let ti = a.grid_t.len() - 1;
    let (ra, rb) = (a.row(ti), b.row(ti));
    let num: f64 = ra.iter().zip(rb).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = rb.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

#[test]
fn pde_oracles_self_converge_under_dt_halving() {
    for problem in [ProblemSpec::allen_cahn().unwrap(), ProblemSpec::kdv().unwrap()] {
        let coarse = reference_oracle_pde(&problem, 512, 1e-4).unwrap();
        let fine = reference_oracle_pde(&problem, 512, 5e-5).unwrap();
        let d = last_row_rel_l2(&coarse, &fine);
        assert!(d < 1e-6, "{}: {d:e}", problem.name());
        assert_eq!(coarse.grid_x.len(), 513);
        assert_eq!(coarse.grid_t.len(), 201);
    }
}

#[test]
fn kdv_oracle_conserves_mass() {
    let r = PdeOracleConfig::default().solve(&ProblemSpec::kdv().unwrap()).unwrap();
    let n = r.grid_x.len() - 1;
    let h = (r.grid_x[n] - r.grid_x[0]) / n as f64;
    let mass = |ti: usize| r.row(ti)[..n].iter().sum::<f64>() * h;
    let m0 = mass(0);
    for ti in 0..r.grid_t.len() {
        assert!((mass(ti) - m0).abs() < 1e-8, "t={} drift {:e}", r.grid_t[ti], mass(ti) - m0);
    }
}

#[test]
fn jerk_oracle_matches_under_tolerance_tightening() {
    let p = ProblemSpec::jerk().unwrap();
    let grid: Vec<f64> = (0..2001).map(|i| 50.0 * i as f64 / 2000.0).collect();
    let loose = integrate_jerk(&p, [0.0, 1.0, 1.0], &grid, OdeTolerance { rtol: 1e-10, atol: 1e-10 }).unwrap();
    let tight = integrate_jerk(&p, [0.0, 1.0, 1.0], &grid, OdeTolerance { rtol: 1e-12, atol: 1e-12 }).unwrap();
    let worst = loose
        .iter()
        .zip(&tight)
        .map(|(a, b)| (a[0] - b[0]).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-5, "{worst:e}");

    let r = reference_oracle_ode(&p, &grid).unwrap();
    assert_eq!(r.value(0, 0), 0.0);
    assert!(r.grid_x.is_empty());
}
