use corbin::{
    conditional_variance_check, conditional_variance_line, enumerate_joint, gof_check,
    regression_check, regression_line, run_verification, sample_batch, solve_cell_probs,
    RngStream, TargetSpec, Thresholds,
};

const DRAWS: usize = 1_000_000;

fn share_within(check: &corbin::BinCheck, z: f64) -> f64 {
    let ok = check.bins.iter().filter(|b| b.z.abs() < z).count();
    ok as f64 / check.bins.len() as f64
}

#[test]
fn bin_checks_on_independence_and_worked_example() {
    for (seed, spec) in [
        (1, TargetSpec::new(20, 0.3, 0.6, 0.0).unwrap()),
        (2, TargetSpec::new(20, 0.3, 0.6, 0.4).unwrap()),
    ] {
        let cells = solve_cell_probs(&spec).unwrap();
        let line = regression_line(spec.n, &cells).unwrap();
        let var = conditional_variance_line(spec.n, &cells).unwrap();
        let samples = sample_batch(&mut RngStream::new(seed, 0), &spec, DRAWS).unwrap();

        let reg = regression_check(&samples, &line, &var, 30, 4.0);
        assert!(!reg.bins.is_empty());
        assert!(share_within(&reg, 3.5) >= 0.99, "{reg:#?}");
        if spec.r == 0.0 {
            for b in &reg.bins {
                assert!((b.predicted - 6.0).abs() < 1e-12);
            }
        }
        let vc = conditional_variance_check(&samples, spec.n, &var, 30, 4.0);
        assert!(share_within(&vc, 4.0) >= 0.98, "{vc:#?}");
    }
}

#[test]
fn gof_self_consistency_and_power() {
    let truth = TargetSpec::new(6, 0.3, 0.4, 0.5).unwrap();
    let independent = TargetSpec::new(6, 0.3, 0.4, 0.0).unwrap();
    let wrong = TargetSpec::new(6, 0.3, 0.4, 0.4).unwrap();
    let pmf_truth = enumerate_joint(6, &solve_cell_probs(&truth).unwrap()).unwrap();
    let pmf_wrong = enumerate_joint(6, &solve_cell_probs(&wrong).unwrap()).unwrap();

    let samples = sample_batch(&mut RngStream::new(10, 0), &truth, DRAWS).unwrap();
    let g = gof_check(&samples, &pmf_truth).unwrap();
    assert!(g.p_value > 0.001, "{g:?}");
    assert!(gof_check(&samples, &pmf_wrong).unwrap().p_value < 1e-6);

    let indep_samples = sample_batch(&mut RngStream::new(11, 0), &independent, DRAWS).unwrap();
    assert!(gof_check(&indep_samples, &pmf_wrong).unwrap().p_value < 1e-6);
}

#[test]
fn self_consistency_over_default_grid() {
    let grid = [
        (6, 0.3, 0.4, 0.5),
        (1, 0.5, 0.5, 1.0),
        (3, 0.2, 0.7, 0.1),
        (10, 0.5, 0.5, 0.0),
        (15, 0.1, 0.2, 0.6),
        (20, 0.3, 0.6, 0.4),
        (25, 0.9, 0.8, 0.5),
        (30, 0.45, 0.55, 0.8),
        (40, 0.05, 0.5, 0.2),
        (50, 0.6, 0.6, 0.95),
        (8, 0.7, 0.4, 0.3),
    ];
    for (i, &(n, a, b, r)) in grid.iter().enumerate() {
        let spec = TargetSpec::new(n, a, b, r).unwrap();
        let report = run_verification(&spec, 200_000, 1000 + i as u64, &Thresholds::default()).unwrap();
        assert!(report.passed, "spec {spec:?} failed: {report:#?}");
        assert_eq!(report.gof.is_some(), n <= 40);
    }
}

#[test]
fn full_stack_example_passes() {
    let spec = TargetSpec::new(6, 0.3, 0.4, 0.5).unwrap();
    let report = run_verification(&spec, DRAWS, 7, &Thresholds::default()).unwrap();
    assert!(report.passed, "{report:#?}");
}
