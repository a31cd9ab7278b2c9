use geotherm::assembly::PhysicalParams;
use geotherm::mcm::{run_mc, McAggregate, McOptions, McPlan, SamplerSpec};
use geotherm::randfield::sample_constant;
use geotherm::stepper::{run_sample, RunConfig};
use geotherm::verify::{build_constant_k_problem, error_norms, spatial_rates};

fn errors_at(level: usize) -> [f64; 4] {
    let cfg = RunConfig::new(PhysicalParams::default(), 0.0025, 0.01, level);
    let problem = build_constant_k_problem(2.21, 1.0);
    let sample = sample_constant(2.21).unwrap();
    let (state, diags) = run_sample(&cfg, &sample, &problem).unwrap();
    assert_eq!(diags.len(), 5);
    assert!((state.t - 0.01).abs() < 1e-14);
    error_norms(&cfg.spaces().unwrap(), &state, &problem, state.t).table_l2()
}

#[test]
fn manufactured_errors_fall_under_refinement() {
    let coarse = errors_at(4);
    let fine = errors_at(8);
    for f in 0..4 {
        let r = spatial_rates(&[0.25, 0.125], &[coarse[f], fine[f]]).unwrap()[0];
        assert!(r > 1.5, "field {f}: {coarse:?} -> {fine:?}");
    }
}

#[test]
fn plan_survives_json_and_resumes_from_disk() {
    let plan = McPlan {
        samples: 3,
        base_seed: 41,
        sampler: SamplerSpec::AffineUniform { sigma: 0.2 },
        run: RunConfig::new(PhysicalParams::default(), 0.01, 0.02, 2),
        amplitude: 1.0,
    };
    let json = serde_json::to_string(&plan).unwrap();
    let back: McPlan = serde_json::from_str(&json).unwrap();
    assert_eq!(back.hash(), plan.hash());

    let dir = tempfile::tempdir().unwrap();
    let opts = McOptions {
        jobs: 2,
        records_dir: Some(dir.path().to_path_buf()),
    };
    let first = run_mc(&plan, &opts).unwrap();
    let second = run_mc(&back, &opts).unwrap();
    assert_eq!(first, second);
    assert_eq!(
        McAggregate::from_records(&second.records).unwrap(),
        first.aggregate
    );
    let stored = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "csv")
        })
        .count();
    assert_eq!(stored, 3);
}
