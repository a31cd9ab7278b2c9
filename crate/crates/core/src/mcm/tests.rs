use proptest::prelude::*;

use super::*;
use crate::assembly::PhysicalParams;
use crate::randfield::affine_from_draws;
use crate::stepper::run_sample;

fn plan(samples: usize, sigma: f64) -> McPlan {
    McPlan {
        samples,
        base_seed: 7,
        sampler: SamplerSpec::AffineUniform { sigma },
        run: RunConfig::new(PhysicalParams::default(), 0.01, 0.02, 2),
        amplitude: 1.0,
    }
}

fn record(j: usize, scale: f64) -> SampleRecord {
    SampleRecord {
        j,
        seed: 1,
        k_min: 2.9,
        k_max: 2.9,
        lambda: Some([0.1, -0.2]),
        l2: std::array::from_fn(|i| scale * (i + 1) as f64),
        energy: std::array::from_fn(|i| scale * (i + 2) as f64 * 0.1),
        hdiv_up: scale,
    }
}

#[test]
fn rms_examples() {
    assert_eq!(estimate_rms(&[1.0, 16.0, 64.0]).unwrap(), 27f64.sqrt());
    assert_eq!(estimate_rms(&[9.0]).unwrap(), 3.0);
    assert_eq!(estimate_rms(&[0.25; 5]).unwrap(), 0.5);
    assert_eq!(estimate_rms(&[]), Err(EstimateError::Empty));
    assert_eq!(
        estimate_rms(&[1.0, -1.0]),
        Err(EstimateError::NegativeSquare(-1.0))
    );
}

#[test]
fn mean_field_examples() {
    let v = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
    assert_eq!(estimate_mean_field(&v).unwrap(), vec![3.0, 4.0]);
    assert_eq!(estimate_mean_field(&v[..1]).unwrap(), vec![1.0, 2.0]);
    let w = vec![vec![0.3, -1.7, 2.5], vec![-0.3, 1.7, -2.5]];
    assert_eq!(estimate_mean_field(&w).unwrap(), vec![0.0; 3]);
    assert_eq!(
        estimate_mean_field(&[vec![1.0], vec![1.0, 2.0]]),
        Err(EstimateError::LengthMismatch {
            index: 1,
            expected: 1,
            found: 2
        })
    );
    assert_eq!(estimate_mean_field(&[]), Err(EstimateError::Empty));
}

#[test]
fn record_rows_round_trip_exactly() {
    let mut r = record(3, 1.0 / 3.0);
    r.l2[2] = 1.234_567_890_123_456_7e-17;
    assert_eq!(SampleRecord::parse_row(&r.csv_row()).unwrap(), r);
    r.lambda = None;
    let row = r.csv_row();
    assert_eq!(row.split(',').count(), RECORD_HEADER.split(',').count());
    assert_eq!(SampleRecord::parse_row(&row).unwrap(), r);
    assert!(SampleRecord::parse_row("1,2,3").is_err());
}

#[test]
fn aggregate_is_recomputable_and_order_free() {
    let p = plan(4, 0.1);
    let recs: Vec<_> = (0..4).map(|j| record(j, 1.0 + j as f64 * 0.37)).collect();
    let a = assemble_result(&p, recs.clone()).unwrap();
    let mut shuffled = recs.clone();
    shuffled.reverse();
    shuffled.swap(0, 2);
    assert_eq!(assemble_result(&p, shuffled).unwrap(), a);
    let again = McAggregate::from_records(&a.records).unwrap();
    assert!((again.l2[0] - a.aggregate.l2[0]).abs() <= 1e-14);
    assert!(assemble_result(&p, recs[..3].to_vec()).is_err());
}

#[test]
fn single_sample_estimator_is_that_sample() {
    let p = plan(1, 0.2);
    let res = run_mc(&p, &McOptions::default()).unwrap();
    let r = &res.records[0];
    assert_eq!(res.aggregate.l2, r.l2);
    assert_eq!(res.aggregate.energy, r.energy);
    assert_eq!(res.metadata.samples, 1);
    assert_eq!(res.metadata.config_hash, p.hash());
}

#[test]
fn zero_spread_collapses_to_deterministic_run() {
    let p = plan(3, 0.0);
    let res = run_mc(&p, &McOptions::default()).unwrap();
    let problem = build_affine_k_problem([0.0, 0.0], 0.0, 1.0);
    let (st, _) = run_sample(&p.run, &affine_from_draws(0.0, [0.0, 0.0]), &problem).unwrap();
    let spaces = p.run.spaces().unwrap();
    let det = error_norms(&spaces, &st, &problem, st.t);
    for i in 0..6 {
        assert!((res.aggregate.l2[i] - det.l2[i]).abs() <= 1e-12 * det.l2[i].max(1.0));
        assert!((res.aggregate.energy[i] - det.energy[i]).abs() <= 1e-12 * det.energy[i].max(1.0));
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let p = plan(4, 0.3);
    let one = run_mc(
        &p,
        &McOptions {
            jobs: 1,
            ..Default::default()
        },
    )
    .unwrap();
    let many = run_mc(
        &p,
        &McOptions {
            jobs: 3,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(one, many);
    let lambdas: Vec<_> = one.records.iter().map(|r| r.lambda.unwrap()).collect();
    assert!(lambdas.windows(2).all(|w| w[0] != w[1]));
}

#[test]
fn resumes_from_stored_records() {
    let dir = tempfile::tempdir().unwrap();
    let p = plan(3, 0.3);
    let opts = McOptions {
        jobs: 1,
        records_dir: Some(dir.path().to_path_buf()),
    };
    let full = run_mc(&p, &opts).unwrap();
    // a doctored record proves the stored row is reused rather than recomputed
    let mut fake = full.records[1].clone();
    fake.l2[0] = 42.0;
    fs::write(
        record_path(dir.path(), 1),
        format!("{RECORD_HEADER}\n{}\n", fake.csv_row()),
    )
    .unwrap();
    let resumed = run_mc(&p, &opts).unwrap();
    assert_eq!(resumed.records[1].l2[0], 42.0);
    assert_eq!(resumed.records[0], full.records[0]);
    // a missing record is recomputed
    fs::remove_file(record_path(dir.path(), 1)).unwrap();
    assert_eq!(run_mc(&p, &opts).unwrap(), full);
    // records of another plan are refused
    assert!(matches!(
        run_mc(&plan(3, 0.2), &opts),
        Err(McError::InvalidPlan(_))
    ));
}

#[test]
fn failing_sample_is_named() {
    let mut p = plan(2, 0.1);
    p.sampler = SamplerSpec::AffineUniform { sigma: 2.0 };
    match run_mc(&p, &McOptions::default()) {
        Err(McError::Sample { j, .. }) => assert_eq!(j, 0),
        other => panic!("unexpected {other:?}"),
    }
    p.sampler = SamplerSpec::KlField {
        a0: 3.0,
        sigma: 0.1,
        n_f: 2,
        l_c: 0.5,
    };
    assert!(run_mc(&p, &McOptions::default()).is_err());
    assert!(plan(0, 0.1).validate().is_err());
}

#[test]
fn plan_json_rejects_unknown_fields() {
    let p = plan(2, 0.1);
    let json = serde_json::to_string(&p).unwrap();
    assert_eq!(serde_json::from_str::<McPlan>(&json).unwrap(), p);
    let extra = json.replacen('{', "{\"bogus\":1,", 1);
    assert!(serde_json::from_str::<McPlan>(&extra).is_err());
}

proptest! {
    #[test]
    fn rms_of_equal_squares_is_the_value(v in 0.0f64..1e3, n in 1usize..50) {
        let r = estimate_rms(&vec![v * v; n]).unwrap();
        prop_assert!((r - v).abs() <= 1e-12 * v.max(1.0));
    }

    #[test]
    fn rms_is_permutation_invariant(mut xs in prop::collection::vec(0.0f64..10.0, 1..20), seed in any::<u64>()) {
        let a = estimate_rms(&xs).unwrap();
        let k = (seed as usize) % xs.len();
        xs.rotate_left(k);
        xs.reverse();
        let b = estimate_rms(&xs).unwrap();
        prop_assert!((a - b).abs() <= 1e-14 * a.max(1.0));
    }
}
