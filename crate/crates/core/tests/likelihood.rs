use gm_exponent::model::random_stable_model;
use gm_exponent::sim::{
    llr_direct, llr_innovations, simulate_llrs, simulate_trajectory, InnovationsFilter,
};
use gm_exponent::{
    error_exponent_closed, innovation_variances, Hypothesis, Model, Purpose, ScalarModel,
    StreamFamily,
};

#[test]
fn vector_llr_matches_dense_oracle() {
    let fam = StreamFamily::new(11, Purpose::Trajectory, 1);
    for seed in 0..10u64 {
        let m: Model = random_stable_model(seed, 1 + seed as usize % 4, 2, 0.85)
            .unwrap()
            .into();
        for (i, hyp) in [Hypothesis::H0, Hypothesis::H1].into_iter().enumerate() {
            let t = simulate_trajectory(&m, hyp, 48, fam.stream(2 * seed + i as u64)).unwrap();
            let fast = llr_innovations(&m, &t);
            let dense = llr_direct(&m, &t).unwrap();
            assert!(
                (fast - dense).abs() <= 1e-8 * dense.abs().max(1.0),
                "seed {seed}: {fast} vs {dense}"
            );
        }
    }
}

#[test]
fn degenerate_model_llr_matches_dense_oracle() {
    let m: Model = ScalarModel::from_snr(1.0, 2.0).unwrap().into();
    let t = simulate_trajectory(
        &m,
        Hypothesis::H1,
        40,
        StreamFamily::new(3, Purpose::Trajectory, 0).stream(0),
    )
    .unwrap();
    let fast = llr_innovations(&m, &t);
    let dense = llr_direct(&m, &t).unwrap();
    assert!((fast - dense).abs() <= 1e-8 * dense.abs().max(1.0));
}

#[test]
fn normalized_llr_under_h0_tends_to_minus_k() {
    let n = 10_000;
    for (a, g) in [(0.5, 1.0), (0.0, 10.0), (0.9, 0.5)] {
        let m: Model = ScalarModel::from_snr(a, g).unwrap().into();
        let k = error_exponent_closed(&m).unwrap();
        let vals: Vec<f64> = simulate_llrs(
            &m,
            Hypothesis::H0,
            n,
            100,
            StreamFamily::new(5, Purpose::Trajectory, 2),
        )
        .into_iter()
        .map(|l| l / n as f64)
        .collect();
        let mean = vals.iter().sum::<f64>() / 100.0;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 99.0).sqrt();
        let se = sd / 10.0;
        assert!(
            (mean + k).abs() < 3.0 * se,
            "a={a} Γ={g}: mean {mean}, -K {}, se {se}",
            -k
        );
    }
}

#[test]
fn innovation_variance_schedule_reaches_steady_state() {
    for a in [0.0, 0.3, 0.6, 0.9] {
        for g in [0.1, 1.0, 10.0] {
            let m: Model = ScalarModel::from_snr(a, g).unwrap().into();
            let f = InnovationsFilter::new(&m, 1000);
            let re = innovation_variances(&m).unwrap().re;
            assert!((f.innovation_variance(1000) - re).abs() < 1e-9);
            for i in 2..=1000 {
                assert!(f.innovation_variance(i) <= f.innovation_variance(i - 1));
            }
        }
    }
}

#[test]
fn whitened_innovations_are_white_under_h1() {
    let m: Model = ScalarModel::from_snr(0.8, 2.0).unwrap().into();
    let t = simulate_trajectory(
        &m,
        Hypothesis::H1,
        200_000,
        StreamFamily::new(8, Purpose::Trajectory, 0).stream(0),
    )
    .unwrap();
    let f = InnovationsFilter::new(&m, t.samples.len());
    let mut norm = Vec::with_capacity(t.samples.len());
    f.for_each_innovation(&t.samples, |i, e, re| {
        if i >= 1000 {
            norm.push(e / re.sqrt());
        }
    });
    let n = norm.len() as f64;
    let var = norm.iter().map(|x| x * x).sum::<f64>() / n;
    let lag1 = norm.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / n;
    assert!((var - 1.0).abs() < 0.02, "{var}");
    assert!(lag1.abs() < 0.01, "{lag1}");
}
