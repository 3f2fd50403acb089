use powerforest::baselines::fit_ols_design;
use powerforest::pipeline::{build_design_from_raw, ingest_reader, SOURCE_VARIABLES};
use powerforest::synth::{generate, generate_with_trace, ground_truth};
use powerforest::{
    FeatureSpec, ForestModel, Hyperparameters, ScenarioSpec, Target, PREDICTOR_NAMES,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn design_rows_equal_generator_features() {
    let spec = ScenarioSpec {
        horizon: 600,
        seed: 11,
        ..Default::default()
    };
    let (panel, trace) = generate_with_trace(&spec).unwrap();
    let design = build_design_from_raw(&panel, &FeatureSpec::default(), Target::Base, 100).unwrap();
    let offset = panel.len() - design.len();
    assert_eq!(offset, 44);
    let mu = spec.long_run_price.ln();
    for r in 0..design.len() {
        let t = r + offset;
        assert_eq!(design.dates[r], panel.dates()[t]);
        let x = trace.features[t].unwrap();
        for j in 0..12 {
            assert!(
                close(design.x.get(r, j), x[j], 1e-9),
                "row {r} {}: {} vs {}",
                PREDICTOR_NAMES[j],
                design.x.get(r, j),
                x[j]
            );
        }
        let prev = trace.log_price[t - 22];
        let change = spec.kappa * (mu - prev) + trace.planted[t] + trace.shock[t];
        assert!(close(design.y[r], change, 1e-9), "row {r}");
        assert!(close(
            trace.planted[t],
            ground_truth(&spec, &x) - spec.jump_intensity * spec.jump_mean,
            1e-12
        ));
    }
}

#[test]
fn generated_csv_ingests_unchanged() {
    let panel = generate(&ScenarioSpec {
        horizon: 250,
        ..Default::default()
    })
    .unwrap();
    let mut buf = Vec::new();
    panel.write_csv(&mut buf).unwrap();
    let back = ingest_reader(buf.as_slice(), &SOURCE_VARIABLES).unwrap();
    assert_eq!(back, panel);
}

#[test]
fn ground_truth_matches_second_implementation() {
    let spec = ScenarioSpec {
        intercept: 0.01,
        jump_mean: 0.05,
        ..Default::default()
    };
    let beta = |name: &str| match name {
        "permit" => 0.5,
        "oil" => 0.25,
        "coal" => 0.2,
        "natgas" => 1.2,
        "qwind" => -0.03,
        "reversal" => -0.6,
        _ => 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let point: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut want = 0.01 + 0.01 * 0.05 + 12.0 * point[0] * point[3];
        for (name, v) in PREDICTOR_NAMES.iter().zip(&point) {
            want += beta(name) * v;
        }
        assert!(close(ground_truth(&spec, &point), want, 1e-12));
    }
}

#[test]
fn ols_recovers_planted_natgas_coefficient() {
    for seed in 1..=3 {
        let mut spec = ScenarioSpec {
            horizon: 2644,
            interaction: 0.0,
            seed,
            ..Default::default()
        };
        spec.coefficients[3] = 0.5;
        let design = build_design_from_raw(
            &generate(&spec).unwrap(),
            &FeatureSpec::default(),
            Target::Base,
            100,
        )
        .unwrap();
        assert_eq!(design.len(), 2600);
        let fit = fit_ols_design(&design).unwrap();
        let b = fit.coefficient("natgas").unwrap();
        assert!((b - 0.5).abs() <= 0.1, "seed {seed}: natgas {b}");
    }
}

#[test]
fn pure_noise_drivers_get_small_importance() {
    let spec = ScenarioSpec {
        horizon: 2100,
        seed: 3,
        ..Default::default()
    };
    let design = build_design_from_raw(
        &generate(&spec).unwrap(),
        &FeatureSpec::default(),
        Target::Base,
        100,
    )
    .unwrap();
    let hyper = Hyperparameters {
        n_trees: 500,
        ..Default::default()
    };
    let imp = ForestModel::fit_design(&design, &hyper)
        .unwrap()
        .importance()
        .unwrap();
    for name in ["i", "vix", "cpi", "temp", "suntime", "day_week"] {
        let v = imp.get(name).unwrap();
        assert!(v < 1.5 / 12.0, "{name}: {v}");
    }
}
