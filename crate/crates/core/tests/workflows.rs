use rough_casimir::casimir::{self, Accuracy, Scenario};
use rough_casimir::experiment::{self, compare, comparison_csv, parse_dataset, rho_ratio};
use rough_casimir::roughness::{parse_height_field, synthesize_profile, write_height_field};
use rough_casimir::{CorrelationSpec, Error, PermittivityModel, Spectrum};

const PLASMA: PermittivityModel = PermittivityModel::Plasma { wp: 1.0 };

#[test]
fn height_field_round_trip() {
    let spec = CorrelationSpec::Exponential { sigma: 0.5, lc: 1.0 };
    let field = synthesize_profile(&spec, 256, 32.0, 11).unwrap();
    let back = parse_height_field(&write_height_field(&field)).unwrap();
    assert_eq!(back.nx, field.nx);
    assert_eq!(back.dx, field.dx);
    for (a, b) in field.data.iter().zip(&back.data) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-12));
    }
    assert_eq!(synthesize_profile(&spec, 256, 32.0, 11).unwrap(), field);
    assert_ne!(synthesize_profile(&spec, 256, 32.0, 12).unwrap(), field);
}

#[test]
fn limits_bracket_finite_correlation_lengths() {
    let a = 4.0;
    let acc = Accuracy::new(1e-6);
    let unc = casimir::uncorrelated_limit(&PLASMA, a, 0.0, 1.0, 1.0).unwrap();
    let big = casimir::large_correlation_limit(&PLASMA, a, 0.0, 1.0, 1.0, &acc).unwrap();
    let symbolic_lo = casimir::total_correction(&Scenario::new(PLASMA, CorrelationSpec::Uncorrelated { sigma: 1.0 }, a)).unwrap();
    let symbolic_hi = casimir::total_correction(&Scenario::new(PLASMA, CorrelationSpec::DeltaLimit { sigma: 1.0 }, a)).unwrap();
    assert!((symbolic_lo.total_correction / unc - 1.0).abs() < 1e-8);
    assert!((symbolic_hi.total_correction / big.total_correction - 1.0).abs() < 1e-8);
    for l in [0.5, 2.0] {
        let t = casimir::total_correction(&Scenario::new(PLASMA, CorrelationSpec::Gaussian { sigma: 1.0, lc: l }, a).with_accuracy(acc))
            .unwrap()
            .total_correction;
        assert!(unc.abs() < t.abs() && t.abs() < big.total_correction.abs());
    }
}

#[test]
fn finite_temperature_is_supported() {
    let spec = CorrelationSpec::Gaussian { sigma: 1.0, lc: 1.0 };
    let zero = casimir::total_correction(&Scenario::new(PLASMA, spec, 3.0).with_accuracy(Accuracy::new(1e-5))).unwrap();
    let warm = casimir::total_correction(
        &Scenario::new(PLASMA, spec, 3.0)
            .with_temperature(1e-3)
            .with_accuracy(Accuracy::new(1e-5)),
    )
    .unwrap();
    assert!((warm.total_correction / zero.total_correction - 1.0).abs() < 1e-2);
}

#[test]
fn affine_spec_runs_end_to_end() {
    let spec = CorrelationSpec::Affine { sigma: 1.0, lc: 1.0, s: 1.5 };
    spec.check().unwrap();
    let b = casimir::total_correction(&Scenario::new(PLASMA, spec, 3.0).with_accuracy(Accuracy::new(1e-5))).unwrap();
    assert!(b.total_correction < 0.0);
}

#[test]
fn experiment_preset_pipeline() {
    let cfg = experiment::preset("film-100nm").unwrap();
    assert!(cfg.calibration < 1.0);
    let r60 = rho_ratio(&cfg, 60.0).unwrap();
    let r120 = rho_ratio(&cfg, 120.0).unwrap();
    assert!(r60 > r120 && r120 > 1.0);
    let data = parse_dataset("separation_nm,force_pN\n60,300\n120,40\n", 1.0, "t").unwrap();
    let rows = compare(&cfg, &data).unwrap();
    let csv = comparison_csv(&rows);
    assert!(csv.starts_with("separation_nm,rho_model,rho_data,residual\n"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn errors_are_typed() {
    let bad = Scenario::new(PLASMA, CorrelationSpec::Gaussian { sigma: 1.0, lc: -1.0 }, 1.0);
    assert!(matches!(casimir::total_correction(&bad), Err(Error::Parameter(_))));
    let ideal_resp = casimir::response(&PermittivityModel::IdealMetal, 1.0, 0.0, 1.0, 0.5, &Accuracy::default());
    assert!(matches!(ideal_resp, Err(Error::Unsupported(_))));
}
