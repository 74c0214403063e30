//! Config file to fitted numbers, through the public API only.

use std::path::PathBuf;

use cptsim::cpt::cpt_scan_1d;
use cptsim::fitting::{fit_bloch_model, fit_lorentzian_dip, r_squared, BlochFitOptions};
use cptsim::io::{inject_noise, load_config, parse_config};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_are_canonical() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let cfg = load_config(&path).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.to_json(), text, "{}", path.display());
        seen += 1;
    }
    assert!(seen >= 5);
}

#[test]
fn scan_then_fit_recovers_width_and_decoherence() {
    let cfg = load_config(&configs().join("fig3c.json")).unwrap();
    let sys = cfg.lambda_setup().unwrap().lambda_at(cfg.field).unwrap();
    let scan = cpt_scan_1d(&sys, &cfg.grids.detuning.values()).unwrap();
    let trace = scan.trace().unwrap();

    let dip = fit_lorentzian_dip(&trace).unwrap();
    let (w, _) = dip.fwhm.unwrap();
    assert!((w - 12.1).abs() < 0.5, "fwhm {w}");
    assert!(r_squared(&trace.y, &dip.fitted) > 0.99);

    let bloch = fit_bloch_model(&trace, &sys, &BlochFitOptions::default()).unwrap();
    let (g, _) = bloch.gamma_g.unwrap();
    assert!((g - cfg.rates.gamma_g).abs() < 0.2e6, "gamma_g {g}");
    assert!((bloch.t2_star.unwrap() - 1.0 / g).abs() < 1e-15);
}

#[test]
fn noisy_scan_still_fits() {
    let cfg = load_config(&configs().join("fig3c.json")).unwrap();
    let sys = cfg.lambda_setup().unwrap().lambda_at(cfg.field).unwrap();
    let trace = cpt_scan_1d(&sys, &cfg.grids.detuning.values())
        .unwrap()
        .trace()
        .unwrap();
    let noisy = inject_noise(&trace, 0.01, 11).unwrap();
    let (w, _) = fit_lorentzian_dip(&noisy).unwrap().fwhm.unwrap();
    assert!((w - 12.1).abs() < 0.02 * 12.1, "fwhm {w}");
}

#[test]
fn config_overrides_flow_into_the_lambda_system() {
    let base = load_config(&configs().join("fig3c.json")).unwrap();
    let mut text = base.to_json();
    text = text.replacen("\"gamma_g\": 4000000.0", "\"gamma_g\": 8000000.0", 1);
    let cfg = parse_config(&text, "inline").unwrap();
    assert_eq!(cfg.rates.gamma_g, 8e6);
    let sys = cfg.lambda_setup().unwrap().lambda_at(cfg.field).unwrap();
    assert_eq!(sys.rates.gamma_g, 8e6);
}
