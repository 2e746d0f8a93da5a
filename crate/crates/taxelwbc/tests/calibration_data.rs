use std::path::PathBuf;

use taxelwbc::bundled;
use taxelwbc::cli::calibration_reports;
use taxelwbc_core::calib::{fit_linear, select_material};

/// Published reference rows: material, dx (mm), ds (counts), RMSE dx, RMSE ds.
const TABLE: [(&str, Option<f64>, f64, f64, f64); 4] = [
    ("PU Foam LD30", Some(11.4), 84.0, 4.064, 5.96),
    ("CC Foam", None, 70.0, 4.790, 11.32),
    ("PE Foam LD45 5mm", Some(3.0), 5.0, 1.612, 14.37),
    ("PE Foam LD45 3mm", Some(2.9), 4.0, 1.587, 17.91),
];

fn within(value: f64, target: f64, rel: f64) -> bool {
    ((value - target) / target).abs() <= rel
}

#[test]
fn bundled_sweeps_reproduce_table_anchors() {
    let reports = calibration_reports(&[]).unwrap();
    assert_eq!(reports.len(), 4);
    for ((name, dx, ds, rmse_dx, rmse_ds), r) in TABLE.iter().zip(&reports) {
        assert_eq!(r.material, *name);
        assert_eq!(r.max_force, 100.0);
        match dx {
            Some(dx) => assert!((r.max_deformation().unwrap() - dx).abs() < 1e-9, "{name}"),
            None => assert_eq!(r.max_deformation(), None, "{name}"),
        }
        assert_eq!(r.max_raw_variation, *ds, "{name}");
        let def = r.deformation_nrmse.unwrap();
        assert!(within(def, *rmse_dx, 0.05), "{name}: deformation RMSE {def} vs {rmse_dx}");
        assert!(within(r.raw_nrmse, *rmse_ds, 0.05), "{name}: raw RMSE {} vs {rmse_ds}", r.raw_nrmse);
    }
    assert_eq!(select_material(&reports).unwrap().material, "PU Foam LD30");
}

#[test]
fn sweep_files_on_disk_match_the_compiled_set() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/calibration");
    let files: Vec<PathBuf> = bundled::SWEEPS.iter().map(|(n, _)| dir.join(n)).collect();
    assert_eq!(calibration_reports(&files).unwrap(), calibration_reports(&[]).unwrap());
}

#[test]
fn every_sweep_is_a_full_loading_sweep() {
    for (material, samples) in bundled::sweeps() {
        let trials: std::collections::BTreeSet<u32> = samples.iter().map(|s| s.trial).collect();
        assert!(trials.len() >= 3, "{material}");
        for t in trials {
            let forces: Vec<f64> = samples.iter().filter(|s| s.trial == t).map(|s| s.force).collect();
            assert_eq!(forces.first(), Some(&0.0));
            assert_eq!(forces.last(), Some(&100.0));
            assert!(forces.windows(2).all(|w| w[1] > w[0]), "{material} trial {t}");
        }
        assert!(samples.iter().all(|s| s.raw >= 0.0 && s.raw.fract() == 0.0), "{material}: raw counts are integers");
    }
}

#[test]
fn shipped_calibration_line() {
    let cal = bundled::calibration();
    assert_eq!(cal.raw_to_force(84.0), 100.0);
    assert_eq!(cal.raw_to_force(0.0), 0.0);
    assert_eq!(cal.raw_to_force(42.0), 50.0);
    assert_eq!(cal.raw_to_force(200.0), 100.0);

    // the shipped line is the full-scale chord of the PU sweep, not its
    // least-squares fit; the two agree within a few percent
    let pu = &bundled::sweeps()[0].1;
    let fit = fit_linear(&pu.iter().map(|s| (s.force, s.raw)).collect::<Vec<_>>()).unwrap();
    assert!(((fit.slope - cal.slope) / cal.slope).abs() < 0.05, "fitted slope {}", fit.slope);
}
