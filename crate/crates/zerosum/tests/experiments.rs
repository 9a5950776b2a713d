use zerosum::config::Config;
use zerosum::runner::{self, Command, Settings};

fn settings(text: &str) -> Settings {
    Settings::new(Config::parse(text).unwrap()).unwrap()
}

#[test]
fn disparity_zero_matches_baseline_zs() {
    let short = "pattern = \"typical\"\n[run]\nanalyzed_ui = 24\n";
    let base = runner::execute(
        Command::Baseline,
        &settings(&format!("architecture = \"ZS\"\n{short}")),
        None,
    )
    .unwrap();
    let sweep = runner::execute(
        Command::DisparitySweep,
        &settings(&format!("disparity = 0\n{short}")),
        None,
    )
    .unwrap();
    assert_eq!(base.rows(), sweep.rows());
}

#[test]
fn bus_layouts_stay_within_a_band() {
    let r = runner::execute(Command::BusSize, &settings(""), None).unwrap();
    let means: Vec<f64> = r.results.iter().map(|c| c.summary.mean).collect();
    assert_eq!(means.len(), 3);
    let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = means.iter().copied().fold(0.0, f64::max);
    assert!(hi <= 1.2 * lo, "{means:?}");
}

#[test]
fn waveform_files_are_byte_identical() {
    let cfg = "architecture = \"SE\"\npattern = \"worst\"\ndata_bits = 8\n\
               save_waveforms = \"all\"\n[run]\nanalyzed_ui = 16\n";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    runner::execute(Command::Baseline, &settings(cfg), Some(a.path())).unwrap();
    runner::execute(Command::Baseline, &settings(cfg), Some(b.path())).unwrap();
    let name = "baseline/waveforms/se_worst_16g_1x8.tsv";
    let x = std::fs::read(a.path().join(name)).unwrap();
    assert!(!x.is_empty());
    assert_eq!(x, std::fs::read(b.path().join(name)).unwrap());
}

#[test]
fn undersized_groups_fail_before_running() {
    let s = settings("group_layout = \"4x10\"\n");
    let e = runner::execute(Command::BusSize, &s, None).unwrap_err();
    assert_eq!(e.exit_code(), 2, "{e}");
}
