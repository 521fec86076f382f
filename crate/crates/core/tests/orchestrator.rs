use std::path::Path;

use alphasoft::dsp::Calibration;
use alphasoft::orchestrator::*;
use alphasoft::signal_source::{Eyes, Scenario};

fn config(dir: &Path, embodiment: Embodiment) -> RunConfig {
    RunConfig {
        embodiment,
        output_dir: dir.to_owned(),
        ..RunConfig::default()
    }
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn data_rows(dir: &Path, name: &str) -> Vec<Vec<String>> {
    read(dir, name)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn flower_run_logs_pressure_at_100_hz_for_70_s() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&config(dir.path(), Embodiment::Flower)).unwrap();
    let rows = data_rows(dir.path(), PRESSURE_TRACE_CSV);
    assert_eq!(rows.len(), 7000);
    assert_eq!(rows[0][0], "0.000");
    assert_eq!(rows[6999][0], "69.990");
    assert_eq!(report.flower.unwrap().trace_rows, 7000);
    assert!(!dir.path().join(CHARACTER_TRACE_CSV).exists());
}

#[test]
fn character_run_updates_duty_69_times() {
    // frames end at samples 499, 749, ..., 17499: (17499 - 499) / 250 + 1
    let expected = (17_499 - 499) / 250 + 1;
    let dir = tempfile::tempdir().unwrap();
    let report = run(&config(dir.path(), Embodiment::Character)).unwrap();
    let rows = data_rows(dir.path(), CHARACTER_COMMANDS_CSV);
    assert_eq!(rows.len(), expected);
    assert_eq!(rows[0][0], "1.996");
    assert_eq!(report.character.unwrap().updates, expected as u64);
    assert_eq!(report.frames_emitted, expected as u64);
}

#[test]
fn flower_commands_every_fifth_reading() {
    let dir = tempfile::tempdir().unwrap();
    run(&config(dir.path(), Embodiment::Both)).unwrap();
    let alpha = data_rows(dir.path(), ALPHA_CSV);
    let flower = data_rows(dir.path(), FLOWER_COMMANDS_CSV);
    let expected: Vec<&String> = alpha.iter().step_by(5).map(|r| &r[0]).collect();
    let got: Vec<&String> = flower.iter().map(|r| &r[0]).collect();
    assert_eq!(got, expected);
}

#[test]
fn report_counts_match_csv_rows_and_files_exist() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&config(dir.path(), Embodiment::Both)).unwrap();
    for f in &report.files {
        let text = read(dir.path(), &f.name);
        assert!(!text.is_empty(), "{} is empty", f.name);
        if f.name.ends_with(".csv") {
            assert_eq!(text.lines().count() as u64 - 1, f.rows, "{}", f.name);
        }
    }
    assert_eq!(report.file(ALPHA_CSV).unwrap().rows, report.frames_emitted);
    assert_eq!(report.file(PSD_CSV).unwrap().rows, report.frames_emitted * 251);
    assert_eq!(report.file(EEG_RAW_CSV).unwrap().rows, report.samples);
    let gated = data_rows(dir.path(), ALPHA_CSV).iter().filter(|r| r[3] == "1").count() as u64;
    assert_eq!(report.alpha_events, gated);
    let seg_frames: u64 = report.segments.iter().map(|s| s.frames).sum();
    assert_eq!(seg_frames, report.frames_emitted);
    let on_disk: RunReport = serde_json::from_str(&read(dir.path(), REPORT_JSON)).unwrap();
    assert_eq!(on_disk, report);
}

#[test]
fn every_timestamp_sits_on_the_run_clock() {
    let dir = tempfile::tempdir().unwrap();
    run(&config(dir.path(), Embodiment::Both)).unwrap();
    let ms = |s: &str| -> u64 {
        let (whole, frac) = s.split_once('.').unwrap();
        whole.parse::<u64>().unwrap() * 1000 + frac.parse::<u64>().unwrap()
    };
    for name in [PRESSURE_TRACE_CSV, CHARACTER_TRACE_CSV] {
        for (i, r) in data_rows(dir.path(), name).iter().enumerate() {
            assert_eq!(ms(&r[0]), i as u64 * TICK_MS, "{name}");
        }
    }
    for (i, r) in data_rows(dir.path(), EEG_RAW_CSV).iter().enumerate() {
        assert_eq!(ms(&r[0]), i as u64 * 4);
    }
    // commands are stamped at the sample that completed their window and
    // act from the following tick
    let trace = data_rows(dir.path(), CHARACTER_TRACE_CSV);
    for r in data_rows(dir.path(), CHARACTER_COMMANDS_CSV) {
        let t = ms(&r[0]);
        assert_eq!((t - 1996) % 1000, 0);
        let next_tick = (t / TICK_MS + 1) as usize;
        if next_tick >= trace.len() {
            continue;
        }
        assert_eq!(trace[next_tick][1], r[2], "duty at tick after {t} ms");
    }
}

#[test]
fn fixed_calibration_is_used_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), Embodiment::Character);
    cfg.calibration = Some(Calibration::new(30.0, 7.5).unwrap());
    let report = run(&cfg).unwrap();
    assert_eq!(report.calibration, Calibration::new(30.0, 7.5).unwrap());
    assert_eq!(read(dir.path(), CALIBRATION_FILE), "p_ref = 30\nthreshold = 7.5\n");
}

#[test]
fn replaying_the_raw_log_reproduces_the_alpha_stream() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("synth");
    let mut cfg = config(&first, Embodiment::Character);
    cfg.calibration = Some(Calibration::new(37.0, 9.25).unwrap());
    run(&cfg).unwrap();

    let second = dir.path().join("replay");
    let mut replay = config(&second, Embodiment::Character);
    replay.calibration = cfg.calibration;
    replay.source = SourceConfig::Replay {
        path: first.join(EEG_RAW_CSV),
    };
    let report = run(&replay).unwrap();
    assert!(report.segments.is_empty());
    for name in [ALPHA_CSV, PSD_CSV, CHARACTER_COMMANDS_CSV, CHARACTER_TRACE_CSV] {
        assert_eq!(read(&first, name), read(&second, name), "{name}");
    }
}

#[test]
fn invalid_config_and_missing_replay_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), Embodiment::Both);
    cfg.mapping.beta_gain = 1.0;
    let e = run(&cfg).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    assert!(e.to_string().contains("beta_gain"));

    let mut cfg = config(dir.path(), Embodiment::Both);
    cfg.source = SourceConfig::Replay {
        path: dir.path().join("nope.csv"),
    };
    let e = run(&cfg).unwrap_err();
    assert!(e.to_string().contains("nope.csv"));
    assert_ne!(e.exit_code(), 0);
}

#[test]
fn corrupt_replay_row_names_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "t_s,eeg_uV\n0.000,1\n0.004,oops\n").unwrap();
    let mut cfg = config(&dir.path().join("out"), Embodiment::Character);
    cfg.calibration = Some(Calibration::new(1.0, 0.25).unwrap());
    cfg.source = SourceConfig::Replay { path };
    let e = run(&cfg).unwrap_err();
    assert!(e.to_string().contains("line 3"), "{e}");
}

#[test]
fn unwritable_output_dir_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let mut cfg = config(&blocker.join("out"), Embodiment::Character);
    cfg.calibration = Some(Calibration::new(37.0, 9.25).unwrap());
    assert_eq!(run(&cfg).unwrap_err().exit_code(), 4);
}

#[test]
fn calibrate_cmd_examples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::default();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    let cal = calibrate_to_file(&cfg, 10.0, &a).unwrap();
    assert!(cal.p_ref > 0.0);
    calibrate_to_file(&cfg, 10.0, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(Calibration::parse(&std::fs::read_to_string(&a).unwrap()).unwrap(), cal);

    let e = calibrate_cmd(&cfg, 2.0).unwrap_err();
    assert_ne!(e.exit_code(), 0);
    assert!(e.to_string().contains("too short"), "{e}");
}

#[test]
fn export_figures_from_a_full_run() {
    let dir = tempfile::tempdir().unwrap();
    run(&config(dir.path(), Embodiment::Both)).unwrap();
    let files = export_figures(dir.path()).unwrap();
    let names: Vec<&str> = files.iter().map(|f| f.name.as_str()).collect();
    assert!(names.contains(&FIG_DUTY_CSV) && names.contains(&FIG_PRESSURE_CSV));

    let duty = read(dir.path(), FIG_DUTY_CSV);
    assert!(duty.starts_with("t_s,duty,segment\n"));
    assert_eq!(duty.lines().count(), 70);
    assert!(duty.lines().nth(1).unwrap().ends_with(",0"));
    let pressure = read(dir.path(), FIG_PRESSURE_CSV);
    assert!(pressure.starts_with("t_s,p_filt_kpa,segment\n"));
    assert_eq!(pressure.lines().count(), 7001);
    assert_eq!(pressure.lines().last().unwrap().split(',').nth(2), Some("4"));

    let markers = read(dir.path(), FIG_MARKERS_CSV);
    assert_eq!(markers, "t_s,eyes,segment\n0,open,0\n10,closed,1\n30,open,2\n40,closed,3\n60,open,4\n");
    // one 0-40 Hz snapshot per segment
    let psd = read(dir.path(), FIG_PSD_CSV);
    assert_eq!(psd.lines().count(), 1 + 5 * 81);
}

#[test]
fn export_with_zero_alpha_events_still_writes_flat_duty() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), Embodiment::Character);
    // unreachable threshold: nothing is ever gated
    cfg.calibration = Some(Calibration::new(37.0, 1e12).unwrap());
    let report = run(&cfg).unwrap();
    assert_eq!(report.alpha_events, 0);
    export_figures(dir.path()).unwrap();
    for row in data_rows(dir.path(), FIG_DUTY_CSV) {
        assert_eq!(row[1], "0");
    }
}

#[test]
fn export_reports_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let e = export_figures(dir.path()).unwrap_err();
    assert!(e.to_string().contains("file not found"), "{e}");
    assert!(e.to_string().contains(SEGMENTS_CSV));

    run(&config(dir.path(), Embodiment::Character)).unwrap();
    std::fs::remove_file(dir.path().join(PSD_CSV)).unwrap();
    let e = export_figures(dir.path()).unwrap_err();
    assert!(e.to_string().contains(PSD_CSV), "{e}");
}

#[test]
fn custom_scenario_and_seed_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = config(&dir.path().join("a"), Embodiment::Character);
    a.set_scenario(Scenario::parse("closed,5\n").unwrap());
    let ra = run(&a).unwrap();
    assert_eq!(ra.duration_s, 5.0);
    assert_eq!(ra.segments.len(), 1);
    assert_eq!(ra.segments[0].eyes, Eyes::Closed);

    let mut b = a.clone();
    b.output_dir = dir.path().join("b");
    b.seed = 2;
    run(&b).unwrap();
    assert_ne!(
        read(&dir.path().join("a"), EEG_RAW_CSV),
        read(&dir.path().join("b"), EEG_RAW_CSV)
    );
}

#[test]
fn config_file_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("scen.txt"), "open,3\nclosed,3\n").unwrap();
    std::fs::write(
        dir.path().join("run.conf"),
        "embodiment = flower\nseed = 3\nscenario = scen.txt\nout = results\nguard = off\n",
    )
    .unwrap();
    let cfg = RunConfig::load(&dir.path().join("run.conf")).unwrap();
    let report = run(&cfg).unwrap();
    assert_eq!(report.ticks, 600);
    assert!(dir.path().join("results").join(PRESSURE_TRACE_CSV).is_file());
}
