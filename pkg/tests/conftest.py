"""Shared pytest wiring: prints one PASS/FAIL line per acceptance criterion."""

_acceptance_results = []

_CRITERIA = {
    "test_classifier_accuracy_clean_and_noisy": "classifier top-1 >= 0.95 clean, >= 0.80 at 10 dB SNR, < 60 s",
    "test_map_metric_hand_case": "mAP: 3-clip AP = 5/6 exactly, perfect ranking mAP = 1.0",
    "test_frame_clip_consistency": "frame-wise max equals clip-wise score exactly on 100 random clips",
    "test_geo_query_oracle_and_tile_conservation": "1e4-detection bbox/time queries match linear scan; tile sums conserve, zoom 0-14",
    "test_trajectory_equatorial_mobility": "two-cluster equatorial mobility = 111 km/bucket +- 1%",
    "test_pan_law": "pan identity 1e-9 over 1e4 azimuths; -90 deg kills right channel by 40 dB",
    "test_ara_mix_silent_step_bounded": "ARA mix: silent real -> max gain; +20 dB step settles in 3 tau; output bounded",
    "test_gamification_replay_and_combo_quest": "event-log replay bit-exact; combo quest completes/expires per script",
    "test_end_to_end_submit_and_scene": "server round trip: correct species, azimuth +- 0.5 deg, < 10 s",
}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        if name in _CRITERIA:
            _acceptance_results.append((name, report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, passed in _acceptance_results:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {_CRITERIA[name]}")
