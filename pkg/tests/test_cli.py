from __future__ import annotations

import json
from pathlib import Path

import pytest

from cssim import cli
from cssim.formats import parse_ctm, parse_stm, read_truth

FAST = [
    "--num-speakers", "2",
    "--session-length", "9",
    "--overlap", "0.1",
]


def run(argv: list[str]) -> int:
    return cli.main(argv)


def test_run_all_zero_rates_scores_zero(tmp_path):
    out = tmp_path / "run"
    code = run(["run-all", "--out", str(out), "--seed", "5", *FAST, "--rates", "0", "0", "0"])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["score"]["orc_wer"] == 0.0
    assert report["score"]["total_distance"] == 0
    assert report["analysis"]["mean_reference_her"] == 0.0
    assert report["transcribe"]["realized_error_total"] == 0
    # every stage report landed in the same directory
    for name in ("report.json", "stitch.json", "vad.json", "transcribe.json",
                 "score.json", "analysis.json", "reference.stm", "hypothesis.ctm",
                 "segments.csv", "coincidence.csv", "stream0.wav", "stream1.wav"):
        assert (out / name).exists()


def test_run_all_reruns_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run(["run-all", "--out", str(out), "--seed", "12", *FAST,
                    "--rates", "0.1", "0.02", "0.02"]) == 0
    for name in ("report.json", "stream0.wav", "stream1.wav", "hypothesis.ctm",
                 "reference.stm", "segments.csv", "coincidence.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_stagewise_pipeline_matches_run_all(tmp_path):
    full = tmp_path / "full"
    assert run(["run-all", "--out", str(full), "--seed", "31", *FAST,
                "--rates", "0.05", "0.01", "0.01"]) == 0

    staged = tmp_path / "staged"
    truth_dir = staged / "truth"
    assert run(["simulate", "--out", str(truth_dir), "--seed", "31", *FAST]) == 0
    assert run(["stitch", "--out", str(staged), "--seed", "32",
                "--truth", str(truth_dir)]) == 0
    assert run(["vad", "--out", str(staged),
                "--streams", str(staged / "stream0.wav"), str(staged / "stream1.wav")]) == 0
    assert run(["transcribe-mock", "--out", str(staged), "--seed", "33",
                "--segments", str(staged / "segments.csv"),
                "--streams", str(staged / "stream0.wav"), str(staged / "stream1.wav"),
                "--truth", str(truth_dir),
                "--rates", "0.05", "0.01", "0.01"]) == 0
    assert run(["score", "--out", str(staged),
                "--stm", str(full / "reference.stm"),
                "--ctm", str(staged / "hypothesis.ctm")]) == 0
    assert run(["analyze", "--out", str(staged),
                "--truth", str(truth_dir),
                "--ctm", str(staged / "hypothesis.ctm")]) == 0

    # same seeds at each stage reproduce the run-all outputs exactly
    assert (staged / "stream0.wav").read_bytes() == (full / "stream0.wav").read_bytes()
    assert (staged / "hypothesis.ctm").read_bytes() == (full / "hypothesis.ctm").read_bytes()
    full_report = json.loads((full / "report.json").read_text())
    score = json.loads((staged / "score.json").read_text())
    assert score == full_report["score"]
    analysis = json.loads((staged / "analysis.json").read_text())
    assert analysis == full_report["analysis"]


def test_simulate_writes_readable_truth(tmp_path):
    out = tmp_path / "truth"
    assert run(["simulate", "--out", str(out), "--seed", "3", *FAST]) == 0
    truth, config = read_truth(out)
    assert config.num_speakers == 2
    report = json.loads((out / "simulate.json").read_text())
    assert report["num_utterances"] == len(truth.utterances)
    assert abs(report["realized_overlap_ratio"] - 0.1) <= 0.05


def test_config_file_controls_simulation(tmp_path):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({
        "sim": {"num_speakers": 3, "session_length": 9.0, "target_overlap_ratio": 0.1},
        "asr": {"sub": 0.0, "del": 0.0, "ins": 0.0},
    }))
    out = tmp_path / "run"
    assert run(["run-all", "--out", str(out), "--seed", "8", "--config", str(config_path)]) == 0
    _, config = read_truth(out / "truth")
    assert config.num_speakers == 3


def test_flag_overrides_config_file(tmp_path):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({"sim": {"num_speakers": 3, "session_length": 9.0}}))
    out = tmp_path / "truth"
    assert run(["simulate", "--out", str(out), "--seed", "2",
                "--config", str(config_path), "--num-speakers", "2",
                "--overlap", "0.1"]) == 0
    _, config = read_truth(out)
    assert config.num_speakers == 2


def test_take_latest_merge_flag(tmp_path):
    truth_dir = tmp_path / "truth"
    assert run(["simulate", "--out", str(truth_dir), "--seed", "21", *FAST]) == 0
    out = tmp_path / "stitched"
    assert run(["stitch", "--out", str(out), "--seed", "22", "--truth", str(truth_dir),
                "--merge", "take_latest"]) == 0
    report = json.loads((out / "stitch.json").read_text())
    assert report["merge"] == "take_latest"
    assert set(report["per_window_permutations"]) <= {"identity", "swap"}


def test_score_standalone_on_handwritten_files(tmp_path):
    stm = tmp_path / "ref.stm"
    stm.write_text(
        "sess spk00 0.0 1.0 java lomu\n"
        "sess spk01 0.5 1.5 nuvi\n"
    )
    ctm = tmp_path / "hyp.ctm"
    ctm.write_text(
        "sess 0 java 0.0 0.5\n"
        "sess 0 lomu 0.5 0.5\n"
        "sess 1 nuvi 0.5 1.0\n"
    )
    out = tmp_path / "scored"
    assert run(["score", "--out", str(out), "--stm", str(stm), "--ctm", str(ctm)]) == 0
    score = json.loads((out / "score.json").read_text())
    assert score["orc_wer"] == 0.0
    assert score["assignment"] == [0, 1]


def test_error_reported_as_json(tmp_path, capsys):
    code = run(["score", "--out", str(tmp_path), "--stm", str(tmp_path / "missing.stm"),
                "--ctm", str(tmp_path / "missing.ctm")])
    assert code == 1
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "error" in payload and "message" in payload


def test_seed_is_required(tmp_path):
    with pytest.raises(SystemExit):
        run(["simulate", "--out", str(tmp_path)])


def test_ctm_spans_stay_inside_session(tmp_path):
    out = tmp_path / "run"
    assert run(["run-all", "--out", str(out), "--seed", "44", *FAST,
                "--rates", "0.2", "0.1", "0.1"]) == 0
    truth, _ = read_truth(out / "truth")
    tokens = parse_ctm(out / "hypothesis.ctm", truth.sample_rate)
    for channel in (0, 1):
        for token in tokens[channel]:
            assert 0 <= token.span.start <= token.span.end <= truth.num_samples


def test_reference_stm_round_trips_truth(tmp_path):
    out = tmp_path / "run"
    assert run(["run-all", "--out", str(out), "--seed", "50", *FAST,
                "--rates", "0", "0", "0"]) == 0
    truth, _ = read_truth(out / "truth")
    entries = parse_stm(out / "reference.stm", truth.sample_rate)
    got = sorted((e.utterance for e in entries), key=lambda u: u.span.start)
    want = sorted(truth.utterances, key=lambda u: u.span.start)
    assert got == want
