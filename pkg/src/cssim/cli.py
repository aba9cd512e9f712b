"""Command line pipeline: simulate, separate and stitch, VAD, mock transcription,
scoring, and frame-level analysis.

Every stochastic stage takes an explicit seed and the same invocation writes
byte-identical reports.  Output files are written atomically (temp file plus
rename); failures exit non-zero with a machine-readable error JSON on stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import formats, framewise, simulate, stitching, vad, wer
from .signals import SampleSpan, Signal, WordToken

DEFAULT_WINDOW_S = 4.0
DEFAULT_SHIFT_S = 3.0
SESSION_ID = "session0"


# ---------------------------------------------------------------------------
# small utilities
# ---------------------------------------------------------------------------

def _atomic_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: Path, payload: dict) -> None:
    _atomic_bytes(path, (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode())


def _write_wav(path: Path, signal: Signal) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    os.close(fd)
    try:
        formats.write_wav(tmp, signal)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_text_atomic(path: Path, write_fn) -> None:
    """Run write_fn against a temp path, then rename into place."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    os.close(fd)
    try:
        write_fn(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    text = Path(path).read_text()
    data = json.loads(text)
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return data


def _sim_config(file_cfg: dict, args: argparse.Namespace) -> simulate.SimConfig:
    section = dict(file_cfg.get("sim", {}))
    for key in list(section):
        if isinstance(section[key], list):
            section[key] = tuple(section[key])
        elif section[key] == "-inf":
            section[key] = float("-inf")
    overrides = {
        "num_speakers": getattr(args, "num_speakers", None),
        "session_length": getattr(args, "session_length", None),
        "target_overlap_ratio": getattr(args, "overlap", None),
        "sample_rate": getattr(args, "sample_rate_sim", None),
    }
    section.update({k: v for k, v in overrides.items() if v is not None})
    return simulate.SimConfig(**section)


def _vad_config(file_cfg: dict) -> vad.VadConfig:
    return vad.VadConfig(**file_cfg.get("vad", {}))


def _noise_level(file_cfg: dict, args: argparse.Namespace, sim_cfg: simulate.SimConfig) -> float:
    flag = getattr(args, "noise_level", None)
    if flag is not None:
        return float(flag)
    stitch_cfg = file_cfg.get("stitch", {})
    if "noise_level_db" in stitch_cfg:
        value = stitch_cfg["noise_level_db"]
        return float("-inf") if value == "-inf" else float(value)
    return sim_cfg.artifact_noise_level_db


def _rates(file_cfg: dict, args: argparse.Namespace) -> tuple[float, float, float]:
    flag = getattr(args, "rates", None)
    if flag is not None:
        return (flag[0], flag[1], flag[2])
    asr = file_cfg.get("asr", {})
    return (asr.get("sub", 0.0), asr.get("del", 0.0), asr.get("ins", 0.0))


def _json_float(value: float) -> float | str:
    return "-inf" if value == float("-inf") else value


# ---------------------------------------------------------------------------
# pipeline stages
# ---------------------------------------------------------------------------

def cmd_simulate(config: simulate.SimConfig, seed: int, out_dir: Path) -> dict:
    truth = simulate.generate_meeting(config, seed)
    formats.write_truth(out_dir, truth, config)
    overlapped, active = simulate._measure_overlap(
        [(0, u.span.start, u.span.end) for u in truth.utterances], truth.num_samples
    )
    report = {
        "seed": seed,
        "sample_rate": truth.sample_rate,
        "num_samples": truth.num_samples,
        "num_speakers": config.num_speakers,
        "num_utterances": len(truth.utterances),
        "reference_words": sum(len(u.words) for u in truth.utterances),
        "realized_overlap_ratio": overlapped / active if active else 0.0,
        "target_overlap_ratio": config.target_overlap_ratio,
    }
    _write_json(out_dir / "simulate.json", report)
    return report


def cmd_separate_stitch(
    truth: simulate.MeetingTruth,
    noise_level_db: float,
    seed: int,
    out_dir: Path,
    window_s: float = DEFAULT_WINDOW_S,
    shift_s: float = DEFAULT_SHIFT_S,
    merge: str = stitching.MERGE_CROSSFADE,
) -> dict:
    rate = truth.sample_rate
    plan = stitching.plan_windows(
        truth.num_samples, int(round(window_s * rate)), int(round(shift_s * rate))
    )
    outputs = [
        simulate.oracle_window_separator(truth, span, seed, noise_level_db)
        for span in plan.windows
    ]
    stitched = stitching.stitch(outputs, plan, merge=merge)
    _write_wav(out_dir / "stream0.wav", stitched.channels[0])
    _write_wav(out_dir / "stream1.wav", stitched.channels[1])
    report = {
        "seed": seed,
        "noise_level_db": _json_float(noise_level_db),
        "merge": merge,
        "window_samples": plan.window_length,
        "shift_samples": plan.shift,
        "windows": [[span.start, span.end] for span in plan.windows],
        "per_window_permutations": list(stitched.per_window_permutations),
        "streams": ["stream0.wav", "stream1.wav"],
    }
    _write_json(out_dir / "stitch.json", report)
    return report


def cmd_vad(stream_paths: list[Path], config: vad.VadConfig, out_dir: Path) -> dict:
    if len(stream_paths) != 2:
        raise ValueError(f"need exactly 2 stream files, got {len(stream_paths)}")
    segments: list[tuple[int, SampleSpan]] = []
    for channel, path in enumerate(stream_paths):
        signal = formats.read_wav(path)
        for span in vad.detect_segments(signal, config):
            segments.append((channel, span))

    def write_csv(tmp_path: str) -> None:
        with open(tmp_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["channel", "start_sample", "end_sample"])
            for channel, span in segments:
                writer.writerow([channel, span.start, span.end])

    _write_text_atomic(out_dir / "segments.csv", write_csv)
    report = {
        "segment_counts": {
            "0": sum(1 for c, _ in segments if c == 0),
            "1": sum(1 for c, _ in segments if c == 1),
        },
        "covered_samples": {
            "0": sum(s.length for c, s in segments if c == 0),
            "1": sum(s.length for c, s in segments if c == 1),
        },
        "segments_csv": "segments.csv",
    }
    _write_json(out_dir / "vad.json", report)
    return report


def _read_segments_csv(path: Path) -> list[tuple[int, SampleSpan]]:
    segments = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            segments.append(
                (int(row["channel"]), SampleSpan(int(row["start_sample"]), int(row["end_sample"])))
            )
    return segments


def _stream_orientation(
    truth: simulate.MeetingTruth, streams: tuple[Signal, Signal]
) -> int:
    """0 if stitched channel c matches ground-truth stream c, else 1 (swapped)."""
    truth_streams = simulate.stream_signals(truth)
    keep = float(
        np.mean((streams[0].samples - truth_streams[0].samples) ** 2)
        + np.mean((streams[1].samples - truth_streams[1].samples) ** 2)
    )
    swap = float(
        np.mean((streams[0].samples - truth_streams[1].samples) ** 2)
        + np.mean((streams[1].samples - truth_streams[0].samples) ** 2)
    )
    return 0 if keep <= swap else 1


def _stream_tokens(truth: simulate.MeetingTruth) -> tuple[list[WordToken], list[WordToken]]:
    colors = simulate.stream_assignment(truth.utterances)
    tokens: tuple[list[WordToken], list[WordToken]] = ([], [])
    for utt, color in sorted(
        zip(truth.utterances, colors), key=lambda pair: pair[0].span.start
    ):
        tokens[color].extend(simulate.word_tokens(utt))
    return tokens


def cmd_transcribe_mock(
    segments: list[tuple[int, SampleSpan]],
    streams: tuple[Signal, Signal],
    truth: simulate.MeetingTruth,
    error_rates: tuple[float, float, float],
    seed: int,
    out_dir: Path,
) -> dict:
    orientation = _stream_orientation(truth, streams)
    stream_tokens = _stream_tokens(truth)

    channel_tokens: dict[int, list[WordToken]] = {0: [], 1: []}
    counts = {"substitutions": 0, "deletions": 0, "insertions": 0}
    for channel, span in sorted(segments, key=lambda s: (s[0], s[1].start)):
        source_tokens = [
            t for t in stream_tokens[channel ^ orientation] if t.span.intersects(span)
        ]
        ops, seg_counts = simulate.mock_asr_ops(
            span, [t.word for t in source_tokens], error_rates, seed
        )
        for key in counts:
            counts[key] += seg_counts[key]
        for op, index, word in ops:
            if op == "del" or word is None:
                continue
            if op == "ins":
                at = (
                    source_tokens[index].span.start
                    if index < len(source_tokens)
                    else source_tokens[-1].span.end if source_tokens else span.start
                )
                channel_tokens[channel].append(WordToken(word, SampleSpan(at, at)))
            else:  # keep or sub: reuse the true word timing
                channel_tokens[channel].append(WordToken(word, source_tokens[index].span))

    rate = truth.sample_rate
    _write_text_atomic(
        out_dir / "hypothesis.ctm",
        lambda tmp: formats.emit_ctm(tmp, SESSION_ID, channel_tokens, rate),
    )
    reference_words = sum(len(u.words) for u in truth.utterances)
    report = {
        "seed": seed,
        "error_rates": {"sub": error_rates[0], "del": error_rates[1], "ins": error_rates[2]},
        "orientation": orientation,
        "realized_errors": counts,
        "realized_error_total": sum(counts.values()),
        "reference_words": reference_words,
        "realized_error_rate": sum(counts.values()) / reference_words if reference_words else 0.0,
        "hypothesis_ctm": "hypothesis.ctm",
    }
    _write_json(out_dir / "transcribe.json", report)
    return report


def cmd_score(stm_path: Path, ctm_path: Path, out_dir: Path, sample_rate: int) -> dict:
    entries = formats.parse_stm(stm_path, sample_rate)
    utterances = [entry.utterance for entry in entries]
    channel_tokens = formats.parse_ctm(ctm_path, sample_rate)
    hyps = tuple(
        [t.word for t in sorted(channel_tokens[c], key=lambda t: (t.span.start, t.span.end))]
        for c in (0, 1)
    )
    result = wer.orc_wer(utterances, hyps)
    channel_counts = wer.per_channel_counts(utterances, hyps, result.assignment)
    report = {
        "orc_wer": result.orc_wer,
        "total_distance": result.total_distance,
        "total_reference_words": result.total_reference_words,
        "assignment": list(result.assignment),
        "per_channel": [
            {
                "substitutions": c.substitutions,
                "deletions": c.deletions,
                "insertions": c.insertions,
                "reference_words": c.reference_length,
            }
            for c in channel_counts
        ],
    }
    _write_json(out_dir / "score.json", report)
    return report


def _comparison_dict(cmp: framewise.FrameComparison) -> dict:
    return {
        "frames_total": cmp.frames_total,
        "frames_excluded": cmp.frames_excluded,
        "matches": cmp.matches,
        "matches_words_only": cmp.matches_words_only,
        "her": cmp.her,
        "cir": cmp.cir,
    }


def _bucket_dict(report: framewise.CoincidenceReport) -> dict:
    return {
        name: {
            "frames_total": b.frames_total,
            "frames_counted": b.frames_counted,
            "including_silence": b.including_silence,
            "words_only": b.words_only,
        }
        for name, b in report.buckets.items()
    }


def cmd_analyze(
    truth: simulate.MeetingTruth,
    ctm_path: Path,
    out_dir: Path,
    lattice_paths: tuple[Path | None, Path | None] = (None, None),
) -> dict:
    rate = truth.sample_rate
    shift = max(1, rate // 100)
    total = framewise.num_frames(truth.num_samples, shift)
    stream_tokens = _stream_tokens(truth)
    reference = [framewise.words_to_frames(stream_tokens[s], total, shift) for s in (0, 1)]

    channel_tokens = formats.parse_ctm(ctm_path, rate)
    hypothesis = []
    for channel in (0, 1):
        if lattice_paths[channel] is not None:
            lattice = formats.parse_lattice(lattice_paths[channel])
            hypothesis.append(framewise.lattice_to_frames(lattice, total, shift))
        else:
            hypothesis.append(framewise.words_to_frames(channel_tokens[channel], total, shift))

    def mean_her(orientation: int) -> float:
        totals = [0, 0]
        for channel in (0, 1):
            cmp = framewise.compare_framewise(reference[channel ^ orientation], hypothesis[channel])
            totals[0] += cmp.frames_counted - cmp.matches
            totals[1] += cmp.frames_counted
        return totals[0] / totals[1] if totals[1] else 0.0

    her_keep, her_swap = mean_her(0), mean_her(1)
    orientation = 0 if her_keep <= her_swap else 1

    colors = simulate.stream_assignment(truth.utterances)
    counts = framewise.active_speaker_counts(truth, total, shift)
    channels_report = {}
    for channel in (0, 1):
        stream = channel ^ orientation
        versus_reference = framewise.compare_framewise(reference[stream], hypothesis[channel])
        cross_tokens: list[WordToken] = []
        other = stream_tokens[1 - stream]
        for utt, color in zip(truth.utterances, colors):
            if color == stream:
                cross_tokens.extend(framewise.cross_channel_transcript(other, utt.span))
        cross_labeling = framewise.words_to_frames(cross_tokens, total, shift)
        coincidence = framewise.coincidence_rate(hypothesis[channel], cross_labeling, counts)
        channels_report[str(channel)] = {
            "stream": stream,
            "versus_reference": _comparison_dict(versus_reference),
            "cross_coincidence": _bucket_dict(coincidence),
        }

    report = {
        "frame_shift": shift,
        "total_frames": total,
        "orientation": orientation,
        "mean_reference_her": min(her_keep, her_swap),
        "channels": channels_report,
    }
    _write_json(out_dir / "analysis.json", report)

    def write_csv(tmp_path: str) -> None:
        with open(tmp_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["channel", "bucket", "frames_total", "frames_counted", "including_silence", "words_only"]
            )
            for channel in ("0", "1"):
                buckets = channels_report[channel]["cross_coincidence"]
                for bucket in ("1", "2", "all"):
                    b = buckets[bucket]
                    writer.writerow(
                        [
                            channel,
                            bucket,
                            b["frames_total"],
                            b["frames_counted"],
                            "" if b["including_silence"] is None else f"{b['including_silence']:.6f}",
                            "" if b["words_only"] is None else f"{b['words_only']:.6f}",
                        ]
                    )

    _write_text_atomic(out_dir / "coincidence.csv", write_csv)
    return report


def cmd_run_all(
    config: simulate.SimConfig,
    vad_config: vad.VadConfig,
    error_rates: tuple[float, float, float],
    noise_level_db: float,
    seed: int,
    out_dir: Path,
    window_s: float = DEFAULT_WINDOW_S,
    shift_s: float = DEFAULT_SHIFT_S,
    merge: str = stitching.MERGE_CROSSFADE,
) -> dict:
    truth_dir = out_dir / "truth"
    sim_report = cmd_simulate(config, seed, truth_dir)
    truth, _ = formats.read_truth(truth_dir)

    stitch_report = cmd_separate_stitch(
        truth, noise_level_db, seed + 1, out_dir, window_s, shift_s, merge
    )
    stream_paths = [out_dir / name for name in stitch_report["streams"]]
    vad_report = cmd_vad(stream_paths, vad_config, out_dir)

    segments = _read_segments_csv(out_dir / vad_report["segments_csv"])
    streams = (formats.read_wav(stream_paths[0]), formats.read_wav(stream_paths[1]))
    transcribe_report = cmd_transcribe_mock(
        segments, streams, truth, error_rates, seed + 2, out_dir
    )

    entries = [
        formats.StmEntry(SESSION_ID, utt)
        for utt in sorted(truth.utterances, key=lambda u: u.span.start)
    ]
    _write_text_atomic(
        out_dir / "reference.stm",
        lambda tmp: formats.emit_stm(tmp, entries, truth.sample_rate),
    )
    score_report = cmd_score(
        out_dir / "reference.stm",
        out_dir / transcribe_report["hypothesis_ctm"],
        out_dir,
        truth.sample_rate,
    )
    analysis_report = cmd_analyze(truth, out_dir / transcribe_report["hypothesis_ctm"], out_dir)

    report = {
        "seed": seed,
        "simulate": sim_report,
        "stitch": stitch_report,
        "vad": vad_report,
        "transcribe": transcribe_report,
        "score": score_report,
        "analysis": analysis_report,
    }
    _write_json(out_dir / "report.json", report)
    return report


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cssim",
        description="Synthetic meeting separation pipeline and transcription scoring",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, seed: bool = True) -> None:
        p.add_argument("--out", required=True, help="output directory")
        if seed:
            p.add_argument("--seed", type=int, required=True, help="RNG seed (required for reproducibility)")

    p = sub.add_parser("simulate", help="generate a synthetic meeting truth bundle")
    add_common(p)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--num-speakers", type=int, dest="num_speakers")
    p.add_argument("--session-length", type=float, dest="session_length")
    p.add_argument("--overlap", type=float, help="target overlap ratio")
    p.add_argument("--sample-rate", type=int, dest="sample_rate_sim")

    p = sub.add_parser("stitch", help="oracle-separate windows and stitch two streams")
    add_common(p)
    p.add_argument("--truth", required=True, help="truth bundle directory")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--noise-level", type=float, dest="noise_level", help="separator noise dB (rel. mixture RMS)")
    p.add_argument("--window-s", type=float, default=DEFAULT_WINDOW_S)
    p.add_argument("--shift-s", type=float, default=DEFAULT_SHIFT_S)
    p.add_argument("--merge", choices=[stitching.MERGE_CROSSFADE, stitching.MERGE_TAKE_LATEST],
                   default=stitching.MERGE_CROSSFADE)

    p = sub.add_parser("vad", help="detect active segments on both streams")
    add_common(p, seed=False)
    p.add_argument("--streams", nargs=2, required=True, metavar=("CH0", "CH1"))
    p.add_argument("--config", help="JSON config file")

    p = sub.add_parser("transcribe-mock", help="corrupt true words per detected segment")
    add_common(p)
    p.add_argument("--segments", required=True, help="segments.csv from the vad stage")
    p.add_argument("--streams", nargs=2, required=True, metavar=("CH0", "CH1"))
    p.add_argument("--truth", required=True)
    p.add_argument("--rates", nargs=3, type=float, metavar=("SUB", "DEL", "INS"))
    p.add_argument("--config", help="JSON config file")

    p = sub.add_parser("score", help="optimal-assignment WER of a CTM against an STM")
    add_common(p, seed=False)
    p.add_argument("--stm", required=True)
    p.add_argument("--ctm", required=True)
    p.add_argument("--sample-rate", type=int, default=16000, dest="sample_rate")

    p = sub.add_parser("analyze", help="frame-level error and coincidence report")
    add_common(p, seed=False)
    p.add_argument("--truth", required=True)
    p.add_argument("--ctm", required=True)
    p.add_argument("--lattice-0", dest="lattice0", help="optional lattice for channel 0")
    p.add_argument("--lattice-1", dest="lattice1", help="optional lattice for channel 1")

    p = sub.add_parser("run-all", help="run the whole pipeline into one directory")
    add_common(p)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--num-speakers", type=int, dest="num_speakers")
    p.add_argument("--session-length", type=float, dest="session_length")
    p.add_argument("--overlap", type=float)
    p.add_argument("--sample-rate", type=int, dest="sample_rate_sim")
    p.add_argument("--noise-level", type=float, dest="noise_level")
    p.add_argument("--rates", nargs=3, type=float, metavar=("SUB", "DEL", "INS"))
    p.add_argument("--window-s", type=float, default=DEFAULT_WINDOW_S)
    p.add_argument("--shift-s", type=float, default=DEFAULT_SHIFT_S)
    p.add_argument("--merge", choices=[stitching.MERGE_CROSSFADE, stitching.MERGE_TAKE_LATEST],
                   default=stitching.MERGE_CROSSFADE)
    return parser


def _dispatch(args: argparse.Namespace) -> dict:
    out_dir = Path(args.out)
    file_cfg = _load_config_file(getattr(args, "config", None))

    if args.command == "simulate":
        return cmd_simulate(_sim_config(file_cfg, args), args.seed, out_dir)

    if args.command == "stitch":
        truth, sim_cfg = formats.read_truth(Path(args.truth))
        noise = _noise_level(file_cfg, args, sim_cfg)
        return cmd_separate_stitch(
            truth, noise, args.seed, out_dir, args.window_s, args.shift_s, args.merge
        )

    if args.command == "vad":
        return cmd_vad([Path(p) for p in args.streams], _vad_config(file_cfg), out_dir)

    if args.command == "transcribe-mock":
        truth, _ = formats.read_truth(Path(args.truth))
        segments = _read_segments_csv(Path(args.segments))
        streams = (formats.read_wav(args.streams[0]), formats.read_wav(args.streams[1]))
        return cmd_transcribe_mock(
            segments, streams, truth, _rates(file_cfg, args), args.seed, out_dir
        )

    if args.command == "score":
        return cmd_score(Path(args.stm), Path(args.ctm), out_dir, args.sample_rate)

    if args.command == "analyze":
        truth, _ = formats.read_truth(Path(args.truth))
        lattices = (
            Path(args.lattice0) if args.lattice0 else None,
            Path(args.lattice1) if args.lattice1 else None,
        )
        return cmd_analyze(truth, Path(args.ctm), out_dir, lattices)

    if args.command == "run-all":
        sim_cfg = _sim_config(file_cfg, args)
        return cmd_run_all(
            sim_cfg,
            _vad_config(file_cfg),
            _rates(file_cfg, args),
            _noise_level(file_cfg, args, sim_cfg),
            args.seed,
            out_dir,
            args.window_s,
            args.shift_s,
            args.merge,
        )

    raise ValueError(f"unknown command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        _dispatch(args)
    except Exception as exc:  # noqa: BLE001 - report any stage failure as JSON
        error = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(error, sort_keys=True), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
