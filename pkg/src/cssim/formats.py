"""File formats: WAV audio, STM/CTM transcripts, word lattices, truth bundles.

Audio is mono 16-bit PCM; amplitudes map to float by division with 32768, so
reading and re-writing a file is bit-exact.  STM/CTM store seconds with seven
decimals (exactly one sample at 16 kHz); lattice files store frame indices.
"""

from __future__ import annotations

import dataclasses
import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .signals import SampleSpan, Signal, WordToken
from .simulate import MeetingTruth, SimConfig, Utterance

TRUTH_FILENAME = "truth.json"


class FormatError(ValueError):
    """Parse or validation failure with file location context."""

    def __init__(
        self,
        message: str,
        *,
        path: str | Path | None = None,
        line: int | None = None,
        offset: int | None = None,
    ) -> None:
        parts = []
        if path is not None:
            parts.append(str(path))
        if line is not None:
            parts.append(f"line {line}")
        if offset is not None:
            parts.append(f"byte {offset}")
        prefix = ": ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)


# ---------------------------------------------------------------------------
# WAV (mono 16-bit PCM)
# ---------------------------------------------------------------------------

def _to_int16(samples: np.ndarray) -> np.ndarray:
    q = np.rint(samples * 32768.0)
    return np.clip(q, -32768, 32767).astype("<i2")


def write_wav(path: str | Path, signal: Signal) -> None:
    data = _to_int16(signal.samples).tobytes()
    rate = signal.sample_rate
    header = b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE"
    fmt = b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, rate, rate * 2, 2, 16)
    with open(path, "wb") as fh:
        fh.write(header + fmt + b"data" + struct.pack("<I", len(data)) + data)


def read_wav(path: str | Path) -> Signal:
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise FormatError("truncated RIFF header", path=path, offset=len(raw))
    if raw[0:4] != b"RIFF":
        raise FormatError("not a RIFF file", path=path, offset=0)
    if raw[8:12] != b"WAVE":
        raise FormatError("not a WAVE file", path=path, offset=8)

    fmt_seen = False
    sample_rate = 0
    pos = 12
    while pos < len(raw):
        if pos + 8 > len(raw):
            raise FormatError("truncated chunk header", path=path, offset=pos)
        chunk_id = raw[pos:pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body_start = pos + 8
        if body_start + size > len(raw):
            raise FormatError(
                f"chunk {chunk_id!r} of {size} bytes truncated", path=path, offset=body_start
            )
        body = raw[body_start:body_start + size]
        if chunk_id == b"fmt ":
            if size < 16:
                raise FormatError("fmt chunk too small", path=path, offset=body_start)
            audio_format, channels, sample_rate, _, _, bits = struct.unpack_from("<HHIIHH", body, 0)
            if audio_format != 1:
                raise FormatError(f"not PCM (format tag {audio_format})", path=path, offset=body_start)
            if channels != 1:
                raise FormatError(f"need mono audio, got {channels} channels", path=path, offset=body_start + 2)
            if bits != 16:
                raise FormatError(f"need 16-bit samples, got {bits}", path=path, offset=body_start + 14)
            fmt_seen = True
        elif chunk_id == b"data":
            if not fmt_seen:
                raise FormatError("data chunk before fmt chunk", path=path, offset=pos)
            if size % 2 != 0:
                raise FormatError("odd data chunk size for 16-bit samples", path=path, offset=body_start)
            samples = np.frombuffer(body, dtype="<i2").astype(np.float64) / 32768.0
            return Signal(samples, sample_rate)
        pos = body_start + size + (size % 2)  # chunks are word aligned
    raise FormatError("no data chunk", path=path, offset=len(raw))


# ---------------------------------------------------------------------------
# STM-like segment transcripts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StmEntry:
    session: str
    utterance: Utterance


def _seconds(samples: int, rate: int) -> str:
    return f"{samples / rate:.7f}"


def _to_samples(seconds: float, rate: int) -> int:
    return int(round(seconds * rate))


def emit_stm(path: str | Path, entries: list[StmEntry], sample_rate: int) -> None:
    lines = [";; session speaker start_s end_s transcript"]
    for entry in entries:
        utt = entry.utterance
        words = " ".join(utt.words)
        lines.append(
            f"{entry.session} {utt.speaker} {_seconds(utt.span.start, sample_rate)} "
            f"{_seconds(utt.span.end, sample_rate)} {words}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def parse_stm(path: str | Path, sample_rate: int) -> list[StmEntry]:
    entries: list[StmEntry] = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(";;"):
            continue
        fields = line.split()
        if len(fields) < 5:
            raise FormatError(
                f"need 'session speaker start end transcript', got {len(fields)} fields",
                path=path,
                line=lineno,
            )
        session, speaker = fields[0], fields[1]
        try:
            start_s, end_s = float(fields[2]), float(fields[3])
        except ValueError:
            raise FormatError("malformed time field", path=path, line=lineno) from None
        if end_s <= start_s:
            raise FormatError(f"end {end_s} not after start {start_s}", path=path, line=lineno)
        if start_s < 0:
            raise FormatError(f"negative start time {start_s}", path=path, line=lineno)
        span = SampleSpan(_to_samples(start_s, sample_rate), _to_samples(end_s, sample_rate))
        entries.append(StmEntry(session, Utterance(speaker, span, tuple(fields[4:]))))
    return entries


# ---------------------------------------------------------------------------
# CTM-like word hypotheses
# ---------------------------------------------------------------------------

def emit_ctm(
    path: str | Path,
    session: str,
    channel_tokens: dict[int, list[WordToken]],
    sample_rate: int,
) -> None:
    lines = [";; session channel word start_s duration_s"]
    for channel in sorted(channel_tokens):
        if channel not in (0, 1):
            raise ValueError(f"channel must be 0 or 1, got {channel}")
        for token in sorted(channel_tokens[channel], key=lambda t: (t.span.start, t.span.end)):
            lines.append(
                f"{session} {channel} {token.word} {_seconds(token.span.start, sample_rate)} "
                f"{_seconds(token.span.length, sample_rate)}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def parse_ctm(path: str | Path, sample_rate: int) -> dict[int, list[WordToken]]:
    channels: dict[int, list[WordToken]] = {0: [], 1: []}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(";;"):
            continue
        fields = line.split()
        if len(fields) != 5:
            raise FormatError(
                f"need 'session channel word start duration', got {len(fields)} fields",
                path=path,
                line=lineno,
            )
        try:
            channel = int(fields[1])
        except ValueError:
            raise FormatError(f"malformed channel {fields[1]!r}", path=path, line=lineno) from None
        if channel not in channels:
            raise FormatError(f"unknown channel {channel}", path=path, line=lineno)
        try:
            start_s, duration_s = float(fields[3]), float(fields[4])
        except ValueError:
            raise FormatError("malformed time field", path=path, line=lineno) from None
        if duration_s < 0:
            raise FormatError(f"negative duration {duration_s}", path=path, line=lineno)
        if start_s < 0:
            raise FormatError(f"negative start time {start_s}", path=path, line=lineno)
        start = _to_samples(start_s, sample_rate)
        channels[channel].append(
            WordToken(fields[2], SampleSpan(start, start + _to_samples(duration_s, sample_rate)))
        )
    return channels


# ---------------------------------------------------------------------------
# Word lattices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Arc:
    source: int
    target: int
    label: str
    start_frame: int
    end_frame: int


@dataclass(frozen=True)
class Lattice:
    """Directed acyclic word graph with frame-indexed arc spans.

    Nodes are kept sorted so equal lattices compare equal regardless of the
    construction order.
    """

    nodes: tuple[int, ...]
    arcs: tuple[Arc, ...]
    start: int
    end: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes)))


def validate_lattice(lattice: Lattice) -> None:
    """Structural checks: DAG, reachable, frame spans consistent along paths."""
    nodes = set(lattice.nodes)
    if len(nodes) != len(lattice.nodes):
        raise ValueError("duplicate node ids")
    if lattice.start not in nodes:
        raise ValueError(f"start node {lattice.start} not declared")
    if lattice.end not in nodes:
        raise ValueError(f"end node {lattice.end} not declared")
    for arc in lattice.arcs:
        if arc.source not in nodes or arc.target not in nodes:
            raise ValueError(f"arc {arc.label!r} references undeclared node")
        if arc.start_frame < 0 or arc.end_frame < arc.start_frame:
            raise ValueError(
                f"arc {arc.label!r} has inverted frame span [{arc.start_frame}, {arc.end_frame})"
            )

    outgoing: dict[int, list[Arc]] = {n: [] for n in nodes}
    incoming: dict[int, list[Arc]] = {n: [] for n in nodes}
    for arc in lattice.arcs:
        outgoing[arc.source].append(arc)
        incoming[arc.target].append(arc)

    # Kahn's algorithm; leftovers contain a cycle
    degree = {n: len(incoming[n]) for n in nodes}
    queue = [n for n in nodes if degree[n] == 0]
    seen = 0
    while queue:
        node = queue.pop()
        seen += 1
        for arc in outgoing[node]:
            degree[arc.target] -= 1
            if degree[arc.target] == 0:
                queue.append(arc.target)
    if seen != len(nodes):
        remaining = {n for n in nodes if degree[n] > 0}
        for arc in lattice.arcs:
            if arc.source in remaining and arc.target in remaining:
                raise ValueError(
                    f"cycle through arc {arc.label!r} ({arc.source} -> {arc.target})"
                )
        raise ValueError("cycle detected")

    forward = {lattice.start}
    stack = [lattice.start]
    while stack:
        for arc in outgoing[stack.pop()]:
            if arc.target not in forward:
                forward.add(arc.target)
                stack.append(arc.target)
    backward = {lattice.end}
    stack = [lattice.end]
    while stack:
        for arc in incoming[stack.pop()]:
            if arc.source not in backward:
                backward.add(arc.source)
                stack.append(arc.source)
    dangling = nodes - (forward & backward)
    if dangling:
        raise ValueError(f"dangling node {min(dangling)} (not on any start-to-end path)")

    for node in nodes:
        if incoming[node] and outgoing[node]:
            max_in = max(arc.end_frame for arc in incoming[node])
            min_out = min(arc.start_frame for arc in outgoing[node])
            if min_out < max_in:
                raise ValueError(
                    f"frame spans decrease through node {node} ({max_in} then {min_out})"
                )


def emit_lattice(path: str | Path, lattice: Lattice) -> None:
    validate_lattice(lattice)
    lines = [f"START {lattice.start}", f"END {lattice.end}"]
    lines.extend(f"NODE {n}" for n in lattice.nodes)
    lines.extend(
        f"ARC {a.source} {a.target} {a.label} {a.start_frame} {a.end_frame}"
        for a in lattice.arcs
    )
    Path(path).write_text("\n".join(lines) + "\n")


def parse_lattice(path: str | Path) -> Lattice:
    nodes: list[int] = []
    arcs: list[Arc] = []
    start: int | None = None
    end: int | None = None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(";;"):
            continue
        fields = line.split()
        keyword = fields[0]
        try:
            if keyword == "NODE" and len(fields) == 2:
                nodes.append(int(fields[1]))
            elif keyword == "ARC" and len(fields) == 6:
                arcs.append(
                    Arc(int(fields[1]), int(fields[2]), fields[3], int(fields[4]), int(fields[5]))
                )
            elif keyword == "START" and len(fields) == 2:
                if start is not None:
                    raise FormatError("duplicate START", path=path, line=lineno)
                start = int(fields[1])
            elif keyword == "END" and len(fields) == 2:
                if end is not None:
                    raise FormatError("duplicate END", path=path, line=lineno)
                end = int(fields[1])
            else:
                raise FormatError(f"unrecognized line {line!r}", path=path, line=lineno)
        except ValueError as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"malformed integer field in {line!r}", path=path, line=lineno) from None
    if start is None or end is None:
        raise FormatError("missing START or END line", path=path)
    lattice = Lattice(tuple(nodes), tuple(arcs), start, end)
    try:
        validate_lattice(lattice)
    except ValueError as exc:
        raise FormatError(str(exc), path=path) from None
    return lattice


# ---------------------------------------------------------------------------
# Truth bundles: metadata JSON plus per-speaker WAVs
# ---------------------------------------------------------------------------

def _config_to_dict(config: SimConfig) -> dict:
    out = dataclasses.asdict(config)
    for key, value in out.items():
        if isinstance(value, tuple):
            out[key] = list(value)
        elif isinstance(value, float) and value == float("-inf"):
            out[key] = "-inf"
    return out


def _config_from_dict(data: dict) -> SimConfig:
    kwargs = dict(data)
    for key, value in kwargs.items():
        if isinstance(value, list):
            kwargs[key] = tuple(value)
        elif value == "-inf":
            kwargs[key] = float("-inf")
    return SimConfig(**kwargs)


def _crc32(samples: np.ndarray) -> int:
    return zlib.crc32(_to_int16(samples).tobytes())


def write_truth(directory: str | Path, truth: MeetingTruth, config: SimConfig) -> None:
    """Write per-speaker WAVs, the mixture WAV, and a metadata JSON.

    Audio is quantized to 16-bit; the stored mixture is the exact integer sum
    of the stored sources so the sum invariant survives the round trip.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rate = truth.sample_rate

    speakers = []
    mixture_q = np.zeros(truth.num_samples, dtype=np.int32)
    for name in sorted(truth.sources):
        q = _to_int16(truth.sources[name].samples)
        mixture_q += q
        filename = f"{name}.wav"
        write_wav(directory / filename, Signal(q.astype(np.float64) / 32768.0, rate))
        speakers.append(
            {"name": name, "wav": filename, "samples": int(q.size), "crc32": zlib.crc32(q.tobytes())}
        )
    if mixture_q.size and (mixture_q.max() > 32767 or mixture_q.min() < -32768):
        raise ValueError("summed sources exceed 16-bit range; lower the speaker gains")
    mixture = Signal(mixture_q.astype(np.float64) / 32768.0, rate)
    write_wav(directory / "mixture.wav", mixture)

    metadata = {
        "format_version": 1,
        "sample_rate": rate,
        "seed": truth.seed,
        "num_samples": truth.num_samples,
        "config": _config_to_dict(config),
        "speakers": speakers,
        "mixture": {
            "wav": "mixture.wav",
            "samples": truth.num_samples,
            "crc32": zlib.crc32(mixture_q.astype("<i2").tobytes()),
        },
        "utterances": [
            {
                "speaker": utt.speaker,
                "start": utt.span.start,
                "end": utt.span.end,
                "words": list(utt.words),
            }
            for utt in truth.utterances
        ],
    }
    (directory / TRUTH_FILENAME).write_text(json.dumps(metadata, indent=2, sort_keys=True) + "\n")


def _load_checked_wav(directory: Path, entry: dict, rate: int) -> Signal:
    path = directory / entry["wav"]
    if not path.exists():
        raise FormatError(f"missing audio file {entry['wav']}", path=path)
    signal = read_wav(path)
    if signal.sample_rate != rate:
        raise FormatError(f"sample rate {signal.sample_rate} != metadata rate {rate}", path=path)
    if len(signal) != entry["samples"]:
        raise FormatError(
            f"length {len(signal)} != metadata length {entry['samples']}", path=path
        )
    if _crc32(signal.samples) != entry["crc32"]:
        raise FormatError("checksum mismatch against metadata", path=path)
    return signal


def read_truth(directory: str | Path) -> tuple[MeetingTruth, SimConfig]:
    """Reload a truth bundle, verifying lengths and checksums."""
    directory = Path(directory)
    meta_path = directory / TRUTH_FILENAME
    if not meta_path.exists():
        raise FormatError(f"missing {TRUTH_FILENAME}", path=directory)
    metadata = json.loads(meta_path.read_text())
    rate = metadata["sample_rate"]

    sources = {
        entry["name"]: _load_checked_wav(directory, entry, rate)
        for entry in metadata["speakers"]
    }
    mixture = _load_checked_wav(directory, metadata["mixture"], rate)
    utterances = [
        Utterance(
            entry["speaker"],
            SampleSpan(entry["start"], entry["end"]),
            tuple(entry["words"]),
        )
        for entry in metadata["utterances"]
    ]
    truth = MeetingTruth(
        sample_rate=rate,
        mixture=mixture,
        sources=sources,
        utterances=utterances,
        seed=metadata["seed"],
    )
    truth.validate()
    return truth, _config_from_dict(metadata["config"])
