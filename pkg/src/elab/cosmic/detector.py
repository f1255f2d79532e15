"""Detector data files: parsing, validation, canonical serialization.

The text format is one header line followed by pulse lines, whitespace
separated, with `#` comments allowed anywhere:

    detector <id> <school> <city> <state> <lat_deg> <lon_deg> <alt_m>
    pulse <channel> <rise_ns> <fall_ns>

Times are unsigned nanoseconds on the UTC epoch (GPS-disciplined clocks),
channels run 1 to 4, and a pulse's time over threshold is fall - rise.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..metadata import MetadataTuple, ValueType

MAX_WIDTH_NS = 10_000  # 10 µs time over threshold
CHANNELS = (1, 2, 3, 4)


class DetectorDataError(Exception):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class EmptyFile(DetectorDataError):
    def __init__(self):
        super().__init__("no detector data in file")


class MalformedLine(DetectorDataError):
    pass


class ChannelOutOfRange(DetectorDataError):
    def __init__(self, line: int, channel: int):
        super().__init__(f"channel {channel} outside 1..4", line)
        self.channel = channel


class NonMonotonicTime(DetectorDataError):
    def __init__(self, line: int, channel: int):
        super().__init__(f"rise time not increasing on channel {channel}", line)
        self.channel = channel


class NegativeWidth(DetectorDataError):
    def __init__(self, line: int):
        super().__init__("pulse falls before it rises", line)


class PulseTooWide(DetectorDataError):
    def __init__(self, line: int, width: int):
        super().__init__(f"time over threshold {width} ns exceeds {MAX_WIDTH_NS} ns", line)


@dataclass(frozen=True, order=True)
class Pulse:
    rise_ns: int
    fall_ns: int
    channel: int

    @property
    def width_ns(self) -> int:
        return self.fall_ns - self.rise_ns


@dataclass(frozen=True)
class Dataset:
    detector_id: str
    school: str
    city: str
    state: str
    latitude: float
    longitude: float
    altitude_m: float
    pulses: tuple[Pulse, ...]

    @property
    def span_ns(self) -> int:
        if not self.pulses:
            return 0
        return self.pulses[-1].rise_ns - self.pulses[0].rise_ns


def parse_detector_text(text: str) -> Dataset:
    """Parse and canonicalize one detector file.

    Pulses may arrive interleaved across channels in any global order, but
    each channel's rise times must be strictly increasing in file order.
    The returned dataset is globally sorted by rise time.
    """
    header = None
    pulses: list[Pulse] = []
    last_rise: dict[int, int] = {}
    saw_content = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        saw_content = True
        fields = line.split()
        if fields[0] == "detector":
            if header is not None:
                raise MalformedLine("second detector header", lineno)
            if len(fields) != 8:
                raise MalformedLine(f"expected 7 header fields, got {len(fields) - 1}", lineno)
            try:
                header = (
                    fields[1], fields[2], fields[3], fields[4],
                    float(fields[5]), float(fields[6]), float(fields[7]),
                )
            except ValueError:
                raise MalformedLine("latitude/longitude/altitude must be numbers", lineno)
        elif fields[0] == "pulse":
            if header is None:
                raise MalformedLine("pulse before detector header", lineno)
            if len(fields) != 4:
                raise MalformedLine(f"expected 3 pulse fields, got {len(fields) - 1}", lineno)
            try:
                channel, rise, fall = int(fields[1]), int(fields[2]), int(fields[3])
            except ValueError:
                raise MalformedLine("pulse fields must be integers", lineno)
            if channel not in CHANNELS:
                raise ChannelOutOfRange(lineno, channel)
            if rise < 0 or fall < 0:
                raise MalformedLine("times must be unsigned", lineno)
            if fall < rise:
                raise NegativeWidth(lineno)
            if fall - rise >= MAX_WIDTH_NS:
                raise PulseTooWide(lineno, fall - rise)
            if channel in last_rise and rise <= last_rise[channel]:
                raise NonMonotonicTime(lineno, channel)
            last_rise[channel] = rise
            pulses.append(Pulse(rise, fall, channel))
        else:
            raise MalformedLine(f"unknown record {fields[0]!r}", lineno)
    if not saw_content:
        raise EmptyFile()
    if header is None:
        raise MalformedLine("missing detector header", 1)
    pulses.sort()
    return Dataset(*header, pulses=tuple(pulses))


def format_detector_text(ds: Dataset) -> str:
    """Canonical text form; parse(format(ds)) == ds."""
    lines = [
        "detector {} {} {} {} {} {} {}".format(
            ds.detector_id, ds.school, ds.city, ds.state,
            repr(ds.latitude), repr(ds.longitude), repr(ds.altitude_m),
        )
    ]
    for p in sorted(ds.pulses):
        lines.append(f"pulse {p.channel} {p.rise_ns} {p.fall_ns}")
    return "\n".join(lines) + "\n"


def validate_upload(raw: bytes) -> tuple[Dataset, list[MetadataTuple]]:
    """Dataset plus the auto-extracted tuples the catalog stores with it."""
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedLine(f"not UTF-8 text: {exc}", 1)
    ds = parse_detector_text(text)
    meta = [
        MetadataTuple("detector", ValueType.STRING, (ds.detector_id,)),
        MetadataTuple("school", ValueType.STRING, (ds.school,)),
        MetadataTuple("city", ValueType.STRING, (ds.city,)),
        MetadataTuple("state", ValueType.STRING, (ds.state,)),
        MetadataTuple("pulse_count", ValueType.INTEGER, (len(ds.pulses),)),
        MetadataTuple("span_seconds", ValueType.FLOAT, (ds.span_ns / 1e9,)),
    ]
    return ds, meta
