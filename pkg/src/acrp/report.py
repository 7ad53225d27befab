"""Report data model: canonical encoding, hashing, routing, auditor selection."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from enum import IntEnum
from typing import List, Optional, Sequence, Tuple

from .chunking import (
    ChunkingScheme,
    ImageDescriptor,
    chunk_location,
    chunk_picture,
    chunk_text,
    reassemble_image,
    reassemble_text,
)
from .encoding import DecodeError, Reader, i32, lp, u8, u32
from .redactable import ChunkedMessage

MICRODEG = 10**6
EARTH_RADIUS_M = 6_371_000.0

AUDITOR_SELECT_LABEL = b"acrp-auditor"


class ReportType(IntEnum):
    Pothole = 0
    TrashDump = 1
    Graffiti = 2
    StreetDamage = 3
    TrafficObstruction = 4
    Other = 5


class InvalidReport(ValueError):
    pass


class NoResponsibleAuthority(LookupError):
    pass


class EmptyRegistry(LookupError):
    pass


@dataclass(frozen=True)
class Report:
    """The citizen-filed tuple: type, location, picture, description."""

    report_type: ReportType
    lat_udeg: int
    lon_udeg: int
    picture: ImageDescriptor
    scheme: ChunkingScheme
    description: str

    def validate(self) -> None:
        if not isinstance(self.report_type, ReportType):
            raise InvalidReport(f"unknown report type {self.report_type}")
        if not (-90 * MICRODEG <= self.lat_udeg <= 90 * MICRODEG):
            raise InvalidReport(f"latitude {self.lat_udeg} out of range")
        if not (-180 * MICRODEG <= self.lon_udeg <= 180 * MICRODEG):
            raise InvalidReport(f"longitude {self.lon_udeg} out of range")

    def picture_message(self) -> ChunkedMessage:
        return chunk_picture(self.picture, self.scheme)

    def location_message(self) -> ChunkedMessage:
        return chunk_location(self.lat_udeg, self.lon_udeg)

    def description_message(self) -> ChunkedMessage:
        return chunk_text(self.description)


def canonical_encode(r: Report) -> bytes:
    """Deterministic binary preimage for the report hash.

    Layout: type u8, lat i32, lon i32, picture chunk stream (u32-length-
    prefixed chunks) behind a u32 byte count, then the UTF-8 description
    behind a u32 byte count.  Bit-exact across implementations.
    """
    r.validate()
    p_bytes = b"".join(lp(c) for c in r.picture_message().chunks)
    d_bytes = r.description.encode("utf-8")
    return (
        u8(r.report_type)
        + i32(r.lat_udeg)
        + i32(r.lon_udeg)
        + u32(len(p_bytes))
        + p_bytes
        + u32(len(d_bytes))
        + d_bytes
    )


def canonical_decode(data: bytes) -> Report:
    """Invert canonical_encode, reconstructing image and scheme from chunks."""
    rd = Reader(data)
    rtype = ReportType(rd.u8())
    lat = rd.i32()
    lon = rd.i32()
    p_bytes = rd.lp()
    d_bytes = rd.lp()
    rd.expect_done()
    pr = Reader(p_bytes)
    chunks = []
    while not pr.done():
        chunks.append(pr.lp())
    from .redactable import FieldTag

    img, scheme = reassemble_image(ChunkedMessage(FieldTag.Picture, tuple(chunks)))
    return Report(rtype, lat, lon, img, scheme, d_bytes.decode("utf-8"))


def report_id(r: Report) -> bytes:
    """32-byte digest of the canonical encoding: the on-chain announce value."""
    return hashlib.sha256(canonical_encode(r)).digest()


BBox = Tuple[int, int, int, int]  # lat_min, lat_max, lon_min, lon_max in microdegrees


@dataclass(frozen=True)
class AuthorityEntry:
    report_type: Optional[ReportType]  # None matches every type
    bbox: BBox
    public_key: bytes


@dataclass(frozen=True)
class AuthorityDirectory:
    entries: Tuple[AuthorityEntry, ...]


def route(
    report_type: ReportType, lat_udeg: int, lon_udeg: int, directory: AuthorityDirectory
) -> bytes:
    """First-match routing: type matches and the bounding box contains L.

    Boundary points belong to every box they touch; the first listed entry
    wins ties.
    """
    for entry in directory.entries:
        if entry.report_type is not None and entry.report_type != report_type:
            continue
        lat_min, lat_max, lon_min, lon_max = entry.bbox
        if lat_min <= lat_udeg <= lat_max and lon_min <= lon_udeg <= lon_max:
            return entry.public_key
    raise NoResponsibleAuthority(f"no authority for type {report_type} at ({lat_udeg},{lon_udeg})")


@dataclass(frozen=True)
class AuditorRegistry:
    """On-chain registration order of auditor keys with activation heights."""

    auditors: Tuple[Tuple[bytes, int], ...]  # (public key, activation height)

    def active_at(self, height: int) -> List[bytes]:
        return [pk for pk, act in self.auditors if act <= height]


def select_auditor(
    rid: bytes, beacon: bytes, registry: AuditorRegistry, height: Optional[int] = None
) -> Tuple[int, bytes]:
    """Pseudorandom, publicly recomputable auditor choice.

    beacon is the hash of the first block after the one carrying the
    announce, so the citizen cannot predict the auditor before announcing.
    """
    active = registry.active_at(height) if height is not None else [pk for pk, _ in registry.auditors]
    if not active:
        raise EmptyRegistry("no active auditors")
    digest = hashlib.sha256(AUDITOR_SELECT_LABEL + rid + beacon).digest()
    index = int.from_bytes(digest, "big") % len(active)
    return index, active[index]


def haversine_m(a: Tuple[int, int], b: Tuple[int, int]) -> float:
    """Great-circle distance in meters between two microdegree (lat, lon) pairs."""
    lat1, lon1 = (math.radians(v / MICRODEG) for v in a)
    lat2, lon2 = (math.radians(v / MICRODEG) for v in b)
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    s = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(s)))
