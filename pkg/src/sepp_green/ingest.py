"""Event catalogs: parsing delimited crime feeds, local projection, filtering.

Times are stored as fractional days since the catalog epoch (local midnight
of ``epoch``). Positions are kept both as geographic degrees and as planar
kilometres in an equirectangular frame around ``center``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

EARTH_RADIUS_KM = 6371.0

# Chicago south side, the study area centre.
CHICAGO_CENTER = (41.765, -87.665)
DISC_RADIUS_KM = 5.0

CHICAGO_DATE_FORMAT = "%m/%d/%Y %I:%M:%S %p"


class CatalogError(ValueError):
    """Raised when a catalog source cannot be read or is missing columns."""


@dataclass(frozen=True)
class Event:
    time: float
    lat: float
    lon: float
    x: float
    y: float
    kind: str


@dataclass(frozen=True)
class ColumnMapping:
    """Which header columns carry date, latitude, longitude and kind.

    Columns may be given by name or by zero-based index. ``date_format`` is a
    ``strptime`` format; ``None`` accepts ISO 8601 or the Chicago export
    format (``05/05/2010 10:00:00 AM``).
    """

    date: str | int = "Date"
    latitude: str | int = "Latitude"
    longitude: str | int = "Longitude"
    kind: str | int = "Primary Type"
    date_format: str | None = None

    def __post_init__(self):
        roles = [self.date, self.latitude, self.longitude, self.kind]
        if len(set(roles)) != 4:
            raise ValueError(f"column roles must map to distinct columns, got {roles}")


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EventCatalog:
    """Time-sorted events held as parallel read-only arrays.

    Attributes
    ----------
    t : ndarray
        Fractional days since ``epoch`` midnight.
    x, y : ndarray
        Planar km relative to ``center``.
    lat, lon : ndarray
        Degrees.
    kind : ndarray
        Object array of category labels.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    kind: np.ndarray
    epoch: date = date(2010, 5, 5)
    center: tuple[float, float] = CHICAGO_CENTER
    radius_km: float = math.inf
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = len(self.t)
        for name in ("x", "y", "lat", "lon", "kind"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name!r} has length {len(getattr(self, name))}, expected {n}")
        order = np.argsort(np.asarray(self.t, dtype=float), kind="stable")
        for name in ("t", "x", "y", "lat", "lon"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype=float)[order]))
        object.__setattr__(self, "kind", _frozen(np.asarray(self.kind, dtype=object)[order], dtype=object))

    @classmethod
    def from_arrays(cls, t, x, y, *, kind="event", epoch=date(2010, 5, 5),
                    center=CHICAGO_CENTER, radius_km=math.inf, meta=None) -> "EventCatalog":
        """Build a catalog from planar coordinates, back-projecting to degrees."""
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        lat, lon = unproject(x, y, center)
        if isinstance(kind, str):
            kind = np.full(len(t), kind, dtype=object)
        return cls(t, x, y, lat, lon, kind, epoch=epoch, center=tuple(center),
                   radius_km=radius_km, meta=dict(meta or {}))

    @classmethod
    def empty(cls, **kwargs) -> "EventCatalog":
        return cls.from_arrays([], [], [], **kwargs)

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i: int) -> Event:
        return Event(float(self.t[i]), float(self.lat[i]), float(self.lon[i]),
                     float(self.x[i]), float(self.y[i]), str(self.kind[i]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventCatalog):
            return NotImplemented
        return (self.epoch == other.epoch
                and tuple(self.center) == tuple(other.center)
                and self.radius_km == other.radius_km
                and all(np.array_equal(getattr(self, c), getattr(other, c))
                        for c in ("t", "x", "y", "lat", "lon"))
                and list(self.kind) == list(other.kind))

    @property
    def events(self) -> list[Event]:
        return list(self)

    def _take(self, mask, *, shift=0.0, **overrides) -> "EventCatalog":
        kwargs = dict(epoch=self.epoch, center=self.center, radius_km=self.radius_km,
                      meta=self.meta)
        kwargs.update(overrides)
        return EventCatalog(self.t[mask] - shift, self.x[mask], self.y[mask],
                            self.lat[mask], self.lon[mask], self.kind[mask], **kwargs)

    def select(self, mask) -> "EventCatalog":
        """Events where the boolean ``mask`` is true."""
        return self._take(np.asarray(mask, dtype=bool))

    def of_kind(self, *kinds: str) -> "EventCatalog":
        """Select events whose label is one of ``kinds``."""
        wanted = set(kinds)
        return self._take(np.array([k in wanted for k in self.kind], dtype=bool))

    def window(self, start_day: float, end_day: float) -> "EventCatalog":
        """Events with ``start_day <= t < end_day``, re-based so ``start_day`` is t=0.

        ``start_day`` should be a whole number of days so the epoch stays a
        calendar date.
        """
        mask = (self.t >= start_day) & (self.t < end_day)
        return self._take(mask, shift=start_day,
                          epoch=self.epoch + timedelta(days=float(start_day)))

    def day_index(self, dt: float = 1.0) -> np.ndarray:
        return np.floor(self.t / dt).astype(np.int64)

    def span_days(self) -> float:
        return float(self.t[-1] - self.t[0]) if len(self) else 0.0


def project(lat, lon, center=CHICAGO_CENTER):
    """Equirectangular projection to km around ``center``.

    Works on scalars or arrays. The centre maps to (0, 0).
    """
    lat0, lon0 = center
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    if np.any(np.abs(lat) > 90):
        raise ValueError("latitude outside [-90, 90]")
    k = EARTH_RADIUS_KM * math.pi / 180.0
    x = k * math.cos(math.radians(lat0)) * (lon - lon0)
    y = k * (lat - lat0)
    if x.ndim == 0:
        return float(x), float(y)
    return x, y


def unproject(x, y, center=CHICAGO_CENTER):
    lat0, lon0 = center
    k = EARTH_RADIUS_KM * math.pi / 180.0
    lat = lat0 + np.asarray(y, dtype=float) / k
    lon = lon0 + np.asarray(x, dtype=float) / (k * math.cos(math.radians(lat0)))
    return lat, lon


def _open_text(source) -> IO[str]:
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8-sig"))
    if isinstance(source, io.TextIOBase):
        return source
    if hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8-sig")
        return io.StringIO(data)
    try:
        return open(source, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise CatalogError(f"cannot read catalog source {source!r}: {exc}") from exc


def _parse_time(text: str, fmt: str | None) -> datetime:
    text = text.strip()
    if fmt is not None:
        return datetime.strptime(text, fmt)
    try:
        return datetime.fromisoformat(text)
    except ValueError:
        return datetime.strptime(text, CHICAGO_DATE_FORMAT)


def _resolve(header: Sequence[str], col: str | int) -> int:
    if isinstance(col, int):
        if not 0 <= col < len(header):
            raise CatalogError(f"column index {col} out of range for {len(header)} columns")
        return col
    try:
        return list(header).index(col)
    except ValueError:
        raise CatalogError(f"missing column {col!r}") from None


def parse_catalog(source, mapping: ColumnMapping = ColumnMapping(), *,
                  center=CHICAGO_CENTER, epoch: date | None = None) -> tuple[EventCatalog, int]:
    """Read a comma- or tab-delimited event table.

    Rows whose date, latitude or longitude do not parse (or are not finite)
    are skipped and counted. The epoch defaults to the calendar day of the
    earliest parsed event.

    Returns
    -------
    catalog, n_skipped
    """
    fh = _open_text(source)
    try:
        text = fh.read()
    finally:
        if fh is not source:
            fh.close()
    first = text.split("\n", 1)[0]
    delimiter = "\t" if first.count("\t") > first.count(",") else ","
    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise CatalogError("catalog source has no header row") from None
    cols = [_resolve(header, c) for c in (mapping.date, mapping.latitude, mapping.longitude, mapping.kind)]
    need = max(cols)

    stamps, lats, lons, kinds = [], [], [], []
    skipped = 0
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) <= need:
            skipped += 1
            continue
        try:
            ts = _parse_time(row[cols[0]], mapping.date_format)
            la = float(row[cols[1]])
            lo = float(row[cols[2]])
        except ValueError:
            skipped += 1
            continue
        if not (math.isfinite(la) and math.isfinite(lo)) or abs(la) > 90:
            skipped += 1
            continue
        stamps.append(ts)
        lats.append(la)
        lons.append(lo)
        kinds.append(row[cols[3]].strip())

    if epoch is None:
        epoch = min(stamps).date() if stamps else date(1970, 1, 1)
    origin = datetime.combine(epoch, datetime.min.time())
    t = np.array([(s - origin) / timedelta(days=1) for s in stamps], dtype=float)
    lat = np.array(lats, dtype=float)
    lon = np.array(lons, dtype=float)
    if len(lat):
        x, y = project(lat, lon, center)
    else:
        x = y = np.empty(0)
    cat = EventCatalog(t, x, y, lat, lon, np.array(kinds, dtype=object),
                       epoch=epoch, center=tuple(center))
    return cat, skipped


def filter_catalog(catalog: EventCatalog, center=CHICAGO_CENTER, radius_km: float = DISC_RADIUS_KM,
                   start_date: date | None = None, end_date: date | None = None) -> EventCatalog:
    """Keep events within ``radius_km`` of ``center`` and in ``[start_date, end_date)``.

    Events are re-projected around ``center`` and times re-based to
    ``start_date``. Boundary distance ``== radius_km`` is kept.
    """
    start_date = start_date or catalog.epoch
    if end_date is not None and end_date < start_date:
        raise ValueError("start_date must not be after end_date")
    x, y = project(catalog.lat, catalog.lon, center) if len(catalog) else (np.empty(0), np.empty(0))
    shift = (start_date - catalog.epoch).days
    t = catalog.t - shift
    mask = np.hypot(x, y) <= radius_km
    mask &= t >= 0
    if end_date is not None:
        mask &= t < (end_date - start_date).days
    return EventCatalog(t[mask], np.asarray(x)[mask], np.asarray(y)[mask],
                        catalog.lat[mask], catalog.lon[mask], catalog.kind[mask],
                        epoch=start_date, center=tuple(center), radius_km=radius_km,
                        meta=catalog.meta)


CANONICAL_COLUMNS = ("t_days", "x_km", "y_km", "lat", "lon", "kind")


def write_canonical(catalog: EventCatalog, fh: IO[str]) -> None:
    """Canonical CSV: a ``#`` metadata line then one row per event.

    Floats are written with ``repr`` so a read back is bit-identical.
    """
    lat0, lon0 = catalog.center
    fh.write(f"# epoch={catalog.epoch.isoformat()} center={lat0!r},{lon0!r} radius_km={catalog.radius_km!r}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CANONICAL_COLUMNS)
    for i in range(len(catalog)):
        w.writerow([repr(float(catalog.t[i])), repr(float(catalog.x[i])), repr(float(catalog.y[i])),
                    repr(float(catalog.lat[i])), repr(float(catalog.lon[i])), catalog.kind[i]])


def read_canonical(source) -> EventCatalog:
    fh = _open_text(source)
    try:
        lines = fh.read().splitlines()
    finally:
        if fh is not source:
            fh.close()
    if not lines or not lines[0].startswith("#"):
        raise CatalogError("canonical catalog must start with a '# epoch=...' metadata line")
    meta = dict(tok.split("=", 1) for tok in lines[0][1:].split())
    try:
        epoch = date.fromisoformat(meta["epoch"])
        lat0, lon0 = (float(v) for v in meta["center"].split(","))
        radius = float(meta["radius_km"])
    except (KeyError, ValueError) as exc:
        raise CatalogError(f"bad canonical metadata line: {lines[0]!r}") from exc
    reader = csv.reader(lines[1:])
    header = next(reader, None)
    if header is None or tuple(header) != CANONICAL_COLUMNS:
        raise CatalogError(f"canonical header must be {','.join(CANONICAL_COLUMNS)}")
    rows = [r for r in reader if r]
    cols = list(zip(*rows)) if rows else [()] * 6
    return EventCatalog(np.array(cols[0], dtype=float), np.array(cols[1], dtype=float),
                        np.array(cols[2], dtype=float), np.array(cols[3], dtype=float),
                        np.array(cols[4], dtype=float), np.array(cols[5], dtype=object),
                        epoch=epoch, center=(lat0, lon0), radius_km=radius)


def concat(catalogs: Iterable[EventCatalog]) -> EventCatalog:
    """Merge catalogs sharing epoch and centre."""
    cats = list(catalogs)
    if not cats:
        return EventCatalog.empty()
    head = cats[0]
    for c in cats[1:]:
        if c.epoch != head.epoch or tuple(c.center) != tuple(head.center):
            raise ValueError("catalogs must share epoch and center to be merged")
    return EventCatalog(*(np.concatenate([getattr(c, k) for c in cats]) for k in ("t", "x", "y", "lat", "lon")),
                        np.concatenate([c.kind for c in cats]),
                        epoch=head.epoch, center=head.center, radius_km=max(c.radius_km for c in cats))
