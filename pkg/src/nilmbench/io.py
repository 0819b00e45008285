"""Dataset and model persistence.

On-disk dataset layout (one directory per dataset):

    <root>/metadata.json
    <root>/house_<i>/metadata.json
    <root>/house_<i>/ambient/                 (reserved, kept empty)
    <root>/house_<i>/external/                (reserved, kept empty)
    <root>/house_<i>/utility/electricity/mains/mains_<j>.csv
    <root>/house_<i>/utility/electricity/circuits/<name>.csv
    <root>/house_<i>/utility/electricity/appliances/<name>.csv
    <root>/house_<i>/utility/electricity/wiring.json
    <root>/house_<i>/utility/gas/             (pass-through, kept empty)
    <root>/house_<i>/utility/water/           (pass-through, kept empty)

Channel CSVs have a mandatory header: first column ``timestamp`` (epoch
seconds, up to 6 decimal places), remaining columns named
``<quantity>_<variant>`` (``power_active``, ``voltage``, ...).  Values are
written with shortest round-trip formatting, so a save/load cycle preserves
floats bit-for-bit.

Learned models persist as JSON: an ``algorithm`` tag plus per-appliance state
means/stds, and for the factorial model additionally pi, the transition
matrix and the aggregate noise variance.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import (
    Building,
    Channel,
    DataSet,
    Measurement,
    POWER_ACTIVE,
    canonical_label,
    dataset_label_map,
)
from .training import (
    ApplianceHMM,
    ApplianceStateModel,
    COModel,
    FHMMModel,
)

_HOUSE_DIR = re.compile(r"^house_(\d+)$")
_CHANNEL_FILE = re.compile(r"^channel_(\d+)\.dat$")


class SchemaError(ValueError):
    """A dataset directory or model file violates the expected schema."""


# ---------------------------------------------------------------------------
# CSV helpers
# ---------------------------------------------------------------------------


def _format_timestamp(t: float) -> str:
    s = f"{t:.6f}".rstrip("0").rstrip(".")
    return s if s else "0"


def _write_channel_csv(path: Path, c: Channel) -> None:
    measurements = sorted(c.columns, key=lambda m: m.column_name)
    header = ",".join(["timestamp"] + [m.column_name for m in measurements])
    cols = [c.columns[m] for m in measurements]
    with path.open("w", encoding="utf-8", newline="\n") as f:
        f.write(header + "\n")
        for i, t in enumerate(c.timestamps):
            row = [_format_timestamp(float(t))] + [repr(float(v[i])) for v in cols]
            f.write(",".join(row) + "\n")


def _read_channel_csv(path: Path, channel_id: str, nominal_period: float) -> Channel:
    with path.open("r", encoding="utf-8") as f:
        header = f.readline().strip()
        if not header:
            raise SchemaError(f"{path}: missing header row")
        names = header.split(",")
        if names[0] != "timestamp":
            raise SchemaError(f"{path}: first column must be 'timestamp'")
        try:
            measurements = [Measurement.from_column_name(n) for n in names[1:]]
        except ValueError as e:
            raise SchemaError(f"{path}: unknown measurement ({e})") from None
        timestamps: list[float] = []
        values: list[list[float]] = [[] for _ in measurements]
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(names):
                raise SchemaError(
                    f"{path}:{lineno}: expected {len(names)} fields, got {len(parts)}"
                )
            try:
                t = float(parts[0])
                row = [float(p) for p in parts[1:]]
            except ValueError:
                raise SchemaError(f"{path}:{lineno}: non-numeric value") from None
            if timestamps and t <= timestamps[-1]:
                kind = "duplicate" if t == timestamps[-1] else "non-monotone"
                raise SchemaError(f"{path}:{lineno}: {kind} timestamp {parts[0]}")
            if not all(np.isfinite(row)):
                raise SchemaError(f"{path}:{lineno}: non-finite value")
            timestamps.append(t)
            for j, v in enumerate(row):
                values[j].append(v)
    return Channel(
        id=channel_id,
        timestamps=np.asarray(timestamps, dtype=np.float64),
        columns={
            m: np.asarray(vals, dtype=np.float64)
            for m, vals in zip(measurements, values)
        },
        nominal_period=nominal_period,
    )


# ---------------------------------------------------------------------------
# Dataset directory save/load
# ---------------------------------------------------------------------------


def save_dataset_dir(ds: DataSet, root: str | Path) -> None:
    """Write the canonical on-disk layout for a dataset."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    (root / "metadata.json").write_text(
        json.dumps({"name": ds.name, "metadata": ds.metadata}, indent=2, sort_keys=True)
        + "\n",
        encoding="utf-8",
    )
    for bid in sorted(ds.buildings):
        b = ds.buildings[bid]
        house = root / f"house_{bid}"
        elec = house / "utility" / "electricity"
        for sub in ("ambient", "external"):
            (house / sub).mkdir(parents=True, exist_ok=True)
        for sub in ("gas", "water"):
            (house / "utility" / sub).mkdir(parents=True, exist_ok=True)
        for sub in ("mains", "circuits", "appliances"):
            (elec / sub).mkdir(parents=True, exist_ok=True)
        periods: dict[str, float] = {}
        for j, c in enumerate(b.mains, start=1):
            _write_channel_csv(elec / "mains" / f"mains_{j}.csv", c)
            periods[f"mains/mains_{j}"] = c.nominal_period
        for c in b.circuits:
            _write_channel_csv(elec / "circuits" / f"{c.id}.csv", c)
            periods[f"circuits/{c.id}"] = c.nominal_period
        for name in sorted(b.appliances):
            _write_channel_csv(elec / "appliances" / f"{name}.csv", b.appliances[name])
            periods[f"appliances/{name}"] = b.appliances[name].nominal_period
        (elec / "wiring.json").write_text(
            json.dumps({"edges": [list(e) for e in b.wiring]}, indent=2, sort_keys=True)
            + "\n",
            encoding="utf-8",
        )
        (house / "metadata.json").write_text(
            json.dumps(
                {"id": b.id, "metadata": b.metadata, "channel_periods": periods},
                indent=2,
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )


def load_dataset_dir(root: str | Path) -> DataSet:
    """Inverse of :func:`save_dataset_dir` (also accepts hand-authored trees)."""
    root = Path(root)
    if not root.is_dir():
        raise SchemaError(f"{root}: not a directory")
    name = root.name
    metadata: dict = {}
    meta_path = root / "metadata.json"
    if meta_path.exists():
        raw = json.loads(meta_path.read_text(encoding="utf-8"))
        name = raw.get("name", name)
        metadata = raw.get("metadata", {})
    buildings: dict[int, Building] = {}
    for entry in sorted(p.name for p in root.iterdir() if p.is_dir()):
        m = _HOUSE_DIR.match(entry)
        if not m:
            continue
        bid = int(m.group(1))
        buildings[bid] = _load_house(root / entry, bid)
    return DataSet(name=name, buildings=buildings, metadata=metadata)


def _load_house(house: Path, bid: int) -> Building:
    meta_path = house / "metadata.json"
    b_meta: dict = {}
    periods: dict[str, float] = {}
    if meta_path.exists():
        raw = json.loads(meta_path.read_text(encoding="utf-8"))
        b_meta = raw.get("metadata", {})
        periods = raw.get("channel_periods", {})
    elec = house / "utility" / "electricity"

    def period_for(rel: str, default: float = 1.0) -> float:
        return float(periods.get(rel, b_meta.get("nominal_period", default)))

    mains = []
    mains_dir = elec / "mains"
    if mains_dir.is_dir():
        for f in sorted(mains_dir.glob("*.csv")):
            rel = f"mains/{f.stem}"
            mains.append(_read_channel_csv(f, f.stem, period_for(rel)))
    circuits = []
    circuits_dir = elec / "circuits"
    if circuits_dir.is_dir():
        for f in sorted(circuits_dir.glob("*.csv")):
            rel = f"circuits/{f.stem}"
            circuits.append(_read_channel_csv(f, f.stem, period_for(rel)))
    appliances = {}
    appliances_dir = elec / "appliances"
    if appliances_dir.is_dir():
        for f in sorted(appliances_dir.glob("*.csv")):
            rel = f"appliances/{f.stem}"
            appliances[f.stem] = _read_channel_csv(f, f.stem, period_for(rel))
    wiring: tuple = ()
    wiring_path = elec / "wiring.json"
    if wiring_path.exists():
        raw = json.loads(wiring_path.read_text(encoding="utf-8"))
        wiring = tuple((str(p), str(c)) for p, c in raw.get("edges", []))
    else:
        warnings.warn(f"{wiring_path} missing; assuming empty wiring", stacklevel=2)
    return Building(
        id=bid,
        mains=tuple(mains),
        circuits=tuple(circuits),
        appliances=appliances,
        metadata=b_meta,
        wiring=wiring,
    )


# ---------------------------------------------------------------------------
# REDD-style importer
# ---------------------------------------------------------------------------


@dataclass
class ImportReport:
    """Row-level issues encountered while importing a raw dataset."""

    skipped: int = 0
    duplicates: int = 0
    details: list[str] = field(default_factory=list)

    def note(self, msg: str, cap: int = 50) -> None:
        if len(self.details) < cap:
            self.details.append(msg)


def import_redd_style(
    root: str | Path,
    dataset_name: str = "REDD",
    nominal_period: float = 3.0,
    mains_channels: tuple[int, ...] = (1, 2),
) -> tuple[DataSet, ImportReport]:
    """Import a directory of per-house flat files.

    Expected shape: ``house_<i>/labels.dat`` mapping channel number to a raw
    appliance label, and ``house_<i>/channel_<j>.dat`` rows of
    ``<epoch seconds> <watts>``.  Channels listed in ``mains_channels``
    become mains; all others become appliances with canonicalized labels.
    Malformed rows are skipped and counted; duplicate timestamps keep the
    first occurrence.
    """
    root = Path(root)
    if not root.is_dir():
        raise SchemaError(f"{root}: not a directory")
    report = ImportReport()
    houses = sorted(
        (int(m.group(1)), p)
        for p in root.iterdir()
        if p.is_dir() and (m := _HOUSE_DIR.match(p.name))
    )
    if not houses:
        raise SchemaError(f"{root}: no houses found")
    buildings: dict[int, Building] = {}
    for bid, house in houses:
        labels_path = house / "labels.dat"
        if not labels_path.exists():
            raise SchemaError(f"{labels_path}: missing labels file")
        labels: dict[int, str] = {}
        for lineno, line in enumerate(
            labels_path.read_text(encoding="utf-8").splitlines(), start=1
        ):
            line = line.strip()
            if not line:
                continue
            parts = line.split(maxsplit=1)
            if len(parts) != 2 or not parts[0].isdigit():
                raise SchemaError(f"{labels_path}:{lineno}: malformed label row")
            labels[int(parts[0])] = parts[1].strip()
        mains = []
        appliances: dict[str, Channel] = {}
        label_counts: dict[str, int] = {}
        for f in sorted(house.glob("channel_*.dat")):
            m = _CHANNEL_FILE.match(f.name)
            if not m:
                continue
            ch_num = int(m.group(1))
            channel = _read_flat_file(f, nominal_period, report)
            if ch_num in mains_channels:
                mains.append((ch_num, channel))
            else:
                raw_label = labels.get(ch_num, f"channel_{ch_num}")
                canon = canonical_label(raw_label, dataset_name)
                label_counts[canon] = label_counts.get(canon, 0) + 1
                key = (
                    canon
                    if label_counts[canon] == 1
                    else f"{canon}_{label_counts[canon]}"
                )
                appliances[key] = Channel(
                    id=key,
                    timestamps=channel.timestamps,
                    columns=dict(channel.columns),
                    nominal_period=nominal_period,
                )
        mains_list = tuple(
            Channel(
                id=f"mains_{i}",
                timestamps=c.timestamps,
                columns=dict(c.columns),
                nominal_period=nominal_period,
            )
            for i, (_, c) in enumerate(sorted(mains, key=lambda x: x[0]), start=1)
        )
        wiring = tuple(
            ("mains_1", name) for name in sorted(appliances)
        ) if mains_list else ()
        buildings[bid] = Building(
            id=bid,
            mains=mains_list,
            appliances=dict(sorted(appliances.items())),
            metadata={"source": dataset_name},
            wiring=wiring,
        )
    ds = DataSet(
        name=dataset_name,
        buildings=buildings,
        metadata={"import_skipped_rows": report.skipped},
    )
    return ds, report


def _read_flat_file(
    path: Path, nominal_period: float, report: ImportReport
) -> Channel:
    timestamps: list[float] = []
    powers: list[float] = []
    with path.open("r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                report.skipped += 1
                report.note(f"{path}:{lineno}: expected 2 fields")
                continue
            try:
                t = float(parts[0])
                p = float(parts[1])
            except ValueError:
                report.skipped += 1
                report.note(f"{path}:{lineno}: non-numeric row")
                continue
            if not (np.isfinite(t) and np.isfinite(p)):
                report.skipped += 1
                report.note(f"{path}:{lineno}: non-finite row")
                continue
            if timestamps and t <= timestamps[-1]:
                if t == timestamps[-1]:
                    report.duplicates += 1
                    report.note(f"{path}:{lineno}: duplicate timestamp")
                    continue
                report.skipped += 1
                report.note(f"{path}:{lineno}: out-of-order timestamp")
                continue
            timestamps.append(t)
            powers.append(p)
    return Channel(
        id=path.stem,
        timestamps=np.asarray(timestamps, dtype=np.float64),
        columns={POWER_ACTIVE: np.asarray(powers, dtype=np.float64)},
        nominal_period=nominal_period,
    )


# ---------------------------------------------------------------------------
# Importer registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ImporterDescriptor:
    """Registry entry describing how one public dataset is laid out.

    ``label_map`` carries the dataset's raw-to-canonical appliance names.
    ``importer`` is None for layouts documented but not shipped; the
    registry still records their shape and sampling so an importer can be
    added behind the common interface.
    """

    dataset_name: str
    root_layout: str
    nominal_period: float
    label_map: dict = field(default_factory=dict)
    importer: object | None = None


IMPORTER_REGISTRY: dict[str, ImporterDescriptor] = {}


def register_importer(desc: ImporterDescriptor) -> None:
    if desc.dataset_name in IMPORTER_REGISTRY:
        raise ValueError(f"importer {desc.dataset_name!r} already registered")
    IMPORTER_REGISTRY[desc.dataset_name] = desc


register_importer(
    ImporterDescriptor(
        dataset_name="REDD",
        root_layout="house_<i>/labels.dat + house_<i>/channel_<j>.dat "
        "(rows '<epoch> <watts>'; channels 1-2 are mains)",
        nominal_period=3.0,
        label_map=dataset_label_map("REDD"),
        importer=import_redd_style,
    )
)
for _name, _key, _layout, _period in (
    ("Smart*", "SMART", "homeX/<circuit|meter>.csv per-second readings", 1.0),
    ("PecanStreet", "PECANSTREET",
     "single CSV per home, one column per circuit, 1-minute rows", 60.0),
    ("iAWE", "IAWE", "per-meter CSV dumps at 1-6 s", 1.0),
    ("AMPds", "AMPDS", "single CSV per meter, 1-minute rows, coded column names", 60.0),
    ("UK-DALE", "UKDALE", "house_<i>/labels.dat + channel_<j>.dat at 6 s", 6.0),
):
    register_importer(
        ImporterDescriptor(
            dataset_name=_name,
            root_layout=_layout,
            nominal_period=_period,
            label_map=dataset_label_map(_key),
        )
    )


# ---------------------------------------------------------------------------
# Model JSON
# ---------------------------------------------------------------------------


def export_model_json(model: COModel | FHMMModel) -> str:
    """Serialize a trained model; floats survive a round trip exactly."""
    if isinstance(model, COModel):
        payload = {
            "algorithm": "co",
            "appliances": [
                {
                    "name": a.name,
                    "states": [
                        {"mean": float(m), "std": float(s)}
                        for m, s in zip(a.means, a.stds)
                    ],
                }
                for a in model.appliances
            ],
        }
    elif isinstance(model, FHMMModel):
        payload = {
            "algorithm": "fhmm",
            "noise_variance": float(model.noise_variance),
            "appliances": [
                {
                    "name": a.name,
                    "states": [
                        {"mean": float(m), "std": float(s)}
                        for m, s in zip(a.base.means, a.base.stds)
                    ],
                    "pi": [float(p) for p in a.pi],
                    "A": [[float(v) for v in row] for row in a.A],
                }
                for a in model.appliances
            ],
        }
    else:
        raise TypeError(f"cannot export {type(model).__name__}")
    return json.dumps(payload, indent=2, sort_keys=True)


def import_model_json(text: str) -> COModel | FHMMModel:
    """Parse and validate a model produced by :func:`export_model_json`."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"model JSON is not valid JSON: {e}") from None
    if "algorithm" not in raw:
        raise SchemaError("model JSON missing 'algorithm' field")
    algorithm = raw["algorithm"]
    entries = raw.get("appliances")
    if not entries:
        raise SchemaError("model JSON has no appliances")

    def base_of(entry: dict) -> ApplianceStateModel:
        states = entry.get("states")
        if not states:
            raise SchemaError(f"appliance {entry.get('name')!r} has no states")
        means = [s["mean"] for s in states]
        stds = [s["std"] for s in states]
        if any(s <= 0 for s in stds):
            raise SchemaError(
                f"appliance {entry.get('name')!r}: stds must be positive"
            )
        return ApplianceStateModel(
            name=str(entry["name"]), means=np.array(means), stds=np.array(stds)
        )

    if algorithm == "co":
        return COModel(appliances=tuple(base_of(e) for e in entries))
    if algorithm == "fhmm":
        appliances = []
        for e in entries:
            base = base_of(e)
            pi = np.asarray(e.get("pi", ()), dtype=np.float64)
            A = np.asarray(e.get("A", ()), dtype=np.float64)
            if pi.shape != (base.K,):
                raise SchemaError(f"appliance {base.name!r}: pi must have length {base.K}")
            if abs(float(pi.sum()) - 1.0) > 1e-6:
                raise SchemaError(f"appliance {base.name!r}: pi must sum to 1")
            if A.shape != (base.K, base.K):
                raise SchemaError(f"appliance {base.name!r}: A must be {base.K}x{base.K}")
            if np.any(np.abs(A.sum(axis=1) - 1.0) > 1e-6):
                raise SchemaError(f"appliance {base.name!r}: rows of A must sum to 1")
            appliances.append(ApplianceHMM(base=base, pi=pi, A=A))
        return FHMMModel(
            appliances=tuple(appliances),
            noise_variance=float(raw.get("noise_variance", 0.0)),
        )
    raise SchemaError(f"unknown algorithm {algorithm!r}")


def load_daily_series_csv(path: str | Path) -> dict[int, float]:
    """Read a daily external series (weather etc.) as {epoch day: value}.

    Rows are ``<YYYY-MM-DD or epoch day>,<value>``; a header row is optional.
    """
    import datetime as _dt

    out: dict[int, float] = {}
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        line = line.strip()
        if not line:
            continue
        day_s, _, value_s = line.partition(",")
        try:
            value = float(value_s)
        except ValueError:
            if lineno == 1:
                continue  # header
            raise SchemaError(f"{path}:{lineno}: non-numeric value") from None
        day_s = day_s.strip()
        if re.fullmatch(r"-?\d+", day_s):
            day = int(day_s)
        else:
            try:
                date = _dt.date.fromisoformat(day_s)
            except ValueError:
                raise SchemaError(f"{path}:{lineno}: bad date {day_s!r}") from None
            day = (date - _dt.date(1970, 1, 1)).days
        out[day] = value
    return out
