"""Rolling-window datasets, per-fund weighting and the vintage-stratified
train/test split."""
from __future__ import annotations

import json
import math
import struct
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .dataio import atomic_write_bytes
from .fund_data import FundSeries

FEATURE_SETS = {
    "flows": ("qcc", "qdc", "rvc"),
    "cumulative": ("cc", "dc", "rvc"),
    "ratios": ("called", "dpi", "rvpi"),
}
FLOW_NAMES = FEATURE_SETS["flows"]
LABEL_NAMES = ("rc", "g", "b")


class WindowError(ValueError):
    pass


def space_matrix(fund: FundSeries, space: str) -> np.ndarray:
    """(T, 3) matrix of a fund's series in one of the FEATURE_SETS spaces."""
    f = fund.flows
    if space == "flows":
        return f.as_matrix()
    cc, dc = np.cumsum(f.qcc), np.cumsum(f.qdc)
    if space == "cumulative":
        return np.column_stack([cc, dc, f.rvc])
    if space == "ratios":
        with np.errstate(divide="ignore", invalid="ignore"):
            dpi = np.where(cc > 0, dc / cc, 0.0)
            rvpi = np.where(cc > 0, f.rvc / cc, 0.0)
        return np.column_stack([cc, dpi, rvpi])
    raise WindowError(f"unknown series space {space!r}; expected one of {sorted(FEATURE_SETS)}")


@dataclass(frozen=True)
class RollingWindow:
    """One (lookback, prediction) slice of a fund.

    ``flows_lookback`` / ``flows_target`` always hold (qCC, qDC, RVC) so the
    benchmark and scoring work whatever the model spaces are. ``origin`` and
    ``anchor`` are the (CC, DC, RVC) states just before the lookback and at
    its last quarter. Period indices are 1-based: the lookback's first quarter
    is period ``window_index + 1``.
    """

    fund_id: str
    vintage_year: int
    window_index: int
    lookback: np.ndarray
    target: np.ndarray
    weight: float
    target_mask: np.ndarray
    flows_lookback: np.ndarray
    flows_target: np.ndarray
    origin: tuple
    anchor: tuple
    label: Optional[tuple] = None
    label_objective: Optional[float] = None

    @property
    def w_in(self) -> int:
        return self.lookback.shape[0]

    @property
    def w_out(self) -> int:
        return self.target.shape[0]

    @property
    def lookback_start_quarter(self) -> int:
        return self.window_index + 1

    @property
    def target_start_quarter(self) -> int:
        return self.window_index + self.w_in + 1


@dataclass
class WindowSet:
    w_in: int
    w_out: int
    features: tuple
    targets: tuple
    windows: list = field(default_factory=list)
    target_space: str = "flows"

    def __len__(self):
        return len(self.windows)

    def arrays(self, use_labels: bool = False) -> dict:
        """Stacked arrays for training: x, y, weights, mask."""
        if not self.windows:
            raise WindowError("empty window set")
        x = np.stack([w.lookback for w in self.windows])
        if use_labels:
            if any(w.label is None for w in self.windows):
                raise WindowError("windows carry no calibration labels")
            y = np.array([w.label for w in self.windows], dtype=float)[:, None, :]
            mask = np.ones((len(self.windows), 1), dtype=bool)
        else:
            y = np.stack([w.target for w in self.windows])
            mask = np.stack([w.target_mask for w in self.windows])
        weights = np.array([w.weight for w in self.windows])
        return {"x": x, "y": y, "weights": weights, "mask": mask}

    def fund_ids(self) -> list:
        return sorted({w.fund_id for w in self.windows})

    def subset_funds(self, fund_ids) -> "WindowSet":
        keep = set(fund_ids)
        return replace(self, windows=[w for w in self.windows if w.fund_id in keep])


def make_windows(dataset, w_in: int, w_out: int, features: str = "flows", targets: str = "flows") -> WindowSet:
    """Cut every fund into stride-1 windows of ``w_in`` lookback and ``w_out``
    prediction quarters, weighted 1 / (windows of that fund)."""
    if w_in < 1 or w_out < 1:
        raise WindowError(f"w_in and w_out must be >= 1, got {w_in}, {w_out}")
    w = w_in + w_out
    extra_names = None
    out = []
    short = sorted({f.vintage_year for f in dataset if len(f) < w})
    if short:
        raise WindowError(f"vintage {short[0]} has series shorter than the rolling window w={w}")
    for fund in dataset:
        if extra_names is None:
            extra_names = fund.extra_names
        elif fund.extra_names != extra_names:
            raise WindowError(f"fund {fund.fund_id}: feature columns differ from the rest of the dataset")
        feat = space_matrix(fund, features)
        if fund.extra is not None:
            feat = np.hstack([feat, fund.extra])
        tgt = space_matrix(fund, targets)
        flows = fund.flows.as_matrix()
        cum = space_matrix(fund, "cumulative")
        n = len(fund) - w + 1
        for i in range(n):
            origin = (0.0, 0.0, 0.0) if i == 0 else tuple(float(v) for v in cum[i - 1])
            anchor = tuple(float(v) for v in cum[i + w_in - 1])
            out.append(RollingWindow(
                fund.fund_id, fund.vintage_year, i,
                feat[i:i + w_in].copy(), tgt[i + w_in:i + w].copy(), 1.0,
                fund.mask[i + w_in:i + w].copy(),
                flows[i:i + w_in].copy(), flows[i + w_in:i + w].copy(), origin, anchor,
            ))
    names = FEATURE_SETS[features] + tuple(extra_names or ())
    return WindowSet(w_in, w_out, names, FEATURE_SETS[targets], assign_weights(out), targets)


def assign_weights(windows) -> list:
    """Give each window of a fund with r windows the weight 1/r."""
    counts = Counter(w.fund_id for w in windows)
    return [replace(w, weight=1.0 / counts[w.fund_id]) for w in windows]


def expected_window_count(dataset, w: int) -> int:
    """Closed form sum_k (t_k - w + 1) n_k over vintages."""
    by_vintage = defaultdict(list)
    for f in dataset:
        by_vintage[f.vintage_year].append(len(f))
    return sum((max(lengths) - w + 1) * len(lengths) for lengths in by_vintage.values())


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")


def split_by_fund(dataset, cfg: SplitConfig = SplitConfig()):
    """Vintage-stratified random split of funds.

    Per vintage, ``max(1, floor(train_fraction * n))`` funds go to training.
    Funds are sorted by id before the seeded shuffle. Returns
    ``(train_funds, test_funds)`` preserving input objects.
    """
    by_vintage = defaultdict(list)
    for f in dataset:
        by_vintage[f.vintage_year].append(f)
    rng = np.random.default_rng(cfg.seed)
    train, test = [], []
    for vintage in sorted(by_vintage):
        funds = sorted(by_vintage[vintage], key=lambda f: f.fund_id)
        if len(funds) < 2:
            raise WindowError(f"vintage {vintage} has {len(funds)} fund(s); need at least 2 to split")
        n_train = max(1, math.floor(cfg.train_fraction * len(funds) + 1e-9))
        order = rng.permutation(len(funds))
        train.extend(funds[i] for i in order[:n_train])
        test.extend(funds[i] for i in order[n_train:])
    return train, test


# ---------------------------------------------------------------- binary file

MAGIC = b"PECFWIN1"


def _columns(ws: WindowSet) -> dict:
    n = len(ws.windows)
    ws_ = ws.windows
    cols = {
        "lookback": np.stack([w.lookback for w in ws_]).astype("<f8") if n else np.zeros((0, ws.w_in, len(ws.features))),
        "target": np.stack([w.target for w in ws_]).astype("<f8") if n else np.zeros((0, ws.w_out, len(ws.targets))),
        "target_mask": np.stack([w.target_mask for w in ws_]).astype("u1") if n else np.zeros((0, ws.w_out), "u1"),
        "weight": np.array([w.weight for w in ws_], dtype="<f8"),
        "window_index": np.array([w.window_index for w in ws_], dtype="<i8"),
        "vintage_year": np.array([w.vintage_year for w in ws_], dtype="<i8"),
        "flows_lookback": np.stack([w.flows_lookback for w in ws_]).astype("<f8") if n else np.zeros((0, ws.w_in, 3)),
        "flows_target": np.stack([w.flows_target for w in ws_]).astype("<f8") if n else np.zeros((0, ws.w_out, 3)),
        "origin": np.array([w.origin for w in ws_], dtype="<f8").reshape(n, 3),
        "anchor": np.array([w.anchor for w in ws_], dtype="<f8").reshape(n, 3),
    }
    if n and all(w.label is not None for w in ws_):
        cols["label"] = np.array([w.label for w in ws_], dtype="<f8")
        cols["label_objective"] = np.array([w.label_objective for w in ws_], dtype="<f8")
    return cols


def windows_to_bytes(ws: WindowSet) -> bytes:
    cols = _columns(ws)
    header = {
        "w_in": ws.w_in, "w_out": ws.w_out, "features": list(ws.features), "targets": list(ws.targets),
        "target_space": ws.target_space, "n_windows": len(ws.windows),
        "fund_ids": [w.fund_id for w in ws.windows],
        "columns": [{"name": k, "dtype": v.dtype.str, "shape": list(v.shape)} for k, v in cols.items()],
    }
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    body = b"".join(np.ascontiguousarray(v).tobytes() for v in cols.values())
    return MAGIC + struct.pack("<Q", len(hb)) + hb + body


def windows_from_bytes(data: bytes) -> WindowSet:
    if data[:len(MAGIC)] != MAGIC:
        raise WindowError("not a window dataset file")
    (hlen,) = struct.unpack("<Q", data[len(MAGIC):len(MAGIC) + 8])
    off = len(MAGIC) + 8
    header = json.loads(data[off:off + hlen].decode("utf-8"))
    off += hlen
    cols = {}
    for c in header["columns"]:
        dt = np.dtype(c["dtype"])
        count = int(np.prod(c["shape"])) if c["shape"] else 1
        arr = np.frombuffer(data, dtype=dt, count=count, offset=off).reshape(c["shape"])
        off += count * dt.itemsize
        cols[c["name"]] = arr.copy()
    windows = []
    for i, fid in enumerate(header["fund_ids"]):
        label = tuple(float(v) for v in cols["label"][i]) if "label" in cols else None
        windows.append(RollingWindow(
            fid, int(cols["vintage_year"][i]), int(cols["window_index"][i]),
            cols["lookback"][i], cols["target"][i], float(cols["weight"][i]),
            cols["target_mask"][i].astype(bool), cols["flows_lookback"][i], cols["flows_target"][i],
            tuple(float(v) for v in cols["origin"][i]), tuple(float(v) for v in cols["anchor"][i]),
            label, float(cols["label_objective"][i]) if "label_objective" in cols else None,
        ))
    return WindowSet(header["w_in"], header["w_out"], tuple(header["features"]), tuple(header["targets"]),
                     windows, header.get("target_space", "flows"))


def save_windows(ws: WindowSet, path) -> None:
    atomic_write_bytes(path, windows_to_bytes(ws))


def load_windows(path) -> WindowSet:
    with open(path, "rb") as fh:
        return windows_from_bytes(fh.read())
