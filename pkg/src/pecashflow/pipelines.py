"""Direct and indirect forecasting pipelines on top of the data, benchmark
and network modules."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from . import imputation, macro as macro_mod, metrics
from .nn import LayerSpec, Network, NetworkSpec, TrainConfig, TrainData, train
from .windowing import FEATURE_SETS, SplitConfig, WindowSet, assign_weights, make_windows, split_by_fund
from .yale import B_BOUNDS, DEFAULT_LIFE, YaleParams, calibrate_window, simulate_quarterly

# indirect targets are (rc, g, b / 5) so every label lies in [0, 1]
LABEL_SCALE = np.array([1.0, 1.0, B_BOUNDS[1]])


class PipelineError(ValueError):
    pass


@dataclass(frozen=True)
class Architecture:
    mode: str
    w_in: int
    w_out: int
    features: str
    targets: str
    macro: bool
    hidden: tuple
    head: str
    # False: one window per fund, cut from its first w_in + w_out quarters
    rolling: bool = True


ARCHITECTURES = {
    "indirect_gru": Architecture("indirect", 20, 8, "cumulative", "flows", False, (100, 75, 100), "sigmoid"),
    "direct_m1": Architecture("direct", 36, 13, "ratios", "ratios", False, (32, 32, 16), "linear", rolling=False),
    "direct_m2": Architecture("direct", 20, 8, "flows", "flows", False, (32, 32, 16), "exponential"),
    "direct_m3": Architecture("direct", 20, 8, "flows", "flows", False, (32, 32, 16), "exponential"),
    "direct_m4": Architecture("direct", 20, 8, "cumulative", "cumulative", False, (32, 32, 32), "exponential"),
    "direct_m5": Architecture("direct", 20, 8, "flows", "flows", True, (32, 32, 32), "exponential"),
}


def build_architecture(name: str, seed: int = 0, hidden: Optional[tuple] = None,
                       input_features: Optional[int] = None, w_out: Optional[int] = None) -> NetworkSpec:
    """Network topology for one of the named models.

    ``hidden`` overrides the three hidden widths (for reduced-size checks);
    ``w_out`` overrides the decoder length of direct models.
    """
    if name not in ARCHITECTURES:
        raise PipelineError(f"unknown architecture {name!r}; valid names: {', '.join(ARCHITECTURES)}")
    arch = ARCHITECTURES[name]
    h1, h2, h3 = hidden or arch.hidden
    n_in = input_features or (3 + (len(macro_mod.MACRO_NAMES) if arch.macro else 0))
    if arch.mode == "indirect":
        layers = (
            LayerSpec("gru", h1, "relu", True),
            LayerSpec("gru", h2, "relu", True),
            LayerSpec("gru", h3, "relu", False),
            LayerSpec("dense", 3, "sigmoid"),
        )
    else:
        layers = (
            LayerSpec("gru", h1, "relu", False),
            LayerSpec("repeat_expand", w_out or arch.w_out),
            LayerSpec("gru", h2, "relu", True),
            LayerSpec("gru", h3, "sigmoid", True),
            LayerSpec("time_distributed_dense", 3, arch.head),
        )
    return NetworkSpec(n_in, layers, 3, seed)


@dataclass(frozen=True)
class PipelineConfig:
    architecture: str = "direct_m3"
    w_in: Optional[int] = None
    w_out: Optional[int] = None
    threshold: float = imputation.DEFAULT_THRESHOLD
    train_fraction: float = 0.8
    seed: int = 0
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    hidden: Optional[tuple] = None

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise PipelineError(f"unknown architecture {self.architecture!r}; valid names: {', '.join(ARCHITECTURES)}")
        arch = ARCHITECTURES[self.architecture]
        if self.w_in is None:
            object.__setattr__(self, "w_in", arch.w_in)
        if self.w_out is None:
            object.__setattr__(self, "w_out", arch.w_out)
        if self.w_in < 1 or self.w_out < 1:
            raise PipelineError("w_in and w_out must be >= 1")
        if self.hidden is not None:
            object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def arch(self) -> Architecture:
        return ARCHITECTURES[self.architecture]

    @property
    def mode(self) -> str:
        return self.arch.mode

    @property
    def use_cumulative_targets(self) -> bool:
        return self.arch.targets == "cumulative"

    def network_spec(self) -> NetworkSpec:
        return build_architecture(self.architecture, self.seed, self.hidden, w_out=self.w_out)

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.epochs, self.batch_size, self.learning_rate, seed=self.seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = None if self.hidden is None else list(self.hidden)
        d["mode"] = self.mode
        d["features"] = self.arch.features
        d["targets"] = self.arch.targets
        d["macro"] = self.arch.macro
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        keys = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in keys})


# ---------------------------------------------------------------- data prep

def prepare_dataset(records, threshold: float = imputation.DEFAULT_THRESHOLD, macro_table=None):
    """Filter, impute, pad and (optionally) attach macro features.

    Returns ``(fund_series, imputation_reports)``.
    """
    series, reports = imputation.prepare_funds(records, threshold)
    series = imputation.pad_to_vintage_length(series)
    if macro_table is not None:
        series = macro_mod.attach_macro(series, macro_table)
    return series, reports


def cut_windows(series, config: PipelineConfig) -> WindowSet:
    """Windows in the architecture's spaces; non-rolling models keep only the
    first window of each fund."""
    arch = config.arch
    ws = make_windows(series, config.w_in, config.w_out, arch.features, arch.targets)
    if not arch.rolling:
        ws = replace(ws, windows=assign_weights([w for w in ws.windows if w.window_index == 0]))
    return ws


def build_windows(series, config: PipelineConfig) -> WindowSet:
    """:func:`cut_windows`, plus calibration labels for indirect models."""
    ws = cut_windows(series, config)
    if config.mode == "indirect":
        ws = make_indirect_labels(ws)
    return ws


# ---------------------------------------------------------------- indirect

def make_indirect_labels(ws: WindowSet, l: float = DEFAULT_LIFE, y: float = 0.0) -> WindowSet:
    """Calibrate (rc, g, b) on each window's prediction quarters, starting from
    the state at the end of its lookback."""
    out = []
    for w in ws.windows:
        cal = calibrate_window(w.flows_target, w.anchor[0], w.anchor[2], w.target_start_quarter,
                               w.target_mask.astype(float), l, y)
        out.append(replace(w, label=(cal.rc, cal.g, cal.b), label_objective=cal.objective))
    return replace(ws, windows=out)


def roll_forward(params, anchor, start_quarter: int, w_out: int, l: float = DEFAULT_LIFE, y: float = 0.0) -> np.ndarray:
    """(w_out, 3) quarterly Yale flows from the anchor state (CC, DC, RVC)."""
    rc, g, b = (float(v) for v in params)
    p = YaleParams(float(np.clip(rc, 0, 1)), float(np.clip(g, 0, 1)), float(np.clip(b, *B_BOUNDS)), l, y)
    return simulate_quarterly(p, w_out, min(anchor[0], 1.2), anchor[2], start_quarter)


def predicted_params(net: Network, lookback: np.ndarray) -> np.ndarray:
    """(N, 3) unscaled (rc, g, b) from an indirect network."""
    x = np.asarray(lookback, dtype=float)
    return net.predict(x if x.ndim == 3 else x[None])[:, 0, :] * LABEL_SCALE


def indirect_forecast(net: Network, window) -> np.ndarray:
    params = predicted_params(net, window.lookback)[0]
    return roll_forward(params, window.anchor, window.target_start_quarter, window.w_out)


# ---------------------------------------------------------------- direct

def to_flow_space(pred: np.ndarray, space: str, anchor) -> np.ndarray:
    """Map a (w_out, 3) prediction in ``space`` to (qCC, qDC, RVC)."""
    pred = np.asarray(pred, dtype=float)
    if space == "flows":
        return pred.copy()
    if space == "ratios":
        cc = pred[:, 0]
        cum = np.column_stack([cc, pred[:, 1] * cc, pred[:, 2] * cc])
    elif space == "cumulative":
        cum = pred
    else:
        raise PipelineError(f"unknown target space {space!r}")
    prev = np.array([anchor[0], anchor[1]])
    inc = np.diff(np.vstack([prev, cum[:, :2]]), axis=0)
    return np.column_stack([inc, cum[:, 2]])


def direct_forecast(net: Network, window, space: str = "flows") -> np.ndarray:
    raw = net.predict(window.lookback[None])[0]
    return to_flow_space(raw, space, window.anchor)


# ---------------------------------------------------------------- benchmark

def benchmark_forecast(window, l: float = DEFAULT_LIFE, y: float = 0.0) -> np.ndarray:
    """Yale forecast with parameters calibrated on the lookback quarters only."""
    cal = calibrate_window(window.flows_lookback, window.origin[0], window.origin[2],
                           window.lookback_start_quarter, None, l, y)
    return roll_forward((cal.rc, cal.g, cal.b), window.anchor, window.target_start_quarter, window.w_out, l, y)


# ---------------------------------------------------------------- training / evaluation

def training_data(ws: WindowSet, mode: str) -> TrainData:
    a = ws.arrays(use_labels=(mode == "indirect"))
    y = a["y"] / LABEL_SCALE if mode == "indirect" else a["y"]
    return TrainData(a["x"], y, a["weights"], a["mask"])


def head_bias(data: TrainData, head: str) -> np.ndarray:
    """Output bias at which the head emits the weighted mean training target
    of each column (for a zero kernel term)."""
    m = np.broadcast_to(np.asarray(data.mask, dtype=float)[..., None], data.y.shape)
    w = m * data.weights.reshape((-1,) + (1,) * (data.y.ndim - 1))
    axes = tuple(range(data.y.ndim - 1))
    mean = (data.y * w).sum(axis=axes) / w.sum(axis=axes)
    if head == "exponential":
        return np.log(np.maximum(mean, 1e-8))
    if head == "sigmoid":
        p = np.clip(mean, 1e-6, 1 - 1e-6)
        return np.log(p / (1 - p))
    return mean


def fit(ws: WindowSet, config: PipelineConfig, validation: Optional[WindowSet] = None):
    """Train on ``ws``. The output bias starts at the mean training target so
    Adam need not walk it there from zero (an exponential head starts at 1,
    while quarterly flows are of order 0.01)."""
    spec = build_architecture(config.architecture, config.seed, config.hidden,
                              input_features=len(ws.features), w_out=config.w_out)
    data = training_data(ws, config.mode)
    val = training_data(validation, config.mode) if validation is not None and len(validation) else None
    net = Network(spec)
    head = net.layers[-1]
    head.params["bias"] = head_bias(data, config.arch.head)
    return train(spec, data, config.train_config(), val, network=net)


def forecast_windows(net: Network, ws: WindowSet, config: PipelineConfig) -> np.ndarray:
    """(N, w_out, 3) flow-space forecasts for every window."""
    if not len(ws):
        return np.zeros((0, ws.w_out, 3))
    x = np.stack([w.lookback for w in ws.windows])
    if config.mode == "indirect":
        params = predicted_params(net, x)
        return np.stack([roll_forward(p, w.anchor, w.target_start_quarter, w.w_out)
                         for p, w in zip(params, ws.windows)])
    raw = net.predict(x)
    return np.stack([to_flow_space(r, config.arch.targets, w.anchor) for r, w in zip(raw, ws.windows)])


def benchmark_windows(ws: WindowSet) -> np.ndarray:
    if not len(ws):
        return np.zeros((0, ws.w_out, 3))
    return np.stack([benchmark_forecast(w) for w in ws.windows])


def evaluate(net: Network, ws: WindowSet, config: PipelineConfig, with_benchmark: bool = True) -> dict:
    """Forecasts, benchmark forecasts and metrics on a window set (all scored
    in flow space)."""
    pred = forecast_windows(net, ws, config)
    actual = np.stack([w.flows_target for w in ws.windows])
    mask = np.stack([w.target_mask for w in ws.windows])
    weights = np.array([w.weight for w in ws.windows])
    bench = benchmark_windows(ws) if with_benchmark else None
    result = {
        "predicted": pred, "actual": actual, "mask": mask, "weights": weights, "benchmark": bench,
        "metrics": metrics.score(pred, actual, mask, weights),
    }
    if with_benchmark:
        result["benchmark_metrics"] = metrics.score(bench, actual, mask, weights)
    return result


def forecast_records(ws: WindowSet, evaluation: dict) -> list:
    out = []
    for i, w in enumerate(ws.windows):
        rec = {
            "fund_id": w.fund_id,
            "window_index": w.window_index,
            "predicted": evaluation["predicted"][i].tolist(),
            "actual": evaluation["actual"][i].tolist(),
            "mask": [bool(m) for m in evaluation["mask"][i]],
        }
        if evaluation.get("benchmark") is not None:
            rec["benchmark"] = evaluation["benchmark"][i].tolist()
        out.append(rec)
    return out


def run_experiment(config: PipelineConfig, records, macro: Optional[dict] = None) -> dict:
    """Split, window, (label), train, forecast the test funds and compare with
    the lookback-calibrated benchmark on the same windows."""
    table = None
    if config.arch.macro:
        if macro is None:
            raise PipelineError(f"{config.architecture} needs macro series")
        table = macro_mod.macro_feature_table(macro)
    series, _ = prepare_dataset(records, config.threshold, table)
    train_funds, test_funds = split_by_fund(series, SplitConfig(config.train_fraction, config.seed))
    train_ws = build_windows(train_funds, config)
    test_ws = build_windows(test_funds, config)
    net, history = fit(train_ws, config, test_ws)
    train_eval = evaluate(net, train_ws, config, with_benchmark=False)
    test_eval = evaluate(net, test_ws, config)
    tm, bm = test_eval["metrics"], test_eval["benchmark_metrics"]
    report = {
        "config": config.to_dict(),
        "loss_history": history["train"],
        "validation_history": history.get("validation", []),
        "split": {"train": sorted(f.fund_id for f in train_funds), "test": sorted(f.fund_id for f in test_funds)},
        "metrics": {
            "train_mse": train_eval["metrics"]["mse"],
            "test_mse": tm["mse"],
            "test_weighted_mse": tm["weighted_mse"],
            "r2": tm["r2"],
            "benchmark_test_mse": bm["mse"],
            "benchmark_test_weighted_mse": bm["weighted_mse"],
            "benchmark_r2": bm["r2"],
        },
        "forecasts": forecast_records(test_ws, test_eval),
    }
    return report
