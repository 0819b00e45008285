"""Accuracy metrics for disaggregation output.

Conventions:

* Rates with zero denominators are reported as 0 and flagged ``undefined``
  instead of NaN, so reports serialize cleanly.
* The fraction of total energy assigned correctly compares per-appliance
  energy fractions: sum over appliances of min(actual fraction, predicted
  fraction).
* Classification metrics compare on/off states derived from the on-power
  threshold by default; the per-state confusion matrix uses nearest-state
  assignment against the model's state means.
* Hamming loss is the mean state mismatch over appliances and time slices
  (the multi-state generalisation of per-slice XOR).
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass

import numpy as np

from .data import Building, Channel
from .disaggregate import Predictions
from .stats import DEFAULT_ON_THRESHOLD_W, appliance_on_threshold
from .training import ApplianceStateModel, assign_states

# Report keys follow the benchmark-table naming.
METRIC_DISPLAY_NAMES = {
    "error_total_energy": "Error in total energy (J)",
    "nep": "NEP",
    "rmse": "RMSE (W)",
    "fte": "FTE",
    "tp": "TP",
    "fp": "FP",
    "fn": "FN",
    "tn": "TN",
    "tpr": "TPR",
    "fpr": "FPR",
    "precision": "Precision",
    "recall": "Recall",
    "f_score": "F-score",
    "hamming_loss": "Hamming loss",
    "train_seconds": "Train time (s)",
    "disaggregate_seconds": "Disaggregate time (s)",
}


def power_to_states(
    c: Channel | np.ndarray,
    model: ApplianceStateModel | None = None,
    threshold: float | None = None,
) -> np.ndarray:
    """Discretise a power series into states.

    With a model: nearest state mean.  With a threshold: binary on/off at
    power > threshold.  Exactly one of the two must be given.
    """
    power = c.power() if isinstance(c, Channel) else np.asarray(c, dtype=np.float64)
    if (model is None) == (threshold is None):
        raise ValueError("provide exactly one of model or threshold")
    if model is not None:
        return assign_states(power, model.means)
    return (power > threshold).astype(np.int64)


def error_total_energy(y: np.ndarray, y_hat: np.ndarray, slice_seconds: float = 1.0) -> float:
    """|sum(actual) - sum(assigned)| x slice duration, in joules.

    Over- and underestimates in different slices cancel; that insensitivity
    is a documented property of the metric, not a bug.
    """
    y, y_hat = _aligned(y, y_hat)
    return abs(float(np.sum(y) - np.sum(y_hat))) * slice_seconds


def fraction_energy_assigned_correctly(
    Y: dict[str, np.ndarray], Y_hat: dict[str, np.ndarray]
) -> float:
    """Overlap of per-appliance energy fractions, in [0, 1].

    Computed as 1 - sum|actual fraction - predicted fraction| / 2, which
    equals the sum of per-appliance minimum fractions (both fraction vectors
    sum to 1) but stays exactly 1.0 when predictions match the truth.
    """
    if not Y:
        raise ValueError("need at least one appliance")
    names = sorted(Y)
    actual = np.array([float(np.sum(Y[n])) for n in names])
    predicted = np.array([float(np.sum(Y_hat.get(n, np.zeros(1)))) for n in names])
    if actual.sum() <= 0 or predicted.sum() <= 0:
        raise ValueError("total actual and predicted energies must be positive")
    diff = np.abs(actual / actual.sum() - predicted / predicted.sum())
    return max(0.0, 1.0 - 0.5 * float(np.sum(diff)))


def normalized_error_assigned_power(y: np.ndarray, y_hat: np.ndarray) -> float:
    """sum |y - y_hat| / sum y.  Requires positive actual energy."""
    y, y_hat = _aligned(y, y_hat)
    denom = float(np.sum(y))
    if denom <= 0:
        raise ValueError("actual energy must be positive for NEP")
    return float(np.sum(np.abs(y - y_hat))) / denom


def rms_error(y: np.ndarray, y_hat: np.ndarray) -> float:
    y, y_hat = _aligned(y, y_hat)
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))


def _aligned(y, y_hat) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ValueError("series must have equal length")
    return y, y_hat


@dataclass(frozen=True)
class ClassificationCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def classification_counts(x: np.ndarray, x_hat: np.ndarray) -> ClassificationCounts:
    """On/off agreement counts; any state > 0 counts as on."""
    x = np.asarray(x) > 0
    x_hat = np.asarray(x_hat) > 0
    if x.shape != x_hat.shape:
        raise ValueError("series must have equal length")
    return ClassificationCounts(
        tp=int(np.sum(x & x_hat)),
        fp=int(np.sum(~x & x_hat)),
        fn=int(np.sum(x & ~x_hat)),
        tn=int(np.sum(~x & ~x_hat)),
    )


@dataclass(frozen=True)
class Rates:
    tpr: float
    fpr: float
    precision: float
    recall: float
    f_score: float
    undefined: frozenset[str] = frozenset()


def rates(counts: ClassificationCounts) -> Rates:
    """Detection rates from counts; zero-denominator rates are 0, flagged."""
    undefined = set()

    def ratio(num: int, denom: int, name: str) -> float:
        if denom == 0:
            undefined.add(name)
            return 0.0
        return num / denom

    tpr = ratio(counts.tp, counts.tp + counts.fn, "tpr")
    fpr = ratio(counts.fp, counts.fp + counts.tn, "fpr")
    precision = ratio(counts.tp, counts.tp + counts.fp, "precision")
    recall = tpr
    if "tpr" in undefined:
        undefined.add("recall")
    if precision + recall == 0:
        undefined.add("f_score")
        f_score = 0.0
    else:
        f_score = 2 * precision * recall / (precision + recall)
    return Rates(
        tpr=tpr,
        fpr=fpr,
        precision=precision,
        recall=recall,
        f_score=f_score,
        undefined=frozenset(undefined),
    )


def confusion_matrix(x: np.ndarray, x_hat: np.ndarray, K: int) -> np.ndarray:
    """counts[i][j] = number of slices with actual state i predicted as j."""
    x = np.asarray(x, dtype=np.int64)
    x_hat = np.asarray(x_hat, dtype=np.int64)
    if x.shape != x_hat.shape:
        raise ValueError("series must have equal length")
    out = np.zeros((K, K), dtype=np.int64)
    np.add.at(out, (x, x_hat), 1)
    return out


def hamming_loss(X: dict[str, np.ndarray], X_hat: dict[str, np.ndarray]) -> float:
    """Mean state mismatch over all appliances and time slices."""
    if not X:
        raise ValueError("need at least one appliance")
    per_appliance = []
    for name in sorted(X):
        x = np.asarray(X[name])
        xh = np.asarray(X_hat[name])
        if x.shape != xh.shape:
            raise ValueError(f"{name}: series must have equal length")
        per_appliance.append(float(np.mean(x != xh)) if x.size else 0.0)
    return float(np.mean(per_appliance))


@dataclass(frozen=True)
class ApplianceMetrics:
    name: str
    error_total_energy: float
    nep: float
    rmse: float
    counts: ClassificationCounts
    tpr: float
    fpr: float
    precision: float
    recall: float
    f_score: float
    confusion: np.ndarray
    undefined: frozenset[str] = frozenset()

    def as_dict(self) -> dict:
        return {
            "error_total_energy": self.error_total_energy,
            "nep": self.nep,
            "rmse": self.rmse,
            "tp": self.counts.tp,
            "fp": self.counts.fp,
            "fn": self.counts.fn,
            "tn": self.counts.tn,
            "tpr": self.tpr,
            "fpr": self.fpr,
            "precision": self.precision,
            "recall": self.recall,
            "f_score": self.f_score,
            "confusion": self.confusion.tolist(),
            "undefined": sorted(self.undefined),
        }


_AVERAGED_KEYS = (
    "error_total_energy", "nep", "rmse", "tpr", "fpr",
    "precision", "recall", "f_score",
)


@dataclass(frozen=True)
class MetricReport:
    """Per-appliance metrics plus averaged and building-level values."""

    appliances: tuple[ApplianceMetrics, ...]
    fte: float
    hamming_loss: float
    train_seconds: float | None = None
    disaggregate_seconds: float | None = None
    algorithm: str = ""

    def appliance(self, name: str) -> ApplianceMetrics:
        for a in self.appliances:
            if a.name == name:
                return a
        raise KeyError(name)

    def averages(self) -> dict[str, float]:
        """Mean of each scalar metric over the appliances where it is defined."""
        out = {}
        for key in _AVERAGED_KEYS:
            values = [
                a.as_dict()[key] for a in self.appliances if key not in a.undefined
            ]
            out[key] = float(np.mean(values)) if values else 0.0
        return out

    def to_json_text(self) -> str:
        payload = {
            "algorithm": self.algorithm,
            "building": {
                "fte": self.fte,
                "hamming_loss": self.hamming_loss,
                "train_seconds": self.train_seconds,
                "disaggregate_seconds": self.disaggregate_seconds,
            },
            "averages": self.averages(),
            "appliances": {a.name: a.as_dict() for a in self.appliances},
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def to_csv_text(self, metrics: tuple[str, ...] | None = None) -> str:
        """CSV rows (appliance, metric, algorithm, value).

        ``metrics`` restricts the per-appliance rows to the named metric
        keys (e.g. ("nep", "fte", "f_score")); None emits everything.
        """
        buf = io.StringIO()
        buf.write("appliance,metric,algorithm,value\n")

        def wanted(metric: str) -> bool:
            return metrics is None or metric in metrics

        def row(appliance: str, metric: str, value, always: bool = False) -> None:
            if not (always or wanted(metric)):
                return
            name = METRIC_DISPLAY_NAMES.get(metric, metric)
            buf.write(f"{appliance},{name},{self.algorithm},{value!r}\n")

        for a in self.appliances:
            d = a.as_dict()
            for key in (
                "error_total_energy", "nep", "rmse", "tp", "fp", "fn", "tn",
                "tpr", "fpr", "precision", "recall", "f_score",
            ):
                row(a.name, key, d[key])
            if wanted("confusion"):
                K = a.confusion.shape[0]
                for i in range(K):
                    for j in range(K):
                        row(a.name, f"confusion[{i}][{j}]", int(a.confusion[i, j]), always=True)
        for key, value in self.averages().items():
            row("(average)", key, value)
        row("(building)", "fte", self.fte)
        row("(building)", "hamming_loss", self.hamming_loss)
        if self.train_seconds is not None:
            row("(building)", "train_seconds", round(self.train_seconds, 2), always=True)
        if self.disaggregate_seconds is not None:
            row(
                "(building)", "disaggregate_seconds",
                round(self.disaggregate_seconds, 2), always=True,
            )
        return buf.getvalue()


def evaluate(
    predictions: Predictions,
    ground_truth: Building,
    on_threshold: float = DEFAULT_ON_THRESHOLD_W,
    train_seconds: float | None = None,
    disaggregate_seconds: float | None = None,
    algorithm: str = "",
) -> MetricReport:
    """Score predictions against sub-metered ground truth.

    Evaluation runs on the timestamp intersection of the predictions and
    each truth channel.  Truth appliances missing from the predictions are
    scored as always off.  The on/off threshold can be overridden per
    appliance through the truth building's metadata.
    """
    slice_seconds = predictions.nominal_period
    per_appliance: list[ApplianceMetrics] = []
    Y: dict[str, np.ndarray] = {}
    Y_hat: dict[str, np.ndarray] = {}
    X: dict[str, np.ndarray] = {}
    X_hat: dict[str, np.ndarray] = {}
    any_overlap = False
    for name in sorted(ground_truth.appliances):
        truth = ground_truth.appliances[name]
        threshold = appliance_on_threshold(ground_truth, name, on_threshold)
        common, truth_idx, pred_idx = np.intersect1d(
            truth.timestamps, predictions.timestamps, return_indices=True
        )
        if common.size == 0:
            continue
        any_overlap = True
        y = truth.power()[truth_idx]
        pred = predictions.appliances.get(name)
        if pred is None:
            y_hat = np.zeros_like(y)
            states_hat = np.zeros(y.size, dtype=np.int64)
            K = 2
            truth_states = power_to_states(y, threshold=threshold)
        else:
            y_hat = pred.powers[pred_idx]
            states_hat = pred.states[pred_idx]
            K = max(int(pred.state_means.size), 2)
            model = ApplianceStateModel(
                name=name,
                means=pred.state_means,
                stds=np.ones(pred.state_means.size),
            ) if pred.state_means.size else None
            truth_states = (
                power_to_states(y, model=model)
                if model is not None
                else power_to_states(y, threshold=threshold)
            )
        on_truth = power_to_states(y, threshold=threshold)
        on_hat = power_to_states(y_hat, threshold=threshold)
        counts = classification_counts(on_truth, on_hat)
        r = rates(counts)
        undefined = set(r.undefined)
        denom = float(np.sum(y))
        if denom > 0:
            nep = normalized_error_assigned_power(y, y_hat)
        else:
            nep = 0.0
            undefined.add("nep")
        per_appliance.append(
            ApplianceMetrics(
                name=name,
                error_total_energy=error_total_energy(y, y_hat, slice_seconds),
                nep=nep,
                rmse=rms_error(y, y_hat),
                counts=counts,
                tpr=r.tpr,
                fpr=r.fpr,
                precision=r.precision,
                recall=r.recall,
                f_score=r.f_score,
                confusion=confusion_matrix(truth_states, states_hat, K),
                undefined=frozenset(undefined),
            )
        )
        Y[name] = y
        Y_hat[name] = y_hat
        X[name] = on_truth
        X_hat[name] = on_hat
    if not any_overlap:
        raise ValueError("predictions and ground truth share no timestamps")
    return MetricReport(
        appliances=tuple(per_appliance),
        fte=fraction_energy_assigned_correctly(Y, Y_hat),
        hamming_loss=hamming_loss(X, X_hat),
        train_seconds=train_seconds,
        disaggregate_seconds=disaggregate_seconds,
        algorithm=algorithm,
    )
