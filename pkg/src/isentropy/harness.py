"""
Model comparison against the full-ensemble entropy target.

The full empirical model (every member kept as an impulse) supplies the
target total entropy for each isovalue; every other model is scored by its
signed distance from that target alongside its per-vertex storage cost.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .ensemble import EnsembleField, GridDims, NoiseSpec, inject_noise
from .entropy import entropy_field
from .models import FULL, ModelKind, fit_model, storage_cost

CSV_HEADER = ("model", "B", "isovalue", "total_entropy_bits", "delta_from_baseline",
              "storage_values_per_vertex", "fit_seconds", "entropy_seconds")

DEFAULT_BINS = (1, 2, 3, 5, 10, 20, 50, 100, 200, 500, 1000)


@dataclass(frozen=True)
class ReportRow:
    kind: ModelKind
    isovalue: float
    total_entropy: float
    delta_from_baseline: float
    storage_cost: int
    fit_seconds: float
    entropy_seconds: float


@dataclass
class ComparisonReport:
    rows: list[ReportRow]
    baseline: dict[float, float]
    n_members: int
    label: str = ""

    def row(self, kind: ModelKind, isovalue: float) -> ReportRow:
        for r in self.rows:
            if r.kind == kind and r.isovalue == isovalue:
                return r
        raise KeyError((kind, isovalue))

    @property
    def kinds(self) -> list[ModelKind]:
        return list(dict.fromkeys(r.kind for r in self.rows))

    @property
    def isovalues(self) -> list[float]:
        return list(dict.fromkeys(r.isovalue for r in self.rows))


@dataclass
class BinSweepResult:
    model: str
    isovalue: float
    points: list[tuple[int, float]] = field(default_factory=list)
    baseline: float = 0.0

    @property
    def bins(self) -> list[int]:
        return [b for b, _ in self.points]

    @property
    def totals(self) -> list[float]:
        return [t for _, t in self.points]


def _timed_fit(ensemble, kind, repeat):
    best = None
    for _ in range(max(1, repeat)):
        mf = fit_model(ensemble, kind)
        if best is None or mf.fit_seconds < best.fit_seconds:
            best = mf
    return best


def _timed_entropy(models, k, threads, repeat):
    best = None
    for _ in range(max(1, repeat)):
        ef = entropy_field(models, k, threads)
        if best is None or ef.entropy_seconds < best.entropy_seconds:
            best = ef
    return best


def compare_models(ensemble: EnsembleField, kinds, isovalues, threads: int | None = None,
                   repeat: int = 1) -> ComparisonReport:
    """Total entropy of each model at each isovalue, scored against the full model.

    The full empirical model is added as the first row group when absent.
    ``repeat`` > 1 keeps the minimum wall-clock time of that many runs.
    """
    kinds = list(dict.fromkeys(kinds))
    isovalues = [float(k) for k in isovalues]
    if not kinds:
        raise ValueError("need at least one model kind")
    if not isovalues:
        raise ValueError("need at least one isovalue")
    if FULL in kinds:
        kinds.remove(FULL)
    kinds.insert(0, FULL)

    results = []
    baseline: dict[float, float] = {}
    for kind in kinds:
        models = _timed_fit(ensemble, kind, repeat)
        for k in isovalues:
            ef = _timed_entropy(models, k, threads, repeat)
            if kind == FULL:
                baseline.setdefault(k, ef.total_entropy)
            results.append((kind, k, ef.total_entropy, models.fit_seconds, ef.entropy_seconds))

    rows = [
        ReportRow(kind, k, total, total - baseline[k], storage_cost(kind, ensemble.n_members),
                  fit_s, ent_s)
        for kind, k, total, fit_s, ent_s in results
    ]
    return ComparisonReport(rows, baseline, ensemble.n_members, label=ensemble.name)


def bin_sweep(ensemble: EnsembleField, model: str, isovalue: float, bins=DEFAULT_BINS,
              threads: int | None = None) -> BinSweepResult:
    """Total entropy of ``histogram:B`` or ``quantile:B`` over a list of bin counts."""
    if model not in ("histogram", "quantile"):
        raise ValueError(f"bin sweeps apply to histogram or quantile models, not {model!r}")
    bins = [int(b) for b in bins]
    if not bins or bins[0] < 1 or any(b2 <= b1 for b1, b2 in zip(bins, bins[1:])):
        raise ValueError("bin counts must be strictly increasing and >= 1")
    k = float(isovalue)
    base = entropy_field(fit_model(ensemble, FULL), k, threads).total_entropy
    result = BinSweepResult(model, k, baseline=base)
    for b in bins:
        ef = entropy_field(fit_model(ensemble, ModelKind(model, b)), k, threads)
        result.points.append((b, ef.total_entropy))
    return result


def noise_experiment(base, dims: GridDims, magnitude_gaussian: float, magnitude_uniform: float,
                     members: int, seed: int, isovalue: float, kinds,
                     threads: int | None = None) -> tuple[ComparisonReport, ComparisonReport]:
    """Score ``kinds`` on Gaussian- and uniform-noise ensembles built from one member.

    Both ensembles use the same seed; returns ``(gaussian_report, uniform_report)``.
    """
    reports = []
    for kind, mag in (("gaussian", magnitude_gaussian), ("uniform", magnitude_uniform)):
        ens = inject_noise(base, dims, NoiseSpec(kind, mag, members, seed))
        rep = compare_models(ens, kinds, [isovalue], threads)
        rep.label = f"{kind} noise"
        reports.append(rep)
    return reports[0], reports[1]


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def _g(x: float) -> str:
    return format(x, ".6g")


def _csv_writer(buf):
    return csv.writer(buf, lineterminator="\n")


def _comparison_csv(report: ComparisonReport, timings: bool) -> str:
    buf = io.StringIO()
    w = _csv_writer(buf)
    w.writerow(CSV_HEADER)
    for r in report.rows:
        w.writerow([
            r.kind.name,
            "" if r.kind.bins is None else r.kind.bins,
            _g(r.isovalue),
            _g(r.total_entropy),
            _g(r.delta_from_baseline),
            r.storage_cost,
            _g(r.fit_seconds) if timings else "",
            _g(r.entropy_seconds) if timings else "",
        ])
    return buf.getvalue()


_DISPLAY = {"full": "Full Dist.", "uniform": "Uniform", "gaussian": "Gaussian",
            "histogram": "Histogram", "quantile": "Quantile"}


def _display(kind: ModelKind) -> str:
    name = _DISPLAY[kind.name]
    return f"{name} ({kind.bins})" if kind.bins is not None else name


def _comparison_text(report: ComparisonReport, timings: bool) -> str:
    ks = report.isovalues
    head = ["Distribution"] + [f"k={_g(k)}" for k in ks] + ["values/vertex"]
    body = []
    for kind in report.kinds:
        cells = [_display(kind)]
        for k in ks:
            r = report.row(kind, k)
            cells.append(f"{r.total_entropy:.2f}")
        cells.append(str(storage_cost(kind, report.n_members)))
        body.append(cells)
    widths = [max(len(row[i]) for row in [head] + body) for i in range(len(head))]

    def line(cells):
        first = cells[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
        return "  ".join([first] + rest).rstrip()

    rule = "-" * len(line(head))
    out = []
    if report.label:
        out.append(f"Total summed entropy: {report.label}")
    out += [rule, line(head), rule] + [line(b) for b in body] + [rule]
    if timings:
        out.append("fit / entropy seconds")
        for r in report.rows:
            out.append(f"  {r.kind.label:<16} k={_g(r.isovalue):<10} "
                       f"{r.fit_seconds:.4f} / {r.entropy_seconds:.4f}")
    return "\n".join(out) + "\n"


def _sweep_csv(result: BinSweepResult) -> str:
    buf = io.StringIO()
    buf.write(f"# model={result.model} isovalue={_g(result.isovalue)} "
              f"baseline={_g(result.baseline)}\n")
    w = _csv_writer(buf)
    w.writerow(("B", "total_entropy_bits"))
    for b, total in result.points:
        w.writerow([b, _g(total)])
    return buf.getvalue()


def _sweep_text(result: BinSweepResult) -> str:
    lines = [f"{result.model} bin sweep at k={_g(result.isovalue)}",
             f"baseline (full distribution): {result.baseline:.2f}",
             f"{'B':>6}  {'total':>12}  {'delta':>10}"]
    for b, total in result.points:
        lines.append(f"{b:>6}  {total:>12.2f}  {total - result.baseline:>10.2f}")
    return "\n".join(lines) + "\n"


def emit_report(report, fmt: str = "csv", timings: bool = True) -> str:
    """Render a report as CSV or an aligned text table.

    With ``timings=False`` the timing columns are left empty so the output is a
    pure function of the inputs.
    """
    if fmt not in ("csv", "text"):
        raise ValueError(f"unknown report format {fmt!r}")
    if isinstance(report, BinSweepResult):
        return _sweep_csv(report) if fmt == "csv" else _sweep_text(report)
    if not report.rows:
        raise ValueError("empty report")
    if fmt == "csv":
        return _comparison_csv(report, timings)
    return _comparison_text(report, timings)


def parse_csv_report(text: str) -> list[dict]:
    """Read back comparison CSV rows (``#`` comment lines are skipped)."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    return list(csv.DictReader(lines))


def totals_table(report: ComparisonReport) -> np.ndarray:
    """Totals as a ``(n_kinds, n_isovalues)`` array in report order."""
    return np.array([[report.row(kind, k).total_entropy for k in report.isovalues]
                     for kind in report.kinds])
