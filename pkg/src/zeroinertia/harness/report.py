"""Text report and long-format series CSV for a finished run."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from ..metrics import DiagnosticsSeries, RateFit
from .config import parse_spec_text
from .experiment import Check, RunSummary

__all__ = ["emit_report", "load_summary", "read_series_csv", "write_series_csv"]

SERIES_HEADER = "series,epsilon,t,value"


def write_series_csv(series_list, path) -> None:
    """Rows ``series,epsilon,t,value``; undefined points are written as ``nan``."""
    with open(path, "w") as fh:
        fh.write(SERIES_HEADER + "\n")
        for s in series_list:
            for name, values in s.columns().items():
                if name == "t":
                    continue
                for t, v in zip(s.times, values):
                    fh.write(f"{name},{s.epsilon!r},{float(t)!r},{float(v)!r}\n")


def read_series_csv(path) -> list[DiagnosticsSeries]:
    """Inverse of :func:`write_series_csv`, one series per epsilon in file order."""
    by_eps: dict[float, dict[str, list]] = {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != SERIES_HEADER:
            raise ValueError(f"{path}: expected header {SERIES_HEADER!r}, got {header!r}")
        for line in fh:
            if not line.strip():
                continue
            name, eps, t, value = line.rstrip("\n").split(",")
            cols = by_eps.setdefault(float(eps), {})
            cols.setdefault(name, ([], []))
            cols[name][0].append(float(t))
            cols[name][1].append(float(value))
    out = []
    for eps, cols in by_eps.items():
        times = np.array(next(iter(cols.values()))[0])
        get = lambda key: np.array(cols[key][1]) if key in cols else None  # noqa: E731
        out.append(DiagnosticsSeries(times, get("I"), get("support"), get("w1"), get("momentum"),
                                     get("phase_w1"), get("traj_err"), epsilon=eps))
    return out


def _fit_line(name, fit) -> str:
    if isinstance(fit, RateFit):
        return (f"  {name}: slope {fit.slope:.4f}, constant {fit.constant:.4g}, "
                f"max log-residual {fit.residual:.3g} ({fit.n_points} points)")
    return f"  {name}: {fit}"


def emit_report(summary: RunSummary, out_dir=None) -> tuple[Path, Path]:
    """Write ``report.txt`` and ``series.csv``; returns their paths."""
    out_dir = Path(out_dir if out_dir is not None else summary.run_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = summary.spec
    lines = [
        f"zero-inertia limit run: {spec.name}",
        f"scenario {spec.scenario}, config hash {summary.config_hash}",
        "",
        "configuration:",
        *("  " + line for line in spec.to_text().splitlines()),
    ]
    if spec.diagnostics:
        lines += ["", "per-epsilon maxima:"]
        for s in summary.series:
            parts = []
            for col in ("I", "support", "w1", "momentum", "phase_w1", "traj_err"):
                vals = s.columns().get(col)
                if vals is not None and np.isfinite(vals).any():
                    parts.append(f"{col}={np.nanmax(vals):.4g}")
            lines.append(f"  eps={s.epsilon:g}: " + ", ".join(parts))
        lines += ["", "rate fits (log value vs log eps):"]
        lines += [_fit_line(k, v) for k, v in summary.fits.items()]
        lines += ["", "checks:"]
        lines += ["  " + c.line() for c in summary.checks]
        verdict = "PASS" if summary.passed else "FAIL"
        lines += ["", f"overall: {verdict}"]
    report = out_dir / "report.txt"
    report.write_text("\n".join(lines) + "\n")
    series = out_dir / "series.csv"
    write_series_csv(summary.series, series)
    return report, series


def load_summary(run_dir) -> RunSummary:
    """Rebuild a summary from ``config.txt``, ``summary.json`` and ``series.csv``."""
    run_dir = Path(run_dir)
    spec = parse_spec_text((run_dir / "config.txt").read_text())
    data = json.loads((run_dir / "summary.json").read_text())
    fits = {}
    for k, v in data["fits"].items():
        fits[k] = v["error"] if "error" in v else RateFit(**v)
    checks = [Check(**c) for c in data["checks"]]
    series = read_series_csv(run_dir / "series.csv") if (run_dir / "series.csv").exists() else []
    return RunSummary(spec, data["config_hash"], data["epsilons"], series, fits, checks, math.nan, run_dir)
