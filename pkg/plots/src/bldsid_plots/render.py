"""Render estimation-error sweep CSVs.

One panel per value of the grouping column (default ``input_kind``), one
curve per history length ``L``: mean of ``error_sq`` versus ``T`` with a
shaded band of one standard deviation.  Accepts the raw sweep schema
(``L, T, input_kind, seed, error_sq, ...``), aggregating exactly the way
the producer does (sample std, failed rows dropped), or the aggregate
schema (``mean_error_sq``/``std_error_sq`` columns), whose values are used
as-is.  Emits both PNG and SVG, deterministically (no timestamps, no
randomness).
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "bldsid-plots"  # deterministic element ids
import matplotlib.pyplot as plt  # noqa: E402


class PlotInputError(Exception):
    pass


@dataclass(frozen=True)
class Curve:
    T: np.ndarray
    mean: np.ndarray
    std: np.ndarray


@dataclass
class PlotSpec:
    inputs: list[str]
    out: str
    group_by: str = "input_kind"
    log_y: bool = False
    log_x: bool = False


@dataclass
class RenderResult:
    images: list[Path] = field(default_factory=list)
    # panel value -> L -> Curve (the exact series that were drawn)
    panels: dict = field(default_factory=dict)


def _read_rows(path: str) -> list[dict]:
    lines = Path(path).read_text().splitlines()
    data = [ln for ln in lines if not ln.startswith("#")]
    rows = list(csv.DictReader(data))
    if not rows:
        raise PlotInputError(f"no data rows in {path}")
    return rows


def _require_columns(rows: list[dict], needed: list[str], path: str) -> None:
    have = rows[0].keys()
    for col in needed:
        if col not in have:
            raise PlotInputError(f"missing column {col!r} in {path}")


def _collect(spec: PlotSpec) -> dict:
    """panel value -> L -> Curve, merged over all input files."""
    panels: dict = {}
    for path in spec.inputs:
        rows = _read_rows(path)
        aggregated = "mean_error_sq" in rows[0]
        base_cols = ["L", "T", spec.group_by]
        if aggregated:
            _require_columns(rows, base_cols + ["mean_error_sq", "std_error_sq"], path)
            for row in rows:
                key = (row[spec.group_by], int(row["L"]), int(row["T"]))
                panels.setdefault(key[0], {}).setdefault(key[1], {})[key[2]] = (
                    float(row["mean_error_sq"]),
                    float(row["std_error_sq"]),
                )
        else:
            _require_columns(rows, base_cols + ["error_sq"], path)
            groups: dict = {}
            for row in rows:
                if row.get("status", "ok") != "ok":
                    continue
                key = (row[spec.group_by], int(row["L"]), int(row["T"]))
                groups.setdefault(key, []).append(float(row["error_sq"]))
            for (panel, L, T), errs in groups.items():
                arr = np.asarray(errs)
                mean = float(np.mean(arr))
                std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
                panels.setdefault(panel, {}).setdefault(L, {})[T] = (mean, std)
    # freeze into sorted curve arrays
    out: dict = {}
    for panel, curves in panels.items():
        out[panel] = {}
        for L, by_T in curves.items():
            Ts = np.array(sorted(by_T))
            mean = np.array([by_T[t][0] for t in Ts])
            std = np.array([by_T[t][1] for t in Ts])
            out[panel][L] = Curve(T=Ts, mean=mean, std=std)
    return out


def render(spec: PlotSpec) -> RenderResult:
    """Draw every panel to <out stem>[_<panel>].png and .svg."""
    result = RenderResult(panels=_collect(spec))
    out = Path(spec.out)
    multi = len(result.panels) > 1
    for panel, curves in sorted(result.panels.items()):
        fig, ax = plt.subplots(figsize=(5.0, 3.6), dpi=150)
        for L in sorted(curves):
            curve = curves[L]
            ax.plot(curve.T, curve.mean, marker="o", markersize=3, label=f"L={L}")
            ax.fill_between(
                curve.T, curve.mean - curve.std, curve.mean + curve.std, alpha=0.25
            )
        ax.set_xlabel("T")
        ax.set_ylabel("error_sq")
        ax.set_title(f"{spec.group_by} = {panel}")
        if spec.log_y:
            ax.set_yscale("log")
        if spec.log_x:
            ax.set_xscale("log")
        ax.legend()
        fig.tight_layout()
        stem = f"{out.stem}_{panel}" if multi else out.stem
        for suffix in (".png", ".svg"):
            target = out.with_name(stem + suffix)
            fig.savefig(target, metadata=_clean_metadata(suffix))
            result.images.append(target)
        plt.close(fig)
    return result


def _clean_metadata(suffix: str) -> dict:
    # strip creation dates so reruns produce identical bytes
    if suffix == ".svg":
        return {"Date": None}
    if suffix == ".png":
        return {"Software": None}
    return {}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="bldsid-plot",
        description="plot estimation-error sweeps (mean +/- one std per curve)",
    )
    parser.add_argument("--input", action="append", required=True,
                        help="sweep CSV (raw or aggregate); repeatable")
    parser.add_argument("--out", required=True, help="output image path (.png)")
    parser.add_argument("--group-by", default="input_kind",
                        help="CSV column that defines panels")
    parser.add_argument("--log-y", action="store_true")
    parser.add_argument("--log-x", action="store_true")
    args = parser.parse_args(argv)
    spec = PlotSpec(
        inputs=args.input, out=args.out, group_by=args.group_by,
        log_y=args.log_y, log_x=args.log_x,
    )
    try:
        result = render(spec)
    except (PlotInputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {', '.join(str(p) for p in result.images)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
