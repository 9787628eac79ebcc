"""Experiment harness: seeded sweeps over (T, L, input law), excitation
checks, stability certificates, moment tables, realization recovery, and
trajectory generation.

Subcommands: sweep, pe-check, stability, moments, recover, simulate.
Exit codes: 0 success, 2 config error, 3 numerical failure.

Every run emits one raw CSV, one aggregate CSV, and one JSON manifest.
CSV schemas are versioned in a leading comment line; the only
nondeterministic content is the ``# generated_at`` comment and the
manifest's timing section (wall times never enter the CSVs, so reruns with
the same config and base seed are byte-identical apart from that line).

Raw sweep CSV columns (schema bldsid-sweep-raw v1):
    L, T, input_kind, seed, error_sq, lambda_min, status
Aggregate sweep CSV columns (schema bldsid-sweep-agg v1):
    L, T, input_kind, n_trials, n_failed, mean_error_sq, std_error_sq, mean_lambda_min
Raw excitation CSV columns (schema bldsid-pe-raw v1):
    L, T, input_kind, seed, lambda_min, threshold, satisfied
Aggregate excitation CSV columns (schema bldsid-pe-agg v1):
    L, T, input_kind, n_trials, satisfaction_rate, mean_lambda_min
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys as _sys
import time
from dataclasses import dataclass, field, asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import BACKEND
from .errors import ConfigError, InstabilityError, NumericalError
from .estimate import MarkovParams, estimation_error, gram_min_eig, lse_svd
from .features import FeatureConfig, feature_matrix
from .model import Dims, SystemParams, random_system
from .moments import fourth_moment_feature_check, moment_report
from .recover import Realization, ho_kalman, markov_mismatch, true_markov
from .rng import make_rng
from .simulate import InputDistribution, NoiseConfig, draw_inputs, simulate
from .stability import certify_uniform_stability

RAW_SCHEMA = "bldsid-sweep-raw v1"
AGG_SCHEMA = "bldsid-sweep-agg v1"
PE_RAW_SCHEMA = "bldsid-pe-raw v1"
PE_AGG_SCHEMA = "bldsid-pe-agg v1"


@dataclass
class ExperimentConfig:
    n: int = 5
    p: int = 2
    m: int = 2
    rho0: float = 0.4
    rhok: float = 0.2
    sigma: float = 0.01  # noise std; variance 1e-4
    input_kinds: list[str] = field(default_factory=lambda: ["gaussian", "sphere"])
    L_list: list[int] = field(default_factory=lambda: [5, 6, 7])
    T_list: list[int] = field(default_factory=lambda: list(range(1000, 5001, 500)))
    trials: int = 10
    base_seed: int = 0
    fixed_system: bool = False
    out_dir: str = "runs"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.L_list or not self.T_list or not self.input_kinds:
            raise ConfigError("L_list, T_list, and input_kinds must be nonempty")
        for kind in self.input_kinds:
            InputDistribution(kind)  # raises ValueError on bad names
        for L in self.L_list:
            FeatureConfig(L=L, p=self.p)  # dimension guard
            for T in self.T_list:
                if T < L:
                    raise ConfigError(f"every T must be >= L; got T={T} < L={L}")
        self.dims = Dims(n=self.n, p=self.p, m=self.m)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc.pop("dims", None)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)


@dataclass
class SweepRow:
    L: int
    T: int
    input_kind: str
    seed: int
    error_sq: float
    lambda_min: float
    wall_time: float
    status: str  # "ok" | "failed"


@dataclass
class SweepResult:
    rows: list[SweepRow]
    aggregates: list[dict]
    config: ExperimentConfig


def _trial_streams(base_seed: int, l_idx: int, t_idx: int, trial: int):
    """(system, input, noise) generators for one grid trial.

    The input kind is deliberately not part of the entropy, so runs under
    different input laws share systems and noise realizations trial for
    trial (paired comparisons).
    """
    ss = np.random.SeedSequence((base_seed, l_idx, t_idx, trial))
    sys_ss, in_ss, noise_ss = ss.spawn(3)
    return (
        np.random.Generator(np.random.Philox(sys_ss)),
        np.random.Generator(np.random.Philox(in_ss)),
        np.random.Generator(np.random.Philox(noise_ss)),
    )


def run_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Simulate, fit, and score every (input kind, L, T, trial) grid point.

    A fresh system is drawn per trial unless ``fixed_system`` shares one
    across the whole sweep.  Overflowing simulations mark the row failed
    and the sweep continues.  Deterministic given config + base_seed.
    """
    rows: list[SweepRow] = []
    fixed_sys = None
    fixed_true = {}
    if cfg.fixed_system:
        fixed_sys = random_system(
            cfg.dims, cfg.rho0, cfg.rhok, seed=make_rng((cfg.base_seed,))
        )
        fixed_true = {L: true_markov(fixed_sys, L) for L in cfg.L_list}
    noise = NoiseConfig(sigma=cfg.sigma)

    for kind in cfg.input_kinds:
        dist = InputDistribution(kind)
        for l_idx, L in enumerate(cfg.L_list):
            fcfg = FeatureConfig(L=L, p=cfg.p)
            for t_idx, T in enumerate(cfg.T_list):
                for trial in range(cfg.trials):
                    t0 = time.perf_counter()
                    sys_rng, in_rng, noise_rng = _trial_streams(
                        cfg.base_seed, l_idx, t_idx, trial
                    )
                    if fixed_sys is not None:
                        sys_, g_true = fixed_sys, fixed_true[L]
                    else:
                        sys_ = random_system(cfg.dims, cfg.rho0, cfg.rhok, seed=sys_rng)
                        g_true = true_markov(sys_, L)
                    inputs = draw_inputs(dist, cfg.p, T + 1, in_rng)
                    try:
                        traj = simulate(sys_, inputs, noise, noise_rng)
                    except InstabilityError:
                        rows.append(
                            SweepRow(L, T, kind, trial, math.nan, math.nan,
                                     time.perf_counter() - t0, "failed")
                        )
                        continue
                    U = feature_matrix(traj, fcfg)
                    G_hat, svals = lse_svd(U, traj.y[L:])
                    err = estimation_error(G_hat, g_true.G)
                    lam = float(svals[-1]) ** 2 if U.shape[0] >= U.shape[1] else 0.0
                    rows.append(
                        SweepRow(L, T, kind, trial, err * err, lam,
                                 time.perf_counter() - t0, "ok")
                    )
    return SweepResult(rows=rows, aggregates=_aggregate_sweep(rows), config=cfg)


def _aggregate_sweep(rows: list[SweepRow]) -> list[dict]:
    groups: dict[tuple, list[SweepRow]] = {}
    for row in rows:
        groups.setdefault((row.L, row.T, row.input_kind), []).append(row)
    out = []
    for (L, T, kind), members in groups.items():
        ok = [r for r in members if r.status == "ok"]
        errs = np.array([r.error_sq for r in ok])
        lams = np.array([r.lambda_min for r in ok])
        out.append(
            {
                "L": L,
                "T": T,
                "input_kind": kind,
                "n_trials": len(members),
                "n_failed": len(members) - len(ok),
                "mean_error_sq": float(np.mean(errs)) if ok else math.nan,
                "std_error_sq": float(np.std(errs, ddof=1)) if len(ok) > 1 else 0.0,
                "mean_lambda_min": float(np.mean(lams)) if ok else math.nan,
            }
        )
    return out


@dataclass
class PERow:
    L: int
    T: int
    input_kind: str
    seed: int
    lambda_min: float
    threshold: float
    satisfied: bool


def run_pe_check(cfg: ExperimentConfig) -> tuple[list[PERow], list[dict]]:
    """Excitation sweep: smallest Gram eigenvalue against the rows/4
    threshold, per grid point and trial.  Inputs only; no system needed."""
    rows: list[PERow] = []
    for kind in cfg.input_kinds:
        dist = InputDistribution(kind)
        for l_idx, L in enumerate(cfg.L_list):
            fcfg = FeatureConfig(L=L, p=cfg.p)
            for t_idx, T in enumerate(cfg.T_list):
                for trial in range(cfg.trials):
                    _, in_rng, _ = _trial_streams(cfg.base_seed, l_idx, t_idx, trial)
                    inputs = draw_inputs(dist, cfg.p, T + 1, in_rng)
                    report = gram_min_eig(feature_matrix(inputs, fcfg))
                    rows.append(
                        PERow(L, T, kind, trial, report.lambda_min,
                              report.threshold, report.satisfied)
                    )
    groups: dict[tuple, list[PERow]] = {}
    for row in rows:
        groups.setdefault((row.L, row.T, row.input_kind), []).append(row)
    aggs = [
        {
            "L": L,
            "T": T,
            "input_kind": kind,
            "n_trials": len(members),
            "satisfaction_rate": sum(r.satisfied for r in members) / len(members),
            "mean_lambda_min": float(np.mean([r.lambda_min for r in members])),
        }
        for (L, T, kind), members in groups.items()
    ]
    return rows, aggs


def run_recover(
    ghat: MarkovParams, n: int, L: int | None = None, mode: str = "shared"
) -> tuple[Realization, dict]:
    """Realization recovery plus a coefficient-reconstruction error report."""
    realization = ho_kalman(ghat, n=n, L=L, mode=mode)
    report = {
        "order": n,
        "mode": mode,
        "markov_mismatch": markov_mismatch(ghat, realization, L or ghat.cfg.L),
    }
    return realization, report


# ---------------------------------------------------------------------------
# file emission


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, schema: str, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.write_text(
        f"# generated_at: {_timestamp()}\n# schema: {schema}\n" + buf.getvalue()
    )


def _config_hash(cfg: ExperimentConfig) -> str:
    canon = json.dumps(cfg.to_dict(), sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()


def _write_manifest(path: Path, cfg: ExperimentConfig, timings: list[dict]) -> None:
    doc = {
        "schema": "bldsid-manifest v1",
        "generated_at": _timestamp(),
        "config": cfg.to_dict(),
        "config_hash": _config_hash(cfg),
        "versions": {"bldsid": __version__, "numpy": np.__version__, "backend": BACKEND},
        "timings": timings,
        "total_wall_time": sum(t["wall_time"] for t in timings),
    }
    path.write_text(json.dumps(doc, indent=2))


def write_sweep_outputs(result: SweepResult, out_dir: Path) -> dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    raw = out_dir / "sweep_raw.csv"
    agg = out_dir / "sweep_agg.csv"
    manifest = out_dir / "sweep_manifest.json"
    _write_csv(
        raw,
        RAW_SCHEMA,
        ["L", "T", "input_kind", "seed", "error_sq", "lambda_min", "status"],
        [[r.L, r.T, r.input_kind, r.seed, r.error_sq, r.lambda_min, r.status]
         for r in result.rows],
    )
    _write_csv(
        agg,
        AGG_SCHEMA,
        ["L", "T", "input_kind", "n_trials", "n_failed", "mean_error_sq",
         "std_error_sq", "mean_lambda_min"],
        [[a["L"], a["T"], a["input_kind"], a["n_trials"], a["n_failed"],
          a["mean_error_sq"], a["std_error_sq"], a["mean_lambda_min"]]
         for a in result.aggregates],
    )
    _write_manifest(
        manifest,
        result.config,
        [
            {"L": r.L, "T": r.T, "input_kind": r.input_kind, "seed": r.seed,
             "wall_time": r.wall_time}
            for r in result.rows
        ],
    )
    return {"raw": raw, "agg": agg, "manifest": manifest}


def write_pe_outputs(
    rows: list[PERow], aggs: list[dict], cfg: ExperimentConfig, out_dir: Path
) -> dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    raw = out_dir / "pe_raw.csv"
    agg = out_dir / "pe_agg.csv"
    manifest = out_dir / "pe_manifest.json"
    _write_csv(
        raw,
        PE_RAW_SCHEMA,
        ["L", "T", "input_kind", "seed", "lambda_min", "threshold", "satisfied"],
        [[r.L, r.T, r.input_kind, r.seed, r.lambda_min, r.threshold, r.satisfied]
         for r in rows],
    )
    _write_csv(
        agg,
        PE_AGG_SCHEMA,
        ["L", "T", "input_kind", "n_trials", "satisfaction_rate", "mean_lambda_min"],
        [[a["L"], a["T"], a["input_kind"], a["n_trials"], a["satisfaction_rate"],
          a["mean_lambda_min"]] for a in aggs],
    )
    _write_manifest(manifest, cfg, [])
    return {"raw": raw, "agg": agg, "manifest": manifest}


# ---------------------------------------------------------------------------
# argument parsing


def _load_config(args) -> ExperimentConfig:
    doc = {}
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
    overrides = {
        "n": args.n, "p": args.p, "m": args.m, "rho0": args.rho0,
        "rhok": args.rhok, "sigma": args.sigma, "trials": args.trials,
        "base_seed": args.base_seed, "out_dir": args.out_dir,
    }
    if args.l_list:
        overrides["L_list"] = [int(v) for v in args.l_list.split(",")]
    if args.t_list:
        overrides["T_list"] = [int(v) for v in args.t_list.split(",")]
    if args.input_kinds:
        overrides["input_kinds"] = args.input_kinds.split(",")
    if args.fixed_system:
        overrides["fixed_system"] = True
    doc.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _add_config_flags(sub) -> None:
    sub.add_argument("--config", help="JSON config file; flags override its keys")
    sub.add_argument("--n", type=int)
    sub.add_argument("--p", type=int)
    sub.add_argument("--m", type=int)
    sub.add_argument("--rho0", type=float)
    sub.add_argument("--rhok", type=float)
    sub.add_argument("--sigma", type=float)
    sub.add_argument("--l-list", help="comma-separated history lengths")
    sub.add_argument("--t-list", help="comma-separated trajectory lengths")
    sub.add_argument("--input-kinds", help="comma-separated: gaussian,sphere")
    sub.add_argument("--trials", type=int)
    sub.add_argument("--base-seed", type=int)
    sub.add_argument("--fixed-system", action="store_true",
                     help="share one system across all trials")
    sub.add_argument("--out-dir")


def _load_or_draw_system(args) -> SystemParams:
    if args.system:
        return SystemParams.from_json(Path(args.system).read_text())
    dims = Dims(n=args.n, p=args.p, m=args.m)
    return random_system(dims, args.rho0, args.rhok, seed=args.seed)


def _add_system_flags(sub) -> None:
    sub.add_argument("--system", help="SystemParams JSON file")
    sub.add_argument("--n", type=int, default=5)
    sub.add_argument("--p", type=int, default=2)
    sub.add_argument("--m", type=int, default=2)
    sub.add_argument("--rho0", type=float, default=0.4)
    sub.add_argument("--rhok", type=float, default=0.2)
    sub.add_argument("--seed", type=int, default=0)


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    result = run_sweep(cfg)
    paths = write_sweep_outputs(result, Path(cfg.out_dir))
    print(f"wrote {paths['raw']}, {paths['agg']}, {paths['manifest']}")
    return 0


def _cmd_pe_check(args) -> int:
    cfg = _load_config(args)
    rows, aggs = run_pe_check(cfg)
    paths = write_pe_outputs(rows, aggs, cfg, Path(cfg.out_dir))
    for a in aggs:
        print(
            f"L={a['L']} T={a['T']} kind={a['input_kind']} "
            f"satisfaction_rate={a['satisfaction_rate']:.2f}"
        )
    print(f"wrote {paths['raw']}, {paths['agg']}, {paths['manifest']}")
    return 0


def _cmd_stability(args) -> int:
    sys_ = _load_or_draw_system(args)
    report = certify_uniform_stability(
        sys_,
        InputDistribution(args.dist),
        rho=args.rho,
        kappa=args.kappa,
        depth_max=args.depth,
        samples=args.samples,
        rng=make_rng((args.seed, 1)),
    )
    verdict = "CERTIFIED (sampled evidence, not a proof)" if report.certified else "NOT certified"
    print("uniform stability certificate")
    print(f"  input law        : {args.dist}")
    print(f"  sampled depths   : 1..{report.depth}, {report.samples} sequences per depth")
    print(f"  growth rate est. : rho_hat = {report.rho_hat:.6f} (target rho = {report.rho})")
    print(f"  transient est.   : kappa_hat = {report.kappa_hat:.6f} (target kappa = {report.kappa})")
    print(f"  verdict          : {verdict}")
    if args.json_out:
        Path(args.json_out).write_text(report.to_json())
    return 0


def _cmd_moments(args) -> int:
    report = moment_report(
        InputDistribution(args.dist), args.p, args.samples, args.directions,
        make_rng((args.seed, 2)),
    )
    print(f"moment report: {args.dist}, p={args.p}, N={args.samples}")
    print(f"  {'gamma_hat':<18} {report.gamma_hat:.4f}")
    print(f"  {'isotropy_dev':<18} {report.isotropy_dev:.3e}")
    print(f"  {'third_moment_max':<18} {report.third_moment_max:.3e}")
    print(f"  {'directions':<18} {report.direction_count}")
    if args.feature_l:
        fm = fourth_moment_feature_check(
            InputDistribution(args.dist), args.p, args.feature_l,
            min(args.samples, 10**5), args.directions, make_rng((args.seed, 3)),
        )
        status = "ok" if fm.satisfied else "VIOLATED"
        print(f"  feature 4th moment: {fm.empirical_max:.3f} <= bound {fm.bound:.3f} [{status}]")
    if args.json_out:
        Path(args.json_out).write_text(report.to_json())
    return 0


def _cmd_recover(args) -> int:
    ghat = MarkovParams.from_json(Path(args.ghat).read_text())
    realization, report = run_recover(ghat, n=args.n, L=args.L, mode=args.mode)
    Path(args.out).write_text(realization.to_json())
    Path(args.report_out).write_text(json.dumps(report, indent=2))
    print(f"recovered order-{args.n} realization -> {args.out}")
    print(f"coefficient reconstruction error: {report['markov_mismatch']:.3e}")
    return 0


def _cmd_simulate(args) -> int:
    sys_ = _load_or_draw_system(args)
    inputs = draw_inputs(
        InputDistribution(args.dist), sys_.dims.p, args.T + 1, make_rng((args.seed, 4))
    )
    traj = simulate(sys_, inputs, NoiseConfig(sigma=args.sigma), make_rng((args.seed, 5)))
    traj.to_csv(args.out, include_state=args.include_state)
    if args.json_out:
        Path(args.json_out).write_text(traj.to_json())
    print(f"wrote {args.T + 1} steps to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bldsid",
        description="bilinear system identification experiments",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sweep = subs.add_parser("sweep", help="estimation-error sweep over (L, T, input law)")
    _add_config_flags(sweep)
    sweep.set_defaults(func=_cmd_sweep)

    pe = subs.add_parser("pe-check", help="Gram smallest-eigenvalue excitation check")
    _add_config_flags(pe)
    pe.set_defaults(func=_cmd_pe_check)

    stab = subs.add_parser("stability", help="sampled uniform-stability certificate")
    _add_system_flags(stab)
    stab.add_argument("--dist", default="sphere", choices=[d.value for d in InputDistribution])
    stab.add_argument("--rho", type=float, default=0.9)
    stab.add_argument("--kappa", type=float, default=10.0)
    stab.add_argument("--depth", type=int, default=64)
    stab.add_argument("--samples", type=int, default=256)
    stab.add_argument("--json-out")
    stab.set_defaults(func=_cmd_stability)

    mom = subs.add_parser("moments", help="input-distribution moment table")
    mom.add_argument("--dist", default="sphere", choices=[d.value for d in InputDistribution])
    mom.add_argument("--p", type=int, default=2)
    mom.add_argument("--samples", type=int, default=10**5)
    mom.add_argument("--directions", type=int, default=64)
    mom.add_argument("--seed", type=int, default=0)
    mom.add_argument("--feature-l", type=int, help="also check feature fourth moments at this L")
    mom.add_argument("--json-out")
    mom.set_defaults(func=_cmd_moments)

    rec = subs.add_parser("recover", help="realization recovery from estimated coefficients")
    rec.add_argument("--ghat", required=True, help="MarkovParams JSON file")
    rec.add_argument("--n", type=int, required=True, help="realization order")
    rec.add_argument("--L", type=int, help="degree blocks to use (default: all stored)")
    rec.add_argument("--mode", default="shared", choices=["shared", "per_k"])
    rec.add_argument("--out", default="realization.json")
    rec.add_argument("--report-out", default="recover_report.json")
    rec.set_defaults(func=_cmd_recover)

    sim = subs.add_parser("simulate", help="generate one trajectory CSV")
    _add_system_flags(sim)
    sim.add_argument("--dist", default="sphere", choices=[d.value for d in InputDistribution])
    sim.add_argument("--T", type=int, default=1000)
    sim.add_argument("--sigma", type=float, default=0.01)
    sim.add_argument("--include-state", action="store_true")
    sim.add_argument("--out", default="trajectory.csv")
    sim.add_argument("--json-out")
    sim.set_defaults(func=_cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=_sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
