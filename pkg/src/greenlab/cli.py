"""``lab`` command-line runner.

Commands::

    lab run <config>
    lab converge <scenario> --sizes 64,128,256 <config>
    lab list [--json]

Exit status: 0 all checks pass, 1 a tolerance check failed, 2 invalid
configuration, 64 usage error (unknown scenario or bad arguments).
``LAB_OUTPUT_ROOT`` relocates the output directory.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config
from .scenarios import SCENARIOS, Scenario, ScenarioResult, get_scenario

__all__ = [
    "EXIT_CONFIG",
    "EXIT_FAIL",
    "EXIT_OK",
    "EXIT_USAGE",
    "convergence_study",
    "list_scenarios",
    "main",
    "run_scenario",
]

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_USAGE = 0, 1, 2, 64
OUTPUT_ENV = "LAB_OUTPUT_ROOT"
TRACE_COLUMNS = ("field", "t", "x", "re_1", "im_1", "re_2", "im_2")
MACHINE_FLOOR = 1e-12

log = logging.getLogger("greenlab.lab")


class UsageError(Exception):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else str(float(obj))
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TRACE_COLUMNS, restval="", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def output_dir(cfg: ExperimentConfig) -> Path:
    root = os.environ.get(OUTPUT_ENV)
    out = Path(cfg.output_dir)
    if root and not out.is_absolute():
        return Path(root) / out
    return out


def _report(scenario: Scenario, cfg: ExperimentConfig, result: ScenarioResult) -> dict:
    primary = result.primary
    return {
        "scenario": scenario.name,
        "anchor": scenario.anchor,
        "passed": result.passed,
        "measured": primary.measured,
        "tolerance": primary.tolerance,
        "checks": [c.to_dict() for c in result.checks],
        "details": result.details,
        "warnings": result.warnings,
        "config": cfg.echo(),
        "version": __version__,
    }


def _resolve(names) -> list[Scenario]:
    unknown = [n for n in names if n not in SCENARIOS]
    if unknown:
        raise UsageError(f"unknown scenario(s): {', '.join(unknown)}; try 'lab list'")
    return [SCENARIOS[n] for n in names]


def run_scenario(cfg: ExperimentConfig, out: Path | None = None) -> dict:
    """Run every scenario named in ``cfg``; write reports, traces and the manifest.

    Returns the manifest. Raises :class:`UsageError` for unknown scenarios.
    """
    scenarios = _resolve(cfg.scenarios)
    out = output_dir(cfg) if out is None else Path(out)
    started = datetime.now(timezone.utc).isoformat()
    entries = []
    for sc in scenarios:
        log.info("running %s (N=%d)", sc.name, cfg.n_points)
        result = sc.run(cfg.with_scenario(sc.name))
        report_name = f"{sc.name}.json"
        _atomic_write(out / report_name, _dumps(_report(sc, cfg, result)))
        traces = []
        for label, rows in sorted(result.traces.items()):
            trace_name = f"{sc.name}.{label}.csv"
            _atomic_write(out / trace_name, _csv_text(rows))
            traces.append(trace_name)
        entries.append(
            {
                "scenario": sc.name,
                "passed": result.passed,
                "measured": result.primary.measured,
                "tolerance": result.primary.tolerance,
                "checks": [c.to_dict() for c in result.checks],
                "report": report_name,
                "traces": traces,
            }
        )
        log.info("%s: %s", sc.name, "pass" if result.passed else "FAIL")
    manifest = {
        "version": __version__,
        "config": cfg.echo(),
        "scenarios": entries,
        "passed": all(e["passed"] for e in entries),
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
    }
    _atomic_write(out / "manifest.json", _dumps(manifest))
    return manifest


def _fit_order(h: np.ndarray, err: np.ndarray) -> float:
    slope, _ = np.polyfit(np.log(h), np.log(err), 1)
    return float(slope)


def convergence_study(scenario: str, sizes, cfg: ExperimentConfig, out: Path | None = None) -> dict:
    """Run ``scenario`` at each grid size and fit the observed order of the primary error.

    An exact scenario (errors at the machine floor) is reported as
    ``"exact"``. Otherwise the study passes when errors decrease
    monotonically and, if the scenario declares an expected order, the fitted
    order lies within 0.3 of it.
    """
    sc = _resolve([scenario])[0]
    sizes = [int(n) for n in sizes]
    if len(sizes) < 3 or sorted(set(sizes)) != sizes:
        raise ConfigError("convergence study needs at least three strictly ascending sizes")
    rows = []
    for n in sizes:
        c = cfg.with_scenario(sc.name).with_size(n)
        res = sc.run(c)
        rows.append({"n_points": n, "h": c.h, "error": res.primary.measured, "passed": res.passed})
    h = np.array([r["h"] for r in rows])
    err = np.array([r["error"] for r in rows], dtype=float)
    pair_orders = (np.log(err[:-1] / err[1:]) / np.log(h[:-1] / h[1:])).tolist() if np.all(err > 0) else []
    if np.all(err <= MACHINE_FLOOR):
        order, status, passed = None, "exact", True
    elif np.any(err <= 0):
        order, status, passed = None, "non-convergent", False
    else:
        order = _fit_order(h, err)
        decreasing = bool(np.all(np.diff(err) < 0))
        if sc.expected_order is None:
            passed = decreasing
        else:
            passed = decreasing and abs(order - sc.expected_order) <= 0.3
        status = "converged" if passed else "non-convergent"
    study = {
        "scenario": sc.name,
        "anchor": sc.anchor,
        "sizes": sizes,
        "rows": rows,
        "observed_order": order,
        "pairwise_orders": pair_orders,
        "expected_order": sc.expected_order,
        "order_tolerance": 0.3,
        "status": status,
        "passed": passed,
        "config": cfg.echo(),
        "version": __version__,
    }
    out = output_dir(cfg) if out is None else Path(out)
    _atomic_write(out / f"convergence.{sc.name}.json", _dumps(study))
    _atomic_write(
        out / f"convergence.{sc.name}.csv",
        "n_points,h,error\n" + "".join(f"{r['n_points']},{r['h']!r},{r['error']!r}\n" for r in rows),
    )
    return study


def list_scenarios(as_json: bool = False) -> str:
    entries = [sc.catalog_entry() for sc in SCENARIOS.values()]
    if as_json:
        return _dumps(entries)
    lines = []
    for e in entries:
        lines.append(f"{e['name']}")
        lines.append(f"    verifies: {e['anchor']}")
        lines.append(f"    keys: {', '.join(e['required_keys'])}")
    return "\n".join(lines) + "\n"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lab", description="Boundary-control experiment runner.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="run the scenarios named in a config file")
    run.add_argument("config")
    conv = sub.add_parser("converge", help="grid-refinement study for one scenario")
    conv.add_argument("scenario")
    conv.add_argument("--sizes", default="64,128,256")
    conv.add_argument("config")
    lst = sub.add_parser("list", help="print the scenario catalog")
    lst.add_argument("--json", action="store_true")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "list":
            sys.stdout.write(list_scenarios(args.json))
            return EXIT_OK
        cfg = load_config(args.config)
        if args.command == "run":
            manifest = run_scenario(cfg)
            for e in manifest["scenarios"]:
                mark = "pass" if e["passed"] else "FAIL"
                print(f"{mark}  {e['scenario']}: measured {e['measured']:.3e} (tolerance {e['tolerance']:.1e})")
            return EXIT_OK if manifest["passed"] else EXIT_FAIL
        try:
            sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
        except ValueError:
            raise UsageError(f"--sizes must be comma-separated integers, got {args.sizes!r}") from None
        study = convergence_study(args.scenario, sizes, cfg)
        order = study["observed_order"]
        shown = study["status"] if order is None else f"order {order:.2f}"
        print(f"{'pass' if study['passed'] else 'FAIL'}  {study['scenario']}: {shown}")
        for r in study["rows"]:
            print(f"    N={r['n_points']:5d}  error={r['error']:.3e}")
        return EXIT_OK if study["passed"] else EXIT_FAIL
    except UsageError as exc:
        print(f"lab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"lab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
