"""Command-line front end driven by JSON job files.

Usage::

    bonnetmyers --job job.json [--out PATH] [--format json|csv] [--tol T] [--quiet]

Exit status is 0 on success, 2 on validation errors and 3 on numerical
failures.  Errors are reported on stderr as a JSON object with ``error``
(machine-readable code) and ``message``.
"""

from __future__ import annotations

import argparse
import copy
import io
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import criteria, functional, model_sim
from .errors import BonnetMyersError, NumericalError, ValidationError
from .profiles import ConstantPsi, profile_from_dict, psi_from_dict

COMMANDS = ("eval-f", "check-compact", "diameter", "thresholds", "simulate", "verify", "sweep")
SWEEP_COMMANDS = ("eval-f", "check-compact", "diameter", "segment")
FORMATS = ("json", "csv")
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3

_JOB_KEYS = {"command", "profile", "psi", "interval", "tol", "sweep", "output",
             "r_max", "search", "l", "L_max"}


def _num(x, what: str) -> float:
    if isinstance(x, str) and x.strip().lower() in ("inf", "infinity"):
        return math.inf
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValidationError(f"{what} must be a number, got {x!r}")
    return float(x)


def _dump_num(x: float):
    return "inf" if x == math.inf else x


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    start: float
    stop: float
    steps: int
    scale: str = "linear"
    command: str = "check-compact"

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        if not isinstance(d, dict):
            raise ValidationError("sweep must be an object")
        try:
            spec = cls(str(d["parameter"]), _num(d["from"], "sweep.from"), _num(d["to"], "sweep.to"),
                       int(d["steps"]), str(d.get("scale", "linear")),
                       str(d.get("command", "check-compact")))
        except KeyError as exc:
            raise ValidationError(f"sweep is missing field {exc.args[0]!r}") from exc
        if spec.scale not in ("linear", "log"):
            raise ValidationError(f"sweep scale must be linear or log, got {spec.scale!r}")
        if spec.command not in SWEEP_COMMANDS:
            raise ValidationError(f"cannot sweep command {spec.command!r}")
        if spec.steps < 1:
            raise ValidationError("sweep needs at least one step")
        if spec.scale == "log" and not (spec.start > 0 and spec.stop > 0):
            raise ValidationError("log sweeps need positive bounds")
        return spec

    def to_dict(self) -> dict:
        return {"parameter": self.parameter, "from": self.start, "to": self.stop,
                "steps": self.steps, "scale": self.scale, "command": self.command}

    def values(self) -> np.ndarray:
        if self.steps == 1:
            return np.array([self.start])
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.steps)
        return np.linspace(self.start, self.stop, self.steps)


@dataclass(frozen=True)
class JobSpec:
    command: str
    profile: dict
    psi: dict | None = None
    interval: tuple | None = None
    tol: float = functional.DEFAULT_TOL
    sweep: SweepSpec | None = None
    output: dict = field(default_factory=dict)
    r_max: float | None = None
    search: str | None = None
    l: float | None = None
    L_max: float | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "JobSpec":
        if not isinstance(d, dict):
            raise ValidationError("job must be a JSON object")
        unknown = set(d) - _JOB_KEYS
        if unknown:
            raise ValidationError(f"unknown job fields: {sorted(unknown)}")
        command = d.get("command")
        if command not in COMMANDS:
            raise ValidationError(f"unknown command {command!r}")
        if (command == "sweep") != ("sweep" in d):
            raise ValidationError("a sweep block is required for, and only for, command 'sweep'")
        if not isinstance(d.get("profile"), dict):
            raise ValidationError("job needs a profile object")
        interval = None
        if "interval" in d:
            iv = d["interval"]
            if not (isinstance(iv, (list, tuple)) and len(iv) == 2):
                raise ValidationError("interval must be [a, b]")
            interval = (_num(iv[0], "interval a"), _num(iv[1], "interval b"))
        output = dict(d.get("output", {}))
        if output.get("format", "json") not in FORMATS:
            raise ValidationError(f"output format must be one of {FORMATS}")
        opt = {k: _num(d[k], k) for k in ("r_max", "l", "L_max") if k in d}
        tol = _num(d.get("tol", functional.DEFAULT_TOL), "tol")
        if not tol > 0:
            raise ValidationError("tol must be positive")
        return cls(
            command=command,
            profile=copy.deepcopy(d["profile"]),
            psi=copy.deepcopy(d.get("psi")),
            interval=interval,
            tol=tol,
            sweep=SweepSpec.from_dict(d["sweep"]) if "sweep" in d else None,
            output=output,
            search=d.get("search"),
            **opt,
        )

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"command": self.command, "profile": copy.deepcopy(self.profile)}
        if self.psi is not None:
            d["psi"] = copy.deepcopy(self.psi)
        if self.interval is not None:
            d["interval"] = [_dump_num(x) for x in self.interval]
        d["tol"] = self.tol
        if self.sweep is not None:
            d["sweep"] = self.sweep.to_dict()
        if self.output:
            d["output"] = dict(self.output)
        for k in ("r_max", "search", "l", "L_max"):
            if getattr(self, k) is not None:
                d[k] = _dump_num(getattr(self, k)) if k != "search" else self.search
        return d


# ---------------------------------------------------------------------------
# Deterministic serialisation
# ---------------------------------------------------------------------------


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "null"
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float written to 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    return json.dumps(str(obj))


def rows_to_csv(columns: list[str], rows: list[list]) -> str:
    out = io.StringIO()
    out.write(",".join(columns) + "\n")
    for row in rows:
        cells = []
        for x in row:
            if isinstance(x, (float, np.floating)):
                cells.append(format(float(x), ".17g"))
            else:
                cells.append(str(x))
        out.write(",".join(cells) + "\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _interval(job: JobSpec):
    if job.interval is None:
        raise ValidationError(f"command {job.command!r} needs an interval [a, b]")
    return job.interval


def _psi(job: JobSpec, required: bool = True):
    if job.psi is None:
        if required:
            raise ValidationError(f"command {job.command!r} needs a psi description")
        return None
    return psi_from_dict(job.psi)


def _eval_f(job: JobSpec) -> dict:
    q, psi = profile_from_dict(job.profile), _psi(job)
    a, b = _interval(job)
    fv = functional.eval_F(q, psi, a, b, job.tol)
    return {**fv.to_dict(), "mean_curvature_lower_bound":
            functional.mean_curvature_lower_bound(fv, psi, a)}


def _check_compact(job: JobSpec) -> dict:
    q = profile_from_dict(job.profile)
    a = _interval(job)[0]
    search = job.search
    if search is None:
        search = "fixed" if job.psi is not None else "constant"
    if search == "fixed":
        search = _psi(job)
    return criteria.compactness_verdict(q, a, search, job.tol).to_dict()


def _diameter(job: JobSpec) -> dict:
    q = profile_from_dict(job.profile)
    psi = _psi(job, required=False) or ConstantPsi(1.0)
    kw = {"L_max": job.L_max} if job.L_max is not None else {}
    return criteria.diameter_bound(q, psi, job.tol, **kw).to_dict()


def _segment(job: JobSpec) -> dict:
    if job.l is None:
        raise ValidationError("segment evaluation needs 'l'")
    cmp = functional.eval_segment_criterion(profile_from_dict(job.profile), _psi(job), job.l, job.tol)
    return {"lhs": cmp.lhs, "rhs": cmp.rhs, "margin": cmp.margin, "abs_error_estimate": cmp.error}


def _thresholds(job: JobSpec) -> dict:
    prof = job.profile
    fam = prof.get("family")
    if fam == "poly_decay":
        p = _num(prof.get("p"), "profile.p")
        a = _num(prof.get("cutoff"), "profile.cutoff")
        out = {"p": p, "a": a, "c_paper": criteria.poly_threshold(p, a),
               "c_wan": criteria.wan_threshold(p, a)}
        if "c" in prof:
            x, val = criteria.poly_constant_psi_bound(_num(prof["c"], "profile.c"), p, a)
            out.update({"analytic_x": x, "analytic_lower_bound": val})
        return out
    if fam == "exp_decay":
        c = _num(prof.get("c"), "profile.c")
        p = _num(prof.get("p"), "profile.p")
        th = criteria.exp_thresholds(c, p)
        return {"c": c, "p": p, "compact_threshold": th.compact_threshold, "diameter": th.diameter}
    raise ValidationError("thresholds need a poly_decay or exp_decay profile")


def _simulate(job: JobSpec):
    q = profile_from_dict(job.profile)
    if job.r_max is None:
        raise ValidationError("simulate needs r_max")
    return model_sim.simulate_model(q, job.r_max, min(job.tol, model_sim.MODEL_TOL))


def _verify(job: JobSpec) -> dict:
    q = profile_from_dict(job.profile)
    psi = _psi(job, required=False) or ConstantPsi(1.0)
    traj = model_sim.simulate_model(q, job.r_max if job.r_max is not None else 1e4)
    _, res = model_sim.riccati_residual(traj)
    out: dict[str, Any] = {"zeta": traj.zeta, "rho": traj.rho,
                           "riccati_residual_max": float(np.max(np.abs(res), initial=0.0))}
    if traj.rho is not None:
        seg = model_sim.verify_segment_theorem(traj, psi, job.tol)
        out["segment"] = {"lhs": seg.lhs, "rhs": seg.rhs, "holds": seg.holds}
    else:
        a, b = job.interval if job.interval is not None else (0.0, math.inf)
        ray = model_sim.verify_ray_criterion_on_model(q, psi, a, b, job.tol, horizon=traj.r_max)
        out["ray"] = {"F": ray.F, "bound": ray.bound, "holds": ray.holds}
    lo = job.interval[0] if job.interval is not None and job.interval[0] > 0 else 0.1
    hi = traj.zeta if traj.zeta is not None else min(traj.r_max, 10.0)
    if hi > lo:
        sol = model_sim.solve_squeeze(q, psi, lo, hi, traj=traj)
        sw = model_sim.verify_sandwich(sol, traj)
        out["squeeze"] = {"a": lo, "b": hi, "residual": model_sim.squeeze_residual(sol),
                          "max_lower_violation": sw.max_lower_violation,
                          "max_upper_violation": sw.max_upper_violation}
    return out


_SWEEP_COLUMNS = {
    "check-compact": (["criterion_value", "verdict", "margin"],
                      lambda r: [r["criterion_value"], r["kind"], r["margin"]]),
    "diameter": (["l"], lambda r: [r["l"]]),
    "eval-f": (["value", "abs_error_estimate"], lambda r: [r["value"], r["abs_error_estimate"]]),
    "segment": (["lhs", "rhs", "margin"], lambda r: [r["lhs"], r["rhs"], r["margin"]]),
}


def _set_path(d: dict, path: str, value: float) -> None:
    keys = path.split(".")
    target = d
    for k in keys[:-1]:
        target = target[int(k)] if isinstance(target, list) else target.setdefault(k, {})
    last = keys[-1]
    if isinstance(target, list):
        target[int(last)] = value
    else:
        target[last] = value


def _sweep(job: JobSpec) -> tuple[list[str], list[list]]:
    spec = job.sweep
    base = job.to_dict()
    del base["sweep"]
    base["command"] = "eval-f" if spec.command == "segment" else spec.command
    if spec.parameter.split(".")[0] not in _JOB_KEYS:
        raise ValidationError(f"unknown sweep parameter {spec.parameter!r}")
    names, pick = _SWEEP_COLUMNS[spec.command]
    rows = []
    for value in spec.values():
        d = copy.deepcopy(base)
        try:
            _set_path(d, spec.parameter, float(value))
        except (KeyError, IndexError, ValueError, TypeError) as exc:
            raise ValidationError(f"cannot set sweep parameter {spec.parameter!r}") from exc
        sub = JobSpec.from_dict(d)
        handler = _segment if spec.command == "segment" else _HANDLERS[spec.command]
        rows.append([float(value)] + pick(handler(sub)))
    return ["param"] + names, rows


_HANDLERS = {
    "eval-f": _eval_f,
    "check-compact": _check_compact,
    "diameter": _diameter,
    "thresholds": _thresholds,
    "verify": _verify,
}


def run(job: JobSpec, fmt: str = "json") -> tuple[str, str | None]:
    """Execute a job; returns (primary output text, optional secondary JSON text).

    For ``simulate`` in CSV format the primary output is the trajectory table
    and the secondary output the JSON summary.
    """
    if job.command == "sweep":
        columns, rows = _sweep(job)
        if fmt == "csv":
            return rows_to_csv(columns, rows), None
        return dumps({"command": "sweep", "sweep": job.sweep.to_dict(), "columns": columns,
                      "rows": rows}) + "\n", None
    if job.command == "simulate":
        traj = _simulate(job)
        summary = {"command": "simulate", **traj.summary()}
        if fmt == "csv":
            buf = io.StringIO()
            traj.to_csv(buf)
            return buf.getvalue(), dumps(summary) + "\n"
        summary["trajectory"] = {"r": traj.grid.tolist(), "v": traj.v.tolist(),
                                 "v_prime": traj.v_prime.tolist(), "m": traj.m.tolist()}
        return dumps(summary) + "\n", None
    result = _HANDLERS[job.command](job)
    if fmt == "csv":
        flat = {k: v for k, v in result.items() if not isinstance(v, (dict, list))}
        return rows_to_csv(list(flat), [list(flat.values())]), None
    return dumps({"command": job.command, "result": result}) + "\n", None


def load_job(path: str) -> JobSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read job file: {exc}") from exc
    return JobSpec.from_dict(raw)


def _report(exc: Exception, code: str) -> None:
    sys.stderr.write(json.dumps({"error": code, "message": str(exc)}) + "\n")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="bonnetmyers", description=__doc__.split("\n")[0])
    parser.add_argument("--job", required=True, help="JSON job description")
    parser.add_argument("--out", help="output path (default: stdout)")
    parser.add_argument("--format", choices=FORMATS, help="output format")
    parser.add_argument("--tol", type=float, help="absolute tolerance override")
    parser.add_argument("--quiet", action="store_true", help="suppress secondary output")
    args = parser.parse_args(argv)

    try:
        job = load_job(args.job)
        if args.tol is not None:
            if not args.tol > 0:
                raise ValidationError("--tol must be positive")
            job = JobSpec.from_dict({**job.to_dict(), "tol": args.tol})
        fmt = args.format or job.output.get("format", "json")
        out_path = args.out or job.output.get("path")
        text, extra = run(job, fmt)
    except ValidationError as exc:
        _report(exc, exc.code)
        return EXIT_VALIDATION
    except NumericalError as exc:
        _report(exc, exc.code)
        return EXIT_NUMERICAL
    except BonnetMyersError as exc:
        _report(exc, exc.code)
        return EXIT_NUMERICAL

    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        if extra and not args.quiet:
            sys.stdout.write(extra)
    else:
        sys.stdout.write(text)
        if extra and not args.quiet:
            sys.stdout.write(extra)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
