"""Command-line interface: ``verify``, ``derive``, ``simulate`` and ``check``.

Exit codes: 0 success, 1 verification failure, 2 degenerate Lagrangian or
non-finite state, 64 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import structures as st
from .dynamics import SemisprayField, derive_el_system, dynamics_residual, el_residual
from .errors import DegenerateLagrangian, NonFiniteState, ParseError
from .expr import Lagrangian, builtin_lagrangian
from .integrate import energy_drift, integrate

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_DEGENERATE = 2
EXIT_USAGE = 64


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass
class RunConfig:
    n: int
    structure: int
    lagrangian: dict
    x0: list[float]
    dt: float
    steps: int
    output: str | None = None

    @classmethod
    def from_dict(cls, raw) -> RunConfig:
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        for key in ("n", "structure", "lagrangian", "x0", "dt", "steps"):
            if key not in raw:
                raise ConfigError(key, "missing required field")
        unknown = sorted(set(raw) - {"n", "structure", "lagrangian", "x0", "dt", "steps", "output"})
        if unknown:
            raise ConfigError(unknown[0], "unknown field")

        n = _positive_int(raw["n"], "n")
        structure = raw["structure"]
        if isinstance(structure, bool) or not isinstance(structure, int) or structure not in st.STRUCTURE_IDS:
            raise ConfigError("structure", f"must be an integer in 1..6, got {structure!r}")

        lag = raw["lagrangian"]
        if not isinstance(lag, dict):
            raise ConfigError("lagrangian", "must be an object with 'template' or 'text'")
        if ("template" in lag) == ("text" in lag):
            raise ConfigError("lagrangian", "give exactly one of 'template' or 'text'")
        if "text" in lag:
            if not isinstance(lag["text"], str) or not lag["text"].strip():
                raise ConfigError("lagrangian.text", "must be a non-empty string")
            extra = set(lag) - {"text"}
        else:
            if not isinstance(lag["template"], str):
                raise ConfigError("lagrangian.template", "must be a string")
            if not isinstance(lag.get("params", {}), dict):
                raise ConfigError("lagrangian.params", "must be an object")
            extra = set(lag) - {"template", "params"}
        if extra:
            raise ConfigError(f"lagrangian.{sorted(extra)[0]}", "unknown field")

        x0 = raw["x0"]
        if not isinstance(x0, list):
            raise ConfigError("x0", "must be an array of numbers")
        if len(x0) != st.NBLOCKS * n:
            raise ConfigError("x0", f"expected {st.NBLOCKS * n} values for n={n}, got {len(x0)}")
        for i, v in enumerate(x0):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"x0[{i}]", f"must be a finite number, got {v!r}")

        dt = raw["dt"]
        if isinstance(dt, bool) or not isinstance(dt, (int, float)) or not math.isfinite(dt) or dt <= 0:
            raise ConfigError("dt", f"must be a positive number, got {dt!r}")
        steps = _positive_int(raw["steps"], "steps")
        output = raw.get("output")
        if output is not None and not isinstance(output, str):
            raise ConfigError("output", "must be a path string")
        return cls(n, structure, lag, [float(v) for v in x0], float(dt), steps, output)

    @classmethod
    def load(cls, path) -> RunConfig:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as err:
            raise ConfigError("<file>", f"cannot read {path}: {err.strerror}") from err
        except json.JSONDecodeError as err:
            raise ConfigError("<file>", f"invalid JSON: {err}") from err
        return cls.from_dict(raw)

    def build_lagrangian(self) -> Lagrangian:
        if "text" in self.lagrangian:
            try:
                return Lagrangian.from_text(self.lagrangian["text"], self.n)
            except ParseError as err:
                raise ConfigError("lagrangian.text", str(err)) from err
        params = dict(self.lagrangian.get("params", {}))
        if "n" in params and params["n"] != self.n:
            raise ConfigError("lagrangian.params.n", f"conflicts with top-level n={self.n}")
        params["n"] = self.n
        try:
            return builtin_lagrangian(self.lagrangian["template"], params)
        except ValueError as err:
            raise ConfigError("lagrangian", str(err)) from err


def _positive_int(value, path):
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(path, f"must be a positive integer, got {value!r}")
    return value


def _num(v) -> str:
    return "%.17g" % (float(v) + 0.0)


def _vector(v) -> str:
    return "[" + ", ".join(_num(c) for c in v) + "]"


# --- commands ---

def run_verify(out, tables=None) -> int:
    """Check J² = -Id, JᵀJ = Id and 2-form antisymmetry, then print the composition table."""
    if tables is None:
        tables = {k: st.builtin_structure(k) for k in st.STRUCTURE_IDS}
    minus_id = -st.SignedBlockPermutation.identity()
    counts = {"square": 0, "orthogonal": 0, "antisymmetric": 0}
    for k, J in tables.items():
        square = st.compose(J, J) == minus_id
        orthogonal = st.check_metric_compatibility(J)
        antisymmetric = st.is_antisymmetric(st.fundamental_two_form(J))
        counts["square"] += square
        counts["orthogonal"] += orthogonal
        counts["antisymmetric"] += antisymmetric
        flags = [
            f"J^2 = -Id {'OK' if square else 'FAIL'}",
            f"J^T J = Id {'OK' if orthogonal else 'FAIL'}",
            f"Phi antisymmetric {'OK' if antisymmetric else 'FAIL'}",
        ]
        print(f"J{k}: {J}  |  " + ", ".join(flags), file=out)

    total = len(tables)
    print(file=out)
    for key, label in (("square", "J^2 = -Id"), ("orthogonal", "J^T J = Id"), ("antisymmetric", "Phi + Phi^T = 0")):
        status = "OK" if counts[key] == total else "FAIL"
        print(f"{counts[key]}/{total} structures: {label} {status}", file=out)

    ids = list(tables)
    products = {(a, b): st.compose(tables[a], tables[b]) for a in ids for b in ids}
    closed = sum(p.is_bijection for p in products.values())
    print(f"{closed}/{len(products)} products are signed block permutations "
          f"{'OK' if closed == len(products) else 'FAIL'}", file=out)

    print(file=out)
    print("composition table J_a o J_b (row a, column b); '*' = not +-Id or +-J_m:", file=out)
    print("      " + "".join(f"{f'J{b}':>6}" for b in ids), file=out)
    for a in ids:
        cells = "".join(f"{st.identify(products[a, b]) or '*':>6}" for b in ids)
        print(f"{f'J{a}':<6}{cells}", file=out)
    print(file=out)
    for (a, b), p in products.items():
        name = st.identify(p)
        print(f"({a},{b}): {p}  = {name if name else 'not +-Id or +-J_m'}", file=out)

    ok = all(v == total for v in counts.values()) and closed == len(products)
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def run_derive(structure: int, n: int, expand: bool, out) -> int:
    system = derive_el_system(structure)
    lines = system.expanded_lines(n) if expand else system.lines()
    for line in lines:
        print(line, file=out)
    return EXIT_OK


def run_simulate(config_path, out_path, out, err) -> int:
    config = RunConfig.load(config_path)
    target = out_path or config.output
    if target is None:
        raise ConfigError("output", "no output path: set 'output' in the config or pass --out")
    L = config.build_lagrangian()
    try:
        traj = integrate(L, config.structure, np.array(config.x0), config.dt, config.steps)
    except (DegenerateLagrangian, NonFiniteState) as exc:
        traj = exc.trajectory
        if traj is not None:
            traj.to_csv(target)
        kind = type(exc).__name__
        print(f"error: {kind}: {exc}", file=err)
        print(f"partial trajectory: {0 if traj is None else len(traj)} rows written to {target}", file=out)
        return EXIT_DEGENERATE

    traj.to_csv(target)
    print(f"structure: J{config.structure}", file=out)
    print(f"steps: {config.steps} (dt = {_num(config.dt)})", file=out)
    print(f"final time: {_num(traj.times[-1])}", file=out)
    print(f"final state: {_vector(traj.final_state)}", file=out)
    print(f"energy drift: {_num(energy_drift(traj))}", file=out)
    print(f"max EL residual: {_num(np.max(traj.el_residual_norms))}", file=out)
    print(f"wrote {len(traj)} rows to {target}", file=out)
    return EXIT_OK


def _parse_state(text: str, dim: int) -> np.ndarray:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise ConfigError("--state", f"not a comma-separated list of numbers: {text!r}") from exc
    if len(values) != dim:
        raise ConfigError("--state", f"expected {dim} values, got {len(values)}")
    if not all(math.isfinite(v) for v in values):
        raise ConfigError("--state", "values must be finite")
    return np.array(values)


def run_check(config_path, state_text, out, err) -> int:
    config = RunConfig.load(config_path)
    L = config.build_lagrangian()
    x = _parse_state(state_text, L.dim)
    k = config.structure
    try:
        report = SemisprayField(L, k).solve(x)
    except DegenerateLagrangian as exc:
        print(f"error: DegenerateLagrangian: {exc}", file=err)
        return EXIT_DEGENERATE
    v = report.velocity
    print(f"structure: J{k}", file=out)
    print(f"state: {_vector(x)}", file=out)
    print(f"velocity: {_vector(v)}", file=out)
    print(f"el_residual norm: {_num(np.linalg.norm(el_residual(L, k, x, v)))}", file=out)
    print(f"dynamics_residual: {_num(dynamics_residual(L, k, x, v))}", file=out)
    print(f"condition estimate: {_num(report.condition)}", file=out)
    print(f"inverse Hessian norm: {_num(report.inverse_norm)}", file=out)
    if report.near_degenerate:
        print("warning: Hessian is near-degenerate here (conditioning above 1e12); "
              "the velocity is unreliable", file=out)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cliffkahler", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("verify", help="check the structure algebra and print the composition table")

    p = sub.add_parser("derive", help="print the Euler-Lagrange system of a structure")
    p.add_argument("--structure", type=int, required=True, choices=st.STRUCTURE_IDS)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--expand", action="store_true", help="list all 8n equations with concrete indices")

    p = sub.add_parser("simulate", help="integrate a run config and write the trajectory CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="trajectory CSV path (overrides the config's 'output')")

    p = sub.add_parser("check", help="solve and report residuals at one state")
    p.add_argument("--config", required=True)
    p.add_argument("--state", required=True, help='comma-separated 8n values, e.g. "1,0,0,0,0,0,0,0"')
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        if args.command == "verify":
            return run_verify(out)
        if args.command == "derive":
            if args.n < 1:
                raise ConfigError("--n", "must be a positive integer")
            return run_derive(args.structure, args.n, args.expand, out)
        if args.command == "simulate":
            return run_simulate(args.config, args.out, out, err)
        return run_check(args.config, args.state, out, err)
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
