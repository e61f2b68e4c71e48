"""Command-line front end: analyze, oracle-check, plot.

Reports are emitted by a small canonical serializer (sorted keys, floats
at 17 significant digits, non-finite mapped to null) so that two runs on
the same input differ at most in the timing field.
"""

from __future__ import annotations

import argparse
import math
import sys
import time

import numpy as np

from . import __version__
from .averaging import (
    DegeneracyKind,
    Region,
    averaged_function,
    big_k,
)
from .flow import integrate, seed_to_section, epsilon_sweep
from .model import ControlSystem, Family, Nonlinearity
from .quadrature import (
    QuadratureConfig,
    ToleranceNotMet,
    averaged_component_numeric,
    integral_numeric,
)
from .zeros import assemble_zero

DEFAULT_EPSILONS = (1e-2, 1e-3, 1e-4)
DEFAULT_GRID = "4:0.2,0.5,0.9,1.1,1.5,2,3,5,10"

_VERDICT_NAMES = {
    DegeneracyKind.REGULAR: "Regular",
    DegeneracyKind.CONTINUUM_CANDIDATE: "ContinuumCandidate",
    DegeneracyKind.NO_INFORMATION: "NoInformation",
}

_FAMILY_NAMES = {"odd": Family.ODD, "consecutive": Family.CONSECUTIVE}
_NONLINEARITY_NAMES = {"saturation": Nonlinearity.SATURATION, "sign": Nonlinearity.SIGN}


class SpecError(ValueError):
    """Malformed system spec file; message names the offending field."""


# ---------------------------------------------------------------------------
# canonical serialization


def _fmt_float(v: float) -> str:
    if math.isnan(v) or math.isinf(v):
        return "null"
    if v == 0.0:
        v = 0.0  # normalize -0.0
    return format(float(v), ".17g")


def emit_json(obj, indent: int = 0) -> str:
    """Canonical JSON text: sorted keys, %.17g floats, non-finite -> null."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        out = obj.replace("\\", "\\\\").replace('"', '\\"')
        out = out.replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t")
        return f'"{out}"'
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, np.ndarray):
        return emit_json(obj.tolist(), indent)
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [emit_json(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(inner + it for it in items) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{inner}"{k}": ' + emit_json(obj[k], indent + 1)
            for k in sorted(obj)
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# ---------------------------------------------------------------------------
# spec parsing


def _require_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(f"field {where}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise SpecError(f"field {where}: value is not finite")
    return float(value)


def parse_system_spec(data: dict):
    """Validate a decoded spec object; returns (system, epsilons).

    Error messages name the offending field; matrix and vector positions
    are reported with 1-based indices.
    """
    if not isinstance(data, dict):
        raise SpecError("spec must be a JSON object")
    known = {"n", "family", "A", "b", "nonlinearity", "epsilons"}
    for key in data:
        if key not in known:
            raise SpecError(f"unknown field {key!r}")
    for key in ("n", "family", "A", "b", "nonlinearity"):
        if key not in data:
            raise SpecError(f"missing field {key!r}")

    n = data["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise SpecError(f"field n: expected a positive integer, got {n!r}")
    dim = 2 * n

    family = data["family"]
    if family not in _FAMILY_NAMES:
        raise SpecError(
            f"field family: expected 'odd' or 'consecutive', got {family!r}"
        )
    nonlin = data["nonlinearity"]
    if nonlin not in _NONLINEARITY_NAMES:
        raise SpecError(
            f"field nonlinearity: expected 'saturation' or 'sign', got {nonlin!r}"
        )

    a_rows = data["A"]
    if not isinstance(a_rows, list) or len(a_rows) != dim:
        got = len(a_rows) if isinstance(a_rows, list) else type(a_rows).__name__
        raise SpecError(f"field A: expected {dim} rows, got {got}")
    mat = np.empty((dim, dim))
    for i, row in enumerate(a_rows, start=1):
        if not isinstance(row, list) or len(row) != dim:
            got = len(row) if isinstance(row, list) else type(row).__name__
            raise SpecError(f"field A: row {i} must have {dim} entries, got {got}")
        for j, v in enumerate(row, start=1):
            mat[i - 1, j - 1] = _require_number(v, f"A[{i}][{j}]")

    b_row = data["b"]
    if not isinstance(b_row, list) or len(b_row) != dim:
        got = len(b_row) if isinstance(b_row, list) else type(b_row).__name__
        raise SpecError(f"field b: expected {dim} entries, got {got}")
    vec = np.empty(dim)
    for j, v in enumerate(b_row, start=1):
        vec[j - 1] = _require_number(v, f"b[{j}]")
    if not np.any(vec != 0.0):
        raise SpecError("field b: at least one entry must be nonzero")

    epsilons = data.get("epsilons", list(DEFAULT_EPSILONS))
    if not isinstance(epsilons, list):
        raise SpecError(f"field epsilons: expected an array, got {type(epsilons).__name__}")
    eps_out = [
        _require_number(v, f"epsilons[{k}]") for k, v in enumerate(epsilons, start=1)
    ]

    system = ControlSystem(
        n=n,
        family=_FAMILY_NAMES[family],
        A=mat,
        b=vec,
        nonlinearity=_NONLINEARITY_NAMES[nonlin],
    )
    return system, eps_out


def load_system_spec(path: str):
    import json

    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON: {exc}") from exc
    return parse_system_spec(data)


def serialize_system_spec(system: ControlSystem, epsilons) -> dict:
    return {
        "n": system.n,
        "family": "odd" if system.family is Family.ODD else "consecutive",
        "A": system.A.tolist(),
        "b": system.b.tolist(),
        "nonlinearity": (
            "saturation" if system.nonlinearity is Nonlinearity.SATURATION else "sign"
        ),
        "epsilons": list(epsilons),
    }


# ---------------------------------------------------------------------------
# analyze


def _oracle_summary(system, zero) -> dict:
    """Max deviation of the closed-form average from quadrature at the zero.

    The gate is 1e-8 rather than the module default: components of h carry
    the system's coefficient scale, so the panel-doubling estimate is
    roundoff-dominated and a 1e-10 absolute gate would reject exact
    agreement on large systems.
    """
    worst = 0.0
    dim = 2 * system.n - 1
    closed = averaged_function(system, zero)
    cfg = QuadratureConfig(abs_tol=1e-8)
    for comp in range(1, dim + 1):
        num, _ = averaged_component_numeric(system, zero, comp, cfg=cfg)
        worst = max(worst, abs(closed[comp - 1] - num))
    return {"max_abs_deviation": worst, "components": dim}


def cmd_analyze(args) -> int:
    t_start = time.perf_counter()
    try:
        system, epsilons = load_system_spec(args.spec)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.epsilons is not None:
        try:
            epsilons = [float(v) for v in args.epsilons.split(",") if v.strip()]
        except ValueError as exc:
            print(f"error: --epsilons: {exc}", file=sys.stderr)
            return 1
    region = Region.INNER_BALL if args.region == "inner" else Region.OUTER

    report_obj = assemble_zero(system, region)
    verdict = _VERDICT_NAMES[report_obj.verdict.kind]
    zero = report_obj.zero

    out = {
        "tool": {"name": "pwlcycles", "version": __version__},
        "system": serialize_system_spec(system, epsilons),
        "region": args.region,
        "verdict": verdict,
        "verdict_reason": report_obj.verdict.reason,
        "cascade_log": list(report_obj.cascade_log),
        "zero": None,
        "jacobian_det": report_obj.jacobian_det,
        "degree": report_obj.degree,
        "newton_residual": report_obj.newton_residual,
        "oracle": None,
        "sweep": None,
    }

    exit_code = 3
    if verdict == "Regular":
        exit_code = 0 if zero is not None else 2

    if zero is not None:
        section = seed_to_section(zero)
        out["zero"] = {
            "polar": {
                "r": zero.r,
                "blocks": [[th, rj] for th, rj in zero.blocks],
            },
            "section": section.tolist(),
        }
        try:
            out["oracle"] = _oracle_summary(system, zero)
        except ToleranceNotMet as exc:
            out["oracle"] = {"error": f"quadrature tolerance not met: {exc}"}

        if epsilons:
            rows = epsilon_sweep(system, epsilons, zero)
            sweep_out = []
            best_state = None
            best_eps = None
            for row in rows:
                entry = {"epsilon": row.epsilon, "error": row.error}
                if row.result is not None:
                    res = row.result
                    entry.update(
                        {
                            "fixed_point": res.fixed_point.tolist(),
                            "period": res.period,
                            "poincare_residual": res.poincare_residual,
                            "distance_to_prediction": res.distance_to_prediction,
                            "floquet_max_modulus": res.floquet_max_modulus,
                            "crossing_ok": res.crossing_ok,
                        }
                    )
                    best_state = res.fixed_point
                    best_eps = row.epsilon
                sweep_out.append(entry)
            out["sweep"] = sweep_out

            if args.trajectory_out and best_state is not None:
                from dataclasses import replace

                sys_eps = replace(system, epsilon=best_eps)
                traj = integrate(
                    sys_eps, best_state, (0.0, 4.0 * math.pi), sample_dt=0.005
                )
                traj.to_csv(args.trajectory_out)
            elif args.trajectory_out:
                print(
                    "warning: no converged cycle; trajectory not written",
                    file=sys.stderr,
                )

    out["timing_seconds"] = time.perf_counter() - t_start
    text = emit_json(out) + "\n"
    if args.out:
        try:
            with open(args.out, "w") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
            return 1
    else:
        sys.stdout.write(text)
    return exit_code


# ---------------------------------------------------------------------------
# oracle-check


def _parse_grid(grid: str):
    try:
        jpart, rpart = grid.split(":")
        jmax = int(jpart)
        rs = [float(v) for v in rpart.split(",") if v.strip()]
    except ValueError as exc:
        raise SpecError(f"--grid must look like 'JMAX:r1,r2,...': {exc}") from exc
    if jmax < 1 or not rs or any(r <= 0 for r in rs):
        raise SpecError("--grid needs JMAX >= 1 and positive radii")
    return jmax, rs


def cmd_oracle_check(args) -> int:
    t_start = time.perf_counter()
    try:
        jmax, radii = _parse_grid(args.grid)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    cfg = QuadratureConfig()
    lines = []
    failures = []
    count = 0
    worst = 0.0

    from .averaging import i_integral, j_integral

    for nl_name, nonlin in (("saturation", Nonlinearity.SATURATION), ("sign", Nonlinearity.SIGN)):
        for fam_name, family in (("odd", Family.ODD), ("consecutive", Family.CONSECUTIVE)):
            base = np.zeros((2 * jmax, 2 * jmax))
            bvec = np.zeros(2 * jmax)
            bvec[0] = 1.0
            system = ControlSystem(
                n=jmax, family=family, A=base, b=bvec, nonlinearity=nonlin
            )
            for j in range(1, jmax + 1):
                for r in radii:
                    if nonlin is Nonlinearity.SATURATION and abs(r - 1.0) < 1e-12:
                        continue  # the closed form switches branch exactly here
                    for which, closed_fn in (("I", i_integral), ("J", j_integral)):
                        try:
                            oracle, est = integral_numeric(j, r, system, which="cos" if which == "I" else "sin", cfg=cfg)
                        except ToleranceNotMet as exc:
                            failures.append(
                                f"{which} {nl_name} {fam_name} j={j} r={_fmt_float(r)}: "
                                f"quadrature tolerance not met (estimate {exc.estimate:.3e})"
                            )
                            continue
                        closed = closed_fn(j, r, system)
                        delta = abs(oracle - closed)
                        worst = max(worst, delta)
                        count += 1
                        lines.append(
                            f"{which} nonlinearity={nl_name} family={fam_name} j={j} "
                            f"r={_fmt_float(r)} oracle={oracle:.17g} est={est:.3e} "
                            f"closed={closed:.17g} delta={delta:.3e}"
                        )
                        if delta > args.tol:
                            failures.append(lines[-1])

    elapsed = time.perf_counter() - t_start
    header = [
        "# integral fixtures: quadrature oracle vs closed forms",
        f"# grid: j in 1..{jmax}, r in {{{','.join(_fmt_float(r) for r in radii)}}}",
        f"# rows: {count}  tol: {_fmt_float(args.tol)}",
    ]
    body = "\n".join(header + lines) + "\n"
    if args.out:
        try:
            with open(args.out, "w") as fh:
                fh.write(body)
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
            return 1
    else:
        sys.stdout.write(body)

    status = "FAIL" if failures else "PASS"
    print(
        f"oracle-check: {count} rows, max |delta| = {worst:.3e}, "
        f"tol = {args.tol:.1e}, {elapsed:.2f}s -> {status}",
        file=sys.stderr,
    )
    if failures:
        for f_line in failures[:5]:
            print(f"offender: {f_line}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# plot


def cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "pwlcycles"

    if args.kind == "k-curve":
        if args.r_max <= 1.0:
            print("error: --r-max must exceed 1", file=sys.stderr)
            return 1
        r = np.linspace(1.0 + 1e-9, args.r_max, 4000)
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        ax.plot(r, big_k(r), lw=1.5)
        ax.axhline(math.pi, ls="--", lw=0.8, color="gray")
        ax.axhline(4.0, ls="--", lw=0.8, color="gray")
        ax.set_xlabel("r")
        ax.set_ylabel("first-harmonic average")
        ax.set_xlim(1.0, args.r_max)
        ax.set_title("saturation radial integral")
    else:
        if not args.input:
            print("error: orbit plots need a trajectory CSV input", file=sys.stderr)
            return 1
        try:
            from .flow import load_trajectory_csv

            _, x = load_trajectory_csv(args.input)
        except (OSError, ValueError) as exc:
            print(f"error: cannot read {args.input}: {exc}", file=sys.stderr)
            return 1
        if x.size == 0:
            print(f"error: {args.input} holds no samples", file=sys.stderr)
            return 1
        panels = 2 if x.shape[1] >= 4 else 1
        fig, axes = plt.subplots(1, panels, figsize=(5.0 * panels, 4.5))
        axes = np.atleast_1d(axes)
        axes[0].plot(x[:, 0], x[:, 1], lw=0.8)
        axes[0].set_xlabel("x1")
        axes[0].set_ylabel("x2")
        axes[0].set_aspect("equal", adjustable="datalim")
        if panels == 2:
            axes[1].plot(x[:, 2], x[:, 3], lw=0.8)
            axes[1].set_xlabel("x3")
            axes[1].set_ylabel("x4")
            axes[1].set_aspect("equal", adjustable="datalim")
        fig.suptitle("trajectory projections")

    fig.tight_layout()
    try:
        fig.savefig(args.out, format="svg", metadata={"Date": None})
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return 1
    finally:
        plt.close(fig)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pwlcycles",
        description=(
            "Averaged-function analysis and limit-cycle verification for "
            "piecewise-linear control systems"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_an = sub.add_parser("analyze", help="run the zero-finding and verification pipeline")
    p_an.add_argument("spec", help="system spec file (JSON)")
    p_an.add_argument("--out", help="write the report here instead of stdout")
    p_an.add_argument(
        "--epsilons",
        help="comma-separated list overriding the spec's epsilons",
    )
    p_an.add_argument(
        "--region",
        choices=("outer", "inner"),
        default="outer",
        help="restrict the radial search (inner = r <= 1)",
    )
    p_an.add_argument(
        "--trajectory-out",
        help="write a CSV trajectory of the smallest-epsilon converged cycle",
    )
    p_an.set_defaults(func=cmd_analyze)

    p_or = sub.add_parser("oracle-check", help="closed forms vs the quadrature oracle")
    p_or.add_argument("--grid", default=DEFAULT_GRID, help="JMAX:r1,r2,... evaluation grid")
    p_or.add_argument("--tol", type=float, default=1e-8, help="max allowed |closed - oracle|")
    p_or.add_argument("--out", help="write fixture rows here instead of stdout")
    p_or.set_defaults(func=cmd_oracle_check)

    p_pl = sub.add_parser("plot", help="emit an SVG plot")
    p_pl.add_argument("input", nargs="?", help="trajectory CSV (orbit plots)")
    p_pl.add_argument(
        "--kind", choices=("k-curve", "orbit"), required=True, help="plot type"
    )
    p_pl.add_argument("--out", required=True, help="output SVG path")
    p_pl.add_argument(
        "--r-max", type=float, default=10.0, help="right end of the k-curve domain"
    )
    p_pl.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
