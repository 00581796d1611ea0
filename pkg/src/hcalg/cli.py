"""Command-line front end: ``hcalg <command> [options]``.

Every command prints one JSON document (sorted keys, ``schema_version`` and
``seed`` included) and exits with 0 on pass, 1 on failure, 2 when the result
is inconclusive at the available horizon or budget, 64 on usage errors and
74 when a job or report file cannot be read or written.
Job files are JSON objects with the keys ``space``, ``weight``, ``product``,
``seed``, ``horizon`` and a command-specific ``task`` object.

``HCALG_OUTPUT_DIR`` is the only environment setting: relative ``--out``
paths resolve against it, and without ``--out`` a report named after the
command is also written there.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Mapping, Sequence

from . import SCHEMA_VERSION
from .acceptance import CRITERIA, run_suite
from .algebra import Poly
from .convolution import (
    PhiSpec,
    SearchGrid,
    build_convolution_witness,
    revalidate,
    search_condition_e,
    wellbehaved_search,
)
from .densitysets import DensityFamily, build_family, compute_Mk, gap_violations
from .errors import BudgetExhausted, HcalgError, HorizonError, InconclusiveError, SpecError
from .seq import TruncatedSeq
from .shifts import WeightSeq
from .spaces import SpaceSpec
from .verify import (
    Ball,
    CriterionInstance,
    check_instance,
    dumps,
    emit_report,
    instance_from_witness,
    oracle_compare,
    orbit_hit_density,
    report_from_witness,
)
from .witnesses import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    Target,
    build_c0_fhc,
    build_omega_fhc,
    build_omega_hc_mixed,
    build_ufhc_cauchy,
    dense_targets,
    search_cauchy_witness,
    search_coordwise_witness,
    search_ufhc_coordwise,
    ufhc_q,
)

EX_USAGE = 64
EX_IOERR = 74
EXIT = {PASS: 0, FAIL: 1, INCONCLUSIVE: 2}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# job parsing ----------------------------------------------------------------------------


def load_job(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise UsageError(f"{path}: a job file holds a JSON object")
    return data


def _task(job: Mapping, defaults: Mapping) -> dict:
    """Defaults overlaid with the job's task; unknown keys are rejected."""
    task = dict(job.get("task", {}))
    unknown = set(task) - set(defaults)
    if unknown:
        raise UsageError(f"unknown task keys: {sorted(unknown)}")
    out = dict(defaults)
    out.update(task)
    return out


def _seq(v, horizon: int, bilateral: bool = False) -> TruncatedSeq:
    """A sequence from stored JSON, a value list (from index 0) or an index -> value map."""
    if isinstance(v, Mapping) and ("coeffs" in v or "values" in v):
        data = dict(v)
        data.setdefault("horizon", horizon)
        data.setdefault("bilateral", bilateral)
        return TruncatedSeq.from_json(data)
    return TruncatedSeq.from_json({"horizon": horizon, "bilateral": bilateral, "values": v})


def _space(job: Mapping, default: Mapping) -> SpaceSpec:
    return SpaceSpec.from_json(job.get("space", default))


def _weight(job: Mapping, default: Mapping, horizon: int | None = None) -> WeightSeq:
    return WeightSeq.from_json(job.get("weight", default), horizon)


def _A(raw) -> list[tuple[int, ...]]:
    return [tuple(a) if isinstance(a, (list, tuple)) else (int(a),) for a in raw]


def _family(spec: Mapping) -> DensityFamily:
    if "sets" in spec:
        return DensityFamily.from_json(spec)
    return build_family(int(spec.get("count", 3)), int(spec.get("horizon", 100_000)), a=spec.get("a", [1, 2, 3]))


def _resolved(job: Mapping, task: Mapping, seed: int, **extra) -> dict:
    out = {"task": task, "seed": seed}
    for key in ("space", "weight", "product", "horizon"):
        if key in job:
            out[key] = job[key]
    out.update(extra)
    return out


# commands -------------------------------------------------------------------------------


def cmd_sets(args, job: Mapping) -> tuple[dict, str]:
    if args.action == "build":
        a = args.a if args.a is not None else job.get("a")
        kappa = args.kappa if args.kappa is not None else job.get("kappa_C", [1, 10, 100])
        count = args.count if args.count is not None else int(job.get("count", 3))
        horizon = args.horizon if args.horizon is not None else int(job.get("horizon", 100_000))
        burn_in = int(job.get("burn_in", 1000))
        fam = build_family(count, horizon, a=a, kappa_C=kappa, burn_in=burn_in)
        out = fam.to_json()
        out["config"] = {"count": count, "horizon": horizon, "a": a, "kappa_C": list(kappa), "burn_in": burn_in}
        return out, PASS
    if args.input is None and "sets" not in job:
        raise UsageError("sets check needs --input FILE or a job holding the family")
    fam = DensityFamily.from_json(load_job(args.input) if args.input else job)
    a = args.a if args.a is not None else fam.a
    viol = gap_violations(fam.sets, a) if a is not None else []
    dens = fam.lower_densities()
    min_density = float(job.get("min_density", 1e-3))
    ok = not viol and fam.disjoint() and all(d >= min_density for d in dens)
    out = {"disjoint": fam.disjoint(), "violations": viol, "lower_densities": dens, "a": a,
           "min_density": min_density, "kappa": {str(C): fam.kappa(C) for C in (args.kappa or [])},
           "horizon": fam.horizon}
    return out, PASS if ok else FAIL


def _finish_witness(wit, w: WeightSeq, seed: int, with_oracle: bool, instance=None, densities=None) -> dict:
    oracle = oracle_compare(wit, w) if with_oracle and wit.predicted else None
    rep = report_from_witness(wit, seed=seed, oracle=oracle, densities=densities, instance=instance)
    return rep.to_json()


def cmd_witness(args, job: Mapping, seed: int) -> tuple[dict, str]:
    kind = args.kind
    H = int(job.get("horizon", 1000))
    lp1 = {"kind": "lp", "p": 1}
    role = {"kind": "rolewicz", "lam": 2.0}
    if kind in ("coordwise", "cauchy"):
        defaults = {"A": [[1], [2]], "x": [[]], "y": [0, 1], "delta": 0.1, "oracle": True, "V_radius": 1e-3,
                    "W_radius": 1e-3}
        if kind == "coordwise":
            defaults.update(w_radius=1e-6, n_max=None)
        else:
            defaults.update(r=1.0, residual_tol=1e-3, samples=3)
        t = _task(job, defaults)
        sp = _space(job, lp1)
        w = _weight(job, role, H)
        A = _A(t["A"])
        x = [_seq(v, H, sp.bilateral) for v in t["x"]]
        if len(x) == 1 and len(A[0]) > 1 and not t["x"][0]:
            x = x * len(A[0])
        y = _seq(t["y"], H, sp.bilateral)
        if kind == "coordwise":
            wit = search_coordwise_witness(A, x, y, w, sp, seed=seed, delta=t["delta"], w_radius=t["w_radius"],
                                           n_max=t["n_max"])
        else:
            wit = search_cauchy_witness(A, x, y, w, sp, r=t["r"], delta=t["delta"], residual_tol=t["residual_tol"],
                                        samples=t["samples"])
        inst = check_instance(instance_from_witness(wit, w, sp, t["V_radius"], t["W_radius"]))
        out = _finish_witness(wit, w, seed, t["oracle"], instance=inst)
    elif kind == "ufhc-coord":
        t = _task(job, {"m0": 1, "m1": 3, "v": [1], "x": [], "eps": 0.1, "window": 10_000, "n1_max": 10_000,
                        "density": True, "oracle": True})
        sp = _space(job, lp1)
        w = _weight(job, role, max(H, int(t["window"] * 1.25)))
        v, x = _seq(t["v"], H), _seq(t["x"], H)
        wit = search_ufhc_coordwise(t["m0"], t["m1"], v, x, w, sp, t["eps"], t["window"], t["n1_max"])
        dens = None
        if t["density"]:
            u = wit.u[0]
            N, N1 = wit.N, wit.params["N1"]
            d = orbit_hit_density(w, u, Poly({t["m0"]: 1.0}), [Ball(v.with_horizon(u.horizon), 2 * t["eps"], 1, "B(v,2eps)")],
                                  t["window"], sp, tail_fn=wit.tail_fn, burn_in=N * N1, label=t["m0"])
            r = d["targets"]["B(v,2eps)"]
            lower = r["lower"][0]
            dens = {"B(v,2eps)": {"count": r["count"], "lower": r["lower"], "upper": r["upper"], "burn_in": N * N1,
                                  "bound": 1 / (2 * N), "status": PASS if lower >= 1 / (2 * N) else FAIL}}
        out = _finish_witness(wit, w, seed, t["oracle"], densities=dens)
    elif kind == "ufhc-cauchy":
        t = _task(job, {"m": 2, "y": [1], "x": [], "c": 0.5, "d": 0.625, "q": None, "sigma": 1000, "eta": 0.05,
                        "ratio_tol": 0.1, "oracle": True})
        sp = _space(job, lp1)
        y = _seq(t["y"], H)
        q = t["q"]
        if q is None:
            q = ufhc_q(y, _weight(job, role, max(2 * H, 1000)), sp, t["eta"]).N
        need = t["m"] * q * t["sigma"]
        w = _weight(job, role, need)
        wit = build_ufhc_cauchy(t["m"], y, _seq(t["x"], H), w, sp, t["c"], t["d"], q, t["sigma"], t["eta"], t["ratio_tol"])
        t = dict(t, q=q)
        out = _finish_witness(wit, w, seed, t["oracle"])
    elif kind == "omega":
        t = _task(job, {"mode": "fhc", "count": 3, "family": {"count": 3, "horizon": 100_000, "a": [1, 2, 3]},
                        "P": None, "tol": 1e-3, "u": [1], "v": [0, 1], "oracle": True})
        P = Poly.from_json(t["P"]) if t["P"] else None
        if t["mode"] == "fhc":
            w = _weight(job, role, H)
            fam = _family(t["family"])
            wit = build_omega_fhc(dense_targets(t["count"], seed=seed), fam, w, H, P, t["tol"])
        elif t["mode"] == "mixed":
            w = _weight(job, role, H)
            wit = build_omega_hc_mixed(_seq(t["u"], H), _seq(t["v"], H), w, H, seed=seed, P=P, tol=t["tol"])
        else:
            raise UsageError("omega task mode is 'fhc' or 'mixed'")
        out = _finish_witness(wit, w, seed, t["oracle"])
    elif kind == "c0-fhc":
        t = _task(job, {"count": 3, "family": {"count": 3, "horizon": 100_000, "a": [1, 2, 3]}, "targets": None,
                        "oracle": True})
        fam = _family(t["family"])
        if "weight" in job:
            w = _weight(job, {}, None)
        else:
            w = WeightSeq.mk_weight(compute_Mk(fam, t["count"] + 4))
        if t["targets"]:
            targets = [Target(tuple(complex(*v) if isinstance(v, list) else complex(v) for v in tg["v"]), int(tg["m"]))
                       for tg in t["targets"]]
        else:
            targets = dense_targets(t["count"], seed=seed)
        wit = build_c0_fhc(targets, fam, w, t["count"])
        out = _finish_witness(wit, w, seed, t["oracle"])
    else:  # pragma: no cover - argparse restricts the choices
        raise UsageError(f"unknown witness kind {kind}")
    out["config"] = _resolved(job, t, seed)
    return out, out["status"]


def _phi(job_task: Mapping) -> PhiSpec:
    raw = job_task["phi"]
    return PhiSpec.from_json(raw if isinstance(raw, Mapping) else {"closed_form": raw})


def cmd_conv(args, job: Mapping, seed: int) -> tuple[dict, str]:
    example = {"closed_form": "half_exp_plus_exp_i_minus_quarter"}
    if args.action == "search-e":
        t = _task(job, {"phi": example, "I": [1, 2, 3], "grid": {}})
        grid = SearchGrid.from_json(t["grid"])
        try:
            cert = search_condition_e(_phi(t), t["I"], grid)
        except BudgetExhausted as exc:
            return {"reason": str(exc), "grid": grid.to_json(), "config": _resolved(job, t, seed)}, INCONCLUSIVE
        val = revalidate(cert)
        out = {"certificate": cert.to_json(), "revalidation": val, "grid": grid.to_json()}
        status = PASS if cert.holds() and val["pass"] else FAIL
    elif args.action == "wellbehaved":
        t = _task(job, {"phi": {"closed_form": "poly_times_exp", "poly": [2, 1]}, "v": -1, "I": [1, 2, 3],
                        "eps": 0.4, "a_steps": 401, "margin": 1e-9, "t_max": None})
        v = complex(*t["v"]) if isinstance(t["v"], list) else complex(t["v"])
        cert = wellbehaved_search(_phi(t), v, t["I"], t["eps"], t["a_steps"], t["margin"], t["t_max"])
        val = revalidate(cert)
        out = {"certificate": cert.to_json(), "revalidation": val}
        status = PASS if cert.holds() and val["pass"] else FAIL
    else:
        t = _task(job, {"phi": example, "I": [1, 2, 3], "m": None, "a": None, "b": None, "grid": {}, "N": 10,
                        "L": 60, "q": 1.0, "tol": 1e-6, "samples": 64})
        phi = _phi(t)
        if t["m"] is None or t["a"] is None or t["b"] is None:
            cert = search_condition_e(phi, t["I"], SearchGrid.from_json(t["grid"]))
            m, a, b = cert.m, cert.a, cert.b
        else:
            m = int(t["m"])
            a, b = (complex(*z) if isinstance(z, list) else complex(z) for z in (t["a"], t["b"]))
        wit = build_convolution_witness(phi, t["I"], m, a, b, N=t["N"], L=t["L"], q=t["q"], tol=t["tol"],
                                        seed=seed, samples=t["samples"])
        out = wit.to_json()
        status = wit.status
    out["config"] = _resolved(job, t, seed)
    return out, status


def cmd_check(args, job: Mapping, seed: int) -> tuple[dict, str]:
    """Verify one or more criterion instances given explicitly in the job file."""
    raw = job.get("instances", [job.get("task", {})])
    H = int(job.get("horizon", 1000))
    sp = _space(job, {"kind": "lp", "p": 1})
    w = _weight(job, {"kind": "rolewicz", "lam": 2.0}, H)
    instances = []
    for t in raw:
        for key in ("A", "beta", "u", "N", "V"):
            if key not in t:
                raise UsageError(f"instance is missing {key!r}")
        V = t["V"]
        instances.append(CriterionInstance(
            _A(t["A"]), tuple(t["beta"]) if isinstance(t["beta"], list) else (int(t["beta"]),),
            [_seq(v, H, sp.bilateral) for v in t["u"]], int(t["N"]),
            (_seq(V["center"], H, sp.bilateral), float(V["radius"]), float(V.get("q", 1))),
            float(t.get("W", 1e-3)), job.get("product", "coordinatewise"), sp, w, t.get("direction", "backward"),
            {tuple(k) if isinstance(k, list) else (int(k),): float(v) for k, v in t.get("tails", [])}))
    reports = _map(check_instance, instances, args.jobs)
    statuses = [r.status for r in reports]
    status = FAIL if FAIL in statuses else INCONCLUSIVE if INCONCLUSIVE in statuses else PASS
    return {"status": status, "reports": [r.to_json() for r in reports],
            "config": _resolved(job, {"instances": len(instances)}, seed)}, status


def cmd_orbit(args, job: Mapping, seed: int) -> tuple[dict, str]:
    t = _task(job, {"x": [1], "P": {"terms": [{"alpha": [1], "re": 1.0}]}, "targets": [], "horizon_N": 100,
                    "stride": 1, "burn_in": 1, "min_lower_density": None})
    H = int(job.get("horizon", 1000))
    sp = _space(job, {"kind": "lp", "p": 1})
    w = _weight(job, {"kind": "rolewicz", "lam": 2.0}, H)
    targets = [Ball(_seq(b["center"], H, sp.bilateral), float(b["radius"]), float(b.get("q", 1)), b.get("name", str(i)))
               for i, b in enumerate(t["targets"])]
    if not targets:
        raise UsageError("orbit needs at least one target ball")
    res = orbit_hit_density(w, _seq(t["x"], H, sp.bilateral), Poly.from_json(t["P"]), targets, int(t["horizon_N"]), sp,
                            stride=int(t["stride"]), product=job.get("product", "coordinatewise"),
                            burn_in=int(t["burn_in"]))
    rows = res.pop("rows")
    status = PASS
    if t["min_lower_density"] is not None:
        ok = all(r["lower"][0] >= float(t["min_lower_density"]) for r in res["targets"].values())
        status = PASS if ok else FAIL
    res["config"] = _resolved(job, t, seed)
    res["status"] = status
    return res, status, rows


def cmd_suite(args, job: Mapping, seed: int) -> tuple[dict, str]:
    results = run_suite(quick=args.quick, seed=seed, jobs=args.jobs, only=args.only)
    for r in results:
        print(r.line(), file=sys.stderr)
    status = PASS if all(r.passed for r in results) else FAIL
    return {"status": status, "quick": args.quick, "criteria": [r.to_json() for r in results]}, status


def _map(fn, items: Sequence, jobs: int | None):
    jobs = jobs or os.cpu_count() or 1
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# entry points ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--job", help="JSON job file")
    common.add_argument("--seed", type=int, default=None, help="random seed (default: job seed or 0)")
    common.add_argument("--out", help="write the JSON report here as well as to stdout")
    common.add_argument("--jobs", type=int, default=None, help="worker processes (default: available CPUs)")

    p = _Parser(prog="hcalg", description="Build and verify hypercyclic-algebra witnesses.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sets", parents=[common], help="density-set families")
    s.add_argument("action", choices=["build", "check"])
    s.add_argument("--count", type=int)
    s.add_argument("--horizon", type=int)
    s.add_argument("--a", type=int, nargs="+", help="gap parameters a(1..count)")
    s.add_argument("--kappa", type=int, nargs="+", help="constants C whose kappa(C) is recorded")
    s.add_argument("--input", help="family JSON to check")

    s = sub.add_parser("witness", parents=[common], help="build a witness and verify it")
    s.add_argument("kind", choices=["coordwise", "cauchy", "ufhc-coord", "ufhc-cauchy", "omega", "c0-fhc"])

    s = sub.add_parser("conv", parents=[common], help="convolution operators")
    s.add_argument("action", choices=["search-e", "wellbehaved", "witness"])

    sub.add_parser("check", parents=[common], help="verify explicit criterion instances")

    s = sub.add_parser("orbit", parents=[common], help="hitting-time densities of an orbit")
    s.add_argument("--csv", action="store_true", help="also write (p, hit) rows next to --out")

    s = sub.add_parser("suite", parents=[common], help="run the acceptance battery")
    s.add_argument("--quick", action="store_true", help="stated sizes and runtime limits only")
    s.add_argument("--only", type=int, nargs="+", choices=sorted(set(CRITERIA) | {13}))
    return p


def _output_path(args) -> Path | None:
    base = os.environ.get("HCALG_OUTPUT_DIR")
    if args.out:
        path = Path(args.out)
        return Path(base) / path if base and not path.is_absolute() else path
    if base:
        parts = [args.command] + [getattr(args, k) for k in ("action", "kind") if getattr(args, k, None)]
        return Path(base) / ("-".join(parts) + ".json")
    return None


def run(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.jobs is not None and args.jobs < 1:
            raise UsageError("--jobs must be positive")
        job = load_job(args.job)
        seed = args.seed if args.seed is not None else int(job.get("seed", 0))
        rows = None
        try:
            if args.command == "sets":
                out, status = cmd_sets(args, job)
            elif args.command == "witness":
                out, status = cmd_witness(args, job, seed)
            elif args.command == "conv":
                out, status = cmd_conv(args, job, seed)
            elif args.command == "check":
                out, status = cmd_check(args, job, seed)
            elif args.command == "orbit":
                out, status, rows = cmd_orbit(args, job, seed)
            else:
                out, status = cmd_suite(args, job, seed)
        except (HorizonError, BudgetExhausted, InconclusiveError) as exc:
            out, status = {"reason": f"{type(exc).__name__}: {exc}"}, INCONCLUSIVE
        except (SpecError, KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"malformed job: {exc}") from exc
    except UsageError as exc:
        print(f"hcalg: {exc}", file=sys.stderr)
        return EX_USAGE
    except OSError as exc:
        print(f"hcalg: {exc}", file=sys.stderr)
        return EX_IOERR
    except HcalgError as exc:
        print(f"hcalg: {exc}", file=sys.stderr)
        return EXIT[FAIL]

    out["schema_version"] = SCHEMA_VERSION
    out["seed"] = seed
    out["status"] = status
    text = dumps(out)
    sys.stdout.write(text)
    path = _output_path(args)
    if path is not None:
        want_csv = rows is not None and getattr(args, "csv", False)
        try:
            emit_report(out, path, rows if want_csv else None, ["p", *out.get("targets", {})])
        except OSError as exc:
            print(f"hcalg: {exc}", file=sys.stderr)
            return EX_IOERR
    return EXIT[status]


def main() -> None:
    sys.exit(run())


__all__ = ["run", "main", "build_parser", "load_job"]
