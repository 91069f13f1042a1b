"""Command-line runner for the verification suites.

Each suite turns a JSON config into a report of check records. Reports are
deterministic for a fixed config and seed; the only run-dependent field is
the timestamp kept in the report header.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from . import dilation, ergodic, lamperti, opalg
from .harmonic import (
    FiniteMetricSpace,
    OperatorField,
    annular_decay_fit,
    boundary_layer_ratio,
    build_dyadic_system,
    cuculescu,
    cz_decompose,
    doubling_constant,
    estimate_sqfn_constants,
    hl_operator_norms,
    space_from_json,
    verify_dyadic_system,
    zeta_projection,
)
from .harmonic.dyadic import DyadicConstructionError, DyadicError
from .harmonic.spaces import SpaceError

__all__ = ["main", "run", "list_suites", "Report", "ConfigError", "SUITES"]

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_RESOURCE = 0, 1, 2, 3


class ConfigError(ValueError):
    """Unreadable or inconsistent scenario configuration."""


@dataclass
class Report:
    suite: str
    seed: int
    digest: str
    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)

    def add(self, name: str, anchor: str, ok: bool, value: float, tolerance: float):
        self.records.append({"name": name, "anchor": anchor, "status": "PASS" if ok else "FAIL",
                             "value": _num(value), "tolerance": _num(tolerance)})

    @property
    def passed(self) -> bool:
        return all(r["status"] == "PASS" for r in self.records)

    def body(self) -> dict:
        n_fail = sum(r["status"] == "FAIL" for r in self.records)
        summary = {"status": "PASS" if n_fail == 0 else "FAIL",
                   "passed": len(self.records) - n_fail, "failed": n_fail, **self.summary}
        return {"suite": self.suite, "version": __version__, "input_digest": self.digest,
                "seed": self.seed, "records": self.records, "summary": summary}

    def to_json(self, timestamp: str | None = None) -> str:
        ts = timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds")
        return json.dumps({"header": {"timestamp": ts}, **self.body()}, indent=2, sort_keys=False)

    def to_csv(self) -> str:
        return _csv(self.records, ["name", "anchor", "status", "value", "tolerance"])


def _num(x):
    x = float(x)
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _digest(config: dict, seed: int) -> str:
    blob = json.dumps({"config": config, "seed": seed}, sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(blob.encode()).hexdigest()


# -------------------------------------------------------------------- suites


def _default_dilate():
    P = [[0, 0, 1], [1, 0, 0], [0, 1, 0]]
    P2 = [[0, 1, 0], [0, 0, 1], [1, 0, 0]]
    I3 = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    return {"families": [{"lambdas": ["1/2", "1/2"], "ops": [I3, P]},
                         {"lambdas": ["1/3", "2/3"], "ops": [P, P2]}],
            "N": 2, "p": 3, "n_samples": 4}


def suite_dilate(cfg: dict, seed: int, rep: Report):
    cfg = {**cfg, "seed": seed}
    try:
        sc = dilation.scenario_from_json(cfg)
    except opalg.DomainError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        system = dilation.build_dilation(sc["families"], sc["N"], sc["p"], seed=seed)
    except dilation.DilationError as exc:
        raise ConfigError(str(exc)) from exc
    out = dilation.verify_joint_dilation(system, sc["samples"], seed=seed)
    anchor = "compression of commuting isometric dilation reproduces operator products"
    for r in out.records:
        name = "dilate/j=" + ",".join(map(str, r["multi_index"]))
        bound = 1e-9 * (1 + max(system.x_norm(x) for x in sc["samples"]))
        rep.add(name, anchor, r["passed"], r["residual"], bound)
    iso = "embedding and shifts are isometries, compression is contractive"
    rep.add("dilate/isometry-J", iso, out.isometry["J"] <= 1e-10, out.isometry["J"], 1e-10)
    rep.add("dilate/isometry-U", iso, out.isometry["U"] <= 1e-10, out.isometry["U"], 1e-10)
    rep.add("dilate/contraction-Q", iso, out.isometry["Q"] <= 1e-10, out.isometry["Q"], 1e-10)
    rep.add("dilate/commutation-U", "dilated shifts commute", out.commutation_residual <= 1e-12,
            out.commutation_residual, 1e-12)
    rep.summary["dimensions"] = {"blocks": out.dimensions.blocks, "total": out.dimensions.total}


def _default_lamperti():
    return {"random": {"count": 20, "dim": 4}, "p": [1, 1.5, 2, 3, 4], "samples": 4}


def _lamperti_instances(cfg, rng):
    ops = []
    for i, lit in enumerate(cfg.get("operators", [])):
        try:
            ops.append((f"op{i}", lamperti.lamperti_from_json(lit)))
        except (opalg.DomainError, lamperti.LampertiError, opalg.DimensionError) as exc:
            raise ConfigError(f"operator {i}: {exc}") from exc
    rnd = cfg.get("random")
    if rnd:
        d = int(rnd.get("dim", 4))
        for i in range(int(rnd.get("count", 20))):
            b = rng.uniform(0.1, 3.0, d) * (rng.random(d) > 0.15)
            pi = rng.permutation(d)
            ph = np.exp(2j * np.pi * rng.random(d))
            nu = rng.uniform(0.5, 2.0, d) if rnd.get("weighted", True) else None
            ctx = opalg.TraceContext(d, nu) if nu is not None else None
            ops.append((f"rand{i}", lamperti.weighted_permutation(b, pi, ph, ctx)))
    if not ops:
        raise ConfigError("lamperti config needs 'operators' or 'random'")
    return ops


def suite_lamperti(cfg: dict, seed: int, rep: Report):
    rng = np.random.default_rng(seed)
    ps = [float(p) for p in cfg.get("p", [1, 1.5, 2, 3, 4])]
    ops = _lamperti_instances(cfg, rng)
    for name, T in ops:
        M = lamperti.lamperti_modulus(T)
        for p in ps:
            oracle = lamperti.weighted_permutation_norm(T, p) if T.J.kind == "point-permutation" else None
            a = lamperti.operator_pnorm(T, p, seed=seed)
            b = lamperti.operator_pnorm(M, p, seed=seed)
            res = abs(a - b)
            if oracle is not None:
                res = max(res, abs(a - oracle), abs(b - oracle))
            rep.add(f"lamperti/{name}/p={p:g}/norm", "operator and modulus share their p-norm",
                    res <= 1e-6 * max(1.0, abs(a)), res, 1e-6 * max(1.0, abs(a)))
        worst = 0.0
        for _ in range(int(cfg.get("samples", 4))):
            d = T.dim
            if T.algebra == "diagonal":
                x = np.diag(rng.standard_normal(d) + 1j * rng.standard_normal(d))
            else:
                x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            ax = opalg.modulus(x)
            lhs = opalg.modulus(T(x))
            worst = max(worst, float(np.abs(lhs - opalg.modulus(M(x))).max()),
                        float(np.abs(lhs - M(ax)).max()))
        rep.add(f"lamperti/{name}/modulus", "modulus of the image equals the modulus operator "
                "applied to the modulus", worst <= 1e-9, worst, 1e-9)


def _default_sweep():
    return {"model": "unitary", "p": [2], "dims": [2, 4], "n_max": [4, 6, 8, 10],
            "trials": 100, "growth_tol": 0.05}


def suite_ergodic_sweep(cfg: dict, seed: int, rep: Report):
    cfg = {**cfg, "seed": seed}
    tol = float(cfg.get("growth_tol", 0.05))
    try:
        rows, summary = ergodic.sweep(cfg)
    except opalg.DomainError as exc:
        raise ConfigError(str(exc)) from exc
    rep.tables["sweep"] = rows
    keys = sorted(summary)
    trend = [{"p": p, "dim": d, "n_max": n, "max_ratio": summary[(p, d, n)]} for p, d, n in keys]
    rep.tables["trend"] = trend
    for p, d in sorted({(p, d) for p, d, _ in keys}):
        vals = [summary[k] for k in keys if k[:2] == (p, d)]
        growth = max((b / a - 1 for a, b in zip(vals, vals[1:])), default=0.0)
        rep.add(f"ergodic-sweep/p={p:g}/dim={d}/growth",
                "square functions of ergodic averages stay uniformly bounded",
                growth <= tol, growth, tol)
    rep.summary["constants"] = {f"p={p:g},dim={d},n_max={n}": v for (p, d, n), v in
                                sorted(summary.items())}


def _space(cfg) -> FiniteMetricSpace:
    try:
        return space_from_json(cfg["space"])
    except KeyError:
        raise ConfigError("config needs a 'space'") from None
    except SpaceError as exc:
        raise ConfigError(str(exc)) from exc


def _system(space, cfg, seed):
    dy = cfg.get("dyadic", {})
    try:
        return build_dyadic_system(space, float(dy.get("delta", 20)), float(dy.get("c0", 1)),
                                   float(dy.get("C0", 1.1)), seed, r0=dy.get("r0"))
    except DyadicError as exc:
        raise ConfigError(str(exc)) from exc


def _default_cz():
    return {"space": {"points": 2, "dist": [[0, 1], [1, 0]]}, "field": {"values": [0.5, 1.5]},
            "lambda": 1.0}


def _field(space, cfg, rng) -> OperatorField:
    spec = cfg.get("field")
    if spec is None:
        raise ConfigError("config needs a 'field'")
    if "values" in spec:
        vals = np.asarray(spec["values"], dtype=complex)
        if "imag" in spec:
            vals = vals + 1j * np.asarray(spec["imag"], dtype=float)
        try:
            return OperatorField(space, vals)
        except (opalg.DimensionError, opalg.DomainError) as exc:
            raise ConfigError(str(exc)) from exc
    return OperatorField.random(space, int(spec.get("dim", 2)), rng, positive=True,
                                spiky=bool(spec.get("spiky", False)))


def suite_cz(cfg: dict, seed: int, rep: Report):
    rng = np.random.default_rng(seed)
    space = _space(cfg)
    system = _system(space, cfg, seed)
    f = _field(space, cfg, rng)
    if "lambda" not in cfg:
        raise ConfigError("config needs 'lambda'")
    lam = float(cfg["lambda"])
    try:
        cz = cz_decompose(f, system, lam)
    except opalg.DomainError as exc:
        raise ConfigError(str(exc)) from exc
    anchor = "Calderon-Zygmund decomposition bounds and cancellations"
    for c in cz.checks:
        rep.add("cz/" + c.name, anchor, c.ok, c.value, c.bound)
    include = set(cfg.get("include", []))
    if "cuculescu" in include:
        for c in cz.cuculescu.checks:
            rep.add("cuculescu/" + c.name, "Cuculescu projections", c.ok, c.value, c.bound)
    if "zeta" in include:
        z = zeta_projection(cz, system)
        for c in z.checks:
            rep.add("zeta/" + c.name, "support projection vanishing identities", c.ok, c.value, c.bound)
        rep.summary["zeta"] = {"phi_one_minus_zeta": z.phi_one_minus_zeta,
                               "stated_bound": z.stated_bound,
                               "stated_bound_holds": z.stated_bound_holds,
                               "literal_near_summed_residual": z.literal_near_summed}
    rep.summary["bad_cubes"] = cz.to_json()["bad_cubes"]


def _default_cubes():
    return {"space": {"kind": "z-interval", "n": 32}, "seeds": 5}


def suite_cubes(cfg: dict, seed: int, rep: Report):
    space = _space(cfg)
    anchor = "nested dyadic cubes: nets, partition, nesting, parent, ball sandwich"
    systems = []
    for s in range(int(cfg.get("seeds", 5))):
        try:
            system = _system(space, cfg, seed + s)
        except DyadicConstructionError as exc:
            rep.add(f"cubes/seed={seed + s}/build", anchor, False, 1.0, 0.0)
            rep.summary.setdefault("construction_errors", []).append(exc.witness)
            continue
        systems.append(system)
        for c in verify_dyadic_system(system):
            rep.add(f"cubes/seed={seed + s}/{c.name}", anchor, c.ok, 0.0 if c.ok else 1.0, 0.0)
        rep.summary.setdefault("attempts", []).append(system.attempts)
    cert = doubling_constant(space)
    grid = space.radius_grid()
    worst1 = worst_inf = 0.0
    for r in grid:
        n1, ninf = hl_operator_norms(space, r)
        worst1, worst_inf = max(worst1, n1), max(worst_inf, ninf)
    rep.add("cubes/hl-norm-1", "ball averages are bounded on L1 by the doubling constant",
            worst1 <= cert.D + 1e-12, worst1, cert.D)
    rep.add("cubes/hl-norm-inf", "ball averages are contractive on L-infinity",
            worst_inf <= 1 + 1e-12, worst_inf, 1.0)
    fit = annular_decay_fit(space, float(cfg.get("eps", 1.0)),
                            space.min_distance if space.n > 1 else 1.0)
    rep.summary["doubling"] = {"D": cert.D, "center": cert.center, "radius": cert.radius}
    rep.summary["annular"] = {"K": fit.K, "eps": float(cfg.get("eps", 1.0))}
    if systems:
        sys0 = systems[0]
        rows = []
        for k in sys0.levels:
            for L in (1, 2, 3):
                rows.append({"k": k, "L": L, "ratio": boundary_layer_ratio(sys0, k, L)})
        rep.tables["boundary"] = rows


def _default_constants():
    return {"spaces": [{"kind": "z-interval", "n": n} for n in (16, 32, 64)], "p": [2],
            "trials": 100, "dim": 2, "n_radii": 4, "stability_tol": 0.05}


def suite_constants(cfg: dict, seed: int, rep: Report):
    specs = cfg.get("spaces")
    if not specs:
        raise ConfigError("config needs a non-empty 'spaces' list")
    tol = float(cfg.get("stability_tol", 0.05))
    rows = []
    for p in [float(v) for v in cfg.get("p", [2])]:
        ests = []
        for spec in specs:
            space = _space({"space": spec})
            system = _system(space, cfg, seed)
            est = estimate_sqfn_constants(system, p, int(cfg.get("trials", 100)), seed,
                                          dim=int(cfg.get("dim", 2)),
                                          n_radii=int(cfg.get("n_radii", 4)),
                                          v=cfg.get("v"), weak=bool(cfg.get("weak", True)))
            ests.append(est)
            rows.append(est.to_json())
        for key in ("strong", "weak", "long"):
            vals = [getattr(e, key) for e in ests]
            change = max((abs(b / a - 1) for a, b in zip(vals, vals[1:]) if a > 0), default=0.0)
            rep.add(f"constants/p={p:g}/{key}/stability",
                    "square-function constants do not depend on the space size",
                    change <= tol, change, tol)
    rep.tables["constants"] = rows
    rep.summary["constants"] = rows


@dataclass(frozen=True)
class Suite:
    name: str
    description: str
    anchor: str
    run: Callable
    default: Callable


SUITES = {s.name: s for s in [
    Suite("dilate", "joint dilation of commuting convex combinations of isometries",
          "joint dilation identity", suite_dilate, _default_dilate),
    Suite("lamperti", "norms and moduli of Lamperti operators",
          "modulus of a Lamperti operator", suite_lamperti, _default_lamperti),
    Suite("ergodic-sweep", "uniform bounds for square functions of ergodic averages",
          "square-function sweep", suite_ergodic_sweep, _default_sweep),
    Suite("cz", "Cuculescu projections and the Calderon-Zygmund decomposition",
          "Calderon-Zygmund decomposition", suite_cz, _default_cz),
    Suite("cubes", "dyadic cube construction and ball-average norms",
          "dyadic cubes", suite_cubes, _default_cubes),
    Suite("constants", "empirical square-function constants across space sizes",
          "square-function constants", suite_constants, _default_constants),
]}


def list_suites(fmt: str = "text") -> str:
    rows = [{"name": s.name, "description": s.description, "anchor": s.anchor}
            for s in SUITES.values()]
    if fmt == "json":
        return json.dumps(rows, indent=2)
    width = max(len(s) for s in SUITES)
    return "\n".join(f"{r['name']:<{width}}  {r['description']}  [{r['anchor']}]" for r in rows)


def run(suite: str, config: dict | None = None, seed: int | None = None,
        only: str | None = None) -> Report:
    """Run a suite and return its report.

    Raises
    ------
    ConfigError
        For an unknown suite or unusable config.
    opalg.ResourceError
        When a size cap is exceeded.
    """
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; valid suites: {', '.join(SUITES)}")
    s = SUITES[suite]
    cfg = s.default() if config is None else config
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    seed = int(cfg.get("seed", 0)) if seed is None else int(seed)
    rep = Report(suite, seed, _digest(cfg, seed))
    try:
        s.run(cfg, seed, rep)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{type(exc).__name__}: {exc}") from exc
    if only is not None:
        rep.records = [r for r in rep.records if r["name"] == only]
        if not rep.records:
            raise ConfigError(f"no record named {only!r} in suite {suite!r}")
    return rep


def _load_config(path: str | None):
    if path is None:
        return None
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not text.strip():
        raise ConfigError(f"{path} is empty")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc


def _write_outputs(rep: Report, fmt: str, out: str | None, stdout):
    text = rep.to_json() if fmt == "json" else rep.to_csv()
    if out is None:
        stdout.write(text if text.endswith("\n") else text + "\n")
        return
    path = Path(out)
    path.write_text(text if text.endswith("\n") else text + "\n")
    for name, rows in rep.tables.items():
        if rows:
            cols = list(rows[0].keys())
            path.with_name(f"{path.stem}_{name}.csv").write_text(_csv(rows, cols))


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ncergodic", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, s in SUITES.items():
        sp = sub.add_parser(name, help=s.description)
        sp.add_argument("--config", help="JSON scenario file (defaults to a built-in scenario)")
        sp.add_argument("--seed", type=int, help="64-bit seed overriding the config")
        sp.add_argument("--out", help="report path; data tables go next to it as CSV")
        sp.add_argument("--only", help="keep only the record with this name")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
    lp = sub.add_parser("list", help="list suites")
    lp.add_argument("suite", nargs="?", help="show a single suite")
    lp.add_argument("--format", choices=("text", "json"), default="text")
    return ap


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = _parser().parse_args(argv)
    if args.command == "list":
        if args.suite is not None and args.suite not in SUITES:
            stderr.write(f"unknown suite {args.suite!r}; valid suites: {', '.join(SUITES)}\n")
            return EXIT_CONFIG
        text = list_suites(args.format)
        if args.suite is not None:
            lines = [ln for ln in text.splitlines() if ln.startswith(args.suite + " ")] \
                if args.format == "text" else [json.dumps(
                    [r for r in json.loads(text) if r["name"] == args.suite], indent=2)]
            text = "\n".join(lines)
        stdout.write(text + "\n")
        return EXIT_PASS
    try:
        cfg = _load_config(args.config)
        rep = run(args.command, cfg, args.seed, args.only)
    except ConfigError as exc:
        stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except opalg.ResourceError as exc:
        stderr.write(f"resource cap: {exc}\n")
        return EXIT_RESOURCE
    _write_outputs(rep, args.format, args.out, stdout)
    return EXIT_PASS if rep.passed else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
