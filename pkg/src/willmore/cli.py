"""Command line: ``willmore {analyze,transform,sequence,export} SURFACE [options]``.

Exit codes: 0 success, 2 invalid configuration, 3 numerical gate failure,
4 twistor termination (a Hopf field vanishes), 5 minimal termination
(constant transform), 6 I/O error.
"""

from __future__ import annotations

import argparse
import inspect
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import backlund as bl
from . import export, mcs
from . import sequence as sq
from .gallery import GENERATORS, SurfaceSpec
from .oracle import euclidean_energy_oracle
from .tolerances import Tolerances, nominal_resolution

log = logging.getLogger("willmore")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GATE = 3
EXIT_TWISTOR = 4
EXIT_MINIMAL = 5
EXIT_IO = 6

COMMANDS = ("analyze", "transform", "sequence", "export")
KINDS = ("one-step", "forward", "backward", "dual")
FORMATS = ("json", "csv", "obj")
CONFIG_KEYS = {"surface", "res", "kind", "max-steps", "threads", "out", "format", "tol-scale", "seed", "invert"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    surface: str
    res: int = 64
    kind: str = "forward"
    max_steps: int = 3
    threads: int = 1
    out: str = "."
    formats: tuple = ("json",)
    tol_scale: float = 1.0
    seed: int = 0
    invert: bool = False
    params: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"command: unknown {self.command!r}")
        if self.surface not in GENERATORS:
            raise ConfigError(f"surface: unknown {self.surface!r} (choose from {', '.join(sorted(GENERATORS))})")
        if not isinstance(self.res, int) or self.res < 8:
            raise ConfigError(f"res: must be an integer >= 8, got {self.res!r}")
        if self.kind not in KINDS:
            raise ConfigError(f"kind: must be one of {', '.join(KINDS)}, got {self.kind!r}")
        if self.max_steps < 0:
            raise ConfigError(f"max-steps: must be >= 0, got {self.max_steps}")
        if self.threads < 1:
            raise ConfigError(f"threads: must be >= 1, got {self.threads}")
        if not self.tol_scale > 0:
            raise ConfigError(f"tol-scale: must be positive, got {self.tol_scale}")
        bad = [f for f in self.formats if f not in FORMATS]
        if bad:
            raise ConfigError(f"format: unknown {', '.join(bad)} (choose from {', '.join(FORMATS)})")
        sig = inspect.signature(GENERATORS[self.surface])
        for key in self.params:
            if key not in sig.parameters or key == "res":
                raise ConfigError(f"param.{key}: not a parameter of {self.surface}")
        return self

    @property
    def spec(self) -> SurfaceSpec:
        return SurfaceSpec(self.surface, self.res, dict(self.params))


def read_config(path: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; ``param.NAME`` sets generator parameters."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in CONFIG_KEYS and not key.startswith("param."):
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _number(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="willmore", description="Willmore surfaces, Backlund transforms and Willmore sequences.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        c = sub.add_parser(name)
        c.add_argument("surface_pos", nargs="?", metavar="SURFACE", help=f"one of: {', '.join(sorted(GENERATORS))}")
        c.add_argument("--surface")
        c.add_argument("--res", type=str)
        c.add_argument("--kind", choices=KINDS if name == "transform" else None)
        c.add_argument("--max-steps", type=str)
        c.add_argument("--threads", type=str)
        c.add_argument("--out")
        c.add_argument("--format", help="comma separated subset of json,csv,obj")
        c.add_argument("--tol-scale", type=str)
        c.add_argument("--seed", type=str)
        c.add_argument("--invert", action="store_true", default=None, help="invert at a constant transform point")
        c.add_argument("--param", action="append", default=[], metavar="NAME=VALUE", help="generator parameter")
        c.add_argument("--config", help="key = value file mirroring the flags")
        c.add_argument("-v", "--verbose", action="store_true")
    return p


def _int(key, text):
    try:
        return int(text)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def _float(key, text):
    try:
        return float(text)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


def build_config(args: argparse.Namespace, environ=os.environ) -> RunConfig:
    """Merge defaults < config file < flags into a validated :class:`RunConfig`."""
    vals = {"out": environ.get("WILLMORE_OUT", ".")}
    params = {}
    if args.config:
        for k, v in read_config(args.config).items():
            if k.startswith("param."):
                params[k[6:]] = _number(v)
            else:
                vals[k] = v
    flag_map = {
        "surface": args.surface or args.surface_pos,
        "res": args.res,
        "kind": args.kind,
        "max-steps": args.max_steps,
        "threads": args.threads,
        "out": args.out,
        "format": args.format,
        "tol-scale": args.tol_scale,
        "seed": args.seed,
        "invert": args.invert,
    }
    for k, v in flag_map.items():
        if v is not None:
            vals[k] = v
    for item in args.param:
        if "=" not in item:
            raise ConfigError(f"param: expected NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        params[k.strip()] = _number(v.strip())
    if "surface" not in vals:
        raise ConfigError("surface: missing (positional SURFACE, --surface or config key)")
    invert = vals.get("invert", False)
    if isinstance(invert, str):
        invert = invert.lower() == "true"
    cfg = RunConfig(
        command=args.command,
        surface=vals["surface"],
        res=_int("res", vals.get("res", 64)),
        kind=vals.get("kind", "forward"),
        max_steps=_int("max-steps", vals.get("max-steps", 3)),
        threads=_int("threads", vals.get("threads", 1)),
        out=vals["out"],
        formats=tuple(f.strip() for f in str(vals.get("format", "json")).split(",") if f.strip()),
        tol_scale=_float("tol-scale", vals.get("tol-scale", 1.0)),
        seed=_int("seed", vals.get("seed", 0)),
        invert=bool(invert),
        params=params,
    )
    return cfg.validate()


# --------------------------------------------------------------------------
# commands


class Outcome:
    def __init__(self, code: int, results: dict, residuals: dict, surface=None, extra_text: dict | None = None):
        self.code = code
        self.results = results
        self.residuals = residuals
        self.surface = surface
        self.extra_text = extra_text or {}


def _analysis(s, threads: int) -> tuple[dict, dict]:
    tasks = {
        "conformality": lambda: mcs.conformality_residual(s),
        "structure": lambda: mcs.structure_residuals(s),
        "harmonicity": lambda: mcs.harmonicity_residual(s.chart, s.hopf, s),
        "normal_identity": lambda: mcs.normal_identity_check(s),
        "mean_curvature": lambda: mcs.mean_curvature_residuals(s),
        "oracle": lambda: euclidean_energy_oracle(s),
    }
    s.hopf  # build the shared caches once, before any worker touches them
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = {k: pool.submit(f) for k, f in tasks.items()}
            vals = {k: f.result() for k, f in futs.items()}
    else:
        vals = {k: f() for k, f in tasks.items()}
    oracle = vals.pop("oracle")
    results = {
        "W": mcs.willmore_energy(s.chart, s.hopf),
        "W_backward": mcs.backward_energy(s.chart, s.hopf),
        "W_oracle": oracle.W,
        "W_oracle_reversed": oracle.W_reversed,
        "A_norm": s.form_norm(s.A),
        "Q_norm": s.form_norm(s.Q),
        "H_max": s.norm(s.H),
        "curvature_scale": mcs.curvature_scale(s),
        "nominal_resolution": nominal_resolution(s.chart),
        "branch": {"fraction": float(s.branch_mask.mean()), "count": int(s.branch_mask.sum())},
    }
    if s.chart.closed:
        d = mcs.degree(s.chart, s.S, s.hopf)
        results["degree"] = {"value": d.deg, "rounded": d.rounded, "defect": d.defect}
    else:
        results["degree"] = {"chart_restricted": True}
    return results, vals


def cmd_analyze(cfg: RunConfig) -> Outcome:
    s = cfg.spec.build()
    results, residuals = _analysis(s, cfg.threads)
    tol = Tolerances(cfg.tol_scale)
    try:
        sq.willmore_gate(s, tol)
        results["willmore_gate"] = "pass"
    except sq.NonWillmoreError:
        results["willmore_gate"] = "fail"
    return Outcome(EXIT_OK, results, residuals, s)


def cmd_transform(cfg: RunConfig) -> Outcome:
    s = cfg.spec.build()
    tol = Tolerances(cfg.tol_scale)
    results: dict = {"kind": cfg.kind}
    residuals: dict = {}
    if cfg.kind == "dual":
        d = bl.dual_surface(s, seed=cfg.seed)
        residuals.update(bl.dual_residuals(s, d))
        return Outcome(EXIT_OK, results, residuals, d)
    sq.willmore_gate(s, tol)
    if cfg.kind == "one-step":
        r = bl.one_step(s)
        results.update({"closedness_defect": r.closedness_defect, "harmonicity": r.harmonicity, "periods": [list(p) for p in r.periods]})
        try:
            sharp = bl.sharp_sphere_data(r.surface)
            residuals.update(bl.sharp_residuals(r.surface, r, sharp))
        except bl.BetaSingularError as exc:
            results["sharp_data"] = str(exc)
        residuals["conformality_gsharp"] = mcs.conformality_residual(r.gsharp)
        return Outcome(EXIT_OK, results, residuals, r.gsharp)
    step = bl.backlund_forward if cfg.kind == "forward" else bl.backlund_backward
    try:
        res = step(s, seed=cfg.seed, tol=tol)
    except bl.HopfFieldVanishes as exc:
        results["termination"] = {"kind": "Twistor", "hopf_field": exc.which, "norm": exc.norm}
        return Outcome(EXIT_TWISTOR, results, residuals)
    if res.constant:
        v = res.lines.lines
        point = v[v.shape[0] // 2, v.shape[1] // 2]
        results["termination"] = {"kind": "Minimal", "diameter": res.diameter, "point": point.ravel().tolist()}
        results["distance_to_infinity"] = float(bl.qt.chordal_distance(point, bl._INF))
        if cfg.invert:
            inv = bl.moebius_apply(bl.inversion_at(point), s)
            results["inverted_H_max"] = inv.norm(inv.H)
            return Outcome(EXIT_MINIMAL, results, residuals, inv)
        return Outcome(EXIT_MINIMAL, results, residuals)
    t = res.surface
    which = cfg.kind
    residuals["hopf_identity"] = bl.hopf_identity_residual(s, t, which)
    residuals["sphere_relation"] = bl.sphere_relation_residual(s, t, res.lines.lines, which)
    residuals["involution"] = bl.involution_residual(s, t, which, tol=tol, seed=cfg.seed)
    h = mcs.harmonicity_residual(t.chart, t.hopf, t)
    residuals["harmonicity_transform"] = max(h["dstarA"], h["dstarQ"])
    results["W"] = mcs.willmore_energy(s.chart, s.hopf)
    results["W_transform"] = mcs.willmore_energy(t.chart, t.hopf)
    results["line_continuity"] = res.lines.continuity(s.chart)
    return Outcome(EXIT_OK, results, residuals, t)


def cmd_sequence(cfg: RunConfig) -> Outcome:
    s = cfg.spec.build()
    tol = Tolerances(cfg.tol_scale)
    ledger = sq.run_sequence(s, cfg.max_steps, tol, seed=cfg.seed, threads=cfg.threads)
    bound = sq.length_bound_check(ledger)
    results = ledger.to_dict()
    results["quantization_violation"] = sq.quantization_check(ledger)
    results["length_bound"] = {"lhs": bound.lhs, "satisfied": bound.satisfied, "n": bound.n, "note": bound.note}
    kind = ledger.classification.kind
    code = {sq.Kind.TWISTOR: EXIT_TWISTOR, sq.Kind.MINIMAL: EXIT_MINIMAL}.get(kind, EXIT_OK)
    residuals = {"theorem1": {str(e.index): e.flags.get("theorem1") for e in ledger.entries if "theorem1" in e.flags}}
    return Outcome(code, results, residuals, None, {"table.txt": ledger.table() + "\n"})


def cmd_export(cfg: RunConfig) -> Outcome:
    s = cfg.spec.build()
    results = {"nodes": s.chart.nx * s.chart.ny, "triangles": sum(1 for _ in export._faces(s.chart))}
    return Outcome(EXIT_OK, results, {}, s)


HANDLERS = {"analyze": cmd_analyze, "transform": cmd_transform, "sequence": cmd_sequence, "export": cmd_export}


def _write(cfg: RunConfig, outcome: Outcome) -> list:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{cfg.command}-{cfg.surface}-{cfg.res}"
    if cfg.command == "transform":
        stem += f"-{cfg.kind}"
    written = []
    report = export.build_report(cfg.surface, cfg.res, outcome.results, outcome.residuals, cfg.seed, cfg.command, cfg.threads)
    report["results"]["exit_code"] = outcome.code
    export.validate_report(report)
    text = {stem + ".json": export.dumps(report)}
    if outcome.surface is not None:
        if "csv" in cfg.formats:
            text[stem + ".csv"] = export.csv_text(outcome.surface)
        if "obj" in cfg.formats:
            text[stem + ".obj"] = export.obj_text(outcome.surface)
    for suffix, body in outcome.extra_text.items():
        text[f"{stem}.{suffix}"] = body
    for name, body in text.items():
        p = out / name
        p.write_text(body)
        written.append(p)
    return written


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        outcome = HANDLERS[cfg.command](cfg)
    except sq.NonWillmoreError as exc:
        print(f"gate: {exc}", file=sys.stderr)
        return EXIT_GATE
    except (mcs.ChartDegenerateError, bl.TransformError) as exc:
        print(f"gate: {exc}", file=sys.stderr)
        return EXIT_GATE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        for p in _write(cfg, outcome):
            log.info("wrote %s", p)
            print(p)
    except OSError as exc:
        print(f"io: {exc}", file=sys.stderr)
        return EXIT_IO
    term = outcome.results.get("termination") or outcome.results.get("classification")
    if term:
        print(f"termination: {term.get('kind')}")
    return outcome.code


if __name__ == "__main__":
    sys.exit(main())
