"""Command-line front end: ``optstirap VERB CONFIG [options]``.

Verbs: shapes, simulate, sweep, ddp-analyze, validate.  The configuration is
one YAML document; see README.md for the keys.  Exit statuses:

    0 success            3 config parse error     5 I/O error
    2 usage error        4 config invalid         6 domain error
    7 a validate check failed
"""
from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__, csvio, ddp, experiments, pulses, reduction
from .errors import ConfigError, ParseError, StirapError
from .hamiltonian import SystemParams
from .propagator import IntegratorConfig, propagate, write_trajectory_csv

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_CONFIG, EXIT_IO, EXIT_DOMAIN, EXIT_CHECK = 0, 2, 3, 4, 5, 6, 7

VERBS = ("shapes", "simulate", "sweep", "ddp-analyze", "validate")
TOP_KEYS = {"verb", "pulse", "pulses", "system", "integrator", "sweep", "ddp", "shapes",
            "output", "workers"}
SYSTEM_KEYS = {"delta", "delta2", "gamma", "window", "T"}
INTEGRATOR_KEYS = {"rel_tol", "abs_tol", "max_step", "initial_step", "dense_output_samples",
                   "method", "max_steps"}
SWEEP_KEYS = {"swept", "grid", "start", "stop", "num", "target", "alpha"}
DDP_KEYS = {"box", "grid", "regime", "window"}
SHAPES_KEYS = {"window", "samples"}

DEFAULT_OUTPUT = {"shapes": "shapes.csv", "simulate": "trajectory.csv", "sweep": "sweep.csv",
                  "ddp-analyze": "ddp.csv", "validate": "validate.csv"}


class IoFailure(Exception):
    pass


@dataclass
class RunConfig:
    verb: str
    pulses: list = field(default_factory=list)      # normalised pulse records
    system: SystemParams = SystemParams()
    integrator: IntegratorConfig = IntegratorConfig()
    sweep: dict | None = None
    ddp: dict = field(default_factory=dict)
    shapes: dict = field(default_factory=dict)
    output_path: str = ""
    workers: int = 1
    defaults: list = field(default_factory=list, compare=False)  # applied defaults, for the log

    @property
    def descriptor(self):
        return pulses.from_config(self.pulses[0])


def _number(value, key):
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return value
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            pass
    raise ConfigError(f"{key}: expected a number, got {value!r}")


def _section(doc, name, allowed):
    sec = doc.get(name)
    if sec is None:
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    unknown = sorted(set(sec) - allowed)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} in section {name!r}")
    return sec


def _pulse_record(raw, where):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = sorted(set(raw) - pulses.PULSE_KEYS)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} in {where}")
    rec = {k: (v if k in ("family", "n") else _number(v, f"{where}.{k}"))
           for k, v in raw.items()}
    if "n" in rec:
        n = _number(rec["n"], f"{where}.n")
        if float(n) != int(n):
            raise ConfigError(f"{where}.n must be an integer")
        rec["n"] = int(n)
    return pulses.to_config(pulses.from_config(rec))


def parse_config(text: str, verb: str | None = None) -> RunConfig:
    """Validate a YAML document and fill defaults; raises ParseError / ConfigError."""
    try:
        doc = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ParseError(f"malformed config{where}: {getattr(exc, 'problem', exc)}") from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ParseError("config document must be a mapping at top level")
    doc = dict(doc)
    if "family" in doc:  # flat pulse document
        flat = {k: doc.pop(k) for k in list(doc) if k in pulses.PULSE_KEYS}
        if "pulse" in doc:
            raise ConfigError("give either a 'pulse' section or flat pulse keys, not both")
        doc["pulse"] = flat
    unknown = sorted(set(doc) - TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}")
    verb = verb or doc.get("verb")
    if verb not in VERBS:
        raise ConfigError(f"verb must be one of {VERBS}, got {verb!r}")
    if doc.get("verb") not in (None, verb):
        raise ConfigError(f"config verb {doc['verb']!r} does not match requested {verb!r}")
    defaults = []

    records = []
    if "pulse" in doc:
        records.append(_pulse_record(doc["pulse"], "pulse"))
    if "pulses" in doc:
        if not isinstance(doc["pulses"], list) or not doc["pulses"]:
            raise ConfigError("'pulses' must be a non-empty list")
        records += [_pulse_record(p, f"pulses[{i}]") for i, p in enumerate(doc["pulses"])]
    if not records:
        if verb != "validate":
            raise ConfigError(f"verb {verb!r} needs a 'pulse' section")

    sys_sec = _section(doc, "system", SYSTEM_KEYS)
    skw = {}
    for k in ("delta", "delta2", "gamma", "T"):
        if k in sys_sec:
            skw[k] = float(_number(sys_sec[k], f"system.{k}"))
    if "window" in sys_sec:
        w = sys_sec["window"]
        if not (isinstance(w, list) and len(w) == 2):
            raise ConfigError("system.window must be a two-element list")
        skw["window"] = tuple(float(_number(x, "system.window")) for x in w)
    base = SystemParams()
    for k in ("delta", "delta2", "gamma", "window", "T"):
        if k not in skw:
            defaults.append(f"system.{k} = {getattr(base, k)!r}")
    system = SystemParams(**skw)

    int_sec = _section(doc, "integrator", INTEGRATOR_KEYS)
    ikw = {}
    for k in INTEGRATOR_KEYS - {"method"}:
        if k in int_sec and int_sec[k] is not None:
            v = _number(int_sec[k], f"integrator.{k}")
            ikw[k] = int(v) if k in ("dense_output_samples", "max_steps") else float(v)
    if "method" in int_sec:
        ikw["method"] = str(int_sec["method"])
    if verb == "simulate" and "dense_output_samples" not in ikw:
        ikw["dense_output_samples"] = 201
    ibase = IntegratorConfig()
    for f in dataclasses.fields(IntegratorConfig):
        if f.name not in int_sec:
            defaults.append(f"integrator.{f.name} = {ikw.get(f.name, getattr(ibase, f.name))!r}")
    integrator = IntegratorConfig(**ikw)

    sweep = None
    if verb == "sweep":
        sec = _section(doc, "sweep", SWEEP_KEYS)
        if not sec:
            raise ConfigError("verb 'sweep' needs a 'sweep' section")
        if "swept" not in sec:
            raise ConfigError("sweep.swept is required")
        if "grid" in sec:
            if {"start", "stop", "num"} & set(sec):
                raise ConfigError("give sweep.grid or sweep.start/stop/num, not both")
            if not isinstance(sec["grid"], list):
                raise ConfigError("sweep.grid must be a list")
            grid = [float(_number(v, "sweep.grid")) for v in sec["grid"]]
        else:
            missing = {"start", "stop"} - set(sec)
            if missing:
                raise ConfigError(f"sweep.{sorted(missing)[0]} is required without sweep.grid")
            num = sec.get("num")
            if num is None:
                num = 200
                defaults.append("sweep.num = 200")
            num = _number(num, "sweep.num")
            if int(num) != num or num < 1:
                raise ConfigError("sweep.num must be a positive integer")
            grid = np.linspace(float(_number(sec["start"], "sweep.start")),
                               float(_number(sec["stop"], "sweep.stop")), int(num)).tolist()
        target = sec.get("target", experiments.FULL_TRANSFER)
        if "target" not in sec:
            defaults.append(f"sweep.target = {target!r}")
        alpha = sec.get("alpha")
        alpha = None if alpha is None else float(_number(alpha, "sweep.alpha"))
        sweep = {"swept": str(sec["swept"]), "grid": grid, "target": target, "alpha": alpha}
        experiments.SweepSpec(sweep["swept"], tuple(grid), pulses.from_config(records[0]),
                              system, target, alpha)
    elif "sweep" in doc:
        raise ConfigError(f"section 'sweep' is not used by verb {verb!r}")

    dsec = dict(_section(doc, "ddp", DDP_KEYS))
    for k in ("box", "window"):
        if k in dsec:
            dsec[k] = [float(_number(v, f"ddp.{k}")) for v in dsec[k]]
    if "grid" in dsec:
        dsec["grid"] = [int(_number(v, "ddp.grid")) for v in dsec["grid"]]
    if verb == "ddp-analyze" and "grid" not in dsec:
        dsec["grid"] = [16, 16]
        defaults.append("ddp.grid = [16, 16]")

    shsec = dict(_section(doc, "shapes", SHAPES_KEYS))
    if "window" in shsec:
        shsec["window"] = [float(_number(v, "shapes.window")) for v in shsec["window"]]
    if "samples" in shsec:
        shsec["samples"] = int(_number(shsec["samples"], "shapes.samples"))
    if verb == "shapes":
        for k, v in (("window", [-4.0, 4.0]), ("samples", 801)):
            if k not in shsec:
                shsec[k] = v
                defaults.append(f"shapes.{k} = {v!r}")

    output = doc.get("output")
    if output is None:
        output = DEFAULT_OUTPUT[verb]
        defaults.append(f"output = {output!r}")
    workers = doc.get("workers")
    if workers is None:
        workers = os.cpu_count() or 1
        defaults.append(f"workers = {workers}")
    workers = _number(workers, "workers")
    if int(workers) != workers or workers < 1:
        raise ConfigError("workers must be a positive integer")
    return RunConfig(verb, records, system, integrator, sweep, dsec, shsec, str(output),
                     int(workers), defaults)


def to_document(cfg: RunConfig) -> dict:
    """Inverse of :func:`parse_config` (all defaults made explicit)."""
    doc = {"verb": cfg.verb}
    if len(cfg.pulses) == 1:
        doc["pulse"] = dict(cfg.pulses[0])
    elif cfg.pulses:
        doc["pulses"] = [dict(p) for p in cfg.pulses]
    s = cfg.system
    doc["system"] = {"delta": s.delta, "delta2": s.delta2, "gamma": s.gamma,
                     "window": list(s.window), "T": s.T}
    integ = dataclasses.asdict(cfg.integrator)
    if integ["initial_step"] is None:
        del integ["initial_step"]
    doc["integrator"] = integ
    if cfg.sweep is not None:
        sw = {k: v for k, v in cfg.sweep.items() if v is not None}
        sw["grid"] = list(sw["grid"])
        doc["sweep"] = sw
    if cfg.ddp:
        doc["ddp"] = dict(cfg.ddp)
    if cfg.shapes:
        doc["shapes"] = dict(cfg.shapes)
    doc["output"] = cfg.output_path
    doc["workers"] = cfg.workers
    return doc


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(to_document(cfg), sort_keys=False, default_flow_style=None)


# ---------------------------------------------------------------------------
# verbs


def _shapes(cfg, out, log):
    lo, hi = cfg.shapes["window"]
    times = np.linspace(lo, hi, int(cfg.shapes["samples"]))
    header, cols = ["t"], [times]
    for i, rec in enumerate(cfg.pulses):
        desc = pulses.from_config(rec)
        s = pulses.sample(desc, times)
        tag = f"_{i + 1}" if len(cfg.pulses) > 1 else ""
        header += [f"omega_p{tag}", f"omega_s{tag}"]
        cols += [s[:, 1], s[:, 2]]
        if not desc.two_state:
            header.append(f"theta{tag}")
            cols.append(pulses.mixing_angle(desc, times))
    comments = [f"pulse{i + 1}: " + " ".join(f"{k}={v!r}" for k, v in r.items())
                for i, r in enumerate(cfg.pulses)]
    csvio.write_csv(out, header, np.column_stack(cols), comments)
    log.append(f"wrote {len(times)} samples of {len(cfg.pulses)} pulse pair(s)")
    return EXIT_OK


def _simulate(cfg, out, log):
    desc = cfg.descriptor
    res = propagate(desc, cfg.system, cfg=cfg.integrator)
    write_trajectory_csv(res, out)
    p = np.abs(res.final.c) ** 2
    log.append("final populations: " + " ".join(f"{x:.12e}" for x in p))
    if not desc.two_state:
        log.append(f"transfer infidelity: {experiments.transfer_infidelity(res):.6e}")
        alpha = getattr(desc, "alpha", None)
        if alpha is not None:
            log.append(f"superposition infidelity (alpha={alpha:.6g}): "
                       f"{experiments.superposition_infidelity(res, alpha):.6e}")
    log.append(f"norm drift {res.norm_drift:.3e}, steps {res.steps_taken} "
               f"(+{res.rejected_steps} rejected)")
    return EXIT_OK


def _sweep(cfg, out, log, plot=False):
    sw = cfg.sweep
    spec = experiments.SweepSpec(sw["swept"], tuple(sw["grid"]), cfg.descriptor, cfg.system,
                                 sw["target"], sw["alpha"])
    recs = experiments.run_sweep(spec, cfg.integrator, cfg.workers)
    experiments.write_sweep_csv(recs, out, spec)
    failed = sum(r.status != "ok" for r in recs)
    log.append(f"{len(recs)} points, {failed} flagged")
    if plot:
        script = experiments.plot_script(Path(out).name, sw["swept"], Path(out).stem)
        csvio.atomic_write(Path(out).with_suffix(".gp"), script)
        log.append(f"plot script {Path(out).with_suffix('.gp')}")
    return EXIT_OK


def _ddp_model(cfg):
    desc = cfg.descriptor
    window = tuple(cfg.ddp.get("window", cfg.system.window))
    if desc.two_state:
        return ddp.TwoStateModel.from_descriptor(desc, window)
    regime = cfg.ddp.get("regime") or ("resonant" if cfg.system.delta == 0 else "eliminated")
    if regime == "resonant":
        eff = reduction.resonant_reduce(desc)
    elif regime == "eliminated":
        eff = reduction.eliminate(desc, cfg.system.delta)
    else:
        raise ConfigError(f"ddp.regime must be 'resonant' or 'eliminated', got {regime!r}")
    return ddp.TwoStateModel.from_effective(eff, window)


def _ddp_analyze(cfg, out, log):
    model = _ddp_model(cfg)
    box = ddp.SearchBox(*cfg.ddp["box"]) if "box" in cfg.ddp else None
    est = ddp.estimate(model, box, tuple(cfg.ddp["grid"]))
    est.write_csv(out)
    summary = est.summary()
    print(summary)
    log.append(summary)
    return EXIT_OK


def validation_checks():
    """Built-in oracle suite: list of (name, passed, detail)."""
    out = []
    for k in (0.5, 1.0, 2.0, 3.0):
        est = ddp.estimate(pulses.LandauZener(math.sqrt(k), 1.0), ddp.SearchBox(-5, 5, 0.1, 5))
        err = abs(math.log(est.probability) + math.pi * k / 2)
        out.append((f"lz-ddp k={k:g}", err <= 1e-6 and len(est.points) == 1,
                    f"|ln P - ln P_exact| = {err:.2e}"))
    flagship = pulses.from_config({"family": "ddp-optimized", "omega0": 20, "n": 3,
                                   "lambda": 4, "t0": 2})
    gauss = pulses.Gaussian(20.0, 1.2)
    tight = IntegratorConfig(1e-12, 1e-14)
    for name, desc in (("ddp-optimized", flagship), ("gaussian", gauss)):
        rep = reduction.consistency_check(desc, SystemParams(), tight)
        out.append((f"reduction {name}", rep.max_deviation <= 1e-8,
                    f"max deviation {rep.max_deviation:.2e}"))
    res = propagate(flagship, SystemParams(), cfg=IntegratorConfig(1e-12, 1e-14, dense_output_samples=201))
    out.append(("norm conservation", res.norm_drift <= 1e-9, f"drift {res.norm_drift:.2e}"))
    inf = experiments.transfer_infidelity(res)
    out.append(("flagship infidelity", inf < 1e-4, f"1 - P3 = {inf:.3e}"))
    return out


def _validate(cfg, out, log):
    checks = validation_checks()
    rows = []
    for name, ok, detail in checks:
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        print(line)
        log.append(line)
        rows.append([name, "pass" if ok else "fail", detail])
    csvio.write_csv(out, ["check", "result", "detail"], rows)
    return EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_CHECK


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    ap = argparse.ArgumentParser(prog="optstirap", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("verb", choices=VERBS)
    ap.add_argument("config", nargs="?", help="YAML config file (optional for validate)")
    ap.add_argument("-o", "--output", help="output CSV path (overrides config)")
    ap.add_argument("-w", "--workers", type=int, help="worker processes for sweeps")
    ap.add_argument("--log", help="run log path (default: OUTPUT with .log suffix)")
    ap.add_argument("--plot", action="store_true", help="also write a gnuplot script (sweep)")
    ap.add_argument("-v", "--verbose", action="store_true", help="echo the run log to stderr")
    return ap


def dispatch(cfg: RunConfig, plot=False, log_path=None, verbose=False) -> int:
    out = Path(cfg.output_path)
    log = [f"optstirap {__version__}", f"verb: {cfg.verb}", "resolved config:",
           *("  " + ln for ln in dump_config(cfg).splitlines()),
           "defaults applied:", *("  " + d for d in cfg.defaults)]
    handlers = {"shapes": _shapes, "simulate": _simulate, "ddp-analyze": _ddp_analyze,
                "validate": _validate}
    t0 = time.perf_counter()
    try:
        if cfg.verb == "sweep":
            code = _sweep(cfg, out, log, plot)
        else:
            code = handlers[cfg.verb](cfg, out, log)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    log.append(f"time {cfg.verb}: {time.perf_counter() - t0:.3f} s")
    log.append(f"output: {out}")
    text = "\n".join(log) + "\n"
    try:
        csvio.atomic_write(log_path or out.with_suffix(".log"), text)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if verbose:
        sys.stderr.write(text)
    return code


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    t0 = time.perf_counter()
    try:
        text = ""
        if args.config:
            try:
                text = Path(args.config).read_text()
            except OSError as exc:
                raise IoFailure(f"cannot read config: {exc}") from exc
        elif args.verb != "validate":
            ap.error(f"verb {args.verb!r} needs a config file")
        cfg = parse_config(text, args.verb)
        if args.output:
            cfg.output_path = args.output
        if args.workers:
            cfg.workers = args.workers
        cfg.defaults.append(f"parse time {time.perf_counter() - t0:.3f} s")
        return dispatch(cfg, args.plot, args.log, args.verbose)
    except ParseError as exc:
        return _fail(EXIT_PARSE, "parse", args.verb, exc)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", args.verb, exc)
    except IoFailure as exc:
        return _fail(EXIT_IO, "io", args.verb, exc)
    except StirapError as exc:
        return _fail(EXIT_DOMAIN, "domain", args.verb, exc)


def _fail(code, category, verb, exc):
    sys.stderr.write(f"error[{category}] {verb}: {type(exc).__name__}: {exc}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
