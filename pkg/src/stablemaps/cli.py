"""Command-line interface.

Every command writes its artifacts into an output directory (``--out``,
or ``$STABLEMAPS_OUT``, or ``./stablemaps-out``) followed by a
``manifest.json`` listing each artifact with its SHA-256.  Parameters come
from built-in defaults, then from ``--config`` (a JSON object keyed by flag
name), then from flags given on the command line; flags win.

Exit status: 0 on success, 1 when an invariant or statistical target fails,
2 on usage errors.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import harness
from ._rng import RngStream
from .bdg import check_bijection_invariants, mobile_to_map
from .mobile import (
    InvalidMobile,
    coding_paths,
    coding_paths_csv,
    condition_size,
    mobile_from_bytes,
    mobile_from_text,
    mobile_to_bytes,
    mobile_to_text,
)
from .pmap import InvalidMap, check_map, map_from_bytes, map_to_bytes, profile, profile_csv, summary_json
from .stablesim import BridgeBank, distance_process, simulate_stable_shot_noise, simulate_stable_walk
from .weights import calibrate

OUT_ENV = "STABLEMAPS_OUT"
DEFAULT_OUT = "stablemaps-out"

COMMON = {"seed": 0, "stream": 0, "threads": 1, "out": None}
DEFAULTS = {
    "calibrate": {"a": 2.0},
    "sample-mobile": {"a": 2.0, "n": 1024, "mode": "window", "delta": 0.05, "format": "binary"},
    "build-map": {"input": None, "a": 2.0, "n": 1024, "mode": "window", "delta": 0.05},
    "profile": {"input": None},
    "simulate-stable": {"alpha": 1.5, "route": "walk", "n": 10**4, "T": 1.0, "eps": 0.05, "grid": 1024,
                        "bridge_points": 1024},
    "verify": {"suite": "thm7", "alpha": 1.5, "sizes": None, "replicas": None, "mode": "window", "delta": 0.05,
               "slope_tol": 0.05, "ks_level": 0.01},
    "report": {"dir": None},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stablemaps", description="Random planar maps with large faces and their stable limits.",
                argument_default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--seed", type=int, help="master seed (default 0)")
        sp.add_argument("--stream", type=int, help="stream id for single-sample commands (default 0)")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        sp.add_argument("--config", help="JSON file with default parameters; flags override it")
        sp.add_argument("--threads", type=int, help="worker threads; results do not depend on it")
        return sp

    sp = common(sub.add_parser("calibrate", argument_default=argparse.SUPPRESS, help="calibrate the weight sequence q_k ~ k^-a"))
    sp.add_argument("--a", type=float)

    sp = common(sub.add_parser("sample-mobile", argument_default=argparse.SUPPRESS, help="sample a size-conditioned labeled mobile"))
    _sampling_flags(sp)
    sp.add_argument("--format", choices=("binary", "text"))

    sp = common(sub.add_parser("build-map", argument_default=argparse.SUPPRESS, help="map of a mobile (read from --input or sampled)"))
    sp.add_argument("--input")
    _sampling_flags(sp)

    sp = common(sub.add_parser("profile", argument_default=argparse.SUPPRESS, help="distance profile of a map file"))
    sp.add_argument("--input")

    sp = common(sub.add_parser("simulate-stable", argument_default=argparse.SUPPRESS, help="stable path and distance process"))
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--route", choices=("walk", "shot-noise"))
    sp.add_argument("--n", type=int, help="walk steps per unit time")
    sp.add_argument("--T", type=float)
    sp.add_argument("--eps", type=float, help="jump resolution")
    sp.add_argument("--grid", type=int, help="shot-noise grid points per unit time")
    sp.add_argument("--bridge-points", type=int, dest="bridge_points")

    sp = common(sub.add_parser("verify", argument_default=argparse.SUPPRESS, help="statistical acceptance suites"))
    sp.add_argument("--suite", choices=("thm7", "labels", "bijection", "all"))
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--sizes", type=_int_list, help="comma separated, strictly increasing")
    sp.add_argument("--replicas", type=int)
    sp.add_argument("--mode", choices=("window", "exactly", "at_least"))
    sp.add_argument("--delta", type=float)
    sp.add_argument("--slope-tol", type=float, dest="slope_tol")
    sp.add_argument("--ks-level", type=float, dest="ks_level")

    sp = common(sub.add_parser("report", argument_default=argparse.SUPPRESS, help="check a run directory and summarize its reports"))
    sp.add_argument("--dir")
    return p


def _sampling_flags(sp):
    sp.add_argument("--a", type=float)
    sp.add_argument("--n", type=int, help="number of white vertices")
    sp.add_argument("--mode", choices=("window", "exactly", "at_least"))
    sp.add_argument("--delta", type=float)


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}")


def resolve(command: str, flags: dict) -> dict:
    """Defaults, then the config file, then explicit flags."""
    params = {**COMMON, **DEFAULTS[command]}
    config_path = flags.pop("config", None)
    if config_path:
        try:
            cfg = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config {config_path}: {e}")
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        unknown = set(cfg) - set(params)
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {sorted(unknown)}")
        params.update(cfg)
    params.update(flags)
    params["config"] = config_path
    if params["out"] is None:
        params["out"] = os.environ.get(OUT_ENV, DEFAULT_OUT)
    if params["threads"] < 1:
        raise UsageError("--threads must be >= 1")
    return params


class Run:
    """Collects artifacts and writes the manifest last."""

    def __init__(self, command: str, params: dict):
        self.command = command
        self.params = params
        self.dir = Path(params["out"])
        self.dir.mkdir(parents=True, exist_ok=True)
        self.artifacts: dict[str, str] = {}

    def write(self, name: str, data: str | bytes) -> Path:
        raw = data.encode() if isinstance(data, str) else data
        path = self.dir / name
        path.write_bytes(raw)
        self.artifacts[name] = hashlib.sha256(raw).hexdigest()
        return path

    def finish(self, status: int) -> int:
        recorded = {k: v for k, v in self.params.items() if k not in ("threads", "out", "config")}
        manifest = {
            "command": self.command,
            "config": self.params.get("config"),
            "seed": self.params["seed"],
            "output_dir": str(self.params["out"]),
            "parameters": recorded,
            "status": status,
            "artifacts": dict(sorted(self.artifacts.items())),
        }
        (self.dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return status


def _dump(obj) -> str:
    return json.dumps(harness._plain(obj), indent=2, sort_keys=True) + "\n"


def _sample_mobile(p: dict):
    rng = RngStream(p["seed"], p["stream"]).generator()
    return condition_size(calibrate(p["a"]), rng, p["n"], mode=p["mode"], delta=p["delta"])


def _read_mobile(path: str):
    data = Path(path).read_bytes()
    if data[:4] == b"MOBL":
        return mobile_from_bytes(data)
    return mobile_from_text(data.decode())


# ---------------------------------------------------------------------------
# commands


def cmd_calibrate(run: Run, p: dict) -> int:
    model = calibrate(p["a"])
    rep = model.report()
    run.write("calibration.json", _dump(rep))
    ok = abs(rep["residual_eq_admissibility"]) < 1e-9 and abs(rep["residual_eq_criticality"]) < 1e-9
    print(_dump(rep), end="")
    return 0 if ok else 1


def cmd_sample_mobile(run: Run, p: dict) -> int:
    m = _sample_mobile(p)
    if p["format"] == "binary":
        run.write("mobile.bin", mobile_to_bytes(m))
    else:
        run.write("mobile.txt", mobile_to_text(m))
    run.write("coding.csv", coding_paths_csv(coding_paths(m)))
    print(f"mobile: {m.n_white} white, {m.n_black} black vertices")
    return 0


def cmd_build_map(run: Run, p: dict) -> int:
    m = _read_mobile(p["input"]) if p["input"] else _sample_mobile(p)
    pm = mobile_to_map(m)
    run.write("map.bin", map_to_bytes(pm))
    report = check_bijection_invariants(m, pm)
    run.write("invariants.json", _dump({"violations": report.violations, "vertices": pm.n_vertices,
                                        "edges": pm.n_edges, "faces": pm.n_faces}))
    if not report.ok:
        for v in report.violations:
            print(f"violated: {v}", file=sys.stderr)
        return 1
    print(f"map: {pm.n_vertices} vertices, {pm.n_edges} edges, {pm.n_faces} faces")
    return 0


def cmd_profile(run: Run, p: dict) -> int:
    if not p["input"]:
        raise UsageError("profile needs --input MAP")
    pm = map_from_bytes(Path(p["input"]).read_bytes())
    problems = check_map(pm)
    prof = profile(pm)
    run.write("profile.csv", profile_csv(prof))
    run.write("summary.json", summary_json(prof, seed=p["seed"], stream=p["stream"]) + "\n")
    for v in problems:
        print(f"violated: {v}", file=sys.stderr)
    print(f"radius {prof.radius}, Delta {prof.delta}")
    return 1 if problems else 0


def cmd_simulate_stable(run: Run, p: dict) -> int:
    rng = RngStream(p["seed"], p["stream"]).generator()
    alpha = p["alpha"]
    if p["route"] == "walk":
        path = simulate_stable_walk(calibrate(alpha + 0.5), p["n"], p["T"], rng, eps=p["eps"])
    else:
        path = simulate_stable_shot_noise(alpha, p["eps"], p["T"], rng, grid=p["grid"])
    bank = BridgeBank(int(rng.integers(2**62)), p["bridge_points"])
    ds = distance_process(path, bank)
    run.write("path.csv", path.csv(ds.D))
    desc = {"alpha": alpha, "route": p["route"], "n": p["n"] if p["route"] == "walk" else None,
            "eps": p["eps"], "eps_x": path.eps, "grid": p["grid"] if p["route"] != "walk" else None,
            "T": p["T"], "seed": p["seed"], "stream": p["stream"], "registered_jumps": len(path.jump_pos),
            "omitted_bound": ds.audit["omitted_bound"]}
    run.write("descriptor.json", _dump(desc))
    bad = [] if np.all(np.isfinite(ds.D)) else ["non-finite distance values"]
    if np.any(path.jump_sizes < 0):
        bad.append("negative registered jump")
    for v in bad:
        print(f"violated: {v}", file=sys.stderr)
    print(f"path: {len(path.t)} grid points, {len(path.jump_pos)} registered jumps")
    return 1 if bad else 0


def _spec(p: dict, a: float, targets) -> harness.ExperimentSpec:
    kw = {"a": a, "seed": p["seed"], "threads": p["threads"], "mode": p["mode"], "delta": p["delta"],
          "slope_tol": p["slope_tol"], "ks_level": p["ks_level"], "targets": tuple(targets)}
    if p["sizes"] is not None:
        kw["sizes"] = tuple(p["sizes"])
    if p["replicas"] is not None:
        kw["replicas"] = p["replicas"]
    try:
        return harness.ExperimentSpec(**kw)
    except harness.SpecError as e:
        raise UsageError(str(e))


def cmd_verify(run: Run, p: dict) -> int:
    a = p["alpha"] + 0.5
    reports = []
    suite = p["suite"]
    if suite in ("bijection", "all"):
        reports.append(harness.bijection_suite(seed=p["seed"], a=a, threads=p["threads"]))
    if suite in ("thm7", "all"):
        reports += harness.run_targets(_spec(p, a, ("radius", "delta", "profile")))
    if suite in ("labels", "all"):
        reports += harness.run_targets(_spec(p, a, ("labels",)))
    for rep in reports:
        run.write(f"{rep.experiment}.json", rep.to_json())
        for name in sorted(rep.tables):
            run.write(f"{rep.experiment}.{name}.csv", rep.table_csv(name))
        for t in rep.targets:
            print(f"[{rep.experiment}] {t.line()}")
    return 0 if all(r.passed for r in reports) else 1


def cmd_report(run: Run, p: dict) -> int:
    if not p["dir"]:
        raise UsageError("report needs --dir RUN_DIRECTORY")
    d = Path(p["dir"])
    try:
        manifest = json.loads((d / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError) as e:
        print(f"violated: unreadable manifest ({e})", file=sys.stderr)
        return 1
    bad = []
    for name, digest in manifest["artifacts"].items():
        f = d / name
        if not f.exists() or hashlib.sha256(f.read_bytes()).hexdigest() != digest:
            bad.append(f"checksum mismatch: {name}")
    lines = [f"command: {manifest['command']} (status {manifest.get('status')})"]
    for name in sorted(manifest["artifacts"]):
        if name.endswith(".json") and not name.endswith("manifest.json"):
            try:
                body = json.loads((d / name).read_text())
            except (OSError, json.JSONDecodeError):
                continue
            for t in body.get("targets", []):
                lines.append(f"[{body['experiment']}] {'PASS' if t['passed'] else 'FAIL'} {t['name']}: "
                             f"{t['statistic']:.6g} ({t['threshold']})")
                if not t["passed"]:
                    bad.append(f"failed target: {t['name']}")
    text = "\n".join(lines) + "\n"
    run.write("summary.txt", text)
    print(text, end="")
    for v in bad:
        print(f"violated: {v}", file=sys.stderr)
    return 1 if bad else 0


COMMANDS = {
    "calibrate": cmd_calibrate,
    "sample-mobile": cmd_sample_mobile,
    "build-map": cmd_build_map,
    "profile": cmd_profile,
    "simulate-stable": cmd_simulate_stable,
    "verify": cmd_verify,
    "report": cmd_report,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = vars(parser.parse_args(argv))
        command = ns.pop("command", None)
        if command is None:
            raise UsageError(parser.format_usage())
        params = resolve(command, ns)
        r = Run(command, params)
        status = COMMANDS[command](r, params)
        return r.finish(status)
    except UsageError as e:
        print(str(e).rstrip(), file=sys.stderr)
        return 2
    except (InvalidMobile, InvalidMap) as e:
        print(f"invalid input: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
