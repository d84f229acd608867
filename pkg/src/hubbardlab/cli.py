"""Batch front end: INI configs, single runs, sweeps and reproducible outputs.

Usage::

    hubbardlab <command> --config run.ini [--out DIR] [--workers N] [--seed S]

A config holds one section named after the command (or ``[sweep]``) plus an
optional ``[run]`` section with ``out``, ``seed`` and ``workers``. Every output
file carries the package version and a hash of the run-relevant config; no
wall-clock data is written, so equal hashes give byte-identical files.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import itertools
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import __version__

REQUIRED = object()


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


# ---------------------------------------------------------------------------
# value types


def _coupling(text: str) -> float:
    v = float(text)
    if math.isnan(v):
        raise ValueError("nan is not a valid value")
    return v


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list(item):
    def parse(text: str):
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not parts:
            raise ValueError("empty list")
        return tuple(item(p) for p in parts)
    parse.item = item
    parse.is_list = True
    return parse


def _nested(inner):
    def parse(text: str):
        return tuple(inner(part) for part in text.split(";"))
    return parse


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "inf" if math.isinf(v) and v > 0 else repr(v)
    if isinstance(v, (tuple, list)):
        sep = ";" if v and isinstance(v[0], (tuple, list)) else ","
        return sep.join(_fmt(x) for x in v)
    return str(v)


SCHEMAS = {
    "gamma": {"tol": (float, 1e-8)},
    "scatter": {"g": (_coupling, REQUIRED), "r_max": (int, 16), "grid": (int, 500), "cache_dir": (str, "")},
    "phi": {"g": (_coupling, REQUIRED), "r_max": (int, 16), "grid": (int, 500), "cache_dir": (str, "")},
    "eos": {"rho": (_list(float), REQUIRED)},
    "filter": {"s": (_coupling, REQUIRED), "period": (int, REQUIRED)},
    "dyson-certify": {"g": (_coupling, REQUIRED), "R": (int, REQUIRED), "s": (_coupling, math.inf),
                      "eps": (float, 0.5), "eta": (float, 0.5), "C_V": (float, 1.0), "period": (int, 32)},
    "ed": {"L": (int, REQUIRED), "N_u": (int, REQUIRED), "N_d": (int, REQUIRED), "g": (_coupling, REQUIRED),
           "tol": (float, 1e-8), "R_list": (_list(int), (1, 2)), "dimension_cap": (int, 200_000_000)},
    "lt-check": {"L": (int, 8), "kind": (str, "step"), "c": (float, 1.0), "radius": (float, 2.0),
                 "length": (float, 1.0), "grid": (_bool, False)},
    "trace-check": {"n_instances": (int, 1000), "delta": (float, math.nan), "min_dim": (int, 4),
                    "max_dim": (int, 16)},
}
RUN_SCHEMA = {"out": (str, "."), "seed": (int, 0), "workers": (int, 1)}
COMMANDS = tuple(SCHEMAS) + ("sweep",)


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    out: str = "."
    seed: int = 0
    workers: int = 1
    sweep_command: str | None = None


def _validate(section: str, items: dict, schema: dict, problems: list, as_list: bool = False) -> dict:
    params = {}
    for key, raw in items.items():
        if key not in schema:
            problems.append(f"[{section}] unknown key {key!r}")
            continue
        typ = schema[key][0]
        if as_list:
            # list-valued keys take one list per sweep value, separated by ';'
            typ = _nested(typ) if getattr(typ, "is_list", False) else _list(typ)
        try:
            params[key] = typ(raw)
        except (TypeError, ValueError) as exc:
            problems.append(f"[{section}] key {key!r}: {exc}")
    for key, (_, default) in schema.items():
        if key not in params and default is REQUIRED and not any(p.startswith(f"[{section}] key {key!r}")
                                                                 for p in problems):
            problems.append(f"[{section}] missing required key {key!r}")
    return params


def parse_config(text: str) -> RunConfig:
    """Parse and validate; every problem is collected before raising."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([str(exc)]) from None
    problems: list[str] = []
    sections = cp.sections()
    commands = [s for s in sections if s != "run"]
    for s in commands:
        if s not in COMMANDS:
            problems.append(f"unknown section [{s}]")
    commands = [s for s in commands if s in COMMANDS]
    if len(commands) != 1:
        problems.append(f"expected exactly one command section, found {len(commands)}")
        raise ConfigError(problems)
    command = commands[0]
    run = _validate("run", dict(cp["run"]) if cp.has_section("run") else {}, RUN_SCHEMA, problems)
    items = dict(cp[command])
    sweep_command = None
    if command == "sweep":
        sweep_command = items.pop("command", None)
        if sweep_command is None:
            problems.append("[sweep] missing required key 'command'")
            raise ConfigError(problems)
        if sweep_command not in SCHEMAS:
            problems.append(f"[sweep] key 'command': unknown command {sweep_command!r}")
            raise ConfigError(problems)
        params = _validate("sweep", items, SCHEMAS[sweep_command], problems, as_list=True)
    else:
        params = _validate(command, items, SCHEMAS[command], problems)
    if run.get("workers", 1) < 1:
        problems.append("[run] key 'workers': must be at least 1")
    if problems:
        raise ConfigError(problems)
    return RunConfig(command, params, run.get("out", "."), run.get("seed", 0), run.get("workers", 1),
                     sweep_command)


def serialize_config(cfg: RunConfig, include_run: bool = True) -> str:
    lines = []
    if include_run:
        lines += ["[run]", f"out = {cfg.out}", f"seed = {cfg.seed}", f"workers = {cfg.workers}", ""]
    lines.append(f"[{cfg.command}]")
    if cfg.sweep_command is not None:
        lines.append(f"command = {cfg.sweep_command}")
    for key in sorted(cfg.params):
        lines.append(f"{key} = {_fmt(cfg.params[key])}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: RunConfig) -> str:
    """Hash of everything that determines numeric content (not ``out`` or ``workers``)."""
    text = serialize_config(cfg, include_run=False) + f"seed = {cfg.seed}\n"
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# commands; each returns a list of flat rows


def _full_params(command: str, params: dict) -> dict:
    out = {k: d for k, (_, d) in SCHEMAS[command].items() if d is not REQUIRED}
    out.update(params)
    return out


def _cmd_gamma(p, seed):
    from .scattering import watson_gamma
    r = watson_gamma(p["tol"])
    return [{"gamma": r.gamma, "err": r.err, "method_a": r.method_a, "method_b": r.method_b}]


def _solution(p):
    from .scattering import phi_table, scattering_params
    return phi_table(scattering_params(p["g"]), p["r_max"], grid=p["grid"], cache_dir=p["cache_dir"] or None)


def _cmd_scatter(p, seed):
    from .scattering import identity_ap2, sq_residual, verify_decay
    sol = _solution(p)
    a = sol.params.a
    ap2 = max(abs(identity_ap2(sol, r) - 4 * math.pi * a) for r in range(2, sol.r_max))
    dec = verify_decay(sol)
    return [{"g": p["g"], "gamma": sol.params.gamma, "a": a, "phi0": sol.phi((0, 0, 0)),
             "sq_residual_max": float(sq_residual(sol).max()), "ap2_residual_max": ap2,
             "fitted_a": dec.fitted_a, "fitted_rel_error": dec.fitted_rel_error,
             "decay_bounded": int(dec.bounded)}]


def _cmd_phi(p, seed):
    sol = _solution(p)
    r = sol.r_max
    return [{"x": x, "y": y, "z": z, "phi": sol.phi((x, y, z))}
            for x in range(r + 1) for y in range(x, r + 1) for z in range(y, r + 1)]


def _cmd_eos(p, seed):
    from .ideal_fermi import eos_point
    rows = []
    for rho in p["rho"]:
        e = eos_point(rho)
        rows.append({"rho": rho, "E_f": e.fermi_energy, "e": e.energy_density, "err_e": e.err})
    return rows


def _cmd_filter(p, seed):
    from .soft_potential import build_filter, trivial_filter
    pair = trivial_filter(p["period"]) if math.isinf(p["s"]) else build_filter(p["s"], p["period"])
    return [{"s": p["s"], "Lambda": p["period"], "mass": pair.mass, "abs_mass": pair.abs_mass,
             "truncation_error": pair.truncation_error}]


def _cmd_certify(p, seed):
    from .soft_potential import build_filter, build_soft_set, certify_lemma1, trivial_filter
    pair = trivial_filter(p["period"]) if math.isinf(p["s"]) else build_filter(p["s"], p["period"])
    rep = certify_lemma1(p["g"], pair, build_soft_set(pair, p["R"], p["eps"], p["eta"]), p["C_V"])
    return [{"g": rep.g, "R": rep.R, "s": rep.s, "eps": rep.eps, "eta": rep.eta, "C_V": rep.C_V,
             "Lambda": rep.period, "min_eig": rep.min_eig, "pass": int(rep.passed)}]


def _cmd_ed(p, seed):
    from .hubbard_ed.ground import interaction_shift
    from .hubbard_ed.observables import ed_result_row
    row, state = interaction_shift(p["L"], p["N_u"], p["N_d"], p["g"], tol=p["tol"], seed=seed,
                                   dimension_cap=p["dimension_cap"])
    return [ed_result_row(row, state, p["R_list"])]


def _cmd_lt(p, seed):
    from .hubbard_ed.checks import LT_GRID, lt_check
    if p["grid"]:
        specs = LT_GRID
    else:
        extra = {"radius": p["radius"]} if p["kind"] == "step" else {"length": p["length"]}
        specs = ({"kind": p["kind"], "c": p["c"], **extra},)
    rows = []
    for spec in specs:
        r = lt_check(p["L"], spec)
        rows.append({"L": r.L, "kind": spec["kind"], "c": spec.get("c", 0.0),
                     "scale": spec.get("radius", spec.get("length", 0.0)), "min_eig": r.min_eig,
                     "bound": r.bound, "slack": r.slack, "holds": int(r.holds)})
    return rows


def _cmd_trace(p, seed):
    from .hubbard_ed.checks import trace_bound_check
    delta = None if math.isnan(p["delta"]) else p["delta"]
    r = trace_bound_check(seed, p["n_instances"], delta, (p["min_dim"], p["max_dim"]))
    return [{"seed": r.seed, "n_instances": r.n_instances, "violations": r.violations,
             "min_slack": r.min_slack, "min_relative_slack": r.min_relative_slack}]


HANDLERS = {"gamma": _cmd_gamma, "scatter": _cmd_scatter, "phi": _cmd_phi, "eos": _cmd_eos,
            "filter": _cmd_filter, "dyson-certify": _cmd_certify, "ed": _cmd_ed, "lt-check": _cmd_lt,
            "trace-check": _cmd_trace}
# commands whose result is judged pass/fail by a column
VERDICT_COLUMNS = {"dyson-certify": "pass", "lt-check": "holds"}


def execute(command: str, params: dict, seed: int) -> list[dict]:
    return HANDLERS[command](_full_params(command, params), seed)


# ---------------------------------------------------------------------------
# output


def _value(v):
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return v


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return _value(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def rows_csv(rows: list[dict], chash: str, columns: list[str] | None = None) -> str:
    if columns is None:
        columns = []
        for r in rows:
            columns += [k for k in r if k not in columns]
    buf = io.StringIO()
    buf.write(f"# hubbardlab {__version__} config_hash={chash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_value(r.get(c, "")) for c in columns])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


@dataclass
class ResultRecord:
    command: str
    params: dict
    outputs: list
    version: str
    config_hash: str
    files: list = field(default_factory=list)
    wall_time: float = 0.0
    ok: bool = True


def _file_stem(command: str) -> str:
    return {"dyson-certify": "certify", "lt-check": "lt_check", "trace-check": "trace_check"}.get(command, command)


def _verdict(command: str, rows: list[dict]) -> bool:
    col = VERDICT_COLUMNS.get(command)
    if command == "trace-check":
        return all(r["violations"] == 0 for r in rows)
    return col is None or all(r[col] for r in rows)


def run(cfg: RunConfig) -> ResultRecord:
    """Execute one config; writes ``<stem>.json`` and ``<stem>.csv`` (or the sweep set)."""
    if cfg.command == "sweep":
        return sweep(cfg)
    t0 = time.perf_counter()
    chash = config_hash(cfg)
    rows = execute(cfg.command, cfg.params, cfg.seed)
    params = _full_params(cfg.command, cfg.params)
    out = Path(cfg.out)
    stem = _file_stem(cfg.command)
    body = {"version": __version__, "config_hash": chash, "command": cfg.command, "seed": cfg.seed,
            "params": params, "rows": rows}
    if len(rows) == 1:
        body.update(rows[0])
    files = [out / f"{stem}.json", out / f"{stem}.csv"]
    columns = None
    if cfg.command == "ed":
        from .hubbard_ed.observables import ED_CSV_HEADER
        columns = ED_CSV_HEADER.split(",")
    texts = [_json_text(body), rows_csv(rows, chash, columns)]
    for path, text in zip(files, texts):
        atomic_write(path, text)
    return ResultRecord(cfg.command, params, rows, __version__, chash, files,
                        time.perf_counter() - t0, _verdict(cfg.command, rows))


def _point(args):
    command, params, seed = args
    try:
        rows = execute(command, params, seed)
        return {"status": "ok", "rows": rows, "ok": _verdict(command, rows)}
    except Exception as exc:  # a failed point is recorded and the sweep continues
        return {"status": "failed", "error": f"{type(exc).__name__}: {exc}", "rows": [], "ok": False}


def sweep(cfg: RunConfig) -> ResultRecord:
    """Cartesian product over the list-valued keys; one file per point plus a manifest."""
    t0 = time.perf_counter()
    command = cfg.sweep_command
    keys = sorted(cfg.params)
    grid = [dict(zip(keys, combo)) for combo in itertools.product(*(cfg.params[k] for k in keys))]
    if not grid:
        raise ValueError("empty sweep grid")
    chash = config_hash(cfg)
    jobs = [(command, p, cfg.seed) for p in grid]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_point, jobs))
    else:
        results = [_point(j) for j in jobs]
    out = Path(cfg.out)
    stem = _file_stem(command)
    files, manifest, all_rows = [], [], []
    for i, (p, res) in enumerate(zip(grid, results)):
        full = _full_params(command, p)
        name = f"points/{stem}_{i:04d}.json"
        point = {"version": __version__, "config_hash": chash, "command": command, "seed": cfg.seed,
                 "index": i, "params": full, **res}
        atomic_write(out / name, _json_text(point))
        files.append(out / name)
        entry = {"index": i, "params": full, "status": res["status"], "file": name}
        if "error" in res:
            entry["error"] = res["error"]
        manifest.append(entry)
        for r in res["rows"]:
            all_rows.append({"point": i, **{k: v for k, v in p.items()}, **r})
    ok = all(r["ok"] for r in results)
    atomic_write(out / "sweep.csv", rows_csv(all_rows, chash))
    atomic_write(out / "manifest.json", _json_text({
        "version": __version__, "config_hash": chash, "command": command, "seed": cfg.seed,
        "n_points": len(grid), "n_failed": sum(r["status"] != "ok" for r in results),
        "all_ok": ok, "points": manifest}))
    files += [out / "sweep.csv", out / "manifest.json"]
    return ResultRecord("sweep", dict(cfg.params), all_rows, __version__, chash, files,
                        time.perf_counter() - t0, ok)


# ---------------------------------------------------------------------------
# entry point


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="hubbardlab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, type=Path)
    ap.add_argument("--out", default=None)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args(argv)
    try:
        cfg = parse_config(args.config.read_text(encoding="utf-8"))
    except (OSError, ConfigError) as exc:
        print(f"hubbardlab: config error: {exc}", file=sys.stderr)
        return 2
    if cfg.command != args.command:
        print(f"hubbardlab: config section [{cfg.command}] does not match command {args.command!r}",
              file=sys.stderr)
        return 2
    overrides = {k: v for k, v in (("out", args.out), ("workers", args.workers), ("seed", args.seed))
                 if v is not None}
    cfg = replace(cfg, **overrides)
    try:
        rec = run(cfg)
    except Exception as exc:
        print(f"hubbardlab: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for f in rec.files:
        print(f)
    return 0 if rec.ok else 1


if __name__ == "__main__":
    sys.exit(main())
