"""Command-line front end: configuration loading, experiment orchestration,
and deterministic CSV/JSON record output for external plotting."""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time

from . import __version__
from .bench import run_benchmark
from .config import ConfigError, TonConfig
from .experiments import grid_sweep, resilience_profile
from .fitting import (
    FitError,
    SurfaceFit,
    delta_relation_check,
    fit_capacity_law,
    fit_m0_vs_rho0,
    fit_r0_vs_r1,
    fit_surface,
)
from .flatten import prime_impact_factor, psi_curve, verify_flattening
from .kernel import run_simulation
from .rng import derive_seed

COMMANDS = (
    "simulate", "profile", "sweep-grid", "sweep-capacity", "fit",
    "flatten", "prime-alpha", "bench",
)

# keys accepted in spec files / --set, beyond TonConfig fields
GRID_KEYS = ("alpha_grid", "psi0_grid", "capacity_grid")
CONFIG_KEYS = (
    "n_nodes", "density", "capacity", "txn_length", "subtxn_time",
    "sim_duration", "decay_time", "psi0", "alpha", "injection_rate",
    "fault_mean_delay", "seed", "choke_window", "choke_commit_floor",
)
INT_KEYS = {"n_nodes", "txn_length", "seed", "choke_window"}


class SpecError(ValueError):
    """A spec file or override could not be parsed or validated."""


def _parse_value(key: str, raw: str):
    text = raw.strip()
    if key in GRID_KEYS:
        try:
            return [float(tok) for tok in text.split(",") if tok.strip()]
        except ValueError as exc:
            raise SpecError(f"{key}: expected a comma-separated float list") from exc
    if key == "fault_mean_delay" and text.lower() in ("disabled", "none"):
        return None
    if key in INT_KEYS:
        try:
            return int(text)
        except ValueError as exc:
            raise SpecError(f"{key}: expected an integer, got {text!r}") from exc
    try:
        return float(text)
    except ValueError as exc:
        raise SpecError(f"{key}: expected a number, got {text!r}") from exc


def parse_spec_text(text: str) -> dict:
    """Parse `key = value` lines; '#' starts a comment."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise SpecError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in CONFIG_KEYS and key not in GRID_KEYS:
            raise SpecError(f"line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, raw)
    return values


def load_spec(path: str | None, overrides: list[str]) -> dict:
    """Resolved key-value spec: defaults, then file, then --set overrides."""
    values: dict = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                values.update(parse_spec_text(fh.read()))
        except OSError as exc:
            raise SpecError(f"cannot read spec file {path}: {exc}") from exc
    for item in overrides:
        if "=" not in item:
            raise SpecError(f"--set expects key=value, got {item!r}")
        key, raw = (part.strip() for part in item.split("=", 1))
        if key not in CONFIG_KEYS and key not in GRID_KEYS:
            raise SpecError(f"--set: unknown key {key!r}")
        values[key] = _parse_value(key, raw)
    return values


def build_config(values: dict) -> TonConfig:
    kwargs = {
        k: v for k, v in values.items() if k in CONFIG_KEYS and k not in (
            "choke_window", "choke_commit_floor")
    }
    cfg = TonConfig(**kwargs)
    choke_kw = {}
    if "choke_window" in values:
        choke_kw["window"] = values["choke_window"]
    if "choke_commit_floor" in values:
        choke_kw["commit_floor"] = values["choke_commit_floor"]
    if choke_kw:
        cfg = cfg.with_(**choke_kw)
    return cfg.validate()


def spec_to_text(values: dict) -> str:
    """Inverse of parse_spec_text for the resolved spec echo."""
    lines = []
    for key in CONFIG_KEYS + GRID_KEYS:
        if key not in values:
            continue
        v = values[key]
        if v is None:
            lines.append(f"{key} = disabled")
        elif isinstance(v, list):
            lines.append(f"{key} = " + ",".join(_fmt_float(x) for x in v))
        elif isinstance(v, int):
            lines.append(f"{key} = {v}")
        else:
            lines.append(f"{key} = {_fmt_float(v)}")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------- emitters


def _fmt_float(x: float) -> str:
    """17 significant digits: parses back to the identical double."""
    return format(float(x), ".17g")


def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return _fmt_float(v)
    return str(v)


def _json_default(v):
    raise TypeError(f"not serializable: {v!r}")


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)  # 'inf', '-inf', 'nan' as strings: valid JSON
    return v


def emit(records: list[dict], fmt: str, path: str) -> bytes:
    """Serialize homogeneous records; returns the payload bytes written.

    CSV: one header row, fields in first-record order, floats at 17
    significant digits. JSON: one object per line, same field names.
    """
    if fmt == "csv":
        if records:
            fields = list(records[0].keys())
            rows = [",".join(fields)]
            for rec in records:
                if list(rec.keys()) != fields:
                    raise ValueError("records are not homogeneous")
                rows.append(",".join(_fmt_cell(rec[f]) for f in fields))
        else:
            rows = [""]
        payload = ("\n".join(rows) + "\n").encode()
    elif fmt == "json":
        lines = [
            json.dumps(
                {k: _json_safe(v) for k, v in rec.items()},
                default=_json_default,
                sort_keys=False,
            )
            for rec in records
        ]
        payload = ("\n".join(lines) + ("\n" if lines else "")).encode()
    else:
        raise ValueError(f"unknown format {fmt!r}")

    if path == "-":
        sys.stdout.buffer.write(payload)
        sys.stdout.flush()
    else:
        with open(path, "wb") as fh:
            fh.write(payload)
    return payload


def read_records(path: str) -> list[dict]:
    """Read CSV or JSON-lines records produced by emit()."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        return []
    if lines[0].lstrip().startswith("{"):
        return [json.loads(ln) for ln in lines]
    fields = lines[0].split(",")
    out = []
    for ln in lines[1:]:
        cells = ln.split(",")
        rec = {}
        for key, cell in zip(fields, cells):
            if cell == "":
                rec[key] = None
                continue
            try:
                rec[key] = int(cell)
            except ValueError:
                try:
                    rec[key] = float(cell)
                except ValueError:
                    rec[key] = cell
        out.append(rec)
    return out


# ----------------------------------------------------------------- commands


def _stats_record(seed_index: int, seed: int, st) -> dict:
    return {
        "run_index": seed_index,
        "seed": seed,
        "injected": st.injected,
        "committed": st.committed,
        "aborted": st.aborted,
        "aborted_no_route": st.aborted_no_route,
        "aborted_host_died": st.aborted_host_died,
        "in_flight_at_end": st.in_flight_at_end,
        "nodes_disabled_overload": st.nodes_disabled_overload,
        "nodes_disabled_fault": st.nodes_disabled_fault,
        "events_processed": st.events_processed,
        "choke_time": st.choke_time,
        "disabled_fraction_at_choke": st.disabled_fraction_at_choke,
        "all_dead_time": st.all_dead_time,
    }


def cmd_simulate(args, cfg: TonConfig, values: dict) -> list[dict]:
    records = []
    for j in range(args.seeds):
        seed = derive_seed(args.base_seed, j)
        st = run_simulation(cfg.with_(seed=seed))
        if args.emit_windows:
            for i, rec in enumerate(st.window_records):
                records.append(
                    {
                        "run_index": j,
                        "seed": seed,
                        "window_index": i,
                        "time": rec.time,
                        "commit_fraction": rec.commit_fraction,
                        "disabled_nodes": rec.disabled_nodes,
                    }
                )
        else:
            records.append(_stats_record(j, seed, st))
    return records


def cmd_profile(args, cfg: TonConfig, values: dict) -> list[dict]:
    prof = resilience_profile(
        cfg,
        base_seed=args.base_seed,
        n_seeds=args.seeds,
        resolution=args.resolution,
        jobs=args.jobs,
    )
    return [prof.as_record()]


def cmd_sweep_grid(args, cfg: TonConfig, values: dict) -> list[dict]:
    alphas = values.get("alpha_grid")
    psi0s = values.get("psi0_grid")
    if not alphas or not psi0s:
        raise SpecError("sweep-grid needs non-empty alpha_grid and psi0_grid")
    samples = grid_sweep(
        cfg,
        alphas,
        psi0s,
        base_seed=args.base_seed,
        n_seeds=args.seeds,
        resolution=args.resolution,
        include_r0=args.include_r0,
        jobs=args.jobs,
    )
    return [s.as_record() for s in samples]


def cmd_sweep_capacity(args, cfg: TonConfig, values: dict) -> list[dict]:
    cs = values.get("capacity_grid")
    if not cs:
        raise SpecError("sweep-capacity needs a non-empty capacity_grid")
    records = []
    for i, c in enumerate(cs):
        prof = resilience_profile(
            cfg.with_(capacity=c),
            base_seed=derive_seed(args.base_seed, i),
            n_seeds=args.seeds,
            resolution=args.resolution,
            jobs=args.jobs,
        )
        rec = {"capacity": c}
        rec.update(prof.as_record())
        records.append(rec)
    return records


FIT_MODELS = ("capacity-r0", "capacity-r1", "r0-vs-r1", "m0-vs-rho0",
              "surface", "delta-check")


def cmd_fit(args, cfg: TonConfig, values: dict) -> list[dict]:
    if not args.fit_in:
        raise SpecError("fit needs --in with records from a sweep command")
    rows = read_records(args.fit_in)
    if args.model in ("capacity-r0", "capacity-r1"):
        which = "r0" if args.model.endswith("r0") else "r1"
        pairs = [
            (r["capacity"], r[which]) for r in rows if r.get(which) is not None
        ]
        return [fit_capacity_law(pairs, which=which).as_record()]
    if args.model == "r0-vs-r1":
        pairs = [
            (r["r1"], r["r0"]) for r in rows
            if r.get("r0") is not None and r.get("r1") is not None
        ]
        return [fit_r0_vs_r1(pairs).as_record()]
    if args.model == "m0-vs-rho0":
        pairs = [
            (r["rho0"], r["m0"]) for r in rows
            if r.get("m0") is not None and r.get("rho0") is not None
        ]
        return [fit_m0_vs_rho0(pairs).as_record()]
    if args.model == "delta-check":
        pairs = [
            (r["rho0"], r["m0"]) for r in rows
            if r.get("m0") is not None and r.get("rho0") is not None
        ]
        return [{"model": "delta_check", "slope": delta_relation_check(pairs)}]
    if args.model == "surface":
        samples = [
            (r["alpha"], r["psi0"], r["ln_r1"], r.get("stderr") or 0.0)
            for r in rows
            if r.get("ln_r1") is not None and math.isfinite(r["ln_r1"])
        ]
        return [fit_surface(samples, start_seed=args.base_seed).as_record()]
    raise SpecError(f"unknown fit model {args.model!r}")


def _load_surface(path: str) -> SurfaceFit:
    rows = read_records(path)
    for r in rows:
        if r.get("model") == "ln_r1_surface":
            return SurfaceFit.from_record(r)
    raise SpecError(f"{path} holds no ln_r1_surface fit record")


def cmd_flatten(args, cfg: TonConfig, values: dict) -> list[dict]:
    if not args.fit_in:
        raise SpecError("flatten needs --fit-in with a surface fit record")
    fit = _load_surface(args.fit_in)
    report = verify_flattening(
        cfg,
        fit,
        base_seed=args.base_seed,
        n_seeds=args.seeds,
        resolution=args.resolution,
        rel_tol=args.rel_tol,
        include_r0=args.include_r0,
        jobs=args.jobs,
        psi0_prime_override=None,
    )
    rec = {"alpha": cfg.alpha, "psi0": cfg.psi0}
    rec.update(report.as_record())
    if args.psi0_prime_scale != 1.0:
        control = verify_flattening(
            cfg,
            fit,
            base_seed=args.base_seed,
            n_seeds=args.seeds,
            resolution=args.resolution,
            rel_tol=args.rel_tol,
            include_r0=args.include_r0,
            jobs=args.jobs,
            psi0_prime_override=report.psi0_prime * args.psi0_prime_scale,
        )
        crec = {"alpha": cfg.alpha, "psi0": cfg.psi0}
        crec.update(control.as_record())
        return [rec, crec]
    return [rec]


def cmd_prime_alpha(args, cfg: TonConfig, values: dict) -> list[dict]:
    if not args.fit_in:
        raise SpecError("prime-alpha needs --fit-in with a surface fit record")
    fit = _load_surface(args.fit_in)
    lengths = args.txn_lengths or [cfg.txn_length]
    records = []
    for length in lengths:
        if args.emit_curve > 0:
            n = args.emit_curve
            lo, hi = args.alpha_min, args.alpha_max
            alphas = [lo + (hi - lo) * k / (n - 1) for k in range(n)]
            for res in psi_curve(fit, cfg.psi0, length, alphas):
                rec = {"txn_length": length}
                rec.update(res.as_record())
                records.append(rec)
        else:
            pf = prime_impact_factor(
                fit, cfg.psi0, length, (args.alpha_min, args.alpha_max), args.tol
            )
            records.append(pf.as_record())
    return records


def cmd_bench(args, cfg: TonConfig, values: dict) -> list[dict]:
    return [
        rec.as_record()
        for rec in run_benchmark(cfg, base_seed=args.base_seed, runs=args.seeds)
    ]


HANDLERS = {
    "simulate": cmd_simulate,
    "profile": cmd_profile,
    "sweep-grid": cmd_sweep_grid,
    "sweep-capacity": cmd_sweep_capacity,
    "fit": cmd_fit,
    "flatten": cmd_flatten,
    "prime-alpha": cmd_prime_alpha,
    "bench": cmd_bench,
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tonsim",
        description="Transaction-oriented network simulator and "
        "resilience/flattening experiment harness",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="spec file (key = value lines)")
        p.add_argument(
            "--set", action="append", default=[], metavar="KEY=VALUE",
            help="override one spec key (repeatable)",
        )
        p.add_argument("--seeds", type=int, default=8)
        p.add_argument("--base-seed", type=int, default=1)
        p.add_argument("--out", default="-", help="output path ('-' = stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument(
            "--jobs", type=int,
            default=int(os.environ.get("TONSIM_JOBS", "1")),
            help="parallel runs per ensemble (default $TONSIM_JOBS or 1)",
        )
        p.add_argument("--resolution", type=float, default=0.01,
                       help="relative rate-search resolution")
        if name == "simulate":
            p.add_argument("--emit-windows", action="store_true")
        if name in ("sweep-grid", "flatten"):
            p.add_argument("--include-r0", action="store_true")
        if name == "fit":
            p.add_argument("--model", choices=FIT_MODELS, required=True)
            p.add_argument("--in", dest="fit_in", default=None)
        if name in ("flatten", "prime-alpha"):
            p.add_argument("--fit-in", default=None,
                           help="records file holding an ln_r1_surface fit")
        if name == "flatten":
            p.add_argument("--rel-tol", type=float, default=0.15)
            p.add_argument(
                "--psi0-prime-scale", type=float, default=1.0,
                help="also run a control with the flat cost scaled by this",
            )
        if name == "prime-alpha":
            p.add_argument("--alpha-min", type=float, default=0.5)
            p.add_argument("--alpha-max", type=float, default=1.5)
            p.add_argument("--tol", type=float, default=1e-4)
            p.add_argument("--txn-lengths", type=lambda s: [int(t) for t in s.split(",")],
                           default=None, help="comma list; default: config txn_length")
            p.add_argument("--emit-curve", type=int, default=0, metavar="N",
                           help="emit an N-point psi(alpha) curve instead of the peak")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        values = load_spec(args.config, args.set)
        cfg = build_config(values)
        records = HANDLERS[args.command](args, cfg, values)
        payload = emit(records, args.format, args.out)
    except (SpecError, ConfigError, FitError, ValueError) as exc:
        print(f"tonsim: error: {exc}", file=sys.stderr)
        return 1

    envelope = {
        "tool_version": __version__,
        "command": args.command,
        "config_digest": cfg.digest(),
        "base_seed": args.base_seed,
        "seeds": args.seeds,
        "payload_rows": len(records),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
        "wall_time_s": round(time.perf_counter() - t0, 6),
        "resolved_config": cfg.as_dict(),
        "grids": {k: values[k] for k in GRID_KEYS if k in values},
    }
    stream = sys.stderr if args.out == "-" else sys.stdout
    print(json.dumps(envelope), file=stream)
    return 0


if __name__ == "__main__":
    sys.exit(main())
