"""Command-line front end.

Verbs::

    chspectral run CONFIG
    chspectral preset NAME [--out DIR] [--override key=value ...]
    chspectral presets
    chspectral constants [--mobility quartic|quadratic]

Exit status: 0 success, 2 configuration error, 3 instability, 4 I/O error.
Progress and timing go to stderr; stdout carries only verb output.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time as _time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import RunConfig, apply_override, config_from_dict, get_preset, list_presets, parse_config
from .diagnostics import MOBILITIES, QuadratureError, constants_oracle, record
from .init import phase_from_shape
from .io import CsvLog, SnapshotError, mid_slices, read_snapshot, write_pgm, write_snapshot
from .models import ConfigError, InstabilityError, SimState, initial_state, make_stepper

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3
EXIT_IO = 4

log = logging.getLogger("chspectral")

CSV_NAME = "diagnostics.csv"
META_NAME = "metadata.json"


@dataclass
class RunResult:
    status: int
    state: SimState | None
    out_dir: Path
    message: str = ""


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _start_state(cfg: RunConfig) -> SimState:
    p = cfg.params
    if cfg.init.kind == "snapshot":
        snap = read_snapshot(cfg.init.snapshot)
        if snap.grid != cfg.grid:
            raise ConfigError(
                f"init.path: snapshot grid {snap.grid.sizes} x {snap.grid.lengths} "
                f"does not match the configured grid {cfg.grid.sizes} x {cfg.grid.lengths}"
            )
        if snap.eps != p.epsilon:
            raise ConfigError(f"init.path: snapshot eps {snap.eps!r} differs from model.epsilon {p.epsilon!r}")
        step = int(round(snap.time / p.dt))
        return SimState(u=snap.u, mu=snap.mu, step=step, time=step * p.dt)
    u = phase_from_shape(cfg.init.shape, cfg.grid, p.epsilon)
    return initial_state(cfg.grid, u, p, mu0=cfg.init.mu0)


class _Writer:
    """Owns the output directory for one run."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.dir = cfg.output.dir
        self.dir.mkdir(parents=True, exist_ok=True)
        self.csv = CsvLog(self.dir / CSV_NAME) if "csv" in cfg.output.formats else None
        self.last_row = None
        self.last_snap = None

    def row(self, state: SimState) -> None:
        if self.csv is not None and state.step != self.last_row:
            self.csv.write(record(self.cfg.grid, state, self.cfg.params.epsilon))
            self.last_row = state.step

    def snapshot(self, state: SimState) -> None:
        if state.step == self.last_snap:
            return
        self.last_snap = state.step
        fmts = self.cfg.output.formats
        tag = f"{state.step:08d}"
        if "raw" in fmts:
            write_snapshot(self.dir / f"snap_{tag}.chf", self.cfg.grid, self.cfg.params.epsilon,
                           state.time, state.u, state.mu)
        if "pgm" in fmts and np.isfinite(state.u).all():
            if self.cfg.grid.dim == 2:
                write_pgm(self.dir / f"u_{tag}.pgm", state.u)
            else:
                for ax, img in mid_slices(state.u, self.cfg.output.slice_axes).items():
                    write_pgm(self.dir / f"u_{tag}_ax{ax}.pgm", img)

    def close(self) -> None:
        if self.csv is not None:
            self.csv.close()


def _write_meta(cfg: RunConfig, meta: dict) -> None:
    doc = {"version": __version__, "config": cfg.source, **meta}
    (cfg.output.dir / META_NAME).write_text(json.dumps(doc, indent=2, default=str) + "\n")


def run(cfg: RunConfig) -> RunResult:
    """Execute a validated configuration and write its outputs.

    The schedule's ``steps`` (or ``time``) is the absolute final step, so a
    run started from a snapshot continues to the same end point as the
    original run and reproduces its later CSV rows.
    """
    sch = cfg.schedule
    final = sch.final_step(cfg.params.dt)
    t0 = _time.perf_counter()
    meta = {"started": _now()}
    writer = None
    state = None
    try:
        writer = _Writer(cfg)
        _write_meta(cfg, meta)
        state = _start_state(cfg)
        if state.step > final:
            raise ConfigError(f"schedule: start step {state.step} is past the final step {final}")
        stepper = make_stepper(cfg.params, cfg.grid, dealias=cfg.dealias)
        writer.row(state)
        if sch.snapshot_every is not None and state.step % sch.snapshot_every == 0:
            writer.snapshot(state)
        last_report = t0
        while state.step < final:
            state = stepper(state)
            if state.step % sch.diag_every == 0 or state.step == final:
                writer.row(state)
            if sch.snapshot_every is not None and state.step % sch.snapshot_every == 0:
                writer.snapshot(state)
            now = _time.perf_counter()
            if now - last_report > 5.0:
                log.info("step %d/%d  (%.1f s)", state.step, final, now - t0)
                last_report = now
        writer.snapshot(state)
        status, message = EXIT_OK, "ok"
    except InstabilityError as exc:
        if exc.state is not None:
            state = exc.state
            writer.row(state)
        status, message = EXIT_UNSTABLE, str(exc)
    except ConfigError as exc:
        status, message = EXIT_CONFIG, str(exc)
    except (OSError, SnapshotError) as exc:
        status, message = EXIT_IO, str(exc)
    finally:
        if writer is not None:
            writer.close()
    wall = _time.perf_counter() - t0
    if status != EXIT_OK:
        log.error("%s", message)
    log.info("finished with status %d after %.2f s", status, wall)
    meta.update(finished=_now(), wall_seconds=wall, status=status, message=message,
                final_step=None if state is None else state.step)
    try:
        if cfg.output.dir.is_dir():
            _write_meta(cfg, meta)
    except OSError as exc:
        log.error("could not write metadata: %s", exc)
        status = status or EXIT_IO
    return RunResult(status, state, cfg.output.dir, message)


# -- verbs -----------------------------------------------------------------

def _cmd_run(args) -> int:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return EXIT_IO
    cfg = parse_config(text)
    return run(cfg).status


def _cmd_preset(args) -> int:
    preset = get_preset(args.name)
    doc = preset.document()
    for item in args.override or []:
        apply_override(doc, item)
    doc.setdefault("output", {})["dir"] = str(args.out or preset.name)
    return run(config_from_dict(doc)).status


def _cmd_presets(args) -> int:
    presets = list_presets()
    width = max(len(p.name) for p in presets)
    for p in presets:
        print(f"{p.name:<{width}}  {p.description}")
    if args.verbose:
        print(yaml.safe_dump({p.name: p.config for p in presets}, sort_keys=False))
    return EXIT_OK


def _cmd_constants(args) -> int:
    t0 = _time.perf_counter()
    try:
        c = constants_oracle(args.mobility)
    except QuadratureError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    print(f"mobility         {c.mobility}")
    for name in ("c_W", "c_M", "c_N", "velocity_factor", "c_M_printed"):
        v = getattr(c, name)
        print(f"{name:<16} {'inf' if math.isinf(v) else f'{v:.15g}'}")
    log.info("quadrature took %.3f s", _time.perf_counter() - t0)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chspectral", description="Pseudospectral Cahn-Hilliard runs.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-q", "--quiet", action="store_true", help="only report errors on stderr")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="run a YAML configuration")
    p.add_argument("config")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("preset", help="run a named preset")
    p.add_argument("name")
    p.add_argument("--out", help="output directory (default: the preset name)")
    p.add_argument("--override", action="append", metavar="KEY=VALUE",
                   help="dotted config key, e.g. schedule.steps=100; repeatable")
    p.set_defaults(func=_cmd_preset)

    p = sub.add_parser("presets", help="list the preset catalog")
    p.add_argument("-v", "--verbose", action="store_true", help="also dump each preset's configuration")
    p.set_defaults(func=_cmd_presets)

    p = sub.add_parser("constants", help="print the profile constants from quadrature")
    p.add_argument("--mobility", choices=sorted(MOBILITIES), default="quartic")
    p.set_defaults(func=_cmd_constants)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
