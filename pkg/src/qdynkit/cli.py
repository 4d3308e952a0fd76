"""Batch front end: config-driven bound/propa/relax/sweep/replay pipelines.

Exit codes: 0 success, 2 configuration error, 3 numeric error, 4 I/O or
checkpoint error.  The default output directory is taken from the
``QDYNKIT_OUT`` environment variable when ``--out-dir`` is absent.
All console output is mirrored to ``<stem>.log`` in the output directory.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import csv
import logging
import os
import sys

import numpy as np

from . import config as cfg
from . import observe, plots, propagators, stationary
from .checkpoint import CheckpointWriter, load_checkpoints
from .errors import (
    CheckpointError,
    ConfigurationError,
    NumericError,
    QdynError,
    UnsupportedError,
)
from .system import WaveFunction

log = logging.getLogger("qdynkit")

__all__ = ["main", "run_bound", "run_propa", "run_relax", "run_sweep", "run_replay"]


def _fmt(x):
    """17-significant-digit float formatting for CSV round-tripping."""
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _setup_logging(out_dir, stem):
    logger = logging.getLogger("qdynkit")
    logger.setLevel(logging.INFO)
    for h in list(logger.handlers):
        logger.removeHandler(h)
    fmt = logging.Formatter("%(message)s")
    stream = logging.StreamHandler(sys.stdout)
    stream.setFormatter(fmt)
    logger.addHandler(stream)
    fh = logging.FileHandler(os.path.join(out_dir, f"{stem}.log"), mode="w")
    fh.setFormatter(fmt)
    logger.addHandler(fh)
    return logger


def _echo_config(spec):
    log.info("resolved configuration:")
    for line in spec.echo():
        log.info("  %s", line)


def _expect_header(n_channels, ndim):
    cols = ["t", "norm"]
    cols += [f"pop_{c + 1}" for c in range(n_channels)]
    for k in range(ndim):
        cols += [f"position_{k + 1}", f"position_unc_{k + 1}"]
        cols += [f"momentum_{k + 1}", f"momentum_unc_{k + 1}"]
    cols += ["potential", "kinetic", "total", "autocorr_re", "autocorr_im"]
    return cols


def _expect_row(r):
    row = [r.t, r.norm]
    row += list(r.populations)
    for k in range(len(r.position)):
        row += [r.position[k], r.position_unc[k], r.momentum[k], r.momentum_unc[k]]
    row += [r.potential, r.kinetic, r.total,
            r.autocorrelation.real, r.autocorrelation.imag]
    return row


def _save_options(spec, args):
    save = spec.raw.get("save", {})
    stem = save.get("stem", "run")
    export = bool(save.get("export", False))
    frames = bool(save.get("frames", False)) and not args.no_frames
    representation = save.get("representation", "dvr")
    return stem, export, frames, representation


# -- pipelines --------------------------------------------------------------


def run_bound(spec, args, out_dir):
    stem, export, frames, _ = _save_options(spec, args)
    eigen = spec.raw.get("eigen")
    if eigen is None:
        raise ConfigurationError("bound runs need an [eigen] section with 'stop'")
    sys_ = cfg.build_system(spec)
    result = stationary.solve_bound_states(
        sys_,
        eigen["stop"],
        sparsity_threshold=eigen.get("sparsity_threshold", 0.0),
        dim_cap=eigen.get("dim_cap", stationary.DIM_CAP_DEFAULT),
    )
    records = stationary.expectations_bound(result, sys_)
    header = ["n", "energy"] + _expect_header(spec.n_channels, spec.grid.ndim)[2:]
    rows = [
        [n, e] + _expect_row(r)[2:]
        for n, (e, r) in enumerate(zip(result.energies, records))
    ]
    _write_csv(os.path.join(out_dir, "energies.csv"), header, rows)
    log.info("bound: %d states via %s path", len(result.energies), result.method)
    for n, e in enumerate(result.energies):
        log.info("  E_%d = %s", n, _fmt(e))
    if export:
        with CheckpointWriter(
            os.path.join(out_dir, stem), spec.grid, spec.n_channels,
            meta={"run": "bound", "config": spec.path},
        ) as writer:
            for n, psi in enumerate(result.states):
                writer.append(n, 0.0, psi)
    if frames:
        plots.plot_bound_levels(
            result.energies, os.path.join(out_dir, f"{stem}_levels.png")
        )
    return 0


def _propagation_pieces(spec):
    sys_ = cfg.build_system(spec)
    psi0 = cfg.build_initial(spec, sys_)
    time_grid = cfg.build_time_grid(spec)
    name, cheby = cfg.build_propagator_settings(spec)
    pulses = cfg.build_pulses(spec)
    return sys_, psi0, time_grid, name, cheby, pulses


def run_propa(spec, args, out_dir):
    stem, export, frames, representation = _save_options(spec, args)
    sys_, psi0, time_grid, name, cheby, pulses = _propagation_pieces(spec)
    if name == "cheby_imag":
        raise ConfigurationError(
            "propagator.name = 'cheby_imag' is for relax runs; "
            "use 'cheby_real' or a short-time propagator for propa"
        )
    writer = None
    if export:
        writer = CheckpointWriter(
            os.path.join(out_dir, stem), spec.grid, spec.n_channels,
            meta={"run": "propa", "config": spec.path},
        )
    frame_dir = os.path.join(out_dir, "frames")
    if frames:
        os.makedirs(frame_dir, exist_ok=True)

    def callback(step, t, psi):
        if writer is not None:
            writer.append(step, t, psi)
        if frames:
            plots.render_curve(
                spec.grid, psi.channels,
                os.path.join(frame_dir, f"{stem}_{step:06d}.png"),
                representation=representation, t=t,
            )

    try:
        records = propagators.propagate(
            sys_, psi0, time_grid, propagator=name, pulses=pulses,
            cheby=cheby, step_callback=callback,
        )
    finally:
        if writer is not None:
            writer.close()
    _write_csv(
        os.path.join(out_dir, "expect.csv"),
        _expect_header(spec.n_channels, spec.grid.ndim),
        [_expect_row(r) for r in records],
    )
    plots.plot_expect(records, os.path.join(out_dir, f"{stem}_expect.png"))
    for r in (records[0], records[-1]):
        log.info(
            "t = %s  norm = %s  total = %s", _fmt(r.t), _fmt(r.norm), _fmt(r.total)
        )
    return 0


def run_relax(spec, args, out_dir):
    stem, export, frames, _ = _save_options(spec, args)
    sys_, psi0, time_grid, name, cheby, _pulses = _propagation_pieces(spec)
    if name not in ("cheby_imag", "strang"):
        log.info("relax ignores propagator.name = %r (always Chebychev in "
                 "imaginary time)", name)
    if cheby is not None and cheby.mode != "imag":
        cheby = None
    tol = spec.raw.get("relax", {}).get("tol", 1e-10)
    psi, energy, energies = propagators.relax(
        sys_, psi0, time_grid, cheby=cheby, tol=tol
    )
    _write_csv(
        os.path.join(out_dir, "energies.csv"),
        ["step", "energy"],
        list(enumerate(energies)),
    )
    log.info(
        "relax: converged energy %s after %d main steps", _fmt(energy),
        len(energies) - 1,
    )
    if export:
        with CheckpointWriter(
            os.path.join(out_dir, stem), spec.grid, spec.n_channels,
            meta={"run": "relax", "config": spec.path},
        ) as writer:
            writer.append(0, 0.0, psi)
    if frames:
        plots.render_curve(
            spec.grid, psi.channels, os.path.join(out_dir, f"{stem}_final.png")
        )
    return 0


def _set_by_path(raw, dotted, value):
    node = raw
    keys = dotted.split(".")
    for i, key in enumerate(keys):
        last = i == len(keys) - 1
        if isinstance(node, list):
            try:
                idx = int(key) - 1
            except ValueError:
                raise ConfigurationError(
                    f"sweep.parameter: {key!r} must be a 1-based index into a list"
                ) from None
            if not 0 <= idx < len(node):
                raise ConfigurationError(
                    f"sweep.parameter: index {key} out of range in {dotted!r}"
                )
            if last:
                node[idx] = value
            else:
                node = node[idx]
        elif isinstance(node, dict):
            if key not in node:
                raise ConfigurationError(
                    f"sweep.parameter: {dotted!r} does not resolve "
                    f"(missing {key!r})"
                )
            if last:
                node[key] = value
            else:
                node = node[key]
        else:
            raise ConfigurationError(
                f"sweep.parameter: {dotted!r} descends into a scalar at {key!r}"
            )


def run_sweep(spec, args, out_dir):
    sweep = spec.raw.get("sweep")
    if sweep is None:
        raise ConfigurationError("sweep runs need a [sweep] section")
    parameter = sweep["parameter"]
    values = sweep["values"]
    observable = sweep.get("observable", "total")
    if observable not in ("total", "norm"):
        raise ConfigurationError(
            f"sweep.observable must be 'total' or 'norm', got {observable!r}"
        )

    def one_point(i, value):
        point_dir = os.path.join(out_dir, f"point_{i}")
        os.makedirs(point_dir, exist_ok=True)
        raw = copy.deepcopy(spec.raw)
        raw.pop("sweep", None)
        _set_by_path(raw, parameter, value)
        point_spec = cfg.RunSpec(path=spec.path, raw=raw, grid=spec.grid,
                                 n_channels=spec.n_channels)
        sys_, psi0, time_grid, name, cheby, pulses = _propagation_pieces(point_spec)
        records = propagators.propagate(
            sys_, psi0, time_grid, propagator=name, pulses=pulses, cheby=cheby
        )
        _write_csv(
            os.path.join(point_dir, "expect.csv"),
            _expect_header(point_spec.n_channels, point_spec.grid.ndim),
            [_expect_row(r) for r in records],
        )
        final = records[-1]
        return final.total if observable == "total" else final.norm

    rows = []
    n_failed = 0
    workers = max(1, args.threads)
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {
            i: pool.submit(one_point, i, v) for i, v in enumerate(values)
        }
        for i, v in enumerate(values):
            try:
                result = futures[i].result()
                rows.append([parameter, v, "ok", result])
            except Exception as exc:  # per-point failures recorded, sweep continues
                n_failed += 1
                log.info("sweep point %d (%s = %r) failed: %s", i, parameter, v, exc)
                rows.append([parameter, v, "failed", ""])
    _write_csv(
        os.path.join(out_dir, "sweep.csv"),
        ["parameter", "value", "status", observable],
        rows,
    )
    log.info("sweep: %d points, %d failed", len(values), n_failed)
    return 0


REPLAY_KINDS = ("curve", "wigner", "flux", "reduced")


def run_replay(spec, args, out_dir):
    stem, _export, frames, representation = _save_options(spec, args)
    kind = args.kind or spec.raw.get("save", {}).get("kind", "curve")
    if kind not in REPLAY_KINDS:
        raise ConfigurationError(
            f"replay kind must be one of {REPLAY_KINDS}, got {kind!r}"
        )
    grid = spec.grid
    if kind == "curve" and grid.ndim != 1:
        raise ConfigurationError(
            f"curve replay needs a 1-dof grid, this run has {grid.ndim} dofs"
        )
    if kind == "wigner" and (grid.ndim != 1 or grid.dofs[0].kind != "fft"):
        raise ConfigurationError("wigner replay needs a 1-dof fft grid")
    if kind == "flux" and grid.ndim > 2:
        raise ConfigurationError(
            f"flux replay needs a 1- or 2-dof fft grid, this run has "
            f"{grid.ndim} dofs"
        )
    sys_ = cfg.build_system(spec)
    header, frame_iter = load_checkpoints(os.path.join(out_dir, stem))
    if tuple(header["shape"]) != grid.shape or header["n_channels"] != spec.n_channels:
        raise CheckpointError(
            f"checkpoint geometry {header['shape']} x {header['n_channels']} "
            f"does not match the config grid {list(grid.shape)} x {spec.n_channels}"
        )
    replay_dir = os.path.join(out_dir, "replay")
    os.makedirs(replay_dir, exist_ok=True)
    want_png = not args.no_frames
    purities = []
    n_frames = 0
    for index, t, channels in frame_iter:
        psi = WaveFunction(channels, grid)
        base = os.path.join(replay_dir, f"{stem}_{kind}_{index:06d}")
        if kind == "curve":
            g = grid.dofs[0]
            if representation == "fbr":
                data = np.stack([np.abs(g.to_fbr(c)) ** 2 for c in channels])
            else:
                data = np.stack([np.abs(c) ** 2 for c in channels])
            np.save(base + ".npy", data)
            if want_png:
                plots.render_curve(grid, channels, base + ".png",
                                   representation=representation, t=t)
        elif kind == "wigner":
            w = observe.wigner(psi)
            np.save(base + ".npy", w)
            if want_png:
                plots.render_wigner(w, grid, base + ".png", t=t)
        elif kind == "flux":
            j = observe.flux(sys_, psi)
            np.save(base + ".npy", np.stack(j))
            if want_png:
                plots.render_flux(grid, j, base + ".png", t=t)
        else:  # reduced
            purity_row = [t]
            for k in range(grid.ndim):
                rho, purity = observe.reduced_density(psi, k)
                np.save(f"{base}_dof{k + 1}.npy", rho)
                purity_row.append(purity)
                if want_png:
                    plots.render_reduced(
                        rho, k, f"{base}_dof{k + 1}.png", purity=purity, t=t
                    )
            purities.append(purity_row)
        n_frames += 1
    if kind == "reduced":
        _write_csv(
            os.path.join(replay_dir, "purity.csv"),
            ["t"] + [f"purity_{k + 1}" for k in range(grid.ndim)],
            purities,
        )
    log.info("replay: wrote %d %s frame(s) to %s", n_frames, kind, replay_dir)
    return 0


# -- entry point ------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="qdynkit",
        description="Grid-based quantum dynamics: batch solver and reporting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("bound", "solve the time-independent problem for bound states"),
        ("propa", "propagate the time-dependent problem"),
        ("relax", "imaginary-time relaxation to the ground state"),
        ("sweep", "run a parameter sweep of propagations"),
        ("replay", "render frames from saved wavefunctions"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument(
            "--out-dir",
            default=None,
            help="output directory (default: $QDYNKIT_OUT or '.')",
        )
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for sweep points")
        p.add_argument("--no-frames", action="store_true",
                       help="suppress PNG rendering")
        if name == "replay":
            p.add_argument("--kind", choices=REPLAY_KINDS, default=None,
                           help="frame kind (default from [save] or 'curve')")
    return parser


_DISPATCH = {
    "bound": run_bound,
    "propa": run_propa,
    "relax": run_relax,
    "sweep": run_sweep,
    "replay": run_replay,
}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    out_dir = args.out_dir or os.environ.get("QDYNKIT_OUT") or "."
    try:
        os.makedirs(out_dir, exist_ok=True)
        spec = cfg.parse_config(args.config)
        stem = spec.raw.get("save", {}).get("stem", "run")
        _setup_logging(out_dir, stem)
        _echo_config(spec)
        return _DISPATCH[args.command](spec, args, out_dir)
    except NumericError as exc:
        log.error("numeric error: %s", exc)
        return 3
    except (CheckpointError, OSError) as exc:
        log.error("i/o error: %s", exc)
        return 4
    except (ConfigurationError, UnsupportedError) as exc:
        log.error("configuration error: %s", exc)
        return 2
    except QdynError as exc:
        log.error("error: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
