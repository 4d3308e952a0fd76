"""Declarative TOML run configuration.

Hierarchical keys mirror the operator layout, e.g.::

    [grids.1]
    kind = "fft"
    n_pts = 256
    x_min = 0.7
    x_max = 10.0
    mass = 1728.539

    [hamilt.pot.1.1]
    model = "morse"
    d_e = 0.1994
    r_e = 1.821
    alf = 1.189

Channel and dof indices are 1-based in the file.  Numeric values may be
unit-suffixed strings (``"10 fs"``, ``"3424.19 cm-1"``, ``"328.5 MV/cm"``)
which are converted to atomic units at parse time.  Everything else is
validated eagerly: unknown keys, missing fields and type errors raise a
ConfigurationError naming the offending field.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigurationError
from .grids import (
    ProductGrid,
    build_fft_grid,
    build_hermite_grid,
    build_legendre_grid,
)
from .operators import MODEL_REGISTRY
from .propagators import PROPAGATOR_NAMES, ChebyParams, Pulse, TimeGrid
from .system import (
    SystemSpec,
    WaveFunction,
    assemble,
    init_gauss,
    init_morse_eigenstate,
    product_state,
)

__all__ = ["RunSpec", "parse_config", "UNIT_FACTORS"]

# unit suffix -> factor into atomic units
UNIT_FACTORS = {
    "au": 1.0,
    "fs": 41.341373,
    "cm-1": 1.0 / 219474.63,
    "mv/cm": 1.0 / 5142.2064,
}


def _num(value, where):
    """A float, converting '500 fs'-style unit-suffixed strings."""
    if isinstance(value, bool):
        raise ConfigurationError(f"{where}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        parts = value.split()
        if len(parts) == 2:
            try:
                raw = float(parts[0])
            except ValueError:
                raise ConfigurationError(
                    f"{where}: cannot parse number from {value!r}"
                ) from None
            unit = parts[1].lower()
            if unit not in UNIT_FACTORS:
                raise ConfigurationError(
                    f"{where}: unknown unit {parts[1]!r}; "
                    f"supported: {sorted(UNIT_FACTORS)}"
                )
            return raw * UNIT_FACTORS[unit]
        raise ConfigurationError(
            f"{where}: expected a number or 'value unit' string, got {value!r}"
        )
    raise ConfigurationError(f"{where}: expected a number, got {type(value).__name__}")


def _require(table, key, where):
    if key not in table:
        raise ConfigurationError(f"missing required key {where}.{key}")
    return table[key]


def _check_keys(table, allowed, where):
    unknown = set(table) - set(allowed)
    if unknown:
        raise ConfigurationError(
            f"unknown key(s) {sorted(unknown)} in [{where}]; "
            f"allowed: {sorted(allowed)}"
        )


def _int(value, where):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"{where}: expected an integer, got {value!r}")
    return value


@dataclass
class RunSpec:
    """Fully validated and unit-resolved run configuration."""

    path: str
    raw: dict
    grid: ProductGrid = field(repr=False, default=None)
    n_channels: int = 1

    def echo(self):
        """Resolved configuration as sorted key=value lines for the log."""
        lines = []

        def walk(prefix, node):
            if isinstance(node, dict):
                for k in sorted(node):
                    walk(f"{prefix}.{k}" if prefix else str(k), node[k])
            elif isinstance(node, list):
                for i, item in enumerate(node):
                    walk(f"{prefix}[{i}]", item)
            else:
                lines.append(f"{prefix} = {node!r}")

        walk("", self.raw)
        return lines


# -- section parsers --------------------------------------------------------

_GRID_KEYS = {
    "fft": {"kind", "n_pts", "x_min", "x_max", "mass"},
    "hermite": {"kind", "n_pts", "mass", "omega", "r_e"},
    "legendre": {"kind", "n_pts", "mass", "radius", "m_quantum"},
}


def _parse_grid(table, where):
    kind = _require(table, "kind", where)
    if kind not in _GRID_KEYS:
        raise ConfigurationError(
            f"{where}.kind: unknown grid kind {kind!r}; "
            f"choose from {sorted(_GRID_KEYS)}"
        )
    _check_keys(table, _GRID_KEYS[kind], where)
    n = _int(_require(table, "n_pts", where), f"{where}.n_pts")
    mass = _num(_require(table, "mass", where), f"{where}.mass")
    if kind == "fft":
        return build_fft_grid(
            n,
            _num(_require(table, "x_min", where), f"{where}.x_min"),
            _num(_require(table, "x_max", where), f"{where}.x_max"),
            mass,
        )
    if kind == "hermite":
        return build_hermite_grid(
            n,
            mass,
            _num(_require(table, "omega", where), f"{where}.omega"),
            _num(table.get("r_e", 0.0), f"{where}.r_e"),
        )
    return build_legendre_grid(
        n,
        mass,
        _num(_require(table, "radius", where), f"{where}.radius"),
        _int(table.get("m_quantum", 0), f"{where}.m_quantum"),
    )


def _indexed_subtables(table, where):
    """{'1': {...}, '2': {...}} -> [(0, {...}), (1, {...})], validated."""
    out = []
    for key, sub in table.items():
        try:
            idx = int(key)
        except ValueError:
            raise ConfigurationError(
                f"[{where}] keys must be 1-based integers, got {key!r}"
            ) from None
        if idx < 1:
            raise ConfigurationError(f"[{where}.{key}]: indices are 1-based")
        if not isinstance(sub, dict):
            raise ConfigurationError(f"[{where}.{key}] must be a table")
        out.append((idx - 1, sub))
    return sorted(out)


def _parse_model(table, grid: ProductGrid, where):
    """(dof index, callable) entry for the assembly layer."""
    model = _require(table, "model", where)
    if model not in MODEL_REGISTRY:
        raise ConfigurationError(
            f"{where}.model: unknown model {model!r}; "
            f"choose from {sorted(MODEL_REGISTRY)}"
        )
    params = {
        k: (_num(v, f"{where}.{k}") if not isinstance(v, (list, dict)) else v)
        for k, v in table.items()
        if k not in ("model", "dof", "file")
    }
    if "file" in table:
        params["file"] = table["file"]
    if model == "taylor" and "coeffs" in params:
        params["coeffs"] = [
            _num(c, f"{where}.coeffs") for c in table["coeffs"]
        ]
    try:
        func = MODEL_REGISTRY[model](params)
    except KeyError as exc:
        raise ConfigurationError(f"{where}: missing model parameter {exc}") from None
    dof = _int(table.get("dof", 1), f"{where}.dof") - 1
    if not 0 <= dof < grid.ndim:
        raise ConfigurationError(
            f"{where}.dof: {dof + 1} out of range for {grid.ndim} dof(s)"
        )
    return (dof, func)


def _parse_pair_table(table, grid, n_channels, where, diagonal_ok=True):
    """[section.i.j] model tables -> {(i, j): entry} with 0-based keys."""
    out = {}
    for i0, row in _indexed_subtables(table, where):
        if not isinstance(row, dict):
            raise ConfigurationError(f"[{where}.{i0 + 1}] must be a table")
        for j0, sub in _indexed_subtables(row, f"{where}.{i0 + 1}"):
            if not (0 <= i0 < n_channels and 0 <= j0 < n_channels):
                raise ConfigurationError(
                    f"[{where}.{i0 + 1}.{j0 + 1}]: channel index exceeds "
                    f"n_eqs = {n_channels}"
                )
            if not diagonal_ok and i0 == j0:
                raise ConfigurationError(
                    f"[{where}.{i0 + 1}.{j0 + 1}]: only off-diagonal entries allowed"
                )
            out[(i0, j0)] = _parse_model(sub, grid, f"{where}.{i0 + 1}.{j0 + 1}")
    return out


def parse_config(path) -> RunSpec:
    """Read, validate and unit-resolve a TOML run configuration."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: TOML syntax error: {exc}") from exc

    _check_keys(
        raw,
        {"grids", "hamilt", "psi", "time", "propagator", "pulse", "eigen",
         "relax", "save", "sweep"},
        "top level",
    )
    if "grids" not in raw or not raw["grids"]:
        raise ConfigurationError(f"{path}: missing required section [grids]")

    dofs = []
    entries = _indexed_subtables(raw["grids"], "grids")
    for expected, (idx, table) in enumerate(entries):
        if idx != expected:
            raise ConfigurationError(
                f"[grids] indices must be consecutive from 1; missing "
                f"grids.{expected + 1}"
            )
        dofs.append(_parse_grid(table, f"grids.{idx + 1}"))
    grid = ProductGrid(tuple(dofs))

    hamilt = raw.get("hamilt", {})
    _check_keys(hamilt, {"n_eqs", "pot", "nip", "dip_p", "dip_t"}, "hamilt")
    n_channels = _int(hamilt.get("n_eqs", 1), "hamilt.n_eqs")
    if n_channels < 1:
        raise ConfigurationError("hamilt.n_eqs must be >= 1")

    spec = RunSpec(path=str(path), raw=raw, grid=grid, n_channels=n_channels)
    # eager validation of the remaining sections
    build_system(spec)
    if "psi" in raw:
        build_initial(spec)
    if "time" in raw:
        build_time_grid(spec)
    if "propagator" in raw:
        build_propagator_settings(spec)
    build_pulses(spec)
    if "eigen" in raw:
        eigen = raw["eigen"]
        _check_keys(eigen, {"stop", "sparsity_threshold", "dim_cap"}, "eigen")
        _int(_require(eigen, "stop", "eigen"), "eigen.stop")
    if "relax" in raw:
        _check_keys(raw["relax"], {"tol"}, "relax")
    save = raw.get("save", {})
    _check_keys(
        save, {"export", "stem", "frames", "representation", "kind"}, "save"
    )
    if save.get("representation", "dvr") not in ("dvr", "fbr"):
        raise ConfigurationError(
            "save.representation must be 'dvr' or 'fbr', got "
            f"{save.get('representation')!r}"
        )
    if "sweep" in raw:
        sweep = raw["sweep"]
        _check_keys(sweep, {"parameter", "values", "observable"}, "sweep")
        _require(sweep, "parameter", "sweep")
        values = _require(sweep, "values", "sweep")
        if not isinstance(values, list) or not values:
            raise ConfigurationError("sweep.values must be a non-empty list")
    return spec


# -- builders ---------------------------------------------------------------


def build_system(spec: RunSpec) -> SystemSpec:
    hamilt = spec.raw.get("hamilt", {})
    grid, nu = spec.grid, spec.n_channels
    pot = _parse_pair_table(hamilt.get("pot", {}), grid, nu, "hamilt.pot")
    dip_t = _parse_pair_table(
        hamilt.get("dip_t", {}), grid, nu, "hamilt.dip_t", diagonal_ok=False
    )
    dip_p = {}
    for c0, table in _indexed_subtables(hamilt.get("dip_p", {}), "hamilt.dip_p"):
        if c0 >= nu:
            raise ConfigurationError(
                f"[hamilt.dip_p.{c0 + 1}]: channel index exceeds n_eqs = {nu}"
            )
        dip_p[c0] = _parse_model(table, grid, f"hamilt.dip_p.{c0 + 1}")
    nip = None
    if "nip" in hamilt:
        nip = _parse_model(hamilt["nip"], grid, "hamilt.nip")
    return assemble(grid, nu, pot=pot, nip=nip, dip_p=dip_p, dip_t=dip_t)


_INIT_KEYS = {
    "gauss": {"type", "pos_0", "width", "momentum"},
    "morse": {"type", "d_e", "r_e", "alf", "n"},
}


def _parse_init_dof(table, g, where):
    kind = _require(table, "type", where)
    if kind not in _INIT_KEYS:
        raise ConfigurationError(
            f"{where}.type: unknown initial-state type {kind!r}; "
            f"choose from {sorted(_INIT_KEYS)}"
        )
    _check_keys(table, _INIT_KEYS[kind], where)
    if kind == "gauss":
        return init_gauss(
            g,
            _num(_require(table, "pos_0", where), f"{where}.pos_0"),
            _num(_require(table, "width", where), f"{where}.width"),
            _num(table.get("momentum", 0.0), f"{where}.momentum"),
        )
    return init_morse_eigenstate(
        g,
        _num(_require(table, "d_e", where), f"{where}.d_e"),
        _num(_require(table, "r_e", where), f"{where}.r_e"),
        _num(_require(table, "alf", where), f"{where}.alf"),
        g.mass,
        _int(table.get("n", 0), f"{where}.n"),
    )


def build_initial(spec: RunSpec, sys: Optional[SystemSpec] = None) -> WaveFunction:
    psi_cfg = spec.raw.get("psi")
    if psi_cfg is None:
        raise ConfigurationError("missing required section [psi]")
    _check_keys(
        psi_cfg,
        {"channel", "adiabatic", "init"},
        "psi",
    )
    init = psi_cfg.get("init")
    if not init:
        raise ConfigurationError("missing required section [psi.init]")
    amps = [None] * spec.grid.ndim
    entries = _indexed_subtables(init, "psi.init")
    for idx, table in entries:
        if idx >= spec.grid.ndim:
            raise ConfigurationError(
                f"[psi.init.{idx + 1}]: dof index exceeds {spec.grid.ndim} dof(s)"
            )
        amps[idx] = _parse_init_dof(table, spec.grid.dofs[idx], f"psi.init.{idx + 1}")
    for k, a in enumerate(amps):
        if a is None:
            raise ConfigurationError(f"missing [psi.init.{k + 1}] for dof {k + 1}")
    channel = _int(psi_cfg.get("channel", 1), "psi.channel") - 1
    psi = product_state(amps, spec.grid, channel=channel, n_channels=spec.n_channels)
    surface = psi_cfg.get("adiabatic")
    if surface is not None:
        surface = _int(surface, "psi.adiabatic") - 1
        if not 0 <= surface < spec.n_channels:
            raise ConfigurationError(
                f"psi.adiabatic: surface {surface + 1} out of range "
                f"(n_eqs = {spec.n_channels})"
            )
        if sys is None:
            sys = build_system(spec)
        _, vecs = sys.potential_eig()
        tensor = sum(psi.channels)
        psi = WaveFunction(
            [tensor * vecs[..., c, surface] for c in range(spec.n_channels)],
            spec.grid,
        ).normalize()
    return psi


def build_time_grid(spec: RunSpec) -> TimeGrid:
    time_cfg = spec.raw.get("time")
    if time_cfg is None:
        raise ConfigurationError("missing required section [time]")
    _check_keys(time_cfg, {"main_delta", "main_stop", "sub_n"}, "time")
    return TimeGrid(
        main_delta=_num(_require(time_cfg, "main_delta", "time"), "time.main_delta"),
        main_stop=_int(_require(time_cfg, "main_stop", "time"), "time.main_stop"),
        sub_n=_int(time_cfg.get("sub_n", 1), "time.sub_n"),
    )


def build_propagator_settings(spec: RunSpec):
    """(propagator name, ChebyParams or None) from [propagator]."""
    prop_cfg = spec.raw.get("propagator", {})
    _check_keys(
        prop_cfg,
        {"name", "precision", "delta_e_truncate", "e_min", "e_max"},
        "propagator",
    )
    name = prop_cfg.get("name", "strang")
    valid = PROPAGATOR_NAMES + ("cheby_imag",)
    if name not in valid:
        raise ConfigurationError(
            f"propagator.name: unknown propagator {name!r}; "
            f"choose from {sorted(valid)}"
        )
    cheby = None
    if name in ("cheby_real", "cheby_imag"):
        cheby = ChebyParams(
            precision=_num(prop_cfg.get("precision", 1e-8), "propagator.precision"),
            mode="real" if name == "cheby_real" else "imag",
            e_min=(
                _num(prop_cfg["e_min"], "propagator.e_min")
                if "e_min" in prop_cfg else None
            ),
            e_max=(
                _num(prop_cfg["e_max"], "propagator.e_max")
                if "e_max" in prop_cfg else None
            ),
            delta_e_truncate=(
                _num(prop_cfg["delta_e_truncate"], "propagator.delta_e_truncate")
                if "delta_e_truncate" in prop_cfg else None
            ),
        )
    return name, cheby


_PULSE_KEYS = {
    "shape", "delay", "fwhm", "ampli", "frequ", "chirp", "chirp2", "phase", "file",
}


def build_pulses(spec: RunSpec) -> List[Pulse]:
    pulse_cfg = spec.raw.get("pulse", [])
    if isinstance(pulse_cfg, dict):
        pulse_cfg = [pulse_cfg]
    if not isinstance(pulse_cfg, list):
        raise ConfigurationError("[pulse] must be a table or an array of tables")
    pulses = []
    for i, table in enumerate(pulse_cfg):
        where = f"pulse[{i}]"
        if not isinstance(table, dict):
            raise ConfigurationError(f"{where} must be a table")
        _check_keys(table, _PULSE_KEYS, where)
        kwargs: Dict = {"shape": table.get("shape", "sin2")}
        if "file" in table:
            kwargs["file"] = table["file"]
        for key in ("delay", "fwhm", "ampli", "frequ", "chirp", "chirp2", "phase"):
            if key in table:
                kwargs[key] = _num(table[key], f"{where}.{key}")
        pulses.append(Pulse(**kwargs))
    return pulses
