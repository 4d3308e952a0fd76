"""TDSE integrators, pulsed fields, and the propagation/relaxation drivers.

Three real-time steppers are provided: second-order differencing, operator
splitting (Trotter and Strang), and a real-time Chebychev polynomial
expansion.  The imaginary-time Chebychev variant drives the relaxation
method for ground (and, via projection, excited) states.

The absorber is never part of the propagated Hamiltonian; the driver applies
``exp(-W dt_main)`` after each main step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import ive, jv

from . import observe
from .errors import (
    ConfigurationError,
    NumericError,
    UnsupportedError,
)
from .operators import TabulatedFunction, load_tabulated
from .system import SystemSpec, WaveFunction, apply_hamiltonian

log = logging.getLogger(__name__)

__all__ = [
    "TimeGrid",
    "Pulse",
    "ChebyParams",
    "field_value",
    "step_sod",
    "step_split",
    "cheby_coefficients",
    "step_cheby",
    "spectral_bounds",
    "apply_nip",
    "propagate",
    "relax",
    "relax_excited",
]

PULSE_SHAPES = ("sin2", "gauss", "rect", "tabulated")


@dataclass(frozen=True)
class TimeGrid:
    """Main/sub time stepping: observables after each main step."""

    main_delta: float
    main_stop: int
    sub_n: int = 1

    def __post_init__(self):
        if self.main_delta <= 0:
            raise ConfigurationError(f"main_delta must be positive, got {self.main_delta}")
        if self.main_stop < 1:
            raise ConfigurationError(f"main_stop must be >= 1, got {self.main_stop}")
        if self.sub_n < 1:
            raise ConfigurationError(f"sub_n must be >= 1, got {self.sub_n}")

    @property
    def sub_delta(self):
        return self.main_delta / self.sub_n


@dataclass(frozen=True)
class Pulse:
    """One pulse of the semiclassical field F(t), possibly chirped."""

    shape: str = "sin2"
    delay: float = 0.0
    fwhm: float = 1.0
    ampli: float = 0.0
    frequ: float = 0.0
    chirp: float = 0.0
    chirp2: float = 0.0
    phase: float = 0.0
    table: Optional[TabulatedFunction] = None
    file: Optional[str] = None

    def __post_init__(self):
        if self.shape not in PULSE_SHAPES:
            raise ConfigurationError(
                f"unknown pulse shape {self.shape!r}; choose from {PULSE_SHAPES}"
            )
        if self.shape != "tabulated" and self.fwhm <= 0:
            raise ConfigurationError(f"fwhm must be positive, got {self.fwhm}")
        if self.shape == "tabulated" and self.table is None:
            if self.file is None:
                raise ConfigurationError("tabulated pulse needs a file")
            object.__setattr__(self, "table", load_tabulated(self.file))

    def envelope(self, s):
        if self.shape == "sin2":
            if abs(s) >= self.fwhm:
                return 0.0
            return np.cos(np.pi * s / (2.0 * self.fwhm)) ** 2
        if self.shape == "gauss":
            return np.exp(-4.0 * np.log(2.0) * (s / self.fwhm) ** 2)
        if self.shape == "rect":
            return 1.0 if abs(s) <= self.fwhm / 2.0 else 0.0
        raise UnsupportedError(f"no analytic envelope for shape {self.shape!r}")

    def __call__(self, t):
        s = t - self.delay
        if self.shape == "tabulated":
            return float(self.table(s))
        g = self.envelope(s)
        if g == 0.0:
            return 0.0
        omega = self.frequ + self.chirp * s + 0.5 * self.chirp2 * s**2
        return self.ampli * g * np.cos(omega * s + self.phase)


def field_value(pulses: Sequence[Pulse], t) -> float:
    """Total field at time t: sum over pulses."""
    return float(sum(p(t) for p in pulses))


@dataclass(frozen=True)
class ChebyParams:
    """Settings for polynomial propagation."""

    precision: float = 1e-8
    mode: str = "real"
    e_min: Optional[float] = None
    e_max: Optional[float] = None
    delta_e_truncate: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.precision < 1:
            raise ConfigurationError(
                f"precision must be in (0, 1), got {self.precision}"
            )
        if self.mode not in ("real", "imag"):
            raise ConfigurationError(f"mode must be 'real' or 'imag', got {self.mode!r}")


# -- field-free spectral machinery ------------------------------------------


def spectral_bounds(sys: SystemSpec, delta_e_truncate=None):
    """(E_min, E_max) covering the DVR spectrum of T + V.

    With ``delta_e_truncate`` the range is replaced by
    ``[E_min, E_min + delta_e_truncate]``; the Chebychev stepper then clips
    the kinetic spectrum and the potential so the propagated operator is
    guaranteed to fit the truncated window.
    """
    e_min = sys.potential_min()
    if delta_e_truncate is not None:
        if delta_e_truncate <= 0:
            raise ConfigurationError("delta_e_truncate must be positive")
        return e_min, e_min + delta_e_truncate
    kin = sum(g.kinetic_max() for g in sys.grid.dofs)
    return e_min, sys.potential_max() + kin


class _ChebyWorkspace:
    """Scaled-Hamiltonian application with guaranteed spectral containment.

    If the requested window is narrower than the natural spectral range, the
    kinetic spectra and the potential are clipped, splitting the window
    between them in proportion to their natural extents.  Dynamics is
    unaffected as long as the wavepacket stays clear of the clipped regions,
    which is the regime where truncation is useful in the first place.
    """

    def __init__(self, sys: SystemSpec, params: ChebyParams):
        self.sys = sys
        if params.e_min is not None and params.e_max is not None:
            e_min, e_max = params.e_min, params.e_max
        else:
            e_min, e_max = spectral_bounds(sys, params.delta_e_truncate)
        if not e_max > e_min:
            raise ConfigurationError("spectral window must have e_max > e_min")
        self.e_min, self.e_max = float(e_min), float(e_max)
        self.delta_e = self.e_max - self.e_min

        pot_extent = sys.potential_max() - self.e_min
        kin_extents = [g.kinetic_max() for g in sys.grid.dofs]
        natural = pot_extent + sum(kin_extents)
        self.kin_clips = [None] * sys.grid.ndim
        self.pot_clip = None
        if natural > self.delta_e and natural > 0:
            scale = self.delta_e / natural
            self.pot_clip = self.e_min + pot_extent * scale
            self.kin_clips = [k * scale for k in kin_extents]
            log.debug(
                "spectral truncation active: pot clipped at %.6g, "
                "kinetic clipped at %s",
                self.pot_clip,
                [f"{k:.6g}" for k in self.kin_clips],
            )
        self._pot_channels = self._clipped_potential()

    def _clipped_potential(self):
        sys = self.sys
        if not sys.pot:
            return None
        if sys.n_channels == 1:
            v = sys.pot.get((0, 0))
            if v is None:
                return None
            if self.pot_clip is not None:
                v = np.minimum(v, self.pot_clip)
            return {"diag": [v]}
        vals, vecs = sys.potential_eig()
        if self.pot_clip is not None:
            vals = np.minimum(vals, self.pot_clip)
        mat = np.einsum("...ik,...k,...jk->...ij", vecs, vals, vecs)
        return {"matrix": mat}

    def apply_scaled(self, channels):
        """(2 (H_clip - e_min) / delta_e - 1) applied to channel tensors."""
        sys = self.sys
        out = [np.zeros_like(c) for c in channels]
        for c, chan in enumerate(channels):
            for axis, g in enumerate(sys.grid.dofs):
                out[c] += g.apply_kinetic(chan, axis=axis, clip=self.kin_clips[axis])
        pot = self._pot_channels
        if pot is not None:
            if "diag" in pot:
                out[0] += pot["diag"][0] * channels[0]
            else:
                stacked = np.stack(channels, axis=-1)
                vp = np.einsum("...ij,...j->...i", pot["matrix"], stacked)
                for c in range(len(channels)):
                    out[c] += vp[..., c]
        scale = 2.0 / self.delta_e
        shift = scale * self.e_min + 1.0
        for c in range(len(channels)):
            out[c] = scale * out[c] - shift * channels[c]
        return out


def cheby_coefficients(alpha, precision, mode="real"):
    """Chebychev expansion coefficients of the propagator exponential.

    real: exp(-i alpha x) -> c_0 = J_0(alpha), c_n = 2 J_n(alpha)
    imag: exp(-alpha x)   -> c_0 = e^-alpha I_0(alpha), c_n = 2 e^-alpha I_n(alpha)

    The sequence is truncated at the first coefficient below `precision`.
    """
    if alpha <= 0:
        raise ConfigurationError(f"alpha must be positive, got {alpha}")
    if not 0 < precision < 1:
        raise ConfigurationError(f"precision must be in (0, 1), got {precision}")
    cap = int(10 * alpha + 100)
    bessel = jv if mode == "real" else ive
    coeffs = []
    for n in range(cap + 1):
        c = float(bessel(n, alpha))
        if n > 0:
            c *= 2.0
        if abs(c) < precision and n > 0:
            return np.array(coeffs)
        coeffs.append(c)
    raise NumericError(
        f"Chebychev coefficients did not reach precision {precision} within "
        f"{cap} terms (alpha={alpha}); the spectral range estimate may be too small"
    )


def step_cheby(sys: SystemSpec, psi: WaveFunction, dt, params: ChebyParams,
               workspace: Optional[_ChebyWorkspace] = None) -> WaveFunction:
    """One Chebychev step exp(-i H dt) (real) or exp(-H dt) (imag)."""
    if workspace is None:
        workspace = _ChebyWorkspace(sys, params)
    alpha = workspace.delta_e * dt / 2.0
    coeffs = cheby_coefficients(alpha, params.precision, params.mode)
    # phi_n = (-i)^n T_n(Hs) psi in real mode, (-1)^n T_n(Hs) psi in imag mode
    factor = -1j if params.mode == "real" else -1.0
    back = 1.0 if params.mode == "real" else -1.0

    phi_prev = [c.copy() for c in psi.channels]
    acc = [coeffs[0] * c for c in phi_prev]
    if len(coeffs) > 1:
        phi = [factor * c for c in workspace.apply_scaled(phi_prev)]
        for c in range(len(acc)):
            acc[c] += coeffs[1] * phi[c]
        for n in range(2, len(coeffs)):
            hs = workspace.apply_scaled(phi)
            phi_next = [2.0 * factor * h + back * p for h, p in zip(hs, phi_prev)]
            for c in range(len(acc)):
                acc[c] += coeffs[n] * phi_next[c]
            phi_prev, phi = phi, phi_next

    if params.mode == "real":
        phase = np.exp(-1j * (workspace.e_max + workspace.e_min) * dt / 2.0)
    else:
        # e^-alpha is already folded into the scaled Bessel coefficients
        phase = np.exp(-workspace.e_min * dt)
    return WaveFunction([phase * a for a in acc], psi.grid)


# -- short-time steppers ----------------------------------------------------


def step_sod(sys: SystemSpec, psi_prev: WaveFunction, psi_curr: WaveFunction,
             t, dt, pulses: Sequence[Pulse] = ()) -> WaveFunction:
    """Second-order differencing: psi(t+dt) = psi(t-dt) - 2i dt H(t) psi(t)."""
    f = field_value(pulses, t) if pulses else 0.0
    h_psi = apply_hamiltonian(sys, psi_curr, f)
    channels = [
        p - 2j * dt * h for p, h in zip(psi_prev.channels, h_psi.channels)
    ]
    return WaveFunction(channels, psi_curr.grid)


def step_split(sys: SystemSpec, psi: WaveFunction, t, dt, order=3,
               pulses: Sequence[Pulse] = ()) -> WaveFunction:
    """Operator splitting: order=2 is Trotter, order=3 is Strang."""
    if order not in (2, 3):
        raise ConfigurationError(f"order must be 2 (Trotter) or 3 (Strang), got {order}")
    channels = [c.copy() for c in psi.channels]
    f_t = field_value(pulses, t) if pulses else 0.0
    if order == 2:
        _apply_pot_phase(sys, channels, dt)
        _apply_perm_dipole_phase(sys, channels, f_t, dt)
        _apply_trans_dipole_phase(sys, channels, f_t, dt)
        _apply_kinetic_phase(sys, channels, dt)
    else:
        f_next = field_value(pulses, t + dt) if pulses else 0.0
        _apply_pot_phase(sys, channels, dt / 2.0)
        _apply_perm_dipole_phase(sys, channels, f_t, dt / 2.0)
        _apply_trans_dipole_phase(sys, channels, f_t, dt / 2.0)
        _apply_kinetic_phase(sys, channels, dt)
        _apply_trans_dipole_phase(sys, channels, f_next, dt / 2.0)
        _apply_perm_dipole_phase(sys, channels, f_next, dt / 2.0)
        _apply_pot_phase(sys, channels, dt / 2.0)
    return WaveFunction(channels, psi.grid)


def _apply_pot_phase(sys, channels, dt):
    if not sys.pot:
        return
    if sys.n_channels == 1:
        v = sys.pot.get((0, 0))
        if v is not None:
            channels[0] *= np.exp(-1j * v * dt)
        return
    vals, vecs = sys.potential_eig()
    stacked = np.stack(channels, axis=-1)
    rotated = np.einsum("...ij,...i->...j", vecs, stacked)
    rotated *= np.exp(-1j * vals * dt)
    back = np.einsum("...ij,...j->...i", vecs, rotated)
    for c in range(len(channels)):
        channels[c][...] = back[..., c]


def _apply_perm_dipole_phase(sys, channels, f, dt):
    if f == 0.0 or not sys.dip_p:
        return
    for i, mu in sys.dip_p.items():
        channels[i] *= np.exp(1j * f * mu * dt)


def _apply_trans_dipole_phase(sys, channels, f, dt):
    if f == 0.0 or not sys.dip_t:
        return
    vals, vecs = sys.transition_dipole_eig()
    stacked = np.stack(channels, axis=-1)
    rotated = np.einsum("...ij,...i->...j", vecs, stacked)
    rotated *= np.exp(1j * f * vals * dt)
    back = np.einsum("...ij,...j->...i", vecs, rotated)
    for c in range(len(channels)):
        channels[c][...] = back[..., c]


def _apply_kinetic_phase(sys, channels, dt):
    for c in range(len(channels)):
        chan = channels[c]
        for axis, g in enumerate(sys.grid.dofs):
            if g.kind == "fft":
                spec = np.fft.fft(chan, axis=axis)
                shape = [1] * spec.ndim
                shape[axis] = -1
                spec *= np.exp(-1j * g.kinetic_spectrum * dt).reshape(shape)
                chan = np.fft.ifft(spec, axis=axis)
            else:
                coeff = g.to_fbr(chan, axis=axis)
                phase = g.kinetic_phase(dt)
                if phase.ndim == 2:
                    coeff = np.moveaxis(
                        np.tensordot(phase, coeff, axes=([1], [axis])), 0, axis
                    )
                else:
                    shape = [1] * coeff.ndim
                    shape[axis] = -1
                    coeff *= phase.reshape(shape)
                chan = g.from_fbr(coeff, axis=axis)
        channels[c] = chan


def apply_nip(sys: SystemSpec, psi: WaveFunction, dt_main) -> WaveFunction:
    """Pointwise damping exp(-W dt) on every channel; norm never increases."""
    if sys.nip is None:
        return psi
    damp = np.exp(-sys.nip * dt_main)
    return WaveFunction([damp * c for c in psi.channels], psi.grid)


# -- drivers ----------------------------------------------------------------

PROPAGATOR_NAMES = ("sod", "trotter", "strang", "cheby_real")


def propagate(
    sys: SystemSpec,
    psi0: WaveFunction,
    time_grid: TimeGrid,
    propagator="strang",
    pulses: Sequence[Pulse] = (),
    cheby: Optional[ChebyParams] = None,
    step_callback=None,
):
    """Run main steps, apply the NIP after each, record observables.

    Returns the list of ExpectationRecord, one per main step plus the
    initial state.  ``step_callback(step, t, psi)`` runs after each record.
    """
    if propagator not in PROPAGATOR_NAMES:
        raise ConfigurationError(
            f"unknown propagator {propagator!r}; choose from {PROPAGATOR_NAMES}"
        )
    if propagator == "cheby_real":
        if pulses and any(p.ampli != 0 or p.shape == "tabulated" for p in pulses):
            raise UnsupportedError(
                "the Chebychev propagator requires a time-independent "
                "Hamiltonian; use splitting or SOD with pulses"
            )
        cheby = cheby or ChebyParams(mode="real")
        if cheby.mode != "real":
            raise ConfigurationError("propagate needs a real-mode ChebyParams")
        workspace = _ChebyWorkspace(sys, cheby)

    psi = psi0.copy()
    records = [observe.expect(sys, psi, psi0, t=0.0)]
    if step_callback is not None:
        step_callback(0, 0.0, psi)

    dt = time_grid.sub_delta
    psi_prev = None
    for step in range(1, time_grid.main_stop + 1):
        t0 = (step - 1) * time_grid.main_delta
        if propagator == "cheby_real":
            psi = step_cheby(sys, psi, time_grid.main_delta, cheby, workspace)
        else:
            for sub in range(time_grid.sub_n):
                t = t0 + sub * dt
                if propagator == "sod":
                    if psi_prev is None:
                        # bootstrap: one backward Strang step gives psi(-dt)
                        psi_prev = step_split(sys, psi, 0.0, -dt, order=3, pulses=pulses)
                    psi_next = step_sod(sys, psi_prev, psi, t, dt, pulses)
                    psi_prev, psi = psi, psi_next
                else:
                    order = 2 if propagator == "trotter" else 3
                    psi = step_split(sys, psi, t, dt, order=order, pulses=pulses)
        t_now = step * time_grid.main_delta
        if sys.nip is not None:
            psi = apply_nip(sys, psi, time_grid.main_delta)
            psi_prev = None if propagator == "sod" else psi_prev
        records.append(observe.expect(sys, psi, psi0, t=t_now))
        if step_callback is not None:
            step_callback(step, t_now, psi)
    return records


def relax(
    sys: SystemSpec,
    psi0: WaveFunction,
    time_grid: TimeGrid,
    cheby: Optional[ChebyParams] = None,
    tol=1e-10,
    project_out: Sequence[WaveFunction] = (),
    step_callback=None,
):
    """Imaginary-time relaxation towards the lowest state with overlap.

    Returns ``(psi, energy, energies)`` where ``energies`` holds <H> after
    every main step.  States in ``project_out`` are removed after each
    renormalization (excited-state relaxation).
    """
    cheby = cheby or ChebyParams(mode="imag")
    if cheby.mode != "imag":
        raise ConfigurationError("relax needs an imag-mode ChebyParams")
    workspace = _ChebyWorkspace(sys, cheby)

    psi = psi0.copy()
    _project(psi, project_out)
    psi.normalize()
    energy = _energy(sys, psi)
    energies = [energy]
    for _ in range(time_grid.main_stop):
        psi = step_cheby(sys, psi, time_grid.main_delta, cheby, workspace)
        _project(psi, project_out)
        psi.normalize()
        prev, energy = energy, _energy(sys, psi)
        energies.append(energy)
        if step_callback is not None:
            step_callback(len(energies) - 1, energy, psi)
        if abs(energy - prev) < tol * max(abs(energy), 1e-300):
            break
    return psi, energy, energies


def relax_excited(
    sys: SystemSpec,
    psi0: WaveFunction,
    time_grid: TimeGrid,
    k: int,
    lower_states: Sequence[WaveFunction],
    cheby: Optional[ChebyParams] = None,
    tol=1e-10,
):
    """Relax in the subspace orthogonal to the k lower states."""
    if k < 1:
        raise ConfigurationError("relax_excited needs k >= 1; use relax for k = 0")
    if len(lower_states) != k:
        raise ConfigurationError(f"expected {k} lower states, got {len(lower_states)}")
    psi, energy, energies = relax(
        sys, psi0, time_grid, cheby=cheby, tol=tol, project_out=lower_states
    )
    worst = max(abs(psi.overlap(s)) for s in lower_states)
    if worst > 1e-6:
        log.warning(
            "relax_excited(k=%d): residual overlap with lower states %.3e "
            "exceeds 1e-6; accumulated projection error", k, worst,
        )
    return psi, energy, energies


def _project(psi: WaveFunction, states):
    for s in states:
        c = s.overlap(psi)
        for a, b in zip(psi.channels, s.channels):
            a -= c * b


def _energy(sys, psi):
    return float(np.real(psi.overlap(apply_hamiltonian(sys, psi))))
