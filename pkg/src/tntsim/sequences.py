"""Pulse sequences: ordered free-evolution, coupled-pulse and rotation segments.

A sequence encodes one experimental run: state preparation, free evolution
(optionally interrupted by a spin echo at half time), and the tomography
rotation.  Segments are immutable; running a sequence is a pure function of
the input state.
"""

import math
from dataclasses import dataclass, field

from .hamiltonian import build_hamiltonian, coupling_hamiltonian, evolve_under
from .spins import rotate

__all__ = [
    "FreeEvolution",
    "CoupledPulse",
    "InstantRotation",
    "TomographyRotation",
    "PulseSequence",
    "run_sequence",
    "tnt_sequence",
    "pulsed_tnt_sequence",
]


@dataclass(frozen=True)
class FreeEvolution:
    """Evolution under chi Jz^2 - Omega Jx + delta Jz for a fixed duration."""

    duration: float
    params: object

    def __post_init__(self):
        if not (self.duration >= 0 and math.isfinite(self.duration)):
            raise ValueError(f"bad segment duration {self.duration}")


@dataclass(frozen=True)
class CoupledPulse:
    """Finite-duration drive about an equatorial axis, nonlinearity active.

    axis_phase is the azimuth of the rotation axis (0 = +x, pi/2 = +y); the
    generator is chi Jz^2 + delta Jz - pulse_omega (cos Jx + sin Jy).
    """

    duration: float
    pulse_omega: float
    axis_phase: float
    params: object
    label: str = ""

    def __post_init__(self):
        if not (self.duration >= 0 and math.isfinite(self.duration)):
            raise ValueError(f"bad segment duration {self.duration}")


@dataclass(frozen=True)
class InstantRotation:
    """Idealized zero-duration rotation exp(-i angle J_axis)."""

    axis: str
    angle: float
    label: str = ""

    def __post_init__(self):
        if self.axis not in ("x", "y", "z"):
            raise ValueError(f"axis must be x, y or z, got {self.axis!r}")


@dataclass(frozen=True)
class TomographyRotation:
    """Read-out rotation about x by the tomography angle alpha."""

    angle: float


@dataclass(frozen=True)
class PulseSequence:
    segments: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not math.isfinite(self.total_duration):
            raise ValueError("sequence duration must be finite")
        self._check_echo_placement()

    @property
    def total_duration(self):
        return sum(getattr(s, "duration", 0.0) for s in self.segments)

    def _check_echo_placement(self):
        """Segments labeled 'echo' must split the surrounding free evolution
        into equal halves."""
        for i, seg in enumerate(self.segments):
            if getattr(seg, "label", "") != "echo":
                continue
            before = sum(
                s.duration for s in self.segments[:i] if isinstance(s, FreeEvolution)
            )
            after = sum(
                s.duration for s in self.segments[i + 1 :] if isinstance(s, FreeEvolution)
            )
            if abs(before - after) > 1e-12 * max(before + after, 1e-30):
                raise ValueError(
                    f"echo segment {i} splits free evolution into {before:g} + {after:g} s"
                )


def run_sequence(state, sequence, dt=None, method="rk4"):
    """Apply every segment in order and return the final state."""
    for seg in sequence.segments:
        if isinstance(seg, FreeEvolution):
            ham = build_hamiltonian(seg.params, state.atom_count)
            state = evolve_under(state, ham, seg.duration, dt=dt, method=method)
        elif isinstance(seg, CoupledPulse):
            ham = coupling_hamiltonian(
                seg.params, state.atom_count, seg.pulse_omega, seg.axis_phase
            )
            state = evolve_under(state, ham, seg.duration, dt=dt, method=method)
        elif isinstance(seg, InstantRotation):
            state = rotate(state, seg.axis, seg.angle)
        elif isinstance(seg, TomographyRotation):
            state = rotate(state, "x", seg.angle)
        else:
            raise TypeError(f"unknown segment type {type(seg).__name__}")
    return state


def tnt_sequence(params, evolve_time, echo=False):
    """Free evolution of the prepared state, optionally with an instantaneous
    spin echo (pi about x) at half time."""
    if not echo:
        return PulseSequence((FreeEvolution(evolve_time, params),))
    half = 0.5 * evolve_time
    return PulseSequence(
        (
            FreeEvolution(half, params),
            InstantRotation("x", math.pi, label="echo"),
            FreeEvolution(half, params),
        )
    )


def pulsed_tnt_sequence(
    params, evolve_time, pulse_omega, target_azimuth, echo=True, prep_pulse_omega=None
):
    """Experiment-style sequence: finite pi/2 preparation pulse from the
    all-down state, free evolution, finite echo pulse about x at half the
    free-evolution time.

    Under the -Omega J_axis coupling sign a pi/2 pulse rotates the Bloch
    vector by -pi/2 about the drive axis, so driving at azimuth
    target_azimuth + pi/2 lands the south pole on the equator at
    target_azimuth (normally the unstable fixed point).  The preparation
    pulse may run at a different coupling power than the echo
    (prep_pulse_omega); both default to pulse_omega.
    """
    if pulse_omega <= 0:
        raise ValueError("pulse_omega must be > 0")
    w_prep = prep_pulse_omega if prep_pulse_omega is not None else pulse_omega
    prep = CoupledPulse(
        0.5 * math.pi / w_prep, w_prep, target_azimuth + 0.5 * math.pi, params, label="prep"
    )
    if not echo:
        return PulseSequence((prep, FreeEvolution(evolve_time, params)))
    half = 0.5 * evolve_time
    echo_pulse = CoupledPulse(math.pi / pulse_omega, pulse_omega, 0.0, params, label="echo")
    return PulseSequence(
        (prep, FreeEvolution(half, params), echo_pulse, FreeEvolution(half, params))
    )
