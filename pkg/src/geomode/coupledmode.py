"""Coupled-mode systems with a global envelope and their evolution operators.

A system is H(z) = Omega(z) * kappa + kappa_static, with kappa a
Hermitian coupling pattern, Omega(z) >= 0 a piecewise envelope in
rad/mm, and an optional static part.  When the static part vanishes (or
commutes with the pattern) the Hamiltonians at different z commute and
the evolution depends only on the accumulated phase
delta(z) = int_0^z Omega; the evolution operator is then computed
exactly from the eigendecomposition of the pattern.  A midpoint-rule
product integrator covers the non-commuting case.

The module also builds the calibrated four-waveguide Jx structure used
throughout the package: nearest-neighbour couplings
(sqrt(3)/2, 1, sqrt(3)/2), zero detuning, a 30 mm cosine fan-in/out in
waveguide separation with exponentially distance-dependent coupling,
and a flat section whose length is varied between structures.  Two
frozen calibration constants pin the model: the flat coupling strength
(from the single-photon outer-pair stability width, 23.7 mm) and the
ramp sharpness (so that one cycle, delta = pi, completes at the ideal
length 84.9 mm).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import brentq
from scipy.special import iv

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10

#: Default propagation-length derivative limit defining a plateau (1.5 %/mm).
SLOPE_LIMIT_PER_MM = 0.015
#: Mean stability-plateau width of the single-photon outer-mode pair used
#: to calibrate the flat coupling (mm, full length axis).
CALIBRATION_WIDTH_MM = 23.7
#: Length at which the structure completes one cycle (delta = pi).
IDEAL_LENGTH_MM = 84.9
#: Length of each cosine fan section.
RAMP_LENGTH_MM = 30.0
#: Flat coupling strength, rad/mm; solves
#: outer_pair_width_mm(omega) == CALIBRATION_WIDTH_MM.
FLAT_COUPLING_PER_MM = 0.08424871417403404
#: Separation-ramp sharpness (fan amplitude over coupling decay length);
#: solves delta(IDEAL_LENGTH_MM) == pi given FLAT_COUPLING_PER_MM.
RAMP_SHARPNESS = 4.018128255630664

#: The seven realized structure lengths: 80 mm to 100 mm in steps of 10/3 mm.
STRUCTURE_LENGTHS_MM = tuple(80.0 + 10.0 * k / 3.0 for k in range(7))


class CouplingPattern:
    """Hermitian M x M coupling matrix (diagonal entries are detunings)."""

    def __init__(self, matrix):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("coupling pattern must be a square matrix")
        if np.max(np.abs(m - m.conj().T)) >= HERMITIAN_TOL:
            raise ValueError(f"coupling pattern must be Hermitian within {HERMITIAN_TOL}")
        m.setflags(write=False)
        self.matrix = m
        self.modes = m.shape[0]

    @cached_property
    def _eigh(self):
        return np.linalg.eigh(self.matrix)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._eigh[0]

    def unitary(self, delta: float) -> np.ndarray:
        """exp(-1j * delta * pattern), exactly unitary via eigendecomposition."""
        lam, v = self._eigh
        return (v * np.exp(-1j * delta * lam)) @ v.conj().T

    def unitary_batch(self, deltas) -> np.ndarray:
        """Stack of exp(-1j * delta_k * pattern) over an array of phases."""
        lam, v = self._eigh
        phases = np.exp(-1j * np.multiply.outer(np.asarray(deltas, dtype=float), lam))
        return np.einsum("ij,...j,kj->...ik", v, phases, v.conj())

    def __eq__(self, other):
        return isinstance(other, CouplingPattern) and np.array_equal(self.matrix, other.matrix)


def jx_pattern(modes: int) -> CouplingPattern:
    """Nearest-neighbour chain with couplings kappa_{k,k+1} = sqrt(k(M-k))/2.

    Realizes a spin-(M-1)/2 x-rotation generator; M = 4 gives couplings
    (sqrt(3)/2, 1, sqrt(3)/2) and eigenvalues (+-1/2, +-3/2).
    """
    if modes < 2:
        raise ValueError("jx pattern needs at least 2 modes")
    m = np.zeros((modes, modes))
    for k in range(1, modes):
        c = 0.5 * math.sqrt(k * (modes - k))
        m[k - 1, k] = c
        m[k, k - 1] = c
    return CouplingPattern(m)


# ------------------------------------------------------------- envelopes


@dataclass(frozen=True)
class ConstantSegment:
    """Omega(z) = value over the segment."""

    value: float
    length: float

    def __post_init__(self):
        if self.value < 0 or self.length <= 0:
            raise ValueError("constant segment needs value >= 0 and length > 0")

    def value_at(self, z):
        return self.value * np.ones_like(np.asarray(z, dtype=float))

    def phase_to(self, z):
        return self.value * np.asarray(z, dtype=float)

    @property
    def total_phase(self):
        return self.value * self.length


@dataclass(frozen=True)
class CosineRampSegment:
    """Half-cosine ramp from ``start`` to ``end`` over the segment."""

    start: float
    end: float
    length: float

    def __post_init__(self):
        if min(self.start, self.end) < 0 or self.length <= 0:
            raise ValueError("cosine ramp needs non-negative endpoints and length > 0")

    def value_at(self, z):
        x = np.pi * np.asarray(z, dtype=float) / self.length
        return self.start + (self.end - self.start) * (1 - np.cos(x)) / 2

    def phase_to(self, z):
        z = np.asarray(z, dtype=float)
        sine = np.sin(np.pi * z / self.length) * self.length / np.pi
        return self.start * z + (self.end - self.start) * (z - sine) / 2

    @property
    def total_phase(self):
        return (self.start + self.end) * self.length / 2


def _exp_cos_integral(x, lam: float, sign: float) -> np.ndarray:
    """int_0^x exp(sign * lam * cos(phi)) dphi via the Bessel series."""
    x = np.asarray(x, dtype=float)
    total = iv(0, lam) * x
    for k in range(1, 200):
        coeff = 2.0 * (sign ** k) * iv(k, lam) / k
        if abs(coeff) < 1e-18:
            break
        total = total + coeff * np.sin(k * x)
    return total


@dataclass(frozen=True)
class ExpCosineRampSegment:
    """Coupling ramp from a cosine fan in waveguide separation.

    The separation follows a half-cosine between the decoupled facet
    spacing and the flat-section spacing while the coupling depends
    exponentially on separation, giving
    Omega(z) = peak * exp(-sharpness * (1 +- cos(pi z / length)))
    (rising: +, falling: -).  At the outer end the coupling is
    suppressed by exp(-2 * sharpness).
    """

    peak: float
    sharpness: float
    length: float
    rising: bool = True

    def __post_init__(self):
        if self.peak < 0 or self.length <= 0 or self.sharpness <= 0:
            raise ValueError("exp-cosine ramp needs peak >= 0, sharpness > 0, length > 0")

    def value_at(self, z):
        x = np.pi * np.asarray(z, dtype=float) / self.length
        cos = np.cos(x) if self.rising else -np.cos(x)
        return self.peak * np.exp(-self.sharpness * (1 + cos))

    def phase_to(self, z):
        x = np.pi * np.asarray(z, dtype=float) / self.length
        sign = -1.0 if self.rising else 1.0
        scale = self.peak * math.exp(-self.sharpness) * self.length / np.pi
        return scale * _exp_cos_integral(x, self.sharpness, sign)

    @property
    def total_phase(self):
        # sin(k*pi) = 0, so only the Bessel I0 term survives
        return self.peak * math.exp(-self.sharpness) * iv(0, self.sharpness) * self.length


@dataclass(frozen=True)
class TruncatedSegment:
    """A segment cut short at ``length`` (same profile, shorter domain)."""

    inner: object
    length: float

    def __post_init__(self):
        if not 0 < self.length <= self.inner.length + 1e-12:
            raise ValueError("truncation must lie inside the segment")

    def value_at(self, z):
        return self.inner.value_at(z)

    def phase_to(self, z):
        return self.inner.phase_to(z)

    @property
    def total_phase(self):
        return float(self.inner.phase_to(self.length))


@dataclass(frozen=True)
class Envelope:
    """Piecewise non-negative envelope Omega(z) over z in [0, L]."""

    segments: tuple

    def __post_init__(self):
        if not self.segments:
            raise ValueError("envelope needs at least one segment")
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def length(self) -> float:
        return float(sum(s.length for s in self.segments))

    def _locate(self, z: float):
        offset = 0.0
        for seg in self.segments:
            if z <= offset + seg.length or seg is self.segments[-1]:
                return seg, z - offset, offset
            offset += seg.length
        raise AssertionError("unreachable")

    def value(self, z: float) -> float:
        z = float(z)
        if z < 0 or z > self.length + 1e-12:
            return 0.0
        seg, local, _ = self._locate(min(z, self.length))
        return float(seg.value_at(min(local, seg.length)))

    def phase(self, z: float) -> float:
        """int_0^z Omega, exact per-segment analytic integrals.

        Positions outside [0, L] clamp to the boundary value (the
        structure is decoupled beyond its ends).
        """
        z = float(z)
        if z <= 0:
            return 0.0
        z = min(z, self.length)
        total = 0.0
        remaining = z
        for seg in self.segments:
            if remaining >= seg.length - 1e-15:
                total += seg.total_phase
                remaining -= seg.length
                if remaining <= 1e-15:
                    break
            else:
                total += float(seg.phase_to(remaining))
                break
        return total

    @property
    def total_phase(self) -> float:
        return float(sum(s.total_phase for s in self.segments))


# --------------------------------------------------------------- systems


@dataclass(frozen=True)
class EvolutionOperator:
    """Unitary acting on creation operators, with its accumulated phase.

    ``matrix[j, k]`` is the amplitude for mode k at z0 to end in mode j
    at z1; equivalently a_k^dag(z1) = sum_j matrix[j, k] a_j^dag(z0).
    """

    matrix: np.ndarray
    delta: float
    z0: float
    z1: float


class CoupledModeSystem:
    """H(z) = Omega(z) * pattern + static_pattern over z in [0, length]."""

    def __init__(self, pattern: CouplingPattern, envelope: Envelope, static_pattern=None):
        self.pattern = pattern
        self.envelope = envelope
        self.static_pattern = static_pattern
        if static_pattern is not None and static_pattern.modes != pattern.modes:
            raise ValueError("static pattern size mismatch")
        self.modes = pattern.modes

    @property
    def length(self) -> float:
        return self.envelope.length

    @cached_property
    def commuting_family(self) -> bool:
        if self.static_pattern is None:
            return True
        comm = (self.pattern.matrix @ self.static_pattern.matrix
                - self.static_pattern.matrix @ self.pattern.matrix)
        return bool(np.max(np.abs(comm)) < 1e-12)

    def hamiltonian(self, z: float) -> np.ndarray:
        h = self.envelope.value(z) * self.pattern.matrix
        if self.static_pattern is not None:
            h = h + self.static_pattern.matrix
        return h

    def delta(self, z: float) -> float:
        return self.envelope.phase(z)


def accumulated_phase(system: CoupledModeSystem, z: float) -> float:
    """delta(z) = int_0^z Omega(tau) dtau in radians."""
    if z < -1e-12 or z > system.length + 1e-9:
        raise ValueError(f"position {z} outside [0, {system.length}]")
    return system.envelope.phase(z)


def evolve(system: CoupledModeSystem, z0: float = 0.0, z1: float | None = None,
           *, max_step: float = 0.01, method: str = "auto") -> EvolutionOperator:
    """Evolution operator over [z0, z1].

    Commuting systems use exp(-1j * (delta(z1) - delta(z0)) * pattern)
    (plus the commuting static part) from the Hermitian
    eigendecomposition; otherwise an ordered product of midpoint-rule
    step exponentials with step <= ``max_step``.  ``method`` may be
    "auto", "commuting", or "stepper".
    """
    if z1 is None:
        z1 = system.length
    if not (-1e-12 <= z0 <= z1 <= system.length + 1e-9):
        raise ValueError(f"need 0 <= z0 <= z1 <= {system.length}")
    ddelta = system.envelope.phase(z1) - system.envelope.phase(z0)

    use_commuting = system.commuting_family if method == "auto" else (method == "commuting")
    if method == "commuting" and not system.commuting_family:
        raise ValueError("system is not a commuting family")

    if use_commuting:
        u = system.pattern.unitary(ddelta)
        if system.static_pattern is not None:
            u = u @ system.static_pattern.unitary(z1 - z0)
    else:
        steps = max(1, math.ceil((z1 - z0) / max_step))
        h = (z1 - z0) / steps
        u = np.eye(system.modes, dtype=complex)
        for i in range(steps):
            zm = z0 + (i + 0.5) * h
            hm = system.hamiltonian(zm)
            lam, v = np.linalg.eigh(hm)
            u = ((v * np.exp(-1j * h * lam)) @ v.conj().T) @ u
    return EvolutionOperator(matrix=u, delta=ddelta, z0=z0, z1=z1)


def truncate_envelope(envelope: Envelope, length: float) -> Envelope:
    """Clip an envelope at ``length``; extends with zero coupling beyond."""
    if length <= 0:
        raise ValueError("truncation length must be positive")
    segments = []
    used = 0.0
    for seg in envelope.segments:
        if used >= length:
            break
        if used + seg.length <= length + 1e-12:
            segments.append(seg)
            used += seg.length
        else:
            segments.append(TruncatedSegment(seg, length - used))
            used = length
    if used < length - 1e-12:
        segments.append(ConstantSegment(0.0, length - used))
    return Envelope(tuple(segments))


# ------------------------------------------------- the Jx(4) structure


def outer_pair_width_mm(omega: float, slope_limit: float = SLOPE_LIMIT_PER_MM) -> float:
    """Stability-plateau width (mm) of the single-photon outer-mode pair.

    Closed form: post-selected transfer probability
    p = sin^6(d/2) / (sin^6 + cos^6) with d = delta, so
    |dp/dd| = 3 (sc)^5 / (s^6 + c^6)^2; the plateau around d = pi ends
    where |dp/dL| = slope_limit with dd/dL = omega.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    threshold = slope_limit / omega

    def slope(delta):
        s, c = math.sin(delta / 2), math.cos(delta / 2)
        return 3 * (s * c) ** 5 / (s ** 6 + c ** 6) ** 2

    peak_slope = slope(math.pi / 2)  # maximum of the slope profile
    if threshold >= peak_slope:
        # slope never reaches the limit: plateau spans the whole cycle
        return 2 * math.pi / omega
    u_star = brentq(lambda u: slope(math.pi - u) - threshold, 1e-12, math.pi / 2, xtol=1e-14)
    return 2 * u_star / omega


def calibrate_flat_coupling(target_width_mm: float = CALIBRATION_WIDTH_MM,
                            slope_limit: float = SLOPE_LIMIT_PER_MM) -> float:
    """Flat coupling (rad/mm) whose outer-pair width equals the target."""
    return brentq(lambda om: outer_pair_width_mm(om, slope_limit) - target_width_mm,
                  1e-3, 2.0, xtol=1e-15)


def calibrate_ramp_sharpness(omega_flat: float = FLAT_COUPLING_PER_MM,
                             ideal_length_mm: float = IDEAL_LENGTH_MM,
                             ramp_mm: float = RAMP_LENGTH_MM) -> float:
    """Ramp sharpness so that delta(ideal_length) = pi.

    Total phase of a structure of length L is
    omega * (2 r exp(-s) I0(s) + L - 2 r); the sharpness s solves
    exp(-s) I0(s) = (pi / omega - (L_id - 2 r)) / (2 r).
    """
    target = (math.pi / omega_flat - (ideal_length_mm - 2 * ramp_mm)) / (2 * ramp_mm)
    if not 0 < target < 1:
        raise ValueError("no ramp sharpness reaches delta = pi for these parameters")
    return brentq(lambda s: math.exp(-s) * iv(0, s) - target, 1e-9, 200.0, xtol=1e-14)


def jx4_structure(length_mm: float,
                  omega_flat: float = FLAT_COUPLING_PER_MM,
                  ramp_mm: float = RAMP_LENGTH_MM,
                  sharpness: float | None = None,
                  ideal_length_mm: float = IDEAL_LENGTH_MM) -> CoupledModeSystem:
    """The calibrated four-waveguide structure at a given total length.

    Envelope: exp-cosine fan-in over ``ramp_mm``, flat coupling
    ``omega_flat`` over the varied middle section, mirrored fan-out.
    The sharpness defaults to the value that completes one cycle
    (delta = pi) at ``ideal_length_mm``.
    """
    if length_mm < 2 * ramp_mm:
        raise ValueError(f"total length must be at least {2 * ramp_mm} mm")
    if sharpness is None:
        if (omega_flat, ramp_mm, ideal_length_mm) == (
                FLAT_COUPLING_PER_MM, RAMP_LENGTH_MM, IDEAL_LENGTH_MM):
            sharpness = RAMP_SHARPNESS
        else:
            sharpness = calibrate_ramp_sharpness(omega_flat, ideal_length_mm, ramp_mm)
    segments = [ExpCosineRampSegment(omega_flat, sharpness, ramp_mm, rising=True)]
    flat = length_mm - 2 * ramp_mm
    if flat > 0:
        segments.append(ConstantSegment(omega_flat, flat))
    segments.append(ExpCosineRampSegment(omega_flat, sharpness, ramp_mm, rising=False))
    return CoupledModeSystem(jx_pattern(4), Envelope(tuple(segments)))


def jx4_delta(length_mm, omega_flat: float = FLAT_COUPLING_PER_MM,
              ramp_mm: float = RAMP_LENGTH_MM,
              sharpness: float = RAMP_SHARPNESS):
    """Total accumulated phase of the structure family at given lengths."""
    lengths = np.asarray(length_mm, dtype=float)
    eff = 2 * ramp_mm * math.exp(-sharpness) * iv(0, sharpness)
    return omega_flat * (eff + lengths - 2 * ramp_mm)


# ----------------------------------------------------------------- JSON


_SEGMENT_KINDS = {
    "constant": (ConstantSegment, ("value_per_mm", "length_mm")),
    "cosine_ramp": (CosineRampSegment, ("start_per_mm", "end_per_mm", "length_mm")),
    "exp_cosine_ramp": (ExpCosineRampSegment,
                        ("peak_per_mm", "sharpness", "length_mm", "rising")),
}


def segment_to_json(seg) -> dict:
    if isinstance(seg, ConstantSegment):
        return {"kind": "constant", "value_per_mm": seg.value, "length_mm": seg.length}
    if isinstance(seg, CosineRampSegment):
        return {"kind": "cosine_ramp", "start_per_mm": seg.start,
                "end_per_mm": seg.end, "length_mm": seg.length}
    if isinstance(seg, ExpCosineRampSegment):
        return {"kind": "exp_cosine_ramp", "peak_per_mm": seg.peak,
                "sharpness": seg.sharpness, "length_mm": seg.length,
                "rising": seg.rising}
    raise TypeError(f"unknown segment type {type(seg)!r}")


def segment_from_json(doc: dict):
    kind = doc.get("kind")
    if kind not in _SEGMENT_KINDS:
        raise ValueError(f"unknown envelope segment kind {kind!r}")
    cls, keys = _SEGMENT_KINDS[kind]
    missing = [k for k in keys if k not in doc and k != "rising"]
    if missing:
        raise ValueError(f"segment {kind!r} missing fields {missing}")
    args = [doc[k] for k in keys if k in doc]
    return cls(*args)


def _matrix_to_json(m: np.ndarray):
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def _matrix_from_json(rows):
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def system_to_json(system: CoupledModeSystem, omega_flat: float | None = None) -> dict:
    doc = {
        "modes": system.modes,
        "pattern": _matrix_to_json(system.pattern.matrix),
        "envelope": [segment_to_json(s) for s in system.envelope.segments],
        "length_mm": system.length,
    }
    if omega_flat is not None:
        doc["omega_flat_per_mm"] = omega_flat
    if system.static_pattern is not None:
        doc["static_pattern"] = _matrix_to_json(system.static_pattern.matrix)
    return doc


def system_from_json(doc: dict) -> CoupledModeSystem:
    try:
        modes = int(doc["modes"])
        pattern = CouplingPattern(_matrix_from_json(doc["pattern"]))
        segments = tuple(segment_from_json(s) for s in doc["envelope"])
    except KeyError as exc:
        raise ValueError(f"system definition missing field {exc}") from None
    if pattern.modes != modes:
        raise ValueError("pattern size does not match the declared mode count")
    envelope = Envelope(segments)
    if "length_mm" in doc and abs(envelope.length - float(doc["length_mm"])) > 1e-9:
        raise ValueError("length_mm does not match the envelope segments")
    static = None
    if doc.get("static_pattern") is not None:
        static = CouplingPattern(_matrix_from_json(doc["static_pattern"]))
    return CoupledModeSystem(pattern, envelope, static)
