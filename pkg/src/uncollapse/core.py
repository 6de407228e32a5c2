"""Exact single-qubit primitives: states, density matrices and Kraus channels.

Relaxation is parametrized by survival factors ``kappa = exp(-Gamma * tau)``
instead of (rate, duration) pairs. The pi-pulse is the real bit flip X; any
fixed phase picked up by the measurement back-action is a frame choice and
drops out of every quantity computed in this package.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, ImpossibleOutcomeError, InvalidStateError

TOL = 1e-12
# selective outcomes below this probability are treated as impossible
MIN_PROBABILITY = 1e-15


def check_unit_interval(name: str, value: float) -> float:
    """Return ``value`` as float, raising DomainError unless it lies in [0, 1]."""
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise DomainError(f"{name} must lie in [0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class PureState:
    """Normalized qubit state ``amp0|0> + amp1|1>``."""

    amp0: complex
    amp1: complex

    def __post_init__(self):
        norm = abs(self.amp0) ** 2 + abs(self.amp1) ** 2
        if abs(norm - 1.0) > TOL:
            raise InvalidStateError(f"state is not normalized (norm^2 = {norm!r})")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp0, self.amp1], dtype=complex)

    @property
    def excited_population(self) -> float:
        """|amp1|^2, the quantity every Bloch-sphere average runs over."""
        return abs(self.amp1) ** 2

    def projector(self) -> DensityMatrix:
        v = self.vector
        return DensityMatrix(np.outer(v, v.conj()))


def make_pure(amp0: complex, amp1: complex) -> PureState:
    """Normalize ``(amp0, amp1)`` into a PureState, keeping the given global phase."""
    amp0, amp1 = complex(amp0), complex(amp1)
    norm = np.sqrt(abs(amp0) ** 2 + abs(amp1) ** 2)
    if not np.isfinite(norm) or norm == 0.0:
        raise InvalidStateError("cannot normalize a zero (or non-finite) state vector")
    return PureState(amp0 / norm, amp1 / norm)


KET0 = PureState(1.0 + 0j, 0j)
KET1 = PureState(0j, 1.0 + 0j)


@dataclass(frozen=True)
class DensityMatrix:
    """2x2 density matrix.

    The stored matrix is made exactly Hermitian on construction. Inputs that
    are more than ``TOL`` away from Hermitian are rejected. Trace and
    positivity are not enforced here (post-selection produces unnormalized
    intermediates); use :meth:`is_valid` to check them.
    """

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise InvalidStateError(f"density matrix must be 2x2, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidStateError("density matrix has non-finite entries")
        if np.max(np.abs(m - m.conj().T)) > TOL * max(1.0, np.max(np.abs(m))):
            raise InvalidStateError("density matrix is not Hermitian")
        h = np.empty((2, 2), dtype=complex)
        h[0, 0] = m[0, 0].real
        h[1, 1] = m[1, 1].real
        h[0, 1] = 0.5 * (m[0, 1] + np.conj(m[1, 0]))
        h[1, 0] = np.conj(h[0, 1])
        h.setflags(write=False)
        object.__setattr__(self, "matrix", h)

    def __repr__(self):
        m = self.matrix
        return (f"DensityMatrix(rho00={m[0, 0].real:.12g}, rho01={m[0, 1]:.12g}, "
                f"rho11={m[1, 1].real:.12g})")

    @classmethod
    def diag(cls, p0: float, p1: float) -> DensityMatrix:
        return cls(np.diag([p0, p1]).astype(complex))

    @property
    def rho00(self) -> float:
        return float(self.matrix[0, 0].real)

    @property
    def rho11(self) -> float:
        return float(self.matrix[1, 1].real)

    @property
    def rho01(self) -> complex:
        return complex(self.matrix[0, 1])

    @property
    def rho10(self) -> complex:
        return complex(self.matrix[1, 0])

    def trace(self) -> float:
        return self.rho00 + self.rho11

    def is_valid(self, tol: float = TOL) -> bool:
        """Unit trace and positive semidefinite within ``tol``."""
        det = self.rho00 * self.rho11 - abs(self.rho01) ** 2
        return (abs(self.trace() - 1.0) <= tol and det >= -tol
                and self.rho00 >= -tol and self.rho11 >= -tol)

    def normalized(self) -> DensityMatrix:
        tr = self.trace()
        if tr <= MIN_PROBABILITY:
            raise ImpossibleOutcomeError("cannot normalize a zero-trace matrix")
        return DensityMatrix(self.matrix / tr)

    def allclose(self, other: DensityMatrix, atol: float = TOL) -> bool:
        return bool(np.allclose(self.matrix, other.matrix, rtol=0.0, atol=atol))


@dataclass(frozen=True)
class KrausSet:
    """Ordered Kraus operators with one outcome label each.

    The set may be trace-decreasing (a selective channel) but never
    trace-increasing.
    """

    operators: tuple
    labels: tuple

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.operators)
        labels = tuple(self.labels)
        if len(ops) != len(labels):
            raise ValueError("need exactly one label per Kraus operator")
        for k in ops:
            if k.shape != (2, 2):
                raise ValueError("Kraus operators must be 2x2")
            k.setflags(write=False)
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "labels", labels)
        eig = np.linalg.eigvalsh(self.completeness())
        if eig.min() < -TOL or eig.max() > 1.0 + TOL:
            raise ValueError("Kraus set is trace-increasing")

    def __len__(self):
        return len(self.operators)

    def __getitem__(self, label: str) -> np.ndarray:
        return self.operators[self.labels.index(label)]

    def completeness(self) -> np.ndarray:
        """Sum of K^dagger K over the set."""
        return sum((k.conj().T @ k for k in self.operators), np.zeros((2, 2), dtype=complex))

    def is_trace_preserving(self, tol: float = TOL) -> bool:
        return bool(np.allclose(self.completeness(), np.eye(2), rtol=0.0, atol=tol))


def partial_measurement_null(p: float) -> np.ndarray:
    """Null-result ("no tunneling") operator of a partial measurement of strength ``p``.

    Only ``|1>`` can tunnel, so the null result rescales its amplitude by
    ``sqrt(1 - p)`` and leaves ``|0>`` untouched.
    """
    p = check_unit_interval("p", p)
    return np.diag([1.0, np.sqrt(1.0 - p)]).astype(complex)


def partial_measurement(p: float) -> KrausSet:
    """Both outcomes of the partial measurement.

    The "tunnel" operator only carries the rejected probability; the
    tunneled qubit has left the computational subspace and its state is
    never used.
    """
    p = check_unit_interval("p", p)
    tunnel = np.array([[0.0, 0.0], [0.0, np.sqrt(p)]], dtype=complex)
    return KrausSet((partial_measurement_null(p), tunnel), ("null", "tunnel"))


def amplitude_damping(kappa: float) -> KrausSet:
    """Zero-temperature relaxation with survival factor ``kappa``, unraveled into no-jump/jump."""
    kappa = check_unit_interval("kappa", kappa)
    no_jump = np.diag([1.0, np.sqrt(kappa)]).astype(complex)
    jump = np.array([[0.0, np.sqrt(1.0 - kappa)], [0.0, 0.0]], dtype=complex)
    return KrausSet((no_jump, jump), ("no-jump", "jump"))


def dephasing(kappa_phi: float) -> KrausSet:
    """Pure dephasing that multiplies the coherences by ``kappa_phi``."""
    kappa_phi = check_unit_interval("kappa_phi", kappa_phi)
    keep = np.sqrt((1.0 + kappa_phi) / 2.0) * np.eye(2, dtype=complex)
    flip = np.sqrt((1.0 - kappa_phi) / 2.0) * np.diag([1.0, -1.0]).astype(complex)
    return KrausSet((keep, flip), ("keep", "phase-flip"))


def pi_pulse() -> np.ndarray:
    """Bit flip exchanging ``|0>`` and ``|1>``."""
    return np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def apply_operator(rho: DensityMatrix, op: np.ndarray) -> DensityMatrix:
    """Unnormalized ``K rho K^dagger``."""
    op = np.asarray(op, dtype=complex)
    return DensityMatrix(op @ rho.matrix @ op.conj().T)


def apply_channel(rho: DensityMatrix, channel: KrausSet) -> DensityMatrix:
    """Non-selective application: sum of ``K rho K^dagger`` over all operators."""
    out = np.zeros((2, 2), dtype=complex)
    for k in channel.operators:
        out += k @ rho.matrix @ k.conj().T
    return DensityMatrix(out)


def apply_selective(rho: DensityMatrix, op: np.ndarray) -> tuple[DensityMatrix, float]:
    """Apply one measurement outcome and renormalize.

    Returns the conditional state and the outcome probability
    ``Tr(K rho K^dagger)``.

    Raises:
        ImpossibleOutcomeError: if the outcome probability is at most 1e-15.
    """
    op = np.asarray(op, dtype=complex)
    if np.linalg.norm(op, 2) > 1.0 + TOL:
        raise DomainError("selective operator has spectral norm above 1")
    unnormalized = apply_operator(rho, op)
    prob = unnormalized.trace()
    if prob <= MIN_PROBABILITY:
        raise ImpossibleOutcomeError(f"outcome probability {prob!r} is zero")
    return DensityMatrix(unnormalized.matrix / prob), min(prob, 1.0)


def state_fidelity(rho: DensityMatrix, psi: PureState) -> float:
    """Overlap ``<psi|rho|psi>`` of a density matrix with a pure target state."""
    v = psi.vector
    return float(np.real(v.conj() @ rho.matrix @ v))


def random_pure_states(rng: np.random.Generator, n: int) -> Sequence[PureState]:
    """``n`` Haar-random pure states (uniform on the Bloch sphere)."""
    z = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
    return [make_pure(a, b) for a, b in z]
