"""The uncollapsing storage protocol.

Sequence, for survival factors kappa1..kappa4 of the four free-evolution
segments::

    relax(k1) -> null meas(p) -> relax(k2) [storage] -> X -> relax(k3)
    -> null meas(p_u) -> relax(k4) -> X

followed by pure dephasing with the single factor ``kappa_phi``. Only runs
where both measurements give the null result are kept.

Two routes compute the post-selected output: the closed-form branch
decomposition (:func:`run_ideal`, :func:`run_general` with
:func:`final_density_matrix`) and a plain density-matrix channel pipeline
(:func:`run_via_channels`). They are meant to agree to rounding.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import (
    MIN_PROBABILITY,
    DensityMatrix,
    PureState,
    amplitude_damping,
    apply_channel,
    apply_operator,
    check_unit_interval,
    dephasing,
    partial_measurement,
    pi_pulse,
)
from .errors import ImpossibleSelectionError, InfeasibleMatchingError


@dataclass(frozen=True)
class ProtocolParams:
    """Measurement strengths and per-segment decay factors.

    ``kappa_i = exp(-Gamma * tau_i)``; segment 2 is the storage period.
    ``kappa_phi = exp(-Gamma_phi * sum(tau_i))``.
    """

    p: float = 0.0
    p_u: float = 0.0
    kappa1: float = 1.0
    kappa2: float = 1.0
    kappa3: float = 1.0
    kappa4: float = 1.0
    kappa_phi: float = 1.0

    def __post_init__(self):
        for name in ("p", "p_u", "kappa1", "kappa2", "kappa3", "kappa4", "kappa_phi"):
            object.__setattr__(self, name, check_unit_interval(name, getattr(self, name)))

    @classmethod
    def ideal(cls, p: float, p_u: float, kappa2: float) -> ProtocolParams:
        """Relaxation only during storage, no dephasing."""
        return cls(p=p, p_u=p_u, kappa2=kappa2)

    @classmethod
    def from_rates(cls, p: float, p_u: float, gamma: float, taus, gamma_phi: float = 0.0):
        """Build from a relaxation rate, four segment durations and a dephasing rate."""
        taus = tuple(float(t) for t in taus)
        if len(taus) != 4:
            raise ValueError("need exactly four segment durations")
        kappas = [float(np.exp(-gamma * t)) for t in taus]
        return cls(p, p_u, *kappas, kappa_phi=float(np.exp(-gamma_phi * sum(taus))))

    def with_pu(self, p_u: float) -> ProtocolParams:
        return replace(self, p_u=p_u)

    def with_p(self, p: float) -> ProtocolParams:
        return replace(self, p=p)

    @property
    def kappa_E(self) -> float:
        """Total energy-relaxation survival over the whole procedure."""
        return self.kappa1 * self.kappa2 * self.kappa3 * self.kappa4

    @property
    def is_ideal(self) -> bool:
        return self.kappa1 == self.kappa3 == self.kappa4 == self.kappa_phi == 1.0


@dataclass(frozen=True)
class OutcomeDecomposition:
    """Post-selected output split into one coherent and two incoherent branches.

    ``nj_amp0``/``nj_amp1`` are unnormalized amplitudes of the branch with
    no relaxation jump; ``P_nj`` is its weight. ``P_to_ground`` and
    ``P_to_excited`` weight the branches that end in ``|0>`` and ``|1>``.
    """

    nj_amp0: complex
    nj_amp1: complex
    P_nj: float
    P_to_ground: float
    P_to_excited: float
    dephasing_factor: float = 1.0

    @property
    def P_f(self) -> float:
        return self.P_nj + self.P_to_ground + self.P_to_excited


@dataclass(frozen=True)
class FinalResult:
    rho_f: DensityMatrix
    P_f: float
    P_rejected: float | None = None


def matched_pu(params: ProtocolParams) -> float:
    """Second strength for which the no-jump branch restores the input exactly.

    Solves ``k3 k4 (1 - p_u) = k1 k2 (1 - p)``.

    Raises:
        InfeasibleMatchingError: if the solution is outside [0, 1] or k3 k4 = 0.
    """
    after = params.kappa3 * params.kappa4
    before = params.kappa1 * params.kappa2 * (1.0 - params.p)
    if after <= 0.0:
        raise InfeasibleMatchingError("kappa3 * kappa4 = 0: matching is undefined")
    p_u = 1.0 - before / after
    if not (0.0 <= p_u <= 1.0):
        raise InfeasibleMatchingError(
            f"matched p_u = {p_u:.6g} is outside [0, 1] "
            f"(k1 k2 (1-p) = {before:.6g} > k3 k4 = {after:.6g})")
    return p_u


def run_ideal(psi_in: PureState, p: float, p_u: float, kappa2: float) -> OutcomeDecomposition:
    """Step-by-step pure-state evolution with relaxation only during storage."""
    p = check_unit_interval("p", p)
    p_u = check_unit_interval("p_u", p_u)
    kappa2 = check_unit_interval("kappa2", kappa2)
    alpha, beta = psi_in.amp0, psi_in.amp1

    # first measurement, null result
    P1 = abs(alpha) ** 2 + abs(beta) ** 2 * (1.0 - p)
    if P1 <= 0.0:
        return OutcomeDecomposition(0j, 0j, 0.0, 0.0, 0.0)
    beta1 = beta * np.sqrt(1.0 - p) / np.sqrt(P1)

    # storage: jump to |0> or Bayesian-updated no-jump state
    P2_jump = P1 * abs(beta1) ** 2 * (1.0 - kappa2)
    P2_nj = abs(alpha) ** 2 + abs(beta) ** 2 * (1.0 - p) * kappa2
    if P2_nj > 0.0:
        alpha2 = alpha / np.sqrt(P2_nj)
        beta2 = beta * np.sqrt((1.0 - p) * kappa2) / np.sqrt(P2_nj)
    else:
        alpha2 = beta2 = 0j

    # pi-pulse, then second measurement: the jumped branch sits in |1>
    alpha3, beta3 = beta2, alpha2
    P4_excited = P2_jump * (1.0 - p_u)
    P4_nj = abs(alpha) ** 2 * (1.0 - p_u) + abs(beta) ** 2 * (1.0 - p) * kappa2
    scale = np.sqrt(P2_nj)
    amp0_4 = alpha3 * scale
    amp1_4 = beta3 * scale * np.sqrt(1.0 - p_u)

    # second pi-pulse: |1> -> |0>, and the no-jump amplitudes swap back
    return OutcomeDecomposition(
        nj_amp0=complex(amp1_4),
        nj_amp1=complex(amp0_4),
        P_nj=float(P4_nj),
        P_to_ground=float(P4_excited),
        P_to_excited=0.0,
    )


def run_general(psi_in: PureState, params: ProtocolParams) -> OutcomeDecomposition:
    """Closed-form branch weights with relaxation in all four segments.

    Branches that end in ``|0>`` after the last pulse are the storage-decayed
    ones (a jump in segment 1 or 2) that then survive segments 3-4 and the
    second measurement. Jumps in segments 3 or 4 always end in ``|1>``.
    """
    k1, k2, k3, k4 = params.kappa1, params.kappa2, params.kappa3, params.kappa4
    p, p_u = params.p, params.p_u
    alpha, beta = psi_in.amp0, psi_in.amp1
    a2, b2 = abs(alpha) ** 2, abs(beta) ** 2

    late = k3 * k4 * (1.0 - p_u)
    early = k1 * k2 * (1.0 - p)
    early_jump = 1.0 - k1 + k1 * (1.0 - p) * (1.0 - k2)
    late_jump = 1.0 - k3 + k3 * (1.0 - p_u) * (1.0 - k4)

    return OutcomeDecomposition(
        nj_amp0=complex(alpha * np.sqrt(late)),
        nj_amp1=complex(beta * np.sqrt(early)),
        P_nj=a2 * late + b2 * early,
        P_to_ground=b2 * early_jump * late,
        P_to_excited=a2 * late_jump + b2 * early_jump * late_jump,
        dephasing_factor=params.kappa_phi,
    )


def printed_branch_labels(d: OutcomeDecomposition) -> OutcomeDecomposition:
    """Swap the two incoherent branch weights.

    Reproduces the alternative |0>/|1> label assignment of the closed-form
    weights; used as a deliberately wrong model when checking that
    Monte Carlo validation can tell the two apart.
    """
    return replace(d, P_to_ground=d.P_to_excited, P_to_excited=d.P_to_ground)


def final_density_matrix(d: OutcomeDecomposition) -> FinalResult:
    """Normalized post-selected state and the selection probability."""
    total = d.P_f
    if total <= MIN_PROBABILITY:
        raise ImpossibleSelectionError(f"selection probability {total!r} is zero")
    v = np.array([d.nj_amp0, d.nj_amp1], dtype=complex)
    coherent = np.outer(v, v.conj())
    coherent[0, 1] *= d.dephasing_factor
    coherent[1, 0] *= d.dephasing_factor
    m = coherent + np.diag([d.P_to_ground, d.P_to_excited])
    return FinalResult(DensityMatrix(m / total), min(total, 1.0))


def run_via_channels(psi_in: PureState, params: ProtocolParams) -> FinalResult:
    """Same protocol by direct composition of Kraus channels on density matrices."""
    X = pi_pulse()
    rho = psi_in.projector()
    rejected = 0.0

    def measure(rho, strength):
        nonlocal rejected
        outcomes = partial_measurement(strength)
        rejected += apply_operator(rho, outcomes["tunnel"]).trace()
        return apply_operator(rho, outcomes["null"])

    rho = apply_channel(rho, amplitude_damping(params.kappa1))
    rho = measure(rho, params.p)
    rho = apply_channel(rho, amplitude_damping(params.kappa2))
    rho = apply_operator(rho, X)
    rho = apply_channel(rho, amplitude_damping(params.kappa3))
    rho = measure(rho, params.p_u)
    rho = apply_channel(rho, amplitude_damping(params.kappa4))
    rho = apply_operator(rho, X)
    rho = apply_channel(rho, dephasing(params.kappa_phi))

    total = rho.trace()
    if total <= MIN_PROBABILITY:
        raise ImpossibleSelectionError(f"selection probability {total!r} is zero")
    return FinalResult(DensityMatrix(rho.matrix / total), min(total, 1.0), rejected)


def run(psi_in: PureState, params: ProtocolParams) -> FinalResult:
    """Post-selected output via the closed-form decomposition."""
    return final_density_matrix(run_general(psi_in, params))
