"""Closed-form fidelities and selection probabilities.

Bloch-sphere averages use the fact that the uniform measure on pure qubit
states makes ``u = |beta|^2`` uniform on [0, 1]. Every quantity here is
phase-insensitive, so each average reduces to a one-dimensional integral
of a ratio ``N(u) / (A + B u)`` with quadratic ``N``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import KET0, KET1, DensityMatrix, PureState, check_unit_interval, make_pure, state_fidelity
from .errors import DomainError, ImpossibleSelectionError, TomographyError
from .protocol import ProtocolParams, run, run_general

StateMap = Callable[[PureState], DensityMatrix]

# below this |B/A| the closed forms lose digits to cancellation; use the power series
SERIES_THRESHOLD = 0.1
_SERIES_TERMS = 40

PAULI = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
IDENTITY_CHI = np.diag([1.0, 0.0, 0.0, 0.0]).astype(complex)

SIX_STATES = (
    KET0,
    KET1,
    make_pure(1, 1),
    make_pure(1, -1),
    make_pure(1, 1j),
    make_pure(1, -1j),
)
FOUR_STATES = (KET0, KET1, make_pure(1, 1), make_pure(1, 1j))


@dataclass(frozen=True)
class FidelityReport:
    F_av: float
    F_av_s: float
    F_chi: float
    P_f_avg: float
    C: float | None = None


def scaled_fidelity(F_av: float) -> float:
    """Map an average state fidelity to the process-fidelity scale, ``(3 F - 1) / 2``."""
    return (3.0 * F_av - 1.0) / 2.0


def _check_denominator(A: float, B: float) -> float:
    if not A > 0.0:
        raise DomainError(f"A must be positive, got {A!r}")
    if not A + B > 0.0:
        raise DomainError(f"A + B must be positive, got A={A!r}, B={B!r}")
    return B / A


def _series(x: float, coeff) -> float:
    return math.fsum(coeff(k) * (-x) ** k for k in range(_SERIES_TERMS))


def bloch_integral_inverse(A: float, B: float) -> float:
    """``<1 / (A + B|beta|^2)>`` over the Bloch sphere, ``ln(1 + B/A) / B``."""
    x = _check_denominator(A, B)
    if x == 0.0:
        return 1.0 / A
    return math.log1p(x) / x / A


def bloch_integral_beta4(A: float, B: float) -> float:
    """``<|beta|^4 / (A + B|beta|^2)>`` over the Bloch sphere.

    Closed form ``1/(2B) - A/B^2 + (A^2/B^3) ln(1 + B/A)``. ``B`` may be
    negative as long as ``A + B > 0``.
    """
    x = _check_denominator(A, B)
    if abs(x) < SERIES_THRESHOLD:
        return _series(x, lambda k: 1.0 / (k + 3)) / A
    return 1.0 / (2.0 * B) - A / B**2 + A**2 / B**3 * math.log1p(x)


def bloch_integral_alpha4(A: float, B: float) -> float:
    """``<|alpha|^4 / (A + B|beta|^2)>`` over the Bloch sphere.

    Closed form ``-3/(2B) - A/B^2 + ((A + B)^2 / B^3) ln(1 + B/A)``.
    """
    x = _check_denominator(A, B)
    if abs(x) < SERIES_THRESHOLD:
        return _series(x, lambda k: 2.0 / ((k + 1) * (k + 2) * (k + 3))) / A
    return -3.0 / (2.0 * B) - A / B**2 + (A + B) ** 2 / B**3 * math.log1p(x)


def bloch_integral_cross(A: float, B: float) -> float:
    """``<|alpha|^2 |beta|^2 / (A + B|beta|^2)>``, from ``|alpha|^2 + |beta|^2 = 1``."""
    x = _check_denominator(A, B)
    if abs(x) < SERIES_THRESHOLD:
        return _series(x, lambda k: 1.0 / ((k + 2) * (k + 3))) / A
    total = bloch_integral_inverse(A, B)
    return 0.5 * (total - bloch_integral_alpha4(A, B) - bloch_integral_beta4(A, B))


def avg_fidelity_ideal(p: float, kappa2: float) -> FidelityReport:
    """Averaged and naive-QPT fidelities with relaxation only during storage and matched p_u."""
    p = check_unit_interval("p", p)
    kappa2 = check_unit_interval("kappa2", kappa2)
    C = (1.0 - p) * (1.0 - kappa2)
    if C < SERIES_THRESHOLD:
        # 1/2 + 1/C - ln(1+C)/C^2 = 1 - sum_{k>=1} (-C)^(k-1) C / (k + 2)
        F_av = 1.0 - C * _series(C, lambda k: 1.0 / (k + 3))
    else:
        F_av = 0.5 + 1.0 / C - math.log1p(C) / C**2
    return FidelityReport(
        F_av=F_av,
        F_av_s=scaled_fidelity(F_av),
        F_chi=naive_fidelity_ideal(p, kappa2),
        P_f_avg=(1.0 - p) * kappa2 * (1.0 + C / 2.0),
        C=C,
    )


def six_state_fidelity_ideal(p: float, kappa2: float) -> float:
    """Mean state fidelity over the six axis states, ideal matched case."""
    C = (1.0 - check_unit_interval("p", p)) * (1.0 - check_unit_interval("kappa2", kappa2))
    return 1.0 / 6.0 + 1.0 / (6.0 * (1.0 + C)) + (4.0 + C) / (3.0 * (2.0 + C))


def naive_fidelity_ideal(p: float, kappa2: float) -> float:
    """Process fidelity from four-state linear-inversion tomography, ideal matched case."""
    return scaled_fidelity(six_state_fidelity_ideal(p, kappa2))


def six_state_average(state_map: StateMap) -> float:
    """Mean of ``<psi|map(psi)|psi>`` over the six Pauli eigenstates."""
    return math.fsum(state_fidelity(state_map(psi), psi) for psi in SIX_STATES) / 6.0


def _choi_vector(op: np.ndarray) -> np.ndarray:
    # (1 (x) op)|Omega>, |Omega> = |00> + |11>
    return op.T.reshape(-1)


def qpt_chi(state_map: StateMap, inputs=FOUR_STATES) -> np.ndarray:
    """Linear-inversion chi matrix in the {I, X, Y, Z} basis.

    The outputs of ``state_map`` on the four ``inputs`` are extended
    linearly to all operators, exactly as in a standard experiment. For a
    post-selected (nonlinear) map the result depends on the chosen inputs.
    """
    inputs = tuple(inputs)
    if len(inputs) != 4:
        raise TomographyError("one-qubit tomography needs exactly four input states")
    rho_in = np.array([psi.projector().matrix.reshape(-1) for psi in inputs]).T
    if np.linalg.matrix_rank(rho_in, tol=1e-10) < 4:
        raise TomographyError("input states do not span the operator space")
    rho_out = np.array([state_map(psi).matrix.reshape(-1) for psi in inputs]).T

    # column c of rho_in is vec(input_c); solve for the images of |j><k|
    coeffs = np.linalg.solve(rho_in, np.eye(4))
    images = rho_out @ coeffs

    choi = np.zeros((4, 4), dtype=complex)
    for idx in range(4):
        j, k = divmod(idx, 2)
        basis = np.zeros((2, 2), dtype=complex)
        basis[j, k] = 1.0
        choi += np.kron(basis, images[:, idx].reshape(2, 2))

    vecs = np.array([_choi_vector(P) for P in PAULI])
    chi = vecs.conj() @ choi @ vecs.T / 4.0
    if np.max(np.abs(chi - chi.conj().T)) > 1e-10:
        raise TomographyError("reconstructed chi matrix is not Hermitian")
    return 0.5 * (chi + chi.conj().T)


def apply_chi(chi: np.ndarray, rho: DensityMatrix) -> DensityMatrix:
    """Evaluate the process ``rho -> sum_mn chi_mn P_m rho P_n``."""
    out = np.zeros((2, 2), dtype=complex)
    for m, Pm in enumerate(PAULI):
        for n, Pn in enumerate(PAULI):
            out += chi[m, n] * Pm @ rho.matrix @ Pn.conj().T
    return DensityMatrix(out)


def process_fidelity(chi: np.ndarray, chi0: np.ndarray | None = None) -> float:
    """``Re Tr(chi chi0)``; ``chi0`` defaults to the identity process."""
    if chi0 is None:
        chi0 = IDENTITY_CHI
    return float(np.real(np.trace(np.asarray(chi) @ np.asarray(chi0))))


def baseline_fidelity(kappa_E: float, kappa_phi: float) -> float:
    """Fidelity of plain storage without any measurement (p = p_u = 0)."""
    kappa_E = check_unit_interval("kappa_E", kappa_E)
    kappa_phi = check_unit_interval("kappa_phi", kappa_phi)
    return 0.25 + kappa_E / 4.0 + kappa_phi * math.sqrt(kappa_E) / 2.0


def selection_polynomials(params: ProtocolParams):
    """Coefficients of the state fidelity as a rational function of ``u = |beta|^2``.

    Returns ``(A, B, c_alpha, c_beta, c_cross)`` such that for an input with
    ``|beta|^2 = u`` the selection probability is ``A + B u`` and the
    unnormalized fidelity numerator is
    ``c_alpha (1-u)^2 + c_beta u^2 + c_cross u (1-u)``.
    """
    k1, k2, k3, k4 = params.kappa1, params.kappa2, params.kappa3, params.kappa4
    late = k3 * k4 * (1.0 - params.p_u)
    early = k1 * k2 * (1.0 - params.p)
    early_jump = 1.0 - k1 + k1 * (1.0 - params.p) * (1.0 - k2)
    late_jump = 1.0 - k3 + k3 * (1.0 - params.p_u) * (1.0 - k4)

    A = late + late_jump
    B = early + early_jump * late + early_jump * late_jump - A
    c_alpha = late
    c_beta = early + early_jump * late_jump
    c_cross = 2.0 * params.kappa_phi * math.sqrt(late * early) + early_jump * late + late_jump
    return A, B, c_alpha, c_beta, c_cross


def bloch_avg_fidelity(params: ProtocolParams) -> tuple[float, float]:
    """Bloch-averaged state fidelity and selection probability for explicit params."""
    A, B, c_alpha, c_beta, c_cross = selection_polynomials(params)
    P_f_avg = A + B / 2.0
    if A <= 0.0:
        # |0> is never selected; then c_alpha = c_cross = 0 and one power of u cancels
        if B <= 0.0:
            raise ImpossibleSelectionError("no input state passes the selection")
        return c_beta / (2.0 * B), P_f_avg
    if A + B <= 0.0:
        raise ImpossibleSelectionError("|1> is never selected; the Bloch average is singular")
    F_av = (c_alpha * bloch_integral_alpha4(A, B)
            + c_beta * bloch_integral_beta4(A, B)
            + c_cross * bloch_integral_cross(A, B))
    return F_av, P_f_avg


def avg_fidelity_general(params: ProtocolParams) -> FidelityReport:
    """Averaged, scaled and naive-QPT fidelities for arbitrary segment decay and dephasing.

    ``params.p_u`` is used as given; pick it with ``matched_pu`` or another
    strategy first.
    """
    F_av, P_f_avg = bloch_avg_fidelity(params)
    F_chi = scaled_fidelity(six_state_average(lambda psi: run(psi, params).rho_f))
    return FidelityReport(
        F_av=F_av,
        F_av_s=scaled_fidelity(F_av),
        F_chi=F_chi,
        P_f_avg=P_f_avg,
        C=(1.0 - params.p) * (1.0 - params.kappa2),
    )


def selection_probability(psi: PureState, params: ProtocolParams) -> float:
    """Probability that both measurements give the null result for input ``psi``."""
    return run_general(psi, params).P_f
