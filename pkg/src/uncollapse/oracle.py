"""Independent ground truth: quantum-trajectory Monte Carlo and Bloch-sphere quadrature.

Each trajectory carries a normalized pure state through the protocol. At
every relaxation segment it jumps to ``|0>`` with probability
``|c1|^2 (1 - kappa)`` or otherwise takes the Bayesian-updated no-jump
state; at every measurement it tunnels (and is rejected) with probability
``|c1|^2 p``. Pure dephasing is not sampled: the final coherences are
multiplied by ``kappa_phi``.

Random numbers come from numpy's PCG64 generator. A run is split into
fixed-size batches whose streams are spawned from ``SeedSequence(seed)``,
and batch sums are merged in batch order, so the result is bit-identical
regardless of how many workers evaluate the batches.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import DensityMatrix, PureState
from .errors import EmptySelectionError
from .protocol import ProtocolParams

GENERATOR = "PCG64"
BATCH_SIZE = 1 << 17


@dataclass(frozen=True)
class MCEstimate:
    """Post-selected Monte Carlo average.

    ``std_err_entries[i, j]`` is the standard error of ``rho_hat[i, j]``;
    for the complex coherences it combines real and imaginary parts,
    ``sqrt(var(Re) + var(Im)) / sqrt(n_selected)``. ``F_st_hat`` is the mean
    overlap of the selected final states with the target state (the input
    state unless another target was given).
    """

    rho_hat: DensityMatrix
    P_f_hat: float
    n_total: int
    n_selected: int
    std_err_Pf: float
    std_err_entries: np.ndarray
    n_rejected_first: int
    n_rejected_second: int
    seed: int
    F_st_hat: float
    std_err_Fst: float
    generator: str = GENERATOR


def _relax(rng, c0, c1, kappa):
    pop1 = np.abs(c1) ** 2
    jump = rng.random(c0.shape[0]) < pop1 * (1.0 - kappa)
    norm = np.sqrt(np.abs(c0) ** 2 + pop1 * kappa)
    # norm > 0 whenever no jump happened; the jumped rows are overwritten below
    safe = np.where(jump, 1.0, norm)
    c0 = np.where(jump, 1.0 + 0j, c0 / safe)
    c1 = np.where(jump, 0j, c1 * math.sqrt(kappa) / safe)
    return c0, c1


def _measure(rng, c0, c1, strength):
    pop1 = np.abs(c1) ** 2
    tunnel = rng.random(c0.shape[0]) < pop1 * strength
    norm = np.sqrt(np.abs(c0) ** 2 + pop1 * (1.0 - strength))
    # tunnelled rows are discarded later; park them in |0> so later steps stay finite
    safe = np.where(tunnel, 1.0, norm)
    c0 = np.where(tunnel, 1.0 + 0j, c0 / safe)
    c1 = np.where(tunnel, 0j, c1 * math.sqrt(1.0 - strength) / safe)
    return c0, c1, tunnel


def _run_batch(psi_in: PureState, params: ProtocolParams, n: int,
               seed_seq: np.random.SeedSequence, target: PureState):
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    c0 = np.full(n, psi_in.amp0, dtype=complex)
    c1 = np.full(n, psi_in.amp1, dtype=complex)

    c0, c1 = _relax(rng, c0, c1, params.kappa1)
    c0, c1, tunnel1 = _measure(rng, c0, c1, params.p)
    c0, c1 = _relax(rng, c0, c1, params.kappa2)
    c0, c1 = c1, c0
    c0, c1 = _relax(rng, c0, c1, params.kappa3)
    c0, c1, tunnel2 = _measure(rng, c0, c1, params.p_u)
    c0, c1 = _relax(rng, c0, c1, params.kappa4)
    c0, c1 = c1, c0

    rejected1 = tunnel1
    rejected2 = tunnel2 & ~tunnel1
    keep = ~(tunnel1 | tunnel2)
    c0, c1 = c0[keep], c1[keep]
    r00 = np.abs(c0) ** 2
    r11 = np.abs(c1) ** 2
    r01 = params.kappa_phi * c0 * np.conj(c1)
    t0, t1 = target.amp0, target.amp1
    fid = abs(t0) ** 2 * r00 + abs(t1) ** 2 * r11 + 2.0 * np.real(np.conj(t0) * t1 * r01)
    sums = np.array([r00.sum(), r11.sum(), r01.sum(), fid.sum()], dtype=complex)
    sq = np.array([(r00**2).sum(), (r11**2).sum(), (np.abs(r01) ** 2).sum(), (fid**2).sum()])
    return int(keep.sum()), int(rejected1.sum()), int(rejected2.sum()), sums, sq


def mc_run(psi_in: PureState, params: ProtocolParams, n: int, seed: int,
           workers: int = 1, batch_size: int = BATCH_SIZE,
           target: PureState | None = None) -> MCEstimate:
    """Simulate ``n`` trajectories and average the post-selected final states.

    Raises:
        EmptySelectionError: if no trajectory survives both measurements.
    """
    if n < 1:
        raise ValueError("need at least one trajectory")
    sizes = [batch_size] * (n // batch_size)
    if n % batch_size:
        sizes.append(n % batch_size)
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    target = psi_in if target is None else target
    jobs = [(psi_in, params, size, ss, target) for size, ss in zip(sizes, streams)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: _run_batch(*job), jobs))
    else:
        results = [_run_batch(*job) for job in jobs]

    n_sel = n_rej1 = n_rej2 = 0
    sums = np.zeros(4, dtype=complex)
    sq = np.zeros(4)
    for kept, rej1, rej2, s, q in results:
        n_sel += kept
        n_rej1 += rej1
        n_rej2 += rej2
        sums += s
        sq += q

    if n_sel == 0:
        raise EmptySelectionError(f"none of {n} trajectories was selected", n_total=n)

    mean = sums / n_sel
    # population variance of each entry over the selected trajectories
    var = np.maximum(sq / n_sel - np.abs(mean) ** 2, 0.0)
    se = np.sqrt(var / n_sel)
    rho = np.array([[mean[0], mean[2]], [np.conj(mean[2]), mean[1]]])
    P_f_hat = n_sel / n
    return MCEstimate(
        rho_hat=DensityMatrix(rho),
        P_f_hat=P_f_hat,
        n_total=n,
        n_selected=n_sel,
        std_err_Pf=math.sqrt(P_f_hat * (1.0 - P_f_hat) / n),
        std_err_entries=np.array([[se[0], se[2]], [se[2], se[1]]]),
        n_rejected_first=n_rej1,
        n_rejected_second=n_rej2,
        seed=seed,
        F_st_hat=float(mean[3].real),
        std_err_Fst=float(se[3]),
    )


def bloch_avg_numeric(f: Callable[[float], float], nodes: int = 64) -> float:
    """Gauss-Legendre estimate of ``int_0^1 f(u) du``, the Bloch average of ``f(|beta|^2)``."""
    if nodes < 2:
        raise ValueError("need at least two quadrature nodes")
    x, w = np.polynomial.legendre.leggauss(nodes)
    u = 0.5 * (x + 1.0)
    values = np.array([f(float(ui)) for ui in u], dtype=float)
    if not np.all(np.isfinite(values)):
        raise FloatingPointError("integrand returned a non-finite value")
    return float(0.5 * np.dot(w, values))
