"""Two-mode operations of the breeding protocol: beam splitter, loss
channels, the windowed homodyne-conditioning POVM, and the composite
breeding step.

Two-mode index convention: basis state |n_a, n_b> sits at flat index
n_a * dimension + n_b (mode a is the slow index).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln

from .errors import DomainError, HeraldImpossibleError
from .fock import (
    DensityOperator,
    FockCutoff,
    StateVector,
    hermite_functions,
    HERMITICITY_TOL,
    TRACE_TOL,
    POSITIVITY_TOL,
)

# quadrature wavefunction products are numerically zero beyond |x| = 12
# for every cutoff this package uses, so all windows clamp there
QUADRATURE_SUPPORT = 12.0


@dataclass(frozen=True, eq=False)
class TwoModeState:
    """Density operator on two modes sharing one cutoff.

    Flat index convention: (n_a, n_b) -> n_a * dimension + n_b.
    """

    matrix: np.ndarray
    cutoff: FockCutoff

    def __post_init__(self):
        d2 = self.cutoff.dimension ** 2
        mat = np.array(self.matrix, dtype=complex)
        if mat.shape != (d2, d2):
            raise DomainError(f"two-mode matrix has shape {mat.shape}, expected ({d2}, {d2})")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    def validate(self) -> "TwoModeState":
        mat = self.matrix
        herm = float(np.max(np.abs(mat - mat.conj().T)))
        if herm > HERMITICITY_TOL:
            raise DomainError(f"two-mode state not Hermitian (deviation {herm:.3e})")
        tr = float(np.real(np.trace(mat)))
        if abs(tr - 1.0) > TRACE_TOL:
            raise DomainError(f"two-mode trace {tr} differs from 1")
        lam_min = float(np.linalg.eigvalsh((mat + mat.conj().T) / 2).min())
        if lam_min < POSITIVITY_TOL:
            raise DomainError(f"two-mode negative eigenvalue {lam_min:.3e}")
        return self


@dataclass(frozen=True)
class AcceptanceWindow:
    """Quadrature acceptance window [-half_width, half_width] at ``phase``."""

    half_width: float = 0.3
    phase: float = 0.0

    def __post_init__(self):
        if self.half_width <= 0:
            raise DomainError(f"window half-width must be > 0, got {self.half_width}")


@dataclass(frozen=True, eq=False)
class HeraldOutcome:
    """Result of a conditioning measurement: heralded state + probability."""

    state: DensityOperator
    probability: float


@lru_cache(maxsize=16)
def _beam_splitter_unitary(dimension: int, theta: float, phase: float) -> np.ndarray:
    """U = expm(-i theta (e^{i phase} a^dag b + h.c.)), built block-by-block.

    The generator conserves total photon number, so U is block diagonal
    over the total-n sectors; exponentiating each (N+1)-sized block is
    far cheaper than one dense expm of size dimension^2.
    """
    d = dimension
    U = np.zeros((d * d, d * d), dtype=complex)
    for total in range(2 * d - 1):
        k_lo = max(0, total - (d - 1))
        k_hi = min(total, d - 1)
        ks = np.arange(k_lo, k_hi + 1)          # n_a values in this sector
        idx = ks * d + (total - ks)
        m = len(ks)
        gen = np.zeros((m, m), dtype=complex)
        for i, k in enumerate(ks[:-1]):
            # <k+1, t-k-1| a^dag b |k, t-k> = sqrt((k+1)(t-k))
            amp = np.sqrt((k + 1.0) * (total - k))
            gen[i + 1, i] = np.exp(1j * phase) * amp
            gen[i, i + 1] = np.exp(-1j * phase) * amp
        block = expm(-1j * theta * gen)
        U[np.ix_(idx, idx)] = block
    U.setflags(write=False)
    return U


def beam_splitter(a: DensityOperator, b: DensityOperator,
                  transmittance: float, phase: float = 0.0) -> TwoModeState:
    """Mix two single-mode states on a beam splitter.

    Args:
        a, b: input states sharing one cutoff.
        transmittance: power transmission t in [0, 1]; t = 1/2 is the
            balanced splitter of the breeding step.
        phase: relative phase of the mixing generator.

    Returns:
        Two-mode output state. Two photons entering a balanced splitter
        coalesce: both exit through the same port with no |1,1>
        component, populating (|2,0> + |0,2>)/sqrt(2) up to a global
        phase.
    """
    if not 0.0 <= transmittance <= 1.0:
        raise DomainError(f"transmittance must lie in [0, 1], got {transmittance}")
    if a.cutoff != b.cutoff:
        raise DomainError("beam splitter inputs must share a cutoff")
    theta = float(np.arccos(np.sqrt(transmittance)))
    U = _beam_splitter_unitary(a.cutoff.dimension, theta, float(phase))
    joint = np.kron(a.matrix, b.matrix)
    return TwoModeState(U @ joint @ U.conj().T, a.cutoff)


def partial_trace(state: TwoModeState, keep: str) -> DensityOperator:
    """Trace out one mode; ``keep`` is 'a' or 'b'."""
    d = state.cutoff.dimension
    r4 = state.matrix.reshape(d, d, d, d)
    if keep == "a":
        reduced = np.einsum("nkmk->nm", r4)
    elif keep == "b":
        reduced = np.einsum("knkm->nm", r4)
    else:
        raise DomainError(f"keep must be 'a' or 'b', got {keep!r}")
    return DensityOperator(reduced, state.cutoff)


def loss_kraus(transmission: float, dimension: int) -> list[np.ndarray]:
    """Kraus operators of the pure-loss (generalized Bernoulli) channel.

    A_k has elements sqrt(C(n, k) eta^(n-k) (1-eta)^k) mapping |n> to
    |n-k|; computed in the log domain to stay finite at large n.
    """
    if not 0.0 <= transmission <= 1.0:
        raise DomainError(f"transmission must lie in [0, 1], got {transmission}")
    if transmission == 1.0:
        return [np.eye(dimension, dtype=complex)]
    if transmission == 0.0:
        # everything decays to vacuum: A_k = |0><k|
        ops = []
        for k in range(dimension):
            A = np.zeros((dimension, dimension), dtype=complex)
            A[0, k] = 1.0
            ops.append(A)
        return ops
    ops = []
    for k in range(dimension):
        n = np.arange(k, dimension)
        log_coeff = 0.5 * (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))
        vals = np.exp(log_coeff + 0.5 * (n - k) * np.log(transmission)
                      + 0.5 * k * np.log1p(-transmission))
        A = np.zeros((dimension, dimension), dtype=complex)
        A[n - k, n] = vals
        ops.append(A)
    return ops


def loss_channel(rho: DensityOperator, transmission: float) -> DensityOperator:
    """Photon loss with power transmission ``transmission`` (eta).

    Trace preserving; satisfies the semigroup law
    loss(loss(rho, e1), e2) = loss(rho, e1 * e2).
    """
    if transmission == 1.0:
        return rho
    d = rho.dimension
    out = np.zeros((d, d), dtype=complex)
    for A in loss_kraus(transmission, d):
        out += A @ rho.matrix @ A.conj().T
    return DensityOperator(out, rho.cutoff)


@lru_cache(maxsize=64)
def _window_matrix(dimension: int, lo: float, hi: float) -> np.ndarray:
    """Integrals Pi_mn = int_lo^hi psi_m(x) psi_n(x) dx at theta = 0.

    Composite Gauss-Legendre: panels of width <= 0.25 with 24 nodes each
    integrate the (polynomial x Gaussian) products to well below 1e-10
    for every cutoff used here.
    """
    nodes, weights = np.polynomial.legendre.leggauss(24)
    panels = max(2, int(np.ceil((hi - lo) / 0.25)))
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    xs = (half[:, None] * nodes[None, :] + mid[:, None]).ravel()
    ws = (half[:, None] * weights[None, :]).ravel()
    psi = hermite_functions(dimension - 1, xs)
    mat = (psi * ws) @ psi.T
    mat.setflags(write=False)
    return mat


def _smear_povm(pi: np.ndarray, transmission: float) -> np.ndarray:
    """Adjoint loss map on a POVM element: sum_k A_k^dag Pi A_k."""
    if transmission == 1.0:
        return pi
    out = np.zeros_like(pi, dtype=complex)
    for A in loss_kraus(transmission, pi.shape[0]):
        out += A.conj().T @ pi @ A
    return out


def homodyne_povm(window: AcceptanceWindow, cutoff: FockCutoff,
                  detector_efficiency: float = 1.0) -> np.ndarray:
    """POVM element for a quadrature result inside ``window``.

    Pi_mn = int_{-eps}^{eps} psi_m psi_n e^{i(n-m) theta} dx, smeared by
    the loss-channel adjoint when the detector efficiency is below 1.
    Integration clamps to the numerical support of the wavefunctions so
    arbitrarily wide windows reproduce the identity.
    """
    if not 0.0 < detector_efficiency <= 1.0:
        raise DomainError(f"detector efficiency must lie in (0, 1], got {detector_efficiency}")
    eps = window.half_width
    lo = max(-eps, -QUADRATURE_SUPPORT)
    hi = min(eps, QUADRATURE_SUPPORT)
    pi = np.array(_window_matrix(cutoff.dimension, lo, hi), dtype=complex)
    if detector_efficiency < 1.0:
        pi = _smear_povm(pi, detector_efficiency)
    if window.phase != 0.0:
        n = np.arange(cutoff.dimension)
        pi = pi * np.exp(1j * window.phase * (n[None, :] - n[:, None]))
    return pi


def condition(two_mode: TwoModeState, measured_mode: str,
              window: AcceptanceWindow,
              detector_efficiency: float = 1.0) -> HeraldOutcome:
    """Project onto a windowed quadrature result on one mode.

    Args:
        two_mode: joint input state.
        measured_mode: 'a' or 'b', the mode the homodyne detector reads.
        window: acceptance window.
        detector_efficiency: homodyne efficiency; below 1 the POVM is
            smeared by the loss adjoint.

    Returns:
        HeraldOutcome with the renormalized surviving mode and the
        acceptance probability Tr[(1 x Pi) rho].

    Raises:
        HeraldImpossibleError: acceptance probability below 1e-12.
    """
    d = two_mode.cutoff.dimension
    pi = homodyne_povm(window, two_mode.cutoff, detector_efficiency)
    r4 = two_mode.matrix.reshape(d, d, d, d)
    if measured_mode == "b":
        raw = np.einsum("bk,nkmb->nm", pi, r4)
    elif measured_mode == "a":
        raw = np.einsum("ab,bnam->nm", pi, r4)
    else:
        raise DomainError(f"measured_mode must be 'a' or 'b', got {measured_mode!r}")
    prob = float(np.real(np.trace(raw)))
    if prob < 1e-12:
        raise HeraldImpossibleError(
            f"conditioning probability {prob:.3e} is numerically zero")
    state = (raw + raw.conj().T) / (2.0 * prob)
    return HeraldOutcome(DensityOperator(state, two_mode.cutoff), prob)


def breed(a: DensityOperator, b: DensityOperator, window: AcceptanceWindow,
          detector_efficiency: float = 1.0) -> HeraldOutcome:
    """One breeding step: balanced beam splitter, then window conditioning.

    Mode b carries the measured output; mode a carries the bred state.
    Iterating on the outputs is supported (states are closed under the
    operation).
    """
    joint = beam_splitter(a, b, 0.5, 0.0)
    return condition(joint, "b", window, detector_efficiency)


def single_photon_state(photon_fidelity: float = 0.87,
                        two_photon_weight: float = 0.0,
                        cutoff: FockCutoff = FockCutoff(20)) -> DensityOperator:
    """Heralded-photon model: F|1><1| + (1-F-w2)|0><0| + w2|2><2|."""
    if not 0.0 <= photon_fidelity <= 1.0:
        raise DomainError(f"photon fidelity must lie in [0, 1], got {photon_fidelity}")
    if two_photon_weight < 0 or photon_fidelity + two_photon_weight > 1.0:
        raise DomainError("two-photon weight must be >= 0 and F + w2 <= 1")
    mat = np.zeros((cutoff.dimension, cutoff.dimension), dtype=complex)
    mat[1, 1] = photon_fidelity
    mat[0, 0] = 1.0 - photon_fidelity - two_photon_weight
    mat[2, 2] = two_photon_weight
    return DensityOperator(mat, cutoff)
