"""Truncated Fock-basis states, constructors, quadrature wavefunctions,
Wigner evaluation and fidelity metrics.

Conventions fixed package-wide:
  * quadrature operator x = (a + a^dag)/sqrt(2), so the vacuum has
    variance 1/2 and |psi_n(x)|^2 are the photon-number quadrature laws;
  * squeezing quoted in dB of variance, positive values reducing the
    x-variance: s_dB -> r = ln(10^(s_dB/20)), variance factor 10^(-s_dB/10).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln

from .errors import DomainError, TruncationError

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-9
POSITIVITY_TOL = -1e-9


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=complex)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FockCutoff:
    """Photon-number truncation: basis spans |0> .. |n_max>."""

    n_max: int

    def __post_init__(self):
        if self.n_max < 2:
            raise DomainError(f"cutoff n_max must be >= 2, got {self.n_max}")

    @property
    def dimension(self) -> int:
        return self.n_max + 1


@dataclass(frozen=True, eq=False)
class StateVector:
    """Pure state in the truncated Fock basis.

    ``truncation_deficit`` records probability mass lost to truncation by
    the constructor (0 when the state is exactly representable).
    """

    amplitudes: np.ndarray
    cutoff: FockCutoff
    truncation_deficit: float = 0.0

    def __post_init__(self):
        amps = _readonly(self.amplitudes)
        if amps.shape != (self.cutoff.dimension,):
            raise DomainError(
                f"amplitude vector has shape {amps.shape}, "
                f"expected ({self.cutoff.dimension},)"
            )
        object.__setattr__(self, "amplitudes", amps)

    def normalize(self) -> "StateVector":
        norm = float(np.linalg.norm(self.amplitudes))
        if norm < 1e-12:
            raise DomainError("cannot normalize a zero vector")
        return StateVector(self.amplitudes / norm, self.cutoff,
                           self.truncation_deficit)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def to_density(self) -> "DensityOperator":
        psi = self.amplitudes
        return DensityOperator(np.outer(psi, psi.conj()), self.cutoff)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Mixed state in the truncated Fock basis.

    Invariants (checked by ``validate``): Hermitian within 1e-10, unit
    trace within 1e-9, eigenvalues above -1e-9.
    """

    matrix: np.ndarray
    cutoff: FockCutoff

    def __post_init__(self):
        mat = _readonly(self.matrix)
        d = self.cutoff.dimension
        if mat.shape != (d, d):
            raise DomainError(f"matrix has shape {mat.shape}, expected ({d}, {d})")
        object.__setattr__(self, "matrix", mat)

    def validate(self) -> "DensityOperator":
        mat = self.matrix
        herm = float(np.max(np.abs(mat - mat.conj().T)))
        if herm > HERMITICITY_TOL:
            raise DomainError(f"matrix not Hermitian (deviation {herm:.3e})")
        tr = float(np.real(np.trace(mat)))
        if abs(tr - 1.0) > TRACE_TOL:
            raise DomainError(f"trace {tr} differs from 1 beyond tolerance")
        lam_min = float(np.linalg.eigvalsh((mat + mat.conj().T) / 2).min())
        if lam_min < POSITIVITY_TOL:
            raise DomainError(f"negative eigenvalue {lam_min:.3e}")
        return self

    @property
    def dimension(self) -> int:
        return self.cutoff.dimension

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()


def annihilation_matrix(dimension: int) -> np.ndarray:
    """Matrix of the annihilation operator a, truncated to ``dimension``."""
    return np.diag(np.sqrt(np.arange(1.0, dimension)), 1).astype(complex)


def fock_state(n: int, cutoff: FockCutoff) -> StateVector:
    if not 0 <= n <= cutoff.n_max:
        raise DomainError(f"Fock index {n} outside [0, {cutoff.n_max}]")
    amps = np.zeros(cutoff.dimension, dtype=complex)
    amps[n] = 1.0
    return StateVector(amps, cutoff)


def coherent_state(alpha: complex, cutoff: FockCutoff) -> StateVector:
    """Coherent state |alpha>, renormalized after truncation.

    Args:
        alpha: complex displacement amplitude.
        cutoff: basis truncation.

    Returns:
        Normalized StateVector; emits a warning and records the deficit
        when the truncated tail mass exceeds 1e-6.
    """
    n = np.arange(cutoff.dimension)
    # log-domain: alpha^n / sqrt(n!) overflows for |alpha|^2 ~ n_max otherwise
    log_mag = n * np.log(np.abs(alpha)) if alpha != 0 else np.where(n == 0, 0.0, -np.inf)
    log_amp = -np.abs(alpha) ** 2 / 2 + log_mag - 0.5 * gammaln(n + 1)
    phase = np.exp(1j * n * np.angle(alpha)) if alpha != 0 else np.ones_like(n, dtype=complex)
    amps = np.exp(log_amp) * phase
    captured = float(np.sum(np.abs(amps) ** 2))
    deficit = max(0.0, 1.0 - captured)
    if deficit > 1e-6:
        warnings.warn(
            f"coherent_state(|alpha|={abs(alpha):.3g}) loses {deficit:.3e} "
            f"probability at cutoff {cutoff.n_max}; renormalizing",
            stacklevel=2,
        )
    amps = amps / np.sqrt(captured)
    return StateVector(amps, cutoff, truncation_deficit=deficit)


def squeeze_db_to_r(s_db: float) -> float:
    """dB-of-variance to squeeze parameter r (positive r squeezes x)."""
    return float(np.log(10.0 ** (s_db / 20.0)))


def squeeze_matrix(s_db: float, cutoff: FockCutoff) -> np.ndarray:
    """Squeeze unitary S with positive ``s_db`` reducing the x-variance.

    S = expm((r/2)(a^2 - a^dag^2)), r = ln(10^(s_dB/20)). The truncated
    generator stays anti-Hermitian so S is unitary to machine precision;
    the deviation is still measured and enforced below 1e-6.

    Args:
        s_db: squeezing in dB of variance, |s_db| <= 20.
        cutoff: basis truncation.

    Returns:
        dimension x dimension complex unitary matrix.
    """
    if abs(s_db) > 20:
        raise DomainError(f"|s_db| must be <= 20 to stay within truncation, got {s_db}")
    r = squeeze_db_to_r(s_db)
    a = annihilation_matrix(cutoff.dimension)
    S = expm((r / 2.0) * (a @ a - a.conj().T @ a.conj().T))
    deviation = float(np.max(np.abs(S.conj().T @ S - np.eye(cutoff.dimension))))
    if deviation > 1e-6:
        raise TruncationError("squeeze operator lost unitarity", deviation)
    return S


@dataclass(frozen=True)
class TargetCatSpec:
    """Even squeezed-cat target: (|alpha> + |-alpha>)/N with x-squeezing."""

    amplitude: float = 1.63
    squeezing_db: float = 3.64

    def __post_init__(self):
        if self.amplitude < 0:
            raise DomainError("cat amplitude must be >= 0")


# The breeding protocol produces its cat fringes along the momentum
# quadrature; the constructed target is rotated into that frame with the
# number-operator quarter-turn i^n so fidelities compare like with like.
_CAT_WORK_DIMENSION = 80


def target_cat(spec: TargetCatSpec, cutoff: FockCutoff) -> StateVector:
    """Squeezed even-cat target state in the frame of the bred states.

    Built at an internal working dimension then truncated and
    renormalized, so the squeeze operator never acts near the caller's
    cutoff edge.
    """
    if cutoff.n_max < 20:
        raise DomainError(f"target_cat needs cutoff >= 20, got {cutoff.n_max}")
    dim_work = max(_CAT_WORK_DIMENSION, cutoff.dimension)
    work = FockCutoff(dim_work - 1)
    n = np.arange(dim_work)

    if spec.amplitude == 0:
        even = np.zeros(dim_work, dtype=complex)
        even[0] = 1.0
    else:
        # assemble the even cat from even Fock terms only: exact parity
        log_amp = (-spec.amplitude ** 2 / 2 + n * np.log(spec.amplitude)
                   - 0.5 * gammaln(n + 1))
        even = np.where(n % 2 == 0, np.exp(log_amp), 0.0).astype(complex)
        even /= np.linalg.norm(even)

    psi = squeeze_matrix(spec.squeezing_db, work) @ even
    psi = (1j ** n) * psi
    captured = float(np.sum(np.abs(psi[:cutoff.dimension]) ** 2))
    deficit = max(0.0, 1.0 - captured)
    amps = psi[:cutoff.dimension] / np.sqrt(captured)
    # squeezing and the i^n rotation both preserve parity
    amps[1::2] = 0.0
    return StateVector(amps, cutoff, truncation_deficit=deficit)


def hermite_functions(n_max: int, x: np.ndarray) -> np.ndarray:
    """All quadrature wavefunctions psi_0..psi_n_max evaluated at x.

    Uses the normalized three-term recurrence
    psi_{n+1} = x sqrt(2/(n+1)) psi_n - sqrt(n/(n+1)) psi_{n-1},
    stable to n of several hundred (no factorials, no raw Hermite
    polynomials).

    Args:
        n_max: highest index to evaluate.
        x: evaluation points, any shape.

    Returns:
        Array of shape (n_max + 1,) + x.shape.
    """
    x = np.asarray(x, dtype=float)
    psi = np.zeros((n_max + 1,) + x.shape)
    psi[0] = np.pi ** -0.25 * np.exp(-x * x / 2.0)
    if n_max >= 1:
        psi[1] = np.sqrt(2.0) * x * psi[0]
    for n in range(1, n_max):
        psi[n + 1] = (x * np.sqrt(2.0 / (n + 1)) * psi[n]
                      - np.sqrt(n / (n + 1.0)) * psi[n - 1])
    return psi


def quadrature_wavefunction(n: int, x) -> np.ndarray | float:
    """psi_n(x) = pi^(-1/4) (2^n n!)^(-1/2) H_n(x) exp(-x^2/2)."""
    if n < 0:
        raise DomainError(f"wavefunction index must be >= 0, got {n}")
    arr = np.asarray(x, dtype=float)
    val = hermite_functions(n, arr)[n]
    return float(val) if np.isscalar(x) else val


def wigner(rho: DensityOperator, x, p) -> np.ndarray | float:
    """Wigner function of ``rho`` at phase-space points (x, p).

    Normalized so that the integral over the plane is 1 and
    |W| <= 1/pi. Evaluated through the Laguerre expansion of the
    displaced-parity operator, summed superdiagonal-by-superdiagonal
    with a Clenshaw recurrence (stable at cutoffs ~100).

    Args:
        rho: state to evaluate.
        x, p: coordinates, scalars or equal-shape arrays.

    Returns:
        W(x, p) with the broadcast shape of the inputs.
    """
    scalar = np.isscalar(x) and np.isscalar(p)
    xv = np.asarray(x, dtype=float)
    pv = np.asarray(p, dtype=float)
    xv, pv = np.broadcast_arrays(xv, pv)

    M = rho.dimension
    A2 = np.sqrt(2.0) * (xv + 1j * pv)
    B = np.abs(A2) ** 2
    diag_scaled = rho.matrix * (2.0 - np.eye(M))

    def lag_clenshaw(L: int, xx: np.ndarray, c: np.ndarray) -> np.ndarray:
        # Clenshaw sum of sum_k c_k L_k^L(xx) over normalized Laguerre terms
        if len(c) == 1:
            y0 = c[0] * np.ones_like(xx)
            y1 = np.zeros_like(xx)
        elif len(c) == 2:
            y0 = c[0] * np.ones_like(xx)
            y1 = c[1] * np.ones_like(xx)
        else:
            k = len(c)
            y0 = c[-2] * np.ones_like(xx)
            y1 = c[-1] * np.ones_like(xx)
            for i in range(3, len(c) + 1):
                k -= 1
                y0, y1 = (
                    c[-i] - y1 * np.sqrt((k - 1.0) * (L + k - 1.0) / ((L + k) * k)),
                    y0 - y1 * (L + 2.0 * k - 1 - xx) / np.sqrt((L + k) * k),
                )
        return y0 - y1 * (L + 1 - xx) / np.sqrt(L + 1.0)

    w = np.zeros_like(A2, dtype=complex)
    w += lag_clenshaw(M - 1, B, np.array([diag_scaled[0, M - 1]]))
    for L in range(M - 2, -1, -1):
        w = lag_clenshaw(L, B, np.diag(diag_scaled, L)) + w * A2 / np.sqrt(L + 1.0)

    W = np.real(w) * np.exp(-B / 2.0) / np.pi
    return float(W) if scalar else W


def wigner_grid(rho: DensityOperator, xs: np.ndarray, ps: np.ndarray) -> np.ndarray:
    """Wigner function on the outer grid xs x ps; shape (len(xs), len(ps))."""
    X, P = np.meshgrid(np.asarray(xs, float), np.asarray(ps, float), indexing="ij")
    return wigner(rho, X, P)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    lam, vec = np.linalg.eigh((mat + mat.conj().T) / 2)
    lam = np.clip(lam, 0.0, None)
    return (vec * np.sqrt(lam)) @ vec.conj().T


def _pure_component(rho: DensityOperator) -> np.ndarray | None:
    """Dominant eigenvector when rho is pure within tolerance, else None."""
    if purity(rho) < 1.0 - 1e-10:
        return None
    lam, vec = np.linalg.eigh(rho.matrix)
    return vec[:, -1]


def fidelity(rho: DensityOperator, sigma: DensityOperator) -> float:
    """Uhlmann fidelity F = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.

    When either argument is pure the expression collapses to the exact
    overlap <psi|other|psi>, which is used directly (cheaper and free of
    matrix square-root noise).
    """
    if rho.cutoff != sigma.cutoff:
        raise DomainError("fidelity requires matching cutoffs")
    for op in (rho, sigma):
        lam_min = float(np.linalg.eigvalsh((op.matrix + op.matrix.conj().T) / 2).min())
        if lam_min < POSITIVITY_TOL:
            raise DomainError(f"fidelity input has negative eigenvalue {lam_min:.3e}")

    psi = _pure_component(sigma)
    other = rho
    if psi is None:
        psi = _pure_component(rho)
        other = sigma
    if psi is not None:
        return float(np.real(psi.conj() @ other.matrix @ psi))

    sq = _psd_sqrt(rho.matrix)
    inner = sq @ sigma.matrix @ sq
    lam = np.clip(np.linalg.eigvalsh((inner + inner.conj().T) / 2), 0.0, None)
    return float(np.sum(np.sqrt(lam)) ** 2)


def fidelity_to_pure(rho: DensityOperator, psi: StateVector) -> float:
    """<psi|rho|psi> without building the projector."""
    if rho.cutoff != psi.cutoff:
        raise DomainError("fidelity requires matching cutoffs")
    v = psi.amplitudes
    return float(np.real(v.conj() @ rho.matrix @ v))


def pad_density_operator(rho: DensityOperator, cutoff: FockCutoff) -> DensityOperator:
    """Embed a density operator in a larger basis by zero padding."""
    if cutoff.n_max < rho.cutoff.n_max:
        raise DomainError(
            f"cannot pad from n_max={rho.cutoff.n_max} down to {cutoff.n_max}")
    if cutoff.n_max == rho.cutoff.n_max:
        return rho
    out = np.zeros((cutoff.dimension, cutoff.dimension), dtype=complex)
    out[:rho.dimension, :rho.dimension] = rho.matrix
    return DensityOperator(out, cutoff)


def purity(rho: DensityOperator) -> float:
    return float(np.real(np.trace(rho.matrix @ rho.matrix)))


def mean_photon_number(rho: DensityOperator) -> float:
    return float(np.real(np.sum(np.arange(rho.dimension) * np.diag(rho.matrix))))


def parity_expectation(rho: DensityOperator) -> float:
    """<(-1)^n>; equals pi * W(0, 0) under this Wigner normalization."""
    signs = np.where(np.arange(rho.dimension) % 2 == 0, 1.0, -1.0)
    return float(np.real(np.sum(signs * np.diag(rho.matrix))))
