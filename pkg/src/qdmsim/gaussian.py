"""Gaussian states and Gaussian channels in phase space.

Conventions used throughout the package:

* Quadratures are ordered **interleaved**, ``(x1, p1, x2, p2, ...)``.
  Mode ``k`` occupies rows/columns ``2k`` and ``2k + 1``.
* Vacuum variance is 1/2 (hbar = 1), so ``[x, p] = i`` and the vacuum
  covariance matrix is ``I / 2``.
* A rotated quadrature is ``x_angle = x cos(angle) + p sin(angle)``.

States and channels are immutable; every operation returns a new object.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

VACUUM_VARIANCE = 0.5

SYMMETRY_TOL = 1e-12
PHYSICALITY_TOL = 1e-9


def symplectic_form(n_modes: int) -> np.ndarray:
    """Standard symplectic form for ``n_modes`` in xpxp ordering."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _block_slice(mode: int) -> slice:
    return slice(2 * mode, 2 * mode + 2)


def _embed(block: np.ndarray, modes: tuple[int, ...], n_modes: int, fill: float) -> np.ndarray:
    """Place a 2k x 2k block acting on ``modes`` into a 2n x 2n matrix."""
    out = fill * np.eye(2 * n_modes)
    idx = np.concatenate([[2 * m, 2 * m + 1] for m in modes])
    out[np.ix_(idx, idx)] = block
    return out


def _check_mode(mode: int, n_modes: int) -> None:
    if not 0 <= mode < n_modes:
        raise ValueError(f"mode {mode} out of range for {n_modes} modes")


@dataclass(frozen=True)
class GaussianState:
    """First and second moments of an ``n_modes`` Gaussian state."""

    mean: np.ndarray
    cov: np.ndarray
    n_modes: int = field(init=False)

    def __post_init__(self):
        mean = _frozen(np.ravel(self.mean))
        cov = _frozen(self.cov)
        if mean.size % 2 or mean.size == 0:
            raise ValueError("mean vector must have positive even length")
        n = mean.size // 2
        if cov.shape != (2 * n, 2 * n):
            raise ValueError(f"cov shape {cov.shape} does not match {n} modes")
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(cov))):
            raise ValueError("covariance matrix is not symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "n_modes", n)

    def symplectic_eigenvalues(self) -> np.ndarray:
        """Williamson symplectic eigenvalues (sorted ascending)."""
        omega = symplectic_form(self.n_modes)
        ev = np.abs(np.linalg.eigvals(1j * omega @ self.cov))
        # eigenvalues of i*Omega*V come in +/- pairs
        return np.sort(ev)[::2]

    def is_physical(self, tol: float = PHYSICALITY_TOL) -> bool:
        """Bona-fide (uncertainty principle) check: all symplectic eigenvalues >= 1/2."""
        return bool(np.all(self.symplectic_eigenvalues() >= VACUUM_VARIANCE - tol))

    def mode_cov(self, mode: int) -> np.ndarray:
        _check_mode(mode, self.n_modes)
        s = _block_slice(mode)
        return np.array(self.cov[s, s])

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` phase-space samples, shape ``(n, 2 * n_modes)``."""
        return rng.multivariate_normal(self.mean, self.cov, size=n, method="eigh")


def vacuum(n_modes: int) -> GaussianState:
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    return GaussianState(np.zeros(2 * n_modes), VACUUM_VARIANCE * np.eye(2 * n_modes))


@dataclass(frozen=True)
class SymplecticOp:
    """Gaussian channel ``cov -> S cov S^T + N``, ``mean -> S mean``.

    For unitary (lossless) operations ``noise_add`` is zero and ``matrix``
    is symplectic.
    """

    matrix: np.ndarray
    noise_add: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        s = _frozen(self.matrix)
        if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] % 2:
            raise ValueError("matrix must be square with even dimension")
        noise = np.zeros_like(s) if self.noise_add is None else np.array(self.noise_add, dtype=float)
        if noise.shape != s.shape:
            raise ValueError("noise_add must match matrix shape")
        object.__setattr__(self, "matrix", s)
        object.__setattr__(self, "noise_add", _frozen(noise))

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0] // 2

    @property
    def is_unitary(self) -> bool:
        return not np.any(self.noise_add)

    def symplectic_defect(self) -> float:
        """max |S Omega S^T - Omega|; zero for a lossless op."""
        omega = symplectic_form(self.n_modes)
        return float(np.max(np.abs(self.matrix @ omega @ self.matrix.T - omega)))

    def is_valid_channel(self, tol: float = PHYSICALITY_TOL) -> bool:
        """Complete-positivity test ``N + i/2 (Omega - S Omega S^T) >= 0``."""
        omega = symplectic_form(self.n_modes)
        m = self.noise_add + 0.5j * (omega - self.matrix @ omega @ self.matrix.T)
        return bool(np.min(np.linalg.eigvalsh(m)) >= -tol)

    def apply(self, state: GaussianState) -> GaussianState:
        if state.n_modes != self.n_modes:
            raise ValueError(f"op acts on {self.n_modes} modes, state has {state.n_modes}")
        s = self.matrix
        cov = s @ state.cov @ s.T + self.noise_add
        return GaussianState(s @ state.mean, 0.5 * (cov + cov.T))

    __call__ = apply

    def then(self, other: SymplecticOp) -> SymplecticOp:
        """Composite channel: ``self`` first, then ``other``."""
        if other.n_modes != self.n_modes:
            raise ValueError("cannot compose ops on different mode counts")
        s2 = other.matrix
        noise = s2 @ self.noise_add @ s2.T + other.noise_add
        return SymplecticOp(
            s2 @ self.matrix,
            0.5 * (noise + noise.T),
            label=f"{self.label} -> {other.label}".strip(" ->"),
        )


def compose(*ops: SymplecticOp) -> SymplecticOp:
    """Compose ops in the order they are applied."""
    if not ops:
        raise ValueError("nothing to compose")
    out = ops[0]
    for op in ops[1:]:
        out = out.then(op)
    return out


def squeezer(r: float, angle: float = 0.0, mode: int = 0, n_modes: int = 1) -> SymplecticOp:
    """Single-mode squeezer.

    With ``angle = 0`` vacuum is mapped to ``Var x = e^{-2r}/2`` and
    ``Var p = e^{2r}/2``. A nonzero ``angle`` rotates the squeezed axis so
    that the quadrature ``x_angle`` carries the reduced noise.
    """
    if not np.isfinite(r):
        raise ValueError("squeezing parameter must be finite")
    _check_mode(mode, n_modes)
    rot = _rotation(angle)
    block = rot @ np.diag([np.exp(-r), np.exp(r)]) @ rot.T
    return SymplecticOp(_embed(block, (mode,), n_modes, 1.0), label=f"S(r={r:g},{angle:g})[{mode}]")


def phase_rotation(angle: float, mode: int = 0, n_modes: int = 1) -> SymplecticOp:
    """Rotate one mode's phase-space picture by ``angle`` (counter-clockwise)."""
    _check_mode(mode, n_modes)
    return SymplecticOp(_embed(_rotation(angle), (mode,), n_modes, 1.0), label=f"R({angle:g})[{mode}]")


def beamsplitter(transmissivity: float, mode_i: int, mode_j: int, n_modes: int | None = None) -> SymplecticOp:
    """Two-mode beam splitter with power transmissivity ``transmissivity``.

    Outputs are ``sqrt(T) a_i - sqrt(1-T) a_j`` on ``mode_i`` and
    ``sqrt(1-T) a_i + sqrt(T) a_j`` on ``mode_j``, applied identically to
    both quadratures. For 50:50 this gives ``(a_i - a_j)/sqrt2`` and
    ``(a_i + a_j)/sqrt2``.
    """
    if not 0.0 <= transmissivity <= 1.0:
        raise ValueError(f"transmissivity {transmissivity} outside [0, 1]")
    if mode_i == mode_j:
        raise ValueError("beam splitter needs two distinct modes")
    if n_modes is None:
        n_modes = max(mode_i, mode_j) + 1
    _check_mode(mode_i, n_modes)
    _check_mode(mode_j, n_modes)
    t, rr = np.sqrt(transmissivity), np.sqrt(1.0 - transmissivity)
    block = np.kron(np.array([[t, -rr], [rr, t]]), np.eye(2))
    return SymplecticOp(
        _embed(block, (mode_i, mode_j), n_modes, 1.0),
        label=f"BS(T={transmissivity:g})[{mode_i},{mode_j}]",
    )


def loss_channel(efficiency: float, mode: int = 0, n_modes: int = 1) -> SymplecticOp:
    """Pure-loss channel mixing a fraction ``1 - efficiency`` of vacuum into ``mode``."""
    if not 0.0 < efficiency <= 1.0:
        raise ValueError(f"efficiency {efficiency} outside (0, 1]")
    _check_mode(mode, n_modes)
    s = _embed(np.sqrt(efficiency) * np.eye(2), (mode,), n_modes, 1.0)
    noise = np.zeros((2 * n_modes, 2 * n_modes))
    noise[_block_slice(mode), _block_slice(mode)] = (1.0 - efficiency) * VACUUM_VARIANCE * np.eye(2)
    return SymplecticOp(s, noise, label=f"L(eta={efficiency:g})[{mode}]")


def quadrature_vector(n_modes: int, mode: int, angle: float) -> np.ndarray:
    """Unit projector selecting ``x_angle`` of one mode."""
    _check_mode(mode, n_modes)
    u = np.zeros(2 * n_modes)
    u[_block_slice(mode)] = np.cos(angle), np.sin(angle)
    return u


def homodyne_variance(state: GaussianState, mode: int, angle: float) -> float:
    u = quadrature_vector(state.n_modes, mode, angle)
    return float(u @ state.cov @ u)


def homodyne_mean(state: GaussianState, mode: int, angle: float) -> float:
    return float(quadrature_vector(state.n_modes, mode, angle) @ state.mean)


def displace(state: GaussianState, mode: int, dx: float, dp: float) -> GaussianState:
    """Shift the mean of ``mode`` by ``(dx, dp)``; covariance is untouched."""
    _check_mode(mode, state.n_modes)
    mean = np.array(state.mean)
    mean[_block_slice(mode)] += dx, dp
    return GaussianState(mean, state.cov)


def db_rel_vacuum(variance: float) -> float:
    """Noise power in dB relative to the vacuum variance 1/2."""
    return float(10.0 * np.log10(variance / VACUUM_VARIANCE))


def squeezing_db(r: float) -> float:
    """Noise reduction in dB for squeezing parameter ``r``."""
    return float(10.0 * np.log10(np.exp(2.0 * r)))


def r_from_db(db: float) -> float:
    """Inverse of :func:`squeezing_db`."""
    return float(db / 20.0 * np.log(10.0))
