"""Truncated Fock-space states and operators.

Everything downstream works on dense complex arrays over a fixed, ordered
layout of bosonic modes, each truncated at a finite dimension.  Multi-mode
operators are Kronecker products with the first mode slowest (row-major
flattening of the occupation tuple).  States and operators are immutable
after construction; operations return new objects.

Units: hbar = 1, rates are expressed in units of the slow emission rate,
times in its inverse.  The quadratures are x = (a + a^dag)/sqrt(2) and
p = i(a^dag - a)/sqrt(2), so [x, p] = i and the vacuum has Var x = 1/2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_genlaguerre

# Population allowed in the top two Fock levels of any mode before a state
# is flagged truncation-unsafe.
TAIL_GUARD = 1e-6

# Default sampling grid for position-space checks (peak locations etc.).
POSITION_GRID = np.linspace(-8.0, 8.0, 2048)


class LayoutError(ValueError):
    """Modes of the operands do not match."""


class TruncationError(RuntimeError):
    """State left the safe region of the truncated basis."""


@dataclass(frozen=True)
class ModeLayout:
    """Ordered set of labeled modes with truncation dimensions."""

    modes: tuple[tuple[str, int], ...]

    def __post_init__(self):
        labels = [m[0] for m in self.modes]
        if len(set(labels)) != len(labels):
            raise LayoutError(f"duplicate mode labels in {labels}")
        for label, dim in self.modes:
            if dim < 2:
                raise LayoutError(f"mode {label!r} needs dimension >= 2, got {dim}")

    @staticmethod
    def single(dim: int, label: str = "m") -> "ModeLayout":
        return ModeLayout(((label, dim),))

    @property
    def dim(self) -> int:
        out = 1
        for _, d in self.modes:
            out *= d
        return out

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(m[0] for m in self.modes)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(m[1] for m in self.modes)

    def axis(self, label: str) -> int:
        for i, (name, _) in enumerate(self.modes):
            if name == label:
                return i
        raise LayoutError(f"no mode {label!r} in layout {self.labels}")

    def mode_dim(self, label: str) -> int:
        return self.modes[self.axis(label)][1]

    def is_single_mode(self) -> bool:
        return len(self.modes) == 1


def _require_same_layout(a, b):
    if a.layout != b.layout:
        raise LayoutError(
            f"layout mismatch: {a.layout.modes} vs {b.layout.modes}")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


class StateVector:
    """Pure state on a mode layout; amplitudes are read-only."""

    __slots__ = ("layout", "amps")

    def __init__(self, layout: ModeLayout, amps, copy: bool = True):
        amps = np.asarray(amps, dtype=np.complex128).reshape(-1)
        if amps.size != layout.dim:
            raise LayoutError(
                f"amplitude vector of length {amps.size} does not fit layout "
                f"dimension {layout.dim}")
        self.layout = layout
        self.amps = _frozen(amps.copy() if copy else amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalize(self) -> "StateVector":
        n = self.norm()
        if n < 1e-12:
            raise ValueError("cannot normalize a zero vector")
        return StateVector(self.layout, self.amps / n, copy=False)

    def overlap(self, other: "StateVector") -> complex:
        _require_same_layout(self, other)
        return complex(np.vdot(self.amps, other.amps))

    def expect(self, op: "ModeOperator") -> complex:
        _require_same_layout(self, op)
        return complex(np.vdot(self.amps, op.mat @ self.amps))

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(self.layout, np.outer(self.amps, self.amps.conj()),
                             copy=False)

    def mode_populations(self, label: str) -> np.ndarray:
        """Marginal occupation probabilities of one mode."""
        probs = np.abs(self.amps.reshape(self.layout.dims)) ** 2
        axis = self.layout.axis(label)
        other = tuple(i for i in range(len(self.layout.modes)) if i != axis)
        return probs.sum(axis=other)

    def tail_populations(self) -> dict[str, float]:
        """Weight in the top two Fock levels of each mode."""
        out = {}
        for label, _ in self.layout.modes:
            pops = self.mode_populations(label)
            out[label] = float(pops[-2:].sum())
        return out

    @property
    def truncation_unsafe(self) -> bool:
        return max(self.tail_populations().values()) >= TAIL_GUARD


class DensityMatrix:
    """Mixed state (or matrix-valued rate) on a mode layout."""

    __slots__ = ("layout", "mat")

    def __init__(self, layout: ModeLayout, mat, copy: bool = True):
        mat = np.asarray(mat, dtype=np.complex128)
        if mat.shape != (layout.dim, layout.dim):
            raise LayoutError(
                f"matrix of shape {mat.shape} does not fit layout dimension "
                f"{layout.dim}")
        self.layout = layout
        self.mat = _frozen(mat.copy() if copy else mat)

    def trace(self) -> complex:
        return complex(np.trace(self.mat))

    def expect(self, op: "ModeOperator") -> complex:
        _require_same_layout(self, op)
        return complex(np.trace(op.mat @ self.mat))

    def hermiticity_defect(self) -> float:
        return float(np.abs(self.mat - self.mat.conj().T).max())

    def mode_populations(self, label: str) -> np.ndarray:
        dims = self.layout.dims
        diag = np.real(np.diagonal(self.mat)).reshape(dims)
        axis = self.layout.axis(label)
        other = tuple(i for i in range(len(dims)) if i != axis)
        return diag.sum(axis=other)

    def tail_populations(self) -> dict[str, float]:
        out = {}
        for label, _ in self.layout.modes:
            pops = self.mode_populations(label)
            out[label] = float(pops[-2:].sum())
        return out

    @property
    def truncation_unsafe(self) -> bool:
        return max(self.tail_populations().values()) >= TAIL_GUARD

    def partial_trace(self, keep: tuple[str, ...]) -> "DensityMatrix":
        """Trace out every mode not listed in ``keep`` (order preserved)."""
        n = len(self.layout.modes)
        dims = self.layout.dims
        keep_axes = sorted(self.layout.axis(lb) for lb in keep)
        if [self.layout.labels[i] for i in keep_axes] != list(keep):
            raise LayoutError("keep must follow the layout's mode order")
        # einsum subscripts: kept modes get distinct row/col symbols, traced
        # modes share one symbol on both sides
        sym = iter("abcdefghijklmnopqrstuvwxyz")
        row, col = [], []
        for ax in range(n):
            s = next(sym)
            if ax in keep_axes:
                row.append(s)
                col.append(next(sym))
            else:
                row.append(s)
                col.append(s)
        out = "".join(row[ax] for ax in keep_axes) \
            + "".join(col[ax] for ax in keep_axes)
        t = np.einsum("".join(row) + "".join(col) + "->" + out,
                      self.mat.reshape(dims + dims))
        kept = ModeLayout(tuple(self.layout.modes[i] for i in keep_axes))
        d = kept.dim
        return DensityMatrix(kept, t.reshape(d, d), copy=False)


@dataclass(frozen=True, eq=False)
class ModeOperator:
    """Dense operator with a layout and a unit tag.

    unit is one of "dimensionless", "sqrt_rate", "rate"; it is bookkeeping
    only and never enters the numerics.
    """

    layout: ModeLayout
    mat: np.ndarray
    unit: str = "dimensionless"

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=np.complex128)
        if mat.shape != (self.layout.dim, self.layout.dim):
            raise LayoutError(
                f"operator shape {mat.shape} does not fit layout dimension "
                f"{self.layout.dim}")
        object.__setattr__(self, "mat", _frozen(mat))

    def dag(self) -> "ModeOperator":
        return ModeOperator(self.layout, self.mat.conj().T, self.unit)

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return bool(np.abs(self.mat - self.mat.conj().T).max() <= tol)

    def apply(self, state: StateVector) -> StateVector:
        _require_same_layout(self, state)
        return StateVector(state.layout, self.mat @ state.amps, copy=False)


def mode_operators(dim: int, label: str = "m") -> dict[str, ModeOperator]:
    """Single-mode ladder and quadrature operators at truncation ``dim``."""
    if dim < 2:
        raise ValueError(f"truncation must be at least 2, got {dim}")
    layout = ModeLayout.single(dim, label)
    a = np.zeros((dim, dim), dtype=np.complex128)
    idx = np.arange(1, dim)
    a[idx - 1, idx] = np.sqrt(idx)
    adag = a.conj().T
    x = (a + adag) / math.sqrt(2.0)
    p = 1j * (adag - a) / math.sqrt(2.0)
    n = adag @ a
    return {k: ModeOperator(layout, m) for k, m in
            (("a", a), ("a_dag", adag), ("x", x), ("p", p), ("n", n))}


def embed(op: ModeOperator, layout: ModeLayout, label: str) -> ModeOperator:
    """Lift a single-mode operator onto one mode of a larger layout."""
    if not op.layout.is_single_mode():
        raise LayoutError("embed expects a single-mode operator")
    axis = layout.axis(label)
    if layout.mode_dim(label) != op.layout.dim:
        raise LayoutError(
            f"mode {label!r} has dimension {layout.mode_dim(label)}, operator "
            f"has {op.layout.dim}")
    out = np.ones((1, 1), dtype=np.complex128)
    for i, (_, d) in enumerate(layout.modes):
        out = np.kron(out, op.mat if i == axis else np.eye(d))
    return ModeOperator(layout, out, op.unit)


def basis_state(layout: ModeLayout, occupations) -> StateVector:
    """Product Fock state |n_1, n_2, ...> for the given layout."""
    if isinstance(occupations, dict):
        occ = tuple(occupations.get(lb, 0) for lb in layout.labels)
    elif isinstance(occupations, (int, np.integer)):
        occ = (int(occupations),)
    else:
        occ = tuple(occupations)
    if len(occ) != len(layout.modes):
        raise LayoutError("one occupation number per mode required")
    for n, (label, d) in zip(occ, layout.modes):
        if not 0 <= n < d:
            raise ValueError(f"occupation {n} outside mode {label!r} (dim {d})")
    amps = np.zeros(layout.dim, dtype=np.complex128)
    amps[int(np.ravel_multi_index(occ, layout.dims))] = 1.0
    return StateVector(layout, amps, copy=False)


def vacuum_state(layout: ModeLayout) -> StateVector:
    return basis_state(layout, (0,) * len(layout.modes))


def _coherent_amps(alpha: complex, dim: int) -> np.ndarray:
    """Raw coefficients exp(-|a|^2/2) a^n / sqrt(n!), not renormalized."""
    n = np.arange(dim)
    if alpha == 0:
        amps = np.zeros(dim, dtype=np.complex128)
        amps[0] = 1.0
        return amps
    # log-space magnitudes to stay finite at large n
    logmag = n * math.log(abs(alpha)) - 0.5 * _lgamma_vec(n + 1) \
        - abs(alpha) ** 2 / 2.0
    phase = np.exp(1j * n * np.angle(alpha))
    return np.exp(logmag) * phase


def _lgamma_vec(n):
    return np.array([math.lgamma(float(v)) for v in np.atleast_1d(n)])


def coherent_state(alpha: complex, dim: int) -> StateVector:
    """Truncated coherent state, renormalized on the truncated basis."""
    if abs(alpha) ** 2 > dim / 4.0:
        raise TruncationError(
            f"|alpha|^2 = {abs(alpha)**2:.3f} exceeds dim/4 = {dim / 4.0:.3f}; "
            "raise the truncation")
    layout = ModeLayout.single(dim)
    return StateVector(layout, _coherent_amps(alpha, dim), copy=False).normalize()


def cat_state(alpha: complex, parity, dim: int) -> StateVector:
    """Normalized |alpha> + (-1)^parity |-alpha> on the truncated basis.

    parity may be "even"/"odd" or an integer (taken mod 2).  The even cat
    keeps only even Fock components, the odd cat only odd ones.
    """
    if isinstance(parity, str):
        try:
            par = {"even": 0, "odd": 1}[parity]
        except KeyError:
            raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    else:
        par = int(parity) % 2
    if abs(alpha) ** 2 > dim / 4.0:
        raise TruncationError(
            f"|alpha|^2 = {abs(alpha)**2:.3f} exceeds dim/4 = {dim / 4.0:.3f}")
    plus = _coherent_amps(alpha, dim)
    # (-alpha)^n = (-1)^n alpha^n exactly, so the mirrored branch is a sign
    # flip of the first -- no second complex-log pass that would leave
    # rounding residue on the cancelled components
    signs = (-1.0) ** np.arange(dim)
    amps = plus + (-1.0) ** par * signs * plus
    nrm = np.linalg.norm(amps)
    if nrm < 1e-12:
        raise ValueError(
            f"cat amplitude alpha={alpha} with parity {par} is the zero vector")
    layout = ModeLayout.single(dim)
    return StateVector(layout, amps / nrm, copy=False)


def quadrature_jump_state(n_jumps: int, dim: int) -> StateVector:
    """Normalized x^n |0>: the state after n position-quadrature jumps."""
    if n_jumps < 0:
        raise ValueError("n_jumps must be non-negative")
    if dim < 2 * n_jumps + 4:
        raise TruncationError(
            f"dim {dim} too small for {n_jumps} quadrature jumps "
            f"(need >= {2 * n_jumps + 4})")
    ops = mode_operators(dim)
    amps = vacuum_state(ops["x"].layout).amps.copy()
    for _ in range(n_jumps):
        amps = ops["x"].mat @ amps
    return StateVector(ops["x"].layout, amps, copy=False).normalize()


def fidelity(psi: StateVector, phi: StateVector) -> float:
    """|<psi|phi>| for pure states on identical layouts."""
    _require_same_layout(psi, phi)
    return float(abs(np.vdot(psi.amps, phi.amps)))


# -- closed-form fidelity of the n-jump state with its coherent-superposition
#    ansatz |sqrt(n/2)> + (-1)^n |-sqrt(n/2)> ---------------------------------

def _gamma_half_integer(k: int) -> float:
    """Gamma(k/2) for positive integer k, by recursion from Gamma(1/2)."""
    if k <= 0:
        raise ValueError("k must be positive")
    if k % 2 == 0:
        return float(math.factorial(k // 2 - 1))
    g = math.sqrt(math.pi)
    m = 1
    while m + 2 <= k:
        g *= m / 2.0
        m += 2
    return g


def _kummer_terminating(m: int, b: float, z: float) -> float:
    """1F1(-m; b; z) for non-negative integer m as its exact finite sum."""
    term = 1.0
    total = 1.0
    for k in range(m):
        term *= (-m + k) * z / ((b + k) * (k + 1))
        total += term
    return total


def css_fidelity_closed(n: int) -> float:
    """Fidelity of the n-jump quadrature state with its two-component
    coherent-superposition ansatz, evaluated in closed form.

    Even and odd n take different branches; both reduce to finite
    polynomial sums and half-integer gamma values, so the result is exact
    up to float rounding.  Approaches ~0.97 for large n.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return 1.0
    pi4 = math.pi ** 0.25
    if n % 2 == 0:
        num = _gamma_half_integer(n + 1) \
            * _kummer_terminating(n // 2, 0.5, -n / 4.0)
        den = pi4 * math.sqrt(math.cosh(n / 2.0) * _gamma_half_integer(2 * n + 1))
    else:
        num = math.sqrt(n) * _gamma_half_integer(n + 2) \
            * _kummer_terminating((n - 1) // 2, 1.5, -n / 4.0)
        den = pi4 * math.sqrt(math.sinh(n / 2.0) * _gamma_half_integer(2 * n + 1))
    return num / den


# -- position-space sampling --------------------------------------------------

def hermite_functions(n_max: int, x: np.ndarray) -> np.ndarray:
    """Orthonormal Hermite functions phi_0..phi_{n_max} on the grid x.

    Stable two-term recurrence; phi_n is the position wavefunction of the
    Fock state |n> in units where the vacuum variance is 1/2.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1, x.size))
    out[0] = math.pi ** -0.25 * np.exp(-x * x / 2.0)
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for n in range(2, n_max + 1):
        out[n] = math.sqrt(2.0 / n) * x * out[n - 1] \
            - math.sqrt((n - 1) / n) * out[n - 2]
    return out


def position_wavefunction(state: StateVector,
                          x: np.ndarray | None = None) -> np.ndarray:
    """Sample the position-space wavefunction of a single-mode state on x
    (default grid: POSITION_GRID)."""
    if not state.layout.is_single_mode():
        raise LayoutError("position sampling is single-mode only")
    if x is None:
        x = POSITION_GRID
    basis = hermite_functions(state.layout.dim - 1, x)
    return state.amps @ basis


def position_density(state: StateVector,
                     x: np.ndarray | None = None) -> np.ndarray:
    return np.abs(position_wavefunction(state, x)) ** 2


# -- Wigner function ----------------------------------------------------------

def wigner(rho: DensityMatrix | StateVector, xs: np.ndarray, ps: np.ndarray
           ) -> np.ndarray:
    """Wigner function W(x, p) of a single-mode state on a rectangular grid.

    Normalized so that the double integral over phase space is 1 and
    W(0, 0) = <parity>/pi.  Returns an array of shape (len(ps), len(xs)).
    """
    if isinstance(rho, StateVector):
        rho = rho.to_density()
    if not rho.layout.is_single_mode():
        raise LayoutError("wigner is single-mode only")
    dim = rho.layout.dim
    X, P = np.meshgrid(np.asarray(xs, float), np.asarray(ps, float))
    r2 = 2.0 * (X * X + P * P)
    gauss = np.exp(-r2 / 2.0) / math.pi
    beta = math.sqrt(2.0) * (X - 1j * P)
    w = np.zeros_like(X)
    for m in range(dim):
        for n in range(m + 1):
            c = rho.mat[m, n]
            if abs(c) < 1e-18 and m != n:
                continue
            lag = eval_genlaguerre(n, m - n, r2)
            pref = (-1.0) ** n * math.exp(
                0.5 * (math.lgamma(n + 1) - math.lgamma(m + 1)))
            term = pref * beta ** (m - n) * lag * gauss
            if m == n:
                w += np.real(c) * np.real(term)
            else:
                w += 2.0 * np.real(c * term)
    return w
