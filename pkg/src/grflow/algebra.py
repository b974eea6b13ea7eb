"""Quadratic Lie algebras (Courant algebroids over a point) and tensor utilities.

Conventions used throughout the package:

* ``eta`` is the invariant pairing; it is the *only* operator used to raise
  and lower indices.
* ``c[a, b, g] = <[e_a, e_b], e_g>`` are the structure coefficients with all
  three indices down; total antisymmetry encodes invariance of the pairing.
* Dense ``float64`` arrays everywhere; the code targets desk scale (n <= 16),
  so n^4 contractions are cheap and no sparsity is attempted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidLieAlgebra, NonInvertiblePairing, SingularBasis

# Relative reciprocal-condition threshold below which eta counts as singular.
ETA_SINGULAR_RTOL = 1e-12
RESIDUAL_TOL = 1e-10


def _sym_residual(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.T)))


@dataclass(frozen=True)
class QuadraticLieAlgebra:
    """A quadratic Lie algebra (pairing ``eta``, structure tensor ``c``).

    Construction does not validate the bracket axioms; call
    :func:`validate_algebra` for that.  ``eta`` must at least be symmetric
    and numerically invertible, since every other operation relies on it.
    """

    eta: np.ndarray
    c: np.ndarray
    eta_inv: np.ndarray = field(init=False, repr=False, compare=False)
    _c_mixed: np.ndarray = field(init=False, repr=False, compare=False)
    _c_up: np.ndarray = field(init=False, repr=False, compare=False)
    _gram_cc: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        c = np.asarray(self.c, dtype=float)
        if eta.ndim != 2 or eta.shape[0] != eta.shape[1]:
            raise NonInvertiblePairing(f"eta must be square, got shape {eta.shape}")
        n = eta.shape[0]
        if c.shape != (n, n, n):
            raise InvalidLieAlgebra(f"c must have shape {(n, n, n)}, got {c.shape}")
        if _sym_residual(eta) > 1e-12 * max(1.0, float(np.max(np.abs(eta)))):
            raise NonInvertiblePairing("eta is not symmetric")
        w = np.linalg.eigvalsh(eta)
        if np.min(np.abs(w)) <= ETA_SINGULAR_RTOL * np.max(np.abs(w)):
            raise NonInvertiblePairing(
                f"eta numerically singular: |lambda|_min/|lambda|_max = "
                f"{np.min(np.abs(w)) / np.max(np.abs(w)):.3e}"
            )
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "c", c)
        eta_inv = np.linalg.inv(eta)
        object.__setattr__(self, "eta_inv", eta_inv)
        object.__setattr__(self, "_c_mixed", np.einsum("abd,dg->abg", c, eta_inv))
        c_up = np.einsum("ad,be,gz,dez->abg", eta_inv, eta_inv, eta_inv, c)
        object.__setattr__(self, "_c_up", c_up)
        # Gram contraction c^{a g d} c_{b g d}, reused by the curvature closed forms.
        object.__setattr__(self, "_gram_cc", np.einsum("agd,bgd->ab", c_up, c))

    @property
    def n(self) -> int:
        return self.eta.shape[0]

    # -- index gymnastics ---------------------------------------------------

    def raise_slot(self, t: np.ndarray, slot: int) -> np.ndarray:
        return np.tensordot(self.eta_inv, t, axes=([1], [slot])).transpose(
            _restore_axes(t.ndim, slot)
        )

    def lower_slot(self, t: np.ndarray, slot: int) -> np.ndarray:
        return np.tensordot(self.eta, t, axes=([1], [slot])).transpose(
            _restore_axes(t.ndim, slot)
        )

    @property
    def c_mixed(self) -> np.ndarray:
        """c with the last index raised: ``c_mixed[a,b,g] = c_{ab}{}^g``."""
        return self._c_mixed

    @property
    def c_up(self) -> np.ndarray:
        """c with all indices raised."""
        return self._c_up

    def bracket(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Lie bracket [u, v] on coordinate vectors (index up)."""
        return np.einsum("a,b,abg->g", u, v, self.c_mixed)

    def ad(self, u: np.ndarray) -> np.ndarray:
        """Matrix of ad_u = [u, .] acting on vectors."""
        return np.einsum("a,abg->gb", u, self.c_mixed)

    def pair(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(u @ self.eta @ v)

    def norm_c_sq(self) -> float:
        """The invariant ||c||^2_eta = c_{abg} c^{abg} (can be negative or zero)."""
        return float(np.einsum("abg,abg->", self.c, self.c_up))


def _restore_axes(ndim: int, slot: int):
    # tensordot puts the contracted slot first; permute it back into place.
    axes = list(range(1, ndim))
    axes.insert(slot, 0)
    return axes


@dataclass
class Tensor:
    """Dense tensor with an up/down variance record per slot.

    Only raising/lowering needs the record; contraction-heavy code works on
    raw arrays and tracks variance by convention.
    """

    data: np.ndarray
    variance: tuple[str, ...]

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != len(self.variance):
            raise ValueError("variance record does not match tensor order")
        if any(v not in ("u", "d") for v in self.variance):
            raise ValueError("variance entries must be 'u' or 'd'")

    @property
    def order(self) -> int:
        return self.data.ndim

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.data, dtype=dtype)

    def raise_slot(self, a: QuadraticLieAlgebra, slot: int) -> "Tensor":
        if self.variance[slot] == "u":
            return self
        v = list(self.variance)
        v[slot] = "u"
        return Tensor(a.raise_slot(self.data, slot), tuple(v))

    def lower_slot(self, a: QuadraticLieAlgebra, slot: int) -> "Tensor":
        if self.variance[slot] == "d":
            return self
        v = list(self.variance)
        v[slot] = "d"
        return Tensor(a.lower_slot(self.data, slot), tuple(v))


@dataclass
class ValidationReport:
    antisymmetry_residual: float
    jacobi_residual: float
    eta_signature: tuple[int, int]
    eta_condition: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "antisymmetry_residual": self.antisymmetry_residual,
            "jacobi_residual": self.jacobi_residual,
            "eta_signature": list(self.eta_signature),
            "eta_condition": self.eta_condition,
            "passed": self.passed,
        }


def validate_algebra(a: QuadraticLieAlgebra) -> ValidationReport:
    """Check total antisymmetry of c and the Jacobi identity.

    Residuals are relative: antisymmetry against max|c|, Jacobi against the
    squared scale of the mixed structure tensor, so acceptance at 1e-10 is
    scale-invariant.
    """
    c = a.c
    scale = max(float(np.max(np.abs(c))), np.finfo(float).tiny) if c.size else 1.0
    anti = max(
        float(np.max(np.abs(c + c.transpose(1, 0, 2)))),
        float(np.max(np.abs(c + c.transpose(0, 2, 1)))),
    )
    anti_res = anti / scale if np.any(c) else 0.0

    cm = a.c_mixed
    j = np.einsum("abe,egd->abgd", cm, cm)
    jac = j + j.transpose(1, 2, 0, 3) + j.transpose(2, 0, 1, 3)
    jscale = max(float(np.max(np.abs(cm))) ** 2, np.finfo(float).tiny)
    jac_res = float(np.max(np.abs(jac))) / jscale if np.any(cm) else 0.0

    w = np.linalg.eigvalsh(a.eta)
    sig = (int(np.sum(w > 0)), int(np.sum(w < 0)))
    cond = float(np.max(np.abs(w)) / np.min(np.abs(w)))
    passed = anti_res <= RESIDUAL_TOL and jac_res <= RESIDUAL_TOL
    return ValidationReport(anti_res, jac_res, sig, cond, passed)


# -- presets -----------------------------------------------------------------

_EPS3 = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    _EPS3[_i, _j, _k] = 1.0
    _EPS3[_j, _i, _k] = -1.0
    _EPS3[_i, _k, _j] = -1.0
_EPS3.setflags(write=False)


def epsilon3() -> np.ndarray:
    """Totally antisymmetric epsilon on three indices."""
    return _EPS3.copy()


def abelian(n: int, p: int) -> QuadraticLieAlgebra:
    """Zero bracket with pairing diag(+1 x p, -1 x (n-p))."""
    if not 0 <= p <= n:
        raise NonInvertiblePairing(f"signature ({p},{n - p}) invalid")
    eta = np.diag(np.concatenate([np.ones(p), -np.ones(n - p)]))
    return QuadraticLieAlgebra(eta, np.zeros((n, n, n)))


def so3(scale: float = 1.0) -> QuadraticLieAlgebra:
    """so(3) with Euclidean pairing; c = scale * epsilon."""
    return QuadraticLieAlgebra(np.eye(3), scale * epsilon3())


def su2_structure() -> np.ndarray:
    """Structure constants of su(2) in the basis [x_i, x_j] = eps_ijk x_k."""
    return epsilon3()


def cotangent_double(h_struct: np.ndarray) -> QuadraticLieAlgebra:
    """The double h + h* with the coadjoint action and duality pairing.

    ``h_struct[i,j,k]`` are structure constants of h, [x_i,x_j] = f_ijk x_k.
    The bracket on the double is [x+xi, y+up] = [x,y] + ad*_x up - ad*_y xi,
    which is a Lie algebra precisely when h is; the duality pairing
    <x+xi, y+up> = xi(y) + up(x) is invariant, of signature (dim h, dim h).
    """
    f = np.asarray(h_struct, dtype=float)
    m = f.shape[0]
    if f.shape != (m, m, m):
        raise InvalidLieAlgebra("h structure constants must be m x m x m")
    jac = np.einsum("ijl,lkm->ijkm", f, f)
    jac = jac + jac.transpose(1, 2, 0, 3) + jac.transpose(2, 0, 1, 3)
    fscale = max(float(np.max(np.abs(f))) ** 2, np.finfo(float).tiny)
    if np.any(f) and np.max(np.abs(jac)) / fscale > RESIDUAL_TOL:
        raise InvalidLieAlgebra("h fails the Jacobi identity")
    anti = float(np.max(np.abs(f + f.transpose(1, 0, 2)))) if np.any(f) else 0.0
    if anti > RESIDUAL_TOL * fscale:
        raise InvalidLieAlgebra("h structure constants not antisymmetric in i,j")

    n = 2 * m
    eta = np.zeros((n, n))
    eta[:m, m:] = np.eye(m)
    eta[m:, :m] = np.eye(m)

    # Bracket table with the value index up, then lower with eta.
    br = np.zeros((n, n, n))
    br[:m, :m, :m] = f
    # ad*_{x_i} xi^j = -f[i,l,j] xi^l
    br[:m, m:, m:] = -f.transpose(0, 2, 1)
    br[m:, :m, m:] = f.transpose(2, 0, 1)  # = -br[i, m+j] transposed in (i, j)
    c = np.einsum("abd,dg->abg", br, eta)
    return QuadraticLieAlgebra(eta, c)


def complex_double_su2(scale: float = 1.0) -> QuadraticLieAlgebra:
    """Realification of sl(2,C) with (scaled) imaginary Killing pairing.

    Basis (x_1..x_3, y_1..y_3) with [x_i,x_j] = s eps x, [x_i,y_j] = s eps y,
    [y_i,y_j] = -s eps x; both the x- and y-spans are isotropic for the
    pairing <x_i, y_j> = delta_ij, giving signature (3, 3).
    """
    s = float(scale)
    eps = epsilon3()
    n = 6
    eta = np.zeros((n, n))
    eta[:3, 3:] = np.eye(3)
    eta[3:, :3] = np.eye(3)
    br = np.zeros((n, n, n))
    br[:3, :3, :3] = s * eps
    br[:3, 3:, 3:] = s * eps
    br[3:, :3, 3:] = -s * eps.transpose(1, 0, 2)
    br[3:, 3:, :3] = -s * eps
    c = np.einsum("abd,dg->abg", br, eta)
    return QuadraticLieAlgebra(eta, c)


def preset_algebra(name: str, **params) -> QuadraticLieAlgebra:
    """Registry entry point used by the CLI and tests."""
    if name == "abelian":
        return abelian(int(params.get("n", 4)), int(params.get("p", 2)))
    if name == "so3":
        return so3(float(params.get("scale", 1.0)))
    if name == "cotangent_double":
        h = params.get("h", "su2")
        if isinstance(h, str):
            if h != "su2":
                raise InvalidLieAlgebra(f"unknown base Lie algebra preset '{h}'")
            h = su2_structure()
        return cotangent_double(np.asarray(h, dtype=float))
    if name == "complex_double_su2":
        return complex_double_su2(float(params.get("scale", 1.0)))
    raise InvalidLieAlgebra(f"unknown algebra preset '{name}'")


def change_basis(a: QuadraticLieAlgebra, p: np.ndarray) -> QuadraticLieAlgebra:
    """Transform to the basis e'_a = P[:, a] (columns of P in old coordinates)."""
    p = np.asarray(p, dtype=float)
    n = a.n
    if p.shape != (n, n):
        raise SingularBasis(f"basis matrix must be {n} x {n}")
    sv = np.linalg.svd(p, compute_uv=False)
    if sv[-1] <= 1e-13 * sv[0]:
        raise SingularBasis("basis matrix numerically singular")
    eta2 = p.T @ a.eta @ p
    c2 = np.einsum("da,eb,zg,dez->abg", p, p, p, a.c)
    return QuadraticLieAlgebra(eta2, c2)
