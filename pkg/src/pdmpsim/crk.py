"""Continuous (dense-output) one-step Runge-Kutta methods.

A continuous RK method advances ``y' = f(t, y)`` by

    y_{n+1} = y_n + h * sum_i beta_i F_i,      F_i = f(t_n + c_i h, K_i),
    K_i     = y_n + h * sum_j a_ij F_j,

and in addition supplies polynomials ``b_i`` so that

    y(t_n + xi h) ~= y_n + h * sum_i b_i(xi) F_i,   0 <= xi <= 1.

Four such methods are built in (forward Euler, trapezoidal rule, two-stage
Radau IIA and three-stage Lobatto IIIA); their interpolants are the
collocation polynomials, so dense output keeps the order of the method.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, StepError

__all__ = [
    "Method",
    "ButcherTableau",
    "builtin_tableau",
    "solve_stages",
    "step",
    "dense_step_eval",
    "NEWTON_TOL",
    "NEWTON_MAX_ITER",
]

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
_FD_EPS = np.sqrt(np.finfo(float).eps)

Rhs = Callable[[float, np.ndarray], np.ndarray]


class Method(str, enum.Enum):
    EULER = "euler"
    TRAPEZOIDAL = "trapezoidal"
    RADAU_IIA_2 = "radau2"
    LOBATTO_IIIA_3 = "lobatto3"

    @classmethod
    def parse(cls, name: "str | Method") -> "Method":
        if isinstance(name, Method):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown method {name!r}; expected one of: {valid}") from None


def _horner(coefs: np.ndarray, x: float) -> np.ndarray:
    # coefs: (s, deg+1), lowest degree first
    out = np.zeros(coefs.shape[0])
    for k in range(coefs.shape[1] - 1, -1, -1):
        out = out * x + coefs[:, k]
    return out


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    """Coefficients of one continuous RK method.

    The exact rational coefficients are kept alongside their float images so
    that order conditions can be checked without rounding.

    Attributes
    ----------
    name : str
    A, beta, c : tuple of Fraction
        Butcher coefficients (``A`` row-major, ``s x s``).
    interp : tuple of tuple of Fraction
        ``interp[i][k]`` is the coefficient of ``xi**k`` in ``b_i(xi)``.
    order : int
        Classical (and uniform dense) order of the method.
    """

    name: str
    A_exact: tuple[tuple[Fraction, ...], ...]
    beta_exact: tuple[Fraction, ...]
    c_exact: tuple[Fraction, ...]
    interp_exact: tuple[tuple[Fraction, ...], ...]
    order: int
    A: np.ndarray = field(init=False, repr=False)
    beta: np.ndarray = field(init=False, repr=False)
    c: np.ndarray = field(init=False, repr=False)
    interp: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        s = len(self.beta_exact)
        if len(self.c_exact) != s or len(self.A_exact) != s or any(len(r) != s for r in self.A_exact):
            raise ValueError("inconsistent tableau dimensions")
        if len(self.interp_exact) != s:
            raise ValueError("need one interpolation polynomial per stage")
        deg = max(len(p) for p in self.interp_exact)
        interp = np.zeros((s, deg))
        for i, p in enumerate(self.interp_exact):
            interp[i, : len(p)] = [float(v) for v in p]
        for name, val in (
            ("A", np.array([[float(v) for v in r] for r in self.A_exact])),
            ("beta", np.array([float(v) for v in self.beta_exact])),
            ("c", np.array([float(v) for v in self.c_exact])),
            ("interp", interp),
        ):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def s(self) -> int:
        return len(self.beta_exact)

    @property
    def declared_order(self) -> int:
        return self.order

    @property
    def is_explicit(self) -> bool:
        return all(self.A_exact[i][j] == 0 for i in range(self.s) for j in range(i, self.s))

    def b(self, xi: float) -> np.ndarray:
        """Interpolation weights ``b_i(xi)``; exact at ``xi`` = 0 and 1."""
        if xi == 0.0:
            return np.zeros(self.s)
        if xi == 1.0:
            return self.beta.copy()
        return _horner(self.interp, xi)

    def b_prime(self, xi: float) -> np.ndarray:
        deg = self.interp.shape[1]
        d = self.interp[:, 1:] * np.arange(1, deg)
        return _horner(d, xi)

    def b_exact(self, xi: Fraction) -> tuple[Fraction, ...]:
        return tuple(sum((coef * xi**k for k, coef in enumerate(p)), Fraction(0)) for p in self.interp_exact)

    def __repr__(self) -> str:
        return f"ButcherTableau({self.name!r}, s={self.s}, order={self.order})"


def _F(*vals) -> tuple[Fraction, ...]:
    return tuple(Fraction(v) for v in vals)


_F0 = Fraction(0)


def _build(method: Method) -> ButcherTableau:
    if method is Method.EULER:
        return ButcherTableau(
            "euler", ((_F0,),), _F(1), _F(0), (_F(0, 1),), order=1,
        )
    if method is Method.TRAPEZOIDAL:
        return ButcherTableau(
            "trapezoidal",
            (_F(0, 0), _F("1/2", "1/2")),
            _F("1/2", "1/2"),
            _F(0, 1),
            # b1 = xi(2-xi)/2, b2 = xi^2/2
            (_F(0, 1, "-1/2"), _F(0, 0, "1/2")),
            order=2,
        )
    if method is Method.RADAU_IIA_2:
        return ButcherTableau(
            "radau2",
            (_F("5/12", "-1/12"), _F("3/4", "1/4")),
            _F("3/4", "1/4"),
            _F("1/3", 1),
            # b1 = 3/4 xi(2-xi), b2 = 3/4 xi(xi-2/3)
            (_F(0, "3/2", "-3/4"), _F(0, "-1/2", "3/4")),
            order=3,
        )
    if method is Method.LOBATTO_IIIA_3:
        return ButcherTableau(
            "lobatto3",
            (_F(0, 0, 0), _F("5/24", "1/3", "-1/24"), _F("1/6", "2/3", "1/6")),
            _F("1/6", "2/3", "1/6"),
            _F(0, "1/2", 1),
            # b1 = 2xi(xi^2/3 - 3xi/4 + 1/2), b2 = 4xi^2(1/2 - xi/3), b3 = 2xi^2(xi/3 - 1/4)
            (_F(0, 1, "-3/2", "2/3"), _F(0, 0, 2, "-4/3"), _F(0, 0, "-1/2", "2/3")),
            order=4,
        )
    raise ValueError(method)  # pragma: no cover


_BUILTIN = {m: _build(m) for m in Method}


def builtin_tableau(name: "str | Method") -> ButcherTableau:
    """Return one of the four built-in continuous RK methods.

    ``name`` may be a :class:`Method` or its CLI spelling
    (``euler``, ``trapezoidal``, ``radau2``, ``lobatto3``).
    """
    return _BUILTIN[Method.parse(name)]


def _eval_stages(rhs: Rhs, t: float, h: float, c: np.ndarray, K: np.ndarray) -> np.ndarray:
    return np.stack([np.asarray(rhs(t + c[i] * h, K[i]), dtype=float) for i in range(K.shape[0])])


def solve_stages(
    tableau: ButcherTableau,
    rhs: Rhs,
    t: float,
    y: np.ndarray,
    h: float,
    *,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> np.ndarray:
    """Solve the stage equations and return the stage derivatives.

    Returns
    -------
    F : ndarray, shape (s, n)
        ``F[i] = rhs(t + c_i h, K_i)``.

    Raises
    ------
    StepError
        If the implicit stage system does not converge within ``max_iter``
        Newton iterations.
    """
    if not h > 0:
        raise DomainError(f"step size must be positive, got {h}")
    y = np.asarray(y, dtype=float)
    s, n = tableau.s, y.size
    A, c = tableau.A, tableau.c

    if tableau.is_explicit:
        F = np.empty((s, n))
        for i in range(s):
            k = y + h * (A[i, :i] @ F[:i]) if i else y
            F[i] = rhs(t + c[i] * h, k)
        return F

    scale = max(1.0, float(np.max(np.abs(y))) if n else 1.0)
    f0 = np.asarray(rhs(t, y), dtype=float)
    K = y + h * np.outer(c, f0)
    last_update = np.inf
    res = np.inf
    eye = np.eye(s * n)
    for _ in range(max_iter):
        F = _eval_stages(rhs, t, h, c, K)
        G = K - y - h * (A @ F)
        res = float(np.max(np.abs(G)))
        if not np.isfinite(res):
            break
        if res <= tol * scale and last_update <= tol * scale:
            return F
        # block Jacobian I - h (A kron I) diag(df/dy(K_j)), forward differences
        J = eye.copy()
        for j in range(s):
            tj = t + c[j] * h
            Dj = np.empty((n, n))
            for col in range(n):
                delta = _FD_EPS * max(1.0, abs(K[j, col]))
                Kp = K[j].copy()
                Kp[col] += delta
                Dj[:, col] = (np.asarray(rhs(tj, Kp), dtype=float) - F[j]) / delta
            for i in range(s):
                if A[i, j] != 0.0:
                    J[i * n : (i + 1) * n, j * n : (j + 1) * n] -= h * A[i, j] * Dj
        try:
            dK = np.linalg.solve(J, -G.reshape(-1)).reshape(s, n)
        except np.linalg.LinAlgError:
            # damped fixed-point fallback
            dK = 0.5 * (y + h * (A @ F) - K)
        K = K + dK
        last_update = float(np.max(np.abs(dK)))
    raise StepError("implicit stage equations did not converge", t=t, h=h, residual=res)


def step(tableau: ButcherTableau, rhs: Rhs, t: float, y: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Advance one step; returns ``(y_next, F)`` where ``F`` is the stage data."""
    y = np.asarray(y, dtype=float)
    F = solve_stages(tableau, rhs, t, y, h)
    return y + h * (tableau.beta @ F), F


def dense_step_eval(tableau: ButcherTableau, F: np.ndarray, y: np.ndarray, h: float, xi: float) -> np.ndarray:
    """Evaluate the in-step interpolant at fraction ``xi`` of the step."""
    if not 0.0 <= xi <= 1.0:
        raise DomainError(f"xi must lie in [0, 1], got {xi}")
    y = np.asarray(y, dtype=float)
    if xi == 0.0:
        return y.copy()
    return y + h * (tableau.b(xi) @ F)


def check_tableau_exact(tableau: ButcherTableau) -> list[str]:
    """Return the list of violated structural conditions (empty when valid).

    Checked in exact rational arithmetic: ``sum(beta) == 1``,
    ``b_i(0) == 0``, ``b_i(1) == beta_i`` and ``c_i == sum_j a_ij``.
    """
    problems = []
    if sum(tableau.beta_exact) != 1:
        problems.append("sum(beta) != 1")
    if any(v != 0 for v in tableau.b_exact(Fraction(0))):
        problems.append("b_i(0) != 0")
    if tableau.b_exact(Fraction(1)) != tuple(tableau.beta_exact):
        problems.append("b_i(1) != beta_i")
    for i, row in enumerate(tableau.A_exact):
        if sum(row) != tableau.c_exact[i]:
            problems.append(f"c_{i + 1} != sum_j a_{i + 1}j")
    return problems


def all_tableaus() -> Sequence[ButcherTableau]:
    return tuple(_BUILTIN[m] for m in Method)
