"""Concrete theories and a numerical solver for braidings.

The Ising and Tambara-Yamagami constructors return F-data in the gauge
where every F-symbol not involving three copies of the non-invertible label
is a character value, and F^{qqq}_q is the normalised character table
times the Frobenius-Schur sign.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .algebra import EPS_SOLVER, FiniteAbelianGroup
from .category import (
    FMatrix,
    FusionRules,
    SkeletalData,
    admissible_f_tuples,
    from_dict,
    pivotal_and_fs,
    quantum_dimensions,
    to_dict,
)
from .errors import CapabilityError, PreconditionError, StructuralError

MAX_TY_RANK = 4


def _check_kappa(kappa: int) -> int:
    if kappa not in (1, -1):
        raise PreconditionError(f"kappa must be +1 or -1, got {kappa}")
    return kappa


def build_ising(kappa: int = 1) -> SkeletalData:
    """Ising data {0, 1, q} with F^{qqq}_q = kappa/sqrt2 [[1, 1], [1, -1]]."""
    kappa = _check_kappa(kappa)
    rules = FusionRules.from_triples(
        ("0", "1", "q"),
        (0, 1, 2),
        [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0), (0, 2, 2), (2, 0, 2), (1, 2, 2), (2, 1, 2),
         (2, 2, 0), (2, 2, 1)],
    )
    F = {}
    for a, b, c, d, rows, cols in admissible_f_tuples(rules):
        if (a, b, c, d) == (2, 2, 2, 2):
            mat = kappa / math.sqrt(2) * np.array([[1, 1], [1, -1]], dtype=complex)
        elif (a, b, c, d) in ((1, 2, 1, 2), (2, 1, 2, 1)):
            mat = -np.ones((1, 1), dtype=complex)
        else:
            mat = np.eye(len(rows), dtype=complex)
        F[(a, b, c, d)] = FMatrix(rows, cols, mat)
    return SkeletalData(rules, F, None, f"ising{kappa:+d}")


def build_tambara_yamagami_group(group: FiniteAbelianGroup, kappa: int = 1, name: str | None = None):
    """Tambara-Yamagami data over an arbitrary finite abelian group.

    Labels are the group elements in lexicographic order followed by q.
    The bicharacter is the standard one of ``group``.
    """
    kappa = _check_kappa(kappa)
    elems = group.elements
    n = len(elems)
    q = n
    index = {g: i for i, g in enumerate(elems)}
    labels = [group.name(g) for g in elems] + ["q"]
    if group.is_elementary_two and n == 2:
        labels[1] = "1"
    dual = [index[group.inverse(g)] for g in elems] + [q]
    triples = []
    for g, h in itertools.product(elems, repeat=2):
        triples.append((index[g], index[h], index[group.mul(g, h)]))
    for i in range(n):
        triples += [(i, q, q), (q, i, q), (q, q, i)]
    rules = FusionRules.from_triples(labels, dual, triples)

    def chi(i, j):
        return group.bicharacter(elems[i], elems[j])

    tau = kappa / math.sqrt(n)
    F = {}
    for a, b, c, d, rows, cols in admissible_f_tuples(rules):
        pattern = tuple(x == q for x in (a, b, c))
        if pattern == (True, True, True):
            mat = np.array([[tau * chi(f, e).conjugate() for e in cols] for f in rows])
        elif pattern == (False, True, False):
            mat = np.array([[chi(a, c)]])
        elif pattern == (True, False, True):
            mat = np.array([[chi(b, d)]])
        else:
            mat = np.eye(len(rows))
        F[(a, b, c, d)] = FMatrix(rows, cols, np.asarray(mat, dtype=complex))
    return SkeletalData(rules, F, None, name or f"ty_{group}_{kappa:+d}".replace(" ", ""))


def build_tambara_yamagami(n: int, kappa: int = 1) -> SkeletalData:
    """TY(Z2^n) with the dot-product bicharacter; n is limited to 1..4."""
    if not 1 <= n <= MAX_TY_RANK:
        raise PreconditionError(f"TY rank must be between 1 and {MAX_TY_RANK}, got {n}")
    return build_tambara_yamagami_group(FiniteAbelianGroup.elementary(n), kappa, f"ty{n}{kappa:+d}")


def build_theory(kind: str, n: int = 1, kappa: int = 1) -> SkeletalData:
    """Catalogue entry point: ``ising``, ``ty`` (Z2^n) or ``abelian_group`` (Z_n)."""
    if kind == "ising":
        return build_ising(kappa)
    if kind == "ty":
        return build_tambara_yamagami(n, kappa)
    if kind == "abelian_group":
        if n < 2:
            raise PreconditionError("cyclic group order must be at least 2")
        return build_tambara_yamagami_group(FiniteAbelianGroup.cyclic(n), kappa, f"ty_z{n}{kappa:+d}")
    raise PreconditionError(f"unknown theory kind {kind!r}")


# ---------------------------------------------------------------- hexagon solver


@dataclass(frozen=True)
class BraidingClass:
    """One gauge class of braidings found by the solver."""

    R: dict
    spins: tuple[complex, ...]
    self_braids: tuple[tuple[int, int, complex], ...]
    fs: dict
    residual: float

    def key(self) -> np.ndarray:
        return np.array([*self.spins, *(z for _, _, z in self.self_braids)])

    def theory(self, data: SkeletalData) -> SkeletalData:
        return data.with_R(self.R)


class _HexagonSystem:
    """Both hexagon equations as polynomials in unit-modulus R variables.

    Every unknown R^{ab}_c with a, b nonvacuum is exp(i angle). The residual
    is assembled from flat term lists so it can be evaluated in one pass.
    """

    def __init__(self, data: SkeletalData):
        rules = data.rules
        n = rules.size
        self.vars = [
            (a, b, c)
            for a, b in itertools.product(range(1, n), repeat=2)
            for c in rules.outcomes(a, b)
        ]
        index = {v: i for i, v in enumerate(self.vars)}
        one = len(self.vars)  # slot holding the constant 1

        def slot(a, b, c):
            return one if a == 0 or b == 0 else index[(a, b, c)]

        lin, quad = [], []  # (eq, coef, var, conj) and (eq, coef, var1, var2, conj)
        neq = 0
        N = rules.N
        for conj in (False, True):
            for a, b, c, d in itertools.product(range(n), repeat=4):
                for x in rules.outcomes(a, b):
                    if not N[x, c, d]:
                        continue
                    for z in rules.outcomes(c, a):
                        if not N[b, z, d]:
                            continue
                        for y in rules.outcomes(b, c):
                            if N[a, y, d]:
                                coef = data.f(b, c, a, d, z, y) * data.f(a, b, c, d, y, x)
                                # reversed braiding uses conj(R^{ya}) in place of R^{ay}
                                v = slot(y, a, d) if conj else slot(a, y, d)
                                lin.append((neq, coef, v, conj))
                        v1 = slot(c, a, z) if conj else slot(a, c, z)
                        v2 = slot(b, a, x) if conj else slot(a, b, x)
                        quad.append((neq, -data.f(b, a, c, d, z, x), v1, v2, conj))
                        neq += 1
        self.neq = neq
        self.nvar = len(self.vars)
        # linear terms: out += P @ r + Q @ conj(r)
        self.P = np.zeros((neq, one + 1), dtype=complex)
        self.Q = np.zeros((neq, one + 1), dtype=complex)
        for eq, coef, v, conj in lin:
            (self.Q if conj else self.P)[eq, v] += coef
        # exactly one quadratic term per equation, stored in equation order
        self.q_coef = np.array([t[1] for t in quad], dtype=complex)
        self.q_v1 = np.array([t[2] for t in quad], dtype=int)
        self.q_v2 = np.array([t[3] for t in quad], dtype=int)
        self.q_conj = np.array([t[4] for t in quad], dtype=bool)
        self.q_sign = np.where(self.q_conj, -1j, 1j)
        self.rows = np.arange(neq)

    def _phases(self, angles):
        return np.append(np.exp(1j * angles), 1.0)

    def _quad(self, r):
        prod = r[self.q_v1] * r[self.q_v2]
        return self.q_coef * np.where(self.q_conj, prod.conj(), prod)

    def complex_residual(self, angles) -> np.ndarray:
        r = self._phases(angles)
        return self.P @ r + self.Q @ r.conj() + self._quad(r)

    def residual(self, angles) -> np.ndarray:
        z = self.complex_residual(angles)
        return np.concatenate([z.real, z.imag])

    def jacobian(self, angles) -> np.ndarray:
        r = self._phases(angles)
        # d exp(i t)/dt = i exp(i t); the conjugate picks up -i
        J = self.P * (1j * r) + self.Q * (-1j * r.conj())
        dq = self.q_sign * self._quad(r)
        J[self.rows, self.q_v1] += dq
        J[self.rows, self.q_v2] += dq
        J = J[:, : self.nvar]
        return np.vstack([J.real, J.imag])

    def r_dict(self, angles, rules: FusionRules) -> dict:
        R = {}
        for a, b in itertools.product(range(rules.size), repeat=2):
            for c in rules.outcomes(a, b):
                R.setdefault((a, b), {})[c] = 1.0 + 0j
        for (a, b, c), t in zip(self.vars, angles):
            R[(a, b)][c] = complex(np.exp(1j * t))
        return R


def _invariants(data: SkeletalData, R: dict) -> tuple[tuple, tuple]:
    rules = data.rules
    d = quantum_dimensions(rules)
    spins = tuple(
        complex(sum(d[c] * R[(a, a)][c] for c in rules.outcomes(a, a)) / d[a]) for a in range(rules.size)
    )
    selfb = tuple((a, c, R[(a, a)][c]) for a in range(rules.size) for c in rules.outcomes(a, a))
    return spins, selfb


def solve_hexagon(
    data: SkeletalData,
    seed: int = 0,
    restarts: int = 200,
    max_iter: int = 500,
    tol: float = EPS_SOLVER,
    dedup: float = 1e-5,
) -> list[BraidingClass]:
    """Find gauge classes of unit-modulus R-symbols solving both hexagons.

    Each restart draws uniform random angles and runs damped least squares
    (Levenberg-Marquardt). Converged solutions are grouped by their
    gauge-invariant tuple (spins and self-braidings R^{aa}_c). An empty list
    means no braiding was found, which is evidence, not proof, of
    nonexistence.
    """
    system = _HexagonSystem(data)
    rng = np.random.default_rng(seed)
    _, fs = pivotal_and_fs(data)
    classes: list[BraidingClass] = []
    for _ in range(restarts):
        x0 = rng.uniform(0, 2 * np.pi, system.nvar)
        sol = least_squares(
            system.residual, x0, jac=system.jacobian, method="lm", max_nfev=max_iter, xtol=1e-12, ftol=1e-12
        )
        res = float(np.max(np.abs(system.complex_residual(sol.x)), initial=0.0))
        if res >= tol:
            continue
        R = system.r_dict(sol.x, data.rules)
        spins, selfb = _invariants(data, R)
        cand = BraidingClass(R, spins, selfb, fs, res)
        if not any(np.max(np.abs(cand.key() - c.key())) < dedup for c in classes):
            classes.append(cand)
    classes.sort(key=lambda c: tuple(round(float(np.angle(s)) % (2 * np.pi), 6) for s in c.spins))
    return classes


def default_braiding(data: SkeletalData, seed: int = 0, restarts: int = 200) -> SkeletalData:
    """The first braiding class found, attached to ``data``."""
    classes = solve_hexagon(data, seed=seed, restarts=restarts)
    if not classes:
        raise CapabilityError(f"no braiding found for {data.name}")
    return classes[0].theory(data)


def braiding_class_to_dict(data: SkeletalData, cls: BraidingClass) -> dict:
    """Theory JSON of ``data`` with the class's R-symbols and an invariants block."""
    fs_q = None
    if "q" in data.rules.labels:
        fs_q = int(cls.fs[data.rules.label("q")])
    invariants = {
        "spins": [[z.real, z.imag] for z in cls.spins],
        "fs_q": fs_q,
        "residual": cls.residual,
    }
    return to_dict(cls.theory(data), invariants)


def braiding_class_from_dict(data: SkeletalData, obj: dict) -> BraidingClass:
    """Inverse of :func:`braiding_class_to_dict` for the same F-data."""
    theory = from_dict(obj)
    if theory.R is None:
        raise StructuralError("braiding class has no R-symbols")
    spins, selfb = _invariants(data, theory.R)
    _, fs = pivotal_and_fs(data)
    return BraidingClass(theory.R, spins, selfb, fs, float(obj.get("invariants", {}).get("residual", 0.0)))
