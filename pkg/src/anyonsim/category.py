"""Skeletal data of multiplicity-free fusion categories.

Conventions
-----------
Label 0 is the vacuum. ``F[(a, b, c, d)]`` maps coordinates in the basis
((ab)_e c)_d to coordinates in the basis (a (bc)_f)_d, so its rows are
indexed by f and its columns by e. Inadmissible tuples are absent. The
inverse move G = F^dagger is never stored. ``R[(a, b)][c]`` is the phase
picked up when a (on the left) and b (on the right) in channel c are
exchanged.
"""

from __future__ import annotations

import cmath
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import EPS_CHECK, is_unitary
from .errors import InconsistentDataError, NumericalError, StructuralError


@dataclass(frozen=True)
class FusionRules:
    labels: tuple[str, ...]
    dual: tuple[int, ...]
    N: np.ndarray = field(compare=False)

    def __post_init__(self):
        n = len(self.labels)
        if self.N.shape != (n, n, n):
            raise StructuralError(f"fusion tensor has shape {self.N.shape}, expected {(n, n, n)}")
        if len(self.dual) != n:
            raise StructuralError("dual map has wrong length")

    @property
    def size(self) -> int:
        return len(self.labels)

    def outcomes(self, a: int, b: int) -> list[int]:
        return [c for c in range(self.size) if self.N[a, b, c]]

    def admissible(self, a: int, b: int, c: int) -> bool:
        return bool(self.N[a, b, c])

    def label(self, name: str) -> int:
        try:
            return self.labels.index(name)
        except ValueError:
            raise StructuralError(f"unknown label {name!r}") from None

    @classmethod
    def from_triples(cls, labels, dual, triples) -> FusionRules:
        n = len(labels)
        N = np.zeros((n, n, n), dtype=int)
        for a, b, c in triples:
            N[a, b, c] = 1
        return cls(tuple(labels), tuple(dual), N)


@dataclass(frozen=True)
class FMatrix:
    rows: tuple[int, ...]
    cols: tuple[int, ...]
    matrix: np.ndarray = field(compare=False)

    def entry(self, f: int, e: int) -> complex:
        return self.matrix[self.rows.index(f), self.cols.index(e)]


@dataclass(eq=False)
class SkeletalData:
    """Fusion rules plus F-symbols and optional R-symbols.

    ``cache`` holds derived linear maps built by the state engine; it is
    tied to this object, so a gauge-transformed copy starts empty.
    """

    rules: FusionRules
    F: dict[tuple[int, int, int, int], FMatrix]
    R: dict[tuple[int, int], dict[int, complex]] | None = None
    name: str = "custom"
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def size(self) -> int:
        return self.rules.size

    @property
    def braided(self) -> bool:
        return self.R is not None

    def fmat(self, a: int, b: int, c: int, d: int) -> FMatrix:
        try:
            return self.F[(a, b, c, d)]
        except KeyError:
            raise StructuralError(f"missing F-matrix for tuple {(a, b, c, d)}") from None

    def f(self, a, b, c, d, f, e) -> complex:
        """[F^{abc}_d]_{fe}."""
        m = self.fmat(a, b, c, d)
        try:
            return m.matrix[m.rows.index(f), m.cols.index(e)]
        except ValueError:
            raise StructuralError(f"F^{(a, b, c)}_{d} has no entry ({f}, {e})") from None

    def g(self, a, b, c, d, e, f) -> complex:
        """[G^{abc}_d]_{ef} = conj([F^{abc}_d]_{fe})."""
        return self.f(a, b, c, d, f, e).conjugate()

    def r(self, a: int, b: int, c: int) -> complex:
        if self.R is None:
            raise StructuralError("theory carries no R-symbols")
        try:
            return self.R[(a, b)][c]
        except KeyError:
            raise StructuralError(f"missing R-symbol R^{(a, b)}_{c}") from None

    def r_inv(self, a: int, b: int, c: int) -> complex:
        """(R^{-1})^{ab}_c := 1 / R^{ba}_c."""
        return 1.0 / self.r(b, a, c)

    def with_R(self, R, name: str | None = None) -> SkeletalData:
        return SkeletalData(self.rules, self.F, R, name or self.name)


def admissible_f_tuples(rules: FusionRules):
    """Yield (a, b, c, d, rows, cols) for every tuple with a nonzero F-space."""
    n = rules.size
    for a, b, c, d in itertools.product(range(n), repeat=4):
        cols = tuple(e for e in rules.outcomes(a, b) if rules.N[e, c, d])
        if not cols:
            continue
        rows = tuple(f for f in rules.outcomes(b, c) if rules.N[a, f, d])
        yield a, b, c, d, rows, cols


# ---------------------------------------------------------------- fusion rules


def validate_fusion_rules(rules: FusionRules) -> list[str]:
    """Return a list of violations (empty iff the rules are consistent)."""
    problems = []
    n = rules.size
    N = rules.N
    for a, b in itertools.product(range(n), repeat=2):
        want = int(a == b)
        if N[a, 0, b] != want or N[0, a, b] != want:
            problems.append(f"unit axiom fails for ({a}, 0, {b})")
    for a in range(n):
        duals = [b for b in range(n) if N[a, b, 0]]
        if duals != [rules.dual[a]] or N[a, duals[0] if duals else 0, 0] != 1:
            problems.append(f"label {a} has duals {duals}, declared {rules.dual[a]}")
    bar = rules.dual
    for a, b, c in itertools.product(range(n), repeat=3):
        v = N[a, b, c]
        if v not in (0, 1):
            problems.append(f"multiplicity {v} at ({a}, {b}, {c})")
        if v != N[b, a, c]:
            problems.append(f"not commutative at ({a}, {b}, {c})")
        if v != N[b, bar[c], bar[a]]:
            problems.append(f"rotation symmetry fails at ({a}, {b}, {c})")
        if v != N[bar[b], bar[a], bar[c]]:
            problems.append(f"duality symmetry fails at ({a}, {b}, {c})")
    return problems


def quantum_dimensions(rules: FusionRules, tol: float = 1e-12) -> np.ndarray:
    """Frobenius-Perron dimensions.

    All fusion matrices [N^a]_{bc} = N^{ab}_c share the eigenvector d, so we
    take the leading eigenvector of I + sum_a N^a, which is primitive for
    any fusion ring, normalised so that the vacuum has dimension 1.
    """
    M = np.eye(rules.size) + rules.N.sum(axis=0).T
    vals, vecs = np.linalg.eig(M)
    k = int(np.argmax(vals.real))
    v = vecs[:, k]
    if abs(v[0]) < tol:
        raise NumericalError("fusion matrix has no positive Frobenius-Perron eigenvector")
    v = np.real(v / v[0])
    if np.max(np.abs(M @ v - vals[k].real * v)) > tol * np.max(np.abs(M)) * len(v) or np.min(v) < 1 - tol:
        raise NumericalError("fusion matrix has no positive Frobenius-Perron eigenvector")
    return v


def dimension_identity_residual(rules: FusionRules) -> float:
    """max |d_a d_b - sum_c N^{ab}_c d_c| over all label pairs."""
    d = quantum_dimensions(rules)
    return float(np.max(np.abs(np.outer(d, d) - np.einsum("abc,c->ab", rules.N, d))))


def total_dimension(rules: FusionRules) -> float:
    return float(math.sqrt(np.sum(quantum_dimensions(rules) ** 2)))


# ---------------------------------------------------------------- consistency


def check_pentagon(data: SkeletalData) -> tuple[float, tuple | None]:
    """Maximum pentagon residual over all admissible labelings and the worst one.

    Labeling (a, b, c, d, e, p, q, r, s) compares
    [F^{abr}_e]_{sp} [F^{pcd}_e]_{rq}
    with sum_t [F^{bcd}_s]_{rt} [F^{atd}_e]_{sq} [F^{abc}_q]_{tp}.
    """
    rules = data.rules
    N = rules.N
    n = rules.size
    worst, where = 0.0, None
    for a, b, c, d in itertools.product(range(n), repeat=4):
        for p in rules.outcomes(a, b):
            for q in rules.outcomes(p, c):
                for r in rules.outcomes(c, d):
                    for e in rules.outcomes(q, d):
                        if not N[p, r, e]:
                            continue
                        for s in rules.outcomes(b, r):
                            if not N[a, s, e]:
                                continue
                            lhs = data.f(a, b, r, e, s, p) * data.f(p, c, d, e, r, q)
                            rhs = 0j
                            for t in rules.outcomes(b, c):
                                if N[t, d, s] and N[a, t, q]:
                                    rhs += (
                                        data.f(b, c, d, s, r, t)
                                        * data.f(a, t, d, e, s, q)
                                        * data.f(a, b, c, q, t, p)
                                    )
                            res = abs(lhs - rhs)
                            if res > worst or where is None:
                                worst, where = max(worst, res), (a, b, c, d, e, p, q, r, s)
    return worst, where


def check_hexagon(data: SkeletalData) -> tuple[float, tuple | None]:
    """Maximum residual of both hexagon equations and the worst labeling.

    The labeling is (a, b, c, d, x, z, which) with which = 1 for R and
    which = 2 for the reversed braiding (R^{-1})^{ab} = (R^{ba})^{-1}.
    """
    rules = data.rules
    N = rules.N
    n = rules.size
    worst, where = 0.0, None
    for which, rr in ((1, data.r), (2, data.r_inv)):
        for a, b, c, d in itertools.product(range(n), repeat=4):
            for x in rules.outcomes(a, b):
                if not N[x, c, d]:
                    continue
                for z in rules.outcomes(c, a):
                    if not N[b, z, d]:
                        continue
                    lhs = 0j
                    for y in rules.outcomes(b, c):
                        if N[a, y, d]:
                            lhs += data.f(b, c, a, d, z, y) * rr(a, y, d) * data.f(a, b, c, d, y, x)
                    rhs = rr(a, c, z) * data.f(b, a, c, d, z, x) * rr(a, b, x)
                    res = abs(lhs - rhs)
                    if res > worst or where is None:
                        worst, where = max(worst, res), (a, b, c, d, x, z, which)
    return worst, where


def check_f_unitary(data: SkeletalData, tol: float = EPS_CHECK) -> bool:
    return all(is_unitary(m.matrix, tol) for m in data.F.values())


def check_triangle(data: SkeletalData, tol: float = EPS_CHECK) -> bool:
    """F-matrices with a vacuum upper index are identities."""
    for (a, b, c, _), m in data.F.items():
        if 0 in (a, b, c):
            if m.matrix.shape != (1, 1) or abs(m.matrix[0, 0] - 1) > tol:
                return False
    return True


# ---------------------------------------------------------------- derived data


def leg_bending(data: SkeletalData, a: int, b: int, c: int) -> dict[str, complex]:
    """Leg-bending coefficients K^{ab}_c and L^{ab}_c.

    The lowered-index versions K_{ab}^c and L_{ab}^c are their complex
    conjugates and are returned too.
    """
    rules = data.rules
    if not rules.admissible(a, b, c):
        raise StructuralError(f"({a}, {b}, {c}) is not admissible")
    d = quantum_dimensions(rules)
    bar = rules.dual
    scale = math.sqrt(d[a] * d[b] / d[c])
    k = scale * data.f(bar[a], a, b, b, c, 0).conjugate()
    ell = scale * data.f(a, b, bar[b], a, 0, c)
    return {"K": k, "L": ell, "K_lower": k.conjugate(), "L_lower": ell.conjugate()}


def pivotal_and_fs(data: SkeletalData, tol: float = EPS_CHECK) -> tuple[np.ndarray, dict[int, int]]:
    """Pivotal phases t_a and Frobenius-Schur indicators of self-dual labels."""
    rules = data.rules
    d = quantum_dimensions(rules)
    t = np.empty(rules.size, dtype=complex)
    fs = {}
    for a in range(rules.size):
        abar = rules.dual[a]
        t[a] = d[a] * data.f(a, abar, a, a, 0, 0).conjugate()
        if abs(abs(t[a]) - 1) > tol:
            raise InconsistentDataError(f"|t_{a}| = {abs(t[a])} is not 1")
        if abar == a:
            if abs(t[a].imag) > tol or abs(abs(t[a].real) - 1) > tol:
                raise InconsistentDataError(f"indicator of self-dual label {a} is {t[a]}")
            fs[a] = 1 if t[a].real > 0 else -1
    return t, fs


def topological_spins(data: SkeletalData, tol: float = EPS_CHECK) -> np.ndarray:
    """theta_a = (1/d_a) sum_c d_c R^{aa}_c, cross-checked against t_a conj(R^{abar a}_0)."""
    rules = data.rules
    d = quantum_dimensions(rules)
    t, _ = pivotal_and_fs(data, tol)
    theta = np.empty(rules.size, dtype=complex)
    for a in range(rules.size):
        theta[a] = sum(d[c] * data.r(a, a, c) for c in rules.outcomes(a, a)) / d[a]
        other = t[a] * data.r(rules.dual[a], a, 0).conjugate()
        if abs(theta[a] - other) > tol:
            raise InconsistentDataError(f"spin of label {a}: {theta[a]} vs {other}")
    return theta


def monodromy(data: SkeletalData, a: int, b: int, c: int, tol: float = EPS_CHECK) -> complex:
    """M^{ab}_c = R^{ba}_c R^{ab}_c, checked against theta_c / (theta_a theta_b)."""
    m = data.r(b, a, c) * data.r(a, b, c)
    theta = topological_spins(data, tol)
    expect = theta[c] / (theta[a] * theta[b])
    if abs(m - expect) > tol:
        raise InconsistentDataError(f"monodromy ({a}, {b}, {c}) = {m}, balancing gives {expect}")
    return m


def s_matrix(data: SkeletalData, tol: float = EPS_CHECK) -> tuple[np.ndarray, bool]:
    """Normalised S-matrix and the modularity flag (is_unitary(S))."""
    rules = data.rules
    d = quantum_dimensions(rules)
    theta = topological_spins(data, tol)
    D = math.sqrt(np.sum(d**2))
    n = rules.size
    S = np.zeros((n, n), dtype=complex)
    for a, b in itertools.product(range(n), repeat=2):
        bbar = rules.dual[b]
        S[a, b] = sum(theta[c] / (theta[a] * theta[b]) * d[c] for c in rules.outcomes(a, bbar)) / D
    return S, is_unitary(S, tol)


# ---------------------------------------------------------------- gauge


def gauge_transform(data: SkeletalData, u: dict[tuple[int, int, int], complex], tol: float = EPS_CHECK):
    """Apply the vertex gauge transformation u^{ab}_c (missing entries are 1).

    F'^{abc}_d[f, e] = u^{af}_d u^{bc}_f / (u^{ab}_e u^{ec}_d) F^{abc}_d[f, e]
    R'^{ab}_c = u^{ba}_c / u^{ab}_c R^{ab}_c
    """
    for (a, b, c), val in u.items():
        if abs(abs(val) - 1) > tol:
            raise InconsistentDataError(f"gauge phase u^{(a, b)}_{c} has modulus {abs(val)}")
        if (a == 0 or b == 0) and abs(val - 1) > tol:
            raise InconsistentDataError(f"vacuum gauge phase u^{(a, b)}_{c} must be 1")

    def uu(a, b, c):
        return u.get((a, b, c), 1.0)

    F = {}
    for (a, b, c, d), m in data.F.items():
        mat = np.array(m.matrix, dtype=complex)
        for i, f in enumerate(m.rows):
            for j, e in enumerate(m.cols):
                mat[i, j] *= uu(a, f, d) * uu(b, c, f) / (uu(a, b, e) * uu(e, c, d))
        F[(a, b, c, d)] = FMatrix(m.rows, m.cols, mat)
    R = None
    if data.R is not None:
        R = {
            (a, b): {c: uu(b, a, c) / uu(a, b, c) * val for c, val in chans.items()}
            for (a, b), chans in data.R.items()
        }
    return SkeletalData(data.rules, F, R, data.name)


def random_gauge(rules: FusionRules, rng: np.random.Generator) -> dict[tuple[int, int, int], complex]:
    """Uniformly random phases on every admissible vertex with nonvacuum inputs."""
    u = {}
    for a, b in itertools.product(range(1, rules.size), repeat=2):
        for c in rules.outcomes(a, b):
            u[(a, b, c)] = cmath.exp(2j * math.pi * rng.random())
    return u


# ---------------------------------------------------------------- JSON


def _cplx(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def to_dict(data: SkeletalData, invariants: dict | None = None) -> dict:
    rules = data.rules
    out = {
        "name": data.name,
        "labels": list(rules.labels),
        "dual": list(rules.dual),
        "fusion": [
            [a, b, c] for a, b, c in itertools.product(range(rules.size), repeat=3) if rules.N[a, b, c]
        ],
        "F": [
            {
                "abcd": list(key),
                "rows": list(m.rows),
                "cols": list(m.cols),
                "entries": [_cplx(z) for z in np.asarray(m.matrix).ravel()],
            }
            for key, m in sorted(data.F.items())
        ],
    }
    if data.R is not None:
        out["R"] = [
            {"ab": [a, b], "c": c, "value": _cplx(v)}
            for (a, b), chans in sorted(data.R.items())
            for c, v in sorted(chans.items())
        ]
    if invariants is not None:
        out["invariants"] = invariants
    return out


def from_dict(obj: dict) -> SkeletalData:
    try:
        labels = obj["labels"]
        n = len(labels)
        rules = FusionRules.from_triples(labels, obj["dual"], obj["fusion"])
        F = {}
        for item in obj["F"]:
            rows, cols = tuple(item["rows"]), tuple(item["cols"])
            entries = [complex(re, im) for re, im in item["entries"]]
            if len(entries) != len(rows) * len(cols):
                raise StructuralError(f"F entry {item['abcd']} has {len(entries)} entries")
            F[tuple(item["abcd"])] = FMatrix(rows, cols, np.array(entries).reshape(len(rows), len(cols)))
        R = None
        if "R" in obj:
            R = {}
            for item in obj["R"]:
                a, b = item["ab"]
                R.setdefault((a, b), {})[item["c"]] = complex(*item["value"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, StructuralError):
            raise
        raise StructuralError(f"malformed theory JSON: {exc}") from exc
    for key in F:
        if any(not 0 <= x < n for x in key):
            raise StructuralError(f"F tuple {key} refers to unknown labels")
    return SkeletalData(rules, F, R, obj.get("name", "custom"))


def dumps(data: SkeletalData, invariants: dict | None = None) -> str:
    # json writes floats with repr, which round-trips doubles exactly
    return json.dumps(to_dict(data, invariants), indent=1, sort_keys=True)


def loads(text: str) -> SkeletalData:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StructuralError(f"invalid JSON: {exc}") from exc
    return from_dict(obj)
