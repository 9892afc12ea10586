"""Fusion-tree state spaces and the operations acting on them.

A fusion tree over ``n`` ordered leaves is stored as the set of its internal
nodes, each identified by the half-open interval of leaf positions it
covers. The root is ``(0, n)``. A basis vector assigns an admissible label
to every internal node; the labeling tuple follows the node order of the
tree (by interval length, then left end).

Every linear map between bases (F-moves, braids, projections, splittings)
is assembled once as a sparse matrix and cached on the theory object, so
repeated protocol runs only pay for sparse products.

Two tree shapes matter in practice. The *pairwise* shape fuses leaves
(2j, 2j+1) to k_j and then the k's left to right; it is the shape in which
qudits are read. The *left comb* ((((l0 l1) l2) l3) ...) is the working
shape: any adjacent pair is one F-move away from being a sibling pair.
"""

from __future__ import annotations

import contextlib
import threading
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse

from .algebra import EPS_CHECK
from .category import SkeletalData
from .errors import CapabilityError, PreconditionError, StructuralError, ZeroProbabilityOutcome

Interval = tuple[int, int]
Tree = tuple[Interval, ...]

ZERO_MASS = 1e-13

# instrumentation: braid generators applied (``calls``) or rejected for lack
# of R-data (``refused``) over the life of the process
braid_counter = {"calls": 0, "refused": 0}
_local = threading.local()


def _tally(key: str) -> None:
    braid_counter[key] += 1
    for box in getattr(_local, "boxes", ()):
        box[key] += 1


@contextlib.contextmanager
def count_braids():
    """Yield a dict counting braid calls made by this thread inside the block."""
    box = {"calls": 0, "refused": 0}
    stack = _local.__dict__.setdefault("boxes", [])
    stack.append(box)
    try:
        yield box
    finally:
        stack.remove(box)


# ---------------------------------------------------------------- tree shapes


def _canon(nodes) -> Tree:
    return tuple(sorted(set(nodes), key=lambda iv: (iv[1] - iv[0], iv[0])))


def left_comb(n: int) -> Tree:
    return _canon((0, k) for k in range(2, n + 1))


def pairwise_tree(n: int) -> Tree:
    """Pairs (2j, 2j+1) first, then pair charges fused left to right."""
    nodes = [(2 * j, 2 * j + 2) for j in range(n // 2)]
    nodes += [(0, k) for k in range(4, n + 1, 2)]
    if n % 2 and n > 1:
        nodes.append((0, n))
    return _canon(nodes)


def comb_with_pair(n: int, i: int) -> Tree:
    """Left comb in which leaves i and i+1 are siblings."""
    if i == 0:
        return left_comb(n)
    return _canon([(0, k) for k in range(2, n + 1) if k != i + 1] + [(i, i + 2)])


def tree_from_nested(shape) -> Tree:
    """Convert a nested tuple of consecutive leaf indices into a tree."""
    nodes = []

    def walk(x):
        if isinstance(x, int):
            return x, x + 1
        if len(x) != 2:
            raise StructuralError(f"tree nodes must be binary, got {x}")
        lo, m = walk(x[0])
        m2, hi = walk(x[1])
        if m != m2:
            raise StructuralError(f"subtrees {x[0]} and {x[1]} are not adjacent")
        nodes.append((lo, hi))
        return lo, hi

    lo, _ = walk(shape)
    if lo != 0:
        raise StructuralError("leaves must start at 0")
    return _canon(nodes)


def children(tree_set, node: Interval) -> tuple[Interval, Interval]:
    lo, hi = node
    found = None
    for m in range(lo + 1, hi):
        left, right = (lo, m), (m, hi)
        if (m - lo == 1 or left in tree_set) and (hi - m == 1 or right in tree_set):
            if found is not None:
                raise StructuralError(f"node {node} has ambiguous children")
            found = (left, right)
    if found is None:
        raise StructuralError(f"node {node} has no children in the tree")
    return found


def validate_tree(tree: Tree, n: int) -> None:
    s = set(tree)
    if len(s) != max(n - 1, 0):
        raise StructuralError(f"a tree over {n} leaves has {max(n - 1, 0)} internal nodes, got {len(s)}")
    if n >= 2 and (0, n) not in s:
        raise StructuralError("tree has no root")
    for node in tree:
        children(s, node)


def _rotate_tree(tree: Tree, node: Interval, inverse: bool) -> tuple[Tree, Interval, Interval]:
    """Return (new tree, removed node, added node) for one associativity move."""
    s = set(tree)
    left, right = children(s, node)
    if not inverse:
        # ((A B) C) -> (A (B C))
        if left[1] - left[0] < 2:
            raise StructuralError(f"F-move at {node} needs an internal left child")
        _, (k, _) = children(s, left)
        removed, added = left, (k, node[1])
    else:
        # (A (B C)) -> ((A B) C)
        if right[1] - right[0] < 2:
            raise StructuralError(f"inverse F-move at {node} needs an internal right child")
        k = children(s, right)[0][1]
        removed, added = right, (node[0], k)
    return _canon((s - {removed}) | {added}), removed, added


def _path_to_comb(tree: Tree) -> list[Interval]:
    """Nodes at which inverse moves turn ``tree`` into the left comb."""
    steps = []
    while True:
        s = set(tree)
        for node in tree:
            _, right = children(s, node)
            if right[1] - right[0] >= 2:
                steps.append(node)
                tree = _rotate_tree(tree, node, True)[0]
                break
        else:
            return steps


# ---------------------------------------------------------------- bases


@dataclass(eq=False)
class FusionBasis:
    """All admissible labelings of ``tree`` over the given leaf labels."""

    theory: SkeletalData
    leaves: tuple[int, ...]
    tree: Tree

    @cached_property
    def labelings(self) -> tuple[tuple[int, ...], ...]:
        rules = self.theory.rules
        tree_set = set(self.tree)
        partial = [dict()]
        for node in self.tree:
            left, right = children(tree_set, node)
            grown = []
            for lab in partial:
                a = self.leaves[left[0]] if left[1] - left[0] == 1 else lab[left]
                b = self.leaves[right[0]] if right[1] - right[0] == 1 else lab[right]
                for c in rules.outcomes(a, b):
                    new = dict(lab)
                    new[node] = c
                    grown.append(new)
            partial = grown
        return tuple(tuple(lab[node] for node in self.tree) for lab in partial)

    @cached_property
    def index(self) -> dict[tuple[int, ...], int]:
        return {lab: i for i, lab in enumerate(self.labelings)}

    @cached_property
    def position(self) -> dict[Interval, int]:
        return {node: i for i, node in enumerate(self.tree)}

    @property
    def dim(self) -> int:
        return len(self.labelings)

    @property
    def n(self) -> int:
        return len(self.leaves)

    def label(self, labeling: tuple[int, ...], node: Interval) -> int:
        if node[1] - node[0] == 1:
            return self.leaves[node[0]]
        return labeling[self.position[node]]

    @cached_property
    def charges(self) -> np.ndarray:
        n = self.n
        if n == 0:
            return np.zeros(1, dtype=int)
        if n == 1:
            return np.full(1, self.leaves[0])
        p = self.position[(0, n)]
        return np.array([lab[p] for lab in self.labelings], dtype=int)


def get_basis(theory: SkeletalData, leaves, tree: Tree) -> FusionBasis:
    leaves = tuple(leaves)
    key = ("basis", leaves, tree)
    basis = theory.cache.get(key)
    if basis is None:
        validate_tree(tree, len(leaves))
        for x in leaves:
            if not 0 <= x < theory.size:
                raise StructuralError(f"unknown leaf label {x}")
        basis = FusionBasis(theory, leaves, tree)
        if basis.dim == 0:
            raise StructuralError(f"no admissible labelings for leaves {leaves}")
        theory.cache[key] = basis
    return basis


def enumerate_basis(theory: SkeletalData, leaves, total_charge: int | None = None, tree: Tree | None = None):
    """Admissible labelings of the pairwise tree (or ``tree``), lexicographic.

    With ``total_charge`` only labelings of that root charge are returned.
    """
    leaves = tuple(leaves)
    tree = pairwise_tree(len(leaves)) if tree is None else tree
    basis = get_basis(theory, leaves, tree)
    labs = sorted(
        lab for lab, c in zip(basis.labelings, basis.charges) if total_charge is None or c == total_charge
    )
    return labs


# ---------------------------------------------------------------- states


@dataclass(frozen=True, eq=False)
class FusionState:
    """Immutable vector of amplitudes over a fusion-tree basis."""

    basis: FusionBasis
    vec: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.vec, dtype=complex)
        if v.shape != (self.basis.dim,):
            raise StructuralError(f"amplitude vector has shape {v.shape}, basis has {self.basis.dim}")
        v.setflags(write=False)
        object.__setattr__(self, "vec", v)

    @property
    def theory(self) -> SkeletalData:
        return self.basis.theory

    @property
    def leaves(self) -> tuple[int, ...]:
        return self.basis.leaves

    @property
    def tree(self) -> Tree:
        return self.basis.tree

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vec))

    def amplitudes(self, tol: float = 0.0) -> dict[tuple[int, ...], complex]:
        return {lab: complex(z) for lab, z in zip(self.basis.labelings, self.vec) if abs(z) > tol}

    def total_charge(self, tol: float = 1e-12):
        """The root label, or the tuple of labels present when superposed."""
        present = sorted({int(c) for c, z in zip(self.basis.charges, self.vec) if abs(z) > tol})
        return present[0] if len(present) == 1 else tuple(present)

    def normalized(self) -> FusionState:
        nrm = self.norm
        if nrm == 0:
            raise PreconditionError("cannot normalise the zero vector")
        return FusionState(self.basis, self.vec / nrm)


def make_state(theory: SkeletalData, leaves, amplitudes: dict, tree: Tree | None = None) -> FusionState:
    """Build a state from {labeling: amplitude}; unlisted labelings are zero."""
    leaves = tuple(leaves)
    tree = pairwise_tree(len(leaves)) if tree is None else tree
    basis = get_basis(theory, leaves, tree)
    vec = np.zeros(basis.dim, dtype=complex)
    for lab, z in amplitudes.items():
        try:
            vec[basis.index[tuple(lab)]] = z
        except KeyError:
            raise StructuralError(f"labeling {lab} is not admissible") from None
    return FusionState(basis, vec)


def vacuum_state(theory: SkeletalData) -> FusionState:
    return FusionState(get_basis(theory, (), ()), np.ones(1))


def random_state(theory: SkeletalData, leaves, rng: np.random.Generator, total_charge=None, tree=None):
    """Haar-like random normalised state in the pairwise basis."""
    leaves = tuple(leaves)
    tree = pairwise_tree(len(leaves)) if tree is None else tree
    basis = get_basis(theory, leaves, tree)
    vec = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    if total_charge is not None:
        vec[basis.charges != total_charge] = 0
    return FusionState(basis, vec).normalized()


def _cached_map(theory: SkeletalData, key, build):
    m = theory.cache.get(key)
    if m is None:
        m = build()
        theory.cache[key] = m
    return m


def _sparse(rows, cols, vals, shape) -> sparse.csr_matrix:
    return sparse.csr_matrix((np.asarray(vals, dtype=complex), (rows, cols)), shape=shape)


# ---------------------------------------------------------------- F-moves


def _rotation_map(basis: FusionBasis, node: Interval, inverse: bool):
    theory = basis.theory
    tree, removed, added = _rotate_tree(basis.tree, node, inverse)
    new = get_basis(theory, basis.leaves, tree)

    def build():
        rows, cols, vals = [], [], []
        s = set(basis.tree)
        left, right = children(s, node)
        if not inverse:
            (A, B), C = children(s, left), right
        else:
            A, (B, C) = left, children(s, right)
        for j, lab in enumerate(basis.labelings):
            a, b, c = (basis.label(lab, x) for x in (A, B, C))
            d = basis.label(lab, node)
            labels = dict(zip(basis.tree, lab))
            old = labels.pop(removed)
            m = theory.fmat(a, b, c, d)
            targets = m.rows if not inverse else m.cols
            for t in targets:
                labels[added] = t
                i = new.index[tuple(labels[x] for x in tree)]
                if not inverse:
                    coef = m.matrix[m.rows.index(t), m.cols.index(old)]
                else:
                    coef = m.matrix[m.rows.index(old), m.cols.index(t)].conjugate()
                rows.append(i)
                cols.append(j)
                vals.append(coef)
        return _sparse(rows, cols, vals, (new.dim, basis.dim))

    key = ("rot", basis.leaves, basis.tree, node, inverse)
    return new, _cached_map(theory, key, build)


def f_move(state: FusionState, node: Interval, inverse: bool = False) -> FusionState:
    """Apply one associativity move at internal node ``node``.

    Forward: ((A B)_e C)_d -> (A (B C)_f)_d with [F^{abc}_d]_{fe}.
    Inverse: the reverse move with G = F^dagger.
    """
    new, m = _rotation_map(state.basis, node, inverse)
    return FusionState(new, m @ state.vec)


def _basis_change_map(basis: FusionBasis, tree: Tree):
    theory = basis.theory
    validate_tree(tree, basis.n)
    target = get_basis(theory, basis.leaves, tree)

    def build():
        m = sparse.identity(basis.dim, dtype=complex, format="csr")
        cur = basis
        for node in _path_to_comb(basis.tree):
            cur, r = _rotation_map(cur, node, True)
            m = r @ m
        back = []
        t = tree
        for node in _path_to_comb(tree):
            back.append(node)
            t = _rotate_tree(t, node, True)[0]
        for node in reversed(back):
            cur, r = _rotation_map(cur, node, False)
            m = r @ m
        assert cur.tree == target.tree
        return m.tocsr()

    if tree == basis.tree:
        return target, None
    key = ("change", basis.leaves, basis.tree, tree)
    return target, _cached_map(theory, key, build)


def change_basis(state: FusionState, tree: Tree) -> FusionState:
    """Re-express ``state`` in another tree shape over the same leaves."""
    target, m = _basis_change_map(state.basis, tree)
    if m is None:
        return state
    return FusionState(target, m @ state.vec)


def to_pairwise(state: FusionState) -> FusionState:
    return change_basis(state, pairwise_tree(state.basis.n))


def to_comb(state: FusionState) -> FusionState:
    return change_basis(state, left_comb(state.basis.n))


# ---------------------------------------------------------------- braiding


def braid_generator(state: FusionState, i: int, orientation: int = 1) -> FusionState:
    """Exchange leaves i and i+1 (0-based); orientation -1 gives the inverse."""
    theory = state.theory
    if not theory.braided:
        _tally("refused")
        raise CapabilityError(f"theory {theory.name} carries no braiding")
    n = state.basis.n
    if not 0 <= i < n - 1:
        raise PreconditionError(f"no leaf pair ({i}, {i + 1}) among {n} leaves")
    if orientation not in (1, -1):
        raise PreconditionError("orientation must be +1 or -1")
    _tally("calls")
    leaves = state.leaves
    swapped = leaves[:i] + (leaves[i + 1], leaves[i]) + leaves[i + 2 :]
    home = state.tree
    work = comb_with_pair(n, i)

    def build():
        pair_basis, to_pair = _basis_change_map(state.basis, work)
        out_basis = get_basis(theory, swapped, work)
        a, b = leaves[i], leaves[i + 1]
        p = pair_basis.position[(i, i + 2)]
        rows, vals = [], []
        for lab in pair_basis.labelings:
            c = lab[p]
            rows.append(out_basis.index[lab])
            vals.append(theory.r(a, b, c) if orientation == 1 else theory.r_inv(a, b, c))
        m = _sparse(rows, range(pair_basis.dim), vals, (out_basis.dim, pair_basis.dim))
        if to_pair is not None:
            m = m @ to_pair
        _, back = _basis_change_map(out_basis, home)
        if back is not None:
            m = back @ m
        return m.tocsr()

    key = ("braid", leaves, home, i, orientation)
    m = _cached_map(theory, key, build)
    return FusionState(get_basis(theory, swapped, home), m @ state.vec)


def braid_word(state: FusionState, word) -> FusionState:
    """Apply (i, power) pairs in order; power is any nonzero integer."""
    for i, power in word:
        for _ in range(abs(power)):
            state = braid_generator(state, i, 1 if power > 0 else -1)
    return state


# ---------------------------------------------------------------- fusion


def outcome_distribution(state: FusionState, i: int) -> dict[int, float]:
    """Born probabilities of the fusion channel of leaves i and i+1."""
    n = state.basis.n
    if not 0 <= i < n - 1:
        raise PreconditionError(f"no leaf pair ({i}, {i + 1}) among {n} leaves")
    work = change_basis(state, comb_with_pair(n, i))
    p = work.basis.position[(i, i + 2)]
    norm2 = float(np.vdot(work.vec, work.vec).real)
    if norm2 == 0:
        raise PreconditionError("state has zero norm")
    probs: dict[int, float] = {}
    for lab, z in zip(work.basis.labelings, work.vec):
        probs[lab[p]] = probs.get(lab[p], 0.0) + abs(z) ** 2 / norm2
    return dict(sorted(probs.items()))


def _merge_map(pair_basis: FusionBasis, i: int, c: int):
    theory = pair_basis.theory
    leaves = pair_basis.leaves
    merged = leaves[:i] + (c,) + leaves[i + 2 :]
    n = len(leaves)
    out = get_basis(theory, merged, left_comb(n - 1))

    def build():
        p = pair_basis.position[(i, i + 2)]
        rows, cols = [], []
        for j, lab in enumerate(pair_basis.labelings):
            if lab[p] != c:
                continue
            labels = dict(zip(pair_basis.tree, lab))
            new = {}
            for lo, hi in out.tree:
                k = hi if hi <= i else hi + 1
                new[(lo, hi)] = labels[(0, k)]
            rows.append(out.index[tuple(new[x] for x in out.tree)])
            cols.append(j)
        return _sparse(rows, cols, np.ones(len(rows)), (out.dim, pair_basis.dim))

    key = ("merge", leaves, i, c)
    return out, _cached_map(theory, key, build)


def fuse_measure(state: FusionState, i: int, rng: np.random.Generator | None = None, outcome: int | None = None):
    """Fuse leaves i and i+1 and measure the channel.

    Returns (outcome, probability, collapsed state) where the collapsed state
    has the pair replaced by one leaf carrying the outcome and lives in the
    left-comb shape. Pass ``outcome`` to force a branch (zero-mass branches
    raise); otherwise ``rng`` samples the Born distribution.
    """
    n = state.basis.n
    if not 0 <= i < n - 1:
        raise PreconditionError(f"no leaf pair ({i}, {i + 1}) among {n} leaves")
    work = change_basis(state, comb_with_pair(n, i))
    probs = outcome_distribution(work, i)
    if outcome is None:
        if rng is None:
            raise PreconditionError("fuse_measure needs an rng or a forced outcome")
        labels = list(probs)
        weights = np.array([probs[c] for c in labels])
        outcome = labels[int(rng.choice(len(labels), p=weights / weights.sum()))]
    prob = probs.get(outcome, 0.0)
    if prob < ZERO_MASS:
        raise ZeroProbabilityOutcome(f"outcome {outcome} at pair {i} has probability {prob:.3e}")
    out, m = _merge_map(work.basis, i, outcome)
    collapsed = FusionState(out, m @ work.vec)
    return outcome, prob, collapsed.normalized()


# ---------------------------------------------------------------- creation and splitting


def _insert_vacuum(state: FusionState, i: int) -> FusionState:
    n = state.basis.n
    if not 0 <= i <= n:
        raise PreconditionError(f"cannot insert at position {i} among {n} leaves")
    comb = to_comb(state)
    theory = state.theory
    leaves = comb.leaves[:i] + (0,) + comb.leaves[i:]
    out = get_basis(theory, leaves, left_comb(n + 1))

    def build():
        rows = []
        for lab in comb.basis.labelings:
            new = {}
            for lo, hi in out.tree:
                src = (0, hi) if hi <= i else (0, hi - 1)
                new[(lo, hi)] = comb.basis.label(lab, src)
            rows.append(out.index[tuple(new[x] for x in out.tree)])
        return _sparse(rows, range(comb.basis.dim), np.ones(len(rows)), (out.dim, comb.basis.dim))

    m = _cached_map(theory, ("insert0", comb.leaves, i), build)
    return FusionState(out, m @ comb.vec)


def remove_vacuum(state: FusionState, i: int) -> FusionState:
    """Drop a leaf that carries the vacuum label."""
    if state.leaves[i] != 0:
        raise PreconditionError(f"leaf {i} carries label {state.leaves[i]}, not the vacuum")
    comb = to_comb(state)
    theory = state.theory
    n = comb.basis.n
    leaves = comb.leaves[:i] + comb.leaves[i + 1 :]
    out = get_basis(theory, leaves, left_comb(n - 1))

    def build():
        rows = []
        for lab in comb.basis.labelings:
            new = {}
            for lo, hi in out.tree:
                src = (0, hi) if hi <= i else (0, hi + 1)
                new[(lo, hi)] = comb.basis.label(lab, src)
            rows.append(out.index[tuple(new[x] for x in out.tree)])
        return _sparse(rows, range(comb.basis.dim), np.ones(len(rows)), (out.dim, comb.basis.dim))

    m = _cached_map(theory, ("remove0", comb.leaves, i), build)
    return FusionState(out, m @ comb.vec)


def split(state: FusionState, i: int, a: int, b: int) -> FusionState:
    """Replace leaf i (label c) by the pair (a, b) in channel c; isometric."""
    n = state.basis.n
    if not 0 <= i < n:
        raise PreconditionError(f"no leaf {i} among {n} leaves")
    c = state.leaves[i]
    theory = state.theory
    if not theory.rules.admissible(a, b, c):
        raise PreconditionError(f"label {c} cannot split into ({a}, {b})")
    comb = to_comb(state)
    leaves = comb.leaves[:i] + (a, b) + comb.leaves[i + 1 :]
    out = get_basis(theory, leaves, comb_with_pair(n + 1, i))

    def build():
        rows = []
        for lab in comb.basis.labelings:
            new = {(i, i + 2): c}
            for lo, hi in out.tree:
                if (lo, hi) == (i, i + 2):
                    continue
                src = (0, hi) if hi <= i else (0, hi - 1)
                new[(lo, hi)] = comb.basis.label(lab, src)
            rows.append(out.index[tuple(new[x] for x in out.tree)])
        return _sparse(rows, range(comb.basis.dim), np.ones(len(rows)), (out.dim, comb.basis.dim))

    m = _cached_map(theory, ("split", comb.leaves, i, a, b), build)
    return to_comb(FusionState(out, m @ comb.vec))


def pair_create(state: FusionState, i: int, a: int) -> FusionState:
    """Create (a, dual a) from the vacuum so that they occupy leaves i, i+1."""
    abar = state.theory.rules.dual[a]
    return split(_insert_vacuum(state, i), i, a, abar)


# ---------------------------------------------------------------- stumps


def stump_matrix(theory: SkeletalData, h: int, side: str = "left") -> np.ndarray:
    """Action of an h-line between the two anyons of a qudit, diagonal in the pair channel.

    ``side`` names the anyon that emits h. From the left it is absorbed by the
    right anyon, giving diag_j [F^{qhq}_j]_{qq}; from the right the entries are
    the complex conjugates. Both are the identity for h = 0, and the two sides
    are mutually inverse in any gauge.
    """
    q = theory.rules.label("q")
    labels = theory.rules.outcomes(q, q)
    if h not in labels:
        raise PreconditionError(f"stump charge must be a group label, got {h}")
    if side not in ("left", "right"):
        raise PreconditionError("side must be 'left' or 'right'")
    diag = np.array([theory.f(q, h, q, j, q, q) for j in labels], dtype=complex)
    return np.diag(diag if side == "left" else diag.conj())


def stump_matrix_by_engine(theory: SkeletalData, h: int, side: str = "left") -> np.ndarray:
    """The same operator obtained by running split and fuse on the state engine."""
    q = theory.rules.label("q")
    labels = theory.rules.outcomes(q, q)
    cols = []
    for j in labels:
        state = to_comb(make_state(theory, (q, q), {(j,): 1.0}))
        if side == "left":
            state = split(state, 0, q, h)
            _, _, state = fuse_measure(state, 1, outcome=q)
        else:
            state = split(state, 1, h, q)
            _, _, state = fuse_measure(state, 0, outcome=q)
        state = to_pairwise(state)
        cols.append([state.amplitudes().get((k,), 0.0) for k in labels])
    return np.array(cols).T


# ---------------------------------------------------------------- comparison


def _common_vectors(s1: FusionState, s2: FusionState):
    if s1.leaves != s2.leaves:
        raise StructuralError(f"states live on different leaves: {s1.leaves} vs {s2.leaves}")
    if s1.theory is not s2.theory:
        raise StructuralError("states belong to different theory objects")
    s2 = change_basis(s2, s1.tree)
    return s1.vec, s2.vec


def overlap(s1: FusionState, s2: FusionState) -> complex:
    v1, v2 = _common_vectors(s1, s2)
    return complex(np.vdot(v1, v2))


def fidelity(s1: FusionState, s2: FusionState) -> float:
    """|<s1|s2>| for normalised inputs."""
    v1, v2 = _common_vectors(s1, s2)
    return float(abs(np.vdot(v1, v2)) / (np.linalg.norm(v1) * np.linalg.norm(v2)))


def phase_equal(s1: FusionState, s2: FusionState, tol: float = EPS_CHECK) -> bool:
    """Equality up to a global phase.

    The phase is fixed by the largest-magnitude component of ``s2`` (lowest
    index on ties) and the states are then compared entrywise.
    """
    v1, v2 = _common_vectors(s1, s2)
    mags = np.abs(v2)
    k = int(np.flatnonzero(mags == mags.max())[0])
    if mags[k] == 0:
        return bool(np.max(np.abs(v1), initial=0.0) <= tol)
    lam = v1[k] / v2[k]
    if abs(lam) == 0:
        return False
    lam /= abs(lam)
    return bool(np.max(np.abs(v1 - lam * v2)) <= tol)


def _register_svd(state: FusionState, start: int, stop: int):
    n = state.basis.n
    if not 0 <= start < stop <= n:
        raise PreconditionError(f"bad register [{start}, {stop}) for {n} leaves")
    reg = [(lo + start, hi + start) for lo, hi in pairwise_tree(stop - start)]
    left = [(0, k) for k in range(2, start + 1)]
    right = [(stop, k) for k in range(stop + 2, n + 1)]
    top = []
    if start > 0:
        top.append((0, stop))
    if stop < n:
        top.append((0, n) if start > 0 else (start, n))
    tree = _canon(reg + left + right + top)
    work = change_basis(state, tree)
    basis = work.basis
    reg_basis = get_basis(state.theory, state.leaves[start:stop], pairwise_tree(stop - start))
    # top-node charges follow from the blocks they join, so they are not
    # environment degrees of freedom unless that fails (checked below)
    env_nodes = left + right
    env_index: dict = {}
    entries: dict = {}
    for lab, z in zip(basis.labelings, work.vec):
        if z == 0:
            continue
        rlab = tuple(basis.label(lab, (lo + start, hi + start)) for lo, hi in reg_basis.tree)
        ekey = tuple(basis.label(lab, x) for x in env_nodes)
        key = (env_index.setdefault(ekey, len(env_index)), reg_basis.index[rlab])
        if key in entries:
            raise StructuralError("register charge does not determine how it joins its surroundings")
        entries[key] = z
    M = np.zeros((max(len(env_index), 1), reg_basis.dim), dtype=complex)
    for (e, r), z in entries.items():
        M[e, r] = z
    _, s, vh = np.linalg.svd(M, full_matrices=False)
    if np.sum(s**2) == 0:
        raise PreconditionError("state has zero norm")
    return reg_basis, s, vh


def register_state(state: FusionState, start: int, stop: int) -> tuple[FusionState, float]:
    """Factor out the leaves [start, stop) as a register in the pairwise shape.

    The other leaves are grouped into a left block and a right block (each a
    left comb) attached outside the register. Returns the normalised leading
    Schmidt vector of the register and the relative weight of all other
    Schmidt components; a weight near zero means the register is unentangled
    with its surroundings, so the returned vector is its state.
    """
    reg_basis, s, vh = _register_svd(state, start, stop)
    total = float(np.sum(s**2))
    return FusionState(reg_basis, vh[0]), float(np.sum(s[1:] ** 2)) / total


def register_density(state: FusionState, start: int, stop: int):
    """Reduced density matrix of the register [start, stop) in the pairwise basis."""
    reg_basis, s, vh = _register_svd(state, start, stop)
    w = s**2 / np.sum(s**2)
    rho = (vh.T * w) @ vh.conj()
    return reg_basis, rho
