"""Teleportation and superdense coding with Ising and Tambara-Yamagami anyons.

A qudit is a pair of q anyons; its value is the fusion channel of the pair,
a group label read in lexicographic order. Registers of several qudits use
the pairwise tree. Every protocol is driven entirely by state-engine
operations, so fidelities and probabilities are computed, not assumed.

Layout of the teleportation cascade (N anyons to teleport)::

    A_1 ... A_N | y_1 ... y_N | z_1 ... z_N
      Alice       Alice's half   Bob's half

The shared resource is N nested pair creations (y_k with z_{N+1-k}), which
in the pairwise tree is N/2 maximally entangled e-dits. Alice fuses A_N with
y_1 (outcome g_N), absorbs g_N into A_{N-1}, fuses that with y_2 (g_{N-1}),
and so on down to g_1, which is left in place.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .algebra import EPS_CHECK
from .category import SkeletalData
from .errors import CapabilityError, PreconditionError, StructuralError
from .states import (
    FusionState,
    braid_generator,
    count_braids,
    fuse_measure,
    get_basis,
    outcome_distribution,
    pair_create,
    phase_equal,
    pairwise_tree,
    register_density,
    register_state,
    split,
    stump_matrix,
    to_comb,
    to_pairwise,
    vacuum_state,
    change_basis,
    tree_from_nested,
)


def q_label(theory: SkeletalData) -> int:
    """The non-invertible label q."""
    try:
        return theory.rules.label("q")
    except StructuralError:
        raise PreconditionError(f"theory {theory.name} has no label 'q'") from None


def group_labels(theory: SkeletalData) -> list[int]:
    """Invertible labels, i.e. the possible pair channels of two q's."""
    return theory.rules.outcomes(q_label(theory), q_label(theory))


# ---------------------------------------------------------------- qudit registers


def dit_states(theory: SkeletalData, m: int) -> list[tuple[int, ...]]:
    """All dit strings (k_1, ..., k_m) in lexicographic order."""
    return list(itertools.product(group_labels(theory), repeat=m))


def qudits(theory: SkeletalData, amplitudes) -> FusionState:
    """Register of m qudits (2m q anyons) from a vector over dit strings."""
    amplitudes = np.asarray(amplitudes, dtype=complex)
    d = len(group_labels(theory))
    m = round(math.log(len(amplitudes), d)) if len(amplitudes) > 1 else 0
    if d**m != len(amplitudes) or m == 0:
        raise PreconditionError(f"{len(amplitudes)} amplitudes do not form a register of {d}-dits")
    q = q_label(theory)
    basis = get_basis(theory, (q,) * (2 * m), pairwise_tree(2 * m))
    vec = np.zeros(basis.dim, dtype=complex)
    lookup = {lab[:m]: i for i, lab in enumerate(basis.labelings)}
    for dits, z in zip(dit_states(theory, m), amplitudes):
        vec[lookup[dits]] = z
    return FusionState(basis, vec)


def dit_vector(state: FusionState) -> np.ndarray:
    """Amplitudes of a pairwise-shaped register indexed by dit strings."""
    state = to_pairwise(state)
    m = state.basis.n // 2
    lookup = {lab[:m]: i for i, lab in enumerate(state.basis.labelings)}
    return np.array([state.vec[lookup[k]] for k in dit_states(state.theory, m)])


def random_qudits(theory: SkeletalData, m: int, rng: np.random.Generator) -> FusionState:
    d = len(group_labels(theory))
    v = rng.normal(size=d**m) + 1j * rng.normal(size=d**m)
    return qudits(theory, v / np.linalg.norm(v))


def pauli_tensor(xs, zs) -> np.ndarray:
    """Matrix of (tensor over j) Z^{z_j} X^{x_j} on m qubits (Ising labels)."""
    X = np.array([[0, 1], [1, 0]], dtype=complex)
    Z = np.diag([1, -1]).astype(complex)
    out = np.ones((1, 1), dtype=complex)
    for x, z in zip(xs, zs):
        out = np.kron(out, np.linalg.matrix_power(Z, z) @ np.linalg.matrix_power(X, x))
    return out


def register_fidelity(state: FusionState, start: int, stop: int, target: FusionState) -> float:
    """sqrt(<target| rho |target>) for the register [start, stop) of ``state``.

    For a pure register this is |<target|register>|.
    """
    reg_basis, rho = register_density(state, start, stop)
    t = to_pairwise(target)
    if t.basis is not reg_basis:
        raise PreconditionError("target does not match the register's anyons")
    v = t.vec / np.linalg.norm(t.vec)
    return float(np.sqrt(max(np.real(np.vdot(v, rho @ v)), 0.0)))


# ---------------------------------------------------------------- resource states


def make_edit(theory: SkeletalData) -> FusionState:
    """Maximally entangled pair of qudits from two nested pair creations.

    Returned in the pairwise tree over four q anyons; every channel amplitude
    has modulus d^{-1/2}.
    """
    q = q_label(theory)
    state = pair_create(vacuum_state(theory), 0, q)
    state = pair_create(state, 1, q)
    return to_pairwise(state)


def share_edits(phi: FusionState) -> FusionState:
    """Append N nested pair creations to the right of the N anyons of ``phi``."""
    theory = phi.theory
    q = q_label(theory)
    n = phi.basis.n
    state = to_comb(phi)
    for k in range(n):
        state = pair_create(state, n + k, q)
    return state


# ---------------------------------------------------------------- transcripts


def _complex_list(vec) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(vec, dtype=complex)]


@dataclass
class TeleportTranscript:
    """Full record of one teleportation run.

    ``record`` holds the raw outcomes in measurement order (g_N, ..., g_1);
    for Ising these are (z_p, x_p, ..., z_1, x_1). ``dits`` are the same
    values under the lexicographic bijection from group labels to integers.
    """

    mode: str
    theory_id: str
    n_anyons: int
    input_state: FusionState
    record: list[int]
    dits: list[int]
    probabilities: list[float]
    pre_correction: FusionState
    pre_correction_mixing: float
    correction: list
    output_state: FusionState
    fidelity: float
    braids: int
    seed: int | None = None
    forced: bool = False
    pre_correction_expected: FusionState | None = None

    @property
    def record_probability(self) -> float:
        return float(np.prod(self.probabilities))

    @property
    def pre_correction_ok(self) -> bool | None:
        if self.pre_correction_expected is None:
            return None
        return phase_equal(self.pre_correction, self.pre_correction_expected, EPS_CHECK)

    def to_dict(self) -> dict:
        out = {"protocol": f"teleport_{self.mode}", "theory_id": self.theory_id}
        if self.forced:
            out["forced_record"] = list(self.record)
        else:
            out["seed"] = self.seed
        out.update(
            n_anyons=self.n_anyons,
            record=list(self.record),
            dits=list(self.dits),
            correction=[str(op) for op in self.correction],
            fidelity=self.fidelity,
            probabilities=[float(p) for p in self.probabilities],
            braid_calls=self.braids,
            input_state=_complex_list(dit_vector(self.input_state)),
        )
        if self.mode == "braided":
            xs, zs = bits_from_record(self.record)
            out["x_bits"], out["z_bits"] = xs, zs
        return out


@dataclass
class SdcTranscript:
    mode: str
    theory_id: str
    encoded: tuple[int, int]
    decoded: tuple[int, int]
    probabilities: list[float]
    stray_mass: float
    braids: int
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.decoded == self.encoded

    def to_dict(self) -> dict:
        out = {
            "protocol": f"sdc_{self.mode}",
            "theory_id": self.theory_id,
            "seed": self.seed,
            "dits": list(self.encoded),
            "decoded": list(self.decoded),
            "success": self.success,
            "correction": [],
            "fidelity": 1.0 if self.success else 0.0,
            "probabilities": [float(p) for p in self.probabilities],
            "stray_mass": self.stray_mass,
            "braid_calls": self.braids,
        }
        if "alternative_phase" in self.extra:
            z = self.extra["alternative_phase"]
            out["alternative_phase"] = [z.real, z.imag]
        return out


# ---------------------------------------------------------------- teleportation


def _alice_cascade(state: FusionState, n: int, rng, forced):
    """Alice's N fusions with absorptions; returns (record, probs, state)."""
    q = q_label(state.theory)
    record, probs = [], []
    for step in range(n):
        pos = n - 1 - step
        want = None if forced is None else forced[step]
        g, p, state = fuse_measure(state, pos, rng=rng, outcome=want)
        record.append(g)
        probs.append(p)
        if pos > 0:
            _, p_abs, state = fuse_measure(state, pos - 1, outcome=q)
            if abs(p_abs - 1) > EPS_CHECK:
                raise StructuralError(f"absorption of {g} was not deterministic ({p_abs})")
    return record, probs, state


def _check_input(theory, phi, forced, rng):
    if phi.theory is not theory:
        raise PreconditionError("input state belongs to a different theory")
    n = phi.basis.n
    q = q_label(theory)
    if n % 2 or n == 0 or any(a != q for a in phi.leaves):
        raise PreconditionError(f"input must be an even, positive number of q anyons, got {phi.leaves}")
    if abs(phi.norm - 1) > 1e-9:
        raise PreconditionError(f"input state has norm {phi.norm}")
    if forced is None:
        if rng is None:
            raise PreconditionError("pass an rng or a forced outcome record")
        return None
    forced = [int(g) for g in forced]
    if len(forced) != n:
        raise PreconditionError(f"forced record needs {n} outcomes, got {len(forced)}")
    allowed = set(group_labels(theory))
    if any(g not in allowed for g in forced):
        raise PreconditionError(f"forced record {forced} contains non-group labels")
    return forced


def bits_from_record(record) -> tuple[list[int], list[int]]:
    """Split a record (z_p, x_p, ..., z_1, x_1) into the bit lists x and z."""
    n = len(record)
    p = n // 2
    zs = [record[n - 2 * j] for j in range(1, p + 1)]
    xs = [record[n - 2 * j + 1] for j in range(1, p + 1)]
    return xs, zs


def record_from_bits(xs, zs) -> list[int]:
    """Inverse of :func:`bits_from_record`."""
    out = []
    for j in range(len(xs), 0, -1):
        out += [zs[j - 1], xs[j - 1]]
    return out


def correction_braidword(xs, zs) -> list[tuple]:
    """Braid prescription undoing (tensor over j) Z^{z_j} X^{x_j + x_{j+1}}.

    Register anyons are numbered 1..2p and ``("sigma", k, 2)`` is the
    monodromy of anyons k and k+1. Ancilla anyons -1 and 0 are created on
    the left (marker ``("create_left",)``) before sigma_0 is used. The Z
    layer (z_j on sigma_{2j-1}) comes first, then the X layer (x_j on
    sigma_{2j-2}) from j = p down to j = 1.
    """
    p = len(xs)
    if len(zs) != p:
        raise PreconditionError("bit strings of different length")
    word: list[tuple] = []
    for j in range(1, p + 1):
        if zs[j - 1]:
            word.append(("sigma", 2 * j - 1, 2))
    for j in range(p, 0, -1):
        if xs[j - 1]:
            if j == 1:
                word.append(("create_left",))
            word.append(("sigma", 2 * j - 2, 2))
    return word


def word_to_strings(word) -> list[str]:
    return ["a_l+" if op[0] == "create_left" else f"s{op[1]}^{op[2]:+d}" for op in word]


def apply_correction_word(state: FusionState, word, offset: int):
    """Run a braid word; register anyon k sits at leaf k - 1 + offset.

    Returns (state, new offset). Negative powers use the inverse generator.
    """
    q = q_label(state.theory)
    for op in word:
        if op[0] == "create_left":
            state = pair_create(state, offset, q)
            offset += 2
        else:
            _, k, power = op
            leaf = k - 1 + offset
            if leaf < 0:
                raise PreconditionError("sigma_0 used before the left ancilla was created")
            for _ in range(abs(power)):
                state = braid_generator(state, leaf, 1 if power > 0 else -1)
    return state, offset


def expected_pre_correction(phi: FusionState, record) -> FusionState:
    """(tensor over j) Z^{z_j} X^{x_j + x_{j+1}} phi, with x_{p+1} = 0."""
    xs, zs = bits_from_record(record)
    p = len(xs)
    flips = [(xs[j] + (xs[j + 1] if j + 1 < p else 0)) % 2 for j in range(p)]
    return qudits(phi.theory, pauli_tensor(flips, zs) @ dit_vector(phi))


def teleport_braided(theory: SkeletalData, phi: FusionState, rng=None, forced_record=None, seed=None) -> TeleportTranscript:
    """Teleport p Ising qubits (2p anyons) and correct with braids.

    Before correction Bob holds (tensor over j) Z^{z_j} X^{x_j + x_{j+1}}
    phi; the transcript carries that expected state for comparison.
    """
    if not theory.braided:
        raise CapabilityError(f"{theory.name} has no braiding data")
    if len(group_labels(theory)) != 2:
        raise PreconditionError("braided teleportation is defined for Ising qubits")
    forced = _check_input(theory, phi, forced_record, rng)
    n = phi.basis.n
    with count_braids() as counter:
        state = share_edits(phi)
        record, probs, state = _alice_cascade(state, n, rng, forced)
        pre, mixing = register_state(state, 1, n + 1)
        xs, zs = bits_from_record(record)
        word = correction_braidword(xs, zs)
        state, offset = apply_correction_word(state, word, 1)
    out, fid = _readout(state, offset, n, phi)
    return TeleportTranscript(
        "braided", theory.name, n, phi, record, dit_values(theory, record), probs, pre, mixing,
        word_to_strings(word), out, fid, counter["calls"], seed, forced is not None,
        expected_pre_correction(phi, record),
    )


def _readout(state: FusionState, start: int, n: int, phi: FusionState):
    out, _ = register_state(state, start, start + n)
    return out, register_fidelity(state, start, start + n, phi)


def dit_values(theory: SkeletalData, record) -> list[int]:
    """Lexicographic bijection from group labels to 0..d-1."""
    labels = group_labels(theory)
    return [labels.index(g) for g in record]


def teleport_braidfree(theory: SkeletalData, phi: FusionState, rng=None, forced_record=None, seed=None) -> TeleportTranscript:
    """Teleport N Tambara-Yamagami anyons using only splittings and fusions.

    Alice's outcomes g_N, ..., g_1 are sent as dits. For each j >= 2 Bob
    splits z_{j-1} into (q, g_j) and fuses the g_j into z_j; then he creates
    a (g_1, g_1) pair on his left and fuses its right member into z_1.
    Trivial charges are skipped. No braid is applied.
    """
    q = q_label(theory)
    forced = _check_input(theory, phi, forced_record, rng)
    n = phi.basis.n
    with count_braids() as counter:
        state = share_edits(phi)
        record, probs, state = _alice_cascade(state, n, rng, forced)
        pre, mixing = register_state(state, 1, n + 1)
        g = {n - step: record[step] for step in range(n)}  # g[j] = g_j
        script = []
        for j in range(2, n + 1):
            if g[j] == 0:
                continue
            # z_{j-1} sits at leaf j - 1; after the split g_j is at leaf j
            state = split(state, j - 1, q, g[j])
            _, _, state = fuse_measure(state, j, outcome=q)
            script.append(f"split z{j - 1} -> (q, {g[j]}); fuse into z{j}")
        offset = 1
        if g[1] != 0:
            state = pair_create(state, 1, g[1])
            _, _, state = fuse_measure(state, 2, outcome=q)
            script.append(f"create ({g[1]}, {g[1]}) left of z1; fuse into z1")
            offset = 2
    out, fid = _readout(state, offset, n, phi)
    return TeleportTranscript(
        "braid_free", theory.name, n, phi, record, dit_values(theory, record), probs, pre, mixing,
        script, out, fid, counter["calls"], seed, forced is not None,
    )


def forced_records(theory: SkeletalData, n: int) -> list[tuple[int, ...]]:
    """Every admissible outcome record for an n-anyon teleportation."""
    return list(itertools.product(group_labels(theory), repeat=n))


def sweep(protocol, theory: SkeletalData, phi: FusionState, workers: int = 1) -> list[TeleportTranscript]:
    """Run ``protocol`` once per forced record, in record order.

    With ``workers > 1`` the records are spread over a thread pool; each run
    is independent, so the output does not depend on the worker count.
    """
    records = forced_records(theory, phi.basis.n)

    def run(rec):
        return protocol(theory, phi, forced_record=rec)

    if workers <= 1:
        return [run(rec) for rec in records]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, records))


# ---------------------------------------------------------------- superdense coding


def _decode(state: FusionState, right_absorb: bool = False):
    """Bob's decoding of [B1 B2 A1 A2 ...]: middle pair, absorb, then the rest.

    Returns ((x, y), probabilities, largest mass outside the taken branches).
    """
    q = q_label(state.theory)
    stray = 0.0
    dist = outcome_distribution(state, 1)
    y = max(dist, key=dist.get)
    stray = max(stray, 1 - dist[y])
    _, py, state = fuse_measure(state, 1, outcome=y)
    _, _, state = fuse_measure(state, 1 if right_absorb else 0, outcome=q)
    dist = outcome_distribution(state, 0)
    x = max(dist, key=dist.get)
    stray = max(stray, 1 - dist[x])
    _, px, state = fuse_measure(state, 0, outcome=x)
    return (x, y), [py, px], stray


def sdc_braided(theory: SkeletalData, i: int, j: int, seed=None) -> SdcTranscript:
    """Send the two bits (i, j) with one Ising qubit.

    Alice holds the right half of an e-bit. She applies the pair monodromy
    j times (a Z) and, if i = 1, creates an ancilla pair on her right and
    takes the monodromy across (an X), then fuses the ancilla pair. Bob
    decodes by measuring the middle pair, absorbing it into his left anyon
    and measuring the remaining pair; the transcript also holds the result
    of absorbing to the right instead.
    """
    if not theory.braided:
        raise CapabilityError(f"{theory.name} has no braiding data")
    q = q_label(theory)
    if len(group_labels(theory)) != 2 or i not in (0, 1) or j not in (0, 1):
        raise PreconditionError("braided superdense coding sends two bits with Ising anyons")
    with count_braids() as counter:
        state = to_comb(make_edit(theory))
        for _ in range(2 * j):
            state = braid_generator(state, 2)
        if i:
            state = pair_create(state, 4, q)
            for _ in range(2):
                state = braid_generator(state, 3)
            _, _, state = fuse_measure(state, 4, outcome=1)
        decoded, probs, stray = _decode(state)
        decoded_right, _, stray_right = _decode(state, right_absorb=True)
    extra = {
        "alternative_phase": alternative_decode_phase(state, decoded),
        "alternative_decoded": decoded_right,
        "alternative_stray_mass": stray_right,
    }
    return SdcTranscript("braided", theory.name, (i, j), decoded, probs, stray, counter["calls"], seed, extra)


def alternative_decode_phase(state: FusionState, decoded) -> complex:
    """Phase of the right-absorption decoding relative to the left one.

    Compares the amplitude of (middle channel y, total x) in the basis where
    the middle pair joins B1 first with the basis where it joins A2 first.
    The value depends on the gauge; in the constructed gauge it is a sign.
    """
    x, y = decoded
    q = q_label(state.theory)
    shape_left, shape_right = ((0, (1, 2)), 3), (0, ((1, 2), 3))
    for k in range(4, state.basis.n):
        shape_left, shape_right = (shape_left, k), (shape_right, k)
    left = change_basis(state, tree_from_nested(shape_left))
    right = change_basis(state, tree_from_nested(shape_right))

    def amp(st, inner):
        b = st.basis
        for lab, z in zip(b.labelings, st.vec):
            if b.label(lab, (1, 3)) == y and b.label(lab, (0, 4)) == x and b.label(lab, inner) == q and abs(z) > 1e-9:
                return z
        raise StructuralError("decoded branch has no amplitude")

    return complex(amp(right, (1, 4)) / amp(left, (0, 3)))


def sdc_braidfree(theory: SkeletalData, i: int, j: int, seed=None) -> SdcTranscript:
    """Send two dits (i, j) with one Tambara-Yamagami qudit, without braids.

    Alice creates a (j, j) pair between her two anyons and fuses one member
    into each, then creates an (i, i) pair on her right and fuses the inner
    member into her right anyon. Bob decodes as in the braided protocol.
    """
    q = q_label(theory)
    labels = group_labels(theory)
    if i not in labels or j not in labels:
        raise PreconditionError(f"dits must be group labels {labels}")
    with count_braids() as counter:
        state = to_comb(make_edit(theory))
        if j:
            state = pair_create(state, 3, j)
            _, _, state = fuse_measure(state, 2, outcome=q)
            _, _, state = fuse_measure(state, 3, outcome=q)
        if i:
            state = pair_create(state, 4, i)
            _, _, state = fuse_measure(state, 3, outcome=q)
        decoded, probs, stray = _decode(state)
    return SdcTranscript("braid_free", theory.name, (i, j), decoded, probs, stray, counter["calls"], seed)


# ---------------------------------------------------------------- braid-free gates


def pauli_braidfree(theory: SkeletalData, g1: int, g2: int) -> np.ndarray:
    """One-qubit gate from two stumps, with charges g1 then g2, and no braids.

    The g1 stump acts inside the pair (a Z-type gate). The g2 stump joins an
    ancillary q on the left to the pair's left anyon; on the pair channel it
    is the stump conjugated by F^{qqq}_q (an X-type gate).
    """
    q = q_label(theory)
    F = theory.fmat(q, q, q, q).matrix
    inner = stump_matrix(theory, g1, "right")
    outer = stump_matrix(theory, g2, "right")
    return F @ outer @ F.conj().T @ inner


PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
}


def match_pauli(U: np.ndarray, tol: float = EPS_CHECK) -> str | None:
    """Name of the Pauli P with |tr(U^dagger P)| = 2, if exactly one matches."""
    hits = [name for name, P in PAULIS.items() if abs(abs(np.trace(U.conj().T @ P)) - 2) <= tol]
    return hits[0] if len(hits) == 1 else None


# ---------------------------------------------------------------- noughts and crosses


@dataclass(frozen=True)
class OxDiagram:
    """X errors on sites 1..p, drawn as crosses.

    ``edge_error`` marks a leftmost cross that arose from x_1 = 1 and has no
    partner inside the register.
    """

    p: int
    crosses: frozenset
    edge_error: bool

    def apply_vertex(self, j: int) -> OxDiagram:
        """v_j = X_{j-1} X_j; sites 0 and p+1 are ancillas and are not drawn."""
        if not 1 <= j <= self.p + 1:
            raise PreconditionError(f"vertex {j} outside 1..{self.p + 1}")
        crosses = set(self.crosses) ^ ({j - 1, j} & set(range(1, self.p + 1)))
        return OxDiagram(self.p, frozenset(crosses), self.edge_error)

    def apply_word(self, word) -> OxDiagram:
        """Act with the X layer of a correction word (sigma_{2j-2}^{+-2} is v_j)."""
        out = self
        for op in word:
            if op[0] == "sigma" and op[1] % 2 == 0 and op[2] % 2 == 0:
                out = out.apply_vertex(op[1] // 2 + 1)
        return out

    @property
    def parity(self) -> int:
        return len(self.crosses) % 2

    def is_paired(self) -> bool:
        """Crosses pair up, leaving at most one edge error as the leftmost cross."""
        return self.parity == int(self.edge_error)


def ox_from_bits(xs) -> OxDiagram:
    """Diagram of the X errors left by the bit string x_1..x_p.

    A maximal run of 1s x_j..x_{j+l} with j > 1 puts crosses at sites j-1
    and j+l; a run starting at site 1 puts a single cross at its last site
    and is an edge error.
    """
    xs = list(xs)
    if any(x not in (0, 1) for x in xs):
        raise PreconditionError("bits must be 0 or 1")
    p = len(xs)
    crosses = set()
    edge = False
    j = 0
    while j < p:
        if xs[j] == 0:
            j += 1
            continue
        start = j
        while j < p and xs[j] == 1:
            j += 1
        last = j  # 1-based site of the run's last bit
        if start == 0:
            crosses.add(last)
            edge = True
        else:
            crosses.update({start, last})
    return OxDiagram(p, frozenset(crosses), edge)
