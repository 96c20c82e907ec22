"""Named states (Bell, EPR inputs, GHZ family, EPR-nplets) and entanglement analysis."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .statevec import MAX_QUBITS, TOL, StateVector, _check_qubits, _split, make_state

SCHMIDT_RANK_TOL = 1e-8

_S = 1 / np.sqrt(2)


class BellKind(Enum):
    PHI_PLUS = "Φ+"
    PHI_MINUS = "Φ-"
    PSI_PLUS = "Ψ+"
    PSI_MINUS = "Ψ-"


class EprForm(Enum):
    DIAGONAL = "diagonal"  # a|00> + b|11>
    ANTI_DIAGONAL = "anti-diagonal"  # a|01> + b|10>

    @property
    def kets(self) -> tuple[str, str]:
        """Basis kets carrying alpha and beta respectively."""
        return ("00", "11") if self is EprForm.DIAGONAL else ("01", "10")


@dataclass(frozen=True)
class EntanglementClass:
    kind: str  # "Product" | "PairEntangled" | "GenuineTripartite"
    pair: tuple[int, int] | None = None

    def __str__(self) -> str:
        return f"PairEntangled{self.pair}" if self.pair else self.kind


PRODUCT = EntanglementClass("Product")
GENUINE_TRIPARTITE = EntanglementClass("GenuineTripartite")


def pair_entangled(i: int, j: int) -> EntanglementClass:
    return EntanglementClass("PairEntangled", tuple(sorted((i, j))))


_BELL_AMPS = {
    BellKind.PHI_PLUS: [_S, 0, 0, _S],
    BellKind.PHI_MINUS: [_S, 0, 0, -_S],
    BellKind.PSI_PLUS: [0, _S, _S, 0],
    BellKind.PSI_MINUS: [0, _S, -_S, 0],
}


def bell(kind: BellKind) -> StateVector:
    return StateVector(2, np.array(_BELL_AMPS[kind]))


def _check_coeffs(alpha: complex, beta: complex) -> None:
    n2 = abs(alpha) ** 2 + abs(beta) ** 2
    if abs(n2 - 1.0) > TOL:
        raise ValueError(f"|alpha|^2 + |beta|^2 = {n2!r}, expected 1")


def epr_input(alpha: complex, beta: complex, form: EprForm = EprForm.ANTI_DIAGONAL) -> StateVector:
    _check_coeffs(alpha, beta)
    amps = np.zeros(4, dtype=np.complex128)
    ka, kb = form.kets
    amps[int(ka, 2)] = alpha
    amps[int(kb, 2)] = beta
    return StateVector(2, amps)


def _two_term(n: int, a: complex, b: complex) -> StateVector:
    if n > MAX_QUBITS:
        raise ValueError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit limit")
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[0] = a
    amps[-1] = b
    return StateVector(n, amps)


def ghz_chain(m: int) -> StateVector:
    """``(|0...0> + |1...1>)/sqrt(2)`` on ``m >= 2`` qubits."""
    if m < 2:
        raise ValueError("a GHZ chain needs at least 2 qubits")
    return _two_term(m, _S, _S)


def ghz_triplet() -> StateVector:
    return ghz_chain(3)


def nplet(alpha: complex, beta: complex, n: int) -> StateVector:
    """EPR-nplet ``alpha|0>^n + beta|1>^n``."""
    if n < 1:
        raise ValueError("an nplet needs at least one qubit")
    _check_coeffs(alpha, beta)
    if n == 1:
        return StateVector(1, np.array([alpha, beta]))
    return _two_term(n, alpha, beta)


def triplet_mes_family() -> list[StateVector]:
    """The eight maximally entangled three-qubit states, in the order
    ``(|000>±|111>), (|001>±|110>), (|010>±|101>), (|100>±|011>)``.
    """
    out = []
    for a, b in (("000", "111"), ("001", "110"), ("010", "101"), ("100", "011")):
        for sign in (1, -1):
            amps = np.zeros(8, dtype=np.complex128)
            amps[int(a, 2)] = 1
            amps[int(b, 2)] = sign
            out.append(make_state(3, amps))
    return out


def schmidt(state: StateVector, left: Sequence[int]) -> list[float]:
    """Schmidt coefficients of the cut ``left | rest``, descending, zeros dropped."""
    left = _check_qubits(state.n_qubits, left, "left")
    if not left or len(left) >= state.n_qubits:
        raise ValueError("left must be a proper nonempty subset of the qubits")
    mat, _ = _split(state.amps, state.n_qubits, sorted(left))
    sv = np.linalg.svd(mat, compute_uv=False)
    return [float(s) for s in sv if s > SCHMIDT_RANK_TOL]


def schmidt_rank(state: StateVector, left: Sequence[int]) -> int:
    return len(schmidt(state, left))


def entanglement_entropy(state: StateVector, left: Sequence[int]) -> float:
    """Von Neumann entropy (bits) of the reduced state on ``left``."""
    p = np.square(schmidt(state, left))
    return float(-np.sum(p * np.log2(p)))


def is_maximally_entangled_pair(state: StateVector, pair: Sequence[int]) -> bool:
    """Two-qubit subsystem is pure-ish and maximally entangled: spectrum [1/sqrt2, 1/sqrt2].

    Requires the pair to factor out of the rest of the register first.
    """
    pair = sorted(pair)
    if state.n_qubits > 2 and schmidt_rank(state, pair) != 1:
        return False
    if state.n_qubits == 2:
        sub = state
    else:
        rest = [q for q in range(1, state.n_qubits + 1) if q not in pair]
        mat, _ = _split(state.amps, state.n_qubits, pair + rest)
        u, _, _ = np.linalg.svd(mat)
        sub = StateVector(2, u[:, 0])
    spec = schmidt(sub, [1])
    return len(spec) == 2 and np.allclose(spec, [_S, _S], atol=SCHMIDT_RANK_TOL)


def classify3(state: StateVector) -> EntanglementClass:
    if state.n_qubits != 3:
        raise ValueError(f"classify3 needs 3 qubits, got {state.n_qubits}")
    factored = [q for q in (1, 2, 3) if schmidt_rank(state, [q]) == 1]
    if len(factored) == 3:
        return PRODUCT
    if len(factored) == 1:
        i, j = (q for q in (1, 2, 3) if q != factored[0])
        return pair_entangled(i, j)
    # two factored qubits force the third to factor as well
    assert not factored, factored
    return GENUINE_TRIPARTITE
