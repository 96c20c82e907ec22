"""Party-level sessions: qubit ownership, local operations and a classical channel.

The session object plays the role of nature. It owns the global state vector
and performs measurement collapse; parties hold only qubit labels and the
integers they receive over the classical channel.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .bases import MeasurementBasis, basis_general, basis_pi1_23_s4
from .protocols import (
    EPR_RECEIVERS,
    Transcript,
    UnknownCoeffs,
    epr_initial_state,
    epr_rules,
    nplet_initial_state,
    nplet_rules,
    receiver_names,
)
from .states import epr_input, nplet
from .statevec import Gate, StateVector, apply_gate, fidelity, measure


class LocalityViolation(RuntimeError):
    """A party tried to act on a qubit it does not own."""


class ProtocolError(RuntimeError):
    pass


@dataclass(frozen=True)
class Party:
    name: str
    owned: frozenset[int]


@dataclass(frozen=True)
class ClassicalMessage:
    seq: int
    sender: str
    recipient: str
    payload: int

    def __post_init__(self):
        # the channel carries outcome indices only
        if type(self.payload) is not int:
            raise TypeError(f"classical payload must be an int, got {type(self.payload).__name__}")


@dataclass(frozen=True)
class OpRecord:
    party: str
    gate: Gate
    qubits: tuple[int, ...]  # original labels
    undoes: str | None = None  # label of the correction operator this inverts


@dataclass
class Session:
    layout: str
    n: int
    coeffs: UnknownCoeffs
    phi: float
    seed: int | None
    state: StateVector
    labels: list[int]  # original label of each live qubit, in state order
    parties: dict[str, Party]
    messages: list[ClassicalMessage] = field(default_factory=list)
    log: list[OpRecord] = field(default_factory=list)
    outcome: int | None = None
    probability: float | None = None
    _rng: np.random.Generator | None = field(default=None, repr=False)

    @property
    def sender(self) -> Party:
        return self.parties["Alice"]

    @property
    def receivers(self) -> list[Party]:
        return [p for name, p in self.parties.items() if name != "Alice"]

    def owner_of(self, qubit: int) -> str:
        for p in self.parties.values():
            if qubit in p.owned:
                return p.name
        raise KeyError(qubit)


def _parse_layout(layout: str, n: int | None) -> tuple[str, int]:
    if layout == "epr-via-ghz":
        return layout, 2
    if layout.startswith("nplet"):
        if layout.startswith("nplet(") and layout.endswith(")"):
            n = int(layout[6:-1])
        if n is None or not 2 <= n <= 10:
            raise ValueError(f"nplet layout needs 2 <= N <= 10, got {n}")
        return "nplet", n
    raise ValueError(f"unknown layout {layout!r}")


def new_session(layout: str, coeffs: UnknownCoeffs, phi: float = 0.0, seed: int | None = None,
                *, n: int | None = None) -> Session:
    """Fresh session: input state on the sender's first qubits, GHZ chain after.

    ``layout`` is ``"epr-via-ghz"`` (Alice 1-3, Bob 4, Claire 5) or
    ``"nplet(N)"`` (Alice 1..N+1, receiver ``R_j`` owns ``N+1+j``).
    """
    layout, n = _parse_layout(layout, n)
    if layout == "epr-via-ghz":
        state = epr_initial_state(coeffs)
        parties = {
            "Alice": Party("Alice", frozenset({1, 2, 3})),
            "Bob": Party("Bob", frozenset({4})),
            "Claire": Party("Claire", frozenset({5})),
        }
    else:
        state = nplet_initial_state(coeffs, n)
        parties = {"Alice": Party("Alice", frozenset(range(1, n + 2)))}
        for j, name in enumerate(receiver_names(n), 1):
            parties[name] = Party(name, frozenset({n + 1 + j}))
    return Session(
        layout=layout, n=n, coeffs=coeffs, phi=float(phi), seed=seed, state=state,
        labels=list(range(1, state.n_qubits + 1)), parties=parties,
        _rng=np.random.default_rng(seed) if seed is not None else None,
    )


def _dense(session: Session, qubits: Sequence[int]) -> list[int]:
    try:
        return [session.labels.index(q) + 1 for q in qubits]
    except ValueError:
        raise ProtocolError(f"qubits {list(qubits)} are not all live (measured qubits are classical)") from None


def local_apply(session: Session, party: str, gate: Gate, qubits: Sequence[int],
                *, undoes: str | None = None) -> Session:
    owned = session.parties[party].owned
    stray = [q for q in qubits if q not in owned]
    if stray:
        raise LocalityViolation(f"{party} does not own qubit(s) {stray}")
    session.state = apply_gate(session.state, gate, _dense(session, qubits))
    session.log.append(OpRecord(party, gate, tuple(qubits), undoes))
    return session


def default_basis(session: Session) -> MeasurementBasis:
    if session.layout == "epr-via-ghz":
        return basis_pi1_23_s4(session.phi)
    return basis_general(session.n, session.phi)


def alice_measure(session: Session, basis: MeasurementBasis | None = None,
                  *, outcome: int | None = None) -> int:
    if session.outcome is not None:
        raise ProtocolError("Alice has already measured")
    basis = default_basis(session) if basis is None else basis
    owned = sorted(session.sender.owned)
    if basis.m_qubits != len(owned):
        raise ProtocolError(f"basis acts on {basis.m_qubits} qubits, Alice owns {owned}")
    if outcome is None and session._rng is None:
        raise ProtocolError("session has no seed; force an outcome instead")
    m = measure(session.state, basis, _dense(session, owned), outcome=outcome, rng=session._rng)
    session.state = m.post_state
    session.labels = [q for q in session.labels if q not in owned]
    session.outcome, session.probability = m.outcome, m.probability
    return m.outcome


def broadcast(session: Session) -> Session:
    if session.outcome is None:
        raise ProtocolError("nothing to broadcast before the measurement")
    if session.messages:
        raise ProtocolError("outcome already broadcast")
    for p in session.receivers:
        session.messages.append(ClassicalMessage(len(session.messages), "Alice", p.name, session.outcome))
    return session


def inbox(session: Session, party: str) -> list[int]:
    return [m.payload for m in session.messages if m.recipient == party]


def _rules(session: Session):
    if session.layout == "epr-via-ghz":
        return epr_rules(session.phi)
    return nplet_rules(session.n, session.phi)


def target_state(session: Session) -> StateVector:
    c = session.coeffs
    if session.layout == "epr-via-ghz":
        return epr_input(c.alpha, c.beta)
    return nplet(c.alpha, c.beta, session.n)


def run_full(session: Session, variant: str = "main", *, outcome: int | None = None) -> Transcript:
    """Measure, broadcast, then let each receiver correct from its own inbox."""
    if session.outcome is not None or session.log:
        raise ProtocolError("run_full needs a fresh session")
    t0 = time.perf_counter()
    alice_measure(session, outcome=outcome)
    broadcast(session)
    rules = {r.outcome: r for r in _rules(session)}
    used_variant = "main"
    for j, party in enumerate(session.receivers):
        (k,) = inbox(session, party.name)
        rule = rules[k]
        gates = rule.variant(variant)
        if gates is not rule.ops:
            used_variant = "alternative"
        g = gates[j]
        if g.label != "I":
            (q,) = party.owned
            local_apply(session, party.name, g.dagger(), [q], undoes=g.label)
    check_locality(session)
    return Transcript(
        protocol="epr-via-ghz" if session.layout == "epr-via-ghz" else f"nplet({session.n})",
        alpha=session.coeffs.alpha,
        beta=session.coeffs.beta,
        outcome=session.outcome,
        probability=session.probability,
        fidelity=fidelity(session.state, target_state(session)),
        phi=session.phi,
        n=session.n,
        seed=session.seed,
        forced_outcome=outcome,
        variant=used_variant,
        operations=[
            {"party": r.party, "op": r.undoes or r.gate.label, "qubits": list(r.qubits)} for r in session.log
        ],
        messages=[
            {"seq": m.seq, "from": m.sender, "to": m.recipient, "payload": m.payload} for m in session.messages
        ],
        wall_time=time.perf_counter() - t0,
        final_state=session.state,
    )


def check_locality(session: Session) -> None:
    for rec in session.log:
        if not set(rec.qubits) <= session.parties[rec.party].owned:
            raise LocalityViolation(f"logged op {rec.gate.label} by {rec.party} touched {rec.qubits}")


def replay_locality(transcript: Transcript | dict, ownership: dict[str, Sequence[int]] | None = None) -> None:
    """Re-check a persisted transcript's operation log against an ownership map.

    Without an explicit map, the standard layout for the transcript's protocol is used.
    """
    t = transcript.to_dict() if isinstance(transcript, Transcript) else transcript
    if ownership is None:
        n = t["n"]
        if t["protocol"] == "epr-via-ghz":
            ownership = {"Alice": [1, 2, 3], "Bob": [4], "Claire": [5]}
        else:
            ownership = {"Alice": list(range(1, n + 2))}
            ownership.update({name: [n + 1 + j] for j, name in enumerate(receiver_names(n), 1)})
    for rec in t["operations"]:
        allowed = set(ownership.get(rec["party"], ()))
        if not set(rec["qubits"]) <= allowed:
            raise LocalityViolation(f"{rec['party']} applied {rec['op']} to {rec['qubits']}")


def save_transcript(transcript: Transcript, path: str | Path) -> None:
    Path(path).write_text(transcript.to_json() + "\n")


def load_transcript(path: str | Path) -> Transcript:
    return Transcript.from_dict(json.loads(Path(path).read_text()))


__all__ = [
    "ClassicalMessage",
    "EPR_RECEIVERS",
    "LocalityViolation",
    "OpRecord",
    "Party",
    "ProtocolError",
    "Session",
    "alice_measure",
    "broadcast",
    "check_locality",
    "inbox",
    "load_transcript",
    "local_apply",
    "new_session",
    "replay_locality",
    "run_full",
    "save_transcript",
]
