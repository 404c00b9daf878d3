"""The modulo-d 2-sum protocol, its additive-channel view, and qudit cost ledgers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from qmacsec import quditsim


class ChannelError(RuntimeError):
    pass


class UnpairedUseError(ChannelError):
    pass


class PendingOutputError(ChannelError):
    pass


class SimMode(str, Enum):
    ABSTRACT = "abstract"
    QUANTUM = "quantum"


def _check_zd(d: int, *vals: int) -> None:
    if d < 2:
        raise ChannelError(f"channel dimension must be >= 2, got {d}")
    for v in vals:
        if not 0 <= v < d:
            raise ChannelError(f"input {v} not in Z_{d}")


def run_two_sum(d: int, alice: tuple[int, int], bob: tuple[int, int], mode: SimMode = SimMode.QUANTUM) -> tuple[int, int]:
    """Return ``(A1+B1, A2+B2) mod d``.

    In quantum mode the sums are read off a Bell-basis measurement of the
    encoded pair, and a non-deterministic outcome is a simulator bug.
    """
    _check_zd(d, *alice, *bob)
    if SimMode(mode) is SimMode.ABSTRACT:
        return (alice[0] + bob[0]) % d, (alice[1] + bob[1]) % d
    state = quditsim.two_sum_state(d, alice, bob)
    try:
        label = quditsim.deterministic_outcome(quditsim.measure_bell_basis(state))
    except quditsim.SimulationError as exc:
        raise ChannelError(f"2-sum measurement failed: {exc}") from exc
    return label.x, label.y


@dataclass
class CostLedger:
    """Qudit counts keyed by qudit dimension."""

    entries: dict[int, int] = field(default_factory=dict)

    def charge(self, dimension: int, count: int = 1) -> None:
        if count < 0:
            raise ChannelError("negative qudit charge")
        if dimension < 2:
            raise ChannelError(f"cannot charge qudits of dimension {dimension}")
        self.entries[dimension] = self.entries.get(dimension, 0) + count

    def merge(self, other: "CostLedger") -> "CostLedger":
        out = CostLedger(dict(self.entries))
        for dim, n in other.entries.items():
            out.charge(dim, n)
        return out

    @property
    def qudits(self) -> int:
        return sum(self.entries.values())

    def __bool__(self) -> bool:
        return any(self.entries.values())

    def dits(self, d: int) -> float:
        """Total size measured in d-dimensional units: sum(count * log_d(dim))."""
        return sum(n * math.log(dim) for dim, n in self.entries.items()) / math.log(d)

    def to_dict(self) -> dict:
        return {str(k): v for k, v in sorted(self.entries.items())}


def ledger_rate(ledger: CostLedger, L: int, d: int) -> float:
    """Computations per d-dimensional qudit: ``L / sum(count * log_d(dim))``."""
    if not ledger:
        raise ChannelError("rate of an empty ledger is undefined")
    if L < 1:
        raise ChannelError(f"L must be >= 1, got {L}")
    return L / ledger.dits(d)


@dataclass
class ChannelUse:
    index: int
    pair: tuple[int, int]
    d: int
    inputs: tuple[int, int]
    kind: str = "additive"
    output: int | None = None
    invocation: int | None = None
    padded: bool = False

    @property
    def y(self) -> int:
        if self.output is None:
            raise PendingOutputError(f"channel use {self.index} on pair {self.pair} is still queued")
        return self.output


class ChannelSession:
    """Sequence of channel uses sharing one cost ledger.

    In quantum mode additive uses are queued per ``(pair, d)`` and every two
    queued uses are realised by one simulated 2-sum invocation. Uses left
    unpaired at :meth:`close` raise :class:`UnpairedUseError` unless ``pad``
    is set, in which case each is completed with a zero partner and the
    session is flagged as diverging from the one-qudit-per-use accounting.
    """

    def __init__(self, mode: SimMode | str = SimMode.ABSTRACT, pad: bool = False):
        self.mode = SimMode(mode)
        self.pad = pad
        self.ledger = CostLedger()
        self.physical = CostLedger()
        self.transcript: list[ChannelUse] = []
        self.invocations = 0
        self.divergent = False
        self.closed = False
        self._pending: dict[tuple[tuple[int, int], int], ChannelUse] = {}

    def __enter__(self) -> "ChannelSession":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            self.close()

    def _record(self, use: ChannelUse) -> ChannelUse:
        if self.closed:
            raise ChannelError("session is closed")
        self.transcript.append(use)
        return use

    def use(self, pair: tuple[int, int], d: int, a: int, b: int) -> ChannelUse:
        if pair[0] == pair[1]:
            raise ChannelError(f"additive channel needs two distinct users, got {pair}")
        _check_zd(d, a, b)
        use = self._record(ChannelUse(len(self.transcript), tuple(pair), d, (a, b)))
        self.ledger.charge(d)
        if self.mode is SimMode.ABSTRACT:
            use.output = (a + b) % d
            return use
        key = (use.pair, d)
        first = self._pending.pop(key, None)
        if first is None:
            self._pending[key] = use
        else:
            self._realise(first, use)
        return use

    def _realise(self, first: ChannelUse, second: ChannelUse | None) -> None:
        d = first.d
        b_in = second.inputs if second is not None else (0, 0)
        x, y = run_two_sum(d, (first.inputs[0], b_in[0]), (first.inputs[1], b_in[1]), SimMode.QUANTUM)
        self.invocations += 1
        self.physical.charge(d, 2)
        first.output, first.invocation = x, self.invocations
        if second is not None:
            second.output, second.invocation = y, self.invocations

    def two_sum(self, pair: tuple[int, int], d: int, alice: tuple[int, int], bob: tuple[int, int]) -> tuple[ChannelUse, ChannelUse]:
        """One full 2-sum invocation: two uses realised together."""
        if pair[0] == pair[1]:
            raise ChannelError(f"2-sum needs two distinct users, got {pair}")
        _check_zd(d, *alice, *bob)
        u1 = self._record(ChannelUse(len(self.transcript), tuple(pair), d, (alice[0], bob[0]), kind="two-sum"))
        u2 = self._record(ChannelUse(len(self.transcript), tuple(pair), d, (alice[1], bob[1]), kind="two-sum"))
        self.ledger.charge(d, 2)
        if self.mode is SimMode.ABSTRACT:
            u1.output, u2.output = run_two_sum(d, alice, bob, SimMode.ABSTRACT)
        else:
            self._realise(u1, u2)
        return u1, u2

    def send(self, user: int, d: int, a: int) -> ChannelUse:
        """A single user's qudit sent on its own, carrying ``a``."""
        _check_zd(d, a)
        use = self._record(ChannelUse(len(self.transcript), (user, user), d, (a, 0), kind="direct", output=a))
        self.ledger.charge(d)
        if self.mode is SimMode.QUANTUM:
            self.physical.charge(d)
        return use

    @property
    def pending(self) -> list[ChannelUse]:
        return sorted(self._pending.values(), key=lambda u: u.index)

    def close(self) -> None:
        if self.closed:
            return
        leftovers = self.pending
        if leftovers and not self.pad:
            raise UnpairedUseError(
                f"{len(leftovers)} queued channel use(s) without a partner: "
                + ", ".join(f"#{u.index} pair {u.pair} d={u.d}" for u in leftovers)
            )
        for use in leftovers:
            self._realise(use, None)
            use.padded = True
            self.ledger.charge(use.d)
            self.divergent = True
        self._pending.clear()
        self.closed = True

    def outputs(self) -> list[int]:
        return [u.y for u in self.transcript]
