import numpy as np
import pytest

from qmacsec.channel import (
    ChannelError,
    ChannelSession,
    CostLedger,
    PendingOutputError,
    SimMode,
    UnpairedUseError,
    ledger_rate,
    run_two_sum,
)


@pytest.mark.parametrize("mode", list(SimMode))
def test_two_sum_examples(mode):
    assert run_two_sum(3, (1, 2), (2, 2), mode) == (0, 1)
    assert run_two_sum(2, (0, 0), (0, 0), mode) == (0, 0)
    assert run_two_sum(5, (4, 3), (2, 2), mode) == (1, 0)


def test_two_sum_rejects_out_of_range():
    with pytest.raises(ChannelError):
        run_two_sum(3, (3, 0), (0, 0))


@pytest.mark.parametrize("mode", list(SimMode))
def test_additive_use_examples(mode):
    s = ChannelSession(mode)
    u1 = s.use((1, 2), 4, 3, 2)
    u2 = s.use((1, 2), 4, 0, 0)
    u3 = s.use((1, 2), 11, 6, 8)
    u4 = s.use((1, 2), 11, 0, 0)
    s.close()
    assert (u1.y, u2.y, u3.y, u4.y) == (1, 0, 3, 0)


def test_two_uses_realised_by_one_two_sum():
    s = ChannelSession(SimMode.QUANTUM)
    u1 = s.use((1, 2), 3, 1, 2)
    with pytest.raises(PendingOutputError):
        u1.y
    u2 = s.use((1, 2), 3, 2, 2)
    assert (u1.y, u2.y) == (0, 1) == run_two_sum(3, (1, 2), (2, 2))
    assert s.invocations == 1 and u1.invocation == u2.invocation
    s.close()
    assert s.physical.to_dict() == {"3": 2} and s.ledger.to_dict() == {"3": 2}


def test_pairing_is_per_pair_and_dimension():
    s = ChannelSession(SimMode.QUANTUM)
    s.use((1, 2), 3, 1, 1)
    s.use((2, 3), 3, 1, 1)
    s.use((1, 2), 5, 1, 1)
    assert len(s.pending) == 3
    with pytest.raises(UnpairedUseError):
        s.close()


def test_padding_charges_and_flags():
    s = ChannelSession(SimMode.QUANTUM, pad=True)
    u = s.use((1, 2), 3, 2, 2)
    s.close()
    assert u.y == 1 and u.padded and s.divergent
    assert s.ledger.to_dict() == {"3": 2}
    assert s.physical.to_dict() == {"3": 2}


def test_abstract_never_pends():
    s = ChannelSession(SimMode.ABSTRACT)
    u = s.use((1, 3), 7, 5, 4)
    assert u.y == 2
    s.close()
    assert not s.divergent


def test_direct_send_and_closed_session():
    for mode in SimMode:
        with ChannelSession(mode) as s:
            u = s.send(1, 4, 3)
        assert u.y == 3 and s.ledger.to_dict() == {"4": 1}
        with pytest.raises(ChannelError):
            s.use((1, 2), 4, 0, 0)


def test_same_user_pair_rejected():
    with pytest.raises(ChannelError):
        ChannelSession().use((2, 2), 3, 0, 0)


def test_ledger_rate_examples():
    assert ledger_rate(CostLedger({3: 5}), 2, 3) == pytest.approx(2 / 5, abs=1e-15)
    assert ledger_rate(CostLedger({2: 2}), 1, 2) == 0.5
    assert ledger_rate(CostLedger({3: 2}), 1, 2) == pytest.approx(1 / (2 * np.log2(3)), abs=1e-15)
    assert ledger_rate(CostLedger({3: 1}), 1, 2) == pytest.approx(1 / np.log2(3), abs=1e-15)
    for K in range(2, 9):
        assert ledger_rate(CostLedger({5: K}), 2, 5) == pytest.approx(2 / K, abs=1e-15)


def test_ledger_merge_and_dits():
    a, b = CostLedger({2: 1}), CostLedger({2: 2, 3: 1})
    m = a.merge(b)
    assert m.entries == {2: 3, 3: 1} and m.qudits == 4
    assert m.dits(2) == pytest.approx(3 + np.log2(3))
    assert a.entries == {2: 1}


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_mode_equivalence_random(d):
    rng = np.random.default_rng(100 + d)
    q, a = ChannelSession(SimMode.QUANTUM, pad=True), ChannelSession(SimMode.ABSTRACT)
    pairs = [(1, 2), (2, 3), (1, 3)]
    for _ in range(2000):
        pr = pairs[rng.integers(3)]
        x, y = (int(v) for v in rng.integers(0, d, 2))
        q.use(pr, d, x, y)
        a.use(pr, d, x, y)
    q.close()
    a.close()
    assert q.outputs() == a.outputs()
    # ledger additivity: one per use plus one per padded use
    assert q.ledger.qudits == 2000 + sum(u.padded for u in q.transcript)
    assert a.ledger.qudits == 2000


def test_replay_reproduces_transcript():
    def session(seed):
        rng = np.random.default_rng(seed)
        s = ChannelSession(SimMode.QUANTUM, pad=True)
        for _ in range(50):
            s.use((1, 2), 4, *(int(v) for v in rng.integers(0, 4, 2)))
        s.close()
        return [(u.inputs, u.y, u.invocation) for u in s.transcript]

    assert session(3) == session(3)
