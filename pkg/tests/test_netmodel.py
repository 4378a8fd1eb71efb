import json

import pytest

from kcast.adversary import ScriptedStrategy, Strategy
from kcast.netmodel import (
    AuthenticationError,
    Cast,
    CastError,
    Config,
    Engine,
    Inbox,
    Transcript,
    check_cast,
    deliver_cast,
)
from kcast.protocol import PartyState, broadcast, build_schedule


def inboxes(n):
    return {p: Inbox() for p in range(n)}


def test_deliver_reaches_exactly_the_recipients():
    boxes = inboxes(4)
    deliver_cast(Cast(0, 0, (1, 2), (1,)), boxes, n=4, width=2)
    for p in (1, 2):
        assert boxes[p].log == [Cast(0, 0, (1, 2), (1,))]
        assert boxes[p].get(0, 0, (2, 1)) == (1,)
    assert boxes[0].log == [] and boxes[3].log == []


@pytest.mark.parametrize(
    "recipients",
    [(1,), (1, 1), (0, 1), (1, 7)],
    ids=["too-few", "duplicate", "includes-sender", "unknown-party"],
)
def test_malformed_recipient_sets_rejected(recipients):
    with pytest.raises(CastError):
        deliver_cast(Cast(0, 0, recipients, (1,)), inboxes(4), n=4, width=2)


def test_first_cast_per_slot_wins():
    box = Inbox()
    box.add(Cast(0, 3, (1, 2), (0,)))
    box.add(Cast(0, 3, (1, 2), (1,)))
    assert box.get(0, 3, (1, 2)) == (0,)
    assert len(box.log) == 2


def test_config_invariants():
    assert Config.top(2, 3, 2) == Config(n=5, k=2, h=3, f=2, d=0)
    assert Config.top(2, 3, 2).shrink() == Config(n=4, k=2, h=3, f=2, d=1)
    with pytest.raises(ValueError):
        Config(n=5, k=2, h=3, f=2, d=1)
    with pytest.raises(ValueError):
        Config.top(0, 3, 1)
    with pytest.raises(ValueError):
        Config.top(1, 1, 1)


def _engine(k, h, f, value, strategy=None):
    schedule = build_schedule(Config.top(k, h, f))
    parties = {p: PartyState(p, schedule, value if p == 0 else None) for p in range(h + f)}
    if strategy is not None:
        strategy.bind(schedule)
    return schedule, parties, Engine(parties, k, strategy)


def test_no_faults_emits_prescribed_casts():
    schedule, parties, engine = _engine(2, 3, 1, (1,))
    sent = engine.run_round(0)
    assert sent == [Cast(0, 0, t, (1,)) for t in schedule.root.cast_sets]


def test_replaced_payload_seen_only_by_its_recipients():
    # party 0 (sender) is faulty and flips the value on the k-set (1, 2) only
    strategy = ScriptedStrategy({0}, {(0, 0, (1, 2)): (0,)})
    schedule, parties, engine = _engine(2, 3, 1, (1,), strategy)
    engine.run_round(0)
    assert parties[1].inbox.get(0, 0, (1, 2)) == (0,)
    assert parties[2].inbox.get(0, 0, (1, 2)) == (0,)
    assert parties[1].inbox.get(0, 0, (1, 3)) == (1,)
    assert parties[3].inbox.get(0, 0, (1, 3)) == (1,)


def test_omitted_cast_reads_as_zeros():
    strategy = ScriptedStrategy({0}, {(0, 0, (1, 2)): None})
    schedule, parties, engine = _engine(2, 3, 1, (1,), strategy)
    engine.run_round(0)
    assert parties[1].inbox.get(0, 0, (1, 2)) is None
    report = parties[1].report(schedule.root)
    assert report.as_dict() == {(1, 2): (0,), (1, 3): (1,)}


class Forger(Strategy):
    def act(self, round_no, proposed):
        return [Cast(round_no, 1, (0, 2), (1,))]


def test_forging_a_compliant_sender_aborts():
    with pytest.raises(AuthenticationError):
        broadcast(2, 3, 1, (0,), Forger({3}))


def test_deliveries_are_consumed_only_in_later_rounds():
    schedule, parties, engine = _engine(1, 3, 1, (1,))
    # child instance of recipient 1 speaks after the root round it reports on
    child = schedule.root.children[1]
    assert child.round > schedule.root.round
    for r in range(len(schedule.rounds)):
        before = {p: list(st.emit(r)) for p, st in parties.items()}
        engine.run_round(r)
        # re-emitting after round r's deliveries does not change round r's casts
        after = {p: list(st.emit(r)) for p, st in parties.items()}
        assert before == after


def test_transcript_jsonl_is_stable():
    t = Transcript()
    t.cast(Cast(2, 0, (3, 1), (1, 0)))
    t.output(1, "recipient", (1,))
    t.verdict({"agreement": True})
    lines = t.to_jsonl().splitlines()
    assert lines[0] == '{"kind":"cast","round":2,"sender":0,"recipients":[1,3],"payload":"10"}'
    assert lines[1] == '{"kind":"output","party":1,"role":"recipient","value":"1"}'
    assert json.loads(lines[2]) == {"kind": "verdict", "agreement": True}


def test_transcript_events_are_ordered():
    res = broadcast(1, 3, 1, (1,))
    keys = [(e["round"], e["sender"], e["recipients"]) for e in res.transcript.casts()]
    assert keys == sorted(keys)


def test_check_cast_width():
    check_cast(Cast(0, 0, (1,), (1,)), n=2, width=1)
    with pytest.raises(CastError):
        check_cast(Cast(0, 0, (1, 2), (2,)), n=3, width=2)
