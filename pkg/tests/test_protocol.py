import numpy as np
import pytest
from conftest import build_table
from hypothesis import given
from hypothesis import strategies as st

from prpsim.config import KPolicy, ScenarioConfig
from prpsim.protocol import (BLOCKED, FLOOD, FORWARDED, PRP, UNSEEN, DiscoveryState,
                             NeighborEntry, NeighborhoodVector, NeighborTable, RreqPacket, Router, choose_k,
                             on_hello, select_forwarders)
from prpsim.radio import BROADCAST, received_power

CFG = ScenarioConfig(node_count=8)


def rssi_at(d_m):
    return float(received_power(CFG.tx_power_dbm, np.array([d_m]), CFG.frequency_mhz)[0])


def entries(nv):
    return [(e.neighbor, round(e.distance_m, 9)) for e in nv]


# -- neighbor tables ----------------------------------------------------------

def test_hello_into_empty_vector():
    table = NeighborTable(4, CFG)
    nv = on_hello(table, 0, 1, rssi_at(40.0), 0.0)
    assert entries(nv) == [(1, 40.0)]


def test_hello_keeps_descending_order():
    table = build_table(CFG, {0: {1: 90.0, 2: 30.0}})
    nv = on_hello(table, 0, 3, rssi_at(60.0), 0.5)
    assert entries(nv) == [(1, 90.0), (3, 60.0), (2, 30.0)]


def test_rehello_updates_in_place():
    table = build_table(CFG, {0: {1: 90.0, 2: 30.0}})
    nv = on_hello(table, 0, 2, rssi_at(95.0), 1.0)
    assert entries(nv) == [(2, 95.0), (1, 90.0)]
    assert nv[0].last_heard == 1.0


def test_first_contact_owes_reply():
    table = NeighborTable(3, CFG)
    recv, send = np.array([0, 0, 1]), np.array([1, 2, 0])
    p = np.full(3, rssi_at(50.0))
    assert table.record_hellos(recv, send, p, 0.0).tolist() == [0, 1]
    assert table.record_hellos(recv, send, p, 1.0).tolist() == []


def test_hello_above_tx_power_rejected():
    with pytest.raises(ValueError):
        on_hello(NeighborTable(2, CFG), 0, 1, CFG.tx_power_dbm + 1.0, 0.0)


def test_entries_expire_after_two_periods():
    table = build_table(CFG, {0: {1: 50.0}}, now=0.0)
    assert table.knows(0, 1, 2.0)
    assert not table.knows(0, 1, 2.0001)
    assert len(table.vector(0, 2.0001)) == 0


@given(st.lists(st.tuples(st.integers(0, 15), st.floats(0, 200)), max_size=60))
def test_vector_sorted_and_unique(updates):
    nv = NeighborhoodVector()
    for t, (node, d) in enumerate(updates):
        nv.update(node, d, float(t))
        dists = [e.distance_m for e in nv]
        assert dists == sorted(dists, reverse=True)
        assert len(nv.ids) == len(set(nv.ids))
    assert set(nv.ids) == {n for n, _ in updates}
    nv.expire(float(len(updates)), 2.0)
    assert all(len(updates) - e.last_heard <= 2.0 for e in nv)


# -- K and forwarder selection ----------------------------------------------------

def test_choose_k_fixed():
    assert choose_k(KPolicy.fixed(2), np.random.default_rng(0)) == 2


def test_choose_k_random_covers_range():
    rng = np.random.default_rng(0)
    counts = {}
    for _ in range(10_000):
        k = choose_k(KPolicy.random(3, 7), rng)
        counts[k] = counts.get(k, 0) + 1
    assert set(counts) == {3, 4, 5, 6, 7}
    assert min(counts.values()) > 1800


def test_choose_k_degenerate_interval():
    rng = np.random.default_rng(0)
    assert {choose_k(KPolicy.random(3, 3), rng) for _ in range(100)} == {3}


def vector(dists):
    return NeighborhoodVector(NeighborEntry(i, d, 0.0) for i, d in enumerate(dists))


def test_select_two_of_six():
    nv = vector([10, 20, 30, 40, 50, 60])
    assert select_forwarders(nv, 3) == ((5, 4), False)


def test_select_only_neighbor_unblocks():
    assert select_forwarders(vector([70]), 5) == ((0,), True)


def test_select_one_of_seven():
    assert select_forwarders(vector([1, 2, 3, 4, 5, 6, 7]), 7) == ((6,), False)


def test_select_fewer_than_k_takes_farthest():
    assert select_forwarders(vector([40, 80]), 3) == ((1,), True)


def test_select_rounds_up():
    # 7 eligible, K = 3: three farthest
    assert select_forwarders(vector([1, 2, 3, 4, 5, 6, 7]), 3) == ((6, 5, 4), False)


def test_select_skips_path_nodes():
    nv = vector([10, 20, 30, 40, 50, 60])
    assert select_forwarders(nv, 2, exclude={5, 3}) == ((4, 2), False)


def test_select_dead_end():
    assert select_forwarders(vector([10]), 3, exclude={0}) == ((), False)
    assert select_forwarders(NeighborhoodVector(), 3) == ((), False)


def test_select_fixed_one_takes_everyone():
    nv = vector([10, 20, 30])
    assert select_forwarders(nv, 1, exclude={1}) == ((2, 0), False)


@given(st.lists(st.floats(0, 100), max_size=40), st.integers(2, 9), st.sets(st.integers(0, 45)))
def test_selection_properties(dists, k, exclude):
    nv = vector(dists)
    chosen, unblock = select_forwarders(nv, k, exclude)
    eligible = [v for v in nv.ids if v not in exclude]
    assert set(chosen) <= set(nv.ids)
    assert not set(chosen) & exclude
    assert list(chosen) == eligible[: len(chosen)]
    assert bool(chosen) == bool(eligible)
    assert unblock == (0 < len(eligible) < k)


# -- route requests --------------------------------------------------------------

# 0 -- 1 -- 2 -- 5(target), and 0 -- 3, 0 -- 4
LINKS = {
    0: {1: 90.0, 3: 50.0, 4: 20.0},
    1: {0: 90.0, 2: 80.0},
    2: {1: 80.0, 5: 60.0},
    3: {0: 50.0},
    4: {0: 20.0},
    5: {2: 60.0},
}


def router(protocol=PRP, k=KPolicy.fixed(2), links=LINKS):
    cfg = CFG.replace(protocol=protocol, k_policy=k)
    return Router(protocol, cfg, build_table(cfg, links), np.random.default_rng(0))


def disc():
    return DiscoveryState(0, 5, 0, 0.0, CFG.node_count)


def one(node):
    return np.array([node], dtype=np.int32)


def test_chosen_node_knowing_target_unicasts():
    r, d = router(), disc()
    d.status[0] = FORWARDED
    rreq = r.build_rreq(d, (0, 1), (2,), False)
    frames = r.prp_on_rreq(2, rreq, d, 0.1)
    assert len(frames) == 1
    assert frames[0].dst == 5 and frames[0].src == 2
    assert frames[0].payload.path == (0, 1, 2)
    assert d.transmitted == [2]
    assert d.status[2] == FORWARDED


def test_unchosen_node_is_blocked():
    r, d = router(), disc()
    rreq = r.build_rreq(d, (0,), (1,), False)
    assert r.prp_on_rreq(3, rreq, d, 0.1) == []
    assert d.status[3] == BLOCKED
    assert d.received[3] == 1
    assert d.transmitted == []


def test_duplicate_chosen_node_is_silent():
    r, d = router(), disc()
    rreq = r.build_rreq(d, (0,), (1,), False)
    assert len(r.prp_on_rreq(1, rreq, d, 0.1)) == 1
    assert r.prp_on_rreq(1, rreq, d, 0.2) == []
    assert d.transmitted == [1]


def test_chosen_node_broadcasts_to_farthest_off_path():
    r, d = router(), disc()
    rreq = r.build_rreq(d, (0,), (1,), False)
    (frame,) = r.prp_on_rreq(1, rreq, d, 0.1)
    assert frame.dst == BROADCAST
    pkt = frame.payload
    assert pkt.path == (0, 1)
    # only eligible neighbor is 2 (0 is on the path): m = 1 < K
    assert pkt.forwarders == (2,) and pkt.unblock
    assert d.k_used[1] == 2


def test_blocked_node_stays_blocked_without_unblock():
    r, d = router(), disc()
    r.prp_on_rreq(2, r.build_rreq(d, (0,), (1,), False), d, 0.1)
    assert d.status[2] == BLOCKED
    assert r.prp_on_rreq(2, r.build_rreq(d, (0, 1), (2, 6), False), d, 0.2) == []
    assert d.status[2] == BLOCKED


def test_unblock_releases_blocked_node():
    r, d = router(), disc()
    r.prp_on_rreq(2, r.build_rreq(d, (0,), (1,), False), d, 0.1)
    frames = r.prp_on_rreq(2, r.build_rreq(d, (0, 1), (2,), True), d, 0.2)
    assert len(frames) == 1 and frames[0].dst == 5
    assert d.status[2] == FORWARDED


def test_target_replies_once():
    r, d = router(), disc()
    rreq = r.build_rreq(d, (0, 1, 2), (5,), False)
    (frame,) = r.prp_on_rreq(5, rreq, d, 0.3)
    assert frame.payload.frame_type == "RREP"
    assert frame.src == 5 and frame.dst == 2
    assert frame.payload.path == (0, 1, 2, 5)
    assert r.prp_on_rreq(5, rreq, d, 0.4) == []
    assert 5 not in d.transmitted


def test_malformed_path_dropped():
    r, d = router(), disc()
    rreq = r.build_rreq(d, (0, 1, 0), (2,), False)
    assert r.prp_on_rreq(2, rreq, d, 0.1) == []
    assert r.diagnostics["malformed_rreq"] == 1
    assert d.status[2] == UNSEEN


def test_dead_end_counted():
    r, d = router(), disc()
    rreq = r.build_rreq(d, (0,), (3,), False)
    assert r.prp_on_rreq(3, rreq, d, 0.1) == []
    assert r.diagnostics["dead_end"] == 1 and d.dead_ends == 1
    assert d.transmitted == []


def test_batched_delivery_matches_single():
    r1, d1 = router(), disc()
    r2, d2 = router(), disc()
    rreq = r1.build_rreq(d1, (0,), (1,), False)
    batch = r1.on_rreq(np.array([1, 3, 4], dtype=np.int32), rreq, d1, 0.1)
    single = []
    for v in (1, 3, 4):
        single += r2.prp_on_rreq(v, rreq, d2, 0.1)
    assert [(f.src, f.dst) for f in batch] == [(f.src, f.dst) for f in single]
    assert d1.status == d2.status and d1.received == d2.received


def test_handoff_can_be_disabled():
    cfg = CFG.replace(k_policy=KPolicy.fixed(2))
    r = Router(PRP, cfg, build_table(cfg, LINKS), np.random.default_rng(0), target_handoff=False)
    d = disc()
    frames = r.prp_on_rreq(2, r.build_rreq(d, (0, 1), (2,), False), d, 0.1)
    assert frames[0].dst == BROADCAST and frames[0].payload.forwarders == (5,)


def test_flood_first_reception_rebroadcasts():
    r, d = router(FLOOD), disc()
    rreq = r.build_rreq(d, (0,), None, False)
    (frame,) = r.flood_on_rreq(3, rreq, d, 0.1)
    assert frame.dst == BROADCAST and frame.payload.path == (0, 3)
    assert frame.payload.forwarders is None


def test_flood_second_reception_silent():
    r, d = router(FLOOD), disc()
    rreq = r.build_rreq(d, (0,), None, False)
    r.flood_on_rreq(3, rreq, d, 0.1)
    assert r.flood_on_rreq(3, rreq, d, 0.2) == []


def test_flood_target_replies_without_rebroadcast():
    r, d = router(FLOOD), disc()
    (frame,) = r.flood_on_rreq(5, r.build_rreq(d, (0, 1, 2), None, False), d, 0.1)
    assert frame.payload.frame_type == "RREP" and frame.dst == 2
    assert d.transmitted == []


def test_flood_ignores_unicast_shortcut():
    r, d = router(FLOOD), disc()
    (frame,) = r.flood_on_rreq(2, r.build_rreq(d, (0, 1), None, False), d, 0.1)
    assert frame.dst == BROADCAST


def test_wrong_protocol_wrapper():
    r, d = router(FLOOD), disc()
    with pytest.raises(RuntimeError):
        r.prp_on_rreq(1, r.build_rreq(d, (0,), None, False), d, 0.0)


# -- discovery start and replies ------------------------------------------------

def test_start_direct_neighbor():
    r = router()
    d = DiscoveryState(2, 5, 0, 1.0, CFG.node_count)
    assert r.start_discovery(d, 1.0) == ("direct", [])
    assert d.transmitted == []


def test_start_isolated():
    r = router()
    d = DiscoveryState(6, 5, 0, 1.0, CFG.node_count)
    assert r.start_discovery(d, 1.0) == ("isolated", [])


def test_start_sends_one_broadcast():
    r = router()
    d = disc()
    outcome, frames = r.start_discovery(d, 1.0)
    assert outcome == "sent"
    assert len(frames) == 1 and frames[0].src == 0 and frames[0].dst == BROADCAST
    # three neighbors, K = 2: the two farthest
    assert frames[0].payload.forwarders == (1, 3)
    assert d.transmitted == [0] and d.received[0] == 1


def test_start_same_endpoints_rejected():
    with pytest.raises(ValueError):
        router().start_discovery(DiscoveryState(1, 1, 0, 0.0, CFG.node_count), 0.0)


def rrep_frames(r, d):
    return r.prp_on_rreq(5, r.build_rreq(d, (0, 1, 2), (5,), False), d, 0.2)


def test_rrep_relayed_hop_by_hop():
    r, d = router(), disc()
    rrep = rrep_frames(r, d)[0].payload
    (hop,) = r.on_rrep(2, rrep, d, 0.3)
    assert (hop.src, hop.dst) == (2, 1)
    (hop,) = r.on_rrep(1, rrep, d, 0.4)
    assert (hop.src, hop.dst) == (1, 0)


def test_first_rrep_wins():
    r, d = router(), disc()
    d.start = 0.1
    rrep = rrep_frames(r, d)[0].payload
    assert r.on_rrep(0, rrep, d, 0.5) == []
    assert d.succeeded and d.path == (0, 1, 2, 5)
    assert d.end - d.start == pytest.approx(0.4)
    other = type(rrep)(0, 5, 0, (0, 3, 2, 5))
    r.on_rrep(0, other, d, 0.7)
    assert d.path == (0, 1, 2, 5) and d.end == 0.5


def test_rrep_after_timeout_ignored():
    r, d = router(), disc()
    rrep = rrep_frames(r, d)[0].payload
    d.finished = True  # timeout fired
    r.on_rrep(0, rrep, d, 0.9)
    assert not d.succeeded and d.end is None


def test_rrep_for_unknown_discovery():
    r, d = router(), disc()
    rrep = rrep_frames(r, d)[0].payload
    assert r.on_rrep(0, rrep, None, 0.5) == []
    assert r.diagnostics["unknown_rrep"] == 1


def test_rreq_packet_fields():
    r, d = router(), disc()
    pkt = r.build_rreq(d, (0,), (1, 3), False)
    assert isinstance(pkt, RreqPacket)
    assert (pkt.origin, pkt.target, pkt.seq) == (0, 5, 0)
    assert list(pkt.mask) == [0, 1, 0, 1, 0, 0, 0, 0]
