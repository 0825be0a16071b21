import pytest

from pbtsim.credit import credit
from pbtsim.errors import ConfigError, ParseError
from pbtsim.workload import (
    LinkChangeFile,
    LinkChangeRecord,
    LinkRecord,
    SnapshotFile,
    TransactionFile,
    TransactionRecord,
    build_graph,
    format_report,
    generate_synthetic,
    parse_link_changes,
    parse_snapshot,
    parse_transactions,
    preprocess,
    serialize_link_changes,
    serialize_snapshot,
    serialize_transactions,
)

SNAP = "u,v,weight\n0,1,10\n1,0,2.5\n2,3,0.000001\n"
TXS = "time,value,src,dst\n0,1.5,0,1\n10,2,1,3\n10,3,2,2\n"
CHANGES = "time,u,v,new_weight\n5,0,1,0\n7,4,4,3\n"


def test_snapshot_round_trip():
    f = parse_snapshot(SNAP)
    assert f.records[1] == LinkRecord(1, 0, 2_500_000)
    assert serialize_snapshot(f) == SNAP
    assert parse_snapshot(serialize_snapshot(f)) == f


def test_snapshot_with_limit_column():
    text = "u,v,weight,limit\n0,1,5,10\n"
    f = parse_snapshot(text)
    assert f.has_limit and f.records[0].limit == credit(10)
    assert serialize_snapshot(f) == text


def test_transactions_round_trip():
    f = parse_transactions(TXS)
    assert f.records[0] == TransactionRecord(0, 1_500_000, 0, 1)
    assert serialize_transactions(f) == TXS
    assert parse_transactions(serialize_transactions(f)) == f


def test_link_changes_round_trip():
    f = parse_link_changes(CHANGES)
    assert f.records[0] == LinkChangeRecord(5_000_000, 0, 1, 0)
    assert serialize_link_changes(f) == CHANGES
    assert parse_link_changes(serialize_link_changes(f)) == f


@pytest.mark.parametrize("text,error_line", [
    ("u,v\n", 1),
    ("u,v,weight\n0,1\n", 2),
    ("u,v,weight\n0,x,1\n", 2),
    ("u,v,weight\n0,1,1.1234567\n", 2),
    ("u,v,weight\n0,1,-1\n", 2),
])
def test_snapshot_parse_errors_carry_line(text, error_line):
    with pytest.raises(ParseError) as err:
        parse_snapshot(text)
    assert err.value.line == error_line


def test_event_files_require_nondecreasing_time():
    with pytest.raises(ParseError):
        parse_transactions("time,value,src,dst\n5,1,0,1\n4,1,1,0\n")
    with pytest.raises(ParseError):
        parse_link_changes("time,u,v,new_weight\n5,0,1,1\n4,0,1,2\n")


def test_build_graph_skips_zero_and_self_rows():
    g = build_graph(parse_snapshot("u,v,weight\n0,1,5\n2,3,0\n4,4,7\n"))
    assert g.weight(0, 1) == credit(5)
    assert g.link_count() == 1
    assert {0, 1, 2, 3, 4} <= g.nodes


# ---- preprocessing ------------------------------------------------------------------


def full_fixture():
    snapshot = SnapshotFile(
        records=[
            LinkRecord(0, 1, credit(5), credit(10)),
            LinkRecord(1, 0, credit(5), credit(10)),
            LinkRecord(1, 2, credit(3), credit(10)),
            LinkRecord(2, 9, credit(20), credit(4)),  # invalid: weight > limit
            LinkRecord(3, 3, credit(1), credit(10)),  # self link
            LinkRecord(5, 6, credit(2), credit(10)),  # small component
            LinkRecord(7, 8, 0, credit(10)),          # zero-weight placeholder
        ],
        has_limit=True,
    )
    txs = TransactionFile([
        TransactionRecord(0, credit(1), 0, 2),
        TransactionRecord(1, credit(1), 4, 4),   # self transaction
        TransactionRecord(2, credit(1), 5, 6),   # outside the giant component
        TransactionRecord(3, credit(1), 0, 1),
    ])
    changes = LinkChangeFile([
        LinkChangeRecord(0, 0, 1, credit(9)),
        LinkChangeRecord(1, 5, 6, 0),            # outside
        LinkChangeRecord(2, 4, 4, credit(2)),    # self entry
    ])
    return snapshot, txs, changes


def test_preprocess_applies_all_rules():
    result = preprocess(*full_fixture())
    r = result.report
    assert r["invalid_links_removed"] == 2          # over-limit + self link
    assert r["self_transactions_removed"] == 1
    assert r["self_link_changes_removed"] == 1
    assert r["nongiant_nodes_removed"] == 4         # {5, 6, 7, 8}
    assert r["zero_links_removed"] == 0             # 7-8 already dropped as non-giant
    assert r["nodes_kept"] == 3
    assert r["links_kept"] == 3
    assert r["transactions_kept"] == 2
    assert r["link_changes_kept"] == 1
    kept_nodes = {x for rec in result.snapshot.records for x in (rec.u, rec.v)}
    assert kept_nodes == {0, 1, 2}


def test_preprocess_zero_rows_in_giant_are_counted():
    snapshot = SnapshotFile([
        LinkRecord(0, 1, credit(5)),
        LinkRecord(1, 0, 0),  # placeholder inside the giant component
    ])
    result = preprocess(snapshot, TransactionFile([]), LinkChangeFile([]))
    assert result.report["zero_links_removed"] == 1
    assert result.report["links_kept"] == 1


def test_preprocess_idempotent():
    first = preprocess(*full_fixture())
    second = preprocess(first.snapshot, first.transactions, first.link_changes)
    assert second.snapshot == first.snapshot
    assert second.transactions == first.transactions
    assert second.link_changes == first.link_changes
    removal_keys = [k for k in second.report if k.endswith("_removed")]
    assert all(second.report[k] == 0 for k in removal_keys)


def test_format_report_key_value_block():
    text = format_report({"a": 1, "b": 2})
    assert text == "a=1\nb=2\n"


# ---- synthetic generation --------------------------------------------------------------


def test_generate_minimal_pair():
    snap, _ = generate_synthetic(2, tx_count=0, seed=1)
    assert len(snap.records) == 2  # one bidirectional pair
    assert {(r.u, r.v) for r in snap.records} == {(0, 1), (1, 0)}


def test_generate_deterministic():
    a = generate_synthetic(50, tx_count=100, seed=9)
    b = generate_synthetic(50, tx_count=100, seed=9)
    assert serialize_snapshot(a[0]) == serialize_snapshot(b[0])
    assert serialize_transactions(a[1]) == serialize_transactions(b[1])


def test_generate_connected_for_default_params():
    for n in (10, 37, 120):
        snap, _ = generate_synthetic(n, seed=n)
        g = build_graph(snap)
        assert len(g.giant_component().nodes) == n


def test_generate_rejects_bad_params():
    with pytest.raises(ConfigError):
        generate_synthetic(1)
    with pytest.raises(ConfigError):
        generate_synthetic(10, model="mesh")
    with pytest.raises(ConfigError):
        generate_synthetic(10, weight_range=(0, 5))
    with pytest.raises(ConfigError):
        generate_synthetic(10, unidirectional_fraction=1.5)


def test_scale_free_tail_heavier_than_small_world():
    """Top-decile degree mass comparison at n=1000."""
    def top_decile_mass(snap, n):
        from collections import Counter
        deg = Counter()
        for r in snap.records:
            deg[r.u] += 1
        degrees = sorted((deg[v] for v in range(n)), reverse=True)
        top = sum(degrees[: n // 10])
        return top / sum(degrees)

    sf, _ = generate_synthetic(1000, model="scale-free", seed=3)
    sw, _ = generate_synthetic(1000, model="small-world", seed=3)
    assert top_decile_mass(sf, 1000) > top_decile_mass(sw, 1000) + 0.1


def test_unidirectional_fraction_produces_single_direction_rows():
    snap, _ = generate_synthetic(200, seed=4, unidirectional_fraction=0.5)
    directed = {(r.u, r.v) for r in snap.records}
    one_way = sum(1 for (u, v) in directed if (v, u) not in directed)
    assert one_way > 0


def test_transactions_have_distinct_endpoints_and_times():
    _, txs = generate_synthetic(50, tx_count=200, seed=5)
    assert len(txs.records) == 200
    assert all(t.src != t.dst for t in txs.records)
    times = [t.time for t in txs.records]
    assert times == sorted(times)
