import numpy as np
import pytest

from netreserve.errors import StructureError
from netreserve.network import Path, Reservation, Topology, check_feasible

from toys import bottleneck_topology, diamond_topology, line_topology, three_ap_topology


def test_line_index_arrays():
    topo = line_topology()
    assert topo.capacities.tolist() == [10.0, 10.0]
    assert topo.budgets.tolist() == [5.0]
    assert [lks.tolist() for lks in topo.path_links] == [[0, 1]]
    assert topo.path_downlink.tolist() == [0]
    assert topo.downlink_ap.tolist() == [0]


def test_diamond_paths_share_nothing():
    topo = diamond_topology()
    links0 = set(topo.path_links[0].tolist())
    links1 = set(topo.path_links[1].tolist())
    assert not links0 & links1
    assert topo.user_path_count.tolist() == [2]


def test_link_loads_sum_paths():
    topo = bottleneck_topology(shared_cap=2.0)
    rates = np.array([0.7, 0.9])
    loads = topo.link_loads(rates)
    # link 0 is the shared data-center egress
    assert abs(loads[0] - 1.6) < 1e-15


def test_ap_loads_and_downlink_rates():
    topo = three_ap_topology()
    t = np.arange(1.0, 1.0 + topo.n_downlinks)
    loads = topo.ap_loads(t)
    assert abs(loads.sum() - t.sum()) < 1e-12
    r = np.arange(0.5, 0.5 + topo.n_paths)
    dl = topo.downlink_rates(r)
    assert dl.shape == (topo.n_downlinks,)
    assert abs(dl.sum() - r.sum()) < 1e-12


def test_rate_vector_rejects_unknown_path():
    topo = line_topology()
    with pytest.raises(StructureError):
        topo.rate_vector(Reservation(r={99: 1.0}, t={}))


def test_resource_vector_rejects_unknown_downlink():
    topo = line_topology()
    with pytest.raises(StructureError):
        topo.resource_vector(Reservation(r={}, t={99: 1.0}))


def test_validation_rejects_disconnected_path():
    topo = line_topology()
    backwards = [Path(id=p.id, user=p.user, links=tuple(reversed(p.links)),
                      downlink=p.downlink) for p in topo.paths]
    with pytest.raises(StructureError):
        Topology(topo.nodes, topo.links, topo.aps, topo.users, backwards,
                 topo.downlinks)


def test_restrict_paths_keeps_users_served():
    topo = diamond_topology()
    kept = topo.restrict_paths([0])
    assert kept.n_paths == 1
    with pytest.raises(StructureError):
        topo.restrict_paths([])


def test_feasible_on_boundary():
    # one user, two unit flows into a shared 2.0 link: exactly tight is fine
    topo = bottleneck_topology(shared_cap=2.0)
    res = Reservation(r={0: 1.0, 1: 1.0}, t={0: 0.5, 1: 0.5})
    report = check_feasible(topo, res)
    assert report.ok
    assert abs(report.link_slack[0]) < 1e-15


def test_infeasible_reports_violation_amount():
    topo = bottleneck_topology(shared_cap=2.0)
    res = Reservation(r={0: 1.1, 1: 1.1}, t={0: 0.5, 1: 0.5})
    report = check_feasible(topo, res)
    assert not report.ok
    amounts = [amount for kind, _, amount in report.violations if kind == "link"]
    assert any(abs(a - 0.2) < 1e-12 for a in amounts)


def test_negative_rate_is_flagged():
    topo = line_topology()
    report = check_feasible(topo, Reservation(r={0: -0.01}, t={0: 1.0}))
    assert not report.ok
    assert ("path", 0, 0.01) in report.violations


def test_json_round_trip_is_byte_stable(tmp_path):
    from netreserve.network import load_topology, save_topology

    topo = three_ap_topology()
    first = tmp_path / "a.json"
    second = tmp_path / "b.json"
    save_topology(topo, first)
    save_topology(load_topology(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_with_budgets_and_capacity_scale():
    topo = three_ap_topology(budgets=(2.0, 2.0, 2.0))
    bumped = topo.with_budgets(7.0)
    assert bumped.budgets.tolist() == [7.0, 7.0, 7.0]
    halved = topo.with_capacity_scale(0.5)
    assert np.allclose(halved.capacities, 0.5 * topo.capacities)
    # original untouched
    assert topo.budgets.tolist() == [2.0, 2.0, 2.0]
