"""Deterministic topology and user generator.

Builds a metro-style instance: one data center feeding three gateway routers,
a router ring with cross chords, and access points hanging off the routers in
short daisy chains.  Users are dropped uniformly in the AP plane and associate
with the strongest access points under a log-distance path-loss model.

All randomness flows through one seeded generator in a fixed draw order, so a
given (params, seed) pair always produces byte-identical topology files.
"""

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import StructureError
from .network import AccessPoint, Downlink, Link, Node, Path, Topology, User

# capacity tiers, Mnats/s: data-center feed, router ring/chord, then the AP
# chain by hop count from the router
TIER_FEED = 4000.0
TIER_RING = 2000.0
TIER_CHAIN = (2000.0, 400.0, 320.0, 160.0)


@dataclass(frozen=True)
class TopologyParams:
    seed: int = 0
    n_users: int = 200
    n_aps: int = 57
    n_routers: int = 11
    n_gateways: int = 3
    area: float = 3000.0
    ap_budget: float = 40.0
    paths_per_user: int = 3
    max_chain: int = 4
    capacity_scale: float = 1.0
    theta: float = 1.0
    # radio constants calibrated so mean SNRs land in roughly 0..22 dB over
    # the distances the grids produce; the floor keeps a user sitting on top
    # of an AP from getting an unbounded link
    tx_power_dbm: float = 32.0
    noise_dbm: float = -104.0
    path_loss_exp: float = 3.5
    path_loss_ref_db: float = 38.0
    min_distance: float = 150.0


def desk_params(seed=0, **overrides):
    """Small instance for sweeps and tests: 12 APs, 4 routers, 40 users.

    The plane shrinks with the AP count so the per-user SNR spread stays in
    the same few-to-twenty dB band as the full-size layout.
    """
    base = dict(seed=seed, n_users=40, n_aps=12, n_routers=4, ap_budget=20.0,
                area=1200.0)
    base.update(overrides)
    return TopologyParams(**base)


def path_loss_db(dist, params):
    d = np.maximum(np.asarray(dist, dtype=float), params.min_distance)
    return params.path_loss_ref_db + 10.0 * params.path_loss_exp * np.log10(d)


def mean_snr_linear(dist, params):
    snr_db = params.tx_power_dbm - path_loss_db(dist, params) + (-params.noise_dbm)
    return 10.0 ** (snr_db / 10.0)


def _ap_positions(params, rng):
    side = math.ceil(math.sqrt(params.n_aps))
    cell = params.area / side
    jitter = rng.uniform(-0.25, 0.25, size=(params.n_aps, 2)) * cell
    pos = np.empty((params.n_aps, 2))
    for i in range(params.n_aps):
        row, col = divmod(i, side)
        pos[i] = ((col + 0.5) * cell, (row + 0.5) * cell)
    return pos + jitter


def _kmeans(points, k, iters=100):
    # deterministic Lloyd iterations seeded from evenly spread points
    idx = np.linspace(0, len(points) - 1, k).round().astype(int)
    centroids = points[idx].copy()
    assign = np.full(len(points), -1)
    for _ in range(iters):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        for j in range(k):
            members = points[new_assign == j]
            if len(members) == 0:
                # move an empty centroid onto the farthest point
                far = d2.min(axis=1).argmax()
                centroids[j] = points[far]
                new_assign[far] = j
            else:
                centroids[j] = members.mean(axis=0)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return centroids, assign


def _bfs_route(out_links, dist_to_target, start, target):
    """Min-hop walk choosing the smallest link id at every step."""
    if dist_to_target.get(start) is None:
        raise StructureError(f"node {target} unreachable from {start}")
    route = []
    cur = start
    while cur != target:
        step = None
        for lid, dst in out_links[cur]:
            if dist_to_target.get(dst) == dist_to_target[cur] - 1:
                step = (lid, dst)
                break
        if step is None:
            raise StructureError("inconsistent shortest-path structure")
        route.append(step[0])
        cur = step[1]
    return tuple(route)


def generate_topology(params):
    if params.max_chain > len(TIER_CHAIN):
        raise StructureError(f"chains longer than {len(TIER_CHAIN)} unsupported")
    rng = np.random.default_rng(params.seed)
    center = np.array([params.area / 2.0, params.area / 2.0])

    ap_pos = _ap_positions(params, rng)
    user_pos = rng.uniform(0.0, params.area, size=(params.n_users, 2))
    demand_offsets = rng.standard_normal(params.n_users)

    centroids, assign = _kmeans(ap_pos, params.n_routers)
    gw_angles = np.deg2rad(90.0 + 360.0 * np.arange(params.n_gateways)
                           / params.n_gateways)
    gw_pos = center + 0.40 * params.area * np.column_stack(
        [np.cos(gw_angles), np.sin(gw_angles)]
    )

    nodes = [Node(0, "data-center", *center)]
    gw_ids = list(range(1, 1 + params.n_gateways))
    for i, gid in enumerate(gw_ids):
        nodes.append(Node(gid, "gateway", *gw_pos[i]))
    router_ids = list(range(1 + params.n_gateways,
                            1 + params.n_gateways + params.n_routers))
    for i, rid in enumerate(router_ids):
        nodes.append(Node(rid, "router", *centroids[i]))
    ap_base = 1 + params.n_gateways + params.n_routers
    ap_ids = list(range(ap_base, ap_base + params.n_aps))
    for i, aid in enumerate(ap_ids):
        nodes.append(Node(aid, "access-point", *ap_pos[i]))

    edges = []  # (src, dst, capacity), expanded to two directed links each
    for gid in gw_ids:
        edges.append((0, gid, TIER_FEED))

    ring = gw_ids + router_ids
    pos_by_id = {n.id: np.array([n.x, n.y]) for n in nodes}
    ring.sort(key=lambda nid: math.atan2(*(pos_by_id[nid] - center)[::-1]))
    m = len(ring)
    for i in range(m):
        edges.append((ring[i], ring[(i + 1) % m], TIER_RING))
    for i in range(m // 2):
        edges.append((ring[i], ring[(i + m // 2) % m], TIER_RING))

    # daisy chains of at most max_chain APs per router, nearest first
    for j, rid in enumerate(router_ids):
        members = np.flatnonzero(assign == j)
        order = members[np.argsort(((ap_pos[members] - centroids[j]) ** 2).sum(axis=1),
                                   kind="stable")]
        for c in range(0, len(order), params.max_chain):
            chain = order[c:c + params.max_chain]
            prev = rid
            for hop, ai in enumerate(chain):
                edges.append((prev, ap_ids[ai], TIER_CHAIN[hop]))
                prev = ap_ids[ai]

    links = []
    for i, (u, v, cap) in enumerate(edges):
        cap = cap * params.capacity_scale
        links.append(Link(2 * i, u, v, cap))
        links.append(Link(2 * i + 1, v, u, cap))

    aps = [AccessPoint(aid, params.ap_budget) for aid in ap_ids]

    # wired routes from the data center to each AP, shared by all users there
    out_links = {n.id: [] for n in nodes}
    in_links = {n.id: [] for n in nodes}
    for l in links:
        out_links[l.src].append((l.id, l.dst))
        in_links[l.dst].append((l.id, l.src))
    for nid in out_links:
        out_links[nid].sort()
    routes = {}
    for aid in ap_ids:
        dist = {aid: 0}
        queue = deque([aid])
        while queue:
            cur = queue.popleft()
            for _, src in in_links[cur]:
                if src not in dist:
                    dist[src] = dist[cur] + 1
                    queue.append(src)
        routes[aid] = _bfs_route(out_links, dist, 0, aid)

    # strongest-power association, stable order on ties
    users, paths, downlinks = [], [], []
    for k in range(params.n_users):
        d = np.hypot(*(ap_pos - user_pos[k]).T)
        ranked = np.argsort(path_loss_db(d, params), kind="stable")
        chosen = ranked[: params.paths_per_user]
        pids, dids = [], []
        for rank, ai in enumerate(chosen):
            did = params.paths_per_user * k + rank
            pid = params.paths_per_user * k + rank
            snr = float(mean_snr_linear(d[ai], params))
            downlinks.append(
                Downlink(did, k, ap_ids[ai], snr, math.log1p(snr))
            )
            paths.append(Path(pid, k, routes[ap_ids[ai]], did))
            pids.append(pid)
            dids.append(did)
        users.append(
            User(k, float(user_pos[k][0]), float(user_pos[k][1]),
                 tuple(pids), tuple(sorted(dids)), params.theta,
                 float(demand_offsets[k]))
        )

    return Topology(nodes, links, aps, users, paths, downlinks)


def generate_paper_topology(seed=0, **overrides):
    """Full-size instance: 57 APs, 11 routers, 3 gateways, 200 users, 600 paths."""
    params = TopologyParams(seed=seed, **overrides)
    topo = generate_topology(params)
    expect_links = 2 * (params.n_aps + params.n_routers + params.n_gateways
                        + (params.n_routers + params.n_gateways) // 2
                        + params.n_gateways)
    if topo.n_links != expect_links:
        raise StructureError(
            f"generator produced {topo.n_links} links, expected {expect_links}"
        )
    return topo
