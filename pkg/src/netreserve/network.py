"""Topology, reservations, feasibility checking, and the topology JSON format.

A topology is immutable once constructed.  Paths carry the wired link sequence
from a data center to the serving access point; the final wireless hop is a
separate downlink object (one per user/AP pair) holding the channel parameters
that the stochastic models consume.
"""

import json
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .errors import StructureError

NODE_KINDS = ("data-center", "gateway", "router", "access-point")

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Node:
    id: int
    kind: str
    x: float = 0.0
    y: float = 0.0


@dataclass(frozen=True)
class Link:
    id: int
    src: int
    dst: int
    capacity: float


@dataclass(frozen=True)
class AccessPoint:
    node: int
    budget: float


@dataclass(frozen=True)
class Downlink:
    id: int
    user: int
    ap: int
    mean_snr: float
    spectral_efficiency: float


@dataclass(frozen=True)
class Path:
    id: int
    user: int
    links: tuple
    downlink: int


@dataclass(frozen=True)
class User:
    id: int
    x: float
    y: float
    paths: tuple
    downlinks: tuple
    theta: float = 1.0
    demand_offset: float = 0.0


class Topology:
    """Validated network instance with precomputed index arrays for the solvers."""

    def __init__(self, nodes, links, aps, users, paths, downlinks):
        self.nodes = sorted(nodes, key=lambda n: n.id)
        self.links = sorted(links, key=lambda l: l.id)
        self.aps = sorted(aps, key=lambda a: a.node)
        self.users = sorted(users, key=lambda u: u.id)
        self.paths = sorted(paths, key=lambda p: p.id)
        self.downlinks = sorted(downlinks, key=lambda d: d.id)
        self._validate()
        self._build_indexes()

    # -- validation ---------------------------------------------------------

    def _validate(self):
        node_ids = [n.id for n in self.nodes]
        if len(set(node_ids)) != len(node_ids):
            raise StructureError("duplicate node ids")
        nodes_by_id = {n.id: n for n in self.nodes}
        for n in self.nodes:
            if n.kind not in NODE_KINDS:
                raise StructureError(f"unknown node kind {n.kind!r}")

        link_ids = [l.id for l in self.links]
        if len(set(link_ids)) != len(link_ids):
            raise StructureError("duplicate link ids")
        for l in self.links:
            if l.src == l.dst:
                raise StructureError(f"link {l.id} is a self-loop")
            if l.src not in nodes_by_id or l.dst not in nodes_by_id:
                raise StructureError(f"link {l.id} references unknown node")
            if not l.capacity > 0.0:
                raise StructureError(f"link {l.id} capacity must be positive")

        ap_nodes = [a.node for a in self.aps]
        if len(set(ap_nodes)) != len(ap_nodes):
            raise StructureError("duplicate access points")
        for a in self.aps:
            node = nodes_by_id.get(a.node)
            if node is None or node.kind != "access-point":
                raise StructureError(f"access point {a.node} is not an access-point node")
            if not a.budget > 0.0:
                raise StructureError(f"access point {a.node} budget must be positive")
        ap_set = set(ap_nodes)

        dl_ids = [d.id for d in self.downlinks]
        if len(set(dl_ids)) != len(dl_ids):
            raise StructureError("duplicate downlink ids")
        dls_by_id = {d.id: d for d in self.downlinks}
        user_ids = {u.id for u in self.users}
        for d in self.downlinks:
            if d.ap not in ap_set:
                raise StructureError(f"downlink {d.id} serves from non-AP node {d.ap}")
            if d.user not in user_ids:
                raise StructureError(f"downlink {d.id} references unknown user {d.user}")

        links_by_id = {l.id: l for l in self.links}
        paths_by_id = {}
        for p in self.paths:
            if p.id in paths_by_id:
                raise StructureError(f"duplicate path id {p.id}")
            paths_by_id[p.id] = p
            if not p.links:
                raise StructureError(f"path {p.id} has no links")
            dl = dls_by_id.get(p.downlink)
            if dl is None:
                raise StructureError(f"path {p.id} references unknown downlink")
            if dl.user != p.user:
                raise StructureError(f"path {p.id} downlink belongs to another user")
            # connected walk: data center -> ... -> serving AP, wireless hop last
            prev = None
            for lid in p.links:
                link = links_by_id.get(lid)
                if link is None:
                    raise StructureError(f"path {p.id} references unknown link {lid}")
                if prev is not None and link.src != prev:
                    raise StructureError(f"path {p.id} is not a connected walk")
                prev = link.dst
            first = links_by_id[p.links[0]]
            if nodes_by_id[first.src].kind != "data-center":
                raise StructureError(f"path {p.id} does not start at a data center")
            if prev != dl.ap:
                raise StructureError(f"path {p.id} does not end at its serving AP")

        for u in self.users:
            if not u.paths:
                raise StructureError(f"user {u.id} has no candidate paths")
            for pid in u.paths:
                p = paths_by_id.get(pid)
                if p is None or p.user != u.id:
                    raise StructureError(f"user {u.id} lists foreign path {pid}")
            derived = tuple(sorted({paths_by_id[pid].downlink for pid in u.paths}))
            if tuple(sorted(u.downlinks)) != derived:
                raise StructureError(f"user {u.id} downlink set inconsistent with paths")
            if u.theta < 0.0:
                raise StructureError(f"user {u.id} has negative demand weight")
        listed = {pid for u in self.users for pid in u.paths}
        if listed != set(paths_by_id):
            raise StructureError("paths exist that no user references")

    # -- solver-facing index arrays ------------------------------------------

    def _build_indexes(self):
        self.link_index = {l.id: i for i, l in enumerate(self.links)}
        self.path_index = {p.id: i for i, p in enumerate(self.paths)}
        self.user_index = {u.id: i for i, u in enumerate(self.users)}
        self.downlink_index = {d.id: i for i, d in enumerate(self.downlinks)}
        self.ap_index = {a.node: i for i, a in enumerate(self.aps)}

        self.capacities = np.array([l.capacity for l in self.links], dtype=float)
        self.budgets = np.array([a.budget for a in self.aps], dtype=float)
        self.path_user = np.array(
            [self.user_index[p.user] for p in self.paths], dtype=np.intp
        )
        self.path_downlink = np.array(
            [self.downlink_index[p.downlink] for p in self.paths], dtype=np.intp
        )
        self.path_links = [
            np.array([self.link_index[lid] for lid in p.links], dtype=np.intp)
            for p in self.paths
        ]
        self.downlink_user = np.array(
            [self.user_index[d.user] for d in self.downlinks], dtype=np.intp
        )
        self.downlink_ap = np.array(
            [self.ap_index[d.ap] for d in self.downlinks], dtype=np.intp
        )
        self.downlink_snr = np.array([d.mean_snr for d in self.downlinks], dtype=float)
        self.downlink_delta = np.array(
            [d.spectral_efficiency for d in self.downlinks], dtype=float
        )
        self.user_theta = np.array([u.theta for u in self.users], dtype=float)
        self.user_paths = [
            np.array([self.path_index[pid] for pid in u.paths], dtype=np.intp)
            for u in self.users
        ]
        self.user_path_count = np.array([len(u.paths) for u in self.users], dtype=float)
        # paths per downlink (Remark 1 sharing shows up as >1 entries)
        self.downlink_paths = [[] for _ in self.downlinks]
        for pi, di in enumerate(self.path_downlink):
            self.downlink_paths[di].append(pi)
        self.downlink_paths = [np.array(v, dtype=np.intp) for v in self.downlink_paths]
        self.ap_downlinks = [[] for _ in self.aps]
        for di, ai in enumerate(self.downlink_ap):
            self.ap_downlinks[ai].append(di)
        self.ap_downlinks = [np.array(v, dtype=np.intp) for v in self.ap_downlinks]

    # -- conveniences ---------------------------------------------------------

    @property
    def n_links(self):
        return len(self.links)

    @property
    def n_paths(self):
        return len(self.paths)

    @property
    def n_users(self):
        return len(self.users)

    @property
    def n_downlinks(self):
        return len(self.downlinks)

    def rate_vector(self, reservation):
        """Per-path rates as an array aligned with self.paths."""
        r = np.zeros(self.n_paths)
        for pid, val in reservation.r.items():
            if pid not in self.path_index:
                raise StructureError(f"reservation references unknown path {pid}")
            r[self.path_index[pid]] = val
        return r

    def resource_vector(self, reservation):
        """Per-downlink resources as an array aligned with self.downlinks."""
        t = np.zeros(self.n_downlinks)
        for did, val in reservation.t.items():
            if did not in self.downlink_index:
                raise StructureError(f"reservation references unknown downlink {did}")
            t[self.downlink_index[did]] = val
        return t

    def link_loads(self, r):
        loads = np.zeros(self.n_links)
        for pi, lks in enumerate(self.path_links):
            loads[lks] += r[pi]
        return loads

    def downlink_rates(self, r):
        """Summed path rate per downlink (the shared-downlink effective rate)."""
        sums = np.zeros(self.n_downlinks)
        np.add.at(sums, self.path_downlink, r)
        return sums

    def user_rates(self, r):
        sums = np.zeros(self.n_users)
        np.add.at(sums, self.path_user, r)
        return sums

    def ap_loads(self, t):
        loads = np.zeros(len(self.aps))
        np.add.at(loads, self.downlink_ap, t)
        return loads

    def make_reservation(self, r, t):
        return Reservation(
            r={p.id: float(r[i]) for i, p in enumerate(self.paths)},
            t={d.id: float(t[i]) for i, d in enumerate(self.downlinks)},
        )

    def with_budgets(self, budget):
        """Copy with every AP budget replaced (sweep axis)."""
        aps = [replace(a, budget=float(budget)) for a in self.aps]
        return Topology(self.nodes, self.links, aps, self.users, self.paths,
                        self.downlinks)

    def with_capacity_scale(self, scale):
        """Copy with all wired link capacities multiplied by scale."""
        links = [replace(l, capacity=l.capacity * float(scale)) for l in self.links]
        return Topology(self.nodes, links, self.aps, self.users, self.paths,
                        self.downlinks)

    def restrict_paths(self, keep_path_ids):
        """Copy keeping only the given paths (baseline path-set restriction)."""
        keep = set(keep_path_ids)
        paths = [p for p in self.paths if p.id in keep]
        used_dl = {p.downlink for p in paths}
        users = []
        for u in self.users:
            kept = tuple(pid for pid in u.paths if pid in keep)
            if not kept:
                raise StructureError(f"restriction leaves user {u.id} without paths")
            dls = tuple(sorted({p.downlink for p in paths if p.user == u.id}))
            users.append(replace(u, paths=kept, downlinks=dls))
        downlinks = [d for d in self.downlinks if d.id in used_dl]
        return Topology(self.nodes, self.links, self.aps, users, paths, downlinks)


@dataclass
class Reservation:
    """Pre-committed per-path rates (Mnats/s) and per-downlink resources (MHz)."""

    r: dict
    t: dict

    def user_rate(self, topology, user_id):
        u = topology.users[topology.user_index[user_id]]
        return sum(self.r.get(pid, 0.0) for pid in u.paths)


@dataclass
class FeasibilityReport:
    ok: bool
    link_slack: dict
    ap_slack: dict
    violations: list = field(default_factory=list)


def check_feasible(topology, reservation, tol=1e-9):
    """Per-link and per-AP slack report; violations beyond tol * capacity flagged."""
    r = topology.rate_vector(reservation)
    t = topology.resource_vector(reservation)
    violations = []
    for pid, val in reservation.r.items():
        if val < 0.0:
            violations.append(("path", pid, -val))
    for did, val in reservation.t.items():
        if val < 0.0:
            violations.append(("downlink", did, -val))

    loads = topology.link_loads(r)
    link_slack = {}
    for i, link in enumerate(topology.links):
        slack = link.capacity - loads[i]
        link_slack[link.id] = slack
        if loads[i] > link.capacity * (1.0 + tol):
            violations.append(("link", link.id, loads[i] - link.capacity))

    ap_loads = topology.ap_loads(t)
    ap_slack = {}
    for i, ap in enumerate(topology.aps):
        slack = ap.budget - ap_loads[i]
        ap_slack[ap.node] = slack
        if ap_loads[i] > ap.budget * (1.0 + tol):
            violations.append(("ap", ap.node, ap_loads[i] - ap.budget))

    return FeasibilityReport(ok=not violations, link_slack=link_slack,
                             ap_slack=ap_slack, violations=violations)


# ---------------------------------------------------------------------------
# JSON round trip
# ---------------------------------------------------------------------------


def load_schema(name):
    with resources.files("netreserve.schemas").joinpath(name).open("r") as fh:
        return json.load(fh)


def validate_against_schema(doc, schema_name):
    import jsonschema

    from .errors import ConfigError

    try:
        jsonschema.validate(doc, load_schema(schema_name))
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"{schema_name}: {exc.message}") from exc


def topology_to_dict(topology):
    return {
        "version": SCHEMA_VERSION,
        "units": {"rate": "Mnats/s", "resource": "MHz"},
        "nodes": [
            {"id": n.id, "kind": n.kind, "x": n.x, "y": n.y} for n in topology.nodes
        ],
        "links": [
            {"id": l.id, "src": l.src, "dst": l.dst, "capacity": l.capacity}
            for l in topology.links
        ],
        "access_points": [
            {"node": a.node, "budget": a.budget} for a in topology.aps
        ],
        "downlinks": [
            {
                "id": d.id,
                "user": d.user,
                "ap": d.ap,
                "mean_snr": d.mean_snr,
                "spectral_efficiency": d.spectral_efficiency,
            }
            for d in topology.downlinks
        ],
        "paths": [
            {"id": p.id, "user": p.user, "links": list(p.links), "downlink": p.downlink}
            for p in topology.paths
        ],
        "users": [
            {
                "id": u.id,
                "x": u.x,
                "y": u.y,
                "paths": list(u.paths),
                "downlinks": list(u.downlinks),
                "theta": u.theta,
                "demand_offset": u.demand_offset,
            }
            for u in topology.users
        ],
    }


def topology_from_dict(doc):
    validate_against_schema(doc, "topology.schema.json")
    nodes = [Node(n["id"], n["kind"], n.get("x", 0.0), n.get("y", 0.0))
             for n in doc["nodes"]]
    links = [Link(l["id"], l["src"], l["dst"], l["capacity"]) for l in doc["links"]]
    aps = [AccessPoint(a["node"], a["budget"]) for a in doc["access_points"]]
    downlinks = [
        Downlink(d["id"], d["user"], d["ap"], d["mean_snr"], d["spectral_efficiency"])
        for d in doc["downlinks"]
    ]
    paths = [Path(p["id"], p["user"], tuple(p["links"]), p["downlink"])
             for p in doc["paths"]]
    users = [
        User(u["id"], u["x"], u["y"], tuple(u["paths"]), tuple(u["downlinks"]),
             u.get("theta", 1.0), u.get("demand_offset", 0.0))
        for u in doc["users"]
    ]
    return Topology(nodes, links, aps, users, paths, downlinks)


def dump_json(doc, path):
    """Write JSON deterministically (sorted keys, fixed layout, trailing newline)."""
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_topology(topology, path):
    dump_json(topology_to_dict(topology), path)


def load_topology(path):
    with open(path) as fh:
        doc = json.load(fh)
    return topology_from_dict(doc)
