"""Graph-based wavefront routing controller.

Builds the line-of-sight graph over tiles and endpoints, solves (disjoint)
copy routes, compiles them into per-tile focus callbacks, deploys tile
states, and predicts the resulting channel. Mutating operations are
serialized by the protocol server; the functions here are pure.
"""

import json
import socketserver
import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InfeasibleError,
    LayoutMismatchError,
    NoRouteError,
    UnknownTileError,
    WavecopyError,
)
from .metrics import field_fidelity
from .propagation import PatchGroup, PropagationConfig, compute_field, departing_amplitudes
from .scene import RoomScene, los_visible
from .tiles import Callback, absorb_callback, callback_from_dict, callback_to_dict, codebook_lookup, continuous_gamma, focus_callback

DEFAULT_MAX_HOPS = 4


@dataclass(eq=False)
class PweGraph:
    nodes: dict  # node id -> reference point (3,)
    edges: dict  # node id -> {neighbor id: distance}
    tile_ids: set
    scene: RoomScene

    def neighbors(self, node):
        return self.edges.get(node, {})


@dataclass(eq=False)
class WaveRoute:
    nodes: list  # ordered node ids, endpoint ... endpoint
    length: float

    @property
    def src(self):
        return self.nodes[0]

    @property
    def dst(self):
        return self.nodes[-1]

    @property
    def hops(self) -> int:
        return len(self.nodes) - 1

    def intermediates(self) -> list:
        return self.nodes[1:-1]


@dataclass(eq=False)
class CopyCommand:
    src: str
    dst: str
    group: int = 0


@dataclass(eq=False)
class ChannelPrediction:
    focal_magnitude: float
    fidelity: float
    hop_count: int
    path_length_m: float


def _node_exclude(graph_nodes_to_rects, node):
    return graph_nodes_to_rects.get(node, set())


def build_graph(scene: RoomScene) -> PweGraph:
    """Nodes are tiles plus declared endpoints; edges are unobstructed LoS pairs."""
    nodes = {}
    tile_ids = set()
    for t in scene.tiles:
        nodes[t.ident] = t.center
        tile_ids.add(t.ident)
    for name, pt in scene.endpoint_points().items():
        if name in nodes:
            raise ValueError(f"endpoint name collides with tile id: {name}")
        nodes[name] = pt
    edges = {n: {} for n in nodes}
    names = sorted(nodes)
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            exclude = ({a} if a in tile_ids else set()) | ({b} if b in tile_ids else set())
            if los_visible(nodes[a], nodes[b], scene, exclude=exclude):
                w = float(np.linalg.norm(nodes[a] - nodes[b]))
                edges[a][b] = w
                edges[b][a] = w
    return PweGraph(nodes, edges, tile_ids, scene)


def route(graph: PweGraph, src, dst, max_hops: int = DEFAULT_MAX_HOPS, banned=()) -> WaveRoute:
    """Exact hop-bounded shortest simple path; ties go to the smaller node list."""
    if src not in graph.nodes or dst not in graph.nodes:
        raise NoRouteError(f"unknown endpoint: {src if src not in graph.nodes else dst}")
    banned = set(banned)
    best: list = [None]  # (cost, path)

    def consider(cand):
        if best[0] is None or cand < best[0]:
            best[0] = cand

    def dfs(node, cost, path):
        if node == dst:
            consider((cost, tuple(path)))
            return
        if len(path) - 1 >= max_hops:
            return
        if best[0] is not None and cost > best[0][0]:
            return  # cannot improve: edge weights are positive
        for nxt, w in sorted(graph.neighbors(node).items()):
            if nxt in path or nxt in banned:
                continue
            if nxt != dst and nxt not in graph.tile_ids:
                continue  # only tiles can relay a wavefront
            path.append(nxt)
            dfs(nxt, cost + w, path)
            path.pop()

    if src != dst:
        dfs(src, 0.0, [src])
    if best[0] is None:
        raise NoRouteError(f"no route {src} -> {dst} within {max_hops} hops")
    cost, path = best[0]
    return WaveRoute(list(path), cost)


def _solve_sequential(graph, commands, max_hops, first_ban=()):
    used: set = set()
    routes = {}
    for i, cmd in enumerate(commands):
        banned = used | set(first_ban) if i == 0 else used
        r = route(graph, cmd.src, cmd.dst, max_hops, banned=banned)
        used.update(r.intermediates())
        routes[id(cmd)] = r
    return routes


def route_disjoint(graph: PweGraph, commands, max_hops: int = DEFAULT_MAX_HOPS) -> list:
    """Node-disjoint routes (on intermediate tiles) for all commands.

    Sequential shortest-path with removal, retried in reverse order and
    diversified by banning one leading-route tile at a time (the greedy
    first choice can otherwise starve later commands); the shortest
    feasible total wins. Infeasible when every attempt fails.
    """
    if not commands:
        raise ValueError("route_disjoint needs at least one command")
    solutions = []

    def attempt(order, first_ban=()):
        try:
            routes = _solve_sequential(graph, order, max_hops, first_ban)
        except NoRouteError:
            return None
        total = sum(r.length for r in routes.values())
        solutions.append((total, routes))
        return routes

    for order in (list(commands), list(reversed(commands))):
        base = attempt(order)
        if base is not None:
            for v in base[id(order[0])].intermediates():
                attempt(order, first_ban={v})
    if not solutions and len(commands) == 2:
        # Greedy starved itself in both orders; at desk scale a pair can be
        # settled exactly by enumerating every lead path.
        for order in (list(commands), list(reversed(commands))):
            lead, follow = order
            for lead_route in _all_simple_routes(graph, lead.src, lead.dst, max_hops):
                try:
                    second = route(
                        graph, follow.src, follow.dst, max_hops,
                        banned=set(lead_route.intermediates()),
                    )
                except NoRouteError:
                    continue
                total = lead_route.length + second.length
                solutions.append((total, {id(lead): lead_route, id(follow): second}))
    if not solutions:
        raise InfeasibleError("commands cannot be served by disjoint routes")
    _, routes = min(solutions, key=lambda s: s[0])
    return [routes[id(cmd)] for cmd in commands]


def _all_simple_routes(graph, src, dst, max_hops, cap=4096):
    """Every tile-relayed simple path src->dst within the hop bound."""
    out = []

    def dfs(node, cost, path):
        if len(out) >= cap:
            return
        if node == dst:
            out.append(WaveRoute(list(path), cost))
            return
        if len(path) - 1 >= max_hops:
            return
        for nxt, w in sorted(graph.neighbors(node).items()):
            if nxt in path:
                continue
            if nxt != dst and nxt not in graph.tile_ids:
                continue
            path.append(nxt)
            dfs(nxt, cost + w, path)
            path.pop()

    if src in graph.nodes and dst in graph.nodes and src != dst:
        dfs(src, 0.0, [src])
    return sorted(out, key=lambda r: (r.length, tuple(r.nodes)))


def compile_route(wave_route: WaveRoute, scene: RoomScene, k: float) -> list:
    """FOCUS(prev hop point -> next hop point) for every intermediate tile."""
    refs = dict(scene.endpoint_points())
    for t in scene.tiles:
        refs[t.ident] = t.center
    out = []
    nodes = wave_route.nodes
    for i in range(1, len(nodes) - 1):
        tile_id = nodes[i]
        out.append((tile_id, focus_callback(refs[nodes[i - 1]], refs[nodes[i + 1]])))
    return out


def deploy(scene: RoomScene, callbacks, k: float | None = None, quantized: bool = True) -> RoomScene:
    """New scene with every named tile configured and all others absorbing."""
    if k is None:
        k = PropagationConfig().k
    by_tile = {}
    tile_ids = {t.ident for t in scene.tiles}
    for tile_id, cb in callbacks:
        if tile_id not in tile_ids:
            raise UnknownTileError(f"deployment names unknown tile {tile_id}")
        by_tile[tile_id] = cb
    out = scene.copy()
    new_tiles = []
    for t in out.tiles:
        cb = by_tile.get(t.ident, absorb_callback())
        if quantized:
            new_tiles.append(t.with_states(codebook_lookup(cb, t, k)))
        else:
            new_tiles.append(t.with_gamma(continuous_gamma(cb, t, k)))
    out.tiles = new_tiles
    return out


def predict_channel(scene: RoomScene, callbacks, probe_points, cfg: PropagationConfig | None = None) -> ChannelPrediction:
    """Simulate the quantized deployment against ideal continuous phases.

    The first probe point is treated as the focal point; fidelity is the
    ratio of quantized to continuous focal magnitude, clamped to [0, 1].
    """
    cfg = cfg or PropagationConfig()
    probes = np.atleast_2d(np.asarray(probe_points, dtype=float))
    f_quant = compute_field(deploy(scene, callbacks, cfg.k, quantized=True), cfg, probes)
    f_cont = compute_field(deploy(scene, callbacks, cfg.k, quantized=False), cfg, probes)
    q = float(abs(f_quant[0]))
    c = float(abs(f_cont[0]))
    if c == 0.0:
        fidelity = 1.0 if q == 0.0 else 0.0
    else:
        fidelity = min(1.0, q / c)

    refs = dict(scene.endpoint_points())
    for t in scene.tiles:
        refs[t.ident] = t.center
    length = 0.0
    for i, (tile_id, cb) in enumerate(callbacks):
        if i == 0:
            length += float(np.linalg.norm(cb.params["source"] - refs[tile_id]))
        length += float(np.linalg.norm(refs[tile_id] - cb.params["focal"]))
    return ChannelPrediction(q, fidelity, len(callbacks) + 1, length)


def reroute(graph: PweGraph, routes, moved_endpoint: str, new_position) -> list:
    """Re-solve after an endpoint moves; untouched routes are kept if disjoint."""
    if moved_endpoint not in graph.nodes:
        raise ValueError(f"unknown endpoint {moved_endpoint}")
    if moved_endpoint in graph.tile_ids:
        raise ValueError("only endpoints can move, not tiles")
    new_position = np.asarray(new_position, dtype=float)
    graph.nodes[moved_endpoint] = new_position
    # Rebuild only the edges incident to the moved endpoint.
    for other in list(graph.edges[moved_endpoint]):
        del graph.edges[other][moved_endpoint]
    graph.edges[moved_endpoint] = {}
    for other, pt in graph.nodes.items():
        if other == moved_endpoint:
            continue
        exclude = {other} if other in graph.tile_ids else set()
        if los_visible(new_position, pt, graph.scene, exclude=exclude):
            w = float(np.linalg.norm(new_position - pt))
            graph.edges[moved_endpoint][other] = w
            graph.edges[other][moved_endpoint] = w

    moved = [r for r in routes if moved_endpoint in (r.src, r.dst)]
    kept = [r for r in routes if moved_endpoint not in (r.src, r.dst)]
    used = set()
    for r in kept:
        used.update(r.intermediates())
    out = []
    try:
        for r in routes:
            if r in kept:
                out.append(r)
                continue
            nr = route(graph, r.src, r.dst, banned=used)
            used.update(nr.intermediates())
            out.append(nr)
        return out
    except NoRouteError:
        commands = [CopyCommand(r.src, r.dst) for r in routes]
        try:
            return route_disjoint(graph, commands)
        except NoRouteError as exc:  # pragma: no cover - defensive
            raise InfeasibleError(str(exc)) from exc


def replicate_by_sensing(scene1: RoomScene, scene2: RoomScene, mapping: dict, cfg: PropagationConfig | None = None) -> RoomScene:
    """Reproduce scene1's departing tile wavefronts inside scene2.

    `mapping` maps scene1 tile ids to scene2 tile ids; layouts must be
    congruent within 1e-6 m. The mapped scene2 tiles become absorbing
    emitters carrying the sensed per-cell amplitudes.
    """
    cfg = cfg or PropagationConfig()
    t1 = {t.ident: t for t in scene1.tiles}
    t2 = {t.ident: t for t in scene2.tiles}
    for a, b in mapping.items():
        if a not in t1 or b not in t2:
            raise UnknownTileError(f"mapping names unknown tile {a} or {b}")
        ta, tb = t1[a], t2[b]
        if (ta.rows, ta.cols) != (tb.rows, tb.cols) or abs(ta.pitch - tb.pitch) > 1e-9:
            raise LayoutMismatchError(f"tiles {a} and {b} have different cell grids")
    pairs = sorted(mapping.items())
    for i in range(len(pairs)):
        for j in range(i + 1, len(pairs)):
            (a1, b1), (a2, b2) = pairs[i], pairs[j]
            d1 = np.linalg.norm(t1[a1].center - t1[a2].center)
            d2 = np.linalg.norm(t2[b1].center - t2[b2].center)
            if abs(d1 - d2) > 1e-6:
                raise LayoutMismatchError(
                    f"tile layout not congruent: |{a1}-{a2}|={d1:.9f} vs |{b1}-{b2}|={d2:.9f}"
                )

    departing = departing_amplitudes(scene1, cfg)
    out = scene2.copy()
    absorb_states = {}
    new_tiles = []
    for t in out.tiles:
        src_ids = [a for a, b in mapping.items() if b == t.ident]
        if src_ids:
            amps = departing[src_ids[0]]
            out.injected.append(
                PatchGroup(
                    rect_id=t.rect.ident,
                    positions=t.cell_positions(),
                    normal=t.normal,
                    areas=np.full(t.rows * t.cols, t.pitch**2),
                    coeff=np.zeros(t.rows * t.cols, dtype=complex),
                    amplitudes=np.asarray(amps, dtype=complex),
                )
            )
        new_tiles.append(t.with_states(codebook_lookup(absorb_callback(), t, cfg.k)))
    out.tiles = new_tiles
    return out


# ---------------- line-delimited JSON control protocol ----------------

PROTOCOL_VERSION = 1


class ControllerState:
    """Single-writer controller: route/deploy mutate under a lock."""

    def __init__(self, scene: RoomScene, cfg: PropagationConfig | None = None):
        self.base_scene = scene
        self.cfg = cfg or PropagationConfig()
        self.lock = threading.Lock()
        self.graph = build_graph(scene)
        self.callbacks: list = []
        self.deployed_scene: RoomScene | None = None
        self.routes: list = []

    def handle(self, request: dict) -> dict:
        op = request.get("op")
        try:
            handler = {
                "build-graph": self._op_build_graph,
                "route": self._op_route,
                "route-disjoint": self._op_route_disjoint,
                "deploy": self._op_deploy,
                "predict": self._op_predict,
                "reroute": self._op_reroute,
            }[op]
        except KeyError:
            return _err("UnknownOp", f"unsupported op {op!r}")
        try:
            with self.lock:
                return {"v": PROTOCOL_VERSION, "ok": True, **handler(request)}
        except WavecopyError as exc:
            return _err(type(exc).__name__.removesuffix("Error"), str(exc))
        except (KeyError, TypeError, ValueError) as exc:
            return _err("BadRequest", str(exc))

    def _op_build_graph(self, req):
        self.graph = build_graph(self.base_scene)
        edges = sorted(
            [a, b, w] for a, nbrs in self.graph.edges.items() for b, w in nbrs.items() if a < b
        )
        return {"nodes": sorted(self.graph.nodes), "edges": edges}

    def _op_route(self, req):
        r = route(self.graph, req["src"], req["dst"], int(req.get("max_hops", DEFAULT_MAX_HOPS)))
        self.routes = [r]
        return {"route": r.nodes, "length_m": r.length, "hops": r.hops}

    def _op_route_disjoint(self, req):
        commands = [CopyCommand(c["src"], c["dst"], c.get("group", 0)) for c in req["commands"]]
        routes = route_disjoint(self.graph, commands, int(req.get("max_hops", DEFAULT_MAX_HOPS)))
        self.routes = routes
        return {
            "routes": [{"route": r.nodes, "length_m": r.length, "hops": r.hops} for r in routes]
        }

    def _op_deploy(self, req):
        if "route" in req:
            wr = WaveRoute(list(req["route"]), 0.0)
            callbacks = compile_route(wr, self.base_scene, self.cfg.k)
        else:
            callbacks = [
                (c["tile"], callback_from_dict(c["callback"])) for c in req["callbacks"]
            ]
        quantized = bool(req.get("quantized", True))
        self.deployed_scene = deploy(self.base_scene, callbacks, self.cfg.k, quantized=quantized)
        self.callbacks = callbacks
        return {
            "deployed": sorted(t for t, _ in callbacks),
            "callbacks": [
                {"tile": t, "callback": callback_to_dict(cb)} for t, cb in callbacks
            ],
        }

    def _op_predict(self, req):
        probes = np.asarray(req["probes"], dtype=float)
        pred = predict_channel(self.base_scene, self.callbacks, probes, self.cfg)
        return {
            "focal_magnitude": pred.focal_magnitude,
            "fidelity": pred.fidelity,
            "hop_count": pred.hop_count,
            "path_length_m": pred.path_length_m,
        }

    def _op_reroute(self, req):
        routes = reroute(self.graph, self.routes, req["endpoint"], req["position"])
        self.routes = routes
        return {
            "routes": [{"route": r.nodes, "length_m": r.length, "hops": r.hops} for r in routes]
        }


def _err(code: str, message: str) -> dict:
    return {"v": PROTOCOL_VERSION, "ok": False, "error": {"code": code, "message": message}}


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        for line in self.rfile:
            line = line.strip()
            if not line:
                continue
            try:
                request = json.loads(line)
            except json.JSONDecodeError as exc:
                response = _err("BadJson", str(exc))
            else:
                response = self.server.state.handle(request)
            self.wfile.write((json.dumps(response) + "\n").encode())
            self.wfile.flush()


class ControllerServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, state: ControllerState, host: str = "127.0.0.1", port: int = 0):
        super().__init__((host, port), _Handler)
        self.state = state
