"""Command-line front end: one subcommand per pipeline stage.

Exit codes: 0 success, 2 no route, 3 infeasible disjoint routing,
4 I/O failure, 5 validation failure, 1 anything else.
"""

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import dataset as ds
from . import metrics, presets, transport
from .controller import (
    ControllerServer,
    ControllerState,
    CopyCommand,
    build_graph,
    compile_route,
    deploy,
    predict_channel,
    route,
    route_disjoint,
)
from .errors import (
    CorruptManifestError,
    IndexMismatchError,
    InfeasibleError,
    NoRouteError,
    SceneValidationError,
    SizeMismatchError,
    WavecopyError,
)
from .metrics import LatencyBudget, latency_budget, psnr, ssim, summarize
from .propagation import PropagationConfig, array_reading
from .scene import load_scene, save_scene, validate_scene
from .metrics import field_fidelity

EXIT_OK = 0
EXIT_NOROUTE = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4
EXIT_VALIDATION = 5


def _load_config(path):
    if not path:
        return {}
    with open(path) as f:
        return json.load(f)


def _cfg_value(args, config, key, default=None):
    val = getattr(args, key.replace("-", "_"), None)
    if val is not None:
        return val
    return config.get(key, default)


def _prop_config(args, config) -> PropagationConfig:
    return PropagationConfig(
        k=presets.K,
        max_bounce=int(_cfg_value(args, config, "max-bounce", 3)),
    )


def _get_scene(args, config):
    scene_path = _cfg_value(args, config, "scene")
    if scene_path is None:
        raise FileNotFoundError("no scene file given (use --scene or a config file)")
    return load_scene(scene_path)


# ---------------- subcommands ----------------


def cmd_scene_preset(args, config):
    scene = presets.PRESETS[args.name]()
    save_scene(scene, args.out)
    print(f"wrote {args.name} scene to {args.out}")
    return EXIT_OK


def cmd_scene_validate(args, config):
    scene = _get_scene(args, config)
    validate_scene(scene)
    rects = scene.all_rectangles()
    print(f"scene OK: {len(rects)} rectangles, {len(scene.tiles)} tiles, "
          f"{len(scene.sources)} sources, {len(scene.arrays)} arrays")
    return EXIT_OK


def cmd_dataset_generate(args, config):
    scene = _get_scene(args, config)
    n = int(_cfg_value(args, config, "n", 1000))
    seed = _cfg_value(args, config, "seed")
    if seed is None:
        raise ValueError("--seed is required for dataset generation")
    cfg = _prop_config(args, config)
    records, manifest = ds.generate_dataset(scene, n, int(seed), cfg)
    out = _cfg_value(args, config, "out", "dataset")
    ds.write_dataset(records, manifest, out)
    print(f"dataset: {manifest.count} records, seed {manifest.seed}, "
          f"scene {manifest.scene_hash[:12]}..., -> {out}")
    return EXIT_OK


def cmd_dataset_split(args, config):
    out = _cfg_value(args, config, "data", "dataset")
    seed = _cfg_value(args, config, "seed")
    if seed is None:
        raise ValueError("--seed is required for the split shuffle")
    manifest = ds.read_manifest(out)
    manifest = ds.split_dataset(manifest, float(_cfg_value(args, config, "frac", 0.9)), int(seed))
    with open(os.path.join(out, "manifest.json"), "w") as f:
        json.dump(manifest.to_dict(), f, indent=1, sort_keys=True)
    train, test = ds.split_indices(manifest)
    print(f"split: {len(train)} train / {len(test)} test")
    return EXIT_OK


def cmd_copy(args, config):
    scene = _get_scene(args, config)
    cfg = _prop_config(args, config)
    src = _cfg_value(args, config, "src", "obj0")
    dst = _cfg_value(args, config, "dst", "view2")
    max_hops = int(_cfg_value(args, config, "max-hops", 4))
    graph = build_graph(scene)
    wave_route = route(graph, src, dst, max_hops)
    callbacks = compile_route(wave_route, scene, cfg.k)
    report = {"route": wave_route.nodes, "hops": wave_route.hops,
              "path_length_m": wave_route.length}
    readings = {}
    for quant, key in ((True, "fidelity_quantized"), (False, "fidelity_continuous")):
        deployed = deploy(scene, callbacks, cfg.k, quantized=quant)
        r1 = array_reading(deployed, cfg, deployed.arrays[0])
        r2 = array_reading(deployed, cfg, deployed.arrays[1])
        report[key] = field_fidelity(r1, r2)
        readings[key] = (r1, r2)
    out = _cfg_value(args, config, "out")
    if out:
        with open(out, "w") as f:
            json.dump(report, f, indent=1)
    print(json.dumps(report, indent=1))
    return EXIT_OK


def cmd_serve(args, config):
    host, port = args.listen.rsplit(":", 1)
    received = []
    stats = transport.serve_once(host, int(port), on_frame=received.append)
    print(json.dumps(stats.summary()))
    out = _cfg_value(args, config, "out")
    if out and received:
        arr = np.stack([f.payload for f in received])
        with open(out, "wb") as f:
            f.write(np.ascontiguousarray(arr.astype("<c16")).tobytes())
        print(f"wrote {len(received)} readings to {out}")
    return EXIT_OK


def cmd_send(args, config):
    host, port = args.connect.rsplit(":", 1)
    sampler = transport.FrameSampler()
    frames = []
    if args.data:
        records, _ = ds.read_dataset(args.data)
        for rec in records[: args.count]:
            frames.append(sampler.sample_wavefront(rec.reading))
    else:
        rng = np.random.default_rng(args.seed)
        for _ in range(args.count):
            payload = rng.standard_normal((10, 10)) + 1j * rng.standard_normal((10, 10))
            frames.append(sampler.sample_wavefront(payload))
    stats = transport.send_session(host, int(port), frames, rate_hz=args.rate)
    print(json.dumps(stats.summary()))
    return EXIT_OK


def _image_pairs(real_dir, fake_dir):
    names = sorted(os.listdir(real_dir))
    pairs = []
    for name in names:
        if not name.lower().endswith(".png"):
            continue
        fake = os.path.join(fake_dir, name)
        if not os.path.exists(fake):
            raise IndexMismatchError(f"missing generated image {name}")
        pairs.append((name, os.path.join(real_dir, name), fake))
    return pairs


def cmd_metrics_compare(args, config):
    from PIL import Image

    pairs = _image_pairs(args.real_dir, args.fake_dir)
    rows = []
    for name, real, fake in pairs:
        a = np.asarray(Image.open(real).convert("RGB"))
        b = np.asarray(Image.open(fake).convert("RGB"))
        rows.append((name, psnr(a, b), ssim(a, b)))
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["name", "psnr_db", "ssim"])
        for name, p, s in rows:
            w.writerow([name, p, s])
        stats_p = _safe_summary([r[1] for r in rows])
        stats_s = _safe_summary([r[2] for r in rows])
        w.writerow(["summary_median", stats_p["median"], stats_s["median"]])
    print(json.dumps({"pairs": len(rows), "psnr": stats_p, "ssim": stats_s}, indent=1))
    return EXIT_OK


def _safe_summary(values):
    """summarize(), but tolerant of the all-infinite PSNR case."""
    vals = list(values)
    finite = [v for v in vals if math.isfinite(v)]
    if not finite:
        return {
            "min": math.inf, "q1": math.inf, "median": math.inf,
            "q3": math.inf, "max": math.inf, "count": 0, "non_finite": len(vals),
        }
    return summarize(vals)


def cmd_evaluate(args, config):
    from PIL import Image

    data_dir = _cfg_value(args, config, "data", "dataset")
    fake_dir = args.fake
    manifest = ds.read_manifest(data_dir)
    _, test_idx = ds.split_indices(manifest)
    if not test_idx:
        raise IndexMismatchError("manifest has no test records")
    rng = np.random.default_rng(int(_cfg_value(args, config, "seed", manifest.seed)))
    perm = rng.permutation(len(test_idx))
    if len(test_idx) > 1:
        while np.any(perm == np.arange(len(test_idx))):
            perm = rng.permutation(len(test_idx))

    def real_path(i):
        return os.path.join(data_dir, "photos", f"{i}_L.png")

    def fake_path(i):
        p = os.path.join(fake_dir, f"{i}_L.png")
        if not os.path.exists(p):
            raise IndexMismatchError(f"missing generated image for record {i}")
        return p

    reals = {i: np.asarray(Image.open(real_path(i)).convert("RGB")) for i in test_idx}
    fakes = {i: np.asarray(Image.open(fake_path(i)).convert("RGB")) for i in test_idx}
    rows = []
    for pos, i in enumerate(test_idx):
        j = test_idx[perm[pos]]
        rows.append(
            (
                i,
                psnr(reals[i], fakes[i]),
                ssim(reals[i], fakes[i]),
                psnr(reals[j], fakes[i]),
                ssim(reals[j], fakes[i]),
            )
        )
    out = _cfg_value(args, config, "out", "evaluation.csv")
    id_p = _safe_summary([r[1] for r in rows])
    id_s = _safe_summary([r[2] for r in rows])
    sh_p = _safe_summary([r[3] for r in rows])
    sh_s = _safe_summary([r[4] for r in rows])
    with open(out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["index", "psnr_db", "ssim", "psnr_shuffled_db", "ssim_shuffled"])
        for row in rows:
            w.writerow(row)
        w.writerow(["summary_identity", id_p["median"], id_s["median"], "", ""])
        w.writerow(["summary_shuffled", "", "", sh_p["median"], sh_s["median"]])
    report = {
        "records": len(rows),
        "identity": {"psnr": id_p, "ssim": id_s},
        "shuffled": {"psnr": sh_p, "ssim": sh_s},
        "csv": out,
    }
    print(json.dumps(report, indent=1))
    return EXIT_OK


def cmd_budget(args, config):
    budget = LatencyBudget(network=(1.0, 20.0) if args.network else None)
    print(json.dumps(latency_budget(budget), indent=1))
    return EXIT_OK


def cmd_controller_serve(args, config):
    scene = _get_scene(args, config)
    state = ControllerState(scene, _prop_config(args, config))
    server = ControllerServer(state, args.host, args.port)
    host, port = server.server_address
    print(f"controller listening on {host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def cmd_route(args, config):
    scene = _get_scene(args, config)
    graph = build_graph(scene)
    r = route(graph, args.src, args.dst, int(_cfg_value(args, config, "max-hops", 4)))
    print(json.dumps({"route": r.nodes, "length_m": r.length, "hops": r.hops}, indent=1))
    return EXIT_OK


def cmd_route_disjoint(args, config):
    scene = _get_scene(args, config)
    graph = build_graph(scene)
    commands = [CopyCommand(*pair.split(":")) for pair in args.pair]
    routes = route_disjoint(graph, commands, int(_cfg_value(args, config, "max-hops", 4)))
    print(json.dumps([{"route": r.nodes, "length_m": r.length} for r in routes], indent=1))
    return EXIT_OK


def cmd_build_graph(args, config):
    scene = _get_scene(args, config)
    graph = build_graph(scene)
    edges = sorted([a, b, w] for a, nbrs in graph.edges.items() for b, w in nbrs.items() if a < b)
    print(json.dumps({"nodes": sorted(graph.nodes), "edges": edges}, indent=1))
    return EXIT_OK


def cmd_predict(args, config):
    scene = _get_scene(args, config)
    cfg = _prop_config(args, config)
    graph = build_graph(scene)
    r = route(graph, args.src, args.dst, int(_cfg_value(args, config, "max-hops", 4)))
    callbacks = compile_route(r, scene, cfg.k)
    probes = [scene.endpoint_points()[args.dst]]
    pred = predict_channel(scene, callbacks, probes, cfg)
    print(
        json.dumps(
            {
                "route": r.nodes,
                "focal_magnitude": pred.focal_magnitude,
                "fidelity": pred.fidelity,
                "hop_count": pred.hop_count,
                "path_length_m": pred.path_length_m,
            },
            indent=1,
        )
    )
    return EXIT_OK


def cmd_deploy(args, config):
    from .tiles import callback_to_dict

    scene = _get_scene(args, config)
    cfg = _prop_config(args, config)
    graph = build_graph(scene)
    r = route(graph, args.src, args.dst, int(_cfg_value(args, config, "max-hops", 4)))
    callbacks = compile_route(r, scene, cfg.k)
    deployed = deploy(scene, callbacks, cfg.k, quantized=not args.continuous)
    report = {
        "route": r.nodes,
        "deployed": sorted(t for t, _ in callbacks),
        "callbacks": [{"tile": t, "callback": callback_to_dict(cb)} for t, cb in callbacks],
    }
    if args.states_out:
        states = {t.ident: np.asarray(t.states).tolist() for t in deployed.tiles
                  if t.states is not None}
        with open(args.states_out, "w") as f:
            json.dump(states, f, indent=1)
        report["states_file"] = args.states_out
    print(json.dumps(report, indent=1))
    return EXIT_OK


def cmd_reroute(args, config):
    from .controller import reroute as do_reroute

    scene = _get_scene(args, config)
    graph = build_graph(scene)
    r = route(graph, args.src, args.dst, int(_cfg_value(args, config, "max-hops", 4)))
    position = [float(x) for x in args.position.split(",")]
    routes = do_reroute(graph, [r], args.endpoint, position)
    print(
        json.dumps(
            {
                "before": {"route": r.nodes, "length_m": r.length},
                "after": [{"route": x.nodes, "length_m": x.length} for x in routes],
            },
            indent=1,
        )
    )
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="wavecopy", description=__doc__)
    p.add_argument("--config", help="JSON config file; flags override its values")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("scene", help="scene file utilities")
    scene_sub = sp.add_subparsers(dest="scene_command", required=True)
    spp = scene_sub.add_parser("preset", help="write a built-in scene to JSON")
    spp.add_argument("--name", choices=sorted(presets.PRESETS), required=True)
    spp.add_argument("--out", required=True)
    spp.set_defaults(func=cmd_scene_preset)
    spv = scene_sub.add_parser("validate")
    spv.add_argument("--scene")
    spv.set_defaults(func=cmd_scene_validate)

    dp = sub.add_parser("dataset", help="training corpus generation")
    dsub = dp.add_subparsers(dest="dataset_command", required=True)
    dg = dsub.add_parser("generate")
    dg.add_argument("--scene")
    dg.add_argument("--n", type=int)
    dg.add_argument("--seed", type=int)
    dg.add_argument("--out")
    dg.add_argument("--max-bounce", type=int, dest="max_bounce")
    dg.set_defaults(func=cmd_dataset_generate)
    dsp = dsub.add_parser("split")
    dsp.add_argument("--data")
    dsp.add_argument("--frac", type=float)
    dsp.add_argument("--seed", type=int)
    dsp.set_defaults(func=cmd_dataset_split)

    cp = sub.add_parser("copy", help="two-room wavefront copy experiment")
    cp.add_argument("--scene")
    cp.add_argument("--src")
    cp.add_argument("--dst")
    cp.add_argument("--out")
    cp.add_argument("--max-hops", type=int, dest="max_hops")
    cp.add_argument("--max-bounce", type=int, dest="max_bounce")
    cp.set_defaults(func=cmd_copy)

    sv = sub.add_parser("serve", help="receive a frame stream")
    sv.add_argument("--listen", default="127.0.0.1:7801")
    sv.add_argument("--out")
    sv.set_defaults(func=cmd_serve)

    sd = sub.add_parser("send", help="stream frames to a receiver")
    sd.add_argument("--connect", default="127.0.0.1:7801")
    sd.add_argument("--count", type=int, default=100)
    sd.add_argument("--seed", type=int, default=0)
    sd.add_argument("--rate", type=float)
    sd.add_argument("--data", help="send readings from this dataset directory")
    sd.set_defaults(func=cmd_send)

    mc = sub.add_parser("metrics", help="image quality metrics")
    msub = mc.add_subparsers(dest="metrics_command", required=True)
    mcc = msub.add_parser("compare")
    mcc.add_argument("--real-dir", required=True)
    mcc.add_argument("--fake-dir", required=True)
    mcc.add_argument("--out", default="report.csv")
    mcc.set_defaults(func=cmd_metrics_compare)

    ev = sub.add_parser("evaluate", help="score generated images against a dataset")
    ev.add_argument("--data")
    ev.add_argument("--fake", required=True)
    ev.add_argument("--out")
    ev.add_argument("--seed", type=int)
    ev.set_defaults(func=cmd_evaluate)

    bp = sub.add_parser("budget", help="motion-to-photon latency budget")
    bp.add_argument("--network", action="store_true")
    bp.set_defaults(func=cmd_budget)

    cs = sub.add_parser("controller", help="run the JSON control protocol server")
    csub = cs.add_subparsers(dest="controller_command", required=True)
    css = csub.add_parser("serve")
    css.add_argument("--scene")
    css.add_argument("--host", default="127.0.0.1")
    css.add_argument("--port", type=int, default=0)
    css.set_defaults(func=cmd_controller_serve)

    rt = sub.add_parser("route", help="hop-bounded shortest wavefront route")
    rt.add_argument("--scene")
    rt.add_argument("--src", required=True)
    rt.add_argument("--dst", required=True)
    rt.add_argument("--max-hops", type=int, dest="max_hops")
    rt.set_defaults(func=cmd_route)

    rd = sub.add_parser("route-disjoint", help="disjoint routes for several copies")
    rd.add_argument("--scene")
    rd.add_argument("pair", nargs="+", help="src:dst pairs")
    rd.add_argument("--max-hops", type=int, dest="max_hops")
    rd.set_defaults(func=cmd_route_disjoint)

    bg = sub.add_parser("build-graph", help="print the LoS routing graph")
    bg.add_argument("--scene")
    bg.set_defaults(func=cmd_build_graph)

    pr = sub.add_parser("predict", help="predicted channel for a routed copy")
    pr.add_argument("--scene")
    pr.add_argument("--src", required=True)
    pr.add_argument("--dst", required=True)
    pr.add_argument("--max-hops", type=int, dest="max_hops")
    pr.add_argument("--max-bounce", type=int, dest="max_bounce")
    pr.set_defaults(func=cmd_predict)

    dpl = sub.add_parser("deploy", help="compile a route and emit tile configurations")
    dpl.add_argument("--scene")
    dpl.add_argument("--src", required=True)
    dpl.add_argument("--dst", required=True)
    dpl.add_argument("--continuous", action="store_true", help="skip 2-bit quantization")
    dpl.add_argument("--states-out", help="write per-tile state matrices to this JSON file")
    dpl.add_argument("--max-hops", type=int, dest="max_hops")
    dpl.set_defaults(func=cmd_deploy)

    rr = sub.add_parser("reroute", help="re-solve a route after an endpoint moves")
    rr.add_argument("--scene")
    rr.add_argument("--src", required=True)
    rr.add_argument("--dst", required=True)
    rr.add_argument("--endpoint", required=True)
    rr.add_argument("--position", required=True, help="new x,y,z")
    rr.add_argument("--max-hops", type=int, dest="max_hops")
    rr.set_defaults(func=cmd_reroute)

    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        return args.func(args, config)
    except NoRouteError as exc:
        print(f"no route: {exc}", file=sys.stderr)
        return EXIT_NOROUTE
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (OSError, CorruptManifestError, SizeMismatchError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SceneValidationError, IndexMismatchError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except WavecopyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
