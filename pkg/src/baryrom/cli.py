"""Experiment harness: generate snapshots, train, evaluate, compare to POD.

Subcommands: generate, offline, online, pod, tables, diag, landscape.
Exit codes: 0 success, 2 configuration/usage error, 3 store/model data
error, 4 computation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics, flow, greedy, online, pod, store, transport
from .config import ConfigError, ExperimentConfig, load_config, load_preset, parse_config
from .store import StoreError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STORE = 3
EXIT_COMPUTE = 4

DEFAULT_EPS = (0.1, 0.05, 0.01, 0.005)
UNREACHED = "-"


def _load_config_arg(spec: str) -> ExperimentConfig:
    path = Path(spec)
    if path.exists():
        return load_config(path)
    if spec in ("example1", "example2"):
        return load_preset(spec)
    raise ConfigError(f"config {spec!r}: no such file and not a bundled preset")


def _simulate_combo(raw_config: dict, combo: dict):
    """One full simulation for a parameter combination; returns store rows."""
    cfg = parse_config(raw_config)
    snaps = flow.run_simulation(
        grid=cfg.grid,
        rock=cfg.rock_at(combo),
        fluids=cfg.fluids_at(combo),
        bc=cfg.boundary,
        snapshot_times_yr=cfg.snapshot_times_yr,
        y_params=tuple(combo[ax.name] for ax in cfg.axes),
        safety=cfg.cfl_safety,
    )
    params = np.array([snap.z for snap in snaps])
    values = np.array([snap.values for snap in snaps])
    masses = np.array([snap.mass for snap in snaps])
    return params, values, masses


def cmd_generate(args) -> int:
    cfg = _load_config_arg(args.config)
    combos = cfg.combos()
    manifest = store.store_manifest(
        cfg.raw, cfg.axis_names, len(combos), len(cfg.snapshot_times_yr)
    )
    out = store.init_store_dir(args.out, manifest, force=args.force)
    todo = [i for i in range(len(combos)) if not store.chunk_path(out, i).exists()]
    print(
        f"{cfg.name}: {len(combos)} simulations x {len(cfg.snapshot_times_yr)} "
        f"snapshot times ({len(todo)} to run, {len(combos) - len(todo)} resumed)"
    )
    failures = []
    if args.jobs > 1 and todo:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = {i: pool.submit(_simulate_combo, cfg.raw, combos[i]) for i in todo}
            for i in todo:
                try:
                    params, values, masses = futures[i].result()
                except flow.FlowError as err:
                    failures.append((combos[i], str(err)))
                    continue
                store.write_chunk(out, i, params, values, masses)
    else:
        for i in todo:
            try:
                params, values, masses = _simulate_combo(cfg.raw, combos[i])
            except flow.FlowError as err:
                failures.append((combos[i], str(err)))
                continue
            store.write_chunk(out, i, params, values, masses)
    if failures:
        for combo, msg in failures:
            print(f"FAILED {combo}: {msg}", file=sys.stderr)
        print(f"{len(failures)} simulations failed; store left resumable", file=sys.stderr)
        return EXIT_COMPUTE
    store.consolidate_store(out, len(combos))
    loaded = store.load_store(out)
    print(f"store complete: {loaded.count} snapshots in {out}")
    return EXIT_OK


def _training_icdfs(snapshot_store: store.SnapshotStore) -> np.ndarray:
    m = snapshot_store.n_cells + 2
    train = np.empty((m, snapshot_store.count))
    for k in range(snapshot_store.count):
        train[:, k] = transport.snapshot_to_icdf(
            snapshot_store.values[k], m, snapshot_store.x_min, snapshot_store.x_max
        )
    return train


def cmd_offline(args) -> int:
    st = store.load_store(args.store)
    cfg = parse_config(st.config)
    eps_abs = cfg.greedy.eps_abs if args.eps_abs is None else args.eps_abs
    eps_rel = cfg.greedy.eps_rel if args.eps_rel is None else args.eps_rel
    n_max = cfg.greedy.n_max if args.n_max is None else args.n_max
    qp_tol = cfg.qp.tol if args.qp_tol is None else args.qp_tol
    qp_max_iter = cfg.qp.max_iter if args.qp_max_iter is None else args.qp_max_iter

    print(f"{st.name}: building {st.count} training icdfs")
    train = _training_icdfs(st)
    l1_mean, l1_max = [], []

    def track_l1(n, indices, weights, errors):
        atoms = train[:, indices]
        rels = np.empty(st.count)
        for k in range(st.count):
            rec = online.profile_from_weights(
                atoms, weights[:, k], st.masses[k], st.n_cells, st.x_min, st.x_max
            )
            truth = st.values[k]
            denom = np.abs(truth).sum()
            rels[k] = np.abs(rec - truth).sum() / denom if denom > 0 else 0.0
        l1_mean.append(float(rels.mean()))
        l1_max.append(float(rels.max()))
        print(
            f"  n={n}: max W2 {errors.max():.3e}, mean W2 {errors.mean():.3e}, "
            f"mean rel L1 {rels.mean():.3e}"
        )

    dictionary, report, final_weights = greedy.run(
        train,
        st.params,
        eps_abs=eps_abs,
        eps_rel=eps_rel,
        n_max=n_max,
        tol=qp_tol,
        max_iter=qp_max_iter,
        on_iteration=track_l1,
    )
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    model = online.fit(
        dictionary,
        st.params,
        final_weights,
        st.masses,
        st.axis_names,
        n_raw=st.n_cells,
        x_min=st.x_min,
        x_max=st.x_max,
    )
    store.save_model(args.out, model, report, l1_mean, l1_max)
    print(
        f"model saved to {args.out}: {dictionary.size} atoms, "
        f"terminated by {report.termination!r}"
    )
    return EXIT_OK


def _parse_point(model: online.ReducedModel, spec: dict) -> np.ndarray:
    missing = [name for name in model.axis_names if name not in spec]
    extra = [name for name in spec if name not in model.axis_names]
    if missing or extra:
        raise ConfigError(
            f"parameter point must set exactly {list(model.axis_names)}; "
            f"missing {missing}, unknown {extra}"
        )
    return np.array([float(spec[name]) for name in model.axis_names])


def cmd_online(args) -> int:
    model = store.load_model(args.model)
    specs: list[dict] = []
    if args.params_file:
        payload = json.loads(Path(args.params_file).read_text())
        if not isinstance(payload, list):
            raise ConfigError("params file must hold a JSON list of objects")
        specs.extend(payload)
    for item in args.at or []:
        spec = {}
        for part in item.split(","):
            name, _, value = part.partition("=")
            if not _:
                raise ConfigError(f"cannot parse --at component {part!r}")
            spec[name.strip()] = float(value)
        specs.append(spec)
    if not specs:
        raise ConfigError("no evaluation points: pass --params-file and/or --at")
    points = np.array([_parse_point(model, spec) for spec in specs])

    profiles = np.array(
        [online.reconstruct(model, z, clamp=args.clamp) for z in points]
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    np.savez(out / "reconstructions.npz", params=points, profiles=profiles)

    rows = []
    if args.store:
        st = store.load_store(args.store)
        for q, z in enumerate(points):
            match = np.flatnonzero(np.all(st.params == z[None, :], axis=1))
            if match.size == 0:
                continue
            truth = st.values[match[0]]
            denom = np.abs(truth).sum()
            err = np.abs(profiles[q] - truth).sum() / denom if denom > 0 else 0.0
            rows.append(tuple(z) + (err,))
        store.write_csv(
            out / "errors.csv",
            tuple(model.axis_names) + ("rel_l1_error",),
            rows,
        )
    print(f"wrote {points.shape[0]} reconstructions ({len(rows)} with truth) to {out}")
    return EXIT_OK


def _parse_eps(text: str | None):
    if not text:
        return DEFAULT_EPS
    try:
        eps = tuple(float(part) for part in text.split(","))
    except ValueError as err:
        raise ConfigError(f"cannot parse epsilon list {text!r}") from err
    if not eps or any(e <= 0 for e in eps):
        raise ConfigError("epsilon list must hold positive numbers")
    return eps


def _pod_artifacts(st: store.SnapshotStore):
    snaps = st.values.T  # (N, K)
    basis = pod.compute(snaps)
    errors = pod.relative_l1_errors(basis, snaps)
    return basis, errors


def cmd_pod(args) -> int:
    st = store.load_store(args.store)
    eps_list = _parse_eps(args.eps)
    basis, errors = _pod_artifacts(st)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    np.savez(out / "basis.npz", modes=basis.modes, singular_values=basis.singular_values)
    means = errors.mean(axis=1)
    maxes = errors.max(axis=1)
    store.write_csv(
        out / "pod_errors.csv",
        ("n", "mean_rel_l1", "max_rel_l1"),
        [(n + 1, means[n], maxes[n]) for n in range(basis.rank)],
    )
    rows = []
    for eps in eps_list:
        hits = np.flatnonzero(means < eps)
        rows.append((eps, int(hits[0]) + 1 if hits.size else UNREACHED))
    store.write_csv(out / "pod_table.csv", ("epsilon", "n_pod"), rows)
    print(f"POD table written to {out} (rank {basis.rank})")
    return EXIT_OK


def cmd_tables(args) -> int:
    st = store.load_store(args.store)
    report, l1_mean, _ = store.load_model_report(args.model)
    eps_list = _parse_eps(args.eps)
    _, pod_errors = _pod_artifacts(st)
    pod_means = pod_errors.mean(axis=1)
    sizes = np.asarray(report.sizes)
    rows = []
    for eps in eps_list:
        gbar_hits = np.flatnonzero(l1_mean < eps)
        pod_hits = np.flatnonzero(pod_means < eps)
        rows.append(
            (
                eps,
                int(sizes[gbar_hits[0]]) if gbar_hits.size else UNREACHED,
                int(pod_hits[0]) + 1 if pod_hits.size else UNREACHED,
            )
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    store.write_csv(out / "tables.csv", ("epsilon", "n_gbar", "n_pod"), rows)
    print(f"joint table written to {out / 'tables.csv'}")
    return EXIT_OK


def cmd_diag(args) -> int:
    report, _, _ = store.load_model_report(args.model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    store.write_csv(out / "condition.csv", ("n", "condition"), diagnostics.condition_curve(report))
    store.write_csv(out / "volume.csv", ("n", "volume"), diagnostics.volume_curve(report))
    print(f"diagnostic curves written to {out}")
    return EXIT_OK


def cmd_landscape(args) -> int:
    model = store.load_model(args.model)
    st = store.load_store(args.store)
    n = args.n
    if n < 3 or n > model.n_atoms:
        raise ConfigError(f"landscape needs 3 <= n <= {model.n_atoms} atoms, got {n}")
    if not 0 <= args.target_index < st.count:
        raise ConfigError(f"target index outside store (0..{st.count - 1})")
    target = transport.snapshot_to_icdf(
        st.values[args.target_index], st.n_cells + 2, st.x_min, st.x_max
    )
    grid = diagnostics.energy_landscape(
        model.dictionary.atoms[:, :n], target, resolution=args.resolution
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = ("x", "y") + tuple(f"lam_{i + 1}" for i in range(n)) + ("log10_w2",)
    rows = [
        tuple(grid.xy[p]) + tuple(grid.weights[p]) + (grid.log10_w2[p],)
        for p in range(grid.xy.shape[0])
    ]
    store.write_csv(out / "landscape.csv", header, rows)
    print(f"landscape ({grid.xy.shape[0]} pixels) written to {out / 'landscape.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="baryrom",
        description="Barycentric model reduction of 1D two-phase porous-media flow",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="run the parametric snapshot sweep")
    p.add_argument("--config", required=True, help="config JSON path or preset name")
    p.add_argument("--out", required=True, help="snapshot store directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel simulations")
    p.add_argument("--force", action="store_true", help="overwrite a mismatching store")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("offline", help="greedy dictionary + reduced model")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True, help="model directory")
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--eps-abs", type=float, default=None)
    p.add_argument("--eps-rel", type=float, default=None)
    p.add_argument("--qp-tol", type=float, default=None)
    p.add_argument("--qp-max-iter", type=int, default=None)
    p.set_defaults(func=cmd_offline)

    p = sub.add_parser("online", help="reconstruct at new parameter points")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--params-file", default=None, help="JSON list of parameter objects")
    p.add_argument("--at", action="append", help="inline point, e.g. t=1.0,mu=3,beta=2")
    p.add_argument("--store", default=None, help="snapshot store for truth errors")
    p.add_argument("--clamp", action="store_true", help="clamp out-of-range points")
    p.set_defaults(func=cmd_online)

    p = sub.add_parser("pod", help="POD baseline table")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--eps", default=None, help="comma-separated tolerances")
    p.set_defaults(func=cmd_pod)

    p = sub.add_parser("tables", help="joint atoms-vs-POD tolerance table")
    p.add_argument("--store", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--eps", default=None)
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("diag", help="re-emit conditioning and volume curves")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diag)

    p = sub.add_parser("landscape", help="Wachspress energy landscape CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=3, help="number of atoms (>= 3)")
    p.add_argument("--target-index", type=int, required=True)
    p.add_argument("--resolution", type=int, default=201)
    p.set_defaults(func=cmd_landscape)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except StoreError as err:
        print(f"store error: {err}", file=sys.stderr)
        return EXIT_STORE
    except (flow.FlowError, online.OutOfRangeError, online.NotOnTensorGridError) as err:
        print(f"computation error: {err}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
