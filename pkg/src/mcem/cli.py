"""Command-line front end: simulate, gap, reach, path, crossing, event-prob,
classify.

Every subcommand validates its config before doing work, supports --dry-run
(print the resolved plan, compute nothing) and --json (write a JSON mirror
next to the CSV), and derives all randomness from one counter-based seed so
identical invocations produce byte-identical output bodies.  Exit codes:
0 success, 2 configuration error, 3 cap exceeded, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from .lattice import CapExceeded, SpecError
from .config import RunConfig, load_config, stream
from . import dynamics, reachability, spectral, renorm, paths

CSV_HEADER = "# mcem-csv v1"
PATH_HEADER = "# mcem-path v1"


def _fmt(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return "%.17g" % x
    return str(x)


def write_csv(path, columns, rows, json_mirror=False):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    body = buf.getvalue()
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        fh.write(body)
    if json_mirror:
        data = [dict(zip(columns, (_fmt(v) for v in row))) for row in rows]
        with open(str(path) + ".json", "w") as fh:
            json.dump(data, fh, indent=1, sort_keys=True)
            fh.write("\n")


def _describe(cfg: RunConfig):
    return (
        f"d={cfg.spec.d} G={'+'.join(cfg.spec.state_label(c) for c in range(1, cfg.spec.n_states))} "
        f"q={','.join('%g' % v for v in cfg.spec.q)} p={cfg.spec.p:g} "
        f"region=origin{cfg.region.origin}sides{cfg.region.sides} "
        f"boundary={type(cfg.boundary).__name__} seed={cfg.seed}"
    )


def _bits(text):
    try:
        bits = tuple(int(ch) for ch in text)
    except ValueError:
        raise SpecError(f"not a bit string: {text!r}") from None
    if any(b not in (0, 1) for b in bits):
        raise SpecError(f"not a bit string: {text!r}")
    return bits


def _ints(text, n=None, what="integer list"):
    try:
        vals = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise SpecError(f"bad {what}: {text!r}") from None
    if n is not None and len(vals) != n:
        raise SpecError(f"{what} needs {n} entries, got {text!r}")
    return vals


def _region_str(region):
    return "origin=" + ",".join(map(str, region.origin)) + ";sides=" + ",".join(
        map(str, region.sides)
    )


def cmd_simulate(args):
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    if args.dry_run:
        print(f"simulate: {_describe(cfg)} t_max={args.t_max} engine={args.engine}")
        return 0
    rng = stream(seed, 1)
    init = cfg.initial_configuration(rng=stream(seed, 0))
    traj = dynamics.kmc_run(cfg.spec, init, args.t_max, rng, engine=args.engine)
    rows = [
        (t, i, cfg.spec.state_label(old), cfg.spec.state_label(new))
        for t, i, old, new in traj.events
    ]
    write_csv(args.out, ["time", "site_index", "old_state", "new_state"], rows,
              json_mirror=args.json)
    if args.marginals:
        occ = dynamics.empirical_marginals(
            traj, burn_in=args.burn_in, n_states=cfg.spec.n_states
        )
        mrows = [
            (i, cfg.spec.state_label(s), occ[i, s])
            for i in range(occ.shape[0])
            for s in range(occ.shape[1])
        ]
        write_csv(args.marginals, ["site_index", "state", "occupancy"], mrows,
                  json_mirror=args.json)
    return 0


def cmd_gap(args):
    cfg = load_config(args.config)
    models = [cfg.spec]
    if args.subset:
        sub_types = [_bits(part) for part in args.subset.split(",")]
        sub_q = []
        for h in sub_types:
            if h not in cfg.spec.types:
                raise SpecError(f"subset type {h} is not in the vacancy set")
            sub_q.append(cfg.spec.q[cfg.spec.types.index(h)])
        from .lattice import validate_params

        models.append(validate_params(cfg.spec.d, sub_types, sub_q))
    if args.dry_run:
        print(f"gap: {_describe(cfg)} models={len(models)}")
        return 0
    rows = []
    for spec in models:
        gen = spectral.build_generator(spec, cfg.region, cfg.boundary, cap=args.cap)
        gap = spectral.spectral_gap_exact(gen)
        qmin = min(spec.q)
        rows.append(
            (
                _region_str(cfg.region),
                type(cfg.boundary).__name__,
                "+".join(spec.state_label(c) for c in range(1, spec.n_states)),
                ";".join("%.17g" % v for v in spec.q),
                gap,
                spectral.east_gap_asymptotic(qmin, spec.d),
                gap > 0,
            )
        )
    write_csv(
        args.out,
        ["region", "boundary", "G", "q", "gap_exact", "gap_reference_east", "ergodic"],
        rows,
        json_mirror=args.json,
    )
    return 0


def _read_states_file(spec, region, boundary, path):
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    labels = data.get("states")
    if labels is None or len(labels) != region.size:
        raise SpecError(f"{path} must hold a 'states' list covering the region")
    from .config import parse_state
    from .lattice import Configuration

    arr = np.array([parse_state(spec, lab) for lab in labels], dtype=np.uint8)
    return Configuration(region, arr, boundary)


def cmd_reach(args):
    cfg = load_config(args.config)
    if args.dry_run:
        print(f"reach: {_describe(cfg)} cap={args.cap}")
        return 0
    start = (
        _read_states_file(cfg.spec, cfg.region, cfg.boundary, getattr(args, "from"))
        if getattr(args, "from")
        else cfg.initial_configuration()
    )
    reached = reachability.reachable_set(cfg.spec, start, cap=args.cap)
    target_reachable = ""
    path_length = ""
    if args.to:
        goal = _read_states_file(cfg.spec, cfg.region, cfg.boundary, args.to)
        found = reachability.find_legal_path(cfg.spec, start, goal, cap=args.cap)
        target_reachable = found is not None
        path_length = found.length if found else -1
    write_csv(
        args.out,
        ["n_reachable", "truncated", "target_reachable", "path_length"],
        [(len(reached), reached.truncated, target_reachable, path_length)],
        json_mirror=args.json,
    )
    return 0


def _build_lemma_path(args):
    if args.lemma == "hd-good":
        if args.k is None or args.d is None:
            raise SpecError("hd-good needs --d and --k <k>")
        k = _ints(args.k, what="slab height")[0]
        cfg0, path = paths.build_hd_good_path(args.d, k)
        spec = paths.shared_direction_spec(args.d)
        return spec, cfg0, path
    if args.lemma == "move-good":
        if args.d != 2 or args.k is None:
            raise SpecError("move-good needs --d 2 and --k k1,k2")
        k = _ints(args.k, n=2, what="per-axis distances")
        spec = paths.star_spec_2d()
        cfg0 = paths.canonical_move_good_config(spec, k)
        return spec, cfg0, paths.build_move_good_path(spec, cfg0, k)
    if args.lemma == "move-good2":
        if args.d != 2 or args.n is None or args.k is None:
            raise SpecError("move-good2 needs --d 2, --n N and --k k1,k2")
        k = _ints(args.k, n=2, what="per-axis distances")
        spec = paths.star_spec_2d()
        cfg0 = paths.canonical_move_good2_config(spec, args.n, k)
        return spec, cfg0, paths.build_move_good2_path(spec, cfg0, args.n, k)
    raise SpecError(f"unknown lemma {args.lemma!r}")


def cmd_path(args):
    if args.verify:
        return _verify_path_file(args.verify)
    if args.dry_run:
        print(f"path: lemma={args.lemma} d={args.d} k={args.k} n={args.n}")
        return 0
    spec, cfg0, path = _build_lemma_path(args)
    with open(args.out, "w") as fh:
        fh.write(PATH_HEADER + "\n")
        fh.write(
            f"# lemma={args.lemma} d={args.d} k={args.k or ''} n={args.n or ''}\n"
        )
        for step in path.steps:
            idx = cfg0.region.index(step.site)
            bits = "".join(str(b) for b in step.h)
            fh.write(f"{idx} {bits} {'+' if step.to_vacancy else '-'}\n")
    return 0


def _verify_path_file(fname):
    with open(fname) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != PATH_HEADER:
        raise SpecError("not a path file")
    meta = dict(
        part.split("=", 1) for part in lines[1].lstrip("# ").split() if "=" in part
    )
    ns = argparse.Namespace(
        lemma=meta["lemma"],
        d=int(meta["d"]),
        k=meta.get("k") or None,
        n=int(meta["n"]) if meta.get("n") else None,
    )
    spec, cfg0, _ = _build_lemma_path(ns)
    builder = reachability.PathBuilder(spec, cfg0)
    for ln in lines[2:]:
        idx, bits, direction = ln.split()
        site = cfg0.region.coord(int(idx))
        code = spec.code(tuple(int(b) for b in bits))
        builder.flip(site, code)
    report = reachability.verify_legal_path(spec, builder.path())
    if not report.valid:
        raise SpecError(f"path invalid at step {report.first_bad_index}")
    print(f"path ok: {report.length} configurations, {len(report.touched_sites)} sites touched")
    return 0


def cmd_crossing(args):
    cfg = load_config(args.config)
    h = _bits(args.h)
    if h not in cfg.spec.types:
        raise SpecError(f"type {h} is not in the vacancy set")
    dl, dn = renorm.default_grid_params(cfg.spec, h)
    out_of_regime = args.ell < dl or args.n < dn
    if args.dry_run:
        print(
            f"crossing: {_describe(cfg)} h={args.h} ell={args.ell} n={args.n} "
            f"orientation={args.orientation} samples={args.samples} "
            f"out_of_regime={out_of_regime}"
        )
        return 0
    seed = cfg.seed if args.seed is None else args.seed
    res = renorm.crossing_failure_mc(
        cfg.spec, h, args.ell, args.n, args.orientation, args.samples,
        stream(seed, 0)
    )
    write_csv(
        args.out,
        ["h", "ell", "n", "orientation", "samples", "failures", "estimate",
         "ci_lo", "ci_hi", "support_size", "out_of_regime"],
        [(args.h, args.ell, args.n, args.orientation, res["samples"],
          res["failures"], res["estimate"], res["ci_lo"], res["ci_hi"],
          res["support_size"], out_of_regime)],
        json_mirror=args.json,
    )
    return 0


def cmd_event_prob(args):
    cfg = load_config(args.config)
    params = {}
    for key, val in (
        ("ell", args.ell), ("n", args.n), ("w", args.w),
        ("L_B", args.L_B), ("L_C", args.L_C),
    ):
        if val is not None:
            params[key] = val
    if args.dry_run:
        print(f"event-prob: {_describe(cfg)} event={args.event} params={params}")
        return 0
    seed = cfg.seed if args.seed is None else args.seed
    res = renorm.event_probability_mc(
        cfg.spec, args.event, params, args.samples, stream(seed, 0)
    )
    write_csv(
        args.out,
        ["event", "params", "samples", "failures", "estimate", "ci_lo", "ci_hi",
         "support_size", "support_failure_product"],
        [(args.event,
          ";".join(f"{k}={v}" for k, v in sorted(params.items())),
          res["samples"], res["failures"], res["estimate"], res["ci_lo"],
          res["ci_hi"], res["support_size"], res["support_failure_product"])],
        json_mirror=args.json,
    )
    return 0


def cmd_classify(args):
    cfg = load_config(args.config)
    if cfg.initial is None:
        raise SpecError("classify needs an explicit [initial] state in the config")
    j = _ints(args.block, n=2, what="block index")
    if args.dry_run:
        print(f"classify: {_describe(cfg)} scheme={args.scheme} block={j}")
        return 0
    state = cfg.initial
    if args.scheme == "box-3ii":
        if args.L is None:
            raise SpecError("box-3ii needs --L")
        cls = renorm.classify_box_3ii(cfg.spec, state, j, args.L)
        write_csv(
            args.out,
            ["scheme", "block", "traversable", "super", "evil"],
            [("box-3ii", args.block, cls.traversable, cls.super_, cls.evil)],
            json_mirror=args.json,
        )
    elif args.scheme == "block-3iii":
        cls = renorm.classify_block_3iii(cfg.spec, state, j)
        write_csv(
            args.out,
            ["scheme", "block", "b_traversable", "b_super", "ac_traversable",
             "ac_super"],
            [("block-3iii", args.block, cls.b_traversable, cls.b_super,
              cls.ac_traversable, cls.ac_super)],
            json_mirror=args.json,
        )
    else:
        raise SpecError(f"unknown scheme {args.scheme!r}")
    return 0


def build_parser():
    top = argparse.ArgumentParser(prog="mcem", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", required=True)
        p.add_argument("--dry-run", action="store_true")
        p.add_argument("--json", action="store_true")
        if out:
            p.add_argument("--out", required=False, default=None)

    p = sub.add_parser("simulate", help="kinetic Monte Carlo trajectory")
    common(p)
    p.add_argument("--t-max", type=float, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--engine", choices=["clock", "gillespie"], default="clock")
    p.add_argument("--marginals", default=None)
    p.add_argument("--burn-in", type=float, default=0.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gap", help="exact spectral gap of the finite volume")
    common(p)
    p.add_argument("--subset", default=None,
                   help="comma-separated bit strings selecting G'")
    p.add_argument("--cap", type=int, default=2 * 10 ** 6)
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("reach", help="reachability closure and path search")
    common(p)
    p.add_argument("--from", dest="from", default=None)
    p.add_argument("--to", default=None)
    p.add_argument("--cap", type=int, default=10 ** 6)
    p.set_defaults(func=cmd_reach)

    p = sub.add_parser("path", help="constructive lemma paths")
    p.add_argument("--lemma", choices=["hd-good", "move-good", "move-good2"])
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--k", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--verify", default=None)
    p.add_argument("--dry-run", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("crossing", help="hard-crossing failure probability")
    common(p)
    p.add_argument("--h", default="11")
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--orientation", choices=["vertical", "horizontal"],
                   default="vertical")
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_crossing)

    p = sub.add_parser("event-prob", help="failure probability of a named event")
    common(p)
    p.add_argument("--event", required=True, choices=sorted(renorm.EVENTS))
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--ell", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--w", type=int, default=None)
    p.add_argument("--L-B", type=int, default=None)
    p.add_argument("--L-C", type=int, default=None)
    p.set_defaults(func=cmd_event_prob)

    p = sub.add_parser("classify", help="traversability flags of one block")
    common(p)
    p.add_argument("--scheme", choices=["box-3ii", "block-3iii"], required=True)
    p.add_argument("--block", required=True)
    p.add_argument("--L", type=int, default=None)
    p.set_defaults(func=cmd_classify)

    return top


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if (
            not args.dry_run
            and getattr(args, "out", None) is None
            and getattr(args, "verify", None) is None
        ):
            raise SpecError("--out is required unless --dry-run or --verify")
        return args.func(args)
    except SpecError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CapExceeded as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return 3
    except spectral.NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
