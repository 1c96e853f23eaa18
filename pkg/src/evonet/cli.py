"""Command-line interface: ``evonet {solve,simulate,chains,compare,exponent}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
1 anything else.  Data goes to files or stdout, diagnostics to stderr.
Seeds resolve as ``--seed`` flag, then ``EVONET_SEED``, then the config file.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import RunManifest, compare, estimate_tail_exponent
from .errors import ConfigError, EvonetError, NumericalError
from .kernels import InitialDegreeLaw, KernelParams, ModelPreset, preset_to_kernels
from .rng import RNG_ALGORITHM
from .simulator import (
    SimConfig,
    read_snapshots_csv,
    run_chain_ensemble,
    run_model,
    write_snapshots_csv,
)
from .solver import (
    Classification,
    DegreeDistribution,
    classify,
    select_tail,
    solve_distribution,
)

log = logging.getLogger("evonet")

SEED_ENV = "EVONET_SEED"
CSV_DIGITS = 9


def _num(text):
    """Exact number from a flag or JSON value (``"3/4"`` allowed)."""
    if isinstance(text, bool):
        raise ConfigError("boolean is not a number")
    if isinstance(text, (int, float, Fraction)):
        return text
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"not a number: {text!r}") from None


def _csv_num(x) -> str:
    return format(float(x), f".{CSV_DIGITS}g")


def _read_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def _resolve_seed(flag, cfg) -> int:
    if flag is not None:
        seed = flag
    elif os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer") from None
    else:
        seed = cfg.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed must be an integer in [0, 2^64)")
    return seed


def _preset_from(args, cfg):
    """Preset from flags over the ``preset`` block of the config, or ``None``."""
    block = dict(cfg.get("preset") or {})
    if args.preset is not None:
        block["variant"] = args.preset
    for name in ("m", "m0", "N0"):
        val = getattr(args, name, None)
        if val is not None:
            block[name] = val
    for name in ("p", "q"):
        val = getattr(args, name, None)
        if val is not None:
            block[name] = _num(val)
    if not block:
        return None
    for name in ("p", "q"):
        if name in block:
            block[name] = _num(block[name])
    return ModelPreset.from_dict(block)


def _parse_law(text):
    probs = {}
    for part in text.split(","):
        try:
            k, p = part.split(":")
            probs[int(k)] = _num(p)
        except ValueError:
            raise ConfigError(f"bad --law entry {part!r}; use k:p,k:p") from None
    return InitialDegreeLaw(probs)


def _kernels_from(args, cfg):
    """``(params, law, preset)`` from flags/config; a preset wins if given."""
    preset = _preset_from(args, cfg)
    if preset is not None:
        params, law = preset_to_kernels(preset)
        return params, law, preset
    block = dict(cfg.get("params") or {})
    for name in ("A", "B", "Abar", "Bbar"):
        val = getattr(args, name, None)
        if val is not None:
            block[name] = val
    if not block:
        raise ConfigError("give a --preset or kernel parameters --A --B --Abar [--Bbar]")
    params = KernelParams.from_dict({k: _num(v) for k, v in block.items()})
    if getattr(args, "law", None):
        law = _parse_law(args.law)
    elif "law" in cfg:
        raw = cfg["law"]
        raw = raw.get("d", raw) if isinstance(raw, dict) else raw
        if not isinstance(raw, dict):
            raise ConfigError("law must be a mapping k -> probability")
        law = InitialDegreeLaw({int(k): _num(v) for k, v in raw.items()})
    else:
        raise ConfigError("kernel parameters need an initial degree law (--law k:p,...)")
    return params, law, None


class _Outputs:
    """Collects output files and writes them only after the command succeeded."""

    def __init__(self):
        self.files: list[tuple[Path, str]] = []

    def add(self, path, text: str):
        self.files.append((Path(path), text))

    def commit(self):
        for path, text in self.files:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        return [str(p) for p, _ in self.files]


def _emit(out: _Outputs, path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        out.add(path, text)


def _json(obj) -> str:
    # repr of a float is its shortest exact round-trip form (<= 17 significant digits)
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# distribution <-> JSON


def distribution_to_dict(dist: DegreeDistribution) -> dict:
    cls = dist.classification
    return {
        "params": dist.params.to_dict(),
        "law": dist.law.to_dict(),
        "M": dist.M,
        "P0": dist.head[0],
        "head": list(dist.head),
        "C": dist.tail_constant,
        "tail_g": dist.tail_g,
        "tail_branch": dist.tail_branch,
        "p0_route": dist.p0_route,
        "classification": cls.label,
        "gamma": None if cls.gamma is None else float(cls.gamma),
        "asymptotic_prefactor": dist.asymptotic_prefactor,
    }


def _stored_classification(data, params) -> Classification:
    # keep the recorded exponent: recomputing it from rounded parameters can move the last bit
    cls = classify(params)
    if cls.scale_free and data.get("gamma") is not None:
        return Classification(True, float(data["gamma"]))
    return cls


def distribution_from_dict(data: dict) -> DegreeDistribution:
    """Rebuild a solved distribution from :func:`distribution_to_dict` output."""
    try:
        params = KernelParams.from_dict(data["params"])
        law = InitialDegreeLaw.from_dict(data["law"])
        head = tuple(float(x) for x in data["head"])
        C = float(data["C"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"not a distribution record: {exc}") from None
    return DegreeDistribution(
        params=params,
        law=law,
        head=head,
        tail_constant=C,
        tail_g=float(data.get("tail_g", head[-1] / C if C else 1.0)),
        tail=select_tail(params, law.M),
        classification=_stored_classification(data, params),
        asymptotic_prefactor=data.get("asymptotic_prefactor"),
        p0_route=data.get("p0_route", "unknown"),
    )


def _pmf_csv(dist, kmax) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "p"])
    for k, p in enumerate(dist.pmf(kmax)):
        w.writerow([k, _csv_num(p)])
    return buf.getvalue()


def _snapshots_csv(snapshots) -> str:
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "s.csv"
        write_snapshots_csv(path, snapshots)
        return path.read_text()


def _read_hist(path, t=None) -> np.ndarray:
    """Histogram from ``k,count`` CSV or a pooled snapshot CSV."""
    try:
        with open(path, newline="") as fh:
            header = next(csv.reader(fh), None)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    if header == ["t", "k", "count", "replica"]:
        reps = read_snapshots_csv(path)
        times = sorted({tt for r in reps.values() for tt in r})
        t = times[-1] if t is None else t
        hists = [r[t] for r in reps.values() if t in r]
        if not hists:
            raise ConfigError(f"no snapshot at t={t}")
        out = np.zeros(max(len(h) for h in hists), dtype=np.int64)
        for h in hists:
            out[: len(h)] += h
        return out
    if header != ["k", "count"]:
        raise ConfigError(f"{path}: expected header k,count or t,k,count,replica")
    counts = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                counts[int(row["k"])] = int(row["count"])
            except (TypeError, ValueError):
                raise ConfigError(f"bad row {row}") from None
    if not counts or min(counts) < 0:
        raise ConfigError("empty or negative degrees in histogram")
    h = np.zeros(max(counts) + 1, dtype=np.int64)
    for k, c in counts.items():
        h[k] = c
    return h


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args, out: _Outputs):
    cfg = _read_config(args.config)
    params, law, preset = _kernels_from(args, cfg)
    dist = solve_distribution(params, law)
    kmax = args.kmax if args.kmax is not None else cfg.get("kmax", law.M + 100)
    if kmax < law.M:
        raise ConfigError("--kmax must be >= M")
    record = distribution_to_dict(dist)
    if preset is not None:
        record["preset"] = preset.to_dict()
    if args.csv:
        out.add(args.csv, _pmf_csv(dist, kmax))
    _emit(out, args.json, _json(record))


def _sim_config(args, cfg) -> SimConfig:
    preset = _preset_from(args, cfg)
    if preset is None:
        raise ConfigError("simulation needs a preset")
    T = args.T if args.T is not None else cfg.get("T")
    if T is None:
        raise ConfigError("horizon T is required")
    snaps = args.snapshots if args.snapshots is not None else tuple(cfg.get("snapshots", ()))
    return SimConfig(
        preset=preset,
        T=T,
        R=args.R if args.R is not None else cfg.get("R", 1),
        seed=_resolve_seed(args.seed, cfg),
        multi_edge_policy=args.policy or cfg.get("multi_edge_policy", "resample"),
        snapshots=tuple(snaps),
    )


def _manifest(command, config, seed):
    return RunManifest(command=command, config=config, seed=seed, code_version=__version__, rng=RNG_ALGORITHM)


def cmd_simulate(args, out: _Outputs):
    cfg = _read_config(args.config)
    config = _sim_config(args, cfg)
    manifest = _manifest("simulate", config.to_dict(), config.seed)
    res = run_model(config)
    _emit(out, args.out, _snapshots_csv(res.snapshots))
    manifest.outputs = [p for p in (args.out,) if p not in (None, "-")]
    manifest.finish()
    meta = json.loads(manifest.to_json())
    meta["stats"] = res.stats
    meta["multi_edge_policy"] = config.multi_edge_policy
    if args.meta:
        out.add(args.meta, _json(meta))


def _chain_args(args, cfg):
    params, law, preset = _kernels_from(args, cfg)
    T = args.T if args.T is not None else cfg.get("T")
    if T is None:
        raise ConfigError("horizon T is required")
    R = args.R if args.R is not None else cfg.get("R", 1)
    seed = _resolve_seed(args.seed, cfg)
    snaps = args.snapshots if args.snapshots is not None else tuple(cfg.get("snapshots", ()))
    cap = args.cap if args.cap is not None else cfg.get("degree_cap", 10_000)
    return params, law, preset, int(T), int(R), seed, tuple(snaps), int(cap)


def cmd_chains(args, out: _Outputs):
    cfg = _read_config(args.config)
    params, law, preset, T, R, seed, snaps, cap = _chain_args(args, cfg)
    res = run_chain_ensemble(params, law, T, R, seed, snaps, degree_cap=cap)
    snapshots = [{t: res.histogram(t, r) for t in res.snapshots} for r in range(R)]
    _emit(out, args.out, _snapshots_csv(snapshots))
    if args.meta:
        config = {"params": params.to_dict(), "law": law.to_dict(), "T": T, "R": R, "snapshots": list(res.snapshots), "degree_cap": cap}
        manifest = _manifest("chains", config, seed)
        manifest.outputs = [p for p in (args.out,) if p not in (None, "-")]
        manifest.finish()
        meta = json.loads(manifest.to_json())
        meta.update(t0=res.t0, overflow={str(t): res.overflow(t) for t in res.snapshots})
        out.add(args.meta, _json(meta))


def cmd_compare(args, out: _Outputs):
    cfg = _read_config(args.config)
    if args.engine == "graph":
        config = _sim_config(args, cfg)
        params, law = preset_to_kernels(config.preset)
        hist = run_model(config).pooled()
        seed = config.seed
    else:
        params, law, _, T, R, seed, snaps, cap = _chain_args(args, cfg)
        hist = run_chain_ensemble(params, law, T, R, seed, snaps, degree_cap=cap).pooled()
    dist = solve_distribution(params, law)
    K = args.K if args.K is not None else max(len(hist) - 1, law.M)
    kmin = args.kmin if args.kmin is not None else max(1, law.M)
    report = compare(dist, hist, K, k_min=kmin, auto_kmin=args.auto_kmin)
    record = report.to_dict()
    record["seed"] = seed
    record["engine"] = args.engine
    if args.csv:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "p_analytic", "p_empirical", "abs_err"])
        for k, pa, pe, err in report.per_k:
            w.writerow([k, _csv_num(pa), _csv_num(pe), _csv_num(err)])
        out.add(args.csv, buf.getvalue())
    _emit(out, args.json, _json(record))


def cmd_exponent(args, out: _Outputs):
    hist = _read_hist(args.hist, args.t)
    fit = estimate_tail_exponent(hist, args.kmin, auto_kmin=args.auto_kmin)
    record = fit.to_dict()
    record["gamma_hat"] = fit.gamma
    _emit(out, args.json, _json(record))


# ---------------------------------------------------------------------------
# parser


def _snapshot_list(text):
    try:
        return tuple(int(float(x)) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError("snapshots must be comma-separated integers") from None


def _add_preset(p):
    g = p.add_argument_group("model preset")
    g.add_argument("--preset", help="ba-del, group-del or add-rewire (or the full variant name)")
    g.add_argument("--m", type=int)
    g.add_argument("--m0", type=int)
    g.add_argument("--N0", type=int)
    g.add_argument("--p", help="add-edge probability (add-rewire)")
    g.add_argument("--q", help="rewire probability (add-rewire)")


def _add_kernels(p):
    g = p.add_argument_group("explicit kernels")
    for name in ("A", "B", "Abar", "Bbar"):
        g.add_argument(f"--{name}", help="number or fraction like 3/4")
    g.add_argument("--law", help="newborn degree law as k:p,k:p")


def _add_run(p, chains=False):
    p.add_argument("--T", type=int)
    p.add_argument("--R", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--snapshots", type=_snapshot_list)
    if chains:
        p.add_argument("--cap", type=int, help="degree cap (default 10000)")
    else:
        p.add_argument("--policy", choices=("allow", "resample"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="evonet", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="exact steady degree distribution")
    p.add_argument("--config")
    _add_preset(p)
    _add_kernels(p)
    p.add_argument("--kmax", type=int, help="last degree in the CSV (default M+100)")
    p.add_argument("--csv", help="write k,p rows here")
    p.add_argument("--json", help="write the summary here instead of stdout")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="graph simulation snapshots")
    p.add_argument("--config")
    _add_preset(p)
    _add_run(p)
    p.add_argument("--out", help="snapshot CSV (default stdout)")
    p.add_argument("--meta", help="run metadata JSON")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("chains", help="chain-ensemble snapshots")
    p.add_argument("--config")
    _add_preset(p)
    _add_kernels(p)
    _add_run(p, chains=True)
    p.add_argument("--out", help="snapshot CSV (default stdout)")
    p.add_argument("--meta", help="run metadata JSON")
    p.set_defaults(func=cmd_chains)

    p = sub.add_parser("compare", help="simulate and compare with the exact law")
    p.add_argument("--config")
    p.add_argument("--engine", choices=("graph", "chains"), default="graph")
    _add_preset(p)
    _add_kernels(p)
    _add_run(p, chains=True)
    p.add_argument("--policy", choices=("allow", "resample"))
    p.add_argument("--K", type=int)
    p.add_argument("--kmin", type=int)
    p.add_argument("--auto-kmin", action="store_true")
    p.add_argument("--csv", help="per-k table k,p_analytic,p_empirical,abs_err")
    p.add_argument("--json")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("exponent", help="tail exponent of a histogram")
    p.add_argument("--hist", required=True, help="k,count CSV or snapshot CSV")
    p.add_argument("--t", type=int, help="snapshot time (default last)")
    p.add_argument("--kmin", type=int, default=1)
    p.add_argument("--auto-kmin", action="store_true")
    p.add_argument("--json")
    p.set_defaults(func=cmd_exponent)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    out = _Outputs()
    try:
        args.func(args, out)
        out.commit()
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except NumericalError as exc:
        log.error("numerical failure (%s): %s", type(exc).__name__, exc)
        return 3
    except EvonetError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
