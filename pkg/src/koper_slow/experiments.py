"""Presets that reproduce the reference figures and the manifold diagnostics.

Each ``run_*`` function takes an :class:`~koper_slow.config.ExperimentConfig`,
writes its artifacts under ``out_dir`` and finishes with ``manifest.json``.
The manifest stores the canonical config text, so
:func:`rerun_from_manifest` regenerates byte-identical CSV files.
"""
from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from . import plots
from .config import ExperimentConfig, parse_config, serialize
from .errors import BlowUpError, InputError, KoperError
from .integrators import EULER_MARUYAMA, RK4_DETERMINISTIC, RK4_RANDOM, integrate_em, integrate_rk4_deterministic
from .manifold import (
    exponential_tracking,
    lp_iterate,
    make_setup,
    manifold_graph,
    truncation_horizon,
)
from .model import KoperParams, estimate_lipschitz
from .noise import sample_uniform_path

OUT_DIR_ENV = "KOPER_OUT_DIR"

FIG1_ALPHAS = (0.8, 1.6, 1.9)
FIG2_SIGMAS = (0.1, 0.5, 0.8)

# Default cutoff configuration for the manifold and tracking presets.
DEFAULT_CUTOFF = 5.0
MANIFOLD_BOX = ((-8.0, 8.0), (-6.0, 6.0), (-6.0, 6.0))
MANIFOLD_GRID = {"y_min": -2.8, "y_max": -1.8, "z_min": -1.0, "z_max": 0.0, "n_y": 11, "n_z": 11}
LP_DEFAULTS = {"lp_dt": 1e-4, "tol": 1e-8, "trunc_tol": 1e-8}
TRACKING_DEFAULTS = {"y0": -2.3, "z0": -0.5, "offset": 0.1, "t_end": 0.01, "dt": 1e-5}
PATH_DT = 2.5e-5


@dataclass
class ArtifactSet:
    """Files written by one preset run (names relative to ``out_dir``)."""

    preset: str
    out_dir: str
    files: list = field(default_factory=list)
    runs: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    manifest: str | None = None

    @property
    def csv_files(self):
        return [f for f in self.files if f.endswith(".csv")]

    @property
    def svg_files(self):
        return [f for f in self.files if f.endswith(".svg")]


def default_out_dir() -> str:
    return os.environ.get(OUT_DIR_ENV, "koper_out")


def _out_dir(cfg: ExperimentConfig) -> str:
    out = cfg.out_dir or default_out_dir()
    os.makedirs(out, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise InputError(f"output directory {out!r} is not writable")
    return out


def _write_manifest(art: ArtifactSet, cfg: ExperimentConfig, extra: dict):
    manifest = {
        "preset": cfg.preset,
        "version": __version__,
        "config": serialize(cfg.with_(out_dir=None)),
        "seed": cfg.seed,
        "runs": art.runs,
        "files": sorted(art.files),
        **extra,
    }
    art.manifest = os.path.join(art.out_dir, "manifest.json")
    with open(art.manifest, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _stochastic_run(name, p, cfg, out, t_end, dt, tamed):
    record = {"name": name, "params": asdict(p), "scheme": EULER_MARUYAMA, "tamed": tamed}
    try:
        path = sample_uniform_path(p.alpha, 0.0, t_end, dt, cfg.seed)
        s0 = (cfg.option("x0", 0.0), cfg.option("y0", 0.0), cfg.option("z0", 0.0))
        traj = integrate_em(p, s0, path, t_end, dt, tamed=tamed)
    except BlowUpError as exc:
        record.update(status="blow-up", error=str(exc), step=exc.step, time=exc.time)
        return record, []
    files = [f"{name}.csv"]
    traj.to_csv(os.path.join(out, files[0]))
    if cfg.plot:
        files.append(f"{name}.svg")
        plots.path3d_svg(traj.states, os.path.join(out, files[1]), title=name)
    x = traj.x
    record.update(status="ok", csv=files[0], x_range=float(x.max() - x.min()),
                  max_abs_y=float(np.abs(traj.y).max()), max_abs_z=float(np.abs(traj.z).max()))
    return record, files


def _stochastic_set(cfg, variants, deviations=None):
    out = _out_dir(cfg)
    t_end = cfg.option("t_end", 100.0)
    dt = cfg.option("dt", 1e-3)
    tamed = cfg.option("tamed", True)
    art = ArtifactSet(cfg.preset, out)
    with ThreadPoolExecutor(max_workers=len(variants)) as pool:
        futures = [pool.submit(_stochastic_run, name, p, cfg, out, t_end, dt, tamed) for name, p in variants]
        for fut in futures:
            record, files = fut.result()
            art.runs.append(record)
            art.files.extend(files)
    extra = {"t_end": t_end, "dt": dt, "scheme": EULER_MARUYAMA, "tamed": tamed,
             "deviations": deviations or []}
    _write_manifest(art, cfg, extra)
    return art


def run_fig1(cfg: ExperimentConfig) -> ArtifactSet:
    """Three runs from the origin with sigma = 0.5 and alpha in {0.8, 1.6, 1.9}."""
    base = KoperParams(**cfg.params).with_(sigma=0.5, eps=0.05)
    variants = [(f"fig1_alpha{a:g}", base.with_(alpha=a)) for a in FIG1_ALPHAS]
    deviations = [{"run": n, "flag": "alpha outside (1, 2)", "alpha": p.alpha}
                  for n, p in variants if not p.in_theory_range]
    return _stochastic_set(cfg, variants, deviations)


def run_fig2(cfg: ExperimentConfig) -> ArtifactSet:
    """Three runs from the origin with alpha = 1 and sigma in {0.1, 0.5, 0.8}."""
    base = KoperParams(**cfg.params).with_(alpha=1.0, eps=0.05)
    variants = [(f"fig2_sigma{s:g}", base.with_(sigma=s)) for s in FIG2_SIGMAS]
    deviations = [{"run": n, "flag": "alpha outside (1, 2)", "alpha": 1.0} for n, _ in variants]
    return _stochastic_set(cfg, variants, deviations)


def run_custom(cfg: ExperimentConfig) -> ArtifactSet:
    """One Euler-Maruyama run with the configured constants."""
    p = KoperParams(**cfg.params)
    p.check_theory_range()
    out = _out_dir(cfg)
    t_end = cfg.option("t_end", 10.0)
    dt = cfg.option("dt", 1e-4)
    tamed = cfg.option("tamed", False)
    art = ArtifactSet(cfg.preset, out)
    record, files = _stochastic_run("trajectory", p, cfg, out, t_end, dt, tamed)
    if record["status"] != "ok":
        raise BlowUpError(record["error"], step=record.get("step"), time=record.get("time"))
    art.runs.append(record)
    art.files.extend(files)
    _write_manifest(art, cfg, {"t_end": t_end, "dt": dt, "scheme": EULER_MARUYAMA, "tamed": tamed})
    return art


def _first_passage(times, values, level):
    hit = np.flatnonzero(values > level)
    return float(times[hit[0]]) if hit.size else float("inf")


def run_fig3(cfg: ExperimentConfig) -> ArtifactSet:
    """Deterministic RK4 trajectory of the rescaled system from the origin."""
    p = KoperParams(**cfg.params).with_(sigma=0.0, eps=0.05)
    out = _out_dir(cfg)
    t_end = cfg.option("t_end", 400.0)
    dt = cfg.option("dt", 1e-3)
    s0 = (cfg.option("x0", 0.0), cfg.option("y0", 0.0), cfg.option("z0", 0.0))
    traj = integrate_rk4_deterministic(p, s0, t_end, dt)
    art = ArtifactSet(cfg.preset, out, files=["fig3.csv"])
    traj.to_csv(os.path.join(out, "fig3.csv"))
    if cfg.plot:
        art.files += ["fig3_path.svg", "fig3_series.svg"]
        plots.path3d_svg(traj.states, os.path.join(out, "fig3_path.svg"), title="deterministic trajectory")
        plots.timeseries_svg(traj.times, {"x": traj.x, "y": traj.y, "z": traj.z},
                             os.path.join(out, "fig3_series.svg"), title="x, y, z against t")
    early = traj.times <= 5.0
    art.results = {
        "x_max_0_5": float(traj.x[early].max()),
        "final": list(traj.final),
        "y_first_passage_0.9": _first_passage(traj.times, traj.y, 0.9),
        "z_first_passage_0.9": _first_passage(traj.times, traj.z, 0.9),
    }
    art.runs.append({"name": "fig3", "params": asdict(p), "status": "ok", "csv": "fig3.csv", **art.results})
    _write_manifest(art, cfg, {"t_end": t_end, "dt": dt, "scheme": RK4_DETERMINISTIC})
    return art


def cutoff_params(cfg: ExperimentConfig) -> KoperParams:
    """Example constants with the default cutoff unless overridden."""
    p = KoperParams(**{"cutoff": DEFAULT_CUTOFF, **cfg.params})
    p.check_theory_range()
    return p


def cutoff_setup(p: KoperParams, seed: int, t_max: float, trunc_tol: float, box=MANIFOLD_BOX):
    """Random-ODE setup whose path covers the truncation window and ``[0, t_max]``."""
    K = p.K if p.K is not None else estimate_lipschitz(p, box)
    gamma = p.gamma if p.gamma is not None else 2.0 * K * (1.0 - 2.0 * p.eps)
    T = truncation_horizon(gamma, p.eps, trunc_tol)
    t_min = -max(1.5 * T, 0.01)
    return make_setup(p, seed, t_min, t_max, path_dt=PATH_DT, box=box)


def _lp_options(cfg):
    return {
        "dt": cfg.option("lp_dt", cfg.option("dt", LP_DEFAULTS["lp_dt"])),
        "tol": cfg.option("tol", LP_DEFAULTS["tol"]),
        "trunc_tol": cfg.option("trunc_tol", LP_DEFAULTS["trunc_tol"]),
    }


def run_manifold(cfg: ExperimentConfig) -> ArtifactSet:
    """Graph ``h`` on the slow grid, with heatmap and metadata sidecar."""
    p = cutoff_params(cfg)
    lp = _lp_options(cfg)
    setup = cutoff_setup(p, cfg.seed, 0.01, lp["trunc_tol"])
    g = {k: cfg.option(k, v) for k, v in MANIFOLD_GRID.items()}
    # raises ContractionError before anything is written
    graph = manifold_graph(setup, (g["y_min"], g["y_max"]), (g["z_min"], g["z_max"]),
                           g["n_y"], g["n_z"], **lp)
    out = _out_dir(cfg)
    art = ArtifactSet(cfg.preset, out, files=["manifold.csv", "manifold_meta.json"])
    graph.to_csv(os.path.join(out, "manifold.csv"))
    graph.write_metadata(os.path.join(out, "manifold_meta.json"))
    if cfg.plot:
        art.files.append("manifold.svg")
        plots.heatmap_svg(graph.y_grid, graph.z_grid, graph.h_values,
                          os.path.join(out, "manifold.svg"), title="slow manifold graph h(y0, z0)")
    art.results = graph.metadata()
    art.runs.append({"name": "manifold", "params": asdict(p), "status": "ok", "csv": "manifold.csv",
                     "failed_nodes": len(graph.failed)})
    _write_manifest(art, cfg, {"dt": lp["dt"], "scheme": "lyapunov-perron", "box": MANIFOLD_BOX,
                               "grid": g, **lp})
    return art


def tracking_states(cfg: ExperimentConfig, setup, lp):
    """``(u_on, u_off)``: a graph point and its fast-direction perturbation."""
    Y0 = cfg.option("y0", TRACKING_DEFAULTS["y0"])
    Z0 = cfg.option("z0", TRACKING_DEFAULTS["z0"])
    res = lp_iterate(setup, Y0, Z0, **lp)
    u_on = (res.h, Y0, Z0)
    u_off = (res.h + cfg.option("offset", TRACKING_DEFAULTS["offset"]), Y0, Z0)
    return u_on, u_off


def run_tracking(cfg: ExperimentConfig) -> ArtifactSet:
    """Log-distance of an orbit started off the graph from the orbit on it."""
    p = cutoff_params(cfg)
    lp = _lp_options(cfg.with_(dt=None))
    t_end = cfg.option("t_end", TRACKING_DEFAULTS["t_end"])
    dt = cfg.option("dt", TRACKING_DEFAULTS["dt"])
    setup = cutoff_setup(p, cfg.seed, t_end, lp["trunc_tol"])
    u_on, u_off = tracking_states(cfg, setup, lp)
    res = exponential_tracking(setup, u_on, u_off, t_end, dt)
    out = _out_dir(cfg)
    art = ArtifactSet(cfg.preset, out, files=["tracking.csv", "tracking_report.json"])
    with open(os.path.join(out, "tracking.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["t", "log_distance"])
        for t, v in zip(res.times, res.log_distances):
            w.writerow([f"{t:.17g}", f"{v:.17g}"])
    report = {"c2_fit": res.c2_fit, "fit_points": res.fit_points, "truncated": res.truncated,
              "u_on": list(u_on), "u_off": list(u_off), "t_end": t_end, "dt": dt}
    with open(os.path.join(out, "tracking_report.json"), "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    if cfg.plot:
        art.files.append("tracking.svg")
        second = res.times >= 0.5 * t_end
        ok = second & np.isfinite(res.log_distances)
        intercept = (float(np.mean(res.log_distances[ok] - res.c2_fit * res.times[ok]))
                     if ok.any() and np.isfinite(res.c2_fit) else 0.0)
        plots.fit_svg(res.times, res.log_distances, res.c2_fit if np.isfinite(res.c2_fit) else 0.0,
                      intercept, os.path.join(out, "tracking.svg"), title="exponential tracking")
    art.results = report
    art.runs.append({"name": "tracking", "params": asdict(p), "status": "ok", "csv": "tracking.csv"})
    _write_manifest(art, cfg, {"t_end": t_end, "dt": dt, "scheme": RK4_RANDOM, **{f"lp_{k}": v for k, v in lp.items()}})
    return art


RUNNERS = {
    "fig1": run_fig1,
    "fig2": run_fig2,
    "fig3": run_fig3,
    "manifold": run_manifold,
    "tracking": run_tracking,
    "custom": run_custom,
}


def run_preset(cfg: ExperimentConfig) -> ArtifactSet:
    return RUNNERS[cfg.preset](cfg)


def rerun_from_manifest(manifest_path, out_dir=None) -> ArtifactSet:
    """Repeat the run recorded in ``manifest_path`` (into ``out_dir`` if given)."""
    try:
        with open(manifest_path) as f:
            manifest = json.load(f)
        text = manifest["config"]
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"cannot read manifest {manifest_path!r}: {exc}") from None
    cfg = parse_config(text)
    target = out_dir or os.path.dirname(os.path.abspath(manifest_path))
    return run_preset(cfg.with_(out_dir=target))


__all__ = [
    "ArtifactSet", "KoperError", "OUT_DIR_ENV", "RUNNERS", "cutoff_params", "cutoff_setup",
    "default_out_dir", "rerun_from_manifest", "run_custom", "run_fig1", "run_fig2", "run_fig3",
    "run_manifold", "run_preset", "run_tracking", "tracking_states",
]
