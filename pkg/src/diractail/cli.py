"""Configuration, orchestration and reporting.

Subcommands:

    run           one evolution -> series.csv, diagnostics.csv, manifest.json
    convergence   self-convergence orders across doublings (+ ko sweep)
    pricelaw      late-time tail acceptance report for a run family
    timeintegral  time-integral report for the configured initial data
    chart-dump    geometry tables as CSV
    sweep         several configs concurrently (process pool)

Configs are TOML with strict key checking; series are CSV with floats at
17 significant digits (re-running a config reproduces files bit-exactly);
summaries are JSON.  Lengths in configs are in the same geometric units
as the mass; defaults scale with it.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import sys
import time
from dataclasses import dataclass, asdict, replace

import numpy as np

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import __version__
from .background import (BlackHoleParams, SlicingProfile, build_chart,
                         write_chart_csv)
from .swsh import ModeIndex
from .evolve import (EvolutionConfig, InitialDataSpec, make_initial_data,
                     integrate)
from .diagnostics import (ChargeSink, NPSink, ObserverSink, MovingObserverSink,
                          local_power_index, tail_fit, tme_residual)
from .asymptotics import time_integral, predicted_profile, predicted_radiation_scri

__all__ = ["RunConfig", "RunManifest", "load_config", "run_once",
           "convergence_report", "pricelaw_report", "timeintegral_report",
           "main"]

_FMT = "%.17g"


class ConfigError(ValueError):
    pass


_SCHEMA = {
    "run": {"mass", "tau_end", "output_every", "out_dir"},
    "mode": {"ell", "m"},
    "grid": {"n"},
    "stepping": {"cfl", "ko_eps"},
    "slicing": {"c0", "blend_inner", "blend_outer"},
    "initial_data": {"family", "center", "width", "amplitude", "n_target",
                     "cutoff_rho", "cutoff_width_sigma", "path"},
    "observers": {"radii", "moving_half_tau"},
    "diagnostics": {"charge", "np_constant", "tail_window", "checkpoint"},
}


@dataclass(frozen=True)
class RunConfig:
    mass: float
    ell: int
    m: float
    n: int
    cfl: float
    ko_eps: float
    tau_end: float
    output_every: float
    slicing_c0: float
    blend_inner: tuple
    blend_outer: tuple
    family: str
    family_params: tuple           # sorted (key, value) pairs
    observer_radii: tuple
    moving_half_tau: bool
    do_charge: bool
    do_np: bool
    tail_window: tuple
    out_dir: str

    def to_dict(self) -> dict:
        d = asdict(self)
        d["family_params"] = {k: v for k, v in self.family_params}
        return d

    @staticmethod
    def from_dict(d: dict) -> "RunConfig":
        d = dict(d)
        d["family_params"] = tuple(sorted(d["family_params"].items()))
        for key in ("blend_inner", "blend_outer", "observer_radii", "tail_window"):
            d[key] = tuple(d[key])
        return RunConfig(**d)


def _reject_unknown(raw: dict) -> None:
    for section, content in raw.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(content, dict):
            raise ConfigError(f"section [{section}] must be a table")
        for key in content:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")


def resolve_config(raw: dict) -> RunConfig:
    _reject_unknown(raw)
    run = raw.get("run", {})
    mass = float(run.get("mass", 1.0))
    mode = raw.get("mode", {})
    grid = raw.get("grid", {})
    stepping = raw.get("stepping", {})
    slicing = raw.get("slicing", {})
    idata = raw.get("initial_data", {})
    obs = raw.get("observers", {})
    diag = raw.get("diagnostics", {})

    family = idata.get("family", "gaussian_bump")
    fam_keys = {"gaussian_bump": ("center", "width", "amplitude"),
                "np_tail": ("n_target", "cutoff_rho", "cutoff_width_sigma"),
                "custom_table": ("path",)}
    if family not in fam_keys:
        raise ConfigError(f"unknown initial-data family {family!r}")
    defaults = {"center": 8.0 * mass, "width": 1.0 * mass, "amplitude": 1.0,
                "n_target": 1.0, "cutoff_rho": 5.0 * mass,
                "cutoff_width_sigma": 0.2, "path": ""}
    params = tuple(sorted((k, idata.get(k, defaults[k])) for k in fam_keys[family]))

    tau_end = float(run.get("tau_end", 100.0 * mass))
    tail_window = diag.get("tail_window", (0.5 * tau_end, tau_end))
    return RunConfig(
        mass=mass,
        ell=int(mode.get("ell", 1)),
        m=float(mode.get("m", 0.5)),
        n=int(grid.get("n", 1024)),
        cfl=float(stepping.get("cfl", 0.25)),
        ko_eps=float(stepping.get("ko_eps", 0.1)),
        tau_end=tau_end,
        output_every=float(run.get("output_every", 1.0 * mass)),
        slicing_c0=float(slicing.get("c0", 4.0 * mass * mass)),
        blend_inner=tuple(slicing.get("blend_inner", (2.2 * mass, 4.0 * mass))),
        blend_outer=tuple(slicing.get("blend_outer", (20.0 * mass, 40.0 * mass))),
        family=family,
        family_params=params,
        observer_radii=tuple(obs.get("radii", (10.0 * mass,))),
        moving_half_tau=bool(obs.get("moving_half_tau", False)),
        do_charge=bool(diag.get("charge", True)),
        do_np=bool(diag.get("np_constant", True)),
        tail_window=tuple(tail_window),
        out_dir=str(run.get("out_dir", "out")),
    )


def load_config(path) -> RunConfig:
    path = str(path)
    if path.endswith(".json"):
        with open(path, "rb") as fh:
            manifest = json.load(fh)
        return RunConfig.from_dict(manifest["config"])
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return resolve_config(raw)


@dataclass
class RunManifest:
    config: dict
    version: str
    wallclock_s: float
    flags: dict

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"config": self.config, "version": self.version,
                       "wallclock_s": self.wallclock_s, "flags": self.flags},
                      fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")

    @staticmethod
    def load(path) -> "RunManifest":
        with open(path) as fh:
            d = json.load(fh)
        return RunManifest(config=d["config"], version=d["version"],
                           wallclock_s=d["wallclock_s"], flags=d["flags"])


def _json_default(obj):
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj)}")


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def _build_all(cfg: RunConfig):
    params = BlackHoleParams(cfg.mass)
    slicing = SlicingProfile(c0=cfg.slicing_c0, blend_inner=cfg.blend_inner,
                             blend_outer=cfg.blend_outer)
    chart = build_chart(params, slicing, cfg.n)
    mode = ModeIndex(ell=cfg.ell, m=cfg.m)
    spec = InitialDataSpec(family=cfg.family, **dict(cfg.family_params))
    state0 = make_initial_data(spec, chart, mode)
    econf = EvolutionConfig(n=cfg.n, cfl=cfg.cfl, ko_eps=cfg.ko_eps,
                            tau_end=cfg.tau_end, output_every=cfg.output_every,
                            observers=cfg.observer_radii)
    return chart, mode, state0, econf


def _write_series_csv(path, observer: ObserverSink):
    keys = list(observer.rows[0].keys()) if observer.rows else []
    with open(path, "w") as fh:
        header = ["tau"]
        for k in keys:
            header += [f"re_{k}", f"im_{k}"]
        fh.write(",".join(header) + "\n")
        for tau, row in zip(observer.tau, observer.rows):
            cells = [_FMT % tau]
            for k in keys:
                cells += [_FMT % row[k].real, _FMT % row[k].imag]
            fh.write(",".join(cells) + "\n")


def _write_diagnostics_csv(path, charge_sink, np_sink, observer: ObserverSink):
    n_rows = len(observer.tau)
    lpi_cols = {}
    for key in observer.rows[0].keys() if observer.rows else []:
        tau, series = observer.series(key)
        col = np.full(n_rows, math.nan)
        try:
            good = np.abs(series) > 1e-280
            if np.count_nonzero(good) > 4 and np.all(tau[good] > 0):
                tmid, p = local_power_index(tau[good], series[good])
                idx = np.nonzero(good)[0][1:-1]
                col[idx] = p
        except ValueError:
            pass
        lpi_cols[f"lpi_{key}"] = col
    with open(path, "w") as fh:
        header = ["tau", "Q", "flux_horizon_cum", "flux_scri_cum", "balance",
                  "re_N1", "im_N1"] + list(lpi_cols.keys())
        fh.write(",".join(header) + "\n")
        for i in range(n_rows):
            q = charge_sink.records[i] if charge_sink else None
            npe = np_sink.records[i] if np_sink else None
            cells = [_FMT % observer.tau[i]]
            cells += [_FMT % (q.Q if q else math.nan),
                      _FMT % (q.flux_horizon_cum if q else math.nan),
                      _FMT % (q.flux_scri_cum if q else math.nan),
                      _FMT % (q.balance if q else math.nan),
                      _FMT % (npe.N1.real if npe else math.nan),
                      _FMT % (npe.N1.imag if npe else math.nan)]
            cells += [_FMT % lpi_cols[k][i] for k in lpi_cols]
            fh.write(",".join(cells) + "\n")


def _write_checkpoint(path, state, chart):
    header = json.dumps({"tau": state.tau, "n": chart.n,
                         "ell": state.mode.ell, "m": state.mode.m,
                         "mass": chart.M})
    with open(path, "w") as fh:
        fh.write("# " + header + "\n")
        fh.write("sigma,reA,imA,reB,imB\n")
        for i in range(chart.n + 1):
            fh.write(",".join(_FMT % v for v in (
                chart.sigma[i], state.A[i].real, state.A[i].imag,
                state.B[i].real, state.B[i].imag)) + "\n")


def run_once(cfg: RunConfig, out_dir=None):
    """One evolution with the configured diagnostics; writes series.csv,
    diagnostics.csv and manifest.json into out_dir."""
    import os
    out = str(out_dir if out_dir is not None else cfg.out_dir)
    os.makedirs(out, exist_ok=True)
    t0 = time.perf_counter()
    chart, mode, state0, econf = _build_all(cfg)

    observer = ObserverSink(chart, cfg.observer_radii)
    sinks = [observer]
    charge_sink = ChargeSink() if cfg.do_charge else None
    if charge_sink:
        sinks.append(charge_sink)
    np_sink = NPSink() if (cfg.do_np and cfg.ell == 1) else None
    if np_sink:
        sinks.append(np_sink)
    moving = MovingObserverSink(chart) if cfg.moving_half_tau else None
    if moving:
        sinks.append(moving)

    final = integrate(state0, econf, chart, sinks)

    _write_series_csv(os.path.join(out, "series.csv"), observer)
    _write_diagnostics_csv(os.path.join(out, "diagnostics.csv"),
                           charge_sink, np_sink, observer)
    summary = {"tail_fits": {}}
    for key in (observer.rows[0].keys() if observer.rows else []):
        tau, series = observer.series(key)
        try:
            fit = tail_fit(tau, series, cfg.tail_window)
            summary["tail_fits"][key] = {
                "exponent": fit.exponent, "amplitude": fit.amplitude,
                "residual": fit.residual,
                "window": [fit.tau_a, fit.tau_b]}
        except ValueError:
            continue
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    manifest = RunManifest(config=cfg.to_dict(), version=__version__,
                           wallclock_s=time.perf_counter() - t0,
                           flags={"completed": True})
    manifest.dump(os.path.join(out, "manifest.json"))
    return {"final": final, "observer": observer, "charge": charge_sink,
            "np": np_sink, "moving": moving, "chart": chart}


# ---------------------------------------------------------------------------
# convergence study
# ---------------------------------------------------------------------------

def convergence_report(cfg: RunConfig, levels: int = 3, ko_sweep=()):
    """Self-convergence orders of A, B at tau_end across grid doublings,
    TME residual reduction factors, and an optional dissipation sweep of
    the fitted tail exponent at the first observer."""
    if levels < 3:
        raise ConfigError("need at least 3 levels for an order estimate")
    finals = []
    charts = []
    ns = [cfg.n * (2 ** k) for k in range(levels)]
    for n in ns:
        chart, mode, state0, econf = _build_all(replace(cfg, n=n))
        finals.append(integrate(state0, econf, chart, ()))
        charts.append(chart)

    orders = []
    for k in range(levels - 2):
        s0, s1, s2 = finals[k], finals[k + 1], finals[k + 2]
        # restrict every level to the coarsest common node set
        dA1 = np.max(np.abs(s0.A - s1.A[::2]))
        dA2 = np.max(np.abs(s1.A[::2] - s2.A[::4]))
        dB1 = np.max(np.abs(s0.B - s1.B[::2]))
        dB2 = np.max(np.abs(s1.B[::2] - s2.B[::4]))
        order_a = math.log2(dA1 / dA2) if dA2 > 0 else math.nan
        order_b = math.log2(dB1 / dB2) if dB2 > 0 else math.nan
        orders.append({"n": ns[k], "order_A": order_a, "order_B": order_b})

    resid = []
    for chart, fin in zip(charts, finals):
        R = tme_residual(fin, chart)
        mask = (chart.sigma > 0.1) & (chart.sigma < 0.9)
        resid.append(float(np.max(np.abs(R[mask]))))
    resid_ratios = [resid[k] / resid[k + 1] for k in range(levels - 1)]

    report = {
        "levels": ns,
        "orders": orders,
        "tme_residual": resid,
        "tme_residual_ratio": resid_ratios,
        "pre_asymptotic": any(not (2.5 <= o["order_A"] <= 5.5) for o in orders),
    }

    if ko_sweep:
        exps = {}
        for eps in ko_sweep:
            chart, mode, state0, econf = _build_all(replace(cfg, ko_eps=float(eps)))
            obs = ObserverSink(chart, cfg.observer_radii)
            integrate(state0, econf, chart, [obs])
            key = f"varphi@{obs.radii[0]:.6g}"
            tau, series = obs.series(key)
            fit = tail_fit(tau, series, cfg.tail_window)
            exps[str(eps)] = fit.exponent
        vals = list(exps.values())
        report["ko_sweep_exponents"] = exps
        report["ko_sweep_spread"] = float(max(vals) - min(vals))
    return report


# ---------------------------------------------------------------------------
# price-law report
# ---------------------------------------------------------------------------

def _median_lpi(tau, series, window):
    tau = np.asarray(tau, dtype=float)
    series = np.asarray(series)
    good = (tau > 0) & (np.abs(series) > 1e-280)
    if np.count_nonzero(good) < 5:
        raise ConfigError("series too short or underflowed for a power index")
    t, p = local_power_index(tau[good], series[good])
    sel = (t >= window[0]) & (t <= window[1])
    if not np.any(sel):
        raise ConfigError("late-time window not reached before tau_end")
    return float(np.median(p[sel])), t[sel], p[sel]


def _nearest(tau, value):
    return int(np.argmin(np.abs(np.asarray(tau) - value)))


def pricelaw_report(cfg: RunConfig, out_dir=None) -> dict:
    """Run the configured family and compare measured decay exponents and
    amplitudes against the predicted late-time profiles; returns (and
    optionally writes) a pass/fail report."""
    res = run_once(cfg, out_dir) if out_dir else _pricelaw_run(cfg)
    observer = res["observer"]
    chart = res["chart"]
    window = cfg.tail_window
    checks = {}
    robs = observer.radii[0]
    v_obs = None

    def record(name, value, target, tol, kind="abs"):
        if kind == "abs":
            ok = abs(value - target) <= tol
        else:  # lower bound
            ok = value >= target
        checks[name] = {"value": value, "target": target, "tol": tol,
                        "pass": bool(ok)}
        return ok

    tau_key = {}
    for key in ("varphi", "psi_plus", "psi_minus"):
        tau_key[key] = observer.series(f"{key}@{robs:.6g}")
    tau_s, psim_scri = observer.series("Psi_minus@scri")

    if cfg.family == "np_tail":
        n1 = res["np"].records[0].N1 if res["np"] else None
        v_obs = lambda tt: tt + chart.h(robs)
        lpi, _, _ = _median_lpi(*tau_key["varphi"], window)
        record("lpi_varphi_interior", lpi, 3.0, 0.1)
        lpi, _, _ = _median_lpi(*tau_key["psi_minus"], window)
        record("lpi_psi_minus_interior", lpi, 3.0, 0.1)
        lpi, _, _ = _median_lpi(tau_s, psim_scri, window)
        record("lpi_radiation_scri", lpi, 2.0, 0.1)
        tau_eval = 0.75 * cfg.tau_end
        i = _nearest(tau_key["varphi"][0], tau_eval)
        tt = tau_key["varphi"][0][i]
        pred = predicted_profile("varphi", 0, n1, tt, v_obs(tt))
        ratio = (tau_key["varphi"][1][i] / pred).real
        record("amplitude_ratio_varphi", ratio, 1.0, 0.05)
        i = _nearest(tau_s, tau_eval)
        pred = predicted_radiation_scri(0, n1, tau_s[i])
        ratio = (psim_scri[i] / pred).real
        record("amplitude_ratio_scri", ratio, 1.0, 0.05)
        # against the coefficient forced by the first-order pair (4, not
        # 8, at x -> 0); see the caveats in the package notes
        checks["amplitude_ratio_scri_consistent"] = {
            "value": 2.0 * ratio, "informational": True}
        checks["N1"] = {"value": {"re": n1.real, "im": n1.imag}}

    elif cfg.family == "gaussian_bump" and cfg.ell == 1:
        chart0, mode0, state0, _ = _build_all(cfg)
        ti = time_integral(state0, chart0)
        n1p = ti.N1_prime
        v_obs = lambda tt: tt + chart.h(robs)
        lpi, _, _ = _median_lpi(*tau_key["psi_plus"], window)
        record("lpi_psi_plus_interior", lpi, 4.0, 0.15)
        lpi, _, _ = _median_lpi(*tau_key["psi_minus"], window)
        record("lpi_psi_minus_interior", lpi, 4.0, 0.15)
        lpi, _, _ = _median_lpi(tau_s, psim_scri, window)
        record("lpi_radiation_scri", lpi, 3.0, 0.15)
        tau_eval = 0.7 * cfg.tau_end
        i = _nearest(tau_key["varphi"][0], tau_eval)
        tt = tau_key["varphi"][0][i]
        pred = predicted_profile("varphi", 0, n1p, tt, v_obs(tt), vanishing=True)
        ratio = (tau_key["varphi"][1][i] / pred).real
        record("amplitude_ratio_varphi", ratio, 1.0, 0.1)
        checks["N1_prime"] = {"value": {"re": n1p.real, "im": n1p.imag}}

    elif cfg.ell >= 2:
        # almost-sharp rates; the scri index should pass 3.8 by the end
        lpi_end, _, _ = _median_lpi(tau_s, psim_scri,
                                    (0.9 * cfg.tau_end, cfg.tau_end))
        record("lpi_radiation_scri_end", lpi_end, 3.8, 0.0, kind="min")
        moving = res["moving"]
        if moving is not None and len(moving.tau) > 8:
            mt = np.array(moving.tau)
            mv = np.array(moving.v)
            mf = np.array(moving.varphi)
            good = (np.abs(mf) > 1e-280) & (mt > 0)
            t, p = local_power_index(mt[good], mf[good])
            # predicted index of v^{-2} tau^{-ell0} along rho = tau/2
            dlnv = np.gradient(np.log(mv[good]), np.log(mt[good]))
            pred = cfg.ell + 2.0 * dlnv[1:-1]
            sel = t >= 0.8 * cfg.tau_end
            dev = float(np.median(p[sel] - pred[sel]))
            checks["exterior_exponent_deviation"] = {
                "value": dev, "target": 0.0, "tol": 0.3,
                "pass": bool(abs(dev) <= 0.3)}
            # compact data carries a vanishing outgoing constant, whose
            # branch is one power faster; reported as information
            checks["exterior_deviation_vanishing_branch"] = {
                "value": dev - 1.0, "informational": True}
        # interior index toward the conjectured rate: reported, not gated
        lpi_int, _, _ = _median_lpi(*tau_key["varphi"],
                                    (0.9 * cfg.tau_end, cfg.tau_end))
        checks["exploratory_interior_lpi"] = {
            "value": lpi_int,
            "conjectured": float(2 * cfg.ell + 2), "exploratory": True}
    else:
        raise ConfigError("pricelaw families: np_tail, gaussian_bump (ell=1), "
                          "or compact data with ell >= 2")

    verdict = all(c.get("pass", True) for c in checks.values())
    report = {"family": cfg.family, "ell": cfg.ell, "checks": checks,
              "pass": bool(verdict)}
    if out_dir:
        import os
        with open(os.path.join(str(out_dir), "pricelaw.json"), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
    return report


def _pricelaw_run(cfg: RunConfig):
    chart, mode, state0, econf = _build_all(cfg)
    observer = ObserverSink(chart, cfg.observer_radii)
    sinks = [observer]
    np_sink = NPSink() if cfg.ell == 1 else None
    if np_sink:
        sinks.append(np_sink)
    moving = MovingObserverSink(chart) if cfg.moving_half_tau else None
    if moving:
        sinks.append(moving)
    final = integrate(state0, econf, chart, sinks)
    return {"final": final, "observer": observer, "np": np_sink,
            "moving": moving, "chart": chart, "charge": None}


def timeintegral_report(cfg: RunConfig) -> dict:
    chart, mode, state0, _ = _build_all(cfg)
    ti = time_integral(state0, chart)
    rel = abs(ti.N1_prime - ti.N1_prime_direct) / max(abs(ti.N1_prime), 1e-300)
    return {
        "I_total": {"re": ti.I_total.real, "im": ti.I_total.imag},
        "D1_tilde": {"re": ti.D1_tilde.real, "im": ti.D1_tilde.imag},
        "N1_prime_formula": {"re": ti.N1_prime.real, "im": ti.N1_prime.imag},
        "N1_prime_direct": {"re": ti.N1_prime_direct.real,
                            "im": ti.N1_prime_direct.imag},
        "integrability_residual": ti.integrability_residual,
        "formula_vs_direct_rel": rel,
    }


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _sweep(paths, jobs):
    def one(p):
        cfg = load_config(p)
        run_once(cfg)
        return cfg.out_dir
    if jobs <= 1:
        return [one(p) for p in paths]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sweep_child, paths))


def _sweep_child(path):
    cfg = load_config(path)
    run_once(cfg)
    return cfg.out_dir


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="diractail")
    sub = ap.add_subparsers(dest="cmd", required=True)
    for name in ("run", "convergence", "pricelaw", "timeintegral", "chart-dump"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        if name == "convergence":
            p.add_argument("--levels", type=int, default=3)
            p.add_argument("--ko-sweep", nargs="*", type=float, default=[])
    p = sub.add_parser("sweep")
    p.add_argument("--config", nargs="+", required=True)
    p.add_argument("--jobs", type=int, default=1)

    args = ap.parse_args(argv)
    try:
        if args.cmd == "sweep":
            done = _sweep(args.config, args.jobs)
            print("\n".join(done))
            return 0
        cfg = load_config(args.config)
        out = args.out or cfg.out_dir
        if args.cmd == "run":
            run_once(cfg, out)
            print(f"run complete -> {out}")
        elif args.cmd == "chart-dump":
            import os
            os.makedirs(out, exist_ok=True)
            chart, *_ = _build_all(cfg)
            write_chart_csv(chart, os.path.join(out, "chart.csv"))
            print(f"chart -> {out}/chart.csv")
        elif args.cmd == "convergence":
            rep = convergence_report(cfg, args.levels, tuple(args.ko_sweep))
            import os
            os.makedirs(out, exist_ok=True)
            with open(os.path.join(out, "convergence.json"), "w") as fh:
                json.dump(rep, fh, indent=2, sort_keys=True)
                fh.write("\n")
            print(json.dumps(rep, indent=2, sort_keys=True))
        elif args.cmd == "pricelaw":
            import os
            os.makedirs(out, exist_ok=True)
            rep = pricelaw_report(cfg, out)
            print(json.dumps(rep, indent=2, sort_keys=True, default=_json_default))
            return 0 if rep["pass"] else 3
        elif args.cmd == "timeintegral":
            rep = timeintegral_report(cfg)
            import os
            os.makedirs(out, exist_ok=True)
            with open(os.path.join(out, "timeintegral.json"), "w") as fh:
                json.dump(rep, fh, indent=2, sort_keys=True)
                fh.write("\n")
            print(json.dumps(rep, indent=2, sort_keys=True))
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
