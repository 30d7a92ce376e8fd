"""Command-line front end.

Usage::

    tripletlink <command> --config <path> --out <dir> [--seed N] [--jobs N]

Commands: validate, spectrum, entangling-power, decay, protocol, sweep,
figure.  The config is a JSON document validated against the keys listed in
:data:`CONFIG_SCHEMA`; unknown keys are rejected with the offending path.
Relative config paths are resolved against ``$TRIPLETLINK_CONFIG_DIR`` when
not found in the working directory.  Exit code 0 means every requested
output was written; config errors exit with 2 and runtime errors with 1,
both printing a machine-readable error JSON to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import dynamics, effective, measures, model, protocols, report
from .model import NUCLEAR_LABELS, SUBLEVELS, SystemParams


class ConfigError(ValueError):
    def __init__(self, message, path="$"):
        super().__init__(message)
        self.path = path


class UnknownFigureError(ConfigError):
    pass


class GridTooLargeError(ConfigError):
    pass


MAX_GRID_POINTS = 1_000_000

# top-level config keys and the keys of each command section
CONFIG_SCHEMA = {
    "params": None,
    "seed": None,
    "spectrum": {"include_transitions"},
    "entangling_power": {"kind", "chi", "coupling", "t_max", "points",
                         "samples", "gate", "b", "beta"},
    "decay": {"tau", "delta0_tau", "initial", "t_end_factor", "samples"},
    "protocol": {"name", "nuclear0", "switch_time", "include_decay", "tau",
                 "omega_D", "Omega0", "bound", "sigma", "octave"},
    "sweep": {"target", "axes"},
    "figure": {"name", "points", "grid", "tau", "delta0_tau", "a_values",
               "chi_values", "bound"},
}

PRESETS = {"demf": model.demf_params, "dmfph": model.dmfph_params}


def load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        base = os.environ.get("TRIPLETLINK_CONFIG_DIR")
        if base and not p.is_absolute():
            p = Path(base) / path
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    validate_config(data)
    return data


def validate_config(data: dict):
    for key, value in data.items():
        if key not in CONFIG_SCHEMA:
            raise ConfigError(f"unknown key", path=f"$.{key}")
        allowed = CONFIG_SCHEMA[key]
        if allowed is not None and isinstance(value, dict):
            for sub in value:
                if sub not in allowed:
                    raise ConfigError("unknown key", path=f"$.{key}.{sub}")


def params_from_config(cfg: dict) -> SystemParams:
    raw = cfg.get("params")
    if raw is None:
        raise ConfigError("missing required key", path="$.params")
    if isinstance(raw, str):
        if raw not in PRESETS:
            raise ConfigError(f"unknown preset {raw!r}", path="$.params")
        return PRESETS[raw]()
    if not isinstance(raw, dict):
        raise ConfigError("params must be an object or a preset name",
                          path="$.params")
    try:
        return SystemParams.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path="$.params") from exc


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        if np.iscomplexobj(x):
            return {"re": x.real.tolist(), "im": x.imag.tolist()}
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    if isinstance(x, float) and (math.isnan(x) or math.isinf(x)):
        return str(x)
    return x


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# commands

def cmd_validate(cfg: dict, out: Path) -> dict:
    p = params_from_config(cfg)
    regimes = model.classify_regime(p)
    couplings = model.second_order_couplings(p)
    strengths = model.asymmetry_strengths(p)
    a = couplings["a"]
    chi = {j: (abs(strengths[j] / a[j]) if a[j] != 0 else math.inf)
           for j in SUBLEVELS}
    t_ent = math.pi / (2.0 * dynamics.ANGULAR * a[1]) if a[1] > 0 else math.inf
    t_unwind = math.pi / (2.0 * dynamics.ANGULAR * abs(a[0])) if a[0] != 0 else math.inf
    rep = {
        "perturbative_ok": p.perturbative_ok,
        "regimes": {f"{j:+d}": regimes[j].value for j in SUBLEVELS},
        "couplings_a": {f"{j:+d}": a[j] for j in SUBLEVELS},
        "couplings_a_prime": {f"{j:+d}": couplings["a_prime"][j] for j in SUBLEVELS},
        "asymmetry_f": {f"{j:+d}": strengths[j] for j in SUBLEVELS},
        "chi": {f"{j:+d}": chi[j] for j in SUBLEVELS},
        "entangling_time_us": t_ent,
        "unwind_time_us": t_unwind,
        "lifetime_hierarchy": {
            "entangle_before_decay": t_ent < min(p.tau_plus, p.tau_minus),
            "shelf_holds": 10.0 * p.tau_zero < t_unwind,
        },
    }
    if all(r is model.Regime.ASYMMETRIC for r in regimes.values()):
        ts = effective.transition_spectrum(p)
        rep["transitions"] = {
            "rf_n": {f"{j:+d}": ts.rf[j] for j in SUBLEVELS},
            "rf_n_prime": {f"{j:+d}": ts.rf_prime[j] for j in SUBLEVELS},
            "mw": {f"{pair}/{lab}": v for (pair, lab), v in ts.mw.items()},
        }
    write_json(out / "validate.json", rep)
    print(json.dumps(_jsonable(rep), indent=2, sort_keys=True))
    return rep


def cmd_spectrum(cfg: dict, out: Path) -> dict:
    p = params_from_config(cfg)
    regimes = model.classify_regime(p)
    co = effective.crossover_spectrum(p)
    rep = {
        "regimes": {f"{j:+d}": regimes[j].value for j in SUBLEVELS},
        "Delta1": co.Delta1, "Delta2": co.Delta2,
        "f": {f"{j:+d}": co.f[j] for j in SUBLEVELS},
        "chi": {f"{j:+d}": co.chi[j] for j in SUBLEVELS},
        "energies": {f"{j:+d}": list(co.energies[j]) for j in SUBLEVELS},
        "alpha": {f"{j:+d}": co.alpha[j] for j in SUBLEVELS},
    }
    if all(r is model.Regime.SYMMETRIC for r in regimes.values()):
        s = effective.symmetric_spectrum(p)
        rep["symmetric"] = {
            "a_plus": s.a_plus, "a_minus": s.a_minus, "a_zero": s.a_zero,
            "eps": {f"{j:+d}": s.eps[j] for j in SUBLEVELS},
            "delta": {f"{j:+d}": s.delta[j] for j in SUBLEVELS},
            "phi": {f"{j:+d}": s.phi[j] for j in SUBLEVELS},
        }
    if all(r is model.Regime.ASYMMETRIC for r in regimes.values()) \
            and cfg.get("spectrum", {}).get("include_transitions", True):
        ts = effective.transition_spectrum(p)
        rep["transitions"] = {
            "rf_n": {f"{j:+d}": ts.rf[j] for j in SUBLEVELS},
            "rf_n_prime": {f"{j:+d}": ts.rf_prime[j] for j in SUBLEVELS},
            "mw": {f"{pair}/{lab}": v for (pair, lab), v in ts.mw.items()},
        }
    write_json(out / "spectrum.json", rep)
    return rep


def cmd_entangling_power(cfg: dict, out: Path, seed: int) -> Path:
    p = params_from_config(cfg)
    opts = cfg.get("entangling_power", {})
    kind = opts.get("kind", "symmetric")
    points = int(opts.get("points", 201))
    if kind == "symmetric":
        s = effective.symmetric_spectrum(p)
        t_max = float(opts.get("t_max", 2.0 * math.pi))
        x = np.linspace(0.0, t_max, points)     # a_plus * t, radians
        ratio = s.a_zero / s.a_plus
        rows = [(xi, measures.entangling_power_symmetric(1.0, xi),
                 measures.entangling_power_symmetric(ratio, xi)) for xi in x]
        path = report.write_csv(out / "entangling_power.csv",
                                ["a_plus_t", "e_plus", "e_zero"], rows)
    elif kind == "crossover":
        chi = float(opts.get("chi", 1.0))
        t_max = float(opts.get("t_max", 2.0 * math.pi))
        x = np.linspace(0.0, t_max, points)
        rows = [(xi, measures.crossover_entangling_power(1.0, chi, xi)) for xi in x]
        path = report.write_csv(out / "entangling_power.csv",
                                ["a_t", "e_tilde"], rows)
    elif kind == "mc":
        gate = opts.get("gate", "cnot")
        samples = int(opts.get("samples", 100_000))
        if gate == "cnot":
            u = np.eye(4, dtype=complex)[:, [0, 1, 3, 2]]
        elif gate == "lemma":
            u = _lemma_unitary(float(opts.get("b", 0.5)),
                               float(opts.get("beta", math.pi)))
        else:
            raise ConfigError(f"unknown gate {gate!r}", path="$.entangling_power.gate")
        est = measures.entangling_power_mc(u, samples=samples, seed=seed)
        path = report.write_csv(out / "entangling_power.csv",
                                ["mean", "std_error", "samples", "seed"],
                                [(est.mean, est.std_error, est.samples, est.seed)])
    else:
        raise ConfigError(f"unknown kind {kind!r}", path="$.entangling_power.kind")
    return path


def _lemma_unitary(b: float, beta: float) -> np.ndarray:
    a = math.sqrt(max(0.0, 1.0 - b * b))
    v2 = np.array([0.0, -a, b, 0.0], dtype=complex)
    v3 = np.array([0.0, b, a, 0.0], dtype=complex)
    u = np.zeros((4, 4), dtype=complex)
    u[0, 0] = u[3, 3] = 1.0
    u += np.exp(-1j * beta / 2.0) * np.outer(v2, v2)
    u += np.exp(+1j * beta / 2.0) * np.outer(v3, v3)
    return u


_DECAY_STATES = {
    "rho1": lambda: protocols.excited_state(model.basis_state(0, "ud")[:4], 1),
    "rho2": lambda: protocols.excited_state(model.basis_state(0, "ud")[:4], 0),
    "rho3": lambda: protocols.excited_state(0.5 * np.ones(4), 0),
}


def _decay_tau(p: SystemParams, opts: dict) -> float:
    if "tau" in opts and opts["tau"] is not None:
        return float(opts["tau"])
    s = effective.symmetric_spectrum(p)
    target = float(opts.get("delta0_tau", 0.05))
    return target / (dynamics.ANGULAR * 2.0 * abs(s.a_zero))


def cmd_decay(cfg: dict, out: Path) -> Path:
    """Trajectory export of an optical-decay run (CSV plus purity figure)."""
    p = params_from_config(cfg)
    opts = cfg.get("decay", {})
    tau = _decay_tau(p, opts)
    p = p.replace(tau_minus=tau, tau_zero=tau, tau_plus=tau)
    initial = opts.get("initial", "rho2")
    if initial not in _DECAY_STATES:
        raise ConfigError(f"unknown initial state {initial!r}", path="$.decay.initial")
    psi = _DECAY_STATES[initial]()
    rho0 = np.outer(psi, psi.conj())
    t_end = float(opts.get("t_end_factor", 10.0)) * tau
    n = int(opts.get("samples", 201))
    times = np.linspace(0.0, t_end, n)
    spec = protocols.symmetric_decay_spec(p)
    _, samples = dynamics.integrate_master(rho0, spec, t_end,
                                           sample_times=times)
    nuc, efs, purs, exc = [], [], [], []
    for rho in samples:
        nuc.append(protocols.ideal_deexcitation(rho))
        efs.append(measures.entanglement_of_formation(nuc[-1], validate=False))
        purs.append(measures.purity(rho))
        exc.append(dynamics.excited_population(rho))
    rows = report.trajectory_rows(times, nuc, efs, purs, exc)
    path = report.write_csv(out / "decay.csv", report.trajectory_header(), rows)
    report.render_lines(out / "decay.png", times / tau,
                        {"purity": purs}, "t / tau", "purity",
                        title=f"optical decay, initial {initial}")
    return path


def _run_protocol(p: SystemParams, opts: dict, seed: int) -> protocols.ProtocolReport:
    name = opts.get("name")
    nuclear0 = opts.get("nuclear0")
    if nuclear0 is not None:
        if isinstance(nuclear0, str):
            nuclear0 = model.basis_state(0, nuclear0)[:4]
        else:
            nuclear0 = np.asarray(nuclear0, dtype=complex)
            nuclear0 = nuclear0 / np.linalg.norm(nuclear0)
    if name == "symmetric-polarized":
        return protocols.run_symmetric_polarized(
            p, nuclear0, switch_time=opts.get("switch_time"),
            include_decay=bool(opts.get("include_decay", True)))
    if name == "symmetric-mixed":
        return protocols.run_symmetric_mixed(
            p, nuclear0, include_decay=bool(opts.get("include_decay", True)))
    if name == "cphase-2pi":
        tau = float(opts.get("tau", 10.0))
        omega_d = opts.get("omega_D")
        if omega_d is None:
            omega_d = protocols.microwave_drive_frequency(p, "uu")
        return protocols.cphase_2pi(p, float(omega_d),
                                    float(opts.get("Omega0", 1.0)), tau,
                                    nuclear0=nuclear0)
    if name == "shelving":
        return protocols.run_shelving(p, nuclear0,
                                      bound=float(opts.get("bound", 0.01)))
    if name == "adiabatic":
        tau = float(opts.get("tau", 10.0))
        if "Omega0" in opts and "omega_D" in opts and "sigma" in opts:
            pulse = protocols.PulseSpec(shape="gaussian",
                                        omega_drive=float(opts["omega_D"]),
                                        power=float(opts["Omega0"]),
                                        sigma=float(opts["sigma"]))
            return protocols.run_adiabatic(p, pulse, tau, nuclear0=nuclear0)
        omega_d, omega0, sigma, _ = protocols.optimize_adiabatic(p, tau,
                                                                 nuclear0=nuclear0)
        pulse = protocols.PulseSpec(shape="gaussian", omega_drive=omega_d,
                                    power=omega0, sigma=sigma)
        return protocols.run_adiabatic(p, pulse, tau, nuclear0=nuclear0)
    raise ConfigError(f"unknown protocol {name!r}", path="$.protocol.name")


def cmd_protocol(cfg: dict, out: Path, seed: int) -> Path:
    p = params_from_config(cfg)
    rep = _run_protocol(p, cfg.get("protocol", {}), seed)
    payload = {
        "ef": rep.ef,
        "fidelity_to_target": rep.fidelity_to_target,
        "event_log": rep.event_log,
        "diagnostics": rep.diagnostics,
        "final_nuclear_state": rep.final_nuclear_state,
    }
    return write_json(out / "protocol.json", payload)


# ---------------------------------------------------------------------------
# sweep

def _axis_values(axis: dict, idx: int) -> list:
    keys = set(axis)
    if not {"name"} <= keys:
        raise ConfigError("axis needs a name", path=f"$.sweep.axes[{idx}]")
    if "values" in axis:
        return list(axis["values"])
    for k in ("start", "stop", "num"):
        if k not in axis:
            raise ConfigError("axis needs values or start/stop/num",
                              path=f"$.sweep.axes[{idx}]")
    n = int(axis["num"])
    if axis.get("scale", "linear") == "log":
        return list(np.geomspace(float(axis["start"]), float(axis["stop"]), n))
    return list(np.linspace(float(axis["start"]), float(axis["stop"]), n))


def _sweep_point(task):
    """Evaluate one grid point; module-level so it pickles for worker pools."""
    cfg, names, values, seed = task
    p = params_from_config(cfg)
    target = dict(cfg["sweep"]["target"])
    kind = target.pop("kind", "protocol")
    updates, opts = {}, {}
    param_fields = {f.name for f in dataclasses.fields(SystemParams)}
    for name, value in zip(names, values):
        if name == "A_both":
            updates["A"] = updates["A_prime"] = value
        elif name in param_fields:
            updates[name] = value
        else:
            opts[name] = value
    if updates:
        p = p.replace(**updates)
    if kind == "protocol":
        merged = {**target, **opts}
        rep = _run_protocol(p, merged, seed)
        return {"ef": rep.ef, "fidelity": rep.fidelity_to_target}
    if kind == "entangling-power-mc":
        gate = target.get("gate", "cnot")
        u = np.eye(4, dtype=complex)[:, [0, 1, 3, 2]] if gate == "cnot" else \
            _lemma_unitary(float(target.get("b", 0.5)),
                           float(target.get("beta", math.pi)))
        est = measures.entangling_power_mc(
            u, samples=int(target.get("samples", 20000)),
            seed=int(opts.get("seed", seed)))
        return {"mean": est.mean, "std_error": est.std_error}
    raise ConfigError(f"unknown sweep target kind {kind!r}",
                      path="$.sweep.target.kind")


def cmd_sweep(cfg: dict, out: Path, seed: int, jobs: int) -> Path:
    sweep = cfg.get("sweep")
    if not sweep or "target" not in sweep or "axes" not in sweep:
        raise ConfigError("sweep needs target and axes", path="$.sweep")
    axes = sweep["axes"]
    names = [a["name"] for a in axes]
    grids = [_axis_values(a, i) for i, a in enumerate(axes)]
    total = int(np.prod([len(g) for g in grids]))
    if total > MAX_GRID_POINTS:
        raise GridTooLargeError(f"sweep grid has {total} points "
                                f"(limit {MAX_GRID_POINTS})", path="$.sweep.axes")
    import itertools
    points = list(itertools.product(*grids))
    tasks = [(cfg, names, list(pt), seed) for pt in points]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_point, tasks,
                                    chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_sweep_point(t) for t in tasks]
    out_keys = sorted(results[0]) if results else []
    header = names + out_keys
    rows = [list(pt) + [res[k] for k in out_keys]
            for pt, res in zip(points, results)]
    return report.write_csv(out / "sweep.csv", header, rows)


# ---------------------------------------------------------------------------
# figures

def cmd_figure(cfg: dict, out: Path, seed: int) -> list:
    """Emit the CSV data (and a rendered PNG) for a named figure analogue."""
    opts = cfg.get("figure", {})
    name = opts.get("name")
    handlers = {"fig4": _figure4, "fig5": _figure5, "fig6": _figure6,
                "fig7": _figure7, "fig8-demo": _figure8_demo, "fig9": _figure9,
                "fig11": _figure11, "fig12": _figure12}
    if name not in handlers:
        raise UnknownFigureError(f"unknown figure {name!r}", path="$.figure.name")
    return handlers[name](cfg, out, seed)


def _figure4(cfg, out, seed):
    p = params_from_config(cfg)
    s = effective.symmetric_spectrum(p)
    n = int(cfg.get("figure", {}).get("points", 400))
    x = np.linspace(0.0, 2.0 * math.pi, n)
    ratio = s.a_zero / s.a_plus
    e_p = [measures.entangling_power_symmetric(1.0, xi) for xi in x]
    e_0 = [measures.entangling_power_symmetric(ratio, xi) for xi in x]
    csv = report.write_csv(out / "fig4.csv", ["a_plus_t", "e_plus", "e_zero"],
                           list(zip(x, e_p, e_0)))
    png = report.render_lines(out / "fig4.png", x,
                              {"e_plus": e_p, "e_zero": e_0},
                              "a_+ t (rad)", "entangling power")
    return [csv, png]


def _figure5(cfg, out, seed):
    p = params_from_config(cfg)
    tau = _decay_tau(p, cfg.get("figure", {}))
    p = p.replace(tau_minus=tau, tau_zero=tau, tau_plus=tau)
    n = int(cfg.get("figure", {}).get("points", 161))
    times = np.linspace(0.0, 8.0 * tau, n)
    spec = protocols.symmetric_decay_spec(p)
    curves = {}
    for label in ("rho1", "rho2", "rho3"):
        psi = _DECAY_STATES[label]()
        _, samples = dynamics.integrate_master(np.outer(psi, psi.conj()), spec,
                                               times[-1], sample_times=times)
        curves[label] = [measures.purity(r) for r in samples]
    csv = report.write_csv(out / "fig5.csv",
                           ["t_over_tau"] + list(curves),
                           [(t / tau,) + tuple(curves[k][i] for k in curves)
                            for i, t in enumerate(times)])
    png = report.render_lines(out / "fig5.png", times / tau, curves,
                              "t / tau", "purity")
    return [csv, png]


def _figure6(cfg, out, seed):
    p = params_from_config(cfg)
    a_values = cfg.get("figure", {}).get("a_values")
    if a_values is None:
        a_values = list(np.geomspace(0.01, 100.0, 17))
    rows = []
    import warnings as _w
    for a in a_values:
        pa = p.replace(A=float(a), A_prime=float(a))
        with _w.catch_warnings():
            _w.simplefilter("ignore", protocols.LifetimeHierarchyViolated)
            ef_pol = protocols.run_symmetric_polarized(pa).ef
            ef_mix = protocols.run_symmetric_mixed(pa).ef
        rows.append((a, ef_pol, ef_mix))
    csv = report.write_csv(out / "fig6.csv", ["A", "ef_polarized", "ef_mixed"], rows)
    png = report.render_lines(out / "fig6.png", [r[0] for r in rows],
                              {"polarized": [r[1] for r in rows],
                               "crystal mixture": [r[2] for r in rows]},
                              "A (MHz)", "entanglement of formation", logx=True)
    return [csv, png]


def _figure7(cfg, out, seed):
    chis = cfg.get("figure", {}).get("chi_values", [0.0, 0.5, 1.0, 2.0])
    n = int(cfg.get("figure", {}).get("points", 400))
    x = np.linspace(0.0, 2.0 * math.pi, n)
    curves = {f"chi={c:g}": [measures.crossover_entangling_power(1.0, c, xi)
                             for xi in x] for c in chis}
    header = ["a_t"] + list(curves)
    rows = [(xi,) + tuple(curves[k][i] for k in curves) for i, xi in enumerate(x)]
    csv = report.write_csv(out / "fig7.csv", header, rows)
    png = report.render_lines(out / "fig7.png", x, curves, "a_j t (rad)",
                              "entangling power")
    return [csv, png]


def _figure8_demo(cfg, out, seed):
    p = params_from_config(cfg)
    bound = float(cfg.get("figure", {}).get("bound", 0.01))
    rep = protocols.run_shelving(p, bound=bound)
    rows = [(t, omega, duration)
            for (omega, duration, (t, _label)) in zip(rep.diagnostics["omegas"],
                                                      rep.diagnostics["durations"],
                                                      rep.event_log)]
    csv = report.write_csv(out / "fig8_demo.csv",
                           ["t_start", "omega", "duration"], rows)
    png = report.render_lines(out / "fig8_demo.png",
                              list(range(1, len(rows) + 1)),
                              {"duration (us)": [r[2] for r in rows]},
                              "pulse", "duration (us)",
                              title=f"fidelity {rep.fidelity_to_target:.4f}")
    write_json(out / "fig8_demo.json",
               {"fidelity": rep.fidelity_to_target, "ef": rep.ef,
                "event_log": rep.event_log})
    return [csv, png]


def _figure9(cfg, out, seed):
    p = params_from_config(cfg)
    n = int(cfg.get("figure", {}).get("points", 41))
    d1 = np.linspace(-1.0, 1.0, n)
    d2 = np.linspace(-1.0, 1.0, n)
    a = model.second_order_couplings(p)["a"]
    rows = []
    surf = {j: np.zeros((n, n)) for j in SUBLEVELS}
    for iy, y in enumerate(d1):
        for ix, x in enumerate(d2):
            pa = p.replace(omega_n_prime=p.omega_n * (1.0 + y),
                           A_prime=p.A * (1.0 + x))
            f = model.asymmetry_strengths(pa)
            ms = {}
            for j in SUBLEVELS:
                chi = abs(f[j] / a[j]) if a[j] != 0 else math.inf
                ms[j] = measures.max_entangling_power(chi) if math.isfinite(chi) else 0.0
                surf[j][iy, ix] = ms[j]
            rows.append((y, x, ms[-1], ms[0], ms[1]))
    csv = report.write_csv(out / "fig9.csv",
                           ["Delta1", "Delta2", "m_minus", "m_zero", "m_plus"],
                           rows)
    outputs = [csv]
    for j, lab in ((-1, "minus"), (0, "zero"), (1, "plus")):
        outputs.append(report.render_surface(out / f"fig9_m_{lab}.png", d2, d1,
                                             surf[j], "Delta2", "Delta1",
                                             title=f"m_{lab}"))
    return outputs


def _figure11(cfg, out, seed):
    p = params_from_config(cfg)
    opts = cfg.get("figure", {})
    tau = float(opts.get("tau", 10.0))
    grid = opts.get("grid", [1.0, 2.0, 4.0, 8.0])
    rows = []
    for a in grid:
        for ap in grid:
            pa = p.replace(A=float(a), A_prime=float(ap))
            om, ef, t = protocols.optimize_2pi_power(pa, tau)
            rows.append((a, ap, ef, t, om))
    csv = report.write_csv(out / "fig11.csv",
                           ["A", "A_prime", "ef_star", "t_star", "Omega0_star"],
                           rows)
    n = len(grid)
    ef = np.array([r[2] for r in rows]).reshape(n, n)
    ts = np.array([r[3] for r in rows]).reshape(n, n)
    p1 = report.render_surface(out / "fig11_ef.png", grid, grid, ef,
                               "A_prime (MHz)", "A (MHz)", "EF*")
    p2 = report.render_surface(out / "fig11_t.png", grid, grid, ts,
                               "A_prime (MHz)", "A (MHz)", "t* (us)")
    return [csv, p1, p2]


def _figure12(cfg, out, seed):
    p = params_from_config(cfg)
    opts = cfg.get("figure", {})
    tau = float(opts.get("tau", 10.0))
    grid = opts.get("grid", [4.0, 6.0, 8.0, 11.0])
    rows = []
    for a in grid:
        for ap in grid:
            pa = p.replace(A=float(a), A_prime=float(ap))
            try:
                om_d, om0, sigma, ef = protocols.optimize_adiabatic(pa, tau)
                rows.append((a, ap, 6.0 * sigma, ef, om_d, om0))
            except (protocols.InfeasibleError, effective.WrongRegimeError):
                rows.append((a, ap, float("nan"), float("nan"),
                             float("nan"), float("nan")))
    csv = report.write_csv(out / "fig12.csv",
                           ["A", "A_prime", "duration_6sigma", "ef_star",
                            "omega_D_star", "Omega0_star"], rows)
    n = len(grid)
    ef = np.array([r[3] for r in rows]).reshape(n, n)
    du = np.array([r[2] for r in rows]).reshape(n, n)
    p1 = report.render_surface(out / "fig12_ef.png", grid, grid, ef,
                               "A_prime (MHz)", "A (MHz)", "EF (adiabatic)")
    p2 = report.render_surface(out / "fig12_duration.png", grid, grid, du,
                               "A_prime (MHz)", "A (MHz)", "6 sigma* (us)")
    return [csv, p1, p2]


# ---------------------------------------------------------------------------
# entry point

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tripletlink",
        description="Nuclear-spin entanglement via an optically excited triplet: "
                    "spectra, decay dynamics, protocol simulation.")
    parser.add_argument("command",
                        choices=["validate", "spectrum", "entangling-power",
                                 "decay", "protocol", "sweep", "figure"])
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--jobs", type=int, default=None,
                        help="parallel workers for sweeps (default: cpu count)")
    args = parser.parse_args(argv)
    out = Path(args.out)
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "validate":
            cmd_validate(cfg, out)
        elif args.command == "spectrum":
            cmd_spectrum(cfg, out)
        elif args.command == "entangling-power":
            cmd_entangling_power(cfg, out, seed)
        elif args.command == "decay":
            cmd_decay(cfg, out)
        elif args.command == "protocol":
            cmd_protocol(cfg, out, seed)
        elif args.command == "sweep":
            cmd_sweep(cfg, out, seed, jobs)
        elif args.command == "figure":
            cmd_figure(cfg, out, seed)
    except ConfigError as exc:
        print(json.dumps({"error": {"type": type(exc).__name__,
                                    "message": str(exc), "path": exc.path}}),
              file=sys.stderr)
        return 2
    except Exception as exc:   # runtime failure: report and signal
        print(json.dumps({"error": {"type": type(exc).__name__,
                                    "message": str(exc)}}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
