"""Command-line interface: ``nhxy {spectrum,le,phase,mcwf,spinwave,presets}``.

Every run reads one JSON document (``--config`` or a shipped ``--preset``),
writes CSV tables plus a JSON sidecar into ``--out`` and exits with
0 (ok), 2 (bad configuration), 3 (numerical failure) or 4 (size cap).
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (
    METHODS,
    SCALES,
    PropagatorPolicy,
    cap_rate,
    loschmidt_observables,
    propagate,
    scale_exponent,
)
from .errors import BracketError, CapacityError, ConfigError, NHXYError, NumericalError
from .model import (
    ModelParams,
    build_h_nh,
    build_h_pt,
    dipolar_coupling,
    is_reflection_symmetric,
    reduce_two_atom,
)
from .open_system import MAX_LINDBLAD_SITES, OpenSystemSpec, lindblad_propagate, mcwf_run
from .output import write_csv, write_sidecar
from .spectral import (
    EPS_IM,
    adiabatic_two_level,
    classify_eigenvalues,
    ep_curve,
    find_ep,
    pr_map,
    sector_eigenvalues,
)
from .spinwave import COUPLING_CONVENTION, blockade_report, compare_heff_conventions, spinwave_modes
from .sweep import DisorderSpec, apply_dark_floor, boundary_adjacent, disorder_average, n_scan, rate_map

log = logging.getLogger("nhxy")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CAPACITY = 0, 2, 3, 4

PARAM_KEYS = {
    "omega", "n_sites", "gamma", "v", "interaction_range", "couplings",
    "dark_count_floor", "dipolar",
}
DIPOLAR_KEYS = {"c3", "spacing", "gamma"}
POLICY_KEYS = {"method", "condition_threshold", "rtol", "atol"}
DISORDER_KEYS = {"v_sigma", "n_samples", "seed", "relative", "omega_sigma"}
COMMON_KEYS = {"command", "description", "params", "eps_im", "seed", "scale"}
COMMAND_KEYS = {
    "spectrum": {"scan", "sector", "operator", "ep_bracket"},
    "le": {"times", "t_e", "variants", "n_values", "ranges", "policy", "disorder"},
    "phase": {"mode", "omega", "v", "n_values", "t_e", "threshold", "sector", "omega_bracket",
              "stop_after_boundary"},
    "mcwf": {"n_values", "n_traj", "times", "lindblad"},
    "spinwave": {"n_values", "t_e", "t_s", "range"},
}
COMMANDS = tuple(COMMAND_KEYS)

_PI_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*pi\s*$")


# -- configuration -------------------------------------------------------------


class _Doc:
    """A parsed config plus its text, so errors can point at a line."""

    def __init__(self, data: dict, text: str, source: str):
        self.data, self.text, self.source = data, text, source

    def where(self, key: str) -> str:
        for lineno, line in enumerate(self.text.splitlines(), start=1):
            if f'"{key}"' in line:
                return f"{self.source}:{lineno}"
        return self.source

    def fail(self, key: str, msg: str):
        raise ConfigError(f"{self.where(key)}: key '{key}': {msg}")


def load_document(text: str, source: str) -> _Doc:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    return _Doc(data, text, source)


def preset_names() -> list[str]:
    root = resources.files("nhxy") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> _Doc:
    path = resources.files("nhxy") / "presets" / f"{name}.json"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return load_document(path.read_text(), f"preset:{name}")


def _check_keys(doc: _Doc, section: dict, allowed: set, where: str = "") -> None:
    for key in section:
        if key not in allowed:
            doc.fail(key, f"unknown key{' in ' + where if where else ''} (allowed: {', '.join(sorted(allowed))})")


def number(doc: _Doc, key: str, value) -> float:
    """A float, or a string such as ``"2.1pi"`` meaning a multiple of pi."""
    if isinstance(value, bool):
        doc.fail(key, f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _PI_RE.match(value)
        if m:
            return float(m.group(1) or 1.0) * np.pi
    doc.fail(key, f"expected a number or '<x>pi', got {value!r}")


def grid_values(doc: _Doc, key: str, spec) -> np.ndarray:
    """``[x0, x1, ...]`` or ``{"start": a, "stop": b, "num": n}``."""
    if isinstance(spec, list):
        if not spec:
            doc.fail(key, "empty list")
        return np.array([number(doc, key, v) for v in spec])
    if isinstance(spec, dict):
        _check_keys(doc, spec, {"start", "stop", "num"}, key)
        missing = {"start", "stop", "num"} - set(spec)
        if missing:
            doc.fail(key, f"missing {', '.join(sorted(missing))}")
        num = spec["num"]
        if not isinstance(num, int) or num < 1:
            doc.fail(key, f"num must be a positive integer, got {num!r}")
        return np.linspace(number(doc, key, spec["start"]), number(doc, key, spec["stop"]), num)
    doc.fail(key, "expected a list or a {start, stop, num} object")


def build_params(doc: _Doc, raw: dict | None, range_override: str | None = None) -> ModelParams:
    if raw is None:
        doc.fail("params", "missing")
    if not isinstance(raw, dict):
        doc.fail("params", "expected an object")
    _check_keys(doc, raw, PARAM_KEYS, "params")
    kw = {}
    for k in ("omega", "gamma", "v", "dark_count_floor"):
        if k in raw:
            kw[k] = number(doc, k, raw[k])
    if "n_sites" in raw:
        kw["n_sites"] = raw["n_sites"]
    if "interaction_range" in raw:
        kw["interaction_range"] = raw["interaction_range"]
    if "couplings" in raw:
        kw["couplings"] = np.array(raw["couplings"], dtype=float)
    if "dipolar" in raw:
        dip = raw["dipolar"]
        _check_keys(doc, dip, DIPOLAR_KEYS, "dipolar")
        if "v" in raw:
            doc.fail("dipolar", "give either 'v' or 'dipolar', not both")
        try:
            v_lab = dipolar_coupling(float(dip["c3"]), float(dip["spacing"]))
            kw["v"] = v_lab / float(dip["gamma"])
        except KeyError as exc:
            doc.fail("dipolar", f"missing {exc.args[0]}")
    if range_override:
        kw["interaction_range"] = "nearest-neighbor" if range_override == "nn" else range_override
    if "omega" not in kw:
        doc.fail("params", "missing 'omega'")
    try:
        return ModelParams(**kw)
    except ConfigError as exc:
        raise ConfigError(f"{doc.where('params')}: {exc}") from None


def build_policy(doc: _Doc, raw: dict | None) -> PropagatorPolicy:
    if raw is None:
        return PropagatorPolicy()
    _check_keys(doc, raw, POLICY_KEYS, "policy")
    kw = {k: (raw[k] if k == "method" else float(raw[k])) for k in raw}
    if kw.get("method", "spectral") not in METHODS:
        doc.fail("method", f"must be one of {METHODS}")
    return PropagatorPolicy(**kw)


def build_disorder(doc: _Doc, raw: dict | None, seed: int) -> DisorderSpec | None:
    if raw is None:
        return None
    _check_keys(doc, raw, DISORDER_KEYS, "disorder")
    return DisorderSpec(
        v_sigma=float(raw.get("v_sigma", 0.0)),
        n_samples=int(raw.get("n_samples", 1)),
        seed=int(raw.get("seed", seed)),
        relative=bool(raw.get("relative", True)),
        omega_sigma=float(raw.get("omega_sigma", 0.0)),
    )


class RunConfig:
    """Validated view of a config document with command-line overrides applied."""

    def __init__(self, doc: _Doc, command: str, args: argparse.Namespace):
        data = doc.data
        if data.get("command", command) != command:
            doc.fail("command", f"document is for '{data['command']}', not '{command}'")
        _check_keys(doc, data, COMMON_KEYS | COMMAND_KEYS[command])
        self.doc = doc
        self.command = command
        self.data = data
        self.range_override = getattr(args, "range", None)
        self.params = build_params(doc, data.get("params"), self.range_override)
        eps = args.eps_im if args.eps_im is not None else data.get("eps_im", EPS_IM)
        self.eps_im = number(doc, "eps_im", eps)
        if not self.eps_im > 0:
            doc.fail("eps_im", "must be > 0")
        seed = args.seed if args.seed is not None else data.get("seed", 0)
        if not isinstance(seed, int) or not 0 <= seed < 2**64:
            doc.fail("seed", f"must be an unsigned 64-bit integer, got {seed!r}")
        self.seed = seed
        self.scale = args.scale or data.get("scale", "paper-fig2")
        if self.scale not in SCALES:
            doc.fail("scale", f"must be one of {SCALES}")
        self.threads = args.threads

    def get(self, key, default=None):
        return self.data.get(key, default)

    def require(self, key):
        if key not in self.data:
            self.doc.fail(key, "missing")
        return self.data[key]

    def num(self, key, default=None):
        if key not in self.data:
            if default is None:
                self.doc.fail(key, "missing")
            return float(default)
        return number(self.doc, key, self.data[key])

    def grid(self, key):
        return grid_values(self.doc, key, self.require(key))

    def ints(self, key):
        vals = self.require(key)
        if not isinstance(vals, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in vals):
            self.doc.fail(key, "expected a list of integers")
        return [int(v) for v in vals]

    def choice(self, key, options, default):
        value = self.data.get(key, default)
        if value not in options:
            self.doc.fail(key, f"must be one of {options}, got {value!r}")
        return value

    def resolved(self) -> dict:
        out = dict(self.data)
        out.update(
            params=self.params.as_dict(), eps_im=self.eps_im, seed=self.seed, scale=self.scale
        )
        return out


# -- commands --------------------------------------------------------------------


def _sidecar(cfg: RunConfig, out: Path, **payload) -> None:
    write_sidecar(
        out / f"{cfg.command}.json",
        {"command": cfg.command, "code_version": __version__, "config": cfg.resolved(), **payload},
    )


def _sorted_eigs(evals) -> np.ndarray:
    evals = np.asarray(evals, dtype=complex)
    order = np.lexsort((np.round(evals.imag, 12), np.round(evals.real, 12)))
    return evals[order]


def _spectrum_rows(p: ModelParams, sector: str, operator: str):
    build = build_h_pt if operator == "pt" else build_h_nh
    h = build(p)
    if sector == "two-atom-symmetric":
        if p.n_sites != 2:
            raise ConfigError("sector 'two-atom-symmetric' needs n_sites = 2")
        red, dark = reduce_two_atom(h)
        coupled = _sorted_eigs(np.linalg.eigvals(red.matrix))
        return [(e, 0) for e in coupled] + [(complex(dark), 1)]
    if p.n_sites >= 2 and is_reflection_symmetric(h.matrix, p.n_sites):
        parts = sector_eigenvalues(h)
        return [(e, 0) for e in _sorted_eigs(parts[+1])] + [(e, 1) for e in _sorted_eigs(parts[-1])]
    return [(e, 0) for e in _sorted_eigs(np.linalg.eigvals(h.matrix))]


def cmd_spectrum(cfg: RunConfig, out: Path) -> None:
    scan = cfg.require("scan")
    if not isinstance(scan, dict):
        cfg.doc.fail("scan", "expected {axis, values}")
    _check_keys(cfg.doc, scan, {"axis", "values"}, "scan")
    axis = scan.get("axis")
    if axis not in ("omega", "v"):
        cfg.doc.fail("axis", "must be 'omega' or 'v'")
    values = grid_values(cfg.doc, "values", scan.get("values"))
    sector = cfg.choice("sector", ("full", "two-atom-symmetric"), "full")
    operator = cfg.choice("operator", ("pt", "nh"), "pt")
    p = cfg.params
    rows = []
    for x in values:
        q = p.replace(**{axis: float(x)})
        pt_broken = classify_eigenvalues(
            [e for e, _ in _spectrum_rows(q, sector, "pt")], cfg.eps_im
        ).is_pt_broken
        for branch, (e, dark) in enumerate(_spectrum_rows(q, sector, operator)):
            rows.append([x, branch, e.real, e.imag, dark, int(pt_broken)])
    write_csv(out / "spectrum.csv", [axis, "branch", "re", "im", "dark", "pt_broken"], rows)

    lo, hi = cfg.get("ep_bracket", [float(values.min()), float(values.max())])
    try:
        ep = find_ep(p, axis, sector, (number(cfg.doc, "ep_bracket", lo), number(cfg.doc, "ep_bracket", hi)), cfg.eps_im)
    except BracketError:
        ep = None
    extra = {}
    if p.n_sites == 2:
        est = adiabatic_two_level(p)
        extra = {"ep_estimate": est.ep_estimate, "ep_estimate_unsimplified": est.ep_unsimplified}
    _sidecar(cfg, out, ep=ep, ep_axis=axis, sector=sector, operator=operator, **extra)


def _le_rows(rec, variant: int, scale: str, floor: float, max_m: int, extra_cols=None):
    rate, capped = cap_rate(rec.rate)
    scaled = rec.le * np.exp(scale_exponent(scale, rec.n_sites, rec.gamma) * rec.times)
    reported = apply_dark_floor(rec.le, floor)
    rows = []
    for k, t in enumerate(rec.times):
        pops = list(rec.manifold_pop[k]) + [0.0] * (max_m + 1 - rec.manifold_pop.shape[1])
        loss = list(rec.manifold_loss[k]) + [0.0] * (max_m + 1 - rec.manifold_loss.shape[1])
        row = [variant, rec.n_sites, t, rec.le[k], scaled[k], rec.normalized_le[k], rate[k], int(capped[k]),
               rec.norm[k], rec.ipr[k], reported[k], *pops, *loss]
        if extra_cols is not None:
            row += [c[k] for c in extra_cols]
        rows.append(row)
    return rows


def cmd_le(cfg: RunConfig, out: Path) -> None:
    if "times" not in cfg.data and "n_values" not in cfg.data:
        cfg.doc.fail("times", "give 'times' and/or 'n_values'")
    policy = build_policy(cfg.doc, cfg.get("policy"))
    payload = {}
    if "times" in cfg.data:
        times = cfg.grid("times")
        variants = cfg.get("variants", [{}])
        if not isinstance(variants, list) or not variants:
            cfg.doc.fail("variants", "expected a non-empty list of parameter overrides")
        plist = []
        for over in variants:
            _check_keys(cfg.doc, over, PARAM_KEYS, "variants")
            merged = {**cfg.data["params"], **over}
            plist.append(build_params(cfg.doc, merged, cfg.range_override))
        disorder = build_disorder(cfg.doc, cfg.get("disorder"), cfg.seed)
        max_m = max(q.n_sites for q in plist)
        header = ["variant", "n_sites", "t", "le", "scaled_le", "normalized_le", "rate", "rate_capped",
                  "norm", "ipr", "le_reported"]
        header += [f"p_{m}" for m in range(max_m + 1)] + [f"loss_{m}" for m in range(max_m + 1)]
        if disorder is not None:
            header += ["le_mean", "le_std"]
        rows, summary = [], []
        for i, q in enumerate(plist):
            rec = propagate(build_h_nh(q), times, policy=policy, keep_states=False)
            extra = None
            if disorder is not None:
                res = disorder_average(
                    lambda s: propagate(build_h_nh(s), times, policy=policy, keep_states=False).le,
                    q, disorder, cfg.threads,
                )
                extra = [res.mean, res.std]
            rows += _le_rows(rec, i, cfg.scale, q.dark_count_floor, max_m, extra)
            item = {"variant": i, "params": q.as_dict(), "method": rec.method}
            if "t_e" in cfg.data:
                pt = loschmidt_observables(rec, cfg.num("t_e"), cfg.scale)
                item.update(le=pt.le, rate=pt.rate_serialized, rate_capped=pt.rate_capped, scaled_le=pt.scaled_le)
            summary.append(item)
        write_csv(out / "le.csv", header, rows)
        payload["variants"] = summary
    if "n_values" in cfg.data:
        t_e = cfg.num("t_e")
        ranges = cfg.get("ranges", [cfg.params.interaction_range])
        rows = []
        extrema = {}
        for rng in ranges:
            if rng not in ("full", "nearest-neighbor", "nn"):
                cfg.doc.fail("ranges", f"unknown range {rng!r}")
            scan = n_scan(cfg.params, t_e, cfg.ints("n_values"), rng, threads=cfg.threads, policy=policy)
            rate, capped = cap_rate(scan.rate)
            for n, f, fr, lam, c in zip(scan.n_values, scan.le, scan.le_reported, rate, capped):
                rows.append([scan.range_mode, n, f, fr, lam, int(c)])
            maxima, minima = scan.local_extrema()
            extrema[scan.range_mode] = {"maxima": maxima, "minima": minima}
        write_csv(out / "nscan.csv", ["range", "n_sites", "le", "le_reported", "rate", "rate_capped"], rows)
        payload["n_scan_extrema"] = extrema
    _sidecar(cfg, out, scale=cfg.scale, **payload)


def _write_grid(path: Path, grid) -> None:
    header, rows = grid.rows()
    write_csv(path, header, rows)


def cmd_phase(cfg: RunConfig, out: Path) -> None:
    mode = cfg.choice("mode", ("rate_map", "pr_map", "ep_scan"), "rate_map")
    p = cfg.params
    if mode == "rate_map":
        threshold = cfg.num("threshold", 5.0)
        grid = rate_map(p, cfg.grid("omega"), cfg.grid("v"), cfg.num("t_e"), threshold,
                        cfg.eps_im, cfg.scale, cfg.threads)
        _write_grid(out / "phase.csv", grid)
        rows = []
        for cid, line in enumerate(grid.meta["contours"]):
            rows += [[cid, j, om, v] for j, (om, v) in enumerate(line)]
        write_csv(out / "contours.csv", ["contour", "point", "omega", "v"], rows)
        ests = [adiabatic_two_level(p.replace(v=float(v))).ep_estimate for v in grid.axes[1][1]]
        write_csv(
            out / "boundary.csv", ["v", "omega_c", "omega_c_estimate"],
            [[v, om, e] for (om, v), e in zip(grid.meta["spectral_boundary"], ests)],
        )
        agree = grid.values["agree"]
        done = ~grid.skipped
        sb = grid.values["spectral_broken"].astype(bool)
        off = done & (agree == 0)
        _sidecar(
            cfg, out, mode=mode, threshold=threshold,
            agreement=float(agree[done].mean()) if done.any() else None,
            disagreements_off_boundary=int((off & ~boundary_adjacent(sb)).sum()),
            skipped=int(grid.skipped.sum()),
        )
    elif mode == "pr_map":
        x_axis = ("v", cfg.grid("v"))
        if "n_values" in cfg.data:
            y_axis = ("n_sites", np.array(cfg.ints("n_values"), dtype=float))
        else:
            y_axis = ("omega", cfg.grid("omega"))
        grid = pr_map(p, x_axis, y_axis, cfg.eps_im, cfg.threads,
                      stop_after_boundary=bool(cfg.get("stop_after_boundary", False)))
        _write_grid(out / "phase.csv", grid)
        write_csv(
            out / "boundary.csv", [y_axis[0], "v_c_raw", "v_c_smoothed"],
            list(zip(y_axis[1], grid.meta["boundary_raw"], grid.meta["boundary_smoothed"])),
        )
        _sidecar(cfg, out, mode=mode, skipped=int(grid.skipped.sum()))
    else:
        vs = cfg.grid("v")
        sector = cfg.choice("sector", ("full", "two-atom-symmetric"), "two-atom-symmetric")
        br = cfg.get("omega_bracket", [0.0, 4.0])
        bracket = (number(cfg.doc, "omega_bracket", br[0]), number(cfg.doc, "omega_bracket", br[1]))
        oc = ep_curve(p, vs, bracket, sector, cfg.eps_im, cfg.threads)
        rows = []
        for v, o in zip(vs, oc):
            est = adiabatic_two_level(p.replace(v=float(v)))
            rows.append([v, o, est.ep_estimate, np.nan if est.ep_unsimplified is None else est.ep_unsimplified])
        write_csv(out / "boundary.csv", ["v", "omega_c", "omega_c_estimate", "omega_c_unsimplified"], rows)
        _sidecar(cfg, out, mode=mode, sector=sector)


def agreement_z(mean, stderr, reference, atol: float = 1e-12) -> np.ndarray:
    """``|mean - reference| / stderr``; zero-width points count as agreeing within ``atol``."""
    diff = np.abs(np.asarray(mean) - np.asarray(reference))
    stderr = np.asarray(stderr)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(stderr > 0, diff / stderr, np.where(diff <= atol, 0.0, np.inf))
    return z


def cmd_mcwf(cfg: RunConfig, out: Path) -> None:
    times = cfg.grid("times")
    n_traj = cfg.get("n_traj", 1000)
    if not isinstance(n_traj, int) or n_traj < 1:
        cfg.doc.fail("n_traj", "must be a positive integer")
    n_values = cfg.ints("n_values") if "n_values" in cfg.data else [cfg.params.n_sites]
    with_lindblad = bool(cfg.get("lindblad", True))
    rows, jump_rows, metric = [], [], {}
    for n in n_values:
        q = cfg.params.replace(n_sites=n)
        spec = OpenSystemSpec.from_params(q)
        ens = mcwf_run(spec, n_traj, cfg.seed, times, cfg.threads)
        nh = propagate(build_h_nh(q), times, keep_states=False).le
        lind = (
            lindblad_propagate(spec, times).le
            if with_lindblad and n <= MAX_LINDBLAD_SITES
            else np.full(len(times), np.nan)
        )
        err = ens.le_stderr_adjusted
        z = agreement_z(ens.le_mean, err, nh)
        metric[str(n)] = float(z.max())
        for k, t in enumerate(times):
            rows.append([n, t, ens.le_mean[k], ens.le_stderr[k], err[k], nh[k], lind[k], z[k], ens.survival[k]])
        for j, log_j in enumerate(ens.jumps):
            jump_rows += [[n, j, i, t, s] for i, (t, s) in enumerate(log_j)]
    write_csv(out / "mcwf.csv", ["n_sites", "t", "mean", "stderr", "stderr_adjusted", "nh", "lindblad", "z", "survival"], rows)
    write_csv(out / "jumps.csv", ["n_sites", "trajectory", "jump", "t", "site"], jump_rows)
    _sidecar(cfg, out, n_traj=n_traj, max_z=metric)


def cmd_spinwave(cfg: RunConfig, out: Path) -> None:
    n_values = cfg.ints("n_values")
    rng = cfg.choice("range", ("full", "nearest-neighbor", "nn"), cfg.params.interaction_range)
    rows = []
    for n in n_values:
        for m in spinwave_modes(cfg.params.replace(n_sites=n), rng):
            rows.append([n, m.k, m.symmetry, m.energy_u, m.coupling_omega])
    write_csv(out / "modes.csv", ["n_sites", "k", "symmetry", "energy_u", "coupling_omega"], rows)
    payload = {"coupling_convention": COUPLING_CONVENTION}
    if "t_e" in cfg.data:
        t_s = cfg.num("t_s") if "t_s" in cfg.data else None
        report = blockade_report(cfg.params, cfg.num("t_e"), n_values, t_s)
        write_csv(
            out / "blockade.csv",
            ["n_sites", "excitation", "excitation_free", "stationary", "stationary_free", "reference"],
            [[r.n_sites, r.excitation, r.excitation_free,
              np.nan if r.stationary is None else r.stationary,
              np.nan if r.stationary_free is None else r.stationary_free, r.reference] for r in report],
        )
        grid = np.linspace(0.0, cfg.num("t_e"), 101)
        payload["heff_convention_error"] = {
            str(n): compare_heff_conventions(cfg.params.replace(n_sites=n), grid, rng) for n in n_values
        }
    _sidecar(cfg, out, **payload)


HANDLERS = {
    "spectrum": cmd_spectrum,
    "le": cmd_le,
    "phase": cmd_phase,
    "mcwf": cmd_mcwf,
    "spinwave": cmd_spinwave,
}


# -- entry point ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nhxy", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=f"run the {name} command")
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", type=Path, help="JSON run configuration")
        src.add_argument("--preset", help="name of a shipped preset (see 'nhxy presets')")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="master seed (unsigned 64-bit)")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (default: $NHXY_THREADS or 1)")
        sp.add_argument("--scale", choices=SCALES, default=None, help="scaled-LE convention")
        sp.add_argument("--range", choices=("full", "nn"), default=None, help="override the interaction range")
        sp.add_argument("--eps-im", type=float, default=None, help="imaginary-part tolerance")
        sp.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("presets", help="list shipped presets")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        for name in preset_names():
            doc = load_preset(name)
            print(f"{name:8s} {doc.data.get('command', '?'):9s} {doc.data.get('description', '')}")
        return EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.preset:
            doc = load_preset(args.preset)
        else:
            try:
                text = args.config.read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read {args.config}: {exc.strerror}") from None
            doc = load_document(text, str(args.config))
        cfg = RunConfig(doc, args.command, args)
        args.out.mkdir(parents=True, exist_ok=True)
        HANDLERS[args.command](cfg, args.out)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, NHXYError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
