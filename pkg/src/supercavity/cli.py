"""Command-line front end.

Every command writes either a curve (CSV header ``k,E,T,R``) or a site
table. JSON output holds ``{config, grid, T, R, analysis}``; ``config`` is
the full run snapshot and is accepted back by :meth:`RunConfig.from_dict`.

Settings are merged as flags over config-file values over defaults. The
config file is flat ``key = value`` text whose keys are the flag names
without the leading dashes (``n-cavities = 31``).
"""
from __future__ import annotations

import argparse
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis, exact, tla
from .errors import DegeneracyError, DomainError, NumericError, SplittingNotResolved
from .model import SystemParams, diagonalize_sc, empty_mode, mode_coupling, rabi_splitting, theta

COMMANDS = ("spectrum", "modes", "rabi", "valley", "tla-compare", "reproduce")
FORMATS = ("csv", "json")
FIGURES = (2, 3, 4, 5, 6, 7)
REFERENCE_OMEGA_A = 1.847760755


class ConfigError(DomainError):
    """Invalid command line or config file."""


def _none_or_int(text):
    return None if str(text).strip().lower() in ("", "none") else int(text)


def _bool(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# flag name -> (converter, default)
SETTINGS = {
    "n-cavities": (int, 31),
    "atom-site": (_none_or_int, None),
    "omega-a": (float, REFERENCE_OMEGA_A),
    "omega-c": (float, 0.0),
    "eta": (float, 0.01),
    "xi": (float, 1.0),
    "g": (float, 0.1),
    "k-min": (float, None),
    "k-max": (float, None),
    "samples": (int, None),
    "method": (str, "closed-form"),
    "out": (str, None),
    "format": (str, "csv"),
    "figure": (int, None),
    "mode": (int, 4),
    "window": (float, None),
    "refine": (_bool, None),
}

# command -> (default half-window around theta_m, default samples, resonance-refined grid)
COMMAND_GRIDS = {
    "spectrum": (None, 2001, False),
    "modes": (None, 2, False),
    "rabi": (0.04, 4001, True),
    "valley": (2e-5, 4001, True),
    "tla-compare": (2e-5, 4001, False),
}


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    command: str
    k_range: tuple[float, float] | None
    samples: int
    method: str
    output: str | None
    format: str
    mode: int = 4
    figure: int | None = None
    refine: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.format not in FORMATS:
            raise ConfigError(f"--format must be one of {FORMATS}, got {self.format!r}")
        if self.method not in exact.METHODS:
            raise ConfigError(f"--method must be one of {exact.METHODS}, got {self.method!r}")
        if isinstance(self.samples, bool) or int(self.samples) != self.samples or self.samples < 2:
            raise ConfigError(f"--samples must be an integer >= 2, got {self.samples!r}")
        if self.k_range is not None:
            lo, hi = (float(v) for v in self.k_range)
            if not 0.0 < lo < hi < math.pi:
                raise ConfigError(f"need 0 < k-min < k-max < pi, got ({lo}, {hi})")
            object.__setattr__(self, "k_range", (lo, hi))
        if self.command == "reproduce" and self.figure not in FIGURES:
            raise ConfigError(f"reproduce needs --figure in {FIGURES}, got {self.figure!r}")

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        out["params"] = self.params.to_dict()
        out["k_range"] = None if self.k_range is None else list(self.k_range)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        data = dict(data)
        data["params"] = SystemParams.from_dict(data["params"])
        if data.get("k_range") is not None:
            data["k_range"] = tuple(data["k_range"])
        return cls(**data)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="supercavity", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="flat key = value settings file")
    for name, (conv, _) in SETTINGS.items():
        kwargs = {"dest": name.replace("-", "_"), "default": argparse.SUPPRESS}
        if name == "refine":
            parser.add_argument("--refine", action=argparse.BooleanOptionalAction, **kwargs,
                                help="add resonance windows to the grid")
            continue
        if name == "method":
            kwargs["choices"] = exact.METHODS
        elif name == "format":
            kwargs["choices"] = FORMATS
        elif name == "figure":
            kwargs["choices"] = FIGURES
        kwargs["type"] = conv
        parser.add_argument("--" + name, **kwargs)
    return parser


def _normalise_key(key: str) -> str:
    return key.strip().lstrip("-").lower().replace("_", "-")


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines (``:`` also accepted, ``#`` starts a comment)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split(sep, 1))
        name = _normalise_key(key)
        if name not in SETTINGS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[name.replace("-", "_")] = SETTINGS[name][0](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    return values


def resolve_config(argv=None) -> RunConfig:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config", None)
    merged = {name.replace("-", "_"): default for name, (_, default) in SETTINGS.items()}
    if config_path is not None:
        merged.update(read_config_file(config_path))
    merged.update(args)
    return _make_config(command, merged)


def _make_config(command: str, s: dict) -> RunConfig:
    try:
        params = SystemParams(
            n_cavities=s["n_cavities"], atom_site=s["atom_site"], omega_a=s["omega_a"],
            g=s["g"], eta=s["eta"], xi=s["xi"], omega_c=s["omega_c"],
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    if command == "reproduce":
        params, k_range, samples, refine = _figure_header(s["figure"])
    else:
        half, samples, refine = COMMAND_GRIDS[command]
        if s["samples"] is not None:
            samples = s["samples"]
        if s["refine"] is not None:
            refine = s["refine"]
        if half is None:
            k_range = (0.05, 0.55) if command == "spectrum" else None
        else:
            if s["window"] is not None:
                half = s["window"]
            if not 1 <= s["mode"] <= params.n_cavities:
                raise ConfigError(f"--mode must lie in 1..{params.n_cavities}, got {s['mode']}")
            th = theta(s["mode"], params.n_cavities)
            k_range = (max(th - half, 1e-6), min(th + half, math.pi - 1e-6))
        lo, hi = s["k_min"], s["k_max"]
        if (lo is not None or hi is not None) and command != "modes":
            base = k_range or (0.05, 0.55)
            k_range = (base[0] if lo is None else lo, base[1] if hi is None else hi)
    return RunConfig(params=params, command=command, k_range=k_range, samples=samples,
                     method=s["method"], output=s["out"], format=s["format"], mode=s["mode"],
                     figure=s["figure"] if command == "reproduce" else None, refine=refine)


# ---------------------------------------------------------------- artifacts

@dataclass
class Artifact:
    """One output file: a sampled curve or a named-column table."""

    label: str
    analysis: dict
    scan: exact.SpectrumScan | None = None
    columns: dict | None = None


def _grid(params, k_range, samples, refine):
    if refine:
        return exact.resonance_grid(params, k_range[0], k_range[1], samples)
    return np.linspace(k_range[0], k_range[1], samples)


def _curve(label, params, grid, method="closed-form", extra=None):
    scan = exact.scan_grid(params, grid, method)
    info = analysis.find_peaks(scan).to_dict()
    info.update(extra or {})
    info["curve"] = label
    info["T_min"] = float(scan.T.min())
    return Artifact(label, info, scan=scan)


def _tla_curve(label, params, tlm, grid, channels=tla.CHANNELS):
    scan = tla.tla_scan(params, tlm, grid, channels)
    info = analysis.find_peaks(scan).to_dict()
    info["curve"] = label
    info["T_min"] = float(scan.T.min())
    return Artifact(label, info, scan=scan)


def _splitting_info(scan, params, m):
    report = analysis.find_peaks(scan)
    delta, (lower, upper) = analysis.splitting_from_report(report)
    return {"splitting": delta, "E_lower": lower.E_center, "E_upper": upper.E_center,
            "single_mode_prediction": rabi_splitting(m, params),
            "two_g_m": 2.0 * abs(mode_coupling(m, params))}


def _cmd_spectrum(cfg):
    grid = _grid(cfg.params, cfg.k_range, cfg.samples, cfg.refine)
    return [_curve("spectrum", cfg.params, grid, cfg.method)]


def _cmd_modes(cfg):
    modes = diagonalize_sc(cfg.params)
    weights = modes.atomic_weight()
    info = {"frequencies": modes.frequencies.tolist(), "atomic_weight": weights.tolist(),
            "basis": list(modes.basis_labels), "vectors": modes.vectors.T.tolist()}
    columns = {"index": list(range(1, len(modes) + 1)), "frequency": modes.frequencies.tolist(),
               "atomic_weight": weights.tolist()}
    return [Artifact("modes", info, columns=columns)]


def _cmd_rabi(cfg):
    if not cfg.params.has_atom:
        raise ConfigError("rabi needs --atom-site")
    art = _curve("rabi", cfg.params, _grid(cfg.params, cfg.k_range, cfg.samples, cfg.refine),
                 cfg.method)
    art.analysis.update(_splitting_info(art.scan, cfg.params, cfg.mode))
    return [art]


def _cmd_valley(cfg):
    art = _curve("valley", cfg.params, _grid(cfg.params, cfg.k_range, cfg.samples, cfg.refine),
                 cfg.method)
    if not art.analysis["valleys"]:
        raise SplittingNotResolved("no transmission valley found in the scan window")
    return [art]


def _tla_set(params, m, grid, method, suffix=""):
    if not params.has_atom:
        raise ConfigError("tla-compare needs --atom-site at a node of --mode")
    tlm = tla.build_tla(params, m)
    ex = _curve("exact" + suffix, params, grid, method)
    approx = _tla_curve("tla" + suffix, params, tlm, grid)
    worst, rms = analysis.compare_scans(ex.scan, approx.scan)
    dip = tla.transmission_minimum(tlm, params, grid[0], grid[-1])
    sol = tla.tla_scatter(dip, tlm, params)
    approx.analysis.update({
        "max_abs_dT": worst, "rms_dT": rms, "nu_m": tlm.nu_m, "omega_A": tlm.omega_A,
        "alpha1": tlm.alpha1, "beta1": tlm.beta1, "alpha2": tlm.alpha2, "beta2": tlm.beta2,
        "dip_k": dip, "dip_T": sol.T, "dark_state_residual": tla.dark_state_residual(sol, tlm),
        "dark_state_energy": tla.dark_state_energy(tlm),
    })
    channels = [_tla_curve(ch + suffix, params, tlm, grid, (ch,)) for ch in tla.CHANNELS]
    return [ex, approx] + channels


def _cmd_tla_compare(cfg):
    grid = _grid(cfg.params, cfg.k_range, cfg.samples, cfg.refine)
    return _tla_set(cfg.params, cfg.mode, grid, cfg.method)


COMMAND_RUNNERS = {
    "spectrum": _cmd_spectrum,
    "modes": _cmd_modes,
    "rabi": _cmd_rabi,
    "valley": _cmd_valley,
    "tla-compare": _cmd_tla_compare,
}


# ---------------------------------------------------------------- figure presets

REFERENCE_BASE = SystemParams(31, eta=0.01, xi=1.0)
M = 4


def _th4():
    return theta(M, REFERENCE_BASE.n_cavities)


def _nu4():
    return empty_mode(M, REFERENCE_BASE)[0]


def _figure_header(figure):
    """(params, k_range, samples, refine) describing the primary curve of a figure."""
    th = _th4()
    narrow = (th - 2e-5, th + 2e-5)
    headers = {
        2: (REFERENCE_BASE, (0.05, 0.55), 20001, True),
        3: (REFERENCE_BASE.replace(atom_site=12, g=0.1, omega_a=REFERENCE_OMEGA_A),
            (th - 0.04, th + 0.04), 8001, True),
        4: (REFERENCE_BASE.replace(atom_site=8, g=0.0, omega_a=_nu4()), narrow, 4001, True),
        5: (REFERENCE_BASE.replace(atom_site=12, g=0.1, omega_a=_nu4()),
            (th - 0.05, th + 0.05), 8001, True),
        6: (REFERENCE_BASE.replace(atom_site=8, g=0.05, omega_a=_nu4()), None, 2, False),
        7: (REFERENCE_BASE.replace(atom_site=8, g=0.1, omega_a=REFERENCE_OMEGA_A), narrow, 4001, False),
    }
    if figure not in headers:
        raise ConfigError(f"reproduce needs --figure in {FIGURES}, got {figure!r}")
    return headers[figure]


def _fig2(cfg):
    params, k_range, samples, refine = _figure_header(2)
    th = _th4()
    main = _curve("a", params, _grid(params, k_range, samples, refine))
    n1 = params.n_cavities + 1
    main.analysis["expected_centers"] = [m * math.pi / n1 for m in range(1, n1)
                                         if k_range[0] < m * math.pi / n1 < k_range[1]]
    zoom = _curve("zoom", params, np.linspace(th - 1e-5, th + 1e-5, 2001))
    return [main, zoom]


def _fig3(cfg):
    params, k_range, samples, refine = _figure_header(3)
    th = _th4()
    anti = _curve("n12", params, _grid(params, k_range, samples, refine))
    anti.analysis.update(_splitting_info(anti.scan, params, M))
    node_params = params.replace(atom_site=8)
    node = _curve("n8", node_params, _grid(node_params, k_range, samples, refine))
    zoom = _curve("n8_zoom", node_params,
                  exact.resonance_grid(node_params, th - 2e-5, th + 2e-5, 4001))
    return [anti, node, zoom]


def _fig4(cfg):
    params, k_range, samples, refine = _figure_header(4)
    out = []
    for panel, omega_a in (("a", _nu4()), ("b", REFERENCE_OMEGA_A)):
        for g in (0.0, 0.05, 0.1):
            p = params.replace(omega_a=omega_a, g=g)
            out.append(_curve(f"{panel}_g{g:g}", p, _grid(p, k_range, samples, refine)))
    return out


def _fig5(cfg):
    params, k_range, samples, refine = _figure_header(5)
    out = []
    base = None
    for delta in (0.0, 0.01, 0.02):
        p = params.replace(omega_a=_nu4() + delta)
        art = _curve(f"d{delta:g}", p, _grid(p, k_range, samples, refine))
        info = _splitting_info(art.scan, p, M)
        if base is None:
            base = info
        info["detuning"] = delta
        info["shift_lower"] = info["E_lower"] - base["E_lower"]
        info["shift_upper"] = info["E_upper"] - base["E_upper"]
        art.analysis.update(info)
        out.append(art)
    return out


def _fig6(cfg):
    params = _figure_header(6)[0]
    tlm = tla.build_tla(params, M)
    dressed = tla.dressed_state_analytic(params, M)
    dot = float(np.dot(dressed.vector, tlm.phi_m))
    overlap = abs(dot)
    sites = [str(j) for j in range(1, params.n_cavities + 1)] + ["e"]
    states = Artifact("states", {
        "nu_m": tlm.nu_m, "omega_A": tlm.omega_A, "analytic_overlap": overlap,
        "normalization": dressed.normalization,
    }, columns={"site": sites, "psi_m": tlm.psi_m.tolist(), "phi_m": tlm.phi_m.tolist(),
                "phi_analytic": (math.copysign(1.0, dot) * dressed.vector).tolist()})
    loc = tla.localized_state(params, M)
    amps = np.append(loc.amplitudes, loc.atomic_amp)
    localized = Artifact("localized", {
        "k": theta(M, params.n_cavities), "T": loc.transmission,
        "profile_overlap": loc.profile_overlap,
        "c_const": [loc.c_const.real, loc.c_const.imag],
        "max_right_of_atom": float(np.abs(loc.amplitudes[params.atom_site:]).max(initial=0.0)),
    }, columns={"site": sites, "abs": np.abs(amps).tolist(), "re": amps.real.tolist(),
                "im": amps.imag.tolist()})
    return [states, localized]


def _fig7(cfg):
    params, k_range, samples, refine = _figure_header(7)
    grid = _grid(params, k_range, samples, refine)
    resonant = params.replace(g=0.05, omega_a=_nu4())
    return _tla_set(params, M, grid, "closed-form") + _tla_set(resonant, M, grid, "closed-form",
                                                               "_nu4")


FIGURE_RUNNERS = {2: _fig2, 3: _fig3, 4: _fig4, 5: _fig5, 6: _fig6, 7: _fig7}


# ---------------------------------------------------------------- output

def _fmt(x) -> str:
    return format(x, ".17g") if isinstance(x, float) else str(x)


def render_csv(art: Artifact) -> str:
    buf = io.StringIO()
    if art.scan is not None:
        buf.write("k,E,T,R\n")
        for row in zip(art.scan.k_grid, art.scan.energies, art.scan.T, art.scan.R):
            buf.write(",".join(format(float(v), ".17g") for v in row) + "\n")
    else:
        names = list(art.columns)
        buf.write(",".join(names) + "\n")
        for row in zip(*art.columns.values()):
            buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def render_json(art: Artifact, cfg: RunConfig) -> str:
    doc = {"config": cfg.to_dict(), "grid": [], "T": [], "R": [], "analysis": dict(art.analysis)}
    if art.scan is not None:
        doc["grid"] = art.scan.k_grid.tolist()
        doc["T"] = art.scan.T.tolist()
        doc["R"] = art.scan.R.tolist()
    else:
        doc["analysis"]["table"] = art.columns
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def _paths(cfg: RunConfig, artifacts) -> list[Path | None]:
    out = cfg.output
    if out is None:
        if len(artifacts) == 1:
            return [None]
        out = (f"figure{cfg.figure}" if cfg.command == "reproduce" else cfg.command) + "." + cfg.format
    primary = Path(out)
    rest = [primary.with_name(f"{primary.stem}_{a.label}{primary.suffix}") for a in artifacts[1:]]
    return [primary] + rest


def run(cfg: RunConfig, stdout=None, stderr=None) -> int:
    """Execute a resolved config, writing its files. Returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    if cfg.command == "reproduce":
        artifacts = FIGURE_RUNNERS[cfg.figure](cfg)
    else:
        artifacts = COMMAND_RUNNERS[cfg.command](cfg)
    for art, path in zip(artifacts, _paths(cfg, artifacts)):
        text = render_json(art, cfg) if cfg.format == "json" else render_csv(art)
        if path is None:
            stdout.write(text)
        else:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
            print(f"wrote {path}", file=stderr)
    return 0


def main(argv=None) -> int:
    try:
        cfg = resolve_config(argv)
        return run(cfg)
    except (NumericError, SplittingNotResolved, DegeneracyError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
