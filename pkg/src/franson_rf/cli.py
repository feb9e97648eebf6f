"""Command-line front end.

Every subcommand reads an optional JSON config (``--config``) and then applies
long-form flags on top of it. Phases are given in units of pi. Tables are
written as CSV (header row, LF endings) or JSON, with floats formatted as
``%.12e`` so identical configs give byte-identical output.

Exit codes: 0 success, 1 configuration error, 2 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .analysis import CHSH_PEAKS, ChshSettings, chsh_record, closed_form_S, find_crossing, power_scan
from .coincidence import (
    HistogramParams,
    arbitrate_side_peak_form,
    coincidence_probability,
    g2_side_closed,
    g2_zero_closed,
    hbt_g2,
    peak_table,
    synthesize_histogram,
)
from .network import NetworkSpec, forward_coincidence_probability
from .source import CalibrationParams, RfParams, p1_of_nbar
from .validation import run_validation

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION = 0, 1, 2
FLOAT_FMT = "%.12e"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    p1: Optional[float] = None
    nbar: Optional[float] = None
    A: float = 0.973
    B: float = 1.866
    phi_p: float = math.pi
    phi_a: float = 0.0
    phi_b: float = 0.0
    tau_m: float = 1.07e-9
    tau_p: float = 2.14e-9
    tau_g: Optional[float] = None
    T2: float = 134.4e-12
    bin_width: float = 10e-12
    range: float = 4.5e-9
    out: Optional[str] = None
    format: str = "csv"
    seed: Optional[int] = None  # reserved; every computation is deterministic

    def __post_init__(self) -> None:
        if self.p1 is not None and self.nbar is not None:
            raise ConfigError("give either p1 or nbar, not both")
        if self.p1 is None and self.nbar is None:
            self.nbar = 0.01
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown output format {self.format!r}")
        try:  # build each derived object once so bad values surface here
            self.calibration
            self.network
            self.histogram
            RfParams(self.resolved_p1)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def calibration(self) -> CalibrationParams:
        return CalibrationParams(self.A, self.B)

    @property
    def resolved_p1(self) -> float:
        return self.p1 if self.p1 is not None else p1_of_nbar(self.nbar, self.calibration)

    @property
    def network(self) -> NetworkSpec:
        net = NetworkSpec.from_times(self.tau_m, self.tau_p, self.tau_g, self.phi_p, self.phi_a, self.phi_b)
        if net.tau_p_bins <= net.tau_m_bins:
            raise ValueError("tau_p must exceed tau_m")
        return net

    @property
    def histogram(self) -> HistogramParams:
        return HistogramParams(self.T2, self.bin_width, self.range)


_PHASE_KEYS = ("phi_p", "phi_a", "phi_b")


def load_config(path: Optional[str], overrides: Dict[str, Any]) -> RunConfig:
    """Merge a JSON config with flag overrides; flags win."""
    raw: Dict[str, Any] = {}
    if path:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    values = dict(raw)
    for key in _PHASE_KEYS:
        if f"{key}_pi" in values:
            if key in values:
                raise ConfigError(f"give either {key} or {key}_pi, not both")
            values[key] = math.pi * float(values.pop(f"{key}_pi"))
    given = {k: v for k, v in overrides.items() if v is not None}
    if "p1" in given or "nbar" in given:
        values.pop("p1", None)
        values.pop("nbar", None)
    values.update(given)
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return RunConfig(**values)


# --- output -------------------------------------------------------------


def _fmt(v: Any) -> Any:
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT % v
    if isinstance(v, np.integer):
        return int(v)
    return v


def _json_dump(obj: Any, indent: int = 0) -> str:
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_json_dump(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(inner + _json_dump(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, (float, np.floating)) and math.isfinite(obj):
        return FLOAT_FMT % obj
    return json.dumps(_fmt(obj))


def render(payload: Any, fmt: str) -> str:
    """A record (dict) or table (list of dicts) as CSV or JSON text."""
    if fmt == "json":
        return _json_dump(payload) + "\n"
    rows = payload if isinstance(payload, list) else [payload]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if rows:
        writer.writerow(list(rows[0]))
        for row in rows:
            writer.writerow([_fmt(v) for v in row.values()])
    return buf.getvalue()


def emit(payload: Any, cfg: RunConfig) -> None:
    text = render(payload, cfg.format)
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --- commands -----------------------------------------------------------


def cmd_coincidence(cfg: RunConfig, delta_t: int, det_a: str = "A1", det_b: str = "B1") -> Dict[str, Any]:
    """Coincidence at one delay by the operator route and the forward route."""
    net, p1 = cfg.network, cfg.resolved_p1
    heis = coincidence_probability(delta_t, cfg.phi_a, cfg.phi_b, cfg.phi_p, p1, det_a, det_b,
                                   tau_m_bins=net.tau_m_bins, tau_p_bins=net.tau_p_bins)
    fwd = forward_coincidence_probability(det_a, 0, det_b, delta_t, net, p1)
    return {"delta_t_bins": delta_t, "delta_t_s": delta_t * net.grid_step, "p1": p1,
            "det_a": det_a, "det_b": det_b, "heisenberg": heis, "forward": fwd,
            "difference": heis - fwd}


def cmd_scan(cfg: RunConfig, n_phi: int = 64, max_delay_m: int = 3) -> List[Dict[str, Any]]:
    """Phase-by-delay correlation map: phi_A over one period, delays in units of tau_m."""
    net, p1 = cfg.network, cfg.resolved_p1
    rows = []
    for k in range(n_phi):
        phi_a = 2 * math.pi * k / n_phi
        for j in range(-max_delay_m, max_delay_m + 1):
            dt = j * net.tau_m_bins
            c = coincidence_probability(dt, phi_a, cfg.phi_b, cfg.phi_p, p1,
                                        tau_m_bins=net.tau_m_bins, tau_p_bins=net.tau_p_bins)
            rows.append({"phi_a_pi": phi_a / math.pi, "delta_t_bins": dt,
                         "delta_t_s": dt * net.grid_step, "coincidence": c})
    return rows


def cmd_chsh(cfg: RunConfig, settings: ChshSettings = ChshSettings()) -> Dict[str, Any]:
    net, p1 = cfg.network, cfg.resolved_p1
    out: Dict[str, Any] = {"p1": p1}
    for peak in CHSH_PEAKS:
        rec = chsh_record(peak, p1, settings, phi_p=cfg.phi_p,
                          tau_m_bins=net.tau_m_bins, tau_p_bins=net.tau_p_bins)
        key = peak.value.lower()
        out[f"S_{key}"] = rec.S
        out[f"S_{key}_closed_form"] = closed_form_S(peak, p1)
        for k, e in enumerate(rec.correlations):
            out[f"E{k}_{key}"] = e
        for (k, da, db), v in rec.coincidences.items():
            out[f"C{k}_{da}{db}_{key}"] = v
    return out


def cmd_power_scan(cfg: RunConfig, nbar_grid: Sequence[float]) -> Dict[str, Any]:
    rows = [asdict(r) for r in power_scan(nbar_grid, cfg.calibration)]
    crossings = {f"S2_nbar_{pk.value.lower()}": find_crossing(2.0, pk, cfg.calibration) for pk in CHSH_PEAKS}
    return {"rows": rows, "crossings": crossings}


def cmd_histogram(cfg: RunConfig) -> List[Dict[str, Any]]:
    pairs = synthesize_histogram(cfg.resolved_p1, cfg.phi_a, cfg.phi_b, cfg.histogram, cfg.network)
    return [{"delta_t_s": dt, "coincidence": v} for dt, v in pairs]


def cmd_hbt(cfg: RunConfig) -> Dict[str, Any]:
    p1 = cfg.resolved_p1
    g0, gs = hbt_g2(p1, cfg.phi_p, 0), hbt_g2(p1, cfg.phi_p, 1)
    matched = [s for s, ok in arbitrate_side_peak_form().items() if ok]
    return {"p1": p1, "phi_p_pi": cfg.phi_p / math.pi, "g2_0": g0, "g2_tau_p": gs,
            "g2_0_closed_form_phi_p_pi": g2_zero_closed(p1),
            "g2_tau_p_closed_form_phi_p_pi": g2_side_closed(p1),
            "bunching_ratio": g0 / gs, "side_peak_form": "".join(matched)}


def cmd_peaks(cfg: RunConfig) -> List[Dict[str, Any]]:
    net = cfg.network
    return [{"delay_bins": pk.delay_bins, "delay_s": pk.delay_bins * net.grid_step,
             "peak": pk.peak.value, "phase_class": pk.phase_class.value}
            for pk in peak_table(net.tau_m_bins, net.tau_p_bins)]


def cmd_validate(cfg: RunConfig) -> int:
    checks = run_validation(cfg.resolved_p1, cfg.calibration)
    emit([asdict(c) for c in checks], cfg)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VALIDATION


# --- argument parsing -------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # config errors share exit code 1
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its keys")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--p1", type=float, help="single-photon probability per bin")
    g.add_argument("--nbar", type=float, help="mean excitation number (calibrated to p1)")
    p.add_argument("--A", type=float, help="calibration constant A")
    p.add_argument("--B", type=float, help="calibration constant B")
    for name in ("p", "a", "b"):
        p.add_argument(f"--phi-{name}-pi", type=float, dest=f"phi_{name}_pi", help="phase in units of pi")
    p.add_argument("--tau-m", type=float, help="analyzer delay [s]")
    p.add_argument("--tau-p", type=float, help="preparation delay [s]")
    p.add_argument("--tau-g", type=float, help="time-bin grid step [s]")
    p.add_argument("--t2", type=float, dest="T2", help="peak width [s]")
    p.add_argument("--bin-width", type=float, help="histogram bin width [s]")
    p.add_argument("--range", type=float, help="histogram half range [s]")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--seed", type=int, help="reserved; the engine is deterministic")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="franson-rf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("coincidence", help="one coincidence probability by both routes")
    _common(p)
    p.add_argument("--delta-t", type=int, default=0, help="delay in grid bins")
    p.add_argument("--det-a", default="A1", choices=("A1", "A2"))
    p.add_argument("--det-b", default="B1", choices=("B1", "B2"))

    p = sub.add_parser("scan", help="phi_A by delay correlation map")
    _common(p)
    p.add_argument("--n-phi", type=int, default=64)
    p.add_argument("--max-delay", type=int, default=3, help="largest |delay| in units of tau_m")

    p = sub.add_parser("chsh", help="CHSH S at the CENTER and TAU_P peaks")
    _common(p)
    p.add_argument("--settings-pi", type=float, nargs=4, metavar=("A", "A_PRIME", "B", "B_PRIME"),
                   help="analyzer settings in units of pi")

    p = sub.add_parser("power-scan", help="S and g2 versus mean photon number")
    _common(p)
    p.add_argument("--nbar-min", type=float, default=1e-3)
    p.add_argument("--nbar-max", type=float, default=1.0)
    p.add_argument("--points", type=int, default=31, help="log-spaced grid points")

    for name, text in (("histogram", "synthetic coincidence histogram"),
                       ("hbt", "g2 of the prepared field"),
                       ("peaks", "characteristic peak table"),
                       ("validate", "oracle self-check; exit 2 on any failure")):
        _common(sub.add_parser(name, help=text))
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    keys = ("p1", "nbar", "A", "B", "tau_m", "tau_p", "tau_g", "T2", "bin_width", "range", "format", "out", "seed")
    out = {k: getattr(args, k) for k in keys}
    for key in ("phi_p", "phi_a", "phi_b"):
        v = getattr(args, f"{key}_pi")
        out[key] = None if v is None else math.pi * v
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        if args.command == "validate":
            return cmd_validate(cfg)
        if args.command == "coincidence":
            payload: Any = cmd_coincidence(cfg, args.delta_t, args.det_a, args.det_b)
        elif args.command == "scan":
            payload = cmd_scan(cfg, args.n_phi, args.max_delay)
        elif args.command == "chsh":
            s = ChshSettings(*(math.pi * x for x in args.settings_pi)) if args.settings_pi else ChshSettings()
            payload = cmd_chsh(cfg, s)
        elif args.command == "power-scan":
            if not 0 < args.nbar_min < args.nbar_max or args.points < 2:
                raise ConfigError("need 0 < nbar-min < nbar-max and at least two points")
            grid = np.geomspace(args.nbar_min, args.nbar_max, args.points)
            result = cmd_power_scan(cfg, grid)
            if cfg.format == "csv":
                for k, v in result["crossings"].items():
                    print(f"{k}={FLOAT_FMT % v}", file=sys.stderr)
                payload = result["rows"]
            else:
                payload = result
        elif args.command == "histogram":
            payload = cmd_histogram(cfg)
        elif args.command == "hbt":
            payload = cmd_hbt(cfg)
        else:
            payload = cmd_peaks(cfg)
    except ValueError as exc:
        print(f"franson-rf: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    emit(payload, cfg)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
