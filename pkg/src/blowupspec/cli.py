"""Command-line pipeline: configuration, stage orchestration, caching and artifact emission."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # Python 3.10
    import tomli as tomllib

from . import bifurc, h0struct, jost, odesys, profile, specfun, wkb
from .errors import BlowupSpecError, ConfigError
from .groundstate import solve_ground_state

log = logging.getLogger("blowupspec")

EXIT_OK, EXIT_FAIL, EXIT_STAGE, EXIT_CONFIG = 0, 2, 3, 4
STAGES = ("ground-state", "h0-check", "profile", "wkb-check", "spectrum", "bifurcation", "report")
WKB_CLASSES = (None, 1, 3, 10, 30)
OMEGA_DELTA = 1.5
OMEGA_N = 10.0


@dataclass
class ScanConfig:
    delta_over_b: float = 1.0
    im_min_over_b: float = -3.0
    im_max_over_b: float = 3.0
    grid_nx: int = 16
    grid_ny: int = 24


@dataclass
class IntegratorConfig:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-40
    max_step: float = 0.01


@dataclass
class MatchingConfig:
    x_star_rule: str | float = "default"
    r_infinity_factor: float = 6.0


@dataclass
class NewtonConfig:
    tol: float = 1e-10
    max_iter: int = 40


@dataclass
class PrecisionConfig:
    extended: bool = False


@dataclass
class RunConfig:
    dimension: int = 1
    b_list: list = field(default_factory=lambda: [0.35])
    l_max: int = 2
    scan: ScanConfig = field(default_factory=ScanConfig)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    matching: MatchingConfig = field(default_factory=MatchingConfig)
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    precision: PrecisionConfig = field(default_factory=PrecisionConfig)
    output_dir: str = "out"
    rho_b: bool = False


_SECTIONS = {"scan": ScanConfig, "integrator": IntegratorConfig, "matching": MatchingConfig,
             "newton": NewtonConfig, "precision": PrecisionConfig}


def _typed(path: str, value, kind):
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        return float(value)
    return value


def config_from_dict(raw: dict) -> RunConfig:
    cfg = RunConfig()
    for key, value in raw.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: expected a table")
            section = getattr(cfg, key)
            for sub, v in value.items():
                if sub not in section.__dataclass_fields__:
                    raise ConfigError(f"{key}.{sub}: unknown field")
                default = getattr(section, sub)
                kind = type(default) if not isinstance(default, str) else None
                if key == "matching" and sub == "x_star_rule":
                    kind = None
                setattr(section, sub, _typed(f"{key}.{sub}", v, kind))
        elif key == "b_list":
            if not isinstance(value, list):
                raise ConfigError("b_list: expected an array")
            cfg.b_list = [_typed(f"b_list[{i}]", v, float) for i, v in enumerate(value)]
        elif key in ("dimension", "l_max"):
            setattr(cfg, key, _typed(key, value, int))
        elif key == "output_dir":
            cfg.output_dir = str(value)
        elif key == "rho_b":
            cfg.rho_b = _typed(key, value, bool)
        else:
            raise ConfigError(f"{key}: unknown field")
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.dimension not in (1, 2, 3):
        raise ConfigError("dimension: must be 1, 2 or 3")
    if cfg.l_max < 0:
        raise ConfigError("l_max: must be non-negative")
    for i, b in enumerate(cfg.b_list):
        if not profile.B_MIN <= b <= profile.B_MAX:
            raise ConfigError(f"b_list[{i}]: b={b} outside [{profile.B_MIN}, {profile.B_MAX}]")
    if any(x <= y for x, y in zip(cfg.b_list, cfg.b_list[1:])):
        raise ConfigError("b_list: must be sorted strictly descending (continuation order)")
    for name in ("rel_tol", "abs_tol", "max_step"):
        if not getattr(cfg.integrator, name) > 0:
            raise ConfigError(f"integrator.{name}: must be positive")
    if not cfg.newton.tol > 0:
        raise ConfigError("newton.tol: must be positive")
    if cfg.newton.max_iter < 1:
        raise ConfigError("newton.max_iter: must be at least 1")
    if cfg.matching.r_infinity_factor < 6:
        raise ConfigError("matching.r_infinity_factor: must be at least 6")
    rule = cfg.matching.x_star_rule
    if not (rule == "default" or (isinstance(rule, (int, float)) and not isinstance(rule, bool) and rule > 0)):
        raise ConfigError("matching.x_star_rule: 'default' or a positive radius")
    sc = cfg.scan
    if sc.delta_over_b <= 0 or sc.im_min_over_b >= sc.im_max_over_b:
        raise ConfigError("scan: need delta_over_b > 0 and im_min_over_b < im_max_over_b")
    if sc.im_max_over_b >= OMEGA_N:
        raise ConfigError(f"scan.im_max_over_b: must stay below N = {OMEGA_N}")
    for b in cfg.b_list:
        corner = b * np.hypot(sc.delta_over_b, max(abs(sc.im_min_over_b), abs(sc.im_max_over_b)))
        if corner >= OMEGA_DELTA:
            raise ConfigError(f"scan.delta_over_b: scan box leaves |lambda| < {OMEGA_DELTA} at b={b}")
    if sc.grid_nx < 2 or sc.grid_ny < 2:
        raise ConfigError("scan.grid_nx: heat-map grid needs at least 2 x 2 nodes")


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(raw)


# ---- persistence ----------------------------------------------------------------------------

def b_tag(b: float) -> str:
    return f"{b:g}"


def cache_dir(cfg: RunConfig) -> Path:
    return Path(os.environ.get("BLOWUPSPEC_CACHE") or cfg.output_dir)


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(jost.dumps(obj))


def write_csv(path: Path, header: list, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])


class Pipeline:
    """Stages share the ground state and profiles; each stage writes its own artifacts."""

    def __init__(self, cfg: RunConfig, jobs: int = 1):
        self.cfg = cfg
        self.jobs = jobs
        self.out = Path(cfg.output_dir)
        self.errors: list = []
        self.verdicts: dict = {}
        self._gs = None
        self._profiles: dict = {}
        self._spectra: dict = {}

    # shared inputs
    @property
    def d(self) -> int:
        return self.cfg.dimension

    def gs(self):
        if self._gs is None:
            self._gs = solve_ground_state(self.d, 1 + 4 / self.d)
        return self._gs

    def profile_path(self, b: float) -> Path:
        return cache_dir(self.cfg) / "profiles" / f"d{self.d}_b{b_tag(b)}.csv"

    def profile(self, b: float, warm=None):
        if b in self._profiles:
            return self._profiles[b]
        path = self.profile_path(b)
        prof = None
        if path.exists():
            meta = profile.read_profile_csv(path)
            if meta["rtol"] == self.cfg.integrator.rel_tol and meta["d"] == self.d:
                prof = profile.load_profile(path)
                log.info("profile d=%d b=%g loaded from cache", self.d, b)
        if prof is None:
            prof = profile.solve_profile(self.d, b, gs=self.gs(), rtol=self.cfg.integrator.rel_tol,
                                         r_inf=self.cfg.matching.r_infinity_factor / b, warm=warm,
                                         tol=self.cfg.newton.tol, max_iter=self.cfg.newton.max_iter)
            prof.to_csv(path)
        self._profiles[b] = prof
        return prof

    def record_error(self, stage: str, cell: dict, exc: Exception) -> None:
        log.error("%s %s: %s", stage, cell, exc)
        self.errors.append({"stage": stage, **cell, "error": f"{type(exc).__name__}: {exc}"})

    # stages
    def stage_ground_state(self) -> None:
        gs = self.gs()
        gs.to_csv(self.out / f"ground_state_d{self.d}.csv")
        rep = {"d": gs.d, "p": gs.p, "q0": gs.q0, "kappa_q": gs.kappa_q, "c_q": gs.c_q}
        if self.d == 1:
            r = np.linspace(0, 10, 1001)
            exact = 3 ** 0.25 / np.sqrt(np.cosh(2 * r))
            rep["closed_form_sup_error"] = float(np.abs(gs(r)[0] - exact).max())
            rep["kappa_q_error"] = abs(gs.kappa_q - np.sqrt(2) * 3 ** 0.25)
            ok = rep["closed_form_sup_error"] <= 1e-8 and rep["kappa_q_error"] <= 1e-5
            rep["verdict"] = "PASS" if ok else "FAIL"
            self.verdicts["ground-state"] = rep["verdict"]
        write_json(self.out / "reports" / f"ground_state_d{self.d}.json", rep)

    def stage_h0(self) -> None:
        gs = self.gs()
        basis = h0struct.build_lpm_basis(gs)
        ident = h0struct.exotic_identity(basis)
        chain = h0struct.jordan_residuals(h0struct.flat_kernel_basis(basis))
        classes = (0, 1, 2) if self.d > 1 else (0, 1)
        oracle = h0struct.oracle_check(gs, classes)
        ok = (ident["rel_error"] <= 1e-5 and chain["max_residual"] <= 1e-6
              and all(v["ok"] for v in oracle.values()))
        rep = {"d": self.d, "wronskian_drift": basis.wronskian_drift, "kappa_a": basis.kappa_a,
               "exotic_identity": ident, "jordan": chain, "oracle": oracle,
               "verdict": "PASS" if ok else "FAIL"}
        self.verdicts["h0-check"] = rep["verdict"]
        write_json(self.out / "reports" / f"h0_d{self.d}.json", rep)

    def stage_profiles(self) -> None:
        rows, warm = [], None
        for b in self.cfg.b_list:
            try:
                prof = self.profile(b, warm)
            except BlowupSpecError as exc:
                self.record_error("profile", {"b": b}, exc)
                continue
            warm = prof
            diag = profile.profile_diagnostics(prof, self.gs())
            rows.append(diag)
            r = np.linspace(b ** -0.5, 1.5 / b, 200)
            pv, _ = prof(r)
            h = (self.d - 1) / 2
            bracket = np.sqrt(1 + (b ** (-2 / 3) * (4 - b * b * r * r)) ** 2)
            env = (r ** -h * b ** (-1 / 6) * bracket ** -0.25
                   * np.exp(profile.s_b(b, r) - np.pi / (2 * b)))
            write_csv(self.out / "plots" / f"profile_modulus_d{self.d}_b{b_tag(b)}.csv",
                      ["r", "modulus", "envelope"], zip(r.tolist(), np.abs(pv).tolist(), env.tolist()))
        write_json(self.out / "reports" / f"profiles_d{self.d}.json", rows)

    def stage_wkb(self) -> None:
        rows, ok = [], True
        for b in self.cfg.b_list:
            for nu in WKB_CLASSES:
                for e in (1.0, 1 + 0.3j * b):
                    try:
                        res = wkb.contract_check(b, nu, e)
                    except BlowupSpecError as exc:
                        self.record_error("wkb-check", {"b": b, "nu": nu}, exc)
                        continue
                    ok &= (res["fd_residual"] <= 1e-5 and res["connection_residual"] <= 1e-9
                           and res["wronskian_residual"] <= 1e-8 and res.get("reality_residual", 0) <= 1e-10)
                    rows.append(res)
        if rows:
            self.verdicts["wkb-check"] = "PASS" if ok else "FAIL"
        write_json(self.out / "reports" / "wkb_check.json", rows)
        write_csv(self.out / "wkb_check.csv",
                  ["b", "nu", "re_e", "im_e", "fd_residual", "connection_residual", "wronskian_residual",
                   "reality_residual"],
                  [[r["b"], "low" if r["nu"] is None else r["nu"], r["energy"].real, r["energy"].imag,
                    r["fd_residual"], r["connection_residual"], r["wronskian_residual"],
                    r.get("reality_residual", "")] for r in rows])

    def _scan_kw(self) -> dict:
        rule = self.cfg.matching.x_star_rule
        return {"x_star": None if rule == "default" else float(rule), "newton_tol": self.cfg.newton.tol}

    def _region_spec(self) -> dict:
        sc = self.cfg.scan
        return {"delta_over_b": sc.delta_over_b, "im_min_over_b": sc.im_min_over_b,
                "im_max_over_b": sc.im_max_over_b}

    def spectrum(self, b: float):
        if b not in self._spectra:
            prof = self.profile(b)
            kw = self._scan_kw()
            x_star = kw["x_star"] if kw["x_star"] is not None else odesys.x_star_rule(b)
            kw["r_inf"] = max(self.cfg.matching.r_infinity_factor / b, odesys.r_exterior(b, x_star))
            self._spectra[b] = jost.classify_spectrum(prof, self.cfg.l_max, self._region_spec(),
                                                      jobs=self.jobs, keep_evaluators=True, **kw)
        return self._spectra[b]

    def stage_spectrum(self) -> None:
        for b in self.cfg.b_list:
            try:
                rep = self.spectrum(b)
            except BlowupSpecError as exc:
                self.record_error("spectrum", {"b": b}, exc)
                continue
            for l, info in sorted(rep.classes.items()):
                if info.get("error"):
                    self.errors.append({"stage": "spectrum", "b": b, "l": l, "error": info["error"]})
            self.verdicts[f"spectrum_b{b_tag(b)}"] = rep.verdict
            write_json(self.out / "reports" / f"spectrum_d{self.d}_b{b_tag(b)}.json", rep.to_json())
            ev = rep.classes[0].get("evaluator")
            if ev is not None:
                self._heat_map(b, ev, rep.classes[0]["region"])

    def _heat_map(self, b: float, ev, region) -> None:
        x0, x1, y0, y1 = region
        xs = np.linspace(x0, x1, self.cfg.scan.grid_nx)
        ys = np.linspace(y0, y1, self.cfg.scan.grid_ny)
        grid = (xs[None, :] + 1j * ys[:, None]).ravel()
        _, w = ev(grid)
        write_csv(self.out / "plots" / f"heatmap_d{self.d}_b{b_tag(b)}.csv",
                  ["re", "im", "abs_w", "arg_w"],
                  zip(grid.real.tolist(), grid.imag.tolist(), np.abs(w).tolist(), np.angle(w).tolist()))

    def stage_bifurcation(self) -> None:
        blocks = []
        for b in self.cfg.b_list:
            try:
                rep = self.spectrum(b)
                pred = bifurc.predict_bifurcation(self.gs(), self.profile(b))
            except BlowupSpecError as exc:
                self.record_error("bifurcation", {"b": b}, exc)
                continue
            block = {"b": b, **bifurc.verify_bifurcation(rep, pred)}
            if self.cfg.rho_b:
                try:
                    rec = bifurc.solve_rho_b(self.profile(b))
                    block["rho_b"] = {"upsilon_solved": rec.upsilon_solved,
                                      "jacobian_rank": rec.jacobian_rank,
                                      "equation_residual": rec.equation_residual}
                except BlowupSpecError as exc:
                    self.record_error("rho_b", {"b": b}, exc)
            blocks.append(block)
        if not blocks:
            return
        out = {"d": self.d, "blocks": blocks}
        if len(blocks) >= 2:
            out["trend_ok"] = bifurc.trend_check(blocks)
        ok = all(bl["verdict"] == "PASS" for bl in blocks) and out.get("trend_ok", True)
        out["verdict"] = "PASS" if ok else "FAIL"
        self.verdicts["bifurcation"] = out["verdict"]
        write_json(self.out / "reports" / f"bifurcation_d{self.d}.json", out)

    def stage_report(self) -> None:
        missing = emit_plot_data(self.out, self.d)
        write_json(self.out / "reports" / "missing_reports.json", missing)

    def run(self, stages) -> int:
        table = {"ground-state": self.stage_ground_state, "h0-check": self.stage_h0,
                 "profile": self.stage_profiles, "wkb-check": self.stage_wkb,
                 "spectrum": self.stage_spectrum, "bifurcation": self.stage_bifurcation,
                 "report": self.stage_report}
        self.out.mkdir(parents=True, exist_ok=True)
        if not self.cfg.b_list:
            stages = [s for s in stages if s == "ground-state"]
        for name in stages:
            try:
                table[name]()
            except Exception as exc:  # noqa: BLE001 -- a stage failure must not abort the run
                self.record_error(name, {}, exc)
        write_json(self.out / "errors.json", self.errors)
        write_json(self.out / "verdicts.json", self.verdicts)
        for k, v in sorted(self.verdicts.items()):
            print(f"{k}: {v}")
        if self.errors:
            return EXIT_STAGE
        if any(v != "PASS" for v in self.verdicts.values()):
            return EXIT_FAIL
        return EXIT_OK


def emit_plot_data(out: Path, d: int) -> list:
    """Zero tables and the lambda_3 trend from written reports; returns missing report names."""
    out = Path(out)
    reports = out / "reports"
    missing = []
    spectra = sorted(reports.glob(f"spectrum_d{d}_b*.json")) if reports.exists() else []
    if not spectra:
        missing.append(f"spectrum_d{d}_b*.json")
    for path in spectra:
        rep = json.loads(path.read_text())
        rows = [[c["l"], z["re"], z["im"], z["multiplicity"]]
                for c in rep["classes"] for z in c["zeros"]]
        write_csv(out / "plots" / path.name.replace("spectrum_", "zeros_").replace(".json", ".csv"),
                  ["l", "re", "im", "mult"], rows)
    bif = reports / f"bifurcation_d{d}.json"
    if bif.exists():
        blocks = json.loads(bif.read_text())["blocks"]
        rows = []
        for bl in sorted(blocks, key=lambda x: -x["b"]):
            found = bl["lambda3_found"][1] if bl["lambda3_found"] else float("nan")
            ratio = bl["ratio3"] if bl["ratio3"] is not None else float("nan")
            rows.append([bl["b"], bl["lambda3_pred"][1], found, ratio])
        write_csv(out / "plots" / "lambda3_trend.csv", ["b", "predicted", "located", "ratio"], rows)
    else:
        missing.append(bif.name)
    return missing


# ---- entry point ----------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blowupspec")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run",) + STAGES + ("jost-scan", "specfun-selftest"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path)
        sp.add_argument("--b", type=float, help="override b_list with one value")
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--output-dir")
        if name == "run":
            sp.add_argument("--only", choices=STAGES)
        if name == "jost-scan":
            sp.add_argument("--l", type=int, default=0)
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def _jost_scan(pipe: Pipeline, l: int) -> int:
    status = EXIT_OK
    for b in pipe.cfg.b_list:
        try:
            prof = pipe.profile(b)
            region = jost.scan_region(b, l, **pipe._region_spec())
            zeros, _ = jost.scan_class(prof, l, region, pipe.jobs, **pipe._scan_kw())
        except BlowupSpecError as exc:
            pipe.record_error("jost-scan", {"b": b, "l": l}, exc)
            status = EXIT_STAGE
            continue
        verdict = jost.class_verdict(b, l, zeros)
        write_json(pipe.out / "reports" / f"jost_d{pipe.d}_b{b_tag(b)}_l{l}.json",
                   {"b": b, "l": l, "region": list(region), "zeros": [z.to_json() for z in zeros],
                    "verdict": verdict})
        print(f"jost-scan b={b:g} l={l}: {verdict['verdict']}")
        if verdict["verdict"] != "PASS" and status == EXIT_OK:
            status = EXIT_FAIL
    write_json(pipe.out / "errors.json", pipe.errors)
    return status


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    if args.command == "specfun-selftest":
        rep = specfun.selftest()
        print(jost.dumps(rep), end="")
        return EXIT_OK if rep.get("pass", True) else EXIT_FAIL
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.b is not None:
            cfg.b_list = [args.b]
        if args.output_dir:
            cfg.output_dir = args.output_dir
        validate(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.precision.extended:
        log.warning("precision.extended is not available; running in double precision")
    pipe = Pipeline(cfg, jobs=max(1, args.jobs))
    if args.command == "jost-scan":
        pipe.out.mkdir(parents=True, exist_ok=True)
        return _jost_scan(pipe, args.l)
    if args.command == "run":
        stages = [args.only] if args.only else list(STAGES)
    else:
        stages = [args.command]
    return pipe.run(stages)


if __name__ == "__main__":
    sys.exit(main())
