"""Jost function of the radial spectral system, its zeros, and per-class spectrum reports.

The raw determinant det[Psi_1, Psi_2, Phi_1, Phi_2] is analytic in lambda and drives winding
numbers and Newton.  The reported value divides it by the Gram volumes of the interior and
exterior pairs, so its modulus is the product of principal-angle sines between the two planes:
O(1) away from zeros, independent of the seed scaling and unchanged in phase.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import odesys
from .errors import ConvergenceError, DomainError

SPLIT = 0.4873
MIN_SIDE_POINTS = 64
MAX_SIDE_POINTS = 1024
FINAL_BOX = 1e-3
NOISE_FLOOR = 1e-9
MAX_JITTER = 5


@dataclass
class JostSample:
    lam: complex
    w: complex
    raw: complex
    x_star: float
    r_drift: float


@dataclass
class ZeroRecord:
    lambda_star: complex
    multiplicity: int
    winding: int
    newton_residual: float
    box: tuple
    in_validity_strip: bool = True

    def to_json(self) -> dict:
        return {"re": self.lambda_star.real, "im": self.lambda_star.imag,
                "multiplicity": self.multiplicity, "winding": self.winding,
                "residual": self.newton_residual}


def _gram_volume(f: np.ndarray) -> np.ndarray:
    """sqrt(det(F^* F)) for a stack of 4 x 2 frames."""
    g = np.conj(np.swapaxes(f, -1, -2)) @ f
    return np.sqrt(np.abs(np.linalg.det(g)))


def frame_values(fs: odesys.FundamentalSet, where: str = "star") -> tuple[np.ndarray, np.ndarray]:
    """(raw determinant, normalized value) for every lambda in the set."""
    a = fs.matrix(where)
    raw = np.linalg.det(a)
    scale = _gram_volume(a[:, :, :2]) * _gram_volume(a[:, :, 2:])
    return raw, raw / scale


def jost_samples(sys: odesys.SpectralSystem, lam, x_star: float | None = None,
                 r_inf: float | None = None) -> list[JostSample]:
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    fs = odesys.fundamental_set(sys, lam, x_star, r_inf)
    raw, w = frame_values(fs, "star")
    raw_half, _ = frame_values(fs, "half")
    drift = np.abs(raw - raw_half) / np.maximum(np.abs(raw), 1e-300)
    return [JostSample(complex(l), complex(v), complex(rv), fs.x_star, float(dr))
            for l, v, rv, dr in zip(lam, w, raw, drift)]


def jost_value(sys: odesys.SpectralSystem, lam: complex, x_star: float | None = None) -> JostSample:
    return jost_samples(sys, [lam], x_star)[0]


def connection_coefficients(sys: odesys.SpectralSystem, lam: complex, x_star: float | None = None):
    """iota with Phi_j = sum_k Psi_k iota_{jk}, from the full interior basis (|nu| = 1/2 only)."""
    x_star = odesys.x_star_rule(sys.b, sys.nu) if x_star is None else x_star
    lam = np.atleast_1d(complex(lam))
    psi = odesys.interior_basis(sys, lam, x_star, singular=True)["star"][0]
    phi = odesys.exterior_basis(sys, lam, x_star)["star"][0]
    return np.linalg.solve(psi, phi).T


def canonical_jost(sys: odesys.SpectralSystem, lam, r_ref: float = 1.0) -> np.ndarray:
    """Raw determinant at r_ref with Psi Frobenius-normalized and Phi_j scaled so its dominant
    component equals exp(-sqrt(E_j) r_ref); this normalization has a b -> 0 limit."""
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    fs = odesys.fundamental_set(sys, lam, 2 * r_ref)
    a = fs.matrix("half").copy()
    ep, em = sys.energies(lam)
    for col, comp, e in ((2, 0, ep), (3, 1, em)):
        a[:, :, col] *= (np.exp(-np.sqrt(e) * r_ref) / a[:, comp, col])[:, None]
    return np.linalg.det(a)


def continuity_sweep(profiles, limit, l: int, lam_grid, r_ref: float = 1.0,
                     delta: float = 1.5) -> dict:
    """sup_grid |W(b) - W(0)| over a b-sweep and the single constant C in C b^(1/6)."""
    nu = class_nu(limit.d, l)
    lam_grid = np.asarray(lam_grid, dtype=complex).ravel()
    w0 = canonical_jost(odesys.assemble_system(limit, nu, delta=delta), lam_grid, r_ref)
    rows = []
    for prof in sorted(profiles, key=lambda p: -p.b):
        wb = canonical_jost(odesys.assemble_system(prof, nu, delta=delta), lam_grid, r_ref)
        sup = float(np.max(np.abs(wb - w0)))
        rows.append({"b": prof.b, "sup_diff": sup, "scaled": sup / prof.b ** (1 / 6)})
    c = max(r["scaled"] for r in rows)
    bs = np.array([r["b"] for r in rows])
    sups = np.array([r["sup_diff"] for r in rows])
    slope = float(np.polyfit(np.log(bs), np.log(sups), 1)[0]) if len(rows) > 1 else float("nan")
    return {"l": l, "r_ref": r_ref, "sup_w0": float(np.max(np.abs(w0))), "rows": rows,
            "fitted_c": c, "loglog_slope": slope,
            "decreasing": bool(np.all(np.diff(sups) < 0)),
            "rate_ok": bool(slope >= 1 / 6)}


@dataclass
class JostEvaluator:
    """Memoized batched evaluation of the raw and normalized Jost function on one class."""

    sys: odesys.SpectralSystem
    x_star: float | None = None
    r_inf: float | None = None
    jobs: int = 1
    chunk: int = 64
    newton_tol: float = 1e-10
    _memo: dict = field(default_factory=dict, repr=False)

    def _compute(self, lam: np.ndarray):
        fs = odesys.fundamental_set(self.sys, lam, self.x_star, self.r_inf)
        return frame_values(fs)

    def __call__(self, lam) -> tuple[np.ndarray, np.ndarray]:
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        todo = [z for z in dict.fromkeys(lam.tolist()) if z not in self._memo]
        if todo:
            batches = [np.array(todo[i:i + self.chunk]) for i in range(0, len(todo), self.chunk)]
            if self.jobs > 1 and len(batches) > 1:
                with ThreadPoolExecutor(self.jobs) as pool:
                    results = list(pool.map(self._compute, batches))
            else:
                results = [self._compute(bt) for bt in batches]
            for bt, (raw, w) in zip(batches, results):
                for z, rv, wv in zip(bt.tolist(), raw, w):
                    self._memo[z] = (rv, wv)
        raw = np.array([self._memo[z][0] for z in lam.tolist()])
        w = np.array([self._memo[z][1] for z in lam.tolist()])
        return raw, w

    def derivative(self, lam: complex, step: float) -> complex:
        raw, _ = self([lam + step, lam - step, lam + 1j * step, lam - 1j * step])
        return 0.25 * ((raw[0] - raw[1]) / step - 1j * (raw[2] - raw[3]) / step)


def _boundary(box, n: int) -> np.ndarray:
    x0, x1, y0, y1 = box
    t = np.arange(n) / n
    return np.concatenate([x0 + (x1 - x0) * t + 1j * y0,
                           x1 + 1j * (y0 + (y1 - y0) * t),
                           x1 - (x1 - x0) * t + 1j * y1,
                           x0 + 1j * (y1 - (y1 - y0) * t)])


def winding_number(ev: JostEvaluator, box, n: int = MIN_SIDE_POINTS) -> tuple[int, float]:
    """Argument-principle count on the rectangle boundary; returns (winding, min |w| on edge).

    Points are doubled until every phase step is below pi/4 and the count is stable.
    """
    prev = None
    while n <= MAX_SIDE_POINTS:
        z = _boundary(box, n)
        _, w = ev(z)
        floor = float(np.abs(w).min())
        if floor < NOISE_FLOOR:
            raise DomainError(f"Jost function below noise floor on box edge {box}")
        steps = np.angle(np.roll(w, -1) / w)
        total = steps.sum() / (2 * np.pi)
        count = int(round(total))
        fine = np.abs(steps).max() < np.pi / 4 and abs(total - count) < 1e-6
        if fine and prev == count:
            return count, floor
        prev = count if fine else None
        n *= 2
    raise ConvergenceError(f"winding number did not stabilize on {box}")


def _jitter(box, k: int, scale: float):
    shift = scale * 0.0137 * (k + 1) * np.array([1, -1, 1, -1]) * np.array([0.7, 1.1, 0.9, 1.3])
    return tuple(float(v) for v in np.asarray(box) + shift)


def _counted(ev, box, scale):
    for k in range(MAX_JITTER + 1):
        try:
            return winding_number(ev, box), box
        except DomainError:
            box = _jitter(box, k, scale)
    raise ConvergenceError(f"edge jitter failed {MAX_JITTER} times near {box}")


def newton(ev: JostEvaluator, z0: complex, scale: float, tol: float = 1e-10, max_iter: int = 40) -> complex:
    """Newton on the raw determinant with a central-difference derivative.

    Stops at |dz| < tol scale, or once steps below 1e3 tol scale stop shrinking (roundoff floor).
    """
    z = complex(z0)
    step = 1e-6 * scale
    last = np.inf
    for _ in range(max_iter):
        raw, _ = ev([z])
        dz = raw[0] / ev.derivative(z, step)
        if abs(dz) < tol * scale or (abs(dz) < 1e3 * tol * scale and abs(dz) >= last):
            return z - dz
        z -= dz
        last = abs(dz)
    raise ConvergenceError(f"Newton stalled near {z}")


def _inside(z, box, pad=0.0):
    return box[0] - pad <= z.real <= box[1] + pad and box[2] - pad <= z.imag <= box[3] + pad


def find_zeros(ev: JostEvaluator, region, newton_side: float | None = None,
               final_side: float | None = None) -> list[ZeroRecord]:
    """Zeros of the Jost function inside a rectangle (x0, x1, y0, y1) with multiplicities.

    Boxes with nonzero winding are split at a jittered fraction of the longer side.  A box with
    winding one and side below ``newton_side`` hands its center to Newton; the root is then
    re-counted in a box of side ``final_side`` around it, whose winding is the multiplicity.
    """
    b = ev.sys.b if ev.sys.b > 0 else 1.0
    newton_side = b if newton_side is None else newton_side
    final_side = FINAL_BOX * b if final_side is None else final_side
    found: list[ZeroRecord] = []
    (count, _), region = _counted(ev, tuple(region), b)
    queue = [(region, count)]
    while queue:
        box, count = queue.pop()
        if count == 0:
            continue
        x0, x1, y0, y1 = box
        side = max(x1 - x0, y1 - y0)
        if side <= newton_side and count == 1 or side <= final_side:
            center = complex(0.5 * (x0 + x1), 0.5 * (y0 + y1))
            try:
                z = newton(ev, center, b, tol=ev.newton_tol)
            except ConvergenceError:
                z = None
            if z is not None and _inside(z, box, 0.5 * side):
                rec = _final_record(ev, z, final_side, b)
                if rec.multiplicity == count or side <= final_side:
                    found.append(rec)
                    continue
            if side <= final_side:
                raise ConvergenceError(f"could not isolate {count} zero(s) in {box}")
        if x1 - x0 >= y1 - y0:
            xm = x0 + SPLIT * (x1 - x0)
            halves = [(x0, xm, y0, y1), (xm, x1, y0, y1)]
        else:
            ym = y0 + SPLIT * (y1 - y0)
            halves = [(x0, x1, y0, ym), (x0, x1, ym, y1)]
        for h in halves:
            (c, _), hb = _counted(ev, h, side)
            queue.append((hb, c))
    return _merge(found, final_side)


def _final_record(ev, z, side, b) -> ZeroRecord:
    box = (z.real - side / 2, z.real + side / 2, z.imag - side / 2, z.imag + side / 2)
    (count, floor), box = _counted(ev, box, side)
    _, w = ev([z])
    # local scale: largest normalized value on the Newton hand-off box (side b)
    _, wb = ev(_boundary((z.real - b / 2, z.real + b / 2, z.imag - b / 2, z.imag + b / 2), 16))
    resid = float(abs(w[0]) / np.abs(wb).max())
    strip = ev.sys.b == 0 or z.imag <= 10 * b
    return ZeroRecord(complex(z), count, count, resid, box, strip)


def _merge(records, tol):
    """Deduplicate roots reached from several boxes; sort on (Re, Im)."""
    out: list[ZeroRecord] = []
    for r in sorted(records, key=lambda r: (r.lambda_star.real, r.lambda_star.imag)):
        if out and abs(out[-1].lambda_star - r.lambda_star) < tol:
            continue
        out.append(r)
    return sorted(out, key=lambda r: (round(r.lambda_star.real, 12), r.lambda_star.imag))


def scan_region(b: float, l: int, delta_over_b: float = 1.0, im_min_over_b: float = -3.0,
                im_max_over_b: float = 3.0) -> tuple:
    """Default scan box {|Re| <= delta, im_min < Im < im_max}; high classes stop at Im = b/2."""
    im_max = im_max_over_b if l <= 1 else min(im_max_over_b, 0.5)
    return (-delta_over_b * b, delta_over_b * b, im_min_over_b * b, im_max * b)


def class_nu(d: int, l: int) -> float:
    if d == 1:
        if l > 1:
            raise DomainError("one dimension has only the even (l=0) and odd (l=1) classes")
        return -0.5 if l == 0 else 0.5
    return odesys.nu_of(l, d)


def expected_zeros(b: float, l: int) -> list[dict]:
    """Targets per class: (center, radius) discs that must each hold one simple zero."""
    if l == 0:
        return [{"name": "0", "center": 0j, "radius": 0.05 * b},
                {"name": "-2bi", "center": -2j * b, "radius": 0.05 * b},
                {"name": "lambda2", "center": 2j * b, "radius": 0.2 * b},
                {"name": "lambda3", "center": 0.5j * b, "radius": 0.5 * b}]
    if l == 1:
        return [{"name": "-bi", "center": -1j * b, "radius": 0.05 * b},
                {"name": "+bi", "center": 1j * b, "radius": 0.05 * b}]
    return []


def class_verdict(b: float, l: int, zeros: list[ZeroRecord], error: str | None = None) -> dict:
    """Match located zeros to the expected set; pure function of its inputs."""
    targets = expected_zeros(b, l)
    used: set[int] = set()
    matches = {}
    for t in targets:
        best = None
        for i, z in enumerate(zeros):
            if i in used:
                continue
            dist = abs(z.lambda_star - t["center"])
            if dist <= t["radius"] and (best is None or dist < best[1]):
                best = (i, dist)
        if best is not None:
            used.add(best[0])
            matches[t["name"]] = zeros[best[0]]
    # lambda3 must sit on the imaginary axis strictly between 0 and 2bi
    if "lambda3" in matches:
        z3 = matches["lambda3"].lambda_star
        if not (abs(z3.real) < 1e-6 * b and 0 < z3.imag < 2 * b) or abs(z3) < 1e-6 * b:
            matches.pop("lambda3")
    missing = [t["name"] for t in targets if t["name"] not in matches]
    extra = [z for i, z in enumerate(zeros) if i not in used]
    simple = all(z.multiplicity == 1 for z in zeros)
    if error is not None:
        verdict = "PARTIAL"
    elif missing or extra or not simple:
        verdict = "FAIL"
    else:
        verdict = "PASS"
    return {"verdict": verdict, "missing": missing,
            "unexpected": [[z.lambda_star.real, z.lambda_star.imag] for z in extra],
            "matched": {k: [v.lambda_star.real, v.lambda_star.imag] for k, v in matches.items()}}


def riesz_dims(d: int, classes: dict) -> dict:
    """Generalized-eigenspace dimensions at 0, -bi, -2bi from zero multiplicities."""
    def mult(l, name):
        info = classes.get(l)
        if not info or name not in info["verdict"]["matched"]:
            return 0
        z = complex(*info["verdict"]["matched"][name])
        return next(r.multiplicity for r in info["zeros"] if r.lambda_star == z)
    return {"0": mult(0, "0"), "-bi": d * mult(1, "-bi"), "-2bi": mult(0, "-2bi")}


@dataclass
class SpectrumReport:
    d: int
    b: float
    s_c: float
    classes: dict
    riesz: dict
    extra: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        vs = [c["verdict"]["verdict"] for c in self.classes.values()]
        if "FAIL" in vs:
            return "FAIL"
        if "PARTIAL" in vs:
            return "PARTIAL"
        return "PASS"

    def to_json(self) -> dict:
        out = {"d": self.d, "b": self.b, "s_c": self.s_c,
               "classes": [{"l": l, "zeros": [z.to_json() for z in c["zeros"]],
                            "verdict": c["verdict"]["verdict"],
                            "diagnostics": {k: v for k, v in c["verdict"].items() if k != "verdict"}
                            | ({"error": c["error"]} if c.get("error") else {})}
                           for l, c in sorted(self.classes.items())],
               "riesz_dims": self.riesz, "verdict": self.verdict}
        out.update(self.extra)
        return out


def scan_class(prof, l: int, region=None, jobs: int = 1, x_star: float | None = None,
               r_inf: float | None = None, newton_tol: float = 1e-10) -> tuple[list, JostEvaluator]:
    nu = class_nu(prof.d, l)
    sys = odesys.assemble_system(prof, nu, delta=1.5)
    region = scan_region(prof.b, l) if region is None else region
    ev = JostEvaluator(sys, x_star=x_star, r_inf=r_inf, jobs=jobs, newton_tol=newton_tol)
    return find_zeros(ev, region), ev


def classify_spectrum(prof, l_max: int, region_spec: dict | None = None, jobs: int = 1,
                      keep_evaluators: bool = False, **scan_kw) -> SpectrumReport:
    """Scan classes 0..l_max for one profile; failures are recorded per class."""
    region_spec = region_spec or {}
    classes = {}
    top = min(l_max, 1) if prof.d == 1 else l_max
    for l in range(top + 1):
        region = scan_region(prof.b, l, **region_spec)
        try:
            zeros, ev = scan_class(prof, l, region, jobs, **scan_kw)
            err = None
        except (ConvergenceError, DomainError) as exc:
            zeros, ev, err = [], None, f"{type(exc).__name__}: {exc}"
        classes[l] = {"zeros": zeros, "verdict": class_verdict(prof.b, l, zeros, err), "error": err,
                      "region": list(region)}
        if keep_evaluators:
            classes[l]["evaluator"] = ev
    return SpectrumReport(prof.d, prof.b, prof.s_c, classes, riesz_dims(prof.d, classes))


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, 17 significant digits."""
    return json.dumps(_round(obj), sort_keys=True, indent=1) + "\n"


def _round(obj):
    if isinstance(obj, float):
        return float(f"{obj:.17g}")
    if isinstance(obj, complex):
        return [_round(obj.real), _round(obj.imag)]
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.generic):
        return _round(obj.item())
    if hasattr(obj, "__dataclass_fields__"):
        return _round(asdict(obj))
    return obj
