"""Sampled dimension curves, the growth preorder on a finite window, and a growth-type heuristic."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import InvalidSpecError, PreconditionError


@dataclass(frozen=True)
class DimensionCurve:
    """Scale -> value samples; ``None`` marks an infeasible sample."""

    samples: tuple  # sorted tuple of (R, value | None)
    metadata: dict = field(default_factory=dict, compare=False)

    @classmethod
    def of(cls, samples: Mapping | Iterable, metadata: dict | None = None) -> "DimensionCurve":
        items = samples.items() if isinstance(samples, Mapping) else samples
        pts = sorted((r, v) for r, v in items)
        rs = [r for r, _ in pts]
        if len(set(rs)) != len(rs):
            raise InvalidSpecError("duplicate scale in curve")
        for r, v in pts:
            if v is not None and (not isinstance(v, (int, float)) or v < 0):
                raise InvalidSpecError(f"bad curve value {v!r} at {r}")
        return cls(tuple(pts), dict(metadata or {}))

    @classmethod
    def from_function(cls, fn: Callable[[int], float], domain: Iterable[int], **meta) -> "DimensionCurve":
        return cls.of({r: fn(r) for r in domain}, meta)

    def as_dict(self) -> dict:
        return dict(self.samples)

    @property
    def domain(self) -> list:
        return [r for r, _ in self.samples]

    @property
    def monotone(self) -> bool:
        vals = [v for _, v in self.samples if v is not None]
        return all(a <= b for a, b in zip(vals, vals[1:]))

    def __call__(self, r):
        return self.as_dict()[r]


@dataclass(frozen=True)
class PreorderWitness:
    k: int
    window: tuple  # (lowest, highest) tested x


def _value(v) -> float:
    return math.inf if v is None else v


def _holds(f: dict, g: dict, k: int) -> tuple[bool, list]:
    tested = [x for x in sorted(f) if x > k and k * x + k in g]
    ok = all(_value(f[x]) <= k * _value(g[k * x + k]) + k for x in tested)
    return ok, tested


def preceq_witness(
    f: DimensionCurve,
    g: DimensionCurve,
    k_max: int,
    window: tuple | None = None,
) -> PreorderWitness | None:
    """Smallest k <= k_max with f(x) <= k*g(kx+k)+k on every sampled x > k in the window.

    Only x whose image kx+k is sampled by g are tested. A ``None`` answer speaks
    about the sampled window only.
    """
    if k_max < 1:
        raise InvalidSpecError("k_max must be >= 1")
    fd = f.as_dict()
    if window is not None:
        lo, hi = window
        fd = {x: v for x, v in fd.items() if lo <= x <= hi}
    gd = g.as_dict()
    any_tested = False
    for k in range(1, k_max + 1):
        ok, tested = _holds(fd, gd, k)
        if tested:
            any_tested = True
            if ok:
                return PreorderWitness(k, (tested[0], tested[-1]))
    if not any_tested:
        raise PreconditionError("empty effective window: no sampled x has kx+k in g's domain")
    return None


@dataclass(frozen=True)
class Equivalence:
    verdict: str  # "equivalent" | "only f<=g" | "only g<=f" | "incomparable"
    forward: PreorderWitness | None
    backward: PreorderWitness | None

    def __str__(self) -> str:
        if self.verdict == "equivalent":
            return f"equivalent({self.forward.k},{self.backward.k})"
        return self.verdict


def equiv(f: DimensionCurve, g: DimensionCurve, k_max: int, window: tuple | None = None) -> Equivalence:
    fw = preceq_witness(f, g, k_max, window)
    bw = preceq_witness(g, f, k_max, window)
    if fw and bw:
        v = "equivalent"
    elif fw:
        v = "only f<=g"
    elif bw:
        v = "only g<=f"
    else:
        v = "incomparable"
    return Equivalence(v, fw, bw)


# --- heuristic classification -------------------------------------------------------------


@dataclass(frozen=True)
class Classification:
    """Heuristic growth label from least-squares fits; never a proof."""

    kind: str  # constant | polynomial | exponential | inconclusive
    estimate: float | None
    residuals: dict

    def __str__(self) -> str:
        if self.kind == "polynomial":
            return f"polynomial(degree~{self.estimate:.3g}) [heuristic]"
        if self.kind == "exponential":
            return f"exponential(rate~{self.estimate:.3g}) [heuristic]"
        return f"{self.kind} [heuristic]"


def _fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Slope and root-mean-square residual of a line fit."""
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(res**2)))


def classify(f: DimensionCurve, margin: float = 0.2, min_samples: int = 5) -> Classification:
    """Label a curve constant, polynomial, exponential, or inconclusive.

    Polynomial and exponential fits are compared in log(value+1) space against log R
    and R respectively. Degree is re-estimated on positive samples as the slope of
    log value against log R; rate is the slope of log(value+1) against R.
    """
    pts = [(r, v) for r, v in f.samples if v is not None and r > 0]
    if len(pts) < min_samples:
        raise PreconditionError(f"classify needs at least {min_samples} finite samples")
    R = np.array([float(r) for r, _ in pts])
    V = np.array([float(v) for _, v in pts])
    if np.all(V == V[0]):
        return Classification("constant", float(V[0]), {"constant": 0.0})
    ly = np.log(V + 1)
    _, poly_res = _fit(np.log(R), ly)
    rate, exp_res = _fit(R, ly)
    # residuals are compared on the same (log) scale; constant is measured there too
    const_res = float(np.sqrt(np.mean((ly - ly.mean()) ** 2)))
    residuals = {"constant": const_res, "polynomial": poly_res, "exponential": exp_res}
    ranked = sorted(residuals.items(), key=lambda kv: kv[1])
    (best, r1), (_, r2) = ranked[0], ranked[1]
    if r2 > 0 and (r2 - r1) / r2 < margin:
        return Classification("inconclusive", None, residuals)
    if best == "polynomial":
        pos = V > 0
        degree, _ = _fit(np.log(R[pos]), np.log(V[pos])) if pos.sum() >= 2 else (float("nan"), 0)
        return Classification("polynomial", degree, residuals)
    if best == "exponential":
        return Classification("exponential", rate, residuals)
    return Classification("constant", float(V.mean()), residuals)


# --- CSV ----------------------------------------------------------------------------------


def curve_to_csv(curve: DimensionCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["R", "value"])
    for r, v in curve.samples:
        w.writerow([r, "inf" if v is None else v])
    return buf.getvalue()


def curve_from_csv(text: str) -> DimensionCurve:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["R", "value"]:
        raise InvalidSpecError("curve CSV must start with header R,value")
    samples = {}
    for row in rows[1:]:
        if not row:
            continue
        r_txt, v_txt = (c.strip() for c in row)
        r = int(r_txt) if r_txt.lstrip("-").isdigit() else float(r_txt)
        if v_txt == "inf":
            v = None
        else:
            v = int(v_txt) if v_txt.isdigit() else float(v_txt)
        samples[r] = v
    return DimensionCurve.of(samples)
