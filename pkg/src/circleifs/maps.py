"""Orientation-preserving circle diffeomorphisms with evaluable derivatives.

Every map is represented through its lift L: R -> R, a strictly increasing
C^1 function with L(x+1) = L(x) + 1.  All analysis code in this package works
at the lift level in a chart of the circle; `__call__` reduces mod 1.

Scalar arguments take a pure-python fast path (math.*); numpy arrays are
evaluated vectorized.  Both paths compute identical IEEE values, which the
deterministic report machinery relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

TWO_PI = 2.0 * math.pi

# package-wide default tolerances
POINT_TOL = 1e-10
INVERSION_TOL = 1e-12
CLASSIFICATION_MARGIN = 1e-6


class MapConstructionError(ValueError):
    """Parameters do not define an orientation-preserving diffeomorphism."""


class NonConvergence(RuntimeError):
    """Inverse iteration exhausted its budget (pathological parameters)."""


class UnresolvedTangency(RuntimeError):
    """A near-parabolic fixed-point candidate resisted classification."""


class EnvelopeViolation(RuntimeError):
    """Measured power derivatives escaped the distortion envelope."""


class CommonFixedPointError(ValueError):
    """The two generators share a fixed/periodic point; theory inapplicable."""


class Stability(str, Enum):
    ATTRACTING = "attracting"
    REPELLING = "repelling"
    SEMI_ATTRACTING_LEFT = "semi_attracting_left"
    SEMI_ATTRACTING_RIGHT = "semi_attracting_right"
    PARABOLIC_UNRESOLVED = "parabolic_unresolved"


#: stabilities with a non-empty basin of attraction
ATTRACTOR_KINDS = (
    Stability.ATTRACTING,
    Stability.SEMI_ATTRACTING_LEFT,
    Stability.SEMI_ATTRACTING_RIGHT,
)


@dataclass(frozen=True)
class FixedPointRecord:
    """A periodic point of a single generator, classified."""

    location: float          # in [0, 1)
    period: int
    map_tag: str
    stability: Stability
    derivative: float        # Df^period at the point
    degenerate_identity: bool = False

    @property
    def attracts(self) -> bool:
        return self.stability in ATTRACTOR_KINDS

    def as_dict(self) -> dict:
        return {
            "location": self.location,
            "period": self.period,
            "map": self.map_tag,
            "stability": self.stability.value,
            "derivative": self.derivative,
        }


@dataclass(frozen=True)
class DistortionEstimate:
    """sup-ratio and total-variation distortion of log Df on a domain.

    sup_log_ratio is sup_{x,y} log(Df(x)/Df(y)); total_variation_log_df is
    the total variation of log Df, which dominates the sup-ratio on a
    connected domain.
    """

    domain: Optional[tuple]          # None means the whole circle
    sup_log_ratio: float
    total_variation_log_df: float
    grid_resolution: int

    def __post_init__(self):
        if self.sup_log_ratio < -1e-12 or self.total_variation_log_df < -1e-12:
            raise ValueError("distortion estimates must be non-negative")


class CircleMap:
    """Base class: a circle diffeomorphism accessed through its lift."""

    family_id = "abstract"
    periodic = True

    def __init__(self, tag: str = "f"):
        self.tag = tag

    # --- family subclasses implement these -------------------------------
    def _lift_s(self, x: float) -> float:
        raise NotImplementedError

    def _deriv_s(self, x: float) -> float:
        raise NotImplementedError

    def _lift_a(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _deriv_a(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def displacement_bounds(self) -> tuple:
        """(lo, hi) with lo <= L(x) - x <= hi for all x."""
        raise NotImplementedError

    def second_deriv(self, x):
        """D^2 f where the family has a closed form; None otherwise."""
        return None

    def monotone_breakpoints(self) -> Sequence[float]:
        """Points in [0,1] where Df may change monotonicity direction."""
        return (0.0, 1.0)

    def params_dict(self) -> dict:
        return {}

    # --- shared interface -------------------------------------------------
    def lift(self, x):
        if isinstance(x, (float, int)):
            return self._lift_s(float(x))
        return self._lift_a(np.asarray(x, dtype=float))

    def deriv(self, x):
        if isinstance(x, (float, int)):
            return self._deriv_s(float(x))
        return self._deriv_a(np.asarray(x, dtype=float))

    def __call__(self, x):
        """Evaluate as a map of the circle, result in [0, 1)."""
        return self.lift(x) % 1.0

    def iterate(self, x, n: int):
        """n-fold lift iterate; negative n uses the inverse."""
        if n >= 0:
            for _ in range(n):
                x = self.lift(x)
        else:
            for _ in range(-n):
                x = self.invert_lift(x)
        return x

    def pow_deriv(self, x, n: int):
        """Derivative of the n-th iterate (n may be negative) at x."""
        if isinstance(x, (float, int)):
            acc = 1.0
        else:
            x = np.asarray(x, dtype=float)
            acc = np.ones_like(x)
        if n >= 0:
            for _ in range(n):
                acc = acc * self.deriv(x)
                x = self.lift(x)
        else:
            for _ in range(-n):
                x = self.invert_lift(x)
                acc = acc / self.deriv(x)
        return acc

    def invert_lift(self, y, tol: float = INVERSION_TOL, max_iter: int = 200):
        """Solve L(x) = y by bracketed bisection plus Newton polish.

        Monotonicity of the lift guarantees the bracket
        [y - hi_disp, y - lo_disp]; bisection narrows it to ~10*tol and a few
        Newton steps polish the root.
        """
        lo_d, hi_d = self.displacement_bounds()
        if isinstance(y, (float, int)):
            return self._invert_scalar(float(y), lo_d, hi_d, tol, max_iter)
        y = np.asarray(y, dtype=float)
        lo = y - hi_d - 1e-9
        hi = y - lo_d + 1e-9
        span = float(np.max(hi - lo))
        n_bis = max(8, int(math.ceil(math.log2(max(span, 1e-30) / max(10 * tol, 1e-300))))) if span > 10 * tol else 8
        n_bis = min(n_bis, 80)
        for _ in range(n_bis):
            mid = 0.5 * (lo + hi)
            below = self._lift_a(mid) < y
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        x = 0.5 * (lo + hi)
        for _ in range(6):
            r = self._lift_a(x) - y
            if np.max(np.abs(r)) <= tol:
                break
            x = x - r / self._deriv_a(x)
        r = np.abs(self._lift_a(x) - y)
        if np.max(r) > max(tol, 1e-12) * 10:
            raise NonConvergence("vectorized inverse did not reach tolerance")
        return x

    def _invert_scalar(self, y, lo_d, hi_d, tol, max_iter):
        lo = y - hi_d - 1e-9
        hi = y - lo_d + 1e-9
        x = y - 0.5 * (lo_d + hi_d)
        for it in range(max_iter):
            fx = self._lift_s(x) - y
            if abs(fx) <= tol:
                return x
            if fx > 0.0:
                hi = x if x < hi else hi
            else:
                lo = x if x > lo else lo
            step = fx / self._deriv_s(x)
            xn = x - step
            if not (lo < xn < hi):
                xn = 0.5 * (lo + hi)
            if xn == x:
                x = 0.5 * (lo + hi)
                if x == xn:
                    return x
            else:
                x = xn
        raise NonConvergence(f"inverse iteration budget exhausted for y={y!r}")

    def invert(self, y, tol: float = INVERSION_TOL):
        """Circle inverse: the unique preimage in [0, 1)."""
        return self.invert_lift(y, tol) % 1.0

    def describe(self) -> dict:
        return {"family": self.family_id, "tag": self.tag,
                "params": self.params_dict()}


class PerturbedRotation(CircleMap):
    """x -> x + alpha + (beta / 2 pi k) sin(2 pi k (x - phase))  (mod 1).

    |beta| < 1 keeps the derivative positive.  harmonics k > 1 gives a
    2k-fixed-point ("two-bump") family; phase slides the fixed points.
    """

    family_id = "perturbed_rotation"

    def __init__(self, alpha: float, beta: float, phase: float = 0.0,
                 harmonics: int = 1, tag: str = "f"):
        super().__init__(tag)
        if abs(beta) >= 1.0:
            raise MapConstructionError("|beta| must be < 1 for a diffeomorphism")
        if harmonics < 1:
            raise MapConstructionError("harmonics must be a positive integer")
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.phase = float(phase)
        self.k = int(harmonics)
        self._w = TWO_PI * self.k
        self._amp = self.beta / self._w

    def _lift_s(self, x):
        return x + self.alpha + self._amp * math.sin(self._w * (x - self.phase))

    def _deriv_s(self, x):
        return 1.0 + self.beta * math.cos(self._w * (x - self.phase))

    def _lift_a(self, x):
        return x + self.alpha + self._amp * np.sin(self._w * (x - self.phase))

    def _deriv_a(self, x):
        return 1.0 + self.beta * np.cos(self._w * (x - self.phase))

    def second_deriv(self, x):
        if isinstance(x, (float, int)):
            return -self.beta * self._w * math.sin(self._w * (x - self.phase))
        return -self.beta * self._w * np.sin(self._w * (np.asarray(x, float) - self.phase))

    def monotone_breakpoints(self):
        # D^2 f vanishes where sin(w (x - phase)) = 0
        pts = [(self.phase + j / (2.0 * self.k)) % 1.0 for j in range(2 * self.k)]
        return sorted(set([0.0, 1.0] + pts))

    def displacement_bounds(self):
        return (self.alpha - abs(self._amp), self.alpha + abs(self._amp))

    def params_dict(self):
        return {"alpha": repr(self.alpha), "beta": repr(self.beta),
                "phase": repr(self.phase), "harmonics": self.k}

    @classmethod
    def with_fixed_points(cls, repeller: float, attractor: float,
                          beta: float, tag: str = "f"):
        """Member with prescribed fixed points (beta > 0, harmonics 1).

        The repeller sits where cos > 0 and the attractor where cos < 0;
        placing them fixes phase and alpha.
        """
        if beta <= 0:
            raise MapConstructionError("need beta > 0 to prescribe fixed points")
        theta = (repeller + attractor - 0.5) / 2.0
        s = math.sin(TWO_PI * (repeller - theta))
        alpha = -beta * s / TWO_PI
        return cls(alpha, beta, phase=theta, tag=tag)


class MorseSmaleMap(CircleMap):
    """Piecewise-sine displacement with prescribed hyperbolic fixed points.

    knots: an even number of fixed points, sorted in [0, 1).  On each gap the
    displacement is sign * tau * gap_len * sin(pi t); the shared slope
    parameter tau < 1/pi makes the map C^1 with Df(knot) = 1 -/+ tau*pi.
    first_sign is the displacement sign on (knots[0], knots[1]).
    """

    family_id = "morse_smale"

    def __init__(self, knots: Sequence[float], tau: float,
                 first_sign: int = -1, tag: str = "f"):
        super().__init__(tag)
        kn = [float(k) for k in knots]
        if len(kn) < 2 or len(kn) % 2 != 0:
            raise MapConstructionError("need an even number (>= 2) of fixed points")
        if any(b <= a for a, b in zip(kn, kn[1:])) or kn[-1] - kn[0] >= 1.0:
            raise MapConstructionError("fixed points must be sorted within one period")
        if not 0.0 < tau < 1.0 / math.pi:
            raise MapConstructionError("tau must lie in (0, 1/pi)")
        if first_sign not in (-1, 1):
            raise MapConstructionError("first_sign must be +-1")
        self.knots = kn
        self.tau = float(tau)
        self.first_sign = int(first_sign)
        self._k0 = kn[0]
        self._ext = np.array(kn + [kn[0] + 1.0]) - self._k0
        self._lens = np.diff(self._ext)
        self._signs = np.array([first_sign * (-1) ** i for i in range(len(kn))],
                               dtype=float)
        self._n = len(kn)

    def _piece_s(self, x):
        frac = (x - self._k0) % 1.0
        i = int(np.searchsorted(self._ext, frac, side="right")) - 1
        if i < 0:
            i = 0
        elif i >= self._n:
            i = self._n - 1
        return i, frac

    def _lift_s(self, x):
        i, frac = self._piece_s(x)
        t = (frac - self._ext[i]) / self._lens[i]
        return x + self._signs[i] * self.tau * self._lens[i] * math.sin(math.pi * t)

    def _deriv_s(self, x):
        i, frac = self._piece_s(x)
        t = (frac - self._ext[i]) / self._lens[i]
        return 1.0 + self._signs[i] * self.tau * math.pi * math.cos(math.pi * t)

    def _piece_a(self, x):
        frac = (x - self._k0) % 1.0
        i = np.clip(np.searchsorted(self._ext, frac, side="right") - 1, 0, self._n - 1)
        return i, frac

    def _lift_a(self, x):
        i, frac = self._piece_a(x)
        t = (frac - self._ext[i]) / self._lens[i]
        return x + self._signs[i] * self.tau * self._lens[i] * np.sin(np.pi * t)

    def _deriv_a(self, x):
        i, frac = self._piece_a(x)
        t = (frac - self._ext[i]) / self._lens[i]
        return 1.0 + self._signs[i] * self.tau * np.pi * np.cos(np.pi * t)

    def second_deriv(self, x):
        scalar = isinstance(x, (float, int))
        xa = np.asarray([x] if scalar else x, dtype=float)
        i, frac = self._piece_a(xa)
        t = (frac - self._ext[i]) / self._lens[i]
        out = -self._signs[i] * self.tau * (math.pi ** 2 / self._lens[i]) * np.sin(np.pi * t)
        return float(out[0]) if scalar else out

    def monotone_breakpoints(self):
        return sorted(set([0.0, 1.0] + [k % 1.0 for k in self.knots]))

    def displacement_bounds(self):
        amp = self.tau * float(np.max(self._lens))
        return (-amp, amp)

    def params_dict(self):
        return {"fixed_points": [repr(k) for k in self.knots],
                "tau": repr(self.tau), "first_sign": self.first_sign}


class SplineMap(CircleMap):
    """Monotone cubic (PCHIP) interpolant of user data, extended periodically.

    knots_x in [0, 1) strictly increasing, knots_y strictly increasing with
    the periodic closure y[0]+1 appended implicitly.  Extending the data one
    period to each side before fitting makes the lift exactly periodic.
    """

    family_id = "spline"

    def __init__(self, knots_x: Sequence[float], knots_y: Sequence[float],
                 tag: str = "f"):
        super().__init__(tag)
        x = np.asarray(knots_x, dtype=float)
        y = np.asarray(knots_y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or len(x) < 3:
            raise MapConstructionError("need >= 3 matching knots")
        if np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
            raise MapConstructionError("knots must be strictly increasing")
        if x[-1] - x[0] >= 1.0 or y[-1] - y[0] >= 1.0:
            raise MapConstructionError("knots must fit inside one period")
        self._x0 = float(x[0])
        xx = np.concatenate([x - 1.0, x, x + 1.0])
        yy = np.concatenate([y - 1.0, y, y + 1.0])
        self._p = PchipInterpolator(xx, yy, extrapolate=False)
        self._dp = self._p.derivative()
        self._d2p = self._p.derivative(2)
        self._knots_x = x
        self._knots_y = y
        grid = np.linspace(self._x0, self._x0 + 1.0, 4097)
        d = self._dp(grid)
        if np.min(d) <= 0:
            raise MapConstructionError("spline derivative not strictly positive")
        disp = self._p(grid) - grid
        self._disp_lo = float(np.min(disp)) - 1e-12
        self._disp_hi = float(np.max(disp)) + 1e-12

    def _reduce(self, x):
        # shift into the central fitting window [x0, x0+1)
        n = np.floor(x - self._x0)
        return x - n, n

    def _lift_s(self, x):
        xr, n = self._reduce(x)
        return float(self._p(xr)) + float(n)

    def _deriv_s(self, x):
        xr, _ = self._reduce(x)
        return float(self._dp(xr))

    def _lift_a(self, x):
        xr, n = self._reduce(x)
        return self._p(xr) + n

    def _deriv_a(self, x):
        xr, _ = self._reduce(x)
        return self._dp(xr)

    def second_deriv(self, x):
        scalar = isinstance(x, (float, int))
        xa = np.asarray([x] if scalar else x, dtype=float)
        xr, _ = self._reduce(xa)
        out = self._d2p(xr)
        return float(out[0]) if scalar else out

    def monotone_breakpoints(self):
        return sorted(set([0.0, 1.0] + [float(k % 1.0) for k in self._knots_x]))

    def displacement_bounds(self):
        return (self._disp_lo, self._disp_hi)

    def params_dict(self):
        return {"knots_x": [repr(float(v)) for v in self._knots_x],
                "knots_y": [repr(float(v)) for v in self._knots_y]}


def _grid_displacement_bounds(m: CircleMap, n: int = 8192):
    g = np.linspace(0.0, 1.0, n, endpoint=False)
    d = m.lift(g) - g
    pad = 2.0 / n  # slope of displacement is |Df - 1| < 1 per step
    return float(np.min(d)) - pad, float(np.max(d)) + pad


class PowerMap(CircleMap):
    """f^q with an integer deck shift removed: lift = L^q(x) - shift.

    For rotation number p/q the shift p renormalizes the power to rotation
    number zero, so its fixed points are the period-q points of f.
    """

    family_id = "power"

    def __init__(self, base: CircleMap, power: int, shift: int = 0):
        super().__init__(base.tag if power == 1 and shift == 0
                         else f"{base.tag}^{power}")
        if power < 1:
            raise MapConstructionError("power must be >= 1")
        self.base = base
        self.power = int(power)
        self.shift = int(shift)
        self._db = _grid_displacement_bounds(self)

    def _lift_s(self, x):
        for _ in range(self.power):
            x = self.base._lift_s(x)
        return x - self.shift

    def _deriv_s(self, x):
        acc = 1.0
        for _ in range(self.power):
            acc *= self.base._deriv_s(x)
            x = self.base._lift_s(x)
        return acc

    def _lift_a(self, x):
        for _ in range(self.power):
            x = self.base._lift_a(x)
        return x - self.shift

    def _deriv_a(self, x):
        acc = np.ones_like(x)
        for _ in range(self.power):
            acc = acc * self.base._deriv_a(x)
            x = self.base._lift_a(x)
        return acc

    def displacement_bounds(self):
        return self._db

    def monotone_breakpoints(self):
        return sorted(set(np.linspace(0.0, 1.0, 65)))

    def params_dict(self):
        return {"base": self.base.describe(), "power": self.power,
                "shift": self.shift}


class InverseMap(CircleMap):
    """The inverse diffeomorphism, evaluated through the base's inverse."""

    family_id = "inverse"

    def __init__(self, base: CircleMap):
        super().__init__(f"{base.tag}~")
        self.base = base
        lo, hi = base.displacement_bounds()
        self._db = (-hi, -lo)

    def _lift_s(self, x):
        return self.base._invert_scalar(x, *self.base.displacement_bounds(),
                                        INVERSION_TOL, 200)

    def _deriv_s(self, x):
        z = self._lift_s(x)
        return 1.0 / self.base._deriv_s(z)

    def _lift_a(self, x):
        return self.base.invert_lift(x)

    def _deriv_a(self, x):
        z = self.base.invert_lift(x)
        return 1.0 / self.base._deriv_a(z)

    def invert_lift(self, y, tol: float = INVERSION_TOL, max_iter: int = 200):
        return self.base.lift(y)

    def displacement_bounds(self):
        return self._db

    def monotone_breakpoints(self):
        return sorted(set(np.linspace(0.0, 1.0, 65)))

    def params_dict(self):
        return {"base": self.base.describe()}


class ReflectedMap(CircleMap):
    """Conjugation by x -> -x (orientation flip of the chart, not the map)."""

    family_id = "reflected"

    def __init__(self, base: CircleMap):
        super().__init__(f"{base.tag}|r")
        self.base = base
        lo, hi = base.displacement_bounds()
        self._db = (-hi, -lo)

    def _lift_s(self, x):
        return -self.base._lift_s(-x)

    def _deriv_s(self, x):
        return self.base._deriv_s(-x)

    def _lift_a(self, x):
        return -self.base._lift_a(-x)

    def _deriv_a(self, x):
        return self.base._deriv_a(-x)

    def displacement_bounds(self):
        return self._db

    def monotone_breakpoints(self):
        return sorted(set((-b) % 1.0 for b in self.base.monotone_breakpoints()) | {0.0, 1.0})

    def params_dict(self):
        return {"base": self.base.describe()}


def make_map(family: str, params: dict, tag: str = "f") -> CircleMap:
    """Construct a family member from decimal-string scenario parameters."""
    def fnum(v):
        return float(v)

    if family == "perturbed_rotation":
        return PerturbedRotation(
            fnum(params["alpha"]), fnum(params["beta"]),
            phase=fnum(params.get("phase", "0")),
            harmonics=int(params.get("harmonics", 1)), tag=tag)
    if family == "morse_smale":
        return MorseSmaleMap(
            [fnum(v) for v in params["fixed_points"]],
            fnum(params["tau"]), first_sign=int(params.get("first_sign", -1)),
            tag=tag)
    if family == "spline":
        return SplineMap([fnum(v) for v in params["knots_x"]],
                         [fnum(v) for v in params["knots_y"]], tag=tag)
    raise MapConstructionError(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def rotation_number(m: CircleMap, budget: int = 10_000, tol: float = POINT_TOL,
                    q_max: int = 64):
    """Birkhoff estimate plus a rationality certificate.

    The estimate (L^n(0) - 0)/n has error bound 1/n.  The verdict is rational
    p/q when for some q <= q_max the range of L^q - id on a grid brackets an
    integer p (the intermediate value theorem then certifies a period-q
    point); the smallest such q wins.
    """
    if budget < 1000:
        raise ValueError("budget must be >= 1e3")
    x = 0.0
    for _ in range(budget):
        x = m._lift_s(x)
    estimate = x / budget

    grid = np.linspace(0.0, 1.0, 1024, endpoint=False)
    cur = grid.copy()
    for q in range(1, q_max + 1):
        cur = m._lift_a(cur)
        d = cur - grid
        lo, hi = float(np.min(d)), float(np.max(d))
        p = math.floor(hi + tol)
        if lo - tol <= p <= hi + tol:
            # certify: grid range brackets p, or a refinement does
            if lo <= p <= hi or _range_brackets(m, q, p, tol):
                frac = Fraction(p, q)
                return {"estimate": estimate, "error_bound": 1.0 / budget,
                        "verdict": "rational", "p": frac.numerator,
                        "q": frac.denominator}
    return {"estimate": estimate, "error_bound": 1.0 / budget,
            "verdict": "irrational_suspected", "p": None, "q": None}


def _range_brackets(m, q, p, tol):
    grid = np.linspace(0.0, 1.0, 8192, endpoint=False)
    cur = grid.copy()
    for _ in range(q):
        cur = m._lift_a(cur)
    d = cur - grid
    return float(np.min(d)) - tol <= p <= float(np.max(d)) + tol


def fixed_points(m: CircleMap, period: int = 1, tol: float = POINT_TOL,
                 margin: float = CLASSIFICATION_MARGIN,
                 grid_size: int = 4096) -> list:
    """All period-q points of m, located and classified.

    Scans g_p(x) = L^q(x) - x - p on a uniform grid for every integer p the
    range of L^q - id reaches, refines sign changes dyadically to `tol`, and
    chases near-tangencies.  Classification: |Df^q - 1| > margin decides
    attracting/repelling; otherwise one-sided signs of g decide
    semi-attraction, and two-sided cases stay parabolic_unresolved.
    """
    q = int(period)
    if q < 1:
        raise ValueError("period must be >= 1")
    grid = np.linspace(0.0, 1.0, grid_size + 1)
    vals = grid.copy()
    for _ in range(q):
        vals = m._lift_a(vals)
    disp = vals - grid
    lo, hi = float(np.min(disp)), float(np.max(disp))

    if hi - lo <= 2 * tol and abs(round(lo) - lo) <= 2 * tol:
        # f^q is the identity to tolerance: every point is periodic
        return [FixedPointRecord(0.0, q, m.tag, Stability.PARABOLIC_UNRESOLVED,
                                 1.0, degenerate_identity=True)]

    roots = []
    for p in range(math.ceil(lo - tol), math.floor(hi + tol) + 1):
        g = disp - p
        roots.extend(_roots_on_grid(m, q, p, grid, g, tol))

    roots = _dedupe_sorted(sorted(r % 1.0 for r in roots), tol * 10)
    records = []
    for x in roots:
        dq = float(m.pow_deriv(float(x), q))
        records.append(_classify_fixed_point(m, q, float(x), dq, tol, margin))
    return records


def _roots_on_grid(m, q, p, grid, g, tol):
    def gval(x):
        z = x
        for _ in range(q):
            z = m._lift_s(z)
        return z - x - p

    roots = []
    n = len(grid) - 1
    sign = np.sign(g)
    for i in range(n):
        a, b, ga, gb = grid[i], grid[i + 1], g[i], g[i + 1]
        if ga == 0.0:
            roots.append(a)
            continue
        if sign[i] * sign[i + 1] < 0:
            roots.append(_bisect_root(gval, a, b, ga, tol))
        elif abs(ga) < (b - a) and abs(gb) < (b - a):
            # possible tangency: look for an interior minimum of |g|
            x, v = _refine_extremum(gval, a, b, minimize=(ga > 0))
            if abs(v) <= tol:
                roots.append(x)
            elif (v < 0) != (ga < 0):
                # extremum crossed zero: two roots bracketed
                roots.append(_bisect_root(gval, a, x, ga, tol))
                roots.append(_bisect_root(gval, x, b, v, tol))
    return roots


def _bisect_root(gval, a, b, ga, tol):
    for _ in range(200):
        if b - a <= tol:
            break
        mid = 0.5 * (a + b)
        gm = gval(mid)
        if gm == 0.0:
            return mid
        if (gm > 0) == (ga > 0):
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def _refine_extremum(gval, a, b, minimize=True, iters=80):
    """Golden-section search for the interior extremum of g on [a, b]."""
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    sgn = 1.0 if minimize else -1.0
    x1 = b - phi * (b - a)
    x2 = a + phi * (b - a)
    f1, f2 = sgn * gval(x1), sgn * gval(x2)
    for _ in range(iters):
        if b - a < 1e-14:
            break
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - phi * (b - a)
            f1 = sgn * gval(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + phi * (b - a)
            f2 = sgn * gval(x2)
    x = 0.5 * (a + b)
    return x, gval(x)


def _dedupe_sorted(xs, tol):
    out = []
    for x in xs:
        if out and x - out[-1] <= tol:
            continue
        out.append(x)
    if len(out) > 1 and (out[0] + 1.0) - out[-1] <= tol:
        out.pop()
    return out


def _classify_fixed_point(m, q, x, dq, tol, margin):
    if dq < 1.0 - margin:
        return FixedPointRecord(x, q, m.tag, Stability.ATTRACTING, dq)
    if dq > 1.0 + margin:
        return FixedPointRecord(x, q, m.tag, Stability.REPELLING, dq)

    def gval(z):
        w = z
        for _ in range(q):
            w = m._lift_s(w)
        return w - z

    # one-sided displacement signs at a few probe scales
    for h in (1e-5, 1e-4, 1e-3):
        gl = gval(x - h)
        gr = gval(x + h)
        if abs(gl) > tol and abs(gr) > tol:
            att_left = gl > 0
            att_right = gr < 0
            if att_left and not att_right:
                return FixedPointRecord(x, q, m.tag,
                                        Stability.SEMI_ATTRACTING_LEFT, dq)
            if att_right and not att_left:
                return FixedPointRecord(x, q, m.tag,
                                        Stability.SEMI_ATTRACTING_RIGHT, dq)
            return FixedPointRecord(x, q, m.tag,
                                    Stability.PARABOLIC_UNRESOLVED, dq)
    raise UnresolvedTangency(
        f"cannot classify near-parabolic point of {m.tag} at {x!r}")


def distortion(m: CircleMap, domain: Optional[tuple] = None,
               grid_size: int = 4096) -> DistortionEstimate:
    """Distortion of m: sup-ratio of log Df and its total variation.

    On the whole circle the total variation is the quantity that controls
    every composition estimate; on subintervals the sup-ratio matches the
    usual definition sup log(Df(x)/Df(y)).  Families with a closed-form
    second derivative get the total variation by quadrature of |D2f/Df|,
    others by a monotone-run scan of a refined grid.
    """
    if domain is None:
        a, b = 0.0, 1.0
    else:
        a, b = float(domain[0]), float(domain[1])
        if not b > a:
            raise ValueError("empty domain")

    xs = np.linspace(a, b, grid_size + 1)
    logd = np.log(m.deriv(xs))
    i_max, i_min = int(np.argmax(logd)), int(np.argmin(logd))
    hi = _refine_log_extreme(m, xs, i_max, maximize=True)
    lo = _refine_log_extreme(m, xs, i_min, maximize=False)
    sup_ratio = max(hi - lo, 0.0)

    tv = _total_variation_log_df(m, a, b, xs, logd)
    tv = max(tv, sup_ratio)  # TV dominates the sup-ratio on an interval
    return DistortionEstimate(domain, sup_ratio, tv, grid_size)


def _refine_log_extreme(m, xs, i, maximize):
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, len(xs) - 1)]
    f = lambda x: math.log(m._deriv_s(x))
    x, v = _refine_extremum(f, a, b, minimize=not maximize, iters=60)
    return v


def _total_variation_log_df(m, a, b, xs, logd):
    d2 = m.second_deriv(0.5 * (a + b))
    if d2 is not None:
        brk = [t for t in m.monotone_breakpoints()]
        pts = sorted({a, b} | {a + ((t - a) % 1.0) for t in brk
                               if a < a + ((t - a) % 1.0) < b})
        total = 0.0
        for lo_, hi_ in zip(pts, pts[1:]):
            val, _ = integrate.quad(
                lambda x: abs(m.second_deriv(x)) / m._deriv_s(x),
                lo_, hi_, limit=200)
            total += val
        return total
    # generic monotone-run scan with extremum refinement
    sgn = np.sign(np.diff(logd))
    turning = [a] + [xs[i + 1] for i in range(len(sgn) - 1)
                     if sgn[i] != 0 and sgn[i + 1] != 0 and sgn[i] != sgn[i + 1]] + [b]
    f = lambda x: math.log(m._deriv_s(x))
    refined = [a]
    for t in turning[1:-1]:
        h = (b - a) / len(sgn)
        up = f(t - h) < f(t)
        x, _ = _refine_extremum(f, t - h, t + h, minimize=not up, iters=40)
        refined.append(x)
    refined.append(b)
    vals = [f(x) for x in refined]
    return float(sum(abs(v2 - v1) for v1, v2 in zip(vals, vals[1:])))


def closeness_certificate(m: CircleMap, epsilon: float):
    """Certify V_f <= epsilon (closeness to rotation in C^{1+bv})."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    est = distortion(m)
    v = est.total_variation_log_df
    return {"certified": v <= epsilon, "epsilon": epsilon, "measured_v": v,
            "map": m.tag}


def power_derivative_bounds(m: CircleMap, period: int, tol: float = 1e-9,
                            grid_size: int = 4096):
    """Envelope e^{-V} <= Df^n <= e^{V} versus the measured range.

    The envelope holds whenever the map has period-n points; the measured
    grid range escaping it beyond `tol` signals a distortion bug.
    """
    q = int(period)
    if not _has_period_points(m, q):
        raise ValueError(f"map {m.tag} has no periodic points of period {q}")
    v = distortion(m).total_variation_log_df
    envelope = (math.exp(-v), math.exp(v))
    xs = np.linspace(0.0, 1.0, grid_size, endpoint=False)
    dq = m.pow_deriv(xs, q)
    measured = (float(np.min(dq)), float(np.max(dq)))
    if measured[0] < envelope[0] - tol or measured[1] > envelope[1] + tol:
        raise EnvelopeViolation(
            f"Df^{q} range {measured} escapes envelope {envelope}")
    return {"envelope": envelope, "measured": measured, "v": v, "period": q}


def _has_period_points(m, q, tol=POINT_TOL):
    grid = np.linspace(0.0, 1.0, 2048, endpoint=False)
    cur = grid.copy()
    for _ in range(q):
        cur = m._lift_a(cur)
    d = cur - grid
    lo, hi = float(np.min(d)), float(np.max(d))
    p = math.floor(hi + tol)
    return lo - tol <= p <= hi + tol


def reduce_to_zero_rotation(m: CircleMap, q_max: int = 64,
                            budget: int = 10_000):
    """Return (g, q, p) with g = f^q shifted to rotation number zero.

    Identity when f already has fixed points.  Raises ValueError when no
    rational rotation number is certified up to q_max.
    """
    rec = rotation_number(m, budget=budget, q_max=q_max)
    if rec["verdict"] != "rational":
        raise ValueError(f"map {m.tag}: no periodic points up to period {q_max}")
    q, p = rec["q"], rec["p"]
    if q == 1 and p == 0:
        return m, 1, 0
    return PowerMap(m, q, shift=p), q, p


def assert_no_common_fixed_points(g0: CircleMap, g1: CircleMap,
                                  tol: float = POINT_TOL):
    """Guard: reject scenarios whose generators share a fixed point."""
    fp0 = fixed_points(g0)
    fp1 = fixed_points(g1)
    for r0 in fp0:
        for r1 in fp1:
            d = abs(r0.location - r1.location)
            d = min(d, 1.0 - d)
            if d <= 10 * tol:
                raise CommonFixedPointError(
                    f"{g0.tag} and {g1.tag} share a fixed point near "
                    f"{r0.location:.12f}")
    return fp0, fp1
