"""Potentials, grids, and direct integration of the 1D Schrodinger equation.

Solves -u'' + q(x) u = k^2 u with a high-order adaptive integrator (DOP853,
rtol 1e-10 / atol 1e-12 by default), splitting at the potential's kink points.
Right Jost solutions are exact plane waves beyond the potential's right cutoff
by construction; to the left they are extended by integration.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from . import wvn_example as wvn
from .errors import (
    IntegrationFailureError,
    OutOfDomainError,
    PoleEvaluationError,
    ValidationError,
)

__all__ = [
    "Grid", "PotentialSpec", "WaveField",
    "integrate", "right_jost", "fundamental_pair", "wronskian",
    "DEFAULT_RTOL", "DEFAULT_ATOL",
]

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12

KIND_ZERO = "zero"
KIND_WVN = "wvn_example"
KIND_SYM = "sym_plus_one"
KIND_SAMPLED = "sampled"
KIND_SHIFTED = "shifted"
KIND_SUM = "sum"


@dataclass
class Grid:
    """Uniform grid on [x_min, x_max] with n_points >= 2 nodes."""

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if not (self.x_min < self.x_max):
            raise ValidationError("grid requires x_min < x_max")
        if self.n_points < 2:
            raise ValidationError("grid requires n_points >= 2")
        self._x = np.linspace(self.x_min, self.x_max, self.n_points)

    @property
    def x(self) -> np.ndarray:
        return self._x

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    def index_of(self, x0: float) -> int:
        """Index of the grid node closest to x0."""
        return int(round((x0 - self.x_min) / self.spacing))

    def contains(self, x0: float) -> bool:
        return self.x_min - 1e-12 <= x0 <= self.x_max + 1e-12

    @classmethod
    def from_spacing(cls, x_min: float, x_max: float, h: float) -> "Grid":
        n = int(round((x_max - x_min) / h)) + 1
        return cls(x_min, x_min + (n - 1) * h, n)


@dataclass
class PotentialSpec:
    """A real potential on the line, closed-form or sampled.

    The potential must vanish exactly beyond `right_cutoff` (or be declared
    negligible there within `tail_tol`; `right_cutoff = inf` marks a potential
    with no usable right cutoff).
    """

    kind: str
    rho: float | None = None
    sample_x: np.ndarray | None = None
    sample_q: np.ndarray | None = None
    shift: float = 0.0
    parts: tuple = ()
    right_cutoff: float = 0.0
    tail_tol: float = 0.0

    def __post_init__(self):
        if self.kind in (KIND_WVN, KIND_SYM):
            if self.rho is None or self.rho <= 0:
                raise ValidationError(f"{self.kind} requires rho > 0")
        if self.kind == KIND_SAMPLED:
            if self.sample_x is None or self.sample_q is None:
                raise ValidationError("sampled potential requires sample arrays")
            self.sample_x = np.asarray(self.sample_x, dtype=float)
            self.sample_q = np.asarray(self.sample_q, dtype=float)
            if self.sample_x.ndim != 1 or self.sample_x.shape != self.sample_q.shape:
                raise ValidationError("sample arrays must be 1d and of equal length")
            self._spline = CubicSpline(self.sample_x, self.sample_q, extrapolate=False)
        if self.tail_tol < 0:
            raise ValidationError("tail_tol must be nonnegative")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls) -> "PotentialSpec":
        return cls(kind=KIND_ZERO, right_cutoff=-math.inf)

    @classmethod
    def wvn_example(cls, rho: float) -> "PotentialSpec":
        return cls(kind=KIND_WVN, rho=rho, right_cutoff=0.0)

    @classmethod
    def sym_plus_one(cls, rho: float, tail_tol: float = 1e-2) -> "PotentialSpec":
        # long-range on both sides; no exact right cutoff exists
        return cls(kind=KIND_SYM, rho=rho, right_cutoff=math.inf, tail_tol=tail_tol)

    @classmethod
    def sampled(cls, x: np.ndarray, q: np.ndarray, right_cutoff: float | None = None,
                tail_tol: float = 0.0) -> "PotentialSpec":
        rc = float(x[-1]) if right_cutoff is None else right_cutoff
        return cls(kind=KIND_SAMPLED, sample_x=x, sample_q=q,
                   right_cutoff=rc, tail_tol=tail_tol)

    @classmethod
    def shifted(cls, inner: "PotentialSpec", dx: float) -> "PotentialSpec":
        return cls(kind=KIND_SHIFTED, parts=(inner,), shift=dx,
                   right_cutoff=inner.right_cutoff + dx, tail_tol=inner.tail_tol)

    @classmethod
    def sum_of(cls, *parts: "PotentialSpec") -> "PotentialSpec":
        rc = max(p.right_cutoff for p in parts)
        tol = max(p.tail_tol for p in parts)
        return cls(kind=KIND_SUM, parts=tuple(parts), right_cutoff=rc, tail_tol=tol)

    # -- evaluation --------------------------------------------------------

    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x):
        """q(x); finite real for every finite x (OutOfDomainError for sampled kinds)."""
        if self.kind == KIND_ZERO:
            return np.zeros_like(np.asarray(x, dtype=float)) if not np.isscalar(x) else 0.0
        if self.kind == KIND_WVN:
            return wvn.q_seed(self.rho, x)
        if self.kind == KIND_SYM:
            return wvn.q_sym(self.rho, x)
        if self.kind == KIND_SAMPLED:
            out = self._spline(x)
            if np.any(np.isnan(out)):
                raise OutOfDomainError("sampled potential evaluated outside its sample range")
            return out if not np.isscalar(x) else float(out)
        if self.kind == KIND_SHIFTED:
            return self.parts[0].evaluate(np.asarray(x) - self.shift)
        if self.kind == KIND_SUM:
            return sum(p.evaluate(x) for p in self.parts)
        raise ValidationError(f"unknown potential kind {self.kind!r}")

    def scalar_fn(self) -> Callable[[float], float]:
        """A fast scalar q(x) for the ODE right-hand side."""
        if self.kind == KIND_ZERO:
            return lambda x: 0.0
        if self.kind == KIND_WVN:
            rho = self.rho

            def q(x, _rho=rho):
                if x >= 0.0:
                    return 0.0
                t = 1.0 - _rho * x + 0.5 * _rho * math.sin(2 * x)
                s = math.sin(x)
                tp = -2.0 * _rho * s * s
                tpp = -2.0 * _rho * math.sin(2 * x)
                return -2.0 * tpp / t + 2.0 * (tp / t) ** 2

            return q
        fn = self.evaluate
        return lambda x: float(fn(x))

    def breakpoints(self) -> list[float]:
        """x-locations where q is continuous but not smooth (integration is split there)."""
        if self.kind in (KIND_WVN, KIND_SYM):
            return [0.0]
        if self.kind == KIND_SHIFTED:
            return [b + self.shift for b in self.parts[0].breakpoints()]
        if self.kind == KIND_SUM:
            out = sorted({b for p in self.parts for b in p.breakpoints()})
            return out
        return []

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        d = {"kind": self.kind,
             "right_cutoff": None if math.isinf(self.right_cutoff) else self.right_cutoff,
             "tail_tol": self.tail_tol}
        if self.rho is not None:
            d["rho"] = self.rho
        if self.kind == KIND_SAMPLED:
            d["x"] = self.sample_x.tolist()
            d["q"] = self.sample_q.tolist()
        if self.kind == KIND_SHIFTED:
            d["shift"] = self.shift
            d["inner"] = self.parts[0].to_json()
        if self.kind == KIND_SUM:
            d["parts"] = [p.to_json() for p in self.parts]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "PotentialSpec":
        kind = d["kind"]
        if kind == KIND_ZERO:
            return cls.zero()
        if kind == KIND_WVN:
            spec = cls.wvn_example(d["rho"])
        elif kind == KIND_SYM:
            spec = cls.sym_plus_one(d["rho"], d.get("tail_tol", 1e-2))
        elif kind == KIND_SAMPLED:
            spec = cls.sampled(np.asarray(d["x"]), np.asarray(d["q"]),
                               d.get("right_cutoff"), d.get("tail_tol", 0.0))
        elif kind == KIND_SHIFTED:
            spec = cls.shifted(cls.from_json(d["inner"]), d["shift"])
        elif kind == KIND_SUM:
            spec = cls.sum_of(*[cls.from_json(p) for p in d["parts"]])
        else:
            raise ValidationError(f"unknown potential kind {kind!r}")
        if d.get("right_cutoff") is not None:
            spec.right_cutoff = d["right_cutoff"]
        return spec

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def loads(cls, s: str) -> "PotentialSpec":
        return cls.from_json(json.loads(s))


@dataclass
class WaveField:
    """A solution of the Schrodinger equation sampled on a grid, with derivative."""

    grid: Grid
    k: complex
    values: np.ndarray
    derivs: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        self.derivs = np.asarray(self.derivs)
        if self.values.shape != (self.grid.n_points,) or self.derivs.shape != (self.grid.n_points,):
            raise ValidationError("values/derivs must have exactly n_points entries")

    @property
    def energy(self) -> complex:
        return self.k**2

    def at(self, x0: float):
        """(value, derivative) at x0 by local cubic interpolation.

        Values use the Hermite cubic built from (value, derivative) node data;
        derivatives use a 4-point local Lagrange cubic on the derivative samples.
        """
        g = self.grid
        if not g.contains(x0):
            raise OutOfDomainError(f"x={x0} outside grid [{g.x_min}, {g.x_max}]")
        h = g.spacing
        i = min(max(int((x0 - g.x_min) / h), 0), g.n_points - 2)
        t = (x0 - g.x[i]) / h
        v0, v1 = self.values[i], self.values[i + 1]
        d0, d1 = self.derivs[i], self.derivs[i + 1]
        h00 = (1 + 2 * t) * (1 - t) ** 2
        h10 = t * (1 - t) ** 2
        h01 = t**2 * (3 - 2 * t)
        h11 = t**2 * (t - 1)
        val = h00 * v0 + h10 * h * d0 + h01 * v1 + h11 * h * d1
        j = min(max(i - 1, 0), g.n_points - 4)
        xs = g.x[j:j + 4]
        der = 0.0
        for a in range(4):
            la = 1.0
            for b_ in range(4):
                if a != b_:
                    la *= (x0 - xs[b_]) / (xs[a] - xs[b_])
            der = der + la * self.derivs[j + a]
        return val, der

    def wronskian_with(self, other: "WaveField", x0: float | None = None) -> complex:
        """W(self, other) = f g' - f' g, at x0 (grid midpoint by default)."""
        if self.grid is not other.grid and not np.array_equal(self.grid.x, other.grid.x):
            raise ValidationError("wronskian requires fields on the same grid")
        if x0 is None:
            i = self.grid.n_points // 2
            return complex(self.values[i] * other.derivs[i] - self.derivs[i] * other.values[i])
        f, fp = self.at(x0)
        g, gp = other.at(x0)
        return complex(f * gp - fp * g)

    def to_csv(self, path):
        data = np.column_stack([self.grid.x,
                                self.values.real, self.values.imag,
                                self.derivs.real, self.derivs.imag])
        header = "x,re_u,im_u,re_du,im_du"
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")


def _integrate_piece(qfn, k, x_from, x_to, y0, t_eval, rtol, atol):
    """solve_ivp over one smooth piece; returns (values, derivs) at t_eval."""
    ksq = k * k

    def rhs(x, y):
        return [y[1], (qfn(x) - ksq) * y[0]]

    y0 = np.asarray(y0, dtype=complex)
    sol = solve_ivp(rhs, (x_from, x_to), y0, method="DOP853",
                    t_eval=t_eval, rtol=rtol, atol=atol, dense_output=False)
    if not sol.success:
        xf = sol.t[-1] if sol.t.size else x_from
        raise IntegrationFailureError(f"integration failed near x={xf}: {sol.message}",
                                      x_failed=float(xf))
    return sol


def integrate(spec: PotentialSpec, k: complex, x_from: float, x_to: float,
              init, grid: Grid | None = None, n_default_per_unit: int = 40,
              rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> WaveField:
    """Integrate -u'' + q u = k^2 u from x_from to x_to with data init=(u, u').

    Returns the solution sampled on the sub-grid of `grid` lying between the
    endpoints (a fresh uniform grid is built when none is given).  Integration
    is split at the potential's kink points.
    """
    if grid is None:
        n = max(2, int(abs(x_to - x_from) * n_default_per_unit) + 1)
        grid = Grid(min(x_from, x_to), max(x_from, x_to), n)
    lo, hi = min(x_from, x_to), max(x_from, x_to)
    mask = (grid.x >= lo - 1e-12) & (grid.x <= hi + 1e-12)
    xs = grid.x[mask]
    sub = Grid(xs[0], xs[-1], len(xs)) if len(xs) >= 2 else grid
    forward = x_to >= x_from
    order = xs if forward else xs[::-1]

    qfn = spec.scalar_fn()
    breaks = [b for b in spec.breakpoints() if lo < b < hi]
    breaks = sorted(breaks, reverse=not forward)
    edges = [x_from] + breaks + [x_to]

    vals = np.empty(len(order), complex)
    ders = np.empty(len(order), complex)
    y = np.asarray(init, dtype=complex)
    pos = 0
    for a, b in zip(edges[:-1], edges[1:]):
        if forward:
            in_piece = (order >= a - 1e-12) & (order <= b + 1e-12)
        else:
            in_piece = (order <= a + 1e-12) & (order >= b - 1e-12)
        in_piece &= np.arange(len(order)) >= pos
        t_eval = order[in_piece]
        t_list = list(t_eval)
        want_end = not t_list or abs(t_list[-1] - b) > 1e-12
        if want_end:
            t_list = t_list + [b]
        sol = _integrate_piece(qfn, k, a, b, y, np.asarray(t_list), rtol, atol)
        n_keep = len(t_eval)
        vals[pos:pos + n_keep] = sol.y[0][:n_keep]
        ders[pos:pos + n_keep] = sol.y[1][:n_keep]
        pos += n_keep
        y = sol.y[:, -1]
    if not forward:
        vals = vals[::-1]
        ders = ders[::-1]
    if len(xs) < 2:
        raise ValidationError("integration window contains fewer than 2 grid nodes")
    return WaveField(sub, k, vals, ders)


def right_jost(spec: PotentialSpec, k: complex, grid: Grid,
               rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> WaveField:
    """Right Jost solution psi(., k) on the grid.

    psi(x) = e^{ikx} exactly (bit for bit) for x >= right_cutoff; to the left
    it is extended by integration.  Requires Im k >= 0 and k != 0.
    """
    if abs(k) == 0:
        raise PoleEvaluationError("Jost normalization is degenerate at k = 0", k=k)
    if np.imag(k) < -1e-14:
        raise ValidationError("right_jost requires Im k >= 0")
    cutoff = spec.right_cutoff
    if math.isinf(cutoff) and cutoff > 0:
        raise ValidationError("potential declares no finite right cutoff; cannot build a Jost solution")
    cutoff = max(cutoff, grid.x_min)
    if cutoff > grid.x_max + 1e-12:
        raise ValidationError("right cutoff must satisfy right_cutoff <= grid.x_max")
    vals = np.empty(grid.n_points, complex)
    ders = np.empty(grid.n_points, complex)
    right = grid.x >= cutoff - 1e-12
    vals[right] = np.exp(1j * k * grid.x[right])
    ders[right] = 1j * k * vals[right]
    if np.any(~right):
        y0 = (np.exp(1j * k * cutoff), 1j * k * np.exp(1j * k * cutoff))
        wf = integrate(spec, k, cutoff, grid.x_min, y0, grid=grid, rtol=rtol, atol=atol)
        n_left = int(np.sum(~right))
        vals[:n_left] = wf.values[:n_left]
        ders[:n_left] = wf.derivs[:n_left]
    return WaveField(grid, k, vals, ders)


def fundamental_pair(spec: PotentialSpec, lam: complex, grid: Grid,
                     rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL):
    """Solutions (c, s) with c(0)=1, c'(0)=0, s(0)=0, s'(0)=1; W(c, s) = 1."""
    i0 = grid.index_of(0.0)
    if not grid.contains(0.0) or abs(grid.x[i0]) > 1e-9:
        raise ValidationError("fundamental_pair requires a grid containing x = 0")
    k = complex(np.sqrt(complex(lam)))
    if k.imag < 0:
        k = -k
    fields = []
    for init in ((1.0, 0.0), (0.0, 1.0)):
        vals = np.empty(grid.n_points, complex)
        ders = np.empty(grid.n_points, complex)
        if i0 + 1 < grid.n_points:
            wf = integrate(spec, k, 0.0, grid.x_max, init, grid=grid, rtol=rtol, atol=atol)
            n = wf.grid.n_points
            vals[grid.n_points - n:] = wf.values
            ders[grid.n_points - n:] = wf.derivs
        if i0 > 0:
            wf = integrate(spec, k, 0.0, grid.x_min, init, grid=grid, rtol=rtol, atol=atol)
            n = wf.grid.n_points
            vals[:n] = wf.values
            ders[:n] = wf.derivs
        vals[i0], ders[i0] = init
        fields.append(WaveField(grid, k, vals, ders))
    return fields[0], fields[1]


def wronskian(f: WaveField, g: WaveField, x0: float) -> complex:
    """W(f, g)(x0) = f g' - f' g, interpolated at x0."""
    if f.k != g.k:
        raise ValidationError("wronskian requires fields at the same momentum")
    return f.wronskian_with(g, x0)
