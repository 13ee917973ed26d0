"""Insertion and removal of embedded eigenvalues by the binary Darboux transformation.

Insertion: from generating functions phi_n(x) = -2 Re[R(omega_n)^{1/2} psi(x, omega_n)]
(square root cut along the negative reals; the overall sign is a convention and
drops out of every even combination) build the Gram matrix

    G(x)_{mn} = alpha_m alpha_n Integral(phi_m phi_n, -inf..x),

then q_new = q - 2 (log det(I + G))'' and eigenfunctions y solving
(I + G(x)) y = -(alpha_n phi_n).  Both log-det derivatives are evaluated
analytically through the resolvent (no numerical differencing):

    (log det)'  = phit . u,          u = (I+G)^{-1} phit,
    (log det)'' = 2 phit' . u - (phit . u)^2,      phit = (alpha_n phi_n).

Removal runs the same algebra on the right Gram matrix Integral(y_m y_n, x..inf)
of an orthonormal set of eigenfunctions.  Cumulative integrals use a
derivative-corrected trapezoid rule; the infinite tails use the oscillatory
tail model of `tails`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import scattering as sct
from .errors import (
    OrthonormalityError,
    PoleEvaluationError,
    PositonkitError,
    ValidationError,
)
from .schrodinger import Grid, PotentialSpec, WaveField, integrate, right_jost
from .tails import fit_oscillatory_tail

__all__ = [
    "EmbeddedStateSpec", "GramField", "TransformResult", "RemovalResult",
    "PoleCheckReport",
    "phi_n", "gram_plus", "insert_embedded", "chain_insert",
    "transformed_solutions", "phi_plus_at_omega", "greens_diagonal_transformed",
    "remove_embedded", "check_isolated_pole_preservation",
    "cumulative_corrected_trapezoid",
]

RESONANCE_TOL = 1e-8
DEFAULT_TAIL_WINDOW = 20.0
DEFAULT_EXTEND_LEFT = 25.0


@dataclass
class EmbeddedStateSpec:
    """One embedded state to insert: momentum omega > 0, norming constant alpha != 0,
    and the (unimodular) reflection value at omega."""

    omega: float
    alpha: float
    r_at_omega: complex

    def __post_init__(self):
        if not self.omega > 0:
            raise ValidationError("embedded state requires omega > 0")
        if self.alpha == 0:
            raise ValidationError("embedded state requires alpha != 0")
        mod = abs(self.r_at_omega)
        if abs(mod - 1.0) > RESONANCE_TOL:
            raise ValidationError(
                f"|R(omega)| = {mod:.12f} is not 1; omega={self.omega} is not a "
                "full-reflection momentum")
        r = self.r_at_omega / mod
        # snap tiny imaginary parts so the square-root branch is deterministic
        if abs(r.imag) < 1e-9:
            r = complex(math.copysign(1.0, r.real), 0.0)
        self.r_at_omega = r

    @property
    def root_r(self) -> complex:
        """R(omega)^{1/2} with the cut along (-inf, 0), argument in (-pi, pi]."""
        return complex(np.sqrt(complex(self.r_at_omega)))

    @classmethod
    def for_wvn_example(cls, rho: float, alpha: float, omega: float = 1.0):
        from . import wvn_example as wvn
        _, r, _ = wvn.scattering_closed(rho, omega)
        return cls(omega, alpha, r)


@dataclass
class GramField:
    """x-dependent N x N Gram matrix of the weighted generating functions."""

    grid: Grid
    entries: np.ndarray            # (n_points, N, N)
    tail_constant: np.ndarray      # (N, N): contribution of (-inf, x_min]
    fits: list = field(default_factory=list)

    @property
    def n_states(self) -> int:
        return self.entries.shape[1]


@dataclass
class TransformResult:
    """Output of an insertion: new potential, eigenfunctions, log det, fields."""

    spec: PotentialSpec
    grid: Grid
    states: list
    q_seed: np.ndarray
    q_new: np.ndarray
    log_det: np.ndarray
    y_fields: list                 # list of real WaveField (eigenfunctions)
    phi_fields: list               # list of real WaveField (generating functions)
    gram: GramField
    diagnostics: dict = field(default_factory=dict)

    def eigenfunction_norms(self, tail_window: float = DEFAULT_TAIL_WINDOW) -> np.ndarray:
        """L2 norms of the eigenfunctions, grid quadrature plus fitted tails."""
        n = len(self.y_fields)
        x = self.grid.x
        h = self.grid.spacing
        out = np.empty(n)
        for i, y in enumerate(self.y_fields):
            yv = np.real(y.values)
            yd = np.real(y.derivs)
            mid = cumulative_corrected_trapezoid(yv * yv, 2 * yv * yd, h)[-1]
            lw = x <= x[0] + tail_window
            fit_l = fit_oscillatory_tail(x[lw], yv[lw], self.states[i].omega, "left")
            rw = x >= x[-1] - tail_window
            fit_r = fit_oscillatory_tail(x[rw], yv[rw], self.states[i].omega, "right")
            out[i] = math.sqrt(mid + fit_l.self_integral() + fit_r.self_integral())
        return out

    def to_csv(self, path):
        cols = [self.grid.x, self.q_seed, self.q_new, self.log_det]
        header = "x,q_seed,q_new,log_det"
        for i, y in enumerate(self.y_fields):
            cols.append(np.real(y.values))
            header += f",y_{i+1}"
        np.savetxt(path, np.column_stack(cols), delimiter=",", header=header,
                   comments="", fmt="%.17g")

    def meta(self) -> dict:
        return {
            "states": [{"omega": s.omega, "alpha": s.alpha,
                        "r_at_omega": [s.r_at_omega.real, s.r_at_omega.imag]}
                       for s in self.states],
            "grid": {"x_min": self.grid.x_min, "x_max": self.grid.x_max,
                     "n": self.grid.n_points},
            "tail_fits": [
                {"side": f.side, "s0": f.s0, "omega": f.omega, "theta": f.theta,
                 "amp": f.amp, "a": f.a, "b": f.b, "residual": f.residual,
                 "zero_tail": f.zero_tail}
                for f in self.gram.fits],
            "diagnostics": self.diagnostics,
        }


@dataclass
class RemovalResult:
    grid: Grid
    q_minus: np.ndarray
    log_det: np.ndarray
    orthonormality: np.ndarray


@dataclass
class PoleCheckReport:
    """Result of the isolated-pole preservation diagnostic."""

    max_deviation: float
    tolerance: float
    vacuous: bool = False

    @property
    def passed(self) -> bool:
        return self.vacuous or self.max_deviation <= self.tolerance


def cumulative_corrected_trapezoid(f, fp, h):
    """Cumulative integral from the first node, trapezoid + derivative correction.

    Per-interval rule h(f0+f1)/2 + h^2 (f0'-f1')/12, locally O(h^5).
    """
    f = np.asarray(f)
    fp = np.asarray(fp)
    inc = 0.5 * h * (f[:-1] + f[1:]) + (h * h / 12.0) * (fp[:-1] - fp[1:])
    out = np.empty(f.shape[0], dtype=inc.dtype)
    out[0] = 0.0
    np.cumsum(inc, out=out[1:])
    return out


def phi_n(spec: PotentialSpec, state: EmbeddedStateSpec, grid: Grid,
          psi: WaveField | None = None, rtol: float | None = None,
          atol: float | None = None) -> WaveField:
    """Real generating function phi_n = -2 Re[R(omega)^{1/2} psi(., omega)].

    The minus sign is this artifact's convention; it makes phi equal to
    +2 sin(x) on the right tail of the explicit example.  The right tail obeys
    phi ~ (+-)2 cos(omega x + arg R / 2).
    """
    if psi is None:
        from .schrodinger import DEFAULT_ATOL, DEFAULT_RTOL
        psi = right_jost(spec, state.omega, grid,
                         rtol=DEFAULT_RTOL if rtol is None else rtol,
                         atol=DEFAULT_ATOL if atol is None else atol)
    root = state.root_r
    vals = -2.0 * np.real(root * psi.values)
    ders = -2.0 * np.real(root * psi.derivs)
    return WaveField(grid, state.omega, vals, ders)


def _phi_tail_fit(grid, phi, omega, window):
    x = grid.x
    win = x <= x[0] + window
    if np.count_nonzero(win) < 16:
        raise ValidationError("tail window contains too few samples")
    return fit_oscillatory_tail(x[win], np.real(phi.values[win]), omega, "left")


def gram_plus(phis: list, alphas, grid: Grid | None = None,
              tail_window: float = DEFAULT_TAIL_WINDOW,
              omegas=None) -> GramField:
    """Gram matrix field G(x)_{mn} = alpha_m alpha_n Integral(phi_m phi_n, -inf..x).

    The (-inf, x_min] piece comes from the oscillatory tail model fitted on
    the leftmost `tail_window` of the grid.
    """
    if grid is None:
        grid = phis[0].grid
    n = len(phis)
    alphas = np.asarray(alphas, dtype=float)
    if alphas.shape != (n,):
        raise ValidationError("need one alpha per phi")
    for f in phis:
        if f.grid.n_points != grid.n_points or not np.allclose(f.grid.x, grid.x):
            raise ValidationError("all phi fields must share the grid")
    if omegas is None:
        omegas = [float(np.real(f.k)) for f in phis]
    h = grid.spacing
    vals = [np.real(f.values) for f in phis]
    ders = [np.real(f.derivs) for f in phis]
    fits = [fit_oscillatory_tail(grid.x[grid.x <= grid.x_min + tail_window],
                                 v[grid.x <= grid.x_min + tail_window],
                                 w, "left")
            for v, w in zip(vals, omegas)]
    entries = np.empty((grid.n_points, n, n))
    tail = np.empty((n, n))
    for m in range(n):
        for l in range(m, n):
            prod = vals[m] * vals[l]
            dprod = ders[m] * vals[l] + vals[m] * ders[l]
            cum = cumulative_corrected_trapezoid(prod, dprod, h)
            if m == l:
                t0 = fits[m].self_integral()
            else:
                t0 = fits[m].cross_integral(fits[l])
            g = alphas[m] * alphas[l] * (cum + t0)
            entries[:, m, l] = g
            entries[:, l, m] = g
            tail[m, l] = tail[l, m] = alphas[m] * alphas[l] * t0
    return GramField(grid, entries, tail, fits)


def _solve_transform(phit, dphit, gram_entries):
    """Per-x solves shared by insertion paths.

    phit, dphit: (N, npts) weighted generating functions and derivatives.
    Returns (log_det, log_det'', y (N, npts), y' (N, npts)).
    """
    n, npts = phit.shape
    mats = np.eye(n)[None, :, :] + gram_entries
    sign, log_det = np.linalg.slogdet(mats)
    if np.any(sign <= 0) or np.any(log_det < -1e-10):
        raise PositonkitError("det(I + G) < 1: Gram accumulation lost positivity")
    rhs = np.stack([phit.T, dphit.T], axis=-1)          # (npts, N, 2)
    sol = np.linalg.solve(mats, rhs)                     # (npts, N, 2)
    u = sol[:, :, 0].T                                   # (N, npts)
    mdp = sol[:, :, 1].T                                 # (N, npts) = (I+G)^{-1} phit'
    jay = np.einsum("ip,ip->p", phit, u)
    dd2 = 2.0 * np.einsum("ip,ip->p", dphit, u) - jay**2
    y = -u
    yp = -(y * jay[None, :]) - mdp
    return log_det, dd2, y, yp


def _validate_states(states):
    omegas = [s.omega for s in states]
    if len(set(round(w, 12) for w in omegas)) != len(omegas):
        raise ValidationError("embedded momenta must be pairwise distinct")


def _check_insertion_preconditions(spec, states, probe_xs=(-3.0, -1.3, 0.6)):
    """Full reflection at each omega, and continuity of psi there."""
    for s in states:
        r = sct.reflection_at_resonance(spec, s.omega)
        if abs(abs(r) - 1.0) > 1e-6:
            raise ValidationError(
                f"omega={s.omega} is not a full-reflection momentum of this potential "
                f"(|R|={abs(r):.8f})")

        def psi_probe(k, _xs=probe_xs):
            return np.array([sct._psi_with_derivative_at(spec, k, xx)[0] for xx in _xs])

        res = sct.residue_at(s.omega, psi_probe, delta0=1e-2)
        if res.classification != "regular":
            raise ValidationError(
                f"right Jost solution is singular at omega={s.omega}; "
                "insertion requires continuity there")


def _extended_grid(grid: Grid, extend_left: float) -> tuple[Grid, int]:
    h = grid.spacing
    n_ext = int(math.ceil(extend_left / h))
    ext = Grid(grid.x_min - n_ext * h, grid.x_max, grid.n_points + n_ext)
    return ext, n_ext


def insert_embedded(spec: PotentialSpec, states: list, grid: Grid,
                    extend_left: float = DEFAULT_EXTEND_LEFT,
                    tail_window: float = DEFAULT_TAIL_WINDOW,
                    check_preconditions: bool = True,
                    rtol: float | None = None, atol: float | None = None) -> TransformResult:
    """Insert embedded eigenvalues omega_n^2 into the potential.

    q_new = q - 2 d^2/dx^2 log det(I + G(x)); both derivatives are evaluated
    analytically through the resolvent.  The computation runs on a grid
    extended to the left of the requested one so the Gram tail is fitted in
    the asymptotic region; results are restricted to `grid`.
    """
    states = list(states)
    _validate_states(states)
    q0 = np.asarray(spec.evaluate(grid.x), dtype=float)
    if not states:
        zeros = np.zeros(grid.n_points)
        gram = GramField(grid, np.zeros((grid.n_points, 0, 0)), np.zeros((0, 0)))
        return TransformResult(spec, grid, [], q0, q0.copy(), zeros, [], [], gram)
    if check_preconditions:
        _check_insertion_preconditions(spec, states)
    ext, n_ext = _extended_grid(grid, extend_left)
    phis = [phi_n(spec, s, ext, rtol=rtol, atol=atol) for s in states]
    alphas = np.array([s.alpha for s in states])
    gram = gram_plus(phis, alphas, ext, tail_window,
                     omegas=[s.omega for s in states])
    phit = np.stack([a * np.real(f.values) for a, f in zip(alphas, phis)])
    dphit = np.stack([a * np.real(f.derivs) for a, f in zip(alphas, phis)])
    log_det, dd2, y, yp = _solve_transform(phit, dphit, gram.entries)

    sl = slice(n_ext, None)
    sub_entries = gram.entries[sl]
    gram_out = GramField(grid, sub_entries, gram.tail_constant, gram.fits)
    q_new = q0 - 2.0 * dd2[sl]
    y_fields = [WaveField(grid, s.omega, y[i, sl], yp[i, sl])
                for i, s in enumerate(states)]
    phi_fields = [WaveField(grid, s.omega, np.real(f.values[sl]), np.real(f.derivs[sl]))
                  for s, f in zip(states, phis)]
    return TransformResult(spec, grid, states, q0, q_new, log_det[sl],
                           y_fields, phi_fields, gram_out,
                           diagnostics={"extend_left": extend_left,
                                        "tail_window": tail_window})


def chain_insert(spec: PotentialSpec, states: list, grid: Grid,
                 extend_left: float = DEFAULT_EXTEND_LEFT,
                 tail_window: float = DEFAULT_TAIL_WINDOW,
                 check_preconditions: bool = True) -> TransformResult:
    """Insert the states one at a time through the single-state recurrence.

    Each step transforms the remaining generating functions,
    phi_j <- phi_j + alpha_n y_n Integral(phi_n phi_j, -inf..x), which is the
    gauge transform of psi(., omega_j) evaluated at the new potential, and adds
    -2 d^2/dx^2 log(1 + alpha_n^2 Integral(phi_n^2)) to the potential.
    """
    states = list(states)
    _validate_states(states)
    if check_preconditions and states:
        _check_insertion_preconditions(spec, states)
    ext, n_ext = _extended_grid(grid, extend_left)
    phis = [phi_n(spec, s, ext) for s in states]
    cur_v = [np.real(f.values).copy() for f in phis]
    cur_d = [np.real(f.derivs).copy() for f in phis]
    q = np.asarray(spec.evaluate(ext.x), dtype=float)
    q0 = q.copy()
    h = ext.spacing
    log_det_total = np.zeros(ext.n_points)
    y_final = []
    for n, s in enumerate(states):
        a = s.alpha
        fit = fit_oscillatory_tail(ext.x[ext.x <= ext.x_min + tail_window],
                                   cur_v[n][ext.x <= ext.x_min + tail_window],
                                   s.omega, "left")
        big_i = fit.self_integral() + cumulative_corrected_trapezoid(
            cur_v[n] ** 2, 2 * cur_v[n] * cur_d[n], h)
        u = 1.0 + a * a * big_i
        log_det_total += np.log(u)
        jay = a * a * cur_v[n] ** 2 / u
        dd2 = 2.0 * a * a * cur_v[n] * cur_d[n] / u - jay**2
        q = q - 2.0 * dd2
        y = -a * cur_v[n] / u
        ydash = -a * cur_d[n] / u + a**3 * cur_v[n] ** 3 / u**2
        y_final.append((y, ydash))
        for j in range(n + 1, len(states)):
            fitj = fit_oscillatory_tail(ext.x[ext.x <= ext.x_min + tail_window],
                                        cur_v[j][ext.x <= ext.x_min + tail_window],
                                        states[j].omega, "left")
            hcum = fit.cross_integral(fitj) + cumulative_corrected_trapezoid(
                cur_v[n] * cur_v[j], cur_d[n] * cur_v[j] + cur_v[n] * cur_d[j], h)
            new_v = cur_v[j] + a * y * hcum
            new_d = cur_d[j] + a * (ydash * hcum + y * cur_v[n] * cur_v[j])
            cur_v[j], cur_d[j] = new_v, new_d
    sl = slice(n_ext, None)
    y_fields = [WaveField(grid, s.omega, y[sl], yd[sl])
                for s, (y, yd) in zip(states, y_final)]
    phi_fields = [WaveField(grid, s.omega, np.real(f.values[sl]), np.real(f.derivs[sl]))
                  for s, f in zip(states, phis)]
    gram = GramField(grid, np.zeros((grid.n_points, 0, 0)), np.zeros((0, 0)))
    return TransformResult(spec, grid, states, q0[sl], q[sl], log_det_total[sl],
                           y_fields, phi_fields, gram,
                           diagnostics={"method": "chain"})


def transformed_solutions(result: TransformResult, k: complex):
    """Transformed pair (phi_+N, psi_+N) at momentum k on the result grid.

    psi_+N = psi + sum_m alpha_m y_m W(psi, phi_m)/(k^2 - omega_m^2); the phi
    branch uses the left Weyl solution with the basic-scattering normalization.
    Evaluation exactly at k = +-omega_n raises (use residue_at / phi_plus_at_omega).
    """
    grid = result.grid
    spec = result.spec
    for s in result.states:
        if abs(k * k - s.omega**2) < 1e-12:
            raise PoleEvaluationError(
                f"psi_+N has a pole at k={s.omega}; use residue_at for the residue "
                "or phi_plus_at_omega for the regular branch", k=k)
    psi = right_jost(spec, k, grid)
    if abs(np.imag(k)) < 1e-12:
        r_val = sct.reflection_from_wronskians(spec, float(np.real(k)),
                                               x_eval=min(-4.0, grid.x_min + 1.0))
        phi_v = np.conj(psi.values) + r_val * psi.values
        phi_d = np.conj(psi.derivs) + r_val * psi.derivs
    else:
        t_val = sct.transmission(spec, k, x_eval=min(-4.0, grid.x_min + 1.0))
        lv = np.empty(grid.n_points, complex)
        ld = np.empty(grid.n_points, complex)
        neg = grid.x <= 0
        if np.any(neg):
            lv[neg], ld[neg] = sct.left_reference(spec, k, grid.x[neg])
        if np.any(~neg):
            v0, d0 = sct.left_reference(spec, k, 0.0)
            wf = integrate(spec, k, 0.0, grid.x_max, (v0, d0), grid=grid)
            npos = int(np.sum(~neg))
            lv[~neg] = wf.values[-npos:]
            ld[~neg] = wf.derivs[-npos:]
        phi_v, phi_d = t_val * lv, t_val * ld
    psi_v = psi.values.astype(complex).copy()
    psi_d = psi.derivs.astype(complex).copy()
    phiN_v = phi_v.astype(complex).copy()
    phiN_d = phi_d.astype(complex).copy()
    for s, y, f in zip(result.states, result.y_fields, result.phi_fields):
        denom = k * k - s.omega**2
        ay, ayd = s.alpha * np.real(y.values), s.alpha * np.real(y.derivs)
        fv, fd = np.real(f.values), np.real(f.derivs)
        w_psi = psi.values * fd - psi.derivs * fv
        psi_v = psi_v + ay * w_psi / denom
        psi_d = psi_d + (ayd * w_psi / denom + ay * psi.values * fv)
        w_phi = phi_v * fd - phi_d * fv
        phiN_v = phiN_v + ay * w_phi / denom
        phiN_d = phiN_d + (ayd * w_phi / denom + ay * phi_v * fv)
    return (WaveField(grid, k, phiN_v, phiN_d), WaveField(grid, k, psi_v, psi_d))


def phi_plus_at_omega(result: TransformResult, n: int) -> WaveField:
    """Regularized phi_+N at k = omega_n (continuous branch through the pole).

    Equals (sign) R^{1/2} { phi_n + sum_m alpha_m y_m Integral(phi_n phi_m, -inf..x) },
    with the cumulative integrals read off the Gram field.
    """
    s = result.states[n]
    grid = result.grid
    root = s.root_r
    alphas = np.array([st.alpha for st in result.states])
    fv = np.real(result.phi_fields[n].values)
    fd = np.real(result.phi_fields[n].derivs)
    acc_v = fv.astype(complex).copy()
    acc_d = fd.astype(complex).copy()
    for m, (st, y) in enumerate(zip(result.states, result.y_fields)):
        cum = result.gram.entries[:, n, m] / (alphas[n] * alphas[m])
        yv, yd = np.real(y.values), np.real(y.derivs)
        fmv = np.real(result.phi_fields[m].values)
        acc_v += st.alpha * yv * cum
        acc_d += st.alpha * (yd * cum + yv * fv * fmv)
    sigma = -1.0   # same sign convention as phi_n
    return WaveField(grid, s.omega, sigma * root * acc_v, sigma * root * acc_d)


def greens_diagonal_transformed(result: TransformResult, k: complex, x: float) -> complex:
    """Diagonal Green's function of the transformed potential, -phi_+N psi_+N / 2ik."""
    phiN, psiN = transformed_solutions(result, k)
    pv, _ = phiN.at(x)
    sv, _ = psiN.at(x)
    return complex(-pv * sv / (2j * k))


def remove_embedded(q_input, eigenfunctions: list, grid: Grid,
                    omegas=None,
                    tail_window: float = DEFAULT_TAIL_WINDOW,
                    ortho_tol: float = 1e-6) -> RemovalResult:
    """Remove embedded eigenvalues given an orthonormal set of eigenfunctions.

    q_minus = q - 2 d^2/dx^2 log det(Gbar(x)) with Gbar(x) = Integral(y_m y_n, x..inf),
    which equals I - G_-(x) by orthonormality.  Gbar is positive definite for
    every finite x; violations raise OrthonormalityError.
    """
    if isinstance(q_input, PotentialSpec):
        q = np.asarray(q_input.evaluate(grid.x), dtype=float)
    else:
        q = np.asarray(q_input, dtype=float)
        if q.shape != (grid.n_points,):
            raise ValidationError("q samples must align with the grid")
    n = len(eigenfunctions)
    if n == 0:
        return RemovalResult(grid, q.copy(), np.zeros(grid.n_points), np.zeros((0, 0)))
    if omegas is None:
        omegas = [float(np.real(y.k)) for y in eigenfunctions]
    h = grid.spacing
    x = grid.x
    vals = [np.real(y.values) for y in eigenfunctions]
    ders = [np.real(y.derivs) for y in eigenfunctions]
    fits_l = [fit_oscillatory_tail(x[x <= x[0] + tail_window],
                                   v[x <= x[0] + tail_window], w, "left")
              for v, w in zip(vals, omegas)]
    fits_r = [fit_oscillatory_tail(x[x >= x[-1] - tail_window],
                                   v[x >= x[-1] - tail_window], w, "right")
              for v, w in zip(vals, omegas)]
    gbar = np.empty((grid.n_points, n, n))
    ortho = np.empty((n, n))
    for m in range(n):
        for l in range(m, n):
            prod = vals[m] * vals[l]
            dprod = ders[m] * vals[l] + vals[m] * ders[l]
            cum = cumulative_corrected_trapezoid(prod, dprod, h)
            tl = fits_l[m].self_integral() if m == l else fits_l[m].cross_integral(fits_l[l])
            tr = fits_r[m].self_integral() if m == l else fits_r[m].cross_integral(fits_r[l])
            total = tl + cum[-1] + tr
            ortho[m, l] = ortho[l, m] = total
            right_cum = tr + (cum[-1] - cum)
            gbar[:, m, l] = right_cum
            gbar[:, l, m] = right_cum
    dev = np.max(np.abs(ortho - np.eye(n)))
    if dev > ortho_tol:
        raise OrthonormalityError(
            f"eigenfunctions are not orthonormal within {ortho_tol} (deviation {dev:.3e})")
    sign, log_det = np.linalg.slogdet(gbar)
    if np.any(sign <= 0):
        raise OrthonormalityError("right Gram matrix lost positive definiteness")
    yv = np.stack(vals)
    yd = np.stack(ders)
    rhs = np.stack([yv.T, yd.T], axis=-1)
    sol = np.linalg.solve(gbar, rhs)
    v = sol[:, :, 0].T
    gv_d = sol[:, :, 1].T
    del gv_d
    jay = np.einsum("ip,ip->p", yv, v)
    dd2 = -2.0 * np.einsum("ip,ip->p", yd, v) - jay**2
    q_minus = q - 2.0 * dd2
    return RemovalResult(grid, q_minus, log_det, ortho)


def check_isolated_pole_preservation(phi_family, psi_family, result_like,
                                     bound_state, tolerance: float = 1e-4,
                                     delta0: float = 1e-2) -> PoleCheckReport:
    """Verify Res_{i kappa} phi_+N = i c^2 psi_+N(., i kappa) after a transform.

    phi_family / psi_family: callables k -> WaveField for the SEED pair, which
    must already satisfy the isolated pole condition at i kappa.  result_like
    provides (states, y_fields, phi_fields) of the transform.  A None bound
    state yields a vacuous pass.
    """
    if bound_state is None:
        return PoleCheckReport(0.0, tolerance, vacuous=True)
    kappa, c2 = bound_state
    states = result_like.states
    ys = result_like.y_fields
    fs = result_like.phi_fields

    def gauge(base: WaveField, k) -> WaveField:
        v = base.values.astype(complex).copy()
        d = base.derivs.astype(complex).copy()
        for s, y, f in zip(states, ys, fs):
            denom = k * k - s.omega**2
            ay, ayd = s.alpha * np.real(y.values), s.alpha * np.real(y.derivs)
            fv, fd = np.real(f.values), np.real(f.derivs)
            w = base.values * fd - base.derivs * fv
            v = v + ay * w / denom
            d = d + (ayd * w / denom + ay * base.values * fv)
        return WaveField(base.grid, k, v, d)

    res = sct.residue_at(1j * kappa, lambda k: gauge(phi_family(k), k), delta0=delta0)
    psi_plus = gauge(psi_family(1j * kappa), 1j * kappa)
    target = 1j * c2 * psi_plus.values
    got = res.residue.values if isinstance(res.residue, WaveField) else np.asarray(res.residue)
    scale = max(np.max(np.abs(target)), 1e-30)
    dev = float(np.max(np.abs(got - target)) / scale)
    return PoleCheckReport(dev, tolerance)
