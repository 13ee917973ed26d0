"""Command-line front end: scattering scans, insertion/removal, KdV evolution,
and the closed-form verification battery for the explicit example.

All runs are driven by a JSON config (single source of truth); outputs are a
CSV file plus a .meta.json sidecar holding the fully resolved configuration,
package versions and convergence diagnostics, so every output is reproducible
from its sidecar alone.  Exit codes: 0 success, 1 verification failures,
2 invalid configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, darboux, kdv, scattering, wvn_example as wvn
from .errors import PositonkitError, ValidationError
from .schrodinger import Grid, PotentialSpec

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_CONFIG = 2
EXIT_NUMERICAL = 3

FMT = "%.17g"


def _worker_count() -> int:
    raw = os.environ.get("DARBOUX_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _write_csv(path, header, columns):
    data = np.column_stack(columns)
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt=FMT)


def _write_meta(prefix, config, diagnostics):
    meta = {
        "config": config,
        "versions": {"positonkit": __version__, "numpy": np.__version__},
        "diagnostics": diagnostics,
    }
    with open(f"{prefix}.meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)


def _grid_from(cfg) -> Grid:
    g = cfg.get("grid", {})
    try:
        return Grid(float(g["x_min"]), float(g["x_max"]), int(g["n"]))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"invalid grid config: {exc}")


def _potential_from(cfg) -> PotentialSpec:
    pot = cfg.get("potential")
    if pot is None:
        raise ValidationError("config requires a 'potential' object")
    return PotentialSpec.from_json(pot)


def _states_from(cfg, spec) -> list:
    out = []
    for s in cfg.get("states", []):
        omega = float(s["omega"])
        alpha = float(s["alpha"])
        if "r_at_omega" in s:
            r = complex(*s["r_at_omega"])
            out.append(darboux.EmbeddedStateSpec(omega, alpha, r))
        elif spec.kind == "wvn_example":
            out.append(darboux.EmbeddedStateSpec.for_wvn_example(spec.rho, alpha, omega))
        else:
            raise ValidationError("state requires r_at_omega for this potential kind")
    return out


def cmd_scatter(cfg, prefix):
    spec = _potential_from(cfg)
    kg = cfg.get("k_grid", {})
    k_min, k_max = float(kg["k_min"]), float(kg["k_max"])
    n = int(kg["n"])
    if n < 2 or not (k_min < k_max):
        raise ValidationError("k_grid requires k_min < k_max and n >= 2")
    exclusions = [(float(c), float(r)) for c, r in kg.get("exclusions", [])]
    ks = [k for k in np.linspace(k_min, k_max, n)
          if abs(k) > 1e-3 and all(abs(k - c) > r for c, r in exclusions)]

    def one(k):
        r = scattering.reflection_from_wronskians(spec, k)
        t = scattering.transmission(spec, k)
        return r, t

    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, ks))
    else:
        results = [one(k) for k in ks]
    rs = np.array([r for r, _ in results])
    ts = np.array([t for _, t in results])
    _write_csv(f"{prefix}.csv", "k,R_re,R_im,T_re,T_im",
               [np.array(ks), rs.real, rs.imag, ts.real, ts.imag])
    unit = float(np.max(np.abs(np.abs(rs) ** 2 + np.abs(ts) ** 2 - 1.0))) if len(ks) else 0.0
    _write_meta(prefix, cfg, {"n_k": len(ks), "max_unitarity_defect": unit,
                              "workers": workers})
    return EXIT_OK


def cmd_insert(cfg, prefix):
    spec = _potential_from(cfg)
    grid = _grid_from(cfg)
    states = _states_from(cfg, spec)
    tol = cfg.get("tolerances", {})
    res = darboux.insert_embedded(spec, states, grid,
                                  rtol=tol.get("ode_rtol"), atol=tol.get("ode_atol"))
    res.to_csv(f"{prefix}.csv")
    diag = res.meta()
    if states:
        diag["eigenfunction_norms"] = res.eigenfunction_norms().tolist()
    _write_meta(prefix, cfg, diag)
    return EXIT_OK


def cmd_remove(cfg, prefix):
    """Insert the configured states, then remove them again (round trip)."""
    spec = _potential_from(cfg)
    grid = _grid_from(cfg)
    states = _states_from(cfg, spec)
    res = darboux.insert_embedded(spec, states, grid)
    rem = darboux.remove_embedded(res.q_new, res.y_fields, grid,
                                  omegas=[s.omega for s in states])
    _write_csv(f"{prefix}.csv", "x,q_seed,q_plus,q_removed",
               [grid.x, res.q_seed, res.q_new, rem.q_minus])
    _write_meta(prefix, cfg, {
        "round_trip_max_error": float(np.max(np.abs(rem.q_minus - res.q_seed))),
        "orthonormality": rem.orthonormality.tolist(),
    })
    return EXIT_OK


def cmd_evolve(cfg, prefix):
    spec = _potential_from(cfg)
    if spec.kind != "wvn_example":
        raise ValidationError("evolve supports the explicit example family")
    grid = _grid_from(cfg)
    states = _states_from(cfg, spec)
    if len(states) > 1:
        raise ValidationError("evolve handles at most one embedded state")
    t_values = [float(t) for t in cfg.get("time", {}).get("t_values", [0.0])]
    params = wvn.ExampleParams(spec.rho, states[0].alpha if states else 1.0)
    cols_x, cols_t, cols_q, cols_qp = [], [], [], []
    diags = {}
    for t in t_values:
        state = kdv.EvolvedState(t, params)
        plane = None
        if states:
            n = int(math.ceil((grid.x_max + 45.0) / grid.spacing)) + 1
            pg = Grid(grid.x_max - (n - 1) * grid.spacing, grid.x_max, n)
            plane = kdv.evolved_phi_plane(state, pg)
        for x in grid.x:
            q = kdv.dyson_q(state, float(x))
            if states:
                qp = float(kdv.q_plus_evolved(state, states[0].alpha,
                                              pg.x[pg.index_of(float(x))], plane=plane))
            else:
                qp = q
            cols_x.append(x)
            cols_t.append(t)
            cols_q.append(q)
            cols_qp.append(qp)
        diags[f"t={t}"] = {
            "contour_points": state.disc.m,
            "contour_truncation": state.disc.s_trunc,
            "contour_height": state.disc.b,
            "operator_points": state.disc.m_op,
        }
    _write_csv(f"{prefix}.csv", "x,t,q,q_plus",
               [np.array(cols_x), np.array(cols_t), np.array(cols_q), np.array(cols_qp)])
    _write_meta(prefix, cfg, diags)
    return EXIT_OK


def _verify_checks(rho, alpha):
    """Closed-form/numeric cross-checks of the explicit example; yields rows."""
    spec = PotentialSpec.wvn_example(rho)
    par = wvn.ExampleParams(rho, alpha)

    def row(name, value, tol):
        return (name, value, tol, value <= tol)

    # tau and potential basics
    xs = np.linspace(-30, 30, 2001)
    yield row("tau-lower-bound", float(np.max(1.0 - wvn.tau(rho, xs))), 0.0)
    yield row("tau-evenness", float(np.max(np.abs(wvn.tau(rho, xs) - wvn.tau(rho, -xs)))), 1e-14)
    yield row("seed-vanishes-right", abs(float(wvn.q_seed(rho, 3.7))), 0.0)

    # closed-form scattering algebra
    ks = np.linspace(0.2, 3.0, 200)
    tvals, rvals = [], []
    for k in ks:
        t, r, _ = wvn.scattering_closed(rho, k)
        tvals.append(t)
        rvals.append(r)
    unit = float(np.max(np.abs(np.abs(np.array(rvals))**2 + np.abs(np.array(tvals))**2 - 1)))
    yield row("reflection-unitarity-closed", unit, 1e-12)
    _, r1, _ = wvn.scattering_closed(rho, 1.0)
    yield row("full-reflection-at-resonance", abs(r1 + 1.0), 1e-12)

    # numeric scattering against closed forms
    errs = []
    for k in (0.5, 1.7, 2.6):
        r_num = scattering.reflection_from_wronskians(spec, k)
        t_num = scattering.transmission(spec, k)
        t_cl, r_cl, _ = wvn.scattering_closed(rho, k)
        errs.append(max(abs(r_num - r_cl), abs(t_num - t_cl)))
    yield row("numeric-scattering-match", float(max(errs)), 1e-6)
    r_res = scattering.reflection_at_resonance(spec, 1.0)
    yield row("numeric-full-reflection", abs(abs(r_res) - 1.0), 1e-6)

    # Jost solution against direct integration
    from .schrodinger import right_jost
    g = Grid(-12.0, 2.0, 1401)
    for k in (1.5, 1.0):
        psi = right_jost(spec, k, g)
        vc, _ = wvn.right_jost_closed(rho, g.x, k)
        yield row(f"jost-integration-match-k={k}", float(np.max(np.abs(psi.values - vc))), 1e-6)

    # insertion against the closed form
    grid = Grid(-20.0, 20.0, 2001)
    st = darboux.EmbeddedStateSpec.for_wvn_example(rho, alpha)
    res = darboux.insert_embedded(spec, [st], grid, check_preconditions=False)
    qc = wvn.q_plus1(rho, alpha, grid.x)
    yield row("insertion-closed-form-match", float(np.max(np.abs(res.q_new - qc))), 1e-6)
    yield row("eigenfunction-norm-one", abs(res.eigenfunction_norms()[0] - 1.0), 1e-6)

    # norming constant from the residue of the transformed Jost solution
    def fam(k):
        _, psi_n = darboux.transformed_solutions(res, k)
        return psi_n
    rr = scattering.residue_at(1.0, fam, delta0=1e-2)
    rv = np.real(rr.residue.values)
    rd = np.real(rr.residue.derivs)
    h = grid.spacing
    mid = darboux.cumulative_corrected_trapezoid(rv * rv, 2 * rv * rd, h)[-1]
    from .tails import fit_oscillatory_tail
    xw = grid.x
    fl = fit_oscillatory_tail(xw[xw <= xw[0] + 20], rv[xw <= xw[0] + 20], 1.0, "left")
    fr = fit_oscillatory_tail(xw[xw >= xw[-1] - 20], rv[xw >= xw[-1] - 20], 1.0, "right")
    norm = math.sqrt(mid + fl.self_integral() + fr.self_integral())
    yield row("residue-norming-constant", abs(norm - abs(alpha)), 1e-4)

    # transformed pair Wronskian: W(psi_+1, phi_+1) = -2ik
    phi_n, psi_n = darboux.transformed_solutions(res, 1.7)
    wr = psi_n.wronskian_with(phi_n, 3.1)
    yield row("transformed-wronskian", abs(wr + 2j * 1.7), 1e-6)

    # removal round trip
    rem = darboux.remove_embedded(res.q_new, res.y_fields, grid, omegas=[1.0])
    yield row("removal-round-trip", float(np.max(np.abs(rem.q_minus - res.q_seed))), 1e-6)

    # positon/soliton satisfy the PDE
    hx, ht = 1e-2, 1e-3
    xs2 = np.arange(-8.0, 8.0 + hx / 2, hx)
    u_sol = np.array([wvn.soliton_closed(xs2, tt) for tt in (np.arange(5) - 2) * ht])
    yield row("soliton-pde-residual", kdv.kdv_residual(u_sol, hx, ht), 1e-4)
    tts = 0.002 + (np.arange(5) - 2) * ht
    u_pos = np.array([wvn.positon_closed(xs2, tt) for tt in tts])
    mask = np.abs(xs2[None, :] - np.array([wvn.positon_singularity(tt) for tt in tts])[:, None]) > 1.0
    yield row("positon-pde-residual", kdv.kdv_residual(u_pos, hx, ht, mask=mask), 1e-4)



def cmd_verify_example(cfg, prefix):
    rho = float(cfg.get("rho", 2.0))
    alpha = float(cfg.get("alpha", 1.0))
    rows = list(_verify_checks(rho, alpha))
    width = max(len(r[0]) for r in rows) + 2
    n_fail = 0
    for name, value, tol, ok in rows:
        status = "PASS" if ok else "FAIL"
        if not ok:
            n_fail += 1
        print(f"{status}  {name:<{width}} value={value:.3e}  tol={tol:.1e}")
    print(f"{len(rows) - n_fail}/{len(rows)} checks passed (rho={rho}, alpha={alpha})")
    if prefix:
        _write_meta(prefix, cfg, {
            "checks": [{"name": n, "value": v, "tol": t, "passed": bool(ok)}
                       for n, v, t, ok in rows]})
    return EXIT_OK if n_fail == 0 else EXIT_CHECK_FAILED


COMMANDS = {
    "scatter": cmd_scatter,
    "insert": cmd_insert,
    "remove": cmd_remove,
    "evolve": cmd_evolve,
    "verify-example": cmd_verify_example,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="positonkit",
        description="Embedded eigenvalues, Darboux transformations, and bounded positons.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--output", default="positonkit_run", help="output path prefix")
    parser.add_argument("--rho", type=float, help="verify-example: tau slope")
    parser.add_argument("--alpha", type=float, help="verify-example: norming constant")
    args = parser.parse_args(argv)

    cfg = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(json.dumps({"error": {"kind": "config", "message": str(exc)}}))
            return EXIT_BAD_CONFIG
    if args.rho is not None:
        cfg["rho"] = args.rho
    if args.alpha is not None:
        cfg["alpha"] = args.alpha

    try:
        return COMMANDS[args.command](cfg, args.output)
    except (ValidationError, KeyError, ValueError) as exc:
        print(json.dumps({"error": {"kind": "validation", "message": str(exc)}}))
        return EXIT_BAD_CONFIG
    except PositonkitError as exc:
        print(json.dumps({"error": {"kind": "numerical", "message": str(exc)}}))
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
