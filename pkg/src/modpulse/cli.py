"""Command line entry point: modpulse <subcommand> --config PATH [--out DIR] [--seed INT] [--force]."""
import argparse
import sys

import numpy as np

from . import bloch, conditions, envelope, homoclinic, normal_form, spectrum, wave_sim
from .io import ConfigError, OutputDir, RunConfig, load_config

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2

NUMERIC_ERRORS = (bloch.BlochError, envelope.FocusingError, spectrum.SpectrumError,
                  normal_form.ResonanceError, homoclinic.NewtonError, wave_sim.BlowUpError,
                  wave_sim.ConeError, np.linalg.LinAlgError, ArithmeticError)


class CheckFailed(RuntimeError):
    pass


class Context:
    """Lazily computed shared objects for one configuration."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.rho = bloch.PeriodicCoefficient(tuple(cfg.rho), label="rho")
        self.r = bloch.PeriodicCoefficient(tuple(cfg.r), label="r")
        self._cache = {}

    def get(self, key, make):
        if key not in self._cache:
            self._cache[key] = make()
        return self._cache[key]

    @property
    def point(self):
        c = self.cfg
        return self.get("point", lambda: bloch.bloch_point(self.rho, c.l0, c.n0, c.K))

    @property
    def params(self):
        c = self.cfg
        return self.get("params", lambda: envelope.envelope_params(self.point, self.r, c.gamma,
                                                                   c.epsilon))

    def op(self, m):
        c, p = self.cfg, self.point
        return self.get(("op", m), lambda: spectrum.assemble_Am(self.rho, m, p.omega, p.cg, c.l0, c.K))

    @property
    def jordan(self):
        return self.get("jordan", lambda: spectrum.jordan_chain_m1(self.op(1), self.point))

    @property
    def field(self):
        c = self.cfg
        return self.get("field", lambda: homoclinic.reduced_field(
            self.jordan, self.point, self.r, c.gamma, self.params.omega_tilde))


# ----------------------------------------------------------------------------
# stages
# ----------------------------------------------------------------------------

def cmd_bands(ctx, out):
    c = ctx.cfg
    if c.l_points == 1:
        ls = np.array([c.l0])
    else:
        ls = -0.5 + np.arange(1, c.l_points + 1) / c.l_points
    rows = bloch.band_table(ctx.rho, ls, nbands=c.n_bands, K=c.K)
    out.csv("bands.csv", ["l", "n", "omega", "cg", "omega_pp"], rows)
    rep = {"l0": c.l0, "n0": c.n0, "l_points": len(ls), "n_bands": c.n_bands, "K": c.K}
    try:
        pt = ctx.point
    except bloch.DegenerateBandError as exc:
        # carrier undefined; the check stage reports the failed condition
        out.json("bands.json", {**rep, "carrier_error": str(exc)})
        return {"omega0": None}
    out.json("bands.json", {**rep, "omega0": pt.omega, "cg": pt.cg, "omega_pp": pt.omega_pp,
                            "gap": pt.gap})
    return {"omega0": pt.omega}


def cmd_check(ctx, out):
    c = ctx.cfg
    rep = conditions.check_conditions(ctx.rho, c.n0, c.l0, c.N, c.K)
    out.json("conditions.json", rep.to_dict())
    out.csv("conditions.csv", ["kind", "m", "index", "margin"], rep.table_rows())
    return {"pass": rep.passed, "failures": rep.failures}


def cmd_envelope(ctx, out):
    p = ctx.params
    X = np.linspace(-30, 30, 4096)
    A = envelope.soliton(p, X)
    res = envelope.stationary_nls_residual(p, A, X)
    out.json("envelope.json", {**p.to_dict(), "soliton_residual": res})
    out.csv("soliton.csv", ["X", "A"], zip(X, A))
    return {"soliton_residual": res}


def cmd_spectrum(ctx, out):
    c = ctx.cfg
    rows, summary = [], {}
    ops = []
    for m in range(1, 2 * c.N + 2, 2):
        op = ctx.op(m)
        ops.append(op)
        sp = spectrum.spectrum(op)
        rows += sp.rows(m)
        summary[str(m)] = {"count": int(len(sp.values)), "dropped": int(sp.dropped),
                           "max_pair_residual": float(np.max(sp.pair_residual)),
                           "reversibility_defect": spectrum.reversibility_defect(sp.expanded()),
                           "zero_multiplicity": int(sum(mu for v, mu in zip(sp.values, sp.multiplicity)
                                                        if abs(v) < 1e-6))}
    health = spectrum.resolvent_health([o for o in ops if o.m >= 3], ctx.jordan)
    out.csv("spectrum.csv", ["m", "re", "im", "class", "multiplicity"], rows)
    out.json("spectrum.json", {"per_m": summary, "resolvent": health})
    return {"flagged": health["flagged"]}


def cmd_jordan(ctx, out):
    jd = ctx.jordan
    k = jd.op.k
    n = jd.op.n
    rows = []
    for name in ("F0", "F1", "G0", "G1"):
        v = getattr(jd, name)
        for comp in (0, 1):
            for kk, z in zip(k, v[comp * n:(comp + 1) * n]):
                rows.append((name, comp + 1, int(kk), z.real, z.imag))
    out.csv("jordan_vectors.csv", ["vector", "component", "k", "re", "im"], rows)
    d = jd.to_dict()
    out.json("jordan.json", d)
    return {"duality_defect": d["duality_defect"]}


def cmd_normalform(ctx, out):
    c = ctx.cfg
    p, jd = ctx.point, ctx.jordan
    rep, rows = {}, []
    st1 = normal_form.m1_first_step(jd, p, ctx.r, c.gamma, ctx.params.omega_tilde)
    v1 = normal_form.verify_elimination(st1, ctx.field, ctx.op(1), p, ctx.r, c.gamma,
                                        ctx.params.omega_tilde, jd=jd, seed=c.seed)
    rep["m1"] = {**st1.report(), "elimination": v1}
    rows += [(1,) + r for r in st1.rows()]
    if c.N >= 1:
        op3 = ctx.op(3)
        st3 = normal_form.m3_first_step(op3, p, ctx.r, c.gamma)
        gen = normal_form.general_step(op3, normal_form.cubic_m3_source(op3, p, ctx.r, c.gamma))
        ident = max(float(np.max(np.abs(st3.solutions[k] - gen.solutions[k]))) for k in st3.solutions)
        v3 = normal_form.verify_elimination(st3, ctx.field, op3, p, ctx.r, c.gamma,
                                            ctx.params.omega_tilde, seed=c.seed)
        rep["m3"] = {**st3.report(), "general_step_gap": ident, "elimination": v3}
        rows += [(3,) + r for r in st3.rows()]
    out.json("normalform.json", rep)
    out.csv("normalform.csv", ["m", "vector", "k", "re", "im"], rows)
    return {"slopes": {k: v["elimination"]["slope"] for k, v in rep.items()}}


def cmd_homoclinic(ctx, out):
    orb = homoclinic.refine_homoclinic(ctx.field, ctx.params)
    out.csv("homoclinic.csv", ["xi", "q0_re", "q0_im", "q1_re", "q1_im"], orb.rows())
    out.json("homoclinic.json", orb.report())
    ctx._cache["orbit"] = orb
    return {"iterations": orb.newton["iterations"]}


def simulation_setup(cfg: RunConfig, params):
    """Grid, time step and horizon used by `simulate`."""
    T = min(cfg.T, cfg.epsilon ** -2)
    if cfg.domain_cells is None:
        width = 1.0 / (cfg.epsilon * params.gamma2)
        Q = int(np.ceil((40 * width + abs(params.cg) * T) / (2 * np.pi)))
    else:
        Q = cfg.domain_cells
    x = wave_sim.periodic_grid(Q, cfg.x_points)
    dx = x[1] - x[0]
    return x, cfg.dt_factor * dx, T


def cmd_simulate(ctx, out):
    c = ctx.cfg
    p, pt = ctx.params, ctx.point
    x, dt, T = simulation_setup(c, p)
    L = (x[1] - x[0]) * len(x)
    xc = 0.3 * L
    prof = envelope.SolitonProfiles(p)
    u0, u1 = envelope.build_initial_data(p, pt, prof.psi, prof.phi, x, center=xc)
    t0 = min(T, 0.5 * L - 2 * (x[1] - x[0]))
    cone = wave_sim.Cone(xc, t0)
    cfg = wave_sim.SimConfig(T=T, dt=dt, stride=c.stride, gamma=c.gamma, snapshot_stride=10)
    d = wave_sim.simulate(u0, u1, x, ctx.rho, ctx.r, cfg, p, pt, x_c=xc, cone=cone)
    out.csv("diagnostics.csv", ["t", "centroid", "tail_amp", "approx_err", "cone_energy"], d.rows())
    snap_rows = [(t, xi, ui) for t, u in d.snapshots for xi, ui in zip(x, u)]
    out.csv("snapshots.csv", ["t", "x", "u"], snap_rows)
    out.json("simulate.json", {**d.report(), "cg": p.cg, "x_center": xc, "cone_t0": t0,
                               "domain_cells": int(round(L / (2 * np.pi)))})
    return {"speed_fit": d.speed_fit}


STAGES = {
    "bands": cmd_bands, "check": cmd_check, "envelope": cmd_envelope, "spectrum": cmd_spectrum,
    "jordan": cmd_jordan, "normalform": cmd_normalform, "homoclinic": cmd_homoclinic,
    "simulate": cmd_simulate,
}
PIPELINE = ["bands", "check", "envelope", "jordan", "normalform", "homoclinic", "simulate"]


def cmd_pipeline(ctx, out, force=False):
    summary = {}
    manifest_extra = {"config": ctx.cfg.to_dict(), "stages": summary, "forced": False}
    for name in PIPELINE:
        try:
            summary[name] = STAGES[name](ctx, out)
        except NUMERIC_ERRORS as exc:
            manifest_extra["failed_stage"] = name
            manifest_extra["error"] = f"{type(exc).__name__}: {exc}"
            out.manifest(manifest_extra)
            raise
        if name == "check" and not summary[name]["pass"]:
            if not force:
                manifest_extra["failed_stage"] = "check"
                out.manifest(manifest_extra)
                raise CheckFailed(f"conditions failed: {summary[name]['failures']}")
            manifest_extra["forced"] = True
            manifest_extra["forced_failures"] = summary[name]["failures"]
    manifest_extra["status"] = "complete"
    return out.manifest(manifest_extra)


def build_parser():
    ap = argparse.ArgumentParser(prog="modpulse", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in list(STAGES) + ["pipeline"]:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", help="output directory (overrides outputs.directory)")
        sp.add_argument("--seed", type=int, help="seed for random test vectors")
        sp.add_argument("--force", action="store_true", help="continue past failed conditions")
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        ctx = Context(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = OutputDir(args.out or cfg.directory, cfg.formats)
    try:
        if args.command == "pipeline":
            cmd_pipeline(ctx, out, force=args.force)
            return EXIT_OK
        res = STAGES[args.command](ctx, out)
    except CheckFailed as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NUMERIC
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "check" and not res["pass"]:
        print(f"conditions failed: {res['failures']}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
