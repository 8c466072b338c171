"""One handler per command.  Each takes the resolved scenario, the writer
and a worker count and returns ``(exit_code, summary)``; module errors
propagate untouched."""

from __future__ import annotations

import numpy as np

from ..bifurcation import (
    cycle_kind,
    cycle_scan,
    classify_domain,
    fold_curve,
    hopf_curve,
)
from ..core_model import Params, coexistence, find_equilibria, nullclines
from ..errors import BazykinError, ModelError, UnsettledError
from ..ode import IntegratorConfig, detect_cycle, integrate
from ..pde import (
    Grid,
    PdeConfig,
    count_peaks,
    default_dt,
    initial_condition,
    mean_oscillation,
    simulate,
    steady_state_detect,
)
from ..transients import COLUMNS, powerlaw_fit, transient_scan
from ..turing import critical_curve, critical_diffusion, dispersion, instability_band, turing_curve
from .svg import Figure

OK, NOT_SETTLED = 0, 4
CURVE_HEADER = ["kind", "chi", "delta", "omega", "l1"]


def _params(sc) -> Params:
    return Params(**sc["params"])


def _tag(x: float) -> str:
    return f"{x:g}"


def equilibria(sc, out, workers):
    p = _params(sc)
    eqs, diag = find_equilibria(p)
    rows = []
    for e in eqs:
        l1, l2 = e.eigenvalues
        rows.append([e.kind.value, e.point.u, e.point.v, e.stability.value,
                     l1.real, l1.imag, l2.real, l2.imag, e.degenerate])
    out.csv("equilibria.csv", ["kind", "u", "v", "stability", "lambda1_re", "lambda1_im",
                               "lambda2_re", "lambda2_im", "degenerate"], rows)
    return OK, {"count": len(eqs), "cubic_discriminant": diag.Delta}


def _ode_seed(p: Params, ic):
    if isinstance(ic, list):
        return tuple(ic)
    u, v = coexistence(p).point
    return (u * 1.01, v) if ic == "near" else (p.chi, v)


def simulate_ode(sc, out, workers):
    o = sc["options"]
    base = _params(sc)
    cfg = IntegratorConfig(o["rtol"], o["atol"], scheme=o["scheme"])
    runs = [(None, base)]
    if o["vary"]:
        name = o["vary"]["name"]
        runs = [(f"{name}{_tag(x)}", base.replace(**{name: float(x)})) for x in o["vary"]["values"]]
    phase = Figure("Phase plane", "u", "v")
    series = Figure("Prey density", "t", "u")
    cycles, summary = [], {}
    for tag, p in runs:
        t_eval = np.linspace(o["record_from"], o["t_end"], o["n_out"])
        traj = integrate(p, _ode_seed(p, o["ic"]), (0.0, o["t_end"]), cfg, t_eval=t_eval)
        stem = "trajectory" if tag is None else f"trajectory_{tag}"
        out.csv(f"{stem}.csv", ["t", "u", "v"], zip(traj.t, traj.u, traj.v))
        phase.add(tag or "orbit", traj.u, traj.v)
        series.add(tag or "u", traj.t, traj.u)
        if o["cycle"]:
            try:
                c = detect_cycle(p, _ode_seed(p, o["ic"]), cfg, horizon=o["t_end"])
            except UnsettledError as exc:
                cycles.append([tag or "", "", "", "", "", "", False, exc.kind])
                continue
            shape = ""
            if p.eps <= 0.1:  # shapes are defined for the slow-fast regime only
                try:
                    shape = cycle_kind(p, c).value
                except BazykinError:
                    pass
            cycles.append([tag or "", c.period, c.u_min, c.u_max, c.v_min, c.v_max, c.converged, shape])
    u = np.linspace(1e-6, base.chi, 400)
    phase.add("prey nullcline", u, nullclines(base, u)[0], "dashed")
    out.svg("phase.svg", phase)
    out.svg("prey.svg", series)
    if o["cycle"]:
        out.csv("cycles.csv", ["run", "period", "u_min", "u_max", "v_min", "v_max", "converged", "shape"], cycles)
        summary["cycles"] = {r[0] or "orbit": r[-1] for r in cycles}
    summary["runs"] = len(runs)
    return OK, summary


def canard_scan(sc, out, workers):
    o = sc["options"]
    p = _params(sc)
    res = cycle_scan(p, o["free"], o["range"], o["n"], horizon=o["horizon"], refine=o["refine"],
                     tol=o["tol"], workers=workers, jump_ratio=o["jump_ratio"])
    out.csv("scan.csv", [res.free, "amp_near", "amp_far", "eq_stable"],
            zip(res.values, res.amp_near, res.amp_far, res.eq_stable))
    out.csv("transitions.csv", ["kind", "lo", "hi", "location"],
            [[t.kind, t.lo, t.hi, t.location] for t in res.transitions])
    fig = Figure("Cycle amplitude", res.free, "u_max - u_min")
    fig.add("near E*", res.values, res.amp_near, "scatter").add("far seed", res.values, res.amp_far, "scatter")
    out.svg("amplitude.svg", fig)
    return OK, {"transitions": [{"kind": t.kind, "location": t.location} for t in res.transitions]}


def _curve_rows(sample):
    om = sample.omega or [float("nan")] * len(sample.points)
    l1 = sample.l1 or [float("nan")] * len(sample.points)
    return [[sample.kind.value, chi, delta, w, l] for (delta, chi), w, l in zip(sample.points, om, l1)]


def _gh_brackets(sample):
    chis = [c for _, c in sample.points]
    s = np.sign(sample.l1)
    return [[chis[i], chis[i + 1]] for i in range(len(s) - 1) if s[i] * s[i + 1] < 0]


def hopf_curve_cmd(sc, out, workers):
    o = sc["options"]
    base = _params(sc)
    fig = Figure("Hopf curves", "delta", "chi")
    summary = {"gaps": {}, "generalized_hopf": {}}
    for eps in o["eps_values"] or [base.eps]:
        p = base.replace(eps=float(eps))
        s = hopf_curve(p, o["chi_range"], o["n"], tuple(o["delta_bracket"]), with_l1=o["with_l1"])
        out.csv(f"hopf_eps{_tag(eps)}.csv", CURVE_HEADER, _curve_rows(s))
        fig.add(f"Hopf eps={_tag(eps)}", [d for d, _ in s.points], [c for _, c in s.points])
        summary["gaps"][_tag(eps)] = len(s.gaps)
        if o["with_l1"]:
            summary["generalized_hopf"][_tag(eps)] = _gh_brackets(s)
    if o["include_fold"]:
        f = fold_curve(base, o["chi_range"], o["n"])
        out.csv("fold_curve.csv", CURVE_HEADER, _curve_rows(f))
        fig.add("canard point", [d for d, _ in f.points], [c for _, c in f.points], "dashed")
    out.svg("hopf_curves.svg", fig)
    return OK, summary


def fold_curve_cmd(sc, out, workers):
    o = sc["options"]
    f = fold_curve(_params(sc), o["chi_range"], o["n"])
    out.csv("fold_curve.csv", CURVE_HEADER, _curve_rows(f))
    out.svg("fold_curve.svg", Figure("Canard point curve", "delta", "chi").add(
        "", [d for d, _ in f.points], [c for _, c in f.points]))
    return OK, {"gaps": [[c, k] for c, k in f.gaps]}


def domain(sc, out, workers):
    o = sc["options"]
    base = _params(sc)
    pts = o["points"] or [[base.chi, base.delta]]
    rows, code = [], OK
    for chi, delta in pts:
        p = base.replace(chi=float(chi), delta=float(delta))
        try:
            lab = classify_domain(p, horizon=o["horizon"])
            rows.append([chi, delta, lab.id, lab.reason, lab.distances["fold"], lab.distances["hopf"]])
        except UnsettledError as exc:
            code = NOT_SETTLED
            rows.append([chi, delta, exc.kind, str(exc), exc.info.get("fold"), exc.info.get("hopf")])
    out.csv("domains.csv", ["chi", "delta", "domain", "reason", "dist_fold", "dist_hopf"], rows)
    return code, {"domains": [r[2] for r in rows]}


def dispersion_cmd(sc, out, workers):
    o = sc["options"]
    p = _params(sc)
    k2 = np.linspace(0.0, o["k2_max"], o["n_k"])
    h, lam = dispersion(p, o["d"], k2)
    out.csv("dispersion.csv", ["k2", "h", "re_lambda"], zip(k2, h, lam))
    out.svg("dispersion.svg", Figure("Growth rate", "k^2", "Re lambda").add("", k2, lam))
    summary = {}
    try:
        a = instability_band(p, o["d"], o["L"])
    except ModelError as exc:
        summary["band"] = None
        summary["reason"] = exc.kind
        return OK, summary
    out.csv("assessment.csv", ["d", "L", "d_cr", "r_minus", "r_plus", "kc2", "kmax2", "predicted_peaks", "modes"],
            [[a.d, a.L, a.d_cr, a.r_minus, a.r_plus, a.kc2, a.kmax2, a.predicted_peaks,
              ";".join(map(str, a.unstable_modes))]])
    summary.update(band=[a.r_minus, a.r_plus], d_cr=a.d_cr, modes=a.unstable_modes, predicted_peaks=a.predicted_peaks)
    return OK, summary


def _hopf_delta(p: Params):
    s = hopf_curve(p, (p.chi, p.chi), 2, with_l1=False)
    return s.points[0][0] if s.points else None


def turing_curve_cmd(sc, out, workers):
    o = sc["options"]
    base = _params(sc)
    deltas = np.linspace(o["delta_range"][0], o["delta_range"][1], o["n"])
    modes = list(range(o["modes"][0], o["modes"][1] + 1))
    eps_list = o["eps_values"] or [base.eps]
    fig = Figure("Turing curves", "delta", "d", ylim=(0.0, o["d_max"]) if o["d_max"] else None)
    rows, hopf = [], {}
    for eps in eps_list:
        p = base.replace(eps=float(eps))
        tc = turing_curve(p, deltas, modes, o["L"])
        cc = critical_curve(p, deltas)
        for i, dl in enumerate(deltas):
            vals = [tc[n][i] if tc[n][i] > 0 else float("nan") for n in modes]
            rows.append([eps, dl, cc[i]] + vals)
        suffix = f" eps={_tag(eps)}" if len(eps_list) > 1 else ""
        if len(eps_list) == 1:
            for n in modes:
                fig.add(f"n={n}", deltas, np.where(tc[n] > 0, tc[n], np.nan))
        fig.add("d_cr" + suffix, deltas, cc, "dashed")
        dh = _hopf_delta(p)
        hopf[_tag(eps)] = dh
        if dh is not None:
            finite = cc[np.isfinite(cc)]
            top = o["d_max"] or (float(np.nanmax(finite)) if finite.size else 1.0)
            fig.add("Hopf" + suffix, [dh, dh], [0.0, top], "dashed")
    out.csv("turing_curve.csv", ["eps", "delta", "d_cr"] + [f"n{n}" for n in modes], rows)
    out.svg("turing_curve.svg", fig)
    return OK, {"hopf_delta": hopf}


def _stride(every: float, dt: float) -> int:
    return max(1, int(round(every / dt)))


def simulate_pde(sc, out, workers):
    o = sc["options"]
    p = _params(sc)
    dt = o["dt"] or default_dt(p)
    grid = Grid.from_spacing(o["L"], o["dx"])
    cfg = PdeConfig(d=o["d"], dt=dt, t_end=o["t_end"], snapshot_stride=_stride(o["snapshot_every"], dt),
                    scheme=o["scheme"], diag_stride=_stride(o["diag_every"], dt))
    ic = initial_condition(o["ic"]["kind"], p, grid, o["ic"].get("magnitude"), seed=sc["seed"])
    res = simulate(p, cfg, ic)
    a = res.diagnostics.arrays()
    out.csv("summary.csv", ("t",) + COLUMNS, zip(a["t"], *(a[k] for k in COLUMNS)))
    for t, f in zip(res.times, res.snapshots):
        out.csv(f"snapshots/snap_t{t:.4f}.csv", ["x", "u", "v"], zip(grid.x, f.u, f.v))
    kind = steady_state_detect(res, o["classify_tol"], o["classify_window"])
    ptp, growth = mean_oscillation(res)
    summary = {
        "solution_type": kind.value,
        "peaks": count_peaks(res.final.u),
        "peaks_half_ends": count_peaks(res.final.u, boundary_weight=0.5),
        "mean_u_ptp": ptp,
        "mean_u_growth": growth if np.isfinite(growth) else None,
    }
    try:
        band = instability_band(p, o["d"], o["L"])
        summary["predicted_peaks"] = band.predicted_peaks
    except ModelError:
        summary["predicted_peaks"] = None
    out.json("classification.json", summary)
    out.svg("mean_u.svg", Figure("Spatial average of prey", "t", "<u>").add("", a["t"], a["mean_u"]))
    out.svg("profile.svg", Figure(f"Prey at t = {res.times[-1]:g}", "x", "u").add("u", grid.x, res.final.u)
            .add("v", grid.x, res.final.v, "dashed"))
    out.svg("heterogeneity.svg", Figure("Trajectory", "<u>", "u_grad").add("", a["mean_u"], a["grad_u"]))
    return OK, summary


def transient_scan_cmd(sc, out, workers):
    o = sc["options"]
    p = _params(sc)
    ds = o["d_values"] or list(np.linspace(o["d_range"][0], o["d_range"][1], o["n"]))
    pts = transient_scan(p, ds, L=o["L"], dx=o["dx"], dt=o["dt"], t_end=o["t_end"],
                         diag_every=o["diag_every"], tol=o["tol"], window=o["window"], workers=workers)
    out.csv("scan.csv", ["d", "distance", "duration", "settled_flag"],
            [[s.d, s.distance, s.duration, s.settled] for s in pts])
    d = np.array([s.d for s in pts])
    T = np.array([s.duration for s in pts])
    out.svg("duration.svg", Figure("Transient duration", "d", "T").add("", d, T, "scatter"))
    summary = {"d_cr": critical_diffusion(p), "unsettled": [s.d for s in pts if not s.settled]}
    good = [(s.distance, s.duration) for s in pts if s.settled and s.duration > 0 and s.distance > 0]
    if o["fit"] and len(good) >= 3:
        fit = powerlaw_fit(good)
        out.json("fit.json", {"exponent": fit.exponent, "coefficient": fit.coefficient, "r2": fit.r2,
                              "points": len(good)})
        s = np.array([g[0] for g in good])
        ss = np.geomspace(s.min(), s.max(), 50)
        out.svg("powerlaw.svg", Figure("Duration against distance to d_cr", "|d - d_cr|", "T", logx=True, logy=True)
                .add("scan", s, [g[1] for g in good], "scatter").add("fit", ss, fit(ss)))
        summary["fit"] = {"exponent": fit.exponent, "r2": fit.r2}
    else:
        summary["fit"] = None
    return (NOT_SETTLED if summary["unsettled"] else OK), summary


HANDLERS = {
    "equilibria": equilibria,
    "simulate-ode": simulate_ode,
    "canard-scan": canard_scan,
    "hopf-curve": hopf_curve_cmd,
    "fold-curve": fold_curve_cmd,
    "domain": domain,
    "dispersion": dispersion_cmd,
    "turing-curve": turing_curve_cmd,
    "simulate-pde": simulate_pde,
    "transient-scan": transient_scan_cmd,
}
