"""Command-line front end.

Exit codes: 0 success, 1 usage or input error, 2 infeasible, 3 margin or
verification failure, 4 numerical failure. Set ``MIXFDF_LOG_LEVEL`` (e.g.
``INFO``, ``DEBUG``) for diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import scenario as scn
from . import sdp
from .errors import (IllConditioned, Infeasible, IterationLimit, MixFdfError, NotPsd, NumericalBlowup,
                     ScenarioError, Singular)
from .hji import HjiParams, QuadraticStorage, ScanProbe, scan
from .linalg import block_diag
from .model import NonlinearPlant, augment
from .simulate import (SignalSpec, calibrate_threshold, default_disturbance_family, default_fault_family,
                       detect, estimate_hinf_gain, estimate_hminus, residual_evaluation, run_experiments,
                       simulate, stability_probe)
from .synthesis import (AriCheckInput, SynthesisSpec, build_synthesis_lmis, check_ari, check_analysis,
                        recover_filter, synthesize, synthesis_margins)

log = logging.getLogger("mixfdf")

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_MARGIN, EXIT_NUMERIC = 0, 1, 2, 3, 4


# --------------------------------------------------------------------------
# output helpers


def _out_dir(args, sc):
    d = Path(args.out or sc.output or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_json(path, payload):
    doc = {"generated": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")}
    doc.update(payload)
    Path(path).write_text(json.dumps(doc, indent=2, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def _table(title, rows):
    print(title)
    width = max(len(k) for k, _ in rows) if rows else 0
    for k, v in rows:
        print(f"  {k:<{width}}  {v:+.6e}" if isinstance(v, float) else f"  {k:<{width}}  {v}")


# --------------------------------------------------------------------------
# scenario resolution


def _apply_overrides(args, sc):
    kw = {}
    for name in ("dt", "paths", "seed"):
        val = getattr(args, name, None)
        if val is not None:
            kw[name] = val
    if getattr(args, "horizon", None) is not None:
        kw["horizon"] = args.horizon
    if kw:
        try:
            sc.sim = replace(sc.sim, **kw)
        except ValueError as exc:
            raise ScenarioError(f"command-line override: {exc}") from None
    if getattr(args, "window", None) is not None:
        sc.detection["window"] = args.window
    return sc


def _solver_opts(sc):
    try:
        return sdp.SolverOptions(**sc.solver)
    except TypeError as exc:
        raise ScenarioError(f"solver: {exc}") from None


def _filter(sc, args):
    """Scenario filter literal, else a result file via ``--filter``, else synthesize."""
    if getattr(args, "filter", None):
        doc = json.loads(Path(args.filter).read_text())
        f = doc.get("filter", doc)
        from .model import FilterRealization

        return FilterRealization(f["A_hat"], f["B_hat"], f["S_hat"])
    if sc.filter is not None:
        return sc.filter
    if sc.certificate is not None:
        return recover_filter(sc.certificate)
    log.info("no filter supplied; synthesizing")
    return synthesize(SynthesisSpec(sc.plant, sc.gamma, sc.delta), _solver_opts(sc)).filter


def _certificate(sc, args):
    if getattr(args, "certificate", None):
        doc = json.loads(Path(args.certificate).read_text())
        c = doc.get("certificate", doc)
        return {k: (float(c[k]) if k == "beta" else np.asarray(c[k], dtype=float)) for k in scn.CERT_KEYS}
    if sc.certificate is not None:
        return sc.certificate
    raise ScenarioError("verify needs a certificate (scenario 'certificate' section or --certificate)")


def _x0(sc):
    return np.zeros(sc.plant.n) if sc.x0 is None else sc.x0


def _v(sc):
    return sc.v or SignalSpec("exp_decay", sc.plant.n_v, base=0.9)


def _f(sc):
    return sc.f or SignalSpec("zero", sc.plant.n_f)


def _window(sc):
    return float(sc.detection.get("window", 5.0))


def _calibrate(sc, aug):
    fam = sc.disturbance_family or [_v(sc)]
    paths = int(sc.detection.get("calibration_paths", sc.sim.paths))
    cfg = replace(sc.sim, paths=paths)
    return calibrate_threshold(aug, fam, _window(sc), cfg, x0=_x0(sc), batches=int(sc.detection.get("batches", 1)))


# --------------------------------------------------------------------------
# commands


def cmd_synthesize(sc, args):
    res = synthesize(SynthesisSpec(sc.plant, sc.gamma, sc.delta), _solver_opts(sc))
    out = _out_dir(args, sc)
    _write_json(out / "synthesis.json", {"scenario": sc.name, **res.to_dict()})
    _table(f"synthesis gamma={sc.gamma:g} delta={sc.delta:g} (feasible)", list(res.margins.items()))
    print(f"wrote {out / 'synthesis.json'}")
    return EXIT_OK


def cmd_verify(sc, args):
    cert = _certificate(sc, args)
    spec = SynthesisSpec(sc.plant, sc.gamma, sc.delta)
    lmis, space = build_synthesis_lmis(spec)
    t5 = synthesis_margins(lmis, space, cert)
    rows = [(f"lmi.{k}", v) for k, v in t5.items()]
    payload = {"scenario": sc.name, "tolerance": args.tol, "lmi_margins": t5}
    try:
        filt = recover_filter(cert)
        aug = augment(sc.plant, filt)
        P = block_diag(cert["P1"], cert["P2"])
        l3 = check_analysis(aug, P, cert["beta"], sc.plant.alpha, sc.gamma, sc.delta)
        rows += [(f"analysis.{k}", v) for k, v in l3.items()]
        payload["analysis_margins"] = l3
        payload["filter"] = scn.filter_to_dict(filt)
        ari = check_ari(AriCheckInput(aug, P, P, gamma=sc.gamma, delta=sc.delta, **sc.ari)) if sc.ari else None
        if ari is not None:
            rows += [(f"ari.{k}", v) for k, v in ari.margins.items()]
            payload["ari_margins"] = ari.margins
    except (NotPsd, Singular, IllConditioned) as exc:
        payload["recovery_error"] = str(exc)
        rows.append(("recovery", f"failed: {exc}"))
    out = _out_dir(args, sc)
    _write_json(out / "verify.json", payload)
    _table("margins (sense-adjusted; positive = satisfied)", rows)
    checked = {k: v for k, v in t5.items() if k != "S_check_psd"}
    checked.update(payload.get("analysis_margins", {}))
    ok = all(v > -args.tol for v in checked.values()) and t5["S_check_psd"] > -args.tol
    print("verdict:", "all margins satisfied" if ok else "margin violation", f"(tol {args.tol:g})")
    if "recovery_error" in payload:
        return EXIT_NUMERIC
    return EXIT_OK if ok else EXIT_MARGIN


def cmd_hji_scan(sc, args):
    if sc.certificate is not None:
        cert = sc.certificate
        filt = _filter(sc, args)
    else:
        res = synthesize(SynthesisSpec(sc.plant, sc.gamma, sc.delta), _solver_opts(sc))
        cert = res.certificate
        filt = res.filter if sc.filter is None and not args.filter else _filter(sc, args)
    P1 = P2 = block_diag(cert["P1"], cert["P2"])
    h = dict(sc.hji)
    probe = ScanProbe(radius=h.pop("radius", 3.0), ball_samples=h.pop("ball_samples", 2000),
                      axis_points=h.pop("axis_points", 13), seed=h.pop("seed", sc.sim.seed))
    params = HjiParams(gamma=sc.gamma, delta=sc.delta, **h)
    plant = NonlinearPlant.from_linear(sc.plant, filt)
    V1, V2 = QuadraticStorage(P1), QuadraticStorage(P2)
    reports = [scan(plant, (V1, V2), params, probe, side) for side in ("hinf", "hminus_xvf")]
    out = _out_dir(args, sc)
    _write_json(out / "hji_scan.json", {"scenario": sc.name, "reports": [r.to_dict() for r in reports]})
    for r in reports:
        _table(f"HJI scan [{r.side}] over {r.sample_count} points",
               [("worst_lhs", r.worst_lhs), ("worst_inner_margin", r.worst_inner_margin),
                ("fraction_satisfied", r.fraction_satisfied)])
    print("contract: 'no violation found on the probe set', not a proof")
    return EXIT_OK if all(r.no_violation_found for r in reports) else EXIT_MARGIN


def cmd_simulate(sc, args):
    aug = augment(sc.plant, _filter(sc, args))
    ens = simulate(aug, _v(sc), _f(sc), _x0(sc), sc.sim)
    J = residual_evaluation(ens)
    out = _out_dir(args, sc)
    ne, nr = aug.n_eta, aug.n_r
    header = ["path", "t"] + [f"eta{i}" for i in range(ne)] + [f"r{i}" for i in range(nr)]
    rows = ([p, ens.t[k], *ens.eta[p, k], *ens.r[p, k]] for p in range(ens.paths) for k in range(len(ens.t)))
    _write_csv(out / "trajectories.csv", header, rows)
    _write_csv(out / "jr.csv", ["t", "J_r", "se"], zip(J.t, J.J, J.se))
    print(f"simulated {ens.paths} paths to t={sc.sim.horizon:g}; J_r(end)={J.J[-1]:.6g}")
    print(f"wrote {out / 'trajectories.csv'} and {out / 'jr.csv'}")
    return EXIT_OK


def cmd_calibrate(sc, args):
    aug = augment(sc.plant, _filter(sc, args))
    cal = _calibrate(sc, aug)
    out = _out_dir(args, sc)
    _write_json(out / "calibration.json", {"scenario": sc.name, "J_th": cal.J_th, "window": cal.window,
                                           "paths": cal.paths, "batches": cal.batches, "seed": cal.seed,
                                           "family": cal.family, "per_member": cal.per_member})
    print(f"J_th = {cal.J_th:.6g} (window T={cal.window:g}, {cal.paths} paths x {cal.batches} batch(es), "
          f"{len(cal.family)} family member(s))")
    return EXIT_OK


def _detect_report(sc, aug, J_th, out, tag):
    ens = simulate(aug, _v(sc), _f(sc), _x0(sc), replace(sc.sim, store_paths=False))
    J = residual_evaluation(ens)
    rep = detect(J, J_th, _window(sc))
    _write_csv(out / f"{tag}_jr.csv", ["t", "J_r", "se", "J_th"], ((t, j, s, J_th) for t, j, s in zip(J.t, J.J, J.se)))
    return rep


def cmd_detect(sc, args):
    J_th = args.threshold if args.threshold is not None else sc.detection.get("J_th")
    if J_th is None:
        raise ScenarioError("detect needs a threshold (detection.J_th or --threshold)")
    aug = augment(sc.plant, _filter(sc, args))
    out = _out_dir(args, sc)
    rep = _detect_report(sc, aug, float(J_th), out, "detect")
    _write_json(out / "detect.json", {"scenario": sc.name, "fault": _f(sc).to_dict(), **rep.summary()})
    _print_report(rep)
    return EXIT_OK


def _print_report(rep):
    first = "none" if rep.first_alarm_time is None else f"{rep.first_alarm_time:.3f}"
    print(f"J_th={rep.J_th:.6g} window={rep.window:g} alarm={str(rep.alarm).lower()} first_alarm_time={first}")


def cmd_run(sc, args):
    aug = augment(sc.plant, _filter(sc, args))
    out = _out_dir(args, sc)
    if sc.detection.get("J_th") is not None:
        J_th, cal = float(sc.detection["J_th"]), None
    else:
        cal = _calibrate(sc, aug)
        J_th = cal.J_th
    rep = _detect_report(sc, aug, J_th, out, "run")
    payload = {"scenario": sc.name, "fault": _f(sc).to_dict(), "disturbance": _v(sc).to_dict(), **rep.summary()}
    if cal is not None:
        payload["calibration"] = {"paths": cal.paths, "batches": cal.batches, "family": cal.family,
                                  "per_member": cal.per_member}
    reps = int(sc.detection.get("repetitions", 0))
    if reps > 0:
        rs = run_experiments(aug, _v(sc), _f(sc), _x0(sc), replace(sc.sim, store_paths=False),
                             J_th, _window(sc), reps)
        payload["repetitions"] = {"count": reps, "alarm_rate": float(np.mean([r.alarm for r in rs]))}
        print(f"alarm rate over {reps} repetitions: {payload['repetitions']['alarm_rate']:.2f}")
    _write_json(out / "report.json", payload)
    _print_report(rep)
    return EXIT_OK


def cmd_gains(sc, args):
    aug = augment(sc.plant, _filter(sc, args))
    cfg = replace(sc.sim, store_paths=False)
    dfam = sc.disturbance_family or default_disturbance_family(cfg.horizon, cfg.dt, sc.plant.n_v)
    ffam = sc.fault_family or default_fault_family(sc.plant.n_f)
    hinf = estimate_hinf_gain(aug, dfam, cfg)
    hminus = estimate_hminus(aug, ffam, cfg)
    x0 = sc.x0 if sc.x0 is not None and np.any(sc.x0) else np.ones(sc.plant.n)
    stab = stability_probe(aug, x0, replace(cfg, horizon=min(cfg.horizon, 5.0)))
    out = _out_dir(args, sc)
    _write_csv(out / "gains.csv", ["kind", "member", "ratio", "se"],
               [("hinf", i, r, s) for i, (r, s) in enumerate(zip(hinf.ratios, hinf.se))]
               + [("hminus", i, r, s) for i, (r, s) in enumerate(zip(hminus.ratios, hminus.se))])
    _write_json(out / "gains.json", {
        "scenario": sc.name,
        "hinf": {"value": hinf.value, "bound": hinf.bound, "ratios": hinf.ratios, "se": hinf.se},
        "hminus": {"value": hminus.value, "bound": hminus.bound, "ratios": hminus.ratios, "se": hminus.se},
        "stability": {"decay_rate": stab.decay_rate, "prefactor": stab.prefactor,
                      "fit_residual": stab.fit_residual, "stable": stab.stable, "blowup": stab.blowup},
    })
    _table("empirical gains", [("hinf (lower estimate)", hinf.value), ("hminus (upper estimate)", hminus.value),
                               ("ms decay rate", stab.decay_rate)])
    return EXIT_OK


COMMANDS = {
    "synthesize": cmd_synthesize,
    "verify": cmd_verify,
    "hji-scan": cmd_hji_scan,
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "detect": cmd_detect,
    "run": cmd_run,
    "gains": cmd_gains,
}


def build_parser():
    p = argparse.ArgumentParser(prog="mixfdf", description="Mixed H-/H-infinity fault detection filter toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--scenario", required=True, help="scenario JSON file")
        s.add_argument("--out", help="output directory (default: scenario 'output' or cwd)")
        s.add_argument("--seed", type=int)
        s.add_argument("--dt", type=float)
        s.add_argument("--paths", type=int)
        s.add_argument("--horizon", type=float)
        s.add_argument("--window", type=float, help="evaluation window T")
        s.add_argument("--filter", help="JSON file with a 'filter' section (e.g. synthesis.json)")
        if name == "verify":
            s.add_argument("--certificate", help="JSON file with a 'certificate' section")
            s.add_argument("--tol", type=float, default=0.0, help="accept margins above -tol")
        if name == "detect":
            s.add_argument("--threshold", type=float)
    return p


def main(argv=None):
    level = os.environ.get("MIXFDF_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        sc = _apply_overrides(args, scn.load(args.scenario))
        return COMMANDS[args.command](sc, args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericalBlowup as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (IterationLimit, NotPsd, Singular, IllConditioned) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (MixFdfError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
