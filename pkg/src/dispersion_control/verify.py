"""Invariant checks run by ``dispersion-control verify`` and the acceptance suite.

Each check yields a :class:`Check` with the measured value and the threshold
it was held to, so reports show how much margin a run has.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import ScalingMismatch, eigenvalue_flow, scaling_certificate
from .dispersion import covariance, eig_sym2
from .estimators import recovered_covariances, run_static
from .graph import is_connected, spectral_summary
from .sim import DEAD, Scenario, TrajectoryLog, fit_decay_rate, metrics, prepare, run

__all__ = [
    "Check",
    "centralized_checks",
    "eigenvalue_oracle_error",
    "estimator_checks",
    "distributed_checks",
    "verify_scenario",
    "format_report",
]


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    measured: float | str
    threshold: str
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        m = f"{self.measured:.3e}" if isinstance(self.measured, float) else str(self.measured)
        extra = f"  ({self.detail})" if self.detail else ""
        return f"[{status}] {self.name}: measured {m}, required {self.threshold}{extra}"


def format_report(checks) -> str:
    return "\n".join(c.line() for c in checks)


def eigenvalue_oracle_error(log: TrajectoryLog, n_samples: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Absolute deviation of logged eigenvalues from the closed-form flow.

    Returns ``(max_abs_err_per_component, sample_times)``.
    """
    lam0 = log.true_lam[0]
    tgt = log.target.as_array()
    idx = np.unique(np.linspace(0, len(log) - 1, n_samples).round().astype(int))
    errs = np.zeros(2)
    for k in idx:
        t = float(log.t[k])
        oracle = np.sort([eigenvalue_flow(max(lam0[j], 0.0), tgt[j], t) for j in range(2)])[::-1]
        errs = np.maximum(errs, np.abs(log.true_lam[k] - oracle))
    return errs, log.t[idx]


def centralized_checks(log: TrajectoryLog, oracle: bool = True) -> list[Check]:
    """Centroid, eigenvector, collision and scaling invariants of a centralized run."""
    out = []
    t = log.t
    drift = np.linalg.norm(log.centroid - log.centroid[0], axis=1)
    ratio = float(np.max(drift / (1.0 + t)))
    out.append(Check("centroid invariance", ratio <= 1e-8, ratio, "<= 1e-8 (1 + t)"))

    m = metrics(log)
    ang = m.get("max_eigvec_angle_drift", float("nan"))
    out.append(Check("eigenvector invariance", bool(ang <= 1e-6), float(ang), "<= 1e-6 rad"))

    md = float(np.nanmin(log.min_dist))
    out.append(Check("collision avoidance", md > 0, md, "> 0"))

    P0 = log.positions[0]
    _, C0 = covariance(P0)
    basis0 = eig_sym2(C0)
    worst = 0.0
    for Pk in log.positions[1:]:
        cert = scaling_certificate(P0, Pk, basis0)
        worst = max(worst, cert.worst_relative_deviation if isinstance(cert, ScalingMismatch) else cert.residual)
    out.append(Check("scaling certificate", worst <= 1e-6, worst, "<= 1e-6 relative"))

    if oracle:
        tgt = log.target.as_array()
        errs, _ = eigenvalue_oracle_error(log)
        for k in range(2):
            tol = 1e-4 * (tgt[k] if tgt[k] > 0 else tgt[0])
            out.append(
                Check(f"eigenvalue flow oracle lambda{k + 1}", bool(errs[k] <= tol), float(errs[k]), f"<= {tol:.1e}")
            )
    return out


def excluded_set_check(log: TrajectoryLog) -> Check | None:
    lam0 = log.true_lam[0]
    tgt = log.target
    tol = 1e-12 * max(1.0, float(lam0[0]))
    hit = [k + 1 for k, (l0, ls) in enumerate(zip(lam0, tgt.as_array())) if ls > 0 and l0 <= tol]
    if not hit:
        return None
    return Check(
        "initial condition in excluded set Q",
        False,
        f"lambda{hit[0]}(0) = {lam0[hit[0] - 1]:.3g}",
        "lambda_k(0) > 0 where lambda_k* > 0",
        "zero eigenvalue with positive target: that axis cannot grow, run flagged non-convergent",
    )


def estimator_checks(positions, graph, *, duration=None, source="true") -> list[Check]:
    """Fixed-point and rate checks of both estimators on a frozen cloud."""
    summary = spectral_summary(graph)
    lam2 = summary.algebraic_connectivity
    T = 20.0 / lam2 if duration is None else duration
    t, ey, ed, tot, final = run_static(positions, graph, T, source=source)
    _, C = covariance(positions)
    R = recovered_covariances(final)
    d = R - C.as_vector()
    rec = float(np.sqrt(d[:, 0] ** 2 + 2 * d[:, 1] ** 2 + d[:, 2] ** 2).max())
    slope = fit_decay_rate(t, tot, (0.5 * T, T))
    out = [
        Check(f"centroid estimator fixed point [{source}]", float(ey[-1]) <= 1e-6, float(ey[-1]), "<= 1e-6", f"T = {T:.3g}"),
        Check(f"covariance recovery [{source}]", rec <= 1e-6, rec, "<= 1e-6 (Frobenius)", f"T = {T:.3g}"),
        Check(f"estimator decay rate [{source}]", slope <= -0.9 * lam2, slope, f"<= {-0.9 * lam2:.4g} (-0.9 lambda2(L))"),
    ]
    s_p = float(np.abs(final.p_hat.sum(axis=0)).max())
    s_c = float(np.abs(final.c_hat.sum(axis=0)).max())
    out.append(Check(f"zero-sum conservation [{source}]", max(s_p, s_c) <= 1e-9, max(s_p, s_c), "<= 1e-9"))
    return out


def distributed_checks(log: TrajectoryLog, rel_tol: float = 0.01) -> list[Check]:
    out = []
    alive = log.status != DEAD
    sums_p = np.array([np.abs(log.p_hat[k][alive[k]].sum(axis=0)).max() for k in range(len(log))])
    sums_c = np.array([np.abs(log.c_hat[k][alive[k]].sum(axis=0)).max() for k in range(len(log))])
    cons = float(max(sums_p.max(), sums_c.max()))
    sc = log.scenario
    keep = sc is not None and sc.cfg.on_death == "keep" and any(e.kind == "kill" for e in sc.events)
    if not keep:
        out.append(Check("zero-sum conservation over survivors", cons <= 1e-9, cons, "<= 1e-9"))
    tgt = log.target.as_array()
    rel = np.abs(log.true_lam[-1] - tgt) / tgt
    out.append(
        Check("final spectrum near target", bool(rel.max() <= rel_tol), float(rel.max()), f"<= {rel_tol:g} relative",
              f"lambda(T) = ({log.true_lam[-1][0]:.6g}, {log.true_lam[-1][1]:.6g})")
    )
    md = float(np.nanmin(log.min_dist))
    out.append(Check("collision avoidance", md > 0, md, "> 0"))
    out.append(Check("bounded error", bool(np.isfinite(log.e_norm).all()), float(np.max(log.e_norm)), "finite"))
    return out


def verify_scenario(sc: Scenario, log: TrajectoryLog | None = None) -> list[Check]:
    """Full invariant suite appropriate for the scenario's mode."""
    cfg = sc.cfg
    checks = [Check("graph connected", is_connected(sc.graph), sc.algebraic_connectivity, "lambda2(L) > 0")]
    if log is None:
        log = run(sc)
    ex = excluded_set_check(log)
    if ex is not None:
        checks.append(ex)
    if cfg.mode == "centralized":
        clean = not sc.events
        if clean:
            checks += centralized_checks(log, oracle=ex is None)
        else:
            md = float(np.nanmin(log.min_dist))
            checks.append(Check("collision avoidance", md > 0, md, "> 0"))
        return checks
    if not cfg.motion:
        checks += estimator_checks(sc.positions0, sc.graph, source="true")
        checks += estimator_checks(sc.positions0, sc.graph, source="cascade")
        return checks
    orbiters = any(e.kind == "non_cooperative" for e in sc.events)
    if orbiters:
        T = float(log.t[-1])
        q = log.t >= 0.75 * T
        avg = float(np.mean(log.e_norm[q]))
        bound = 0.1 * log.target.lambda1_star
        checks.append(Check("bounded error with non-cooperative agents", bool(np.isfinite(log.e_norm).all()),
                            float(np.max(log.e_norm)), "finite"))
        checks.append(Check("final-quarter mean error", avg <= bound, avg, f"<= {bound:g} (0.1 lambda1*)"))
        md = float(np.nanmin(log.min_dist))
        checks.append(Check("min pairwise distance", md > 0, md, "> 0", "orbiters may pass close to others"))
        return checks
    checks += distributed_checks(log)
    return checks


def prepare_and_verify(cfg) -> tuple[list[Check], TrajectoryLog]:
    sc = prepare(cfg)
    log = run(sc)
    return verify_scenario(sc, log), log
