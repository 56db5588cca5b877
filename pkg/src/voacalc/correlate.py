"""Correlation functions from truncated mode sums, and the fusion/braid checks.

Evaluation conventions:
  * products are ordered Y_n(w_n, z_n) ... Y_1(w_1, z_1) with 0<|z_1|<...<|z_n|;
  * iterates expand around the base point z_1 under the nested-disc inequalities;
  * equal-modulus (braid) values are defined through radial limits only;
  * every evaluation returns (value, tail_bound) with the tail estimated by the
    geometric ratio test on total-degree sums.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import (BasisDeficientError, NoConvergenceEvidenceError,
                     RegionViolationError)
from .graded import (BlockOperator, GradedVector, apply_exp, frac, inner,
                     pairing)
from .multivalued import (AngledComplex, QuasiPowerSeries, ac_div, ac_mul,
                          ac_pow, ac_value_pow, arg_transport, qps_eval,
                          radial_limit)
from .report import CheckResult, passfail
from .voa import IntertwinerData, binom_general, basis_vectors


@dataclass
class ChainSpec:
    """A composable chain of intertwiners, applied first-to-last."""

    intertwiners: list[IntertwinerData]

    def __post_init__(self):
        for a, b in zip(self.intertwiners, self.intertwiners[1:]):
            if a.target_space.label != b.source_space.label:
                raise ValueError(
                    f"chain break: target {a.target_space.label} != source "
                    f"{b.source_space.label}")

    @property
    def source_label(self) -> str:
        return self.intertwiners[0].source_space.label

    @property
    def target_label(self) -> str:
        return self.intertwiners[-1].target_space.label

    def __len__(self):
        return len(self.intertwiners)


@dataclass
class PointConfig:
    """Argument-tracked points with a region tag.

    region: "product" | "iterate" | "generalized" | "equal_modulus".
    groups (generalized only): list of lists of point indices.
    """

    points: list[AngledComplex]
    region: str
    groups: Optional[list[list[int]]] = None

    def validate(self):
        mods = [p.modulus for p in self.points]
        if self.region == "product":
            for a, b in zip(mods, mods[1:]):
                if not a < b:
                    raise RegionViolationError(
                        f"product region needs |z_m| increasing, got {a} >= {b}")
        elif self.region == "iterate":
            diffs = [abs(self.points[m].value - self.points[0].value)
                     for m in range(1, len(self.points))]
            for a, b in zip(diffs, diffs[1:]):
                if not a < b:
                    raise RegionViolationError(
                        f"iterate region needs |z_m - z_1| increasing ({a} >= {b})")
            if diffs and not diffs[-1] < mods[0]:
                raise RegionViolationError(
                    f"iterate region needs |z_n - z_1| < |z_1| "
                    f"({diffs[-1]} >= {mods[0]})")
        elif self.region == "equal_modulus":
            for a in mods[1:]:
                if abs(a - mods[0]) > 1e-12:
                    raise RegionViolationError("equal-modulus region needs equal |z_m|")
        return self


def iterate_arguments(points: list[AngledComplex]) -> list[AngledComplex]:
    """z_m - z_1 with arg(z_m - z_1) close to arg z_m as z_1 -> 0."""
    z1 = points[0].value
    out = []
    for m in range(1, len(points)):
        zm = points[m]

        def path(t, zmv=zm.value):
            return zmv - t * z1

        a = arg_transport(path, 0.0, 1.0, start_arg=zm.argument)
        out.append(AngledComplex(abs(zm.value - z1), a))
    return out


# ---------------------------------------------------------------------------
# nested mode sums

def _mode_sum_apply(alpha: IntertwinerData, w: GradedVector, z: AngledComplex,
                    vec: GradedVector) -> GradedVector:
    """sum_s z^{-s-1} Y(w, s) vec over the truncation (finite)."""
    dw = _weight(w)
    tgt = alpha.target_space
    out = tgt.zero_vector().to_complex()
    for q, comp in vec.comps.items():
        sub = GradedVector(vec.space, {q: comp}, exact=vec.exact)
        for tw in tgt.weights:
            s = q + dw - 1 - tw  # target weight tw = q - s - 1 + dw
            if (s - alpha.coset).denominator != 1:
                continue
            op = alpha.mode(w, s)
            if op.is_zero():
                continue
            term = op.apply(sub).to_complex().scale(ac_value_pow(z, -s - 1))
            out = out + term
    return out


def _weight(v: GradedVector) -> Fraction:
    ws = list(v.comps)
    if len(ws) != 1:
        raise ValueError("insertions must be homogeneous")
    return ws[0]


def _tail_from_partials(partials: dict[Fraction, float]) -> tuple[float, float]:
    """Geometric tail estimate from |contribution| per intermediate weight."""
    degrees = sorted(partials)
    vals = [partials[d] for d in degrees]
    nz = [(d, v) for d, v in zip(degrees, vals)]
    if len(nz) < 2:
        return 0.0, 0.0
    top = nz[len(nz) // 2:]
    ratios = []
    for (d0, a0), (d1, a1) in zip(top, top[1:]):
        if a0 > 0 and d1 > d0:
            ratios.append((a1 / a0) ** (1.0 / float(d1 - d0)))
    if not ratios:
        return 0.0, 0.0
    rho = float(np.median(ratios))
    last = top[-1][1]
    if rho >= 1.0:
        raise NoConvergenceEvidenceError(rho)
    return last * rho / (1.0 - rho), rho


def eval_product(chain: ChainSpec, insertions: list[GradedVector],
                 w0: GradedVector, wbar: GradedVector, config: PointConfig,
                 with_series: bool = True):
    """<Y_n(w_n, z_n) ... Y_1(w_1, z_1) w0, wbar> with a tail bound.

    Returns dict with value, tail, ratio, and (optionally) the omega-coordinate
    quasi power series cross-check.
    """
    if config.region != "product":
        raise RegionViolationError("eval_product needs a product-region config")
    config.validate()
    n = len(chain)
    if n != len(insertions) or n != len(config.points):
        raise ValueError("chain, insertions, points must have equal length")
    if n > 6:
        raise ValueError("at most 6 insertions are supported")

    # direct nested sum with per-step projections; track per-path contributions
    series, value = _product_series(chain, insertions, w0, wbar, config.points)
    tail, ratio = 0.0, 0.0
    if series is not None and n >= 2:
        omega = _omega_point(config.points)
        sval, tail, ratio = qps_eval(series, omega)
        if abs(sval - value) > 1e-8 * max(1.0, abs(value)):
            raise ArithmeticError(
                f"omega-series and nested sum disagree: {sval} vs {value}")
    return {"value": value, "tail": tail, "ratio": ratio, "series": series}


def _omega_point(points: list[AngledComplex]) -> tuple[AngledComplex, ...]:
    n = len(points)
    out = []
    for m in range(n - 1):
        out.append(ac_div(points[m], points[m + 1]))
    out.append(points[-1])
    return tuple(out)


def _product_series(chain: ChainSpec, insertions, w0, wbar, points):
    """Quasi power series in omega-coordinates plus the direct value."""
    n = len(chain)
    dws = [_weight(w) for w in insertions]
    q0 = _weight(w0)
    # paths: intermediate weight tuples with vectors
    paths: dict[tuple, GradedVector] = {(): w0.to_complex()}
    for m, (alpha, w) in enumerate(zip(chain.intertwiners, insertions)):
        tgt = alpha.target_space
        new_paths: dict[tuple, GradedVector] = {}
        for key, vec in paths.items():
            q_prev = key[-1] if key else q0
            for tw in tgt.weights:
                s = q_prev + dws[m] - 1 - tw
                if (s - alpha.coset).denominator != 1:
                    continue
                op = alpha.mode(w, s)
                if op.is_zero():
                    continue
                out = op.apply(vec).to_complex()
                if out.is_zero(1e-300):
                    continue
                new_paths[key + (tw,)] = out
        paths = new_paths
        if not paths:
            break

    # assemble value and omega-series
    value = 0j
    series = None
    if n >= 1:
        cosets = []
        coeffs: dict[tuple, complex] = {}
        for key, vec in paths.items():
            c = complex(pairing(wbar, vec))
            if c == 0:
                continue
            # omega_l exponent: q_l - q_0 - sum_{m<=l} dws_m (l = 1..n), with
            # q_n the boundary weight
            expo = []
            qs = (q0,) + key
            acc = -q0
            for l in range(1, n + 1):
                e_l = qs[l] - q0 - sum(dws[:l])
                expo.append(frac(e_l))
            coeffs[tuple(expo)] = coeffs.get(tuple(expo), 0j) + c
        if coeffs:
            mins = [min(e[m] for e in coeffs) for m in range(n)]
            series = QuasiPowerSeries(n, tuple((mins[m],) for m in range(n)),
                                      coeffs)
        omega = _omega_point(points)
        for expo, c in coeffs.items():
            term = c
            for mm, e in enumerate(expo):
                term *= ac_value_pow(omega[mm], e)
            value += term
    return series, value


def eval_iterate(gamma: IntertwinerData, chain: ChainSpec,
                 insertions: list[GradedVector], w0: GradedVector,
                 wbar: GradedVector, config: PointConfig):
    """<Y_gamma(Y_{s_n}(w_n, z_n-z_1)...Y_{s_2}(w_2, z_2-z_1) w_1, z_1) w0, wbar>.

    chain holds the inner intertwiners (sigma_2..sigma_n); insertions[0] is w_1
    (the source vector of sigma_2) and insertions[m] feeds sigma_{m+1}.
    """
    if config.region != "iterate":
        raise RegionViolationError("eval_iterate needs an iterate-region config")
    config.validate()
    diffs = iterate_arguments(config.points)
    w1 = insertions[0]
    vec = w1.to_complex()
    tails = []
    for m, alpha in enumerate(chain.intertwiners):
        vec = _mode_sum_apply(alpha, insertions[m + 1], diffs[m], vec)
        tails.append(_level_tail(vec))
    z1 = config.points[0]
    value = 0j
    partials: dict[Fraction, float] = {}
    for q in sorted(vec.comps):
        sub = GradedVector(vec.space, {q: vec.comps[q]}, exact=False)
        contrib = 0j
        for tw in gamma.target_space.weights:
            s = _weight(w0) + q - 1 - tw
            if (s - gamma.coset).denominator != 1:
                continue
            op = gamma.mode(sub, s)
            if op.is_zero():
                continue
            out = op.apply(w0.to_complex()).to_complex().scale(
                ac_value_pow(z1, -s - 1))
            contrib += complex(pairing(wbar, out))
        value += contrib
        partials[q] = abs(contrib)
    tail_outer, ratio = _tail_from_partials(partials)
    tails.append((tail_outer, ratio))
    total_tail = sum(t for t, _ in tails)
    return {"value": value, "tail": total_tail, "tails": tails, "vector": vec}


def _level_tail(vec: GradedVector) -> tuple[float, float]:
    partials = {q: float(np.max(np.abs(c))) for q, c in vec.comps.items()}
    try:
        return _tail_from_partials(partials)
    except NoConvergenceEvidenceError:
        return float("inf"), 1.0


def eval_generalized(groups, w0: GradedVector, wbar: GradedVector,
                     configs: list[PointConfig], require_ordering: bool = False):
    """Nested groups: each group is (outer IntertwinerData, ChainSpec inner,
    insertions list, PointConfig iterate-region points for the group).

    configs[a] carries the points of group a (first point is the base z^a_1).
    Condition (2) between neighboring groups is verified here.
    """
    radii = []
    for cfg in configs:
        z1 = abs(cfg.points[0].value)
        spread = max((abs(p.value - cfg.points[0].value) for p in cfg.points[1:]),
                     default=0.0)
        radii.append((z1, spread))
    for a in range(len(radii) - 1):
        if not (radii[a][0] + radii[a][1] < radii[a + 1][0] - radii[a + 1][1]):
            raise RegionViolationError(
                f"group condition (2) fails between groups {a} and {a + 1}: "
                f"{radii[a][0]}+{radii[a][1]} !< {radii[a + 1][0]}-{radii[a + 1][1]}")
    if require_ordering:
        mods = [abs(p.value) for cfg in configs for p in cfg.points]
        for x, y in zip(mods, mods[1:]):
            if not x < y:
                raise RegionViolationError(
                    f"group condition (3) fails: |z| not increasing ({x} >= {y})")

    vec = w0.to_complex()
    value = 0j
    group_tails = []
    for a, (outer, chain_a, insertions_a, cfg) in enumerate(groups):
        cfg.validate()
        inner_vec = insertions_a[0].to_complex()
        diffs = iterate_arguments(cfg.points)
        for m, alpha in enumerate(chain_a.intertwiners):
            inner_vec = _mode_sum_apply(alpha, insertions_a[m + 1], diffs[m],
                                        inner_vec)
        group_tails.append(_level_tail(inner_vec))
        z1 = cfg.points[0]
        out = None
        for q in sorted(inner_vec.comps):
            sub = GradedVector(inner_vec.space, {q: inner_vec.comps[q]},
                               exact=False)
            term = _mode_sum_apply_charge(outer, sub, z1, vec)
            out = term if out is None else out + term
        vec = out if out is not None else outer.target_space.zero_vector().to_complex()
    value = complex(pairing(wbar, vec))
    return {"value": value, "tail": sum(t for t, _ in group_tails),
            "tails": group_tails}


def _mode_sum_apply_charge(alpha: IntertwinerData, charge: GradedVector,
                           z: AngledComplex, vec: GradedVector) -> GradedVector:
    """sum_s z^{-s-1} Y(charge, s) vec for a homogeneous charge vector."""
    dw = _weight(charge)
    tgt = alpha.target_space
    out = tgt.zero_vector().to_complex()
    for q, comp in vec.comps.items():
        sub = GradedVector(vec.space, {q: comp}, exact=False)
        for tw in tgt.weights:
            s = q + dw - 1 - tw
            if (s - alpha.coset).denominator != 1:
                continue
            op = alpha.mode(charge, s)
            if op.is_zero():
                continue
            out = out + op.apply(sub).to_complex().scale(ac_value_pow(z, -s - 1))
    return out


def eval_mixed(beta: IntertwinerData, alpha: IntertwinerData,
               sigma_chain: ChainSpec, rho_chain: ChainSpec,
               sigma_insertions, rho_insertions, w0: GradedVector,
               wbar: GradedVector, z_points: list[AngledComplex],
               zeta_points: list[AngledComplex]):
    """Y_beta(Y_alpha(sigma-iterate, z_1-zeta_1) rho-iterate, zeta_1) w0.

    z_points: z_1..z_m (sigma group base first); zeta_points: zeta_1..zeta_n.
    """
    z1, zeta1 = z_points[0], zeta_points[0]
    dz = [abs(p.value - z1.value) for p in z_points[1:]]
    dzeta = [abs(p.value - zeta1.value) for p in zeta_points[1:]]
    gap = abs(z1.value - zeta1.value)
    spread_z = max(dz, default=0.0)
    for a, b in zip(dzeta, dzeta[1:]):
        if not a < b:
            raise RegionViolationError("zeta differences must increase")
    for a, b in zip(dz, dz[1:]):
        if not a < b:
            raise RegionViolationError("z differences must increase")
    if dzeta and not dzeta[-1] < gap - spread_z:
        raise RegionViolationError(
            f"need |zeta_n-zeta_1| < |z_1-zeta_1| - |z_m-z_1| "
            f"({dzeta[-1]} >= {gap} - {spread_z})")
    if dz and not spread_z < gap:
        raise RegionViolationError("need |z_m-z_1| < |z_1-zeta_1|")
    if not gap < abs(zeta1.value) - spread_z:
        raise RegionViolationError(
            f"need |z_1-zeta_1| < |zeta_1| - |z_m-z_1| ({gap} >= "
            f"{abs(zeta1.value)} - {spread_z})")

    # sigma iterate around z_1
    u_sigma = sigma_insertions[0].to_complex()
    if sigma_chain.intertwiners:
        diffs = iterate_arguments(z_points)
        for m, a in enumerate(sigma_chain.intertwiners):
            u_sigma = _mode_sum_apply(a, sigma_insertions[m + 1], diffs[m], u_sigma)
    # rho iterate around zeta_1
    u_rho = rho_insertions[0].to_complex()
    if rho_chain.intertwiners:
        diffs = iterate_arguments(zeta_points)
        for m, a in enumerate(rho_chain.intertwiners):
            u_rho = _mode_sum_apply(a, rho_insertions[m + 1], diffs[m], u_rho)

    # alpha at z_1 - zeta_1 (argument close to arg z_1 as zeta_1 -> 0)
    def seg(t):
        return z1.value - t * zeta1.value

    arg_gap = arg_transport(seg, 0.0, 1.0, start_arg=z1.argument)
    z_gap = AngledComplex(gap, arg_gap)
    mid = None
    for q in sorted(u_sigma.comps):
        sub = GradedVector(u_sigma.space, {q: u_sigma.comps[q]}, exact=False)
        term = _mode_sum_apply_charge(alpha, sub, z_gap, u_rho)
        mid = term if mid is None else mid + term
    if mid is None:
        return {"value": 0j, "tail": 0.0}
    out = None
    for q in sorted(mid.comps):
        sub = GradedVector(mid.space, {q: mid.comps[q]}, exact=False)
        term = _mode_sum_apply_charge(beta, sub, zeta1, w0.to_complex())
        out = term if out is None else out + term
    value = complex(pairing(wbar, out)) if out is not None else 0j
    t1 = _level_tail(u_sigma)[0] if sigma_chain.intertwiners else 0.0
    t2 = _level_tail(u_rho)[0] if rho_chain.intertwiners else 0.0
    t3 = _level_tail(mid)[0]
    return {"value": value, "tail": t1 + t2 + t3}


# ---------------------------------------------------------------------------
# fusion coefficients

def solve_fusion(alpha_basis: list[IntertwinerData], beta_basis,
                 alphap_basis, betap_basis, sample_configs,
                 test_data, rcond: float = 1e-10):
    """Solve Y_a(w_i, z_i) Y_b(w_j, z_j) = sum F Y_b'(Y_a'(w_i, z_i-z_j) w_j, z_j).

    sample_configs: list of (z_i, z_j) AngledComplex pairs in the region
    0 < |z_i - z_j| < |z_j| < |z_i| with arguments per the standard choices.
    test_data: list of (w_i, w_j, source_vec, boundary_dual_vec).
    Returns (F, residual) with F[(a, b), (bp, ap)].
    """
    rows = []
    rhs_rows = []
    for (z_i, z_j) in sample_configs:
        if not (abs(z_i.value - z_j.value) < z_j.modulus < z_i.modulus):
            raise RegionViolationError("fusion samples need |z_i-z_j|<|z_j|<|z_i|")

        def seg(t, zi=z_i.value, zj=z_j.value):
            return zi - t * zj

        arg_d = arg_transport(seg, 0.0, 1.0, start_arg=z_i.argument)
        z_d = AngledComplex(abs(z_i.value - z_j.value), arg_d)
        for (w_i, w_j, src, bnd) in test_data:
            for a, ya in enumerate(alpha_basis):
                for b, yb in enumerate(beta_basis):
                    mid = _mode_sum_apply(yb, w_j, z_j, src.to_complex())
                    out = _mode_sum_apply(ya, w_i, z_i, mid)
                    lhs_val = complex(pairing(bnd, out))
                    row = []
                    for bp, ybp in enumerate(betap_basis):
                        for ap, yap in enumerate(alphap_basis):
                            innerv = _mode_sum_apply(yap, w_i, z_d,
                                                     w_j.to_complex())
                            tot = 0j
                            for q in sorted(innerv.comps):
                                sub = GradedVector(innerv.space,
                                                   {q: innerv.comps[q]},
                                                   exact=False)
                                term = _mode_sum_apply_charge(
                                    ybp, sub, z_j, src.to_complex())
                                tot += complex(pairing(bnd, term))
                            row.append(tot)
                    rows.append(row)
                    rhs_rows.append(lhs_val)
    a_mat = np.array(rows, dtype=complex)
    b_vec = np.array(rhs_rows, dtype=complex)
    if a_mat.size == 0:
        raise BasisDeficientError("no sample equations")
    sol, res, rank, sv = np.linalg.lstsq(a_mat, b_vec, rcond=rcond)
    if rank < a_mat.shape[1]:
        raise BasisDeficientError(
            f"basis deficient: rank {rank} < unknowns {a_mat.shape[1]}")
    residual = float(np.linalg.norm(a_mat @ sol - b_vec))
    f_coeffs = {}
    idx = 0
    for bp in range(len(betap_basis)):
        for ap in range(len(alphap_basis)):
            f_coeffs[(bp, ap)] = complex(sol[idx])
            idx += 1
    return f_coeffs, residual


# ---------------------------------------------------------------------------
# braid relation via radial limits

def braid_pair_values(pair_left, pair_right, w_i, w_j, src, bnd,
                      config: PointConfig, k_min=3, k_max=12):
    """Radial-limit values of both orderings of a two-point braid relation.

    pair_left = (alpha, beta): evaluate Y_alpha(w_i, z_i) Y_beta(w_j, z_j),
    radially scaled with |z_j| < |z_i|.
    pair_right = (beta', alpha'): Y_beta'(w_j, z_j) Y_alpha'(w_i, z_i), with
    |z_i| < |z_j|.  config.points = [z_i, z_j] on a common circle.
    """
    config.validate()
    z_i, z_j = config.points

    def left(r):
        zi = AngledComplex(z_i.modulus * r, z_i.argument)
        zj = AngledComplex(z_j.modulus * r * r, z_j.argument)
        alpha, beta = pair_left
        mid = _mode_sum_apply(beta, w_j, zj, src.to_complex())
        out = _mode_sum_apply(alpha, w_i, zi, mid)
        return complex(pairing(bnd, out))

    def right(r):
        zj = AngledComplex(z_j.modulus * r, z_j.argument)
        zi = AngledComplex(z_i.modulus * r * r, z_i.argument)
        betap, alphap = pair_right
        mid = _mode_sum_apply(alphap, w_i, zi, src.to_complex())
        out = _mode_sum_apply(betap, w_j, zj, mid)
        return complex(pairing(bnd, out))

    lv, le = radial_limit(left, k_min=k_min, k_max=k_max)
    rv, re = radial_limit(right, k_min=k_min, k_max=k_max)
    return (lv, le), (rv, re)


def check_braid(pair_left, pair_right, w_i, w_j, src, bnd,
                config: PointConfig, tol: float = 1e-4,
                subject: str = "braid") -> CheckResult:
    (lv, le), (rv, re) = braid_pair_values(pair_left, pair_right, w_i, w_j,
                                           src, bnd, config)
    scale = max(abs(lv), abs(rv), 1e-30)
    diff = abs(lv - rv) / scale
    ok = diff <= tol + (le + re) / scale
    return passfail("braid_relation", subject, ok, residual=diff,
                    details=f"left={lv:.8g}, right={rv:.8g}, "
                            f"extrap_err={le + re:.2g}")


def check_braid_b_route(delta: IntertwinerData, gamma: IntertwinerData,
                        bgamma: IntertwinerData, sign: int, w_i, w_j, src, bnd,
                        z_i: AngledComplex, z_j: AngledComplex,
                        tol: float = 1e-6) -> CheckResult:
    """Y_delta(Y_{B+-gamma}(w_j, z_j-z_i) w_i, z_i) =
    Y_delta(Y_gamma(w_i, e^{+-i pi}(z_j-z_i)) w_j, z_j)  at sample points."""

    def seg_ji(t):
        return z_j.value - t * z_i.value

    arg_ji = arg_transport(seg_ji, 0.0, 1.0, start_arg=z_j.argument)
    z_ji = AngledComplex(abs(z_j.value - z_i.value), arg_ji)
    z_ij_rot = AngledComplex(z_ji.modulus, z_ji.argument + sign * math.pi)

    lhs_in = _mode_sum_apply(bgamma, w_j, z_ji, w_i.to_complex())
    rhs_in = _mode_sum_apply(gamma, w_i, z_ij_rot, w_j.to_complex())
    lhs = 0j
    rhs = 0j
    for q in sorted(set(lhs_in.comps) | set(rhs_in.comps)):
        if q in lhs_in.comps:
            sub = GradedVector(lhs_in.space, {q: lhs_in.comps[q]}, exact=False)
            out = _mode_sum_apply_charge(delta, sub, z_i, src.to_complex())
            lhs += complex(pairing(bnd, out))
        if q in rhs_in.comps:
            sub = GradedVector(rhs_in.space, {q: rhs_in.comps[q]}, exact=False)
            out = _mode_sum_apply_charge(delta, sub, z_j, src.to_complex())
            rhs += complex(pairing(bnd, out))
    scale = max(abs(lhs), abs(rhs), 1e-30)
    diff = abs(lhs - rhs) / scale
    return passfail("braid_b_transform_route", delta.label, diff <= tol,
                    residual=diff, details=f"lhs={lhs:.8g}, rhs={rhs:.8g}")


# ---------------------------------------------------------------------------
# residue criterion (vertex-operator intertwining property)

def check_vertex_intertwining(alpha: IntertwinerData, modules: dict,
                              u_vectors, w: GradedVector, z: Fraction,
                              sqrt_z: Fraction, window: int = 3,
                              test_level: int = 2) -> CheckResult:
    """Sum of the three residue contributions vanishes for f = zeta^m (zeta-z)^n.

    z must be a positive rational with rational square root so that the
    half-integer powers stay exact.
    """
    k_lbl, i_lbl, j_lbl = alpha.ktype
    mod_i, mod_j, mod_k = modules[i_lbl], modules[j_lbl], modules[k_lbl]
    exact = alpha.source_space.exact
    if sqrt_z * sqrt_z != z:
        raise ValueError("need sqrt_z**2 == z for exact half-integer powers")
    dw = _weight(w)
    bad = []
    worst = 0.0
    checked = 0
    skipped = 0
    test = [v for _, _, v in basis_vectors(
        alpha.source_space, alpha.source_space.lowest_weight + test_level)]

    def z_pow(e: Fraction):
        # z^e exactly via sqrt_z
        e2 = e * 2
        if e2.denominator != 1:
            raise ValueError("powers must be half-integers")
        val = exact_rat_pow(sqrt_z, int(e2))
        return val

    for u_name, u in u_vectors:
        du = _weight(u)
        for m in range(-window, window + 1):
            for n in range(-window, window + 1):
                for xi in test:
                    dxi = _weight(xi)
                    # window guards mirror the Jacobi caps
                    if (du + dw - n - 1 > alpha.charge_space.cutoff or
                            dw + dxi > alpha.target_space.cutoff + 1 or
                            du + dxi - m - 1 > alpha.source_space.cutoff):
                        skipped += 1
                        continue
                    checked += 1
                    total = None
                    # residue at zeta = 0
                    lmax = int(du + dxi - m + 2)
                    for l in range(0, max(lmax, 0) + 1):
                        b = binom_general(n, l)
                        if not b:
                            continue
                        mid = mod_j.mode(u, m + l).apply(xi)
                        if mid.is_zero():
                            continue
                        coeff = b * (1 if (n - l) % 2 == 0 else -1)
                        vecs = _apply_full_mode_sum(alpha, w, mid, z_pow, dw)
                        term = vecs.scale(coeff * z_pow(frac(n - l)) if exact
                                          else complex(coeff) * float(z_pow(frac(n - l))))
                        total = term if total is None else total + term
                    # residue at zeta = z
                    lmax = int(du + dw - n + 2)
                    for l in range(0, max(lmax, 0) + 1):
                        b = binom_general(m, l)
                        if not b:
                            continue
                        ch = mod_i.mode(u, n + l).apply(w)
                        if ch.is_zero():
                            continue
                        vecs = None
                        for q, comp in ch.comps.items():
                            sub = GradedVector(ch.space, {q: comp}, exact=ch.exact)
                            vv = _apply_full_mode_sum(alpha, sub, xi, z_pow, q)
                            vecs = vv if vecs is None else vecs + vv
                        term = vecs.scale(b * z_pow(frac(m - l)) if exact
                                          else complex(b) * float(z_pow(frac(m - l))))
                        total = term if total is None else total + term
                    # residue at infinity
                    mid = _apply_full_mode_sum(alpha, w, xi, z_pow, dw)
                    lmax = int(dw + dxi + du + abs(n) + abs(m) +
                               alpha.target_space.cutoff + 2)
                    for l in range(0, max(lmax, 0) + 1):
                        b = binom_general(n, l)
                        if not b:
                            continue
                        coeff = b * (-1 if l % 2 else 1) * (-1)
                        out = mod_k.mode(u, m + n - l).apply(mid)
                        if out.is_zero():
                            continue
                        term = out.scale(coeff * z_pow(frac(l)) if exact
                                         else complex(coeff) * float(z_pow(frac(l))))
                        total = term if total is None else total + term
                    if total is None:
                        continue
                    # the infinity-side expansion passes through weights above
                    # the truncation for target weights near the top; compare
                    # only safely reconstructed components
                    guard = max(frac(0), frac(m + n + 1) - du)
                    safe_top = alpha.target_space.cutoff - guard
                    comps = {tw: c for tw, c in total.comps.items()
                             if tw <= safe_top}
                    total = GradedVector(total.space, comps, exact=total.exact)
                    r = total.max_abs()
                    worst = max(worst, r)
                    if (exact and r != 0.0) or (not exact and r > 1e-9):
                        bad.append((u_name, m, n))
    return passfail("vertex_intertwining_residues", alpha.label, not bad,
                    residual=worst, exact=exact,
                    details=(f"violations={bad[:4]}" if bad else
                             f"checked={checked}, window_exceeded={skipped}"))


def exact_rat_pow(x: Fraction, k: int) -> Fraction:
    out = frac(1)
    for _ in range(abs(k)):
        out = out * x
    return out if k >= 0 else 1 / out


def _apply_full_mode_sum(alpha: IntertwinerData, w, xi, z_pow, dw):
    """sum_s z^{-s-1} Y(w, s) xi with exact powers (finite sum)."""
    tgt = alpha.target_space
    total = None
    for q in xi.comps:
        sub = GradedVector(xi.space, {q: xi.comps[q]}, exact=xi.exact)
        for tw in tgt.weights:
            s = q + dw - 1 - tw
            if (s - alpha.coset).denominator != 1:
                continue
            op = alpha.mode(w, s)
            if op.is_zero():
                continue
            factor = z_pow(-s - 1)
            out = op.apply(sub)
            out = out.scale(factor if xi.space.exact else float(factor))
            total = out if total is None else total + out
    if total is None:
        return alpha.target_space.zero_vector()
    return total


# ---------------------------------------------------------------------------
# creation fusion, translation exponentials, vanishing propagation

def check_creation_fusion(creation_op: IntertwinerData, chain: ChainSpec,
                          creations_inner: IntertwinerData,
                          insertions, vacuum: GradedVector,
                          config: PointConfig, tol: float = 1e-4,
                          extra_vectors=()) -> CheckResult:
    """Y^i_{i0}(iterate, z_1) vac == product with Y^{i1}_{i1 0}(w_1, z_1) vac."""
    points = config.points
    diffs = iterate_arguments(points)
    # left: inner iterate then creation at z_1
    vec = insertions[0].to_complex()
    for m, alpha in enumerate(chain.intertwiners):
        vec = _mode_sum_apply(alpha, insertions[m + 1], diffs[m], vec)
    z1 = points[0]
    left = None
    for q in sorted(vec.comps):
        sub = GradedVector(vec.space, {q: vec.comps[q]}, exact=False)
        term = _mode_sum_apply_charge(creation_op, sub, z1, vacuum.to_complex())
        left = term if left is None else left + term
    # right: creation of w_1 at z_1, then the chain at z_m
    right = _mode_sum_apply(creations_inner, insertions[0], z1,
                            vacuum.to_complex())
    for m, alpha in enumerate(chain.intertwiners):
        right = _mode_sum_apply(alpha, insertions[m + 1], points[m + 1], right)
    diff = (left - right).max_abs()
    scale = max(right.max_abs(), 1e-30)
    rel = diff / scale
    return passfail("creation_fusion", creation_op.label, rel <= tol,
                    residual=rel, details=f"abs_scale={scale:.3g}")


def check_translate_exp(alpha: IntertwinerData, modules: dict,
                        w: GradedVector, z: float, z0: float, side: str,
                        src: GradedVector, bnd: GradedVector,
                        tol: float = 1e-6) -> CheckResult:
    """Translation exponentials through an intertwiner, as matrix elements."""
    j_lbl, k_lbl = alpha.ktype[2], alpha.ktype[0]
    mod_j, mod_k = modules[j_lbl], modules[k_lbl]
    if side == "lminus":
        if not 0 <= abs(z0) < abs(z):
            raise RegionViolationError("need |z0| < |z|")
        za = AngledComplex.positive(z)
        z_shift = AngledComplex(abs(z - z0), arg_transport(
            lambda t: z - t * z0, 0.0, 1.0, start_arg=za.argument))
        lhs_vec = _mode_sum_apply(alpha, w, z_shift, src.to_complex())
        lhs_vec = apply_exp(mod_k.virasoro(-1), complex(z0), lhs_vec)
        rhs_src = apply_exp(mod_j.virasoro(-1), complex(z0), src.to_complex())
        rhs_vec = _mode_sum_apply(alpha, w, za, rhs_src)
    elif side == "lplus":
        if not 0 <= abs(z0) < 1.0 / abs(z):
            raise RegionViolationError("need |z0| < 1/|z|")
        za = AngledComplex.positive(z)
        fac = 1.0 - z * z0
        arg_fac = arg_transport(lambda t: 1.0 - t * z * z0, 0.0, 1.0,
                                start_arg=0.0)
        lhs_vec = _mode_sum_apply(alpha, w, za, src.to_complex())
        lhs_vec = apply_exp(mod_k.virasoro(1), complex(z0), lhs_vec)
        # dressed charge vector e^{z0(1-zz0)L_1} (1-zz0)^{-2L_0} w
        dw = _weight(w)
        scaledw = w.to_complex().scale(
            ac_value_pow(AngledComplex(abs(fac), arg_fac), -2 * dw))
        i_lbl = alpha.ktype[1]
        dressed = apply_exp(modules[i_lbl].virasoro(1),
                            complex(z0 * fac), scaledw)
        rhs_src = apply_exp(mod_j.virasoro(1), complex(z0), src.to_complex())
        z_new = AngledComplex(abs(z / fac), za.argument - arg_fac)
        rhs_vec = None
        for q in sorted(dressed.comps):
            sub = GradedVector(dressed.space, {q: dressed.comps[q]}, exact=False)
            term = _mode_sum_apply_charge(alpha, sub, z_new, rhs_src)
            rhs_vec = term if rhs_vec is None else rhs_vec + term
    else:
        raise ValueError("side must be 'lminus' or 'lplus'")
    lhs = complex(pairing(bnd, lhs_vec))
    rhs = complex(pairing(bnd, rhs_vec))
    scale = max(abs(lhs), abs(rhs), 1e-30)
    rel = abs(lhs - rhs) / scale
    return passfail("translate_exponential", f"{alpha.label}:{side}", rel <= tol,
                    residual=rel, details=f"lhs={lhs:.8g}, rhs={rhs:.8g}")


def vanishing_propagation(correlator, slots: int, slot: int, spanning,
                          random_vectors, tol: float = 1e-9) -> CheckResult:
    """If the correlator kills a spanning set in one slot, it kills random
    vectors in all slots (truncated uniqueness propagation)."""
    vanishing = all(abs(correlator(*(_slot_args(slots, slot, v)))) <= tol
                    for v in spanning)
    if not vanishing:
        return CheckResult("vanishing_propagation", f"slot{slot}", "skip",
                           details="precondition fails: correlator not vanishing")
    bad = []
    for vecs in random_vectors:
        val = correlator(*vecs)
        if abs(val) > tol:
            bad.append(abs(val))
    return passfail("vanishing_propagation", f"slot{slot}", not bad,
                    residual=max(bad) if bad else 0.0,
                    details=f"counterexamples={len(bad)}" if bad else "")


def _slot_args(slots: int, slot: int, v):
    return tuple(v if s == slot else None for s in range(slots))
