"""VOA, module, and intertwiner data with mode-level axiom checks.

All checks return CheckResult lists with deterministic ordering.  Checks that
would need intermediate energies beyond the truncation report status "skip"
("window exceeded") rather than failing.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .graded import (BlockOperator, GradedSpace, GradedVector, frac, inner,
                     mat_conj, mat_is_zero, twist_operator, zeros)
from .report import CheckResult, passfail
from .scalars import Cyclo8, rat, to_complex


def binom_general(n: int, k: int):
    """Binomial coefficient with arbitrary integer top, exact."""
    if k < 0:
        return rat(0)
    num = 1
    for j in range(k):
        num *= n - j
    return rat(num, math.factorial(k))


class IntertwinerData:
    """A type (target; charge source) intertwiner as a lazy mode family."""

    def __init__(self, label: str, ktype: tuple[str, str, str],
                 charge_space: GradedSpace, source_space: GradedSpace,
                 target_space: GradedSpace, coset: Fraction,
                 mode_source, scale_factor=None):
        self.label = label
        self.ktype = ktype  # (k, i, j): target, charge, source labels
        self.charge_space = charge_space
        self.source_space = source_space
        self.target_space = target_space
        self.coset = frac(coset) % 1
        self._mode_source = mode_source
        self._scale = scale_factor

    def mode(self, w, s) -> BlockOperator:
        op = self._mode_source.mode(w, frac(s))
        if self._scale is not None:
            op = op.scale(self._scale)
        return op

    def cross(self, w_src, s) -> Optional[BlockOperator]:
        """Charge -> target matrix at fixed source vector, when supported."""
        src = self._mode_source
        seen = set()
        while src is not None and id(src) not in seen:
            seen.add(id(src))
            if hasattr(src, "cross_matrix"):
                op = src.cross_matrix(w_src, frac(s))
                if self._scale is not None:
                    op = op.scale(self._scale)
                return op
            src = getattr(src, "source", None)
        return None

    def scaled(self, factor, label: str = None) -> "IntertwinerData":
        new = factor if self._scale is None else _mul_scalar(self._scale, factor)
        return IntertwinerData(label or f"{factor}*{self.label}", self.ktype,
                               self.charge_space, self.source_space,
                               self.target_space, self.coset,
                               self._mode_source, new)

    def s_values(self, w_weight: Fraction, max_shift: Fraction) -> list[Fraction]:
        """Stored modes: s in coset + Z with |energy shift| <= max_shift."""
        out = []
        center = -1 + w_weight  # shift = -s - 1 + w_weight
        lo = center - max_shift
        hi = center + max_shift
        s = self.coset + math.floor(lo - self.coset)
        while s <= hi:
            if s >= lo:
                out.append(frac(s))
            s += 1
        return out

    def __repr__(self):
        k, i, j = self.ktype
        return f"Intertwiner({self.label}: ({k}; {i} {j}), coset={self.coset})"


def _mul_scalar(a, b):
    return a * b


class ScaledSumSource:
    """Mode source that is a finite linear combination of others."""

    def __init__(self, terms: list[tuple[object, object]]):
        self.terms = terms  # (coeff, IntertwinerData-or-source)

    def mode(self, w, s):
        total = None
        for coeff, src in self.terms:
            op = src.mode(w, s).scale(coeff)
            total = op if total is None else total + op
        return total


class ModuleData:
    """A V-module: graded space plus the vertex-operator action of V."""

    def __init__(self, label: str, space: GradedSpace, action, voa=None,
                 unitary: bool = True):
        self.label = label
        self.space = space
        self.action = action  # .mode(v, n) -> BlockOperator (space -> space)
        self.voa = voa
        self.unitary = unitary
        self._l_cache: dict[int, BlockOperator] = {}

    def mode(self, v, n) -> BlockOperator:
        return self.action.mode(v, frac(n))

    def virasoro(self, n: int) -> BlockOperator:
        if n not in self._l_cache:
            self._l_cache[n] = self.mode(self.voa.conformal, n + 1)
        return self._l_cache[n]

    def as_intertwiner(self) -> IntertwinerData:
        return IntertwinerData(f"Y_{self.label}", (self.label, self.voa.label,
                                                   self.label),
                               self.voa.module.space, self.space, self.space,
                               frac(0), self.action)

    def __repr__(self):
        return f"ModuleData({self.label}, dim={self.space.total_dim})"


class VOAData:
    """The vacuum module with vacuum, conformal vector, PCT, central charge."""

    def __init__(self, label: str, space: GradedSpace, action,
                 vacuum: GradedVector, conformal: GradedVector,
                 central_charge, pct: Callable[[GradedVector], GradedVector]):
        self.label = label
        self.module = ModuleData(label, space, action, voa=self, unitary=True)
        self.module.voa = self
        self.vacuum = vacuum
        self.conformal = conformal
        self.central_charge = frac(central_charge)
        self.pct = pct  # antilinear map on the vacuum module

    @property
    def space(self) -> GradedSpace:
        return self.module.space

    def mode(self, v, n) -> BlockOperator:
        return self.module.mode(v, n)

    def virasoro(self, n: int) -> BlockOperator:
        return self.module.virasoro(n)


# ---------------------------------------------------------------------------
# basis iteration helpers

def basis_vectors(space: GradedSpace, max_weight=None):
    """(weight, index, vector) over the basis, ascending weight."""
    for w in space.weights:
        if max_weight is not None and w > max_weight:
            continue
        for idx in range(space.dims[w]):
            yield w, idx, space.basis_vector(w, idx)


def residual_of(vec: GradedVector) -> float:
    return vec.max_abs()


# ---------------------------------------------------------------------------
# checks

def check_vacuum(voa: VOAData, max_level: Optional[int] = None) -> list[CheckResult]:
    """Y(vacuum, n) = delta(n, -1) id and creation axiom on the basis."""
    results = []
    space = voa.space
    top = space.cutoff if max_level is None else frac(max_level)
    ident = BlockOperator.identity(space)
    bad = []
    for n in range(-3, 3):
        op = voa.mode(voa.vacuum, n)
        target = ident if n == -1 else BlockOperator.zero(space, space)
        if not (op - target).is_zero(tol=0.0 if space.exact else 1e-12):
            bad.append(("vacuum", n))
    results.append(passfail("vacuum_modes", voa.label, not bad, exact=space.exact,
                            details=f"violations={bad}" if bad else ""))
    bad = []
    worst = 0.0
    for w, idx, v in basis_vectors(space, top):
        for n in range(0, int(w) + 2):
            out = voa.mode(v, n).apply(voa.vacuum)
            if not out.is_zero(tol=0.0 if space.exact else 1e-12):
                bad.append((space.basis_names[w][idx], n))
        out = voa.mode(v, -1).apply(voa.vacuum)
        diff = out - v
        worst = max(worst, residual_of(diff))
        if not diff.is_zero(tol=0.0 if space.exact else 1e-12):
            bad.append((space.basis_names[w][idx], -1))
    results.append(passfail("creation_axiom", voa.label, not bad, residual=worst,
                            exact=space.exact,
                            details=f"violations={bad[:4]}" if bad else ""))
    return results


def check_virasoro(module: ModuleData, c=None, mode_window: int = 3,
                   tol: float = 0.0) -> list[CheckResult]:
    """[L_m, L_n] = (m-n) L_{m+n} + c/12 (m^3 - m) delta_{m,-n}."""
    c = module.voa.central_charge if c is None else frac(c)
    space = module.space
    results = []
    worst = 0.0
    bad = []
    for m in range(-mode_window, mode_window + 1):
        for n in range(m, mode_window + 1):
            guard = max(abs(m), abs(n))
            lm, ln = module.virasoro(m), module.virasoro(n)
            comm = lm.compose(ln) - ln.compose(lm) - module.virasoro(m + n).scale(m - n)
            if m + n == 0:
                central = frac(c * (m ** 3 - m), 12)
                comm = comm - BlockOperator.identity(space).scale(
                    central if space.exact else float(central))
            ok = True
            for (tw, sw), blk in comm.blocks.items():
                if sw + guard > space.cutoff:
                    continue  # outside the guarded window
                if not mat_is_zero(blk, tol=tol if not space.exact else 0.0):
                    ok = False
                    worst = max(worst, float(np.max(np.abs(
                        blk.astype(complex) if blk.dtype != object else
                        np.array([[to_complex(x) for x in row] for row in blk])))))
            if not ok:
                bad.append((m, n))
    results.append(passfail("virasoro_relation", module.label, not bad,
                            residual=worst, exact=space.exact,
                            details=f"violations={bad}" if bad else
                            f"window |m|,|n|<={mode_window}"))
    return results


def _term_cap(top_weight, lowest, delta_sum, offset) -> int:
    """Largest l with a possibly nonzero operator term (energy >= lowest)."""
    cap = top_weight + delta_sum - offset - lowest
    return int(math.floor(cap)) if cap >= 0 else -1


def jacobi_residual(alpha: IntertwinerData, modules: dict, u: GradedVector,
                    w: GradedVector, m: int, n: int, s: Fraction,
                    xi: GradedVector):
    """The three sums of the intertwiner Jacobi identity applied to xi.

    Returns (residual_vector, window_ok).  u and w must be homogeneous.
    """
    k, i, j = alpha.ktype
    mod_i, mod_j, mod_k = modules[i], modules[j], modules[k]
    du = _sole_weight(u)
    dw = _sole_weight(w)
    dxi = _sole_weight(xi)
    s = frac(s)

    cut_i = alpha.charge_space.cutoff
    cut_j = alpha.source_space.cutoff
    cut_k = alpha.target_space.cutoff
    low_i = alpha.charge_space.lowest_weight
    low_j = alpha.source_space.lowest_weight
    low_k = alpha.target_space.lowest_weight

    window_ok = (du + dw - n - 1 <= cut_i and dw + dxi - s - 1 <= cut_k
                 and du + dxi - m - 1 <= cut_j)

    # sum 1: sum_l binom(m, l) Y(Y_i(u, n+l) w, m+s-l) xi
    l1 = _term_cap(du + dw, low_i, 0, n + 1)
    total = None
    for l in range(0, max(l1, -1) + 1):
        b = binom_general(m, l)
        if not b:
            continue
        ch = mod_i.mode(u, n + l).apply(w)
        if ch.is_zero():
            continue
        term = alpha.mode(ch, m + s - l).apply(xi).scale(_coerce(b, xi))
        total = term if total is None else total + term
    s1 = total

    # sum 2: sum_l (-1)^l binom(n, l) Y_k(u, m+n-l) Y(w, s+l) xi
    l2 = _term_cap(dw + dxi, low_k, -1, s)
    total = None
    for l in range(0, max(l2, -1) + 1):
        b = binom_general(n, l)
        if not b:
            continue
        mid = alpha.mode(w, s + l).apply(xi)
        if mid.is_zero():
            continue
        coeff = b if l % 2 == 0 else -b
        term = mod_k.mode(u, m + n - l).apply(mid).scale(_coerce(coeff, xi))
        total = term if total is None else total + term
    s2 = total

    # sum 3: sum_l (-1)^{l+n} binom(n, l) Y(w, n+s-l) Y_j(u, m+l) xi
    l3 = _term_cap(du + dxi, low_j, -1, m)
    total = None
    for l in range(0, max(l3, -1) + 1):
        b = binom_general(n, l)
        if not b:
            continue
        mid = mod_j.mode(u, m + l).apply(xi)
        if mid.is_zero():
            continue
        coeff = b if (l + n) % 2 == 0 else -b
        term = alpha.mode(w, n + s - l).apply(mid).scale(_coerce(coeff, xi))
        total = term if total is None else term + total
    s3 = total

    zero = alpha.target_space.zero_vector()
    s1 = s1 or zero
    s2 = s2 or zero
    s3 = s3 or zero
    return s1 - s2 + s3, window_ok


def _sole_weight(v: GradedVector) -> Fraction:
    ws = list(v.comps)
    if len(ws) != 1:
        raise ValueError("expected a homogeneous vector")
    return ws[0]


def _coerce(b, xi: GradedVector):
    return b if xi.space.exact else float(b)


def check_jacobi(alpha: IntertwinerData, modules: dict, u_vectors,
                 w_vectors, mn_window: int = 3, h_window: int = 3,
                 test_level: int = 2, tol: float = 1e-10) -> list[CheckResult]:
    """Jacobi identity over a grid of (m, n, s).  Deterministic order."""
    results = []
    exact = alpha.source_space.exact
    worst = 0.0
    bad = []
    skipped = 0
    total = 0
    d = alpha.coset
    test = [v for _, _, v in basis_vectors(alpha.source_space,
                                           alpha.source_space.lowest_weight + test_level)]
    for u_name, u in u_vectors:
        for w_name, w in w_vectors:
            for m in range(-mn_window, mn_window + 1):
                for n in range(-mn_window, mn_window + 1):
                    for h in range(-h_window, h_window + 1):
                        s = d + h
                        for xi in test:
                            total += 1
                            res, ok = jacobi_residual(alpha, modules, u, w,
                                                      m, n, s, xi)
                            if not ok:
                                skipped += 1
                                continue
                            r = residual_of(res)
                            worst = max(worst, r)
                            if (exact and r != 0.0) or (not exact and r > tol):
                                bad.append((u_name, w_name, m, n, str(s)))
    results.append(passfail(
        "jacobi_identity", alpha.label, not bad, residual=worst, exact=exact,
        details=(f"violations={bad[:4]}" if bad else
                 f"checked={total - skipped}, window_exceeded={skipped}")))
    return results


def check_translation(alpha: IntertwinerData, modules: dict, w_vectors,
                      max_shift=None, tol: float = 1e-12) -> list[CheckResult]:
    """Mode form of the translation property: Y(L_{-1}w, s) = -s Y(w, s-1)."""
    i_label = alpha.ktype[1]
    mod_i = modules[i_label]
    exact = alpha.source_space.exact
    max_shift = max_shift if max_shift is not None else alpha.source_space.cutoff
    bad = []
    worst = 0.0
    for w_name, w in w_vectors:
        dw = _sole_weight(w)
        lw = mod_i.virasoro(-1).apply(w)
        for s in alpha.s_values(dw, max_shift):
            lhs = alpha.mode(lw, s) if not lw.is_zero() else None
            rhs = alpha.mode(w, s - 1).scale(_coerce(-s, w))
            diff = rhs if lhs is None else (lhs - rhs)
            if not diff.is_zero(tol=0.0 if exact else tol):
                bad.append((w_name, str(s)))
                worst = max(worst, diff.max_abs())
    return [passfail("translation_property", alpha.label, not bad,
                     residual=worst, exact=exact,
                     details=f"violations={bad[:4]}" if bad else "")]


def check_energy_shift(alpha: IntertwinerData, w_vectors, max_shift=None
                       ) -> list[CheckResult]:
    """Every nonzero block of Y(w, s) maps weight q to q - s - 1 + weight(w)."""
    bad = []
    max_shift = max_shift if max_shift is not None else alpha.source_space.cutoff
    for w_name, w in w_vectors:
        dw = _sole_weight(w)
        for s in alpha.s_values(dw, max_shift):
            op = alpha.mode(w, s)
            want = -s - 1 + dw
            for (tw, sw) in op.blocks:
                if tw - sw != want:
                    bad.append((w_name, str(s), str(tw), str(sw)))
    return [passfail("energy_shift", alpha.label, not bad,
                     exact=alpha.source_space.exact,
                     details=f"violations={bad[:4]}" if bad else "")]


def check_module_unitarity(module: ModuleData, generators, theta,
                           mode_window: int = 4, tol: float = 1e-10
                           ) -> list[CheckResult]:
    """Adjoint relation for generator modes; unitarity then follows for
    generated modules."""
    space = module.space
    exact = space.exact
    voa = module.voa
    bad = []
    worst = 0.0
    for name, v in generators:
        dv = _sole_weight(v)
        if dv.denominator != 1:
            raise ValueError("generator weights must be integers")
        tv = theta(v)
        l1_powers = [tv]
        while True:
            nxt = voa.virasoro(1).apply(l1_powers[-1])
            if nxt.is_zero():
                break
            l1_powers.append(nxt)
        sign = rat(-1) ** int(dv)
        for n in range(-mode_window, mode_window + 1):
            lhs = module.mode(v, n).dagger()
            total = None
            for mm, vec in enumerate(l1_powers):
                opp = module.mode(vec, -n - mm - 2 + 2 * int(dv))
                coeff = sign * rat(1, math.factorial(mm))
                opp = opp.scale(coeff if exact else float(coeff))
                total = opp if total is None else total + opp
            diff = lhs - total
            ok_blocks = True
            for (tw, sw), blk in diff.blocks.items():
                guard = max(abs(n), 1) + int(dv)
                if sw + guard > space.cutoff and tw + guard > space.cutoff:
                    continue
                if not mat_is_zero(blk, tol=0.0 if exact else tol):
                    ok_blocks = False
            if not ok_blocks:
                bad.append((name, n))
                worst = max(worst, diff.max_abs())
    return [passfail("module_unitarity", module.label, not bad, residual=worst,
                     exact=exact,
                     details=(f"violations={bad[:6]}" if bad else
                              "adjoint relation on generators; module unitary"))]


def check_homomorphism(phi: BlockOperator, m1: ModuleData, m2: ModuleData,
                       max_level=None, mode_window: int = 3,
                       tol: float = 1e-10) -> list[CheckResult]:
    """phi Y_1(v, n) = Y_2(v, n) phi for basis v, and grading preservation."""
    exact = m1.space.exact
    graded_ok = all(tw == sw for (tw, sw) in phi.blocks)
    bad = []
    worst = 0.0
    top = m1.voa.space.cutoff if max_level is None else frac(max_level)
    for w, idx, v in basis_vectors(m1.voa.space, top):
        for n in range(-mode_window, mode_window + 1):
            lhs = phi.compose(m1.mode(v, n))
            rhs = m2.mode(v, n).compose(phi)
            diff = lhs - rhs
            bad_here = False
            for (tw, sw), blk in diff.blocks.items():
                if sw + max(0, -n) + int(w) > m1.space.cutoff:
                    continue
                if not mat_is_zero(blk, tol=0.0 if exact else tol):
                    bad_here = True
                    worst = max(worst, diff.max_abs())
            if bad_here:
                bad.append((m1.voa.space.basis_names[w][idx], n))
    ok = graded_ok and not bad
    return [passfail("module_homomorphism", f"{m1.label}->{m2.label}", ok,
                     residual=worst, exact=exact,
                     details=("grading violated; " if not graded_ok else "") +
                             (f"violations={bad[:4]}" if bad else ""))]
