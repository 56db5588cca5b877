"""Intertwiner transforms: braiding, contragredient, adjoint, conjugate.

Each transform returns a new IntertwinerData whose modes are computed lazily
from the input's mode family.  Phases exp(+-i pi s) are exact eighth roots of
unity whenever 4s is an integer, which covers the built-in models.
"""

from __future__ import annotations

import math
import threading
from fractions import Fraction

from .graded import (BlockOperator, GradedSpace, GradedVector, frac, mat_conj,
                     twist_operator, zeros)
from .report import CheckResult, passfail
from .scalars import Cyclo8, exact_phase_half_turns, rat, to_complex
from .voa import IntertwinerData, ModuleData, basis_vectors


def _phase(exact: bool, half_turns: Fraction):
    """exp(i pi half_turns)."""
    if exact:
        return exact_phase_half_turns(half_turns)
    import cmath
    return cmath.exp(1j * math.pi * float(half_turns))


def _basis_key(w) -> tuple | None:
    """Hashable identity for a unit basis vector, else None."""
    if isinstance(w, tuple):
        return w
    if len(w.comps) != 1:
        return None
    ww, col = next(iter(w.comps.items()))
    idx = None
    for a, val in enumerate(col):
        nz = (val != 0) if isinstance(val, complex) else bool(val)
        if nz:
            if idx is not None:
                return None
            if not (val == 1 or val == 1.0):
                return None
            idx = a
    return (ww, idx) if idx is not None else None


class MemoSource:
    def __init__(self, source):
        self.source = source
        self._cache: dict = {}
        self._lock = threading.Lock()

    def mode(self, w, s):
        bk = _basis_key(w)
        key = (bk, s) if bk is not None else None
        if key is not None:
            with self._lock:
                if key in self._cache:
                    return self._cache[key]
        op = self.source.mode(w, s)
        if key is not None:
            with self._lock:
                self._cache[key] = op
        return op


def _state_vectors(space: GradedSpace):
    """All basis vectors with their (weight, index)."""
    for w in space.weights:
        for idx in range(space.dims[w]):
            yield w, idx, space.basis_vector(w, idx)


def cross_matrix(alpha: IntertwinerData, w_src: GradedVector, s: Fraction
                 ) -> BlockOperator:
    """Matrix of charge -> target, columns Y(charge basis state, s) w_src.

    Treats the charge slot as the variable: maps W_i -> W_k for fixed source
    vector w_src in W_j.  Uses the mode family's fast cross application when
    available.
    """
    fast = alpha.cross(w_src, s)
    if fast is not None:
        return fast
    exact = alpha.charge_space.exact
    cols: dict = {}
    for cw in alpha.charge_space.weights:
        for idx in range(alpha.charge_space.dims[cw]):
            vec = alpha.charge_space.basis_vector(cw, idx)
            out = alpha.mode(vec, s).apply(w_src)
            cols[(cw, idx)] = out
    blocks: dict = {}
    for (cw, idx), out in cols.items():
        for tw, comp in out.comps.items():
            key = (tw, cw)
            if key not in blocks:
                blocks[key] = zeros((alpha.target_space.dims[tw],
                                     alpha.charge_space.dims[cw]), exact)
            blocks[key][:, idx] = blocks[key][:, idx] + comp
    return BlockOperator(alpha.charge_space, alpha.target_space, blocks,
                         exact=exact)


class BraidSource:
    """(B+-Y)(w, x) v = e^{x L_{-1}} Y(v, e^{+-i pi} x) w, mode by mode."""

    def __init__(self, alpha: IntertwinerData, sign: int, l_minus1: BlockOperator):
        self.alpha = alpha
        self.sign = sign  # +1 or -1
        self.l_minus1 = l_minus1
        self._lpow: list[BlockOperator] = [BlockOperator.identity(l_minus1.source),
                                           l_minus1]
        self._lock = threading.Lock()

    def _lpower(self, m: int) -> BlockOperator:
        with self._lock:
            while len(self._lpow) <= m:
                self._lpow.append(self.l_minus1.compose(self._lpow[-1]))
            return self._lpow[m]

    def mode(self, w, t) -> BlockOperator:
        """Mode acting W_i -> W_k for a source-slot vector w in W_j."""
        alpha = self.alpha
        exact = alpha.charge_space.exact
        if isinstance(w, tuple):
            wvec = None
            raise TypeError("braided modes take charge vectors, not states")
        dw = max(w.comps) if w.comps else frac(0)
        total = None
        top_i = alpha.charge_space.cutoff
        low_k = alpha.target_space.lowest_weight
        m = 0
        while True:
            s = frac(t) + m
            # Y(charge, s) w is zero once its energy drops below the target floor
            if top_i - s - 1 + dw < low_k:
                break
            cm = cross_matrix(alpha, w, s)
            if not cm.is_zero():
                half_turns = -(frac(t) + m + 1) if self.sign > 0 else (frac(t) + m + 1)
                ph = _phase(exact, frac(half_turns))
                coeff = ph * rat(1, math.factorial(m)) if exact else (
                    ph / math.factorial(m))
                term = self._lpower(m).compose(cm).scale(coeff)
                total = term if total is None else total + term
            m += 1
            if m > 4 * int(alpha.target_space.cutoff) + 8:
                break
        if total is None:
            return BlockOperator.zero(alpha.charge_space, alpha.target_space)
        return total


def braid(modules: dict, alpha: IntertwinerData, sign: int,
          label: str = None) -> IntertwinerData:
    """B+- alpha, of type (k; j i) when alpha has type (k; i j)."""
    k, i, j = alpha.ktype
    lm1 = modules[k].virasoro(-1)
    src = MemoSource(BraidSource(alpha, sign, lm1))
    lbl = label or (("B+" if sign > 0 else "B-") + alpha.label)
    return IntertwinerData(lbl, (k, j, i), alpha.source_space,
                           alpha.charge_space, alpha.target_space,
                           alpha.coset, src)


def transpose_to_duals(op: BlockOperator, src_dual: GradedSpace,
                       tgt_dual: GradedSpace) -> BlockOperator:
    """Transpose W_j -> W_k into W_k' -> W_j' using the gram pairings."""
    blocks = {}
    for (tw, sw), m in op.blocks.items():
        gj_inv = op.source.gram_inv(sw)
        gk = op.target.gram[tw]
        blocks[(sw, tw)] = gj_inv.dot(m.T).dot(gk)
    shift = -op.energy_shift if op.energy_shift is not None else None
    return BlockOperator(tgt_dual, src_dual, blocks, shift, exact=op.exact)


class ContragredientSource:
    """C^{+-1}: modes e^{-+ i pi D_w} sum_m Y(L1^m w, -s-m-2+2D_w)^t / m!."""

    def __init__(self, alpha: IntertwinerData, sign: int, l_plus1: BlockOperator,
                 src_dual: GradedSpace, tgt_dual: GradedSpace):
        self.alpha = alpha
        self.sign = sign  # +1 for C, -1 for C^{-1}
        self.l_plus1 = l_plus1
        self.src_dual = src_dual
        self.tgt_dual = tgt_dual

    def mode(self, w, s) -> BlockOperator:
        alpha = self.alpha
        exact = alpha.charge_space.exact
        if isinstance(w, tuple):
            raise TypeError("contragredient modes take charge vectors")
        dw = _homogeneous_weight(w)
        total = None
        vec = w
        m = 0
        while vec is not None and not vec.is_zero():
            half_turns = -2 * dw if self.sign > 0 else 2 * dw
            op = alpha.mode(vec, -frac(s) - m - 2 + 2 * dw)
            if not op.is_zero():
                opt = transpose_to_duals(op, self.src_dual, self.tgt_dual)
                ph = _phase(exact, frac(half_turns) / 2)
                coeff = ph * rat(1, math.factorial(m)) if exact else (
                    ph / math.factorial(m))
                term = opt.scale(coeff)
                total = term if total is None else total + term
            vec = self.l_plus1.apply(vec)
            m += 1
        if total is None:
            return BlockOperator.zero(self.tgt_dual, self.src_dual)
        return total


def _homogeneous_weight(v: GradedVector) -> Fraction:
    ws = list(v.comps)
    if len(ws) != 1:
        raise ValueError("transform needs a homogeneous charge vector")
    return ws[0]


def contragredient(model, alpha: IntertwinerData, sign: int,
                   label: str = None) -> IntertwinerData:
    """C^{+-1} alpha of type (j'; i k') when alpha has type (k; i j)."""
    k, i, j = alpha.ktype
    jd, kd = model.dual_of[j], model.dual_of[k]
    src = MemoSource(ContragredientSource(
        alpha, sign, model.modules[i].virasoro(1),
        model.modules[jd].space, model.modules[kd].space))
    lbl = label or (("C" if sign > 0 else "C~") + alpha.label)
    coset = (2 * alpha.charge_space.lowest_weight - alpha.coset) % 1
    return IntertwinerData(lbl, (jd, i, kd), alpha.charge_space,
                           model.modules[kd].space, model.modules[jd].space,
                           coset, src)


class AdjointSource:
    """Y*(conj w, s) = sum_m e^{i pi D_w}/m! Y(L1^m w, -s-m-2+2D_w)^dagger."""

    def __init__(self, model, alpha: IntertwinerData):
        self.model = model
        self.alpha = alpha

    def mode(self, wbar, s) -> BlockOperator:
        alpha = self.alpha
        exact = alpha.charge_space.exact
        if isinstance(wbar, tuple):
            raise TypeError("adjoint modes take charge vectors in the dual space")
        # conj back into the charge space of alpha
        w = GradedVector(alpha.charge_space,
                         {ww: mat_conj(c) for ww, c in wbar.comps.items()},
                         exact=wbar.exact)
        dw = _homogeneous_weight(w)
        i_label = alpha.ktype[1]
        l1 = self.model.modules[i_label].virasoro(1)
        total = None
        vec = w
        m = 0
        while vec is not None and not vec.is_zero():
            op = alpha.mode(vec, -frac(s) - m - 2 + 2 * dw)
            if not op.is_zero():
                ph = _phase(exact, frac(dw))
                coeff = ph * rat(1, math.factorial(m)) if exact else (
                    ph / math.factorial(m))
                term = op.dagger().scale(coeff)
                total = term if total is None else total + term
            vec = l1.apply(vec)
            m += 1
        if total is None:
            return BlockOperator.zero(alpha.target_space, alpha.source_space)
        return total


def adjoint(model, alpha: IntertwinerData, label: str = None) -> IntertwinerData:
    """alpha* of type (j; i' k) when alpha has type (k; i j); needs unitarity."""
    k, i, j = alpha.ktype
    idual = model.dual_of[i]
    src = MemoSource(AdjointSource(model, alpha))
    coset = (2 * alpha.charge_space.lowest_weight - alpha.coset) % 1
    return IntertwinerData(label or (alpha.label + "*"), (j, idual, k),
                           model.modules[idual].space, alpha.target_space,
                           alpha.source_space, coset, src)


class ConjugateSource:
    """conj(Y)(conj w, x) = C_k Y(w, x) C_j^{-1}: conjugated blocks."""

    def __init__(self, model, alpha: IntertwinerData, src_dual, tgt_dual):
        self.model = model
        self.alpha = alpha
        self.src_dual = src_dual
        self.tgt_dual = tgt_dual

    def mode(self, wbar, s) -> BlockOperator:
        alpha = self.alpha
        w = GradedVector(alpha.charge_space,
                         {ww: mat_conj(c) for ww, c in wbar.comps.items()},
                         exact=wbar.exact)
        op = alpha.mode(w, s)
        blocks = {kk: mat_conj(b) for kk, b in op.blocks.items()}
        return BlockOperator(self.src_dual, self.tgt_dual, blocks,
                             energy_shift=op.energy_shift, exact=op.exact)


def conjugate(model, alpha: IntertwinerData, label: str = None) -> IntertwinerData:
    """conj(alpha) of type (k'; i' j')."""
    k, i, j = alpha.ktype
    idual, jdual, kdual = (model.dual_of[i], model.dual_of[j], model.dual_of[k])
    src = MemoSource(ConjugateSource(model, alpha, model.modules[jdual].space,
                                     model.modules[kdual].space))
    return IntertwinerData(label or ("~" + alpha.label), (kdual, idual, jdual),
                           model.modules[idual].space,
                           model.modules[jdual].space,
                           model.modules[kdual].space,
                           alpha.coset, src)


def creation(model, i: str, label: str = None) -> IntertwinerData:
    """B+- Y_i of type (i; i 0); both signs agree for integer modes."""
    y_i = model.modules[i].as_intertwiner()
    return braid(model.modules, y_i, +1, label=label or f"create[{i}]")


def annihilation(model, i: str, label: str = None) -> IntertwinerData:
    """adjoint(creation(i)) of type (0; i' i)."""
    return adjoint(model, creation(model, i), label=label or f"annihilate[{i}]")


def reindex_target(alpha: IntertwinerData, iso: BlockOperator,
                   new_target_label: str, label: str = None) -> IntertwinerData:
    """Post-compose the mode family with a module isomorphism on the target."""

    class _Re:
        def mode(self, w, s, _a=alpha, _iso=iso):
            return _iso.compose(_a.mode(w, s))

    k, i, j = alpha.ktype
    return IntertwinerData(label or alpha.label, (new_target_label, i, j),
                           alpha.charge_space, alpha.source_space, iso.target,
                           alpha.coset, _Re())


def vacuum_pair(model, i: str) -> IntertwinerData:
    """The (0; i i') intertwiner C^{-1} of the creation operator, with the
    contragredient vacuum identified with the vacuum module."""
    cre = creation(model, i)
    raw = contragredient(model, cre, -1, label=f"pair[{i}]")
    iso0 = model.dual_iso("0'")
    return reindex_target(raw, iso0, "0", label=f"pair[{i}]")


# ---------------------------------------------------------------------------
# comparisons and checks

def modes_equal(a: IntertwinerData, b: IntertwinerData, charge_vectors,
                max_shift, tol: float = 0.0) -> tuple[bool, float]:
    """Compare two mode families on homogeneous charge vectors over a window."""
    worst = 0.0
    ok = True
    for _, v in charge_vectors:
        dw = _homogeneous_weight(v)
        for s in a.s_values(dw, frac(max_shift)):
            diff = a.mode(v, s) - b.mode(v, s)
            if not diff.is_zero(tol=tol):
                ok = False
                worst = max(worst, diff.max_abs())
    return ok, worst


def low_charge_vectors(space: GradedSpace, levels: int = 1):
    out = []
    top = space.lowest_weight + levels
    for w, idx, v in basis_vectors(space, top):
        out.append((f"{space.label}[{w}:{idx}]", v))
    return out


def check_braid_involution(model, alpha: IntertwinerData, levels: int = 1,
                           max_shift=None) -> CheckResult:
    k, i, j = alpha.ktype
    max_shift = max_shift if max_shift is not None else alpha.target_space.cutoff
    back = braid(model.modules, braid(model.modules, alpha, +1), -1)
    vecs = low_charge_vectors(alpha.charge_space, levels)
    ok, worst = modes_equal(alpha, back, vecs, max_shift,
                            tol=0.0 if alpha.charge_space.exact else 1e-9)
    return passfail("braid_involution", alpha.label, ok, residual=worst,
                    exact=alpha.charge_space.exact)


def check_contragredient_involution(model, alpha: IntertwinerData,
                                    levels: int = 1, max_shift=None) -> CheckResult:
    max_shift = max_shift if max_shift is not None else alpha.target_space.cutoff
    back = contragredient(model, contragredient(model, alpha, +1), -1)
    vecs = low_charge_vectors(alpha.charge_space, levels)
    ok, worst = modes_equal(alpha, back, vecs, max_shift,
                            tol=0.0 if alpha.charge_space.exact else 1e-9)
    return passfail("contragredient_involution", alpha.label, ok, residual=worst,
                    exact=alpha.charge_space.exact)


def check_adjoint_involution(model, alpha: IntertwinerData, levels: int = 1,
                             max_shift=None) -> CheckResult:
    max_shift = max_shift if max_shift is not None else alpha.target_space.cutoff
    back = adjoint(model, adjoint(model, alpha))
    vecs = low_charge_vectors(alpha.charge_space, levels)
    ok, worst = modes_equal(alpha, back, vecs, max_shift,
                            tol=0.0 if alpha.charge_space.exact else 1e-9)
    return passfail("adjoint_involution", alpha.label, ok, residual=worst,
                    exact=alpha.charge_space.exact)


def check_conjugate_involution(model, alpha: IntertwinerData, levels: int = 1,
                               max_shift=None) -> CheckResult:
    max_shift = max_shift if max_shift is not None else alpha.target_space.cutoff
    back = conjugate(model, conjugate(model, alpha))
    vecs = low_charge_vectors(alpha.charge_space, levels)
    ok, worst = modes_equal(alpha, back, vecs, max_shift,
                            tol=0.0 if alpha.charge_space.exact else 1e-9)
    return passfail("conjugate_involution", alpha.label, ok, residual=worst,
                    exact=alpha.charge_space.exact)


def check_annihilation_consistency(model, i: str, levels: int = 1,
                                   max_shift=None) -> CheckResult:
    """adjoint(creation(i)) agrees with C^{-1} B+- Y_{i'}, both of type (0; i' i)."""
    ann = annihilation(model, i)
    idual = model.dual_of[i]
    y_idual = model.modules[idual].as_intertwiner()
    alt_raw = contragredient(model, braid(model.modules, y_idual, +1), -1)
    iso0 = model.dual_iso("0'")
    alt = reindex_target(alt_raw, iso0, "0")
    max_shift = max_shift if max_shift is not None else model.modules[i].space.cutoff
    vecs = low_charge_vectors(ann.charge_space, levels)
    ok, worst = modes_equal(ann, alt, vecs, max_shift,
                            tol=0.0 if model.exact else 1e-9)
    return passfail("annihilation_consistency", f"[{i}]", ok, residual=worst,
                    exact=model.exact)


def twist_relations_check(model, i: str, levels: int = 1, max_shift=None
                          ) -> list[CheckResult]:
    """The two mode-level relations between the (0; i i') and (0; i' i)
    operators through the twist exp(2 i pi L0)."""
    pair = vacuum_pair(model, i)            # (0; i i')
    ann = annihilation(model, i)            # (0; i' i)
    bp = braid(model.modules, ann, +1)      # (0; i i')
    bm = braid(model.modules, ann, -1)
    w_i = model.modules[i].space
    tw = twist_operator(w_i)
    tw_inv = twist_inverse(w_i)
    tw_src = twist_operator(pair.source_space)
    tw_src_inv = twist_inverse(pair.source_space)
    max_shift = max_shift if max_shift is not None else w_i.cutoff
    vecs = low_charge_vectors(w_i, levels)
    results = []
    exact = model.exact

    worst = 0.0
    ok = True
    for _, v in vecs:
        dw = _homogeneous_weight(v)
        vp = tw.apply(v)
        vm = tw_inv.apply(v)
        for s in pair.s_values(dw, frac(max_shift)):
            lhs = pair.mode(v, s)
            d1 = lhs - bp.mode(vp, s)
            d2 = lhs - bm.mode(vm, s)
            # operator-side variants: twist acting on the source space
            d3 = lhs - bp.mode(v, s).compose(tw_src)
            d4 = lhs - bm.mode(v, s).compose(tw_src_inv)
            for d in (d1, d2, d3, d4):
                if not d.is_zero(tol=0.0 if exact else 1e-9):
                    ok = False
                    worst = max(worst, d.max_abs())
    results.append(passfail("twist_relations", f"[{i}]", ok, residual=worst,
                            exact=exact))
    return results


def twist_inverse(space: GradedSpace) -> BlockOperator:
    blocks = {}
    for w in space.weights:
        k = (-w * 8) % 8
        phase = Cyclo8.zeta(int(w * -8))
        n = space.dims[w]
        mat = zeros((n, n), space.exact)
        val = phase if space.exact else to_complex(phase)
        for idx in range(n):
            mat[idx, idx] = val
        blocks[(w, w)] = mat
    return BlockOperator(space, space, blocks, energy_shift=frac(0),
                         exact=space.exact)


def fusion_rule_symmetries(n_table: dict, dual_map: dict) -> list[CheckResult]:
    """The five equalities among fusion rules, plus the vacuum rows."""
    bad = []
    labels = sorted({lbl for key in n_table for lbl in key})

    def n_of(k, i, j):
        return n_table.get((k, i, j), 0)

    for (k, i, j), val in sorted(n_table.items()):
        kd, id_, jd = dual_map[k], dual_map[i], dual_map[j]
        rules = [("N^jbar_{i kbar}", n_of(jd, i, kd)),
                 ("N^k_{ji}", n_of(k, j, i)),
                 ("N^kbar_{ibar jbar}", n_of(kd, id_, jd)),
                 ("N^j_{ibar k}", n_of(j, id_, k))]
        for name, other in rules:
            if other != val:
                bad.append(((k, i, j), name, val, other))
    for jlbl in labels:
        for klbl in labels:
            want = 1 if jlbl == klbl else 0
            if n_of(klbl, "0", jlbl) != want:
                bad.append((("vacuum-row", klbl, jlbl),))
    return [passfail("fusion_rule_symmetries", "N", not bad, exact=True,
                     details=f"violations={bad[:4]}" if bad else "")]
