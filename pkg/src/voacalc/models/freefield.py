"""Free-field (Heisenberg / rank-1 lattice) state spaces and mode operators.

States are alpha(-n1)...alpha(-nk) e_gamma with gamma = q/sqrt(2), q integer,
[alpha(m), alpha(n)] = m delta_{m,-n}, alpha(0) e_gamma = (q/sqrt(2)) e_gamma.
Charge-vector insertions act through normal-ordered operators

    E-(mu,z) E+(mu,z) (shift by mu) z^{<mu,gamma>} c(p, q)

with derivative factors d^{n-1}alpha(z)/(n-1)! for each alpha(-n) in the
insertion, all creation parts to the left of all annihilation parts, and each
zero mode acting with the source-sector eigenvalue.  The cocycle phase on the
charge-q sector is c(p, q) = z8^(2 p^2 q + p q), which makes the two-cocycle
on the even lattice satisfy eps(g, g) = -1 on the generator g = sqrt(2).

Normal-ordered assembly never passes through energies above max(source,
target), so every stored block is exact at the truncation.
"""

from __future__ import annotations

import math
import threading
from fractions import Fraction
from functools import lru_cache

import numpy as np

from ..graded import BlockOperator, GradedSpace, GradedVector, frac, zeros
from ..scalars import Cyclo8, rat

State = tuple[int, tuple[int, ...]]  # (charge q in units 1/sqrt(2), partition)


@lru_cache(maxsize=None)
def partitions(n: int) -> tuple[tuple[int, ...], ...]:
    """All partitions of n as descending tuples."""
    if n == 0:
        return ((),)
    out = []

    def rec(remaining, maxpart, prefix):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        for part in range(min(remaining, maxpart), 0, -1):
            rec(remaining - part, part, prefix + [part])

    rec(n, n, [])
    return tuple(out)


@lru_cache(maxsize=None)
def partition_norm_sq(parts: tuple[int, ...]):
    """<state|state> = prod_n n^{c_n} c_n! for the unnormalized basis."""
    val = rat(1)
    counts = {}
    for p in parts:
        counts[p] = counts.get(p, 0) + 1
    for n, c in counts.items():
        val = val * rat(n) ** c * math.factorial(c)
    return val


def state_level(state: State) -> int:
    return sum(state[1])


def state_weight(state: State) -> Fraction:
    q, parts = state
    return Fraction(q * q, 4) + sum(parts)


def state_name(state: State) -> str:
    q, parts = state
    osc = "".join(f"a(-{n})" for n in parts)
    return f"{osc}|q={q}>" if q or True else osc


def sqrt2_half_times(p: int) -> Cyclo8:
    """p * sqrt(2)/2 as an exact scalar."""
    return Cyclo8(0, rat(p, 2), 0, rat(-p, 2))


def cocycle_phase(p: int, q: int) -> Cyclo8:
    """Phase of a charge-p insertion acting on the charge-q sector."""
    return Cyclo8.zeta(2 * p * p * q + p * q)


@lru_cache(maxsize=None)
def factor_coeff(lam: int, m: int):
    """Coefficient of alpha(m) z^{-m-lam} in d^{lam-1}alpha(z)/(lam-1)!."""
    k = lam - 1
    top = m + k
    num = 1
    for j in range(k):
        num *= top - j
    val = rat(num, math.factorial(k))
    return -val if k % 2 else val


class SpaceWithStates:
    """GradedSpace plus its concrete free-field basis states."""

    def __init__(self, label: str, charges: tuple[int, ...], cutoff: Fraction,
                 exact: bool, lowest_weight: Fraction, dual_label: str = None):
        self.charges = tuple(sorted(charges))
        self.cutoff = frac(cutoff)
        states_by_weight: dict[Fraction, list[State]] = {}
        for q in self.charges:
            base = Fraction(q * q, 4)
            if base > self.cutoff:
                continue
            for level in range(int(self.cutoff - base) + 1):
                for parts in partitions(level):
                    st = (q, parts)
                    states_by_weight.setdefault(base + level, []).append(st)
        dims, gram, names = {}, {}, {}
        self.states: dict[Fraction, list[State]] = {}
        self.index: dict[State, tuple[Fraction, int]] = {}
        for w in sorted(states_by_weight):
            sts = sorted(states_by_weight[w])
            self.states[w] = sts
            dims[w] = len(sts)
            g = zeros((len(sts), len(sts)), exact)
            for idx, st in enumerate(sts):
                g[idx, idx] = partition_norm_sq(st[1]) if exact else float(
                    partition_norm_sq(st[1]))
                self.index[st] = (w, idx)
            gram[w] = g
            names[w] = [state_name(st) for st in sts]
        self.space = GradedSpace(label, dims, gram, cutoff=self.cutoff,
                                 lowest_weight=lowest_weight, unitary=True,
                                 exact=exact, basis_names=names,
                                 dual_label=dual_label)

    def vector(self, terms: dict[State, object]) -> GradedVector:
        comps: dict[Fraction, np.ndarray] = {}
        for st, coeff in terms.items():
            w, idx = self.index[st]
            if w not in comps:
                comps[w] = zeros(self.space.dims[w], self.space.exact)
            comps[w][idx] = comps[w][idx] + coeff
        return GradedVector(self.space, comps, exact=True)

    def state_vector(self, state: State) -> GradedVector:
        return self.vector({state: Cyclo8(1) if self.space.exact else 1.0})


class FreeFieldTheory:
    """Shared mode computations between two SpaceWithStates objects."""

    def __init__(self, exact: bool = True):
        self.exact = exact
        self._lock = threading.Lock()
        self._term_cache: dict = {}

    def one(self):
        return Cyclo8(1) if self.exact else 1.0

    def _scal(self, x):
        from ..scalars import to_complex
        return x if self.exact else to_complex(x)

    def mode_terms(self, p: int, lam: tuple[int, ...], s: Fraction,
                   src_state: State, src_lattice: SpaceWithStates,
                   tgt_lattice: SpaceWithStates,
                   ) -> dict[State, object]:
        key = (p, lam, s, src_state, src_lattice.space.label,
               tgt_lattice.space.label)
        with self._lock:
            hit = self._term_cache.get(key)
        if hit is not None:
            return hit
        out = self._mode_terms_impl(p, lam, s, src_state, src_lattice,
                                    tgt_lattice)
        with self._lock:
            self._term_cache[key] = out
        return out

    def _mode_terms_impl(self, p: int, lam: tuple[int, ...], s: Fraction,
                         src_state: State, src_lattice: SpaceWithStates,
                         tgt_lattice: SpaceWithStates,
                         ) -> dict[State, object]:
        """Apply the s-th mode of the insertion (p, lam) to a basis state.

        Returns target-state -> exact coefficient (cocycle included, global
        normalization excluded).
        """
        q, kappa = src_state
        qt = q + p
        if qt not in tgt_lattice.charges:
            return {}
        base_t = Fraction(qt * qt, 4)
        if base_t > tgt_lattice.cutoff:
            return {}
        max_tgt_level = int(tgt_lattice.cutoff - base_t)
        d_tot = -s - 1 - Fraction(p * q, 2)
        if d_tot.denominator != 1:
            return {}
        d_tot = int(d_tot)

        mu_hat = sqrt2_half_times(p)
        q_hat = sqrt2_half_times(q)
        out: dict[State, object] = {}
        phase = cocycle_phase(p, q)

        kappa_counts0 = {}
        for part in kappa:
            kappa_counts0[part] = kappa_counts0.get(part, 0) + 1

        def finish(counts, creators, coeff, zdeg):
            # E+ removals, then E- creations to reach total z-degree d_tot
            level_now = sum(n * c for n, c in counts.items())
            created = sum(creators)
            self._eplus_eminus(counts, creators, coeff, zdeg, d_tot, qt,
                               max_tgt_level, mu_hat, p, out)

        def rec(j, counts, creators, coeff, zdeg):
            if j == len(lam):
                finish(counts, creators, coeff, zdeg)
                return
            lj = lam[j]
            # annihilator choices
            for n in list(counts):
                if counts[n] > 0:
                    fc = factor_coeff(lj, n)
                    if fc:
                        c2 = dict(counts)
                        c2[n] -= 1
                        rec(j + 1, c2, creators,
                            coeff * (fc * rat(n) * rat(counts[n])), zdeg - n - lj)
            # zero mode (source-sector eigenvalue)
            if q != 0:
                fc = factor_coeff(lj, 0)
                if fc:
                    rec(j + 1, counts, creators, coeff * (fc * q_hat), zdeg - lj)
            # creators
            budget = max_tgt_level - sum(creators)
            for mabs in range(1, budget + 1):
                fc = factor_coeff(lj, -mabs)
                if fc:
                    rec(j + 1, counts, creators + (mabs,), coeff * fc,
                        zdeg + mabs - lj)

        rec(0, kappa_counts0, (), phase, 0)
        return out

    def _eplus_eminus(self, counts, creators, coeff, zdeg, d_tot, qt,
                      max_tgt_level, mu_hat, p, out):
        removable = sorted(n for n, c in counts.items() if c > 0)

        def place(coeff, counts, zdeg):
            # choose E- degree a = d_tot - zdeg, distribute as a partition
            a = d_tot - zdeg
            if a < 0:
                return
            base_level = sum(n * c for n, c in counts.items()) + sum(creators)
            if base_level + a > max_tgt_level:
                return
            if a == 0:
                self._emit(counts, creators, (), coeff, qt, out)
            elif p != 0:
                for rho in partitions(a):
                    c = coeff
                    mult: dict[int, int] = {}
                    for n in rho:
                        mult[n] = mult.get(n, 0) + 1
                    for n, cn in mult.items():
                        c = c * (exact_ipow(mu_hat, cn) * rat(1, n ** cn * math.factorial(cn)))
                    self._emit(counts, creators, rho, c, qt, out)

        if p == 0:
            place(coeff, counts, zdeg)
            return

        # enumerate E+ removal sub-multisets of the current partition
        def rec_remove(idx, counts, coeff, zdeg):
            if idx == len(removable):
                place(coeff, counts, zdeg)
                return
            n = removable[idx]
            avail = counts.get(n, 0)
            rec_remove(idx + 1, counts, coeff, zdeg)
            c = coeff
            cnt = dict(counts)
            for k in range(1, avail + 1):
                # one more alpha(n) from E+: series coeff (-mu_hat/n)^k / k!
                c = c * ((-mu_hat) * rat(1, n)) * rat(n) * rat(cnt[n]) * rat(1, k)
                cnt = dict(cnt)
                cnt[n] -= 1
                rec_remove(idx + 1, cnt, c, zdeg - k * n)

        rec_remove(0, dict(counts), coeff, zdeg)

    def _emit(self, counts, creators, rho, coeff, qt, out):
        parts = []
        for n, c in counts.items():
            parts.extend([n] * c)
        parts.extend(creators)
        parts.extend(rho)
        st = (qt, tuple(sorted(parts, reverse=True)))
        if st in out:
            out[st] = out[st] + coeff
        else:
            out[st] = coeff


def exact_ipow(x, k: int):
    out = rat(1)
    for _ in range(k):
        out = out * x
    return out


def current_mode(sws: SpaceWithStates, n: int) -> BlockOperator:
    """alpha(n) on a free-field space; alpha(0) eigenvalue is q*sqrt(2)/2."""
    space = sws.space
    blocks: dict = {}
    for sw in space.weights:
        tw = sw - n
        if tw not in space.dims:
            continue
        mat = zeros((space.dims[tw], space.dims[sw]), space.exact)
        nz = False
        for col, (q, parts) in enumerate(sws.states[sw]):
            if n == 0:
                if q:
                    val = sqrt2_half_times(q)
                    mat[col, col] = mat[col, col] + (val if space.exact
                                                     else complex(val))
                    nz = True
            elif n > 0:
                cnt = parts.count(n)
                if cnt:
                    rest = list(parts)
                    rest.remove(n)
                    st2 = (q, tuple(rest))
                    _, row = sws.index[st2]
                    mat[row, col] = mat[row, col] + (rat(n * cnt) if space.exact
                                                     else float(n * cnt))
                    nz = True
            else:
                st2 = (q, tuple(sorted(parts + (-n,), reverse=True)))
                if st2 in sws.index:
                    _, row = sws.index[st2]
                    mat[row, col] = mat[row, col] + (rat(1) if space.exact else 1.0)
                    nz = True
        if nz:
            blocks[(tw, sw)] = mat
    return BlockOperator(space, space, blocks, energy_shift=frac(-n),
                         exact=space.exact)


def sugawara_mode(sws: SpaceWithStates, n: int) -> BlockOperator:
    """Oracle Virasoro: L_n = (1/2) sum_k :alpha(-k) alpha(n+k):."""
    space = sws.space
    total = BlockOperator.zero(space, space, energy_shift=frac(-n))
    half = rat(1, 2) if space.exact else 0.5
    top = int(space.cutoff) + 1
    for k in range(-2 * top - abs(n), 2 * top + abs(n) + 1):
        a, b = -k, n + k
        lo, hi = (a, b) if a <= b else (b, a)
        term = current_mode(sws, lo).compose(current_mode(sws, hi))
        total = total + term.scale(half)
    return total


class ModeFamily:
    """Lazy mode family for one intertwiner type: (target; charge source)."""

    def __init__(self, theory: FreeFieldTheory, charge: SpaceWithStates,
                 source: SpaceWithStates, target: SpaceWithStates,
                 normalization=None, label: str = ""):
        self.theory = theory
        self.charge = charge
        self.source = source
        self.target = target
        self.normalization = normalization
        self.label = label
        self._cache: dict = {}
        self._lock = threading.Lock()

    def coset(self) -> Fraction:
        """Representative d in [0,1) with modes supported on d + Z."""
        p = self.charge.charges[0]
        q = self.source.charges[0]
        return (Fraction(-1) - Fraction(p * q, 2)) % 1

    def state_mode(self, w_state: State, s: Fraction) -> BlockOperator:
        key = (w_state, s)
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        p, lam = w_state
        dw = state_weight(w_state)
        shift = -s - 1 + dw
        blocks: dict = {}
        src_space = self.source.space
        tgt_space = self.target.space
        for sw in src_space.weights:
            tw = sw + shift
            if tw not in tgt_space.dims:
                continue
            mat = zeros((tgt_space.dims[tw], src_space.dims[sw]), src_space.exact)
            nonzero = False
            for col, st in enumerate(self.source.states[sw]):
                terms = self.theory.mode_terms(p, lam, s, st, self.source,
                                               self.target)
                for tgt_st, coeff in terms.items():
                    w_t, row = self.target.index[tgt_st]
                    if w_t != tw:
                        continue
                    if self.normalization is not None:
                        coeff = coeff * self.normalization
                    mat[row, col] = mat[row, col] + self.theory._scal(coeff)
                    nonzero = True
            if nonzero:
                blocks[(tw, sw)] = mat
        op = BlockOperator(src_space, tgt_space, blocks, energy_shift=shift,
                           exact=src_space.exact)
        with self._lock:
            self._cache[key] = op
        return op

    def mode(self, w, s) -> BlockOperator:
        """Mode for a charge vector w (GradedVector or basis state)."""
        s = frac(s)
        if isinstance(w, tuple):
            return self.state_mode(w, s)
        total = None
        for wt, col in w.comps.items():
            for idx, coeff in enumerate(col):
                if not _nonzero(coeff):
                    continue
                st = self.charge.states[wt][idx]
                op = self.state_mode(st, s).scale(coeff)
                total = op if total is None else total + op
        if total is None:
            return BlockOperator.zero(self.source.space, self.target.space)
        return total

    def cross_matrix(self, w_src: GradedVector, s: Fraction) -> BlockOperator:
        """Charge -> target map with columns Y(charge state, s) w_src.

        Fixes the source vector and varies the charge slot; one mode_terms
        call per charge state instead of one full block build.
        """
        s = frac(s)
        exact = self.charge.space.exact
        blocks: dict = {}
        for cw in self.charge.space.weights:
            for cidx, ch_state in enumerate(self.charge.states[cw]):
                p, lam = ch_state
                tw_shift = -s - 1 + cw
                for sw, comp in w_src.comps.items():
                    tw = sw + tw_shift
                    if tw not in self.target.space.dims:
                        continue
                    for sidx, coeff in enumerate(comp):
                        if not _nonzero(coeff):
                            continue
                        src_state = self.source.states[sw][sidx]
                        terms = self.theory.mode_terms(p, lam, s, src_state,
                                                       self.source, self.target)
                        for tgt_st, val in terms.items():
                            w_t, row = self.target.index[tgt_st]
                            if self.normalization is not None:
                                val = val * self.normalization
                            key = (w_t, cw)
                            if key not in blocks:
                                blocks[key] = zeros(
                                    (self.target.space.dims[w_t],
                                     self.charge.space.dims[cw]), exact)
                            blocks[key][row, cidx] = (
                                blocks[key][row, cidx]
                                + self.theory._scal(val) * coeff)
        return BlockOperator(self.charge.space, self.target.space, blocks,
                             exact=exact)


def _nonzero(x) -> bool:
    if isinstance(x, complex):
        return x != 0
    return bool(x)
