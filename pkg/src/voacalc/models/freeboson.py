"""Rank-1 free boson (Heisenberg) vertex algebra at finite cutoff.

Fock space over a single current alpha with [alpha(m), alpha(n)] = m
delta_{m,-n}; conformal vector (1/2) alpha(-1)^2 vacuum, central charge 1.
The PCT operator fixes the real form with theta alpha(n) theta = -alpha(n).
"""

from __future__ import annotations

from fractions import Fraction

from ..graded import BlockOperator, GradedVector, frac, mat_conj, zeros
from ..scalars import Cyclo8, rat
from ..voa import IntertwinerData, ModuleData, VOAData
from .freefield import (FreeFieldTheory, ModeFamily, SpaceWithStates,
                        partition_norm_sq, partitions)


class FreeBosonModel:
    def __init__(self, cutoff: int, exact: bool = True):
        if cutoff < 2:
            raise ValueError("cutoff must be at least 2")
        self.kind = "free-boson"
        self.cutoff = int(cutoff)
        self.exact = exact
        self.theory = FreeFieldTheory(exact=exact)

        self.lattices = {"0": SpaceWithStates("0", (0,), frac(cutoff), exact,
                                              frac(0), dual_label="0'")}
        self.lattices["0'"] = SpaceWithStates("0'", (0,), frac(cutoff), exact,
                                              frac(0), dual_label="0")

        fam = ModeFamily(self.theory, self.lattices["0"], self.lattices["0"],
                         self.lattices["0"], label="Y")
        vac = self.lattices["0"].state_vector((0, ()))
        nu = self.lattices["0"].vector(
            {(0, (1, 1)): rat(1, 2) if exact else 0.5})
        self.voa = VOAData("0", self.lattices["0"].space, fam, vac, nu,
                           central_charge=1, pct=self.theta)
        self.modules = {"0": self.voa.module}
        dual_fam = _DualAction(self, "0")
        self.modules["0'"] = ModuleData("0'", self.lattices["0'"].space,
                                        dual_fam, voa=self.voa)
        self.dual_of = {"0": "0'", "0'": "0"}
        self.irreducibles = ["0"]
        self.intertwiner_bases = {
            ("0", "0", "0"): [self.voa.module.as_intertwiner()],
        }

    # ------------------------------------------------------------------
    def state_vector(self, parts: tuple[int, ...]) -> GradedVector:
        return self.lattices["0"].state_vector((0, tuple(sorted(parts, reverse=True))))

    def theta(self, v: GradedVector) -> GradedVector:
        """PCT: antilinear, theta alpha(-parts) vac = (-1)^#parts alpha(-parts) vac."""
        sws = self.lattices[v.space.label]
        comps = {}
        for w, col in v.comps.items():
            new = zeros(len(col), v.space.exact)
            for idx, st in enumerate(sws.states[w]):
                sign = -1 if len(st[1]) % 2 else 1
                new[idx] = sign * col[idx]
            comps[w] = mat_conj(new)
        return GradedVector(v.space, comps, exact=v.exact)

    def alpha_op(self, n: int, label: str = "0") -> BlockOperator:
        """The current mode alpha(n) as a block operator."""
        sws = self.lattices[label]
        space = sws.space
        blocks = {}
        for sw in space.weights:
            tw = sw - n
            if tw not in space.dims:
                continue
            mat = zeros((space.dims[tw], space.dims[sw]), space.exact)
            nz = False
            for col, (q, parts) in enumerate(sws.states[sw]):
                if n == 0:
                    continue
                if n > 0:
                    cnt = parts.count(n)
                    if cnt:
                        rest = list(parts)
                        rest.remove(n)
                        st2 = (q, tuple(rest))
                        w2, row = sws.index[st2]
                        mat[row, col] = mat[row, col] + (rat(n * cnt) if space.exact
                                                         else float(n * cnt))
                        nz = True
                else:
                    st2 = (q, tuple(sorted(parts + (-n,), reverse=True)))
                    if st2 in sws.index:
                        w2, row = sws.index[st2]
                        mat[row, col] = mat[row, col] + (rat(1) if space.exact else 1.0)
                        nz = True
            if nz:
                blocks[(tw, sw)] = mat
        return BlockOperator(space, space, blocks, energy_shift=frac(-n),
                             exact=space.exact)

    def sugawara_virasoro(self, n: int, label: str = "0") -> BlockOperator:
        """Oracle: L_n = (1/2) sum_k :alpha(-k) alpha(n+k): assembled directly."""
        space = self.lattices[label].space
        total = BlockOperator.zero(space, space, energy_shift=frac(-n))
        half = rat(1, 2) if space.exact else 0.5
        top = int(space.cutoff) + 1
        for k in range(-2 * top, 2 * top + 1):
            a, b = -k, n + k  # alpha(a) alpha(b), normal ordered
            lo, hi = (a, b) if a <= b else (b, a)
            term = self.alpha_op(lo, label).compose(self.alpha_op(hi, label))
            total = total + term.scale(half)
        return total


class _DualAction:
    """Y'(v, n) = conj(Y(theta v, n)) acting on the contragredient space."""

    def __init__(self, model, label: str):
        self.model = model
        self.label = label

    def mode(self, v, n):
        base = self.model.modules[self.label].mode(self.model.theta(v), n)
        dual_space = self.model.lattices[self.model.dual_of[self.label]].space
        blocks = {k: mat_conj(b) for k, b in base.blocks.items()}
        return BlockOperator(dual_space, dual_space, blocks,
                             energy_shift=base.energy_shift, exact=base.exact)


def build_free_boson(cutoff: int, exact: bool = True) -> FreeBosonModel:
    return FreeBosonModel(cutoff, exact=exact)
