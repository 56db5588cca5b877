"""The sqrt(2)-lattice unitary vertex algebra and its charge-1/2 module.

V has charge sectors q/sqrt(2) with q even; the irreducible module of lowest
weight 1/4 has q odd.  All intertwiner spaces among {V, W} are at most
one-dimensional; the declared basis of the (vacuum; W W) space is normalized
so its lowest mode sends one lowest-weight vector to the vacuum with
coefficient 1.
"""

from __future__ import annotations

from fractions import Fraction

from ..graded import BlockOperator, GradedVector, frac, mat_conj, zeros
from ..scalars import Cyclo8, rat
from ..voa import IntertwinerData, ModuleData, VOAData
from .freefield import (FreeFieldTheory, ModeFamily, SpaceWithStates,
                        cocycle_phase, state_weight)


class LatticeSqrt2Model:
    def __init__(self, cutoff: int, exact: bool = True):
        if cutoff < 2:
            raise ValueError("cutoff must be at least 2")
        self.kind = "lattice-sqrt2"
        self.cutoff = int(cutoff)
        self.exact = exact
        self.theory = FreeFieldTheory(exact=exact)

        qmax = 1
        while (qmax + 2) ** 2 <= 4 * cutoff:
            qmax += 2
        even = tuple(q for q in range(-qmax - 1, qmax + 2)
                     if q % 2 == 0 and q * q <= 4 * cutoff)
        odd = tuple(q for q in range(-qmax - 2, qmax + 3)
                    if q % 2 != 0 and q * q <= 4 * cutoff)

        cut = frac(cutoff)
        self.lattices = {
            "0": SpaceWithStates("0", even, cut, exact, frac(0), dual_label="0'"),
            "h": SpaceWithStates("h", odd, cut, exact, frac(1, 4), dual_label="h'"),
            "0'": SpaceWithStates("0'", even, cut, exact, frac(0), dual_label="0"),
            "h'": SpaceWithStates("h'", odd, cut, exact, frac(1, 4), dual_label="h"),
        }

        vac = self.lattices["0"].state_vector((0, ()))
        nu = self.lattices["0"].vector({(0, (1, 1)): rat(1, 2) if exact else 0.5})
        act0 = ModeFamily(self.theory, self.lattices["0"], self.lattices["0"],
                          self.lattices["0"], label="Y0")
        self.voa = VOAData("0", self.lattices["0"].space, act0, vac, nu,
                           central_charge=1, pct=self.theta)
        acth = ModeFamily(self.theory, self.lattices["0"], self.lattices["h"],
                          self.lattices["h"], label="Yh")
        self.modules = {"0": self.voa.module,
                        "h": ModuleData("h", self.lattices["h"].space, acth,
                                        voa=self.voa)}
        for lbl in ("0", "h"):
            dual = lbl + "'"
            self.modules[dual] = ModuleData(
                dual, self.lattices[dual].space, _DualAction(self, lbl),
                voa=self.voa)
        self.dual_of = {"0": "0'", "0'": "0", "h": "h'", "h'": "h"}
        self.irreducibles = ["0", "h"]

        # normalized basis intertwiner of type (0; h h):
        # lowest mode sends e_{+} applied to e_{-} to the vacuum with coeff 1
        raw_low = cocycle_phase(1, -1)
        self._hh0_norm = raw_low.inverse()
        hh0_fam = ModeFamily(self.theory, self.lattices["h"], self.lattices["h"],
                             self.lattices["0"], normalization=self._hh0_norm,
                             label="Y[0;hh]")
        self.y_hh0 = IntertwinerData("Y[0;hh]", ("0", "h", "h"),
                                     self.lattices["h"].space,
                                     self.lattices["h"].space,
                                     self.lattices["0"].space,
                                     frac(1, 2), hh0_fam)
        self.y_v = self.voa.module.as_intertwiner()
        self.y_h = self.modules["h"].as_intertwiner()
        self.intertwiner_bases = {
            ("0", "0", "0"): [self.y_v],
            ("h", "0", "h"): [self.y_h],
            ("0", "h", "h"): [self.y_hh0],
        }

    # ------------------------------------------------------------------
    def highest_vector(self, q: int) -> GradedVector:
        label = "0" if q % 2 == 0 else "h"
        return self.lattices[label].state_vector((q, ()))

    def theta(self, v: GradedVector) -> GradedVector:
        """PCT on V: antilinear, alpha(n) -> -alpha(n), e_q -> e_{-q}."""
        sws = self.lattices[v.space.label]
        comps: dict = {}
        for w, col in v.comps.items():
            states = sws.states[w]
            new = zeros(len(col), v.space.exact)
            for idx, (q, parts) in enumerate(states):
                val = col[idx]
                if not (val if not isinstance(val, complex) else val != 0):
                    continue
                sign = -1 if len(parts) % 2 else 1
                st2 = (-q, parts)
                _, idx2 = sws.index[st2]
                new[idx2] = new[idx2] + sign * val
            comps[w] = mat_conj(new)
        return GradedVector(v.space, comps, exact=v.exact)

    def conj_vector(self, v: GradedVector) -> GradedVector:
        """C_i: component conjugation into the registered dual space."""
        dual = self.lattices[self.dual_of[v.space.label]].space
        return GradedVector(dual, {w: mat_conj(c) for w, c in v.comps.items()},
                            exact=v.exact)

    def dual_iso(self, label: str) -> BlockOperator:
        """Module isomorphism from the dual space onto the representative.

        For V: the linear part of theta.  For W: an extra i^q sector phase.
        """
        rep = label[:-1] if label.endswith("'") else label
        dual = rep + "'"
        src = self.lattices[dual]
        tgt = self.lattices[rep]
        blocks = {}
        for w in src.space.weights:
            n = src.space.dims[w]
            mat = zeros((n, n), self.exact)
            for col, (q, parts) in enumerate(src.states[w]):
                st2 = (-q, parts)
                _, row = tgt.index[st2]
                sign = Cyclo8(-1 if len(parts) % 2 else 1)
                if rep == "h":
                    sign = sign * Cyclo8.zeta(2 * q)
                mat[row, col] = sign if self.exact else complex(sign)
            blocks[(w, w)] = mat
        return BlockOperator(src.space, tgt.space, blocks, energy_shift=frac(0),
                             exact=self.exact)


class _DualAction:
    def __init__(self, model, label: str):
        self.model = model
        self.label = label

    def mode(self, v, n):
        base = self.model.modules[self.label].mode(self.model.theta(v), n)
        dual_space = self.model.lattices[self.label + "'"].space
        blocks = {k: mat_conj(b) for k, b in base.blocks.items()}
        return BlockOperator(dual_space, dual_space, blocks,
                             energy_shift=base.energy_shift, exact=base.exact)


def build_lattice_sqrt2(cutoff: int, exact: bool = True) -> LatticeSqrt2Model:
    return LatticeSqrt2Model(cutoff, exact=exact)
