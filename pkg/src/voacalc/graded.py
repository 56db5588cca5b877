"""Finite-cutoff energy-graded inner-product spaces and block operators.

Weights are exact Fractions throughout; matrices are numpy arrays, either
complex128 (float backend) or object arrays of exact scalars (exact backend).
Inner products follow the convention <.|.> antilinear in the SECOND slot, and
gram matrices G[a, b] = <e_a | e_b> are stored per weight block, so bases need
not be orthonormal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import (EnergyShiftError, NoInnerProductError,
                     UnregisteredContragredientError)
from .scalars import Cyclo8, conj_scalar, to_complex

Weight = Fraction


def frac(x, den=None) -> Fraction:
    if den is not None:
        return Fraction(x, den)
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x.numerator, x.denominator)


def zeros(shape, exact: bool) -> np.ndarray:
    if exact:
        a = np.empty(shape, dtype=object)
        a[...] = 0
        return a
    return np.zeros(shape, dtype=complex)


def mat_to_complex(a: np.ndarray) -> np.ndarray:
    if a.dtype == object:
        out = np.empty(a.shape, dtype=complex)
        flat_in, flat_out = a.reshape(-1), out.reshape(-1)
        for i, v in enumerate(flat_in):
            flat_out[i] = to_complex(v)
        return out
    return a


def mat_conj(a: np.ndarray) -> np.ndarray:
    if a.dtype == object:
        out = np.empty(a.shape, dtype=object)
        flat_in, flat_out = a.reshape(-1), out.reshape(-1)
        for i, v in enumerate(flat_in):
            flat_out[i] = conj_scalar(v)
        return out
    return np.conjugate(a)


def mat_is_zero(a: np.ndarray, tol: float = 0.0) -> bool:
    if a.dtype == object:
        return not any(bool(v) for v in a.reshape(-1))
    return bool(np.all(np.abs(a) <= tol))


def mat_max_abs(a: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(mat_to_complex(a))))


class GradedSpace:
    """A finitely truncated energy-graded inner-product space."""

    def __init__(self, label: str, dims: dict[Weight, int], gram: dict[Weight, np.ndarray],
                 cutoff: Weight, lowest_weight: Optional[Weight] = None,
                 unitary: bool = True, exact: bool = True,
                 basis_names: Optional[dict[Weight, list]] = None,
                 dual_label: Optional[str] = None):
        self.label = label
        self.weights: tuple[Weight, ...] = tuple(sorted(dims))
        self.dims = dict(dims)
        self.gram = gram
        self.cutoff = frac(cutoff)
        self.lowest_weight = frac(lowest_weight) if lowest_weight is not None else (
            self.weights[0] if self.weights else None)
        self.unitary = unitary
        self.exact = exact
        self.basis_names = basis_names or {}
        self.dual_label = dual_label
        self._gram_inv: dict[Weight, np.ndarray] = {}
        self._validate()

    def _validate(self):
        for w in self.weights:
            if self.unitary and w < 0:
                raise ValueError(f"unitary space {self.label} has negative weight {w}")
            g = self.gram[w]
            n = self.dims[w]
            if g.shape != (n, n):
                raise ValueError(f"gram shape mismatch at weight {w}")
            if not mat_is_zero(g - mat_conj(g).T, tol=1e-12):
                raise ValueError(f"gram at weight {w} is not Hermitian")
            ev = np.linalg.eigvalsh(mat_to_complex(g))
            if np.min(ev) <= 0:
                raise ValueError(f"gram at weight {w} is not positive definite")

    def dim(self, w: Weight) -> int:
        return self.dims.get(w, 0)

    @property
    def total_dim(self) -> int:
        return sum(self.dims.values())

    def gram_inv(self, w: Weight) -> np.ndarray:
        if w not in self._gram_inv:
            g = self.gram[w]
            if g.dtype == object:
                self._gram_inv[w] = exact_inverse(g)
            else:
                self._gram_inv[w] = np.linalg.inv(g)
        return self._gram_inv[w]

    def zero_vector(self) -> "GradedVector":
        return GradedVector(self, {}, exact=self.exact)

    def basis_vector(self, w: Weight, idx: int) -> "GradedVector":
        col = zeros(self.dims[w], self.exact)
        col[idx] = Cyclo8(1) if self.exact else 1.0
        return GradedVector(self, {w: col}, exact=self.exact)

    def weight_denominator(self) -> int:
        return math.lcm(*(w.denominator for w in self.weights)) if self.weights else 1

    def __repr__(self):
        return f"GradedSpace({self.label}, dim={self.total_dim}, cutoff={self.cutoff})"


def exact_inverse(g: np.ndarray) -> np.ndarray:
    """Gaussian elimination over the exact scalar field."""
    n = g.shape[0]
    a = np.empty((n, 2 * n), dtype=object)
    for i in range(n):
        for j in range(n):
            v = g[i, j]
            a[i, j] = v if isinstance(v, Cyclo8) else Cyclo8.from_rat(v)
        for j in range(n):
            a[i, n + j] = Cyclo8(1 if i == j else 0)
    for col in range(n):
        piv = next((r for r in range(col, n) if bool(a[r, col])), None)
        if piv is None:
            raise np.linalg.LinAlgError("exact matrix is singular")
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
        inv_p = a[col, col].inverse() if isinstance(a[col, col], Cyclo8) else Cyclo8.from_rat(1) / a[col, col]
        for j in range(col, 2 * n):
            a[col, j] = a[col, j] * inv_p
        for r in range(n):
            if r != col and bool(a[r, col]):
                f = a[r, col]
                for j in range(col, 2 * n):
                    a[r, j] = a[r, j] - f * a[col, j]
    return a[:, n:]


class GradedVector:
    """Sparse weight-indexed element of a GradedSpace."""

    __slots__ = ("space", "comps", "exact")

    def __init__(self, space: GradedSpace, comps: dict[Weight, np.ndarray], exact: bool = True):
        self.space = space
        self.comps = {w: c for w, c in comps.items() if not mat_is_zero(np.atleast_1d(c))}
        self.exact = exact

    def component(self, w: Weight) -> np.ndarray:
        if w in self.comps:
            return self.comps[w]
        return zeros(self.space.dims.get(w, 0), self.space.exact)

    def __add__(self, other: "GradedVector") -> "GradedVector":
        comps = dict(self.comps)
        for w, c in other.comps.items():
            comps[w] = comps[w] + c if w in comps else c
        return GradedVector(self.space, comps, exact=self.exact and other.exact)

    def __sub__(self, other: "GradedVector") -> "GradedVector":
        return self + other.scale(-1)

    def scale(self, a) -> "GradedVector":
        return GradedVector(self.space, {w: scalar_times(a, c) for w, c in self.comps.items()},
                            exact=self.exact)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(mat_is_zero(c, tol) for c in self.comps.values())

    def to_complex(self) -> "GradedVector":
        return GradedVector(self.space, {w: mat_to_complex(c) for w, c in self.comps.items()},
                            exact=False)

    def norm(self) -> float:
        val = inner(self, self)
        return math.sqrt(max(to_complex(val).real, 0.0))

    def max_abs(self) -> float:
        return max((mat_max_abs(c) for c in self.comps.values()), default=0.0)

    def __repr__(self):
        ws = ", ".join(str(w) for w in sorted(self.comps))
        return f"GradedVector({self.space.label}; weights {{{ws}}})"


def scalar_times(a, arr: np.ndarray) -> np.ndarray:
    if arr.dtype == object:
        out = np.empty(arr.shape, dtype=object)
        fi, fo = arr.reshape(-1), out.reshape(-1)
        for i, v in enumerate(fi):
            fo[i] = a * v
        return out
    return to_complex(a) * arr


class BlockOperator:
    """Weight-block-indexed linear map between graded spaces.

    blocks: dict (target_weight, source_weight) -> matrix; if energy_shift is
    set, only blocks with target - source == energy_shift may be nonzero.
    """

    __slots__ = ("source", "target", "blocks", "energy_shift", "exact")

    def __init__(self, source: GradedSpace, target: GradedSpace,
                 blocks: dict[tuple[Weight, Weight], np.ndarray],
                 energy_shift: Optional[Weight] = None, exact: bool = True):
        self.source = source
        self.target = target
        self.blocks = {k: b for k, b in blocks.items() if not mat_is_zero(b)}
        self.energy_shift = energy_shift
        self.exact = exact
        if energy_shift is not None:
            for (tw, sw) in self.blocks:
                if tw - sw != energy_shift:
                    raise ValueError(
                        f"block ({tw},{sw}) violates fixed energy shift {energy_shift}")

    @staticmethod
    def zero(source: GradedSpace, target: GradedSpace,
             energy_shift: Optional[Weight] = None) -> "BlockOperator":
        return BlockOperator(source, target, {}, energy_shift, exact=source.exact and target.exact)

    @staticmethod
    def identity(space: GradedSpace) -> "BlockOperator":
        blocks = {}
        for w in space.weights:
            n = space.dims[w]
            m = zeros((n, n), space.exact)
            for i in range(n):
                m[i, i] = Cyclo8(1) if space.exact else 1.0
            blocks[(w, w)] = m
        return BlockOperator(space, space, blocks, energy_shift=frac(0), exact=space.exact)

    def block(self, tw: Weight, sw: Weight) -> np.ndarray:
        if (tw, sw) in self.blocks:
            return self.blocks[(tw, sw)]
        return zeros((self.target.dims.get(tw, 0), self.source.dims.get(sw, 0)),
                     self.exact)

    def apply(self, v: GradedVector) -> GradedVector:
        if v.space is not self.source and v.space.label != self.source.label:
            raise ValueError(f"operator source {self.source.label} != vector space {v.space.label}")
        comps: dict[Weight, np.ndarray] = {}
        for (tw, sw), m in self.blocks.items():
            if sw in v.comps:
                contrib = m.dot(v.comps[sw])
                comps[tw] = comps[tw] + contrib if tw in comps else contrib
        return GradedVector(self.target, comps, exact=self.exact and v.exact)

    def compose(self, other: "BlockOperator") -> "BlockOperator":
        """self after other (matrix product self @ other)."""
        shift = None
        if self.energy_shift is not None and other.energy_shift is not None:
            shift = self.energy_shift + other.energy_shift
        by_mid: dict[Weight, list] = {}
        for (tw, mw), m1 in self.blocks.items():
            by_mid.setdefault(mw, []).append((tw, m1))
        blocks: dict[tuple[Weight, Weight], np.ndarray] = {}
        for (mw, sw), m2 in other.blocks.items():
            for (tw, m1) in by_mid.get(mw, ()):
                prod = m1.dot(m2)
                key = (tw, sw)
                blocks[key] = blocks[key] + prod if key in blocks else prod
        return BlockOperator(other.source, self.target, blocks, shift,
                             exact=self.exact and other.exact)

    def __add__(self, other: "BlockOperator") -> "BlockOperator":
        shift = self.energy_shift if self.energy_shift == other.energy_shift else None
        blocks = dict(self.blocks)
        for k, b in other.blocks.items():
            blocks[k] = blocks[k] + b if k in blocks else b
        return BlockOperator(self.source, self.target, blocks, shift,
                             exact=self.exact and other.exact)

    def __sub__(self, other: "BlockOperator") -> "BlockOperator":
        return self + other.scale(-1)

    def scale(self, a) -> "BlockOperator":
        return BlockOperator(self.source, self.target,
                             {k: scalar_times(a, b) for k, b in self.blocks.items()},
                             self.energy_shift, exact=self.exact)

    def dagger(self) -> "BlockOperator":
        """Gram adjoint: target -> source."""
        if not (self.source.unitary and self.target.unitary):
            raise NoInnerProductError("gram adjoint needs unitary source and target")
        blocks = {}
        for (tw, sw), m in self.blocks.items():
            gj_inv = self.source.gram_inv(sw)
            gk = self.target.gram[tw]
            adj = mat_conj(gj_inv.dot(m.T).dot(gk))
            blocks[(sw, tw)] = adj
        shift = -self.energy_shift if self.energy_shift is not None else None
        return BlockOperator(self.target, self.source, blocks, shift, exact=self.exact)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(mat_is_zero(b, tol) for b in self.blocks.values())

    def max_abs(self) -> float:
        return max((mat_max_abs(b) for b in self.blocks.values()), default=0.0)

    def to_complex(self) -> "BlockOperator":
        return BlockOperator(self.source, self.target,
                             {k: mat_to_complex(b) for k, b in self.blocks.items()},
                             self.energy_shift, exact=False)

    def dense(self, source_order: list[Weight] = None, target_order: list[Weight] = None
              ) -> np.ndarray:
        """Dense complex matrix in block order of ascending weights."""
        src_ws = source_order or list(self.source.weights)
        tgt_ws = target_order or list(self.target.weights)
        src_off, n = {}, 0
        for w in src_ws:
            src_off[w] = n
            n += self.source.dims[w]
        tgt_off, m = {}, 0
        for w in tgt_ws:
            tgt_off[w] = m
            m += self.target.dims[w]
        out = np.zeros((m, n), dtype=complex)
        for (tw, sw), b in self.blocks.items():
            if tw in tgt_off and sw in src_off:
                out[tgt_off[tw]:tgt_off[tw] + b.shape[0],
                    src_off[sw]:src_off[sw] + b.shape[1]] = mat_to_complex(b)
        return out

    def __repr__(self):
        return (f"BlockOperator({self.source.label} -> {self.target.label}, "
                f"{len(self.blocks)} blocks, shift={self.energy_shift})")


# ---------------------------------------------------------------------------
# operations


def project(v: GradedVector, s) -> GradedVector:
    """Weight-s component of v; zero vector if absent."""
    s = frac(s)
    if s in v.comps:
        return GradedVector(v.space, {s: v.comps[s]}, exact=v.exact)
    return v.space.zero_vector()


def inner(v: GradedVector, w: GradedVector):
    """<v|w>, antilinear in w.  Distinct weights are orthogonal."""
    if not v.space.unitary:
        raise NoInnerProductError(f"space {v.space.label} carries no inner product")
    if v.space.label != w.space.label:
        raise ValueError("inner product needs both vectors in the same space")
    total = None
    for s, a in v.comps.items():
        if s in w.comps:
            g = v.space.gram[s]
            term_vec = g.dot(mat_conj(w.comps[s]))
            term = a.dot(term_vec) if a.ndim else a * term_vec
            total = term if total is None else total + term
    if total is None:
        return Cyclo8(0) if v.space.exact else 0j
    return total


def pairing(dual_vec: GradedVector, vec: GradedVector):
    """Bilinear evaluation <dual_vec, vec> of a dual-space vector on vec.

    The dual space is realized with the conjugation map acting as the
    antilinear identity-on-basis, so <C w1, w2> = <w2|w1>.
    """
    space = vec.space
    total = None
    for s, xi in dual_vec.comps.items():
        if s in vec.comps:
            g = space.gram[s]
            term = xi.dot(g.T.dot(vec.comps[s]))
            total = term if total is None else total + term
    if total is None:
        return Cyclo8(0) if space.exact else 0j
    return total


def dual_conjugation(v: GradedVector, dual_space: GradedSpace) -> GradedVector:
    """Antilinear conjugation into the registered contragredient space."""
    if dual_space is None:
        raise UnregisteredContragredientError(
            f"no contragredient registered for {v.space.label}")
    if v.space.dual_label != dual_space.label:
        raise UnregisteredContragredientError(
            f"{dual_space.label} is not the registered dual of {v.space.label}")
    return GradedVector(dual_space, {w: mat_conj(c) for w, c in v.comps.items()},
                        exact=v.exact)


def apply_scaling(z, v: GradedVector) -> GradedVector:
    """z^{L0} v = sum_s z^s P_s v with arg(z^s) = s arg(z).

    z is an AngledComplex (duck-typed: .modulus, .argument).
    """
    comps = {}
    for s, c in v.comps.items():
        power = (z.modulus ** float(s)) * np.exp(1j * z.argument * float(s))
        comps[s] = mat_to_complex(c) * power
    return GradedVector(v.space, comps, exact=False)


def apply_exact_phase(v: GradedVector, eighths_per_weight: int) -> GradedVector:
    """exp(i*pi*eighths_per_weight*L0/4) v, exact when weights are quarter-integral."""
    comps = {}
    for s, c in v.comps.items():
        k = s * eighths_per_weight
        if k.denominator != 1:
            raise ValueError(f"weight {s} gives a non-eighth-root phase")
        comps[s] = scalar_times(Cyclo8.zeta(int(k)), c)
    return GradedVector(v.space, comps, exact=v.exact)


def twist_operator(space: GradedSpace) -> BlockOperator:
    """exp(2 i pi L0) as a diagonal block operator (exact for quarter weights)."""
    blocks = {}
    for w in space.weights:
        k = w * 8
        if k.denominator != 1:
            raise ValueError("twist needs weights with denominator dividing 8")
        phase = Cyclo8.zeta(int(k)) if space.exact else to_complex(Cyclo8.zeta(int(k)))
        n = space.dims[w]
        m = zeros((n, n), space.exact)
        for i in range(n):
            m[i, i] = phase if space.exact else phase
        blocks[(w, w)] = m
    return BlockOperator(space, space, blocks, energy_shift=frac(0), exact=space.exact)


def apply_exp(a: BlockOperator, z, v: GradedVector, max_terms: int = 200) -> GradedVector:
    """exp(z*A) v as a finite sum; A must have a fixed nonzero energy shift.

    Terms escaping the cutoff are dropped and exactness is cleared when A
    raises energy past the cutoff.
    """
    if a.energy_shift is None or a.energy_shift == 0:
        raise EnergyShiftError("apply_exp needs a fixed nonzero energy shift")
    if not (_is_exact_scalar(z) and v.exact and a.exact):
        v = v.to_complex()
        a = a.to_complex()
        z = to_complex(z)
    out = v
    term = v
    lost = False
    top = max(v.comps, default=None)
    for m in range(1, max_terms):
        term = a.apply(term)
        if a.energy_shift > 0 and top is not None:
            if top + m * a.energy_shift > a.target.cutoff:
                lost = True
        if term.is_zero():
            break
        fact = math.factorial(m)
        if _is_exact_scalar(z) and term.exact:
            contrib = term.scale(exact_pow(z, m) * _exact_inv_int(fact))
        else:
            contrib = term.to_complex().scale(to_complex(z) ** m / fact)
        out = out + contrib
    if lost:
        out = GradedVector(out.space, out.comps, exact=False)
    return out


def _is_exact_scalar(z) -> bool:
    from .scalars import RAT_TYPES
    return isinstance(z, (Cyclo8, Fraction)) or isinstance(z, RAT_TYPES)


def exact_pow(z, m: int):
    out = Cyclo8(1) if isinstance(z, Cyclo8) else frac(1)
    for _ in range(m):
        out = out * z
    return out


def _exact_inv_int(n: int):
    return frac(1, n)
