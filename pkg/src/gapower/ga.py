"""Sparse Euclidean Clifford algebra Cl(m) with optional batched coefficients.

Blades are stored as bitmasks: bit ``k - 1`` set means the basis vector
``sigma_k`` is a factor.  Every basis vector squares to +1.  A coefficient is
either a Python float or a 1-D numpy array; arrays let one ``Multivector`` carry
a whole time series (one entry per sample) through the same algebra.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import DimensionMismatch, NearZeroVector, NotAVector

Coefficient = Union[float, np.ndarray]

DEFAULT_INVERSE_EPS = 1e-9


def indices_to_mask(indices: Iterable[int]) -> int:
    mask = 0
    for k in indices:
        if k < 1:
            raise ValueError(f"basis indices start at 1, got {k}")
        bit = 1 << (k - 1)
        if mask & bit:
            raise ValueError(f"repeated basis index {k}")
        mask |= bit
    return mask


def mask_to_indices(mask: int) -> tuple[int, ...]:
    out = []
    k = 1
    while mask:
        if mask & 1:
            out.append(k)
        mask >>= 1
        k += 1
    return tuple(out)


def grade_of(mask: int) -> int:
    return bin(mask).count("1")


def reorder_sign(a: int, b: int) -> int:
    """Sign picked up when sorting the concatenated factors of blades a and b."""
    a >>= 1
    swaps = 0
    while a:
        swaps += grade_of(a & b)
        a >>= 1
    return -1 if swaps & 1 else 1


def _is_zero(c: Coefficient) -> bool:
    if isinstance(c, np.ndarray):
        return not np.any(c)
    return c == 0


class Multivector:
    """Immutable sparse multivector of Cl(dim)."""

    __slots__ = ("_dim", "_coeffs")

    def __init__(self, dim: int, coeffs: Mapping[int, Coefficient] | None = None):
        if dim < 0:
            raise ValueError("dimension must be non-negative")
        limit = 1 << dim
        clean: dict[int, Coefficient] = {}
        for mask, c in (coeffs or {}).items():
            if not 0 <= mask < limit:
                raise ValueError(f"blade {mask_to_indices(mask)} outside Cl({dim})")
            if isinstance(c, np.ndarray):
                c = np.asarray(c, dtype=float)
            else:
                c = float(c)
            if not _is_zero(c):
                clean[mask] = c
        self._dim = dim
        self._coeffs = clean

    # construction helpers

    @classmethod
    def scalar(cls, dim: int, value: Coefficient) -> Multivector:
        return cls(dim, {0: value})

    @classmethod
    def basis(cls, dim: int, *indices: int, coefficient: Coefficient = 1.0) -> Multivector:
        """Blade ``coefficient * sigma_{i1 i2 ...}``; indices are sorted with sign."""
        mask = 0
        sign = 1
        for k in indices:
            if not 1 <= k <= dim:
                raise ValueError(f"basis index {k} outside Cl({dim})")
            single = 1 << (k - 1)
            sign *= reorder_sign(mask, single)
            mask ^= single
        return cls(dim, {mask: sign * coefficient})

    @classmethod
    def vector(cls, values: Sequence[float] | np.ndarray) -> Multivector:
        """Grade-1 multivector from coefficients.

        ``values`` has shape ``(m,)`` or ``(n_samples, m)``; the latter yields
        batched coefficients.
        """
        arr = np.asarray(values, dtype=float)
        if arr.ndim == 1:
            return cls(arr.shape[0], {1 << k: float(arr[k]) for k in range(arr.shape[0])})
        if arr.ndim == 2:
            return cls(arr.shape[1], {1 << k: arr[:, k].copy() for k in range(arr.shape[1])})
        raise ValueError("vector coefficients must be 1-D or 2-D")

    # accessors

    @property
    def dim(self) -> int:
        return self._dim

    def items(self):
        return self._coeffs.items()

    def blades(self) -> list[tuple[int, ...]]:
        return sorted((mask_to_indices(m) for m in self._coeffs), key=lambda ix: (len(ix), ix))

    def coefficient(self, *indices: int) -> Coefficient:
        return self._coeffs.get(indices_to_mask(sorted(indices)), 0.0) * _perm_sign(indices)

    def grades(self) -> set[int]:
        return {grade_of(m) for m in self._coeffs}

    def is_zero(self) -> bool:
        return not self._coeffs

    def is_vector(self) -> bool:
        return all(grade_of(m) == 1 for m in self._coeffs)

    def vector_array(self, n_samples: int | None = None) -> np.ndarray:
        """Grade-1 coefficients as ``(m,)`` or ``(n_samples, m)``."""
        batch = n_samples
        for c in self._coeffs.values():
            if isinstance(c, np.ndarray):
                batch = c.shape[0]
                break
        shape = (self._dim,) if batch is None else (batch, self._dim)
        out = np.zeros(shape)
        for mask, c in self._coeffs.items():
            if grade_of(mask) == 1:
                k = mask.bit_length() - 1
                if batch is None:
                    out[k] = c
                else:
                    out[:, k] = c
        return out

    # algebra

    def _check(self, other: Multivector) -> None:
        if self._dim != other._dim:
            raise DimensionMismatch(f"Cl({self._dim}) vs Cl({other._dim})")

    def __add__(self, other):
        if isinstance(other, (int, float, np.ndarray)):
            other = Multivector.scalar(self._dim, other)
        if not isinstance(other, Multivector):
            return NotImplemented
        self._check(other)
        out = dict(self._coeffs)
        for mask, c in other._coeffs.items():
            out[mask] = out[mask] + c if mask in out else c
        return Multivector(self._dim, out)

    __radd__ = __add__

    def __neg__(self) -> Multivector:
        return Multivector(self._dim, {m: -c for m, c in self._coeffs.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float, np.ndarray)):
            other = Multivector.scalar(self._dim, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Multivector):
            return geometric_product(self, other)
        if isinstance(other, (int, float, np.ndarray, np.floating)):
            return Multivector(self._dim, {m: c * other for m, c in self._coeffs.items()})
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float, np.ndarray, np.floating)):
            return Multivector(self._dim, {m: other * c for m, c in self._coeffs.items()})
        return NotImplemented

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.ndarray, np.floating)):
            return Multivector(self._dim, {m: c / other for m, c in self._coeffs.items()})
        return NotImplemented

    def grade(self, k: int) -> Multivector:
        return grade_project(self, k)

    def norm(self) -> Coefficient:
        return norm(self)

    def allclose(self, other: Multivector, atol: float = 1e-12) -> bool:
        diff = self - other
        return all(np.all(np.abs(c) <= atol) for _, c in diff.items())

    def __repr__(self) -> str:
        if not self._coeffs:
            return f"Multivector(dim={self._dim}, 0)"
        parts = []
        for ix in self.blades():
            c = self._coeffs[indices_to_mask(ix)]
            label = "1" if not ix else "s" + "".join(str(k) for k in ix)
            parts.append(f"{c!r}*{label}" if not isinstance(c, np.ndarray) else f"<{c.shape[0]} samples>*{label}")
        return f"Multivector(dim={self._dim}, {' + '.join(parts)})"


def _perm_sign(indices: Sequence[int]) -> int:
    """Parity of the permutation sorting ``indices`` (distinct)."""
    sign = 1
    ix = list(indices)
    for a in range(len(ix)):
        for b in range(a + 1, len(ix)):
            if ix[a] > ix[b]:
                sign = -sign
    return sign


def geometric_product(a: Multivector, b: Multivector) -> Multivector:
    a._check(b)
    out: dict[int, Coefficient] = {}
    for ma, ca in a._coeffs.items():
        for mb, cb in b._coeffs.items():
            mask = ma ^ mb
            term = reorder_sign(ma, mb) * (ca * cb)
            out[mask] = out[mask] + term if mask in out else term
    return Multivector(a.dim, out)


def _require_vectors(*mvs: Multivector) -> None:
    for mv in mvs:
        if not mv.is_vector():
            raise NotAVector(f"expected a grade-1 multivector, found grades {sorted(mv.grades())}")


def inner(a: Multivector, b: Multivector) -> Coefficient:
    """Euclidean scalar product of two vectors."""
    a._check(b)
    _require_vectors(a, b)
    total: Coefficient = 0.0
    for mask, ca in a._coeffs.items():
        cb = b._coeffs.get(mask)
        if cb is not None:
            total = total + ca * cb
    return total


def wedge(a: Multivector, b: Multivector) -> Multivector:
    a._check(b)
    _require_vectors(a, b)
    return grade_project(geometric_product(a, b), 2)


def grade_project(a: Multivector, k: int) -> Multivector:
    return Multivector(a.dim, {m: c for m, c in a._coeffs.items() if grade_of(m) == k})


def norm(a: Multivector) -> Coefficient:
    total: Coefficient = 0.0
    for c in a._coeffs.values():
        total = total + c * c
    return np.sqrt(total) if isinstance(total, np.ndarray) else float(np.sqrt(total))


def vector_inverse(v: Multivector, eps: float | None = None) -> Multivector:
    """Return ``v / |v|^2``.

    ``eps`` is the absolute threshold on ``|v|^2``; by default it is
    ``1e-9 * (max |coefficient|)^2``.  Raises :class:`NearZeroVector` when any
    (batched) squared norm falls at or below it.
    """
    _require_vectors(v)
    if v.is_zero():
        raise NearZeroVector("cannot invert the zero vector")
    sq = norm(v) ** 2
    if eps is None:
        peak = max(float(np.max(np.abs(c))) for _, c in v.items())
        eps = DEFAULT_INVERSE_EPS * peak * peak
    if np.any(sq <= eps):
        raise NearZeroVector(f"squared norm {np.min(sq):.3e} <= threshold {eps:.3e}")
    return v / sq
