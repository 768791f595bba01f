"""Affine forms over a registry of i.i.d.-uniform ground symbols.

Every protocol variable is an affine function of the inputs W, the self
masks S and the ramp noise N, so a coefficient row over the ground symbols
describes it completely. Entropies of such families are ranks.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import SecAggError
from .field import FieldSpec


class Registry:
    """Ordered, sealable list of ground symbols over one field."""

    def __init__(self, field: FieldSpec, symbols: Iterable[Hashable] = ()):
        self.field = field
        self._symbols: list[Hashable] = []
        self._index: dict[Hashable, int] = {}
        self.sealed = False
        for s in symbols:
            self.add(s)

    def add(self, symbol: Hashable) -> int:
        if self.sealed:
            raise SecAggError("registry is sealed")
        if symbol in self._index:
            raise SecAggError(f"duplicate symbol {symbol!r}")
        self._index[symbol] = len(self._symbols)
        self._symbols.append(symbol)
        return self._index[symbol]

    def seal(self) -> "Registry":
        self.sealed = True
        return self

    def index(self, symbol: Hashable) -> int:
        return self._index[symbol]

    def indices(self, pred) -> list[int]:
        return [i for i, s in enumerate(self._symbols) if pred(s)]

    @property
    def symbols(self) -> tuple[Hashable, ...]:
        return tuple(self._symbols)

    def __len__(self):
        return len(self._symbols)

    def __contains__(self, symbol):
        return symbol in self._index

    def unit(self, symbol: Hashable) -> "LinearExpr":
        c = np.zeros(len(self), dtype=self.field.dtype)
        c[self.index(symbol)] = 1
        return LinearExpr(self, c)

    def zero(self) -> "LinearExpr":
        return LinearExpr(self, np.zeros(len(self), dtype=self.field.dtype))


@dataclass(eq=False)
class LinearExpr:
    """sum_i coeffs[i] * symbol_i + constant."""

    registry: Registry
    coeffs: np.ndarray
    constant: int = 0

    def __add__(self, other: "LinearExpr") -> "LinearExpr":
        f = self.registry.field
        return LinearExpr(self.registry, f.vadd(self.coeffs, other.coeffs), f.add(self.constant, other.constant))

    def __sub__(self, other: "LinearExpr") -> "LinearExpr":
        f = self.registry.field
        return LinearExpr(self.registry, f.vsub(self.coeffs, other.coeffs), f.sub(self.constant, other.constant))

    def scale(self, c: int) -> "LinearExpr":
        f = self.registry.field
        return LinearExpr(self.registry, f.vmul(self.coeffs, c), f.mul(self.constant, c))

    def terms(self) -> dict[Hashable, int]:
        syms = self.registry.symbols
        return {syms[i]: int(self.coeffs[i]) for i in np.nonzero(self.coeffs)[0]}

    def evaluate(self, assignment) -> int:
        return int(VariableBundle.from_exprs("_", [self]).evaluate(assignment)[0])


@dataclass(eq=False)
class VariableBundle:
    """A named tuple of affine forms sharing one registry.

    ``coeffs`` has one row per scalar variable; ``constants`` one entry per row.
    """

    name: str
    registry: Registry
    coeffs: np.ndarray
    constants: np.ndarray = dc_field(default=None)

    def __post_init__(self):
        f = self.registry.field
        self.coeffs = np.asarray(self.coeffs, dtype=f.dtype).reshape(-1, len(self.registry))
        if self.constants is None:
            self.constants = np.zeros(self.coeffs.shape[0], dtype=f.dtype)
        self.constants = np.asarray(self.constants, dtype=f.dtype).reshape(-1)
        if self.constants.shape[0] != self.coeffs.shape[0]:
            raise SecAggError("constants/coeffs row count mismatch")

    @classmethod
    def from_exprs(cls, name: str, exprs: Sequence[LinearExpr]) -> "VariableBundle":
        if not exprs:
            raise SecAggError("use VariableBundle.empty for an empty bundle")
        reg = exprs[0].registry
        if any(e.registry is not reg for e in exprs):
            raise SecAggError("expressions from different registries")
        return cls(name, reg, np.stack([e.coeffs for e in exprs]), np.array([e.constant for e in exprs]))

    @classmethod
    def empty(cls, name: str, registry: Registry) -> "VariableBundle":
        return cls(name, registry, np.zeros((0, len(registry)), dtype=registry.field.dtype))

    @classmethod
    def symbols(cls, name: str, registry: Registry, symbols: Sequence[Hashable]) -> "VariableBundle":
        c = np.zeros((len(symbols), len(registry)), dtype=registry.field.dtype)
        for r, s in enumerate(symbols):
            c[r, registry.index(s)] = 1
        return cls(name, registry, c)

    def __len__(self):
        return self.coeffs.shape[0]

    def rows(self) -> list[LinearExpr]:
        return [LinearExpr(self.registry, self.coeffs[i], int(self.constants[i])) for i in range(len(self))]

    def evaluate(self, assignment) -> np.ndarray:
        """Values of every row; ``assignment`` is (s,) or (s, n) for n states at once."""
        f = self.registry.field
        x = f.asarray(assignment)
        if f.is_prime_field and f.dtype is np.int64 and len(self.registry) * (f.p - 1) ** 2 < 2**62:
            return (self.coeffs @ x + (self.constants if x.ndim == 1 else self.constants[:, None])) % f.p
        if x.ndim == 1:
            acc = self.constants.copy()
            for j in np.nonzero(np.any(self.coeffs != 0, axis=0))[0]:
                acc = f.vadd(acc, f.vmul(self.coeffs[:, j], x[j]))
            return acc
        acc = np.broadcast_to(self.constants[:, None], (len(self), x.shape[1])).copy()
        for j in np.nonzero(np.any(self.coeffs != 0, axis=0))[0]:
            acc = f.vadd(acc, f.vmul(self.coeffs[:, j][:, None], x[j][None, :]))
        return acc


def join(name: str, *bundles: VariableBundle) -> VariableBundle:
    """Concatenate bundles (the joint variable)."""
    bundles = [b for b in bundles if b is not None]
    reg = bundles[0].registry
    if any(b.registry is not reg for b in bundles):
        raise SecAggError("bundles from different registries")
    return VariableBundle(
        name,
        reg,
        np.vstack([b.coeffs for b in bundles]),
        np.concatenate([b.constants for b in bundles]),
    )
