"""Built-in classical symbols ``f`` (and potentials ``q``) on the models."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import UnsupportedModelError
from .geometry import NORTH, PLANE, SPHERE, KahlerModel

BUILTINS = ("zero", "const", "abs2", "cos_theta", "poly")


@dataclass(frozen=True)
class SymbolSpec:
    """A symbol split into a constant part and a variable part.

    The constant part ``shift`` is never sampled: estimators multiply by
    ``exp(-shift * t)`` analytically, so ``f + c`` and ``f`` share paths exactly.

    ``coeffs`` (``poly`` only) maps exponent pairs ``(i, j)`` to the
    coefficient of ``u1**i * u2**j`` in chart coordinates of the plane.
    """

    name: str = "zero"
    shift: float = 0.0
    coeffs: tuple[tuple[tuple[int, int], float], ...] = field(default=())

    def __post_init__(self):
        if self.name not in BUILTINS:
            raise ValueError(f"unknown symbol {self.name!r}; expected one of {BUILTINS}")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def const(cls, c: float):
        return cls("const", shift=float(c))

    @classmethod
    def abs2(cls):
        return cls("abs2")

    @classmethod
    def cos_theta(cls):
        return cls("cos_theta")

    @classmethod
    def poly(cls, coeffs: dict):
        return cls("poly", coeffs=tuple(sorted((tuple(map(int, k)), float(v)) for k, v in coeffs.items())))

    def shifted(self, c: float) -> "SymbolSpec":
        return replace(self, shift=self.shift + float(c))

    @property
    def is_constant(self) -> bool:
        return self.name in ("zero", "const")

    # Kato metadata: (f+ locally Kato, f- Kato); None means not established.
    @property
    def kato_flags(self) -> tuple[bool, bool | None]:
        if self.name == "poly":
            return True, None
        return True, True

    def check_model(self, model: KahlerModel) -> None:
        if self.name == "cos_theta" and model.kind != SPHERE:
            raise UnsupportedModelError("symbol cos_theta requires the sphere model")
        if self.name in ("abs2", "poly") and model.kind != PLANE:
            raise UnsupportedModelError(f"symbol {self.name} requires the plane model")

    def variable(self, model: KahlerModel, chart, z):
        """The non-constant part, vectorized over chart ids and coordinates."""
        z = np.asarray(z)
        if self.is_constant:
            return np.zeros(z.shape)
        self.check_model(model)
        if self.name == "abs2":
            return np.abs(z) ** 2
        if self.name == "cos_theta":
            r2 = np.abs(z) ** 2
            val = (1.0 - r2) / (1.0 + r2)
            return np.where(np.asarray(chart) == NORTH, -val, val)
        out = np.zeros(z.shape)
        for (i, j), a in self.coeffs:
            out = out + a * z.real**i * z.imag**j
        return out

    def __call__(self, model: KahlerModel, chart, z):
        return self.variable(model, chart, z) + self.shift

    def describe(self) -> str:
        if self.name == "poly":
            terms = " + ".join(f"{a:g}*u1^{i}*u2^{j}" for (i, j), a in self.coeffs)
            return f"poly({terms}) + {self.shift:g}"
        return self.name if self.shift == 0 else f"{self.name} + {self.shift:g}"
