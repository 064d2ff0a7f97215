"""Acceleration-parameter sequences for FISTA-type methods.

A sequence (t_k) is admissible when t_0 = 1 and, for every k >= 1,
t_k >= 1 and t_k^2 - t_k <= t_{k-1}^2.  Equivalently, 1 <= t_k <= phi(t_{k-1})
with phi(t) = (1 + sqrt(1 + 4 t^2)) / 2.  The classical choice takes the
upper endpoint (the "critical" sequence); slower-growing admissible choices
interpolate between plain proximal gradient (t_k = 1) and full acceleration
(t_k ~ k).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

FAMILY_KINDS = ("constant_one", "linear", "critical", "power")
POWER_BASES = ("linear_half", "critical")


def phi(t: float) -> float:
    """Upper admissibility endpoint phi(t) = (1 + sqrt(1 + 4 t^2)) / 2.

    Satisfies phi(t) - t > 1/2 for every t >= 1, with phi(t) - t -> 1/2
    as t -> +inf.
    """
    if t < 1.0:
        raise ValueError(f"phi is defined on [1, +inf); got t={t}")
    return 0.5 + math.sqrt(0.25 + t * t)


def beta(t_k: float, t_next: float) -> float:
    """Momentum coefficient (t_k - 1) / t_{k+1} used in the extrapolation step."""
    return (t_k - 1.0) / t_next


@dataclass(frozen=True)
class ParamFamily:
    """Tagged description of an admissible parameter family.

    kind:
      - "constant_one":  t_k = 1 (no acceleration, proximal gradient)
      - "linear":        t_k = (k + a) / a, a >= 2
      - "critical":      t_{k+1} = phi(t_k), t_0 = 1
      - "power":         t_k = s_k^alpha with s_k from `base`, 0 < alpha <= 1;
                         base "linear_half" means s_k = (k + 2) / 2
    """

    kind: str
    a: float = 2.0
    alpha: float = 1.0
    base: str = "linear_half"

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}")
        if self.kind == "linear" and not self.a >= 2.0:
            raise ValueError(f"linear family requires a >= 2; got a={self.a}")
        if self.kind == "power":
            if not 0.0 < self.alpha <= 1.0:
                raise ValueError(f"power family requires 0 < alpha <= 1; got {self.alpha}")
            if self.base not in POWER_BASES:
                raise ValueError(f"unknown power base {self.base!r}")

    def to_config(self) -> dict:
        cfg = {"family": self.kind}
        if self.kind == "linear":
            cfg["a"] = self.a
        elif self.kind == "power":
            cfg["alpha"] = self.alpha
            cfg["base"] = self.base
        return cfg

    @staticmethod
    def from_config(cfg: dict) -> "ParamFamily":
        kind = cfg.get("family")
        if kind == "linear":
            return ParamFamily("linear", a=float(cfg.get("a", 2.0)))
        if kind == "power":
            return ParamFamily(
                "power",
                alpha=float(cfg.get("alpha", 1.0)),
                base=cfg.get("base", "linear_half"),
            )
        if kind in ("constant_one", "critical"):
            return ParamFamily(kind)
        raise ValueError(f"unknown family kind {kind!r}")


@dataclass
class ParamSequence:
    """Lazily extendable sequence of admissible parameters t_0, t_1, ...

    By convention t_{-1} = 0, which the energy bookkeeping relies on
    (exposed as `t_minus_one`).  Instances are plain values: copy freely.
    """

    family: ParamFamily
    values: list = field(default_factory=list)
    t_minus_one: float = 0.0
    _base_values: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self.values:
            self.values = [1.0]
        if self.family.kind == "power" and self.family.base == "critical" and not self._base_values:
            self._base_values = [1.0]

    def __len__(self) -> int:
        return len(self.values)

    def t(self, k: int) -> float:
        """t_k, extending the sequence as needed.  t(-1) returns 0."""
        if k == -1:
            return self.t_minus_one
        if k < -1:
            raise IndexError(f"index {k} out of range")
        while len(self.values) <= k:
            self.next_t()
        return self.values[k]

    __getitem__ = t

    def next_t(self) -> float:
        """Append and return the next value according to the family rule."""
        k = len(self.values)  # index being generated
        fam = self.family
        if fam.kind == "constant_one":
            val = 1.0
        elif fam.kind == "linear":
            val = (k + fam.a) / fam.a
        elif fam.kind == "critical":
            val = phi(self.values[-1])
        else:  # power
            if fam.base == "linear_half":
                base_val = (k + 2.0) / 2.0
            else:
                self._base_values.append(phi(self._base_values[-1]))
                base_val = self._base_values[-1]
            val = base_val**fam.alpha
        self.values.append(val)
        return val

    def prefix(self, k_max: int) -> np.ndarray:
        """Array [t_0, ..., t_{k_max}]."""
        self.t(k_max)
        return np.asarray(self.values[: k_max + 1], dtype=float)


@dataclass(frozen=True)
class AdmissibilityReport:
    ok: bool
    first_violation: Optional[int] = None
    reason: Optional[str] = None


def validate_admissible(prefix, tol: float = 1e-12) -> AdmissibilityReport:
    """Check t_0 = 1 and t_k >= 1, t_k^2 - t_k <= t_{k-1}^2 for k >= 1.

    The quadratic inequality is tested up to `tol` scaled by max(1, t_{k-1}^2),
    so that sequences generated at the admissibility boundary are not rejected
    for accumulated rounding (the residual of the recursion grows like
    eps * t^2).
    """
    prefix = np.asarray(prefix, dtype=float)
    if prefix.size == 0:
        raise ValueError("empty prefix")
    if abs(prefix[0] - 1.0) > tol:
        return AdmissibilityReport(False, 0, f"t_0 = {prefix[0]} != 1")
    for k in range(1, prefix.size):
        tk, tp = prefix[k], prefix[k - 1]
        if tk < 1.0 - tol:
            return AdmissibilityReport(False, k, f"t_{k} = {tk} < 1")
        slack = tk * tk - tk - tp * tp
        if slack > tol * max(1.0, tp * tp):
            return AdmissibilityReport(
                False, k, f"t_{k}^2 - t_{k} = {tk * tk - tk} > t_{k - 1}^2 = {tp * tp}"
            )
    return AdmissibilityReport(True)
