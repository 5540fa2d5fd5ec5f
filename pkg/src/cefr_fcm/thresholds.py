from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class ClassifyThresholds:
    """Cut-offs for classification type and certainty band."""

    tau_clear: float = 0.5
    tau_trans: float = 0.15
    cert_low: float = 0.4
    cert_high: float = 0.7

    def __post_init__(self):
        if not 0.0 < self.tau_trans < self.tau_clear <= 1.0:
            raise ValueError("thresholds must satisfy 0 < tau_trans < tau_clear <= 1")
        if not 0.0 < self.cert_low < self.cert_high < 1.0:
            raise ValueError("thresholds must satisfy 0 < cert_low < cert_high < 1")

    @classmethod
    def unchecked(cls, **values: float) -> "ClassifyThresholds":
        """Build thresholds without the ordering checks, for sensitivity overrides
        such as ``tau_clear=0``. Values must still lie in ``[0, 1]``."""
        obj = object.__new__(cls)
        for name in ("tau_clear", "tau_trans", "cert_low", "cert_high"):
            value = float(values.get(name, getattr(cls, name)))
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
            object.__setattr__(obj, name, value)
        return obj

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifyThresholds":
        return cls(**{k: float(v) for k, v in d.items()})
