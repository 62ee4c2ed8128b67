# qpdl/errors.py

from typing import Optional, Sequence


class NumericalContractError(RuntimeError):
    """A measured quantity broke one of the numerical contracts (exit 3)."""

    def __init__(self, contract: str, detail: str):
        self.contract = contract
        self.detail = detail
        super().__init__(f"{contract}: {detail}")


class KamStepError(NumericalContractError):

    def __init__(self, step: int, reason: str, k: Optional[Sequence[int]] = None):
        self.step = step
        self.k = None if k is None else tuple(int(x) for x in k)
        detail = f"step {step} aborted: {reason}"
        if self.k is not None:
            detail += f" (k={self.k})"
        super().__init__("kam_step", detail)


class WindowTooSmallError(NumericalContractError):

    def __init__(self, required: int, actual: int):
        self.required = required
        self.actual = actual
        super().__init__(
            "wavefront_margin",
            f"window half-width {actual} < required {required}",
        )
