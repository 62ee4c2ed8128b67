#contract_engine.py
import math
from typing import Dict, Optional


class ContractEngine:
    """
    Aggregates measured contract quantities against their limits.
    A contract holds when value <= limit; any breach fails the run.
    """

    def __init__(self, limits: Dict[str, float]):
        self.limits = limits
        self._validate_limits()

    def _validate_limits(self):
        if not self.limits:
            raise ValueError("At least one contract limit is required")

        for name, limit in self.limits.items():
            if not isinstance(limit, (int, float)) or not limit > 0:
                raise ValueError(
                    f"Limit for {name} must be a positive number, got {limit!r}"
                )

    def compute(self, measurements: Dict[str, Optional[float]]) -> Dict:
        """
        Checks every measured quantity that has a limit.
        Quantities not measured by a stage are passed as None and skipped.
        """

        breakdown = {}
        violations = []

        for name, value in measurements.items():

            if name not in self.limits:
                raise ValueError(f"No limit configured for {name}")

            if value is None:
                continue

            value = float(value)
            limit = float(self.limits[name])

            # NaN never satisfies a contract
            ok = not math.isnan(value) and value <= limit

            breakdown[name] = {"value": value, "limit": limit, "ok": ok}
            if not ok:
                violations.append(name)

        verdict = "PASS" if not violations else "FAIL"

        return {
            "verdict": verdict,
            "violations": violations,
            "breakdown": breakdown
        }
