from typing import Dict, List


def generate_report(
    command: str,
    summary: Dict,
    contract: Dict
) -> Dict:

    explanation: List[str] = []

    # -------------------------------------------------
    # 1️⃣ Spectral structure
    # -------------------------------------------------
    gaps = summary.get("gaps")
    if gaps is not None:
        if gaps:
            explanation.append(
                f"{len(gaps)} spectral gaps were detected; the widest is labelled by k={gaps[0]['k']}."
            )
        else:
            explanation.append(
                "No spectral gaps were detected at this resolution."
            )

    components = summary.get("component_count")
    if components is not None:
        explanation.append(
            f"The energy grid splits into {components} components across "
            f"{len(summary.get('layers', {}))} resonance layers "
            f"({'within' if summary.get('within_bound', True) else 'above'} the combinatorial bound)."
        )

    # -------------------------------------------------
    # 2️⃣ Reduction
    # -------------------------------------------------
    steps = summary.get("steps")
    if steps is not None:
        resonant = [s for s in steps if s.get("resonance")]
        if resonant:
            explanation.append(
                f"The reduction completed {len(steps)} steps with {len(resonant)} resonant rotations."
            )
        else:
            explanation.append(
                f"The reduction completed {len(steps)} steps without resonances."
            )

    # -------------------------------------------------
    # 3️⃣ Spectral transform
    # -------------------------------------------------
    frame = summary.get("frame_bounds")
    if frame is not None:
        lower, upper = frame
        explanation.append(
            f"The spectral transform preserves norms within [{lower:.3f}, {upper:.3f}]."
        )
    if summary.get("coarse_grid"):
        explanation.append(
            f"The energy grid is too coarse: {summary.get('lost_mass', 0.0):.2e} of the rotation-number mass has no eigenfunction."
        )

    # -------------------------------------------------
    # 4️⃣ Oscillatory integrals
    # -------------------------------------------------
    if "unflagged_violations" in summary:
        count = summary["unflagged_violations"]
        if count == 0:
            explanation.append(
                "Every oscillatory integral stayed below its certified bound."
            )
        else:
            explanation.append(
                f"{count} oscillatory integrals exceeded their certified bound."
            )

    # -------------------------------------------------
    # 5️⃣ Dispersion
    # -------------------------------------------------
    slope = summary.get("slope")
    if slope is not None:
        explanation.append(
            f"The sup norm decays like ⟨t⟩^{slope:.3f}."
        )
    if summary.get("boundary_reached"):
        explanation.append(
            "The wavefront reached the window edge; later times were not used."
        )

    # -------------------------------------------------
    # 6️⃣ Nonlinear bootstrap
    # -------------------------------------------------
    if "bootstrap_passes" in summary:
        if summary["bootstrap_passes"]:
            explanation.append(
                f"The nonlinear solution kept the linear decay rate (margin {summary['margin']:.3f})."
            )
        else:
            explanation.append(
                f"The nonlinear solution broke the decay bootstrap (margin {summary['margin']:.3f})."
            )

    # -------------------------------------------------
    # 7️⃣ Final verdict
    # -------------------------------------------------
    verdict = contract.get("verdict", "PASS")

    if verdict == "PASS":
        explanation.append(
            f"All numerical contracts of {command} hold."
        )
    else:
        explanation.append(
            f"{command} violated: {', '.join(contract.get('violations', []))}."
        )

    return {
        "command": command,
        "verdict": verdict,
        "explanation": explanation,
        "contract_breakdown": contract.get("breakdown", {})
    }
