"""
Manual cross-check of the exact solver against z3's optimizer.
Emits the SMT-LIB2 script of random template circuits, solves it with z3
(pip install z3-solver) and compares the optimum with solve_exact.
Usage: python scripts/cross_check_z3.py [instances] [objective]
"""

import os
import sys

sys.path.append(os.getcwd())

from backend.adaptation.adapt import prepare
from backend.adaptation.bench import gen_template_circuit
from backend.adaptation.circuit_ir import load_cost_model
from backend.adaptation.smt_model import emit_smtlib, solve_exact

TOLERANCE = 1e-6


def z3_optimum(script: str) -> float:
    import z3

    # z3 runs the solve itself; drop the script's own commands
    body = "\n".join(
        line for line in script.splitlines() if not line.startswith(("(check-sat", "(get-", "(set-option"))
    )
    opt = z3.Optimize()
    opt.from_string(body)
    if opt.check() != z3.sat:
        raise RuntimeError("z3 found the model unsatisfiable")
    (objective,) = opt.objectives()
    value = opt.model().eval(objective, model_completion=True)
    return float(value.as_fraction())


def main(instances: int = 20, objective: str = "idle") -> int:
    cm = load_cost_model("spin_d0")
    failures = 0
    for seed in range(instances):
        problem = prepare(gen_template_circuit(3, 12, seed), cm)
        model = problem.model(objective)  # type: ignore[arg-type]
        ours = solve_exact(model).objective_value
        theirs = z3_optimum(emit_smtlib(model))
        ok = abs(ours - theirs) <= TOLERANCE
        failures += not ok
        print(f"seed {seed:3d}: matches={len(model.matches):3d} exact={ours:.9f} z3={theirs:.9f} {'ok' if ok else 'MISMATCH'}")
    print(f"{instances - failures}/{instances} instances agree")
    return 1 if failures else 0


if __name__ == "__main__":
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 20
    obj = sys.argv[2] if len(sys.argv) > 2 else "idle"
    sys.exit(main(n, obj))
