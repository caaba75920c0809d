"""
Entry point for the circuit adaptation command line.
Subcommands: adapt, bench, sim and emit-smt. Exits 0 on success and 2 with
a one-line diagnostic on stderr when the input is rejected.
"""

import argparse
import asyncio
import json
import logging
import os
import sys
import uuid
from datetime import datetime
from pathlib import Path

# Ensure the project root is importable when run as a script
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from backend import config  # loads .env
from backend.adaptation.adapt import ADAPTERS, prepare, run_adapter
from backend.adaptation.bench import (
    ADAPTATION_ERRORS,
    ExperimentConfig,
    run_experiment,
    write_csv,
)
from backend.adaptation.circuit_ir import (
    load_cost_model,
    parse_circuit,
    serialize_circuit,
)
from backend.adaptation.logging_utils import FORMAT, get_run_logger, log_solver_call
from backend.adaptation.noise_sim import (
    hellinger_fidelity,
    noise_from_cost,
    simulate_distribution,
    statevector_distribution,
)
from backend.adaptation.smt_model import OBJECTIVES, emit_smtlib
from backend.adaptation.subrules import default_rules, load_rule_file

logger = logging.getLogger("backend.run")

EXIT_USAGE = 2


def _add_circuit_args(p: argparse.ArgumentParser, with_adapter: bool = True) -> None:
    p.add_argument("circuit", help="circuit text file")
    p.add_argument("--cost", default=config.ADAPT_COST_MODEL, help="preset id or cost model JSON")
    p.add_argument("--objective", choices=OBJECTIVES, default="fidelity")
    p.add_argument("--rules", help="JSON file with extra template rules")
    p.add_argument(
        "--diabatic", action="store_true", default=config.ADAPT_ENABLE_DIABATIC,
        help="register diabatic CZ rules",
    )
    if with_adapter:
        p.add_argument("--adapter", choices=ADAPTERS, default="sat")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adapt", description="Cost-aware circuit adaptation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("adapt", help="adapt a circuit to the target gate set")
    _add_circuit_args(p)
    p.add_argument("--solver", choices=("internal", "emit-smt"), default="internal")
    p.add_argument("--out", help="output file (stdout if omitted)")

    p = sub.add_parser("emit-smt", help="write the SMT-LIB2 optimization script")
    _add_circuit_args(p, with_adapter=False)
    p.add_argument("--out", help="output file (stdout if omitted)")

    p = sub.add_parser("sim", help="simulate the adapted circuit under noise")
    _add_circuit_args(p)

    p = sub.add_parser("bench", help="run a benchmark sweep")
    p.add_argument("--config", required=True, help="ExperimentConfig JSON file")
    p.add_argument("--out", help="CSV output path (overrides the config)")
    p.add_argument("--persist", action="store_true", help="store the run in the database")
    return parser


def _rules(args: argparse.Namespace):
    rules = default_rules(args.diabatic)
    if args.rules:
        rules.extend(load_rule_file(args.rules))
    return rules


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
        logger.info("Wrote %s", out)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def cmd_adapt(args: argparse.Namespace) -> int:
    circuit = parse_circuit(Path(args.circuit).read_text())
    cm = load_cost_model(args.cost)
    problem = prepare(circuit, cm, _rules(args))
    if args.solver == "emit-smt":
        _write(emit_smtlib(problem.model(args.objective)), args.out)
        return 0
    adapted = run_adapter(circuit, cm, args.adapter, args.objective, problem=problem)
    log_solver_call(
        logger,
        "adapt",
        {"adapter": args.adapter, "objective": args.objective, "matches": len(problem.matches)},
        {"chosen": list(adapted.chosen), "metrics": adapted.metrics, "objective_value": adapted.objective_value},
    )
    _write(serialize_circuit(adapted.circuit), args.out)
    return 0


def cmd_emit_smt(args: argparse.Namespace) -> int:
    circuit = parse_circuit(Path(args.circuit).read_text())
    problem = prepare(circuit, load_cost_model(args.cost), _rules(args))
    _write(emit_smtlib(problem.model(args.objective)), args.out)
    return 0


def cmd_sim(args: argparse.Namespace) -> int:
    circuit = parse_circuit(Path(args.circuit).read_text())
    cm = load_cost_model(args.cost)
    problem = prepare(circuit, cm, _rules(args))
    adapted = run_adapter(circuit, cm, args.adapter, args.objective, problem=problem)
    ideal = statevector_distribution(circuit)
    noisy = simulate_distribution(adapted, noise_from_cost(cm))
    result = {"distribution": noisy, "hellinger": hellinger_fidelity(noisy, ideal)}
    sys.stdout.write(json.dumps(result, indent=2, sort_keys=True) + "\n")
    return 0


async def _persist(run_id: str, cfg: ExperimentConfig, rows) -> None:
    from backend.db.connection import AsyncSessionLocal
    from backend.db.init_db import init_db
    from backend.db.repository import ExperimentRepository

    await init_db()
    async with AsyncSessionLocal() as session:
        repo = ExperimentRepository(session)
        await repo.save_run(run_id, cfg, status="completed")
        await repo.add_rows(run_id, rows)


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig.model_validate_json(Path(args.config).read_text())
    if args.out:
        cfg = cfg.model_copy(update={"output_path": args.out})
    run_id = datetime.now().strftime("%Y%m%d_%H%M%S") + "_" + uuid.uuid4().hex[:6]
    run_logger = get_run_logger(run_id)
    run_logger.info("Starting %s sweep over %d seed(s)", cfg.family, len(cfg.seeds))
    rows = run_experiment(cfg)
    run_logger.info("Finished with %d rows", len(rows))
    if not cfg.output_path:
        write_csv(rows, Path(config.ADAPT_LOG_DIR) / f"{run_id}.csv")
    if args.persist:
        asyncio.run(_persist(run_id, cfg, rows))
        run_logger.info("Stored run %s", run_id)
    return 0


COMMANDS = {
    "adapt": cmd_adapt,
    "emit-smt": cmd_emit_smt,
    "sim": cmd_sim,
    "bench": cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO, format=FORMAT, stream=sys.stderr
    )
    try:
        return COMMANDS[args.command](args)
    except (*ADAPTATION_ERRORS, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
