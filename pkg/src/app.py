"""
Contact Solver - Main Application

Coordinates:
- Scenario loading and model assembly
- Hypothesis audits (the gate in front of every solve)
- Time-marching and global Picard evolution solves
- Complementarity reports, CSV tables and the run manifest
- Scalar / low-dimensional toy instances
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from .audit import AuditConfig, run_audit
from .contact import ContactModel, assemble_model, complementarity_report, energy_gap, load_scenario
from .core.errors import ScenarioError, SolverError
from .history.grid import QuadratureRule, trajectory_distance
from .reporting import (
    RunManifest,
    write_audit_rows,
    write_contact_rows,
    write_document,
    write_node_stats,
    write_refinement,
)
from .solvers.elliptic import SolveConfig
from .solvers.evolution import EvolutionConfig, EvolutionMode, picard_global, refinement_study, time_march
from .toys import TOYS, run_toy

logger = logging.getLogger(__name__)

MODES = {
    "march": EvolutionMode.TIME_MARCH,
    "picard": EvolutionMode.GLOBAL_PICARD,
    "both": EvolutionMode.BOTH,
}

ODE_STEPS = (100, 200, 400, 800)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class ContactSolverApp:
    """
    Command orchestrator.

    Settings precedence: config/settings.yaml < scenario file < CLI flags.
    """

    def __init__(self, config_path: str = "config/settings.yaml", overrides: Optional[Dict[str, Any]] = None):
        self.config = self._load_config(config_path)
        self.overrides = {k: v for k, v in (overrides or {}).items() if v is not None}

    def _load_config(self, config_path: str) -> Dict[str, Any]:
        """Load application configuration."""
        path = Path(config_path)
        if path.exists():
            with open(path) as f:
                return yaml.safe_load(f) or {}
        logger.info(f"No settings file at {path}, using defaults")
        return {}

    # -- settings ----------------------------------------------------------

    @property
    def seed(self) -> int:
        return int(self.overrides.get("seed", self.config.get("audit", {}).get("seed", 0)))

    @property
    def output_dir(self) -> Path:
        out = self.overrides.get("out") or self.config.get("output", {}).get("directory", "output")
        return Path(out)

    @property
    def rule(self) -> QuadratureRule:
        return QuadratureRule(self.config.get("evolution", {}).get("rule", QuadratureRule.LEFT_RECTANGLE.value))

    def audit_config(self) -> AuditConfig:
        data = dict(self.config.get("audit") or {})
        data["seed"] = self.seed
        return AuditConfig.from_dict(data)

    def solve_config(self, scenario_solver: Optional[SolveConfig] = None) -> SolveConfig:
        data = dict(self.config.get("solver") or {})
        if scenario_solver is not None:
            defaults = SolveConfig().to_dict()
            data.update({k: v for k, v in scenario_solver.to_dict().items() if v != defaults[k]})
        if "tol" in self.overrides:
            data["inner_tol"] = float(self.overrides["tol"])
        return SolveConfig.from_dict(data)

    def evolution_config(self, model: ContactModel, mode: EvolutionMode) -> EvolutionConfig:
        data = {k: v for k, v in (self.config.get("evolution") or {}).items() if k not in ("rule", "mode")}
        data.update(model.scenario.evolution)
        if "tol" in self.overrides:
            data["picard_tol"] = float(self.overrides["tol"])
        return EvolutionConfig(
            grid=model.scenario.grid,
            frozen_cfg=self.solve_config(model.scenario.solver),
            mode=mode,
            **data,
        )

    def manifest(self, command: str, scenario: Optional[str]) -> RunManifest:
        return RunManifest(
            command=command,
            scenario=scenario,
            overrides=dict(sorted(self.overrides.items())),
            seed=self.seed,
            output_dir=str(self.output_dir),
        )

    def load_model(self, scenario_path: str) -> ContactModel:
        scn = load_scenario(scenario_path)
        return assemble_model(scn, self.rule)

    # -- commands ----------------------------------------------------------

    def _audit(self, model: ContactModel, manifest: RunManifest) -> bool:
        report = run_audit(model.problem, self.audit_config(), model=model)
        manifest.record(write_document(self.output_dir / "audit.yaml", report.to_dict()))
        manifest.record(write_audit_rows(self.output_dir / "audit.csv", report))
        for entry in report.failures():
            logger.error(f"Audit gate failed: {entry.name}: claimed {entry.claimed}, estimate {entry.estimate}")
        return report.passed

    def cmd_audit(self, scenario_path: str) -> int:
        manifest = self.manifest("audit", scenario_path)
        manifest.write()
        model = self.load_model(scenario_path)
        passed = self._audit(model, manifest)
        manifest.write()
        logger.info(f"Audit {'passed' if passed else 'FAILED'} for {model.scenario.name}")
        return EXIT_OK if passed else EXIT_FAILURE

    def cmd_simulate(self, scenario_path: str, mode: str = "march", halve_dt: int = 0, audit_only: bool = False) -> int:
        manifest = self.manifest("simulate", scenario_path)
        manifest.overrides.update({"mode": mode, "halve_dt": halve_dt})
        manifest.write()

        model = self.load_model(scenario_path)
        if not self._audit(model, manifest):
            manifest.write()
            logger.error("Refusing to simulate: audit gates failed")
            return EXIT_FAILURE
        if audit_only:
            manifest.write()
            return EXIT_OK

        p = model.problem
        evo = self.evolution_config(model, MODES[mode])
        out = self.output_dir
        summary: Dict[str, Any] = {
            "scenario": model.scenario.name,
            "dofs": p.dim,
            "load_scale": p.scale,
            "smallness": model.smallness.to_dict(),
            "config": evo.to_dict(),
        }

        runs = {}
        if evo.mode in (EvolutionMode.TIME_MARCH, EvolutionMode.BOTH):
            runs["march"] = time_march(p, evo)
        if evo.mode in (EvolutionMode.GLOBAL_PICARD, EvolutionMode.BOTH):
            runs["picard"] = picard_global(p, evo)
        for name, run in runs.items():
            summary[name] = run.to_dict()
            manifest.record(write_node_stats(out / f"nodes_{name}.csv", run))
        if len(runs) == 2:
            distance = trajectory_distance(
                runs["march"].trajectory, runs["picard"].trajectory, p.metric, p.histories.rule
            )
            summary["cross_method_distance"] = distance
            logger.info(f"Cross-method distance {distance:.3e} (picard_tol {evo.picard_tol:.1e})")

        trajectory = next(iter(runs.values())).trajectory
        contact = complementarity_report(model, trajectory)
        manifest.record(write_contact_rows(out / "contact.csv", contact))
        summary["complementarity"] = contact.summary.to_dict()
        summary["energy_gap"] = energy_gap(model, trajectory)

        if halve_dt:
            study = refinement_study(p, evo, halve_dt)
            summary["refinement"] = study.to_dict()
            manifest.record(
                write_refinement(out / "refinement.csv", study.steps, study.differences, study.errors, study.ratios)
            )

        manifest.record(write_document(out / "summary.yaml", summary))
        manifest.write()
        logger.info(f"Simulation of {model.scenario.name} complete, outputs in {out}")
        return EXIT_OK

    def cmd_toy(self, name: str) -> int:
        if name not in TOYS:
            raise ScenarioError(f"unknown toy instance {name!r}; available: {', '.join(TOYS)}")
        manifest = self.manifest("toy", name)
        manifest.write()
        workers = int((self.config.get("evolution") or {}).get("workers", 1))
        result = run_toy(name, self.seed, self.solve_config(), ODE_STEPS, workers)
        manifest.record(write_document(self.output_dir / f"toy_{name}.yaml", result.to_dict()))
        manifest.write()

        print(f"{name}: w = {result.solution}")
        print(f"  Minty minimum: {result.minty_min:.3e}")
        if result.stability_ratio is None:
            print(f"  stability: {result.stability_note or 'skipped'}")
        else:
            print(f"  stability ratio: {result.stability_ratio:.3e}")
        if result.ode_errors:
            for steps, err in sorted(result.ode_errors.items()):
                print(f"  N={steps}: L2 error vs exp(-t) = {err:.3e}")
            print(f"  error ratios: {', '.join(f'{r:.3f}' for r in result.ode_ratios)}")
        return EXIT_OK


def setup_logging(level: str = "INFO", log_file: Optional[str] = None):
    """Configure logging."""
    handlers = [logging.StreamHandler()]
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(
        level=getattr(logging, level.upper()),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        handlers=handlers,
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="History-dependent variational-hemivariational solver with a viscoelastic contact model"
    )
    parser.add_argument("-c", "--config", default="config/settings.yaml",
                        help="Configuration file path")
    parser.add_argument("--log-level", default=None,
                        help="Logging level (DEBUG, INFO, WARNING, ERROR)")
    parser.add_argument("--log-file", default=None,
                        help="Log file path")
    parser.add_argument("--seed", type=int, default=None,
                        help="Audit / probe seed")
    parser.add_argument("--out", default=None,
                        help="Output directory")
    parser.add_argument("--tol", type=float, default=None,
                        help="Override inner and Picard tolerances")

    sub = parser.add_subparsers(dest="command", required=True)

    audit = sub.add_parser("audit", help="Run the hypothesis audits for a scenario")
    audit.add_argument("--scenario", required=True, help="Scenario YAML path")

    sim = sub.add_parser("simulate", help="Audit, then solve a contact scenario")
    sim.add_argument("--scenario", required=True, help="Scenario YAML path")
    sim.add_argument("--mode", choices=sorted(MODES), default="march",
                     help="Evolution solver (default: march)")
    sim.add_argument("--halve-dt", type=int, default=0, metavar="K",
                     help="Also run a refinement study over K halvings of the time step")
    sim.add_argument("--audit-only", action="store_true",
                     help="Stop after the audit gate")

    toy = sub.add_parser("toy", help="Solve a scalar / low-dimensional instance")
    toy.add_argument("name", help=f"One of: {', '.join(TOYS)}")
    return parser


def main(argv=None) -> int:
    """Application entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    app = ContactSolverApp(args.config, {"seed": args.seed, "out": args.out, "tol": args.tol})
    log_cfg = app.config.get("logging") or {}
    setup_logging(args.log_level or log_cfg.get("level", "INFO"), args.log_file or log_cfg.get("file"))

    try:
        if args.command == "audit":
            return app.cmd_audit(args.scenario)
        if args.command == "simulate":
            return app.cmd_simulate(args.scenario, args.mode, args.halve_dt, args.audit_only)
        return app.cmd_toy(args.name)
    except ScenarioError as e:
        logger.error(f"{e}")
        return EXIT_USAGE
    except SolverError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_FAILURE
    except ValueError as e:
        logger.error(f"Invalid settings: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
