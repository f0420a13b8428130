# 2D viscoelastic frictional contact: mesh, laws, scenarios, assembly and reports
from .assembly import ContactModel, assemble_model, assemble_spaces, build_abstract, constitutive_stress
from .laws import BoundaryLaws, Material, scan_laws
from .mesh import RectMesh
from .report import complementarity_report, energy_gap
from .scenario import ContactScenario, LoadSpec, load_scenario, parse_scenario

__all__ = [
    "ContactModel",
    "assemble_model",
    "assemble_spaces",
    "build_abstract",
    "constitutive_stress",
    "BoundaryLaws",
    "Material",
    "scan_laws",
    "RectMesh",
    "complementarity_report",
    "energy_gap",
    "ContactScenario",
    "LoadSpec",
    "load_scenario",
    "parse_scenario",
]
