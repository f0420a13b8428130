# Sampled hypothesis audits and the audit report
from .hypotheses import (
    AuditConfig,
    AuditEntry,
    AuditReport,
    audit_contact_smallness,
    audit_h0,
    audit_histories,
    audit_j_coupling,
    audit_j_growth,
    audit_laws,
    audit_load_lipschitz,
    audit_multivalued_monotone,
    audit_operator_A,
    audit_operator_growth,
    audit_potential_phi,
    audit_relaxed_monotonicity,
    audit_trace_norm,
    run_audit,
)

__all__ = [
    "AuditConfig",
    "AuditEntry",
    "AuditReport",
    "audit_contact_smallness",
    "audit_h0",
    "audit_histories",
    "audit_j_coupling",
    "audit_j_growth",
    "audit_laws",
    "audit_load_lipschitz",
    "audit_multivalued_monotone",
    "audit_operator_A",
    "audit_operator_growth",
    "audit_potential_phi",
    "audit_relaxed_monotonicity",
    "audit_trace_norm",
    "run_audit",
]
