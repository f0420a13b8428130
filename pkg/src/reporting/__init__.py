# CSV tables, YAML summaries and the run manifest
from .documents import read_document, to_plain, write_document
from .manifest import RunManifest, sha256_file
from .tables import read_table, write_audit_rows, write_contact_rows, write_node_stats, write_refinement, write_table

__all__ = [
    "read_document",
    "to_plain",
    "write_document",
    "RunManifest",
    "sha256_file",
    "read_table",
    "write_audit_rows",
    "write_contact_rows",
    "write_node_stats",
    "write_refinement",
    "write_table",
]
