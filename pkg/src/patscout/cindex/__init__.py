"""Repository indexing: parse C/C++ sources into function records and a call graph."""

from patscout.cindex.model import (
    CallGraph,
    CodeIndex,
    FunctionRecord,
    SourceFile,
    StatementNode,
)
from patscout.cindex.build import callees_of, callers_of, index_repository, load_index_dump
from patscout.cindex.parser import parse_source, rename_identifiers, split_call_arguments, tokenize

__all__ = [
    "CallGraph",
    "CodeIndex",
    "FunctionRecord",
    "SourceFile",
    "StatementNode",
    "callees_of",
    "callers_of",
    "index_repository",
    "load_index_dump",
    "parse_source",
    "rename_identifiers",
    "split_call_arguments",
    "tokenize",
]
