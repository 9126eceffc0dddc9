"""Lossless lexing, parsing and printing of the supported C subset."""

from .lexer import Token, tokenize
from .parser import parse_file
from .printer import (
    append_text,
    delete_span,
    delete_spans,
    format_tokens,
    insert_before,
    line_key,
    normalize,
    print_ast,
)
from .project import ProjectModel, SourceUnit, from_texts, load_project
from .syntax import (
    CONDITIONAL_BLOCK,
    CONSTANT_DEFINITION,
    FUNCTION_DECLARATION,
    FUNCTION_DEFINITION,
    GLOBAL_VARIABLE,
    INCLUDE_DIRECTIVE,
    TYPE_DEFINITION,
    Ast,
    CType,
    Decl,
    Element,
    Signature,
    Stmt,
)
