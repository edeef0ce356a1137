"""Toolchain for the Guarded States Language: compiler, image format and fabric simulator."""

from .bytecode import Image, decode_image, disassemble, encode_image
from .codegen import compile_program, compile_source
from .diagnostics import CompileError, Diagnostic
from .fabric import Fabric, RunConfig, RunReport, run
from .lexer import tokenize
from .sema import analyze
from .syntax import parse, unparse

__all__ = [
    "CompileError", "Diagnostic", "Fabric", "Image", "RunConfig", "RunReport",
    "analyze", "compile_program", "compile_source", "decode_image", "disassemble",
    "encode_image", "parse", "run", "tokenize", "unparse",
]
