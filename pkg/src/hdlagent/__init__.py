"""Compiler-grounded LLM code generation for low-resource HDLs."""

__version__ = "0.1.0"

from .agent import AgentRunRecord, IterationRecord, run_agent, run_top_k
from .compiler import CompileOutcome, compile, match_fix
from .context import AblationStage, PromptBundle, build_initial_query, build_repair_query
from .extract import CodeCandidate, extract_code
from .llm import ChatRequest, CompletionResult, TokenLedger, complete
from .profile import ErrorFix, FewShotExample, HdlProfile, get_profile, load_profile, validate_profile
from .verilog_io import ModuleInterface, PortDecl, check_io_match, normalize, parse_interface

__all__ = [
    "AblationStage", "AgentRunRecord", "ChatRequest", "CodeCandidate", "CompileOutcome",
    "CompletionResult", "ErrorFix", "FewShotExample", "HdlProfile", "IterationRecord",
    "ModuleInterface", "PortDecl", "PromptBundle", "TokenLedger", "build_initial_query",
    "build_repair_query", "check_io_match", "compile", "complete", "extract_code",
    "get_profile", "load_profile", "match_fix", "normalize", "parse_interface",
    "run_agent", "run_top_k", "validate_profile",
]
