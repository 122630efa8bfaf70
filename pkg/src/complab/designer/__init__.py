"""Compensator synthesis: prompts, proposal parsing, endpoint client, rules and the refinement loop."""
from complab.designer.client import ChatClient, EndpointConfig, EndpointFault, RecordingClient, ReplayClient, TranscriptMismatch
from complab.designer.loop import DEFAULT_INITIAL, LlmBackend, Proposal, RuleBackend, refine_loop
from complab.designer.prompt import (
    DesignPrompt,
    SystemDescription,
    build_prompt,
    describe_system,
    direct_controller_prompt,
    downsample,
)
from complab.designer.proposal import ParseFault, parse_direct_proposal, parse_proposal
from complab.designer.rules import RuleConfig, rule_based_design, rule_based_direct_design
from complab.designer.session import DesignMode, DesignSession, Iteration, SessionStatus

__all__ = [
    "ChatClient",
    "DEFAULT_INITIAL",
    "DesignMode",
    "DesignPrompt",
    "DesignSession",
    "EndpointConfig",
    "EndpointFault",
    "Iteration",
    "LlmBackend",
    "ParseFault",
    "Proposal",
    "RecordingClient",
    "ReplayClient",
    "RuleBackend",
    "RuleConfig",
    "SessionStatus",
    "SystemDescription",
    "TranscriptMismatch",
    "build_prompt",
    "describe_system",
    "direct_controller_prompt",
    "downsample",
    "parse_direct_proposal",
    "parse_proposal",
    "refine_loop",
    "rule_based_design",
    "rule_based_direct_design",
]
