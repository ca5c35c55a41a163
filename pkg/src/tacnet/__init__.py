"""Deterministic simulator for industrial 5G/TSN device onboarding and
multi-domain QoS provisioning."""

from .engine import Engine, Message, Trace
from .model import QoSProfile, RegistrationState, UseCase, UseCaseGroup, derive_qos_profile
from .orchestrator import E2EProvision, MultiDomainManager, ProvisionFailure
from .scenario import Scenario, ScenarioError, load_scenario, parse_scenario
from .tsn import CNC, StreamRequest, cnc_admit

__all__ = [
    "CNC",
    "E2EProvision",
    "Engine",
    "Message",
    "MultiDomainManager",
    "ProvisionFailure",
    "QoSProfile",
    "RegistrationState",
    "Scenario",
    "ScenarioError",
    "StreamRequest",
    "Trace",
    "UseCase",
    "UseCaseGroup",
    "cnc_admit",
    "derive_qos_profile",
    "load_scenario",
    "parse_scenario",
]

__version__ = "0.1.0"
