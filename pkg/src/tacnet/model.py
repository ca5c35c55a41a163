"""Shared domain types and default QoS profiles per use-case group.

All durations are integer microseconds, all rates are bits per second.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Union


class Role(str, enum.Enum):
    DTE = "DTE"
    DCE = "DCE"


class RegistrationState(str, enum.Enum):
    Unprovisioned = "Unprovisioned"
    Provisioned = "Provisioned"
    RadioAttached = "RadioAttached"
    Authorized = "Authorized"
    Configured = "Configured"
    TsnRegistered = "TsnRegistered"
    Operational = "Operational"
    Rejected = "Rejected"

    @property
    def progress(self) -> int:
        """Position along the registration sequence (Rejected sorts last)."""
        return _PROGRESS[self]

    @property
    def terminal(self) -> bool:
        return self in (RegistrationState.Operational, RegistrationState.Rejected)


_PROGRESS = {s: i for i, s in enumerate(RegistrationState)}


class UseCaseClass(str, enum.Enum):
    IndustrialApplication = "IndustrialApplication"
    GeneralFunctionality = "GeneralFunctionality"


class UseCaseGroup(str, enum.Enum):
    Monitoring = "Monitoring"
    RemoteControl = "RemoteControl"
    LocalControl = "LocalControl"
    MobileRobotics = "MobileRobotics"
    NONE = "None"


class Domain(str, enum.Enum):
    FiveG = "FiveG"
    TSN = "TSN"
    SDN = "SDN"
    IndustrialEthernet = "IndustrialEthernet"


class NodeKind(str, enum.Enum):
    EndDevice = "EndDevice"
    TsnBridge = "TsnBridge"
    SdnSwitch = "SdnSwitch"
    BaseStation = "BaseStation"
    CoreFunction = "CoreFunction"
    EdgeCloud = "EdgeCloud"


@dataclass(frozen=True)
class DeviceRecord:
    device_id: str
    role: Role
    paired_with: str
    secure_element_id: str | None = None
    dte_signature: bytes | None = None
    is_tsn_end_device: bool = False
    state: RegistrationState = RegistrationState.Unprovisioned

    def __post_init__(self):
        if self.is_tsn_end_device and self.role is not Role.DTE:
            raise ValueError(f"{self.device_id}: only a DTE can be a TSN end device")
        if self.state is not RegistrationState.Unprovisioned and self.secure_element_id is None:
            raise ValueError(f"{self.device_id}: secure element missing in state {self.state.value}")

    def with_state(self, state: RegistrationState) -> DeviceRecord:
        return replace(self, state=state)


@dataclass(frozen=True)
class Periodic:
    period: int
    frame_bytes: int

    def __post_init__(self):
        if self.period <= 0 or self.frame_bytes <= 0:
            raise ValueError("periodic traffic needs positive period and frame size")

    @property
    def rate(self) -> float:
        return self.frame_bytes * 8 * 1_000_000 / self.period


@dataclass(frozen=True)
class Bursty:
    mean_rate: int

    @property
    def rate(self) -> float:
        return float(self.mean_rate)


Traffic = Union[Periodic, Bursty]


@dataclass(frozen=True)
class QoSProfile:
    """Requirements of one use case.

    ``strict_latency`` makes the latency bound exclusive ("lower than"),
    which is how the URLLC bound of the local-control group is stated.
    """

    max_e2e_latency: int
    min_throughput: int
    reliability_target: float
    traffic: Traffic
    priority: int
    strict_latency: bool = False

    def __post_init__(self):
        if self.max_e2e_latency <= 0:
            raise ValueError("max_e2e_latency must be positive")
        if not 0.0 <= self.reliability_target <= 1.0:
            raise ValueError("reliability_target must lie in [0, 1]")
        if self.min_throughput < 0:
            raise ValueError("min_throughput must be non-negative")

    def latency_ok(self, latency: int) -> bool:
        if self.strict_latency:
            return latency < self.max_e2e_latency
        return latency <= self.max_e2e_latency


@dataclass(frozen=True)
class UseCase:
    name: str
    use_case_class: UseCaseClass
    group: UseCaseGroup
    qos: QoSProfile
    talker: str
    listeners: tuple[str, ...]

    def __post_init__(self):
        general = self.use_case_class is UseCaseClass.GeneralFunctionality
        if general != (self.group is UseCaseGroup.NONE):
            raise ValueError(f"use case {self.name!r}: group must be None iff class is GeneralFunctionality")
        if not self.listeners:
            raise ValueError(f"use case {self.name!r}: listeners must be non-empty")


# Upper bound on end-to-end latency for the most critical group (5 ms).
URLLC_LATENCY_BOUND = 5_000

# Peak 5G throughputs, downlink and uplink.
PEAK_DOWNLINK = 20_000_000_000
PEAK_UPLINK = 10_000_000_000

# Connection density target, devices per square kilometre.
DEVICE_DENSITY_PER_KM2 = 1_000_000

# Default profiles. Only the local-control latency bound is anchored to a
# published figure; the rest are chosen constants, overridable per scenario.
DEFAULT_PROFILES: dict[UseCaseGroup, QoSProfile] = {
    UseCaseGroup.LocalControl: QoSProfile(
        max_e2e_latency=URLLC_LATENCY_BOUND,
        min_throughput=512_000,
        reliability_target=0.99999,
        traffic=Periodic(period=1_000, frame_bytes=64),
        priority=0,
        strict_latency=True,
    ),
    UseCaseGroup.MobileRobotics: QoSProfile(
        max_e2e_latency=10_000,
        min_throughput=204_800,
        reliability_target=0.9999,
        traffic=Periodic(period=10_000, frame_bytes=256),
        priority=1,
    ),
    UseCaseGroup.RemoteControl: QoSProfile(
        max_e2e_latency=20_000,
        min_throughput=50_000_000,
        reliability_target=0.999,
        traffic=Bursty(mean_rate=50_000_000),
        priority=2,
    ),
    UseCaseGroup.Monitoring: QoSProfile(
        max_e2e_latency=100_000,
        min_throughput=10_000,
        reliability_target=0.99,
        traffic=Periodic(period=100_000, frame_bytes=125),
        priority=5,
    ),
}


def derive_qos_profile(group: UseCaseGroup | str) -> QoSProfile:
    group = UseCaseGroup(group)
    if group is UseCaseGroup.NONE:
        raise ValueError("general-functionality use cases carry an explicit profile")
    return DEFAULT_PROFILES[group]
