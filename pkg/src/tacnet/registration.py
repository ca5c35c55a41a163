"""Initial registration state machine and the configuration server.

A DCE/DTE pair registers as one composite registrant. The transition
function is pure: it maps (state, event, capabilities) to the next state and
the actions the harness must carry out.

Relation (anything else is illegal)::

    Unprovisioned | Rejected  x OperatorProvision -> Provisioned      [PowerOn]
    Provisioned   x RadioAttachOk                 -> RadioAttached    [RequestAuthorization]
    Provisioned   x RadioAttachFail               -> Rejected
    RadioAttached x AuthzGranted                  -> Authorized       [RequestConfiguration]
    RadioAttached x AuthzDenied                   -> Rejected
    Authorized    x ConfigDelivered               -> Configured       [RegisterAtCuc] or [Activate]
    Authorized    x ConfigUnavailable             -> Authorized       [RetryConfiguration]
                                                  or Rejected once retries are exhausted
    Configured    x CucRegistered  (TSN only)     -> TsnRegistered    [AnnounceReady, Activate]
    Configured    x CucRejected    (TSN only)     -> Rejected
    Configured    x Activate       (non-TSN)      -> Operational
    TsnRegistered x Activate                      -> Operational
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Union

from .model import RegistrationState as S

CONFIG_RETRY_BASE = 1_000
CONFIG_RETRY_FACTOR = 2
CONFIG_MAX_RETRIES = 5

# System identifiers used in authorization scopes.
CONFIG_SERVER = "ConfigServer"
CUC = "CUC"


@dataclass(frozen=True)
class DeviceConfig:
    device_id: str
    settings: Mapping[str, object] = field(default_factory=dict)
    authorized_systems: frozenset[str] = frozenset({CONFIG_SERVER, CUC})
    tsn_transmission_type: str | None = None

    def to_json(self) -> dict:
        out = {
            "device_id": self.device_id,
            "settings": dict(self.settings),
            "authorized_systems": sorted(self.authorized_systems),
        }
        if self.tsn_transmission_type is not None:
            out["tsn_transmission_type"] = self.tsn_transmission_type
        return out


# -- events -----------------------------------------------------------------


@dataclass(frozen=True)
class OperatorProvision:
    config: DeviceConfig | None
    secure_element_id: str


@dataclass(frozen=True)
class RadioAttachOk:
    pass


@dataclass(frozen=True)
class RadioAttachFail:
    reason: str = "AuthFailure"


@dataclass(frozen=True)
class AuthzGranted:
    scope: frozenset[str]


@dataclass(frozen=True)
class AuthzDenied:
    reason: str


@dataclass(frozen=True)
class ConfigDelivered:
    config: DeviceConfig


@dataclass(frozen=True)
class ConfigUnavailable:
    """``attempt`` counts configuration requests so far, the failed one included."""

    attempt: int = 1
    permanent: bool = False


@dataclass(frozen=True)
class CucRegistered:
    transmission_type: str = "E2E"


@dataclass(frozen=True)
class CucRejected:
    reason: str = "Rejected"


@dataclass(frozen=True)
class Activate:
    """Zero-delay internal event that completes registration."""


RegistrationEvent = Union[
    OperatorProvision,
    RadioAttachOk,
    RadioAttachFail,
    AuthzGranted,
    AuthzDenied,
    ConfigDelivered,
    ConfigUnavailable,
    CucRegistered,
    CucRejected,
    Activate,
]

ALL_EVENT_TYPES = (
    OperatorProvision,
    RadioAttachOk,
    RadioAttachFail,
    AuthzGranted,
    AuthzDenied,
    ConfigDelivered,
    ConfigUnavailable,
    CucRegistered,
    CucRejected,
    Activate,
)


# -- actions ----------------------------------------------------------------


@dataclass(frozen=True)
class PowerOn:
    pass


@dataclass(frozen=True)
class RequestAuthorization:
    pass


@dataclass(frozen=True)
class RequestConfiguration:
    attempt: int = 1


@dataclass(frozen=True)
class RetryConfiguration:
    delay: int
    attempt: int


@dataclass(frozen=True)
class RegisterAtCuc:
    pass


@dataclass(frozen=True)
class AnnounceReady:
    pass


@dataclass(frozen=True)
class ScheduleActivate:
    pass


@dataclass(frozen=True)
class IllegalTransition:
    state: S
    event: str


Action = Union[
    PowerOn,
    RequestAuthorization,
    RequestConfiguration,
    RetryConfiguration,
    RegisterAtCuc,
    AnnounceReady,
    ScheduleActivate,
    IllegalTransition,
]


@dataclass(frozen=True)
class Step:
    state: S
    actions: tuple[Action, ...] = ()

    @property
    def legal(self) -> bool:
        return not any(isinstance(a, IllegalTransition) for a in self.actions)


def backoff(attempt: int) -> int:
    return CONFIG_RETRY_BASE * CONFIG_RETRY_FACTOR ** (attempt - 1)


def transition(state: S, event: RegistrationEvent, is_tsn_end_device: bool) -> Step:
    """Next state and actions for ``event``; illegal pairs keep the state and
    carry a single IllegalTransition action."""
    ev = type(event)
    if ev is OperatorProvision and state in (S.Unprovisioned, S.Rejected):
        return Step(S.Provisioned, (PowerOn(),))
    if state is S.Provisioned:
        if ev is RadioAttachOk:
            return Step(S.RadioAttached, (RequestAuthorization(),))
        if ev is RadioAttachFail:
            return Step(S.Rejected)
    elif state is S.RadioAttached:
        if ev is AuthzGranted:
            return Step(S.Authorized, (RequestConfiguration(),))
        if ev is AuthzDenied:
            return Step(S.Rejected)
    elif state is S.Authorized:
        if ev is ConfigDelivered:
            return Step(S.Configured, (RegisterAtCuc(),) if is_tsn_end_device else (ScheduleActivate(),))
        if ev is ConfigUnavailable:
            if event.permanent or event.attempt > CONFIG_MAX_RETRIES:
                return Step(S.Rejected)
            return Step(S.Authorized, (RetryConfiguration(backoff(event.attempt), event.attempt + 1),))
    elif state is S.Configured:
        if is_tsn_end_device:
            if ev is CucRegistered:
                return Step(S.TsnRegistered, (AnnounceReady(), ScheduleActivate()))
            if ev is CucRejected:
                return Step(S.Rejected)
        elif ev is Activate:
            return Step(S.Operational)
    elif state is S.TsnRegistered and ev is Activate:
        return Step(S.Operational)
    return Step(state, (IllegalTransition(state, ev.__name__),))


# -- configuration server ---------------------------------------------------


class ConfigLocked(Exception):
    pass


# Config may be (re)written only while the device has not progressed past Provisioned.
_WRITABLE = (S.Unprovisioned, S.Provisioned, S.Rejected)


class ConfigServer:
    def __init__(self, device_state: Callable[[str], S | None] = lambda _id: None):
        self._configs: dict[str, DeviceConfig] = {}
        self._device_state = device_state

    def store_config(self, config: DeviceConfig) -> None:
        state = self._device_state(config.device_id)
        if state is not None and state not in _WRITABLE:
            raise ConfigLocked(f"{config.device_id} is {state.value}; config is locked")
        self._configs[config.device_id] = config

    def fetch_config(self, device_id: str, unavailable: bool = False) -> DeviceConfig | ConfigUnavailable:
        if unavailable or device_id not in self._configs:
            return ConfigUnavailable()
        return self._configs[device_id]

    def __contains__(self, device_id: str) -> bool:
        return device_id in self._configs
