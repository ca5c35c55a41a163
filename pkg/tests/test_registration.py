import itertools

import pytest
from hypothesis import given, strategies as st

from tacnet.model import RegistrationState as S
from tacnet.registration import (
    CONFIG_MAX_RETRIES,
    Activate,
    AnnounceReady,
    AuthzDenied,
    AuthzGranted,
    ConfigDelivered,
    ConfigLocked,
    ConfigServer,
    ConfigUnavailable,
    CucRegistered,
    CucRejected,
    DeviceConfig,
    IllegalTransition,
    OperatorProvision,
    PowerOn,
    RadioAttachFail,
    RadioAttachOk,
    RegisterAtCuc,
    RequestAuthorization,
    RequestConfiguration,
    RetryConfiguration,
    ScheduleActivate,
    backoff,
    transition,
)

CFG = DeviceConfig("d1", {"k": 1})

SAMPLE_EVENTS = [
    OperatorProvision(CFG, "se"),
    RadioAttachOk(),
    RadioAttachFail(),
    AuthzGranted(frozenset({"ConfigServer"})),
    AuthzDenied("x"),
    ConfigDelivered(CFG),
    ConfigUnavailable(1),
    CucRegistered(),
    CucRejected(),
    Activate(),
]

# The legal relation written out as a table: (state, event, tsn) -> next state.
TABLE = {}
for tsn in (False, True):
    TABLE[(S.Unprovisioned, OperatorProvision, tsn)] = S.Provisioned
    TABLE[(S.Rejected, OperatorProvision, tsn)] = S.Provisioned
    TABLE[(S.Provisioned, RadioAttachOk, tsn)] = S.RadioAttached
    TABLE[(S.Provisioned, RadioAttachFail, tsn)] = S.Rejected
    TABLE[(S.RadioAttached, AuthzGranted, tsn)] = S.Authorized
    TABLE[(S.RadioAttached, AuthzDenied, tsn)] = S.Rejected
    TABLE[(S.Authorized, ConfigDelivered, tsn)] = S.Configured
    TABLE[(S.Authorized, ConfigUnavailable, tsn)] = S.Authorized
    TABLE[(S.TsnRegistered, Activate, tsn)] = S.Operational
TABLE[(S.Configured, CucRegistered, True)] = S.TsnRegistered
TABLE[(S.Configured, CucRejected, True)] = S.Rejected
TABLE[(S.Configured, Activate, False)] = S.Operational


class TestTransition:
    def test_provision(self):
        step = transition(S.Unprovisioned, OperatorProvision(CFG, "se"), False)
        assert step.state is S.Provisioned and step.actions == (PowerOn(),)

    def test_attach_then_authorize(self):
        assert transition(S.Provisioned, RadioAttachOk(), False).actions == (RequestAuthorization(),)
        step = transition(S.RadioAttached, AuthzGranted(frozenset()), False)
        assert step.state is S.Authorized and step.actions == (RequestConfiguration(),)

    def test_authz_denied_rejects(self):
        assert transition(S.RadioAttached, AuthzDenied("SignatureMismatch"), False).state is S.Rejected

    def test_tsn_device_goes_through_cuc(self):
        step = transition(S.Authorized, ConfigDelivered(CFG), True)
        assert step.state is S.Configured and step.actions == (RegisterAtCuc(),)
        step = transition(S.Configured, CucRegistered("E2E"), True)
        assert step.state is S.TsnRegistered and step.actions == (AnnounceReady(), ScheduleActivate())
        assert transition(S.TsnRegistered, Activate(), True).state is S.Operational

    def test_non_tsn_device_skips_cuc(self):
        step = transition(S.Authorized, ConfigDelivered(CFG), False)
        assert step.actions == (ScheduleActivate(),)
        assert transition(S.Configured, Activate(), False).state is S.Operational
        assert not transition(S.Configured, CucRegistered(), False).legal

    def test_illegal_is_explicit(self):
        step = transition(S.Operational, RadioAttachOk(), False)
        assert step.state is S.Operational
        assert step.actions == (IllegalTransition(S.Operational, "RadioAttachOk"),)
        assert not step.legal

    def test_config_retry_backoff(self):
        delays = []
        for attempt in range(1, CONFIG_MAX_RETRIES + 1):
            step = transition(S.Authorized, ConfigUnavailable(attempt), False)
            assert step.state is S.Authorized
            (retry,) = step.actions
            assert isinstance(retry, RetryConfiguration) and retry.attempt == attempt + 1
            delays.append(retry.delay)
        assert delays == [1_000, 2_000, 4_000, 8_000, 16_000]
        assert delays == [backoff(a) for a in range(1, 6)]
        assert transition(S.Authorized, ConfigUnavailable(CONFIG_MAX_RETRIES + 1), False).state is S.Rejected
        assert transition(S.Authorized, ConfigUnavailable(1, permanent=True), False).state is S.Rejected

    @pytest.mark.parametrize("state,event,tsn", list(itertools.product(S, SAMPLE_EVENTS, (False, True))))
    def test_total_over_cross_product(self, state, event, tsn):
        step = transition(state, event, tsn)
        expected = TABLE.get((state, type(event), tsn))
        if expected is None:
            assert not step.legal and step.state is state
        else:
            assert step.legal and step.state is expected

    def test_rejected_only_accepts_operator_provision(self):
        for event in SAMPLE_EVENTS:
            legal = transition(S.Rejected, event, True).legal
            assert legal == isinstance(event, OperatorProvision)

    def test_tsn_registered_unreachable_without_tsn(self):
        for state in S:
            for event in SAMPLE_EVENTS:
                step = transition(state, event, False)
                assert step.state is not S.TsnRegistered or state is S.TsnRegistered

    @given(st.lists(st.sampled_from(SAMPLE_EVENTS), max_size=30), st.booleans())
    def test_monotone_progress(self, events, tsn):
        state = S.Unprovisioned
        for ev in events:
            nxt = transition(state, ev, tsn).state
            if nxt is not S.Rejected and not isinstance(ev, OperatorProvision):
                assert nxt.progress >= state.progress
            state = nxt


class TestConfigServer:
    def test_round_trip(self):
        srv = ConfigServer()
        srv.store_config(CFG)
        assert srv.fetch_config("d1") == CFG

    def test_unknown_and_fault_window(self):
        srv = ConfigServer()
        assert isinstance(srv.fetch_config("nobody"), ConfigUnavailable)
        srv.store_config(CFG)
        assert isinstance(srv.fetch_config("d1", unavailable=True), ConfigUnavailable)

    def test_locked_once_registration_progresses(self):
        states = {"d1": S.Operational}
        srv = ConfigServer(states.get)
        with pytest.raises(ConfigLocked):
            srv.store_config(CFG)
        for ok in (S.Unprovisioned, S.Rejected):
            states["d1"] = ok
            srv.store_config(CFG)
        states["d1"] = S.Authorized
        with pytest.raises(ConfigLocked):
            srv.store_config(CFG)

    def test_store_before_device_exists(self):
        srv = ConfigServer(lambda _id: None)
        srv.store_config(DeviceConfig("future"))
        assert "future" in srv
