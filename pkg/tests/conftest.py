import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from fsccert.channel import (  # noqa: E402
    DelayedActivationSpec,
    Variant,
    bsc,
    identity_channel,
    make_delayed_activation,
)


@pytest.fixture
def rng():
    return random.Random(20240601)


@pytest.fixture
def identity():
    return identity_channel()


@pytest.fixture
def half_bsc():
    return bsc("1/2")


@pytest.fixture
def good1():
    return make_delayed_activation(DelayedActivationSpec(1, Variant.GOOD))


@pytest.fixture
def bad1():
    return make_delayed_activation(DelayedActivationSpec(1, Variant.BAD))


@pytest.fixture
def good2():
    return make_delayed_activation(DelayedActivationSpec(2, Variant.GOOD))


@pytest.fixture
def data_dir(tmp_path, monkeypatch):
    """Point API storage at a temporary directory."""
    from api.services import certificate_service, value_service

    monkeypatch.setattr(value_service, "RUNS_DIR", tmp_path / "runs")
    monkeypatch.setattr(certificate_service, "CERTIFICATES_DIR", tmp_path / "certificates")
    return tmp_path
