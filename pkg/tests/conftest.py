import random

import pytest

from caesar.he import HEParams, keygen


def _pair(scheme, bits, tag):
    return (
        keygen(HEParams(scheme, bits), random.Random(f"{tag}:A"), "A"),
        keygen(HEParams(scheme, bits), random.Random(f"{tag}:B"), "B"),
    )


@pytest.fixture(scope="session")
def ou1024():
    return _pair("OU", 1024, "ou1024")


@pytest.fixture(scope="session")
def paillier1024():
    return _pair("PAILLIER", 1024, "pa1024")


@pytest.fixture(scope="session")
def ou2048():
    return _pair("OU", 2048, "ou2048")


@pytest.fixture(scope="session")
def paillier2048():
    return _pair("PAILLIER", 2048, "pa2048")
