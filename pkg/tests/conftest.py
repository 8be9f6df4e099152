import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hhpor.client import PORClient
from hhpor.params import SecretState, SystemParams, setup_profile
from hhpor.server import PORServer
from hhpor.sigtag import get_scheme
from hhpor.transport import Channel, LoopbackTransport


@pytest.fixture(scope="session")
def toy():
    """Hand-checkable field: p=103, q=17, g=64, n=4, m=2, gamma=[2,3]."""
    psk, ssk = get_scheme("ed25519").keygen(random.Random(7))
    params = SystemParams(
        lam=2, lambda_p=7, lambda_q=5, p=103, q=17, m=2, gens=(79, 9),
        omega=2, n=4, fid=bytes(range(16)), psk=psk,
    )
    return params, SecretState(ssk=ssk, g=64, gamma=(2, 3))


@pytest.fixture(scope="session")
def toy16():
    return setup_profile("toy", 16, random.Random(16))


@pytest.fixture(scope="session")
def toy64():
    return setup_profile("toy", 64, random.Random(64))


class System:
    """Client, honest server and loopback channel around one file."""

    def __init__(self, params, secret, payloads, seed=0):
        self.params, self.secret = params, secret
        self.server = PORServer(params, random.Random(seed))
        self.channel = Channel(params, LoopbackTransport(self.server))
        self.client = PORClient.init(params, secret, payloads, self.channel)
        self.ref = list(payloads)
        self.rng = random.Random(seed + 1)

    def random_payload(self):
        return self.rng.randbytes(self.rng.randrange(1, self.params.payload_capacity + 1))

    def random_write(self):
        """One random modify/insert/delete applied to client and reference."""
        size, n = len(self.ref), self.params.n
        kinds = [k for k, ok in (("modify", size), ("insert", size < n), ("delete", size)) if ok]
        kind = self.rng.choice(kinds)
        if kind == "modify":
            i = self.rng.randrange(size)
            data = self.random_payload()
            self.client.modify(i, data)
            self.ref[i] = data
        elif kind == "insert":
            i = self.rng.randrange(size + 1)
            data = self.random_payload()
            self.client.insert(i, data)
            self.ref.insert(i, data)
        else:
            i = self.rng.randrange(size)
            self.client.delete(i)
            self.ref.pop(i)
        return kind

    @property
    def statement(self):
        return self.server.store.statement


@pytest.fixture
def make_system():
    def build(params_secret, blocks=None, seed=0):
        params, secret = params_secret
        rng = random.Random(seed)
        count = params.n // 2 if blocks is None else blocks
        payloads = [rng.randbytes(params.payload_capacity) for _ in range(count)]
        return System(params, secret, payloads, seed)

    return build
