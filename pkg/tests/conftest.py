import random

import pytest

from privshare import paillier

TEST_PRIME_BITS = 256  # unit tests run on small keys; benchmarks use 512


@pytest.fixture(scope="session")
def keypair():
    return paillier.keygen(TEST_PRIME_BITS, random.Random(0xC0FFEE))


@pytest.fixture()
def rng():
    return random.Random(1234)


def random_gray_image(rng, width=None, height=None):
    from privshare.rop import GrayImage

    width = width or rng.randrange(16, 96)
    height = height or rng.randrange(16, 96)
    return GrayImage(width, height,
                     bytes(rng.randrange(256) for _ in range(width * height)))


def random_rect(rng, img):
    from privshare.rop import RopRect

    left = rng.randrange(0, img.width - 1)
    top = rng.randrange(0, img.height - 1)
    right = rng.randrange(left + 1, img.width + 1)
    bottom = rng.randrange(top + 1, img.height + 1)
    return RopRect(left, top, right, bottom)
